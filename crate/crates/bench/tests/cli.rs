use std::process::Command;

use hardbc_bench::output::RESULT_COLUMNS;

fn hardbc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hardbc"))
}

fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("hardbc-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn verify_bc_passes_on_a_custom_square() {
    let dir = scratch("verify");
    std::fs::create_dir_all(&dir).unwrap();
    let spec = dir.join("square.json");
    std::fs::write(
        &spec,
        r#"{
  "name": "square",
  "problem": { "kind": "poisson" },
  "corners": { "A": [0, 0], "B": [1, 0], "C": [1, 1], "D": [0, 1] },
  "segments": [
    { "name": "1", "from": "A", "to": "B", "bc": { "dirichlet": "x^2" } },
    { "name": "2", "from": "B", "to": "C", "bc": { "robin": { "c": "1", "h": "y" } } },
    { "name": "3", "from": "C", "to": "D", "bc": { "neumann": "0" } },
    { "name": "4", "from": "D", "to": "A", "bc": { "dirichlet": "y" } }
  ],
  "verify_grids": [[101, 101], [201, 201], [401, 401]],
  "training": { "grid": [21, 21], "epochs": 10, "lr": 0.001, "milestone": 5 }
}"#,
    )
    .unwrap();
    let out = hardbc()
        .args(["verify-bc", "--trials", "3", "--spec"])
        .arg(&spec)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout.lines().filter(|l| l.ends_with("PASS")).count(), 2, "{stdout}");
}

#[test]
fn short_darcy_sweep_writes_results() {
    let dir = scratch("darcy");
    let out = hardbc()
        .args(["darcy", "--mode", "op", "--grid", "21", "21", "--epochs", "3", "--pairs", "2", "--quiet", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_path(dir.join("results.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, RESULT_COLUMNS);
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(&row[1], "op");
        let a: f64 = row[2].parse().unwrap();
        assert!((1.0..4.0).contains(&a));
        assert!(row[8].parse::<f64>().unwrap().is_finite());
        let run = dir.join(format!("darcy_op_pair{i}"));
        for f in ["losses.csv", "field_u.csv", "field_u.png", "error_u.png", "residual_0.png", "model.ckpt"] {
            assert!(run.join(f).exists(), "{f}");
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn malformed_spec_exits_with_an_error() {
    let dir = scratch("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let spec = dir.join("bad.json");
    std::fs::write(&spec, "{ \"name\": ").unwrap();
    let out = hardbc().args(["poisson", "--spec"]).arg(&spec).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}
