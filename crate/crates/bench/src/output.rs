//! CSV tables and heatmap images.

use std::path::Path;

use hardbc_core::geometry::PointClass;
use hardbc_core::grid::Grid;
use hardbc_core::train::LossReport;
use image::{Rgb, RgbImage};

use crate::run::RunResult;
use crate::BenchError;

/// Rows `x, y, value` for every node not outside the domain.
pub fn write_field_csv(path: &Path, grid: &Grid, values: &[f64]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "value"])?;
    for k in 0..grid.len() {
        if grid.class(k) == PointClass::Outside {
            continue;
        }
        let p = grid.point(k);
        w.write_record([p.x.to_string(), p.y.to_string(), values[k].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per epoch: losses, learning rate and per-component errors.
pub fn write_losses_csv(path: &Path, report: &LossReport) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["epoch".to_string(), "loss_total".into(), "loss_pde".into(), "loss_bc".into(), "lr".into()];
    let with_err = report.rows.first().is_some_and(|r| !r.err_l2.is_empty());
    if with_err {
        header.extend(report.component_names.iter().map(|c| format!("err_l2_{c}")));
    }
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![
            r.epoch.to_string(),
            r.loss_total.to_string(),
            r.loss_pde.to_string(),
            r.loss_bc.to_string(),
            r.lr.to_string(),
        ];
        if with_err {
            rec.extend(r.err_l2.iter().map(|e| e.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const RESULT_COLUMNS: [&str; 17] = [
    "problem", "mode", "alpha", "beta", "seed", "epochs", "nx", "ny", "err_u", "err_v", "err_p", "delta_p",
    "c_d", "c_l", "final_loss", "loss_drop", "wall_time_s",
];

/// One row per run; columns that do not apply are left empty.
pub fn write_results_csv(path: &Path, results: &[RunResult]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in results {
        let err = |i: usize| opt(r.errors.get(i).copied().filter(|e| e.is_finite()));
        let d = r.diagnostics;
        w.write_record([
            r.problem.clone(),
            r.mode.to_string(),
            opt(r.params.map(|p| p.0)),
            opt(r.params.map(|p| p.1)),
            r.seed.to_string(),
            r.epochs.to_string(),
            r.grid.0.to_string(),
            r.grid.1.to_string(),
            err(0),
            err(1),
            err(2),
            opt(d.map(|d| d.delta_p)),
            opt(d.map(|d| d.c_d)),
            opt(d.map(|d| d.c_l)),
            r.final_loss.to_string(),
            r.loss_drop.to_string(),
            format!("{:.3}", r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Heatmap with `y` pointing up; outside nodes are grey. The image is scaled
/// by an integer factor so that small grids stay legible.
pub fn write_heatmap(path: &Path, grid: &Grid, values: &[f64]) -> Result<(), BenchError> {
    let shown: Vec<f64> = (0..grid.len())
        .filter(|&k| grid.class(k) != PointClass::Outside && values[k].is_finite())
        .map(|k| values[k])
        .collect();
    let lo = shown.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = shown.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let scale = (400 / grid.nx.max(grid.ny)).max(1) as u32;
    let (w, h) = (grid.nx as u32 * scale, grid.ny as u32 * scale);
    let mut img = RgbImage::new(w, h);
    for (px, py, pixel) in img.enumerate_pixels_mut() {
        let i = (px / scale) as usize;
        let j = grid.ny - 1 - (py / scale) as usize;
        let k = grid.idx(i, j);
        *pixel = if grid.class(k) == PointClass::Outside || !values[k].is_finite() {
            Rgb([128, 128, 128])
        } else {
            colormap((values[k] - lo) / span)
        };
    }
    img.save(path)?;
    Ok(())
}

/// Blue to white to red.
fn colormap(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (s, s, 1.0)
    } else {
        let s = (1.0 - t) / 0.5;
        (1.0, s, s)
    };
    Rgb([(r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8])
}
