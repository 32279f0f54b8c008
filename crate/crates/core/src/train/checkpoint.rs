//! Checkpoints: one JSON header line, then the parameters as little-endian f64.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mlp, TrainError};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub sizes: Vec<usize>,
    pub bbox: BoundingBox,
    pub n_params: usize,
    pub seed: u64,
    pub epoch: usize,
    /// Fingerprint of the structure the slots were trained for.
    pub structure: String,
}

pub fn save_checkpoint(
    path: &Path,
    mlp: &Mlp,
    seed: u64,
    epoch: usize,
    structure: &str,
) -> Result<(), TrainError> {
    let header = CheckpointHeader {
        sizes: mlp.sizes.clone(),
        bbox: mlp.bbox,
        n_params: mlp.n_params(),
        seed,
        epoch,
        structure: structure.to_string(),
    };
    let mut f = std::io::BufWriter::new(File::create(path)?);
    let line = serde_json::to_string(&header).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
    writeln!(f, "{line}")?;
    for p in &mlp.params {
        f.write_all(&p.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

/// Read a checkpoint. With `expect_structure`, a fingerprint mismatch is an
/// error.
pub fn load_checkpoint(
    path: &Path,
    expect_structure: Option<&str>,
) -> Result<(CheckpointHeader, Mlp), TrainError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: CheckpointHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| TrainError::Checkpoint(e.to_string()))?;
    if let Some(fp) = expect_structure {
        if fp != header.structure {
            return Err(TrainError::Checkpoint(format!(
                "trained for structure {}, loading into {fp}",
                header.structure
            )));
        }
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * header.n_params {
        return Err(TrainError::Checkpoint(format!(
            "expected {} parameters, found {} bytes",
            header.n_params,
            bytes.len()
        )));
    }
    let params: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mlp = Mlp {
        sizes: header.sizes.clone(),
        params,
        bbox: header.bbox,
    };
    if mlp.n_params() != expected_params(&mlp.sizes) {
        return Err(TrainError::Checkpoint("layer sizes do not match parameter count".into()));
    }
    Ok((header, mlp))
}

fn expected_params(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}
