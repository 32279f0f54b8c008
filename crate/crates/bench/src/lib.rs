//! Poisson, Darcy and Navier-Stokes problems on top of `hardbc-core`: problem
//! files, residuals, metrics, flow diagnostics and run orchestration.

pub mod metrics;
pub mod output;
pub mod physics;
pub mod problem;
pub mod run;

use hardbc_core::geometry::GeometryError;
use hardbc_core::grid::GridError;
use hardbc_core::structure::StructureError;
use hardbc_core::train::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("problem spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("reference field has zero norm")]
    ZeroReference,
    #[error("cannot sample the flow at probe point ({x}, {y})")]
    Probe { x: f64, y: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}
