//! Data-driven output regulation with a Gaussian-process feedforward learned
//! online over a linear internal model, simulated as a hybrid system.

pub mod config;
pub mod experiment;
pub mod gp;
pub mod internal_model;
pub mod numerics;
pub mod plants;
pub mod regulator;
pub mod window;

pub use config::{parse_config, ExperimentConfig, PlantKind};
pub use experiment::{run_experiment, write_trajectory, RunMetrics};
pub use gp::{GpModel, Kernel};
pub use internal_model::InternalModel;
pub use plants::PlantModel;
pub use regulator::{simulate, HybridTrajectory, RegulatorConfig};
pub use window::WindowBuffer;
