//! Error-gated ("lazy") one-sample SGD with path-energy accounting.
//!
//! Three update rules share one training loop: backprop updates on every
//! presented sample, pure-lazy only on currently misclassified samples, and
//! lazy on any sample that has ever been misclassified. Every run tracks the
//! L1 length of the weight path (`M`), its straight-line lower bound
//! (`M_min`) and the number of update events.
//!
//! Numeric code is generic over [`Scalar`] (`f32`/`f64`); the aliases below
//! fix the common choices.

pub mod cli;
pub mod datasets;
pub mod energy;
pub mod error;
pub mod gating;
pub mod landscape;
pub mod model;
pub mod report;
pub mod scalar;
pub mod trainer;

pub use datasets::{load_idx, make_two_clouds, shuffled_order, Dataset, ToyTaskSpec};
pub use energy::{inefficiency, EfficiencyReport, EnergyLedger};
pub use error::{Error, Result};
pub use gating::{export_coreset, GateDecision, GateKind, UpdateGate};
pub use landscape::{preset_initial_conditions, sample_surface, trace_run, GridSpec, SurfaceGrid, Trajectory};
pub use model::{backward_mlp, backward_toy, forward_mlp, init_mlp, mse_loss, LinearToyModel, MlpModel, Model, ToyTargets};
pub use scalar::Scalar;
pub use trainer::{evaluate, run_experiment, train_step, MetricsRecord, RunStatus, RunSummary, TrainConfig, Trainer};

pub type Mlp = MlpModel<f64>;
pub type MlpF32 = MlpModel<f32>;
pub type ToyModel = LinearToyModel<f64>;
pub type ToyModelF32 = LinearToyModel<f32>;
pub type ImageDataset = Dataset<f64>;
pub type ImageDatasetF32 = Dataset<f32>;
