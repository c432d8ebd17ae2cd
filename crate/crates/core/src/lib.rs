//! Federated learning simulator for local model poisoning attacks
//! (DISBELIEVE, LIE, Min-Max and simple perturbations) against robust
//! aggregation rules (KRUM, Trimmed Mean, DOS).
//!
//! Everything operates on flat [`ParamVector`]s; the model is a small MLP so
//! experiments run at desk scale and are bit-for-bit reproducible from a seed.

pub mod aggregation;
pub mod attacks;
pub mod data;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod train;
pub mod vector;

pub use aggregation::{AggregationOutcome, ClientUpdate, Defense, UpdateKind};
pub use attacks::{AttackDiagnostics, AttackKind};
pub use data::{Dataset, Partition, SplitDataset};
pub use error::{Error, Result};
pub use federation::{ExperimentConfig, RoundRecord};
pub use nn::{Batch, LossSign, Matrix, ModelSpec, ModelState, OptimizerConfig, OptimizerKind};
pub use vector::ParamVector;
