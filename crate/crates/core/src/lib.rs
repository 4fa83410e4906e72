//! Weakly supervised instance segmentation on superpoint graphs: synthetic
//! scenes, oversegmentation, affinity-guided label propagation,
//! volume-aware clustering, loss evaluators, and metrics.

pub mod affinity;
pub mod error;
pub mod eval;
pub mod geom;
pub mod instance;
pub mod losses;
pub mod overseg;
pub mod pcio;
pub mod pipeline;
pub mod propagate;
pub mod provider;
pub mod sparse;
pub mod spgraph;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{MetricsReport, PseudoLabelQuality};
pub use instance::{Instance, InstanceSet};
pub use overseg::Superpointization;
pub use pcio::PointCloud;
pub use propagate::{PropagationMode, SourcePolicy};
pub use provider::PredictionBundle;
pub use spgraph::SuperpointGraph;
pub use synth::SceneSpec;
