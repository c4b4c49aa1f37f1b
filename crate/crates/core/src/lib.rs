//! LITE and LITEMV time series classifiers, implemented from scratch:
//! a deterministic `f32` tensor engine with hand-written backward passes,
//! fixed custom-filter banks, declarative architecture construction with
//! analytic parameter/multiplication/receptive-field accounting, Adam
//! training with reduce-on-plateau, ensembling, class activation maps,
//! archive dataset IO and classifier-comparison statistics.

pub mod arch;
pub mod cam;
pub mod container;
pub mod conv;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod filters;
pub mod init;
pub mod model;
pub mod norm;
pub mod ops;
pub mod reference;
pub mod resample;
pub mod stats;
pub mod synth;
pub mod tensor;
pub mod train;

pub use arch::{ArchConfig, LiteConfig};
pub use data::Dataset;
pub use error::{Error, Result};
pub use model::ModelState;
pub use tensor::Tensor;
pub use train::TrainConfig;
