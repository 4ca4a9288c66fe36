//! Connected Hidden Neurons (CHNNet) and a dense baseline.
//!
//! A CHN hidden layer computes `H = W1·A + B`, then `Z = (I + W2)·H`, so
//! every neuron of the layer also receives the pre-activations of its
//! siblings. Everything is column-major by sample: a batch of `b` inputs of
//! width `d` is a `d×b` [`Matrix`].
//!
//! ```
//! use chnnet::{ArchSpec, GradMode, InitScheme, LayerKind, Labels, Mat, Net};
//!
//! let arch = ArchSpec::parse("8-8-3", 4, LayerKind::Chn).unwrap();
//! assert_eq!(arch.param_count(), 4 * 8 + 8 + 64 + 8 * 8 + 8 + 64 + 3 * 8 + 3);
//! let net = Net::build(&arch, InitScheme::Glorot, 1).unwrap();
//! let x = Mat::filled(4, 2, 0.5);
//! let y = Labels::new(vec![0, 2]);
//! let (loss, grads) = net.loss_and_grads(&x, &y, GradMode::Paper).unwrap();
//! assert!(loss > 0.0);
//! assert_eq!(grads.len(), net.params().len());
//! ```

pub mod activation;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod layers;
pub mod matrix;
pub mod network;
pub mod optim;
pub mod presets;
pub mod scalar;
pub mod seed;
pub mod stats;

pub use activation::{relu, relu_grad, softmax, softmax_ce_backward, sparse_ce_loss, Labels};
pub use data::{BatchPlan, Dataset, DatasetName, IdxImages, Split};
pub use error::{Error, Result};
pub use experiment::{
    compare, evaluate, train, Comparison, ComparisonOutput, EpochRecord, ModelSummary, RunConfig,
    RunReport,
};
pub use gradcheck::{check_network, CheckOptions, GradReport, ParamReport};
pub use layers::{ChnParams, DenseParams, GradMode, InitScheme, Layer, LayerKind};
pub use matrix::Matrix;
pub use network::{ArchSpec, Network};
pub use optim::{OptState, OptimizerConfig, RmsPropState};
pub use presets::{Preset, PRESETS};
pub use scalar::Scalar;
pub use stats::{mean_std, welch_t, SampleSet, TTestResult};

pub type Mat = Matrix<f64>;
pub type Net = Network<f64>;
pub type Data = Dataset<f64>;
pub type Mat32 = Matrix<f32>;
pub type Net32 = Network<f32>;
