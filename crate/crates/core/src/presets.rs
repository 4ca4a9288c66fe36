//! Bundled experiment presets.
//!
//! Arch-1..3 use the same hidden widths for both models. Arch-4..6 widen the
//! dense baseline so its parameter count roughly matches the CHN network of
//! Arch-1..3 respectively; the CHN side of those presets is unchanged.

use crate::data::DatasetName;
use crate::error::{Error, Result};
use crate::layers::LayerKind;
use crate::network::ArchSpec;
use crate::optim::OptimizerConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub dataset: DatasetName,
    /// Short architecture tag used in output file names, e.g. `arch-4`.
    pub arch_tag: &'static str,
    pub fnn_arch: &'static str,
    pub chn_arch: &'static str,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
}

macro_rules! preset {
    ($name:literal, $ds:ident, $tag:literal, $fnn:expr, $chn:expr, $opt:expr, $bs:expr) => {
        Preset {
            name: $name,
            dataset: DatasetName::$ds,
            arch_tag: $tag,
            fnn_arch: $fnn,
            chn_arch: $chn,
            optimizer: $opt,
            batch_size: $bs,
        }
    };
}

const MNIST_OPT: OptimizerConfig = OptimizerConfig::RmsProp {
    learning_rate: 1e-4,
    rho: crate::optim::RMSPROP_RHO,
    epsilon: crate::optim::RMSPROP_EPS,
};
const SGD_OPT: OptimizerConfig = OptimizerConfig::Sgd {
    learning_rate: 1e-3,
};

const M1: &str = "96-96-96-96-10";
const M2: &str = "256-256-256-256-256-256-10";
const M3: &str = "288-256-224-192-160-128-96-64-10";
const F1: &str = "512-512-512-10";
const F2: &str = "256-256-256-256-256-256-10";
const F3: &str = "928-800-672-544-416-288-160-32-10";
const E1: &str = "768-768-768-62";
const E2: &str = "320-320-320-320-320-320-62";
// Sixth hidden width is 384, not 348: only 384 yields 3,567,934 (dense) and
// 6,910,270 (CHN) trainable parameters.
const E3: &str = "1024-896-768-640-512-384-256-128-62";

pub const PRESETS: [Preset; 18] = [
    preset!("mnist-arch-1", Mnist, "arch-1", M1, M1, MNIST_OPT, 512),
    preset!("mnist-arch-2", Mnist, "arch-2", M2, M2, MNIST_OPT, 512),
    preset!("mnist-arch-3", Mnist, "arch-3", M3, M3, MNIST_OPT, 512),
    preset!(
        "mnist-arch-4",
        Mnist,
        "arch-4",
        "126-126-126-126-10",
        M1,
        MNIST_OPT,
        512
    ),
    preset!(
        "mnist-arch-5",
        Mnist,
        "arch-5",
        "360-360-360-360-360-360-10",
        M2,
        MNIST_OPT,
        512
    ),
    preset!(
        "mnist-arch-6",
        Mnist,
        "arch-6",
        "360-334-304-268-238-208-176-142-10",
        M3,
        MNIST_OPT,
        512
    ),
    preset!("fmnist-arch-1", Fmnist, "arch-1", F1, F1, SGD_OPT, 32),
    preset!("fmnist-arch-2", Fmnist, "arch-2", F2, F2, SGD_OPT, 32),
    preset!("fmnist-arch-3", Fmnist, "arch-3", F3, F3, SGD_OPT, 32),
    preset!(
        "fmnist-arch-4",
        Fmnist,
        "arch-4",
        "749-749-749-10",
        F1,
        SGD_OPT,
        32
    ),
    preset!(
        "fmnist-arch-5",
        Fmnist,
        "arch-5",
        "358-358-358-358-358-358-10",
        F2,
        SGD_OPT,
        32
    ),
    preset!(
        "fmnist-arch-6",
        Fmnist,
        "arch-6",
        "1184-1056-928-800-704-604-448-352-10",
        F3,
        SGD_OPT,
        32
    ),
    preset!("emnist-arch-1", Emnist, "arch-1", E1, E1, SGD_OPT, 32),
    preset!("emnist-arch-2", Emnist, "arch-2", E2, E2, SGD_OPT, 32),
    preset!("emnist-arch-3", Emnist, "arch-3", E3, E3, SGD_OPT, 32),
    preset!(
        "emnist-arch-4",
        Emnist,
        "arch-4",
        "1152-1152-1152-62",
        E1,
        SGD_OPT,
        32
    ),
    preset!(
        "emnist-arch-5",
        Emnist,
        "arch-5",
        "412-412-412-412-412-412-62",
        E2,
        SGD_OPT,
        32
    ),
    preset!(
        "emnist-arch-6",
        Emnist,
        "arch-6",
        "1272-1144-1016-978-760-632-504-376-62",
        E3,
        SGD_OPT,
        32
    ),
];

impl Preset {
    pub fn get(name: &str) -> Result<&'static Preset> {
        PRESETS
            .iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownPreset(name.to_string()))
    }

    pub fn arch(&self, kind: LayerKind) -> ArchSpec {
        let s = match kind {
            LayerKind::Dense => self.fnn_arch,
            LayerKind::Chn => self.chn_arch,
        };
        ArchSpec::parse(s, self.dataset.input_width(), kind).expect("preset architecture parses")
    }
}
