//! End-to-end recognition: fuse each thermal/visual pair, project onto an
//! eigenface basis fitted on the fused training images, classify with an MLP.

mod dataset;
mod export;
mod model;
mod report;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::EigenError;
use crate::fusion::{fuse_images, FusionError, FusionPolicy};
use crate::imgio::{Image, ImageError};
use crate::mlp::MlpError;
use crate::wavelet::{WaveletError, WaveletKind};

pub use dataset::{ingest_dataset, ClassRecord, Dataset, Sample, Split, SplitSpec};
pub use export::{export_decomposition, TreeManifest};
pub use model::{
    load_model, save_model, train_pipeline, PipelineConfig, PipelineModel, FORMAT_VERSION,
    TARGET_OFF, TARGET_ON,
};
pub use report::{evaluate, run_protocol, ClassResult, EvaluationReport, ProtocolReport, Subset};
pub use synth::{generate_synthetic_dataset, SynthConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("no class directories found under {0}")]
    NoClassesFound(String),
    #[error("class {class}, sample {id}: thermal {thermal:?} and visual {visual:?} dims differ")]
    PairDimMismatch {
        class: String,
        id: String,
        thermal: crate::imgio::Dims,
        visual: crate::imgio::Dims,
    },
    #[error("need at least 2 classes to train, found {0}")]
    TooFewClasses(usize),
    #[error("class {0:?} has no training samples")]
    ClassWithoutTrainingSamples(String),
    #[error("no samples selected for evaluation")]
    EmptyTestSet,
    #[error("class {0:?} is not known to the model")]
    UnknownClass(String),
    #[error("unsupported model file: {0}")]
    ModelFormat(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl PipelineError {
    /// Process exit code: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::InvalidArgument(_)
            | PipelineError::Mlp(MlpError::InvalidConfig(_))
            | PipelineError::Wavelet(WaveletError::UnknownWavelet(_))
            | PipelineError::Fusion(FusionError::UnknownRule(_)) => 1,
            PipelineError::Mlp(MlpError::NonFiniteLoss { .. }) => 3,
            _ => 2,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Which input channels feed the recognizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    #[default]
    Fused,
    /// Thermal fused with itself.
    Thermal,
    /// Visual fused with itself.
    Visual,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Fused => "fused",
            Modality::Thermal => "thermal",
            Modality::Visual => "visual",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fused" => Ok(Modality::Fused),
            "thermal" => Ok(Modality::Thermal),
            "visual" => Ok(Modality::Visual),
            _ => Err(PipelineError::InvalidArgument(format!(
                "unknown modality {s:?} (expected fused, thermal or visual)"
            ))),
        }
    }
}

/// Fusion settings shared by training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionSettings {
    pub wavelet: WaveletKind,
    pub levels: usize,
    pub policy: FusionPolicy,
    pub modality: Modality,
}

impl Default for FusionSettings {
    fn default() -> Self {
        FusionSettings {
            wavelet: WaveletKind::Db2,
            levels: 5,
            policy: FusionPolicy::default(),
            modality: Modality::Fused,
        }
    }
}

impl FusionSettings {
    /// The image the recognizer sees for one sample.
    pub fn prepare(&self, sample: &Sample) -> Result<Image, PipelineError> {
        let (t, v) = match self.modality {
            Modality::Fused => (&sample.thermal, &sample.visual),
            Modality::Thermal => (&sample.thermal, &sample.thermal),
            Modality::Visual => (&sample.visual, &sample.visual),
        };
        Ok(fuse_images(t, v, self.wavelet, self.levels, self.policy)?)
    }
}
