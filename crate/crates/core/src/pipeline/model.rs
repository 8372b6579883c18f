//! Training and persistence of the full recognizer.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Split, SplitSpec};
use super::{io_err, FusionSettings, PipelineError};
use crate::eigen::{fit_eigenspace_with, ComponentCount, EigenspaceModel};
use crate::imgio::Image;
use crate::mlp::{one_hot, train, MlpConfig, MlpModel, TrainingSummary};

pub const FORMAT_VERSION: u32 = 1;

/// One-hot target levels.
pub const TARGET_OFF: f64 = 0.1;
pub const TARGET_ON: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub fusion: FusionSettings,
    pub split: SplitSpec,
    pub pca: ComponentCount,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub target_error: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fusion: FusionSettings::default(),
            split: SplitSpec::Fraction {
                train_fraction: 0.5,
                seed: 0,
            },
            pca: ComponentCount::default(),
            hidden: vec![100],
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 1000,
            target_error: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub class_labels: Vec<String>,
    pub eigenspace: EigenspaceModel,
    /// Projected features are multiplied by this before entering the network.
    pub feature_scale: f64,
    pub mlp: MlpModel,
    pub training: TrainingSummary,
}

impl PipelineModel {
    /// Network input for an already prepared (fused) image.
    pub fn features(&self, img: &Image) -> Result<Vec<f64>, PipelineError> {
        let mut f = self.eigenspace.project(img)?;
        f.iter_mut().for_each(|x| *x *= self.feature_scale);
        Ok(f)
    }

    /// Class index and scores for an already prepared image.
    pub fn classify(&self, img: &Image) -> Result<(usize, Vec<f64>), PipelineError> {
        Ok(self.mlp.predict(&self.features(img)?)?)
    }

    fn check(&self) -> Result<(), PipelineError> {
        if self.format_version != FORMAT_VERSION {
            return Err(PipelineError::ModelFormat(format!(
                "format_version {} (this build reads {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.mlp.outputs() != self.class_labels.len() {
            return Err(PipelineError::ModelFormat(format!(
                "network has {} outputs for {} classes",
                self.mlp.outputs(),
                self.class_labels.len()
            )));
        }
        if self.mlp.inputs() != self.eigenspace.k() {
            return Err(PipelineError::ModelFormat(format!(
                "network takes {} inputs but the eigenspace has {} components",
                self.mlp.inputs(),
                self.eigenspace.k()
            )));
        }
        Ok(())
    }
}

/// Prepares every training sample, fits the eigenspace and trains the network.
pub fn train_pipeline(
    data: &Dataset,
    cfg: &PipelineConfig,
) -> Result<PipelineModel, PipelineError> {
    if data.classes.len() < 2 {
        return Err(PipelineError::TooFewClasses(data.classes.len()));
    }
    if let Some(c) = data
        .classes
        .iter()
        .find(|c| !c.samples.iter().any(|s| s.split == Split::Train))
    {
        return Err(PipelineError::ClassWithoutTrainingSamples(c.label.clone()));
    }
    let train_set: Vec<_> = data.samples_in(Split::Train).collect();
    let images: Vec<Image> = train_set
        .par_iter()
        .map(|(_, s)| cfg.fusion.prepare(s))
        .collect::<Result<_, _>>()?;

    let eigenspace = fit_eigenspace_with(&images, cfg.pca)?;
    let feature_scale = 1.0 / eigenspace.eigenvalues[0].sqrt();

    let n_classes = data.classes.len();
    let examples: Vec<(Vec<f64>, Vec<f64>)> = images
        .par_iter()
        .zip(&train_set)
        .map(|(img, (ci, _))| {
            let mut f = eigenspace.project(img)?;
            f.iter_mut().for_each(|x| *x *= feature_scale);
            Ok((f, one_hot(*ci, n_classes, TARGET_OFF, TARGET_ON)))
        })
        .collect::<Result<_, PipelineError>>()?;

    let mut layer_sizes = vec![eigenspace.k()];
    layer_sizes.extend(&cfg.hidden);
    layer_sizes.push(n_classes);
    let mlp_cfg = MlpConfig {
        layer_sizes,
        learning_rate: cfg.learning_rate,
        momentum: cfg.momentum,
        epochs: cfg.epochs,
        seed: cfg.seed,
        target_error: cfg.target_error,
    };
    let (mlp, training) = train(mlp_cfg, &examples)?;

    Ok(PipelineModel {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        class_labels: data.labels(),
        eigenspace,
        feature_scale,
        mlp,
        training,
    })
}

pub fn save_model(model: &PipelineModel, path: &Path) -> Result<(), PipelineError> {
    let text = serde_json::to_string(model).map_err(|source| PipelineError::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn load_model(path: &Path) -> Result<PipelineModel, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let model: PipelineModel =
        serde_json::from_str(&text).map_err(|source| PipelineError::Json {
            path: path.display().to_string(),
            source,
        })?;
    model.check()?;
    Ok(model)
}
