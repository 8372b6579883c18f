//! Recognition-rate evaluation and the two-wavelet comparison protocol.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{ingest_dataset, Dataset, Split};
use super::model::{save_model, train_pipeline, PipelineConfig, PipelineModel};
use super::{io_err, FusionSettings, Modality, PipelineError};
use crate::fusion::FusionPolicy;
use crate::wavelet::WaveletKind;

/// Which samples an evaluation runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    #[default]
    Test,
    /// Sanity mode: the samples the model was trained on.
    Train,
    All,
}

impl Subset {
    fn includes(self, split: Split) -> bool {
        match self {
            Subset::Test => split == Split::Test,
            Subset::Train => split == Split::Train,
            Subset::All => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subset::Test => "test",
            Subset::Train => "train",
            Subset::All => "all",
        }
    }
}

impl FromStr for Subset {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "test" => Ok(Subset::Test),
            "train" => Ok(Subset::Train),
            "all" => Ok(Subset::All),
            _ => Err(PipelineError::InvalidArgument(format!(
                "unknown subset {s:?} (expected test, train or all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub label: String,
    pub tested: usize,
    pub correct: usize,
    /// `correct / tested`; absent when the class had no evaluated samples.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub subset: Subset,
    pub wavelet: WaveletKind,
    pub levels: usize,
    pub policy: FusionPolicy,
    pub modality: Modality,
    pub pca_components: usize,
    pub hidden: Vec<usize>,
    pub per_class: Vec<ClassResult>,
    pub tested: usize,
    pub correct: usize,
    pub overall_rate: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Classifies the selected samples of `data` with `model`.
///
/// `modality` overrides the channel choice the model was trained with.
pub fn evaluate(
    model: &PipelineModel,
    data: &Dataset,
    subset: Subset,
    modality: Option<Modality>,
) -> Result<EvaluationReport, PipelineError> {
    let fusion = FusionSettings {
        modality: modality.unwrap_or(model.config.fusion.modality),
        ..model.config.fusion
    };
    let mut targets = Vec::new();
    for class in &data.classes {
        let idx = model
            .class_labels
            .iter()
            .position(|l| *l == class.label)
            .ok_or_else(|| PipelineError::UnknownClass(class.label.clone()))?;
        for s in class.samples.iter().filter(|s| subset.includes(s.split)) {
            targets.push((idx, s));
        }
    }
    if targets.is_empty() {
        return Err(PipelineError::EmptyTestSet);
    }
    let predicted: Vec<usize> = targets
        .par_iter()
        .map(|(_, s)| {
            let img = fusion.prepare(s)?;
            Ok(model.classify(&img)?.0)
        })
        .collect::<Result<_, PipelineError>>()?;

    let n = model.class_labels.len();
    let mut confusion = vec![vec![0usize; n]; n];
    for ((truth, _), &pred) in targets.iter().zip(&predicted) {
        confusion[*truth][pred] += 1;
    }
    let per_class: Vec<ClassResult> = model
        .class_labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let tested: usize = confusion[i].iter().sum();
            let correct = confusion[i][i];
            ClassResult {
                label: label.clone(),
                tested,
                correct,
                rate: (tested > 0).then(|| correct as f64 / tested as f64),
            }
        })
        .collect();
    let tested = targets.len();
    let correct: usize = per_class.iter().map(|c| c.correct).sum();
    Ok(EvaluationReport {
        subset,
        wavelet: fusion.wavelet,
        levels: fusion.levels,
        policy: fusion.policy,
        modality: fusion.modality,
        pca_components: model.eigenspace.k(),
        hidden: model.config.hidden.clone(),
        per_class,
        tested,
        correct,
        overall_rate: correct as f64 / tested as f64,
        confusion,
    })
}

fn pct(rate: Option<f64>) -> String {
    rate.map_or_else(|| "-".to_string(), |r| format!("{:.2}%", 100.0 * r))
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "Recognition rate ({}, {} levels, {}/{}, {} input, {} samples)",
            self.wavelet,
            self.levels,
            self.policy.approx_rule,
            self.policy.detail_rule,
            self.modality,
            self.subset.name()
        )?;
        writeln!(
            f,
            "{:<16} {:>7} {:>8} {:>9}",
            "class", "tested", "correct", "rate"
        )?;
        for c in &self.per_class {
            writeln!(
                f,
                "{:<16} {:>7} {:>8} {:>9}",
                c.label,
                c.tested,
                c.correct,
                pct(c.rate)
            )?;
        }
        write!(
            f,
            "{:<16} {:>7} {:>8} {:>9}",
            "overall",
            self.tested,
            self.correct,
            pct(Some(self.overall_rate))
        )
    }
}

impl EvaluationReport {
    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let text = serde_json::to_string_pretty(self).map_err(|source| PipelineError::Json {
            path: path.display().to_string(),
            source,
        })?;
        fs::write(path, text + "\n").map_err(io_err(path))
    }
}

/// Per-wavelet results of [`run_protocol`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub runs: Vec<EvaluationReport>,
}

impl fmt::Display for ProtocolReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut header = format!("{:<16}", "class");
        for r in &self.runs {
            let _ = write!(header, " {:>16}", format!("{} rate", r.wavelet));
        }
        writeln!(f, "{header}")?;
        let labels = self.runs.first().map(|r| r.per_class.len()).unwrap_or(0);
        for i in 0..labels {
            write!(f, "{:<16}", self.runs[0].per_class[i].label)?;
            for r in &self.runs {
                let c = &r.per_class[i];
                write!(
                    f,
                    " {:>16}",
                    format!("{}/{} {}", c.correct, c.tested, pct(c.rate))
                )?;
            }
            writeln!(f)?;
        }
        write!(f, "{:<16}", "average")?;
        for r in &self.runs {
            write!(f, " {:>16}", pct(Some(r.overall_rate)))?;
        }
        Ok(())
    }
}

/// Trains and evaluates once per wavelet on the same split, writing
/// `model_<wavelet>.json`, `report_<wavelet>.json` and `protocol.json` into `out`.
pub fn run_protocol(
    data_dir: &Path,
    base: &PipelineConfig,
    wavelets: &[WaveletKind],
    out: &Path,
) -> Result<ProtocolReport, PipelineError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let data = ingest_dataset(data_dir, &base.split)?;
    let mut runs = Vec::with_capacity(wavelets.len());
    for &wavelet in wavelets {
        let mut cfg = base.clone();
        cfg.fusion.wavelet = wavelet;
        let model = train_pipeline(&data, &cfg)?;
        save_model(&model, &out.join(format!("model_{wavelet}.json")))?;
        let report = evaluate(&model, &data, Subset::Test, None)?;
        report.save(&out.join(format!("report_{wavelet}.json")))?;
        runs.push(report);
    }
    let report = ProtocolReport { runs };
    let path = out.join("protocol.json");
    let text = serde_json::to_string_pretty(&report).map_err(|source| PipelineError::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(report)
}
