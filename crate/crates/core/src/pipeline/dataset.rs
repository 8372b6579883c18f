//! Class-structured thermal/visual pairs on disk.
//!
//! Layout: `<root>/<class>/<id>_thermal.pgm` and `<root>/<class>/<id>_visual.pgm`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{io_err, PipelineError};
use crate::imgio::{load_image, Image};

const THERMAL_SUFFIX: &str = "_thermal.pgm";
const VISUAL_SUFFIX: &str = "_visual.pgm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// How samples are assigned to training and testing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSpec {
    /// Per class, `round(fraction * n)` samples go to training, picked by a seeded shuffle.
    Fraction { train_fraction: f64, seed: u64 },
    /// Training ids per class label; every other sample is a test sample.
    Explicit {
        train: BTreeMap<String, Vec<String>>,
    },
}

impl SplitSpec {
    pub fn fraction(train_fraction: f64, seed: u64) -> Result<Self, PipelineError> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(PipelineError::InvalidArgument(format!(
                "split fraction must lie in [0, 1], got {train_fraction}"
            )));
        }
        Ok(SplitSpec::Fraction {
            train_fraction,
            seed,
        })
    }

    /// Reads an explicit split: a JSON object mapping class label to training ids.
    pub fn from_json_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let train = serde_json::from_str(&text).map_err(|source| PipelineError::Json {
            path: path.display().to_string(),
            source,
        })?;
        Ok(SplitSpec::Explicit { train })
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub thermal: Image,
    pub visual: Image,
    pub split: Split,
}

#[derive(Debug, Clone)]
pub struct ClassRecord {
    pub label: String,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub classes: Vec<ClassRecord>,
    /// Files that could not be paired, as paths relative to the root.
    pub unpaired: Vec<String>,
}

impl Dataset {
    pub fn sample_count(&self) -> usize {
        self.classes.iter().map(|c| c.samples.len()).sum()
    }

    pub fn labels(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.label.clone()).collect()
    }

    /// `(class index, sample)` pairs with the given split, in class then id order.
    pub fn samples_in(&self, split: Split) -> impl Iterator<Item = (usize, &Sample)> {
        self.classes.iter().enumerate().flat_map(move |(ci, c)| {
            c.samples
                .iter()
                .filter(move |s| s.split == split)
                .map(move |s| (ci, s))
        })
    }

    pub fn count_in(&self, split: Split) -> usize {
        self.samples_in(split).count()
    }

    /// Reassigns every sample's split.
    pub fn apply_split(&mut self, spec: &SplitSpec) {
        match spec {
            SplitSpec::Fraction {
                train_fraction,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for class in &mut self.classes {
                    let n = class.samples.len();
                    let n_train = ((train_fraction * n as f64).round() as usize).min(n);
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut rng);
                    for s in &mut class.samples {
                        s.split = Split::Test;
                    }
                    for &i in &order[..n_train] {
                        class.samples[i].split = Split::Train;
                    }
                }
            }
            SplitSpec::Explicit { train } => {
                for class in &mut self.classes {
                    let ids: BTreeSet<&str> = train
                        .get(&class.label)
                        .map(|v| v.iter().map(String::as_str).collect())
                        .unwrap_or_default();
                    for s in &mut class.samples {
                        s.split = if ids.contains(s.id.as_str()) {
                            Split::Train
                        } else {
                            Split::Test
                        };
                    }
                }
            }
        }
    }
}

/// Scans `root` for class directories and loads every complete pair.
///
/// Files without a partner are skipped and listed in [`Dataset::unpaired`].
pub fn ingest_dataset(root: &Path, split: &SplitSpec) -> Result<Dataset, PipelineError> {
    let mut class_dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let entry = entry.map_err(io_err(root))?;
        if entry.file_type().map_err(io_err(root))?.is_dir() {
            class_dirs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    if class_dirs.is_empty() {
        return Err(PipelineError::NoClassesFound(root.display().to_string()));
    }
    class_dirs.sort();

    let mut data = Dataset::default();
    for label in class_dirs {
        let dir = root.join(&label);
        let mut thermal = BTreeSet::new();
        let mut visual = BTreeSet::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let name = entry
                .map_err(io_err(&dir))?
                .file_name()
                .to_string_lossy()
                .into_owned();
            if let Some(id) = name.strip_suffix(THERMAL_SUFFIX) {
                thermal.insert(id.to_string());
            } else if let Some(id) = name.strip_suffix(VISUAL_SUFFIX) {
                visual.insert(id.to_string());
            }
        }
        for id in thermal.symmetric_difference(&visual) {
            let suffix = if thermal.contains(id) {
                THERMAL_SUFFIX
            } else {
                VISUAL_SUFFIX
            };
            data.unpaired.push(format!("{label}/{id}{suffix}"));
        }
        let mut samples = Vec::new();
        for id in thermal.intersection(&visual) {
            let t = load_image(dir.join(format!("{id}{THERMAL_SUFFIX}")))?;
            let v = load_image(dir.join(format!("{id}{VISUAL_SUFFIX}")))?;
            if t.dims() != v.dims() {
                return Err(PipelineError::PairDimMismatch {
                    class: label.clone(),
                    id: id.clone(),
                    thermal: t.dims(),
                    visual: v.dims(),
                });
            }
            samples.push(Sample {
                id: id.clone(),
                thermal: t,
                visual: v,
                split: Split::Test,
            });
        }
        data.classes.push(ClassRecord { label, samples });
    }
    data.apply_split(split);
    Ok(data)
}
