//! Synthetic paired-modality face stand-in.
//!
//! A class pattern is the combination of a left-half pattern and a right-half
//! pattern, each drawn from a small pool of smooth random fields and shared by
//! several classes; only the pair is unique. Each sample perturbs its class
//! pattern slightly, then renders it twice: the thermal rendering is clean on
//! the left half and buried under strong per-sample clutter on the right half,
//! the visual rendering the other way round. Either modality alone sees one
//! factor cleanly and has to dig the other out of the clutter, while
//! coefficient fusion can recover both halves.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{io_err, PipelineError};
use crate::imgio::{save_image, Image};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 10,
            per_class: 20,
            rows: 64,
            cols: 64,
            seed: 0,
        }
    }
}

const CLASS_BLOBS: usize = 8;
const CLASS_AMPLITUDE: f64 = 0.2;
const INSTANCE_BLOBS: usize = 4;
const INSTANCE_AMPLITUDE: f64 = 0.03;
const BRIGHTNESS_JITTER: f64 = 0.03;
const SENSOR_NOISE: f64 = 0.02;
const CLUTTER_BLOBS: usize = 8;
const CLUTTER_AMPLITUDE: f64 = 0.35;
const CLUTTER_NOISE: f64 = 0.15;

/// Sum of Gaussian bumps with random centers, widths and signed amplitudes.
fn blob_field(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    blobs: usize,
    amplitude: f64,
    width: (f64, f64),
) -> Vec<f64> {
    let side = rows.min(cols) as f64;
    let params: Vec<(f64, f64, f64, f64)> = (0..blobs)
        .map(|_| {
            let cr = rng.random_range(0.0..rows as f64);
            let cc = rng.random_range(0.0..cols as f64);
            let s = rng.random_range(width.0..width.1) * side;
            let a = rng.random_range(-amplitude..amplitude);
            (cr, cc, s, a)
        })
        .collect();
    let mut field = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            field[r * cols + c] = params
                .iter()
                .map(|&(cr, cc, s, a)| {
                    let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
                    a * (-d2 / (2.0 * s * s)).exp()
                })
                .sum();
        }
    }
    field
}

fn render(
    rng: &mut ChaCha8Rng,
    instance: &[f64],
    rows: usize,
    cols: usize,
    cluttered: impl Fn(usize) -> bool,
) -> Image {
    let sensor = Normal::new(0.0, SENSOR_NOISE).unwrap();
    let grain = Normal::new(0.0, CLUTTER_NOISE).unwrap();
    let clutter = blob_field(
        rng,
        rows,
        cols,
        CLUTTER_BLOBS,
        CLUTTER_AMPLITUDE,
        (0.03, 0.12),
    );
    let px = (0..rows * cols)
        .map(|i| {
            let mut v = instance[i] + sensor.sample(rng);
            if cluttered(i % cols) {
                v += clutter[i] + grain.sample(rng);
            }
            v.clamp(0.0, 1.0)
        })
        .collect();
    Image::new(rows, cols, px).expect("finite synthetic pixels")
}

/// Writes `classes × per_class` thermal/visual PGM pairs under `out`.
///
/// Class directories are `class01`, `class02`, ...; sample ids `s001`, `s002`, ...
pub fn generate_synthetic_dataset(cfg: &SynthConfig, out: &Path) -> Result<(), PipelineError> {
    if cfg.classes == 0 || cfg.per_class == 0 || cfg.rows == 0 || cfg.cols == 0 {
        return Err(PipelineError::InvalidArgument(format!(
            "synthetic dataset counts and dims must be positive: {cfg:?}"
        )));
    }
    let (rows, cols) = (cfg.rows, cfg.cols);
    let half = cols / 2;
    let class_width = cfg.classes.to_string().len().max(2);
    let id_width = cfg.per_class.to_string().len().max(3);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Class c pairs left pattern c % pool with right pattern c / pool.
    let pool = (cfg.classes as f64).sqrt().ceil() as usize;
    let mut half_pool = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                blob_field(
                    &mut rng,
                    rows,
                    cols,
                    CLASS_BLOBS,
                    CLASS_AMPLITUDE,
                    (0.08, 0.25),
                )
            })
            .collect()
    };
    let left = half_pool(pool);
    let right = half_pool(cfg.classes.div_ceil(pool));
    // Smooth left-to-right blend around the midline.
    let blend: Vec<f64> = (0..cols)
        .map(|c| 1.0 / (1.0 + (-(c as f64 + 0.5 - half as f64) / 2.0).exp()))
        .collect();

    for ci in 0..cfg.classes {
        let dir = out.join(format!("class{:0w$}", ci + 1, w = class_width));
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let (l, r) = (&left[ci % pool], &right[ci / pool]);
        let pattern: Vec<f64> = (0..rows * cols)
            .map(|i| {
                let w = blend[i % cols];
                (1.0 - w) * l[i] + w * r[i]
            })
            .collect();
        for si in 0..cfg.per_class {
            let jitter = blob_field(
                &mut rng,
                rows,
                cols,
                INSTANCE_BLOBS,
                INSTANCE_AMPLITUDE,
                (0.1, 0.3),
            );
            let brightness = rng.random_range(-BRIGHTNESS_JITTER..BRIGHTNESS_JITTER);
            let instance: Vec<f64> = pattern
                .iter()
                .zip(&jitter)
                .map(|(p, j)| 0.5 + p + j + brightness)
                .collect();
            let thermal = render(&mut rng, &instance, rows, cols, |c| c >= half);
            let visual = render(&mut rng, &instance, rows, cols, |c| c < half);
            let id = format!("s{:0w$}", si + 1, w = id_width);
            save_image(&thermal, dir.join(format!("{id}_thermal.pgm")))?;
            save_image(&visual, dir.join(format!("{id}_visual.pgm")))?;
        }
    }
    Ok(())
}
