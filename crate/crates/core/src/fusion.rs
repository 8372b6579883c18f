//! Coefficient-level fusion of thermal and visual decompositions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgio::{Dims, Image};
use crate::wavelet::{
    decompose_padded, reconstruct, DecompositionTree, DetailTriple, WaveletError, WaveletKind,
};

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("grid dims differ: thermal {thermal:?}, visual {visual:?}")]
    DimMismatch { thermal: Dims, visual: Dims },
    #[error("tree shapes differ: {0}")]
    TreeShapeMismatch(String),
    #[error("trees use different wavelets: thermal {thermal}, visual {visual}")]
    WaveletMismatch {
        thermal: WaveletKind,
        visual: WaveletKind,
    },
    #[error("unknown fusion rule {0:?} (expected maxabs, minabs or average)")]
    UnknownRule(String),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
}

/// Per-coefficient combiner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    /// Thermal where `|T| >= |V|`, else visual.
    MaxAbs,
    /// Thermal where `|T| <= |V|`, else visual.
    MinAbs,
    /// `(T + V) / 2`.
    Average,
}

impl FusionRule {
    pub const ALL: [FusionRule; 3] = [FusionRule::MaxAbs, FusionRule::MinAbs, FusionRule::Average];

    #[inline]
    pub fn combine(self, t: f64, v: f64) -> f64 {
        match self {
            FusionRule::MaxAbs => {
                if t.abs() >= v.abs() {
                    t
                } else {
                    v
                }
            }
            FusionRule::MinAbs => {
                if t.abs() <= v.abs() {
                    t
                } else {
                    v
                }
            }
            FusionRule::Average => (t + v) / 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FusionRule::MaxAbs => "maxabs",
            FusionRule::MinAbs => "minabs",
            FusionRule::Average => "average",
        }
    }
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionRule {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "maxabs" | "max" => Ok(FusionRule::MaxAbs),
            "minabs" | "min" => Ok(FusionRule::MinAbs),
            "average" | "mean" | "avg" => Ok(FusionRule::Average),
            _ => Err(FusionError::UnknownRule(s.to_string())),
        }
    }
}

/// Which rule applies to the deepest approximation and which to every detail grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionPolicy {
    pub approx_rule: FusionRule,
    pub detail_rule: FusionRule,
}

impl Default for FusionPolicy {
    /// Max-abs on the approximation, min-abs on the details.
    fn default() -> Self {
        FusionPolicy {
            approx_rule: FusionRule::MaxAbs,
            detail_rule: FusionRule::MinAbs,
        }
    }
}

impl FusionPolicy {
    pub fn new(approx_rule: FusionRule, detail_rule: FusionRule) -> Self {
        FusionPolicy {
            approx_rule,
            detail_rule,
        }
    }

    /// All nine (approx, detail) rule combinations.
    pub fn all() -> impl Iterator<Item = FusionPolicy> {
        FusionRule::ALL.into_iter().flat_map(|a| {
            FusionRule::ALL
                .into_iter()
                .map(move |d| FusionPolicy::new(a, d))
        })
    }
}

/// Fuses two equally sized coefficient grids entry by entry. Ties go to `thermal`.
pub fn fuse_coeffs(
    thermal: &Image,
    visual: &Image,
    rule: FusionRule,
) -> Result<Image, FusionError> {
    if thermal.dims() != visual.dims() {
        return Err(FusionError::DimMismatch {
            thermal: thermal.dims(),
            visual: visual.dims(),
        });
    }
    let pixels = thermal
        .pixels()
        .iter()
        .zip(visual.pixels())
        .map(|(&t, &v)| rule.combine(t, v))
        .collect();
    Ok(Image::new(thermal.rows(), thermal.cols(), pixels).expect("fused coefficients are finite"))
}

pub fn fuse_trees(
    thermal: &DecompositionTree,
    visual: &DecompositionTree,
    policy: FusionPolicy,
) -> Result<DecompositionTree, FusionError> {
    if thermal.wavelet != visual.wavelet {
        return Err(FusionError::WaveletMismatch {
            thermal: thermal.wavelet,
            visual: visual.wavelet,
        });
    }
    if thermal.levels != visual.levels || thermal.details.len() != visual.details.len() {
        return Err(FusionError::TreeShapeMismatch(format!(
            "levels {} vs {}",
            thermal.levels, visual.levels
        )));
    }
    if thermal.original_dims != visual.original_dims {
        return Err(FusionError::TreeShapeMismatch(format!(
            "original dims {:?} vs {:?}",
            thermal.original_dims, visual.original_dims
        )));
    }
    let shape = |e: FusionError| match e {
        FusionError::DimMismatch { thermal, visual } => {
            FusionError::TreeShapeMismatch(format!("grid dims {thermal:?} vs {visual:?}"))
        }
        other => other,
    };
    let deepest_approx = fuse_coeffs(
        &thermal.deepest_approx,
        &visual.deepest_approx,
        policy.approx_rule,
    )
    .map_err(shape)?;
    let details = thermal
        .details
        .iter()
        .zip(&visual.details)
        .map(|(t, v)| {
            Ok(DetailTriple {
                ch: fuse_coeffs(&t.ch, &v.ch, policy.detail_rule)?,
                cv: fuse_coeffs(&t.cv, &v.cv, policy.detail_rule)?,
                cd: fuse_coeffs(&t.cd, &v.cd, policy.detail_rule)?,
            })
        })
        .collect::<Result<Vec<_>, FusionError>>()
        .map_err(shape)?;
    Ok(DecompositionTree {
        levels: thermal.levels,
        wavelet: thermal.wavelet,
        deepest_approx,
        details,
        original_dims: thermal.original_dims,
    })
}

/// Pads, decomposes both images, fuses the trees and reconstructs at the original size.
///
/// The result is not clamped; clamping happens only when writing to disk.
pub fn fuse_images(
    thermal: &Image,
    visual: &Image,
    kind: WaveletKind,
    levels: usize,
    policy: FusionPolicy,
) -> Result<Image, FusionError> {
    if thermal.dims() != visual.dims() {
        return Err(FusionError::DimMismatch {
            thermal: thermal.dims(),
            visual: visual.dims(),
        });
    }
    let t_tree = decompose_padded(thermal, kind, levels)?;
    let v_tree = decompose_padded(visual, kind, levels)?;
    let fused = fuse_trees(&t_tree, &v_tree, policy)?;
    Ok(reconstruct(&fused)?)
}
