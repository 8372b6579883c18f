//! Orthogonal 2D discrete wavelet transform (Haar, Daubechies db2).
//!
//! Analysis convolves with the decomposition filters under periodic extension
//! and keeps the even-indexed outputs; synthesis is the exact adjoint built from
//! the time-reversed reconstruction filters. Because the periodized transform
//! is an orthogonal matrix, `idwt2(dwt2(x)) == x` up to rounding and energy is
//! conserved.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgio::{crop, pad_to_block, Dims, Image};

#[derive(Debug, Error, PartialEq)]
pub enum WaveletError {
    #[error("dwt2 needs even dimensions, got {rows}x{cols}")]
    OddDimensions { rows: usize, cols: usize },
    #[error("subband dims differ: cA {ca:?}, cH {ch:?}, cV {cv:?}, cD {cd:?}")]
    MismatchedSubbandDims {
        ca: Dims,
        ch: Dims,
        cv: Dims,
        cd: Dims,
    },
    #[error("image {rows}x{cols} is not divisible by 2^{levels}")]
    DimsNotDivisible {
        rows: usize,
        cols: usize,
        levels: usize,
    },
    #[error("decomposition needs at least one level")]
    ZeroLevels,
    #[error("inconsistent decomposition tree: {0}")]
    InconsistentTree(String),
    #[error("unknown wavelet {0:?} (expected haar or db2)")]
    UnknownWavelet(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletKind {
    Haar,
    Db2,
}

impl WaveletKind {
    pub const ALL: [WaveletKind; 2] = [WaveletKind::Haar, WaveletKind::Db2];

    pub fn name(self) -> &'static str {
        match self {
            WaveletKind::Haar => "haar",
            WaveletKind::Db2 => "db2",
        }
    }
}

impl fmt::Display for WaveletKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WaveletKind {
    type Err = WaveletError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(WaveletKind::Haar),
            "db2" => Ok(WaveletKind::Db2),
            _ => Err(WaveletError::UnknownWavelet(s.to_string())),
        }
    }
}

/// Two-channel orthogonal filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub lo_d: Vec<f64>,
    pub hi_d: Vec<f64>,
    pub lo_r: Vec<f64>,
    pub hi_r: Vec<f64>,
}

impl FilterBank {
    /// Completes a bank from its decomposition low-pass filter.
    ///
    /// `hi_d[k] = (-1)^k lo_d[L-1-k]`; reconstruction filters are the
    /// time-reverses of the decomposition filters.
    pub fn from_lowpass(lo_d: Vec<f64>) -> Self {
        let n = lo_d.len();
        assert!(n >= 2 && n.is_multiple_of(2), "filter length must be even");
        let hi_d: Vec<f64> = (0..n)
            .map(|k| {
                if k % 2 == 0 {
                    lo_d[n - 1 - k]
                } else {
                    -lo_d[n - 1 - k]
                }
            })
            .collect();
        let lo_r = lo_d.iter().rev().copied().collect();
        let hi_r = hi_d.iter().rev().copied().collect();
        FilterBank {
            lo_d,
            hi_d,
            lo_r,
            hi_r,
        }
    }

    pub fn len(&self) -> usize {
        self.lo_d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo_d.is_empty()
    }
}

pub fn filter_bank(kind: WaveletKind) -> FilterBank {
    match kind {
        WaveletKind::Haar => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            FilterBank::from_lowpass(vec![h, h])
        }
        WaveletKind::Db2 => {
            let s3 = 3f64.sqrt();
            let d = 4.0 * std::f64::consts::SQRT_2;
            FilterBank::from_lowpass(vec![
                (1.0 + s3) / d,
                (3.0 + s3) / d,
                (3.0 - s3) / d,
                (1.0 - s3) / d,
            ])
        }
    }
}

/// One level of analysis output.
///
/// `ch` is low-pass along rows and high-pass along columns (horizontal edges);
/// `cv` is the transpose case (vertical edges).
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSet {
    pub ca: Image,
    pub ch: Image,
    pub cv: Image,
    pub cd: Image,
}

impl SubbandSet {
    pub fn dims(&self) -> Result<Dims, WaveletError> {
        let d = self.ca.dims();
        if self.ch.dims() != d || self.cv.dims() != d || self.cd.dims() != d {
            return Err(WaveletError::MismatchedSubbandDims {
                ca: d,
                ch: self.ch.dims(),
                cv: self.cv.dims(),
                cd: self.cd.dims(),
            });
        }
        Ok(d)
    }

    pub fn energy(&self) -> f64 {
        self.ca.energy() + self.ch.energy() + self.cv.energy() + self.cd.energy()
    }

    fn split(self) -> (Image, DetailTriple) {
        (
            self.ca,
            DetailTriple {
                ch: self.ch,
                cv: self.cv,
                cd: self.cd,
            },
        )
    }
}

/// The three detail grids of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailTriple {
    pub ch: Image,
    pub cv: Image,
    pub cd: Image,
}

impl DetailTriple {
    pub fn grids(&self) -> [&Image; 3] {
        [&self.ch, &self.cv, &self.cd]
    }

    pub fn grids_mut(&mut self) -> [&mut Image; 3] {
        [&mut self.ch, &mut self.cv, &mut self.cd]
    }

    pub fn energy(&self) -> f64 {
        self.ch.energy() + self.cv.energy() + self.cd.energy()
    }
}

/// Multi-level decomposition: deepest approximation plus per-level details.
///
/// `details[0]` is level 1 (finest), `details[levels-1]` the coarsest.
/// `original_dims` are the dims before any padding; reconstruction crops to them.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTree {
    pub levels: usize,
    pub wavelet: WaveletKind,
    pub deepest_approx: Image,
    pub details: Vec<DetailTriple>,
    pub original_dims: Dims,
}

impl DecompositionTree {
    /// Dims of the image the tree was computed from (after padding).
    pub fn padded_dims(&self) -> Dims {
        let a = self.deepest_approx.dims();
        Dims::new(a.rows << self.levels, a.cols << self.levels)
    }

    /// Dims of the grids at a 1-based level.
    pub fn level_dims(&self, level: usize) -> Dims {
        let p = self.padded_dims();
        Dims::new(p.rows >> level, p.cols >> level)
    }

    pub fn coefficient_count(&self) -> usize {
        self.deepest_approx.pixels().len()
            + self
                .details
                .iter()
                .map(|d| 3 * d.ch.pixels().len())
                .sum::<usize>()
    }

    pub fn energy(&self) -> f64 {
        self.deepest_approx.energy() + self.details.iter().map(DetailTriple::energy).sum::<f64>()
    }

    /// Checks the dims chain and detail count.
    pub fn validate(&self) -> Result<(), WaveletError> {
        if self.levels == 0 {
            return Err(WaveletError::ZeroLevels);
        }
        if self.details.len() != self.levels {
            return Err(WaveletError::InconsistentTree(format!(
                "{} detail levels for a {}-level tree",
                self.details.len(),
                self.levels
            )));
        }
        for (i, d) in self.details.iter().enumerate() {
            let want = self.level_dims(i + 1);
            for (name, g) in ["cH", "cV", "cD"].iter().zip(d.grids()) {
                if g.dims() != want {
                    return Err(WaveletError::InconsistentTree(format!(
                        "level {} {name} is {:?}, expected {:?}",
                        i + 1,
                        g.dims(),
                        want
                    )));
                }
            }
        }
        let p = self.padded_dims();
        if self.original_dims.rows > p.rows || self.original_dims.cols > p.cols {
            return Err(WaveletError::InconsistentTree(format!(
                "original dims {:?} exceed padded dims {:?}",
                self.original_dims, p
            )));
        }
        Ok(())
    }
}

// a[k] = sum_j lo[j] x[(2k - j) mod n], same for the high band.
fn analyze_1d(x: &[f64], bank: &FilterBank, lo: &mut [f64], hi: &mut [f64]) {
    let n = x.len() as isize;
    for k in 0..lo.len() {
        let mut a = 0.0;
        let mut d = 0.0;
        for (j, (&fl, &fh)) in bank.lo_d.iter().zip(&bank.hi_d).enumerate() {
            let v = x[(2 * k as isize - j as isize).rem_euclid(n) as usize];
            a += fl * v;
            d += fh * v;
        }
        lo[k] = a;
        hi[k] = d;
    }
}

// Adjoint of analyze_1d, written with the reconstruction filters.
fn synthesize_1d(lo: &[f64], hi: &[f64], bank: &FilterBank, out: &mut [f64]) {
    let n = out.len() as isize;
    let len = bank.len() as isize;
    out.fill(0.0);
    for k in 0..lo.len() {
        for (j, (&fl, &fh)) in bank.lo_r.iter().zip(&bank.hi_r).enumerate() {
            let m = (2 * k as isize + j as isize + 1 - len).rem_euclid(n) as usize;
            out[m] += fl * lo[k] + fh * hi[k];
        }
    }
}

/// Single-level 2D analysis. Both dims must be even.
pub fn dwt2(img: &Image, kind: WaveletKind) -> Result<SubbandSet, WaveletError> {
    let (rows, cols) = (img.rows(), img.cols());
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(WaveletError::OddDimensions { rows, cols });
    }
    let bank = filter_bank(kind);
    let (hr, hc) = (rows / 2, cols / 2);

    // Filter along each row: low and high halves, rows x hc each.
    let mut row_lo = vec![0.0; rows * hc];
    let mut row_hi = vec![0.0; rows * hc];
    for r in 0..rows {
        analyze_1d(
            img.row(r),
            &bank,
            &mut row_lo[r * hc..(r + 1) * hc],
            &mut row_hi[r * hc..(r + 1) * hc],
        );
    }

    // Then along each column.
    let columns = |src: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![0.0; hr * hc];
        let mut hi = vec![0.0; hr * hc];
        let mut col = vec![0.0; rows];
        let mut lo_col = vec![0.0; hr];
        let mut hi_col = vec![0.0; hr];
        for c in 0..hc {
            for r in 0..rows {
                col[r] = src[r * hc + c];
            }
            analyze_1d(&col, &bank, &mut lo_col, &mut hi_col);
            for r in 0..hr {
                lo[r * hc + c] = lo_col[r];
                hi[r * hc + c] = hi_col[r];
            }
        }
        (lo, hi)
    };
    let (ca, ch) = columns(&row_lo);
    let (cv, cd) = columns(&row_hi);
    let grid = |v| Image::new(hr, hc, v).expect("finite coefficients");
    Ok(SubbandSet {
        ca: grid(ca),
        ch: grid(ch),
        cv: grid(cv),
        cd: grid(cd),
    })
}

/// Single-level 2D synthesis, the inverse of [`dwt2`].
pub fn idwt2(sb: &SubbandSet, kind: WaveletKind) -> Result<Image, WaveletError> {
    let d = sb.dims()?;
    let bank = filter_bank(kind);
    let (hr, hc) = (d.rows, d.cols);
    let (rows, cols) = (2 * hr, 2 * hc);

    // Undo the column stage.
    let columns = |lo: &Image, hi: &Image| -> Vec<f64> {
        let mut out = vec![0.0; rows * hc];
        let mut lo_col = vec![0.0; hr];
        let mut hi_col = vec![0.0; hr];
        let mut col = vec![0.0; rows];
        for c in 0..hc {
            for r in 0..hr {
                lo_col[r] = lo.get(r, c);
                hi_col[r] = hi.get(r, c);
            }
            synthesize_1d(&lo_col, &hi_col, &bank, &mut col);
            for r in 0..rows {
                out[r * hc + c] = col[r];
            }
        }
        out
    };
    let row_lo = columns(&sb.ca, &sb.ch);
    let row_hi = columns(&sb.cv, &sb.cd);

    let mut pixels = vec![0.0; rows * cols];
    for r in 0..rows {
        synthesize_1d(
            &row_lo[r * hc..(r + 1) * hc],
            &row_hi[r * hc..(r + 1) * hc],
            &bank,
            &mut pixels[r * cols..(r + 1) * cols],
        );
    }
    Image::new(rows, cols, pixels)
        .map_err(|e| WaveletError::InconsistentTree(format!("synthesis produced {e}")))
}

/// Iterated analysis of successive approximations.
///
/// The input dims must already be divisible by `2^levels`; see
/// [`decompose_padded`] for arbitrary sizes.
pub fn decompose(
    img: &Image,
    kind: WaveletKind,
    levels: usize,
) -> Result<DecompositionTree, WaveletError> {
    if levels == 0 {
        return Err(WaveletError::ZeroLevels);
    }
    let block = 1usize
        .checked_shl(levels as u32)
        .filter(|b| *b <= img.rows().max(img.cols()))
        .unwrap_or(usize::MAX);
    if !img.rows().is_multiple_of(block) || !img.cols().is_multiple_of(block) {
        return Err(WaveletError::DimsNotDivisible {
            rows: img.rows(),
            cols: img.cols(),
            levels,
        });
    }
    let mut details = Vec::with_capacity(levels);
    let mut approx = img.clone();
    for _ in 0..levels {
        let (ca, triple) = dwt2(&approx, kind)?.split();
        details.push(triple);
        approx = ca;
    }
    Ok(DecompositionTree {
        levels,
        wavelet: kind,
        deepest_approx: approx,
        details,
        original_dims: img.dims(),
    })
}

/// Pads by edge replication to a multiple of `2^levels`, then decomposes.
/// The tree remembers the unpadded dims.
pub fn decompose_padded(
    img: &Image,
    kind: WaveletKind,
    levels: usize,
) -> Result<DecompositionTree, WaveletError> {
    if levels == 0 {
        return Err(WaveletError::ZeroLevels);
    }
    if levels >= usize::BITS as usize - 1 {
        return Err(WaveletError::DimsNotDivisible {
            rows: img.rows(),
            cols: img.cols(),
            levels,
        });
    }
    let (padded, dims) = pad_to_block(img, 1 << levels);
    let mut tree = decompose(&padded, kind, levels)?;
    tree.original_dims = dims;
    Ok(tree)
}

/// Inverse of [`decompose`] / [`decompose_padded`], cropped to the original dims.
pub fn reconstruct(tree: &DecompositionTree) -> Result<Image, WaveletError> {
    tree.validate()?;
    let mut approx = tree.deepest_approx.clone();
    for d in tree.details.iter().rev() {
        let sb = SubbandSet {
            ca: approx,
            ch: d.ch.clone(),
            cv: d.cv.clone(),
            cd: d.cd.clone(),
        };
        approx = idwt2(&sb, tree.wavelet)?;
    }
    crop(&approx, tree.original_dims).map_err(|e| WaveletError::InconsistentTree(e.to_string()))
}
