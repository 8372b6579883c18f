//! Eigenface subspace: PCA over vectorized training images.
//!
//! The covariance `C = (1/N) A Aᵀ` of the centered data matrix `A` (d × N) is
//! never formed. Its nonzero eigenpairs come from the N × N Gram matrix
//! `G = (1/N) Aᵀ A`: if `G v = λ v` then `C (A v) = λ (A v)`, and
//! `‖A v‖² = N λ`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgio::{Dims, Image};

/// Fraction of eigenvalue mass kept when the component count is chosen automatically.
pub const DEFAULT_ENERGY_FRACTION: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("need at least 2 training images, got {0}")]
    TooFewImages(usize),
    #[error("requested {requested} components but at most {available} are available (N-1 = {n_minus_one}, rank {rank})")]
    KTooLarge {
        requested: usize,
        available: usize,
        n_minus_one: usize,
        rank: usize,
    },
    #[error("image dims {found:?} do not match model dims {expected:?}")]
    DimMismatch { expected: Dims, found: Dims },
    #[error("feature vector has length {found}, model has {expected} components")]
    LengthMismatch { expected: usize, found: usize },
}

/// How many eigenfaces to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentCount {
    Fixed(usize),
    /// Smallest k whose eigenvalues sum to at least this fraction of the total.
    EnergyFraction(f64),
}

impl Default for ComponentCount {
    fn default() -> Self {
        ComponentCount::EnergyFraction(DEFAULT_ENERGY_FRACTION)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenspaceModel {
    pub input_dims: Dims,
    pub mean: Vec<f64>,
    /// Orthonormal eigenfaces, one `Vec` of length `rows * cols` each, by descending eigenvalue.
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits an eigenspace keeping exactly `k` components.
pub fn fit_eigenspace(train: &[Image], k: usize) -> Result<EigenspaceModel, EigenError> {
    fit_eigenspace_with(train, ComponentCount::Fixed(k))
}

pub fn fit_eigenspace_with(
    train: &[Image],
    count: ComponentCount,
) -> Result<EigenspaceModel, EigenError> {
    let n = train.len();
    if n < 2 {
        return Err(EigenError::TooFewImages(n));
    }
    let dims = train[0].dims();
    if let Some(bad) = train.iter().find(|im| im.dims() != dims) {
        return Err(EigenError::DimMismatch {
            expected: dims,
            found: bad.dims(),
        });
    }
    let d = dims.len();
    let inv_n = 1.0 / n as f64;

    let mut mean = vec![0.0; d];
    for im in train {
        for (m, &p) in mean.iter_mut().zip(im.pixels()) {
            *m += p;
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_n);

    let centered: Vec<Vec<f64>> = train
        .iter()
        .map(|im| im.pixels().iter().zip(&mean).map(|(p, m)| p - m).collect())
        .collect();

    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let g = dot(&centered[i], &centered[j]) * inv_n;
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let eig = SymmetricEigen::new(gram);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();

    let largest = values[0];
    let tol = (largest * 1e-10).max(1e-14);
    let rank = values.iter().take_while(|&&v| v > tol).count();
    let available = rank.min(n - 1);

    let k = match count {
        ComponentCount::Fixed(k) => k,
        ComponentCount::EnergyFraction(frac) => {
            let total: f64 = values[..available].iter().sum();
            let mut acc = 0.0;
            let mut k = available;
            for (i, v) in values[..available].iter().enumerate() {
                acc += v;
                if acc >= frac * total {
                    k = i + 1;
                    break;
                }
            }
            k.max(1)
        }
    };
    if k == 0 || k > available {
        return Err(EigenError::KTooLarge {
            requested: k,
            available,
            n_minus_one: n - 1,
            rank,
        });
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for &idx in &order[..k] {
        let v = eig.eigenvectors.column(idx);
        let mut u = vec![0.0; d];
        for (x, &w) in centered.iter().zip(v.iter()) {
            for (ui, xi) in u.iter_mut().zip(x) {
                *ui += w * xi;
            }
        }
        // One modified Gram-Schmidt pass against the earlier eigenfaces.
        for prev in &basis {
            let c = dot(&u, prev);
            u.iter_mut().zip(prev).for_each(|(ui, pi)| *ui -= c * pi);
        }
        let norm = dot(&u, &u).sqrt();
        u.iter_mut().for_each(|ui| *ui /= norm);
        let pivot = u
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| {
                if x.abs() > best.1.abs() {
                    (i, x)
                } else {
                    best
                }
            });
        if pivot.1 < 0.0 {
            u.iter_mut().for_each(|ui| *ui = -*ui);
        }
        basis.push(u);
    }

    Ok(EigenspaceModel {
        input_dims: dims,
        mean,
        basis,
        eigenvalues: values[..k].to_vec(),
    })
}

impl EigenspaceModel {
    pub fn k(&self) -> usize {
        self.basis.len()
    }

    /// Feature vector `basisᵀ (x - mean)`.
    pub fn project(&self, img: &Image) -> Result<Vec<f64>, EigenError> {
        if img.dims() != self.input_dims {
            return Err(EigenError::DimMismatch {
                expected: self.input_dims,
                found: img.dims(),
            });
        }
        let centered: Vec<f64> = img
            .pixels()
            .iter()
            .zip(&self.mean)
            .map(|(p, m)| p - m)
            .collect();
        Ok(self.basis.iter().map(|u| dot(u, &centered)).collect())
    }

    /// Image `mean + basis · f`.
    pub fn reconstruct_from_features(&self, features: &[f64]) -> Result<Image, EigenError> {
        if features.len() != self.k() {
            return Err(EigenError::LengthMismatch {
                expected: self.k(),
                found: features.len(),
            });
        }
        let mut px = self.mean.clone();
        for (u, &f) in self.basis.iter().zip(features) {
            px.iter_mut().zip(u).for_each(|(p, ui)| *p += f * ui);
        }
        Ok(Image::new(self.input_dims.rows, self.input_dims.cols, px)
            .expect("reconstruction of finite model is finite"))
    }

    pub fn mean_image(&self) -> Image {
        Image::new(
            self.input_dims.rows,
            self.input_dims.cols,
            self.mean.clone(),
        )
        .expect("finite mean")
    }
}
