//! Reference implementations and fixtures shared by the integration tests.
//!
//! The oracles never call into the library's numerical code; each is a plain
//! dense-matrix or flat-loop formulation.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavefuse::fusion::FusionRule;
use wavefuse::imgio::Image;
use wavefuse::wavelet::{DecompositionTree, SubbandSet};

pub type Matrix = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Image {
    Image::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0))
}

pub fn zeros(r: usize, c: usize) -> Matrix {
    vec![vec![0.0; c]; r]
}

pub fn transpose(a: &Matrix) -> Matrix {
    let (r, c) = (a.len(), a[0].len());
    let mut t = zeros(c, r);
    for i in 0..r {
        for j in 0..c {
            t[j][i] = a[i][j];
        }
    }
    t
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(n, p);
    for i in 0..n {
        for k in 0..m {
            let aik = a[i][k];
            for j in 0..p {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn image_to_matrix(img: &Image) -> Matrix {
    (0..img.rows()).map(|r| img.row(r).to_vec()).collect()
}

pub fn matrix_to_image(m: &Matrix) -> Image {
    Image::from_rows(m)
}

fn block(m: &Matrix, r0: usize, c0: usize, rows: usize, cols: usize) -> Image {
    Image::from_fn(rows, cols, |r, c| m[r0 + r][c0 + c])
}

/// Explicit `n × n` one-level periodic analysis matrix: low-pass outputs in
/// the first `n/2` rows, high-pass outputs in the rest.
pub fn analysis_matrix(lo_d: &[f64], n: usize) -> Matrix {
    let len = lo_d.len();
    let hi_d: Vec<f64> = (0..len)
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * lo_d[len - 1 - k])
        .collect();
    let half = n / 2;
    let mut m = zeros(n, n);
    for k in 0..half {
        for j in 0..len {
            let col = (2 * k + n * len - j) % n;
            m[k][col] += lo_d[j];
            m[half + k][col] += hi_d[j];
        }
    }
    m
}

/// One-level 2D analysis as `M_r · X · M_cᵀ`, split into its four blocks.
pub fn matrix_dwt2(img: &Image, lo_d: &[f64]) -> SubbandSet {
    let (r, c) = (img.rows(), img.cols());
    let mr = analysis_matrix(lo_d, r);
    let mc = analysis_matrix(lo_d, c);
    let y = matmul(&matmul(&mr, &image_to_matrix(img)), &transpose(&mc));
    let (hr, hc) = (r / 2, c / 2);
    SubbandSet {
        ca: block(&y, 0, 0, hr, hc),
        ch: block(&y, hr, 0, hr, hc),
        cv: block(&y, 0, hc, hr, hc),
        cd: block(&y, hr, hc, hr, hc),
    }
}

/// Synthesis as `M_rᵀ · Y · M_c`.
pub fn matrix_idwt2(sb: &SubbandSet, lo_d: &[f64]) -> Image {
    let (hr, hc) = (sb.ca.rows(), sb.ca.cols());
    let (r, c) = (2 * hr, 2 * hc);
    let mut y = zeros(r, c);
    for i in 0..hr {
        for j in 0..hc {
            y[i][j] = sb.ca.get(i, j);
            y[hr + i][j] = sb.ch.get(i, j);
            y[i][hc + j] = sb.cv.get(i, j);
            y[hr + i][hc + j] = sb.cd.get(i, j);
        }
    }
    let mr = analysis_matrix(lo_d, r);
    let mc = analysis_matrix(lo_d, c);
    matrix_to_image(&matmul(&matmul(&transpose(&mr), &y), &mc))
}

/// Max-abs deviation of `mᵀm` from the identity.
pub fn orthogonality_defect(m: &Matrix) -> f64 {
    let g = matmul(&transpose(m), m);
    let mut worst = 0.0f64;
    for (i, row) in g.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

fn solve(mut a: Matrix, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

fn db2_residual(h: &[f64]) -> Vec<f64> {
    vec![
        h.iter().sum::<f64>() - std::f64::consts::SQRT_2,
        // Zero DC response of the high-pass; with the sum this pins both
        // polyphase sums to 1/sqrt(2), and with the shift orthogonality below
        // it implies unit norm.
        h[0] - h[1] + h[2] - h[3],
        h[0] * h[2] + h[1] * h[3],
        // First moment of the high-pass filter.
        (0..4)
            .map(|k| k as f64 * if k % 2 == 0 { 1.0 } else { -1.0 } * h[3 - k])
            .sum::<f64>(),
    ]
}

/// Length-4 orthonormal low-pass with one extra vanishing moment, found by
/// Newton iteration from a rough starting guess. The system has two roots,
/// mirror images of each other; the one with the larger leading tap is returned.
pub fn solve_db2() -> Vec<f64> {
    let mut h = vec![0.5, 0.8, 0.2, -0.1];
    for _ in 0..50 {
        let f = db2_residual(&h);
        if f.iter().all(|v| v.abs() < 1e-15) {
            break;
        }
        let eps = 1e-7;
        let mut jac = zeros(4, 4);
        for j in 0..4 {
            let mut hp = h.clone();
            let mut hm = h.clone();
            hp[j] += eps;
            hm[j] -= eps;
            let (fp, fm) = (db2_residual(&hp), db2_residual(&hm));
            for i in 0..4 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * eps);
            }
        }
        let step = solve(jac, f.iter().map(|v| -v).collect());
        for (x, d) in h.iter_mut().zip(step) {
            *x += d;
        }
    }
    if h[0].abs() < h[3].abs() {
        h.reverse();
    }
    h
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns eigenvalues in descending order and the matching eigenvectors.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.clone();
    let mut v = zeros(n, n);
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| v.iter().map(|row| row[i]).collect())
        .collect();
    (values, vectors)
}

/// Dense `d × d` covariance `(1/N) Σ (x - μ)(x - μ)ᵀ` and the mean.
pub fn dense_covariance(images: &[Image]) -> (Vec<f64>, Matrix) {
    let n = images.len() as f64;
    let d = images[0].pixels().len();
    let mut mean = vec![0.0; d];
    for img in images {
        for (m, p) in mean.iter_mut().zip(img.pixels()) {
            *m += p / n;
        }
    }
    let mut cov = zeros(d, d);
    for img in images {
        let x: Vec<f64> = img.pixels().iter().zip(&mean).map(|(p, m)| p - m).collect();
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += x[i] * x[j] / n;
            }
        }
    }
    (mean, cov)
}

/// Largest principal angle between the spans of two orthonormal vector sets.
pub fn subspace_angle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    // Residual of each b_j after projecting onto span(a).
    let resid: Vec<Vec<f64>> = b
        .iter()
        .map(|bj| {
            let mut r = bj.clone();
            for ai in a {
                let c = dot(ai, bj);
                r.iter_mut().zip(ai).for_each(|(x, y)| *x -= c * y);
            }
            r
        })
        .collect();
    let k = resid.len();
    let mut gram = zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            gram[i][j] = dot(&resid[i], &resid[j]);
        }
    }
    let (vals, _) = jacobi_eigen(&gram);
    vals[0].max(0.0).sqrt().min(1.0).asin()
}

fn flat_select(rule: FusionRule, t: &[f64], v: &[f64]) -> Vec<f64> {
    t.iter()
        .zip(v)
        .map(|(&t, &v)| match rule {
            FusionRule::MaxAbs => {
                let mask = t.abs() >= v.abs();
                if mask {
                    t
                } else {
                    v
                }
            }
            FusionRule::MinAbs => {
                let mask = t.abs() <= v.abs();
                if mask {
                    t
                } else {
                    v
                }
            }
            FusionRule::Average => (t + v) / 2.0,
        })
        .collect()
}

/// Every coefficient of a tree, deepest approximation first, tagged with
/// whether it is an approximation entry.
pub fn flatten_tree(tree: &DecompositionTree) -> Vec<(bool, f64)> {
    let mut out: Vec<(bool, f64)> = tree
        .deepest_approx
        .pixels()
        .iter()
        .map(|&p| (true, p))
        .collect();
    for level in &tree.details {
        for g in level.grids() {
            out.extend(g.pixels().iter().map(|&p| (false, p)));
        }
    }
    out
}

/// Per-coefficient mask oracle over the flattened trees.
pub fn flat_fusion_oracle(
    t: &DecompositionTree,
    v: &DecompositionTree,
    approx: FusionRule,
    detail: FusionRule,
) -> Vec<f64> {
    let ft = flatten_tree(t);
    let fv = flatten_tree(v);
    assert_eq!(ft.len(), fv.len());
    ft.iter()
        .zip(&fv)
        .map(|(&(is_a, a), &(_, b))| {
            let rule = if is_a { approx } else { detail };
            flat_select(rule, &[a], &[b])[0]
        })
        .collect()
}

/// Random tree with the given shape: coefficients drawn from a wide symmetric
/// range, with a sprinkling of exact ties and sign flips against `partner`.
pub fn random_tree_like(
    rng: &mut ChaCha8Rng,
    shape: &DecompositionTree,
    partner: Option<&DecompositionTree>,
) -> DecompositionTree {
    let mut tree = shape.clone();
    let mut fill = |img: &mut Image, other: Option<&Image>| {
        for (i, p) in img.pixels_mut().iter_mut().enumerate() {
            let roll: f64 = rng.random_range(0.0..1.0);
            *p = match other {
                Some(o) if roll < 0.1 => o.pixels()[i],
                Some(o) if roll < 0.2 => -o.pixels()[i],
                _ => rng.random_range(-4.0..4.0),
            };
        }
    };
    fill(&mut tree.deepest_approx, partner.map(|p| &p.deepest_approx));
    for (l, level) in tree.details.iter_mut().enumerate() {
        let others = partner.map(|p| p.details[l].grids());
        for (g, grid) in level.grids_mut().into_iter().enumerate() {
            fill(grid, others.map(|o| o[g]));
        }
    }
    tree
}

/// Relative difference with an absolute floor on the denominator.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Worst relative error between backpropagated and central-difference
/// gradients of the summed loss over `samples` random examples.
pub fn mlp_gradient_check(seed: u64, sizes: &[usize], samples: usize, h: f64, floor: f64) -> f64 {
    use wavefuse::mlp::{MlpConfig, MlpModel};
    let mut r = rng(seed);
    let mut cfg = MlpConfig::with_defaults(sizes[0], *sizes.last().unwrap());
    cfg.layer_sizes = sizes.to_vec();
    let mut model = MlpModel::zeros(cfg).unwrap();
    for layer in &mut model.layers {
        for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
            *w = r.random_range(-1.0..1.0);
        }
    }
    let data: Vec<(Vec<f64>, Vec<f64>)> = (0..samples)
        .map(|_| {
            let x = (0..sizes[0]).map(|_| r.random_range(-1.0..1.0)).collect();
            let t = (0..*sizes.last().unwrap())
                .map(|_| r.random_range(0.0..1.0))
                .collect();
            (x, t)
        })
        .collect();
    let total_loss =
        |m: &MlpModel| -> f64 { data.iter().map(|(x, t)| m.loss(x, t).unwrap()).sum() };

    let mut analytic: Vec<Vec<f64>> = model
        .layers
        .iter()
        .map(|l| vec![0.0; l.weights.len() + l.biases.len()])
        .collect();
    for (x, t) in &data {
        let (g, _) = model.gradients(x, t).unwrap();
        for (acc, gl) in analytic.iter_mut().zip(&g) {
            for (a, v) in acc.iter_mut().zip(gl.weights.iter().chain(&gl.biases)) {
                *a += v;
            }
        }
    }

    let mut worst = 0.0f64;
    for l in 0..model.layers.len() {
        let nw = model.layers[l].weights.len();
        for p in 0..analytic[l].len() {
            let probe = |delta: f64| {
                let mut m = model.clone();
                let slot = if p < nw {
                    &mut m.layers[l].weights[p]
                } else {
                    &mut m.layers[l].biases[p - nw]
                };
                *slot += delta;
                total_loss(&m)
            };
            let numeric = (probe(h) - probe(-h)) / (2.0 * h);
            worst = worst.max(rel_err(analytic[l][p], numeric, floor));
        }
    }
    worst
}

pub fn xor_data() -> Vec<(Vec<f64>, Vec<f64>)> {
    vec![
        (vec![0.0, 0.0], vec![0.0]),
        (vec![0.0, 1.0], vec![1.0]),
        (vec![1.0, 0.0], vec![1.0]),
        (vec![1.0, 1.0], vec![0.0]),
    ]
}

pub fn xor_config(seed: u64) -> wavefuse::mlp::MlpConfig {
    let mut cfg = wavefuse::mlp::MlpConfig::with_defaults(2, 1);
    cfg.layer_sizes = vec![2, 4, 1];
    cfg.learning_rate = 0.5;
    cfg.momentum = 0.9;
    cfg.epochs = 5000;
    cfg.seed = seed;
    cfg
}

/// Trains XOR and returns (correct out of 4 at threshold 0.5, final epoch MSE, model).
pub fn xor_run(seed: u64) -> (usize, f64, wavefuse::mlp::MlpModel) {
    let data = xor_data();
    let (model, summary) = wavefuse::mlp::train(xor_config(seed), &data).unwrap();
    let correct = data
        .iter()
        .filter(|(x, t)| (model.scores(x).unwrap()[0] > 0.5) == (t[0] > 0.5))
        .count();
    (correct, summary.final_mse, model)
}
