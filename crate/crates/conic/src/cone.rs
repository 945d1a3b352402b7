//! Cone definitions and Euclidean projections.
//!
//! PSD blocks are stored as the scaled lower-triangular vectorization
//! (column-major, off-diagonals multiplied by `sqrt(2)`), which makes the
//! map from symmetric matrices to vectors an isometry.

use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::SQRT_2;

/// One block of the product cone, in row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `{0}^d`
    Zero(usize),
    /// `R_+^d`
    NonNeg(usize),
    /// `{(t, z) : ||z|| <= t}` of total dimension `d` (including `t`).
    Soc(usize),
    /// Symmetric PSD matrices of side `n`, occupying `n(n+1)/2` rows.
    Psd(usize),
    /// `closure{(x, y, z) : y exp(x / y) <= z, y > 0}`.
    Exp,
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::NonNeg(d) | Cone::Soc(d) => d,
            Cone::Psd(n) => n * (n + 1) / 2,
            Cone::Exp => 3,
        }
    }

    /// Whether every row of the block must share a single equilibration factor.
    pub(crate) fn is_coupled(&self) -> bool {
        matches!(self, Cone::Soc(_) | Cone::Psd(_) | Cone::Exp)
    }
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index of entry `(i, j)` with `i >= j` in the scaled vectorization.
#[inline]
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    // column c holds n - c entries
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        out.push(m[(j, j)]);
        for i in j + 1..n {
            out.push(SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = v[k] / SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Nearest PSD matrix in Frobenius norm: clamp negative eigenvalues.
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let u = eig.eigenvectors.column(k);
            out.ger(lam, &u, &u, 1.0);
        }
    }
    out
}

/// Projects a scaled-vectorized symmetric matrix onto the PSD cone in place.
pub fn project_psd_svec(v: &mut [f64], n: usize) {
    let m = smat(v, n);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return;
    }
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let u = eig.eigenvectors.column(k);
            out.ger(lam, &u, &u, 1.0);
        }
    }
    v.copy_from_slice(&svec(&out));
}

/// Projection onto `{(t, z) : ||z|| <= t}`; `v[0]` is `t`.
pub fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let nz = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nz <= t {
        return;
    }
    if nz <= -t {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let alpha = 0.5 * (t + nz);
    v[0] = alpha;
    let s = alpha / nz;
    v[1..].iter_mut().for_each(|x| *x *= s);
}

/// Result flag from the exponential-cone projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjAccuracy {
    Exact,
    Inaccurate,
}

const EXP_MAX_ITERS: usize = 200;

fn in_exp_cone(x: f64, y: f64, z: f64) -> bool {
    (y > 0.0 && y * (x / y).exp() <= z) || (x <= 0.0 && y == 0.0 && z >= 0.0)
}

fn in_exp_polar(x: f64, y: f64, z: f64) -> bool {
    // polar cone = -dual: {(u,v,w): u>0, u*exp(v/u) <= -e*w} ∪ {u=0, v<=0, w<=0}
    (x > 0.0 && x * (y / x).exp() <= -std::f64::consts::E * z) || (x == 0.0 && y <= 0.0 && z <= 0.0)
}

/// Derivative (up to a positive factor) of the cosine between `v0` and the
/// boundary ray `d(rho) = (rho, 1, exp(rho))`.
fn exp_ray_grad(r0: f64, s0: f64, t0: f64, rho: f64) -> f64 {
    if rho > 0.0 {
        // divide through by exp(2 rho) to stay finite
        let em = (-rho).exp();
        let em2 = em * em;
        r0 * (em2 + 1.0 - rho) - s0 * (rho * em2 + 1.0) + t0 * em * (rho * rho - rho + 1.0)
    } else {
        let e = rho.exp();
        let e2 = e * e;
        r0 * (1.0 + e2 * (1.0 - rho)) - s0 * (rho + e2) + t0 * e * (rho * rho - rho + 1.0)
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Projection onto the closed exponential cone.
///
/// Handles the primal, polar and `x<0, y<0` cases in closed form; otherwise
/// the projection lies on the smooth boundary `{(rho s, s, s e^rho)}` and `rho`
/// is found as the root of a scalar equation by safeguarded Newton.
pub fn project_exp(v: &mut [f64]) -> ProjAccuracy {
    let (r0, s0, t0) = (v[0], v[1], v[2]);
    if in_exp_cone(r0, s0, t0) {
        return ProjAccuracy::Exact;
    }
    if in_exp_polar(r0, s0, t0) {
        v.iter_mut().for_each(|x| *x = 0.0);
        return ProjAccuracy::Exact;
    }
    if r0 < 0.0 && s0 < 0.0 {
        v[1] = 0.0;
        v[2] = t0.max(0.0);
        return ProjAccuracy::Exact;
    }

    // bracket the root of the ray-cosine derivative: positive to the left
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut guard = 0;
    while exp_ray_grad(r0, s0, t0, lo) <= 0.0 && guard < 60 {
        hi = lo;
        lo *= 2.0;
        guard += 1;
    }
    guard = 0;
    while exp_ray_grad(r0, s0, t0, hi) >= 0.0 && guard < 60 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
    }
    if hi < lo {
        std::mem::swap(&mut lo, &mut hi);
    }

    let mut rho = 0.5 * (lo + hi);
    let mut accuracy = ProjAccuracy::Inaccurate;
    for _ in 0..EXP_MAX_ITERS {
        let g = exp_ray_grad(r0, s0, t0, rho);
        if g > 0.0 {
            lo = rho;
        } else {
            hi = rho;
        }
        // secant-free Newton via central difference of the scaled gradient
        let h = 1e-7 * (1.0 + rho.abs());
        let dg = (exp_ray_grad(r0, s0, t0, rho + h) - exp_ray_grad(r0, s0, t0, rho - h)) / (2.0 * h);
        let mut next = if dg < 0.0 { rho - g / dg } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - rho).abs() <= 1e-15 * (1.0 + rho.abs()) || hi - lo <= 1e-15 * (1.0 + rho.abs()) {
            rho = next;
            accuracy = ProjAccuracy::Exact;
            break;
        }
        rho = next;
    }

    let (d0, d1, d2) = if rho > 0.0 {
        // normalized direction to avoid overflow
        let em = (-rho).exp();
        (rho * em, em, 1.0)
    } else {
        (rho, 1.0, rho.exp())
    };
    let dd = d0 * d0 + d1 * d1 + d2 * d2;
    let scale = ((r0 * d0 + s0 * d1 + t0 * d2) / dd).max(0.0);
    let ray = [scale * d0, scale * d1, scale * d2];

    // compare against the closed-form faces so a poor root never wins
    let p0 = [r0, s0, t0];
    let face = [r0.min(0.0), 0.0, t0.max(0.0)];
    let best = [ray, face, [0.0, 0.0, 0.0]]
        .into_iter()
        .min_by(|a, b| dist2(*a, p0).total_cmp(&dist2(*b, p0)))
        .unwrap();
    v[0] = best[0];
    v[1] = best[1];
    v[2] = best[2];
    accuracy
}

/// Projection onto the dual exponential cone via Moreau: `z + P_K(-z)`.
pub fn project_exp_dual(v: &mut [f64]) -> ProjAccuracy {
    let mut neg = [-v[0], -v[1], -v[2]];
    let acc = project_exp(&mut neg);
    v[0] += neg[0];
    v[1] += neg[1];
    v[2] += neg[2];
    acc
}

/// Projects `v` onto the product cone `cones` (primal).
pub fn project_primal(cones: &[Cone], v: &mut [f64]) -> ProjAccuracy {
    let mut acc = ProjAccuracy::Exact;
    let mut off = 0;
    for cone in cones {
        let d = cone.dim();
        let blk = &mut v[off..off + d];
        match *cone {
            Cone::Zero(_) => blk.iter_mut().for_each(|x| *x = 0.0),
            Cone::NonNeg(_) => blk.iter_mut().for_each(|x| *x = x.max(0.0)),
            Cone::Soc(_) => project_soc(blk),
            Cone::Psd(n) => project_psd_svec(blk, n),
            Cone::Exp => {
                if project_exp(blk) == ProjAccuracy::Inaccurate {
                    acc = ProjAccuracy::Inaccurate;
                }
            }
        }
        off += d;
    }
    acc
}

/// Projects `v` onto the dual of the product cone.
pub fn project_dual(cones: &[Cone], v: &mut [f64]) -> ProjAccuracy {
    let mut acc = ProjAccuracy::Exact;
    let mut off = 0;
    for cone in cones {
        let d = cone.dim();
        let blk = &mut v[off..off + d];
        match *cone {
            Cone::Zero(_) => {}
            Cone::NonNeg(_) => blk.iter_mut().for_each(|x| *x = x.max(0.0)),
            Cone::Soc(_) => project_soc(blk),
            Cone::Psd(n) => project_psd_svec(blk, n),
            Cone::Exp => {
                if project_exp_dual(blk) == ProjAccuracy::Inaccurate {
                    acc = ProjAccuracy::Inaccurate;
                }
            }
        }
        off += d;
    }
    acc
}

/// Euclidean distance from `v` to the product cone.
pub fn distance_to_cone(cones: &[Cone], v: &[f64]) -> f64 {
    let mut p = v.to_vec();
    project_primal(cones, &mut p);
    p.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Euclidean distance from `v` to the dual product cone.
pub fn distance_to_dual_cone(cones: &[Cone], v: &[f64]) -> f64 {
    let mut p = v.to_vec();
    project_dual(cones, &mut p);
    p.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}
