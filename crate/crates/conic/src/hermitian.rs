//! Complex Hermitian helpers: realification into real symmetric cones,
//! a real parametrization of Hermitian matrix variables, and rank-1
//! extraction for semidefinite relaxations.

use crate::cone::{svec_index, svec_len};
use crate::ConicError;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::SQRT_2;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// `[[Re H, -Im H], [Im H, Re H]]`. PSD iff `H` is PSD; every eigenvalue of
/// `H` appears twice.
pub fn realify_hermitian(h: &CMatrix) -> Result<DMatrix<f64>, ConicError> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(ConicError::Dimension(format!("{}x{} is not square", n, h.ncols())));
    }
    let skew = (h - h.adjoint()).norm();
    if skew > 1e-10 * (1.0 + h.norm()) {
        return Err(ConicError::NotHermitian(skew));
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    Ok(out)
}

/// Hermitian projection onto the PSD cone (complex eigendecomposition).
pub fn project_psd_hermitian(h: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let u = eig.eigenvectors.column(k).into_owned();
            out += &u * u.adjoint() * Complex64::new(lam, 0.0);
        }
    }
    out
}

/// An `n x n` Hermitian matrix variable stored as `n^2` real entries
/// starting at `offset` in the variable vector: the `n` diagonal entries,
/// then `(Re, Im)` of each strictly-lower entry `(i, j)`, column by column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianBlock {
    pub offset: usize,
    pub n: usize,
}

impl HermitianBlock {
    pub fn new(offset: usize, n: usize) -> Self {
        Self { offset, n }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn end(&self) -> usize {
        self.offset + self.len()
    }

    pub fn diag_index(&self, i: usize) -> usize {
        self.offset + i
    }

    /// Variable indices of `(Re H_ij, Im H_ij)` for `i > j`.
    pub fn offdiag_index(&self, i: usize, j: usize) -> (usize, usize) {
        debug_assert!(i > j);
        let n = self.n;
        // strictly-lower entries in columns 0..j
        let before = j * n - j * (j + 1) / 2;
        let k = before + (i - j - 1);
        let base = self.offset + n + 2 * k;
        (base, base + 1)
    }

    /// Coefficients `w` with `w . x == Tr(C H(x))` for Hermitian `C`.
    pub fn trace_coeffs(&self, c: &CMatrix) -> Vec<(usize, f64)> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            out.push((self.diag_index(i), c[(i, i)].re));
        }
        for j in 0..n {
            for i in j + 1..n {
                let (re, im) = self.offdiag_index(i, j);
                // C_ij H_ji + C_ji H_ij = 2 Re(C_ji H_ij)
                let cji = c[(j, i)];
                out.push((re, 2.0 * cji.re));
                out.push((im, -2.0 * cji.im));
            }
        }
        out
    }

    /// Adds `scale * Tr(C H(x))` coefficients into a dense row.
    pub fn add_trace_row(&self, row: &mut [f64], c: &CMatrix, scale: f64) {
        for (idx, w) in self.trace_coeffs(c) {
            row[idx] += scale * w;
        }
    }

    pub fn extract(&self, x: &[f64]) -> CMatrix {
        let n = self.n;
        let mut h = CMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = Complex64::new(x[self.diag_index(i)], 0.0);
        }
        for j in 0..n {
            for i in j + 1..n {
                let (re, im) = self.offdiag_index(i, j);
                let z = Complex64::new(x[re], x[im]);
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        h
    }

    /// Writes `H` into the variable vector.
    pub fn store(&self, h: &CMatrix, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            x[self.diag_index(i)] = h[(i, i)].re;
        }
        for j in 0..n {
            for i in j + 1..n {
                let (re, im) = self.offdiag_index(i, j);
                let z = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
                x[re] = z.re;
                x[im] = z.im;
            }
        }
    }

    /// Number of PSD-cone rows occupied by the realified block.
    pub fn psd_rows(&self) -> usize {
        svec_len(2 * self.n)
    }

    /// Sparse description of `x -> svec(realify(H(x)))` as `(row, var, coeff)`
    /// triplets relative to the first PSD row of this block.
    pub fn realified_svec_map(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n;
        let side = 2 * n;
        let mut out = Vec::new();
        // realify(H) = [[A, -B], [B, A]] with A = Re H (symmetric), B = Im H (skew)
        for j in 0..n {
            for i in j..n {
                let (var_re, var_im, sign_im) = if i == j {
                    (self.diag_index(i), None, 0.0)
                } else {
                    let (re, im) = self.offdiag_index(i, j);
                    (re, Some(im), 1.0)
                };
                let w = if i == j { 1.0 } else { SQRT_2 };
                // A blocks: (i, j) and (i + n, j + n)
                out.push((svec_index(side, i, j), var_re, w));
                out.push((svec_index(side, i + n, j + n), var_re, w));
                if let Some(im) = var_im {
                    // lower-left block B: entry (i + n, j) = Im H_ij, (j + n, i) = Im H_ji = -Im H_ij
                    out.push((svec_index(side, i + n, j), im, SQRT_2 * sign_im));
                    out.push((svec_index(side, j + n, i), im, -SQRT_2 * sign_im));
                }
            }
        }
        out
    }
}

/// Leading eigenpair of a Hermitian PSD matrix as `v = sqrt(lambda_1) u_1`,
/// with `quality = lambda_1 / Tr X`.
#[derive(Debug, Clone)]
pub struct Rank1 {
    pub vector: CVector,
    pub quality: f64,
}

pub fn extract_rank1(x: &CMatrix) -> Result<Rank1, ConicError> {
    let n = x.nrows();
    let trace: f64 = (0..n).map(|i| x[(i, i)].re).sum();
    if trace <= 1e-12 {
        return Err(ConicError::ZeroMatrix(trace));
    }
    let sym = (x + x.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let (k, &lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let lam = lam.max(0.0);
    let u = eig.eigenvectors.column(k).into_owned();
    Ok(Rank1 {
        vector: u * Complex64::new(lam.sqrt(), 0.0),
        quality: (lam / trace).min(1.0),
    })
}
