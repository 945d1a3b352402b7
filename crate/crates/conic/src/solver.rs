//! First-order conic solver.
//!
//! Douglas-Rachford splitting on the homogeneous self-dual embedding of
//! `min c'x s.t. Ax + s = b, s in K`. Each iteration does one solve with a
//! prefactored quasi-definite system and one projection onto
//! `R^n x K* x R_+`. `A` is kept sparse. Rows/columns are Ruiz-equilibrated first (one factor per
//! coupled cone block) and the dual-variable metric is adapted while running.

use crate::cone::{project_dual, Cone};
use crate::problem::{csc_mul, csc_tr_mul, ConicProblem};
use crate::ConicError;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};
use nalgebra_sparse::CscMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Absolute and relative tolerance on primal, dual and gap residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    /// Initial dual metric scale.
    pub scale: f64,
    pub adaptive_scale: bool,
    pub rho_x: f64,
    pub equilibrate_iters: usize,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50_000,
            alpha: 1.5,
            scale: 0.1,
            adaptive_scale: true,
            rho_x: 1e-6,
            equilibrate_iters: 25,
            check_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// Iteration cap reached with residuals within `100 * tol`.
    Inaccurate,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl Status {
    pub fn is_usable(&self) -> bool {
        matches!(self, Status::Optimal | Status::Inaccurate)
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
    pub status: Status,
    /// `||Ax + s - b||_inf`
    pub primal_residual: f64,
    /// `||A'y + c||_inf`
    pub dual_residual: f64,
    /// `|c'x + b'y|`
    pub gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub scale_updates: usize,
}

/// Initial primal/dual point; dimensions must match the problem.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
}

impl From<&ConicSolution> for WarmStart {
    fn from(sol: &ConicSolution) -> Self {
        Self { x: sol.x.clone(), y: sol.y.clone(), s: sol.s.clone() }
    }
}

struct Scaling {
    d: DVector<f64>,
    e: DVector<f64>,
    sb: f64,
    sc: f64,
}

fn equilibrate(p: &ConicProblem, iters: usize) -> (CscMatrix<f64>, Scaling) {
    let (m, n) = (p.num_rows(), p.num_vars());
    let mut a = p.a.clone();
    let col_of: Vec<usize> = a.col_iter().enumerate().flat_map(|(j, col)| std::iter::repeat_n(j, col.nnz())).collect();
    let row_of: Vec<usize> = a.row_indices().to_vec();
    let mut d = DVector::from_element(m, 1.0);
    let mut e = DVector::from_element(n, 1.0);
    let clamp = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };

    for _ in 0..iters {
        let mut row_norm = vec![0.0f64; m];
        let mut col_norm = vec![0.0f64; n];
        for ((&i, &j), &v) in row_of.iter().zip(&col_of).zip(a.values()) {
            row_norm[i] = row_norm[i].max(v.abs());
            col_norm[j] = col_norm[j].max(v.abs());
        }
        let mut off = 0;
        for cone in &p.cones {
            let dim = cone.dim();
            if cone.is_coupled() && dim > 0 {
                let mean = row_norm[off..off + dim].iter().sum::<f64>() / dim as f64;
                row_norm[off..off + dim].iter_mut().for_each(|r| *r = mean);
            }
            off += dim;
        }
        let dr: Vec<f64> = row_norm.iter().map(|&r| 1.0 / clamp(r).sqrt()).collect();
        let ec: Vec<f64> = col_norm.iter().map(|&c| 1.0 / clamp(c).sqrt()).collect();
        for ((&i, &j), v) in row_of.iter().zip(&col_of).zip(a.values_mut()) {
            *v *= dr[i] * ec[j];
        }
        for i in 0..m {
            d[i] *= dr[i];
        }
        for j in 0..n {
            e[j] *= ec[j];
        }
    }

    let bn = p.b.component_mul(&d).amax();
    let cn = p.c.component_mul(&e).amax();
    let sb = 1.0 / clamp(bn);
    let sc = 1.0 / clamp(cn);
    (a, Scaling { d, e, sb, sc })
}

/// Row structure of `A` used to factor `rho I + A' W A`.
///
/// Rows with one nonzero add to the diagonal. When the remaining rows and
/// the columns no such row touches are few, the system is reduced to that
/// small quasi-definite block; otherwise it is formed and factored densely.
struct Structure {
    /// `(row, col, value)` of single-entry rows.
    singles: Vec<(usize, usize, f64)>,
    /// Rows with two or more entries.
    multi: Vec<usize>,
    /// Those rows, densely.
    b: DMatrix<f64>,
    /// Columns touched by at least one single-entry row.
    on_diag: Vec<bool>,
    off_diag: Vec<usize>,
    /// Rows of `A` as `(col, value)` lists, kept for the dense path.
    rows: Option<Vec<Vec<(usize, f64)>>>,
}

impl Structure {
    fn new(a: &CscMatrix<f64>) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (i, j, &v) in a.triplet_iter() {
            rows[i].push((j, v));
        }
        let mut singles = Vec::new();
        let mut multi = Vec::new();
        let mut on_diag = vec![false; n];
        for (i, row) in rows.iter().enumerate() {
            match row.len() {
                0 => {}
                1 => {
                    singles.push((i, row[0].0, row[0].1));
                    on_diag[row[0].0] = true;
                }
                _ => multi.push(i),
            }
        }
        let off_diag: Vec<usize> = (0..n).filter(|&j| !on_diag[j]).collect();
        if multi.len() + off_diag.len() >= n {
            return Self { singles, multi, b: DMatrix::zeros(0, n), on_diag, off_diag, rows: Some(rows) };
        }
        let mut b = DMatrix::zeros(multi.len(), n);
        for (r, &i) in multi.iter().enumerate() {
            for &(j, v) in &rows[i] {
                b[(r, j)] = v;
            }
        }
        Self { singles, multi, b, on_diag, off_diag, rows: None }
    }
}

enum Factor {
    Dense(Cholesky<f64, Dyn>),
    /// `[[rho I, B_Q'], [B_Q, -(W^-1 + B_P D^-1 B_P')]]` over the off-diagonal
    /// columns `Q` and the multi-entry rows, with `D` the diagonal on `P`.
    Reduced { d_inv: DVector<f64>, lu: Option<LU<f64, Dyn, Dyn>> },
}

/// Prefactored `(R + M)` system for the current dual metric.
struct Kkt {
    factor: Factor,
    ry_inv: DVector<f64>,
    rho_x: f64,
    r_tau: f64,
    p_x: DVector<f64>,
    p_y: DVector<f64>,
    denom: f64,
}

impl Kkt {
    fn new(
        a: &CscMatrix<f64>,
        st: &Structure,
        b: &DVector<f64>,
        c: &DVector<f64>,
        ry_inv: DVector<f64>,
        rho_x: f64,
    ) -> Result<Self, ConicError> {
        let n = a.ncols();
        let factor = match &st.rows {
            Some(rows) => {
                let mut k = DMatrix::from_diagonal_element(n, n, rho_x);
                for (i, row) in rows.iter().enumerate() {
                    let w = ry_inv[i];
                    for &(j, vj) in row {
                        for &(l, vl) in row {
                            k[(j, l)] += w * vj * vl;
                        }
                    }
                }
                Factor::Dense(Cholesky::new(k).ok_or(ConicError::Factorization)?)
            }
            None => {
                let mut diag = DVector::from_element(n, rho_x);
                for &(i, j, v) in &st.singles {
                    diag[j] += ry_inv[i] * v * v;
                }
                let d_inv = DVector::from_iterator(n, (0..n).map(|j| if st.on_diag[j] { 1.0 / diag[j] } else { 0.0 }));
                let (q, r) = (st.off_diag.len(), st.multi.len());
                let mut bs = st.b.clone();
                for j in 0..n {
                    let f = d_inv[j].sqrt();
                    bs.column_mut(j).scale_mut(f);
                }
                let cap = &bs * bs.transpose();
                let mut k = DMatrix::zeros(q + r, q + r);
                for t in 0..q {
                    k[(t, t)] = rho_x;
                }
                for (u, &i) in st.multi.iter().enumerate() {
                    for (t, &j) in st.off_diag.iter().enumerate() {
                        k[(t, q + u)] = st.b[(u, j)];
                        k[(q + u, t)] = st.b[(u, j)];
                    }
                    for v in 0..r {
                        k[(q + u, q + v)] = -cap[(u, v)];
                    }
                    k[(q + u, q + u)] -= 1.0 / ry_inv[i];
                }
                let lu = if q + r == 0 {
                    None
                } else {
                    let lu = LU::new(k);
                    if !lu.is_invertible() {
                        return Err(ConicError::Factorization);
                    }
                    Some(lu)
                };
                Factor::Reduced { d_inv, lu }
            }
        };
        let mut kkt =
            Self { factor, ry_inv, rho_x, r_tau: 1.0, p_x: DVector::zeros(n), p_y: DVector::zeros(a.nrows()), denom: 1.0 };
        let (px, py) = kkt.solve_xy(a, st, c, b);
        kkt.denom = kkt.r_tau + c.dot(&px) + b.dot(&py);
        kkt.p_x = px;
        kkt.p_y = py;
        Ok(kkt)
    }

    /// `(rho I + A' W A)^{-1} rhs`
    fn solve_normal(&self, st: &Structure, rhs: &mut DVector<f64>) {
        match &self.factor {
            Factor::Dense(chol) => chol.solve_mut(rhs),
            Factor::Reduced { d_inv, lu } => {
                let q = st.off_diag.len();
                let scaled = rhs.component_mul(d_inv);
                let h = &st.b * &scaled;
                let mut z = DVector::zeros(q + st.multi.len());
                for (t, &j) in st.off_diag.iter().enumerate() {
                    z[t] = rhs[j];
                }
                z.rows_mut(q, h.len()).copy_from(&(-h));
                let sol = match lu {
                    Some(lu) => lu.solve(&z).unwrap_or(z),
                    None => z,
                };
                let back = st.b.tr_mul(&sol.rows(q, st.multi.len()));
                for j in 0..rhs.len() {
                    rhs[j] = if st.on_diag[j] { d_inv[j] * (rhs[j] - back[j]) } else { 0.0 };
                }
                for (t, &j) in st.off_diag.iter().enumerate() {
                    rhs[j] = sol[t];
                }
            }
        }
    }

    /// Solves `[[rho_x I, A'], [-A, R_y]] (x, y) = (rx, ry)`.
    fn solve_xy(
        &self,
        a: &CscMatrix<f64>,
        st: &Structure,
        rx: &DVector<f64>,
        ry: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let t = ry.component_mul(&self.ry_inv);
        let mut x = rx - csc_tr_mul(a, &t);
        self.solve_normal(st, &mut x);
        let mut y = csc_mul(a, &x);
        y += ry;
        y.component_mul_assign(&self.ry_inv);
        (x, y)
    }
}

fn dual_metric_inverse(cones: &[Cone], m: usize, scale: f64) -> DVector<f64> {
    let mut ry_inv = DVector::from_element(m, scale);
    let mut off = 0;
    for cone in cones {
        let d = cone.dim();
        if let Cone::Zero(_) = cone {
            for i in off..off + d {
                ry_inv[i] = 1000.0 * scale;
            }
        }
        off += d;
    }
    ry_inv
}

struct Residuals {
    pres: f64,
    dres: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
    rel_p: f64,
    rel_d: f64,
    rel_g: f64,
}

fn residuals(p: &ConicProblem, x: &DVector<f64>, y: &DVector<f64>, s: &DVector<f64>) -> Residuals {
    let ax = p.a_mul(x);
    let aty = p.a_tr_mul(y);
    let pres = (&ax + s - &p.b).amax();
    let dres = (&aty + &p.c).amax();
    let pobj = p.c.dot(x);
    let dobj = -p.b.dot(y);
    let gap = (pobj - dobj).abs();
    let rel_p = pres / (1.0 + ax.amax().max(s.amax()).max(p.b.amax()));
    let rel_d = dres / (1.0 + aty.amax().max(p.c.amax()));
    let rel_g = gap / (1.0 + pobj.abs().max(dobj.abs()));
    Residuals { pres, dres, gap, pobj, dobj, rel_p, rel_d, rel_g }
}

pub fn solve(problem: &ConicProblem, settings: &Settings) -> Result<ConicSolution, ConicError> {
    solve_warm(problem, settings, None)
}

pub fn solve_warm(problem: &ConicProblem, settings: &Settings, warm: Option<&WarmStart>) -> Result<ConicSolution, ConicError> {
    problem.check()?;
    let (m, n) = (problem.num_rows(), problem.num_vars());
    let (a, sc) = equilibrate(problem, settings.equilibrate_iters);
    let st = Structure::new(&a);
    let b = problem.b.component_mul(&sc.d) * sc.sb;
    let c = problem.c.component_mul(&sc.e) * sc.sc;
    let cones = &problem.cones;

    let mut scale = settings.scale;
    let mut kkt = Kkt::new(&a, &st, &b, &c, dual_metric_inverse(cones, m, scale), settings.rho_x)?;

    // w = u + R^{-1} v with u = (x, y, 1), v = (0, s, 0)
    let mut wx = DVector::zeros(n);
    let mut wy = DVector::zeros(m);
    let mut wt = 1.0;
    if let Some(ws) = warm {
        if ws.x.len() != n || ws.y.len() != m || ws.s.len() != m {
            return Err(ConicError::Dimension("warm start does not match problem".into()));
        }
        wx = ws.x.component_div(&sc.e) * sc.sb;
        let yh = ws.y.component_div(&sc.d) * sc.sc;
        let sh = ws.s.component_mul(&sc.d) * sc.sb;
        wy = yh + sh.component_mul(&kkt.ry_inv);
    }

    let unscale = |ux: &DVector<f64>, uy: &DVector<f64>, vy: &DVector<f64>, tau: f64| {
        let x = ux.component_mul(&sc.e) / (tau * sc.sb);
        let y = uy.component_mul(&sc.d) / (tau * sc.sc);
        let s = vy.component_div(&sc.d) / (tau * sc.sb);
        (x, y, s)
    };

    let mut best: Option<(f64, DVector<f64>, DVector<f64>, DVector<f64>)> = None;
    let mut scale_updates = 0;
    let mut last_update = 0;

    for it in 1..=settings.max_iter {
        // u~ = (R + M)^{-1} R w
        let rx = &wx * kkt.rho_x;
        let ry = wy.component_div(&kkt.ry_inv);
        let rt = wt * kkt.r_tau;
        let (zx, zy) = kkt.solve_xy(&a, &st, &rx, &ry);
        let tau_t = (rt + c.dot(&zx) + b.dot(&zy)) / kkt.denom;
        let tx = zx - &kkt.p_x * tau_t;
        let ty = zy - &kkt.p_y * tau_t;

        // u = Pi_C(2u~ - w)
        let ux = &tx * 2.0 - &wx;
        let mut uy = &ty * 2.0 - &wy;
        project_dual(cones, uy.as_mut_slice());
        let ut = (2.0 * tau_t - wt).max(0.0);

        // v = R (u + w - 2u~), then relaxed update of w
        let vy = (&uy + &wy - &ty * 2.0).component_div(&kkt.ry_inv);
        let vt = (ut + wt - 2.0 * tau_t) * kkt.r_tau;
        wx += (&ux - &tx) * settings.alpha;
        wy += (&uy - &ty) * settings.alpha;
        wt += settings.alpha * (ut - tau_t);

        if it % settings.check_every != 0 && it != settings.max_iter {
            continue;
        }

        if ut > 1e-12 * (1.0 + vt.abs()) {
            let (x, y, s) = unscale(&ux, &uy, &vy, ut);
            let r = residuals(problem, &x, &y, &s);
            let worst = r.rel_p.max(r.rel_d).max(r.rel_g);
            if best.as_ref().is_none_or(|bst| worst < bst.0) {
                best = Some((worst, x.clone(), y.clone(), s.clone()));
            }
            if r.rel_p <= settings.tol && r.rel_d <= settings.tol && r.rel_g <= settings.tol {
                return Ok(ConicSolution {
                    x,
                    y,
                    s,
                    status: Status::Optimal,
                    primal_residual: r.pres,
                    dual_residual: r.dres,
                    gap: r.gap,
                    primal_objective: r.pobj,
                    dual_objective: r.dobj,
                    iterations: it,
                    scale_updates,
                });
            }
            if settings.adaptive_scale && it - last_update >= 100 && r.rel_p > 0.0 && r.rel_d > 0.0 {
                let ratio = (r.rel_p / r.rel_d).sqrt();
                if !(0.2..=5.0).contains(&ratio) {
                    let new_scale = (scale * ratio).clamp(1e-6, 1e6);
                    if new_scale != scale {
                        scale = new_scale;
                        kkt = Kkt::new(&a, &st, &b, &c, dual_metric_inverse(cones, m, scale), settings.rho_x)?;
                        // keep (u, v) fixed under the new metric
                        wx = ux.clone();
                        wy = &uy + vy.component_mul(&kkt.ry_inv);
                        wt = ut + vt / kkt.r_tau;
                        scale_updates += 1;
                        last_update = it;
                    }
                }
            }
        }

        // infeasibility certificates on the unnormalized iterate
        let y_cert = uy.component_mul(&sc.d) / sc.sc;
        let by = problem.b.dot(&y_cert);
        if by < 0.0 {
            let aty = problem.a_tr_mul(&y_cert) / (-by);
            if aty.amax() <= settings.tol && ut <= 1e-8 * (1.0 + vt.abs()) {
                return Ok(certificate(n, m, y_cert / (-by), Status::Infeasible, it, scale_updates));
            }
        }
        let x_cert = ux.component_mul(&sc.e) / sc.sb;
        let cx = problem.c.dot(&x_cert);
        if cx < 0.0 {
            let s_cert = vy.component_div(&sc.d) / sc.sb;
            let r = (problem.a_mul(&x_cert) + &s_cert) / (-cx);
            if r.amax() <= settings.tol && ut <= 1e-8 * (1.0 + vt.abs()) {
                let mut sol = certificate(n, m, DVector::zeros(m), Status::Unbounded, it, scale_updates);
                sol.x = x_cert / (-cx);
                sol.s = s_cert / (-cx);
                return Ok(sol);
            }
        }
    }

    let (worst, x, y, s) = match best {
        Some(b) => b,
        None => (f64::INFINITY, DVector::zeros(n), DVector::zeros(m), DVector::zeros(m)),
    };
    let r = residuals(problem, &x, &y, &s);
    let status = if worst <= 100.0 * settings.tol { Status::Inaccurate } else { Status::IterationLimit };
    Ok(ConicSolution {
        x,
        y,
        s,
        status,
        primal_residual: r.pres,
        dual_residual: r.dres,
        gap: r.gap,
        primal_objective: r.pobj,
        dual_objective: r.dobj,
        iterations: settings.max_iter,
        scale_updates,
    })
}

fn certificate(n: usize, m: usize, y: DVector<f64>, status: Status, it: usize, scale_updates: usize) -> ConicSolution {
    ConicSolution {
        x: DVector::zeros(n),
        y,
        s: DVector::zeros(m),
        status,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
        primal_objective: if status == Status::Infeasible { f64::INFINITY } else { f64::NEG_INFINITY },
        dual_objective: if status == Status::Infeasible { f64::INFINITY } else { f64::NEG_INFINITY },
        iterations: it,
        scale_updates,
    }
}
