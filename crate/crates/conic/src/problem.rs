use crate::cone::Cone;
use crate::ConicError;
use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CscMatrix};
use std::fmt::Write as _;

/// `minimize c'x  subject to  A x + s = b,  s in K`.
///
/// `K` is the product of `cones` taken in row order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub c: DVector<f64>,
    /// Stored without explicit zeros.
    pub a: CscMatrix<f64>,
    pub b: DVector<f64>,
    pub cones: Vec<Cone>,
}

fn csc_from_triplets(m: usize, n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> CscMatrix<f64> {
    let mut coo = CooMatrix::new(m, n);
    for (i, j, v) in triplets {
        if v != 0.0 {
            coo.push(i, j, v);
        }
    }
    CscMatrix::from(&coo)
}

impl ConicProblem {
    pub fn new(c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>, cones: Vec<Cone>) -> Result<Self, ConicError> {
        let (m, n) = a.shape();
        let a = csc_from_triplets(m, n, (0..n).flat_map(|j| (0..m).map(move |i| (i, j))).map(|(i, j)| (i, j, a[(i, j)])));
        Self::from_sparse(c, a, b, cones)
    }

    pub fn from_sparse(c: DVector<f64>, a: CscMatrix<f64>, b: DVector<f64>, cones: Vec<Cone>) -> Result<Self, ConicError> {
        let p = Self { c, a, b, cones };
        p.check()?;
        Ok(p)
    }

    /// `A x`
    pub fn a_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        csc_mul(&self.a, x)
    }

    /// `A' y`
    pub fn a_tr_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        csc_tr_mul(&self.a, y)
    }

    pub fn num_vars(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn check(&self) -> Result<(), ConicError> {
        let rows: usize = self.cones.iter().map(Cone::dim).sum();
        if rows != self.a.nrows() {
            return Err(ConicError::Dimension(format!(
                "cones cover {rows} rows but A has {}",
                self.a.nrows()
            )));
        }
        if self.b.len() != self.a.nrows() {
            return Err(ConicError::Dimension(format!("b has {} entries, A has {} rows", self.b.len(), self.a.nrows())));
        }
        if self.c.len() != self.a.ncols() {
            return Err(ConicError::Dimension(format!("c has {} entries, A has {} cols", self.c.len(), self.a.ncols())));
        }
        if self.a.values().iter().chain(self.b.iter()).chain(self.c.iter()).any(|v| !v.is_finite()) {
            return Err(ConicError::NonFinite);
        }
        Ok(())
    }

    /// Plain-text interchange form:
    ///
    /// ```text
    /// conic <n> <m>
    /// cones z 3 l 2 q 3 s 4 e
    /// c <n values>
    /// b <m values>
    /// A <nnz>
    /// <row> <col> <value>    (nnz lines)
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "conic {} {}", self.num_vars(), self.num_rows());
        out.push_str("cones");
        for cone in &self.cones {
            match *cone {
                Cone::Zero(d) => {
                    let _ = write!(out, " z {d}");
                }
                Cone::NonNeg(d) => {
                    let _ = write!(out, " l {d}");
                }
                Cone::Soc(d) => {
                    let _ = write!(out, " q {d}");
                }
                Cone::Psd(n) => {
                    let _ = write!(out, " s {n}");
                }
                Cone::Exp => out.push_str(" e"),
            }
        }
        out.push('\n');
        out.push('c');
        for v in self.c.iter() {
            let _ = write!(out, " {v:e}");
        }
        out.push('\n');
        out.push('b');
        for v in self.b.iter() {
            let _ = write!(out, " {v:e}");
        }
        out.push('\n');
        let _ = writeln!(out, "A {}", self.a.nnz());
        for (i, j, v) in self.a.triplet_iter() {
            let _ = writeln!(out, "{i} {j} {v:e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ConicError> {
        let bad = |msg: &str| ConicError::Parse(msg.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head: Vec<&str> = lines.next().ok_or_else(|| bad("empty input"))?.split_whitespace().collect();
        if head.len() != 3 || head[0] != "conic" {
            return Err(bad("expected `conic <n> <m>` header"));
        }
        let n: usize = head[1].parse().map_err(|_| bad("bad n"))?;
        let m: usize = head[2].parse().map_err(|_| bad("bad m"))?;

        let cone_line: Vec<&str> = lines.next().ok_or_else(|| bad("missing cones"))?.split_whitespace().collect();
        if cone_line.first() != Some(&"cones") {
            return Err(bad("expected cones line"));
        }
        let mut cones = Vec::new();
        let mut toks = cone_line[1..].iter();
        while let Some(&t) = toks.next() {
            if t == "e" {
                cones.push(Cone::Exp);
                continue;
            }
            let d: usize = toks.next().ok_or_else(|| bad("cone size missing"))?.parse().map_err(|_| bad("bad cone size"))?;
            cones.push(match t {
                "z" => Cone::Zero(d),
                "l" => Cone::NonNeg(d),
                "q" => Cone::Soc(d),
                "s" => Cone::Psd(d),
                _ => return Err(bad("unknown cone tag")),
            });
        }

        let mut read_vec = |tag: &str, len: usize| -> Result<DVector<f64>, ConicError> {
            let l: Vec<&str> = lines.next().ok_or_else(|| bad("missing vector"))?.split_whitespace().collect();
            if l.first() != Some(&tag) || l.len() != len + 1 {
                return Err(bad(&format!("malformed `{tag}` line")));
            }
            l[1..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| bad("bad float")))
                .collect::<Result<Vec<_>, _>>()
                .map(DVector::from_vec)
        };
        let c = read_vec("c", n)?;
        let b = read_vec("b", m)?;
        let a_head: Vec<&str> = lines.next().ok_or_else(|| bad("missing A"))?.split_whitespace().collect();
        if a_head.len() != 2 || a_head[0] != "A" {
            return Err(bad("expected `A <nnz>`"));
        }
        let nnz: usize = a_head[1].parse().map_err(|_| bad("bad nnz"))?;
        let mut triplets = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let t: Vec<&str> = lines.next().ok_or_else(|| bad("truncated A"))?.split_whitespace().collect();
            if t.len() != 3 {
                return Err(bad("A entry must be `row col value`"));
            }
            let i: usize = t[0].parse().map_err(|_| bad("bad row"))?;
            let j: usize = t[1].parse().map_err(|_| bad("bad col"))?;
            if i >= m || j >= n {
                return Err(bad("A index out of range"));
            }
            triplets.push((i, j, t[2].parse().map_err(|_| bad("bad float"))?));
        }
        Self::from_sparse(c, csc_from_triplets(m, n, triplets), b, cones)
    }
}

/// Incremental row-wise builder for [`ConicProblem`].
///
/// Rows must be added grouped by cone, in the order the cones are declared.
#[derive(Debug, Clone)]
pub struct ProblemBuilder {
    n: usize,
    c: Vec<f64>,
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<Cone>,
}

impl ProblemBuilder {
    pub fn new(num_vars: usize) -> Self {
        Self { n: num_vars, c: vec![0.0; num_vars], triplets: Vec::new(), b: Vec::new(), cones: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn objective_mut(&mut self) -> &mut [f64] {
        &mut self.c
    }

    /// Appends a cone together with its rows, each given as `(coeffs, rhs)`
    /// meaning `s = rhs - coeffs . x`.
    pub fn push_cone(&mut self, cone: Cone, rows: Vec<(Vec<f64>, f64)>) {
        assert_eq!(cone.dim(), rows.len(), "row count must match cone dimension");
        for (coeffs, rhs) in rows {
            assert_eq!(coeffs.len(), self.n);
            let i = self.b.len();
            self.triplets.extend(coeffs.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (i, j, v)));
            self.b.push(rhs);
        }
        self.cones.push(cone);
    }

    /// Like [`push_cone`](Self::push_cone) with rows given as
    /// `(col, coeff)` lists. Repeated columns are summed.
    pub fn push_cone_sparse(&mut self, cone: Cone, rows: Vec<(Vec<(usize, f64)>, f64)>) {
        assert_eq!(cone.dim(), rows.len(), "row count must match cone dimension");
        for (coeffs, rhs) in rows {
            let i = self.b.len();
            for (j, v) in coeffs {
                assert!(j < self.n, "column {j} out of range");
                self.triplets.push((i, j, v));
            }
            self.b.push(rhs);
        }
        self.cones.push(cone);
    }

    pub fn zero_row(&self) -> Vec<f64> {
        vec![0.0; self.n]
    }

    pub fn build(self) -> Result<ConicProblem, ConicError> {
        let a = csc_from_triplets(self.b.len(), self.n, self.triplets);
        // summed duplicates may cancel
        let a = if a.values().contains(&0.0) { csc_from_triplets(a.nrows(), a.ncols(), a.triplet_iter().map(|(i, j, &v)| (i, j, v))) } else { a };
        ConicProblem::from_sparse(DVector::from_vec(self.c), a, DVector::from_vec(self.b), self.cones)
    }
}

pub(crate) fn csc_mul(a: &CscMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.nrows());
    for (j, col) in a.col_iter().enumerate() {
        let xj = x[j];
        if xj != 0.0 {
            for (&i, &v) in col.row_indices().iter().zip(col.values()) {
                out[i] += v * xj;
            }
        }
    }
    out
}

pub(crate) fn csc_tr_mul(a: &CscMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        a.ncols(),
        a.col_iter().map(|col| col.row_indices().iter().zip(col.values()).map(|(&i, &v)| v * y[i]).sum::<f64>()),
    )
}
