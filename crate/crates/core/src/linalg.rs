//! Patankar mass matrices and the small dense solves behind every stage,
//! update and implicit dense-output evaluation.
//!
//! All of those linear systems have the shape
//!
//! ```text
//! x_k = y_k + dt * sum_j w_j * sum_nu ( P_j[k][nu] * x_a / s_a  -  P_j[nu][k] * x_b / s_b )
//! ```
//!
//! where the indices `a`, `b` are picked by [`index_delta`] from the sign of
//! the weight `w_j`. Assembling them in one place keeps the sign pattern
//! (diagonal >= 1, off-diagonal <= 0, unit column sums) under one test suite.

use std::cell::RefCell;
use std::fmt;

use crate::error::{Error, Result};

/// Square dense matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::usage("matrix rows must all have length equal to the row count"));
        }
        Ok(DenseMatrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    /// Builds a matrix from a row-major slice of length `n * n`.
    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::usage(format!(
                "expected {} matrix entries, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(DenseMatrix {
            n,
            data: data.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)]).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.n).map(|i| self.row(i)))
            .finish()
    }
}

/// Index function of the Patankar weighting: keeps `nu` for non-negative
/// weights and switches to `k` for negative ones.
pub fn index_delta(nu: usize, k: usize, x: f64) -> usize {
    if x >= 0.0 {
        nu
    } else {
        k
    }
}

/// Mass matrix of a Patankar-weighted linear system.
///
/// Only [`assemble`] constructs these, so every instance carries the
/// M-matrix sign pattern: diagonal >= 1, off-diagonal <= 0, unit column sums.
#[derive(Clone, Debug, PartialEq)]
pub struct PatankarMatrix {
    m: DenseMatrix,
}

impl PatankarMatrix {
    pub fn size(&self) -> usize {
        self.m.dim()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn min_diagonal(&self) -> f64 {
        (0..self.size()).map(|i| self.m[(i, i)]).fold(f64::INFINITY, f64::min)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.size();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.m[(i, j)]);
                }
            }
        }
        worst
    }

    /// Largest deviation of a column sum from 1, relative to the column's
    /// absolute size (never below 1).
    pub fn column_sum_defect(&self) -> f64 {
        let n = self.size();
        (0..n)
            .map(|j| {
                let (sum, abs) = (0..n).fold((0.0, 0.0), |(s, a), i| {
                    (s + self.m[(i, j)], a + self.m[(i, j)].abs())
                });
                (sum - 1.0).abs() / abs.max(1.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Assembles the Patankar mass matrix `M` so that `M x = y` is the linear
/// system described in the module docs.
///
/// `rates[j]` is the production matrix evaluated at stage `j`; the
/// destruction matrix is its transpose. Negative weights route through
/// [`index_delta`], which for a conservative system amounts to assembling
/// `|w_j|` against the transposed rates.
pub fn assemble(
    weights: &[f64],
    rates: &[&DenseMatrix],
    denominators: &[f64],
    dt: f64,
) -> Result<PatankarMatrix> {
    let n = denominators.len();
    if weights.len() != rates.len() {
        return Err(Error::usage(format!(
            "{} weights but {} rate matrices",
            weights.len(),
            rates.len()
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::usage(format!("step size must be positive and finite, got {dt}")));
    }
    if let Some(k) = denominators.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::domain(format!(
            "Patankar denominator {k} is not positive: {}",
            denominators[k]
        )));
    }
    let mut m = DenseMatrix::identity(n);
    let mut negative = false;
    for (&w, rate) in weights.iter().zip(rates) {
        if rate.dim() != n {
            return Err(Error::usage(format!(
                "rate matrix is {}x{}, expected {n}x{n}",
                rate.dim(),
                rate.dim()
            )));
        }
        if !w.is_finite() {
            return Err(Error::usage(format!("non-finite weight {w}")));
        }
        negative |= w < 0.0;
        for k in 0..n {
            for nu in 0..n {
                if k == nu {
                    continue;
                }
                let p = rate[(k, nu)];
                if !(p >= 0.0) {
                    return Err(Error::model(format!(
                        "production rate p[{k}][{nu}] = {p} is negative or not a number"
                    )));
                }
                if p == 0.0 {
                    continue;
                }
                // p[k][nu] is production of k from nu and destruction of nu into k.
                // Row k, production term: dt*w*p * x_a / s_a, a = delta(nu, k, w).
                let a = index_delta(nu, k, w);
                m[(k, a)] -= dt * w * p / denominators[a];
                // Row nu, destruction term: -dt*w*p * x_b / s_b, b = delta(nu, k, w).
                let b = index_delta(nu, k, w);
                m[(nu, b)] += dt * w * p / denominators[b];
            }
        }
    }
    let pm = PatankarMatrix { m };
    audit_assembly(&pm, negative);
    Ok(pm)
}

/// Solves `M x = rhs` by subtraction-free Gaussian elimination; the
/// result is positive and conserves `sum(rhs)` to a few ulps.
pub fn solve(matrix: &PatankarMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = matrix.size();
    if rhs.len() != n {
        return Err(Error::usage(format!(
            "right-hand side has length {}, expected {n}",
            rhs.len()
        )));
    }
    if let Some(k) = rhs.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::domain(format!(
            "right-hand side entry {k} is not positive: {}",
            rhs[k]
        )));
    }
    audit_solve();
    let x = lu_solve(matrix.matrix(), rhs)?;
    debug_assert!(
        residual_ok(matrix.matrix(), &x, rhs),
        "Patankar solve residual above 1e-12 (componentwise)"
    );
    Ok(x)
}

/// Convenience wrapper: assemble and solve against `rhs`.
pub fn patankar_solve(
    weights: &[f64],
    rates: &[&DenseMatrix],
    denominators: &[f64],
    dt: f64,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let m = assemble(weights, rates, denominators, dt)?;
    solve(&m, rhs)
}

/// Gaussian elimination in the Grassmann-Taksar-Heyman form. `M` has unit
/// column sums and non-positive off-diagonal entries, so each Schur
/// complement keeps non-positive off-diagonals and positive column sums
/// `c_j`; pivots are rebuilt as `c_k + sum |a_ik|` and every update adds
/// terms of one sign. No row exchanges are needed.
fn lu_solve(m: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.dim();
    let mut lu = m.clone();
    let mut x = rhs.to_vec();
    let mut colsum = vec![1.0; n];
    let mut pivots = vec![0.0; n];
    for k in 0..n {
        let pivot = colsum[k] + (k + 1..n).map(|i| -lu[(i, k)]).sum::<f64>();
        if !(pivot.is_finite() && pivot > 0.0) {
            return Err(Error::Solver(format!("pivot {pivot:e} in column {k} is not usable")));
        }
        pivots[k] = pivot;
        for row in k + 1..n {
            let factor = lu[(row, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in k + 1..n {
                if j != row {
                    lu[(row, j)] -= factor * lu[(k, j)];
                }
            }
            x[row] -= factor * x[k];
        }
        for j in k + 1..n {
            colsum[j] -= lu[(k, j)] * colsum[k] / pivot;
        }
    }
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|j| -lu[(row, j)] * x[j]).sum();
        x[row] = (x[row] + tail) / pivots[row];
    }
    Ok(x)
}

fn residual_ok(m: &DenseMatrix, x: &[f64], rhs: &[f64]) -> bool {
    let n = m.dim();
    (0..n).all(|i| {
        let (r, scale) = (0..n).fold((-rhs[i], rhs[i].abs()), |(r, s), j| {
            let t = m[(i, j)] * x[j];
            (r + t, s + t.abs())
        });
        r.abs() <= 1e-12 * scale
    })
}

/// Matrix exponential by scaling and squaring of the truncated Taylor series.
///
/// The series for `A / 2^s` (with `||A||_1 / 2^s <= 1/2`) is summed until the
/// next term drops below `tol` relative to the partial sum.
pub fn expm(a: &DenseMatrix, tol: f64) -> DenseMatrix {
    expm_impl(a, tol, false)
}

/// [`expm`] for generators with zero column sums, whose exponential has unit
/// column sums. The diagonal is re-derived from the off-diagonal entries
/// after the series and after every squaring, so the unit column sums hold
/// to rounding regardless of how many squarings are needed.
pub fn expm_conservative(a: &DenseMatrix, tol: f64) -> DenseMatrix {
    expm_impl(a, tol, true)
}

fn expm_impl(a: &DenseMatrix, tol: f64, unit_columns: bool) -> DenseMatrix {
    let n = a.dim();
    let norm = a.norm_one();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let b = a.scaled(0.5f64.powi(squarings));
    let mut sum = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    for k in 1..64 {
        term = term.matmul(&b).scaled(1.0 / k as f64);
        for (s, t) in sum.data.iter_mut().zip(&term.data) {
            *s += t;
        }
        if term.norm_one() <= tol * sum.norm_one() {
            break;
        }
    }
    let fix = |m: &mut DenseMatrix| {
        if unit_columns {
            for j in 0..n {
                let off: f64 = (0..n).filter(|&i| i != j).map(|i| m[(i, j)]).sum();
                m[(j, j)] = 1.0 - off;
            }
        }
    };
    fix(&mut sum);
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
        fix(&mut sum);
    }
    sum
}

/// Structural statistics gathered while an [`audited`] closure runs.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub assemblies: usize,
    pub solves: usize,
    /// Assemblies in which at least one weight was negative.
    pub index_function_assemblies: usize,
    pub min_diagonal: f64,
    pub max_off_diagonal: f64,
    pub max_column_sum_defect: f64,
}

impl Default for AuditReport {
    fn default() -> Self {
        AuditReport {
            assemblies: 0,
            solves: 0,
            index_function_assemblies: 0,
            min_diagonal: f64::INFINITY,
            max_off_diagonal: f64::NEG_INFINITY,
            max_column_sum_defect: 0.0,
        }
    }
}

impl AuditReport {
    /// True when every recorded matrix had the M-matrix sign pattern and
    /// column sums within `tol` of one.
    pub fn structure_ok(&self, tol: f64) -> bool {
        self.min_diagonal >= 1.0 && self.max_off_diagonal <= 0.0 && self.max_column_sum_defect <= tol
    }

    fn merge(&mut self, other: &AuditReport) {
        self.assemblies += other.assemblies;
        self.solves += other.solves;
        self.index_function_assemblies += other.index_function_assemblies;
        self.min_diagonal = self.min_diagonal.min(other.min_diagonal);
        self.max_off_diagonal = self.max_off_diagonal.max(other.max_off_diagonal);
        self.max_column_sum_defect = self.max_column_sum_defect.max(other.max_column_sum_defect);
    }
}

thread_local! {
    static AUDIT: RefCell<Option<AuditReport>> = const { RefCell::new(None) };
}

/// Runs `f` and reports every Patankar assembly and solve it performed on
/// the current thread. Audits nest: an outer audit also sees inner work.
pub fn audited<R>(f: impl FnOnce() -> R) -> (R, AuditReport) {
    let outer = AUDIT.with(|a| a.borrow_mut().replace(AuditReport::default()));
    let out = f();
    let report = AUDIT.with(|a| a.borrow_mut().take()).unwrap_or_default();
    if let Some(mut outer) = outer {
        outer.merge(&report);
        AUDIT.with(|a| *a.borrow_mut() = Some(outer));
    }
    (out, report)
}

fn audit_assembly(m: &PatankarMatrix, negative: bool) {
    AUDIT.with(|a| {
        if let Some(r) = a.borrow_mut().as_mut() {
            r.assemblies += 1;
            r.index_function_assemblies += usize::from(negative);
            if m.size() > 0 {
                r.min_diagonal = r.min_diagonal.min(m.min_diagonal());
                r.max_off_diagonal = r.max_off_diagonal.max(m.max_off_diagonal());
            }
            r.max_column_sum_defect = r.max_column_sum_defect.max(m.column_sum_defect());
        }
    });
}

fn audit_solve() {
    AUDIT.with(|a| {
        if let Some(r) = a.borrow_mut().as_mut() {
            r.solves += 1;
        }
    });
}
