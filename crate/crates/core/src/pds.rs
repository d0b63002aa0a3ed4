//! Conservative production-destruction systems.
//!
//! A system is described only by its production rates `p[k][nu](y) >= 0`
//! (production of species `k` from species `nu`). Destruction is the
//! transpose, `d[k][nu] = p[nu][k]`, so every system built here is
//! conservative.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::analysis::exact_linear;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

type RateFn = dyn Fn(&[f64]) -> DenseMatrix + Send + Sync;
type ExactFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// Tolerance for the Metzler / zero-column-sum checks on linear systems,
/// relative to the column's absolute sum.
const LINEAR_MODEL_TOL: f64 = 1e-14;

/// A conservative production-destruction system.
#[derive(Clone)]
pub struct PdSystem {
    name: String,
    dim: usize,
    production: Arc<RateFn>,
    exact: Option<Arc<ExactFn>>,
    initial: Vec<f64>,
    matrix: Option<DenseMatrix>,
}

impl fmt::Debug for PdSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("initial", &self.initial)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl PdSystem {
    /// Wraps an arbitrary production-rate callback.
    ///
    /// The callback is trusted to return an `N x N` matrix with non-negative
    /// entries for positive input; diagonal entries are ignored.
    pub fn new<F>(name: impl Into<String>, initial: Vec<f64>, production: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> DenseMatrix + Send + Sync + 'static,
    {
        let dim = initial.len();
        if dim == 0 {
            return Err(Error::usage("a system needs at least one species"));
        }
        check_positive(&initial)?;
        Ok(PdSystem {
            name: name.into(),
            dim,
            production: Arc::new(production),
            exact: None,
            initial,
            matrix: None,
        })
    }

    /// Attaches an exact solution `t -> y(t)` for the canonical initial state.
    pub fn with_exact<F>(mut self, exact: F) -> Self
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Canonical initial state.
    pub fn initial_state(&self) -> &[f64] {
        &self.initial
    }

    /// System matrix for linear systems built from a matrix.
    pub fn linear_matrix(&self) -> Option<&DenseMatrix> {
        self.matrix.as_ref()
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Exact state at time `t` from the canonical initial state, if known.
    pub fn exact(&self, t: f64) -> Option<Vec<f64>> {
        self.exact.as_ref().map(|f| f(t))
    }

    /// Exact state at `t` from an arbitrary initial state. Only linear
    /// systems support this.
    pub fn exact_from(&self, y0: &[f64], t: f64) -> Option<Result<Vec<f64>>> {
        self.matrix.as_ref().map(|a| exact_linear(a, y0, t))
    }

    /// Production matrix at a positive state, without validation.
    pub fn rates_unchecked(&self, y: &[f64]) -> DenseMatrix {
        (self.production)(y)
    }

    /// Production matrix `p[k][nu](y)` at a positive state.
    pub fn production(&self, y: &[f64]) -> Result<DenseMatrix> {
        self.check_state(y)?;
        let p = (self.production)(y);
        if p.dim() != self.dim {
            return Err(Error::model(format!(
                "production callback returned a {}x{} matrix for a system of {} species",
                p.dim(),
                p.dim(),
                self.dim
            )));
        }
        Ok(p)
    }

    /// Right-hand side `f_k = sum_nu (p[k][nu] - p[nu][k])`.
    pub fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(rhs_from_rates(&self.production(y)?))
    }

    /// Validates length and strict positivity of a state.
    pub fn check_state(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::usage(format!(
                "state has {} entries, system {} has {} species",
                y.len(),
                self.name,
                self.dim
            )));
        }
        check_positive(y)
    }
}

pub(crate) fn check_positive(y: &[f64]) -> Result<()> {
    match y.iter().position(|&v| !(v > 0.0)) {
        Some(k) => Err(Error::domain(format!(
            "state entry {k} is not strictly positive: {}",
            y[k]
        ))),
        None => Ok(()),
    }
}

/// `f_k = sum_nu (p[k][nu] - p[nu][k])` for a given production matrix.
pub fn rhs_from_rates(p: &DenseMatrix) -> Vec<f64> {
    let n = p.dim();
    (0..n)
        .map(|k| (0..n).filter(|&nu| nu != k).map(|nu| p[(k, nu)] - p[(nu, k)]).sum())
        .collect()
}

/// Sum of all entries.
pub fn mass(y: &[f64]) -> f64 {
    y.iter().sum()
}

/// The two-species linear problem `y' = [[-5, 1], [5, -1]] y`, `y(0) = (0.99, 1)`.
pub fn builtin_linear_test() -> PdSystem {
    let a = DenseMatrix::from_rows(&[vec![-5.0, 1.0], vec![5.0, -1.0]])
        .expect("2x2 matrix");
    let mut sys = linear_pds_from_matrix(&a, vec![0.99, 1.0]).expect("valid linear system");
    sys.name = "linear-test".into();
    sys
}

/// Three-species nonlinear chain with
/// `p[1][0] = y0*y1/(y0+1)` and `p[2][1] = 0.3*y1`, `y(0) = (9.98, 0.01, 0.01)`.
pub fn builtin_nonlinear_test() -> PdSystem {
    PdSystem::new("nonlinear-test", vec![9.98, 0.01, 0.01], |y: &[f64]| {
        let mut p = DenseMatrix::zeros(3);
        p[(1, 0)] = y[0] * y[1] / (y[0] + 1.0);
        p[(2, 1)] = 0.3 * y[1];
        p
    })
    .expect("valid nonlinear system")
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 2] = ["linear-test", "nonlinear-test"];

pub fn builtin(name: &str) -> Option<PdSystem> {
    match name {
        "linear-test" => Some(builtin_linear_test()),
        "nonlinear-test" => Some(builtin_nonlinear_test()),
        _ => None,
    }
}

/// Conservative linear system `y' = A y` with `p[k][nu](y) = A[k][nu] * y[nu]`.
///
/// `A` must be Metzler (off-diagonal entries >= 0) with zero column sums.
pub fn linear_pds_from_matrix(a: &DenseMatrix, initial: Vec<f64>) -> Result<PdSystem> {
    let n = a.dim();
    if initial.len() != n {
        return Err(Error::usage(format!(
            "initial state has {} entries, matrix is {n}x{n}",
            initial.len()
        )));
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::model("matrix has non-finite entries"));
    }
    for k in 0..n {
        for nu in 0..n {
            if k != nu && a[(k, nu)] < -LINEAR_MODEL_TOL {
                return Err(Error::model(format!(
                    "off-diagonal entry A[{k}][{nu}] = {} is negative",
                    a[(k, nu)]
                )));
            }
        }
    }
    for (j, s) in a.column_sums().into_iter().enumerate() {
        let scale = (0..n).map(|k| a[(k, j)].abs()).sum::<f64>().max(1.0);
        if s.abs() > LINEAR_MODEL_TOL * scale {
            return Err(Error::model(format!("column {j} of A sums to {s}, expected 0")));
        }
    }
    let rates = a.clone();
    let exact_a = a.clone();
    let y0 = initial.clone();
    let mut sys = PdSystem::new("linear", initial, move |y: &[f64]| {
        let mut p = DenseMatrix::zeros(n);
        for k in 0..n {
            for nu in 0..n {
                if k != nu {
                    p[(k, nu)] = rates[(k, nu)].max(0.0) * y[nu];
                }
            }
        }
        p
    })?
    .with_exact(move |t| exact_linear(&exact_a, &y0, t).expect("finite linear system"));
    sys.matrix = Some(a.clone());
    Ok(sys)
}

/// Parses a linear system from text: first line `N`, then `N` rows of `N`
/// reals (the matrix), then one row of `N` initial values.
pub fn parse_matrix_text(text: &str) -> Result<PdSystem> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let n: usize = lines
        .next()
        .ok_or_else(|| Error::usage("matrix file is empty"))?
        .parse()
        .map_err(|e| Error::usage(format!("first line must be the dimension N: {e}")))?;
    if n == 0 {
        return Err(Error::usage("dimension N must be positive"));
    }
    let mut parse_row = |what: &str| -> Result<Vec<f64>> {
        let line = lines
            .next()
            .ok_or_else(|| Error::usage(format!("matrix file ends before {what}")))?;
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| Error::usage(format!("bad number {tok:?} in {what}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != n {
            return Err(Error::usage(format!(
                "{what} has {} entries, expected {n}",
                row.len()
            )));
        }
        Ok(row)
    };
    let rows = (0..n)
        .map(|i| parse_row(&format!("matrix row {}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    let initial = parse_row("the initial-state row")?;
    let a = DenseMatrix::from_rows(&rows)?;
    linear_pds_from_matrix(&a, initial)
}

pub fn load_matrix_file(path: &Path) -> Result<PdSystem> {
    let text = std::fs::read_to_string(path)?;
    let mut sys = parse_matrix_text(&text)?;
    sys.name = path.display().to_string();
    Ok(sys)
}
