//! Dense output for MPRK steps.
//!
//! All formulae evaluate a [`StepRecord`] at `t_n + theta * dt` without
//! recomputing stages:
//!
//! * [`do1`]: the convex combination `(1 - theta) y_n + theta y_next`.
//! * [`do2_explicit`]: quadratic weights plugged into the explicit Patankar
//!   sum. Conservative, but it can go negative.
//! * [`do2_implicit`]: quadratic weights in a linearly implicit Patankar
//!   system whose denominator is the first-order formula applied to sigma.
//! * [`do3_implicit`]: cubic weights of the classical RK4 tableau, with the
//!   denominator taken from [`do2_implicit`] on the nested third-order step.
//!   Some cubic weights are negative for interior `theta`; the assembler's
//!   index function keeps the system an M-matrix.

use std::fmt;
use std::str::FromStr;

use num_traits::Num;

use crate::error::{Error, Result};
use crate::linalg::patankar_solve;
use crate::schemes::{Scheme, StepRecord};

/// Polynomial with coefficients stored lowest degree first.
#[derive(Clone, Debug)]
pub struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Num + Clone> Poly<T> {
    pub fn new(coeffs: Vec<T>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    /// The monomial `scale * theta^degree`.
    pub fn monomial(scale: T, degree: usize) -> Self {
        let mut coeffs = vec![T::zero(); degree + 1];
        coeffs[degree] = scale;
        Poly::new(coeffs)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Horner evaluation.
    pub fn eval(&self, x: T) -> T {
        self.coeffs
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn scale(&self, s: T) -> Self {
        Poly::new(self.coeffs.iter().map(|c| c.clone() * s.clone()).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[T], i: usize| v.get(i).cloned().unwrap_or_else(T::zero);
        Poly::new(
            (0..n)
                .map(|i| get(&self.coeffs, i) + get(&other.coeffs, i))
                .collect(),
        )
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }
}

impl<T: Num + Clone> PartialEq for Poly<T> {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

/// Dense-output weight polynomials `bbar_j(theta)`, one per stage.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseWeightPolys<T = f64>
where
    T: Num + Clone,
{
    pub polys: Vec<Poly<T>>,
    pub order: u32,
}

impl<T: Num + Clone> DenseWeightPolys<T> {
    pub fn eval(&self, theta: T) -> Vec<T> {
        self.polys.iter().map(|p| p.eval(theta.clone())).collect()
    }

    pub fn stages(&self) -> usize {
        self.polys.len()
    }

    /// `sum_j bbar_j(theta) * v_j` as a polynomial.
    pub fn weighted_sum(&self, v: &[T]) -> Poly<T> {
        self.polys
            .iter()
            .zip(v)
            .fold(Poly::zero(), |acc, (p, x)| acc.add(&p.scale(x.clone())))
    }
}

fn int<T: Num>(n: i32) -> T {
    let mut out = T::zero();
    for _ in 0..n.unsigned_abs() {
        out = out + T::one();
    }
    if n < 0 {
        T::zero() - out
    } else {
        out
    }
}

/// `bbar_j(theta) = theta * b_j`: linear interpolation between `y_n` and `y_next`.
pub fn weights_order1<T: Num + Clone>(b: &[T]) -> DenseWeightPolys<T> {
    DenseWeightPolys {
        polys: b.iter().map(|bj| Poly::monomial(bj.clone(), 1)).collect(),
        order: 1,
    }
}

/// `bbar_1 = theta - (1 - b_1) theta^2`, `bbar_j = b_j theta^2` for `j >= 2`.
pub fn weights_order2<T: Num + Clone>(b: &[T]) -> DenseWeightPolys<T> {
    let polys = b
        .iter()
        .enumerate()
        .map(|(j, bj)| {
            if j == 0 {
                Poly::new(vec![T::zero(), T::one(), bj.clone() - T::one()])
            } else {
                Poly::monomial(bj.clone(), 2)
            }
        })
        .collect();
    DenseWeightPolys { polys, order: 2 }
}

/// Cubic continuous extension of a four-stage, fourth-order tableau with `c_1 = 0`.
fn cubic_weights<T: Num + Clone>(b: &[T], c: &[T]) -> DenseWeightPolys<T> {
    let polys = b
        .iter()
        .zip(c)
        .enumerate()
        .map(|(i, (bi, ci))| {
            if i == 0 {
                Poly::new(vec![
                    T::zero(),
                    T::one(),
                    int::<T>(3) * (int::<T>(3) * bi.clone() - T::one()),
                    int::<T>(2) * (T::one() - int::<T>(4) * bi.clone()),
                ])
            } else {
                Poly::new(vec![
                    T::zero(),
                    T::zero(),
                    int::<T>(3) * (int::<T>(3) - int::<T>(4) * ci.clone()) * bi.clone(),
                    int::<T>(4) * (int::<T>(3) * ci.clone() - int::<T>(2)) * bi.clone(),
                ])
            }
        })
        .collect();
    DenseWeightPolys { polys, order: 3 }
}

/// Third-order weights of the classical RK4 tableau:
/// `bbar_1 = 2/3 t^3 - 3/2 t^2 + t`, `bbar_2 = bbar_3 = -2/3 t^3 + t^2`,
/// `bbar_4 = 2/3 t^3 - 1/2 t^2`.
pub fn weights_order3_rk4<T: Num + Clone>() -> DenseWeightPolys<T> {
    let (one, two, three, six) = (T::one(), int::<T>(2), int::<T>(3), int::<T>(6));
    let b = [
        one.clone() / six.clone(),
        one.clone() / three.clone(),
        one.clone() / three,
        one.clone() / six,
    ];
    let c = [T::zero(), one.clone() / two.clone(), one.clone() / two, one];
    cubic_weights(&b, &c)
}

/// A point of dense output.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub t: f64,
    pub values: Vec<f64>,
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::usage(format!("theta must lie in [0, 1], got {theta}")));
    }
    Ok(())
}

fn at(record: &StepRecord, theta: f64, values: Vec<f64>) -> StateVector {
    StateVector {
        t: record.t + theta * record.dt,
        values,
    }
}

/// First-order formula: `(1 - theta) y_n + theta y_next`.
pub fn do1(record: &StepRecord, theta: f64) -> Result<StateVector> {
    check_theta(theta)?;
    let values = record
        .y_n
        .iter()
        .zip(&record.y_next)
        .map(|(a, b)| (1.0 - theta) * a + theta * b)
        .collect();
    Ok(at(record, theta, values))
}

/// Explicit quadratic formula. Conservative but not positivity preserving.
pub fn do2_explicit(record: &StepRecord, theta: f64) -> Result<StateVector> {
    check_theta(theta)?;
    let tab = record.tableau();
    let w = weights_order2(tab.b()).eval(theta);
    let n = record.y_n.len();
    let ratio: Vec<f64> = record
        .y_next
        .iter()
        .zip(&record.sigma)
        .map(|(y, s)| y / s)
        .collect();
    let mut values = record.y_n.clone();
    for (wj, p) in w.iter().zip(&record.stage_rates) {
        for k in 0..n {
            let flux: f64 = (0..n)
                .filter(|&nu| nu != k)
                .map(|nu| p[(k, nu)] * ratio[nu] - p[(nu, k)] * ratio[k])
                .sum();
            values[k] += record.dt * wj * flux;
        }
    }
    Ok(at(record, theta, values))
}

/// Linearly implicit quadratic formula for MPRK43 steps. One linear solve.
pub fn do2_implicit(record: &StepRecord, theta: f64) -> Result<StateVector> {
    check_theta(theta)?;
    let Scheme::Mprk43(coeffs) = &record.scheme else {
        return Err(Error::usage(format!(
            "do2 requires an mprk43 step, got {}",
            record.scheme
        )));
    };
    let w = weights_order2(coeffs.tableau.b()).eval(theta);
    let denominators: Vec<f64> = record
        .y_n
        .iter()
        .zip(&record.sigma)
        .map(|(y, s)| (1.0 - theta) * y + theta * s)
        .collect();
    let values = patankar_solve(&w, &record.rate_refs(), &denominators, record.dt, &record.y_n)?;
    Ok(at(record, theta, values))
}

/// Linearly implicit cubic formula for fourth-order steps. Two linear solves.
pub fn do3_implicit(record: &StepRecord, theta: f64) -> Result<StateVector> {
    check_theta(theta)?;
    let (Scheme::Mprk4, Some(nested)) = (&record.scheme, record.nested.as_deref()) else {
        return Err(Error::usage(format!(
            "do3 requires an mprk4 step, got {}",
            record.scheme
        )));
    };
    let denominators = do2_implicit(nested, theta)?.values;
    let w = weights_order3_rk4::<f64>().eval(theta);
    let values = patankar_solve(&w, &record.rate_refs(), &denominators, record.dt, &record.y_n)?;
    Ok(at(record, theta, values))
}

/// Dense-output selector: `do1`, `do2`, `do2-explicit` or `do3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DenseFormula {
    Do1,
    Do2Implicit,
    Do2Explicit,
    Do3Implicit,
}

pub const DENSE_SELECTORS: &str = "do1, do2, do2-explicit, do3";

impl DenseFormula {
    pub fn evaluate(self, record: &StepRecord, theta: f64) -> Result<StateVector> {
        match self {
            DenseFormula::Do1 => do1(record, theta),
            DenseFormula::Do2Implicit => do2_implicit(record, theta),
            DenseFormula::Do2Explicit => do2_explicit(record, theta),
            DenseFormula::Do3Implicit => do3_implicit(record, theta),
        }
    }

    /// Whether records of `scheme` can be evaluated with this formula.
    pub fn supports(self, scheme: &Scheme) -> bool {
        match self {
            DenseFormula::Do1 | DenseFormula::Do2Explicit => true,
            DenseFormula::Do2Implicit => matches!(scheme, Scheme::Mprk43(_)),
            DenseFormula::Do3Implicit => matches!(scheme, Scheme::Mprk4),
        }
    }

    pub fn check_pairing(self, scheme: &Scheme) -> Result<()> {
        if self.supports(scheme) {
            Ok(())
        } else {
            Err(Error::usage(format!(
                "dense formula {self} cannot be paired with scheme {scheme} \
                 (do2 requires mprk43:*, do3 requires mprk4)"
            )))
        }
    }

    /// Number of linear solves one evaluation performs.
    pub fn solves_per_eval(self) -> usize {
        match self {
            DenseFormula::Do1 | DenseFormula::Do2Explicit => 0,
            DenseFormula::Do2Implicit => 1,
            DenseFormula::Do3Implicit => 2,
        }
    }

    /// Whether the formula is guaranteed positive for every step size.
    pub fn positive(self) -> bool {
        !matches!(self, DenseFormula::Do2Explicit)
    }
}

impl fmt::Display for DenseFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenseFormula::Do1 => "do1",
            DenseFormula::Do2Implicit => "do2",
            DenseFormula::Do2Explicit => "do2-explicit",
            DenseFormula::Do3Implicit => "do3",
        })
    }
}

impl FromStr for DenseFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "do1" => Ok(DenseFormula::Do1),
            "do2" => Ok(DenseFormula::Do2Implicit),
            "do2-explicit" => Ok(DenseFormula::Do2Explicit),
            "do3" => Ok(DenseFormula::Do3Implicit),
            other => Err(Error::usage(format!(
                "unknown dense formula {other:?}; valid selectors: {DENSE_SELECTORS}"
            ))),
        }
    }
}
