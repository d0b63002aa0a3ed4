//! Modified Patankar-Runge-Kutta steppers of orders 1 to 4.
//!
//! Every stepper returns a [`StepRecord`] holding the stages, the rates
//! evaluated at them, the Patankar-weight denominators and the update, which
//! is all the dense-output formulae need.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{patankar_solve, DenseMatrix};
use crate::pds::{check_positive, PdSystem};

const TABLEAU_TOL: f64 = 1e-14;

/// Explicit Runge-Kutta coefficients with a non-negative Butcher array.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl ButcherTableau {
    /// Builds a tableau from its strictly lower-triangular `A` and weights
    /// `b`; the nodes are the row sums of `A`.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(Error::usage("tableau A must be s x s with s = len(b) >= 1"));
        }
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if j >= i && v != 0.0 {
                    return Err(Error::usage(format!(
                        "tableau entry a[{i}][{j}] = {v} breaks strict lower triangularity"
                    )));
                }
                if !(v >= 0.0) {
                    return Err(Error::usage(format!("tableau entry a[{i}][{j}] = {v} is negative")));
                }
            }
        }
        if let Some(j) = b.iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::usage(format!("tableau weight b[{j}] = {} is negative", b[j])));
        }
        let total: f64 = b.iter().sum();
        if (total - 1.0).abs() > TABLEAU_TOL {
            return Err(Error::usage(format!("tableau weights sum to {total}, expected 1")));
        }
        let c = a.iter().map(|row| row.iter().sum()).collect();
        Ok(ButcherTableau { a, b, c })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn explicit_euler() -> Self {
        ButcherTableau::new(vec![vec![0.0]], vec![1.0]).expect("valid tableau")
    }

    pub fn classical_rk4() -> Self {
        ButcherTableau::new(
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        )
        .expect("valid tableau")
    }
}

/// Coefficients of the third-order MPRK43(alpha, beta) family.
#[derive(Clone, Debug, PartialEq)]
pub struct Mprk43Coefficients {
    pub alpha: f64,
    pub beta: f64,
    pub tableau: ButcherTableau,
    /// Exponent of the third-stage denominator, `3 a21 (a31 + a32) b3`.
    pub p_exp: f64,
    /// Exponent of the sigma-system denominator, `a21`.
    pub q_exp: f64,
    pub beta1: f64,
    pub beta2: f64,
}

/// Three-stage, third-order tableau with nodes `c2 = alpha`, `c3 = beta`,
/// plus the exponents and sigma weights of the matching MPRK43 scheme.
pub fn mprk43_coeffs(alpha: f64, beta: f64) -> Result<Mprk43Coefficients> {
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::usage("MPRK43 parameters must be finite"));
    }
    // The two order conditions on (b2, b3) are a Vandermonde system in the nodes.
    let det = alpha * beta * (beta - alpha);
    if det.abs() < 1e-12 {
        return Err(Error::usage(format!(
            "MPRK43({alpha}, {beta}): nodes must be distinct and nonzero"
        )));
    }
    let b2 = (3.0 * beta - 2.0) / (6.0 * alpha * (beta - alpha));
    let b3 = (2.0 - 3.0 * alpha) / (6.0 * beta * (beta - alpha));
    if b3.abs() < 1e-12 {
        return Err(Error::usage(format!(
            "MPRK43({alpha}, {beta}): b3 vanishes, a32 is undetermined"
        )));
    }
    let b1 = 1.0 - b2 - b3;
    let a32 = 1.0 / (6.0 * b3 * alpha);
    let a31 = beta - a32;
    let clamp = |v: f64, name: &str| -> Result<f64> {
        if v < -TABLEAU_TOL {
            Err(Error::usage(format!(
                "MPRK43({alpha}, {beta}) has negative coefficient {name} = {v}"
            )))
        } else {
            Ok(v.max(0.0))
        }
    };
    let (b1, b2, b3) = (clamp(b1, "b1")?, clamp(b2, "b2")?, clamp(b3, "b3")?);
    let (a31, a32) = (clamp(a31, "a31")?, clamp(a32, "a32")?);
    let tableau = ButcherTableau::new(
        vec![
            vec![0.0, 0.0, 0.0],
            vec![alpha, 0.0, 0.0],
            vec![a31, a32, 0.0],
        ],
        vec![b1, b2, b3],
    )?;
    let p_exp = 3.0 * alpha * (a31 + a32) * b3;
    let q_exp = alpha;
    if !(p_exp > 0.0) || !(q_exp > 0.0) {
        return Err(Error::usage(format!(
            "MPRK43({alpha}, {beta}): exponents p = {p_exp}, q = {q_exp} must be positive"
        )));
    }
    let beta2 = 1.0 / (2.0 * alpha);
    Ok(Mprk43Coefficients {
        alpha,
        beta,
        tableau,
        p_exp,
        q_exp,
        beta1: 1.0 - beta2,
        beta2,
    })
}

/// Scheme selector: `mpe`, `mprk22:<alpha>`, `mprk43:<alpha>,<beta>` or `mprk4`.
#[derive(Clone, Debug, PartialEq)]
pub enum Scheme {
    Mpe,
    Mprk22 { alpha: f64 },
    Mprk43(Mprk43Coefficients),
    Mprk4,
}

pub const SCHEME_SELECTORS: &str = "mpe, mprk22:<alpha>, mprk43:<alpha>,<beta>, mprk4";

impl Scheme {
    pub fn mprk22(alpha: f64) -> Result<Self> {
        check_mprk22_alpha(alpha)?;
        Ok(Scheme::Mprk22 { alpha })
    }

    pub fn mprk43(alpha: f64, beta: f64) -> Result<Self> {
        Ok(Scheme::Mprk43(mprk43_coeffs(alpha, beta)?))
    }

    /// Nominal convergence order.
    pub fn order(&self) -> u32 {
        match self {
            Scheme::Mpe => 1,
            Scheme::Mprk22 { .. } => 2,
            Scheme::Mprk43(_) => 3,
            Scheme::Mprk4 => 4,
        }
    }

    /// Underlying Runge-Kutta tableau.
    pub fn tableau(&self) -> ButcherTableau {
        match self {
            Scheme::Mpe => ButcherTableau::explicit_euler(),
            Scheme::Mprk22 { alpha } => {
                let w = 1.0 / (2.0 * alpha);
                ButcherTableau::new(vec![vec![0.0, 0.0], vec![*alpha, 0.0]], vec![1.0 - w, w])
                    .expect("alpha validated at construction")
            }
            Scheme::Mprk43(c) => c.tableau.clone(),
            Scheme::Mprk4 => ButcherTableau::classical_rk4(),
        }
    }

    pub fn step(&self, pds: &PdSystem, y_n: &[f64], dt: f64) -> Result<StepRecord> {
        match self {
            Scheme::Mpe => mpe_step(pds, y_n, dt),
            Scheme::Mprk22 { alpha } => mprk22_step(pds, y_n, dt, *alpha),
            Scheme::Mprk43(c) => mprk43_step(pds, y_n, dt, c),
            Scheme::Mprk4 => mprk4_step(pds, y_n, dt),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Mpe => write!(f, "mpe"),
            Scheme::Mprk22 { alpha } => write!(f, "mprk22:{alpha}"),
            Scheme::Mprk43(c) => write!(f, "mprk43:{},{}", c.alpha, c.beta),
            Scheme::Mprk4 => write!(f, "mprk4"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::usage(format!("unknown scheme {s:?}; valid selectors: {SCHEME_SELECTORS}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (s.trim(), None),
        };
        match (name, args) {
            ("mpe", None) => Ok(Scheme::Mpe),
            ("mprk4", None) => Ok(Scheme::Mprk4),
            ("mprk22", Some(a)) => Scheme::mprk22(num(a)?),
            ("mprk43", Some(a)) => {
                let (alpha, beta) = a.split_once(',').ok_or_else(bad)?;
                Scheme::mprk43(num(alpha)?, num(beta)?)
            }
            _ => Err(bad()),
        }
    }
}

/// Everything one MPRK step produced.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub scheme: Scheme,
    /// Start time of the step.
    pub t: f64,
    pub dt: f64,
    pub y_n: Vec<f64>,
    /// Stage vectors; the first is always `y_n`.
    pub stages: Vec<Vec<f64>>,
    /// Production matrices evaluated at the stages.
    pub stage_rates: Vec<DenseMatrix>,
    /// Stage denominators; `pi[0]` is `y_n` (the first stage needs no solve).
    pub pi: Vec<Vec<f64>>,
    /// Denominator of the final update.
    pub sigma: Vec<f64>,
    pub y_next: Vec<f64>,
    /// Full MPRK43(1, 0.5) record over the same step (fourth-order steps only).
    pub nested: Option<Box<StepRecord>>,
    /// Linear solves performed by this step, including nested ones.
    pub linear_solves: usize,
}

impl StepRecord {
    pub fn t_next(&self) -> f64 {
        self.t + self.dt
    }

    pub fn tableau(&self) -> ButcherTableau {
        self.scheme.tableau()
    }

    pub fn rate_refs(&self) -> Vec<&DenseMatrix> {
        self.stage_rates.iter().collect()
    }
}

fn check_step_inputs(pds: &PdSystem, y_n: &[f64], dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::usage(format!("step size must be positive and finite, got {dt}")));
    }
    pds.check_state(y_n)
}

fn check_mprk22_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.5) || !alpha.is_finite() {
        return Err(Error::usage(format!(
            "MPRK22 requires alpha >= 1/2, got {alpha}"
        )));
    }
    Ok(())
}

/// Componentwise `a^e * b^(1-e)` for strictly positive `a`, `b`.
pub(crate) fn weighted_geometric(a: &[f64], b: &[f64], e: f64) -> Result<Vec<f64>> {
    check_positive(a)?;
    check_positive(b)?;
    Ok(if e == 1.0 {
        a.to_vec()
    } else if e == 0.0 {
        b.to_vec()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (e * x.ln() + (1.0 - e) * y.ln()).exp())
            .collect()
    })
}

/// Modified Patankar-Euler step.
pub fn mpe_step(pds: &PdSystem, y_n: &[f64], dt: f64) -> Result<StepRecord> {
    check_step_inputs(pds, y_n, dt)?;
    let p1 = pds.production(y_n)?;
    let y_next = patankar_solve(&[1.0], &[&p1], y_n, dt, y_n)?;
    Ok(StepRecord {
        scheme: Scheme::Mpe,
        t: 0.0,
        dt,
        y_n: y_n.to_vec(),
        stages: vec![y_n.to_vec()],
        stage_rates: vec![p1],
        pi: vec![y_n.to_vec()],
        sigma: y_n.to_vec(),
        y_next,
        nested: None,
        linear_solves: 1,
    })
}

/// Second-order MPRK22(alpha) step.
pub fn mprk22_step(pds: &PdSystem, y_n: &[f64], dt: f64, alpha: f64) -> Result<StepRecord> {
    check_mprk22_alpha(alpha)?;
    check_step_inputs(pds, y_n, dt)?;
    let p1 = pds.production(y_n)?;
    let y2 = patankar_solve(&[alpha], &[&p1], y_n, dt, y_n)?;
    let p2 = pds.production(&y2)?;
    let sigma = weighted_geometric(&y2, y_n, 1.0 / alpha)?;
    let w2 = 1.0 / (2.0 * alpha);
    let y_next = patankar_solve(&[1.0 - w2, w2], &[&p1, &p2], &sigma, dt, y_n)?;
    Ok(StepRecord {
        scheme: Scheme::Mprk22 { alpha },
        t: 0.0,
        dt,
        y_n: y_n.to_vec(),
        stages: vec![y_n.to_vec(), y2],
        stage_rates: vec![p1, p2],
        pi: vec![y_n.to_vec(), y_n.to_vec()],
        sigma,
        y_next,
        nested: None,
        linear_solves: 2,
    })
}

/// Stage-2 solve plus the second-order sigma system of MPRK43, over step `h`.
/// Returns `(y2, p2, sigma)`.
fn mprk43_embedded(
    pds: &PdSystem,
    y_n: &[f64],
    p1: &DenseMatrix,
    h: f64,
    c: &Mprk43Coefficients,
) -> Result<(Vec<f64>, DenseMatrix, Vec<f64>)> {
    let y2 = patankar_solve(&[c.alpha], &[p1], y_n, h, y_n)?;
    let p2 = pds.production(&y2)?;
    let den = weighted_geometric(&y2, y_n, 1.0 / c.q_exp)?;
    let sigma = patankar_solve(&[c.beta1, c.beta2], &[p1, &p2], &den, h, y_n)?;
    Ok((y2, p2, sigma))
}

/// Third-order MPRK43(alpha, beta) step: four linear solves.
pub fn mprk43_step(
    pds: &PdSystem,
    y_n: &[f64],
    dt: f64,
    coeffs: &Mprk43Coefficients,
) -> Result<StepRecord> {
    check_step_inputs(pds, y_n, dt)?;
    let tab = &coeffs.tableau;
    let p1 = pds.production(y_n)?;
    let (y2, p2, sigma) = mprk43_embedded(pds, y_n, &p1, dt, coeffs)?;
    let pi3 = weighted_geometric(&y2, y_n, 1.0 / coeffs.p_exp)?;
    let y3 = patankar_solve(&[tab.a(2, 0), tab.a(2, 1)], &[&p1, &p2], &pi3, dt, y_n)?;
    let p3 = pds.production(&y3)?;
    let y_next = patankar_solve(tab.b(), &[&p1, &p2, &p3], &sigma, dt, y_n)?;
    Ok(StepRecord {
        scheme: Scheme::Mprk43(coeffs.clone()),
        t: 0.0,
        dt,
        y_n: y_n.to_vec(),
        stages: vec![y_n.to_vec(), y2, y3],
        stage_rates: vec![p1, p2, p3],
        pi: vec![y_n.to_vec(), y_n.to_vec(), pi3],
        sigma,
        y_next,
        nested: None,
        linear_solves: 4,
    })
}

/// Fourth-order MPRK step on the classical RK4 tableau: ten linear solves.
///
/// `sigma` is the MPRK43(1, 0.5) update over `dt`. The stage denominators
/// come from the second-order MPRK43 embedding run over `c_i * dt`: one run
/// over `dt/2` serves stages 2 and 3, and the embedding inside the `dt`
/// step serves stage 4.
pub fn mprk4_step(pds: &PdSystem, y_n: &[f64], dt: f64) -> Result<StepRecord> {
    check_step_inputs(pds, y_n, dt)?;
    let gen = mprk43_coeffs(1.0, 0.5)?;
    let nested = mprk43_step(pds, y_n, dt, &gen)?;
    let p1 = nested.stage_rates[0].clone();

    let (_, _, pi_half) = mprk43_embedded(pds, y_n, &p1, 0.5 * dt, &gen)?;
    let pi4 = nested.sigma.clone();

    let y2 = patankar_solve(&[0.5], &[&p1], &pi_half, dt, y_n)?;
    let p2 = pds.production(&y2)?;
    let y3 = patankar_solve(&[0.5], &[&p2], &pi_half, dt, y_n)?;
    let p3 = pds.production(&y3)?;
    let y4 = patankar_solve(&[1.0], &[&p3], &pi4, dt, y_n)?;
    let p4 = pds.production(&y4)?;

    let sigma = nested.y_next.clone();
    let b = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
    let y_next = patankar_solve(&b, &[&p1, &p2, &p3, &p4], &sigma, dt, y_n)?;
    let linear_solves = nested.linear_solves + 2 + 3 + 1;
    Ok(StepRecord {
        scheme: Scheme::Mprk4,
        t: 0.0,
        dt,
        y_n: y_n.to_vec(),
        stages: vec![y_n.to_vec(), y2, y3, y4],
        stage_rates: vec![p1, p2, p3, p4],
        pi: vec![y_n.to_vec(), pi_half.clone(), pi_half, pi4],
        sigma,
        y_next,
        nested: Some(Box::new(nested)),
        linear_solves,
    })
}

/// Integrates from `t = 0` to `t_end` with constant step `dt`; the last
/// step is shortened to land exactly on `t_end`.
pub fn integrate(
    scheme: &Scheme,
    pds: &PdSystem,
    y0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Vec<StepRecord>> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::usage(format!("t_end must be positive and finite, got {t_end}")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::usage(format!("dt must be positive and finite, got {dt}")));
    }
    pds.check_state(y0)?;
    let steps = step_sizes(t_end, dt);
    let mut records = Vec::with_capacity(steps.len());
    let mut y = y0.to_vec();
    let mut t = 0.0;
    for (index, h) in steps.into_iter().enumerate() {
        let mut rec = scheme.step(pds, &y, h).map_err(|e| match e {
            Error::Domain(reason) | Error::Solver(reason) => Error::Integration { step: index, reason },
            other => other,
        })?;
        if rec.y_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                step: index,
                reason: "non-finite state".into(),
            });
        }
        rec.t = t;
        if let Some(nested) = rec.nested.as_mut() {
            nested.t = t;
        }
        t += h;
        y.clone_from(&rec.y_next);
        records.push(rec);
    }
    Ok(records)
}

/// Step sequence covering `[0, t_end]`: full steps of `dt` and, if needed,
/// one shorter final step.
pub fn step_sizes(t_end: f64, dt: f64) -> Vec<f64> {
    let ratio = t_end / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        return vec![dt; nearest.max(1.0) as usize];
    }
    let full = ratio.floor() as usize;
    let mut steps = vec![dt; full];
    steps.push(t_end - full as f64 * dt);
    steps
}
