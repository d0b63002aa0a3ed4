//! Reference solutions, error measurement and convergence studies.

use crate::dense::DenseFormula;
use crate::error::{Error, Result};
use crate::linalg::{expm_conservative, DenseMatrix};
use crate::pds::{rhs_from_rates, PdSystem};
use crate::schemes::{integrate, Scheme};

/// `exp(t A) y0` for a conservative linear system.
pub fn exact_linear(a: &DenseMatrix, y0: &[f64], t: f64) -> Result<Vec<f64>> {
    if y0.len() != a.dim() {
        return Err(Error::usage(format!(
            "initial state has {} entries, matrix is {}x{}",
            y0.len(),
            a.dim(),
            a.dim()
        )));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::usage(format!("time must be finite and >= 0, got {t}")));
    }
    if a.as_slice().iter().chain(y0).any(|v| !v.is_finite()) {
        return Err(Error::usage("matrix and initial state must be finite"));
    }
    if t == 0.0 {
        return Ok(y0.to_vec());
    }
    Ok(expm_conservative(&a.scaled(t), 1e-16).mul_vec(y0))
}

/// Default agreement tolerance of [`reference_solution`].
pub const REFERENCE_TOL: f64 = 1e-11;
const MAX_HALVINGS: usize = 20;

/// Classical RK4 on the plain ODE, refined by halving the step until two
/// successive answers agree to `tol`.
pub fn reference_solution(pds: &PdSystem, y0: &[f64], t: f64, tol: f64) -> Result<Vec<f64>> {
    Ok(reference_at_times(pds, y0, &[t], tol)?.remove(0))
}

/// [`reference_solution`] at several times, sharing one sweep per refinement level.
pub fn reference_at_times(
    pds: &PdSystem,
    y0: &[f64],
    times: &[f64],
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    pds.check_state(y0)?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::usage("reference times must be finite and >= 0"));
    }
    let span = times.iter().copied().fold(0.0, f64::max);
    if span == 0.0 {
        return Ok(vec![y0.to_vec(); times.len()]);
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();

    let mut h = span.min(0.1);
    let mut previous = rk4_sweep(pds, y0, &sorted, h);
    for _ in 0..MAX_HALVINGS {
        h *= 0.5;
        let current = rk4_sweep(pds, y0, &sorted, h);
        let agree = previous.iter().zip(&current).all(|(a, b)| {
            let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
        });
        if agree {
            let mut out = vec![Vec::new(); times.len()];
            for (slot, y) in order.into_iter().zip(current) {
                out[slot] = y;
            }
            return Ok(out);
        }
        previous = current;
    }
    Err(Error::Oracle(format!(
        "RK4 reference did not reach tolerance {tol} within {MAX_HALVINGS} halvings"
    )))
}

fn rk4_sweep(pds: &PdSystem, y0: &[f64], sorted_times: &[f64], h: f64) -> Vec<Vec<f64>> {
    let f = |y: &[f64]| rhs_from_rates(&pds.rates_unchecked(y));
    let axpy = |y: &[f64], a: f64, k: &[f64]| -> Vec<f64> {
        y.iter().zip(k).map(|(yi, ki)| yi + a * ki).collect()
    };
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(sorted_times.len());
    for &target in sorted_times {
        let span = target - t;
        if span > 0.0 {
            let n = (span / h).ceil().max(1.0) as usize;
            let dt = span / n as f64;
            for _ in 0..n {
                let k1 = f(&y);
                let k2 = f(&axpy(&y, 0.5 * dt, &k1));
                let k3 = f(&axpy(&y, 0.5 * dt, &k2));
                let k4 = f(&axpy(&y, dt, &k3));
                for i in 0..y.len() {
                    y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            t = target;
        }
        out.push(y.clone());
    }
    out
}

/// Pairwise experimental orders `log(e_i / e_{i+1}) / log(dt_i / dt_{i+1})`.
/// A pair whose finer error is exactly zero reports `+inf`.
pub fn eoc(errors: &[f64], dts: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != dts.len() || errors.len() < 2 {
        return Err(Error::usage("eoc needs at least two (dt, error) pairs of equal length"));
    }
    if errors.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::usage("errors must be non-negative"));
    }
    if dts.windows(2).any(|w| !(w[0] > w[1] && w[1] > 0.0)) {
        return Err(Error::usage("step sizes must be positive and strictly decreasing"));
    }
    Ok(errors
        .windows(2)
        .zip(dts.windows(2))
        .map(|(e, h)| {
            if e[1] == 0.0 {
                f64::INFINITY
            } else {
                (e[0] / e[1]).ln() / (h[0] / h[1]).ln()
            }
        })
        .collect())
}

/// Setup of a step-halving convergence study.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub scheme: Scheme,
    /// Dense formula to measure; `None` measures the nodal error at `t_end`.
    pub dense: Option<DenseFormula>,
    /// Interior evaluation points when `dense` is set.
    pub thetas: Vec<f64>,
    pub t_end: f64,
    pub dt0: f64,
    pub levels: usize,
    /// Tolerance for the RK4 oracle on problems without an exact solution.
    pub reference_tol: f64,
}

impl StudyConfig {
    pub fn nodal(scheme: Scheme, t_end: f64, dt0: f64, levels: usize) -> Self {
        StudyConfig {
            scheme,
            dense: None,
            thetas: Vec::new(),
            t_end,
            dt0,
            levels,
            reference_tol: REFERENCE_TOL,
        }
    }

    pub fn with_dense(mut self, dense: DenseFormula, thetas: &[f64]) -> Self {
        self.dense = Some(dense);
        self.thetas = thetas.to_vec();
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub problem: String,
    pub scheme: String,
    pub dense: Option<DenseFormula>,
    pub thetas: Vec<f64>,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub eocs: Vec<f64>,
}

impl ConvergenceReport {
    /// Mean of the last `pairs` experimental orders.
    pub fn mean_tail_eoc(&self, pairs: usize) -> f64 {
        let tail = &self.eocs[self.eocs.len().saturating_sub(pairs)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// Integrates with `dt0 / 2^k`, `k = 0..levels`, and measures the max-norm
/// error against the exact solution (or the RK4 oracle) at `t_end`, or over
/// every dense-output point `t_n + theta dt` when a dense formula is set.
pub fn convergence_study(pds: &PdSystem, cfg: &StudyConfig) -> Result<ConvergenceReport> {
    if cfg.levels < 3 {
        return Err(Error::usage(format!("need at least 3 levels, got {}", cfg.levels)));
    }
    if !(cfg.dt0 > 0.0) || !(cfg.t_end > 0.0) {
        return Err(Error::usage("dt0 and t_end must be positive"));
    }
    let ratio = cfg.t_end / cfg.dt0;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
        return Err(Error::usage(format!(
            "dt0 = {} must divide t_end = {}",
            cfg.dt0, cfg.t_end
        )));
    }
    if let Some(dense) = cfg.dense {
        dense.check_pairing(&cfg.scheme)?;
        if cfg.thetas.is_empty() {
            return Err(Error::usage("a dense study needs at least one theta"));
        }
        if let Some(th) = cfg.thetas.iter().find(|th| !(0.0..=1.0).contains(*th)) {
            return Err(Error::usage(format!("theta must lie in [0, 1], got {th}")));
        }
    }
    let y0 = pds.initial_state().to_vec();
    let dts: Vec<f64> = (0..cfg.levels).map(|k| cfg.dt0 / 2f64.powi(k as i32)).collect();

    // (approximation, time) pairs per level
    let mut samples: Vec<Vec<(f64, Vec<f64>)>> = Vec::with_capacity(dts.len());
    for &dt in &dts {
        let records = integrate(&cfg.scheme, pds, &y0, cfg.t_end, dt)?;
        let level = match cfg.dense {
            None => {
                let last = records.last().expect("at least one step");
                vec![(last.t_next(), last.y_next.clone())]
            }
            Some(dense) => {
                let mut pts = Vec::with_capacity(records.len() * cfg.thetas.len());
                for rec in &records {
                    for &theta in &cfg.thetas {
                        let s = dense.evaluate(rec, theta)?;
                        pts.push((s.t, s.values));
                    }
                }
                pts
            }
        };
        samples.push(level);
    }

    let times: Vec<f64> = samples.iter().flatten().map(|(t, _)| *t).collect();
    let reference: Vec<Vec<f64>> = if pds.has_exact() {
        times
            .iter()
            .map(|&t| pds.exact(t).expect("exact solution present"))
            .collect()
    } else {
        reference_at_times(pds, &y0, &times, cfg.reference_tol)?
    };

    let mut refs = reference.into_iter();
    let errors: Vec<f64> = samples
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|(_, y)| {
                    let r = refs.next().expect("one reference per sample");
                    y.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let eocs = eoc(&errors, &dts)?;
    Ok(ConvergenceReport {
        problem: pds.name().to_string(),
        scheme: cfg.scheme.to_string(),
        dense: cfg.dense,
        thetas: cfg.thetas.clone(),
        dts,
        errors,
        eocs,
    })
}

/// Which curve of the positivity demonstration a point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Curve {
    Nodal,
    Explicit,
    Implicit,
}

impl Curve {
    pub fn label(self) -> &'static str {
        match self {
            Curve::Nodal => "nodal",
            Curve::Explicit => "explicit",
            Curve::Implicit => "implicit",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub curve: Curve,
    pub y: Vec<f64>,
}

/// Result of the positivity demonstration on the linear test problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Figure1Data {
    pub points: Vec<CurvePoint>,
    pub min_nodal: f64,
    pub min_explicit: f64,
    pub min_implicit: f64,
    /// Largest `|y1 + y2 - 1.99|` over all points of all curves.
    pub max_mass_defect: f64,
}

impl Figure1Data {
    pub fn curve(&self, curve: Curve) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter().filter(move |p| p.curve == curve)
    }
}

pub const FIGURE1_DT: f64 = 2.0;
pub const FIGURE1_T_END: f64 = 10.0;
pub const FIGURE1_THETA_POINTS: usize = 33;

/// MPRK43(1, 0.5) with `dt = 2` on the linear test over `[0, 10]`: nodal
/// values of `y1`, plus the explicit and implicit quadratic dense output on
/// a uniform 33-point theta grid per step.
pub fn figure1_experiment() -> Result<Figure1Data> {
    let pds = crate::pds::builtin_linear_test();
    let scheme = Scheme::mprk43(1.0, 0.5)?;
    let y0 = pds.initial_state().to_vec();
    let records = integrate(&scheme, &pds, &y0, FIGURE1_T_END, FIGURE1_DT)?;
    let m0: f64 = y0.iter().sum();

    let mut points = vec![CurvePoint {
        t: 0.0,
        curve: Curve::Nodal,
        y: y0.clone(),
    }];
    points.extend(records.iter().map(|r| CurvePoint {
        t: r.t_next(),
        curve: Curve::Nodal,
        y: r.y_next.clone(),
    }));
    for (curve, formula) in [
        (Curve::Explicit, DenseFormula::Do2Explicit),
        (Curve::Implicit, DenseFormula::Do2Implicit),
    ] {
        for rec in &records {
            for i in 0..FIGURE1_THETA_POINTS {
                let theta = i as f64 / (FIGURE1_THETA_POINTS - 1) as f64;
                let s = formula.evaluate(rec, theta)?;
                points.push(CurvePoint {
                    t: s.t,
                    curve,
                    y: s.values,
                });
            }
        }
    }
    let min_of = |c: Curve| {
        points
            .iter()
            .filter(|p| p.curve == c)
            .map(|p| p.y[0])
            .fold(f64::INFINITY, f64::min)
    };
    let max_mass_defect = points
        .iter()
        .map(|p| (p.y.iter().sum::<f64>() - m0).abs())
        .fold(0.0, f64::max);
    Ok(Figure1Data {
        min_nodal: min_of(Curve::Nodal),
        min_explicit: min_of(Curve::Explicit),
        min_implicit: min_of(Curve::Implicit),
        max_mass_defect,
        points,
    })
}
