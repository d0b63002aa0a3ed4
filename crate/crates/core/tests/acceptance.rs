//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use mprk::analysis::{convergence_study, figure1_experiment, StudyConfig};
use mprk::dense::{weights_order2, weights_order3_rk4, DenseFormula, Poly};
use mprk::linalg::{audited, AuditReport, DenseMatrix};
use mprk::pds::{builtin_linear_test, builtin_nonlinear_test, linear_pds_from_matrix, mass, PdSystem};
use mprk::schemes::{integrate, mprk4_step, Scheme};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const THETAS: [f64; 3] = [0.25, 0.5, 0.75];
const T_END: f64 = 1.0;
const DT0: f64 = 0.125;
const LEVELS: usize = 6;
const TAIL: usize = 3;

fn schemes() -> Vec<Scheme> {
    vec![
        Scheme::Mpe,
        Scheme::mprk22(0.5).unwrap(),
        Scheme::mprk22(1.0).unwrap(),
        Scheme::mprk43(1.0, 0.5).unwrap(),
        Scheme::Mprk4,
    ]
}

fn bracket(
    pds: &PdSystem,
    scheme: Scheme,
    dense: Option<DenseFormula>,
    lo: f64,
    hi: f64,
) -> (bool, String) {
    let mut cfg = StudyConfig::nodal(scheme.clone(), T_END, DT0, LEVELS);
    if let Some(d) = dense {
        cfg = cfg.with_dense(d, &THETAS);
    }
    let label = match dense {
        Some(d) => format!("{d} on {scheme}"),
        None => scheme.to_string(),
    };
    match convergence_study(pds, &cfg) {
        Ok(r) => {
            let e = r.mean_tail_eoc(TAIL);
            ((lo..=hi).contains(&e), format!("{label} {e:.3} in [{lo}, {hi}]"))
        }
        Err(e) => (false, format!("{label} failed: {e}")),
    }
}

fn collect(results: Vec<(bool, String)>) -> Outcome {
    let ok = results.iter().all(|r| r.0);
    let text = results.into_iter().map(|r| r.1).collect::<Vec<_>>().join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn scheme_orders() -> Outcome {
    let pds = builtin_linear_test();
    let cases = [
        (Scheme::Mpe, 0.8, 1.2),
        (Scheme::mprk22(0.5).unwrap(), 1.8, 2.2),
        (Scheme::mprk22(1.0).unwrap(), 1.8, 2.2),
        (Scheme::mprk43(1.0, 0.5).unwrap(), 2.7, 3.3),
        (Scheme::Mprk4, 3.6, 4.4),
    ];
    collect(cases.into_iter().map(|(s, lo, hi)| bracket(&pds, s, None, lo, hi)).collect())
}

fn dense_orders() -> Outcome {
    let pds = builtin_linear_test();
    let cases = [
        (Scheme::mprk22(1.0).unwrap(), DenseFormula::Do1, 1.8, 2.2),
        (Scheme::mprk43(1.0, 0.5).unwrap(), DenseFormula::Do2Implicit, 2.7, 3.3),
        (Scheme::Mprk4, DenseFormula::Do3Implicit, 3.6, 4.4),
    ];
    collect(
        cases
            .into_iter()
            .map(|(s, d, lo, hi)| bracket(&pds, s, Some(d), lo, hi))
            .collect(),
    )
}

fn nonlinear_cross_check() -> Outcome {
    let pds = builtin_nonlinear_test();
    collect(vec![
        bracket(&pds, Scheme::mprk43(1.0, 0.5).unwrap(), None, 2.7, 3.3),
        bracket(
            &pds,
            Scheme::mprk43(1.0, 0.5).unwrap(),
            Some(DenseFormula::Do2Implicit),
            2.7,
            3.3,
        ),
    ])
}

fn figure1() -> Outcome {
    let d = figure1_experiment().map_err(|e| e.to_string())?;
    let text = format!(
        "min y1 nodal {:.4}, explicit {:.4}, implicit {:.4}; mass defect {:.1e}",
        d.min_nodal, d.min_explicit, d.min_implicit, d.max_mass_defect
    );
    if d.min_nodal > 0.0 && d.min_explicit < 0.0 && d.min_implicit > 0.0 && d.max_mass_defect <= 1e-12 {
        Ok(text)
    } else {
        Err(text)
    }
}

/// Conservative linear system with log-uniform off-diagonal rates, some of them zero.
fn random_system(rng: &mut ChaCha8Rng) -> PdSystem {
    let n = rng.gen_range(2..=6);
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j && rng.gen_bool(0.7) {
                *v = 10f64.powf(rng.gen_range(-2.0..2.0));
            }
        }
    }
    let outflow: Vec<f64> = (0..n).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    for (j, out) in outflow.into_iter().enumerate() {
        rows[j][j] = -out;
    }
    let a = DenseMatrix::from_rows(&rows).unwrap();
    let y0 = (0..n).map(|_| 10f64.powf(rng.gen_range(-3.0..1.0))).collect();
    linear_pds_from_matrix(&a, y0).unwrap()
}

fn stress() -> Outcome {
    const TRIALS: usize = 200;
    const STEPS: usize = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2024);
    let mut worst_drift: f64 = 0.0;
    let mut min_value = f64::INFINITY;
    let mut evaluations = 0usize;
    let mut failures = Vec::new();
    for scheme in schemes() {
        let formulas: Vec<DenseFormula> = [DenseFormula::Do1, DenseFormula::Do2Implicit, DenseFormula::Do3Implicit]
            .into_iter()
            .filter(|f| f.supports(&scheme))
            .collect();
        for trial in 0..TRIALS {
            let pds = random_system(&mut rng);
            let dt = 10f64.powf(rng.gen_range(-3.0..=3.0));
            let records = match integrate(&scheme, &pds, pds.initial_state(), STEPS as f64 * dt, dt) {
                Ok(r) => r,
                Err(e) => {
                    failures.push(format!("{scheme} trial {trial}: {e}"));
                    continue;
                }
            };
            for rec in &records {
                let m0 = mass(&rec.y_n);
                let mut outputs = vec![rec.y_next.clone()];
                for f in &formulas {
                    let theta = rng.gen_range(0.0..=1.0);
                    match f.evaluate(rec, theta) {
                        Ok(s) => outputs.push(s.values),
                        Err(e) => failures.push(format!("{f} on {scheme} trial {trial}: {e}")),
                    }
                }
                for y in outputs {
                    evaluations += 1;
                    let drift = (mass(&y) - m0).abs() / m0;
                    let low = y.iter().copied().fold(f64::INFINITY, f64::min);
                    worst_drift = worst_drift.max(drift);
                    min_value = min_value.min(low);
                    if low.is_nan() || low <= 0.0 || drift.is_nan() || drift > 1e-11 {
                        failures.push(format!("{scheme} trial {trial} dt {dt:.3e}: min {low:e}, drift {drift:e}"));
                    }
                }
            }
        }
    }
    let text = format!(
        "{evaluations} outputs, min component {min_value:.3e}, worst relative mass drift {worst_drift:.1e}"
    );
    if failures.is_empty() {
        Ok(text)
    } else {
        Err(format!("{text}; {} failures, first: {}", failures.len(), failures[0]))
    }
}

fn structure(report: &AuditReport) -> Outcome {
    let text = format!(
        "{} assemblies ({} with negative weights), min diagonal {:.3}, max off-diagonal {:.3e}, column-sum defect {:.1e}",
        report.assemblies,
        report.index_function_assemblies,
        report.min_diagonal,
        report.max_off_diagonal,
        report.max_column_sum_defect
    );
    if report.assemblies > 0 && report.index_function_assemblies > 0 && report.structure_ok(1e-12) {
        Ok(text)
    } else {
        Err(text)
    }
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn weight_identities() -> Outcome {
    let theta = Poly::monomial(r(1, 1), 1);
    let theta2_half = Poly::monomial(r(1, 2), 2);
    let mut checks = Vec::new();

    // MPRK43(1, 1/2): b = (1/6, 1/6, 2/3), c = (0, 1, 1/2).
    let w2 = weights_order2(&[r(1, 6), r(1, 6), r(2, 3)]);
    let c43 = [r(0, 1), r(1, 1), r(1, 2)];
    checks.push(("order-2 sum b = theta", w2.weighted_sum(&[r(1, 1); 3]) == theta));
    checks.push(("order-2 sum b c = theta^2/2", w2.weighted_sum(&c43) == theta2_half));

    let w3 = weights_order3_rk4::<Rational64>();
    let c = [r(0, 1), r(1, 2), r(1, 2), r(1, 1)];
    let c2: Vec<Rational64> = c.iter().map(|x| x * x).collect();
    // A c for the classical tableau.
    let ac = [r(0, 1), r(0, 1), r(1, 4), r(1, 2)];
    checks.push(("rk4 sum b = theta", w3.weighted_sum(&[r(1, 1); 4]) == theta));
    checks.push(("rk4 sum b c = theta^2/2", w3.weighted_sum(&c) == theta2_half));
    checks.push(("rk4 sum b c^2 = theta^3/3", w3.weighted_sum(&c2) == Poly::monomial(r(1, 3), 3)));
    checks.push(("rk4 sum b (Ac) = theta^3/6", w3.weighted_sum(&ac) == Poly::monomial(r(1, 6), 3)));
    checks.push(("rk4 b4(1/2) = -1/24", w3.eval(r(1, 2))[3] == r(-1, 24)));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    if failed.is_empty() {
        Ok(format!("{} identities hold exactly", checks.len()))
    } else {
        Err(format!("failed: {}", failed.join(", ")))
    }
}

fn solve_counts() -> Outcome {
    let pds = builtin_linear_test();
    let y = pds.initial_state().to_vec();
    let (rec, step_audit) = audited(|| mprk4_step(&pds, &y, 0.3));
    let rec = rec.map_err(|e| e.to_string())?;
    let rec43 = Scheme::mprk43(1.0, 0.5).unwrap().step(&pds, &y, 0.3).map_err(|e| e.to_string())?;
    let per_theta = |f: DenseFormula, record| {
        let (_, a) = audited(|| {
            for th in THETAS {
                f.evaluate(record, th).unwrap();
            }
        });
        a.solves as f64 / THETAS.len() as f64
    };
    let do2 = per_theta(DenseFormula::Do2Implicit, &rec43);
    let do3 = per_theta(DenseFormula::Do3Implicit, &rec);
    let text = format!(
        "mprk4 step {} solves (record says {}), do2 implicit {do2} per theta, do3 implicit {do3} per theta",
        step_audit.solves, rec.linear_solves
    );
    if step_audit.solves == 10 && rec.linear_solves == 10 && do2 == 1.0 && do3 == 2.0 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn endpoints() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut pairings = 0;
    let formulas = [
        DenseFormula::Do1,
        DenseFormula::Do2Explicit,
        DenseFormula::Do2Implicit,
        DenseFormula::Do3Implicit,
    ];
    for pds in [builtin_linear_test(), builtin_nonlinear_test()] {
        for scheme in schemes() {
            let records = integrate(&scheme, &pds, pds.initial_state(), 2.0, 0.4).map_err(|e| e.to_string())?;
            for f in formulas.iter().filter(|f| f.supports(&scheme)) {
                pairings += 1;
                for rec in &records {
                    for (theta, target) in [(0.0, &rec.y_n), (1.0, &rec.y_next)] {
                        let s = f.evaluate(rec, theta).map_err(|e| e.to_string())?;
                        let dev = s
                            .values
                            .iter()
                            .zip(target.iter())
                            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                            .fold(0.0, f64::max);
                        worst = worst.max(dev);
                    }
                }
            }
        }
    }
    let text = format!("{pairings} problem/scheme/formula pairings, worst endpoint deviation {worst:.1e}");
    if worst <= 1e-13 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let ((), audit) = audited(|| {
        results.push(("1 scheme orders", scheme_orders()));
        results.push(("2 dense-output orders", dense_orders()));
        results.push(("3 nonlinear cross-check", nonlinear_cross_check()));
        results.push(("4 positivity demonstration", figure1()));
        results.push(("5 positivity and conservation stress", stress()));
    });
    results.push(("6 structural invariants", structure(&audit)));
    results.push(("7 exact weight identities", weight_identities()));
    results.push(("8 solve-count audit", solve_counts()));
    results.push(("9 endpoint consistency", endpoints()));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
