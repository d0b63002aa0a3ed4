use mprk::pds::builtin_linear_test;
use mprk::pds::builtin_nonlinear_test;
use mprk::schemes::{Scheme, StepRecord};

/// Largest `|Y_k / pi_k - 1|` over the stages that need a solve.
fn stage_defect(rec: &StepRecord) -> f64 {
    rec.stages
        .iter()
        .zip(&rec.pi)
        .skip(1)
        .flat_map(|(y, p)| y.iter().zip(p).map(|(a, b)| (a / b - 1.0).abs()))
        .fold(0.0, f64::max)
}

fn halving_ratios(scheme: &Scheme) -> Vec<f64> {
    let mut ratios = Vec::new();
    for pds in [builtin_linear_test(), builtin_nonlinear_test()] {
        let d: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&dt| stage_defect(&scheme.step(&pds, pds.initial_state(), dt).unwrap()))
            .collect();
        ratios.extend(d.windows(2).map(|w| w[0] / w[1]));
    }
    ratios
}

#[test]
fn mprk43_stage_denominators_converge_linearly() {
    let r = halving_ratios(&Scheme::mprk43(1.0, 0.5).unwrap());
    assert!(r.iter().all(|&q| q >= 1.8), "{r:?}");
}

#[test]
fn mprk4_stage_denominators_converge_quadratically() {
    let r = halving_ratios(&Scheme::Mprk4);
    assert!(r.iter().all(|&q| q >= 3.5), "{r:?}");
}

#[test]
fn every_scheme_conserves_and_stays_positive_on_nonlinear_test() {
    let pds = builtin_nonlinear_test();
    for sel in ["mpe", "mprk22:0.5", "mprk22:2", "mprk43:0.5,0.75", "mprk43:1,0.5", "mprk4"] {
        let scheme: Scheme = sel.parse().unwrap();
        let recs = mprk::schemes::integrate(&scheme, &pds, pds.initial_state(), 20.0, 0.7).unwrap();
        for r in &recs {
            assert!(r.y_next.iter().all(|&v| v > 0.0), "{sel}");
            assert!((mprk::pds::mass(&r.y_next) - 10.0).abs() < 1e-12, "{sel}");
        }
    }
}
