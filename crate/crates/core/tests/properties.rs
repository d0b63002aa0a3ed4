use mprk::linalg::{assemble, solve, DenseMatrix};
use mprk::pds::{builtin_linear_test, builtin_nonlinear_test, linear_pds_from_matrix, rhs_from_rates};
use proptest::prelude::*;

fn rate_matrix(n: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(prop_oneof![Just(0.0), 1e-3..1e2f64], n * n).prop_map(move |mut v| {
        for i in 0..n {
            v[i * n + i] = 0.0;
        }
        DenseMatrix::from_row_major(n, &v).unwrap()
    })
}

fn positive_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0..2.0f64, n).prop_map(|v| v.into_iter().map(|e| 10f64.powf(e)).collect())
}

/// Stage rates, signed weights, denominators, right-hand side and dt for one assembly.
fn assembly_case() -> impl Strategy<Value = (Vec<DenseMatrix>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (2usize..=6, 1usize..=4).prop_flat_map(|(n, s)| {
        (
            prop::collection::vec(rate_matrix(n), s),
            prop::collection::vec(-1.0..1.0f64, s),
            positive_vec(n),
            positive_vec(n),
            prop::sample::select(vec![1e-3, 1.0, 1e3]),
        )
    })
}

proptest! {
    #[test]
    fn builtin_rates_are_nonnegative_and_conservative(y in positive_vec(3)) {
        let nl = builtin_nonlinear_test();
        let lin = builtin_linear_test();
        for (pds, y) in [(&nl, &y[..]), (&lin, &y[..2])] {
            let p = pds.production(y).unwrap();
            prop_assert!(p.as_slice().iter().all(|&v| v >= 0.0));
            let f = rhs_from_rates(&p);
            let scale: f64 = f.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            prop_assert!(f.iter().sum::<f64>().abs() <= 1e-14 * scale);
        }
    }

    #[test]
    fn random_linear_systems_conserve_mass(p in (2usize..=6).prop_flat_map(rate_matrix), seed in positive_vec(6)) {
        let n = p.dim();
        let mut a = p.clone();
        let sums = p.column_sums();
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
        for j in 0..n {
            rows[j][j] = -sums[j];
        }
        a = DenseMatrix::from_rows(&rows).unwrap();
        let pds = linear_pds_from_matrix(&a, seed[..n].to_vec()).unwrap();
        let f = pds.rhs(&seed[..n]).unwrap();
        let scale: f64 = f.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!(f.iter().sum::<f64>().abs() <= 1e-13 * scale);
    }

    #[test]
    fn assembly_is_an_m_matrix_and_solve_is_positive_and_conservative(
        (rates, weights, sigma, rhs, dt) in assembly_case()
    ) {
        let refs: Vec<&DenseMatrix> = rates.iter().collect();
        let m = assemble(&weights, &refs, &sigma, dt).unwrap();
        prop_assert!(m.min_diagonal() >= 1.0);
        prop_assert!(m.max_off_diagonal() <= 0.0);
        prop_assert!(m.column_sum_defect() <= 1e-12, "defect {}", m.column_sum_defect());
        let x = solve(&m, &rhs).unwrap();
        prop_assert!(x.iter().all(|&v| v > 0.0), "{:?}", x);
        let (sx, sb): (f64, f64) = (x.iter().sum(), rhs.iter().sum());
        prop_assert!((sx - sb).abs() <= 1e-12 * sb, "{} vs {}", sx, sb);
    }

    #[test]
    fn solve_commutes_with_species_permutation(
        (rates, weights, sigma, rhs, dt) in assembly_case(),
        shuffle in any::<u64>(),
    ) {
        let n = sigma.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut state = shuffle;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let permute_vec = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let permute_mat = |m: &DenseMatrix| {
            let data: Vec<f64> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .map(|(i, j)| m[(perm[i], perm[j])])
                .collect();
            DenseMatrix::from_row_major(n, &data).unwrap()
        };
        let refs: Vec<&DenseMatrix> = rates.iter().collect();
        let x = solve(&assemble(&weights, &refs, &sigma, dt).unwrap(), &rhs).unwrap();
        let prates: Vec<DenseMatrix> = rates.iter().map(permute_mat).collect();
        let prefs: Vec<&DenseMatrix> = prates.iter().collect();
        let px = solve(
            &assemble(&weights, &prefs, &permute_vec(&sigma), dt).unwrap(),
            &permute_vec(&rhs),
        )
        .unwrap();
        for (a, b) in permute_vec(&x).iter().zip(&px) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), "{} vs {}", a, b);
        }
    }
}
