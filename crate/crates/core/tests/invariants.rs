use leakage_beam::linalg::{cholesky, hermitian_eig, invert_lower_triangular, CMatrix};
use leakage_beam::metrics::stream_margins_db;
use leakage_beam::precoder::{ged_diagonalize, simultaneous_diagonalize};
use leakage_beam::sim::{demodulate_qpsk, modulate_qpsk};
use num_complex::Complex;
use proptest::prelude::*;

type M = CMatrix<f64>;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = M> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols)
        .prop_map(move |v| M::new(rows, cols, v.into_iter().map(|(re, im)| Complex::new(re, im)).collect()).unwrap())
}

fn square() -> impl Strategy<Value = M> {
    (1usize..=8).prop_flat_map(|n| matrix(n, n))
}

fn hpd(g: &M, shift: f64) -> M {
    let mut c = g.gram();
    for i in 0..c.rows() {
        c[(i, i)].re += shift;
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cholesky_reconstructs_and_whitens(g in square(), shift in 0.05f64..2.0) {
        let c = hpd(&g, shift);
        let n = c.rows();
        let l = cholesky(&c).unwrap().lower;
        prop_assert!(l.is_lower_triangular());
        prop_assert!((&(&l * &l.adjoint()) - &c).frobenius_norm() <= 1e-8 * c.frobenius_norm());
        let x = invert_lower_triangular(&l).unwrap();
        prop_assert!((&(&l * &x) - &M::identity(n)).frobenius_norm() <= 1e-10 * n as f64);
        prop_assert!((&(&(&x * &c) * &x.adjoint()) - &M::identity(n)).frobenius_norm() <= 1e-8 * n as f64);
    }

    #[test]
    fn eig_conserves_trace_and_reconstructs(g in square()) {
        let a = g.hermitian_part();
        let e = hermitian_eig(&a).unwrap();
        let tr = a.trace().re;
        prop_assert!((e.eigenvalues.iter().sum::<f64>() - tr).abs() <= 1e-8 * tr.abs() + 1e-10);
        prop_assert!((&e.reconstruct() - &a).frobenius_norm() <= 1e-8 * a.frobenius_norm().max(1e-300));
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(e, hermitian_eig(&a).unwrap());
    }

    #[test]
    fn pair_diagonalization_is_complementary(
        (h, leak) in (2usize..=6).prop_flat_map(|n| (matrix(1 + n / 3, n), matrix(n - 1, n))),
        noise in 0.01f64..5.0,
    ) {
        let a = h.gram();
        let b = hpd(&leak, noise);
        let pair = simultaneous_diagonalize(&a, &b).unwrap();
        let ged = ged_diagonalize(&a, &b).unwrap();
        let n = a.rows();
        let pa = pair.transform.adjoint_mul(&(&a * &pair.transform));
        let pb = pair.transform.adjoint_mul(&(&b * &pair.transform));
        prop_assert!((&(&pa + &pb) - &M::identity(n)).frobenius_norm() <= 1e-8 * n as f64);
        prop_assert!(pa.off_diagonal_norm() <= 1e-8 * a.frobenius_norm());
        for i in 0..n {
            prop_assert!(pair.theta[i] >= 0.0 && pair.theta[i] < 1.0);
            let lambda = ged.lambda[i];
            let ratio = pair.theta[i] / pair.omega[i];
            prop_assert!((lambda - ratio).abs() <= 1e-7 * lambda.max(1.0), "{} vs {}", lambda, ratio);
        }
    }

    #[test]
    fn margins_are_additive_and_antisymmetric(s in prop::collection::vec(1e-3f64..1e3, 3)) {
        let t = stream_margins_db(&s).unwrap();
        prop_assert!((t.get(2, 0) - t.get(2, 1) - t.get(1, 0)).abs() < 1e-10);
        prop_assert_eq!(t.get(0, 2), -t.get(2, 0));
    }

    #[test]
    fn qpsk_round_trips(bits in prop::collection::vec(any::<bool>(), 0..32usize).prop_map(|mut b| { b.truncate(b.len() & !1); b })) {
        let symbols = modulate_qpsk::<f64>(&bits).unwrap();
        prop_assert!(symbols.iter().all(|z| (z.norm_sqr() - 1.0).abs() < 1e-15));
        prop_assert_eq!(demodulate_qpsk(&symbols), bits);
    }
}
