use anderson_lab::estimators::{deviation_classify, Deviation};
use anderson_lab::measures::{BaseMeasure, PotentialWindow, ProductLaw};
use anderson_lab::spectral::{classify_regularity, eigenvalues, reconstruct_interior, sturm_count, Regularity, TridiagonalBox};
use anderson_lab::experiments::edge_bound_census;
use anderson_lab::transfer::{product_log_abs_det, product_values};
use anderson_lab::RngStream;
use proptest::prelude::*;

fn potential(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cocycle(v in potential(200), cut in 0.0f64..1.0, e in -3.0f64..3.0) {
        let k = ((v.len() - 1) as f64 * cut) as usize + 1;
        let whole = product_values(e, &v);
        let joined = product_values(e, &v[k..]).mul(&product_values(e, &v[..k]));
        for i in 0..2 {
            for j in 0..2 {
                let (a, b) = (whole.entry(i, j), joined.entry(i, j));
                let scale = whole.log_norm();
                let rel = |x: anderson_lab::SignedLog| x.phase * (x.log_mag - scale).exp();
                let diff = (rel(a) - rel(b)).abs();
                prop_assert!(diff < 1e-9, "{i}{j}: {diff}");
            }
        }
    }

    #[test]
    fn determinant_stays_one(v in potential(3000), e in -4.0f64..4.0, im in 0.0f64..0.5) {
        let n = v.len() as f64;
        prop_assert!(product_log_abs_det(e, &v).abs() <= 1e-8 + 1e-12 * n);
        let z = num_complex::Complex64::new(e, im);
        prop_assert!(product_log_abs_det(z, &v).abs() <= 1e-8 + 1e-12 * n);
    }

    #[test]
    fn cauchy_interlacing(v in potential(60)) {
        let full = eigenvalues(&TridiagonalBox::from_values(0, v.clone()).unwrap());
        let sub = eigenvalues(&TridiagonalBox::from_values(0, v[..v.len() - 1].to_vec()).unwrap());
        for (k, mu) in sub.iter().enumerate() {
            prop_assert!(full[k] <= mu + 1e-10 && *mu <= full[k + 1] + 1e-10);
        }
    }

    #[test]
    fn spectrum_inside_gershgorin(v in potential(80)) {
        let bx = TridiagonalBox::from_values(-5, v).unwrap();
        let (lo, hi) = bx.gershgorin();
        let ev = eigenvalues(&bx);
        prop_assert!(ev[0] >= lo - 1e-12 && *ev.last().unwrap() <= hi + 1e-12);
        prop_assert_eq!(sturm_count(&bx, lo - 1.0), 0);
        prop_assert_eq!(sturm_count(&bx, hi + 1.0), bx.dim());
    }

    #[test]
    fn sturm_count_is_monotone(v in potential(50), a in -6.0f64..6.0, b in -6.0f64..6.0) {
        let bx = TridiagonalBox::from_values(0, v).unwrap();
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(sturm_count(&bx, a) <= sturm_count(&bx, b));
    }

    #[test]
    fn deviation_classes_shrink_with_epsilon(v in potential(100), e in -2.0f64..2.0, eps in 0.01f64..0.5) {
        let w = PotentialWindow::new(0, v.clone()).unwrap();
        let b = v.len() as i64 - 1;
        let wide = deviation_classify(&w, 0, b, e, eps, 0.3).unwrap();
        let narrow = deviation_classify(&w, 0, b, e, 2.0 * eps, 0.3).unwrap();
        if narrow != Deviation::Neither {
            prop_assert_eq!(narrow, wide);
        }
    }

    #[test]
    fn reconstruction_reproduces_solutions(v in potential(30), e in -2.5f64..2.5, x_frac in 0.0f64..1.0) {
        // A solution of H psi = E psi on sites -1..=len, generated by recursion.
        let len = v.len();
        let mut psi = vec![0.0; len + 2];
        psi[0] = 0.3;
        psi[1] = -0.8;
        for k in 0..len {
            psi[k + 2] = (e - v[k]) * psi[k + 1] - psi[k];
        }
        prop_assume!(psi.iter().all(|x| x.abs() < 1e6));
        let bx = TridiagonalBox::from_values(0, v).unwrap();
        let x = ((len - 1) as f64 * x_frac) as usize;
        if let Ok(got) = reconstruct_interior(&bx, e, psi[0], psi[len + 1], x as i64) {
            prop_assert!((got - psi[x + 1]).abs() < 1e-6 * psi.iter().fold(1.0f64, |m, p| m.max(p.abs())));
        }
    }

    #[test]
    fn regularity_is_monotone_in_rate(v in potential(41), e in -2.0f64..2.0, c in 0.0f64..1.0) {
        prop_assume!(v.len() >= 21);
        let w = PotentialWindow::new(0, v).unwrap();
        let strict = classify_regularity(&w, 10, 10, c + 0.2, e);
        let loose = classify_regularity(&w, 10, 10, c, e);
        if let (Ok(s), Ok(l)) = (strict, loose) {
            if s.verdict == Regularity::Regular {
                prop_assert_eq!(l.verdict, Regularity::Regular);
            }
        }
    }
}

#[test]
fn edge_frequency_is_non_increasing_in_r() {
    let law = ProductLaw::exact(BaseMeasure::pareto(1.0, 1.2, true, 1.0).unwrap());
    let r = edge_bound_census(&law, 1.0, 1.0, &[1.5, 2.0, 3.0], &[4, 8, 16], 3000, RngStream::new(3, 0)).unwrap();
    for n in [4, 8, 16] {
        let f: Vec<f64> = r.rows.iter().filter(|x| x.n == n).map(|x| x.frequency).collect();
        assert!(f.windows(2).all(|w| w[0] >= w[1]), "{f:?}");
    }
}
