//! Dense linear-algebra oracles for the structured routines.

use anderson_lab::measures::{sample_window, BaseMeasure, ProductLaw};
use anderson_lab::spectral::{eigenpairs, eigenvalues, green, GreenMethod, TridiagonalBox};
use anderson_lab::transfer::{determinant, product_values, Energy};
use anderson_lab::RngStream;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

fn dense(values: &[f64], shift: f64) -> DMatrix<f64> {
    let n = values.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            values[i] - shift
        } else if i.abs_diff(j) == 1 {
            1.0
        } else {
            0.0
        }
    })
}

fn windows(count: u64, max_len: i64) -> Vec<Vec<f64>> {
    let law = ProductLaw::exact(BaseMeasure::uniform(-1.5, 1.5).unwrap());
    (0..count)
        .map(|i| {
            let len = 1 + (i as i64 * 7) % max_len;
            sample_window(&law, 0, len - 1, RngStream::new(9, i)).unwrap().values().to_vec()
        })
        .collect()
}

#[test]
fn determinant_matches_dense_lu() {
    for (i, v) in windows(60, 25).iter().enumerate() {
        let e = -1.0 + 0.037 * i as f64;
        let want = dense(v, e).determinant();
        let got = determinant(e, v).value();
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn transfer_product_matches_naive_multiplication() {
    for (i, v) in windows(40, 30).iter().enumerate() {
        let e = Complex64::new(0.3 - 0.02 * i as f64, 0.1);
        let mut m = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
        for &x in v {
            let d = e - x;
            m = [[d * m[0][0] - m[1][0], d * m[0][1] - m[1][1]], m[0]];
        }
        let got = product_values(e, v).to_dense();
        for r in 0..2 {
            for c in 0..2 {
                assert!((got[r][c] - m[r][c]).norm() <= 1e-10 * m[r][c].norm().max(1.0));
            }
        }
    }
}

#[test]
fn eigenvalues_match_dense_symmetric_solver() {
    for v in windows(30, 40) {
        let mut want: Vec<f64> = SymmetricEigen::new(dense(&v, 0.0)).eigenvalues.iter().copied().collect();
        want.sort_by(f64::total_cmp);
        let bx = TridiagonalBox::from_values(0, v).unwrap();
        let got = eigenvalues(&bx);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
        for p in eigenpairs(&bx).unwrap() {
            assert!(p.residual < 1e-10);
            let norm: f64 = p.vector.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn green_function_matches_dense_inverse() {
    for (i, v) in windows(40, 12).iter().enumerate() {
        let e = 2.9 + 0.01 * i as f64;
        let inv = dense(v, e).try_inverse().unwrap();
        let bx = TridiagonalBox::from_values(-2, v.clone()).unwrap();
        for x in 0..v.len() {
            for y in 0..v.len() {
                let (sx, sy) = (x as i64 - 2, y as i64 - 2);
                for m in [GreenMethod::DetRatio, GreenMethod::DirectSolve] {
                    let g = green(&bx, e, sx, sy, m).unwrap().value();
                    assert!((g - inv[(x, y)]).abs() <= 1e-10 * inv[(x, y)].abs().max(1e-3), "{m:?} {g} {}", inv[(x, y)]);
                }
            }
        }
    }
}

#[test]
fn real_and_complex_paths_agree_on_the_real_axis() {
    for v in windows(20, 50) {
        let r = product_values(0.7, &v);
        let c = product_values(Energy::real(0.7).as_complex(), &v);
        assert!((r.log_norm() - c.log_norm()).abs() < 1e-12);
    }
}
