use proptest::prelude::*;
use rcurc::metrics::{fit_linear_rate, psnr, recovery_error, Peak};
use rcurc::DenseMatrix;

fn matrix(values: &[f64], cols: usize) -> DenseMatrix {
    DenseMatrix::new(values.len() / cols, cols, values.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psnr_is_symmetric_with_fixed_peak(
        a in proptest::collection::vec(-50.0f64..50.0, 12),
        b in proptest::collection::vec(-50.0f64..50.0, 12),
        peak in 1.0f64..300.0,
    ) {
        let (a, b) = (matrix(&a, 4), matrix(&b, 4));
        let ab = psnr(&a, &b, Peak::Value(peak)).unwrap();
        let ba = psnr(&b, &a, Peak::Value(peak)).unwrap();
        prop_assert!(ab == ba || (ab - ba).abs() <= 1e-12 * ab.abs());
    }

    #[test]
    fn psnr_falls_as_error_grows(
        base in proptest::collection::vec(-5.0f64..5.0, 9),
        dir in proptest::collection::vec(-1.0f64..1.0, 9),
        t in 0.01f64..10.0,
    ) {
        prop_assume!(dir.iter().any(|d| d.abs() > 1e-3));
        let x = matrix(&base, 3);
        let near = DenseMatrix::from_fn(3, 3, |i, j| x.get(i, j) + t * dir[i * 3 + j]);
        let far = DenseMatrix::from_fn(3, 3, |i, j| x.get(i, j) + 2.0 * t * dir[i * 3 + j]);
        let p = Peak::Value(10.0);
        // Doubling the error lowers PSNR by exactly 20 log10(2).
        let drop = psnr(&x, &near, p).unwrap() - psnr(&x, &far, p).unwrap();
        prop_assert!((drop - 20.0 * 2f64.log10()).abs() <= 1e-9);
    }

    #[test]
    fn recovery_error_scales_linearly(
        x in proptest::collection::vec(-5.0f64..5.0, 6),
        c in -3.0f64..3.0,
    ) {
        let x = matrix(&x, 2);
        prop_assume!(x.frob_norm() > 1e-6);
        let e = recovery_error(&x.scaled(1.0 + c), &x).unwrap();
        prop_assert!((e - c.abs()).abs() <= 1e-12);
    }

    #[test]
    fn geometric_traces_fit_exactly(rate in 0.05f64..0.95, start in 1usize..5, len in 2usize..40) {
        let trace: Vec<(usize, f64)> = (start..start + len).map(|k| (k, 3.0 * rate.powi(k as i32))).collect();
        let fit = fit_linear_rate(&trace).unwrap();
        prop_assert!((fit.slope - rate.ln()).abs() <= 1e-9);
        prop_assert!((fit.r2 - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn peak_parsing() {
    assert_eq!("auto".parse::<Peak>().unwrap(), Peak::Auto);
    assert_eq!("255".parse::<Peak>().unwrap(), Peak::Value(255.0));
    assert!("-1".parse::<Peak>().is_err());
    assert!("inf".parse::<Peak>().is_err());
}
