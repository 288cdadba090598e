use clusterkr::{KernelName, KernelSpec};
use clusterkr_testkit::integrate;

fn moments(k: &KernelSpec) -> (f64, f64, f64) {
    let r = k.support_radius;
    let f = |g: &dyn Fn(f64) -> f64| integrate(g, -r, 0.0, 1e-14) + integrate(g, 0.0, r, 1e-14);
    (
        f(&|u| k.eval(u)),
        f(&|u| u * u * k.eval(u)),
        f(&|u| k.eval(u) * k.eval(u)),
    )
}

#[test]
fn constants_match_quadrature() {
    for name in KernelName::ALL {
        let k = KernelSpec::new(name);
        let (mass, kappa2, r_k) = moments(&k);
        assert!((mass - 1.0).abs() < 1e-10, "{name:?} mass {mass}");
        assert!((kappa2 - k.kappa2).abs() < 1e-10, "{name:?} kappa2 {kappa2}");
        assert!((r_k - k.r_k).abs() < 1e-10, "{name:?} r_k {r_k}");
        assert_eq!(k.constants(), (k.kappa2, k.r_k));
    }
    assert_eq!(KernelSpec::EPANECHNIKOV.constants(), (0.2, 0.6));
    assert_eq!(KernelSpec::QUARTIC.constants(), (1.0 / 7.0, 5.0 / 7.0));
}

#[test]
fn kernels_are_symmetric_bounded_and_compact() {
    for name in KernelName::ALL {
        let k = KernelSpec::new(name);
        for i in 0..=2000 {
            let u = -1.5 * k.support_radius + 3.0 * k.support_radius * i as f64 / 2000.0;
            let v = k.eval(u);
            assert_eq!(v, k.eval(-u));
            assert!(v >= 0.0 && v <= k.upper_bound);
            if u.abs() > k.support_radius {
                assert_eq!(v, 0.0);
            }
        }
        assert_eq!(k.eval(0.0), k.upper_bound);
    }
}

#[test]
fn product_kernel_of_dimension_two() {
    let k = KernelSpec::EPANECHNIKOV;
    let v = k.eval_product(&[0.5, -0.5]).unwrap();
    assert!((v - 0.5625 * 0.5625).abs() < 1e-15);
    assert!(k.eval_product(&[]).is_err());
    assert!((k.r_k_pow(2) - 0.36).abs() < 1e-15);
}
