use nscascade::cascade::*;
use nscascade::kernels::Kernel;
use nscascade::{CVec3, Error, Vec3};
use num_complex::Complex64;
use proptest::prelude::*;

fn unit_m_nu() -> f64 {
    2.0 / TWO_PI_3_2
}

fn engine(re: [f64; 3], im: [f64; 3]) -> Cascade {
    let k = Kernel::riesz3d().standardized().unwrap();
    Cascade::new(CascadeConfig::new(k, unit_m_nu()).with_initial(SpectralField::KernelMultiple { re, im })).unwrap()
}

#[test]
fn estimates_at_mirrored_frequencies_are_conjugate() {
    let e = engine([0.3, -0.2, 0.1], [0.1, 0.2, 0.3]);
    let xi = Vec3::new(0.7, -1.3, 2.1);
    let a = e.estimate(&xi, 1.0, 4000, 9).unwrap();
    let b = e.estimate(&-xi, 1.0, 4000, 9).unwrap();
    assert_eq!(a.u_hat().conj(), b.u_hat());
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let e = engine([0.3, -0.2, 0.1], [0.0, 0.2, 0.3]);
    let xi = Vec3::new(1.0, 2.0, -0.5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| e.estimate(&xi, 0.8, 10_000, 3).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn generation_zero_is_the_heat_semigroup() {
    let re = [0.4, 0.1, -0.3];
    let e = engine(re, [0.0; 3]);
    let xi = Vec3::new(0.0, 1.5, 2.0);
    let t = 0.7;
    let est = e.estimate_truncated(&xi, t, 0, 50_000, 5).unwrap();
    let chi0 = e.config().initial.chi(&e.config().kernel, &xi).unwrap();
    let decay = (-e.config().nu * xi.norm_sq() * t).exp();
    for j in 0..3 {
        let want = chi0[j].re * decay;
        assert!((est.mean[j].re - want).abs() < 4.0 * est.stderr_re[j].max(1e-15), "component {j}");
        assert_eq!(est.mean[j].im, 0.0);
    }
}

#[test]
fn caps_follow_the_policy() {
    let k = Kernel::riesz3d().standardized().unwrap();
    let mut cfg = CascadeConfig::new(k, unit_m_nu())
        .with_forcing(SpectralForcing::KernelMultiple { re: [0.5, 0.0, 0.0], im: [0.0; 3], omega: 0.0 });
    cfg.node_cap = 3;
    let xi = Vec3::new(0.0, 0.0, 3.0);
    let err = Cascade::new(cfg.clone()).unwrap().estimate_steady(&xi, 1000, 1).unwrap_err();
    assert!(matches!(err, Error::CapExceeded { which: "node", .. }), "{err:?}");
    cfg.cap_policy = CapPolicy::CountAndExclude;
    cfg.exclusion_limit = 0.01;
    let err = Cascade::new(cfg.clone()).unwrap().estimate_steady(&xi, 1000, 1).unwrap_err();
    assert!(matches!(err, Error::UnreliableEstimate { .. }), "{err:?}");
    cfg.exclusion_limit = 1.0;
    let est = Cascade::new(cfg).unwrap().estimate_steady(&xi, 1000, 1).unwrap();
    // a tree with more than 3 nodes needs a heads at the root
    assert!(est.excluded > 350 && est.excluded < 650, "{}", est.excluded);
    assert_eq!(est.excluded + est.replicates, 1000);
}

#[test]
fn zero_frequency_uses_the_forcing_integral() {
    let e = engine([0.3, 0.0, 0.0], [0.0; 3]);
    let est = e.estimate(&Vec3::ZERO, 2.0, 100, 1).unwrap();
    assert_eq!(est.u_hat(), CVec3::ZERO);
}

#[test]
fn warm_up_cascade_with_drift() {
    let u0 = CVec3::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5), Complex64::new(0.0, 0.0));
    let b = Vec3::new(0.0, 0.0, 1.0);
    let xi = Vec3::new(0.6, 0.0, 0.8);
    let est = linear_estimate(1.0, &b, &u0, &xi, 0.5, 20_000, 8).unwrap();
    let want = linear_exact(1.0, &b, &u0, &xi, 0.5);
    for j in 0..2 {
        assert!((est.mean[j].re - want[j].re).abs() < 4.0 * est.stderr_re[j].max(1e-15));
        assert!((est.mean[j].im - want[j].im).abs() < 4.0 * est.stderr_im[j].max(1e-15));
    }
}

#[test]
fn oscillating_forcing_has_no_steady_limit() {
    let k = Kernel::riesz3d().standardized().unwrap();
    let cfg = CascadeConfig::new(k, unit_m_nu())
        .with_forcing(SpectralForcing::KernelMultiple { re: [0.5, 0.0, 0.0], im: [0.0; 3], omega: 2.0 });
    let e = Cascade::new(cfg).unwrap();
    assert!(matches!(e.estimate_steady(&Vec3::new(1.0, 0.0, 0.0), 10, 1), Err(Error::InvalidConfiguration(_))));
}

#[test]
fn genealogy_survival_decays_like_the_critical_law() {
    let r = simulate_genealogy(200_000, 10_000, &[10, 100], 2);
    let (p10, p100) = (r.survival[0].1, r.survival[1].1);
    // P(height > n) ~ 2/n
    assert!(p10 > 0.1 && p10 < 0.25, "{p10}");
    assert!(p10 / p100 > 5.0 && p10 / p100 < 20.0, "{}", p10 / p100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn safe_replicates_stay_in_the_unit_ball(
        a in prop::array::uniform3(-0.3f64..0.3),
        b in prop::array::uniform3(-0.3f64..0.3),
        x in prop::array::uniform3(-3.0f64..3.0),
        t in 0.0f64..5.0,
        seed in 0u64..1000,
    ) {
        let xi = Vec3(x);
        prop_assume!(xi.norm() > 1e-3);
        let e = engine(a, b);
        let reps = e.replicates(&xi, t, Mode::Full, seed, 0..50).unwrap();
        for r in reps {
            prop_assert!(r.capped || r.value.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn product_is_bounded_and_transverse(
        w in prop::array::uniform6(-1.0f64..1.0),
        z in prop::array::uniform6(-1.0f64..1.0),
        x in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let xi = Vec3(x);
        prop_assume!(xi.norm() > 1e-6);
        let w = CVec3::from_parts([w[0], w[1], w[2]], [w[3], w[4], w[5]]);
        let z = CVec3::from_parts([z[0], z[1], z[2]], [z[3], z[4], z[5]]);
        let p = tensor_product_xi(&w, &z, &xi).unwrap();
        prop_assert!(p.norm() <= w.norm() * z.norm() * (1.0 + 1e-15));
        prop_assert!(p.dot_real(&xi.direction().unwrap()).norm() <= 1e-12 * w.norm() * z.norm());
    }
}
