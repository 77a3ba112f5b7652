use nscascade::kernels::Kernel;
use nscascade::rng::replicate_stream;
use nscascade::sampler::{histogram_csv, validate_sampler, BranchingDensity, HistogramSpec, PairSampler};
use nscascade::Vec3;

fn check(kernel: Kernel, xi: Vec3, seed: u64) {
    let bd = BranchingDensity::new(&kernel, xi).unwrap();
    let mut rng = replicate_stream(seed, 0);
    let rep = validate_sampler(&bd, 100_000, &HistogramSpec::default(), &mut rng).unwrap();
    assert!((rep.oracle_mass - 1.0).abs() < 0.01, "mass {}", rep.oracle_mass);
    assert!(rep.radial_ks < 0.01, "radial KS {}", rep.radial_ks);
    assert!(rep.angular_p_value > 1e-3, "angular p {}", rep.angular_p_value);
    // two-sample KS at n = 1e5 has 99.9% quantile ≈ 1.95·sqrt(2/n)
    assert!(rep.reflection_ks < 0.0088, "reflection KS {}", rep.reflection_ks);
    let csv = histogram_csv(&rep.radial_histogram);
    assert!(csv.starts_with("bin_lo,bin_hi,empirical,oracle\n"));
    let mass: f64 = rep.radial_histogram.iter().map(|r| r.oracle).sum();
    assert!((mass - 1.0).abs() < 1e-9);
}

#[test]
fn riesz_sampler_matches_density_marginals() {
    check(Kernel::riesz3d(), Vec3::new(0.0, 0.6, 0.8), 11);
}

#[test]
fn bessel_exp_sampler_matches_density_marginals() {
    check(Kernel::bessel_exp(1.0).unwrap(), Vec3::new(1.0, 0.0, 0.0), 12);
}

#[test]
fn tilted_riesz_sampler_uses_the_generic_pareto_proposal() {
    let k = Kernel::riesz_exp(1.0, 1.0, 0.5).unwrap();
    let bd = BranchingDensity::new(&k, Vec3::new(0.0, 0.0, 2.0)).unwrap();
    let rep = validate_sampler(&bd, 20_000, &HistogramSpec::default(), &mut replicate_stream(4, 0)).unwrap();
    assert!(rep.radial_ks < 0.02, "radial KS {}", rep.radial_ks);
}

#[test]
fn riesz_law_is_scale_invariant() {
    let s = PairSampler::for_kernel(&Kernel::riesz3d()).unwrap();
    let dir = Vec3::new(0.48, 0.6, 0.64);
    let n = 40_000;
    let draw = |scale: f64, seed: u64| {
        let xi = dir.scale(scale);
        let mut rng = replicate_stream(seed, 0);
        let mut out: Vec<f64> = (0..n).map(|_| s.sample_pair(&xi, &mut rng).unwrap().1.norm() / scale).collect();
        out.sort_by(f64::total_cmp);
        out
    };
    let a = draw(1.0, 5);
    let b = draw(4.0, 6);
    let mut d = 0.0f64;
    for q in 1..100 {
        let i = q * n / 100;
        let x = a[i];
        let fb = b.partition_point(|v| *v <= x) as f64 / n as f64;
        d = d.max((fb - i as f64 / n as f64).abs());
    }
    assert!(d < 0.015, "scaled laws differ: {d}");
}

#[test]
fn riesz_density_integrates_to_one() {
    let bd = BranchingDensity::new(&Kernel::riesz3d(), Vec3::new(1.0, 0.0, 0.0)).unwrap();
    let rep = validate_sampler(&bd, 10, &HistogramSpec::default(), &mut replicate_stream(2, 0)).unwrap();
    assert!((rep.oracle_mass - 1.0).abs() < 0.01, "{}", rep.oracle_mass);
}
