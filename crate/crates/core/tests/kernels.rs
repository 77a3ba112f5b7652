use std::f64::consts::PI;

use nscascade::kernels::{
    certify, combine, rescale_limit_family, riesz_convolution_constant, riesz_convolution_integral,
    self_convolution, standard_sample_set, Interpolation, Kernel, QuadratureSpec, Tilt, ToolkitOp,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn q() -> QuadratureSpec {
    QuadratureSpec::default()
}

#[test]
fn riesz_constant_matches_bipolar_hand_value() {
    // ∫ dη/(|η|²|ξ−η|²) = (2π/k)∫₀ᵏ(2/v)ln((k+v)/(k−v))dv = π³/k
    let k = riesz_convolution_constant();
    assert!(rel(k, PI.powi(3)) < 1e-9, "measured {k}");
}

#[test]
fn riesz_integral_scales_as_inverse_modulus() {
    let base = riesz_convolution_integral(1.0, 1e-10).unwrap().value;
    for k in [0.5, 2.0, 4.0] {
        let v = riesz_convolution_integral(k, 1e-10).unwrap().value * k;
        assert!(rel(v, base) < 1e-8, "k={k}");
    }
}

#[test]
fn standardized_riesz_certifies_with_unit_ratio() {
    let h = Kernel::riesz3d();
    let samples: Vec<Vec<f64>> = [0.5, 1.0, 2.0, 4.0].iter().map(|&r| vec![0.0, r * 0.6, r * 0.8]).collect();
    let rep = certify(&h, &samples, 0.02, &q()).unwrap();
    assert!(rep.pass);
    for e in &rep.entries {
        assert!((e.ratio - 1.0).abs() < 1e-6, "{e:?}");
    }
}

#[test]
fn cauchy1d_convolution_at_origin() {
    // ∫ dξ / (4π²(1+ξ²)²) = (1/4π²)(π/2) = 1/(8π)
    let v = self_convolution(&Kernel::cauchy1d(), &[0.0], &q()).unwrap().value;
    assert!(rel(v, 1.0 / (8.0 * PI)) < 1e-9);
}

#[test]
fn cauchy1d_convolution_is_the_doubled_width_kernel() {
    // Cauchy densities compose by adding widths: h∗h(ξ) = 1/(2π(4+ξ²))
    for x in [-3.0, 0.4, 7.5] {
        let v = self_convolution(&Kernel::cauchy1d(), &[x], &q()).unwrap().value;
        assert!(rel(v, 1.0 / (2.0 * PI * (4.0 + x * x))) < 1e-9, "x={x}");
    }
}

#[test]
fn radial_cauchy_matches_poisson_semigroup() {
    // h is half the Poisson kernel at height 1, so h∗h is a quarter of the height-2 kernel
    for n in [2usize, 3] {
        let h = Kernel::radial_cauchy(n).unwrap();
        let p = (n as f64 + 1.0) / 2.0;
        let cn = statrs::function::gamma::gamma(p) / PI.powf(p);
        for r in [0.3, 1.7] {
            let mut xi = vec![0.0; n];
            xi[n - 1] = r;
            let v = self_convolution(&h, &xi, &q()).unwrap().value;
            let exact = 0.25 * cn * 2.0 / (4.0 + r * r).powf(p);
            assert!(rel(v, exact) < 1e-7, "n={n} r={r}: {v} vs {exact}");
        }
    }
}

#[test]
fn bessel_exp_is_an_equality_kernel() {
    let h = Kernel::bessel_exp(1.0).unwrap();
    let samples = vec![vec![1.0, 0.0, 0.0], vec![0.1, 0.2, 0.2], vec![3.0, -4.0, 0.0]];
    let rep = certify(&h, &samples, 1e-6, &q()).unwrap();
    for e in &rep.entries {
        assert!((e.ratio - 1.0).abs() < 1e-7, "{e:?}");
    }
}

#[test]
fn riesz_exp_beta_one_has_constant_two_pi_over_alpha() {
    let alpha = 0.7;
    let h = Kernel::riesz_exp(1.0, alpha, 1.0).unwrap();
    assert!(rel(h.constant().unwrap(), 2.0 * PI / alpha) < 1e-15);
    let rep = certify(&h, &[vec![0.0, 0.0, 1.3]], 1e-6, &q()).unwrap();
    assert!(rel(rep.entries[0].ratio, 2.0 * PI / alpha) < 1e-7);
}

#[test]
fn bessel_integral_convolution_matches_gaussian_superposition() {
    // e^{−|ξ|²/t} are Gaussians, so h∗h(ξ) = ∬ t^{p−1}s^{p−1}e^{−t^β−s^β}(πts/(t+s))^{3/2}e^{−|ξ|²/(t+s)} dt ds
    let (beta, gamma, k) = (0.5, 1.25, 0.8);
    let p = (gamma - 3.0) / 2.0;
    let h = Kernel::bessel_integral(3, beta, gamma).unwrap();
    let v = self_convolution(&h, &[k, 0.0, 0.0], &q()).unwrap().value;
    let opts = nscascade::quadrature::QuadOptions { abs_tol: 0.0, rel_tol: 1e-9, max_intervals: 2000 };
    // x = ln t, y = ln s
    let f = |x: f64, y: f64| {
        let (t, s) = (x.exp(), y.exp());
        let g = PI * t * s / (t + s);
        (p * (x + y) - t.powf(beta) - s.powf(beta) - k * k / (t + s)).exp() * g.powf(1.5)
    };
    let inner = |x: f64| nscascade::quadrature::integrate(|y| f(x, y), -40.0, 12.0, &opts).value;
    let exact = nscascade::quadrature::integrate(inner, -40.0, 12.0, &opts).value;
    assert!(rel(v, exact) < 1e-5, "{v} vs {exact}");
}

#[test]
fn catalog_kernels_certify_on_the_standard_lattice() {
    let kernels = vec![
        Kernel::cauchy1d(),
        Kernel::cauchy_product(3).unwrap(),
        Kernel::radial_cauchy(3).unwrap(),
        Kernel::riesz_exp(1.0, 1.0, 0.5).unwrap(),
        Kernel::riesz_exp(1.0, 2.0, 0.0).unwrap(),
        Kernel::interpolated(Interpolation::Vi, 0.5, 1.0, 0.5).unwrap(),
        Kernel::bessel_integral(3, 0.5, 1.25).unwrap(),
        Kernel::riesz3d(),
        Kernel::bessel_exp(2.0).unwrap(),
        Kernel::half_line_exp(1.5).unwrap(),
    ];
    for k in kernels {
        let samples = standard_sample_set(&k);
        assert_eq!(samples.len(), 20);
        let rep = certify(&k, &samples, 1e-6, &q()).unwrap();
        assert!(rep.pass, "{}: max ratio {} vs B {}", k.to_json(), rep.max_ratio(), rep.constant);
    }
}

#[test]
fn non_radial_interpolated_kernel_certifies() {
    let k = Kernel::interpolated(Interpolation::V, 0.5, 1.0, 1.0).unwrap();
    let samples = vec![vec![0.1, 0.05, 0.0], vec![0.6, -0.3, 0.2], vec![2.0, 1.0, 3.0]];
    let rep = certify(&k, &samples, 1e-6, &QuadratureSpec { rel_tol: 1e-6, ..q() }).unwrap();
    assert!(rep.pass, "{:?}", rep.entries);
}

#[test]
fn angular_weighted_kernel_certifies_and_is_scale_free() {
    let k = Kernel::angular_weighted(1.0, 0.25).unwrap();
    let spec = QuadratureSpec { rel_tol: 1e-4, ..q() };
    let d = [0.3, 0.5, 0.81];
    let samples: Vec<Vec<f64>> = [0.5, 3.0].iter().map(|r| d.iter().map(|c| c * r).collect()).collect();
    let rep = certify(&k, &samples, 1e-6, &spec).unwrap();
    assert!(rep.pass, "{:?} B={}", rep.entries, rep.constant);
    assert!(rel(rep.entries[0].ratio, rep.entries[1].ratio) < 1e-3);
}

#[test]
fn toolkit_combinations_certify() {
    let a = Kernel::riesz3d();
    let b = Kernel::bessel_exp(1.0).unwrap();
    let gm = combine(ToolkitOp::GeometricMean { weights: vec![0.3, 0.7] }, vec![a.clone(), b.clone()]).unwrap();
    let tilt = combine(ToolkitOp::Tilt(Tilt::NormPower { a: 1.0, beta: 0.5 }), vec![a.clone()]).unwrap();
    let lin = combine(ToolkitOp::Tilt(Tilt::AbsLinear { w: vec![0.5, 0.0, 0.2] }), vec![b.clone()]).unwrap();
    let pm = combine(ToolkitOp::PseudoMetric { a: 1.0, beta: 1.0, origin: vec![0.0; 3] }, vec![a.clone()]).unwrap();
    let samples = vec![vec![0.2, 0.1, 0.0], vec![1.0, 0.5, -0.5], vec![0.0, 4.0, 1.0]];
    let spec = QuadratureSpec { rel_tol: 1e-6, ..q() };
    for k in [gm, tilt, lin, pm] {
        let rep = certify(&k, &samples, 1e-6, &spec).unwrap();
        assert!(rep.pass, "{}: {:?}", k.to_json(), rep.entries);
    }
}

#[test]
fn tensor_product_of_line_kernels() {
    let k = combine(ToolkitOp::TensorProduct, vec![Kernel::cauchy1d(), Kernel::cauchy1d(), Kernel::cauchy1d()]).unwrap();
    let c3 = Kernel::cauchy_product(3).unwrap();
    let xi = [0.2, -1.0, 2.5];
    assert!(rel(k.evaluate(&xi).unwrap(), c3.evaluate(&xi).unwrap()) < 1e-15);
    assert_eq!(k.constant().unwrap(), 1.0);
    let fast = self_convolution(&k, &xi, &q()).unwrap().value;
    let slow = self_convolution(&k, &xi, &QuadratureSpec { use_identities: false, rel_tol: 1e-7, ..q() })
        .unwrap()
        .value;
    let exact: f64 = xi.iter().map(|x| 1.0 / (2.0 * PI * (4.0 + x * x))).product();
    assert!(rel(fast, exact) < 1e-8);
    assert!(rel(slow, exact) < 1e-5, "{slow} vs {exact}");
}

#[test]
fn shift_and_linear_change_identities_match_direct_quadrature() {
    let b = Kernel::bessel_exp(1.0).unwrap();
    let shift = combine(ToolkitOp::ExpShift { a: vec![0.3, 0.0, -0.2] }, vec![b.clone()]).unwrap();
    let m = vec![vec![1.5, 0.2, 0.0], vec![0.0, 0.8, 0.1], vec![0.3, 0.0, 1.1]];
    let lin = combine(ToolkitOp::Affine { matrix: m }, vec![b]).unwrap();
    let xi = [0.4, 0.7, -0.3];
    let direct = QuadratureSpec { use_identities: false, rel_tol: 1e-7, ..q() };
    for k in [shift, lin] {
        let a = self_convolution(&k, &xi, &q()).unwrap().value;
        let d = self_convolution(&k, &xi, &direct).unwrap().value;
        assert!(rel(a, d) < 1e-5, "{}: {a} vs {d}", k.to_json());
    }
}

#[test]
fn rescaled_family_certifies_with_same_constant() {
    let h = Kernel::bessel_exp(1.0).unwrap();
    for lambda in [0.5, 3.0] {
        let hl = rescale_limit_family(&h, lambda).unwrap();
        assert_eq!(hl.constant().unwrap(), 1.0);
        assert_eq!(hl.exponent(), 1.0);
        let rep = certify(&hl, &[vec![0.3, 0.4, 0.0], vec![2.0, 0.0, 1.0]], 1e-6, &q()).unwrap();
        assert!(rep.pass);
        for e in &rep.entries {
            assert!((e.ratio - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn log_convex_combination_of_certified_kernels() {
    let a = Kernel::riesz_exp(1.0, 1.0, 0.5).unwrap();
    let b = Kernel::bessel_exp(1.0).unwrap();
    let g = combine(ToolkitOp::GeometricMean { weights: vec![0.5, 0.5] }, vec![a, b]).unwrap();
    let rep = certify(&g, &standard_sample_set(&g), 1e-6, &q()).unwrap();
    assert!(rep.pass);
}

#[test]
fn certification_report_json_shape() {
    let rep = certify(&Kernel::riesz3d(), &[vec![1.0, 0.0, 0.0]], 0.02, &q()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
    let obj = v[0].as_object().unwrap();
    let mut keys: Vec<_> = obj.keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, vec!["bound", "pass", "ratio", "xi"]);
}

proptest! {
    #[test]
    fn geometric_mean_is_log_linear(x in -5.0f64..5.0, y in -5.0f64..5.0, z in 0.01f64..5.0, q1 in 0.05f64..0.95) {
        let a = Kernel::riesz_exp(1.0, 0.5, 0.3).unwrap();
        let b = Kernel::bessel_exp(2.0).unwrap();
        let g = combine(ToolkitOp::GeometricMean { weights: vec![q1, 1.0 - q1] }, vec![a.clone(), b.clone()]).unwrap();
        let xi = [x, y, z];
        let lhs = g.evaluate(&xi).unwrap().ln();
        let rhs = q1 * a.evaluate(&xi).unwrap().ln() + (1.0 - q1) * b.evaluate(&xi).unwrap().ln();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn linear_change_identity(x in -3.0f64..3.0, y in -3.0f64..3.0, z in 0.01f64..3.0,
                              m in proptest::collection::vec(-2.0f64..2.0, 9)) {
        let matrix: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| m[3 * i + j] + if i == j { 3.0 } else { 0.0 }).collect()).collect();
        let h = Kernel::bessel_exp(1.0).unwrap();
        let ha = combine(ToolkitOp::Affine { matrix: matrix.clone() }, vec![h.clone()]).unwrap();
        let mat = nalgebra::Matrix3::from_fn(|i, j| matrix[i][j]);
        let det = mat.determinant().abs();
        let op = mat.svd(false, false).singular_values.max();
        let xi = nalgebra::Vector3::new(x, y, z);
        let ax = mat * xi;
        let lhs = ha.evaluate(&[x, y, z]).unwrap() * op / det;
        let rhs = h.evaluate(&[ax[0], ax[1], ax[2]]).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
    }

    #[test]
    fn kernels_vanish_outside_support_only(x in -4.0f64..4.0, y in -4.0f64..4.0, z in -4.0f64..4.0) {
        let xi = [x, y, z];
        for k in [Kernel::riesz3d(), Kernel::bessel_exp(1.0).unwrap(), Kernel::radial_cauchy(3).unwrap(),
                  Kernel::interpolated(Interpolation::V, 0.4, 1.0, 0.5).unwrap()] {
            let v = k.evaluate(&xi).unwrap();
            if k.support().contains(&xi) {
                prop_assert!(v > 0.0 && v.is_finite());
            } else {
                prop_assert_eq!(v, 0.0);
            }
        }
    }
}
