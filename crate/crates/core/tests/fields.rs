use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use nscascade::cascade::SpectralField;
use nscascade::fields::{
    f_norm, leray_project, mollified_field, pressure_from_velocity, scale_relation, BaseFieldBound,
    LaplaceField, LaplaceWeight, NormSpec, SpectralGrid, LAPLACE_DOMINATION,
};
use nscascade::kernels::Kernel;
use nscascade::{CVec3, Vec3};
use proptest::prelude::*;

type Field3 = fn(f64, f64, f64) -> [f64; 3];

fn sample(n: usize, f: Field3) -> (Vec<Vec<f64>>, [usize; 3], [f64; 3]) {
    let h = 2.0 * PI / n as f64;
    let mut comps = vec![vec![0.0; n * n * n]; 3];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = f(i as f64 * h, j as f64 * h, k as f64 * h);
                for c in 0..3 {
                    comps[c][(i * n + j) * n + k] = v[c];
                }
            }
        }
    }
    (comps, [n; 3], [h; 3])
}

fn max_deviation(got: &[f64], want: impl Fn(f64, f64, f64) -> f64, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let w = want(i as f64 * h, j as f64 * h, k as f64 * h);
                worst = worst.max((got[(i * n + j) * n + k] - w).abs());
            }
        }
    }
    worst
}

#[test]
fn taylor_green_pressure() {
    let n = 16;
    let (u, dims, h) = sample(n, |x, y, z| [x.sin() * y.cos() * z.cos(), -x.cos() * y.sin() * z.cos(), 0.0]);
    let grid = SpectralGrid::from_physical(&u, dims, h).unwrap();
    let p = pressure_from_velocity(&grid, None).unwrap().to_physical().unwrap();
    let err = max_deviation(&p[0], |x, y, z| ((2.0 * x).cos() + (2.0 * y).cos()) * ((2.0 * z).cos() + 2.0) / 16.0, n);
    assert!(err < 1e-13, "{err}");
}

#[test]
fn beltrami_flow_pressure_is_minus_half_speed_squared() {
    let n = 16;
    let abc = |x: f64, y: f64, z: f64| {
        [z.sin() + 0.5 * y.cos(), 0.8 * x.sin() + z.cos(), 0.5 * y.sin() + 0.8 * x.cos()]
    };
    let (u, dims, h) = sample(n, abc);
    let grid = SpectralGrid::from_physical(&u, dims, h).unwrap();
    let p = pressure_from_velocity(&grid, None).unwrap().to_physical().unwrap();
    let half_sq = |x: f64, y: f64, z: f64| 0.5 * abc(x, y, z).iter().map(|v| v * v).sum::<f64>();
    // mean of |u|²/2 is (1 + 0.25 + 0.64 + 1 + 0.25 + 0.64)/4
    let mean = (1.0 + 0.25 + 0.64 + 1.0 + 0.25 + 0.64) / 4.0;
    let err = max_deviation(&p[0], |x, y, z| mean - half_sq(x, y, z), n);
    assert!(err < 1e-13, "{err}");
}

#[test]
fn forcing_enters_through_its_divergence() {
    let n = 8;
    let (u, dims, h) = sample(n, |_, _, _| [0.0; 3]);
    let (g, _, _) = sample(n, |x, _, z| [x.sin(), 0.0, (2.0 * z).cos()]);
    let u = SpectralGrid::from_physical(&u, dims, h).unwrap();
    let g = SpectralGrid::from_physical(&g, dims, h).unwrap();
    let p = pressure_from_velocity(&u, Some(&g)).unwrap().to_physical().unwrap();
    // Δp = ∇·g = cos x − 2 sin 2z
    let err = max_deviation(&p[0], |x, _, z| -x.cos() + 0.5 * (2.0 * z).sin(), n);
    assert!(err < 1e-13, "{err}");
}

fn decaying_field(xi: &Vec3, t: f64) -> nscascade::Result<CVec3> {
    let a = CVec3::from_parts([0.3, -0.1, 0.2], [0.1, 0.4, -0.2]);
    let k = Kernel::bessel_exp(1.0)?;
    let h = k.eval3(xi)?;
    Ok(leray_project(&a, xi)?.scale_re(h * (-xi.norm_sq() * t).exp() * (1.0 + (xi[0] * t).sin() / 3.0)))
}

#[test]
fn norm_scale_relation() {
    let spec = NormSpec::lattice(Kernel::bessel_exp(1.0).unwrap(), 1, 2.0, 0.05, 20.0, 12, vec![0.0, 0.1, 0.5, 1.5]).unwrap();
    for lambda in [0.5, 2.0, 5.0] {
        let (a, b) = scale_relation(&decaying_field, &spec, lambda).unwrap();
        assert!(a > 0.0);
        assert!(((a - b) / a).abs() < 1e-12, "λ = {lambda}: {a} vs {b}");
    }
}

#[test]
fn laplace_field_is_dominated() {
    let w = LaplaceWeight { amplitude: 1.0, power: 1.0, rate: 2.0, stretch: 1.0 };
    let field = LaplaceField::quarter([w, LaplaceWeight::exponential(0.5, 1.5), LaplaceWeight::ZERO]);
    let rep = field.check_weights(1.0, 2.0).unwrap();
    assert!(rep.max_ratio <= 1.0);
    // the second weight has no t-power and fails integrability at 0
    assert!(!rep.integrable);
    let kernel = Kernel::bessel_integral(3, 1.0, 2.0).unwrap();
    let samples: Vec<Vec3> = (0..20)
        .map(|i| {
            let r = 10f64.powf(-2.0 + 4.0 * i as f64 / 19.0);
            Vec3::new(0.6, -0.48, 0.64).scale(r)
        })
        .collect();
    let dom = field.domination(&kernel, LAPLACE_DOMINATION, &samples).unwrap();
    assert!(dom.pass, "{dom:?}");
}

#[test]
fn mollified_gaussian_is_dominated() {
    let kernel = Kernel::riesz3d();
    let base = SpectralField::Gaussian { amplitude: [1.0, 0.5, -0.3], width: 0.5 };
    let base_fn = Arc::new(move |xi: &Vec3| base.u_hat(&kernel, xi));
    // |v̂| ≤ |a| and |ξ|²e^{−w²|ξ|²/2} ≤ 2/(e w²)
    let amp = Vec3::new(1.0, 0.5, -0.3).norm();
    let bound = BaseFieldBound { c_inverse_square: amp * 2.0 / (std::f64::consts::E * 0.25), c_sup: amp };
    let checks: Vec<Vec3> = (1..40).map(|i| Vec3::new(0.3, 0.4, 0.1).scale(i as f64 / 4.0)).collect();
    let field = mollified_field(base_fn, bound, &checks, 0.5, 0.5).unwrap();
    let samples: Vec<Vec3> = (0..25).map(|i| Vec3::new(1.0, -0.5, 0.25).scale(0.05 * 1.35f64.powi(i))).collect();
    let dom = field.domination(&samples).unwrap();
    assert!(dom.pass, "{dom:?}");
    assert!(mollified_field(Arc::new(|_: &Vec3| Ok(CVec3::ZERO)), bound, &checks, 0.5, 1.0).is_err());
}

fn cvec() -> impl Strategy<Value = CVec3> {
    prop::array::uniform6(-10.0f64..10.0).prop_map(|a| CVec3::from_parts([a[0], a[1], a[2]], [a[3], a[4], a[5]]))
}

fn freq() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-50.0f64..50.0)
        .prop_filter("nonzero", |a| Vec3(*a).norm() > 1e-3)
        .prop_map(Vec3)
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_orthogonal(u in cvec(), xi in freq()) {
        let p = leray_project(&u, &xi).unwrap();
        let pp = leray_project(&p, &xi).unwrap();
        let scale = u.norm().max(1e-300);
        prop_assert!(p.max_abs_diff(&pp) <= 1e-12 * scale);
        prop_assert!(p.dot_real(&xi.direction().unwrap()).norm() <= 1e-12 * scale);
        // the removed part is parallel to ξ
        let rest = u - p;
        let e = xi.direction().unwrap();
        let along = CVec3::new(e[0].into(), e[1].into(), e[2].into()).scale(rest.dot_real(&e));
        prop_assert!(rest.max_abs_diff(&along) <= 1e-12 * scale);
    }

    #[test]
    fn sampled_norm_is_a_seminorm(c in -5.0f64..5.0, shift in 0.0f64..1.0) {
        let spec = NormSpec::lattice(Kernel::bessel_exp(1.0).unwrap(), 0, 1.0, 0.1, 10.0, 4, vec![0.0, 0.5]).unwrap();
        let other = move |xi: &Vec3, t: f64| -> nscascade::Result<CVec3> {
            Ok(decaying_field(&xi.scale(1.0 + shift), t)?.scale(Complex64::new(0.0, 1.0)))
        };
        let a = f_norm(&decaying_field, &spec).unwrap().value;
        let b = f_norm(&other, &spec).unwrap().value;
        let scaled = f_norm(&|xi: &Vec3, t: f64| Ok(decaying_field(xi, t)?.scale_re(c)), &spec).unwrap().value;
        prop_assert!((scaled - c.abs() * a).abs() <= 1e-12 * a.max(1e-300));
        let sum = f_norm(&|xi: &Vec3, t: f64| Ok(decaying_field(xi, t)? + other(xi, t)?), &spec).unwrap().value;
        prop_assert!(sum <= (a + b) * (1.0 + 1e-12));
        prop_assert!(a >= 0.0);
    }
}
