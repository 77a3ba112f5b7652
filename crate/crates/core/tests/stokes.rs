use std::f64::consts::PI;

use num_complex::Complex64;
use nscascade::fields::SpectralGrid;
use nscascade::stokes::{
    check_divergence, check_fourier, check_semigroup, oseen_tensor, stokes_evolve, GridForcing,
};
use nscascade::Vec3;

#[test]
fn grid_transform_matches_the_projected_heat_symbol() {
    let rep = check_fourier(32, 2.0 * PI, 0.1, 1.0, 6.0, 0.7).unwrap();
    assert!(rep.modes > 100);
    assert!(rep.max_rel_error < 1e-3, "{rep:?}");
}

#[test]
fn semigroup_identity_holds() {
    let rep = check_semigroup(&Vec3::new(0.3, 0.2, 0.1), 0.1, 0.05, 1.0).unwrap();
    assert!(rep.rel_error < 0.02, "{rep:?}");
}

#[test]
fn columns_are_divergence_free_at_second_order() {
    let rep = check_divergence(&Vec3::new(0.3, -0.2, 0.25), 0.1, 1.0, 0.04, 3).unwrap();
    for o in &rep.orders {
        assert!((o - 2.0).abs() < 0.2, "{rep:?}");
    }
}

#[test]
fn viscosity_enters_through_nu_t() {
    let z = Vec3::new(0.5, 0.1, -0.3);
    let a = oseen_tensor(&z, 0.2, 0.5).unwrap();
    let b = oseen_tensor(&z, 0.1, 1.0).unwrap();
    assert_eq!(a, b);
}

fn single_mode(n: usize, mode: (usize, usize, usize), amp: [Complex64; 3]) -> SpectralGrid {
    let mut g = SpectralGrid::zeros([n; 3], [2.0 * PI / n as f64; 3], 3).unwrap();
    let len = g.len();
    let (i, j, k) = mode;
    let idx = g.index(i, j, k);
    let mir = g.index((n - i) % n, (n - j) % n, (n - k) % n);
    for c in 0..3 {
        g.data[c * len + idx] = amp[c];
        g.data[c * len + mir] = amp[c].conj();
    }
    g
}

#[test]
fn oscillating_forcing_matches_the_closed_form() {
    let n = 8;
    let (nu, t, omega) = (0.3, 0.9, 2.5);
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let mode = (1, 2, 0);
    let u0 = single_mode(n, mode, [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.5)]);
    let g = single_mode(n, mode, [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    let sol = stokes_evolve(&u0, &GridForcing::Oscillating { grid: g, omega }, t, nu).unwrap();
    let xi = Vec3::new(1.0, 2.0, 0.0);
    let lam = nu * xi.norm_sq();
    // independent trapezoid integral of e^{−λ(t−s)}cos(ωs)
    let m = 200_000;
    let h = t / m as f64;
    let f = |s: f64| (-lam * (t - s)).exp() * (omega * s).cos();
    let integral = h * ((1..m).map(|i| f(i as f64 * h)).sum::<f64>() + 0.5 * (f(0.0) + f(t)));
    // P e_x = e_x − ξ ξ_x/|ξ|²
    let want = [
        c(integral * (1.0 - 1.0 / 5.0), 0.0),
        c(integral * (-2.0 / 5.0), 0.0),
        c(1.0, 0.5) * (-lam * t).exp(),
    ];
    let len = sol.velocity.len();
    let idx = sol.velocity.index(1, 2, 0);
    assert!((sol.velocity.data[idx] - want[0]).norm() < 1e-9);
    assert!((sol.velocity.data[len + idx] - want[1]).norm() < 1e-9);
    assert!((sol.velocity.data[2 * len + idx] - want[2]).norm() < 1e-12);
    // p̂ = −iξ·ĝ/|ξ|²
    let p = sol.pressure.data[idx];
    assert!((p - c(0.0, -(omega * t).cos() / 5.0)).norm() < 1e-12);
    assert!(sol.velocity.check_hermitian().is_ok() && sol.pressure.check_hermitian().is_ok());
}

#[test]
fn zero_mode_accumulates_the_mean_forcing() {
    let n = 4;
    let c = |re: f64| Complex64::new(re, 0.0);
    let u0 = single_mode(n, (0, 0, 0), [c(1.0), c(0.0), c(0.0)]);
    let g = single_mode(n, (0, 0, 0), [c(0.0), c(0.5), c(0.0)]);
    let sol = stokes_evolve(&u0, &GridForcing::Oscillating { grid: g, omega: 0.0 }, 2.0, 1.0).unwrap();
    let len = sol.velocity.len();
    assert_eq!(sol.velocity.data[0], c(1.0));
    assert!((sol.velocity.data[len] - c(1.0)).norm() < 1e-15);
}

#[test]
fn rejects_non_hermitian_input() {
    let mut g = SpectralGrid::zeros([4; 3], [1.0; 3], 3).unwrap();
    g.data[1] = Complex64::new(1.0, 0.0);
    assert!(stokes_evolve(&g, &GridForcing::None, 1.0, 1.0).is_err());
}
