//! The Oseen tensor of the Stokes linearization and spectral Stokes flow.
//!
//! Γ = K·I + Hess ψ with Δψ = −K, K(z,t) = (4πνt)^{−3/2}e^{−|z|²/(4νt)} and
//! ψ = erf(|z|/√(4νt))/(4π|z|). In closed form
//!
//! ```text
//! Hess ψ = K { −(1/3) F δ_jk + ẑ_j ẑ_k (F − 1) },   F = ₁F₁(1; 5/2; |z|²/(4νt))
//! ```
//!
//! whose transform is −ξξᵀ/|ξ|² e^{−ν|ξ|²t}, so Γ̂ = (I − ξξᵀ/|ξ|²)e^{−ν|ξ|²t}.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{fft3, SpectralGrid};
use crate::quadrature::gauss_legendre_on;
use crate::special::{erf, hyp1f1_1_52_scaled};
use crate::vec3::{CVec3, Vec3};

pub type Mat3 = [[f64; 3]; 3];

fn check_time(t: f64, nu: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be positive, got {t}")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidInput(format!("ν must be positive, got {nu}")));
    }
    Ok(())
}

/// Scalar heat kernel (4πνt)^{−3/2} e^{−|z|²/(4νt)}.
pub fn heat_kernel(z: &Vec3, t: f64, nu: f64) -> Result<f64> {
    check_time(t, nu)?;
    Ok((4.0 * PI * nu * t).powf(-1.5) * (-z.norm_sq() / (4.0 * nu * t)).exp())
}

/// Γ(z, t) for viscosity ν.
pub fn oseen_tensor(z: &Vec3, t: f64, nu: f64) -> Result<Mat3> {
    check_time(t, nu)?;
    let pre = (4.0 * PI * nu * t).powf(-1.5);
    let u = z.norm_sq() / (4.0 * nu * t);
    let k = pre * (-u).exp();
    // K·F and K·(F − 1) through e^{−u}F, finite for all u
    let kf = pre * hyp1f1_1_52_scaled(u)?;
    let kf1 = kf - k;
    let mut g = [[0.0; 3]; 3];
    let r2 = z.norm_sq();
    for j in 0..3 {
        for l in 0..3 {
            let dir = if r2 > 0.0 { z[j] * z[l] / r2 } else { 0.0 };
            let delta = if j == l { 1.0 } else { 0.0 };
            g[j][l] = delta * (k - kf / 3.0) + dir * kf1;
        }
    }
    Ok(g)
}

/// Δ^{−1}K = −erf(|z|/√(4νt))/(4π|z|), the negative of the potential ψ.
pub fn inverse_laplacian_heat(z: &Vec3, t: f64, nu: f64) -> Result<f64> {
    check_time(t, nu)?;
    let b = (4.0 * nu * t).sqrt();
    let r = z.norm();
    if r < 1e-8 * b {
        // erf(x)/x → 2/√π
        return Ok(-1.0 / (2.0 * PI.powf(1.5) * b));
    }
    Ok(-erf(r / b) / (4.0 * PI * r))
}

/// Time dependence of a grid forcing: g(x, s) = cos(ωs)·G(x).
#[derive(Debug, Clone, PartialEq)]
pub enum GridForcing {
    None,
    Oscillating { grid: SpectralGrid, omega: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesSolution {
    pub velocity: SpectralGrid,
    pub pressure: SpectralGrid,
}

// ∫₀ᵗ e^{−λ(t−s)} cos(ωs) ds
fn forced_factor(lambda: f64, omega: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        return if omega == 0.0 { t } else { (omega * t).sin() / omega };
    }
    let d = lambda * lambda + omega * omega;
    (lambda * (omega * t).cos() + omega * (omega * t).sin() - lambda * (-lambda * t).exp()) / d
}

/// Frequency used for derivatives: Nyquist components are set to zero so
/// that odd and mixed symbols keep the Hermitian symmetry.
fn derivative_frequency(g: &SpectralGrid, i: usize, j: usize, k: usize) -> Vec3 {
    let mut xi = g.frequency(i, j, k);
    for (d, idx) in [i, j, k].into_iter().enumerate() {
        if g.dims[d] % 2 == 0 && idx == g.dims[d] / 2 {
            xi.0[d] = 0.0;
        }
    }
    xi
}

/// û(ξ,t) = (I − ξξᵀ/|ξ|²)[e^{−ν|ξ|²t}û₀ + ∫₀ᵗ e^{−ν|ξ|²(t−s)}ĝ(ξ,s) ds] and
/// p̂(ξ,t) = −iξ·ĝ(ξ,t)/|ξ|²; the zero mode evolves as û₀(0) + ∫ĝ(0,s)ds.
pub fn stokes_evolve(u0: &SpectralGrid, forcing: &GridForcing, t: f64, nu: f64) -> Result<StokesSolution> {
    if !(t >= 0.0) || !(nu > 0.0) {
        return Err(Error::InvalidInput(format!("need t ≥ 0 and ν > 0, got t = {t}, ν = {nu}")));
    }
    if u0.components != 3 {
        return Err(Error::InvalidInput(format!("velocity grid needs 3 components, has {}", u0.components)));
    }
    u0.check_hermitian()?;
    let (g, omega) = match forcing {
        GridForcing::None => (None, 0.0),
        GridForcing::Oscillating { grid, omega } => {
            if grid.dims != u0.dims || grid.components != 3 || grid.spacing != u0.spacing {
                return Err(Error::InvalidInput("forcing grid does not match the velocity grid".into()));
            }
            grid.check_hermitian()?;
            (Some(grid), *omega)
        }
    };
    let mut velocity = SpectralGrid::zeros(u0.dims, u0.spacing, 3)?;
    let mut pressure = SpectralGrid::zeros(u0.dims, u0.spacing, 1)?;
    let n = u0.len();
    let [n0, n1, n2] = u0.dims;
    for i in 0..n0 {
        for j in 0..n1 {
            for k in 0..n2 {
                let idx = u0.index(i, j, k);
                let get = |grid: &SpectralGrid| {
                    CVec3::new(grid.data[idx], grid.data[n + idx], grid.data[2 * n + idx])
                };
                let lambda = nu * u0.frequency(i, j, k).norm_sq();
                let mut v = get(u0).scale_re((-lambda * t).exp());
                if let Some(g) = g {
                    v = v + get(g).scale_re(forced_factor(lambda, omega, t));
                }
                let d = derivative_frequency(u0, i, j, k);
                if !d.is_zero() {
                    v = v.project_out(&d.direction()?);
                    if let Some(g) = g {
                        let div = get(g).scale_re((omega * t).cos()).dot_real(&d);
                        pressure.data[idx] = -Complex64::new(0.0, 1.0) * div / d.norm_sq();
                    }
                }
                for c in 0..3 {
                    velocity.data[c * n + idx] = v[c];
                }
            }
        }
    }
    Ok(StokesSolution { velocity, pressure })
}

/// Hessian of the reference potential erf(r/b)/(4πr), from closed-form radial derivatives.
pub fn reference_hessian(z: &Vec3, b: f64) -> Mat3 {
    let r = z.norm();
    let mut h = [[0.0; 3]; 3];
    if r < 1e-6 * b {
        // ψ ≈ (1/(2π^{3/2}b))(1 − r²/(3b²)), so Hess ψ(0) = −I/(3π^{3/2}b³)
        let d = -1.0 / (3.0 * PI.powf(1.5) * b.powi(3));
        for (j, row) in h.iter_mut().enumerate() {
            row[j] = d;
        }
        return h;
    }
    let g = 2.0 / (PI.sqrt() * b) * (-(r * r) / (b * b)).exp();
    let e = erf(r / b);
    // ψ' = (g r − e)/(4πr²), ψ'' = (−2g r³/b² − 2g r + 2e)/(4πr³)
    let d1 = (g * r - e) / (4.0 * PI * r * r);
    let d2 = (-2.0 * g * r.powi(3) / (b * b) - 2.0 * g * r + 2.0 * e) / (4.0 * PI * r.powi(3));
    for j in 0..3 {
        for l in 0..3 {
            let dir = z[j] * z[l] / (r * r);
            let delta = if j == l { 1.0 } else { 0.0 };
            h[j][l] = d2 * dir + d1 / r * (delta - dir);
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCheck {
    pub grid: usize,
    pub box_length: f64,
    pub modes: usize,
    /// Largest ‖Γ̂ − (I − ξξᵀ/|ξ|²)e^{−ν|ξ|²t}‖_F / ‖·‖_F over the modes.
    pub max_rel_error: f64,
}

/// Grid transform of Γ(·,t) against its symbol on modes 0 < |ξ| ≤ k_max.
/// The slowly decaying part Hess(erf(r/b)/(4πr)) with b = `b_ref` is
/// subtracted in space and added back through its transform −ξξᵀ/|ξ|² e^{−|ξ|²b²/4}.
pub fn check_fourier(n: usize, box_length: f64, t: f64, nu: f64, k_max: f64, b_ref: f64) -> Result<FourierCheck> {
    check_time(t, nu)?;
    if n < 4 || !(box_length > 0.0) || !(b_ref > 0.0) {
        return Err(Error::InvalidInput("need n ≥ 4, positive box length and reference width".into()));
    }
    let h = box_length / n as f64;
    let dims = [n, n, n];
    let wrapped = |i: usize| if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
    let mut comps: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n * n * n]; 6];
    let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let z = Vec3::new(wrapped(i) * h, wrapped(j) * h, wrapped(k) * h);
                let g = oseen_tensor(&z, t, nu)?;
                let r = reference_hessian(&z, b_ref);
                let idx = (i * n + j) * n + k;
                for (c, (a, b)) in pairs.iter().enumerate() {
                    comps[c][idx] = Complex64::new(g[*a][*b] - r[*a][*b], 0.0);
                }
            }
        }
    }
    for c in comps.iter_mut() {
        fft3(c, dims, false);
    }
    let grid = SpectralGrid::zeros(dims, [h; 3], 1)?;
    let vol = h * h * h;
    let mut worst = 0.0f64;
    let mut modes = 0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let xi = grid.frequency(i, j, k);
                let k2 = xi.norm_sq();
                if k2 == 0.0 || k2 > k_max * k_max {
                    continue;
                }
                modes += 1;
                let idx = (i * n + j) * n + k;
                let mut err = 0.0;
                let mut norm = 0.0;
                for (c, (a, b)) in pairs.iter().enumerate() {
                    let w = if a == b { 1.0 } else { 2.0 };
                    let p = xi[*a] * xi[*b] / k2;
                    let delta = if a == b { 1.0 } else { 0.0 };
                    let want = (delta - p) * (-nu * k2 * t).exp();
                    let reference = -p * (-k2 * b_ref * b_ref / 4.0).exp();
                    let got = comps[c][idx] * vol + reference;
                    err += w * (got - want).norm_sqr();
                    norm += w * want * want;
                }
                worst = worst.max((err / norm).sqrt());
            }
        }
    }
    Ok(FourierCheck { grid: n, box_length, modes, max_rel_error: worst })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupCheck {
    pub x: [f64; 3],
    pub t: f64,
    pub s: f64,
    pub direct: Mat3,
    pub convolved: Mat3,
    /// Frobenius error relative to ‖Γ(x, t+s)‖.
    pub rel_error: f64,
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn frob(a: &Mat3) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// ∫Γ(x−y,t)Γ(y,s)dy by spherical product quadrature about y = 0 against Γ(x, t+s).
pub fn check_semigroup(x: &Vec3, t: f64, s: f64, nu: f64) -> Result<SemigroupCheck> {
    check_time(t, nu)?;
    check_time(s, nu)?;
    let width = (4.0 * nu * t.min(s)).sqrt();
    // radial panels refine near the origin and around |x|, then grow geometrically
    let mut edges = vec![0.0];
    let mut r = 0.0;
    let step = width / 4.0;
    let far = x.norm() + 12.0 * (4.0 * nu * t.max(s)).sqrt();
    while r < far {
        r += step;
        edges.push(r);
    }
    let mut panel = step;
    while r < 1e4 * far {
        panel *= 1.5;
        r += panel;
        edges.push(r);
    }
    let (cn, cw) = gauss_legendre_on(48, -1.0, 1.0);
    let nphi = 48;
    let mut acc = [[0.0; 3]; 3];
    for win in edges.windows(2) {
        let (rn, rw) = gauss_legendre_on(8, win[0], win[1]);
        for (rr, wr) in rn.iter().zip(&rw) {
            for (c, wc) in cn.iter().zip(&cw) {
                let sn = (1.0 - c * c).sqrt();
                for p in 0..nphi {
                    let phi = 2.0 * PI * p as f64 / nphi as f64;
                    let y = Vec3::new(rr * sn * phi.cos(), rr * sn * phi.sin(), rr * c);
                    let a = oseen_tensor(&(*x - y), t, nu)?;
                    let b = oseen_tensor(&y, s, nu)?;
                    let m = mat_mul(&a, &b);
                    let w = wr * wc * (2.0 * PI / nphi as f64) * rr * rr;
                    for i in 0..3 {
                        for j in 0..3 {
                            acc[i][j] += w * m[i][j];
                        }
                    }
                }
            }
        }
    }
    let direct = oseen_tensor(x, t + s, nu)?;
    let mut diff = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            diff[i][j] = acc[i][j] - direct[i][j];
        }
    }
    Ok(SemigroupCheck { x: x.0, t, s, direct, convolved: acc, rel_error: frob(&diff) / frob(&direct) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCheck {
    pub z: [f64; 3],
    pub spacings: Vec<f64>,
    /// max_k |Σ_j ∂_jΓ_jk| by central differences at each spacing.
    pub divergence: Vec<f64>,
    /// log₂ of successive error ratios.
    pub orders: Vec<f64>,
}

/// Central-difference divergence of the columns of Γ at z for halving spacings.
pub fn check_divergence(z: &Vec3, t: f64, nu: f64, h0: f64, levels: usize) -> Result<DivergenceCheck> {
    check_time(t, nu)?;
    let mut spacings = Vec::new();
    let mut divergence = Vec::new();
    for l in 0..levels {
        let h = h0 / f64::powi(2.0, l as i32);
        let mut worst = 0.0f64;
        for k in 0..3 {
            let mut div = 0.0;
            for j in 0..3 {
                let mut e = Vec3::ZERO;
                e.0[j] = h;
                let a = oseen_tensor(&(*z + e), t, nu)?;
                let b = oseen_tensor(&(*z - e), t, nu)?;
                div += (a[j][k] - b[j][k]) / (2.0 * h);
            }
            worst = worst.max(div.abs());
        }
        spacings.push(h);
        divergence.push(worst);
    }
    let orders = divergence.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(DivergenceCheck { z: z.0, spacings, divergence, orders })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_the_origin() {
        let g = oseen_tensor(&Vec3::ZERO, 0.3, 2.0).unwrap();
        let d = 2.0 / 3.0 * (4.0 * PI * 2.0 * 0.3f64).powf(-1.5);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { d } else { 0.0 };
                assert!((g[i][j] - want).abs() < 1e-15 * d);
            }
        }
    }

    #[test]
    fn symmetric_and_traced() {
        let z = Vec3::new(0.4, -0.7, 1.1);
        let g = oseen_tensor(&z, 0.2, 0.5).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g[i][j], g[j][i]);
            }
        }
        // tr Γ = 3K + Δψ = 2K
        let tr = g[0][0] + g[1][1] + g[2][2];
        let k = heat_kernel(&z, 0.2, 0.5).unwrap();
        assert!((tr - 2.0 * k).abs() < 1e-12 * k.max(1e-300) + 1e-16);
    }

    #[test]
    fn matches_the_hessian_of_the_potential() {
        let nu: f64 = 0.7;
        let t = 0.15;
        let b = (4.0 * nu * t).sqrt();
        for z in [Vec3::new(0.1, 0.2, -0.05), Vec3::new(1.0, -0.5, 0.3), Vec3::new(3.0, 0.0, 0.1)] {
            let g = oseen_tensor(&z, t, nu).unwrap();
            let hs = reference_hessian(&z, b);
            let k = heat_kernel(&z, t, nu).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let want = hs[i][j] + if i == j { k } else { 0.0 };
                    assert!((g[i][j] - want).abs() < 1e-10 * frob(&g), "{z:?} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn reference_hessian_matches_finite_differences() {
        let b = 0.8;
        let psi = |z: &Vec3| -inverse_laplacian_heat(z, b * b / 4.0, 1.0).unwrap();
        let z = Vec3::new(0.3, -0.4, 0.5);
        let h = 1e-4;
        let hs = reference_hessian(&z, b);
        for i in 0..3 {
            for j in 0..3 {
                let mut ei = Vec3::ZERO;
                ei.0[i] = h;
                let mut ej = Vec3::ZERO;
                ej.0[j] = h;
                let fd = (psi(&(z + ei + ej)) - psi(&(z + ei - ej)) - psi(&(z - ei + ej)) + psi(&(z - ei - ej))) / (4.0 * h * h);
                assert!((fd - hs[i][j]).abs() < 1e-6, "({i},{j}) {fd} {}", hs[i][j]);
            }
        }
    }

    #[test]
    fn far_field_does_not_overflow() {
        let g = oseen_tensor(&Vec3::new(50.0, 0.0, 0.0), 1e-3, 1.0).unwrap();
        assert!(g.iter().flatten().all(|v| v.is_finite()));
        // far away Γ → Hess(1/(4πr)), whose xx entry is 2/(4πr³)
        assert!((g[0][0] - 2.0 / (4.0 * PI * 50f64.powi(3))).abs() < 1e-12);
        assert!(oseen_tensor(&Vec3::ZERO, 0.0, 1.0).is_err());
    }

    #[test]
    fn forced_factor_limits() {
        let t = 1.3;
        assert!((forced_factor(2.0, 0.0, t) - (1.0 - (-2.0 * t).exp()) / 2.0).abs() < 1e-15);
        assert_eq!(forced_factor(0.0, 0.0, t), t);
        // direct quadrature
        let (x, w) = gauss_legendre_on(40, 0.0, t);
        let q: f64 = x.iter().zip(&w).map(|(s, w)| w * (-0.7 * (t - s)).exp() * (2.0 * s).cos()).sum();
        assert!((forced_factor(0.7, 2.0, t) - q).abs() < 1e-13);
    }
}
