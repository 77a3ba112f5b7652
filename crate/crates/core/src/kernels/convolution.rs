//! Numerical self-convolution (h∗h)(ξ) = ∫ h(η) h(ξ−η) dη.
//!
//! Radial kernels use bipolar coordinates r = |η|, s = |ξ−η|; general
//! three-dimensional kernels use spherical coordinates about ξ restricted to
//! the half-space |η| < |ξ−η| (the integrand is symmetric under η ↔ ξ−η),
//! which keeps the singular point η = ξ out of the domain and leaves only the
//! r² cancellation at η = 0. Tails beyond |ξ| are mapped to bounded ranges.

use std::cell::Cell;
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{norm, Kernel, Node};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_breakpoints, integrate_to_infinity, QuadEstimate, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Relative tolerance of every nested level.
    pub rel_tol: f64,
    /// Subinterval budget per one-dimensional integral.
    pub max_intervals: usize,
    /// Reduce scale, shift, linear-change and product nodes through their exact
    /// convolution identities instead of integrating the combined kernel.
    pub use_identities: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { rel_tol: 1e-8, max_intervals: 500, use_identities: true }
    }
}

impl QuadratureSpec {
    fn opts(&self) -> QuadOptions {
        QuadOptions { abs_tol: 0.0, rel_tol: self.rel_tol, max_intervals: self.max_intervals }
    }
}

// Inner-level bookkeeping for nested rules.
#[derive(Default)]
struct Nested {
    worst_rel: Cell<f64>,
    failed: Cell<bool>,
}

impl Nested {
    fn record(&self, e: &QuadEstimate) -> f64 {
        if !e.converged || !e.value.is_finite() {
            self.failed.set(true);
        }
        if e.value != 0.0 {
            self.worst_rel.set(self.worst_rel.get().max(e.error / e.value.abs()));
        }
        e.value
    }

    fn finish(&self, outer: QuadEstimate) -> QuadEstimate {
        QuadEstimate {
            error: outer.error + self.worst_rel.get() * outer.abs_value,
            converged: outer.converged && !self.failed.get(),
            ..outer
        }
    }
}

/// (h∗h)(ξ) with an error estimate; ξ must lie in W_h.
pub fn self_convolution(kernel: &Kernel, xi: &[f64], q: &QuadratureSpec) -> Result<QuadEstimate> {
    if xi.len() != kernel.dim() || xi.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(format!("bad frequency {xi:?} for a {}-dimensional kernel", kernel.dim())));
    }
    if !kernel.support().contains(xi) {
        return Err(Error::InvalidInput(format!("ξ = {xi:?} lies outside the kernel support")));
    }
    let est = convolve(kernel, xi, q)?;
    est.require("self-convolution")
}

fn convolve(k: &Kernel, xi: &[f64], q: &QuadratureSpec) -> Result<QuadEstimate> {
    if q.use_identities {
        match k.node() {
            Node::Scaled { c, child } => return Ok(convolve(child, xi, q)?.scaled(c * c)),
            Node::ExpShift { a, child } => {
                let s: f64 = a.iter().zip(xi).map(|(a, b)| a * b).sum();
                return Ok(convolve(child, xi, q)?.scaled(s.exp()));
            }
            Node::Affine { matrix, det_abs, op_norm, child, .. } => {
                let ax = super::mat_vec(matrix, xi);
                let f = det_abs * op_norm.powf(-2.0 * child.exponent());
                return Ok(convolve(child, &ax, q)?.scaled(f));
            }
            Node::TensorProduct { .. } => return product_convolution(k, xi, q),
            Node::CauchyProduct { .. } => {
                let line = Kernel::cauchy1d();
                let mut out = convolve(&line, &xi[..1], q)?;
                for x in &xi[1..] {
                    let part = convolve(&line, &[*x], q)?;
                    let rel = out.error / out.value + part.error / part.value;
                    let value = out.value * part.value;
                    out = QuadEstimate {
                        value,
                        error: rel * value,
                        abs_value: value,
                        evaluations: out.evaluations + part.evaluations,
                        converged: out.converged && part.converged,
                    };
                }
                return Ok(out);
            }
            _ => {}
        }
    }
    if k.dim() == 1 {
        Ok(line_convolution(&|x| k.eval_fast(&[x]), xi[0], q))
    } else if k.is_radial() {
        Ok(bipolar_convolution(k.dim(), &|r| k.radial_fast(r), norm(xi), q))
    } else if k.dim() == 3 {
        let x = [xi[0], xi[1], xi[2]];
        let axes = k.singular_axes();
        Ok(spherical_convolution(&|e: &[f64; 3]| k.eval_fast(e), x, q, &axes))
    } else if matches!(k.node(), Node::TensorProduct { .. }) {
        product_convolution(k, xi, q)
    } else {
        Err(Error::Unsupported(format!(
            "no self-convolution scheme for a non-radial {}-dimensional kernel",
            k.dim()
        )))
    }
}

fn product_convolution(k: &Kernel, xi: &[f64], q: &QuadratureSpec) -> Result<QuadEstimate> {
    let Node::TensorProduct { children } = k.node() else { unreachable!() };
    let mut off = 0;
    let mut value = 1.0;
    let mut rel = 0.0;
    let mut evaluations = 0;
    let mut converged = true;
    for c in children {
        let part = convolve(c, &xi[off..off + c.dim()], q)?;
        off += c.dim();
        value *= part.value;
        if part.value != 0.0 {
            rel += part.error / part.value.abs();
        }
        evaluations += part.evaluations;
        converged &= part.converged;
    }
    Ok(QuadEstimate { value, error: rel * value.abs(), abs_value: value.abs(), evaluations, converged })
}

/// One-dimensional convolution split at the kernel singular points 0 and ξ.
fn line_convolution(h: &dyn Fn(f64) -> f64, x: f64, q: &QuadratureSpec) -> QuadEstimate {
    let g = |e: f64| {
        let a = h(e);
        if a == 0.0 {
            0.0
        } else {
            a * h(x - e)
        }
    };
    let (lo, hi) = (x.min(0.0), x.max(0.0));
    let scale = x.abs().max(1.0);
    let opts = q.opts();
    let left = integrate_to_infinity(|y| g(lo - y), 0.0, scale, &opts);
    let right = integrate_to_infinity(|y| g(hi + y), 0.0, scale, &opts);
    let mid = integrate(g, lo, hi, &opts);
    left.plus(&mid).plus(&right)
}

fn sphere_area(dim: usize) -> f64 {
    // |S^{dim-1}| = 2π^{dim/2}/Γ(dim/2)
    let d = dim as f64;
    2.0 * PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0)
}

/// Bipolar rule for radial profiles f in n ≥ 2 dimensions:
/// ∫ f(|η|) f(|ξ−η|) dη = |S^{n−2}|/k ∬ f(r) f(s) r s ρ^{n−3} dr ds over the
/// triangle-inequality region, with ρ the distance from η to the ξ axis.
fn bipolar_convolution(n: usize, f: &dyn Fn(f64) -> f64, k: f64, q: &QuadratureSpec) -> QuadEstimate {
    let opts = q.opts();
    if k == 0.0 {
        let area = sphere_area(n);
        let g = |r: f64| {
            let v = f(r);
            area * r.powi(n as i32 - 1) * v * v
        };
        return integrate(g, 0.0, 1.0, &opts).plus(&integrate_to_infinity(g, 1.0, 1.0, &opts));
    }
    let nested = Nested::default();
    let pow = n as i32 - 3;
    // u = r + s ∈ [k, ∞), v = r − s ∈ [0, k] (symmetric half), dr ds = du dv / 2.
    // With w = u − k and y = k − v, ρ² = w(2k+w)·y(2k−y)/(4k²); in two
    // dimensions ρ^{−1} is an inverse square root at w = 0 and y = 0, removed by
    // integrating over √w and √y instead.
    let sqrt_sub = pow < 0;
    let integrand = |w: f64, y: f64| -> f64 {
        let r = k + 0.5 * (w - y);
        let s = 0.5 * (w + y);
        if s <= 0.0 {
            return 0.0;
        }
        let fr = f(r);
        if fr == 0.0 {
            return 0.0;
        }
        let mut val = fr * f(s) * r * s;
        if pow != 0 {
            let rho = (w * (2.0 * k + w) * y * (2.0 * k - y)).max(0.0).sqrt() / (2.0 * k);
            val *= rho.powi(pow);
        }
        val
    };
    let outer = if sqrt_sub {
        integrate(
            |b: f64| {
                let y = b * b;
                let inner = integrate_to_infinity(
                    |a: f64| {
                        if a == 0.0 || b == 0.0 {
                            return 0.0;
                        }
                        4.0 * a * b * integrand(a * a, y)
                    },
                    0.0,
                    k.sqrt(),
                    &opts,
                );
                nested.record(&inner)
            },
            0.0,
            k.sqrt(),
            &opts,
        )
    } else {
        integrate(
            |y: f64| {
                let inner = integrate_to_infinity(|w| integrand(w, y), 0.0, k, &opts);
                nested.record(&inner)
            },
            0.0,
            k,
            &opts,
        )
    };
    nested.finish(outer).scaled(sphere_area(n - 1) / k)
}

/// Spherical rule about ξ for general kernels on R³.
///
/// `axes` lists directions d along which h is singular on the lines R·d; the
/// integrand is then also singular on ξ + R·d. Their traces become breakpoints
/// of the three nested rules.
fn spherical_convolution(
    h: &dyn Fn(&[f64; 3]) -> f64,
    xi: [f64; 3],
    q: &QuadratureSpec,
    axes: &[[f64; 3]],
) -> QuadEstimate {
    let opts = q.opts();
    let k = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
    let (e1, e2, e3) = frame(xi, k);
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let mut c_breaks = Vec::new();
    let mut phi_breaks = Vec::new();
    for d in axes {
        for sgn in [1.0, -1.0] {
            let v = [sgn * d[0], sgn * d[1], sgn * d[2]];
            c_breaks.push(dot(&v, &e3));
            let phi = dot(&v, &e2).atan2(dot(&v, &e1));
            phi_breaks.push(if phi < 0.0 { phi + 2.0 * PI } else { phi });
        }
    }
    // closest approach of the ray r·u to the line ξ + R·d
    let r_breaks = |u: &[f64; 3]| -> Vec<f64> {
        axes.iter()
            .filter_map(|d| {
                let xd = dot(&xi, d);
                let ud = dot(u, d);
                let xp = [xi[0] - xd * d[0], xi[1] - xd * d[1], xi[2] - xd * d[2]];
                let up = [u[0] - ud * d[0], u[1] - ud * d[1], u[2] - ud * d[2]];
                let uu = dot(&up, &up);
                (uu > 0.0).then(|| dot(&xp, &up) / uu).filter(|r| *r > 0.0)
            })
            .collect()
    };
    let split = if k > 0.0 { k } else { 1.0 };
    let nested = Nested::default();
    let point = |r: f64, c: f64, s: f64, cp: f64, sp: f64| {
        let a = s * cp;
        let b = s * sp;
        [
            r * (c * e3[0] + a * e1[0] + b * e2[0]),
            r * (c * e3[1] + a * e1[1] + b * e2[1]),
            r * (c * e3[2] + a * e1[2] + b * e2[2]),
        ]
    };
    let radial = |c: f64, phi: f64| -> f64 {
        let s = (1.0 - c * c).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        let g = |r: f64| {
            let eta = point(r, c, s, cp, sp);
            let a = h(&eta);
            if a == 0.0 {
                return 0.0;
            }
            let rest = [xi[0] - eta[0], xi[1] - eta[1], xi[2] - eta[2]];
            r * r * a * h(&rest)
        };
        // upper limit of the half-space |η| < |ξ−η|
        let upper = if k > 0.0 && c > 0.0 { k / (2.0 * c) } else { f64::INFINITY };
        let dir = point(1.0, c, s, cp, sp);
        let rb = r_breaks(&dir);
        let near = integrate_split(g, 0.0, upper.min(split), &rb, &opts);
        let mut total = nested.record(&near);
        if upper > split {
            let u_lo = if upper.is_finite() { 1.0 / upper } else { 0.0 };
            let ub: Vec<f64> = rb.iter().map(|r| 1.0 / r).collect();
            let far = integrate_split(
                |u: f64| if u <= 0.0 { 0.0 } else { g(1.0 / u) / (u * u) },
                u_lo,
                1.0 / split,
                &ub,
                &opts,
            );
            total += nested.record(&far);
        }
        total
    };
    let azimuthal = |c: f64| {
        let e = integrate_split(|phi| radial(c, phi), 0.0, 2.0 * PI, &phi_breaks, &opts);
        nested.record(&e)
    };
    c_breaks.push(0.0);
    let outer = integrate_split(azimuthal, -1.0, 1.0, &c_breaks, &opts);
    nested.finish(if k > 0.0 { outer.scaled(2.0) } else { outer })
}

// adaptive rule on [a, b] with the interior points of `points` as breakpoints
fn integrate_split<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, points: &[f64], opts: &QuadOptions) -> QuadEstimate {
    let mut pts = vec![a];
    pts.extend(points.iter().copied().filter(|p| *p > a && *p < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (1.0 + y.abs()));
    integrate_breakpoints(f, &pts, opts)
}

fn frame(xi: [f64; 3], k: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let e3 = if k > 0.0 { [xi[0] / k, xi[1] / k, xi[2] / k] } else { [0.0, 0.0, 1.0] };
    // pick the coordinate axis least aligned with e3
    let mut axis = 0;
    for i in 1..3 {
        if e3[i].abs() < e3[axis].abs() {
            axis = i;
        }
    }
    let mut a = [0.0; 3];
    a[axis] = 1.0;
    let d = a[0] * e3[0] + a[1] * e3[1] + a[2] * e3[2];
    let mut e1 = [a[0] - d * e3[0], a[1] - d * e3[1], a[2] - d * e3[2]];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for c in &mut e1 {
        *c /= n1;
    }
    let e2 = [
        e3[1] * e1[2] - e3[2] * e1[1],
        e3[2] * e1[0] - e3[0] * e1[2],
        e3[0] * e1[1] - e3[1] * e1[0],
    ];
    (e1, e2, e3)
}

/// ∫ dη / (|η|² |ξ−η|²) at |ξ| = k by the general spherical rule.
pub fn riesz_convolution_integral(k: f64, rel_tol: f64) -> Result<QuadEstimate> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidInput(format!("|ξ| must be positive, got {k}")));
    }
    let h = |e: &[f64; 3]| 1.0 / (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
    let q = QuadratureSpec { rel_tol, max_intervals: 1000, use_identities: false };
    spherical_convolution(&h, [0.0, 0.0, k], &q, &[]).require("Riesz convolution")
}

/// The measured constant K in ∫ dη/(|η|²|ξ−η|²) = K/|ξ|, computed once.
pub fn riesz_convolution_constant() -> f64 {
    static K: OnceLock<f64> = OnceLock::new();
    *K.get_or_init(|| {
        riesz_convolution_integral(1.0, 1e-12)
            .expect("Riesz convolution quadrature converges")
            .value
    })
}
