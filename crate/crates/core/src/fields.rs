//! Admissible data and forcing, the Leray projection, sampled F_{h,γ,T}
//! norms with the small-data thresholds, periodic spectral grids with
//! pressure recovery, and checks of the analyticity inequalities.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cascade::TWO_PI_3_2;
use crate::error::{Error, Result};
use crate::kernels::{rescale_limit_family, Kernel};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};
use crate::vec3::{CVec3, Vec3};

/// (I − ξ⊗ξ/|ξ|²)û.
pub fn leray_project(u_hat: &CVec3, xi: &Vec3) -> Result<CVec3> {
    if xi.is_zero() {
        return Err(Error::InvalidInput("the projection is undefined at ξ = 0".into()));
    }
    Ok(u_hat.project_out(&xi.direction()?))
}

/// (−Δ)^{-1} on the spectral side.
pub fn inverse_laplacian(v_hat: &CVec3, xi: &Vec3) -> Result<CVec3> {
    if xi.is_zero() {
        return Err(Error::InvalidInput("(−Δ)^{-1} is undefined at ξ = 0".into()));
    }
    Ok(v_hat.scale_re(1.0 / xi.norm_sq()))
}

/// Vertices of the icosahedron, a spherical 5-design.
pub fn icosahedron() -> Vec<Vec3> {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let n = (1.0 + g * g).sqrt();
    let mut out = Vec::with_capacity(12);
    for a in [-1.0, 1.0] {
        for b in [-g, g] {
            out.push(Vec3::new(0.0, a / n, b / n));
            out.push(Vec3::new(a / n, b / n, 0.0));
            out.push(Vec3::new(b / n, 0.0, a / n));
        }
    }
    out
}

/// Sampling lattice and weight of a sampled F_{h,γ,T} norm.
#[derive(Debug, Clone)]
pub struct NormSpec {
    pub kernel: Kernel,
    /// 0 or 1.
    pub gamma: u8,
    /// T, possibly infinite; sampled times must lie in [0, T).
    pub horizon: f64,
    pub frequencies: Vec<Vec3>,
    pub times: Vec<f64>,
}

impl NormSpec {
    /// Log-radial × icosahedral lattice: `n_radii` radii in [r_lo, r_hi].
    pub fn lattice(kernel: Kernel, gamma: u8, horizon: f64, r_lo: f64, r_hi: f64, n_radii: usize, times: Vec<f64>) -> Result<NormSpec> {
        if !(r_lo > 0.0 && r_hi >= r_lo) || n_radii == 0 {
            return Err(Error::InvalidInput("lattice radii need 0 < r_lo ≤ r_hi and at least one radius".into()));
        }
        let mut frequencies = Vec::new();
        for i in 0..n_radii {
            let f = if n_radii == 1 { 0.0 } else { i as f64 / (n_radii - 1) as f64 };
            let r = r_lo * (r_hi / r_lo).powf(f);
            frequencies.extend(icosahedron().into_iter().map(|d| d.scale(r)));
        }
        let spec = NormSpec { kernel, gamma, horizon, frequencies, times };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.gamma > 1 {
            return Err(Error::InvalidInput(format!("γ must be 0 or 1, got {}", self.gamma)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.times.is_empty() || self.frequencies.is_empty() {
            return Err(Error::InvalidInput("norm lattice is empty".into()));
        }
        if let Some(t) = self.times.iter().find(|t| !(**t >= 0.0 && **t < self.horizon)) {
            return Err(Error::InvalidInput(format!("sampled time {t} lies outside [0, T)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    pub gamma: u8,
    pub argmax_xi: [f64; 3],
    pub argmax_t: f64,
    pub frequencies: usize,
    pub times: usize,
}

/// Sampled sup of |v̂(ξ,t)| e^{γ√t|ξ|}/h(ξ); a lower bound of the true norm.
pub fn f_norm(field: &dyn Fn(&Vec3, f64) -> Result<CVec3>, spec: &NormSpec) -> Result<NormReport> {
    spec.validate()?;
    let mut best = NormReport {
        value: 0.0,
        gamma: spec.gamma,
        argmax_xi: [0.0; 3],
        argmax_t: 0.0,
        frequencies: spec.frequencies.len(),
        times: spec.times.len(),
    };
    for xi in &spec.frequencies {
        let inside = spec.kernel.support().contains(&xi.0);
        let h = if inside { spec.kernel.evaluate(&xi.0)? } else { 0.0 };
        for &t in &spec.times {
            let v = field(xi, t)?;
            if !inside || h == 0.0 {
                if v.norm() > 0.0 {
                    return Err(Error::ExteriorViolation(xi.0));
                }
                continue;
            }
            let ratio = v.norm() * (spec.gamma as f64 * t.sqrt() * xi.norm()).exp() / h;
            if ratio > best.value {
                best.value = ratio;
                best.argmax_xi = xi.0;
                best.argmax_t = t;
            }
        }
    }
    Ok(best)
}

/// |u|_{F_{h,γ,T}} and |u_λ|_{F_{h_λ,γ,T}} with û_λ(ξ,t) = λ^{-2}û(ξ/λ, λ²t) and
/// h_λ(ξ) = λ^{-2}h(ξ/λ), the second sampled on the image lattice (λξ, t/λ²).
pub fn scale_relation(field: &dyn Fn(&Vec3, f64) -> Result<CVec3>, spec: &NormSpec, lambda: f64) -> Result<(f64, f64)> {
    let direct = f_norm(field, spec)?;
    let scaled_field = |xi: &Vec3, t: f64| -> Result<CVec3> {
        Ok(field(&xi.scale(1.0 / lambda), lambda * lambda * t)?.scale_re(1.0 / (lambda * lambda)))
    };
    let image = NormSpec {
        kernel: rescale_limit_family(&spec.kernel, lambda)?,
        gamma: spec.gamma,
        horizon: spec.horizon / (lambda * lambda),
        frequencies: spec.frequencies.iter().map(|x| x.scale(lambda)).collect(),
        times: spec.times.iter().map(|t| t / (lambda * lambda)).collect(),
    };
    let scaled = f_norm(&scaled_field, &image)?;
    Ok((direct.value, scaled.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallDataTheorem {
    /// Global existence in F_{h,0,T}.
    Existence,
    /// Existence with spatial analyticity in F_{h,1,T}; the data norm is that of e^{νtΔ}u₀.
    Analyticity,
}

impl SmallDataTheorem {
    pub fn gamma(self) -> u8 {
        match self {
            SmallDataTheorem::Existence => 0,
            SmallDataTheorem::Analyticity => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityThresholds {
    pub nu: f64,
    /// ρ ∈ [0, 1), used by the analyticity theorem only.
    #[serde(default)]
    pub rho: f64,
}

/// A sampled norm together with the γ it was computed with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    pub value: f64,
    pub gamma: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub theorem: SmallDataTheorem,
    pub pass: bool,
    pub data_threshold: f64,
    pub forcing_threshold: f64,
    /// Threshold minus norm; negative when violated.
    pub data_margin: f64,
    pub forcing_margin: f64,
    /// Radius of the ball holding the solution.
    pub radius: f64,
}

/// Compare |u₀| and |(−Δ)^{-1}g| against the small-data thresholds.
pub fn check_theorem_thresholds(
    u0: NormValue,
    g: NormValue,
    th: &AdmissibilityThresholds,
    which: SmallDataTheorem,
) -> Result<ThresholdReport> {
    let gamma = which.gamma();
    if u0.gamma != gamma || g.gamma != gamma {
        return Err(Error::InvalidConfiguration(format!(
            "norms computed with γ = ({}, {}) but the {which:?} thresholds need γ = {gamma}",
            u0.gamma, g.gamma
        )));
    }
    if !(th.nu > 0.0) {
        return Err(Error::InvalidInput(format!("ν must be positive, got {}", th.nu)));
    }
    if !(u0.value >= 0.0 && g.value >= 0.0) {
        return Err(Error::InvalidInput("norms must be nonnegative".into()));
    }
    let factor = match which {
        SmallDataTheorem::Existence => 1.0,
        SmallDataTheorem::Analyticity => {
            if !(0.0..1.0).contains(&th.rho) {
                return Err(Error::InvalidInput(format!("ρ must lie in [0, 1), got {}", th.rho)));
            }
            th.rho * (-0.5 / th.nu).exp()
        }
    };
    let data_threshold = TWO_PI_3_2 * factor * th.nu / 2.0;
    let forcing_threshold = TWO_PI_3_2 * factor * th.nu * th.nu / 4.0;
    Ok(ThresholdReport {
        theorem: which,
        pass: u0.value <= data_threshold && g.value <= forcing_threshold,
        data_threshold,
        forcing_threshold,
        data_margin: data_threshold - u0.value,
        forcing_margin: forcing_threshold - g.value,
        radius: data_threshold,
    })
}

/// m(t) = a t^p e^{−r t^q}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplaceWeight {
    pub amplitude: f64,
    #[serde(default)]
    pub power: f64,
    #[serde(default)]
    pub rate: f64,
    #[serde(default = "one")]
    pub stretch: f64,
}

fn one() -> f64 {
    1.0
}

impl LaplaceWeight {
    pub const ZERO: LaplaceWeight = LaplaceWeight { amplitude: 0.0, power: 0.0, rate: 0.0, stretch: 1.0 };

    pub fn exponential(amplitude: f64, rate: f64) -> LaplaceWeight {
        LaplaceWeight { amplitude, power: 0.0, rate, stretch: 1.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * t.powf(self.power) * (-self.rate * t.powf(self.stretch)).exp()
    }

    fn validate(&self) -> Result<()> {
        let ok = self.amplitude.is_finite() && self.power.is_finite() && self.rate >= 0.0 && self.stretch > 0.0;
        if !ok {
            return Err(Error::InvalidWeights(format!("malformed weight {self:?}")));
        }
        if self.amplitude != 0.0 && self.rate == 0.0 {
            return Err(Error::InvalidWeights("weights need a positive decay rate".into()));
        }
        Ok(())
    }
}

/// v_j(x) = ∫₀^∞ e^{−s t|x|²} m_j(t) dt with s = `scale` (1/4 or 1 in the examples).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplaceField {
    pub weights: [LaplaceWeight; 3],
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    /// Largest |m_j(t)| / (t^{γ/2−1}e^{−t^β}) over the sampled t.
    pub max_ratio: f64,
    /// Whether ∫ t^{−3/2}|m_j| dt is finite for every component.
    pub integrable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub constant: f64,
    /// max |û(ξ)| / (c·h(ξ)) over the samples.
    pub max_ratio: f64,
    pub samples: usize,
    pub pass: bool,
}

fn quad() -> QuadOptions {
    QuadOptions { abs_tol: 1e-300, rel_tol: 1e-11, max_intervals: 2000 }
}

// ∫₀^∞ f over a few decades around the bulk, split at t = 1
fn integrate_half_line(f: impl Fn(f64) -> f64) -> Result<f64> {
    let a = integrate(&f, 0.0, 1.0, &quad()).require("weight integral on [0, 1]")?;
    let b = integrate_to_infinity(&f, 1.0, 1.0, &quad()).require("weight integral on [1, ∞)")?;
    Ok(a.value + b.value)
}

impl LaplaceField {
    /// The first example's scaling, v_j(x) = ∫ e^{−t|x|²/4} m_j(t) dt.
    pub fn quarter(weights: [LaplaceWeight; 3]) -> LaplaceField {
        LaplaceField { weights, scale: 0.25 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) {
            return Err(Error::InvalidWeights(format!("scale must be positive, got {}", self.scale)));
        }
        for w in &self.weights {
            w.validate()?;
        }
        Ok(())
    }

    /// v(x) by quadrature.
    pub fn value(&self, x: &Vec3) -> Result<Vec3> {
        self.validate()?;
        let r2 = x.norm_sq();
        let mut out = [0.0; 3];
        for (j, w) in self.weights.iter().enumerate() {
            if w.amplitude != 0.0 {
                out[j] = integrate_half_line(|t| (-self.scale * t * r2).exp() * w.eval(t))?;
            }
        }
        Ok(Vec3(out))
    }

    /// v̂(ξ) = ∫ (2st)^{−3/2} e^{−|ξ|²/(4st)} m_j(t) dt, real and even.
    pub fn v_hat(&self, xi: &Vec3) -> Result<CVec3> {
        self.validate()?;
        let k2 = xi.norm_sq();
        if k2 == 0.0 {
            return Err(Error::InvalidInput("v̂ is evaluated at ξ ≠ 0 only".into()));
        }
        let s = self.scale;
        let mut out = [0.0; 3];
        for (j, w) in self.weights.iter().enumerate() {
            if w.amplitude != 0.0 {
                let f = |t: f64| {
                    if t == 0.0 {
                        return 0.0;
                    }
                    (2.0 * s * t).powf(-1.5) * (-k2 / (4.0 * s * t)).exp() * w.eval(t)
                };
                // the Gaussian factor peaks near t ≈ |ξ|²/(6s)
                let peak = (k2 / (6.0 * s)).max(1e-300);
                let a = integrate(f, 0.0, peak, &quad()).require("spectral weight integral")?;
                let b = integrate_to_infinity(f, peak, peak.max(1.0), &quad()).require("spectral weight integral")?;
                out[j] = a.value + b.value;
            }
        }
        Ok(Vec3(out).to_complex())
    }

    /// û = Leray projection of v̂.
    pub fn u_hat(&self, xi: &Vec3) -> Result<CVec3> {
        leray_project(&self.v_hat(xi)?, xi)
    }

    /// Checks |m_j(t)| ≤ t^{γ/2−1}e^{−t^β} on a log grid of t ∈ [1e-12, 1e6];
    /// a violation is an invalid-weights error.
    pub fn check_weights(&self, beta: f64, gamma: f64) -> Result<WeightReport> {
        self.validate()?;
        let mut max_ratio = 0.0f64;
        for i in 0..=1800 {
            let t = 10f64.powf(-12.0 + i as f64 / 100.0);
            let bound = t.powf(gamma / 2.0 - 1.0) * (-t.powf(beta)).exp();
            for w in &self.weights {
                let m = w.eval(t).abs();
                if m == 0.0 {
                    continue;
                }
                let ratio = if bound > 0.0 { m / bound } else { f64::INFINITY };
                if ratio > 1.0 + 1e-12 {
                    return Err(Error::InvalidWeights(format!(
                        "|m(t)| = {m:e} exceeds t^(γ/2−1) e^(−t^β) = {bound:e} at t = {t:e}"
                    )));
                }
                max_ratio = max_ratio.max(ratio);
            }
        }
        // t^{p−3/2} is integrable at 0 iff p > 1/2
        let integrable = self.weights.iter().all(|w| w.amplitude == 0.0 || w.power > 0.5);
        Ok(WeightReport { max_ratio, integrable })
    }

    /// |û(ξ)| ≤ c·h(ξ) on the samples.
    pub fn domination(&self, kernel: &Kernel, constant: f64, samples: &[Vec3]) -> Result<DominationReport> {
        domination(&|xi| self.u_hat(xi), kernel, constant, samples)
    }
}

/// Domination constant for weights within t^{γ/2−1}e^{−t^β} under the quarter
/// scaling: |v̂_j| ≤ 2^{3/2}h_{3,β,γ}, so |û| ≤ √3·2^{3/2}h.
pub const LAPLACE_DOMINATION: f64 = 4.898979485566356;

/// Evaluates |û(ξ)| / (c h(ξ)) on samples.
pub fn domination(field: &dyn Fn(&Vec3) -> Result<CVec3>, kernel: &Kernel, constant: f64, samples: &[Vec3]) -> Result<DominationReport> {
    if !(constant > 0.0) {
        return Err(Error::InvalidInput(format!("domination constant must be positive, got {constant}")));
    }
    let mut max_ratio = 0.0f64;
    for xi in samples {
        let u = field(xi)?;
        let h = if kernel.support().contains(&xi.0) { kernel.evaluate(&xi.0)? } else { 0.0 };
        let r = if u.norm() == 0.0 { 0.0 } else { u.norm() / (constant * h) };
        max_ratio = max_ratio.max(r);
    }
    Ok(DominationReport { constant, max_ratio, samples: samples.len(), pass: max_ratio <= 1.0 })
}

/// A compactly supported Gevrey bump on [−ε, ε]³ whose transform decays like
/// exp(−|εξ|^β'), β' = (1+β)/2 > β; the constant against exp(−|εξ|^β) is fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub epsilon: f64,
    pub beta: f64,
    /// b(x) = exp(−(1−x²)^{−shape}) on (−1, 1).
    pub shape: f64,
    /// sup over the fit range of |B(w)| e^{|w|^β}, B the normalized 1D transform.
    pub fitted: f64,
    /// End of the fit range.
    pub fit_range: f64,
    mass: f64,
}

impl Mollifier {
    pub fn new(epsilon: f64, beta: f64) -> Result<Mollifier> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!("ε must be positive, got {epsilon}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Unsupported(format!(
                "a compactly supported mollifier cannot decay like exp(−|εξ|^β) with β = {beta}; need 0 < β < 1"
            )));
        }
        let bp = (1.0 + beta) / 2.0;
        let shape = bp / (1.0 - bp);
        let mut m = Mollifier { epsilon, beta, shape, fitted: 0.0, fit_range: 0.0, mass: 1.0 };
        m.mass = integrate(|x| m.bump(x), -1.0, 1.0, &quad()).require("bump mass")?.value;
        // fit until exp(−w^β) reaches 1e-10
        let w_max = (10.0 * 10f64.ln()).powf(1.0 / beta);
        let mut fitted = 1.0f64;
        let n = 400;
        for i in 1..=n {
            let w = w_max * i as f64 / n as f64;
            let b = m.profile_hat(w)?.abs();
            fitted = fitted.max(b * w.powf(beta).exp());
        }
        m.fitted = fitted;
        m.fit_range = w_max;
        Ok(m)
    }

    fn bump(&self, x: f64) -> f64 {
        let d = 1.0 - x * x;
        if d <= 0.0 {
            0.0
        } else {
            (-d.powf(-self.shape)).exp()
        }
    }

    /// B(w) = ∫ b(x)cos(wx) dx / ∫ b, so B(0) = 1.
    pub fn profile_hat(&self, w: f64) -> Result<f64> {
        let opts = QuadOptions { abs_tol: 1e-16, rel_tol: 1e-10, max_intervals: 4000 };
        // split at the oscillation period keeps the adaptive rule local
        let pieces = ((w.abs() / PI).ceil() as usize).clamp(1, 2000);
        let mut total = 0.0;
        for i in 0..pieces {
            let a = i as f64 / pieces as f64;
            let b = (i + 1) as f64 / pieces as f64;
            total += integrate(|x| self.bump(x) * (w * x).cos(), a, b, &opts).require("bump transform")?.value;
        }
        Ok(2.0 * total / self.mass)
    }

    /// k̂_ε(ξ) = (2π)^{−3/2} Π_j B(εξ_j).
    pub fn k_hat(&self, xi: &Vec3) -> Result<f64> {
        let mut p = 1.0 / TWO_PI_3_2;
        for j in 0..3 {
            p *= self.profile_hat(self.epsilon * xi[j])?;
        }
        Ok(p)
    }

    /// c(β,ε) in |k̂_ε(ξ)| ≤ c exp(−|εξ|^β).
    pub fn decay_constant(&self) -> f64 {
        self.fitted.powi(3) / TWO_PI_3_2
    }
}

/// Bounds of the base field: |v̂(ξ)| ≤ min(c₂|ξ|^{−2}, c_∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseFieldBound {
    pub c_inverse_square: f64,
    pub c_sup: f64,
}

/// u = k_ε ∗ v, û = (2π)^{3/2} k̂_ε v̂, dominated by c'·h_β^{(α)}, α = ε^β.
#[derive(Clone)]
pub struct MollifiedField {
    pub mollifier: Mollifier,
    pub bound: BaseFieldBound,
    base: Arc<dyn Fn(&Vec3) -> Result<CVec3> + Send + Sync>,
}

impl std::fmt::Debug for MollifiedField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MollifiedField").field("mollifier", &self.mollifier).field("bound", &self.bound).finish()
    }
}

/// Mollify a divergence-free base field after checking its bound on `checks`.
pub fn mollified_field(
    base: Arc<dyn Fn(&Vec3) -> Result<CVec3> + Send + Sync>,
    bound: BaseFieldBound,
    checks: &[Vec3],
    epsilon: f64,
    beta: f64,
) -> Result<MollifiedField> {
    if !(bound.c_inverse_square > 0.0 && bound.c_sup > 0.0) {
        return Err(Error::InvalidBaseField("bound constants must be positive".into()));
    }
    for xi in checks {
        let v = base(xi)?;
        let allowed = (bound.c_inverse_square / xi.norm_sq()).min(bound.c_sup);
        if v.norm() > allowed * (1.0 + 1e-12) {
            return Err(Error::InvalidBaseField(format!("|v̂| = {} > {allowed} at ξ = {:?}", v.norm(), xi.0)));
        }
        if v.dot_real(xi).norm() > 1e-10 * v.norm() * xi.norm() {
            return Err(Error::InvalidBaseField(format!("base field is not divergence-free at ξ = {:?}", xi.0)));
        }
    }
    let mollifier = Mollifier::new(epsilon, beta)?;
    Ok(MollifiedField { mollifier, bound, base })
}

impl MollifiedField {
    pub fn u_hat(&self, xi: &Vec3) -> Result<CVec3> {
        let v = (self.base)(xi)?;
        if v == CVec3::ZERO {
            return Ok(v);
        }
        Ok(v.scale_re(TWO_PI_3_2 * self.mollifier.k_hat(xi)?))
    }

    /// h_β^{(α)}(ξ) = |ξ|^{β−2}e^{−α|ξ|^β} with α = ε^β.
    pub fn kernel(&self) -> Result<Kernel> {
        let m = &self.mollifier;
        Kernel::riesz_exp(1.0, m.epsilon.powf(m.beta), m.beta)
    }

    /// c' = c₁³ c₂^{1−β/2} c_∞^{β/2}, from sup_r min(c₂r^{−β}, c_∞r^{2−β}).
    pub fn constant(&self) -> f64 {
        let b = self.mollifier.beta;
        self.mollifier.fitted.powi(3) * self.bound.c_inverse_square.powf(1.0 - b / 2.0) * self.bound.c_sup.powf(b / 2.0)
    }

    pub fn domination(&self, samples: &[Vec3]) -> Result<DominationReport> {
        domination(&|xi| self.u_hat(xi), &self.kernel()?, self.constant(), samples)
    }
}

/// Periodic spectral grid: the unnormalized DFT of physical samples,
/// component-major, row-major (x slowest) within each component.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub dims: [usize; 3],
    /// Physical grid spacing per axis.
    pub spacing: [f64; 3],
    pub components: usize,
    pub data: Vec<Complex64>,
}

const GRID_MAGIC: &[u8; 4] = b"SPGR";
const GRID_VERSION: u32 = 1;

fn wrap(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

impl SpectralGrid {
    pub fn zeros(dims: [usize; 3], spacing: [f64; 3], components: usize) -> Result<SpectralGrid> {
        if dims.iter().any(|d| *d == 0) || components == 0 {
            return Err(Error::InvalidInput(format!("grid dims {dims:?} × {components} must be positive")));
        }
        if spacing.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidInput(format!("grid spacing {spacing:?} must be positive")));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(SpectralGrid { dims, spacing, components, data: vec![Complex64::new(0.0, 0.0); n * components] })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Angular frequency of mode (i, j, k); Nyquist indices map to +π/h.
    pub fn frequency(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let f = |idx: usize, d: usize| 2.0 * PI * wrap(idx, self.dims[d]) / (self.dims[d] as f64 * self.spacing[d]);
        Vec3::new(f(i, 0), f(j, 1), f(k, 2))
    }

    fn is_nyquist(&self, i: usize, j: usize, k: usize) -> bool {
        let nyq = |idx: usize, d: usize| self.dims[d] % 2 == 0 && idx == self.dims[d] / 2;
        nyq(i, 0) || nyq(j, 1) || nyq(k, 2)
    }

    fn mirror(&self, i: usize, j: usize, k: usize) -> usize {
        let m = |idx: usize, d: usize| (self.dims[d] - idx) % self.dims[d];
        self.index(m(i, 0), m(j, 1), m(k, 2))
    }

    /// Forward transform of real physical samples, one slice per component.
    pub fn from_physical(fields: &[Vec<f64>], dims: [usize; 3], spacing: [f64; 3]) -> Result<SpectralGrid> {
        let mut g = SpectralGrid::zeros(dims, spacing, fields.len())?;
        let n = g.len();
        for (c, f) in fields.iter().enumerate() {
            if f.len() != n {
                return Err(Error::InvalidInput(format!("component {c} has {} samples, grid needs {n}", f.len())));
            }
            let slot = g.component_mut(c);
            for (s, v) in slot.iter_mut().zip(f) {
                *s = Complex64::new(*v, 0.0);
            }
            fft3(slot, dims, false);
        }
        Ok(g)
    }

    /// Inverse transform; returns real parts per component.
    pub fn to_physical(&self) -> Result<Vec<Vec<f64>>> {
        self.check_hermitian()?;
        let mut out = Vec::with_capacity(self.components);
        for c in 0..self.components {
            let mut buf = self.component(c).to_vec();
            fft3(&mut buf, self.dims, true);
            out.push(buf.iter().map(|z| z.re).collect());
        }
        Ok(out)
    }

    /// X[−k] = conj X[k] to 1e-10 of the largest coefficient.
    pub fn check_hermitian(&self) -> Result<()> {
        let scale = self.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
        for c in 0..self.components {
            let d = self.component(c);
            for i in 0..self.dims[0] {
                for j in 0..self.dims[1] {
                    for k in 0..self.dims[2] {
                        let a = d[self.index(i, j, k)];
                        let b = d[self.mirror(i, j, k)];
                        if (a - b.conj()).norm() > tol {
                            return Err(Error::InvalidInput(format!(
                                "grid is not Hermitian at mode ({i}, {j}, {k}) of component {c}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&GRID_VERSION.to_le_bytes())?;
        for d in self.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&(self.components as u32).to_le_bytes())?;
        for h in self.spacing {
            w.write_all(&h.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for z in &self.data {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<SpectralGrid> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(Error::InvalidInput("not a spectral grid file".into()));
        }
        let mut u32s = [0u32; 5];
        for v in u32s.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        if u32s[0] != GRID_VERSION {
            return Err(Error::InvalidInput(format!("unsupported grid version {}", u32s[0])));
        }
        let mut spacing = [0.0; 3];
        for h in spacing.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *h = f64::from_le_bytes(b);
        }
        let dims = [u32s[1] as usize, u32s[2] as usize, u32s[3] as usize];
        let mut g = SpectralGrid::zeros(dims, spacing, u32s[4] as usize)?;
        let mut buf = vec![0u8; g.data.len() * 16];
        r.read_exact(&mut buf)?;
        for (z, chunk) in g.data.iter_mut().zip(buf.chunks_exact(16)) {
            let re = f64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(chunk[8..].try_into().expect("8 bytes"));
            *z = Complex64::new(re, im);
        }
        Ok(g)
    }
}

/// In-place 3D DFT; the inverse is normalized by 1/N.
pub fn fft3(data: &mut [Complex64], dims: [usize; 3], inverse: bool) {
    let mut planner = FftPlanner::new();
    let [n0, n1, n2] = dims;
    let plan = |n: usize, planner: &mut FftPlanner<f64>| {
        if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        }
    };
    let p2 = plan(n2, &mut planner);
    for row in data.chunks_exact_mut(n2) {
        p2.process(row);
    }
    let p1 = plan(n1, &mut planner);
    let mut line = vec![Complex64::new(0.0, 0.0); n1];
    for i in 0..n0 {
        for k in 0..n2 {
            for j in 0..n1 {
                line[j] = data[(i * n1 + j) * n2 + k];
            }
            p1.process(&mut line);
            for j in 0..n1 {
                data[(i * n1 + j) * n2 + k] = line[j];
            }
        }
    }
    let p0 = plan(n0, &mut planner);
    let mut line = vec![Complex64::new(0.0, 0.0); n0];
    for j in 0..n1 {
        for k in 0..n2 {
            for i in 0..n0 {
                line[i] = data[(i * n1 + j) * n2 + k];
            }
            p0.process(&mut line);
            for i in 0..n0 {
                data[(i * n1 + j) * n2 + k] = line[i];
            }
        }
    }
    if inverse {
        let s = 1.0 / (n0 * n1 * n2) as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }
}

/// p̂ from Δp = −∇·(u·∇u) + ∇·g on a periodic grid:
/// p̂ = −Σ_{jk} (ξ_jξ_k/|ξ|²)(u_ju_k)^ − iξ·ĝ/|ξ|².
/// Products are formed pointwise without dealiasing; the zero mode and
/// Nyquist planes of p̂ are set to zero.
pub fn pressure_from_velocity(u: &SpectralGrid, g: Option<&SpectralGrid>) -> Result<SpectralGrid> {
    if u.components != 3 {
        return Err(Error::InvalidInput(format!("velocity grid needs 3 components, has {}", u.components)));
    }
    u.check_hermitian()?;
    if let Some(g) = g {
        if g.dims != u.dims || g.components != 3 || g.spacing != u.spacing {
            return Err(Error::InvalidInput("forcing grid does not match the velocity grid".into()));
        }
        g.check_hermitian()?;
    }
    let phys = u.to_physical()?;
    let n = u.len();
    let mut out = SpectralGrid::zeros(u.dims, u.spacing, 1)?;
    let mut products = Vec::with_capacity(6);
    for a in 0..3 {
        for b in a..3 {
            let mut buf: Vec<Complex64> = (0..n).map(|p| Complex64::new(phys[a][p] * phys[b][p], 0.0)).collect();
            fft3(&mut buf, u.dims, false);
            products.push((a, b, buf));
        }
    }
    let [n0, n1, n2] = u.dims;
    for i in 0..n0 {
        for j in 0..n1 {
            for k in 0..n2 {
                let idx = u.index(i, j, k);
                if (i, j, k) == (0, 0, 0) || u.is_nyquist(i, j, k) {
                    continue;
                }
                let xi = u.frequency(i, j, k);
                let k2 = xi.norm_sq();
                let mut p = Complex64::new(0.0, 0.0);
                for (a, b, buf) in &products {
                    let w = if a == b { 1.0 } else { 2.0 };
                    p -= buf[idx] * (w * xi[*a] * xi[*b] / k2);
                }
                if let Some(g) = g {
                    let mut div = Complex64::new(0.0, 0.0);
                    for c in 0..3 {
                        div += g.component(c)[idx] * xi[c];
                    }
                    p -= Complex64::new(0.0, 1.0) * div / k2;
                }
                out.data[idx] = p;
            }
        }
    }
    Ok(out)
}

/// One sample (s, t, ξ, η) of the analyticity inequality, 0 ≤ s ≤ t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalitySample {
    pub s: f64,
    pub t: f64,
    pub xi: [f64; 3],
    pub eta: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub samples: u64,
    pub violations: u64,
    /// Largest log(lhs) − log(rhs); ≤ 0 when the inequality holds.
    pub max_log_excess: f64,
    pub worst: Option<InequalitySample>,
}

/// exp{−νs|ξ|² − √(t−s)|ξ−η| − √(t−s)|η|} ≤ e^{1/(2ν)} e^{−√t|ξ|} e^{−νs|ξ|²/2},
/// compared in log form with a round-off allowance.
pub fn check_analyticity_inequality(samples: &[InequalitySample], nu: f64) -> Result<InequalityReport> {
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!("ν must be positive, got {nu}")));
    }
    let mut rep = InequalityReport { samples: samples.len() as u64, violations: 0, max_log_excess: f64::NEG_INFINITY, worst: None };
    for smp in samples {
        if !(smp.s >= 0.0 && smp.s <= smp.t) {
            return Err(Error::InvalidInput(format!("need 0 ≤ s ≤ t, got s = {}, t = {}", smp.s, smp.t)));
        }
        let xi = Vec3(smp.xi);
        let eta = Vec3(smp.eta);
        let k = xi.norm();
        let d = (smp.t - smp.s).sqrt();
        let lhs = -nu * smp.s * k * k - d * (xi - eta).norm() - d * eta.norm();
        let rhs = 0.5 / nu - smp.t.sqrt() * k - 0.5 * nu * smp.s * k * k;
        let excess = lhs - rhs;
        let slack = 1e-12 * (1.0 + lhs.abs() + rhs.abs());
        if excess > slack {
            rep.violations += 1;
        }
        if excess > rep.max_log_excess {
            rep.max_log_excess = excess;
            rep.worst = Some(*smp);
        }
    }
    Ok(rep)
}

/// Random samples with log-uniform magnitudes, s uniform on [0, t] and both
/// endpoints s = 0, s = t represented.
pub fn random_inequality_samples<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<InequalitySample> {
    let log_uniform = |rng: &mut R, lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi));
    (0..n)
        .map(|i| {
            let t = log_uniform(rng, -4.0, 2.0);
            let s = match i % 10 {
                0 => 0.0,
                1 => t,
                _ => t * rng.random::<f64>(),
            };
            let a: [f64; 3] = UnitSphere.sample(rng);
            let b: [f64; 3] = UnitSphere.sample(rng);
            let xi = Vec3(a).scale(log_uniform(rng, -3.0, 3.0));
            // η near ξ/2 and far from it
            let eta = if i % 3 == 0 { xi.scale(rng.random::<f64>()) } else { Vec3(b).scale(log_uniform(rng, -3.0, 3.0)) };
            InequalitySample { s, t, xi: xi.0, eta: eta.0 }
        })
        .collect()
}

/// One point of the complex-extension bound: |y| ≤ √t − δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionSample {
    pub xi: [f64; 3],
    pub y: [f64; 3],
    pub t: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub samples: u64,
    pub violations: u64,
}

/// For |û(ξ,t)| ≤ e^{−√t|ξ|}h(ξ), checks
/// e^{−(y·e_ξ+√t)|ξ|}e^{√t|ξ|}|û| ≤ e^{−(y·e_ξ+√t−δ)|ξ|}e^{−δ|ξ|}h ≤ e^{−δ|ξ|}h
/// in log form at the extreme |û| = e^{−√t|ξ|}h.
pub fn check_extension_chain(samples: &[ExtensionSample], kernel: &Kernel) -> Result<ChainReport> {
    let mut violations = 0;
    for smp in samples {
        let xi = Vec3(smp.xi);
        let y = Vec3(smp.y);
        let rt = smp.t.sqrt();
        if !(smp.delta >= 0.0 && y.norm() <= rt - smp.delta) {
            return Err(Error::InvalidInput(format!("extension sample needs |y| ≤ √t − δ: {smp:?}")));
        }
        let k = xi.norm();
        let e = xi.direction()?;
        let log_h = kernel.evaluate(&xi.0)?.ln();
        let first = -(y.dot(&e) + rt) * k + rt * k + (-rt * k + log_h);
        let second = -(y.dot(&e) + rt - smp.delta) * k - smp.delta * k + log_h;
        let third = -smp.delta * k + log_h;
        let tol = 1e-12 * (1.0 + first.abs() + third.abs());
        if first > second + tol || second > third + tol {
            violations += 1;
        }
    }
    Ok(ChainReport { samples: samples.len() as u64, violations })
}
