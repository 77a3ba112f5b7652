//! Majorizing kernels h with (h∗h)(ξ) ≤ B|ξ|^θ h(ξ) on the support W_h.
//!
//! A kernel is an expression tree: catalog leaves combined by toolkit nodes
//! (geometric means, tensor products, linear changes of variable, tilts).
//! Trees round-trip through the JSON form `{"kind", "params", "children"}`.

mod certify;
mod convolution;
mod descriptor;
mod table;

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};
use crate::vec3::Vec3;

pub use certify::{calibrate_constant, certify, standard_sample_set, CertificationEntry, CertificationReport};
pub use convolution::{riesz_convolution_constant, riesz_convolution_integral, self_convolution, QuadratureSpec};
pub use descriptor::KernelDescriptor;
pub use table::RadialTable;

/// The two interpolated families between the Riesz-exponential kernel and
/// the Cauchy kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Product-Cauchy denominator.
    V,
    /// Radial (1+|ξ|²) denominator.
    Vi,
}

/// Non-negative sub-additive weights ψ for exponential tilting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Tilt {
    /// ψ(ξ) = a|ξ|^β with a ≥ 0, 0 < β ≤ 1.
    NormPower { a: f64, beta: f64 },
    /// ψ(ξ) = |w·ξ|.
    AbsLinear { w: Vec<f64> },
}

impl Tilt {
    pub fn value(&self, xi: &[f64]) -> f64 {
        match self {
            Tilt::NormPower { a, beta } => a * norm(xi).powf(*beta),
            Tilt::AbsLinear { w } => w.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>().abs(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Tilt::NormPower { a, beta } => {
                if !(*a >= 0.0 && a.is_finite()) || !(*beta > 0.0 && *beta <= 1.0) {
                    return Err(Error::InvalidCombination(format!(
                        "ψ = a|ξ|^β is sub-additive only for a ≥ 0, 0 < β ≤ 1 (a={a}, β={beta})"
                    )));
                }
            }
            Tilt::AbsLinear { w } => {
                if w.len() != dim || w.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidCombination(format!(
                        "tilt vector must have {dim} finite components"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Description of the support W_h.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Support {
    All { dim: usize },
    AllNonzero { dim: usize },
    HalfLinePositive,
    Product { factors: Vec<Support> },
    Preimage { inner: Box<Support>, matrix: Vec<Vec<f64>> },
    Intersection { parts: Vec<Support> },
}

impl Support {
    pub fn dim(&self) -> usize {
        match self {
            Support::All { dim } | Support::AllNonzero { dim } => *dim,
            Support::HalfLinePositive => 1,
            Support::Product { factors } => factors.iter().map(Support::dim).sum(),
            Support::Preimage { inner, .. } => inner.dim(),
            Support::Intersection { parts } => parts[0].dim(),
        }
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        match self {
            Support::All { .. } => true,
            Support::AllNonzero { .. } => xi.iter().any(|&c| c != 0.0),
            Support::HalfLinePositive => xi[0] > 0.0,
            Support::Product { factors } => {
                let mut off = 0;
                factors.iter().all(|f| {
                    let d = f.dim();
                    let ok = f.contains(&xi[off..off + d]);
                    off += d;
                    ok
                })
            }
            Support::Preimage { inner, matrix } => inner.contains(&mat_vec(matrix, xi)),
            Support::Intersection { parts } => parts.iter().all(|p| p.contains(xi)),
        }
    }

    fn intersect(parts: Vec<Support>) -> Support {
        if parts.windows(2).all(|w| w[0] == w[1]) {
            parts.into_iter().next().expect("at least one part")
        } else {
            Support::Intersection { parts }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    Cauchy1d,
    CauchyProduct { n: usize },
    RadialCauchy { n: usize },
    RieszExp { c: f64, alpha: f64, beta: f64 },
    Interpolated { variant: Interpolation, theta: f64, alpha: f64, beta: f64, base: Box<Kernel> },
    BesselIntegral { n: usize, beta: f64, gamma: f64 },
    AngularWeighted { amplitude: f64, power: f64 },
    Riesz3d { c: f64 },
    BesselExp { alpha: f64 },
    HalfLineExp { alpha: f64 },
    GeometricMean { weights: Vec<f64>, children: Vec<Kernel> },
    TensorProduct { children: Vec<Kernel> },
    Affine { matrix: Vec<Vec<f64>>, det_abs: f64, op_norm: f64, factor: f64, scalar: Option<f64>, child: Box<Kernel> },
    Tilted { tilt: Tilt, child: Box<Kernel> },
    ExpShift { a: Vec<f64>, child: Box<Kernel> },
    PseudoMetric { a: f64, beta: f64, child: Box<Kernel> },
    Scaled { c: f64, child: Box<Kernel> },
}

/// Toolkit operations combining existing kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum ToolkitOp {
    /// Π h_j^{q_j} with q_j > 0, Σq_j = 1.
    GeometricMean { weights: Vec<f64> },
    /// Π h_j(ξ_j) over a partition of the coordinates.
    TensorProduct,
    /// |det A|·‖A‖^{−θ} h(Aξ).
    Affine { matrix: Vec<Vec<f64>> },
    /// e^{−ψ(ξ)} h(ξ).
    Tilt(Tilt),
    /// e^{a·ξ} h(ξ).
    ExpShift { a: Vec<f64> },
    /// e^{−a ρ(ξ₀, ξ)} h(ξ) with ρ(ξ₀, ξ) = |ξ − ξ₀|^β.
    PseudoMetric { a: f64, beta: f64, origin: Vec<f64> },
    /// c·h(ξ), constant c·B.
    Scale { c: f64 },
}

#[derive(Debug, Clone)]
pub struct Kernel {
    node: Node,
    dim: usize,
    exponent: f64,
    support: Support,
    calibrated: Arc<OnceLock<Result<f64>>>,
    table: Arc<OnceLock<Option<RadialTable>>>,
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn check_pos(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("β must lie in [0, 1], got {beta}")))
    }
}

impl Kernel {
    fn leaf(node: Node, dim: usize, exponent: f64, support: Support) -> Kernel {
        Kernel {
            node,
            dim,
            exponent,
            support,
            calibrated: Arc::new(OnceLock::new()),
            table: Arc::new(OnceLock::new()),
        }
    }

    /// 1/(2π(1+ξ²)) on R.
    pub fn cauchy1d() -> Kernel {
        Kernel::leaf(Node::Cauchy1d, 1, 0.0, Support::All { dim: 1 })
    }

    /// (2π)^{−n} Π (1+ξ_j²)^{−1} on Rⁿ.
    pub fn cauchy_product(n: usize) -> Result<Kernel> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("cauchy_product needs n > 1, got {n}")));
        }
        Ok(Kernel::leaf(Node::CauchyProduct { n }, n, 0.0, Support::All { dim: n }))
    }

    /// Γ((n+1)/2) / (2π^{(n+1)/2} (1+|ξ|²)^{(n+1)/2}) on Rⁿ.
    pub fn radial_cauchy(n: usize) -> Result<Kernel> {
        if n < 1 {
            return Err(Error::InvalidInput("radial_cauchy needs n ≥ 1".into()));
        }
        Ok(Kernel::leaf(Node::RadialCauchy { n }, n, 0.0, Support::All { dim: n }))
    }

    /// c|ξ|^{β−2} e^{−α|ξ|^β} on R³∖{0}.
    pub fn riesz_exp(c: f64, alpha: f64, beta: f64) -> Result<Kernel> {
        check_pos("c", c)?;
        check_pos("α", alpha)?;
        check_beta(beta)?;
        Ok(Kernel::leaf(Node::RieszExp { c, alpha, beta }, 3, 1.0, Support::AllNonzero { dim: 3 }))
    }

    /// Interpolated kernels of exponent θ ∈ (0, 1) on R³∖{0}.
    pub fn interpolated(variant: Interpolation, theta: f64, alpha: f64, beta: f64) -> Result<Kernel> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidInput(format!("θ must lie in (0, 1), got {theta}")));
        }
        let base = Box::new(Kernel::riesz_exp(1.0, alpha, beta)?);
        Ok(Kernel::leaf(
            Node::Interpolated { variant, theta, alpha, beta, base },
            3,
            theta,
            Support::AllNonzero { dim: 3 },
        ))
    }

    /// ∫_{t>0} t^{(γ−n)/2−1} e^{−t^β − |ξ|²/t} dt on Rⁿ∖{0}.
    pub fn bessel_integral(n: usize, beta: f64, gamma: f64) -> Result<Kernel> {
        if n < 3 {
            return Err(Error::InvalidInput(format!("bessel_integral needs n ≥ 3, got {n}")));
        }
        check_beta(beta)?;
        if !(gamma >= 1.0 && gamma <= 1.0 + beta) {
            return Err(Error::InvalidInput(format!("γ must lie in [1, 1+β], got γ={gamma}, β={beta}")));
        }
        Ok(Kernel::leaf(Node::BesselIntegral { n, beta, gamma }, n, 1.0, Support::AllNonzero { dim: n }))
    }

    /// G(ξ/|ξ|)/|ξ|² with G(ω) = 1 + a Σ_j (1 − ω_j²)^{−p}, unbounded at the six axis points.
    pub fn angular_weighted(amplitude: f64, power: f64) -> Result<Kernel> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidInput(format!("amplitude must be ≥ 0, got {amplitude}")));
        }
        if !(power > 0.0 && power < 0.5) {
            return Err(Error::InvalidInput(format!("angular power must lie in (0, 1/2), got {power}")));
        }
        Ok(Kernel::leaf(
            Node::AngularWeighted { amplitude, power },
            3,
            1.0,
            Support::AllNonzero { dim: 3 },
        ))
    }

    /// Standardized c/|ξ|² with c fixed by the measured convolution constant.
    pub fn riesz3d() -> Kernel {
        Kernel::riesz3d_with(1.0 / riesz_convolution_constant()).expect("positive constant")
    }

    pub fn riesz3d_with(c: f64) -> Result<Kernel> {
        check_pos("c", c)?;
        Ok(Kernel::leaf(Node::Riesz3d { c }, 3, 1.0, Support::AllNonzero { dim: 3 }))
    }

    /// α e^{−α|ξ|}/(2π|ξ|) on R³∖{0}.
    pub fn bessel_exp(alpha: f64) -> Result<Kernel> {
        check_pos("α", alpha)?;
        Ok(Kernel::leaf(Node::BesselExp { alpha }, 3, 1.0, Support::AllNonzero { dim: 3 }))
    }

    /// e^{−αξ} on (0, ∞).
    pub fn half_line_exp(alpha: f64) -> Result<Kernel> {
        check_pos("α", alpha)?;
        Ok(Kernel::leaf(Node::HalfLineExp { alpha }, 1, 1.0, Support::HalfLinePositive))
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    /// True for kernels that depend on ξ only through |ξ| (and n ≥ 2).
    pub fn is_radial(&self) -> bool {
        match &self.node {
            Node::RadialCauchy { n } => *n >= 2,
            Node::RieszExp { .. }
            | Node::BesselIntegral { .. }
            | Node::Riesz3d { .. }
            | Node::BesselExp { .. } => true,
            Node::Interpolated { variant, .. } => *variant == Interpolation::Vi,
            Node::GeometricMean { children, .. } => children.iter().all(Kernel::is_radial),
            Node::Affine { scalar, child, .. } => scalar.is_some() && child.is_radial(),
            Node::Tilted { tilt, child } => matches!(tilt, Tilt::NormPower { .. }) && child.is_radial(),
            Node::PseudoMetric { child, .. } | Node::Scaled { child, .. } => child.is_radial(),
            _ => false,
        }
    }

    /// Majorizing constant B.
    ///
    /// Closed-form where the toolkit or an exact identity gives it; otherwise
    /// the numerically calibrated sup of the ratio on a lattice, computed once.
    pub fn constant(&self) -> Result<f64> {
        match &self.node {
            Node::Cauchy1d
            | Node::CauchyProduct { .. }
            | Node::RadialCauchy { .. }
            | Node::BesselExp { .. }
            | Node::HalfLineExp { .. } => Ok(1.0),
            Node::Riesz3d { c } => Ok(c * riesz_convolution_constant()),
            Node::RieszExp { c, alpha, beta } => {
                if *beta == 1.0 {
                    Ok(c * 2.0 * PI / alpha)
                } else if *beta == 0.0 {
                    Ok(c * (-alpha).exp() * riesz_convolution_constant())
                } else {
                    self.calibrated_constant()
                }
            }
            Node::Interpolated { variant, theta, base, .. } => {
                let b = base.constant()?.powf(*theta);
                Ok(match variant {
                    Interpolation::V => b,
                    Interpolation::Vi => b * (2.0 * PI * PI).powf(1.0 - theta),
                })
            }
            Node::BesselIntegral { .. } | Node::AngularWeighted { .. } => self.calibrated_constant(),
            Node::GeometricMean { weights, children } => {
                let mut b = 1.0;
                for (q, k) in weights.iter().zip(children) {
                    b *= k.constant()?.powf(*q);
                }
                Ok(b)
            }
            Node::TensorProduct { children } => {
                let mut b = 1.0;
                for k in children {
                    b *= k.constant()?;
                }
                Ok(b)
            }
            Node::Affine { child, .. }
            | Node::Tilted { child, .. }
            | Node::ExpShift { child, .. }
            | Node::PseudoMetric { child, .. } => child.constant(),
            Node::Scaled { c, child } => Ok(c * child.constant()?),
        }
    }

    fn calibrated_constant(&self) -> Result<f64> {
        self.calibrated.get_or_init(|| calibrate_constant(self)).clone()
    }

    /// Divide by B so the majorizing inequality holds with constant 1.
    pub fn standardized(&self) -> Result<Kernel> {
        let b = self.constant()?;
        combine(ToolkitOp::Scale { c: 1.0 / b }, vec![self.clone()])
    }

    /// B when h∗h = B|ξ|^θ h holds identically, known in closed form.
    pub fn equality_constant(&self) -> Option<f64> {
        match &self.node {
            Node::Riesz3d { .. } | Node::BesselExp { .. } | Node::HalfLineExp { .. } => self.constant().ok(),
            Node::RieszExp { beta, .. } if *beta == 0.0 || *beta == 1.0 => self.constant().ok(),
            Node::Scaled { c, child } => child.equality_constant().map(|b| c * b),
            Node::Affine { scalar: Some(_), child, .. } => child.equality_constant(),
            _ => None,
        }
    }

    /// True when h(λξ) = λ^{-2}h(ξ) for all λ > 0.
    pub fn is_scale_invariant(&self) -> bool {
        match &self.node {
            Node::Riesz3d { .. } => true,
            Node::Scaled { child, .. } => child.is_scale_invariant(),
            _ => false,
        }
    }

    /// h(ξ); zero outside W_h.
    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "kernel of dimension {} evaluated at a {}-vector",
                self.dim,
                xi.len()
            )));
        }
        if xi.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite frequency {xi:?}")));
        }
        if !self.support.contains(xi) {
            return Ok(0.0);
        }
        self.eval_in_support(xi)
    }

    pub fn eval3(&self, xi: &Vec3) -> Result<f64> {
        self.evaluate(&xi.0)
    }

    /// Radial profile r ↦ h(r e) for radial kernels.
    pub fn radial_profile(&self, r: f64) -> Option<Result<f64>> {
        if !self.is_radial() {
            return None;
        }
        if !(r > 0.0) {
            return Some(Ok(if self.support.contains(&vec![0.0; self.dim]) {
                self.eval_in_support(&vec![0.0; self.dim]).unwrap_or(f64::NAN)
            } else {
                0.0
            }));
        }
        Some(self.radial_value(r))
    }

    fn radial_value(&self, r: f64) -> Result<f64> {
        Ok(match &self.node {
            Node::RadialCauchy { n } => radial_cauchy_value(*n, r),
            Node::RieszExp { c, alpha, beta } => c * r.powf(beta - 2.0) * (-alpha * r.powf(*beta)).exp(),
            Node::Interpolated { theta, alpha, beta, .. } => {
                r.powf(theta * (beta - 2.0)) * (-alpha * theta * r.powf(*beta)).exp()
                    / (1.0 + r * r).powf(2.0 * (1.0 - theta))
            }
            Node::BesselIntegral { n, beta, gamma } => bessel_integral_value(*n, *beta, *gamma, r)?,
            Node::Riesz3d { c } => c / (r * r),
            Node::BesselExp { alpha } => alpha * (-alpha * r).exp() / (2.0 * PI * r),
            Node::GeometricMean { weights, children } => {
                let mut log = 0.0;
                for (q, k) in weights.iter().zip(children) {
                    let v = k.radial_value(r)?;
                    if v == 0.0 {
                        return Ok(0.0);
                    }
                    log += q * v.ln();
                }
                log.exp()
            }
            Node::Affine { factor, scalar, child, .. } => {
                factor * child.radial_value(r * scalar.expect("radial affine is scalar").abs())?
            }
            Node::Tilted { tilt, child } => {
                let Tilt::NormPower { a, beta } = tilt else { unreachable!("radial tilt") };
                (-a * r.powf(*beta)).exp() * child.radial_value(r)?
            }
            Node::PseudoMetric { a, beta, child } => (-a * r.powf(*beta)).exp() * child.radial_value(r)?,
            Node::Scaled { c, child } => c * child.radial_value(r)?,
            _ => unreachable!("non-radial kernel"),
        })
    }

    /// Directions d such that h is singular along the line R·d.
    pub(crate) fn singular_axes(&self) -> Vec<[f64; 3]> {
        match &self.node {
            Node::AngularWeighted { .. } => vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            Node::Tilted { child, .. }
            | Node::PseudoMetric { child, .. }
            | Node::Scaled { child, .. }
            | Node::ExpShift { child, .. } => child.singular_axes(),
            Node::GeometricMean { children, .. } => children.iter().flat_map(|k| k.singular_axes()).collect(),
            _ => Vec::new(),
        }
    }

    /// Radial profile through the interpolation table where one exists.
    ///
    /// Only the Bessel-integral family is tabulated; its direct evaluation is
    /// itself a quadrature.
    pub(crate) fn radial_fast(&self, r: f64) -> f64 {
        match &self.node {
            Node::BesselIntegral { n, beta, gamma } => {
                let table = self.table.get_or_init(|| {
                    RadialTable::build(|r| bessel_integral_value(*n, *beta, *gamma, r), 1e-10, 1e5, 9000).ok()
                });
                if let Some(v) = table.as_ref().and_then(|t| t.lookup(r)) {
                    return v;
                }
                bessel_integral_value(*n, *beta, *gamma, r).unwrap_or(f64::NAN)
            }
            Node::GeometricMean { weights, children } => {
                let mut log = 0.0;
                for (q, k) in weights.iter().zip(children) {
                    let v = k.radial_fast(r);
                    if v == 0.0 {
                        return 0.0;
                    }
                    log += q * v.ln();
                }
                log.exp()
            }
            Node::Affine { factor, scalar, child, .. } => factor * child.radial_fast(r * scalar.unwrap_or(1.0).abs()),
            Node::Tilted { child, .. } | Node::PseudoMetric { child, .. } | Node::Scaled { child, .. } => {
                let base = child.radial_fast(r);
                let own = self.radial_value_shallow(r);
                base * own
            }
            _ => self.radial_value(r).unwrap_or(f64::NAN),
        }
    }

    // the multiplicative factor a wrapper node contributes at radius r
    fn radial_value_shallow(&self, r: f64) -> f64 {
        match &self.node {
            Node::Tilted { tilt: Tilt::NormPower { a, beta }, .. } => (-a * r.powf(*beta)).exp(),
            Node::PseudoMetric { a, beta, .. } => (-a * r.powf(*beta)).exp(),
            Node::Scaled { c, .. } => *c,
            _ => 1.0,
        }
    }

    /// Evaluation for callers that already validated ξ; NaN signals a failed inner quadrature.
    pub(crate) fn eval_fast(&self, xi: &[f64]) -> f64 {
        if !self.support.contains(xi) {
            return 0.0;
        }
        if self.is_radial() {
            return self.radial_fast(norm(xi));
        }
        self.eval_in_support(xi).unwrap_or(f64::NAN)
    }

    fn eval_in_support(&self, xi: &[f64]) -> Result<f64> {
        if self.is_radial() && !matches!(self.node, Node::RadialCauchy { .. }) {
            return self.radial_value(norm(xi));
        }
        Ok(match &self.node {
            Node::Cauchy1d => 1.0 / (2.0 * PI * (1.0 + xi[0] * xi[0])),
            Node::CauchyProduct { n } => {
                xi.iter().map(|x| 1.0 / (1.0 + x * x)).product::<f64>() / (2.0 * PI).powi(*n as i32)
            }
            Node::RadialCauchy { n } => radial_cauchy_value(*n, norm(xi)),
            Node::Interpolated { theta, alpha, beta, .. } => {
                // variant vi is radial and handled above
                let r = norm(xi);
                let cauchy: f64 = xi.iter().map(|x| (1.0 + x * x).powf(1.0 - theta)).product();
                r.powf(theta * (beta - 2.0)) * (-alpha * theta * r.powf(*beta)).exp()
                    / ((2.0 * PI).powf(3.0 * (1.0 - theta)) * cauchy)
            }
            Node::AngularWeighted { amplitude, power } => {
                let r2: f64 = xi.iter().map(|c| c * c).sum();
                let mut g = 1.0;
                for c in xi {
                    let s = (1.0 - c * c / r2).max(f64::MIN_POSITIVE);
                    g += amplitude * s.powf(-power);
                }
                g / r2
            }
            Node::HalfLineExp { alpha } => (-alpha * xi[0]).exp(),
            Node::GeometricMean { weights, children } => {
                let mut log = 0.0;
                for (q, k) in weights.iter().zip(children) {
                    let v = k.eval_in_support(xi)?;
                    log += q * v.ln();
                }
                log.exp()
            }
            Node::TensorProduct { children } => {
                let mut off = 0;
                let mut v = 1.0;
                for k in children {
                    v *= k.eval_in_support(&xi[off..off + k.dim])?;
                    off += k.dim;
                }
                v
            }
            Node::Affine { matrix, factor, child, .. } => factor * child.eval_in_support(&mat_vec(matrix, xi))?,
            Node::Tilted { tilt, child } => (-tilt.value(xi)).exp() * child.eval_in_support(xi)?,
            Node::ExpShift { a, child } => {
                let s: f64 = a.iter().zip(xi).map(|(a, b)| a * b).sum();
                s.exp() * child.eval_in_support(xi)?
            }
            Node::PseudoMetric { a, beta, child } => (-a * norm(xi).powf(*beta)).exp() * child.eval_in_support(xi)?,
            Node::Scaled { c, child } => c * child.eval_in_support(xi)?,
            Node::RieszExp { .. } | Node::BesselIntegral { .. } | Node::Riesz3d { .. } | Node::BesselExp { .. } => {
                unreachable!("radial leaves are handled above")
            }
        })
    }
}

fn radial_cauchy_value(n: usize, r: f64) -> f64 {
    let p = (n as f64 + 1.0) / 2.0;
    statrs::function::gamma::gamma(p) / (2.0 * PI.powf(p) * (1.0 + r * r).powf(p))
}

/// ∫_{t>0} t^{(γ−n)/2−1} e^{−t^β − r²/t} dt by quadrature in x = ln t, split at t = 1.
pub fn bessel_integral_value(n: usize, beta: f64, gamma: f64, r: f64) -> Result<f64> {
    let p = (gamma - n as f64) / 2.0;
    let r2 = r * r;
    let f = |x: f64| {
        let v = (p * x - (beta * x).exp() - r2 * (-x).exp()).exp();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let peak = if r2 > 0.0 { r2.ln() } else { 0.0 };
    let lo = peak.min(0.0) - 1.0;
    let hi = peak.max(0.0) + 1.0;
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-12, max_intervals: 400 };
    let mid = integrate(f, lo, 0.0, &opts).plus(&integrate(f, 0.0, hi, &opts));
    let left = integrate_to_infinity(|y| f(lo - y), 0.0, 1.0, &opts);
    let right = integrate_to_infinity(|y| f(hi + y), 0.0, 1.0, &opts);
    let total = mid.plus(&left).plus(&right);
    // deep in the tail the pieces stop converging in the relative sense while
    // the total is already far below the requested accuracy
    if total.value.is_finite() && total.error <= 1e-9 * total.value.abs() {
        return Ok(total.value);
    }
    Ok(total.require("bessel integral kernel")?.value)
}

/// Build a toolkit combination, checking the clause preconditions.
pub fn combine(op: ToolkitOp, children: Vec<Kernel>) -> Result<Kernel> {
    let one = |children: Vec<Kernel>| -> Result<Kernel> {
        let mut it = children.into_iter();
        match (it.next(), it.next()) {
            (Some(k), None) => Ok(k),
            _ => Err(Error::InvalidCombination("operation takes exactly one kernel".into())),
        }
    };
    match op {
        ToolkitOp::GeometricMean { weights } => {
            if children.is_empty() || weights.len() != children.len() {
                return Err(Error::InvalidCombination(format!(
                    "{} weights for {} kernels",
                    weights.len(),
                    children.len()
                )));
            }
            if weights.iter().any(|q| !(*q > 0.0)) {
                return Err(Error::InvalidCombination(format!("weights must be positive: {weights:?}")));
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidCombination(format!("weights sum to {total}, not 1")));
            }
            let dim = children[0].dim;
            if children.iter().any(|k| k.dim != dim) {
                return Err(Error::InvalidCombination("geometric mean of kernels of different dimension".into()));
            }
            let exponent = weights.iter().zip(&children).map(|(q, k)| q * k.exponent).sum();
            let support = Support::intersect(children.iter().map(|k| k.support.clone()).collect());
            Ok(Kernel::leaf(Node::GeometricMean { weights, children }, dim, exponent, support))
        }
        ToolkitOp::TensorProduct => {
            if children.len() < 2 {
                return Err(Error::InvalidCombination("tensor product needs at least two kernels".into()));
            }
            let dim = children.iter().map(|k| k.dim).sum();
            let exponent = children.iter().map(|k| k.exponent).sum();
            let support = Support::Product { factors: children.iter().map(|k| k.support.clone()).collect() };
            Ok(Kernel::leaf(Node::TensorProduct { children }, dim, exponent, support))
        }
        ToolkitOp::Affine { matrix } => {
            let child = one(children)?;
            let n = child.dim;
            if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
                return Err(Error::InvalidCombination(format!("matrix must be {n}×{n}")));
            }
            if matrix.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidCombination("matrix has non-finite entries".into()));
            }
            if child.exponent < 0.0 {
                return Err(Error::InvalidCombination("linear change of variable needs θ ≥ 0".into()));
            }
            let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
            let det = m.determinant();
            let op_norm = m.clone().svd(false, false).singular_values.max();
            if !(det.abs() > 1e-12 * op_norm.powi(n as i32)) {
                return Err(Error::InvalidCombination(format!("matrix is singular (det = {det:e})")));
            }
            let factor = det.abs() * op_norm.powf(-child.exponent);
            let scalar = scalar_multiple(&matrix);
            let support = Support::Preimage { inner: Box::new(child.support.clone()), matrix: matrix.clone() };
            let (dim, exponent) = (n, child.exponent);
            Ok(Kernel::leaf(
                Node::Affine { matrix, det_abs: det.abs(), op_norm, factor, scalar, child: Box::new(child) },
                dim,
                exponent,
                support,
            ))
        }
        ToolkitOp::Tilt(tilt) => {
            let child = one(children)?;
            tilt.validate(child.dim)?;
            let (dim, exponent, support) = (child.dim, child.exponent, child.support.clone());
            Ok(Kernel::leaf(Node::Tilted { tilt, child: Box::new(child) }, dim, exponent, support))
        }
        ToolkitOp::ExpShift { a } => {
            let child = one(children)?;
            if a.len() != child.dim || a.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidCombination(format!("shift vector must have {} finite components", child.dim)));
            }
            let (dim, exponent, support) = (child.dim, child.exponent, child.support.clone());
            Ok(Kernel::leaf(Node::ExpShift { a, child: Box::new(child) }, dim, exponent, support))
        }
        ToolkitOp::PseudoMetric { a, beta, origin } => {
            let child = one(children)?;
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidCombination(format!("pseudo-metric weight a must be positive, got {a}")));
            }
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::InvalidCombination(format!("|ξ−ξ₀|^β is a metric only for 0 < β ≤ 1, got {beta}")));
            }
            if origin.len() != child.dim {
                return Err(Error::InvalidCombination(format!("origin must have {} components", child.dim)));
            }
            if origin.iter().any(|&c| c != 0.0) {
                // e^{−aρ(ξ₀,·)} is only sub-multiplicative along η + (ξ−η) = ξ when ξ₀ = 0
                return Err(Error::InvalidCombination(
                    "pseudo-metric tilt requires ξ₀ = 0; other base points break sub-additivity".into(),
                ));
            }
            let (dim, exponent, support) = (child.dim, child.exponent, child.support.clone());
            Ok(Kernel::leaf(Node::PseudoMetric { a, beta, child: Box::new(child) }, dim, exponent, support))
        }
        ToolkitOp::Scale { c } => {
            let child = one(children)?;
            check_pos("scale", c).map_err(|e| Error::InvalidCombination(e.to_string()))?;
            let (dim, exponent, support) = (child.dim, child.exponent, child.support.clone());
            Ok(Kernel::leaf(Node::Scaled { c, child: Box::new(child) }, dim, exponent, support))
        }
    }
}

fn scalar_multiple(m: &[Vec<f64>]) -> Option<f64> {
    let s = m[0][0];
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if (i == j && v != s) || (i != j && v != 0.0) {
                return None;
            }
        }
    }
    Some(s)
}

/// h_λ(ξ) = λ^{−2} h(ξ/λ), the rescaled family of an exponent-one kernel in R³.
pub fn rescale_limit_family(kernel: &Kernel, lambda: f64) -> Result<Kernel> {
    if kernel.exponent != 1.0 {
        return Err(Error::Unsupported(format!(
            "rescaling family needs exponent 1, kernel has {}",
            kernel.exponent
        )));
    }
    if kernel.dim != 3 {
        return Err(Error::Unsupported("rescaling family is defined in three dimensions".into()));
    }
    check_pos("λ", lambda)?;
    let s = 1.0 / lambda;
    let matrix = (0..3).map(|i| (0..3).map(|j| if i == j { s } else { 0.0 }).collect()).collect();
    combine(ToolkitOp::Affine { matrix }, vec![kernel.clone()])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        ((a - b) / b).abs() <= tol
    }

    #[test]
    fn catalog_reference_values() {
        let h = Kernel::riesz_exp(1.0, 1.0, 1.0).unwrap();
        assert!(close(h.evaluate(&[0.0, 1.0, 0.0]).unwrap(), (-1f64).exp(), 1e-15));
        let c = Kernel::cauchy1d();
        assert!(close(c.evaluate(&[0.0]).unwrap(), 1.0 / (2.0 * PI), 1e-15));
        assert_eq!(h.evaluate(&[0.0; 3]).unwrap(), 0.0);
        assert_eq!(Kernel::riesz3d().evaluate(&[0.0; 3]).unwrap(), 0.0);
        assert!(h.evaluate(&[f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(Kernel::riesz_exp(1.0, 1.0, 1.5).is_err());
        assert!(Kernel::riesz_exp(1.0, 0.0, 0.5).is_err());
        assert!(Kernel::bessel_integral(2, 0.5, 1.2).is_err());
        assert!(Kernel::bessel_integral(3, 0.5, 1.6).is_err());
        assert!(Kernel::bessel_integral(3, 0.5, 0.9).is_err());
        assert!(Kernel::bessel_integral(3, 0.5, 1.5).is_ok());
    }

    #[test]
    fn exp_shift_example() {
        let h = Kernel::riesz_exp(1.0, 1.0, 1.0).unwrap();
        let k = combine(ToolkitOp::ExpShift { a: vec![1.0, 0.0, 0.0] }, vec![h]).unwrap();
        assert!(close(k.evaluate(&[1.0, 0.0, 0.0]).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn affine_doubling_of_riesz_is_identity() {
        let h = Kernel::riesz3d_with(0.7).unwrap();
        let a = vec![vec![2.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 2.0]];
        let k = combine(ToolkitOp::Affine { matrix: a }, vec![h.clone()]).unwrap();
        let xi = [0.3, -0.4, 1.1];
        assert!(close(k.evaluate(&xi).unwrap(), h.evaluate(&xi).unwrap(), 1e-14));
    }

    #[test]
    fn bessel_integral_matches_gamma_closed_form_at_beta_zero() {
        // β = 0: e^{-1} ∫ t^{p-1} e^{-r²/t} dt = e^{-1} r^{2p} Γ(-p)
        for (gamma, r) in [(1.0f64, 0.3f64), (1.0, 2.0)] {
            let p: f64 = (gamma - 3.0) / 2.0;
            let exact = (-1f64).exp() * r.powf(2.0 * p) * statrs::function::gamma::gamma(-p);
            let got = bessel_integral_value(3, 0.0, gamma, r).unwrap();
            assert!(close(got, exact, 1e-11), "γ={gamma} r={r}: {got} vs {exact}");
        }
    }

    #[test]
    fn bessel_integral_table_is_accurate() {
        let k = Kernel::bessel_integral(3, 0.5, 1.25).unwrap();
        for r in [1e-3, 0.05, 0.9, 3.0, 25.0] {
            let exact = bessel_integral_value(3, 0.5, 1.25, r).unwrap();
            assert!(close(k.radial_fast(r), exact, 1e-7), "r={r}");
        }
    }

    #[test]
    fn geometric_mean_preconditions() {
        let a = Kernel::riesz3d();
        let b = Kernel::bessel_exp(1.0).unwrap();
        assert!(combine(ToolkitOp::GeometricMean { weights: vec![0.5, 0.6] }, vec![a.clone(), b.clone()]).is_err());
        assert!(combine(ToolkitOp::GeometricMean { weights: vec![1.5, -0.5] }, vec![a.clone(), b.clone()]).is_err());
        let g = combine(ToolkitOp::GeometricMean { weights: vec![0.25, 0.75] }, vec![a, b]).unwrap();
        assert_eq!(g.exponent(), 1.0);
        assert!(g.is_radial());
    }

    #[test]
    fn singular_affine_rejected() {
        let a = vec![vec![1.0, 2.0, 0.0], vec![2.0, 4.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert!(matches!(
            combine(ToolkitOp::Affine { matrix: a }, vec![Kernel::riesz3d()]),
            Err(Error::InvalidCombination(_))
        ));
    }

    #[test]
    fn rescale_requires_exponent_one() {
        let k = Kernel::interpolated(Interpolation::Vi, 0.5, 1.0, 1.0).unwrap();
        assert!(matches!(rescale_limit_family(&k, 2.0), Err(Error::Unsupported(_))));
        let r = rescale_limit_family(&Kernel::riesz3d(), 3.0).unwrap();
        let xi = [0.2, 0.9, -1.3];
        assert!(close(r.evaluate(&xi).unwrap(), Kernel::riesz3d().evaluate(&xi).unwrap(), 1e-14));
    }

    #[test]
    fn bessel_exp_rescaled_by_substitution() {
        let (alpha, lambda) = (1.3, 2.5);
        let h = rescale_limit_family(&Kernel::bessel_exp(alpha).unwrap(), lambda).unwrap();
        let xi = [0.5, -0.1, 0.8];
        let r = norm(&xi);
        let expected = lambda.powi(-2) * alpha * (-alpha * r / lambda).exp() / (2.0 * PI * r / lambda);
        assert!(close(h.evaluate(&xi).unwrap(), expected, 1e-14));
    }

    #[test]
    fn half_line_support() {
        let h = Kernel::half_line_exp(2.0).unwrap();
        assert_eq!(h.evaluate(&[-1.0]).unwrap(), 0.0);
        assert_eq!(h.evaluate(&[0.0]).unwrap(), 0.0);
        assert!(close(h.evaluate(&[0.5]).unwrap(), (-1f64).exp(), 1e-15));
    }

    #[test]
    fn pseudo_metric_with_nonzero_base_point_rejected() {
        let op = ToolkitOp::PseudoMetric { a: 1.0, beta: 1.0, origin: vec![1.0, 0.0, 0.0] };
        assert!(matches!(combine(op, vec![Kernel::riesz3d()]), Err(Error::InvalidCombination(_))));
    }
}
