//! Rejection sampling of the branching transition kernel
//! H(ξ, dη₁×dη₂) ∝ h(ξ−η)h(η) dη with η₁ = ξ − η, η₂ = η.
//!
//! The proposal is an equal mixture of two radially symmetric laws centred at
//! 0 and at ξ. Each draws its radius uniformly on (0, |ξ|] with probability w
//! and from a tail law beyond |ξ| otherwise (Pareto r⁻² or shifted
//! exponential), with a uniform direction. The sup of target/proposal depends
//! on |ξ| only, so it is tabulated per sixteenth of an octave of |ξ| and
//! asserted on every draw.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use rand::Rng;
use rand_distr::{Distribution, Exp, UnitSphere};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::kernels::{self_convolution, Kernel, Node, QuadratureSpec};
use crate::quadrature::{integrate, integrate_breakpoints, integrate_to_infinity, QuadOptions};
use crate::vec3::Vec3;

pub const DEFAULT_ATTEMPT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialTail {
    /// Density (1−w)|ξ|/r² on r > |ξ|.
    Pareto,
    /// Density (1−w)ρe^{−ρ(r−|ξ|)} on r > |ξ|.
    Exponential { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Proposal {
    /// Probability of the uniform near-field radius.
    pub near_weight: f64,
    pub tail: RadialTail,
}

impl Proposal {
    fn validate(&self) -> Result<()> {
        if !(self.near_weight > 0.0 && self.near_weight < 1.0) {
            return Err(Error::InvalidConfiguration(format!(
                "proposal near_weight must lie in (0, 1), got {}",
                self.near_weight
            )));
        }
        if let RadialTail::Exponential { rate } = self.tail {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::InvalidConfiguration(format!("tail rate must be positive, got {rate}")));
            }
        }
        Ok(())
    }

    // radial density g(r) of one mixture component at |ξ| = k
    fn radial_density(&self, r: f64, k: f64) -> f64 {
        let w = self.near_weight;
        if r <= k {
            w / k
        } else {
            match self.tail {
                RadialTail::Pareto => (1.0 - w) * k / (r * r),
                RadialTail::Exponential { rate } => (1.0 - w) * rate * (-rate * (r - k)).exp(),
            }
        }
    }

    fn draw_radius<R: Rng + ?Sized>(&self, k: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        // 1 − U lies in (0, 1]
        let v = 1.0 - rng.random::<f64>();
        if u < self.near_weight {
            k * v
        } else {
            match self.tail {
                RadialTail::Pareto => k / v,
                RadialTail::Exponential { rate } => k + Exp::new(rate).expect("validated rate").sample(rng),
            }
        }
    }

    /// Mixture density at η for the pair (0, ξ).
    fn density(&self, r: f64, s: f64, k: f64) -> f64 {
        let one = |d: f64| if d > 0.0 { self.radial_density(d, k) / (4.0 * PI * d * d) } else { f64::INFINITY };
        0.5 * (one(r) + one(s))
    }
}

/// Sampler of the branching pair for one kernel, shared across frequencies.
#[derive(Debug)]
pub struct PairSampler {
    kernel: Kernel,
    proposal: Proposal,
    attempt_cap: u64,
    bounds: RwLock<HashMap<i64, f64>>,
}

const BUCKETS_PER_OCTAVE: f64 = 16.0;
const BOUND_MARGIN: f64 = 1.1;

impl PairSampler {
    /// The registered strategy for `kernel`: three-dimensional radial kernels
    /// only. Exponentially decaying catalog kernels get an exponential tail,
    /// everything else the Pareto tail.
    pub fn for_kernel(kernel: &Kernel) -> Result<PairSampler> {
        if kernel.dim() != 3 || !kernel.is_radial() {
            return Err(Error::Unsupported(
                "no registered sampling strategy for a non-radial or non-3D kernel; supply a proposal".into(),
            ));
        }
        let tail = match kernel.node() {
            Node::BesselExp { alpha } => RadialTail::Exponential { rate: *alpha },
            Node::RieszExp { alpha, beta, .. } if *beta == 1.0 => RadialTail::Exponential { rate: *alpha },
            _ => RadialTail::Pareto,
        };
        Self::with_proposal(kernel, Proposal { near_weight: 0.5, tail })
    }

    pub fn with_proposal(kernel: &Kernel, proposal: Proposal) -> Result<PairSampler> {
        proposal.validate()?;
        if kernel.dim() != 3 || !kernel.is_radial() {
            return Err(Error::Unsupported("pair sampling needs a radial kernel on R³".into()));
        }
        Ok(PairSampler {
            kernel: kernel.clone(),
            proposal,
            attempt_cap: DEFAULT_ATTEMPT_CAP,
            bounds: RwLock::new(HashMap::new()),
        })
    }

    pub fn with_attempt_cap(mut self, cap: u64) -> Self {
        self.attempt_cap = cap.max(1);
        self
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn proposal(&self) -> &Proposal {
        &self.proposal
    }

    fn target(&self, r: f64, s: f64) -> f64 {
        if r == 0.0 || s == 0.0 {
            return 0.0;
        }
        let a = self.kernel.radial_fast(r);
        if a == 0.0 {
            return 0.0;
        }
        a * self.kernel.radial_fast(s)
    }

    /// Grid sup of target/proposal at |ξ| = k.
    fn grid_bound(&self, k: f64) -> Result<f64> {
        const NR: usize = 161;
        const NC: usize = 81;
        let mut rows = vec![0.0f64; NR];
        for (i, row) in rows.iter_mut().enumerate() {
            let r = k * 10f64.powf(-5.0 + 10.0 * i as f64 / (NR - 1) as f64);
            for j in 0..NC {
                let c = (PI * j as f64 / (NC - 1) as f64).cos();
                let s = (r * r + k * k - 2.0 * r * k * c).max(0.0).sqrt();
                // the neighbourhood of η = ξ mirrors that of η = 0
                if s < 1e-6 * k {
                    continue;
                }
                let p = self.target(r, s);
                let v = if p == 0.0 { 0.0 } else { p / self.proposal.density(r, s, k) };
                if !v.is_finite() {
                    return Err(Error::Unsupported(format!(
                        "branching density is not finite at |η| = {r}, |ξ−η| = {s}"
                    )));
                }
                *row = row.max(v);
            }
        }
        let best = rows.iter().copied().fold(0.0, f64::max);
        // the ratio must level off at both radial ends of the lattice
        let edge_growth = |edge: f64, inner: f64| edge > 1.01 * inner && edge > 0.5 * best;
        if edge_growth(rows[0], rows[16]) || edge_growth(rows[NR - 1], rows[NR - 17]) {
            return Err(Error::Unsupported(
                "the proposal does not dominate the branching density; use a heavier tail".into(),
            ));
        }
        if !(best > 0.0) {
            return Err(Error::InvalidInput(format!("branching density vanishes identically at |ξ| = {k}")));
        }
        Ok(best)
    }

    /// Rejection constant M(|ξ|) used for acceptance.
    pub fn bound(&self, k: f64) -> Result<f64> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!("|ξ| must be positive and finite, got {k}")));
        }
        let key = (k.log2() * BUCKETS_PER_OCTAVE).floor() as i64;
        if let Some(m) = self.bounds.read().expect("bound cache poisoned").get(&key) {
            return Ok(*m);
        }
        let lo = (key as f64 / BUCKETS_PER_OCTAVE).exp2();
        let hi = ((key + 1) as f64 / BUCKETS_PER_OCTAVE).exp2();
        let m = BOUND_MARGIN * self.grid_bound(lo)?.max(self.grid_bound(hi)?).max(self.grid_bound(k)?);
        // concurrent writers compute the same deterministic value
        let mut cache = self.bounds.write().expect("bound cache poisoned");
        Ok(*cache.entry(key).or_insert(m))
    }

    /// One pair (η₁, η₂) with η₁ + η₂ = ξ and η₂ distributed as the branching density.
    pub fn sample_pair<R: Rng + ?Sized>(&self, xi: &Vec3, rng: &mut R) -> Result<(Vec3, Vec3)> {
        self.sample_counted(xi, rng).map(|(pair, _)| pair)
    }

    /// As [`sample_pair`](Self::sample_pair), also returning the number of proposals used.
    pub fn sample_counted<R: Rng + ?Sized>(&self, xi: &Vec3, rng: &mut R) -> Result<((Vec3, Vec3), u64)> {
        let k = xi.norm();
        if !xi.is_finite() || k == 0.0 {
            return Err(Error::InvalidInput(format!("cannot branch at ξ = {:?}", xi.0)));
        }
        if self.kernel.is_scale_invariant() && k != 1.0 {
            // the law at ξ is the law at ξ/|ξ| dilated by |ξ|; this keeps
            // extreme frequencies away from overflow
            let ((_, unit_eta), attempts) = self.sample_at(&xi.scale(1.0 / k), 1.0, rng)?;
            let eta = unit_eta.scale(k);
            return Ok(((*xi - eta, eta), attempts));
        }
        self.sample_at(xi, k, rng)
    }

    fn sample_at<R: Rng + ?Sized>(&self, xi: &Vec3, k: f64, rng: &mut R) -> Result<((Vec3, Vec3), u64)> {
        let m = self.bound(k)?;
        // directions are mirrored with ξ so that draws at −ξ are the negated draws at ξ
        let o = xi.orientation();
        for attempt in 1..=self.attempt_cap {
            let from_xi = rng.random::<bool>();
            let r = self.proposal.draw_radius(k, rng);
            let d: [f64; 3] = UnitSphere.sample(rng);
            let offset = Vec3(d).scale(o * r);
            let eta = if from_xi { *xi + offset } else { offset };
            let a = eta.norm();
            let b = (*xi - eta).norm();
            let p = self.target(a, b);
            let q = self.proposal.density(a, b, k);
            let ratio = if p == 0.0 { 0.0 } else { p / q };
            if ratio > m {
                return Err(Error::BoundViolation(format!(
                    "target/proposal = {ratio} exceeds the rejection constant {m} at η = {:?}, ξ = {:?}",
                    eta.0, xi.0
                )));
            }
            if rng.random::<f64>() * m < ratio {
                return Ok(((*xi - eta, eta), attempt));
            }
        }
        Err(Error::SamplingFailure {
            attempts: self.attempt_cap,
            accepted: 0,
            reason: format!("no proposal accepted at ξ = {:?}", xi.0),
        })
    }
}

/// The η-marginal of the transition kernel at a fixed ξ.
#[derive(Debug, Clone)]
pub struct BranchingDensity {
    sampler: Arc<PairSampler>,
    xi: Vec3,
    normalizer: Arc<OnceLock<Result<f64>>>,
}

impl BranchingDensity {
    pub fn new(kernel: &Kernel, xi: Vec3) -> Result<BranchingDensity> {
        Self::with_sampler(Arc::new(PairSampler::for_kernel(kernel)?), xi)
    }

    pub fn with_sampler(sampler: Arc<PairSampler>, xi: Vec3) -> Result<BranchingDensity> {
        if !xi.is_finite() || xi.is_zero() {
            return Err(Error::InvalidInput(format!("branching density needs ξ ≠ 0, got {:?}", xi.0)));
        }
        if !sampler.kernel.support().contains(&xi.0) {
            return Err(Error::InvalidInput(format!("ξ = {:?} lies outside the kernel support", xi.0)));
        }
        Ok(BranchingDensity { sampler, xi, normalizer: Arc::new(OnceLock::new()) })
    }

    pub fn xi(&self) -> Vec3 {
        self.xi
    }

    pub fn sampler(&self) -> &PairSampler {
        &self.sampler
    }

    /// (h∗h)(ξ), computed once.
    pub fn normalizer(&self) -> Result<f64> {
        self.normalizer
            .get_or_init(|| {
                let q = QuadratureSpec { rel_tol: 1e-8, ..Default::default() };
                let v = self_convolution(&self.sampler.kernel, &self.xi.0, &q)?.value;
                if v > 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonConvergent(format!("h*h(ξ) = {v} is not a positive normalizer")))
                }
            })
            .clone()
    }

    /// h(ξ−η)h(η)/(h∗h)(ξ); zero when either factor leaves the support.
    pub fn density(&self, eta: &Vec3) -> Result<f64> {
        if !eta.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite η = {:?}", eta.0)));
        }
        let k = &self.sampler.kernel;
        let a = k.evaluate(&eta.0)?;
        if a == 0.0 {
            return Ok(0.0);
        }
        let b = k.evaluate(&(self.xi - *eta).0)?;
        Ok(a * b / self.normalizer()?)
    }

    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec3, Vec3)> {
        self.sampler.sample_pair(&self.xi, rng)
    }

    /// Unnormalized radial marginal density 2π r h(r)/k ∫_{|r−k|}^{r+k} h(s) s ds.
    fn radial_marginal(&self, r: f64, opts: &QuadOptions) -> f64 {
        let k = self.xi.norm();
        let h = &self.sampler.kernel;
        let hr = h.radial_fast(r);
        if hr == 0.0 {
            return 0.0;
        }
        let inner = integrate(|s| h.radial_fast(s) * s, (r - k).abs(), r + k, opts);
        2.0 * PI * r * hr * inner.value / k
    }

    /// Unnormalized density of c = cos∠(η, ξ): 2π ∫ r² h(r) h(s(r, c)) dr.
    fn angular_marginal(&self, c: f64, opts: &QuadOptions) -> f64 {
        let k = self.xi.norm();
        let h = &self.sampler.kernel;
        let g = |r: f64| {
            let s = (r * r + k * k - 2.0 * r * k * c).max(0.0).sqrt();
            let a = h.radial_fast(r);
            if a == 0.0 || s == 0.0 {
                return 0.0;
            }
            r * r * a * h.radial_fast(s)
        };
        let mut pts = vec![0.0];
        if c > 0.0 && c < 1.0 {
            pts.push(k * c);
        }
        pts.push(k);
        let near = integrate_breakpoints(g, &pts, opts);
        let far = integrate_to_infinity(g, k, k, opts);
        2.0 * PI * (near.value + far.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramSpec {
    /// Log-spaced radial bins over [0.01|ξ|, 100|ξ|], plus two open end bins.
    pub radial_bins: usize,
    /// Equal-width bins of cos∠(η, ξ) on [−1, 1].
    pub angular_bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec { radial_bins: 40, angular_bins: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub empirical: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub xi: [f64; 3],
    pub n_draws: u64,
    pub attempts: u64,
    /// sup |F_emp − F| for |η₂|.
    pub radial_ks: f64,
    pub angular_chi_square: f64,
    pub angular_dof: usize,
    pub angular_p_value: f64,
    /// Two-sample KS distance between |η₁| and |η₂|.
    pub reflection_ks: f64,
    /// ∫ density over R³ by the radial oracle; 1 up to quadrature error.
    pub oracle_mass: f64,
    pub radial_histogram: Vec<HistogramRow>,
    pub angular_histogram: Vec<HistogramRow>,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// CSV with header bin_lo,bin_hi,empirical,oracle.
pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut out = String::from("bin_lo,bin_hi,empirical,oracle\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.bin_lo, r.bin_hi, r.empirical, r.oracle));
    }
    out
}

// Cumulative radial law on a log grid, linear in between.
struct RadialCdf {
    r: Vec<f64>,
    cdf: Vec<f64>,
}

impl RadialCdf {
    fn at(&self, x: f64) -> f64 {
        if x <= self.r[0] {
            return 0.0;
        }
        let n = self.r.len();
        if x >= self.r[n - 1] {
            return 1.0;
        }
        let i = self.r.partition_point(|v| *v <= x) - 1;
        let t = (x.ln() - self.r[i].ln()) / (self.r[i + 1].ln() - self.r[i].ln());
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }
}

fn radial_cdf(bd: &BranchingDensity) -> (RadialCdf, f64) {
    let k = bd.xi.norm();
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-9, max_intervals: 200 };
    let per_decade = 200;
    let decades = 12;
    let mut r: Vec<f64> =
        (0..=per_decade * decades).map(|i| k * 10f64.powf(-6.0 + i as f64 / per_decade as f64)).collect();
    // |ξ| itself is a node: the marginal has a log singularity there
    r[per_decade * 6] = k;
    let mut mass = vec![0.0];
    let mut total = 0.0;
    for w in r.windows(2) {
        total += integrate(|x| bd.radial_marginal(x, &opts), w[0], w[1], &opts).value;
        mass.push(total);
    }
    // tails beyond the grid
    let head = bd.radial_marginal(r[0], &opts) * r[0];
    let last = *r.last().expect("grid");
    let tail = integrate_to_infinity(|x| bd.radial_marginal(x, &opts), last, last, &opts).value;
    let norm = head + total + tail;
    let cdf = mass.iter().map(|m| (head + m) / norm).collect();
    (RadialCdf { r, cdf }, norm)
}

fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Draw `n_draws` pairs and compare their radial and angular marginals with
/// quadrature oracles of the exact density.
pub fn validate_sampler<R: Rng + ?Sized>(
    bd: &BranchingDensity,
    n_draws: u64,
    bins: &HistogramSpec,
    rng: &mut R,
) -> Result<ValidationReport> {
    let xi = bd.xi;
    let k = xi.norm();
    if n_draws == 0 {
        return Ok(ValidationReport {
            xi: xi.0,
            n_draws: 0,
            attempts: 0,
            radial_ks: 0.0,
            angular_chi_square: 0.0,
            angular_dof: 0,
            angular_p_value: 1.0,
            reflection_ks: 0.0,
            oracle_mass: 0.0,
            radial_histogram: Vec::new(),
            angular_histogram: Vec::new(),
        });
    }
    if bins.radial_bins == 0 || bins.angular_bins < 2 {
        return Err(Error::InvalidConfiguration("need ≥ 1 radial and ≥ 2 angular bins".into()));
    }
    let mut radii = Vec::with_capacity(n_draws as usize);
    let mut partner = Vec::with_capacity(n_draws as usize);
    let mut cosines = Vec::with_capacity(n_draws as usize);
    let mut attempts = 0;
    for _ in 0..n_draws {
        let ((e1, e2), a) = bd.sampler.sample_counted(&xi, rng)?;
        attempts += a;
        let r = e2.norm();
        radii.push(r);
        partner.push(e1.norm());
        cosines.push((e2.dot(&xi) / (r * k)).clamp(-1.0, 1.0));
    }
    let n = n_draws as f64;

    let (cdf, norm) = radial_cdf(bd);
    let oracle_mass = norm / bd.normalizer()?;
    radii.sort_by(f64::total_cmp);
    let mut radial_ks = 0.0f64;
    for (i, r) in radii.iter().enumerate() {
        let f = cdf.at(*r);
        radial_ks = radial_ks.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }

    let mut edges = vec![0.0];
    for i in 0..=bins.radial_bins {
        edges.push(k * 10f64.powf(-2.0 + 4.0 * i as f64 / bins.radial_bins as f64));
    }
    edges.push(f64::INFINITY);
    let radial_histogram = edges
        .windows(2)
        .map(|w| {
            let lo = radii.partition_point(|v| *v < w[0]);
            let hi = radii.partition_point(|v| *v < w[1]);
            let oracle = if w[1].is_infinite() { 1.0 } else { cdf.at(w[1]) } - cdf.at(w[0]);
            HistogramRow { bin_lo: w[0], bin_hi: w[1], empirical: (hi - lo) as f64 / n, oracle }
        })
        .collect();

    // angular bins integrated in θ to absorb the (1−c²)^{−1/2} edge behaviour
    let opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-7, max_intervals: 200 };
    let nb = bins.angular_bins;
    let mut counts = vec![0u64; nb];
    for c in &cosines {
        let b = (((c + 1.0) / 2.0) * nb as f64).floor() as usize;
        counts[b.min(nb - 1)] += 1;
    }
    let mut probs = Vec::with_capacity(nb);
    for b in 0..nb {
        let c_lo = -1.0 + 2.0 * b as f64 / nb as f64;
        let c_hi = -1.0 + 2.0 * (b + 1) as f64 / nb as f64;
        let p = integrate(
            |th: f64| bd.angular_marginal(th.cos(), &opts) * th.sin(),
            c_hi.clamp(-1.0, 1.0).acos(),
            c_lo.clamp(-1.0, 1.0).acos(),
            &opts,
        );
        probs.push(p.value);
    }
    let total: f64 = probs.iter().sum();
    let mut chi2 = 0.0;
    let mut angular_histogram = Vec::with_capacity(nb);
    for b in 0..nb {
        let p = probs[b] / total;
        let e = n * p;
        chi2 += (counts[b] as f64 - e).powi(2) / e;
        angular_histogram.push(HistogramRow {
            bin_lo: -1.0 + 2.0 * b as f64 / nb as f64,
            bin_hi: -1.0 + 2.0 * (b + 1) as f64 / nb as f64,
            empirical: counts[b] as f64 / n,
            oracle: p,
        });
    }
    let dof = nb - 1;
    let p_value = 1.0 - ChiSquared::new(dof as f64).expect("dof ≥ 1").cdf(chi2);

    let mut r2 = radii.clone();
    let reflection_ks = ks_two_sample(&mut r2, &mut partner);

    Ok(ValidationReport {
        xi: xi.0,
        n_draws,
        attempts,
        radial_ks,
        angular_chi_square: chi2,
        angular_dof: dof,
        angular_p_value: p_value,
        reflection_ks,
        oracle_mass,
        radial_histogram,
        angular_histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_stream;

    #[test]
    fn pair_sums_to_xi_exactly() {
        let k = Kernel::riesz3d();
        let s = PairSampler::for_kernel(&k).unwrap();
        let xi = Vec3::new(0.3, -0.7, 1.1);
        let mut rng = replicate_stream(1, 0);
        for _ in 0..2000 {
            let (a, b) = s.sample_pair(&xi, &mut rng).unwrap();
            assert_eq!(a, xi - b);
        }
    }

    #[test]
    fn mirrored_frequency_gives_negated_draws() {
        let s = PairSampler::for_kernel(&Kernel::bessel_exp(1.0).unwrap()).unwrap();
        let xi = Vec3::new(0.4, 0.2, -0.9);
        let mut a = replicate_stream(9, 2);
        let mut b = replicate_stream(9, 2);
        for _ in 0..200 {
            let (p, q) = s.sample_pair(&xi, &mut a).unwrap();
            let (pm, qm) = s.sample_pair(&-xi, &mut b).unwrap();
            assert!((p + pm).norm() < 1e-12 && (q + qm).norm() < 1e-12);
        }
    }

    #[test]
    fn symmetric_point_and_reflection() {
        let k = Kernel::bessel_exp(1.0).unwrap();
        let xi = Vec3::new(0.0, 0.0, 1.0);
        let bd = BranchingDensity::new(&k, xi).unwrap();
        let half = xi.scale(0.5);
        let h = k.evaluate(&half.0).unwrap();
        let d = bd.density(&half).unwrap();
        assert!((d - h * h / bd.normalizer().unwrap()).abs() < 1e-14 * d);
        let eta = Vec3::new(0.3, -0.2, 0.1);
        assert!((bd.density(&eta).unwrap() - bd.density(&(xi - eta)).unwrap()).abs() < 1e-14);
        assert_eq!(bd.density(&Vec3::ZERO).unwrap(), 0.0);
    }

    #[test]
    fn tiny_attempt_cap_fails_loudly() {
        let s = PairSampler::for_kernel(&Kernel::riesz3d()).unwrap().with_attempt_cap(1);
        let xi = Vec3::new(1.0, 0.0, 0.0);
        let mut rng = replicate_stream(3, 0);
        let failures = (0..200).filter(|_| s.sample_pair(&xi, &mut rng).is_err()).count();
        assert!(failures > 0);
    }

    #[test]
    fn zero_draws_give_an_empty_report() {
        let bd = BranchingDensity::new(&Kernel::riesz3d(), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let rep = validate_sampler(&bd, 0, &HistogramSpec::default(), &mut replicate_stream(0, 0)).unwrap();
        assert_eq!(rep.n_draws, 0);
        assert!(rep.radial_histogram.is_empty());
    }

    #[test]
    fn non_radial_kernels_have_no_default_strategy() {
        let k = Kernel::angular_weighted(1.0, 0.25).unwrap();
        assert!(matches!(PairSampler::for_kernel(&k), Err(Error::Unsupported(_))));
    }

    #[test]
    fn two_sample_ks_of_identical_samples_is_zero() {
        let mut a = vec![3.0, 1.0, 2.0];
        let mut b = vec![1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&mut a, &mut b), 0.0);
    }
}
