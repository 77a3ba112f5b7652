//! The stochastic cascade: a branching random walk in frequency space whose
//! multiplicative functional χ has expectation û(ξ,t)/h(ξ).
//!
//! A vertex at frequency ξ_v with time budget s draws a holding time
//! S ~ Exp(ν|ξ_v|²) and a fair coin. If S > s it returns χ₀(ξ_v). Otherwise
//! tails returns φ(ξ_v, s−S) and heads returns m(ξ_v)·χ(v1) ⊗_{ξ_v} χ(v2),
//! the children carrying a pair η₁ + η₂ = ξ_v from the transition kernel and
//! the budget s − S. The budget is the physical time left, so s − S is also
//! the absolute time at which the forcing is read.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self_convolution, Kernel, QuadratureSpec, RadialTable};
use crate::quadrature::{integrate, QuadOptions};
use crate::rng::replicate_stream;
use crate::sampler::PairSampler;
use crate::vec3::{CVec3, Vec3};

/// (2π)^{3/2}.
pub const TWO_PI_3_2: f64 = 15.749609945722419;

/// w ⊗_ξ z = −i(e_ξ·z) π_{ξ⊥}w with the bilinear dot product.
pub fn tensor_product_xi(w: &CVec3, z: &CVec3, xi: &Vec3) -> Result<CVec3> {
    let e = xi.direction()?;
    Ok(product_unit(w, z, &e))
}

// ⊗ for an already normalized direction
fn product_unit(w: &CVec3, z: &CVec3, e: &Vec3) -> CVec3 {
    let c = z.dot_real(e) * Complex64::new(0.0, -1.0);
    w.project_out(e).scale(c)
}

/// m(ξ) = 2(h∗h)(ξ)/(ν(2π)^{3/2}|ξ|h(ξ)) by direct quadrature, or in closed
/// form for equality kernels.
pub fn m_coefficient(kernel: &Kernel, nu: f64, xi: &Vec3) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::InvalidInput(format!("ν must be positive, got {nu}")));
    }
    let k = xi.norm();
    if k == 0.0 || !kernel.support().contains(&xi.0) {
        return Err(Error::InvalidInput(format!("ξ = {:?} lies outside the kernel support", xi.0)));
    }
    if let Some(b) = kernel.equality_constant() {
        return Ok(2.0 * b * k.powf(kernel.exponent() - 1.0) / (nu * TWO_PI_3_2));
    }
    let conv = self_convolution(kernel, &xi.0, &QuadratureSpec::default())?;
    Ok(2.0 * conv.value / (nu * TWO_PI_3_2 * k * kernel.evaluate(&xi.0)?))
}

// m along the cascade: closed form, or a log-radial table for other radial kernels.
#[derive(Debug, Clone)]
enum MCoef {
    Closed { b: f64, theta: f64 },
    Table(Arc<OnceLock<Result<RadialTable>>>),
}

const M_TABLE_RANGE: (f64, f64) = (1e-4, 1e4);
const M_TABLE_POINTS: usize = 161;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapPolicy {
    /// A cap hit aborts the whole estimate with the replicate index.
    FailReplicate,
    /// Capped replicates are excluded and counted; too many make the estimate unreliable.
    CountAndExclude,
}

/// Data χ₀ = û₀/h, given through û₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralField {
    Zero,
    /// û₀(ξ) = h(ξ)·π_{ξ⊥}(a + i·o(ξ)b), o(ξ) = ±1 the orientation of ξ; Hermitian
    /// and homogeneous of degree 0 in χ₀.
    KernelMultiple {
        re: [f64; 3],
        #[serde(default)]
        im: [f64; 3],
    },
    /// û₀(ξ) = π_{ξ⊥}a·e^{−w²|ξ|²/2}.
    Gaussian { amplitude: [f64; 3], width: f64 },
}

/// Forcing through φ = 2ĝ/(ν|ξ|²h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralForcing {
    Zero,
    /// φ(ξ,t) = cos(ωt)·π_{ξ⊥}(a + i·o(ξ)b).
    KernelMultiple {
        re: [f64; 3],
        #[serde(default)]
        im: [f64; 3],
        #[serde(default)]
        omega: f64,
    },
}

fn hermitian_transverse(re: &[f64; 3], im: &[f64; 3], xi: &Vec3) -> CVec3 {
    let e = xi.direction().expect("nonzero frequency");
    let o = xi.orientation();
    let v = CVec3::from_parts(*re, [o * im[0], o * im[1], o * im[2]]);
    v.project_out(&e)
}

fn vnorm(v: &[f64; 3]) -> f64 {
    Vec3(*v).norm()
}

impl SpectralField {
    /// û₀(ξ); zero outside W_h and at ξ = 0.
    pub fn u_hat(&self, kernel: &Kernel, xi: &Vec3) -> Result<CVec3> {
        if xi.is_zero() || !kernel.support().contains(&xi.0) {
            return Ok(CVec3::ZERO);
        }
        Ok(match self {
            SpectralField::Zero => CVec3::ZERO,
            SpectralField::KernelMultiple { re, im } => {
                hermitian_transverse(re, im, xi).scale_re(kernel.evaluate(&xi.0)?)
            }
            SpectralField::Gaussian { amplitude, width } => {
                let e = xi.direction()?;
                Vec3(*amplitude).to_complex().project_out(&e).scale_re((-0.5 * width * width * xi.norm_sq()).exp())
            }
        })
    }

    /// χ₀(ξ) = û₀(ξ)/h(ξ); zero outside W_h.
    pub fn chi(&self, kernel: &Kernel, xi: &Vec3) -> Result<CVec3> {
        if xi.is_zero() || !kernel.support().contains(&xi.0) {
            return Ok(CVec3::ZERO);
        }
        match self {
            SpectralField::Zero => Ok(CVec3::ZERO),
            SpectralField::KernelMultiple { re, im } => Ok(hermitian_transverse(re, im, xi)),
            SpectralField::Gaussian { .. } => {
                let h = kernel.evaluate(&xi.0)?;
                Ok(self.u_hat(kernel, xi)?.scale_re(1.0 / h))
            }
        }
    }

    /// A bound on sup|χ₀| when one is known without sampling.
    pub fn chi_bound(&self) -> Option<f64> {
        match self {
            SpectralField::Zero => Some(0.0),
            SpectralField::KernelMultiple { re, im } => Some(vnorm(re) + vnorm(im)),
            SpectralField::Gaussian { .. } => None,
        }
    }
}

impl SpectralForcing {
    pub fn phi(&self, kernel: &Kernel, xi: &Vec3, t: f64) -> CVec3 {
        if xi.is_zero() || !kernel.support().contains(&xi.0) {
            return CVec3::ZERO;
        }
        match self {
            SpectralForcing::Zero => CVec3::ZERO,
            SpectralForcing::KernelMultiple { re, im, omega } => {
                let v = hermitian_transverse(re, im, xi);
                if *omega == 0.0 {
                    v
                } else {
                    v.scale_re((omega * t).cos())
                }
            }
        }
    }

    /// ĝ(ξ,t) = ν|ξ|²h(ξ)φ(ξ,t)/2.
    pub fn g_hat(&self, kernel: &Kernel, nu: f64, xi: &Vec3, t: f64) -> Result<CVec3> {
        let phi = self.phi(kernel, xi, t);
        if phi == CVec3::ZERO {
            return Ok(phi);
        }
        Ok(phi.scale_re(0.5 * nu * xi.norm_sq() * kernel.evaluate(&xi.0)?))
    }

    /// The time-independent limit φ_∞, when it exists.
    pub fn limit(&self) -> Result<SpectralForcing> {
        match self {
            SpectralForcing::KernelMultiple { omega, .. } if *omega != 0.0 => Err(Error::InvalidConfiguration(
                "oscillating forcing has no time-independent limit".into(),
            )),
            other => Ok(other.clone()),
        }
    }

    pub fn phi_bound(&self) -> Option<f64> {
        match self {
            SpectralForcing::Zero => Some(0.0),
            SpectralForcing::KernelMultiple { re, im, .. } => Some(vnorm(re) + vnorm(im)),
        }
    }

    pub fn is_time_constant(&self) -> bool {
        !matches!(self, SpectralForcing::KernelMultiple { omega, .. } if *omega != 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct CascadeConfig {
    pub nu: f64,
    pub kernel: Kernel,
    pub initial: SpectralField,
    pub forcing: SpectralForcing,
    pub depth_cap: u32,
    pub node_cap: u64,
    pub cap_policy: CapPolicy,
    /// Largest excluded fraction tolerated under count-and-exclude.
    pub exclusion_limit: f64,
    /// Allow runs where m ≤ 1, |χ₀| ≤ 1, |φ| ≤ 1 cannot be guaranteed.
    pub allow_unsafe: bool,
}

impl CascadeConfig {
    pub fn new(kernel: Kernel, nu: f64) -> CascadeConfig {
        CascadeConfig {
            nu,
            kernel,
            initial: SpectralField::Zero,
            forcing: SpectralForcing::Zero,
            depth_cap: 10_000,
            node_cap: 10_000_000,
            cap_policy: CapPolicy::FailReplicate,
            exclusion_limit: 1e-3,
            allow_unsafe: false,
        }
    }

    pub fn with_initial(mut self, f: SpectralField) -> Self {
        self.initial = f;
        self
    }

    pub fn with_forcing(mut self, f: SpectralForcing) -> Self {
        self.forcing = f;
        self
    }
}

/// Source of the random ingredients of one tree.
pub trait BranchSource {
    fn holding_time(&mut self, rate: f64) -> f64;
    /// true = heads (branch).
    fn coin(&mut self) -> bool;
    fn split(&mut self, sampler: &PairSampler, xi: &Vec3) -> Result<(Vec3, Vec3)>;
}

pub struct RngSource<R>(pub R);

impl<R: Rng> BranchSource for RngSource<R> {
    fn holding_time(&mut self, rate: f64) -> f64 {
        if rate == 0.0 {
            return f64::INFINITY;
        }
        Exp::new(rate).expect("positive rate").sample(&mut self.0)
    }

    fn coin(&mut self) -> bool {
        self.0.random::<bool>()
    }

    fn split(&mut self, sampler: &PairSampler, xi: &Vec3) -> Result<(Vec3, Vec3)> {
        sampler.sample_pair(xi, &mut self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Full,
    /// Vertices of generation n that die before the horizon contribute 0.
    Truncated(u32),
    /// Time-free cascade with the forcing limit at tails.
    Steady,
}

/// One realization of χ(θ, t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replicate {
    pub value: CVec3,
    /// Largest generation reached (root = 0).
    pub depth: u32,
    pub nodes: u64,
    /// Holding time of the root.
    pub root_holding: f64,
    pub capped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TreeStats {
    pub max_depth: u32,
    pub mean_nodes: f64,
    pub max_nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: CVec3,
    /// Component-wise standard error from the complex sample variance.
    pub stderr: [f64; 3],
    pub stderr_re: [f64; 3],
    pub stderr_im: [f64; 3],
    pub replicates: u64,
    pub excluded: u64,
    pub tree_stats: TreeStats,
    /// Factor turning the mean into û: h(ξ) for cascade runs, 1 otherwise.
    pub weight: f64,
}

impl McEstimate {
    pub fn u_hat(&self) -> CVec3 {
        self.mean.scale_re(self.weight)
    }

    pub fn u_stderr(&self) -> [f64; 3] {
        self.stderr.map(|s| s * self.weight)
    }

    fn exact(value: CVec3, weight: f64) -> McEstimate {
        McEstimate {
            mean: value,
            stderr: [0.0; 3],
            stderr_re: [0.0; 3],
            stderr_im: [0.0; 3],
            replicates: 0,
            excluded: 0,
            tree_stats: TreeStats::default(),
            weight,
        }
    }
}

// Running moments, merged in a fixed order (Chan et al.).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: [f64; 6],
    m2: [f64; 6],
}

impl Moments {
    fn push(&mut self, v: &CVec3) {
        let x = [v[0].re, v[0].im, v[1].re, v[1].im, v[2].re, v[2].im];
        self.n += 1.0;
        for i in 0..6 {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        for i in 0..6 {
            let d = o.mean[i] - self.mean[i];
            self.mean[i] += d * o.n / n;
            self.m2[i] += o.m2[i] + d * d * self.n * o.n / n;
        }
        self.n = n;
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ChunkStats {
    moments: Moments,
    excluded: u64,
    max_depth: u32,
    nodes: u64,
    max_nodes: u64,
}

const CHUNK: u64 = 4096;

enum Task {
    Eval { xi: Vec3, s: f64, generation: u32 },
    Combine { e: Vec3, m: f64 },
}

/// A cascade engine for one configuration.
#[derive(Debug)]
pub struct Cascade {
    cfg: CascadeConfig,
    sampler: PairSampler,
    m: MCoef,
    safe: bool,
}

impl Cascade {
    pub fn new(cfg: CascadeConfig) -> Result<Cascade> {
        if !(cfg.nu > 0.0 && cfg.nu.is_finite()) {
            return Err(Error::InvalidConfiguration(format!("ν must be positive, got {}", cfg.nu)));
        }
        if cfg.depth_cap < 1 || cfg.node_cap < 1 {
            return Err(Error::InvalidConfiguration("depth and node caps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&cfg.exclusion_limit) {
            return Err(Error::InvalidConfiguration("exclusion_limit must lie in [0, 1]".into()));
        }
        let sampler = PairSampler::for_kernel(&cfg.kernel)?;
        let m = match cfg.kernel.equality_constant() {
            Some(b) => MCoef::Closed { b, theta: cfg.kernel.exponent() },
            None => MCoef::Table(Arc::new(OnceLock::new())),
        };
        let m_bound = match &m {
            MCoef::Closed { b, theta } if *theta == 1.0 => Some(2.0 * b / (cfg.nu * TWO_PI_3_2)),
            MCoef::Closed { .. } => None,
            MCoef::Table(_) if cfg.kernel.exponent() == 1.0 => {
                cfg.kernel.constant().ok().map(|b| 2.0 * b / (cfg.nu * TWO_PI_3_2))
            }
            MCoef::Table(_) => None,
        };
        let within = |b: Option<f64>| b.is_some_and(|v| v <= 1.0 + 1e-12);
        let safe = within(m_bound) && within(cfg.initial.chi_bound()) && within(cfg.forcing.phi_bound());
        if !safe && !cfg.allow_unsafe {
            return Err(Error::InvalidConfiguration(format!(
                "cannot guarantee m ≤ 1, |χ₀| ≤ 1, |φ| ≤ 1 (m ≤ {m_bound:?}, |χ₀| ≤ {:?}, |φ| ≤ {:?}); \
                 set allow_unsafe to run without the bound",
                cfg.initial.chi_bound(),
                cfg.forcing.phi_bound()
            )));
        }
        Ok(Cascade { cfg, sampler, m, safe })
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.cfg
    }

    /// True when every replicate is guaranteed to satisfy |χ| ≤ 1.
    pub fn is_safe(&self) -> bool {
        self.safe
    }

    pub fn sampler(&self) -> &PairSampler {
        &self.sampler
    }

    /// m(ξ) as used by the engine.
    pub fn m(&self, xi: &Vec3) -> Result<f64> {
        let k = xi.norm();
        match &self.m {
            MCoef::Closed { b, theta } => Ok(2.0 * b * k.powf(theta - 1.0) / (self.cfg.nu * TWO_PI_3_2)),
            MCoef::Table(cell) => {
                let table = cell.get_or_init(|| {
                    let kernel = &self.cfg.kernel;
                    let nu = self.cfg.nu;
                    let (lo, hi) = M_TABLE_RANGE;
                    RadialTable::build(|r| m_coefficient(kernel, nu, &Vec3::new(r, 0.0, 0.0)), lo, hi, M_TABLE_POINTS)
                });
                match table {
                    Ok(t) => match t.get(k) {
                        Some(v) => Ok(v),
                        None => m_coefficient(&self.cfg.kernel, self.cfg.nu, xi),
                    },
                    Err(e) => Err(e.clone()),
                }
            }
        }
    }

    fn chi0(&self, xi: &Vec3) -> Result<CVec3> {
        self.cfg.initial.chi(&self.cfg.kernel, xi)
    }

    /// One realization of χ(θ, t) at ξ (t is ignored in steady mode).
    pub fn simulate_replicate<S: BranchSource>(&self, xi: &Vec3, t: f64, mode: Mode, src: &mut S) -> Result<Replicate> {
        if !xi.is_finite() || xi.is_zero() {
            return Err(Error::InvalidInput(format!("cascade root needs ξ ≠ 0, got {:?}", xi.0)));
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidInput(format!("time must be nonnegative, got {t}")));
        }
        let kernel = &self.cfg.kernel;
        let steady_forcing = if mode == Mode::Steady { Some(self.cfg.forcing.limit()?) } else { None };
        let mut tasks = vec![Task::Eval { xi: *xi, s: t, generation: 0 }];
        let mut values: Vec<CVec3> = Vec::new();
        let mut depth = 0;
        let mut nodes = 0u64;
        let mut root_holding = f64::NAN;
        while let Some(task) = tasks.pop() {
            match task {
                Task::Combine { e, m } => {
                    let z = values.pop().expect("two operands");
                    let w = values.pop().expect("two operands");
                    values.push(product_unit(&w, &z, &e).scale_re(m));
                }
                Task::Eval { xi: x, s, generation } => {
                    nodes += 1;
                    depth = depth.max(generation);
                    if generation > self.cfg.depth_cap || nodes > self.cfg.node_cap {
                        return Ok(Replicate { value: CVec3::ZERO, depth, nodes, root_holding, capped: true });
                    }
                    if !kernel.support().contains(&x.0) || x.is_zero() {
                        // exterior condition: û and hence χ vanish off W_h
                        values.push(CVec3::ZERO);
                        continue;
                    }
                    if let Some(phi) = &steady_forcing {
                        if generation == 0 {
                            root_holding = 0.0;
                        }
                        if !src.coin() {
                            values.push(phi.phi(kernel, &x, 0.0));
                        } else {
                            let (a, b) = src.split(&self.sampler, &x)?;
                            tasks.push(Task::Combine { e: x.direction()?, m: self.m(&x)? });
                            tasks.push(Task::Eval { xi: b, s: 0.0, generation: generation + 1 });
                            tasks.push(Task::Eval { xi: a, s: 0.0, generation: generation + 1 });
                        }
                        continue;
                    }
                    let hold = src.holding_time(self.cfg.nu * x.norm_sq());
                    if generation == 0 {
                        root_holding = hold;
                    }
                    if hold > s {
                        values.push(self.chi0(&x)?);
                        continue;
                    }
                    if let Mode::Truncated(n) = mode {
                        if generation >= n {
                            values.push(CVec3::ZERO);
                            continue;
                        }
                    }
                    let rest = s - hold;
                    if !src.coin() {
                        values.push(self.cfg.forcing.phi(kernel, &x, rest));
                    } else {
                        let (a, b) = src.split(&self.sampler, &x)?;
                        tasks.push(Task::Combine { e: x.direction()?, m: self.m(&x)? });
                        tasks.push(Task::Eval { xi: b, s: rest, generation: generation + 1 });
                        tasks.push(Task::Eval { xi: a, s: rest, generation: generation + 1 });
                    }
                }
            }
        }
        let value = values.pop().expect("root value");
        if self.safe && value.norm() > 1.0 + 1e-9 {
            return Err(Error::BoundViolation(format!(
                "|χ| = {} > 1 in a run with m ≤ 1, |χ₀| ≤ 1, |φ| ≤ 1",
                value.norm()
            )));
        }
        Ok(Replicate { value, depth, nodes, root_holding, capped: false })
    }

    /// Replicates `range` under `seed`, in index order.
    pub fn replicates(&self, xi: &Vec3, t: f64, mode: Mode, seed: u64, range: std::ops::Range<u64>) -> Result<Vec<Replicate>> {
        range
            .into_par_iter()
            .map(|i| self.simulate_replicate(xi, t, mode, &mut RngSource(replicate_stream(seed, i))))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }

    fn run(&self, xi: &Vec3, t: f64, mode: Mode, n: u64, seed: u64) -> Result<McEstimate> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 replicates, got {n}")));
        }
        let kernel = &self.cfg.kernel;
        if xi.is_zero() {
            let value = match mode {
                Mode::Steady => CVec3::ZERO,
                _ => zero_frequency_from(&self.cfg, t)?,
            };
            return Ok(McEstimate::exact(value, 1.0));
        }
        if !kernel.support().contains(&xi.0) {
            return Ok(McEstimate::exact(CVec3::ZERO, 0.0));
        }
        let weight = kernel.evaluate(&xi.0)?;
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<Result<ChunkStats>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut st = ChunkStats::default();
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let rep = self.simulate_replicate(xi, t, mode, &mut RngSource(replicate_stream(seed, i)))?;
                    st.max_depth = st.max_depth.max(rep.depth);
                    st.max_nodes = st.max_nodes.max(rep.nodes);
                    st.nodes += rep.nodes;
                    if rep.capped {
                        match self.cfg.cap_policy {
                            CapPolicy::FailReplicate => {
                                let which = if rep.depth > self.cfg.depth_cap { "depth" } else { "node" };
                                return Err(Error::CapExceeded { replicate: i, which });
                            }
                            CapPolicy::CountAndExclude => st.excluded += 1,
                        }
                        continue;
                    }
                    st.moments.push(&rep.value);
                }
                Ok(st)
            })
            .collect();
        let mut total = ChunkStats::default();
        for p in parts {
            let p = p?;
            total.moments.merge(&p.moments);
            total.excluded += p.excluded;
            total.max_depth = total.max_depth.max(p.max_depth);
            total.max_nodes = total.max_nodes.max(p.max_nodes);
            total.nodes += p.nodes;
        }
        if total.excluded as f64 > self.cfg.exclusion_limit * n as f64 {
            return Err(Error::UnreliableEstimate { excluded: total.excluded, total: n, limit: self.cfg.exclusion_limit });
        }
        let mo = &total.moments;
        let used = mo.n;
        if used < 2.0 {
            return Err(Error::UnreliableEstimate { excluded: total.excluded, total: n, limit: self.cfg.exclusion_limit });
        }
        let se = |i: usize| (mo.m2[i] / (used - 1.0) / used).sqrt();
        let stderr_re = [se(0), se(2), se(4)];
        let stderr_im = [se(1), se(3), se(5)];
        Ok(McEstimate {
            mean: CVec3::from_parts([mo.mean[0], mo.mean[2], mo.mean[4]], [mo.mean[1], mo.mean[3], mo.mean[5]]),
            stderr: [0, 1, 2].map(|j| stderr_re[j].hypot(stderr_im[j])),
            stderr_re,
            stderr_im,
            replicates: used as u64,
            excluded: total.excluded,
            tree_stats: TreeStats {
                max_depth: total.max_depth,
                mean_nodes: total.nodes as f64 / n as f64,
                max_nodes: total.max_nodes,
            },
            weight,
        })
    }

    /// Monte-Carlo estimate of χ(ξ,t); `u_hat()` gives û(ξ,t) = h(ξ)·mean.
    pub fn estimate(&self, xi: &Vec3, t: f64, n: u64, seed: u64) -> Result<McEstimate> {
        self.run(xi, t, Mode::Full, n, seed)
    }

    /// The generation-n Picard iterate.
    pub fn estimate_truncated(&self, xi: &Vec3, t: f64, generation_cap: u32, n: u64, seed: u64) -> Result<McEstimate> {
        self.run(xi, t, Mode::Truncated(generation_cap), n, seed)
    }

    /// The time-free cascade for the steady equation with forcing φ_∞.
    pub fn estimate_steady(&self, xi: &Vec3, n: u64, seed: u64) -> Result<McEstimate> {
        self.run(xi, 0.0, Mode::Steady, n, seed)
    }
}

fn zero_frequency_from(cfg: &CascadeConfig, t: f64) -> Result<CVec3> {
    let u0 = cfg.initial.u_hat(&cfg.kernel, &Vec3::ZERO)?;
    let kernel = cfg.kernel.clone();
    let forcing = cfg.forcing.clone();
    let nu = cfg.nu;
    zero_frequency(&u0, &move |s| forcing.g_hat(&kernel, nu, &Vec3::ZERO, s).unwrap_or(CVec3::ZERO), t)
}

/// û(0,t) = û₀(0) + ∫₀ᵗ ĝ(0,s) ds.
pub fn zero_frequency(u0_at_0: &CVec3, g_at_0: &dyn Fn(f64) -> CVec3, t: f64) -> Result<CVec3> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be nonnegative, got {t}")));
    }
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 2000 };
    let mut out = *u0_at_0;
    for j in 0..3 {
        let re = integrate(|s| g_at_0(s)[j].re, 0.0, t, &opts).require("zero-frequency forcing")?;
        let im = integrate(|s| g_at_0(s)[j].im, 0.0, t, &opts).require("zero-frequency forcing")?;
        out.0[j] += Complex64::new(re.value, im.value);
    }
    Ok(out)
}

/// Warm-up cascade: χ = m^{N(t)}û₀(ξ), m = i b·ξ/(a|ξ|²), N(t) ~ Poisson(a|ξ|²t).
pub fn linear_estimate(a: f64, b: &Vec3, u0_hat: &CVec3, xi: &Vec3, t: f64, n: u64, seed: u64) -> Result<McEstimate> {
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!("a must be positive, got {a}")));
    }
    if xi.is_zero() || !xi.is_finite() {
        return Err(Error::InvalidInput(format!("warm-up cascade needs ξ ≠ 0, got {:?}", xi.0)));
    }
    if !(t >= 0.0) || n < 2 {
        return Err(Error::InvalidInput("need t ≥ 0 and at least 2 replicates".into()));
    }
    let rate = a * xi.norm_sq() * t;
    let m = Complex64::new(0.0, b.dot(xi) / (a * xi.norm_sq()));
    let poisson = if rate > 0.0 { Some(Poisson::new(rate).map_err(|e| Error::InvalidInput(e.to_string()))?) } else { None };
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut mo = Moments::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut rng = replicate_stream(seed, i);
                let count = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as i32);
                mo.push(&u0_hat.scale(m.powi(count)));
            }
            mo
        })
        .collect();
    let mut mo = Moments::default();
    for p in &parts {
        mo.merge(p);
    }
    let se = |i: usize| (mo.m2[i] / (mo.n - 1.0) / mo.n).sqrt();
    let stderr_re = [se(0), se(2), se(4)];
    let stderr_im = [se(1), se(3), se(5)];
    Ok(McEstimate {
        mean: CVec3::from_parts([mo.mean[0], mo.mean[2], mo.mean[4]], [mo.mean[1], mo.mean[3], mo.mean[5]]),
        stderr: [0, 1, 2].map(|j| stderr_re[j].hypot(stderr_im[j])),
        stderr_re,
        stderr_im,
        replicates: n,
        excluded: 0,
        tree_stats: TreeStats::default(),
        weight: 1.0,
    })
}

/// Closed form e^{(−a|ξ|² + i b·ξ)t}û₀(ξ) of the warm-up cascade.
pub fn linear_exact(a: f64, b: &Vec3, u0_hat: &CVec3, xi: &Vec3, t: f64) -> CVec3 {
    let z = Complex64::new(-a * xi.norm_sq(), b.dot(xi)) * t;
    u0_hat.scale(z.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarityReport {
    pub lambda: f64,
    pub points: Vec<SelfSimilarityPoint>,
    /// Largest |z| over all points, components and real/imaginary parts.
    pub max_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarityPoint {
    pub xi: [f64; 3],
    pub t: f64,
    pub direct: CVec3,
    pub rescaled: CVec3,
    /// z-scores of real and imaginary parts per component.
    pub z_re: [f64; 3],
    pub z_im: [f64; 3],
}

/// Compare û(ξ,t) with λ⁻²û(ξ/λ, λ²t) at each test point.
pub fn check_self_similarity(
    engine: &Cascade,
    lambda: f64,
    points: &[(Vec3, f64)],
    n: u64,
    seeds: (u64, u64),
) -> Result<SelfSimilarityReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("λ must be positive, got {lambda}")));
    }
    let cfg = engine.config();
    let k = &cfg.kernel;
    // scale invariance h(ξ/λ) = λ²h(ξ), constant m, degree-0 data
    let probe = [Vec3::new(0.3, -0.4, 1.2), Vec3::new(2.0, 0.1, 0.5)];
    for p in &probe {
        let a = k.evaluate(&p.scale(1.0 / lambda).0)?;
        let b = lambda * lambda * k.evaluate(&p.0)?;
        let m1 = engine.m(p)?;
        let m2 = engine.m(&p.scale(1.0 / lambda))?;
        if (a - b).abs() > 1e-10 * b || (m1 - m2).abs() > 1e-10 * m1 {
            return Err(Error::InvalidConfiguration("kernel is not invariant under ξ → ξ/λ with h_λ = λ⁻²h(ξ/λ)".into()));
        }
        let c1 = cfg.initial.chi(k, p)?;
        let c2 = cfg.initial.chi(k, &p.scale(1.0 / lambda))?;
        if c1.max_abs_diff(&c2) > 1e-12 {
            return Err(Error::InvalidConfiguration("initial data is not homogeneous of degree 0 in χ₀".into()));
        }
    }
    if !cfg.forcing.is_time_constant() {
        return Err(Error::InvalidConfiguration("self-similarity needs time-constant forcing".into()));
    }
    let mut out = Vec::with_capacity(points.len());
    let mut max_z = 0.0f64;
    for (xi, t) in points {
        let direct = engine.estimate(xi, *t, n, seeds.0)?;
        let scaled = engine.estimate(&xi.scale(1.0 / lambda), lambda * lambda * t, n, seeds.1)?;
        let l2 = 1.0 / (lambda * lambda);
        let ud = direct.u_hat();
        let us = scaled.u_hat().scale_re(l2);
        let z = |a: f64, b: f64, sa: f64, sb: f64| {
            let s = (sa * sa + sb * sb).sqrt();
            if s == 0.0 {
                if a == b { 0.0 } else { f64::INFINITY }
            } else {
                (a - b) / s
            }
        };
        let mut z_re = [0.0; 3];
        let mut z_im = [0.0; 3];
        for j in 0..3 {
            z_re[j] = z(
                ud[j].re,
                us[j].re,
                direct.stderr_re[j] * direct.weight,
                scaled.stderr_re[j] * scaled.weight * l2,
            );
            z_im[j] = z(
                ud[j].im,
                us[j].im,
                direct.stderr_im[j] * direct.weight,
                scaled.stderr_im[j] * scaled.weight * l2,
            );
            max_z = max_z.max(z_re[j].abs()).max(z_im[j].abs());
        }
        out.push(SelfSimilarityPoint { xi: xi.0, t: *t, direct: ud, rescaled: us, z_re, z_im });
    }
    Ok(SelfSimilarityReport { lambda, points: out, max_z })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenealogyReport {
    pub trees: u64,
    pub depth_cap: u32,
    pub cap_hits: u64,
    /// (n, fraction of trees with depth > n).
    pub survival: Vec<(u32, f64)>,
    pub max_depth: u32,
}

/// Generation sizes Z_{k+1} = 2·Bin(Z_k, ½) of the steady cascade's genealogy
/// (a critical binary Galton–Watson tree; the coin is independent of the
/// frequencies, so the genealogy does not depend on the kernel).
pub fn simulate_genealogy(trees: u64, depth_cap: u32, checkpoints: &[u32], seed: u64) -> GenealogyReport {
    let chunks = trees.div_ceil(CHUNK);
    let parts: Vec<(u64, u32, Vec<u64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut hits = 0;
            let mut max_depth = 0;
            let mut above = vec![0u64; checkpoints.len()];
            for i in c * CHUNK..((c + 1) * CHUNK).min(trees) {
                let mut rng = replicate_stream(seed, i);
                let mut z: u64 = 1;
                let mut depth = 0u32;
                while z > 0 {
                    let heads = Binomial::new(z, 0.5).expect("valid binomial").sample(&mut rng);
                    z = 2 * heads;
                    if z == 0 {
                        break;
                    }
                    depth += 1;
                    if depth > depth_cap {
                        hits += 1;
                        break;
                    }
                }
                max_depth = max_depth.max(depth);
                for (j, n) in checkpoints.iter().enumerate() {
                    if depth > *n {
                        above[j] += 1;
                    }
                }
            }
            (hits, max_depth, above)
        })
        .collect();
    let mut cap_hits = 0;
    let mut max_depth = 0;
    let mut above = vec![0u64; checkpoints.len()];
    for (h, d, a) in parts {
        cap_hits += h;
        max_depth = max_depth.max(d);
        for j in 0..a.len() {
            above[j] += a[j];
        }
    }
    GenealogyReport {
        trees,
        depth_cap,
        cap_hits,
        survival: checkpoints.iter().zip(&above).map(|(n, a)| (*n, *a as f64 / trees as f64)).collect(),
        max_depth,
    }
}
