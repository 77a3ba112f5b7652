//! One versioned config schema per subcommand. Unknown keys are errors.

use nscascade::cascade::{CapPolicy, CascadeConfig, SpectralField, SpectralForcing};
use nscascade::kernels::{Kernel, KernelDescriptor, QuadratureSpec};
use nscascade::sampler::HistogramSpec;
use serde::{Deserialize, Serialize};

use crate::grids::GridSource;

pub const CONFIG_VERSION: u32 = 1;

pub trait RunConfig {
    fn version(&self) -> u32;
    fn seed(&self) -> Option<u64>;
    fn set_seed(&mut self, seed: u64);
}

macro_rules! run_config {
    ($($t:ty),* $(,)?) => {$(
        impl RunConfig for $t {
            fn version(&self) -> u32 {
                self.version
            }
            fn seed(&self) -> Option<u64> {
                self.seed
            }
            fn set_seed(&mut self, seed: u64) {
                self.seed = Some(seed);
            }
        }
    )*};
}

run_config!(
    KernelVerifyConfig,
    KernelEvalConfig,
    SamplerCheckConfig,
    LinearRunConfig,
    NsRunConfig,
    NsTruncatedConfig,
    NsSteadyConfig,
    NsSelfsimConfig,
    FieldsProjectConfig,
    FieldsNormConfig,
    FieldsPressureConfig,
    StokesEvalConfig,
    StokesCheckConfig,
    InequalityConfig,
);

/// A kernel expression tree, optionally rescaled so its majorizing constant is 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub descriptor: KernelDescriptor,
    #[serde(default)]
    pub standardize: bool,
}

impl KernelSection {
    pub fn build(&self) -> nscascade::Result<Kernel> {
        let k = self.descriptor.build()?;
        if self.standardize {
            k.standardized()
        } else {
            Ok(k)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelVerifyConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub kernel: KernelSection,
    /// Defaults to twenty log-spaced radii in [0.1, 10].
    #[serde(default)]
    pub samples: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

fn default_tolerance() -> f64 {
    0.02
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEvalConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub kernel: KernelSection,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerCheckConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub kernel: KernelSection,
    pub xi: [f64; 3],
    pub draws: u64,
    #[serde(default)]
    pub histogram: HistogramSpec,
    #[serde(default = "default_ks")]
    pub ks_limit: f64,
    #[serde(default = "default_p")]
    pub p_value_min: f64,
}

fn default_ks() -> f64 {
    0.01
}

fn default_p() -> f64 {
    1e-3
}

/// Initial data û₀ as real and imaginary parts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexVector {
    pub re: [f64; 3],
    #[serde(default)]
    pub im: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub xi: Vec<[f64; 3]>,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub a: f64,
    pub b: [f64; 3],
    pub u0: ComplexVector,
    pub lattice: Lattice,
    pub replicates: u64,
}

fn zero_field() -> SpectralField {
    SpectralField::Zero
}

fn zero_forcing() -> SpectralForcing {
    SpectralForcing::Zero
}

fn default_depth_cap() -> u32 {
    10_000
}

fn default_node_cap() -> u64 {
    10_000_000
}

fn default_cap_policy() -> CapPolicy {
    CapPolicy::FailReplicate
}

fn default_exclusion() -> f64 {
    1e-3
}

/// The cascade problem: kernel, ν, data, forcing and caps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeSection {
    pub nu: f64,
    pub kernel: KernelSection,
    #[serde(default = "zero_field")]
    pub initial: SpectralField,
    #[serde(default = "zero_forcing")]
    pub forcing: SpectralForcing,
    #[serde(default = "default_depth_cap")]
    pub depth_cap: u32,
    #[serde(default = "default_node_cap")]
    pub node_cap: u64,
    #[serde(default = "default_cap_policy")]
    pub cap_policy: CapPolicy,
    #[serde(default = "default_exclusion")]
    pub exclusion_limit: f64,
    #[serde(default)]
    pub allow_unsafe: bool,
}

impl CascadeSection {
    pub fn build(&self) -> nscascade::Result<CascadeConfig> {
        let mut cfg = CascadeConfig::new(self.kernel.build()?, self.nu)
            .with_initial(self.initial.clone())
            .with_forcing(self.forcing.clone());
        cfg.depth_cap = self.depth_cap;
        cfg.node_cap = self.node_cap;
        cfg.cap_policy = self.cap_policy;
        cfg.exclusion_limit = self.exclusion_limit;
        cfg.allow_unsafe = self.allow_unsafe;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsRunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub cascade: CascadeSection,
    pub lattice: Lattice,
    pub replicates: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsTruncatedConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub cascade: CascadeSection,
    pub lattice: Lattice,
    pub replicates: u64,
    pub generation: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsSteadyConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub cascade: CascadeSection,
    pub xi: Vec<[f64; 3]>,
    pub replicates: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceTimePoint {
    pub xi: [f64; 3],
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsSelfsimConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub cascade: CascadeSection,
    pub lambda: f64,
    pub points: Vec<SpaceTimePoint>,
    pub replicates: u64,
    #[serde(default = "default_z")]
    pub z_limit: f64,
}

fn default_z() -> f64 {
    3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsProjectConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub velocity: GridSource,
}

/// Sample lattice of the norm: `n_radii` log-spaced radii times icosahedral directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormLattice {
    pub r_lo: f64,
    pub r_hi: f64,
    pub n_radii: usize,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsNormConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub kernel: KernelSection,
    pub gamma: u8,
    pub horizon: f64,
    /// The field is the heat evolution e^{−ν|ξ|²t}û₀(ξ) of `initial`.
    pub nu: f64,
    pub initial: SpectralField,
    pub lattice: NormLattice,
    #[serde(default)]
    pub scale_lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsPressureConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub velocity: GridSource,
    #[serde(default)]
    pub forcing: Option<GridSource>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OseenPoint {
    pub z: [f64; 3],
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    pub initial: GridSource,
    #[serde(default)]
    pub forcing: Option<GridSource>,
    /// Forcing g(x,s) = cos(ωs)G(x).
    #[serde(default)]
    pub omega: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StokesEvalConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub nu: f64,
    #[serde(default)]
    pub points: Vec<OseenPoint>,
    #[serde(default)]
    pub evolve: Option<EvolveSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSection {
    pub grid: usize,
    pub box_length: f64,
    pub t: f64,
    pub k_max: f64,
    #[serde(default = "default_b_ref")]
    pub b_ref: f64,
    #[serde(default = "default_fourier_tol")]
    pub tolerance: f64,
}

fn default_b_ref() -> f64 {
    0.7
}

fn default_fourier_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupSection {
    pub x: [f64; 3],
    pub t: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceSection {
    pub z: [f64; 3],
    pub t: f64,
    pub h0: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StokesCheckConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub nu: f64,
    #[serde(default)]
    pub fourier: Option<FourierSection>,
    #[serde(default)]
    pub semigroup: Vec<SemigroupSection>,
    #[serde(default = "default_semigroup_tol")]
    pub semigroup_tolerance: f64,
    #[serde(default)]
    pub divergence: Option<DivergenceSection>,
}

fn default_semigroup_tol() -> f64 {
    0.02
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub nu: Vec<f64>,
    pub samples: u64,
}
