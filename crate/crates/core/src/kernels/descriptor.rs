//! JSON expression-tree form of kernels.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{combine, Interpolation, Kernel, Node, Tilt, ToolkitOp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDescriptor {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub params: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<KernelDescriptor>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DimParams {
    n: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RieszExpParams {
    alpha: f64,
    beta: f64,
    #[serde(default = "one")]
    c: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpolatedParams {
    variant: Interpolation,
    theta: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BesselIntegralParams {
    n: usize,
    beta: f64,
    gamma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AngularParams {
    #[serde(default = "one")]
    amplitude: f64,
    #[serde(default = "quarter")]
    power: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Riesz3dParams {
    c: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphaParams {
    alpha: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsParams {
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixParams {
    matrix: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TiltParams {
    psi: Tilt,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShiftParams {
    a: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PseudoMetricParams {
    a: f64,
    beta: f64,
    origin: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaleParams {
    c: f64,
}

fn one() -> f64 {
    1.0
}

fn quarter() -> f64 {
    0.25
}

fn params<T: DeserializeOwned>(d: &KernelDescriptor) -> Result<T> {
    serde_json::from_value(Value::Object(d.params.clone()))
        .map_err(|e| Error::InvalidConfiguration(format!("kernel '{}' params: {e}", d.kind)))
}

fn leaf(d: &KernelDescriptor) -> Result<()> {
    if d.children.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfiguration(format!("kernel '{}' takes no children", d.kind)))
    }
}

impl KernelDescriptor {
    pub fn new(kind: &str, params: Value, children: Vec<KernelDescriptor>) -> Self {
        let params = match params {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        KernelDescriptor { kind: kind.to_string(), params, children }
    }

    pub fn build(&self) -> Result<Kernel> {
        let d = self;
        let children = || -> Result<Vec<Kernel>> { d.children.iter().map(KernelDescriptor::build).collect() };
        match d.kind.as_str() {
            "cauchy1d" => {
                leaf(d)?;
                params::<NoParams>(d)?;
                Ok(Kernel::cauchy1d())
            }
            "cauchy_product" => {
                leaf(d)?;
                Kernel::cauchy_product(params::<DimParams>(d)?.n)
            }
            "radial_cauchy" => {
                leaf(d)?;
                Kernel::radial_cauchy(params::<DimParams>(d)?.n)
            }
            "riesz_exp" => {
                leaf(d)?;
                let p: RieszExpParams = params(d)?;
                Kernel::riesz_exp(p.c, p.alpha, p.beta)
            }
            "interpolated" => {
                leaf(d)?;
                let p: InterpolatedParams = params(d)?;
                Kernel::interpolated(p.variant, p.theta, p.alpha, p.beta)
            }
            "bessel_integral" => {
                leaf(d)?;
                let p: BesselIntegralParams = params(d)?;
                Kernel::bessel_integral(p.n, p.beta, p.gamma)
            }
            "angular_weighted" => {
                leaf(d)?;
                let p: AngularParams = params(d)?;
                Kernel::angular_weighted(p.amplitude, p.power)
            }
            "riesz3d" => {
                leaf(d)?;
                match params::<Riesz3dParams>(d)?.c {
                    Some(c) => Kernel::riesz3d_with(c),
                    None => Ok(Kernel::riesz3d()),
                }
            }
            "bessel_exp" => {
                leaf(d)?;
                Kernel::bessel_exp(params::<AlphaParams>(d)?.alpha)
            }
            "half_line_exp" => {
                leaf(d)?;
                Kernel::half_line_exp(params::<AlphaParams>(d)?.alpha)
            }
            "geometric_mean" => {
                let p: WeightsParams = params(d)?;
                combine(ToolkitOp::GeometricMean { weights: p.weights }, children()?)
            }
            "tensor_product" => {
                params::<NoParams>(d)?;
                combine(ToolkitOp::TensorProduct, children()?)
            }
            "affine" => {
                let p: MatrixParams = params(d)?;
                combine(ToolkitOp::Affine { matrix: p.matrix }, children()?)
            }
            "tilt" => {
                let p: TiltParams = params(d)?;
                combine(ToolkitOp::Tilt(p.psi), children()?)
            }
            "exp_shift" => {
                let p: ShiftParams = params(d)?;
                combine(ToolkitOp::ExpShift { a: p.a }, children()?)
            }
            "pseudo_metric" => {
                let p: PseudoMetricParams = params(d)?;
                let kids = children()?;
                let dim = kids.first().map(Kernel::dim).unwrap_or(3);
                let origin = p.origin.unwrap_or_else(|| vec![0.0; dim]);
                combine(ToolkitOp::PseudoMetric { a: p.a, beta: p.beta, origin }, kids)
            }
            "scale" => {
                let p: ScaleParams = params(d)?;
                combine(ToolkitOp::Scale { c: p.c }, children()?)
            }
            other => Err(Error::InvalidConfiguration(format!("unknown kernel kind '{other}'"))),
        }
    }
}

impl Kernel {
    pub fn from_descriptor(d: &KernelDescriptor) -> Result<Kernel> {
        d.build()
    }

    pub fn from_json(s: &str) -> Result<Kernel> {
        let d: KernelDescriptor =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfiguration(format!("kernel descriptor: {e}")))?;
        d.build()
    }

    pub fn descriptor(&self) -> KernelDescriptor {
        let kids = |v: &[Kernel]| v.iter().map(Kernel::descriptor).collect::<Vec<_>>();
        match &self.node {
            Node::Cauchy1d => KernelDescriptor::new("cauchy1d", json!({}), vec![]),
            Node::CauchyProduct { n } => KernelDescriptor::new("cauchy_product", json!({ "n": n }), vec![]),
            Node::RadialCauchy { n } => KernelDescriptor::new("radial_cauchy", json!({ "n": n }), vec![]),
            Node::RieszExp { c, alpha, beta } => {
                KernelDescriptor::new("riesz_exp", json!({ "c": c, "alpha": alpha, "beta": beta }), vec![])
            }
            Node::Interpolated { variant, theta, alpha, beta, .. } => KernelDescriptor::new(
                "interpolated",
                json!({ "variant": variant, "theta": theta, "alpha": alpha, "beta": beta }),
                vec![],
            ),
            Node::BesselIntegral { n, beta, gamma } => {
                KernelDescriptor::new("bessel_integral", json!({ "n": n, "beta": beta, "gamma": gamma }), vec![])
            }
            Node::AngularWeighted { amplitude, power } => {
                KernelDescriptor::new("angular_weighted", json!({ "amplitude": amplitude, "power": power }), vec![])
            }
            Node::Riesz3d { c } => KernelDescriptor::new("riesz3d", json!({ "c": c }), vec![]),
            Node::BesselExp { alpha } => KernelDescriptor::new("bessel_exp", json!({ "alpha": alpha }), vec![]),
            Node::HalfLineExp { alpha } => KernelDescriptor::new("half_line_exp", json!({ "alpha": alpha }), vec![]),
            Node::GeometricMean { weights, children } => {
                KernelDescriptor::new("geometric_mean", json!({ "weights": weights }), kids(children))
            }
            Node::TensorProduct { children } => KernelDescriptor::new("tensor_product", json!({}), kids(children)),
            Node::Affine { matrix, child, .. } => {
                KernelDescriptor::new("affine", json!({ "matrix": matrix }), vec![child.descriptor()])
            }
            Node::Tilted { tilt, child } => KernelDescriptor::new("tilt", json!({ "psi": tilt }), vec![child.descriptor()]),
            Node::ExpShift { a, child } => KernelDescriptor::new("exp_shift", json!({ "a": a }), vec![child.descriptor()]),
            Node::PseudoMetric { a, beta, child } => {
                KernelDescriptor::new("pseudo_metric", json!({ "a": a, "beta": beta }), vec![child.descriptor()])
            }
            Node::Scaled { c, child } => KernelDescriptor::new("scale", json!({ "c": c }), vec![child.descriptor()]),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.descriptor()).expect("descriptor serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_nested_tree() {
        let s = r#"{"kind":"geometric_mean","params":{"weights":[0.5,0.5]},"children":[
            {"kind":"riesz3d","params":{"c":0.03}},
            {"kind":"tilt","params":{"psi":{"kind":"norm_power","a":1.0,"beta":0.5}},
             "children":[{"kind":"bessel_exp","params":{"alpha":2.0}}]}]}"#;
        let k = Kernel::from_json(s).unwrap();
        let again = Kernel::from_json(&k.to_json()).unwrap();
        let xi = [0.3, 0.1, -0.7];
        assert_eq!(k.evaluate(&xi).unwrap(), again.evaluate(&xi).unwrap());
        assert_eq!(k.descriptor(), again.descriptor());
    }

    #[test]
    fn unknown_keys_and_kinds_rejected() {
        assert!(Kernel::from_json(r#"{"kind":"bessel_exp","params":{"alpha":1,"beta":2}}"#).is_err());
        assert!(Kernel::from_json(r#"{"kind":"gaussian"}"#).is_err());
        assert!(Kernel::from_json(r#"{"kind":"riesz3d","extra":1}"#).is_err());
        assert!(Kernel::from_json(r#"{"kind":"riesz3d","children":[{"kind":"riesz3d"}]}"#).is_err());
    }
}
