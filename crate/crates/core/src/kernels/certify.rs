//! Numerical certification of the majorizing inequality and calibration of B.

use rayon::prelude::*;
use serde::Serialize;

use super::{norm, self_convolution, Kernel, Node, QuadratureSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationEntry {
    pub xi: Vec<f64>,
    /// (h∗h)(ξ) / (|ξ|^θ h(ξ)).
    pub ratio: f64,
    /// The constant B.
    pub bound: f64,
    pub pass: bool,
    #[serde(skip)]
    pub ratio_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub entries: Vec<CertificationEntry>,
    pub exponent: f64,
    pub constant: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CertificationReport {
    pub fn max_ratio(&self) -> f64 {
        self.entries.iter().map(|e| e.ratio).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ratio(&self) -> f64 {
        self.entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min)
    }

    /// JSON array of {xi, ratio, bound, pass}.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("report serializes")
    }
}

/// Evaluate r(ξ) = (h∗h)(ξ)/(|ξ|^θ h(ξ)) on every sample and compare with B(1 + tolerance).
pub fn certify(
    kernel: &Kernel,
    samples: &[Vec<f64>],
    tolerance: f64,
    q: &QuadratureSpec,
) -> Result<CertificationReport> {
    for xi in samples {
        if xi.len() != kernel.dim() || !kernel.support().contains(xi) {
            return Err(Error::InvalidInput(format!("sample {xi:?} is not in the kernel support")));
        }
    }
    let b = kernel.constant()?;
    let theta = kernel.exponent();
    let entries = samples
        .par_iter()
        .map(|xi| {
            let conv = self_convolution(kernel, xi, q)?;
            let h = kernel.evaluate(xi)?;
            let scale = if theta == 0.0 { 1.0 } else { norm(xi).powf(theta) };
            let ratio = conv.value / (scale * h);
            Ok(CertificationEntry {
                xi: xi.clone(),
                ratio,
                bound: b,
                pass: ratio <= b * (1.0 + tolerance),
                ratio_error: conv.error / (scale * h),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = entries.iter().all(|e| e.pass);
    Ok(CertificationReport { entries, exponent: theta, constant: b, tolerance, pass })
}

/// Twenty log-spaced radii in [0.1, 10], cycling through several directions
/// and keeping only points inside the support.
pub fn standard_sample_set(kernel: &Kernel) -> Vec<Vec<f64>> {
    let n = kernel.dim();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    dirs.push(e1.clone());
    if n > 1 {
        let d = 1.0 / (n as f64).sqrt();
        dirs.push(vec![d; n]);
        let raw: Vec<f64> = (0..n).map(|i| [0.2, -0.5, 0.84, 0.31, -0.17][i % 5] + 0.01 * i as f64).collect();
        let m = norm(&raw);
        dirs.push(raw.iter().map(|c| c / m).collect());
    }
    dirs.push(e1.iter().map(|c| -c).collect());
    let mut out = Vec::with_capacity(20);
    for i in 0..20 {
        let r = 10f64.powf(-1.0 + 2.0 * i as f64 / 19.0);
        for j in 0..dirs.len() {
            let d = &dirs[(i + j) % dirs.len()];
            let xi: Vec<f64> = d.iter().map(|c| c * r).collect();
            if kernel.support().contains(&xi) {
                out.push(xi);
                break;
            }
        }
    }
    out
}

const CALIBRATION_MARGIN: f64 = 2e-3;
const ANGULAR_MARGIN: f64 = 2e-2;

/// Numerical sup of the majorizing ratio, with a safety margin.
///
/// Radial kernels: a log-radial lattice widened until the maximum is interior,
/// then refined by golden-section search. Angular-weighted kernels are
/// homogeneous, so only directions in one octahedral cell are scanned.
pub fn calibrate_constant(kernel: &Kernel) -> Result<f64> {
    let q = QuadratureSpec { rel_tol: 1e-7, ..Default::default() };
    let theta = kernel.exponent();
    if kernel.is_radial() {
        let n = kernel.dim();
        let ratio = |log_r: f64| -> Result<f64> {
            let r = 10f64.powf(log_r);
            let mut xi = vec![0.0; n];
            xi[0] = r;
            let conv = self_convolution(kernel, &xi, &q)?;
            let v = conv.value / (r.powf(theta) * kernel.radial_fast(r));
            // far out both sides underflow together
            Ok(if v.is_finite() { v } else { 0.0 })
        };
        let (mut lo, mut hi) = (-2.0f64, 2.0f64);
        let step = 0.125;
        let mut grid: Vec<(f64, f64)> = Vec::new();
        let eval_range = |a: f64, b: f64| -> Result<Vec<(f64, f64)>> {
            let count = ((b - a) / step).round() as usize + 1;
            (0..count)
                .into_par_iter()
                .map(|i| {
                    let x = a + step * i as f64;
                    Ok((x, ratio(x)?))
                })
                .collect()
        };
        grid.extend(eval_range(lo, hi)?);
        loop {
            grid.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (imax, _) = grid
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .expect("grid is non-empty");
            if imax == 0 && lo > -8.0 {
                let new_lo = lo - 2.0;
                grid.extend(eval_range(new_lo, lo - step)?);
                lo = new_lo;
            } else if imax == grid.len() - 1 && hi < 8.0 {
                let new_hi = hi + 2.0;
                grid.extend(eval_range(hi + step, new_hi)?);
                hi = new_hi;
            } else {
                break;
            }
        }
        let (imax, &(_, mut best)) = grid
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .expect("grid is non-empty");
        if imax > 0 && imax < grid.len() - 1 {
            // golden-section refinement of the interior maximum
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (grid[imax - 1].0, grid[imax + 1].0);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let mut fc = ratio(c)?;
            let mut fd = ratio(d)?;
            for _ in 0..25 {
                if fc > fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = ratio(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = ratio(d)?;
                }
            }
            best = best.max(fc).max(fd);
        }
        return Ok(best * (1.0 + CALIBRATION_MARGIN));
    }
    if let Node::AngularWeighted { .. } = kernel.node() {
        let mut dirs = Vec::new();
        let steps = 4;
        // the axis itself is skipped: h is infinite there and the ratio vanishes
        for i in 1..=steps {
            for j in 0..=i {
                let b = i as f64 / steps as f64;
                let c = j as f64 / steps as f64;
                let m = (1.0 + b * b + c * c).sqrt();
                dirs.push(vec![1.0 / m, b / m, c / m]);
            }
        }
        // the axis singularities make tight tolerances expensive; the margin
        // below dominates a 1e-3 quadrature error
        let q = QuadratureSpec { rel_tol: 1e-3, ..q };
        let ratios = dirs
            .par_iter()
            .map(|xi| {
                let conv = self_convolution(kernel, xi, &q)?;
                Ok(conv.value / kernel.evaluate(xi)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        let best = ratios.into_iter().fold(0.0, f64::max);
        return Ok(best * (1.0 + ANGULAR_MARGIN));
    }
    Err(Error::RequiresCertification(
        "no calibration lattice for this kernel; its constant must come from the toolkit".into(),
    ))
}
