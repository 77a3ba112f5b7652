//! Log-spaced radial lookup tables with cubic interpolation of log values.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RadialTable {
    log_r0: f64,
    step: f64,
    log_values: Vec<f64>,
    underflowed: bool,
}

impl RadialTable {
    /// Tabulate a strictly positive radial profile on `points` log-spaced radii
    /// in [r_lo, r_hi]. Tabulation stops early once the profile drops below
    /// 1e-280, so the table never stores underflowed values.
    pub fn build<F: FnMut(f64) -> Result<f64>>(mut f: F, r_lo: f64, r_hi: f64, points: usize) -> Result<Self> {
        if !(r_lo > 0.0 && r_hi > r_lo && points >= 4) {
            return Err(Error::InvalidInput(format!(
                "radial table needs 0 < r_lo < r_hi and ≥ 4 points, got [{r_lo}, {r_hi}] × {points}"
            )));
        }
        let log_r0 = r_lo.ln();
        let step = (r_hi.ln() - log_r0) / (points - 1) as f64;
        let mut log_values = Vec::with_capacity(points);
        let mut underflowed = false;
        for i in 0..points {
            let r = (log_r0 + step * i as f64).exp();
            let v = f(r)?;
            if !v.is_finite() {
                break;
            }
            if !(v > 1e-280) {
                underflowed = true;
                break;
            }
            log_values.push(v.ln());
        }
        if log_values.len() < 4 {
            return Err(Error::InvalidInput("radial profile vanishes on the table range".into()));
        }
        Ok(RadialTable { log_r0, step, log_values, underflowed })
    }

    pub fn r_min(&self) -> f64 {
        self.log_r0.exp()
    }

    /// Largest radius at which interpolation is available.
    pub fn r_max(&self) -> f64 {
        (self.log_r0 + self.step * (self.log_values.len() - 1) as f64).exp()
    }

    /// Like [`get`](Self::get), but extends the table as a power law below its
    /// range and by zero above it when the profile underflowed there.
    pub fn lookup(&self, r: f64) -> Option<f64> {
        if let Some(v) = self.get(r) {
            return Some(v);
        }
        if r > 0.0 && r < self.r_min() {
            let slope = (self.log_values[1] - self.log_values[0]) / self.step;
            return Some((self.log_values[0] + slope * (r.ln() - self.log_r0)).exp());
        }
        if r > self.r_max() && self.underflowed {
            return Some(0.0);
        }
        None
    }

    /// Interpolated value, or `None` outside the tabulated range.
    pub fn get(&self, r: f64) -> Option<f64> {
        if !(r > 0.0) {
            return None;
        }
        let x = (r.ln() - self.log_r0) / self.step;
        let n = self.log_values.len();
        if x < 0.0 || x > (n - 1) as f64 {
            return None;
        }
        // four-point Lagrange on the nearest stencil
        let i = (x.floor() as usize).clamp(1, n.saturating_sub(3).max(1)).min(n - 3);
        let t = x - i as f64;
        let y = &self.log_values;
        let (a, b, c, d) = (y[i - 1], y[i], y[i + 1], y[i + 2]);
        let v = -a * t * (t - 1.0) * (t - 2.0) / 6.0 + b * (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
            - c * (t + 1.0) * t * (t - 2.0) / 2.0
            + d * (t + 1.0) * t * (t - 1.0) / 6.0;
        Some(v.exp())
    }
}
