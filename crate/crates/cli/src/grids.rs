//! Spectral grids named in configs: files or analytic fields on [0, 2π)³.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use nscascade::fields::SpectralGrid;
use serde::{Deserialize, Serialize};

use crate::run::CliError;

/// One real Fourier mode: re·cos(k·x) − im·sin(k·x).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierMode {
    pub k: [i64; 3],
    pub re: [f64; 3],
    #[serde(default)]
    pub im: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSource {
    /// A binary spectral grid written by an earlier run.
    File { path: PathBuf },
    /// (sin x cos y cos z, −cos x sin y cos z, 0)·amplitude.
    TaylorGreen { n: usize, amplitude: f64 },
    /// (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x).
    Abc { n: usize, a: f64, b: f64, c: f64 },
    Modes { n: usize, modes: Vec<FourierMode> },
}

fn sample(n: usize, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Result<SpectralGrid, CliError> {
    if n < 2 {
        return Err(CliError::Config { path: "n".into(), message: format!("grid size must be at least 2, got {n}") });
    }
    let h = 2.0 * PI / n as f64;
    let mut comps = vec![vec![0.0; n * n * n]; 3];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = f(i as f64 * h, j as f64 * h, k as f64 * h);
                for c in 0..3 {
                    comps[c][(i * n + j) * n + k] = v[c];
                }
            }
        }
    }
    Ok(SpectralGrid::from_physical(&comps, [n; 3], [h; 3])?)
}

impl GridSource {
    pub fn load(&self) -> Result<SpectralGrid, CliError> {
        match self {
            GridSource::File { path } => {
                let f = File::open(path).map_err(|source| CliError::Io { context: format!("opening {}", path.display()), source })?;
                Ok(SpectralGrid::read_from(BufReader::new(f))?)
            }
            GridSource::TaylorGreen { n, amplitude } => {
                let a = *amplitude;
                sample(*n, |x, y, z| [a * x.sin() * y.cos() * z.cos(), -a * x.cos() * y.sin() * z.cos(), 0.0])
            }
            GridSource::Abc { n, a, b, c } => {
                let (a, b, c) = (*a, *b, *c);
                sample(*n, |x, y, z| {
                    [a * z.sin() + c * y.cos(), b * x.sin() + a * z.cos(), c * y.sin() + b * x.cos()]
                })
            }
            GridSource::Modes { n, modes } => sample(*n, |x, y, z| {
                let mut v = [0.0; 3];
                for m in modes {
                    let phase = m.k[0] as f64 * x + m.k[1] as f64 * y + m.k[2] as f64 * z;
                    for (c, vc) in v.iter_mut().enumerate() {
                        *vc += m.re[c] * phase.cos() - m.im[c] * phase.sin();
                    }
                }
                v
            }),
        }
    }
}

pub fn grid_bytes(g: &SpectralGrid) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    g.write_to(&mut buf)?;
    Ok(buf)
}
