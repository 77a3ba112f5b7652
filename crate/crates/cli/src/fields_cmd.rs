use nscascade::fields::{
    check_analyticity_inequality, f_norm, leray_project, pressure_from_velocity, random_inequality_samples, scale_relation,
    NormSpec,
};
use nscascade::kernels::Kernel;
use nscascade::rng::replicate_stream;
use nscascade::{CVec3, Vec3};
use serde_json::json;

use crate::config::{FieldsNormConfig, FieldsPressureConfig, FieldsProjectConfig, InequalityConfig};
use crate::grids::grid_bytes;
use crate::run::{CliError, Context};

pub fn project(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: FieldsProjectConfig = ctx.load()?;
    let mut g = cfg.velocity.load()?;
    if g.components != 3 {
        return Err(CliError::Config { path: "velocity".into(), message: format!("needs 3 components, has {}", g.components) });
    }
    g.check_hermitian()?;
    let n = g.len();
    let [n0, n1, n2] = g.dims;
    let mut removed = 0.0f64;
    let mut max_div = 0.0f64;
    for i in 0..n0 {
        for j in 0..n1 {
            for k in 0..n2 {
                let xi = g.frequency(i, j, k);
                if xi.is_zero() {
                    continue;
                }
                let idx = g.index(i, j, k);
                let u = CVec3::new(g.data[idx], g.data[n + idx], g.data[2 * n + idx]);
                let p = leray_project(&u, &xi)?;
                removed = removed.max((u - p).norm());
                max_div = max_div.max(p.dot_real(&xi).norm());
                for c in 0..3 {
                    g.data[c * n + idx] = p[c];
                }
            }
        }
    }
    ctx.write("projected.spgr", &grid_bytes(&g)?)?;
    ctx.write_json("project.json", &json!({ "dims": g.dims, "max_removed": removed, "max_divergence": max_div }))?;
    ctx.finish(&cfg, true)
}

pub fn norm(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: FieldsNormConfig = ctx.load()?;
    let kernel: Kernel = cfg.kernel.build()?;
    let l = &cfg.lattice;
    let spec = NormSpec::lattice(kernel.clone(), cfg.gamma, cfg.horizon, l.r_lo, l.r_hi, l.n_radii, l.times.clone())?;
    let nu = cfg.nu;
    let initial = cfg.initial.clone();
    let field = move |xi: &Vec3, t: f64| -> nscascade::Result<CVec3> {
        Ok(initial.u_hat(&kernel, xi)?.scale_re((-nu * xi.norm_sq() * t).exp()))
    };
    let rep = f_norm(&field, &spec)?;
    let mut scales = Vec::new();
    for &lambda in &cfg.scale_lambdas {
        let (direct, scaled) = scale_relation(&field, &spec, lambda)?;
        let rel = if direct == 0.0 { (scaled - direct).abs() } else { ((scaled - direct) / direct).abs() };
        scales.push(json!({ "lambda": lambda, "norm": direct, "rescaled_norm": scaled, "relative_difference": rel }));
    }
    ctx.write_json("norm.json", &json!({ "norm": rep, "scale_relation": scales }))?;
    println!("sampled norm {:.6e}", rep.value);
    ctx.finish(&cfg, true)
}

pub fn pressure(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: FieldsPressureConfig = ctx.load()?;
    let u = cfg.velocity.load()?;
    let g = cfg.forcing.as_ref().map(|f| f.load()).transpose()?;
    let p = pressure_from_velocity(&u, g.as_ref())?;
    let phys = p.to_physical()?;
    let max = phys[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ctx.write("pressure.spgr", &grid_bytes(&p)?)?;
    ctx.write_json("pressure.json", &json!({ "dims": p.dims, "max_abs_pressure": max }))?;
    ctx.finish(&cfg, true)
}

pub fn inequality(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: InequalityConfig = ctx.load()?;
    let seed = cfg.seed.unwrap_or_default();
    let mut reports = Vec::new();
    let mut pass = true;
    for (i, &nu) in cfg.nu.iter().enumerate() {
        let samples = random_inequality_samples(cfg.samples as usize, &mut replicate_stream(seed, i as u64));
        let rep = check_analyticity_inequality(&samples, nu)?;
        pass &= rep.violations == 0;
        println!("ν = {nu}: {} violations in {} samples", rep.violations, rep.samples);
        reports.push(json!({ "nu": nu, "report": rep }));
    }
    ctx.write_json("inequality.json", &json!({ "checks": reports, "pass": pass }))?;
    ctx.finish(&cfg, pass)
}
