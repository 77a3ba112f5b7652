use nscascade::kernels::{certify, standard_sample_set};
use nscascade::rng::replicate_stream;
use nscascade::sampler::{histogram_csv, validate_sampler, BranchingDensity};
use nscascade::Vec3;
use serde_json::json;

use crate::config::{KernelEvalConfig, KernelVerifyConfig, SamplerCheckConfig};
use crate::run::{csv, CliError, Context};

pub fn verify(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: KernelVerifyConfig = ctx.load()?;
    let kernel = cfg.kernel.build()?;
    let samples = cfg.samples.clone().unwrap_or_else(|| standard_sample_set(&kernel));
    let rep = certify(&kernel, &samples, cfg.tolerance, &cfg.quadrature)?;
    // kernels whose inequality is an equality must also not undershoot
    let equality = kernel.equality_constant();
    let lower_ok = equality.is_none_or(|b| rep.min_ratio() >= b * (1.0 - cfg.tolerance));
    let pass = rep.pass && lower_ok;
    ctx.write_json(
        "certification.json",
        &json!({
            "kernel": kernel.descriptor(),
            "constant": rep.constant,
            "exponent": rep.exponent,
            "tolerance": rep.tolerance,
            "equality": equality.is_some(),
            "min_ratio": rep.min_ratio(),
            "max_ratio": rep.max_ratio(),
            "pass": pass,
            "entries": rep.entries,
        }),
    )?;
    println!("min ratio {:.6}, max ratio {:.6}, B = {:.6}: {}", rep.min_ratio(), rep.max_ratio(), rep.constant, if pass { "pass" } else { "FAIL" });
    ctx.finish(&cfg, pass)
}

pub fn eval(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: KernelEvalConfig = ctx.load()?;
    let kernel = cfg.kernel.build()?;
    let dim = kernel.dim();
    let mut rows = Vec::with_capacity(cfg.points.len());
    for (i, p) in cfg.points.iter().enumerate() {
        if p.len() != dim {
            return Err(CliError::Config { path: format!("points[{i}]"), message: format!("kernel is {dim}-dimensional") });
        }
        let h = if kernel.support().contains(p) { kernel.evaluate(p)? } else { 0.0 };
        let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        row.push(h.to_string());
        rows.push(row);
    }
    let mut header: Vec<String> = (0..dim).map(|d| format!("xi_{d}")).collect();
    header.push("h".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.write("kernel.csv", csv(&header, &rows).as_bytes())?;
    ctx.finish(&cfg, true)
}

pub fn sampler_check(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: SamplerCheckConfig = ctx.load()?;
    let kernel = cfg.kernel.build()?;
    let bd = BranchingDensity::new(&kernel, Vec3(cfg.xi))?;
    let seed = cfg.seed.unwrap_or_default();
    let rep = validate_sampler(&bd, cfg.draws, &cfg.histogram, &mut replicate_stream(seed, 0))?;
    let pass = rep.radial_ks < cfg.ks_limit && rep.angular_p_value > cfg.p_value_min;
    ctx.write("radial.csv", histogram_csv(&rep.radial_histogram).as_bytes())?;
    ctx.write("angular.csv", histogram_csv(&rep.angular_histogram).as_bytes())?;
    ctx.write_json(
        "sampler.json",
        &json!({
            "xi": rep.xi,
            "draws": rep.n_draws,
            "attempts": rep.attempts,
            "radial_ks": rep.radial_ks,
            "angular_chi_square": rep.angular_chi_square,
            "angular_dof": rep.angular_dof,
            "angular_p_value": rep.angular_p_value,
            "reflection_ks": rep.reflection_ks,
            "oracle_mass": rep.oracle_mass,
            "pass": pass,
        }),
    )?;
    println!("radial KS {:.5}, angular p {:.4}: {}", rep.radial_ks, rep.angular_p_value, if pass { "pass" } else { "FAIL" });
    ctx.finish(&cfg, pass)
}
