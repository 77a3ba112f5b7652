use nscascade::cascade::{check_self_similarity, linear_estimate, linear_exact, Cascade, McEstimate};
use nscascade::rng::derive_seed;
use nscascade::{CVec3, Vec3};

use crate::config::{ComplexVector, LinearRunConfig, NsRunConfig, NsSelfsimConfig, NsSteadyConfig, NsTruncatedConfig};
use crate::run::{csv, CliError, Context};

const ESTIMATE_HEADER: [&str; 23] = [
    "xi_x", "xi_y", "xi_z", "t", "u1_re", "u1_im", "u2_re", "u2_im", "u3_re", "u3_im", "se1_re", "se1_im", "se2_re",
    "se2_im", "se3_re", "se3_im", "replicates", "excluded", "max_depth", "mean_nodes", "max_nodes", "h", "seed",
];

fn complex(v: &ComplexVector) -> CVec3 {
    CVec3::from_parts(v.re, v.im)
}

// û and its standard errors; exterior frequencies give exact zeros
fn estimate_row(xi: &[f64; 3], t: f64, est: &McEstimate, seed: u64) -> Vec<String> {
    let u = est.u_hat();
    let mut row: Vec<String> = xi.iter().map(|v| v.to_string()).collect();
    row.push(t.to_string());
    for c in 0..3 {
        row.push(u[c].re.to_string());
        row.push(u[c].im.to_string());
    }
    for c in 0..3 {
        row.push((est.stderr_re[c] * est.weight).to_string());
        row.push((est.stderr_im[c] * est.weight).to_string());
    }
    row.push(est.replicates.to_string());
    row.push(est.excluded.to_string());
    row.push(est.tree_stats.max_depth.to_string());
    row.push(est.tree_stats.mean_nodes.to_string());
    row.push(est.tree_stats.max_nodes.to_string());
    row.push(est.weight.to_string());
    row.push(seed.to_string());
    row
}

fn lattice_run(
    ctx: &mut Context,
    xis: &[[f64; 3]],
    ts: &[f64],
    seed: u64,
    mut f: impl FnMut(&Vec3, f64, u64) -> nscascade::Result<McEstimate>,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut index = 0;
    for xi in xis {
        for &t in ts {
            let s = derive_seed(seed, index);
            index += 1;
            let est = f(&Vec3(*xi), t, s)?;
            rows.push(estimate_row(xi, t, &est, s));
        }
    }
    ctx.write("estimates.csv", csv(&ESTIMATE_HEADER, &rows).as_bytes())
}

pub fn linear(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: LinearRunConfig = ctx.load()?;
    let seed = cfg.seed.unwrap_or_default();
    let u0 = complex(&cfg.u0);
    let b = Vec3(cfg.b);
    let mut rows = Vec::new();
    let mut worst_z = 0.0f64;
    let mut index = 0;
    for xi in &cfg.lattice.xi {
        for &t in &cfg.lattice.t {
            let s = derive_seed(seed, index);
            index += 1;
            let x = Vec3(*xi);
            let est = linear_estimate(cfg.a, &b, &u0, &x, t, cfg.replicates, s)?;
            let exact = linear_exact(cfg.a, &b, &u0, &x, t);
            let mut row: Vec<String> = xi.iter().map(|v| v.to_string()).collect();
            row.push(t.to_string());
            for c in 0..3 {
                let zr = z_score(est.mean[c].re - exact[c].re, est.stderr_re[c]);
                let zi = z_score(est.mean[c].im - exact[c].im, est.stderr_im[c]);
                worst_z = worst_z.max(zr.abs()).max(zi.abs());
                for v in [est.mean[c].re, est.mean[c].im, est.stderr_re[c], est.stderr_im[c], exact[c].re, exact[c].im] {
                    row.push(v.to_string());
                }
            }
            row.push(s.to_string());
            rows.push(row);
        }
    }
    let mut header = vec!["xi_x".to_string(), "xi_y".into(), "xi_z".into(), "t".into()];
    for c in 1..=3 {
        for part in ["re", "im", "se_re", "se_im", "exact_re", "exact_im"] {
            header.push(format!("u{c}_{part}"));
        }
    }
    header.push("seed".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.write("linear.csv", csv(&header, &rows).as_bytes())?;
    println!("largest |z| against the closed form: {worst_z:.3}");
    ctx.finish(&cfg, true)
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / se
    }
}

pub fn run(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: NsRunConfig = ctx.load()?;
    let engine = Cascade::new(cfg.cascade.build()?)?;
    let n = cfg.replicates;
    lattice_run(&mut ctx, &cfg.lattice.xi, &cfg.lattice.t, cfg.seed.unwrap_or_default(), |xi, t, s| engine.estimate(xi, t, n, s))?;
    ctx.finish(&cfg, true)
}

pub fn truncated(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: NsTruncatedConfig = ctx.load()?;
    let engine = Cascade::new(cfg.cascade.build()?)?;
    let (n, g) = (cfg.replicates, cfg.generation);
    lattice_run(&mut ctx, &cfg.lattice.xi, &cfg.lattice.t, cfg.seed.unwrap_or_default(), |xi, t, s| {
        engine.estimate_truncated(xi, t, g, n, s)
    })?;
    ctx.finish(&cfg, true)
}

pub fn steady(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: NsSteadyConfig = ctx.load()?;
    let engine = Cascade::new(cfg.cascade.build()?)?;
    let n = cfg.replicates;
    // t is reported as infinity for the time-free cascade
    lattice_run(&mut ctx, &cfg.xi, &[f64::INFINITY], cfg.seed.unwrap_or_default(), |xi, _, s| engine.estimate_steady(xi, n, s))?;
    ctx.finish(&cfg, true)
}

pub fn selfsim(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: NsSelfsimConfig = ctx.load()?;
    let engine = Cascade::new(cfg.cascade.build()?)?;
    let seed = cfg.seed.unwrap_or_default();
    let points: Vec<(Vec3, f64)> = cfg.points.iter().map(|p| (Vec3(p.xi), p.t)).collect();
    let rep = check_self_similarity(&engine, cfg.lambda, &points, cfg.replicates, (derive_seed(seed, 0), derive_seed(seed, 1)))?;
    let pass = rep.max_z < cfg.z_limit;
    let mut rows = Vec::new();
    for p in &rep.points {
        let mut row: Vec<String> = p.xi.iter().map(|v| v.to_string()).collect();
        row.push(p.t.to_string());
        for c in 0..3 {
            for v in [p.direct[c].re, p.direct[c].im, p.rescaled[c].re, p.rescaled[c].im, p.z_re[c], p.z_im[c]] {
                row.push(v.to_string());
            }
        }
        rows.push(row);
    }
    let mut header = vec!["xi_x".to_string(), "xi_y".into(), "xi_z".into(), "t".into()];
    for c in 1..=3 {
        for part in ["direct_re", "direct_im", "rescaled_re", "rescaled_im", "z_re", "z_im"] {
            header.push(format!("u{c}_{part}"));
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.write("selfsim.csv", csv(&header, &rows).as_bytes())?;
    ctx.write_json("selfsim.json", &serde_json::json!({ "lambda": rep.lambda, "max_z": rep.max_z, "z_limit": cfg.z_limit, "pass": pass }))?;
    println!("largest |z| = {:.3} (limit {}): {}", rep.max_z, cfg.z_limit, if pass { "pass" } else { "FAIL" });
    ctx.finish(&cfg, pass)
}
