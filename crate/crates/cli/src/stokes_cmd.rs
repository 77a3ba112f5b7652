use nscascade::stokes::{check_divergence, check_fourier, check_semigroup, oseen_tensor, stokes_evolve, GridForcing};
use nscascade::Vec3;
use serde_json::json;

use crate::config::{StokesCheckConfig, StokesEvalConfig};
use crate::grids::grid_bytes;
use crate::run::{CliError, Context};

pub fn eval(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: StokesEvalConfig = ctx.load()?;
    if cfg.points.is_empty() && cfg.evolve.is_none() {
        return Err(CliError::Config { path: "points".into(), message: "nothing to do: give points or evolve".into() });
    }
    if !cfg.points.is_empty() {
        let mut out = Vec::with_capacity(cfg.points.len());
        for p in &cfg.points {
            let m = oseen_tensor(&Vec3(p.z), p.t, cfg.nu)?;
            out.push(json!({ "z": p.z, "t": p.t, "nu": cfg.nu, "matrix": m }));
        }
        ctx.write_json("oseen.json", &out)?;
    }
    if let Some(ev) = &cfg.evolve {
        let u0 = ev.initial.load()?;
        let forcing = match &ev.forcing {
            Some(src) => GridForcing::Oscillating { grid: src.load()?, omega: ev.omega },
            None => GridForcing::None,
        };
        let sol = stokes_evolve(&u0, &forcing, ev.t, cfg.nu)?;
        ctx.write("velocity.spgr", &grid_bytes(&sol.velocity)?)?;
        ctx.write("pressure.spgr", &grid_bytes(&sol.pressure)?)?;
    }
    ctx.finish(&cfg, true)
}

pub fn check(mut ctx: Context) -> Result<bool, CliError> {
    let cfg: StokesCheckConfig = ctx.load()?;
    let mut pass = true;
    let mut report = serde_json::Map::new();
    if let Some(f) = &cfg.fourier {
        let rep = check_fourier(f.grid, f.box_length, f.t, cfg.nu, f.k_max, f.b_ref)?;
        let ok = rep.max_rel_error < f.tolerance;
        pass &= ok;
        println!("fourier: max relative error {:.3e} over {} modes", rep.max_rel_error, rep.modes);
        report.insert("fourier".into(), json!({ "report": rep, "tolerance": f.tolerance, "pass": ok }));
    }
    let mut semis = Vec::new();
    for s in &cfg.semigroup {
        let rep = check_semigroup(&Vec3(s.x), s.t, s.s, cfg.nu)?;
        let ok = rep.rel_error < cfg.semigroup_tolerance;
        pass &= ok;
        println!("semigroup (t = {}, s = {}): relative error {:.3e}", s.t, s.s, rep.rel_error);
        semis.push(json!({ "report": rep, "pass": ok }));
    }
    report.insert("semigroup".into(), json!(semis));
    if let Some(d) = &cfg.divergence {
        let rep = check_divergence(&Vec3(d.z), d.t, cfg.nu, d.h0, d.levels)?;
        let ok = rep.orders.iter().all(|o| (o - 2.0).abs() < 0.3);
        pass &= ok;
        println!("divergence orders {:?}", rep.orders);
        report.insert("divergence".into(), json!({ "report": rep, "pass": ok }));
    }
    report.insert("pass".into(), json!(pass));
    ctx.write_json("stokes_check.json", &report)?;
    ctx.finish(&cfg, pass)
}
