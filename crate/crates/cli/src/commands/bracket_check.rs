use std::f64::consts::PI;
use std::path::Path;

use ckdv_core::dynamics::bracket_consistency;
use ckdv_core::solitons::{soliton_state, SolitonSpec};
use ckdv_core::stability::{make_perturbation, PerturbationMode};
use ckdv_core::{CoupledState, Grid1D, RealField};

use crate::error::{CliError, CliResult};
use crate::output::{cell, write_table};

pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

pub struct Options {
    pub length: f64,
    pub n_points: usize,
    pub n_components: usize,
    pub random_states: u64,
    pub seed: u64,
}

fn trig_state(g: &Grid1D, nc: usize) -> CliResult<CoupledState> {
    let k = 2.0 * PI / g.length();
    let u = RealField::from_fn(g, |x| 0.4 * (3.0 * k * x).sin() + 0.2 * (5.0 * k * x).cos())?;
    let phi = (0..nc)
        .map(|i| RealField::from_fn(g, |x| 0.3 * ((2 + i) as f64 * k * x).cos()))
        .collect::<ckdv_core::Result<Vec<_>>>()?;
    Ok(CoupledState::new(u, phi)?)
}

pub fn run(opts: &Options, out: &Path) -> CliResult<u8> {
    let grid = Grid1D::new(opts.length, opts.n_points).map_err(|e| CliError::Config(e.to_string()))?;
    let nc = opts.n_components;
    if nc == 0 {
        return Err(CliError::Config("--components must be at least 1".into()));
    }
    std::fs::create_dir_all(out)?;

    let mut battery = vec![
        ("soliton".to_string(), soliton_state(&SolitonSpec::new(1.0, 0.0)?, &grid, nc)?),
        ("trig".to_string(), trig_state(&grid, nc)?),
    ];
    for i in 0..opts.random_states {
        let seed = opts.seed + i;
        battery.push((
            format!("random_{seed}"),
            make_perturbation(&grid, nc, 1.0, seed, PerturbationMode::Mixed)?,
        ));
    }

    let mut ok = true;
    let mut worst = 0.0_f64;
    let mut rows = Vec::new();
    for (name, state) in &battery {
        let r = bracket_consistency(state)?;
        let pass = r.inferred_scale == 0.5 && r.residual_half < RESIDUAL_TOLERANCE;
        ok &= pass;
        worst = worst.max(r.residual_half);
        rows.push(vec![
            name.clone(),
            cell(r.residual_half),
            cell(r.residual_one),
            cell(r.inferred_scale),
        ]);
    }
    write_table(
        &out.join("bracket.csv"),
        &["state", "residual_half", "residual_one", "inferred_scale"],
        &rows,
    )?;
    println!(
        "{} states, worst residual at scale 1/2: {worst:.3e} {}",
        battery.len(),
        if ok { "ok" } else { "FAIL" }
    );
    Ok(if ok { 0 } else { 3 })
}
