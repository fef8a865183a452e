use std::path::Path;

use ckdv_core::integrator::{evolve, SolverConfig};
use ckdv_core::solitons::{soliton_profile, soliton_state, tw_residual, SolitonSpec};
use ckdv_core::{CkdvError, Grid1D};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::output::{cell, write_table};

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const PROPAGATION_TOLERANCE: f64 = 1e-6;

pub struct Options {
    pub speeds: Vec<f64>,
    pub length: f64,
    pub n_points: usize,
    pub dt: f64,
    pub t_end: f64,
}

enum Row {
    Checked { residual: f64, propagation: f64 },
    DoesNotFit(f64),
}

fn check(grid: &Grid1D, speed: f64, opts: &Options) -> CliResult<Row> {
    let spec = SolitonSpec::new(speed, 0.0)?;
    match spec.check_fits(grid) {
        Err(CkdvError::DomainFit { boundary_value, .. }) => return Ok(Row::DoesNotFit(boundary_value)),
        other => other?,
    }
    let residual = tw_residual(&soliton_profile(&spec, grid, 0.0)?, speed);
    let cfg = SolverConfig::new(opts.dt, opts.t_end).with_sample_every(usize::MAX);
    let out = evolve(&soliton_state(&spec, grid, 1)?, &cfg, &mut [])?;
    let exact = soliton_profile(&spec, grid, opts.t_end)?;
    let propagation = out.state.u().sub(&exact)?.max_abs();
    Ok(Row::Checked { residual, propagation })
}

pub fn run(opts: &Options, out: &Path) -> CliResult<u8> {
    if opts.speeds.is_empty() {
        return Err(CliError::Config("--c: at least one speed is required".into()));
    }
    if let Some(c) = opts.speeds.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(CliError::Config(format!("--c: speeds must be positive, got {c}")));
    }
    let grid = Grid1D::new(opts.length, opts.n_points).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::create_dir_all(out)?;
    let rows = opts
        .speeds
        .par_iter()
        .map(|&c| check(&grid, c, opts))
        .collect::<CliResult<Vec<_>>>()?;

    let mut table = Vec::new();
    let (mut misfit, mut failed) = (false, false);
    for (c, row) in opts.speeds.iter().zip(&rows) {
        let line = match row {
            Row::Checked { residual, propagation } => {
                let ok = *residual < RESIDUAL_TOLERANCE && *propagation < PROPAGATION_TOLERANCE;
                failed |= !ok;
                println!("C = {c}: residual {residual:.3e}, error at T = {} {propagation:.3e} {}", opts.t_end, if ok { "ok" } else { "FAIL" });
                vec![cell(*c), cell(*residual), cell(*propagation), if ok { "ok" } else { "fail" }.to_string()]
            }
            Row::DoesNotFit(edge) => {
                misfit = true;
                eprintln!("C = {c}: profile does not decay on L = {} (edge value {edge:e})", opts.length);
                vec![cell(*c), "nan".into(), "nan".into(), "domain-fit".into()]
            }
        };
        table.push(line);
    }
    write_table(
        &out.join("soliton_check.csv"),
        &["C", "tw_residual", "propagation_error", "status"],
        &table,
    )?;
    Ok(if misfit {
        1
    } else if failed {
        3
    } else {
        0
    })
}
