use std::path::Path;

use ckdv_core::integrator::temporal_convergence;
use ckdv_core::solitons::{soliton_state, spatial_refinement, SolitonSpec};
use ckdv_core::Grid1D;
use serde::Serialize;

use super::now_unix;
use crate::error::{CliError, CliResult};
use crate::output::{cell, write_json, write_table};

/// Errors below this are treated as resolved when judging the spatial rates.
pub const SPATIAL_FLOOR: f64 = 1e-12;

pub struct Options {
    pub speed: f64,
    pub length: f64,
    pub n_points: usize,
    pub t_end: f64,
    pub dts: Vec<f64>,
    pub reference_dt: f64,
    pub spatial_points: Vec<usize>,
    pub spatial_dt: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            speed: 1.0,
            length: 40.0 * std::f64::consts::PI,
            n_points: 512,
            t_end: 1.0,
            dts: vec![0.01, 0.005, 0.0025, 0.00125],
            reference_dt: 1.25e-4,
            spatial_points: vec![64, 128, 256, 512],
            spatial_dt: 1e-3,
        }
    }
}

#[derive(Serialize)]
struct Summary {
    temporal_orders: Vec<f64>,
    temporal_ok: bool,
    spatial_rates: Vec<f64>,
    spatial_ok: bool,
    exit_code: u8,
    created_unix: u64,
}

pub fn run(opts: &Options, out: &Path) -> CliResult<u8> {
    let grid = Grid1D::new(opts.length, opts.n_points).map_err(|e| CliError::Config(e.to_string()))?;
    let spec = SolitonSpec::new(opts.speed, 0.0)?;
    std::fs::create_dir_all(out)?;

    let state = soliton_state(&spec, &grid, 2)?;
    let time = temporal_convergence(&state, opts.t_end, &opts.dts, opts.reference_dt)?;
    let rows: Vec<Vec<String>> = time
        .dts
        .iter()
        .zip(&time.errors)
        .enumerate()
        .map(|(i, (dt, e))| {
            let order = if i == 0 { f64::NAN } else { time.orders[i - 1] };
            vec![cell(*dt), cell(*e), cell(order)]
        })
        .collect();
    write_table(&out.join("convergence_time.csv"), &["dt", "error", "order"], &rows)?;
    let temporal_ok = !time.orders.is_empty() && time.orders.iter().all(|p| (3.5..=4.5).contains(p));

    let space = spatial_refinement(&spec, opts.length, &opts.spatial_points, opts.spatial_dt, opts.t_end)?;
    let rates = space.rates();
    let rows: Vec<Vec<String>> = space
        .n_points
        .iter()
        .zip(&space.errors)
        .enumerate()
        .map(|(i, (n, e))| {
            let rate = if i == 0 { f64::NAN } else { rates[i - 1] };
            vec![n.to_string(), cell(*e), cell(rate)]
        })
        .collect();
    write_table(&out.join("convergence_space.csv"), &["n", "error", "rate"], &rows)?;
    let spatial_ok = space.is_super_algebraic(SPATIAL_FLOOR);

    println!("temporal orders {:?} {}", time.orders, if temporal_ok { "ok" } else { "FAIL" });
    println!("spatial rates {rates:?} {}", if spatial_ok { "ok" } else { "FAIL" });
    let exit_code = if temporal_ok && spatial_ok { 0 } else { 3 };
    write_json(
        &out.join("summary.json"),
        &Summary {
            temporal_orders: time.orders,
            temporal_ok,
            spatial_rates: rates,
            spatial_ok,
            exit_code,
            created_unix: now_unix(),
        },
    )?;
    Ok(exit_code)
}
