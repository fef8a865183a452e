use std::path::Path;
use std::time::Instant;

use ckdv_core::integrator::{evolve, suggest_dt, Observer};
use ckdv_core::invariants::{check_apriori, hamiltonian, AprioriCheck, InvariantMonitor};
use ckdv_core::solitons::{soliton_profile, soliton_state, SolitonSpec};
use ckdv_core::stability::{check_dh_lower, check_dh_upper, distance_d1, distance_d2, TranslationMode};
use ckdv_core::{CkdvError, Components, CoupledState, RealField};
use serde::Serialize;

use super::{now_unix, DriftSummary};
use crate::config::{InitialCondition, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output;

#[derive(Serialize)]
struct AprioriSummary {
    d: f64,
    e: f64,
    bound: f64,
    ok: bool,
    worst_margin: f64,
    worst_t: f64,
}

#[derive(Serialize)]
struct SupSummary {
    ok: bool,
    worst_excess: f64,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct StabilitySummary {
    dH: f64,
    upper_ok: bool,
    lower_ok: bool,
    tracking_ok: bool,
    tracking_bound: f64,
    max_dII: f64,
}

#[derive(Serialize)]
struct BlowUp {
    t: f64,
    step: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a RunConfig,
    dt: f64,
    dt_ceiling: f64,
    steps: usize,
    snapshots: Vec<String>,
    drifts: Option<DriftSummary>,
    apriori: Option<AprioriSummary>,
    sup_norm: SupSummary,
    stability: Option<StabilitySummary>,
    blow_up: Option<BlowUp>,
    error: Option<String>,
    wall_seconds: f64,
    exit_code: u8,
    created_unix: u64,
}

/// Decides per sampled step whether to record invariants and/or a snapshot.
struct Schedule<'a> {
    dt: f64,
    n_steps: usize,
    sample_every: usize,
    snapshot_every: usize,
    out: &'a Path,
    monitor: InvariantMonitor,
    snapshots: Vec<String>,
    tracking: Option<Tracking>,
    io_error: Option<CliError>,
}

struct Tracking {
    spec: SolitonSpec,
    max_d2: f64,
    metric_ok: bool,
}

impl Observer for Schedule<'_> {
    fn observe(&mut self, t: f64, state: &CoupledState) -> ckdv_core::Result<()> {
        let n = (t / self.dt).round() as usize;
        let last = n == self.n_steps;
        if n.is_multiple_of(self.sample_every) || last {
            self.monitor.observe(t, state)?;
            if let Some(tr) = &mut self.tracking {
                let reference = CoupledState::new(
                    soliton_profile(&tr.spec, state.grid(), t)?,
                    vec![RealField::zeros(state.grid()); state.n_components()],
                )?;
                let d2 = distance_d2(state, &reference, TranslationMode::UOnly)?.value;
                tr.max_d2 = tr.max_d2.max(d2);
                tr.metric_ok &= d2 <= distance_d1(state, &reference)?;
            }
        }
        let snap = n == 0 || last || (self.snapshot_every > 0 && n.is_multiple_of(self.snapshot_every));
        if snap {
            let name = output::snapshot_name(t);
            if let Err(e) = output::write_fields(&self.out.join(&name), state) {
                self.io_error = Some(e);
                return Err(CkdvError::InvalidParameter(format!("cannot write {name}")));
            }
            self.snapshots.push(name);
        }
        Ok(())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn run(cfg: &RunConfig, out: &Path) -> CliResult<u8> {
    let start = Instant::now();
    std::fs::create_dir_all(out)?;
    let grid = cfg.grid()?;
    let initial = cfg.initial_state(&grid)?;
    let dt = cfg.resolve_dt(&grid, &initial);
    let ceiling = suggest_dt(&grid, &initial);
    if dt > ceiling {
        eprintln!("warning: dt = {dt} exceeds the suggested ceiling {ceiling}; expect instability");
    }
    let solver = cfg.solver(dt);
    let n_steps = solver.n_steps()?;

    let soliton_spec = match &cfg.initial {
        InitialCondition::PerturbedSoliton { speed, .. } => Some(SolitonSpec::new(*speed, 0.0)?),
        _ => None,
    };
    let mut schedule = Schedule {
        dt,
        n_steps,
        sample_every: cfg.sample_every,
        snapshot_every: cfg.snapshot_every,
        out,
        monitor: InvariantMonitor::new(),
        snapshots: Vec::new(),
        tracking: soliton_spec.map(|spec| Tracking {
            spec,
            max_d2: 0.0,
            metric_ok: true,
        }),
        io_error: None,
    };
    let stride = if cfg.snapshot_every > 0 {
        gcd(cfg.sample_every, cfg.snapshot_every)
    } else {
        cfg.sample_every
    };
    let result = evolve(&initial, &solver.clone().with_sample_every(stride), &mut [&mut schedule]);

    if let Some(e) = schedule.io_error.take() {
        return Err(e);
    }
    let mut exit_code = 0;
    let mut blow_up = None;
    let mut error = None;
    match result {
        Ok(_) => {}
        Err(CkdvError::BlowUp { t, step }) => {
            eprintln!("blow-up detected at t = {t} (step {step})");
            blow_up = Some(BlowUp { t, step });
            exit_code = 2;
        }
        Err(e) => {
            eprintln!("error: {e}");
            error = Some(e.to_string());
            exit_code = 2;
        }
    }

    let nc = cfg.n_components;
    output::write_invariants(&out.join("invariants.csv"), nc, &schedule.monitor.records)?;

    let drifts = if schedule.monitor.records.len() > 1 {
        schedule.monitor.drifts().map(DriftSummary::from)
    } else {
        None
    };
    let apriori = match (schedule.monitor.apriori, schedule.monitor.records.is_empty()) {
        (Some(a), false) => {
            let AprioriCheck { ok, worst_margin, worst_t } = check_apriori(&schedule.monitor.records, &a)?;
            Some(AprioriSummary {
                d: a.d,
                e: a.e,
                bound: a.bound,
                ok,
                worst_margin,
                worst_t,
            })
        }
        _ => None,
    };
    let worst_excess = schedule.monitor.worst_sup_excess();
    let sup_norm = SupSummary {
        ok: worst_excess <= 0.0,
        worst_excess,
    };

    let stability = match (&cfg.initial, schedule.tracking.as_ref()) {
        (InitialCondition::PerturbedSoliton { speed, delta, .. }, Some(tr)) => {
            let spec = SolitonSpec::new(*speed, 0.0)?;
            let soliton = soliton_state(&spec, &grid, nc)?;
            let d = if *delta > 0.0 { distance_d1(&initial, &soliton)? } else { 0.0 };
            let dh = hamiltonian(&initial) - hamiltonian(&soliton);
            let tracking_bound = (6.0 * dh.max(0.0) / speed.min(1.0)).sqrt();
            Some(StabilitySummary {
                dH: dh,
                upper_ok: check_dh_upper(&spec, &initial, d)?.ok,
                lower_ok: check_dh_lower(&spec, &initial, TranslationMode::UOnly)?.ok,
                tracking_ok: tr.metric_ok && tr.max_d2 <= tracking_bound + 1e-6,
                tracking_bound,
                max_dII: tr.max_d2,
            })
        }
        _ => None,
    };

    if exit_code == 0 {
        if let Some(a) = &apriori {
            if !a.ok {
                eprintln!("a-priori bound violated at t = {} (margin {:e})", a.worst_t, a.worst_margin);
                exit_code = 3;
            }
        }
        if !sup_norm.ok {
            eprintln!("sup-norm inequality violated (excess {:e})", sup_norm.worst_excess);
            exit_code = 3;
        }
    }

    let summary = Summary {
        config: cfg,
        dt,
        dt_ceiling: ceiling,
        steps: n_steps,
        snapshots: schedule.snapshots,
        drifts,
        apriori,
        sup_norm,
        stability,
        blow_up,
        error,
        wall_seconds: start.elapsed().as_secs_f64(),
        exit_code,
        created_unix: now_unix(),
    };
    output::write_json(&out.join("summary.json"), &summary)?;
    Ok(exit_code)
}
