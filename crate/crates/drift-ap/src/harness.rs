//! Run loop and differences to the drift-fluid limit.

use std::time::Instant;

use drift_ap_core::model::{drift_limit_state, init_case};
use drift_ap_core::stepper::Stepper;
use drift_ap_core::{CaseKind, CaseSpec, ConservedState, Error, GridSpec, PhysParams};

use crate::config::RunConfig;
use crate::HarnessError;

/// Maximum differences to the exact drift-fluid limit over interior cells:
/// relative (in percent) for `n`, `nu_x`, `nu_y`; absolute for `nu_z`,
/// whose limit value is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiffMetrics {
    pub n_rel_pct: f64,
    pub mx_rel_pct: f64,
    pub my_rel_pct: f64,
    pub mz_abs: f64,
}

impl DiffMetrics {
    pub fn as_array(&self) -> [f64; 4] {
        [self.n_rel_pct, self.mx_rel_pct, self.my_rel_pct, self.mz_abs]
    }
}

pub fn diff_from_limit(state: &ConservedState) -> DiffMetrics {
    let r = drift_limit_state();
    let rel = |f: &drift_ap_core::Field, reference: f64| {
        f.interior().map(|(_, _, v)| (v - reference).abs() / reference.abs() * 100.0).fold(0.0, f64::max)
    };
    DiffMetrics {
        n_rel_pct: rel(&state.n, r.n),
        mx_rel_pct: rel(&state.mx, r.mx),
        my_rel_pct: rel(&state.my, r.my),
        mz_abs: state.mz.interior().map(|(_, _, v)| (v - r.mz).abs()).fold(0.0, f64::max),
    }
}

/// Largest field-wise relative difference between two states, in percent.
/// Each field is normalized by the maximum magnitude of that field in `b`.
pub fn max_relative_difference_pct(a: &ConservedState, b: &ConservedState) -> f64 {
    drift_ap_core::error::FieldName::ALL
        .iter()
        .map(|&name| {
            let (fa, fb) = (a.field(name), b.field(name));
            let scale = fb.interior().map(|(_, _, v)| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            fa.interior()
                .zip(fb.interior())
                .map(|((_, _, x), (_, _, y))| (x - y).abs() / scale * 100.0)
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtRecord {
    pub step: usize,
    /// Time at the end of the step.
    pub t: f64,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub state: ConservedState,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: RunConfig,
    /// Metrics of the last accepted state.
    pub metrics: DiffMetrics,
    pub dt_log: Vec<DtRecord>,
    pub steps: usize,
    pub final_time: f64,
    pub wall_seconds: f64,
    /// Stepper diagnostic when the run stopped early on an instability.
    pub diverged: Option<Error>,
    pub final_state: ConservedState,
    pub snapshots: Vec<Snapshot>,
}

impl RunReport {
    pub fn max_dt(&self) -> f64 {
        self.dt_log.iter().map(|r| r.dt).fold(0.0, f64::max)
    }

    pub fn mean_dt(&self) -> f64 {
        if self.dt_log.is_empty() {
            0.0
        } else {
            self.dt_log.iter().map(|r| r.dt).sum::<f64>() / self.dt_log.len() as f64
        }
    }
}

/// Observation times pending after `t`, sorted, always ending at `t_final`.
fn observation_times(config: &RunConfig) -> Vec<f64> {
    let mut times: Vec<f64> = config.snapshot_times.iter().copied().filter(|&t| t < config.t_final).collect();
    times.push(config.t_final);
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

pub fn initial_state(config: &RunConfig) -> Result<(ConservedState, drift_ap_core::BoundarySpec, PhysParams), HarnessError> {
    config.validate()?;
    let grid = GridSpec::unit_square(config.nx, config.ny)?;
    let case = match config.case {
        CaseKind::Prepared => CaseSpec::prepared(config.epsilon),
        CaseKind::Unprepared => CaseSpec::unprepared(config.epsilon, config.epsilon_prime),
    };
    let (state, bc) = init_case(&case, &grid)?;
    let params = PhysParams::test_case(config.model_epsilon());
    Ok((state, bc, params))
}

/// Runs one configuration to `t_final`.
///
/// Each time step is the CFL step, shortened when needed so that every
/// observation time (snapshots and `t_final`) is hit exactly; when less than
/// two CFL steps remain before a target, the remainder is split into two
/// equal steps so that no step falls below half the CFL step. When all
/// interface speeds vanish the step falls back to `t_final / 10`. Stepper
/// errors end the run with `diverged` set; the reported metrics then belong
/// to the last accepted state.
pub fn run(config: &RunConfig) -> Result<RunReport, HarnessError> {
    let (mut state, bc, params) = initial_state(config)?;
    let mode = config.effective_mode();
    let dt_max = config.t_final / 10.0;
    let mut stepper = Stepper::new(&state.grid);
    let mut dt_log = Vec::new();
    let mut snapshots = Vec::new();
    let mut diverged = None;
    let mut t = 0.0f64;
    let mut steps = 0usize;
    let mut dt;

    let targets = observation_times(config);
    let mut next_target = 0usize;

    let start = Instant::now();
    while next_target < targets.len() {
        if config.max_steps.is_some_and(|m| steps >= m) {
            break;
        }
        let target = targets[next_target];
        let remaining = target - t;
        let mut hits = false;
        let choose = |cfl_dt: Option<f64>| {
            let cfl_dt = cfl_dt.unwrap_or(dt_max);
            hits = cfl_dt >= remaining * (1.0 - 1e-12);
            if hits {
                remaining
            } else if 2.0 * cfl_dt > remaining {
                // Split the last two steps evenly rather than leave a sliver.
                0.5 * remaining
            } else {
                cfl_dt
            }
        };
        match stepper.advance(config.scheme, &mut state, &params, mode, &bc, config.cfl, choose) {
            Ok(report) => dt = report.dt,
            Err(e) => {
                diverged = Some(e);
                break;
            }
        }
        steps += 1;
        t = if hits { target } else { t + dt };
        dt_log.push(DtRecord { step: steps, t, dt });
        if hits {
            if target < config.t_final {
                snapshots.push(Snapshot { t, state: state.clone() });
            }
            next_target += 1;
        }
    }
    let wall_seconds = start.elapsed().as_secs_f64();

    Ok(RunReport {
        config: config.clone(),
        metrics: diff_from_limit(&state),
        dt_log,
        steps,
        final_time: t,
        wall_seconds,
        diverged,
        final_state: state,
        snapshots,
    })
}
