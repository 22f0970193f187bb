//! Fast self-check suite behind `drift-ap check`: fixed point,
//! conservation, solver residuals and one-step AP-limit consistency on small
//! grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use drift_ap_core::model::{drift_limit_state, init_case};
use drift_ap_core::solvers::{solve_perp_2x2, solve_tridiagonal, PerpSystem, TridiagonalSystem};
use drift_ap_core::stepper::{FaceArrays, Stepper};
use drift_ap_core::{
    BoundarySpec, CaseSpec, ConservedState, Field, GridSpec, PhysParams, Result, SchemeKind, SpeedMode, StepReport,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn verdict(name: &'static str, value: f64, bound: f64, what: &str) -> PropertyResult {
    PropertyResult { name, passed: value <= bound, detail: format!("{what} = {value:.3e} (bound {bound:.1e})") }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> PropertyResult {
    PropertyResult { name, passed: false, detail: e.to_string() }
}

/// Largest interior change after `steps` CFL steps from the exact drift
/// state with matching boundary data.
pub fn fixed_point_drift(
    grid: &GridSpec,
    scheme: SchemeKind,
    epsilon: f64,
    mode: SpeedMode,
    steps: usize,
) -> Result<f64> {
    let bc = BoundarySpec::uniform(drift_limit_state());
    let mut state = ConservedState::uniform(grid, drift_limit_state());
    state.fill_ghosts(&bc)?;
    let start = state.clone();
    let params = PhysParams::test_case(epsilon);
    let mut stepper = Stepper::new(grid);
    for _ in 0..steps {
        stepper.advance(scheme, &mut state, &params, mode, &bc, 0.5, |dt| dt.unwrap_or(1e-3))?;
    }
    Ok(state.max_abs_diff(&start))
}

/// Relative imbalance of one step: interior mass change plus `dt` times the
/// boundary outflow, over the total interior mass before the step.
pub fn conservation_residual(before: &ConservedState, after: &ConservedState, report: &StepReport) -> f64 {
    let area = before.grid.cell_area();
    let m0: f64 = before.n.interior().map(|(_, _, v)| v).sum::<f64>() * area;
    let m1: f64 = after.n.interior().map(|(_, _, v)| v).sum::<f64>() * area;
    (m1 - m0 + report.dt * report.boundary_mass_outflow).abs() / m0.abs()
}

/// Worst [`conservation_residual`] over `steps` calls of `step`.
pub fn max_conservation_residual(
    state: &mut ConservedState,
    steps: usize,
    mut step: impl FnMut(&mut ConservedState) -> Result<StepReport>,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..steps {
        let before = state.clone();
        let report = step(state)?;
        worst = worst.max(conservation_residual(&before, state, &report));
    }
    Ok(worst)
}

/// Density update with the sign of the east-face flux flipped: a
/// deliberately non-conservative mutant of the flux-form update, used to
/// show that the conservation check catches such bugs.
pub fn flipped_sign_mass_update(n_old: &Field, fluxes: &FaceArrays, dt: f64, grid: &GridSpec, out: &mut Field) {
    out.as_mut_slice().copy_from_slice(n_old.as_slice());
    for i in 1..=grid.nx {
        for j in 1..=grid.ny {
            let div = (-fluxes.at_x(i, j) - fluxes.at_x(i - 1, j)) / grid.dx
                + (fluxes.at_y(i, j) - fluxes.at_y(i, j - 1)) / grid.dy;
            out.set(i, j, n_old.get(i, j) - dt * div);
        }
    }
}

/// Unprepared test-case data on a small non-square grid.
pub fn conservation_fixture() -> Result<(ConservedState, BoundarySpec)> {
    let grid = GridSpec::unit_square(16, 12)?;
    init_case(&CaseSpec::unprepared(1e-2, 1e-1), &grid)
}

/// `(scheme, epsilon, mode)` combinations exercised by the checks.
pub const SCHEME_CASES: [(SchemeKind, f64, SpeedMode); 5] = [
    (SchemeKind::Ap, 1e-2, SpeedMode::Resolved),
    (SchemeKind::Ap, 1e-6, SpeedMode::NonResolved),
    (SchemeKind::Conventional, 1e-2, SpeedMode::Resolved),
    (SchemeKind::Conventional, 1.0, SpeedMode::NonResolved),
    (SchemeKind::DriftLimit, 0.0, SpeedMode::NonResolved),
];

fn conservation_all_schemes(steps: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for (scheme, eps, mode) in SCHEME_CASES {
        let (mut state, bc) = conservation_fixture()?;
        let params = PhysParams::test_case(eps);
        let mut stepper = Stepper::new(&state.grid);
        let r = max_conservation_residual(&mut state, steps, |s| {
            stepper.advance(scheme, s, &params, mode, &bc, 0.5, |dt| dt.unwrap_or(1e-3))
        })?;
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Dense Gaussian elimination with partial pivoting; the oracle for the
/// tridiagonal solver.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[p][col] == 0.0 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

pub fn to_dense(sys: &TridiagonalSystem) -> Vec<Vec<f64>> {
    let n = sys.len();
    let mut a = vec![vec![0.0; n]; n];
    for k in 0..n {
        a[k][k] = sys.diag[k];
        if k > 0 {
            a[k][k - 1] = sys.lower[k];
        }
        if k + 1 < n {
            a[k][k + 1] = sys.upper[k];
        }
    }
    a
}

/// Random strictly diagonally dominant tridiagonal system of size `n`.
pub fn random_dominant_system(rng: &mut impl Rng, n: usize) -> TridiagonalSystem {
    let mut lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut upper: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    lower[0] = 0.0;
    upper[n - 1] = 0.0;
    let diag = (0..n)
        .map(|k| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            sign * (lower[k].abs() + upper[k].abs() + rng.gen_range(0.01..2.0))
        })
        .collect();
    let rhs = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
    TridiagonalSystem { lower, diag, upper, rhs }
}

/// Worst relative deviation of the tridiagonal solver from the dense
/// oracle over `count` random systems of size up to `max_n`.
pub fn tridiagonal_oracle_error(seed: u64, count: usize, max_n: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = rng.gen_range(1..=max_n);
        let sys = random_dominant_system(&mut rng, n);
        let x = solve_tridiagonal(&sys)?;
        let reference = dense_solve(to_dense(&sys), sys.rhs.clone()).expect("dominant systems are regular");
        let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for (a, b) in x.iter().zip(&reference) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    Ok(worst)
}

/// Back-substitution residual of the 2x2 Lorentz solve, in ulps of the
/// largest term of each equation.
pub fn perp_residual_ulps(sys: &PerpSystem) -> f64 {
    let (mx, mz) = solve_perp_2x2(sys);
    let k = sys.kappa;
    let r1 = (mx - k * mz - sys.rhs1).abs() / (f64::EPSILON * mx.abs().max((k * mz).abs()).max(sys.rhs1.abs()));
    let r2 = (k * mx + mz - sys.rhs2).abs() / (f64::EPSILON * (k * mx).abs().max(mz.abs()).max(sys.rhs2.abs()));
    let (r1, r2) = (if r1.is_nan() { 0.0 } else { r1 }, if r2.is_nan() { 0.0 } else { r2 });
    r1.max(r2)
}

/// Worst [`perp_residual_ulps`] over `kappa` log-spaced in `[1e-12, 1e12]`
/// plus `kappa = 0`, with random right-hand sides.
pub fn perp_worst_ulps(seed: u64, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for s in 0..samples {
        let kappa = if s == 0 { 0.0 } else { 10f64.powf(rng.gen_range(-12.0..=12.0)) };
        let sys = PerpSystem { kappa, rhs1: rng.gen_range(-10.0..10.0), rhs2: rng.gen_range(-10.0..10.0) };
        worst = worst.max(perp_residual_ulps(&sys));
    }
    worst
}

/// Max-norm difference between one AP step at `epsilon` and one
/// drift-limit step from the same prepared data and time step.
pub fn ap_limit_gap(grid: &GridSpec, epsilon: f64) -> Result<f64> {
    let (state, bc) = init_case(&CaseSpec::prepared(epsilon), grid)?;
    let params = PhysParams::test_case(epsilon);
    let mut stepper = Stepper::new(grid);
    let mut ap = state.clone();
    let report = stepper.advance(SchemeKind::Ap, &mut ap, &params, SpeedMode::NonResolved, &bc, 0.5, |dt| {
        dt.unwrap_or(1e-3)
    })?;
    let mut limit = state;
    stepper.step(SchemeKind::DriftLimit, &mut limit, &params, report.dt, SpeedMode::NonResolved, &bc)?;
    Ok(ap.max_abs_diff(&limit))
}

/// Runs the suite; stops at nothing, every property is reported.
pub fn run_checks() -> Vec<PropertyResult> {
    let mut out = Vec::new();
    let grid = GridSpec::unit_square(20, 20).expect("valid grid");

    for (name, scheme, eps, mode) in [
        ("fixed point, AP eps=1", SchemeKind::Ap, 1.0, SpeedMode::Resolved),
        ("fixed point, AP eps=1e-6", SchemeKind::Ap, 1e-6, SpeedMode::NonResolved),
        ("fixed point, drift limit", SchemeKind::DriftLimit, 0.0, SpeedMode::NonResolved),
        ("fixed point, conventional eps=1", SchemeKind::Conventional, 1.0, SpeedMode::Resolved),
    ] {
        out.push(match fixed_point_drift(&grid, scheme, eps, mode, 100) {
            Ok(d) => verdict(name, d, 1e-12, "max change after 100 steps"),
            Err(e) => failed(name, e),
        });
    }
    out.push(match conservation_all_schemes(10) {
        Ok(r) => verdict("conservation", r, 1e-12, "max relative mass imbalance"),
        Err(e) => failed("conservation", e),
    });
    out.push(match tridiagonal_oracle_error(7, 200, 50) {
        Ok(r) => verdict("tridiagonal vs dense oracle", r, 1e-10, "max relative deviation"),
        Err(e) => failed("tridiagonal vs dense oracle", e),
    });
    out.push(verdict("2x2 Lorentz residual", perp_worst_ulps(11, 2000), 4.0, "max residual in ulps"));
    out.push(match ap_limit_gap(&grid, 1e-14) {
        Ok(d) => verdict("AP limit consistency", d, 1e-8, "max difference to drift-limit step"),
        Err(e) => failed("AP limit consistency", e),
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_oracle_small_example() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = dense_solve(a, vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        assert!(dense_solve(vec![vec![0.0]], vec![1.0]).is_none());
    }

    #[test]
    fn flipped_sign_breaks_conservation() {
        let (mut state, bc) = conservation_fixture().unwrap();
        let params = PhysParams::test_case(1e-2);
        let mut stepper = Stepper::new(&state.grid);
        let r = max_conservation_residual(&mut state, 3, |s| {
            let before = s.clone();
            let report = stepper.advance(SchemeKind::Ap, s, &params, SpeedMode::Resolved, &bc, 0.5, |dt| dt.unwrap())?;
            let g = s.grid;
            flipped_sign_mass_update(&before.n, stepper.mass_fluxes(), report.dt, &g, &mut s.n);
            Ok(report)
        })
        .unwrap();
        assert!(r > 1e-6, "mutant went unnoticed: {r:e}");
    }

    #[test]
    fn suite_passes() {
        for p in run_checks() {
            assert!(p.passed, "{}: {}", p.name, p.detail);
        }
    }
}
