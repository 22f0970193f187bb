use drift_ap_core::mesh::BoundaryValues;
use drift_ap_core::model::{drift_limit_state, init_case};
use drift_ap_core::riemann::{momentum_flux, CellState};
use drift_ap_core::solvers::{assemble_parallel_column, solve_perp_2x2, solve_tridiagonal};
use drift_ap_core::stepper::{explicit_divergences, face_speeds, step_ap, step_conventional, step_drift_limit, Stepper};
use drift_ap_core::*;
use proptest::prelude::*;

/// Plain Gaussian elimination with partial pivoting on the dense matrix.
fn dense_solve(sys: &TridiagonalSystem) -> Vec<f64> {
    let n = sys.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for k in 0..n {
        a[k][k] = sys.diag[k];
        if k > 0 {
            a[k][k - 1] = sys.lower[k];
        }
        if k + 1 < n {
            a[k][k + 1] = sys.upper[k];
        }
        a[k][n] = sys.rhs[k];
    }
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..=n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    x
}

fn dominant_system() -> impl Strategy<Value = TridiagonalSystem> {
    (1usize..=50).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec((0.01f64..3.0, any::<bool>()), n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
            .prop_map(move |(mut lower, mut upper, margin, rhs)| {
                lower[0] = 0.0;
                upper[n - 1] = 0.0;
                let diag = (0..n)
                    .map(|k| {
                        let d = lower[k].abs() + upper[k].abs() + margin[k].0;
                        if margin[k].1 { d } else { -d }
                    })
                    .collect();
                TridiagonalSystem { lower, diag, upper, rhs }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tridiagonal_matches_dense_elimination(sys in dominant_system()) {
        let x = solve_tridiagonal(&sys).unwrap();
        let reference = dense_solve(&sys);
        let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for (a, b) in x.iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn perp_residual_within_four_ulps(log_kappa in -12.0f64..12.0, zero in any::<bool>(), r1 in -10.0f64..10.0, r2 in -10.0f64..10.0) {
        let kappa = if zero { 0.0 } else { 10f64.powf(log_kappa) };
        let (mx, mz) = solve_perp_2x2(&PerpSystem { kappa, rhs1: r1, rhs2: r2 });
        let s1 = mx.abs().max((kappa * mz).abs()).max(r1.abs());
        let s2 = (kappa * mx).abs().max(mz.abs()).max(r2.abs());
        prop_assert!((mx - kappa * mz - r1).abs() <= 4.0 * f64::EPSILON * s1);
        prop_assert!((kappa * mx + mz - r2).abs() <= 4.0 * f64::EPSILON * s2);
    }

    /// The eps-prescaled flux is eps times the textbook P0 flux with
    /// pressure `(T / eps) n`.
    #[test]
    fn prescaled_flux_matches_textbook_form(
        eps in 1e-6f64..1.0,
        nl in 0.1f64..3.0, nr in 0.1f64..3.0,
        ul in prop::array::uniform3(-2.0f64..2.0), ur in prop::array::uniform3(-2.0f64..2.0),
        a in 0.0f64..50.0,
    ) {
        let params = PhysParams::test_case(eps);
        let (l, r) = (CellState::from_velocity(nl, ul), CellState::from_velocity(nr, ur));
        let g = momentum_flux(&l, &r, Axis::X, a, &params);
        for k in 0..3 {
            let p = if k == 0 { params.temperature / eps } else { 0.0 };
            let fl = nl * ul[0] * ul[k] + p * nl;
            let fr = nr * ur[0] * ur[k] + p * nr;
            let textbook = 0.5 * (fl + fr) - 0.5 * a * (r.m[k] - l.m[k]);
            prop_assert!((g[k] / eps - textbook).abs() <= 1e-9 * (1.0 + textbook.abs()));
        }
    }
}

fn unprepared(nx: usize, ny: usize) -> (ConservedState, BoundarySpec) {
    init_case(&CaseSpec::unprepared(1e-2, 5e-2), &GridSpec::unit_square(nx, ny).unwrap()).unwrap()
}

fn mass(s: &ConservedState) -> f64 {
    s.n.interior().map(|(_, _, v)| v).sum::<f64>() * s.grid.cell_area()
}

#[test]
fn every_scheme_conserves_mass() {
    for (scheme, eps, mode) in [
        (SchemeKind::Ap, 1e-2, SpeedMode::Resolved),
        (SchemeKind::Ap, 1e-6, SpeedMode::NonResolved),
        (SchemeKind::Conventional, 1e-2, SpeedMode::Resolved),
        (SchemeKind::DriftLimit, 0.0, SpeedMode::NonResolved),
    ] {
        let (mut state, bc) = unprepared(13, 9);
        let params = PhysParams::test_case(eps);
        let mut stepper = Stepper::new(&state.grid);
        for _ in 0..15 {
            let m0 = mass(&state);
            let r = stepper.advance(scheme, &mut state, &params, mode, &bc, 0.5, |dt| dt.unwrap()).unwrap();
            let imbalance = (mass(&state) - m0 + r.dt * r.boundary_mass_outflow).abs() / m0;
            assert!(imbalance <= 1e-12, "{scheme:?}: {imbalance:e}");
        }
    }
}

#[test]
fn ap_step_approaches_limit_linearly() {
    let grid = GridSpec::unit_square(12, 12).unwrap();
    let (state, bc) = init_case(&CaseSpec::unprepared(1e-2, 1e-2), &grid).unwrap();
    let dt = 1e-3;
    let (limit, _) = step_drift_limit(&state, &PhysParams::test_case(0.0), dt, &bc).unwrap();
    let gaps: Vec<f64> = [1e-8, 1e-10, 1e-12]
        .iter()
        .map(|&eps| {
            let (s, _) = step_ap(&state, &PhysParams::test_case(eps), dt, SpeedMode::NonResolved, &bc).unwrap();
            s.max_abs_diff(&limit)
        })
        .collect();
    // Each factor 100 in eps divides the gap by about 100.
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((50.0..200.0).contains(&ratio), "gaps {gaps:?}");
    }
    // The inertia term eps/dt enters the parallel solve, whose weakest mode
    // has eigenvalue about T dt pi^2; so gap <~ eps / (T dt^2 pi^2).
    let amplification = 1.0 / (dt * dt * std::f64::consts::PI.powi(2));
    for (gap, eps) in gaps.iter().zip([1e-8, 1e-10, 1e-12]) {
        assert!(*gap <= 10.0 * amplification * eps, "gaps {gaps:?}");
    }
}

#[test]
fn runs_are_deterministic() {
    let go = || {
        let (mut state, bc) = unprepared(10, 14);
        let params = PhysParams::test_case(1e-3);
        let mut stepper = Stepper::new(&state.grid);
        for _ in 0..20 {
            stepper.advance(SchemeKind::Ap, &mut state, &params, SpeedMode::Resolved, &bc, 0.5, |dt| dt.unwrap()).unwrap();
        }
        state
    };
    assert_eq!(go(), go());
}

/// Solving the parallel columns one by one, in reverse order, reproduces the
/// stepper's `n u_y`: columns are independent.
#[test]
fn parallel_columns_are_independent() {
    let (state, bc) = unprepared(9, 11);
    let params = PhysParams::test_case(1e-4);
    let dt = 2e-4;
    let (next, _) = step_ap(&state, &params, dt, SpeedMode::Resolved, &bc).unwrap();
    let div = explicit_divergences(&state, &params, SpeedMode::Resolved).unwrap();
    for i in (1..=state.grid.nx).rev() {
        let sys = assemble_parallel_column(i, &state, &next.mx, &div.y, &params, dt, &bc);
        let col = solve_tridiagonal(&sys).unwrap();
        for (j, v) in col.iter().enumerate() {
            let expected = next.my.get(i, j + 1);
            assert!((v - expected).abs() <= 1e-12 * (1.0 + expected.abs()), "column {i}, row {}", j + 1);
        }
    }
}

#[test]
fn conventional_and_ap_agree_for_unit_epsilon_one_step() {
    let (state, bc) = unprepared(10, 10);
    let params = PhysParams::test_case(1.0);
    let (a, _) = step_ap(&state, &params, 1e-4, SpeedMode::Resolved, &bc).unwrap();
    let (c, _) = step_conventional(&state, &params, 1e-4, SpeedMode::Resolved, &bc).unwrap();
    // Same consistent model; the splittings differ by O(dt) per step.
    assert!(a.max_abs_diff(&c) < 1e-3);
}

#[test]
fn drift_state_survives_long_runs() {
    let grid = GridSpec::unit_square(8, 8).unwrap();
    let bc = BoundarySpec::uniform(drift_limit_state());
    let mut s = ConservedState::uniform(&grid, BoundaryValues::new(1.0, -1.0, 1.0, 0.0));
    s.fill_ghosts(&bc).unwrap();
    let start = s.clone();
    let mut stepper = Stepper::new(&grid);
    for _ in 0..1000 {
        stepper.step(SchemeKind::Ap, &mut s, &PhysParams::test_case(1e-6), 1e-2, SpeedMode::NonResolved, &bc).unwrap();
    }
    assert!(s.max_abs_diff(&start) < 1e-12);
}

/// The stepper's cached speeds and divergences match the face-by-face
/// reference path.
#[test]
fn cached_path_matches_reference() {
    for (eps, mode) in [(1e-3, SpeedMode::Resolved), (1e-6, SpeedMode::NonResolved)] {
        let (mut state, bc) = unprepared(11, 7);
        let params = PhysParams::test_case(eps);
        let mut stepper = Stepper::new(&state.grid);
        for _ in 0..5 {
            let before = state.clone();
            stepper.advance(SchemeKind::Ap, &mut state, &params, mode, &bc, 0.5, |dt| dt.unwrap()).unwrap();
            let speeds = face_speeds(&before, mode, &params).unwrap();
            for (a, b) in stepper.face_speeds().x.iter().chain(&stepper.face_speeds().y).zip(speeds.x.iter().chain(&speeds.y)) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
            let div = explicit_divergences(&before, &params, mode).unwrap();
            let got = stepper.divergence();
            for (f, g) in [(&got.x, &div.x), (&got.y, &div.y), (&got.z, &div.z)] {
                for ((_, _, a), (_, _, b)) in f.interior().zip(g.interior()) {
                    assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }
}
