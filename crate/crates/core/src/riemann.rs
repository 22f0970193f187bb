//! Interface states, P0 numerical fluxes, interface speeds and the CFL
//! time step.
//!
//! Momentum fluxes are returned pre-multiplied by `epsilon`: the x-momentum
//! flux across an x-face is `avg(eps n u_x^2 + T n) - (eps a / 2) [n u_x]`
//! rather than `avg(n u_x^2 + (T/eps) n) - (a / 2) [n u_x]`. Nothing here
//! divides by `epsilon`, so `epsilon = 0` is an ordinary input.

use crate::error::{Error, Result};
use crate::model::{sound_speed, ConservedState, PhysParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    /// Component index of the face-normal velocity.
    #[inline]
    pub fn normal(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// Whether interface speeds include the sound speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedMode {
    Resolved,
    NonResolved,
}

impl SpeedMode {
    /// Sound speed entering the interface speeds: `sqrt(T/eps)` or `0`.
    pub fn wave_speed(self, params: &PhysParams) -> Result<f64> {
        match self {
            SpeedMode::Resolved => sound_speed(params),
            SpeedMode::NonResolved => Ok(0.0),
        }
    }
}

/// Density and momentum of one cell adjacent to a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellState {
    pub n: f64,
    pub m: [f64; 3],
}

impl CellState {
    pub fn new(n: f64, m: [f64; 3]) -> Self {
        CellState { n, m }
    }

    pub fn from_velocity(n: f64, u: [f64; 3]) -> Self {
        CellState { n, m: [n * u[0], n * u[1], n * u[2]] }
    }

    #[inline]
    pub fn velocity(&self) -> [f64; 3] {
        [self.m[0] / self.n, self.m[1] / self.n, self.m[2] / self.n]
    }

    #[inline]
    pub fn at(state: &ConservedState, i: usize, j: usize) -> Self {
        CellState {
            n: state.n.get(i, j),
            m: [state.mx.get(i, j), state.my.get(i, j), state.mz.get(i, j)],
        }
    }
}

/// Roe-averaged state at a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceState {
    pub n_hat: f64,
    pub u_hat: [f64; 3],
}

impl InterfaceState {
    /// Momentum of the average state, `n_hat * u_hat`.
    pub fn momentum(&self) -> [f64; 3] {
        [self.n_hat * self.u_hat[0], self.n_hat * self.u_hat[1], self.n_hat * self.u_hat[2]]
    }
}

/// Square-root-density weighted average of two states given by density and
/// velocity.
pub fn roe_average(n_l: f64, u_l: [f64; 3], n_r: f64, u_r: [f64; 3]) -> Result<InterfaceState> {
    if !(n_l > 0.0 && n_r > 0.0) {
        return Err(Error::NonPositiveDensity { left: n_l, right: n_r });
    }
    let (sl, sr) = (libm::sqrt(n_l), libm::sqrt(n_r));
    let w = 1.0 / (sl + sr);
    let mut u_hat = [0.0; 3];
    for k in 0..3 {
        u_hat[k] = (sl * u_l[k] + sr * u_r[k]) * w;
    }
    Ok(InterfaceState { n_hat: sl * sr, u_hat })
}

/// Speed bound from the normal velocities of the left cell, the Roe state
/// and the right cell, shifted by the sound speed `c`:
/// `max(|min(u_L - c, u_hat - c)|, |max(u_hat + c, u_R + c)|)`.
#[inline]
pub fn speed_bound(u_left: f64, u_roe: f64, u_right: f64, c: f64) -> f64 {
    let lower = (u_left - c).min(u_roe - c);
    let upper = (u_roe + c).max(u_right + c);
    lower.abs().max(upper.abs())
}

/// Roe-averaged normal velocity; densities must be positive.
#[inline]
fn roe_normal(left: &CellState, right: &CellState, k: usize) -> f64 {
    let (sl, sr) = (libm::sqrt(left.n), libm::sqrt(right.n));
    // sqrt(n) u = m / sqrt(n)
    (left.m[k] / sl + right.m[k] / sr) / (sl + sr)
}

/// Face speed with a precomputed sound speed `c` (`0` for non-resolved).
#[inline]
pub fn face_speed(left: &CellState, right: &CellState, axis: Axis, c: f64) -> f64 {
    let k = axis.normal();
    speed_bound(left.m[k] / left.n, roe_normal(left, right, k), right.m[k] / right.n, c)
}

/// Interface speed `a` at a face with normal `axis`.
pub fn interface_speed(
    left: &CellState,
    right: &CellState,
    axis: Axis,
    mode: SpeedMode,
    params: &PhysParams,
) -> Result<f64> {
    if !(left.n > 0.0 && right.n > 0.0) {
        return Err(Error::NonPositiveDensity { left: left.n, right: right.n });
    }
    let c = mode.wave_speed(params)?;
    Ok(face_speed(left, right, axis, c))
}

/// Pointwise `eps`-scaled momentum flux in direction `axis`:
/// `eps n u_axis u + T n e_axis`.
#[inline]
pub fn physical_momentum_flux(cell: &CellState, axis: Axis, params: &PhysParams) -> [f64; 3] {
    let d = axis.normal();
    let eps = params.epsilon;
    let ud = cell.m[d] / cell.n;
    let mut f = [eps * ud * cell.m[0], eps * ud * cell.m[1], eps * ud * cell.m[2]];
    f[d] += params.temperature * cell.n;
    f
}

/// P0 momentum flux across a face, `eps`-scaled. Component `k` is the flux
/// of `n u_k`.
#[inline]
pub fn momentum_flux(
    left: &CellState,
    right: &CellState,
    axis: Axis,
    a: f64,
    params: &PhysParams,
) -> [f64; 3] {
    let fl = physical_momentum_flux(left, axis, params);
    let fr = physical_momentum_flux(right, axis, params);
    let visc = 0.5 * params.epsilon * a;
    let mut g = [0.0; 3];
    for k in 0..3 {
        g[k] = 0.5 * (fl[k] + fr[k]) - visc * (right.m[k] - left.m[k]);
    }
    g
}

/// Mass flux from (possibly implicit) momenta and explicit densities:
/// `(m_L + m_R)/2 - (a/2)(n_R - n_L)`.
#[inline]
pub fn mass_flux(m_left: f64, m_right: f64, a: f64, n_left: f64, n_right: f64) -> f64 {
    0.5 * (m_left + m_right) - 0.5 * a * (n_right - n_left)
}

/// Maximum interface speed over all x-faces and all y-faces, boundary faces
/// (against ghost cells) included.
pub fn max_face_speeds(state: &ConservedState, mode: SpeedMode, params: &PhysParams) -> Result<(f64, f64)> {
    let c = mode.wave_speed(params)?;
    let g = &state.grid;
    let mut ax = 0.0f64;
    for i in 0..=g.nx {
        for j in 1..=g.ny {
            let a = face_speed(&CellState::at(state, i, j), &CellState::at(state, i + 1, j), Axis::X, c);
            ax = ax.max(a);
        }
    }
    let mut ay = 0.0f64;
    for i in 1..=g.nx {
        for j in 0..=g.ny {
            let a = face_speed(&CellState::at(state, i, j), &CellState::at(state, i, j + 1), Axis::Y, c);
            ay = ay.max(a);
        }
    }
    Ok((ax, ay))
}

/// CFL time step `cfl / (max a_x / dx + max a_y / dy)`.
///
/// Returns [`Error::ZeroSpeed`] when both maxima vanish; callers substitute
/// their own upper bound in that case.
pub fn compute_dt(state: &ConservedState, mode: SpeedMode, params: &PhysParams, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidParams("cfl must lie in (0, 1]"));
    }
    let (ax, ay) = max_face_speeds(state, mode, params)?;
    let rate = ax / state.grid.dx + ay / state.grid.dy;
    if !(rate > 0.0) {
        return Err(Error::ZeroSpeed);
    }
    Ok(cfl / rate)
}

/// Current time, time step and Courant number of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeControls {
    pub cfl: f64,
    pub dt: f64,
    pub t: f64,
}

impl TimeControls {
    pub fn new(cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidParams("cfl must lie in (0, 1]"));
        }
        Ok(TimeControls { cfl, dt: 0.0, t: 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryValues, GridSpec};
    use crate::model::drift_limit_state;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn roe_examples() {
        let s = roe_average(1.0, [-1.0, 1.0, 0.0], 1.0, [-1.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.n_hat, 1.0);
        assert_eq!(s.u_hat, [-1.0, 1.0, 0.0]);

        let s = roe_average(1.0, [0.0; 3], 4.0, [3.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.n_hat, 2.0);
        assert_eq!(s.u_hat[0], 2.0);
        assert_eq!(s.momentum(), [4.0, 0.0, 0.0]);

        let s = roe_average(4.0, [3.0, 0.0, 0.0], 1.0, [0.0; 3]).unwrap();
        assert_eq!(s.n_hat, 2.0);
        assert_eq!(s.u_hat[0], 2.0);

        assert!(matches!(
            roe_average(0.0, [0.0; 3], 1.0, [0.0; 3]),
            Err(Error::NonPositiveDensity { .. })
        ));
    }

    #[test]
    fn speed_examples() {
        let p = PhysParams::test_case(1e-6);
        let s = CellState::from_velocity(1.0, [-1.0, 1.0, 0.0]);
        let a = interface_speed(&s, &s, Axis::X, SpeedMode::Resolved, &p).unwrap();
        assert_relative_eq!(a, 1001.0, max_relative = 1e-12);
        let a = interface_speed(&s, &s, Axis::X, SpeedMode::NonResolved, &p).unwrap();
        assert_eq!(a, 1.0);
        let rest = CellState::from_velocity(1.0, [0.0; 3]);
        let a = interface_speed(&rest, &rest, Axis::X, SpeedMode::Resolved, &p).unwrap();
        assert_relative_eq!(a, 1000.0, max_relative = 1e-12);
        // y-faces use u_y.
        let a = interface_speed(&s, &s, Axis::Y, SpeedMode::NonResolved, &p).unwrap();
        assert_eq!(a, 1.0);

        let p0 = PhysParams::test_case(0.0);
        assert_eq!(interface_speed(&s, &s, Axis::X, SpeedMode::Resolved, &p0), Err(Error::ZeroEpsilon));
        assert_eq!(interface_speed(&s, &s, Axis::X, SpeedMode::NonResolved, &p0), Ok(1.0));
    }

    #[test]
    fn momentum_flux_examples() {
        let p = PhysParams::test_case(1e-6);
        let s = CellState::from_velocity(1.0, [-1.0, 1.0, 0.0]);
        let g = momentum_flux(&s, &s, Axis::X, 1001.0, &p);
        assert_relative_eq!(g[0], 1.000001, max_relative = 1e-14);

        let p0 = PhysParams::test_case(0.0);
        let s = CellState::from_velocity(1.0, [3.0, -2.0, 5.0]);
        assert_eq!(momentum_flux(&s, &s, Axis::X, 7.0, &p0), [1.0, 0.0, 0.0]);
        assert_eq!(momentum_flux(&s, &s, Axis::Y, 7.0, &p0), [0.0, 1.0, 0.0]);

        let p1 = PhysParams::test_case(1.0);
        let l = CellState::new(1.0, [0.0; 3]);
        let r = CellState::new(2.0, [0.0; 3]);
        let g = momentum_flux(&l, &r, Axis::X, 1.0, &p1);
        assert_eq!(g, [1.5, 0.0, 0.0]);
    }

    #[test]
    fn mass_flux_examples() {
        assert_eq!(mass_flux(-1.0, -1.0, 3.0, 1.0, 1.0), -1.0);
        assert_eq!(mass_flux(0.0, 0.0, 1.0, 1.0, 2.0), -0.5);
        assert_eq!(mass_flux(-1.0, 1.0, 5.0, 1.3, 1.3), 0.0);
    }

    fn drift_grid_state() -> ConservedState {
        let g = GridSpec::unit_square(100, 100).unwrap();
        ConservedState::uniform(&g, drift_limit_state())
    }

    #[test]
    fn dt_examples() {
        let s = drift_grid_state();
        let p = PhysParams::test_case(1e-6);
        let dt = compute_dt(&s, SpeedMode::Resolved, &p, 0.5).unwrap();
        assert_relative_eq!(dt, 0.5 / 200_200.0, max_relative = 1e-12);
        assert!((libm::log10(dt) + 5.60).abs() < 0.01);

        let dt = compute_dt(&s, SpeedMode::NonResolved, &p, 0.5).unwrap();
        assert_relative_eq!(dt, 2.5e-3, max_relative = 1e-12);

        let g = GridSpec::unit_square(8, 8).unwrap();
        let rest = ConservedState::uniform(&g, BoundaryValues::new(1.0, 0.0, 0.0, 0.0));
        assert_eq!(compute_dt(&rest, SpeedMode::NonResolved, &p, 0.5), Err(Error::ZeroSpeed));
        assert!(compute_dt(&rest, SpeedMode::NonResolved, &p, 1.5).is_err());
    }

    #[test]
    fn dt_scaling() {
        let p = PhysParams::test_case(1e-3);
        let s = drift_grid_state();
        let dt1 = compute_dt(&s, SpeedMode::Resolved, &p, 0.25).unwrap();
        let dt2 = compute_dt(&s, SpeedMode::Resolved, &p, 0.5).unwrap();
        assert_relative_eq!(dt2, 2.0 * dt1, max_relative = 1e-14);
        let fine = ConservedState::uniform(&GridSpec::unit_square(200, 200).unwrap(), drift_limit_state());
        let dt3 = compute_dt(&fine, SpeedMode::Resolved, &p, 0.5).unwrap();
        assert_relative_eq!(dt3, 0.5 * dt2, max_relative = 1e-14);
    }

    #[test]
    fn momentum_flux_telescopes() {
        // Sum of flux differences along a row equals outer minus inner face.
        let p = PhysParams::test_case(0.3);
        let cells: alloc::vec::Vec<CellState> = (0..12)
            .map(|k| {
                let x = k as f64;
                CellState::from_velocity(1.0 + 0.1 * libm::sin(x), [libm::cos(x), 0.5 * x, -0.2 * x])
            })
            .collect();
        let fluxes: alloc::vec::Vec<[f64; 3]> = cells
            .windows(2)
            .map(|w| {
                let a = interface_speed(&w[0], &w[1], Axis::X, SpeedMode::Resolved, &p).unwrap();
                momentum_flux(&w[0], &w[1], Axis::X, a, &p)
            })
            .collect();
        for k in 0..3 {
            let net: f64 = fluxes.windows(2).map(|f| f[1][k] - f[0][k]).sum();
            let ends = fluxes[fluxes.len() - 1][k] - fluxes[0][k];
            assert_relative_eq!(net, ends, epsilon = 1e-12);
        }
    }

    fn cell() -> impl Strategy<Value = CellState> {
        (0.05f64..10.0, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0)
            .prop_map(|(n, ux, uy, uz)| CellState::from_velocity(n, [ux, uy, uz]))
    }

    proptest! {
        #[test]
        fn roe_swap_invariant(l in cell(), r in cell()) {
            let a = roe_average(l.n, l.velocity(), r.n, r.velocity()).unwrap();
            let b = roe_average(r.n, r.velocity(), l.n, l.velocity()).unwrap();
            prop_assert!((a.n_hat - b.n_hat).abs() <= 1e-14 * a.n_hat);
            for k in 0..3 {
                prop_assert!((a.u_hat[k] - b.u_hat[k]).abs() <= 1e-12 * (1.0 + a.u_hat[k].abs()));
                let (lo, hi) = {
                    let (ul, ur) = (l.velocity()[k], r.velocity()[k]);
                    (ul.min(ur), ul.max(ur))
                };
                prop_assert!(a.u_hat[k] >= lo - 1e-12 && a.u_hat[k] <= hi + 1e-12);
            }
        }

        #[test]
        fn speed_ordering(l in cell(), r in cell(), eps in 1e-8f64..10.0) {
            let p = PhysParams::test_case(eps);
            for axis in [Axis::X, Axis::Y] {
                let res = interface_speed(&l, &r, axis, SpeedMode::Resolved, &p).unwrap();
                let nr = interface_speed(&l, &r, axis, SpeedMode::NonResolved, &p).unwrap();
                let roe = roe_average(l.n, l.velocity(), r.n, r.velocity()).unwrap();
                let un = roe.u_hat[axis.normal()].abs();
                prop_assert!(nr >= un * (1.0 - 1e-12));
                prop_assert!(res >= nr * (1.0 - 1e-12));
            }
        }

        #[test]
        fn fluxes_consistent(s in cell(), eps in 0.0f64..2.0, a in 0.0f64..100.0) {
            let p = PhysParams::test_case(eps);
            for axis in [Axis::X, Axis::Y] {
                let g = momentum_flux(&s, &s, axis, a, &p);
                let f = physical_momentum_flux(&s, axis, &p);
                for k in 0..3 {
                    prop_assert!((g[k] - f[k]).abs() <= 1e-12 * (1.0 + f[k].abs()));
                }
                let m = s.m[axis.normal()];
                prop_assert_eq!(mass_flux(m, m, a, s.n, s.n), m);
            }
        }
    }
}
