//! One-step advancement for the AP, conventional and drift-limit schemes.
//!
//! AP step, in order:
//! 1. explicit `eps`-scaled momentum flux divergences at level `m`;
//! 2. per-cell implicit Lorentz solve for `(n u_x, n u_z)`;
//! 3. per-column implicit parallel solve for `n u_y`, whose right-hand side
//!    uses the mixed derivative of the new `n u_x`;
//! 4. density update with the new momenta in the mass flux.
//!
//! The conventional step updates the density first with explicit mass
//! fluxes, then solves the Lorentz rotation, then updates `n u_y`
//! explicitly. The drift-limit step is the AP step at `eps = 0` with
//! non-resolved speeds.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, FieldName, Result};
use crate::mesh::{BoundarySpec, Field, GridSpec};
use crate::model::{ConservedState, PhysParams};
use crate::riemann::{face_speed, mass_flux, momentum_flux, Axis, CellState, SpeedMode};
use crate::solvers::{parallel_coefficients, parallel_rhs_into, solve_perp_2x2, FactoredTridiagonal, PerpSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Ap,
    Conventional,
    DriftLimit,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Ap => "ap",
            SchemeKind::Conventional => "conventional",
            SchemeKind::DriftLimit => "drift-limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Largest interior `|new - old|` for `n, nu_x, nu_y, nu_z`.
    pub max_update: [f64; 4],
    pub density_positive: bool,
    pub finite: bool,
    /// Net mass leaving the domain through its boundary faces per unit time.
    pub boundary_mass_outflow: f64,
}

/// Per-cell `eps`-scaled divergence of the momentum fluxes, one field per
/// momentum component. The x- and y-components include the pressure term.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub x: Field,
    pub y: Field,
    pub z: Field,
}

/// Interface speeds on every x-face and y-face, boundary faces included.
///
/// X-face `(i, j)` separates cells `i` and `i + 1` (`i = 0..=nx`,
/// `j = 1..=ny`); y-face `(i, j)` separates cells `j` and `j + 1`
/// (`i = 1..=nx`, `j = 0..=ny`).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceArrays {
    nx: usize,
    ny: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceArrays {
    pub fn new(grid: &GridSpec) -> Self {
        FaceArrays {
            nx: grid.nx,
            ny: grid.ny,
            x: vec![0.0; (grid.nx + 1) * grid.ny],
            y: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    #[inline]
    pub fn x_index(&self, i: usize, j: usize) -> usize {
        i * self.ny + (j - 1)
    }

    #[inline]
    pub fn y_index(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.ny + 1) + j
    }

    #[inline]
    pub fn at_x(&self, i: usize, j: usize) -> f64 {
        self.x[self.x_index(i, j)]
    }

    #[inline]
    pub fn at_y(&self, i: usize, j: usize) -> f64 {
        self.y[self.y_index(i, j)]
    }

    /// Net outward flux through the domain boundary (fluxes times face
    /// lengths).
    pub fn boundary_outflow(&self, grid: &GridSpec) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let east_west: f64 = (1..=ny).map(|j| self.at_x(nx, j) - self.at_x(0, j)).sum();
        let north_south: f64 = (1..=nx).map(|i| self.at_y(i, ny) - self.at_y(i, 0)).sum();
        east_west * grid.dy + north_south * grid.dx
    }
}

/// Per-cell quantities shared by every face of a step: `m / sqrt(n)`,
/// `sqrt(n)`, normal velocities and the pointwise `eps`-scaled momentum
/// fluxes in x and y. Storage-indexed, ghosts included.
struct CellCache {
    sqrt_n: Vec<f64>,
    m_over_sqrt: [Vec<f64>; 2],
    u: [Vec<f64>; 2],
    m: Vec<[f64; 3]>,
    flux: [Vec<[f64; 3]>; 2],
}

impl CellCache {
    fn new(grid: &GridSpec) -> Self {
        let len = grid.storage_len();
        CellCache {
            sqrt_n: vec![0.0; len],
            m_over_sqrt: [vec![0.0; len], vec![0.0; len]],
            u: [vec![0.0; len], vec![0.0; len]],
            m: vec![[0.0; 3]; len],
            flux: [vec![[0.0; 3]; len], vec![[0.0; 3]; len]],
        }
    }

    /// Pointwise quantities once per cell instead of once per adjacent face.
    fn fill(&mut self, state: &ConservedState, params: &PhysParams) {
        let (n, mx, my, mz) = (state.n.as_slice(), state.mx.as_slice(), state.my.as_slice(), state.mz.as_slice());
        let len = n.len();
        let (eps, t) = (params.epsilon, params.temperature);
        let (mx, my, mz) = (&mx[..len], &my[..len], &mz[..len]);
        let sqrt_n = &mut self.sqrt_n[..len];
        let [mos_x, mos_y] = &mut self.m_over_sqrt;
        let (mos_x, mos_y) = (&mut mos_x[..len], &mut mos_y[..len]);
        let [ux, uy] = &mut self.u;
        let (ux, uy) = (&mut ux[..len], &mut uy[..len]);
        let m_out = &mut self.m[..len];
        let [fx, fy] = &mut self.flux;
        let (fx, fy) = (&mut fx[..len], &mut fy[..len]);
        for k in 0..len {
            let m = [mx[k], my[k], mz[k]];
            m_out[k] = m;
            let s = libm::sqrt(n[k]);
            let inv_n = 1.0 / n[k];
            sqrt_n[k] = s;
            let (u0, u1) = (m[0] * inv_n, m[1] * inv_n);
            ux[k] = u0;
            uy[k] = u1;
            // sqrt(n) u = m / sqrt(n)
            mos_x[k] = u0 * s;
            mos_y[k] = u1 * s;
            let p = t * n[k];
            fx[k] = [eps * u0 * m[0] + p, eps * u0 * m[1], eps * u0 * m[2]];
            fy[k] = [eps * u1 * m[0], eps * u1 * m[1] + p, eps * u1 * m[2]];
        }
    }
}

/// Cell-storage range of column `i`, rows `j0..j0 + len`.
#[inline]
fn rows(grid: &GridSpec, i: usize, j0: usize, len: usize) -> core::ops::Range<usize> {
    let start = grid.index(i, j0);
    start..start + len
}

/// `speed_bound` for a run of faces with left cells `l` and right cells
/// `r`. Plain comparisons instead of `min`/`max`: the state is screened for
/// NaN after every step. Returns the largest speed.
fn speed_run(cache: &CellCache, d: usize, l: core::ops::Range<usize>, r: core::ops::Range<usize>, c: f64, out: &mut [f64]) -> f64 {
    let n = out.len();
    let (mos_l, mos_r) = (&cache.m_over_sqrt[d][l.clone()], &cache.m_over_sqrt[d][r.clone()]);
    let (s_l, s_r) = (&cache.sqrt_n[l.clone()], &cache.sqrt_n[r.clone()]);
    let (u_l, u_r) = (&cache.u[d][l], &cache.u[d][r]);
    assert!(mos_l.len() == n && mos_r.len() == n && s_l.len() == n && s_r.len() == n && u_l.len() == n && u_r.len() == n);
    let mut amax = 0.0f64;
    for k in 0..n {
        let roe = (mos_l[k] + mos_r[k]) / (s_l[k] + s_r[k]);
        let (ul, ur) = (u_l[k], u_r[k]);
        let lower = (if ul < roe { ul } else { roe } - c).abs();
        let upper = (if roe > ur { roe } else { ur } + c).abs();
        let a = if lower > upper { lower } else { upper };
        out[k] = a;
        if a > amax {
            amax = a;
        }
    }
    amax
}

/// Face speeds from the cell cache; returns `(max a_x, max a_y)`.
fn cached_speeds_into(grid: &GridSpec, cache: &CellCache, c: f64, out: &mut FaceArrays) -> (f64, f64) {
    let ny = grid.ny;
    let (mut ax, mut ay) = (0.0f64, 0.0f64);
    for (i, chunk) in out.x.chunks_exact_mut(ny).enumerate() {
        ax = ax.max(speed_run(cache, 0, rows(grid, i, 1, ny), rows(grid, i + 1, 1, ny), c, chunk));
    }
    for (i, chunk) in out.y.chunks_exact_mut(ny + 1).enumerate() {
        let i = i + 1;
        ay = ay.max(speed_run(cache, 1, rows(grid, i, 0, ny + 1), rows(grid, i, 1, ny + 1), c, chunk));
    }
    (ax, ay)
}

fn face_speeds_into(state: &ConservedState, c: f64, out: &mut FaceArrays) {
    let g = &state.grid;
    for i in 0..=g.nx {
        for j in 1..=g.ny {
            let k = out.x_index(i, j);
            out.x[k] = face_speed(&CellState::at(state, i, j), &CellState::at(state, i + 1, j), Axis::X, c);
        }
    }
    for i in 1..=g.nx {
        for j in 0..=g.ny {
            let k = out.y_index(i, j);
            out.y[k] = face_speed(&CellState::at(state, i, j), &CellState::at(state, i, j + 1), Axis::Y, c);
        }
    }
}

/// Computes face speeds for `mode` into `out`.
pub fn face_speeds(state: &ConservedState, mode: SpeedMode, params: &PhysParams) -> Result<FaceArrays> {
    let mut out = FaceArrays::new(&state.grid);
    face_speeds_into(state, mode.wave_speed(params)?, &mut out);
    Ok(out)
}

/// Scratch for the momentum flux divergence: one flux triple per face.
struct FluxScratch {
    x: Vec<[f64; 3]>,
    y: Vec<[f64; 3]>,
}

fn divergences_into(
    state: &ConservedState,
    speeds: &FaceArrays,
    params: &PhysParams,
    scratch: &mut FluxScratch,
    div: &mut Divergence,
) {
    let g = &state.grid;
    for i in 0..=g.nx {
        for j in 1..=g.ny {
            let k = speeds.x_index(i, j);
            scratch.x[k] = momentum_flux(
                &CellState::at(state, i, j),
                &CellState::at(state, i + 1, j),
                Axis::X,
                speeds.x[k],
                params,
            );
        }
    }
    for i in 1..=g.nx {
        for j in 0..=g.ny {
            let k = speeds.y_index(i, j);
            scratch.y[k] = momentum_flux(
                &CellState::at(state, i, j),
                &CellState::at(state, i, j + 1),
                Axis::Y,
                speeds.y[k],
                params,
            );
        }
    }
    for i in 1..=g.nx {
        for j in 1..=g.ny {
            let (e, w) = (scratch.x[speeds.x_index(i, j)], scratch.x[speeds.x_index(i - 1, j)]);
            let (n, s) = (scratch.y[speeds.y_index(i, j)], scratch.y[speeds.y_index(i, j - 1)]);
            let d = |k: usize| (e[k] - w[k]) / g.dx + (n[k] - s[k]) / g.dy;
            div.x.set(i, j, d(0));
            div.y.set(i, j, d(1));
            div.z.set(i, j, d(2));
        }
    }
}

/// P0 momentum fluxes for a run of faces with left cells `l`, right cells
/// `r` and speeds `a`.
fn flux_run(
    cache: &CellCache,
    d: usize,
    l: core::ops::Range<usize>,
    r: core::ops::Range<usize>,
    a: &[f64],
    eps: f64,
    out: &mut [[f64; 3]],
) {
    let n = out.len();
    let (f_l, f_r) = (&cache.flux[d][l.clone()], &cache.flux[d][r.clone()]);
    let (m_l, m_r) = (&cache.m[l], &cache.m[r]);
    assert!(f_l.len() == n && f_r.len() == n && m_l.len() == n && m_r.len() == n && a.len() == n);
    for k in 0..n {
        let (fl, fr, ml, mr) = (&f_l[k], &f_r[k], &m_l[k], &m_r[k]);
        let visc = 0.5 * eps * a[k];
        out[k] = [
            0.5 * (fl[0] + fr[0]) - visc * (mr[0] - ml[0]),
            0.5 * (fl[1] + fr[1]) - visc * (mr[1] - ml[1]),
            0.5 * (fl[2] + fr[2]) - visc * (mr[2] - ml[2]),
        ];
    }
}

fn cached_divergences_into(
    state: &ConservedState,
    cache: &CellCache,
    speeds: &FaceArrays,
    params: &PhysParams,
    scratch: &mut FluxScratch,
    div: &mut Divergence,
) {
    let g = &state.grid;
    let ny = g.ny;
    let eps = params.epsilon;
    for (i, (chunk, a)) in scratch.x.chunks_exact_mut(ny).zip(speeds.x.chunks_exact(ny)).enumerate() {
        flux_run(cache, 0, rows(g, i, 1, ny), rows(g, i + 1, 1, ny), a, eps, chunk);
    }
    for (i, (chunk, a)) in scratch.y.chunks_exact_mut(ny + 1).zip(speeds.y.chunks_exact(ny + 1)).enumerate() {
        flux_run(cache, 1, rows(g, i + 1, 0, ny + 1), rows(g, i + 1, 1, ny + 1), a, eps, chunk);
    }
    let (dx, dy) = (g.dx, g.dy);
    for i in 1..=g.nx {
        let (w, e) = (&scratch.x[(i - 1) * ny..i * ny], &scratch.x[i * ny..(i + 1) * ny]);
        let ycol = &scratch.y[(i - 1) * (ny + 1)..i * (ny + 1)];
        let (s, n) = (&ycol[..ny], &ycol[1..]);
        let range = rows(g, i, 1, ny);
        let (ox, oy, oz) = (
            &mut div.x.as_mut_slice()[range.clone()],
            &mut div.y.as_mut_slice()[range.clone()],
            &mut div.z.as_mut_slice()[range],
        );
        assert!(w.len() == ny && e.len() == ny && s.len() == ny && n.len() == ny && ox.len() == ny && oy.len() == ny && oz.len() == ny);
        for k in 0..ny {
            ox[k] = (e[k][0] - w[k][0]) / dx + (n[k][0] - s[k][0]) / dy;
            oy[k] = (e[k][1] - w[k][1]) / dx + (n[k][1] - s[k][1]) / dy;
            oz[k] = (e[k][2] - w[k][2]) / dx + (n[k][2] - s[k][2]) / dy;
        }
    }
}

/// Explicit `eps`-scaled momentum divergences at the current level, using
/// the interface speeds of `mode`. Ghosts must be filled.
pub fn explicit_divergences(state: &ConservedState, params: &PhysParams, mode: SpeedMode) -> Result<Divergence> {
    let speeds = face_speeds(state, mode, params)?;
    let g = &state.grid;
    let mut scratch = FluxScratch { x: vec![[0.0; 3]; speeds.x.len()], y: vec![[0.0; 3]; speeds.y.len()] };
    let mut div = Divergence { x: Field::new(g, 0.0), y: Field::new(g, 0.0), z: Field::new(g, 0.0) };
    divergences_into(state, &speeds, params, &mut scratch, &mut div);
    Ok(div)
}

/// Fills `out` with the mass fluxes built from momenta `mx`, `my`, the
/// face speeds and the densities `n`.
pub fn mass_fluxes_into(
    grid: &GridSpec,
    mx: &Field,
    my: &Field,
    n: &Field,
    speeds: &FaceArrays,
    out: &mut FaceArrays,
) {
    let (mx, my, n) = (mx.as_slice(), my.as_slice(), n.as_slice());
    let ny = grid.ny;
    let run = |m: &[f64], l: core::ops::Range<usize>, r: core::ops::Range<usize>, a: &[f64], out: &mut [f64]| {
        let len = out.len();
        let (ml, mr, nl, nr) = (&m[l.clone()], &m[r.clone()], &n[l], &n[r]);
        assert!(ml.len() == len && mr.len() == len && nl.len() == len && nr.len() == len && a.len() == len);
        for k in 0..len {
            out[k] = mass_flux(ml[k], mr[k], a[k], nl[k], nr[k]);
        }
    };
    for (i, (chunk, a)) in out.x.chunks_exact_mut(ny).zip(speeds.x.chunks_exact(ny)).enumerate() {
        run(mx, rows(grid, i, 1, ny), rows(grid, i + 1, 1, ny), a, chunk);
    }
    for (i, (chunk, a)) in out.y.chunks_exact_mut(ny + 1).zip(speeds.y.chunks_exact(ny + 1)).enumerate() {
        run(my, rows(grid, i + 1, 0, ny + 1), rows(grid, i + 1, 1, ny + 1), a, chunk);
    }
}

/// `n - dt div F` on interior cells; ghosts copied from `n_old`.
pub fn apply_mass_update(n_old: &Field, fluxes: &FaceArrays, dt: f64, grid: &GridSpec, out: &mut Field) {
    out.as_mut_slice().copy_from_slice(n_old.as_slice());
    let ny = grid.ny;
    let (dx, dy) = (grid.dx, grid.dy);
    for i in 1..=grid.nx {
        let (w, e) = (&fluxes.x[(i - 1) * ny..i * ny], &fluxes.x[i * ny..(i + 1) * ny]);
        let ycol = &fluxes.y[(i - 1) * (ny + 1)..i * (ny + 1)];
        let (s, n) = (&ycol[..ny], &ycol[1..]);
        let src = &n_old.column(i)[1..=ny];
        let dst = &mut out.column_mut(i)[1..=ny];
        assert!(w.len() == ny && e.len() == ny && s.len() == ny && n.len() == ny && src.len() == ny && dst.len() == ny);
        for k in 0..ny {
            let div = (e[k] - w[k]) / dx + (n[k] - s[k]) / dy;
            dst[k] = src[k] - dt * div;
        }
    }
}

/// Reusable buffers for repeated steps on one grid.
pub struct Stepper {
    grid: GridSpec,
    cache: CellCache,
    speeds: FaceArrays,
    mass: FaceArrays,
    fluxes: FluxScratch,
    div: Divergence,
    next: ConservedState,
    spare: Field,
    column_rhs: Vec<f64>,
    column_out: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &GridSpec) -> Self {
        let speeds = FaceArrays::new(grid);
        let fluxes = FluxScratch { x: vec![[0.0; 3]; speeds.x.len()], y: vec![[0.0; 3]; speeds.y.len()] };
        let ny = grid.ny;
        Stepper {
            grid: *grid,
            cache: CellCache::new(grid),
            mass: speeds.clone(),
            speeds,
            fluxes,
            div: Divergence { x: Field::new(grid, 0.0), y: Field::new(grid, 0.0), z: Field::new(grid, 0.0) },
            next: ConservedState::uniform(grid, crate::mesh::BoundaryValues::new(1.0, 0.0, 0.0, 0.0)),
            spare: Field::new(grid, 0.0),
            column_rhs: vec![0.0; ny],
            column_out: vec![0.0; ny],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Mass fluxes used by the last successful or attempted step.
    pub fn mass_fluxes(&self) -> &FaceArrays {
        &self.mass
    }

    /// Interface speeds used by the last step.
    pub fn face_speeds(&self) -> &FaceArrays {
        &self.speeds
    }

    /// Momentum divergences of the last step.
    pub fn divergence(&self) -> &Divergence {
        &self.div
    }

    /// Advances `state` by `dt`. On error `state` is left untouched.
    pub fn step(
        &mut self,
        scheme: SchemeKind,
        state: &mut ConservedState,
        params: &PhysParams,
        dt: f64,
        mode: SpeedMode,
        bc: &BoundarySpec,
    ) -> Result<StepReport> {
        let (params, _) = self.prepare(scheme, state, params, mode)?;
        self.execute(scheme, state, &params, dt, bc)
    }

    /// Advances `state` by a step picked from its own CFL step.
    ///
    /// `choose` receives `cfl / (max a_x / dx + max a_y / dy)`, or `None`
    /// when every interface speed vanishes, and returns the step to take.
    /// The interface speeds are computed once and shared by the step.
    pub fn advance(
        &mut self,
        scheme: SchemeKind,
        state: &mut ConservedState,
        params: &PhysParams,
        mode: SpeedMode,
        bc: &BoundarySpec,
        cfl: f64,
        choose: impl FnOnce(Option<f64>) -> f64,
    ) -> Result<StepReport> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidParams("cfl must lie in (0, 1]"));
        }
        let (params, (ax, ay)) = self.prepare(scheme, state, params, mode)?;
        let rate = ax / self.grid.dx + ay / self.grid.dy;
        let dt = choose(if rate > 0.0 { Some(cfl / rate) } else { None });
        self.execute(scheme, state, &params, dt, bc)
    }

    /// Validates inputs, fills the cell cache and the face speeds. Returns
    /// the parameters the scheme actually uses and the maximum speeds.
    fn prepare(
        &mut self,
        scheme: SchemeKind,
        state: &ConservedState,
        params: &PhysParams,
        mode: SpeedMode,
    ) -> Result<(PhysParams, (f64, f64))> {
        if state.grid != self.grid {
            return Err(Error::SizeMismatch { expected: self.grid.storage_len(), found: state.grid.storage_len() });
        }
        params.validate()?;
        let (params, mode) = match scheme {
            SchemeKind::DriftLimit => (params.with_epsilon(0.0), SpeedMode::NonResolved),
            SchemeKind::Conventional if params.epsilon == 0.0 => return Err(Error::ZeroEpsilon),
            _ => (*params, mode),
        };
        let c = mode.wave_speed(&params)?;
        self.cache.fill(state, &params);
        let max = cached_speeds_into(&self.grid, &self.cache, c, &mut self.speeds);
        Ok((params, max))
    }

    fn execute(
        &mut self,
        scheme: SchemeKind,
        state: &mut ConservedState,
        params: &PhysParams,
        dt: f64,
        bc: &BoundarySpec,
    ) -> Result<StepReport> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParams("dt must be positive"));
        }
        cached_divergences_into(state, &self.cache, &self.speeds, params, &mut self.fluxes, &mut self.div);
        match scheme {
            SchemeKind::Ap | SchemeKind::DriftLimit => self.ap(state, params, dt, bc)?,
            SchemeKind::Conventional => self.conventional(state, params, dt, bc)?,
        }
        self.next.fill_ghosts(bc)?;

        // One pass for the update sizes and the admissibility screen; the
        // precise diagnostic is only searched for when the screen trips.
        let mut max_update = [0.0f64; 4];
        let mut clean = true;
        let ny = self.grid.ny;
        for (slot, name) in max_update.iter_mut().zip(FieldName::ALL) {
            let (a, b) = (self.next.field(name), state.field(name));
            let positive = name == FieldName::Density;
            let mut m = 0.0f64;
            for i in 1..=self.grid.nx {
                for (x, y) in a.column(i)[1..=ny].iter().zip(&b.column(i)[1..=ny]) {
                    let d = (x - y).abs();
                    // A NaN update fails `is_finite` below.
                    if d > m {
                        m = d;
                    }
                    clean &= x.is_finite() && (!positive || *x > 0.0);
                }
            }
            *slot = m;
        }
        if !clean {
            self.next.check_admissible()?;
        }
        let report = StepReport {
            dt,
            max_update,
            density_positive: true,
            finite: true,
            boundary_mass_outflow: self.mass.boundary_outflow(&self.grid),
        };
        core::mem::swap(state, &mut self.next);
        Ok(report)
    }

    /// Implicit Lorentz rotation for `(n u_x, n u_z)`; `n_force` is the
    /// density multiplying the electric field.
    fn perpendicular(&mut self, state: &ConservedState, n_force: &Field, params: &PhysParams, dt: f64) {
        let g = self.grid;
        let b = params.b_y;
        let inertia = params.epsilon / dt;
        let kappa = inertia / b;
        let [ex, _, ez] = params.e;
        let ny = g.ny;
        for i in 1..=g.nx {
            let (nf, mx_old, mz_old) = (&n_force.column(i)[1..=ny], &state.mx.column(i)[1..=ny], &state.mz.column(i)[1..=ny]);
            let (div_x, div_z) = (&self.div.x.column(i)[1..=ny], &self.div.z.column(i)[1..=ny]);
            let mx_out = &mut self.next.mx.column_mut(i)[1..=ny];
            let mz_out = &mut self.next.mz.column_mut(i)[1..=ny];
            for k in 0..ny {
                let rhs1 = -(inertia * mz_old[k] - div_z[k] + nf[k] * ez) / b;
                let rhs2 = -(-inertia * mx_old[k] + div_x[k] - nf[k] * ex) / b;
                let (mx, mz) = solve_perp_2x2(&PerpSystem { kappa, rhs1, rhs2 });
                mx_out[k] = mx;
                mz_out[k] = mz;
            }
        }
    }

    fn ap(&mut self, state: &ConservedState, params: &PhysParams, dt: f64, bc: &BoundarySpec) -> Result<()> {
        let g = self.grid;
        self.perpendicular(state, &state.n, params, dt);
        self.next.mx.fill_ghosts(&g, bc.component(FieldName::MomentumX))?;
        self.next.mz.fill_ghosts(&g, bc.component(FieldName::MomentumZ))?;

        // Every column shares the same matrix.
        let (diag, off) = parallel_coefficients(params, dt, g.dy);
        let lu = FactoredTridiagonal::constant(g.ny, diag, off)?;
        for i in 1..=g.nx {
            parallel_rhs_into(i, state, &self.next.mx, &self.div.y, params, dt, bc, &mut self.column_rhs);
            lu.solve_into(&self.column_rhs, &mut self.column_out);
            self.next.my.column_mut(i)[1..=g.ny].copy_from_slice(&self.column_out);
        }
        self.next.my.fill_ghosts(&g, bc.component(FieldName::MomentumY))?;

        mass_fluxes_into(&g, &self.next.mx, &self.next.my, &state.n, &self.speeds, &mut self.mass);
        apply_mass_update(&state.n, &self.mass, dt, &g, &mut self.next.n);
        Ok(())
    }

    fn conventional(&mut self, state: &ConservedState, params: &PhysParams, dt: f64, bc: &BoundarySpec) -> Result<()> {
        let g = self.grid;
        mass_fluxes_into(&g, &state.mx, &state.my, &state.n, &self.speeds, &mut self.mass);
        apply_mass_update(&state.n, &self.mass, dt, &g, &mut self.spare);
        self.spare.fill_ghosts(&g, bc.component(FieldName::Density))?;

        let n_new = core::mem::take(&mut self.spare);
        self.perpendicular(state, &n_new, params, dt);

        let ratio = dt / params.epsilon;
        let ey = params.e[1];
        for i in 1..=g.nx {
            let (my, div, n) = (&state.my.column(i)[1..=g.ny], &self.div.y.column(i)[1..=g.ny], &n_new.column(i)[1..=g.ny]);
            for (out, ((my, div), n)) in self.next.my.column_mut(i)[1..=g.ny].iter_mut().zip(my.iter().zip(div).zip(n)) {
                *out = my - ratio * div + ratio * n * ey;
            }
        }
        self.spare = core::mem::replace(&mut self.next.n, n_new);
        Ok(())
    }
}

fn run_one(
    scheme: SchemeKind,
    state: &ConservedState,
    params: &PhysParams,
    dt: f64,
    mode: SpeedMode,
    bc: &BoundarySpec,
) -> Result<(ConservedState, StepReport)> {
    let mut stepper = Stepper::new(&state.grid);
    let mut next = state.clone();
    let report = stepper.step(scheme, &mut next, params, dt, mode, bc)?;
    Ok((next, report))
}

/// One AP step.
pub fn step_ap(
    state: &ConservedState,
    params: &PhysParams,
    dt: f64,
    mode: SpeedMode,
    bc: &BoundarySpec,
) -> Result<(ConservedState, StepReport)> {
    run_one(SchemeKind::Ap, state, params, dt, mode, bc)
}

/// One conventional step; needs `epsilon > 0`.
pub fn step_conventional(
    state: &ConservedState,
    params: &PhysParams,
    dt: f64,
    mode: SpeedMode,
    bc: &BoundarySpec,
) -> Result<(ConservedState, StepReport)> {
    run_one(SchemeKind::Conventional, state, params, dt, mode, bc)
}

/// One drift-limit step: the AP step with `epsilon = 0` and non-resolved
/// speeds. The `epsilon` stored in `params` is ignored.
pub fn step_drift_limit(
    state: &ConservedState,
    params: &PhysParams,
    dt: f64,
    bc: &BoundarySpec,
) -> Result<(ConservedState, StepReport)> {
    run_one(SchemeKind::DriftLimit, state, params, dt, SpeedMode::NonResolved, bc)
}
