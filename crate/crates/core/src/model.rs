//! Physical parameters, conserved state and the test-case data.

use crate::error::{Error, FieldName, Result};
use crate::mesh::{self, BoundarySpec, BoundaryValues, Field, GridSpec};

/// Scaled parameters of the momentum balance. The magnetic field is
/// `(0, b_y, 0)` and the electric field `e` is uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Scaled gyro-period; `0` selects the drift-fluid limit.
    pub epsilon: f64,
    pub temperature: f64,
    pub b_y: f64,
    pub e: [f64; 3],
}

impl PhysParams {
    pub fn new(epsilon: f64, temperature: f64, b_y: f64, e: [f64; 3]) -> Result<Self> {
        let p = PhysParams { epsilon, temperature, b_y, e };
        p.validate()?;
        Ok(p)
    }

    /// `T = 1`, `B = (0, 1, 0)`, `E = (0, 0, 1)`.
    pub fn test_case(epsilon: f64) -> Self {
        PhysParams { epsilon, temperature: 1.0, b_y: 1.0, e: [0.0, 0.0, 1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParams("temperature must be positive"));
        }
        if self.b_y == 0.0 || !self.b_y.is_finite() {
            return Err(Error::InvalidParams("B_y must be nonzero"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParams("epsilon must be >= 0"));
        }
        if !self.e.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("electric field must be finite"));
        }
        Ok(())
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        PhysParams { epsilon, ..self }
    }
}

/// `sqrt(T / epsilon)`.
pub fn sound_speed(params: &PhysParams) -> Result<f64> {
    if params.epsilon == 0.0 {
        return Err(Error::ZeroEpsilon);
    }
    Ok(libm::sqrt(params.temperature / params.epsilon))
}

/// Density and momentum `(n, n u_x, n u_y, n u_z)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedState {
    pub grid: GridSpec,
    pub n: Field,
    pub mx: Field,
    pub my: Field,
    pub mz: Field,
}

impl ConservedState {
    pub fn uniform(grid: &GridSpec, v: BoundaryValues) -> Self {
        ConservedState {
            grid: *grid,
            n: Field::new(grid, v.n),
            mx: Field::new(grid, v.mx),
            my: Field::new(grid, v.my),
            mz: Field::new(grid, v.mz),
        }
    }

    pub fn field(&self, name: FieldName) -> &Field {
        match name {
            FieldName::Density => &self.n,
            FieldName::MomentumX => &self.mx,
            FieldName::MomentumY => &self.my,
            FieldName::MomentumZ => &self.mz,
        }
    }

    pub fn field_mut(&mut self, name: FieldName) -> &mut Field {
        match name {
            FieldName::Density => &mut self.n,
            FieldName::MomentumX => &mut self.mx,
            FieldName::MomentumY => &mut self.my,
            FieldName::MomentumZ => &mut self.mz,
        }
    }

    pub fn fill_ghosts(&mut self, bc: &BoundarySpec) -> Result<()> {
        let grid = self.grid;
        mesh::fill_ghosts([&mut self.n, &mut self.mx, &mut self.my, &mut self.mz], &grid, bc)
    }

    pub fn cell(&self, i: usize, j: usize) -> BoundaryValues {
        BoundaryValues::new(self.n.get(i, j), self.mx.get(i, j), self.my.get(i, j), self.mz.get(i, j))
    }

    /// Velocity `u = (n u) / n` in cell `(i, j)`.
    #[inline]
    pub fn velocity(&self, i: usize, j: usize) -> [f64; 3] {
        let n = self.n.get(i, j);
        [self.mx.get(i, j) / n, self.my.get(i, j) / n, self.mz.get(i, j) / n]
    }

    /// Checks interior finiteness and density positivity.
    pub fn check_admissible(&self) -> Result<()> {
        let g = &self.grid;
        let clean = (1..=g.nx).all(|i| {
            let ok = |f: &Field| f.column(i)[1..=g.ny].iter().all(|v| v.is_finite());
            ok(&self.mx) && ok(&self.my) && ok(&self.mz) && self.n.column(i)[1..=g.ny].iter().all(|&v| v > 0.0 && v.is_finite())
        });
        if clean {
            return Ok(());
        }
        for name in FieldName::ALL {
            if let Some((i, j, _)) = self.field(name).interior().find(|(_, _, v)| !v.is_finite()) {
                return Err(Error::NonFinite { field: name, i, j });
            }
        }
        if let Some((i, j, value)) = self.n.interior().find(|&(_, _, v)| v <= 0.0) {
            return Err(Error::DensityPositivity { i, j, value });
        }
        Ok(())
    }

    /// Largest interior absolute difference to `other`, over all fields.
    pub fn max_abs_diff(&self, other: &ConservedState) -> f64 {
        FieldName::ALL
            .iter()
            .flat_map(|&name| {
                self.field(name)
                    .interior()
                    .zip(other.field(name).interior())
                    .map(|((_, _, a), (_, _, b))| libm::fabs(a - b))
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    /// Boundary data within `O(epsilon)` of the drift limit.
    Prepared,
    /// Boundary data perturbed by an independent amplitude `epsilon'`.
    Unprepared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseSpec {
    pub kind: CaseKind,
    pub epsilon: f64,
    /// Perturbation amplitude in the boundary table; equals `epsilon` for
    /// prepared data.
    pub epsilon_prime: f64,
}

impl CaseSpec {
    pub fn prepared(epsilon: f64) -> Self {
        CaseSpec { kind: CaseKind::Prepared, epsilon, epsilon_prime: epsilon }
    }

    pub fn unprepared(epsilon: f64, epsilon_prime: f64) -> Self {
        CaseSpec { kind: CaseKind::Unprepared, epsilon, epsilon_prime }
    }

    /// Amplitude actually written into the boundary table.
    pub fn perturbation(&self) -> f64 {
        match self.kind {
            CaseKind::Prepared => self.epsilon,
            CaseKind::Unprepared => self.epsilon_prime,
        }
    }
}

/// Dirichlet data of the test case, sides I-IV mapped to West, East,
/// South, North.
pub fn test_case_boundary(perturbation: f64) -> BoundarySpec {
    let e = perturbation;
    BoundarySpec {
        west: BoundaryValues::new(1.0 + e, -1.0, 1.0, 0.0),
        east: BoundaryValues::new(1.0, -1.0, 1.0 + e, e),
        south: BoundaryValues::new(1.0 + e, -1.0 + e, 1.0 + e, 0.0),
        north: BoundaryValues::new(1.0, -1.0 + e, 1.0, e),
    }
}

/// Initial state (fluid at rest, `n = 1`) with ghosts filled, and the
/// matching boundary data.
pub fn init_case(case: &CaseSpec, grid: &GridSpec) -> Result<(ConservedState, BoundarySpec)> {
    let amp = case.perturbation();
    if !(amp > 0.0) && case.kind == CaseKind::Unprepared {
        return Err(Error::InvalidParams("epsilon' must be positive"));
    }
    let bc = test_case_boundary(amp);
    bc.validate()?;
    let mut state = ConservedState::uniform(grid, BoundaryValues::new(1.0, 0.0, 0.0, 0.0));
    state.fill_ghosts(&bc)?;
    Ok((state, bc))
}

/// Exact drift-fluid solution of the test case, uniform and stationary.
pub fn drift_limit_state() -> BoundaryValues {
    BoundaryValues::new(1.0, -1.0, 1.0, 0.0)
}

/// Perpendicular drift momentum `(1/B) b x (T grad n - n E)` with
/// `b = e_y`; returns the full 3-vector (its `y` entry is zero).
pub fn perpendicular_drift(params: &PhysParams, n: f64, grad_n: [f64; 3]) -> [f64; 3] {
    let t = params.temperature;
    let v = [
        t * grad_n[0] - n * params.e[0],
        t * grad_n[1] - n * params.e[1],
        t * grad_n[2] - n * params.e[2],
    ];
    // e_y x v = (v_z, 0, -v_x)
    [v[2] / params.b_y, 0.0, -v[0] / params.b_y]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn prepared_case_table() {
        let g = GridSpec::unit_square(4, 4).unwrap();
        let (s, bc) = init_case(&CaseSpec::prepared(1e-6), &g).unwrap();
        assert_eq!(s.cell(2, 2), BoundaryValues::new(1.0, 0.0, 0.0, 0.0));
        assert_eq!(bc.west, BoundaryValues::new(1.0 + 1e-6, -1.0, 1.0, 0.0));
        assert_eq!(s.n.get(0, 2), 1.0 + 1e-6);

        let (_, bc) = init_case(&CaseSpec::prepared(1.0), &g).unwrap();
        assert_eq!(bc.east, BoundaryValues::new(1.0, -1.0, 2.0, 1.0));
    }

    #[test]
    fn unprepared_uses_epsilon_prime() {
        let g = GridSpec::unit_square(4, 4).unwrap();
        let (_, bc) = init_case(&CaseSpec::unprepared(1e-6, 1e-2), &g).unwrap();
        assert_eq!(bc.west.n, 1.01);
        assert_eq!(bc.north.mx, -0.99);
    }

    #[test]
    fn drift_limit_reference() {
        assert_eq!(drift_limit_state(), BoundaryValues::new(1.0, -1.0, 1.0, 0.0));
        let p = PhysParams::test_case(1e-6);
        let m = perpendicular_drift(&p, 1.0, [0.0; 3]);
        assert_eq!(m, [-1.0, 0.0, 0.0]);
        // Parallel force balance T d_y n - n E_y vanishes for uniform n.
        let parallel = p.temperature * 0.0 - 1.0 * p.e[1];
        assert_eq!(parallel, 0.0);
    }

    #[test]
    fn prepared_boundary_converges_linearly() {
        let r = drift_limit_state();
        for eps in [1e-2, 1e-4, 1e-6] {
            let bc = test_case_boundary(eps);
            for side in crate::mesh::Side::FILL_ORDER {
                let v = bc.side(side);
                let d = [v.n - r.n, v.mx - r.mx, v.my - r.my, v.mz - r.mz]
                    .iter()
                    .fold(0.0f64, |a, x| a.max(x.abs()));
                assert_relative_eq!(d, eps, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn sound_speeds() {
        let c = |eps| sound_speed(&PhysParams::test_case(eps)).unwrap();
        assert_relative_eq!(c(1e-6), 1000.0, max_relative = 1e-14);
        assert_eq!(c(1.0), 1.0);
        assert_relative_eq!(c(1.5e-8), 8164.965809277261, max_relative = 1e-12);
        assert_eq!(sound_speed(&PhysParams::test_case(0.0)), Err(Error::ZeroEpsilon));
    }

    #[test]
    fn params_validation() {
        assert!(PhysParams::new(1.0, 0.0, 1.0, [0.0; 3]).is_err());
        assert!(PhysParams::new(1.0, 1.0, 0.0, [0.0; 3]).is_err());
        assert!(PhysParams::new(-1.0, 1.0, 1.0, [0.0; 3]).is_err());
        assert!(PhysParams::new(0.0, 1.0, 1.0, [0.0; 3]).is_ok());
    }

    #[test]
    fn admissibility_diagnostics() {
        let g = GridSpec::unit_square(3, 3).unwrap();
        let mut s = ConservedState::uniform(&g, drift_limit_state());
        assert!(s.check_admissible().is_ok());
        s.n.set(2, 3, -0.5);
        assert_eq!(s.check_admissible(), Err(Error::DensityPositivity { i: 2, j: 3, value: -0.5 }));
        s.my.set(1, 1, f64::NAN);
        assert!(matches!(
            s.check_admissible(),
            Err(Error::NonFinite { field: FieldName::MomentumY, i: 1, j: 1 })
        ));
    }
}
