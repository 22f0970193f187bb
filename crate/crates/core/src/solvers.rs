//! Implicit pieces of a time step: the per-cell 2x2 Lorentz rotation solve,
//! the centered second-order stencils and the per-column parallel-momentum
//! tridiagonal systems.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mesh::{BoundarySpec, Field, GridSpec};
use crate::model::{ConservedState, PhysParams};

/// `[[1, -kappa], [kappa, 1]] (mx, mz)^T = (rhs1, rhs2)^T` with
/// `kappa = eps / (B dt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerpSystem {
    pub kappa: f64,
    pub rhs1: f64,
    pub rhs2: f64,
}

impl PerpSystem {
    pub fn determinant(&self) -> f64 {
        1.0 + self.kappa * self.kappa
    }
}

/// Closed-form solution of the perpendicular Lorentz system. The determinant
/// is at least one, so the solve never fails.
#[inline]
pub fn solve_perp_2x2(sys: &PerpSystem) -> (f64, f64) {
    let k = sys.kappa;
    let det = 1.0 + k * k;
    ((sys.rhs1 + k * sys.rhs2) / det, (sys.rhs2 - k * sys.rhs1) / det)
}

/// Centered `d_y(d_x m)` at interior cell `(i, j)`: the y-difference of the
/// face averages of the centered x-derivative. Reads the ghost ring.
#[inline]
pub fn mixed_derivative_at(m: &Field, grid: &GridSpec, i: usize, j: usize) -> f64 {
    let dx_at = |jj: usize| (m.get(i + 1, jj) - m.get(i - 1, jj)) / (2.0 * grid.dx);
    let upper = 0.5 * (dx_at(j + 1) + dx_at(j));
    let lower = 0.5 * (dx_at(j) + dx_at(j - 1));
    (upper - lower) / grid.dy
}

/// Mixed derivative on every interior cell; ghosts of the result are zero.
pub fn mixed_derivative(m: &Field, grid: &GridSpec) -> Field {
    let mut out = Field::new(grid, 0.0);
    for i in 1..=grid.nx {
        for j in 1..=grid.ny {
            out.set(i, j, mixed_derivative_at(m, grid, i, j));
        }
    }
    out
}

/// Centered second difference `d_y^2 m` at interior cell `(i, j)`.
#[inline]
pub fn second_difference_y(m: &Field, grid: &GridSpec, i: usize, j: usize) -> f64 {
    (m.get(i, j + 1) - 2.0 * m.get(i, j) + m.get(i, j - 1)) / (grid.dy * grid.dy)
}

/// One grid column of the parallel-momentum system. `lower[0]` and
/// `upper[len - 1]` are unused and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        for len in [lower.len(), upper.len(), rhs.len()] {
            if len != n {
                return Err(Error::SizeMismatch { expected: n, found: len });
            }
        }
        Ok(TridiagonalSystem { lower, diag, upper, rhs })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|k| {
                let mut v = self.diag[k] * x[k];
                if k > 0 {
                    v += self.lower[k] * x[k - 1];
                }
                if k + 1 < n {
                    v += self.upper[k] * x[k + 1];
                }
                v
            })
            .collect()
    }

    /// Infinity norm of `A`.
    pub fn norm_inf(&self) -> f64 {
        (0..self.len())
            .map(|k| {
                let lo = if k > 0 { self.lower[k].abs() } else { 0.0 };
                let up = if k + 1 < self.len() { self.upper[k].abs() } else { 0.0 };
                lo + self.diag[k].abs() + up
            })
            .fold(0.0, f64::max)
    }

    /// `diag >= |lower| + |upper|` in every row, strictly in at least one.
    pub fn is_diagonally_dominant(&self) -> bool {
        let n = self.len();
        let mut strict = false;
        for k in 0..n {
            let lo = if k > 0 { self.lower[k].abs() } else { 0.0 };
            let up = if k + 1 < n { self.upper[k].abs() } else { 0.0 };
            if self.diag[k] < lo + up {
                return false;
            }
            strict |= self.diag[k] > lo + up;
        }
        strict
    }

    pub fn is_symmetric(&self) -> bool {
        (1..self.len()).all(|k| self.lower[k] == self.upper[k - 1])
    }
}

/// Pivot magnitude below which a system is reported singular.
pub const PIVOT_GUARD: f64 = 1e-30;

/// Thomas elimination into caller-provided buffers. `scratch` and `out`
/// must have the system length.
pub fn solve_tridiagonal_into(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    if lower.len() != n || upper.len() != n || rhs.len() != n || scratch.len() != n || out.len() != n {
        return Err(Error::SizeMismatch { expected: n, found: rhs.len() });
    }
    let mut pivot = diag[0];
    if !(pivot.abs() > PIVOT_GUARD) {
        return Err(Error::SingularSystem { row: 0, pivot });
    }
    scratch[0] = upper[0] / pivot;
    out[0] = rhs[0] / pivot;
    for k in 1..n {
        pivot = diag[k] - lower[k] * scratch[k - 1];
        if !(pivot.abs() > PIVOT_GUARD) {
            return Err(Error::SingularSystem { row: k, pivot });
        }
        scratch[k] = if k + 1 < n { upper[k] / pivot } else { 0.0 };
        out[k] = (rhs[k] - lower[k] * out[k - 1]) / pivot;
    }
    for k in (0..n - 1).rev() {
        out[k] -= scratch[k] * out[k + 1];
    }
    Ok(())
}

pub fn solve_tridiagonal(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = sys.len();
    let mut scratch = vec![0.0; n];
    let mut out = vec![0.0; n];
    solve_tridiagonal_into(&sys.lower, &sys.diag, &sys.upper, &sys.rhs, &mut scratch, &mut out)?;
    Ok(out)
}

/// LU factors of a tridiagonal matrix, reused for many right-hand sides.
/// Every grid column shares the same parallel operator, so one factorization
/// serves a whole time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredTridiagonal {
    lower: Vec<f64>,
    upper_scaled: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl FactoredTridiagonal {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::SizeMismatch { expected: n, found: lower.len().min(upper.len()) });
        }
        let mut upper_scaled = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        for k in 0..n {
            let pivot = if k == 0 { diag[0] } else { diag[k] - lower[k] * upper_scaled[k - 1] };
            if !(pivot.abs() > PIVOT_GUARD) {
                return Err(Error::SingularSystem { row: k, pivot });
            }
            inv_pivot[k] = 1.0 / pivot;
            upper_scaled[k] = if k + 1 < n { upper[k] * inv_pivot[k] } else { 0.0 };
        }
        Ok(FactoredTridiagonal { lower: lower.to_vec(), upper_scaled, inv_pivot })
    }

    /// Constant-coefficient matrix with `diag` on the diagonal and `off` on
    /// both off-diagonals.
    pub fn constant(n: usize, diag: f64, off: f64) -> Result<Self> {
        let mut lower = vec![off; n];
        let mut upper = vec![off; n];
        if n > 0 {
            lower[0] = 0.0;
            upper[n - 1] = 0.0;
        }
        FactoredTridiagonal::new(&lower, &vec![diag; n], &upper)
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Solves `A x = rhs`; `out` must have the system length.
    pub fn solve_into(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.len();
        if n == 0 {
            return;
        }
        out[0] = rhs[0] * self.inv_pivot[0];
        for k in 1..n {
            out[k] = (rhs[k] - self.lower[k] * out[k - 1]) * self.inv_pivot[k];
        }
        for k in (0..n - 1).rev() {
            out[k] -= self.upper_scaled[k] * out[k + 1];
        }
    }
}

/// Coefficients `(diag, off)` of the parallel operator
/// `eps/dt - T dt d_y^2`.
#[inline]
pub fn parallel_coefficients(params: &PhysParams, dt: f64, dy: f64) -> (f64, f64) {
    let off = params.temperature * dt / (dy * dy);
    (params.epsilon / dt + 2.0 * off, -off)
}

/// Assembles the parallel-momentum system of column `i`.
///
/// `mx_new` is the already-updated x-momentum with its ghost ring filled,
/// and `div_y` holds the `eps`-scaled explicit divergence of the y-momentum
/// fluxes (pressure included) at the old time level.
pub fn assemble_parallel_column(
    i: usize,
    state: &ConservedState,
    mx_new: &Field,
    div_y: &Field,
    params: &PhysParams,
    dt: f64,
    bc: &BoundarySpec,
) -> TridiagonalSystem {
    let grid = &state.grid;
    let ny = grid.ny;
    let (diag, off) = parallel_coefficients(params, dt, grid.dy);
    let mut lower = vec![off; ny];
    let mut upper = vec![off; ny];
    lower[0] = 0.0;
    upper[ny - 1] = 0.0;
    let mut rhs = vec![0.0; ny];
    parallel_rhs_into(i, state, mx_new, div_y, params, dt, bc, &mut rhs);
    TridiagonalSystem { lower, diag: vec![diag; ny], upper, rhs }
}

/// Right-hand side of column `i` (rows `j = 1..=ny` stored at `j - 1`),
/// Dirichlet closure included.
#[allow(clippy::too_many_arguments)]
pub fn parallel_rhs_into(
    i: usize,
    state: &ConservedState,
    mx_new: &Field,
    div_y: &Field,
    params: &PhysParams,
    dt: f64,
    bc: &BoundarySpec,
    rhs: &mut [f64],
) {
    let grid = &state.grid;
    let ny = grid.ny;
    let t_dt = params.temperature * dt;
    let inertia = params.epsilon / dt;
    for j in 1..=ny {
        rhs[j - 1] = t_dt * mixed_derivative_at(mx_new, grid, i, j) + inertia * state.my.get(i, j)
            - div_y.get(i, j)
            + state.n.get(i, j) * params.e[1];
    }
    let coupling = t_dt / (grid.dy * grid.dy);
    rhs[0] += coupling * bc.south.my;
    rhs[ny - 1] += coupling * bc.north.my;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryValues;
    use crate::model::drift_limit_state;
    use approx::assert_relative_eq;

    #[test]
    fn perp_examples() {
        assert_eq!(solve_perp_2x2(&PerpSystem { kappa: 0.0, rhs1: 3.0, rhs2: -2.0 }), (3.0, -2.0));
        for kappa in [0.0, 1e-4, 0.4, 1.0, 37.0, 1e6] {
            let (mx, mz) = solve_perp_2x2(&PerpSystem { kappa, rhs1: -1.0, rhs2: -kappa });
            assert_relative_eq!(mx, -1.0, max_relative = 1e-15);
            assert!(mz.abs() <= 1e-15 * (1.0 + kappa));
        }
        assert_eq!(solve_perp_2x2(&PerpSystem { kappa: 1.0, rhs1: 1.0, rhs2: 1.0 }), (1.0, 0.0));
    }

    #[test]
    fn mixed_derivative_examples() {
        let g = GridSpec::unit_square(7, 9).unwrap();
        let zero = mixed_derivative(&Field::new(&g, 2.5), &g);
        assert!(zero.interior().all(|(_, _, v)| v == 0.0));

        let bilinear = mixed_derivative(&Field::from_fn(&g, |x, y| x * y), &g);
        for (_, _, v) in bilinear.interior() {
            assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        }

        let xonly = mixed_derivative(&Field::from_fn(&g, |x, _| x), &g);
        for (_, _, v) in xonly.interior() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn coefficients() {
        let p = PhysParams::test_case(1e-6);
        let (d, o) = parallel_coefficients(&p, 2.5e-3, 0.01);
        assert_relative_eq!(d, 50.0004, max_relative = 1e-14);
        assert_relative_eq!(o, -25.0, max_relative = 1e-14);
        let (d, o) = parallel_coefficients(&p.with_epsilon(0.0), 2.5e-3, 0.01);
        assert_relative_eq!(d, 50.0, max_relative = 1e-14);
        assert_relative_eq!(o, -25.0, max_relative = 1e-14);
    }

    #[test]
    fn thomas_examples() {
        let n = 6;
        let id = TridiagonalSystem::new(vec![0.0; n], vec![1.0; n], vec![0.0; n], (0..n).map(|k| k as f64).collect()).unwrap();
        assert_eq!(solve_tridiagonal(&id).unwrap(), id.rhs);

        let n = 20;
        let mut sys = TridiagonalSystem::new(vec![-1.0; n], vec![2.0; n], vec![-1.0; n], vec![0.0; n]).unwrap();
        sys.lower[0] = 0.0;
        sys.upper[n - 1] = 0.0;
        let x: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        sys.rhs = sys.apply(&x);
        let sol = solve_tridiagonal(&sys).unwrap();
        for (a, b) in sol.iter().zip(&x) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn thomas_singular_and_mismatch() {
        let sys = TridiagonalSystem::new(vec![0.0; 3], vec![0.0, 1.0, 1.0], vec![0.0; 3], vec![1.0; 3]).unwrap();
        assert!(matches!(solve_tridiagonal(&sys), Err(Error::SingularSystem { row: 0, .. })));
        // [[1, 1], [1, 1]] loses its second pivot.
        let sys = TridiagonalSystem::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![1.0; 2]).unwrap();
        assert!(matches!(solve_tridiagonal(&sys), Err(Error::SingularSystem { row: 1, .. })));
        assert!(TridiagonalSystem::new(vec![0.0; 2], vec![1.0; 3], vec![0.0; 3], vec![1.0; 3]).is_err());
    }

    #[test]
    fn factored_matches_thomas() {
        let n = 17;
        let lower: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { -0.3 - 0.01 * k as f64 }).collect();
        let upper: Vec<f64> = (0..n).map(|k| if k + 1 == n { 0.0 } else { -0.7 + 0.02 * k as f64 }).collect();
        let diag: Vec<f64> = (0..n).map(|k| 2.0 + 0.1 * k as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|k| libm::sin(k as f64)).collect();
        let sys = TridiagonalSystem::new(lower.clone(), diag.clone(), upper.clone(), rhs.clone()).unwrap();
        let reference = solve_tridiagonal(&sys).unwrap();
        let lu = FactoredTridiagonal::new(&lower, &diag, &upper).unwrap();
        let mut out = vec![0.0; n];
        lu.solve_into(&rhs, &mut out);
        for (a, b) in out.iter().zip(&reference) {
            assert_relative_eq!(a, b, max_relative = 1e-13);
        }
        assert!(FactoredTridiagonal::constant(3, 0.0, 1.0).is_err());
    }

    #[test]
    fn drift_fixed_point_column() {
        let g = GridSpec::unit_square(6, 10).unwrap();
        let bc = BoundarySpec::uniform(drift_limit_state());
        let mut s = ConservedState::uniform(&g, drift_limit_state());
        s.fill_ghosts(&bc).unwrap();
        let div_y = Field::new(&g, 0.0);
        for eps in [1e-6, 0.0, 1.0] {
            let p = PhysParams::test_case(eps);
            let sys = assemble_parallel_column(3, &s, &s.mx, &div_y, &p, 2.5e-3, &bc);
            assert!(sys.is_symmetric());
            assert!(sys.is_diagonally_dominant());
            assert!(sys.diag.iter().all(|&d| d > 0.0));
            for v in solve_tridiagonal(&sys).unwrap() {
                assert_relative_eq!(v, 1.0, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn dirichlet_closure_enters_end_rows() {
        let g = GridSpec::unit_square(4, 5).unwrap();
        let mut bc = BoundarySpec::uniform(BoundaryValues::new(1.0, 0.0, 0.0, 0.0));
        bc.south.my = 2.0;
        bc.north.my = -3.0;
        let mut s = ConservedState::uniform(&g, BoundaryValues::new(1.0, 0.0, 0.0, 0.0));
        s.fill_ghosts(&bc).unwrap();
        let p = PhysParams::test_case(0.0);
        let sys = assemble_parallel_column(2, &s, &s.mx, &Field::new(&g, 0.0), &p, 1e-3, &bc);
        let c = 1e-3 / (0.2 * 0.2);
        assert_relative_eq!(sys.rhs[0], 2.0 * c, max_relative = 1e-14);
        assert_relative_eq!(sys.rhs[4], -3.0 * c, max_relative = 1e-14);
        assert!(sys.rhs[1..4].iter().all(|&v| v == 0.0));
        // Pure Dirichlet Laplacian: linear profile between the ghost values.
        let x = solve_tridiagonal(&sys).unwrap();
        for (k, v) in x.iter().enumerate() {
            let y = (k + 1) as f64;
            assert_relative_eq!(*v, 2.0 + (-3.0 - 2.0) * y / 6.0, max_relative = 1e-12);
        }
    }
}
