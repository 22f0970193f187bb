//! Finite-volume kernels for the 2D isothermal Euler-Lorentz system in the
//! drift-fluid scaling.
//!
//! Three time integrators share one set of spatial operators:
//!
//! * the asymptotic-preserving (AP) scheme, which treats the mass flux, the
//!   parallel pressure force and the Lorentz force implicitly and stays
//!   consistent with the drift-fluid limit when the gyro-period `epsilon`
//!   goes to zero at fixed time step;
//! * the conventional scheme, with explicit mass flux and pressure;
//! * the `epsilon = 0` drift-limit scheme, which is the AP code path with
//!   the inertia terms removed.
//!
//! The magnetic field is uniform along `y`, so the parallel direction is the
//! `y` axis and the implicit parallel solve decouples into one tridiagonal
//! system per grid column.
//!
//! This crate is `no_std` and only needs `alloc`. IO, experiment
//! orchestration and the command line live in the `drift-ap` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod mesh;
pub mod model;
pub mod riemann;
pub mod solvers;
pub mod stepper;

pub use error::{Error, Result};
pub use mesh::{BoundarySpec, BoundaryValues, Domain, Field, GridSpec, Side};
pub use model::{CaseKind, CaseSpec, ConservedState, PhysParams};
pub use riemann::{Axis, InterfaceState, SpeedMode, TimeControls};
pub use solvers::{PerpSystem, TridiagonalSystem};
pub use stepper::{SchemeKind, StepReport};
