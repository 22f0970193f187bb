//! Uniform Cartesian grid with one ghost ring and Dirichlet ghost filling.
//!
//! Interior cells are indexed `i = 1..=nx`, `j = 1..=ny`; index `0` and
//! `nx + 1` (resp. `ny + 1`) address the ghost ring. Field storage is
//! column-major so that a fixed-`i` column is contiguous, which is the
//! access pattern of the parallel (`y`) solves.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, FieldName, Result};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Domain {
    pub const UNIT_SQUARE: Domain = Domain { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 };

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

impl Default for Domain {
    fn default() -> Self {
        Domain::UNIT_SQUARE
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub domain: Domain,
}

impl GridSpec {
    /// Builds a uniform grid of `nx x ny` cells covering `domain`.
    pub fn new(nx: usize, ny: usize, domain: Domain) -> Result<Self> {
        let (w, h) = (domain.width(), domain.height());
        if nx < 2 || ny < 2 || !(w > 0.0 && w.is_finite()) || !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidDimension { nx, ny });
        }
        Ok(GridSpec { nx, ny, dx: w / nx as f64, dy: h / ny as f64, domain })
    }

    pub fn unit_square(nx: usize, ny: usize) -> Result<Self> {
        GridSpec::new(nx, ny, Domain::UNIT_SQUARE)
    }

    /// Number of stored values per field, ghosts included.
    pub fn storage_len(&self) -> usize {
        (self.nx + 2) * (self.ny + 2)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 2) + j
    }

    /// Cell-center abscissa; valid for ghost indices too.
    pub fn x_center(&self, i: usize) -> f64 {
        self.domain.x0 + (i as f64 - 0.5) * self.dx
    }

    pub fn y_center(&self, j: usize) -> f64 {
        self.domain.y0 + (j as f64 - 0.5) * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }
}

/// Free-function form of [`GridSpec::new`].
pub fn build_grid(nx: usize, ny: usize, domain: Domain) -> Result<GridSpec> {
    GridSpec::new(nx, ny, domain)
}

/// Scalar cell-centered lattice of size `(nx + 2) x (ny + 2)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: &GridSpec, value: f64) -> Self {
        Field { nx: grid.nx, ny: grid.ny, values: vec![value; grid.storage_len()] }
    }

    /// Fills every stored value (ghosts included) from `f(x, y)` at cell centers.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut field = Field::new(grid, 0.0);
        for i in 0..grid.nx + 2 {
            for j in 0..grid.ny + 2 {
                field.values[grid.index(i, j)] = f(grid.x_center(i), grid.y_center(j));
            }
        }
        field
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx + 2 && j < self.ny + 2);
        i * (self.ny + 2) + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.values[k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Contiguous column `i`, ghosts included (`ny + 2` values).
    pub fn column(&self, i: usize) -> &[f64] {
        let start = self.idx(i, 0);
        &self.values[start..start + self.ny + 2]
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [f64] {
        let start = self.idx(i, 0);
        let len = self.ny + 2;
        &mut self.values[start..start + len]
    }

    pub fn matches(&self, grid: &GridSpec) -> bool {
        self.nx == grid.nx && self.ny == grid.ny && self.values.len() == grid.storage_len()
    }

    fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.matches(grid) {
            Ok(())
        } else {
            Err(Error::SizeMismatch { expected: grid.storage_len(), found: self.values.len() })
        }
    }

    /// Iterates `(i, j, value)` over interior cells.
    pub fn interior(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (1..=self.nx).flat_map(move |i| (1..=self.ny).map(move |j| (i, j, self.get(i, j))))
    }

    /// Writes the four side values into the ghost ring in the order
    /// West, East, South, North; corners therefore carry the South or
    /// North value.
    pub fn fill_ghosts(&mut self, grid: &GridSpec, sides: SideValues) -> Result<()> {
        self.check(grid)?;
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny + 2 {
            self.set(0, j, sides.west);
            self.set(nx + 1, j, sides.east);
        }
        for i in 0..nx + 2 {
            self.set(i, 0, sides.south);
            self.set(i, ny + 1, sides.north);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    /// Ghost filling order; the last side wins at the corners.
    pub const FILL_ORDER: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    /// Roman-numeral label of the side in the test-case table.
    pub fn table_label(self) -> &'static str {
        match self {
            Side::West => "I",
            Side::East => "II",
            Side::South => "III",
            Side::North => "IV",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::West => "west (x=0)",
            Side::East => "east (x=1)",
            Side::South => "south (y=0)",
            Side::North => "north (y=1)",
        }
    }
}

/// One scalar per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideValues {
    pub west: f64,
    pub east: f64,
    pub south: f64,
    pub north: f64,
}

impl SideValues {
    pub fn uniform(v: f64) -> Self {
        SideValues { west: v, east: v, south: v, north: v }
    }
}

/// Dirichlet data `(n, nu_x, nu_y, nu_z)` on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryValues {
    pub n: f64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

impl BoundaryValues {
    pub const fn new(n: f64, mx: f64, my: f64, mz: f64) -> Self {
        BoundaryValues { n, mx, my, mz }
    }

    pub fn component(&self, field: FieldName) -> f64 {
        match field {
            FieldName::Density => self.n,
            FieldName::MomentumX => self.mx,
            FieldName::MomentumY => self.my,
            FieldName::MomentumZ => self.mz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    pub west: BoundaryValues,
    pub east: BoundaryValues,
    pub south: BoundaryValues,
    pub north: BoundaryValues,
}

impl BoundarySpec {
    pub fn uniform(values: BoundaryValues) -> Self {
        BoundarySpec { west: values, east: values, south: values, north: values }
    }

    pub fn side(&self, side: Side) -> &BoundaryValues {
        match side {
            Side::West => &self.west,
            Side::East => &self.east,
            Side::South => &self.south,
            Side::North => &self.north,
        }
    }

    pub fn component(&self, field: FieldName) -> SideValues {
        SideValues {
            west: self.west.component(field),
            east: self.east.component(field),
            south: self.south.component(field),
            north: self.north.component(field),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for side in Side::FILL_ORDER {
            let v = self.side(side);
            if !(v.n > 0.0) {
                return Err(Error::InvalidParams("boundary density must be positive"));
            }
            if !(v.mx.is_finite() && v.my.is_finite() && v.mz.is_finite() && v.n.is_finite()) {
                return Err(Error::InvalidParams("boundary values must be finite"));
            }
        }
        Ok(())
    }
}

/// Fills the ghost rings of the four conserved fields from `bc`.
pub fn fill_ghosts(
    fields: [&mut Field; 4],
    grid: &GridSpec,
    bc: &BoundarySpec,
) -> Result<()> {
    for (field, name) in fields.into_iter().zip(FieldName::ALL) {
        field.fill_ghosts(grid, bc.component(name))?;
    }
    Ok(())
}
