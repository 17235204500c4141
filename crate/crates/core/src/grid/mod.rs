//! Uniform rectangular grids and the fields that live on them.
//!
//! Layout (MAC staggering):
//! - scalars and Q-tensors at cell centres `((i+1/2) hx, (j+1/2) hy)`,
//! - `u` on x-faces `(i hx, (j+1/2) hy)`, `v` on y-faces `((i+1/2) hx, j hy)`,
//!   each stored as an `nx * ny` array with face `i` on the west side of cell `i`.
//!
//! With [`Boundary::Dirichlet0`] the walls sit on the outer faces. Wall-normal
//! velocity slots (`u[0, j]`, `v[i, 0]`) are pinned to zero and the east/north
//! walls are implicit. Cell-centred quantities and tangential velocities are
//! closed by odd reflection, so their wall value (the face average of the
//! interior cell and its ghost) is exactly zero.

mod io;
pub mod ops;

pub use io::{read_snapshot, write_csv, write_snapshot, Snapshot, SnapshotKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Dim, Matrix, QTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Homogeneous Dirichlet walls on all four sides.
    Dirichlet0,
    /// Doubly periodic; used for exact summation-by-parts checks.
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub bc: Boundary,
}

/// Neighbour lookup result: storage index and reflection sign.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Slot {
    pub idx: usize,
    pub sign: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, bc: Boundary) -> Result<Self> {
        let g = GridSpec { nx, ny, lx, ly, bc };
        g.validate()?;
        Ok(g)
    }

    pub fn unit_square(n: usize, bc: Boundary) -> Result<Self> {
        GridSpec::new(n, n, 1.0, 1.0, bc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::invalid(format!(
                "grid needs at least 4 cells per direction, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.lx.is_finite() && self.lx > 0.0 && self.ly.is_finite() && self.ly > 0.0) {
            return Err(Error::invalid("domain lengths must be positive"));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Cell area, the quadrature weight of every cell and interior face.
    pub fn area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn ncell(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    pub fn periodic(&self) -> bool {
        self.bc == Boundary::Periodic
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }

    /// Cell-centred value slot with odd reflection (Dirichlet) or wrap.
    #[inline]
    pub(crate) fn cell_slot(&self, i: isize, j: isize) -> Slot {
        let (ii, si) = reflect_cell(i, self.nx, self.periodic());
        let (jj, sj) = reflect_cell(j, self.ny, self.periodic());
        Slot { idx: self.idx(ii, jj), sign: si * sj }
    }

    #[inline]
    pub(crate) fn cell_val(&self, f: &[f64], i: isize, j: isize) -> f64 {
        let s = self.cell_slot(i, j);
        s.sign * f[s.idx]
    }

    /// x-face slot: `None` on Dirichlet walls, odd reflection across y-walls.
    #[inline]
    pub(crate) fn u_slot(&self, i: isize, j: isize) -> Option<Slot> {
        if self.periodic() {
            let ii = i.rem_euclid(self.nx as isize) as usize;
            let jj = j.rem_euclid(self.ny as isize) as usize;
            return Some(Slot { idx: self.idx(ii, jj), sign: 1.0 });
        }
        if i <= 0 || i >= self.nx as isize {
            return None;
        }
        let (jj, s) = reflect_cell(j, self.ny, false);
        Some(Slot { idx: self.idx(i as usize, jj), sign: s })
    }

    /// y-face slot: `None` on Dirichlet walls, odd reflection across x-walls.
    #[inline]
    pub(crate) fn v_slot(&self, i: isize, j: isize) -> Option<Slot> {
        if self.periodic() {
            let ii = i.rem_euclid(self.nx as isize) as usize;
            let jj = j.rem_euclid(self.ny as isize) as usize;
            return Some(Slot { idx: self.idx(ii, jj), sign: 1.0 });
        }
        if j <= 0 || j >= self.ny as isize {
            return None;
        }
        let (ii, s) = reflect_cell(i, self.nx, false);
        Some(Slot { idx: self.idx(ii, j as usize), sign: s })
    }

    #[inline]
    pub(crate) fn u_val(&self, u: &[f64], i: isize, j: isize) -> f64 {
        self.u_slot(i, j).map_or(0.0, |s| s.sign * u[s.idx])
    }

    #[inline]
    pub(crate) fn v_val(&self, v: &[f64], i: isize, j: isize) -> f64 {
        self.v_slot(i, j).map_or(0.0, |s| s.sign * v[s.idx])
    }

    /// True for stored x-face slots that are pinned walls.
    pub fn is_u_wall(&self, i: usize) -> bool {
        !self.periodic() && i == 0
    }

    pub fn is_v_wall(&self, j: usize) -> bool {
        !self.periodic() && j == 0
    }
}

#[inline]
fn reflect_cell(i: isize, n: usize, periodic: bool) -> (usize, f64) {
    let n = n as isize;
    if periodic {
        (i.rem_euclid(n) as usize, 1.0)
    } else if i < 0 {
        ((-1 - i) as usize, -1.0)
    } else if i >= n {
        ((2 * n - 1 - i) as usize, -1.0)
    } else {
        (i as usize, 1.0)
    }
}

/// Cell-centred scalar (pressure, viscosity, divergence).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField { grid, data: vec![0.0; grid.ncell()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.ncell());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                data.push(f(x, y));
            }
        }
        ScalarField { grid, data }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Grid L2 inner product.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        dot(&self.data, &other.data) * self.grid.area()
    }
}

/// Cell-centred Q-tensor field, stored one coefficient block per component.
#[derive(Clone, Debug, PartialEq)]
pub struct QField {
    pub grid: GridSpec,
    pub dim: Dim,
    pub comps: Vec<Vec<f64>>,
}

impl QField {
    pub fn zeros(grid: GridSpec, dim: Dim) -> Self {
        QField { grid, dim, comps: vec![vec![0.0; grid.ncell()]; dim.ncomp()] }
    }

    pub fn from_fn(grid: GridSpec, dim: Dim, f: impl Fn(f64, f64) -> QTensor) -> Self {
        let mut q = QField::zeros(grid, dim);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                q.set(grid.idx(i, j), &f(x, y));
            }
        }
        q
    }

    pub fn ncomp(&self) -> usize {
        self.dim.ncomp()
    }

    #[inline]
    pub fn get(&self, k: usize) -> QTensor {
        let mut c = [0.0; 5];
        for (m, comp) in self.comps.iter().enumerate() {
            c[m] = comp[k];
        }
        QTensor::from_slice(self.dim, &c)
    }

    #[inline]
    pub fn set(&mut self, k: usize, q: &QTensor) {
        for (m, &x) in q.coeffs().iter().enumerate() {
            self.comps[m][k] = x;
        }
    }

    pub fn map(&self, f: impl Fn(&QTensor) -> QTensor) -> QField {
        let mut out = QField::zeros(self.grid, self.dim);
        for k in 0..self.grid.ncell() {
            out.set(k, &f(&self.get(k)));
        }
        out
    }

    pub fn zip_map(&self, other: &QField, f: impl Fn(&QTensor, &QTensor) -> QTensor) -> QField {
        let mut out = QField::zeros(self.grid, self.dim);
        for k in 0..self.grid.ncell() {
            out.set(k, &f(&self.get(k), &other.get(k)));
        }
        out
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &QField) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            axpy(a, s, b);
        }
    }

    pub fn sub(&self, other: &QField) -> QField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Grid L2 inner product with the Frobenius metric.
    pub fn dot(&self, other: &QField) -> f64 {
        let mut a = [0.0; 5];
        let mut b = [0.0; 5];
        let mut s = 0.0;
        for k in 0..self.grid.ncell() {
            for m in 0..self.ncomp() {
                a[m] = self.comps[m][k];
                b[m] = other.comps[m][k];
            }
            s += self.dim.frob(&a, &b);
        }
        s * self.grid.area()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| max_abs(c)).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|x| x.is_finite())
    }

    /// Largest |Q| value implied on the walls (face average of the boundary
    /// cell and its ghost). Zero by construction in Dirichlet mode.
    pub fn max_wall_value(&self) -> f64 {
        if self.grid.periodic() {
            return 0.0;
        }
        let g = &self.grid;
        let (nx, ny) = (g.nx as isize, g.ny as isize);
        let mut m = 0.0_f64;
        for comp in &self.comps {
            for j in 0..ny {
                for (i, ig) in [(0, -1), (nx - 1, nx)] {
                    m = m.max((0.5 * (g.cell_val(comp, i, j) + g.cell_val(comp, ig, j))).abs());
                }
            }
            for i in 0..nx {
                for (j, jg) in [(0, -1), (ny - 1, ny)] {
                    m = m.max((0.5 * (g.cell_val(comp, i, j) + g.cell_val(comp, i, jg))).abs());
                }
            }
        }
        m
    }
}

/// MAC velocity: `data[..n]` holds u on x-faces, `data[n..]` v on y-faces.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(grid: GridSpec) -> Self {
        VelocityField { grid, data: vec![0.0; 2 * grid.ncell()] }
    }

    /// Point-samples `(fu, fv)` at face centres; Dirichlet wall slots stay zero.
    pub fn from_fn(grid: GridSpec, fu: impl Fn(f64, f64) -> f64, fv: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = VelocityField::zeros(grid);
        let (hx, hy) = (grid.hx(), grid.hy());
        let n = grid.ncell();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                if !grid.is_u_wall(i) {
                    out.data[k] = fu(i as f64 * hx, (j as f64 + 0.5) * hy);
                }
                if !grid.is_v_wall(j) {
                    out.data[n + k] = fv((i as f64 + 0.5) * hx, j as f64 * hy);
                }
            }
        }
        out
    }

    /// Discrete curl of a stream function sampled at cell corners:
    /// `u = d psi / dy`, `v = -d psi / dx`. Exactly divergence-free; with
    /// psi = 0 on the boundary the normal velocity vanishes on the walls.
    pub fn from_stream_function(grid: GridSpec, psi: impl Fn(f64, f64) -> f64) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let corner = |i: usize, j: usize| psi(i as f64 * hx, j as f64 * hy);
        let mut out = VelocityField::zeros(grid);
        let n = grid.ncell();
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let k = grid.idx(i, j);
                if !grid.is_u_wall(i) {
                    out.data[k] = (corner(i, j + 1) - corner(i, j)) / hy;
                }
                if !grid.is_v_wall(j) {
                    out.data[n + k] = -(corner(i + 1, j) - corner(i, j)) / hx;
                }
            }
        }
        out
    }

    pub fn u(&self) -> &[f64] {
        &self.data[..self.grid.ncell()]
    }

    pub fn v(&self) -> &[f64] {
        &self.data[self.grid.ncell()..]
    }

    pub fn u_mut(&mut self) -> &mut [f64] {
        let n = self.grid.ncell();
        &mut self.data[..n]
    }

    pub fn v_mut(&mut self) -> &mut [f64] {
        let n = self.grid.ncell();
        &mut self.data[n..]
    }

    /// Zeroes the pinned wall slots.
    pub fn enforce_walls(&mut self) {
        enforce_walls(&self.grid, &mut self.data);
    }

    pub fn axpy(&mut self, s: f64, other: &VelocityField) {
        axpy(&mut self.data, s, &other.data);
    }

    pub fn sub(&self, other: &VelocityField) -> VelocityField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// Grid L2 inner product over faces.
    pub fn dot(&self, other: &VelocityField) -> f64 {
        dot(&self.data, &other.data) * self.grid.area()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Velocity interpolated to the centre of cell `(i, j)`.
    pub fn at_center(&self, i: usize, j: usize) -> (f64, f64) {
        let g = &self.grid;
        let (i, j) = (i as isize, j as isize);
        (
            0.5 * (g.u_val(self.u(), i, j) + g.u_val(self.u(), i + 1, j)),
            0.5 * (g.v_val(self.v(), i, j) + g.v_val(self.v(), i, j + 1)),
        )
    }
}

pub(crate) fn enforce_walls(g: &GridSpec, data: &mut [f64]) {
    if g.periodic() {
        return;
    }
    let n = g.ncell();
    for j in 0..g.ny {
        data[g.idx(0, j)] = 0.0;
    }
    for i in 0..g.nx {
        data[n + g.idx(i, 0)] = 0.0;
    }
}

/// Per-cell d x d matrices (stresses, velocity gradients).
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    pub grid: GridSpec,
    pub dim: Dim,
    pub data: Vec<Matrix>,
}

impl MatrixField {
    pub fn zeros(grid: GridSpec, dim: Dim) -> Self {
        MatrixField { grid, dim, data: vec![Matrix::zeros(dim); grid.ncell()] }
    }

    /// Grid L2 inner product with the Frobenius product.
    pub fn dot(&self, other: &MatrixField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.frob(b)).sum::<f64>() * self.grid.area()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(Matrix::max_abs).fold(0.0, f64::max)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(a, b)| *a += s * b);
}

#[inline]
pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
