//! Pointwise tensor algebra: Q-tensors, the corotational term, the
//! commutator stress, the Landau-de Gennes bulk potential and the molecular
//! field.
//!
//! A [`QTensor`] lives in the space of symmetric traceless d x d matrices and
//! is stored in a minimal basis, so symmetry and trace-freeness hold by
//! construction:
//!
//! ```text
//! d = 2:  [[q1, q2], [q2, -q1]]
//! d = 3:  [[q1, q2, q3], [q2, q4, q5], [q3, q5, -(q1 + q4)]]
//! ```
//!
//! General d x d matrices ([`Matrix`]) are stored zero-padded in a 3 x 3
//! array; for d = 2 the third row and column stay zero under every
//! operation in this module.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tensor dimension d of the order parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Number of independent coefficients of a symmetric traceless tensor.
    pub fn ncomp(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 5,
        }
    }

    pub fn from_usize(d: usize) -> Result<Dim> {
        match d {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            _ => Err(Error::invalid(format!("tensor dimension must be 2 or 3, got {d}"))),
        }
    }

    /// Frobenius-metric weights such that `Q:G = sum_k w_k q_k g_k` for the
    /// diagonal part of the metric. The d = 3 basis has one off-diagonal
    /// coupling (q1, q4) through Q33, handled in [`Dim::frob`].
    pub fn frob(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Dim::Two => 2.0 * (a[0] * b[0] + a[1] * b[1]),
            Dim::Three => {
                a[0] * b[0]
                    + a[3] * b[3]
                    + (a[0] + a[3]) * (b[0] + b[3])
                    + 2.0 * (a[1] * b[1] + a[2] * b[2] + a[4] * b[4])
            }
        }
    }
}

impl TryFrom<usize> for Dim {
    type Error = Error;
    fn try_from(d: usize) -> Result<Dim> {
        Dim::from_usize(d)
    }
}

impl From<Dim> for usize {
    fn from(d: Dim) -> usize {
        d.n()
    }
}

/// Dense d x d matrix, zero-padded to 3 x 3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix {
    dim: Dim,
    m: Matrix3<f64>,
}

impl Matrix {
    pub fn zeros(dim: Dim) -> Self {
        Matrix { dim, m: Matrix3::zeros() }
    }

    pub fn identity(dim: Dim) -> Self {
        let mut m = Matrix3::zeros();
        for i in 0..dim.n() {
            m[(i, i)] = 1.0;
        }
        Matrix { dim, m }
    }

    /// Builds a matrix from row-major entries; `rows.len()` must equal d.
    pub fn from_rows(dim: Dim, rows: &[&[f64]]) -> Result<Self> {
        let n = dim.n();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("expected a {n}x{n} matrix")));
        }
        let mut out = Matrix::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::invalid("matrix entries must be finite"));
                }
                out.m[(i, j)] = x;
            }
        }
        Ok(out)
    }

    /// Embeds a 2 x 2 in-plane block (e.g. a velocity gradient on a planar
    /// grid) into a d x d matrix.
    pub fn from_planar(dim: Dim, a: [[f64; 2]; 2]) -> Self {
        let mut out = Matrix::zeros(dim);
        for (i, row) in a.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                out.m[(i, j)] = x;
            }
        }
        out
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        assert!(i < self.dim.n() && j < self.dim.n(), "index out of range");
        self.m[(i, j)] = x;
    }

    pub fn raw(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn transpose(&self) -> Self {
        Matrix { dim: self.dim, m: self.m.transpose() }
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// Frobenius product `A:B = A_ij B_ij`.
    pub fn frob(&self, other: &Matrix) -> f64 {
        self.m.component_mul(&other.m).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.frob(self)
    }

    pub fn scale(&self, s: f64) -> Self {
        Matrix { dim: self.dim, m: self.m * s }
    }

    pub fn max_abs(&self) -> f64 {
        self.m.amax()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|x| x.is_finite())
    }
}

impl Add for Matrix {
    type Output = Matrix;
    fn add(self, rhs: Matrix) -> Matrix {
        Matrix { dim: self.dim, m: self.m + rhs.m }
    }
}

impl Sub for Matrix {
    type Output = Matrix;
    fn sub(self, rhs: Matrix) -> Matrix {
        Matrix { dim: self.dim, m: self.m - rhs.m }
    }
}

impl Mul for Matrix {
    type Output = Matrix;
    fn mul(self, rhs: Matrix) -> Matrix {
        Matrix { dim: self.dim, m: self.m * rhs.m }
    }
}

impl Neg for Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        Matrix { dim: self.dim, m: -self.m }
    }
}

/// Symmetric traceless order-parameter tensor in the minimal basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QTensor {
    dim: Dim,
    c: [f64; 5],
}

impl QTensor {
    pub fn zero(dim: Dim) -> Self {
        QTensor { dim, c: [0.0; 5] }
    }

    pub fn from_coeffs(dim: Dim, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != dim.ncomp() {
            return Err(Error::invalid(format!(
                "a d={} Q-tensor has {} coefficients, got {}",
                dim.n(),
                dim.ncomp(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("Q-tensor coefficients must be finite"));
        }
        let mut c = [0.0; 5];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Ok(QTensor { dim, c })
    }

    /// Unchecked constructor for hot loops; `coeffs` beyond `ncomp` are ignored.
    pub(crate) fn from_slice(dim: Dim, coeffs: &[f64]) -> Self {
        let mut c = [0.0; 5];
        c[..dim.ncomp()].copy_from_slice(&coeffs[..dim.ncomp()]);
        QTensor { dim, c }
    }

    /// Symmetric traceless part of an arbitrary matrix.
    pub fn from_matrix(a: &Matrix) -> Self {
        let dim = a.dim;
        let m = &a.m;
        let tr = a.trace() / dim.n() as f64;
        let sym = |i: usize, j: usize| 0.5 * (m[(i, j)] + m[(j, i)]);
        let mut c = [0.0; 5];
        match dim {
            Dim::Two => {
                // Q11 = -Q22 in the basis, so average the two diagonal slots.
                c[0] = 0.5 * ((m[(0, 0)] - tr) - (m[(1, 1)] - tr));
                c[1] = sym(0, 1);
            }
            Dim::Three => {
                c[0] = m[(0, 0)] - tr;
                c[1] = sym(0, 1);
                c[2] = sym(0, 2);
                c[3] = m[(1, 1)] - tr;
                c[4] = sym(1, 2);
            }
        }
        QTensor { dim, c }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.dim.ncomp()]
    }

    pub fn to_matrix(&self) -> Matrix {
        let c = &self.c;
        let m = match self.dim {
            Dim::Two => Matrix3::new(c[0], c[1], 0.0, c[1], -c[0], 0.0, 0.0, 0.0, 0.0),
            Dim::Three => Matrix3::new(
                c[0],
                c[1],
                c[2],
                c[1],
                c[3],
                c[4],
                c[2],
                c[4],
                -(c[0] + c[3]),
            ),
        };
        Matrix { dim: self.dim, m }
    }

    /// Trace of the reconstructed matrix, summed in the order that makes the
    /// basis cancellation exact.
    pub fn reconstructed_trace(&self) -> f64 {
        let m = self.to_matrix();
        match self.dim {
            Dim::Two => m.m[(0, 0)] + m.m[(1, 1)],
            Dim::Three => (m.m[(0, 0)] + m.m[(1, 1)]) + m.m[(2, 2)],
        }
    }

    /// Frobenius product `Q:G`.
    pub fn dot(&self, other: &QTensor) -> f64 {
        self.dim.frob(&self.c, &other.c)
    }

    /// `tr(Q^2) = |Q|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|x| *x *= s);
        QTensor { dim: self.dim, c }
    }
}

impl Add for QTensor {
    type Output = QTensor;
    fn add(self, rhs: QTensor) -> QTensor {
        let mut c = self.c;
        c.iter_mut().zip(rhs.c).for_each(|(a, b)| *a += b);
        QTensor { dim: self.dim, c }
    }
}

impl AddAssign for QTensor {
    fn add_assign(&mut self, rhs: QTensor) {
        self.c.iter_mut().zip(rhs.c).for_each(|(a, b)| *a += b);
    }
}

impl Sub for QTensor {
    type Output = QTensor;
    fn sub(self, rhs: QTensor) -> QTensor {
        let mut c = self.c;
        c.iter_mut().zip(rhs.c).for_each(|(a, b)| *a -= b);
        QTensor { dim: self.dim, c }
    }
}

impl Neg for QTensor {
    type Output = QTensor;
    fn neg(self) -> QTensor {
        self.scale(-1.0)
    }
}

/// Bulk-potential and elastic material constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lambda: f64,
    pub gamma: f64,
}

impl MaterialParams {
    pub fn new(a: f64, b: f64, c: f64, lambda: f64, gamma: f64) -> Result<Self> {
        let p = MaterialParams { a, b, c, lambda, gamma };
        p.validate()?;
        Ok(p)
    }

    /// All constants set to one.
    pub fn unit() -> Self {
        MaterialParams { a: 1.0, b: 1.0, c: 1.0, lambda: 1.0, gamma: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::invalid("material constants a, b must be finite"));
        }
        for (name, v) in [("c", self.c), ("lambda", self.lambda), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("material constant {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Order-parameter dependent viscosity nu(Q), bounded between nu0 and nu0 + nu1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ViscositySpec {
    /// nu(Q) = nu0
    Constant { nu0: f64 },
    /// nu(Q) = nu0 + nu1 tr(Q^2) / (1 + tr(Q^2))
    Saturating { nu0: f64, nu1: f64 },
}

impl ViscositySpec {
    pub fn validate(&self) -> Result<()> {
        let (nu0, nu1) = self.params();
        if !(nu0.is_finite() && nu0 > 0.0) {
            return Err(Error::invalid(format!("viscosity nu0 must be > 0, got {nu0}")));
        }
        if !(nu1.is_finite() && nu1 >= 0.0) {
            return Err(Error::invalid(format!("viscosity nu1 must be >= 0, got {nu1}")));
        }
        Ok(())
    }

    fn params(&self) -> (f64, f64) {
        match *self {
            ViscositySpec::Constant { nu0 } => (nu0, 0.0),
            ViscositySpec::Saturating { nu0, nu1 } => (nu0, nu1),
        }
    }

    /// Lower and upper bounds `(nu0, nu0 + nu1)`.
    pub fn bounds(&self) -> (f64, f64) {
        let (nu0, nu1) = self.params();
        (nu0, nu0 + nu1)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ViscositySpec::Constant { .. })
            || matches!(self, ViscositySpec::Saturating { nu1, .. } if *nu1 == 0.0)
    }

    pub fn eval(&self, q: &QTensor) -> f64 {
        match *self {
            ViscositySpec::Constant { nu0 } => nu0,
            ViscositySpec::Saturating { nu0, nu1 } => {
                let t = q.norm_sq();
                nu0 + nu1 * t / (1.0 + t)
            }
        }
    }
}

/// Uniaxial tensor `s (n (x) n - I/d)`.
pub fn uniaxial(s: f64, n: &[f64], dim: Dim) -> Result<QTensor> {
    if n.len() != dim.n() {
        return Err(Error::invalid(format!("director must have {} components", dim.n())));
    }
    let len = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !s.is_finite() || (len - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("director must be a unit vector, |n| = {len}")));
    }
    let mut m = Matrix::zeros(dim);
    let inv_d = 1.0 / dim.n() as f64;
    for i in 0..dim.n() {
        for j in 0..dim.n() {
            let delta = if i == j { inv_d } else { 0.0 };
            m.m[(i, j)] = s * (n[i] * n[j] - delta);
        }
    }
    Ok(QTensor::from_matrix(&m))
}

/// Stretch tensor D = (grad u + grad u^T) / 2.
pub fn stretch(grad_u: &Matrix) -> Matrix {
    Matrix { dim: grad_u.dim, m: (grad_u.m + grad_u.m.transpose()) * 0.5 }
}

/// Vorticity tensor W = (grad u - grad u^T) / 2.
pub fn vorticity(grad_u: &Matrix) -> Matrix {
    Matrix { dim: grad_u.dim, m: (grad_u.m - grad_u.m.transpose()) * 0.5 }
}

/// Corotational term `S(grad u, Q) = W Q - Q W`.
pub fn corotation(grad_u: &Matrix, q: &QTensor) -> QTensor {
    let w = vorticity(grad_u);
    let qm = q.to_matrix();
    QTensor::from_matrix(&(w * qm - qm * w))
}

/// Commutator stress `sigma(Q1, Q2) = Q1 lap(Q2) - lap(Q2) Q1`, given lap(Q2).
pub fn sigma_stress(q1: &QTensor, lap_q2: &QTensor) -> Matrix {
    let a = q1.to_matrix();
    let l = lap_q2.to_matrix();
    a * l - l * a
}

/// Landau-de Gennes bulk energy density
/// `f_B = a/2 tr(Q^2) - b/3 tr(Q^3) + c/4 tr(Q^2)^2`.
///
/// The quartic is written with `tr(Q^2)^2` so that `-grad f_B` projected onto
/// traceless tensors is exactly [`lower_order`]. For traceless symmetric Q
/// in two or three dimensions this equals `c/2 tr(Q^4)`.
pub fn bulk_energy(q: &QTensor, p: &MaterialParams) -> f64 {
    let m = q.to_matrix();
    let m2 = m * m;
    let tr2 = m2.trace();
    let tr3 = (m2 * m).trace();
    0.5 * p.a * tr2 - p.b / 3.0 * tr3 + 0.25 * p.c * tr2 * tr2
}

/// Lower-order part of the molecular field,
/// `L(Q) = -a Q + b (Q^2 - tr(Q^2)/d I) - c tr(Q^2) Q`.
pub fn lower_order(q: &QTensor, p: &MaterialParams) -> QTensor {
    let m = q.to_matrix();
    let m2 = m * m;
    let tr2 = m2.trace();
    let iso = Matrix::identity(q.dim).scale(tr2 / q.dim.n() as f64);
    let l = m.scale(-p.a - p.c * tr2) + (m2 - iso).scale(p.b);
    QTensor::from_matrix(&l)
}

/// Molecular field `H = lambda lap(Q) + L(Q)`.
pub fn molecular_field(q: &QTensor, lap_q: &QTensor, p: &MaterialParams) -> QTensor {
    lap_q.scale(p.lambda) + lower_order(q, p)
}

/// Unconstrained matrix gradient of the bulk energy, `a Q - b Q^2 + c tr(Q^2) Q`.
pub fn grad_bulk_energy(q: &QTensor, p: &MaterialParams) -> Matrix {
    let m = q.to_matrix();
    let m2 = m * m;
    m.scale(p.a + p.c * m2.trace()) - m2.scale(p.b)
}

/// Constant `C >= 0` with `f_B(Q) >= -C` for every symmetric traceless Q.
///
/// Uses `|tr Q^3| <= |Q|^3` and `tr(Q^2) = |Q|^2`, then minimises the
/// resulting quartic in `r = |Q|` in closed form. Requires `c > 0`.
pub fn bulk_energy_lower_bound(p: &MaterialParams) -> f64 {
    let (a, b, c) = (p.a, p.b.abs(), p.c);
    let g = |r: f64| 0.5 * a * r * r - b / 3.0 * r.powi(3) + 0.25 * c * r.powi(4);
    // critical points: r = 0 and roots of c r^2 - b r + a = 0
    let mut best = 0.0_f64;
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        for r in [(b - s) / (2.0 * c), (b + s) / (2.0 * c)] {
            if r > 0.0 {
                best = best.min(g(r));
            }
        }
    }
    -best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q2(a: f64, b: f64) -> QTensor {
        QTensor::from_coeffs(Dim::Two, &[a, b]).unwrap()
    }

    fn mat2(r: [[f64; 2]; 2]) -> Matrix {
        Matrix::from_planar(Dim::Two, r)
    }

    #[test]
    fn uniaxial_examples() {
        let q = uniaxial(1.0, &[1.0, 0.0], Dim::Two).unwrap();
        assert_eq!(q.coeffs(), &[0.5, 0.0]);

        let z = uniaxial(0.0, &[0.6, 0.8], Dim::Two).unwrap();
        assert!(z.coeffs().iter().all(|&x| x == 0.0));

        let q3 = uniaxial(1.0, &[0.0, 0.0, 1.0], Dim::Three).unwrap().to_matrix();
        let expect = [[-1.0 / 3.0, 0.0, 0.0], [0.0, -1.0 / 3.0, 0.0], [0.0, 0.0, 2.0 / 3.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((q3.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn uniaxial_director_is_eigenvector() {
        let n = [0.36, 0.48, 0.8];
        let q = uniaxial(0.7, &n, Dim::Three).unwrap().to_matrix();
        for i in 0..3 {
            let qn: f64 = (0..3).map(|j| q.get(i, j) * n[j]).sum();
            assert!((qn - 0.7 * (1.0 - 1.0 / 3.0) * n[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn uniaxial_rejects_non_unit_director() {
        assert!(matches!(uniaxial(1.0, &[1.0, 1.0], Dim::Two), Err(Error::InvalidInput(_))));
        assert!(uniaxial(1.0, &[1.0, 0.0, 0.0], Dim::Two).is_err());
    }

    #[test]
    fn stretch_vorticity_of_shear() {
        let g = mat2([[0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(stretch(&g), mat2([[0.0, 0.5], [0.5, 0.0]]));
        assert_eq!(vorticity(&g), mat2([[0.0, 0.5], [-0.5, 0.0]]));
        let s = mat2([[1.0, 2.0], [2.0, -3.0]]);
        assert_eq!(vorticity(&s), Matrix::zeros(Dim::Two));
    }

    #[test]
    fn corotation_examples() {
        let g = mat2([[0.0, 1.0], [0.0, 0.0]]);
        let s = corotation(&g, &q2(0.5, 0.0));
        assert_eq!(s.coeffs(), &[0.0, -0.5]);
        assert_eq!(corotation(&mat2([[1.0, 2.0], [2.0, 0.5]]), &q2(0.3, -0.2)), QTensor::zero(Dim::Two));
        assert_eq!(corotation(&g, &QTensor::zero(Dim::Two)), QTensor::zero(Dim::Two));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_stress(&q2(0.5, 0.0), &q2(0.25, 0.0)), Matrix::zeros(Dim::Two));
        let s = sigma_stress(&q2(0.5, 0.0), &q2(0.0, 1.0));
        assert_eq!(s, mat2([[0.0, 1.0], [-1.0, 0.0]]));
    }

    #[test]
    fn bulk_energy_examples() {
        let p = MaterialParams::unit();
        assert_eq!(bulk_energy(&QTensor::zero(Dim::Three), &p), 0.0);
        // tr Q^2 = 1/2, tr Q^3 = 0
        assert!((bulk_energy(&q2(0.5, 0.0), &p) - 5.0 / 16.0).abs() < 1e-15);
        // diag(-1/3,-1/3,2/3): tr Q^2 = 2/3, tr Q^3 = 2/9
        let q = uniaxial(1.0, &[0.0, 0.0, 1.0], Dim::Three).unwrap();
        let expect = 0.5 * (2.0 / 3.0) - (2.0 / 9.0) / 3.0 + 0.25 * (4.0 / 9.0);
        assert!((bulk_energy(&q, &p) - expect).abs() < 1e-15);
    }

    #[test]
    fn lower_order_and_molecular_field_examples() {
        let p = MaterialParams::unit();
        let q = q2(0.5, 0.0);
        assert_eq!(lower_order(&QTensor::zero(Dim::Two), &p), QTensor::zero(Dim::Two));
        let l = lower_order(&q, &p);
        assert!((l.coeffs()[0] + 0.75).abs() < 1e-15 && l.coeffs()[1] == 0.0);
        let h = molecular_field(&q, &QTensor::zero(Dim::Two), &p);
        assert_eq!(h, l);
        let lap = q2(0.3, -1.7);
        assert_eq!(molecular_field(&QTensor::zero(Dim::Two), &lap, &p), lap);
    }

    #[test]
    fn viscosity_examples() {
        let v = ViscositySpec::Saturating { nu0: 1.0, nu1: 1.0 };
        assert_eq!(v.eval(&QTensor::zero(Dim::Two)), 1.0);
        assert!((v.eval(&q2(0.5, 0.0)) - 4.0 / 3.0).abs() < 1e-15);
        let c = ViscositySpec::Constant { nu0: 0.7 };
        assert_eq!(c.eval(&q2(3.0, -2.0)), 0.7);
        assert!(ViscositySpec::Saturating { nu0: 0.0, nu1: 1.0 }.validate().is_err());
    }

    #[test]
    fn reconstructed_trace_is_exact() {
        let q = QTensor::from_coeffs(Dim::Three, &[0.1, 0.7, -0.3, 0.2 + 1e-17, 0.9]).unwrap();
        assert_eq!(q.reconstructed_trace(), 0.0);
    }

    #[test]
    fn bulk_lower_bound_holds_on_samples() {
        let p = MaterialParams::new(-1.0, 2.0, 0.5, 1.0, 1.0).unwrap();
        let c = bulk_energy_lower_bound(&p);
        assert!(c > 0.0);
        for k in 0..2000 {
            let t = k as f64 * 0.013;
            let q = QTensor::from_coeffs(
                Dim::Three,
                &[t.sin() * 2.0, (1.3 * t).cos(), 0.5 * t.sin(), -(0.7 * t).cos() * 1.5, 0.2],
            )
            .unwrap();
            assert!(bulk_energy(&q, &p) >= -c - 1e-12);
        }
    }
}
