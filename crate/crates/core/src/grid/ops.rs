//! Finite-difference operators on [`GridSpec`] fields.
//!
//! Operator pairs that must be adjoint are generated from one stencil
//! enumeration, so the discrete integration-by-parts identities hold to
//! rounding in both boundary modes:
//!
//! - [`velocity_gradient`] and [`div_matrix`]: `<div F, u> = -<F, grad u>`,
//! - [`laplacian`] and [`dirichlet_form`]: `<lap f, g> = -<grad f, grad g>`,
//! - [`convect_q`] and [`elastic_force`]: `<H, (u.grad) Q> = -<u, F(Q, H)>`,
//! - [`viscous_apply`] and [`viscous_form`]: `<div(nu D u), w> = -a_nu(u, w)`.

use crate::error::Result;
use crate::grid::{GridSpec, MatrixField, QField, ScalarField, Slot, VelocityField};
use crate::tensor::{self, Dim, MaterialParams, Matrix, QTensor, ViscositySpec};

#[inline]
fn east(i: usize, n: usize, periodic: bool) -> (usize, f64) {
    if i + 1 < n {
        (i + 1, 1.0)
    } else if periodic {
        (0, 1.0)
    } else {
        (i, -1.0)
    }
}

#[inline]
fn west(i: usize, n: usize, periodic: bool) -> (usize, f64) {
    if i > 0 {
        (i - 1, 1.0)
    } else if periodic {
        (n - 1, 1.0)
    } else {
        (i, -1.0)
    }
}

/// 5-point Laplacian of a cell-centred scalar (odd-reflection ghosts in
/// Dirichlet mode, so the wall value is zero).
pub fn laplacian(g: &GridSpec, f: &[f64], out: &mut [f64]) {
    let per = g.periodic();
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    for j in 0..g.ny {
        let (jn, sn) = east(j, g.ny, per);
        let (js, ss) = west(j, g.ny, per);
        let row = j * g.nx;
        for i in 0..g.nx {
            let (ie, se) = east(i, g.nx, per);
            let (iw, sw) = west(i, g.nx, per);
            let c = f[row + i];
            out[row + i] = (se * f[row + ie] - 2.0 * c + sw * f[row + iw]) * ihx2
                + (sn * f[jn * g.nx + i] - 2.0 * c + ss * f[js * g.nx + i]) * ihy2;
        }
    }
}

/// Diagonal of the matrix of [`laplacian`].
pub fn laplacian_diag(g: &GridSpec) -> Vec<f64> {
    let per = g.periodic();
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut d = vec![0.0; g.ncell()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let mut s = -2.0 * (ihx2 + ihy2);
            for (nb, sign, w) in [
                (east(i, g.nx, per), i, ihx2),
                (west(i, g.nx, per), i, ihx2),
                (east(j, g.ny, per), j, ihy2),
                (west(j, g.ny, per), j, ihy2),
            ]
            .map(|((k, s), c, w)| (k == c, s, w))
            {
                if nb {
                    s += sign * w;
                }
            }
            d[g.idx(i, j)] = s;
        }
    }
    d
}

/// Diagonal of the matrix of `laplacian o laplacian`.
pub fn bilaplacian_diag(g: &GridSpec) -> Vec<f64> {
    let per = g.periodic();
    let (ihx4, ihy4) = (g.hx().powi(-4), g.hy().powi(-4));
    let ld = laplacian_diag(g);
    let mut d = vec![0.0; g.ncell()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let real = |(k, _): (usize, f64), c: usize| if k != c { 1.0 } else { 0.0 };
            let nxr = real(east(i, g.nx, per), i) + real(west(i, g.nx, per), i);
            let nyr = real(east(j, g.ny, per), j) + real(west(j, g.ny, per), j);
            let k = g.idx(i, j);
            d[k] = ld[k] * ld[k] + nxr * ihx4 + nyr * ihy4;
        }
    }
    d
}

/// Cell-centred gradient by centred differences, `(d/dx, d/dy)`.
pub fn grad_cell(g: &GridSpec, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; g.ncell()];
    let mut gy = vec![0.0; g.ncell()];
    let (hx, hy) = (g.hx(), g.hy());
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let k = g.idx(i as usize, j as usize);
            gx[k] = (g.cell_val(f, i + 1, j) - g.cell_val(f, i - 1, j)) / (2.0 * hx);
            gy[k] = (g.cell_val(f, i, j + 1) - g.cell_val(f, i, j - 1)) / (2.0 * hy);
        }
    }
    (gx, gy)
}

/// Face-difference gradient pairing `sum_faces w (d f1)(d f2) * area`.
///
/// Wall faces carry weight 1/2 (they represent the half cell between wall
/// and centre); in periodic mode faces 0 and n are the same face and the two
/// halves add up. This is exactly `-<lap f1, f2>`.
pub fn dirichlet_form(g: &GridSpec, f1: &[f64], f2: &[f64]) -> f64 {
    let (hx, hy) = (g.hx(), g.hy());
    let (nx, ny) = (g.nx as isize, g.ny as isize);
    let mut s = 0.0;
    for j in 0..ny {
        for i in 0..=nx {
            let w = if i == 0 || i == nx { 0.5 } else { 1.0 };
            let d1 = (g.cell_val(f1, i, j) - g.cell_val(f1, i - 1, j)) / hx;
            let d2 = (g.cell_val(f2, i, j) - g.cell_val(f2, i - 1, j)) / hx;
            s += w * d1 * d2;
        }
    }
    for j in 0..=ny {
        let w = if j == 0 || j == ny { 0.5 } else { 1.0 };
        for i in 0..nx {
            let d1 = (g.cell_val(f1, i, j) - g.cell_val(f1, i, j - 1)) / hy;
            let d2 = (g.cell_val(f2, i, j) - g.cell_val(f2, i, j - 1)) / hy;
            s += w * d1 * d2;
        }
    }
    s * g.area()
}

pub fn laplacian_q(q: &QField) -> QField {
    let mut out = QField::zeros(q.grid, q.dim);
    for (src, dst) in q.comps.iter().zip(out.comps.iter_mut()) {
        laplacian(&q.grid, src, dst);
    }
    out
}

/// `lap(lap Q)`, the intermediate field closed by `lap Q = 0` on the walls.
pub fn biharmonic_q(q: &QField) -> QField {
    laplacian_q(&laplacian_q(q))
}

/// `<grad Q1, grad Q2>` with the Frobenius metric.
pub fn dirichlet_form_q(a: &QField, b: &QField) -> f64 {
    // The d = 3 metric couples q1 and q4 through Q33 = -(q1 + q4).
    match a.dim {
        Dim::Two => 2.0 * (0..2).map(|m| dirichlet_form(&a.grid, &a.comps[m], &b.comps[m])).sum::<f64>(),
        Dim::Three => {
            let g = &a.grid;
            let s33a: Vec<f64> = a.comps[0].iter().zip(&a.comps[3]).map(|(x, y)| x + y).collect();
            let s33b: Vec<f64> = b.comps[0].iter().zip(&b.comps[3]).map(|(x, y)| x + y).collect();
            dirichlet_form(g, &a.comps[0], &b.comps[0])
                + dirichlet_form(g, &a.comps[3], &b.comps[3])
                + dirichlet_form(g, &s33a, &s33b)
                + 2.0 * [1, 2, 4].iter().map(|&m| dirichlet_form(g, &a.comps[m], &b.comps[m])).sum::<f64>()
        }
    }
}

/// MAC divergence of a face velocity, at cell centres.
pub fn div_vec(u: &VelocityField) -> ScalarField {
    let g = &u.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = ScalarField::zeros(*g);
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let du = (g.u_val(u.u(), i + 1, j) - g.u_val(u.u(), i, j)) / hx;
            let dv = (g.v_val(u.v(), i, j + 1) - g.v_val(u.v(), i, j)) / hy;
            out.data[g.idx(i as usize, j as usize)] = du + dv;
        }
    }
    out
}

/// MAC gradient of a cell-centred scalar onto faces; zero on Dirichlet walls.
/// Minus the adjoint of [`div_vec`].
pub fn grad_faces(p: &ScalarField) -> VelocityField {
    let g = &p.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = VelocityField::zeros(*g);
    let n = g.ncell();
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let k = g.idx(i as usize, j as usize);
            let c = p.data[k];
            if g.u_slot(i, j).is_some() {
                out.data[k] = (c - g.cell_val(&p.data, i - 1, j)) / hx;
            }
            if g.v_slot(i, j).is_some() {
                out.data[n + k] = (c - g.cell_val(&p.data, i, j - 1)) / hy;
            }
        }
    }
    out
}

/// `div(grad_faces(p))`: the pressure Laplacian with no-flux walls.
pub fn pressure_laplacian(g: &GridSpec, p: &[f64], out: &mut [f64]) {
    let per = g.periodic();
    let (hx, hy) = (g.hx(), g.hy());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = p[g.idx(i, j)];
            let fe = if i + 1 < g.nx || per { (p[g.idx(east(i, g.nx, per).0, j)] - c) / hx } else { 0.0 };
            let fw = if i > 0 || per { (c - p[g.idx(west(i, g.nx, per).0, j)]) / hx } else { 0.0 };
            let fnn = if j + 1 < g.ny || per { (p[g.idx(i, east(j, g.ny, per).0)] - c) / hy } else { 0.0 };
            let fs = if j > 0 || per { (c - p[g.idx(i, west(j, g.ny, per).0)]) / hy } else { 0.0 };
            out[g.idx(i, j)] = (fe - fw) / hx + (fnn - fs) / hy;
        }
    }
}

pub fn pressure_laplacian_diag(g: &GridSpec) -> Vec<f64> {
    let per = g.periodic();
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut d = vec![0.0; g.ncell()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let nx_nb = [i + 1 < g.nx || per, i > 0 || per].iter().filter(|&&b| b).count() as f64;
            let ny_nb = [j + 1 < g.ny || per, j > 0 || per].iter().filter(|&&b| b).count() as f64;
            d[g.idx(i, j)] = -(nx_nb * ihx2 + ny_nb * ihy2);
        }
    }
    d
}

/// Enumerates the cell-centred velocity-gradient stencil at cell (i, j):
/// `emit(a, b, component, slot, coef)` contributes `coef * sign * w[slot]`
/// to `(grad u)_ab = d_b u_a`, where `component` 0 is u and 1 is v.
#[inline]
fn gradient_stencil(g: &GridSpec, i: isize, j: isize, mut emit: impl FnMut(usize, usize, usize, Slot, f64)) {
    let (hx, hy) = (g.hx(), g.hy());
    let mut u = |a: usize, b: usize, ii: isize, jj: isize, c: f64| {
        if let Some(s) = g.u_slot(ii, jj) {
            emit(a, b, 0, s, c);
        }
    };
    u(0, 0, i + 1, j, 1.0 / hx);
    u(0, 0, i, j, -1.0 / hx);
    let q = 0.25 / hy;
    u(0, 1, i, j + 1, q);
    u(0, 1, i + 1, j + 1, q);
    u(0, 1, i, j - 1, -q);
    u(0, 1, i + 1, j - 1, -q);
    let mut v = |a: usize, b: usize, ii: isize, jj: isize, c: f64| {
        if let Some(s) = g.v_slot(ii, jj) {
            emit(a, b, 1, s, c);
        }
    };
    v(1, 1, i, j + 1, 1.0 / hy);
    v(1, 1, i, j, -1.0 / hy);
    let q = 0.25 / hx;
    v(1, 0, i + 1, j, q);
    v(1, 0, i + 1, j + 1, q);
    v(1, 0, i - 1, j, -q);
    v(1, 0, i - 1, j + 1, -q);
}

/// Cell-centred velocity gradient `(grad u)_ab = d_b u_a`, embedded in d x d.
pub fn velocity_gradient(u: &VelocityField, dim: Dim) -> MatrixField {
    let g = &u.grid;
    let n = g.ncell();
    let mut out = MatrixField::zeros(*g, dim);
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let mut a = [[0.0; 2]; 2];
            gradient_stencil(g, i, j, |r, c, comp, s, coef| {
                a[r][c] += coef * s.sign * u.data[comp * n + s.idx];
            });
            out.data[g.idx(i as usize, j as usize)] = Matrix::from_planar(dim, a);
        }
    }
    out
}

/// Row-wise divergence `(div F)_a = d_b F_ab` on faces, the negative adjoint
/// of [`velocity_gradient`]. Only the in-plane rows and columns enter.
pub fn div_matrix(f: &MatrixField) -> VelocityField {
    let g = &f.grid;
    let n = g.ncell();
    let mut out = VelocityField::zeros(*g);
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let m = &f.data[g.idx(i as usize, j as usize)];
            gradient_stencil(g, i, j, |r, c, comp, s, coef| {
                out.data[comp * n + s.idx] -= coef * s.sign * m.get(r, c);
            });
        }
    }
    out
}

/// One strain functional: weight and up to four `(slot, coef)` terms into the
/// stacked `[u; v]` vector, with duplicate slots already merged.
#[derive(Clone)]
struct Functional {
    weight: f64,
    len: usize,
    terms: [(usize, f64); 4],
}

impl Functional {
    fn new(weight: f64) -> Self {
        Functional { weight, len: 0, terms: [(0, 0.0); 4] }
    }

    fn push(&mut self, slot: Option<Slot>, offset: usize, coef: f64) {
        let Some(s) = slot else { return };
        let idx = offset + s.idx;
        let c = coef * s.sign;
        if let Some(t) = self.terms[..self.len].iter_mut().find(|t| t.0 == idx) {
            t.1 += c;
        } else {
            self.terms[self.len] = (idx, c);
            self.len += 1;
        }
    }

    #[inline]
    fn eval(&self, w: &[f64]) -> f64 {
        self.terms[..self.len].iter().map(|&(k, c)| c * w[k]).sum()
    }
}

/// Averages nu over the (existing) cells around corner (i, j).
fn corner_average(g: &GridSpec, nu: &[f64], i: isize, j: isize) -> f64 {
    let mut s = 0.0;
    let mut cnt = 0.0;
    for (a, b) in [(i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)] {
        let inside = (0..g.nx as isize).contains(&a) && (0..g.ny as isize).contains(&b);
        if inside || g.periodic() {
            s += nu[g.cell_slot(a, b).idx];
            cnt += 1.0;
        }
    }
    s / cnt
}

/// Visits the functionals of the quadratic form
/// `a_nu(u, u) = area * (sum_cells nu (D11^2 + D22^2) + sum_corners 2 w nu D12^2)`.
/// Passing `nu = None` yields the plain gradient form
/// `sum_cells (u_x^2 + v_y^2) + sum_corners w (u_y^2 + v_x^2)`.
fn strain_functionals(g: &GridSpec, nu: Option<&[f64]>, mut visit: impl FnMut(&Functional)) {
    let (hx, hy) = (g.hx(), g.hy());
    let n = g.ncell();
    let (nx, ny) = (g.nx as isize, g.ny as isize);
    for j in 0..ny {
        for i in 0..nx {
            let c = nu.map_or(1.0, |nu| nu[g.idx(i as usize, j as usize)]);
            let mut d11 = Functional::new(c);
            d11.push(g.u_slot(i + 1, j), 0, 1.0 / hx);
            d11.push(g.u_slot(i, j), 0, -1.0 / hx);
            visit(&d11);
            let mut d22 = Functional::new(c);
            d22.push(g.v_slot(i, j + 1), n, 1.0 / hy);
            d22.push(g.v_slot(i, j), n, -1.0 / hy);
            visit(&d22);
        }
    }
    let (ci, cj) = if g.periodic() { (nx - 1, ny - 1) } else { (nx, ny) };
    for j in 0..=cj {
        for i in 0..=ci {
            let mut w = 1.0;
            if !g.periodic() {
                if i == 0 || i == nx {
                    w *= 0.5;
                }
                if j == 0 || j == ny {
                    w *= 0.5;
                }
            }
            match nu {
                Some(nu) => {
                    let c = 2.0 * w * corner_average(g, nu, i, j);
                    let mut d12 = Functional::new(c);
                    d12.push(g.u_slot(i, j), 0, 0.5 / hy);
                    d12.push(g.u_slot(i, j - 1), 0, -0.5 / hy);
                    d12.push(g.v_slot(i, j), n, 0.5 / hx);
                    d12.push(g.v_slot(i - 1, j), n, -0.5 / hx);
                    visit(&d12);
                }
                None => {
                    let mut uy = Functional::new(w);
                    uy.push(g.u_slot(i, j), 0, 1.0 / hy);
                    uy.push(g.u_slot(i, j - 1), 0, -1.0 / hy);
                    visit(&uy);
                    let mut vx = Functional::new(w);
                    vx.push(g.v_slot(i, j), n, 1.0 / hx);
                    vx.push(g.v_slot(i - 1, j), n, -1.0 / hx);
                    visit(&vx);
                }
            }
        }
    }
}

/// The assembled viscous operator `w -> div(nu D w)` for a frozen cell
/// viscosity, stored as its list of strain functionals.
#[derive(Clone)]
pub struct ViscousOperator {
    grid: GridSpec,
    rows: Vec<Functional>,
}

impl ViscousOperator {
    pub fn new(g: &GridSpec, nu: &[f64]) -> Self {
        let mut rows = Vec::with_capacity(3 * g.ncell() + g.nx + g.ny + 1);
        strain_functionals(g, Some(nu), |f| rows.push(f.clone()));
        ViscousOperator { grid: *g, rows }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `out = div(nu D w)` on the stacked `[u; v]` vector.
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for f in &self.rows {
            let val = f.weight * f.eval(w);
            for &(k, c) in &f.terms[..f.len] {
                out[k] -= c * val;
            }
        }
    }

    /// `a_nu(a, b) = -<div(nu D a), b>`.
    pub fn form(&self, a: &[f64], b: &[f64]) -> f64 {
        self.rows.iter().map(|f| f.weight * f.eval(a) * f.eval(b)).sum::<f64>() * self.grid.area()
    }

    /// Diagonal of `-div(nu D .)`.
    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; 2 * self.grid.ncell()];
        for f in &self.rows {
            for &(k, c) in &f.terms[..f.len] {
                d[k] += f.weight * c * c;
            }
        }
        d
    }
}

/// `div(nu D(u))` on faces for a cell-centred viscosity `nu`.
pub fn viscous_apply(u: &VelocityField, nu: &[f64]) -> VelocityField {
    let mut out = VelocityField::zeros(u.grid);
    ViscousOperator::new(&u.grid, nu).apply(&u.data, &mut out.data);
    out
}

/// Viscous dissipation form `a_nu(u, w) = -<div(nu D u), w>`.
pub fn viscous_form(u: &VelocityField, w: &VelocityField, nu: &[f64]) -> f64 {
    ViscousOperator::new(&u.grid, nu).form(&u.data, &w.data)
}

/// Diagonal of `-div(nu D .)`.
pub fn viscous_diag(g: &GridSpec, nu: &[f64]) -> Vec<f64> {
    ViscousOperator::new(g, nu).diag()
}

/// Discrete `||grad u||^2` built from the same face differences as the
/// viscous operator.
pub fn velocity_grad_norm_sq(u: &VelocityField) -> f64 {
    let mut s = 0.0;
    strain_functionals(&u.grid, None, |f| {
        let x = f.eval(&u.data);
        s += f.weight * x * x;
    });
    s * u.grid.area()
}

/// Advective derivative `(u . grad) Q` at cell centres, built from face
/// fluxes: `(1 / 2A) sum_f Phi_f (Q_nb - Q)`. Wall fluxes vanish, so ghost
/// values never enter in Dirichlet mode.
pub fn convect_q(u: &VelocityField, q: &QField) -> Result<QField> {
    u.grid.check_same(&q.grid)?;
    let g = &q.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let inv = 0.5 / g.area();
    let mut out = QField::zeros(*g, q.dim);
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let k = g.idx(i as usize, j as usize);
            let fluxes = [
                (g.u_val(u.u(), i + 1, j) * hy, i + 1, j),
                (-g.u_val(u.u(), i, j) * hy, i - 1, j),
                (g.v_val(u.v(), i, j + 1) * hx, i, j + 1),
                (-g.v_val(u.v(), i, j) * hx, i, j - 1),
            ];
            for (src, dst) in q.comps.iter().zip(out.comps.iter_mut()) {
                let c = src[k];
                let mut s = 0.0;
                for &(phi, a, b) in &fluxes {
                    if phi != 0.0 {
                        s += phi * (g.cell_val(src, a, b) - c);
                    }
                }
                dst[k] = s * inv;
            }
        }
    }
    Ok(out)
}

/// Face force `-(grad Q)^T : H`, averaged across each face. The exact
/// negative adjoint of [`convect_q`] in its velocity argument, so the
/// advective transfer of free energy to kinetic energy cancels identically.
pub fn elastic_force(q: &QField, h: &QField) -> Result<VelocityField> {
    q.grid.check_same(&h.grid)?;
    let g = &q.grid;
    let n = g.ncell();
    let (hx, hy) = (g.hx(), g.hy());
    let dim = q.dim;
    let mut out = VelocityField::zeros(*g);
    let mut dq = [0.0; 5];
    let mut hs = [0.0; 5];
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let k = g.idx(i as usize, j as usize);
            for (face, (a, b), h_len, off) in [(g.u_slot(i, j), (i - 1, j), hx, 0), (g.v_slot(i, j), (i, j - 1), hy, n)] {
                if face.is_none() {
                    continue;
                }
                let kn = g.cell_slot(a, b).idx;
                for m in 0..dim.ncomp() {
                    dq[m] = q.comps[m][k] - q.comps[m][kn];
                    hs[m] = h.comps[m][k] + h.comps[m][kn];
                }
                out.data[off + k] = -dim.frob(&hs, &dq) / (2.0 * h_len);
            }
        }
    }
    Ok(out)
}

/// Skew-symmetric advection `(u . grad) u` on the MAC dual cells:
/// `(1 / 2A) sum_f Phi_f w_nb`. Satisfies `<C(u) w, w> = 0` exactly.
pub fn convect_u(u: &VelocityField) -> VelocityField {
    let g = &u.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let n = g.ncell();
    let inv = 0.5 / g.area();
    let (uu, vv) = (u.u(), u.v());
    let uv = |i: isize, j: isize| g.u_val(uu, i, j);
    let vv_ = |i: isize, j: isize| g.v_val(vv, i, j);
    let mut out = VelocityField::zeros(*g);
    for j in 0..g.ny as isize {
        for i in 0..g.nx as isize {
            let k = g.idx(i as usize, j as usize);
            if g.u_slot(i, j).is_some() {
                let s = 0.5 * (uv(i, j) + uv(i + 1, j)) * hy * uv(i + 1, j)
                    - 0.5 * (uv(i - 1, j) + uv(i, j)) * hy * uv(i - 1, j)
                    + 0.5 * (vv_(i - 1, j + 1) + vv_(i, j + 1)) * hx * uv(i, j + 1)
                    - 0.5 * (vv_(i - 1, j) + vv_(i, j)) * hx * uv(i, j - 1);
                out.data[k] = s * inv;
            }
            if g.v_slot(i, j).is_some() {
                let s = 0.5 * (vv_(i, j) + vv_(i, j + 1)) * hx * vv_(i, j + 1)
                    - 0.5 * (vv_(i, j - 1) + vv_(i, j)) * hx * vv_(i, j - 1)
                    + 0.5 * (uv(i + 1, j - 1) + uv(i + 1, j)) * hy * vv_(i + 1, j)
                    - 0.5 * (uv(i, j - 1) + uv(i, j)) * hy * vv_(i - 1, j);
                out.data[n + k] = s * inv;
            }
        }
    }
    out
}

/// Ericksen stress `tau = -lambda grad Q (.) grad Q` from cell-centred
/// gradients; symmetric by construction.
pub fn ericksen_tau(q: &QField, lambda: f64) -> MatrixField {
    let g = &q.grid;
    let grads: Vec<(Vec<f64>, Vec<f64>)> = q.comps.iter().map(|c| grad_cell(g, c)).collect();
    let mut out = MatrixField::zeros(*g, q.dim);
    let mut gx = [0.0; 5];
    let mut gy = [0.0; 5];
    for k in 0..g.ncell() {
        for (m, (a, b)) in grads.iter().enumerate() {
            gx[m] = a[k];
            gy[m] = b[k];
        }
        let xx = q.dim.frob(&gx, &gx);
        let xy = q.dim.frob(&gx, &gy);
        let yy = q.dim.frob(&gy, &gy);
        out.data[k] = Matrix::from_planar(q.dim, [[xx, xy], [xy, yy]]).scale(-lambda);
    }
    out
}

/// Molecular field `H = lambda lap(Q) + L(Q)` at every cell, given lap(Q).
pub fn molecular_field_q(q: &QField, lap_q: &QField, p: &MaterialParams) -> QField {
    q.zip_map(lap_q, |a, l| tensor::molecular_field(a, l, p))
}

/// `sigma(Q1, Q2)` per cell, given lap(Q2).
pub fn sigma_field(q1: &QField, lap_q2: &QField) -> MatrixField {
    let mut out = MatrixField::zeros(q1.grid, q1.dim);
    for k in 0..q1.grid.ncell() {
        out.data[k] = tensor::sigma_stress(&q1.get(k), &lap_q2.get(k));
    }
    out
}

/// `S(grad u, Q)` per cell.
pub fn corotation_field(grad_u: &MatrixField, q: &QField) -> QField {
    let mut out = QField::zeros(q.grid, q.dim);
    for k in 0..q.grid.ncell() {
        out.set(k, &tensor::corotation(&grad_u.data[k], &q.get(k)));
    }
    out
}

/// Cell viscosity `nu(Q)`.
pub fn viscosity_field(q: &QField, spec: &ViscositySpec) -> ScalarField {
    ScalarField { grid: q.grid, data: (0..q.grid.ncell()).map(|k| spec.eval(&q.get(k))).collect() }
}

/// Applies `f` to every cell tensor, e.g. the lower-order term `L(Q)`.
pub fn pointwise(q: &QField, f: impl Fn(&QTensor) -> QTensor) -> QField {
    q.map(f)
}
