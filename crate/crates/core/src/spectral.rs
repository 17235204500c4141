//! Separable eigenbases of the constant-coefficient cell-centred stencils,
//! used as exact inverses inside CG.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::grid::GridSpec;

/// Closure of the 1-D second-difference stencil at the ends of an axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Closure {
    /// Odd reflection about the wall.
    Dirichlet,
    /// Zero flux through the wall.
    Neumann,
    Periodic,
}

/// Orthonormal eigenvectors (rows of `phi`) of `-d^2/dx^2` on `n` cells with
/// the eigenvalues `mu`.
struct Axis {
    phi: DMatrix<f64>,
    mu: Vec<f64>,
}

impl Axis {
    fn new(n: usize, h: f64, closure: Closure) -> Self {
        let nf = n as f64;
        let mut phi = DMatrix::zeros(n, n);
        let mut mu = vec![0.0; n];
        let eig = |theta: f64| (2.0 - 2.0 * theta.cos()) / (h * h);
        match closure {
            Closure::Neumann => {
                for k in 0..n {
                    let a = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    for m in 0..n {
                        phi[(k, m)] = a * (PI * (m as f64 + 0.5) * k as f64 / nf).cos();
                    }
                    mu[k] = eig(PI * k as f64 / nf);
                }
            }
            Closure::Dirichlet => {
                for k in 0..n {
                    let a = if k + 1 == n { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    for m in 0..n {
                        phi[(k, m)] = a * (PI * (m as f64 + 0.5) * (k + 1) as f64 / nf).sin();
                    }
                    mu[k] = eig(PI * (k + 1) as f64 / nf);
                }
            }
            Closure::Periodic => {
                // rows 0..=n/2 hold cosines, the rest sines
                for k in 0..=n / 2 {
                    let a = if k == 0 || 2 * k == n { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    for m in 0..n {
                        phi[(k, m)] = a * (2.0 * PI * (k * m) as f64 / nf).cos();
                    }
                    mu[k] = eig(2.0 * PI * k as f64 / nf);
                }
                for (r, k) in (n / 2 + 1..n).zip(1..) {
                    for m in 0..n {
                        phi[(r, m)] = (2.0 / nf).sqrt() * (2.0 * PI * (k * m) as f64 / nf).sin();
                    }
                    mu[r] = eig(2.0 * PI * k as f64 / nf);
                }
            }
        }
        Axis { phi, mu }
    }
}

/// `f(mu_x + mu_y)^{-1}` applied in the tensor-product eigenbasis, where
/// `mu` are the eigenvalues of `-lap`. Modes with `f = 0` are dropped.
pub(crate) struct SpectralInverse {
    nx: usize,
    ny: usize,
    phi_x: DMatrix<f64>,
    phi_y: DMatrix<f64>,
    inv: DMatrix<f64>,
}

impl SpectralInverse {
    pub fn new(g: &GridSpec, closure: Closure, f: impl Fn(f64) -> f64) -> Self {
        let c = if g.periodic() { Closure::Periodic } else { closure };
        let ax = Axis::new(g.nx, g.hx(), c);
        let ay = Axis::new(g.ny, g.hy(), c);
        let inv = DMatrix::from_fn(g.nx, g.ny, |i, j| {
            let v = f(ax.mu[i] + ay.mu[j]);
            if v == 0.0 {
                0.0
            } else {
                1.0 / v
            }
        });
        SpectralInverse { nx: g.nx, ny: g.ny, phi_x: ax.phi, phi_y: ay.phi, inv }
    }

    /// `z = Phi^T diag(inv) Phi r` on row-major (`j * nx + i`) data.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let rm = DMatrix::from_column_slice(self.nx, self.ny, r);
        let t = &self.phi_x * rm * self.phi_y.transpose();
        let t = t.component_mul(&self.inv);
        let out = self.phi_x.transpose() * t * &self.phi_y;
        z.copy_from_slice(out.as_slice());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ops, Boundary};

    fn check_inverse(g: GridSpec, closure: Closure) {
        let n = g.ncell();
        let x: Vec<f64> = (0..n).map(|k| ((k * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let mut x = x;
        if closure != Closure::Dirichlet || g.periodic() {
            let m = x.iter().sum::<f64>() / n as f64;
            x.iter_mut().for_each(|v| *v -= m);
        }
        let mut b = vec![0.0; n];
        match closure {
            Closure::Dirichlet => ops::laplacian(&g, &x, &mut b),
            _ => ops::pressure_laplacian(&g, &x, &mut b),
        }
        b.iter_mut().for_each(|v| *v = -*v);
        let s = SpectralInverse::new(&g, closure, |mu| mu);
        let mut y = vec![0.0; n];
        s.apply(&b, &mut y);
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{closure:?} periodic={} err {err:e}", g.periodic());
    }

    #[test]
    fn inverts_the_stencils() {
        let g = GridSpec::new(7, 6, 1.3, 0.8, Boundary::Dirichlet0).unwrap();
        check_inverse(g, Closure::Dirichlet);
        check_inverse(g, Closure::Neumann);
        for (nx, ny) in [(8, 6), (7, 5)] {
            let g = GridSpec::new(nx, ny, 1.0, 2.0, Boundary::Periodic).unwrap();
            check_inverse(g, Closure::Neumann);
            check_inverse(g, Closure::Dirichlet);
        }
    }
}
