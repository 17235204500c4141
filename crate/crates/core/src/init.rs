//! Initial data: smooth, compactly supported profiles that vanish (with all
//! derivatives) on the walls, or fields reloaded from snapshots.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{read_snapshot, GridSpec, QField, VelocityField};
use crate::scheme::State;
use crate::tensor::{uniaxial, Dim, QTensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    /// `Q = s phi(r) (n n^T - I/d)` with the bump `phi = exp(1 - 1/(1 - (r/R)^2))`.
    UniaxialBubble {
        s: f64,
        center: [f64; 2],
        radius: f64,
        /// Unit director; a 2-vector is padded with a zero z-component.
        director: Vec<f64>,
        /// Rotates the director in-plane by `twist (x - cx) / R` radians.
        #[serde(default)]
        twist: f64,
        /// Amplitude of a swirling velocity `u = curl(vortex R phi^2)`.
        #[serde(default)]
        vortex: f64,
    },
    /// Snapshot files written by a previous run.
    File { q: PathBuf, u: Option<PathBuf> },
}

/// Smooth bump supported in `r < 1`, equal to one at the origin.
pub fn bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

impl InitialCondition {
    /// Twisted bubble with a vortex on the unit square, used as the smooth
    /// reference data of the test suites.
    pub fn standard_bubble() -> Self {
        InitialCondition::UniaxialBubble {
            s: 0.5,
            center: [0.5, 0.5],
            radius: 0.35,
            director: vec![1.0, 0.0],
            twist: 1.5,
            vortex: 0.5,
        }
    }

    pub fn build(&self, grid: &GridSpec, dim: Dim) -> Result<State> {
        grid.validate()?;
        match self {
            InitialCondition::Zero => Ok(State::zero(*grid, dim)),
            InitialCondition::UniaxialBubble { s, center, radius, director, twist, vortex } => {
                let (cx, cy, r0) = (center[0], center[1], *radius);
                if !(r0 > 0.0 && s.is_finite() && twist.is_finite() && vortex.is_finite()) {
                    return Err(Error::invalid("uniaxial_bubble needs radius > 0 and finite s, twist, vortex"));
                }
                if !(cx - r0 >= 0.0 && cx + r0 <= grid.lx && cy - r0 >= 0.0 && cy + r0 <= grid.ly) {
                    return Err(Error::invalid("uniaxial_bubble must lie inside the domain"));
                }
                if director.len() < 2 || director.len() > 3 {
                    return Err(Error::invalid("director must have 2 or 3 components"));
                }
                let mut n = [0.0; 3];
                n[..director.len()].copy_from_slice(director);
                if dim == Dim::Two && n[2] != 0.0 {
                    return Err(Error::invalid("director must lie in the plane for d = 2"));
                }
                // validates |n| = 1
                uniaxial(*s, &n[..dim.n()], dim)?;
                let q = QField::from_fn(*grid, dim, |x, y| {
                    let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / r0;
                    let phi = bump(r);
                    if phi == 0.0 {
                        return QTensor::zero(dim);
                    }
                    let th = twist * (x - cx) / r0;
                    let (st, ct) = th.sin_cos();
                    let m = [n[0] * ct - n[1] * st, n[0] * st + n[1] * ct, n[2]];
                    let len = m.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let m: Vec<f64> = m[..dim.n()].iter().map(|v| v / len).collect();
                    uniaxial(s * phi, &m, dim).expect("normalized director")
                });
                let u = if *vortex != 0.0 {
                    VelocityField::from_stream_function(*grid, |x, y| {
                        let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / r0;
                        vortex * r0 * bump(r).powi(2)
                    })
                } else {
                    VelocityField::zeros(*grid)
                };
                State::new(0.0, u, q)
            }
            InitialCondition::File { q, u } => {
                let qf = read_snapshot(q)?.into_q(*grid)?;
                if qf.dim != dim {
                    return Err(Error::invalid(format!("snapshot has d = {}, config has d = {}", qf.dim.n(), dim.n())));
                }
                let uf = match u {
                    Some(path) => read_snapshot(path)?.into_velocity(*grid)?,
                    None => VelocityField::zeros(*grid),
                };
                State::new(0.0, uf, qf)
            }
        }
    }
}
