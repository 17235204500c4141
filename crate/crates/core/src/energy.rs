//! Discrete energies, the dissipation functional and the energy ledger.
//!
//! With `A` the cell area, the discrete quantities are
//!
//! ```text
//! kinetic  = 1/2 |u|^2                      (face quadrature)
//! F(Q)     = lambda/2 |grad_h Q|^2 + sum f_B(Q) A
//! B        = a_nu(u, u) + gamma |H(Q)|^2
//! ```
//!
//! where `a_nu(u, u)` is the viscous form `sum nu |D_h u|^2 A` of the momentum
//! operator (for constant `nu = 2` and no-slip walls its continuous
//! counterpart is `|grad u|^2`) and the mobility `gamma` weights the
//! rotational dissipation. These are the quantities for which the scheme
//! satisfies its discrete energy law.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ops;
use crate::grid::{QField, VelocityField};
use crate::tensor::{self, MaterialParams, ViscositySpec};

pub fn kinetic_energy(u: &VelocityField) -> f64 {
    0.5 * u.dot(u)
}

/// `lambda/2 |grad Q|^2 + sum f_B(Q)`, midpoint quadrature.
pub fn free_energy(q: &QField, p: &MaterialParams) -> f64 {
    let bulk: f64 = (0..q.grid.ncell()).map(|k| tensor::bulk_energy(&q.get(k), p)).sum();
    0.5 * p.lambda * ops::dirichlet_form_q(q, q) + bulk * q.grid.area()
}

/// `H(Q) = lambda lap Q + L(Q)` on the grid.
pub fn molecular_field(q: &QField, p: &MaterialParams) -> QField {
    ops::molecular_field_q(q, &ops::laplacian_q(q), p)
}

/// Dissipation `a_nu(u, u) + gamma |H(Q)|^2` with `nu = nu(Q)`.
pub fn dissipation_b(u: &VelocityField, q: &QField, p: &MaterialParams, spec: &ViscositySpec) -> Result<f64> {
    u.grid.check_same(&q.grid)?;
    let nu = ops::viscosity_field(q, spec);
    let h = molecular_field(q, p);
    Ok(ops::viscous_form(u, u, &nu.data) + p.gamma * h.dot(&h))
}

/// `-C |Omega|`, the analytic lower bound of the free energy.
pub fn free_energy_lower_bound(q: &QField, p: &MaterialParams) -> f64 {
    tensor::bulk_energy_lower_bound(p) * q.grid.lx * q.grid.ly
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LedgerRecord {
    pub t: f64,
    pub kinetic: f64,
    pub free_energy: f64,
    pub total: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "cumB")]
    pub cum_b: f64,
    /// `E(t) + int_0^t B - E(0)`.
    pub residual: f64,
}

/// Append-only energy time series of one run.
#[derive(Clone, Debug, Default)]
pub struct EnergyLedger {
    records: Vec<LedgerRecord>,
    constant_viscosity: bool,
}

impl EnergyLedger {
    pub fn new(spec: &ViscositySpec) -> Self {
        EnergyLedger { records: Vec::new(), constant_viscosity: spec.is_constant() }
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&LedgerRecord> {
        self.records.last()
    }

    pub fn constant_viscosity(&self) -> bool {
        self.constant_viscosity
    }

    /// Appends the energies of `(u, q)` at time `t`; `cumB` accumulates by
    /// the trapezoid rule.
    pub fn record(
        &mut self,
        t: f64,
        u: &VelocityField,
        q: &QField,
        p: &MaterialParams,
        spec: &ViscositySpec,
    ) -> Result<LedgerRecord> {
        let kinetic = kinetic_energy(u);
        let free = free_energy(q, p);
        let b = dissipation_b(u, q, p, spec)?;
        let total = kinetic + free;
        let (cum_b, e0) = match self.records.last() {
            Some(prev) => {
                if !(t > prev.t) {
                    return Err(Error::invalid(format!("ledger times must increase: {t} after {}", prev.t)));
                }
                (prev.cum_b + 0.5 * (t - prev.t) * (prev.b + b), self.records[0].total)
            }
            None => (0.0, total),
        };
        let rec = LedgerRecord { t, kinetic, free_energy: free, total, b, cum_b, residual: total + cum_b - e0 };
        if ![rec.kinetic, rec.free_energy, rec.b, rec.cum_b].iter().all(|x| x.is_finite()) {
            return Err(Error::RunFailure { t, reason: "non-finite energy".into() });
        }
        self.records.push(rec);
        Ok(rec)
    }

    /// `E(T) + sum_n dt_n B(t_n+1) - E(0)`: the residual with the
    /// right-endpoint sum matching the implicit step.
    pub fn implicit_residual(&self) -> f64 {
        let Some(first) = self.records.first() else { return 0.0 };
        let mut s = 0.0;
        for w in self.records.windows(2) {
            s += (w[1].t - w[0].t) * w[1].b;
        }
        self.records.last().unwrap().total + s - first.total
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    /// Largest `|E(t) + int B - E(0)|` over the run.
    pub max_residual: f64,
    /// `tol_audit (1 + E(0))`.
    pub threshold: f64,
    /// Largest per-step increase `E^{n+1} - E^n` divided by the step size.
    pub max_increase_rate: f64,
    pub monotone: bool,
    pub pass: bool,
    /// Variable-viscosity runs are reported without a pass gate.
    pub informational: bool,
}

/// Checks the discrete dissipation law on a ledger: the residual stays within
/// `tol_audit (1 + E(0))` and `E^{n+1} <= E^n + tol_audit dt` at every step.
pub fn dissipation_audit(ledger: &EnergyLedger, tol_audit: f64) -> AuditReport {
    let recs = ledger.records();
    let e0 = recs.first().map_or(0.0, |r| r.total);
    let max_residual = recs.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    let threshold = tol_audit * (1.0 + e0.abs());
    let mut max_increase_rate = f64::NEG_INFINITY;
    for w in recs.windows(2) {
        max_increase_rate = max_increase_rate.max((w[1].total - w[0].total) / (w[1].t - w[0].t));
    }
    if recs.len() < 2 {
        max_increase_rate = 0.0;
    }
    let monotone = max_increase_rate <= tol_audit;
    let informational = !ledger.constant_viscosity();
    AuditReport {
        max_residual,
        threshold,
        max_increase_rate,
        monotone,
        pass: max_residual <= threshold && monotone,
        informational,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DiagnosticNorms {
    pub u_l2: f64,
    pub grad_u: f64,
    pub u_h1: f64,
    pub q_l2: f64,
    pub grad_q: f64,
    pub lap_q: f64,
    pub q_h2: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

/// Discrete `H^1` norm of u, `H^2` proxies of Q and the dissipation.
pub fn diagnostic_norms(
    u: &VelocityField,
    q: &QField,
    p: &MaterialParams,
    spec: &ViscositySpec,
) -> Result<DiagnosticNorms> {
    let u_l2 = u.norm();
    let grad_u = ops::velocity_grad_norm_sq(u).sqrt();
    let q_l2 = q.norm();
    let grad_q = ops::dirichlet_form_q(q, q).max(0.0).sqrt();
    let lap_q = ops::laplacian_q(q).norm();
    Ok(DiagnosticNorms {
        u_l2,
        grad_u,
        u_h1: (u_l2 * u_l2 + grad_u * grad_u).sqrt(),
        q_l2,
        grad_q,
        lap_q,
        q_h2: (q_l2 * q_l2 + grad_q * grad_q + lap_q * lap_q).sqrt(),
        b: dissipation_b(u, q, p, spec)?,
    })
}
