//! Time integration by frozen-coefficient linearization and Picard iteration.
//!
//! One step from `(u^n, Q^n)` freezes `Q~ = Q^n` and iterates
//! `z^{k+1} = L(Q~)^{-1} N(Q~) z^k` from `z^0 = (u^n, Q^n)`, where the linear
//! operator is backward Euler for
//!
//! ```text
//! u_t = P div(nu(Q~) D u) + P div(lambda sigma(Q~, Q)) + F
//! Q_t = gamma lambda lap Q - eps lap^2 Q + S(grad u, Q~) + G
//! ```
//!
//! with `eps = 0` in standard mode, and `N(Q~)` collects everything else:
//!
//! ```text
//! F = P [div((nu(Q) - nu(Q~)) D u) + E(Q) + div(lambda sigma(Q - Q~, Q)) - (u.grad) u]
//! G = -(u.grad) Q + S(grad u, Q - Q~) + gamma L(Q)
//! ```
//!
//! `E(Q)` is the elastic body force. In [`ElasticForm::Force`] it is
//! `-(grad Q)^T : H(Q)`, which differs from `div tau(Q)` by a gradient that
//! the projection removes and is the exact discrete adjoint of the Q
//! transport term; [`ElasticForm::Stress`] uses `div tau(Q)` directly.
//! Inside a step the two cross couplings are lagged: the momentum solve sees
//! `sigma(Q~, Q^k)` and the Q solve sees `S(grad u^{k+1}, Q~)`.

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyLedger, LedgerRecord};
use crate::error::{Error, Result};
use crate::grid::ops::{self, ViscousOperator};
use crate::grid::{GridSpec, QField, ScalarField, VelocityField};
use crate::solver::{self, SolverConfig};
use crate::tensor::{Dim, MaterialParams, ViscositySpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Standard,
    /// Adds `eps lap^2 Q` with the wall closure `lap Q = 0`.
    Regularized,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticForm {
    #[default]
    Force,
    Stress,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeConfig {
    pub dt: f64,
    pub epsilon: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub mode: Mode,
    pub elastic_form: ElasticForm,
    /// dt halvings allowed per step after a rejected Picard solve.
    pub max_halvings: usize,
    pub solver: SolverConfig,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            dt: 1e-3,
            epsilon: 0.0,
            picard_tol: 1e-10,
            picard_max: 50,
            mode: Mode::Standard,
            elastic_form: ElasticForm::Force,
            max_halvings: 5,
            solver: SolverConfig::default(),
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        match self.mode {
            Mode::Regularized if self.epsilon == 0.0 => {
                return Err(Error::invalid("regularized mode needs epsilon > 0"));
            }
            Mode::Standard if self.epsilon != 0.0 => {
                return Err(Error::invalid("standard mode needs epsilon = 0; use mode = \"regularized\""));
            }
            _ => {}
        }
        if !(self.picard_tol > 0.0 && self.picard_tol < 1.0) {
            return Err(Error::invalid(format!("picard_tol must lie in (0, 1), got {}", self.picard_tol)));
        }
        if self.picard_max == 0 {
            return Err(Error::invalid("picard_max must be at least 1"));
        }
        self.solver.validate()
    }

    /// Tolerance of the inner linear solves: tight enough that their error
    /// stays below the Picard tolerance.
    pub fn inner_solver(&self) -> SolverConfig {
        self.solver.with_tol(self.solver.tol.min(1e-2 * self.picard_tol))
    }

    fn epsilon_eff(&self) -> f64 {
        match self.mode {
            Mode::Standard => 0.0,
            Mode::Regularized => self.epsilon,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: VelocityField,
    pub q: QField,
}

impl State {
    pub fn new(t: f64, u: VelocityField, q: QField) -> Result<Self> {
        u.grid.check_same(&q.grid)?;
        Ok(State { t, u, q })
    }

    pub fn zero(grid: GridSpec, dim: Dim) -> Self {
        State { t: 0.0, u: VelocityField::zeros(grid), q: QField::zeros(grid, dim) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.q.grid
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.u.is_finite() && self.q.is_finite()
    }
}

/// Nonlinear right-hand side `N(Q~)(u, Q) = (F, G)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rhs {
    pub f: VelocityField,
    pub g: QField,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PicardReport {
    /// `|z^{k+1} - z^k|` in the discrete `H^1 x H^2` norm, per iteration.
    pub residuals: Vec<f64>,
    /// Geometric mean of successive residual ratios (0 with fewer than two
    /// nonzero residuals).
    pub rho: f64,
    pub converged: bool,
    pub dt: f64,
    /// Total inner linear-solver iterations.
    pub linear_iterations: usize,
    /// Max cell divergence of the accepted velocity.
    pub divergence: f64,
    /// Largest wall value of `lap Q` (regularized mode only).
    pub boundary_lap: Option<f64>,
}

impl PicardReport {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }
}

/// Geometric mean of the ratios of successive positive residuals.
pub fn contraction_estimate(residuals: &[f64]) -> f64 {
    let pos: Vec<f64> = residuals.iter().copied().filter(|r| *r > 0.0).collect();
    if pos.len() < 2 {
        return 0.0;
    }
    let s: f64 = pos.windows(2).map(|w| (w[1] / w[0]).ln()).sum();
    (s / (pos.len() - 1) as f64).exp()
}

/// Discrete `H^1 x H^2` norm: `|u|^2 + |grad u|^2 + |Q|^2 + |grad Q|^2 + |lap Q|^2`.
pub fn state_norm(u: &VelocityField, q: &QField) -> f64 {
    let lap = ops::laplacian_q(q);
    (u.dot(u) + ops::velocity_grad_norm_sq(u) + q.dot(q) + ops::dirichlet_form_q(q, q) + lap.dot(&lap))
        .max(0.0)
        .sqrt()
}

fn unprojected_rhs(
    state: &State,
    q_tilde: &QField,
    nu_tilde: &ScalarField,
    p: &MaterialParams,
    spec: &ViscositySpec,
    form: ElasticForm,
) -> Result<Rhs> {
    let (u, q) = (&state.u, &state.q);
    u.grid.check_same(&q.grid)?;
    q.grid.check_same(&q_tilde.grid)?;
    if q.dim != q_tilde.dim {
        return Err(Error::invalid("Q and Q~ differ in tensor dimension"));
    }
    let lap_q = ops::laplacian_q(q);
    let dq = q.sub(q_tilde);

    let mut f = match form {
        ElasticForm::Force => ops::elastic_force(q, &ops::molecular_field_q(q, &lap_q, p))?,
        ElasticForm::Stress => ops::div_matrix(&ops::ericksen_tau(q, p.lambda)),
    };
    let mut sigma = ops::sigma_field(&dq, &lap_q);
    sigma.data.iter_mut().for_each(|m| *m = m.scale(p.lambda));
    f.axpy(1.0, &ops::div_matrix(&sigma));
    f.axpy(-1.0, &ops::convect_u(u));
    if !spec.is_constant() {
        let nu = ops::viscosity_field(q, spec);
        let dnu: Vec<f64> = nu.data.iter().zip(&nu_tilde.data).map(|(a, b)| a - b).collect();
        f.axpy(1.0, &ops::viscous_apply(u, &dnu));
    }
    f.enforce_walls();

    let grad_u = ops::velocity_gradient(u, q.dim);
    let mut g = ops::corotation_field(&grad_u, &dq);
    g.axpy(-1.0, &ops::convect_q(u, q)?);
    g.axpy(p.gamma, &q.map(|x| crate::tensor::lower_order(x, p)));
    Ok(Rhs { f, g })
}

/// Assembles `N(Q~)` at `state`, with F projected onto divergence-free fields.
pub fn nonlinear_rhs(
    state: &State,
    q_tilde: &QField,
    p: &MaterialParams,
    spec: &ViscositySpec,
    cfg: &SchemeConfig,
) -> Result<Rhs> {
    let nu_tilde = ops::viscosity_field(q_tilde, spec);
    let mut rhs = unprojected_rhs(state, q_tilde, &nu_tilde, p, spec, cfg.elastic_form)?;
    rhs.f = solver::project_relative(&rhs.f, &cfg.inner_solver(), None)?.field;
    Ok(rhs)
}

/// The linear operator `L(Q~)` of one step, with its frozen viscosity and
/// the warm starts carried between Picard iterations.
pub struct Linearization {
    q_tilde: QField,
    nu_tilde: ScalarField,
    viscous: ViscousOperator,
    p: MaterialParams,
    cfg: SchemeConfig,
    dt: f64,
    forcing_potential: Option<ScalarField>,
    pressure: Option<ScalarField>,
}

#[derive(Clone, Debug)]
pub struct LinearSolve {
    pub u: VelocityField,
    pub q: QField,
    pub linear_iterations: usize,
    pub divergence: f64,
    pub boundary_lap: Option<f64>,
}

impl Linearization {
    pub fn new(q_tilde: &QField, p: &MaterialParams, spec: &ViscositySpec, cfg: &SchemeConfig, dt: f64) -> Self {
        let nu_tilde = ops::viscosity_field(q_tilde, spec);
        let viscous = ViscousOperator::new(&q_tilde.grid, &nu_tilde.data);
        Linearization {
            q_tilde: q_tilde.clone(),
            nu_tilde,
            viscous,
            p: *p,
            cfg: *cfg,
            dt,
            forcing_potential: None,
            pressure: None,
        }
    }

    pub fn q_tilde(&self) -> &QField {
        &self.q_tilde
    }

    /// One backward-Euler solve of the linear system from `state_n` with
    /// right-hand side `rhs`; `q_lag` enters the lagged sigma coupling and
    /// `guess` seeds the iterative solvers.
    pub fn solve(&mut self, state_n: &State, rhs: &Rhs, q_lag: &QField, guess: Option<&State>) -> Result<LinearSolve> {
        let inner = self.cfg.inner_solver();
        let mut sigma = ops::sigma_field(&self.q_tilde, &ops::laplacian_q(q_lag));
        sigma.data.iter_mut().for_each(|m| *m = m.scale(self.p.lambda));
        let mut forcing = rhs.f.clone();
        forcing.axpy(1.0, &ops::div_matrix(&sigma));
        let proj = solver::project_relative(&forcing, &inner, self.forcing_potential.as_ref())?;
        let mut its = proj.stats.iterations;
        self.forcing_potential = Some(proj.potential);

        let mom = solver::momentum_solve_with(
            &self.viscous,
            &state_n.u,
            &proj.field,
            self.dt,
            &inner,
            guess.map(|s| &s.u),
            self.pressure.as_ref(),
        )?;
        its += mom.stats.iterations;
        self.pressure = Some(mom.pressure);

        let grad_u = ops::velocity_gradient(&mom.u, self.q_tilde.dim);
        let mut q_rhs = ops::corotation_field(&grad_u, &self.q_tilde);
        q_rhs.axpy(1.0, &rhs.g);
        let mut b = state_n.q.clone();
        b.axpy(self.dt, &q_rhs);
        let qs = solver::q_solve(
            &b,
            guess.map_or(&state_n.q, |s| &s.q),
            self.dt,
            self.cfg.epsilon_eff(),
            self.p.gamma * self.p.lambda,
            &inner,
        )?;
        its += qs.stats.iterations;
        Ok(LinearSolve {
            u: mom.u,
            q: qs.q,
            linear_iterations: its,
            divergence: mom.divergence,
            boundary_lap: qs.boundary_lap,
        })
    }

    /// `N(Q~)` evaluated at `state` without the outer projection (the linear
    /// solve projects the total forcing).
    pub fn nonlinear(&self, state: &State, spec: &ViscositySpec) -> Result<Rhs> {
        unprojected_rhs(state, &self.q_tilde, &self.nu_tilde, &self.p, spec, self.cfg.elastic_form)
    }
}

/// One linear solve `L(Q~)^{-1}` applied to `rhs`, starting from `state_n`.
pub fn linearized_solve(
    state_n: &State,
    q_tilde: &QField,
    rhs: &Rhs,
    q_lag: &QField,
    p: &MaterialParams,
    spec: &ViscositySpec,
    cfg: &SchemeConfig,
) -> Result<State> {
    cfg.validate()?;
    let mut lin = Linearization::new(q_tilde, p, spec, cfg, cfg.dt);
    let r = lin.solve(state_n, rhs, q_lag, None)?;
    Ok(State { t: state_n.t + cfg.dt, u: r.u, q: r.q })
}

/// Advances `state_n` by `cfg.dt` with the Picard iteration.
pub fn picard_step(
    state_n: &State,
    p: &MaterialParams,
    spec: &ViscositySpec,
    cfg: &SchemeConfig,
) -> Result<(State, PicardReport)> {
    cfg.validate()?;
    p.validate()?;
    spec.validate()?;
    let dt = cfg.dt;
    let mut lin = Linearization::new(&state_n.q, p, spec, cfg, dt);
    let mut z = state_n.clone();
    let mut report = PicardReport { dt, ..Default::default() };
    for _ in 0..cfg.picard_max {
        let rhs = lin.nonlinear(&z, spec)?;
        let guess = z.clone();
        let r = lin.solve(state_n, &rhs, &z.q, Some(&guess))?;
        let diff = state_norm(&r.u.sub(&z.u), &r.q.sub(&z.q));
        let scale = state_norm(&r.u, &r.q).max(1.0);
        report.residuals.push(diff);
        report.linear_iterations += r.linear_iterations;
        report.divergence = r.divergence;
        report.boundary_lap = r.boundary_lap;
        z = State { t: state_n.t + dt, u: r.u, q: r.q };
        if !diff.is_finite() || !z.is_finite() {
            break;
        }
        if diff <= cfg.picard_tol * scale {
            report.converged = true;
            break;
        }
        let n = report.residuals.len();
        if n >= 4 && report.residuals[n - 3..].windows(2).all(|w| w[1] > w[0]) && diff > report.residuals[0] {
            break;
        }
    }
    report.rho = contraction_estimate(&report.residuals);
    if !report.converged {
        return Err(Error::StepRejected {
            t: state_n.t,
            dt,
            iterations: report.iterations(),
            residual: report.residuals.last().copied().unwrap_or(f64::NAN),
        });
    }
    Ok((z, report))
}

/// Re-substitutes a step result into the fixed-point map: returns
/// `|T(z) - z| / max(1, |z|)` for `T = L(Q~)^{-1} N(Q~)`, `Q~ = Q^n`.
pub fn fixed_point_residual(
    state_n: &State,
    state_np1: &State,
    p: &MaterialParams,
    spec: &ViscositySpec,
    cfg: &SchemeConfig,
) -> Result<f64> {
    let dt = state_np1.t - state_n.t;
    let mut lin = Linearization::new(&state_n.q, p, spec, cfg, dt);
    let rhs = lin.nonlinear(state_np1, spec)?;
    let r = lin.solve(state_n, &rhs, &state_np1.q, Some(state_np1))?;
    let diff = state_norm(&r.u.sub(&state_np1.u), &r.q.sub(&state_np1.q));
    Ok(diff / state_norm(&state_np1.u, &state_np1.q).max(1.0))
}

/// What the time loop reports after each accepted step.
pub struct StepInfo<'a> {
    pub step: usize,
    pub state: &'a State,
    pub report: &'a PicardReport,
    pub energy: &'a LedgerRecord,
}

/// Advances to `t_end`, recording every accepted step in `ledger`.
pub fn advance(
    state: State,
    t_end: f64,
    p: &MaterialParams,
    spec: &ViscositySpec,
    cfg: &SchemeConfig,
    ledger: &mut EnergyLedger,
) -> Result<State> {
    advance_with(state, t_end, p, spec, cfg, ledger, |_| Ok(()))
}

/// [`advance`] with a callback per accepted step (run log, snapshots).
pub fn advance_with(
    mut state: State,
    t_end: f64,
    p: &MaterialParams,
    spec: &ViscositySpec,
    cfg: &SchemeConfig,
    ledger: &mut EnergyLedger,
    mut on_step: impl FnMut(&StepInfo) -> Result<()>,
) -> Result<State> {
    cfg.validate()?;
    if !(t_end >= state.t) {
        return Err(Error::invalid(format!("t_end = {t_end} precedes t = {}", state.t)));
    }
    if ledger.records().is_empty() {
        ledger.record(state.t, &state.u, &state.q, p, spec)?;
    }
    let eps_t = 1e-12 * t_end.abs().max(1.0);
    let mut step = 0;
    while t_end - state.t > eps_t {
        let remaining = t_end - state.t;
        let full = remaining <= cfg.dt * (1.0 + 1e-9);
        let mut dt = if full { remaining } else { cfg.dt };
        let mut halvings = 0;
        let (next, report) = loop {
            let step_cfg = SchemeConfig { dt, ..*cfg };
            match picard_step(&state, p, spec, &step_cfg) {
                Ok(r) => break r,
                Err(Error::StepRejected { .. }) if halvings < cfg.max_halvings => {
                    halvings += 1;
                    dt *= 0.5;
                }
                Err(Error::StepRejected { residual, iterations, .. }) => {
                    return Err(Error::RunFailure {
                        t: state.t,
                        reason: format!(
                            "Picard iteration rejected after {halvings} dt halvings \
                             (dt = {dt:e}, residual {residual:.3e} after {iterations} iterations)"
                        ),
                    })
                }
                Err(e) => return Err(e),
            }
        };
        let mut next = next;
        if full && halvings == 0 {
            next.t = t_end;
        }
        state = next;
        step += 1;
        let rec = ledger.record(state.t, &state.u, &state.q, p, spec)?;
        on_step(&StepInfo { step, state: &state, report: &report, energy: &rec })?;
    }
    Ok(state)
}

pub const LOG_HEADER: &str =
    "  step            t          dt  iters       rho        kinetic    free_energy          total              B";

/// Fixed-width run-log record.
pub fn format_log_line(info: &StepInfo) -> String {
    format!(
        "{:>6} {:>12.6e} {:>11.4e} {:>6} {:>9.3e} {:>14.7e} {:>14.7e} {:>14.7e} {:>14.7e}",
        info.step,
        info.state.t,
        info.report.dt,
        info.report.iterations(),
        info.report.rho,
        info.energy.kinetic,
        info.energy.free_energy,
        info.energy.total,
        info.energy.b
    )
}
