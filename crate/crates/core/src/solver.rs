//! Linear solvers: preconditioned conjugate gradients, the scalar Poisson
//! problem, the discrete Helmholtz projection and the implicit momentum and
//! Q-tensor solves used by the time integrator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ops::{self, ViscousOperator};
use crate::grid::{self, GridSpec, QField, ScalarField, VelocityField};
use crate::spectral::{Closure, SpectralInverse};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    Jacobi,
    /// Exact inverse of the constant-coefficient stencil in its separable
    /// eigenbasis for the Poisson, projection and Q solves; Jacobi for the
    /// momentum solve.
    #[default]
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Relative residual tolerance in the max norm.
    pub tol: f64,
    /// Iteration cap; `None` means `10 * (nx + ny)`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-10, max_iter: None, preconditioner: Preconditioner::Spectral }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid(format!("solver tol must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter == Some(0) {
            return Err(Error::invalid("solver max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn max_iter_for(&self, g: &GridSpec) -> usize {
        self.max_iter.unwrap_or(10 * (g.nx + g.ny))
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Max-norm residual at entry, relative to the right-hand side.
    pub initial_residual: f64,
    /// Max-norm true residual on exit, relative to the right-hand side.
    pub residual: f64,
}

impl SolveStats {
    fn merge(&mut self, other: SolveStats) {
        self.iterations += other.iterations;
        self.initial_residual = self.initial_residual.max(other.initial_residual);
        self.residual = self.residual.max(other.residual);
    }
}

pub(crate) struct CgOptions<'a> {
    pub name: &'static str,
    pub tol: f64,
    pub max_iter: usize,
    pub precond: Precond<'a>,
    /// Solve on the mean-zero subspace (pure Neumann or periodic problems).
    pub zero_mean: bool,
    /// Replaces `|b|_inf` as the reference for the stopping rule.
    pub scale: Option<f64>,
}

fn choose<'a>(cfg: &SolverConfig, diag: &'a [f64], spectral: Option<&'a SpectralInverse>) -> Precond<'a> {
    match (cfg.preconditioner, spectral) {
        (Preconditioner::None, _) => Precond::None,
        (Preconditioner::Spectral, Some(s)) => Precond::Spectral(s),
        _ => Precond::Diag(diag),
    }
}

fn spectral_for(cfg: &SolverConfig, g: &GridSpec, closure: Closure, f: impl Fn(f64) -> f64) -> Option<SpectralInverse> {
    (cfg.preconditioner == Preconditioner::Spectral).then(|| SpectralInverse::new(g, closure, f))
}

pub(crate) enum Precond<'a> {
    None,
    Diag(&'a [f64]),
    Spectral(&'a SpectralInverse),
}

fn remove_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// Preconditioned CG for a symmetric positive (semi)definite `apply`.
/// Stops when `|r|_inf <= tol * |b|_inf`, confirmed on the true residual.
pub(crate) fn cg(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    opt: &CgOptions,
) -> Result<SolveStats> {
    let n = b.len();
    let bn = grid::max_abs(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    // the floor sits just above the round-off level of the recomputed residual
    let threshold = (opt.tol * opt.scale.unwrap_or(bn).min(bn)).max(64.0 * f64::EPSILON * bn);
    let precond = |r: &[f64], z: &mut [f64]| {
        match opt.precond {
            Precond::Diag(d) => z.iter_mut().zip(r).zip(d).for_each(|((z, r), d)| *z = r / d),
            Precond::Spectral(s) => s.apply(r, z),
            Precond::None => z.copy_from_slice(r),
        }
        if opt.zero_mean {
            remove_mean(z);
        }
    };
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let true_residual = |apply: &mut dyn FnMut(&[f64], &mut [f64]), x: &[f64], r: &mut [f64], ap: &mut [f64]| {
        apply(x, ap);
        r.iter_mut().zip(b).zip(ap.iter()).for_each(|((r, b), a)| *r = b - a);
        if opt.zero_mean {
            remove_mean(r);
        }
    };
    true_residual(&mut apply, x, &mut r, &mut ap);
    let initial = grid::max_abs(&r);
    let mut iterations = 0;
    let mut stall = 0;
    loop {
        let rn = grid::max_abs(&r);
        if rn <= threshold {
            if opt.zero_mean {
                remove_mean(x);
            }
            return Ok(SolveStats { iterations, initial_residual: initial / bn, residual: rn / bn });
        }
        if iterations >= opt.max_iter || stall > 2 {
            return Err(Error::SolverFailure { solver: opt.name, iterations, residual: rn / bn });
        }
        let before = iterations;
        precond(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = grid::dot(&r, &z);
        while iterations < opt.max_iter {
            apply(&p, &mut ap);
            let pap = grid::dot(&p, &ap);
            if !(pap > 0.0) || !(rz > 0.0) {
                break;
            }
            let alpha = rz / pap;
            grid::axpy(x, alpha, &p);
            grid::axpy(&mut r, -alpha, &ap);
            if opt.zero_mean {
                remove_mean(&mut r);
            }
            iterations += 1;
            if grid::max_abs(&r) <= threshold {
                break;
            }
            precond(&r, &mut z);
            let rz_new = grid::dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        }
        if iterations == before {
            stall += 1;
        }
        true_residual(&mut apply, x, &mut r, &mut ap);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonBc {
    /// Zero value on the walls (odd-reflection ghosts).
    Dirichlet,
    /// Zero normal derivative on the walls; solution has zero mean.
    Neumann,
}

/// Solves `lap p = rhs`. On periodic grids both variants reduce to the
/// periodic problem, which is treated like the Neumann one.
pub fn solve_poisson(rhs: &ScalarField, bc: PoissonBc, cfg: &SolverConfig) -> Result<(ScalarField, SolveStats)> {
    solve_poisson_from(rhs, bc, cfg, None)
}

pub fn solve_poisson_from(
    rhs: &ScalarField,
    bc: PoissonBc,
    cfg: &SolverConfig,
    guess: Option<&ScalarField>,
) -> Result<(ScalarField, SolveStats)> {
    cfg.validate()?;
    let g = rhs.grid;
    let singular = bc == PoissonBc::Neumann || g.periodic();
    if singular {
        let mean = rhs.mean();
        if mean.abs() > cfg.tol * rhs.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::invalid(format!("Neumann Poisson right-hand side has nonzero mean {mean:e}")));
        }
    }
    let mut b: Vec<f64> = rhs.data.iter().map(|x| -x).collect();
    if singular {
        remove_mean(&mut b);
    }
    let mut x = match guess {
        Some(p) => {
            g.check_same(&p.grid)?;
            p.data.clone()
        }
        None => vec![0.0; g.ncell()],
    };
    let diag: Vec<f64> = match bc {
        PoissonBc::Neumann => ops::pressure_laplacian_diag(&g),
        PoissonBc::Dirichlet => ops::laplacian_diag(&g),
    }
    .iter()
    .map(|d| -d)
    .collect();
    let closure = if bc == PoissonBc::Neumann { Closure::Neumann } else { Closure::Dirichlet };
    let spectral = spectral_for(cfg, &g, closure, |mu| mu);
    let opt = CgOptions {
        name: "poisson",
        tol: cfg.tol,
        max_iter: cfg.max_iter_for(&g),
        precond: choose(cfg, &diag, spectral.as_ref()),
        zero_mean: singular,
        scale: None,
    };
    let stats = match bc {
        PoissonBc::Neumann => cg(
            |v, out| {
                ops::pressure_laplacian(&g, v, out);
                out.iter_mut().for_each(|o| *o = -*o);
            },
            &b,
            &mut x,
            &opt,
        )?,
        PoissonBc::Dirichlet => cg(
            |v, out| {
                ops::laplacian(&g, v, out);
                out.iter_mut().for_each(|o| *o = -*o);
            },
            &b,
            &mut x,
            &opt,
        )?,
    };
    Ok((ScalarField { grid: g, data: x }, stats))
}

#[derive(Clone, Debug)]
pub struct ProjectionResult {
    /// Solenoidal part `P v`.
    pub field: VelocityField,
    /// Potential `q` with `v = P v + grad q`.
    pub potential: ScalarField,
    /// Max cell divergence of `P v`.
    pub residual: f64,
    pub stats: SolveStats,
}

/// Discrete Helmholtz projection `v = P v + grad q`, `div P v = 0`.
pub fn helmholtz_project(v: &VelocityField, cfg: &SolverConfig) -> Result<ProjectionResult> {
    helmholtz_project_from(v, cfg, None)
}

/// As [`helmholtz_project`], warm-started from a previous potential.
///
/// The stopping rule is absolute once `|div v|_inf` exceeds one, so the
/// output divergence never exceeds `tol` in either regime.
pub fn helmholtz_project_from(
    v: &VelocityField,
    cfg: &SolverConfig,
    guess: Option<&ScalarField>,
) -> Result<ProjectionResult> {
    project(v, cfg, guess, Some(1.0))
}

/// Projection with a purely relative stopping rule, for forcing terms whose
/// divergence can be large.
pub(crate) fn project_relative(
    v: &VelocityField,
    cfg: &SolverConfig,
    guess: Option<&ScalarField>,
) -> Result<ProjectionResult> {
    project(v, cfg, guess, None)
}

fn project(v: &VelocityField, cfg: &SolverConfig, guess: Option<&ScalarField>, scale: Option<f64>) -> Result<ProjectionResult> {
    cfg.validate()?;
    let g = v.grid;
    let mut w = v.clone();
    w.enforce_walls();
    let mut b = ops::div_vec(&w).data;
    remove_mean(&mut b);
    b.iter_mut().for_each(|x| *x = -*x);
    let mut x = guess.map_or_else(|| vec![0.0; g.ncell()], |p| p.data.clone());
    let diag: Vec<f64> = ops::pressure_laplacian_diag(&g).iter().map(|d| -d).collect();
    let spectral = spectral_for(cfg, &g, Closure::Neumann, |mu| mu);
    let opt = CgOptions {
        name: "projection",
        tol: cfg.tol,
        max_iter: cfg.max_iter_for(&g),
        precond: choose(cfg, &diag, spectral.as_ref()),
        zero_mean: true,
        scale,
    };
    let stats = cg(
        |p, out| {
            ops::pressure_laplacian(&g, p, out);
            out.iter_mut().for_each(|o| *o = -*o);
        },
        &b,
        &mut x,
        &opt,
    )?;
    let potential = ScalarField { grid: g, data: x };
    w.axpy(-1.0, &ops::grad_faces(&potential));
    let residual = ops::div_vec(&w).max_abs();
    Ok(ProjectionResult { field: w, potential, residual, stats })
}

#[derive(Clone, Debug)]
pub struct MomentumResult {
    pub u: VelocityField,
    pub pressure: ScalarField,
    pub divergence: f64,
    pub stats: SolveStats,
}

/// Solves `(I - dt div(nu D .)) u* = u_prev + dt rhs` with no-slip walls,
/// then projects `u*` onto discretely divergence-free fields.
pub fn momentum_solve(
    u_prev: &VelocityField,
    nu: &ScalarField,
    rhs: &VelocityField,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<MomentumResult> {
    u_prev.grid.check_same(&nu.grid)?;
    u_prev.grid.check_same(&rhs.grid)?;
    if nu.data.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::invalid("viscosity must be positive everywhere"));
    }
    let op = ViscousOperator::new(&nu.grid, &nu.data);
    momentum_solve_with(&op, u_prev, rhs, dt, cfg, None, None)
}

pub(crate) fn momentum_solve_with(
    op: &ViscousOperator,
    u_prev: &VelocityField,
    rhs: &VelocityField,
    dt: f64,
    cfg: &SolverConfig,
    guess: Option<&VelocityField>,
    pressure_guess: Option<&ScalarField>,
) -> Result<MomentumResult> {
    cfg.validate()?;
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let g = *op.grid();
    let mut b = u_prev.data.clone();
    grid::axpy(&mut b, dt, &rhs.data);
    grid::enforce_walls(&g, &mut b);
    let diag: Vec<f64> = op.diag().iter().map(|d| 1.0 + dt * d).collect();
    let mut x = guess.map_or_else(|| u_prev.data.clone(), |u| u.data.clone());
    grid::enforce_walls(&g, &mut x);
    let opt = CgOptions {
        name: "momentum",
        tol: cfg.tol,
        max_iter: cfg.max_iter_for(&g),
        precond: choose(cfg, &diag, None),
        zero_mean: false,
        scale: None,
    };
    let mut stats = cg(
        |w, out| {
            op.apply(w, out);
            out.iter_mut().zip(w).for_each(|(o, w)| *o = w - dt * *o);
            grid::enforce_walls(&g, out);
        },
        &b,
        &mut x,
        &opt,
    )?;
    let proj = helmholtz_project_from(&VelocityField { grid: g, data: x }, cfg, pressure_guess)?;
    stats.merge(proj.stats);
    Ok(MomentumResult { u: proj.field, pressure: proj.potential, divergence: proj.residual, stats })
}

#[derive(Clone, Debug)]
pub struct QSolveResult {
    pub q: QField,
    pub stats: SolveStats,
    /// Largest wall value of `lap Q` consistent with the computed solution
    /// (regularized solves only).
    pub boundary_lap: Option<f64>,
}

/// Solves `(I + dt (eps lap^2 - kappa lap)) Q = rhs` component-wise, where
/// `lap^2` carries the `lap Q = 0` wall closure. SPD for `eps, kappa >= 0`.
pub fn q_solve(
    rhs: &QField,
    guess: &QField,
    dt: f64,
    eps: f64,
    kappa: f64,
    cfg: &SolverConfig,
) -> Result<QSolveResult> {
    cfg.validate()?;
    rhs.grid.check_same(&guess.grid)?;
    if !(dt > 0.0 && eps >= 0.0 && kappa >= 0.0) {
        return Err(Error::invalid("q_solve needs dt > 0, eps >= 0, kappa >= 0"));
    }
    let g = rhs.grid;
    let ld = ops::laplacian_diag(&g);
    let bd = ops::bilaplacian_diag(&g);
    let diag: Vec<f64> = ld.iter().zip(&bd).map(|(l, b)| 1.0 + dt * (eps * b - kappa * l)).collect();
    let apply = |w: &[f64], out: &mut [f64], tmp: &mut [f64], tmp2: &mut [f64]| {
        ops::laplacian(&g, w, tmp);
        if eps > 0.0 {
            ops::laplacian(&g, tmp, tmp2);
        }
        for k in 0..w.len() {
            let bi = if eps > 0.0 { eps * tmp2[k] } else { 0.0 };
            out[k] = w[k] + dt * (bi - kappa * tmp[k]);
        }
    };
    let spectral = spectral_for(cfg, &g, Closure::Dirichlet, |mu| 1.0 + dt * (eps * mu * mu + kappa * mu));
    let opt = CgOptions {
        name: "q-solve",
        tol: cfg.tol,
        max_iter: cfg.max_iter_for(&g),
        precond: choose(cfg, &diag, spectral.as_ref()),
        zero_mean: false,
        scale: None,
    };
    let results: Vec<Result<(Vec<f64>, SolveStats, f64)>> = rhs
        .comps
        .par_iter()
        .zip(guess.comps.par_iter())
        .map(|(b, x0)| {
            let n = b.len();
            let mut x = x0.clone();
            let (mut t1, mut t2) = (vec![0.0; n], vec![0.0; n]);
            let stats = cg(|w, out| apply(w, out, &mut t1, &mut t2), b, &mut x, &opt)?;
            let mut wall = 0.0;
            if eps > 0.0 && !g.periodic() {
                let mut ax = vec![0.0; n];
                apply(&x, &mut ax, &mut t1, &mut t2);
                wall = boundary_lap_from_residual(&g, b, &ax, dt * eps);
            }
            Ok((x, stats, wall))
        })
        .collect();
    let mut q = QField::zeros(g, rhs.dim);
    let mut stats = SolveStats::default();
    let mut wall = 0.0_f64;
    for (m, r) in results.into_iter().enumerate() {
        let (x, s, w) = r?;
        q.comps[m] = x;
        stats.merge(s);
        wall = wall.max(w);
    }
    Ok(QSolveResult { q, stats, boundary_lap: (eps > 0.0).then_some(wall) })
}

/// The computed solution solves the discrete problem exactly if the wall
/// value of `lap Q` is shifted from zero by `w`, which perturbs the
/// boundary-cell equation by `2 dt eps w / h^2` per adjacent wall. Inverting
/// that relation turns the solve residual into the wall value.
fn boundary_lap_from_residual(g: &GridSpec, b: &[f64], ax: &[f64], dt_eps: f64) -> f64 {
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let mut m = 0.0_f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let on_x = i == 0 || i + 1 == g.nx;
            let on_y = j == 0 || j + 1 == g.ny;
            if !(on_x || on_y) {
                continue;
            }
            let k = g.idx(i, j);
            let weight = 2.0 * dt_eps * (if on_x { ihx2 } else { 0.0 } + if on_y { ihy2 } else { 0.0 });
            m = m.max((b[k] - ax[k]).abs() / weight);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::tensor::{Dim, QTensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_velocity(g: GridSpec, seed: u64) -> VelocityField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = VelocityField { grid: g, data: (0..2 * g.ncell()).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        v.enforce_walls();
        v
    }

    #[test]
    fn poisson_round_trip_both_bcs() {
        let cfg = SolverConfig::default();
        for bc in [Boundary::Dirichlet0, Boundary::Periodic] {
            let g = GridSpec::new(24, 16, 1.0, 0.5, bc).unwrap();
            let s = ScalarField::from_fn(g, |x, y| (2.0 * PI * x).sin() * (2.0 * PI * y / 0.5).sin());
            let mut rhs = ScalarField::zeros(g);
            ops::laplacian(&g, &s.data, &mut rhs.data);
            let (p, st) = solve_poisson(&rhs, PoissonBc::Dirichlet, &cfg).unwrap();
            assert!(st.residual <= cfg.tol);
            let err = p.data.iter().zip(&s.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "{err}");
        }
        let g = GridSpec::unit_square(8, Boundary::Dirichlet0).unwrap();
        let (z, st) = solve_poisson(&ScalarField::zeros(g), PoissonBc::Neumann, &cfg).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        assert_eq!(st.iterations, 0);
        let ones = ScalarField::from_fn(g, |_, _| 1.0);
        assert!(matches!(solve_poisson(&ones, PoissonBc::Neumann, &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn preconditioners_change_iterations_not_solution() {
        let g = GridSpec::new(32, 16, 2.0, 1.0, Boundary::Dirichlet0).unwrap();
        let mut rhs = ScalarField::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos() + x - 1.0);
        let m = rhs.mean();
        rhs.data.iter_mut().for_each(|v| *v -= m);
        let base = SolverConfig::default();
        let (p0, s0) = solve_poisson(&rhs, PoissonBc::Neumann, &base).unwrap();
        assert!(s0.iterations <= 3, "{s0:?}");
        let mut counts = vec![s0.iterations];
        for pc in [Preconditioner::Jacobi, Preconditioner::None] {
            let cfg = SolverConfig { preconditioner: pc, ..base };
            let (p, s) = solve_poisson(&rhs, PoissonBc::Neumann, &cfg).unwrap();
            counts.push(s.iterations);
            let d = p0.data.iter().zip(&p.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(d < 1e-8 * p0.max_abs(), "{pc:?} {d}");
        }
        assert!(counts[0] < counts[1] && counts[1] != counts[2], "{counts:?}");
    }

    #[test]
    fn solver_failure_reports_residual() {
        let g = GridSpec::unit_square(32, Boundary::Dirichlet0).unwrap();
        let rhs = ScalarField::from_fn(g, |x, y| x * y);
        let cfg = SolverConfig { max_iter: Some(2), preconditioner: Preconditioner::Jacobi, ..Default::default() };
        match solve_poisson(&rhs, PoissonBc::Dirichlet, &cfg) {
            Err(Error::SolverFailure { iterations, residual, .. }) => {
                assert_eq!(iterations, 2);
                assert!(residual > cfg.tol);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn projection_properties() {
        let cfg = SolverConfig::default();
        for bc in [Boundary::Dirichlet0, Boundary::Periodic] {
            let g = GridSpec::new(32, 24, 1.0, 0.75, bc).unwrap();
            let v = random_velocity(g, 9);
            let p1 = helmholtz_project(&v, &cfg).unwrap();
            assert!(p1.residual <= cfg.tol, "{}", p1.residual);
            let p2 = helmholtz_project(&p1.field, &cfg).unwrap();
            assert!(p2.field.sub(&p1.field).norm() <= 10.0 * cfg.tol * v.norm());
            let gq = ops::grad_faces(&p1.potential);
            assert!(p1.field.dot(&gq).abs() <= 10.0 * cfg.tol * v.norm() * gq.norm());
            let mut back = p1.field.clone();
            back.axpy(1.0, &gq);
            assert!(back.sub(&v).max_abs() < 1e-12);

            let pure = ops::grad_faces(&ScalarField::from_fn(g, |x, y| (PI * x).cos() + x * y * y));
            let pp = helmholtz_project(&pure, &cfg).unwrap();
            assert!(pp.field.norm() <= cfg.tol * pure.norm().max(1.0));
        }
    }

    #[test]
    fn momentum_solve_trivial_and_spd() {
        let g = GridSpec::unit_square(16, Boundary::Dirichlet0).unwrap();
        let cfg = SolverConfig::default();
        let nu = ScalarField::from_fn(g, |x, y| 1.0 + 0.5 * (x * y).sin());
        let z = VelocityField::zeros(g);
        let r = momentum_solve(&z, &nu, &z, 0.01, &cfg).unwrap();
        assert_eq!(r.u.max_abs(), 0.0);

        let a = random_velocity(g, 1);
        let b = random_velocity(g, 2);
        let op = ViscousOperator::new(&g, &nu.data);
        let mut aa = vec![0.0; a.data.len()];
        let mut ab = vec![0.0; a.data.len()];
        op.apply(&a.data, &mut aa);
        op.apply(&b.data, &mut ab);
        let x = grid::dot(&aa, &b.data);
        let y = grid::dot(&ab, &a.data);
        assert!((x - y).abs() < 1e-12 * x.abs());
        assert!(op.form(&a.data, &a.data) > 0.0);

        let r = momentum_solve(&a, &nu, &b, 0.01, &cfg).unwrap();
        assert!(r.divergence <= cfg.tol);
        assert!(r.stats.residual <= r.stats.initial_residual.max(cfg.tol));
    }

    #[test]
    fn q_solve_heat_eigenvalue_and_wall_value() {
        let g = GridSpec::unit_square(16, Boundary::Dirichlet0).unwrap();
        let cfg = SolverConfig::default().with_tol(1e-12);
        let hat = QTensor::from_coeffs(Dim::Two, &[0.3, 0.1]).unwrap();
        let q = QField::from_fn(g, Dim::Two, |x, y| hat.scale((PI * x).sin() * (PI * y).sin()));
        let mu = 2.0 * 4.0 * 16.0 * 16.0 * (PI / 32.0).sin().powi(2);
        let dt = 0.01;
        let r = q_solve(&q, &q, dt, 0.0, 1.0, &cfg).unwrap();
        let mut expect = q.clone();
        expect.comps.iter_mut().flatten().for_each(|x| *x /= 1.0 + dt * mu);
        assert!(r.q.sub(&expect).max_abs() < 1e-12);
        assert!(r.boundary_lap.is_none());

        let r = q_solve(&q, &q, dt, 1e-3, 1.0, &cfg).unwrap();
        let mut expect = q.clone();
        expect.comps.iter_mut().flatten().for_each(|x| *x /= 1.0 + dt * (1e-3 * mu * mu + mu));
        assert!(r.q.sub(&expect).max_abs() < 1e-11);
        // a residual of tol * |b| maps to at most tol * |b| * h^2 / (2 dt eps)
        let bound = cfg.tol * q.max_abs() * g.hx() * g.hx() / (2.0 * dt * 1e-3);
        let w = r.boundary_lap.unwrap();
        assert!(w <= bound && w < 1e-9, "{w} {bound}");
    }
}
