//! Acceptance criteria at their pinned tolerances, one line per criterion.
//! Runs as a plain binary (`harness = false`) and exits nonzero on failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qflow::energy::{dissipation_audit, EnergyLedger};
use qflow::error::Result;
use qflow::grid::ops;
use qflow::grid::{Boundary, GridSpec};
use qflow::init::InitialCondition;
use qflow::scheme::{self, Mode, SchemeConfig, State};
use qflow::tensor::{Dim, MaterialParams, ViscositySpec};
use qflow::verify::{self, CheckReport, MmsProblem};

const SEED: u64 = 20240611;

struct Outcome {
    pass: bool,
    detail: String,
    /// Extra lines printed under the verdict; never gate.
    notes: Vec<String>,
}

impl Outcome {
    fn from_reports(reports: &[CheckReport]) -> Self {
        let pass = verify::all_pass(reports);
        let detail = reports
            .iter()
            .map(|r| format!("{}={:.2e}/{:.0e}", r.name, r.error(), r.threshold))
            .collect::<Vec<_>>()
            .join(" ");
        Outcome { pass, detail, notes: Vec::new() }
    }
}

fn square(n: usize) -> Result<GridSpec> {
    GridSpec::unit_square(n, Boundary::Dirichlet0)
}

fn constant_nu() -> ViscositySpec {
    ViscositySpec::Constant { nu0: 1.0 }
}

fn identities() -> Result<Outcome> {
    let reports = verify::identity_suite(SEED, 1000)?;
    let algebraic: Vec<CheckReport> = reports.into_iter().filter(|r| !r.name.contains("gradient")).collect();
    Ok(Outcome::from_reports(&algebraic))
}

fn gradient() -> Result<Outcome> {
    Ok(Outcome::from_reports(&verify::gradient_identity(SEED, 100)?))
}

fn cancellation() -> Result<Outcome> {
    let g = GridSpec::unit_square(64, Boundary::Periodic)?;
    let reports =
        [Dim::Two, Dim::Three].iter().map(|&d| verify::discrete_cancellation(SEED, &g, d)).collect::<Result<Vec<_>>>()?;
    Ok(Outcome::from_reports(&reports))
}

fn projector() -> Result<Outcome> {
    let cfg = qflow::solver::SolverConfig::default();
    Ok(Outcome::from_reports(&verify::projector_checks(SEED, &square(64)?, &cfg)?))
}

fn dissipation() -> Result<Outcome> {
    let s0 = InitialCondition::standard_bubble().build(&square(64)?, Dim::Two)?;
    let p = MaterialParams::unit();
    let spec = constant_nu();
    let runs: Vec<(f64, EnergyLedger)> = [1e-3, 5e-4]
        .into_iter()
        .map(|dt| {
            let cfg = SchemeConfig { dt, ..Default::default() };
            let mut ledger = EnergyLedger::new(&spec);
            scheme::advance(s0.clone(), 0.2, &p, &spec, &cfg, &mut ledger)?;
            Ok((dt, ledger))
        })
        .collect::<Result<_>>()?;
    let mut worst_rate = f64::NEG_INFINITY;
    for (_, ledger) in &runs {
        for w in ledger.records().windows(2) {
            worst_rate = worst_rate.max((w[1].total - w[0].total) / (w[1].t - w[0].t));
        }
    }
    let r1 = runs[0].1.implicit_residual();
    let r2 = runs[1].1.implicit_residual();
    let ratio = r1 / r2;
    let monotone = worst_rate <= 1e-3;
    let halves = (1.5..=2.5).contains(&ratio);
    let mut notes = Vec::new();
    for (dt, ledger) in &runs {
        let a = dissipation_audit(ledger, 1e-3);
        notes.push(format!(
            "INFO dt={dt:e}: trapezoid audit |E(t) + int B - E(0)| = {:.3e} vs 1e-3 (1 + E0) = {:.3e} ({}); E0 = {:.4e}",
            a.max_residual,
            a.threshold,
            if a.pass { "within" } else { "exceeded" },
            ledger.records()[0].total
        ));
    }
    Ok(Outcome {
        pass: monotone && halves,
        detail: format!(
            "max dE/dt = {worst_rate:.3e} (<= 1e-3), residual(dt) = {r1:.4e}, residual(dt/2) = {r2:.4e}, ratio = {ratio:.3} in [1.5, 2.5]"
        ),
        notes,
    })
}

fn compatibility() -> Result<Outcome> {
    let s0 = InitialCondition::standard_bubble().build(&square(32)?, Dim::Two)?;
    let cfg = SchemeConfig { mode: Mode::Regularized, epsilon: 1e-3, ..Default::default() };
    let mut ledger = EnergyLedger::new(&constant_nu());
    let mut wall = 0.0_f64;
    let mut steps = 0;
    scheme::advance_with(s0, 0.1, &MaterialParams::unit(), &constant_nu(), &cfg, &mut ledger, |info| {
        wall = wall.max(info.report.boundary_lap.unwrap_or(f64::INFINITY));
        steps += 1;
        Ok(())
    })?;
    let thr = 10.0 * cfg.solver.tol;
    Ok(Outcome {
        pass: wall <= thr,
        detail: format!("{steps} steps on 32x32, max wall |lap Q| = {wall:.3e} (<= {thr:.0e})"),
        notes: Vec::new(),
    })
}

fn epsilon_limit() -> Result<Outcome> {
    let s0 = InitialCondition::standard_bubble().build(&square(32)?, Dim::Two)?;
    let study = verify::epsilon_limit_study(
        &s0,
        0.05,
        &[1e-2, 1e-3, 1e-4],
        &MaterialParams::unit(),
        &constant_nu(),
        &SchemeConfig::default(),
    )?;
    let pass = study.differences.windows(2).all(|w| w[1] < w[0]);
    let diffs = study.differences.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(" > ");
    Ok(Outcome { pass, detail: format!("|Q_eps - Q_0| for eps = 1e-2, 1e-3, 1e-4: {diffs}"), notes: Vec::new() })
}

fn mms() -> Result<Outcome> {
    let levels = [16, 32, 64];
    let mut reports = Vec::new();
    for pb in [MmsProblem::Heat, MmsProblem::Stokes, MmsProblem::CoupledLinear] {
        reports.push(verify::mms_convergence(pb, &levels)?);
    }
    let s0 = verify::mild_bubble().build(&square(32)?, Dim::Two)?;
    reports.push(verify::temporal_order(
        &s0,
        0.04,
        &[0.01, 0.005, 0.0025, 0.00125],
        &MaterialParams::unit(),
        &constant_nu(),
        &SchemeConfig::default(),
    )?);
    let mut out = Outcome::from_reports(&reports);
    out.detail = reports
        .iter()
        .map(|r| {
            let orders = r.table.as_ref().map(|t| {
                t.rows.iter().filter_map(|row| row.last().copied()).filter(|o| o.is_finite()).map(|o| format!("{o:.2}")).collect::<Vec<_>>().join("/")
            });
            format!("{}: order {}", r.name, orders.unwrap_or_default())
        })
        .collect::<Vec<_>>()
        .join(", ");
    Ok(out)
}

fn picard() -> Result<Outcome> {
    let s0 = InitialCondition::standard_bubble().build(&square(32)?, Dim::Two)?;
    let stats: Vec<(usize, f64)> = [1e-3, 5e-4]
        .into_iter()
        .map(|dt| {
            let cfg = SchemeConfig { dt, picard_tol: 1e-10, max_halvings: 0, ..Default::default() };
            let mut ledger = EnergyLedger::new(&constant_nu());
            let (mut iters, mut rho) = (0, 0.0_f64);
            scheme::advance_with(s0.clone(), 0.05, &MaterialParams::unit(), &constant_nu(), &cfg, &mut ledger, |info| {
                iters = iters.max(info.report.iterations());
                rho = rho.max(info.report.rho);
                Ok(())
            })?;
            Ok((iters, rho))
        })
        .collect::<Result<_>>()?;
    let (it1, rho1) = stats[0];
    let (it2, rho2) = stats[1];
    Ok(Outcome {
        pass: it1 <= 20 && rho2 <= rho1,
        detail: format!("dt=1e-3: max {it1} iterations (<= 20), max rho {rho1:.3e}; dt=5e-4: max {it2} iterations, max rho {rho2:.3e}"),
        notes: Vec::new(),
    })
}

fn invariants() -> Result<Outcome> {
    let s0 = InitialCondition::standard_bubble().build(&square(32)?, Dim::Three)?;
    let cfg = SchemeConfig::default();
    let spec = ViscositySpec::Saturating { nu0: 1.0, nu1: 0.5 };
    let mut ledger = EnergyLedger::new(&spec);
    let (mut drift, mut div, mut steps) = (0.0_f64, 0.0_f64, 0);
    let check = |s: &State, drift: &mut f64, div: &mut f64| {
        for k in 0..s.grid().ncell() {
            *drift = drift.max(s.q.get(k).reconstructed_trace().abs());
        }
        *div = div.max(ops::div_vec(&s.u).max_abs());
    };
    check(&s0, &mut drift, &mut div);
    scheme::advance_with(s0, 0.05, &MaterialParams::unit(), &spec, &cfg, &mut ledger, |info| {
        check(info.state, &mut drift, &mut div);
        steps += 1;
        Ok(())
    })?;
    let thr = cfg.solver.tol;
    Ok(Outcome {
        pass: drift == 0.0 && div <= thr,
        detail: format!("{steps} steps, d = 3, variable nu: max |tr Q| = {drift:e} (== 0), max |div u| = {div:.3e} (<= {thr:.0e})"),
        notes: Vec::new(),
    })
}

type Criterion = (&'static str, Duration, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("algebraic identities", Duration::from_secs(1), identities),
        ("bulk gradient identity", Duration::from_secs(1), gradient),
        ("discrete cancellation", Duration::from_secs(5), cancellation),
        ("Helmholtz projector", Duration::from_secs(10), projector),
        ("energy dissipation", Duration::from_secs(120), dissipation),
        ("compatibility condition", Duration::from_secs(120), compatibility),
        ("epsilon limit", Duration::from_secs(180), epsilon_limit),
        ("MMS convergence", Duration::from_secs(300), mms),
        ("Picard diagnostics", Duration::from_secs(120), picard),
        ("structural invariants", Duration::from_secs(120), invariants),
    ];
    let mut failures = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = run();
        let took = t.elapsed();
        let in_time = took <= *budget;
        match res {
            Ok(o) => {
                let pass = o.pass && in_time;
                failures += usize::from(!pass);
                println!(
                    "{} {:>2} {name}: {} [{:.2}s, budget {}s{}]",
                    if pass { "PASS" } else { "FAIL" },
                    k + 1,
                    o.detail,
                    took.as_secs_f64(),
                    budget.as_secs(),
                    if in_time { "" } else { ", over budget" }
                );
                for n in o.notes {
                    println!("     {n}");
                }
            }
            Err(e) => {
                failures += 1;
                println!("FAIL {:>2} {name}: error: {e} [{:.2}s]", k + 1, took.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
