mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use qflow::energy::{dissipation_audit, EnergyLedger};
use qflow::grid::{write_csv, write_snapshot, Snapshot};
use qflow::scheme::{self, State, LOG_HEADER};
use qflow::verify::{self, Suite};

use config::RunConfig;

/// Tolerance of the dissipation audit recorded after each run.
const AUDIT_TOL: f64 = 1e-3;

#[derive(Parser)]
#[command(name = "qflow", version, about = "Q-tensor hydrodynamics on a MAC grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML config.
    Run { config: PathBuf },
    /// Run verification suites: identities, cancellation, projector, mms, epsilon or all.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Directory for the CSV reports.
        #[arg(long, default_value = "qflow-verify")]
        out: PathBuf,
    },
}

/// An error together with the process exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn usage(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, err: err.into() }
}

fn step_failure(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, err: err.into() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let res = configure_threads().and_then(|()| match cli.command {
        Command::Run { config } => run(&config),
        Command::Verify { suite, seed, out } => verify_cmd(&suite, seed, &out),
    });
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("QFLOW_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| usage(anyhow::anyhow!("QFLOW_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(usage)
}

fn snapshot(dir: &Path, step: usize, state: &State) -> qflow::error::Result<()> {
    write_snapshot(&dir.join(format!("q_{step:06}.bin")), &Snapshot::from_q(&state.q))?;
    write_snapshot(&dir.join(format!("u_{step:06}.bin")), &Snapshot::from_velocity(&state.u))?;
    Ok(())
}

fn run(path: &Path) -> Result<u8, Failure> {
    let cfg = RunConfig::load(path).map_err(usage)?;
    let dim = cfg.dim().map_err(usage)?;
    let state0 = cfg.initial.build(&cfg.grid, dim).context("initial").map_err(usage)?;

    let dir = &cfg.output;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).map_err(usage)?;
    let resolved = cfg.resolved().map_err(usage)?;
    std::fs::write(dir.join("config.toml"), resolved).map_err(usage)?;
    let mut log = BufWriter::new(File::create(dir.join("run.log")).map_err(usage)?);
    writeln!(log, "{LOG_HEADER}").map_err(usage)?;
    println!("{LOG_HEADER}");
    snapshot(dir, 0, &state0).map_err(step_failure)?;

    let mut ledger = EnergyLedger::new(&cfg.viscosity);
    let mut last_step = 0;
    let res = scheme::advance_with(state0, cfg.t_end, &cfg.material, &cfg.viscosity, &cfg.scheme, &mut ledger, |info| {
        let line = scheme::format_log_line(info);
        println!("{line}");
        writeln!(log, "{line}")?;
        if info.step % cfg.snapshot_interval == 0 {
            snapshot(dir, info.step, info.state)?;
        }
        last_step = info.step;
        Ok(())
    });
    ledger.write_csv(&dir.join("energy.csv")).map_err(step_failure)?;
    let state = match res {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(log, "FAILED: {e}");
            let _ = log.flush();
            return Err(step_failure(e));
        }
    };
    if last_step % cfg.snapshot_interval != 0 {
        snapshot(dir, last_step, &state).map_err(step_failure)?;
    }
    write_csv(&dir.join("q_final.csv"), &state.q).map_err(step_failure)?;

    let audit = dissipation_audit(&ledger, AUDIT_TOL);
    std::fs::write(dir.join("audit.toml"), toml::to_string(&audit).map_err(step_failure)?).map_err(step_failure)?;
    let verdict = match (audit.informational, audit.pass) {
        (true, _) => "INFO",
        (false, true) => "PASS",
        (false, false) => "FAIL",
    };
    let line = format!(
        "dissipation audit {verdict}: max residual {:.3e} (threshold {:.3e}), max dE/dt {:.3e}",
        audit.max_residual, audit.threshold, audit.max_increase_rate
    );
    println!("{line}");
    writeln!(log, "{line}").and_then(|()| log.flush()).map_err(step_failure)?;
    Ok(0)
}

fn verify_cmd(name: &str, seed: u64, out: &Path) -> Result<u8, Failure> {
    let suite: Suite = name.parse().map_err(usage)?;
    let suites: Vec<Suite> = if suite == Suite::All { Suite::ALL.to_vec() } else { vec![suite] };
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display())).map_err(usage)?;
    let summary = out.join("summary.csv");
    if summary.exists() {
        std::fs::remove_file(&summary).map_err(usage)?;
    }
    let mut ok = true;
    for s in suites {
        let reports = verify::run_suite(s, seed).with_context(|| format!("suite {}", s.name())).map_err(|e| Failure { code: 3, err: e })?;
        println!("== {}", s.name());
        for r in &reports {
            println!("{r}");
            if let Some(t) = &r.table {
                println!("    {}", t.columns.join("  "));
                for row in &t.rows {
                    let cells: Vec<String> = row.iter().map(|x| format!("{x:.4e}")).collect();
                    println!("    {}", cells.join("  "));
                }
            }
        }
        verify::write_reports(out, s.name(), &reports).map_err(|e| Failure { code: 3, err: e.into() })?;
        ok &= verify::all_pass(&reports);
    }
    println!("{}", if ok { "verify: PASS" } else { "verify: FAIL" });
    Ok(if ok { 0 } else { 3 })
}
