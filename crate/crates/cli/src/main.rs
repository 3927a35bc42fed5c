//! Benchmark harness for the BLTT all-at-once solver.
//!
//! Subcommands: `solve` (one preconditioned run), `bench` (grid sweep over
//! solver variants, CSV output), `spectrum` (dense preconditioned spectrum
//! plus clustering bounds), `oracle-check` (randomized property suite).
//!
//! Exit codes: 0 success, 1 config/usage error, 2 non-convergence or failed
//! properties.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use bltt_core::driver::{solve_problem, PreconditionerChoice};
use bltt_core::minres::MinresReport;
use bltt_core::oracle::{self, suite};
use bltt_core::problems::{build, BuiltProblem};

const CSV_HEADER: &str = "N,m_plus_1,DoF,solver,iterations,wall_time_s,converged,true_rel_residual";

#[derive(Parser)]
#[command(name = "bltt", version, about = "All-at-once BLTT solver benchmark harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one problem and write solution + report.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Override the preconditioner alpha.
        #[arg(long)]
        alpha: Option<f64>,
        /// Override the solver tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Override the iteration cap.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Override the report CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep (N, m+1) pairs over solver variants and emit a CSV table.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        /// Override the per-row iteration cap.
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run rows on this many worker threads (default: sequential).
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Dense preconditioned spectrum and clustering bounds (small sizes).
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomized property suite.
    OracleCheck {
        #[arg(long)]
        seed: Option<u64>,
        /// Optional config providing `[oracle] sizes`.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Solve {
            config,
            alpha,
            tol,
            max_iter,
            out,
        } => cmd_solve(&config, alpha, tol, max_iter, out),
        Cmd::Bench {
            config,
            alpha,
            tol,
            max_iter,
            out,
            parallel,
        } => cmd_bench(&config, alpha, tol, max_iter, out, parallel),
        Cmd::Spectrum { config, alpha, out } => cmd_spectrum(&config, alpha, out),
        Cmd::OracleCheck { seed, config } => cmd_oracle_check(seed, config.as_deref()),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

struct Row {
    n: usize,
    m_plus_1: usize,
    dof: usize,
    solver: &'static str,
    iterations: usize,
    capped: bool,
    wall_time_s: f64,
    converged: bool,
    true_rel_residual: f64,
}

impl Row {
    fn from_report(
        n: usize,
        m_plus_1: usize,
        dof: usize,
        solver: &'static str,
        report: &MinresReport,
        cap: usize,
    ) -> Self {
        Self {
            n,
            m_plus_1,
            dof,
            solver,
            iterations: report.iterations,
            capped: !report.converged && report.iterations >= cap,
            wall_time_s: report.wall_time.as_secs_f64(),
            converged: report.converged,
            true_rel_residual: report.final_true_residual,
        }
    }

    fn to_csv(&self) -> String {
        let iters = if self.capped {
            "-".to_string()
        } else {
            self.iterations.to_string()
        };
        format!(
            "{},{},{},{},{},{:.6},{},{:e}",
            self.n,
            self.m_plus_1,
            self.dof,
            self.solver,
            iters,
            self.wall_time_s,
            self.converged,
            self.true_rel_residual
        )
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_solve(
    config_path: &Path,
    alpha: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let cfg = config::load(config_path)?;
    let spec = cfg.problem.to_spec()?;
    let mut solver = cfg.solver.to_minres()?;
    if let Some(t) = tol {
        solver.tol = t;
    }
    if let Some(mi) = max_iter {
        solver.max_iter = mi;
    }
    let choice = config::parse_choice(
        &cfg.preconditioner.kind,
        alpha.unwrap_or(cfg.preconditioner.alpha),
    )?;

    let problem = build(&spec).map_err(|e| anyhow::anyhow!("problem build failed: {e}"))?;
    let (solution, report) =
        solve_problem(&problem, choice, &solver).map_err(|e| anyhow::anyhow!("solve failed: {e}"))?;

    let m_plus_1 = spec.m + 1;
    let row = Row::from_report(
        spec.num_steps,
        m_plus_1,
        problem.order(),
        choice.label(),
        &report,
        solver.max_iter,
    );
    println!(
        "family={} N={} m+1={} DoF={}",
        spec.family.as_str(),
        spec.num_steps,
        m_plus_1,
        problem.order()
    );
    println!(
        "solver={} tol={:e} iterations={} converged={} wall_time_s={:.6} true_rel_residual={:e}",
        choice.label(),
        solver.tol,
        report.iterations,
        report.converged,
        report.wall_time.as_secs_f64(),
        report.final_true_residual
    );
    if let Some(err) = problem.max_error(&solution) {
        println!("max_error_vs_exact={err:e}");
    }

    let table_path = out.or(cfg.outputs.table.as_ref().map(PathBuf::from));
    if let Some(path) = table_path {
        write_text(&path, &format!("{CSV_HEADER}\n{}\n", row.to_csv()))?;
    }
    if let Some(path) = &cfg.outputs.residual_history {
        let mut text = String::from("iter,residual\n");
        for (i, r) in report.residual_history.iter().enumerate() {
            text.push_str(&format!("{i},{r:e}\n"));
        }
        write_text(Path::new(path), &text)?;
    }
    if let Some(path) = &cfg.outputs.solution {
        let mut text = String::from("index,value\n");
        for (i, v) in solution.iter().enumerate() {
            text.push_str(&format!("{i},{v:e}\n"));
        }
        write_text(Path::new(path), &text)?;
    }
    Ok(if report.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_bench(
    config_path: &Path,
    alpha: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    out: Option<PathBuf>,
    parallel: Option<usize>,
) -> Result<ExitCode> {
    let cfg = config::load(config_path)?;
    let bench = cfg
        .bench
        .as_ref()
        .context("config has no [bench] section")?;
    let mut solver = cfg.solver.to_minres()?;
    if let Some(t) = tol {
        solver.tol = t;
    }
    let cap = max_iter.unwrap_or(bench.iter_cap);
    solver.max_iter = cap;
    let alpha = alpha.unwrap_or(cfg.preconditioner.alpha);

    let mut tasks = Vec::new();
    for &[n, m_plus_1] in &bench.grid {
        for kind in &bench.solvers {
            let choice = config::parse_choice(kind, alpha)?;
            tasks.push((n, m_plus_1, choice));
        }
    }

    let run_one = |&(n, m_plus_1, choice): &(usize, usize, PreconditionerChoice)| -> Option<Row> {
        let section = cfg.problem.with_size(n, m_plus_1);
        let spec = match section.to_spec() {
            Ok(s) => s,
            Err(e) => {
                eprintln!("row (N={n}, m+1={m_plus_1}, {}): bad spec: {e:#}", choice.label());
                return None;
            }
        };
        let problem = match build(&spec) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("row (N={n}, m+1={m_plus_1}, {}): build failed: {e}", choice.label());
                return None;
            }
        };
        match solve_problem(&problem, choice, &solver) {
            Ok((_, report)) => Some(Row::from_report(
                n,
                m_plus_1,
                problem.order(),
                choice.label(),
                &report,
                cap,
            )),
            Err(e) => {
                eprintln!("row (N={n}, m+1={m_plus_1}, {}): solve failed: {e}", choice.label());
                None
            }
        }
    };

    let rows: Vec<Option<Row>> = match parallel {
        Some(workers) if workers > 1 => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .context("cannot build thread pool")?;
            pool.install(|| tasks.par_iter().map(run_one).collect())
        }
        _ => tasks.iter().map(run_one).collect(),
    };

    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for row in rows.into_iter().flatten() {
        text.push_str(&row.to_csv());
        text.push('\n');
    }
    match out {
        Some(path) => write_text(&path, &text)?,
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn spectral_operator(problem: &BuiltProblem) -> &bltt_core::spectral::SpectralBlttOperator {
    &problem.operator
}

fn cmd_spectrum(
    config_path: &Path,
    alpha: Option<f64>,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let cfg = config::load(config_path)?;
    let spec = cfg.problem.to_spec()?;
    let section = cfg.spectrum.as_ref();
    let alpha = alpha
        .or(section.and_then(|s| s.alpha))
        .unwrap_or(cfg.preconditioner.alpha);
    let delta = section.map(|s| s.delta).unwrap_or(0.5);

    let problem = build(&spec).map_err(|e| anyhow::anyhow!("problem build failed: {e}"))?;
    let op = spectral_operator(&problem);
    if op.order() > oracle::SIZE_GUARD {
        bail!(
            "dense spectrum needs MN <= {}, got {}; shrink the grid (this command \
             materializes the preconditioned matrix)",
            oracle::SIZE_GUARD,
            op.order()
        );
    }
    let bounds = oracle::theory_bounds(op, alpha, delta)
        .map_err(|e| anyhow::anyhow!("bounds computation failed: {e}"))?;
    let bundle = oracle::build_bundle(op, alpha)
        .map_err(|e| anyhow::anyhow!("dense assembly failed: {e}"))?;
    let applicable = alpha <= bounds.nu;
    let radius = alpha * bounds.mu;

    let mut text = String::new();
    text.push_str(&format!("# family,{}\n", spec.family.as_str()));
    text.push_str(&format!("# N,{}\n# m_plus_1,{}\n", spec.num_steps, spec.m + 1));
    if problem.true_operator.is_some() {
        text.push_str("# operator,mean-coefficient surrogate\n");
    }
    text.push_str(&format!("# alpha,{alpha:e}\n# delta,{delta}\n"));
    text.push_str(&format!("# c0,{:e}\n# mu,{:e}\n# nu,{:e}\n# zeta,{:e}\n", bounds.c0, bounds.mu, bounds.nu, bounds.zeta));
    text.push_str(&format!("# e_norm,{:e}\n", bounds.e_norm));
    text.push_str(&format!("# bound_applicable,{applicable}\n"));
    if applicable {
        text.push_str(&format!(
            "# interval_neg,{:e},{:e}\n# interval_pos,{:e},{:e}\n",
            -1.0 - radius,
            -1.0 + radius,
            1.0 - radius,
            1.0 + radius
        ));
    } else {
        text.push_str("# interval_neg,not-applicable\n# interval_pos,not-applicable\n");
    }
    text.push_str("eigenvalue\n");
    for l in oracle::preconditioned_spectrum(&bundle) {
        text.push_str(&format!("{l:e}\n"));
    }
    match out {
        Some(path) => {
            write_text(&path, &text)?;
            println!(
                "wrote {} eigenvalues; c0={:e} mu={:e} nu={:e} zeta={:e} e_norm={:e} applicable={}",
                bundle.preconditioned_spectrum.len(),
                bounds.c0,
                bounds.mu,
                bounds.nu,
                bounds.zeta,
                bounds.e_norm,
                applicable
            );
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle_check(seed: Option<u64>, config_path: Option<&Path>) -> Result<ExitCode> {
    let mut suite_cfg = suite::SuiteConfig::default();
    if let Some(seed) = seed {
        suite_cfg.seed = seed;
    }
    if let Some(path) = config_path {
        let cfg = config::load(path)?;
        if let Some(oracle_cfg) = cfg.oracle {
            suite_cfg.sizes = oracle_cfg
                .sizes
                .iter()
                .map(|&[m, d, n]| (m, d, n))
                .collect();
        }
    }
    let reports = suite::run_property_suite(&suite_cfg);
    let mut all_ok = true;
    for r in &reports {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", r.name, r.detail);
        all_ok &= r.passed;
    }
    println!(
        "{} of {} properties passed (seed {})",
        reports.iter().filter(|r| r.passed).count(),
        reports.len(),
        suite_cfg.seed
    );
    Ok(if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
