//! `cns`: runs the mild-solution solver, the IMEX stepper and the diagnostics
//! from a JSON config.
//!
//! Exit status: 0 when every ledger record passes, 1 when a check fails,
//! 2 on configuration, schema or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use cns_core::condition_a::{validate, KatoIndices};
use cns_core::config::{RunConfig, SolverChoice};
use cns_core::diagnostics::*;
use cns_core::duhamel::{TimeMesh, Trajectory};
use cns_core::io::{num, read_trajectory, write_csv, write_trajectory};
use cns_core::measures::TestFunction;
use cns_core::oracle::run_oracle;
use cns_core::picard::{solve_picard_fields, MildSolution};
use cns_core::problem::InitialFields;
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "cns", version, about = "Chemotaxis-Navier-Stokes mild solutions and their verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a Kato index sextuple against Condition A.
    ValidateIndices {
        /// p1,p2,p3,alpha1,alpha2,alpha3; fractions like 17/8 are accepted.
        #[arg(long, value_delimiter = ',', value_parser = parse_number, allow_hyphen_values = true)]
        indices: Option<Vec<f64>>,
        /// Take the indices from a run config instead.
        #[arg(long, conflicts_with = "indices")]
        config: Option<PathBuf>,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured solver(s) and the standard ledger.
    Simulate(RunArgs),
    /// Run the Picard iteration only and log its increments.
    Picard(RunArgs),
    /// Full ledger for a run, or for a trajectory dump with --trajectory.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Run both solvers and report matched-node discrepancies.
    Compare(RunArgs),
    /// Compare a run with its rescaled counterpart.
    ScaleCheck {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            a / b
        }
        None => s.parse().map_err(|e| format!("{s}: {e}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s} is not a finite number"))
    }
}

struct Run {
    name: &'static str,
    cfg: RunConfig,
    out: PathBuf,
    data: InitialFields,
}

impl Run {
    fn load(name: &'static str, args: &RunArgs) -> Result<Self> {
        let cfg = RunConfig::from_file(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
        let out = args.out.clone().unwrap_or_else(|| cfg.output_dir());
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let data = cfg.problem()?.discretize()?;
        Ok(Run { name, cfg, out, data })
    }

    fn picard(&self) -> Result<MildSolution> {
        let sol = solve_picard_fields(&self.data, &self.cfg.indices(), &self.cfg.mesh()?, &self.cfg.picard_options())?;
        sol.report.write_csv(&self.out.join("picard.csv"))?;
        fs::write(self.out.join("picard_report.json"), serde_json::to_string_pretty(&sol.report)?)?;
        write_trajectory(&self.out.join("picard"), &sol.trajectory)?;
        for w in &sol.report.warnings {
            eprintln!("warning: {w}");
        }
        Ok(sol)
    }

    fn oracle(&self, mesh: &TimeMesh) -> Result<Trajectory> {
        let mut opts = self.cfg.oracle_options();
        if let Some(ck) = &mut opts.checkpoint {
            ck.dir = self.out.join("checkpoints");
        }
        let traj = run_oracle(&self.data, mesh, &opts)?;
        write_trajectory(&self.out.join("oracle"), &traj)?;
        Ok(traj)
    }

    fn standard(&self, traj: &Trajectory, prefix: &str) -> Result<DiagnosticLedger> {
        let mut ledger = standard_ledger(traj, &self.data, &self.cfg.tolerances.conservation())?;
        for r in &mut ledger.records {
            r.name = format!("{prefix}: {}", r.name);
        }
        for n in &mut ledger.notes {
            *n = format!("{prefix}: {n}");
        }
        Ok(ledger)
    }

    fn picard_records(&self, sol: &MildSolution) -> Vec<DiagnosticRecord> {
        let r = &sol.report;
        vec![
            DiagnosticRecord::at_most(
                "picard: residual",
                r.residual.total(),
                2.0 * self.cfg.picard.tol,
                PLUMBING,
            ),
            DiagnosticRecord::at_least("picard: converged", r.converged as u8 as f64, 1.0, PLUMBING),
        ]
    }

    /// Writes ledger files and the manifest, prints the ledger, and maps
    /// pass/fail onto the exit status.
    fn finish(&self, ledger: &DiagnosticLedger) -> Result<ExitCode> {
        ledger.write_json(&self.out.join("ledger.json"))?;
        ledger.write_csv(&self.out.join("ledger.csv"))?;
        print_ledger(ledger);
        write_manifest(&self.out, self.name, &self.cfg)?;
        Ok(if ledger.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
    }
}

fn print_ledger(ledger: &DiagnosticLedger) {
    for r in &ledger.records {
        let rel = match r.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        println!(
            "{} {}: {:.6e} {} {:.6e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.measured_value,
            rel,
            r.claimed_bound
        );
    }
    for n in &ledger.notes {
        println!("NOTE {n}");
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn collect_files(dir: &Path, root: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, root, out)?;
        } else {
            out.push(path.strip_prefix(root)?.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

/// `manifest.json`: command, config hash, versions and a digest of every
/// output file. No timestamps, so identical runs give identical manifests.
fn write_manifest(out: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let mut files = Vec::new();
    collect_files(out, out, &mut files)?;
    files.retain(|f| f != "manifest.json");
    files.sort();
    let outputs: Vec<_> = files
        .iter()
        .map(|f| Ok(json!({"path": f, "sha256": sha256_hex(&fs::read(out.join(f))?)})))
        .collect::<Result<_>>()?;
    let canonical = cfg.canonical_json();
    let manifest = json!({
        "command": command,
        "config_hash": sha256_hex(canonical.as_bytes()),
        "config": serde_json::from_str::<serde_json::Value>(&canonical)?,
        "versions": {
            "cns": env!("CARGO_PKG_VERSION"),
            "cns-core": cns_core::VERSION,
        },
        "outputs": outputs,
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn validate_indices(indices: Option<Vec<f64>>, config: Option<PathBuf>, out: Option<PathBuf>) -> Result<ExitCode> {
    let idx = match (indices, config) {
        (Some(v), _) => KatoIndices::from_array(v.try_into().map_err(|_| anyhow::anyhow!("need six indices"))?),
        (None, Some(path)) => {
            let text = fs::read_to_string(&path)?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            match v.get("indices") {
                Some(a) => KatoIndices::from_array(serde_json::from_value(a.clone()).context("indices")?),
                None => KatoIndices::reference(),
            }
        }
        (None, None) => KatoIndices::reference(),
    };
    let report = validate(&idx)?;
    print!("{}", report.table());
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn simulate(args: &RunArgs) -> Result<ExitCode> {
    let run = Run::load("simulate", args)?;
    let mut ledger = DiagnosticLedger::new();
    let mesh = match run.cfg.solver {
        SolverChoice::Oracle => run.cfg.mesh()?,
        SolverChoice::Picard | SolverChoice::Both => {
            let sol = run.picard()?;
            ledger.extend(run.picard_records(&sol));
            let l = run.standard(&sol.trajectory, "picard")?;
            ledger.extend(l.records);
            ledger.notes.extend(l.notes);
            sol.trajectory.mesh()
        }
    };
    if run.cfg.solver != SolverChoice::Picard {
        let traj = run.oracle(&mesh)?;
        let l = run.standard(&traj, "oracle")?;
        ledger.extend(l.records);
        ledger.notes.extend(l.notes);
    }
    run.finish(&ledger)
}

fn picard(args: &RunArgs) -> Result<ExitCode> {
    let run = Run::load("picard", args)?;
    let sol = run.picard()?;
    let mut ledger = DiagnosticLedger::new();
    ledger.extend(run.picard_records(&sol));
    let r = &sol.report;
    if let Some(radius) = r.ball_radius {
        let worst = r.iterates.iter().map(|i| i.norm).fold(0.0, f64::max);
        ledger.push(DiagnosticRecord::at_most("picard: iterates stay in the ball", worst, radius, "iterates remain in the ball of radius 2K1 eps"));
    }
    if r.within_eps_max {
        let ratios = r.contraction_ratios();
        let worst = ratios.iter().cloned().fold(0.0, f64::max);
        ledger.push(DiagnosticRecord::at_most("picard: contraction ratio", worst, 1.0, "contraction of the Picard map for small data"));
    } else {
        ledger.note("seed norm exceeds eps_max: contraction is not asserted");
    }
    ledger.note(format!("regime: {}", r.regime));
    run.finish(&ledger)
}

fn seminorm_record(run: &Run) -> Result<Option<DiagnosticRecord>> {
    let plateau = 1.0 / (8.0 * std::f64::consts::PI).sqrt();
    let n0 = &run.cfg.data.n0;
    let tv = {
        let mut mu = n0.clone();
        mu.load_density(Some(&run.cfg.base_dir))?;
        mu.total_variation()
    };
    if tv == 0.0 {
        return Ok(None);
    }
    // densities are sampled, not mollified, so any t > 0 is available;
    // start far below the grid diffusion time h²
    let est = if n0.atoms.is_empty() && n0.filaments.is_empty() {
        let h = run.data.grid().spacing();
        estimate_atomic_seminorm(&run.data.n0, 0.0, h * h / 1024.0, 2.0, 0.5, 3)?
    } else {
        estimate_atomic_seminorm_mollified(&run.data.n0, 2.0, 3)?
    };
    let atomic = n0.atomic_tv();
    Ok(Some(if atomic > 0.0 {
        DiagnosticRecord::at_least(
            "atomic seminorm of n0 (atoms present)",
            est.limit,
            0.1 * atomic * plateau,
            "small-time limit of t^(1-1/p)|e^(t Delta) n0|_p detects atoms",
        )
    } else {
        DiagnosticRecord::at_most(
            "atomic seminorm of n0 (no atoms)",
            est.limit,
            0.01 * tv * plateau,
            "small-time limit of t^(1-1/p)|e^(t Delta) n0|_p vanishes without atoms",
        )
    }))
}

fn verify(args: &RunArgs, trajectory: Option<&Path>) -> Result<ExitCode> {
    let run = Run::load("verify", args)?;
    let traj = match trajectory {
        Some(dir) => read_trajectory(dir)?,
        None if run.cfg.solver == SolverChoice::Oracle => run.oracle(&run.cfg.mesh()?)?,
        None => run.picard()?.trajectory,
    };
    let mut ledger = run.standard(&traj, "run")?;
    let mu = {
        let mut mu = run.cfg.data.n0.clone();
        mu.load_density(Some(&run.cfg.base_dir))?;
        mu
    };
    if !mu.is_zero() {
        let psi = TestFunction::gaussian([0.0, 0.0], 0.5);
        let series = check_weak_initial_convergence(&traj, &mu, &psi, 5);
        let rows: Vec<Vec<String>> = series.times.iter().zip(&series.errors).map(|(t, e)| vec![num(*t), num(*e)]).collect();
        write_csv(&run.out.join("weak_convergence.csv"), &["t", "error"], &rows)?;
        ledger.push(series.record());
    }
    if let Some(r) = seminorm_record(&run)? {
        ledger.push(r);
    }
    let idx = run.cfg.indices();
    let rows: Vec<Vec<String>> = grad_c_series(&traj, idx.p2)?
        .into_iter()
        .map(|(t, v)| vec![num(t), num(v), num(t.powf(idx.alpha2) * v)])
        .collect();
    write_csv(&run.out.join("grad_c.csv"), &["t", "grad_c_Lp2", "weighted"], &rows)?;
    run.finish(&ledger)
}

fn compare(args: &RunArgs) -> Result<ExitCode> {
    let run = Run::load("compare", args)?;
    let sol = run.picard()?;
    let oracle = run.oracle(&sol.trajectory.mesh())?;
    let disc = trajectory_discrepancy(&sol.trajectory, &oracle)?;
    let rows: Vec<Vec<String>> = disc.iter().map(|(t, d)| vec![num(*t), num(d[0]), num(d[1]), num(d[2])]).collect();
    write_csv(&run.out.join("compare.csv"), &["t", "rel_l2_n", "rel_l2_c", "rel_l2_zeta"], &rows)?;
    let worst = disc.iter().flat_map(|(_, d)| d.iter().cloned()).fold(0.0, f64::max);
    let mut ledger = DiagnosticLedger::new();
    ledger.extend(run.picard_records(&sol));
    ledger.push(DiagnosticRecord::at_most(
        "max relative L2 discrepancy picard vs oracle",
        worst,
        run.cfg.tolerances.compare,
        "mild solution agrees with the classical solution",
    ));
    for (traj, name) in [(&sol.trajectory, "picard"), (&oracle, "oracle")] {
        let l = run.standard(traj, name)?;
        ledger.extend(l.records);
        ledger.notes.extend(l.notes);
    }
    run.finish(&ledger)
}

fn scale_check(args: &RunArgs, lambda: Option<f64>) -> Result<ExitCode> {
    let run = Run::load("scale-check", args)?;
    let lambda = lambda.unwrap_or(run.cfg.scale_lambda);
    if lambda.is_nan() || lambda <= 0.0 {
        bail!("lambda must be positive");
    }
    let idx = run.cfg.indices();
    let popts = run.cfg.picard_options();
    let mesh = run.cfg.mesh()?;
    // the oracle step scales with the horizon so both runs take matching steps
    let dt_fraction = run.cfg.oracle.dt / mesh.horizon();
    let report = match run.cfg.solver {
        SolverChoice::Picard => check_scaling_covariance(&run.data, &mesh, lambda, |d, m| {
            solve_picard_fields(d, &idx, m, &popts).map(|s| s.trajectory)
        })?,
        _ => check_scaling_covariance(&run.data, &mesh, lambda, |d, m| {
            run_oracle(d, m, &cns_core::oracle::OracleOptions::new(dt_fraction * m.horizon()))
        })?,
    };
    fs::write(run.out.join("scaling.json"), serde_json::to_string_pretty(&report)?)?;
    let mut ledger = DiagnosticLedger::new();
    match report.record(run.cfg.tolerances.scaling) {
        Some(r) => ledger.push(r),
        None => ledger.note(report.note.clone().unwrap_or_default()),
    }
    run.finish(&ledger)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::ValidateIndices { indices, config, out } => validate_indices(indices, config, out),
        Command::Simulate(a) => simulate(&a),
        Command::Picard(a) => picard(&a),
        Command::Verify { run, trajectory } => verify(&run, trajectory.as_deref()),
        Command::Compare(a) => compare(&a),
        Command::ScaleCheck { run, lambda } => scale_check(&run, lambda),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
