//! Command-line front end: run experiments or scenario files, list the
//! catalog, verify the acceptance criteria, and inspect snapshots.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 numerical failure,
//! 4 acceptance/assertion failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bvxl::error::Error;
use bvxl::exec::Exec;

#[derive(Parser)]
#[command(name = "bvxl", version, about = "rotating stratified Boussinesq laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunOpts {
    /// Output directory for series.csv, fits.csv, run.log.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero when any check fails.
    #[arg(long)]
    assert: bool,
    /// Seed for random initial data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (1 = sequential).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment from the catalog or a scenario file.
    Run {
        /// Experiment name or path to a `key = value` scenario file.
        target: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// List the experiment catalog.
    Catalog,
    /// Run the acceptance suite (all criteria, or one).
    Verify {
        /// Single criterion id (1..=10).
        #[arg(long)]
        criterion: Option<usize>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Print the header and norms of a snapshot file.
    Inspect { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap help/version are not usage errors.
            use clap::error::ErrorKind::*;
            let _ = e.print();
            return match e.kind() {
                DisplayHelp | DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}

fn classify(e: &Error) -> u8 {
    match e {
        Error::Parse { .. }
        | Error::Validation(_)
        | Error::InvalidSpec(_)
        | Error::UnknownExperiment(..)
        | Error::CorruptFile(_)
        | Error::VersionMismatch { .. } => 2,
        Error::BlowUp { .. } | Error::NonSolenoidal(_) | Error::TailMass { .. } => 3,
        _ => 2,
    }
}

fn exec_for(threads: usize) -> Exec {
    #[cfg(feature = "parallel")]
    {
        if threads == 1 {
            return Exec::Seq;
        }
        if threads > 1 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .ok();
        }
        Exec::Par
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Exec::Seq
    }
}

fn dispatch(cli: Cli) -> bvxl::Result<ExitCode> {
    match cli.command {
        Command::Catalog => {
            for name in bvxl::experiment::catalog() {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { target, opts } => {
            let exec = exec_for(opts.threads);
            let mut out_dir = opts.out.clone();
            let (art, final_state) = if bvxl::experiment::catalog().contains(&target.as_str()) {
                (bvxl::experiment::run_experiment(&target, opts.seed, exec)?, None)
            } else {
                let text = std::fs::read_to_string(&target)?;
                let mut sc = bvxl::scenario::parse_scenario(&text)?;
                sc.seed = opts.seed;
                if out_dir.is_none() {
                    out_dir = sc.out_dir.clone();
                }
                let (art, state) = bvxl::experiment::run_custom(&sc, exec)?;
                (art, Some(state))
            };
            for line in &art.log {
                println!("{line}");
            }
            for c in &art.checks {
                println!("[{}] {} -- {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if let Some(dir) = &out_dir {
                bvxl::experiment::write_artifacts(&art, dir)?;
                if let Some(state) = &final_state {
                    bvxl::snapshot::save_snapshot(state, &dir.join("final.bvxl"))?;
                }
                println!("artifacts written to {}", dir.display());
            }
            if opts.assert && !art.all_passed() {
                return Ok(ExitCode::from(4));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { criterion, opts } => {
            let exec = exec_for(opts.threads);
            let ids: Vec<usize> = match criterion {
                Some(id) => vec![id],
                None => bvxl::acceptance::CRITERIA.iter().map(|(i, _)| *i).collect(),
            };
            let mut all = true;
            for id in ids {
                let res = bvxl::acceptance::run_criterion(id, opts.seed, exec)?;
                println!("{}", res.summary());
                all &= res.passed();
            }
            if all {
                println!("acceptance: PASS");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("acceptance: FAIL");
                Ok(ExitCode::from(4))
            }
        }
        Command::Inspect { path } => {
            let exec = exec_for(0);
            let state = bvxl::snapshot::load_snapshot(&path, exec)?;
            let g = &state.v.domain.grid;
            println!("snapshot: {}", path.display());
            println!(
                "grid: L = {}, N = {}, Nv = {}, bc = {}, dealias = {}/{}",
                g.spec.l,
                g.spec.n,
                g.spec.nv,
                g.spec.bc.as_str(),
                g.spec.dealias_fraction.0,
                g.spec.dealias_fraction.1
            );
            println!(
                "physics: Omega = {}, Gamma = {}, nu = {}",
                state.params.omega, state.params.gamma, state.params.nu
            );
            println!("t = {}", state.t);
            println!("formulation: {:?}", state.formulation);
            if let Some(bg) = &state.background {
                println!(
                    "background: A = {}, B1 = {}, B2 = {}, Gamma = {}",
                    bg.a, bg.b1, bg.b2, bg.gamma
                );
            }
            let total = state.v.l2sq().sqrt();
            let q = bvxl::field::vertical_mean(&state.v).l2sq().sqrt();
            let tilde = bvxl::field::baroclinic_part(&state.v).l2sq().sqrt();
            let m = state.moments();
            println!("L2: total = {total:.6e}, barotropic = {q:.6e}, baroclinic = {tilde:.6e}");
            println!("moments: A = {:.6e}, B1 = {:.6e}, B2 = {:.6e}", m.a, m.b1, m.b2);
            Ok(ExitCode::SUCCESS)
        }
    }
}
