use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tangent_plane_llg::config::{print_config_schema, ExperimentConfig};
use tangent_plane_llg::diagnostics::check_suite;
use tangent_plane_llg::experiment::{exit_code, run_experiment, RunPaths};
use tangent_plane_llg::precond::PrecondKind;
use tangent_plane_llg::tangent::{FrameStrategy, TnChoice};
use tangent_plane_llg::Error;

#[derive(Parser)]
#[command(name = "tangent-plane-llg", version, about = "Tangent plane LLG simulations with preconditioned GMRES")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration (including its sweep).
    Run(RunArgs),
    /// Print the JSON schema of the configuration file.
    Schema,
    /// Run the built-in numerical self-checks.
    Check {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory (overrides `out_dir`; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_precond)]
    precond: Option<PrecondKind>,
    #[arg(long)]
    alpha_p: Option<f64>,
    #[arg(long)]
    precond_rebuild_every: Option<usize>,
    /// `adaptive` or one of t1+, t1-, t2+, t2-, t3+, t3-.
    #[arg(long, value_parser = parse_tn)]
    tn: Option<TnChoice>,
    #[arg(long, value_parser = parse_frame)]
    frame: Option<FrameStrategy>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    restart: Option<usize>,
    #[arg(long)]
    maxit: Option<usize>,
    /// Skip the nodal renormalization.
    #[arg(long)]
    no_projection: bool,
}

fn parse_precond(s: &str) -> Result<PrecondKind, String> {
    PrecondKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = PrecondKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown preconditioner {s:?} (expected one of {})", names.join(", "))
    })
}

fn parse_tn(s: &str) -> Result<TnChoice, String> {
    TnChoice::parse(s).ok_or_else(|| format!("unknown Tn mode {s:?}"))
}

fn parse_frame(s: &str) -> Result<FrameStrategy, String> {
    FrameStrategy::parse(s).ok_or_else(|| format!("unknown frame strategy {s:?}"))
}

fn apply_overrides(cfg: &mut ExperimentConfig, a: &RunArgs) {
    if let Some(k) = a.precond {
        cfg.precond.kind = k;
        if let Some(s) = cfg.sweep.as_mut() {
            s.precond = None;
        }
    }
    if let Some(v) = a.alpha_p {
        cfg.precond.alpha_p = v;
        if let Some(s) = cfg.sweep.as_mut() {
            s.alpha_p = None;
        }
    }
    if let Some(v) = a.precond_rebuild_every {
        cfg.precond.rebuild_every = v;
    }
    if let Some(t) = a.tn {
        cfg.frame.tn = t;
        if let Some(s) = cfg.sweep.as_mut() {
            s.tn = None;
        }
    }
    if let Some(f) = a.frame {
        cfg.frame.strategy = f;
    }
    if let Some(v) = a.tol {
        cfg.solver.tol = v;
    }
    if let Some(v) = a.restart {
        cfg.solver.restart = v;
    }
    if let Some(v) = a.maxit {
        cfg.solver.maxit = v;
    }
    if a.no_projection {
        cfg.projection = false;
    }
}

fn run(a: RunArgs) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::from_path(&a.config)?;
    apply_overrides(&mut cfg, &a);
    cfg.validate()?;
    let out_dir = a.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let paths = RunPaths { config_dir: a.config.parent().map(|p| p.to_path_buf()), out_dir };
    for row in run_experiment(&cfg, &paths)? {
        println!(
            "point {:>3}: precond={} alpha_p={} tn={} h={:.4} avg_iter={:.2} max_iter={} steps={} ({:.2}s)",
            row.index, row.precond, row.alpha_p, row.tn_mode, row.h, row.run.avg_iterations, row.run.max_iterations, row.run.steps, row.wall_time_s
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Schema => {
            println!("{}", print_config_schema());
            Ok(())
        }
        Command::Check { seed } => match check_suite(seed) {
            Ok(reports) => {
                let mut failed = 0;
                for r in &reports {
                    println!("{} {:<48} err={:.3e} (<= {:.1e})", if r.pass { "PASS" } else { "FAIL" }, r.check, r.max_error, r.threshold);
                    failed += usize::from(!r.pass);
                }
                if failed > 0 {
                    eprintln!("{failed} check(s) failed");
                    return ExitCode::from(3);
                }
                Ok(())
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
