use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eigsgd::config::{parse_config, ExperimentConfig, FigurePreset, Scale};
use eigsgd::experiment::{resolve_out_dir, run_experiment};
use eigsgd::output::{problem_tables, write_files, Table};
use eigsgd::phase::{detect_phase_transition, DEFAULT_MARGIN};
use eigsgd::{compute_constants, schedule, Error, Method, Result};

#[derive(Parser)]
#[command(name = "eigsgd", version, about = "Eigencomponent convergence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config and write ensemble/theory CSVs, plot script and manifest.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "paper")]
        scale: Scale,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a figure preset as a config file, or run it with --run.
    Preset {
        /// fig1 .. fig8
        name: String,
        #[arg(long, default_value = "paper")]
        scale: Scale,
        #[arg(long)]
        run: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a config, build its problem and print schedule diagnostics.
    Validate {
        config: PathBuf,
        #[arg(long, default_value = "paper")]
        scale: Scale,
    },
    /// Write A, b, sigma and x_star as CSV.
    DumpProblem {
        config: PathBuf,
        #[arg(long, default_value = "paper")]
        scale: Scale,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare log-log slopes of a CSV column over two iteration windows.
    Phase {
        csv: PathBuf,
        /// Early window `A:B` (inclusive iterations)
        #[arg(long, value_parser = parse_window)]
        early: (f64, f64),
        /// Late window `C:D`
        #[arg(long, value_parser = parse_window)]
        late: (f64, f64),
        #[arg(long, default_value = "norm_sq")]
        column: String,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        /// Fit |value| instead of the raw value.
        #[arg(long)]
        abs: bool,
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:END, got `{s}`"))?;
    let p = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|_| format!("not a number: `{x}`"))
    };
    Ok((p(a)?, p(b)?))
}

fn load(path: &Path, scale: Scale) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text)?.at_scale(scale)
}

fn run_and_report(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<()> {
    let dir = resolve_out_dir(out, cfg);
    let bundle = run_experiment(cfg, &dir)?;
    for w in &bundle.manifest.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} files to {}", bundle.files.len(), dir.display());
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, scale, out } => run_and_report(&load(&config, scale)?, out.as_deref()),
        Command::Preset {
            name,
            scale,
            run,
            out,
        } => {
            let cfg = name.parse::<FigurePreset>()?.config().at_scale(scale)?;
            if run {
                run_and_report(&cfg, out.as_deref())
            } else {
                print!("{}", cfg.to_toml());
                Ok(())
            }
        }
        Command::Validate { config, scale } => {
            let cfg = load(&config, scale)?;
            let p = cfg.build_problem()?;
            let c = compute_constants(&p);
            println!(
                "ok: {}x{} {} problem, digest {}",
                p.rows(),
                p.cols(),
                if p.is_consistent() { "consistent" } else { "inconsistent" },
                p.digest()
            );
            println!(
                "M L~ = {:.6e}, c(A) = {:.6e}, F* = {:.6e}, sigma^2 = {:.6e}",
                c.rows as f64 * c.l_tilde,
                c.c_a,
                c.f_star,
                c.sigma_noise_sq
            );
            if let (Some(s), Method::Sgd) = (&cfg.schedule, cfg.method.kind) {
                for d in schedule::validate(s, &c, cfg.run.iters) {
                    println!("warning: {d}");
                }
            }
            Ok(())
        }
        Command::DumpProblem { config, scale, out } => {
            let cfg = load(&config, scale)?;
            let p = cfg.build_problem()?;
            let dir = resolve_out_dir(out.as_deref(), &cfg);
            let files = problem_tables(&p)
                .into_iter()
                .map(|(n, t)| Ok((n.to_string(), t.to_bytes()?)))
                .collect::<Result<Vec<_>>>()?;
            write_files(&dir, &files)?;
            println!("wrote problem {} to {}", p.digest(), dir.display());
            Ok(())
        }
        Command::Phase {
            csv,
            early,
            late,
            column,
            margin,
            abs,
        } => {
            let t = Table::read(&csv)?;
            let values = t.column(&column).ok_or_else(|| {
                Error::Csv(format!("no column `{column}` in {}", csv.display()))
            })?;
            let series: Vec<(f64, f64)> = t
                .keys
                .iter()
                .zip(values)
                .map(|(&k, v)| (k as f64, if abs { v.abs() } else { v }))
                .collect();
            let r = detect_phase_transition(&series, early, late, margin)?;
            println!("slope_early = {:.6}", r.slope_early);
            println!("slope_late = {:.6}", r.slope_late);
            println!("margin = {}", r.margin);
            println!("transition_detected = {}", r.transition_detected);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
