use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use entecho_cli::output::TransitionRow;
use entecho_cli::{
    run_config, run_loschmidt, run_oracle_check, run_transitions, CliError, Config, RunOptions,
};

#[derive(Parser)]
#[command(name = "entecho", version, about = "Entanglement and Loschmidt echoes after quenches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; overrides `threads`.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for random mass profiles; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Entanglement echo, spectrum and transitions of every subsystem.
    Quench(Common),
    /// Loschmidt rate of the whole system and its cusps.
    Loschmidt(Common),
    /// Compare against exact many-body states (at most 8 sites).
    OracleCheck(Common),
    /// Re-run detection on a series (or blocks) file written by `quench`.
    Transitions {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        series: PathBuf,
        /// Subsystem name; defaults to the first one.
        #[arg(long)]
        subsystem: Option<String>,
    },
}

fn options(common: &Common, config: &Config) -> RunOptions {
    RunOptions {
        out_dir: Some(
            common
                .out_dir
                .clone()
                .or_else(|| config.output.dir.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
        ),
        threads: common.threads,
        seed: common.seed,
    }
}

fn print_events(rows: &[TransitionRow]) {
    for r in rows {
        let ky = r.ky.map(|k| format!(" ky={k:.4}")).unwrap_or_default();
        println!("  {:<12} t={:.5}{ky} {}{}", r.kind, r.t_c, r.crossing_levels, r.note);
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Quench(common) => {
            let config = Config::load(&common.config)?;
            let out = run_config(&config, &options(&common, &config))?;
            for run in &out.runs {
                println!("{}", run.bundle.label);
                let mut rows: Vec<TransitionRow> =
                    run.events().iter().map(TransitionRow::from).collect();
                rows.extend(
                    run.unclassified
                        .iter()
                        .map(|(ky, u)| TransitionRow::unclassified(u, *ky)),
                );
                rows.sort_by(|a, b| a.t_c.total_cmp(&b.t_c));
                print_events(&rows);
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Loschmidt(common) => {
            let config = Config::load(&common.config)?;
            let out = run_loschmidt(&config, &options(&common, &config))?;
            let rows: Vec<TransitionRow> = out.events.iter().map(TransitionRow::from).collect();
            print_events(&rows);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::OracleCheck(common) => {
            let config = Config::load(&common.config)?;
            let report = run_oracle_check(&config, &options(&common, &config))?;
            for r in &report.rows {
                let verdict = if r.pass { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {:<15} {:<6} max deviation {:.3e} (tolerance {:.0e})",
                    r.quantity, r.subsystem, r.max_deviation, r.tolerance
                );
            }
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if !report.passed() {
                return Err(CliError::OracleMismatch);
            }
        }
        Command::Transitions {
            common,
            series,
            subsystem,
        } => {
            let config = Config::load(&common.config)?;
            let out = run_transitions(
                &config,
                &series,
                subsystem.as_deref(),
                &options(&common, &config),
            )?;
            let mut rows: Vec<TransitionRow> = out.events.iter().map(TransitionRow::from).collect();
            rows.extend(
                out.unclassified
                    .iter()
                    .map(|(ky, u)| TransitionRow::unclassified(u, *ky)),
            );
            rows.sort_by(|a, b| a.t_c.total_cmp(&b.t_c));
            print_events(&rows);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
