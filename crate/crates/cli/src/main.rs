use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bonus_malus::config::{Tariff, TariffConfig};
use bonus_malus::deductible::{indifference_rhs_unchecked, validate_schedule};
use bonus_malus::report::{
    read_schedule_csv, simulation_table, tariff_table, validation_table, Table,
};
use bonus_malus::simulate::simulate_portfolio;
use bonus_malus::tables::{render, TABLES};
use bonus_malus::Error;
use clap::{Args, Parser, Subcommand};

/// Bonus-malus tariffs with level-dependent per-claim deductibles.
#[derive(Parser)]
#[command(name = "bonus-malus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Output {
    /// Directory for CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write CSV numbers at full precision instead of four decimals.
    #[arg(long)]
    full_precision: bool,
    /// Override the quadrature order of the steady-state integrals.
    #[arg(long)]
    quadrature_order: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state proportions, relativities and premiums.
    Relativities {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Relativities plus the configured deductible allocation.
    Allocate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Checks a deductible schedule CSV against the tariff.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// CSV with columns l, alpha, d_0..d_m (extra columns ignored).
        #[arg(long)]
        schedule: PathBuf,
        /// Largest accepted indifference residual; defaults to numerics.residual_tol.
        #[arg(long)]
        residual_tol: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo check of the steady state and deductible recoveries.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Rebuilds the twelve reference tables.
    Tables {
        /// Only this table (1-12).
        #[arg(long)]
        number: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
}

/// A failure that carries its exit status.
enum Failure {
    Module(Error),
    Io(String),
    Rejected(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Module(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load(config: &Path, output: &Output) -> std::result::Result<Tariff, Failure> {
    let mut cfg = TariffConfig::from_path(config)?;
    if let Some(order) = output.quadrature_order {
        cfg.numerics.quadrature_order = order;
        cfg.validate()?;
    }
    Ok(Tariff::new(cfg)?)
}

fn emit(table: &Table, name: &str, output: &Output) -> Outcome {
    print!("{}", table.to_text(false));
    if let Some(dir) = &output.out {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        fs::write(&path, table.to_csv(output.full_precision)?)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Relativities { config, output } => {
            let t = load(&config, &output)?;
            emit(
                &tariff_table(&t.profile, t.mean_claim(), None),
                "relativities.csv",
                &output,
            )
        }
        Command::Allocate { config, output } => {
            let t = load(&config, &output)?;
            let a = t.allocate()?;
            emit(
                &tariff_table(&t.profile, t.mean_claim(), Some(&a.schedule)),
                "allocation.csv",
                &output,
            )?;
            if let Some((x, x0)) = a.proportional {
                println!("x = {x:.6}, x0 = {x0:.6}");
            }
            Ok(())
        }
        Command::Validate {
            config,
            schedule,
            residual_tol,
            output,
        } => {
            let t = load(&config, &output)?;
            let file = fs::File::open(&schedule)
                .map_err(|e| Failure::Io(format!("{}: {e}", schedule.display())))?;
            let s = read_schedule_csv(file, t.partition.num_types(), &t.profile.relativities)?;
            let tol = residual_tol.unwrap_or(t.config.numerics.residual_tol);
            let report =
                validate_schedule(&s, &t.profile.relativities, &t.model, &t.partition, tol)?;
            emit(&validation_table(&report), "validation.csv", &output)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Rejected(report.failures()))
            }
        }
        Command::Simulate {
            config,
            seed,
            output,
        } => {
            let t = load(&config, &output)?;
            let mut sim = t.config.simulation.clone().unwrap_or_default();
            if let Some(seed) = seed {
                sim.seed = seed;
            }
            let schedule = match t.config.deductible {
                Some(_) => Some(t.allocate()?.schedule),
                None => None,
            };
            let report = simulate_portfolio(
                &sim,
                t.config.lambda,
                &t.rules,
                &t.partition,
                &t.model,
                &t.config.mixing,
                schedule.as_ref(),
            )?;
            let expected: Vec<f64> = schedule
                .iter()
                .flat_map(|s| {
                    (s.malus_entry()..=s.top()).map(|l| {
                        t.profile.premium(l, 1.0)
                            * indifference_rhs_unchecked(
                                &t.model,
                                &t.partition,
                                s.row(l).unwrap_or_default(),
                            )
                    })
                })
                .collect();
            emit(
                &simulation_table(&report, &t.profile, &expected),
                "simulation.csv",
                &output,
            )?;
            println!(
                "policies = {}, burn-in = {}, sample years = {}, seed = {}",
                sim.n_policies, sim.burn_in_years, sim.sample_years, sim.seed
            );
            Ok(())
        }
        Command::Tables { number, output } => {
            let selected: Vec<_> = TABLES
                .iter()
                .filter(|t| number.is_none_or(|n| n == t.number))
                .collect();
            if selected.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "no reference table {}; tables are 1-12",
                    number.unwrap_or_default()
                ))
                .into());
            }
            for (k, reference) in selected.iter().enumerate() {
                if k > 0 {
                    println!();
                }
                println!("Table {}: {}", reference.number, reference.caption);
                let rendered = render(reference.number, output.quadrature_order)?;
                emit(&rendered.table, &reference.file_name(), &output)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected(failures)) => {
            eprintln!("error[schedule_rejected]: {}", failures.join("; "));
            ExitCode::from(1)
        }
        Err(Failure::Module(e)) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error[io]: {msg}");
            ExitCode::from(2)
        }
    }
}
