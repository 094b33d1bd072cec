use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rzeh_cli::commands::{self, Figure, SimulateOptions, VerifyOptions};
use rzeh_cli::table::Table;
use rzeh_cli::{load_config, parse_grid, CliError, CliResult};

/// Robust Epstein-Zin consumption and investment under Heston volatility.
#[derive(Parser, Debug)]
#[command(name = "rzeh", version, about)]
struct Cli {
    /// Parameter file (`key = value` lines). Defaults to the baseline set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV output. Without it, tables go to stdout
    /// (`figures` writes to the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// Suppress progress and warnings on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print derived constants and the validation report.
    Validate,
    /// Tabulate the closed-form solution on a (t, y) grid.
    Solve {
        /// Single evaluation time; defaults to the config's t0.
        #[arg(long = "t")]
        t: Option<f64>,
        /// Time grid `min:max:n`; overrides --t.
        #[arg(long)]
        grid_t: Option<String>,
        /// Variance grid `min:max:n`.
        #[arg(long, default_value = "0.0025:0.25:100")]
        grid_y: String,
    },
    /// Write the figure tables.
    Figures {
        /// Which figure; all of them when omitted.
        #[arg(long, value_enum)]
        which: Option<Which>,
    },
    /// Monte Carlo checks of the closed form.
    Simulate {
        /// Number of paths (antithetic pairs count as two).
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        /// Euler step, at most 0.01.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Stop the Feynman-Kac window this long before the horizon.
        #[arg(long, default_value_t = 0.05)]
        cutoff: f64,
        /// Write the simulated paths to this binary file.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Record every N steps in the dump (0: endpoints only).
        #[arg(long, default_value_t = 0)]
        record_stride: usize,
    },
    /// Cross-check the closed form against the RK4, PDE, HJBI and saddle oracles.
    Verify {
        #[arg(long, default_value_t = 1e-8)]
        tol_ode: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol_pde: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol_residual: f64,
        /// Multiply the derived b by this factor before checking.
        #[arg(long, hide = true)]
        corrupt_b: Option<f64>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Which {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "gamma-sweep")]
    GammaSweep,
}

impl From<Which> for Figure {
    fn from(w: Which) -> Self {
        match w {
            Which::One => Figure::Portfolio,
            Which::Two => Figure::PortfolioOverTime,
            Which::Three => Figure::Consumption,
            Which::GammaSweep => Figure::GammaSweep,
        }
    }
}

struct Output<'a> {
    dir: Option<&'a Path>,
    quiet: bool,
}

impl Output<'_> {
    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Writes `table` to `dir/name`, or to stdout without a directory.
    fn emit(&self, name: &str, table: &Table, default_dir: Option<&Path>) -> CliResult<()> {
        match self.dir.or(default_dir) {
            Some(dir) => {
                std::fs::create_dir_all(dir)
                    .and_then(|_| table.write(&dir.join(name)))
                    .map_err(|e| CliError::Input(format!("cannot write {}: {e}", dir.join(name).display())))?;
                self.note(&format!("wrote {}", dir.join(name).display()));
            }
            None => print!("{}", table.render()),
        }
        Ok(())
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let out = Output {
        dir: cli.out.as_deref(),
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Validate => {
            let (report, ok) = commands::validate(&cfg);
            print!("{report}");
            if !ok {
                return Err(CliError::CheckFailed("validation failed".into()));
            }
        }
        Command::Solve { t, grid_t, grid_y } => {
            let ts = match (grid_t, t) {
                (Some(g), _) => parse_grid(g)?,
                (None, Some(t)) => vec![*t],
                (None, None) => vec![cfg.params.t0],
            };
            let table = commands::solve(&cfg, &ts, &parse_grid(grid_y)?)?;
            out.emit("solve.csv", &table, None)?;
        }
        Command::Figures { which } => {
            let figures: Vec<Figure> = match which {
                Some(w) => vec![(*w).into()],
                None => Figure::ALL.to_vec(),
            };
            for f in figures {
                let (table, warnings) = commands::figure(&cfg, f)?;
                for w in warnings {
                    out.note(&format!("warning: {w}"));
                }
                out.emit(f.file_name(), &table, Some(Path::new(".")))?;
            }
        }
        Command::Simulate {
            paths,
            dt,
            cutoff,
            dump,
            record_stride,
        } => {
            let opts = SimulateOptions {
                paths: *paths,
                dt: *dt,
                seed: cli.seed,
                cutoff: *cutoff,
                record_stride: *record_stride,
                ..SimulateOptions::default()
            };
            out.note(&format!("simulating {paths} paths with dt = {dt}"));
            let table = commands::simulate(&cfg, &opts, dump.as_deref())?;
            out.emit("simulate.csv", &table, None)?;
        }
        Command::Verify {
            tol_ode,
            tol_pde,
            tol_residual,
            corrupt_b,
        } => {
            let opts = VerifyOptions {
                tol_ode: *tol_ode,
                tol_pde: *tol_pde,
                tol_residual: *tol_residual,
                seed: cli.seed,
                corrupt_b: *corrupt_b,
                ..VerifyOptions::default()
            };
            let (table, failure) = commands::verify(&cfg, &opts)?;
            out.emit("verify.csv", &table, None)?;
            if let Some(f) = failure {
                return Err(CliError::CheckFailed(format!("verification failed: {f}")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Failures are always reported, even with --quiet.
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
