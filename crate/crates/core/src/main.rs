use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use susyflow::config::RunConfig;
use susyflow::integrator::{run, CsvObserver, DiagnosticsRecord, Outcome, RunObserver};
use susyflow::snapshot::{self, SnapshotHeader};
use susyflow::spectral::SpectralGrid;
use susyflow::state::{make_initial_data, sobolev_report, FieldState};
use susyflow::verify::{run_suite, Suite};
use susyflow::{Error, Result};

const EXIT_BLOWUP: u8 = 2;
const EXIT_USAGE: u8 = 1;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "susyflow", version, about = "Pseudo-spectral evolution of the bosonic N=1 gauge system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial data described by a TOML configuration.
    Run { config: PathBuf },
    /// Run a certification suite and print a JSON report.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
    },
    /// Print a snapshot header and the Sobolev norms of the stored state.
    Inspect { snapshot: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Kahler,
    Constraint,
    Lipschitz,
    Convergence,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::Kahler => Suite::Kahler,
            SuiteArg::Constraint => Suite::Constraint,
            SuiteArg::Lipschitz => Suite::Lipschitz,
            SuiteArg::Convergence => Suite::Convergence,
            SuiteArg::All => Suite::All,
        }
    }
}

struct RunWriter<'a> {
    csv: CsvObserver<BufWriter<File>>,
    dir: PathBuf,
    every: usize,
    prefix: String,
    label: String,
    grid: &'a SpectralGrid,
}

impl RunObserver for RunWriter<'_> {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        self.csv.record(rec)
    }

    fn state(&mut self, step: usize, state: &FieldState) -> Result<()> {
        if self.every > 0 && step.is_multiple_of(self.every) {
            let path = self.dir.join(format!("{}_{step:06}.bin", self.prefix));
            snapshot::save(&path, &SnapshotHeader::for_state(state, self.grid, step, &self.label), state)?;
        }
        Ok(())
    }
}

fn cmd_run(path: &Path) -> Result<u8> {
    let cfg = RunConfig::load(path)?;
    let model = cfg.build_model()?;
    let grid = cfg.grid()?;
    let (state0, init) = make_initial_data(&model, &grid, &cfg.init())?;
    for w in &init.warnings {
        log::warn!("{w}");
    }
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    let csv = CsvObserver::new(BufWriter::new(File::create(dir.join(&cfg.output.diagnostics))?))?;
    let mut writer = RunWriter {
        csv,
        dir: dir.clone(),
        every: cfg.output.snapshot_every,
        prefix: cfg.output.snapshot_prefix.clone(),
        label: cfg.name.clone(),
        grid: &grid,
    };
    info!("running `{}` to t = {} on {}³", cfg.name, cfg.integrator.t_end, grid.n());
    let result = run(&state0, &model, &grid, &cfg.integrator(), cfg.integrator.t_end, &mut writer)?;
    std::io::Write::flush(&mut writer.csv.into_inner())?;
    let steps = result.norm_trajectory.len() - 1;
    let final_path = dir.join(format!("{}_final.bin", cfg.output.snapshot_prefix));
    snapshot::save(&final_path, &SnapshotHeader::for_state(&result.final_state, &grid, steps, &cfg.name), &result.final_state)?;
    match &result.outcome {
        Outcome::Completed => {
            let last = result.records.last().expect("initial record");
            println!(
                "completed t = {} after {steps} steps; ‖u‖ = {:.6e}, ‖𝒞‖ = {:.3e}, energy = {:.6e}",
                last.t, last.norms.composite, last.constraint_l2, last.energy
            );
            Ok(0)
        }
        Outcome::BlowUp { t_max, reason } => {
            println!("blow-up detected at t = {t_max} after {steps} steps: {reason}");
            Ok(EXIT_BLOWUP)
        }
    }
}

fn cmd_verify(suite: Suite) -> Result<u8> {
    let reports = run_suite(suite)?;
    println!("{}", serde_json::to_string_pretty(&reports).map_err(|e| Error::Config(e.to_string()))?);
    Ok(if reports.iter().all(|r| r.passed) { 0 } else { EXIT_VERIFY })
}

fn cmd_inspect(path: &Path) -> Result<u8> {
    let (header, state) = snapshot::load(path)?;
    let grid = SpectralGrid::new(header.n, header.box_length)?;
    println!("{}", serde_json::to_string_pretty(&header).map_err(|e| Error::Snapshot(e.to_string()))?);
    let r = sobolev_report(&state, &grid);
    println!("norm      {:.12e}", r.composite);
    for (name, h1, h2) in [("A", r.a_h1, r.a_h2), ("E", r.e_h1, r.e_h2), ("phi", r.phi_h1, r.phi_h2), ("pi", r.pi_h1, r.pi_h2)] {
        println!("{name:<4} H1 {h1:.12e}  H2 {h2:.12e}");
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Verify { suite } => cmd_verify((*suite).into()),
        Command::Inspect { snapshot } => cmd_inspect(snapshot),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
