//! Command-line front end for the mixed-numerology NOMA link simulator.
//!
//! Every subcommand runs one experiment from a [`Scenario`]: the scenario
//! starts from built-in defaults, is optionally replaced by a JSON config
//! file, and individual flags override individual fields last. Exit codes:
//! 0 on success, 1 when the validation suite fails or an artifact cannot be
//! written, 2 for configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mn_noma_core::experiment::{
    run_mse, run_se_vs_q, run_se_vs_snr, run_validate, Scenario, ValidationReport,
};
use mn_noma_core::Error;

// ---------------------------------------------------------------------------
// Argument tree
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "mn-noma",
    version,
    about = "Link simulator for two-user uplink NOMA with mixed OFDM numerologies",
    long_about = "Computes closed-form inter-numerology interference and achievable \
                  rates for a two-user uplink in which each user runs its own OFDM \
                  numerology on a shared band, and compares the superposed mixed-\
                  numerology scheme against single-numerology and orthogonal baselines."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-subcarrier interference power report for one channel draw
    Mse(RunArgs),
    /// Spectral-efficiency sweep across the SNR grid
    SeVsSnr(RunArgs),
    /// Spectral-efficiency sweep across user 2's numerology index
    SeVsQ(RunArgs),
    /// Internal consistency checks (closed form vs. time-domain simulation)
    Validate(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Mse(a) | Command::SeVsSnr(a) | Command::SeVsQ(a) | Command::Validate(a) => a,
        }
    }
}

/// Scenario overrides shared by every subcommand. Flags win over the config
/// file, which wins over built-in defaults.
#[derive(Args)]
struct RunArgs {
    /// JSON scenario file providing the baseline configuration
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed for all randomness
    #[arg(long)]
    seed: Option<u64>,

    /// Channel draws averaged per sweep point
    #[arg(long)]
    trials: Option<usize>,

    /// Directory the result files are written to
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Catalog index of user 1's numerology (finer spacing)
    #[arg(long, value_name = "IDX")]
    numerology_user1: Option<u32>,

    /// Catalog index of user 2's numerology (coarser spacing)
    #[arg(long, value_name = "IDX")]
    numerology_user2: Option<u32>,

    /// User 1's power-delay profile: EPA, EVA, FLAT, or a file path
    #[arg(long, value_name = "NAME")]
    profile_user1: Option<String>,

    /// User 2's power-delay profile
    #[arg(long, value_name = "NAME")]
    profile_user2: Option<String>,

    /// Comma-separated SNR grid in dB for the SNR sweep
    #[arg(long, value_name = "DB,..", value_delimiter = ',')]
    snr_db: Option<Vec<f64>>,

    /// Operating SNR in dB for the numerology sweep and reports
    #[arg(long, value_name = "DB")]
    sweep_snr_db: Option<f64>,

    /// Comma-separated user-2 indices for the numerology sweep
    #[arg(long, value_name = "IDX,..", value_delimiter = ',')]
    sweep_user2_indices: Option<Vec<u32>>,

    /// Grid step for the power-allocation scan
    #[arg(long, value_name = "STEP")]
    power_grid_step: Option<f64>,

    /// Guard width at the orthogonal baseline's boundary, in user-2 bins
    #[arg(long, value_name = "N")]
    guard_subcarriers: Option<usize>,

    /// Noise-free frames per Monte Carlo estimate during validation
    #[arg(long, value_name = "N")]
    validate_trials: Option<usize>,

    /// Sample-rate override in Hz
    #[arg(long, value_name = "HZ")]
    fs_hz: Option<f64>,

    /// Run single-numerology baselines on user 2's grid
    #[arg(long, value_name = "BOOL")]
    sn_on_user2_grid: Option<bool>,

    /// Treat the mixed-numerology partition as leakage-free
    #[arg(long, value_name = "BOOL")]
    ideal_oma: Option<bool>,

    /// Discount rates by cyclic-prefix air time
    #[arg(long, value_name = "BOOL")]
    cp_overhead: Option<bool>,
}

impl RunArgs {
    /// Build the effective scenario: defaults, then config file, then flags.
    fn scenario(&self) -> Result<Scenario, Error> {
        let mut s = match &self.config {
            Some(path) => Scenario::from_json_file(path)?,
            None => Scenario::default(),
        };
        macro_rules! set {
            ($($field:ident),+ $(,)?) => {
                $(if let Some(v) = self.$field.clone() { s.$field = v; })+
            };
        }
        set!(
            seed,
            trials,
            numerology_user1,
            numerology_user2,
            profile_user1,
            profile_user2,
            sweep_snr_db,
            sweep_user2_indices,
            power_grid_step,
            guard_subcarriers,
            validate_trials,
            sn_on_user2_grid,
            ideal_oma,
            cp_overhead,
        );
        if let Some(v) = self.snr_db.clone() {
            s.snr_db_list = v;
        }
        if let Some(v) = self.out.clone() {
            s.out_dir = v;
        }
        if let Some(v) = self.fs_hz {
            s.fs_hz = Some(v);
        }
        s.validate()?;
        Ok(s)
    }
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(command: &Command) -> Result<ExitCode, Error> {
    let scenario = command.args().scenario()?;
    match command {
        Command::Mse(_) => {
            let artifacts = run_mse(&scenario)?;
            println!(
                "interference report: numerologies ({}, {}), {} + {} victim bins",
                scenario.numerology_user1,
                scenario.numerology_user2,
                artifacts.gamma1.len(),
                artifacts.gamma2_per_m.first().map_or(0, Vec::len),
            );
            println!("wrote {}", artifacts.csv_path.display());
            println!("wrote {}", artifacts.per_m_csv_path.display());
            println!("wrote {}", artifacts.svg_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::SeVsSnr(_) => {
            let artifacts = run_se_vs_snr(&scenario)?;
            println!(
                "snr sweep: {} rows ({} SNR points x {} trials)",
                artifacts.rows.len(),
                scenario.snr_db_list.len(),
                scenario.trials,
            );
            print_sweep_paths(&artifacts.csv_path, &artifacts.mean_csv_path, &artifacts.svg_path);
            Ok(ExitCode::SUCCESS)
        }
        Command::SeVsQ(_) => {
            let artifacts = run_se_vs_q(&scenario)?;
            println!(
                "numerology sweep: {} rows ({} user-2 indices x {} trials at {} dB)",
                artifacts.rows.len(),
                scenario.sweep_indices().len(),
                scenario.trials,
                scenario.sweep_snr_db,
            );
            print_sweep_paths(&artifacts.csv_path, &artifacts.mean_csv_path, &artifacts.svg_path);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(_) => {
            let report = run_validate(&scenario)?;
            print_validation(&report);
            if report.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn print_sweep_paths(csv: &std::path::Path, mean_csv: &std::path::Path, svg: &std::path::Path) {
    println!("wrote {}", csv.display());
    println!("wrote {}", mean_csv.display());
    println!("wrote {}", svg.display());
}

fn print_validation(report: &ValidationReport) {
    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {:<22} measured {:>12.6e}  tolerance {:>12.6e}  {}",
            check.name, check.measured, check.tolerance, check.detail,
        );
    }
    println!("wrote {}", report.json_path.display());
    if report.passed {
        println!("validation passed ({} checks)", report.checks.len());
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        println!(
            "validation FAILED ({failed} of {} checks)",
            report.checks.len()
        );
    }
}
