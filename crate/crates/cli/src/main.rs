//! `atomion`: distance scans, coupling tables and quasienergy spectra for an
//! atom next to an rf-trapped ion.
//!
//! Exit codes: 0 success, 2 configuration, 3 numerical failure, 4 out of scope.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::run::CliError;

#[derive(Parser, Debug)]
#[command(name = "atomion", version, about = "Quasienergy spectra and micromotion couplings of a trapped atom-ion pair")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// `key = value` file applied on top of the built-in Ba⁺/Rb configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Smallest trap distance [l_i]
    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    pub d_min: f64,
    #[arg(long, global = true, default_value_t = 10.0)]
    pub d_max: f64,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub d_step: f64,
    /// Number of unperturbed states kept
    #[arg(long, global = true, default_value_t = 150)]
    pub ne: usize,
    /// Floquet modes on each side of k = 0
    #[arg(long, global = true, default_value_t = 10)]
    pub nf: usize,
    /// Propagator step as a fraction of the drive period
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub dt: f64,
    /// Gap / coupling threshold [ħω₀]; defaults depend on the command
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Where solved bases are kept between runs
    #[arg(long, global = true, default_value = ".atomion-cache")]
    pub cache_dir: PathBuf,
    /// Fail instead of solving when the basis is not cached
    #[arg(long, global = true)]
    pub no_compute: bool,
    /// Ignore any cached basis and solve again
    #[arg(long, global = true, conflicts_with = "no_compute")]
    pub recompute: bool,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Static,
    Floquet,
    Propagator,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuasiEngine {
    Floquet,
    Propagator,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Static or quasienergy spectrum over the distance grid
    Spectrum {
        #[arg(long, value_enum, default_value = "static")]
        engine: Engine,
        /// Keep only the cos 2ωτ term of the micromotion
        #[arg(long)]
        first_term_only: bool,
        /// Centre of the reported quasienergy zone [ħω₀]
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        zone_center: f64,
        /// Lowest-|ε| classes compared when --engine both
        #[arg(long, default_value_t = 20)]
        compare: usize,
    },
    /// Ground-level coupling strengths |⟨0|V|n⟩| over the distance grid
    Couplings {
        #[arg(long, default_value_t = -5, allow_negative_numbers = true)]
        n_min: i64,
        #[arg(long, default_value_t = 110)]
        n_max: i64,
    },
    /// ω and 2ω resonances of the ground level
    Resonances,
    /// Avoided crossings of the quasienergy spectrum with Landau-Zener estimates
    Crossings {
        #[arg(long, value_enum, default_value = "propagator")]
        engine: QuasiEngine,
        #[arg(long)]
        first_term_only: bool,
        /// Reference ramp rate dd/dτ [l_i per ω₀⁻¹]
        #[arg(long, default_value_t = 1e-3)]
        rate: f64,
    },
    /// Exact single-ion Floquet states: quasienergies, kinetic energies, x_p(t)
    SingleIon {
        /// Number of levels tabulated
        #[arg(long, default_value_t = 6)]
        levels: usize,
        /// Samples of x_p over one drive period
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Fourier cut-off of the Mathieu solution
        #[arg(long, default_value_t = atomion::single_ion::DEFAULT_NM)]
        nm: usize,
    },
    /// Phase-gate fidelity for given excited-branch phase differences
    Fidelity {
        /// α_k = θ′_k − θ_k for k = 00, 01, 10, 11 [rad]
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        alpha: Vec<f64>,
        /// Excited-branch occupancy
        #[arg(long)]
        p_e: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Spectrum { engine, first_term_only, zone_center, compare } => {
            commands::spectrum(&cli.common, engine, first_term_only, zone_center, compare)
        }
        Cmd::Couplings { n_min, n_max } => commands::couplings(&cli.common, n_min, n_max),
        Cmd::Resonances => commands::resonances(&cli.common),
        Cmd::Crossings { engine, first_term_only, rate } => commands::crossings(&cli.common, engine, first_term_only, rate),
        Cmd::SingleIon { levels, samples, nm } => commands::single_ion(&cli.common, levels, samples, nm),
        Cmd::Fidelity { alpha, p_e } => commands::fidelity(&cli.common, &alpha, p_e),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("atomion: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    use atomion::Error as E;
    match e {
        CliError::Core(E::Config(_) | E::Usage(_) | E::Domain(_) | E::UnstableTrap(_) | E::MathieuUnstable(_)) => 2,
        CliError::Core(E::Scope(_)) | CliError::Scope(_) => 4,
        CliError::Core(E::Io(_)) | CliError::Io { .. } | CliError::Csv(_) => 1,
        CliError::Core(_) => 3,
        CliError::CacheMiss(_) | CliError::Config(_) => 2,
    }
}
