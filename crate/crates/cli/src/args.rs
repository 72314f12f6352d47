use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "cscavity", version, about = "Coherent-scattering cavity optomechanics: spectra, mode rotation and fits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Derived constants, mean field, couplings and corrected frequencies.
    Derive(DeriveArgs),
    /// Full linear-theory PSDs and cross-spectra for one or more trap positions.
    Spectra(SpectraArgs),
    /// Mode-rotation angle and corrected frequencies over a trap-position sweep.
    Rotation(RotationArgs),
    /// Cancellation point over a (kappa, detuning) grid.
    PhicMap(PhicMapArgs),
    /// Peak fits and mode-angle extraction from spectra files.
    Fit(FitArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Common {
    /// JSON configuration; the built-in reference configuration if omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "cscavity-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DeriveArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpectraArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trap positions as phi/2pi in [0, 0.25], comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0.25")]
    pub phi: Vec<f64>,
    /// Detuning Delta/2pi [Hz]; overrides the config.
    #[arg(long, allow_negative_numbers = true)]
    pub detuning: Option<f64>,
    /// Number of uniform grid points.
    #[arg(long, default_value_t = 4001)]
    pub grid: usize,
    /// Add dense sampling around the expected peaks.
    #[arg(long)]
    pub refine: bool,
    /// Emit a gnuplot script next to the data.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RotationArgs {
    #[command(flatten)]
    pub common: Common,
    /// `start:stop:count` or a comma-separated list, in phi/2pi.
    #[arg(long, default_value = "0.25:0:51", allow_hyphen_values = true)]
    pub phi_sweep: String,
    /// Detuning Delta/2pi [Hz]; overrides the config.
    #[arg(long, allow_negative_numbers = true)]
    pub detuning: Option<f64>,
    /// Include the backaction prefactors M_j in the per-peak angles.
    #[arg(long)]
    pub full_backaction: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PhicMapArgs {
    /// Output directory.
    #[arg(long, default_value = "cscavity-out")]
    pub out: PathBuf,
    /// kappa/2pi range `lo:hi` [Hz].
    #[arg(long, default_value = "10e3:1.2e6")]
    pub kappa_range: String,
    /// Delta/2pi range `lo:hi` [Hz].
    #[arg(long, default_value = "-600e3:0", allow_hyphen_values = true)]
    pub delta_range: String,
    /// omega_y/2pi [Hz].
    #[arg(long, default_value_t = 136e3)]
    pub omega_y: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 201)]
    pub resolution: usize,
    /// Contour levels in phi_c/2pi, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub contours: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Output directory.
    #[arg(long, default_value = "cscavity-out")]
    pub out: PathBuf,
    /// Spectra CSV files (`omega_hz,sxx,syy,sxy`).
    #[arg(long, required = true, num_args = 1..)]
    pub spectra: Vec<PathBuf>,
    /// Fit windows `xlo:xhi,ylo:yhi` [Hz]; detected automatically if omitted.
    #[arg(long)]
    pub windows: Option<String>,
    /// Detector cross-talk angle [degrees] applied before extraction.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub crosstalk_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; the recorded one if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Derive(_) => "derive",
            Command::Spectra(_) => "spectra",
            Command::Rotation(_) => "rotation",
            Command::PhicMap(_) => "phic-map",
            Command::Fit(_) => "fit",
            Command::Replay(_) => "replay",
        }
    }

    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::Derive(a) => Some(&a.common.out),
            Command::Spectra(a) => Some(&a.common.out),
            Command::Rotation(a) => Some(&a.common.out),
            Command::PhicMap(a) => Some(&a.out),
            Command::Fit(a) => Some(&a.out),
            Command::Replay(_) => None,
        }
    }

    pub fn set_out_dir(&mut self, out: PathBuf) {
        match self {
            Command::Derive(a) => a.common.out = out,
            Command::Spectra(a) => a.common.out = out,
            Command::Rotation(a) => a.common.out = out,
            Command::PhicMap(a) => a.out = out,
            Command::Fit(a) => a.out = out,
            Command::Replay(_) => {}
        }
    }
}
