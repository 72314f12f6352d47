use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cscavity_core::constants::{hz_to_rad, rad_to_hz};
use cscavity_core::couplings::frequency_cancellation;
use cscavity_core::extraction::{crosstalk, debias, default_windows, estimate_bias, extract_mode_angle};
use cscavity_core::io::{fmt_value, load_spectra, save_spectra, write_map_csv};
use cscavity_core::qlt::compute_spectra;
use cscavity_core::rotation::{cancellation_point, mode_angle, phic_map};
use cscavity_core::{
    AngleBias, AngleEstimate, Axis, Backaction, ExperimentConfig, FrequencyGrid, LinearModel, OperatingPoint,
    PeakFit, SpectraSet, Window,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Command, Common, DeriveArgs, FitArgs, PhicMapArgs, RotationArgs, SpectraArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

/// Files written by a command, plus the first per-point failure if any.
struct Outcome {
    outputs: Vec<PathBuf>,
    config: Option<ExperimentConfig>,
    failure: Option<CliError>,
}

/// Runs a parsed command. Replays re-run the recorded command with the
/// recorded configuration.
pub fn run(command: &Command) -> CliResult<()> {
    match command {
        Command::Replay(args) => {
            let manifest = RunManifest::read(&args.manifest)?;
            let mut recorded = manifest.command.clone();
            if let Some(out) = &args.out {
                recorded.set_out_dir(out.clone());
            }
            execute(&recorded, manifest.config.as_ref())
        }
        other => execute(other, None),
    }
}

fn execute(command: &Command, config: Option<&ExperimentConfig>) -> CliResult<()> {
    let start = Instant::now();
    let out = command
        .out_dir()
        .ok_or_else(|| CliError::validation("replay manifests cannot record another replay"))?
        .clone();
    fs::create_dir_all(&out).map_err(|e| CliError::at(&out, e))?;
    let outcome = match command {
        Command::Derive(a) => derive(a, config)?,
        Command::Spectra(a) => spectra(a, config)?,
        Command::Rotation(a) => rotation(a, config)?,
        Command::PhicMap(a) => phic(a)?,
        Command::Fit(a) => fit(a)?,
        Command::Replay(_) => unreachable!("handled in run"),
    };
    let manifest = RunManifest {
        command: command.clone(),
        config: outcome.config,
        outputs: outcome.outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    manifest.write(&RunManifest::path_for(&out, command.name()))?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn load_config(common: &Common, recorded: Option<&ExperimentConfig>) -> CliResult<ExperimentConfig> {
    let cfg = match (recorded, &common.config) {
        (Some(cfg), _) => cfg.clone(),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::at(path, e))?;
            ExperimentConfig::from_json(&text).map_err(|e| CliError::at(path, e))?
        }
        (None, None) => ExperimentConfig::reference(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: PathBuf, value: &impl Serialize) -> CliResult<PathBuf> {
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| CliError::at(&path, e))?;
    Ok(path)
}

fn write_text(path: PathBuf, text: &str) -> CliResult<PathBuf> {
    fs::write(&path, text).map_err(|e| CliError::at(&path, e))?;
    Ok(path)
}

/// Keeps the first failure for the exit status and prints the rest.
fn report_failure(first: &mut Option<CliError>, e: CliError) {
    match first {
        None => *first = Some(e),
        Some(_) => eprintln!("error: {}", e.message),
    }
}

fn check_phi_fraction(v: f64) -> CliResult<f64> {
    if !(0.0..=0.25).contains(&v) {
        return Err(CliError::validation(format!("phi/2pi = {v} lies outside [0, 0.25]")));
    }
    Ok(v * TAU)
}

#[derive(Serialize)]
struct DerivedReport {
    mass_kg: f64,
    polarizability: f64,
    tweezer_field_v_per_m: f64,
    cavity_field_v_per_m: f64,
    mode_volume_m3: f64,
    cavity_frequency_hz: f64,
    drive_rate_hz: f64,
    wavenumber_per_m: f64,
    omega0_x_hz: f64,
    omega0_y_hz: f64,
    x_zpf_m: f64,
    y_zpf_m: f64,
    fsr_hz: f64,
}

#[derive(Serialize)]
struct MeanFieldReport {
    alpha_r: f64,
    alpha_i: f64,
    n_photons: f64,
}

#[derive(Serialize)]
struct CouplingReport {
    g_x_hz: f64,
    g_y_hz: f64,
    g_xy_hz: f64,
}

#[derive(Serialize)]
struct FrequencyReport {
    cs_x: f64,
    cs_y: f64,
    os_x: f64,
    os_y: f64,
    omega_x_hz: f64,
    omega_y_hz: f64,
}

#[derive(Serialize)]
struct DeriveReport {
    config: ExperimentConfig,
    derived: DerivedReport,
    mean_field: MeanFieldReport,
    couplings: CouplingReport,
    frequencies: FrequencyReport,
    phi_c_over_2pi: Option<f64>,
}

fn derive(args: &DeriveArgs, recorded: Option<&ExperimentConfig>) -> CliResult<Outcome> {
    let cfg = load_config(&args.common, recorded)?;
    let p = OperatingPoint::new(&cfg)?;
    let d = &p.derived;
    let mf = &p.couplings.mean_field;
    let report = DeriveReport {
        config: cfg.clone(),
        derived: DerivedReport {
            mass_kg: d.mass,
            polarizability: d.polarizability,
            tweezer_field_v_per_m: d.tweezer_field,
            cavity_field_v_per_m: d.cavity_field,
            mode_volume_m3: d.mode_volume,
            cavity_frequency_hz: rad_to_hz(d.cavity_frequency),
            drive_rate_hz: rad_to_hz(d.drive_rate),
            wavenumber_per_m: d.wavenumber,
            omega0_x_hz: rad_to_hz(d.omega0_x),
            omega0_y_hz: rad_to_hz(d.omega0_y),
            x_zpf_m: d.x_zpf,
            y_zpf_m: d.y_zpf,
            fsr_hz: d.fsr_hz,
        },
        mean_field: MeanFieldReport {
            alpha_r: mf.alpha_r(),
            alpha_i: mf.alpha_i(),
            n_photons: mf.n_photons,
        },
        couplings: CouplingReport {
            g_x_hz: rad_to_hz(p.couplings.g_x),
            g_y_hz: rad_to_hz(p.couplings.g_y),
            g_xy_hz: rad_to_hz(p.couplings.g_xy),
        },
        frequencies: FrequencyReport {
            cs_x: p.shifts.cs_x,
            cs_y: p.shifts.cs_y,
            os_x: p.shifts.os_x,
            os_y: p.shifts.os_y,
            omega_x_hz: rad_to_hz(p.shifts.omega_x),
            omega_y_hz: rad_to_hz(p.shifts.omega_y),
        },
        phi_c_over_2pi: cancellation_point(cfg.kappa, cfg.detuning, d.omega0_y).map(|v| v / TAU),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    let path = write_json(args.common.out.join("derived.json"), &report)?;
    Ok(Outcome {
        outputs: vec![path],
        config: Some(cfg),
        failure: None,
    })
}

fn with_detuning(cfg: ExperimentConfig, detuning_hz: Option<f64>) -> CliResult<ExperimentConfig> {
    let cfg = match detuning_hz {
        Some(d) => cfg.with_detuning(hz_to_rad(d)),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn spectra_for(cfg: &ExperimentConfig, args: &SpectraArgs) -> CliResult<SpectraSet> {
    let p = OperatingPoint::new(cfg)?;
    let model = LinearModel::from_point(&p);
    let grid = if args.refine {
        model.adaptive_grid(args.grid)?
    } else {
        FrequencyGrid::with_points(&p.derived, args.grid)?
    };
    let mut s = compute_spectra(&grid, &model)?;
    s.metadata.config = Some(cfg.clone());
    Ok(s)
}

fn spectra(args: &SpectraArgs, recorded: Option<&ExperimentConfig>) -> CliResult<Outcome> {
    let cfg = with_detuning(load_config(&args.common, recorded)?, args.detuning)?;
    let phis = args
        .phi
        .iter()
        .map(|&v| check_phi_fraction(v))
        .collect::<CliResult<Vec<f64>>>()?;
    let results: Vec<CliResult<SpectraSet>> = phis
        .par_iter()
        .map(|&phi| spectra_for(&cfg.with_phi(phi), args))
        .collect();

    let out = &args.common.out;
    let mut outputs = Vec::new();
    let mut failure = None;
    let mut index = String::from("phi_over_2pi,file,omega_x_hz,omega_y_hz\n");
    let mut plot = Vec::new();
    for (v, result) in args.phi.iter().zip(results) {
        match result {
            Ok(s) => {
                for w in &s.metadata.warnings {
                    eprintln!("warning: phi/2pi = {v}: {w}");
                }
                let name = format!("spectra_phi_{v:.6}.csv");
                let (csv, side) = save_spectra(&out.join(&name), &s).map_err(|e| CliError::at(&out.join(&name), e))?;
                let p = OperatingPoint::new(&cfg.with_phi(v * TAU))?;
                index += &format!(
                    "{},{},{},{}\n",
                    fmt_value(*v),
                    name,
                    fmt_value(rad_to_hz(p.shifts.omega_x)),
                    fmt_value(rad_to_hz(p.shifts.omega_y))
                );
                outputs.push(csv);
                outputs.push(side);
                plot.push(format!("'{name}' using 1:4 with lines title 'phi/2pi = {v}'"));
            }
            Err(e) => {
                report_failure(&mut failure, e.context(&format!("phi/2pi = {v}")));
            }
        }
    }
    outputs.push(write_text(out.join("spectra_index.csv"), &index)?);
    if args.plot {
        let script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'frequency [Hz]'\n\
             set ylabel 'S_xy [m^2/Hz]'\nplot {}\n",
            plot.join(", \\\n     ")
        );
        outputs.push(write_text(out.join("spectra.gp"), &script)?);
    }
    Ok(Outcome {
        outputs,
        config: Some(cfg),
        failure,
    })
}

/// `start:stop:count` (inclusive) or a comma-separated list.
pub fn parse_sweep(text: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::validation(format!("malformed sweep `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, b, n] => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            match n {
                0 => Err(bad()),
                1 => Ok(vec![a]),
                _ => Ok((0..n)
                    .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
                    .collect()),
            }
        }
        [_] => text
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect(),
        _ => Err(bad()),
    }
}

/// `lo:hi`.
pub fn parse_range(text: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::validation(format!("malformed range `{text}`, expected lo:hi"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

#[derive(Serialize)]
struct RotationSummary {
    detuning_hz: f64,
    /// Analytic cancellation point with the bare omega_y.
    phi_c_over_2pi: Option<f64>,
    /// Interpolated sign change of phi_total along the sweep.
    rotation_zero_crossing_over_2pi: Option<f64>,
    /// Interpolated return of omega_x, omega_y to the bare frequencies.
    frequency_return_x_over_2pi: Option<f64>,
    frequency_return_y_over_2pi: Option<f64>,
    /// Root of the simplified y frequency shift.
    frequency_cancellation_over_2pi: Option<f64>,
}

/// First sign change of `f` between consecutive sorted keys, linearly
/// interpolated.
fn zero_crossing(mut rows: Vec<(f64, f64)>) -> Option<f64> {
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    rows.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 == 0.0 {
            Some(x0)
        } else if (y0 < 0.0) != (y1 < 0.0) && y1 != 0.0 {
            Some(x0 + (x1 - x0) * y0 / (y0 - y1))
        } else {
            None
        }
    })
}

fn rotation(args: &RotationArgs, recorded: Option<&ExperimentConfig>) -> CliResult<Outcome> {
    let cfg = with_detuning(load_config(&args.common, recorded)?, args.detuning)?;
    let sweep = parse_sweep(&args.phi_sweep)?;
    let phis = sweep.iter().map(|&v| check_phi_fraction(v)).collect::<CliResult<Vec<f64>>>()?;
    let backaction = if args.full_backaction { Backaction::Full } else { Backaction::Unity };
    let rows: Vec<CliResult<_>> = phis
        .par_iter()
        .map(|&phi| {
            let p = OperatingPoint::new(&cfg.with_phi(phi))?;
            Ok((mode_angle(&p, backaction)?, p))
        })
        .collect();

    let mut csv = String::from("phi_over_2pi,phi_dyn,phi_cs,phi_total,phi_x_peak,phi_y_peak,omega_x_hz,omega_y_hz\n");
    let mut failure = None;
    let (mut total, mut fx, mut fy) = (vec![], vec![], vec![]);
    for (v, row) in sweep.iter().zip(rows) {
        match row {
            Ok((m, p)) => {
                let cols = [
                    *v,
                    m.phi_dyn,
                    m.phi_cs,
                    m.phi_total,
                    m.phi_x_peak,
                    m.phi_y_peak,
                    rad_to_hz(m.omega_x),
                    rad_to_hz(m.omega_y),
                ];
                csv += &cols.map(fmt_value).join(",");
                csv.push('\n');
                total.push((*v, m.phi_total));
                fx.push((*v, m.omega_x - p.derived.omega0_x));
                fy.push((*v, m.omega_y - p.derived.omega0_y));
            }
            Err(e) => {
                report_failure(&mut failure, e.context(&format!("phi/2pi = {v}")));
            }
        }
    }
    let out = &args.common.out;
    let dp = cscavity_core::params::derive_params(&cfg)?;
    let summary = RotationSummary {
        detuning_hz: rad_to_hz(cfg.detuning),
        phi_c_over_2pi: cancellation_point(cfg.kappa, cfg.detuning, dp.omega0_y).map(|v| v / TAU),
        rotation_zero_crossing_over_2pi: zero_crossing(total),
        frequency_return_x_over_2pi: zero_crossing(fx),
        frequency_return_y_over_2pi: zero_crossing(fy),
        frequency_cancellation_over_2pi: frequency_cancellation(&dp, cfg.theta, cfg.detuning, cfg.kappa, Axis::Y)
            .map(|v| v / TAU),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    let outputs = vec![
        write_text(out.join("rotation.csv"), &csv)?,
        write_json(out.join("rotation_summary.json"), &summary)?,
    ];
    Ok(Outcome {
        outputs,
        config: Some(cfg),
        failure,
    })
}

#[derive(Serialize)]
struct ContourReport {
    level_over_2pi: f64,
    /// Polylines of `[kappa_hz, delta_hz]` points.
    polylines: Vec<Vec<[f64; 2]>>,
}

fn phic(args: &PhicMapArgs) -> CliResult<Outcome> {
    let (k0, k1) = parse_range(&args.kappa_range)?;
    let (d0, d1) = parse_range(&args.delta_range)?;
    let map = phic_map(
        (hz_to_rad(k0), hz_to_rad(k1)),
        (hz_to_rad(d0), hz_to_rad(d1)),
        hz_to_rad(args.omega_y),
        args.resolution,
    )?;
    let mut buf = Vec::new();
    write_map_csv(&mut buf, &map)?;
    let mut outputs = vec![write_text(args.out.join("phic_map.csv"), &String::from_utf8(buf).expect("ascii"))?];
    if !args.contours.is_empty() {
        let contours: Vec<ContourReport> = args
            .contours
            .iter()
            .map(|&level| ContourReport {
                level_over_2pi: level,
                polylines: map
                    .contour(level)
                    .polylines
                    .into_iter()
                    .map(|l| l.into_iter().map(|[k, d]| [rad_to_hz(k), rad_to_hz(d)]).collect())
                    .collect(),
            })
            .collect();
        outputs.push(write_json(args.out.join("phic_contours.json"), &contours)?);
    }
    eprintln!(
        "phic-map: {} of {} cells defined",
        map.defined(),
        map.kappa.len() * map.delta.len()
    );
    Ok(Outcome {
        outputs,
        config: None,
        failure: None,
    })
}

#[derive(Serialize)]
struct PeakReport {
    center_hz: f64,
    width_hz: f64,
    height: f64,
    baseline: f64,
    area_m2: f64,
    residual_norm: f64,
    /// Variances of (center_hz, width_hz, height, baseline).
    covariance_diag: [f64; 4],
    window_hz: [f64; 2],
    iterations: usize,
}

impl From<&PeakFit> for PeakReport {
    fn from(f: &PeakFit) -> Self {
        let s = 1.0 / (TAU * TAU);
        let c = f.covariance_diag;
        PeakReport {
            center_hz: rad_to_hz(f.center),
            width_hz: rad_to_hz(f.width),
            height: f.height,
            baseline: f.baseline,
            area_m2: f.area,
            residual_norm: f.residual_norm,
            covariance_diag: [c[0] * s, c[1] * s, c[2], c[3]],
            window_hz: [rad_to_hz(f.window.lo), rad_to_hz(f.window.hi)],
            iterations: f.iterations,
        }
    }
}

#[derive(Serialize)]
struct FitReport {
    input: PathBuf,
    crosstalk_beta_deg: f64,
    peak_x: PeakReport,
    peak_y: PeakReport,
    phi_x: f64,
    phi_y: f64,
    reliable_x: bool,
    reliable_y: bool,
    bias: AngleBias,
    debiased_x: f64,
    debiased_y: f64,
    phi_average: f64,
}

fn parse_windows(text: &str) -> CliResult<(Window, Window)> {
    let bad = || CliError::validation(format!("malformed windows `{text}`, expected xlo:xhi,ylo:yhi"));
    let (x, y) = text.split_once(',').ok_or_else(bad)?;
    let to_window = |s: &str| -> CliResult<Window> {
        let (lo, hi) = parse_range(s)?;
        Ok(Window::new(hz_to_rad(lo), hz_to_rad(hi))?)
    };
    Ok((to_window(x)?, to_window(y)?))
}

fn fit_one(path: &Path, args: &FitArgs) -> CliResult<FitReport> {
    let clean = load_spectra(path).map_err(|e| CliError::at(path, e))?;
    let beta = args.crosstalk_beta.to_radians();
    let mixed = crosstalk(&clean, beta)?;
    let (wx, wy) = match &args.windows {
        Some(text) => parse_windows(text)?,
        None => default_windows(&mixed)?,
    };
    let raw = extract_mode_angle(&mixed, wx, wy).map_err(|e| CliError::at(path, e))?;
    let bias = if beta == 0.0 {
        AngleBias::default()
    } else {
        estimate_bias(&clean, beta, wx, wy)?
    };
    let e: AngleEstimate = debias(&raw, bias);
    Ok(FitReport {
        input: path.to_path_buf(),
        crosstalk_beta_deg: args.crosstalk_beta,
        peak_x: (&e.fit_x).into(),
        peak_y: (&e.fit_y).into(),
        phi_x: e.phi_x,
        phi_y: e.phi_y,
        reliable_x: e.reliable_x,
        reliable_y: e.reliable_y,
        bias: e.bias,
        debiased_x: e.debiased_x,
        debiased_y: e.debiased_y,
        phi_average: e.average(),
    })
}

fn fit(args: &FitArgs) -> CliResult<Outcome> {
    let mut outputs = Vec::new();
    let mut failure = None;
    for path in &args.spectra {
        match fit_one(path, args) {
            Ok(report) => {
                println!(
                    "{}: phi_x = {:.6}, phi_y = {:.6}, bias = ({:.6}, {:.6}), debiased average = {:.6}",
                    path.display(),
                    report.phi_x,
                    report.phi_y,
                    report.bias.x,
                    report.bias.y,
                    report.phi_average
                );
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("spectra");
                outputs.push(write_json(args.out.join(format!("fit_{stem}.json")), &report)?);
            }
            Err(e) => {
                report_failure(&mut failure, e);
            }
        }
    }
    Ok(Outcome {
        outputs,
        config: None,
        failure,
    })
}
