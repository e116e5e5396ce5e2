//! Command-line front end: builds traveling-wave profiles, evolves them as
//! conservative solutions, runs diagnostics, and exports figures.
//!
//! A run is described by a TOML config file and/or flags (flags win). All
//! outputs are deterministic for a fixed config: CSV for data, JSON for
//! metadata and reports, self-contained SVG for plots.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use chwaves::evolution::{compute_pq, simulate, SimConfig, Trajectory};
use chwaves::helmholtz::p_closed_form;
use chwaves::io::{
    write_energy_csv, write_json, write_labels_csv, write_profile_csv, LabelsSidecar,
    ProfileSidecar,
};
use chwaves::lagrangian::{to_eulerian, Labeling};
use chwaves::plot::{line_chart, write_svg, Series};
use chwaves::profiles::{
    cuspon_half_period, derive_params, Family, ProfileTable, TravelingWaveParams,
};
use chwaves::scenario::{build_diagnostics, build_labels, build_profile};
use chwaves::ChError;

#[derive(Parser)]
#[command(
    name = "chwaves",
    version,
    about = "Traveling waves of the Camassa-Holm equation: profiles, conservative evolution, diagnostics, figures"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a profile and write it as CSV + JSON (and SVG with --plot)
    Profile(RunArgs),
    /// Evolve the profile as a conservative solution; write snapshots + manifest
    Simulate(RunArgs),
    /// Run the verification instruments and write a diagnostics report
    Diagnose(RunArgs),
    /// Full run: profile, diagnostics, simulation, and every figure
    Export(RunArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML config file; explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// peakon-decay | peakon-periodic | cuspon-decay | cuspon-periodic |
    /// stumpon-decay | stumpon-periodic
    #[arg(long)]
    family: Option<String>,
    /// Crest height
    #[arg(long = "M")]
    big_m: Option<f64>,
    /// Trough height
    #[arg(long = "m")]
    small_m: Option<f64>,
    /// Wave speed
    #[arg(long)]
    s: Option<f64>,
    /// Plateau half-width; periodic stumpons default to the complement that
    /// makes the half-period exactly 2
    #[arg(long)]
    ell: Option<f64>,
    /// Number of evolution labels
    #[arg(long = "n-labels")]
    n_labels: Option<usize>,
    /// Fixed time step (defaults to the largest stable step)
    #[arg(long)]
    dt: Option<f64>,
    /// End time of the simulation
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// standard | identity
    #[arg(long)]
    labeling: Option<String>,
    /// Output directory (created if missing)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Render SVG figures alongside the data files
    #[arg(long)]
    plot: bool,
}

/// Config-file counterpart of the flags, plus the knobs that rarely change.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    family: Option<String>,
    #[serde(rename = "M")]
    big_m: Option<f64>,
    m: Option<f64>,
    s: Option<f64>,
    ell: Option<f64>,
    n_samples: Option<usize>,
    n_labels: Option<usize>,
    labeling: Option<String>,
    out: Option<PathBuf>,
    plot: Option<bool>,
    #[serde(default)]
    sim: SimFile,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SimFile {
    #[serde(rename = "T")]
    t_end: Option<f64>,
    dt: Option<f64>,
    cfl: Option<f64>,
    snapshots: Option<usize>,
}

/// Fully resolved run: defaults filled, parameters validated.
struct Run {
    params: TravelingWaveParams,
    n_samples: usize,
    n_labels: usize,
    labeling: Labeling,
    sim: SimConfig,
    out: PathBuf,
    plot: bool,
}

fn labeling_name(l: Labeling) -> &'static str {
    match l {
        Labeling::Standard => "standard",
        Labeling::Identity => "identity",
    }
}

fn resolve(args: &RunArgs) -> Result<Run> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let family_name = args
        .family
        .clone()
        .or(file.family)
        .context("no wave family given (flag --family or config key `family`)")?;
    let family = Family::from_str(&family_name)?;

    // reference experiment: golden-ratio crest over a zero trough at speed 1
    let big_m = args.big_m.or(file.big_m).unwrap_or(0.5 * (1.0 + 5f64.sqrt()));
    let small_m = args.small_m.or(file.m).unwrap_or(0.0);
    let s = args.s.or(file.s).unwrap_or(1.0);
    let ell = match args.ell.or(file.ell) {
        Some(e) => e,
        None if family.is_stumpon() => {
            if !family.is_periodic() {
                bail!("--ell is required for stumpons on the line");
            }
            let flanks = derive_params(big_m, small_m, s, 0.0, Family::CusponPeriodic)?;
            let flank = cuspon_half_period(&flanks, 1e-10)?;
            if flank >= 2.0 {
                bail!(
                    "flank half-width {flank:.4} leaves no room for the default plateau; pass --ell"
                );
            }
            2.0 - flank
        }
        None => 0.0,
    };
    let params = derive_params(big_m, small_m, s, ell, family)?;

    let labeling = match args.labeling.clone().or(file.labeling) {
        Some(name) => Labeling::from_str(&name)?,
        None => Labeling::Standard,
    };
    let sim = SimConfig {
        t_end: args.t_end.or(file.sim.t_end).unwrap_or(2.0),
        dt: args.dt.or(file.sim.dt),
        cfl: file.sim.cfl.unwrap_or(0.3),
        n_snapshots: file.sim.snapshots.unwrap_or(9),
    };
    Ok(Run {
        params,
        n_samples: file.n_samples.unwrap_or(4096),
        n_labels: args.n_labels.or(file.n_labels).unwrap_or(512),
        labeling,
        sim,
        out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
        plot: args.plot || file.plot.unwrap_or(false),
    })
}

/// Everything the manifest records about a finished simulation.
#[derive(Serialize)]
struct Manifest {
    family: String,
    params: TravelingWaveParams,
    n_samples: usize,
    n_labels: usize,
    labeling: String,
    t_end: f64,
    dt: f64,
    cfl: f64,
    n_steps: usize,
    snapshots: usize,
    /// Full spatial period 2L; absent for decay profiles.
    period: Option<f64>,
    energy_start: f64,
    energy_end: f64,
    energy_drift_rel: f64,
    /// Whether the plateau velocity dropped below the wave speed (stumpons).
    plateau_descent: Option<bool>,
    /// Largest observed drop of the plateau-center velocity below s.
    plateau_max_drop: Option<f64>,
    files: Vec<String>,
}

fn cmd_profile(run: &Run, want_figure: bool) -> Result<()> {
    let table = build_profile(&run.params, run.n_samples)?;
    let p: Vec<f64> = table.vals.iter().map(|&u| p_closed_form(&run.params, u)).collect();
    write_profile_csv(&run.out.join("profile.csv"), &table, Some(&p))?;
    write_json(
        &run.out.join("profile.json"),
        &ProfileSidecar {
            params: run.params,
            center: table.center,
            half_period: table.half_period,
        },
    )?;
    if want_figure {
        plot_profile(&run.out, &table, &p)?;
    }
    Ok(())
}

fn plot_profile(out: &Path, table: &ProfileTable, p: &[f64]) -> Result<()> {
    let u_pts: Vec<(f64, f64)> = table.xs.iter().cloned().zip(table.vals.iter().cloned()).collect();
    let p_pts: Vec<(f64, f64)> = table.xs.iter().cloned().zip(p.iter().cloned()).collect();
    let svg = line_chart(
        &format!("{} profile", table.params.family.name()),
        "x",
        "u, P",
        &[Series::new("u", u_pts), Series::new("P", p_pts)],
    );
    write_svg(&out.join("profile.svg"), &svg)?;
    Ok(())
}

fn cmd_simulate(run: &Run, want_figures: bool) -> Result<()> {
    let table = build_profile(&run.params, run.n_samples)?;
    let ls0 = build_labels(&run.params, run.n_samples, run.n_labels, run.labeling)?;
    let traj = simulate(&ls0, &run.sim)?;
    let mut files = Vec::new();

    for (k, snap) in traj.snapshots.iter().enumerate() {
        let csv = format!("snapshot_{k:03}.csv");
        let meta = format!("snapshot_{k:03}.json");
        let pq = compute_pq(snap)?;
        write_labels_csv(&run.out.join(&csv), snap, Some((&pq.p, &pq.q)))?;
        write_json(
            &run.out.join(&meta),
            &LabelsSidecar {
                domain: snap.domain,
                labeling: snap.labeling,
                r: snap.r,
                t: snap.t,
            },
        )?;
        files.push(csv);
        files.push(meta);
    }

    let times: Vec<f64> = traj.snapshots.iter().map(|s| s.t).collect();
    write_energy_csv(&run.out.join("energy.csv"), &times, &traj.energy)?;
    files.push("energy.csv".to_string());

    if want_figures {
        plot_characteristics(&run.out, &traj)?;
        plot_snapshots(&run.out, &table, &traj)?;
        files.push("characteristics.svg".to_string());
        files.push("snapshots.svg".to_string());
    }
    files.push("manifest.json".to_string());

    let (descent, max_drop) = plateau_descent(&run.params, &traj);
    let e0 = traj.energy[0];
    let e1 = *traj.energy.last().unwrap();
    let manifest = Manifest {
        family: run.params.family.name().to_string(),
        params: run.params,
        n_samples: run.n_samples,
        n_labels: run.n_labels,
        labeling: labeling_name(run.labeling).to_string(),
        t_end: run.sim.t_end,
        dt: traj.dt,
        cfl: run.sim.cfl,
        n_steps: traj.n_steps,
        snapshots: traj.snapshots.len(),
        period: table.half_period.map(|l| 2.0 * l),
        energy_start: e0,
        energy_end: e1,
        energy_drift_rel: (e1 - e0).abs() / e0.abs().max(f64::MIN_POSITIVE),
        plateau_descent: descent,
        plateau_max_drop: max_drop,
        files,
    };
    write_json(&run.out.join("manifest.json"), &manifest)?;
    Ok(())
}

/// Checks whether the plateau midpoint fell below the wave speed at any
/// recorded time after the start; None for families without a plateau.
fn plateau_descent(
    params: &TravelingWaveParams,
    traj: &Trajectory,
) -> (Option<bool>, Option<f64>) {
    if !params.family.is_stumpon() {
        return (None, None);
    }
    let first = &traj.snapshots[0];
    let i0 = (0..first.n())
        .min_by(|&a, &b| first.xis[a].abs().partial_cmp(&first.xis[b].abs()).unwrap())
        .unwrap();
    let drop = traj
        .snapshots
        .iter()
        .skip(1)
        .map(|s| params.speed - s.u[i0])
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = params.speed.abs().max(1.0);
    (Some(drop > 1e-6 * scale), Some(drop))
}

fn plot_characteristics(out: &Path, traj: &Trajectory) -> Result<()> {
    let n = traj.snapshots[0].n();
    let fan = 33.min(n);
    let mut series = Vec::with_capacity(fan);
    for j in 0..fan {
        let i = j * n / fan;
        let pts: Vec<(f64, f64)> = traj.snapshots.iter().map(|s| (s.t, s.y[i])).collect();
        series.push(Series::new(&format!("xi[{i}]"), pts));
    }
    let svg = line_chart("label paths", "t", "y(t)", &series);
    write_svg(&out.join("characteristics.svg"), &svg)?;
    Ok(())
}

fn plot_snapshots(out: &Path, table: &ProfileTable, traj: &Trajectory) -> Result<()> {
    let first_snap = &traj.snapshots[0];
    let last_snap = traj.snapshots.last().unwrap();
    let first = to_eulerian(first_snap, &table.xs)?;
    let last = to_eulerian(last_snap, &table.xs)?;
    let pts = |u: &[f64]| -> Vec<(f64, f64)> {
        table.xs.iter().cloned().zip(u.iter().cloned()).collect()
    };
    let svg = line_chart(
        "velocity snapshots",
        "x",
        "u",
        &[
            Series::new(&format!("t = {}", first_snap.t), pts(&first.u)),
            Series::new(&format!("t = {}", last_snap.t), pts(&last.u)),
        ],
    );
    write_svg(&out.join("snapshots.svg"), &svg)?;
    Ok(())
}

fn cmd_diagnose(run: &Run, want_figure: bool) -> Result<()> {
    let report = build_diagnostics(&run.params, run.n_samples, run.n_labels)?;
    write_json(&run.out.join("diagnostics.json"), &report)?;
    if want_figure {
        let table = build_profile(&run.params, run.n_samples)?;
        let p: Vec<f64> =
            table.vals.iter().map(|&u| p_closed_form(&run.params, u)).collect();
        plot_profile(&run.out, &table, &p)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Profile(args) => {
            let run = resolve(&args)?;
            fs::create_dir_all(&run.out)?;
            cmd_profile(&run, run.plot)
        }
        Cmd::Simulate(args) => {
            let run = resolve(&args)?;
            fs::create_dir_all(&run.out)?;
            cmd_simulate(&run, run.plot)
        }
        Cmd::Diagnose(args) => {
            let run = resolve(&args)?;
            fs::create_dir_all(&run.out)?;
            cmd_diagnose(&run, run.plot)
        }
        Cmd::Export(args) => {
            let run = resolve(&args)?;
            fs::create_dir_all(&run.out)?;
            cmd_profile(&run, true)?;
            cmd_diagnose(&run, false)?;
            cmd_simulate(&run, true)
        }
    }
}

/// Names the failure class for the machine-readable error report.
fn error_kind(err: &anyhow::Error) -> &'static str {
    match err.downcast_ref::<ChError>() {
        Some(ChError::OrderingViolation(_)) => "ordering-violation",
        Some(ChError::StumponInadmissible { .. }) => "stumpon-inadmissible",
        Some(ChError::QuadratureNonconvergent(_)) => "quadrature-nonconvergent",
        Some(ChError::NonMonotonic(_)) => "non-monotone",
        Some(ChError::DomainMismatch(_)) => "domain-mismatch",
        Some(ChError::NonMonotonicY { .. }) => "labels-crossed",
        Some(ChError::AtomsPresent { .. }) => "atoms-present",
        Some(ChError::CflViolation { .. }) => "cfl-violation",
        Some(ChError::BlowUp { .. }) => "blow-up",
        Some(ChError::OffPlateau { .. }) => "off-plateau",
        Some(ChError::OutOfRange(_)) => "out-of-range",
        Some(ChError::Io(_)) => "io",
        Some(ChError::Format(_)) => "format",
        None => "config",
    }
}

fn init_threads() {
    if let Ok(raw) = std::env::var("CHWAVES_THREADS") {
        if let Ok(k) = raw.trim().parse::<usize>() {
            if k > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({
                "kind": error_kind(&err),
                "error": format!("{err:#}"),
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
