use crate::artifacts::OutputDir;
use crate::config::{Experiment, Overrides, RunConfig};
use crate::{exit, RunError, Stage};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use scatlab_core::experiments::{
    default_family, lemma_diagnostics, scaled_family, stability_sweep, xray_pairing_oracle, Diagnostic, PacketPair,
};
use scatlab_core::grid::{fft_forward, Boost, Grid, State};
use scatlab_core::potentials::{Potential, Profile};
use scatlab_core::propagator::loglog_slope;
use scatlab_core::reconstruct::{assemble_fourier, invert_and_report, pairing_xray_estimate, PairingRecord};
use scatlab_core::xray::{fourier_slice, slice_identity_check, xray_forward, SliceGrid};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "scatlab", version, about = "High-velocity inverse scattering laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Probe velocity parameter; replaces every lambda list in the config.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Points per axis of every simulation grid.
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    /// Half width of every simulation grid.
    #[arg(long, global = true)]
    pub grid_l: Option<f64>,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Fast invariant checks for every module.
    Selftest,
    /// High-velocity pairings against the X-ray oracle.
    Probe,
    /// Forward X-ray transform and Fourier slice check.
    Xray,
    /// Fourier assembly and low-pass inversion of V1 - V2.
    Reconstruct,
    /// Operator-norm bound against the H^-1 distance over a family of pairs.
    Stability,
    /// Decay diagnostics for free and scattered packets.
    Diagnose,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Selftest => "selftest",
            Command::Probe => "probe",
            Command::Xray => "xray",
            Command::Reconstruct => "reconstruct",
            Command::Stability => "stability",
            Command::Diagnose => "diagnose",
        }
    }
}

/// Parses, validates and runs; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    if let Some(w) = cli.workers {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
    }
    if cli.command == Command::Selftest {
        return crate::selftest::run_selftest();
    }
    match load_config(cli).and_then(|cfg| execute(cli.command, &cfg, &cli.out)) {
        Ok(_) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<RunConfig, RunError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides { seed: cli.seed, lambda: cli.lambda, grid_n: cli.grid_n, grid_l: cli.grid_l });
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command on a validated config and writes its artifacts.
pub fn execute(command: Command, cfg: &RunConfig, out: &Path) -> Result<PathBuf, RunError> {
    let mut dir = OutputDir::create(out)?;
    let t0 = Instant::now();
    match command {
        Command::Selftest => {}
        Command::Probe => probe(cfg, &mut dir)?,
        Command::Xray => xray(cfg, &mut dir)?,
        Command::Reconstruct => reconstruct(cfg, &mut dir)?,
        Command::Stability => stability(cfg, &mut dir)?,
        Command::Diagnose => diagnose(cfg, &mut dir)?,
    }
    dir.time(command.name(), t0.elapsed().as_secs_f64());
    let manifest = dir.finish(command.name(), cfg.seed, cfg)?;
    println!("wrote {}", manifest.display());
    Ok(manifest)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

#[derive(Serialize)]
struct ProbeRow {
    lambda: f64,
    value_re: f64,
    value_im: f64,
    oracle_re: f64,
    oracle_im: f64,
    error: f64,
    relative_error: f64,
    horizon: f64,
    converged: bool,
    boundary_ok: bool,
}

#[derive(Serialize)]
struct ProbeSummary {
    omega: [f64; 2],
    oracle: Complex64,
    rate: Option<f64>,
    strictly_decreasing: bool,
}

fn probe(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), RunError> {
    let grid = cfg.grid.build().stage("grid")?;
    let packets = PacketPair::standard(grid).stage("packet construction")?;
    let oracle = xray_pairing_oracle(&cfg.pair, cfg.omega, &packets.phi, &packets.psi).stage("x-ray oracle")?;
    let records: Vec<PairingRecord> = cfg
        .lambdas
        .par_iter()
        .map(|&l| {
            let boost = Boost::for_probe(l, cfg.omega)?;
            let mut r = pairing_xray_estimate(&cfg.pair, &boost, &packets.phi, &packets.psi, &cfg.scattering)?;
            r.phi_id = "bump-centered".into();
            r.psi_id = "bump-offset".into();
            Ok(r)
        })
        .collect::<scatlab_core::Result<_>>()
        .stage("pairing")?;
    let rows: Vec<ProbeRow> = records
        .iter()
        .map(|r| {
            let error = (r.value - oracle).norm();
            ProbeRow {
                lambda: r.lambda,
                value_re: r.value.re,
                value_im: r.value.im,
                oracle_re: oracle.re,
                oracle_im: oracle.im,
                error,
                relative_error: if oracle.norm() > 0.0 { error / oracle.norm() } else { error },
                horizon: r.horizon,
                converged: r.converged,
                boundary_ok: r.boundary_ok,
            }
        })
        .collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let lams: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let rate = (rows.len() >= 2 && errs.iter().all(|&e| e > 0.0)).then(|| loglog_slope(&lams, &errs));
    for r in &rows {
        println!(
            "lambda {:>7.1}  pairing {:+.6}{:+.6}i  error {:.3e}  horizon {:.2}",
            r.lambda, r.value_re, r.value_im, r.error, r.horizon
        );
    }
    println!("oracle {:+.6}{:+.6}i", oracle.re, oracle.im);
    dir.jsonl("pairings.jsonl", &records)?;
    dir.csv("convergence.csv", &rows)?;
    let all_zero = errs.iter().all(|&e| e == 0.0);
    dir.json(
        "probe.json",
        &ProbeSummary { omega: cfg.omega, oracle, rate, strictly_decreasing: all_zero || strictly_decreasing(&errs) },
    )
}

#[derive(Serialize)]
struct LineRow {
    s: f64,
    value: f64,
}

#[derive(Serialize)]
struct SpectrumRow {
    eta: f64,
    re: f64,
    im: f64,
}

fn xray(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), RunError> {
    let grid = cfg.grid.build().stage("grid")?;
    let v = cfg.pair.difference();
    let slice = SliceGrid::from_grid(&grid, cfg.xray.omega).stage("slice grid")?;
    let field = xray_forward(&v, &slice, cfg.xray.quadrature_step).stage("x-ray transform")?;
    let rows: Vec<LineRow> =
        slice.coords().into_iter().zip(&field.values).map(|(s, &value)| LineRow { s, value }).collect();
    dir.csv("xray.csv", &rows)?;
    let spec = fourier_slice(&field);
    let spec_rows: Vec<SpectrumRow> = (0..spec.grid().len())
        .map(|k| SpectrumRow { eta: spec.grid().point(k)[0], re: spec.values()[k].re, im: spec.values()[k].im })
        .collect();
    dir.csv("xray_spectrum.csv", &spec_rows)?;
    let check = slice_identity_check(&v, cfg.xray.omega, &grid, cfg.xray.quadrature_step).stage("slice identity")?;
    println!("slice identity: max relative deviation {:.3e}", check.max_rel_deviation);
    dir.json("slice_check.json", &check)
}

#[derive(Serialize)]
struct AssembledRow {
    eta1: f64,
    eta2: f64,
    re: f64,
    im: f64,
    true_re: f64,
    true_im: f64,
}

#[derive(Serialize)]
struct FieldRow {
    x1: f64,
    x2: f64,
    v_rec: f64,
    v_true: f64,
}

#[derive(Serialize)]
struct ReconstructionSummary {
    reports: Vec<scatlab_core::reconstruct::ReconstructionReport>,
    monotone_nonincreasing: bool,
}

fn label(l: f64) -> String {
    if l.fract() == 0.0 {
        format!("{l:.0}")
    } else {
        format!("{l}")
    }
}

fn reconstruct(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), RunError> {
    let mut reports = Vec::new();
    for &l in &cfg.reconstruction_lambdas {
        let probe = cfg.probe.with_lambda(l);
        let t0 = Instant::now();
        let assembled =
            assemble_fourier(&cfg.pair, &cfg.reconstruction, &probe, &cfg.scattering).stage("frequency assembly")?;
        let (v_rec, report) = invert_and_report(&assembled, &cfg.pair).stage("inversion")?;
        dir.time(&format!("reconstruct lambda={}", label(l)), t0.elapsed().as_secs_f64());
        let out: Grid = assembled.output.build().stage("output grid")?;
        let truth = State::from_real(out, &cfg.pair.difference().sample(&out)).stage("true field")?;
        let truth_hat = fft_forward(&truth);
        let dual = *truth_hat.grid();
        let rows: Vec<AssembledRow> = assembled
            .values
            .iter()
            .enumerate()
            .filter_map(|(k, v)| {
                v.map(|v| {
                    let eta = dual.point(k);
                    let t = truth_hat.values()[k];
                    AssembledRow { eta1: eta[0], eta2: eta[1], re: v.re, im: v.im, true_re: t.re, true_im: t.im }
                })
            })
            .collect();
        dir.csv(&format!("assembled_lambda{}.csv", label(l)), &rows)?;
        let field: Vec<FieldRow> = (0..out.len())
            .map(|k| {
                let x = out.point(k);
                FieldRow { x1: x[0], x2: x[1], v_rec: v_rec[k], v_true: truth.values()[k].re }
            })
            .collect();
        dir.csv(&format!("v_rec_lambda{}.csv", label(l)), &field)?;
        println!(
            "lambda {:>7.1}  H^-1 error {:.4e}  (low band {:.4e}, high band {:.4e}, assembled l2 {:.4e})  directions {}",
            l, report.h_minus_1_error, report.low_band_error, report.high_band_error, report.assembled_l2_error, report.directions
        );
        reports.push(report);
    }
    let errs: Vec<f64> = reports.iter().map(|r| r.h_minus_1_error).collect();
    dir.json(
        "reconstruction_report.json",
        &ReconstructionSummary { monotone_nonincreasing: nonincreasing(&errs), reports },
    )
}

#[derive(Serialize)]
struct StabilityRow<'a> {
    label: &'a str,
    x: f64,
    y: f64,
    lambda: f64,
    horizon: f64,
    probes: usize,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct PlotRow {
    log10_x: f64,
    log10_y: f64,
}

fn stability(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), RunError> {
    let family = match cfg.experiment {
        Experiment::Scaled => scaled_family(&cfg.pair.v1, &cfg.s_values),
        Experiment::Default => default_family(),
    }
    .stage("family")?;
    let fit = stability_sweep(&family, &cfg.stability, &cfg.scattering).stage("stability sweep")?;
    let rows: Vec<StabilityRow> = fit
        .points
        .iter()
        .map(|p| StabilityRow {
            label: &p.label,
            x: p.x,
            y: p.y,
            lambda: p.lambda,
            horizon: p.horizon,
            probes: p.probes,
            iterations: p.iterations,
            converged: p.converged,
        })
        .collect();
    dir.csv("stability.csv", &rows)?;
    let plot: Vec<PlotRow> = fit
        .points
        .iter()
        .filter(|p| p.x > 0.0 && p.y > 0.0)
        .map(|p| PlotRow { log10_x: p.x.log10(), log10_y: p.y.log10() })
        .collect();
    dir.csv("stability_plot.csv", &plot)?;
    println!("nu_hat {:.4}  rank correlation {:.4}  points {}", fit.nu_hat, fit.rank_correlation, fit.fitted);
    println!("note: {}", fit.caveat);
    dir.json("stability.json", &fit)
}

#[derive(Serialize)]
struct DiagnosticRow {
    potential: &'static str,
    which: Diagnostic,
    t_or_lambda: f64,
    value: f64,
    /// Lab-frame overlap, when available.
    lab: Option<f64>,
}

fn diagnose(cfg: &RunConfig, dir: &mut OutputDir) -> Result<(), RunError> {
    let mut subjects: Vec<(&'static str, &Potential)> = vec![("v1", &cfg.pair.v1)];
    if !cfg.pair.v2.is_zero() {
        subjects.push(("v2", &cfg.pair.v2));
    }
    let mut all = Vec::new();
    let mut rows = Vec::new();
    for (name, v) in subjects {
        let reports = lemma_diagnostics(v, &Diagnostic::ALL, &cfg.diagnostics, &cfg.scattering).stage("diagnostics")?;
        for r in &reports {
            println!(
                "{name} {:?}: {} (slope {:.3}; rule: {})",
                r.which,
                if r.passed { "pass" } else { "FAIL" },
                r.slope,
                r.rule
            );
            if let Some(t) = &r.cone {
                rows.extend(t.rows.iter().map(|x| DiagnosticRow {
                    potential: name,
                    which: r.which,
                    t_or_lambda: x.t,
                    value: x.fraction,
                    lab: None,
                }));
            }
            if let Some(t) = &r.overlap {
                rows.extend(t.rows.iter().map(|x| DiagnosticRow {
                    potential: name,
                    which: r.which,
                    t_or_lambda: x.t,
                    value: x.translated,
                    lab: x.lab,
                }));
            }
            if let Some(t) = &r.wave {
                rows.extend(t.rows.iter().map(|x| DiagnosticRow {
                    potential: name,
                    which: r.which,
                    t_or_lambda: x.lambda,
                    value: x.norm,
                    lab: None,
                }));
            }
        }
        all.push((name, reports));
    }
    dir.csv("diagnostics.csv", &rows)?;
    dir.json("diagnostics.json", &all)
}
