use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use fwmbs::cmt::{conversion_efficiency, phase_matching_curve, Branch, BraggScatteringSetup, CURVE_SCHEMA};
use fwmbs::design::{design_for_sps, guided_table, DesignOptions, DesignReport, DesignTarget, Emitter};
use fwmbs::export::{fmt_f64, CsvHeader, TOOL_VERSION};
use fwmbs::materials::MaterialDb;
use fwmbs::modesolver::{propagation_constant_table, zero_dispersion_wavelength, DispersionProfile};
use fwmbs::ssfm::{bs_conversion_experiment, ExperimentPolicy, GridPolicy, RunManifest, SPECTRUM_SCHEMA};
use fwmbs::units::{angular_frequency_to_wavelength, dispersion_parameter, wavelength_to_angular_frequency};

use crate::config::{
    parse_quantity, sha256_hex, Conversion, LoadedConfig, PropagateSettings, RawQuantity, RunConfig, SweepAxis, Waveguide,
};
use crate::{Cli, CliError, Command, DesignArgs, SweepArgs};

pub const DISPERSION_SCHEMA: &str = "dispersion_table/1";
pub const ANALYTIC_SCHEMA: &str = "analytic_summary/1";
pub const SWEEP_SCHEMA: &str = "sweep/1";

/// Default band of the dispersion table when the config gives none, m.
const DEFAULT_BAND: (f64, f64) = (900e-9, 1700e-9);

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let db = match &cli.global.materials {
        Some(p) => MaterialDb::load(p)?,
        None => MaterialDb::bundled(),
    };
    let out = &cli.global.out;
    match &cli.command {
        Command::Materials => cmd_materials(&db),
        Command::Dispersion => cmd_dispersion(&db, &load(cli)?, out),
        Command::Analytic { branch } => cmd_analytic(&db, &load(cli)?, *branch, out),
        Command::Propagate => cmd_propagate(&db, &load(cli)?, out),
        Command::Design(args) => {
            let cfg = cli.global.config.as_deref().map(LoadedConfig::load).transpose()?;
            cmd_design(&db, cfg.as_ref(), args, out)
        }
        Command::Sweep(args) => cmd_sweep(&db, &load(cli)?, args, out),
    }
}

fn load(cli: &Cli) -> Result<LoadedConfig, CliError> {
    let path = cli
        .global
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("this command needs --config".into()))?;
    LoadedConfig::load(path)
}

fn create(dir: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf), CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok((BufWriter::new(File::create(&path)?), path))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let (mut w, path) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}

fn nm_list(v: &[f64]) -> String {
    if v.is_empty() {
        return "none".into();
    }
    v.iter().map(|l| format!("{:.3}", l * 1e9)).collect::<Vec<_>>().join(",")
}

fn cmd_materials(db: &MaterialDb) -> Result<(), CliError> {
    for m in db.iter() {
        let (lo, hi) = m.validity_range;
        let n1550 = m.index(1550e-9).map_or_else(|_| "na".to_string(), |n| format!("{n:.6}"));
        println!(
            "material={} range_nm={:.0}-{:.0} n_1550={}",
            m.name,
            lo * 1e9,
            hi * 1e9,
            n1550
        );
    }
    println!("materials={} status=ok", db.len());
    Ok(())
}

fn cmd_dispersion(db: &MaterialDb, cfg: &LoadedConfig, out: &Path) -> Result<(), CliError> {
    let wg = cfg.config.waveguide()?;
    let settings = cfg.config.dispersion()?;
    let band = settings.band.unwrap_or(DEFAULT_BAND);
    let profile = propagation_constant_table(db, &table_geometry(&wg), band, settings.points, wg.polarization, settings.n2)?;
    let roots = zero_dispersion_wavelength(&profile);

    let (mut w, path) = create(out, "dispersion.csv")?;
    CsvHeader::new(DISPERSION_SCHEMA, &cfg.sha256).write(
        &mut w,
        "lambda_nm,n_eff,beta_rad_m,beta2_s2_m,d_ps_nm_km,gamma_w_m",
    )?;
    for i in (0..profile.omega.len()).rev() {
        let lambda = angular_frequency_to_wavelength(profile.omega[i])?;
        let d = dispersion_parameter(profile.beta2[i], lambda)?.ps_per_nm_km();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_f64(lambda * 1e9),
            fmt_f64(profile.n_eff[i]),
            fmt_f64(profile.beta[i]),
            fmt_f64(profile.beta2[i]),
            fmt_f64(d),
            fmt_f64(profile.gamma[i])
        )?;
    }
    w.flush()?;
    let primary = roots.first().map_or_else(|| "none".to_string(), |l| format!("{:.3}", l * 1e9));
    println!(
        "command=dispersion lambda_zdw_nm={primary} zdw_roots_nm={} rows={} csv={} config_sha256={}",
        nm_list(&roots),
        profile.omega.len(),
        path.display(),
        cfg.sha256
    );
    Ok(())
}

/// Geometry handed to the mode solver. The device length does not enter the
/// mode solve, so a zero-length device borrows a nominal one.
fn table_geometry(wg: &Waveguide) -> fwmbs::modesolver::WaveguideGeometry {
    let mut g = wg.geometry.clone();
    if !(g.length > 0.0) {
        g.length = 1.0;
    }
    g
}

/// Table for a conversion run: the configured band, or one stretching from
/// below the shortest tone to well past the longest, trimmed to guidance.
fn conversion_profile(
    db: &MaterialDb,
    cfg: &RunConfig,
    wg: &Waveguide,
    conv: &Conversion,
) -> Result<Arc<DispersionProfile>, CliError> {
    let settings = cfg.dispersion()?;
    let geometry = table_geometry(wg);
    let profile = match settings.band {
        Some(band) => propagation_constant_table(db, &geometry, band, settings.points, wg.polarization, settings.n2)?,
        None => {
            let short = conv.lambda_p1.min(conv.lambda_p2).min(conv.lambda_s);
            let long = conv.lambda_p1.max(conv.lambda_p2).max(conv.lambda_s);
            guided_table(
                db,
                &geometry,
                (0.75 * short, 1.6 * long),
                2 * settings.points,
                wg.polarization,
                settings.n2,
            )?
        }
    };
    Ok(Arc::new(profile))
}

fn build_setup(profile: Arc<DispersionProfile>, wg: &Waveguide, conv: &Conversion) -> Result<BraggScatteringSetup, CliError> {
    let mut s = BraggScatteringSetup::from_wavelengths(
        profile,
        conv.lambda_p1,
        conv.lambda_p2,
        conv.lambda_s,
        conv.p1,
        conv.p2,
        wg.geometry.length,
    )?;
    if let Some(g) = conv.gamma1 {
        s.gamma1 = g;
    }
    if let Some(g) = conv.gamma2 {
        s.gamma2 = g;
    }
    if let Some(p) = conv.signal_power {
        s.signal_power = p;
    }
    s.validate()?;
    Ok(s)
}

fn experiment_policy(p: &PropagateSettings) -> ExperimentPolicy {
    ExperimentPolicy {
        grid: GridPolicy {
            margin_factor: p.margin,
            ..GridPolicy::default()
        },
        phase_per_step: p.phase_per_step,
        min_steps: p.min_steps,
        loss_db_per_m: p.loss_db_per_m,
        gamma_override: p.gamma,
    }
}

#[derive(Debug, Serialize)]
struct AnalyticSummary {
    schema_version: &'static str,
    tool_version: &'static str,
    config_sha256: String,
    length_m: f64,
    lambda_s_nm: f64,
    results: Vec<BranchSummary>,
}

#[derive(Debug, Serialize)]
struct BranchSummary {
    branch: Branch,
    eta: f64,
    eta_db: f64,
    lambda_i_nm: f64,
    kappa_linear_rad_m: f64,
    kappa_nonlinear_rad_m: f64,
    kappa_total_rad_m: f64,
    g_rad_m: f64,
    /// Null-to-null width of the curve's main lobe in signal frequency, rad/s.
    first_null_width_rad_s: Option<f64>,
    curve_points: usize,
}

fn cmd_analytic(
    db: &MaterialDb,
    cfg: &LoadedConfig,
    branch: Option<crate::config::BranchChoice>,
    out: &Path,
) -> Result<(), CliError> {
    let wg = cfg.config.waveguide()?;
    let conv = cfg.config.conversion()?;
    let mut sweep = cfg.config.analytic(&conv)?;
    if let Some(b) = branch {
        sweep.branch = b;
    }
    let profile = conversion_profile(db, &cfg.config, &wg, &conv)?;
    let setup = build_setup(profile, &wg, &conv)?;
    let range = (
        wavelength_to_angular_frequency(sweep.signal_range.0)?,
        wavelength_to_angular_frequency(sweep.signal_range.1)?,
    );

    let mut results = Vec::new();
    for b in sweep.branch.branches() {
        let r = conversion_efficiency(&setup, b, setup.length)?;
        let curve = phase_matching_curve(&setup, range, sweep.points, b)?;
        let (mut w, path) = create(out, &format!("phase_matching_{}.csv", b.label()))?;
        curve.write_csv(&mut w, &CsvHeader::new(CURVE_SCHEMA, &cfg.sha256))?;
        w.flush()?;
        let lambda_i = angular_frequency_to_wavelength(r.idler_omega)?;
        println!(
            "command=analytic branch={} eta={} eta_db={:.4} lambda_i_nm={:.4} kappa_rad_m={} csv={} config_sha256={}",
            b.label(),
            fmt_f64(r.eta),
            10.0 * r.eta.log10(),
            lambda_i * 1e9,
            fmt_f64(r.mismatch.total),
            path.display(),
            cfg.sha256
        );
        results.push(BranchSummary {
            branch: b,
            eta: r.eta,
            eta_db: 10.0 * r.eta.log10(),
            lambda_i_nm: lambda_i * 1e9,
            kappa_linear_rad_m: r.mismatch.linear,
            kappa_nonlinear_rad_m: r.mismatch.nonlinear,
            kappa_total_rad_m: r.mismatch.total,
            g_rad_m: r.g,
            first_null_width_rad_s: curve.first_null_width(),
            curve_points: curve.points.len(),
        });
    }
    let summary = AnalyticSummary {
        schema_version: ANALYTIC_SCHEMA,
        tool_version: TOOL_VERSION,
        config_sha256: cfg.sha256.clone(),
        length_m: setup.length,
        lambda_s_nm: conv.lambda_s * 1e9,
        results,
    };
    write_json(out, "analytic_summary.json", &summary)?;
    Ok(())
}

/// Runs one split-step experiment and returns its manifest and spectrum CSV bytes.
fn run_point(
    setup: &BraggScatteringSetup,
    policy: &ExperimentPolicy,
    sha: &str,
) -> Result<(RunManifest, Vec<u8>), CliError> {
    let run = bs_conversion_experiment(setup, policy)?;
    let mut csv = Vec::new();
    run.write_spectrum_csv(&mut csv, &CsvHeader::new(SPECTRUM_SCHEMA, sha))?;
    Ok((run.manifest(setup, policy, sha), csv))
}

fn cmd_propagate(db: &MaterialDb, cfg: &LoadedConfig, out: &Path) -> Result<(), CliError> {
    let wg = cfg.config.waveguide()?;
    let conv = cfg.config.conversion()?;
    let policy = experiment_policy(&cfg.config.propagate()?);
    let profile = conversion_profile(db, &cfg.config, &wg, &conv)?;
    let setup = build_setup(profile, &wg, &conv)?;
    let (manifest, csv) = run_point(&setup, &policy, &cfg.sha256)?;
    let (mut w, spectrum) = create(out, "spectrum.csv")?;
    w.write_all(&csv)?;
    w.flush()?;
    let path = write_json(out, "manifest.json", &manifest)?;
    println!(
        "command=propagate eta_plus={} eta_minus={} lambda_i_plus_nm={:.4} lambda_i_minus_nm={:.4} conservation_error={} steps={} grid_points={} spectrum={} manifest={} config_sha256={}",
        fmt_f64(manifest.eta_plus),
        fmt_f64(manifest.eta_minus),
        manifest.idler_plus_nm,
        manifest.idler_minus_nm,
        fmt_f64(manifest.log.conservation_error),
        manifest.log.steps,
        manifest.grid.n_points,
        spectrum.display(),
        path.display(),
        cfg.sha256
    );
    Ok(())
}

fn flag_quantity(field: &str, v: &Option<String>, dim: crate::config::Dimension) -> Result<Option<f64>, CliError> {
    v.as_ref()
        .map(|s| parse_quantity(field, &RawQuantity::Text(s.clone()), dim))
        .transpose()
}

/// One design request: file name stem and target.
fn design_targets(cfg: Option<&LoadedConfig>, args: &DesignArgs) -> Result<(Vec<(String, DesignTarget)>, DesignOptions), CliError> {
    use crate::config::Dimension;
    let inputs = match cfg {
        Some(c) => c.config.design()?,
        None => RunConfig::default().design()?,
    };
    let wavelength = flag_quantity("--wavelength", &args.wavelength, Dimension::Length)?;
    let pump_offset = flag_quantity("--pump-offset", &args.pump_offset, Dimension::Length)?.or(inputs.pump_offset);
    let eta_target = args.eta_target.or(inputs.eta_target);

    let mut wanted: Vec<(String, f64)> = Vec::new();
    if args.all {
        wanted.extend(Emitter::ALL.iter().map(|e| (e.name().to_string(), e.wavelength())));
    } else if let Some(name) = args.emitter.as_ref().or(if wavelength.is_none() { inputs.emitter.as_ref() } else { None }) {
        let e: Emitter = name.parse().map_err(|e: fwmbs::Error| CliError::Config(e.to_string()))?;
        wanted.push((e.name().to_string(), e.wavelength()));
    } else if let Some(l) = wavelength.or(inputs.wavelength) {
        wanted.push((format!("sps{:.0}", l * 1e9), l));
    } else {
        return Err(CliError::Config(format!(
            "design needs --emitter ({}), --wavelength or --all",
            Emitter::preset_names()
        )));
    }

    let targets = wanted
        .into_iter()
        .map(|(name, l)| {
            let mut t = DesignTarget::new(l);
            if let Some(v) = inputs.telecom {
                t.lambda_telecom = v;
            }
            if let Some(v) = inputs.height {
                t.height = v;
            }
            if let Some(v) = inputs.length {
                t.length = v;
            }
            if let Some(v) = pump_offset {
                t.pump_offset = v;
            }
            if let Some(v) = eta_target {
                t.eta_target = v;
            }
            t.validate().map_err(|e| CliError::Config(e.to_string()))?;
            Ok((name, t))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut opts = DesignOptions::default();
    if let Some(cap) = inputs.power_cap {
        if !(cap > 0.0) {
            return Err(CliError::Config("design.power_cap: must be positive".into()));
        }
        opts.power_cap = cap;
    }
    Ok((targets, opts))
}

fn cmd_design(db: &MaterialDb, cfg: Option<&LoadedConfig>, args: &DesignArgs, out: &Path) -> Result<(), CliError> {
    let (targets, opts) = design_targets(cfg, args)?;
    let mut reports = Vec::new();
    for (name, target) in &targets {
        let sha = match cfg {
            Some(c) => c.sha256.clone(),
            None => sha256_hex(serde_json::to_string(&(target, &opts)).expect("inputs serialize").as_bytes()),
        };
        let mut report = design_for_sps(db, target, &opts)?;
        report.config_sha256 = sha.clone();
        let path = write_json(out, &format!("design_{name}.json"), &report)?;
        for warning in &report.warnings {
            eprintln!("warning: {name}: {warning}");
        }
        println!(
            "command=design emitter={name} lambda_sps_nm={:.1} lambda_zdw_target_nm={:.1} width_nm={:.2} lambda_zdw_nm={:.2} d_pump1_ps_nm_km={:.3} d_telecom_ps_nm_km={:.3} p_analytic_w={:.4} p_ssfm_w={} warnings={} report={} config_sha256={sha}",
            target.lambda_sps * 1e9,
            report.lambda_zdw_target_nm,
            report.width_nm,
            report.lambda_zdw_nm,
            report.d_at_pump1,
            report.d_at_telecom,
            report.pump_power_analytic,
            report.pump_power_ssfm.map_or_else(|| "na".to_string(), |p| format!("{p:.4}")),
            report.warnings.len(),
            path.display()
        );
        reports.push(report);
    }
    let (mut w, _) = create(out, "design_table.txt")?;
    w.write_all(DesignReport::text_table(&reports).as_bytes())?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
struct SweepRow {
    value: f64,
    manifest: RunManifest,
    eta_cmt_plus: f64,
    eta_cmt_minus: f64,
}

fn cmd_sweep(db: &MaterialDb, cfg: &LoadedConfig, args: &SweepArgs, out: &Path) -> Result<(), CliError> {
    let section = cfg.config.sweep.clone();
    let axis = args
        .axis
        .or(section.as_ref().and_then(|s| s.axis))
        .ok_or_else(|| CliError::Config("sweep.axis: missing (power, signal or width)".into()))?;
    let dim = axis.dimension();
    let pick = |flag: &Option<String>, name: &str, from: Option<&RawQuantity>| -> Result<f64, CliError> {
        match (flag, from) {
            (Some(s), _) => parse_quantity(&format!("--{name}"), &RawQuantity::Text(s.clone()), dim),
            (None, Some(r)) => parse_quantity(&format!("sweep.{name}"), r, dim),
            (None, None) => Err(CliError::Config(format!("sweep.{name}: missing"))),
        }
    };
    let start = pick(&args.start, "start", section.as_ref().and_then(|s| s.start.as_ref()))?;
    let stop = pick(&args.stop, "stop", section.as_ref().and_then(|s| s.stop.as_ref()))?;
    let points = args.points.or(section.as_ref().and_then(|s| s.points)).unwrap_or(11);
    if points == 0 {
        return Err(CliError::Config("sweep.points: at least 1 required".into()));
    }
    let mut values: Vec<f64> = (0..points)
        .map(|k| match points {
            1 => start,
            _ if k + 1 == points => stop,
            _ => start + (stop - start) * k as f64 / (points - 1) as f64,
        })
        .collect();
    values.sort_by(|a, b| a.total_cmp(b));
    if values.iter().any(|v| !(*v >= 0.0)) || (axis != SweepAxis::Power && values.iter().any(|v| !(*v > 0.0))) {
        return Err(CliError::Config(format!("sweep: {} values must be positive", axis.name())));
    }

    let wg = cfg.config.waveguide()?;
    let conv = cfg.config.conversion()?;
    let policy = experiment_policy(&cfg.config.propagate()?);
    let shared = match axis {
        SweepAxis::Width => None,
        _ => Some(conversion_profile(db, &cfg.config, &wg, &conv)?),
    };

    let point = |v: f64| -> Result<(SweepRow, Vec<u8>), CliError> {
        let (mut wg, mut conv) = (wg.clone(), conv);
        match axis {
            SweepAxis::Power => {
                conv.p1 = v;
                conv.p2 = v;
            }
            SweepAxis::Signal => conv.lambda_s = v,
            SweepAxis::Width => wg.geometry.width = v,
        }
        let profile = match &shared {
            Some(p) => p.clone(),
            None => conversion_profile(db, &cfg.config, &wg, &conv)?,
        };
        let setup = build_setup(profile, &wg, &conv)?;
        let (manifest, csv) = run_point(&setup, &policy, &cfg.sha256)?;
        Ok((
            SweepRow {
                value: v,
                manifest,
                eta_cmt_plus: conversion_efficiency(&setup, Branch::Plus, setup.length)?.eta,
                eta_cmt_minus: conversion_efficiency(&setup, Branch::Minus, setup.length)?.eta,
            },
            csv,
        ))
    };
    // Results keep input order whatever the scheduling, so the first failure is deterministic.
    let rows = values
        .par_iter()
        .map(|&v| point(v))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let dir = out.join("points");
    for (i, (row, csv)) in rows.iter().enumerate() {
        write_json(&dir, &format!("point_{i:04}.json"), &row.manifest)?;
        let (mut w, _) = create(&dir, &format!("point_{i:04}_spectrum.csv"))?;
        w.write_all(csv)?;
        w.flush()?;
    }
    let (col, scale) = axis.column();
    let (mut w, path) = create(out, "sweep.csv")?;
    CsvHeader::new(SWEEP_SCHEMA, &cfg.sha256).write(
        &mut w,
        &format!("{col},eta_plus,eta_minus,eta_cmt_plus,eta_cmt_minus,conservation_error,steps,grid_points"),
    )?;
    for (row, _) in &rows {
        let m = &row.manifest;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(row.value * scale),
            fmt_f64(m.eta_plus),
            fmt_f64(m.eta_minus),
            fmt_f64(row.eta_cmt_plus),
            fmt_f64(row.eta_cmt_minus),
            fmt_f64(m.log.conservation_error),
            m.log.steps,
            m.grid.n_points
        )?;
        println!(
            "command=sweep {col}={} eta_plus={} eta_minus={} eta_cmt_plus={}",
            fmt_f64(row.value * scale),
            fmt_f64(m.eta_plus),
            fmt_f64(m.eta_minus),
            fmt_f64(row.eta_cmt_plus)
        );
    }
    w.flush()?;
    println!(
        "command=sweep axis={} points={} csv={} config_sha256={}",
        axis.name(),
        rows.len(),
        path.display(),
        cfg.sha256
    );
    Ok(())
}
