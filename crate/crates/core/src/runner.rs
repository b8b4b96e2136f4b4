//! Experiment orchestration: single evolutions, two-dimensional parameter
//! sweeps and susceptibility scans, with deterministic CSV/JSON emission.
//!
//! Grid points are farmed out to the active rayon pool; results are gathered
//! and written in row-major grid order, so the emitted bytes are independent
//! of the worker count.

use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

use crate::config::{Quantity, RunConfig, SweepSpec};
use crate::dynamics::SqueezeSpec;
use crate::error::{Error, Result};
use crate::measures::{
    default_window, evaluate_measures, Averages, MeasureOptions, MeasureSeries, MeasuredMode,
};
use crate::spectrum::{
    bogoliubov_for, ClosedFormSpectrum, OscillatorParams, QuadraticForm, Regime,
};
use crate::symplectic::symplecticity_residual;

/// Hard ceiling on per-point sample counts in sweeps; points whose spectrum
/// would demand more are recorded as failures rather than stalling the grid.
pub const SWEEP_SAMPLE_CAP: usize = 2_000_000;

/// Shortest round-trip decimal rendering of a float (empty for null fields).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SummarySpectrum {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryAverages {
    pub e_n: f64,
    pub discord: f64,
    pub chi_f: f64,
}

/// Self-consistency residuals reported with every evolution run.
#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub bogoliubov_identity: f64,
    pub reconstruction: f64,
    pub symplecticity_at_t_max: f64,
    pub purity_max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveSummary {
    pub config_echo: RunConfig,
    pub spectrum: SummarySpectrum,
    pub regime: Regime,
    pub averages: SummaryAverages,
    pub residuals: Residuals,
}

pub struct EvolveArtifacts {
    pub series: MeasureSeries,
    pub csv: String,
    pub summary: EvolveSummary,
}

/// Resolves the averaging window for a parameter set from the config. An
/// explicit `time` section wins; otherwise the window spans
/// `average_window_periods` cycles of the slowest nonzero mode.
pub fn resolve_window(cfg: &RunConfig, spec: &ClosedFormSpectrum) -> Result<(f64, usize)> {
    match &cfg.time {
        Some(t) => Ok((t.t_max, t.n_samples)),
        None => default_window(spec, cfg.average_window_periods),
    }
}

/// Runs a single evolution, producing the measure series, its CSV rendering
/// and a JSON-ready summary.
pub fn evolve_artifacts(cfg: &RunConfig) -> Result<EvolveArtifacts> {
    cfg.params.validate()?;
    let spec = ClosedFormSpectrum::from_params(&cfg.params)?;
    let (t_max, n_samples) = resolve_window(cfg, &spec)?;
    let opts = MeasureOptions {
        t_max,
        n_samples,
        delta_t_factor: cfg.dfs.delta_t_factor,
        discord: true,
        chi_f: true,
        fidelity_to_initial: false,
        measured_mode: MeasuredMode::C,
    };
    let series = evaluate_measures(&cfg.params, &cfg.squeeze, &opts)?;

    let mut csv = String::from("t,e_n,discord,chi_f\n");
    let discord = series.discord.as_ref().expect("discord series requested");
    let chi = series.chi_f.as_ref().expect("chi series requested");
    for i in 0..series.times.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_f64(series.times[i]),
            fmt_f64(series.e_n[i]),
            fmt_f64(discord[i]),
            fmt_f64(chi[i])
        );
    }

    let summary = EvolveSummary {
        config_echo: cfg.clone(),
        spectrum: SummarySpectrum {
            k1: spec.k1,
            k2: spec.k2,
            k3: spec.k3,
            q: spec.q,
        },
        regime: cfg.params.classify_regime(),
        averages: SummaryAverages {
            e_n: series.averages.e_n,
            discord: series.averages.discord.unwrap_or(f64::NAN),
            chi_f: series.averages.chi_f.unwrap_or(f64::NAN),
        },
        residuals: evolve_residuals(&cfg.params, &cfg.squeeze, t_max)?,
    };
    Ok(EvolveArtifacts {
        series,
        csv,
        summary,
    })
}

fn evolve_residuals(params: &OscillatorParams, sq: &SqueezeSpec, t_max: f64) -> Result<Residuals> {
    let bog = bogoliubov_for(params)?;
    let form = QuadraticForm::build(params)?;
    let prop = crate::dynamics::Propagator::from_bogoliubov(&bog);
    let s = prop.matrix(t_max);
    let s_dyn = nalgebra::DMatrix::from_fn(6, 6, |i, j| s[(i, j)]);
    let sym = symplecticity_residual(&s_dyn, crate::symplectic::ModeBasis::Complex);

    let traj = crate::dynamics::evolve_trajectory(
        params,
        sq,
        &[0.0, 0.25 * t_max, 0.5 * t_max, 0.75 * t_max],
    )?;
    let mut purity_dev: f64 = 0.0;
    for st in &traj.states {
        for nu in st.symplectic_eigenvalues()? {
            purity_dev = purity_dev.max((nu - 1.0).abs());
        }
    }
    Ok(Residuals {
        bogoliubov_identity: bog.identity_residual(),
        reconstruction: bog.reconstruction_residual(&form),
        symplecticity_at_t_max: sym,
        purity_max_deviation: purity_dev,
    })
}

/// Writes `series.csv` and `summary.json` under `out_dir`.
pub fn run_evolve(cfg: &RunConfig, out_dir: &Path) -> Result<EvolveArtifacts> {
    let artifacts = evolve_artifacts(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("series.csv"), &artifacts.csv)?;
    let json = serde_json::to_string_pretty(&artifacts.summary)
        .map_err(|e| Error::Numerical(format!("summary serialization failed: {e}")))?;
    std::fs::write(out_dir.join("summary.json"), json + "\n")?;
    Ok(artifacts)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// One grid point of a sweep. Quantities are `None` when the point failed
/// (stability violation or numerical failure); rows are always emitted.
#[derive(Debug, Clone)]
pub struct OutputRow {
    pub i: usize,
    pub j: usize,
    pub axis1: f64,
    pub axis2: f64,
    pub values: Vec<Option<f64>>,
    pub regime: Regime,
    pub stability_margin: f64,
}

pub struct SweepArtifacts {
    pub rows: Vec<OutputRow>,
    pub csv: String,
}

fn point_params(base: &OscillatorParams, sweep: &SweepSpec, v1: f64, v2: f64) -> OscillatorParams {
    let mut p = *base;
    sweep.axis1.param.set(&mut p, v1);
    sweep.axis2.param.set(&mut p, v2);
    for tie in &sweep.tied {
        let follows = tie.follows.get(&p);
        tie.param.set(&mut p, tie.factor * follows);
    }
    p
}

fn evaluate_point(
    params: &OscillatorParams,
    sq: &SqueezeSpec,
    quantities: &[Quantity],
    periods: u32,
    delta_t_factor: f64,
) -> Result<Vec<f64>> {
    params.validate()?;
    let spec = ClosedFormSpectrum::from_params(params)?;
    let (t_max, n_samples) = default_window(&spec, periods)?;
    if n_samples > SWEEP_SAMPLE_CAP {
        return Err(Error::Numerical(format!(
            "point needs {n_samples} samples, above the sweep cap {SWEEP_SAMPLE_CAP}"
        )));
    }
    let opts = MeasureOptions {
        t_max,
        n_samples,
        delta_t_factor,
        discord: quantities.contains(&Quantity::DiscordAvg),
        chi_f: quantities.contains(&Quantity::ChiFAvg),
        fidelity_to_initial: quantities.contains(&Quantity::FidelityAvg),
        measured_mode: MeasuredMode::C,
    };
    let series = evaluate_measures(params, sq, &opts)?;
    let pick = |avg: &Averages, q: &Quantity| match q {
        Quantity::ENAvg => Some(avg.e_n),
        Quantity::DiscordAvg => avg.discord,
        Quantity::FidelityAvg => avg.fidelity,
        Quantity::ChiFAvg => avg.chi_f,
    };
    quantities
        .iter()
        .map(|q| {
            pick(&series.averages, q)
                .ok_or_else(|| Error::Numerical("requested quantity missing".into()))
        })
        .collect()
}

/// Evaluates the full grid. Points run in parallel; rows come back in
/// row-major order regardless of scheduling.
pub fn sweep_artifacts(cfg: &RunConfig) -> Result<SweepArtifacts> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("config has no `sweep` section".into()))?;
    sweep.validate()?;
    let v1 = sweep.axis1.values();
    let v2 = sweep.axis2.values();
    let indices: Vec<(usize, usize)> = (0..v1.len())
        .flat_map(|i| (0..v2.len()).map(move |j| (i, j)))
        .collect();

    let rows: Vec<OutputRow> = indices
        .par_iter()
        .map(|&(i, j)| {
            let params = point_params(&cfg.params, sweep, v1[i], v2[j]);
            let stability = params.stability_check();
            let regime = params.classify_regime();
            let values = if stability.ok {
                match evaluate_point(
                    &params,
                    &cfg.squeeze,
                    &sweep.quantities,
                    cfg.average_window_periods,
                    cfg.dfs.delta_t_factor,
                ) {
                    Ok(vals) => vals.into_iter().map(Some).collect(),
                    Err(_) => vec![None; sweep.quantities.len()],
                }
            } else {
                vec![None; sweep.quantities.len()]
            };
            OutputRow {
                i,
                j,
                axis1: v1[i],
                axis2: v2[j],
                values,
                regime,
                stability_margin: stability.margin,
            }
        })
        .collect();

    let mut csv = String::new();
    let _ = write!(
        csv,
        "i,j,{},{}",
        sweep.axis1.param.as_str(),
        sweep.axis2.param.as_str()
    );
    for q in &sweep.quantities {
        let _ = write!(csv, ",{}", q.column());
    }
    csv.push_str(",regime,stability_margin\n");
    for row in &rows {
        let _ = write!(
            csv,
            "{},{},{},{}",
            row.i,
            row.j,
            fmt_f64(row.axis1),
            fmt_f64(row.axis2)
        );
        for v in &row.values {
            let _ = write!(csv, ",{}", fmt_opt(*v));
        }
        let _ = writeln!(csv, ",{},{}", row.regime.as_str(), fmt_f64(row.stability_margin));
    }
    Ok(SweepArtifacts { rows, csv })
}

/// Writes `sweep.csv` and the echoed configuration under `out_dir`.
pub fn run_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<SweepArtifacts> {
    let artifacts = sweep_artifacts(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("sweep.csv"), &artifacts.csv)?;
    let json = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::Numerical(format!("config echo serialization failed: {e}")))?;
    std::fs::write(out_dir.join("sweep_meta.json"), json + "\n")?;
    Ok(artifacts)
}

// ---------------------------------------------------------------------------
// susceptibility scan
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DfsScanRow {
    pub omega_b: f64,
    pub chi_f_avg: Option<f64>,
    pub chi_f_avg_normalized: Option<f64>,
    pub regime: Regime,
}

pub struct DfsScanArtifacts {
    pub rows: Vec<DfsScanRow>,
    pub csv: String,
}

/// Scans the mediator frequency, averaging the susceptibility at each point
/// and normalizing the scan by its own maximum.
pub fn dfs_scan_artifacts(cfg: &RunConfig) -> Result<DfsScanArtifacts> {
    let scan = cfg
        .dfs_scan
        .as_ref()
        .ok_or_else(|| Error::Config("config has no `dfs_scan` section".into()))?;
    scan.validate()?;
    let omegas = scan.values();

    let points: Vec<(Regime, Option<f64>)> = omegas
        .par_iter()
        .map(|&wb| {
            let mut p = cfg.params;
            p.omega_b = wb;
            if let Some(ratio) = scan.lambda_b_ratio {
                p.lambda_b = ratio * wb;
            }
            let regime = p.classify_regime();
            let chi = (|| -> Result<f64> {
                p.validate()?;
                let spec = ClosedFormSpectrum::from_params(&p)?;
                let (t_max, n_samples) = default_window(&spec, cfg.average_window_periods)?;
                if n_samples > SWEEP_SAMPLE_CAP {
                    return Err(Error::Numerical("sample cap exceeded".into()));
                }
                let opts = MeasureOptions {
                    t_max,
                    n_samples,
                    delta_t_factor: cfg.dfs.delta_t_factor,
                    discord: false,
                    chi_f: true,
                    fidelity_to_initial: false,
                    measured_mode: MeasuredMode::C,
                };
                let series = evaluate_measures(&p, &cfg.squeeze, &opts)?;
                series
                    .averages
                    .chi_f
                    .ok_or_else(|| Error::Numerical("missing susceptibility".into()))
            })();
            (regime, chi.ok())
        })
        .collect();

    let max = points
        .iter()
        .filter_map(|(_, c)| *c)
        .fold(0.0_f64, f64::max);
    let rows: Vec<DfsScanRow> = omegas
        .iter()
        .zip(points.iter())
        .map(|(&wb, (regime, chi))| DfsScanRow {
            omega_b: wb,
            chi_f_avg: *chi,
            chi_f_avg_normalized: chi.map(|c| if max > 0.0 { c / max } else { 0.0 }),
            regime: *regime,
        })
        .collect();

    let mut csv = String::from("omega_b,chi_f_avg,chi_f_avg_normalized,regime\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_f64(row.omega_b),
            fmt_opt(row.chi_f_avg),
            fmt_opt(row.chi_f_avg_normalized),
            row.regime.as_str()
        );
    }
    Ok(DfsScanArtifacts { rows, csv })
}

/// Writes `dfs_scan.csv` and the echoed configuration under `out_dir`.
pub fn run_dfs_scan(cfg: &RunConfig, out_dir: &Path) -> Result<DfsScanArtifacts> {
    let artifacts = dfs_scan_artifacts(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("dfs_scan.csv"), &artifacts.csv)?;
    let json = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::Numerical(format!("config echo serialization failed: {e}")))?;
    std::fs::write(out_dir.join("dfs_scan_meta.json"), json + "\n")?;
    Ok(artifacts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn weak_cfg() -> RunConfig {
        parse_config(
            r#"{
              "params": {"omega_a": 1.0, "omega_b": 1.0, "lambda_a": 0.0,
                         "lambda_b": 0.0, "g_a": 0.0, "g_b": 0.0},
              "time": {"t_max": 100.0, "n_samples": 4096}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn decoupled_vacuum_run_is_all_zero() {
        let art = evolve_artifacts(&weak_cfg()).unwrap();
        assert!(art.summary.averages.e_n.abs() < 1e-12);
        assert!(art.summary.averages.discord.abs() < 1e-9);
        assert!(art.summary.averages.chi_f.abs() < 1e-12);
        assert!(art.csv.starts_with("t,e_n,discord,chi_f\n"));
        assert_eq!(art.csv.lines().count(), 4097);
    }

    #[test]
    fn tiny_sweep_has_complete_rows() {
        let cfg = parse_config(
            r#"{
              "params": {"omega_a": 1.0, "omega_b": 1.0, "lambda_a": 0.0,
                         "lambda_b": 0.0, "g_a": 0.0, "g_b": 0.0},
              "sweep": {
                "axis1": {"param": "omega_a", "min": 0.2, "max": 2.0, "n_points": 2},
                "axis2": {"param": "g_a", "min": 0.0, "max": 1.2, "n_points": 2},
                "quantities": ["e_n_avg"]
              }
            }"#,
        )
        .unwrap();
        let art = sweep_artifacts(&cfg).unwrap();
        assert_eq!(art.rows.len(), 4);
        // (omega_a = 0.2, g_a = 1.2) violates the coupling bound -> null row
        let bad = art
            .rows
            .iter()
            .find(|r| r.axis1 == 0.2 && r.axis2 == 1.2)
            .unwrap();
        assert!(bad.stability_margin < 0.0);
        assert!(bad.values[0].is_none());
        // decoupled points average to zero
        let good = art
            .rows
            .iter()
            .find(|r| r.axis1 == 2.0 && r.axis2 == 0.0)
            .unwrap();
        assert!(good.values[0].unwrap().abs() < 1e-12);
        // row-major order
        let ids: Vec<(usize, usize)> = art.rows.iter().map(|r| (r.i, r.j)).collect();
        assert_eq!(ids, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn single_point_dfs_scan() {
        let cfg = parse_config(
            r#"{
              "params": {"omega_a": 5.0, "omega_b": 5.0, "lambda_a": 2.5,
                         "lambda_b": 5.0, "g_a": 0.6, "g_b": 0.6},
              "dfs_scan": {"min": 4.0, "max": 4.0, "n_points": 1, "lambda_b_ratio": 1.0}
            }"#,
        )
        .unwrap();
        let art = dfs_scan_artifacts(&cfg).unwrap();
        assert_eq!(art.rows.len(), 1);
        assert_eq!(art.rows[0].regime, Regime::ExactHmr);
        assert!(art.rows[0].chi_f_avg.unwrap() > 0.0);
        assert_eq!(art.rows[0].chi_f_avg_normalized.unwrap(), 1.0);
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-7, 123456.789, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_opt(None), "");
    }
}
