//! Convergence sweeps: one deterministic reference run, then stochastic
//! replicates for every `N` of the sweep, compared in Sobolev norms.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::decomposition::{check_aligned, decomposition_residual, martingale_functional, walk_ledger};
use crate::deterministic::{dissipation_bound, run_det_strided, DetTrajectory};
use crate::error::{Error, Result};
use crate::grid::{Functional, Grid, GridFunction};
use crate::kinetics::ChannelKinetics;
use crate::rng;
use crate::stochastic::{empirical_from_states, run_stoch_strided, StochTrajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationMetrics {
    /// `sup_t ‖V_t - v_t‖_{L²}`
    pub dev_l2: f64,
    /// `sup_t ‖V_t - v_t‖_{H¹₀}`
    pub dev_h10: f64,
    /// `sup_t ‖C_{ξ,N}(Ξ_t) - μ⌞p_{ξ,t}‖_{H⁻¹}` per state.
    pub dev_hm1: Vec<f64>,
    /// `sup_t ‖M_{ξ,t}‖_{H⁻¹}` per state.
    pub mart_hm1: Vec<f64>,
}

impl DeviationMetrics {
    pub fn dev_hm1_max(&self) -> f64 {
        self.dev_hm1.iter().copied().fold(0.0, f64::max)
    }

    pub fn mart_hm1_max(&self) -> f64 {
        self.mart_hm1.iter().copied().fold(0.0, f64::max)
    }
}

/// `(sup ‖a - b‖_{L²}, sup ‖a - b‖_{H¹₀})` over paired samples.
pub fn voltage_deviation<'a>(
    a: impl IntoIterator<Item = &'a GridFunction>,
    b: impl IntoIterator<Item = &'a GridFunction>,
) -> (f64, f64) {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            (d.l2_norm(), d.h10_norm())
        })
        .fold((0.0, 0.0), |(l, h), (dl, dh)| (l.max(dl), h.max(dh)))
}

pub fn deviation_metrics(stoch: &StochTrajectory, det: &DetTrajectory, kinetics: &ChannelKinetics) -> Result<DeviationMetrics> {
    check_aligned(stoch, det)?;
    let (dev_l2, dev_h10) = voltage_deviation(
        stoch.samples.iter().map(|s| &s.v),
        det.samples.iter().map(|s| &s.v),
    );
    let k = kinetics.len();
    let mut dev_hm1 = vec![0.0_f64; k];
    let mut mart_hm1 = vec![0.0_f64; k];
    walk_ledger(stoch, kinetics, |idx, _, ledger| {
        for xi in 0..k {
            let mut c = empirical_from_states(&stoch.positions, &ledger.states, stoch.n, xi, &stoch.grid);
            c.add_scaled(&Functional::density(&det.samples[idx].p[xi]), -1.0);
            dev_hm1[xi] = dev_hm1[xi].max(c.hminus1_norm());
            mart_hm1[xi] = mart_hm1[xi].max(martingale_functional(stoch, ledger, xi).hminus1_norm());
        }
        Ok(())
    })?;
    Ok(DeviationMetrics {
        dev_l2,
        dev_h10,
        dev_hm1,
        mart_hm1,
    })
}

/// Everything measured on one successful stochastic replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateResult {
    pub metrics: DeviationMetrics,
    /// Largest decomposition-identity residual over the test functions.
    pub decomposition_residual: f64,
    /// `min_t (bound - ∫_0^t ‖DV‖²)`; nonnegative when the estimate holds.
    pub dissipation_margin: f64,
    pub sup_norm: f64,
    pub jumps: usize,
    /// `⟨φ₁, V_T⟩`
    pub final_projection: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub n: u32,
    pub replicate: u32,
    pub seed: u64,
    pub outcome: std::result::Result<ReplicateResult, String>,
    pub wall_ms: u64,
}

impl RunRecord {
    pub fn status(&self) -> String {
        match &self.outcome {
            Ok(_) => "ok".into(),
            Err(e) => format!("failed: {e}"),
        }
    }
}

/// Test functions for the decomposition residual: `φ₁`, `φ₂` and a random
/// hat combination drawn from the run seed.
pub fn residual_test_functions(grid: &Grid, seed: u64) -> Vec<GridFunction> {
    let mut r = rng::stream(seed, rng::INIT_STREAM - 1);
    let random = GridFunction::from_interior(
        *grid,
        (0..grid.interior_len()).map(|_| r.random_range(-1.0..1.0)).collect(),
    )
    .expect("sized to the grid");
    vec![grid.eigenfunction(1), grid.eigenfunction(2), random]
}

fn replicate(
    cfg: &RunConfig,
    kinetics: &ChannelKinetics,
    det: &DetTrajectory,
    n: u32,
    seed: u64,
) -> Result<ReplicateResult> {
    let init = cfg.initial_stoch_state(n, seed)?;
    let traj = run_stoch_strided(&init, cfg.horizon, cfg.dt, kinetics, seed, cfg.sample_stride)?;
    let metrics = deviation_metrics(&traj, det, kinetics)?;
    let mut residual: f64 = 0.0;
    for phi in residual_test_functions(&traj.grid, seed) {
        residual = residual.max(decomposition_residual(&traj, det, &phi, kinetics)?);
    }
    let bound = dissipation_bound(traj.initial_l2, traj.sup_norm, cfg.half_length, cfg.horizon, kinetics);
    let dissipation_margin = traj
        .samples
        .iter()
        .map(|s| bound - s.dissipation)
        .fold(f64::INFINITY, f64::min);
    let last = &traj.samples.last().expect("initial sample").v;
    let final_projection = last.pairing(&Functional::density(&traj.grid.eigenfunction(1).to_nodal()))?;
    Ok(ReplicateResult {
        metrics,
        decomposition_residual: residual,
        dissipation_margin,
        sup_norm: traj.sup_norm,
        jumps: traj.jumps.len(),
        final_projection,
    })
}

/// `⟨φ₁, V_T⟩` for `replicates` independent stochastic runs at scale `n`,
/// seeded by `derive_seed(cfg.seed, n, rep)`. Only the final sample is kept.
pub fn final_projections(cfg: &RunConfig, n: u32, replicates: u32) -> Result<Vec<f64>> {
    cfg.validate()?;
    let kinetics = cfg.kinetics()?;
    let grid = cfg.grid()?;
    let phi = Functional::density(&grid.eigenfunction(1).to_nodal());
    let stride = (cfg.horizon / cfg.dt).ceil() as usize + 1;
    (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let seed = rng::derive_seed(cfg.seed, n, rep);
            let init = cfg.initial_stoch_state(n, seed)?;
            let traj = run_stoch_strided(&init, cfg.horizon, cfg.dt, &kinetics, seed, stride)?;
            traj.samples.last().expect("initial sample").v.pairing(&phi)
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Double `M` and halve `Δt`.
    pub refine: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub sup_norm: f64,
    pub gradient_sup: f64,
    pub dissipation: f64,
    pub dissipation_bound: f64,
    pub max_sum_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub n: u32,
    pub ok: usize,
    pub failed: usize,
    pub dev_l2: Option<f64>,
    pub dev_h10: Option<f64>,
    pub dev_hm1_max: Option<f64>,
    pub mart_hm1_max: Option<f64>,
    pub max_decomposition_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub metric: String,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    pub refine: bool,
    pub cells: usize,
    pub dt: f64,
    pub sweep: Vec<u32>,
    pub replicates: u32,
    pub states: Vec<String>,
    pub reference: ReferenceSummary,
    pub medians: Vec<MedianRow>,
    pub rate_fit: Option<RateFit>,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub config: RunConfig,
    pub reference: DetTrajectory,
    pub records: Vec<RunRecord>,
    pub manifest: Manifest,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

const RATE_NOTE: &str = "heuristic N^-1/2 reference; only convergence is asserted";

/// Least squares of `log y` against `log n`.
pub fn fit_power_law(points: &[(f64, f64)], metric: &str) -> Result<RateFit> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 distinct N, got {}",
            distinct.len()
        )));
    }
    if points.iter().any(|&(n, y)| !(n > 0.0) || !(y > 0.0)) {
        return Err(Error::InsufficientData("log-log fit needs positive values".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        metric: metric.into(),
        slope,
        intercept,
        residual: (sse / len).sqrt(),
        note: RATE_NOTE.into(),
    })
}

fn medians_by_n(records: &[RunRecord], sweep: &[u32]) -> Vec<MedianRow> {
    sweep
        .iter()
        .map(|&n| {
            let ok: Vec<&ReplicateResult> = records
                .iter()
                .filter(|r| r.n == n)
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let failed = records.iter().filter(|r| r.n == n && r.outcome.is_err()).count();
            let med = |f: &dyn Fn(&ReplicateResult) -> f64| median(&mut ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            MedianRow {
                n,
                ok: ok.len(),
                failed,
                dev_l2: med(&|r| r.metrics.dev_l2),
                dev_h10: med(&|r| r.metrics.dev_h10),
                dev_hm1_max: med(&|r| r.metrics.dev_hm1_max()),
                mart_hm1_max: med(&|r| r.metrics.mart_hm1_max()),
                max_decomposition_residual: ok.iter().map(|r| r.decomposition_residual).reduce(f64::max),
            }
        })
        .collect()
}

pub fn run_sweep(cfg: &RunConfig, opts: &SweepOptions) -> Result<SweepOutcome> {
    cfg.validate()?;
    let cfg = if opts.refine { cfg.refined() } else { cfg.clone() };
    match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| sweep_in_pool(cfg, opts.refine)),
        None => sweep_in_pool(cfg, opts.refine),
    }
}

fn sweep_in_pool(cfg: RunConfig, refine: bool) -> Result<SweepOutcome> {
    let kinetics = cfg.kinetics()?;
    let det = run_det_strided(&cfg.initial_det_state()?, cfg.horizon, cfg.dt, &kinetics, cfg.sample_stride)?;
    let last = det.last();
    let reference = ReferenceSummary {
        sup_norm: det.sup_norm,
        gradient_sup: det.gradient_sup,
        dissipation: last.dissipation,
        dissipation_bound: dissipation_bound(det.initial_l2, det.sup_norm, cfg.half_length, cfg.horizon, &kinetics),
        max_sum_defect: det.max_sum_defect(),
    };

    let tasks: Vec<(u32, u32)> = cfg
        .sweep
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let records: Vec<RunRecord> = tasks
        .par_iter()
        .map(|&(n, rep)| {
            let seed = rng::derive_seed(cfg.seed, n, rep);
            let start = Instant::now();
            let outcome = replicate(&cfg, &kinetics, &det, n, seed).map_err(|e| e.to_string());
            RunRecord {
                n,
                replicate: rep,
                seed,
                outcome,
                wall_ms: start.elapsed().as_millis() as u64,
            }
        })
        .collect();

    let medians = medians_by_n(&records, &cfg.sweep);
    let points: Vec<(f64, f64)> = medians
        .iter()
        .filter_map(|m| m.dev_l2.map(|y| (m.n as f64, y)))
        .collect();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config_digest: cfg.digest(),
        seed: cfg.seed,
        refine,
        cells: cfg.cells,
        dt: cfg.dt,
        sweep: cfg.sweep.clone(),
        replicates: cfg.replicates,
        states: cfg.kinetics.states.iter().map(|s| s.name.clone()).collect(),
        reference,
        medians,
        rate_fit: fit_power_law(&points, "dev_l2").ok(),
    };
    Ok(SweepOutcome {
        config: cfg,
        reference: det,
        records,
        manifest,
    })
}

/// Column names of `results.csv`.
pub fn results_header(states: &[String]) -> Vec<String> {
    let mut h: Vec<String> = ["N", "replicate", "seed", "dev_l2", "dev_h10"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(states.iter().map(|s| format!("dev_hm1_{s}")));
    h.extend(states.iter().map(|s| format!("mart_hm1_{s}")));
    h.push("wall_ms".into());
    h.push("status".into());
    h
}

pub fn write_results(path: &Path, states: &[String], records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(results_header(states))?;
    for r in records {
        let mut row = vec![r.n.to_string(), r.replicate.to_string(), r.seed.to_string()];
        match &r.outcome {
            Ok(res) => {
                let m = &res.metrics;
                row.push(m.dev_l2.to_string());
                row.push(m.dev_h10.to_string());
                row.extend(m.dev_hm1.iter().chain(&m.mart_hm1).map(f64::to_string));
            }
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 2 + 2 * states.len())),
        }
        row.push(r.wall_ms.to_string());
        row.push(r.status());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv` and `manifest.json` into `dir`.
pub fn write_sweep(outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results(&dir.join("results.csv"), &outcome.manifest.states, &outcome.records)?;
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&outcome.manifest)? + "\n",
    )?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub n: u32,
    pub replicate: u32,
    pub seed: u64,
    pub values: BTreeMap<String, f64>,
    pub status: String,
}

/// Parsed `results.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultsTable {
    pub header: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn read(path: &Path) -> Result<Self> {
        Self::from_reader(fs::File::open(path)?)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        for required in ["N", "replicate", "seed", "status"] {
            if !header.iter().any(|h| h == required) {
                return Err(Error::InsufficientData(format!("results lack column '{required}'")));
            }
        }
        let parse_err = |col: &str, v: &str| Error::InsufficientData(format!("bad {col} value '{v}'"));
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let mut row = ResultRow {
                n: 0,
                replicate: 0,
                seed: 0,
                values: BTreeMap::new(),
                status: String::new(),
            };
            for (col, v) in header.iter().zip(rec.iter()) {
                match col.as_str() {
                    "N" => row.n = v.parse().map_err(|_| parse_err(col, v))?,
                    "replicate" => row.replicate = v.parse().map_err(|_| parse_err(col, v))?,
                    "seed" => row.seed = v.parse().map_err(|_| parse_err(col, v))?,
                    "status" => row.status = v.to_string(),
                    _ if v.is_empty() => {}
                    _ => {
                        row.values.insert(col.clone(), v.parse().map_err(|_| parse_err(col, v))?);
                    }
                }
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    /// Value of `metric` on a row; `dev_hm1_max` and `mart_hm1_max` take the
    /// maximum over the per-state columns.
    pub fn metric(&self, row: &ResultRow, metric: &str) -> Option<f64> {
        if let Some(prefix) = metric.strip_suffix("_max") {
            let prefix = format!("{prefix}_");
            return row
                .values
                .iter()
                .filter(|(k, _)| k.starts_with(&prefix))
                .map(|(_, &v)| v)
                .reduce(f64::max);
        }
        row.values.get(metric).copied()
    }
}

/// Power-law fit of the per-`N` medians of `metric` over rows with status
/// `ok`.
pub fn fit_rate(table: &ResultsTable, metric: &str) -> Result<RateFit> {
    let mut by_n: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for row in table.rows.iter().filter(|r| r.status == "ok") {
        if let Some(v) = table.metric(row, metric) {
            by_n.entry(row.n).or_default().push(v);
        }
    }
    let points: Vec<(f64, f64)> = by_n
        .into_iter()
        .filter_map(|(n, mut v)| median(&mut v).map(|m| (n as f64, m)))
        .collect();
    fit_power_law(&points, metric)
}
