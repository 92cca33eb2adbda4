//! Configuration-driven Monte Carlo experiments.
//!
//! Trial `t` draws its channel from `split_seed(master, t)` at every sweep point
//! and for every algorithm, so schemes are always compared on identical channels.
//! Each algorithm additionally gets its own RNG stream derived from the trial seed
//! and its label, which keeps results independent of the algorithm subset.
//!
//! Output files (written by [`write_outputs`]):
//!
//! * `trials.csv`: one row per (point, trial, algorithm). Columns are
//!   `[x|elements,] trial, seed_fingerprint, algorithm, min_rate,
//!   per_user_rates, wall_time_ms, iterations, status, message`. The point
//!   column exists only for the sweeps.
//! * `summary.csv`: `[x|elements,] algorithm, trials_ok, mean_min_rate,
//!   rate_95_likely`.
//! * `cdf.csv` (cdf only): `algorithm, rank, min_rate, cdf`.
//! * `traces.csv` (convergence only): `trial, algorithm, iteration, min_rate`.
//!   Iterations are outer alternating iterations for alg5 and single-coordinate
//!   updates for alg6.
//!
//! Apart from `wall_time_ms`, rerunning a config reproduces every file byte for byte.

mod config;

pub use config::{AlgorithmSpec, ExperimentConfig, ExperimentKind, SolverSettings, SweepConfig, SweepPoint};

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::algorithms::{
    algorithm1_single_user_continuous, algorithm2_single_user_discrete, algorithm5_alternating,
    algorithm6_zf_refinement, no_ris_baseline, random_phase_baseline, AlgorithmOptions, OptimizationResult,
};
use crate::error::{Error, Result};
use crate::geometry::{generate_realization, split_seed, ChannelRealization};
use crate::model::rate;

/// Empirical quantile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("percentile of an empty list"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile {q} outside (0, 1)")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("percentile of a list containing NaN"));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    Ok(s[lo] + (h - lo as f64) * (s[hi] - s[lo]))
}

/// The "95%-likely" rate: the 5th percentile of per-trial minimum rates.
pub fn rate_95_likely(values: &[f64]) -> Result<f64> {
    percentile(values, 0.05)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrialStatus {
    Ok,
    /// A solver limit was hit; the result is still valid.
    Warning,
    /// The algorithm failed; no rate is available.
    Failed,
}

impl TrialStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Warning => "warning",
            TrialStatus::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub point: SweepPoint,
    pub trial: usize,
    pub fingerprint: u64,
    pub algorithm: AlgorithmSpec,
    /// NaN when the algorithm failed.
    pub min_rate: f64,
    pub per_user_rates: Vec<f64>,
    pub wall_time_ms: f64,
    pub iterations: usize,
    pub status: TrialStatus,
    pub message: String,
    /// Per-iteration minimum rate (alg5, alg6).
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub point: SweepPoint,
    pub algorithm: AlgorithmSpec,
    pub trials_ok: usize,
    /// NaN when no trial succeeded.
    pub mean_min_rate: f64,
    pub rate_95_likely: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub algorithms: Vec<AlgorithmSpec>,
    /// Ordered by point, then trial, then algorithm as listed.
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    /// (point, trial) pairs in which at least one algorithm failed.
    pub failed_trials: usize,
    pub total_trials: usize,
}

impl ExperimentOutput {
    /// Whether at least half of all trials saw a solver failure.
    pub fn mostly_failed(&self) -> bool {
        2 * self.failed_trials >= self.total_trials
    }

    pub fn summary_for(&self, point: SweepPoint, algorithm: AlgorithmSpec) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.point == point && r.algorithm == algorithm)
    }

    /// Successful minimum rates of one algorithm at one point, in trial order.
    pub fn min_rates(&self, point: SweepPoint, algorithm: AlgorithmSpec) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.point == point && r.algorithm == algorithm && r.status != TrialStatus::Failed)
            .map(|r| r.min_rate)
            .collect()
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Runs one scheme on one realization.
pub fn run_algorithm(
    spec: AlgorithmSpec,
    real: &ChannelRealization,
    p: f64,
    opts: &AlgorithmOptions,
    rng: &mut ChaCha8Rng,
) -> Result<OptimizationResult> {
    match spec {
        AlgorithmSpec::Alg1 => algorithm1_single_user_continuous(real, p, opts, rng),
        AlgorithmSpec::Alg2 { bits } => algorithm2_single_user_discrete(real, p, bits, opts, rng),
        AlgorithmSpec::Alg5 => algorithm5_alternating(real, p, opts, rng),
        AlgorithmSpec::Alg6 { bits } => algorithm6_zf_refinement(real, p, bits, opts),
        AlgorithmSpec::RandomPhase { bits } => random_phase_baseline(real, p, bits, opts, rng),
        AlgorithmSpec::NoRis => no_ris_baseline(real, p, opts),
    }
}

fn run_unit(
    cfg: &ExperimentConfig,
    specs: &[AlgorithmSpec],
    opts: &AlgorithmOptions,
    point: SweepPoint,
    trial: usize,
) -> Vec<TrialRecord> {
    let seed = split_seed(cfg.seed, trial as u64);
    let scenario = cfg.scenario_at(point);
    let p = scenario.snr_linear();
    let real = match generate_realization(&scenario, seed) {
        Ok(r) => r,
        Err(e) => {
            warn!("{} trial {trial}: channel generation failed: {e}", point.label());
            return specs
                .iter()
                .map(|&algorithm| failed_record(point, trial, 0, algorithm, 0.0, &e))
                .collect();
        }
    };
    let fingerprint = real.fingerprint();
    specs
        .iter()
        .map(|&algorithm| {
            let label = algorithm.to_string();
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, fnv1a(&label)));
            let start = Instant::now();
            let out = run_algorithm(algorithm, &real, p, opts, &mut rng);
            let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            match out {
                Ok(res) => {
                    debug!("{} trial {trial} {label}: min rate {:.4}", point.label(), res.min_rate);
                    let status = if res.warnings.is_empty() {
                        TrialStatus::Ok
                    } else {
                        TrialStatus::Warning
                    };
                    TrialRecord {
                        point,
                        trial,
                        fingerprint,
                        algorithm,
                        min_rate: res.min_rate,
                        per_user_rates: res.per_user_rate,
                        wall_time_ms,
                        iterations: res.iterations,
                        status,
                        message: res.warnings.join("; "),
                        trace: res.trace.iter().map(|&s| rate(s)).collect(),
                    }
                }
                Err(e) => {
                    warn!("{} trial {trial} {label}: {e}", point.label());
                    failed_record(point, trial, fingerprint, algorithm, wall_time_ms, &e)
                }
            }
        })
        .collect()
}

fn failed_record(
    point: SweepPoint,
    trial: usize,
    fingerprint: u64,
    algorithm: AlgorithmSpec,
    wall_time_ms: f64,
    e: &Error,
) -> TrialRecord {
    TrialRecord {
        point,
        trial,
        fingerprint,
        algorithm,
        min_rate: f64::NAN,
        per_user_rates: vec![],
        wall_time_ms,
        iterations: 0,
        status: TrialStatus::Failed,
        message: e.to_string(),
        trace: vec![],
    }
}

fn summarize(points: &[SweepPoint], specs: &[AlgorithmSpec], records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &point in points {
        for &algorithm in specs {
            let rates: Vec<f64> = records
                .iter()
                .filter(|r| r.point == point && r.algorithm == algorithm && r.status != TrialStatus::Failed)
                .map(|r| r.min_rate)
                .collect();
            let mean = if rates.is_empty() {
                f64::NAN
            } else {
                rates.iter().sum::<f64>() / rates.len() as f64
            };
            rows.push(SummaryRow {
                point,
                algorithm,
                trials_ok: rates.len(),
                mean_min_rate: mean,
                rate_95_likely: rate_95_likely(&rates).unwrap_or(f64::NAN),
            });
        }
    }
    rows
}

/// Runs every (point, trial) on a pool of `jobs` threads; results come back in order.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    let specs = cfg.validate()?;
    if jobs == 0 {
        return Err(Error::config("jobs must be at least 1"));
    }
    let opts = cfg.options.to_options();
    let points = cfg.points();
    let units: Vec<(SweepPoint, usize)> = points
        .iter()
        .flat_map(|&p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    info!(
        "{}: {} points x {} trials x {} algorithms on {jobs} threads",
        cfg.experiment.name(),
        points.len(),
        cfg.trials,
        specs.len()
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
    let per_unit: Vec<Vec<TrialRecord>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(p, t)| run_unit(cfg, &specs, &opts, p, t))
            .collect()
    });
    let failed_trials = per_unit
        .iter()
        .filter(|u| u.iter().any(|r| r.status == TrialStatus::Failed))
        .count();
    let records: Vec<TrialRecord> = per_unit.into_iter().flatten().collect();
    let summary = summarize(&points, &specs, &records);
    Ok(ExperimentOutput {
        config: cfg.clone(),
        algorithms: specs,
        records,
        summary,
        failed_trials,
        total_trials: units.len(),
    })
}

fn point_header(kind: ExperimentKind) -> Option<&'static str> {
    match kind {
        ExperimentKind::LineSweep => Some("x"),
        ExperimentKind::ElementSweep => Some("elements"),
        ExperimentKind::Cdf | ExperimentKind::Convergence => None,
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6}")
    }
}

fn with_point(kind: ExperimentKind, point: SweepPoint, mut rest: Vec<String>) -> Vec<String> {
    if point_header(kind).is_some() {
        rest.insert(0, point.value().unwrap_or_default());
    }
    rest
}

fn header(kind: ExperimentKind, cols: &[&str]) -> Vec<String> {
    point_header(kind).into_iter().chain(cols.iter().copied()).map(String::from).collect()
}

/// Writes the CSV files for `out` into `dir` and returns their paths.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let kind = out.config.experiment;
    let mut written = Vec::new();

    let path = dir.join("trials.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header(
        kind,
        &[
            "trial",
            "seed_fingerprint",
            "algorithm",
            "min_rate",
            "per_user_rates",
            "wall_time_ms",
            "iterations",
            "status",
            "message",
        ],
    ))?;
    for r in &out.records {
        let rates: Vec<String> = r.per_user_rates.iter().map(|&v| fmt_f64(v)).collect();
        w.write_record(with_point(
            kind,
            r.point,
            vec![
                r.trial.to_string(),
                format!("{:016x}", r.fingerprint),
                r.algorithm.to_string(),
                fmt_f64(r.min_rate),
                rates.join("|"),
                format!("{:.3}", r.wall_time_ms),
                r.iterations.to_string(),
                r.status.as_str().to_string(),
                r.message.clone(),
            ],
        ))?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header(kind, &["algorithm", "trials_ok", "mean_min_rate", "rate_95_likely"]))?;
    for s in &out.summary {
        w.write_record(with_point(
            kind,
            s.point,
            vec![
                s.algorithm.to_string(),
                s.trials_ok.to_string(),
                fmt_f64(s.mean_min_rate),
                fmt_f64(s.rate_95_likely),
            ],
        ))?;
    }
    w.flush()?;
    written.push(path);

    if kind == ExperimentKind::Cdf {
        let path = dir.join("cdf.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["algorithm", "rank", "min_rate", "cdf"])?;
        for &alg in &out.algorithms {
            let mut rates = out.min_rates(SweepPoint::Base, alg);
            rates.sort_by(f64::total_cmp);
            let n = rates.len();
            for (i, v) in rates.iter().enumerate() {
                w.write_record([
                    alg.to_string(),
                    (i + 1).to_string(),
                    fmt_f64(*v),
                    fmt_f64((i + 1) as f64 / n as f64),
                ])?;
            }
        }
        w.flush()?;
        written.push(path);
    }

    if kind == ExperimentKind::Convergence {
        let path = dir.join("traces.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["trial", "algorithm", "iteration", "min_rate"])?;
        for r in out.records.iter().filter(|r| !r.trace.is_empty()) {
            for (i, v) in r.trace.iter().enumerate() {
                w.write_record([r.trial.to_string(), r.algorithm.to_string(), (i + 1).to_string(), fmt_f64(*v)])?;
            }
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_order_statistics() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5).unwrap(), 3.0);
        assert_eq!(percentile(&[5.0, 1.0, 4.0, 2.0, 3.0], 0.25).unwrap(), 2.0);
        assert!((percentile(&[0.0, 10.0], 0.05).unwrap() - 0.5).abs() < 1e-12);
        for q in [0.01, 0.5, 0.99] {
            assert_eq!(percentile(&[7.5], q).unwrap(), 7.5);
        }
        assert!(matches!(percentile(&[], 0.5), Err(Error::Domain(_))));
        assert!(percentile(&[1.0], 0.0).is_err());
        assert!(percentile(&[1.0], 1.0).is_err());
        assert!(percentile(&[1.0, f64::NAN], 0.5).is_err());
    }

    #[test]
    fn label_streams_differ() {
        assert_ne!(fnv1a("alg6:1"), fnv1a("alg6:2"));
    }
}
