//! Experiment driver: seeded bandit trials over the benchmark settings,
//! dataset bookkeeping for the matched/unmatched pair (D₁, D₂), lengthscale
//! heuristics, cross-trial aggregation, and CSV persistence.
//!
//! A trial runs `T` rounds. Before round 1, D₂ is initialized with `m`
//! unmatched pairs drawn from the environment's prior. Each round samples a
//! context, picks an action (uniformly at random until both datasets are
//! nonempty, then by UCB over the configured estimator's grid statistics),
//! draws the intermediate and ultimate rewards, and appends to both
//! datasets. So |D₂| = m + (t−1) entering round t and m + t after it.
//!
//! The harness is deliberately concrete over `f64`: experiment artifacts
//! (CSV, JSON) are double precision, and nothing here is generic work.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cbmp::build_round_state;
use crate::cme::{build_cme_round, MatchedDataset};
use crate::environments::{Environment, EnvironmentSpec, Setting, GRID_POINTS};
use crate::error::{Error, Result};
use crate::gp::UnmatchedDataset;
use crate::kernels::{KernelSet, KernelSpec};
use crate::policies::{beta_at, random_select, ucb_select, BetaSchedule};

/// Which decision rule drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// UCB over the moment-matched posterior of `⟨f, μ_{R|s,a}⟩`.
    #[serde(rename = "CBMP-UCB")]
    CbmpUcb,
    /// UCB over the conditional-mean-embedding estimate of the reward.
    #[serde(rename = "CME-UCB")]
    CmeUcb,
    /// Uniform-random action choice (sanity floor).
    #[serde(rename = "Random")]
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::CbmpUcb, Algorithm::CmeUcb, Algorithm::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::CbmpUcb => "CBMP-UCB",
            Algorithm::CmeUcb => "CME-UCB",
            Algorithm::Random => "Random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CBMP-UCB" => Ok(Algorithm::CbmpUcb),
            "CME-UCB" => Ok(Algorithm::CmeUcb),
            "Random" => Ok(Algorithm::Random),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Ridge policy for the unregularized kernel inverses inside the
/// moment-matched estimator, as a fraction of the mean Gram diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterPolicy {
    pub relative: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy { relative: 1e-2 }
    }
}

/// How kernel lengthscales are chosen during a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthscalePolicy {
    /// Median pairwise distance of the observed data, refreshed every
    /// `every_rounds` rounds (context kernel from D₁ contexts, action
    /// kernel from D₁ actions, reward kernel from all intermediate
    /// rewards seen in either dataset).
    MedianHeuristic { every_rounds: usize },
    /// Fixed lengthscales for the context, action, and reward kernels.
    Fixed { s: f64, a: f64, r: f64 },
}

impl Default for LengthscalePolicy {
    fn default() -> Self {
        LengthscalePolicy::MedianHeuristic { every_rounds: 10 }
    }
}

fn default_rounds() -> usize {
    100
}

fn default_trials() -> usize {
    100
}

fn default_lambda() -> f64 {
    0.1
}

fn default_beta() -> BetaSchedule<f64> {
    BetaSchedule::Constant { value: 2.0 }
}

/// Full description of one experiment (one setting × algorithm × regime).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub algorithm: Algorithm,
    /// Rounds per trial (`T`).
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Independent trials to run.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Initial unmatched pairs (`m`).
    #[serde(default)]
    pub unmatched_size: usize,
    /// Embedding ridge λ.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Ultimate-reward GP noise λ_f.
    #[serde(default = "default_lambda")]
    pub lambda_f: f64,
    #[serde(default)]
    pub jitter: JitterPolicy,
    #[serde(default = "default_beta")]
    pub beta: BetaSchedule<f64>,
    #[serde(default)]
    pub lengthscales: LengthscalePolicy,
    #[serde(default)]
    pub base_seed: u64,
}

impl ExperimentConfig {
    /// A runnable default for the given pairing (T=100, N=100, m=0).
    pub fn new(setting: Setting, algorithm: Algorithm) -> Self {
        ExperimentConfig {
            setting,
            algorithm,
            rounds: default_rounds(),
            trials: default_trials(),
            unmatched_size: 0,
            lambda: default_lambda(),
            lambda_f: default_lambda(),
            jitter: JitterPolicy::default(),
            beta: default_beta(),
            lengthscales: LengthscalePolicy::default(),
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        for (name, v) in [("lambda", self.lambda), ("lambda_f", self.lambda_f)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.jitter.relative.is_finite() && self.jitter.relative >= 0.0) {
            return Err(Error::Config(format!(
                "jitter.relative must be nonnegative, got {}",
                self.jitter.relative
            )));
        }
        self.beta
            .validate(GRID_POINTS)
            .map_err(|e| Error::Config(format!("beta schedule: {e}")))?;
        match self.lengthscales {
            LengthscalePolicy::MedianHeuristic { every_rounds } => {
                if every_rounds < 1 {
                    return Err(Error::Config("every_rounds must be at least 1".into()));
                }
            }
            LengthscalePolicy::Fixed { s, a, r } => {
                for (name, v) in [("s", s), ("a", a), ("r", r)] {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::Config(format!(
                            "fixed lengthscale {name} must be positive, got {v}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One executed round inside a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRow {
    /// 1-based round index.
    pub round: usize,
    pub context: f64,
    pub action: f64,
    pub action_index: usize,
    pub intermediate: Vec<f64>,
    pub ultimate: f64,
    /// Prefix sum of the ultimate rewards through this round.
    pub cumulative: f64,
    pub wall_nanos: u64,
}

/// Complete record of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub setting: Setting,
    pub algorithm: Algorithm,
    pub trial_index: usize,
    /// The concrete seed handed to this trial's generator.
    pub seed: u64,
    pub rows: Vec<RoundRow>,
}

impl TrialRecord {
    /// Cumulative reward after the final round.
    pub fn terminal_cumulative(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative)
    }
}

/// Cross-trial summary: per-round mean cumulative reward with empirical 5th
/// and 95th percentile bands, plus the per-trial terminal values used by
/// [`aggregate_compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub setting: Setting,
    pub algorithm: Algorithm,
    pub rounds: usize,
    pub n_trials: usize,
    pub mean_cumulative: Vec<f64>,
    pub q05: Vec<f64>,
    pub q95: Vec<f64>,
    pub terminal_cumulative: Vec<f64>,
}

/// Everything produced by [`run_trials`]: completed records, the aggregate
/// over them, and diagnostics for any trial that aborted.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub aggregate: AggregateResult,
    pub records: Vec<TrialRecord>,
    /// `(trial_index, error)` for aborted trials, if any.
    pub failures: Vec<(usize, Error)>,
}

/// Welch comparison of two experiments' terminal cumulative rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonSummary {
    /// mean(A) − mean(B) at the final round.
    pub mean_difference: f64,
    pub welch_t: f64,
    pub welch_df: f64,
    /// One-sided p-value for "A exceeds B".
    pub p_one_sided: f64,
}

/// Median of the strictly positive pairwise Euclidean distances; the
/// fallback for degenerate inputs (fewer than two points, or all points
/// identical) is 1.0. With an even count the median is the midpoint of the
/// two central order statistics.
pub fn median_heuristic(points: &[Vec<f64>]) -> f64 {
    let mut dists = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d2: f64 = points[i]
                .iter()
                .zip(points[j].iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            if d2 > 0.0 {
                dists.push(d2.sqrt());
            }
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let n = dists.len();
    if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    }
}

fn kernel_set(ls_s: f64, ls_a: f64, ls_r: f64) -> Result<KernelSet<f64>> {
    Ok(KernelSet {
        k_s: KernelSpec::squared_exponential(ls_s, 1.0)?,
        k_a: KernelSpec::squared_exponential(ls_a, 1.0)?,
        k_r: KernelSpec::squared_exponential(ls_r, 1.0)?,
    })
}

fn lengthscales_for_round(
    policy: &LengthscalePolicy,
    round: usize,
    current: Option<KernelSet<f64>>,
    d1: &MatchedDataset<f64>,
    d2: &UnmatchedDataset<f64>,
) -> Result<KernelSet<f64>> {
    match *policy {
        LengthscalePolicy::Fixed { s, a, r } => match current {
            Some(k) => Ok(k),
            None => kernel_set(s, a, r),
        },
        LengthscalePolicy::MedianHeuristic { every_rounds } => {
            let due = current.is_none() || (round - 1) % every_rounds == 0;
            if !due {
                return Ok(current.expect("kernel set exists when not due"));
            }
            let contexts: Vec<Vec<f64>> = d1.contexts().to_vec();
            let actions: Vec<Vec<f64>> = d1.actions().to_vec();
            let mut rewards: Vec<Vec<f64>> = d1.rewards().to_vec();
            rewards.extend(d2.points().iter().cloned());
            kernel_set(
                median_heuristic(&contexts),
                median_heuristic(&actions),
                median_heuristic(&rewards),
            )
        }
    }
}

/// Runs one trial against a caller-supplied environment. The generator is
/// seeded with `base_seed + trial_index`, so a rerun of the same pairing is
/// bit-identical.
pub fn run_trial_in<E: Environment<f64>>(
    env: &E,
    config: &ExperimentConfig,
    trial_index: usize,
) -> Result<TrialRecord> {
    config.validate()?;
    let seed = config.base_seed.wrapping_add(trial_index as u64);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let grid_scalar = env.action_grid();
    let grid: Vec<Vec<f64>> = grid_scalar.iter().map(|a| vec![*a]).collect();

    let mut d1 = MatchedDataset::new();
    let mut d2 = UnmatchedDataset::new();
    for _ in 0..config.unmatched_size {
        let r = env.sample_unmatched_point(&mut rng);
        let y = env
            .sample_ultimate(&r, &mut rng)
            .map_err(|e| abort(trial_index, 0, e))?;
        d2.push(r, y).map_err(|e| abort(trial_index, 0, e))?;
    }

    let mut kernels: Option<KernelSet<f64>> = None;
    let mut rows = Vec::with_capacity(config.rounds);
    let mut cumulative = 0.0;
    for t in 1..=config.rounds {
        let start = Instant::now();
        kernels = Some(
            lengthscales_for_round(&config.lengthscales, t, kernels, &d1, &d2)
                .map_err(|e| abort(trial_index, t, e))?,
        );
        let ks = kernels.as_ref().expect("kernel set was just refreshed");

        let s_t = env.sample_context(&mut rng);
        let use_random =
            config.algorithm == Algorithm::Random || d1.is_empty() || d2.is_empty();
        let action_index = if use_random {
            random_select(grid.len(), &mut rng).map_err(|e| abort(trial_index, t, e))?
        } else {
            let stats = match config.algorithm {
                Algorithm::CbmpUcb => build_round_state(
                    &d1,
                    &d2,
                    ks,
                    config.lambda,
                    config.lambda_f,
                    config.jitter.relative,
                    &[s_t],
                )
                .and_then(|state| state.stats(&grid)),
                Algorithm::CmeUcb => {
                    build_cme_round(&d1, &d2, ks, config.lambda, config.lambda_f, &[s_t])
                        .and_then(|state| state.stats(&grid))
                }
                Algorithm::Random => unreachable!("random handled above"),
            }
            .map_err(|e| abort(trial_index, t, e))?;
            let beta = beta_at(&config.beta, t as u32, grid.len());
            ucb_select(&stats, beta).map_err(|e| abort(trial_index, t, e))?
        };
        let a_t = grid_scalar[action_index];

        let r_t = env.sample_intermediate(s_t, a_t, &mut rng);
        let y_t = env
            .sample_ultimate(&r_t, &mut rng)
            .map_err(|e| abort(trial_index, t, e))?;
        cumulative += y_t;

        d1.push(vec![s_t], vec![a_t], r_t.clone())
            .map_err(|e| abort(trial_index, t, e))?;
        d2.push(r_t.clone(), y_t).map_err(|e| abort(trial_index, t, e))?;

        rows.push(RoundRow {
            round: t,
            context: s_t,
            action: a_t,
            action_index,
            intermediate: r_t,
            ultimate: y_t,
            cumulative,
            wall_nanos: start.elapsed().as_nanos() as u64,
        });
    }

    Ok(TrialRecord {
        setting: config.setting,
        algorithm: config.algorithm,
        trial_index,
        seed,
        rows,
    })
}

fn abort(trial: usize, round: usize, source: Error) -> Error {
    match source {
        already @ Error::TrialAborted { .. } => already,
        other => Error::TrialAborted {
            trial: trial as u32,
            round: round as u32,
            source: Box::new(other),
        },
    }
}

/// Runs one trial of the configured benchmark setting.
pub fn run_trial(config: &ExperimentConfig, trial_index: usize) -> Result<TrialRecord> {
    run_trial_in(&EnvironmentSpec::new(config.setting), config, trial_index)
}

/// Runs all trials (in parallel) and aggregates the completed ones.
/// Individual trial failures are collected, not fatal, unless every trial
/// fails.
pub fn run_trials(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_trials_in(&EnvironmentSpec::new(config.setting), config)
}

/// [`run_trials`] against a caller-supplied environment.
pub fn run_trials_in<E: Environment<f64> + Sync>(
    env: &E,
    config: &ExperimentConfig,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let results: Vec<(usize, Result<TrialRecord>)> = (0..config.trials)
        .into_par_iter()
        .map(|i| (i, run_trial_in(env, config, i)))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push((i, e)),
        }
    }
    if records.is_empty() {
        let (i, e) = failures.into_iter().next().expect("at least one trial ran");
        return Err(abort(i, 0, e));
    }
    let aggregate = aggregate_records(&records)?;
    Ok(ExperimentOutcome { aggregate, records, failures })
}

/// Runs the experiment and persists one CSV per trial plus the aggregate
/// CSV under `out_dir` (created if absent). File names are
/// `trial_{setting}_{algorithm}_{index}.csv` and
/// `aggregate_{setting}_{algorithm}.csv`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let outcome = run_trials(config)?;
    std::fs::create_dir_all(out_dir)?;
    for record in &outcome.records {
        write_trial_csv(&trial_csv_path(out_dir, config, record.trial_index), record)?;
    }
    write_aggregate_csv(&aggregate_csv_path(out_dir, config), &outcome.aggregate)?;
    Ok(outcome)
}

pub fn trial_csv_path(out_dir: &Path, config: &ExperimentConfig, trial_index: usize) -> PathBuf {
    out_dir.join(format!(
        "trial_{}_{}_{:04}.csv",
        config.setting,
        slug(config.algorithm),
        trial_index
    ))
}

pub fn aggregate_csv_path(out_dir: &Path, config: &ExperimentConfig) -> PathBuf {
    out_dir.join(format!("aggregate_{}_{}.csv", config.setting, slug(config.algorithm)))
}

fn slug(algorithm: Algorithm) -> String {
    algorithm.as_str().replace('-', "_")
}

/// Collapses completed trial records into per-round means and 5/95% bands.
/// All records must share the setting, algorithm, and round count.
pub fn aggregate_records(records: &[TrialRecord]) -> Result<AggregateResult> {
    let first = records.first().ok_or(Error::EmptyInput("trial records"))?;
    let rounds = first.rows.len();
    if rounds == 0 {
        return Err(Error::EmptyInput("trial rows"));
    }
    for r in records {
        if r.rows.len() != rounds || r.setting != first.setting || r.algorithm != first.algorithm
        {
            return Err(Error::Config(
                "aggregate requires homogeneous trial records".into(),
            ));
        }
    }
    let n = records.len();
    let mut mean = Vec::with_capacity(rounds);
    let mut q05 = Vec::with_capacity(rounds);
    let mut q95 = Vec::with_capacity(rounds);
    let mut column = vec![0.0; n];
    for t in 0..rounds {
        for (i, rec) in records.iter().enumerate() {
            column[i] = rec.rows[t].cumulative;
        }
        mean.push(column.iter().sum::<f64>() / n as f64);
        let mut sorted = column.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("cumulative rewards are finite"));
        q05.push(quantile_sorted(&sorted, 0.05));
        q95.push(quantile_sorted(&sorted, 0.95));
    }
    Ok(AggregateResult {
        setting: first.setting,
        algorithm: first.algorithm,
        rounds,
        n_trials: n,
        mean_cumulative: mean,
        q05,
        q95,
        terminal_cumulative: records.iter().map(TrialRecord::terminal_cumulative).collect(),
    })
}

/// Linear-interpolation quantile of an ascending-sorted sample (type 7,
/// the numpy default): `h = (n−1)p`, interpolate between the straddling
/// order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&p), "quantile level out of range");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Welch's one-sided test on terminal cumulative rewards: is A's mean
/// greater than B's? Requires matching round counts and at least two trials
/// per side.
pub fn aggregate_compare(a: &AggregateResult, b: &AggregateResult) -> Result<ComparisonSummary> {
    if a.rounds != b.rounds {
        return Err(Error::Config(format!(
            "round counts differ: {} vs {}",
            a.rounds, b.rounds
        )));
    }
    let (na, nb) = (a.terminal_cumulative.len(), b.terminal_cumulative.len());
    if na < 2 || nb < 2 {
        return Err(Error::Config(
            "Welch comparison needs at least two trials per side".into(),
        ));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let var = |xs: &[f64], m: f64| {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let (ma, mb) = (mean(&a.terminal_cumulative), mean(&b.terminal_cumulative));
    let (va, vb) = (var(&a.terminal_cumulative, ma), var(&b.terminal_cumulative, mb));
    let diff = ma - mb;
    let (fa, fb) = (va / na as f64, vb / nb as f64);
    let se2 = fa + fb;
    if se2 == 0.0 {
        // Degenerate samples: identical constants on both sides.
        let (t, p) = if diff == 0.0 {
            (0.0, 0.5)
        } else if diff > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 1.0)
        };
        return Ok(ComparisonSummary {
            mean_difference: diff,
            welch_t: t,
            welch_df: (na + nb - 2) as f64,
            p_one_sided: p,
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2
        / (fa * fa / (na as f64 - 1.0) + fb * fb / (nb as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Config(format!("Welch distribution: {e}")))?;
    Ok(ComparisonSummary {
        mean_difference: diff,
        welch_t: t,
        welch_df: df,
        p_one_sided: 1.0 - dist.cdf(t),
    })
}

fn join_reals(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes one trial's rows with the schema
/// `setting,algorithm,trial,round,context,action,intermediate,ultimate,cumulative`
/// (multi-dimensional intermediates are semicolon-joined).
pub fn write_trial_csv(path: &Path, record: &TrialRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "setting",
        "algorithm",
        "trial",
        "round",
        "context",
        "action",
        "intermediate",
        "ultimate",
        "cumulative",
    ])?;
    for row in &record.rows {
        w.write_record([
            record.setting.to_string(),
            record.algorithm.to_string(),
            record.trial_index.to_string(),
            row.round.to_string(),
            row.context.to_string(),
            row.action.to_string(),
            join_reals(&row.intermediate),
            row.ultimate.to_string(),
            row.cumulative.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the aggregate with the schema
/// `setting,algorithm,round,mean_cumulative,q05,q95,n_trials`.
pub fn write_aggregate_csv(path: &Path, aggregate: &AggregateResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "setting",
        "algorithm",
        "round",
        "mean_cumulative",
        "q05",
        "q95",
        "n_trials",
    ])?;
    for t in 0..aggregate.rounds {
        w.write_record([
            aggregate.setting.to_string(),
            aggregate.algorithm.to_string(),
            (t + 1).to_string(),
            aggregate.mean_cumulative[t].to_string(),
            aggregate.q05[t].to_string(),
            aggregate.q95[t].to_string(),
            aggregate.n_trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trial CSV produced by [`write_trial_csv`]. Fields that are not
/// part of the CSV schema (seed, action index, wall time) are zeroed; the
/// result is sufficient for [`aggregate_records`].
pub fn read_trial_csv(path: &Path) -> Result<TrialRecord> {
    let mut rdr = csv::Reader::from_path(path)?;
    let expected = [
        "setting",
        "algorithm",
        "trial",
        "round",
        "context",
        "action",
        "intermediate",
        "ultimate",
        "cumulative",
    ];
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Config(format!(
            "trial CSV header mismatch: expected {expected:?}, got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let parse_f = |s: &str, what: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad {what} value {s:?}")))
    };
    let mut setting = None;
    let mut algorithm = None;
    let mut trial_index = 0usize;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != expected.len() {
            return Err(Error::Config(format!(
                "trial CSV row has {} fields, expected {}",
                record.len(),
                expected.len()
            )));
        }
        setting = Some(record[0].parse::<Setting>()?);
        algorithm = Some(record[1].parse::<Algorithm>()?);
        trial_index = record[2]
            .parse()
            .map_err(|_| Error::Config(format!("bad trial value {:?}", &record[2])))?;
        let intermediate = record[6]
            .split(';')
            .map(|s| parse_f(s, "intermediate"))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(RoundRow {
            round: record[3]
                .parse()
                .map_err(|_| Error::Config(format!("bad round value {:?}", &record[3])))?,
            context: parse_f(&record[4], "context")?,
            action: parse_f(&record[5], "action")?,
            action_index: 0,
            intermediate,
            ultimate: parse_f(&record[7], "ultimate")?,
            cumulative: parse_f(&record[8], "cumulative")?,
            wall_nanos: 0,
        });
    }
    let setting = setting.ok_or(Error::EmptyInput("trial CSV rows"))?;
    Ok(TrialRecord {
        setting,
        algorithm: algorithm.expect("algorithm set alongside setting"),
        trial_index,
        seed: 0,
        rows,
    })
}

/// One parsed aggregate-CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub setting: Setting,
    pub algorithm: Algorithm,
    pub round: usize,
    pub mean_cumulative: f64,
    pub q05: f64,
    pub q95: f64,
    pub n_trials: usize,
}

/// Reads an aggregate CSV produced by [`write_aggregate_csv`].
pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let expected = ["setting", "algorithm", "round", "mean_cumulative", "q05", "q95", "n_trials"];
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Config(format!(
            "aggregate CSV header mismatch: expected {expected:?}, got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let parse_f = |s: &str, what: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad {what} value {s:?}")))
    };
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != expected.len() {
            return Err(Error::Config(format!(
                "aggregate CSV row has {} fields, expected {}",
                record.len(),
                expected.len()
            )));
        }
        rows.push(AggregateRow {
            setting: record[0].parse()?,
            algorithm: record[1].parse()?,
            round: record[2]
                .parse()
                .map_err(|_| Error::Config(format!("bad round value {:?}", &record[2])))?,
            mean_cumulative: parse_f(&record[3], "mean_cumulative")?,
            q05: parse_f(&record[4], "q05")?,
            q95: parse_f(&record[5], "q95")?,
            n_trials: record[6]
                .parse()
                .map_err(|_| Error::Config(format!("bad n_trials value {:?}", &record[6])))?,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("aggregate CSV rows"));
    }
    Ok(rows)
}
