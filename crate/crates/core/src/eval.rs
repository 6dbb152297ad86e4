//! Metrics, simulator validation and the end-to-end experiment runner.

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisConfig;
use crate::error::{invalid, Error, Result};
use crate::learn::{fit_stitched, fit_unweighted, FitResult, LearnerConfig};
use crate::likelihood::log_likelihood;
use crate::model::{Excitation, HawkesModel};
use crate::rng::derive_seed;
use crate::sequence::{EventSequence, ObservationWindow};
use crate::simulate::{censor, make_ground_truth, simulate_many, GroundTruthSpec, TruthKind};
use crate::stitch::{stitch_dataset, StitchConfig};

/// `‖Θ − Θ̂‖₂ / ‖Θ‖₂` over the concatenated base rates and coefficients.
pub fn relative_error(truth: &HawkesModel, est: &HawkesModel) -> Result<f64> {
    if truth.n_types() != est.n_types() || truth.basis().len() != est.basis().len() {
        return Err(invalid(format!(
            "models differ in shape: {} types x {} basis vs {} types x {} basis",
            truth.n_types(),
            truth.basis().len(),
            est.n_types(),
            est.basis().len()
        )));
    }
    let theta = truth.parameters();
    let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(invalid("reference parameters have zero norm"));
    }
    let diff = theta
        .iter()
        .zip(est.parameters())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutLikelihood {
    /// Mean log-likelihood per test sequence; `-inf` if any is degenerate.
    pub mean: f64,
    /// Ids of sequences with an event of zero intensity.
    pub degenerate: Vec<String>,
}

pub fn heldout_loglik(model: &HawkesModel, test: &[EventSequence]) -> Result<HeldoutLikelihood> {
    if test.is_empty() {
        return Err(Error::InsufficientData("no test sequences".into()));
    }
    let values: Vec<f64> = test
        .par_iter()
        .map(|s| log_likelihood(model, s))
        .collect::<Result<_>>()?;
    let degenerate = test
        .iter()
        .zip(&values)
        .filter(|(_, v)| **v == f64::NEG_INFINITY)
        .map(|(s, _)| s.id.clone())
        .collect();
    Ok(HeldoutLikelihood {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        degenerate,
    })
}

/// Compensator increments of one sequence, window by window and per type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RescaledIntervals {
    /// Increments between consecutive same-type events, or from the start of
    /// a window to the first event of the type in it.
    pub complete: Vec<f64>,
    /// Increment from the last event of each type (or the window start) to
    /// the window end; the next event is unobserved.
    pub censored: Vec<f64>,
}

/// Under the generating model the complete increments are `Exp(1)` and each
/// censored one is the head of an `Exp(1)` interval.
pub fn rescaled_intervals<E: Excitation + ?Sized>(truth: &E, seq: &EventSequence) -> RescaledIntervals {
    let c_len = truth.n_types();
    let beta = truth.decay();
    let events = seq.events();
    let mut history = vec![0.0; c_len];
    let mut history_time = seq.begin();
    let mut cursor = 0;
    let mut out = RescaledIntervals::default();

    let integrate = |history: &[f64], acc: &mut [f64], a: f64, b: f64| {
        if b <= a {
            return;
        }
        for (c, slot) in acc.iter_mut().enumerate() {
            let mut v = truth.base_rate(c) * (b - a);
            for (d, h) in history.iter().enumerate() {
                if *h > 0.0 {
                    v += h * truth.decayed_infectivity_integral(c, d, a, b);
                }
            }
            *slot += v;
        }
    };

    for w in seq.windows() {
        let mut acc = vec![0.0; c_len];
        let mut a = w.begin;
        let decay = (-beta * (a - history_time)).exp();
        history.iter_mut().for_each(|h| *h *= decay);
        history_time = a;

        while cursor < events.len() && events[cursor].time <= w.end {
            let t = events[cursor].time;
            integrate(&history, &mut acc, a, t);
            let decay = (-beta * (t - history_time)).exp();
            history.iter_mut().for_each(|h| *h *= decay);
            history_time = t;
            a = t;
            let group_start = cursor;
            while cursor < events.len() && events[cursor].time == t {
                let c = events[cursor].kind;
                out.complete.push(acc[c]);
                acc[c] = 0.0;
                cursor += 1;
            }
            for e in &events[group_start..cursor] {
                history[e.kind] += 1.0;
            }
        }
        integrate(&history, &mut acc, a, w.end);
        out.censored.extend(acc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    /// Complete increments.
    pub samples: usize,
    /// Window-censored increments.
    pub censored: usize,
}

pub const MIN_RESCALED_SAMPLES: usize = 20;

/// Kolmogorov–Smirnov distance between `Exp(1)` and the pooled increments.
///
/// Dropping the censored tail of each window would bias the sample towards
/// short intervals. Instead each censored increment `r` enters the
/// empirical CDF through the law of its completion `r + Exp(1)`, i.e. as
/// `(1 − e^{−(x−r)})₊`, which keeps the pooled estimate unbiased.
pub fn time_rescaling_check<E: Excitation + ?Sized>(
    truth: &E,
    sequences: &[EventSequence],
) -> Result<KsOutcome> {
    let parts: Vec<RescaledIntervals> = sequences
        .par_iter()
        .map(|s| rescaled_intervals(truth, s))
        .collect();
    let mut complete: Vec<f64> = parts.iter().flat_map(|p| p.complete.iter().copied()).collect();
    let mut censored: Vec<f64> = parts.iter().flat_map(|p| p.censored.iter().copied()).collect();
    if complete.len() < MIN_RESCALED_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} rescaled intervals, need at least {MIN_RESCALED_SAMPLES}",
            complete.len()
        )));
    }
    complete.sort_by(f64::total_cmp);
    censored.sort_by(f64::total_cmp);
    let statistic = ks_distance(&complete, &censored);
    let n = complete.len() + censored.len();
    Ok(KsOutcome {
        statistic,
        p_value: kolmogorov_pvalue(statistic, n),
        samples: complete.len(),
        censored: censored.len(),
    })
}

/// `sup_x |F̂(x) − (1 − e^{−x})|` for sorted inputs. Between breakpoints the
/// difference is monotone, so checking both one-sided limits at every
/// breakpoint is exact.
fn ks_distance(complete: &[f64], censored: &[f64]) -> f64 {
    let n = (complete.len() + censored.len()) as f64;
    let (mut i, mut j) = (0, 0);
    // F̂(x) = (#complete ≤ x + #censored ≤ x − tail) / n with
    // tail = Σ_{r ≤ x} e^{−(x − r)}
    let mut tail = 0.0;
    let mut x_prev = 0.0;
    let mut d: f64 = 0.0;
    while i < complete.len() || j < censored.len() {
        let x = match (complete.get(i), censored.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        tail *= (-(x - x_prev)).exp();
        x_prev = x;
        let f = -(-x).exp_m1();
        let left = (i + j) as f64 - tail;
        d = d.max((left / n - f).abs());
        while i < complete.len() && complete[i] == x {
            i += 1;
        }
        while j < censored.len() && censored[j] == x {
            j += 1;
            tail += 1.0;
        }
        let right = (i + j) as f64 - tail;
        d = d.max((right / n - f).abs());
    }
    d
}

/// Asymptotic Kolmogorov tail with Stephens' small-sample correction.
pub fn kolmogorov_pvalue(statistic: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * statistic;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += if j as usize % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Fit on the uncensored training sequences.
    Complete,
    /// Fit on the censored sequences with unit weights.
    SdcDirect,
    /// Fit on stitched sequences with the given stitch depth.
    Stitched { depth: usize },
}

impl Regime {
    /// Parse `complete`, `sdc_direct`, `stitched` (with `default_depth`) or
    /// `stitched_L<depth>`.
    pub fn parse(s: &str, default_depth: usize) -> Result<Self> {
        match s {
            "complete" => Ok(Regime::Complete),
            "sdc_direct" | "sdc" => Ok(Regime::SdcDirect),
            "stitched" => Ok(Regime::Stitched {
                depth: default_depth,
            }),
            other => other
                .strip_prefix("stitched_L")
                .and_then(|d| d.parse().ok())
                .map(|depth| Regime::Stitched { depth })
                .ok_or_else(|| invalid(format!("unknown regime `{other}`"))),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Complete => f.write_str("complete"),
            Regime::SdcDirect => f.write_str("sdc_direct"),
            Regime::Stitched { depth } => write!(f, "stitched_L{depth}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub truth: TruthKind,
    pub n_types: usize,
    pub window: ObservationWindow,
    pub n_train: usize,
    pub n_test: usize,
    pub n_intervals: usize,
    pub stitch: StitchConfig,
    pub learner: LearnerConfig,
    pub trials: usize,
    pub regimes: Vec<Regime>,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Two types on `[0, 50]`, 200 training and 100 test sequences, ten
    /// censoring intervals, five stitched replicates. Time-varying truths are
    /// fitted with eight Gaussian basis functions.
    pub fn desk_scale(truth: TruthKind) -> Self {
        let window = ObservationWindow { begin: 0.0, end: 50.0 };
        let basis = match truth {
            TruthKind::TimeInvariant => BasisConfig::constant(),
            TruthKind::Cosine => {
                BasisConfig::gaussian_uniform(window, 8).expect("valid default basis")
            }
        };
        let stitch = StitchConfig::default();
        Self {
            truth,
            n_types: 2,
            window,
            n_train: 200,
            n_test: 100,
            n_intervals: 10,
            regimes: vec![
                Regime::Complete,
                Regime::SdcDirect,
                Regime::Stitched {
                    depth: stitch.depth,
                },
            ],
            stitch,
            learner: LearnerConfig {
                basis,
                ..LearnerConfig::default()
            },
            trials: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("at least one trial is required"));
        }
        if self.n_test == 0 || self.n_train == 0 {
            return Err(invalid("training and test sets must be non-empty"));
        }
        if self.regimes.is_empty() {
            return Err(invalid("no regimes selected"));
        }
        self.stitch.validate()?;
        self.learner.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub trial: usize,
    pub regime: Regime,
    pub heldout_loglik: f64,
    pub relative_error: f64,
    pub converged: bool,
    pub iterations: usize,
    pub degenerate_sequences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub regime: Regime,
    pub trials: usize,
    pub mean_loglik: f64,
    pub std_loglik: f64,
    pub mean_relative_error: f64,
    pub std_relative_error: f64,
    pub non_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub summary: Vec<RegimeSummary>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ExperimentReport {
    pub fn from_rows(rows: Vec<ReportRow>, regimes: &[Regime]) -> Self {
        let summary = regimes
            .iter()
            .map(|&regime| {
                let sel: Vec<&ReportRow> = rows.iter().filter(|r| r.regime == regime).collect();
                let ll: Vec<f64> = sel.iter().map(|r| r.heldout_loglik).collect();
                let re: Vec<f64> = sel.iter().map(|r| r.relative_error).collect();
                let (mean_loglik, std_loglik) = mean_std(&ll);
                let (mean_relative_error, std_relative_error) = mean_std(&re);
                RegimeSummary {
                    regime,
                    trials: sel.len(),
                    mean_loglik,
                    std_loglik,
                    mean_relative_error,
                    std_relative_error,
                    non_converged: sel.iter().filter(|r| !r.converged).count(),
                }
            })
            .collect();
        Self { rows, summary }
    }

    pub fn row(&self, trial: usize, regime: Regime) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.trial == trial && r.regime == regime)
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub const CSV_HEADER: &'static str =
        "trial,regime,heldout_loglik,relative_error,converged,iterations,degenerate_sequences";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.trial,
                r.regime,
                r.heldout_loglik,
                r.relative_error,
                r.converged,
                r.iterations,
                r.degenerate_sequences
            );
        }
        out
    }
}

fn evaluate(
    trial: usize,
    regime: Regime,
    fitted: FitResult,
    truth: &HawkesModel,
    test: &[EventSequence],
) -> Result<ReportRow> {
    let held = heldout_loglik(&fitted.model, test)?;
    Ok(ReportRow {
        trial,
        regime,
        heldout_loglik: held.mean,
        relative_error: relative_error(truth, &fitted.model)?,
        converged: fitted.converged,
        iterations: fitted.iterations,
        degenerate_sequences: held.degenerate.len(),
    })
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<ReportRow>> {
    let trial_seed = derive_seed(cfg.seed, trial as u64);
    let truth = make_ground_truth(&GroundTruthSpec {
        kind: cfg.truth,
        n_types: cfg.n_types,
        window: cfg.window,
        seed: derive_seed(trial_seed, 0),
    })?;
    let all = simulate_many(
        &truth,
        cfg.window,
        cfg.n_train + cfg.n_test,
        derive_seed(trial_seed, 1),
    )?;
    let (train, test) = all.split_at(cfg.n_train);
    let sdc = censor(train, cfg.n_intervals, derive_seed(trial_seed, 2))?;
    let reference = truth.project(&cfg.learner.basis)?;
    let learner = LearnerConfig {
        n_types: Some(cfg.n_types),
        seed: derive_seed(trial_seed, 3),
        ..cfg.learner.clone()
    };

    cfg.regimes
        .iter()
        .map(|&regime| {
            let fitted = match regime {
                Regime::Complete => fit_unweighted(train, &learner)?,
                Regime::SdcDirect => fit_unweighted(&sdc.sequences, &learner)?,
                Regime::Stitched { depth } => {
                    let stitch = StitchConfig {
                        depth,
                        seed: derive_seed(trial_seed, 4),
                        ..cfg.stitch.clone()
                    };
                    fit_stitched(&stitch_dataset(&sdc.sequences, &stitch)?, &learner)?
                }
            };
            evaluate(trial, regime, fitted, &reference, test)
        })
        .collect()
}

/// Repeat the synthetic protocol for `cfg.trials` independent trials.
///
/// Each trial draws a truth, simulates `n_train + n_test` complete
/// sequences, holds out the test part, censors the training part and fits
/// every requested regime. Non-converged fits are kept and flagged.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let per_trial: Vec<Vec<ReportRow>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<_>>()?;
    Ok(ExperimentReport::from_rows(
        per_trial.into_iter().flatten().collect(),
        &cfg.regimes,
    ))
}
