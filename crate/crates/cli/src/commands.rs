use std::path::{Path, PathBuf};

use serde::Serialize;

use sdc_hawkes::learn::fit;
use sdc_hawkes::{
    censor, heldout_loglik, log_likelihood, make_ground_truth, relative_error, run_experiment,
    simulate_many, stitch_dataset, BasisConfig, ExperimentConfig, GroundTruth, GroundTruthSpec,
    LearnerConfig, ObservationWindow, Regime, StitchConfig, TruthKind,
};

use crate::args::{
    BasisArg, CensorArgs, Cli, Command, EvalArgs, ExperimentArgs, FitArgs, LearnerOptions,
    SimulateArgs, StitchArgs, StitchOptions, TruthArg,
};
use crate::error::{CliError, CliResult};
use crate::records::{read_model, read_sequences, render_model, render_sequences, write_text};

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// Outputs were written but some fit hit the iteration limit.
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Done => 0,
            Outcome::NotConverged => 3,
        }
    }
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Simulate(a) => simulate_cmd(&a),
        Command::Censor(a) => censor_cmd(&a),
        Command::Stitch(a) => stitch_cmd(&a),
        Command::Fit(a) => fit_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::Experiment(a) => experiment_cmd(&a),
    }
}

/// `data.jsonl` → `data.truth.json`
pub fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

/// `report.csv` → `report.summary.json`
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn window(v: &[f64]) -> CliResult<ObservationWindow> {
    match v {
        [a, b] => Ok(ObservationWindow::new(*a, *b)?),
        _ => Err(CliError::Invalid("a window takes exactly two values".into())),
    }
}

fn truth_kind(t: TruthArg) -> TruthKind {
    match t {
        TruthArg::Invariant => TruthKind::TimeInvariant,
        TruthArg::Cosine => TruthKind::Cosine,
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn simulate_cmd(a: &SimulateArgs) -> CliResult<Outcome> {
    let window = window(&a.window)?;
    let truth = make_ground_truth(&GroundTruthSpec {
        kind: truth_kind(a.truth),
        n_types: a.types,
        window,
        seed: a.seed,
    })?;
    let seqs = simulate_many(&truth, window, a.count, a.seed)?;
    write_text(&a.out, &render_sequences(seqs.iter().map(|s| (s, None))))?;
    write_text(&truth_path(&a.out), &to_json(&truth))?;
    Ok(Outcome::Done)
}

fn censor_cmd(a: &CensorArgs) -> CliResult<Outcome> {
    let file = read_sequences(&a.input, false)?;
    let sdc = censor(&file.sequences, a.intervals, a.seed)?;
    write_text(&a.out, &render_sequences(sdc.sequences.iter().map(|s| (s, None))))?;
    Ok(Outcome::Done)
}

pub fn stitch_config(o: &StitchOptions, seed: u64) -> StitchConfig {
    StitchConfig {
        bandwidth: o.sigma_s,
        depth: o.depth,
        replicates: o.replicates,
        use_features: o.use_features,
        allow_overlap: o.allow_overlap,
        endpoint_fallback: o.endpoint_fallback,
        seed,
    }
}

fn stitch_cmd(a: &StitchArgs) -> CliResult<Outcome> {
    let file = read_sequences(&a.input, a.stitch.endpoint_fallback)?;
    let data = stitch_dataset(&file.sequences, &stitch_config(&a.stitch, a.seed))?;
    let text = render_sequences(
        data.sequences
            .iter()
            .zip(&data.weights)
            .map(|(s, w)| (s, Some(*w))),
    );
    write_text(&a.out, &text)?;
    Ok(Outcome::Done)
}

fn basis_config(o: &LearnerOptions, kind: BasisArg, span: ObservationWindow) -> CliResult<BasisConfig> {
    Ok(match kind {
        BasisArg::Constant => BasisConfig::constant(),
        BasisArg::Gaussian => {
            let b = BasisConfig::gaussian_uniform(span, o.basis_count)?;
            match o.sigma_kappa {
                Some(s) => b.with_bandwidth(s)?,
                None => b,
            }
        }
    })
}

pub fn learner_config(
    o: &LearnerOptions,
    basis: BasisConfig,
    n_types: Option<usize>,
    seed: u64,
) -> LearnerConfig {
    LearnerConfig {
        gamma: o.gamma,
        tolerance: o.tolerance,
        rho0: o.rho0,
        rho_growth: o.rho_growth,
        rho_cap: o.rho_cap,
        max_iters: o.max_iters,
        basis,
        beta: o.beta,
        n_types,
        seed,
    }
}

fn fit_cmd(a: &FitArgs) -> CliResult<Outcome> {
    let file = read_sequences(&a.input, a.endpoint_fallback)?;
    if file.sequences.is_empty() {
        return Err(CliError::Invalid(format!("{} holds no sequences", a.input.display())));
    }
    let span = match &a.basis_window {
        Some(v) => window(v)?,
        None => {
            let begin = file.sequences.iter().map(|s| s.begin()).fold(f64::INFINITY, f64::min);
            let end = file.sequences.iter().map(|s| s.end()).fold(f64::NEG_INFINITY, f64::max);
            ObservationWindow::new(begin, end)?
        }
    };
    let basis = basis_config(&a.learner, a.learner.basis.unwrap_or(BasisArg::Constant), span)?;
    let cfg = learner_config(&a.learner, basis, a.types, a.seed);
    let weights = if a.unweighted {
        vec![1.0; file.sequences.len()]
    } else {
        file.weights_or_unit()
    };
    let result = fit(&file.sequences, &weights, &cfg)?;
    write_text(&a.out, &render_model(&result.model))?;
    eprintln!(
        "{} after {} iterations",
        if result.converged { "converged" } else { "not converged" },
        result.iterations
    );
    Ok(if result.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

#[derive(Debug, Serialize)]
struct EvalSummary {
    sequences: usize,
    mean_loglik: f64,
    degenerate: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_error: Option<f64>,
}

fn eval_cmd(a: &EvalArgs) -> CliResult<Outcome> {
    let model = read_model(&a.model)?;
    let test = read_sequences(&a.test, false)?.sequences;
    for s in &test {
        s.check_types(model.n_types())?;
    }
    let held = heldout_loglik(&model, &test)?;
    let mut csv = String::from("id,loglik\n");
    for s in &test {
        csv.push_str(&format!("{},{}\n", s.id, log_likelihood(&model, s)?));
    }
    let relative_error = match &a.truth {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let truth: GroundTruth = serde_json::from_str(&text).map_err(|e| CliError::Parse {
                path: path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            truth.validate()?;
            Some(relative_error(&truth.project(model.basis())?, &model)?)
        }
        None => None,
    };
    println!("mean held-out log-likelihood: {}", held.mean);
    if let Some(r) = relative_error {
        println!("relative error: {r}");
    }
    write_text(&a.out, &csv)?;
    let summary = EvalSummary {
        sequences: test.len(),
        mean_loglik: held.mean,
        degenerate: held.degenerate,
        relative_error,
    };
    let path = a.summary.clone().unwrap_or_else(|| summary_path(&a.out));
    write_text(&path, &to_json(&summary))?;
    Ok(Outcome::Done)
}

pub fn experiment_config(a: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let window = window(&a.window)?;
    let truth = truth_kind(a.truth);
    let kind = a.learner.basis.unwrap_or(match truth {
        TruthKind::TimeInvariant => BasisArg::Constant,
        TruthKind::Cosine => BasisArg::Gaussian,
    });
    let basis = basis_config(&a.learner, kind, window)?;
    let regimes = a
        .regimes
        .split(',')
        .map(|r| Regime::parse(r.trim(), a.stitch.depth))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentConfig {
        truth,
        n_types: a.types,
        window,
        n_train: a.train,
        n_test: a.test,
        n_intervals: a.intervals,
        stitch: stitch_config(&a.stitch, 0),
        learner: learner_config(&a.learner, basis, Some(a.types), 0),
        trials: a.trials,
        regimes,
        seed: a.seed,
    })
}

fn experiment_cmd(a: &ExperimentArgs) -> CliResult<Outcome> {
    let cfg = experiment_config(a)?;
    let report = run_experiment(&cfg)?;
    write_text(&a.out, &report.to_csv())?;
    let path = a.summary.clone().unwrap_or_else(|| summary_path(&a.out));
    write_text(&path, &to_json(&report.summary))?;
    for s in &report.summary {
        println!(
            "{}: heldout {:.4} ± {:.4}, relative error {:.4} ± {:.4}",
            s.regime, s.mean_loglik, s.std_loglik, s.mean_relative_error, s.std_relative_error
        );
    }
    Ok(if report.all_converged() {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}
