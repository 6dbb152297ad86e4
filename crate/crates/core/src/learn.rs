//! Weighted EM estimator with ADMM-coupled L1 sparsity.
//!
//! Minimizes `-Σ_n p_n log L(s_n; μ, A) + γ‖A‖₁` over `μ ≥ 0, A ≥ 0` by
//! alternating:
//!
//! 1. E-step: branching responsibilities `q_i` (base rate) and `q_ijm`
//!    (event `j` through basis `m`) at the current parameters.
//! 2. Closed-form M-step for `μ` and for each `a_{cc'm}`, the latter the
//!    positive root of `ρa² + Ba + C = 0`.
//! 3. `Z ← soft_threshold(A + U, γ/ρ)`, `U ← U + A − Z`, `ρ ← min(1.5ρ, cap)`.
//!
//! The E-step never materializes the `O(I²)` pairwise responsibilities.
//! Because `κ_m(t_i)` factors out of the sum over the history, the per-cell
//! totals `Σ_{c_i=c, c_j=c'} q_ijm` follow from decayed per-type event counts,
//! so one iteration costs `O(I·C·M)` per sequence. The pairwise form is
//! still available through [`e_step`].

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisConfig;
use crate::error::{invalid, Error, Result};
use crate::likelihood::{decayed_history, event_intensities, event_tail_integrals};
use crate::model::{HawkesModel, InfectivityTensor};
use crate::rng::stream;
use crate::sequence::EventSequence;
use crate::stitch::StitchedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// L1 weight γ.
    pub gamma: f64,
    /// Stop once `‖A^k − A^{k−1}‖_F` falls below this threshold (V).
    pub tolerance: f64,
    pub rho0: f64,
    pub rho_growth: f64,
    pub rho_cap: f64,
    pub max_iters: usize,
    pub basis: BasisConfig,
    /// Kernel decay β.
    pub beta: f64,
    /// Number of event types; inferred from the data when `None`.
    pub n_types: Option<usize>,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            tolerance: 1e-4,
            rho0: 1.0,
            rho_growth: 1.5,
            rho_cap: 1e6,
            max_iters: 500,
            basis: BasisConfig::constant(),
            beta: 0.2,
            n_types: None,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma must be nonnegative"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("convergence threshold must be positive"));
        }
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(invalid("initial penalty must be positive"));
        }
        if !(self.rho_growth >= 1.0) {
            return Err(invalid("penalty growth must be at least 1"));
        }
        if !(self.rho_cap >= self.rho0) {
            return Err(invalid("penalty cap must be at least the initial penalty"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("decay must be positive"));
        }
        Ok(())
    }
}

/// Iterate of the ADMM-coupled EM.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub mu: Vec<f64>,
    /// A
    pub coeffs: InfectivityTensor,
    /// Z
    pub aux: InfectivityTensor,
    /// U
    pub dual: InfectivityTensor,
    pub rho: f64,
    pub iter: usize,
}

impl LearnerState {
    /// Random start: `μ_c ~ U(r/2, r)` with `r` the weighted event rate,
    /// `a ~ U(0, 0.1)`, `Z = A`, `U = 0`.
    pub fn initial(n_types: usize, basis_len: usize, event_rate: f64, cfg: &LearnerConfig) -> Self {
        let mut rng = stream(cfg.seed, 0);
        let mu = (0..n_types)
            .map(|_| {
                if event_rate > 0.0 {
                    rng.random_range(0.5 * event_rate..=event_rate)
                } else {
                    0.0
                }
            })
            .collect();
        let mut coeffs = InfectivityTensor::zeros(n_types, basis_len);
        coeffs
            .as_mut_slice()
            .iter_mut()
            .for_each(|a| *a = rng.random_range(0.0..0.1));
        Self {
            mu,
            aux: coeffs.clone(),
            dual: InfectivityTensor::zeros(n_types, basis_len),
            coeffs,
            rho: cfg.rho0,
            iter: 0,
        }
    }

    pub fn model(&self, basis: &BasisConfig, beta: f64) -> Result<HawkesModel> {
        HawkesModel::new(self.mu.clone(), self.coeffs.clone(), basis.clone(), beta)
    }
}

/// Branching responsibilities of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    basis_len: usize,
    base: Vec<f64>,
    /// `triggered[i][j * M + m] = q_ijm` for `j < i`.
    triggered: Vec<Vec<f64>>,
}

impl Responsibilities {
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// `q_i`
    pub fn base(&self, i: usize) -> f64 {
        self.base[i]
    }

    /// `q_ijm`, zero unless `t_j < t_i`.
    pub fn triggered(&self, i: usize, j: usize, m: usize) -> f64 {
        self.triggered[i]
            .get(j * self.basis_len + m)
            .copied()
            .unwrap_or(0.0)
    }

    /// `q_i + Σ_{j,m} q_ijm`; one for every event.
    pub fn total(&self, i: usize) -> f64 {
        self.base[i] + self.triggered[i].iter().sum::<f64>()
    }
}

/// Pairwise responsibilities at `model` for every event of `seq`.
pub fn e_step(model: &HawkesModel, seq: &EventSequence) -> Result<Responsibilities> {
    let lambdas = event_intensities(model, seq)?;
    let beta = model.beta();
    let m_len = model.basis().len();
    let events = seq.events();
    let mut kappa = vec![0.0; m_len];
    let mut base = Vec::with_capacity(events.len());
    let mut triggered = Vec::with_capacity(events.len());
    for (i, (e, &lambda)) in events.iter().zip(&lambdas).enumerate() {
        if !(lambda > 0.0) {
            return Err(Error::DegenerateModel {
                id: seq.id.clone(),
                event: i,
            });
        }
        model.basis().values_into(e.time, &mut kappa);
        base.push(model.mu()[e.kind] / lambda);
        let mut row = vec![0.0; i * m_len];
        for (j, src) in events[..i].iter().enumerate() {
            if src.time >= e.time {
                continue;
            }
            let g = (-beta * (e.time - src.time)).exp();
            for (m, k) in kappa.iter().enumerate() {
                row[j * m_len + m] = g * model.coeffs().get(e.kind, src.kind, m) * k / lambda;
            }
        }
        triggered.push(row);
    }
    Ok(Responsibilities {
        basis_len: m_len,
        base,
        triggered,
    })
}

/// Weighted sufficient statistics of the M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// `Σ_n p_n Σ_{c_i = c} q_i`
    pub base: Vec<f64>,
    /// `Σ_n p_n Σ_{c_i = c, c_j = c'} q_ijm`
    pub triggered: InfectivityTensor,
    /// `Σ_n p_n Σ_{c_j = c'} ∫_{W ∩ [t_j, ∞)} κ_m(s) g(s − t_j) ds`, row-major
    /// `C × M`. This is the derivative of the compensator of any type `c`
    /// with respect to `a_{cc'm}`.
    pub exposure: Vec<f64>,
    /// `Σ_n p_n Δ^n`
    pub observed_length: f64,
}

impl SufficientStats {
    pub fn new(n_types: usize, basis_len: usize) -> Self {
        Self {
            base: vec![0.0; n_types],
            triggered: InfectivityTensor::zeros(n_types, basis_len),
            exposure: vec![0.0; n_types * basis_len],
            observed_length: 0.0,
        }
    }

    /// Add one sequence's contribution from its pairwise responsibilities.
    pub fn accumulate(
        &mut self,
        resp: &Responsibilities,
        seq: &EventSequence,
        weight: f64,
        basis: &BasisConfig,
        beta: f64,
    ) {
        let m_len = basis.len();
        let events = seq.events();
        for (i, e) in events.iter().enumerate() {
            self.base[e.kind] += weight * resp.base(i);
            for (j, src) in events[..i].iter().enumerate() {
                for m in 0..m_len {
                    let q = resp.triggered(i, j, m);
                    if q != 0.0 {
                        let v = self.triggered.get(e.kind, src.kind, m) + weight * q;
                        self.triggered.set(e.kind, src.kind, m, v);
                    }
                }
            }
        }
        self.add_exposure(seq, weight, basis, beta);
    }

    fn add_exposure(&mut self, seq: &EventSequence, weight: f64, basis: &BasisConfig, beta: f64) {
        let m_len = basis.len();
        let tails = event_tail_integrals(basis, beta, seq);
        for (j, e) in seq.events().iter().enumerate() {
            for m in 0..m_len {
                self.exposure[e.kind * m_len + m] += weight * tails[j * m_len + m];
            }
        }
        self.observed_length += weight * seq.observed_length();
    }
}

/// `μ_c = Σ p q_i / Σ p Δ`.
pub fn m_step_mu(stats: &SufficientStats) -> Result<Vec<f64>> {
    if !(stats.observed_length > 0.0) {
        return Err(invalid("total weighted observation length must be positive"));
    }
    Ok(stats
        .base
        .iter()
        .map(|b| b / stats.observed_length)
        .collect())
}

/// Nonnegative root of `ρa² + Ba + C = 0` with `C ≤ 0`, computed without
/// cancellation for either sign of `B`.
/// With `ρ = 0` this is the unpenalized EM update `−C/B`.
pub fn solve_coefficient(b: f64, c: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return if b > 0.0 { (-c / b).max(0.0) } else { 0.0 };
    }
    let disc = (b * b - 4.0 * rho * c).max(0.0).sqrt();
    let a = if b > 0.0 {
        -2.0 * c / (b + disc)
    } else {
        (disc - b) / (2.0 * rho)
    };
    a.max(0.0)
}

/// Closed-form update of every `a_{cc'm}` with
/// `B = ρ(u − z) + exposure[c'][m]` and `C = −triggered[c][c'][m]`.
pub fn m_step_coeffs(
    stats: &SufficientStats,
    aux: &InfectivityTensor,
    dual: &InfectivityTensor,
    rho: f64,
) -> InfectivityTensor {
    let c_len = stats.triggered.types();
    let m_len = stats.triggered.basis_len();
    InfectivityTensor::from_fn(c_len, m_len, |c, d, m| {
        let b = rho * (dual.get(c, d, m) - aux.get(c, d, m)) + stats.exposure[d * m_len + m];
        let q = -stats.triggered.get(c, d, m);
        solve_coefficient(b, q, rho)
    })
}

/// `sign(x) · max(|x| − η, 0)`
#[inline]
pub fn soft_threshold(x: f64, eta: f64) -> f64 {
    x.signum() * (x.abs() - eta).max(0.0)
}

/// `Z = soft_threshold(A + U, γ/ρ)` elementwise.
pub fn update_aux(
    coeffs: &InfectivityTensor,
    dual: &InfectivityTensor,
    gamma: f64,
    rho: f64,
) -> InfectivityTensor {
    let eta = gamma / rho;
    coeffs.zip_map(dual, |a, u| soft_threshold(a + u, eta))
}

/// `U + (A − Z)`
pub fn update_dual(
    dual: &InfectivityTensor,
    coeffs: &InfectivityTensor,
    aux: &InfectivityTensor,
) -> InfectivityTensor {
    let residual = coeffs.zip_map(aux, |a, z| a - z);
    dual.zip_map(&residual, |u, r| u + r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// `μ` and the thresholded `Z`, clipped at zero.
    pub model: HawkesModel,
    pub converged: bool,
    pub iterations: usize,
    /// Weighted data log-likelihood `Σ p_n log L(s_n)` at each E-step.
    pub loglik_trace: Vec<f64>,
    pub final_rho: f64,
}

/// Per-sequence data that stays fixed across iterations.
struct Prepared<'a> {
    seq: &'a EventSequence,
    weight: f64,
    kappa: Vec<f64>,
    history: Vec<f64>,
}

/// Partial sums for one chunk of sequences.
struct Partial {
    base: Vec<f64>,
    triggered: Vec<f64>,
    sum_log: f64,
}

const CHUNK: usize = 32;

fn e_step_chunk(
    chunk: &[Prepared<'_>],
    mu: &[f64],
    coeffs: &InfectivityTensor,
) -> Result<Partial> {
    let c_len = mu.len();
    let m_len = coeffs.basis_len();
    let mut part = Partial {
        base: vec![0.0; c_len],
        triggered: vec![0.0; c_len * c_len * m_len],
        sum_log: 0.0,
    };
    let mut contrib = vec![0.0; c_len * m_len];
    for p in chunk {
        for (i, e) in p.seq.events().iter().enumerate() {
            let c = e.kind;
            let kappa = &p.kappa[i * m_len..(i + 1) * m_len];
            let hist = &p.history[i * c_len..(i + 1) * c_len];
            let mut lambda = mu[c];
            for (d, h) in hist.iter().enumerate() {
                let pair = coeffs.pair(c, d);
                for m in 0..m_len {
                    let v = pair[m] * kappa[m] * h;
                    contrib[d * m_len + m] = v;
                    lambda += v;
                }
            }
            if !(lambda > 0.0) {
                return Err(Error::DegenerateModel {
                    id: p.seq.id.clone(),
                    event: i,
                });
            }
            let scale = p.weight / lambda;
            part.base[c] += mu[c] * scale;
            let row = &mut part.triggered[c * c_len * m_len..(c + 1) * c_len * m_len];
            for (t, v) in row.iter_mut().zip(&contrib) {
                *t += v * scale;
            }
            part.sum_log += p.weight * lambda.ln();
        }
    }
    Ok(part)
}

/// Fit `μ` and `A` to weighted sequences.
pub fn fit(sequences: &[EventSequence], weights: &[f64], cfg: &LearnerConfig) -> Result<FitResult> {
    cfg.validate()?;
    if sequences.is_empty() {
        return Err(invalid("cannot fit an empty data set"));
    }
    if weights.len() != sequences.len() {
        return Err(invalid(format!(
            "{} weights for {} sequences",
            weights.len(),
            sequences.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(invalid("sequence weights must be finite and nonnegative"));
    }
    let c_len = match cfg.n_types {
        Some(c) => c,
        None => sequences.iter().map(EventSequence::type_bound).max().unwrap_or(0).max(1),
    };
    for s in sequences {
        s.check_types(c_len)?;
    }
    let basis = &cfg.basis;
    let m_len = basis.len();
    let beta = cfg.beta;

    let prepared: Vec<Prepared<'_>> = sequences
        .par_iter()
        .zip(weights.par_iter())
        .filter(|(_, w)| **w > 0.0)
        .map(|(seq, &weight)| {
            let mut kappa = vec![0.0; seq.len() * m_len];
            for (i, e) in seq.events().iter().enumerate() {
                basis.values_into(e.time, &mut kappa[i * m_len..(i + 1) * m_len]);
            }
            Prepared {
                seq,
                weight,
                kappa,
                history: decayed_history(seq, beta, c_len),
            }
        })
        .collect();

    // exposure and observed length do not depend on the parameters
    let mut stats0 = SufficientStats::new(c_len, m_len);
    let exposures: Vec<SufficientStats> = prepared
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = SufficientStats::new(c_len, m_len);
            for p in chunk {
                s.add_exposure(p.seq, p.weight, basis, beta);
            }
            s
        })
        .collect();
    for s in exposures {
        stats0
            .exposure
            .iter_mut()
            .zip(&s.exposure)
            .for_each(|(a, b)| *a += b);
        stats0.observed_length += s.observed_length;
    }
    if !(stats0.observed_length > 0.0) {
        return Err(invalid("total weighted observation length must be positive"));
    }
    let weighted_events: f64 = prepared.iter().map(|p| p.weight * p.seq.len() as f64).sum();
    let event_rate = weighted_events / stats0.observed_length;

    let mut state = LearnerState::initial(c_len, m_len, event_rate, cfg);
    let mut trace = Vec::new();
    let mut converged = false;

    while state.iter < cfg.max_iters {
        let partials: Vec<Partial> = prepared
            .par_chunks(CHUNK)
            .map(|chunk| e_step_chunk(chunk, &state.mu, &state.coeffs))
            .collect::<Result<_>>()?;
        let mut stats = SufficientStats {
            base: vec![0.0; c_len],
            triggered: InfectivityTensor::zeros(c_len, m_len),
            exposure: stats0.exposure.clone(),
            observed_length: stats0.observed_length,
        };
        let mut sum_log = 0.0;
        for p in partials {
            stats.base.iter_mut().zip(&p.base).for_each(|(a, b)| *a += b);
            stats
                .triggered
                .as_mut_slice()
                .iter_mut()
                .zip(&p.triggered)
                .for_each(|(a, b)| *a += b);
            sum_log += p.sum_log;
        }
        let compensator = state.mu.iter().sum::<f64>() * stats.observed_length
            + (0..c_len)
                .flat_map(|c| (0..c_len).flat_map(move |d| (0..m_len).map(move |m| (c, d, m))))
                .map(|(c, d, m)| state.coeffs.get(c, d, m) * stats.exposure[d * m_len + m])
                .sum::<f64>();
        trace.push(sum_log - compensator);

        let mu = m_step_mu(&stats)?;
        let coeffs = m_step_coeffs(&stats, &state.aux, &state.dual, state.rho);
        let aux = update_aux(&coeffs, &state.dual, cfg.gamma, state.rho);
        let dual = update_dual(&state.dual, &coeffs, &aux);
        let change = coeffs.frobenius_distance(&state.coeffs);

        state = LearnerState {
            mu,
            coeffs,
            aux,
            dual,
            rho: (state.rho * cfg.rho_growth).min(cfg.rho_cap),
            iter: state.iter + 1,
        };
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }

    let sparse = state.aux.map(|z| z.max(0.0));
    let model = HawkesModel::new(state.mu, sparse, basis.clone(), beta)?;
    Ok(FitResult {
        model,
        converged,
        iterations: state.iter,
        loglik_trace: trace,
        final_rho: state.rho,
    })
}

/// Fit with unit weights, as for raw SDC or complete sequences.
pub fn fit_unweighted(sequences: &[EventSequence], cfg: &LearnerConfig) -> Result<FitResult> {
    fit(sequences, &vec![1.0; sequences.len()], cfg)
}

pub fn fit_stitched(data: &StitchedDataset, cfg: &LearnerConfig) -> Result<FitResult> {
    fit(&data.sequences, &data.weights, cfg)
}
