//! Synthetic ground truths, exact simulation by thinning, and interval
//! censoring into short doubly-censored sequences.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisConfig;
use crate::error::{invalid, Error, Result};
use crate::model::{Excitation, HawkesModel, InfectivityTensor};
use crate::rng::{stream, StreamRng};
use crate::sequence::{Event, EventSequence, ObservationWindow};

pub const BASE_RATE_RANGE: (f64, f64) = (0.1, 0.2);
pub const CONSTANT_INFECTIVITY_RANGE: (f64, f64) = (0.0, 0.2);
pub const FREQUENCY_RANGE: (f64, f64) = (1.0, 4.0);
pub const COSINE_AMPLITUDE: f64 = 0.2;
pub const TRUTH_DECAY: f64 = 0.2;
pub const DEFAULT_EVENT_CAP: usize = 1_000_000;
/// Grid size for projecting an analytic infectivity onto a basis.
pub const PROJECTION_GRID: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    TimeInvariant,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSpec {
    pub kind: TruthKind,
    pub n_types: usize,
    pub window: ObservationWindow,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Infectivity {
    /// `ψ_{cc'}(t) = psi[c][c']`, row-major `C × C`.
    Constant { psi: Vec<f64> },
    /// `ψ_{cc'}(t) = max(0, amplitude · cos(2π ω_{cc'} t / period))`.
    Cosine {
        amplitude: f64,
        omega: Vec<f64>,
        period: f64,
    },
}

/// Analytic model handle used to generate data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub mu: Vec<f64>,
    pub beta: f64,
    pub infectivity: Infectivity,
    /// The global window the truth was generated for.
    pub window: ObservationWindow,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        let c = self.mu.len();
        if c == 0 {
            return Err(invalid("ground truth needs at least one type"));
        }
        if self.mu.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(invalid("base rates must be finite and nonnegative"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("decay must be positive"));
        }
        match &self.infectivity {
            Infectivity::Constant { psi } => {
                if psi.len() != c * c || psi.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                    return Err(invalid("constant infectivity must be a nonnegative CxC matrix"));
                }
            }
            Infectivity::Cosine {
                amplitude,
                omega,
                period,
            } => {
                if omega.len() != c * c || !(*amplitude >= 0.0) || !(*period > 0.0) {
                    return Err(invalid("malformed cosine infectivity"));
                }
            }
        }
        Ok(())
    }

    /// The truth with its kernel decay replaced, e.g. for negative controls.
    pub fn with_decay(&self, beta: f64) -> Self {
        Self {
            beta,
            ..self.clone()
        }
    }

    /// Least-squares projection of each `ψ_{cc'}` onto `basis` over a grid of
    /// [`PROJECTION_GRID`] points on the truth's window, constrained to
    /// nonnegative coefficients so the result is a valid [`HawkesModel`].
    pub fn project(&self, basis: &BasisConfig) -> Result<HawkesModel> {
        let c_len = self.mu.len();
        let m_len = basis.len();
        let grid: Vec<f64> = (0..PROJECTION_GRID)
            .map(|k| {
                self.window.begin
                    + self.window.length() * k as f64 / (PROJECTION_GRID - 1) as f64
            })
            .collect();
        let design = DMatrix::from_fn(grid.len(), m_len, |k, m| basis.value(m, grid[k]));
        let mut coeffs = InfectivityTensor::zeros(c_len, m_len);
        for c in 0..c_len {
            for d in 0..c_len {
                let target = DVector::from_iterator(
                    grid.len(),
                    grid.iter().map(|&t| self.infectivity(c, d, t)),
                );
                let x = nnls(&design, &target);
                for (m, v) in x.iter().enumerate() {
                    coeffs.set(c, d, m, *v);
                }
            }
        }
        HawkesModel::new(self.mu.clone(), coeffs, basis.clone(), self.beta)
    }
}

impl Excitation for GroundTruth {
    fn n_types(&self) -> usize {
        self.mu.len()
    }

    fn base_rate(&self, c: usize) -> f64 {
        self.mu[c]
    }

    fn decay(&self) -> f64 {
        self.beta
    }

    fn infectivity(&self, c: usize, source: usize, t: f64) -> f64 {
        let idx = c * self.mu.len() + source;
        match &self.infectivity {
            Infectivity::Constant { psi } => psi[idx],
            Infectivity::Cosine {
                amplitude,
                omega,
                period,
            } => {
                let phase = 2.0 * std::f64::consts::PI * omega[idx] * t / period;
                (amplitude * phase.cos()).max(0.0)
            }
        }
    }

    fn infectivity_bound(&self, c: usize, source: usize) -> f64 {
        match &self.infectivity {
            Infectivity::Constant { psi } => psi[c * self.mu.len() + source],
            Infectivity::Cosine { amplitude, .. } => *amplitude,
        }
    }

    fn decayed_infectivity_integral(&self, c: usize, source: usize, a: f64, b: f64) -> f64 {
        match &self.infectivity {
            Infectivity::Constant { psi } => {
                psi[c * self.mu.len() + source] * -(-self.beta * (b - a)).exp_m1() / self.beta
            }
            Infectivity::Cosine { .. } => {
                let rule = crate::quadrature::GaussLegendre::new(16);
                rule.integrate_composite(
                    |s| self.infectivity(c, source, s) * (-self.beta * (s - a)).exp(),
                    a,
                    b,
                    0.25,
                )
            }
        }
    }
}

/// Draw a ground truth following the synthetic protocol: base rates in
/// `[0.1, 0.2]`, decay `0.2`, and either constant infectivities in
/// `[0, 0.2]` or clipped cosines with frequencies in `[1, 4]` cycles per
/// window.
pub fn make_ground_truth(spec: &GroundTruthSpec) -> Result<GroundTruth> {
    if spec.n_types == 0 {
        return Err(invalid("ground truth needs at least one type"));
    }
    if !(spec.window.length() > 0.0) {
        return Err(invalid("ground-truth window must have positive length"));
    }
    let mut rng = stream(spec.seed, 0);
    let c = spec.n_types;
    let mu = (0..c)
        .map(|_| rng.random_range(BASE_RATE_RANGE.0..=BASE_RATE_RANGE.1))
        .collect();
    let infectivity = match spec.kind {
        TruthKind::TimeInvariant => Infectivity::Constant {
            psi: (0..c * c)
                .map(|_| {
                    rng.random_range(CONSTANT_INFECTIVITY_RANGE.0..=CONSTANT_INFECTIVITY_RANGE.1)
                })
                .collect(),
        },
        TruthKind::Cosine => Infectivity::Cosine {
            amplitude: COSINE_AMPLITUDE,
            omega: (0..c * c)
                .map(|_| rng.random_range(FREQUENCY_RANGE.0..=FREQUENCY_RANGE.1))
                .collect(),
            period: spec.window.length(),
        },
    };
    let truth = GroundTruth {
        mu,
        beta: TRUTH_DECAY,
        infectivity,
        window: spec.window,
    };
    truth.validate()?;
    Ok(truth)
}

/// Simulate one sequence on `window` by Ogata thinning.
pub fn simulate<E: Excitation + ?Sized>(
    truth: &E,
    window: ObservationWindow,
    seed: u64,
) -> Result<EventSequence> {
    let mut rng = stream(seed, 0);
    simulate_with_rng(truth, window, &mut rng, DEFAULT_EVENT_CAP, "seq-0".into())
}

/// `count` independent sequences; sequence `i` uses stream `i` of `seed`.
pub fn simulate_many<E: Excitation + ?Sized>(
    truth: &E,
    window: ObservationWindow,
    count: usize,
    seed: u64,
) -> Result<Vec<EventSequence>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            simulate_with_rng(truth, window, &mut rng, DEFAULT_EVENT_CAP, format!("seq-{i}"))
        })
        .collect()
}

/// Thinning with a dominating rate recomputed after every candidate: the
/// current base rates plus each decayed history weighted by the supremum of
/// its infectivity. The bound only decreases between accepted events.
pub fn simulate_with_rng<E: Excitation + ?Sized>(
    truth: &E,
    window: ObservationWindow,
    rng: &mut StreamRng,
    cap: usize,
    id: String,
) -> Result<EventSequence> {
    let c_len = truth.n_types();
    let beta = truth.decay();
    let base: Vec<f64> = (0..c_len).map(|c| truth.base_rate(c)).collect();
    let base_total: f64 = base.iter().sum();
    // column sums of the bounds: total excitation headroom per source type
    let headroom: Vec<f64> = (0..c_len)
        .map(|d| (0..c_len).map(|c| truth.infectivity_bound(c, d)).sum())
        .collect();

    let mut history = vec![0.0; c_len];
    let mut lambdas = vec![0.0; c_len];
    let mut events = Vec::new();
    let mut t = window.begin;
    loop {
        let upper = base_total
            + history
                .iter()
                .zip(&headroom)
                .map(|(h, b)| h * b)
                .sum::<f64>();
        if !(upper > 0.0) {
            break;
        }
        let dt = Exp::new(upper)
            .map_err(|e| invalid(format!("bad thinning rate {upper}: {e}")))?
            .sample(rng);
        t += dt;
        if t > window.end {
            break;
        }
        let decay = (-beta * dt).exp();
        history.iter_mut().for_each(|h| *h *= decay);

        let mut total = 0.0;
        for (c, l) in lambdas.iter_mut().enumerate() {
            *l = base[c]
                + history
                    .iter()
                    .enumerate()
                    .filter(|(_, h)| **h > 0.0)
                    .map(|(d, h)| truth.infectivity(c, d, t) * h)
                    .sum::<f64>();
            total += *l;
        }
        let u = rng.random::<f64>() * upper;
        if u >= total {
            continue;
        }
        let mut acc = 0.0;
        let mut kind = c_len - 1;
        for (c, l) in lambdas.iter().enumerate() {
            acc += l;
            if u < acc {
                kind = c;
                break;
            }
        }
        events.push(Event::new(t, kind));
        history[kind] += 1.0;
        if events.len() > cap {
            return Err(Error::Explosion { cap });
        }
    }
    EventSequence::new(id, events, vec![window])
}

/// Interval-censored data set: one short window per source sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SdcDataset {
    pub sequences: Vec<EventSequence>,
    /// The `n + 1` boundaries of the interval grid.
    pub grid: Vec<f64>,
    /// Index of the interval kept for each sequence.
    pub assignments: Vec<usize>,
}

/// Split the shared global window into `n_intervals` equal pieces and keep,
/// for each sequence, the events of one piece chosen uniformly at random.
pub fn censor(sequences: &[EventSequence], n_intervals: usize, seed: u64) -> Result<SdcDataset> {
    if n_intervals == 0 {
        return Err(invalid("at least one censoring interval is required"));
    }
    let Some(first) = sequences.first() else {
        return Ok(SdcDataset {
            sequences: Vec::new(),
            grid: Vec::new(),
            assignments: Vec::new(),
        });
    };
    let global = match first.windows() {
        [w] => *w,
        _ => return Err(invalid("censoring needs single-window sequences")),
    };
    if let Some(s) = sequences.iter().find(|s| s.windows() != [global]) {
        return Err(invalid(format!(
            "sequence `{}` does not share the global window",
            s.id
        )));
    }
    let pieces = global.split(n_intervals);
    let mut grid: Vec<f64> = pieces.iter().map(|w| w.begin).collect();
    grid.push(global.end);

    if n_intervals == 1 {
        return Ok(SdcDataset {
            sequences: sequences.to_vec(),
            grid,
            assignments: vec![0; sequences.len()],
        });
    }
    let (sequences, assignments) = sequences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let k = stream(seed, i as u64).random_range(0..n_intervals);
            (s.restrict(pieces[k], k + 1 == n_intervals), k)
        })
        .unzip();
    Ok(SdcDataset {
        sequences,
        grid,
        assignments,
    })
}

/// Lawson–Hanson nonnegative least squares `min ‖Ax − b‖, x ≥ 0`.
fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Vec<f64> {
    let n = a.ncols();
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = a.select_columns(&idx);
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        let mut full = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = sol[k];
        }
        full
    };

    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let s = solve_passive(&passive);
            if (0..n).filter(|&k| passive[k]).all(|k| s[k] > 0.0) {
                x = s;
                break;
            }
            let alpha = (0..n)
                .filter(|&k| passive[k] && s[k] <= 0.0)
                .map(|k| x[k] / (x[k] - s[k]))
                .fold(f64::INFINITY, f64::min);
            x = &x + (&s - &x) * alpha;
            for k in 0..n {
                if passive[k] && x[k] <= 1e-15 {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x.iter().map(|v| v.max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global() -> ObservationWindow {
        ObservationWindow::new(0.0, 50.0).unwrap()
    }

    fn spec(kind: TruthKind, seed: u64) -> GroundTruthSpec {
        GroundTruthSpec {
            kind,
            n_types: 2,
            window: global(),
            seed,
        }
    }

    #[test]
    fn time_invariant_truth_ranges() {
        let truth = make_ground_truth(&spec(TruthKind::TimeInvariant, 3)).unwrap();
        assert_eq!(truth.beta, 0.2);
        assert!(truth.mu.iter().all(|m| (0.1..=0.2).contains(m)));
        for c in 0..2 {
            for d in 0..2 {
                let v = truth.infectivity(c, d, 0.0);
                assert!((0.0..=0.2).contains(&v));
                assert_eq!(v, truth.infectivity(c, d, 37.5));
            }
        }
    }

    #[test]
    fn cosine_truth_starts_at_amplitude() {
        let truth = make_ground_truth(&spec(TruthKind::Cosine, 3)).unwrap();
        for c in 0..2 {
            for d in 0..2 {
                assert!((truth.infectivity(c, d, 0.0) - 0.2).abs() < 1e-15);
            }
        }
        // clipped, never negative
        assert!((0..500).all(|k| truth.infectivity(0, 1, k as f64 * 0.1) >= 0.0));
    }

    #[test]
    fn truth_is_deterministic_in_seed() {
        let a = make_ground_truth(&spec(TruthKind::Cosine, 11)).unwrap();
        let b = make_ground_truth(&spec(TruthKind::Cosine, 11)).unwrap();
        let c = make_ground_truth(&spec(TruthKind::Cosine, 12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_rates_give_empty_sequence() {
        let truth = GroundTruth {
            mu: vec![0.0, 0.0],
            beta: 0.2,
            infectivity: Infectivity::Constant { psi: vec![0.0; 4] },
            window: global(),
        };
        assert!(simulate(&truth, global(), 1).unwrap().is_empty());
    }

    #[test]
    fn simulation_is_deterministic() {
        let truth = make_ground_truth(&spec(TruthKind::TimeInvariant, 5)).unwrap();
        let a = simulate(&truth, global(), 9).unwrap();
        let b = simulate(&truth, global(), 9).unwrap();
        assert_eq!(a, b);
        let many = simulate_many(&truth, global(), 3, 9).unwrap();
        assert_eq!(many[0].events(), a.events());
    }

    #[test]
    fn explosion_guard() {
        let truth = GroundTruth {
            mu: vec![1.0],
            beta: 0.2,
            infectivity: Infectivity::Constant { psi: vec![2.0] },
            window: global(),
        };
        let mut rng = stream(1, 0);
        let r = simulate_with_rng(&truth, global(), &mut rng, 1000, "x".into());
        assert_eq!(r, Err(Error::Explosion { cap: 1000 }));
    }

    #[test]
    fn censor_single_interval_is_identity() {
        let truth = make_ground_truth(&spec(TruthKind::TimeInvariant, 5)).unwrap();
        let seqs = simulate_many(&truth, global(), 5, 2).unwrap();
        let sdc = censor(&seqs, 1, 4).unwrap();
        assert_eq!(sdc.sequences, seqs);
    }

    #[test]
    fn censor_ten_intervals_on_fifty() {
        let truth = make_ground_truth(&spec(TruthKind::TimeInvariant, 5)).unwrap();
        let seqs = simulate_many(&truth, global(), 40, 2).unwrap();
        let sdc = censor(&seqs, 10, 4).unwrap();
        assert_eq!(sdc.grid.len(), 11);
        for (out, src) in sdc.sequences.iter().zip(&seqs) {
            assert_eq!(out.windows().len(), 1);
            assert!((out.windows()[0].length() - 5.0).abs() < 1e-12);
            for e in out.events() {
                assert!(out.windows()[0].contains(e.time));
                assert!(src.events().contains(e));
            }
        }
    }

    #[test]
    fn censor_rejects_mixed_windows() {
        let a = EventSequence::new("a", vec![], vec![global()]).unwrap();
        let b = EventSequence::new("b", vec![], vec![ObservationWindow::new(0.0, 10.0).unwrap()])
            .unwrap();
        assert!(censor(&[a, b], 2, 0).is_err());
    }

    #[test]
    fn nnls_recovers_nonnegative_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, -1.0, 1.0]);
        // unconstrained optimum has x2 < 0; constrained optimum is x = (1.5, 0)
        let x = nnls(&a, &b);
        assert!((x[0] - 1.5).abs() < 1e-10 && x[1] == 0.0, "{x:?}");
    }

    #[test]
    fn projection_of_constant_truth_is_exact() {
        let truth = make_ground_truth(&spec(TruthKind::TimeInvariant, 8)).unwrap();
        let model = truth.project(&BasisConfig::constant()).unwrap();
        let Infectivity::Constant { psi } = &truth.infectivity else {
            unreachable!()
        };
        for (a, p) in model.coeffs().as_slice().iter().zip(psi) {
            assert!((a - p).abs() < 1e-12);
        }
    }
}
