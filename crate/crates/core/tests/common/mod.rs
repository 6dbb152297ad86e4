#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdc_hawkes::learn::{e_step, SufficientStats};
use sdc_hawkes::{
    censor, compensator, make_ground_truth, simulate_many, stitch_dataset, BasisConfig,
    BasisKind, Event, EventSequence, GroundTruthSpec, HawkesModel, InfectivityTensor,
    LearnerConfig, ObservationWindow, StitchConfig, StitchedDataset, TruthKind,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// κ_m written out from the formula, independent of the crate.
pub fn kappa(basis: &BasisConfig, m: usize, t: f64) -> f64 {
    match basis.kind() {
        BasisKind::Constant => 1.0,
        BasisKind::Gaussian => {
            let d = t - basis.centers()[m];
            (-d * d / basis.bandwidth()).exp()
        }
    }
}

pub fn oracle_intensity(model: &HawkesModel, events: &[Event], t: f64, c: usize) -> f64 {
    let mut v = model.mu()[c];
    for e in events.iter().filter(|e| e.time < t) {
        for m in 0..model.basis().len() {
            v += model.coeffs().get(c, e.kind, m)
                * kappa(model.basis(), m, t)
                * (-model.beta() * (t - e.time)).exp();
        }
    }
    v
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Integral of the type-`c` intensity over the windows, split at events.
pub fn oracle_compensator(model: &HawkesModel, seq: &EventSequence, c: usize) -> f64 {
    let events = seq.events();
    let mut total = 0.0;
    for w in seq.windows() {
        let mut cuts = vec![w.begin];
        cuts.extend(
            events
                .iter()
                .map(|e| e.time)
                .filter(|&t| t > w.begin && t < w.end),
        );
        cuts.push(w.end);
        for pair in cuts.windows(2) {
            total += simpson(
                |t| oracle_intensity(model, events, t, c),
                pair[0],
                pair[1],
                1e-13,
            );
        }
    }
    total
}

pub fn oracle_loglik(model: &HawkesModel, seq: &EventSequence) -> f64 {
    let events = seq.events();
    let log_sum: f64 = events
        .iter()
        .map(|e| oracle_intensity(model, events, e.time, e.kind).ln())
        .sum();
    log_sum
        - (0..model.n_types())
            .map(|c| oracle_compensator(model, seq, c))
            .sum::<f64>()
}

pub fn random_basis<R: Rng>(rng: &mut R, window: ObservationWindow) -> BasisConfig {
    if rng.random_bool(0.4) {
        BasisConfig::constant()
    } else {
        let m = rng.random_range(1..=4);
        let centers = (0..m)
            .map(|_| rng.random_range(window.begin..=window.end))
            .collect();
        BasisConfig::gaussian(centers, rng.random_range(0.5..8.0)).unwrap()
    }
}

pub fn random_model<R: Rng>(rng: &mut R, n_types: usize, basis: BasisConfig) -> HawkesModel {
    let m = basis.len();
    let mu = (0..n_types).map(|_| rng.random_range(0.01..1.0)).collect();
    let coeffs = InfectivityTensor::from_fn(n_types, m, |_, _, _| rng.random_range(0.0..1.0));
    HawkesModel::new(mu, coeffs, basis, rng.random_range(0.1..3.0)).unwrap()
}

/// One or two windows inside `[0, 10]` with up to `max_events` events.
pub fn random_sequence<R: Rng>(rng: &mut R, n_types: usize, max_events: usize) -> EventSequence {
    let windows = if rng.random_bool(0.5) {
        vec![ObservationWindow::new(0.0, rng.random_range(2.0..10.0)).unwrap()]
    } else {
        let a = rng.random_range(1.0..4.0);
        let b = rng.random_range(a..6.0);
        vec![
            ObservationWindow::new(0.0, a).unwrap(),
            ObservationWindow::new(b, 10.0).unwrap(),
        ]
    };
    let n = rng.random_range(0..=max_events);
    let mut events: Vec<Event> = (0..n)
        .map(|_| {
            let w = windows[rng.random_range(0..windows.len())];
            Event::new(
                rng.random_range(w.begin..=w.end),
                rng.random_range(0..n_types),
            )
        })
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    EventSequence::new("rand", events, windows).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub struct Problem {
    pub seqs: Vec<EventSequence>,
    pub weights: Vec<f64>,
    pub state: HawkesModel,
    pub aux: InfectivityTensor,
    pub dual: InfectivityTensor,
    pub rho: f64,
}

pub fn random_problem(seed: u64) -> Problem {
    let mut r = rng(seed);
    let c_len = r.random_range(1..=3);
    let basis = random_basis(&mut r, ObservationWindow::new(0.0, 10.0).unwrap());
    let state = random_model(&mut r, c_len, basis);
    let n = r.random_range(2..=5);
    let seqs: Vec<_> = (0..n).map(|_| random_sequence(&mut r, c_len, 10)).collect();
    let weights = (0..n).map(|_| r.random_range(0.1..1.0)).collect();
    let m_len = state.basis().len();
    let aux = InfectivityTensor::from_fn(c_len, m_len, |_, _, _| r.random_range(0.0..0.3));
    let dual = InfectivityTensor::from_fn(c_len, m_len, |_, _, _| r.random_range(-0.1..0.1));
    Problem {
        seqs,
        weights,
        state,
        aux,
        dual,
        rho: r.random_range(0.1..10.0),
    }
}

pub fn pairwise_stats(p: &Problem) -> SufficientStats {
    let model = &p.state;
    let mut stats = SufficientStats::new(model.n_types(), model.basis().len());
    for (s, &w) in p.seqs.iter().zip(&p.weights) {
        let resp = e_step(model, s).unwrap();
        stats.accumulate(&resp, s, w, model.basis(), model.beta());
    }
    stats
}

pub fn with_params(base: &HawkesModel, mu: Vec<f64>, coeffs: InfectivityTensor) -> HawkesModel {
    HawkesModel::new(mu, coeffs, base.basis().clone(), base.beta()).unwrap()
}

/// Surrogate objective at fixed responsibilities, built from the pairwise
/// responsibilities and the crate's compensator. Terms that depend on neither
/// `μ` nor `A` are dropped.
pub fn surrogate(p: &Problem, mu: &[f64], coeffs: &InfectivityTensor) -> f64 {
    let model = with_params(&p.state, mu.to_vec(), coeffs.clone());
    let m_len = coeffs.basis_len();
    let mut q = 0.0;
    for (s, &w) in p.seqs.iter().zip(&p.weights) {
        let resp = e_step(&p.state, s).unwrap();
        let ev = s.events();
        for (i, e) in ev.iter().enumerate() {
            if resp.base(i) > 0.0 {
                q += w * resp.base(i) * mu[e.kind].ln();
            }
            for (j, src) in ev[..i].iter().enumerate() {
                for m in 0..m_len {
                    let r = resp.triggered(i, j, m);
                    if r > 0.0 {
                        q += w * r * coeffs.get(e.kind, src.kind, m).ln();
                    }
                }
            }
        }
        for c in 0..model.n_types() {
            q -= w * compensator(&model, s, c).unwrap();
        }
    }
    let penalty: f64 = coeffs
        .as_slice()
        .iter()
        .zip(p.aux.as_slice().iter().zip(p.dual.as_slice()))
        .map(|(a, (z, u))| (a - z + u).powi(2))
        .sum();
    q - 0.5 * p.rho * penalty
}

/// One cell of the surrogate; the compensator is linear in `A`, so the
/// other cells and `μ` only add constants.
pub fn cell_surrogate(p: &Problem, stats_q: f64, c: usize, d: usize, m: usize, a: f64) -> f64 {
    let c_len = p.state.n_types();
    let mut coeffs = InfectivityTensor::zeros(c_len, p.state.basis().len());
    coeffs.set(c, d, m, a);
    let model = with_params(&p.state, vec![0.0; c_len], coeffs);
    let comp: f64 = p
        .seqs
        .iter()
        .zip(&p.weights)
        .map(|(s, w)| w * compensator(&model, s, c).unwrap())
        .sum();
    let log_term = if stats_q > 0.0 { stats_q * a.ln() } else { 0.0 };
    // ρ/2 (a + u − z)² without its a-independent part
    let s = p.dual.get(c, d, m) - p.aux.get(c, d, m);
    log_term - comp - p.rho * (0.5 * a * a + s * a)
}

pub fn weighted_dataset() -> (StitchedDataset, ObservationWindow) {
    let window = ObservationWindow::new(0.0, 50.0).unwrap();
    let truth = make_ground_truth(&GroundTruthSpec {
        kind: TruthKind::TimeInvariant,
        n_types: 2,
        window,
        seed: 3,
    })
    .unwrap();
    let complete = simulate_many(&truth, window, 60, 4).unwrap();
    let sdc = censor(&complete, 5, 5).unwrap();
    let stitched = stitch_dataset(
        &sdc.sequences,
        &StitchConfig {
            depth: 1,
            replicates: 3,
            seed: 6,
            ..StitchConfig::default()
        },
    )
    .unwrap();
    (stitched, window)
}

pub fn plain_em() -> LearnerConfig {
    LearnerConfig {
        gamma: 0.0,
        rho0: 1e-8,
        rho_cap: 1e-8,
        tolerance: f64::MIN_POSITIVE,
        max_iters: 60,
        n_types: Some(2),
        seed: 1,
        ..LearnerConfig::default()
    }
}

