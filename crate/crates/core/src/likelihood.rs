//! Intensity, kernel-basis integrals and the point-process log-likelihood
//!
//! ```text
//! log L(s) = Σ_i log λ_{c_i}(t_i) − Σ_c ∫_W λ_c(s) ds
//! ```
//!
//! where `W` is the union of the sequence's observation windows. History
//! carries across gaps between windows; integration does not.

use crate::basis::{BasisConfig, BasisKind};
use crate::error::{invalid, Error, Result};
use crate::model::HawkesModel;
use crate::quadrature::GaussLegendre;
use crate::sequence::EventSequence;

/// Gaussian basis support is clipped at this many bandwidth roots from the
/// center; the integrand there is below `exp(-100)` of its peak.
const GAUSSIAN_SUPPORT: f64 = 10.0;
/// Decay horizon, in units of `1/β`, past which the kernel is treated as 0.
const DECAY_HORIZON: f64 = 60.0;

/// `κ_m(t)`.
pub fn basis_eval(basis: &BasisConfig, m: usize, t: f64) -> Result<f64> {
    basis.eval(m, t)
}

/// Conditional intensity of type `c` at time `t` given the events of `seq`
/// strictly before `t`.
pub fn intensity(model: &HawkesModel, seq: &EventSequence, t: f64, c: usize) -> Result<f64> {
    model.check_type(c)?;
    seq.check_types(model.n_types())?;
    let beta = model.beta();
    let basis = model.basis();
    let m_len = basis.len();
    let mut kappa = vec![0.0; m_len];
    basis.values_into(t, &mut kappa);
    let endogenous: f64 = seq
        .events()
        .iter()
        .take_while(|e| e.time < t)
        .map(|e| {
            let pair = model.coeffs().pair(c, e.kind);
            let psi: f64 = pair.iter().zip(&kappa).map(|(a, k)| a * k).sum();
            psi * (-beta * (t - e.time)).exp()
        })
        .sum();
    Ok(model.mu()[c] + endogenous)
}

/// `∫_a^b κ_m(s) exp(-β (s - t_j)) ds` for `t_j ≤ a ≤ b`.
pub fn g_integral(
    basis: &BasisConfig,
    m: usize,
    beta: f64,
    t_j: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    if m >= basis.len() {
        return Err(Error::IndexOutOfRange {
            what: "basis",
            index: m,
            len: basis.len(),
        });
    }
    if a > b {
        return Err(invalid(format!("integration bounds reversed: {a} > {b}")));
    }
    if t_j > a {
        return Err(invalid(format!(
            "trigger time {t_j} lies after the integration start {a}"
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("decay must be positive, got {beta}")));
    }
    Ok(g_integral_unchecked(basis, m, beta, t_j, a, b))
}

pub(crate) fn g_integral_unchecked(
    basis: &BasisConfig,
    m: usize,
    beta: f64,
    t_j: f64,
    a: f64,
    b: f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    match basis.kind() {
        BasisKind::Constant => {
            (-beta * (a - t_j)).exp() * -(-beta * (b - a)).exp_m1() / beta
        }
        BasisKind::Gaussian => {
            let center = basis.centers()[m];
            let root = basis.bandwidth().sqrt();
            let lo = a.max(center - GAUSSIAN_SUPPORT * root);
            let hi = b
                .min(center + GAUSSIAN_SUPPORT * root)
                .min(t_j + DECAY_HORIZON / beta);
            if hi <= lo {
                return 0.0;
            }
            let piece = (2.0 * root).min(4.0 / beta);
            GaussLegendre::order32().integrate_composite(
                |s| basis.value(m, s) * (-beta * (s - t_j)).exp(),
                lo,
                hi,
                piece,
            )
        }
    }
}

/// For every event `j` and basis function `m`, the integral of
/// `κ_m(s) g(s - t_j)` over the observed part of `[t_j, end)`.
/// Returned row-major as `I × M`.
pub fn event_tail_integrals(basis: &BasisConfig, beta: f64, seq: &EventSequence) -> Vec<f64> {
    let m_len = basis.len();
    let mut out = vec![0.0; seq.len() * m_len];
    for (j, e) in seq.events().iter().enumerate() {
        for w in seq.windows().iter().filter(|w| w.end > e.time) {
            let a = w.begin.max(e.time);
            for m in 0..m_len {
                out[j * m_len + m] += g_integral_unchecked(basis, m, beta, e.time, a, w.end);
            }
        }
    }
    out
}

/// Decayed event counts `H[i][c'] = Σ_{t_j < t_i, c_j = c'} exp(-β (t_i - t_j))`,
/// row-major `I × C`. Events sharing a timestamp do not excite each other.
pub fn decayed_history(seq: &EventSequence, beta: f64, n_types: usize) -> Vec<f64> {
    let events = seq.events();
    let mut out = vec![0.0; events.len() * n_types];
    let mut h = vec![0.0; n_types];
    let mut last = f64::NAN;
    let mut i = 0;
    while i < events.len() {
        let t = events[i].time;
        if last.is_finite() {
            let f = (-beta * (t - last)).exp();
            h.iter_mut().for_each(|x| *x *= f);
        }
        last = t;
        let mut k = i;
        while k < events.len() && events[k].time == t {
            out[k * n_types..(k + 1) * n_types].copy_from_slice(&h);
            k += 1;
        }
        for e in &events[i..k] {
            h[e.kind] += 1.0;
        }
        i = k;
    }
    out
}

/// `∫_W λ_c(s) ds` over the sequence's observation windows.
pub fn compensator(model: &HawkesModel, seq: &EventSequence, c: usize) -> Result<f64> {
    model.check_type(c)?;
    seq.check_types(model.n_types())?;
    let m_len = model.basis().len();
    let tails = event_tail_integrals(model.basis(), model.beta(), seq);
    let endogenous: f64 = seq
        .events()
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let pair = model.coeffs().pair(c, e.kind);
            pair.iter()
                .zip(&tails[j * m_len..(j + 1) * m_len])
                .map(|(a, g)| a * g)
                .sum::<f64>()
        })
        .sum();
    Ok(model.mu()[c] * seq.observed_length() + endogenous)
}

/// Intensity of each event's own type at its own time.
pub fn event_intensities(model: &HawkesModel, seq: &EventSequence) -> Result<Vec<f64>> {
    let n_types = model.n_types();
    seq.check_types(n_types)?;
    let m_len = model.basis().len();
    let hist = decayed_history(seq, model.beta(), n_types);
    let mut kappa = vec![0.0; m_len];
    Ok(seq
        .events()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            model.basis().values_into(e.time, &mut kappa);
            let h = &hist[i * n_types..(i + 1) * n_types];
            let mut lambda = model.mu()[e.kind];
            for (d, hd) in h.iter().enumerate() {
                if *hd == 0.0 {
                    continue;
                }
                let psi: f64 = model
                    .coeffs()
                    .pair(e.kind, d)
                    .iter()
                    .zip(&kappa)
                    .map(|(a, k)| a * k)
                    .sum();
                lambda += psi * hd;
            }
            lambda
        })
        .collect())
}

/// Log-likelihood of `seq` under `model`.
///
/// Returns `f64::NEG_INFINITY` when some event has zero intensity (a zero
/// base rate with no exciting history).
pub fn log_likelihood(model: &HawkesModel, seq: &EventSequence) -> Result<f64> {
    let lambdas = event_intensities(model, seq)?;
    let mut sum_log = 0.0;
    for l in lambdas {
        if l <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        sum_log += l.ln();
    }
    let mut total = 0.0;
    for c in 0..model.n_types() {
        total += compensator(model, seq, c)?;
    }
    Ok(sum_log - total)
}
