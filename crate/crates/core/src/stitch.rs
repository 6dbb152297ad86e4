//! Sampling-stitching synthesis of long training sequences.
//!
//! For every SDC sequence we repeatedly sample a plausible predecessor (and,
//! symmetrically, a successor) from the pool of observed sequences, with
//! probability proportional to a similarity that decays with the time gap
//! between the two windows and optionally with the distance between their
//! feature vectors. Chains of up to `depth` segments on each side are
//! concatenated into one multi-window sequence whose weight is the product
//! of the similarities along the chain, normalized per origin.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{stable_hash, stream, StreamRng};
use crate::sequence::{EventSequence, ObservationWindow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchConfig {
    /// Similarity bandwidth σ_s.
    pub bandwidth: f64,
    /// Maximum number of stitches in each direction (L).
    pub depth: usize,
    /// Stitched sequences generated per origin (U).
    pub replicates: usize,
    pub use_features: bool,
    /// Admit candidates whose window overlaps the segment they attach to.
    pub allow_overlap: bool,
    /// Sequences without window bounds take the span of their events.
    /// Applied when data is loaded; stitching itself always sees windows.
    pub endpoint_fallback: bool,
    pub seed: u64,
}

impl Default for StitchConfig {
    fn default() -> Self {
        Self {
            bandwidth: 1.0,
            depth: 2,
            replicates: 5,
            use_features: false,
            allow_overlap: false,
            endpoint_fallback: false,
            seed: 0,
        }
    }
}

impl StitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(invalid("similarity bandwidth must be positive"));
        }
        if self.replicates == 0 {
            return Err(invalid("at least one stitched replicate per origin is required"));
        }
        Ok(())
    }
}

#[inline]
fn kernel(sq_dist: f64, bandwidth: f64) -> f64 {
    (-sq_dist / bandwidth).exp()
}

/// A predecessor may overlap its successor only if it starts strictly
/// earlier and ends strictly earlier; nested windows are never stitched.
fn overlap_admissible(pred: &ObservationWindow, succ: &ObservationWindow) -> bool {
    pred.begin < succ.begin && pred.end < succ.end
}

fn first_window(s: &EventSequence) -> ObservationWindow {
    s.windows()[0]
}

fn last_window(s: &EventSequence) -> ObservationWindow {
    s.windows()[s.windows().len() - 1]
}

/// Similarity of `pred` as the predecessor of `succ`.
pub fn similarity(pred: &EventSequence, succ: &EventSequence, cfg: &StitchConfig) -> Result<f64> {
    let (p_end, s_begin) = (pred.end(), succ.begin());
    let ordered = p_end <= s_begin;
    let overlapping = cfg.allow_overlap
        && !ordered
        && overlap_admissible(&last_window(pred), &first_window(succ));
    if !(ordered || overlapping) {
        return Ok(0.0);
    }
    let gap = s_begin - p_end;
    let mut w = kernel(gap * gap, cfg.bandwidth);
    if cfg.use_features {
        if let (Some(fp), Some(fs)) = (&pred.feature, &succ.feature) {
            if fp.len() != fs.len() {
                return Err(invalid(format!(
                    "feature dimensions differ: `{}` has {}, `{}` has {}",
                    pred.id,
                    fp.len(),
                    succ.id,
                    fs.len()
                )));
            }
            let d2: f64 = fp.iter().zip(fs).map(|(a, b)| (b - a) * (b - a)).sum();
            w *= kernel(d2, cfg.bandwidth);
        }
    }
    Ok(w)
}

fn normalized(weights: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let positive: Vec<(usize, f64)> = weights.into_iter().filter(|(_, w)| *w > 0.0).collect();
    let total: f64 = positive.iter().map(|(_, w)| w).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Vec::new();
    }
    positive.into_iter().map(|(i, w)| (i, w / total)).collect()
}

fn raw_weights(
    anchor: &EventSequence,
    pool: &[EventSequence],
    cfg: &StitchConfig,
    exclude: &HashSet<&str>,
    backward: bool,
) -> Result<Vec<(usize, f64)>> {
    pool.iter()
        .enumerate()
        .filter(|(_, cand)| cand.id != anchor.id && !exclude.contains(cand.id.as_str()))
        .map(|(i, cand)| {
            let w = if backward {
                similarity(cand, anchor, cfg)?
            } else {
                similarity(anchor, cand, cfg)?
            };
            Ok((i, w))
        })
        .collect()
}

/// Categorical distribution over pool indices for the predecessor of
/// `target`. Empty when no candidate has positive similarity.
pub fn predecessor_distribution(
    target: &EventSequence,
    pool: &[EventSequence],
    cfg: &StitchConfig,
) -> Result<Vec<(usize, f64)>> {
    Ok(normalized(raw_weights(target, pool, cfg, &HashSet::new(), true)?))
}

/// Mirror of [`predecessor_distribution`] for successors.
pub fn successor_distribution(
    target: &EventSequence,
    pool: &[EventSequence],
    cfg: &StitchConfig,
) -> Result<Vec<(usize, f64)>> {
    Ok(normalized(raw_weights(target, pool, cfg, &HashSet::new(), false)?))
}

/// Make an overlapping pair disjoint by giving the overlap region to one of
/// them with probability ½. Disjoint pairs are returned unchanged; nested
/// windows yield `None`.
pub fn resolve_overlap(
    pred: &EventSequence,
    succ: &EventSequence,
    seed: u64,
) -> Option<(EventSequence, EventSequence)> {
    let keep_pred = stream(seed, 0).random_bool(0.5);
    resolve_overlap_with(pred, succ, keep_pred)
}

/// Deterministic core of [`resolve_overlap`]: `keep_pred` decides who keeps
/// the overlap region.
pub fn resolve_overlap_with(
    pred: &EventSequence,
    succ: &EventSequence,
    keep_pred: bool,
) -> Option<(EventSequence, EventSequence)> {
    if pred.end() <= succ.begin() {
        return Some((pred.clone(), succ.clone()));
    }
    let (pw, sw) = (last_window(pred), first_window(succ));
    if !overlap_admissible(&pw, &sw) {
        return None;
    }
    if keep_pred {
        let cut = pw.end;
        let mut windows = succ.windows().to_vec();
        windows[0].begin = cut;
        let events = succ
            .events()
            .iter()
            .copied()
            .filter(|e| e.time > cut)
            .collect();
        let trimmed = EventSequence::from_parts_unchecked(
            succ.id.clone(),
            events,
            windows,
            succ.feature.clone(),
            succ.origin.clone(),
        );
        Some((pred.clone(), trimmed))
    } else {
        let cut = sw.begin;
        let mut windows = pred.windows().to_vec();
        let last = windows.len() - 1;
        windows[last].end = cut;
        let events = pred
            .events()
            .iter()
            .copied()
            .filter(|e| e.time < cut)
            .collect();
        let trimmed = EventSequence::from_parts_unchecked(
            pred.id.clone(),
            events,
            windows,
            pred.feature.clone(),
            pred.origin.clone(),
        );
        Some((trimmed, succ.clone()))
    }
}

/// One synthesized sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchedSequence {
    pub sequence: EventSequence,
    /// Product of the similarities of consecutive segments.
    pub raw_weight: f64,
    /// `raw_weight` normalized over the replicates of the same origin.
    pub weight: f64,
    /// Ids of the constituent segments in time order.
    pub segments: Vec<String>,
}

fn pick(rng: &mut StreamRng, dist: &[(usize, f64)]) -> usize {
    let index = WeightedIndex::new(dist.iter().map(|(_, p)| *p))
        .expect("distribution has positive mass");
    dist[index.sample(rng)].0
}

/// `cfg.replicates` stitched sequences for `target`. The random stream is
/// selected by `cfg.seed` and the target's id.
pub fn sample_stitched(
    target: &EventSequence,
    pool: &[EventSequence],
    cfg: &StitchConfig,
) -> Result<Vec<StitchedSequence>> {
    cfg.validate()?;
    let mut rng = stream(cfg.seed, stable_hash(&target.id));
    let mut out = Vec::with_capacity(cfg.replicates);
    for u in 0..cfg.replicates {
        let mut chain = std::collections::VecDeque::from([target.clone()]);
        let mut used: HashSet<&str> = HashSet::from([target.id.as_str()]);
        let mut raw_weight = 1.0;

        for _ in 0..cfg.depth {
            let anchor = chain.front().expect("chain is never empty");
            let dist = normalized(raw_weights(anchor, pool, cfg, &used, true)?);
            if dist.is_empty() {
                break;
            }
            let k = pick(&mut rng, &dist);
            raw_weight *= similarity(&pool[k], anchor, cfg)?;
            let keep_pred = rng.random_bool(0.5);
            let (pred, anchor) = resolve_overlap_with(&pool[k], anchor, keep_pred)
                .expect("sampled candidates are never nested");
            chain[0] = anchor;
            chain.push_front(pred);
            used.insert(pool[k].id.as_str());
        }
        for _ in 0..cfg.depth {
            let anchor = chain.back().expect("chain is never empty");
            let dist = normalized(raw_weights(anchor, pool, cfg, &used, false)?);
            if dist.is_empty() {
                break;
            }
            let k = pick(&mut rng, &dist);
            raw_weight *= similarity(anchor, &pool[k], cfg)?;
            let keep_pred = rng.random_bool(0.5);
            let (anchor, succ) = resolve_overlap_with(anchor, &pool[k], keep_pred)
                .expect("sampled candidates are never nested");
            let last = chain.len() - 1;
            chain[last] = anchor;
            chain.push_back(succ);
            used.insert(pool[k].id.as_str());
        }

        let segments: Vec<EventSequence> = chain.into();
        let sequence = EventSequence::concat(
            format!("{}~{u}", target.id),
            Some(target.id.clone()),
            target.feature.clone(),
            &segments,
        )?;
        out.push(StitchedSequence {
            sequence,
            raw_weight,
            weight: 0.0,
            segments: segments.into_iter().map(|s| s.id).collect(),
        });
    }

    let total: f64 = out.iter().map(|s| s.raw_weight).sum();
    let uniform = 1.0 / out.len() as f64;
    for s in &mut out {
        s.weight = if total > 0.0 && total.is_finite() {
            s.raw_weight / total
        } else {
            uniform
        };
    }
    Ok(out)
}

/// Stitched training set: every pool sequence is an origin.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchedDataset {
    pub sequences: Vec<EventSequence>,
    /// Per-sequence weights; they sum to one within each origin.
    pub weights: Vec<f64>,
    pub raw_weights: Vec<f64>,
    /// Index into the source pool of each sequence's origin.
    pub origins: Vec<usize>,
    pub segments: Vec<Vec<String>>,
}

impl StitchedDataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

/// Run [`sample_stitched`] for every sequence of `pool`, in parallel,
/// collecting results in pool order.
pub fn stitch_dataset(pool: &[EventSequence], cfg: &StitchConfig) -> Result<StitchedDataset> {
    cfg.validate()?;
    let per_origin: Vec<Vec<StitchedSequence>> = pool
        .par_iter()
        .map(|target| sample_stitched(target, pool, cfg))
        .collect::<Result<_>>()?;
    let mut data = StitchedDataset {
        sequences: Vec::new(),
        weights: Vec::new(),
        raw_weights: Vec::new(),
        origins: Vec::new(),
        segments: Vec::new(),
    };
    for (origin, group) in per_origin.into_iter().enumerate() {
        for s in group {
            data.sequences.push(s.sequence);
            data.weights.push(s.weight);
            data.raw_weights.push(s.raw_weight);
            data.origins.push(origin);
            data.segments.push(s.segments);
        }
    }
    Ok(data)
}
