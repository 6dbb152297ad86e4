//! Basis functions for time-varying infectivity.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sequence::ObservationWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// A single basis function `κ(t) ≡ 1`: the time-invariant model.
    Constant,
    /// `κ_m(t) = exp(-(t - t_m)² / σ)`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    kind: BasisKind,
    centers: Vec<f64>,
    /// Bandwidth σ, in squared time units.
    bandwidth: f64,
}

impl BasisConfig {
    pub fn constant() -> Self {
        Self {
            kind: BasisKind::Constant,
            centers: vec![0.0],
            bandwidth: 1.0,
        }
    }

    pub fn gaussian(centers: Vec<f64>, bandwidth: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(invalid("gaussian basis needs at least one center"));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(invalid("basis centers must be finite"));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("basis bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self {
            kind: BasisKind::Gaussian,
            centers,
            bandwidth,
        })
    }

    /// `count` centers equally spaced over `window`, endpoints included.
    /// The bandwidth defaults to the squared spacing.
    pub fn gaussian_uniform(window: ObservationWindow, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(invalid("basis count must be at least 1"));
        }
        if count == 1 {
            let len = window.length().max(f64::MIN_POSITIVE);
            return Self::gaussian(vec![0.5 * (window.begin + window.end)], len * len);
        }
        let spacing = window.length() / (count - 1) as f64;
        let centers = (0..count)
            .map(|k| window.begin + spacing * k as f64)
            .collect();
        Self::gaussian(centers, spacing * spacing)
    }

    pub fn with_bandwidth(self, bandwidth: f64) -> Result<Self> {
        match self.kind {
            BasisKind::Constant => Ok(self),
            BasisKind::Gaussian => Self::gaussian(self.centers, bandwidth),
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Number of basis functions M.
    pub fn len(&self) -> usize {
        match self.kind {
            BasisKind::Constant => 1,
            BasisKind::Gaussian => self.centers.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `κ_m(t)`, with `m` zero-based.
    pub fn eval(&self, m: usize, t: f64) -> Result<f64> {
        if m >= self.len() {
            return Err(Error::IndexOutOfRange {
                what: "basis",
                index: m,
                len: self.len(),
            });
        }
        Ok(self.value(m, t))
    }

    #[inline]
    pub(crate) fn value(&self, m: usize, t: f64) -> f64 {
        match self.kind {
            BasisKind::Constant => 1.0,
            BasisKind::Gaussian => {
                let d = t - self.centers[m];
                (-d * d / self.bandwidth).exp()
            }
        }
    }

    /// All M basis values at `t`, written into `out`.
    #[inline]
    pub(crate) fn values_into(&self, t: f64, out: &mut [f64]) {
        for (m, v) in out.iter_mut().enumerate() {
            *v = self.value(m, t);
        }
    }
}
