//! The basis-expanded Hawkes model and the excitation interface shared with
//! analytic ground truths.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisConfig, BasisKind};
use crate::error::{invalid, Error, Result};
use crate::likelihood::g_integral_unchecked;

/// Dense `C × C × M` tensor indexed as `[c][c'][m]`: the influence of type
/// `c'` events on type `c` through basis function `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectivityTensor {
    types: usize,
    basis: usize,
    data: Vec<f64>,
}

impl InfectivityTensor {
    pub fn zeros(types: usize, basis: usize) -> Self {
        Self {
            types,
            basis,
            data: vec![0.0; types * types * basis],
        }
    }

    pub fn from_vec(types: usize, basis: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != types * types * basis {
            return Err(invalid(format!(
                "tensor of shape {types}x{types}x{basis} needs {} values, got {}",
                types * types * basis,
                data.len()
            )));
        }
        Ok(Self { types, basis, data })
    }

    pub fn from_fn(types: usize, basis: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(types, basis);
        for c in 0..types {
            for d in 0..types {
                for m in 0..basis {
                    t.data[(c * types + d) * basis + m] = f(c, d, m);
                }
            }
        }
        t
    }

    #[inline]
    pub fn types(&self) -> usize {
        self.types
    }

    #[inline]
    pub fn basis_len(&self) -> usize {
        self.basis
    }

    #[inline]
    fn offset(&self, c: usize, d: usize, m: usize) -> usize {
        (c * self.types + d) * self.basis + m
    }

    #[inline]
    pub fn get(&self, c: usize, d: usize, m: usize) -> f64 {
        self.data[self.offset(c, d, m)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, d: usize, m: usize, v: f64) {
        let o = self.offset(c, d, m);
        self.data[o] = v;
    }

    /// The `M` coefficients of the `(c, c')` pair.
    #[inline]
    pub fn pair(&self, c: usize, d: usize) -> &[f64] {
        let o = self.offset(c, d, 0);
        &self.data[o..o + self.basis]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            types: self.types,
            basis: self.basis,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise combination of two same-shaped tensors.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.data.len(), other.data.len(), "tensor shape mismatch");
        Self {
            types: self.types,
            basis: self.basis,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// A multivariate Hawkes process with exponential triggering kernel
/// `g(t) = exp(-βt)` and basis-expanded infectivity
/// `ψ_{cc'}(t) = Σ_m a_{cc'm} κ_m(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkesModel {
    mu: Vec<f64>,
    coeffs: InfectivityTensor,
    basis: BasisConfig,
    beta: f64,
}

impl HawkesModel {
    pub fn new(
        mu: Vec<f64>,
        coeffs: InfectivityTensor,
        basis: BasisConfig,
        beta: f64,
    ) -> Result<Self> {
        let c = mu.len();
        if c == 0 {
            return Err(invalid("a model needs at least one event type"));
        }
        if coeffs.types() != c || coeffs.basis_len() != basis.len() {
            return Err(invalid(format!(
                "coefficient tensor is {}x{}x{}, expected {c}x{c}x{}",
                coeffs.types(),
                coeffs.types(),
                coeffs.basis_len(),
                basis.len()
            )));
        }
        if mu.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(invalid("base rates must be finite and nonnegative"));
        }
        if coeffs.as_slice().iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(invalid("infectivity coefficients must be finite and nonnegative"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!("decay must be positive, got {beta}")));
        }
        Ok(Self {
            mu,
            coeffs,
            basis,
            beta,
        })
    }

    /// Pure Poisson model with no excitation.
    pub fn poisson(mu: Vec<f64>, basis: BasisConfig, beta: f64) -> Result<Self> {
        let coeffs = InfectivityTensor::zeros(mu.len(), basis.len());
        Self::new(mu, coeffs, basis, beta)
    }

    #[inline]
    pub fn n_types(&self) -> usize {
        self.mu.len()
    }

    #[inline]
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    #[inline]
    pub fn coeffs(&self) -> &InfectivityTensor {
        &self.coeffs
    }

    #[inline]
    pub fn basis(&self) -> &BasisConfig {
        &self.basis
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub(crate) fn check_type(&self, c: usize) -> Result<()> {
        if c >= self.n_types() {
            return Err(Error::IndexOutOfRange {
                what: "event type",
                index: c,
                len: self.n_types(),
            });
        }
        Ok(())
    }

    /// Parameter vector `Θ = (μ, A)` flattened in `[c][c'][m]` order.
    pub fn parameters(&self) -> Vec<f64> {
        let mut theta = self.mu.clone();
        theta.extend_from_slice(self.coeffs.as_slice());
        theta
    }
}

/// Anything that can drive a Hawkes-type intensity
/// `λ_c(t) = μ_c + Σ_{t_j<t} ψ_{c c_j}(t) exp(-β (t - t_j))`.
///
/// Implemented by fitted [`HawkesModel`]s and by analytic ground truths, so
/// the simulator and the time-rescaling check accept either.
pub trait Excitation: Sync {
    fn n_types(&self) -> usize;

    fn base_rate(&self, c: usize) -> f64;

    fn decay(&self) -> f64;

    /// `ψ_{cc'}(t)`; must be nonnegative.
    fn infectivity(&self, c: usize, source: usize, t: f64) -> f64;

    /// An upper bound of `ψ_{cc'}(t)` over all `t`.
    fn infectivity_bound(&self, c: usize, source: usize) -> f64;

    /// `∫_a^b ψ_{cc'}(s) exp(-β (s - a)) ds`.
    fn decayed_infectivity_integral(&self, c: usize, source: usize, a: f64, b: f64) -> f64 {
        let beta = self.decay();
        let rule = crate::quadrature::GaussLegendre::new(16);
        rule.integrate_composite(
            |s| self.infectivity(c, source, s) * (-beta * (s - a)).exp(),
            a,
            b,
            0.5,
        )
    }
}

impl Excitation for HawkesModel {
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
        self.coeffs
            .pair(c, source)
            .iter()
            .enumerate()
            .map(|(m, a)| a * self.basis.value(m, t))
            .sum()
    }

    fn infectivity_bound(&self, c: usize, source: usize) -> f64 {
        // every basis function is bounded by 1
        self.coeffs.pair(c, source).iter().sum()
    }

    fn decayed_infectivity_integral(&self, c: usize, source: usize, a: f64, b: f64) -> f64 {
        let pair = self.coeffs.pair(c, source);
        if self.basis.kind() == BasisKind::Constant {
            return pair[0] * g_integral_unchecked(&self.basis, 0, self.beta, a, a, b);
        }
        pair.iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(m, v)| v * g_integral_unchecked(&self.basis, m, self.beta, a, a, b))
            .sum()
    }
}
