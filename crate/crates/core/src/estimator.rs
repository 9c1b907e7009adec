//! Bootstrap particle filter.
//!
//! A [`ParticleSet`] is a plain value holding `N` weighted state vectors of a
//! fixed dimension. The four filter stages (prior sampling, prediction through
//! a transition model, Gaussian reweighting, systematic resampling) are
//! exposed individually, and [`ParticleFilter`] strings them together with an
//! owned RNG and an ESS-based resampling trigger.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Unnormalised weight mass below which the likelihood is treated as underflowed.
pub const UNDERFLOW_MASS: f64 = 1e-300;

/// Per-component standard deviations of the observation and process noise.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    observation_sigma: Vec<f64>,
    process_sigma: Vec<f64>,
}

impl NoiseSpec {
    pub fn new(observation_sigma: Vec<f64>, process_sigma: Vec<f64>) -> Result<Self> {
        if observation_sigma.len() != process_sigma.len() {
            return Err(Error::invalid(format!(
                "noise dimensions differ: observation {} vs process {}",
                observation_sigma.len(),
                process_sigma.len()
            )));
        }
        if observation_sigma
            .iter()
            .chain(&process_sigma)
            .any(|s| !s.is_finite() || *s < 0.0)
        {
            return Err(Error::invalid("noise standard deviations must be finite and >= 0"));
        }
        Ok(NoiseSpec {
            observation_sigma,
            process_sigma,
        })
    }

    /// Same sigma on every axis (`sigma^2 I`).
    pub fn isotropic(dim: usize, observation_sigma: f64, process_sigma: f64) -> Result<Self> {
        Self::new(vec![observation_sigma; dim], vec![process_sigma; dim])
    }

    pub fn dim(&self) -> usize {
        self.observation_sigma.len()
    }

    pub fn observation_sigma(&self) -> &[f64] {
        &self.observation_sigma
    }

    pub fn process_sigma(&self) -> &[f64] {
        &self.process_sigma
    }
}

/// Deterministic state transition `f(state, action)`, applied in place.
pub trait TransitionModel<A: ?Sized> {
    fn transition(&self, state: &mut [f64], action: &A);
}

impl<A: ?Sized, F> TransitionModel<A> for F
where
    F: Fn(&mut [f64], &A),
{
    fn transition(&self, state: &mut [f64], action: &A) {
        self(state, action)
    }
}

/// `f(s, a) = s`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl<A: ?Sized> TransitionModel<A> for Identity {
    fn transition(&self, _state: &mut [f64], _action: &A) {}
}

/// Result of a reweighting pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightUpdate {
    Normalized,
    /// Every likelihood factor underflowed; weights were reset to uniform.
    UnderflowReset,
}

/// Weighted ensemble of `N` state vectors stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    dim: usize,
    states: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleSet {
    /// Draws `n` particles from `prior`, each with weight `1/n`.
    ///
    /// `prior` fills one state slice of length `dim` per call.
    pub fn init<R, P>(n: usize, dim: usize, rng: &mut R, mut prior: P) -> Result<Self>
    where
        R: Rng + ?Sized,
        P: FnMut(&mut R, &mut [f64]),
    {
        if n == 0 {
            return Err(Error::invalid("particle count must be at least 1"));
        }
        if dim == 0 {
            return Err(Error::invalid("state dimension must be at least 1"));
        }
        let mut states = vec![0.0; n * dim];
        for particle in states.chunks_exact_mut(dim) {
            prior(rng, particle);
        }
        Ok(ParticleSet {
            dim,
            states,
            weights: vec![1.0 / n as f64; n],
        })
    }

    /// Builds a set from explicit states and weights. Weights are normalised.
    pub fn from_parts(dim: usize, states: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || weights.is_empty() || states.len() != weights.len() * dim {
            return Err(Error::invalid(format!(
                "inconsistent particle set: dim {dim}, {} state values, {} weights",
                states.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let mut set = ParticleSet {
            dim,
            states,
            weights,
        };
        set.normalize();
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn particles_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.states.chunks_exact_mut(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Maps every particle through `model` and adds Gaussian process noise.
    /// Weights are untouched.
    pub fn predict<A, M, R>(&mut self, action: &A, model: &M, noise: &NoiseSpec, rng: &mut R)
    where
        A: ?Sized,
        M: TransitionModel<A> + ?Sized,
        R: Rng + ?Sized,
    {
        assert_eq!(noise.dim(), self.dim, "noise dimension mismatch");
        let sigma = noise.process_sigma();
        let noisy = sigma.iter().any(|&s| s > 0.0);
        for particle in self.states.chunks_exact_mut(self.dim) {
            model.transition(particle, action);
            if noisy {
                for (x, &s) in particle.iter_mut().zip(sigma) {
                    if s > 0.0 {
                        let n: f64 = rng.sample(StandardNormal);
                        *x += s * n;
                    }
                }
            }
        }
    }

    /// Multiplies each weight by `exp(-sum_k (z_k - s_k)^2 / (2 sigma_k^2))` and
    /// renormalises. Falls back to uniform weights if every factor underflows.
    pub fn update_weights(&mut self, z: &[f64], noise: &NoiseSpec) -> Result<WeightUpdate> {
        if z.len() != self.dim || noise.dim() != self.dim {
            return Err(Error::invalid(format!(
                "observation has dimension {}, particles {}, noise {}",
                z.len(),
                self.dim,
                noise.dim()
            )));
        }
        let sigma = noise.observation_sigma();
        if sigma.iter().any(|&s| s <= 0.0) {
            return Err(Error::invalid("observation sigma must be strictly positive"));
        }
        let inv_two_var: Vec<f64> = sigma.iter().map(|s| 0.5 / (s * s)).collect();

        let mut total = 0.0;
        for (w, particle) in self.weights.iter_mut().zip(self.states.chunks_exact(self.dim)) {
            *w *= likelihood_factor(particle, z, &inv_two_var);
            total += *w;
        }

        if !(total >= UNDERFLOW_MASS) {
            self.reset_uniform();
            return Ok(WeightUpdate::UnderflowReset);
        }
        let inv = 1.0 / total;
        self.weights.iter_mut().for_each(|w| *w *= inv);
        Ok(WeightUpdate::Normalized)
    }

    /// `1 / sum w_i^2`.
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Systematic resampling with a single uniform offset drawn from `rng`.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let u: f64 = rng.random();
        self.resample_with_offset(u);
    }

    /// Systematic resampling with explicit offset `u` in `[0, 1)`; the `k`-th
    /// draw lands at `(u + k) / N` on the cumulative weight axis.
    pub fn resample_with_offset(&mut self, u: f64) {
        let idx = systematic_indices(&self.weights, u);
        let mut states = Vec::with_capacity(self.states.len());
        for i in idx {
            states.extend_from_slice(self.particle(i));
        }
        self.states = states;
        self.reset_uniform();
    }

    /// Weighted mean of the particle states.
    pub fn estimate(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for (w, particle) in self.weights.iter().zip(self.states.chunks_exact(self.dim)) {
            for (m, x) in mean.iter_mut().zip(particle) {
                *m += w * x;
            }
        }
        mean
    }

    fn normalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        if total >= UNDERFLOW_MASS {
            self.weights.iter_mut().for_each(|w| *w /= total);
        } else {
            self.reset_uniform();
        }
    }

    fn reset_uniform(&mut self) {
        let w = 1.0 / self.weights.len() as f64;
        self.weights.iter_mut().for_each(|x| *x = w);
    }
}

/// Unnormalised Gaussian likelihood factor of one particle.
#[inline]
pub fn likelihood_factor(particle: &[f64], z: &[f64], inv_two_var: &[f64]) -> f64 {
    let mut e = 0.0;
    for ((s, z), k) in particle.iter().zip(z).zip(inv_two_var) {
        let d = z - s;
        e += d * d * k;
    }
    (-e).exp()
}

/// Ancestor indices chosen by systematic resampling of normalised `weights`.
pub fn systematic_indices(weights: &[f64], u: f64) -> Vec<usize> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut cumulative = weights[0];
    for k in 0..n {
        let target = (u + k as f64) * step;
        while target > cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}

/// A particle set bundled with its transition model, noise and RNG.
#[derive(Clone, Debug)]
pub struct ParticleFilter<M> {
    set: ParticleSet,
    model: M,
    noise: NoiseSpec,
    rng: ChaCha8Rng,
    /// Resample when ESS drops below this fraction of N.
    resample_fraction: f64,
    underflow_resets: u64,
    resamples: u64,
}

impl<M> ParticleFilter<M> {
    pub fn new(set: ParticleSet, model: M, noise: NoiseSpec, rng: ChaCha8Rng) -> Result<Self> {
        if noise.dim() != set.dim() {
            return Err(Error::invalid(format!(
                "noise dimension {} does not match state dimension {}",
                noise.dim(),
                set.dim()
            )));
        }
        Ok(ParticleFilter {
            set,
            model,
            noise,
            rng,
            resample_fraction: 0.5,
            underflow_resets: 0,
            resamples: 0,
        })
    }

    pub fn with_resample_fraction(mut self, fraction: f64) -> Self {
        self.resample_fraction = fraction;
        self
    }

    /// One predict/update/resample cycle. Returns the weighted-mean estimate,
    /// taken after reweighting and before any resampling.
    pub fn step<A: ?Sized>(&mut self, action: &A, z: &[f64]) -> Result<Vec<f64>>
    where
        M: TransitionModel<A>,
    {
        self.set
            .predict(action, &self.model, &self.noise, &mut self.rng);
        self.correct(z)
    }

    /// Update and (conditionally) resample without a prediction step.
    pub fn correct(&mut self, z: &[f64]) -> Result<Vec<f64>> {
        if self.set.update_weights(z, &self.noise)? == WeightUpdate::UnderflowReset {
            self.underflow_resets += 1;
        }
        let estimate = self.set.estimate();
        if self.set.effective_sample_size() < self.resample_fraction * self.set.len() as f64 {
            self.set.resample(&mut self.rng);
            self.resamples += 1;
        }
        Ok(estimate)
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.set
    }

    pub fn particles_mut(&mut self) -> &mut ParticleSet {
        &mut self.set
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn estimate(&self) -> Vec<f64> {
        self.set.estimate()
    }

    /// Number of times every likelihood factor underflowed.
    pub fn underflow_resets(&self) -> u64 {
        self.underflow_resets
    }

    pub fn resamples(&self) -> u64 {
        self.resamples
    }
}
