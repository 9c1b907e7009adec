//! NEAT: evolving weights and topology of feed-forward controllers.

mod car;
mod evolution;
mod genome;
mod innovation;
mod network;
mod species;

pub use car::{evaluate_fitness, CarEvaluator, FitnessConfig};
pub use evolution::{evolve, Evaluator, EvolutionResult, GenerationStats};
pub use genome::{compatibility_distance, crossover, ConnectionGene, Genome, MutationLog, NodeGene, NodeKind};
pub use innovation::InnovationRegistry;
pub use network::{action_from_outputs, FeedForward};
pub use species::{allocate_offspring, reproduce, speciate, Species};

use crate::error::{Error, Result};

/// Upper bound on `generations` accepted from configuration files.
pub const MAX_GENERATIONS: u32 = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct EvoConfig {
    pub num_inputs: usize,
    pub num_outputs: usize,
    pub population: usize,
    pub generations: u32,
    pub elitism: usize,
    pub survival_threshold: f64,
    pub conn_add_prob: f64,
    pub conn_delete_prob: f64,
    pub node_add_prob: f64,
    pub node_delete_prob: f64,
    pub weight_mutate_rate: f64,
    pub bias_mutate_rate: f64,
    pub weight_perturb_sigma: f64,
    pub weight_replace_prob: f64,
    pub weight_replace_range: f64,
    pub weight_limit: f64,
    pub reenable_prob: f64,
    pub compat_threshold: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub max_stagnation: u32,
    /// Stop early once the best fitness reaches this value.
    pub fitness_threshold: Option<f64>,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            num_inputs: 5,
            num_outputs: 4,
            population: 30,
            generations: 20,
            elitism: 3,
            survival_threshold: 0.2,
            conn_add_prob: 0.5,
            conn_delete_prob: 0.5,
            node_add_prob: 0.2,
            node_delete_prob: 0.2,
            weight_mutate_rate: 0.8,
            bias_mutate_rate: 0.7,
            weight_perturb_sigma: 0.5,
            weight_replace_prob: 0.1,
            weight_replace_range: 2.0,
            weight_limit: 30.0,
            reenable_prob: 0.25,
            compat_threshold: 2.0,
            c1: 1.0,
            c2: 1.0,
            c3: 0.4,
            max_stagnation: 15,
            fitness_threshold: None,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("neat.survival_threshold", self.survival_threshold),
            ("neat.conn_add_prob", self.conn_add_prob),
            ("neat.conn_delete_prob", self.conn_delete_prob),
            ("neat.node_add_prob", self.node_add_prob),
            ("neat.node_delete_prob", self.node_delete_prob),
            ("neat.weight_mutate_rate", self.weight_mutate_rate),
            ("neat.bias_mutate_rate", self.bias_mutate_rate),
            ("neat.weight_replace_prob", self.weight_replace_prob),
            ("neat.reenable_prob", self.reenable_prob),
        ];
        for (key, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(key, format!("{p} is not a probability")));
            }
        }
        if self.num_inputs == 0 || self.num_outputs == 0 {
            return Err(Error::invalid("networks need at least one input and one output"));
        }
        if self.population == 0 {
            return Err(Error::config("neat.population", "must be positive"));
        }
        if self.elitism >= self.population {
            return Err(Error::config("neat.elitism", "must be smaller than the population"));
        }
        if !(self.compat_threshold > 0.0) {
            return Err(Error::config("neat.compat_threshold", "must be positive"));
        }
        if !(self.weight_perturb_sigma >= 0.0) || !(self.weight_limit > 0.0) {
            return Err(Error::config("neat.weight_perturb_sigma", "invalid weight mutation scale"));
        }
        Ok(())
    }
}
