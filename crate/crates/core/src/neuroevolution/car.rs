use super::evolution::Evaluator;
use super::genome::Genome;
use super::network::action_from_outputs;
use crate::carworld::{rollout, CarConfig, Track};
use crate::error::Result;
use crate::qlearn::arm_tag;
use crate::seeding::{mix, rng_for, stream};

#[derive(Clone, Debug, PartialEq)]
pub struct FitnessConfig {
    /// Each step contributes `speed / speed_divisor`.
    pub speed_divisor: f64,
    pub checkpoint_bonus: f64,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        FitnessConfig {
            speed_divisor: 20.0,
            checkpoint_bonus: 50.0,
        }
    }
}

/// One rollout of `genome` on `track`. Sensor noise and filter particles are
/// drawn from streams keyed by `seed`.
pub fn evaluate_fitness(
    genome: &Genome,
    track: &Track,
    car: &CarConfig,
    fitness: &FitnessConfig,
    filter_enabled: bool,
    seed: u64,
) -> Result<f64> {
    let net = genome.network()?;
    let mut sensor_rng = rng_for(&[seed, stream::SENSOR]);
    let stats = rollout(
        track,
        car,
        filter_enabled,
        &mut sensor_rng,
        mix(&[seed, stream::FILTER]),
        |inputs| {
            let out = net.activate(inputs);
            Ok(action_from_outputs(&[out[0], out[1], out[2], out[3]]))
        },
    )?;
    Ok(stats.speed_sum / fitness.speed_divisor + fitness.checkpoint_bonus * stats.checkpoints as f64)
}

/// Evaluates genomes on a shared track; each (generation, index) pair gets
/// its own noise stream, separate per arm.
#[derive(Clone, Debug)]
pub struct CarEvaluator<'a> {
    pub track: &'a Track,
    pub car: CarConfig,
    pub fitness: FitnessConfig,
    pub filter_enabled: bool,
    pub seed: u64,
}

impl CarEvaluator<'_> {
    pub fn evaluation_seed(&self, generation: u32, index: usize) -> u64 {
        mix(&[
            self.seed,
            arm_tag(self.filter_enabled),
            generation as u64,
            index as u64,
        ])
    }
}

impl Evaluator for CarEvaluator<'_> {
    fn evaluate(&self, genome: &Genome, generation: u32, index: usize) -> Result<f64> {
        evaluate_fitness(
            genome,
            self.track,
            &self.car,
            &self.fitness,
            self.filter_enabled,
            self.evaluation_seed(generation, index),
        )
    }
}
