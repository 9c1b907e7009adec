use super::genome::Genome;
use super::innovation::InnovationRegistry;
use super::species::{reproduce, speciate, Species};
use super::EvoConfig;
use crate::error::Result;
use crate::par;
use crate::seeding::{rng_for, stream};

/// Scores one genome. `generation` and `index` identify the evaluation so
/// implementations can derive their own random streams.
pub trait Evaluator: Sync {
    fn evaluate(&self, genome: &Genome, generation: u32, index: usize) -> Result<f64>;
}

impl<F> Evaluator for F
where
    F: Fn(&Genome, u32, usize) -> Result<f64> + Sync,
{
    fn evaluate(&self, genome: &Genome, generation: u32, index: usize) -> Result<f64> {
        self(genome, generation, index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: u32,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub species_count: usize,
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub stats: Vec<GenerationStats>,
    pub champion: Genome,
}

/// Runs evaluate, speciate, reproduce for `cfg.generations` generations.
///
/// Genomes that already carry a fitness (the elites) are not re-evaluated,
/// so the per-generation best never decreases. All structural randomness
/// comes from one stream keyed by `seed`.
pub fn evolve<E: Evaluator>(evaluator: &E, cfg: &EvoConfig, seed: u64) -> Result<EvolutionResult> {
    cfg.validate()?;
    let mut rng = rng_for(&[seed, stream::EVOLUTION]);
    let mut registry = InnovationRegistry::new((cfg.num_inputs + cfg.num_outputs) as u32);
    let mut population: Vec<Genome> = (0..cfg.population)
        .map(|_| Genome::initial(cfg, &mut registry, &mut rng))
        .collect();
    let mut species: Vec<Species> = Vec::new();
    let mut stats = Vec::with_capacity(cfg.generations as usize);
    let mut champion: Option<Genome> = None;

    let generations = cfg.generations.max(1);
    for generation in 0..generations {
        evaluate_population(evaluator, &mut population, generation)?;
        let best = population
            .iter()
            .fold(None::<&Genome>, |acc, g| match acc {
                Some(b) if b.fitness >= g.fitness => Some(b),
                _ => Some(g),
            })
            .expect("population is non-empty");
        if champion.as_ref().is_none_or(|c| best.fitness > c.fitness) {
            champion = Some(best.clone());
        }
        if cfg.generations == 0 {
            break;
        }
        let best_fitness = best.fitness.unwrap_or(f64::NEG_INFINITY);
        let mean_fitness =
            population.iter().filter_map(|g| g.fitness).sum::<f64>() / population.len() as f64;

        species = speciate(population, &species, cfg);
        stats.push(GenerationStats {
            generation,
            best_fitness,
            mean_fitness,
            species_count: species.len(),
        });
        let solved = cfg.fitness_threshold.is_some_and(|t| best_fitness >= t);
        if solved || generation + 1 == generations {
            break;
        }
        population = reproduce(&mut species, &mut registry, cfg, &mut rng)?;
    }

    Ok(EvolutionResult {
        stats,
        champion: champion.expect("at least one generation evaluated"),
    })
}

fn evaluate_population<E: Evaluator>(
    evaluator: &E,
    population: &mut [Genome],
    generation: u32,
) -> Result<()> {
    let pending: Vec<usize> = (0..population.len())
        .filter(|&i| population[i].fitness.is_none())
        .collect();
    let pop: &[Genome] = population;
    let scores = par::map(&pending, |&i| evaluator.evaluate(&pop[i], generation, i));
    for (i, score) in pending.into_iter().zip(scores) {
        population[i].fitness = Some(score?);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_of_weights(g: &Genome, _: u32, _: usize) -> Result<f64> {
        Ok(g.connections.iter().filter(|c| c.enabled).map(|c| c.weight).sum())
    }

    #[test]
    fn zero_generations_returns_initial_best() {
        let cfg = EvoConfig {
            generations: 0,
            ..EvoConfig::default()
        };
        let out = evolve(&sum_of_weights, &cfg, 3).unwrap();
        assert!(out.stats.is_empty());
        let mut rng = rng_for(&[3, stream::EVOLUTION]);
        let mut reg = InnovationRegistry::new(9);
        let best = (0..30)
            .map(|_| sum_of_weights(&Genome::initial(&cfg, &mut reg, &mut rng), 0, 0).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.champion.fitness, Some(best));
    }

    #[test]
    fn best_is_monotone_and_runs_are_repeatable() {
        let cfg = EvoConfig {
            generations: 15,
            ..EvoConfig::default()
        };
        let a = evolve(&sum_of_weights, &cfg, 11).unwrap();
        let b = evolve(&sum_of_weights, &cfg, 11).unwrap();
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.stats.len(), 15);
        for w in a.stats.windows(2) {
            assert!(w[1].best_fitness >= w[0].best_fitness);
        }
        assert!(a.stats[14].best_fitness > a.stats[0].best_fitness);
        assert!(a.champion.is_well_formed());
    }

    #[test]
    fn threshold_stops_early() {
        let cfg = EvoConfig {
            generations: 30,
            fitness_threshold: Some(f64::NEG_INFINITY),
            ..EvoConfig::default()
        };
        assert_eq!(evolve(&sum_of_weights, &cfg, 1).unwrap().stats.len(), 1);
    }
}
