use rand::seq::IndexedRandom;
use rand::Rng;

use super::genome::{compatibility_distance, crossover, Genome};
use super::innovation::InnovationRegistry;
use super::EvoConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Species {
    pub id: u64,
    pub representative: Genome,
    pub members: Vec<Genome>,
    /// Generations since `best_fitness` last improved.
    pub staleness: u32,
    pub best_fitness: f64,
}

impl Species {
    fn founded_by(id: u64, genome: &Genome) -> Self {
        Species {
            id,
            representative: genome.clone(),
            members: Vec::new(),
            staleness: 0,
            best_fitness: f64::NEG_INFINITY,
        }
    }

    pub fn mean_fitness(&self) -> f64 {
        if self.members.is_empty() {
            return 0.0;
        }
        self.members.iter().map(fitness_of).sum::<f64>() / self.members.len() as f64
    }

    pub fn max_fitness(&self) -> f64 {
        self.members
            .iter()
            .map(fitness_of)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn fitness_of(g: &Genome) -> f64 {
    g.fitness.unwrap_or(f64::NEG_INFINITY)
}

/// Assigns each genome to the first species (in order) whose representative
/// lies within the compatibility threshold, founding a new species
/// otherwise. Previous species keep their id and staleness; those left
/// without members are dropped.
pub fn speciate(population: Vec<Genome>, previous: &[Species], cfg: &EvoConfig) -> Vec<Species> {
    let mut species: Vec<Species> = previous
        .iter()
        .map(|s| Species {
            members: Vec::new(),
            ..s.clone()
        })
        .collect();
    let mut next_id = previous.iter().map(|s| s.id + 1).max().unwrap_or(0);
    for genome in population {
        let home = species.iter().position(|s| {
            compatibility_distance(&s.representative, &genome, cfg) <= cfg.compat_threshold
        });
        match home {
            Some(i) => species[i].members.push(genome),
            None => {
                let mut s = Species::founded_by(next_id, &genome);
                next_id += 1;
                s.members.push(genome);
                species.push(s);
            }
        }
    }
    species.retain(|s| !s.members.is_empty());
    species
}

/// Splits `total` slots proportionally to `weights` by largest remainder.
/// Negative weights are shifted so the smallest is zero; all-zero weights
/// share equally. Ties in remainders go to the lower index.
pub fn allocate_offspring(weights: &[f64], total: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    let shifted: Vec<f64> = weights.iter().map(|w| w + shift).collect();
    let sum: f64 = shifted.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        shifted.iter().map(|w| w / sum * total as f64).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Indices of the `k` fittest members of `population`, best first; ties keep
/// the earlier index.
fn top_indices(population: &[&Genome], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..population.len()).collect();
    idx.sort_by(|&a, &b| fitness_of(population[b]).total_cmp(&fitness_of(population[a])).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Produces the next population of exactly `cfg.population` genomes.
///
/// Updates staleness, drops stagnant species (never the one holding the
/// champion), copies the global elites unchanged, and fills the remaining
/// slots per species from the surviving parents. Afterwards every species
/// holds no members and a representative drawn from its old members.
pub fn reproduce<R: Rng + ?Sized>(
    species: &mut Vec<Species>,
    registry: &mut InnovationRegistry,
    cfg: &EvoConfig,
    rng: &mut R,
) -> Result<Vec<Genome>> {
    if species.iter().all(|s| s.members.is_empty()) {
        return Err(Error::invalid("cannot reproduce from empty species"));
    }
    species.retain(|s| !s.members.is_empty());

    for s in species.iter_mut() {
        let best = s.max_fitness();
        if best > s.best_fitness {
            s.best_fitness = best;
            s.staleness = 0;
        } else {
            s.staleness += 1;
        }
    }
    let champion_species = {
        let flat: Vec<(usize, &Genome)> = species
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.members.iter().map(move |g| (i, g)))
            .collect();
        let genomes: Vec<&Genome> = flat.iter().map(|(_, g)| *g).collect();
        flat[top_indices(&genomes, 1)[0]].0
    };
    let champion_id = species[champion_species].id;
    species.retain(|s| s.id == champion_id || s.staleness < cfg.max_stagnation);

    // Global elites, and how many of them each species contributes.
    let flat: Vec<(usize, &Genome)> = species
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.members.iter().map(move |g| (i, g)))
        .collect();
    let genomes: Vec<&Genome> = flat.iter().map(|(_, g)| *g).collect();
    let elite_idx = top_indices(&genomes, cfg.elitism);
    let mut next: Vec<Genome> = elite_idx.iter().map(|&i| genomes[i].clone()).collect();
    let mut elites_per_species = vec![0usize; species.len()];
    for &i in &elite_idx {
        elites_per_species[flat[i].0] += 1;
    }

    let means: Vec<f64> = species.iter().map(Species::mean_fitness).collect();
    let mut counts = allocate_offspring(&means, cfg.population);
    for (c, e) in counts.iter_mut().zip(&elites_per_species) {
        *c = c.saturating_sub(*e);
    }
    let target = cfg.population - next.len();
    rebalance(&mut counts, &means, target);

    for (s, &n) in species.iter().zip(&counts) {
        let members: Vec<&Genome> = s.members.iter().collect();
        let keep = ((cfg.survival_threshold * members.len() as f64).ceil() as usize).max(1);
        let parents: Vec<&Genome> = top_indices(&members, keep)
            .into_iter()
            .map(|i| members[i])
            .collect();
        for _ in 0..n {
            let a = *parents.choose(rng).expect("parents non-empty");
            let b = *parents.choose(rng).expect("parents non-empty");
            let mut child = if std::ptr::eq(a, b) {
                let mut c = a.clone();
                c.fitness = None;
                c
            } else if fitness_of(a) >= fitness_of(b) {
                crossover(a, b, cfg, rng)
            } else {
                crossover(b, a, cfg, rng)
            };
            child.mutate(registry, cfg, rng);
            next.push(child);
        }
    }
    debug_assert_eq!(next.len(), cfg.population);

    for s in species.iter_mut() {
        s.representative = s.members.choose(rng).expect("non-empty").clone();
        s.members.clear();
    }
    Ok(next)
}

/// Adjusts `counts` so they sum to `target`, taking from the largest
/// allocation and giving to the species with the highest mean.
fn rebalance(counts: &mut [usize], means: &[f64], target: usize) {
    loop {
        let sum: usize = counts.iter().sum();
        if sum == target {
            break;
        }
        if sum > target {
            let i = (0..counts.len()).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap();
            counts[i] -= 1;
        } else {
            let i = (0..means.len())
                .max_by(|&a, &b| means[a].total_cmp(&means[b]).then(b.cmp(&a)))
                .unwrap();
            counts[i] += 1;
        }
    }
}
