use proptest::prelude::*;

use pfnav::estimator::{systematic_indices, NoiseSpec, ParticleSet};
use pfnav::gridworld::{GridConfig, GridState, GridWorld};
use pfnav::harness::{sliding_window_avg, MetricsSeries};
use pfnav::neuroevolution::{
    compatibility_distance, crossover, reproduce, speciate, EvoConfig, Genome, InnovationRegistry,
};
use pfnav::qlearn::{update, LearnConfig, QTable};
use pfnav::seeding::rng_for;
use rand::Rng;

fn weights(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..10.0, 1..max_len).prop_filter("positive mass", |w| {
        w.iter().sum::<f64>() > 1e-6
    })
}

/// A genome after `steps` random mutations sharing `registry`.
fn evolved_genome(seed: u64, steps: usize, registry: &mut InnovationRegistry) -> Genome {
    let cfg = EvoConfig::default();
    let mut rng = rng_for(&[seed]);
    let mut g = Genome::initial(&cfg, registry, &mut rng);
    for _ in 0..steps {
        g.mutate(registry, &cfg, &mut rng);
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_stay_normalized(
        states in prop::collection::vec(-5.0f64..5.0, 2..200),
        z in -5.0f64..5.0,
        sigma in 0.01f64..3.0,
    ) {
        let n = states.len();
        let mut set = ParticleSet::from_parts(1, states, vec![1.0; n]).unwrap();
        let noise = NoiseSpec::isotropic(1, sigma, 0.0).unwrap();
        set.update_weights(&[z], &noise).unwrap();
        let sum: f64 = set.weights().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(set.weights().iter().all(|w| *w >= 0.0));
        let ess = set.effective_sample_size();
        prop_assert!(ess >= 1.0 - 1e-9 && ess <= n as f64 + 1e-9);
    }

    #[test]
    fn resampling_conserves_count_and_tracks_weights(w in weights(60), u in 0.0f64..1.0) {
        let n = w.len();
        let total: f64 = w.iter().sum();
        let norm: Vec<f64> = w.iter().map(|x| x / total).collect();
        let idx = systematic_indices(&norm, u);
        prop_assert_eq!(idx.len(), n);
        prop_assert!(idx.windows(2).all(|p| p[0] <= p[1]));
        let mut counts = vec![0usize; n];
        for i in idx {
            counts[i] += 1;
        }
        for (c, wi) in counts.iter().zip(&norm) {
            let expect = wi * n as f64;
            prop_assert!((*c as f64) >= expect.floor() - 1.0 && (*c as f64) <= expect.ceil() + 1.0);
        }

        let states: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut set = ParticleSet::from_parts(1, states, w.clone()).unwrap();
        set.resample_with_offset(u);
        prop_assert_eq!(set.len(), n);
        prop_assert!(set.weights().iter().all(|x| (x - 1.0 / n as f64).abs() < 1e-12));
    }

    #[test]
    fn distance_is_symmetric(a in 0u64..1000, b in 0u64..1000, steps in 0usize..25) {
        let cfg = EvoConfig::default();
        let mut reg = InnovationRegistry::new(9);
        let g1 = evolved_genome(a, steps, &mut reg);
        let g2 = evolved_genome(b, steps, &mut reg);
        let d12 = compatibility_distance(&g1, &g2, &cfg);
        let d21 = compatibility_distance(&g2, &g1, &cfg);
        prop_assert_eq!(d12, d21);
        prop_assert!(d12 >= 0.0);
        prop_assert_eq!(compatibility_distance(&g1, &g1, &cfg), 0.0);
    }

    #[test]
    fn mutation_and_crossover_stay_feed_forward(a in 0u64..1000, b in 0u64..1000, steps in 0usize..40) {
        let cfg = EvoConfig::default();
        let mut reg = InnovationRegistry::new(9);
        let g1 = evolved_genome(a, steps, &mut reg);
        let g2 = evolved_genome(b, steps, &mut reg);
        prop_assert!(g1.is_well_formed());
        prop_assert!(g2.is_well_formed());
        let child = crossover(&g1, &g2, &cfg, &mut rng_for(&[a, b]));
        prop_assert!(child.is_well_formed());
    }

    #[test]
    fn disabled_gene_equals_zero_weight(seed in 0u64..1000, steps in 0usize..30, pick in 0usize..1000) {
        let mut reg = InnovationRegistry::new(9);
        let g = evolved_genome(seed, steps, &mut reg);
        prop_assume!(!g.connections.is_empty());
        let k = pick % g.connections.len();
        let mut off = g.clone();
        off.connections[k].enabled = false;
        let mut zero = g.clone();
        if zero.connections[k].enabled {
            zero.connections[k].weight = 0.0;
        }
        let mut rng = rng_for(&[seed, 1]);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
        prop_assert_eq!(off.activate(&x).unwrap(), zero.activate(&x).unwrap());
    }

    #[test]
    fn reproduce_keeps_population_size(seed in 0u64..500, steps in 0usize..10) {
        let cfg = EvoConfig::default();
        let mut reg = InnovationRegistry::new(9);
        let mut rng = rng_for(&[seed, 2]);
        let pop: Vec<Genome> = (0..cfg.population)
            .map(|i| {
                let mut g = evolved_genome(seed * 100 + i as u64, steps, &mut reg);
                g.fitness = Some(rng.random_range(0.0..100.0));
                g
            })
            .collect();
        let mut species = speciate(pop, &[], &cfg);
        let next = reproduce(&mut species, &mut reg, &cfg, &mut rng).unwrap();
        prop_assert_eq!(next.len(), 30);
        prop_assert!(next.iter().all(Genome::is_well_formed));
        prop_assert!(next[..3].iter().all(|g| g.fitness.is_some()));
    }

    #[test]
    fn discretize_is_idempotent(x in -1.0f64..13.0, y in -1.0f64..13.0) {
        let world = GridWorld::new(GridConfig::default());
        let cell = world.discretize(&GridState::new(x, y));
        prop_assert!(cell.0 < 51 && cell.1 < 51);
        prop_assert_eq!(world.discretize(&world.cell_center(cell)), cell);
    }

    #[test]
    fn q_update_touches_one_entry(
        cell in (0usize..51, 0usize..51),
        next in (0usize..51, 0usize..51),
        a in 0usize..24,
        r in -100.0f64..100.0,
        terminal in any::<bool>(),
    ) {
        let mut rng = rng_for(&[cell.0 as u64, cell.1 as u64, a as u64]);
        let mut q = QTable::new(51, 24);
        let mut before = QTable::new(51, 24);
        for c in 0..51 {
            for d in 0..51 {
                for k in 0..24 {
                    let v = rng.random_range(-1.0..1.0);
                    q.row_mut((c, d))[k] = v;
                    before.row_mut((c, d))[k] = v;
                }
            }
        }
        update(&mut q, cell, a, r, next, terminal, &LearnConfig::default());
        let changed: Vec<usize> = q
            .values()
            .iter()
            .zip(before.values())
            .enumerate()
            .filter(|(_, (x, y))| x != y)
            .map(|(i, _)| i)
            .collect();
        prop_assert!(changed.len() <= 1);
        if let Some(&i) = changed.first() {
            prop_assert_eq!(i, (cell.0 * 51 + cell.1) * 24 + a);
        }
    }

    #[test]
    fn smoothing_matches_direct_mean(v in prop::collection::vec(-1e4f64..1e4, 1..300), window in 1usize..80) {
        let out = sliding_window_avg(&MetricsSeries::new(v.clone()).unwrap(), window).unwrap();
        prop_assert_eq!(out.len(), v.len());
        for k in 0..v.len() {
            let lo = (k + 1).saturating_sub(window);
            let direct = v[lo..=k].iter().sum::<f64>() / (k + 1 - lo) as f64;
            prop_assert!((out.values()[k] - direct).abs() < 1e-6);
        }
    }
}
