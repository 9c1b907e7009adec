#![allow(dead_code)]

use pfnav::neuroevolution::{evolve, EvoConfig, EvolutionResult, Genome};
use pfnav::Result;
use pfnav::estimator::{Identity, NoiseSpec, ParticleFilter, ParticleSet};
use pfnav::gridworld::{observe, GridConfig, GridState, GridWorld};
use pfnav::qlearn::GridKinematics;
use pfnav::seeding::rng_for;
use rand::Rng;
use rand_distr::StandardNormal;

pub const XOR_CASES: [([f64; 2], f64); 4] = [
    ([0.0, 0.0], 0.0),
    ([0.0, 1.0], 1.0),
    ([1.0, 0.0], 1.0),
    ([1.0, 1.0], 0.0),
];

/// Solved means every case lands within 0.3 of its target.
pub fn xor_solved(g: &Genome) -> bool {
    let net = g.network().expect("feed-forward genome");
    XOR_CASES
        .iter()
        .all(|(x, t)| (net.activate(x)[0] - t).abs() < 0.3)
}

/// `4 - squared error`, plus a bonus of 10 once solved so the run can stop
/// as soon as any genome meets the tolerance.
pub fn xor_fitness(g: &Genome, _: u32, _: usize) -> Result<f64> {
    let net = g.network()?;
    let sse: f64 = XOR_CASES
        .iter()
        .map(|(x, t)| (net.activate(x)[0] - t).powi(2))
        .sum();
    Ok(4.0 - sse + if xor_solved(g) { 10.0 } else { 0.0 })
}

/// Structural rates of the original NEAT XOR experiment.
pub fn xor_config() -> EvoConfig {
    EvoConfig {
        num_inputs: 2,
        num_outputs: 1,
        population: 150,
        generations: 100,
        elitism: 2,
        compat_threshold: 3.0,
        node_add_prob: 0.03,
        conn_add_prob: 0.05,
        node_delete_prob: 0.0,
        conn_delete_prob: 0.0,
        bias_mutate_rate: 0.1,
        fitness_threshold: Some(10.0),
        ..EvoConfig::default()
    }
}

pub fn run_xor(seed: u64) -> EvolutionResult {
    evolve(&xor_fitness, &xor_config(), seed).expect("xor run")
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// A 1-D Gaussian random walk starting at 0: returns (truth, observations).
pub fn random_walk(seed: u64, steps: usize, q_sigma: f64, r_sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_for(&[seed, 0xA11CE]);
    let mut x = 0.0;
    let mut truth = Vec::with_capacity(steps);
    let mut obs = Vec::with_capacity(steps);
    for _ in 0..steps {
        x += q_sigma * rng.sample::<f64, _>(StandardNormal);
        truth.push(x);
        obs.push(x + r_sigma * rng.sample::<f64, _>(StandardNormal));
    }
    (truth, obs)
}

/// Exact posterior mean for the random walk with a known start at 0.
pub fn kalman_1d(obs: &[f64], q_sigma: f64, r_sigma: f64) -> Vec<f64> {
    let (q, r) = (q_sigma * q_sigma, r_sigma * r_sigma);
    let (mut x, mut p) = (0.0, 0.0);
    obs.iter()
        .map(|&z| {
            p += q;
            let k = p / (p + r);
            x += k * (z - x);
            p *= 1.0 - k;
            x
        })
        .collect()
}

pub fn particle_filter_1d(obs: &[f64], n: usize, q_sigma: f64, r_sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(&[seed, 0xF117]);
    let set = ParticleSet::init(n, 1, &mut rng, |_, s| s[0] = 0.0).unwrap();
    let noise = NoiseSpec::isotropic(1, r_sigma, q_sigma).unwrap();
    let mut pf = ParticleFilter::new(set, Identity, noise, rng).unwrap();
    obs.iter().map(|&z| pf.step(&(), &[z]).unwrap()[0]).collect()
}

/// Tracks the grid agent under uniformly random actions with the default
/// noise. Returns (raw observation RMSE, filter estimate RMSE), pooled over
/// both coordinates.
pub fn grid_tracking(seed: u64, steps: usize, particles: usize) -> (f64, f64) {
    let cfg = GridConfig::default();
    let world = GridWorld::new(cfg.clone());
    let mut rng = rng_for(&[seed, 0x7EAC]);
    let start = cfg.start;
    let set = ParticleSet::init(particles, 2, &mut rng, |_, s| {
        s[0] = start.x;
        s[1] = start.y;
    })
    .unwrap();
    let noise = NoiseSpec::isotropic(2, cfg.sigma_obs, cfg.sigma_proc).unwrap();
    let mut pf = ParticleFilter::new(set, GridKinematics, noise, rng_for(&[seed, 0xF1])).unwrap();

    let mut truth = start;
    let (mut t, mut raw, mut est) = (Vec::new(), Vec::new(), Vec::new());
    let z0 = observe(&truth, &mut rng, cfg.sigma_obs);
    pf.correct(&[z0.x, z0.y]).unwrap();
    for _ in 0..steps {
        let a = world.actions().get(rng.random_range(0..world.actions().len()));
        truth = observe(&GridWorld::kinematics(&truth, &a), &mut rng, cfg.sigma_proc);
        let z: GridState = observe(&truth, &mut rng, cfg.sigma_obs);
        let e = pf.step(&a, &[z.x, z.y]).unwrap();
        t.extend([truth.x, truth.y]);
        raw.extend([z.x, z.y]);
        est.extend(e);
    }
    (rmse(&raw, &t), rmse(&est, &t))
}

/// Chi-square goodness-of-fit p-value of `observed` against `expected`.
pub fn chi_square_p(observed: &[f64], expected: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}
