//! Tabular Q-learning over the discretised grid.
//!
//! The table is indexed by the cell of whatever position signal the agent
//! trusts: the particle filter's weighted-mean estimate when filtering is
//! enabled, the raw noisy observation otherwise.

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimator::{NoiseSpec, ParticleFilter, ParticleSet, TransitionModel};
use crate::gridworld::{GridAction, GridState, GridWorld, TerminationReason};
use crate::seeding::{rng_for, stream};

#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    cells: usize,
    actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(cells: usize, actions: usize) -> Self {
        QTable {
            cells,
            actions,
            values: vec![0.0; cells * cells * actions],
        }
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, cell: (usize, usize)) -> usize {
        (cell.0 * self.cells + cell.1) * self.actions
    }

    pub fn row(&self, cell: (usize, usize)) -> &[f64] {
        let o = self.offset(cell);
        &self.values[o..o + self.actions]
    }

    pub fn row_mut(&mut self, cell: (usize, usize)) -> &mut [f64] {
        let o = self.offset(cell);
        &mut self.values[o..o + self.actions]
    }

    pub fn get(&self, cell: (usize, usize), action: usize) -> f64 {
        self.row(cell)[action]
    }

    pub fn max(&self, cell: (usize, usize)) -> f64 {
        self.row(cell).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the largest value, lowest index on ties.
    pub fn argmax(&self, cell: (usize, usize)) -> usize {
        argmax(self.row(cell))
    }
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub episodes: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            alpha: 0.001,
            gamma: 0.999,
            epsilon_start: 1.0,
            epsilon_end: 1e-5,
            episodes: 30_000,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("grid.alpha", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("grid.gamma", "must lie in [0, 1]"));
        }
        if !(self.epsilon_end > 0.0 && self.epsilon_end <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return Err(Error::config(
                "grid.epsilon_end",
                "need 0 < epsilon_end <= epsilon_start <= 1",
            ));
        }
        Ok(())
    }
}

/// Geometric schedule from `epsilon_start` at episode 0 to `epsilon_end` at
/// the last episode.
pub fn epsilon_at(episode: usize, cfg: &LearnConfig) -> f64 {
    if cfg.episodes <= 1 {
        return cfg.epsilon_start;
    }
    let frac = episode as f64 / (cfg.episodes - 1) as f64;
    cfg.epsilon_start * (cfg.epsilon_end / cfg.epsilon_start).powf(frac)
}

/// Epsilon-greedy choice of an action index.
pub fn select_action<R: Rng + ?Sized>(
    q: &QTable,
    cell: (usize, usize),
    epsilon: f64,
    rng: &mut R,
) -> usize {
    let explore: f64 = rng.random();
    if explore < epsilon {
        rng.random_range(0..q.actions())
    } else {
        q.argmax(cell)
    }
}

/// One Q-learning backup. Terminal transitions use `r` as the target.
#[allow(clippy::too_many_arguments)]
pub fn update(
    q: &mut QTable,
    cell: (usize, usize),
    action: usize,
    r: f64,
    next_cell: (usize, usize),
    terminal: bool,
    cfg: &LearnConfig,
) {
    let target = if terminal {
        r
    } else {
        r + cfg.gamma * q.max(next_cell)
    };
    let entry = &mut q.row_mut(cell)[action];
    *entry += cfg.alpha * (target - *entry);
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub total_return: f64,
    pub success: bool,
    pub epsilon: f64,
    pub steps: u32,
    pub reason: TerminationReason,
}

/// Particle filter settings for the filtered arm.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFilterConfig {
    pub particles: usize,
}

impl Default for GridFilterConfig {
    fn default() -> Self {
        GridFilterConfig { particles: 500 }
    }
}

/// `f(s, a) = s + v (cos θ, sin θ)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct GridKinematics;

impl TransitionModel<GridAction> for GridKinematics {
    fn transition(&self, s: &mut [f64], a: &GridAction) {
        let (dx, dy) = a.displacement();
        s[0] += dx;
        s[1] += dy;
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub q: QTable,
    pub records: Vec<EpisodeRecord>,
    pub underflow_resets: u64,
}

pub fn arm_tag(filtered: bool) -> u64 {
    u64::from(filtered)
}

/// Runs `cfg.episodes` episodes. Randomness for episode `i` is drawn from
/// streams keyed by `(seed, arm, i)`, so the two arms never share draws.
pub fn train(
    world: &GridWorld,
    filter: Option<&GridFilterConfig>,
    cfg: &LearnConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let noise = match filter {
        Some(f) => {
            if f.particles == 0 {
                return Err(Error::config("filter.particles", "must be at least 1"));
            }
            let gc = world.config();
            Some(NoiseSpec::isotropic(2, gc.sigma_obs, gc.sigma_proc)?)
        }
        None => None,
    };
    let arm = arm_tag(filter.is_some());
    let mut q = QTable::new(world.config().cells, world.actions().len());
    let mut records = Vec::with_capacity(cfg.episodes);
    let mut underflow_resets = 0;

    for episode in 0..cfg.episodes {
        let key = [seed, arm, episode as u64];
        let mut env_rng = rng_for(&[key[0], key[1], key[2], stream::ENVIRONMENT]);
        let mut agent_rng = rng_for(&[key[0], key[1], key[2], stream::AGENT]);
        let epsilon = epsilon_at(episode, cfg);

        let mut ep = world.reset();
        let start = ep.state;
        let mut pf = match (filter, &noise) {
            (Some(f), Some(noise)) => {
                let mut filter_rng = rng_for(&[key[0], key[1], key[2], stream::FILTER]);
                let set = ParticleSet::init(f.particles, 2, &mut filter_rng, |_, s| {
                    s[0] = start.x;
                    s[1] = start.y;
                })?;
                Some(ParticleFilter::new(set, GridKinematics, noise.clone(), filter_rng)?)
            }
            _ => None,
        };

        let z0 = crate::gridworld::observe(&start, &mut env_rng, world.config().sigma_obs);
        let mut belief = match pf.as_mut() {
            Some(pf) => to_state(&pf.correct(&[z0.x, z0.y])?),
            None => z0,
        };

        let mut total_return = 0.0;
        loop {
            let cell = world.discretize(&belief);
            let a = world.actions().get(select_action(&q, cell, epsilon, &mut agent_rng));
            let out = world.step(&mut ep, &a, &mut env_rng);
            total_return += out.reward;
            if out.terminal {
                update(&mut q, cell, a.index, out.reward, cell, true, cfg);
                records.push(EpisodeRecord {
                    episode,
                    total_return,
                    success: out.reason == TerminationReason::FinalTarget,
                    epsilon,
                    steps: ep.steps,
                    reason: out.reason,
                });
                break;
            }
            let z = out.observation;
            belief = match pf.as_mut() {
                Some(pf) => to_state(&pf.step(&a, &[z.x, z.y])?),
                None => z,
            };
            let next_cell = world.discretize(&belief);
            update(&mut q, cell, a.index, out.reward, next_cell, false, cfg);
        }
        if let Some(pf) = pf {
            underflow_resets += pf.underflow_resets();
        }
    }

    Ok(TrainOutcome {
        q,
        records,
        underflow_resets,
    })
}

fn to_state(v: &[f64]) -> GridState {
    GridState::new(v[0], v[1])
}

/// Fraction of successful episodes among the last `window` records.
pub fn success_rate(records: &[EpisodeRecord], window: usize) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("no episode records"));
    }
    if window == 0 || window > records.len() {
        return Err(Error::invalid(format!(
            "window {window} outside 1..={}",
            records.len()
        )));
    }
    let tail = &records[records.len() - window..];
    Ok(tail.iter().filter(|r| r.success).count() as f64 / window as f64)
}
