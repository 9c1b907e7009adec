use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use crate::carworld::{CarConfig, Track};
use crate::error::{Error, Result};
use crate::gridworld::{GridConfig, GridState};
use crate::neuroevolution::{EvoConfig, FitnessConfig, MAX_GENERATIONS};
use crate::qlearn::{GridFilterConfig, LearnConfig};

/// Every tunable of both experiments. Built from defaults, then overridden
/// by a flat `key=value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub learn: LearnConfig,
    pub grid_filter: GridFilterConfig,
    /// Episodes at the end of training used for the success rate.
    pub success_window: usize,
    pub smoothing_window: usize,
    /// `"oval"` or a path to a track file.
    pub track: String,
    pub car: CarConfig,
    pub fitness: FitnessConfig,
    pub neat: EvoConfig,
    /// Radar noise levels swept by the car experiment.
    pub sigma_dist_levels: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let car = CarConfig::default();
        ExperimentConfig {
            grid: GridConfig::default(),
            learn: LearnConfig::default(),
            grid_filter: GridFilterConfig::default(),
            success_window: 1000,
            smoothing_window: 50,
            track: "oval".into(),
            sigma_dist_levels: vec![car.sigma_dist],
            car,
            fitness: FitnessConfig::default(),
            neat: EvoConfig::default(),
            seeds: vec![0],
        }
    }
}

/// Keys accepted in configuration files.
pub const KEYS: &[&str] = &[
    "seeds",
    "grid.size",
    "grid.cells",
    "grid.start_x",
    "grid.start_y",
    "grid.sigma_obs",
    "grid.sigma_proc",
    "grid.max_steps",
    "grid.speeds",
    "grid.alpha",
    "grid.gamma",
    "grid.epsilon_start",
    "grid.epsilon_end",
    "grid.episodes",
    "grid.success_window",
    "grid.smoothing_window",
    "grid.path.start_x",
    "grid.path.start_y",
    "grid.path.end_x",
    "grid.path.end_y",
    "grid.path.amplitude",
    "grid.path.frequency",
    "grid.path.spacing",
    "grid.path.half_extent",
    "grid.reward.boundary",
    "grid.reward.final_target",
    "grid.reward.guide_c",
    "grid.reward.guide_eps",
    "grid.reward.idle_kappa",
    "grid.reward.idle_window",
    "filter.particles",
    "car.track",
    "car.sigma_theta",
    "car.sigma_dist",
    "car.sigma_dist_levels",
    "car.max_steps",
    "car.turn_deg",
    "car.speed_step",
    "car.speed_min",
    "car.speed_max",
    "car.initial_speed",
    "car.radar_range",
    "car.footprint",
    "car.particles",
    "car.filter_sigma_proc",
    "car.checkpoints",
    "car.fitness.speed_divisor",
    "car.fitness.checkpoint_bonus",
    "neat.population",
    "neat.generations",
    "neat.elitism",
    "neat.survival_threshold",
    "neat.conn_add_prob",
    "neat.conn_delete_prob",
    "neat.node_add_prob",
    "neat.node_delete_prob",
    "neat.weight_mutate_rate",
    "neat.bias_mutate_rate",
    "neat.weight_perturb_sigma",
    "neat.weight_replace_prob",
    "neat.weight_replace_range",
    "neat.weight_limit",
    "neat.reenable_prob",
    "neat.compat_threshold",
    "neat.c1",
    "neat.c2",
    "neat.c3",
    "neat.max_stagnation",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::config(
            key,
            format!("cannot parse `{value}` as {}", std::any::type_name::<T>()),
        )
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| parse(key, v.trim()))
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Lines are `key=value`; blank lines and lines starting with `#` are
    /// ignored. Unknown or repeated keys and unparsable values are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    line,
                    format!("line {} is not of the form key=value", n + 1),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, "given more than once"));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one override. Does not validate cross-field constraints.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let g = &mut self.grid;
        let c = &mut self.car;
        let e = &mut self.neat;
        match key {
            "seeds" => self.seeds = parse_list(key, value)?,
            "grid.size" => g.size = parse(key, value)?,
            "grid.cells" => g.cells = parse(key, value)?,
            "grid.start_x" => g.start = GridState::new(parse(key, value)?, g.start.y),
            "grid.start_y" => g.start = GridState::new(g.start.x, parse(key, value)?),
            "grid.sigma_obs" => g.sigma_obs = parse(key, value)?,
            "grid.sigma_proc" => g.sigma_proc = parse(key, value)?,
            "grid.max_steps" => g.max_steps = parse(key, value)?,
            "grid.speeds" => g.speeds = parse_list(key, value)?,
            "grid.alpha" => self.learn.alpha = parse(key, value)?,
            "grid.gamma" => self.learn.gamma = parse(key, value)?,
            "grid.epsilon_start" => self.learn.epsilon_start = parse(key, value)?,
            "grid.epsilon_end" => self.learn.epsilon_end = parse(key, value)?,
            "grid.episodes" => self.learn.episodes = parse(key, value)?,
            "grid.success_window" => self.success_window = parse(key, value)?,
            "grid.smoothing_window" => self.smoothing_window = parse(key, value)?,
            "grid.path.start_x" => g.path.start = GridState::new(parse(key, value)?, g.path.start.y),
            "grid.path.start_y" => g.path.start = GridState::new(g.path.start.x, parse(key, value)?),
            "grid.path.end_x" => g.path.end = GridState::new(parse(key, value)?, g.path.end.y),
            "grid.path.end_y" => g.path.end = GridState::new(g.path.end.x, parse(key, value)?),
            "grid.path.amplitude" => g.path.amplitude = parse(key, value)?,
            "grid.path.frequency" => g.path.frequency = parse(key, value)?,
            "grid.path.spacing" => g.path.spacing = parse(key, value)?,
            "grid.path.half_extent" => g.path.half_extent = parse(key, value)?,
            "grid.reward.boundary" => g.reward.boundary = parse(key, value)?,
            "grid.reward.final_target" => g.reward.final_target = parse(key, value)?,
            "grid.reward.guide_c" => g.reward.guide_c = parse(key, value)?,
            "grid.reward.guide_eps" => g.reward.guide_eps = parse(key, value)?,
            "grid.reward.idle_kappa" => g.reward.idle_kappa = parse(key, value)?,
            "grid.reward.idle_window" => g.reward.idle_window = parse(key, value)?,
            "filter.particles" => self.grid_filter.particles = parse(key, value)?,
            "car.track" => self.track = value.to_string(),
            "car.sigma_theta" => c.sigma_theta = parse(key, value)?,
            "car.sigma_dist" => {
                c.sigma_dist = parse(key, value)?;
                self.sigma_dist_levels = vec![c.sigma_dist];
            }
            "car.sigma_dist_levels" => self.sigma_dist_levels = parse_list(key, value)?,
            "car.max_steps" => c.max_steps = parse(key, value)?,
            "car.turn_deg" => c.turn_deg = parse(key, value)?,
            "car.speed_step" => c.speed_step = parse(key, value)?,
            "car.speed_min" => c.speed_min = parse(key, value)?,
            "car.speed_max" => c.speed_max = parse(key, value)?,
            "car.initial_speed" => c.initial_speed = parse(key, value)?,
            "car.radar_range" => c.radar_range = parse(key, value)?,
            "car.footprint" => c.footprint = parse(key, value)?,
            "car.particles" => c.particles = parse(key, value)?,
            "car.filter_sigma_proc" => c.filter_sigma_proc = parse(key, value)?,
            "car.checkpoints" => c.checkpoints = parse(key, value)?,
            "car.fitness.speed_divisor" => self.fitness.speed_divisor = parse(key, value)?,
            "car.fitness.checkpoint_bonus" => self.fitness.checkpoint_bonus = parse(key, value)?,
            "neat.population" => e.population = parse(key, value)?,
            "neat.generations" => e.generations = parse(key, value)?,
            "neat.elitism" => e.elitism = parse(key, value)?,
            "neat.survival_threshold" => e.survival_threshold = parse(key, value)?,
            "neat.conn_add_prob" => e.conn_add_prob = parse(key, value)?,
            "neat.conn_delete_prob" => e.conn_delete_prob = parse(key, value)?,
            "neat.node_add_prob" => e.node_add_prob = parse(key, value)?,
            "neat.node_delete_prob" => e.node_delete_prob = parse(key, value)?,
            "neat.weight_mutate_rate" => e.weight_mutate_rate = parse(key, value)?,
            "neat.bias_mutate_rate" => e.bias_mutate_rate = parse(key, value)?,
            "neat.weight_perturb_sigma" => e.weight_perturb_sigma = parse(key, value)?,
            "neat.weight_replace_prob" => e.weight_replace_prob = parse(key, value)?,
            "neat.weight_replace_range" => e.weight_replace_range = parse(key, value)?,
            "neat.weight_limit" => e.weight_limit = parse(key, value)?,
            "neat.reenable_prob" => e.reenable_prob = parse(key, value)?,
            "neat.compat_threshold" => e.compat_threshold = parse(key, value)?,
            "neat.c1" => e.c1 = parse(key, value)?,
            "neat.c2" => e.c2 = parse(key, value)?,
            "neat.c3" => e.c3 = parse(key, value)?,
            "neat.max_stagnation" => e.max_stagnation = parse(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        debug_assert!(KEYS.contains(&key));
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        self.validate_grid()?;
        self.validate_car()?;
        self.learn.validate()?;
        self.neat.validate()?;
        if self.neat.generations > MAX_GENERATIONS {
            return Err(Error::config(
                "neat.generations",
                format!("at most {MAX_GENERATIONS}"),
            ));
        }
        if self.success_window == 0 {
            return Err(Error::config("grid.success_window", "must be positive"));
        }
        if self.smoothing_window == 0 {
            return Err(Error::config("grid.smoothing_window", "must be positive"));
        }
        Ok(())
    }

    fn validate_grid(&self) -> Result<()> {
        let g = &self.grid;
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be non-negative, got {v}")))
            }
        };
        positive("grid.size", g.size)?;
        if g.cells < 2 {
            return Err(Error::config("grid.cells", "need at least 2 cells per axis"));
        }
        non_negative("grid.sigma_obs", g.sigma_obs)?;
        non_negative("grid.sigma_proc", g.sigma_proc)?;
        if g.speeds.is_empty() || g.speeds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::config("grid.speeds", "need one or more positive speeds"));
        }
        for (key, v) in [("grid.start_x", g.start.x), ("grid.start_y", g.start.y)] {
            if !(0.0..=g.size).contains(&v) {
                return Err(Error::config(key, "start lies outside the grid"));
            }
        }
        positive("grid.path.spacing", g.path.spacing)?;
        positive("grid.path.half_extent", g.path.half_extent)?;
        non_negative("grid.reward.guide_eps", g.reward.guide_eps)?;
        if self.grid_filter.particles == 0 {
            return Err(Error::config("filter.particles", "must be positive"));
        }
        Ok(())
    }

    fn validate_car(&self) -> Result<()> {
        let c = &self.car;
        for (key, v) in [("car.sigma_theta", c.sigma_theta), ("car.sigma_dist", c.sigma_dist)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be non-negative"));
            }
        }
        if self.sigma_dist_levels.is_empty() || self.sigma_dist_levels.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::config(
                "car.sigma_dist_levels",
                "need one or more non-negative levels",
            ));
        }
        if !(c.speed_min > 0.0 && c.speed_min <= c.speed_max) {
            return Err(Error::config("car.speed_min", "need 0 < speed_min <= speed_max"));
        }
        if !(c.speed_min..=c.speed_max).contains(&c.initial_speed) {
            return Err(Error::config("car.initial_speed", "outside [speed_min, speed_max]"));
        }
        if !(c.radar_range > 0.0) {
            return Err(Error::config("car.radar_range", "must be positive"));
        }
        if !(c.footprint > 0.0) {
            return Err(Error::config("car.footprint", "must be positive"));
        }
        if c.particles == 0 {
            return Err(Error::config("car.particles", "must be positive"));
        }
        if !(c.filter_sigma_proc >= 0.0) {
            return Err(Error::config("car.filter_sigma_proc", "must be non-negative"));
        }
        if c.checkpoints == 0 {
            return Err(Error::config("car.checkpoints", "must be positive"));
        }
        if !(self.fitness.speed_divisor > 0.0) {
            return Err(Error::config("car.fitness.speed_divisor", "must be positive"));
        }
        if self.neat.num_inputs != 5 || self.neat.num_outputs != 4 {
            return Err(Error::invalid("car controllers have 5 inputs and 4 outputs"));
        }
        Ok(())
    }

    /// Loads the configured track, also checking the spawn footprint against
    /// the car's configured size.
    pub fn load_track(&self) -> Result<Track> {
        let track = Track::load(&self.track).map_err(|e| match e {
            Error::Io { path, source } => {
                Error::config("car.track", format!("{}: {source}", path.display()))
            }
            other => other,
        })?;
        let car = self.car.spawn_state(&track);
        if crate::carworld::collision_check_sized(&track, &car, self.car.footprint) {
            return Err(Error::TrackValidation(format!(
                "spawn footprint of {} px overlaps a wall",
                self.car.footprint
            )));
        }
        Ok(track)
    }
}
