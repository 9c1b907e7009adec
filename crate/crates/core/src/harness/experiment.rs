use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::metrics::{early_late_ranges, phase_stats, sliding_window_avg, MetricsSeries, PhaseStats};
use crate::error::{Error, Result};
use crate::gridworld::GridWorld;
use crate::neuroevolution::{evolve, CarEvaluator, GenerationStats};
use crate::par;
use crate::qlearn::{success_rate, train, EpisodeRecord};

pub const GRID_EPISODE_HEADER: [&str; 5] = ["episode", "return", "success", "epsilon", "steps"];
pub const GRID_SMOOTHED_HEADER: [&str; 3] = ["episode", "return_avg", "success_avg"];
pub const GRID_SUMMARY_HEADER: [&str; 12] = [
    "seed",
    "arm",
    "episodes",
    "success_rate",
    "early_mean",
    "early_variance",
    "early_cv",
    "late_mean",
    "late_variance",
    "late_cv",
    "underflow_resets",
    "episode_file",
];
pub const CAR_GENERATION_HEADER: [&str; 4] =
    ["generation", "best_fitness", "mean_fitness", "species_count"];
pub const CAR_SUMMARY_HEADER: [&str; 8] = [
    "seed",
    "arm",
    "sigma_dist",
    "generations",
    "final_best_fitness",
    "final_mean_fitness",
    "champion_fitness",
    "generation_file",
];

/// Written in place of a coefficient of variation whose mean is zero.
pub const UNDEFINED: &str = "undefined";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arms {
    On,
    Off,
    Both,
}

impl Arms {
    /// Unfiltered first.
    pub fn flags(self) -> &'static [bool] {
        match self {
            Arms::On => &[true],
            Arms::Off => &[false],
            Arms::Both => &[false, true],
        }
    }
}

pub fn arm_label(filtered: bool) -> &'static str {
    if filtered {
        "on"
    } else {
        "off"
    }
}

#[derive(Clone, Debug)]
pub struct GridArmResult {
    pub seed: u64,
    pub filtered: bool,
    pub records: Vec<EpisodeRecord>,
    pub success_rate: f64,
    pub early: PhaseStats,
    pub late: PhaseStats,
    pub underflow_resets: u64,
}

impl GridArmResult {
    pub fn episode_file(&self) -> String {
        format!("grid_seed{}_{}.csv", self.seed, arm_label(self.filtered))
    }

    pub fn returns(&self) -> Result<MetricsSeries> {
        MetricsSeries::new(self.records.iter().map(|r| r.total_return).collect())
    }
}

/// Trains one learner per (seed, arm), in parallel.
pub fn run_grid(cfg: &ExperimentConfig, arms: Arms, seeds: &[u64]) -> Result<Vec<GridArmResult>> {
    cfg.validate()?;
    if cfg.learn.episodes == 0 {
        return Err(Error::config("grid.episodes", "must be positive"));
    }
    let world = GridWorld::new(cfg.grid.clone());
    let jobs: Vec<(u64, bool)> = seeds
        .iter()
        .flat_map(|&s| arms.flags().iter().map(move |&f| (s, f)))
        .collect();
    par::map(&jobs, |&(seed, filtered)| {
        let filter = filtered.then_some(&cfg.grid_filter);
        let out = train(&world, filter, &cfg.learn, seed)?;
        let n = out.records.len();
        let returns = MetricsSeries::new(out.records.iter().map(|r| r.total_return).collect())?;
        let (early, late) = early_late_ranges(n);
        Ok(GridArmResult {
            seed,
            filtered,
            success_rate: success_rate(&out.records, cfg.success_window.min(n))?,
            early: phase_stats(&returns, early, "early")?,
            late: phase_stats(&returns, late, "late")?,
            underflow_resets: out.underflow_resets,
            records: out.records,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug)]
pub struct CarRunResult {
    pub seed: u64,
    pub filtered: bool,
    pub sigma_dist: f64,
    pub stats: Vec<GenerationStats>,
    pub champion_fitness: f64,
}

impl CarRunResult {
    pub fn generation_file(&self) -> String {
        format!(
            "car_seed{}_{}_sd{}.csv",
            self.seed,
            arm_label(self.filtered),
            self.sigma_dist
        )
    }

    pub fn final_best(&self) -> Option<f64> {
        self.stats.last().map(|s| s.best_fitness)
    }
}

/// Evolves one population per (seed, arm, noise level), in parallel.
pub fn run_car(
    cfg: &ExperimentConfig,
    arms: Arms,
    seeds: &[u64],
    sigma_dists: &[f64],
) -> Result<Vec<CarRunResult>> {
    cfg.validate()?;
    if let Some(bad) = sigma_dists.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::config("car.sigma_dist_levels", format!("invalid level {bad}")));
    }
    let track = cfg.load_track()?;
    let mut jobs = Vec::new();
    for &seed in seeds {
        for &filtered in arms.flags() {
            for &sigma_dist in sigma_dists {
                jobs.push((seed, filtered, sigma_dist));
            }
        }
    }
    par::map(&jobs, |&(seed, filtered, sigma_dist)| {
        let evaluator = CarEvaluator {
            track: &track,
            car: crate::carworld::CarConfig {
                sigma_dist,
                ..cfg.car.clone()
            },
            fitness: cfg.fitness.clone(),
            filter_enabled: filtered,
            seed,
        };
        let out = evolve(&evaluator, &cfg.neat, seed)?;
        Ok(CarRunResult {
            seed,
            filtered,
            sigma_dist,
            stats: out.stats,
            champion_fitness: out.champion.fitness.unwrap_or(0.0),
        })
    })
    .into_iter()
    .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let wrap = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn cv_text(cv: Option<f64>) -> String {
    cv.map_or_else(|| UNDEFINED.to_string(), |v| v.to_string())
}

/// Writes the per-episode, smoothed and summary CSVs. Returns the paths
/// written, summary last.
pub fn write_grid_outputs(
    results: &[GridArmResult],
    smoothing_window: usize,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut written = Vec::new();
    for r in results {
        let path = out.join(r.episode_file());
        write_rows(
            &path,
            &GRID_EPISODE_HEADER,
            r.records.iter().map(|e| {
                vec![
                    e.episode.to_string(),
                    e.total_return.to_string(),
                    u8::from(e.success).to_string(),
                    e.epsilon.to_string(),
                    e.steps.to_string(),
                ]
            }),
        )?;
        written.push(path);

        let returns = sliding_window_avg(&r.returns()?, smoothing_window)?;
        let successes = MetricsSeries::new(
            r.records.iter().map(|e| f64::from(u8::from(e.success))).collect(),
        )?;
        let successes = sliding_window_avg(&successes, smoothing_window)?;
        let path = out.join(format!(
            "grid_seed{}_{}_smoothed.csv",
            r.seed,
            arm_label(r.filtered)
        ));
        write_rows(
            &path,
            &GRID_SMOOTHED_HEADER,
            returns
                .values()
                .iter()
                .zip(successes.values())
                .enumerate()
                .map(|(i, (a, s))| vec![i.to_string(), a.to_string(), s.to_string()]),
        )?;
        written.push(path);
    }

    let path = out.join("grid_summary.csv");
    write_rows(
        &path,
        &GRID_SUMMARY_HEADER,
        results.iter().map(|r| {
            vec![
                r.seed.to_string(),
                arm_label(r.filtered).to_string(),
                r.records.len().to_string(),
                r.success_rate.to_string(),
                r.early.mean.to_string(),
                r.early.variance.to_string(),
                cv_text(r.early.cv),
                r.late.mean.to_string(),
                r.late.variance.to_string(),
                cv_text(r.late.cv),
                r.underflow_resets.to_string(),
                r.episode_file(),
            ]
        }),
    )?;
    written.push(path);
    Ok(written)
}

/// Writes one per-generation CSV per run plus `car_summary.csv`. Returns the
/// paths written, summary last.
pub fn write_car_outputs(results: &[CarRunResult], out: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut written = Vec::new();
    for r in results {
        let path = out.join(r.generation_file());
        write_rows(
            &path,
            &CAR_GENERATION_HEADER,
            r.stats.iter().map(|s| {
                vec![
                    s.generation.to_string(),
                    s.best_fitness.to_string(),
                    s.mean_fitness.to_string(),
                    s.species_count.to_string(),
                ]
            }),
        )?;
        written.push(path);
    }
    let path = out.join("car_summary.csv");
    write_rows(
        &path,
        &CAR_SUMMARY_HEADER,
        results.iter().map(|r| {
            let last = r.stats.last();
            vec![
                r.seed.to_string(),
                arm_label(r.filtered).to_string(),
                r.sigma_dist.to_string(),
                r.stats.len().to_string(),
                last.map_or_else(String::new, |s| s.best_fitness.to_string()),
                last.map_or_else(String::new, |s| s.mean_fitness.to_string()),
                r.champion_fitness.to_string(),
                r.generation_file(),
            ]
        }),
    )?;
    written.push(path);
    Ok(written)
}

pub fn run_grid_experiment(
    cfg: &ExperimentConfig,
    arms: Arms,
    seeds: &[u64],
    out: &Path,
) -> Result<Vec<GridArmResult>> {
    let results = run_grid(cfg, arms, seeds)?;
    write_grid_outputs(&results, cfg.smoothing_window, out)?;
    Ok(results)
}

pub fn run_car_experiment(
    cfg: &ExperimentConfig,
    arms: Arms,
    seeds: &[u64],
    sigma_dists: &[f64],
    out: &Path,
) -> Result<Vec<CarRunResult>> {
    let results = run_car(cfg, arms, seeds, sigma_dists)?;
    write_car_outputs(&results, out)?;
    Ok(results)
}
