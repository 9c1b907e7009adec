//! Car on an occupancy-grid track with five range radars.
//!
//! Coordinates are pixels with `x` to the right and `y` down; headings are in
//! degrees and advance the car by `v (cos θ, sin θ)`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimator::{NoiseSpec, ParticleFilter, ParticleSet, TransitionModel};

/// Radar directions relative to the car heading.
pub const RADAR_ANGLES: [f64; 5] = [-90.0, -45.0, 0.0, 45.0, 90.0];

#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    spawn: CarPose,
    gate_center: (f64, f64),
}

/// Position and heading only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Track {
    /// Builds a track from a row-major wall mask. The outer border is sealed
    /// and the spawn footprint must be free.
    pub fn new(width: usize, height: usize, mut walls: Vec<bool>, spawn: CarPose) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::TrackValidation(format!(
                "track must be at least 3x3, got {width}x{height}"
            )));
        }
        if walls.len() != width * height {
            return Err(Error::TrackValidation(format!(
                "expected {} cells, got {}",
                width * height,
                walls.len()
            )));
        }
        for x in 0..width {
            walls[x] = true;
            walls[(height - 1) * width + x] = true;
        }
        for y in 0..height {
            walls[y * width] = true;
            walls[y * width + width - 1] = true;
        }
        let mut track = Track {
            width,
            height,
            walls,
            spawn,
            gate_center: (0.0, 0.0),
        };
        track.gate_center = track.free_centroid();
        let probe = CarState::new(spawn.x, spawn.y, spawn.heading, 1.0);
        if track.is_wall(spawn.x, spawn.y) || collision_check(&track, &probe) {
            return Err(Error::TrackValidation(format!(
                "spawn ({}, {}) overlaps a wall",
                spawn.x, spawn.y
            )));
        }
        Ok(track)
    }

    /// Procedural stadium-shaped ring course on a 2000x2080 map.
    pub fn oval() -> Self {
        let (width, height) = (2000, 2080);
        // Centreline: all points 500 px from the segment (700,1420)-(1300,1420).
        let (ax, bx, cy) = (700.0, 1300.0, 1420.0);
        let (radius, half_width) = (500.0, 100.0);
        let mut walls = vec![true; width * height];
        for y in 0..height {
            let py = y as f64 + 0.5;
            for x in 0..width {
                let px = x as f64 + 0.5;
                let nx = px.clamp(ax, bx);
                let d = (px - nx).hypot(py - cy);
                if (d - radius).abs() <= half_width {
                    walls[y * width + x] = false;
                }
            }
        }
        let spawn = CarPose {
            x: 830.0,
            y: 920.0,
            heading: 0.0,
        };
        Track::new(width, height, walls, spawn).expect("builtin oval is valid")
    }

    /// `"oval"` or a path to a track file.
    pub fn load(source: &str) -> Result<Self> {
        if source == "oval" {
            return Ok(Self::oval());
        }
        let path = Path::new(source);
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// Parses the text format: a header line `width height spawn_x spawn_y
    /// spawn_theta`, then one line per row of run-length tokens such as
    /// `12# 1976. 12#` (`#` wall, `.` free).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(Error::TrackParse {
            line: 1,
            message: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::TrackParse {
                line: hline + 1,
                message: format!("header needs 5 fields, found {}", fields.len()),
            });
        }
        let bad = |what: &str| Error::TrackParse {
            line: hline + 1,
            message: format!("invalid {what}"),
        };
        let width: usize = fields[0].parse().map_err(|_| bad("width"))?;
        let height: usize = fields[1].parse().map_err(|_| bad("height"))?;
        let sx: f64 = fields[2].parse().map_err(|_| bad("spawn_x"))?;
        let sy: f64 = fields[3].parse().map_err(|_| bad("spawn_y"))?;
        let st: f64 = fields[4].parse().map_err(|_| bad("spawn_theta"))?;

        let mut walls = Vec::with_capacity(width * height);
        let mut rows = 0;
        for (idx, line) in lines {
            let lineno = idx + 1;
            if rows == height {
                return Err(Error::TrackParse {
                    line: lineno,
                    message: format!("more than {height} rows"),
                });
            }
            let start = walls.len();
            for token in line.split_whitespace() {
                let (count, kind) = token.split_at(token.len() - 1);
                let wall = match kind {
                    "#" => true,
                    "." => false,
                    _ => {
                        return Err(Error::TrackParse {
                            line: lineno,
                            message: format!("bad run `{token}`"),
                        })
                    }
                };
                let n: usize = count.parse().map_err(|_| Error::TrackParse {
                    line: lineno,
                    message: format!("bad run length in `{token}`"),
                })?;
                walls.extend(std::iter::repeat_n(wall, n));
            }
            if walls.len() - start != width {
                return Err(Error::TrackParse {
                    line: lineno,
                    message: format!("row has {} cells, expected {width}", walls.len() - start),
                });
            }
            rows += 1;
        }
        if rows != height {
            return Err(Error::TrackParse {
                line: text.lines().count(),
                message: format!("found {rows} rows, expected {height}"),
            });
        }
        Self::new(
            width,
            height,
            walls,
            CarPose {
                x: sx,
                y: sy,
                heading: st,
            },
        )
    }

    /// Serialises to the text format read by [`Track::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.spawn;
        let _ = writeln!(out, "{} {} {} {} {}", self.width, self.height, s.x, s.y, s.heading);
        for row in self.walls.chunks_exact(self.width) {
            let mut first = true;
            let mut i = 0;
            while i < row.len() {
                let v = row[i];
                let run = row[i..].iter().take_while(|&&c| c == v).count();
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{run}{}", if v { '#' } else { '.' });
                first = false;
                i += run;
            }
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spawn(&self) -> CarPose {
        self.spawn
    }

    /// Centre about which checkpoint gates are laid out.
    pub fn gate_center(&self) -> (f64, f64) {
        self.gate_center
    }

    pub fn cell(&self, x: usize, y: usize) -> bool {
        self.walls[y * self.width + x]
    }

    /// Wall test for a continuous point; anything off the map counts as wall.
    #[inline]
    pub fn is_wall(&self, x: f64, y: f64) -> bool {
        if !(x >= 0.0 && y >= 0.0) {
            return true;
        }
        let (cx, cy) = (x as usize, y as usize);
        cx >= self.width || cy >= self.height || self.walls[cy * self.width + cx]
    }

    fn free_centroid(&self) -> (f64, f64) {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.walls[y * self.width + x] {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1;
                }
            }
        }
        if n == 0 {
            (self.width as f64 / 2.0, self.height as f64 / 2.0)
        } else {
            (sx / n as f64, sy / n as f64)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarState {
    pub x: f64,
    pub y: f64,
    /// Degrees in `[0, 360)`.
    pub heading: f64,
    pub speed: f64,
}

impl CarState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        CarState {
            x,
            y,
            heading: heading.rem_euclid(360.0),
            speed,
        }
    }

    pub fn pose(&self) -> CarPose {
        CarPose {
            x: self.x,
            y: self.y,
            heading: self.heading,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CarAction {
    TurnLeft,
    TurnRight,
    SlowDown,
    SpeedUp,
}

impl CarAction {
    pub const ALL: [CarAction; 4] = [
        CarAction::TurnLeft,
        CarAction::TurnRight,
        CarAction::SlowDown,
        CarAction::SpeedUp,
    ];
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarConfig {
    pub sigma_theta: f64,
    pub sigma_dist: f64,
    pub max_steps: u32,
    pub turn_deg: f64,
    pub speed_step: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub initial_speed: f64,
    pub radar_range: f64,
    pub footprint: f64,
    pub particles: usize,
    /// Process noise (pixels) of the per-radar filters.
    pub filter_sigma_proc: f64,
    pub checkpoints: u32,
}

impl Default for CarConfig {
    fn default() -> Self {
        CarConfig {
            sigma_theta: 10.0,
            sigma_dist: 50.0,
            max_steps: 500,
            turn_deg: 5.0,
            speed_step: 2.0,
            speed_min: 10.0,
            speed_max: 30.0,
            initial_speed: 20.0,
            radar_range: 300.0,
            footprint: 40.0,
            particles: 30,
            filter_sigma_proc: 2.0,
            checkpoints: 16,
        }
    }
}

impl CarConfig {
    pub fn spawn_state(&self, track: &Track) -> CarState {
        let s = track.spawn();
        CarState::new(s.x, s.y, s.heading, self.initial_speed)
    }
}

/// Applies `a` and moves the car one step. Returns the new state and whether
/// it collided.
pub fn step(track: &Track, car: &CarState, a: CarAction, cfg: &CarConfig) -> (CarState, bool) {
    let mut heading = car.heading;
    let mut speed = car.speed;
    match a {
        CarAction::TurnLeft => heading -= cfg.turn_deg,
        CarAction::TurnRight => heading += cfg.turn_deg,
        CarAction::SlowDown => speed -= cfg.speed_step,
        CarAction::SpeedUp => speed += cfg.speed_step,
    }
    let speed = speed.clamp(cfg.speed_min, cfg.speed_max);
    let heading = heading.rem_euclid(360.0);
    let (s, c) = heading.to_radians().sin_cos();
    let next = CarState {
        x: car.x + speed * c,
        y: car.y + speed * s,
        heading,
        speed,
    };
    let crashed = collision_check_sized(track, &next, cfg.footprint);
    (next, crashed)
}

/// Corner test for the default 40x40 footprint.
pub fn collision_check(track: &Track, car: &CarState) -> bool {
    collision_check_sized(track, car, 40.0)
}

/// True if any corner of the square footprint, rotated by the heading, is on
/// a wall or off the map.
pub fn collision_check_sized(track: &Track, car: &CarState, footprint: f64) -> bool {
    footprint_corners(car, footprint)
        .iter()
        .any(|&(x, y)| track.is_wall(x, y))
}

pub fn footprint_corners(car: &CarState, footprint: f64) -> [(f64, f64); 4] {
    let h = footprint / 2.0;
    let (s, c) = car.heading.to_radians().sin_cos();
    [(h, h), (h, -h), (-h, -h), (-h, h)].map(|(dx, dy)| (car.x + dx * c - dy * s, car.y + dx * s + dy * c))
}

/// Distance along a ray to the first wall cell, stepped in 1 px increments
/// and capped at `max_range`.
pub fn ray_distance(track: &Track, x: f64, y: f64, angle_deg: f64, max_range: f64) -> f64 {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let steps = max_range.floor() as u32;
    for d in 0..=steps {
        let d = d as f64;
        if track.is_wall(x + d * c, y + d * s) {
            return d;
        }
    }
    max_range
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadarReading {
    pub relative_angle: f64,
    pub true_distance: f64,
    pub noisy_distance: f64,
    pub filtered_distance: f64,
}

/// Casts one radar. The noisy reading uses a perturbed direction and additive
/// range noise, clamped to `[0, radar_range]`; `filtered_distance` is set to
/// the noisy value until a filter overwrites it.
pub fn cast_radar<R: Rng + ?Sized>(
    track: &Track,
    car: &CarState,
    relative_angle: f64,
    rng: &mut R,
    cfg: &CarConfig,
) -> Result<RadarReading> {
    if track.is_wall(car.x, car.y) {
        return Err(Error::CarInWall { x: car.x, y: car.y });
    }
    let direction = car.heading + relative_angle;
    let true_distance = ray_distance(track, car.x, car.y, direction, cfg.radar_range);
    let noisy_direction = if cfg.sigma_theta > 0.0 {
        let n: f64 = rng.sample(StandardNormal);
        direction + cfg.sigma_theta * n
    } else {
        direction
    };
    let measured = if noisy_direction == direction {
        true_distance
    } else {
        ray_distance(track, car.x, car.y, noisy_direction, cfg.radar_range)
    };
    let noisy_distance = if cfg.sigma_dist > 0.0 {
        let n: f64 = rng.sample(StandardNormal);
        (measured + cfg.sigma_dist * n).clamp(0.0, cfg.radar_range)
    } else {
        measured
    };
    Ok(RadarReading {
        relative_angle,
        true_distance,
        noisy_distance,
        filtered_distance: noisy_distance,
    })
}

/// Shifts a distance particle by the geometric change caused by the car's motion.
#[derive(Clone, Copy, Debug, Default)]
pub struct RangeShift;

impl TransitionModel<f64> for RangeShift {
    fn transition(&self, s: &mut [f64], delta: &f64) {
        s[0] += delta;
    }
}

/// Scalar particle filter tracking one radar's distance.
///
/// The motion model re-casts the nominal ray from the new pose without noise
/// and shifts every particle by the change in geometric distance. With zero
/// range noise the filter is bypassed and readings pass straight through.
#[derive(Clone, Debug)]
pub struct RadarFilter {
    pf: Option<ParticleFilter<RangeShift>>,
    last_geometric: f64,
    range: f64,
}

impl RadarFilter {
    /// Starts a filter from the first reading; the prior is `N(z0, σ_d²)`.
    pub fn new(
        first_noisy: f64,
        geometric: f64,
        cfg: &CarConfig,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        let pf = if cfg.sigma_dist > 0.0 {
            let sigma = cfg.sigma_dist;
            let range = cfg.radar_range;
            let set = ParticleSet::init(cfg.particles, 1, &mut rng, |r, s| {
                let n: f64 = r.sample(StandardNormal);
                s[0] = (first_noisy + sigma * n).clamp(0.0, range);
            })?;
            let noise = NoiseSpec::isotropic(1, cfg.sigma_dist, cfg.filter_sigma_proc)?;
            Some(ParticleFilter::new(set, RangeShift, noise, rng)?)
        } else {
            None
        };
        Ok(RadarFilter {
            pf,
            last_geometric: geometric,
            range: cfg.radar_range,
        })
    }

    /// Current estimate, clamped to the radar range.
    pub fn estimate(&self, fallback: f64) -> f64 {
        match &self.pf {
            Some(pf) => pf.estimate()[0].clamp(0.0, self.range),
            None => fallback.clamp(0.0, self.range),
        }
    }

    /// Predicts with the geometric change since the last call, then
    /// corrects with `noisy`. Returns the filtered distance.
    pub fn update(&mut self, geometric: f64, noisy: f64) -> Result<f64> {
        let delta = geometric - self.last_geometric;
        self.last_geometric = geometric;
        match self.pf.as_mut() {
            Some(pf) => Ok(pf.step(&delta, &[noisy])?[0].clamp(0.0, self.range)),
            None => Ok(noisy.clamp(0.0, self.range)),
        }
    }
}

/// Progress around the gate centre, used to count checkpoints.
#[derive(Clone, Copy, Debug)]
pub struct GateCounter {
    center: (f64, f64),
    last_angle: f64,
    progress: f64,
    best: f64,
    gate_width: f64,
}

impl GateCounter {
    pub fn new(track: &Track, start: &CarState, gates: u32) -> Self {
        let center = track.gate_center();
        GateCounter {
            center,
            last_angle: (start.y - center.1).atan2(start.x - center.0),
            progress: 0.0,
            best: 0.0,
            gate_width: std::f64::consts::TAU / gates.max(1) as f64,
        }
    }

    /// Updates with a new position; returns total gates passed so far.
    pub fn advance(&mut self, car: &CarState) -> u32 {
        let angle = (car.y - self.center.1).atan2(car.x - self.center.0);
        let mut d = angle - self.last_angle;
        if d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
        } else if d < -std::f64::consts::PI {
            d += std::f64::consts::TAU;
        }
        self.last_angle = angle;
        self.progress += d;
        self.best = self.best.max(self.progress);
        self.passed()
    }

    pub fn passed(&self) -> u32 {
        (self.best / self.gate_width).floor().max(0.0) as u32
    }
}

/// Summary of one car rollout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutStats {
    pub steps: u32,
    /// Sum of speeds over executed steps.
    pub speed_sum: f64,
    pub checkpoints: u32,
    pub crashed: bool,
    pub raw_sq_error: f64,
    pub filtered_sq_error: f64,
    pub readings: u64,
}

impl RolloutStats {
    pub fn raw_rmse(&self) -> f64 {
        (self.raw_sq_error / self.readings.max(1) as f64).sqrt()
    }

    pub fn filtered_rmse(&self) -> f64 {
        (self.filtered_sq_error / self.readings.max(1) as f64).sqrt()
    }
}

/// Drives the car with `policy`, which sees the five radar inputs (filtered
/// when `filter_enabled`, raw otherwise) each divided by the radar range.
///
/// `sensor_rng` drives radar noise; each radar filter gets its own stream
/// derived from `filter_seed`.
pub fn rollout<P>(
    track: &Track,
    cfg: &CarConfig,
    filter_enabled: bool,
    sensor_rng: &mut ChaCha8Rng,
    filter_seed: u64,
    mut policy: P,
) -> Result<RolloutStats>
where
    P: FnMut(&[f64; 5]) -> Result<CarAction>,
{
    let mut car = cfg.spawn_state(track);
    let mut gates = GateCounter::new(track, &car, cfg.checkpoints);
    let mut stats = RolloutStats::default();
    let mut filters: Vec<RadarFilter> = Vec::new();
    let mut inputs = [0.0; 5];

    for _ in 0..cfg.max_steps {
        let mut readings = [RadarReading {
            relative_angle: 0.0,
            true_distance: 0.0,
            noisy_distance: 0.0,
            filtered_distance: 0.0,
        }; 5];
        for (r, &angle) in readings.iter_mut().zip(&RADAR_ANGLES) {
            *r = cast_radar(track, &car, angle, sensor_rng, cfg)?;
        }
        if filter_enabled {
            if filters.is_empty() {
                for (k, r) in readings.iter_mut().enumerate() {
                    let rng = crate::seeding::rng_for(&[filter_seed, k as u64]);
                    let f = RadarFilter::new(r.noisy_distance, r.true_distance, cfg, rng)?;
                    r.filtered_distance = f.estimate(r.noisy_distance);
                    filters.push(f);
                }
            } else {
                for (f, r) in filters.iter_mut().zip(readings.iter_mut()) {
                    r.filtered_distance = f.update(r.true_distance, r.noisy_distance)?;
                }
            }
        }
        for (input, r) in inputs.iter_mut().zip(&readings) {
            let used = if filter_enabled {
                r.filtered_distance
            } else {
                r.noisy_distance
            };
            *input = used / cfg.radar_range;
            stats.raw_sq_error += (r.noisy_distance - r.true_distance).powi(2);
            stats.filtered_sq_error += (r.filtered_distance - r.true_distance).powi(2);
            stats.readings += 1;
        }

        let action = policy(&inputs)?;
        let (next, crashed) = step(track, &car, action, cfg);
        car = next;
        stats.steps += 1;
        stats.speed_sum += car.speed;
        stats.checkpoints = gates.advance(&car);
        if crashed || track.is_wall(car.x, car.y) {
            stats.crashed = true;
            break;
        }
    }
    Ok(stats)
}
