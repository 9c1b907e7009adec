//! Continuous 12x12 navigation task with a wave-shaped chain of targets.
//!
//! The agent moves by `v (cos θ, sin θ)` plus Gaussian process noise, is
//! rewarded for landing in the next intermediate target box, penalised for
//! idling and for leaving the domain, and wins on reaching the final box.

use rand::Rng;
use rand_distr::StandardNormal;

/// Number of discrete headings (multiples of 45 degrees).
pub const HEADINGS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridState {
    pub x: f64,
    pub y: f64,
}

impl GridState {
    pub const fn new(x: f64, y: f64) -> Self {
        GridState { x, y }
    }

    pub fn distance(&self, other: &GridState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.y]
    }
}

/// A `(speed, heading)` pair together with its index in the action table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAction {
    pub speed: f64,
    /// Heading as a multiple of 45 degrees, `0..8`.
    pub heading: usize,
    pub index: usize,
}

impl GridAction {
    pub fn heading_deg(&self) -> f64 {
        self.heading as f64 * 45.0
    }

    pub fn displacement(&self) -> (f64, f64) {
        let (s, c) = self.heading_deg().to_radians().sin_cos();
        (self.speed * c, self.speed * s)
    }
}

/// All actions, heading-major: `index = heading * speeds.len() + speed_index`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSet {
    actions: Vec<GridAction>,
}

impl ActionSet {
    pub fn new(speeds: &[f64]) -> Self {
        let mut actions = Vec::with_capacity(HEADINGS * speeds.len());
        for heading in 0..HEADINGS {
            for &speed in speeds {
                let index = actions.len();
                actions.push(GridAction {
                    speed,
                    heading,
                    index,
                });
            }
        }
        ActionSet { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> GridAction {
        self.actions[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &GridAction> {
        self.actions.iter()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathConfig {
    pub start: GridState,
    pub end: GridState,
    pub amplitude: f64,
    /// Full periods between `start` and `end`.
    pub frequency: f64,
    /// Target arc-length spacing between consecutive nodes.
    pub spacing: f64,
    pub half_extent: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            start: GridState::new(4.0, 4.0),
            end: GridState::new(11.4, 11.4),
            amplitude: 2.0,
            frequency: 2.0,
            spacing: 1.1,
            half_extent: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WavePath {
    nodes: Vec<GridState>,
    half_extent: f64,
}

impl WavePath {
    pub fn nodes(&self) -> &[GridState] {
        &self.nodes
    }

    pub fn final_index(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn final_node(&self) -> GridState {
        self.nodes[self.final_index()]
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    /// Whether `s` lies in the axis-aligned target box around node `i`.
    pub fn in_box(&self, i: usize, s: &GridState) -> bool {
        let c = self.nodes[i];
        (s.x - c.x).abs() <= self.half_extent && (s.y - c.y).abs() <= self.half_extent
    }
}

/// Point on the sinusoid at curve parameter `u` in `[0, 1]`.
pub fn wave_point(cfg: &PathConfig, u: f64) -> GridState {
    let (dx, dy) = (cfg.end.x - cfg.start.x, cfg.end.y - cfg.start.y);
    let len = dx.hypot(dy);
    let (nx, ny) = (-dy / len, dx / len);
    let offset = cfg.amplitude * (std::f64::consts::TAU * cfg.frequency * u).sin();
    GridState::new(
        cfg.start.x + u * dx + offset * nx,
        cfg.start.y + u * dy + offset * ny,
    )
}

const ARC_SEGMENTS: usize = 20_000;

/// Samples the wave at equal arc-length intervals as close to
/// `cfg.spacing` as an integral number of intervals allows. The first and
/// last nodes are exactly `cfg.start` and `cfg.end`.
///
/// Node centres are clamped into `[0, bound]`; with the default geometry one
/// crest overshoots the domain edge by a few thousandths.
pub fn generate_wave_path(cfg: &PathConfig, bound: f64) -> WavePath {
    let mut cumulative = Vec::with_capacity(ARC_SEGMENTS + 1);
    cumulative.push(0.0);
    let mut prev = wave_point(cfg, 0.0);
    for k in 1..=ARC_SEGMENTS {
        let p = wave_point(cfg, k as f64 / ARC_SEGMENTS as f64);
        let last = *cumulative.last().unwrap();
        cumulative.push(last + p.distance(&prev));
        prev = p;
    }
    let total = cumulative[ARC_SEGMENTS];
    let intervals = ((total / cfg.spacing).round() as usize).max(1);

    let mut nodes = Vec::with_capacity(intervals + 1);
    nodes.push(cfg.start);
    for k in 1..intervals {
        let target = total * k as f64 / intervals as f64;
        let seg = cumulative.partition_point(|&c| c < target).clamp(1, ARC_SEGMENTS);
        let (c0, c1) = (cumulative[seg - 1], cumulative[seg]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        let u = (seg as f64 - 1.0 + frac) / ARC_SEGMENTS as f64;
        let p = wave_point(cfg, u);
        nodes.push(GridState::new(p.x.clamp(0.0, bound), p.y.clamp(0.0, bound)));
    }
    nodes.push(cfg.end);
    WavePath {
        nodes,
        half_extent: cfg.half_extent,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardConfig {
    pub boundary: f64,
    pub final_target: f64,
    pub guide_c: f64,
    pub guide_eps: f64,
    pub idle_kappa: f64,
    pub idle_window: u32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            boundary: -50_000.0,
            final_target: 8000.0,
            guide_c: 100.0,
            guide_eps: 0.1,
            idle_kappa: 1.0,
            idle_window: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub size: f64,
    pub cells: usize,
    pub start: GridState,
    pub sigma_obs: f64,
    pub sigma_proc: f64,
    pub max_steps: u32,
    pub speeds: Vec<f64>,
    pub path: PathConfig,
    pub reward: RewardConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            size: 12.0,
            cells: 51,
            start: GridState::new(2.8, 2.8),
            sigma_obs: 0.05,
            sigma_proc: 0.07,
            max_steps: 100,
            speeds: vec![0.4, 0.9, 1.4],
            path: PathConfig::default(),
            reward: RewardConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TerminationReason {
    None,
    Boundary,
    FinalTarget,
    StepLimit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: GridState,
    pub observation: GridState,
    pub reward: f64,
    pub terminal: bool,
    pub reason: TerminationReason,
}

/// Mutable per-episode bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub state: GridState,
    /// Index of the next intermediate node to hit.
    pub next_node: usize,
    pub steps: u32,
    pub steps_since_hit: u32,
    pub done: bool,
}

/// What happened on a transition, as needed by the reward function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transition {
    Boundary,
    FinalTarget,
    /// Landed in the current next node; `distance_to_following` is measured
    /// from the landing point to the node after it.
    NodeHit { distance_to_following: f64 },
    Miss {
        steps_since_hit: u32,
        distance_to_final: f64,
    },
}

pub fn reward(t: &Transition, cfg: &RewardConfig) -> f64 {
    match *t {
        Transition::Boundary => cfg.boundary,
        Transition::FinalTarget => cfg.final_target,
        Transition::NodeHit {
            distance_to_following,
        } => cfg.guide_c / (distance_to_following + cfg.guide_eps),
        Transition::Miss {
            steps_since_hit,
            distance_to_final,
        } => {
            if steps_since_hit >= cfg.idle_window {
                -cfg.idle_kappa * distance_to_final
            } else {
                0.0
            }
        }
    }
}

/// `z = s + eta`, `eta ~ N(0, sigma^2 I)`. Not clamped to the domain.
pub fn observe<R: Rng + ?Sized>(s: &GridState, rng: &mut R, sigma: f64) -> GridState {
    if sigma == 0.0 {
        return *s;
    }
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    GridState::new(s.x + sigma * nx, s.y + sigma * ny)
}

#[derive(Clone, Debug)]
pub struct GridWorld {
    cfg: GridConfig,
    path: WavePath,
    actions: ActionSet,
}

impl GridWorld {
    pub fn new(cfg: GridConfig) -> Self {
        let path = generate_wave_path(&cfg.path, cfg.size);
        let actions = ActionSet::new(&cfg.speeds);
        GridWorld { cfg, path, actions }
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn path(&self) -> &WavePath {
        &self.path
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn cell_spacing(&self) -> f64 {
        self.cfg.size / (self.cfg.cells - 1) as f64
    }

    pub fn reset(&self) -> Episode {
        Episode {
            state: self.cfg.start,
            next_node: 0,
            steps: 0,
            steps_since_hit: 0,
            done: false,
        }
    }

    pub fn in_bounds(&self, s: &GridState) -> bool {
        (0.0..=self.cfg.size).contains(&s.x) && (0.0..=self.cfg.size).contains(&s.y)
    }

    /// Noise-free kinematics `s + v (cos θ, sin θ)`.
    pub fn kinematics(s: &GridState, a: &GridAction) -> GridState {
        let (dx, dy) = a.displacement();
        GridState::new(s.x + dx, s.y + dy)
    }

    /// Advances `ep` by one action.
    pub fn step<R: Rng + ?Sized>(&self, ep: &mut Episode, a: &GridAction, rng: &mut R) -> StepOutcome {
        debug_assert!(!ep.done, "step on a finished episode");
        let next = observe(&Self::kinematics(&ep.state, a), rng, self.cfg.sigma_proc);
        ep.steps += 1;

        let final_index = self.path.final_index();
        let transition = if !self.in_bounds(&next) {
            Transition::Boundary
        } else if self.path.in_box(final_index, &next) {
            Transition::FinalTarget
        } else if ep.next_node < final_index && self.path.in_box(ep.next_node, &next) {
            let following = self.path.nodes()[ep.next_node + 1];
            ep.next_node += 1;
            ep.steps_since_hit = 0;
            Transition::NodeHit {
                distance_to_following: next.distance(&following),
            }
        } else {
            ep.steps_since_hit += 1;
            Transition::Miss {
                steps_since_hit: ep.steps_since_hit,
                distance_to_final: next.distance(&self.path.final_node()),
            }
        };

        let reason = match transition {
            Transition::Boundary => TerminationReason::Boundary,
            Transition::FinalTarget => TerminationReason::FinalTarget,
            _ if ep.steps >= self.cfg.max_steps => TerminationReason::StepLimit,
            _ => TerminationReason::None,
        };
        let terminal = reason != TerminationReason::None;
        ep.state = next;
        ep.done = terminal;

        StepOutcome {
            next_state: next,
            observation: observe(&next, rng, self.cfg.sigma_obs),
            reward: reward(&transition, &self.cfg.reward),
            terminal,
            reason,
        }
    }

    /// Nearest lattice point per axis, clamped into the grid.
    pub fn discretize(&self, s: &GridState) -> (usize, usize) {
        let h = self.cell_spacing();
        let max = (self.cfg.cells - 1) as f64;
        let idx = |v: f64| (v / h).round().clamp(0.0, max) as usize;
        (idx(s.x), idx(s.y))
    }

    pub fn cell_center(&self, cell: (usize, usize)) -> GridState {
        let h = self.cell_spacing();
        GridState::new(cell.0 as f64 * h, cell.1 as f64 * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;
    use approx::assert_relative_eq;

    fn noiseless() -> GridWorld {
        GridWorld::new(GridConfig {
            sigma_obs: 0.0,
            sigma_proc: 0.0,
            ..GridConfig::default()
        })
    }

    fn action(speed: f64, heading: usize) -> GridAction {
        GridAction {
            speed,
            heading,
            index: 0,
        }
    }

    /// Arc length of the curve between parameters `a` and `b`, via a fine
    /// polyline independent of the generator's tabulation.
    fn arc_length(cfg: &PathConfig, a: f64, b: f64) -> f64 {
        let n = 4000;
        let mut len = 0.0;
        let mut prev = wave_point(cfg, a);
        for k in 1..=n {
            let p = wave_point(cfg, a + (b - a) * k as f64 / n as f64);
            len += p.distance(&prev);
            prev = p;
        }
        len
    }

    /// Curve parameter of a node, found by bisection on the along-diagonal
    /// coordinate (which is monotone in `u`).
    fn param_of(cfg: &PathConfig, s: &GridState) -> f64 {
        let (dx, dy) = (cfg.end.x - cfg.start.x, cfg.end.y - cfg.start.y);
        let len2 = dx * dx + dy * dy;
        ((s.x - cfg.start.x) * dx + (s.y - cfg.start.y) * dy) / len2
    }

    #[test]
    fn default_path_endpoints() {
        let path = generate_wave_path(&PathConfig::default(), 12.0);
        assert_eq!(path.nodes()[0], GridState::new(4.0, 4.0));
        assert_eq!(path.final_node(), GridState::new(11.4, 11.4));
    }

    #[test]
    fn default_path_spacing_by_independent_arc_length() {
        let cfg = PathConfig::default();
        let path = generate_wave_path(&cfg, 12.0);
        let params: Vec<f64> = path.nodes().iter().map(|n| param_of(&cfg, n)).collect();
        for w in params.windows(2) {
            assert!(w[1] > w[0], "nodes out of order");
            let d = arc_length(&cfg, w[0], w[1]);
            assert!((1.0..=1.2).contains(&d), "arc spacing {d}");
        }
        for n in path.nodes() {
            assert!((0.0..=12.0).contains(&n.x) && (0.0..=12.0).contains(&n.y), "{n:?}");
        }
    }

    #[test]
    fn flat_path_lies_on_diagonal() {
        let cfg = PathConfig {
            amplitude: 0.0,
            ..PathConfig::default()
        };
        let path = generate_wave_path(&cfg, 12.0);
        let gaps: Vec<f64> = path.nodes().windows(2).map(|w| w[0].distance(&w[1])).collect();
        for n in path.nodes() {
            assert_relative_eq!(n.x, n.y, epsilon = 1e-9);
        }
        for g in &gaps {
            assert_relative_eq!(*g, gaps[0], epsilon = 1e-6);
            assert!((1.0..=1.2).contains(g));
        }
    }

    #[test]
    fn deterministic_step() {
        let world = noiseless();
        let mut ep = world.reset();
        let mut rng = rng_for(&[0]);
        let out = world.step(&mut ep, &action(1.0, 0), &mut rng);
        assert_relative_eq!(out.next_state.x, 3.8, epsilon = 1e-12);
        assert_eq!(out.next_state.y, 2.8);
        assert!(!out.terminal);
        assert_eq!(out.reason, TerminationReason::None);
        assert_eq!(out.observation, out.next_state);
    }

    #[test]
    fn boundary_exit_terminates() {
        let world = noiseless();
        let mut ep = world.reset();
        ep.state = GridState::new(11.9, 6.0);
        let out = world.step(&mut ep, &action(1.4, 0), &mut rng_for(&[0]));
        assert!(out.terminal);
        assert_eq!(out.reason, TerminationReason::Boundary);
        assert_eq!(out.reward, -50_000.0);
    }

    #[test]
    fn final_target_terminates() {
        let world = noiseless();
        let mut ep = world.reset();
        ep.state = GridState::new(10.4, 11.4);
        let out = world.step(&mut ep, &action(1.0, 0), &mut rng_for(&[0]));
        assert_eq!(out.reason, TerminationReason::FinalTarget);
        assert_eq!(out.reward, 8000.0);
    }

    #[test]
    fn guiding_reward_formula() {
        let r = reward(
            &Transition::NodeHit {
                distance_to_following: 0.9,
            },
            &RewardConfig::default(),
        );
        assert_relative_eq!(r, 100.0, epsilon = 1e-12);
        assert_eq!(reward(&Transition::Boundary, &RewardConfig::default()), -50_000.0);
        assert_eq!(reward(&Transition::FinalTarget, &RewardConfig::default()), 8000.0);
    }

    #[test]
    fn idle_penalty_after_window() {
        let world = noiseless();
        let mut ep = world.reset();
        // Heading 180 degrees from the start, no node can be hit.
        let west = action(0.4, 4);
        let rewards: Vec<f64> = (0..3)
            .map(|_| world.step(&mut ep, &west, &mut rng_for(&[0])).reward)
            .collect();
        assert_eq!(rewards[0], 0.0);
        assert_eq!(rewards[1], 0.0);
        let expected = -ep.state.distance(&GridState::new(11.4, 11.4));
        assert_relative_eq!(rewards[2], expected, epsilon = 1e-12);
    }

    #[test]
    fn first_node_hit_advances_progress() {
        let world = noiseless();
        let mut ep = world.reset();
        let out = world.step(&mut ep, &action(1.4, 1), &mut rng_for(&[0]));
        assert_eq!(ep.next_node, 1);
        let following = world.path().nodes()[1];
        let expected = 100.0 / (out.next_state.distance(&following) + 0.1);
        assert_relative_eq!(out.reward, expected, epsilon = 1e-12);
    }

    #[test]
    fn step_limit_caps_episode() {
        let world = noiseless();
        let mut ep = world.reset();
        let mut rng = rng_for(&[0]);
        // Oscillate east/west so the agent never leaves the domain.
        let mut last = None;
        for t in 0..100 {
            let a = action(0.4, if t % 2 == 0 { 0 } else { 4 });
            let out = world.step(&mut ep, &a, &mut rng);
            if out.terminal {
                last = Some((t, out.reason));
                break;
            }
        }
        assert_eq!(last, Some((99, TerminationReason::StepLimit)));
    }

    #[test]
    fn observe_zero_sigma_and_no_clamping() {
        let mut rng = rng_for(&[11]);
        let s = GridState::new(12.0, 12.0);
        assert_eq!(observe(&s, &mut rng, 0.0), s);
        let exceeded = (0..100).any(|_| {
            let z = observe(&s, &mut rng, 0.05);
            z.x > 12.0 || z.y > 12.0
        });
        assert!(exceeded);
    }

    #[test]
    fn observe_noise_std() {
        let mut rng = rng_for(&[12]);
        let s = GridState::new(6.0, 6.0);
        let n = 100_000;
        let zs: Vec<GridState> = (0..n).map(|_| observe(&s, &mut rng, 0.05)).collect();
        for axis in 0..2 {
            let v: Vec<f64> = zs.iter().map(|z| if axis == 0 { z.x } else { z.y }).collect();
            let mean = v.iter().sum::<f64>() / n as f64;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            assert!((sd - 0.05).abs() / 0.05 < 0.05, "sd {sd}");
        }
    }

    #[test]
    fn discretize_examples_and_idempotence() {
        let world = noiseless();
        assert_eq!(world.discretize(&GridState::new(0.0, 0.0)), (0, 0));
        assert_eq!(world.discretize(&GridState::new(12.0, 12.0)), (50, 50));
        assert_eq!(world.discretize(&GridState::new(6.0, 6.0)), (25, 25));
        assert_eq!(world.discretize(&GridState::new(-0.3, 12.4)), (0, 50));
        for i in 0..51 {
            for j in 0..51 {
                assert_eq!(world.discretize(&world.cell_center((i, j))), (i, j));
            }
        }
    }

    #[test]
    fn action_table_layout() {
        let set = ActionSet::new(&[0.4, 0.9, 1.4]);
        assert_eq!(set.len(), 24);
        for (i, a) in set.iter().enumerate() {
            assert_eq!(a.index, i);
            assert!((0.4..=1.4).contains(&a.speed));
        }
        assert_eq!(set.get(0).heading, 0);
        assert_eq!(set.get(3).heading, 1);
    }
}
