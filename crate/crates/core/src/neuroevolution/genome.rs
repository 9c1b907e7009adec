use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::innovation::InnovationRegistry;
use super::network::FeedForward;
use super::EvoConfig;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Input,
    Output,
    Hidden,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeGene {
    pub id: u32,
    pub kind: NodeKind,
    pub bias: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionGene {
    pub innovation: u64,
    pub from: u32,
    pub to: u32,
    pub weight: f64,
    pub enabled: bool,
}

/// Nodes sorted by id, connections sorted by innovation number.
///
/// Input nodes have ids `0..inputs`, outputs `inputs..inputs + outputs`.
/// All connection genes, enabled or not, form a DAG with no repeated
/// `(from, to)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Genome {
    pub nodes: Vec<NodeGene>,
    pub connections: Vec<ConnectionGene>,
    pub fitness: Option<f64>,
    inputs: usize,
    outputs: usize,
}

/// Which mutation classes fired on one call to [`Genome::mutate`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MutationLog {
    pub add_node: bool,
    pub delete_node: bool,
    pub add_connection: bool,
    pub delete_connection: bool,
}

impl Genome {
    /// Every input wired to every output, weights uniform in `[-1, 1]`,
    /// biases zero.
    pub fn initial<R: Rng + ?Sized>(
        cfg: &EvoConfig,
        registry: &mut InnovationRegistry,
        rng: &mut R,
    ) -> Self {
        let mut g = Genome::bare(cfg.num_inputs, cfg.num_outputs);
        for i in 0..cfg.num_inputs as u32 {
            for o in 0..cfg.num_outputs as u32 {
                let to = cfg.num_inputs as u32 + o;
                g.connections.push(ConnectionGene {
                    innovation: registry.connection(i, to),
                    from: i,
                    to,
                    weight: rng.random_range(-1.0..=1.0),
                    enabled: true,
                });
            }
        }
        g.connections.sort_by_key(|c| c.innovation);
        g
    }

    /// Input and output nodes only, no connections.
    pub fn bare(inputs: usize, outputs: usize) -> Self {
        let mut nodes = Vec::with_capacity(inputs + outputs);
        for id in 0..inputs as u32 {
            nodes.push(NodeGene {
                id,
                kind: NodeKind::Input,
                bias: 0.0,
            });
        }
        for o in 0..outputs as u32 {
            nodes.push(NodeGene {
                id: inputs as u32 + o,
                kind: NodeKind::Output,
                bias: 0.0,
            });
        }
        Genome {
            nodes,
            connections: Vec::new(),
            fitness: None,
            inputs,
            outputs,
        }
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs
    }

    pub fn node(&self, id: u32) -> Option<&NodeGene> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn has_node(&self, id: u32) -> bool {
        self.node(id).is_some()
    }

    pub fn connection(&self, from: u32, to: u32) -> Option<&ConnectionGene> {
        self.connections.iter().find(|c| c.from == from && c.to == to)
    }

    /// Inserts a hidden node, keeping ids sorted.
    pub fn insert_node(&mut self, node: NodeGene) {
        let pos = self.nodes.partition_point(|n| n.id < node.id);
        self.nodes.insert(pos, node);
    }

    /// Inserts a connection, keeping innovations sorted.
    pub fn insert_connection(&mut self, conn: ConnectionGene) {
        let pos = self
            .connections
            .partition_point(|c| c.innovation < conn.innovation);
        self.connections.insert(pos, conn);
    }

    pub fn network(&self) -> Result<FeedForward> {
        FeedForward::build(self)
    }

    pub fn activate(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.network()?.activate(inputs))
    }

    /// Whether `to` can reach `from` through any connection gene, i.e.
    /// whether adding `from -> to` would close a cycle.
    pub fn creates_cycle(&self, from: u32, to: u32) -> bool {
        if from == to {
            return true;
        }
        let mut stack = vec![to];
        let mut seen = vec![to];
        while let Some(n) = stack.pop() {
            for c in self.connections.iter().filter(|c| c.from == n) {
                if c.to == from {
                    return true;
                }
                if !seen.contains(&c.to) {
                    seen.push(c.to);
                    stack.push(c.to);
                }
            }
        }
        false
    }

    /// Checks the structural invariants. Used by tests and debug assertions.
    pub fn is_well_formed(&self) -> bool {
        let inputs = self.nodes.iter().filter(|n| n.kind == NodeKind::Input).count();
        let outputs = self.nodes.iter().filter(|n| n.kind == NodeKind::Output).count();
        if inputs != self.inputs || outputs != self.outputs {
            return false;
        }
        if self.nodes.windows(2).any(|w| w[0].id >= w[1].id)
            || self.connections.windows(2).any(|w| w[0].innovation >= w[1].innovation)
        {
            return false;
        }
        for (i, c) in self.connections.iter().enumerate() {
            let Some(to) = self.node(c.to) else { return false };
            if !self.has_node(c.from) || to.kind == NodeKind::Input {
                return false;
            }
            if self.connections[..i].iter().any(|d| d.from == c.from && d.to == c.to) {
                return false;
            }
        }
        self.network().is_ok() && self.all_genes_acyclic()
    }

    fn all_genes_acyclic(&self) -> bool {
        let mut probe = self.clone();
        for c in &mut probe.connections {
            c.enabled = true;
        }
        probe.network().is_ok()
    }

    /// Applies each mutation class with its configured probability.
    pub fn mutate<R: Rng + ?Sized>(
        &mut self,
        registry: &mut InnovationRegistry,
        cfg: &EvoConfig,
        rng: &mut R,
    ) -> MutationLog {
        let mut log = MutationLog::default();
        if rng.random::<f64>() < cfg.node_add_prob {
            log.add_node = true;
            self.mutate_add_node(registry, rng);
        }
        if rng.random::<f64>() < cfg.node_delete_prob {
            log.delete_node = true;
            self.mutate_delete_node(rng);
        }
        if rng.random::<f64>() < cfg.conn_add_prob {
            log.add_connection = true;
            self.mutate_add_connection(registry, rng);
        }
        if rng.random::<f64>() < cfg.conn_delete_prob {
            log.delete_connection = true;
            self.mutate_delete_connection(rng);
        }
        for c in &mut self.connections {
            if rng.random::<f64>() < cfg.weight_mutate_rate {
                c.weight = perturb(c.weight, cfg, rng);
            }
        }
        for n in self.nodes.iter_mut().filter(|n| n.kind != NodeKind::Input) {
            if rng.random::<f64>() < cfg.bias_mutate_rate {
                n.bias = perturb(n.bias, cfg, rng);
            }
        }
        self.fitness = None;
        debug_assert!(self.is_well_formed(), "{self:?} {log:?}");
        log
    }

    /// Splits a random enabled connection `a -> b` into `a -> h -> b`.
    /// The new in-weight is 1, the out-weight inherits the old weight.
    pub fn mutate_add_node<R: Rng + ?Sized>(&mut self, registry: &mut InnovationRegistry, rng: &mut R) {
        let enabled: Vec<usize> = (0..self.connections.len())
            .filter(|&i| self.connections[i].enabled)
            .collect();
        let Some(&idx) = enabled.choose(rng) else { return };
        let old = self.connections[idx].clone();
        self.connections[idx].enabled = false;
        let mut hidden = registry.split(old.innovation);
        if self.has_node(hidden) {
            hidden = registry.fresh_node();
        }
        self.insert_node(NodeGene {
            id: hidden,
            kind: NodeKind::Hidden,
            bias: 0.0,
        });
        self.insert_connection(ConnectionGene {
            innovation: registry.connection(old.from, hidden),
            from: old.from,
            to: hidden,
            weight: 1.0,
            enabled: true,
        });
        self.insert_connection(ConnectionGene {
            innovation: registry.connection(hidden, old.to),
            from: hidden,
            to: old.to,
            weight: old.weight,
            enabled: true,
        });
    }

    /// Removes a random hidden node together with every connection touching it.
    pub fn mutate_delete_node<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let hidden: Vec<u32> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Hidden)
            .map(|n| n.id)
            .collect();
        let Some(&id) = hidden.choose(rng) else { return };
        self.nodes.retain(|n| n.id != id);
        self.connections.retain(|c| c.from != id && c.to != id);
    }

    /// Picks one random candidate pair; adds it if new and acyclic,
    /// re-enables it if present but disabled.
    pub fn mutate_add_connection<R: Rng + ?Sized>(
        &mut self,
        registry: &mut InnovationRegistry,
        rng: &mut R,
    ) {
        let sources: Vec<u32> = self
            .nodes
            .iter()
            .filter(|n| n.kind != NodeKind::Output)
            .map(|n| n.id)
            .collect();
        let targets: Vec<u32> = self
            .nodes
            .iter()
            .filter(|n| n.kind != NodeKind::Input)
            .map(|n| n.id)
            .collect();
        let (Some(&from), Some(&to)) = (sources.choose(rng), targets.choose(rng)) else {
            return;
        };
        if let Some(pos) = self.connections.iter().position(|c| c.from == from && c.to == to) {
            self.connections[pos].enabled = true;
            return;
        }
        if self.creates_cycle(from, to) {
            return;
        }
        self.insert_connection(ConnectionGene {
            innovation: registry.connection(from, to),
            from,
            to,
            weight: rng.random_range(-1.0..=1.0),
            enabled: true,
        });
    }

    pub fn mutate_delete_connection<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.connections.is_empty() {
            return;
        }
        let idx = rng.random_range(0..self.connections.len());
        self.connections.remove(idx);
    }
}

fn perturb<R: Rng + ?Sized>(value: f64, cfg: &EvoConfig, rng: &mut R) -> f64 {
    let v = if rng.random::<f64>() < cfg.weight_replace_prob {
        rng.random_range(-cfg.weight_replace_range..=cfg.weight_replace_range)
    } else {
        let n: f64 = rng.sample(StandardNormal);
        value + cfg.weight_perturb_sigma * n
    };
    v.clamp(-cfg.weight_limit, cfg.weight_limit)
}

/// Aligns connection genes by innovation number. Matching genes come from a
/// random parent; disjoint and excess genes come from `fitter`. A gene
/// disabled in either parent stays disabled unless re-enabled with
/// probability `cfg.reenable_prob`.
pub fn crossover<R: Rng + ?Sized>(fitter: &Genome, other: &Genome, cfg: &EvoConfig, rng: &mut R) -> Genome {
    let mut child = fitter.clone();
    child.fitness = None;
    for gene in &mut child.connections {
        let Ok(j) = other
            .connections
            .binary_search_by_key(&gene.innovation, |c| c.innovation)
        else {
            continue;
        };
        let partner = &other.connections[j];
        if rng.random::<bool>() {
            gene.weight = partner.weight;
        }
        let disabled_somewhere = !gene.enabled || !partner.enabled;
        gene.enabled = if disabled_somewhere {
            rng.random::<f64>() < cfg.reenable_prob
        } else {
            true
        };
    }
    for node in &mut child.nodes {
        if let Some(p) = other.node(node.id) {
            if rng.random::<bool>() {
                node.bias = p.bias;
            }
        }
    }
    child
}

/// `c1 E / N + c2 D / N + c3 W`, with `N = 1` when both genomes have fewer
/// than 20 connection genes.
pub fn compatibility_distance(a: &Genome, b: &Genome, cfg: &EvoConfig) -> f64 {
    let (ga, gb) = (&a.connections, &b.connections);
    if ga.is_empty() && gb.is_empty() {
        return 0.0;
    }
    let max_a = ga.last().map_or(0, |c| c.innovation);
    let max_b = gb.last().map_or(0, |c| c.innovation);
    let (mut i, mut j) = (0, 0);
    let (mut excess, mut disjoint, mut matching) = (0usize, 0usize, 0usize);
    let mut weight_diff = 0.0;
    let classify = |innovation: u64, other_max: u64, other_empty: bool| {
        other_empty || innovation > other_max
    };
    while i < ga.len() || j < gb.len() {
        match (ga.get(i), gb.get(j)) {
            (Some(x), Some(y)) if x.innovation == y.innovation => {
                matching += 1;
                weight_diff += (x.weight - y.weight).abs();
                i += 1;
                j += 1;
            }
            (Some(x), y) if y.is_none_or(|y| x.innovation < y.innovation) => {
                if classify(x.innovation, max_b, gb.is_empty()) {
                    excess += 1;
                } else {
                    disjoint += 1;
                }
                i += 1;
            }
            (_, Some(y)) => {
                if classify(y.innovation, max_a, ga.is_empty()) {
                    excess += 1;
                } else {
                    disjoint += 1;
                }
                j += 1;
            }
            (None, None) => unreachable!(),
            _ => unreachable!(),
        }
    }
    let n = ga.len().max(gb.len());
    let n = if n < 20 { 1.0 } else { n as f64 };
    let mean_w = if matching > 0 {
        weight_diff / matching as f64
    } else {
        0.0
    };
    cfg.c1 * excess as f64 / n + cfg.c2 * disjoint as f64 / n + cfg.c3 * mean_w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;
    use approx::assert_relative_eq;

    fn car_cfg() -> EvoConfig {
        EvoConfig::default()
    }

    fn single_link(weight: f64) -> Genome {
        let mut g = Genome::bare(5, 4);
        g.connections.push(ConnectionGene {
            innovation: 0,
            from: 0,
            to: 5,
            weight,
            enabled: true,
        });
        g
    }

    #[test]
    fn zero_network_outputs_zero() {
        let cfg = car_cfg();
        let mut reg = InnovationRegistry::new(9);
        let mut g = Genome::initial(&cfg, &mut reg, &mut rng_for(&[0]));
        g.connections.iter_mut().for_each(|c| c.weight = 0.0);
        assert_eq!(g.activate(&[0.3, 0.1, 0.9, 0.5, 0.2]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn single_connection_activation() {
        let g = single_link(1.0);
        let out = g.activate(&[0.5, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(out[0], 0.5f64.tanh(), epsilon = 1e-15);
        assert_relative_eq!(out[0], 0.4621, epsilon = 1e-4);

        let mut off = g.clone();
        off.connections[0].enabled = false;
        assert_eq!(off.activate(&[0.5, 0.0, 0.0, 0.0, 0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn zero_rates_leave_genome_unchanged() {
        let cfg = EvoConfig {
            conn_add_prob: 0.0,
            conn_delete_prob: 0.0,
            node_add_prob: 0.0,
            node_delete_prob: 0.0,
            weight_mutate_rate: 0.0,
            bias_mutate_rate: 0.0,
            ..EvoConfig::default()
        };
        let mut reg = InnovationRegistry::new(9);
        let mut rng = rng_for(&[1]);
        let g = Genome::initial(&cfg, &mut reg, &mut rng);
        let mut m = g.clone();
        let log = m.mutate(&mut reg, &cfg, &mut rng);
        assert_eq!(log, MutationLog::default());
        assert_eq!(m, g);
    }

    #[test]
    fn split_semantics() {
        let mut g = Genome::bare(5, 4);
        let mut reg = InnovationRegistry::new(9);
        let inn = reg.connection(0, 5);
        g.connections.push(ConnectionGene {
            innovation: inn,
            from: 0,
            to: 5,
            weight: 0.7,
            enabled: true,
        });
        g.mutate_add_node(&mut reg, &mut rng_for(&[2]));
        assert!(!g.connection(0, 5).unwrap().enabled);
        let hidden = g.nodes.iter().find(|n| n.kind == NodeKind::Hidden).unwrap().id;
        assert_eq!(g.connection(0, hidden).unwrap().weight, 1.0);
        assert_eq!(g.connection(hidden, 5).unwrap().weight, 0.7);
        assert!(g.is_well_formed());
    }

    #[test]
    fn add_connection_attempt_rate() {
        let cfg = EvoConfig::default();
        let mut reg = InnovationRegistry::new(9);
        let mut rng = rng_for(&[3]);
        let mut g = Genome::initial(&cfg, &mut reg, &mut rng);
        let mut attempts = 0;
        for _ in 0..10_000 {
            let log = g.mutate(&mut reg, &cfg, &mut rng);
            attempts += usize::from(log.add_connection);
        }
        assert!((attempts as i64 - 5000).abs() <= 150, "attempts {attempts}");
        assert!(g.is_well_formed());
    }

    #[test]
    fn distance_examples() {
        let cfg = EvoConfig::default();
        let a = single_link(0.5);
        assert_eq!(compatibility_distance(&a, &a, &cfg), 0.0);

        let mut longer = a.clone();
        longer.connections.push(ConnectionGene {
            innovation: 1,
            from: 1,
            to: 5,
            weight: 0.5,
            enabled: true,
        });
        assert_relative_eq!(compatibility_distance(&longer, &a, &cfg), 1.0);

        let b = single_link(1.5);
        assert_relative_eq!(compatibility_distance(&a, &b, &cfg), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn distance_counts_disjoint_and_excess() {
        let cfg = EvoConfig::default();
        let gene = |innovation, from| ConnectionGene {
            innovation,
            from,
            to: 5,
            weight: 0.0,
            enabled: true,
        };
        let mut a = Genome::bare(5, 4);
        a.connections = vec![gene(0, 0), gene(2, 2)];
        let mut b = Genome::bare(5, 4);
        b.connections = vec![gene(0, 0), gene(1, 1), gene(3, 3), gene(4, 4)];
        // Disjoint: 2 (in a), 1 (in b). Excess: 3, 4 (in b).
        assert_relative_eq!(compatibility_distance(&a, &b, &cfg), 2.0 + 2.0);
        assert_relative_eq!(compatibility_distance(&b, &a, &cfg), 4.0);
    }

    #[test]
    fn crossover_takes_structure_from_fitter() {
        let cfg = EvoConfig::default();
        let mut reg = InnovationRegistry::new(9);
        let mut rng = rng_for(&[4]);
        let base = Genome::initial(&cfg, &mut reg, &mut rng);
        let mut fitter = base.clone();
        fitter.mutate_add_node(&mut reg, &mut rng);
        let mut other = base.clone();
        other.mutate_add_node(&mut reg, &mut rng);
        other.mutate_add_node(&mut reg, &mut rng);
        for _ in 0..50 {
            let child = crossover(&fitter, &other, &cfg, &mut rng);
            let innov: Vec<u64> = child.connections.iter().map(|c| c.innovation).collect();
            let expect: Vec<u64> = fitter.connections.iter().map(|c| c.innovation).collect();
            assert_eq!(innov, expect);
            assert!(child.is_well_formed());
        }
    }
}
