use std::collections::HashMap;

use super::genome::{Genome, NodeKind};
use crate::carworld::CarAction;
use crate::error::{Error, Result};

/// A genome compiled to a topologically ordered evaluation plan.
#[derive(Clone, Debug)]
pub struct FeedForward {
    num_inputs: usize,
    /// (slot, bias, incoming (source slot, weight)) in evaluation order.
    plan: Vec<(usize, f64, Vec<(usize, f64)>)>,
    output_slots: Vec<usize>,
    slots: usize,
}

impl FeedForward {
    /// Uses enabled connections only. Fails with a structural error when
    /// they contain a cycle.
    pub fn build(genome: &Genome) -> Result<Self> {
        let slot: HashMap<u32, usize> = genome
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, i))
            .collect();
        let n = genome.nodes.len();
        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for c in genome.connections.iter().filter(|c| c.enabled) {
            let (Some(&f), Some(&t)) = (slot.get(&c.from), slot.get(&c.to)) else {
                return Err(Error::Structure(format!(
                    "connection {} references a missing node",
                    c.innovation
                )));
            };
            incoming[t].push((f, c.weight));
            outgoing[f].push(t);
            indegree[t] += 1;
        }

        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        ready.reverse();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(i);
            for &t in &outgoing[i] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.push(t);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Structure("enabled connections form a cycle".into()));
        }

        let plan = order
            .into_iter()
            .filter(|&i| genome.nodes[i].kind != NodeKind::Input)
            .map(|i| (i, genome.nodes[i].bias, std::mem::take(&mut incoming[i])))
            .collect();
        let output_slots = genome
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeKind::Output)
            .map(|(i, _)| i)
            .collect();
        Ok(FeedForward {
            num_inputs: genome.num_inputs(),
            plan,
            output_slots,
            slots: n,
        })
    }

    /// Panics if `inputs.len()` differs from the genome's input count.
    pub fn activate(&self, inputs: &[f64]) -> Vec<f64> {
        assert_eq!(inputs.len(), self.num_inputs, "input length mismatch");
        let mut values = vec![0.0; self.slots];
        values[..self.num_inputs].copy_from_slice(inputs);
        for (slot, bias, incoming) in &self.plan {
            let sum: f64 = incoming.iter().map(|&(s, w)| w * values[s]).sum();
            values[*slot] = (sum + bias).tanh();
        }
        self.output_slots.iter().map(|&s| values[s]).collect()
    }
}

/// Argmax over the outputs with ties going to the lowest index, mapped onto
/// `CarAction::ALL`.
pub fn action_from_outputs(outputs: &[f64; 4]) -> CarAction {
    CarAction::ALL[crate::qlearn::argmax(outputs)]
}
