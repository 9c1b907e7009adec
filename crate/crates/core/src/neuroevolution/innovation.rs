use std::collections::HashMap;

/// Hands out innovation numbers for new connections and node ids for
/// connection splits. A structural event seen before gets its old number.
#[derive(Clone, Debug, Default)]
pub struct InnovationRegistry {
    next_innovation: u64,
    next_node: u32,
    connections: HashMap<(u32, u32), u64>,
    splits: HashMap<u64, u32>,
}

impl InnovationRegistry {
    /// `first_hidden` is the first id free for hidden nodes.
    pub fn new(first_hidden: u32) -> Self {
        InnovationRegistry {
            next_innovation: 0,
            next_node: first_hidden,
            connections: HashMap::new(),
            splits: HashMap::new(),
        }
    }

    pub fn connection(&mut self, from: u32, to: u32) -> u64 {
        let next = &mut self.next_innovation;
        *self.connections.entry((from, to)).or_insert_with(|| {
            let id = *next;
            *next += 1;
            id
        })
    }

    /// Node id for splitting connection `innovation`.
    pub fn split(&mut self, innovation: u64) -> u32 {
        let next = &mut self.next_node;
        *self.splits.entry(innovation).or_insert_with(|| {
            let id = *next;
            *next += 1;
            id
        })
    }

    /// A node id never handed out before.
    pub fn fresh_node(&mut self) -> u32 {
        let id = self.next_node;
        self.next_node += 1;
        id
    }

    pub fn innovations_issued(&self) -> u64 {
        self.next_innovation
    }
}
