//! Node inventory. Nodes are numbered `0..total_nodes`; the idle set is the
//! single source of truth for what is claimable.

use std::collections::BTreeSet;

#[derive(Clone, Debug)]
pub struct ClusterState {
    pub total_nodes: u32,
    pub idle: BTreeSet<u32>,
}

impl ClusterState {
    pub fn new(total_nodes: u32) -> Self {
        ClusterState {
            total_nodes,
            idle: (0..total_nodes).collect(),
        }
    }

    pub fn idle_count(&self) -> u32 {
        self.idle.len() as u32
    }

    /// Claims an explicit node set. Fails if any node is not idle, which
    /// signals a double-allocation bug.
    pub fn claim(&mut self, nodes: &BTreeSet<u32>) -> Result<(), u32> {
        for &n in nodes {
            if !self.idle.contains(&n) {
                return Err(n);
            }
        }
        for n in nodes {
            self.idle.remove(n);
        }
        Ok(())
    }

    pub fn release(&mut self, nodes: &BTreeSet<u32>) {
        for &n in nodes {
            debug_assert!(n < self.total_nodes);
            self.idle.insert(n);
        }
    }

    /// Lowest-numbered idle nodes, for deterministic placement.
    pub fn lowest_idle(&self, count: u32) -> Option<BTreeSet<u32>> {
        if self.idle_count() < count {
            return None;
        }
        Some(self.idle.iter().copied().take(count as usize).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claim_and_release() {
        let mut c = ClusterState::new(4);
        let nodes = c.lowest_idle(2).unwrap();
        assert_eq!(nodes, BTreeSet::from([0, 1]));
        c.claim(&nodes).unwrap();
        assert_eq!(c.idle_count(), 2);
        // double claim fails
        assert_eq!(c.claim(&BTreeSet::from([1])), Err(1));
        c.release(&nodes);
        assert_eq!(c.idle_count(), 4);
    }

    #[test]
    fn lowest_idle_respects_capacity() {
        let c = ClusterState::new(3);
        assert!(c.lowest_idle(4).is_none());
    }
}
