use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::QubitId;

/// Coupling map: which qubit pairs support a direct two-qubit gate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    n_qubits: usize,
    edges: BTreeSet<(QubitId, QubitId)>,
    hub: Option<QubitId>,
}

impl Topology {
    /// Edges are unordered; out-of-range endpoints or self-loops are rejected.
    pub fn new(n_qubits: usize, edges: &[(QubitId, QubitId)], hub: Option<QubitId>) -> Option<Self> {
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n_qubits || b >= n_qubits || a == b {
                return None;
            }
            set.insert((a.min(b), a.max(b)));
        }
        if hub.is_some_and(|h| h >= n_qubits) {
            return None;
        }
        Some(Topology { n_qubits, edges: set, hub })
    }

    /// Five-qubit star with qubit 2 at the centre.
    pub fn spark() -> Self {
        Self::star(5, 2)
    }

    pub fn star(n_qubits: usize, hub: QubitId) -> Self {
        let edges: Vec<_> = (0..n_qubits).filter(|&q| q != hub).map(|q| (q, hub)).collect();
        Self::new(n_qubits, &edges, Some(hub)).expect("valid star")
    }

    pub fn ring(n_qubits: usize) -> Self {
        let edges: Vec<_> = (0..n_qubits).map(|q| (q, (q + 1) % n_qubits)).collect();
        Self::new(n_qubits, &edges, None).expect("valid ring")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn hub(&self) -> Option<QubitId> {
        self.hub
    }

    pub fn edges(&self) -> impl Iterator<Item = (QubitId, QubitId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: QubitId, b: QubitId) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, q: QubitId) -> Vec<QubitId> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| if a == q { Some(b) } else if b == q { Some(a) } else { None })
            .collect()
    }
}
