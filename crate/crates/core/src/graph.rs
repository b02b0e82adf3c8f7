//! Undirected interconnection graphs over vertices `0..L`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a vertex outside 0..{2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("a cycle needs at least 3 vertices, got {0}")]
    CycleTooSmall(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterconnectionGraph {
    vertices: usize,
    /// Normalized `(lo, hi)` pairs, sorted and deduplicated.
    edges: Vec<(usize, usize)>,
}

impl InterconnectionGraph {
    pub fn new(vertices: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= vertices || b >= vertices {
                return Err(GraphError::VertexOutOfRange(a, b, vertices));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        Ok(Self {
            vertices,
            edges: norm,
        })
    }

    pub fn edgeless(vertices: usize) -> Self {
        Self {
            vertices,
            edges: Vec::new(),
        }
    }

    pub fn chain(vertices: usize) -> Self {
        let edges: Vec<_> = (1..vertices).map(|i| (i - 1, i)).collect();
        Self::new(vertices, &edges).expect("chain edges are valid")
    }

    pub fn cycle(vertices: usize) -> Result<Self, GraphError> {
        if vertices < 3 {
            return Err(GraphError::CycleTooSmall(vertices));
        }
        let mut edges: Vec<_> = (1..vertices).map(|i| (i - 1, i)).collect();
        edges.push((0, vertices - 1));
        Self::new(vertices, &edges)
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbors of `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices == 0 {
            return true;
        }
        let mut seen = vec![false; self.vertices];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_neighbors() {
        let g = InterconnectionGraph::cycle(5).unwrap();
        assert_eq!(g.edges().len(), 5);
        assert_eq!(g.neighbors(0), vec![1, 4]);
        assert_eq!(g.neighbors(4), vec![0, 3]);
        assert!(g.is_connected());
        assert!(InterconnectionGraph::cycle(2).is_err());
    }

    #[test]
    fn edges_are_normalized() {
        let g = InterconnectionGraph::new(3, &[(2, 1), (1, 2), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(g.has_edge(2, 1));
        assert!(!g.has_edge(0, 2));
        assert!(InterconnectionGraph::new(2, &[(0, 2)]).is_err());
        assert!(InterconnectionGraph::new(2, &[(1, 1)]).is_err());
        assert!(!InterconnectionGraph::edgeless(2).is_connected());
    }
}
