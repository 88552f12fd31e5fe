//! Skeleton graphs and their normalized adjacency
//! Â = D^(-1/2) (A + I) D^(-1/2).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the default 27-joint preset.
pub const UPPER_BODY_27: &str = "upper27";

/// Joint indices (0-based) for the `upper27` preset: 7 upper-body joints
/// followed by 10 joints per hand (wrist, thumb tip, then base/tip pairs
/// for index, middle, ring and pinky).
pub mod joint {
    pub const NOSE: usize = 0;
    pub const NECK: usize = 1;
    pub const R_SHOULDER: usize = 2;
    pub const R_ELBOW: usize = 3;
    pub const L_SHOULDER: usize = 4;
    pub const L_ELBOW: usize = 5;
    pub const TORSO: usize = 6;
    pub const R_WRIST: usize = 7;
    pub const L_WRIST: usize = 17;
    pub const HAND_JOINTS: usize = 10;
}

/// Edge list of the `upper27` preset, 1-based joint indices.
const UPPER_BODY_27_EDGES: [(u32, u32); 26] = [
    // body chain
    (1, 2),
    (2, 3),
    (3, 4),
    (2, 5),
    (5, 6),
    (2, 7),
    // arms into wrists
    (4, 8),
    (6, 18),
    // right hand: wrist 8, thumb tip, then base/tip pairs
    (8, 9),
    (8, 10),
    (10, 11),
    (8, 12),
    (12, 13),
    (8, 14),
    (14, 15),
    (8, 16),
    (16, 17),
    // left hand: wrist 18
    (18, 19),
    (18, 20),
    (20, 21),
    (18, 22),
    (22, 23),
    (18, 24),
    (24, 25),
    (18, 26),
    (26, 27),
];

/// A joint graph with its precomputed normalized adjacency (row-major
/// V×V, f64). Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonGraph {
    joints: usize,
    edges: Vec<(u32, u32)>,
    #[serde(skip)]
    adjacency: Vec<f64>,
}

impl SkeletonGraph {
    /// Build from an undirected edge list with 1-based joint indices.
    pub fn from_edges(joints: usize, edges: &[(u32, u32)]) -> Result<Self> {
        if joints == 0 {
            return Err(Error::Range("graph needs at least one joint".into()));
        }
        for &(a, b) in edges {
            if a < 1 || b < 1 || a as usize > joints || b as usize > joints {
                return Err(Error::Range(format!(
                    "edge ({a}, {b}) outside joint range [1, {joints}]"
                )));
            }
            if a == b {
                return Err(Error::Range(format!("self-loop on joint {a}")));
            }
        }
        let mut graph = SkeletonGraph {
            joints,
            edges: edges.to_vec(),
            adjacency: Vec::new(),
        };
        graph.adjacency = graph.normalized_adjacency();
        Ok(graph)
    }

    fn normalized_adjacency(&self) -> Vec<f64> {
        let v = self.joints;
        let mut a = vec![0.0f64; v * v];
        for i in 0..v {
            a[i * v + i] = 1.0;
        }
        for &(x, y) in &self.edges {
            let (i, j) = (x as usize - 1, y as usize - 1);
            a[i * v + j] = 1.0;
            a[j * v + i] = 1.0;
        }
        let degrees: Vec<f64> = (0..v)
            .map(|i| a[i * v..(i + 1) * v].iter().sum::<f64>())
            .collect();
        let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
        for i in 0..v {
            for j in 0..v {
                a[i * v + j] *= inv_sqrt[i] * inv_sqrt[j];
            }
        }
        a
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Row-major V×V normalized adjacency.
    pub fn adjacency(&self) -> &[f64] {
        &self.adjacency
    }

    /// Rebuild the adjacency after deserialization (serde skips it).
    pub fn rehydrate(mut self) -> Self {
        self.adjacency = self.normalized_adjacency();
        self
    }
}

/// Construct a named preset graph.
pub fn build_graph(preset: &str) -> Result<SkeletonGraph> {
    match preset {
        UPPER_BODY_27 => SkeletonGraph::from_edges(27, &UPPER_BODY_27_EDGES),
        other => Err(Error::Config(format!("unknown graph preset '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_path() {
        let g = SkeletonGraph::from_edges(2, &[(1, 2)]).unwrap();
        // A+I is all ones, both degrees 2, so every entry is 1/2.
        for &v in g.adjacency() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn isolated_node() {
        let g = SkeletonGraph::from_edges(1, &[]).unwrap();
        assert_eq!(g.adjacency(), &[1.0]);
    }

    #[test]
    fn default_preset_is_symmetric_with_positive_rows() {
        let g = build_graph(UPPER_BODY_27).unwrap();
        assert_eq!(g.joints(), 27);
        let v = g.joints();
        let adj = g.adjacency();
        for i in 0..v {
            let row_sum: f64 = adj[i * v..(i + 1) * v].iter().sum();
            assert!(row_sum > 0.0);
            for j in 0..v {
                assert!((adj[i * v + j] - adj[j * v + i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn invalid_edges_rejected() {
        assert!(matches!(
            SkeletonGraph::from_edges(3, &[(1, 4)]),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            SkeletonGraph::from_edges(3, &[(0, 1)]),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            SkeletonGraph::from_edges(3, &[(2, 2)]),
            Err(Error::Range(_))
        ));
        assert!(matches!(build_graph("nonsense"), Err(Error::Config(_))));
    }

    #[test]
    fn adjacency_is_deterministic() {
        let a = build_graph(UPPER_BODY_27).unwrap();
        let b = build_graph(UPPER_BODY_27).unwrap();
        assert_eq!(a.adjacency(), b.adjacency());
    }
}
