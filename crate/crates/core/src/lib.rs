//! Analysis of the signum consensus protocol
//! `x_i' = d_i + sum_j w_ji * sgn(x_j - x_i)` on weighted digraphs.
//!
//! The crate computes autonomy and polarization indices, decides strong
//! consensus, simulates disturbed trajectories and checks sampled
//! trajectories against the Filippov inclusion of the protocol.

pub mod bnb;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod filippov;
pub mod graph;
pub mod indices;
pub mod preset;
pub mod svg;
pub mod trace;

pub use error::{Error, Result};
pub use graph::{load_graph, random_graph, save_graph, split_nodes, NodeSet, SplitMap, WeightedDigraph};
pub use indices::{ExtendedReal, Method, PolarizationResult};

#[cfg(test)]
pub(crate) mod testing {
    use crate::graph::WeightedDigraph;

    pub fn example2() -> WeightedDigraph {
        WeightedDigraph::from_rows(&[&[0.0, 2.0, 0.0], &[3.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]).unwrap()
    }

    pub fn mutual_pair() -> WeightedDigraph {
        WeightedDigraph::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    pub fn two_pairs() -> WeightedDigraph {
        let mut w = vec![0.0; 16];
        for (j, i) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
            w[j * 4 + i] = 1.0;
        }
        WeightedDigraph::from_matrix(4, w).unwrap()
    }

    pub fn k_complete(n: usize) -> WeightedDigraph {
        let w = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { 1.0 }).collect();
        WeightedDigraph::from_matrix(n, w).unwrap()
    }
}
