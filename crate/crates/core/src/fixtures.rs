//! Seeded generators and named hypergraphs shared by tests, benches, and the CLI.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::hypergraph::Hypergraph;
use crate::nn::Dataset;

/// Two hyperedges of sizes 4 and 3 sharing two nodes.
pub fn overlapping_pair() -> Hypergraph {
    Hypergraph::parse("v0 v1 v2 v3\nv2 v3 v4").expect("valid fixture")
}

/// Three triangles on four nodes, all through `v0`.
pub fn hub_triangles() -> Hypergraph {
    Hypergraph::parse("v0 v1 v2\nv0 v2 v3\nv0 v1 v3").expect("valid fixture")
}

/// `num_edges` hyperedges over nodes `0..num_nodes`, sizes uniform in `sizes` (clamped to the
/// node count). Labels may repeat, so parallel hyperedges occur.
pub fn random_hypergraph(num_nodes: usize, num_edges: usize, sizes: std::ops::RangeInclusive<usize>, seed: u64) -> Hypergraph {
    assert!(num_nodes >= 2 && *sizes.start() >= 2, "hyperedges need at least two nodes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<usize> = (0..num_nodes).collect();
    let edges: Vec<Vec<usize>> = (0..num_edges)
        .map(|_| {
            let size = rng.gen_range(sizes.clone()).min(num_nodes);
            nodes.choose_multiple(&mut rng, size).copied().collect()
        })
        .collect();
    Hypergraph::from_index_edges(num_nodes, &edges).expect("valid random hypergraph")
}

/// Erdos-Renyi graph: each pair `v < w` is an edge with probability `p`.
pub fn random_graph(num_nodes: usize, p: f64, seed: u64) -> Hypergraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 0..num_nodes {
        for w in v + 1..num_nodes {
            if rng.gen_bool(p) {
                edges.push(vec![v, w]);
            }
        }
    }
    Hypergraph::from_index_edges(num_nodes, &edges).expect("valid random graph")
}

pub const TWO_BLOCK_RAW_DIM: usize = 8;

/// Node classification fixture with two equal classes.
///
/// Every hyperedge (sizes 3 to 5, two per node on average) lies inside one class. Features are
/// a class mean `+/- 0.7` along a fixed random unit direction plus standard normal noise, so a
/// single node is only weakly informative and neighborhood averaging pays off.
pub fn two_block_dataset(num_nodes: usize, seed: u64) -> Dataset {
    assert!(num_nodes >= 10 && num_nodes.is_multiple_of(2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = num_nodes / 2;
    let mut labels: Vec<usize> = (0..num_nodes).map(|v| usize::from(v >= half)).collect();
    labels.shuffle(&mut rng);
    let members: [Vec<usize>; 2] = [0, 1].map(|c| (0..num_nodes).filter(|&v| labels[v] == c).collect());

    let mut edges = Vec::new();
    for class_members in &members {
        for _ in 0..class_members.len() / 2 {
            let size = rng.gen_range(3..=5);
            edges.push(class_members.choose_multiple(&mut rng, size).copied().collect::<Vec<_>>());
        }
    }
    let hypergraph = Hypergraph::from_index_edges(num_nodes, &edges).expect("valid fixture");

    let direction: Vec<f64> = (0..TWO_BLOCK_RAW_DIM).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut features = DMatrix::zeros(num_nodes, TWO_BLOCK_RAW_DIM);
    for v in 0..num_nodes {
        let sign = if labels[v] == 0 { -0.7 } else { 0.7 };
        for k in 0..TWO_BLOCK_RAW_DIM {
            features[(v, k)] = sign * direction[k] / norm + rng.sample::<f64, _>(StandardNormal);
        }
    }
    Dataset::new(hypergraph, features, labels).expect("consistent fixture")
}
