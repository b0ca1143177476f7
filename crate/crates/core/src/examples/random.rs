use rand::Rng;

use crate::space::{Rational, SpacePresentation};

/// Parameters of the random sparse metric family used for oracle checks.
#[derive(Clone, Copy, Debug)]
pub struct RandomModelParams {
    pub min_points: usize,
    pub max_points: usize,
    pub min_weight: u32,
    pub max_weight: u32,
    pub max_chords: usize,
    /// Models in which some point has more than this many others within
    /// distance 3 are rejected, which keeps walk enumeration small.
    pub max_close_neighbors: usize,
}

impl Default for RandomModelParams {
    fn default() -> Self {
        RandomModelParams {
            min_points: 4,
            max_points: 12,
            min_weight: 1,
            max_weight: 5,
            max_chords: 2,
            max_close_neighbors: 4,
        }
    }
}

/// Shortest-path metric of a random weighted spanning tree plus a few chords,
/// based at point 0. Retries until the sparsity condition holds.
pub fn random_tree_model<R: Rng>(rng: &mut R, params: RandomModelParams) -> SpacePresentation {
    loop {
        let d = random_graph_metric(rng, params);
        let n = d.len();
        let crowded = (0..n).any(|v| (0..n).filter(|&u| u != v && d[u][v] <= 3).count() > params.max_close_neighbors);
        if crowded {
            continue;
        }
        let matrix = d.iter().map(|row| row.iter().map(|&x| Rational::integer(i64::from(x))).collect()).collect();
        return SpacePresentation::point_cloud(matrix, 0).expect("graph metrics are metrics");
    }
}

fn random_graph_metric<R: Rng>(rng: &mut R, params: RandomModelParams) -> Vec<Vec<u32>> {
    const INF: u32 = u32::MAX / 4;
    let n = rng.gen_range(params.min_points..=params.max_points);
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for v in 1..n {
        let p = rng.gen_range(0..v);
        let w = rng.gen_range(params.min_weight..=params.max_weight);
        d[v][p] = w;
        d[p][v] = w;
    }
    for _ in 0..rng.gen_range(0..=params.max_chords) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && d[a][b] == INF {
            let w = rng.gen_range(params.min_weight..=params.max_weight);
            d[a][b] = w;
            d[b][a] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}
