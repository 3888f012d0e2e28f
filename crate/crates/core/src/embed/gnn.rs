use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{GnnParams, Topology};

/// How the neighbourhood vector `h_N(v)` is formed before it is averaged
/// with the node's own vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    /// Sum of neighbour vectors.
    SumMean,
    /// Mean of neighbour vectors.
    Mean,
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `MEAN(h_v, h_N(v))` per depth.
    pub mixed: Vec<Array2<f64>>,
    /// Pre-activation per depth.
    pub pre: Vec<Array2<f64>>,
}

/// Sum (or mean) of neighbour rows; isolated nodes get the zero vector.
fn aggregate(topo: &Topology, h: &Array2<f64>, agg: Aggregator) -> Array2<f64> {
    let mut out = Array2::zeros(h.raw_dim());
    for (v, nbrs) in topo.adj.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let mut row = out.row_mut(v);
        for &u in nbrs {
            row += &h.row(u);
        }
        if agg == Aggregator::Mean {
            row /= nbrs.len() as f64;
        }
    }
    out
}

/// Transpose of [`aggregate`]: routes a gradient on `h_N` back to the rows it read.
fn aggregate_transpose(topo: &Topology, grad: &Array2<f64>, agg: Aggregator) -> Array2<f64> {
    let mut out = Array2::zeros(grad.raw_dim());
    for (v, nbrs) in topo.adj.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let scale = match agg {
            Aggregator::SumMean => 1.0,
            Aggregator::Mean => 1.0 / nbrs.len() as f64,
        };
        let g = grad.row(v);
        for &u in nbrs {
            out.row_mut(u).scaled_add(scale, &g);
        }
    }
    out
}

pub fn forward_cached(
    topo: &Topology,
    features: &Array2<f64>,
    params: &GnnParams,
    agg: Aggregator,
) -> (Array2<f64>, ForwardCache) {
    let mut h = features.clone();
    let mut cache = ForwardCache {
        mixed: Vec::with_capacity(params.depth()),
        pre: Vec::with_capacity(params.depth()),
    };
    for w in &params.weights {
        let mut mixed = aggregate(topo, &h, agg);
        mixed += &h;
        mixed *= 0.5;
        let pre = mixed.dot(&w.t());
        h = pre.mapv(|x| x.max(0.0));
        cache.mixed.push(mixed);
        cache.pre.push(pre);
    }
    (h, cache)
}

/// `h^{l+1} = ReLU(W^l * MEAN(h^l_v, h^l_N(v)))` for every depth; returns `h^L`.
pub fn forward_topology(topo: &Topology, features: &Array2<f64>, params: &GnnParams, agg: Aggregator) -> Array2<f64> {
    forward_cached(topo, features, params, agg).0
}

/// Gradients of a scalar loss with respect to each weight matrix, given the
/// loss gradient on the network output. Input features are treated as constants.
pub fn backward(
    topo: &Topology,
    params: &GnnParams,
    agg: Aggregator,
    cache: &ForwardCache,
    grad_out: &Array2<f64>,
) -> Vec<Array2<f64>> {
    let depth = params.depth();
    let mut grads = vec![Array2::zeros((0, 0)); depth];
    let mut g = grad_out.clone();
    for l in (0..depth).rev() {
        let pre = &cache.pre[l];
        ndarray::Zip::from(&mut g).and(pre).for_each(|gi, &p| {
            if p <= 0.0 {
                *gi = 0.0;
            }
        });
        grads[l] = g.t().dot(&cache.mixed[l]);
        if l == 0 {
            break;
        }
        let mut d_mixed = g.dot(&params.weights[l]);
        d_mixed *= 0.5;
        let through_nbrs = aggregate_transpose(topo, &d_mixed, agg);
        g = d_mixed + through_nbrs;
    }
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isolated_node_halves_its_feature() {
        let topo = Topology::new(1, vec![]);
        let f = array![[1.0, -2.0]];
        let w = array![[1.0, 0.0], [0.0, 1.0]];
        let params = GnnParams { weights: vec![w] };
        let out = forward_topology(&topo, &f, &params, Aggregator::SumMean);
        assert_eq!(out, array![[0.5, 0.0]]);
    }

    #[test]
    fn doubled_identity_with_equal_neighbour() {
        let topo = Topology::new(2, vec![(0, 1, 1.0)]);
        let f = array![[0.3, 1.5], [0.3, 1.5]];
        let params = GnnParams {
            weights: vec![Array2::eye(2) * 2.0],
        };
        let out = forward_topology(&topo, &f, &params, Aggregator::SumMean);
        assert_eq!(out, array![[0.6, 3.0], [0.6, 3.0]]);
    }

    #[test]
    fn mean_aggregator_divides_by_degree() {
        let topo = Topology::new(3, vec![(0, 1, 1.0), (0, 2, 1.0)]);
        let f = array![[0.0], [2.0], [4.0]];
        let params = GnnParams {
            weights: vec![Array2::eye(1)],
        };
        let sum = forward_topology(&topo, &f, &params, Aggregator::SumMean);
        let mean = forward_topology(&topo, &f, &params, Aggregator::Mean);
        assert_eq!(sum[[0, 0]], 3.0);
        assert_eq!(mean[[0, 0]], 1.5);
    }

    #[test]
    fn backward_matches_finite_differences_for_a_linear_readout() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let topo = Topology::new(5, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (1, 4, 1.0)]);
        let f = crate::embed::uniform_matrix(5, 3, 9);
        let params = GnnParams::init(3, 2, &mut rng);
        let probe = crate::embed::uniform_matrix(5, 3, 10);
        for agg in [Aggregator::SumMean, Aggregator::Mean] {
            let loss = |p: &GnnParams| (forward_topology(&topo, &f, p, agg) * &probe).sum();
            let (_, cache) = forward_cached(&topo, &f, &params, agg);
            let grads = backward(&topo, &params, agg, &cache, &probe);
            let eps = 1e-6;
            for (l, grad) in grads.iter().enumerate() {
                for idx in [(0, 0), (1, 2), (2, 1)] {
                    let mut p = params.clone();
                    p.weights[l][idx] += eps;
                    let up = loss(&p);
                    p.weights[l][idx] -= 2.0 * eps;
                    let down = loss(&p);
                    let fd = (up - down) / (2.0 * eps);
                    assert!((fd - grad[idx]).abs() < 1e-6, "{agg:?} l={l} {idx:?}: {fd} vs {}", grad[idx]);
                }
            }
        }
    }
}
