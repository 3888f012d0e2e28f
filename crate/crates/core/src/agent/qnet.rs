use fixedbitset::FixedBitSet;
use ndarray::{Array1, Array2};
use rand::Rng;

use super::Transition;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Value network `q(s, v) = s . (theta2 * ReLU(theta1 * z_v))` and its
/// target copy.
#[derive(Clone, Debug, PartialEq)]
pub struct QNetParams {
    /// `2d x d`
    pub theta1: Array2<f64>,
    /// `d x 2d`
    pub theta2: Array2<f64>,
    pub target1: Array2<f64>,
    pub target2: Array2<f64>,
}

impl QNetParams {
    /// Glorot-uniform weights; the target starts as a copy.
    pub fn init(d: usize, rng: &mut impl Rng) -> Self {
        let a = (6.0 / (3 * d) as f64).sqrt();
        let theta1 = Array2::from_shape_simple_fn((2 * d, d), || rng.random_range(-a..a));
        let theta2 = Array2::from_shape_simple_fn((d, 2 * d), || rng.random_range(-a..a));
        QNetParams {
            target1: theta1.clone(),
            target2: theta2.clone(),
            theta1,
            theta2,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta1.ncols()
    }

    /// Copies the online weights into the target network.
    pub fn sync(&mut self) {
        self.target1.assign(&self.theta1);
        self.target2.assign(&self.theta2);
    }

    pub fn is_finite(&self) -> bool {
        [&self.theta1, &self.theta2, &self.target1, &self.target2]
            .iter()
            .all(|m| m.iter().all(|x| x.is_finite()))
    }

    /// Order-sensitive hash of every weight bit pattern.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for m in [&self.theta1, &self.theta2, &self.target1, &self.target2] {
            for x in m.iter() {
                h ^= x.to_bits();
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    pub(crate) fn check_dim(&self, z: &EmbeddingMatrix) -> Result<()> {
        let d = z.dim();
        if self.theta1.dim() != (2 * d, d) || self.theta2.dim() != (d, 2 * d) {
            return Err(Error::Shape {
                what: "q-network",
                expected: format!("theta1 {}x{d}, theta2 {d}x{}", 2 * d, 2 * d),
                found: format!("theta1 {:?}, theta2 {:?}", self.theta1.dim(), self.theta2.dim()),
            });
        }
        Ok(())
    }
}

/// Per-node action features `theta2 * ReLU(theta1 * z_v)`, one row per node.
pub fn action_features(z: &Array2<f64>, theta1: &Array2<f64>, theta2: &Array2<f64>) -> Array2<f64> {
    z.dot(&theta1.t()).mapv(|x| x.max(0.0)).dot(&theta2.t())
}

/// Mean of the embedding columns of the nodes not in `removed`.
pub fn pooled_state(z: &EmbeddingMatrix, removed: &[NodeId]) -> Result<Array1<f64>> {
    let n = z.node_count();
    let mut skip = FixedBitSet::with_capacity(n);
    for &v in removed {
        if v >= n {
            return Err(Error::NodeOutOfRange { id: v, len: n });
        }
        skip.insert(v);
    }
    let remaining = n - skip.count_ones(..);
    if remaining == 0 {
        return Err(Error::Empty("pooled state: every node has been removed"));
    }
    let mut s = Array1::zeros(z.dim());
    for v in (0..n).filter(|&v| !skip.contains(v)) {
        s += &z.column(v);
    }
    Ok(s / remaining as f64)
}

/// Scores every node; nodes with `alive[v] == false` get `-inf`.
pub fn q_values(z: &EmbeddingMatrix, s: &Array1<f64>, params: &QNetParams, alive: &[bool]) -> Result<Vec<f64>> {
    params.check_dim(z)?;
    let phi = action_features(z.node_major(), &params.theta1, &params.theta2);
    Ok(masked_scores(&phi, s, alive))
}

pub(crate) fn masked_scores(phi: &Array2<f64>, s: &Array1<f64>, alive: &[bool]) -> Vec<f64> {
    phi.dot(s)
        .iter()
        .zip(alive)
        .map(|(&q, &a)| if a { q } else { f64::NEG_INFINITY })
        .collect()
}

/// Lowest-id argmax over alive nodes.
pub fn argmax_alive(scores: &[f64], alive: &[bool]) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for (v, (&q, &a)) in scores.iter().zip(alive).enumerate() {
        if a && best.is_none_or(|(_, b)| q > b) {
            best = Some((v, q));
        }
    }
    best.map(|(v, _)| v)
}

/// Epsilon-greedy choice among alive nodes.
pub fn select_action(scores: &[f64], epsilon: f64, rng: &mut impl Rng, alive: &[bool]) -> Result<NodeId> {
    let greedy = argmax_alive(scores, alive).ok_or(Error::Empty("no alive node to select"))?;
    if rng.random::<f64>() >= epsilon {
        return Ok(greedy);
    }
    let count = alive.iter().filter(|a| **a).count();
    let pick = rng.random_range(0..count);
    Ok(alive
        .iter()
        .enumerate()
        .filter(|(_, a)| **a)
        .nth(pick)
        .map(|(v, _)| v)
        .expect("pick < count"))
}

/// Gradients of the online weights.
#[derive(Clone, Debug, PartialEq)]
pub struct QGrads {
    pub theta1: Array2<f64>,
    pub theta2: Array2<f64>,
}

impl QGrads {
    pub fn norm(&self) -> f64 {
        self.theta1
            .iter()
            .chain(self.theta2.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Bootstrap target `r + gamma * max_v qhat(s', v)`; just `r` when terminal
/// or when no node is alive in `s'`.
fn target(t: &Transition, gamma: f64, target_phi: &Array2<f64>) -> f64 {
    if t.done || gamma == 0.0 {
        return t.r;
    }
    let next = t
        .next_alive
        .ones()
        .map(|v| target_phi.row(v).dot(&t.s_next))
        .fold(f64::NEG_INFINITY, f64::max);
    if next.is_finite() {
        t.r + gamma * next
    } else {
        t.r
    }
}

/// Mean squared TD error and its gradient, with target features precomputed.
pub(crate) fn td_loss_grad_with(
    z: &Array2<f64>,
    batch: &[&Transition],
    params: &QNetParams,
    gamma: f64,
    target_phi: &Array2<f64>,
) -> Result<(f64, QGrads)> {
    if batch.is_empty() {
        return Err(Error::Empty("td loss batch"));
    }
    let scale = 2.0 / batch.len() as f64;
    let mut g1 = Array2::zeros(params.theta1.raw_dim());
    let mut g2 = Array2::zeros(params.theta2.raw_dim());
    let mut loss = 0.0;
    for t in batch {
        let zv = z.row(t.action);
        let pre = params.theta1.dot(&zv);
        let hidden = pre.mapv(|x| x.max(0.0));
        let out = params.theta2.dot(&hidden);
        let q = out.dot(&t.s);
        let delta = q - target(t, gamma, target_phi);
        loss += delta * delta;

        let c = scale * delta;
        // d q / d theta2 = s h^T
        for (i, si) in t.s.iter().enumerate() {
            g2.row_mut(i).scaled_add(c * si, &hidden);
        }
        let mut d_pre = params.theta2.t().dot(&t.s) * c;
        ndarray::Zip::from(&mut d_pre).and(&pre).for_each(|d, &p| {
            if p <= 0.0 {
                *d = 0.0;
            }
        });
        for (i, di) in d_pre.iter().enumerate() {
            if *di != 0.0 {
                g1.row_mut(i).scaled_add(*di, &zv);
            }
        }
    }
    Ok((
        loss / batch.len() as f64,
        QGrads {
            theta1: g1,
            theta2: g2,
        },
    ))
}

/// Mean over the batch of `(target - q(s, a))^2` with the target network
/// supplying the bootstrap term.
pub fn td_loss(z: &EmbeddingMatrix, batch: &[&Transition], params: &QNetParams, gamma: f64) -> Result<f64> {
    td_loss_grad(z, batch, params, gamma).map(|(l, _)| l)
}

/// [`td_loss`] together with its gradient with respect to `theta1`, `theta2`.
pub fn td_loss_grad(z: &EmbeddingMatrix, batch: &[&Transition], params: &QNetParams, gamma: f64) -> Result<(f64, QGrads)> {
    params.check_dim(z)?;
    let target_phi = action_features(z.node_major(), &params.target1, &params.target2);
    td_loss_grad_with(z.node_major(), batch, params, gamma, &target_phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Provenance;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn emb(data: Array2<f64>) -> EmbeddingMatrix {
        EmbeddingMatrix::new(data, Provenance::Random).unwrap()
    }

    #[test]
    fn pooled_state_cases() {
        let z = emb(array![[1.0, 2.0], [3.0, 6.0]]);
        assert_eq!(pooled_state(&z, &[]).unwrap(), array![2.0, 4.0]);
        assert_eq!(pooled_state(&z, &[0]).unwrap(), array![3.0, 6.0]);
        assert!(pooled_state(&z, &[0, 1]).is_err());
        assert!(pooled_state(&z, &[2]).is_err());
    }

    #[test]
    fn zero_weights_or_state_give_zero_scores() {
        let z = emb(crate::embed::uniform_matrix(5, 3, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = QNetParams::init(3, &mut rng);
        let alive = vec![true; 5];
        let s0 = Array1::zeros(3);
        assert!(q_values(&z, &s0, &p, &alive).unwrap().iter().all(|&q| q == 0.0));
        p.theta1.fill(0.0);
        p.theta2.fill(0.0);
        let s = pooled_state(&z, &[]).unwrap();
        assert!(q_values(&z, &s, &p, &alive).unwrap().iter().all(|&q| q == 0.0));
    }

    #[test]
    fn masked_nodes_score_negative_infinity() {
        let z = emb(crate::embed::uniform_matrix(3, 2, 1));
        let p = QNetParams::init(2, &mut ChaCha8Rng::seed_from_u64(0));
        let s = pooled_state(&z, &[]).unwrap();
        let q = q_values(&z, &s, &p, &[true, false, true]).unwrap();
        assert_eq!(q[1], f64::NEG_INFINITY);
        assert!(q[0].is_finite());
        assert!(q_values(&emb(Array2::zeros((3, 3))), &Array1::zeros(3), &p, &[true; 3]).is_err());
    }

    #[test]
    fn ties_go_to_the_lowest_id() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let scores = [0.5, 2.0, 2.0, 1.0];
        assert_eq!(select_action(&scores, 0.0, &mut rng, &[true; 4]).unwrap(), 1);
        assert_eq!(select_action(&scores, 0.0, &mut rng, &[true, false, true, true]).unwrap(), 2);
        assert!(select_action(&scores, 0.5, &mut rng, &[false; 4]).is_err());
    }

    #[test]
    fn random_choice_never_picks_dead_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alive = [false, true, false, true, true];
        for _ in 0..500 {
            let v = select_action(&[0.0; 5], 1.0, &mut rng, &alive).unwrap();
            assert!(alive[v]);
        }
    }

    fn transition(s: Array1<f64>, action: NodeId, r: f64, done: bool, n: usize) -> Transition {
        let mut next_alive = FixedBitSet::with_capacity(n);
        next_alive.insert_range(..);
        Transition {
            s_next: s.clone(),
            s,
            action,
            r,
            done,
            next_alive,
        }
    }

    #[test]
    fn terminal_transition_with_zero_q() {
        let z = emb(crate::embed::uniform_matrix(2, 2, 1));
        let mut p = QNetParams::init(2, &mut ChaCha8Rng::seed_from_u64(0));
        p.theta2.fill(0.0);
        let t = transition(array![1.0, 1.0], 0, 5.0, true, 2);
        assert_eq!(td_loss(&z, &[&t], &p, 0.99).unwrap(), 25.0);
        assert!(td_loss(&z, &[], &p, 0.99).is_err());
    }

    #[test]
    fn exact_q_with_no_discount_gives_zero_loss() {
        let z = emb(crate::embed::uniform_matrix(4, 3, 2));
        let p = QNetParams::init(3, &mut ChaCha8Rng::seed_from_u64(0));
        let s = pooled_state(&z, &[]).unwrap();
        let q = q_values(&z, &s, &p, &[true; 4]).unwrap();
        let ts: Vec<_> = (0..4).map(|a| transition(s.clone(), a, q[a], false, 4)).collect();
        let batch: Vec<_> = ts.iter().collect();
        assert!(td_loss(&z, &batch, &p, 0.0).unwrap() < 1e-24);
    }

    #[test]
    fn sync_copies_online_weights() {
        let mut p = QNetParams::init(2, &mut ChaCha8Rng::seed_from_u64(0));
        p.theta1[[0, 0]] += 1.0;
        assert_ne!(p.theta1, p.target1);
        let before = p.checksum();
        p.sync();
        assert_eq!(p.theta1, p.target1);
        assert_eq!(p.theta2, p.target2);
        assert_ne!(before, p.checksum());
    }
}
