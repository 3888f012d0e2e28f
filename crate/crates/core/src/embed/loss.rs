use ndarray::Array2;
use rand::Rng;

use super::{GnnParams, Topology};
use crate::error::{Error, Result};

/// Positive edges paired with sampled negatives. Positive `i` is paired with
/// negatives `i * ratio .. (i + 1) * ratio`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkSamples {
    pub pos: Vec<(usize, usize)>,
    pub pos_weight: Vec<f64>,
    pub neg: Vec<(usize, usize)>,
}

impl LinkSamples {
    pub fn ratio(&self) -> usize {
        self.neg.len() / self.pos.len().max(1)
    }

    fn check(&self) -> Result<()> {
        if self.pos.is_empty() {
            return Err(Error::Empty("positive edge set"));
        }
        if self.neg.is_empty() {
            return Err(Error::Empty("negative edge set"));
        }
        if !self.neg.len().is_multiple_of(self.pos.len()) || self.pos_weight.len() != self.pos.len() {
            return Err(Error::Shape {
                what: "link samples",
                expected: format!("a multiple of {} negatives", self.pos.len()),
                found: format!("{} negatives, {} weights", self.neg.len(), self.pos_weight.len()),
            });
        }
        Ok(())
    }
}

/// Draws `count` node pairs uniformly among non-edges (no self-loops).
pub fn sample_negatives(topo: &Topology, count: usize, rng: &mut impl Rng) -> Result<Vec<(usize, usize)>> {
    if topo.non_edge_count() == 0 {
        return Err(Error::InvalidConfig("graph has no non-edges to sample negatives from".into()));
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..topo.n);
        let b = rng.random_range(0..topo.n);
        if a != b && !topo.has_edge(a, b) {
            out.push((a, b));
        }
    }
    Ok(out)
}

fn dot(z: &Array2<f64>, (a, b): (usize, usize)) -> f64 {
    z.row(a).dot(&z.row(b))
}

/// Mean over (positive, negative) pairs of `w * max(0, M - s_pos + s_neg)`
/// plus `lambda * ||W||^2`.
pub fn margin_loss(z: &Array2<f64>, samples: &LinkSamples, margin: f64, lambda: f64, params: &GnnParams) -> Result<f64> {
    samples.check()?;
    let ratio = samples.ratio();
    let mut total = 0.0;
    for (i, (&p, &w)) in samples.pos.iter().zip(&samples.pos_weight).enumerate() {
        let sp = dot(z, p);
        for &n in &samples.neg[i * ratio..(i + 1) * ratio] {
            total += w * (margin - sp + dot(z, n)).max(0.0);
        }
    }
    Ok(total / samples.neg.len() as f64 + lambda * params.squared_norm())
}

/// Loss value and its gradient with respect to the embeddings `z`.
/// The regularisation gradient `2 * lambda * W` is left to the caller.
pub fn margin_loss_grad(
    z: &Array2<f64>,
    samples: &LinkSamples,
    margin: f64,
    lambda: f64,
    params: &GnnParams,
) -> Result<(f64, Array2<f64>)> {
    samples.check()?;
    let ratio = samples.ratio();
    let pairs = samples.neg.len() as f64;
    let mut grad = Array2::zeros(z.raw_dim());
    let mut total = 0.0;
    for (i, (&(u, v), &w)) in samples.pos.iter().zip(&samples.pos_weight).enumerate() {
        let sp = dot(z, (u, v));
        for &(a, b) in &samples.neg[i * ratio..(i + 1) * ratio] {
            let hinge = margin - sp + dot(z, (a, b));
            if hinge <= 0.0 {
                continue;
            }
            total += w * hinge;
            let c = w / pairs;
            let (zu, zv, za, zb) = (z.row(u).to_owned(), z.row(v).to_owned(), z.row(a).to_owned(), z.row(b).to_owned());
            grad.row_mut(u).scaled_add(-c, &zv);
            grad.row_mut(v).scaled_add(-c, &zu);
            grad.row_mut(a).scaled_add(c, &zb);
            grad.row_mut(b).scaled_add(c, &za);
        }
    }
    Ok((total / pairs + lambda * params.squared_norm(), grad))
}
