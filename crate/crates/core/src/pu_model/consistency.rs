//! Consistency regularizer.
//!
//! `E^c = (1/N) sum_p sum_{q != p} w_q(|p - q|) |vec(d_p - S(p - q) d_q)|^2`
//! where `w_q` is patch `q`'s weight at the inter-center distance. The
//! gradient with respect to `d_k` collects both the terms where `k` is the
//! unshifted member and the terms where it is the shifted one.

use super::basis::{shift_operator, ShiftOperator};
use super::model::MeshlessModel;
use crate::par::{self, Exec};
use crate::Result;

/// Squared Frobenius distance between `d_p` and `S(p - q) d_q`.
pub fn consistency_pair(model: &MeshlessModel, p: usize, q: usize) -> Result<f64> {
    model.check_index(p)?;
    model.check_index(q)?;
    let delta = model.patches()[p].center - model.patches()[q].center;
    let s = shift_operator(model.basis(), delta);
    Ok(pair_residual_norm2(&s, model.block(p), model.block(q), &mut vec![0.0; model.block_len()]))
}

fn pair_residual_norm2(s: &ShiftOperator, dp: &[f64], dq: &[f64], buf: &mut [f64]) -> f64 {
    s.apply_interleaved(dq, buf);
    dp.iter().zip(buf.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn consistency_energy(model: &MeshlessModel) -> f64 {
    ConsistencyTerms::new(model, Exec::Sequential).energy(model.coeffs(), Exec::Sequential)
}

/// Exact gradient of [`consistency_energy`] with respect to patch `p`'s
/// interleaved coefficients.
pub fn consistency_gradient(model: &MeshlessModel, p: usize) -> Result<Vec<f64>> {
    model.check_index(p)?;
    let n = model.len() as f64;
    let nb2 = model.block_len();
    let patches = model.patches();
    let mut grad = vec![0.0; nb2];
    let mut shifted = vec![0.0; nb2];
    let mut tmp = vec![0.0; nb2];
    for q in 0..model.len() {
        if q == p {
            continue;
        }
        let delta = patches[p].center - patches[q].center;
        let dist = delta.norm();

        // p as the unshifted member of (p, q).
        let w = patches[q].weight_at_distance(dist);
        if w > 0.0 {
            let s = shift_operator(model.basis(), delta);
            s.apply_interleaved(model.block(q), &mut shifted);
            for ((g, a), b) in grad.iter_mut().zip(model.block(p)).zip(&shifted) {
                *g += 2.0 * w / n * (a - b);
            }
        }

        // p as the shifted member of (q, p).
        let w = patches[p].weight_at_distance(dist);
        if w > 0.0 {
            let s = shift_operator(model.basis(), -delta);
            s.apply_interleaved(model.block(p), &mut shifted);
            for ((r, a), b) in tmp.iter_mut().zip(model.block(q)).zip(&shifted) {
                *r = a - b;
            }
            add_transpose_apply(&s, &tmp, -2.0 * w / n, &mut grad);
        }
    }
    Ok(grad)
}

/// `out += scale * S^T r` for interleaved `r`.
fn add_transpose_apply(s: &ShiftOperator, r: &[f64], scale: f64, out: &mut [f64]) {
    let m = s.matrix();
    let n = m.nrows();
    for i in 0..n {
        let (mut a, mut b) = (0.0, 0.0);
        for j in 0..=i {
            let v = m[(j, i)];
            a += v * r[2 * j];
            b += v * r[2 * j + 1];
        }
        out[2 * i] += scale * a;
        out[2 * i + 1] += scale * b;
    }
}

struct Pair {
    p: usize,
    q: usize,
    weight: f64,
    shift: ShiftOperator,
}

/// Precomputed pair list for repeated energy/gradient evaluation on a fixed
/// patch layout.
pub struct ConsistencyTerms {
    pairs: Vec<Pair>,
    /// Pair indices where the patch is the unshifted member.
    as_p: Vec<Vec<usize>>,
    /// Pair indices where the patch is the shifted member.
    as_q: Vec<Vec<usize>>,
    n_patches: usize,
    block_len: usize,
}

impl ConsistencyTerms {
    pub fn new(model: &MeshlessModel, exec: Exec) -> Self {
        let patches = model.patches();
        let n = patches.len();
        let per_patch: Vec<Vec<Pair>> = par::map_indices(exec, n, |p| {
            (0..n)
                .filter(|&q| q != p)
                .filter_map(|q| {
                    let delta = patches[p].center - patches[q].center;
                    let weight = patches[q].weight_at_distance(delta.norm());
                    (weight > 0.0).then(|| Pair {
                        p,
                        q,
                        weight,
                        shift: shift_operator(model.basis(), delta),
                    })
                })
                .collect()
        });
        let pairs: Vec<Pair> = per_patch.into_iter().flatten().collect();
        let mut as_p = vec![Vec::new(); n];
        let mut as_q = vec![Vec::new(); n];
        for (k, pair) in pairs.iter().enumerate() {
            as_p[pair.p].push(k);
            as_q[pair.q].push(k);
        }
        Self {
            pairs,
            as_p,
            as_q,
            n_patches: n,
            block_len: model.block_len(),
        }
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    fn residuals(&self, coeffs: &[f64], exec: Exec) -> Vec<Vec<f64>> {
        let nb2 = self.block_len;
        par::map_indices(exec, self.pairs.len(), |k| {
            let pair = &self.pairs[k];
            let mut r = vec![0.0; nb2];
            pair.shift
                .apply_interleaved(&coeffs[pair.q * nb2..(pair.q + 1) * nb2], &mut r);
            for (ri, a) in r.iter_mut().zip(&coeffs[pair.p * nb2..(pair.p + 1) * nb2]) {
                *ri = a - *ri;
            }
            r
        })
    }

    pub fn energy(&self, coeffs: &[f64], exec: Exec) -> f64 {
        if self.n_patches == 0 {
            return 0.0;
        }
        let nb2 = self.block_len;
        let sum = par::sum_indices(exec, self.n_patches, |p| {
            self.as_p[p]
                .iter()
                .map(|&k| {
                    let pair = &self.pairs[k];
                    let mut r = vec![0.0; nb2];
                    pair.shift
                        .apply_interleaved(&coeffs[pair.q * nb2..(pair.q + 1) * nb2], &mut r);
                    let d2: f64 = r
                        .iter()
                        .zip(&coeffs[p * nb2..(p + 1) * nb2])
                        .map(|(b, a)| (a - b) * (a - b))
                        .sum();
                    pair.weight * d2
                })
                .sum::<f64>()
        });
        sum / self.n_patches as f64
    }

    /// Energy and full flat gradient.
    pub fn energy_and_gradient(&self, coeffs: &[f64], exec: Exec) -> (f64, Vec<f64>) {
        if self.n_patches == 0 {
            return (0.0, Vec::new());
        }
        let nb2 = self.block_len;
        let n = self.n_patches as f64;
        let res = self.residuals(coeffs, exec);
        let energy = par::sum_indices(exec, self.n_patches, |p| {
            self.as_p[p]
                .iter()
                .map(|&k| self.pairs[k].weight * res[k].iter().map(|r| r * r).sum::<f64>())
                .sum::<f64>()
        }) / n;
        let blocks: Vec<Vec<f64>> = par::map_indices(exec, self.n_patches, |p| {
            let mut g = vec![0.0; nb2];
            for &k in &self.as_p[p] {
                let scale = 2.0 * self.pairs[k].weight / n;
                for (gi, ri) in g.iter_mut().zip(&res[k]) {
                    *gi += scale * ri;
                }
            }
            for &k in &self.as_q[p] {
                let pair = &self.pairs[k];
                add_transpose_apply(&pair.shift, &res[k], -2.0 * pair.weight / n, &mut g);
            }
            g
        });
        (energy, blocks.concat())
    }
}
