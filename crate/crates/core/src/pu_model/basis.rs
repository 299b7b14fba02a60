use std::cmp::Reverse;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::raster::Vec2;

/// Which exponent pairs `(s, t)` make up a basis of order `m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    /// All `s, t <= m`: `(m + 1)^2` terms.
    #[default]
    Tensor,
    /// All `s + t <= m`: the Pascal triangle proper.
    TotalDegree,
}

/// Monomials `x^s y^t` in Pascal-triangle order: increasing total order,
/// then more balanced exponents first, then larger `s` first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialBasis {
    order: usize,
    family: BasisFamily,
    exponents: Vec<(usize, usize)>,
}

fn pascal_key(&(s, t): &(usize, usize)) -> (usize, usize, Reverse<usize>) {
    (s + t, s.abs_diff(t), Reverse(s))
}

/// Exponents of the tensor family of order `order`, Pascal ordered.
pub fn pascal_exponents(order: usize) -> Vec<(usize, usize)> {
    family_exponents(order, BasisFamily::Tensor)
}

fn family_exponents(order: usize, family: BasisFamily) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = (0..=order)
        .flat_map(|s| (0..=order).map(move |t| (s, t)))
        .filter(|&(s, t)| family == BasisFamily::Tensor || s + t <= order)
        .collect();
    e.sort_by_key(pascal_key);
    e
}

impl MonomialBasis {
    /// Orders above 15 are not supported.
    pub fn new(order: usize, family: BasisFamily) -> Self {
        assert!(order <= 15, "basis order {order} exceeds 15");
        Self {
            order,
            family,
            exponents: family_exponents(order, family),
        }
    }

    pub fn tensor(order: usize) -> Self {
        Self::new(order, BasisFamily::Tensor)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    /// Number of basis terms.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    fn index_of(&self, s: usize, t: usize) -> Option<usize> {
        self.exponents.iter().position(|&e| e == (s, t))
    }

    /// Writes `x^s y^t` for every basis term into `out`.
    #[inline]
    pub fn eval_into(&self, p: Vec2, out: &mut [f64]) {
        let mut px = [1.0; 16];
        let mut py = [1.0; 16];
        let m = self.order;
        for k in 1..=m {
            px[k] = px[k - 1] * p.x;
            py[k] = py[k - 1] * p.y;
        }
        for (o, &(s, t)) in out.iter_mut().zip(&self.exponents) {
            *o = px[s] * py[t];
        }
    }

    /// Coefficient-space matrix of the partial derivative
    /// `d^ex/dx^ex d^ey/dy^ey`: if `c` holds the coefficients of a
    /// polynomial, `D c` holds those of its derivative.
    pub fn derivative_operator(&self, ex: usize, ey: usize) -> DMatrix<f64> {
        let n = self.len();
        let mut d = DMatrix::zeros(n, n);
        for (j, &(a, b)) in self.exponents.iter().enumerate() {
            if a < ex || b < ey {
                continue;
            }
            let factor = falling(a, ex) * falling(b, ey);
            if let Some(k) = self.index_of(a - ex, b - ey) {
                d[(k, j)] = factor;
            }
        }
        d
    }
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn basis_eval(basis: &MonomialBasis, p: Vec2) -> Vec<f64> {
    let mut out = vec![0.0; basis.len()];
    basis.eval_into(p, &mut out);
    out
}

/// Basis-shifting operator: `phi(x + delta) = S(delta)^T phi(x)`.
///
/// Column `i` of `S` holds the expansion of monomial `i` evaluated at the
/// shifted point, so `S` is upper triangular with unit diagonal, and a local
/// model `d_q` re-expressed in a frame shifted by `delta` is `S(delta) d_q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftOperator {
    matrix: DMatrix<f64>,
}

impl ShiftOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// `S · d` for an `n_b x 2` coefficient matrix stored interleaved
    /// (`[a_0, b_0, a_1, b_1, ...]`).
    pub fn apply_interleaved(&self, d: &[f64], out: &mut [f64]) {
        let n = self.matrix.nrows();
        for j in 0..n {
            let (mut a, mut b) = (0.0, 0.0);
            // Upper triangular: only columns i >= j contribute.
            for i in j..n {
                let s = self.matrix[(j, i)];
                a += s * d[2 * i];
                b += s * d[2 * i + 1];
            }
            out[2 * j] = a;
            out[2 * j + 1] = b;
        }
    }
}

pub fn shift_operator(basis: &MonomialBasis, delta: Vec2) -> ShiftOperator {
    let n = basis.len();
    let m = basis.order();
    let mut dx = vec![1.0; m + 1];
    let mut dy = vec![1.0; m + 1];
    for k in 1..=m {
        dx[k] = dx[k - 1] * delta.x;
        dy[k] = dy[k - 1] * delta.y;
    }
    let mut matrix = DMatrix::zeros(n, n);
    for (i, &(s, t)) in basis.exponents().iter().enumerate() {
        for (j, &(a, b)) in basis.exponents().iter().enumerate() {
            if a <= s && b <= t {
                matrix[(j, i)] = binomial(s, a) * binomial(t, b) * dx[s - a] * dy[t - b];
            }
        }
    }
    ShiftOperator { matrix }
}
