//! Quasi-Newton inverse-Hessian approximations on a flat coefficient vector.
//!
//! Both variants start from a diagonal inverse `h0`. The dense form stores
//! the full inverse and applies the standard BFGS product update; the
//! limited-memory form keeps the last `memory` pairs and uses the two-loop
//! recursion with the usual `s'y / y'H0y` scaling of `h0`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Debug)]
enum Memory {
    Dense(DMatrix<f64>),
    Limited {
        pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
        capacity: usize,
        gamma: f64,
    },
}

#[derive(Clone, Debug)]
pub struct QuasiNewton {
    h0: Vec<f64>,
    memory: Memory,
    updates: usize,
}

impl QuasiNewton {
    /// Dense BFGS when `h0.len() <= dense_limit`, otherwise L-BFGS with
    /// `history` pairs.
    pub fn new(h0: Vec<f64>, dense_limit: usize, history: usize) -> Self {
        let memory = if h0.len() <= dense_limit {
            Memory::Dense(DMatrix::from_diagonal(&DVector::from_column_slice(&h0)))
        } else {
            Memory::Limited {
                pairs: VecDeque::with_capacity(history),
                capacity: history.max(1),
                gamma: 1.0,
            }
        };
        Self {
            h0,
            memory,
            updates: 0,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.memory, Memory::Dense(_))
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn reset(&mut self) {
        match &mut self.memory {
            Memory::Dense(h) => {
                h.fill(0.0);
                h.set_diagonal(&DVector::from_column_slice(&self.h0));
            }
            Memory::Limited { pairs, gamma, .. } => {
                pairs.clear();
                *gamma = 1.0;
            }
        }
        self.updates = 0;
    }

    /// Preconditioned steepest direction `-h0 * g`.
    pub fn steepest(&self, g: &[f64]) -> Vec<f64> {
        g.iter().zip(&self.h0).map(|(gi, hi)| -gi * hi).collect()
    }

    /// Search direction `-H * g`.
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        match &self.memory {
            Memory::Dense(h) => {
                let d = h * DVector::from_column_slice(g);
                d.iter().map(|v| -v).collect()
            }
            Memory::Limited { pairs, gamma, .. } => {
                let mut q = g.to_vec();
                let mut alphas = Vec::with_capacity(pairs.len());
                for (s, y, rho) in pairs.iter().rev() {
                    let a = rho * dot(s, &q);
                    for (qi, yi) in q.iter_mut().zip(y) {
                        *qi -= a * yi;
                    }
                    alphas.push(a);
                }
                for (qi, hi) in q.iter_mut().zip(&self.h0) {
                    *qi *= gamma * hi;
                }
                for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
                    let b = rho * dot(y, &q);
                    for (qi, si) in q.iter_mut().zip(s) {
                        *qi += (a - b) * si;
                    }
                }
                q.iter().map(|v| -v).collect()
            }
        }
    }

    /// Applies the update for step `s` and gradient change `y`. Pairs with
    /// too little curvature are skipped; returns whether the update was used.
    pub fn update(&mut self, s: &[f64], y: &[f64]) -> bool {
        let sy = dot(s, y);
        if !(sy > 1e-10 * norm(s) * norm(y)) {
            return false;
        }
        let rho = 1.0 / sy;
        match &mut self.memory {
            Memory::Dense(h) => {
                let s = DVector::from_column_slice(s);
                let y = DVector::from_column_slice(y);
                let hy = &*h * &y;
                let yhy = y.dot(&hy);
                // H+ = H - rho (Hy s' + s y'H) + (rho^2 y'Hy + rho) s s'
                let c = rho * rho * yhy + rho;
                h.ger(-rho, &hy, &s, 1.0);
                h.ger(-rho, &s, &hy, 1.0);
                h.ger(c, &s, &s, 1.0);
            }
            Memory::Limited {
                pairs,
                capacity,
                gamma,
            } => {
                let yhy: f64 = y.iter().zip(&self.h0).map(|(yi, hi)| yi * yi * hi).sum();
                if yhy > 0.0 {
                    *gamma = sy / yhy;
                }
                if pairs.len() == *capacity {
                    pairs.pop_front();
                }
                pairs.push_back((s.to_vec(), y.to_vec(), rho));
            }
        }
        self.updates += 1;
        true
    }
}
