//! Soft-margin support vector classifier trained by SMO with second-order
//! working-set selection. Labels are `+1` / `-1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    pub c: f64,
    pub kernel: Kernel,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for SvcParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            kernel: Kernel::Rbf { gamma: 0.1 },
            max_iter: 10_000,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svc {
    pub kernel: Kernel,
    /// Empty for the linear kernel, which keeps only `weights`.
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Svc {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &SvcParams) -> Result<Self> {
        let n = x.len();
        if n != y.len() || n == 0 {
            return Err(Error::Degenerate(
                "SVC inputs differ in length or are empty".into(),
            ));
        }
        if !(params.c > 0.0) {
            return Err(Error::Config("SVC C must be positive".into()));
        }
        let has_pos = y.iter().any(|&v| v > 0.0);
        let has_neg = y.iter().any(|&v| v < 0.0);
        if !(has_pos && has_neg) {
            return Err(Error::SingleClass);
        }
        let c = params.c;
        let kmat: Vec<f64> = {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = params.kernel.eval(&x[i], &x[j]);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            k
        };
        let q = |i: usize, j: usize| y[i] * y[j] * kmat[i * n + j];

        let mut alpha = vec![0.0; n];
        let mut grad = vec![-1.0; n];
        let is_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
        let is_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

        let mut iterations = 0;
        let mut converged = false;
        while iterations < params.max_iter {
            // i: maximal violating index in I_up
            let mut gmax = f64::NEG_INFINITY;
            let mut i_sel = usize::MAX;
            for t in 0..n {
                if is_up(alpha[t], y[t]) {
                    let v = -y[t] * grad[t];
                    if v > gmax {
                        gmax = v;
                        i_sel = t;
                    }
                }
            }
            let mut gmin = f64::INFINITY;
            let mut j_sel = usize::MAX;
            let mut best_obj = f64::INFINITY;
            for t in 0..n {
                if !is_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                if i_sel != usize::MAX && v < gmax {
                    let b = gmax - v;
                    let mut a =
                        kmat[i_sel * n + i_sel] + kmat[t * n + t] - 2.0 * kmat[i_sel * n + t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = t;
                    }
                }
            }
            if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < params.tolerance {
                converged = true;
                break;
            }
            iterations += 1;
            let (i, j) = (i_sel, j_sel);
            let (old_ai, old_aj) = (alpha[i], alpha[j]);
            if y[i] != y[j] {
                let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
            for (t, g) in grad.iter_mut().enumerate() {
                *g += q(t, i) * dai + q(t, j) * daj;
            }
        }
        if !converged {
            log::warn!(
                "SVC stopped at max_iter={} before convergence",
                params.max_iter
            );
        }

        // offset: average over free vectors, else midpoint of the feasible range
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..n {
            let yg = y[t] * grad[t];
            if alpha[t] >= c {
                if y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= 0.0 {
                if y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        let rho = if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        };

        let mut support_vectors = Vec::new();
        let mut dual_coef = Vec::new();
        for t in 0..n {
            if alpha[t] > 0.0 {
                support_vectors.push(x[t].clone());
                dual_coef.push(alpha[t] * y[t]);
            }
        }
        let weights = match params.kernel {
            Kernel::Linear => {
                let d = x[0].len();
                let mut w = vec![0.0; d];
                for (sv, coef) in support_vectors.iter().zip(&dual_coef) {
                    for (wk, xk) in w.iter_mut().zip(sv) {
                        *wk += coef * xk;
                    }
                }
                support_vectors.clear();
                dual_coef.clear();
                Some(w)
            }
            Kernel::Rbf { .. } => None,
        };
        Ok(Self {
            kernel: params.kernel,
            support_vectors,
            dual_coef,
            weights,
            bias: -rho,
            iterations,
            converged,
        })
    }

    /// Signed distance-like score; positive means the `+1` class.
    pub fn decision(&self, x: &[f64]) -> f64 {
        let raw = match &self.weights {
            Some(w) => w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
            None => self
                .support_vectors
                .iter()
                .zip(&self.dual_coef)
                .map(|(sv, coef)| coef * self.kernel.eval(sv, x))
                .sum(),
        };
        raw + self.bias
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.1;
            x.push(vec![2.0 + t.sin(), 2.0 + t.cos()]);
            y.push(1.0);
            x.push(vec![-2.0 + t.cos(), -2.0 + t.sin()]);
            y.push(-1.0);
        }
        (x, y)
    }

    #[test]
    fn separates_blobs_linear_and_rbf() {
        let (x, y) = blobs();
        for kernel in [Kernel::Linear, Kernel::Rbf { gamma: 0.5 }] {
            let svc = Svc::fit(
                &x,
                &y,
                &SvcParams {
                    kernel,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(svc.converged);
            for (xi, yi) in x.iter().zip(&y) {
                assert!(svc.decision(xi) * yi > 0.0);
            }
        }
    }

    #[test]
    fn hard_margin_linear_solution() {
        // max-margin separator of {(1,0)+, (-1,0)-} is x1 = 0 with w = (1, 0)
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let y = vec![1.0, -1.0];
        let svc = Svc::fit(
            &x,
            &y,
            &SvcParams {
                c: 100.0,
                kernel: Kernel::Linear,
                max_iter: 1000,
                tolerance: 1e-9,
            },
        )
        .unwrap();
        let w = svc.weights.as_ref().unwrap();
        assert!((w[0] - 1.0).abs() < 1e-9);
        assert!(w[1].abs() < 1e-12);
        assert!(svc.bias.abs() < 1e-9);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            Svc::fit(&x, &[1.0, 1.0], &SvcParams::default()),
            Err(Error::SingleClass)
        ));
    }
}
