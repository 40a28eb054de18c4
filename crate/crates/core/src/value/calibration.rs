use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sigmoid map `P(good | f) = 1 / (1 + exp(a*f + b))` over decision values,
/// fitted by Newton's method with backtracking on regularized targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattScaling {
    pub a: f64,
    pub b: f64,
}

fn log1p_exp_term(f_apb: f64, t: f64) -> f64 {
    if f_apb >= 0.0 {
        t * f_apb + (-f_apb).exp().ln_1p()
    } else {
        (t - 1.0) * f_apb + f_apb.exp().ln_1p()
    }
}

impl PlattScaling {
    pub fn fit(decisions: &[f64], positive: &[bool]) -> Result<Self> {
        if decisions.len() != positive.len() || decisions.is_empty() {
            return Err(Error::Degenerate(
                "calibration inputs differ in length or are empty".into(),
            ));
        }
        let prior1 = positive.iter().filter(|p| **p).count() as f64;
        let prior0 = positive.len() as f64 - prior1;
        let hi = (prior1 + 1.0) / (prior1 + 2.0);
        let lo = 1.0 / (prior0 + 2.0);
        let targets: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

        let objective = |a: f64, b: f64| -> f64 {
            decisions
                .iter()
                .zip(&targets)
                .map(|(f, t)| log1p_exp_term(f * a + b, *t))
                .sum()
        };

        let (max_iter, min_step, sigma, eps) = (100, 1e-10, 1e-12, 1e-5);
        let mut a = 0.0;
        let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
        let mut fval = objective(a, b);
        for _ in 0..max_iter {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
            for (f, t) in decisions.iter().zip(&targets) {
                let f_apb = f * a + b;
                let (p, q) = if f_apb >= 0.0 {
                    let e = (-f_apb).exp();
                    (e / (1.0 + e), 1.0 / (1.0 + e))
                } else {
                    let e = f_apb.exp();
                    (1.0 / (1.0 + e), e / (1.0 + e))
                };
                let d2 = p * q;
                h11 += f * f * d2;
                h22 += d2;
                h21 += f * d2;
                let d1 = t - p;
                g1 += f * d1;
                g2 += d1;
            }
            if g1.abs() < eps && g2.abs() < eps {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            while step >= min_step {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    break;
                }
                step /= 2.0;
            }
            if step < min_step {
                break;
            }
        }
        Ok(Self { a, b })
    }

    pub fn probability(&self, decision: f64) -> f64 {
        let f_apb = decision * self.a + self.b;
        let p = if f_apb >= 0.0 {
            let e = (-f_apb).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + f_apb.exp())
        };
        p.clamp(0.0, 1.0)
    }
}
