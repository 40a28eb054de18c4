use crate::error::{Error, Result};
use crate::tree::SearchTree;

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need two equal-length samples of size >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "zero variance in correlation input".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// `(V(child), Q(edge into child))` for every evaluated non-root node.
pub fn v_q_pairs(tree: &SearchTree) -> Vec<(f64, f64)> {
    tree.nodes()
        .filter(|n| !n.is_root())
        .filter_map(|n| Some((n.evaluated_value?, n.edge.action_value?)))
        .collect()
}

pub fn v_q_correlation(tree: &SearchTree) -> Result<f64> {
    let (v, q): (Vec<f64>, Vec<f64>) = v_q_pairs(tree).into_iter().unzip();
    pearson(&v, &q)
}
