use crate::backend::EmbeddingVector;
use crate::error::{Error, Result};

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(Error::Degenerate(format!(
            "embedding dimensions differ ({} vs {})",
            a.dimension(),
            b.dimension()
        )));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("zero-norm embedding".into()));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity of every unordered pair, in `(i, j), i < j` order.
pub fn pairwise_cosines(embeddings: &[EmbeddingVector]) -> Result<Vec<f64>> {
    if embeddings.len() < 2 {
        return Err(Error::InsufficientData(
            "coherence needs at least two sentences".into(),
        ));
    }
    let mut out = Vec::with_capacity(embeddings.len() * (embeddings.len() - 1) / 2);
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            out.push(cosine(&embeddings[i], &embeddings[j])?);
        }
    }
    Ok(out)
}

/// Mean pairwise cosine similarity over all `n(n-1)/2` sentence pairs.
pub fn coherence_score(embeddings: &[EmbeddingVector]) -> Result<f64> {
    let sims = pairwise_cosines(embeddings)?;
    Ok(sims.iter().sum::<f64>() / sims.len() as f64)
}
