//! Deterministic offline backends. Every output is a pure function of the
//! seed and the request, so whole pipelines replay bit-identically.

use std::collections::HashMap;

use super::{
    check_completion_request, check_score_request, Embedder, EmbeddingVector, Generator,
    TokenLogprob, TokenScorer,
};
use crate::analytics::rubric::RUBRIC_KEYS;
use crate::error::BackendError;
use crate::hash::{combine, fnv1a, splitmix64, unit};

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ren", "tal", "vor", "sen", "dri", "mu", "zel", "par", "ith", "gon", "bea",
    "sul", "fen",
];

/// Two-syllable pseudo-words used by the mock generators.
pub fn mock_vocabulary() -> Vec<String> {
    let mut out = Vec::with_capacity(SYLLABLES.len() * SYLLABLES.len());
    for a in SYLLABLES {
        for b in SYLLABLES {
            out.push(format!("{a}{b}"));
        }
    }
    out
}

/// Splits text into tokens whose concatenation reproduces the input: each
/// token is leading whitespace plus either a word or one punctuation mark.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut in_word = false;
    for ch in text.chars() {
        let wordy = ch.is_alphanumeric() || ch == '\'';
        if ch.is_whitespace() {
            if in_word || cur.chars().any(|c| !c.is_whitespace()) {
                tokens.push(std::mem::take(&mut cur));
            }
            in_word = false;
            cur.push(ch);
        } else if wordy {
            if !in_word && cur.chars().any(|c| !c.is_whitespace()) {
                tokens.push(std::mem::take(&mut cur));
            }
            in_word = true;
            cur.push(ch);
        } else {
            if cur.chars().any(|c| !c.is_whitespace()) {
                tokens.push(std::mem::take(&mut cur));
            }
            in_word = false;
            cur.push(ch);
        }
    }
    if !cur.is_empty() {
        match tokens.last_mut() {
            Some(last) if cur.chars().all(char::is_whitespace) => last.push_str(&cur),
            _ => tokens.push(cur),
        }
    }
    tokens
}

fn normalized(token: &str) -> String {
    token.trim().to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockKind {
    /// One-line plot actions.
    Policy,
    /// A bullet list with the given number of lines.
    Simulator { bullets: usize },
    /// Rubric justification followed by a JSON score object.
    Judge,
}

#[derive(Debug, Clone)]
pub struct MockGenerator {
    pub seed: u64,
    pub temperature: f64,
    pub kind: MockKind,
    vocab: Vec<String>,
}

const ACTION_VERBS: [&str; 8] = [
    "Reveal",
    "Introduce",
    "Complicate",
    "Resolve",
    "Betray",
    "Reunite",
    "Uncover",
    "Escalate",
];

impl MockGenerator {
    pub fn new(seed: u64, temperature: f64, kind: MockKind) -> Self {
        Self {
            seed,
            temperature,
            kind,
            vocab: mock_vocabulary(),
        }
    }

    pub fn policy(seed: u64) -> Self {
        Self::new(seed, 0.7, MockKind::Policy)
    }

    pub fn simulator(seed: u64, bullets: usize) -> Self {
        Self::new(seed, 0.0, MockKind::Simulator { bullets })
    }

    pub fn judge(seed: u64) -> Self {
        Self::new(seed, 0.7, MockKind::Judge)
    }

    fn word(&self, h: u64) -> &str {
        &self.vocab[(h % self.vocab.len() as u64) as usize]
    }

    /// Vocabulary words on the line after a "direction:" header.
    fn direction_words(&self, prompt: &str) -> Vec<String> {
        let mut lines = prompt.lines();
        while let Some(line) = lines.next() {
            if line.trim_end().to_lowercase().ends_with("direction:") {
                let next = lines.next().unwrap_or("");
                return tokenize(next)
                    .iter()
                    .map(|t| normalized(t))
                    .filter(|t| self.vocab.contains(t))
                    .collect();
            }
        }
        Vec::new()
    }

    fn phrase(&self, h: u64, len: usize) -> String {
        (0..len)
            .map(|j| self.word(combine(h, j as u64)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Bullets that mostly reuse the words of the requested plot direction,
    /// so the quality of a step follows the quality of the action.
    fn follow(&self, h: u64, bullets: usize, direction: &[String]) -> String {
        (0..bullets)
            .map(|b| {
                let words: Vec<&str> = (0..6)
                    .map(|j| {
                        let w = combine(h, (100 + b * 8 + j) as u64);
                        if !w.is_multiple_of(4) {
                            direction[(splitmix64(w) % direction.len() as u64) as usize].as_str()
                        } else {
                            self.word(w)
                        }
                    })
                    .collect();
                format!("- {}.", words.join(" "))
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn render(&self, h: u64) -> String {
        match self.kind {
            MockKind::Policy => {
                let verb = ACTION_VERBS[(h % ACTION_VERBS.len() as u64) as usize];
                format!("{verb} {}.", self.phrase(splitmix64(h), 4))
            }
            MockKind::Simulator { bullets } => (0..bullets)
                .map(|b| format!("- {}.", self.phrase(combine(h, 100 + b as u64), 6)))
                .collect::<Vec<_>>()
                .join("\n"),
            MockKind::Judge => {
                let scores: Vec<String> = RUBRIC_KEYS
                    .iter()
                    .enumerate()
                    .map(|(k, key)| {
                        let v = 1 + combine(h, k as u64) % 10;
                        format!("  \"{key}\": {v}")
                    })
                    .collect();
                format!(
                    "The outline is serviceable.\n\n**JSON Output**:\n```json\n{{\n{}\n}}\n```",
                    scores.join(",\n")
                )
            }
        }
    }
}

impl Generator for MockGenerator {
    fn complete(&self, prompt: &str, n: usize) -> Result<Vec<String>, BackendError> {
        check_completion_request(n)?;
        let base = combine(self.seed, fnv1a(prompt.as_bytes()));
        let direction = match self.kind {
            MockKind::Simulator { .. } => self.direction_words(prompt),
            MockKind::Policy | MockKind::Judge => Vec::new(),
        };
        Ok((0..n)
            .map(|i| {
                // greedy decoding ignores the sample index
                let h = if self.temperature == 0.0 {
                    base
                } else {
                    combine(base, i as u64 + 1)
                };
                match (self.kind, direction.is_empty()) {
                    (MockKind::Simulator { bullets }, false) => self.follow(h, bullets, &direction),
                    _ => self.render(h),
                }
            })
            .collect())
    }
}

/// Hash-based pseudo language model: each word has a fixed base surprisal in
/// `[1, 12)` bits, perturbed by up to ±0.5 bit depending on the previous word.
#[derive(Debug, Clone, Copy)]
pub struct MockScorer {
    pub seed: u64,
}

impl MockScorer {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn base_surprisal(&self, word: &str) -> f64 {
        1.0 + 11.0 * unit(combine(self.seed, fnv1a(normalized(word).as_bytes())))
    }

    fn surprisal(&self, prev: &str, word: &str) -> f64 {
        let ctx = combine(
            combine(self.seed ^ 0x5eed, fnv1a(prev.as_bytes())),
            fnv1a(word.as_bytes()),
        );
        (self.base_surprisal(word) + unit(ctx) - 0.5).max(0.05)
    }
}

impl TokenScorer for MockScorer {
    fn score_tokens(&self, text: &str) -> Result<Vec<TokenLogprob>, BackendError> {
        check_score_request(text)?;
        let mut prev = String::new();
        Ok(tokenize(text)
            .into_iter()
            .map(|token| {
                let word = normalized(&token);
                let bits = self.surprisal(&prev, &word);
                prev = word;
                TokenLogprob {
                    token,
                    logprob: -bits * std::f64::consts::LN_2,
                }
            })
            .collect())
    }
}

/// Assigns the same probability to every token.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer {
    pub probability: f64,
}

impl TokenScorer for ConstantScorer {
    fn score_tokens(&self, text: &str) -> Result<Vec<TokenLogprob>, BackendError> {
        check_score_request(text)?;
        if !(self.probability > 0.0 && self.probability <= 1.0) {
            return Err(BackendError::InvalidRequest(format!(
                "probability {} outside (0, 1]",
                self.probability
            )));
        }
        let lp = self.probability.ln();
        Ok(tokenize(text)
            .into_iter()
            .map(|token| TokenLogprob { token, logprob: lp })
            .collect())
    }
}

/// Looks every token up in a fixed table keyed by the trimmed, lowercased token.
#[derive(Debug, Clone, Default)]
pub struct TableScorer {
    pub table: HashMap<String, f64>,
}

impl TableScorer {
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        Self {
            table: entries
                .into_iter()
                .map(|(k, v)| (normalized(k.as_ref()), v))
                .collect(),
        }
    }
}

impl TokenScorer for TableScorer {
    fn score_tokens(&self, text: &str) -> Result<Vec<TokenLogprob>, BackendError> {
        check_score_request(text)?;
        tokenize(text)
            .into_iter()
            .map(|token| {
                let key = normalized(&token);
                match self.table.get(&key) {
                    Some(&logprob) => Ok(TokenLogprob { token, logprob }),
                    None => Err(BackendError::Malformed(format!(
                        "token {key:?} not in table"
                    ))),
                }
            })
            .collect()
    }
}

/// Bag-of-words random projection, normalized to unit length. Sentences that
/// share words have positive cosine similarity.
#[derive(Debug, Clone, Copy)]
pub struct MockEmbedder {
    pub seed: u64,
    pub dimension: usize,
}

impl MockEmbedder {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            dimension: 64,
        }
    }

    fn embed_one(&self, sentence: &str) -> EmbeddingVector {
        let mut words: Vec<String> = tokenize(sentence).iter().map(|t| normalized(t)).collect();
        if words.is_empty() {
            words.push(String::new());
        }
        let mut values = vec![0.0; self.dimension];
        for w in &words {
            let hw = combine(self.seed, fnv1a(w.as_bytes()));
            for (d, v) in values.iter_mut().enumerate() {
                *v += unit(combine(hw, d as u64)) - 0.5;
            }
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        } else {
            values[0] = 1.0;
        }
        EmbeddingVector { values }
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, sentences: &[String]) -> Result<Vec<EmbeddingVector>, BackendError> {
        if sentences.is_empty() {
            return Err(BackendError::InvalidRequest("no sentences to embed".into()));
        }
        Ok(sentences.iter().map(|s| self.embed_one(s)).collect())
    }
}
