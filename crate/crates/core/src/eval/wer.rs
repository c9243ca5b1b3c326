//! Word error rate by Levenshtein alignment over normalized word sequences.

use crate::error::{Error, Result};

/// Lowercases, removes punctuation other than apostrophes, and splits on whitespace.
pub fn normalize_text(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace() || *c == '\'')
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    pub words: Vec<String>,
}

impl Transcript {
    pub fn new(text: &str) -> Self {
        Self { words: normalize_text(text) }
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        Self::new(&words.iter().map(|w| w.as_ref()).collect::<Vec<_>>().join(" "))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub reference: Transcript,
    pub hypothesis: Transcript,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Percent; exceeds 100 when insertions dominate.
    pub wer: f64,
}

impl EvalRecord {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Unit-cost alignment. The backtrace prefers a diagonal step (match or substitution),
/// then an insertion, then a deletion, whenever several are optimal.
pub fn wer(reference: &Transcript, hypothesis: &Transcript) -> Result<EvalRecord> {
    if reference.is_empty() {
        return Err(Error::invalid("empty reference transcript"));
    }
    let (r, h) = (&reference.words, &hypothesis.words);
    let (n, m) = (r.len(), h.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]);
            d[i][j] = sub.min(d[i][j - 1] + 1).min(d[i - 1][j] + 1);
        }
    }

    let (mut s, mut del, mut ins) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]) {
            s += usize::from(r[i - 1] != h[j - 1]);
            i -= 1;
            j -= 1;
        } else if j > 0 && d[i][j] == d[i][j - 1] + 1 {
            ins += 1;
            j -= 1;
        } else {
            del += 1;
            i -= 1;
        }
    }
    Ok(EvalRecord {
        reference: reference.clone(),
        hypothesis: hypothesis.clone(),
        substitutions: s,
        deletions: del,
        insertions: ins,
        wer: 100.0 * (s + del + ins) as f64 / n as f64,
    })
}
