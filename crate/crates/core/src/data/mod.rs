//! Character-level corpus handling: the 27-symbol vocabulary, text
//! ingestion, contiguous train/valid/test splitting, and shuffled
//! next-token batch iteration.

mod words;

#[cfg(test)]
mod tests;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::TokenBatch;

/// Space plus the 26 lowercase letters; id 0 is space, `a` is 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharVocab;

impl CharVocab {
    pub const SIZE: usize = 27;

    /// Fold a byte into the vocabulary: letters are lowercased, anything
    /// else becomes a space.
    pub fn normalize(byte: u8) -> u8 {
        match byte {
            b'a'..=b'z' => byte,
            b'A'..=b'Z' => byte + 32,
            _ => b' ',
        }
    }

    pub fn id_of(byte: u8) -> u32 {
        match Self::normalize(byte) {
            b' ' => 0,
            c => (c - b'a' + 1) as u32,
        }
    }

    pub fn char_of(id: u32) -> char {
        match id {
            0 => ' ',
            1..=26 => (b'a' + id as u8 - 1) as char,
            _ => panic!("token id {id} outside the 27-symbol vocabulary"),
        }
    }

    pub fn encode(text: &str) -> Vec<u32> {
        text.bytes().map(Self::id_of).collect()
    }

    pub fn decode(ids: &[u32]) -> String {
        ids.iter().map(|&id| Self::char_of(id)).collect()
    }
}

/// Read at most `limit` bytes of a corpus file and tokenize it.
pub fn ingest_text8(path: &Path, limit: Option<usize>) -> Result<(Vec<u32>, CharVocab)> {
    let bytes = std::fs::read(path)?;
    let take = limit.unwrap_or(bytes.len()).min(bytes.len());
    if take == 0 {
        return Err(Error::data(format!(
            "corpus {} produced no tokens",
            path.display()
        )));
    }
    let tokens = bytes[..take].iter().map(|&b| CharVocab::id_of(b)).collect();
    Ok((tokens, CharVocab))
}

/// Contiguous, disjoint, ordered token streams covering an ingested
/// prefix exactly.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Vec<u32>,
    pub valid: Vec<u32>,
    pub test: Vec<u32>,
    pub fractions: (f64, f64, f64),
}

/// Split at exact token boundaries: floor for train, floor for valid,
/// remainder for test.
pub fn split(stream: &[u32], fractions: (f64, f64, f64)) -> Result<CorpusSplit> {
    let (ft, fv, fe) = fractions;
    if ft <= 0.0 || fv <= 0.0 || fe <= 0.0 {
        return Err(Error::config(format!(
            "split fractions must be positive, got {fractions:?}"
        )));
    }
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split fractions must sum to 1, got {fractions:?}"
        )));
    }
    let n = stream.len();
    let n_train = (n as f64 * ft).floor() as usize;
    let n_valid = (n as f64 * fv).floor() as usize;
    let n_test = n - n_train - n_valid;
    if n_train == 0 || n_valid == 0 || n_test == 0 {
        return Err(Error::data(format!(
            "split of {n} tokens leaves an empty piece ({n_train}/{n_valid}/{n_test})"
        )));
    }
    Ok(CorpusSplit {
        train: stream[..n_train].to_vec(),
        valid: stream[n_train..n_train + n_valid].to_vec(),
        test: stream[n_train + n_valid..].to_vec(),
        fractions,
    })
}

/// Yields (inputs, targets) batches over non-overlapping windows of
/// seq_len + 1 tokens; the target window is the input shifted by one.
pub struct BatchIterator<'a> {
    stream: &'a [u32],
    window_starts: Vec<usize>,
    seq_len: usize,
    batch_size: usize,
    cursor: usize,
    keep_partial: bool,
}

impl<'a> BatchIterator<'a> {
    pub fn num_windows(&self) -> usize {
        self.window_starts.len()
    }

    pub fn num_batches(&self) -> usize {
        if self.keep_partial {
            self.window_starts.len().div_ceil(self.batch_size)
        } else {
            self.window_starts.len() / self.batch_size
        }
    }
}

impl<'a> Iterator for BatchIterator<'a> {
    type Item = (TokenBatch, TokenBatch);

    fn next(&mut self) -> Option<Self::Item> {
        let remaining = self.window_starts.len() - self.cursor;
        let take = if remaining >= self.batch_size {
            self.batch_size
        } else if self.keep_partial && remaining > 0 {
            remaining
        } else {
            return None;
        };
        let mut inputs = Vec::with_capacity(take * self.seq_len);
        let mut targets = Vec::with_capacity(take * self.seq_len);
        for &start in &self.window_starts[self.cursor..self.cursor + take] {
            inputs.extend_from_slice(&self.stream[start..start + self.seq_len]);
            targets.extend_from_slice(&self.stream[start + 1..start + 1 + self.seq_len]);
        }
        self.cursor += take;
        Some((
            TokenBatch::new(inputs, take, self.seq_len).expect("window arithmetic"),
            TokenBatch::new(targets, take, self.seq_len).expect("window arithmetic"),
        ))
    }
}

fn window_starts(stream_len: usize, seq_len: usize) -> Vec<usize> {
    let stride = seq_len + 1;
    (0..stream_len / stride).map(|w| w * stride).collect()
}

/// Training batches: window order shuffled by `seed`, trailing windows
/// that do not fill a batch dropped.
pub fn batches(
    stream: &[u32],
    seq_len: usize,
    batch_size: usize,
    seed: u64,
) -> Result<BatchIterator<'_>> {
    if batch_size == 0 || seq_len == 0 {
        return Err(Error::config(
            "seq_len and batch_size must be positive".to_string(),
        ));
    }
    if stream.len() <= seq_len {
        return Err(Error::data(format!(
            "stream of {} tokens is too short for windows of {}",
            stream.len(),
            seq_len + 1
        )));
    }
    let mut starts = window_starts(stream.len(), seq_len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates
    for i in (1..starts.len()).rev() {
        let j = rng.gen_range(0..=i);
        starts.swap(i, j);
    }
    Ok(BatchIterator {
        stream,
        window_starts: starts,
        seq_len,
        batch_size,
        cursor: 0,
        keep_partial: false,
    })
}

/// Evaluation batches: every window in stream order, final ragged batch
/// included.
pub fn eval_batches(
    stream: &[u32],
    seq_len: usize,
    batch_size: usize,
) -> Result<BatchIterator<'_>> {
    if batch_size == 0 || seq_len == 0 {
        return Err(Error::config(
            "seq_len and batch_size must be positive".to_string(),
        ));
    }
    if stream.len() <= seq_len {
        return Err(Error::data(format!(
            "stream of {} tokens is too short for windows of {}",
            stream.len(),
            seq_len + 1
        )));
    }
    Ok(BatchIterator {
        stream,
        window_starts: window_starts(stream.len(), seq_len),
        seq_len,
        batch_size,
        cursor: 0,
        keep_partial: true,
    })
}

/// Deterministic English-like filler text: words drawn from a fixed
/// common-word stock under a Zipf-Mandelbrot law, joined by single
/// spaces and truncated to exactly `n_chars` characters. Used when no
/// real corpus file is on disk.
pub fn synthetic_corpus(n_chars: usize, seed: u64) -> String {
    // dedupe the stock, keeping first occurrence as the rank order
    let mut seen = std::collections::HashSet::new();
    let vocab: Vec<&str> = words::WORDS
        .iter()
        .copied()
        .filter(|w| seen.insert(*w))
        .collect();
    let weights: Vec<f64> = (0..vocab.len())
        .map(|rank| 1.0 / (rank as f64 + 2.7).powf(1.05))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::with_capacity(n_chars + 16);
    while out.len() < n_chars {
        let draw: f64 = rng.gen();
        let idx = cumulative
            .partition_point(|&c| c < draw)
            .min(vocab.len() - 1);
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(vocab[idx]);
    }
    out.truncate(n_chars);
    out
}
