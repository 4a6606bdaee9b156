//! Weight-shared transformer decoder for next-token prediction.
//!
//! One block (attention + feed-forward, pre-layer-norm residual wiring)
//! is applied `n_blocks` times with the same parameters. Sequences enter
//! either through learned absolute position embeddings or through a
//! causal 1-D convolution over the token embeddings; the convolution
//! replaces the position embedding rather than adding to it.

pub mod checkpoint;
pub mod presets;

#[cfg(test)]
mod tests;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{agglo_masked, full_attention, AggloAttentionParams, FullAttentionParams};
use crate::error::{Error, Result};
use crate::tensor::init::{glorot_uniform, ones_param, uniform, zeros_param};
use crate::tensor::{Elem, Tensor, TokenBatch};

/// Layer-norm stabilizer.
pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionKind {
    Full,
    Agglomerative,
}

impl AttentionKind {
    pub fn name(self) -> &'static str {
        match self {
            AttentionKind::Full => "full",
            AttentionKind::Agglomerative => "agglomerative",
        }
    }
}

impl std::str::FromStr for AttentionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(AttentionKind::Full),
            "agglomerative" | "agglo" => Ok(AttentionKind::Agglomerative),
            other => Err(Error::config(format!("unknown attention kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingKind {
    Embedding,
    Convolution,
}

impl EncodingKind {
    pub fn name(self) -> &'static str {
        match self {
            EncodingKind::Embedding => "embedding",
            EncodingKind::Convolution => "convolution",
        }
    }
}

impl std::str::FromStr for EncodingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(EncodingKind::Embedding),
            "convolution" | "conv" => Ok(EncodingKind::Convolution),
            other => Err(Error::config(format!("unknown encoding kind `{other}`"))),
        }
    }
}

/// Architecture description; every trainable scalar count follows from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub attention_kind: AttentionKind,
    pub encoding_kind: EncodingKind,
    pub n_blocks: usize,
    pub seq_len: usize,
    pub d_model: usize,
    pub heads_or_classes: usize,
    pub vocab_size: usize,
    pub ffn_multiplier: usize,
    pub conv_width: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads_or_classes == 0 {
            return Err(Error::config(
                "d_model and heads_or_classes must be positive",
            ));
        }
        if self.d_model % self.heads_or_classes != 0 {
            return Err(Error::config(format!(
                "d_model {} not divisible by heads_or_classes {}",
                self.d_model, self.heads_or_classes
            )));
        }
        if self.seq_len < 1 {
            return Err(Error::config("seq_len must be >= 1"));
        }
        if self.vocab_size < 2 {
            return Err(Error::config("vocab_size must be >= 2"));
        }
        if self.ffn_multiplier == 0 {
            return Err(Error::config("ffn_multiplier must be positive"));
        }
        if self.encoding_kind == EncodingKind::Convolution && self.conv_width == 0 {
            return Err(Error::config("conv_width must be positive"));
        }
        Ok(())
    }

    /// Serialize as the flat `key=value` lines used by checkpoints and
    /// the echoed effective config.
    pub fn to_text(&self) -> String {
        format!(
            "attention={}\nencoding={}\nn_blocks={}\nseq_len={}\nd_model={}\nheads_or_classes={}\nvocab_size={}\nffn_multiplier={}\nconv_width={}\n",
            self.attention_kind.name(),
            self.encoding_kind.name(),
            self.n_blocks,
            self.seq_len,
            self.d_model,
            self.heads_or_classes,
            self.vocab_size,
            self.ffn_multiplier,
            self.conv_width
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("malformed config line `{line}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| -> Result<String> {
            map.get(key)
                .cloned()
                .ok_or_else(|| Error::config(format!("missing config key `{key}`")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::config(format!("config key `{key}` is not a number")))
        };
        let config = ModelConfig {
            attention_kind: get("attention")?.parse()?,
            encoding_kind: get("encoding")?.parse()?,
            n_blocks: parse_usize("n_blocks")?,
            seq_len: parse_usize("seq_len")?,
            d_model: parse_usize("d_model")?,
            heads_or_classes: parse_usize("heads_or_classes")?,
            vocab_size: parse_usize("vocab_size")?,
            ffn_multiplier: parse_usize("ffn_multiplier")?,
            conv_width: parse_usize("conv_width")?,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Exact count of trainable scalars implied by a config.
pub fn count_params(config: &ModelConfig) -> usize {
    let d = config.d_model;
    let m = config.heads_or_classes;
    let v = config.vocab_size;
    let f = config.ffn_multiplier;
    let token_embedding = v * d;
    let encoder = match config.encoding_kind {
        EncodingKind::Embedding => config.seq_len * d,
        EncodingKind::Convolution => config.conv_width * d * d + d,
    };
    let attention = match config.attention_kind {
        // query/key/value/output projections
        AttentionKind::Full => 4 * d * d,
        // two classification affine maps, m projections of d*(d/m), and
        // the d*d recombination
        AttentionKind::Agglomerative => 2 * (d * m + m) + d * d + d * d,
    };
    let layer_norms = 4 * d;
    let ffn = d * (f * d) + f * d + (f * d) * d + d;
    let output_proj = d * v;
    token_embedding + encoder + layer_norms + attention + ffn + output_proj
}

pub enum AttentionParams<E: Elem> {
    Full(FullAttentionParams<E>),
    Agglo(AggloAttentionParams<E>),
}

impl<E: Elem> AttentionParams<E> {
    fn named(&self, prefix: &str) -> Vec<(String, Tensor<E>)> {
        match self {
            AttentionParams::Full(p) => p.named(prefix),
            AttentionParams::Agglo(p) => p.named(prefix),
        }
    }
}

/// The single shared block: pre-norm attention and feed-forward
/// sublayers, each wrapped in a residual connection.
pub struct TransformerBlock<E: Elem> {
    pub ln1_gain: Tensor<E>,
    pub ln1_bias: Tensor<E>,
    pub attention: AttentionParams<E>,
    pub ln2_gain: Tensor<E>,
    pub ln2_bias: Tensor<E>,
    pub ffn_w1: Tensor<E>,
    pub ffn_b1: Tensor<E>,
    pub ffn_w2: Tensor<E>,
    pub ffn_b2: Tensor<E>,
}

pub enum SequenceEncoder<E: Elem> {
    /// Learned absolute position embeddings, added to token embeddings.
    Positions(Tensor<E>),
    /// Causal convolution over token embeddings; no position table.
    Convolution { filter: Tensor<E>, bias: Tensor<E> },
}

pub struct DecoderModel<E: Elem> {
    pub config: ModelConfig,
    pub token_embedding: Tensor<E>,
    pub encoder: SequenceEncoder<E>,
    pub block: TransformerBlock<E>,
    pub output_proj: Tensor<E>,
}

impl<E: Elem> DecoderModel<E> {
    /// Build a freshly initialized model. Initialization draws happen in
    /// the documented parameter order, so a seed pins every weight.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_model;
        let token_embedding = uniform(&mut rng, &[config.vocab_size, d], -0.05, 0.05)?;
        let encoder = match config.encoding_kind {
            EncodingKind::Embedding => {
                SequenceEncoder::Positions(uniform(&mut rng, &[config.seq_len, d], -0.05, 0.05)?)
            }
            EncodingKind::Convolution => SequenceEncoder::Convolution {
                filter: glorot_uniform(
                    &mut rng,
                    &[config.conv_width, d, d],
                    config.conv_width * d,
                    config.conv_width * d,
                )?,
                bias: zeros_param(&[d])?,
            },
        };
        let attention = match config.attention_kind {
            AttentionKind::Full => AttentionParams::Full(FullAttentionParams::init(
                d,
                config.heads_or_classes,
                &mut rng,
            )?),
            AttentionKind::Agglomerative => AttentionParams::Agglo(AggloAttentionParams::init(
                d,
                config.heads_or_classes,
                &mut rng,
            )?),
        };
        let hidden = config.ffn_multiplier * d;
        let block = TransformerBlock {
            ln1_gain: ones_param(&[d])?,
            ln1_bias: zeros_param(&[d])?,
            attention,
            ln2_gain: ones_param(&[d])?,
            ln2_bias: zeros_param(&[d])?,
            ffn_w1: glorot_uniform(&mut rng, &[d, hidden], d, hidden)?,
            ffn_b1: zeros_param(&[hidden])?,
            ffn_w2: glorot_uniform(&mut rng, &[hidden, d], hidden, d)?,
            ffn_b2: zeros_param(&[d])?,
        };
        // Zero logits at initialization: an untrained model scores
        // exactly the uniform baseline, and training starts from an
        // unbiased head.
        let output_proj = zeros_param(&[d, config.vocab_size])?;
        Ok(DecoderModel {
            config: config.clone(),
            token_embedding,
            encoder,
            block,
            output_proj,
        })
    }

    /// All trainable parameters in checkpoint order.
    pub fn named_params(&self) -> Vec<(String, Tensor<E>)> {
        let mut out = vec![("token_embedding".to_string(), self.token_embedding.clone())];
        match &self.encoder {
            SequenceEncoder::Positions(pos) => {
                out.push(("position_embedding".to_string(), pos.clone()))
            }
            SequenceEncoder::Convolution { filter, bias } => {
                out.push(("conv_filter".to_string(), filter.clone()));
                out.push(("conv_bias".to_string(), bias.clone()));
            }
        }
        out.push(("block.ln1_gain".to_string(), self.block.ln1_gain.clone()));
        out.push(("block.ln1_bias".to_string(), self.block.ln1_bias.clone()));
        out.extend(self.block.attention.named("block.attention"));
        out.push(("block.ln2_gain".to_string(), self.block.ln2_gain.clone()));
        out.push(("block.ln2_bias".to_string(), self.block.ln2_bias.clone()));
        out.push(("block.ffn_w1".to_string(), self.block.ffn_w1.clone()));
        out.push(("block.ffn_b1".to_string(), self.block.ffn_b1.clone()));
        out.push(("block.ffn_w2".to_string(), self.block.ffn_w2.clone()));
        out.push(("block.ffn_b2".to_string(), self.block.ffn_b2.clone()));
        out.push(("output_proj".to_string(), self.output_proj.clone()));
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Token ids to width-d representations, by embeddings + positions
    /// or by causal convolution.
    pub fn encode_sequence(&self, tokens: &TokenBatch) -> Result<Tensor<E>> {
        if tokens.cols > self.config.seq_len {
            return Err(Error::contract(format!(
                "sequence of {} exceeds configured maximum {}",
                tokens.cols, self.config.seq_len
            )));
        }
        if tokens.cols == 0 {
            return Err(Error::data("empty token sequence"));
        }
        let embedded = self.token_embedding.embed(tokens)?;
        match &self.encoder {
            SequenceEncoder::Positions(pos) => {
                let window = pos.slice(0, 0, tokens.cols)?;
                embedded.add(&window)
            }
            SequenceEncoder::Convolution { filter, bias } => embedded.causal_conv1d(filter, bias),
        }
    }

    /// Next-token logits at every position; position i depends only on
    /// tokens 1..=i.
    pub fn forward(&self, tokens: &TokenBatch) -> Result<Tensor<E>> {
        let mut x = self.encode_sequence(tokens)?;
        let eps = E::from_f64(LN_EPS);
        for _ in 0..self.config.n_blocks {
            let normed = x.layer_norm(&self.block.ln1_gain, &self.block.ln1_bias, eps)?;
            let attended = match &self.block.attention {
                AttentionParams::Full(p) => full_attention(&normed, &normed, p, true)?,
                AttentionParams::Agglo(p) => agglo_masked(&normed, &normed, p)?,
            };
            x = x.add(&attended)?;
            let normed = x.layer_norm(&self.block.ln2_gain, &self.block.ln2_bias, eps)?;
            let hidden = normed
                .matmul(&self.block.ffn_w1)?
                .add(&self.block.ffn_b1)?
                .relu()
                .matmul(&self.block.ffn_w2)?
                .add(&self.block.ffn_b2)?;
            x = x.add(&hidden)?;
        }
        x.matmul(&self.output_proj)
    }
}

/// Mean next-token cross-entropy in bits (log base 2).
pub fn lm_loss<E: Elem>(logits: &Tensor<E>, targets: &TokenBatch) -> Result<Tensor<E>> {
    let nats = logits.cross_entropy_mean(targets)?;
    Ok(nats.mul_scalar(E::from_f64(1.0 / std::f64::consts::LN_2)))
}

/// Autoregressive sampling from temperature-scaled softmax. The prompt
/// is truncated to the trailing `seq_len` tokens as context; returns
/// prompt followed by `n_tokens` samples. Deterministic for a seed.
pub fn generate<E: Elem>(
    model: &DecoderModel<E>,
    prompt: &[u32],
    n_tokens: usize,
    temperature: f64,
    seed: u64,
) -> Result<Vec<u32>> {
    if temperature <= 0.0 {
        return Err(Error::contract(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let mut out = prompt.to_vec();
    if n_tokens == 0 {
        return Ok(out);
    }
    if out.is_empty() {
        return Err(Error::data("generation needs a non-empty prompt"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_tokens {
        let start = out.len().saturating_sub(model.config.seq_len);
        let context = &out[start..];
        let batch = TokenBatch::new(context.to_vec(), 1, context.len())?;
        let logits = model.forward(&batch)?;
        let v = model.config.vocab_size;
        let all = logits.values();
        let last = &all[(context.len() - 1) * v..context.len() * v];
        let scaled: Vec<f64> = last.iter().map(|&x| x.to_f64() / temperature).collect();
        drop(all);
        let probs = crate::oracle::softmax_row(&scaled);
        let draw: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = v - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if draw < acc {
                chosen = i;
                break;
            }
        }
        out.push(chosen as u32);
    }
    Ok(out)
}
