//! Named model configurations for the four character-level benchmarks:
//! both attention kinds crossed with both sequence encodings, at 5
//! shared-block applications, context 128, width 64, 8 heads/classes
//! over the 27-symbol character vocabulary.

use super::{AttentionKind, EncodingKind, ModelConfig};

pub const PRESET_NAMES: [&str; 4] = [
    "text8_full_embed",
    "text8_full_conv",
    "text8_agglo_embed",
    "text8_agglo_conv",
];

fn base(attention_kind: AttentionKind, encoding_kind: EncodingKind) -> ModelConfig {
    ModelConfig {
        attention_kind,
        encoding_kind,
        n_blocks: 5,
        seq_len: 128,
        d_model: 64,
        heads_or_classes: 8,
        vocab_size: 27,
        ffn_multiplier: 4,
        conv_width: 8,
    }
}

pub fn preset(name: &str) -> Option<ModelConfig> {
    match name {
        "text8_full_embed" => Some(base(AttentionKind::Full, EncodingKind::Embedding)),
        "text8_full_conv" => Some(base(AttentionKind::Full, EncodingKind::Convolution)),
        "text8_agglo_embed" => Some(base(AttentionKind::Agglomerative, EncodingKind::Embedding)),
        "text8_agglo_conv" => Some(base(
            AttentionKind::Agglomerative,
            EncodingKind::Convolution,
        )),
        _ => None,
    }
}
