use serde::{Deserialize, Serialize};

use super::layers::{Linear, TransformerDecoder, TransformerEncoder};
use crate::docmodel::COORD_MAX;
use crate::error::{Error, Result};

/// Rows of each coordinate embedding table (one per integer coordinate).
pub const COORD_ROWS: usize = COORD_MAX as usize + 1;

/// Pixel channels after 3×3 patch extraction.
const PATCH: usize = 9 * 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub max_tokens: usize,
    pub max_entities: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Layers in each of the three decoders.
    pub decoder_layers: usize,
    /// Output channels of the two convolution layers of the visual pathway.
    pub conv_channels: [usize; 2],
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            vocab_size: 2000,
            hidden_dim: 128,
            n_layers: 4,
            n_heads: 4,
            max_tokens: 256,
            max_entities: 64,
            dropout: 0.1,
            seed: 0,
            decoder_layers: 2,
            conv_channels: [8, 16],
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.hidden_dim == 0
            || self.n_heads == 0
            || !self.hidden_dim.is_multiple_of(self.n_heads)
        {
            return bad("hidden_dim must be a positive multiple of n_heads");
        }
        if self.vocab_size < 1 {
            return bad("vocab_size must be at least 1");
        }
        if self.max_tokens == 0 || self.max_entities == 0 {
            return bad("max_tokens and max_entities must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.conv_channels.contains(&0) {
            return bad("conv_channels must be positive");
        }
        Ok(())
    }

    /// Closed-form parameter count of the general-domain encoders.
    pub fn gde_param_count(&self) -> usize {
        let h = self.hidden_dim;
        let [c1, c2] = self.conv_channels;
        let token = self.vocab_size * h
            + 2 * COORD_ROWS * h
            + self.max_tokens * h
            + TransformerEncoder::param_count(h, self.n_layers);
        let layout = Linear::param_count(3, h);
        let entity = Linear::param_count(PATCH, c1)
            + Linear::param_count(9 * c1, c2)
            + Linear::param_count(c2, h)
            + Linear::param_count(2 * h, h);
        token + layout + entity
    }

    /// Closed-form parameter count of the whole framework for the given
    /// label-space sizes.
    pub fn param_count(&self, n_gold: usize, n_synthetic: usize) -> usize {
        let h = self.hidden_dim;
        let joint = 2 * h + TransformerEncoder::param_count(h, self.n_layers);
        let alignment = 2 * Linear::param_count(h, h);
        let decoder = TransformerDecoder::param_count(h, self.decoder_layers);
        let token_decoder = decoder + Linear::param_count(h, n_synthetic);
        let entity_decoder = decoder;
        let tag_head = Linear::param_count(h, n_gold);
        let retrieval_head = decoder;
        self.gde_param_count()
            + joint
            + alignment
            + token_decoder
            + entity_decoder
            + tag_head
            + retrieval_head
    }
}
