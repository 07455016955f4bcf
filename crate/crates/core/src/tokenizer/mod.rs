//! Byte-level BPE and the synthetic per-language density model.

mod bpe;
mod density;

pub use bpe::{train_bpe, BpeError, BpeVocab, TokenId, BASE_VOCAB, BPE_FORMAT};
pub use density::{
    synth_all, synth_trace, DensityError, DensityModel, InputLengthSampler, LanguageDensity,
    DEFAULT_FLOOR,
};
