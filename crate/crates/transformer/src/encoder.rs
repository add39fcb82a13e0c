use std::path::Path;

use antisexism_core::classifier::ClassifierError;
use candle_core::{Device, Tensor};
use tokenizers::decoders::wordpiece::WordPiece as WordPieceDecoder;
use tokenizers::models::wordpiece::WordPiece;
use tokenizers::normalizers::BertNormalizer;
use tokenizers::pre_tokenizers::bert::BertPreTokenizer;
use tokenizers::processors::bert::BertProcessing;
use tokenizers::Tokenizer;

use crate::hub::TokenizerFile;

fn backend(e: impl std::fmt::Display) -> ClassifierError {
    ClassifierError::Backend(e.to_string())
}

/// Turns texts into padded id batches, truncating to a fixed length.
pub(crate) struct TextEncoder {
    tokenizer: Tokenizer,
    max_len: usize,
    pad_id: u32,
    sep_id: u32,
}

pub(crate) struct Batch {
    pub ids: Tensor,
    pub type_ids: Tensor,
    pub mask: Tensor,
}

impl TextEncoder {
    pub fn new(tokenizer: Tokenizer, max_len: usize) -> Result<Self, ClassifierError> {
        let id = |t: &str| tokenizer.token_to_id(t).ok_or_else(|| backend(format!("tokenizer has no {t} token")));
        let sep_id = id("[SEP]")?;
        let pad_id = id("[PAD]")?;
        Ok(TextEncoder { tokenizer, max_len, pad_id, sep_id })
    }

    pub fn load(file: &TokenizerFile, max_len: usize) -> Result<Self, ClassifierError> {
        let tokenizer = match file {
            TokenizerFile::Json(path) => Tokenizer::from_file(path).map_err(backend)?,
            TokenizerFile::Vocab { path, lowercase } => wordpiece_tokenizer(path, *lowercase)?,
        };
        Self::new(tokenizer, max_len)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        self.tokenizer.save(path, false).map_err(backend)
    }

    /// Token ids with special tokens, and whether the text had to be cut.
    pub fn encode(&self, text: &str) -> Result<(Vec<u32>, bool), ClassifierError> {
        let enc = self.tokenizer.encode(text, true).map_err(backend)?;
        let mut ids = enc.get_ids().to_vec();
        let truncated = ids.len() > self.max_len;
        if truncated {
            ids.truncate(self.max_len - 1);
            ids.push(self.sep_id);
        }
        Ok((ids, truncated))
    }

    pub fn batch(&self, rows: &[&[u32]], device: &Device) -> Result<Batch, ClassifierError> {
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut ids = Vec::with_capacity(rows.len() * width);
        let mut mask = Vec::with_capacity(rows.len() * width);
        for r in rows {
            ids.extend_from_slice(r);
            ids.extend(std::iter::repeat_n(self.pad_id, width - r.len()));
            mask.extend(std::iter::repeat_n(1u32, r.len()));
            mask.extend(std::iter::repeat_n(0u32, width - r.len()));
        }
        let shape = (rows.len(), width);
        let ids = Tensor::from_vec(ids, shape, device).map_err(backend)?;
        let mask = Tensor::from_vec(mask, shape, device).map_err(backend)?;
        let type_ids = ids.zeros_like().map_err(backend)?;
        Ok(Batch { ids, type_ids, mask })
    }
}

fn wordpiece_tokenizer(vocab: &Path, lowercase: bool) -> Result<Tokenizer, ClassifierError> {
    let path = vocab.to_str().ok_or_else(|| backend("vocabulary path is not UTF-8"))?;
    let model = WordPiece::from_file(path).unk_token("[UNK]".into()).build().map_err(backend)?;
    let mut tokenizer = Tokenizer::new(model);
    let id = |t: &str| tokenizer.token_to_id(t).ok_or_else(|| backend(format!("vocabulary has no {t} token")));
    let (cls, sep) = (id("[CLS]")?, id("[SEP]")?);
    tokenizer
        .with_normalizer(Some(BertNormalizer::new(true, true, Some(lowercase), lowercase)))
        .with_pre_tokenizer(Some(BertPreTokenizer))
        .with_post_processor(Some(BertProcessing::new(("[SEP]".into(), sep), ("[CLS]".into(), cls))))
        .with_decoder(Some(WordPieceDecoder::default()));
    Ok(tokenizer)
}
