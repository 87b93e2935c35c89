//! Word-level vocabulary and tokenizer.
//!
//! Text is lowercased and split into runs of alphanumeric characters;
//! every other non-whitespace character is a token of its own.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const UNK_ID: usize = 3;

const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Splits text into lowercase word and punctuation pieces.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Reserved ids first, then tokens by descending frequency with
    /// lexicographic tie-breaks, truncated to `max_size` entries in total.
    pub fn build<S: AsRef<str>>(corpus: &[S], max_size: usize) -> Result<Self> {
        if max_size < 5 {
            return Err(Error::Config(format!(
                "vocabulary size {max_size} leaves no room beyond the reserved tokens"
            )));
        }
        if corpus.is_empty() {
            return Err(Error::Input("vocabulary corpus is empty".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in corpus {
            for w in split_words(text.as_ref()) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(
            ranked
                .into_iter()
                .map(|(w, _)| w)
                .filter(|w| !RESERVED.contains(&w.as_str()))
                .take(max_size - RESERVED.len()),
        );
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { tokens, index })
    }

    /// Vocabulary over the evaluation prompts and baseline keywords.
    pub fn default_for(max_size: usize) -> Result<Self> {
        Self::build(&crate::corpus::vocabulary_corpus(), max_size)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// BOS, word ids, EOS; words are dropped from the end so that EOS
    /// always fits within `context_length`.
    pub fn tokenize(&self, text: &str, context_length: usize) -> Result<TokenSequence> {
        if context_length < 2 {
            return Err(Error::Config(format!(
                "context length {context_length} cannot hold BOS and EOS"
            )));
        }
        let mut ids = vec![BOS_ID];
        ids.extend(split_words(text).iter().take(context_length - 2).map(|w| self.id(w)));
        ids.push(EOS_ID);
        Ok(TokenSequence {
            eos_position: ids.len() - 1,
            ids,
        })
    }
}

/// A tokenized prompt: BOS at position 0, exactly one EOS at the end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    ids: Vec<usize>,
    eos_position: usize,
}

impl TokenSequence {
    /// Wraps raw ids, checking the BOS/EOS framing.
    pub fn from_ids(ids: Vec<usize>) -> Result<Self> {
        let n = ids.len();
        let framed = n >= 2 && ids[0] == BOS_ID && ids[n - 1] == EOS_ID && ids[..n - 1].iter().all(|&i| i != EOS_ID);
        if !framed {
            return Err(Error::Contract(format!(
                "token ids {ids:?} are not framed by a single BOS and EOS"
            )));
        }
        Ok(Self {
            eos_position: n - 1,
            ids,
        })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn eos_position(&self) -> usize {
        self.eos_position
    }

    /// Same sequence with the token at `pos` replaced; `pos` must be a
    /// content position strictly between BOS and EOS.
    pub fn with_token(&self, pos: usize, id: usize) -> Result<Self> {
        if pos == 0 || pos >= self.eos_position || id == EOS_ID || id == BOS_ID {
            return Err(Error::Contract(format!("cannot place id {id} at position {pos}")));
        }
        let mut ids = self.ids.clone();
        ids[pos] = id;
        Ok(Self {
            ids,
            eos_position: self.eos_position,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_order_after_reserved_ids() {
        let v = Vocabulary::build(&["a b a"], 10).unwrap();
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("zebra"), UNK_ID);
    }

    #[test]
    fn ties_break_lexicographically_and_truncate() {
        let v = Vocabulary::build(&["d c b a"], 6).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.id("c"), UNK_ID);
    }

    #[test]
    fn tiny_vocabulary_is_a_config_error() {
        assert!(matches!(Vocabulary::build(&["a"], 4), Err(Error::Config(_))));
    }

    #[test]
    fn empty_prompt_is_bos_eos() {
        let v = Vocabulary::build(&["a"], 10).unwrap();
        let t = v.tokenize("", 77).unwrap();
        assert_eq!(t.ids(), &[BOS_ID, EOS_ID]);
        assert_eq!(t.eos_position(), 1);
    }

    #[test]
    fn punctuation_is_its_own_token() {
        assert_eq!(
            split_words("A fountain, sculpture"),
            ["a", "fountain", ",", "sculpture"]
        );
        assert_eq!(split_words("hyper-detailed 4k"), ["hyper", "-", "detailed", "4k"]);
        assert_eq!(split_words("Stålenhag's"), ["stålenhag", "'", "s"]);
    }

    #[test]
    fn fountain_prompt_tokens() {
        let v = Vocabulary::default_for(512).unwrap();
        let t = v.tokenize("A fountain, sculpture", 77).unwrap();
        let expect: Vec<usize> = ["a", "fountain", ",", "sculpture"].iter().map(|w| v.id(w)).collect();
        assert_eq!(t.ids()[0], BOS_ID);
        assert_eq!(&t.ids()[1..5], expect.as_slice());
        assert_eq!(t.ids()[5], EOS_ID);
        assert!(expect.iter().all(|&i| i != UNK_ID));
    }

    #[test]
    fn long_text_is_truncated_to_context() {
        let v = Vocabulary::build(&["w"], 10).unwrap();
        let text = "w ".repeat(100);
        let t = v.tokenize(&text, 8).unwrap();
        assert_eq!(t.len(), 8);
        assert_eq!(t.eos_position(), 7);
        assert_eq!(t.ids()[7], EOS_ID);
    }

    #[test]
    fn every_table_prompt_round_trips_without_unknowns() {
        let v = Vocabulary::default_for(512).unwrap();
        assert!(v.len() <= 512);
        for p in crate::corpus::PROMPTS {
            let t = v.tokenize(p, 512).unwrap();
            assert!(t.ids()[1..t.eos_position()].iter().all(|&i| i != UNK_ID), "{p}");
            let words: Vec<&str> = t.ids()[1..t.eos_position()]
                .iter()
                .map(|&i| v.token(i).unwrap())
                .collect();
            assert_eq!(words, split_words(p));
        }
    }

    #[test]
    fn framing_is_checked() {
        assert!(TokenSequence::from_ids(vec![BOS_ID, 5, EOS_ID]).is_ok());
        assert!(TokenSequence::from_ids(vec![5, EOS_ID]).is_err());
        assert!(TokenSequence::from_ids(vec![BOS_ID, EOS_ID, 4, EOS_ID]).is_err());
    }
}
