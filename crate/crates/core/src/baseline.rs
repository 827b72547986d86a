//! Forward maximum-matching segmenter over a training vocabulary.

use std::collections::HashSet;
use std::ops::Range;

use crate::corpus::Sentence;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchDict {
    vocabulary: HashSet<String>,
    max_word_len: usize,
}

impl MatchDict {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let vocabulary: HashSet<String> = words
            .into_iter()
            .map(Into::into)
            .filter(|w: &String| !w.is_empty())
            .collect();
        let max_word_len = vocabulary.iter().map(|w| w.chars().count()).max().unwrap_or(0);
        if vocabulary.is_empty() {
            return Err(Error::invalid("dictionary is empty"));
        }
        Ok(MatchDict {
            vocabulary,
            max_word_len,
        })
    }

    /// Vocabulary of the gold words of `sentences`.
    pub fn from_sentences(sentences: &[Sentence]) -> Result<Self> {
        MatchDict::new(sentences.iter().flat_map(|s| s.word_strings()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocabulary.contains(word)
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }
}

/// Greedy left-to-right longest match. Characters that start no dictionary
/// word become single-character words.
pub fn segment_fmm(chars: &[char], dict: &MatchDict) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut buf = String::new();
    while start < chars.len() {
        let longest = dict.max_word_len.min(chars.len() - start);
        let mut end = start + 1;
        for len in (2..=longest).rev() {
            buf.clear();
            buf.extend(&chars[start..start + len]);
            if dict.contains(&buf) {
                end = start + len;
                break;
            }
        }
        out.push(start..end);
        start = end;
    }
    out
}

pub fn segment_sentence(chars: &[char], dict: &MatchDict) -> Result<Sentence> {
    if chars.is_empty() {
        return Err(Error::invalid("cannot segment an empty sentence"));
    }
    Sentence::new(chars.to_vec(), segment_fmm(chars, dict))
}

/// Re-segment the text of each sentence, discarding its segmentation.
pub fn segment_all(sentences: &[Sentence], dict: &MatchDict) -> Vec<Sentence> {
    sentences
        .iter()
        .map(|s| segment_sentence(s.chars(), dict).expect("sentences are non-empty"))
        .collect()
}
