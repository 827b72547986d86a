//! Segmented corpora, BMES labels and word spans.
//!
//! Input files hold one sentence per line with words separated by runs of
//! whitespace. A "character" is a Unicode scalar value.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-character tag of the BMES scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    B,
    M,
    E,
    S,
}

impl Tag {
    pub fn as_char(self) -> char {
        match self {
            Tag::B => 'B',
            Tag::M => 'M',
            Tag::E => 'E',
            Tag::S => 'S',
        }
    }

    pub fn from_char(c: char) -> Option<Tag> {
        match c {
            'B' => Some(Tag::B),
            'M' => Some(Tag::M),
            'E' => Some(Tag::E),
            'S' => Some(Tag::S),
            _ => None,
        }
    }
}

/// Tag sequence of one word, one tag per character.
///
/// Gold derivation only ever produces the canonical pattern (`S` or
/// `B M* E`), but arbitrary sequences can be constructed for queries such
/// as the label consistency of a non-canonical labeling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelSeq(Vec<Tag>);

impl LabelSeq {
    pub fn new(tags: Vec<Tag>) -> Result<Self> {
        if tags.is_empty() {
            return Err(Error::invalid("label sequence must not be empty"));
        }
        Ok(LabelSeq(tags))
    }

    pub fn tags(&self) -> &[Tag] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Whether this is the pattern `derive_labels` produces for its length.
    pub fn is_canonical(&self) -> bool {
        match self.0.as_slice() {
            [Tag::S] => true,
            [Tag::B, middle @ .., Tag::E] => middle.iter().all(|&t| t == Tag::M),
            _ => false,
        }
    }
}

impl fmt::Display for LabelSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for tag in &self.0 {
            write!(f, "{}", tag.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for LabelSeq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tags = s
            .chars()
            .map(|c| Tag::from_char(c).ok_or_else(|| Error::invalid(format!("bad tag {c:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        LabelSeq::new(tags)
    }
}

/// The unique BMES pattern of a word with `word_length` characters.
pub fn derive_labels(word_length: usize) -> Result<LabelSeq> {
    let tags = match word_length {
        0 => return Err(Error::invalid("word length must be at least 1")),
        1 => vec![Tag::S],
        n => {
            let mut tags = Vec::with_capacity(n);
            tags.push(Tag::B);
            tags.extend(std::iter::repeat_n(Tag::M, n - 2));
            tags.push(Tag::E);
            tags
        }
    };
    Ok(LabelSeq(tags))
}

/// A sentence together with its segmentation into words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    chars: Vec<char>,
    words: Vec<Range<usize>>,
}

impl Sentence {
    /// Build a sentence from a character sequence and word ranges. The
    /// ranges must be non-empty and tile `chars` from left to right.
    pub fn new(chars: Vec<char>, words: Vec<Range<usize>>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::invalid("sentence has no words"));
        }
        let mut expected_start = 0;
        for w in &words {
            if w.start != expected_start || w.end <= w.start {
                return Err(Error::invalid(format!(
                    "word range {}..{} does not continue the tiling at {}",
                    w.start, w.end, expected_start
                )));
            }
            expected_start = w.end;
        }
        if expected_start != chars.len() {
            return Err(Error::invalid(format!(
                "words cover {} of {} characters",
                expected_start,
                chars.len()
            )));
        }
        Ok(Sentence { chars, words })
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let mut chars = Vec::new();
        let mut ranges = Vec::with_capacity(words.len());
        for w in words {
            let start = chars.len();
            chars.extend(w.as_ref().chars());
            ranges.push(start..chars.len());
        }
        Sentence::new(chars, ranges)
    }

    /// Parse one line of whitespace-separated words.
    pub fn parse_line(line: &str) -> Result<Self> {
        let words: Vec<&str> = line.split_whitespace().collect();
        Sentence::from_words(&words)
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn words(&self) -> &[Range<usize>] {
        &self.words
    }

    pub fn char_len(&self) -> usize {
        self.chars.len()
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn word(&self, index: usize) -> String {
        self.chars[self.words[index].clone()].iter().collect()
    }

    pub fn word_strings(&self) -> impl Iterator<Item = String> + '_ {
        self.words.iter().map(|r| self.chars[r.clone()].iter().collect())
    }

    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }

    /// Words joined by a single ASCII space.
    pub fn to_line(&self) -> String {
        self.word_strings().collect::<Vec<_>>().join(" ")
    }
}

/// One labeled word occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub sentence_index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub labels: LabelSeq,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn key(&self) -> (usize, usize, usize) {
        (self.sentence_index, self.start, self.end)
    }
}

pub fn extract_spans(sentence: &Sentence, sentence_index: usize) -> Vec<Span> {
    sentence
        .words()
        .iter()
        .map(|r| Span {
            sentence_index,
            start: r.start,
            end: r.end,
            text: sentence.chars()[r.clone()].iter().collect(),
            labels: derive_labels(r.len()).expect("sentence words are non-empty"),
        })
        .collect()
}

/// Spans of every sentence, indexed by position in `sentences`.
pub fn spans_of(sentences: &[Sentence]) -> Vec<Span> {
    sentences
        .iter()
        .enumerate()
        .flat_map(|(i, s)| extract_spans(s, i))
        .collect()
}

/// Character substitution table read from a two-column mapping file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CharMap(HashMap<char, char>);

impl CharMap {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut map = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let single = |s: &str| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Some(c),
                    _ => None,
                }
            };
            match cols.as_slice() {
                [from, to] => match (single(from), single(to)) {
                    (Some(f), Some(t)) => {
                        map.insert(f, t);
                    }
                    _ => return Err(format!("line {}: columns must be single characters", lineno + 1)),
                },
                _ => return Err(format!("line {}: expected two columns", lineno + 1)),
            }
        }
        Ok(CharMap(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_utf8(path)?;
        CharMap::parse(&text).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn apply(&self, c: char) -> char {
        self.0.get(&c).copied().unwrap_or(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Counters collected while parsing a segmented file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub lines: usize,
    pub sentences: usize,
    /// Lines made only of whitespace; they are skipped.
    pub whitespace_only_lines: usize,
}

/// Parse segmented text held in memory. Empty lines are skipped silently,
/// whitespace-only lines are skipped and counted.
pub fn parse_segmented_str(text: &str, map: Option<&CharMap>) -> (Vec<Sentence>, ParseReport) {
    let mut report = ParseReport::default();
    let mut sentences = Vec::new();
    for line in text.split('\n') {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        report.lines += 1;
        let mapped;
        let line = match map {
            Some(m) if !m.is_empty() => {
                mapped = line.chars().map(|c| m.apply(c)).collect::<String>();
                mapped.as_str()
            }
            _ => line,
        };
        match Sentence::parse_line(line) {
            Ok(s) => sentences.push(s),
            Err(_) => report.whitespace_only_lines += 1,
        }
    }
    report.sentences = sentences.len();
    (sentences, report)
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })
}

pub fn parse_segmented_file(path: &Path, map: Option<&CharMap>) -> Result<(Vec<Sentence>, ParseReport)> {
    let text = read_utf8(path)?;
    let (sentences, report) = parse_segmented_str(&text, map);
    if report.whitespace_only_lines > 0 {
        log::warn!(
            "{}: skipped {} whitespace-only line(s)",
            path.display(),
            report.whitespace_only_lines
        );
    }
    Ok((sentences, report))
}

/// Serialize sentences as segmented lines, LF-terminated.
pub fn to_segmented_text(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&s.to_line());
        out.push('\n');
    }
    out
}

/// A named corpus with its splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, train: Vec<Sentence>, dev: Vec<Sentence>, test: Vec<Sentence>) -> Self {
        Corpus {
            name: name.into(),
            train,
            dev,
            test,
        }
    }
}
