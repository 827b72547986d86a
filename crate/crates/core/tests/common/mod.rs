//! Random toy corpora shared by the property and acceptance suites.
#![allow(dead_code)]

use rand::Rng;
use segdiag::corpus::Sentence;

/// A small alphabet so random corpora share words and characters.
pub const ALPHABET: [char; 8] = ['甲', '乙', '丙', '丁', '戊', '己', '庚', '辛'];

/// Build a sentence from characters and "boundary after this char" flags.
pub fn sentence_from(chars: &[char], boundaries: &[bool]) -> Sentence {
    let mut words = Vec::new();
    let mut start = 0;
    for (i, &boundary) in boundaries.iter().enumerate().take(chars.len()) {
        if i + 1 == chars.len() || boundary {
            words.push(start..i + 1);
            start = i + 1;
        }
    }
    Sentence::new(chars.to_vec(), words).unwrap()
}

pub fn random_sentence<R: Rng>(rng: &mut R, alphabet: &[char], max_len: usize) -> Sentence {
    let len = rng.gen_range(1..=max_len);
    let chars: Vec<char> = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
    resegment_chars(rng, &chars)
}

fn resegment_chars<R: Rng>(rng: &mut R, chars: &[char]) -> Sentence {
    let boundaries: Vec<bool> = (0..chars.len()).map(|_| rng.gen_bool(0.5)).collect();
    sentence_from(chars, &boundaries)
}

/// Same characters, independent random segmentation.
pub fn resegment<R: Rng>(rng: &mut R, s: &Sentence) -> Sentence {
    resegment_chars(rng, s.chars())
}

/// Copy of `s` with each boundary flipped with probability `p`.
pub fn perturb<R: Rng>(rng: &mut R, s: &Sentence, p: f64) -> Sentence {
    let mut boundaries = vec![false; s.char_len()];
    for w in s.words() {
        boundaries[w.end - 1] = true;
    }
    for b in boundaries.iter_mut().take(s.char_len().saturating_sub(1)) {
        if rng.gen_bool(p) {
            *b = !*b;
        }
    }
    sentence_from(s.chars(), &boundaries)
}

pub fn random_corpus<R: Rng>(rng: &mut R, alphabet: &[char], sentences: usize, max_len: usize) -> Vec<Sentence> {
    (0..sentences)
        .map(|_| random_sentence(rng, alphabet, max_len))
        .collect()
}
