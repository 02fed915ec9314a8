//! Feature templates: bag of n-grams for classification, window and
//! gazetteer features for sequence labeling.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Constant feature that can be appended to every classification input.
pub const BIAS_FEATURE: &str = "__bias__";

/// Splits on ASCII whitespace, optionally lowercasing.
pub fn tokenize(text: &str, lowercase: bool) -> Vec<String> {
    text.split_ascii_whitespace()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_owned() })
        .collect()
}

/// All contiguous n-grams for n in `1..=n_max`, position-major.
pub fn extract_ngrams<S: AsRef<str>>(tokens: &[S], n_max: usize) -> Vec<String> {
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        for n in 1..=n_max.min(tokens.len() - start) {
            out.push(join(&tokens[start..start + n]));
        }
    }
    out
}

fn join<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(t.as_ref());
    }
    s
}

/// A named list of entity phrases, stored lowercased.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gazetteer {
    pub name: String,
    entries: HashSet<String>,
    max_len: usize,
}

impl Gazetteer {
    pub fn new<I, S>(name: &str, phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut entries = HashSet::new();
        let mut max_len = 1;
        for phrase in phrases {
            let tokens = tokenize(phrase.as_ref().trim(), true);
            if tokens.is_empty() {
                continue;
            }
            max_len = max_len.max(tokens.len());
            entries.insert(tokens.join(" "));
        }
        Gazetteer {
            name: name.to_owned(),
            entries,
            max_len,
        }
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.entries.contains(phrase)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Marks tokens covered by a phrase using a left-to-right longest-match
    /// scan, case-insensitive.
    pub fn coverage<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<bool> {
        let lowered: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
        let mut covered = vec![false; tokens.len()];
        let mut i = 0;
        while i < lowered.len() {
            let longest = (1..=self.max_len.min(lowered.len() - i))
                .rev()
                .find(|&n| self.entries.contains(&lowered[i..i + n].join(" ")));
            match longest {
                Some(n) => {
                    covered[i..i + n].iter_mut().for_each(|c| *c = true);
                    i += n;
                }
                None => i += 1,
            }
        }
        covered
    }
}

/// Reads one phrase per line. Phrases are trimmed, lowercased and
/// deduplicated; blank lines are ignored.
pub fn load_gazetteer<P: AsRef<Path>>(path: P, name: &str) -> Result<Gazetteer> {
    let text = fs::read_to_string(path)?;
    Ok(Gazetteer::new(name, text.lines()))
}

const WINDOW: usize = 3;

/// Features for the token at `position`: the word itself, left/right
/// n-grams up to length 3, and one `gaz:<name>` per gazetteer covering it.
pub fn extract_ner_token_features<S: AsRef<str>>(
    tokens: &[S],
    position: usize,
    gazetteers: &[Gazetteer],
) -> Result<Vec<String>> {
    if position >= tokens.len() {
        return Err(Error::PositionOutOfRange {
            pos: position,
            len: tokens.len(),
        });
    }
    let coverage: Vec<Vec<bool>> = gazetteers.iter().map(|g| g.coverage(tokens)).collect();
    Ok(token_features(tokens, position, gazetteers, &coverage))
}

/// Features for every token of a sentence; gazetteer matching runs once.
pub fn extract_ner_sentence_features<S: AsRef<str>>(
    tokens: &[S],
    gazetteers: &[Gazetteer],
) -> Vec<Vec<String>> {
    let coverage: Vec<Vec<bool>> = gazetteers.iter().map(|g| g.coverage(tokens)).collect();
    (0..tokens.len())
        .map(|pos| token_features(tokens, pos, gazetteers, &coverage))
        .collect()
}

fn token_features<S: AsRef<str>>(
    tokens: &[S],
    pos: usize,
    gazetteers: &[Gazetteer],
    coverage: &[Vec<bool>],
) -> Vec<String> {
    let mut out = Vec::with_capacity(1 + 2 * WINDOW + gazetteers.len());
    out.push(format!("w={}", tokens[pos].as_ref()));
    for n in 1..=WINDOW.min(pos) {
        out.push(format!("L{}={}", n, join(&tokens[pos - n..pos])));
    }
    for n in 1..=WINDOW.min(tokens.len() - pos - 1) {
        out.push(format!("R{}={}", n, join(&tokens[pos + 1..pos + 1 + n])));
    }
    for (gazetteer, covered) in gazetteers.iter().zip(coverage) {
        if covered[pos] {
            out.push(format!("gaz:{}", gazetteer.name));
        }
    }
    out
}
