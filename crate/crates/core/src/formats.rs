//! Dataset file formats: `__label__`-prefixed text lines for classification
//! and CoNLL columns for sequence labeling.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::{ClassifiedExample, Dataset, RawClassified, RawSequence, SequenceExample};
use crate::error::{Error, Result};
use crate::features::{extract_ngrams, extract_ner_sentence_features, tokenize, Gazetteer, BIAS_FEATURE};

pub const LABEL_PREFIX: &str = "__label__";

/// Featurization settings for classification text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextOptions {
    pub n_max: usize,
    pub lowercase: bool,
    pub bias: bool,
}

impl Default for TextOptions {
    fn default() -> Self {
        TextOptions {
            n_max: 2,
            lowercase: true,
            bias: false,
        }
    }
}

impl TextOptions {
    pub fn with_ngrams(n_max: usize) -> Self {
        TextOptions {
            n_max,
            ..Default::default()
        }
    }

    /// Feature strings for one text.
    pub fn featurize(&self, text: &str) -> Vec<String> {
        let mut features = extract_ngrams(&tokenize(text, self.lowercase), self.n_max);
        if self.bias {
            features.push(BIAS_FEATURE.to_owned());
        }
        features
    }
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Splits a labeled line into its label and text. `line_no` is 1-based and
/// only used for error messages.
pub fn parse_labeled_line<'a>(path: &Path, line_no: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    let trimmed = line.trim_start();
    let (first, rest) = match trimmed.find(|c: char| c.is_ascii_whitespace()) {
        Some(i) => (&trimmed[..i], &trimmed[i..]),
        None => (trimmed, ""),
    };
    let label = first
        .strip_prefix(LABEL_PREFIX)
        .filter(|l| !l.is_empty())
        .ok_or_else(|| parse_error(path, line_no, "missing __label__ prefix"))?;
    if rest.split_ascii_whitespace().any(|t| t.starts_with(LABEL_PREFIX)) {
        return Err(parse_error(path, line_no, "multiple labels unsupported"));
    }
    Ok((label, rest))
}

/// Reads a classification file into raw examples. Blank lines are skipped.
pub fn read_classification_raw<P: AsRef<Path>>(path: P, opts: &TextOptions) -> Result<Vec<RawClassified>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, body) = parse_labeled_line(path, i + 1, line)?;
        out.push(RawClassified {
            label: label.to_owned(),
            features: opts.featurize(body),
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

/// Reads a classification file and builds its alphabets.
pub fn read_classification_file<P: AsRef<Path>>(
    path: P,
    opts: &TextOptions,
) -> Result<Dataset<ClassifiedExample>> {
    Dataset::from_raw(&read_classification_raw(path, opts)?)
}

/// One CoNLL sentence with all of its columns kept verbatim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConllSentence {
    pub rows: Vec<Vec<String>>,
}

impl ConllSentence {
    pub fn tokens(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r[0].as_str()).collect()
    }

    pub fn tags(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r[r.len() - 1].as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Parses CoNLL text: token in the first column, tag in the last, blank
/// lines between sentences, `-DOCSTART-` lines skipped.
pub fn parse_conll(path: &Path, text: &str) -> Result<Vec<ConllSentence>> {
    parse_conll_columns(path, text, 2)
}

/// Like [`parse_conll`] but accepts rows with as few as `min_columns`
/// columns, e.g. 1 for untagged input.
pub fn parse_conll_columns(path: &Path, text: &str, min_columns: usize) -> Result<Vec<ConllSentence>> {
    let mut sentences = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let columns: Vec<String> = line.split_whitespace().map(str::to_owned).collect();
        if columns.is_empty() {
            if !rows.is_empty() {
                sentences.push(ConllSentence {
                    rows: std::mem::take(&mut rows),
                });
            }
            continue;
        }
        if columns[0] == "-DOCSTART-" {
            continue;
        }
        if columns.len() < min_columns {
            return Err(parse_error(path, i + 1, format!("expected at least {min_columns} columns")));
        }
        if let Some(first) = rows.first() {
            if first.len() != columns.len() {
                return Err(parse_error(
                    path,
                    i + 1,
                    format!("expected {} columns, found {}", first.len(), columns.len()),
                ));
            }
        }
        rows.push(columns);
    }
    if !rows.is_empty() {
        sentences.push(ConllSentence { rows });
    }
    if sentences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(sentences)
}

pub fn read_conll_sentences<P: AsRef<Path>>(path: P) -> Result<Vec<ConllSentence>> {
    let path = path.as_ref();
    parse_conll(path, &fs::read_to_string(path)?)
}

/// Reads CoNLL input whose rows may hold only a token.
pub fn read_conll_tokens<P: AsRef<Path>>(path: P) -> Result<Vec<ConllSentence>> {
    let path = path.as_ref();
    parse_conll_columns(path, &fs::read_to_string(path)?, 1)
}

/// Writes sentences back as CoNLL, optionally appending a predicted column.
pub fn write_conll(sentences: &[ConllSentence], predicted: Option<&[Vec<String>]>) -> String {
    let mut out = String::new();
    for (s, sentence) in sentences.iter().enumerate() {
        for (t, row) in sentence.rows.iter().enumerate() {
            out.push_str(&row.join(" "));
            if let Some(pred) = predicted {
                let _ = write!(out, " {}", pred[s][t]);
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Featurizes sentences with the window and gazetteer templates.
pub fn conll_to_raw(sentences: &[ConllSentence], gazetteers: &[Gazetteer]) -> Vec<RawSequence> {
    sentences
        .iter()
        .map(|s| RawSequence {
            token_features: extract_ner_sentence_features(&s.tokens(), gazetteers),
            labels: s.tags().into_iter().map(str::to_owned).collect(),
        })
        .collect()
}

/// Reads a CoNLL file and builds its alphabets.
pub fn read_conll<P: AsRef<Path>>(path: P, gazetteers: &[Gazetteer]) -> Result<Dataset<SequenceExample>> {
    Dataset::from_raw(&conll_to_raw(&read_conll_sentences(path)?, gazetteers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn file_with(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn classification_line() {
        let f = file_with("__label__pos great movie\n\n__label__neg Bad\n");
        let ds = read_classification_file(f.path(), &TextOptions::default()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels.string_of(0), Some("pos"));
        for feat in ["great", "movie", "great movie", "bad"] {
            assert!(ds.features.id_of(feat).is_some(), "missing {feat}");
        }
        assert_eq!(ds.examples[0].features.len(), 3);
    }

    #[test]
    fn classification_errors() {
        let f = file_with("__label__a ok\nno label here\n");
        match read_classification_raw(f.path(), &TextOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let f = file_with("__label__a __label__b text\n");
        match read_classification_raw(f.path(), &TextOptions::default()) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("multiple labels")),
            other => panic!("unexpected {other:?}"),
        }
        let f = file_with("");
        assert!(matches!(
            read_classification_raw(f.path(), &TextOptions::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn bias_feature_optional() {
        let opts = TextOptions {
            bias: true,
            ..TextOptions::with_ngrams(1)
        };
        assert_eq!(opts.featurize("A b"), vec!["a", "b", BIAS_FEATURE]);
    }

    #[test]
    fn conll_sentences() {
        let text = "-DOCSTART- -X- O\n\nEU NNP B-ORG\nrejects VBZ O\n\nPeter NNP B-PER\n";
        let s = parse_conll(Path::new("t"), text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].tokens(), vec!["EU", "rejects"]);
        assert_eq!(s[0].tags(), vec!["B-ORG", "O"]);

        let ds = Dataset::from_raw(&conll_to_raw(&s, &[])).unwrap();
        assert_eq!(ds.examples[0].labels, vec![0, 1]);
    }

    #[test]
    fn conll_errors() {
        assert!(matches!(
            parse_conll(Path::new("t"), "-DOCSTART- -X- O\n\n\n"),
            Err(Error::EmptyDataset)
        ));
        match parse_conll(Path::new("t"), "a X O\nb O\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn conll_round_trip(sentences in prop::collection::vec(
            prop::collection::vec(("[A-Za-z]{1,6}", "(O|B-PER|I-PER|B-LOC)"), 1..6), 1..5)
        ) {
            let text: String = sentences.iter().map(|s| {
                s.iter().map(|(t, g)| format!("{t} {g}\n")).collect::<String>() + "\n"
            }).collect();
            let parsed = parse_conll(Path::new("t"), &text).unwrap();
            prop_assert_eq!(write_conll(&parsed, None), text);
        }
    }
}
