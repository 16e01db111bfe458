//! Tokenization, single-question detection, and word-embedding tables.
//!
//! The tokenizer is rule-based and dependency-free: maximal runs of
//! letters, digits, and apostrophes form word tokens, and every other
//! non-whitespace character becomes a single-character token. Sentence
//! splitting is likewise rule-based (`.`, `!`, `?` followed by whitespace
//! or end of text, with a fixed abbreviation exception list), so the whole
//! preprocessing path is reproducible from source alone.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel row index for tokens absent from an [`EmbeddingTable`].
pub const OOV: u32 = u32::MAX;

/// Abbreviations whose trailing period does not end a sentence.
const ABBREVIATIONS: [&str; 7] = ["Mr.", "Mrs.", "Dr.", "U.S.", "e.g.", "i.e.", "vs."];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

/// True for tokens that are word runs rather than punctuation marks.
pub fn is_word_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(is_word_char)
}

/// A tokenized text with per-token character spans into the original body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
    /// Half-open `[start, end)` character offsets, one per token.
    spans: Vec<(usize, usize)>,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Builds a sequence from bare tokens, synthesizing spans as if the
    /// tokens were joined by single spaces. Used for pre-tokenized input.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = TokenSequence {
            tokens: Vec::new(),
            spans: Vec::new(),
        };
        let mut pos = 0usize;
        for t in tokens {
            let t: String = t.into();
            let n = t.chars().count();
            out.spans.push((pos, pos + n));
            pos += n + 1;
            out.tokens.push(t);
        }
        out
    }
}

/// Splits `text` into tokens.
///
/// Maximal runs of letters, digits, and apostrophes become word tokens;
/// each remaining non-whitespace character becomes a single-character
/// token. Spans are character offsets into `text`.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut word = String::new();
    let mut word_start = 0usize;
    for (ci, ch) in text.chars().enumerate() {
        if is_word_char(ch) {
            if word.is_empty() {
                word_start = ci;
            }
            word.push(ch);
        } else {
            if !word.is_empty() {
                spans.push((word_start, ci));
                tokens.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
                spans.push((ci, ci + 1));
            }
        }
    }
    if !word.is_empty() {
        spans.push((word_start, word_start + word.chars().count()));
        tokens.push(word);
    }
    TokenSequence { tokens, spans }
}

fn ends_with_abbreviation(prefix: &str) -> bool {
    for abbr in ABBREVIATIONS {
        let alen = abbr.len(); // all-ASCII
        if prefix.len() < alen || !prefix.is_char_boundary(prefix.len() - alen) {
            continue;
        }
        if !prefix[prefix.len() - alen..].eq_ignore_ascii_case(abbr) {
            continue;
        }
        let before = prefix[..prefix.len() - alen].chars().next_back();
        if before.is_none_or(|c| !c.is_alphanumeric()) {
            return true;
        }
    }
    false
}

/// Splits `text` into sentences.
///
/// A sentence ends at `.`, `!`, or `?` when the terminator is followed by
/// whitespace or the end of the text. Consecutive terminators (`?!`, `...`)
/// stay inside one sentence, and a period closing a known abbreviation does
/// not split. A trailing unterminated segment counts as a sentence.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let mut seg_start = 0usize;
    let mut iter = text.char_indices().peekable();
    while let Some((bi, ch)) = iter.next() {
        if ch != '.' && ch != '!' && ch != '?' {
            continue;
        }
        let at_break = iter.peek().is_none_or(|&(_, next)| next.is_whitespace());
        if !at_break {
            continue;
        }
        if ch == '.' && ends_with_abbreviation(&text[..bi + 1]) {
            continue;
        }
        let seg = text[seg_start..bi + 1].trim();
        if !seg.is_empty() {
            sentences.push(seg);
        }
        seg_start = bi + ch.len_utf8();
    }
    let tail = text[seg_start..].trim();
    if !tail.is_empty() {
        sentences.push(tail);
    }
    sentences
}

/// True iff the trimmed text ends with `?` and the sentence splitter finds
/// exactly one sentence.
pub fn is_single_question(text: &str) -> bool {
    let t = text.trim();
    !t.is_empty() && t.ends_with('?') && split_sentences(t).len() == 1
}

/// Replaces markdown link syntax with its anchor text and strips emphasis
/// markers.
///
/// `[anchor](url)` and `![anchor](url)` become `anchor`, so a `?` inside a
/// URL never reaches question detection. `*` is removed everywhere; `_` is
/// removed unless both neighbors are alphanumeric, which keeps snake_case
/// identifiers intact.
pub fn strip_markdown(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut no_links = String::with_capacity(text.len());
    let mut i = 0usize;
    while i < chars.len() {
        let link_at = if chars[i] == '[' {
            Some(i)
        } else if chars[i] == '!' && chars.get(i + 1) == Some(&'[') {
            Some(i + 1)
        } else {
            None
        };
        if let Some(open) = link_at {
            if let Some((anchor, after)) = parse_link(&chars, open) {
                no_links.push_str(&anchor);
                i = after;
                continue;
            }
        }
        no_links.push(chars[i]);
        i += 1;
    }

    let chars: Vec<char> = no_links.chars().collect();
    let mut out = String::with_capacity(no_links.len());
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '*' => {}
            '_' => {
                let prev_word = i > 0 && chars[i - 1].is_alphanumeric();
                let next_word = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
                if prev_word && next_word {
                    out.push(c);
                }
            }
            _ => out.push(c),
        }
    }
    out
}

/// Tries to parse `[anchor](url)` starting at the `[` in `chars[open]`.
/// Returns the anchor text and the index just past the closing `)`.
fn parse_link(chars: &[char], open: usize) -> Option<(String, usize)> {
    let close = (open + 1..chars.len()).find(|&j| chars[j] == ']')?;
    if chars.get(close + 1) != Some(&'(') {
        return None;
    }
    let paren = (close + 2..chars.len()).find(|&j| chars[j] == ')')?;
    Some((chars[open + 1..close].iter().collect(), paren + 1))
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("failed to read embedding file")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed header, expected \"<vocab_size> <dim>\"")]
    MalformedHeader { line: usize },
    #[error("line {line}: vector for {word:?} has {got} components, expected {expected}")]
    VectorLength {
        line: usize,
        word: String,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: duplicate word {word:?}")]
    DuplicateWord { line: usize, word: String },
    #[error("line {line}: cannot parse vector component {component:?}")]
    BadComponent { line: usize, component: String },
    #[error("expected {expected} vocabulary rows, found {got}")]
    RowCount { expected: usize, got: usize },
    #[error("vector for {word:?} has {got} components, expected {expected}")]
    BadVector {
        word: String,
        expected: usize,
        got: usize,
    },
}

/// An immutable word → dense-vector table.
///
/// Lookups try an exact match first, then the lowercased query, and fall
/// back to the all-zeros out-of-vocabulary vector. The table is safe to
/// share across threads once loaded.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, u32>,
    matrix: Vec<f64>,
    zeros: Vec<f64>,
}

impl EmbeddingTable {
    /// Loads the whitespace-delimited text format: a `"<vocab_size> <dim>"`
    /// header line followed by one `"<word> <v1> … <vd>"` line per word.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        let reader = BufReader::new(File::open(path)?);
        Self::read(reader)
    }

    pub fn read(reader: impl BufRead) -> Result<Self, EmbeddingError> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or(EmbeddingError::MalformedHeader { line: 1 })??;
        let mut parts = header.split_whitespace();
        let vocab_size: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(EmbeddingError::MalformedHeader { line: 1 })?;
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .filter(|&d| d > 0)
            .ok_or(EmbeddingError::MalformedHeader { line: 1 })?;
        if parts.next().is_some() {
            return Err(EmbeddingError::MalformedHeader { line: 1 });
        }

        let mut table = EmbeddingTable {
            dim,
            words: Vec::with_capacity(vocab_size),
            index: HashMap::with_capacity(vocab_size),
            matrix: Vec::with_capacity(vocab_size * dim),
            zeros: vec![0.0; dim],
        };
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap().to_string();
            let mut count = 0usize;
            for f in fields.by_ref() {
                let v: f64 = f.parse().map_err(|_| EmbeddingError::BadComponent {
                    line: line_no,
                    component: f.to_string(),
                })?;
                table.matrix.push(v);
                count += 1;
            }
            if count != dim {
                return Err(EmbeddingError::VectorLength {
                    line: line_no,
                    word,
                    expected: dim,
                    got: count,
                });
            }
            if table
                .index
                .insert(word.clone(), table.words.len() as u32)
                .is_some()
            {
                return Err(EmbeddingError::DuplicateWord {
                    line: line_no,
                    word,
                });
            }
            table.words.push(word);
        }
        if table.words.len() != vocab_size {
            return Err(EmbeddingError::RowCount {
                expected: vocab_size,
                got: table.words.len(),
            });
        }
        Ok(table)
    }

    /// Builds a table directly from `(word, vector)` pairs.
    pub fn from_pairs(
        dim: usize,
        pairs: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self, EmbeddingError> {
        let mut table = EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            matrix: Vec::new(),
            zeros: vec![0.0; dim],
        };
        for (word, vec) in pairs {
            if vec.len() != dim {
                return Err(EmbeddingError::BadVector {
                    word,
                    expected: dim,
                    got: vec.len(),
                });
            }
            if table
                .index
                .insert(word.clone(), table.words.len() as u32)
                .is_some()
            {
                return Err(EmbeddingError::DuplicateWord { line: 0, word });
            }
            table.words.push(word);
            table.matrix.extend_from_slice(&vec);
        }
        Ok(table)
    }

    /// Writes the table back out in the text format read by [`Self::load`].
    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{} {}", self.words.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(w, "{word}")?;
            for v in self.row(i as u32) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Raw row-major `vocab_size × dim` matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn oov_vector(&self) -> &[f64] {
        &self.zeros
    }

    pub fn row(&self, idx: u32) -> &[f64] {
        if idx == OOV {
            return &self.zeros;
        }
        let i = idx as usize * self.dim;
        &self.matrix[i..i + self.dim]
    }

    /// Row index for `word`: exact match, then lowercased query, else [`OOV`].
    pub fn row_index(&self, word: &str) -> u32 {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        let lower = word.to_lowercase();
        self.index.get(&lower).copied().unwrap_or(OOV)
    }

    pub fn lookup(&self, word: &str) -> &[f64] {
        self.row(self.row_index(word))
    }

    /// Maps each token to its table row (or [`OOV`]), truncated to `n`.
    pub fn resolve(&self, tokens: &TokenSequence, n: usize) -> Vec<u32> {
        tokens
            .tokens()
            .iter()
            .take(n)
            .map(|t| self.row_index(t))
            .collect()
    }

    /// Encodes `tokens` as an `n × dim` matrix: the first
    /// `min(len, n)` rows are embeddings in token order, the rest are zero.
    pub fn encode(&self, tokens: &TokenSequence, n: usize) -> EncodedQuestion {
        self.encode_rows(&self.resolve(tokens, n), n)
    }

    /// Same as [`Self::encode`] but from pre-resolved row ids.
    pub fn encode_rows(&self, ids: &[u32], n: usize) -> EncodedQuestion {
        assert!(n >= 1, "sequence length must be >= 1");
        let mut matrix = vec![0.0; n * self.dim];
        let true_length = ids.len().min(n);
        for (r, &id) in ids.iter().take(true_length).enumerate() {
            matrix[r * self.dim..(r + 1) * self.dim].copy_from_slice(self.row(id));
        }
        EncodedQuestion {
            matrix,
            rows: n,
            dim: self.dim,
            true_length,
            label: 0,
        }
    }
}

/// A fixed-length `rows × dim` encoding of one question.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedQuestion {
    matrix: Vec<f64>,
    rows: usize,
    dim: usize,
    true_length: usize,
    label: u8,
}

impl EncodedQuestion {
    pub fn from_matrix(matrix: Vec<f64>, rows: usize, dim: usize, true_length: usize) -> Self {
        assert_eq!(matrix.len(), rows * dim);
        assert!(true_length <= rows);
        EncodedQuestion {
            matrix,
            rows,
            dim,
            true_length,
            label: 0,
        }
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = label;
        self
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.matrix[r * self.dim..(r + 1) * self.dim]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn true_length(&self) -> usize {
        self.true_length
    }

    pub fn label(&self) -> u8 {
        self.label
    }
}
