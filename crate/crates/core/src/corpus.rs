//! Sparse bag-of-words corpora.
//!
//! A [`Corpus`] stores the nonzero cells of the document-word count matrix.
//! Entries are kept in word-major order (ascending word, then ascending
//! document), so the entries of one word are a contiguous range. A second
//! index lists, for every document, the positions of its entries in ascending
//! word order. Ids are 0-based internally; the docword file format is 1-based.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TopicError};

/// One nonzero cell of the document-word matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Entry {
    pub doc: usize,
    pub word: usize,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    num_docs: usize,
    vocab_size: usize,
    entries: Vec<Entry>,
    word_offsets: Vec<usize>,
    doc_offsets: Vec<usize>,
    doc_entries: Vec<usize>,
    vocab: Vec<String>,
    total_tokens: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusStats {
    pub num_docs: usize,
    pub vocab_size: usize,
    /// Mean number of tokens per document.
    pub mean_tokens_per_doc: f64,
    /// Mean number of distinct words per document.
    pub mean_distinct_words_per_doc: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    /// 1-based fold number.
    pub fold_id: usize,
    pub train_doc_ids: Vec<usize>,
    pub test_doc_ids: Vec<usize>,
}

impl Corpus {
    /// Builds a corpus from 0-based `(doc, word, count)` triples in any order.
    pub fn from_triples(
        num_docs: usize,
        vocab_size: usize,
        triples: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, (doc, word, count)) in triples.into_iter().enumerate() {
            let line = i + 1;
            if doc >= num_docs {
                return Err(TopicError::Range {
                    line,
                    what: "document",
                    value: doc + 1,
                    max: num_docs,
                });
            }
            if word >= vocab_size {
                return Err(TopicError::Range {
                    line,
                    what: "word",
                    value: word + 1,
                    max: vocab_size,
                });
            }
            if count == 0 {
                return Err(TopicError::Value { line, value: 0 });
            }
            entries.push(Entry { doc, word, count });
        }
        Self::build(num_docs, vocab_size, entries, Vec::new())
    }

    fn build(
        num_docs: usize,
        vocab_size: usize,
        mut entries: Vec<Entry>,
        vocab: Vec<String>,
    ) -> Result<Self> {
        entries.sort_unstable_by_key(|e| (e.word, e.doc));
        if let Some(pair) = entries
            .windows(2)
            .find(|p| p[0].word == p[1].word && p[0].doc == p[1].doc)
        {
            return Err(TopicError::DuplicateEntry {
                line: 0,
                doc: pair[0].doc + 1,
                word: pair[0].word + 1,
            });
        }

        let mut word_offsets = vec![0usize; vocab_size + 1];
        let mut doc_offsets = vec![0usize; num_docs + 1];
        for e in &entries {
            word_offsets[e.word + 1] += 1;
            doc_offsets[e.doc + 1] += 1;
        }
        for i in 0..vocab_size {
            word_offsets[i + 1] += word_offsets[i];
        }
        for i in 0..num_docs {
            doc_offsets[i + 1] += doc_offsets[i];
        }
        // Filling in word-major order leaves each document's list ascending by word.
        let mut cursor = doc_offsets.clone();
        let mut doc_entries = vec![0usize; entries.len()];
        for (idx, e) in entries.iter().enumerate() {
            doc_entries[cursor[e.doc]] = idx;
            cursor[e.doc] += 1;
        }
        let total_tokens = entries.iter().map(|e| e.count as u64).sum();
        Ok(Self {
            num_docs,
            vocab_size,
            entries,
            word_offsets,
            doc_offsets,
            doc_entries,
            vocab,
            total_tokens,
        })
    }

    /// Parses a UCI-style docword stream: three header lines `D`, `W`, `NNZ`
    /// followed by `NNZ` lines of `doc word count` (1-based ids). When a vocab
    /// stream is given, line `i` names word `i`.
    pub fn parse_docword<R: BufRead>(docword: R, vocab: Option<R>) -> Result<Self> {
        let mut lines = docword
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));

        let mut header = [0usize; 3];
        for (slot, name) in header.iter_mut().zip(["D", "W", "NNZ"]) {
            let (line, text) = lines.next().ok_or(TopicError::Parse {
                line: 0,
                msg: format!("missing header value {name}"),
            })?;
            let text = text?;
            *slot = text.trim().parse().map_err(|_| TopicError::Parse {
                line,
                msg: format!("expected integer {name}, got {:?}", text.trim()),
            })?;
        }
        let [num_docs, vocab_size, nnz] = header;

        let mut entries = Vec::with_capacity(nnz);
        let mut seen = HashSet::with_capacity(nnz);
        for (line, text) in lines {
            let text = text?;
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(TopicError::Parse {
                    line,
                    msg: format!("expected `doc word count`, got {:?}", text.trim()),
                });
            }
            let mut vals = [0i64; 3];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = f.parse().map_err(|_| TopicError::Parse {
                    line,
                    msg: format!("not an integer: {f:?}"),
                })?;
            }
            let [d, w, c] = vals;
            if d < 1 || d as usize > num_docs {
                return Err(TopicError::Range {
                    line,
                    what: "document",
                    value: d.max(0) as usize,
                    max: num_docs,
                });
            }
            if w < 1 || w as usize > vocab_size {
                return Err(TopicError::Range {
                    line,
                    what: "word",
                    value: w.max(0) as usize,
                    max: vocab_size,
                });
            }
            if c < 1 || c > u32::MAX as i64 {
                return Err(TopicError::Value { line, value: c });
            }
            let (doc, word) = (d as usize - 1, w as usize - 1);
            if !seen.insert((doc, word)) {
                return Err(TopicError::DuplicateEntry {
                    line,
                    doc: d as usize,
                    word: w as usize,
                });
            }
            entries.push(Entry {
                doc,
                word,
                count: c as u32,
            });
        }
        if entries.len() != nnz {
            return Err(TopicError::Parse {
                line: 3,
                msg: format!("header declares {nnz} entries, found {}", entries.len()),
            });
        }

        let vocab = match vocab {
            Some(r) => {
                let words = r.lines().collect::<std::io::Result<Vec<_>>>()?;
                if words.len() < vocab_size {
                    return Err(TopicError::Parse {
                        line: words.len() + 1,
                        msg: format!("vocab has {} words, expected {vocab_size}", words.len()),
                    });
                }
                words.into_iter().take(vocab_size).map(|w| w.trim().to_string()).collect()
            }
            None => Vec::new(),
        };
        Self::build(num_docs, vocab_size, entries, vocab)
    }

    /// Writes the docword format, entries in ascending (doc, word) order.
    pub fn write_docword<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}\n{}\n{}", self.num_docs, self.vocab_size, self.entries.len())?;
        for d in 0..self.num_docs {
            for e in self.doc_iter(d) {
                writeln!(out, "{} {} {}", e.doc + 1, e.word + 1, e.count)?;
            }
        }
        Ok(())
    }

    pub fn write_vocab<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for w in 0..self.vocab_size {
            writeln!(out, "{}", self.word_name(w))?;
        }
        Ok(())
    }

    pub fn with_vocab(mut self, vocab: Vec<String>) -> Result<Self> {
        if vocab.len() != self.vocab_size {
            return Err(TopicError::Contract(format!(
                "vocab has {} words, corpus has {}",
                vocab.len(),
                self.vocab_size
            )));
        }
        self.vocab = vocab;
        Ok(self)
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// All entries in word-major order; an entry's position is its id.
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn entry(&self, idx: usize) -> Option<&Entry> {
        self.entries.get(idx)
    }

    /// Position range of the entries of `word`, ascending by document.
    pub fn word_range(&self, word: usize) -> std::ops::Range<usize> {
        self.word_offsets[word]..self.word_offsets[word + 1]
    }

    /// Entry positions of `doc`, ascending by word.
    pub fn doc_entry_ids(&self, doc: usize) -> &[usize] {
        &self.doc_entries[self.doc_offsets[doc]..self.doc_offsets[doc + 1]]
    }

    pub fn doc_iter(&self, doc: usize) -> impl Iterator<Item = &Entry> + '_ {
        self.doc_entry_ids(doc).iter().map(move |&i| &self.entries[i])
    }

    pub fn doc_tokens(&self, doc: usize) -> u64 {
        self.doc_iter(doc).map(|e| e.count as u64).sum()
    }

    /// Looks up the entry position of cell `(word, doc)`.
    pub fn find_entry(&self, word: usize, doc: usize) -> Option<usize> {
        if word >= self.vocab_size {
            return None;
        }
        let range = self.word_range(word);
        self.entries[range.clone()]
            .binary_search_by_key(&doc, |e| e.doc)
            .ok()
            .map(|i| range.start + i)
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// The word string, or a 1-based placeholder when no vocabulary was loaded.
    pub fn word_name(&self, word: usize) -> String {
        match self.vocab.get(word) {
            Some(s) => s.clone(),
            None => format!("w{}", word + 1),
        }
    }

    pub fn stats(&self) -> Result<CorpusStats> {
        if self.num_docs == 0 {
            return Err(TopicError::EmptyCorpus);
        }
        let d = self.num_docs as f64;
        Ok(CorpusStats {
            num_docs: self.num_docs,
            vocab_size: self.vocab_size,
            mean_tokens_per_doc: self.total_tokens as f64 / d,
            mean_distinct_words_per_doc: self.entries.len() as f64 / d,
        })
    }

    /// Shuffles document ids with a seeded generator and deals them
    /// round-robin into `n_folds` test sets.
    pub fn split_folds(&self, n_folds: usize, seed: u64) -> Result<Vec<FoldSplit>> {
        if n_folds < 2 {
            return Err(TopicError::InvalidConfig(format!(
                "need at least 2 folds, got {n_folds}"
            )));
        }
        if n_folds > self.num_docs {
            return Err(TopicError::InsufficientDocuments {
                docs: self.num_docs,
                folds: n_folds,
            });
        }
        let mut ids: Vec<usize> = (0..self.num_docs).collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

        let mut tests = vec![Vec::new(); n_folds];
        for (i, id) in ids.into_iter().enumerate() {
            tests[i % n_folds].push(id);
        }
        Ok(tests
            .into_iter()
            .enumerate()
            .map(|(f, mut test)| {
                test.sort_unstable();
                let mut in_test = vec![false; self.num_docs];
                for &d in &test {
                    in_test[d] = true;
                }
                let train = (0..self.num_docs).filter(|&d| !in_test[d]).collect();
                FoldSplit {
                    fold_id: f + 1,
                    train_doc_ids: train,
                    test_doc_ids: test,
                }
            })
            .collect())
    }

    /// A new corpus holding the given documents, renumbered 0.. in the order given.
    /// The vocabulary is shared.
    pub fn subset(&self, doc_ids: &[usize]) -> Result<Self> {
        let mut entries = Vec::new();
        for (new_id, &d) in doc_ids.iter().enumerate() {
            if d >= self.num_docs {
                return Err(TopicError::Contract(format!("document {d} not in corpus")));
            }
            entries.extend(self.doc_iter(d).map(|e| Entry { doc: new_id, ..*e }));
        }
        Self::build(doc_ids.len(), self.vocab_size, entries, self.vocab.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<Corpus> {
        Corpus::parse_docword(Cursor::new(text.as_bytes()), None)
    }

    #[test]
    fn parses_small_docword() {
        let c = parse("2\n3\n3\n1 1 2\n1 3 1\n2 2 5\n").unwrap();
        assert_eq!(c.num_docs(), 2);
        assert_eq!(c.vocab_size(), 3);
        assert_eq!(c.num_entries(), 3);
        assert_eq!(c.total_tokens(), 8);
        let words: Vec<usize> = c.doc_iter(0).map(|e| e.word).collect();
        assert_eq!(words, vec![0, 2]);
        assert_eq!(c.find_entry(1, 1), Some(1));
    }

    #[test]
    fn word_out_of_range() {
        let err = parse("2\n3\n1\n1 4 1\n").unwrap_err();
        assert!(matches!(err, TopicError::Range { line: 4, what: "word", .. }), "{err}");
    }

    #[test]
    fn doc_out_of_range() {
        let err = parse("2\n3\n1\n0 1 1\n").unwrap_err();
        assert!(matches!(err, TopicError::Range { what: "document", .. }));
    }

    #[test]
    fn duplicate_entry() {
        let err = parse("2\n3\n2\n1 2 1\n1 2 3\n").unwrap_err();
        assert!(matches!(err, TopicError::DuplicateEntry { line: 5, doc: 1, word: 2 }));
    }

    #[test]
    fn zero_count() {
        let err = parse("2\n3\n1\n1 2 0\n").unwrap_err();
        assert!(matches!(err, TopicError::Value { value: 0, .. }));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse("2\n3\n2\n1 2 1\n1 x 1\n").unwrap_err();
        assert!(matches!(err, TopicError::Parse { line: 5, .. }));
        let err = parse("2\n3\n1\n1 2\n").unwrap_err();
        assert!(matches!(err, TopicError::Parse { line: 4, .. }));
    }

    #[test]
    fn nnz_mismatch() {
        assert!(matches!(parse("2\n3\n2\n1 2 1\n").unwrap_err(), TopicError::Parse { .. }));
    }

    #[test]
    fn vocab_is_loaded() {
        let c = Corpus::parse_docword(
            Cursor::new("1\n2\n1\n1 2 1\n".as_bytes()),
            Some(Cursor::new("alpha\nbeta\n".as_bytes())),
        )
        .unwrap();
        assert_eq!(c.vocab(), &["alpha".to_string(), "beta".to_string()]);
        assert_eq!(c.word_name(1), "beta");
    }

    #[test]
    fn stats_of_small_corpus() {
        let c = parse("2\n3\n3\n1 1 2\n1 3 1\n2 2 5\n").unwrap();
        let s = c.stats().unwrap();
        assert_eq!((s.num_docs, s.vocab_size), (2, 3));
        assert_eq!(s.mean_tokens_per_doc, 4.0);
        assert_eq!(s.mean_distinct_words_per_doc, 1.5);
    }

    #[test]
    fn stats_degenerate_uniform() {
        let c = Corpus::from_triples(4, 4, (0..4).map(|d| (d, d, 1))).unwrap();
        let s = c.stats().unwrap();
        assert_eq!(s.mean_tokens_per_doc, 1.0);
        assert_eq!(s.mean_distinct_words_per_doc, 1.0);
    }

    #[test]
    fn stats_empty_corpus() {
        let c = Corpus::from_triples(0, 3, []).unwrap();
        assert!(matches!(c.stats(), Err(TopicError::EmptyCorpus)));
    }

    #[test]
    fn empty_documents_are_kept() {
        let c = parse("3\n2\n1\n2 1 4\n").unwrap();
        assert_eq!(c.num_docs(), 3);
        assert!(c.doc_entry_ids(0).is_empty());
        assert_eq!(c.doc_tokens(1), 4);
    }

    fn corpus_with_docs(d: usize) -> Corpus {
        Corpus::from_triples(d, 3, (0..d).map(|i| (i, i % 3, 1))).unwrap()
    }

    #[test]
    fn folds_exact_division() {
        let folds = corpus_with_docs(10).split_folds(10, 7).unwrap();
        assert_eq!(folds.len(), 10);
        assert!(folds.iter().all(|f| f.test_doc_ids.len() == 1 && f.train_doc_ids.len() == 9));
    }

    #[test]
    fn folds_with_remainder() {
        let folds = corpus_with_docs(11).split_folds(10, 7).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|f| f.test_doc_ids.len()).collect();
        assert_eq!(sizes, vec![2, 1, 1, 1, 1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn folds_are_deterministic() {
        let c = corpus_with_docs(23);
        assert_eq!(c.split_folds(5, 99).unwrap(), c.split_folds(5, 99).unwrap());
        assert_ne!(c.split_folds(5, 99).unwrap(), c.split_folds(5, 100).unwrap());
    }

    #[test]
    fn too_many_folds() {
        let err = corpus_with_docs(3).split_folds(4, 0).unwrap_err();
        assert!(matches!(err, TopicError::InsufficientDocuments { docs: 3, folds: 4 }));
    }

    #[test]
    fn subset_renumbers_documents() {
        let c = parse("3\n3\n4\n1 1 2\n2 2 1\n3 1 1\n3 3 7\n").unwrap();
        let s = c.subset(&[2, 0]).unwrap();
        assert_eq!(s.num_docs(), 2);
        assert_eq!(s.doc_tokens(0), 8);
        assert_eq!(s.doc_tokens(1), 2);
    }
}
