//! Corpus ingestion: tokenization, vocabulary construction, and the
//! immutable document store the samplers run over.
//!
//! Tokenization is deliberately simple and fully deterministic, since both
//! the likelihood and the Dirichlet-concentration heuristic depend on it:
//! whitespace split, URLs (`http://`, `https://`, `www.`) and `@`-mentions
//! dropped, leading `#` stripped from hashtags, everything lowercased, and
//! non-alphanumeric characters removed. No stemming, no pruning.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real_of_count, Real};

/// Dense word identifier assigned by the [`Vocabulary`].
pub type WordId = u32;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {id:?} out of order: timestamp {timestamp} precedes {last}")]
    OutOfOrder {
        id: String,
        timestamp: i64,
        last: i64,
    },
    #[error("document {id:?} uses word id {word} but the vocabulary has only {vocab} entries")]
    UnknownWord { id: String, word: WordId, vocab: usize },
}

/// A record that could not be ingested, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordIssue {
    pub line: usize,
    pub message: String,
}

/// Raw input record prior to tokenization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub timestamp: i64,
    pub text: String,
}

impl RawRecord {
    /// Parses one line of either supported input format.
    pub fn parse(line: &str, format: InputFormat) -> Result<RawRecord, String> {
        match format {
            InputFormat::JsonLines => {
                serde_json::from_str::<RawRecord>(line).map_err(|e| e.to_string())
            }
            InputFormat::Tsv => {
                let mut parts = line.splitn(3, '\t');
                let id = parts.next().unwrap_or("").to_string();
                let ts = parts.next().ok_or("missing timestamp field")?;
                let text = parts.next().ok_or("missing text field")?.to_string();
                if id.is_empty() {
                    return Err("empty id field".to_string());
                }
                let timestamp = ts
                    .parse::<i64>()
                    .map_err(|e| format!("bad timestamp {ts:?}: {e}"))?;
                Ok(RawRecord { id, timestamp, text })
            }
        }
    }
}

/// Input serialization for document records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputFormat {
    /// One JSON object per line: `{"id": ..., "timestamp": ..., "text": ...}`.
    JsonLines,
    /// `id<TAB>timestamp<TAB>text`.
    Tsv,
}

/// Splits text into normalized tokens.
///
/// Degenerate input produces an empty list, never an error.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
        {
            continue;
        }
        if raw.starts_with('@') {
            continue;
        }
        let body = raw.trim_start_matches('#');
        let token: String = body
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(|c| c.to_lowercase())
            .collect();
        if !token.is_empty() {
            tokens.push(token);
        }
    }
    tokens
}

/// One timestamped bag of words; the unit being clustered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    id: String,
    timestamp: i64,
    /// Sparse counts sorted by word id; every count is at least 1.
    counts: Vec<(WordId, u32)>,
    total: u32,
}

impl Document {
    /// Builds a document from token occurrences already mapped to word ids.
    pub fn from_word_ids(id: impl Into<String>, timestamp: i64, word_ids: &[WordId]) -> Document {
        let mut counts: HashMap<WordId, u32> = HashMap::new();
        for &w in word_ids {
            *counts.entry(w).or_insert(0) += 1;
        }
        let mut counts: Vec<(WordId, u32)> = counts.into_iter().collect();
        counts.sort_unstable();
        let total = counts.iter().map(|&(_, c)| c).sum();
        Document {
            id: id.into(),
            timestamp,
            counts,
            total,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    /// Sparse word counts, ascending by word id.
    pub fn counts(&self) -> &[(WordId, u32)] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    /// True when tokenization produced no usable tokens. Such documents are
    /// retained and cluster on time alone.
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Word ↔ dense-id bijection plus corpus-wide unigram statistics.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Vocabulary {
    words: Vec<String>,
    #[serde(skip)]
    by_word: HashMap<String, WordId>,
    counts: Vec<u64>,
    total: u64,
}

impl Vocabulary {
    pub fn new() -> Vocabulary {
        Vocabulary::default()
    }

    /// Interns a word, assigning the next dense id on first sight, and
    /// counts the occurrence.
    pub fn observe(&mut self, word: &str) -> WordId {
        let id = match self.by_word.get(word) {
            Some(&id) => id,
            None => {
                let id = self.words.len() as WordId;
                self.words.push(word.to_string());
                self.by_word.insert(word.to_string(), id);
                self.counts.push(0);
                id
            }
        };
        self.counts[id as usize] += 1;
        self.total += 1;
        id
    }

    pub fn get(&self, word: &str) -> Option<WordId> {
        self.by_word.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id as usize]
    }

    /// Vocabulary size V.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Corpus frequency of one word.
    pub fn count(&self, id: WordId) -> u64 {
        self.counts[id as usize]
    }

    /// Total token count over the corpus.
    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    /// Relative frequency of every word; sums to 1 for a nonempty corpus.
    pub fn unigram<R: Real>(&self) -> Vec<R> {
        let total: R = real_of_count(self.total.max(1));
        self.counts
            .iter()
            .map(|&c| real_of_count::<R>(c) / total)
            .collect()
    }

    /// Number of word types that occur exactly once in the corpus.
    pub fn singleton_count(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 1).count()
    }

    /// Rebuilds the word→id map after deserialization.
    fn rebuild_index(&mut self) {
        self.by_word = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as WordId))
            .collect();
    }

    /// Restores a vocabulary whose `by_word` index was skipped by serde.
    pub fn into_indexed(mut self) -> Vocabulary {
        self.rebuild_index();
        self
    }
}

/// Documents in a fixed total order: ascending `(timestamp, id)` for batch
/// ingestion, arrival order (non-decreasing timestamps) for streams.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DocumentStore {
    docs: Vec<Document>,
    #[serde(skip)]
    by_id: HashMap<String, usize>,
}

impl DocumentStore {
    pub fn new() -> DocumentStore {
        DocumentStore::default()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn doc(&self, index: usize) -> &Document {
        &self.docs[index]
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn timestamp(&self, index: usize) -> i64 {
        self.docs[index].timestamp
    }

    /// Appends a document whose timestamp must not precede the current tail.
    pub fn push_monotone(&mut self, doc: Document) -> Result<usize, CorpusError> {
        if let Some(last) = self.docs.last() {
            if doc.timestamp < last.timestamp {
                return Err(CorpusError::OutOfOrder {
                    id: doc.id.clone(),
                    timestamp: doc.timestamp,
                    last: last.timestamp,
                });
            }
        }
        if self.by_id.contains_key(&doc.id) {
            return Err(CorpusError::DuplicateId(doc.id.clone()));
        }
        let index = self.docs.len();
        self.by_id.insert(doc.id.clone(), index);
        self.docs.push(doc);
        Ok(index)
    }

    /// First index whose timestamp is at least `t` (store must be sorted by
    /// timestamp, which both construction paths guarantee).
    pub fn first_index_at_or_after(&self, t: i64) -> usize {
        self.docs.partition_point(|d| d.timestamp < t)
    }

    /// Restores the id index after deserialization.
    pub fn into_indexed(mut self) -> DocumentStore {
        self.by_id = self
            .docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        self
    }
}

/// Everything batch ingestion produces.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub store: DocumentStore,
    pub vocabulary: Vocabulary,
    /// Records skipped as malformed, with line numbers.
    pub skipped: Vec<RecordIssue>,
    /// Ids of retained documents that tokenized to nothing.
    pub empty_ids: Vec<String>,
}

/// Ingests raw records: tokenizes, sorts by `(timestamp, id)`, builds the
/// vocabulary in sorted order, and returns the immutable store.
///
/// Malformed records are skipped and reported; a duplicate id aborts.
pub fn ingest(records: Vec<RawRecord>) -> Result<Ingested, CorpusError> {
    ingest_with_issues(records, Vec::new())
}

fn ingest_with_issues(
    mut records: Vec<RawRecord>,
    skipped: Vec<RecordIssue>,
) -> Result<Ingested, CorpusError> {
    records.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.id.cmp(&b.id))
    });
    let mut seen: HashMap<&str, ()> = HashMap::with_capacity(records.len());
    for r in &records {
        if seen.insert(&r.id, ()).is_some() {
            return Err(CorpusError::DuplicateId(r.id.clone()));
        }
    }

    let mut vocabulary = Vocabulary::new();
    let mut store = DocumentStore::new();
    let mut empty_ids = Vec::new();
    for record in records {
        let tokens = tokenize(&record.text);
        if tokens.is_empty() {
            empty_ids.push(record.id.clone());
        }
        let ids: Vec<WordId> = tokens.iter().map(|t| vocabulary.observe(t)).collect();
        let doc = Document::from_word_ids(record.id, record.timestamp, &ids);
        store.push_monotone(doc)?;
    }
    Ok(Ingested {
        store,
        vocabulary,
        skipped,
        empty_ids,
    })
}

/// Reads and ingests a full record stream from a buffered reader.
pub fn ingest_reader<B: BufRead>(reader: B, format: InputFormat) -> Result<Ingested, CorpusError> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match RawRecord::parse(&line, format) {
            Ok(r) => records.push(r),
            Err(message) => skipped.push(RecordIssue {
                line: lineno + 1,
                message,
            }),
        }
    }
    ingest_with_issues(records, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn tokenize_empty_input() {
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("   \t\n"), Vec::<String>::new());
    }

    #[test]
    fn tokenize_strips_urls_and_punctuation() {
        assert_eq!(
            tokenize("MH370 search resumes! http://t.co/x"),
            vec!["mh370", "search", "resumes"]
        );
    }

    #[test]
    fn tokenize_drops_mentions_and_unwraps_hashtags() {
        assert_eq!(tokenize("@cnn #MH370 MH370"), vec!["mh370", "mh370"]);
    }

    #[test]
    fn tokenize_handles_degenerate_tokens() {
        assert_eq!(tokenize("--- @ # https://x www.example.com"), Vec::<String>::new());
    }

    fn rec(id: &str, t: i64, text: &str) -> RawRecord {
        RawRecord {
            id: id.to_string(),
            timestamp: t,
            text: text.to_string(),
        }
    }

    #[test]
    fn ingest_empty_is_empty() {
        let out = ingest(Vec::new()).unwrap();
        assert_eq!(out.store.len(), 0);
        assert_eq!(out.vocabulary.len(), 0);
    }

    #[test]
    fn ingest_sorts_by_timestamp_then_id() {
        let out = ingest(vec![rec("b", 5, "a b"), rec("a", 3, "a b")]).unwrap();
        assert_eq!(out.store.doc(0).id(), "a");
        assert_eq!(out.store.doc(0).timestamp(), 3);
        assert_eq!(out.store.doc(1).timestamp(), 5);
        assert_eq!(out.vocabulary.len(), 2);
    }

    #[test]
    fn ingest_unigram_and_singletons_by_hand() {
        let out = ingest(vec![rec("x", 0, "a a b"), rec("y", 1, "c")]).unwrap();
        let v = &out.vocabulary;
        assert_eq!(v.len(), 3);
        let uni: Vec<f64> = v.unigram();
        assert_relative_eq!(uni[v.get("a").unwrap() as usize], 0.5);
        assert_relative_eq!(uni[v.get("b").unwrap() as usize], 0.25);
        assert_relative_eq!(uni[v.get("c").unwrap() as usize], 0.25);
        assert_eq!(v.singleton_count(), 2);
    }

    #[test]
    fn ingest_rejects_duplicate_ids() {
        let err = ingest(vec![rec("x", 0, "a"), rec("x", 1, "b")]).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId(id) if id == "x"));
    }

    #[test]
    fn ingest_retains_and_flags_empty_documents() {
        let out = ingest(vec![rec("x", 0, "@only-a-mention"), rec("y", 1, "word")]).unwrap();
        assert_eq!(out.store.len(), 2);
        assert_eq!(out.empty_ids, vec!["x".to_string()]);
        assert!(out.store.doc(out.store.index_of("x").unwrap()).is_empty());
    }

    #[test]
    fn reader_reports_malformed_lines_and_continues() {
        let input = "{\"id\":\"a\",\"timestamp\":1,\"text\":\"hi\"}\nnot json\n{\"id\":\"b\",\"timestamp\":2,\"text\":\"yo\"}\n";
        let out = ingest_reader(input.as_bytes(), InputFormat::JsonLines).unwrap();
        assert_eq!(out.store.len(), 2);
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].line, 2);
    }

    #[test]
    fn reader_parses_tsv() {
        let input = "a\t3\thello world\nb\t5\ttabs\tkept in text\n";
        let out = ingest_reader(input.as_bytes(), InputFormat::Tsv).unwrap();
        assert_eq!(out.store.len(), 2);
        assert_eq!(out.store.doc(1).total(), 4);
    }

    #[test]
    fn rejects_fractional_timestamps_per_record() {
        let input = "{\"id\":\"a\",\"timestamp\":1.5,\"text\":\"hi\"}\n";
        let out = ingest_reader(input.as_bytes(), InputFormat::JsonLines).unwrap();
        assert_eq!(out.store.len(), 0);
        assert_eq!(out.skipped.len(), 1);
    }

    #[test]
    fn push_monotone_rejects_regressions() {
        let mut store = DocumentStore::new();
        store
            .push_monotone(Document::from_word_ids("a", 10, &[]))
            .unwrap();
        let err = store
            .push_monotone(Document::from_word_ids("b", 9, &[]))
            .unwrap_err();
        assert!(matches!(err, CorpusError::OutOfOrder { .. }));
    }

    proptest! {
        #[test]
        fn reingestion_is_deterministic(
            texts in proptest::collection::vec("[a-d ]{0,12}", 1..8),
        ) {
            let records: Vec<RawRecord> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| rec(&format!("d{i}"), (i as i64 * 7) % 5, t))
                .collect();
            let a = ingest(records.clone()).unwrap();
            let b = ingest(records).unwrap();
            prop_assert_eq!(a.store.docs(), b.store.docs());
            prop_assert_eq!(a.vocabulary.len(), b.vocabulary.len());
            for i in 0..a.vocabulary.len() {
                prop_assert_eq!(a.vocabulary.word(i as WordId), b.vocabulary.word(i as WordId));
            }
        }

        #[test]
        fn unigram_sums_to_one_and_matches_doc_counts(
            texts in proptest::collection::vec("[a-e]{1,3}( [a-e]{1,3}){0,6}", 1..10),
        ) {
            let records: Vec<RawRecord> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| rec(&format!("d{i}"), i as i64, t))
                .collect();
            let out = ingest(records).unwrap();
            let v = &out.vocabulary;
            if v.total_tokens() > 0 {
                let uni: Vec<f64> = v.unigram();
                prop_assert!((uni.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            // Corpus frequency equals the sum of per-document counts.
            let mut freq = vec![0u64; v.len()];
            for d in out.store.docs() {
                for &(w, c) in d.counts() {
                    freq[w as usize] += c as u64;
                }
            }
            for (w, &f) in freq.iter().enumerate() {
                prop_assert_eq!(f, v.count(w as WordId));
            }
            // Singleton count by brute force.
            let brute = freq.iter().filter(|&&f| f == 1).count();
            prop_assert_eq!(brute, v.singleton_count());
        }
    }
}
