//! TSV corpus loading and writing.
//!
//! Wire format: UTF-8, tab-separated, header row
//! `id<TAB>event_id<TAB>split<TAB>text`, with `split` one of `train`, `val`,
//! `any`. Tabs and newlines are forbidden inside fields.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::{Corpus, Tweet};

/// Which split a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    /// Available to both splits.
    Any,
}

impl Split {
    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "any" => Some(Split::Any),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Any => "any",
        }
    }
}

/// Column mapping plus an optional split filter.
///
/// The defaults match the wire format above; the column fields exist so that
/// exports with reordered columns can be ingested without rewriting files.
#[derive(Debug, Clone)]
pub struct CorpusSchema {
    pub id_col: usize,
    pub event_col: usize,
    pub split_col: usize,
    pub text_col: usize,
    /// Minimum number of columns a row must have.
    pub n_cols: usize,
    /// When set, keep only rows whose split equals this value or `any`.
    pub split_filter: Option<Split>,
}

impl Default for CorpusSchema {
    fn default() -> Self {
        CorpusSchema { id_col: 0, event_col: 1, split_col: 2, text_col: 3, n_cols: 4, split_filter: None }
    }
}

impl CorpusSchema {
    pub fn with_filter(split: Split) -> Self {
        CorpusSchema { split_filter: Some(split), ..CorpusSchema::default() }
    }

    fn keeps(&self, split: Split) -> bool {
        match self.split_filter {
            None => true,
            Some(f) => split == Split::Any || split == f,
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read corpus file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected at least {expected} tab-separated columns, found {found}")]
    MalformedRow { line: usize, expected: usize, found: usize },
    #[error("line {line}: unknown split value {value:?} (want train, val or any)")]
    UnknownSplit { line: usize, value: String },
    #[error("line {line}: duplicate tweet id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("corpus file is empty (missing header row)")]
    Empty,
    #[error("field contains a tab or newline: {0:?}")]
    BadField(String),
}

/// Load a TSV corpus. Rows whose text normalizes to an empty token sequence
/// are counted in `Corpus::skipped_rows` and dropped.
pub fn load_corpus(path: &Path, schema: &CorpusSchema) -> Result<Corpus, LoadError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(LoadError::Empty);
    };
    header?; // header row is informative only; columns come from the schema

    let mut tweets = Vec::new();
    let mut skipped = 0usize;
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    for (idx, line) in lines {
        let line = line?;
        let line_no = idx + 1; // 1-based, header is line 1
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < schema.n_cols {
            return Err(LoadError::MalformedRow { line: line_no, expected: schema.n_cols, found: cols.len() });
        }
        let id = cols[schema.id_col];
        let split = Split::parse(cols[schema.split_col]).ok_or_else(|| LoadError::UnknownSplit {
            line: line_no,
            value: cols[schema.split_col].to_string(),
        })?;
        if !seen_ids.insert(id.to_string()) {
            return Err(LoadError::DuplicateId { line: line_no, id: id.to_string() });
        }
        if !schema.keeps(split) {
            continue;
        }
        match Tweet::from_raw(id, cols[schema.event_col], cols[schema.text_col]) {
            Some(t) => tweets.push(t),
            None => skipped += 1,
        }
    }
    let mut corpus = Corpus::from_tweets(tweets);
    corpus.skipped_rows = skipped;
    Ok(corpus)
}

/// Write a corpus in the TSV wire format. `split_of` assigns the split
/// column per event id.
pub fn write_corpus_tsv<F>(corpus: &Corpus, path: &Path, split_of: F) -> Result<(), LoadError>
where
    F: Fn(&str) -> Split,
{
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "id\tevent_id\tsplit\ttext")?;
    for t in &corpus.tweets {
        for field in [&t.id, &t.event_id, &t.raw_text] {
            if field.contains('\t') || field.contains('\n') {
                return Err(LoadError::BadField(field.clone()));
            }
        }
        writeln!(w, "{}\t{}\t{}\t{}", t.id, t.event_id, split_of(&t.event_id).as_str(), t.raw_text)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "id\tevent_id\tsplit\ttext\n";

    #[test]
    fn loads_and_buckets_by_event() {
        let f = write_tmp(&format!(
            "{HEADER}1\tA\tany\thello world\n2\tA\tany\tmore text\n3\tB\tany\tother event\n"
        ));
        let c = load_corpus(f.path(), &CorpusSchema::default()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.event_tweets("A").len(), 2);
        assert_eq!(c.event_tweets("B").len(), 1);
        assert!(c.check_indexes());
    }

    #[test]
    fn url_only_row_is_kept_with_placeholder_token() {
        let f = write_tmp(&format!("{HEADER}1\tA\tany\thttp://t.co/x\n"));
        let c = load_corpus(f.path(), &CorpusSchema::default()).unwrap();
        assert_eq!(c.tweets[0].tokens, ["<url>"]);
        assert_eq!(c.skipped_rows, 0);
    }

    #[test]
    fn empty_text_rows_are_counted_and_skipped() {
        let f = write_tmp(&format!("{HEADER}1\tA\tany\thello\n2\tA\tany\t \n"));
        let c = load_corpus(f.path(), &CorpusSchema::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.skipped_rows, 1);
    }

    #[test]
    fn malformed_row_names_the_line() {
        let f = write_tmp(&format!("{HEADER}1\tA\tany\tok\nbad row without tabs\n"));
        let err = load_corpus(f.path(), &CorpusSchema::default()).unwrap_err();
        match err {
            LoadError::MalformedRow { line, found, .. } => {
                assert_eq!(line, 3);
                assert_eq!(found, 1);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let f = write_tmp(&format!("{HEADER}1\tA\tany\tok\n1\tB\tany\tdup\n"));
        let err = load_corpus(f.path(), &CorpusSchema::default()).unwrap_err();
        assert!(matches!(err, LoadError::DuplicateId { line: 3, .. }));
    }

    #[test]
    fn unknown_split_is_rejected() {
        let f = write_tmp(&format!("{HEADER}1\tA\ttest\tok\n"));
        let err = load_corpus(f.path(), &CorpusSchema::default()).unwrap_err();
        assert!(matches!(err, LoadError::UnknownSplit { line: 2, .. }));
    }

    #[test]
    fn split_filter_keeps_matching_and_any_rows() {
        let f = write_tmp(&format!(
            "{HEADER}1\tA\ttrain\tt one\n2\tA\tval\tv one\n3\tB\tany\tshared\n"
        ));
        let train = load_corpus(f.path(), &CorpusSchema::with_filter(Split::Train)).unwrap();
        assert_eq!(train.len(), 2);
        let val = load_corpus(f.path(), &CorpusSchema::with_filter(Split::Val)).unwrap();
        assert_eq!(val.len(), 2);
        assert!(val.tweets.iter().any(|t| t.id == "2"));
        assert!(val.tweets.iter().all(|t| t.id != "1"));
    }

    #[test]
    fn write_then_load_round_trips_tokens() {
        let tweets = vec![
            Tweet::from_raw("1", "a", "Help #PabloPH now!").unwrap(),
            Tweet::from_raw("2", "b", "@user see http://x.co").unwrap(),
        ];
        let orig = Corpus::from_tweets(tweets);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_corpus_tsv(&orig, f.path(), |_| Split::Any).unwrap();
        let back = load_corpus(f.path(), &CorpusSchema::default()).unwrap();
        assert_eq!(back.len(), orig.len());
        for (a, b) in orig.tweets.iter().zip(&back.tweets) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.tokens, b.tokens);
            assert_eq!(a.hashtags, b.hashtags);
        }
    }
}
