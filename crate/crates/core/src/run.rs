//! Pre-computed run files, candidate lists, and query lists.
//!
//! A run file is UTF-8 text with one result line per row in the classic
//! six-column form `qid Q0 docid rank score tag`, separated by runs of
//! spaces or tabs. Blank lines and lines starting with `#` are skipped.
//! The score column is authoritative for ordering; the rank column only
//! breaks score ties. After parsing, every ranking is normalized to
//! score-descending order with ranks renumbered 1..n, so
//! [`RunSet::to_canonical_string`] emits a stable byte-exact form.
//!
//! Candidate lists (`context<TAB>docid( docid)*`) pin the document pool a
//! run may draw from per query; validation rejects a run iff it ranks a
//! document outside that pool.

use crate::model::{ContextId, DocId, ModelError, QueryId, Ranking, SystemId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Most lines one query may contribute to a run file.
pub const MAX_DEPTH_PER_QUERY: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunFileError {
    #[error("line {line}: expected 6 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: second field must be \"Q0\", found {found:?}")]
    BadQ0 { line: usize, found: String },
    #[error("line {line}: rank {found:?} is not a positive integer")]
    BadRank { line: usize, found: String },
    #[error("line {line}: score {found:?} is not a finite number")]
    BadScore { line: usize, found: String },
    #[error("line {line}: {source}")]
    BadToken {
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error("line {line}: document {doc} listed twice for query {qid}")]
    DuplicateDocForQuery { line: usize, qid: QueryId, doc: DocId },
    #[error("line {line}: tag {found} conflicts with earlier tag {expected}")]
    MixedTags {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: query {qid} exceeds {MAX_DEPTH_PER_QUERY} lines")]
    DepthExceeded { line: usize, qid: QueryId },
    #[error("run file holds no result lines")]
    EmptyRun,
    #[error("line {line}: {message}")]
    BadListLine { line: usize, message: String },
    #[error("line {line}: duplicate context {context}")]
    DuplicateContext { line: usize, context: ContextId },
    #[error("line {line}: context {context} has no candidates")]
    EmptyCandidates { line: usize, context: ContextId },
    #[error("io: {0}")]
    Io(String),
}

/// One parsed result line, prior to normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLine {
    pub qid: QueryId,
    pub doc: DocId,
    pub rank: u32,
    pub score: f64,
    pub tag: String,
}

/// Parses one non-comment line into its six positional fields.
pub fn parse_run_line(line: &str, line_no: usize) -> Result<RunLine, RunFileError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(RunFileError::FieldCount {
            line: line_no,
            found: fields.len(),
        });
    }
    if fields[1] != "Q0" {
        return Err(RunFileError::BadQ0 {
            line: line_no,
            found: fields[1].to_string(),
        });
    }
    let bad_token = |source: ModelError| RunFileError::BadToken {
        line: line_no,
        source,
    };
    let qid = QueryId::new(fields[0]).map_err(bad_token)?;
    let doc = DocId::new(fields[2]).map_err(bad_token)?;
    let rank: u32 = fields[3].parse().map_err(|_| RunFileError::BadRank {
        line: line_no,
        found: fields[3].to_string(),
    })?;
    if rank < 1 {
        return Err(RunFileError::BadRank {
            line: line_no,
            found: fields[3].to_string(),
        });
    }
    let score: f64 = fields[4].parse().map_err(|_| RunFileError::BadScore {
        line: line_no,
        found: fields[4].to_string(),
    })?;
    if !score.is_finite() {
        return Err(RunFileError::BadScore {
            line: line_no,
            found: fields[4].to_string(),
        });
    }
    crate::model::check_token(fields[5]).map_err(bad_token)?;
    let tag = fields[5].to_string();
    Ok(RunLine {
        qid,
        doc,
        rank,
        score,
        tag,
    })
}

/// A document with the score that put it at its normalized rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc: DocId,
    pub score: f64,
}

/// A parsed, normalized run: per query, documents in score-descending
/// order with ranks 1..n implied by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSet {
    pub tag: String,
    pub rankings: BTreeMap<QueryId, Vec<ScoredDoc>>,
    pub line_count: usize,
}

impl RunSet {
    pub fn docs_for(&self, qid: &QueryId) -> Option<&[ScoredDoc]> {
        self.rankings.get(qid).map(|v| v.as_slice())
    }

    /// Builds a servable ranking attributed to `source`, or `None` when the
    /// run does not cover `qid`.
    pub fn ranking_for(&self, qid: &QueryId, source: &SystemId) -> Option<Ranking> {
        let docs = self.rankings.get(qid)?;
        let items = docs.iter().map(|s| s.doc.clone()).collect();
        Some(
            Ranking::new(qid.clone(), items, source.clone())
                .expect("normalized run rankings are non-empty and duplicate-free"),
        )
    }

    pub fn queries(&self) -> impl Iterator<Item = &QueryId> {
        self.rankings.keys()
    }

    /// Serializes to the canonical byte form: queries in id order, one line
    /// per document as `qid Q0 doc rank score tag` with single spaces,
    /// ranks 1..n, scores in shortest round-trip notation, LF endings.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        for (qid, docs) in &self.rankings {
            for (idx, entry) in docs.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{} Q0 {} {} {} {}",
                    qid,
                    entry.doc,
                    idx + 1,
                    entry.score,
                    self.tag
                );
            }
        }
        out
    }
}

/// Parses a whole run file and normalizes every per-query ranking.
pub fn parse_run_file(text: &str) -> Result<RunSet, RunFileError> {
    let mut tag: Option<String> = None;
    // Per query: lines in file order, carrying the original rank field for
    // tie-breaking during normalization.
    let mut per_query: BTreeMap<QueryId, Vec<RunLine>> = BTreeMap::new();
    let mut seen: HashSet<(QueryId, DocId)> = HashSet::new();
    let mut line_count = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let line = parse_run_line(raw, line_no)?;
        match &tag {
            None => tag = Some(line.tag.clone()),
            Some(expected) if *expected != line.tag => {
                return Err(RunFileError::MixedTags {
                    line: line_no,
                    expected: expected.clone(),
                    found: line.tag,
                });
            }
            Some(_) => {}
        }
        if !seen.insert((line.qid.clone(), line.doc.clone())) {
            return Err(RunFileError::DuplicateDocForQuery {
                line: line_no,
                qid: line.qid,
                doc: line.doc,
            });
        }
        let bucket = per_query.entry(line.qid.clone()).or_default();
        if bucket.len() >= MAX_DEPTH_PER_QUERY {
            return Err(RunFileError::DepthExceeded {
                line: line_no,
                qid: line.qid,
            });
        }
        bucket.push(line);
        line_count += 1;
    }

    let tag = tag.ok_or(RunFileError::EmptyRun)?;
    let mut rankings = BTreeMap::new();
    for (qid, mut lines) in per_query {
        // Stable sort: score descending, original rank field ascending,
        // file order for full ties.
        lines.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are finite")
                .then(a.rank.cmp(&b.rank))
        });
        let docs = lines
            .into_iter()
            .map(|l| ScoredDoc {
                doc: l.doc,
                score: l.score,
            })
            .collect();
        rankings.insert(qid, docs);
    }
    Ok(RunSet {
        tag,
        rankings,
        line_count,
    })
}

/// The document pool one context's submissions must draw from. Order is
/// the file's order: the built-in baseline serves candidates as listed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateList {
    pub context: ContextId,
    pub candidates: Vec<DocId>,
}

impl CandidateList {
    pub fn contains(&self, doc: &DocId) -> bool {
        self.candidates.iter().any(|c| c == doc)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Per-query findings from candidate validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryValidation {
    pub qid: QueryId,
    /// Documents the run ranks that the candidate list does not contain.
    pub out_of_candidates: Vec<DocId>,
    /// Candidate documents the run covers.
    pub covered: usize,
    /// Candidate pool size; zero when the context is unknown.
    pub candidate_count: usize,
    pub known_context: bool,
}

/// Whole-run validation verdict. The run is rejected iff any ranked
/// document falls outside its query's candidate pool; queries without a
/// registered pool make the validation partial, not failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub accepted: bool,
    pub partial: bool,
    pub per_query: Vec<QueryValidation>,
}

impl ValidationReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for q in &self.per_query {
            if !q.known_context {
                let _ = writeln!(out, "{}: no candidate list registered", q.qid);
                continue;
            }
            let listed = if q.out_of_candidates.is_empty() {
                "none".to_string()
            } else {
                q.out_of_candidates
                    .iter()
                    .map(|d| d.as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let _ = writeln!(
                out,
                "{}: coverage {}/{}, out-of-candidates: {}",
                q.qid, q.covered, q.candidate_count, listed
            );
        }
        let verdict = match (self.accepted, self.partial) {
            (true, false) => "accepted",
            (true, true) => "accepted (partial: some queries had no candidate list)",
            (false, _) => "rejected",
        };
        let _ = writeln!(out, "verdict: {verdict}");
        out
    }
}

/// Checks every ranked document against its query's candidate pool.
pub fn validate_against_candidates(
    rs: &RunSet,
    cl: &BTreeMap<ContextId, CandidateList>,
) -> ValidationReport {
    let mut per_query = Vec::new();
    let mut accepted = true;
    let mut partial = false;
    for (qid, docs) in &rs.rankings {
        match cl.get(qid) {
            Some(pool) => {
                let pool_set: HashSet<&DocId> = pool.candidates.iter().collect();
                let mut out_of_candidates = Vec::new();
                let mut covered = 0usize;
                for entry in docs {
                    if pool_set.contains(&entry.doc) {
                        covered += 1;
                    } else {
                        out_of_candidates.push(entry.doc.clone());
                    }
                }
                if !out_of_candidates.is_empty() {
                    accepted = false;
                }
                per_query.push(QueryValidation {
                    qid: qid.clone(),
                    out_of_candidates,
                    covered,
                    candidate_count: pool.candidates.len(),
                    known_context: true,
                });
            }
            None => {
                partial = true;
                per_query.push(QueryValidation {
                    qid: qid.clone(),
                    out_of_candidates: Vec::new(),
                    covered: 0,
                    candidate_count: 0,
                    known_context: false,
                });
            }
        }
    }
    ValidationReport {
        accepted,
        partial,
        per_query,
    }
}

/// Parses candidate-list text: one `context<TAB>docid( docid)*` per line.
pub fn parse_candidates(text: &str) -> Result<BTreeMap<ContextId, CandidateList>, RunFileError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (context_raw, rest) = raw.split_once('\t').ok_or_else(|| RunFileError::BadListLine {
            line: line_no,
            message: "expected `context<TAB>docid( docid)*`".to_string(),
        })?;
        let context =
            ContextId::new(context_raw.trim()).map_err(|source| RunFileError::BadToken {
                line: line_no,
                source,
            })?;
        let mut candidates = Vec::new();
        let mut seen = HashSet::new();
        for doc_raw in rest.split_whitespace() {
            let doc = DocId::new(doc_raw).map_err(|source| RunFileError::BadToken {
                line: line_no,
                source,
            })?;
            if seen.insert(doc.clone()) {
                candidates.push(doc);
            } else {
                return Err(RunFileError::BadListLine {
                    line: line_no,
                    message: format!("duplicate candidate {doc}"),
                });
            }
        }
        if candidates.is_empty() {
            return Err(RunFileError::EmptyCandidates {
                line: line_no,
                context,
            });
        }
        let prior = map.insert(
            context.clone(),
            CandidateList {
                context: context.clone(),
                candidates,
            },
        );
        if prior.is_some() {
            return Err(RunFileError::DuplicateContext {
                line: line_no,
                context,
            });
        }
    }
    Ok(map)
}

/// Parses query-list text: one `qid<TAB>query text` per line.
pub fn parse_queries(text: &str) -> Result<BTreeMap<QueryId, String>, RunFileError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (qid_raw, query) = raw.split_once('\t').ok_or_else(|| RunFileError::BadListLine {
            line: line_no,
            message: "expected `qid<TAB>query text`".to_string(),
        })?;
        let qid = QueryId::new(qid_raw.trim()).map_err(|source| RunFileError::BadToken {
            line: line_no,
            source,
        })?;
        let query = query.trim();
        if query.is_empty() {
            return Err(RunFileError::BadListLine {
                line: line_no,
                message: "query text is empty".to_string(),
            });
        }
        let prior = map.insert(qid.clone(), query.to_string());
        if prior.is_some() {
            return Err(RunFileError::DuplicateContext {
                line: line_no,
                context: qid,
            });
        }
    }
    Ok(map)
}

fn read_to_string(path: &Path) -> Result<String, RunFileError> {
    std::fs::read_to_string(path).map_err(|e| RunFileError::Io(format!("{}: {e}", path.display())))
}

pub fn load_run_file(path: &Path) -> Result<RunSet, RunFileError> {
    parse_run_file(&read_to_string(path)?)
}

pub fn load_candidates(path: &Path) -> Result<BTreeMap<ContextId, CandidateList>, RunFileError> {
    parse_candidates(&read_to_string(path)?)
}

pub fn load_queries(path: &Path) -> Result<BTreeMap<QueryId, String>, RunFileError> {
    parse_queries(&read_to_string(path)?)
}

/// Builds an in-memory index from query text back to its id, used by wire
/// frontends that receive free text rather than ids.
pub fn query_text_index(queries: &BTreeMap<QueryId, String>) -> HashMap<String, QueryId> {
    queries
        .iter()
        .map(|(qid, text)| (text.clone(), qid.clone()))
        .collect()
}
