//! Base document retrieval and annotation-extended retrieval.
//!
//! A document's base score is the summed frequency of the query terms over
//! its indexed fields. Extended retrieval adds `annotation_weight` times the
//! summed frequency of the query terms over every annotation on the document
//! that the caller may read, so annotation content can surface documents whose
//! own fields never mention the query. Arithmetic is exact (rational).

mod index;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};

pub use index::{AnnotationField, DocumentField, Posting, PostingIndex};
pub use tokenize::tokenize;

use crate::error::Result;
use crate::model::AnnotationId;
use crate::store::Store;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("query has no terms")]
    EmptyQuery,
    #[error("invalid annotation weight {0:?}")]
    InvalidWeight(String),
}

/// An exact non-negative score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Score(pub Ratio<u64>);

impl Score {
    pub fn integer(n: u64) -> Self {
        Score(Ratio::from_integer(n))
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

/// Multiplier applied to annotation matches in extended retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnotationWeight(pub Ratio<u64>);

impl Default for AnnotationWeight {
    fn default() -> Self {
        AnnotationWeight(Ratio::from_integer(1))
    }
}

impl FromStr for AnnotationWeight {
    type Err = SearchError;

    /// Parses a non-negative decimal such as `1`, `0.5` or `2.125` exactly.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SearchError::InvalidWeight(s.to_string());
        let t = s.trim();
        let (whole, frac) = t.split_once('.').unwrap_or((t, ""));
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole
            .chars()
            .chain(frac.chars())
            .all(|c| c.is_ascii_digit())
            || frac.len() > 9
        {
            return Err(bad());
        }
        let denom = 10u64.pow(frac.len() as u32);
        let whole: u64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let numer = whole
            .checked_mul(denom)
            .and_then(|w| w.checked_add(frac))
            .ok_or_else(bad)?;
        Ok(AnnotationWeight(Ratio::new(numer, denom)))
    }
}

impl fmt::Display for AnnotationWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitSource {
    DocumentMatch,
    AnnotationExtended,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchHit {
    pub document_ref: String,
    pub score: Score,
    pub source: HitSource,
    pub contributing_annotations: Vec<AnnotationId>,
}

/// Tokenizes a whitespace-separated query into its distinct terms.
pub fn query_terms(query: &str) -> Result<BTreeSet<String>, SearchError> {
    let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
    if terms.is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    Ok(terms)
}

fn rank(hits: &mut [SearchHit]) {
    hits.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then_with(|| a.document_ref.cmp(&b.document_ref))
    });
}

fn base_totals(index: &PostingIndex, terms: &BTreeSet<String>) -> BTreeMap<String, u64> {
    let mut totals: BTreeMap<String, u64> = BTreeMap::new();
    for term in terms {
        for (doc, tf) in index.documents_for(term) {
            *totals.entry(doc.to_string()).or_default() += tf;
        }
    }
    totals
}

/// Documents whose own fields contain at least one query term.
pub fn search_base(index: &PostingIndex, query: &str) -> Result<Vec<SearchHit>, SearchError> {
    let terms = query_terms(query)?;
    let mut hits: Vec<SearchHit> = base_totals(index, &terms)
        .into_iter()
        .map(|(document_ref, tf)| SearchHit {
            document_ref,
            score: Score::integer(tf),
            source: HitSource::DocumentMatch,
            contributing_annotations: Vec::new(),
        })
        .collect();
    rank(&mut hits);
    Ok(hits)
}

/// Base hits united with documents reached through readable annotations.
///
/// `visible` decides which annotations the caller may read; invisible
/// annotations neither add score nor appear as contributors.
pub fn search_extended<V>(
    index: &PostingIndex,
    query: &str,
    weight: AnnotationWeight,
    visible: V,
) -> Result<Vec<SearchHit>, SearchError>
where
    V: Fn(&AnnotationId) -> bool,
{
    let terms = query_terms(query)?;
    let base = base_totals(index, &terms);

    let mut extension: BTreeMap<String, (u64, BTreeSet<AnnotationId>)> = BTreeMap::new();
    for term in &terms {
        for (id, doc, tf) in index.annotations_for(term) {
            if !visible(id) {
                continue;
            }
            let slot = extension.entry(doc.to_string()).or_default();
            slot.0 += tf;
            slot.1.insert(id.clone());
        }
    }

    let docs: BTreeSet<&String> = base.keys().chain(extension.keys()).collect();
    let mut hits: Vec<SearchHit> = docs
        .into_iter()
        .map(|doc| {
            let base_tf = base.get(doc).copied().unwrap_or(0);
            let (ann_tf, contributors) = extension.get(doc).cloned().unwrap_or_default();
            let source = match (base_tf > 0, !contributors.is_empty()) {
                (true, true) => HitSource::Both,
                (true, false) => HitSource::DocumentMatch,
                _ => HitSource::AnnotationExtended,
            };
            SearchHit {
                document_ref: doc.clone(),
                score: Score(Ratio::from_integer(base_tf) + weight.0 * Ratio::from_integer(ann_tf)),
                source,
                contributing_annotations: contributors.into_iter().collect(),
            }
        })
        .collect();
    rank(&mut hits);
    Ok(hits)
}

impl Store {
    pub fn search_base(&self, query: &str, as_user: &str) -> Result<Vec<SearchHit>> {
        self.get_user(as_user)?;
        Ok(search_base(self.state().index(), query)?)
    }

    /// Extended retrieval over the annotations `as_user` may read.
    pub fn search_extended(
        &self,
        query: &str,
        as_user: &str,
        weight: AnnotationWeight,
    ) -> Result<Vec<SearchHit>> {
        self.get_user(as_user)?;
        let state = self.state();
        let visible = |id: &AnnotationId| {
            state
                .annotation(id)
                .is_some_and(|a| state.is_visible(a, Some(as_user)))
        };
        Ok(search_extended(state.index(), query, weight, visible)?)
    }
}
