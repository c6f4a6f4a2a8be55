//! Two inverted indexes: one over document fields, one over annotation text.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::model::{AnnotationId, AnnotationRecord, DocumentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentField {
    Title,
    Descriptors,
    Abstract,
    Authors,
    Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationField {
    BodyText,
    QuotedText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Posting<T, F> {
    pub target_ref: T,
    pub field: F,
    pub term_frequency: u32,
}

type FieldCounts<F> = BTreeMap<F, u32>;

fn count_fields<F: Ord + Copy>(fields: &[(F, String)]) -> BTreeMap<String, FieldCounts<F>> {
    let mut out: BTreeMap<String, FieldCounts<F>> = BTreeMap::new();
    for (field, text) in fields {
        for term in tokenize(text) {
            *out.entry(term).or_default().entry(*field).or_default() += 1;
        }
    }
    out
}

pub(crate) fn document_fields(doc: &DocumentRecord) -> Vec<(DocumentField, String)> {
    let authors = doc
        .authors
        .iter()
        .map(|a| format!("{} {}", a.first_name, a.last_name))
        .collect::<Vec<_>>()
        .join(" ");
    vec![
        (DocumentField::Title, doc.title.clone()),
        (DocumentField::Descriptors, doc.descriptors.join(" ")),
        (DocumentField::Abstract, doc.r#abstract.clone()),
        (DocumentField::Authors, authors),
        (DocumentField::Body, doc.body.clone()),
    ]
}

pub(crate) fn annotation_fields(ann: &AnnotationRecord) -> Vec<(AnnotationField, String)> {
    vec![
        (AnnotationField::BodyText, ann.body_text.clone()),
        (AnnotationField::QuotedText, ann.anchor.quoted_text.clone()),
    ]
}

/// Term → postings for documents and for annotations.
///
/// Upserts replace every posting of the target, so re-indexing an unchanged
/// record leaves the index as it was.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PostingIndex {
    documents: BTreeMap<String, BTreeMap<String, FieldCounts<DocumentField>>>,
    annotations: BTreeMap<String, BTreeMap<AnnotationId, FieldCounts<AnnotationField>>>,
    document_terms: BTreeMap<String, BTreeSet<String>>,
    annotation_terms: BTreeMap<AnnotationId, BTreeSet<String>>,
    annotation_document: BTreeMap<AnnotationId, String>,
}

impl PostingIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn upsert_document(&mut self, doc: &DocumentRecord) {
        let key = &doc.document_ref;
        if let Some(old) = self.document_terms.remove(key) {
            for term in old {
                if let Some(postings) = self.documents.get_mut(&term) {
                    postings.remove(key);
                    if postings.is_empty() {
                        self.documents.remove(&term);
                    }
                }
            }
        }
        let counts = count_fields(&document_fields(doc));
        self.document_terms
            .insert(key.clone(), counts.keys().cloned().collect());
        for (term, fields) in counts {
            self.documents
                .entry(term)
                .or_default()
                .insert(key.clone(), fields);
        }
    }

    pub fn upsert_annotation(&mut self, ann: &AnnotationRecord) {
        let key = ann.id();
        if let Some(old) = self.annotation_terms.remove(&key) {
            for term in old {
                if let Some(postings) = self.annotations.get_mut(&term) {
                    postings.remove(&key);
                    if postings.is_empty() {
                        self.annotations.remove(&term);
                    }
                }
            }
        }
        let counts = count_fields(&annotation_fields(ann));
        self.annotation_terms
            .insert(key.clone(), counts.keys().cloned().collect());
        self.annotation_document
            .insert(key.clone(), ann.anchor.document_ref.clone());
        for (term, fields) in counts {
            self.annotations
                .entry(term)
                .or_default()
                .insert(key.clone(), fields);
        }
    }

    /// Documents containing `term`, with their summed term frequency.
    pub fn documents_for(&self, term: &str) -> impl Iterator<Item = (&str, u64)> {
        self.documents.get(term).into_iter().flat_map(|m| {
            m.iter()
                .map(|(doc, fields)| (doc.as_str(), fields.values().map(|&n| u64::from(n)).sum()))
        })
    }

    /// Annotations containing `term` with their summed term frequency and
    /// the document each is anchored to.
    pub fn annotations_for(&self, term: &str) -> impl Iterator<Item = (&AnnotationId, &str, u64)> {
        self.annotations.get(term).into_iter().flat_map(move |m| {
            m.iter().map(move |(id, fields)| {
                let doc = self
                    .annotation_document
                    .get(id)
                    .map(String::as_str)
                    .unwrap_or_default();
                (id, doc, fields.values().map(|&n| u64::from(n)).sum())
            })
        })
    }

    pub fn document_postings(&self, term: &str) -> Vec<Posting<String, DocumentField>> {
        let mut out = Vec::new();
        if let Some(m) = self.documents.get(term) {
            for (doc, fields) in m {
                for (&field, &tf) in fields {
                    out.push(Posting {
                        target_ref: doc.clone(),
                        field,
                        term_frequency: tf,
                    });
                }
            }
        }
        out
    }

    pub fn annotation_postings(&self, term: &str) -> Vec<Posting<AnnotationId, AnnotationField>> {
        let mut out = Vec::new();
        if let Some(m) = self.annotations.get(term) {
            for (id, fields) in m {
                for (&field, &tf) in fields {
                    out.push(Posting {
                        target_ref: id.clone(),
                        field,
                        term_frequency: tf,
                    });
                }
            }
        }
        out
    }

    pub fn document_count(&self) -> usize {
        self.document_terms.len()
    }

    pub fn annotation_count(&self) -> usize {
        self.annotation_terms.len()
    }
}
