use serde::{Deserialize, Serialize};

use crate::model::{
    AnnotationKind, AnnotationObjective, AnnotationRecord, ApproachKind, Timestamp,
};

/// Conjunctive filter over annotations. Absent fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_ref: Option<String>,
    /// Inclusive lower bound on `created_at`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<Timestamp>,
    /// Exclusive upper bound on `created_at`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<AnnotationKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<AnnotationObjective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach: Option<ApproachKind>,
}

impl AnnotationFilter {
    pub fn document(document_ref: impl Into<String>) -> Self {
        AnnotationFilter {
            document_ref: Some(document_ref.into()),
            ..Default::default()
        }
    }

    pub fn matches(&self, a: &AnnotationRecord) -> bool {
        self.document_ref
            .as_deref()
            .is_none_or(|d| a.anchor.document_ref == d)
            && self
                .annotator_ref
                .as_deref()
                .is_none_or(|u| a.annotator_ref == u)
            && self.from.is_none_or(|from| a.created_at >= from)
            && self.to.is_none_or(|to| a.created_at < to)
            && self.kind.is_none_or(|k| a.ann_type.kind() == k)
            && self.objective.is_none_or(|o| a.objective == o)
            && self.approach.is_none_or(|ap| a.approach.kind() == ap)
    }
}
