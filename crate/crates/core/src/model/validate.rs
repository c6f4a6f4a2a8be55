use super::{
    char_len, slice_chars, AnnotationAnchor, AnnotationRecord, Approach, DocumentRecord,
    ModelError, Placement, Timestamp, Visibility,
};

/// Answers whether a follow-up's parent exists on the child's document.
pub trait ParentLookup {
    fn has_parent(&self, child: &AnnotationRecord, parent_context_ref: &str) -> bool;
}

impl ParentLookup for [AnnotationRecord] {
    fn has_parent(&self, child: &AnnotationRecord, parent_context_ref: &str) -> bool {
        self.iter().any(|a| {
            a.context_ref == parent_context_ref
                && a.anchor.document_ref == child.anchor.document_ref
        })
    }
}

impl<F> ParentLookup for F
where
    F: Fn(&AnnotationRecord, &str) -> bool,
{
    fn has_parent(&self, child: &AnnotationRecord, parent_context_ref: &str) -> bool {
        self(child, parent_context_ref)
    }
}

fn require(field: &'static str, value: &str) -> Result<(), ModelError> {
    if value.is_empty() {
        Err(ModelError::MissingField(field))
    } else {
        Ok(())
    }
}

fn check_identity_fields(candidate: &AnnotationRecord) -> Result<(), ModelError> {
    require("context_ref", &candidate.context_ref)?;
    require("origin_system", &candidate.origin_system)?;
    require("annotator_ref", &candidate.annotator_ref)?;
    require("anchor.document_ref", &candidate.anchor.document_ref)?;
    require("session_ref", &candidate.session_ref)?;
    if let Approach::FollowUp { parent_context_ref } = &candidate.approach {
        require("approach.parent_context_ref", parent_context_ref)?;
    }
    if let Visibility::ProxyGroup { group_id } = &candidate.visibility {
        require("visibility.group_id", group_id)?;
    }
    Ok(())
}

fn check_temporal(created_at: Timestamp, available_at: Timestamp) -> Result<(), ModelError> {
    if created_at < available_at {
        return Err(ModelError::TemporalViolation {
            created_at,
            available_at,
        });
    }
    Ok(())
}

/// Offsets must be ordered, and a whole-document anchor spans `(0, 0)`.
fn check_anchor_shape(
    anchor: &AnnotationAnchor,
    body_len: Option<usize>,
) -> Result<(), ModelError> {
    let out_of_range = || ModelError::AnchorOutOfRange {
        start: anchor.start_offset,
        end: anchor.end_offset,
        len: body_len.unwrap_or(0),
    };
    if anchor.placement == Placement::WholeDocument {
        if anchor.start_offset != 0 || anchor.end_offset != 0 {
            return Err(out_of_range());
        }
        return Ok(());
    }
    if anchor.start_offset > anchor.end_offset {
        return Err(out_of_range());
    }
    if let Some(len) = body_len {
        if anchor.end_offset > len {
            return Err(out_of_range());
        }
    }
    Ok(())
}

/// Checks `candidate` against the document it anchors to and returns it unchanged.
///
/// `parents` resolves follow-up parents; it is only consulted for
/// `Approach::FollowUp`.
pub fn validate_annotation<P: ParentLookup + ?Sized>(
    candidate: AnnotationRecord,
    doc: &DocumentRecord,
    parents: &P,
) -> Result<AnnotationRecord, ModelError> {
    if candidate.anchor.document_ref != doc.document_ref {
        return Err(ModelError::DocumentMismatch {
            anchor: candidate.anchor.document_ref.clone(),
            document: doc.document_ref.clone(),
        });
    }
    check_identity_fields(&candidate)?;
    check_temporal(candidate.created_at, doc.available_at)?;

    let anchor = &candidate.anchor;
    check_anchor_shape(anchor, Some(char_len(&doc.body)))?;
    // whole_document quotes the empty (0, 0) slice.
    let slice = slice_chars(&doc.body, anchor.start_offset, anchor.end_offset).unwrap_or_default();
    if anchor.quoted_text != slice {
        return Err(ModelError::QuoteMismatch {
            expected: slice.to_string(),
            found: anchor.quoted_text.clone(),
        });
    }

    if let Approach::FollowUp { parent_context_ref } = &candidate.approach {
        if !parents.has_parent(&candidate, parent_context_ref) {
            return Err(ModelError::MissingParent(parent_context_ref.clone()));
        }
    }
    Ok(candidate)
}

/// Validation for annotations arriving from another system.
///
/// Only the document stub is known, so offsets are checked for shape but not
/// against a body, and follow-up parents are not required to be present.
pub fn validate_federated(
    candidate: AnnotationRecord,
    available_at: Timestamp,
) -> Result<AnnotationRecord, ModelError> {
    check_identity_fields(&candidate)?;
    check_temporal(candidate.created_at, available_at)?;
    check_anchor_shape(&candidate.anchor, None)?;
    Ok(candidate)
}
