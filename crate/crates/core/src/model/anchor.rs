use super::{AnnotationAnchor, DocumentRecord, ModelError, Placement};

/// Number of characters (Unicode scalar values) in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Character-indexed slice `[start, end)`, or `None` when out of range.
pub fn slice_chars(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut boundaries = s
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(s.len()));
    let from = boundaries.nth(start)?;
    let to = if end == start {
        from
    } else {
        boundaries.nth(end - start - 1)?
    };
    Some(&s[from..to])
}

/// Returns the text an anchor currently designates in `doc`.
pub fn resolve_anchor<'d>(
    anchor: &AnnotationAnchor,
    doc: &'d DocumentRecord,
) -> Result<&'d str, ModelError> {
    if anchor.placement == Placement::WholeDocument {
        return Ok(&doc.body);
    }
    slice_chars(&doc.body, anchor.start_offset, anchor.end_offset).ok_or_else(|| {
        ModelError::AnchorOutOfRange {
            start: anchor.start_offset,
            end: anchor.end_offset,
            len: char_len(&doc.body),
        }
    })
}
