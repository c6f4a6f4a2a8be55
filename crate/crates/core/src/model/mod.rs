//! Domain types for users, documents, annotations and sessions.
//!
//! Every type here is an immutable value once constructed. The JSON encoding
//! derived below is the canonical interchange form: field names as declared,
//! enums as lowercase snake_case strings, and subtyped enums as
//! `{"kind": "...", "subtype": "..."}`.

mod anchor;
mod ids;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use anchor::{char_len, resolve_anchor, slice_chars};
pub use ids::generate_ref;
pub use validate::{validate_annotation, validate_federated, ParentLookup};

/// Integer UTC seconds.
pub type Timestamp = i64;

/// Errors raised while checking domain records.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("annotation created at {created_at} precedes document availability at {available_at}")]
    TemporalViolation {
        created_at: Timestamp,
        available_at: Timestamp,
    },
    #[error("anchor [{start}, {end}) is out of range for a body of {len} characters")]
    AnchorOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("quoted text does not match the anchored slice")]
    QuoteMismatch { expected: String, found: String },
    #[error("follow-up parent {0} not found on the same document")]
    MissingParent(String),
    #[error("invalid {field} value {value:?}")]
    InvalidEnum { field: &'static str, value: String },
    #[error("required field {0} is empty")]
    MissingField(&'static str),
    #[error("anchor names document {anchor} but was checked against {document}")]
    DocumentMismatch { anchor: String, document: String },
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::TemporalViolation { .. } => "TemporalViolation",
            ModelError::AnchorOutOfRange { .. } => "AnchorOutOfRange",
            ModelError::QuoteMismatch { .. } => "QuoteMismatch",
            ModelError::MissingParent(_) => "MissingParent",
            ModelError::InvalidEnum { .. } => "InvalidEnum",
            ModelError::MissingField(_) => "ValidationFailed",
            ModelError::DocumentMismatch { .. } => "ValidationFailed",
        }
    }
}

/// Declares a closed string enum with snake_case literals, `FromStr`,
/// `Display` and an `ALL` table. Serde derives are declared alongside.
macro_rules! string_enum {
    (
        $(#[$meta:meta])*
        $name:ident as $field:literal {
            $($variant:ident => $lit:literal),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $lit),+
                }
            }
        }

        impl FromStr for $name {
            type Err = ModelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($lit => Ok($name::$variant),)+
                    _ => Err(ModelError::InvalidEnum { field: $field, value: s.to_string() }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

string_enum! {
    /// The two identities a user may hold. Stored and reported, never enforced.
    Role as "role" {
        Watcher => "watcher",
        DecisionMaker => "decision_maker",
    }
}

string_enum! {
    Placement as "placement" {
        InMargin => "in_margin",
        Footnote => "footnote",
        Endnote => "endnote",
        Gutter => "gutter",
        Inline => "inline",
        WholeDocument => "whole_document",
    }
}

string_enum! {
    TypographicStyle as "typographic style" {
        Italics => "italics",
        Underlining => "underlining",
        Other => "other",
    }
}

string_enum! {
    IconSymbol as "icon symbol" {
        Star => "star",
        QuestionMark => "question_mark",
        ExclamationMark => "exclamation_mark",
        Other => "other",
    }
}

string_enum! {
    /// Why the annotator wrote the annotation.
    AnnotationObjective as "objective" {
        Recapitulation => "recapitulation",
        Evaluation => "evaluation",
        Summary => "summary",
        RaiseAPoint => "raise_a_point",
        Classification => "classification",
        Structuring => "structuring",
        Differentiating => "differentiating",
        ForInformation => "for_information",
        AnswerToQuestion => "answer_to_question",
        Illustration => "illustration",
        ExtensionOfDocument => "extension_of_document",
        ClarifyAmbiguity => "clarify_ambiguity",
    }
}

string_enum! {
    /// The kind of an [`AnnotationType`] with its subtype dropped; used by filters.
    AnnotationKind as "annotation kind" {
        Marking => "marking",
        Typographic => "typographic",
        Reformatting => "reformatting",
        PassageNumbering => "passage_numbering",
        Text => "text",
        Icon => "icon",
        SymbolRelation => "symbol_relation",
    }
}

string_enum! {
    ApproachKind as "approach" {
        New => "new",
        FollowUp => "follow_up",
    }
}

/// Annotation taxonomy. Only `typographic` and `icon` carry a subtype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "subtype", rename_all = "snake_case")]
pub enum AnnotationType {
    Marking,
    Typographic(TypographicStyle),
    Reformatting,
    PassageNumbering,
    Text,
    Icon(IconSymbol),
    SymbolRelation,
}

impl AnnotationType {
    pub fn kind(&self) -> AnnotationKind {
        match self {
            AnnotationType::Marking => AnnotationKind::Marking,
            AnnotationType::Typographic(_) => AnnotationKind::Typographic,
            AnnotationType::Reformatting => AnnotationKind::Reformatting,
            AnnotationType::PassageNumbering => AnnotationKind::PassageNumbering,
            AnnotationType::Text => AnnotationKind::Text,
            AnnotationType::Icon(_) => AnnotationKind::Icon,
            AnnotationType::SymbolRelation => AnnotationKind::SymbolRelation,
        }
    }

    /// Builds a type from a kind literal and an optional subtype literal.
    /// The subtype must be present exactly when the kind takes one.
    pub fn parse(kind: &str, subtype: Option<&str>) -> Result<Self, ModelError> {
        let kind: AnnotationKind = kind.parse()?;
        let no_subtype = |t: AnnotationType| match subtype {
            None => Ok(t),
            Some(s) => Err(ModelError::InvalidEnum {
                field: "annotation subtype",
                value: s.to_string(),
            }),
        };
        let missing = || ModelError::InvalidEnum {
            field: "annotation subtype",
            value: String::new(),
        };
        match kind {
            AnnotationKind::Marking => no_subtype(AnnotationType::Marking),
            AnnotationKind::Reformatting => no_subtype(AnnotationType::Reformatting),
            AnnotationKind::PassageNumbering => no_subtype(AnnotationType::PassageNumbering),
            AnnotationKind::Text => no_subtype(AnnotationType::Text),
            AnnotationKind::SymbolRelation => no_subtype(AnnotationType::SymbolRelation),
            AnnotationKind::Typographic => Ok(AnnotationType::Typographic(
                subtype.ok_or_else(missing)?.parse()?,
            )),
            AnnotationKind::Icon => Ok(AnnotationType::Icon(subtype.ok_or_else(missing)?.parse()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "subtype", rename_all = "snake_case")]
pub enum DocumentFormat {
    Pdf,
    Word,
    Html,
    Text,
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorProfile {
    pub annotator_ref: String,
    pub role: Role,
    pub first_name: String,
    pub last_name: String,
    pub email: String,
    pub postal_address: String,
    pub region: String,
    pub country: String,
    pub activity_area: String,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Author {
    pub first_name: String,
    pub last_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub document_ref: String,
    pub title: String,
    #[serde(default)]
    pub descriptors: Vec<String>,
    #[serde(default)]
    pub authors: Vec<Author>,
    pub published_at: Timestamp,
    pub format: DocumentFormat,
    #[serde(default)]
    pub r#abstract: String,
    #[serde(default)]
    pub body: String,
    /// Zero on input means "not yet ingested"; the store stamps it.
    #[serde(default)]
    pub available_at: Timestamp,
    /// Set for records created from a federated stub; such records carry no body.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub placeholder: bool,
}

/// The subset of a document that travels with federated annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentStub {
    pub document_ref: String,
    pub title: String,
    #[serde(default)]
    pub descriptors: Vec<String>,
    pub available_at: Timestamp,
}

impl DocumentStub {
    pub fn of(doc: &DocumentRecord) -> Self {
        DocumentStub {
            document_ref: doc.document_ref.clone(),
            title: doc.title.clone(),
            descriptors: doc.descriptors.clone(),
            available_at: doc.available_at,
        }
    }

    pub fn into_placeholder(self) -> DocumentRecord {
        DocumentRecord {
            document_ref: self.document_ref,
            title: self.title,
            descriptors: self.descriptors,
            authors: Vec::new(),
            published_at: 0,
            format: DocumentFormat::Text,
            r#abstract: String::new(),
            body: String::new(),
            available_at: self.available_at,
            placeholder: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationAnchor {
    pub document_ref: String,
    pub start_offset: usize,
    pub end_offset: usize,
    pub quoted_text: String,
    pub placement: Placement,
}

impl AnnotationAnchor {
    pub fn whole_document(document_ref: impl Into<String>) -> Self {
        AnnotationAnchor {
            document_ref: document_ref.into(),
            start_offset: 0,
            end_offset: 0,
            quoted_text: String::new(),
            placement: Placement::WholeDocument,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Approach {
    New,
    FollowUp { parent_context_ref: String },
}

impl Approach {
    pub fn kind(&self) -> ApproachKind {
        match self {
            Approach::New => ApproachKind::New,
            Approach::FollowUp { .. } => ApproachKind::FollowUp,
        }
    }
}

/// Where an annotation lives and therefore who may read it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Visibility {
    ServerShared,
    LocalPrivate,
    ProxyGroup { group_id: String },
}

/// Global identity of an annotation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnnotationId {
    pub origin_system: String,
    pub context_ref: String,
}

impl AnnotationId {
    pub fn new(origin_system: impl Into<String>, context_ref: impl Into<String>) -> Self {
        AnnotationId {
            origin_system: origin_system.into(),
            context_ref: context_ref.into(),
        }
    }
}

impl fmt::Display for AnnotationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.origin_system, self.context_ref)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub context_ref: String,
    pub origin_system: String,
    pub annotator_ref: String,
    pub anchor: AnnotationAnchor,
    pub ann_type: AnnotationType,
    pub objective: AnnotationObjective,
    pub body_text: String,
    pub approach: Approach,
    pub session_ref: String,
    pub created_at: Timestamp,
    pub visibility: Visibility,
}

impl AnnotationRecord {
    pub fn id(&self) -> AnnotationId {
        AnnotationId {
            origin_system: self.origin_system.clone(),
            context_ref: self.context_ref.clone(),
        }
    }

    pub fn document_ref(&self) -> &str {
        &self.anchor.document_ref
    }

    /// The (maker, document, time) view of an annotation.
    pub fn maker_triple(&self) -> (&str, &str, Timestamp) {
        (
            &self.annotator_ref,
            &self.anchor.document_ref,
            self.created_at,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionEventKind {
    QueryIssued { terms: Vec<String> },
    DocumentConsulted { document_ref: String },
    AnnotationCreated { context_ref: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub at: Timestamp,
    #[serde(flatten)]
    pub kind: SessionEventKind,
}

/// The user-supplied identity captured when a session opens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitProfile {
    pub annotator_ref: String,
    pub role: Role,
    pub first_name: String,
    pub last_name: String,
    pub email: String,
    pub postal_address: String,
    pub region: String,
    pub country: String,
    pub activity_area: String,
}

impl From<&AnnotatorProfile> for ExplicitProfile {
    fn from(p: &AnnotatorProfile) -> Self {
        ExplicitProfile {
            annotator_ref: p.annotator_ref.clone(),
            role: p.role,
            first_name: p.first_name.clone(),
            last_name: p.last_name.clone(),
            email: p.email.clone(),
            postal_address: p.postal_address.clone(),
            region: p.region.clone(),
            country: p.country.clone(),
            activity_area: p.activity_area.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionContext {
    pub session_ref: String,
    pub annotator_ref: String,
    pub opened_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_at: Option<Timestamp>,
    #[serde(default)]
    pub events: Vec<SessionEvent>,
    pub explicit_profile: ExplicitProfile,
}

impl SessionContext {
    pub fn is_open(&self) -> bool {
        self.closed_at.is_none()
    }

    /// Timestamp of the most recent activity in the session.
    pub fn last_activity(&self) -> Timestamp {
        self.events.last().map_or(self.opened_at, |e| e.at)
    }

    pub fn length(&self) -> Option<Timestamp> {
        self.closed_at.map(|c| c - self.opened_at)
    }
}
