//! Fixtures, random workloads and brute-force oracles shared by the
//! integration tests and the acceptance runner.
//!
//! The oracles deliberately avoid the crate's own tokenizer, index, filter,
//! visibility and profile code: each recomputes its answer from the raw
//! records by the plain definition.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use marginalia_core::federation::{CollaborationMode, FederatedAnnotation};
use marginalia_core::model::{
    AnnotationAnchor, AnnotationId, AnnotationObjective, AnnotationRecord, AnnotationType,
    AnnotatorProfile, Approach, Author, DocumentFormat, DocumentRecord, DocumentStub, IconSymbol,
    Placement, Role, SessionEvent, SessionEventKind, Timestamp, TypographicStyle, Visibility,
};
use marginalia_core::store::{Clock, Store};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

pub const VOCAB: &[&str] = &[
    "medical",
    "accounting",
    "audit",
    "economic",
    "intelligence",
    "tax",
    "ledger",
    "health",
    "market",
    "risk",
    "policy",
    "data",
];

/// A clock tests can move by hand.
#[derive(Clone)]
pub struct ManualClock(Arc<AtomicI64>);

impl ManualClock {
    pub fn new(t: Timestamp) -> Self {
        ManualClock(Arc::new(AtomicI64::new(t)))
    }

    pub fn set(&self, t: Timestamp) {
        self.0.store(t, Ordering::SeqCst);
    }

    pub fn get(&self) -> Timestamp {
        self.0.load(Ordering::SeqCst)
    }

    pub fn clock(&self) -> Clock {
        let inner = self.0.clone();
        Arc::new(move || inner.load(Ordering::SeqCst))
    }
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn store(system_id: &str) -> Store {
    Store::in_memory(system_id).with_clock(Arc::new(|| 1_000_000))
}

pub fn user(annotator_ref: &str, role: Role, area: &str, country: &str) -> AnnotatorProfile {
    AnnotatorProfile {
        annotator_ref: annotator_ref.to_string(),
        role,
        first_name: format!("{annotator_ref}-first"),
        last_name: format!("{annotator_ref}-last"),
        email: format!("{annotator_ref}@example.org"),
        postal_address: String::new(),
        region: String::new(),
        country: country.to_string(),
        activity_area: area.to_string(),
        created_at: 1,
    }
}

pub fn doc(document_ref: &str, title: &str, body: &str, available_at: Timestamp) -> DocumentRecord {
    DocumentRecord {
        document_ref: document_ref.to_string(),
        title: title.to_string(),
        descriptors: Vec::new(),
        authors: Vec::new(),
        published_at: 0,
        format: DocumentFormat::Text,
        r#abstract: String::new(),
        body: body.to_string(),
        available_at,
        placeholder: false,
    }
}

/// A whole-document text annotation.
#[allow(clippy::too_many_arguments)]
pub fn note(
    origin: &str,
    context_ref: &str,
    annotator_ref: &str,
    session_ref: &str,
    document_ref: &str,
    body_text: &str,
    created_at: Timestamp,
    visibility: Visibility,
) -> AnnotationRecord {
    AnnotationRecord {
        context_ref: context_ref.to_string(),
        origin_system: origin.to_string(),
        annotator_ref: annotator_ref.to_string(),
        anchor: AnnotationAnchor::whole_document(document_ref),
        ann_type: AnnotationType::Text,
        objective: AnnotationObjective::ForInformation,
        body_text: body_text.to_string(),
        approach: Approach::New,
        session_ref: session_ref.to_string(),
        created_at,
        visibility,
    }
}

/// A shared annotation with its stub, as a remote system would ship it.
pub fn remote(
    origin: &str,
    context_ref: &str,
    document: &DocumentRecord,
    text: &str,
) -> FederatedAnnotation {
    FederatedAnnotation {
        annotation: note(
            origin,
            context_ref,
            &format!("{origin}-user"),
            &format!("{origin}-session"),
            &document.document_ref,
            text,
            document.available_at + 10,
            Visibility::ServerShared,
        ),
        document: DocumentStub::of(document),
    }
}

pub fn modes(list: &[CollaborationMode]) -> BTreeSet<CollaborationMode> {
    list.iter().copied().collect()
}

/// Adds a user and opens a session for them at `at`. Returns the session ref.
pub fn enroll(store: &mut Store, profile: AnnotatorProfile, at: Timestamp) -> String {
    let r = profile.annotator_ref.clone();
    store.put_user(profile).unwrap();
    store.open_session(&r, at).unwrap().session_ref
}

fn words(rng: &mut StdRng, max: usize) -> String {
    let n = rng.random_range(0..=max);
    (0..n)
        .map(|_| {
            let w = *VOCAB.choose(rng).unwrap();
            if rng.random_bool(0.2) {
                w.to_uppercase()
            } else {
                w.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(if rng.random_bool(0.5) { " " } else { ", " })
}

pub fn random_query(rng: &mut StdRng) -> String {
    let n = rng.random_range(1..=3);
    let mut terms: Vec<String> = (0..n)
        .map(|_| VOCAB.choose(rng).unwrap().to_string())
        .collect();
    if rng.random_bool(0.15) {
        terms.push("zzz".into());
    }
    terms.join(" ")
}

fn random_type(rng: &mut StdRng) -> AnnotationType {
    match rng.random_range(0..7) {
        0 => AnnotationType::Marking,
        1 => AnnotationType::Typographic(TypographicStyle::Underlining),
        2 => AnnotationType::Reformatting,
        3 => AnnotationType::PassageNumbering,
        4 => AnnotationType::Icon(IconSymbol::Star),
        5 => AnnotationType::SymbolRelation,
        _ => AnnotationType::Text,
    }
}

fn random_visibility(rng: &mut StdRng, groups: &[String]) -> Visibility {
    match rng.random_range(0..3) {
        0 => Visibility::ServerShared,
        1 => Visibility::LocalPrivate,
        _ => match groups.choose(rng) {
            Some(g) => Visibility::ProxyGroup {
                group_id: g.clone(),
            },
            None => Visibility::ServerShared,
        },
    }
}

/// An anchor on `doc`: a random character span of the body or the whole document.
fn random_anchor(rng: &mut StdRng, doc: &DocumentRecord) -> AnnotationAnchor {
    let chars: Vec<char> = doc.body.chars().collect();
    if chars.is_empty() || rng.random_bool(0.3) {
        return AnnotationAnchor::whole_document(&doc.document_ref);
    }
    let start = rng.random_range(0..=chars.len());
    let end = rng.random_range(start..=chars.len());
    AnnotationAnchor {
        document_ref: doc.document_ref.clone(),
        start_offset: start,
        end_offset: end,
        quoted_text: chars[start..end].iter().collect(),
        placement: Placement::InMargin,
    }
}

/// A small random corpus with users, a proxy group, documents and
/// annotations in all three visibility tiers.
pub struct Corpus {
    pub store: Store,
    pub users: Vec<String>,
    pub docs: Vec<String>,
}

pub fn random_corpus(rng: &mut StdRng, max_docs: usize, max_annotations: usize) -> Corpus {
    let n = rng.random_range(0..=max_annotations);
    random_corpus_with(rng, max_docs, n)
}

/// Like [`random_corpus`] with exactly `n_ann` annotations.
pub fn random_corpus_with(rng: &mut StdRng, max_docs: usize, n_ann: usize) -> Corpus {
    let mut store = store("local");
    let users: Vec<String> = (0..3).map(|i| format!("u{i}")).collect();
    let mut sessions = Vec::new();
    for (i, u) in users.iter().enumerate() {
        let role = if i % 2 == 0 {
            Role::Watcher
        } else {
            Role::DecisionMaker
        };
        sessions.push(enroll(&mut store, user(u, role, "research", "fr"), 10));
    }
    store.create_group("g0").unwrap();
    for u in &users {
        if rng.random_bool(0.5) {
            store.add_group_member("g0", u).unwrap();
        }
    }
    let groups = vec!["g0".to_string()];

    let n_docs = rng.random_range(1..=max_docs);
    let mut docs = Vec::new();
    for i in 0..n_docs {
        let mut d = doc(&format!("d{i:02}"), &words(rng, 3), &words(rng, 8), 100);
        d.descriptors = (0..rng.random_range(0..=2))
            .map(|_| words(rng, 1))
            .collect();
        d.r#abstract = words(rng, 4);
        if rng.random_bool(0.4) {
            d.authors.push(Author {
                first_name: words(rng, 1),
                last_name: "Smith".into(),
            });
        }
        docs.push(d.document_ref.clone());
        store.ingest_document(d).unwrap();
    }

    let mut made: Vec<(String, String)> = Vec::new();
    for i in 0..n_ann {
        let ui = rng.random_range(0..users.len());
        let document = store
            .get_document(docs.choose(rng).unwrap())
            .unwrap()
            .clone();
        let approach = match made.iter().rfind(|(d, _)| *d == document.document_ref) {
            Some((_, parent)) if rng.random_bool(0.3) => Approach::FollowUp {
                parent_context_ref: parent.clone(),
            },
            _ => Approach::New,
        };
        let a = AnnotationRecord {
            context_ref: format!("a{i:02}"),
            origin_system: "local".into(),
            annotator_ref: users[ui].clone(),
            anchor: random_anchor(rng, &document),
            ann_type: random_type(rng),
            objective: *AnnotationObjective::ALL.choose(rng).unwrap(),
            body_text: words(rng, 5),
            approach,
            session_ref: sessions[ui].clone(),
            created_at: 200 + i as Timestamp,
            visibility: random_visibility(rng, &groups),
        };
        store.append_annotation(a).unwrap();
        made.push((document.document_ref.clone(), format!("a{i:02}")));
    }
    Corpus { store, users, docs }
}

/// Drives a random mix of valid and invalid operations until the log holds
/// at least `min_entries` entries. Returns the number of operations attempted.
pub fn mixed_workload(rng: &mut StdRng, store: &mut Store, min_entries: u64) -> usize {
    // Resume from whatever an earlier call left behind.
    let state = store.state();
    let mut t: Timestamp = state
        .sessions()
        .map(|s| s.closed_at.unwrap_or(s.last_activity()))
        .chain(state.documents().map(|d| d.available_at))
        .fold(1_000, Timestamp::max);
    let mut users: Vec<String> = state
        .list_users()
        .iter()
        .map(|u| u.annotator_ref.clone())
        .collect();
    let mut docs: Vec<String> = state
        .documents()
        .filter(|d| !d.placeholder)
        .map(|d| d.document_ref.clone())
        .collect();
    let mut groups: Vec<String> = state.groups().keys().cloned().collect();
    let mut peer: Option<String> = state.peer("remote").map(|p| p.peer_id.clone());
    let mut passwords = users
        .iter()
        .filter(|u| state.credential(u).is_some())
        .count();
    let mut attempts = 0;
    let mut next_ann = state.annotations().filter(|a| state.is_local(a)).count();
    let mut next_remote = state.annotation_count() - next_ann;

    while store.state().head() < min_entries {
        attempts += 1;
        t += rng.random_range(0..40);
        let open: Vec<(String, String)> = store
            .state()
            .open_sessions()
            .map(|s| (s.annotator_ref.clone(), s.session_ref.clone()))
            .collect();
        match rng.random_range(0..16) {
            0 if users.len() < 8 => {
                let r = format!("user{}", users.len());
                let role = if rng.random_bool(0.5) {
                    Role::Watcher
                } else {
                    Role::DecisionMaker
                };
                let mut p = user(
                    &r,
                    role,
                    ["teaching", "research", "student"].choose(rng).unwrap(),
                    "fr",
                );
                p.created_at = rng.random_range(1..100);
                store.put_user(p).unwrap();
                users.push(r);
            }
            1 if passwords < 2 && !users.is_empty() => {
                store
                    .set_password(users.choose(rng).unwrap(), "pw")
                    .unwrap();
                passwords += 1;
            }
            2 if docs.len() < 15 => {
                let r = format!("doc{}", docs.len());
                store
                    .ingest_document(doc(&r, &words(rng, 3), &words(rng, 10), t))
                    .unwrap();
                docs.push(r);
            }
            3 if groups.len() < 3 => {
                let g = format!("group{}", groups.len());
                store.create_group(&g).unwrap();
                groups.push(g);
            }
            4 if !groups.is_empty() && !users.is_empty() => {
                store
                    .add_group_member(groups.choose(rng).unwrap(), users.choose(rng).unwrap())
                    .unwrap();
            }
            5 | 6 if !users.is_empty() => {
                let u = users.choose(rng).unwrap().clone();
                // Fails with SessionAlreadyOpen when the user has a fresh session.
                let _ = store.open_session(&u, t);
            }
            7 | 8 if !open.is_empty() && !docs.is_empty() => {
                let (_, s) = open.choose(rng).unwrap();
                let kind = if rng.random_bool(0.5) {
                    SessionEventKind::DocumentConsulted {
                        document_ref: docs.choose(rng).unwrap().clone(),
                    }
                } else {
                    SessionEventKind::QueryIssued {
                        terms: words(rng, 3)
                            .split([' ', ','])
                            .filter(|w| !w.is_empty())
                            .map(String::from)
                            .collect(),
                    }
                };
                store.record_event(s, SessionEvent { at: t, kind }).unwrap();
            }
            9..=11 if !open.is_empty() && !docs.is_empty() => {
                let (u, s) = open.choose(rng).unwrap();
                let document = store
                    .get_document(docs.choose(rng).unwrap())
                    .unwrap()
                    .clone();
                let parent = store
                    .state()
                    .annotations_on(&document.document_ref)
                    .map(|a| a.context_ref.clone())
                    .last();
                let approach = match parent {
                    Some(p) if rng.random_bool(0.3) => Approach::FollowUp {
                        parent_context_ref: p,
                    },
                    _ => Approach::New,
                };
                let mut a = AnnotationRecord {
                    context_ref: format!("ann{next_ann}"),
                    origin_system: store.system_id().to_string(),
                    annotator_ref: u.clone(),
                    anchor: random_anchor(rng, &document),
                    ann_type: random_type(rng),
                    objective: *AnnotationObjective::ALL.choose(rng).unwrap(),
                    body_text: words(rng, 5),
                    approach,
                    session_ref: s.clone(),
                    created_at: t.max(document.available_at),
                    visibility: random_visibility(rng, &groups),
                };
                if rng.random_bool(0.1) {
                    // Invalid: quote that cannot match, or a time before availability.
                    a.anchor.quoted_text.push('#');
                    a.anchor.placement = Placement::Footnote;
                    assert!(store.append_annotation(a).is_err());
                } else {
                    store.append_annotation(a).unwrap();
                    next_ann += 1;
                }
            }
            12 if !open.is_empty() => {
                let (_, s) = open.choose(rng).unwrap();
                store.close_session(s, t).unwrap();
            }
            13 => {
                t += 5_000;
                store.expire_idle_sessions(t).unwrap();
            }
            14 if !docs.is_empty() => {
                let token = "peer-token".to_string();
                let p = match &peer {
                    Some(p) => p.clone(),
                    None => {
                        store
                            .register_peer(
                                "remote",
                                "http://remote",
                                modes(&[CollaborationMode::Admissive]),
                                Some(token.clone()),
                            )
                            .unwrap();
                        peer = Some("remote".into());
                        "remote".into()
                    }
                };
                let document = store
                    .get_document(docs.choose(rng).unwrap())
                    .unwrap()
                    .clone();
                let item = remote(&p, &format!("r{next_remote}"), &document, &words(rng, 4));
                next_remote += 1;
                store.admissive_deposit(&p, &token, vec![item]).unwrap();
            }
            _ => {
                // Invalid operations leave the log untouched.
                let before = store.state().head();
                if let Some(d) = docs.first() {
                    assert!(store.ingest_document(doc(d, "dup", "", t)).is_err());
                }
                assert!(store.open_session("nobody", t).is_err());
                assert_eq!(store.state().head(), before);
            }
        }
    }
    attempts
}

/// Brute-force definitions.
pub mod oracle {
    use super::*;
    use marginalia_core::analytics::{RelationEdge, RelationKind};
    use marginalia_core::model::SessionContext;
    use marginalia_core::search::HitSource;
    use marginalia_core::store::AnnotationFilter;
    use marginalia_core::synthesizer::{ImplicitProfile, QueryRecord};
    use num_rational::Ratio;

    /// Lowercase maximal alphanumeric runs, built one character at a time.
    pub fn words(text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for c in text.chars() {
            if c.is_alphanumeric() {
                cur.push(c);
            } else if !cur.is_empty() {
                out.push(cur.to_lowercase());
                cur.clear();
            }
        }
        if !cur.is_empty() {
            out.push(cur.to_lowercase());
        }
        out
    }

    pub fn terms(query: &str) -> BTreeSet<String> {
        words(query).into_iter().collect()
    }

    fn tf(terms: &BTreeSet<String>, text: &str) -> u64 {
        words(text).iter().filter(|w| terms.contains(*w)).count() as u64
    }

    pub fn document_score(d: &DocumentRecord, terms: &BTreeSet<String>) -> u64 {
        let mut s = tf(terms, &d.title) + tf(terms, &d.r#abstract) + tf(terms, &d.body);
        for k in &d.descriptors {
            s += tf(terms, k);
        }
        for a in &d.authors {
            s += tf(terms, &a.first_name) + tf(terms, &a.last_name);
        }
        s
    }

    pub fn annotation_score(a: &AnnotationRecord, terms: &BTreeSet<String>) -> u64 {
        tf(terms, &a.body_text) + tf(terms, &a.anchor.quoted_text)
    }

    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct Hit {
        pub document_ref: String,
        pub score: Ratio<u64>,
        pub source: HitSource,
        pub contributors: Vec<AnnotationId>,
    }

    fn ranked(mut hits: Vec<Hit>) -> Vec<Hit> {
        hits.sort_by(|a, b| {
            b.score
                .cmp(&a.score)
                .then(a.document_ref.cmp(&b.document_ref))
        });
        hits
    }

    pub fn search_base(docs: &[DocumentRecord], query: &str) -> Vec<Hit> {
        let t = terms(query);
        ranked(
            docs.iter()
                .filter_map(|d| {
                    let s = document_score(d, &t);
                    (s > 0).then(|| Hit {
                        document_ref: d.document_ref.clone(),
                        score: Ratio::from_integer(s),
                        source: HitSource::DocumentMatch,
                        contributors: Vec::new(),
                    })
                })
                .collect(),
        )
    }

    pub fn search_extended(
        docs: &[DocumentRecord],
        annotations: &[AnnotationRecord],
        query: &str,
        weight: Ratio<u64>,
        visible: impl Fn(&AnnotationRecord) -> bool,
    ) -> Vec<Hit> {
        let t = terms(query);
        let mut hits = Vec::new();
        for d in docs {
            let base = document_score(d, &t);
            let mut ann_total = 0;
            let mut contributors = Vec::new();
            for a in annotations {
                if a.anchor.document_ref != d.document_ref || !visible(a) {
                    continue;
                }
                let s = annotation_score(a, &t);
                if s > 0 {
                    ann_total += s;
                    contributors.push(a.id());
                }
            }
            if base == 0 && contributors.is_empty() {
                continue;
            }
            contributors.sort();
            let source = match (base > 0, !contributors.is_empty()) {
                (true, true) => HitSource::Both,
                (true, false) => HitSource::DocumentMatch,
                _ => HitSource::AnnotationExtended,
            };
            hits.push(Hit {
                document_ref: d.document_ref.clone(),
                score: Ratio::from_integer(base) + weight * Ratio::from_integer(ann_total),
                source,
                contributors,
            });
        }
        ranked(hits)
    }

    pub fn visible(
        a: &AnnotationRecord,
        viewer: Option<&str>,
        groups: &BTreeMap<String, BTreeSet<String>>,
    ) -> bool {
        match &a.visibility {
            Visibility::ServerShared => true,
            Visibility::LocalPrivate => viewer == Some(a.annotator_ref.as_str()),
            Visibility::ProxyGroup { group_id } => match viewer {
                None => false,
                Some(v) => {
                    v == a.annotator_ref
                        || groups.get(group_id).map(|m| m.contains(v)).unwrap_or(false)
                }
            },
        }
    }

    pub fn filter_scan(
        annotations: &[AnnotationRecord],
        f: &AnnotationFilter,
        viewer: Option<&str>,
        groups: &BTreeMap<String, BTreeSet<String>>,
    ) -> Vec<AnnotationRecord> {
        let mut out: Vec<AnnotationRecord> = Vec::new();
        for a in annotations {
            if let Some(d) = &f.document_ref {
                if &a.anchor.document_ref != d {
                    continue;
                }
            }
            if let Some(u) = &f.annotator_ref {
                if &a.annotator_ref != u {
                    continue;
                }
            }
            if let Some(from) = f.from {
                if a.created_at < from {
                    continue;
                }
            }
            if let Some(to) = f.to {
                if a.created_at >= to {
                    continue;
                }
            }
            if let Some(k) = f.kind {
                if a.ann_type.kind() != k {
                    continue;
                }
            }
            if let Some(o) = f.objective {
                if a.objective != o {
                    continue;
                }
            }
            if let Some(ap) = f.approach {
                if a.approach.kind() != ap {
                    continue;
                }
            }
            if visible(a, viewer, groups) {
                out.push(a.clone());
            }
        }
        out.sort_by(|x, y| {
            (x.created_at, &x.context_ref, &x.origin_system).cmp(&(
                y.created_at,
                &y.context_ref,
                &y.origin_system,
            ))
        });
        out
    }

    /// The implicit profile as a pure fold over a user's sessions.
    pub fn profile_fold<'a>(
        annotator_ref: &str,
        sessions: impl IntoIterator<Item = &'a SessionContext>,
    ) -> ImplicitProfile {
        let mut mine: Vec<&SessionContext> = sessions
            .into_iter()
            .filter(|s| s.annotator_ref == annotator_ref)
            .collect();
        // Chronological: a user's sessions never overlap.
        mine.sort_by_key(|s| (s.opened_at, s.closed_at.is_none(), s.closed_at));
        let mut p = ImplicitProfile::empty(annotator_ref);
        for s in mine {
            p.sessions_count += 1;
            if let Some(c) = s.closed_at {
                p.total_time_on_system += c - s.opened_at;
            }
            for e in &s.events {
                match &e.kind {
                    SessionEventKind::DocumentConsulted { document_ref } => {
                        *p.documents_consulted
                            .entry(document_ref.clone())
                            .or_insert(0) += 1;
                    }
                    SessionEventKind::QueryIssued { terms } => p.queries_issued.push(QueryRecord {
                        terms: terms.clone(),
                        at: e.at,
                    }),
                    SessionEventKind::AnnotationCreated { .. } => {}
                }
            }
        }
        p
    }

    /// Relationship edges by exhaustive enumeration of every pair.
    pub fn graph(annotations: &[AnnotationRecord], kind: RelationKind) -> Vec<RelationEdge> {
        let users: BTreeSet<&str> = annotations
            .iter()
            .map(|a| a.annotator_ref.as_str())
            .collect();
        let docs: BTreeSet<&str> = annotations
            .iter()
            .map(|a| a.anchor.document_ref.as_str())
            .collect();
        let annotated = |u: &str, d: &str| {
            annotations
                .iter()
                .any(|a| a.annotator_ref == u && a.anchor.document_ref == d)
        };
        let mut edges = Vec::new();
        let mut push = |a: &str, b: &str, w: usize| {
            if w > 0 {
                edges.push(RelationEdge {
                    kind,
                    a_ref: a.into(),
                    b_ref: b.into(),
                    weight: w as u64,
                });
            }
        };
        match kind {
            RelationKind::UserDoc => {
                for u in &users {
                    for d in &docs {
                        let w = annotations
                            .iter()
                            .filter(|a| a.annotator_ref == *u && a.anchor.document_ref == *d)
                            .count();
                        push(u, d, w);
                    }
                }
            }
            RelationKind::DocDoc => {
                for d1 in &docs {
                    for d2 in &docs {
                        if d1 < d2 {
                            push(
                                d1,
                                d2,
                                users
                                    .iter()
                                    .filter(|u| annotated(u, d1) && annotated(u, d2))
                                    .count(),
                            );
                        }
                    }
                }
            }
            RelationKind::UserUser => {
                for u1 in &users {
                    for u2 in &users {
                        if u1 < u2 {
                            push(
                                u1,
                                u2,
                                docs.iter()
                                    .filter(|d| annotated(u1, d) && annotated(u2, d))
                                    .count(),
                            );
                        }
                    }
                }
            }
        }
        edges.sort_by(|x, y| {
            y.weight
                .cmp(&x.weight)
                .then((&x.a_ref, &x.b_ref).cmp(&(&y.a_ref, &y.b_ref)))
        });
        edges
    }
}

/// Wraps another transport and keeps a copy of every payload that leaves.
pub struct Recorder<T> {
    pub inner: T,
    pub sent: std::sync::Mutex<Vec<FederatedAnnotation>>,
    pub received: std::sync::Mutex<Vec<FederatedAnnotation>>,
}

impl<T> Recorder<T> {
    pub fn new(inner: T) -> Self {
        Recorder {
            inner,
            sent: Default::default(),
            received: Default::default(),
        }
    }

    pub fn sent(&self) -> Vec<FederatedAnnotation> {
        self.sent.lock().unwrap().clone()
    }

    pub fn received(&self) -> Vec<FederatedAnnotation> {
        self.received.lock().unwrap().clone()
    }
}

impl<T: marginalia_core::federation::PeerTransport> marginalia_core::federation::PeerTransport
    for Recorder<T>
{
    fn sync(
        &self,
        peer: &marginalia_core::federation::FederationPeer,
        request: &marginalia_core::federation::SyncRequest,
    ) -> marginalia_core::Result<marginalia_core::federation::SyncResponse> {
        if let Some(push) = &request.push {
            self.sent
                .lock()
                .unwrap()
                .extend(push.entries.iter().cloned());
        }
        let response = self.inner.sync(peer, request)?;
        self.received
            .lock()
            .unwrap()
            .extend(response.delta.entries.iter().cloned());
        Ok(response)
    }

    fn export(
        &self,
        peer: &marginalia_core::federation::FederationPeer,
        batch: &marginalia_core::federation::ExportBatch,
    ) -> marginalia_core::Result<()> {
        self.sent
            .lock()
            .unwrap()
            .extend(batch.annotations.iter().cloned());
        self.inner.export(peer, batch)
    }
}

/// A transport whose peer accepts everything and answers nothing.
pub struct NullTransport;

impl marginalia_core::federation::PeerTransport for NullTransport {
    fn sync(
        &self,
        peer: &marginalia_core::federation::FederationPeer,
        request: &marginalia_core::federation::SyncRequest,
    ) -> marginalia_core::Result<marginalia_core::federation::SyncResponse> {
        Ok(marginalia_core::federation::SyncResponse {
            delta: marginalia_core::federation::SyncDelta {
                origin_system: peer.peer_id.clone(),
                entries: Vec::new(),
                from_seq: request.cursor,
                to_seq: request.cursor,
                has_more: false,
            },
            peer_cursor: request.push.as_ref().map_or(0, |p| p.to_seq),
        })
    }

    fn export(
        &self,
        _peer: &marginalia_core::federation::FederationPeer,
        _batch: &marginalia_core::federation::ExportBatch,
    ) -> marginalia_core::Result<()> {
        Ok(())
    }
}
