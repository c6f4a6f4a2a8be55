//! Fixtures for driving the portal router in-process.

#![allow(dead_code)]

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use marginalia_core::model::{
    AnnotationAnchor, AnnotationObjective, AnnotationType, AnnotatorProfile, DocumentFormat,
    DocumentRecord, Role, Timestamp,
};
use marginalia_core::search::AnnotationWeight;
use marginalia_core::store::{SharedStore, Store, StoreConfig};
use marginalia_portal::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const START: Timestamp = 1_000;
pub const AVAILABLE: Timestamp = 100;

#[derive(Clone)]
pub struct ManualClock(Arc<AtomicI64>);

impl ManualClock {
    pub fn new(t: Timestamp) -> Self {
        ManualClock(Arc::new(AtomicI64::new(t)))
    }

    pub fn set(&self, t: Timestamp) {
        self.0.store(t, Ordering::SeqCst);
    }

    pub fn advance(&self, by: Timestamp) {
        self.0.fetch_add(by, Ordering::SeqCst);
    }
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

/// Password of every fixture user is `<annotator_ref>-pw`.
pub fn password(annotator_ref: &str) -> String {
    format!("{annotator_ref}-pw")
}

/// Three users and three documents. Only D1 is about accounting.
pub fn seeded_store(system_id: &str, clock: &ManualClock, timeout: Timestamp) -> Store {
    let c = clock.0.clone();
    let mut s = Store::in_memory(system_id)
        .with_clock(Arc::new(move || c.load(Ordering::SeqCst)))
        .with_config(StoreConfig {
            session_timeout: timeout,
        });
    for (r, role, area, country) in [
        ("u1", Role::Watcher, "health", "FR"),
        ("u2", Role::DecisionMaker, "finance", "FR"),
        ("u3", Role::Watcher, "finance", "DE"),
    ] {
        s.put_user(user(r, role, area, country)).unwrap();
        s.set_password(r, &password(r)).unwrap();
    }
    s.ingest_document(doc(
        "D1",
        "Accounting principles",
        "accounting principles for small firms",
        AVAILABLE,
    ))
    .unwrap();
    s.ingest_document(doc(
        "D2",
        "Economic intelligence",
        "market risk and economic watch",
        AVAILABLE,
    ))
    .unwrap();
    s.ingest_document(doc("D3", "Tax law", "tax policy in practice", AVAILABLE))
        .unwrap();
    s
}

pub struct Harness {
    pub app: Router,
    pub shared: SharedStore,
    pub clock: ManualClock,
}

impl Harness {
    pub fn new() -> Self {
        Self::with_timeout(3600)
    }

    pub fn with_timeout(timeout: Timestamp) -> Self {
        let clock = ManualClock::new(START);
        let shared = SharedStore::new(seeded_store("local", &clock, timeout));
        let app = router(
            AppState::new(shared.clone(), AnnotationWeight::default()),
            None,
        )
        .unwrap();
        Harness { app, shared, clock }
    }

    pub async fn call(
        &self,
        method: Method,
        uri: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        send(&self.app, req).await
    }

    pub async fn get(&self, uri: &str, token: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, Some(token), None).await
    }

    pub async fn post(&self, uri: &str, token: Option<&str>, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, token, Some(body)).await
    }

    /// Logs in and returns the bearer token.
    pub async fn login(&self, annotator_ref: &str) -> String {
        let (status, body) = self
            .post(
                "/login",
                None,
                json!({"annotator_ref": annotator_ref, "password": password(annotator_ref)}),
            )
            .await;
        assert_eq!(status, StatusCode::OK, "{body}");
        body["token"].as_str().unwrap().to_string()
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let response = app.clone().oneshot(req).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

/// Body of `POST /annotations` for a whole-document text note.
pub fn new_note(document_ref: &str, text: &str, visibility: Value) -> Value {
    json!({
        "anchor": AnnotationAnchor::whole_document(document_ref),
        "ann_type": AnnotationType::Text,
        "objective": AnnotationObjective::Classification,
        "body_text": text,
        "visibility": visibility,
    })
}

pub fn shared() -> Value {
    json!({"kind": "server_shared"})
}

pub fn private() -> Value {
    json!({"kind": "local_private"})
}

pub fn to_json<T: serde::Serialize + ?Sized>(v: &T) -> Value {
    serde_json::to_value(v).unwrap()
}
