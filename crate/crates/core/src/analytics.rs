//! Decisional analyses over stored annotations: counts by user group and
//! time bucket, and co-annotation relationship graphs. Computed on demand
//! over the annotations the requesting user may read.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{AnnotationRecord, Timestamp};
use crate::store::{AnnotationFilter, Store};

/// Label for annotations whose maker has no local profile (federated in).
pub const EXTERNAL_GROUP: &str = "external";
const UNSPECIFIED: &str = "unspecified";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    ByRole,
    ByActivityArea,
    ByCountry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Day,
    Week,
    Month,
}

impl Bucket {
    /// Start of the bucket containing `ts`: UTC midnight, the Monday of the
    /// ISO week, or the first of the month.
    pub fn start_of(self, ts: Timestamp) -> Timestamp {
        let Some(dt) = DateTime::<Utc>::from_timestamp(ts, 0) else {
            return ts;
        };
        let date = dt.date_naive();
        let start = match self {
            Bucket::Day => date,
            Bucket::Week => {
                date - chrono::Days::new(u64::from(date.weekday().num_days_from_monday()))
            }
            Bucket::Month => NaiveDate::from_ymd_opt(date.year(), date.month(), 1).unwrap_or(date),
        };
        start
            .and_hms_opt(0, 0, 0)
            .map_or(ts, |d| d.and_utc().timestamp())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTimeCell {
    pub group: String,
    pub bucket_start: Timestamp,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupTimeMatrix {
    pub grouping: Grouping,
    pub bucket: Bucket,
    /// Non-zero cells ordered by group, then bucket start.
    pub cells: Vec<GroupTimeCell>,
}

impl GroupTimeMatrix {
    pub fn total(&self) -> u64 {
        self.cells.iter().map(|c| c.count).sum()
    }

    pub fn get(&self, group: &str, bucket_start: Timestamp) -> u64 {
        self.cells
            .iter()
            .find(|c| c.group == group && c.bucket_start == bucket_start)
            .map_or(0, |c| c.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    DocDoc,
    UserUser,
    UserDoc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub kind: RelationKind,
    pub a_ref: String,
    pub b_ref: String,
    pub weight: u64,
}

fn non_empty(s: &str) -> String {
    if s.is_empty() {
        UNSPECIFIED.to_string()
    } else {
        s.to_string()
    }
}

/// Weight of each unordered pair drawn from every set.
fn pair_counts<'a>(
    sets: impl Iterator<Item = &'a BTreeSet<&'a str>>,
) -> BTreeMap<(String, String), u64> {
    let mut out = BTreeMap::new();
    for set in sets {
        let items: Vec<&str> = set.iter().copied().collect();
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                *out.entry((a.to_string(), b.to_string())).or_default() += 1;
            }
        }
    }
    out
}

impl Store {
    fn group_label(&self, a: &AnnotationRecord, grouping: Grouping) -> String {
        match self.state().user(&a.annotator_ref) {
            None => EXTERNAL_GROUP.to_string(),
            Some(u) => match grouping {
                Grouping::ByRole => u.role.as_str().to_string(),
                Grouping::ByActivityArea => non_empty(&u.activity_area),
                Grouping::ByCountry => non_empty(&u.country),
            },
        }
    }

    /// Counts the readable annotations matching `scope` per (group, bucket).
    pub fn group_time_counts(
        &self,
        grouping: Grouping,
        bucket: Bucket,
        scope: &AnnotationFilter,
        as_user: &str,
    ) -> Result<GroupTimeMatrix> {
        let annotations = self.query_annotations(scope, as_user)?;
        let mut cells: BTreeMap<(String, Timestamp), u64> = BTreeMap::new();
        for a in &annotations {
            let key = (self.group_label(a, grouping), bucket.start_of(a.created_at));
            *cells.entry(key).or_default() += 1;
        }
        Ok(GroupTimeMatrix {
            grouping,
            bucket,
            cells: cells
                .into_iter()
                .map(|((group, bucket_start), count)| GroupTimeCell {
                    group,
                    bucket_start,
                    count,
                })
                .collect(),
        })
    }

    /// Relationship edges over the annotations `as_user` may read, sorted by
    /// weight descending, then `(a_ref, b_ref)`.
    pub fn relationship_graph(&self, kind: RelationKind, as_user: &str) -> Vec<RelationEdge> {
        let visible = self.visible_annotations(&AnnotationFilter::default(), Some(as_user));
        let weights: BTreeMap<(String, String), u64> = match kind {
            RelationKind::UserDoc => {
                let mut m = BTreeMap::new();
                for a in &visible {
                    *m.entry((a.annotator_ref.clone(), a.anchor.document_ref.clone()))
                        .or_default() += 1;
                }
                m
            }
            RelationKind::DocDoc => {
                let mut docs_by_user: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
                for a in &visible {
                    docs_by_user
                        .entry(&a.annotator_ref)
                        .or_default()
                        .insert(&a.anchor.document_ref);
                }
                pair_counts(docs_by_user.values())
            }
            RelationKind::UserUser => {
                let mut users_by_doc: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
                for a in &visible {
                    users_by_doc
                        .entry(&a.anchor.document_ref)
                        .or_default()
                        .insert(&a.annotator_ref);
                }
                pair_counts(users_by_doc.values())
            }
        };
        let mut edges: Vec<RelationEdge> = weights
            .into_iter()
            .map(|((a_ref, b_ref), weight)| RelationEdge {
                kind,
                a_ref,
                b_ref,
                weight,
            })
            .collect();
        edges.sort_by(|x, y| {
            y.weight
                .cmp(&x.weight)
                .then_with(|| x.a_ref.cmp(&y.a_ref))
                .then_with(|| x.b_ref.cmp(&y.b_ref))
        });
        edges
    }
}
