//! Multi-rater annotation sessions and agreement per rater group.
//!
//! A session is the fold of its event log. Persisting the events is the
//! caller's job; [`AnnotationSession::prepare_rating`] validates a rating
//! without mutating so it can be written before it is applied.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, RawLabel};
use crate::metrics::{fleiss_kappa, MetricsError, RatingMatrix};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum RaterGroup {
    Expert,
    Amateur,
    #[default]
    Unspecified,
}

impl fmt::Display for RaterGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RaterGroup::Expert => "expert",
            RaterGroup::Amateur => "amateur",
            RaterGroup::Unspecified => "unspecified",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rater {
    pub id: String,
    #[serde(default)]
    pub group: RaterGroup,
}

/// One line of the session log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    RegisterRater {
        ts: String,
        rater: Rater,
    },
    AddItem {
        ts: String,
        item: Comment,
    },
    Rate {
        ts: String,
        rater: String,
        item: String,
        label: RawLabel,
        #[serde(default)]
        overwrite: bool,
    },
}

impl SessionEvent {
    pub fn ts(&self) -> &str {
        match self {
            SessionEvent::RegisterRater { ts, .. }
            | SessionEvent::AddItem { ts, .. }
            | SessionEvent::Rate { ts, .. } => ts,
        }
    }
}

/// A replaced rating, kept because annotations are evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub ts: String,
    pub rater: String,
    pub item: String,
    pub previous: RawLabel,
    pub replacement: RawLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotationError {
    #[error("unknown rater `{0}`")]
    UnknownRater(String),
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("rater `{rater}` already rated item `{item}`")]
    DuplicateRating { rater: String, item: String },
    #[error("rater `{0}` is already registered")]
    DuplicateRater(String),
    #[error("item `{0}` is already in the session")]
    DuplicateItem(String),
    #[error("invalid item: {0}")]
    InvalidItem(#[from] crate::corpus::CommentError),
    #[error("no item was rated by every rater")]
    NoFullyRatedItems,
    #[error("at least two raters are required")]
    TooFewRaters,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationSession {
    items: Vec<Comment>,
    item_index: BTreeMap<String, usize>,
    raters: Vec<Rater>,
    ratings: BTreeMap<(String, String), RawLabel>,
    audit: Vec<AuditEntry>,
    created_at: Option<String>,
}

/// What a rater should look at next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NextItem<'a> {
    Item(&'a Comment),
    Done,
}

/// Label scheme for rating matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryScheme {
    /// genuine / spam / scam
    Three,
    /// genuine / fraud
    Binary,
}

impl CategoryScheme {
    pub fn categories(self) -> usize {
        match self {
            CategoryScheme::Three => 3,
            CategoryScheme::Binary => 2,
        }
    }

    fn column(self, label: RawLabel) -> usize {
        match self {
            CategoryScheme::Three => label.index(),
            CategoryScheme::Binary => label.collapse() as usize,
        }
    }
}

/// Matrix over the items every selected rater labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingTable {
    pub matrix: RatingMatrix,
    pub item_ids: Vec<String>,
    /// Items some selected rater has not labeled.
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupAgreement {
    pub raters: usize,
    pub items_used: usize,
    pub items_excluded: usize,
    pub kappa_three_way: f64,
    pub kappa_binary: f64,
}

impl AnnotationSession {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replays a log from the start.
    pub fn replay<'a, I>(events: I) -> Result<Self, AnnotationError>
    where
        I: IntoIterator<Item = &'a SessionEvent>,
    {
        let mut session = Self::new();
        for e in events {
            session.apply(e)?;
        }
        Ok(session)
    }

    pub fn items(&self) -> &[Comment] {
        &self.items
    }

    pub fn raters(&self) -> &[Rater] {
        &self.raters
    }

    pub fn audit_trail(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn created_at(&self) -> Option<&str> {
        self.created_at.as_deref()
    }

    pub fn rating(&self, rater: &str, item: &str) -> Option<RawLabel> {
        self.ratings
            .get(&(String::from(rater), String::from(item)))
            .copied()
    }

    pub fn rating_count(&self) -> usize {
        self.ratings.len()
    }

    pub fn rater(&self, id: &str) -> Option<&Rater> {
        self.raters.iter().find(|r| r.id == id)
    }

    fn require_rater(&self, id: &str) -> Result<(), AnnotationError> {
        self.rater(id)
            .map(|_| ())
            .ok_or_else(|| AnnotationError::UnknownRater(id.into()))
    }

    /// Checks an event against the current state without applying it.
    pub fn check(&self, event: &SessionEvent) -> Result<(), AnnotationError> {
        match event {
            SessionEvent::RegisterRater { rater, .. } => {
                if self.rater(&rater.id).is_some() {
                    return Err(AnnotationError::DuplicateRater(rater.id.clone()));
                }
            }
            SessionEvent::AddItem { item, .. } => {
                item.validate()?;
                if self.item_index.contains_key(&item.id) {
                    return Err(AnnotationError::DuplicateItem(item.id.clone()));
                }
            }
            SessionEvent::Rate {
                rater,
                item,
                overwrite,
                ..
            } => {
                self.require_rater(rater)?;
                if !self.item_index.contains_key(item) {
                    return Err(AnnotationError::UnknownItem(item.clone()));
                }
                if !overwrite && self.rating(rater, item).is_some() {
                    return Err(AnnotationError::DuplicateRating {
                        rater: rater.clone(),
                        item: item.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), AnnotationError> {
        self.check(event)?;
        if self.created_at.is_none() {
            self.created_at = Some(event.ts().into());
        }
        match event {
            SessionEvent::RegisterRater { rater, .. } => self.raters.push(rater.clone()),
            SessionEvent::AddItem { item, .. } => {
                self.item_index.insert(item.id.clone(), self.items.len());
                self.items.push(item.clone());
            }
            SessionEvent::Rate {
                ts,
                rater,
                item,
                label,
                ..
            } => {
                let previous = self.ratings.insert((rater.clone(), item.clone()), *label);
                if let Some(previous) = previous {
                    self.audit.push(AuditEntry {
                        ts: ts.clone(),
                        rater: rater.clone(),
                        item: item.clone(),
                        previous,
                        replacement: *label,
                    });
                }
            }
        }
        Ok(())
    }

    /// Validated rating event, ready to be persisted and then applied.
    pub fn prepare_rating(
        &self,
        rater: &str,
        item: &str,
        label: RawLabel,
        overwrite: bool,
        ts: impl Into<String>,
    ) -> Result<SessionEvent, AnnotationError> {
        let event = SessionEvent::Rate {
            ts: ts.into(),
            rater: rater.into(),
            item: item.into(),
            label,
            overwrite,
        };
        self.check(&event)?;
        Ok(event)
    }

    pub fn record_rating(
        &mut self,
        rater: &str,
        item: &str,
        label: RawLabel,
        overwrite: bool,
        ts: impl Into<String>,
    ) -> Result<(), AnnotationError> {
        let event = self.prepare_rating(rater, item, label, overwrite, ts)?;
        self.apply(&event)
    }

    /// Lowest-indexed item the rater has not labeled yet.
    pub fn next_item(&self, rater: &str) -> Result<NextItem<'_>, AnnotationError> {
        self.require_rater(rater)?;
        Ok(self
            .items
            .iter()
            .find(|c| self.rating(rater, &c.id).is_none())
            .map_or(NextItem::Done, NextItem::Item))
    }

    /// Rating matrix over the items labeled by every rater in `raters`.
    pub fn rating_table_for(
        &self,
        raters: &[&Rater],
        scheme: CategoryScheme,
    ) -> Result<RatingTable, AnnotationError> {
        if raters.len() < 2 {
            return Err(AnnotationError::TooFewRaters);
        }
        let mut rows = Vec::new();
        let mut item_ids = Vec::new();
        let mut excluded = Vec::new();
        for item in &self.items {
            let labels: Option<Vec<RawLabel>> = raters
                .iter()
                .map(|r| self.rating(&r.id, &item.id))
                .collect();
            match labels {
                Some(labels) => {
                    let mut row = alloc::vec![0u32; scheme.categories()];
                    for l in labels {
                        row[scheme.column(l)] += 1;
                    }
                    rows.push(row);
                    item_ids.push(item.id.clone());
                }
                None => excluded.push(item.id.clone()),
            }
        }
        if rows.is_empty() {
            return Err(AnnotationError::NoFullyRatedItems);
        }
        Ok(RatingTable {
            matrix: RatingMatrix::new(rows)?,
            item_ids,
            excluded,
        })
    }

    /// Rating matrix across all registered raters.
    pub fn build_rating_matrix(
        &self,
        scheme: CategoryScheme,
    ) -> Result<RatingTable, AnnotationError> {
        let raters: Vec<&Rater> = self.raters.iter().collect();
        self.rating_table_for(&raters, scheme)
    }

    /// Fleiss kappa (three-way and binary) per rater group present.
    pub fn agreement_by_group(
        &self,
    ) -> BTreeMap<RaterGroup, Result<GroupAgreement, AnnotationError>> {
        let mut groups: BTreeMap<RaterGroup, Vec<&Rater>> = BTreeMap::new();
        for r in &self.raters {
            groups.entry(r.group).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|(group, raters)| {
                let result = (|| {
                    let three = self.rating_table_for(&raters, CategoryScheme::Three)?;
                    let binary = self.rating_table_for(&raters, CategoryScheme::Binary)?;
                    Ok(GroupAgreement {
                        raters: raters.len(),
                        items_used: three.item_ids.len(),
                        items_excluded: three.excluded.len(),
                        kappa_three_way: fleiss_kappa(&three.matrix)?,
                        kappa_binary: fleiss_kappa(&binary.matrix)?,
                    })
                })();
                (group, result)
            })
            .collect()
    }
}
