//! Comment records and the label taxonomy.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Three-way annotation label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawLabel {
    Genuine,
    Spam,
    Scam,
}

impl RawLabel {
    pub const ALL: [RawLabel; 3] = [RawLabel::Genuine, RawLabel::Spam, RawLabel::Scam];

    pub fn as_str(self) -> &'static str {
        match self {
            RawLabel::Genuine => "genuine",
            RawLabel::Spam => "spam",
            RawLabel::Scam => "scam",
        }
    }

    /// Collapses spam and scam into the fraud class.
    pub fn collapse(self) -> BinaryLabel {
        match self {
            RawLabel::Genuine => BinaryLabel::Genuine,
            RawLabel::Spam | RawLabel::Scam => BinaryLabel::Fraud,
        }
    }

    /// Column position in a three-way rating matrix.
    pub fn index(self) -> usize {
        match self {
            RawLabel::Genuine => 0,
            RawLabel::Spam => 1,
            RawLabel::Scam => 2,
        }
    }
}

/// Free-function form of [`RawLabel::collapse`].
pub fn collapse_label(raw: RawLabel) -> BinaryLabel {
    raw.collapse()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for RawLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "genuine" => Ok(RawLabel::Genuine),
            "spam" => Ok(RawLabel::Spam),
            "scam" => Ok(RawLabel::Scam),
            other => Err(UnknownLabel(other.into())),
        }
    }
}

impl fmt::Display for RawLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary moderation label. Fraud (spam or scam) is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Genuine = 0,
    Fraud = 1,
}

impl BinaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Genuine => "genuine",
            BinaryLabel::Fraud => "fraud",
        }
    }

    pub fn is_fraud(self) -> bool {
        self == BinaryLabel::Fraud
    }

    /// 1.0 for fraud, 0.0 for genuine.
    pub fn as_f64(self) -> f64 {
        match self {
            BinaryLabel::Genuine => 0.0,
            BinaryLabel::Fraud => 1.0,
        }
    }
}

impl FromStr for BinaryLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "genuine" => Ok(BinaryLabel::Genuine),
            "fraud" => Ok(BinaryLabel::Fraud),
            other => Err(UnknownLabel(other.into())),
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A social-media comment as ingested. Text is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommentError {
    #[error("comment id is empty")]
    EmptyId,
    #[error("comment text is empty")]
    EmptyText,
}

impl Comment {
    /// Builds a comment, enforcing a non-empty id and non-blank text.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, CommentError> {
        let comment = Comment {
            id: id.into(),
            post_id: None,
            author: None,
            text: text.into(),
            created_at: None,
        };
        comment.validate()?;
        Ok(comment)
    }

    pub fn with_post(mut self, post_id: impl Into<String>) -> Self {
        self.post_id = Some(post_id.into());
        self
    }

    pub fn validate(&self) -> Result<(), CommentError> {
        if self.id.is_empty() {
            return Err(CommentError::EmptyId);
        }
        if self.text.trim().is_empty() {
            return Err(CommentError::EmptyText);
        }
        Ok(())
    }
}

/// A comment with its three-way label. The binary label is always derived
/// from the raw one, so the two can never disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledComment {
    pub comment: Comment,
    raw: RawLabel,
}

impl LabeledComment {
    pub fn new(comment: Comment, raw: RawLabel) -> Self {
        LabeledComment { comment, raw }
    }

    pub fn raw(&self) -> RawLabel {
        self.raw
    }

    pub fn binary(&self) -> BinaryLabel {
        self.raw.collapse()
    }

    pub fn text(&self) -> &str {
        &self.comment.text
    }
}
