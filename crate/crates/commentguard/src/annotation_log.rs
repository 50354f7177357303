//! Append-only JSONL persistence for annotation sessions. Every event is
//! written and synced before it is applied, so a crash loses at most the
//! rating in flight.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use commentguard_core::annotation::{AnnotationError, AnnotationSession, Rater, SessionEvent};
use commentguard_core::{Comment, RawLabel};

#[derive(Debug, thiserror::Error)]
pub enum SessionLogError {
    #[error("session log io: {0}")]
    Io(#[from] io::Error),
    #[error("session log line {line} is not a valid event: {message}")]
    Malformed { line: usize, message: String },
    #[error("session log line {line}: {source}")]
    Replay {
        line: usize,
        source: AnnotationError,
    },
    #[error(transparent)]
    Rejected(#[from] AnnotationError),
}

pub struct SessionLog {
    path: PathBuf,
    file: File,
    session: AnnotationSession,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Parses and replays a log without opening it for writing.
pub fn read_session(path: &Path) -> Result<AnnotationSession, SessionLogError> {
    let mut session = AnnotationSession::new();
    let reader = match File::open(path) {
        Ok(f) => BufReader::new(f),
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(session),
        Err(e) => return Err(e.into()),
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: SessionEvent =
            serde_json::from_str(&line).map_err(|e| SessionLogError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
        session
            .apply(&event)
            .map_err(|source| SessionLogError::Replay {
                line: i + 1,
                source,
            })?;
    }
    Ok(session)
}

impl SessionLog {
    /// Opens (creating if needed) and replays the log at `path`.
    pub fn open(path: &Path) -> Result<Self, SessionLogError> {
        let session = read_session(path)?;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(SessionLog {
            path: path.to_path_buf(),
            file,
            session,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn session(&self) -> &AnnotationSession {
        &self.session
    }

    /// Validates, persists, then applies one event.
    pub fn append(&mut self, event: SessionEvent) -> Result<(), SessionLogError> {
        self.session.check(&event)?;
        let mut line = serde_json::to_string(&event).expect("session events serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.session.apply(&event)?;
        Ok(())
    }

    pub fn register_rater(&mut self, rater: Rater) -> Result<(), SessionLogError> {
        self.append(SessionEvent::RegisterRater { ts: now(), rater })
    }

    pub fn add_item(&mut self, item: Comment) -> Result<(), SessionLogError> {
        self.append(SessionEvent::AddItem { ts: now(), item })
    }

    pub fn rate(
        &mut self,
        rater: &str,
        item: &str,
        label: RawLabel,
        overwrite: bool,
    ) -> Result<(), SessionLogError> {
        let event = self
            .session
            .prepare_rating(rater, item, label, overwrite, now())?;
        self.append(event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use commentguard_core::annotation::RaterGroup;

    #[test]
    fn reload_reconstructs_session() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut log = SessionLog::open(&path).unwrap();
        log.register_rater(Rater {
            id: "a".into(),
            group: RaterGroup::Expert,
        })
        .unwrap();
        log.add_item(Comment::new("c1", "hello").unwrap()).unwrap();
        log.rate("a", "c1", RawLabel::Spam, false).unwrap();
        assert!(matches!(
            log.rate("a", "c1", RawLabel::Scam, false),
            Err(SessionLogError::Rejected(
                AnnotationError::DuplicateRating { .. }
            ))
        ));
        log.rate("a", "c1", RawLabel::Genuine, true).unwrap();
        let before = log.session().clone();
        drop(log);
        let again = SessionLog::open(&path).unwrap();
        assert_eq!(again.session(), &before);
        assert_eq!(again.session().audit_trail().len(), 1);
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
    }
}
