//! Sessions and responses, persisted as two append-only JSONL logs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bank::{Question, QuestionBank, Task};
use crate::error::ServiceError;

pub const RESPONSE_LOG: &str = "responses.jsonl";
pub const SESSION_LOG: &str = "sessions.jsonl";

/// What to do when a rater opens a second session for the same task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPolicy {
    /// Close the old session; its answers no longer count.
    Replace,
    #[default]
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub rater_id: String,
    pub task: Task,
    pub created_at: DateTime<Utc>,
    /// Set when a later session replaced this one.
    #[serde(default)]
    pub replaced_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub session_id: String,
    pub rater_id: String,
    pub question_id: String,
    pub task: Task,
    /// 1..5 for direct ratings; +1 (first item) or -1 (second) otherwise.
    pub choice: i64,
    pub elapsed_ms: u64,
    pub received_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum SessionEvent {
    Opened(Session),
    Replaced { session_id: String, replaced_by: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct NewResponse {
    pub session_id: String,
    pub question_id: String,
    pub choice: i64,
    pub elapsed_ms: u64,
}

struct Log {
    path: PathBuf,
    file: Option<File>,
}

impl Log {
    fn open(path: Option<PathBuf>) -> Result<Self, ServiceError> {
        let file = match &path {
            Some(p) => Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| ServiceError::Io(format!("{}: {e}", p.display())))?,
            ),
            None => None,
        };
        Ok(Log {
            path: path.unwrap_or_default(),
            file,
        })
    }

    /// Appends one line and syncs it to disk before returning.
    fn append<T: Serialize>(&mut self, value: &T) -> Result<(), ServiceError> {
        let Some(f) = self.file.as_mut() else { return Ok(()) };
        let mut line = serde_json::to_vec(value).map_err(|e| ServiceError::Io(e.to_string()))?;
        line.push(b'\n');
        let io = |e: std::io::Error| ServiceError::Io(format!("{}: {e}", self.path.display()));
        f.write_all(&line).map_err(io)?;
        f.sync_data().map_err(io)
    }
}

fn read_log<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ServiceError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ServiceError::Io(format!("{}: {e}", path.display()))),
    };
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ServiceError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ServiceError::CorruptLog {
            line: k + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// In-memory state plus its logs. Callers serialize access.
pub struct Store {
    banks: BTreeMap<Task, QuestionBank>,
    questions: HashMap<String, (Task, usize)>,
    policy: SessionPolicy,
    sessions: BTreeMap<String, Session>,
    active: HashMap<(String, Task), String>,
    records: Vec<AnnotationRecord>,
    answered: HashSet<(String, String)>,
    session_log: Log,
    response_log: Log,
}

impl Store {
    /// Opens the store, replaying any logs under `data_dir`. With no
    /// directory the store lives in memory only.
    pub fn open(
        banks: Vec<QuestionBank>,
        policy: SessionPolicy,
        data_dir: Option<&Path>,
    ) -> Result<Self, ServiceError> {
        let mut by_task = BTreeMap::new();
        let mut questions = HashMap::new();
        for bank in banks {
            bank.validate()?;
            for (k, q) in bank.questions.iter().enumerate() {
                if questions.insert(q.question_id.clone(), (bank.task, k)).is_some() {
                    return Err(ServiceError::InvalidBank(format!(
                        "duplicate question id {}",
                        q.question_id
                    )));
                }
            }
            if by_task.insert(bank.task, bank).is_some() {
                return Err(ServiceError::InvalidBank("two banks for one task".into()));
            }
        }
        if let Some(d) = data_dir {
            std::fs::create_dir_all(d).map_err(|e| ServiceError::Io(format!("{}: {e}", d.display())))?;
        }
        let (session_events, records): (Vec<SessionEvent>, Vec<AnnotationRecord>) = match data_dir {
            Some(d) => (read_log(&d.join(SESSION_LOG))?, read_log(&d.join(RESPONSE_LOG))?),
            None => (Vec::new(), Vec::new()),
        };
        let mut store = Store {
            banks: by_task,
            questions,
            policy,
            sessions: BTreeMap::new(),
            active: HashMap::new(),
            records: Vec::new(),
            answered: HashSet::new(),
            session_log: Log::open(data_dir.map(|d| d.join(SESSION_LOG)))?,
            response_log: Log::open(data_dir.map(|d| d.join(RESPONSE_LOG)))?,
        };
        for ev in session_events {
            store.apply_session_event(ev);
        }
        for r in records {
            store.apply_record(r);
        }
        Ok(store)
    }

    fn apply_session_event(&mut self, ev: SessionEvent) {
        match ev {
            SessionEvent::Opened(s) => {
                self.active.insert((s.rater_id.clone(), s.task), s.session_id.clone());
                self.sessions.insert(s.session_id.clone(), s);
            }
            SessionEvent::Replaced {
                session_id,
                replaced_by,
            } => {
                if let Some(s) = self.sessions.get_mut(&session_id) {
                    s.replaced_by = Some(replaced_by);
                }
            }
        }
    }

    fn apply_record(&mut self, r: AnnotationRecord) {
        self.answered.insert((r.session_id.clone(), r.question_id.clone()));
        self.records.push(r);
    }

    pub fn banks(&self) -> impl Iterator<Item = &QuestionBank> {
        self.banks.values()
    }

    pub fn bank(&self, task: Task) -> Option<&QuestionBank> {
        self.banks.get(&task)
    }

    pub fn question(&self, id: &str) -> Result<&Question, ServiceError> {
        let (task, k) = self
            .questions
            .get(id)
            .ok_or_else(|| ServiceError::UnknownQuestion(id.to_string()))?;
        Ok(&self.banks[task].questions[*k])
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    /// Records from sessions that have not been replaced.
    pub fn live_records(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.records.iter().filter(|r| {
            self.sessions
                .get(&r.session_id)
                .is_some_and(|s| s.replaced_by.is_none())
        })
    }

    pub fn create_session(&mut self, rater_id: &str, task: Task, now: DateTime<Utc>) -> Result<Session, ServiceError> {
        if rater_id.trim().is_empty() {
            return Err(ServiceError::BadRequest("rater_id must not be empty".into()));
        }
        let bank = self
            .banks
            .get(&task)
            .ok_or_else(|| ServiceError::EmptyBank(task.to_string()))?;
        if bank.questions.is_empty() {
            return Err(ServiceError::EmptyBank(task.to_string()));
        }
        let key = (rater_id.to_string(), task);
        let previous = self.active.get(&key).cloned();
        if previous.is_some() && self.policy == SessionPolicy::Reject {
            return Err(ServiceError::SessionExists {
                rater_id: rater_id.to_string(),
                task: task.to_string(),
            });
        }
        let session = Session {
            session_id: format!("sess-{:06}", self.sessions.len() + 1),
            rater_id: rater_id.to_string(),
            task,
            created_at: now,
            replaced_by: None,
        };
        let opened = SessionEvent::Opened(session.clone());
        self.session_log.append(&opened)?;
        self.apply_session_event(opened);
        if let Some(old) = previous {
            let ev = SessionEvent::Replaced {
                session_id: old,
                replaced_by: session.session_id.clone(),
            };
            self.session_log.append(&ev)?;
            self.apply_session_event(ev);
        }
        Ok(session)
    }

    pub fn question_ids(&self, task: Task) -> Vec<String> {
        self.banks
            .get(&task)
            .map(|b| b.questions.iter().map(|q| q.question_id.clone()).collect())
            .unwrap_or_default()
    }

    /// Validates and durably records one answer.
    pub fn submit(&mut self, r: NewResponse, now: DateTime<Utc>) -> Result<AnnotationRecord, ServiceError> {
        let session = self
            .sessions
            .get(&r.session_id)
            .ok_or_else(|| ServiceError::UnknownSession(r.session_id.clone()))?;
        if session.replaced_by.is_some() {
            return Err(ServiceError::ClosedSession(r.session_id));
        }
        let question = self.question(&r.question_id)?;
        if question.task != session.task {
            return Err(ServiceError::NotInSession {
                session_id: r.session_id,
                question_id: r.question_id,
            });
        }
        if !session.task.accepts(r.choice) {
            return Err(ServiceError::Domain {
                choice: r.choice,
                task: session.task.to_string(),
            });
        }
        if self.answered.contains(&(r.session_id.clone(), r.question_id.clone())) {
            return Err(ServiceError::Duplicate {
                session_id: r.session_id,
                question_id: r.question_id,
            });
        }
        let record = AnnotationRecord {
            rater_id: session.rater_id.clone(),
            task: session.task,
            session_id: r.session_id,
            question_id: r.question_id,
            choice: r.choice,
            elapsed_ms: r.elapsed_ms,
            received_at: now,
        };
        self.response_log.append(&record)?;
        self.apply_record(record.clone());
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::ALL_TASKS;

    fn banks() -> Vec<QuestionBank> {
        ALL_TASKS.into_iter().map(QuestionBank::study).collect()
    }

    fn answer(session: &str, q: &str, choice: i64) -> NewResponse {
        NewResponse {
            session_id: session.into(),
            question_id: q.into(),
            choice,
            elapsed_ms: 1500,
        }
    }

    #[test]
    fn domain_and_duplicates() {
        let mut s = Store::open(banks(), SessionPolicy::Reject, None).unwrap();
        let t1 = s.create_session("R1", Task::DirectRating, Utc::now()).unwrap();
        s.submit(answer(&t1.session_id, "task1-Q1", 5), Utc::now()).unwrap();
        assert!(matches!(
            s.submit(answer(&t1.session_id, "task1-Q1", 4), Utc::now()),
            Err(ServiceError::Duplicate { .. })
        ));
        assert!(matches!(
            s.submit(answer(&t1.session_id, "task1-Q2", 6), Utc::now()),
            Err(ServiceError::Domain { .. })
        ));
        assert!(matches!(
            s.submit(answer(&t1.session_id, "task2-Q1", 1), Utc::now()),
            Err(ServiceError::NotInSession { .. })
        ));
        let t2 = s.create_session("R1", Task::CrossImagePair, Utc::now()).unwrap();
        assert!(matches!(
            s.submit(answer(&t2.session_id, "task2-Q1", 0), Utc::now()),
            Err(ServiceError::Domain { .. })
        ));
        assert!(matches!(
            s.submit(answer("nope", "task2-Q1", 1), Utc::now()),
            Err(ServiceError::UnknownSession(_))
        ));
    }

    #[test]
    fn session_policies() {
        let mut s = Store::open(banks(), SessionPolicy::Reject, None).unwrap();
        s.create_session("R1", Task::SameImagePair, Utc::now()).unwrap();
        assert!(matches!(
            s.create_session("R1", Task::SameImagePair, Utc::now()),
            Err(ServiceError::SessionExists { .. })
        ));

        let mut s = Store::open(banks(), SessionPolicy::Replace, None).unwrap();
        let a = s.create_session("R1", Task::SameImagePair, Utc::now()).unwrap();
        s.submit(answer(&a.session_id, "task3-Q1", 1), Utc::now()).unwrap();
        let b = s.create_session("R1", Task::SameImagePair, Utc::now()).unwrap();
        assert_ne!(a.session_id, b.session_id);
        assert!(matches!(
            s.submit(answer(&a.session_id, "task3-Q2", 1), Utc::now()),
            Err(ServiceError::ClosedSession(_))
        ));
        s.submit(answer(&b.session_id, "task3-Q1", -1), Utc::now()).unwrap();
        assert_eq!(s.live_records().count(), 1);
        assert_eq!(s.records().len(), 2);
    }

    #[test]
    fn replay_reconstructs_state() {
        let dir = tempfile::tempdir().unwrap();
        let (sessions, records) = {
            let mut s = Store::open(banks(), SessionPolicy::Replace, Some(dir.path())).unwrap();
            let a = s.create_session("R1", Task::DirectRating, Utc::now()).unwrap();
            s.submit(answer(&a.session_id, "task1-Q1", 3), Utc::now()).unwrap();
            let b = s.create_session("R1", Task::DirectRating, Utc::now()).unwrap();
            s.submit(answer(&b.session_id, "task1-Q1", 2), Utc::now()).unwrap();
            (s.sessions().cloned().collect::<Vec<_>>(), s.records().to_vec())
        };
        let mut s = Store::open(banks(), SessionPolicy::Replace, Some(dir.path())).unwrap();
        assert_eq!(s.sessions().cloned().collect::<Vec<_>>(), sessions);
        assert_eq!(s.records(), &records[..]);
        let again = s.submit(answer("sess-000002", "task1-Q1", 2), Utc::now());
        assert!(matches!(again, Err(ServiceError::Duplicate { .. })));
        let c = s.create_session("R2", Task::DirectRating, Utc::now()).unwrap();
        assert_eq!(c.session_id, "sess-000003");
    }

    #[test]
    fn corrupt_log_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(RESPONSE_LOG), "\n{not json}\n").unwrap();
        let err = Store::open(banks(), SessionPolicy::Reject, Some(dir.path()))
            .err()
            .unwrap();
        assert!(matches!(err, ServiceError::CorruptLog { line: 2, .. }));
    }
}
