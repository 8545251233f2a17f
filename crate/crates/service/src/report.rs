//! Study report: timing and agreement over the recorded answers.

use std::collections::BTreeMap;

use capcomp_core::metrics::{agreement_matrix, AgreementTable, RaterMatrix, TaskKind};
use serde::{Deserialize, Serialize};

use crate::bank::{Task, ALL_TASKS};
use crate::error::ServiceError;
use crate::store::{AnnotationRecord, Store};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterTiming {
    pub rater_id: String,
    /// Mean seconds per answered question, per task.
    pub mean_seconds: BTreeMap<Task, f64>,
    pub answered: BTreeMap<Task, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub raters: Vec<RaterTiming>,
    /// Mean over raters of their per-task means.
    pub grand_means: BTreeMap<Task, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: Task,
    pub questions: usize,
    pub raters: Vec<String>,
    /// Raters who answered every question; only they enter the agreement.
    pub complete_raters: Vec<String>,
    pub complete: bool,
    /// Present once at least two raters completed the task.
    pub agreement: Option<AgreementTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub timing: TimingSummary,
    pub tasks: Vec<TaskReport>,
}

fn rater_order<'a>(records: impl Iterator<Item = &'a AnnotationRecord>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in records {
        if !out.contains(&r.rater_id) {
            out.push(r.rater_id.clone());
        }
    }
    out
}

fn timing(records: &[&AnnotationRecord]) -> TimingSummary {
    let mut raters = Vec::new();
    for rater in rater_order(records.iter().copied()) {
        let mut sums: BTreeMap<Task, (u64, usize)> = BTreeMap::new();
        for r in records.iter().filter(|r| r.rater_id == rater) {
            let e = sums.entry(r.task).or_default();
            e.0 += r.elapsed_ms;
            e.1 += 1;
        }
        raters.push(RaterTiming {
            rater_id: rater,
            mean_seconds: sums
                .iter()
                .map(|(t, (ms, n))| (*t, *ms as f64 / 1000.0 / *n as f64))
                .collect(),
            answered: sums.iter().map(|(t, (_, n))| (*t, *n)).collect(),
        });
    }
    let grand_means = ALL_TASKS
        .into_iter()
        .filter_map(|t| {
            let means: Vec<f64> = raters.iter().filter_map(|r| r.mean_seconds.get(&t).copied()).collect();
            (!means.is_empty()).then(|| (t, means.iter().sum::<f64>() / means.len() as f64))
        })
        .collect();
    TimingSummary { raters, grand_means }
}

/// Rater matrix of one task over the raters who answered every question.
pub fn task_matrix(store: &Store, task: Task) -> Option<RaterMatrix> {
    let bank = store.bank(task)?;
    let records: Vec<&AnnotationRecord> = store.live_records().filter(|r| r.task == task).collect();
    let complete = complete_raters(&records, bank.questions.len());
    if complete.is_empty() {
        return None;
    }
    let values = bank
        .questions
        .iter()
        .map(|q| {
            complete
                .iter()
                .map(|rater| {
                    let r = records
                        .iter()
                        .find(|r| &r.rater_id == rater && r.question_id == q.question_id)
                        .expect("complete rater answered every question");
                    r.choice as f64
                })
                .collect()
        })
        .collect();
    let kind = match task {
        Task::DirectRating => TaskKind::Rating,
        _ => TaskKind::Comparison,
    };
    RaterMatrix::new(
        kind,
        bank.questions.iter().map(|q| q.question_id.clone()).collect(),
        complete,
        values,
        bank.questions.iter().map(|q| q.truth_value()).collect(),
    )
    .ok()
}

fn complete_raters(records: &[&AnnotationRecord], questions: usize) -> Vec<String> {
    rater_order(records.iter().copied())
        .into_iter()
        .filter(|rater| records.iter().filter(|r| &r.rater_id == rater).count() == questions)
        .collect()
}

/// Timing plus, per task, the agreement tables computed by the metrics
/// module over complete raters.
pub fn compute_study_report(store: &Store) -> Result<StudyReport, ServiceError> {
    let live: Vec<&AnnotationRecord> = store.live_records().collect();
    if live.is_empty() {
        return Err(ServiceError::EmptyStore);
    }
    let mut tasks = Vec::new();
    for bank in store.banks() {
        let records: Vec<&AnnotationRecord> = live.iter().copied().filter(|r| r.task == bank.task).collect();
        if records.is_empty() {
            continue;
        }
        let raters = rater_order(records.iter().copied());
        let complete_raters = complete_raters(&records, bank.questions.len());
        let agreement = if complete_raters.len() >= 2 {
            let m = task_matrix(store, bank.task).expect("complete raters exist");
            Some(agreement_matrix(&m)?)
        } else {
            None
        };
        tasks.push(TaskReport {
            task: bank.task,
            questions: bank.questions.len(),
            complete: complete_raters.len() == raters.len(),
            raters,
            complete_raters,
            agreement,
        });
    }
    Ok(StudyReport {
        timing: timing(&live),
        tasks,
    })
}
