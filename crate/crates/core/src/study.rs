//! Response tables from the three-task human study, bundled as CSV.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RaterMatrix;

pub const TASK1_CSV: &str = include_str!("../data/study/task1.csv");
pub const TASK2_CSV: &str = include_str!("../data/study/task2.csv");
pub const TASK3_CSV: &str = include_str!("../data/study/task3.csv");
pub const TIMING_CSV: &str = include_str!("../data/study/timing.csv");

/// Task 1: direct 1..5 ratings. Tasks 2 and 3: pairwise preferences across
/// and within images.
pub fn task(n: u8) -> Result<RaterMatrix> {
    let text = match n {
        1 => TASK1_CSV,
        2 => TASK2_CSV,
        3 => TASK3_CSV,
        _ => return Err(Error::InvalidConfig(format!("no study task {n}"))),
    };
    RaterMatrix::from_csv_str(text)
}

/// Mean seconds per question, one row per rater.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub raters: Vec<String>,
    pub tasks: Vec<String>,
    /// `seconds[r][t]`.
    pub seconds: Vec<Vec<f64>>,
}

impl TimingTable {
    pub fn task_means(&self) -> Vec<f64> {
        let n = self.raters.len() as f64;
        (0..self.tasks.len())
            .map(|t| self.seconds.iter().map(|row| row[t]).sum::<f64>() / n)
            .collect()
    }
}

pub fn timing() -> Result<TimingTable> {
    let mut reader = csv::Reader::from_reader(TIMING_CSV.as_bytes());
    let tasks = reader
        .headers()
        .map_err(|e| Error::MalformedLine {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let (mut raters, mut seconds) = (Vec::new(), Vec::new());
    for (k, rec) in reader.records().enumerate() {
        let bad = |m: String| Error::MalformedLine {
            line: k + 2,
            message: m,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        raters.push(rec[0].to_string());
        seconds.push(
            rec.iter()
                .skip(1)
                .map(|s| s.parse::<f64>().map_err(|e| bad(e.to_string())))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(TimingTable { raters, tasks, seconds })
}
