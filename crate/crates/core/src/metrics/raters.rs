use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::agreement::{agreement, majority_label, AgreementReport};
use super::correlation::{mae, pearson, spearman};
use crate::error::{Error, Result};
use crate::label::Label;

/// Participant name used for the ground-truth column.
pub const TRUTH: &str = "truth";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Each rater gives a 1..5 score per question.
    Rating,
    /// Each rater gives a +1/-1 preference per question.
    Comparison,
}

/// Questions x raters table of human responses plus the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterMatrix {
    pub kind: TaskKind,
    pub questions: Vec<String>,
    pub raters: Vec<String>,
    /// `values[q][r]`.
    pub values: Vec<Vec<f64>>,
    /// A rating per question, or the +1/-1 label for comparison tasks.
    pub ground_truth: Vec<f64>,
}

impl RaterMatrix {
    pub fn new(
        kind: TaskKind,
        questions: Vec<String>,
        raters: Vec<String>,
        values: Vec<Vec<f64>>,
        ground_truth: Vec<f64>,
    ) -> Result<Self> {
        if questions.is_empty() {
            return Err(Error::EmptyInput("question list"));
        }
        if raters.is_empty() {
            return Err(Error::EmptyInput("rater list"));
        }
        if values.len() != questions.len() {
            return Err(Error::LengthMismatch {
                left: questions.len(),
                right: values.len(),
            });
        }
        if ground_truth.len() != questions.len() {
            return Err(Error::LengthMismatch {
                left: questions.len(),
                right: ground_truth.len(),
            });
        }
        for (q, row) in values.iter().enumerate() {
            if row.len() != raters.len() {
                return Err(Error::DegenerateMatrix(format!(
                    "question `{}` has {} responses for {} raters",
                    questions[q],
                    row.len(),
                    raters.len()
                )));
            }
        }
        let cells = values.iter().flatten().chain(&ground_truth);
        for &v in cells {
            let ok = match kind {
                TaskKind::Rating => v.is_finite(),
                TaskKind::Comparison => v == 1.0 || v == -1.0,
            };
            if !ok {
                return Err(Error::DegenerateMatrix(format!("invalid {kind:?} response {v}")));
            }
        }
        Ok(RaterMatrix {
            kind,
            questions,
            raters,
            values,
            ground_truth,
        })
    }

    /// Parses a CSV whose first column is `question`. A `truth` (or `y`)
    /// column marks a rating task; `y_i,y_j` or `label` mark a comparison
    /// task. A `majority` column is ignored; every other column is a rater.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::MalformedLine {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
        if col("question") != Some(0) {
            return Err(Error::MalformedLine {
                line: 1,
                message: "first column must be `question`".into(),
            });
        }
        let rating_col = col(TRUTH).or_else(|| col("y"));
        let pair_cols = col("y_i").zip(col("y_j"));
        let label_col = col("label");
        let (kind, truth_cols): (TaskKind, Vec<usize>) = match (rating_col, pair_cols, label_col) {
            (Some(c), None, None) => (TaskKind::Rating, vec![c]),
            (None, Some((a, b)), None) => (TaskKind::Comparison, vec![a, b]),
            (None, None, Some(c)) => (TaskKind::Comparison, vec![c]),
            _ => {
                return Err(Error::MalformedLine {
                    line: 1,
                    message: "expected exactly one of `truth`, `y_i,y_j` or `label`".into(),
                })
            }
        };
        let skip = col("majority");
        let rater_cols: Vec<usize> = (1..header.len())
            .filter(|c| !truth_cols.contains(c) && Some(*c) != skip)
            .collect();
        let raters = rater_cols.iter().map(|&c| header[c].to_string()).collect();

        let (mut questions, mut values, mut truth) = (Vec::new(), Vec::new(), Vec::new());
        for (k, rec) in reader.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::MalformedLine {
                line,
                message: e.to_string(),
            })?;
            let num = |c: usize| -> Result<f64> {
                let s = rec.get(c).unwrap_or("");
                s.trim_start_matches('+')
                    .parse::<f64>()
                    .map_err(|_| Error::MalformedLine {
                        line,
                        message: format!("`{s}` in column `{}` is not a number", &header[c]),
                    })
            };
            questions.push(rec.get(0).unwrap_or("").to_string());
            values.push(rater_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?);
            truth.push(match truth_cols.as_slice() {
                [a, b] => {
                    let (yi, yj) = (num(*a)?, num(*b)?);
                    Label::from_order(yi, yj)
                        .ok_or_else(|| Error::MalformedLine {
                            line,
                            message: "ground-truth scores are tied".into(),
                        })?
                        .as_f64()
                }
                [c] => num(*c)?,
                _ => unreachable!(),
            });
        }
        RaterMatrix::new(kind, questions, raters, values, truth)
    }

    pub fn from_csv_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn rater_column(&self, r: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[r]).collect()
    }

    /// Participant names: raters then the ground truth.
    pub fn participants(&self) -> Vec<String> {
        let mut p = self.raters.clone();
        p.push(TRUTH.to_string());
        p
    }

    fn column(&self, p: usize) -> Vec<f64> {
        if p == self.raters.len() {
            self.ground_truth.clone()
        } else {
            self.rater_column(p)
        }
    }

    /// Binary decisions of participant `p`. Comparison tasks give one per
    /// question. Rating tasks give one per unordered question pair `(a, b)`,
    /// `a < b`, with `None` where the two ratings tie.
    pub fn decisions(&self, p: usize) -> Vec<Option<Label>> {
        let col = self.column(p);
        match self.kind {
            TaskKind::Comparison => col.iter().map(|&v| Label::from_sign(v as i64)).collect(),
            TaskKind::Rating => {
                let n = col.len();
                let mut out = Vec::with_capacity(n * (n - 1) / 2);
                for a in 0..n {
                    for b in a + 1..n {
                        out.push(Label::from_order(col[a], col[b]));
                    }
                }
                out
            }
        }
    }
}

/// Agreement between two participants, over positions where neither tied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub first: String,
    pub second: String,
    pub report: AgreementReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanAgreement {
    pub p_o: f64,
    pub kappa: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajoritySummary {
    pub labels: Vec<Label>,
    pub vs_truth: AgreementReport,
}

/// Direct-rating comparison of the truth against the per-question rater mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingSummary {
    pub mae: f64,
    pub pearson: f64,
    pub spearman: f64,
    pub inter_rater_pearson: Option<f64>,
    pub inter_rater_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementTable {
    pub kind: TaskKind,
    pub participants: Vec<String>,
    /// Every unordered participant pair, row-major upper triangle.
    pub cells: Vec<PairCell>,
    pub rater_pairs: Option<MeanAgreement>,
    pub rater_vs_truth: MeanAgreement,
    pub majority: Option<MajoritySummary>,
    pub rating_summary: Option<RatingSummary>,
}

impl AgreementTable {
    pub fn cell(&self, a: &str, b: &str) -> Option<&AgreementReport> {
        self.cells
            .iter()
            .find(|c| (c.first == a && c.second == b) || (c.first == b && c.second == a))
            .map(|c| &c.report)
    }

    /// Square text table; each cell is `p_o/kappa`.
    pub fn render_text(&self) -> String {
        let names = &self.participants;
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(11);
        let mut out = String::new();
        let _ = write!(out, "{:width$}", "");
        for n in names {
            let _ = write!(out, " {n:>width$}");
        }
        out.push('\n');
        for a in names {
            let _ = write!(out, "{a:width$}");
            for b in names {
                let text = if a == b {
                    "-".to_string()
                } else {
                    self.cell(a, b)
                        .map(|r| format!("{:.2}/{:.2}", r.p_o, r.kappa))
                        .unwrap_or_else(|| "n/a".into())
                };
                let _ = write!(out, " {text:>width$}");
            }
            out.push('\n');
        }
        if let Some(m) = &self.rater_pairs {
            let _ = writeln!(out, "rater-rater average  p_o {:.4}  kappa {:.4}", m.p_o, m.kappa);
        }
        let t = &self.rater_vs_truth;
        let _ = writeln!(out, "rater-truth average  p_o {:.4}  kappa {:.4}", t.p_o, t.kappa);
        if let Some(m) = &self.majority {
            let _ = writeln!(
                out,
                "majority vs truth    p_o {:.4}  kappa {:.4}",
                m.vs_truth.p_o, m.vs_truth.kappa
            );
        }
        if let Some(s) = &self.rating_summary {
            let _ = writeln!(
                out,
                "truth vs mean rating MAE {:.4}  pearson {:.4}  spearman {:.4}",
                s.mae, s.pearson, s.spearman
            );
            if let (Some(p), Some(r)) = (s.inter_rater_pearson, s.inter_rater_spearman) {
                let _ = writeln!(out, "inter-rater mean     pearson {p:.4}  spearman {r:.4}");
            }
        }
        out
    }
}

fn mutual(a: &[Option<Label>], b: &[Option<Label>]) -> (Vec<Label>, Vec<Label>) {
    a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip()
}

/// Majority preference per question of a comparison task.
pub fn majority_preference(m: &RaterMatrix) -> Result<Vec<Label>> {
    if m.kind != TaskKind::Comparison {
        return Err(Error::InvalidConfig("majority vote needs a comparison task".into()));
    }
    m.values
        .iter()
        .zip(&m.questions)
        .map(|(row, q)| {
            let votes: Vec<Label> = row.iter().filter_map(|&v| Label::from_sign(v as i64)).collect();
            majority_label(&votes).ok_or_else(|| Error::TiedVote(q.clone()))
        })
        .collect()
}

fn mean_of(cells: &[&PairCell]) -> Option<MeanAgreement> {
    if cells.is_empty() {
        return None;
    }
    let n = cells.len() as f64;
    Some(MeanAgreement {
        p_o: cells.iter().map(|c| c.report.p_o).sum::<f64>() / n,
        kappa: cells.iter().map(|c| c.report.kappa).sum::<f64>() / n,
        count: cells.len(),
    })
}

fn mean_defined(values: impl Iterator<Item = Result<f64>>) -> Option<f64> {
    let ok: Vec<f64> = values.filter_map(|r| r.ok()).collect();
    (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
}

/// Pairwise agreement of every rater with every other rater and with the
/// ground truth. Rating tasks are compared through the induced pairwise
/// decisions, skipping pairs where either side tied.
pub fn agreement_matrix(m: &RaterMatrix) -> Result<AgreementTable> {
    let participants = m.participants();
    let decisions: Vec<Vec<Option<Label>>> = (0..participants.len()).map(|p| m.decisions(p)).collect();
    let mut cells = Vec::new();
    for a in 0..participants.len() {
        for b in a + 1..participants.len() {
            let (x, y) = mutual(&decisions[a], &decisions[b]);
            if x.is_empty() {
                return Err(Error::DegenerateMatrix(format!(
                    "`{}` and `{}` share no untied decisions",
                    participants[a], participants[b]
                )));
            }
            cells.push(PairCell {
                first: participants[a].clone(),
                second: participants[b].clone(),
                report: agreement(&x, &y)?,
            });
        }
    }
    let (truth_cells, rater_cells): (Vec<&PairCell>, Vec<&PairCell>) = cells.iter().partition(|c| c.second == TRUTH);
    let rater_vs_truth = mean_of(&truth_cells).expect("at least one rater");
    let rater_pairs = mean_of(&rater_cells);

    let majority = match m.kind {
        TaskKind::Comparison => match majority_preference(m) {
            Ok(labels) => {
                let truth: Vec<Label> = m
                    .ground_truth
                    .iter()
                    .filter_map(|&v| Label::from_sign(v as i64))
                    .collect();
                let vs_truth = agreement(&labels, &truth)?;
                Some(MajoritySummary { labels, vs_truth })
            }
            Err(Error::TiedVote(_)) => None,
            Err(e) => return Err(e),
        },
        TaskKind::Rating => None,
    };

    let rating_summary = match m.kind {
        TaskKind::Rating => {
            let n = m.raters.len() as f64;
            let means: Vec<f64> = m.values.iter().map(|row| row.iter().sum::<f64>() / n).collect();
            let cols: Vec<Vec<f64>> = (0..m.raters.len()).map(|r| m.rater_column(r)).collect();
            let pairs = || (0..cols.len()).flat_map(|a| (a + 1..cols.len()).map(move |b| (a, b)));
            Some(RatingSummary {
                mae: mae(&means, &m.ground_truth)?,
                pearson: pearson(&m.ground_truth, &means)?,
                spearman: spearman(&m.ground_truth, &means)?,
                inter_rater_pearson: mean_defined(pairs().map(|(a, b)| pearson(&cols[a], &cols[b]))),
                inter_rater_spearman: mean_defined(pairs().map(|(a, b)| spearman(&cols[a], &cols[b]))),
            })
        }
        TaskKind::Comparison => None,
    };

    Ok(AgreementTable {
        kind: m.kind,
        participants,
        cells,
        rater_pairs,
        rater_vs_truth,
        majority,
        rating_summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "question,y_i,y_j,A,B,C\nq1,2,1,+1,+1,-1\nq2,1,3,-1,-1,-1\nq3,4,2,+1,-1,+1\n";

    #[test]
    fn parses_comparison_csv() {
        let m = RaterMatrix::from_csv_str(SMALL).unwrap();
        assert_eq!(m.kind, TaskKind::Comparison);
        assert_eq!(m.raters, vec!["A", "B", "C"]);
        assert_eq!(m.ground_truth, vec![1.0, -1.0, 1.0]);
        assert_eq!(m.values[2], vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn comparison_table_by_hand() {
        let m = RaterMatrix::from_csv_str(SMALL).unwrap();
        let t = agreement_matrix(&m).unwrap();
        assert_eq!(t.cells.len(), 6);
        assert_eq!(t.cell("A", TRUTH).unwrap().p_o, 1.0);
        assert!((t.cell("B", "A").unwrap().p_o - 2.0 / 3.0).abs() < 1e-12);
        let maj = t.majority.clone().unwrap();
        assert_eq!(maj.labels, vec![Label::Pos, Label::Neg, Label::Pos]);
        assert_eq!(maj.vs_truth.p_o, 1.0);
        assert!(t.render_text().contains("1.00/1.00"));
    }

    #[test]
    fn tied_majority_is_reported() {
        let m = RaterMatrix::from_csv_str("question,label,A,B\nq1,1,1,-1\nq2,-1,-1,-1\n").unwrap();
        assert!(matches!(majority_preference(&m), Err(Error::TiedVote(q)) if q == "q1"));
        assert!(agreement_matrix(&m).unwrap().majority.is_none());
    }

    #[test]
    fn rating_task_skips_ties() {
        let m = RaterMatrix::from_csv_str("question,truth,A,B\nq1,1,1,2\nq2,2,1,3\nq3,3,2,1\n").unwrap();
        assert_eq!(m.kind, TaskKind::Rating);
        // A decisions over (q1,q2),(q1,q3),(q2,q3): tie, -, -
        assert_eq!(m.decisions(0), vec![None, Some(Label::Neg), Some(Label::Neg)]);
        let t = agreement_matrix(&m).unwrap();
        assert_eq!(t.cell("A", TRUTH).unwrap().n, 2);
        assert_eq!(t.cell("A", TRUTH).unwrap().p_o, 1.0);
        assert!(t.rating_summary.is_some());
    }

    #[test]
    fn malformed_inputs() {
        assert!(RaterMatrix::from_csv_str("q,truth,A\nx,1,1\n").is_err());
        assert!(RaterMatrix::from_csv_str("question,truth,A\nx,1,zz\n").is_err());
        assert!(RaterMatrix::from_csv_str("question,label,A\nx,1,0\n").is_err());
        assert!(RaterMatrix::from_csv_str("question,y_i,y_j,A\nx,2,2,1\n").is_err());
    }
}
