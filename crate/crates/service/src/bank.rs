use std::fmt;
use std::path::Path;
use std::str::FromStr;

use capcomp_core::metrics::{RaterMatrix, TaskKind};
use capcomp_core::study;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// The three annotation tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// One image-caption pair, scored 1..5.
    DirectRating,
    /// Two pairs with different images; pick the better match.
    CrossImagePair,
    /// One image with two captions; pick the better caption.
    SameImagePair,
}

pub const ALL_TASKS: [Task; 3] = [Task::DirectRating, Task::CrossImagePair, Task::SameImagePair];

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::DirectRating => "direct_rating",
            Task::CrossImagePair => "cross_image_pair",
            Task::SameImagePair => "same_image_pair",
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Task::DirectRating => 1,
            Task::CrossImagePair => 2,
            Task::SameImagePair => 3,
        }
    }

    pub fn item_count(self) -> usize {
        match self {
            Task::DirectRating => 1,
            _ => 2,
        }
    }

    pub fn choice_schema(self) -> ChoiceSchema {
        match self {
            Task::DirectRating => ChoiceSchema::Rating { min: 1, max: 5 },
            _ => ChoiceSchema::Preference { options: [1, -1] },
        }
    }

    pub fn accepts(self, choice: i64) -> bool {
        match self {
            Task::DirectRating => (1..=5).contains(&choice),
            _ => choice == 1 || choice == -1,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Task::DirectRating => "Rate how well the caption describes the image",
            Task::CrossImagePair => "Choose which image-caption pair matches better",
            Task::SameImagePair => "Choose which caption better matches the image",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = ServiceError;

    /// Accepts the snake_case name or the task number.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_TASKS
            .into_iter()
            .find(|t| t.as_str() == s || t.number().to_string() == s)
            .ok_or_else(|| ServiceError::UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChoiceSchema {
    Rating {
        min: i64,
        max: i64,
    },
    /// +1 picks the first item, -1 the second.
    Preference {
        options: [i64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRef {
    pub item_id: String,
    pub image_id: String,
    pub image_url: String,
    #[serde(default)]
    pub caption: Option<String>,
}

/// Reference answer. Kept server-side only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroundTruth {
    /// Mean rating of the single item.
    Rating(f64),
    /// Mean ratings of the two items, in order.
    Scores([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub task: Task,
    pub items: Vec<ItemRef>,
    pub ground_truth: GroundTruth,
}

/// What a client sees of a question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionPayload {
    pub question_id: String,
    pub task: Task,
    pub prompt: String,
    pub items: Vec<PublicItem>,
    pub choice: ChoiceSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicItem {
    pub item_id: String,
    pub image_url: String,
    pub caption: Option<String>,
}

impl Question {
    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: &str| Err(ServiceError::InvalidBank(format!("{}: {m}", self.question_id)));
        if self.items.len() != self.task.item_count() {
            return bad("wrong number of items for the task");
        }
        match (self.task, self.ground_truth) {
            (Task::DirectRating, GroundTruth::Rating(_)) => {}
            (Task::DirectRating, _) | (_, GroundTruth::Rating(_)) => return bad("ground truth does not fit the task"),
            (_, GroundTruth::Scores([a, b])) if a == b => return bad("tied ground truth"),
            _ => {}
        }
        let same = self.items.len() == 2 && self.items[0].image_id == self.items[1].image_id;
        match self.task {
            Task::SameImagePair if !same => bad("items must share an image"),
            Task::CrossImagePair if same => bad("items must show different images"),
            _ => Ok(()),
        }
    }

    pub fn payload(&self) -> QuestionPayload {
        QuestionPayload {
            question_id: self.question_id.clone(),
            task: self.task,
            prompt: self.task.title().to_string(),
            items: self
                .items
                .iter()
                .map(|i| PublicItem {
                    item_id: i.item_id.clone(),
                    image_url: i.image_url.clone(),
                    caption: i.caption.clone(),
                })
                .collect(),
            choice: self.task.choice_schema(),
        }
    }

    /// Ground truth in rater-matrix units: the rating, or the +1/-1 label.
    pub fn truth_value(&self) -> f64 {
        match self.ground_truth {
            GroundTruth::Rating(y) => y,
            GroundTruth::Scores([a, b]) => {
                if a > b {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Questions of one task in their canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionBank {
    pub task: Task,
    pub questions: Vec<Question>,
}

impl QuestionBank {
    pub fn validate(&self) -> Result<(), ServiceError> {
        for q in &self.questions {
            if q.task != self.task {
                return Err(ServiceError::InvalidBank(format!(
                    "{} is not a {} question",
                    q.question_id, self.task
                )));
            }
            q.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ServiceError> {
        let bank: QuestionBank = serde_json::from_str(text).map_err(|e| ServiceError::InvalidBank(e.to_string()))?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Bank built from the bundled study table for `task`.
    pub fn study(task: Task) -> Self {
        let m = study::task(task.number()).expect("bundled study tables are valid");
        let n = task.number();
        let questions = m
            .questions
            .iter()
            .enumerate()
            .map(|(k, q)| study_question(task, &m, k, q, n))
            .collect();
        QuestionBank { task, questions }
    }
}

fn study_question(task: Task, m: &RaterMatrix, k: usize, q: &str, n: u8) -> Question {
    let question_id = format!("task{n}-{q}");
    let item = |suffix: &str, image: &str| ItemRef {
        item_id: format!("{question_id}{suffix}"),
        image_id: image.to_string(),
        image_url: format!("/media/task{n}/{q}{suffix}.jpg"),
        caption: None,
    };
    let (items, ground_truth) = match m.kind {
        TaskKind::Rating => (
            vec![item("", &format!("task{n}-{q}"))],
            GroundTruth::Rating(m.ground_truth[k]),
        ),
        TaskKind::Comparison => {
            // The table keeps only the label; any scores with that order will do.
            let label = m.ground_truth[k];
            let scores = if label > 0.0 { [2.0, 1.0] } else { [1.0, 2.0] };
            let items = if task == Task::SameImagePair {
                let image = format!("task{n}-{q}");
                vec![item("a", &image), item("b", &image)]
            } else {
                vec![item("a", &format!("task{n}-{q}a")), item("b", &format!("task{n}-{q}b"))]
            };
            (items, GroundTruth::Scores(scores))
        }
    };
    Question {
        question_id,
        task,
        items,
        ground_truth,
    }
}
