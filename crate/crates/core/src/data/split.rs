use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::idx::RawImage;
use crate::error::{Error, Result};

/// An MNIST image with its digit and its within-task binary label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledImage {
    pub pixels: Vec<u8>,
    pub digit: u8,
    /// 0 for the even digit of the pair, 1 for the odd one.
    pub label: usize,
}

#[derive(Clone, Debug)]
pub struct Task {
    pub id: usize,
    pub digits: (u8, u8),
    pub train: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
}

/// Split MNIST: five binary tasks (0/1, 2/3, 4/5, 6/7, 8/9) in fixed order.
#[derive(Clone, Debug)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct TaskSizes {
    pub train: usize,
    pub test: usize,
}

impl TaskStream {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn sizes(&self) -> Vec<TaskSizes> {
        self.tasks
            .iter()
            .map(|t| TaskSizes {
                train: t.train.len(),
                test: t.test.len(),
            })
            .collect()
    }

    /// Keeps at most `train` / `test` samples per task (taken from the front
    /// of the already shuffled training order). Useful for smoke runs.
    pub fn truncated(mut self, train: Option<usize>, test: Option<usize>) -> Self {
        for t in &mut self.tasks {
            if let Some(n) = train {
                t.train.truncate(n);
            }
            if let Some(n) = test {
                t.test.truncate(n);
            }
        }
        self
    }
}

pub const SPLIT_TASKS: usize = 5;

fn partition(images: Vec<RawImage>) -> Vec<Vec<LabeledImage>> {
    let mut parts: Vec<Vec<LabeledImage>> = vec![Vec::new(); SPLIT_TASKS];
    for img in images {
        let task = img.label as usize / 2;
        parts[task].push(LabeledImage {
            pixels: img.pixels,
            digit: img.label,
            label: (img.label % 2) as usize,
        });
    }
    parts
}

/// Builds the task stream. Training order within each task is shuffled
/// with `seed`; test sets keep file order.
pub fn build_split_mnist(train: Vec<RawImage>, test: Vec<RawImage>, seed: u64) -> Result<TaskStream> {
    let mut seen = [false; 10];
    for r in &train {
        seen[r.label as usize] = true;
    }
    if let Some(d) = seen.iter().position(|&s| !s) {
        return Err(Error::Format(format!("training set has no samples of digit {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_parts = partition(train);
    let test_parts = partition(test);
    let tasks = train_parts
        .into_iter()
        .zip(test_parts)
        .enumerate()
        .map(|(id, (mut train, test))| {
            train.shuffle(&mut rng);
            Task {
                id,
                digits: (2 * id as u8, 2 * id as u8 + 1),
                train,
                test,
            }
        })
        .collect();
    Ok(TaskStream { tasks })
}
