//! Deterministic quasi-static grasp evaluation.
//!
//! A decoded hand is posed canonically for each grasp type, its fingers
//! integrate the open-loop joint velocities for a fixed number of kinematic
//! steps (freezing on contact and at joint limits), and the resulting contact
//! set is probed with eight planar perturbations through a friction-cone
//! wrench model. Per-step rewards, success bits and the design score follow.

pub mod episode;
pub mod hand;
pub mod reward;
pub mod score;
pub mod wrench;

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{self, M3, V3};
use crate::math::PI;
use crate::objects::{self, ObjectKind, ObjectModel};
use crate::rng;

pub use episode::{simulate_episode, EpisodeResult, GeometryError};
pub use reward::{step_reward, RewardVariant, StepState};
pub use score::{
    evaluate_design, score, EvalConfig, ScoreReport, ScoreStatus, Sequential, TaskMap, SCORE_FLOOR,
};
pub use wrench::{perturbation_test, Contact, ContactKind, GraspState, PerturbationOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspType {
    Power,
    Pinch,
    Lateral,
}

impl GraspType {
    pub const ALL: [GraspType; 3] = [GraspType::Power, GraspType::Pinch, GraspType::Lateral];

    pub fn index(self) -> usize {
        match self {
            GraspType::Power => 0,
            GraspType::Pinch => 1,
            GraspType::Lateral => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GraspType::Power => "power",
            GraspType::Pinch => "pinch",
            GraspType::Lateral => "lateral",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        GraspType::ALL.into_iter().find(|g| g.name() == s)
    }

    /// Orientation of the hand frame (palm normal = hand +z) in the task
    /// frame: palm up, palm down, palm facing +x.
    pub fn hand_rotation(self) -> M3 {
        match self {
            GraspType::Power => M3::identity(),
            GraspType::Pinch => geometry::rot_x(PI),
            GraspType::Lateral => geometry::rot_y(PI / 2.0),
        }
    }
}

impl fmt::Display for GraspType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rigid placement of the hand frame in the task frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandPose {
    pub rotation: M3,
    pub translation: V3,
}

impl HandPose {
    pub fn apply(&self, p: &V3) -> V3 {
        self.rotation * p + self.translation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspTask {
    pub grasp_type: GraspType,
    pub object: ObjectModel,
    pub seed: u64,
}

impl GraspTask {
    /// Canonical hand pose. The orientation depends only on the grasp type;
    /// the palm is placed against the object (power) or at a stand-off of
    /// `1 + base_height` from it (pinch, lateral).
    pub fn hand_pose(&self, base_height: f64) -> HandPose {
        let rotation = self.grasp_type.hand_rotation();
        let normal = rotation * V3::z();
        let gap = match self.grasp_type {
            GraspType::Power => 0.0,
            GraspType::Pinch | GraspType::Lateral => 1.0 + base_height,
        };
        // Palm surface sits `gap` beyond the object's extent along -normal.
        let reach = self.object.extent(&-normal);
        HandPose {
            rotation,
            translation: -normal * (reach + gap),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Ordered tasks with a train/test partition. Success vectors index the
/// train tasks in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSuite {
    pub tasks: Vec<GraspTask>,
    pub split: Vec<Split>,
}

pub const DEFAULT_TRAIN_TASKS: usize = 160;
pub const DEFAULT_TEST_TASKS: usize = 48;

impl TaskSuite {
    pub fn new(tasks: Vec<GraspTask>, split: Vec<Split>) -> Self {
        assert_eq!(tasks.len(), split.len(), "one split label per task");
        Self { tasks, split }
    }

    /// Procedural suite: grasp types cycle power, pinch, lateral within each
    /// split; power and pinch draw mixed solids, lateral draws thin plates.
    pub fn generate(n_train: usize, n_test: usize, seed: u64) -> Self {
        let mut tasks = Vec::with_capacity(n_train + n_test);
        let mut split = Vec::with_capacity(n_train + n_test);
        for (s, n) in [(Split::Train, n_train), (Split::Test, n_test)] {
            for i in 0..n {
                let g = GraspType::ALL[i % 3];
                let kind = if g == GraspType::Lateral {
                    ObjectKind::ThinPlate
                } else {
                    ObjectKind::Mixed
                };
                let global = tasks.len() as u64;
                let object = objects::random_object(kind, &mut rng::stream(seed, "task-object", global));
                tasks.push(GraspTask {
                    grasp_type: g,
                    object,
                    seed: rng::derive_seed(seed, "task", global),
                });
                split.push(s);
            }
        }
        Self { tasks, split }
    }

    /// Reduced suite used for quick experiments: 20 train and 12 test tasks.
    pub fn desk(seed: u64) -> Self {
        Self::generate(20, 12, seed)
    }

    pub fn indices(&self, s: Split) -> Vec<usize> {
        (0..self.tasks.len()).filter(|&i| self.split[i] == s).collect()
    }

    /// Number of train tasks: the length of every success vector.
    pub fn n_tasks(&self) -> usize {
        self.split.iter().filter(|&&s| s == Split::Train).count()
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_suite_type_counts() {
        let s = TaskSuite::desk(1);
        assert_eq!(s.n_tasks(), 20);
        let train = s.indices(Split::Train);
        let count = |g: GraspType| train.iter().filter(|&&i| s.tasks[i].grasp_type == g).count();
        assert_eq!((count(GraspType::Power), count(GraspType::Pinch), count(GraspType::Lateral)), (7, 7, 6));
        assert_eq!(s, TaskSuite::desk(1));
    }

    #[test]
    fn poses_are_fixed_by_type() {
        let s = TaskSuite::generate(3, 0, 4);
        for t in &s.tasks {
            let p = t.hand_pose(0.3);
            let n = p.rotation * V3::z();
            match t.grasp_type {
                GraspType::Power => assert!((n - V3::z()).norm() < 1e-12),
                GraspType::Pinch => assert!((n + V3::z()).norm() < 1e-12),
                GraspType::Lateral => assert!((n - V3::x()).norm() < 1e-12),
            }
            // The palm plane never cuts the object.
            let palm = p.translation.dot(&n);
            assert!(t.object.extent(&-n) + palm <= 1e-12);
        }
    }
}
