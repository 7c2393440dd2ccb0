//! Per-step rewards.

use serde::{Deserialize, Serialize};

use super::GraspType;

/// Object displacement and reorientation are capped at this value inside
/// the reward, which bounds every step reward to `[-0.21, 0.1]`.
pub const DISPLACEMENT_CAP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardVariant {
    /// Closed-form per-type step rewards.
    #[default]
    PerStep,
    /// Two-phase reward: contact bonus while closing, then a survival term
    /// scaled by the perturbation magnitude.
    #[serde(alias = "v1")]
    TwoPhase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepState {
    /// Non-adjacent links overlap.
    pub self_collision: bool,
    /// Fraction of fingertips touching the object.
    pub tip_contact_ratio: f64,
    pub d_pos: f64,
    pub d_orn: f64,
}

pub fn step_reward(s: &StepState, grasp: GraspType) -> f64 {
    let cs = if s.self_collision { 1.0 } else { 0.0 };
    let d_pos = s.d_pos.min(DISPLACEMENT_CAP);
    let d_orn = s.d_orn.min(DISPLACEMENT_CAP);
    match grasp {
        GraspType::Power | GraspType::Pinch => -0.01 * cs + 0.1 * s.tip_contact_ratio - 0.1 * d_pos,
        GraspType::Lateral => -0.01 * cs + 0.1 * s.tip_contact_ratio - 0.05 * d_pos - 0.05 * d_orn,
    }
}

/// Closing-phase reward of the two-phase variant.
pub fn two_phase_closing_reward(self_collision: bool, tip_contact_ratio: f64) -> f64 {
    let cs = if self_collision { 1.0 } else { 0.0 };
    -0.01 * cs + 0.01 * tip_contact_ratio
}

/// Perturbation-phase reward of the two-phase variant.
pub fn two_phase_perturbation_reward(survived: bool, magnitude: f64, tip_contact_ratio: f64) -> f64 {
    let iv = if survived { 1.0 } else { 0.0 };
    iv * magnitude * 1e-5 - 0.05 * (1.0 - iv) + tip_contact_ratio * 1e-5
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(cs: bool, ro: f64, dp: f64, dor: f64) -> StepState {
        StepState {
            self_collision: cs,
            tip_contact_ratio: ro,
            d_pos: dp,
            d_orn: dor,
        }
    }

    #[test]
    fn reward_examples() {
        assert!((step_reward(&st(false, 1.0, 0.0, 0.0), GraspType::Power) - 0.1).abs() < 1e-15);
        assert!((step_reward(&st(true, 0.0, 0.0, 0.0), GraspType::Pinch) + 0.01).abs() < 1e-15);
        assert!((step_reward(&st(false, 0.5, 0.2, 1.0), GraspType::Lateral) + 0.01).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn reward_is_bounded(cs: bool, ro in 0.0f64..=1.0, dp in 0.0f64..100.0, dor in 0.0f64..10.0, g in 0usize..3) {
            let r = step_reward(&st(cs, ro, dp, dor), GraspType::ALL[g]);
            prop_assert!((-0.21 - 1e-15..=0.1 + 1e-15).contains(&r));
        }
    }
}
