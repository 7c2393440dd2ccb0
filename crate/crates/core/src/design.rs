//! The raw design space: a point in `[0,1]^185` and its deterministic
//! decoding into a physical hand and an open-loop control plan.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::grasp::GraspType;
use crate::math::{self, TAU};

/// Dimension of the raw design vector.
pub const PARAM_DIM: usize = 185;
/// Leading dimensions that describe the morphology; the rest is control.
pub const MORPHOLOGY_DIM: usize = 122;
/// Control dimensions per grasp type.
pub const CONTROL_PER_TYPE: usize = 21;
/// Upper bound on fingers a design can declare.
pub const MAX_FINGERS: usize = 6;
/// Segment slots reserved per finger inside the segment-shape block.
pub const SEGMENT_SLOTS: usize = 8;
/// Minimum angular separation between finger mounts.
pub const MIN_FINGER_SEPARATION_DEG: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DesignError {
    #[error("malformed design vector: expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("malformed design vector: element {index} = {value} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
}

/// Why a decodable design is discarded before evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Rejection {
    FingersTooClose {
        first: usize,
        second: usize,
        separation_deg: f64,
    },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::FingersTooClose {
                first,
                second,
                separation_deg,
            } => write!(
                f,
                "fingers {first} and {second} are {separation_deg:.3} degrees apart (minimum {MIN_FINGER_SEPARATION_DEG})"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeError {
    Malformed(DesignError),
    Rejected {
        morphology: HandMorphology,
        rejection: Rejection,
    },
}

impl From<DesignError> for DecodeError {
    fn from(e: DesignError) -> Self {
        DecodeError::Malformed(e)
    }
}

/// A validated point of the raw design space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self, DesignError> {
        if values.len() != PARAM_DIM {
            return Err(DesignError::WrongLength {
                expected: PARAM_DIM,
                got: values.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            // NaN fails both comparisons.
            if !(0.0..=1.0).contains(&value) {
                return Err(DesignError::OutOfRange { index, value });
            }
        }
        Ok(Self(values))
    }

    /// Builds a vector by clamping into the unit cube; NaN maps to 0.5.
    pub fn clamped(values: &[f64]) -> Result<Self, DesignError> {
        let v = values
            .iter()
            .map(|&x| if x.is_nan() { 0.5 } else { x.clamp(0.0, 1.0) })
            .collect();
        Self::new(v)
    }

    pub fn splat(value: f64) -> Result<Self, DesignError> {
        Self::new(alloc::vec![value; PARAM_DIM])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn morphology_part(&self) -> &[f64] {
        &self.0[..MORPHOLOGY_DIM]
    }

    pub fn control_part(&self) -> &[f64] {
        &self.0[MORPHOLOGY_DIM..]
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = DesignError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Target range of one kind of value inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldRange {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub integer: bool,
    /// Consecutive raw values this field occupies within one repetition of
    /// the block pattern.
    pub count: usize,
}

impl FieldRange {
    const fn real(name: &'static str, lo: f64, hi: f64, count: usize) -> Self {
        Self {
            name,
            lo,
            hi,
            integer: false,
            count,
        }
    }

    const fn int(name: &'static str, lo: f64, hi: f64, count: usize) -> Self {
        Self {
            name,
            lo,
            hi,
            integer: true,
            count,
        }
    }

    /// Maps a raw value in `[0,1]` into this field's range.
    pub fn map(&self, v: f64) -> f64 {
        if self.integer {
            let bin = math::floor(v * (self.hi - self.lo + 1.0));
            (self.lo + bin).min(self.hi)
        } else {
            self.lo + v * (self.hi - self.lo)
        }
    }
}

/// A contiguous run of raw dimensions. Its `pattern` of fields repeats until
/// `len` values are consumed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
    pub pattern: Vec<FieldRange>,
}

impl Block {
    fn pattern_len(&self) -> usize {
        self.pattern.iter().map(|f| f.count).sum()
    }

    /// Field governing the `i`-th value of the block.
    pub fn field_at(&self, i: usize) -> &FieldRange {
        let mut r = i % self.pattern_len();
        for f in &self.pattern {
            if r < f.count {
                return f;
            }
            r -= f.count;
        }
        unreachable!("pattern covers its own length")
    }

    pub fn raw<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.offset..self.offset + self.len]
    }

    /// Decoded value of element `i` of this block.
    pub fn value(&self, theta: &[f64], i: usize) -> f64 {
        self.field_at(i).map(theta[self.offset + i])
    }
}

/// Block table of the raw design vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignLayout {
    pub blocks: Vec<Block>,
}

impl Default for DesignLayout {
    fn default() -> Self {
        Self::standard()
    }
}

impl DesignLayout {
    pub fn standard() -> Self {
        use alloc::vec;
        let control_pattern = vec![
            FieldRange::real("palm_command", -1.0, 1.0, MAX_FINGERS),
            FieldRange::real("intermediate_command", -1.0, 1.0, MAX_FINGERS),
            FieldRange::real("tip_command", -1.0, 1.0, MAX_FINGERS),
            FieldRange::real("group_gain", 0.5, 1.5, 3),
        ];
        let blocks = vec![
            Block {
                name: "base_height",
                offset: 0,
                len: 1,
                pattern: vec![FieldRange::real("base_height", -1.0, 1.0, 1)],
            },
            Block {
                name: "segment_mass",
                offset: 1,
                len: 1,
                pattern: vec![FieldRange::real("segment_mass", 1.0, 5.0, 1)],
            },
            Block {
                name: "finger_count",
                offset: 2,
                len: 1,
                pattern: vec![FieldRange::int("finger_count", 2.0, 6.0, 1)],
            },
            Block {
                name: "segment_counts",
                offset: 3,
                len: MAX_FINGERS,
                pattern: vec![FieldRange::int("segment_count", 2.0, 6.0, 1)],
            },
            Block {
                name: "segment_shapes",
                offset: 9,
                len: MAX_FINGERS * SEGMENT_SLOTS * 2,
                pattern: vec![
                    FieldRange::real("segment_height", 1.0, 1.5, 1),
                    FieldRange::real("segment_radius", 0.2, 0.4, 1),
                ],
            },
            Block {
                name: "fingertip_shapes",
                offset: 105,
                len: MAX_FINGERS,
                pattern: vec![FieldRange::real("fingertip_radius", 0.2, 0.4, 1)],
            },
            Block {
                name: "friction_joint",
                offset: 111,
                len: 5,
                pattern: vec![
                    FieldRange::real("lateral_friction", 1.0, 5.0, 1),
                    FieldRange::real("spinning_friction", 1.0, 5.0, 1),
                    FieldRange::real("joint_velocity_limit", 0.1, 2.0, 1),
                    FieldRange::real("joint_damping", 1.0, 1.1, 1),
                    FieldRange::real("joint_effort", 500.0, 4000.0, 1),
                ],
            },
            Block {
                name: "mount_locations",
                offset: 116,
                len: MAX_FINGERS,
                pattern: vec![FieldRange::real("mount_angle", 0.0, TAU, 1)],
            },
            Block {
                name: "control",
                offset: MORPHOLOGY_DIM,
                len: 3 * CONTROL_PER_TYPE,
                pattern: control_pattern,
            },
        ];
        Self { blocks }
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    fn expect(&self, name: &str) -> &Block {
        self.block(name)
            .unwrap_or_else(|| panic!("layout has no block named {name}"))
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(|b| b.len).sum()
    }

    /// Checks that blocks tile `[0, PARAM_DIM)` without gaps or overlaps.
    pub fn is_contiguous(&self) -> bool {
        let mut blocks: Vec<&Block> = self.blocks.iter().collect();
        blocks.sort_by_key(|b| b.offset);
        let mut next = 0;
        for b in blocks {
            if b.offset != next || b.len % b.pattern_len() != 0 {
                return false;
            }
            next += b.len;
        }
        next == PARAM_DIM
    }

    /// Raw index of the finger-count dimension.
    pub fn finger_count_index(&self) -> usize {
        self.expect("finger_count").offset
    }

    /// Raw index of the mount angle of finger `i`.
    pub fn mount_index(&self, finger: usize) -> usize {
        self.expect("mount_locations").offset + finger
    }

    /// Raw value that decodes to `n` fingers.
    pub fn finger_count_raw(n: usize) -> f64 {
        // Centre of the integer bin for n.
        ((n as f64 - 2.0) + 0.5) / 5.0
    }

    /// Human-readable schema, one block per entry.
    pub fn schema(&self) -> Vec<SchemaEntry> {
        self.blocks
            .iter()
            .map(|b| {
                let (lo, hi) = if b.pattern.len() == 1 {
                    (Some(b.pattern[0].lo), Some(b.pattern[0].hi))
                } else {
                    (None, None)
                };
                SchemaEntry {
                    name: b.name.into(),
                    offset: b.offset,
                    length: b.len,
                    lo,
                    hi,
                    fields: b
                        .pattern
                        .iter()
                        .map(|f| SchemaField {
                            name: f.name.into(),
                            lo: f.lo,
                            hi: f.hi,
                            integer: f.integer,
                            count: f.count,
                        })
                        .collect(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub name: String,
    pub offset: usize,
    pub length: usize,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub fields: Vec<SchemaField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaField {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub integer: bool,
    pub count: usize,
}

/// Height and radius of one finger segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentDims {
    pub height: f64,
    pub radius: f64,
}

/// Physical hand decoded from the morphology part of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandMorphology {
    pub base_height: f64,
    pub segment_mass: f64,
    pub n_fingers: usize,
    pub segments_per_finger: Vec<usize>,
    pub segment_dims: Vec<Vec<SegmentDims>>,
    pub fingertip_radius: Vec<f64>,
    pub lateral_friction: f64,
    pub spinning_friction: f64,
    pub joint_velocity_limit: f64,
    pub joint_damping: f64,
    pub joint_effort: f64,
    /// Mount angles on the palm rim, radians in `[0, 2π)`.
    pub mount_angles: Vec<f64>,
}

impl HandMorphology {
    pub fn total_segments(&self) -> usize {
        self.segments_per_finger.iter().sum()
    }

    /// Coulomb coefficient used by the grasp evaluator.
    pub fn friction_coefficient(&self) -> f64 {
        self.lateral_friction / 5.0
    }
}

/// How control values are interpreted. Only joint-velocity targets are
/// supported by the kinematic evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    #[default]
    Velocity,
}

/// Joint velocity targets for one grasp type, in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspCommands {
    /// Palm-to-finger joint of each finger.
    pub palm: [f64; MAX_FINGERS],
    /// Shared target of every intermediate joint of each finger.
    pub intermediate: [f64; MAX_FINGERS],
    /// Joint carrying the last segment of each finger.
    pub tip: [f64; MAX_FINGERS],
    /// Group multipliers (palm, intermediate, tip) already folded into the
    /// velocities above.
    pub gains: [f64; 3],
}

impl GraspCommands {
    /// Velocity of joint `joint` (0 = palm joint) of `finger` with
    /// `segments` segments.
    pub fn joint_velocity(&self, finger: usize, joint: usize, segments: usize) -> f64 {
        if joint == 0 {
            self.palm[finger]
        } else if joint + 1 == segments {
            self.tip[finger]
        } else {
            self.intermediate[finger]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPlan {
    pub mode: ControlMode,
    /// Indexed by [`GraspType::index`].
    pub per_type: [GraspCommands; 3],
}

impl ControlPlan {
    pub fn commands(&self, grasp: GraspType) -> &GraspCommands {
        &self.per_type[grasp.index()]
    }

    /// Raw control values are kept so callers can inspect what was mapped.
    pub fn max_abs_velocity(&self) -> f64 {
        self.per_type
            .iter()
            .flat_map(|c| c.palm.iter().chain(&c.intermediate).chain(&c.tip))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A decoded design that passed the rejection rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedDesign {
    pub morphology: HandMorphology,
    pub control: ControlPlan,
}

/// Decodes only the morphology block.
pub fn decode_morphology(theta: &ParamVector, layout: &DesignLayout) -> HandMorphology {
    let t = theta.as_slice();
    let scalar = |name: &str| layout.expect(name).value(t, 0);

    let n_fingers = scalar("finger_count") as usize;
    let counts = layout.expect("segment_counts");
    let shapes = layout.expect("segment_shapes");
    let tips = layout.expect("fingertip_shapes");
    let fj = layout.expect("friction_joint");
    let mounts = layout.expect("mount_locations");

    let segments_per_finger: Vec<usize> =
        (0..n_fingers).map(|i| counts.value(t, i) as usize).collect();
    let segment_dims = segments_per_finger
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            (0..s)
                .map(|k| {
                    let base = 2 * (i * SEGMENT_SLOTS + k);
                    SegmentDims {
                        height: shapes.value(t, base),
                        radius: shapes.value(t, base + 1),
                    }
                })
                .collect()
        })
        .collect();
    let mount_angles = (0..n_fingers)
        .map(|i| {
            let a = mounts.value(t, i);
            if a >= TAU {
                a - TAU
            } else {
                a
            }
        })
        .collect();

    HandMorphology {
        base_height: scalar("base_height"),
        segment_mass: scalar("segment_mass"),
        n_fingers,
        segments_per_finger,
        segment_dims,
        fingertip_radius: (0..n_fingers).map(|i| tips.value(t, i)).collect(),
        lateral_friction: fj.value(t, 0),
        spinning_friction: fj.value(t, 1),
        joint_velocity_limit: fj.value(t, 2),
        joint_damping: fj.value(t, 3),
        joint_effort: fj.value(t, 4),
        mount_angles,
    }
}

/// Decodes the control block against a morphology's velocity limit.
pub fn decode_control(theta: &ParamVector, layout: &DesignLayout, morph: &HandMorphology) -> ControlPlan {
    let t = theta.as_slice();
    let block = layout.expect("control");
    let v_lim = morph.joint_velocity_limit;
    let per_type = core::array::from_fn(|g| {
        let base = g * CONTROL_PER_TYPE;
        let v = |i: usize| block.value(t, base + i);
        let gains = [v(18), v(19), v(20)];
        let vel = |cmd: f64, gain: f64| (cmd * gain * v_lim).clamp(-v_lim, v_lim);
        GraspCommands {
            palm: core::array::from_fn(|i| vel(v(i), gains[0])),
            intermediate: core::array::from_fn(|i| vel(v(MAX_FINGERS + i), gains[1])),
            tip: core::array::from_fn(|i| vel(v(2 * MAX_FINGERS + i), gains[2])),
            gains,
        }
    });
    ControlPlan {
        mode: ControlMode::Velocity,
        per_type,
    }
}

/// Decodes a design into morphology and control, applying the rejection rule.
pub fn decode(theta: &ParamVector, layout: &DesignLayout) -> Result<DecodedDesign, DecodeError> {
    let morphology = decode_morphology(theta, layout);
    if let Err(rejection) = rejection_check(&morphology) {
        return Err(DecodeError::Rejected {
            morphology,
            rejection,
        });
    }
    let control = decode_control(theta, layout, &morphology);
    Ok(DecodedDesign {
        morphology,
        control,
    })
}

/// Decodes raw values, validating them first.
pub fn decode_slice(values: &[f64], layout: &DesignLayout) -> Result<DecodedDesign, DecodeError> {
    let theta = ParamVector::new(values.to_vec())?;
    decode(&theta, layout)
}

/// Fails when two finger mounts are strictly closer than 12 degrees on the
/// palm rim.
pub fn rejection_check(morph: &HandMorphology) -> Result<(), Rejection> {
    let min_sep = MIN_FINGER_SEPARATION_DEG.to_radians();
    let a = &morph.mount_angles;
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let d = math::circular_distance(a[i], a[j]);
            if d < min_sep && worst.is_none_or(|(_, _, w)| d < w) {
                worst = Some((i, j, d));
            }
        }
    }
    match worst {
        Some((first, second, d)) => Err(Rejection::FingersTooClose {
            first,
            second,
            separation_deg: d.to_degrees(),
        }),
        None => Ok(()),
    }
}

/// Morphology cost: `(n_f - 2)/4 + Σ max(n_s,i - 3, 0)/3`.
pub fn morphology_cost(morph: &HandMorphology) -> f64 {
    let fingers = (morph.n_fingers as f64 - 2.0) / 4.0;
    let segments: f64 = morph
        .segments_per_finger
        .iter()
        .map(|&s| (s as f64 - 3.0).max(0.0) / 3.0)
        .sum();
    fingers + segments
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn mid() -> Vec<f64> {
        vec![0.5; PARAM_DIM]
    }

    fn morph_with(n_f: usize, segs: &[usize]) -> HandMorphology {
        let mut t = mid();
        t[2] = DesignLayout::finger_count_raw(n_f);
        let mut m = decode_morphology(&ParamVector::new(t).unwrap(), &DesignLayout::standard());
        m.segments_per_finger = segs.to_vec();
        m
    }

    #[test]
    fn layout_tiles_the_vector() {
        let l = DesignLayout::standard();
        assert_eq!(l.total_len(), PARAM_DIM);
        assert!(l.is_contiguous());
        assert_eq!(l.block("control").unwrap().len, 3 * CONTROL_PER_TYPE);
        assert_eq!(l.block("control").unwrap().offset, MORPHOLOGY_DIM);
    }

    #[test]
    fn finger_count_mapping() {
        let l = DesignLayout::standard();
        let mut t = mid();
        t[2] = 0.0;
        assert_eq!(decode_morphology(&ParamVector::new(t.clone()).unwrap(), &l).n_fingers, 2);
        t[2] = 0.5;
        assert_eq!(decode_morphology(&ParamVector::new(t.clone()).unwrap(), &l).n_fingers, 4);
        t[2] = 1.0;
        assert_eq!(decode_morphology(&ParamVector::new(t).unwrap(), &l).n_fingers, 6);
        for n in 2..=6 {
            let f = FieldRange::int("n", 2.0, 6.0, 1);
            assert_eq!(f.map(DesignLayout::finger_count_raw(n)) as usize, n);
        }
    }

    #[test]
    fn close_mounts_are_rejected() {
        let l = DesignLayout::standard();
        let mut t = mid();
        t[2] = DesignLayout::finger_count_raw(2);
        t[l.mount_index(0)] = 0.0;
        t[l.mount_index(1)] = 10.0 / 360.0;
        match decode(&ParamVector::new(t).unwrap(), &l) {
            Err(DecodeError::Rejected { rejection, .. }) => {
                let Rejection::FingersTooClose { separation_deg, .. } = rejection;
                assert!((separation_deg - 10.0).abs() < 1e-9);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn rejection_examples() {
        let mut m = morph_with(3, &[3, 3, 3]);
        m.mount_angles = vec![0.0, 120f64.to_radians(), 240f64.to_radians()];
        assert!(rejection_check(&m).is_ok());
        m.n_fingers = 2;
        m.mount_angles = vec![0.0, 11.9f64.to_radians()];
        assert!(rejection_check(&m).is_err());
        m.mount_angles = vec![0.0, 348.5f64.to_radians()];
        assert!(rejection_check(&m).is_err());
        m.mount_angles = vec![0.0, 12f64.to_radians()];
        assert!(rejection_check(&m).is_ok());
    }

    #[test]
    fn cost_examples() {
        assert_eq!(morphology_cost(&morph_with(2, &[3, 3])), 0.0);
        assert_eq!(morphology_cost(&morph_with(6, &[6; 6])), 7.0);
        assert_eq!(morphology_cost(&morph_with(3, &[2, 3, 3])), 0.25);
    }

    #[test]
    fn malformed_vectors() {
        assert!(matches!(
            ParamVector::new(vec![0.5; 184]),
            Err(DesignError::WrongLength { got: 184, .. })
        ));
        let mut t = mid();
        t[7] = 1.5;
        assert!(matches!(ParamVector::new(t), Err(DesignError::OutOfRange { index: 7, .. })));
        let mut t = mid();
        t[0] = f64::NAN;
        assert!(ParamVector::new(t).is_err());
        assert!(matches!(
            decode_slice(&[0.5; 10], &DesignLayout::standard()),
            Err(DecodeError::Malformed(_))
        ));
    }

    #[test]
    fn velocity_commands_respect_limit() {
        let l = DesignLayout::standard();
        let t = ParamVector::new(vec![1.0; PARAM_DIM]).unwrap();
        let m = decode_morphology(&t, &l);
        let c = decode_control(&t, &l, &m);
        assert!((c.max_abs_velocity() - m.joint_velocity_limit).abs() < 1e-12);
        let t = ParamVector::splat(0.5).unwrap();
        let m = decode_morphology(&t, &l);
        assert_eq!(decode_control(&t, &l, &m).max_abs_velocity(), 0.0);
    }

    #[test]
    fn unused_segment_slots_are_ignored() {
        let l = DesignLayout::standard();
        let mut t = mid();
        t[2] = DesignLayout::finger_count_raw(2);
        t[3] = 0.0; // finger 0 -> 2 segments
        let a = decode_morphology(&ParamVector::new(t.clone()).unwrap(), &l);
        // Slot 5 of finger 0 and everything of finger 4 are unused.
        t[9 + 2 * 5] = 0.9;
        t[9 + 2 * (4 * SEGMENT_SLOTS)] = 0.1;
        let b = decode_morphology(&ParamVector::new(t).unwrap(), &l);
        assert_eq!(a, b);
        assert_eq!(a.segment_dims[0].len(), 2);
    }

    fn unit_vector() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..=1.0, PARAM_DIM)
    }

    proptest! {
        #[test]
        fn decoded_fields_stay_in_range(t in unit_vector()) {
            let l = DesignLayout::standard();
            let theta = ParamVector::new(t).unwrap();
            let m = decode_morphology(&theta, &l);
            prop_assert!((-1.0..=1.0).contains(&m.base_height));
            prop_assert!((1.0..=5.0).contains(&m.segment_mass));
            prop_assert!((2..=6).contains(&m.n_fingers));
            prop_assert_eq!(m.segments_per_finger.len(), m.n_fingers);
            for (i, s) in m.segments_per_finger.iter().enumerate() {
                prop_assert!((2..=6).contains(s));
                prop_assert_eq!(m.segment_dims[i].len(), *s);
                for d in &m.segment_dims[i] {
                    prop_assert!((1.0..=1.5).contains(&d.height));
                    prop_assert!((0.2..=0.4).contains(&d.radius));
                }
            }
            for r in &m.fingertip_radius { prop_assert!((0.2..=0.4).contains(r)); }
            for a in &m.mount_angles { prop_assert!((0.0..TAU).contains(a)); }
            prop_assert!((1.0..=5.0).contains(&m.lateral_friction));
            prop_assert!((1.0..=5.0).contains(&m.spinning_friction));
            prop_assert!((0.1..=2.0).contains(&m.joint_velocity_limit));
            prop_assert!((1.0..=1.1).contains(&m.joint_damping));
            prop_assert!((500.0..=4000.0).contains(&m.joint_effort));
            let c = decode_control(&theta, &l, &m);
            prop_assert!(c.max_abs_velocity() <= m.joint_velocity_limit + 1e-12);
            // Pure and deterministic.
            prop_assert_eq!(decode_morphology(&theta, &l), m);
        }

        #[test]
        fn rejection_is_rotation_invariant(t in unit_vector(), shift in 0.0f64..TAU) {
            let l = DesignLayout::standard();
            let m = decode_morphology(&ParamVector::new(t).unwrap(), &l);
            let mut r = m.clone();
            for a in &mut r.mount_angles {
                *a = libm::fmod(*a + shift, TAU);
            }
            prop_assert_eq!(rejection_check(&m).is_ok(), rejection_check(&r).is_ok());
        }

        #[test]
        fn cost_is_monotone(segs in proptest::collection::vec(2usize..=6, 6), n in 2usize..6, which in 0usize..6) {
            let base = morph_with(n, &segs[..n]);
            let more_fingers = morph_with(n + 1, &segs[..n + 1]);
            prop_assert!(morphology_cost(&more_fingers) >= morphology_cost(&base));
            let mut grown = base.clone();
            let k = which % n;
            grown.segments_per_finger[k] = (grown.segments_per_finger[k] + 1).min(6);
            prop_assert!(morphology_cost(&grown) >= morphology_cost(&base));
        }
    }
}
