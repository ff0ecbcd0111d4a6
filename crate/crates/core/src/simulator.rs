//! Synthetic labeled impedance streams standing in for a recorded study.
//!
//! A subject is a randomized [`BodyNetwork`] plus one contact topology per
//! gesture. A session script is a shuffled sequence of gesture holds with
//! Null gaps in between; [`synthesize`] renders it through the impedance
//! model at a fixed sample rate and adds white noise, a random-walk baseline
//! drift and per-repetition contact jitter.
//!
//! All segment and contact values are configuration. The shipped defaults are
//! plausibility placeholders ordered so that Boredom produces the largest
//! magnitude drop and a nose-bridge pinch the smallest; they are not
//! measurements.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::gesture::GestureClass;
use crate::impedance::{shoulder_impedance, to_polar, BodyNetwork, Branch, ComplexImpedance, GestureState, ImpedanceError};
use crate::seed::{self, Rng};
use crate::stream::{LabelInterval, LabeledStream, StreamSample};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("reps_per_gesture must be at least 1")]
    NoRepetitions,
    #[error("durations must be positive and finite (hold {hold_s}, gap {gap_s})")]
    BadDuration { hold_s: f64, gap_s: f64 },
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("noise parameters must be non-negative and finite")]
    BadNoise,
    #[error("profile is missing a state for {0}")]
    MissingState(GestureClass),
    #[error(transparent)]
    Impedance(#[from] ImpedanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Nominal contact impedance per gesture for the dominant hand (both hands
/// for Boredom). Lower resistance means a larger contact area.
///
/// The defaults give each gesture a distinct pair of (magnitude, phase)
/// deflections relative to the noise floor of a nominal subject: Boredom
/// drops the magnitude by about 60 σ with the phase falling, MouthGuard by
/// 30 σ with the phase rising, Forgetfulness by 25 σ with the phase flat,
/// MakingDecision and Interested move mostly the phase (down and up), and
/// PinchNoseBridge stays within a third of σ of the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactTable {
    pub mouth_guard: ComplexImpedance,
    pub pinch_nose_bridge: ComplexImpedance,
    pub boredom: ComplexImpedance,
    pub interested: ComplexImpedance,
    pub forgetfulness: ComplexImpedance,
    pub making_decision: ComplexImpedance,
}

impl Default for ContactTable {
    fn default() -> Self {
        Self {
            boredom: ComplexImpedance::new(280.0, -260.0),
            mouth_guard: ComplexImpedance::new(550.0, 580.0),
            forgetfulness: ComplexImpedance::new(1200.0, -40.0),
            making_decision: ComplexImpedance::new(200.0, -3300.0),
            interested: ComplexImpedance::new(200.0, 3300.0),
            pinch_nose_bridge: ComplexImpedance::new(166_000.0, -6600.0),
        }
    }
}

impl ContactTable {
    pub fn get(&self, g: GestureClass) -> Option<ComplexImpedance> {
        Some(match g {
            GestureClass::Null => return None,
            GestureClass::MouthGuard => self.mouth_guard,
            GestureClass::PinchNoseBridge => self.pinch_nose_bridge,
            GestureClass::Boredom => self.boredom,
            GestureClass::Interested => self.interested,
            GestureClass::Forgetfulness => self.forgetfulness,
            GestureClass::MakingDecision => self.making_decision,
        })
    }
}

/// Ranges subject parameters are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileRanges {
    pub trunk_head_resistance: (f64, f64),
    pub arm_resistance: (f64, f64),
    pub segment_reactance: (f64, f64),
    /// Whole-subject multiplier on every contact impedance.
    pub subject_contact_scale: (f64, f64),
    /// Additional independent multiplier per gesture.
    pub gesture_contact_scale: (f64, f64),
    pub contacts: ContactTable,
}

impl Default for ProfileRanges {
    fn default() -> Self {
        Self {
            trunk_head_resistance: (400.0, 600.0),
            arm_resistance: (250.0, 350.0),
            segment_reactance: (-30.0, -10.0),
            subject_contact_scale: (0.8, 1.25),
            gesture_contact_scale: (0.9, 1.1),
            contacts: ContactTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: u32,
    pub network: BodyNetwork,
    /// Indexed by gesture code; entry 0 is the Null (no contact) state.
    pub per_gesture_contacts: Vec<GestureState>,
    pub dominant_side: Side,
}

impl SubjectProfile {
    /// The un-randomized default subject: trunk-head 500 Ω, arms 300 Ω,
    /// resting reactance -20 Ω, nominal contacts, right-handed.
    pub fn nominal(subject_id: u32) -> Self {
        let seg = |r| ComplexImpedance::new(r, -20.0);
        let network = BodyNetwork { z_trunk_head: seg(500.0), z_arm_left: seg(300.0), z_arm_right: seg(300.0) };
        let contacts = ContactTable::default();
        Self {
            subject_id,
            network,
            per_gesture_contacts: build_states(&contacts, Side::Right, |_| 1.0),
            dominant_side: Side::Right,
        }
    }

    pub fn state(&self, g: GestureClass) -> Result<&GestureState, SimError> {
        self.per_gesture_contacts
            .get(g.index())
            .filter(|s| s.gesture == g)
            .ok_or(SimError::MissingState(g))
    }

    pub fn baseline(&self) -> ComplexImpedance {
        self.network.z_trunk_head
    }

    /// Noise-free shoulder impedance for each class, indexed by code.
    pub fn class_impedances(&self) -> Result<Vec<ComplexImpedance>, SimError> {
        GestureClass::ALL
            .iter()
            .map(|&g| Ok(shoulder_impedance(&self.network, self.state(g)?)?))
            .collect()
    }

    /// Effective contact impedance magnitude of a gesture: the single closed
    /// contact, or both contacts combined in parallel.
    pub fn effective_contact(&self, g: GestureClass) -> Result<f64, SimError> {
        let s = self.state(g)?;
        let z = crate::impedance::parallel(s.contact_left, s.contact_right)?;
        Ok(z.closed().map_or(f64::INFINITY, |z| z.magnitude()))
    }
}

fn build_states(contacts: &ContactTable, side: Side, mut scale: impl FnMut(GestureClass) -> f64) -> Vec<GestureState> {
    GestureClass::ALL
        .iter()
        .map(|&g| match contacts.get(g) {
            None => GestureState::null(),
            Some(z) => {
                let c = Branch::Closed(z.scale(scale(g)));
                let (left, right) = match (g, side) {
                    (GestureClass::Boredom, _) => (c, c),
                    (_, Side::Left) => (c, Branch::Open),
                    (_, Side::Right) => (Branch::Open, c),
                };
                GestureState { gesture: g, contact_left: left, contact_right: right }
            }
        })
        .collect()
}

fn uniform(rng: &mut Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws a subject deterministically from `seed`.
pub fn generate_subject(subject_id: u32, seed: u64, ranges: &ProfileRanges) -> Result<SubjectProfile, SimError> {
    let mut rng = seed::rng(seed);
    let mut segment = |r_range| {
        let r = uniform(&mut rng, r_range);
        let x = uniform(&mut rng, ranges.segment_reactance);
        ComplexImpedance::new(r, x)
    };
    let z_trunk_head = segment(ranges.trunk_head_resistance);
    let z_arm_left = segment(ranges.arm_resistance);
    let z_arm_right = segment(ranges.arm_resistance);
    let network = BodyNetwork::new(z_trunk_head, z_arm_left, z_arm_right)?;

    let dominant_side = if rng.random_bool(0.5) { Side::Left } else { Side::Right };
    let subject_scale = uniform(&mut rng, ranges.subject_contact_scale);
    let per_gesture: Vec<f64> = (0..GestureClass::COUNT).map(|_| uniform(&mut rng, ranges.gesture_contact_scale)).collect();
    let per_gesture_contacts =
        build_states(&ranges.contacts, dominant_side, |g| subject_scale * per_gesture[g.index()]);
    for s in &per_gesture_contacts {
        s.validate()?;
    }
    Ok(SubjectProfile { subject_id, network, per_gesture_contacts, dominant_side })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptSegment {
    pub gesture: GestureClass,
    /// Null time preceding the hold.
    pub gap_before_s: f64,
    pub hold_s: f64,
}

/// Ordered gesture holds, each preceded by a Null gap, closed by a final gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScript {
    pub segments: Vec<ScriptSegment>,
    pub final_gap_s: f64,
}

impl SessionScript {
    pub fn total_seconds(&self) -> f64 {
        self.segments.iter().map(|s| s.gap_before_s + s.hold_s).sum::<f64>() + self.final_gap_s
    }

    /// A script containing only Null time.
    pub fn idle(seconds: f64) -> Self {
        Self { segments: Vec::new(), final_gap_s: seconds }
    }
}

pub const HOLD_JITTER: f64 = 0.2;

/// `reps_per_gesture` holds of every non-Null class in shuffled order, hold
/// lengths jittered uniformly within ±20 %, separated by `gap_s` of Null.
pub fn build_script(reps_per_gesture: usize, hold_s: f64, gap_s: f64, seed: u64) -> Result<SessionScript, SimError> {
    if reps_per_gesture == 0 {
        return Err(SimError::NoRepetitions);
    }
    if !(hold_s.is_finite() && hold_s > 0.0 && gap_s.is_finite() && gap_s > 0.0) {
        return Err(SimError::BadDuration { hold_s, gap_s });
    }
    let mut rng = seed::rng(seed);
    let mut order: Vec<GestureClass> =
        GestureClass::GESTURES.iter().flat_map(|&g| std::iter::repeat_n(g, reps_per_gesture)).collect();
    order.shuffle(&mut rng);
    let segments = order
        .into_iter()
        .map(|gesture| {
            let jitter = rng.random_range(-HOLD_JITTER..=HOLD_JITTER);
            ScriptSegment { gesture, gap_before_s: gap_s, hold_s: hold_s * (1.0 + jitter) }
        })
        .collect();
    Ok(SessionScript { segments, final_gap_s: gap_s })
}

/// Relative noise settings; resolved to ohms against a subject's baseline by
/// [`NoiseModel::for_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// White magnitude noise as a fraction of baseline magnitude.
    pub white_rel: f64,
    /// Random-walk drift step as a fraction of baseline magnitude.
    pub drift_rel: f64,
    pub transition_ramp_s: f64,
    /// Per-repetition contact-impedance variation, fraction of nominal.
    pub contact_jitter_rel: f64,
    /// Phase noise relative to the angle subtended by the magnitude noise
    /// (`white_sigma / |Z|` radians).
    pub phase_noise_scale: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { white_rel: 0.01, drift_rel: 0.0005, transition_ramp_s: 0.3, contact_jitter_rel: 0.15, phase_noise_scale: 1.0 }
    }
}

impl NoiseSpec {
    pub fn zero() -> Self {
        Self { white_rel: 0.0, drift_rel: 0.0, transition_ramp_s: 0.0, contact_jitter_rel: 0.0, phase_noise_scale: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Ohms.
    pub white_sigma: f64,
    /// Ohms per sample.
    pub drift_step_sigma: f64,
    /// Seconds of linear ramp between contact topologies.
    pub transition_ramp: f64,
    /// Relative (not ohms): contact impedance is scaled by `1 + N(0, σ)`.
    pub contact_jitter_sigma: f64,
    pub phase_sigma_deg: f64,
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self { white_sigma: 0.0, drift_step_sigma: 0.0, transition_ramp: 0.0, contact_jitter_sigma: 0.0, phase_sigma_deg: 0.0 }
    }

    pub fn for_profile(spec: &NoiseSpec, profile: &SubjectProfile) -> Self {
        let base = profile.baseline().magnitude();
        let white_sigma = spec.white_rel * base;
        Self {
            white_sigma,
            drift_step_sigma: spec.drift_rel * base,
            transition_ramp: spec.transition_ramp_s,
            contact_jitter_sigma: spec.contact_jitter_rel,
            phase_sigma_deg: spec.phase_noise_scale * (white_sigma / base).to_degrees(),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let fields = [self.white_sigma, self.drift_step_sigma, self.transition_ramp, self.contact_jitter_sigma, self.phase_sigma_deg];
        if fields.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(SimError::BadNoise)
        }
    }
}

/// One hold on the timeline, with its ramps clipped to the adjacent gaps.
struct Placed {
    on_s: f64,
    off_s: f64,
    ramp_in_s: f64,
    ramp_out_s: f64,
    level: ComplexImpedance,
}

/// Contact jitter never flips a contact to non-physical.
const MIN_CONTACT_SCALE: f64 = 0.2;

/// Renders a script through the impedance model.
///
/// Labels cover exactly the full-level hold intervals; ramps into and out of
/// a hold run inside the neighbouring Null gaps (each ramp is clipped to half
/// of its gap).
pub fn synthesize(
    profile: &SubjectProfile,
    script: &SessionScript,
    noise: &NoiseModel,
    rate: f64,
    seed: u64,
) -> Result<LabeledStream, SimError> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(SimError::BadRate(rate));
    }
    noise.validate()?;
    let mut rng = seed::rng(seed);
    let baseline = shoulder_impedance(&profile.network, profile.state(GestureClass::Null)?)?;

    let mut placed = Vec::with_capacity(script.segments.len());
    let mut cursor = 0.0;
    for (i, seg) in script.segments.iter().enumerate() {
        let jitter: f64 = rng.sample(StandardNormal);
        let scale = (1.0 + noise.contact_jitter_sigma * jitter).max(MIN_CONTACT_SCALE);
        let state = profile.state(seg.gesture)?.with_contact_scale(scale);
        let level = shoulder_impedance(&profile.network, &state)?;
        let next_gap = script.segments.get(i + 1).map_or(script.final_gap_s, |s| s.gap_before_s);
        let on_s = cursor + seg.gap_before_s;
        let off_s = on_s + seg.hold_s;
        placed.push(Placed {
            on_s,
            off_s,
            ramp_in_s: noise.transition_ramp.min(seg.gap_before_s / 2.0),
            ramp_out_s: noise.transition_ramp.min(next_gap / 2.0),
            level,
        });
        cursor = off_s;
    }

    let n = (script.total_seconds() * rate + 1e-9).floor() as usize;
    let mut frames = Vec::with_capacity(n);
    let mut drift = 0.0;
    let mut pi = 0;
    for k in 0..n {
        let t = k as f64 / rate;
        while pi < placed.len() && t >= placed[pi].off_s + placed[pi].ramp_out_s {
            pi += 1;
        }
        let clean = match placed.get(pi) {
            Some(p) if t >= p.on_s - p.ramp_in_s => {
                if t < p.on_s {
                    baseline.lerp(p.level, 1.0 - (p.on_s - t) / p.ramp_in_s)
                } else if t < p.off_s {
                    p.level
                } else {
                    p.level.lerp(baseline, (t - p.off_s) / p.ramp_out_s)
                }
            }
            _ => baseline,
        };
        let polar = to_polar(clean);
        let d: f64 = rng.sample(StandardNormal);
        let w: f64 = rng.sample(StandardNormal);
        let p: f64 = rng.sample(StandardNormal);
        drift += noise.drift_step_sigma * d;
        frames.push(StreamSample {
            timestamp_ms: timestamp_ms(k, rate),
            magnitude: polar.magnitude + drift + noise.white_sigma * w,
            phase_deg: polar.phase_deg + noise.phase_sigma_deg * p,
        });
    }

    let labels = script
        .segments
        .iter()
        .zip(&placed)
        .map(|(seg, p)| LabelInterval { class: seg.gesture, start_ms: seconds_to_ms(p.on_s), end_ms: seconds_to_ms(p.off_s) })
        .collect();
    Ok(LabeledStream { sample_rate: rate, frames, labels })
}

pub fn timestamp_ms(k: usize, rate: f64) -> u32 {
    (k as f64 * 1000.0 / rate).round() as u32
}

fn seconds_to_ms(s: f64) -> u32 {
    (s * 1000.0).round() as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_subject_is_deterministic_and_randomized() {
        let r = ProfileRanges::default();
        assert_eq!(generate_subject(3, 7, &r).unwrap(), generate_subject(3, 7, &r).unwrap());
        let a = generate_subject(1, 1, &r).unwrap();
        let b = generate_subject(1, 2, &r).unwrap();
        assert_ne!(a.network.z_trunk_head, b.network.z_trunk_head);
    }

    #[test]
    fn generated_subjects_keep_contact_ordering() {
        for seed in 0..200 {
            let p = generate_subject(0, seed, &ProfileRanges::default()).unwrap();
            assert_eq!(p.per_gesture_contacts.len(), 7);
            assert_eq!(p.state(GestureClass::Null).unwrap(), &GestureState::null());
            let contacts: Vec<f64> =
                GestureClass::GESTURES.iter().map(|&g| p.effective_contact(g).unwrap()).collect();
            let pinch = p.effective_contact(GestureClass::PinchNoseBridge).unwrap();
            let boredom = p.effective_contact(GestureClass::Boredom).unwrap();
            assert!(contacts.iter().all(|&c| c <= pinch && c >= boredom), "seed {seed}: {contacts:?}");

            let z = p.class_impedances().unwrap();
            let base = z[0].magnitude();
            let delta = |g: GestureClass| base - z[g.index()].magnitude();
            for g in GestureClass::GESTURES {
                assert!(delta(GestureClass::Boredom) >= delta(g));
                assert!(delta(GestureClass::PinchNoseBridge) <= delta(g));
            }
        }
    }

    #[test]
    fn build_script_counts_and_jitter() {
        let s = build_script(20, 2.0, 1.5, 11).unwrap();
        assert_eq!(s.segments.len(), 120);
        for g in GestureClass::GESTURES {
            assert_eq!(s.segments.iter().filter(|x| x.gesture == g).count(), 20);
        }
        assert!(s.segments.iter().all(|x| (1.6..=2.4).contains(&x.hold_s)));
        assert!(s.segments.iter().all(|x| !x.gesture.is_null() && x.gap_before_s > 0.0));
        assert!(s.final_gap_s > 0.0);

        let one = build_script(1, 2.0, 1.0, 3).unwrap();
        let mut classes: Vec<_> = one.segments.iter().map(|x| x.gesture).collect();
        classes.sort();
        assert_eq!(classes, GestureClass::GESTURES.to_vec());

        assert_eq!(build_script(0, 2.0, 1.0, 3), Err(SimError::NoRepetitions));
        assert!(build_script(1, 0.0, 1.0, 3).is_err());
    }

    #[test]
    fn null_only_script_is_constant_baseline() {
        let p = SubjectProfile::nominal(0);
        let s = synthesize(&p, &SessionScript::idle(10.0), &NoiseModel::zero(), 20.0, 1).unwrap();
        assert_eq!(s.len(), 200);
        let base = p.baseline().to_polar();
        assert!(s.frames.iter().all(|f| f.magnitude == base.magnitude && f.phase_deg == base.phase_deg));
        assert!(s.labels.is_empty());
    }

    #[test]
    fn frame_count_is_rate_times_duration() {
        let p = SubjectProfile::nominal(0);
        let script = SessionScript {
            segments: vec![
                ScriptSegment { gesture: GestureClass::Boredom, gap_before_s: 10.0, hold_s: 20.0 },
                ScriptSegment { gesture: GestureClass::MouthGuard, gap_before_s: 10.0, hold_s: 10.0 },
            ],
            final_gap_s: 10.0,
        };
        let s = synthesize(&p, &script, &NoiseModel::zero(), 20.0, 1).unwrap();
        assert_eq!(s.len(), 1200);
        assert_eq!(s.frames[1].timestamp_ms, 50);
        s.validate().unwrap();
        let odd = synthesize(&p, &SessionScript::idle(1.03), &NoiseModel::zero(), 20.0, 1).unwrap();
        assert_eq!(odd.len(), 20);
    }

    #[test]
    fn labels_cover_holds_at_model_level() {
        let p = SubjectProfile::nominal(0);
        let script = build_script(2, 2.0, 1.5, 5).unwrap();
        let noise = NoiseModel { transition_ramp: 0.3, ..NoiseModel::zero() };
        let s = synthesize(&p, &script, &noise, 20.0, 9).unwrap();
        s.validate().unwrap();
        let z = p.class_impedances().unwrap();
        let per_sample = s.sample_labels();
        for (f, g) in s.frames.iter().zip(&per_sample) {
            if !g.is_null() {
                assert!((f.magnitude - z[g.index()].magnitude()).abs() < 1e-9);
            }
        }
        assert_eq!(s.labels.len(), 12);
    }

    #[test]
    fn synthesize_is_deterministic_per_seed() {
        let p = generate_subject(2, 99, &ProfileRanges::default()).unwrap();
        let script = build_script(3, 2.0, 1.5, 4).unwrap();
        let noise = NoiseModel::for_profile(&NoiseSpec::default(), &p);
        let a = synthesize(&p, &script, &noise, 20.0, 42).unwrap();
        let b = synthesize(&p, &script, &noise, 20.0, 42).unwrap();
        let c = synthesize(&p, &script, &noise, 20.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.frames, c.frames);
    }

    #[test]
    fn rejects_bad_rate_and_noise() {
        let p = SubjectProfile::nominal(0);
        let s = SessionScript::idle(1.0);
        assert_eq!(synthesize(&p, &s, &NoiseModel::zero(), 0.0, 1), Err(SimError::BadRate(0.0)));
        let bad = NoiseModel { white_sigma: -1.0, ..NoiseModel::zero() };
        assert_eq!(synthesize(&p, &s, &bad, 20.0, 1), Err(SimError::BadNoise));
    }
}
