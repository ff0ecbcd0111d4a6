//! A simulated study: several subjects, each recorded over several sessions.

use serde::{Deserialize, Serialize};

use crate::seed;
use crate::simulator::{build_script, generate_subject, synthesize, NoiseModel, NoiseSpec, ProfileRanges, SimError, SubjectProfile};
use crate::stream::LabeledStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub seed: u64,
    pub subjects: u32,
    pub sessions: u32,
    pub reps_per_gesture: usize,
    pub hold_s: f64,
    pub gap_s: f64,
    pub sample_rate: f64,
    pub noise: NoiseSpec,
    pub ranges: ProfileRanges,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            subjects: 8,
            sessions: 4,
            reps_per_gesture: 20,
            hold_s: 2.0,
            gap_s: 3.0,
            sample_rate: 20.0,
            noise: NoiseSpec::default(),
            ranges: ProfileRanges::default(),
        }
    }
}

const PROFILE: u64 = 0;
const SCRIPT: u64 = 1;
const SIGNAL: u64 = 2;

impl CorpusConfig {
    /// Subjects are numbered from 1.
    pub fn subject(&self, subject_id: u32) -> Result<SubjectProfile, SimError> {
        generate_subject(subject_id, self.profile_seed(subject_id), &self.ranges)
    }

    pub fn profile_seed(&self, subject_id: u32) -> u64 {
        seed::derive(self.seed, &[PROFILE, u64::from(subject_id)])
    }

    /// `(script seed, signal seed)` of one session.
    pub fn session_seeds(&self, subject_id: u32, session_id: u32) -> (u64, u64) {
        let path = [u64::from(subject_id), u64::from(session_id)];
        (seed::derive(self.seed, &[SCRIPT, path[0], path[1]]), seed::derive(self.seed, &[SIGNAL, path[0], path[1]]))
    }

    /// Sessions are numbered from 1. Every (subject, session) pair draws from
    /// its own seeds, so any session can be regenerated on its own.
    pub fn session(&self, profile: &SubjectProfile, session_id: u32) -> Result<LabeledStream, SimError> {
        let (script_seed, signal_seed) = self.session_seeds(profile.subject_id, session_id);
        let script = build_script(self.reps_per_gesture, self.hold_s, self.gap_s, script_seed)?;
        let noise = NoiseModel::for_profile(&self.noise, profile);
        synthesize(profile, &script, &noise, self.sample_rate, signal_seed)
    }

    pub fn subject_sessions(&self, subject_id: u32) -> Result<Vec<LabeledStream>, SimError> {
        let profile = self.subject(subject_id)?;
        (1..=self.sessions).map(|s| self.session(&profile, s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sessions_are_independent_and_reproducible() {
        let cfg = CorpusConfig { reps_per_gesture: 2, ..Default::default() };
        let profile = cfg.subject(3).unwrap();
        let a = cfg.session(&profile, 2).unwrap();
        assert_eq!(a, cfg.session(&profile, 2).unwrap());
        assert_ne!(a, cfg.session(&profile, 1).unwrap());
        assert_eq!(a.labels.len(), 12);
    }
}
