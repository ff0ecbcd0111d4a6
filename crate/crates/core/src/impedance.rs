//! Complex impedance arithmetic and the shoulder-to-shoulder body network.
//!
//! With no hand-face contact the only current path between the shoulder
//! electrodes runs through the trunk and head. Touching the face closes an
//! extra path (shoulder -> arm -> hand -> face -> head) that sits in parallel
//! with the baseline, so any contact lowers the measured magnitude. The size
//! of the drop is set by the contact impedance, which falls as the contact
//! area grows.

use std::ops::{Add, Div, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::gesture::GestureClass;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImpedanceError {
    #[error("degenerate network: branch impedances sum to zero")]
    Degenerate,
    #[error("non-physical segment impedance {0:?}: resistance must be positive and finite")]
    NonPhysical(ComplexImpedance),
    #[error("gesture state for {gesture} violates its contact topology")]
    InvalidState { gesture: GestureClass },
}

/// Resistance + j·reactance, in ohms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexImpedance {
    pub resistance: f64,
    pub reactance: f64,
}

impl ComplexImpedance {
    pub const ZERO: ComplexImpedance = ComplexImpedance { resistance: 0.0, reactance: 0.0 };

    pub const fn new(resistance: f64, reactance: f64) -> Self {
        Self { resistance, reactance }
    }

    pub const fn resistive(resistance: f64) -> Self {
        Self { resistance, reactance: 0.0 }
    }

    pub fn magnitude(self) -> f64 {
        self.resistance.hypot(self.reactance)
    }

    pub fn is_finite(self) -> bool {
        self.resistance.is_finite() && self.reactance.is_finite()
    }

    /// Positive, finite resistance; the requirement for a body segment.
    pub fn is_physical(self) -> bool {
        self.is_finite() && self.resistance > 0.0
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.resistance * k, self.reactance * k)
    }

    pub fn to_polar(self) -> Polar {
        to_polar(self)
    }

    /// Linear interpolation between two impedances, `t` in [0, 1].
    pub fn lerp(self, to: Self, t: f64) -> Self {
        self + (to - self).scale(t)
    }
}

impl Add for ComplexImpedance {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.resistance + o.resistance, self.reactance + o.reactance)
    }
}

impl Sub for ComplexImpedance {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.resistance - o.resistance, self.reactance - o.reactance)
    }
}

impl Mul for ComplexImpedance {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.resistance * o.resistance - self.reactance * o.reactance,
            self.resistance * o.reactance + self.reactance * o.resistance,
        )
    }
}

impl Div for ComplexImpedance {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let den = o.resistance * o.resistance + o.reactance * o.reactance;
        Self::new(
            (self.resistance * o.resistance + self.reactance * o.reactance) / den,
            (self.reactance * o.resistance - self.resistance * o.reactance) / den,
        )
    }
}

/// A network branch: either a finite impedance or an open circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Open,
    Closed(ComplexImpedance),
}

impl Branch {
    pub fn is_open(self) -> bool {
        matches!(self, Branch::Open)
    }

    pub fn closed(self) -> Option<ComplexImpedance> {
        match self {
            Branch::Open => None,
            Branch::Closed(z) => Some(z),
        }
    }
}

impl From<ComplexImpedance> for Branch {
    fn from(z: ComplexImpedance) -> Self {
        Branch::Closed(z)
    }
}

/// Series composition. Anything in series with an open circuit is open.
pub fn series(a: Branch, b: Branch) -> Branch {
    match (a, b) {
        (Branch::Closed(a), Branch::Closed(b)) => Branch::Closed(a + b),
        _ => Branch::Open,
    }
}

/// Parallel composition. An open branch carries no current, so the other
/// operand passes through unchanged; two open branches stay open.
pub fn parallel(a: Branch, b: Branch) -> Result<Branch, ImpedanceError> {
    match (a, b) {
        (Branch::Open, other) | (other, Branch::Open) => Ok(other),
        (Branch::Closed(a), Branch::Closed(b)) => parallel_closed(a, b).map(Branch::Closed),
    }
}

/// `a·b / (a + b)` for two finite impedances.
pub fn parallel_closed(a: ComplexImpedance, b: ComplexImpedance) -> Result<ComplexImpedance, ImpedanceError> {
    let sum = a + b;
    if sum.resistance == 0.0 && sum.reactance == 0.0 {
        return Err(ImpedanceError::Degenerate);
    }
    Ok((a * b) / sum)
}

/// Segment impedances of the shoulder-to-shoulder measurement path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyNetwork {
    /// Baseline path between the shoulder electrodes through trunk and head.
    pub z_trunk_head: ComplexImpedance,
    /// Shoulder-to-hand segment, left arm.
    pub z_arm_left: ComplexImpedance,
    /// Shoulder-to-hand segment, right arm.
    pub z_arm_right: ComplexImpedance,
}

impl BodyNetwork {
    pub fn new(
        z_trunk_head: ComplexImpedance,
        z_arm_left: ComplexImpedance,
        z_arm_right: ComplexImpedance,
    ) -> Result<Self, ImpedanceError> {
        for z in [z_trunk_head, z_arm_left, z_arm_right] {
            if !z.is_physical() {
                return Err(ImpedanceError::NonPhysical(z));
            }
        }
        Ok(Self { z_trunk_head, z_arm_left, z_arm_right })
    }
}

/// Contact topology induced by a gesture: hand-to-face contact impedance per
/// arm, `Open` when that hand is not touching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureState {
    pub gesture: GestureClass,
    pub contact_left: Branch,
    pub contact_right: Branch,
}

impl GestureState {
    pub fn new(gesture: GestureClass, contact_left: Branch, contact_right: Branch) -> Result<Self, ImpedanceError> {
        let state = Self { gesture, contact_left, contact_right };
        state.validate()?;
        Ok(state)
    }

    pub fn null() -> Self {
        Self { gesture: GestureClass::Null, contact_left: Branch::Open, contact_right: Branch::Open }
    }

    /// Null has no contact, Boredom touches with both hands, every other
    /// gesture closes at least one path. Closed contacts must be physical.
    pub fn validate(&self) -> Result<(), ImpedanceError> {
        let closed = [self.contact_left, self.contact_right]
            .iter()
            .filter_map(|b| b.closed())
            .collect::<Vec<_>>();
        if closed.iter().any(|z| !z.is_physical()) {
            return Err(ImpedanceError::InvalidState { gesture: self.gesture });
        }
        let ok = match self.gesture {
            GestureClass::Null => closed.is_empty(),
            GestureClass::Boredom => closed.len() == 2,
            _ => !closed.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(ImpedanceError::InvalidState { gesture: self.gesture })
        }
    }

    /// Same topology with every closed contact scaled by `k`.
    pub fn with_contact_scale(&self, k: f64) -> Self {
        let scale = |b: Branch| match b {
            Branch::Open => Branch::Open,
            Branch::Closed(z) => Branch::Closed(z.scale(k)),
        };
        Self { gesture: self.gesture, contact_left: scale(self.contact_left), contact_right: scale(self.contact_right) }
    }
}

/// Impedance seen between the shoulder electrodes for a given contact state.
///
/// Each touching arm contributes `series(z_arm, contact)` from the shoulder
/// into the head node, in parallel with the trunk-head baseline.
pub fn shoulder_impedance(net: &BodyNetwork, state: &GestureState) -> Result<ComplexImpedance, ImpedanceError> {
    let left = series(Branch::Closed(net.z_arm_left), state.contact_left);
    let right = series(Branch::Closed(net.z_arm_right), state.contact_right);
    let z = parallel(parallel(Branch::Closed(net.z_trunk_head), left)?, right)?;
    // The baseline is always closed, so the result is too.
    Ok(z.closed().unwrap_or(net.z_trunk_head))
}

/// Magnitude in ohms and phase in degrees, phase in (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    pub magnitude: f64,
    pub phase_deg: f64,
}

pub fn to_polar(z: ComplexImpedance) -> Polar {
    let magnitude = z.magnitude();
    let mut phase_deg = z.reactance.atan2(z.resistance).to_degrees();
    if phase_deg <= -180.0 {
        phase_deg += 360.0;
    }
    Polar { magnitude, phase_deg }
}

pub fn from_polar(p: Polar) -> ComplexImpedance {
    let (s, c) = p.phase_deg.to_radians().sin_cos();
    ComplexImpedance::new(p.magnitude * c, p.magnitude * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(r: f64, x: f64) -> ComplexImpedance {
        ComplexImpedance::new(r, x)
    }

    fn close(a: ComplexImpedance, b: ComplexImpedance, tol: f64) -> bool {
        (a.resistance - b.resistance).abs() <= tol && (a.reactance - b.reactance).abs() <= tol
    }

    #[test]
    fn series_examples() {
        assert_eq!(series(z(100., 0.).into(), z(50., 0.).into()), Branch::Closed(z(150., 0.)));
        let a = z(123.4, -5.6);
        assert_eq!(series(a.into(), ComplexImpedance::ZERO.into()), Branch::Closed(a));
        assert_eq!(series(z(100., 20.).into(), z(50., -5.).into()), Branch::Closed(z(150., 15.)));
        assert_eq!(series(a.into(), Branch::Open), Branch::Open);
    }

    #[test]
    fn parallel_examples() {
        let a = z(321.0, -12.5);
        assert_eq!(parallel(a.into(), Branch::Open).unwrap(), Branch::Closed(a));
        assert_eq!(parallel(Branch::Open, a.into()).unwrap(), Branch::Closed(a));
        let half = parallel_closed(a, a).unwrap();
        assert!(close(half, a.scale(0.5), 1e-12));
        let p = parallel_closed(z(100., 0.), z(50., 0.)).unwrap();
        assert!(close(p, z(100.0 * 50.0 / 150.0, 0.0), 1e-12));
    }

    #[test]
    fn parallel_degenerate_network() {
        assert_eq!(parallel_closed(z(10., 5.), z(-10., -5.)), Err(ImpedanceError::Degenerate));
        assert_eq!(parallel(Branch::Open, Branch::Open).unwrap(), Branch::Open);
    }

    #[test]
    fn shoulder_impedance_examples() {
        let net = BodyNetwork::new(z(500., 0.), z(300., 0.), z(300., 0.)).unwrap();
        assert_eq!(shoulder_impedance(&net, &GestureState::null()).unwrap(), net.z_trunk_head);

        let one = GestureState::new(GestureClass::MouthGuard, Branch::Open, z(100., 0.).into()).unwrap();
        let got = shoulder_impedance(&net, &one).unwrap();
        assert!(close(got, z(500.0 * 400.0 / 900.0, 0.0), 1e-12), "{got:?}");

        let both = GestureState::new(GestureClass::Boredom, z(100., 0.).into(), z(100., 0.).into()).unwrap();
        let got = shoulder_impedance(&net, &both).unwrap();
        let expected = 1.0 / (1.0 / 500.0 + 2.0 / 400.0);
        assert!(close(got, z(expected, 0.0), 1e-12), "{got:?}");
        assert!((expected - 142.857_142_857).abs() < 1e-6);
    }

    #[test]
    fn gesture_state_invariants() {
        let c: Branch = z(100., -3.).into();
        assert!(GestureState::new(GestureClass::Null, c, Branch::Open).is_err());
        assert!(GestureState::new(GestureClass::Boredom, c, Branch::Open).is_err());
        assert!(GestureState::new(GestureClass::PinchNoseBridge, Branch::Open, Branch::Open).is_err());
        assert!(GestureState::new(GestureClass::PinchNoseBridge, Branch::Open, z(-1., 0.).into()).is_err());
        assert!(GestureState::new(GestureClass::Boredom, c, c).is_ok());
    }

    #[test]
    fn body_network_rejects_non_physical_segments() {
        let ok = z(300., -20.);
        assert!(BodyNetwork::new(z(0., -20.), ok, ok).is_err());
        assert!(BodyNetwork::new(ok, z(f64::NAN, 0.), ok).is_err());
        assert!(BodyNetwork::new(ok, ok, ok).is_ok());
    }

    #[test]
    fn polar_examples() {
        let p = to_polar(z(5., 0.));
        assert_eq!((p.magnitude, p.phase_deg), (5.0, 0.0));
        let p = to_polar(z(0., 5.));
        assert!((p.magnitude - 5.0).abs() < 1e-15 && (p.phase_deg - 90.0).abs() < 1e-12);
        let p = to_polar(z(3., 4.));
        assert!((p.magnitude - 5.0).abs() < 1e-15);
        assert!((p.phase_deg - 53.130_102_354_155_98).abs() < 1e-10);
        // Negative real axis maps to +180, never -180.
        assert_eq!(to_polar(z(-2., -0.0)).phase_deg, 180.0);
    }
}
