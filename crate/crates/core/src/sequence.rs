//! System and sequence parameters and their rendering into timed segments.
//!
//! One repetition of the protocol is
//!
//! ```text
//! DDX, wait t_S, DDY, wait t_W, DDX, wait t_S, DDY, wait t_C
//! ```
//!
//! where `DDX = (pi/2)_y [tau/2, pi_-x, tau/2]^Np (pi/2)_y` and
//! `DDY = (pi/2)_x [tau/2, pi_y, tau/2]^Np (pi/2)_x`. The whole cycle
//! repeats the unit `n_r` times before the electron is read out.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeexpr::TimeValue;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("invalid parameters: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("time expression: {0}")]
    TimeExpr(String),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// One failed parameter check.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositive(&'static str),
    Negative(&'static str),
    NotFinite(&'static str),
    Zero(&'static str),
    PulseLongerThanTau { tau: f64, tau_pi: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositive(n) => write!(f, "{n} must be positive"),
            Violation::Negative(n) => write!(f, "{n} must not be negative"),
            Violation::NotFinite(n) => write!(f, "{n} must be finite"),
            Violation::Zero(n) => write!(f, "{n} must be at least 1"),
            Violation::PulseLongerThanTau { tau, tau_pi } => write!(
                f,
                "pi pulse of length {tau_pi} does not fit in interval tau = {tau}"
            ),
        }
    }
}

/// Static parameters of the electron-nucleus pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Nuclear Larmor frequency.
    pub omega: f64,
    /// Perpendicular hyperfine coupling.
    pub a_perp: f64,
    /// Parallel hyperfine coupling.
    #[serde(default)]
    pub a_z: f64,
}

impl SystemParams {
    pub fn new(omega: f64, a_perp: f64, a_z: f64) -> Self {
        Self { omega, a_perp, a_z }
    }

    pub fn validate(&self) -> Result<(), SequenceError> {
        let mut v = Vec::new();
        if !self.omega.is_finite() {
            v.push(Violation::NotFinite("omega"));
        } else if self.omega <= 0.0 {
            v.push(Violation::NonPositive("omega"));
        }
        if !self.a_perp.is_finite() {
            v.push(Violation::NotFinite("a_perp"));
        } else if self.a_perp < 0.0 {
            v.push(Violation::Negative("a_perp"));
        }
        if !self.a_z.is_finite() {
            v.push(Violation::NotFinite("a_z"));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(SequenceError::Invalid(v))
        }
    }
}

/// How microwave pulses are modeled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseModel {
    /// Instantaneous rotations.
    #[default]
    Ideal,
    /// Rectangular pulses of Rabi frequency `pi / tau_pi`, applied on top
    /// of the hyperfine Hamiltonian. A pi pulse lasts `tau_pi`.
    Finite { tau_pi: f64 },
}

impl PulseModel {
    pub fn tau_pi(&self) -> f64 {
        match self {
            PulseModel::Ideal => 0.0,
            PulseModel::Finite { tau_pi } => *tau_pi,
        }
    }

    /// `Ideal` for zero pulse length, `Finite` otherwise.
    pub fn from_tau_pi(tau_pi: f64) -> Self {
        if tau_pi == 0.0 {
            PulseModel::Ideal
        } else {
            PulseModel::Finite { tau_pi }
        }
    }
}

/// Timing parameters of one sequence. All times are absolute (same units
/// as `1/omega`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    /// Number of pi pulses per decoupling block.
    pub n_p: u32,
    /// Spacing between pi pulses.
    pub tau: f64,
    pub t_s: f64,
    pub t_w: f64,
    pub t_c: f64,
    /// Repetitions of the unit per readout cycle.
    pub n_r: u32,
    #[serde(default)]
    pub pulse_model: PulseModel,
}

impl SequenceParams {
    /// Builds a parameter set. With a single repetition the trailing wait
    /// `t_c` has no role and is set to zero.
    pub fn new(n_p: u32, tau: f64, t_s: f64, t_w: f64, t_c: f64, n_r: u32) -> Self {
        let t_c = if n_r == 1 { 0.0 } else { t_c };
        Self { n_p, tau, t_s, t_w, t_c, n_r, pulse_model: PulseModel::Ideal }
    }

    pub fn with_pulse_model(mut self, model: PulseModel) -> Self {
        self.pulse_model = model;
        self
    }

    /// Applies the single-repetition rule for `t_c`.
    pub fn normalized(mut self) -> Self {
        if self.n_r == 1 {
            self.t_c = 0.0;
        }
        self
    }

    /// Nominal length of one repetition, `2 t_S + t_W + 4 N_p tau + t_C`,
    /// with pulses counted as instantaneous.
    pub fn period(&self) -> f64 {
        2.0 * self.t_s + self.t_w + 4.0 * self.n_p as f64 * self.tau + self.t_c
    }

    /// Nominal length of the full readout cycle.
    pub fn nominal_cycle(&self) -> f64 {
        self.n_r as f64 * self.period()
    }

    /// Cycle length including pulse widths. Pi pulses sit inside their
    /// intervals; each unit adds eight half-pi pulses of `tau_pi / 2`.
    pub fn actual_cycle(&self) -> f64 {
        self.nominal_cycle() + self.n_r as f64 * 4.0 * self.pulse_model.tau_pi()
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.n_p == 0 {
            v.push(Violation::Zero("n_p"));
        }
        if self.n_r == 0 {
            v.push(Violation::Zero("n_r"));
        }
        for (name, x) in [("tau", self.tau), ("t_s", self.t_s), ("t_w", self.t_w), ("t_c", self.t_c)] {
            if !x.is_finite() {
                v.push(Violation::NotFinite(name));
            } else if x < 0.0 {
                v.push(Violation::Negative(name));
            }
        }
        if let PulseModel::Finite { tau_pi } = self.pulse_model {
            if !tau_pi.is_finite() {
                v.push(Violation::NotFinite("tau_pi"));
            } else if tau_pi <= 0.0 {
                v.push(Violation::NonPositive("tau_pi"));
            } else if self.tau.is_finite() && self.tau < tau_pi {
                v.push(Violation::PulseLongerThanTau { tau: self.tau, tau_pi });
            }
        }
        v
    }

    pub fn validate(&self) -> Result<(), SequenceError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(SequenceError::Invalid(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl Axis {
    /// Unit vector components `(n_x, n_y)`.
    pub fn components(&self) -> (f64, f64) {
        match self {
            Axis::PlusX => (1.0, 0.0),
            Axis::MinusX => (-1.0, 0.0),
            Axis::PlusY => (0.0, 1.0),
            Axis::MinusY => (0.0, -1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseAngle {
    Half,
    Full,
}

impl PulseAngle {
    pub fn radians(&self) -> f64 {
        match self {
            PulseAngle::Half => std::f64::consts::FRAC_PI_2,
            PulseAngle::Full => std::f64::consts::PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentKind {
    /// Free evolution under the hyperfine Hamiltonian.
    FreeHyperfine,
    /// Wait during which only nuclear Larmor precession acts.
    FreeNuclear,
    /// Rotation of the electron about `axis` by `angle`.
    Pulse { axis: Axis, angle: PulseAngle },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
}

/// Ordered segments of one readout cycle, earliest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timeline {
    pub segments: Vec<Segment>,
    /// Nominal repetition period `T`.
    pub period: f64,
    pub repetitions: u32,
}

impl Timeline {
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn nominal_duration(&self) -> f64 {
        self.repetitions as f64 * self.period
    }

    pub fn count<F: Fn(&SegmentKind) -> bool>(&self, pred: F) -> usize {
        self.segments.iter().filter(|s| pred(&s.kind)).count()
    }
}

fn push_block(out: &mut Vec<Segment>, seq: &SequenceParams, half_axis: Axis, pi_axis: Axis) {
    let tau_pi = seq.pulse_model.tau_pi();
    let half = Segment {
        kind: SegmentKind::Pulse { axis: half_axis, angle: PulseAngle::Half },
        duration: tau_pi / 2.0,
    };
    let pi = Segment {
        kind: SegmentKind::Pulse { axis: pi_axis, angle: PulseAngle::Full },
        duration: tau_pi,
    };
    // the pi pulse is centered in its interval of length tau
    let free = Segment { kind: SegmentKind::FreeHyperfine, duration: (seq.tau - tau_pi) / 2.0 };
    out.push(half);
    for _ in 0..seq.n_p {
        out.push(free);
        out.push(pi);
        out.push(free);
    }
    out.push(half);
}

fn wait(t: f64) -> Segment {
    Segment { kind: SegmentKind::FreeNuclear, duration: t }
}

/// Expands the parameters into the timed segments of one readout cycle.
pub fn render_unit(seq: &SequenceParams) -> Result<Timeline, SequenceError> {
    seq.validate()?;
    let per_unit = 4 * (3 * seq.n_p as usize + 2) + 4;
    let mut segments = Vec::with_capacity(per_unit * seq.n_r as usize);
    for _ in 0..seq.n_r {
        push_block(&mut segments, seq, Axis::PlusY, Axis::MinusX);
        segments.push(wait(seq.t_s));
        push_block(&mut segments, seq, Axis::PlusX, Axis::PlusY);
        segments.push(wait(seq.t_w));
        push_block(&mut segments, seq, Axis::PlusY, Axis::MinusX);
        segments.push(wait(seq.t_s));
        push_block(&mut segments, seq, Axis::PlusX, Axis::PlusY);
        segments.push(wait(seq.t_c));
    }
    Ok(Timeline { segments, period: seq.period(), repetitions: seq.n_r })
}

/// Parameters as read from JSON, with times still unresolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub n_p: u32,
    pub tau: TimeValue,
    #[serde(default)]
    pub t_s: TimeValue,
    #[serde(default)]
    pub t_w: TimeValue,
    #[serde(default)]
    pub t_c: TimeValue,
    #[serde(default = "one")]
    pub n_r: u32,
    #[serde(default)]
    pub pulse_model: PulseModelSpec,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseModelSpec {
    #[default]
    Ideal,
    Finite { tau_pi: TimeValue },
}

impl SequenceSpec {
    /// Resolves time expressions against `omega` and applies the
    /// single-repetition rule for `t_c`.
    pub fn resolve(&self, omega: f64) -> Result<SequenceParams, SequenceError> {
        let r = |t: &TimeValue| t.resolve(omega).map_err(SequenceError::TimeExpr);
        let pulse_model = match &self.pulse_model {
            PulseModelSpec::Ideal => PulseModel::Ideal,
            PulseModelSpec::Finite { tau_pi } => PulseModel::Finite { tau_pi: r(tau_pi)? },
        };
        let seq = SequenceParams {
            n_p: self.n_p,
            tau: r(&self.tau)?,
            t_s: r(&self.t_s)?,
            t_w: r(&self.t_w)?,
            t_c: r(&self.t_c)?,
            n_r: self.n_r,
            pulse_model,
        }
        .normalized();
        seq.validate()?;
        Ok(seq)
    }
}

impl From<&SequenceParams> for SequenceSpec {
    fn from(s: &SequenceParams) -> Self {
        Self {
            n_p: s.n_p,
            tau: TimeValue::Absolute(s.tau),
            t_s: TimeValue::Absolute(s.t_s),
            t_w: TimeValue::Absolute(s.t_w),
            t_c: TimeValue::Absolute(s.t_c),
            n_r: s.n_r,
            pulse_model: match s.pulse_model {
                PulseModel::Ideal => PulseModelSpec::Ideal,
                PulseModel::Finite { tau_pi } => {
                    PulseModelSpec::Finite { tau_pi: TimeValue::Absolute(tau_pi) }
                }
            },
        }
    }
}

/// A system plus a sequence, the common input of most commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub system: SystemParams,
    pub sequence: SequenceSpec,
}

impl RunSpec {
    pub fn resolve(&self) -> Result<(SystemParams, SequenceParams), SequenceError> {
        self.system.validate()?;
        let seq = self.sequence.resolve(self.system.omega)?;
        Ok((self.system, seq))
    }
}
