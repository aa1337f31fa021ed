//! Exact timings ("magic" sequences) that fully polarize the nucleus.
//!
//! All times are kept as rationals in units of `pi/omega`. Two families
//! exist. Method I keeps `tau` at a filter resonance and tunes the waits
//! `t_S`, `t_W`, `t_C`. Method II sets all waits to zero and moves `tau`
//! slightly off resonance instead.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use num_rational::Rational64;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::sequence::{PulseModel, SequenceParams};
use crate::timeexpr::render_units;

type Q = Rational64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("n_p must be at least 1")]
    NoPulses,
    #[error("tau_pi = {tau_pi} leaves no room in tau = {tau} with {n_p} pulses")]
    PulseTooLong { tau: f64, tau_pi: f64, n_p: u32 },
    #[error("{0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum Method {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "II")]
    II,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::I => "I",
            Method::II => "II",
        })
    }
}

/// Target polarization, `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(&self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i32(self.value())
    }
}

impl<'de> serde::Deserialize<'de> for Sign {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match i32::deserialize(d)? {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            v => Err(serde::de::Error::custom(format!("sign must be 1 or -1, got {v}"))),
        }
    }
}

/// Which of the two `n_p = 2` resonances Method I uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TwoPulseResonance {
    /// `tau = 4/3 pi/omega`.
    #[default]
    Short,
    /// `tau = 8/3 pi/omega`.
    Long,
}

/// One line of the catalog. Times are rational multiples of `pi/omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagicRow {
    pub method: Method,
    pub sign: Sign,
    pub n_p: u32,
    #[serde(serialize_with = "ser_units")]
    pub tau: Q,
    #[serde(serialize_with = "ser_units")]
    pub t_s: Q,
    #[serde(serialize_with = "ser_units")]
    pub t_w: Q,
    #[serde(serialize_with = "ser_units")]
    pub t_c: Q,
    /// Window half-width in units of `omega / (n_r pi)`.
    #[serde(serialize_with = "ser_ratio")]
    pub gamma_window: Q,
    /// First sideband offset as a fraction of `omega`.
    #[serde(serialize_with = "ser_ratio")]
    pub sideband_fraction: Q,
}

fn ser_units<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&render_units(*q))
}

fn ser_ratio<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&render_ratio(*q))
}

pub fn render_ratio(q: Q) -> String {
    if *q.denom() == 1 {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `p/q` or an integer.
pub fn parse_ratio(s: &str) -> Result<Q, CatalogError> {
    let s = s.trim();
    let bad = || CatalogError::Parse(format!("bad rational {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => Ok(Q::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

impl MagicRow {
    /// `2 t_S + t_W + 4 n_p tau + t_C` in units of `pi/omega`.
    pub fn period_units(&self) -> Q {
        self.t_s * 2 + self.t_w + self.tau * (4 * self.n_p as i64) + self.t_c
    }

    pub fn period_units_f64(&self) -> f64 {
        to_f64(self.period_units())
    }

    pub fn sideband_fraction_f64(&self) -> f64 {
        to_f64(self.sideband_fraction)
    }

    pub fn tau_f64(&self, omega: f64) -> f64 {
        to_f64(self.tau) * PI / omega
    }

    /// Concrete parameters at Larmor frequency `omega`. With one repetition
    /// the trailing wait is dropped.
    pub fn sequence(&self, omega: f64, n_r: u32, pulse_model: PulseModel) -> SequenceParams {
        let t = |q: Q| to_f64(q) * PI / omega;
        SequenceParams::new(self.n_p, t(self.tau), t(self.t_s), t(self.t_w), t(self.t_c), n_r)
            .with_pulse_model(pulse_model)
    }
}

/// Filter resonances of a block with `n_p` pulses, in units of `pi/omega`.
pub fn resonant_tau(n_p: u32) -> Result<Vec<Q>, CatalogError> {
    match n_p {
        0 => Err(CatalogError::NoPulses),
        1 => Ok(vec![Q::from_integer(2)]),
        2 => Ok(vec![Q::new(4, 3), Q::new(8, 3)]),
        _ => Ok(vec![Q::from_integer(1)]),
    }
}

/// Least nonnegative representative of `x` modulo 2.
fn mod2(x: Q) -> Q {
    let two = Q::from_integer(2);
    let k = (x / two).floor();
    x - two * k
}

/// Residue of `n_p tau` (mod 2) that places the rotation axis for `sign`.
///
/// The axis phase is `[(-1)^n_p + 1]/2 pi - omega (t_S + n_p tau)`; it must
/// equal `pi/2` for `+1` and `3pi/2` for `-1`.
fn axis_residue(n_p: u32, sign: Sign) -> Q {
    let parity = if n_p.is_multiple_of(2) { Q::from_integer(1) } else { Q::from_integer(0) };
    let target = match sign {
        Sign::Plus => Q::new(1, 2),
        Sign::Minus => Q::new(3, 2),
    };
    mod2(parity - target)
}

fn finish(method: Method, sign: Sign, n_p: u32, tau: Q, t_s: Q, t_w: Q, t_c: Q) -> MagicRow {
    let mut row = MagicRow {
        method,
        sign,
        n_p,
        tau,
        t_s,
        t_w,
        t_c,
        gamma_window: Q::from_integer(0),
        sideband_fraction: Q::from_integer(0),
    };
    let g = Q::from_integer(4) / row.period_units();
    row.gamma_window = g;
    row.sideband_fraction = g;
    row
}

/// Method I at a chosen resonance: the smallest nonnegative waits with
/// `omega(t_S + n_p tau)` on the axis residue, `omega(t_S + t_W + 2 n_p tau)`
/// an odd multiple of `pi`, and `omega T` a multiple of `2 pi`.
pub fn method_one(sign: Sign, n_p: u32, resonance: TwoPulseResonance) -> Result<MagicRow, CatalogError> {
    let taus = resonant_tau(n_p)?;
    let tau = match (n_p, resonance) {
        (2, TwoPulseResonance::Long) => taus[1],
        _ => taus[0],
    };
    let np = n_p as i64;
    let t_s = mod2(axis_residue(n_p, sign) - tau * np);
    let t_w = mod2(Q::from_integer(1) - t_s - tau * (2 * np));
    let t_c = mod2(-(t_s * 2 + t_w + tau * (4 * np)));
    Ok(finish(Method::I, sign, n_p, tau, t_s, t_w, t_c))
}

/// Rounds to the nearest integer, ties to even.
fn round_half_even(x: Q) -> i64 {
    let fl = x.floor();
    let frac = x - fl;
    let base = fl.to_integer();
    let half = Q::new(1, 2);
    if frac > half || (frac == half && base % 2 != 0) {
        base + 1
    } else {
        base
    }
}

/// Method II: zero waits, `n_p tau` on the axis residue plus `2 k`, with
/// `k` chosen so that `tau` lands closest to a filter resonance.
pub fn method_two(sign: Sign, n_p: u32) -> Result<MagicRow, CatalogError> {
    let np = n_p as i64;
    let r = axis_residue(n_p, sign);
    let mut best: Option<(Q, Q)> = None;
    for res in resonant_tau(n_p)? {
        let k = round_half_even((res * np - r) / 2).max(0);
        let tau = (r + Q::from_integer(2 * k)) / np;
        let diff = tau - res;
        let dist = if diff < Q::from_integer(0) { -diff } else { diff };
        if best.is_none_or(|(_, d)| dist < d) {
            best = Some((tau, dist));
        }
    }
    let (tau, _) = best.expect("at least one resonance");
    let z = Q::from_integer(0);
    Ok(finish(Method::II, sign, n_p, tau, z, z, z))
}

pub fn magic_params(method: Method, sign: Sign, n_p: u32) -> Result<MagicRow, CatalogError> {
    match method {
        Method::I => method_one(sign, n_p, TwoPulseResonance::Short),
        Method::II => method_two(sign, n_p),
    }
}

/// Every row for `n_p = 1..=max_np`, ordered by `n_p`, then method, then
/// sign (`+1` first).
pub fn catalog(max_np: u32) -> Result<Vec<MagicRow>, CatalogError> {
    let mut rows = Vec::new();
    for n_p in 1..=max_np {
        for method in [Method::I, Method::II] {
            for sign in [Sign::Plus, Sign::Minus] {
                rows.push(magic_params(method, sign, n_p)?);
            }
        }
    }
    Ok(rows)
}

/// Pulse spacing that keeps the resonance with pi pulses of length
/// `tau_pi`: `tau - tau_pi / n_p`.
pub fn finite_pulse_tau(tau_ideal: f64, tau_pi: f64, n_p: u32) -> Result<f64, CatalogError> {
    if n_p == 0 {
        return Err(CatalogError::NoPulses);
    }
    let t = tau_ideal - tau_pi / n_p as f64;
    if t <= 0.0 || t < tau_pi {
        return Err(CatalogError::PulseTooLong { tau: tau_ideal, tau_pi, n_p });
    }
    Ok(t)
}

pub const CSV_HEADER: &str = "method,sign,n_p,tau,t_s,t_w,t_c,gamma_window,sideband_fraction";

pub fn write_csv<W: Write>(rows: &[MagicRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.sign,
            r.n_p,
            render_units(r.tau),
            render_units(r.t_s),
            render_units(r.t_w),
            render_units(r.t_c),
            render_ratio(r.gamma_window),
            render_ratio(r.sideband_fraction),
        )?;
    }
    Ok(())
}
