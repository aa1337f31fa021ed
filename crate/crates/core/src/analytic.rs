//! Closed-form description of the cycle to first order in the coupling.
//!
//! The effective cycle rotates the nucleus by an angle `alpha` about an axis
//! set by the phase `theta`. From these two numbers follow the Kraus
//! operators, the stable polarization, the contraction per cycle and the
//! buildup rate.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use serde::Serialize;
use thiserror::Error;

use crate::catalog::MagicRow;
use crate::exact::{KrausPair, PolarizationSeries};
use crate::linalg::{CMatrix, C64};
use crate::sequence::{SequenceParams, SystemParams};

/// Below this `|cos(omega tau / 2)|` the filter uses its limiting form.
pub const FILTER_SINGULAR_TOL: f64 = 1e-6;
/// Below this `|sin(Phi / 2)|` the Dirichlet factor uses its limit.
pub const DIRICHLET_SINGULAR_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("time {t} outside the block [0, {end}]")]
    OutOfRange { t: f64, end: f64 },
    #[error("n_p must be at least 1")]
    NoPulses,
}

/// Sign function of a block of `n_p` pi pulses spaced by `tau`, on
/// `[0, n_p tau]`. Pulses sit at `(2k - 1) tau / 2`.
pub fn f_dd(t: f64, n_p: u32, tau: f64) -> Result<f64, AnalyticError> {
    if n_p == 0 {
        return Err(AnalyticError::NoPulses);
    }
    let end = n_p as f64 * tau;
    if !(0.0..=end).contains(&t) {
        return Err(AnalyticError::OutOfRange { t, end });
    }
    // index of the half-open piece containing t
    let k = (((t / tau) + 0.5).floor() as u32).min(n_p);
    Ok(if k.is_multiple_of(2) { 1.0 } else { -1.0 })
}

/// Filter function `F(omega, n_p, tau)` of a decoupling block.
///
/// Even `n_p`: `-4 sin(n_p w tau/2) sin^2(w tau/4) / (w cos(w tau/2))`.
/// Odd `n_p`: `4 cos(n_p w tau/2) sin^2(w tau/4) / (w cos(w tau/2))`.
/// At zeros of `cos(w tau/2)` the numerator vanishes too and the limit
/// is taken.
pub fn filter_f(omega: f64, n_p: u32, tau: f64) -> f64 {
    let n = n_p as f64;
    let x = n * omega * tau / 2.0;
    let s2 = (omega * tau / 4.0).sin().powi(2);
    let c = (omega * tau / 2.0).cos();
    let even = n_p.is_multiple_of(2);
    if c.abs() < FILTER_SINGULAR_TOL {
        let s = (omega * tau / 2.0).sin();
        return if even {
            4.0 * n * x.cos() * s2 / (omega * s)
        } else {
            4.0 * n * x.sin() * s2 / (omega * s)
        };
    }
    if even {
        -4.0 * x.sin() * s2 / (omega * c)
    } else {
        4.0 * x.cos() * s2 / (omega * c)
    }
}

/// `(Re, Im)` of `int_0^{n_p tau} f_dd(t) e^{i omega t} dt` from the
/// closed form.
pub fn dd_integrals(omega: f64, n_p: u32, tau: f64) -> (f64, f64) {
    let f = filter_f(omega, n_p, tau);
    let x = n_p as f64 * omega * tau / 2.0;
    let (s, c) = x.sin_cos();
    if n_p.is_multiple_of(2) {
        (f * c, f * s)
    } else {
        // odd blocks carry an extra factor -i
        (f * s, -f * c)
    }
}

/// Same integral by adaptive Simpson quadrature over the pieces of
/// constant sign.
pub fn dd_integrals_quadrature(omega: f64, n_p: u32, tau: f64) -> (f64, f64) {
    let end = n_p as f64 * tau;
    let mut edges = vec![0.0];
    for k in 1..=n_p {
        edges.push((2 * k - 1) as f64 * tau / 2.0);
    }
    edges.push(end);
    let mut re = 0.0;
    let mut im = 0.0;
    for (j, w) in edges.windows(2).enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        re += sign * adaptive_simpson(&|t: f64| (omega * t).cos(), w[0], w[1], 1e-13);
        im += sign * adaptive_simpson(&|t: f64| (omega * t).sin(), w[0], w[1], 1e-13);
    }
    (re, im)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// Phases accumulated by the nucleus during one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseBundle {
    /// Phase setting the rotation axis, reduced to `[0, 2 pi)`.
    pub phi: f64,
    /// `phi / 2 + pi / 4`.
    pub theta: f64,
    /// Larmor phase of a whole repetition, `omega T`.
    pub phi_big: f64,
    /// `omega (t_S + t_W + 2 n_p tau)`.
    pub phi1: f64,
    /// `omega (t_S + n_p tau)`.
    pub phi0: f64,
}

pub fn phases(sys: &SystemParams, seq: &SequenceParams) -> PhaseBundle {
    let w = sys.omega;
    let np = seq.n_p as f64;
    let parity = if seq.n_p.is_multiple_of(2) { PI } else { 0.0 };
    let phi0 = w * (seq.t_s + np * seq.tau);
    let phi = (parity - phi0).rem_euclid(TAU);
    PhaseBundle {
        phi,
        theta: phi / 2.0 + FRAC_PI_4,
        phi_big: w * seq.period(),
        phi1: w * (seq.t_s + seq.t_w + 2.0 * np * seq.tau),
        phi0,
    }
}

/// `sin(n_r Phi / 2) / sin(Phi / 2)`, with its limit `+-n_r` at multiples
/// of `2 pi`.
pub fn dirichlet(n_r: u32, phi_big: f64) -> f64 {
    let n = n_r as f64;
    let s = (phi_big / 2.0).sin();
    if s.abs() < DIRICHLET_SINGULAR_TOL {
        n * (n * phi_big / 2.0).cos() / (phi_big / 2.0).cos()
    } else {
        (n * phi_big / 2.0).sin() / s
    }
}

/// Effective rotation angle of one readout cycle.
pub fn alpha(sys: &SystemParams, seq: &SequenceParams) -> f64 {
    let p = phases(sys, seq);
    2.0 * sys.a_perp
        * dirichlet(seq.n_r, p.phi_big)
        * (p.phi1 / 2.0).sin()
        * filter_f(sys.omega, seq.n_p, seq.tau)
}

/// Approximate Kraus operators. `phi_big` is the Larmor phase of a single
/// repetition; the operators carry the phase of all `n_r` of them.
pub fn kraus_approx(alpha: f64, theta: f64, phi_big: f64, n_r: u32) -> KrausPair {
    let half = n_r as f64 * phi_big / 2.0;
    let a = alpha * theta.cos() / 2.0;
    let b = alpha * theta.sin() / 2.0;
    let z = C64::new(0.0, 0.0);
    let up = CMatrix::from_rows(&[
        &[-C64::from_polar(a.cos(), -half), z],
        &[z, -C64::from_polar(b.cos(), half)],
    ])
    .expect("2x2");
    let down = CMatrix::from_rows(&[
        &[z, -C64::from_polar(b.sin(), -(theta + half))],
        &[C64::i() * C64::from_polar(a.sin(), theta + half), z],
    ])
    .expect("2x2");
    KrausPair { up, down }
}

/// Stable polarization; zero when both flip probabilities vanish.
pub fn stable_polarization(alpha: f64, theta: f64) -> f64 {
    let gain = (alpha * theta.sin() / 2.0).sin().powi(2);
    let loss = (alpha * theta.cos() / 2.0).sin().powi(2);
    let total = gain + loss;
    if total < 1e-300 {
        0.0
    } else {
        (gain - loss) / total
    }
}

/// Contraction factor of the polarization per cycle.
pub fn lambda(alpha: f64, theta: f64) -> f64 {
    0.5 * ((alpha * theta.sin()).cos() + (alpha * theta.cos()).cos()).abs()
}

/// `P(N) = P_s (1 - lambda^(N-1))` for `N = 1..=n`.
pub fn polarization_series(p_s: f64, lambda: f64, n: usize) -> PolarizationSeries {
    let values = (0..n).map(|k| p_s * (1.0 - lambda.powi(k as i32))).collect();
    PolarizationSeries { values }
}

/// `min(-ln lambda, 1) / (n_r T)` with `T` the repetition period.
pub fn gamma(lambda: f64, n_r: u32, period: f64) -> f64 {
    let decay = if lambda <= 0.0 { 1.0 } else { (-lambda.ln()).min(1.0) };
    decay / (n_r as f64 * period)
}

/// Largest rotation angle reachable with `n_r` repetitions of `n_p` pulses.
pub fn alpha_max(n_r: u32, n_p: u32, a_perp: f64, omega: f64) -> f64 {
    4.0 * n_r as f64 * n_p as f64 * a_perp / omega
}

/// Rate of a single ideally timed pi-pulse pair, `A_perp^2 / (pi omega)`.
pub fn gamma0(a_perp: f64, omega: f64) -> f64 {
    a_perp * a_perp / (PI * omega)
}

/// Best rate for a given `alpha_max`:
/// `(A_perp / pi) min(-ln cos(a/2) / (a/2), 1/a)`.
pub fn gamma_opt(alpha_max: f64, a_perp: f64) -> f64 {
    let h = alpha_max / 2.0;
    let slow = if h.cos() > 0.0 { -h.cos().ln() / h } else { f64::INFINITY };
    a_perp / PI * slow.min(1.0 / alpha_max)
}

/// Resonance window and first sidebands of a magic row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    /// Half-width `4 / (n_r T)` of the central lobe in angular frequency.
    pub delta_omega: f64,
    /// Offsets of the first sidebands from `omega`, `[-s, +s]`.
    pub sidebands: [f64; 2],
}

/// Window width and sideband offsets for `row` repeated `n_r` times at
/// Larmor frequency `omega`.
pub fn window_and_sidebands(row: &MagicRow, n_r: u32, omega: f64) -> Window {
    let period = row.period_units_f64() * PI / omega;
    let s = row.sideband_fraction_f64() * omega;
    Window { delta_omega: 4.0 / (n_r as f64 * period), sidebands: [-s, s] }
}

/// All analytic quantities for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticSummary {
    pub phases: PhaseBundle,
    pub filter: f64,
    pub alpha: f64,
    pub p_s: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub delta_omega: f64,
}

pub fn evaluate(sys: &SystemParams, seq: &SequenceParams) -> AnalyticSummary {
    let ph = phases(sys, seq);
    let a = alpha(sys, seq);
    let l = lambda(a, ph.theta);
    AnalyticSummary {
        phases: ph,
        filter: filter_f(sys.omega, seq.n_p, seq.tau),
        alpha: a,
        p_s: stable_polarization(a, ph.theta),
        lambda: l,
        gamma: gamma(l, seq.n_r, seq.period()),
        delta_omega: 4.0 / (seq.n_r as f64 * seq.period()),
    }
}
