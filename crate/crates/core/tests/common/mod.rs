//! Test-side oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use hyperpol::catalog::{parse_ratio, MagicRow, Method, Sign};
use hyperpol::linalg::{CMatrix, C64};
use hyperpol::sequence::{SegmentKind, SystemParams, Timeline};
use num_rational::Rational64;

/// `exp(-i phi n.sigma / 2)` written out with cos and sin.
pub fn rotation(phi: f64, n: [f64; 3]) -> CMatrix {
    let c = (phi / 2.0).cos();
    let s = (phi / 2.0).sin();
    let i = C64::i();
    let e00 = C64::new(c, 0.0) - i * s * n[2];
    let e11 = C64::new(c, 0.0) + i * s * n[2];
    let e01 = -i * s * C64::new(n[0], -n[1]);
    let e10 = -i * s * C64::new(n[0], n[1]);
    CMatrix::from_rows(&[&[e00, e01], &[e10, e11]]).unwrap()
}

fn lift(electron: &CMatrix, nuclear: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(4).unwrap();
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    out.set(2 * a + c, 2 * b + d, electron.get(a, b) * nuclear.get(c, d));
                }
            }
        }
    }
    out
}

fn id2() -> CMatrix {
    CMatrix::identity(2).unwrap()
}

/// Block-diagonal in the electron: nuclear rotation `up` when the electron
/// is up and `down` when it is down.
fn conditional(up: &CMatrix, down: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(4).unwrap();
    for c in 0..2 {
        for d in 0..2 {
            out.set(c, d, up.get(c, d));
            out.set(2 + c, 2 + d, down.get(c, d));
        }
    }
    out
}

fn diagonal_phase(sys: &SystemParams, dt: f64, with_coupling: bool) -> CMatrix {
    // basis |e n> with magnetic numbers m_e, m_n = +-1/2
    let mut out = CMatrix::zeros(4).unwrap();
    let m = [0.5, -0.5];
    for e in 0..2 {
        for n in 0..2 {
            let az = if with_coupling { sys.a_z * m[e] * m[n] } else { 0.0 };
            let energy = sys.omega * m[n] + az;
            out.set(2 * e + n, 2 * e + n, C64::from_polar(1.0, -energy * dt));
        }
    }
    out
}

/// Second-order split step for one segment kind over `dt`.
fn strang_step(sys: &SystemParams, kind: &SegmentKind, dt: f64, rabi: f64) -> CMatrix {
    let x = [1.0, 0.0, 0.0];
    match kind {
        SegmentKind::FreeNuclear => diagonal_phase(sys, dt, false),
        SegmentKind::FreeHyperfine | SegmentKind::Pulse { .. } => {
            let h0 = diagonal_phase(sys, dt / 2.0, true);
            // S_z A_perp I_x: nuclear x rotation by +-A_perp dt / 2
            let coupling = |t: f64| {
                conditional(&rotation(sys.a_perp * t / 2.0, x), &rotation(-sys.a_perp * t / 2.0, x))
            };
            let core = match kind {
                SegmentKind::Pulse { axis, .. } => {
                    let (nx, ny) = axis.components();
                    let drive = lift(&rotation(rabi * dt, [nx, ny, 0.0]), &id2());
                    coupling(dt / 2.0) * drive * coupling(dt / 2.0)
                }
                _ => coupling(dt),
            };
            h0 * core * h0
        }
    }
}

/// Propagator of a timeline by Trotter splitting with steps no longer than
/// `dt_max`. Ideal pulses are applied as exact rotations.
pub fn trotter_propagate(sys: &SystemParams, timeline: &Timeline, dt_max: f64) -> CMatrix {
    let mut u = CMatrix::identity(4).unwrap();
    for seg in &timeline.segments {
        let step = match seg.kind {
            SegmentKind::Pulse { axis, angle } if seg.duration == 0.0 => {
                let (nx, ny) = axis.components();
                lift(&rotation(angle.radians(), [nx, ny, 0.0]), &id2())
            }
            _ if seg.duration == 0.0 => CMatrix::identity(4).unwrap(),
            kind => {
                let n = (seg.duration / dt_max).ceil().max(1.0) as u64;
                let dt = seg.duration / n as f64;
                let rabi = match kind {
                    SegmentKind::Pulse { angle, .. } => angle.radians() / seg.duration,
                    _ => 0.0,
                };
                strang_step(sys, &kind, dt, rabi).powi(n)
            }
        };
        u = step * u;
    }
    u
}

/// Shortest nonzero segment of a timeline.
pub fn min_duration(timeline: &Timeline) -> f64 {
    timeline
        .segments
        .iter()
        .map(|s| s.duration)
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone)]
pub struct GoldenRow {
    pub method: Method,
    pub sign: Sign,
    pub n_p: u32,
    pub tau: Rational64,
    pub t_s: Rational64,
    pub t_w: Rational64,
    pub t_c: Rational64,
    pub gamma_window: Rational64,
    pub sideband_fraction: Rational64,
}

pub fn golden_table() -> Vec<GoldenRow> {
    let text = include_str!("../fixtures/table1.csv");
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            GoldenRow {
                method: if f[0] == "I" { Method::I } else { Method::II },
                sign: if f[1] == "+1" { Sign::Plus } else { Sign::Minus },
                n_p: f[2].parse().unwrap(),
                tau: parse_ratio(f[3]).unwrap(),
                t_s: parse_ratio(f[4]).unwrap(),
                t_w: parse_ratio(f[5]).unwrap(),
                t_c: parse_ratio(f[6]).unwrap(),
                gamma_window: parse_ratio(f[7]).unwrap(),
                sideband_fraction: parse_ratio(f[8]).unwrap(),
            }
        })
        .collect()
}

/// Field-by-field differences between a generated row and the fixture.
pub fn row_mismatches(gen: &MagicRow, gold: &GoldenRow) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |name: &str, a: Rational64, b: Rational64| {
        if a != b {
            out.push(format!("{name}: generated {a}, table {b}"));
        }
    };
    check("tau", gen.tau, gold.tau);
    check("t_s", gen.t_s, gold.t_s);
    check("t_w", gen.t_w, gold.t_w);
    check("t_c", gen.t_c, gold.t_c);
    check("gamma", gen.gamma_window, gold.gamma_window);
    check("sideband", gen.sideband_fraction, gold.sideband_fraction);
    out
}

pub const ALL_FAMILIES: [(Method, Sign); 4] = [
    (Method::I, Sign::Plus),
    (Method::I, Sign::Minus),
    (Method::II, Sign::Plus),
    (Method::II, Sign::Minus),
];

/// `(Re, Im)` of the integral of the decoupling sign function times
/// `e^{i omega t}` over one block, by composite 5-point Gauss-Legendre.
/// Pulses sit at the odd multiples of `tau / 2`.
pub fn dd_integral_gauss(omega: f64, n_p: u32, tau: f64) -> (f64, f64) {
    const X: [f64; 5] = [0.0, 0.538_469_310_105_683, -0.538_469_310_105_683, 0.906_179_845_938_664, -0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_889,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let mut edges = vec![0.0];
    edges.extend((1..=n_p).map(|k| (k as f64 - 0.5) * tau));
    edges.push(n_p as f64 * tau);
    let (mut re, mut im) = (0.0, 0.0);
    for (j, w) in edges.windows(2).enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let panels = ((w[1] - w[0]) * omega / 0.05).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / panels as f64;
        for p in 0..panels {
            let mid = w[0] + (p as f64 + 0.5) * h;
            for (x, wt) in X.iter().zip(W) {
                let t = mid + 0.5 * h * x;
                re += sign * wt * 0.5 * h * (omega * t).cos();
                im += sign * wt * 0.5 * h * (omega * t).sin();
            }
        }
    }
    (re, im)
}

/// Filter value from the integral: its component along the block phase.
pub fn filter_from_integral(omega: f64, n_p: u32, tau: f64, (re, im): (f64, f64)) -> f64 {
    let x = n_p as f64 * omega * tau / 2.0;
    if n_p.is_multiple_of(2) {
        re * x.cos() + im * x.sin()
    } else {
        re * x.sin() - im * x.cos()
    }
}
