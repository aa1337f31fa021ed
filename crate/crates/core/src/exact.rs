//! Exact propagation of the two-spin system and the induced nuclear channel.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{hermitian_expm, spin, unitarity_defect, CMatrix, HermitianGenerator, C64};
use crate::sequence::{render_unit, SegmentKind, SequenceError, SequenceParams, SystemParams, Timeline};

/// Fraction of the stable polarization that defines the buildup time.
pub const RATE_THRESHOLD: f64 = 1.0 - 1.0 / std::f64::consts::E;

pub const MAX_ITERATIONS: usize = 1_000_000;

/// Largest unitarity defect accepted when splitting a propagator.
pub const KRAUS_UNITARITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error("propagator is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("no convergence after {iterations} iterations (last step {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("rate undefined: {0}")]
    RateUndefined(String),
    #[error("invalid engine options: {0}")]
    InvalidOptions(String),
}

/// Hyperfine Hamiltonian `omega I_z + S_z (A_perp I_x + A_z I_z)`.
pub fn hyperfine_hamiltonian(sys: &SystemParams) -> CMatrix {
    let nz = spin::nuclear(&spin::sz());
    let coupling = spin::nuclear(&spin::sx()).scale_real(sys.a_perp) + nz.scale_real(sys.a_z);
    nz.scale_real(sys.omega) + spin::electron(&spin::sz()) * coupling
}

fn electron_axis_op(n: (f64, f64)) -> CMatrix {
    spin::electron(&(spin::sx().scale_real(n.0) + spin::sy().scale_real(n.1)))
}

fn segment_unitary(sys: &SystemParams, h_free: &CMatrix, kind: &SegmentKind, duration: f64) -> CMatrix {
    let gen = |m: CMatrix| HermitianGenerator::new(m).expect("generators are hermitian by construction");
    match kind {
        SegmentKind::FreeHyperfine => hermitian_expm(&gen(*h_free), duration),
        SegmentKind::FreeNuclear => {
            hermitian_expm(&gen(spin::nuclear(&spin::sz()).scale_real(sys.omega)), duration)
        }
        SegmentKind::Pulse { axis, angle } => {
            let s_n = electron_axis_op(axis.components());
            if duration == 0.0 {
                hermitian_expm(&gen(s_n), angle.radians())
            } else {
                // Rabi frequency fixed by the pulse angle and length
                let rabi = angle.radians() / duration;
                hermitian_expm(&gen(*h_free + s_n.scale_real(rabi)), duration)
            }
        }
    }
}

/// Ordered product of segment propagators, later segments on the left.
pub fn propagate(sys: &SystemParams, timeline: &Timeline) -> CMatrix {
    let h_free = hyperfine_hamiltonian(sys);
    let mut cache: Vec<(SegmentKind, u64, CMatrix)> = Vec::new();
    let mut u = CMatrix::identity(4).expect("4x4");
    for seg in &timeline.segments {
        let key = seg.duration.to_bits();
        let step = match cache.iter().find(|(k, d, _)| *k == seg.kind && *d == key) {
            Some((_, _, m)) => *m,
            None => {
                let m = segment_unitary(sys, &h_free, &seg.kind, seg.duration);
                cache.push((seg.kind, key, m));
                m
            }
        };
        u = step * u;
    }
    u
}

/// Propagator of one readout cycle for the given parameters.
pub fn cycle_unitary(sys: &SystemParams, seq: &SequenceParams) -> Result<CMatrix, EngineError> {
    sys.validate()?;
    Ok(propagate(sys, &render_unit(seq)?))
}

/// Nuclear Kraus operators for electron readout in the up state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrausPair {
    pub up: CMatrix,
    pub down: CMatrix,
}

impl KrausPair {
    /// `max |M_up^dagger M_up + M_down^dagger M_down - I|`.
    pub fn cptp_defect(&self) -> f64 {
        let s = self.up.adjoint() * self.up + self.down.adjoint() * self.down;
        s.distance(&spin::id2())
    }
}

/// Splits a cycle propagator into the two nuclear Kraus operators.
pub fn kraus(u: &CMatrix) -> Result<KrausPair, EngineError> {
    let defect = unitarity_defect(u);
    if defect.is_nan() || defect > KRAUS_UNITARITY_TOL {
        return Err(EngineError::NotUnitary(defect));
    }
    Ok(KrausPair { up: u.block2(0, 0), down: u.block2(2, 0) })
}

/// Nuclear density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix2(CMatrix);

impl DensityMatrix2 {
    pub fn new(m: CMatrix) -> Result<Self, EngineError> {
        if m.dim() != 2 {
            return Err(EngineError::InvalidDensity(format!("dimension {}", m.dim())));
        }
        let herm = m.hermiticity_defect();
        if herm > 1e-10 {
            return Err(EngineError::InvalidDensity(format!("not hermitian ({herm:.2e})")));
        }
        let tr = m.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(EngineError::InvalidDensity(format!("trace {tr}")));
        }
        let [x, y, z] = bloch_of(&m);
        if (x * x + y * y + z * z).sqrt() > 1.0 + 1e-10 {
            return Err(EngineError::InvalidDensity("not positive".into()));
        }
        Ok(Self(m))
    }

    pub fn maximally_mixed() -> Self {
        Self(spin::id2().scale_real(0.5))
    }

    /// `(I + r.sigma) / 2`; `r` must lie in the unit ball.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self, EngineError> {
        Self::new(matrix_of_bloch(r))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// `rho_up,up - rho_down,down`.
    pub fn polarization(&self) -> f64 {
        (self.0.get(0, 0) - self.0.get(1, 1)).re
    }

    pub fn bloch(&self) -> [f64; 3] {
        bloch_of(&self.0)
    }
}

fn bloch_of(m: &CMatrix) -> [f64; 3] {
    let off = m.get(1, 0);
    [2.0 * off.re, 2.0 * off.im, (m.get(0, 0) - m.get(1, 1)).re]
}

fn matrix_of_bloch(r: [f64; 3]) -> CMatrix {
    let h = 0.5;
    CMatrix::from_rows(&[
        &[C64::new(h * (1.0 + r[2]), 0.0), C64::new(h * r[0], -h * r[1])],
        &[C64::new(h * r[0], h * r[1]), C64::new(h * (1.0 - r[2]), 0.0)],
    ])
    .expect("2x2")
}

/// `rho -> M_up rho M_up^dagger + M_down rho M_down^dagger`.
pub fn apply_channel(k: &KrausPair, rho: &DensityMatrix2) -> DensityMatrix2 {
    let r = rho.0;
    let out = k.up * r * k.up.adjoint() + k.down * r * k.down.adjoint();
    // drop the antihermitian part left by rounding
    DensityMatrix2((out + out.adjoint()).scale_real(0.5))
}

/// Polarization after each cycle; entry `0` is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarizationSeries {
    pub values: Vec<f64>,
}

impl PolarizationSeries {
    /// Writes a `#`-prefixed JSON header line, then `cycle,polarization`
    /// rows with the cycle counted from 1.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &serde_json::Value) -> io::Result<()> {
        writeln!(w, "# {header}")?;
        writeln!(w, "cycle,polarization")?;
        for (i, p) in self.values.iter().enumerate() {
            writeln!(w, "{},{:.15e}", i + 1, p)?;
        }
        Ok(())
    }
}

/// Repeated application of the channel starting from `rho0`.
pub fn simulate(k: &KrausPair, rho0: &DensityMatrix2, n_cycles: usize) -> PolarizationSeries {
    let mut values = Vec::with_capacity(n_cycles);
    let mut rho = *rho0;
    for i in 0..n_cycles {
        if i > 0 {
            rho = apply_channel(k, &rho);
        }
        values.push(rho.polarization());
    }
    PolarizationSeries { values }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub p_s: f64,
    /// Contraction factor of the polarization per cycle.
    pub lambda: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub rho: DensityMatrix2,
}

/// Iterates the channel from the maximally mixed state until successive
/// states differ by less than `tol`.
///
/// The contraction factor is read off a second trajectory started from the
/// fully polarized state, as the geometric mean of the shrinking distance to
/// the fixed point. This stays meaningful when the approach oscillates.
pub fn steady_state(k: &KrausPair, tol: f64) -> Result<SteadyState, EngineError> {
    let mut rho = DensityMatrix2::maximally_mixed();
    // two probes so that one of them starts away from the fixed point
    let mut up = DensityMatrix2::from_bloch([0.0, 0.0, 1.0]).expect("pure state");
    let mut down = DensityMatrix2::from_bloch([0.0, 0.0, -1.0]).expect("pure state");
    let mut up_z = vec![1.0];
    let mut down_z = vec![-1.0];
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let next = apply_channel(k, &rho);
        residual = next.0.distance(&rho.0);
        rho = next;
        up = apply_channel(k, &up);
        down = apply_channel(k, &down);
        up_z.push(up.polarization());
        down_z.push(down.polarization());
        if residual < tol && it >= 8 {
            let p_s = rho.polarization();
            let probe = if p_s > 0.0 { &down_z } else { &up_z };
            let errs: Vec<f64> = probe.iter().map(|z| (z - p_s).abs()).collect();
            return Ok(SteadyState { p_s, lambda: envelope_ratio(&errs), iterations: it, rho });
        }
    }
    Err(EngineError::NoConvergence { iterations: MAX_ITERATIONS, residual })
}

/// Per-step decay factor of a sequence of distances `e_0, e_1, ...`.
fn envelope_ratio(errs: &[f64]) -> f64 {
    let e0 = errs[0];
    if e0 <= 1e-14 {
        return 1.0;
    }
    let floor = 1e-9 * e0;
    let a = match errs.iter().position(|e| *e <= 0.5 * e0) {
        Some(a) => a,
        // never halved: average over the whole run
        None => {
            let n = errs.len() - 1;
            return (errs[n] / e0).powf(1.0 / n as f64).min(1.0);
        }
    };
    let b = errs.iter().rposition(|e| *e >= floor).unwrap_or(0);
    if b > a {
        (errs[b] / errs[a]).powf(1.0 / (b - a) as f64).clamp(0.0, 1.0)
    } else {
        (errs[1] / e0).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateMeasurement {
    /// Buildup rate `1 / (N_s t_cycle)`.
    pub gamma: f64,
    /// Number of cycles to reach `1 - 1/e` of the stable value.
    pub n_s: f64,
}

fn crossing_cycles(prev: f64, next: f64, n_next: usize) -> f64 {
    // values are fractions of P_s at indices n_next - 1 and n_next
    let frac = if next > prev { (RATE_THRESHOLD - prev) / (next - prev) } else { 1.0 };
    let index = (n_next - 1) as f64 + frac.clamp(0.0, 1.0);
    // index 0 is the initial state, so the crossing index counts cycles
    (index - 1.0).max(1.0)
}

/// Buildup rate from a series: the first crossing of `1 - 1/e` of `p_s`,
/// linearly interpolated between cycles.
pub fn measured_rate(
    series: &PolarizationSeries,
    p_s: f64,
    t_cycle: f64,
) -> Result<RateMeasurement, EngineError> {
    if p_s.abs() < 1e-12 {
        return Err(EngineError::RateUndefined("stable polarization is zero".into()));
    }
    let f: Vec<f64> = series.values.iter().map(|p| p / p_s).collect();
    if f.first().is_some_and(|x| *x >= RATE_THRESHOLD) {
        return Ok(RateMeasurement { gamma: 1.0 / t_cycle, n_s: 1.0 });
    }
    for n in 1..f.len() {
        if f[n] >= RATE_THRESHOLD {
            // series index n is cycle n + 1
            let n_s = crossing_cycles(f[n - 1], f[n], n + 1);
            return Ok(RateMeasurement { gamma: 1.0 / (n_s * t_cycle), n_s });
        }
    }
    Err(EngineError::RateUndefined(format!(
        "threshold not reached within {} cycles",
        f.len()
    )))
}

/// The channel as an affine map on the Bloch vector, `r -> A r + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochMap {
    pub a: [[f64; 3]; 3],
    pub b: [f64; 3],
}

impl BlochMap {
    pub fn from_kraus(k: &KrausPair) -> Self {
        let apply = |m: CMatrix| {
            let out = k.up * m * k.up.adjoint() + k.down * m * k.down.adjoint();
            bloch_of(&out)
        };
        let b = apply(spin::id2().scale_real(0.5));
        let mut a = [[0.0; 3]; 3];
        for (j, op) in [spin::sx(), spin::sy(), spin::sz()].into_iter().enumerate() {
            // sigma_j / 2 is traceless, so its image carries no constant part
            let col = apply(op);
            for i in 0..3 {
                a[i][j] = col[i];
            }
        }
        Self { a, b }
    }

    pub fn apply(&self, r: [f64; 3]) -> [f64; 3] {
        let mut out = self.b;
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.a[i][0] * r[0] + self.a[i][1] * r[1] + self.a[i][2] * r[2];
        }
        out
    }

    /// The map applied twice.
    #[allow(clippy::needless_range_loop)]
    pub fn squared(&self) -> Self {
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = (0..3).map(|k| self.a[i][k] * self.a[k][j]).sum();
            }
        }
        Self { a, b: self.apply(self.b) }
    }

    /// Fixed point reached from the maximally mixed state, by iterating
    /// the map with doubling steps (after `k` doublings the state has seen
    /// `2^k` cycles). Fails when `max_cycles` cycles do not suffice.
    pub fn fixed_point(&self, tol: f64, max_cycles: usize) -> Result<[f64; 3], EngineError> {
        let mut m = *self;
        let mut r = m.b;
        let mut residual = f64::INFINITY;
        let mut cycles: usize = 1;
        for k in 0..62 {
            if cycles.saturating_mul(2) > max_cycles.max(8) {
                break;
            }
            m = m.squared();
            cycles *= 2;
            let next = m.b;
            residual = (0..3).map(|i| (next[i] - r[i]).abs()).fold(0.0, f64::max);
            r = next;
            if residual < tol && k >= 2 {
                return Ok(r);
            }
        }
        Err(EngineError::NoConvergence { iterations: cycles, residual })
    }

    /// Contraction factor of the polarization toward `fixed`, from doubling
    /// powers of the linear part applied to the offset of a polarized state.
    pub fn contraction(&self, fixed: [f64; 3]) -> f64 {
        // start from the pole farther from the fixed point
        let pole = if fixed[2] > 0.0 { -1.0 } else { 1.0 };
        let d0 = [-fixed[0], -fixed[1], pole - fixed[2]];
        let e0 = d0[2].abs();
        if e0 <= 1e-14 {
            return 1.0;
        }
        let lin = BlochMap { a: self.a, b: [0.0; 3] };
        let e1 = lin.apply(d0)[2].abs();
        let floor = 1e-9 * e0;
        if e1 < floor {
            return (e1 / e0).clamp(0.0, 1.0);
        }
        // e(n) and e(2n) with n = 2^k
        let mut pow = lin;
        let mut n: f64 = 1.0;
        let mut best = (e1 / e0).clamp(0.0, 1.0);
        for _ in 0..50 {
            let en = pow.apply(d0)[2].abs();
            let sq = pow.squared();
            let e2n = sq.apply(d0)[2].abs();
            if e2n < floor || en < floor {
                break;
            }
            best = (e2n / en).powf(1.0 / n).clamp(0.0, 1.0);
            pow = sq;
            n *= 2.0;
        }
        best
    }
}

/// How a rate is normalized in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateNormalization {
    /// Cycle length including pulse widths.
    #[default]
    Actual,
    /// Cycle length with instantaneous pulses.
    Nominal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ExactOptions {
    /// Convergence threshold on the Bloch vector.
    pub tol: f64,
    /// Cycle budget for reaching the fixed point.
    pub max_iterations: usize,
    /// Cycle budget for the rate scan; `0` skips the rate.
    pub max_cycles: usize,
    pub normalization: RateNormalization,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iterations: MAX_ITERATIONS,
            max_cycles: 4_000_000,
            normalization: RateNormalization::Actual,
        }
    }
}

impl ExactOptions {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(EngineError::InvalidOptions(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iterations == 0 {
            return Err(EngineError::InvalidOptions("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactSummary {
    pub p_s: f64,
    pub lambda: f64,
    /// `None` when the stable polarization vanishes or the threshold is
    /// not reached within the cycle budget.
    pub gamma: Option<f64>,
    pub n_s: Option<f64>,
    pub cycle_time: f64,
    pub unitarity_defect: f64,
}

/// Stable polarization, contraction factor and buildup rate for one
/// parameter set, computed on the Bloch-vector form of the channel.
pub fn evaluate(
    sys: &SystemParams,
    seq: &SequenceParams,
    opts: &ExactOptions,
) -> Result<ExactSummary, EngineError> {
    opts.validate()?;
    let u = cycle_unitary(sys, seq)?;
    let k = kraus(&u)?;
    let map = BlochMap::from_kraus(&k);
    let fixed = map.fixed_point(opts.tol, opts.max_iterations)?;
    let p_s = fixed[2];
    let lambda = map.contraction(fixed);
    let cycle_time = match opts.normalization {
        RateNormalization::Actual => seq.actual_cycle(),
        RateNormalization::Nominal => seq.nominal_cycle(),
    };
    let rate = rate_from_map(&map, p_s, cycle_time, opts.max_cycles).ok();
    Ok(ExactSummary {
        p_s,
        lambda,
        gamma: rate.map(|r| r.gamma),
        n_s: rate.map(|r| r.n_s),
        cycle_time,
        unitarity_defect: unitarity_defect(&u),
    })
}

/// Same rule as [`measured_rate`], scanning the map from the maximally
/// mixed state without storing the series.
pub fn rate_from_map(
    map: &BlochMap,
    p_s: f64,
    t_cycle: f64,
    max_cycles: usize,
) -> Result<RateMeasurement, EngineError> {
    if p_s.abs() < 1e-12 {
        return Err(EngineError::RateUndefined("stable polarization is zero".into()));
    }
    let mut r = [0.0; 3];
    let mut prev = 0.0;
    for n in 2..=max_cycles {
        r = map.apply(r);
        let f = r[2] / p_s;
        if f >= RATE_THRESHOLD {
            let n_s = crossing_cycles(prev, f, n);
            return Ok(RateMeasurement { gamma: 1.0 / (n_s * t_cycle), n_s });
        }
        prev = f;
    }
    Err(EngineError::RateUndefined(format!("threshold not reached within {max_cycles} cycles")))
}
