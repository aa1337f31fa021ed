//! Parameter sweeps, the finite-pulse resonance search and robustness scans.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic;
use crate::catalog::{finite_pulse_tau, magic_params, MagicRow, Method, Sign};
use crate::exact::{self, kraus, DensityMatrix2, EngineError, ExactOptions};
use crate::sequence::{PulseModel, SequenceError, SequenceParams, SequenceSpec, SystemParams};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error("no resonance: every rate on the grid is zero")]
    NoResonance,
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Exact,
    Analytic,
    Both,
}

impl Engine {
    fn tags(&self) -> &'static [EngineTag] {
        match self {
            Engine::Exact => &[EngineTag::Exact],
            Engine::Analytic => &[EngineTag::Analytic],
            Engine::Both => &[EngineTag::Exact, EngineTag::Analytic],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineTag {
    Exact,
    Analytic,
}

impl fmt::Display for EngineTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineTag::Exact => "exact",
            EngineTag::Analytic => "analytic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    StablePolarization,
    Rate,
    Series,
}

/// Parameters an axis may vary.
pub const AXIS_NAMES: &[&str] =
    &["omega", "a_perp", "a_z", "tau", "t_s", "t_w", "t_c", "n_p", "n_r", "tau_pi"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 })
            .collect()
    }
}

fn default_cycles() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub target: Target,
    pub axes: Vec<AxisSpec>,
    pub system: SystemParams,
    pub sequence: SequenceSpec,
    #[serde(default)]
    pub engine: Engine,
    /// Series length for the `series` target.
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    #[serde(default)]
    pub exact: ExactOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(SweepError::Spec(format!("expected 1 or 2 axes, got {}", self.axes.len())));
        }
        for a in &self.axes {
            if !AXIS_NAMES.contains(&a.name.as_str()) {
                return Err(SweepError::Spec(format!("unknown axis {:?}", a.name)));
            }
            if a.count < 2 {
                return Err(SweepError::Spec(format!("axis {:?} needs at least 2 points", a.name)));
            }
            if !a.start.is_finite() || !a.stop.is_finite() {
                return Err(SweepError::Spec(format!("axis {:?} has non-finite bounds", a.name)));
            }
        }
        if self.axes.len() == 2 && self.axes[0].name == self.axes[1].name {
            return Err(SweepError::Spec("axes must differ".into()));
        }
        if self.target == Target::Series && self.cycles == 0 {
            return Err(SweepError::Spec("series target needs cycles >= 1".into()));
        }
        self.system.validate()?;
        Ok(())
    }
}

fn set_param(sys: &mut SystemParams, seq: &mut SequenceParams, name: &str, v: f64) {
    match name {
        "omega" => sys.omega = v,
        "a_perp" => sys.a_perp = v,
        "a_z" => sys.a_z = v,
        "tau" => seq.tau = v,
        "t_s" => seq.t_s = v,
        "t_w" => seq.t_w = v,
        "t_c" => seq.t_c = v,
        "n_p" => seq.n_p = v.round().max(0.0) as u32,
        "n_r" => seq.n_r = v.round().max(0.0) as u32,
        "tau_pi" => seq.pulse_model = PulseModel::from_tau_pi(v),
        _ => unreachable!("axis names are validated"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok { p_s: f64, lambda: f64, gamma: Option<f64> },
    /// Rate requested but the threshold was not reached.
    NoRate { p_s: f64, lambda: f64 },
    Series { values: Vec<f64> },
    Invalid { message: String },
    Failed { message: String },
}

impl Outcome {
    pub fn status(&self) -> &'static str {
        match self {
            Outcome::Ok { .. } | Outcome::Series { .. } => "ok",
            Outcome::NoRate { .. } => "no_rate",
            Outcome::Invalid { .. } => "invalid",
            Outcome::Failed { .. } => "failed",
        }
    }

    pub fn p_s(&self) -> Option<f64> {
        match self {
            Outcome::Ok { p_s, .. } | Outcome::NoRate { p_s, .. } => Some(*p_s),
            _ => None,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Outcome::Ok { gamma, .. } => *gamma,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub axis_values: Vec<f64>,
    pub engine: EngineTag,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub header: serde_json::Value,
    pub axis_names: Vec<String>,
    pub target: Target,
    pub rows: Vec<ResultRow>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.12e}")).unwrap_or_default()
}

impl ResultTable {
    /// A `#`-prefixed JSON header, a column line, then one line per row.
    /// The `series` target writes one line per cycle instead.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# {}", self.header)?;
        let axes = self.axis_names.join(",");
        if self.target == Target::Series {
            writeln!(w, "{axes},engine,cycle,polarization,status")?;
        } else {
            writeln!(w, "{axes},engine,P_s,lambda,gamma,status")?;
        }
        for row in &self.rows {
            let ax: Vec<String> = row.axis_values.iter().map(|v| format!("{v:.12e}")).collect();
            let ax = ax.join(",");
            match &row.outcome {
                Outcome::Series { values } => {
                    for (i, p) in values.iter().enumerate() {
                        writeln!(w, "{ax},{},{},{p:.12e},ok", row.engine, i + 1)?;
                    }
                }
                Outcome::Ok { p_s, lambda, gamma } => writeln!(
                    w,
                    "{ax},{},{p_s:.12e},{lambda:.12e},{},ok",
                    row.engine,
                    fmt_opt(*gamma),
                )?,
                Outcome::NoRate { p_s, lambda } => {
                    writeln!(w, "{ax},{},{p_s:.12e},{lambda:.12e},,no_rate", row.engine)?
                }
                other if self.target == Target::Series => {
                    writeln!(w, "{ax},{},,,{}", row.engine, other.status())?
                }
                other => writeln!(w, "{ax},{},,,,{}", row.engine, other.status())?,
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf8")
    }
}

fn engine_failure(e: EngineError) -> Outcome {
    match e {
        EngineError::Sequence(s) => Outcome::Invalid { message: s.to_string() },
        other => Outcome::Failed { message: other.to_string() },
    }
}

/// Evaluates one engine at one parameter point.
pub fn evaluate_point(
    sys: &SystemParams,
    seq: &SequenceParams,
    engine: EngineTag,
    target: Target,
    cycles: usize,
    opts: &ExactOptions,
) -> Outcome {
    let valid = sys.validate().and_then(|_| seq.validate());
    if let Err(e) = valid {
        return Outcome::Invalid { message: e.to_string() };
    }
    match (engine, target) {
        (EngineTag::Analytic, Target::Series) => {
            let a = analytic::evaluate(sys, seq);
            Outcome::Series { values: analytic::polarization_series(a.p_s, a.lambda, cycles).values }
        }
        (EngineTag::Analytic, _) => {
            let a = analytic::evaluate(sys, seq);
            let gamma = (target == Target::Rate).then_some(a.gamma);
            Outcome::Ok { p_s: a.p_s, lambda: a.lambda, gamma }
        }
        (EngineTag::Exact, Target::Series) => {
            match exact::cycle_unitary(sys, seq).and_then(|u| kraus(&u)) {
                Ok(k) => {
                    let s = exact::simulate(&k, &DensityMatrix2::maximally_mixed(), cycles);
                    Outcome::Series { values: s.values }
                }
                Err(e) => engine_failure(e),
            }
        }
        (EngineTag::Exact, _) => {
            let mut o = *opts;
            if target == Target::StablePolarization {
                o.max_cycles = 0;
            }
            match exact::evaluate(sys, seq, &o) {
                Ok(s) if target == Target::Rate && s.gamma.is_none() => {
                    Outcome::NoRate { p_s: s.p_s, lambda: s.lambda }
                }
                Ok(s) => Outcome::Ok { p_s: s.p_s, lambda: s.lambda, gamma: s.gamma },
                Err(e) => engine_failure(e),
            }
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, SweepError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))
}

/// Runs every grid point on `jobs` worker threads. Rows come out in
/// row-major order over the axes (first axis slowest), one row per engine.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<ResultTable, SweepError> {
    spec.validate()?;
    // times are resolved once against the base frequency
    let base_seq = spec.sequence.resolve(spec.system.omega)?;
    let grids: Vec<Vec<f64>> = spec.axes.iter().map(|a| a.values()).collect();
    let mut points: Vec<Vec<f64>> = vec![vec![]];
    for g in &grids {
        points = points
            .into_iter()
            .flat_map(|p| g.iter().map(move |v| [p.clone(), vec![*v]].concat()))
            .collect();
    }
    let tasks: Vec<(Vec<f64>, EngineTag)> = points
        .into_iter()
        .flat_map(|p| spec.engine.tags().iter().map(move |t| (p.clone(), *t)))
        .collect();
    let rows = pool(jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|(vals, tag)| {
                let mut sys = spec.system;
                let mut seq = base_seq;
                for (a, v) in spec.axes.iter().zip(vals) {
                    set_param(&mut sys, &mut seq, &a.name, *v);
                }
                let seq = seq.normalized();
                let outcome = evaluate_point(&sys, &seq, *tag, spec.target, spec.cycles, &spec.exact);
                ResultRow { axis_values: vals.clone(), engine: *tag, outcome }
            })
            .collect::<Vec<_>>()
    });
    Ok(ResultTable {
        header: serde_json::to_value(spec).expect("spec serializes"),
        axis_names: spec.axes.iter().map(|a| a.name.clone()).collect(),
        target: spec.target,
        rows,
    })
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSearch {
    /// Spacing with the largest rate.
    pub tau_res: f64,
    pub gamma_max: f64,
    /// Center of the grid, the corrected spacing `tau - tau_pi / n_p`.
    pub tau_tilde: f64,
    pub grid: Vec<(f64, f64)>,
}

fn rate_at(sys: &SystemParams, seq: &SequenceParams, opts: &ExactOptions) -> f64 {
    match exact::evaluate(sys, seq, opts) {
        Ok(s) if s.p_s.abs() > 1e-6 => s.gamma.unwrap_or(0.0),
        _ => 0.0,
    }
}

/// Searches the pulse spacing with the fastest buildup when pi pulses last
/// `tau_pi`. `seq.tau` is the spacing for ideal pulses.
pub fn find_tau_res(
    sys: &SystemParams,
    seq: &SequenceParams,
    tau_pi: f64,
    search_halfwidth: f64,
    grid_step: f64,
    opts: &ExactOptions,
) -> Result<TauSearch, SweepError> {
    if grid_step.is_nan() || grid_step <= 0.0 || search_halfwidth.is_nan() || search_halfwidth < 0.0 {
        return Err(SweepError::Spec("grid_step must be positive and halfwidth nonnegative".into()));
    }
    if tau_pi.is_nan() || tau_pi < 0.0 {
        return Err(SweepError::Spec("tau_pi must not be negative".into()));
    }
    let tau_tilde = seq.tau - tau_pi / seq.n_p.max(1) as f64;
    find_tau_res_around(sys, seq, tau_pi, tau_tilde, search_halfwidth, grid_step, opts)
}

/// As [`find_tau_res`] with an explicit grid center.
pub fn find_tau_res_around(
    sys: &SystemParams,
    seq: &SequenceParams,
    tau_pi: f64,
    center: f64,
    search_halfwidth: f64,
    grid_step: f64,
    opts: &ExactOptions,
) -> Result<TauSearch, SweepError> {
    let model = PulseModel::from_tau_pi(tau_pi);
    let rate = |tau: f64| {
        let mut s = *seq;
        s.tau = tau;
        s.pulse_model = model;
        rate_at(sys, &s, opts)
    };
    let k = (search_halfwidth / grid_step).round() as i64;
    let grid: Vec<(f64, f64)> = (-k..=k)
        .into_par_iter()
        .map(|i| {
            let t = center + i as f64 * grid_step;
            (t, rate(t))
        })
        .collect();
    let mut best = grid[0];
    for p in &grid[1..] {
        // strict comparison keeps the smaller tau on ties
        if p.1 > best.1 {
            best = *p;
        }
    }
    if best.1 <= 0.0 {
        return Err(SweepError::NoResonance);
    }
    let (t, g) = golden_max(rate, best.0 - grid_step, best.0 + grid_step, grid_step / 10.0);
    let (tau_res, gamma_max) = if g > best.1 { (t, g) } else { best };
    Ok(TauSearch { tau_res, gamma_max, tau_tilde: center, grid })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    pub method: Method,
    pub sign: Sign,
    pub n_p: u32,
    pub n_r: u32,
}

impl RobustnessConfig {
    pub fn row(&self) -> Result<MagicRow, SweepError> {
        magic_params(self.method, self.sign, self.n_p).map_err(|e| SweepError::Spec(e.to_string()))
    }

    pub fn label(&self) -> String {
        format!("{}{}:n_p={}:n_r={}", self.method, self.sign, self.n_p, self.n_r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub config: String,
    pub tau_pi: f64,
    pub tau: Option<f64>,
    pub abs_p_s: Option<f64>,
    pub gamma: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessTable {
    pub header: serde_json::Value,
    pub rows: Vec<RobustnessRow>,
}

impl RobustnessTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# {}", self.header)?;
        writeln!(w, "config,tau_pi,tau,abs_P_s,gamma,status")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.12e},{},{},{},{}",
                r.config,
                r.tau_pi,
                fmt_opt(r.tau),
                fmt_opt(r.abs_p_s),
                fmt_opt(r.gamma),
                r.status
            )?;
        }
        Ok(())
    }
}

/// For each configuration and pulse length: shift `tau` by `tau_pi / n_p`,
/// simulate with finite pulses and report `|P_s|` and the rate.
pub fn robustness_scan(
    sys: &SystemParams,
    configs: &[RobustnessConfig],
    tau_pi_axis: &[f64],
    opts: &ExactOptions,
    jobs: usize,
) -> Result<RobustnessTable, SweepError> {
    sys.validate()?;
    let mut tasks = Vec::new();
    for c in configs {
        let row = c.row()?;
        for &tp in tau_pi_axis {
            tasks.push((*c, row, tp));
        }
    }
    let rows = pool(jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|(c, row, tp)| {
                let base = row.sequence(sys.omega, c.n_r, PulseModel::Ideal);
                let mut r = RobustnessRow {
                    config: c.label(),
                    tau_pi: *tp,
                    tau: None,
                    abs_p_s: None,
                    gamma: None,
                    status: "ok".into(),
                };
                let tau = match finite_pulse_tau(base.tau, *tp, c.n_p) {
                    Ok(t) => t,
                    Err(_) => {
                        r.status = "invalid".into();
                        return r;
                    }
                };
                let mut seq = base;
                seq.tau = tau;
                seq.pulse_model = PulseModel::from_tau_pi(*tp);
                r.tau = Some(tau);
                match exact::evaluate(sys, &seq, opts) {
                    Ok(s) => {
                        r.abs_p_s = Some(s.p_s.abs());
                        r.gamma = s.gamma;
                        if s.gamma.is_none() {
                            r.status = "no_rate".into();
                        }
                    }
                    Err(e) => r.status = engine_failure(e).status().into(),
                }
                r
            })
            .collect::<Vec<_>>()
    });
    let header = serde_json::json!({
        "system": sys,
        "configs": configs,
        "tau_pi": tau_pi_axis,
        "exact": opts,
    });
    Ok(RobustnessTable { header, rows })
}
