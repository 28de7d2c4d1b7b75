//! Experiment configuration and the pipelines behind the `conical` binary.
//!
//! A run is described by a TOML file. Unknown keys are rejected.
//!
//! ```toml
//! kind = "crossing-single"     # adiabatic | crossing-single | crossing-pair | lz-table | classical-only
//! epsilons = [0.02, 0.01, 0.005]
//! t0 = 0.0
//! t_end = 1.0
//!
//! [model]
//! name = "linear-isotropic"    # or "tilted" / "polynomial"
//! dim = 2
//!
//! [packet]
//! q = [-0.5, 0.0]
//! p = [1.4142135623730951, 0.0]
//! mode = "minus"
//!
//! [grid]
//! n = 512
//! lo = [-1.6, -2.6]
//! hi = [2.4, 2.6]
//! ```
//!
//! Each observable goes to its own CSV file in the output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Deserialize;

use crate::ansatz::{
    cross_term, initial_field, propagate_ansatz, propagate_pair, sigma_norm, wigner_masses, AnsatzRun, InitialPacket, PhysicalGrid,
    DELTA_EXPONENT,
};
use crate::classical::{action_along, continue_through_crossing, integrate_flow, FlowOptions, PhasePoint, Trajectory};
use crate::io::{fmt_f64, Table};
use crate::landau_zener::{coeff_a, coeff_b_direct, lz_oracle};
use crate::potential::{Mode, PotentialModel, Quadratic};
use crate::profile::{
    evolve_compensated, evolve_profile, gaussian_oracle, hessian_at, GaussianParams, ProfileGrid, DEFAULT_HALF_WIDTH, DEFAULT_N, TAU_SWITCH,
};
use crate::reference::{mode_masses, propagate_reference, Field2};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Adiabatic,
    CrossingSingle,
    CrossingPair,
    LzTable,
    ClassicalOnly,
}

impl RunKind {
    fn needs_epsilons(self) -> bool {
        matches!(self, RunKind::Adiabatic | RunKind::CrossingSingle | RunKind::CrossingPair)
    }
}

/// Coefficients of `c + g·x + ½ xᵀHx`; a missing Hessian is zero.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticConfig {
    #[serde(default)]
    pub constant: f64,
    pub linear: Vec<f64>,
    pub hessian: Option<Vec<Vec<f64>>>,
}

impl QuadraticConfig {
    fn build(&self, field: &str) -> Result<Quadratic> {
        let d = self.linear.len();
        let hessian = match &self.hessian {
            None => DMatrix::zeros(d, d),
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Invalid(format!("model.{field}.hessian must be {d}x{d}")));
                }
                DMatrix::from_fn(d, d, |i, j| rows[i][j])
            }
        };
        Ok(Quadratic {
            constant: self.constant,
            linear: DVector::from_vec(self.linear.clone()),
            hessian,
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    LinearIsotropic {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// `v(x) = κ·x`, `w(x) = Gx + c`.
    Tilted { kappa: Vec<f64>, g: [Vec<f64>; 2], c: [f64; 2] },
    Polynomial {
        v: QuadraticConfig,
        w1: QuadraticConfig,
        w2: QuadraticConfig,
    },
}

fn default_dim() -> usize {
    2
}

impl ModelConfig {
    pub fn build(&self) -> Result<PotentialModel> {
        match self {
            ModelConfig::LinearIsotropic { dim } => PotentialModel::linear_isotropic(*dim),
            ModelConfig::Tilted { kappa, g, c } => {
                let d = kappa.len();
                if g.iter().any(|r| r.len() != d) {
                    return Err(Error::Invalid(format!("model.g rows must have length {d}")));
                }
                PotentialModel::tilted(DVector::from_vec(kappa.clone()), DMatrix::from_fn(2, d, |i, j| g[i][j]), *c)
            }
            ModelConfig::Polynomial { v, w1, w2 } => {
                PotentialModel::polynomial("polynomial", v.build("v")?, w1.build("w1")?, w2.build("w2")?)
            }
        }
    }
}

/// A Gaussian packet `Y₀ WP_{z₀} φ`, `φ` the standard Gaussian shifted by `center`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub mode: Mode,
    #[serde(default = "one")]
    pub sign: f64,
    pub center: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl PacketConfig {
    fn z0(&self) -> PhasePoint {
        PhasePoint::new(&self.q, &self.p)
    }

    fn initial(&self, profile: &ProfileConfig, t0: f64) -> InitialPacket {
        let d = self.q.len();
        let center = self.center.clone().unwrap_or_else(|| vec![0.0; d]);
        InitialPacket {
            z0: self.z0(),
            mode: self.mode,
            profile: ProfileGrid::gaussian(d, profile.n, profile.half_width, &center, t0, self.mode),
            sign: self.sign,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default = "default_profile_n")]
    pub n: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_profile_n() -> usize {
    DEFAULT_N
}

fn default_half_width() -> f64 {
    DEFAULT_HALF_WIDTH
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            n: DEFAULT_N,
            half_width: DEFAULT_HALF_WIDTH,
        }
    }
}

/// A physical box used for one value of ε instead of the default one.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxOverride {
    pub epsilon: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_grid_n")]
    pub n: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default, rename = "box")]
    pub boxes: Vec<BoxOverride>,
}

fn default_grid_n() -> usize {
    512
}

impl GridConfig {
    pub fn physical(&self, epsilon: f64) -> Result<PhysicalGrid> {
        let (lo, hi) = match self.boxes.iter().find(|b| b.epsilon == epsilon) {
            Some(b) => (b.lo.clone(), b.hi.clone()),
            None => (self.lo.clone(), self.hi.clone()),
        };
        PhysicalGrid::new(self.n, lo, hi, epsilon)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LzConfig {
    pub eta2: Vec<f64>,
    #[serde(default)]
    pub eta1: f64,
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default = "default_s0")]
    pub s0: f64,
}

fn default_s0() -> f64 {
    200.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: RunKind,
    pub model: ModelConfig,
    pub packet: Option<PacketConfig>,
    /// The plus-mode packet of a crossing pair.
    pub partner: Option<PacketConfig>,
    #[serde(default)]
    pub t0: f64,
    pub t_end: Option<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_delta_exponent")]
    pub delta_exponent: f64,
    /// Exponent of the cut-off `R = ε^{−β}` reported with each run.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Reference time step as a fraction of ε.
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub profile: ProfileConfig,
    pub grid: Option<GridConfig>,
    pub lz: Option<LzConfig>,
    pub output: Option<PathBuf>,
}

fn default_delta_exponent() -> f64 {
    DELTA_EXPONENT
}

fn default_beta() -> f64 {
    1.0 / 50.0
}

fn default_dt_factor() -> f64 {
    0.1
}

fn default_samples() -> usize {
    101
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Invalid(m) => Error::Invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn t_end(&self) -> Result<f64> {
        self.t_end.ok_or_else(|| Error::Invalid("t_end is required for this kind".into()))
    }

    fn packet(&self) -> Result<&PacketConfig> {
        self.packet
            .as_ref()
            .ok_or_else(|| Error::Invalid("[packet] is required for this kind".into()))
    }

    fn grid(&self) -> Result<&GridConfig> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::Invalid("[grid] is required for this kind".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        let model = self.model.build()?;
        let d = model.dim();
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return bad("epsilons: values must be positive".into());
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilons: values must be strictly descending".into());
        }
        if !(self.dt_factor > 0.0 && self.dt_factor <= 0.1) {
            return bad(format!("dt_factor: must lie in (0, 0.1], got {}", self.dt_factor));
        }
        if !(self.delta_exponent > 0.0 && self.delta_exponent < 0.5) {
            return bad(format!("delta_exponent: must lie in (0, 1/2), got {}", self.delta_exponent));
        }
        if self.profile.n < 8 || self.profile.half_width <= 0.0 {
            return bad("profile: n must be at least 8 and half_width positive".into());
        }
        if self.samples < 2 {
            return bad("samples: need at least 2".into());
        }
        for (name, pk) in [("packet", &self.packet), ("partner", &self.partner)] {
            if let Some(pk) = pk {
                if pk.q.len() != d || pk.p.len() != d {
                    return bad(format!("{name}: q and p must have length {d}"));
                }
                if pk.center.as_ref().is_some_and(|c| c.len() != d) {
                    return bad(format!("{name}.center: must have length {d}"));
                }
                if pk.mode == Mode::Reference {
                    return bad(format!("{name}.mode: must be plus or minus"));
                }
                if pk.sign.abs() != 1.0 {
                    return bad(format!("{name}.sign: must be 1 or -1"));
                }
            }
        }
        if let Some(g) = &self.grid {
            for lo_hi in std::iter::once((&g.lo, &g.hi)).chain(g.boxes.iter().map(|b| (&b.lo, &b.hi))) {
                if lo_hi.0.len() != d || lo_hi.1.len() != d || lo_hi.0.iter().zip(lo_hi.1).any(|(a, b)| a >= b) {
                    return bad(format!("grid: lo and hi must have length {d} with lo < hi"));
                }
            }
        }
        match self.kind {
            RunKind::LzTable => {
                let lz = self
                    .lz
                    .as_ref()
                    .ok_or_else(|| Error::Invalid("[lz] is required for lz-table".into()))?;
                if lz.eta2.is_empty() || lz.r <= 0.0 || lz.s0 <= 0.0 {
                    return bad("lz: need eta2 values, r > 0 and s0 > 0".into());
                }
            }
            RunKind::ClassicalOnly => {
                self.packet()?;
                if self.t_end()? <= self.t0 {
                    return bad("t_end: must exceed t0".into());
                }
            }
            _ => {
                self.packet()?;
                self.grid()?;
                if self.t_end()? <= self.t0 {
                    return bad("t_end: must exceed t0".into());
                }
                if self.epsilons.is_empty() {
                    return bad("epsilons: at least one value is required".into());
                }
            }
        }
        if self.kind == RunKind::CrossingPair {
            let partner = self
                .partner
                .as_ref()
                .ok_or_else(|| Error::Invalid("[partner] is required for crossing-pair".into()))?;
            if self.packet()?.mode != Mode::Minus || partner.mode != Mode::Plus {
                return bad("crossing-pair: packet must be on the minus mode and partner on the plus mode".into());
            }
        }
        Ok(())
    }

    pub fn delta(&self, epsilon: f64) -> f64 {
        epsilon.powf(self.delta_exponent)
    }
}

/// Errors of the approximation at one output time.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeError {
    pub label: String,
    pub time: f64,
    pub l2: f64,
    pub sigma1: f64,
}

/// Mode masses of the reference solution at the final time, with the
/// ansatz and Wigner predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct MassReport {
    pub reference: (f64, f64),
    pub ansatz: (f64, f64),
    pub wigner: Option<(f64, f64)>,
    pub cross_term: Option<f64>,
    /// `|m₊ + m₋ − M₀|` for the reference, `M₀` the initial mass.
    pub defect: f64,
}

#[derive(Clone, Debug)]
pub struct EpsilonReport {
    pub epsilon: f64,
    pub delta: f64,
    pub errors: Vec<TimeError>,
    pub masses: MassReport,
    /// Spectral tail of the reference at the final time.
    pub final_tail: f64,
    pub seconds: f64,
}

impl EpsilonReport {
    pub fn final_error(&self) -> f64 {
        self.errors.last().map_or(f64::NAN, |e| e.l2)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub entries: Vec<EpsilonReport>,
    /// Least-squares slope of `ln error(T)` against `ln ε`.
    pub slope: Option<f64>,
    /// Final-time errors strictly decrease as ε decreases.
    pub monotone: Option<bool>,
    pub summary: Vec<(String, f64)>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Execute the pipeline selected by `cfg.kind`, writing CSVs to `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    match cfg.kind {
        RunKind::LzTable => lz_table(cfg, out),
        RunKind::ClassicalOnly => classical_only(cfg, out),
        _ => wave_run(cfg, out),
    }
}

/// [`run`] over at least three values of ε, with the fitted slope and the
/// monotonicity of the final-time error.
pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    if !cfg.kind.needs_epsilons() {
        return Err(Error::Invalid(format!("sweep needs a wave-packet kind, got {:?}", cfg.kind)));
    }
    if cfg.epsilons.len() < 3 {
        return Err(Error::Invalid(format!(
            "sweep needs at least 3 epsilons, got {}",
            cfg.epsilons.len()
        )));
    }
    run(cfg, out)
}

fn wave_run(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    let model = cfg.model.build()?;
    let entries: Vec<EpsilonReport> = cfg
        .epsilons
        .par_iter()
        .map(|&eps| run_epsilon(cfg, &model, eps))
        .collect::<Result<_>>()?;
    let mut report = RunReport {
        entries,
        ..RunReport::default()
    };
    if report.entries.len() >= 2 {
        let eps: Vec<f64> = report.entries.iter().map(|e| e.epsilon).collect();
        let err: Vec<f64> = report.entries.iter().map(|e| e.final_error()).collect();
        report.slope = Some(loglog_slope(&eps, &err));
        report.monotone = Some(err.windows(2).all(|w| w[1] < w[0]));
    }
    write_wave_tables(cfg, &mut report, out)?;
    Ok(report)
}

/// Output times: `t0`, `t♭ ± δ` when they fall inside the run, and `T`.
fn output_times(cfg: &ExperimentConfig, t_flat: Option<f64>, delta: f64) -> Result<Vec<(String, f64)>> {
    let (t0, t1) = (cfg.t0, cfg.t_end()?);
    let mut times = vec![("t0".to_string(), t0)];
    match t_flat {
        Some(tf) => {
            if tf - delta > t0 {
                times.push(("before".into(), tf - delta));
            }
            if tf + delta < t1 {
                times.push(("after".into(), tf + delta));
            }
        }
        None => times.push(("middle".into(), 0.5 * (t0 + t1))),
    }
    times.push(("end".into(), t1));
    Ok(times)
}

fn run_epsilon(cfg: &ExperimentConfig, model: &PotentialModel, eps: f64) -> Result<EpsilonReport> {
    let clock = Instant::now();
    let t1 = cfg.t_end()?;
    let pg = cfg.grid()?.physical(eps)?;
    let delta = cfg.delta(eps);
    let pk = cfg.packet()?;
    let init = pk.initial(&cfg.profile, cfg.t0);
    let probe = integrate_flow(model, pk.mode, &pk.z0(), cfg.t0, t1, &FlowOptions::default())?;
    let t_flat = probe.geometry().map(|g| g.t_flat);
    if cfg.kind == RunKind::Adiabatic && t_flat.is_some() {
        return Err(Error::Invalid("adiabatic run: the trajectory meets the crossing set".into()));
    }
    let times = output_times(cfg, t_flat, delta)?;
    let tlist: Vec<f64> = times.iter().map(|t| t.1).collect();
    let (run, mut psi) = match cfg.kind {
        RunKind::CrossingPair => {
            let partner = cfg.partner.as_ref().unwrap().initial(&cfg.profile, cfg.t0);
            let run = propagate_pair(model, &init, &partner, cfg.t0, t1, eps, &tlist)?;
            // the ansatz may have flipped the partner to align the two frames
            let mut partner = partner;
            if run.crossing.as_ref().is_some_and(|c| c.pair_sign < 0.0) {
                partner.sign = -partner.sign;
            }
            let psi = initial_field(model, &pg, &init, cfg.t0)?.combine(&initial_field(model, &pg, &partner, cfg.t0)?, 1.0);
            (run, psi)
        }
        _ => (
            propagate_ansatz(model, &init, cfg.t0, t1, eps, &tlist)?,
            initial_field(model, &pg, &init, cfg.t0)?,
        ),
    };
    for c in 0..2 {
        pg.check_resolution(&psi.psi[c])?;
    }
    let m0 = psi.mass();
    let dt = cfg.dt_factor * eps;
    let mut errors = Vec::with_capacity(times.len());
    for (label, t) in &times {
        if *t > psi.time {
            psi = propagate_reference(model, &psi, psi.time, *t, dt)?;
        }
        let app = run.assemble(&pg, *t)?;
        let diff = psi.combine(&app, -1.0);
        let sigma1 = sigma_norm(&pg.grid, &[&diff.psi[0], &diff.psi[1]], 1, eps)?;
        errors.push(TimeError {
            label: label.clone(),
            time: *t,
            l2: diff.mass().sqrt(),
            sigma1,
        });
    }
    let masses = mass_report(model, &run, &psi, t1, m0);
    let final_tail = pg.spectral_tail(&psi.psi[0]).max(pg.spectral_tail(&psi.psi[1]));
    Ok(EpsilonReport {
        epsilon: eps,
        delta,
        errors,
        masses,
        final_tail,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

fn mass_report(model: &PotentialModel, run: &AnsatzRun, psi: &Field2, t1: f64, m0: f64) -> MassReport {
    let reference = mode_masses(model, psi);
    let ansatz = (run.plus.mass_at(t1), run.minus.mass_at(t1));
    let (wigner, cross) = match &run.crossing {
        Some(c) => {
            let grid = c.out_plus.grid.clone();
            let zero = |mode| ProfileGrid::zeros(grid.clone(), c.geom.t_flat, mode);
            let up = c.incoming_plus.as_ref().map_or_else(|| zero(Mode::Plus), |i| i.u_in.clone());
            let um = c.incoming_minus.as_ref().map_or_else(|| zero(Mode::Minus), |i| i.u_in.clone());
            let cross = (c.incoming_plus.is_some() && c.incoming_minus.is_some()).then(|| cross_term(&c.transfer, &up, &um));
            (Some(wigner_masses(&up, &um, &c.geom)), cross)
        }
        None => (None, None),
    };
    MassReport {
        reference,
        ansatz,
        wigner,
        cross_term: cross,
        defect: (reference.0 + reference.1 - m0).abs(),
    }
}

fn write_wave_tables(cfg: &ExperimentConfig, report: &mut RunReport, out: &Path) -> Result<()> {
    let mut errors = Table::new(&["epsilon", "label", "time", "l2_error", "sigma1_error"]);
    let mut masses = Table::new(&[
        "epsilon",
        "reference_plus",
        "reference_minus",
        "ansatz_plus",
        "ansatz_minus",
        "wigner_plus",
        "wigner_minus",
        "cross_term",
        "mass_defect",
    ]);
    let mut params = Table::new(&["epsilon", "delta", "s0", "cutoff_r", "beta", "dt", "final_spectral_tail"]);
    for e in &report.entries {
        for te in &e.errors {
            errors.push(vec![
                fmt_f64(e.epsilon),
                te.label.clone(),
                fmt_f64(te.time),
                fmt_f64(te.l2),
                fmt_f64(te.sigma1),
            ]);
        }
        let m = &e.masses;
        let opt = |v: Option<f64>| v.map_or_else(String::new, fmt_f64);
        masses.push(vec![
            fmt_f64(e.epsilon),
            fmt_f64(m.reference.0),
            fmt_f64(m.reference.1),
            fmt_f64(m.ansatz.0),
            fmt_f64(m.ansatz.1),
            opt(m.wigner.map(|w| w.0)),
            opt(m.wigner.map(|w| w.1)),
            opt(m.cross_term),
            fmt_f64(m.defect),
        ]);
        params.push_floats(&[
            e.epsilon,
            e.delta,
            e.delta / e.epsilon.sqrt(),
            e.epsilon.powf(-cfg.beta),
            cfg.beta,
            cfg.dt_factor * e.epsilon,
            e.final_tail,
        ]);
    }
    let mut summary = Vec::new();
    if let Some(s) = report.slope {
        summary.push(("fitted_slope".to_string(), s));
    }
    if let Some(m) = report.monotone {
        summary.push(("monotone".to_string(), if m { 1.0 } else { 0.0 }));
    }
    if let Some(last) = report.entries.last() {
        summary.push(("final_error_smallest_epsilon".to_string(), last.final_error()));
    }
    let mut st = Table::new(&["quantity", "value"]);
    for (k, v) in &summary {
        st.push(vec![k.clone(), fmt_f64(*v)]);
    }
    for (name, table) in [
        ("errors.csv", &errors),
        ("masses.csv", &masses),
        ("parameters.csv", &params),
        ("summary.csv", &st),
    ] {
        let p = out.join(name);
        table.write(&p)?;
        report.files.push(p);
    }
    report.summary = summary;
    Ok(())
}

fn lz_table(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    let lz = cfg.lz.as_ref().unwrap();
    let rows: Vec<[f64; 8]> = lz
        .eta2
        .par_iter()
        .map(|&e2| {
            let s = e2 / lz.r.sqrt();
            let a = coeff_a(s);
            let b = coeff_b_direct(s);
            let o = lz_oracle((lz.eta1, e2), lz.r, lz.s0)?;
            Ok([
                e2,
                a,
                b.norm(),
                b.arg(),
                (a * a + b.norm_sqr() - 1.0).abs(),
                o.transition,
                a * a,
                o.discrepancy,
            ])
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(&[
        "eta2",
        "a",
        "b_abs",
        "b_arg",
        "unitarity_defect",
        "oracle_transition",
        "predicted_transition",
        "oracle_discrepancy",
    ]);
    for r in &rows {
        t.push_floats(r);
    }
    let p = out.join("lz_table.csv");
    t.write(&p)?;
    let worst = rows.iter().map(|r| r[7]).fold(0.0, f64::max);
    Ok(RunReport {
        files: vec![p],
        summary: vec![("max_oracle_discrepancy".into(), worst)],
        ..RunReport::default()
    })
}

fn sample_branch(rows: &mut Table, label: &str, model: &PotentialModel, traj: &Trajectory, from: f64, to: f64, samples: usize) {
    let action = action_along(model, traj);
    for k in 0..samples {
        let t = from + (to - from) * k as f64 / (samples - 1) as f64;
        let z = traj.state(t);
        let mut row = vec![label.to_string(), fmt_f64(t)];
        row.extend(z.q.iter().chain(z.p.iter()).map(|&v| fmt_f64(v)));
        row.push(fmt_f64(action.total_at(t)));
        row.push(fmt_f64(2.0 * model.w(z.q.as_slice()).norm()));
        rows.push(row);
    }
}

fn classical_only(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    let model = cfg.model.build()?;
    let pk = cfg.packet()?;
    let t1 = cfg.t_end()?;
    let d = model.dim();
    let opts = FlowOptions::default();
    let traj = integrate_flow(&model, pk.mode, &pk.z0(), cfg.t0, t1, &opts)?;
    let mut header = vec!["branch".to_string(), "time".to_string()];
    header.extend((0..d).map(|i| format!("q{i}")));
    header.extend((0..d).map(|i| format!("p{i}")));
    header.extend(["action".to_string(), "gap".to_string()]);
    let hdr: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut rows = Table::new(&hdr);
    let mut files = Vec::new();
    let mut summary = Vec::new();
    match traj.geometry() {
        None => sample_branch(&mut rows, pk.mode.label(), &model, &traj, cfg.t0, t1, cfg.samples),
        Some(g) => {
            let tf = g.t_flat;
            sample_branch(
                &mut rows,
                &format!("in-{}", pk.mode.label()),
                &model,
                &traj,
                cfg.t0,
                tf,
                cfg.samples,
            );
            for mode in [Mode::Plus, Mode::Minus] {
                let cont = continue_through_crossing(&model, &traj, mode, &opts)?;
                let start = tf + opts.h_restart;
                if start < t1 {
                    sample_branch(&mut rows, &format!("out-{}", mode.label()), &model, &cont, start, t1, cfg.samples);
                }
            }
            let mut ct = Table::new(&["quantity", "value"]);
            let mut put = |k: String, v: f64| ct.push(vec![k, fmt_f64(v)]);
            put("t_flat".into(), tf);
            for i in 0..d {
                put(format!("q_flat{i}"), g.q_flat[i]);
            }
            for i in 0..d {
                put(format!("p_flat{i}"), g.p_flat[i]);
            }
            put("r".into(), g.r);
            put("omega0".into(), g.omega[0]);
            put("omega1".into(), g.omega[1]);
            for i in 0..d {
                for j in 0..d {
                    put(format!("gamma0_{i}{j}"), g.gamma0[(i, j)]);
                }
            }
            put("closest_gap".into(), traj.crossing.as_ref().unwrap().closest_gap);
            let p = out.join("crossing.csv");
            ct.write(&p)?;
            files.push(p);
            summary.push(("t_flat".into(), tf));
        }
    }
    let p = out.join("trajectory.csv");
    rows.write(&p)?;
    files.insert(0, p);
    Ok(RunReport {
        files,
        summary,
        ..RunReport::default()
    })
}

/// Profile evolution checks along the configured packet's trajectory: the
/// grid scheme against the Gaussian oracle away from the crossing, and the
/// `Σ¹` norm of the profile as it approaches the crossing.
pub fn profile_test(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport> {
    let model = cfg.model.build()?;
    let pk = cfg.packet()?;
    let t1 = cfg.t_end()?;
    let d = model.dim();
    let traj = integrate_flow(&model, pk.mode, &pk.z0(), cfg.t0, t1, &FlowOptions::default())?;
    let geom = traj.geometry().cloned();
    let smooth_end = geom.as_ref().map_or(t1, |g| (g.t_flat - TAU_SWITCH).min(t1));
    if smooth_end <= cfg.t0 {
        return Err(Error::Invalid(
            "profile-test: the trajectory starts inside the crossing window".into(),
        ));
    }
    let g0 = GaussianParams::standard(d);
    let mut u = g0.sample(
        &ProfileGrid::gaussian(d, cfg.profile.n, cfg.profile.half_width, &vec![0.0; d], cfg.t0, pk.mode).grid,
        cfg.t0,
        pk.mode,
    );
    let mass0 = u.mass();
    let mut smooth = Table::new(&["time", "mass_drift", "oracle_distance", "sigma1"]);
    let steps = 10;
    let mut worst: f64 = 0.0;
    for k in 1..=steps {
        let t = cfg.t0 + (smooth_end - cfg.t0) * k as f64 / steps as f64;
        u = evolve_profile(&model, &traj, &u, u.time, t)?;
        let hess = |s: f64| {
            hessian_at(&model, &traj, s)
                .map(|h| h.full)
                .unwrap_or_else(|_| DMatrix::from_element(d, d, f64::NAN))
        };
        let o = gaussian_oracle(hess, &g0, cfg.t0, t)?;
        let dist = u.distance(&o.sample(&u.grid, t, pk.mode));
        worst = worst.max(dist);
        let s1 = sigma_norm(&u.grid, &[&u.values], 1, 1.0)?;
        smooth.push_floats(&[t, u.mass() - mass0, dist, s1]);
    }
    let mut files = Vec::new();
    let p = out.join("profile_smooth.csv");
    smooth.write(&p)?;
    files.push(p);
    let mut summary = vec![("max_oracle_distance".to_string(), worst)];
    if let Some(g) = geom.filter(|g| g.t_flat < t1) {
        let mut approach = Table::new(&["distance", "mass_drift", "sigma1"]);
        let mut cur = u.clone();
        for tau in [3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4] {
            cur = evolve_compensated(&model, &traj, &cur, cur.time, g.t_flat - tau, &g)?;
            let s1 = sigma_norm(&cur.grid, &[&cur.values], 1, 1.0)?;
            approach.push_floats(&[tau, cur.mass() - mass0, s1]);
        }
        let p = out.join("profile_approach.csv");
        approach.write(&p)?;
        files.push(p);
        summary.push(("t_flat".into(), g.t_flat));
    }
    Ok(RunReport {
        files,
        summary,
        ..RunReport::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &str = r#"
kind = "crossing-single"
epsilons = [0.02, 0.01]
t_end = 1.0

[model]
name = "linear-isotropic"

[packet]
q = [-0.5, 0.0]
p = [1.4142135623730951, 0.0]
mode = "minus"

[grid]
n = 128
lo = [-1.6, -2.6]
hi = [2.4, 2.6]

[[grid.box]]
epsilon = 0.01
lo = [-1.4, -2.3]
hi = [2.2, 2.3]
"#;

    #[test]
    fn parses_and_applies_box_overrides() {
        let cfg = ExperimentConfig::from_toml(SINGLE).unwrap();
        assert_eq!(cfg.kind, RunKind::CrossingSingle);
        assert_eq!(cfg.profile.n, DEFAULT_N);
        let g = cfg.grid.as_ref().unwrap();
        assert_eq!(g.physical(0.01).unwrap().grid.lo, vec![-1.4, -2.3]);
        assert_eq!(g.physical(0.02).unwrap().grid.lo, vec![-1.6, -2.6]);
        assert!((cfg.delta(0.01) - 0.01f64.powf(5.0 / 14.0)).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = SINGLE.replace("t_end = 1.0", "t_end = 1.0\nt_ned = 2.0");
        let err = ExperimentConfig::from_toml(&typo).unwrap_err().to_string();
        assert!(err.contains("t_ned"), "{err}");
        let typo = SINGLE.replace("mode = \"minus\"", "mode = \"minus\"\nsgin = 1.0");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
        let typo = SINGLE.replace("name = \"linear-isotropic\"", "name = \"linear-isotropic\"\ndimm = 2");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let cases = [
            SINGLE.replace("[0.02, 0.01]", "[0.01, 0.02]"),
            SINGLE.replace("[0.02, 0.01]", "[0.02, -0.01]"),
            SINGLE.replace("t_end = 1.0", "t_end = -1.0"),
            SINGLE.replace("q = [-0.5, 0.0]", "q = [-0.5]"),
            SINGLE.replace("mode = \"minus\"", "mode = \"reference\""),
            SINGLE.replace("[grid]", "[gird]"),
            SINGLE.replace("epsilons = [0.02, 0.01]", "epsilons = []"),
        ];
        for c in &cases {
            let e = ExperimentConfig::from_toml(c).unwrap_err();
            assert!(!e.is_numerical(), "{e}");
        }
    }

    #[test]
    fn sweep_needs_three_epsilons() {
        let cfg = ExperimentConfig::from_toml(SINGLE).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(sweep(&cfg, dir.path()), Err(Error::Invalid(_))));
    }

    #[test]
    fn slope_of_a_power_law() {
        let x = [0.02, 0.01, 0.005];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.5)).collect();
        assert!((loglog_slope(&x, &y) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lz_table_rows() {
        let cfg = ExperimentConfig::from_toml(
            r#"
kind = "lz-table"
[model]
name = "linear-isotropic"
[lz]
eta2 = [0.0, 1.0]
s0 = 50.0
"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rep = run(&cfg, dir.path()).unwrap();
        let text = std::fs::read_to_string(&rep.files[0]).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("eta2,a,b_abs"));
    }

    #[test]
    fn classical_run_writes_crossing_metadata() {
        let cfg = ExperimentConfig::from_toml(
            r#"
kind = "classical-only"
t_end = 1.0
samples = 11
[model]
name = "linear-isotropic"
[packet]
q = [-0.5, 0.0]
p = [1.4142135623730951, 0.0]
mode = "minus"
"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rep = run(&cfg, dir.path()).unwrap();
        assert_eq!(rep.files.len(), 2);
        let traj = std::fs::read_to_string(&rep.files[0]).unwrap();
        assert_eq!(traj.lines().count(), 1 + 3 * 11);
        let tf = rep.summary.iter().find(|s| s.0 == "t_flat").unwrap().1;
        assert!((tf - (2f64.sqrt() - 1.0)).abs() < 1e-8);
    }
}
