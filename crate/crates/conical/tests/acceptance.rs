//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failures are reported, not raised, so that the full table is always
//! printed. Set `ACCEPTANCE_STRICT=1` to turn any failure into a non-zero exit
//! and `ACCEPTANCE_ONLY=1,2,5` to run a subset.

use std::path::{Path, PathBuf};
use std::time::Instant;

use conical::ansatz::sigma_norm;
use conical::classical::{action_along, continue_through_crossing, integrate_flow, reference_frame, FlowOptions, PhasePoint};
use conical::cli::{self, loglog_slope, ExperimentConfig, RunReport};
use conical::landau_zener::{coeff_a, coeff_b, lz_oracle};
use conical::profile::{
    compensate, evolve_compensated, evolve_hessian_path, gaussian_oracle, GaussianParams, ProfileGrid, DT_SMOOTH, TAU_SWITCH,
};
use conical::{Mode, PotentialModel, Result};
use nalgebra::{DMatrix, Vector2};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn scratch(name: &str) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&p);
    p
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn lz_unitarity() -> Result<Outcome> {
    let clock = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..=8000 {
        let e2 = -4.0 + 1e-3 * k as f64;
        let a = coeff_a(e2);
        worst = worst.max((a * a + coeff_b(e2).norm_sqr() - 1.0).abs());
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 1.0,
        format!("max ||a|^2+|b|^2-1| = {worst:.2e} (tol 1e-12), {secs:.3}s (limit 1s)"),
    )
}

fn lz_scattering() -> Result<Outcome> {
    let clock = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for e2 in [0.5, 1.0, 2.0] {
        let s0s = [200.0, 400.0, 800.0];
        let runs: Vec<_> = s0s.iter().map(|&s0| lz_oracle((0.0, e2), 1.0, s0)).collect::<Result<_>>()?;
        let a2 = coeff_a(e2).powi(2);
        let gap = (runs[0].transition - a2).abs();
        let prob_ok = gap <= 0.01 * a2;
        let ratio = runs[0].discrepancy / runs[1].discrepancy;
        let halves = (1.6..=2.4).contains(&ratio);
        let disc: Vec<f64> = runs.iter().map(|r| r.discrepancy).collect();
        let power = -loglog_slope(&s0s, &disc);
        ok &= prob_ok && halves;
        parts.push(format!(
            "eta2={e2}: |P-a^2|/a^2 = {:.1e}, disc ratio {ratio:.2}, fitted 1/s power {power:.2}",
            gap / a2
        ));
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(ok && secs < 10.0, format!("{}; {secs:.1}s (limit 10s)", parts.join("; ")))
}

fn classical_asymptotics() -> Result<Outcome> {
    let clock = Instant::now();
    let model = PotentialModel::linear_isotropic(2)?;
    let opts = FlowOptions::default();
    let z0 = PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]);
    let inc = integrate_flow(&model, Mode::Minus, &z0, 0.0, 1.0, &opts)?;
    let g = inc.geometry().unwrap().clone();
    let out = continue_through_crossing(&model, &inc, Mode::Minus, &opts)?;
    let (_, s_ref) = reference_frame(&model, &g, 0.0, 1.0, &opts)?;
    let (s_in, s_out) = (action_along(&model, &inc), action_along(&model, &out));
    let taus: Vec<f64> = (0..=12).map(|k| 1e-4 * 10f64.powf(k as f64 / 4.0)).collect();
    let dir = g.omega * g.r;
    let mut slopes = Vec::new();
    for side in [-1.0, 1.0] {
        let mut werr = Vec::new();
        let mut serr = Vec::new();
        for &tau in &taus {
            let s = side * tau;
            let t = g.t_flat + s;
            let (traj, act) = if side < 0.0 {
                (&inc, s_in.at(t) - s_in.at_crossing())
            } else {
                (&out, s_out.at(t))
            };
            let w = model.w(traj.state(t).q.as_slice());
            werr.push((Vector2::new(w[0], w[1]) - dir * s).norm());
            serr.push((act - s_ref.at(t) - side * g.r * s * s).abs());
        }
        slopes.push((loglog_slope(&taus, &werr), loglog_slope(&taus, &serr)));
    }
    let secs = clock.elapsed().as_secs_f64();
    let ok = slopes.iter().all(|s| s.0 >= 1.9 && s.1 >= 2.9) && secs < 5.0;
    outcome(
        ok,
        format!(
            "w slope (in {:.3}, out {:.3}) >= 1.9, action slope (in {:.3}, out {:.3}) >= 2.9; {secs:.2}s (limit 5s)",
            slopes[0].0, slopes[1].0, slopes[0].1, slopes[1].1
        ),
    )
}

fn profile_singular() -> Result<Outcome> {
    let clock = Instant::now();
    let model = PotentialModel::linear_isotropic(2)?;
    let z0 = PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]);
    let traj = integrate_flow(&model, Mode::Minus, &z0, 0.0, 1.0, &FlowOptions::default())?;
    let g = traj.geometry().unwrap().clone();
    let tf = g.t_flat;
    let t_start = tf - TAU_SWITCH;
    let u0 = ProfileGrid::gaussian(2, 256, 16.0, &[0.0, 0.3], t_start, Mode::Minus);
    let limit = evolve_compensated(&model, &traj, &u0, t_start, tf, &g)?;
    let taus: Vec<f64> = (0..=8).map(|k| 3e-2 * 0.3f64.powi(k)).collect();
    let mut cur = u0.clone();
    let (mut dist, mut sig) = (Vec::new(), Vec::new());
    for &tau in &taus {
        cur = evolve_compensated(&model, &traj, &cur, cur.time, tf - tau, &g)?;
        let mut v = cur.clone();
        compensate(&mut v, &g, Mode::Minus, tf - tau, false);
        dist.push(v.distance(&limit));
        sig.push(sigma_norm(&cur.grid, &[&cur.values], 1, 1.0)?);
    }
    // regressions use the asymptotic window τ ≤ 1e-3
    let near: Vec<usize> = (0..taus.len()).filter(|&k| taus[k] <= 1e-3).collect();
    let pick = |v: &[f64]| near.iter().map(|&k| v[k]).collect::<Vec<f64>>();
    let logs: Vec<f64> = taus.iter().map(|t| 1.0 + t.ln().abs()).collect();
    let x1: Vec<f64> = taus.iter().zip(&logs).map(|(t, l)| t * l).collect();
    let x2: Vec<f64> = taus.iter().zip(&logs).map(|(t, l)| t * l * l).collect();
    let rate = loglog_slope(&pick(&x1), &pick(&dist));
    let rate_sq = loglog_slope(&pick(&x2), &pick(&dist));
    // log growth: dΣ¹/d|ln τ| must not increase as τ → 0
    let growth: Vec<f64> = (1..taus.len()).map(|k| (sig[k] - sig[k - 1]) / (logs[k] - logs[k - 1])).collect();
    let half = growth.len() / 2;
    let early = growth[..half].iter().cloned().fold(0.0, f64::max);
    let late = growth[half..].iter().cloned().fold(0.0, f64::max);
    let sig_ok = late <= 1.05 * early;
    let drift = (limit.mass() - u0.mass()).abs() / TAU_SWITCH.max(1.0);
    let secs = clock.elapsed().as_secs_f64();
    let ok = rate >= 0.9 && sig_ok && drift <= 1e-10 && secs < 60.0;
    outcome(
        ok,
        format!(
            "Cauchy exponent against tau(1+|ln tau|) {rate:.3} (>= 0.9; against tau(1+|ln tau|)^2: {rate_sq:.3}), \
             dSigma1/d|ln tau| {late:.3} near the crossing vs {early:.3} away (log growth), L2 drift {drift:.1e}/unit time; {secs:.1}s (limit 60s)"
        ),
    )
}

fn gaussian_equivalence() -> Result<Outcome> {
    let clock = Instant::now();
    let paths: [(&str, Box<dyn Fn(f64) -> DMatrix<f64>>); 3] = [
        ("free", Box::new(|_| DMatrix::zeros(2, 2))),
        ("harmonic", Box::new(|_| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]))),
        (
            "time-dependent",
            Box::new(|t: f64| DMatrix::from_row_slice(2, 2, &[1.0 + 0.5 * (2.0 * t).sin(), 0.3 * t.cos(), 0.3 * t.cos(), -0.4 + 0.2 * t])),
        ),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, h) in &paths {
        let g0 = GaussianParams::standard(2);
        let u = g0.sample(
            &ProfileGrid::gaussian(2, 128, 12.0, &[0.0, 0.0], 0.0, Mode::Minus).grid,
            0.0,
            Mode::Minus,
        );
        let grid = evolve_hessian_path(&u, |t| Ok(h(t)), 0.0, 1.0, DT_SMOOTH)?;
        let exact = gaussian_oracle(h, &g0, 0.0, 1.0)?.sample(&u.grid, 1.0, Mode::Minus);
        let d = grid.distance(&exact);
        worst = worst.max(d);
        parts.push(format!("{name} {d:.1e}"));
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 30.0,
        format!("L2 distance {} (tol 1e-6); {secs:.1}s (limit 30s)", parts.join(", ")),
    )
}

fn adiabatic() -> Result<Outcome> {
    let clock = Instant::now();
    let cfg = config("adiabatic.toml");
    let rep = cli::run(&cfg, &scratch("adiabatic"))?;
    let errs: Vec<f64> = rep.entries.iter().map(|e| e.final_error()).collect();
    let slope = rep.slope.unwrap();
    let secs = clock.elapsed().as_secs_f64();
    let ok = rep.monotone == Some(true) && slope >= 0.4 && secs < 600.0;
    outcome(
        ok,
        format!(
            "errors at T {} ; fitted slope {slope:.3} (>= 0.4); {secs:.0}s (limit 600s)",
            list(&errs)
        ),
    )
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" > ")
}

fn crossing_single(rep: &RunReport, secs: f64) -> Result<Outcome> {
    let last = rep.entries.last().unwrap();
    let (ref_plus, lz_plus) = (last.masses.reference.0, last.masses.wigner.unwrap().0);
    let dev = rel(ref_plus, lz_plus);
    let errs: Vec<f64> = rep.entries.iter().map(|e| e.final_error()).collect();
    let ok = dev <= 0.05 && rep.monotone == Some(true) && secs < 1800.0;
    outcome(
        ok,
        format!(
            "(a) plus mass {ref_plus:.5} vs LZ {lz_plus:.5} at eps {}: {:.2}% (tol 5%); (b) errors at T {} ; slope {:.3}; {secs:.0}s (limit 1800s)",
            last.epsilon,
            100.0 * dev,
            list(&errs),
            rep.slope.unwrap()
        ),
    )
}

fn crossing_pair() -> Result<Outcome> {
    let clock = Instant::now();
    let cfg = config("crossing_pair.toml");
    let rep = cli::run(&cfg, &scratch("crossing_pair"))?;
    let last = rep.entries.last().unwrap();
    let (r, w) = (last.masses.reference, last.masses.wigner.unwrap());
    let dev = rel(r.0, w.0).max(rel(r.1, w.1));
    let cross: Vec<f64> = rep.entries.iter().map(|e| e.masses.cross_term.unwrap()).collect();
    let decreasing = cross.windows(2).all(|p| p[1] < p[0]);
    let secs = clock.elapsed().as_secs_f64();
    let ok = dev <= 0.05 && decreasing && secs < 1800.0;
    outcome(
        ok,
        format!(
            "masses ({:.4}, {:.4}) vs Wigner ({:.4}, {:.4}) at eps {}: {:.2}% (tol 5%), ansatz ({:.4}, {:.4}); cross-term {}; {secs:.0}s (limit 1800s)",
            r.0,
            r.1,
            w.0,
            w.1,
            last.epsilon,
            100.0 * dev,
            last.masses.ansatz.0,
            last.masses.ansatz.1,
            list(&cross)
        ),
    )
}

fn determinism(first: &RunReport) -> Result<Outcome> {
    let cfg = config("crossing_single.toml");
    let second = cli::run(&cfg, &scratch("crossing_single_rerun"))?;
    let mut same = first.files.len() == second.files.len();
    let mut checked = 0;
    for (a, b) in first.files.iter().zip(&second.files) {
        same &= std::fs::read(a)? == std::fs::read(b)?;
        checked += 1;
    }
    outcome(
        same,
        format!(
            "{checked} CSV files compared byte for byte: {}",
            if same { "identical" } else { "differ" }
        ),
    )
}

fn selected(n: usize) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').any(|s| s.trim() == n.to_string()),
        Err(_) => true,
    }
}

fn report(n: usize, title: &str, res: Result<Outcome>, failures: &mut usize) {
    let (pass, detail) = match res {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if !pass {
        *failures += 1;
    }
    println!("[{}] {n}. {title}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; there is nothing to list
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failures = 0;
    let mut ran = 0;
    let mut check = |n: usize, title: &str, f: &mut dyn FnMut() -> Result<Outcome>| {
        if selected(n) {
            ran += 1;
            report(n, title, f(), &mut failures);
        }
    };
    check(1, "LZ unitarity", &mut lz_unitarity);
    check(2, "LZ scattering oracle", &mut lz_scattering);
    check(3, "classical asymptotics", &mut classical_asymptotics);
    check(4, "profile singular evolution", &mut profile_singular);
    check(5, "Gaussian oracle equivalence", &mut gaussian_equivalence);
    check(6, "adiabatic desk check", &mut adiabatic);
    let mut single = None;
    check(7, "end-to-end crossing", &mut || {
        let clock = Instant::now();
        let rep = cli::run(&config("crossing_single.toml"), &scratch("crossing_single"))?;
        let out = crossing_single(&rep, clock.elapsed().as_secs_f64());
        single = Some(rep);
        out
    });
    check(8, "two-packet interference", &mut crossing_pair);
    check(9, "determinism", &mut || match &single {
        Some(rep) => determinism(rep),
        None => {
            let rep = cli::run(&config("crossing_single.toml"), &scratch("crossing_single"))?;
            determinism(&rep)
        }
    });
    println!("acceptance: {} of {ran} criteria pass", ran - failures);
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
