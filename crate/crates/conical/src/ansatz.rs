//! Wave packets on the physical grid and the assembled approximate solution
//! `Σ Y(t) e^{iS/ε} WP_{z(t)} u(t)` on either side of a crossing.

use std::f64::consts::PI;

use nalgebra::{DVector, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::classical::{action_along, continue_through_crossing, integrate_flow, ActionCurve, FlowOptions, PhasePoint, Trajectory};
use crate::grid::{self, contract_axis, Grid, Spectral};
use crate::landau_zener::{coeff_a, coeff_b_direct, transfer_pair, transfer_single, TransferSpec};
use crate::potential::{CrossingGeometry, Mode, PotentialModel};
use crate::profile::{evolve_compensated, evolve_profile, extract_incoming, Incoming, ProfileGrid, TAU_SWITCH};
use crate::reference::Field2;
use crate::transport::{align_pair_signs, outgoing_frames, parallel_transport, transport_outgoing, EigenframePath};
use crate::{Error, Result};

/// Largest spectral tail tolerated by [`PhysicalGrid::check_resolution`].
pub const RESOLUTION_TOL: f64 = 1e-10;
/// Largest relative mass lost when sampling a wave packet.
pub const PACKET_MASS_TOL: f64 = 1e-8;
/// Matching tolerance for two packets meeting at one crossing.
pub const PAIR_TOL: f64 = 1e-6;
/// Default exponent of the layer width `δ = ε^{5/14}`.
pub const DELTA_EXPONENT: f64 = 5.0 / 14.0;

/// The physical box with its semiclassical parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalGrid {
    pub grid: Grid,
    pub epsilon: f64,
}

impl PhysicalGrid {
    pub fn new(n: usize, lo: Vec<f64>, hi: Vec<f64>, epsilon: f64) -> Result<Self> {
        if epsilon <= 0.0 {
            return Err(Error::Invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if n < 4 || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::Invalid("physical grid needs n >= 4 and lo < hi on every axis".into()));
        }
        Ok(PhysicalGrid {
            grid: Grid::new(n, lo, hi),
            epsilon,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Fraction of the Fourier energy with some `|k_a|` in the top 10% of the
    /// resolved band.
    pub fn spectral_tail(&self, values: &[Complex64]) -> f64 {
        let sp = Spectral::new(&self.grid);
        let mut hat = values.to_vec();
        sp.forward(&mut hat);
        let ks = sp.wavenumbers();
        let cut: Vec<f64> = (0..self.dim()).map(|a| 0.9 * self.grid.nyquist(a)).collect();
        let n = self.grid.n;
        let d = self.dim();
        let rows: Vec<(f64, f64)> = hat
            .par_chunks(n)
            .enumerate()
            .map(|(row, chunk)| {
                let mut idx = vec![0; d];
                self.grid.unravel(row * n, &mut idx);
                let outer = idx[..d - 1].iter().enumerate().any(|(a, &j)| ks[a][j].abs() >= cut[a]);
                let mut tail = 0.0;
                let mut total = 0.0;
                for (j, z) in chunk.iter().enumerate() {
                    let e = z.norm_sqr();
                    total += e;
                    if outer || ks[d - 1][j].abs() >= cut[d - 1] {
                        tail += e;
                    }
                }
                (tail, total)
            })
            .collect();
        let tail: f64 = rows.iter().map(|r| r.0).sum();
        let total: f64 = rows.iter().map(|r| r.1).sum();
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Fails when a sampled field is not resolved by the grid.
    pub fn check_resolution(&self, values: &[Complex64]) -> Result<()> {
        let tail = self.spectral_tail(values);
        if tail > RESOLUTION_TOL {
            return Err(Error::Invalid(format!("grid under-resolves the field (spectral tail {tail:e})")));
        }
        Ok(())
    }
}

/// `ε^{−d/4} e^{(i/ε)p·(x−q)} φ((x−q)/√ε)` sampled on the physical grid, with
/// `φ` evaluated by trigonometric interpolation of the profile.
pub fn wave_packet(pg: &PhysicalGrid, q: &[f64], p: &[f64], profile: &ProfileGrid) -> Result<Vec<Complex64>> {
    let d = pg.dim();
    if profile.dim() != d || q.len() != d || p.len() != d {
        return Err(Error::Invalid("wave packet dimensions do not match the grid".into()));
    }
    let eps = pg.epsilon;
    let se = eps.sqrt();
    let pgr = &profile.grid;
    let m = pgr.n;
    let mut hat = profile.values.clone();
    Spectral::new(pgr).forward(&mut hat);
    let n = pg.grid.n;
    let mut data = hat;
    let mut shape = vec![m; d];
    for a in 0..d {
        let ks = pgr.wavenumbers(a);
        let (lo, hi) = (pgr.lo[a], pgr.hi[a]);
        let xs = pg.grid.coords(a);
        let mut mat = vec![Complex64::default(); n * m];
        for (i, &x) in xs.iter().enumerate() {
            let y = (x - q[a]) / se;
            if y < lo || y >= hi {
                continue;
            }
            for (j, &k) in ks.iter().enumerate() {
                // the Nyquist bin is dropped so that the interpolant is real for real data
                if m.is_multiple_of(2) && j == m / 2 {
                    continue;
                }
                mat[i * m + j] = Complex64::from_polar(1.0 / m as f64, k * (y - lo));
            }
        }
        data = contract_axis(&data, &shape, a, &mat, n);
        shape[a] = n;
    }
    let amp = eps.powf(-(d as f64) / 4.0);
    let xs: Vec<Vec<f64>> = (0..d).map(|a| pg.grid.coords(a)).collect();
    grid::map_points(&pg.grid, &mut data, &xs, |x, v| {
        let ph: f64 = (0..d).map(|a| p[a] * (x[a] - q[a])).sum::<f64>() / eps;
        *v *= Complex64::from_polar(amp, ph);
    });
    let target = profile.mass();
    let got = grid::mass(&pg.grid, &data);
    if (got - target).abs() > PACKET_MASS_TOL * target.max(1.0) {
        return Err(Error::OutOfBox(format!("sampled mass {got} against profile mass {target}")));
    }
    Ok(data)
}

/// `sup_{|α|+|β|≤k} ‖x^α (ε∂ₓ)^β f‖` over all components, with spectral derivatives.
pub fn sigma_norm(grid: &Grid, comps: &[&[Complex64]], k: usize, epsilon: f64) -> Result<f64> {
    if k > 2 {
        return Err(Error::Invalid(format!("sigma norms are certified up to k = 2, got {k}")));
    }
    let d = grid.dim();
    let sp = Spectral::new(grid);
    let ks = sp.wavenumbers();
    let xs: Vec<Vec<f64>> = (0..d).map(|a| grid.coords(a)).collect();
    let mut indices: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let all = multi_indices(d, k);
    for al in &all {
        for be in &all {
            if al.iter().sum::<usize>() + be.iter().sum::<usize>() <= k {
                indices.push((al.clone(), be.clone()));
            }
        }
    }
    let hats: Vec<Vec<Complex64>> = comps
        .iter()
        .map(|c| {
            let mut h = c.to_vec();
            sp.forward(&mut h);
            h
        })
        .collect();
    let mut best: f64 = 0.0;
    for (al, be) in &indices {
        let mut total = 0.0;
        for h in &hats {
            let mut v = h.clone();
            if be.iter().any(|&b| b > 0) {
                grid::map_points(grid, &mut v, &ks, |kk, z| {
                    let mut f = Complex64::new(1.0, 0.0);
                    for a in 0..d {
                        for _ in 0..be[a] {
                            f *= Complex64::new(0.0, epsilon * kk[a]);
                        }
                    }
                    *z *= f;
                });
            }
            sp.inverse(&mut v);
            if al.iter().any(|&x| x > 0) {
                grid::map_points(grid, &mut v, &xs, |x, z| {
                    let w: f64 = (0..d).map(|a| x[a].powi(al[a] as i32)).product();
                    *z *= w;
                });
            }
            total += grid::mass(grid, &v);
        }
        best = best.max(total.sqrt());
    }
    Ok(best)
}

fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; d]];
    for _ in 0..k {
        let mut next = out.clone();
        for m in &out {
            for a in 0..d {
                let mut n = m.clone();
                n[a] += 1;
                if n.iter().sum::<usize>() <= k && !next.contains(&n) {
                    next.push(n);
                }
            }
        }
        out = next;
    }
    out
}

/// `(c₊, c₋)` with `c₊ = ‖a u_in₋‖² + ‖√(1−a²) u_in₊‖²` and
/// `c₋ = ‖a u_in₊‖² + ‖√(1−a²) u_in₋‖²`, `a = a(η₂(y)/√r)`.
pub fn wigner_masses(u_in_plus: &ProfileGrid, u_in_minus: &ProfileGrid, geom: &CrossingGeometry) -> (f64, f64) {
    assert_eq!(u_in_plus.grid, u_in_minus.grid, "incoming profiles live on different grids");
    let g = &u_in_minus.grid;
    let sums: Vec<(f64, f64)> = u_in_plus
        .values
        .par_iter()
        .zip(u_in_minus.values.par_iter())
        .enumerate()
        .map(|(i, (up, um))| {
            let a2 = coeff_a(geom.eta2_scaled(&g.point(i))).powi(2);
            let (p2, m2) = (up.norm_sqr(), um.norm_sqr());
            (a2 * m2 + (1.0 - a2) * p2, a2 * p2 + (1.0 - a2) * m2)
        })
        .collect();
    let cell = g.cell_volume();
    (
        sums.iter().map(|s| s.0).sum::<f64>() * cell,
        sums.iter().map(|s| s.1).sum::<f64>() * cell,
    )
}

/// Size `2|∫ a·e^{−iθ}b·u_in₊·ū_in₋|` of the interference term that
/// [`wigner_masses`] drops from the outgoing plus mass. The constant action
/// phase `e^{i(S♭₊−S♭₋)/ε}` is left out.
pub fn cross_term(spec: &TransferSpec, u_in_plus: &ProfileGrid, u_in_minus: &ProfileGrid) -> f64 {
    assert_eq!(u_in_plus.grid, u_in_minus.grid, "incoming profiles live on different grids");
    let g = &u_in_minus.grid;
    let parts: Vec<Complex64> = u_in_plus
        .values
        .par_iter()
        .zip(u_in_minus.values.par_iter())
        .enumerate()
        .map(|(i, (up, um))| {
            let y = g.point(i);
            let e2 = spec.geom.eta2_scaled(&y);
            let rot = Complex64::from_polar(1.0, -spec.theta(spec.geom.eta(&y)));
            coeff_a(e2) * rot * coeff_b_direct(e2) * up * um.conj()
        })
        .collect();
    2.0 * (parts.iter().sum::<Complex64>() * g.cell_volume()).norm()
}

/// Initial data `Y₀ WP_{z₀} φ` on one mode, `Y₀` the mode eigenvector at `q₀`
/// with the given sign.
#[derive(Clone, Debug)]
pub struct InitialPacket {
    pub z0: PhasePoint,
    pub mode: Mode,
    pub profile: ProfileGrid,
    pub sign: f64,
}

impl InitialPacket {
    pub fn frame(&self, model: &PotentialModel) -> Result<Vector2<f64>> {
        model.eigenvector(self.mode, self.z0.q.as_slice(), self.sign)
    }
}

/// One smooth piece of a mode ansatz.
#[derive(Clone, Debug)]
pub struct Segment {
    pub traj: Trajectory,
    pub action: ActionCurve,
    pub frame: EigenframePath,
}

/// The mode-`mode` term of the approximate solution at a list of times.
/// Before the crossing the action runs from `t0`, after it from `t♭`.
#[derive(Clone, Debug)]
pub struct ModeAnsatz {
    pub mode: Mode,
    pub incoming: Option<Segment>,
    pub outgoing: Option<Segment>,
    pub t_flat: Option<f64>,
    pub times: Vec<f64>,
    pub profiles: Vec<Option<ProfileGrid>>,
}

impl ModeAnsatz {
    fn segment(&self, t: f64) -> Option<&Segment> {
        match self.t_flat {
            Some(tf) if t > tf => self.outgoing.as_ref(),
            _ => self.incoming.as_ref(),
        }
    }

    pub fn profile_at(&self, t: f64) -> Option<&ProfileGrid> {
        let i = self.times.iter().position(|&s| s == t)?;
        self.profiles[i].as_ref()
    }

    pub fn mass_at(&self, t: f64) -> f64 {
        self.profile_at(t).map_or(0.0, |u| u.mass())
    }

    pub fn phase_point(&self, t: f64) -> Option<PhasePoint> {
        self.segment(t).map(|s| s.traj.state(t))
    }

    pub fn action_at(&self, t: f64) -> Option<f64> {
        self.segment(t).map(|s| s.action.at(t))
    }
}

/// `Y(t) e^{iS/ε} WP_{z(t)} u(t)` at an assembled time; zero where the mode
/// carries no profile.
pub fn assemble_single_mode(pg: &PhysicalGrid, ansatz: &ModeAnsatz, t: f64) -> Result<Field2> {
    let mut f = Field2::zeros(pg.clone(), t);
    if !ansatz.times.contains(&t) {
        return Err(Error::Invalid(format!("time {t} was not assembled")));
    }
    let (Some(u), Some(seg)) = (ansatz.profile_at(t), ansatz.segment(t)) else {
        return Ok(f);
    };
    let z = seg.traj.state(t);
    let s = seg.action.at(t);
    let y = seg.frame.at(t);
    let wp = wave_packet(pg, z.q.as_slice(), z.p.as_slice(), u)?;
    let ph = Complex64::from_polar(1.0, (s / pg.epsilon).rem_euclid(2.0 * PI));
    for c in 0..2 {
        let k = ph * y[c];
        f.psi[c] = wp.iter().map(|v| v * k).collect();
    }
    Ok(f)
}

/// Crossing-time data of a run.
#[derive(Clone, Debug)]
pub struct CrossingRecord {
    pub geom: CrossingGeometry,
    pub transfer: TransferSpec,
    pub incoming_minus: Option<Incoming>,
    pub incoming_plus: Option<Incoming>,
    pub out_plus: ProfileGrid,
    pub out_minus: ProfileGrid,
    pub v_omega: Vector2<f64>,
    /// `−1` when the plus packet's frame and profile were flipped.
    pub pair_sign: f64,
}

/// The approximate solution: one [`ModeAnsatz`] per mode.
#[derive(Clone, Debug)]
pub struct AnsatzRun {
    pub epsilon: f64,
    pub delta: f64,
    pub plus: ModeAnsatz,
    pub minus: ModeAnsatz,
    pub crossing: Option<CrossingRecord>,
}

impl AnsatzRun {
    pub fn mode(&self, mode: Mode) -> &ModeAnsatz {
        match mode {
            Mode::Plus => &self.plus,
            _ => &self.minus,
        }
    }

    pub fn assemble(&self, pg: &PhysicalGrid, t: f64) -> Result<Field2> {
        let p = assemble_single_mode(pg, &self.plus, t)?;
        let m = assemble_single_mode(pg, &self.minus, t)?;
        Ok(p.combine(&m, 1.0))
    }

    pub fn times(&self) -> &[f64] {
        &self.minus.times
    }
}

/// Layer width `δ = ε^{5/14}`.
pub fn default_delta(epsilon: f64) -> f64 {
    epsilon.powf(DELTA_EXPONENT)
}

fn sorted_times(times: &[f64], t0: f64, t1: f64) -> Result<Vec<f64>> {
    let mut ts = times.to_vec();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    if ts.iter().any(|&t| t < t0 || t > t1) {
        return Err(Error::Invalid(format!("output times must lie in [{t0}, {t1}]")));
    }
    Ok(ts)
}

/// Carry a profile forward to `t` on the side of `t♭` it lives on, switching
/// between the smooth and compensated schemes at `t♭ ± TAU_SWITCH`.
fn advance(model: &PotentialModel, traj: &Trajectory, geom: Option<&CrossingGeometry>, u: &ProfileGrid, t: f64) -> Result<ProfileGrid> {
    let Some(g) = geom else {
        return evolve_profile(model, traj, u, u.time, t);
    };
    let tf = g.t_flat;
    let mut cur = u.clone();
    if cur.time < tf {
        let sw = tf - TAU_SWITCH;
        if cur.time < sw {
            cur = evolve_profile(model, traj, &cur, cur.time, t.min(sw))?;
        }
        if t > cur.time {
            cur = evolve_compensated(model, traj, &cur, cur.time, t, g)?;
        }
    } else {
        let sw = tf + TAU_SWITCH;
        if cur.time < sw {
            cur = evolve_compensated(model, traj, &cur, cur.time, t.min(sw), g)?;
        }
        if t > cur.time {
            cur = evolve_profile(model, traj, &cur, cur.time, t)?;
        }
    }
    Ok(cur)
}

/// Evolve `u` to each listed time (sorted, all on one side of the crossing).
fn profile_path(
    model: &PotentialModel,
    traj: &Trajectory,
    geom: Option<&CrossingGeometry>,
    u: &ProfileGrid,
    times: &[f64],
) -> Result<Vec<ProfileGrid>> {
    let mut out = Vec::with_capacity(times.len());
    let mut cur = u.clone();
    for &t in times {
        if t > cur.time {
            cur = advance(model, traj, geom, &cur, t)?;
        }
        out.push(cur.clone());
    }
    Ok(out)
}

fn incoming_mode_ansatz(
    model: &PotentialModel,
    init: &InitialPacket,
    t0: f64,
    t1: f64,
    times: &[f64],
    opts: &FlowOptions,
) -> Result<(ModeAnsatz, Option<ProfileGrid>)> {
    let traj = integrate_flow(model, init.mode, &init.z0, t0, t1, opts)?;
    let action = action_along(model, &traj);
    let frame = parallel_transport(model, &traj, init.frame(model)?)?;
    let geom = traj.geometry().cloned();
    let before: Vec<f64> = match &geom {
        Some(g) => times.iter().copied().filter(|&t| t < g.t_flat).collect(),
        None => times.to_vec(),
    };
    let mut u0 = init.profile.clone();
    u0.time = t0;
    u0.mode = init.mode;
    let path = profile_path(model, &traj, geom.as_ref(), &u0, &before)?;
    let last = path.last().cloned().unwrap_or(u0);
    let mut profiles: Vec<Option<ProfileGrid>> = path.into_iter().map(Some).collect();
    profiles.resize(times.len(), None);
    let t_flat = geom.as_ref().map(|g| g.t_flat);
    let m = ModeAnsatz {
        mode: init.mode,
        incoming: Some(Segment { traj, action, frame }),
        outgoing: None,
        t_flat,
        times: times.to_vec(),
        profiles,
    };
    Ok((m, geom.map(|_| last)))
}

fn empty_mode(mode: Mode, times: &[f64], t_flat: Option<f64>) -> ModeAnsatz {
    ModeAnsatz {
        mode,
        incoming: None,
        outgoing: None,
        t_flat,
        times: times.to_vec(),
        profiles: vec![None; times.len()],
    }
}

/// Build both outgoing segments from the minus-side incoming trajectory and
/// attach the evolved outgoing profiles.
#[allow(clippy::too_many_arguments)]
fn attach_outgoing(
    model: &PotentialModel,
    traj_in: &Trajectory,
    v_omega: Vector2<f64>,
    out: (&ProfileGrid, &ProfileGrid),
    times: &[f64],
    opts: &FlowOptions,
    plus: &mut ModeAnsatz,
    minus: &mut ModeAnsatz,
) -> Result<()> {
    let g = traj_in.geometry().ok_or(Error::NoCrossing)?.clone();
    let tp = continue_through_crossing(model, traj_in, Mode::Plus, opts)?;
    let tm = continue_through_crossing(model, traj_in, Mode::Minus, opts)?;
    let tr = g.t_flat + opts.h_restart;
    let (yp, ym) = outgoing_frames(model, v_omega, tp.state(tr).q.as_slice(), tm.state(tr).q.as_slice())?;
    let after: Vec<f64> = times.iter().copied().filter(|&t| t > g.t_flat).collect();
    let first = times.len() - after.len();
    for (ans, traj, y0, u) in [(plus, tp, yp, out.0), (minus, tm, ym, out.1)] {
        let frame = transport_outgoing(model, &traj, y0)?;
        let action = action_along(model, &traj);
        let path = profile_path(model, &traj, Some(&g), u, &after)?;
        for (k, p) in path.into_iter().enumerate() {
            ans.profiles[first + k] = Some(p);
        }
        ans.outgoing = Some(Segment { traj, action, frame });
    }
    Ok(())
}

/// Single incoming packet: classical flow, transport and profile evolution up
/// to the crossing, Landau–Zener transfer, then both outgoing modes to `t1`.
/// Without a crossing the packet is carried adiabatically.
pub fn propagate_ansatz(model: &PotentialModel, init: &InitialPacket, t0: f64, t1: f64, epsilon: f64, times: &[f64]) -> Result<AnsatzRun> {
    let opts = FlowOptions::default();
    let times = sorted_times(times, t0, t1)?;
    let delta = default_delta(epsilon);
    let (mut inc, at_cross) = incoming_mode_ansatz(model, init, t0, t1, &times, &opts)?;
    let Some(u_last) = at_cross else {
        let other = empty_mode(init.mode.other(), &times, None);
        let (plus, minus) = if init.mode == Mode::Plus { (inc, other) } else { (other, inc) };
        return Ok(AnsatzRun {
            epsilon,
            delta,
            plus,
            minus,
            crossing: None,
        });
    };
    let seg = inc.incoming.as_ref().unwrap();
    let geom = seg.traj.geometry().unwrap().clone();
    let traj_in = seg.traj.clone();
    let v_in = seg.frame.v_omega.ok_or(Error::NoCrossing)?;
    let s_flat = seg.action.at_crossing();
    let incoming = extract_incoming(model, &traj_in, &u_last, &geom)?;
    let zero = ProfileGrid::zeros(incoming.u_in.grid.clone(), geom.t_flat, Mode::Plus);
    let (spec, out_plus, out_minus, v_omega, inc_minus, inc_plus) = match init.mode {
        Mode::Minus => {
            let spec = TransferSpec {
                geom: geom.clone(),
                epsilon,
                action_minus: s_flat,
                action_plus: 0.0,
            };
            let (p, m) = transfer_single(&spec, &incoming.u_in);
            (spec, p, m, v_in, Some(incoming), None)
        }
        Mode::Plus => {
            // a plus packet arrives along ±V_ω⊥; V_ω is the vector turned back by π/2
            let v_omega = Vector2::new(v_in[1], -v_in[0]);
            let spec = TransferSpec {
                geom: geom.clone(),
                epsilon,
                action_minus: 0.0,
                action_plus: s_flat,
            };
            let (p, m) = transfer_pair(&spec, &incoming.u_in, &zero);
            (spec, p, m, v_omega, None, Some(incoming))
        }
        Mode::Reference => return Err(Error::Invalid("initial packet must sit on the plus or minus mode".into())),
    };
    let mut other = empty_mode(init.mode.other(), &times, Some(geom.t_flat));
    {
        let (plus, minus) = if init.mode == Mode::Plus {
            (&mut inc, &mut other)
        } else {
            (&mut other, &mut inc)
        };
        attach_outgoing(model, &traj_in, v_omega, (&out_plus, &out_minus), &times, &opts, plus, minus)?;
    }
    let (plus, minus) = if init.mode == Mode::Plus { (inc, other) } else { (other, inc) };
    let crossing = CrossingRecord {
        geom,
        transfer: spec,
        incoming_minus: inc_minus,
        incoming_plus: inc_plus,
        out_plus,
        out_minus,
        v_omega,
        pair_sign: 1.0,
    };
    Ok(AnsatzRun {
        epsilon,
        delta,
        plus,
        minus,
        crossing: Some(crossing),
    })
}

fn check_meeting(a: &CrossingGeometry, b: &CrossingGeometry) -> Result<()> {
    let dt = (a.t_flat - b.t_flat).abs();
    let dz = (&a.q_flat - &b.q_flat).norm().max((&a.p_flat - &b.p_flat).norm());
    if dt > PAIR_TOL || dz > PAIR_TOL {
        return Err(Error::CrossingMismatch(format!("|Δt♭| = {dt:e}, |Δz♭| = {dz:e}")));
    }
    Ok(())
}

/// Two packets, one per mode, reaching the same crossing point: signs are
/// aligned, both profiles extracted and mixed by the pair transfer.
pub fn propagate_pair(
    model: &PotentialModel,
    init_minus: &InitialPacket,
    init_plus: &InitialPacket,
    t0: f64,
    t1: f64,
    epsilon: f64,
    times: &[f64],
) -> Result<AnsatzRun> {
    if init_minus.mode != Mode::Minus || init_plus.mode != Mode::Plus {
        return Err(Error::Invalid("pair needs one minus and one plus packet".into()));
    }
    let opts = FlowOptions::default();
    let times = sorted_times(times, t0, t1)?;
    let (mut minus, um) = incoming_mode_ansatz(model, init_minus, t0, t1, &times, &opts)?;
    let (mut plus, up) = incoming_mode_ansatz(model, init_plus, t0, t1, &times, &opts)?;
    let (Some(um), Some(mut up)) = (um, up) else {
        return Err(Error::NoCrossing);
    };
    let sm = minus.incoming.as_ref().unwrap();
    let geom = sm.traj.geometry().unwrap().clone();
    let traj_in = sm.traj.clone();
    let s_minus = sm.action.at_crossing();
    let v_omega = sm.frame.v_omega.ok_or(Error::NoCrossing)?;
    let sp = plus.incoming.as_mut().unwrap();
    check_meeting(&geom, sp.traj.geometry().unwrap())?;
    let sign = align_pair_signs(&minus.incoming.as_ref().unwrap().frame, &sp.frame)?;
    if sign < 0.0 {
        for nd in &mut sp.frame.nodes {
            nd.y.iter_mut().chain(nd.f.iter_mut()).for_each(|v| *v = -*v);
        }
        sp.frame.v_omega = sp.frame.v_omega.map(|v| -v);
        up.values.iter_mut().for_each(|v| *v = -*v);
        for p in plus.profiles.iter_mut().flatten() {
            p.values.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let s_plus = sp.action.at_crossing();
    let traj_plus = sp.traj.clone();
    let in_minus = extract_incoming(model, &traj_in, &um, &geom)?;
    let in_plus = extract_incoming(model, &traj_plus, &up, traj_plus.geometry().unwrap())?;
    let spec = TransferSpec {
        geom: geom.clone(),
        epsilon,
        action_minus: s_minus,
        action_plus: s_plus,
    };
    let (out_plus, out_minus) = transfer_pair(&spec, &in_plus.u_in, &in_minus.u_in);
    attach_outgoing(
        model,
        &traj_in,
        v_omega,
        (&out_plus, &out_minus),
        &times,
        &opts,
        &mut plus,
        &mut minus,
    )?;
    let crossing = CrossingRecord {
        geom,
        transfer: spec,
        incoming_minus: Some(in_minus),
        incoming_plus: Some(in_plus),
        out_plus,
        out_minus,
        v_omega,
        pair_sign: sign,
    };
    Ok(AnsatzRun {
        epsilon,
        delta: default_delta(epsilon),
        plus,
        minus,
        crossing: Some(crossing),
    })
}

/// `Y₀ WP_{z₀} φ` as a two-component field.
pub fn initial_field(model: &PotentialModel, pg: &PhysicalGrid, init: &InitialPacket, t0: f64) -> Result<Field2> {
    let y = init.frame(model)?;
    let wp = wave_packet(pg, init.z0.q.as_slice(), init.z0.p.as_slice(), &init.profile)?;
    let mut f = Field2::zeros(pg.clone(), t0);
    for c in 0..2 {
        f.psi[c] = wp.iter().map(|v| v * y[c]).collect();
    }
    Ok(f)
}

/// Position `⟨x⟩` of `|f|²`.
pub fn centroid(grid: &Grid, values: &[Complex64]) -> DVector<f64> {
    let d = grid.dim();
    let total = grid::mass(grid, values);
    let mut c = DVector::zeros(d);
    for a in 0..d {
        let xs = grid.coords(a);
        let mut w = values.to_vec();
        let coords: Vec<Vec<f64>> = (0..d).map(|b| if b == a { xs.clone() } else { vec![1.0; grid.n] }).collect();
        grid::map_points(grid, &mut w, &coords, |x, v| *v = Complex64::new(v.norm_sqr() * x[a], 0.0));
        c[a] = w.iter().map(|z| z.re).sum::<f64>() * grid.cell_volume() / total;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileGrid;

    fn pg(n: usize, half: f64, eps: f64) -> PhysicalGrid {
        PhysicalGrid::new(n, vec![-half; 2], vec![half; 2], eps).unwrap()
    }

    #[test]
    fn packet_is_an_isometry_and_translates() {
        let g = pg(256, 1.5, 0.01);
        let u = ProfileGrid::gaussian(2, 64, 8.0, &[0.3, -0.2], 0.0, Mode::Minus);
        let wp = wave_packet(&g, &[0.0, 0.0], &[0.0, 0.0], &u).unwrap();
        assert!((grid::mass(&g.grid, &wp) - 1.0).abs() < 1e-8);
        let c = centroid(&g.grid, &wp);
        assert!((c[0] - 0.1 * 0.3).abs() < 1e-8 && (c[1] + 0.1 * 0.2).abs() < 1e-8);
        // shift by an integer number of cells
        let dx = g.grid.dx(0);
        let shifted = wave_packet(&g, &[10.0 * dx, 0.0], &[0.0, 0.0], &u).unwrap();
        let n = g.grid.n;
        for i in 20..n - 20 {
            for j in 0..n {
                assert!((shifted[(i + 10) * n + j] - wp[i * n + j]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn packet_matches_the_closed_form_gaussian() {
        let eps = 0.02;
        let g = pg(256, 1.5, eps);
        let u = ProfileGrid::gaussian(2, 64, 8.0, &[0.0, 0.0], 0.0, Mode::Minus);
        let q = [0.2, -0.1];
        let p = [1.0, 0.5];
        let wp = wave_packet(&g, &q, &p, &u).unwrap();
        let exact = grid::tabulate(&g.grid, |x| {
            let r2 = (x[0] - q[0]).powi(2) + (x[1] - q[1]).powi(2);
            let ph = (p[0] * (x[0] - q[0]) + p[1] * (x[1] - q[1])) / eps;
            Complex64::from_polar((-0.5 * r2 / eps).exp() / (PI * eps).sqrt(), ph)
        });
        let err = wp.iter().zip(&exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!(g.spectral_tail(&wp) < RESOLUTION_TOL);
    }

    #[test]
    fn packet_outside_the_box_is_rejected() {
        let g = pg(64, 1.0, 0.01);
        let u = ProfileGrid::gaussian(2, 64, 8.0, &[0.0, 0.0], 0.0, Mode::Minus);
        assert!(matches!(wave_packet(&g, &[0.98, 0.0], &[0.0, 0.0], &u), Err(Error::OutOfBox(_))));
    }

    #[test]
    fn sigma_norms_of_a_gaussian() {
        let g = Grid::new(256, vec![-12.0], vec![12.0]);
        let f = grid::tabulate(&g, |x| Complex64::new((-0.5 * x[0] * x[0]).exp() * PI.powf(-0.25), 0.0));
        let n0 = sigma_norm(&g, &[&f], 0, 1.0).unwrap();
        assert!((n0 - 1.0).abs() < 1e-12);
        // ‖xf‖ = ‖f'‖ = 1/√2 and ‖x²f‖ = √3/2
        let n1 = sigma_norm(&g, &[&f], 1, 1.0).unwrap();
        assert!((n1 - 1.0).abs() < 1e-12);
        let n2 = sigma_norm(&g, &[&f], 2, 1.0).unwrap();
        assert!((n2 - 1.0).abs() < 1e-12);
        let x = grid::tabulate(&g, |x| Complex64::new(x[0] * (-0.5 * x[0] * x[0]).exp() * PI.powf(-0.25), 0.0));
        assert!((grid::mass(&g, &x).sqrt() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(sigma_norm(&g, &[&f], 3, 1.0).is_err());
        assert_eq!(multi_indices(2, 2).len(), 6);
    }

    #[test]
    fn wigner_masses_add_up() {
        let model = PotentialModel::linear_isotropic(2).unwrap();
        let z0 = PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]);
        let traj = integrate_flow(&model, Mode::Minus, &z0, 0.0, 1.0, &FlowOptions::default()).unwrap();
        let g = traj.geometry().unwrap();
        let um = ProfileGrid::gaussian(2, 64, 8.0, &[0.0, 0.3], g.t_flat, Mode::Minus);
        let up = ProfileGrid::gaussian(2, 64, 8.0, &[0.0, -0.5], g.t_flat, Mode::Plus);
        let zero = ProfileGrid::zeros(um.grid.clone(), g.t_flat, Mode::Plus);
        let (cp, cm) = wigner_masses(&zero, &um, g);
        let lz: f64 = um
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (-PI * g.eta(&um.grid.point(i)).1.powi(2)).exp() * v.norm_sqr())
            .sum::<f64>()
            * um.grid.cell_volume();
        assert!((cp - lz).abs() < 1e-12 && (cp + cm - 1.0).abs() < 1e-12);
        let (cp, cm) = wigner_masses(&up, &um, g);
        assert!((cp + cm - 2.0).abs() < 1e-12);
        assert_eq!(wigner_masses(&zero, &zero, g), (0.0, 0.0));
    }
}
