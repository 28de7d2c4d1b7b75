//! Profile evolution: `i∂ₜu = −½Δu + ½H(t)y·y u` on a periodic grid, with a
//! logarithmically compensated frame near the crossing time where `H(t)`
//! carries a `Γ₀/|t−t♭|` singularity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::classical::Trajectory;
use crate::grid::{self, quad_form, Grid, Spectral};
use crate::ode::{integrate, OdeOptions};
use crate::potential::{CrossingGeometry, Mode, PotentialModel};
use crate::{Error, Result};

pub const DEFAULT_N: usize = 256;
pub const DEFAULT_HALF_WIDTH: f64 = 16.0;
/// Half-width of the compensated window around the crossing time.
pub const TAU_SWITCH: f64 = 0.05;
pub const H_EXTRACT: f64 = 1e-4;
/// Largest Strang step away from the crossing.
pub const DT_SMOOTH: f64 = 1e-3;
/// Innermost node of the compensated window before the crossing itself.
/// Below this distance to `t♭` the regular part of the Hessian is frozen.
pub const TAU_FREEZE: f64 = 1e-6;
pub const TAU_INNER: f64 = 1e-10;
pub const BOUNDARY_TOL: f64 = 1e-8;

/// A complex profile sampled on `[−L, L)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileGrid {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub time: f64,
    pub mode: Mode,
}

impl ProfileGrid {
    pub fn zeros(grid: Grid, time: f64, mode: Mode) -> Self {
        let values = vec![Complex64::default(); grid.len()];
        ProfileGrid { grid, values, time, mode }
    }

    pub fn from_fn<F: Fn(&[f64]) -> Complex64 + Sync>(grid: Grid, time: f64, mode: Mode, f: F) -> Self {
        let values = grid::tabulate(&grid, f);
        ProfileGrid { grid, values, time, mode }
    }

    /// Normalized Gaussian `π^{−d/4}e^{−|y−c|²/2}`.
    pub fn gaussian(d: usize, n: usize, half_width: f64, center: &[f64], time: f64, mode: Mode) -> Self {
        assert_eq!(center.len(), d);
        let norm = std::f64::consts::PI.powf(-(d as f64) / 4.0);
        let c = center.to_vec();
        Self::from_fn(Grid::cube(d, n, half_width), time, mode, move |y| {
            let r2: f64 = y.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            Complex64::new(norm * (-0.5 * r2).exp(), 0.0)
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn half_width(&self) -> f64 {
        self.grid.hi[0]
    }

    pub fn mass(&self) -> f64 {
        grid::mass(&self.grid, &self.values)
    }

    pub fn inner(&self, other: &ProfileGrid) -> Complex64 {
        grid::inner(&self.grid, &self.values, &other.values)
    }

    /// `‖self − other‖_{L²}`.
    pub fn distance(&self, other: &ProfileGrid) -> f64 {
        assert_eq!(self.grid, other.grid);
        let diff: Vec<Complex64> = self.values.par_iter().zip(&other.values).map(|(a, b)| a - b).collect();
        grid::mass(&self.grid, &diff).sqrt()
    }

    pub fn boundary_fraction(&self) -> f64 {
        grid::boundary_fraction(&self.grid, &self.values)
    }

    pub fn check_boundary(&self) -> Result<()> {
        let f = self.boundary_fraction();
        if f > BOUNDARY_TOL {
            Err(Error::GridOverflow(f))
        } else {
            Ok(())
        }
    }

    /// Multiply pointwise by `e^{(i/2)·yᵀKy}`.
    pub fn chirp(&mut self, k: &DMatrix<f64>) {
        if k.iter().all(|&v| v == 0.0) {
            return;
        }
        let m: Vec<f64> = k.transpose().iter().copied().collect();
        let xs: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.grid.coords(a)).collect();
        grid::map_points(&self.grid, &mut self.values, &xs, |y, v| {
            *v *= Complex64::from_polar(1.0, 0.5 * quad_form(&m, y))
        });
    }
}

/// `Hess λ(q(t)) = smooth + singular` with `singular = ±Γ₀/|t−t♭|`.
#[derive(Clone, Debug)]
pub struct HessianSplit {
    pub t: f64,
    pub mode: Mode,
    pub full: DMatrix<f64>,
    pub smooth: DMatrix<f64>,
    pub singular: Option<DMatrix<f64>>,
}

pub fn hessian_at(model: &PotentialModel, traj: &Trajectory, t: f64) -> Result<HessianSplit> {
    let mode = traj.mode_at(t);
    if let Some(g) = traj.geometry() {
        if t == g.t_flat {
            return Err(Error::AtCrossingTime);
        }
    }
    let q = traj.state(t).q;
    let full = symmetrize(model.hess_lambda(mode, q.as_slice())?);
    let (smooth, singular) = match traj.geometry() {
        Some(g) => {
            let sing = &g.gamma0 * (mode.sign() / (t - g.t_flat).abs());
            (&full - &sing, Some(sing))
        }
        None => (full.clone(), None),
    };
    Ok(HessianSplit {
        t,
        mode,
        full,
        smooth,
        singular,
    })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Strang propagation along an arbitrary Hessian path `t ↦ H(t)`, with
/// Simpson-averaged potential factors and adjacent half steps merged.
pub fn evolve_hessian_path<H>(u: &ProfileGrid, hess: H, t0: f64, t1: f64, dt_max: f64) -> Result<ProfileGrid>
where
    H: Fn(f64) -> Result<DMatrix<f64>>,
{
    let mut out = u.clone();
    if t0 == t1 {
        out.time = t1;
        return Ok(out);
    }
    let sp = Spectral::new(&u.grid);
    let n = ((t1 - t0).abs() / dt_max - 1e-9).ceil().max(1.0) as usize;
    let dt = (t1 - t0) / n as f64;
    let kinetic = kinetic_table(&sp, dt);
    let simpson = |a: f64, b: f64| -> Result<DMatrix<f64>> {
        let m = 0.5 * (a + b);
        Ok((hess(a)? + hess(m)? * 4.0 + hess(b)?) * ((b - a) / 6.0))
    };
    let mut pending = DMatrix::zeros(u.dim(), u.dim());
    for k in 0..n {
        let ta = t0 + k as f64 * dt;
        let tb = if k + 1 == n { t1 } else { t0 + (k + 1) as f64 * dt };
        let tm = 0.5 * (ta + tb);
        pending += simpson(ta, tm)?;
        out.chirp(&(-&pending));
        apply_multiplier(&sp, &mut out.values, &kinetic);
        pending = simpson(tm, tb)?;
    }
    out.chirp(&(-pending));
    out.time = t1;
    Ok(out)
}

fn kinetic_table(sp: &Spectral, dt: f64) -> Vec<Complex64> {
    sp.tabulate(|k| Complex64::from_polar(1.0, -0.5 * dt * k.iter().map(|v| v * v).sum::<f64>()))
}

fn apply_multiplier(sp: &Spectral, values: &mut [Complex64], mult: &[Complex64]) {
    sp.apply_multiplier(values, mult);
}

fn check_outside_window(traj: &Trajectory, t0: f64, t1: f64) -> Result<()> {
    if let Some(g) = traj.geometry() {
        let (lo, hi) = (t0.min(t1), t0.max(t1));
        if lo <= g.t_flat && g.t_flat <= hi {
            return Err(Error::AtCrossingTime);
        }
    }
    Ok(())
}

/// Evolve `u` from `t0` to `t1` with the exact Hessian along `traj`. The
/// interval must not contain the crossing time.
pub fn evolve_profile(model: &PotentialModel, traj: &Trajectory, u: &ProfileGrid, t0: f64, t1: f64) -> Result<ProfileGrid> {
    check_outside_window(traj, t0, t1)?;
    let mut out = evolve_hessian_path(u, |t| Ok(hessian_at(model, traj, t)?.full), t0, t1, DT_SMOOTH)?;
    out.mode = traj.mode_at(t1);
    out.check_boundary()?;
    Ok(out)
}

/// Compensation exponent `κ(t)` with `v = e^{iκ·½Γ₀y·y}u`.
pub fn kappa(mode: Mode, t: f64, t_flat: f64) -> f64 {
    let s = t - t_flat;
    mode.sign() * s.signum() * s.abs().ln()
}

/// `∫ ln τ dτ` from 0.
fn int_log(tau: f64) -> f64 {
    if tau == 0.0 {
        0.0
    } else {
        tau * tau.ln() - tau
    }
}

/// `∫ ln²τ dτ` from 0.
fn int_log2(tau: f64) -> f64 {
    if tau == 0.0 {
        0.0
    } else {
        let l = tau.ln();
        tau * l * l - 2.0 * tau * l + 2.0 * tau
    }
}

/// Distances to `t♭` used as nodes inside the compensated window, from
/// `TAU_SWITCH` down to 0.
pub fn window_distances() -> Vec<f64> {
    let mut d = TAU_SWITCH;
    let mut out = vec![d];
    while d > TAU_INNER {
        let next = d - (DT_SMOOTH).min(0.25 * d);
        if d > H_EXTRACT && next < H_EXTRACT {
            out.push(H_EXTRACT);
        }
        d = next;
        out.push(d);
    }
    out.push(0.0);
    out.dedup();
    out
}

/// Precomputed data for the exact dilation `e^{−iσD₀}` along Γ₀.
struct Dilation {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Dilation {
    fn new(gamma0: &DMatrix<f64>) -> Self {
        let e = SymmetricEigen::new(gamma0.clone());
        Dilation {
            values: e.eigenvalues.iter().copied().collect(),
            vectors: e.eigenvectors,
        }
    }

    fn matrix(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d = self.values.len();
        let mut m = DMatrix::zeros(d, d);
        for (j, &g) in self.values.iter().enumerate() {
            let c = f(g);
            if c != 0.0 {
                let v = self.vectors.column(j);
                m += v * v.transpose() * c;
            }
        }
        m
    }

    /// `f ↦ e^{−σ trΓ₀/2}·f(e^{−σΓ₀}y)` as chirp, free, chirp, free.
    fn apply(&self, sp: &Spectral, u: &mut ProfileGrid, sigma: f64) {
        if sigma == 0.0 || self.values.iter().all(|&g| g == 0.0) {
            return;
        }
        let shear = |g: f64| {
            let mu = (sigma * g).exp();
            let d = (-sigma * g).exp_m1();
            (mu, d.signum(), d.abs().sqrt())
        };
        let y2 = self.matrix(|g| {
            let (mu, sg, s) = shear(g);
            -mu * sg * s
        });
        let x2 = self.matrix(|g| shear(g).2);
        let y1 = self.matrix(|g| {
            let (_, sg, s) = shear(g);
            sg * s
        });
        let x1 = self.matrix(|g| {
            let (mu, _, s) = shear(g);
            -mu * s
        });
        u.chirp(&y2);
        free_shear(sp, &mut u.values, &x2);
        u.chirp(&y1);
        free_shear(sp, &mut u.values, &x1);
    }
}

/// Fourier multiplier `e^{−(i/2)kᵀXk}` (free flow for the symmetric time `X`).
fn free_shear(sp: &Spectral, values: &mut [Complex64], x: &DMatrix<f64>) {
    let m: Vec<f64> = x.transpose().iter().copied().collect();
    sp.apply_symbol(values, |k| Complex64::from_polar(1.0, -0.5 * quad_form(&m, k)));
}

/// Exact dilation `e^{−iσD₀}` with `D₀ = −i(Γ₀y·∇ + ½trΓ₀)`.
pub fn apply_dilation(u: &mut ProfileGrid, gamma0: &DMatrix<f64>, sigma: f64) {
    let sp = Spectral::new(&u.grid);
    Dilation::new(gamma0).apply(&sp, u, sigma);
}

/// Change from `u` to the compensated variable `v` at time `t`, or back when
/// `inverse` is set. Identity at `t♭`.
pub fn compensate(u: &mut ProfileGrid, geom: &CrossingGeometry, mode: Mode, t: f64, inverse: bool) {
    if t == geom.t_flat {
        return;
    }
    let k = kappa(mode, t, geom.t_flat) * if inverse { -1.0 } else { 1.0 };
    u.chirp(&(&geom.gamma0 * k));
}

struct Compensated<'a> {
    model: &'a PotentialModel,
    traj: &'a Trajectory,
    geom: &'a CrossingGeometry,
    sp: Spectral,
    dil: Dilation,
    gamma_sq: DMatrix<f64>,
}

impl Compensated<'_> {
    /// Integrals over `[a, b]` (same side of `t♭`) of `κ`, `κ²` and `M`.
    fn integrals(&self, mode: Mode, a: f64, b: f64) -> Result<(f64, f64, DMatrix<f64>)> {
        let tf = self.geom.t_flat;
        let (ta, tb) = ((a - tf).abs(), (b - tf).abs());
        let side = if a + b > 2.0 * tf { 1.0 } else { -1.0 };
        let ik = mode.sign() * (int_log(tb) - int_log(ta));
        let ik2 = side * (int_log2(tb) - int_log2(ta));
        let h = b - a;
        let m = 0.5 * (a + b);
        let off = 0.5 * h / 3f64.sqrt();
        let smooth = |t: f64| -> Result<DMatrix<f64>> {
            let tau = (t - tf).abs().max(TAU_FREEZE);
            Ok(hessian_at(self.model, self.traj, tf + side * tau)?.smooth)
        };
        let ms = smooth(m - off)? + smooth(m + off)?;
        Ok((ik, ik2, ms * (0.5 * h)))
    }

    fn potential(&self, ik2: f64, im: DMatrix<f64>) -> DMatrix<f64> {
        &self.gamma_sq * ik2 + im
    }

    fn run(&self, v: &mut ProfileGrid, nodes: &[f64], mut visit: impl FnMut(f64, &ProfileGrid)) -> Result<()> {
        for w in nodes.windows(2) {
            let (ta, tb) = (w[0], w[1]);
            let tm = 0.5 * (ta + tb);
            let mode = self.traj.mode_at(tm);
            let (k1, k21, m1) = self.integrals(mode, ta, tm)?;
            let (k2, k22, m2) = self.integrals(mode, tm, tb)?;
            v.chirp(&(-self.potential(k21, m1)));
            self.dil.apply(&self.sp, v, -k1);
            apply_multiplier(&self.sp, &mut v.values, &kinetic_table(&self.sp, tb - ta));
            self.dil.apply(&self.sp, v, -k2);
            v.chirp(&(-self.potential(k22, m2)));
            v.time = tb;
            visit(tb, v);
        }
        Ok(())
    }
}

fn window_nodes(geom: &CrossingGeometry, t0: f64, t1: f64) -> Result<Vec<f64>> {
    let tf = geom.t_flat;
    let side = if t0 + t1 > 2.0 * tf { 1.0 } else { -1.0 };
    if (t0 - tf) * (t1 - tf) < 0.0 {
        return Err(Error::Invalid("compensated evolution cannot straddle the crossing time".into()));
    }
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    if (lo - tf).abs().max((hi - tf).abs()) > TAU_SWITCH * (1.0 + 1e-12) {
        return Err(Error::Invalid(format!("interval [{lo}, {hi}] leaves the compensated window")));
    }
    let mut ts: Vec<f64> = window_distances()
        .into_iter()
        .map(|d| if d == 0.0 { tf } else { tf + side * d })
        .filter(|&t| t > lo && t < hi)
        .collect();
    ts.push(t0);
    ts.push(t1);
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    if t1 < t0 {
        ts.reverse();
    }
    Ok(ts)
}

/// Evolve through part of the compensated window. Profiles at times other
/// than `t♭` hold `u`; a profile at `t♭` holds the limit of `v`.
pub fn evolve_compensated(
    model: &PotentialModel,
    traj: &Trajectory,
    u: &ProfileGrid,
    t0: f64,
    t1: f64,
    geom: &CrossingGeometry,
) -> Result<ProfileGrid> {
    let (v, _) = compensated_with_snapshots(model, traj, u, t0, t1, geom, &[])?;
    Ok(v)
}

/// As [`evolve_compensated`], also returning the compensated state `v` at the
/// requested times (which must lie in the window on the same side).
pub fn compensated_with_snapshots(
    model: &PotentialModel,
    traj: &Trajectory,
    u: &ProfileGrid,
    t0: f64,
    t1: f64,
    geom: &CrossingGeometry,
    record: &[f64],
) -> Result<(ProfileGrid, Vec<ProfileGrid>)> {
    let mut nodes = window_nodes(geom, t0, t1)?;
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    for &t in record {
        if t < lo || t > hi {
            return Err(Error::Invalid(format!("snapshot time {t} outside [{lo}, {hi}]")));
        }
        if !nodes.contains(&t) {
            nodes.push(t);
        }
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if t1 < t0 {
        nodes.reverse();
    }
    let ctx = Compensated {
        model,
        traj,
        geom,
        sp: Spectral::new(&u.grid),
        dil: Dilation::new(&geom.gamma0),
        gamma_sq: &geom.gamma0 * &geom.gamma0,
    };
    let mode_in = traj.mode_at(t0);
    let mut v = u.clone();
    compensate(&mut v, geom, mode_in, t0, false);
    let mut snaps: Vec<ProfileGrid> = Vec::new();
    if record.contains(&t0) {
        snaps.push(v.clone());
    }
    ctx.run(&mut v, &nodes, |t, state| {
        if record.contains(&t) {
            snaps.push(state.clone());
        }
    })?;
    compensate(&mut v, geom, traj.mode_at(t1), t1, true);
    v.time = t1;
    v.mode = traj.mode_at(t1);
    v.check_boundary()?;
    snaps.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    Ok((v, snaps))
}

/// The incoming profile at `t♭` and the extrapolation residual
/// `‖v(t♭) − v(t♭ − H_EXTRACT)‖`.
#[derive(Clone, Debug)]
pub struct Incoming {
    pub u_in: ProfileGrid,
    pub residual: f64,
}

/// Carry a profile given at `t ≤ t♭` into the crossing: smooth evolution up
/// to `t♭ − TAU_SWITCH`, then the compensated frame all the way to `t♭`.
pub fn extract_incoming(model: &PotentialModel, traj: &Trajectory, u: &ProfileGrid, geom: &CrossingGeometry) -> Result<Incoming> {
    let tf = geom.t_flat;
    let t_switch = tf - TAU_SWITCH;
    let start = if u.time < t_switch {
        evolve_profile(model, traj, u, u.time, t_switch)?
    } else {
        u.clone()
    };
    let probe = tf - H_EXTRACT;
    let (u_in, snaps) = compensated_with_snapshots(model, traj, &start, start.time, tf, geom, &[probe])?;
    let residual = snaps.first().map(|s| s.distance(&u_in)).unwrap_or(0.0);
    Ok(Incoming { u_in, residual })
}

/// Start an outgoing profile at `t♭` and evolve it on `traj` (already
/// continued through the crossing) to `t1 > t♭`.
pub fn launch_outgoing(
    u_out: &ProfileGrid,
    geom: &CrossingGeometry,
    model: &PotentialModel,
    traj: &Trajectory,
    t1: f64,
) -> Result<ProfileGrid> {
    let tf = geom.t_flat;
    let mid = (tf + TAU_SWITCH).min(t1);
    let mut u = u_out.clone();
    u.time = tf;
    let u = evolve_compensated(model, traj, &u, tf, mid, geom)?;
    if t1 > mid {
        evolve_profile(model, traj, &u, mid, t1)
    } else {
        Ok(u)
    }
}

/// Run a profile backward from `t > t♭` to the crossing, returning the
/// compensated limit at `t♭`.
pub fn retract_outgoing(u: &ProfileGrid, geom: &CrossingGeometry, model: &PotentialModel, traj: &Trajectory) -> Result<ProfileGrid> {
    let tf = geom.t_flat;
    let mid = tf + TAU_SWITCH;
    let start = if u.time > mid {
        evolve_profile(model, traj, u, u.time, mid)?
    } else {
        u.clone()
    };
    evolve_compensated(model, traj, &start, start.time, tf, geom)
}

/// A centred complex Gaussian `c·e^{(i/2)Ay·y}` with `Im A > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub a: DMatrix<Complex64>,
    pub amplitude: Complex64,
}

impl GaussianParams {
    /// The normalized ground state `π^{−d/4}e^{−|y|²/2}`.
    pub fn standard(d: usize) -> Self {
        GaussianParams {
            a: DMatrix::identity(d, d) * Complex64::new(0.0, 1.0),
            amplitude: Complex64::new(std::f64::consts::PI.powf(-(d as f64) / 4.0), 0.0),
        }
    }

    pub fn sample(&self, grid: &Grid, time: f64, mode: Mode) -> ProfileGrid {
        let d = grid.dim();
        let a = self.a.clone();
        let c = self.amplitude;
        ProfileGrid::from_fn(grid.clone(), time, mode, move |y| {
            let mut q = Complex64::default();
            for i in 0..d {
                for j in 0..d {
                    q += a[(i, j)] * y[i] * y[j];
                }
            }
            c * (Complex64::new(0.0, 0.5) * q).exp()
        })
    }
}

/// Evolve Gaussian parameters through the linearized flow `Q̇ = P, Ṗ = −HQ`,
/// `A = PQ⁻¹`, amplitude `c₀/√det Q` on the continuous branch.
pub fn gaussian_oracle<H>(hess: H, g: &GaussianParams, t0: f64, t1: f64) -> Result<GaussianParams>
where
    H: Fn(f64) -> DMatrix<f64>,
{
    let d = g.a.nrows();
    let n = d * d;
    // state: Q then P, each complex d×d column-major, packed (re, im)
    let mut y0 = vec![0.0; 4 * n];
    for i in 0..d {
        y0[2 * (i * d + i)] = 1.0;
    }
    for (k, z) in g.a.iter().enumerate() {
        y0[2 * (n + k)] = z.re;
        y0[2 * (n + k) + 1] = z.im;
    }
    let unpack =
        |y: &[f64], off: usize| DMatrix::from_fn(d, d, |i, j| Complex64::new(y[2 * (off + j * d + i)], y[2 * (off + j * d + i) + 1]));
    let rhs = |t: f64, y: &[f64], f: &mut [f64]| {
        let q = unpack(y, 0);
        let h = hess(t).map(|v| Complex64::new(v, 0.0));
        let pd = -(h * q);
        for k in 0..n {
            f[2 * k] = y[2 * (n + k)];
            f[2 * k + 1] = y[2 * (n + k) + 1];
            f[2 * (n + k)] = pd[k].re;
            f[2 * (n + k) + 1] = pd[k].im;
        }
    };
    let opts = OdeOptions {
        rtol: 1e-12,
        atol: 1e-14,
        h_max: 1e-2,
        ..OdeOptions::default()
    };
    let nodes = integrate(rhs, t0, &y0, t1, opts)?;
    // continuous argument of det Q along the nodes
    let mut arg = 0.0;
    let mut prev = Complex64::new(1.0, 0.0);
    for nd in &nodes {
        let det = unpack(&nd.y, 0).determinant();
        let mut step = (det / prev).arg();
        if !step.is_finite() {
            step = 0.0;
        }
        arg += step;
        prev = det;
    }
    let last = &nodes.last().unwrap().y;
    let q = unpack(last, 0);
    let p = unpack(last, n);
    let qi = q
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Invalid("caustic: Q is singular".into()))?;
    let det = q.determinant();
    let root = Complex64::from_polar(det.norm().sqrt(), 0.5 * arg);
    let a = symmetrize_c(p * qi);
    Ok(GaussianParams {
        a,
        amplitude: g.amplitude / root,
    })
}

fn symmetrize_c(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    (&m + m.transpose()) * Complex64::new(0.5, 0.0)
}

/// `∫|u|²` after evolution minus before, per unit time.
pub fn mass_drift_rate(before: &ProfileGrid, after: &ProfileGrid) -> f64 {
    let dt = (after.time - before.time).abs().max(1e-300);
    (after.mass() - before.mass()).abs() / dt.max(1.0)
}

/// Mean of `y` under `|u|²`, used to track packet centres.
pub fn centroid(u: &ProfileGrid) -> DVector<f64> {
    let d = u.dim();
    let m = u.mass();
    let mut c = DVector::zeros(d);
    for a in 0..d {
        let xs: Vec<Vec<f64>> = (0..d).map(|b| u.grid.coords(b)).collect();
        let mut w = u.values.clone();
        grid::map_points(&u.grid, &mut w, &xs, |y, v| *v = Complex64::new(v.norm_sqr() * y[a], 0.0));
        c[a] = w.iter().map(|z| z.re).sum::<f64>() * u.grid.cell_volume() / m;
    }
    c
}
