//! Mode Hamiltonian flows `h±(x, ξ) = |ξ|²/2 + λ±(x)`, continued through a
//! conical crossing, and the action integrals along them.

use nalgebra::DVector;

use crate::ode::{hermite, hermite_derivative, locate, Dopri5, Node, OdeOptions};
use crate::potential::{crossing_geometry, CrossingGeometry, Mode, PotentialModel, TOL_MEET};
use crate::{Error, Result};

/// Half-width of the window around `t♭` where states come from the local expansion.
pub const TAYLOR_RADIUS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    pub fn new(q: &[f64], p: &[f64]) -> Self {
        PhasePoint {
            q: DVector::from_column_slice(q),
            p: DVector::from_column_slice(p),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    fn pack(&self) -> Vec<f64> {
        self.q.iter().chain(self.p.iter()).copied().collect()
    }

    fn unpack(y: &[f64]) -> Self {
        let d = y.len() / 2;
        PhasePoint::new(&y[..d], &y[d..])
    }
}

pub fn energy(model: &PotentialModel, mode: Mode, z: &PhasePoint) -> f64 {
    0.5 * z.p.norm_squared() + model.lambda(mode, z.q.as_slice())
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions {
    pub ode: OdeOptions,
    /// Integration stops once `|w(q)|` drops below this value.
    pub w_stop: f64,
    pub h_restart: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            ode: OdeOptions::default(),
            w_stop: 1e-7,
            h_restart: 1e-6,
        }
    }
}

/// A smooth piece of trajectory on a single mode, nodes sorted by time.
#[derive(Clone, Debug)]
pub struct Branch {
    pub mode: Mode,
    pub nodes: Vec<Node>,
}

impl Branch {
    pub fn t_min(&self) -> f64 {
        self.nodes[0].t
    }

    pub fn t_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].t
    }
}

#[derive(Clone, Debug)]
pub struct Crossing {
    pub geometry: CrossingGeometry,
    pub mode_in: Mode,
    /// Closest approach `|w|` estimated when the crossing was declared.
    pub closest_gap: f64,
    grad_v: DVector<f64>,
    kink: DVector<f64>,
}

impl Crossing {
    /// Local expansion of the mode-`mode` trajectory at `t♭ + s`.
    pub fn expansion(&self, mode: Mode, s: f64) -> PhasePoint {
        let g = &self.geometry;
        let sig = mode.sign();
        let q = &g.q_flat + &g.p_flat * s - &self.grad_v * (0.5 * s * s) - &self.kink * (0.5 * sig * s.signum() * s * s);
        let p = &g.p_flat - &self.grad_v * s - &self.kink * (sig * s.abs());
        PhasePoint { q, p }
    }

    /// One-sided time derivative of the phase point at `t♭`.
    fn one_sided_rate(&self, mode: Mode, side: f64) -> Vec<f64> {
        let g = &self.geometry;
        let acc = -&self.grad_v - &self.kink * (mode.sign() * side);
        g.p_flat.iter().chain(acc.iter()).copied().collect()
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub branches: Vec<Branch>,
    pub crossing: Option<Crossing>,
    /// End time the integration was asked to reach.
    pub t_target: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.branches[0].nodes[0].y.len() / 2
    }

    pub fn t_start(&self) -> f64 {
        self.branches[0].t_min()
    }

    pub fn t_end(&self) -> f64 {
        self.branches.last().unwrap().t_max()
    }

    pub fn geometry(&self) -> Option<&CrossingGeometry> {
        self.crossing.as_ref().map(|c| &c.geometry)
    }

    pub fn incoming_mode(&self) -> Mode {
        self.branches[0].mode
    }

    pub fn outgoing_mode(&self) -> Option<Mode> {
        if self.crossing.is_some() && self.branches.len() > 1 {
            Some(self.branches[1].mode)
        } else {
            None
        }
    }

    fn branch_index(&self, t: f64) -> usize {
        for (i, b) in self.branches.iter().enumerate() {
            if t <= b.t_max() {
                return i;
            }
        }
        self.branches.len() - 1
    }

    pub fn mode_at(&self, t: f64) -> Mode {
        self.branches[self.branch_index(t)].mode
    }

    /// Phase point at time `t`: Hermite interpolation, or the local
    /// expansion within `TAYLOR_RADIUS` of a crossing.
    pub fn state(&self, t: f64) -> PhasePoint {
        let bi = self.branch_index(t);
        let b = &self.branches[bi];
        if let Some(c) = &self.crossing {
            let s = t - c.geometry.t_flat;
            if s.abs() < TAYLOR_RADIUS && (s <= 0.0 || self.branches.len() > 1) {
                return c.expansion(b.mode, s);
            }
        }
        let n = b.nodes[0].y.len();
        let mut y = vec![0.0; n];
        if b.nodes.len() == 1 {
            y.copy_from_slice(&b.nodes[0].y);
        } else {
            let i = locate(&b.nodes, t);
            hermite(&b.nodes[i], &b.nodes[i + 1], t, &mut y);
        }
        PhasePoint::unpack(&y)
    }

    /// Time derivative `(q̇, ṗ)` of the interpolant.
    pub fn rate(&self, t: f64) -> Vec<f64> {
        let b = &self.branches[self.branch_index(t)];
        let n = b.nodes[0].y.len();
        let mut f = vec![0.0; n];
        if b.nodes.len() == 1 {
            f.copy_from_slice(&b.nodes[0].f);
        } else {
            let i = locate(&b.nodes, t);
            hermite_derivative(&b.nodes[i], &b.nodes[i + 1], t, &mut f);
        }
        f
    }

    /// All node times in increasing order (duplicates at branch joints kept once).
    pub fn times(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for b in &self.branches {
            for nd in &b.nodes {
                if out.last().is_none_or(|&l| nd.t > l) {
                    out.push(nd.t);
                }
            }
        }
        out
    }
}

enum Stop {
    Reached,
    Approach,
}

struct BranchRun {
    nodes: Vec<Node>,
    stop: Stop,
}

fn run_branch(model: &PotentialModel, mode: Mode, t0: f64, y0: &[f64], t1: f64, opts: &FlowOptions) -> Result<BranchRun> {
    let d = model.dim();
    let rhs = |_t: f64, y: &[f64], f: &mut [f64]| {
        let g = model.grad_lambda(mode, &y[..d]);
        for i in 0..d {
            f[i] = y[d + i];
            f[d + i] = -g[i];
        }
    };
    let mut st = Dopri5::new(rhs, t0, y0, opts.ode);
    let mut nodes = vec![Node {
        t: t0,
        y: st.y.clone(),
        f: st.f.clone(),
    }];
    if t1 == t0 {
        return Ok(BranchRun {
            nodes,
            stop: Stop::Reached,
        });
    }
    let forward = t1 > t0;
    let watch = mode != Mode::Reference;
    let gap = |y: &[f64]| model.w(&y[..d]);
    let mut h = st.initial_h(t1 - t0);
    let mut steps = 0usize;
    while (t1 - st.t) * h.signum() > 0.0 {
        steps += 1;
        if steps > opts.ode.max_steps {
            return Err(Error::StiffnessFailure { t: st.t, h });
        }
        let remaining = t1 - st.t;
        let last = h.abs() >= remaining.abs();
        let step = if last { remaining } else { h };
        let trial = st.attempt(step);
        let w_old = gap(&st.y);
        let collapse = |h: f64| h.abs() < opts.ode.h_min.max(1e-15 * st.t.abs());
        if trial.err > 1.0 {
            h = st.next_h(step, trial.err);
            if collapse(h) {
                if watch && forward && w_old.norm() < 1e-4 {
                    return Ok(BranchRun {
                        nodes,
                        stop: Stop::Approach,
                    });
                }
                return Err(Error::StiffnessFailure { t: st.t, h });
            }
            continue;
        }
        let w_new = gap(&trial.y);
        if watch && w_old.dot(&w_new) <= 0.0 {
            // the step jumped over the tip of the cone
            if !forward {
                return Err(Error::Invalid("crossing met while integrating backward in time".into()));
            }
            h = 0.5 * step;
            if collapse(h) {
                return Ok(BranchRun {
                    nodes,
                    stop: Stop::Approach,
                });
            }
            continue;
        }
        let err = trial.err;
        st.commit(trial);
        if last {
            st.t = t1;
        }
        nodes.push(Node {
            t: st.t,
            y: st.y.clone(),
            f: st.f.clone(),
        });
        if watch && w_new.norm() < opts.w_stop {
            if !forward {
                return Err(Error::Invalid("crossing met while integrating backward in time".into()));
            }
            return Ok(BranchRun {
                nodes,
                stop: Stop::Approach,
            });
        }
        h = st.next_h(step, err);
    }
    Ok(BranchRun {
        nodes,
        stop: Stop::Reached,
    })
}

/// Close the gap between the last node and the tip of the cone by a linear
/// extrapolation of `w(q(t))`, declaring the crossing when the closest
/// approach is below `TOL_MEET`.
fn declare_crossing(model: &PotentialModel, mode: Mode, last: &Node) -> Result<(Crossing, Node)> {
    let d = model.dim();
    let q = &last.y[..d];
    let p = DVector::from_column_slice(&last.y[d..]);
    let acc = DVector::from_column_slice(&last.f[d..]);
    let w = model.w(q);
    let dw = model.dw(q);
    let wdot = &dw * &p;
    let wdot = nalgebra::Vector2::new(wdot[0], wdot[1]);
    let speed2 = wdot.norm_squared();
    if speed2 == 0.0 {
        return Err(Error::DegenerateCrossing("dw·p vanishes at the crossing".into()));
    }
    let tau = -w.dot(&wdot) / speed2;
    let closest = (w + wdot * tau).norm();
    if closest >= TOL_MEET {
        return Err(Error::NearMiss(closest));
    }
    let t_flat = last.t + tau;
    let q_flat = DVector::from_column_slice(q) + &p * tau + &acc * (0.5 * tau * tau);
    let p_flat = &p + &acc * tau;
    let geometry = crossing_geometry(model, t_flat, &q_flat, &p_flat)?;
    let crossing = Crossing {
        grad_v: model.grad_v(q_flat.as_slice()),
        kink: geometry.dw_t_omega(),
        geometry,
        mode_in: mode,
        closest_gap: closest,
    };
    let y: Vec<f64> = q_flat.iter().chain(p_flat.iter()).copied().collect();
    let f = crossing.one_sided_rate(mode, -1.0);
    Ok((crossing, Node { t: t_flat, y, f }))
}

/// Integrate the flow of `mode` from `z0` at `t0` towards `t1`. For the two
/// eigenvalue modes the integration halts at a crossing point, recorded in
/// `Trajectory::crossing`.
pub fn integrate_flow(model: &PotentialModel, mode: Mode, z0: &PhasePoint, t0: f64, t1: f64, opts: &FlowOptions) -> Result<Trajectory> {
    if z0.dim() != model.dim() {
        return Err(Error::Invalid(format!(
            "phase point has dimension {}, model {}",
            z0.dim(),
            model.dim()
        )));
    }
    if mode != Mode::Reference {
        let g = model.w(z0.q.as_slice()).norm();
        if g < crate::potential::TOL_GAP {
            return Err(Error::OnCrossingSet(g));
        }
    }
    let run = run_branch(model, mode, t0, &z0.pack(), t1, opts)?;
    let mut nodes = run.nodes;
    let crossing = match run.stop {
        Stop::Reached => None,
        Stop::Approach => {
            let (c, node) = declare_crossing(model, mode, nodes.last().unwrap())?;
            if node.t > nodes.last().unwrap().t {
                nodes.push(node);
            } else {
                *nodes.last_mut().unwrap() = node;
            }
            Some(c)
        }
    };
    if t1 < t0 {
        nodes.reverse();
    }
    Ok(Trajectory {
        branches: vec![Branch { mode, nodes }],
        crossing,
        t_target: t1,
    })
}

/// Restart the flow on `out_mode` just after the crossing and integrate to
/// the original target time.
pub fn continue_through_crossing(model: &PotentialModel, traj_in: &Trajectory, out_mode: Mode, opts: &FlowOptions) -> Result<Trajectory> {
    let c = traj_in.crossing.as_ref().ok_or(Error::NoCrossing)?;
    if out_mode == Mode::Reference {
        return Err(Error::Invalid("outgoing mode must be plus or minus".into()));
    }
    if traj_in.branches.len() > 1 {
        return Err(Error::Invalid("trajectory already continued through its crossing".into()));
    }
    let t_flat = c.geometry.t_flat;
    let hr = opts.h_restart;
    let z_flat = PhasePoint {
        q: c.geometry.q_flat.clone(),
        p: c.geometry.p_flat.clone(),
    };
    let mut out = traj_in.clone();
    let mut nodes = vec![Node {
        t: t_flat,
        y: z_flat.pack(),
        f: c.one_sided_rate(out_mode, 1.0),
    }];
    if traj_in.t_target > t_flat + hr {
        let z = c.expansion(out_mode, hr);
        let run = run_branch(model, out_mode, t_flat + hr, &z.pack(), traj_in.t_target, opts)?;
        if let Stop::Approach = run.stop {
            return Err(Error::Invalid("outgoing trajectory meets a second crossing".into()));
        }
        nodes.extend(run.nodes);
    }
    out.branches.push(Branch { mode: out_mode, nodes });
    Ok(out)
}

/// Cumulative action on one branch, measured from `anchor`.
#[derive(Clone, Debug)]
pub struct ActionBranch {
    pub anchor: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Lagrangian `½|p|² − λ(q)` at the nodes, i.e. `dS/dt`.
    pub rates: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ActionCurve {
    pub mode: Mode,
    pub branches: Vec<ActionBranch>,
}

impl ActionCurve {
    fn branch(&self, t: f64) -> &ActionBranch {
        for b in &self.branches {
            if t <= *b.times.last().unwrap() {
                return b;
            }
        }
        self.branches.last().unwrap()
    }

    /// Action at `t`, measured from the anchor of the branch holding `t`
    /// (`t0` before a crossing, `t♭` after it).
    pub fn at(&self, t: f64) -> f64 {
        let b = self.branch(t);
        let n = b.times.len();
        if n == 1 {
            return b.values[0];
        }
        let i = b.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let (ta, tb) = (b.times[i], b.times[i + 1]);
        let h = tb - ta;
        if h == 0.0 {
            return b.values[i];
        }
        let s = (t - ta) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * b.values[i] + h10 * h * b.rates[i] + h01 * b.values[i + 1] + h11 * h * b.rates[i + 1]
    }

    /// Action accumulated up to the crossing, `S(t♭, t0)`.
    pub fn at_crossing(&self) -> f64 {
        *self.branches[0].values.last().unwrap()
    }

    /// Action from `t0` through the crossing, additive over branches.
    pub fn total_at(&self, t: f64) -> f64 {
        if self.branches.len() > 1 && t > *self.branches[0].times.last().unwrap() {
            self.at_crossing() + self.at(t)
        } else {
            self.at(t)
        }
    }
}

fn lagrangian(model: &PotentialModel, mode: Mode, z: &PhasePoint) -> f64 {
    0.5 * z.p.norm_squared() - model.lambda(mode, z.q.as_slice())
}

/// Action integral `∫(p·q̇ − h) ds` along each branch, by Simpson's rule on the
/// node intervals with Hermite midpoints. Each branch is measured from its start.
pub fn action_along(model: &PotentialModel, traj: &Trajectory) -> ActionCurve {
    action_with_anchors(model, traj, &vec![false; traj.branches.len()])
}

fn action_with_anchors(model: &PotentialModel, traj: &Trajectory, anchor_at_end: &[bool]) -> ActionCurve {
    let mut branches = Vec::new();
    for (b, &at_end) in traj.branches.iter().zip(anchor_at_end) {
        let times: Vec<f64> = b.nodes.iter().map(|n| n.t).collect();
        let rates: Vec<f64> = b
            .nodes
            .iter()
            .map(|n| lagrangian(model, b.mode, &PhasePoint::unpack(&n.y)))
            .collect();
        let mut increments = vec![0.0; times.len()];
        for i in 1..times.len() {
            let (ta, tb) = (times[i - 1], times[i]);
            let lm = lagrangian(model, b.mode, &traj.state(0.5 * (ta + tb)));
            increments[i] = (tb - ta) / 6.0 * (rates[i - 1] + 4.0 * lm + rates[i]);
        }
        let mut values = vec![0.0; times.len()];
        if at_end {
            for i in (0..times.len() - 1).rev() {
                values[i] = values[i + 1] - increments[i + 1];
            }
        } else {
            for i in 1..times.len() {
                values[i] = values[i - 1] + increments[i];
            }
        }
        let anchor = if at_end { *times.last().unwrap() } else { times[0] };
        branches.push(ActionBranch {
            anchor,
            times,
            values,
            rates,
        });
    }
    ActionCurve {
        mode: traj.incoming_mode(),
        branches,
    }
}

/// Flow of the scalar Hamiltonian `|ξ|²/2 + v(x)` through `z♭`, on `[t0, t1]`,
/// with its action measured from `t♭`.
pub fn reference_frame(
    model: &PotentialModel,
    geom: &CrossingGeometry,
    t0: f64,
    t1: f64,
    opts: &FlowOptions,
) -> Result<(Trajectory, ActionCurve)> {
    let z = PhasePoint {
        q: geom.q_flat.clone(),
        p: geom.p_flat.clone(),
    };
    let tf = geom.t_flat;
    let mut branches = Vec::new();
    let mut anchors = Vec::new();
    if t0 < tf {
        let back = integrate_flow(model, Mode::Reference, &z, tf, t0, opts)?;
        branches.extend(back.branches);
        anchors.push(true);
    }
    if t1 > tf || branches.is_empty() {
        let fwd = integrate_flow(model, Mode::Reference, &z, tf, t1.max(tf), opts)?;
        branches.extend(fwd.branches);
        anchors.push(false);
    }
    let traj = Trajectory {
        branches,
        crossing: None,
        t_target: t1,
    };
    let action = action_with_anchors(model, &traj, &anchors);
    Ok((traj, action))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_flight_when_force_vanishes() {
        // w constant and v constant: no force on either mode
        let d = 2;
        let model = PotentialModel::tilted(DVector::zeros(d), nalgebra::DMatrix::zeros(2, d), [0.5, 0.0]).unwrap();
        let z0 = PhasePoint::new(&[0.1, 0.2], &[1.0, -0.5]);
        let tr = integrate_flow(&model, Mode::Minus, &z0, 0.0, 2.0, &FlowOptions::default()).unwrap();
        let z = tr.state(1.3);
        assert!((z.q[0] - 1.4).abs() < 1e-12 && (z.q[1] - (0.2 - 0.65)).abs() < 1e-12);
        let s = action_along(&model, &tr);
        // S = (|p|²/2 − c)(t − t0) with c = −0.5
        assert!((s.at(1.3) - (0.625 + 0.5) * 1.3).abs() < 1e-12);
    }

    #[test]
    fn linear_isotropic_minus_reaches_tip() {
        let model = PotentialModel::linear_isotropic(2).unwrap();
        let z0 = PhasePoint::new(&[-1.0, 0.0], &[3f64.sqrt(), 0.0]);
        let tr = integrate_flow(&model, Mode::Minus, &z0, 0.0, 2.0, &FlowOptions::default()).unwrap();
        let g = tr.geometry().expect("crossing");
        assert!((g.t_flat - (3f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((g.p_flat[0] - 1.0).abs() < 1e-12);
        assert!((g.r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_momentum_turns_back_before_the_tip() {
        let model = PotentialModel::linear_isotropic(2).unwrap();
        let z0 = PhasePoint::new(&[-1.0, 0.0], &[1.0, 0.0]);
        let tr = integrate_flow(&model, Mode::Minus, &z0, 0.0, 3.0, &FlowOptions::default()).unwrap();
        assert!(tr.crossing.is_none());
        // q(t) = −1 + t − t²/2 stays below −1/2
        assert!((tr.state(1.0).q[0] + 0.5).abs() < 1e-10);
    }
}
