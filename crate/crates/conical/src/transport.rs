//! Parallel transport of real eigenvectors along trajectories and the
//! eigenvector frames on either side of a crossing.

use nalgebra::{Matrix2, Vector2};

use crate::classical::Trajectory;
use crate::ode::{self, hermite, locate, Node, OdeOptions};
use crate::potential::{a_matrix, CrossingGeometry, Mode, PotentialModel};
use crate::{Error, Result};

/// Step of the three-point extrapolation towards `t♭`.
pub const H_LIMIT: f64 = 1e-4;
/// Tolerance on the eigenvector residual of a starting vector.
pub const TOL_EIGEN: f64 = 1e-8;

/// Transported unit eigenvector `Y(t)` on one smooth branch.
#[derive(Clone, Debug)]
pub struct EigenframePath {
    pub mode: Mode,
    pub nodes: Vec<Node>,
    /// Limit at the crossing for incoming paths.
    pub v_omega: Option<Vector2<f64>>,
}

impl EigenframePath {
    pub fn t_min(&self) -> f64 {
        self.nodes[0].t.min(self.nodes[self.nodes.len() - 1].t)
    }

    pub fn t_max(&self) -> f64 {
        self.nodes[0].t.max(self.nodes[self.nodes.len() - 1].t)
    }

    pub fn times(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.t).collect()
    }

    /// `Y(t)`, clamped to the covered range. Past the last node of an incoming
    /// path the crossing limit is returned.
    pub fn at(&self, t: f64) -> Vector2<f64> {
        if let Some(v) = self.v_omega {
            if t > self.t_max() {
                return v;
            }
        }
        if self.nodes.len() == 1 {
            return Vector2::new(self.nodes[0].y[0], self.nodes[0].y[1]);
        }
        let t = t.clamp(self.t_min(), self.t_max());
        let i = locate(&self.nodes, t);
        let mut out = [0.0; 2];
        hermite(&self.nodes[i], &self.nodes[i + 1], t, &mut out);
        Vector2::new(out[0], out[1])
    }
}

/// `B_mode(x, ξ)`: `B₋ = −Π₊(ξ·∇Π₊)Π₋` and `B₊ = Π₋(ξ·∇Π₊)Π₊`.
pub fn b_matrix(model: &PotentialModel, mode: Mode, x: &[f64], xi: &[f64]) -> Result<Matrix2<f64>> {
    let e = model.eigen_at(x)?;
    let w = model.w(x);
    let nw = w.norm();
    let dw = model.dw(x);
    let dxi = Vector2::new(
        (0..xi.len()).map(|j| dw[(0, j)] * xi[j]).sum(),
        (0..xi.len()).map(|j| dw[(1, j)] * xi[j]).sum(),
    );
    let dpi = (a_matrix(&dxi) / nw - a_matrix(&w) * (w.dot(&dxi) / (nw * nw * nw))) * 0.5;
    Ok(match mode {
        Mode::Minus => -(e.pi_plus * dpi * e.pi_minus),
        Mode::Plus => e.pi_minus * dpi * e.pi_plus,
        Mode::Reference => Matrix2::zeros(),
    })
}

fn check_eigenvector(model: &PotentialModel, mode: Mode, x: &[f64], y: &Vector2<f64>) -> Result<()> {
    let p = model.eigen_at(x)?.projector(mode);
    let res = (p * y - y).norm().max((y.norm() - 1.0).abs());
    if res > TOL_EIGEN {
        return Err(Error::NotAnEigenvector(res));
    }
    Ok(())
}

/// Transport `y0` from `t0` to `t1` along `traj` on the mode active at `t0`.
/// Both times must lie on the same smooth branch.
pub fn transport_between(model: &PotentialModel, traj: &Trajectory, y0: Vector2<f64>, t0: f64, t1: f64) -> Result<EigenframePath> {
    let mode = traj.mode_at(t0);
    let q0 = traj.state(t0).q;
    check_eigenvector(model, mode, q0.as_slice(), &y0)?;
    let mut fail = None;
    let rhs = |t: f64, y: &[f64], f: &mut [f64]| {
        let z = traj.state(t);
        match b_matrix(model, mode, z.q.as_slice(), z.p.as_slice()) {
            Ok(b) => {
                let d = b * Vector2::new(y[0], y[1]);
                f[0] = d[0];
                f[1] = d[1];
            }
            Err(e) => {
                fail.get_or_insert(e);
                f[0] = 0.0;
                f[1] = 0.0;
            }
        }
    };
    let opts = OdeOptions {
        rtol: 1e-11,
        atol: 1e-13,
        ..OdeOptions::default()
    };
    let mut nodes = ode::integrate(rhs, t0, &[y0[0], y0[1]], t1, opts)?;
    if let Some(e) = fail {
        return Err(e);
    }
    if t1 < t0 {
        nodes.reverse();
    }
    Ok(EigenframePath {
        mode,
        nodes,
        v_omega: None,
    })
}

/// Transport from the start of `traj` up to its crossing (extrapolating the
/// limit `V_ω`), or to its end when there is none.
pub fn parallel_transport(model: &PotentialModel, traj: &Trajectory, y0: Vector2<f64>) -> Result<EigenframePath> {
    let t0 = traj.t_start();
    match traj.geometry() {
        None => transport_between(model, traj, y0, t0, traj.t_end()),
        Some(g) => {
            let mut path = transport_between(model, traj, y0, t0, g.t_flat - H_LIMIT)?;
            path.v_omega = Some(crossing_limit(&path, g)?);
            Ok(path)
        }
    }
}

/// Limit of `Y(t)` as `t → t♭⁻` by quadratic extrapolation from
/// `t♭ − {4h, 2h, h}`, projected onto the matching eigenline of `A(ω)`:
/// `V_ω` for a minus path and `±V_ω⊥` for a plus path.
pub fn crossing_limit(frame: &EigenframePath, geom: &CrossingGeometry) -> Result<Vector2<f64>> {
    let tf = geom.t_flat;
    if frame.t_max() < tf - 4.0 * H_LIMIT - 1e-12 {
        return Err(Error::NoCrossing);
    }
    let y = |k: f64| {
        let t = tf - k * H_LIMIT;
        let i = locate(&frame.nodes, t);
        let mut out = [0.0; 2];
        hermite(&frame.nodes[i], &frame.nodes[i + 1], t, &mut out);
        Vector2::new(out[0], out[1])
    };
    let lim = y(1.0) * (8.0 / 3.0) - y(2.0) * 2.0 + y(4.0) / 3.0;
    let omega = Vector2::new(geom.omega[0], geom.omega[1]);
    let target = -frame.mode.sign();
    let proj = (Matrix2::identity() + a_matrix(&omega) * target) * 0.5;
    let v = proj * lim;
    let n = v.norm();
    if n < 0.5 {
        return Err(Error::NotAnEigenvector(1.0 - n));
    }
    Ok(v / n)
}

/// `V_ω` turned by `+π/2`.
pub fn perp(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v[1], v[0])
}

/// Starting vectors `(Y₊, Y₋)` for the outgoing branches: `V_ω` and `V_ω⊥`
/// projected on the eigenlines at the restart points `q₊`, `q₋`.
pub fn outgoing_frames(
    model: &PotentialModel,
    v_omega: Vector2<f64>,
    q_plus: &[f64],
    q_minus: &[f64],
) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let project = |mode: Mode, q: &[f64], v: Vector2<f64>| -> Result<Vector2<f64>> {
        let p = model.eigen_at(q)?.projector(mode);
        let y = p * v;
        Ok(y / y.norm())
    };
    Ok((
        project(Mode::Plus, q_plus, v_omega)?,
        project(Mode::Minus, q_minus, perp(&v_omega))?,
    ))
}

/// Transport an outgoing frame on the continued branch of `traj`, starting
/// from `y0` at the branch's first time after `t♭`.
pub fn transport_outgoing(model: &PotentialModel, traj: &Trajectory, y0: Vector2<f64>) -> Result<EigenframePath> {
    let g = traj.geometry().ok_or(Error::NoCrossing)?;
    let b = traj.branches.get(1).ok_or(Error::NoCrossing)?;
    let t_restart = b.nodes.iter().map(|n| n.t).find(|&t| t > g.t_flat).unwrap_or(g.t_flat);
    if t_restart <= g.t_flat {
        let y = [y0[0], y0[1]];
        return Ok(EigenframePath {
            mode: b.mode,
            nodes: vec![Node {
                t: g.t_flat,
                y: y.to_vec(),
                f: vec![0.0; 2],
            }],
            v_omega: None,
        });
    }
    transport_between(model, traj, y0, t_restart, traj.t_end())
}

/// `+1` when the plus-path limit is `+V_ω⊥`, `−1` when it is `−V_ω⊥`.
pub fn align_pair_signs(frame_minus: &EigenframePath, frame_plus: &EigenframePath) -> Result<f64> {
    let vo = frame_minus.v_omega.ok_or(Error::NoCrossing)?;
    let lp = frame_plus.v_omega.ok_or(Error::NoCrossing)?;
    let overlap = lp.dot(&vo).abs();
    if overlap > 1e-6 {
        return Err(Error::NotAnEigenvector(overlap));
    }
    Ok(lp.dot(&perp(&vo)).signum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{continue_through_crossing, integrate_flow, FlowOptions, PhasePoint};
    use proptest::prelude::*;

    fn model() -> PotentialModel {
        PotentialModel::linear_isotropic(2).unwrap()
    }

    #[test]
    fn b_matrix_example() {
        let b = b_matrix(&model(), Mode::Minus, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((b - Matrix2::new(0.0, -0.5, 0.0, 0.0)).norm() < 1e-15);
        let z = b_matrix(&model(), Mode::Minus, &[1.0, 0.0], &[3.0, 0.0]).unwrap();
        assert!(z.norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn b_structure(x in prop::array::uniform2(-2.0f64..2.0), xi in prop::array::uniform2(-2.0f64..2.0)) {
            prop_assume!(x[0].hypot(x[1]) > 1e-3);
            let m = model();
            let bm = b_matrix(&m, Mode::Minus, &x, &xi).unwrap();
            let bp = b_matrix(&m, Mode::Plus, &x, &xi).unwrap();
            let e = m.eigen_at(&x).unwrap();
            prop_assert!((bp + bm.transpose()).norm() < 1e-12);
            prop_assert!((e.pi_minus * bm * e.pi_minus).norm() < 1e-12);
            let xi2 = [2.0 * xi[0], 2.0 * xi[1]];
            let b2 = b_matrix(&m, Mode::Minus, &x, &xi2).unwrap();
            prop_assert!((b2 - bm * 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn straight_path_keeps_the_vector() {
        let m = model();
        let z0 = PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]);
        let traj = integrate_flow(&m, Mode::Minus, &z0, 0.0, 1.0, &FlowOptions::default()).unwrap();
        let y0 = m.eigenvector(Mode::Minus, &[-0.5, 0.0], 1.0).unwrap();
        let path = parallel_transport(&m, &traj, y0).unwrap();
        for nd in &path.nodes {
            assert!((Vector2::new(nd.y[0], nd.y[1]) - y0).norm() < 1e-12);
        }
        let v = path.v_omega.unwrap();
        let g = traj.geometry().unwrap();
        let a = a_matrix(&Vector2::new(g.omega[0], g.omega[1]));
        assert!((a * v - v).norm() < 1e-6);
        let flipped = parallel_transport(&m, &traj, -y0).unwrap();
        assert!((flipped.v_omega.unwrap() + v).norm() < 1e-12);
    }

    #[test]
    fn transport_preserves_norm_and_eigenline() {
        let m = model();
        let z0 = PhasePoint::new(&[-0.8, 0.4], &[1.0, 0.3]);
        let traj = integrate_flow(&m, Mode::Minus, &z0, 0.0, 1.5, &FlowOptions::default()).unwrap();
        let y0 = m.eigenvector(Mode::Minus, &[-0.8, 0.4], 1.0).unwrap();
        let path = parallel_transport(&m, &traj, y0).unwrap();
        for nd in &path.nodes {
            let y = Vector2::new(nd.y[0], nd.y[1]);
            let q = traj.state(nd.t).q;
            let p = m.eigen_at(q.as_slice()).unwrap().pi_plus;
            assert!((y.norm() - 1.0).abs() < 1e-10);
            assert!((p * y).norm() < 1e-8);
        }
    }

    #[test]
    fn outgoing_frames_turn_by_a_right_angle() {
        let m = model();
        let z0 = PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]);
        let traj = integrate_flow(&m, Mode::Minus, &z0, 0.0, 1.0, &FlowOptions::default()).unwrap();
        let y0 = m.eigenvector(Mode::Minus, &[-0.5, 0.0], 1.0).unwrap();
        let path = parallel_transport(&m, &traj, y0).unwrap();
        let v = path.v_omega.unwrap();
        assert!((v - Vector2::new(1.0, 0.0)).norm() < 1e-10);
        let opts = FlowOptions::default();
        let tp = continue_through_crossing(&m, &traj, Mode::Plus, &opts).unwrap();
        let tm = continue_through_crossing(&m, &traj, Mode::Minus, &opts).unwrap();
        let tr = traj.geometry().unwrap().t_flat + opts.h_restart;
        let (yp, ym) = outgoing_frames(&m, v, tp.state(tr).q.as_slice(), tm.state(tr).q.as_slice()).unwrap();
        assert!((yp - v).norm() < 1e-4);
        assert!((ym - Vector2::new(0.0, 1.0)).norm() < 1e-4);
        let out = transport_outgoing(&m, &tm, ym).unwrap();
        assert!((out.at(tm.t_end()).norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn diagonal_direction_limit() {
        // ω = (0, 1): V_ω = ±(1,1)/√2
        let m = model();
        let z0 = PhasePoint::new(&[0.0, -0.5], &[0.0, 2f64.sqrt()]);
        let traj = integrate_flow(&m, Mode::Minus, &z0, 0.0, 1.0, &FlowOptions::default()).unwrap();
        let y0 = m.eigenvector(Mode::Minus, &[0.0, -0.5], 1.0).unwrap();
        let path = parallel_transport(&m, &traj, y0).unwrap();
        let v = path.v_omega.unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v.abs() - Vector2::new(s, s)).norm() < 1e-10);
    }

    #[test]
    fn pair_sign_alignment() {
        let m = model();
        let opts = FlowOptions::default();
        let zm = PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]);
        let tm = integrate_flow(&m, Mode::Minus, &zm, 0.0, 1.0, &opts).unwrap();
        let pm = parallel_transport(&m, &tm, m.eigenvector(Mode::Minus, &[-0.5, 0.0], 1.0).unwrap()).unwrap();
        let t_flat = tm.geometry().unwrap().t_flat;
        let s2 = 2f64.sqrt();
        let zp = PhasePoint::new(&[2.5 - 2.0 * s2, 0.0], &[2.0 - s2, 0.0]);
        let tp = integrate_flow(&m, Mode::Plus, &zp, 0.0, 1.0, &opts).unwrap();
        assert!((tp.geometry().unwrap().t_flat - t_flat).abs() < 1e-6);
        let q0 = [2.5 - 2.0 * s2, 0.0];
        for sign in [1.0, -1.0] {
            let pp = parallel_transport(&m, &tp, m.eigenvector(Mode::Plus, &q0, sign).unwrap()).unwrap();
            let flag = align_pair_signs(&pm, &pp).unwrap();
            assert_eq!(flag, pp.v_omega.unwrap().dot(&perp(&pm.v_omega.unwrap())).signum());
            assert!(flag == 1.0 || flag == -1.0);
        }
    }

    #[test]
    fn rejects_a_non_eigenvector() {
        let m = model();
        let z0 = PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]);
        let traj = integrate_flow(&m, Mode::Minus, &z0, 0.0, 1.0, &FlowOptions::default()).unwrap();
        let err = parallel_transport(&m, &traj, Vector2::new(0.6, 0.8)).unwrap_err();
        assert!(matches!(err, Error::NotAnEigenvector(_)));
    }
}
