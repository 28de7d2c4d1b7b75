//! Parallel transport of the minus eigenvector up to the crossing, its
//! limit there, and the outgoing frames on both modes.
//!
//!     cargo run --example parallel_transport

use conical::classical::{continue_through_crossing, integrate_flow, FlowOptions, PhasePoint};
use conical::transport::{outgoing_frames, parallel_transport, perp, transport_outgoing};
use conical::{Error, Mode, PotentialModel, Result};

fn main() -> Result<()> {
    let model = PotentialModel::tilted(
        nalgebra::DVector::from_vec(vec![0.3, -0.2]),
        nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 1.0]),
        [0.0, 0.0],
    )?;
    let opts = FlowOptions::default();
    // aim at the crossing by running backwards from a point next to it
    let p_flat = [1.0, 0.4];
    let near = PhasePoint::new(&[-1e-9 * p_flat[0], -1e-9 * p_flat[1]], &p_flat);
    let back = integrate_flow(&model, Mode::Minus, &near, 0.6, 0.0, &opts)?;
    let z0 = back.state(0.0);
    let traj = integrate_flow(&model, Mode::Minus, &z0, 0.0, 1.2, &opts)?;
    let g = traj.geometry().ok_or(Error::NoCrossing)?;
    let y0 = model.eigenvector(Mode::Minus, z0.q.as_slice(), 1.0)?;
    let frame = parallel_transport(&model, &traj, y0)?;
    println!("crossing at t = {:.6}", g.t_flat);
    for k in 0..=4 {
        let t = g.t_flat * k as f64 / 5.0;
        let y = frame.at(t);
        let q = traj.state(t).q;
        let resid = (model.matrix_at(q.as_slice()) * y - y * model.lambda(Mode::Minus, q.as_slice())).norm();
        println!("  t = {t:.4}  Y = ({:+.6}, {:+.6})  eigen residual {resid:.1e}", y[0], y[1]);
    }
    let v = frame.v_omega.ok_or(Error::NoCrossing)?;
    println!(
        "limit V_ω = ({:+.6}, {:+.6}), V_ω⊥ = ({:+.6}, {:+.6})",
        v[0],
        v[1],
        perp(&v)[0],
        perp(&v)[1]
    );

    let out_plus = continue_through_crossing(&model, &traj, Mode::Plus, &opts)?;
    let out_minus = continue_through_crossing(&model, &traj, Mode::Minus, &opts)?;
    let tr = g.t_flat + opts.h_restart;
    let (yp, ym) = outgoing_frames(&model, v, out_plus.state(tr).q.as_slice(), out_minus.state(tr).q.as_slice())?;
    let fp = transport_outgoing(&model, &out_plus, yp)?;
    let fm = transport_outgoing(&model, &out_minus, ym)?;
    let (a, b) = (fp.at(1.2), fm.at(1.2));
    println!(
        "outgoing frames at t = 1.2: plus ({:+.6}, {:+.6}), minus ({:+.6}, {:+.6})",
        a[0], a[1], b[0], b[1]
    );
    Ok(())
}
