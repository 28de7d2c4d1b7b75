//! A minus-mode trajectory hitting the crossing of the linear isotropic
//! model, its crossing geometry, and both continuations.
//!
//!     cargo run --example classical_crossing

use conical::classical::{action_along, continue_through_crossing, integrate_flow, FlowOptions, PhasePoint};
use conical::{Error, Mode, PotentialModel, Result};

fn main() -> Result<()> {
    let model = PotentialModel::linear_isotropic(2)?;
    let opts = FlowOptions::default();
    let z0 = PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]);
    let inc = integrate_flow(&model, Mode::Minus, &z0, 0.0, 1.0, &opts)?;
    let g = inc.geometry().ok_or(Error::NoCrossing)?;
    println!("crossing at t = {:.12} (exact {:.12})", g.t_flat, 2f64.sqrt() - 1.0);
    println!("  q = {:?}, p = {:?}", g.q_flat.as_slice(), g.p_flat.as_slice());
    println!("  r = {:.6}, ω = ({:+.4}, {:+.4})", g.r, g.omega[0], g.omega[1]);
    println!(
        "  Γ₀ rows: {:?}",
        g.gamma0
            .row_iter()
            .map(|r| r.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    );

    for mode in [Mode::Minus, Mode::Plus] {
        let out = continue_through_crossing(&model, &inc, mode, &opts)?;
        let z = out.state(1.0);
        let s = action_along(&model, &out);
        println!(
            "continued on {:5}: q(1) = ({:+.6}, {:+.6}), p(1) = ({:+.6}, {:+.6}), action {:+.6}",
            mode.label(),
            z.q[0],
            z.q[1],
            z.p[0],
            z.p[1],
            s.at(1.0)
        );
    }
    Ok(())
}
