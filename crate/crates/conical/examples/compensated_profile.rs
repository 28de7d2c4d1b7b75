//! The profile equation near a crossing: `u` itself oscillates ever faster
//! while the compensated profile `v` settles to a limit.
//!
//!     cargo run --release --example compensated_profile

use conical::ansatz::sigma_norm;
use conical::classical::{integrate_flow, FlowOptions, PhasePoint};
use conical::profile::{compensate, evolve_compensated, ProfileGrid, TAU_SWITCH};
use conical::{Error, Mode, PotentialModel, Result};

fn main() -> Result<()> {
    let model = PotentialModel::linear_isotropic(2)?;
    let z0 = PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]);
    let traj = integrate_flow(&model, Mode::Minus, &z0, 0.0, 1.0, &FlowOptions::default())?;
    let g = traj.geometry().ok_or(Error::NoCrossing)?.clone();
    let t_start = g.t_flat - TAU_SWITCH;
    let u0 = ProfileGrid::gaussian(2, 128, 12.0, &[0.0, 0.3], t_start, Mode::Minus);
    let limit = evolve_compensated(&model, &traj, &u0, t_start, g.t_flat, &g)?;
    println!("limit at t♭: mass {:.12} (start {:.12})", limit.mass(), u0.mass());
    let mut u = u0;
    for tau in [1e-2, 1e-3, 1e-4, 1e-5] {
        u = evolve_compensated(&model, &traj, &u, u.time, g.t_flat - tau, &g)?;
        let mut v = u.clone();
        compensate(&mut v, &g, Mode::Minus, u.time, false);
        println!(
            "τ = {tau:.0e}  Σ¹(u) = {:.3}  Σ¹(v) = {:.3}  |v - limit| = {:.3e}",
            sigma_norm(&u.grid, &[&u.values], 1, 1.0)?,
            sigma_norm(&v.grid, &[&v.values], 1, 1.0)?,
            v.distance(&limit)
        );
    }
    Ok(())
}
