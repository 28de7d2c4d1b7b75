//! One minus-mode packet through a conical crossing: the two-mode ansatz
//! against the reference solver, and the plus population against the
//! Landau–Zener prediction.
//!
//!     cargo run --release --example single_crossing [epsilon]

use conical::ansatz::{initial_field, propagate_ansatz, wigner_masses, InitialPacket, PhysicalGrid};
use conical::classical::PhasePoint;
use conical::profile::ProfileGrid;
use conical::reference::{mode_masses, propagate_reference};
use conical::{Error, Mode, PotentialModel, Result};

fn main() -> Result<()> {
    let eps: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.02);
    let model = PotentialModel::linear_isotropic(2)?;
    let init = InitialPacket {
        z0: PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]),
        mode: Mode::Minus,
        profile: ProfileGrid::gaussian(2, 256, 16.0, &[0.0, 0.0], 0.0, Mode::Minus),
        sign: 1.0,
    };
    let run = propagate_ansatz(&model, &init, 0.0, 1.0, eps, &[0.0, 1.0])?;
    let c = run.crossing.as_ref().ok_or(Error::NoCrossing)?;
    println!("crossing at t = {:.6}, layer width δ = {:.4}", c.geom.t_flat, run.delta);
    let u_in = &c.incoming_minus.as_ref().ok_or(Error::NoCrossing)?.u_in;
    let (wp, wm) = wigner_masses(&ProfileGrid::zeros(u_in.grid.clone(), u_in.time, Mode::Plus), u_in, &c.geom);
    println!("Landau–Zener masses (plus, minus) = ({wp:.5}, {wm:.5})");
    println!(
        "ansatz masses at t = 1: ({:.5}, {:.5})",
        run.plus.mass_at(1.0),
        run.minus.mass_at(1.0)
    );

    let pg = PhysicalGrid::new(512, vec![-1.6, -2.6], vec![2.4, 2.6], eps)?;
    let psi0 = initial_field(&model, &pg, &init, 0.0)?;
    let psi = propagate_reference(&model, &psi0, 0.0, 1.0, eps / 10.0)?;
    let (mp, mm) = mode_masses(&model, &psi);
    println!("reference masses at t = 1: ({mp:.5}, {mm:.5})");
    println!("|ψ - ansatz| at t = 1: {:.4}", psi.distance(&run.assemble(&pg, 1.0)?));
    Ok(())
}
