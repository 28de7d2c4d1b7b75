//! Two packets, one per mode, meeting at the same crossing point. The
//! outgoing masses differ from the incoherent Landau–Zener sum by an
//! interference term that fades slowly as ε shrinks.
//!
//!     cargo run --release --example pair_crossing

use conical::ansatz::{cross_term, propagate_pair, wigner_masses, InitialPacket};
use conical::classical::PhasePoint;
use conical::profile::ProfileGrid;
use conical::{Error, Mode, PotentialModel, Result};

fn main() -> Result<()> {
    let model = PotentialModel::linear_isotropic(2)?;
    let minus = InitialPacket {
        z0: PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]),
        mode: Mode::Minus,
        profile: ProfileGrid::gaussian(2, 256, 16.0, &[0.0, 0.0], 0.0, Mode::Minus),
        sign: 1.0,
    };
    let plus = InitialPacket {
        z0: PhasePoint::new(&[2.5 - 2.0 * 2f64.sqrt(), 0.0], &[2.0 - 2f64.sqrt(), 0.0]),
        mode: Mode::Plus,
        profile: ProfileGrid::gaussian(2, 256, 16.0, &[0.0, 0.5], 0.0, Mode::Plus),
        sign: 1.0,
    };
    println!(
        "{:>7} {:>20} {:>20} {:>12}",
        "eps", "ansatz (+, -)", "incoherent (+, -)", "cross term"
    );
    for eps in [0.02, 0.01, 0.005] {
        let run = propagate_pair(&model, &minus, &plus, 0.0, 1.0, eps, &[0.0, 1.0])?;
        let c = run.crossing.as_ref().ok_or(Error::NoCrossing)?;
        let (um, up) = (&c.incoming_minus.as_ref().unwrap().u_in, &c.incoming_plus.as_ref().unwrap().u_in);
        let (wp, wm) = wigner_masses(up, um, &c.geom);
        let x = cross_term(&c.transfer, up, um);
        println!(
            "{eps:>7} {:>20} {:>20} {x:>12.5}",
            format!("({:.4}, {:.4})", run.plus.mass_at(1.0), run.minus.mass_at(1.0)),
            format!("({wp:.4}, {wm:.4})")
        );
    }
    Ok(())
}
