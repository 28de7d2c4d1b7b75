//! The split-step Fourier solver for the full two-level system: a minus-mode
//! packet on a tilted cone, with mass conservation, mode populations and
//! the centroid against the classical trajectory.
//!
//!     cargo run --release --example reference_solver

use conical::ansatz::{centroid, initial_field, InitialPacket, PhysicalGrid};
use conical::classical::{integrate_flow, FlowOptions, PhasePoint};
use conical::profile::ProfileGrid;
use conical::reference::{mode_masses, propagate_reference};
use conical::{Mode, PotentialModel, Result};
use nalgebra::{DMatrix, DVector};

fn main() -> Result<()> {
    let eps = 0.04;
    let model = PotentialModel::tilted(DVector::zeros(2), DMatrix::identity(2, 2), [0.0, 0.5])?;
    let init = InitialPacket {
        z0: PhasePoint::new(&[-0.5, 0.0], &[2f64.sqrt(), 0.0]),
        mode: Mode::Minus,
        profile: ProfileGrid::gaussian(2, 128, 12.0, &[0.0, 0.0], 0.0, Mode::Minus),
        sign: 1.0,
    };
    let pg = PhysicalGrid::new(256, vec![-2.0, -2.0], vec![2.5, 2.5], eps)?;
    let traj = integrate_flow(&model, Mode::Minus, &init.z0, 0.0, 0.75, &FlowOptions::default())?;
    let mut psi = initial_field(&model, &pg, &init, 0.0)?;
    println!("ε = {eps}, {} grid points, dt = {}", pg.grid.len(), eps / 10.0);
    for k in 1..=3 {
        let t = 0.25 * k as f64;
        psi = propagate_reference(&model, &psi, psi.time, t, eps / 10.0)?;
        let (mp, mm) = mode_masses(&model, &psi);
        let density: Vec<_> = (0..psi.psi[0].len())
            .map(|i| conical::Complex64::new((psi.psi[0][i].norm_sqr() + psi.psi[1][i].norm_sqr()).sqrt(), 0.0))
            .collect();
        let c = centroid(&pg.grid, &density);
        let q = traj.state(t).q;
        println!(
            "t = {t:.2}  mass {:.12}  (plus, minus) = ({mp:.2e}, {mm:.6})  centroid ({:+.4}, {:+.4})  classical ({:+.4}, {:+.4})",
            psi.mass(),
            c[0],
            c[1],
            q[0],
            q[1]
        );
    }
    Ok(())
}
