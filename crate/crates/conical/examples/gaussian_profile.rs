//! Split-step profile evolution along a time-dependent Hessian, checked
//! against the exact Gaussian solution.
//!
//!     cargo run --release --example gaussian_profile

use conical::profile::{evolve_hessian_path, gaussian_oracle, GaussianParams, ProfileGrid, DT_SMOOTH};
use conical::{Mode, Result};
use nalgebra::DMatrix;

fn hessian(t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0 + 0.5 * (2.0 * t).sin(), 0.3 * t.cos(), 0.3 * t.cos(), -0.4 + 0.2 * t])
}

fn main() -> Result<()> {
    let g0 = GaussianParams::standard(2);
    let grid = ProfileGrid::gaussian(2, 128, 12.0, &[0.0, 0.0], 0.0, Mode::Minus).grid;
    let u0 = g0.sample(&grid, 0.0, Mode::Minus);
    let mut u = u0.clone();
    for k in 1..=3 {
        let t = 0.5 * k as f64;
        u = evolve_hessian_path(&u, |s| Ok(hessian(s)), u.time, t, DT_SMOOTH)?;
        let exact = gaussian_oracle(hessian, &g0, 0.0, t)?;
        let a = &exact.a;
        println!(
            "t = {t:.1}  |u - gaussian| = {:.2e}  mass {:.12}  A = [[{:.3}, {:.3}], [{:.3}, {:.3}]]",
            u.distance(&exact.sample(&grid, t, Mode::Minus)),
            u.mass(),
            a[(0, 0)],
            a[(0, 1)],
            a[(1, 0)],
            a[(1, 1)]
        );
    }
    Ok(())
}
