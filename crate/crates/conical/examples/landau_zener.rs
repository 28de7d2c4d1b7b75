//! Landau–Zener scattering coefficients, and the model two-level problem
//! integrated directly for comparison.
//!
//!     cargo run --release --example landau_zener

use conical::landau_zener::{coeff_a, coeff_b, lz_oracle};
use conical::Result;

fn main() -> Result<()> {
    println!("{:>6} {:>10} {:>10} {:>10} {:>12}", "eta2", "a", "|b|", "arg b", "P(oracle)");
    for k in -4..=4 {
        let e2 = 0.5 * k as f64;
        let (a, b) = (coeff_a(e2), coeff_b(e2));
        let o = lz_oracle((0.0, e2), 1.0, 200.0)?;
        println!("{e2:>6.2} {a:>10.6} {:>10.6} {:>10.6} {:>12.6}", b.norm(), b.arg(), o.transition);
    }
    println!("\nconvergence in the integration window, eta2 = 1:");
    for s0 in [100.0, 200.0, 400.0, 800.0] {
        let o = lz_oracle((0.0, 1.0), 1.0, s0)?;
        println!(
            "  s0 = {s0:>5}  |P - a²| = {:.2e}  discrepancy {:.3e}",
            (o.transition - coeff_a(1.0).powi(2)).abs(),
            o.discrepancy
        );
    }
    Ok(())
}
