//! Eigenvalues, eigenvectors and the crossing set of two built-in models.
//!
//!     cargo run --example eigen_structure

use conical::{Mode, PotentialModel, Result};
use nalgebra::{DMatrix, DVector};

fn describe(model: &PotentialModel, points: &[[f64; 2]]) -> Result<()> {
    for x in points {
        let e = model.eigen_at(x)?;
        let w = model.w(x);
        println!(
            "  x = ({:+.2}, {:+.2})  λ± = ({:+.4}, {:+.4})  gap |w| = {:.4}",
            x[0],
            x[1],
            e.lambda_plus,
            e.lambda_minus,
            w.norm()
        );
        let y = model.eigenvector(Mode::Minus, x, 1.0)?;
        let h = model.hess_lambda(Mode::Minus, x)?;
        println!(
            "    minus eigenvector ({:+.4}, {:+.4}), Hess λ₋ diag ({:+.4}, {:+.4})",
            y[0],
            y[1],
            h[(0, 0)],
            h[(1, 1)]
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    let iso = PotentialModel::linear_isotropic(2)?;
    println!("linear isotropic: w(x) = x, crossing at the origin");
    describe(&iso, &[[1.0, 0.0], [0.3, -0.4], [-0.5, 0.5]])?;
    println!(
        "  on the crossing set: {:?}",
        iso.eigen_at(&[0.0, 0.0]).err().map(|e| e.to_string())
    );

    let tilted = PotentialModel::tilted(DVector::from_vec(vec![0.2, 0.0]), DMatrix::identity(2, 2), [0.0, 0.5])?;
    println!("tilted: linear scalar part, crossing shifted to (0, -0.5)");
    describe(&tilted, &[[0.0, 0.0], [1.0, 1.0], [-0.5, -1.0]])?;
    Ok(())
}
