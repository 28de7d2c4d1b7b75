//! Matrix potentials `V(x) = v(x)·Id + A(w(x))`, their eigenstructure and the
//! local geometry of a conical crossing.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Below this gap size a point counts as lying on the crossing set.
pub const TOL_GAP: f64 = 1e-10;
/// Minimal `|dw·p|` for a crossing to be non-degenerate.
pub const TOL_NONDEG: f64 = 1e-8;
/// A trajectory whose closest approach has `|w| <` this value meets the crossing set.
pub const TOL_MEET: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plus,
    Minus,
    /// Scalar Hamiltonian `|ξ|²/2 + v(x)` without the matrix part.
    Reference,
}

impl Mode {
    pub fn sign(self) -> f64 {
        match self {
            Mode::Plus => 1.0,
            Mode::Minus => -1.0,
            Mode::Reference => 0.0,
        }
    }

    pub fn other(self) -> Mode {
        match self {
            Mode::Plus => Mode::Minus,
            Mode::Minus => Mode::Plus,
            Mode::Reference => Mode::Reference,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Plus => "plus",
            Mode::Minus => "minus",
            Mode::Reference => "reference",
        }
    }
}

/// `A(w) = [[w1, w2], [w2, -w1]]`.
pub fn a_matrix(w: &Vector2<f64>) -> Matrix2<f64> {
    Matrix2::new(w[0], w[1], w[1], -w[0])
}

/// Polynomial of degree at most two: `c + g·x + ½ xᵀHx`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub constant: f64,
    pub linear: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl Quadratic {
    pub fn zero(d: usize) -> Self {
        Quadratic {
            constant: 0.0,
            linear: DVector::zeros(d),
            hessian: DMatrix::zeros(d, d),
        }
    }

    pub fn linear(constant: f64, linear: DVector<f64>) -> Self {
        let d = linear.len();
        Quadratic {
            constant,
            linear,
            hessian: DMatrix::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = self.constant;
        for i in 0..d {
            s += self.linear[i] * x[i];
            for j in 0..d {
                s += 0.5 * x[i] * self.hessian[(i, j)] * x[j];
            }
        }
        s
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let d = self.dim();
        DVector::from_fn(d, |i, _| {
            let mut g = self.linear[i];
            for j in 0..d {
                g += self.hessian[(i, j)] * x[j];
            }
            g
        })
    }
}

#[derive(Clone, Debug)]
pub struct PotentialModel {
    pub label: String,
    d: usize,
    v: Quadratic,
    w: [Quadratic; 2],
}

#[derive(Clone, Debug)]
pub struct EigenData {
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub pi_minus: Matrix2<f64>,
    pub pi_plus: Matrix2<f64>,
    pub gap: f64,
}

impl EigenData {
    pub fn projector(&self, mode: Mode) -> Matrix2<f64> {
        match mode {
            Mode::Plus => self.pi_plus,
            Mode::Minus => self.pi_minus,
            Mode::Reference => Matrix2::identity(),
        }
    }
}

impl PotentialModel {
    /// General polynomial model; Hessians must be symmetric.
    pub fn polynomial(label: &str, v: Quadratic, w1: Quadratic, w2: Quadratic) -> Result<Self> {
        let d = v.dim();
        if d < 2 {
            return Err(Error::Invalid(format!("dimension must be at least 2, got {d}")));
        }
        for (name, q) in [("v", &v), ("w1", &w1), ("w2", &w2)] {
            if q.dim() != d || q.hessian.nrows() != d || q.hessian.ncols() != d {
                return Err(Error::Invalid(format!("coefficients of {name} do not match dimension {d}")));
            }
            if (&q.hessian - q.hessian.transpose()).amax() > 1e-14 * (1.0 + q.hessian.amax()) {
                return Err(Error::Invalid(format!("Hessian of {name} is not symmetric")));
            }
            let finite = q.constant.is_finite() && q.linear.iter().all(|x| x.is_finite()) && q.hessian.iter().all(|x| x.is_finite());
            if !finite {
                return Err(Error::Invalid(format!("coefficients of {name} are not finite")));
            }
        }
        Ok(PotentialModel {
            label: label.to_string(),
            d,
            v,
            w: [w1, w2],
        })
    }

    /// `v = 0`, `w(x) = (x₁, x₂)`; further coordinates are inert.
    pub fn linear_isotropic(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Invalid(format!("dimension must be at least 2, got {d}")));
        }
        let mut e1 = DVector::zeros(d);
        e1[0] = 1.0;
        let mut e2 = DVector::zeros(d);
        e2[1] = 1.0;
        Self::polynomial(
            "linear-isotropic",
            Quadratic::zero(d),
            Quadratic::linear(0.0, e1),
            Quadratic::linear(0.0, e2),
        )
    }

    /// `v(x) = κ·x`, `w(x) = Gx + c` with `G` a 2×d matrix.
    pub fn tilted(kappa: DVector<f64>, g: DMatrix<f64>, c: [f64; 2]) -> Result<Self> {
        let d = kappa.len();
        if g.nrows() != 2 || g.ncols() != d {
            return Err(Error::Invalid(format!("G must be 2x{d}, got {}x{}", g.nrows(), g.ncols())));
        }
        Self::polynomial(
            "tilted",
            Quadratic::linear(0.0, kappa),
            Quadratic::linear(c[0], g.row(0).transpose()),
            Quadratic::linear(c[1], g.row(1).transpose()),
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn scalar(&self) -> &Quadratic {
        &self.v
    }

    pub fn w_component(&self, i: usize) -> &Quadratic {
        &self.w[i]
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        self.v.value(x)
    }

    pub fn grad_v(&self, x: &[f64]) -> DVector<f64> {
        self.v.gradient(x)
    }

    pub fn hess_v(&self) -> &DMatrix<f64> {
        &self.v.hessian
    }

    pub fn w(&self, x: &[f64]) -> Vector2<f64> {
        Vector2::new(self.w[0].value(x), self.w[1].value(x))
    }

    /// Jacobian of `w`, a 2×d matrix.
    pub fn dw(&self, x: &[f64]) -> DMatrix<f64> {
        let g0 = self.w[0].gradient(x);
        let g1 = self.w[1].gradient(x);
        DMatrix::from_fn(2, self.d, |i, j| if i == 0 { g0[j] } else { g1[j] })
    }

    /// `v(x)·Id + A(w(x))`.
    pub fn matrix_at(&self, x: &[f64]) -> Matrix2<f64> {
        Matrix2::identity() * self.v(x) + a_matrix(&self.w(x))
    }

    pub fn eigen_at(&self, x: &[f64]) -> Result<EigenData> {
        let w = self.w(x);
        let nw = w.norm();
        if nw < TOL_GAP {
            return Err(Error::OnCrossingSet(nw));
        }
        let v = self.v(x);
        let half = a_matrix(&w) * (0.5 / nw);
        let id = Matrix2::identity() * 0.5;
        Ok(EigenData {
            lambda_minus: v - nw,
            lambda_plus: v + nw,
            pi_minus: id - half,
            pi_plus: id + half,
            gap: 2.0 * nw,
        })
    }

    /// Eigenvalue of the given mode; the scalar part alone for the reference mode.
    pub fn lambda(&self, mode: Mode, x: &[f64]) -> f64 {
        self.v(x) + mode.sign() * self.w(x).norm()
    }

    /// Gradient of `λ_mode`. On the crossing set the conical part is dropped.
    pub fn grad_lambda(&self, mode: Mode, x: &[f64]) -> DVector<f64> {
        let mut g = self.grad_v(x);
        if mode == Mode::Reference {
            return g;
        }
        let w = self.w(x);
        let nw = w.norm();
        if nw > 0.0 {
            let dw = self.dw(x);
            g += dw.transpose() * (w * (mode.sign() / nw));
        }
        g
    }

    /// Hessian of `λ_mode`. Fails on the crossing set for the two modes.
    pub fn hess_lambda(&self, mode: Mode, x: &[f64]) -> Result<DMatrix<f64>> {
        let mut h = self.v.hessian.clone();
        if mode == Mode::Reference {
            return Ok(h);
        }
        let w = self.w(x);
        let nw = w.norm();
        if nw < TOL_GAP {
            return Err(Error::OnCrossingSet(nw));
        }
        let dw = self.dw(x);
        let dwt_w = dw.transpose() * w;
        let mut hn = (&self.w[0].hessian * w[0] + &self.w[1].hessian * w[1]) / nw;
        hn += dw.transpose() * &dw / nw;
        hn -= &dwt_w * dwt_w.transpose() / (nw * nw * nw);
        h += hn * mode.sign();
        Ok(h)
    }

    /// Unit eigenvector of the mode at `x`, with the sign fixed so that its
    /// largest entry is positive, then multiplied by `sign`.
    pub fn eigenvector(&self, mode: Mode, x: &[f64], sign: f64) -> Result<Vector2<f64>> {
        let e = self.eigen_at(x)?;
        let p = e.projector(mode);
        let c0 = p.column(0).into_owned();
        let c1 = p.column(1).into_owned();
        let mut v = if c0.norm() >= c1.norm() { c0 } else { c1 };
        v /= v.norm();
        let big = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
        if big < 0.0 {
            v = -v;
        }
        Ok(v * sign.signum())
    }
}

/// Crossing-local constants `(t♭, z♭, dw(q♭), r, ω, Γ₀)`.
#[derive(Clone, Debug)]
pub struct CrossingGeometry {
    pub t_flat: f64,
    pub q_flat: DVector<f64>,
    pub p_flat: DVector<f64>,
    pub dw: DMatrix<f64>,
    pub r: f64,
    pub omega: Vector2<f64>,
    pub omega_perp: Vector2<f64>,
    pub gamma0: DMatrix<f64>,
}

pub fn crossing_geometry(model: &PotentialModel, t_flat: f64, q_flat: &DVector<f64>, p_flat: &DVector<f64>) -> Result<CrossingGeometry> {
    let x = q_flat.as_slice();
    let gap = model.w(x).norm();
    if gap > TOL_MEET {
        return Err(Error::DegenerateCrossing(format!("|w(q)| = {gap:e} is not on the crossing set")));
    }
    let dw = model.dw(x);
    let gram = &dw * dw.transpose();
    let sv_min = gram.symmetric_eigenvalues().min().max(0.0).sqrt();
    let scale = gram.amax().sqrt().max(1.0);
    if sv_min < 1e-8 * scale {
        return Err(Error::DegenerateCrossing(format!(
            "dw has rank below 2 (smallest singular value {sv_min:e})"
        )));
    }
    let dwp = &dw * p_flat;
    let r = dwp.norm();
    if r < TOL_NONDEG {
        return Err(Error::DegenerateCrossing(format!("|dw·p| = {r:e} is below tolerance")));
    }
    let omega = Vector2::new(dwp[0] / r, dwp[1] / r);
    let omega_perp = Vector2::new(-omega[1], omega[0]);
    let proj = Matrix2::identity() - omega * omega.transpose();
    let proj = DMatrix::from_fn(2, 2, |i, j| proj[(i, j)]);
    let mut gamma0 = dw.transpose() * proj * &dw / r;
    gamma0 = (&gamma0 + gamma0.transpose()) * 0.5;
    Ok(CrossingGeometry {
        t_flat,
        q_flat: q_flat.clone(),
        p_flat: p_flat.clone(),
        dw,
        r,
        omega,
        omega_perp,
        gamma0,
    })
}

impl CrossingGeometry {
    pub fn dim(&self) -> usize {
        self.q_flat.len()
    }

    /// `η(y) = (ω·dw y, ω⊥·dw y)`.
    pub fn eta(&self, y: &[f64]) -> (f64, f64) {
        let mut u = Vector2::zeros();
        for (j, yj) in y.iter().enumerate() {
            u[0] += self.dw[(0, j)] * yj;
            u[1] += self.dw[(1, j)] * yj;
        }
        (self.omega.dot(&u), self.omega_perp.dot(&u))
    }

    /// Transition variable `r^{-1/2} ω⊥·dw y` fed to the scattering coefficients.
    pub fn eta2_scaled(&self, y: &[f64]) -> f64 {
        self.eta(y).1 / self.r.sqrt()
    }

    /// `dwᵀω`, the direction of the momentum kink at the crossing.
    pub fn dw_t_omega(&self) -> DVector<f64> {
        self.dw.transpose() * DVector::from_column_slice(self.omega.as_slice())
    }
}
