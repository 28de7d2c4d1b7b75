//! Landau–Zener scattering: coefficients, phases, the transfer of profiles
//! across the crossing, and a high-accuracy ODE oracle for the model problem
//! `i∂ₛu = A(srω + η)u`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, SVector, Vector2};
use num_complex::Complex64;
use ode_solvers::{Dop853, OutputType, System};
use rayon::prelude::*;

use crate::potential::{CrossingGeometry, Mode};
use crate::profile::ProfileGrid;
use crate::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Below this `|η₂|` the coefficient `b` is evaluated by its leading series term.
const B_SERIES: f64 = 1e-4;

pub const LZ_RTOL: f64 = 1e-12;
pub const LZ_ATOL: f64 = 1e-12;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Γ(z) by the Lanczos approximation, reflected into `Re z ≥ ½`.
pub fn complex_gamma(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(Error::PoleOfGamma(z));
    }
    if z.re < 0.5 {
        let s = (PI * z).sin();
        return Ok(PI / (s * complex_gamma(1.0 - z)?));
    }
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    Ok((2.0 * PI).sqrt() * ((z + 0.5) * t.ln() - t).exp() * x)
}

/// Survival amplitude `a(η₂) = e^{−πη₂²/2}`.
pub fn coeff_a(eta2: f64) -> f64 {
    (-0.5 * PI * eta2 * eta2).exp()
}

/// Transition amplitude `b(η₂)`, odd in `η₂` with `|a|² + |b|² = 1`.
pub fn coeff_b(eta2: f64) -> Complex64 {
    if eta2.abs() < B_SERIES {
        return I * PI.sqrt() * eta2;
    }
    let y = 0.5 * eta2 * eta2;
    let prefactor = 2.0 * I / (PI.sqrt() * eta2);
    let two_pow = Complex64::from_polar(1.0, -y * std::f64::consts::LN_2);
    // e^{−πy/2}·sinh(πy) without overflow for large y
    let damped_sinh = if PI * y < 20.0 {
        (-0.5 * PI * y).exp() * (PI * y).sinh()
    } else {
        0.5 * ((0.5 * PI * y).exp() - (-1.5 * PI * y).exp())
    };
    let gamma = complex_gamma(Complex64::new(1.0, y)).expect("1 + iy is never a pole");
    prefactor * two_pow * gamma * damped_sinh
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterCoeffs {
    pub a: f64,
    pub b: Complex64,
    pub eta2: f64,
}

impl ScatterCoeffs {
    pub fn new(eta2: f64) -> Self {
        ScatterCoeffs {
            a: coeff_a(eta2),
            b: coeff_b(eta2),
            eta2,
        }
    }
}

/// Transition amplitude of the model problem `i∂ₛu = A(srω + η)u` written
/// in the direct basis `(V_ω, V_ω⊥)`, `V_ω⊥` being `V_ω` turned by `+π/2`.
/// It differs from [`coeff_b`] by the constant phase `−e^{iπ/4}`.
pub fn coeff_b_direct(eta2: f64) -> Complex64 {
    -Complex64::from_polar(1.0, 0.25 * PI) * coeff_b(eta2)
}

/// `S(η₂) = [[a, −b̄], [b, a]]`.
pub fn scattering_matrix(eta2: f64) -> Matrix2<Complex64> {
    let c = ScatterCoeffs::new(eta2);
    let a = Complex64::new(c.a, 0.0);
    Matrix2::new(a, -c.b.conj(), c.b, a)
}

/// The scattering matrix acting on `(α₁ on V_ω⊥, α₂ on V_ω)` in the direct basis.
pub fn scattering_matrix_direct(eta2: f64) -> Matrix2<Complex64> {
    let a = Complex64::new(coeff_a(eta2), 0.0);
    let b = coeff_b_direct(eta2);
    Matrix2::new(a, -b.conj(), b, a)
}

/// Phase shift `θ_ε(η) = (η₂²/2r)·ln(r/ε) + η₁²/r`.
pub fn theta_eps(r: f64, epsilon: f64, eta: (f64, f64)) -> f64 {
    let (e1, e2) = eta;
    e2 * e2 / (2.0 * r) * (r / epsilon).ln() + e1 * e1 / r
}

/// `Λ(s, η) = (η₁ + rs)²/2r + (η₂²/2r)·ln(√r|s|)` with `η` in the `(ω, ω⊥)` frame.
pub fn lambda_phase(s: f64, eta: (f64, f64), r: f64) -> Result<f64> {
    if s == 0.0 {
        return Err(Error::Invalid("Λ(s, η) is undefined at s = 0".into()));
    }
    let (e1, e2) = eta;
    let lin = e1 + r * s;
    Ok(lin * lin / (2.0 * r) + e2 * e2 / (2.0 * r) * (r.sqrt() * s.abs()).ln())
}

/// `R(θ)`, rotation by `θ/2`, so that `R(θ)ᵀA(e_θ)R(θ) = diag(1, −1)`.
pub fn rotate_frame(theta: f64) -> Matrix2<f64> {
    let (s, c) = (0.5 * theta).sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Everything the transfer at one crossing depends on.
#[derive(Clone, Debug)]
pub struct TransferSpec {
    pub geom: CrossingGeometry,
    pub epsilon: f64,
    /// Action `S♭₋` accumulated by the minus trajectory up to the crossing.
    pub action_minus: f64,
    /// Action `S♭₊` accumulated by the plus trajectory up to the crossing.
    pub action_plus: f64,
}

impl TransferSpec {
    pub fn theta(&self, eta: (f64, f64)) -> f64 {
        theta_eps(self.geom.r, self.epsilon, eta)
    }

    fn phase(&self, action: f64) -> Complex64 {
        Complex64::from_polar(1.0, (action / self.epsilon).rem_euclid(2.0 * PI))
    }
}

fn assert_compatible(spec: &TransferSpec, u: &ProfileGrid) {
    assert_eq!(u.grid.dim(), spec.geom.dim(), "profile and crossing dimensions differ");
}

/// Split an incoming minus-mode profile into the outgoing pair
/// `(u_out₊, u_out₋) = (a·v, −e^{iθ}b̄·v)` with `v = e^{iS♭₋/ε}u_in₋` and `b`
/// from [`coeff_b_direct`].
pub fn transfer_single(spec: &TransferSpec, u_in_minus: &ProfileGrid) -> (ProfileGrid, ProfileGrid) {
    assert_compatible(spec, u_in_minus);
    let g = &u_in_minus.grid;
    let ph = spec.phase(spec.action_minus);
    let pairs: Vec<(Complex64, Complex64)> = u_in_minus
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &u)| {
            let y = g.point(i);
            let eta = spec.geom.eta(&y);
            let e2 = spec.geom.eta2_scaled(&y);
            let (a, b) = (coeff_a(e2), coeff_b_direct(e2));
            let v = ph * u;
            let rot = Complex64::from_polar(1.0, spec.theta(eta));
            (a * v, -rot * b.conj() * v)
        })
        .collect();
    split(u_in_minus, pairs, spec.geom.t_flat)
}

/// Transfer with both modes incoming: the pointwise unitary
/// `[[e^{−iθ}b, a], [a, −e^{iθ}b̄]]` (with `b` from [`coeff_b_direct`]) acting on `(e^{iS♭₊/ε}u₊, e^{iS♭₋/ε}u₋)`.
pub fn transfer_pair(spec: &TransferSpec, u_in_plus: &ProfileGrid, u_in_minus: &ProfileGrid) -> (ProfileGrid, ProfileGrid) {
    assert_compatible(spec, u_in_minus);
    assert_eq!(u_in_plus.grid, u_in_minus.grid, "incoming profiles live on different grids");
    let g = &u_in_minus.grid;
    let (php, phm) = (spec.phase(spec.action_plus), spec.phase(spec.action_minus));
    let pairs: Vec<(Complex64, Complex64)> = u_in_plus
        .values
        .par_iter()
        .zip(u_in_minus.values.par_iter())
        .enumerate()
        .map(|(i, (&up, &um))| {
            let y = g.point(i);
            let eta = spec.geom.eta(&y);
            let e2 = spec.geom.eta2_scaled(&y);
            let (a, b) = (coeff_a(e2), coeff_b_direct(e2));
            let rot = Complex64::from_polar(1.0, spec.theta(eta));
            let (vp, vm) = (php * up, phm * um);
            (rot.conj() * b * vp + a * vm, a * vp - rot * b.conj() * vm)
        })
        .collect();
    split(u_in_minus, pairs, spec.geom.t_flat)
}

fn split(template: &ProfileGrid, pairs: Vec<(Complex64, Complex64)>, t: f64) -> (ProfileGrid, ProfileGrid) {
    let (plus, minus): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    (
        ProfileGrid {
            grid: template.grid.clone(),
            values: plus,
            time: t,
            mode: Mode::Plus,
        },
        ProfileGrid {
            grid: template.grid.clone(),
            values: minus,
            time: t,
            mode: Mode::Minus,
        },
    )
}

/// Real state `(Re v₁, Im v₁, Re v₂, Im v₂, s)`. The time rides along as a
/// state component because the solver mishandles stage times of
/// non-autonomous right-hand sides.
type LzState = SVector<f64, 5>;

/// The rotated model `i∂ₛv = [[rs+η₁, η₂], [η₂, −rs−η₁]]v` as a real system.
struct LzSystem {
    r: f64,
    eta1: f64,
    eta2: f64,
}

impl System<f64, LzState> for LzSystem {
    fn system(&self, _s: f64, y: &LzState, dy: &mut LzState) {
        let d = self.r * y[4] + self.eta1;
        let c = self.eta2;
        // v' = −i H v with v = (y0 + i y1, y2 + i y3)
        let (h0r, h0i) = (d * y[0] + c * y[2], d * y[1] + c * y[3]);
        let (h1r, h1i) = (c * y[0] - d * y[2], c * y[1] - d * y[3]);
        dy[0] = h0i;
        dy[1] = -h0r;
        dy[2] = h1i;
        dy[3] = -h1r;
        dy[4] = 1.0;
    }
}

/// Propagate the rotated model (`ω = e₁`) from `s_from` to `s_to`.
pub fn lz_propagate(eta: (f64, f64), r: f64, s_from: f64, s_to: f64, u: [Complex64; 2]) -> Result<[Complex64; 2]> {
    if s_from == s_to {
        return Ok(u);
    }
    let y0 = LzState::from([u[0].re, u[0].im, u[1].re, u[1].im, s_from]);
    let sys = LzSystem {
        r,
        eta1: eta.0,
        eta2: eta.1,
    };
    let span = s_to - s_from;
    let mut solver = Dop853::from_param(
        sys,
        s_from,
        s_to,
        span,
        y0,
        LZ_RTOL,
        LZ_ATOL,
        0.9,
        0.0,
        0.333,
        6.0,
        span.abs(),
        0.0,
        u32::MAX,
        u32::MAX,
        OutputType::Sparse,
    );
    solver.integrate().map_err(|e| match e {
        ode_solvers::dop_shared::IntegrationError::StepSizeUnderflow { x }
        | ode_solvers::dop_shared::IntegrationError::StiffnessDetected { x }
        | ode_solvers::dop_shared::IntegrationError::MaxNumStepReached { x, .. } => Error::StiffnessFailure { t: x, h: 0.0 },
    })?;
    let y = solver.y_out().last().copied().unwrap_or(y0);
    Ok([Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])])
}

/// Solve the rotated model from `s = −s0` to `s = +s0`.
pub fn lz_integrate(eta: (f64, f64), r: f64, s0: f64, u0: [Complex64; 2]) -> Result<[Complex64; 2]> {
    if !(s0 > 0.0) {
        return Err(Error::Invalid(format!("s0 must be positive, got {s0}")));
    }
    lz_propagate(eta, r, -s0, s0, u0)
}

/// Solve `i∂ₛu = A(srω + η)u` in the original basis by conjugating with the
/// rotation that takes `ω` to `e₁`; `eta` holds the components on `(ω, ω⊥)`.
pub fn lz_integrate_along(omega: Vector2<f64>, eta: (f64, f64), r: f64, s0: f64, u0: [Complex64; 2]) -> Result<[Complex64; 2]> {
    let rot = rotate_frame(omega[1].atan2(omega[0]));
    let v0 = apply_real(&rot.transpose(), u0);
    Ok(apply_real(&rot, lz_integrate(eta, r, s0, v0)?))
}

fn apply_real(m: &Matrix2<f64>, u: [Complex64; 2]) -> [Complex64; 2] {
    [m[(0, 0)] * u[0] + m[(0, 1)] * u[1], m[(1, 0)] * u[0] + m[(1, 1)] * u[1]]
}

/// Outcome of one oracle run started on the incoming minus mode.
#[derive(Clone, Copy, Debug)]
pub struct LzOracle {
    pub eta: (f64, f64),
    pub r: f64,
    pub s0: f64,
    /// Population left on the plus mode at `+s0`.
    pub transition: f64,
    /// `|u(s0) − (e^{iΛ}β₁V⊥ + e^{−iΛ}β₂V_ω)|` with `β = S(η₂/√r)·(0, 1)`.
    pub discrepancy: f64,
    pub norm_drift: f64,
}

fn instantaneous_plus(r: f64, eta: (f64, f64), s: f64) -> Vector2<f64> {
    let d = r * s + eta.0;
    let c = eta.1;
    let m = (d * d + c * c).sqrt();
    // eigenvector of [[d, c], [c, −d]] for +m, continuous in s as long as d ≠ −m
    let v = if d >= 0.0 { Vector2::new(d + m, c) } else { Vector2::new(c, m - d) };
    let n = v.norm();
    if n == 0.0 {
        Vector2::new(1.0, 0.0)
    } else {
        v / n
    }
}

/// Run the oracle: start on the minus eigenvector at `−s0` carrying the
/// incoming phase `e^{−iΛ(−s0)}`, integrate to `+s0` and compare with the
/// scattering prediction.
pub fn lz_oracle(eta: (f64, f64), r: f64, s0: f64) -> Result<LzOracle> {
    // for s < 0 the minus eigenvector is the continuation of e₁
    let start = {
        let d = -r * s0 + eta.0;
        let c = eta.1;
        let m = (d * d + c * c).sqrt();
        let v = Vector2::new(m - d, -c);
        let v = if v.norm() == 0.0 { Vector2::new(1.0, 0.0) } else { v / v.norm() };
        let ph = Complex64::from_polar(1.0, -lambda_phase(-s0, eta, r)?);
        [ph * v[0], ph * v[1]]
    };
    let out = lz_integrate(eta, r, s0, start)?;
    let vp = instantaneous_plus(r, eta, s0);
    let overlap = vp[0] * out[0] + vp[1] * out[1];
    let transition = overlap.norm_sqr();
    let s = scattering_matrix_direct(eta.1 / r.sqrt());
    let (beta1, beta2) = (s[(0, 1)], s[(1, 1)]);
    let lam = lambda_phase(s0, eta, r)?;
    let pred = [Complex64::from_polar(1.0, -lam) * beta2, Complex64::from_polar(1.0, lam) * beta1];
    let discrepancy = ((out[0] - pred[0]).norm_sqr() + (out[1] - pred[1]).norm_sqr()).sqrt();
    let norm_drift = ((out[0].norm_sqr() + out[1].norm_sqr()).sqrt() - 1.0).abs();
    Ok(LzOracle {
        eta,
        r,
        s0,
        transition,
        discrepancy,
        norm_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gamma_reference_values() {
        let one = complex_gamma(Complex64::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(one.re, 1.0, epsilon = 1e-14);
        let half = complex_gamma(Complex64::new(0.5, 0.0)).unwrap();
        assert_relative_eq!(half.re, PI.sqrt(), max_relative = 1e-13);
        let g = complex_gamma(Complex64::new(1.0, 1.0)).unwrap();
        assert_relative_eq!(g.norm_sqr(), 0.272_029_055_0, epsilon = 1e-10);
        assert_relative_eq!(g.norm_sqr(), PI / PI.sinh(), max_relative = 1e-13);
        assert!(matches!(complex_gamma(Complex64::new(-2.0, 0.0)), Err(Error::PoleOfGamma(_))));
        let m = complex_gamma(Complex64::new(-0.5, 0.0)).unwrap();
        assert_relative_eq!(m.re, -2.0 * PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn gamma_modulus_on_the_strip() {
        for k in -200..=200 {
            let y = 0.1 * k as f64;
            let g = complex_gamma(Complex64::new(1.0, y)).unwrap();
            let exact = if y == 0.0 { 1.0 } else { PI * y / (PI * y).sinh() };
            assert_relative_eq!(g.norm_sqr(), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn coefficient_values() {
        assert_eq!(coeff_a(0.0), 1.0);
        assert_eq!(coeff_b(0.0), Complex64::new(0.0, 0.0));
        assert_relative_eq!(coeff_a(1.0), 0.207_879_576_4, epsilon = 1e-10);
        assert_relative_eq!(coeff_b(1.0).norm_sqr(), 0.956_786_081_7, epsilon = 1e-10);
        assert!((coeff_b(-1.3) + coeff_b(1.3)).norm() < 1e-15);
        let e = B_SERIES;
        let series = Complex64::new(0.0, PI.sqrt() * e);
        assert!((coeff_b(e) - series).norm() < 1e-11);
    }

    #[test]
    fn unitarity_on_the_sampled_range() {
        let worst = (-4000..=4000)
            .map(|k| {
                let e = k as f64 * 1e-3;
                (coeff_a(e).powi(2) + coeff_b(e).norm_sqr() - 1.0).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn scattering_matrix_is_unitary() {
        assert_eq!(scattering_matrix(0.0), Matrix2::identity());
        let s = scattering_matrix(1.0);
        let p = s.adjoint() * s;
        assert!((p - Matrix2::identity()).norm() < 1e-12);
        assert!((s.determinant() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn phases() {
        assert_eq!(theta_eps(1.0, 0.3, (0.0, 0.0)), 0.0);
        assert_relative_eq!(theta_eps(1.0, (-2.0f64).exp(), (1.0, 1.0)), 2.0, epsilon = 1e-14);
        assert_relative_eq!(theta_eps(2.0, 2.0, (1.5, 3.0)), 1.125);
        assert_relative_eq!(lambda_phase(2.0, (0.0, 0.0), 1.0).unwrap(), 2.0);
        assert_relative_eq!(lambda_phase(-2.0, (0.3, 0.0), 1.5).unwrap(), (0.3 - 3.0f64).powi(2) / 3.0);
        let (s, r, e2) = (3.7, 1.3, 0.8);
        let log_part = lambda_phase(s, (0.0, e2), r).unwrap() - lambda_phase(s, (0.0, 0.0), r).unwrap();
        assert_relative_eq!(log_part, e2 * e2 / (4.0 * r) * (r * s * s).ln(), max_relative = 1e-13);
        assert!(lambda_phase(0.0, (1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn theta_is_twice_the_outgoing_phase_exponent() {
        let (r, eps) = (1.7f64, 0.013f64);
        for &(e1, e2) in &[(0.3, -1.1), (2.0, 0.4), (-0.7, 0.0)] {
            let half = e2 * e2 / (4.0 * r) * (r / eps).ln() + e1 * e1 / (2.0 * r);
            assert_relative_eq!(theta_eps(r, eps, (e1, e2)), 2.0 * half, max_relative = 1e-14);
        }
    }

    #[test]
    fn rotation_conjugates_a() {
        assert_eq!(rotate_frame(0.0), Matrix2::identity());
        let th = PI / 3.0;
        let rot = rotate_frame(th);
        assert_relative_eq!(rot.determinant(), 1.0, epsilon = 1e-15);
        assert!((rot.transpose() * rot - Matrix2::identity()).norm() < 1e-15);
        let w = Vector2::new(1.0, 2.0);
        let e = Vector2::new(th.cos(), th.sin());
        let wedge = e[0] * w[1] - e[1] * w[0];
        let expect = Matrix2::new(e.dot(&w), wedge, wedge, -e.dot(&w));
        let got = rot.transpose() * crate::potential::a_matrix(&w) * rot;
        assert!((got - expect).norm() < 1e-14);
    }

    #[test]
    fn no_transition_without_the_transverse_component() {
        let u0 = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let out = lz_integrate((0.7, 0.0), 1.3, 30.0, u0).unwrap();
        assert!((out[0].norm_sqr() - 0.36).abs() < 1e-10);
        assert!((out[1].norm_sqr() - 0.64).abs() < 1e-10);
    }

    #[test]
    fn time_reversal_recovers_the_start() {
        let u0 = [Complex64::new(0.6, 0.1), Complex64::new(-0.2, 0.7)];
        let s0 = 20.0;
        let fwd = lz_propagate((0.4, 1.0), 1.0, -s0, s0, u0).unwrap();
        let back = lz_propagate((0.4, 1.0), 1.0, s0, -s0, fwd).unwrap();
        let err = ((back[0] - u0[0]).norm_sqr() + (back[1] - u0[1]).norm_sqr()).sqrt();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn oracle_matches_the_scattering_prediction() {
        for &r in &[1.0, 2.0] {
            let o = lz_oracle((0.3, 1.0), r, 60.0).unwrap();
            let expect = coeff_a(1.0 / r.sqrt()).powi(2);
            assert!((o.transition - expect).abs() < 1e-3, "r={r}: {} vs {expect}", o.transition);
            assert!(o.discrepancy < 0.05, "r={r}: {}", o.discrepancy);
            assert!(o.norm_drift < 1e-9);
        }
    }

    #[test]
    fn rotated_frame_agrees_with_direct_statement() {
        let omega = Vector2::new(0.6, 0.8);
        let s0 = 8.0;
        let u0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let via = lz_integrate_along(omega, (0.2, 0.5), 1.0, s0, u0).unwrap();
        let rot = rotate_frame(omega[1].atan2(omega[0]));
        let v = lz_integrate((0.2, 0.5), 1.0, s0, apply_real(&rot.transpose(), u0)).unwrap();
        let back = apply_real(&rot, v);
        assert!((via[0] - back[0]).norm() < 1e-14);
        // conjugation: A(srω + η) = R diag-form Rᵀ
        let w = 0.7 * omega + 0.2 * omega + 0.5 * Vector2::new(-omega[1], omega[0]);
        let m = rot.transpose() * crate::potential::a_matrix(&w) * rot;
        assert!((m - Matrix2::new(0.9, 0.5, 0.5, -0.9)).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn unitarity_everywhere(e in -6.0f64..6.0) {
            let u = coeff_a(e).powi(2) + coeff_b(e).norm_sqr();
            prop_assert!((u - 1.0).abs() < 1e-12);
        }

        #[test]
        fn b_is_odd(e in 0.0f64..5.0) {
            prop_assert!((coeff_b(-e) + coeff_b(e)).norm() < 1e-14);
        }

        #[test]
        fn theta_nonnegative_below_r(r in 0.1f64..5.0, frac in 0.001f64..1.0, e1 in -3.0f64..3.0, e2 in -3.0f64..3.0) {
            prop_assert!(theta_eps(r, frac * r, (e1, e2)) >= 0.0);
        }
    }
}
