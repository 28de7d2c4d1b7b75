//! Split-step Fourier solver for `iε∂ₜψ = −ε²/2 Δψ + V(x)ψ` with a
//! two-component `ψ`.

use nalgebra::Vector2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::ansatz::PhysicalGrid;
use crate::grid::{self, Spectral};
use crate::potential::PotentialModel;
use crate::{Error, Result};

/// Below this `|w|` the potential factor uses its series.
const W_SERIES: f64 = 1e-12;
/// Largest boundary-shell mass fraction tolerated at the end of a run.
pub const BOUNDARY_TOL: f64 = 1e-6;

/// Two-component field on a physical grid.
#[derive(Clone, Debug)]
pub struct Field2 {
    pub grid: PhysicalGrid,
    pub psi: [Vec<Complex64>; 2],
    pub time: f64,
}

impl Field2 {
    pub fn zeros(grid: PhysicalGrid, time: f64) -> Self {
        let n = grid.grid.len();
        Field2 {
            grid,
            psi: [vec![Complex64::default(); n], vec![Complex64::default(); n]],
            time,
        }
    }

    pub fn mass(&self) -> f64 {
        self.component_mass(0) + self.component_mass(1)
    }

    pub fn component_mass(&self, c: usize) -> f64 {
        grid::mass(&self.grid.grid, &self.psi[c])
    }

    pub fn inner(&self, other: &Field2) -> Complex64 {
        let g = &self.grid.grid;
        grid::inner(g, &self.psi[0], &other.psi[0]) + grid::inner(g, &self.psi[1], &other.psi[1])
    }

    /// `‖self − other‖_{L²}`.
    pub fn distance(&self, other: &Field2) -> f64 {
        let diff = self.combine(other, -1.0);
        diff.mass().sqrt()
    }

    /// `self + s·other`.
    pub fn combine(&self, other: &Field2, s: f64) -> Field2 {
        let mut out = self.clone();
        for c in 0..2 {
            out.psi[c]
                .par_iter_mut()
                .zip(other.psi[c].par_iter())
                .for_each(|(a, b)| *a += b * s);
        }
        out
    }

    pub fn boundary_fraction(&self) -> f64 {
        let total = self.mass();
        if total == 0.0 {
            return 0.0;
        }
        let g = &self.grid.grid;
        (0..2)
            .map(|c| grid::boundary_fraction(g, &self.psi[c]) * self.component_mass(c))
            .sum::<f64>()
            / total
    }

    pub fn check_boundary(&self) -> Result<()> {
        let f = self.boundary_fraction();
        if f > BOUNDARY_TOL {
            return Err(Error::GridOverflow(f));
        }
        Ok(())
    }
}

/// Pointwise `e^{−iθV(x)}` as `(m00, m01, m11)` of the symmetric 2×2 factor.
type Factor = [Complex64; 3];

fn potential_factor(model: &PotentialModel, x: &[f64], theta: f64) -> Factor {
    let w = model.w(x);
    let nw = w.norm();
    let phase = Complex64::from_polar(1.0, -theta * model.v(x));
    let (c, s_over) = if nw < W_SERIES {
        (1.0 - 0.5 * (theta * nw).powi(2), theta)
    } else {
        ((theta * nw).cos(), (theta * nw).sin() / nw)
    };
    let i = Complex64::new(0.0, 1.0);
    let a = Vector2::new(w[0], w[1]) * s_over;
    [phase * (c - i * a[0]), phase * (-i * a[1]), phase * (c + i * a[0])]
}

fn factor_table(model: &PotentialModel, g: &PhysicalGrid, theta: f64) -> Vec<Factor> {
    let xs: Vec<Vec<f64>> = (0..g.grid.dim()).map(|a| g.grid.coords(a)).collect();
    let n = g.grid.n;
    let d = g.grid.dim();
    let mut out = vec![[Complex64::default(); 3]; g.grid.len()];
    out.par_chunks_mut(n).enumerate().for_each(|(row, chunk)| {
        let mut idx = vec![0; d];
        g.grid.unravel(row * n, &mut idx);
        let mut x: Vec<f64> = idx.iter().enumerate().map(|(a, &j)| xs[a][j]).collect();
        for (j, f) in chunk.iter_mut().enumerate() {
            x[d - 1] = xs[d - 1][j];
            *f = potential_factor(model, &x, theta);
        }
    });
    out
}

fn apply_factors(field: &mut Field2, table: &[Factor]) {
    let [p0, p1] = &mut field.psi;
    p0.par_iter_mut()
        .zip(p1.par_iter_mut())
        .zip(table.par_iter())
        .for_each(|((a, b), m)| {
            let (x, y) = (*a, *b);
            *a = m[0] * x + m[1] * y;
            *b = m[1] * x + m[2] * y;
        });
}

/// Apply `e^{−i(dt/ε)V(x)}` pointwise.
pub fn potential_half_step(model: &PotentialModel, field: &mut Field2, dt: f64) {
    let table = factor_table(model, &field.grid, dt / field.grid.epsilon);
    apply_factors(field, &table);
}

fn kinetic_table(sp: &Spectral, eps: f64, dt: f64) -> Vec<Complex64> {
    sp.tabulate(|k| Complex64::from_polar(1.0, -0.5 * dt * eps * k.iter().map(|v| v * v).sum::<f64>()))
}

/// Multiply each component's transform by `e^{−i(dt·ε/2)|k|²}`.
pub fn kinetic_step(field: &mut Field2, dt: f64) {
    let sp = Spectral::new(&field.grid.grid);
    let table = kinetic_table(&sp, field.grid.epsilon, dt);
    for c in 0..2 {
        sp.apply_multiplier(&mut field.psi[c], &table);
    }
}

/// Strang splitting `V/2 – T – V/2` from `t0` to `t1` with steps of at most
/// `dt`, adjacent potential halves merged. Fails if the final field leaks into
/// the boundary shell.
pub fn propagate_reference(model: &PotentialModel, psi0: &Field2, t0: f64, t1: f64, dt: f64) -> Result<Field2> {
    if dt <= 0.0 {
        return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
    }
    let mut f = psi0.clone();
    f.time = t1;
    if t1 == t0 {
        return Ok(f);
    }
    let n = ((t1 - t0).abs() / dt - 1e-9).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    let eps = f.grid.epsilon;
    let sp = Spectral::new(&f.grid.grid);
    let kin = kinetic_table(&sp, eps, h);
    let half = factor_table(model, &f.grid, 0.5 * h / eps);
    let full = factor_table(model, &f.grid, h / eps);
    apply_factors(&mut f, &half);
    for k in 0..n {
        for c in 0..2 {
            sp.apply_multiplier(&mut f.psi[c], &kin);
        }
        apply_factors(&mut f, if k + 1 == n { &half } else { &full });
    }
    if !f.mass().is_finite() {
        return Err(Error::StiffnessFailure { t: t1, h });
    }
    f.check_boundary()?;
    Ok(f)
}

/// `(∫|Π₊ψ|², ∫|Π₋ψ|²)`; on the crossing set both projectors are taken as `½Id`.
pub fn mode_masses(model: &PotentialModel, field: &Field2) -> (f64, f64) {
    let g = &field.grid.grid;
    let n = g.n;
    let d = g.dim();
    let xs: Vec<Vec<f64>> = (0..d).map(|a| g.coords(a)).collect();
    let rows: Vec<(f64, f64)> = field.psi[0]
        .par_chunks(n)
        .zip(field.psi[1].par_chunks(n))
        .enumerate()
        .map(|(row, (c0, c1))| {
            let mut idx = vec![0; d];
            g.unravel(row * n, &mut idx);
            let mut x: Vec<f64> = idx.iter().enumerate().map(|(a, &j)| xs[a][j]).collect();
            let (mut mp, mut mm) = (0.0, 0.0);
            for j in 0..n {
                x[d - 1] = xs[d - 1][j];
                let w = model.w(&x);
                let nw = w.norm();
                let (a, b) = (c0[j], c1[j]);
                let total = a.norm_sqr() + b.norm_sqr();
                if nw == 0.0 {
                    mp += 0.5 * total;
                    mm += 0.5 * total;
                    continue;
                }
                // ⟨ψ, A(ŵ)ψ⟩ splits the mass between the two eigenlines
                let (u0, u1) = (w[0] / nw, w[1] / nw);
                let aq = u0 * (a.norm_sqr() - b.norm_sqr()) + 2.0 * u1 * (a.conj() * b).re;
                mp += 0.5 * (total + aq);
                mm += 0.5 * (total - aq);
            }
            (mp, mm)
        })
        .collect();
    let cell = g.cell_volume();
    let mp: f64 = rows.iter().map(|r| r.0).sum();
    let mm: f64 = rows.iter().map(|r| r.1).sum();
    (mp * cell, mm * cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use nalgebra::{DMatrix, DVector};

    fn constant_model(v: f64, w: [f64; 2]) -> PotentialModel {
        let m = PotentialModel::tilted(DVector::zeros(2), DMatrix::zeros(2, 2), w).unwrap();
        let mut q = m.scalar().clone();
        q.constant = v;
        PotentialModel::polynomial("constant", q, m.w_component(0).clone(), m.w_component(1).clone()).unwrap()
    }

    fn packet(g: &PhysicalGrid, q: [f64; 2], p: [f64; 2], c: [Complex64; 2]) -> Field2 {
        let eps = g.epsilon;
        let vals = grid::tabulate(&g.grid, |x| {
            let r2 = (x[0] - q[0]).powi(2) + (x[1] - q[1]).powi(2);
            let ph = (p[0] * (x[0] - q[0]) + p[1] * (x[1] - q[1])) / eps;
            Complex64::from_polar((-0.5 * r2 / eps).exp() / (std::f64::consts::PI * eps).sqrt(), ph)
        });
        let mut f = Field2::zeros(g.clone(), 0.0);
        f.psi[0] = vals.iter().map(|z| z * c[0]).collect();
        f.psi[1] = vals.iter().map(|z| z * c[1]).collect();
        f
    }

    fn box_grid(n: usize, eps: f64) -> PhysicalGrid {
        PhysicalGrid {
            grid: Grid::cube(2, n, 2.0),
            epsilon: eps,
        }
    }

    #[test]
    fn factor_is_unitary_and_flips_at_pi() {
        let m = constant_model(0.0, [1.0, 0.0]);
        let f = potential_factor(&m, &[0.0, 0.0], std::f64::consts::PI);
        assert!((f[0] + 1.0).norm() < 1e-14 && (f[2] + 1.0).norm() < 1e-14 && f[1].norm() < 1e-14);
        let m = PotentialModel::linear_isotropic(2).unwrap();
        for x in [[0.3, -0.7], [0.0, 0.0], [1e-13, 0.0], [2.0, 1.5]] {
            let f = potential_factor(&m, &x, 0.9);
            let u = nalgebra::Matrix2::new(f[0], f[1], f[1], f[2]);
            assert!((u.adjoint() * u - nalgebra::Matrix2::identity()).norm() < 1e-14);
        }
        let z = potential_factor(&constant_model(0.7, [0.0, 0.0]), &[0.1, 0.1], 2.0);
        assert!((z[0] - Complex64::from_polar(1.0, -1.4)).norm() < 1e-15);
    }

    #[test]
    fn constant_potential_matches_closed_form() {
        let eps = 0.05;
        let g = box_grid(128, eps);
        let m = constant_model(0.3, [0.4, -0.2]);
        let psi0 = packet(&g, [-0.3, 0.1], [0.5, 0.0], [Complex64::new(1.0, 0.0), Complex64::default()]);
        let t = 0.5;
        let out = propagate_reference(&m, &psi0, 0.0, t, eps / 10.0).unwrap();
        // V constant commutes with the Laplacian
        let mut exact = psi0.clone();
        kinetic_step(&mut exact, t);
        potential_half_step(&m, &mut exact, t);
        assert!(out.distance(&exact) < 1e-10, "{}", out.distance(&exact));
        assert!((out.mass() - psi0.mass()).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_phase_advance() {
        let g = box_grid(32, 0.1);
        let mut f = Field2::zeros(g.clone(), 0.0);
        let k = 2.0 * std::f64::consts::PI * 3.0 / 4.0;
        f.psi[1] = grid::tabulate(&g.grid, |x| Complex64::from_polar(1.0, k * x[0]));
        let before = f.psi[1].clone();
        kinetic_step(&mut f, 0.0);
        assert!(f.psi[1].iter().zip(&before).all(|(a, b)| (a - b).norm() < 1e-14));
        kinetic_step(&mut f, 0.7);
        let ph = Complex64::from_polar(1.0, -0.5 * 0.7 * 0.1 * k * k);
        assert!(f.psi[1].iter().zip(&before).all(|(a, b)| (a - b * ph).norm() < 1e-12));
    }

    #[test]
    fn free_gaussian_spreads_by_the_closed_form() {
        let eps = 0.05;
        let g = box_grid(128, eps);
        let m = constant_model(0.0, [0.0, 0.0]);
        let psi0 = packet(&g, [0.0, 0.0], [0.0, 0.0], [Complex64::new(1.0, 0.0), Complex64::default()]);
        let t = 0.6;
        let out = propagate_reference(&m, &psi0, 0.0, t, eps / 10.0).unwrap();
        // width parameter 1 + it per axis: ψ = (πε)^{-1/2}(1+it)^{-1} e^{−|x|²/(2ε(1+it))}
        let z = Complex64::new(1.0, t);
        let exact = grid::tabulate(&g.grid, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            (-r2 / (2.0 * eps * z)).exp() / (z * (std::f64::consts::PI * eps).sqrt())
        });
        let err: f64 = out.psi[0].iter().zip(&exact).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * g.grid.cell_volume();
        assert!(err.sqrt() < 1e-10, "{}", err.sqrt());
    }

    #[test]
    fn strang_is_second_order() {
        let eps = 0.1;
        let g = box_grid(64, eps);
        let m = PotentialModel::linear_isotropic(2).unwrap();
        let psi0 = packet(&g, [-0.4, 0.2], [0.8, 0.0], [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let t = 0.3;
        let fine = propagate_reference(&m, &psi0, 0.0, t, eps / 400.0).unwrap();
        let e1 = propagate_reference(&m, &psi0, 0.0, t, eps / 10.0).unwrap().distance(&fine);
        let e2 = propagate_reference(&m, &psi0, 0.0, t, eps / 20.0).unwrap().distance(&fine);
        let order = (e1 / e2).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn mode_masses_split_total_mass() {
        let eps = 0.05;
        let g = box_grid(64, eps);
        let m = PotentialModel::linear_isotropic(2).unwrap();
        let f = packet(&g, [0.5, 0.3], [0.0, 0.0], [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let (mp, mm) = mode_masses(&m, &f);
        assert!((mp + mm - f.mass()).abs() < 1e-12);
        // aligned with Π₋ everywhere: w = (1, 0) constant, Π₋ = e₂e₂ᵀ
        let c = constant_model(0.0, [1.0, 0.0]);
        let a = packet(&g, [0.0, 0.0], [0.0, 0.0], [Complex64::default(), Complex64::new(1.0, 0.0)]);
        let (mp, mm) = mode_masses(&c, &a);
        assert!(mp.abs() < 1e-14 && (mm - a.mass()).abs() < 1e-12);
        let h = packet(&g, [0.0, 0.0], [0.0, 0.0], [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
        let (mp, mm) = mode_masses(&c, &h);
        assert!((mp - mm).abs() < 1e-12);
    }
}
