//! Periodic tensor grids and the FFT plumbing shared by the profile and
//! reference solvers.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Lines gathered per batch when transforming along a strided axis.
const BATCH: usize = 16;

/// Uniform periodic grid with `n` points per axis on `[lo, hi)` (row-major,
/// last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Grid { n, lo, hi }
    }

    /// The box `[−L, L)^d`.
    pub fn cube(d: usize, n: usize, half_width: f64) -> Self {
        Grid {
            n,
            lo: vec![-half_width; d],
            hi: vec![half_width; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.dx(a)).product()
    }

    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        self.lo[axis] + j as f64 * self.dx(axis)
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.coord(axis, j)).collect()
    }

    /// Angular wavenumber of FFT bin `j` along `axis`.
    pub fn wavenumber(&self, axis: usize, j: usize) -> f64 {
        let m = if j < self.n / 2 { j as f64 } else { j as f64 - self.n as f64 };
        2.0 * PI * m / (self.hi[axis] - self.lo[axis])
    }

    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber(axis, j)).collect()
    }

    pub fn nyquist(&self, axis: usize) -> f64 {
        PI / self.dx(axis)
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim()];
        self.unravel(flat, &mut idx);
        idx.iter().enumerate().map(|(a, &j)| self.coord(a, j)).collect()
    }

    /// True when the flat index lies in the outer 10% shell of some axis.
    pub fn in_shell(&self, flat: usize) -> bool {
        let mut idx = vec![0; self.dim()];
        self.unravel(flat, &mut idx);
        let w = (self.n / 10).max(1);
        idx.iter().any(|&j| j < w || j >= self.n - w)
    }
}

/// `Σ |f|² · cell`, summed row by row in a fixed order.
pub fn mass(grid: &Grid, values: &[Complex64]) -> f64 {
    let rows: Vec<f64> = values
        .par_chunks(grid.n)
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .collect();
    rows.iter().sum::<f64>() * grid.cell_volume()
}

/// `Σ ā·b · cell`, deterministic.
pub fn inner(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let rows: Vec<Complex64> = a
        .par_chunks(grid.n)
        .zip(b.par_chunks(grid.n))
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.conj() * y).sum::<Complex64>())
        .collect();
    rows.iter().sum::<Complex64>() * grid.cell_volume()
}

/// Fraction of the mass in the outer 10% shell.
pub fn boundary_fraction(grid: &Grid, values: &[Complex64]) -> f64 {
    let total = mass(grid, values);
    if total == 0.0 {
        return 0.0;
    }
    let rows: Vec<f64> = values
        .par_chunks(grid.n)
        .enumerate()
        .map(|(r, row)| {
            let base = r * grid.n;
            row.iter()
                .enumerate()
                .filter(|(j, _)| grid.in_shell(base + j))
                .map(|(_, z)| z.norm_sqr())
                .sum::<f64>()
        })
        .collect();
    rows.iter().sum::<f64>() * grid.cell_volume() / total
}

/// Forward and inverse d-dimensional FFTs on a [`Grid`].
#[derive(Clone)]
pub struct Spectral {
    pub grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        Spectral {
            grid: grid.clone(),
            fwd: planner.plan_fft_forward(grid.n),
            inv: planner.plan_fft_inverse(grid.n),
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        let d = self.grid.dim();
        let total = data.len();
        for axis in (0..d).rev() {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                data.par_chunks_mut(n).for_each(|line| {
                    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                    plan.process_with_scratch(line, &mut scratch);
                });
                continue;
            }
            // blocks of `n·stride` entries are independent; inside a block the
            // lines are the `stride` interleaved columns
            let block = n * stride;
            data.par_chunks_mut(block).for_each(|blk| {
                let mut buf = vec![Complex64::default(); BATCH * n];
                let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                let mut c0 = 0;
                while c0 < stride {
                    let nb = BATCH.min(stride - c0);
                    for j in 0..n {
                        let row = &blk[j * stride + c0..j * stride + c0 + nb];
                        for (b, v) in row.iter().enumerate() {
                            buf[b * n + j] = *v;
                        }
                    }
                    plan.process_with_scratch(&mut buf[..nb * n], &mut scratch);
                    for j in 0..n {
                        let row = &mut blk[j * stride + c0..j * stride + c0 + nb];
                        for (b, v) in row.iter_mut().enumerate() {
                            *v = buf[b * n + j];
                        }
                    }
                    c0 += nb;
                }
            });
            debug_assert_eq!(total % block, 0);
        }
    }

    /// Unnormalized forward transform (`e^{−ikx}` convention).
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    /// Inverse transform including the `1/N^d` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
        let s = 1.0 / self.grid.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= s);
    }

    /// Apply a Fourier multiplier `m(k)` given per flat spectral index.
    pub fn apply_multiplier(&self, data: &mut [Complex64], mult: &[Complex64]) {
        self.forward(data);
        data.par_iter_mut().zip(mult.par_iter()).for_each(|(z, m)| *z *= m);
        self.inverse(data);
    }

    /// Tabulate `f(k)` over the spectral grid.
    pub fn tabulate<F: Fn(&[f64]) -> Complex64 + Sync>(&self, f: F) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.grid.len()];
        map_points(&self.grid, &mut out, &self.wavenumbers(), |k, v| *v = f(k));
        out
    }

    pub fn wavenumbers(&self) -> Vec<Vec<f64>> {
        (0..self.grid.dim()).map(|a| self.grid.wavenumbers(a)).collect()
    }

    /// Multiply in Fourier space by `f(k)` computed on the fly.
    pub fn apply_symbol<F: Fn(&[f64]) -> Complex64 + Sync>(&self, data: &mut [Complex64], f: F) {
        self.forward(data);
        map_points(&self.grid, data, &self.wavenumbers(), |k, v| *v *= f(k));
        self.inverse(data);
    }
}

/// Tabulate `f(x)` over the grid points.
pub fn tabulate<F: Fn(&[f64]) -> Complex64 + Sync>(grid: &Grid, f: F) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); grid.len()];
    let xs: Vec<Vec<f64>> = (0..grid.dim()).map(|a| grid.coords(a)).collect();
    map_points(grid, &mut out, &xs, |x, v| *v = f(x));
    out
}

/// Visit every sample together with its coordinates `coords[axis][j]`
/// (grid points or wavenumbers), in parallel over rows.
pub fn map_points<F: Fn(&[f64], &mut Complex64) + Sync>(grid: &Grid, values: &mut [Complex64], coords: &[Vec<f64>], f: F) {
    let n = grid.n;
    let d = grid.dim();
    values.par_chunks_mut(n).enumerate().for_each(|(row, chunk)| {
        let mut idx = vec![0; d];
        grid.unravel(row * n, &mut idx);
        let mut x: Vec<f64> = idx.iter().enumerate().map(|(a, &j)| coords[a][j]).collect();
        for (j, v) in chunk.iter_mut().enumerate() {
            x[d - 1] = coords[d - 1][j];
            f(&x, v);
        }
    });
}

/// `xᵀMx` for a row-major `d×d` matrix.
pub fn quad_form(m: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += m[i * d + j] * x[j];
        }
        s += x[i] * row;
    }
    s
}

/// Contract `data` (shape `shape`, row-major) along `axis` with the dense
/// `m × shape[axis]` matrix `mat`, returning the new data with that axis
/// replaced by length `m`.
pub fn contract_axis(data: &[Complex64], shape: &[usize], axis: usize, mat: &[Complex64], m: usize) -> Vec<Complex64> {
    let n = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![Complex64::default(); outer * m * inner];
    out.par_chunks_mut(m * inner).enumerate().for_each(|(o, dst)| {
        let src = &data[o * n * inner..(o + 1) * n * inner];
        for i in 0..m {
            let row = &mat[i * n..(i + 1) * n];
            let d = &mut dst[i * inner..(i + 1) * inner];
            for (j, c) in row.iter().enumerate() {
                if *c == Complex64::default() {
                    continue;
                }
                let s = &src[j * inner..(j + 1) * inner];
                for (dv, sv) in d.iter_mut().zip(s) {
                    *dv += c * sv;
                }
            }
        }
    });
    out
}
