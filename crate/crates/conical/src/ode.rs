//! Dormand–Prince 5(4) stepper with cubic Hermite dense output.
//!
//! The stepper exposes single trial steps so that callers can add their own
//! acceptance logic (event handling near crossings, for instance).

use crate::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: 0.01,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

/// A trial step: proposed state, its derivative and the scaled error norm.
pub struct Trial {
    pub h: f64,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    pub err: f64,
}

pub struct Dopri5<F> {
    rhs: F,
    pub t: f64,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
    pub opts: OdeOptions,
    k: [Vec<f64>; 6],
    tmp: Vec<f64>,
}

impl<F: FnMut(f64, &[f64], &mut [f64])> Dopri5<F> {
    pub fn new(mut rhs: F, t0: f64, y0: &[f64], opts: OdeOptions) -> Self {
        let n = y0.len();
        let mut f = vec![0.0; n];
        rhs(t0, y0, &mut f);
        let z = vec![0.0; n];
        Dopri5 {
            rhs,
            t: t0,
            y: y0.to_vec(),
            f,
            opts,
            k: [z.clone(), z.clone(), z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    pub fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) {
        (self.rhs)(t, y, out)
    }

    /// Trial step of signed size `h` from the current state; does not commit.
    pub fn attempt(&mut self, h: f64) -> Trial {
        let n = self.y.len();
        let t = self.t;
        let stage = |coef: &[f64], y: &[f64], f0: &[f64], k: &[Vec<f64>; 6], tmp: &mut Vec<f64>| {
            for i in 0..n {
                let mut s = coef[0] * f0[i];
                for (j, c) in coef.iter().enumerate().skip(1) {
                    s += c * k[j - 1][i];
                }
                tmp[i] = y[i] + h * s;
            }
        };
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        stage(&A2, &self.y, &self.f, &k, &mut tmp);
        (self.rhs)(t + C[1] * h, &tmp, &mut k[0]);
        stage(&A3, &self.y, &self.f, &k, &mut tmp);
        (self.rhs)(t + C[2] * h, &tmp, &mut k[1]);
        stage(&A4, &self.y, &self.f, &k, &mut tmp);
        (self.rhs)(t + C[3] * h, &tmp, &mut k[2]);
        stage(&A5, &self.y, &self.f, &k, &mut tmp);
        (self.rhs)(t + C[4] * h, &tmp, &mut k[3]);
        stage(&A6, &self.y, &self.f, &k, &mut tmp);
        (self.rhs)(t + C[5] * h, &tmp, &mut k[4]);
        let mut y_new = vec![0.0; n];
        for i in 0..n {
            let s = B[0] * self.f[i] + B[2] * k[1][i] + B[3] * k[2][i] + B[4] * k[3][i] + B[5] * k[4][i];
            y_new[i] = self.y[i] + h * s;
        }
        (self.rhs)(t + h, &y_new, &mut k[5]);
        let f_new = k[5].clone();
        let mut acc = 0.0;
        for i in 0..n {
            let e = h * (E[0] * self.f[i] + E[2] * k[1][i] + E[3] * k[2][i] + E[4] * k[3][i] + E[5] * k[4][i] + E[6] * k[5][i]);
            let sc = self.opts.atol + self.opts.rtol * self.y[i].abs().max(y_new[i].abs());
            acc += (e / sc) * (e / sc);
        }
        self.k = k;
        self.tmp = tmp;
        let err = (acc / n as f64).sqrt();
        let finite = err.is_finite() && y_new.iter().all(|v| v.is_finite());
        Trial {
            h,
            y: y_new,
            f: f_new,
            err: if finite { err } else { f64::INFINITY },
        }
    }

    pub fn commit(&mut self, trial: Trial) {
        self.t += trial.h;
        self.y = trial.y;
        self.f = trial.f;
    }

    /// Reset the state, e.g. after a restart across a singularity.
    pub fn reset(&mut self, t: f64, y: &[f64]) {
        self.t = t;
        self.y = y.to_vec();
        let mut f = vec![0.0; y.len()];
        (self.rhs)(t, y, &mut f);
        self.f = f;
    }

    /// Next step size from an error norm, keeping the sign of `h`.
    pub fn next_h(&self, h: f64, err: f64) -> f64 {
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        let mag = (h.abs() * fac).min(self.opts.h_max);
        mag.copysign(h)
    }

    /// Initial step size guess in the direction of `dir`.
    pub fn initial_h(&self, span: f64) -> f64 {
        let fnorm = self.f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ynorm = self.y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let guess = if fnorm > 0.0 { 0.01 * (ynorm + 1.0) / fnorm } else { 1e-3 };
        guess.min(self.opts.h_max).min(span.abs()).max(1e-10).copysign(span)
    }
}

/// One accepted step with enough data for cubic Hermite interpolation.
#[derive(Clone, Debug)]
pub struct Node {
    pub t: f64,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
}

/// Cubic Hermite interpolation between two nodes.
pub fn hermite(a: &Node, b: &Node, t: f64, out: &mut [f64]) {
    let h = b.t - a.t;
    if h == 0.0 {
        out.copy_from_slice(&a.y);
        return;
    }
    let s = (t - a.t) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    for i in 0..out.len() {
        out[i] = h00 * a.y[i] + h10 * h * a.f[i] + h01 * b.y[i] + h11 * h * b.f[i];
    }
}

/// Derivative of the Hermite interpolant.
pub fn hermite_derivative(a: &Node, b: &Node, t: f64, out: &mut [f64]) {
    let h = b.t - a.t;
    if h == 0.0 {
        out.copy_from_slice(&a.f);
        return;
    }
    let s = (t - a.t) / h;
    let d00 = 6.0 * s * s - 6.0 * s;
    let d10 = 3.0 * s * s - 4.0 * s + 1.0;
    let d01 = -d00;
    let d11 = 3.0 * s * s - 2.0 * s;
    for i in 0..out.len() {
        out[i] = (d00 * a.y[i] + d01 * b.y[i]) / h + d10 * a.f[i] + d11 * b.f[i];
    }
}

/// Locate the interval of a time-sorted node list containing `t` (clamped).
pub fn locate(nodes: &[Node], t: f64) -> usize {
    let n = nodes.len();
    if n < 2 {
        return 0;
    }
    let idx = nodes.partition_point(|nd| nd.t <= t);
    idx.clamp(1, n - 1) - 1
}

/// Integrate from `t0` to `t1` (either direction), returning every accepted node.
pub fn integrate<F: FnMut(f64, &[f64], &mut [f64])>(rhs: F, t0: f64, y0: &[f64], t1: f64, opts: OdeOptions) -> Result<Vec<Node>> {
    let mut st = Dopri5::new(rhs, t0, y0, opts);
    let mut nodes = vec![Node {
        t: t0,
        y: st.y.clone(),
        f: st.f.clone(),
    }];
    if t1 == t0 {
        return Ok(nodes);
    }
    let mut h = st.initial_h(t1 - t0);
    let mut steps = 0;
    while (t1 - st.t) * h.signum() > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StiffnessFailure { t: st.t, h });
        }
        let remaining = t1 - st.t;
        let last = h.abs() >= remaining.abs();
        let step = if last { remaining } else { h };
        let trial = st.attempt(step);
        if trial.err <= 1.0 {
            let err = trial.err;
            st.commit(trial);
            if last {
                st.t = t1;
            }
            nodes.push(Node {
                t: st.t,
                y: st.y.clone(),
                f: st.f.clone(),
            });
            h = st.next_h(step, err);
        } else {
            h = st.next_h(step, trial.err);
            if h.abs() < opts.h_min {
                return Err(Error::StiffnessFailure { t: st.t, h });
            }
        }
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let nodes = integrate(|_, y, f| f[0] = -y[0], 0.0, &[1.0], 2.0, OdeOptions::default()).unwrap();
        let last = nodes.last().unwrap();
        assert!((last.t - 2.0).abs() < 1e-15);
        assert!((last.y[0] - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_backward_and_dense_output() {
        let rhs = |_: f64, y: &[f64], f: &mut [f64]| {
            f[0] = y[1];
            f[1] = -y[0];
        };
        let nodes = integrate(rhs, 0.0, &[1.0, 0.0], -3.0, OdeOptions::default()).unwrap();
        let last = nodes.last().unwrap();
        assert!((last.y[0] - 3.0f64.cos()).abs() < 1e-9);
        assert!((last.y[1] - 3.0f64.sin()).abs() < 1e-9);
        let fwd = integrate(rhs, 0.0, &[1.0, 0.0], 3.0, OdeOptions::default()).unwrap();
        let i = locate(&fwd, 1.2345);
        let mut out = [0.0; 2];
        hermite(&fwd[i], &fwd[i + 1], 1.2345, &mut out);
        assert!((out[0] - 1.2345f64.cos()).abs() < 1e-8);
    }
}
