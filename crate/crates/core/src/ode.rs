//! Adaptive Dormand–Prince 5(4) integrator with continuous (dense) output.

use crate::error::{Error, Result};

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F> OdeSystem for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.0
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.1)(t, y, dy)
    }
}

pub const MIN_TOL: f64 = 1e-14;
pub const MAX_TOL: f64 = 1e-3;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Shampine's continuous extension (as in Hairer's DOPRI5).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub tol: f64,
    pub max_steps: usize,
    /// Optional cap on |h|.
    pub h_max: Option<f64>,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            tol,
            max_steps: 5_000_000,
            h_max: None,
        }
    }
}

/// Accepted steps of an integration plus the interpolation data for each.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    times: Vec<f64>,
    /// Flattened states, `dim` per entry of `times`.
    states: Vec<f64>,
    /// Flattened right-hand sides at the step boundaries.
    derivs: Vec<f64>,
    /// Flattened interpolation coefficients, `4 * dim` per step.
    coeffs: Vec<f64>,
    tol: f64,
    pub rejected: usize,
    pub evaluations: usize,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Step boundaries, monotone in the direction of integration.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    fn covers(&self, t: f64) -> bool {
        let (a, b) = (self.t_start(), self.t_end());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        t >= lo && t <= hi
    }

    fn locate(&self, t: f64) -> usize {
        let forward = self.t_end() >= self.t_start();
        let k = if forward {
            self.times.partition_point(|&x| x <= t)
        } else {
            self.times.partition_point(|&x| x >= t)
        };
        k.saturating_sub(1).min(self.n_steps() - 1)
    }

    /// Interpolated state at `t`; stored step boundaries are returned verbatim.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if !self.covers(t) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside solution window [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        if self.n_steps() == 0 {
            out.copy_from_slice(self.state(0));
            return Ok(());
        }
        let k = self.locate(t);
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        if t == ta {
            out.copy_from_slice(self.state(k));
            return Ok(());
        }
        if t == tb {
            out.copy_from_slice(self.state(k + 1));
            return Ok(());
        }
        let theta = (t - ta) / (tb - ta);
        let theta1 = 1.0 - theta;
        let y0 = self.state(k);
        let d = self.dim;
        let c = &self.coeffs[4 * d * k..4 * d * (k + 1)];
        for i in 0..d {
            let (r2, r3, r4, r5) = (c[i], c[d + i], c[2 * d + i], c[3 * d + i]);
            out[i] = y0[i] + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
        }
        Ok(())
    }

    /// Right-hand side recorded at step boundary `k`.
    pub fn derivative(&self, k: usize) -> &[f64] {
        &self.derivs[k * self.dim..(k + 1) * self.dim]
    }

    /// Evaluation for systems in second-order form `y = (q, q̇)`.
    ///
    /// Positions use the quintic Hermite interpolant through `q, q̇, q̈` at
    /// both ends of the step (C² across steps, O(h⁶) local error), which
    /// is what finite-difference consumers of `q` need. Velocities come from
    /// the ordinary continuous extension.
    pub fn eval_second_order_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.eval_into(t, out)?;
        if self.n_steps() == 0 {
            return Ok(());
        }
        let k = self.locate(t);
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        if t == ta || t == tb {
            return Ok(());
        }
        let h = tb - ta;
        let s = (t - ta) / h;
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s2);
        let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
        let h3 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h5 = 0.5 * s3 - s4 + 0.5 * s5;
        let n = self.dim / 2;
        let (ya, yb) = (self.state(k), self.state(k + 1));
        let (fa, fb) = (self.derivative(k), self.derivative(k + 1));
        for i in 0..n {
            out[i] = h0 * ya[i]
                + h * (h1 * ya[n + i] + h * h2 * fa[n + i])
                + h3 * yb[i]
                + h * (h4 * yb[n + i] + h * h5 * fb[n + i]);
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }
}

fn err_norm(y: &[f64], y_new: &[f64], e: &[f64], tol: f64) -> f64 {
    y.iter()
        .zip(y_new)
        .zip(e)
        .map(|((a, b), e)| e.abs() / (tol * (1.0 + a.abs().max(b.abs()))))
        .fold(0.0, f64::max)
}

fn rms_scaled(v: &[f64], y: &[f64], tol: f64) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(v, y)| {
            let r = v / (tol * (1.0 + y.abs()));
            r * r
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

/// Integrates `sys` from `t0` to `t1` (either direction) with local error
/// per step bounded by `opts.tol` in a mixed absolute/relative max-norm.
pub fn solve<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: OdeOptions,
) -> Result<DenseSolution> {
    let d = sys.dim();
    if y0.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: y0.len(),
        });
    }
    let tol = opts.tol;
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]"
        )));
    }
    if !t0.is_finite() || !t1.is_finite() || y0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite initial data".into()));
    }

    let mut sol = DenseSolution {
        dim: d,
        times: vec![t0],
        states: y0.to_vec(),
        derivs: Vec::new(),
        coeffs: Vec::new(),
        tol,
        rejected: 0,
        evaluations: 0,
    };
    if t1 == t0 {
        let mut f = vec![0.0; d];
        sys.rhs(t0, y0, &mut f);
        sol.derivs = f;
        return Ok(sol);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let h_max = opts.h_max.unwrap_or(span).min(span);

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; d];
    let (mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let (mut k5, mut k6, mut k7) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut ytmp = vec![0.0; d];
    let mut ynew = vec![0.0; d];
    let mut err = vec![0.0; d];
    sys.rhs(t0, &y, &mut k1);
    sol.evaluations += 1;
    sol.derivs.extend_from_slice(&k1);

    // Initial step (Hairer, Nørsett & Wanner II.4).
    let mut h = {
        let d0 = rms_scaled(&y, &y, tol);
        let d1 = rms_scaled(&k1, &y, tol);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        }
        .min(h_max);
        for i in 0..d {
            ytmp[i] = y[i] + dir * h0 * k1[i];
        }
        sys.rhs(t0 + dir * h0, &ytmp, &mut k2);
        sol.evaluations += 1;
        let diff: Vec<f64> = k2.iter().zip(&k1).map(|(a, b)| a - b).collect();
        let d2 = rms_scaled(&diff, &y, tol) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(h_max)
    };

    let mut t = t0;
    let mut last_rejected = false;
    loop {
        if sol.times.len() > opts.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::Integration {
                t,
                reason: "step size underflow".into(),
            });
        }
        let mut finishing = false;
        if (t + dir * h - t1) * dir >= 0.0 || (t1 - t).abs() - h < 1e-12 * h {
            h = (t1 - t).abs();
            finishing = true;
        }
        let hs = dir * h;

        for i in 0..d {
            ytmp[i] = y[i] + hs * A21 * k1[i];
        }
        sys.rhs(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..d {
            ytmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..d {
            ytmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..d {
            ytmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..d {
            ytmp[i] = y[i]
                + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if finishing { t1 } else { t + hs };
        sys.rhs(t + hs, &ytmp, &mut k6);
        for i in 0..d {
            ynew[i] = y[i]
                + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(t_new, &ynew, &mut k7);
        sol.evaluations += 6;
        for i in 0..d {
            err[i] = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = err_norm(&y, &ynew, &err, tol);
        if !en.is_finite() {
            return Err(Error::Integration {
                t,
                reason: "non-finite state".into(),
            });
        }

        if en <= 1.0 {
            let base = sol.coeffs.len();
            sol.coeffs.resize(base + 4 * d, 0.0);
            let c = &mut sol.coeffs[base..];
            for i in 0..d {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                c[i] = ydiff;
                c[d + i] = bspl;
                c[2 * d + i] = ydiff - hs * k7[i] - bspl;
                c[3 * d + i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
            }
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            sol.times.push(t);
            sol.states.extend_from_slice(&y);
            sol.derivs.extend_from_slice(&k1);
            if finishing {
                return Ok(sol);
            }
            let mut fac = 0.9 * en.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(h_max);
            last_rejected = false;
        } else {
            sol.rejected += 1;
            h *= (0.9 * en.powf(-0.2)).max(0.2);
            last_rejected = true;
        }
    }
}

/// Classic fixed-step RK4, used as an independent reference.
pub fn rk4_fixed<S: OdeSystem + ?Sized>(sys: &S, t0: f64, y0: &[f64], t1: f64, n: usize) -> Vec<f64> {
    let d = sys.dim();
    let h = (t1 - t0) / n as f64;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    for s in 0..n {
        let t = t0 + s as f64 * h;
        sys.rhs(t, &y, &mut k1);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        sys.rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..d {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        sys.rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..d {
            tmp[i] = y[i] + h * k3[i];
        }
        sys.rhs(t + h, &tmp, &mut k4);
        for i in 0..d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}
