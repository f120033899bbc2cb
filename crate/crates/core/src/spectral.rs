//! Uniform periodic grids, FFT wrappers and band-limited interpolation.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of each axis treated as the boundary layer by the guard.
pub const GUARD_FRACTION: f64 = 0.05;
/// Largest edge-to-peak amplitude ratio the guard tolerates.
pub const GUARD_RATIO: f64 = 1e-6;

/// One uniform axis `min + k·step`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub n: usize,
    pub min: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(n: usize, min: f64, step: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "grid size must be a power of two >= 4, got {n}"
            )));
        }
        if !(step > 0.0) || !min.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive and origin finite (min {min}, step {step})"
            )));
        }
        Ok(Axis { n, min, step })
    }

    /// `n` points spanning `[−extent/2, extent/2)`.
    pub fn centered(n: usize, extent: f64) -> Result<Self> {
        Self::new(n, -0.5 * extent, extent / n as f64)
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.min + k as f64 * self.step
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.coord(k)).collect()
    }

    pub fn extent(&self) -> f64 {
        self.n as f64 * self.step
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        wavenumbers(self.n, self.step)
    }

    fn same_as(&self, other: &Axis) -> bool {
        self.n == other.n
            && (self.min - other.min).abs() <= 1e-12 * self.step
            && (self.step - other.step).abs() <= 1e-12 * self.step
    }

    pub fn check_same(&self, other: &Axis) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::Geometry)
        }
    }

    /// Number of samples in each boundary layer.
    pub fn guard_width(&self) -> usize {
        ((GUARD_FRACTION * self.n as f64).ceil() as usize).max(1)
    }

    pub fn in_guard(&self, k: usize) -> bool {
        let w = self.guard_width();
        k < w || k >= self.n - w
    }
}

pub fn wavenumbers(n: usize, step: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * step);
    (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            m * dk
        })
        .collect()
}

/// Forward and inverse transforms of one length. The inverse is scaled by
/// `1/n` so that `inverse(forward(x)) = x`.
#[derive(Clone)]
pub struct Fft1 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Fft1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft1").field("n", &self.n).finish()
    }
}

impl Fft1 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Fft1 {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// Translates `buf` (samples on `axis`) by `shift`: `out(x) = in(x − shift)`,
/// exactly for band-limited periodic data.
pub fn shift_line(fft: &mut Fft1, k: &[f64], buf: &mut [Complex64], shift: f64) {
    fft.forward(buf);
    for (v, &kj) in buf.iter_mut().zip(k) {
        *v *= Complex64::from_polar(1.0, -kj * shift);
    }
    fft.inverse(buf);
}

/// Periodic band-limited interpolation from an axis onto arbitrary targets.
/// Targets outside the sampled interval (beyond half a step) get zero.
#[derive(Debug, Clone)]
pub struct Interpolator {
    n_in: usize,
    weights: Vec<f64>,
    n_out: usize,
}

fn periodic_sinc(delta: f64, n: usize, h: f64) -> f64 {
    if delta == 0.0 {
        return 1.0;
    }
    let a = PI * delta / h;
    let d = n as f64 * (a / n as f64).tan();
    if d == 0.0 {
        1.0
    } else {
        a.sin() / d
    }
}

impl Interpolator {
    pub fn new(axis: &Axis, targets: &[f64]) -> Self {
        let n = axis.n;
        let lo = axis.min - 0.5 * axis.step;
        let hi = axis.coord(n - 1) + 0.5 * axis.step;
        let mut weights = vec![0.0; targets.len() * n];
        for (r, &x) in targets.iter().enumerate() {
            if x < lo || x > hi {
                continue;
            }
            let row = &mut weights[r * n..(r + 1) * n];
            for (j, w) in row.iter_mut().enumerate() {
                *w = periodic_sinc(x - axis.coord(j), n, axis.step);
            }
        }
        Interpolator {
            n_in: n,
            weights,
            n_out: targets.len(),
        }
    }

    pub fn apply(&self, input: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(input.len(), self.n_in);
        debug_assert_eq!(out.len(), self.n_out);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.n_in..(r + 1) * self.n_in];
            let mut acc = Complex64::new(0.0, 0.0);
            for (w, v) in row.iter().zip(input) {
                acc += v * *w;
            }
            *o = acc;
        }
    }
}

/// Largest |ψ| overall and inside the boundary layers of a 1D line.
pub fn edge_and_peak_1d(axis: &Axis, psi: &[Complex64]) -> (f64, f64) {
    let mut peak: f64 = 0.0;
    let mut edge: f64 = 0.0;
    for (k, v) in psi.iter().enumerate() {
        let a = v.norm();
        peak = peak.max(a);
        if axis.in_guard(k) {
            edge = edge.max(a);
        }
    }
    (edge, peak)
}

pub fn guard_verdict(stage: &str, edge: f64, peak: f64) -> Result<()> {
    if !(edge <= GUARD_RATIO * peak) {
        return Err(Error::Boundary {
            stage: stage.to_string(),
            edge,
            peak,
        });
    }
    Ok(())
}
