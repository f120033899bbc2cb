//! Scaling and rotation operators acting on grid wavefunctions.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::WaveGrid2D;
use crate::error::{Error, Result};
use crate::spectral::{shift_line, Axis, Fft1, Interpolator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// One-axis scaling: forward `√|u| e^{−i u u̇ x²/2} ψ(u x)`, inverse the
/// exact algebraic inverse `ψ(x) = e^{i u u̇ (x/u)²/2} φ(x/u) / √|u|`.
struct AxisScaling {
    interp: Interpolator,
    /// Phase applied before interpolation (inverse) or after (forward).
    phase: Vec<Complex64>,
    amp: f64,
    dir: Direction,
}

impl AxisScaling {
    fn new(axis: &Axis, u: f64, du: f64, dir: Direction) -> Result<Self> {
        if !(u.abs() > 1e-12) || !u.is_finite() || !du.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scaling factor u = {u} must be finite and nonzero"
            )));
        }
        let xs = axis.coords();
        let (targets, amp): (Vec<f64>, f64) = match dir {
            Direction::Forward => (xs.iter().map(|x| u * x).collect(), u.abs().sqrt()),
            Direction::Inverse => (xs.iter().map(|x| x / u).collect(), 1.0 / u.abs().sqrt()),
        };
        let sign = match dir {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        };
        let phase = xs
            .iter()
            .map(|x| Complex64::from_polar(1.0, sign * 0.5 * u * du * x * x))
            .collect();
        Ok(AxisScaling {
            interp: Interpolator::new(axis, &targets),
            phase,
            amp,
            dir,
        })
    }

    fn apply(&self, line: &mut [Complex64], tmp: &mut [Complex64]) {
        if self.dir == Direction::Inverse {
            line.iter_mut().zip(&self.phase).for_each(|(v, p)| *v *= p);
        }
        self.interp.apply(line, tmp);
        line.copy_from_slice(tmp);
        match self.dir {
            Direction::Forward => line
                .iter_mut()
                .zip(&self.phase)
                .for_each(|(v, p)| *v *= p * self.amp),
            Direction::Inverse => line.iter_mut().for_each(|v| *v *= self.amp),
        }
    }
}

/// Applies the scaling frame change built from the solution pair
/// `(u_x, u̇_x)`, `(u_y, u̇_y)` along the two axes.
pub fn apply_scaling_transform(
    psi: &WaveGrid2D,
    ux: f64,
    dux: f64,
    uy: f64,
    duy: f64,
    dir: Direction,
) -> Result<WaveGrid2D> {
    let sx = AxisScaling::new(&psi.x, ux, dux, dir)?;
    let sy = AxisScaling::new(&psi.y, uy, duy, dir)?;
    let mut out = psi.clone();
    let mut tmp = vec![Complex64::new(0.0, 0.0); psi.x.n.max(psi.y.n)];
    out.for_each_x_line(|_, l| sx.apply(l, &mut tmp[..l.len()]));
    out.for_each_y_line(|_, l| sy.apply(l, &mut tmp[..l.len()]));
    out.check_boundary("scaling transform")?;
    Ok(out)
}

/// Rotation `ψ(x, y) ↦ ψ(x cosθ − y sinθ, x sinθ + y cosθ)` as a shear along
/// x, a reciprocal squeeze of the two axes and a shear along y. The shears
/// are exact Fourier translations; the squeeze uses band-limited
/// interpolation.
pub fn apply_rotation(psi: &WaveGrid2D, theta: f64) -> Result<WaveGrid2D> {
    if !(theta.abs() < FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!(
            "rotation angle {theta} must satisfy |θ| < π/2"
        )));
    }
    let (c, tan) = (theta.cos(), theta.tan());
    let mut out = psi.clone();
    let (xs, ys) = (psi.x.coords(), psi.y.coords());

    // ψ(x − y tanθ, y)
    let mut fx = Fft1::new(psi.x.n);
    let kx = psi.x.wavenumbers();
    out.for_each_x_line(|j, l| shift_line(&mut fx, &kx, l, ys[j] * tan));
    out.check_boundary("rotation (x shear)")?;

    // ψ(x / cosθ, y cosθ)
    let ix = Interpolator::new(&psi.x, &xs.iter().map(|x| x / c).collect::<Vec<_>>());
    let iy = Interpolator::new(&psi.y, &ys.iter().map(|y| y * c).collect::<Vec<_>>());
    let mut tmp = vec![Complex64::new(0.0, 0.0); psi.x.n.max(psi.y.n)];
    out.for_each_x_line(|_, l| {
        let t = &mut tmp[..l.len()];
        ix.apply(l, t);
        l.copy_from_slice(t);
    });
    out.for_each_y_line(|_, l| {
        let t = &mut tmp[..l.len()];
        iy.apply(l, t);
        l.copy_from_slice(t);
    });

    // ψ(x, y + x tanθ)
    let mut fy = Fft1::new(psi.y.n);
    let ky = psi.y.wavenumbers();
    out.for_each_y_line(|i, l| shift_line(&mut fy, &ky, l, -xs[i] * tan));
    out.check_boundary("rotation (y shear)")?;
    Ok(out)
}
