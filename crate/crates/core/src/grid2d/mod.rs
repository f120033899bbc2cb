//! Two-dimensional wavefunctions: split-step propagation, moments, and the
//! unitary frame changes that reduce the coupled pair to a single line
//! problem.

mod pipeline;
mod reduce;
mod transform;

pub use pipeline::{
    pipeline_solve, pipeline_vs_oracle, CoefficientSample, PipelineComparison, PipelineOptions,
    PipelineReport, SegmentReport, StageNorms,
};
pub use reduce::{
    chain_generator, reduced_coefficients, rotated_frame, rotation_map, scaling_map,
    scaling_map_rate, solve_alpha_beta, transform_generator, AlphaBeta, Mat4,
    ReducedCoefficients, RotatedFrame,
};
pub use transform::{apply_rotation, apply_scaling_transform, Direction};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::{LinearForm, MomentState};
use crate::grid1d::{overlap, step_count, NORM_TOL};
use crate::params::ChainSpec;
use crate::spectral::{self, Axis, Fft1};
use nalgebra::DMatrix;

/// Samples `psi[i * ny + j] = ψ(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveGrid2D {
    pub x: Axis,
    pub y: Axis,
    pub psi: Vec<Complex64>,
}

impl WaveGrid2D {
    pub fn new(x: Axis, y: Axis, psi: Vec<Complex64>) -> Result<Self> {
        if psi.len() != x.n * y.n {
            return Err(Error::Dimension {
                expected: x.n * y.n,
                got: psi.len(),
            });
        }
        Ok(WaveGrid2D { x, y, psi })
    }

    pub fn from_fn(x: Axis, y: Axis, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let ys = y.coords();
        let mut psi = Vec::with_capacity(x.n * y.n);
        for xi in x.coords() {
            psi.extend(ys.iter().map(|&yj| f(xi, yj)));
        }
        WaveGrid2D { x, y, psi }
    }

    /// Normalised product Gaussian with phase-space centre
    /// `(x0, y0, px0, py0)` and position spreads `(sx, sy)`.
    pub fn gaussian(x: Axis, y: Axis, centre: [f64; 4], spread: [f64; 2]) -> Self {
        let [x0, y0, px0, py0] = centre;
        let [sx, sy] = spread;
        let mut g = Self::from_fn(x, y, |a, b| {
            let (dx, dy) = (a - x0, b - y0);
            let amp = (-dx * dx / (4.0 * sx * sx) - dy * dy / (4.0 * sy * sy)).exp();
            Complex64::from_polar(amp, px0 * a + py0 * b)
        });
        g.normalize();
        g
    }

    /// Moments of [`WaveGrid2D::gaussian`] in the continuum.
    pub fn gaussian_moments(centre: [f64; 4], spread: [f64; 2]) -> MomentState {
        let [sx, sy] = spread;
        let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            sx * sx,
            sy * sy,
            0.25 / (sx * sx),
            0.25 / (sy * sy),
        ]));
        MomentState::new(centre.to_vec(), cov).expect("diagonal covariance is valid")
    }

    pub fn cell(&self) -> f64 {
        self.x.step * self.y.step
    }

    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell()
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm_sqr().sqrt();
        for v in &mut self.psi {
            *v *= s;
        }
    }

    pub fn same_geometry(&self, other: &WaveGrid2D) -> Result<()> {
        self.x.check_same(&other.x)?;
        self.y.check_same(&other.y)
    }

    /// Boundary guard on both axes.
    pub fn check_boundary(&self, stage: &str) -> Result<()> {
        let ny = self.y.n;
        let mut peak: f64 = 0.0;
        let mut edge: f64 = 0.0;
        for (idx, v) in self.psi.iter().enumerate() {
            let a = v.norm();
            peak = peak.max(a);
            if self.x.in_guard(idx / ny) || self.y.in_guard(idx % ny) {
                edge = edge.max(a);
            }
        }
        spectral::guard_verdict(stage, edge, peak)
    }

    /// Calls `f(i, line)` on every line of constant `x_i` (contiguous).
    pub fn for_each_y_line(&mut self, mut f: impl FnMut(usize, &mut [Complex64])) {
        for (i, line) in self.psi.chunks_mut(self.y.n).enumerate() {
            f(i, line);
        }
    }

    /// Calls `f(j, line)` on every line of constant `y_j`.
    pub fn for_each_x_line(&mut self, mut f: impl FnMut(usize, &mut [Complex64])) {
        let (nx, ny) = (self.x.n, self.y.n);
        let mut buf = vec![Complex64::new(0.0, 0.0); nx];
        for j in 0..ny {
            for i in 0..nx {
                buf[i] = self.psi[i * ny + j];
            }
            f(j, &mut buf);
            for i in 0..nx {
                self.psi[i * ny + j] = buf[i];
            }
        }
    }
}

/// `|⟨a|b⟩|`.
pub fn fidelity(a: &WaveGrid2D, b: &WaveGrid2D) -> Result<f64> {
    a.same_geometry(b)?;
    Ok(overlap(&a.psi, &b.psi, a.cell()).norm())
}

/// Quadratic Hamiltonian
/// `½kxx px² + ½kyy py² + kxy px py + ½vxx x² + ½vyy y² + vxy x y`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quadratic2 {
    pub kxx: f64,
    pub kyy: f64,
    pub kxy: f64,
    pub vxx: f64,
    pub vyy: f64,
    pub vxy: f64,
}

impl Quadratic2 {
    /// The coupled pair: unit masses, `½Ω_x² x² + ½Ω_y² y² + η x y`.
    pub fn chain(spec: &ChainSpec, t: f64) -> Self {
        Quadratic2 {
            kxx: 1.0,
            kyy: 1.0,
            kxy: 0.0,
            vxx: spec.omega_sq[0].value(t),
            vyy: spec.omega_sq[1].value(t),
            vxy: spec.eta[0].value(t),
        }
    }

    /// Reads the form off a symmetric generator in `(x, y, px, py)` order;
    /// position-momentum cross terms must vanish.
    pub fn from_generator(m: &Mat4) -> Result<Self> {
        let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for r in 0..2 {
            for c in 2..4 {
                if m[(r, c)].abs() > 1e-10 * scale {
                    return Err(Error::Consistency(format!(
                        "generator mixes positions and momenta ({r}, {c}) = {:e}",
                        m[(r, c)]
                    )));
                }
            }
        }
        Ok(Quadratic2 {
            vxx: m[(0, 0)],
            vyy: m[(1, 1)],
            vxy: m[(0, 1)],
            kxx: m[(2, 2)],
            kyy: m[(3, 3)],
            kxy: m[(2, 3)],
        })
    }
}

/// Multiplies by `exp(−i τ (½a u² + ½b v² + c u v))` over a product grid,
/// with `u` along the slow index and `v` along the fast one.
fn quadratic_phase(psi: &mut [Complex64], u: &[f64], v: &[f64], tau: f64, a: f64, b: f64, c: f64) {
    let nv = v.len();
    let vfac: Vec<Complex64> = v
        .iter()
        .map(|&q| Complex64::from_polar(1.0, -tau * 0.5 * b * q * q))
        .collect();
    for (i, row) in psi.chunks_mut(nv).enumerate() {
        let ui = u[i];
        let ufac = Complex64::from_polar(1.0, -tau * 0.5 * a * ui * ui);
        if c == 0.0 {
            for (p, f) in row.iter_mut().zip(&vfac) {
                *p *= ufac * f;
            }
        } else {
            let w = -tau * c * ui;
            for ((p, f), &q) in row.iter_mut().zip(&vfac).zip(v) {
                *p *= ufac * f * Complex64::from_polar(1.0, w * q);
            }
        }
    }
}

/// Reusable FFT plans and grids for split-step runs on one geometry.
#[derive(Debug, Clone)]
pub struct Workspace2D {
    fx: Fft1,
    fy: Fft1,
    xs: Vec<f64>,
    ys: Vec<f64>,
    kx: Vec<f64>,
    ky: Vec<f64>,
}

impl Workspace2D {
    pub fn new(x: &Axis, y: &Axis) -> Self {
        Workspace2D {
            fx: Fft1::new(x.n),
            fy: Fft1::new(y.n),
            xs: x.coords(),
            ys: y.coords(),
            kx: x.wavenumbers(),
            ky: y.wavenumbers(),
        }
    }

    pub fn forward(&mut self, psi: &mut WaveGrid2D) {
        let fy = &mut self.fy;
        psi.for_each_y_line(|_, l| fy.forward(l));
        let fx = &mut self.fx;
        psi.for_each_x_line(|_, l| fx.forward(l));
    }

    pub fn inverse(&mut self, psi: &mut WaveGrid2D) {
        let fx = &mut self.fx;
        psi.for_each_x_line(|_, l| fx.inverse(l));
        let fy = &mut self.fy;
        psi.for_each_y_line(|_, l| fy.inverse(l));
    }
}

/// Strang splitting for a time-dependent [`Quadratic2`]: potential half
/// steps around a full kinetic step, coefficients at step midpoints.
pub fn propagate_split(
    psi0: &WaveGrid2D,
    ham: impl Fn(f64) -> Quadratic2,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<WaveGrid2D> {
    let steps = step_count(t0, t1, dt)?;
    psi0.check_boundary("split-step (initial)")?;
    let mut psi = psi0.clone();
    if steps == 0 {
        return Ok(psi);
    }
    let h = (t1 - t0) / steps as f64;
    let mut ws = Workspace2D::new(&psi.x, &psi.y);
    let mid = |s: usize| t0 + (s as f64 + 0.5) * h;
    let mut cur = ham(mid(0));
    quadratic_phase(&mut psi.psi, &ws.xs, &ws.ys, 0.5 * h, cur.vxx, cur.vyy, cur.vxy);
    for s in 0..steps {
        ws.forward(&mut psi);
        quadratic_phase(&mut psi.psi, &ws.kx, &ws.ky, h, cur.kxx, cur.kyy, cur.kxy);
        ws.inverse(&mut psi);
        if s + 1 < steps {
            let next = ham(mid(s + 1));
            quadratic_phase(
                &mut psi.psi,
                &ws.xs,
                &ws.ys,
                0.5 * h,
                cur.vxx + next.vxx,
                cur.vyy + next.vyy,
                cur.vxy + next.vxy,
            );
            cur = next;
        } else {
            quadratic_phase(&mut psi.psi, &ws.xs, &ws.ys, 0.5 * h, cur.vxx, cur.vyy, cur.vxy);
        }
    }
    psi.check_boundary("split-step")?;
    Ok(psi)
}

/// Direct propagation of the coupled pair Hamiltonian.
pub fn propagate_coupled(
    psi0: &WaveGrid2D,
    spec: &ChainSpec,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<WaveGrid2D> {
    spec.check()?;
    if spec.n != 2 {
        return Err(Error::InvalidArgument(format!(
            "grid propagation needs n = 2, got {}",
            spec.n
        )));
    }
    spec.check_window(t0, t1)?;
    propagate_split(psi0, |t| Quadratic2::chain(spec, t), t0, t1, dt)
}

fn check_normalized(psi: &WaveGrid2D) -> Result<()> {
    let n = psi.norm_sqr();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::Unnormalized(n));
    }
    Ok(())
}

/// `R_j ψ` for `R = (x, y, px, py)`, momenta by spectral differentiation.
pub fn canonical_images(psi: &WaveGrid2D) -> [Vec<Complex64>; 4] {
    let (xs, ys) = (psi.x.coords(), psi.y.coords());
    let ny = psi.y.n;
    let xpsi = psi
        .psi
        .iter()
        .enumerate()
        .map(|(idx, v)| v * xs[idx / ny])
        .collect();
    let ypsi = psi
        .psi
        .iter()
        .enumerate()
        .map(|(idx, v)| v * ys[idx % ny])
        .collect();
    let mut px = psi.clone();
    let (mut fx, kx) = (Fft1::new(psi.x.n), psi.x.wavenumbers());
    px.for_each_x_line(|_, l| {
        fx.forward(l);
        l.iter_mut().zip(&kx).for_each(|(v, k)| *v *= k);
        fx.inverse(l);
    });
    let mut py = psi.clone();
    let (mut fy, ky) = (Fft1::new(psi.y.n), psi.y.wavenumbers());
    py.for_each_y_line(|_, l| {
        fy.forward(l);
        l.iter_mut().zip(&ky).for_each(|(v, k)| *v *= k);
        fy.inverse(l);
    });
    [xpsi, ypsi, px.psi, py.psi]
}

/// Mean and symmetrised covariance of `(x, y, px, py)` on the grid.
pub fn grid_moments(psi: &WaveGrid2D) -> Result<MomentState> {
    check_normalized(psi)?;
    let w = psi.cell();
    let img = canonical_images(psi);
    let mean: Vec<f64> = img.iter().map(|r| overlap(&psi.psi, r, w).re).collect();
    let cov = DMatrix::from_fn(4, 4, |j, k| {
        overlap(&img[j], &img[k], w).re - mean[j] * mean[k]
    });
    let cov = (&cov + cov.transpose()) * 0.5;
    MomentState::new(mean, cov)
}

/// `⟨Σ a_j R_j⟩`.
pub fn expect_linear(psi: &WaveGrid2D, form: &LinearForm) -> Result<Complex64> {
    if form.n() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: form.n(),
        });
    }
    check_normalized(psi)?;
    let w = psi.cell();
    Ok(canonical_images(psi)
        .iter()
        .zip(&form.a)
        .map(|(r, a)| a * overlap(&psi.psi, r, w))
        .sum())
}

/// `⟨u_x px − u̇_x x + u_y py − u̇_y y⟩`.
pub fn expect_g2(psi: &WaveGrid2D, ux: f64, dux: f64, uy: f64, duy: f64) -> Result<Complex64> {
    expect_linear(psi, &LinearForm::from_real(&[ux, uy], &[dux, duy])?)
}

/// `⟨Ĝ Ĝ†⟩ = ‖Ĝ† ψ‖²` with `Ĝ† = Σ ā_j R_j`.
pub fn expect_gg_dagger_grid(psi: &WaveGrid2D, form: &LinearForm) -> Result<f64> {
    if form.n() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: form.n(),
        });
    }
    check_normalized(psi)?;
    let img = canonical_images(psi);
    let mut acc = vec![Complex64::new(0.0, 0.0); psi.psi.len()];
    for (r, a) in img.iter().zip(&form.a) {
        let c = a.conj();
        acc.iter_mut().zip(r).for_each(|(s, v)| *s += c * v);
    }
    Ok(acc.iter().map(|v| v.norm_sqr()).sum::<f64>() * psi.cell())
}
