//! Split-step propagation of one-dimensional wavefunctions under
//! `½ m(t) p² + λ(t) y² + b(t) p + c(t)`, where `m = 1/μ` is the inverse mass.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{self, Axis, Fft1};

/// Norm deviation tolerated by the moment routines.
pub const NORM_TOL: f64 = 1e-6;

/// Samples of a wavefunction on a uniform periodic axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveGrid1D {
    pub axis: Axis,
    pub psi: Vec<Complex64>,
}

impl WaveGrid1D {
    pub fn new(axis: Axis, psi: Vec<Complex64>) -> Result<Self> {
        if psi.len() != axis.n {
            return Err(Error::Dimension {
                expected: axis.n,
                got: psi.len(),
            });
        }
        Ok(WaveGrid1D { axis, psi })
    }

    pub fn from_fn(axis: Axis, f: impl Fn(f64) -> Complex64) -> Self {
        let psi = axis.coords().into_iter().map(f).collect();
        WaveGrid1D { axis, psi }
    }

    /// Normalised Gaussian with centre `y0`, position spread `sigma` and
    /// mean momentum `k0`.
    pub fn gaussian(axis: Axis, y0: f64, sigma: f64, k0: f64) -> Self {
        let mut g = Self::from_fn(axis, |y| {
            let d = y - y0;
            Complex64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), k0 * y)
        });
        g.normalize();
        g
    }

    pub fn n(&self) -> usize {
        self.axis.n
    }

    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.axis.step
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm_sqr().sqrt();
        for v in &mut self.psi {
            *v *= s;
        }
    }

    /// Fails when the outer layers carry more than the allowed fraction of
    /// the peak amplitude.
    pub fn check_boundary(&self, stage: &str) -> Result<()> {
        let (edge, peak) = spectral::edge_and_peak_1d(&self.axis, &self.psi);
        spectral::guard_verdict(stage, edge, peak)
    }
}

/// Time-dependent coefficients of a line Hamiltonian
/// `½ inv_mass p² + stiffness y² + drift p + offset`.
pub trait LineHamiltonian {
    fn inv_mass(&self, t: f64) -> f64;
    fn stiffness(&self, t: f64) -> f64;
    fn drift(&self, _t: f64) -> f64 {
        0.0
    }
    fn offset(&self, _t: f64) -> f64 {
        0.0
    }
}

/// A [`LineHamiltonian`] assembled from closures.
pub struct FnLine<M, L, B, C> {
    pub inv_mass: M,
    pub stiffness: L,
    pub drift: B,
    pub offset: C,
}

fn zero(_: f64) -> f64 {
    0.0
}

impl<M, L> FnLine<M, L, fn(f64) -> f64, fn(f64) -> f64>
where
    M: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
{
    pub fn new(inv_mass: M, stiffness: L) -> Self {
        FnLine {
            inv_mass,
            stiffness,
            drift: zero,
            offset: zero,
        }
    }
}

impl<M, L, B, C> LineHamiltonian for FnLine<M, L, B, C>
where
    M: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
    C: Fn(f64) -> f64,
{
    fn inv_mass(&self, t: f64) -> f64 {
        (self.inv_mass)(t)
    }
    fn stiffness(&self, t: f64) -> f64 {
        (self.stiffness)(t)
    }
    fn drift(&self, t: f64) -> f64 {
        (self.drift)(t)
    }
    fn offset(&self, t: f64) -> f64 {
        (self.offset)(t)
    }
}

/// Number of steps of size at most `dt` covering `[t0, t1]`.
pub fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t1 >= t0) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t1 >= t0 (dt {dt}, window [{t0}, {t1}])"
        )));
    }
    Ok((((t1 - t0) / dt) * (1.0 - 1e-12)).ceil().max(0.0) as usize)
}

/// Reusable buffers for repeated line propagation.
#[derive(Debug, Clone)]
pub struct LineWorkspace {
    fft: Fft1,
    k: Vec<f64>,
    y2: Vec<f64>,
}

impl LineWorkspace {
    pub fn new(axis: &Axis) -> Self {
        LineWorkspace {
            fft: Fft1::new(axis.n),
            k: axis.wavenumbers(),
            y2: axis.coords().iter().map(|y| y * y).collect(),
        }
    }

    pub fn fft(&mut self) -> &mut Fft1 {
        &mut self.fft
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }
}

fn potential_phase(psi: &mut [Complex64], y2: &[f64], angle: f64) {
    for (v, &q) in psi.iter_mut().zip(y2) {
        *v *= Complex64::from_polar(1.0, -angle * q);
    }
}

/// Strang splitting on a line, no guard checks. Coefficients are sampled
/// at step midpoints; adjacent potential half-steps are fused.
pub fn propagate_line<H: LineHamiltonian + ?Sized>(
    ws: &mut LineWorkspace,
    psi: &mut [Complex64],
    ham: &H,
    t0: f64,
    t1: f64,
    steps: usize,
) {
    if steps == 0 {
        return;
    }
    let h = (t1 - t0) / steps as f64;
    let mid = |s: usize| t0 + (s as f64 + 0.5) * h;
    let mut lam = ham.stiffness(mid(0));
    potential_phase(psi, &ws.y2, 0.5 * h * lam);
    for s in 0..steps {
        let tm = mid(s);
        let (m, b, c) = (ham.inv_mass(tm), ham.drift(tm), ham.offset(tm));
        ws.fft.forward(psi);
        for (v, &k) in psi.iter_mut().zip(&ws.k) {
            *v *= Complex64::from_polar(1.0, -h * (0.5 * m * k * k + b * k + c));
        }
        ws.fft.inverse(psi);
        if s + 1 < steps {
            let next = ham.stiffness(mid(s + 1));
            potential_phase(psi, &ws.y2, 0.5 * h * (lam + next));
            lam = next;
        } else {
            potential_phase(psi, &ws.y2, 0.5 * h * lam);
        }
    }
}

/// Propagates `psi0` from `t0` to `t1` with steps of at most `dt`.
///
/// The step must resolve the fastest rate in the problem
/// (`dt · max(|inv_mass|, |stiffness|) < 0.1`, checked on the midpoints)
/// and the boundary guard is checked before and after.
pub fn propagate_reduced<H: LineHamiltonian + ?Sized>(
    psi0: &WaveGrid1D,
    ham: &H,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<WaveGrid1D> {
    let steps = step_count(t0, t1, dt)?;
    let h = if steps > 0 {
        (t1 - t0) / steps as f64
    } else {
        0.0
    };
    for s in 0..steps {
        let tm = t0 + (s as f64 + 0.5) * h;
        let rate = ham.inv_mass(tm).abs().max(ham.stiffness(tm).abs());
        if !(h * rate < 0.1) {
            return Err(Error::InvalidArgument(format!(
                "dt = {h} does not resolve rate {rate} at t = {tm}"
            )));
        }
    }
    psi0.check_boundary("propagate_reduced (initial)")?;
    let mut out = psi0.clone();
    let mut ws = LineWorkspace::new(&psi0.axis);
    propagate_line(&mut ws, &mut out.psi, ham, t0, t1, steps);
    out.check_boundary("propagate_reduced")?;
    Ok(out)
}

/// Moments available from [`expectation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Y,
    P,
    Y2,
    P2,
    /// `⟨yp + py⟩`.
    YpSym,
}

fn check_normalized(norm: f64) -> Result<()> {
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::Unnormalized(norm));
    }
    Ok(())
}

pub fn expectation(psi: &WaveGrid1D, which: Observable) -> Result<f64> {
    check_normalized(psi.norm_sqr())?;
    let ys = psi.axis.coords();
    let dy = psi.axis.step;
    let pos = |f: &dyn Fn(f64) -> f64| -> f64 {
        psi.psi
            .iter()
            .zip(&ys)
            .map(|(v, &y)| v.norm_sqr() * f(y))
            .sum::<f64>()
            * dy
    };
    match which {
        Observable::Y => Ok(pos(&|y| y)),
        Observable::Y2 => Ok(pos(&|y| y * y)),
        Observable::P | Observable::P2 => {
            let mut buf = psi.psi.clone();
            Fft1::new(psi.n()).forward(&mut buf);
            let k = psi.axis.wavenumbers();
            let total: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
            let pw = if which == Observable::P { 1 } else { 2 };
            Ok(buf
                .iter()
                .zip(&k)
                .map(|(v, &kj)| v.norm_sqr() * kj.powi(pw))
                .sum::<f64>()
                / total)
        }
        Observable::YpSym => {
            let p_psi = apply_momentum(psi);
            let s: Complex64 = psi
                .psi
                .iter()
                .zip(&ys)
                .zip(&p_psi)
                .map(|((v, &y), pv)| (v * y).conj() * pv)
                .sum();
            Ok(2.0 * s.re * dy)
        }
    }
}

/// `p ψ` by spectral differentiation.
pub fn apply_momentum(psi: &WaveGrid1D) -> Vec<Complex64> {
    let mut fft = Fft1::new(psi.n());
    let mut buf = psi.psi.clone();
    fft.forward(&mut buf);
    for (v, k) in buf.iter_mut().zip(psi.axis.wavenumbers()) {
        *v *= k;
    }
    fft.inverse(&mut buf);
    buf
}

/// `|⟨a|b⟩|`.
pub fn fidelity(a: &WaveGrid1D, b: &WaveGrid1D) -> Result<f64> {
    a.axis.check_same(&b.axis)?;
    Ok(overlap(&a.psi, &b.psi, a.axis.step).norm())
}

/// Distance between two normalised states after removing the relative
/// global phase: `√(2 − 2|⟨a|b⟩|)`.
pub fn phase_distance(a: &WaveGrid1D, b: &WaveGrid1D) -> Result<f64> {
    Ok((2.0 - 2.0 * fidelity(a, b)?).max(0.0).sqrt())
}

pub(crate) fn overlap(a: &[Complex64], b: &[Complex64], weight: f64) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * weight
}
