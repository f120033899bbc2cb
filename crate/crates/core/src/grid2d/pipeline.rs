//! Propagation of the coupled pair through the chain of frames
//! scaling → π/4 rotation → per-momentum displacement, in which every
//! `px` line evolves as an independent oscillator.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::reduce::{frame_along, reduced_coefficients, solve_alpha_beta, AlphaBeta};
use super::transform::{apply_rotation, apply_scaling_transform, Direction};
use super::{fidelity, propagate_coupled, WaveGrid2D};
use crate::classical::{self, OscState, Trajectory};
use crate::error::{Error, Result};
use crate::grid1d::{propagate_line, step_count, LineHamiltonian, LineWorkspace};
use crate::params::ChainSpec;
use crate::spectral::{shift_line, Fft1};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineOptions {
    /// Split-step size for the line propagation.
    pub dt: f64,
    /// Tolerance for the classical solutions and the α/β system.
    pub tol: f64,
    /// The frame is restarted before `u_x` or `u_y` leaves
    /// `[u_min, 1/u_min]`.
    pub u_min: f64,
    /// Sampling interval used to locate restarts.
    pub scan: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            dt: 1e-3,
            tol: 1e-10,
            u_min: 0.8,
            scan: 1e-2,
        }
    }
}

impl PipelineOptions {
    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.scan > 0.0) {
            return Err(Error::InvalidArgument("dt and scan must be positive".into()));
        }
        if !(self.u_min > 0.0 && self.u_min < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "u_min must lie in (0, 1), got {}",
                self.u_min
            )));
        }
        if !(crate::ode::MIN_TOL..=crate::ode::MAX_TOL).contains(&self.tol) {
            return Err(Error::InvalidArgument(format!("tol {} out of range", self.tol)));
        }
        Ok(())
    }
}

/// `‖ψ‖²` after each stage of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageNorms {
    pub input: f64,
    pub rotated: f64,
    pub reduced: f64,
    pub displaced_back: f64,
    pub unrotated: f64,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentReport {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    pub u_end: [f64; 2],
    /// Largest entry of the derived rotated generator that should vanish.
    pub frame_defect: f64,
    pub max_alpha: f64,
    pub max_beta: f64,
    pub norms: StageNorms,
}

/// Derived coefficients next to the closed-form and printed values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientSample {
    pub t: f64,
    pub inv_mu: f64,
    pub inv_nu: f64,
    pub lam: f64,
    pub inv_mu_closed: f64,
    pub inv_nu_closed: f64,
    pub lam_closed: f64,
    pub lam_printed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub t0: f64,
    pub t1: f64,
    pub options: PipelineOptions,
    pub grid: [usize; 2],
    pub segments: Vec<SegmentReport>,
    pub coefficients: Vec<CoefficientSample>,
    /// Largest |derived − closed form| over the samples, per coefficient.
    pub max_gap: [f64; 3],
    /// Derived λ over printed λ where the latter is not tiny.
    pub lam_ratio: Option<f64>,
    pub final_norm: f64,
}

fn in_band(traj: &Trajectory, t: f64, u_min: f64) -> Result<bool> {
    let s = traj.at(t)?;
    Ok(s
        .u
        .iter()
        .all(|&u| u >= u_min && u <= 1.0 / u_min))
}

/// Last time before the solution leaves the band (or `t1`).
fn segment_end(traj: &Trajectory, ta: f64, t1: f64, opts: &PipelineOptions) -> Result<f64> {
    let mut prev = ta;
    loop {
        let t = (prev + opts.scan).min(t1);
        if !in_band(traj, t, opts.u_min)? {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if in_band(traj, m, opts.u_min)? {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            if lo - ta < opts.dt {
                return Err(Error::ZeroCrossing { t: lo });
            }
            return Ok(lo);
        }
        if t >= t1 {
            return Ok(t1);
        }
        prev = t;
    }
}

/// Midpoint coefficients shared by every line of a segment.
struct MidTable {
    t0: f64,
    h: f64,
    inv_mu: Vec<f64>,
    inv_nu: Vec<f64>,
    lam: Vec<f64>,
}

impl MidTable {
    fn index(&self, t: f64) -> usize {
        let s = ((t - self.t0) / self.h - 0.5).round();
        (s.max(0.0) as usize).min(self.lam.len() - 1)
    }
}

/// Line Hamiltonian in the displaced frame:
/// `½ inv_mu p² + lam y² + c(t)` with
/// `c = ½ inv_mu px² − (px inv_nu / 2) β + ½ inv_mu β² − lam α²`.
struct DisplacedLine<'a> {
    table: &'a MidTable,
    ab: &'a AlphaBeta,
}

impl LineHamiltonian for DisplacedLine<'_> {
    fn inv_mass(&self, t: f64) -> f64 {
        self.table.inv_mu[self.table.index(t)]
    }
    fn stiffness(&self, t: f64) -> f64 {
        self.table.lam[self.table.index(t)]
    }
    fn offset(&self, t: f64) -> f64 {
        let k = self.table.index(t);
        let (m, nu, lam) = (self.table.inv_mu[k], self.table.inv_nu[k], self.table.lam[k]);
        let (a, b) = self.ab.at(t).unwrap_or((f64::NAN, f64::NAN));
        let px = self.ab.px;
        0.5 * m * px * px - 0.5 * px * nu * b + 0.5 * m * b * b - lam * a * a
    }
}

fn sample(spec: &ChainSpec, traj: &Trajectory, t: f64) -> Result<CoefficientSample> {
    let f = frame_along(spec, traj, t)?;
    let s = traj.at(t)?;
    let closed = reduced_coefficients(s.u[0], s.u[1], spec.eta[0].eval(t)?)?;
    Ok(CoefficientSample {
        t,
        inv_mu: f.coefficients.inv_mu,
        inv_nu: f.coefficients.inv_nu,
        lam: f.coefficients.lam,
        inv_mu_closed: closed.inv_mu,
        inv_nu_closed: closed.inv_nu,
        lam_closed: closed.lam,
        lam_printed: closed.lam_printed,
    })
}

fn run_segment(
    spec: &ChainSpec,
    psi: &WaveGrid2D,
    traj: &Trajectory,
    ta: f64,
    tb: f64,
    opts: &PipelineOptions,
    samples: &mut Vec<CoefficientSample>,
) -> Result<(WaveGrid2D, SegmentReport)> {
    let input = psi.norm_sqr();
    let mut cur = apply_rotation(psi, FRAC_PI_4)?;
    let rotated = cur.norm_sqr();

    let steps = step_count(ta, tb, opts.dt)?.max(1);
    let h = (tb - ta) / steps as f64;
    let mut table = MidTable {
        t0: ta,
        h,
        inv_mu: Vec::with_capacity(steps),
        inv_nu: Vec::with_capacity(steps),
        lam: Vec::with_capacity(steps),
    };
    let mut frame_defect: f64 = 0.0;
    for s in 0..steps {
        let f = frame_along(spec, traj, ta + (s as f64 + 0.5) * h)?;
        frame_defect = frame_defect.max(f.defect);
        table.inv_mu.push(f.coefficients.inv_mu);
        table.inv_nu.push(f.coefficients.inv_nu);
        table.lam.push(f.coefficients.lam);
    }
    for t in [ta, 0.5 * (ta + tb), tb] {
        samples.push(sample(spec, traj, t)?);
    }

    let coef = |t: f64| match frame_along(spec, traj, t) {
        Ok(f) => (f.coefficients.inv_mu, f.coefficients.inv_nu, f.coefficients.lam),
        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
    };

    let mut fx = Fft1::new(cur.x.n);
    cur.for_each_x_line(|_, l| fx.forward(l));

    let kx = cur.x.wavenumbers();
    let ys = cur.y.coords();
    let y_axis = cur.y;
    let ny = y_axis.n;
    let extremes = cur
        .psi
        .par_chunks_mut(ny)
        .enumerate()
        .map_init(
            || LineWorkspace::new(&y_axis),
            |ws, (i, line)| -> Result<(f64, f64)> {
                let ab = solve_alpha_beta(&coef, kx[i], 0.0, 0.0, ta, tb, opts.tol)?;
                let ham = DisplacedLine {
                    table: &table,
                    ab: &ab,
                };
                propagate_line(ws, line, &ham, ta, tb, steps);
                let (alpha, beta) = ab.at(tb)?;
                let k = ws.wavenumbers().to_vec();
                shift_line(ws.fft(), &k, line, alpha);
                for (v, &y) in line.iter_mut().zip(&ys) {
                    *v *= Complex64::from_polar(1.0, -beta * y);
                }
                Ok((alpha.abs(), beta.abs()))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let reduced = cur.norm_sqr() / cur.x.n as f64;
    cur.for_each_x_line(|_, l| fx.inverse(l));
    let displaced_back = cur.norm_sqr();
    cur.check_boundary("pipeline (line propagation)")?;

    cur = apply_rotation(&cur, -FRAC_PI_4)?;
    let unrotated = cur.norm_sqr();
    let end = traj.at(tb)?;
    cur = apply_scaling_transform(
        &cur,
        end.u[0],
        end.du[0],
        end.u[1],
        end.du[1],
        Direction::Inverse,
    )?;
    let report = SegmentReport {
        t_start: ta,
        t_end: tb,
        steps,
        u_end: [end.u[0], end.u[1]],
        frame_defect,
        max_alpha: extremes.iter().fold(0.0, |m, e| m.max(e.0)),
        max_beta: extremes.iter().fold(0.0, |m, e| m.max(e.1)),
        norms: StageNorms {
            input,
            rotated,
            reduced,
            displaced_back,
            unrotated,
            output: cur.norm_sqr(),
        },
    };
    Ok((cur, report))
}

/// Solves the coupled pair from `t0` to `t1` through the frame chain.
///
/// The window is split wherever `u_x` or `u_y` would leave
/// `[u_min, 1/u_min]`; each piece restarts the frame with `u = 1, u̇ = 0`,
/// so the scaling and displacement frames start as the identity.
pub fn pipeline_solve(
    spec: &ChainSpec,
    psi0: &WaveGrid2D,
    t0: f64,
    t1: f64,
    opts: &PipelineOptions,
) -> Result<(WaveGrid2D, PipelineReport)> {
    spec.check()?;
    opts.check()?;
    if spec.n != 2 {
        return Err(Error::InvalidArgument(format!(
            "pipeline needs n = 2, got {}",
            spec.n
        )));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!(
            "window [{t0}, {t1}] must have t1 > t0"
        )));
    }
    spec.check_window(t0, t1)?;
    psi0.check_boundary("pipeline (initial)")?;

    let start = OscState::new(vec![1.0, 1.0], vec![0.0, 0.0])?;
    let mut psi = psi0.clone();
    let mut segments = Vec::new();
    let mut samples = Vec::new();
    let mut ta = t0;
    while t1 - ta > 1e-12 * t1.abs().max(1.0) {
        let traj = classical::integrate(spec, &start, ta, t1, opts.tol)?;
        let tb = segment_end(&traj, ta, t1, opts)?;
        let (next, rep) = run_segment(spec, &psi, &traj, ta, tb, opts, &mut samples)?;
        psi = next;
        segments.push(rep);
        ta = tb;
    }

    let mut gap = [0.0f64; 3];
    let mut ratio = None;
    for s in &samples {
        gap[0] = gap[0].max((s.inv_mu - s.inv_mu_closed).abs());
        gap[1] = gap[1].max((s.inv_nu - s.inv_nu_closed).abs());
        gap[2] = gap[2].max((s.lam - s.lam_closed).abs());
        if ratio.is_none() && s.lam_printed.abs() > 1e-8 {
            ratio = Some(s.lam / s.lam_printed);
        }
    }
    let report = PipelineReport {
        t0,
        t1,
        options: *opts,
        grid: [psi.x.n, psi.y.n],
        segments,
        coefficients: samples,
        max_gap: gap,
        lam_ratio: ratio,
        final_norm: psi.norm_sqr(),
    };
    Ok((psi, report))
}

/// Pipeline result next to the direct split-step oracle.
#[derive(Debug, Clone)]
pub struct PipelineComparison {
    pub pipeline: WaveGrid2D,
    pub oracle: WaveGrid2D,
    pub fidelity: f64,
    pub report: PipelineReport,
}

/// Runs [`pipeline_solve`] and the direct oracle at the same `dt`
/// concurrently and compares them.
pub fn pipeline_vs_oracle(
    spec: &ChainSpec,
    psi0: &WaveGrid2D,
    t0: f64,
    t1: f64,
    opts: &PipelineOptions,
) -> Result<PipelineComparison> {
    let (pipe, oracle) = rayon::join(
        || pipeline_solve(spec, psi0, t0, t1, opts),
        || propagate_coupled(psi0, spec, t0, t1, opts.dt),
    );
    let (pipeline, report) = pipe?;
    let oracle = oracle?;
    let fidelity = fidelity(&pipeline, &oracle)?;
    Ok(PipelineComparison {
        pipeline,
        oracle,
        fidelity,
        report,
    })
}
