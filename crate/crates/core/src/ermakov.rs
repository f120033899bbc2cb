//! Ermakov amplitude and phase of a single oscillator, and the Lewis invariant.

use crate::classical::Trajectory;
use crate::error::{Error, Result};
use crate::params::TimeFunction;
use crate::quad;

/// Default spacing of the sampled amplitude.
pub const DEFAULT_SPACING: f64 = 1e-3;

/// ρ(t) and θ(t) built from a pair of independent real solutions.
///
/// The pair is normalised to unit Wronskian by scaling both members by
/// `1/√|W|` (and flipping `v` when `W < 0`), so `u − i v = ρ e^{−iθ}` with
/// `θ̇ = 1/ρ²`.
#[derive(Debug, Clone)]
pub struct AmplitudePhase {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_dot: Vec<f64>,
    pub theta: Vec<f64>,
    /// Wronskian `u v̇ − u̇ v` of the pair as supplied.
    pub wronskian: f64,
    u: Trajectory,
    v: Trajectory,
    u_scale: f64,
    v_scale: f64,
}

impl AmplitudePhase {
    pub fn spacing(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Normalised pair `(u, u̇, v, v̇)` at `t`.
    pub fn pair_at(&self, t: f64) -> Result<[f64; 4]> {
        let (u, du) = self.u.component(0, t)?;
        let (v, dv) = self.v.component(0, t)?;
        Ok([
            self.u_scale * u,
            self.u_scale * du,
            self.v_scale * v,
            self.v_scale * dv,
        ])
    }

    /// `(ρ, ρ̇)` at any `t` in the window.
    pub fn rho_at(&self, t: f64) -> Result<(f64, f64)> {
        let [u, du, v, dv] = self.pair_at(t)?;
        let rho = u.hypot(v);
        Ok((rho, (u * du + v * dv) / rho))
    }

    /// ρ̈ + Ω²ρ − 1/ρ³ at `t`, with ρ̈ taken from the ODE rather than by
    /// differencing.
    pub fn analytic_residual_at(&self, omega_sq: &TimeFunction, t: f64) -> Result<f64> {
        let [u, du, v, dv] = self.pair_at(t)?;
        let w2 = omega_sq.eval(t)?;
        let rho2 = u * u + v * v;
        let rho = rho2.sqrt();
        let rho_dot = (u * du + v * dv) / rho;
        let rho_ddot = (-w2 * rho2 + du * du + dv * dv - rho_dot * rho_dot) / rho;
        Ok(rho_ddot + w2 * rho - 1.0 / (rho2 * rho))
    }

    /// Fourth-order centred-difference residual at each interior sample;
    /// the first and last two samples are `None`.
    pub fn residual_series(&self, omega_sq: &TimeFunction) -> Result<Vec<Option<f64>>> {
        let m = self.rho.len();
        if m < 5 {
            return Err(Error::InvalidArgument(format!(
                "need at least 5 samples for the residual, have {m}"
            )));
        }
        let h = self.spacing();
        let r = &self.rho;
        let mut out = vec![None; m];
        for i in 2..m - 2 {
            let rdd = (-r[i + 2] + 16.0 * r[i + 1] - 30.0 * r[i] + 16.0 * r[i - 1] - r[i - 2])
                / (12.0 * h * h);
            let w2 = omega_sq.eval(self.times[i])?;
            out[i] = Some(rdd + w2 * r[i] - 1.0 / (r[i] * r[i] * r[i]));
        }
        Ok(out)
    }
}

/// Builds ρ, ρ̇ and θ on a uniform grid of roughly `spacing` over the
/// common window of two solutions of the same single oscillator.
pub fn rho_from_pair(u: &Trajectory, v: &Trajectory, spacing: f64) -> Result<AmplitudePhase> {
    if u.spec() != v.spec() {
        return Err(Error::InvalidArgument(
            "pair must solve the same oscillator".into(),
        ));
    }
    if u.n() != 1 {
        return Err(Error::InvalidArgument(format!(
            "amplitude construction needs a single oscillator, got n = {}",
            u.n()
        )));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument("spacing must be positive".into()));
    }
    let t0 = u.t_start().max(v.t_start());
    let t1 = u.t_end().min(v.t_end());
    let (a, da) = u.component(0, t0)?;
    let (b, db) = v.component(0, t0)?;
    let w = a * db - da * b;
    if w.abs() < 1e-12 {
        return Err(Error::DegeneratePair(w));
    }
    let u_scale = 1.0 / w.abs().sqrt();
    let v_scale = u_scale * w.signum();

    let m = (((t1 - t0) / spacing).round() as usize).max(1) + 1;
    let h = (t1 - t0) / (m - 1) as f64;
    let times: Vec<f64> = (0..m)
        .map(|k| if k + 1 == m { t1 } else { t0 + k as f64 * h })
        .collect();

    let mut ap = AmplitudePhase {
        times,
        rho: Vec::with_capacity(m),
        rho_dot: Vec::with_capacity(m),
        theta: Vec::new(),
        wronskian: w,
        u: u.clone(),
        v: v.clone(),
        u_scale,
        v_scale,
    };
    for &t in &ap.times {
        let (r, rd) = ap.rho_at(t)?;
        ap.rho.push(r);
        ap.rho_dot.push(rd);
    }
    let tol = u.tol();
    ap.theta = quad::cumulative(
        |t| {
            let (r, _) = ap.rho_at(t).expect("inside window");
            1.0 / (r * r)
        },
        &ap.times,
        tol * h,
    );
    Ok(ap)
}

/// Largest |ρ̈ + Ω²ρ − 1/ρ³| over interior samples (finite differences).
pub fn ermakov_residual(ap: &AmplitudePhase, omega_sq: &TimeFunction) -> Result<f64> {
    Ok(ap
        .residual_series(omega_sq)?
        .into_iter()
        .flatten()
        .fold(0.0, |m, r| m.max(r.abs())))
}

/// `½[(x/ρ)² + (ρ p − ρ̇ x)²]` at time `t`.
pub fn lewis_value(ap: &AmplitudePhase, x: f64, p: f64, t: f64) -> Result<f64> {
    let (rho, rho_dot) = ap.rho_at(t)?;
    let a = x / rho;
    let b = rho * p - rho_dot * x;
    Ok(0.5 * (a * a + b * b))
}
