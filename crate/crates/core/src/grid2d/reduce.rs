//! Quadratic generators in `(x, y, px, py)` order and how they change under
//! the scaling, rotation and displacement frames.
//!
//! A frame `φ = U ψ` whose expectations map as `⟨R⟩_φ = B ⟨R⟩_ψ` turns the
//! generator `M` of `H = ½ Rᵀ M R` into
//! `M' = −J (Ḃ B⁻¹ + B J M B⁻¹)` (up to a c-number).

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Matrix4;

use crate::classical::{self, OscState, Trajectory};
use crate::error::{Error, Result};
use crate::ode::{self, DenseSolution, OdeOptions};
use crate::params::ChainSpec;

pub type Mat4 = Matrix4<f64>;

fn j4() -> Mat4 {
    let mut j = Mat4::zeros();
    j[(0, 2)] = 1.0;
    j[(1, 3)] = 1.0;
    j[(2, 0)] = -1.0;
    j[(3, 1)] = -1.0;
    j
}

/// Generator of `½(px² + py²) + ½Ω_x² x² + ½Ω_y² y² + η x y`.
pub fn chain_generator(omx2: f64, omy2: f64, eta: f64) -> Mat4 {
    let mut m = Mat4::zeros();
    m[(0, 0)] = omx2;
    m[(1, 1)] = omy2;
    m[(0, 1)] = eta;
    m[(1, 0)] = eta;
    m[(2, 2)] = 1.0;
    m[(3, 3)] = 1.0;
    m
}

/// Expectation map of the scaling frame: `x → x/u`, `p → u p − u̇ x`.
pub fn scaling_map(ux: f64, dux: f64, uy: f64, duy: f64) -> Mat4 {
    let mut b = Mat4::zeros();
    b[(0, 0)] = 1.0 / ux;
    b[(1, 1)] = 1.0 / uy;
    b[(2, 2)] = ux;
    b[(3, 3)] = uy;
    b[(2, 0)] = -dux;
    b[(3, 1)] = -duy;
    b
}

/// Time derivative of [`scaling_map`].
pub fn scaling_map_rate(ux: f64, dux: f64, ddux: f64, uy: f64, duy: f64, dduy: f64) -> Mat4 {
    let mut b = Mat4::zeros();
    b[(0, 0)] = -dux / (ux * ux);
    b[(1, 1)] = -duy / (uy * uy);
    b[(2, 2)] = dux;
    b[(3, 3)] = duy;
    b[(2, 0)] = -ddux;
    b[(3, 1)] = -dduy;
    b
}

/// Expectation map of the rotation `ψ(x, y) ↦ ψ(x c − y s, x s + y c)`.
pub fn rotation_map(theta: f64) -> Mat4 {
    let (s, c) = theta.sin_cos();
    let mut b = Mat4::zeros();
    for o in [0, 2] {
        b[(o, o)] = c;
        b[(o, o + 1)] = s;
        b[(o + 1, o)] = -s;
        b[(o + 1, o + 1)] = c;
    }
    b
}

pub fn transform_generator(m: &Mat4, b: &Mat4, bdot: &Mat4) -> Result<Mat4> {
    let binv = b
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular frame map".into()))?;
    let j = j4();
    let inner = bdot * binv + b * j * m * binv;
    let out = -j * inner;
    Ok((out + out.transpose()) * 0.5)
}

/// Line coefficients after scaling and a π/4 rotation: the Hamiltonian is
/// `½ inv_mu (px² + py²) + ½ inv_nu px py + lam y²`, independent of `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedCoefficients {
    pub inv_mu: f64,
    pub inv_nu: f64,
    pub lam: f64,
    /// `η u_x u_y / √2`, the value printed in the usual presentation of
    /// this reduction, kept for comparison.
    pub lam_printed: f64,
}

/// Closed-form coefficients from `u_x`, `u_y` and `η`.
pub fn reduced_coefficients(ux: f64, uy: f64, eta: f64) -> Result<ReducedCoefficients> {
    if !(ux.abs() > 1e-12 && uy.abs() > 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "reduced coefficients need nonzero u (u_x = {ux}, u_y = {uy})"
        )));
    }
    let (ix2, iy2) = (1.0 / (ux * ux), 1.0 / (uy * uy));
    Ok(ReducedCoefficients {
        inv_mu: 0.5 * (ix2 + iy2),
        inv_nu: iy2 - ix2,
        lam: -eta * ux * uy,
        lam_printed: eta * ux * uy * FRAC_1_SQRT_2,
    })
}

/// Generator of the rotated scaling frame derived numerically, with the
/// size of every entry that the reduction requires to vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedFrame {
    pub generator: Mat4,
    pub coefficients: ReducedCoefficients,
    /// Largest entry coupling to `x`, mixing positions with momenta, or
    /// splitting the two kinetic coefficients.
    pub defect: f64,
}

/// Frame generators at time `t` from the coupled solution `sol` with
/// `(u_x, u_y)` as its two components.
pub fn rotated_frame(spec: &ChainSpec, sol: &OscState, t: f64) -> Result<RotatedFrame> {
    if sol.n() != 2 || spec.n != 2 {
        return Err(Error::InvalidArgument("rotated frame needs n = 2".into()));
    }
    let (ux, uy, dux, duy) = (sol.u[0], sol.u[1], sol.du[0], sol.du[1]);
    let acc = classical::rhs(spec, t, sol)?.du;
    let m0 = chain_generator(
        spec.omega_sq[0].eval(t)?,
        spec.omega_sq[1].eval(t)?,
        spec.eta[0].eval(t)?,
    );
    let m1 = transform_generator(
        &m0,
        &scaling_map(ux, dux, uy, duy),
        &scaling_map_rate(ux, dux, acc[0], uy, duy, acc[1]),
    )?;
    let m2 = transform_generator(&m1, &rotation_map(std::f64::consts::FRAC_PI_4), &Mat4::zeros())?;
    let printed = reduced_coefficients(ux, uy, spec.eta[0].eval(t)?)?;
    let mut defect: f64 = (m2[(2, 2)] - m2[(3, 3)]).abs();
    for k in 0..4 {
        defect = defect.max(m2[(0, k)].abs());
    }
    for (r, c) in [(1, 2), (1, 3)] {
        defect = defect.max(m2[(r, c)].abs());
    }
    Ok(RotatedFrame {
        generator: m2,
        coefficients: ReducedCoefficients {
            inv_mu: m2[(3, 3)],
            inv_nu: 2.0 * m2[(2, 3)],
            lam: 0.5 * m2[(1, 1)],
            lam_printed: printed.lam_printed,
        },
        defect,
    })
}

/// Rotated-frame coefficients along a trajectory.
pub(crate) fn frame_along(spec: &ChainSpec, traj: &Trajectory, t: f64) -> Result<RotatedFrame> {
    rotated_frame(spec, &traj.at(t)?, t)
}

/// Displacement amplitudes `(α, β)` for one momentum value.
#[derive(Debug, Clone)]
pub struct AlphaBeta {
    pub px: f64,
    sol: DenseSolution,
}

impl AlphaBeta {
    pub fn at(&self, t: f64) -> Result<(f64, f64)> {
        let z = self.sol.eval(t)?;
        Ok((z[0], z[1]))
    }

    pub fn dense(&self) -> &DenseSolution {
        &self.sol
    }
}

/// Solves `α̇ = px inv_nu / 2 − β inv_mu`, `β̇ = 2 lam α` with `coef(t)`
/// returning `(inv_mu, inv_nu, lam)`.
#[allow(clippy::too_many_arguments)]
pub fn solve_alpha_beta(
    coef: &dyn Fn(f64) -> (f64, f64, f64),
    px: f64,
    alpha0: f64,
    beta0: f64,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<AlphaBeta> {
    let sys = (2usize, |t: f64, z: &[f64], dz: &mut [f64]| {
        let (inv_mu, inv_nu, lam) = coef(t);
        dz[0] = 0.5 * px * inv_nu - z[1] * inv_mu;
        dz[1] = 2.0 * lam * z[0];
    });
    let sol = ode::solve(&sys, t0, &[alpha0, beta0], t1, OdeOptions::with_tol(tol))?;
    Ok(AlphaBeta { px, sol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::TimeFunction;
    use nalgebra::Matrix3;

    #[test]
    fn printed_coefficient_example() {
        let c = reduced_coefficients(1.0, 2.0, 1.0).unwrap();
        assert!((c.inv_mu - 0.625).abs() < 1e-15);
        assert!((c.inv_nu + 0.75).abs() < 1e-15);
        assert!((c.lam_printed - std::f64::consts::SQRT_2).abs() < 1e-15);
        let s = reduced_coefficients(1.7, 1.7, 0.3).unwrap();
        assert_eq!(s.inv_nu, 0.0);
        assert!((s.inv_mu - 1.0 / 2.89).abs() < 1e-15);
        assert_eq!(reduced_coefficients(1.0, 2.0, 0.0).unwrap().lam, 0.0);
        assert!(reduced_coefficients(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn scaling_frame_of_single_oscillator() {
        // H' = ½[p²/u² + u(ü + Ω² u) x²] on each axis.
        let (ux, dux, uy, duy) = (1.3, -0.4, 0.8, 0.25);
        let (ddx, ddy) = (-0.9, 0.3);
        let m0 = chain_generator(2.0, 0.5, 0.0);
        let m1 = transform_generator(
            &m0,
            &scaling_map(ux, dux, uy, duy),
            &scaling_map_rate(ux, dux, ddx, uy, duy, ddy),
        )
        .unwrap();
        assert!((m1[(0, 0)] - ux * (ddx + 2.0 * ux)).abs() < 1e-14);
        assert!((m1[(1, 1)] - uy * (ddy + 0.5 * uy)).abs() < 1e-14);
        assert!((m1[(2, 2)] - 1.0 / (ux * ux)).abs() < 1e-14);
        assert!((m1[(3, 3)] - 1.0 / (uy * uy)).abs() < 1e-14);
        assert!(m1[(0, 2)].abs() < 1e-14 && m1[(1, 3)].abs() < 1e-14);
    }

    #[test]
    fn derived_frame_matches_closed_form() {
        let spec = ChainSpec::pair(
            TimeFunction::sine(1.0, 0.2, 1.0),
            TimeFunction::harmonic(1.5, 0.1, 2.0, 0.0),
            TimeFunction::sine(0.05, 0.05, 0.7),
        );
        let init = OscState::new(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let traj = classical::integrate(&spec, &init, 0.0, 1.0, 1e-12).unwrap();
        for t in [0.0, 0.3, 0.9] {
            let f = frame_along(&spec, &traj, t).unwrap();
            let s = traj.at(t).unwrap();
            let closed = reduced_coefficients(s.u[0], s.u[1], spec.eta[0].value(t)).unwrap();
            assert!(f.defect < 1e-12, "defect {}", f.defect);
            assert!((f.coefficients.inv_mu - closed.inv_mu).abs() < 1e-13);
            assert!((f.coefficients.inv_nu - closed.inv_nu).abs() < 1e-13);
            assert!((f.coefficients.lam - closed.lam).abs() < 1e-13);
        }
    }

    #[test]
    fn rotation_map_is_symplectic() {
        let b = rotation_map(0.37);
        let j = j4();
        assert!((b * j * b.transpose() - j).abs().max() < 1e-15);
        let s = scaling_map(1.4, 0.3, 0.6, -2.0);
        assert!((s * j * s.transpose() - j).abs().max() < 1e-15);
    }

    #[test]
    fn alpha_beta_examples() {
        let inv_nu = |t: f64| 0.3 + 0.1 * t;
        let free = solve_alpha_beta(&|t| (0.8, inv_nu(t), 0.0), 1.5, 0.2, 0.0, 0.0, 2.0, 1e-12).unwrap();
        let (a, b) = free.at(2.0).unwrap();
        assert_eq!(b, 0.0);
        // α = α0 + ∫ px inv_nu / 2 = 0.2 + 0.75 (0.3·2 + 0.05·4)
        assert!((a - (0.2 + 0.75 * 0.8)).abs() < 1e-12);

        let zero = solve_alpha_beta(&|_| (0.7, 0.4, -0.3), 0.0, 0.0, 0.0, 0.0, 3.0, 1e-12).unwrap();
        assert_eq!(zero.at(3.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn alpha_beta_constant_coefficients_match_exponential() {
        let (inv_mu, inv_nu, lam, px) = (0.9, -0.4, -0.15, 2.0);
        let ab = solve_alpha_beta(&|_| (inv_mu, inv_nu, lam), px, 0.3, -0.1, 0.0, 4.0, 1e-12).unwrap();
        // Augmented linear system z' = A z with z = (α, β, 1).
        let a = Matrix3::new(0.0, -inv_mu, 0.5 * px * inv_nu, 2.0 * lam, 0.0, 0.0, 0.0, 0.0, 0.0);
        for t in [0.5, 2.0, 4.0] {
            let z = (a * t).exp() * nalgebra::Vector3::new(0.3, -0.1, 1.0);
            let (al, be) = ab.at(t).unwrap();
            assert!((al - z[0]).abs() < 1e-10 && (be - z[1]).abs() < 1e-10);
        }
    }
}
