//! Gaussian states of the chain Hamiltonian at the level of first and second
//! moments, and expectation values of linear invariants.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::classical::{self, OscState, Trajectory};
use crate::ermakov::AmplitudePhase;
use crate::error::{Error, Result};
use crate::ode;
use crate::params::ChainSpec;

/// The symplectic form `[[0, I], [−I, 0]]` of size `2n`.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Mean and symmetrised covariance of a Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub n: usize,
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
}

impl MomentState {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "mean must have even positive length, got {}",
                mean.len()
            )));
        }
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::Dimension {
                expected: d,
                got: cov.nrows().max(cov.ncols()),
            });
        }
        let asym = max_abs(&(&cov - cov.transpose()));
        if asym > 1e-12 * max_abs(&cov).max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "covariance not symmetric (deviation {asym:e})"
            )));
        }
        Ok(MomentState {
            n: d / 2,
            mean,
            cov,
        })
    }

    /// Ground state of unit-frequency oscillators: zero mean, `cov = I/2`.
    pub fn vacuum(n: usize) -> Self {
        MomentState {
            n,
            mean: vec![0.0; 2 * n],
            cov: DMatrix::identity(2 * n, 2 * n) * 0.5,
        }
    }

    /// Displaced vacuum with mean `(x, p)`.
    pub fn coherent(x: &[f64], p: &[f64]) -> Result<Self> {
        if x.len() != p.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: p.len(),
            });
        }
        let mut s = Self::vacuum(x.len());
        s.mean = x.iter().chain(p).copied().collect();
        Ok(s)
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + (i/2) J`; physical
    /// states have it non-negative.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let d = 2 * self.n;
        let j = symplectic_form(self.n);
        let h = DMatrix::from_fn(d, d, |r, c| {
            Complex64::new(self.cov[(r, c)], 0.5 * j[(r, c)])
        });
        SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Symplectic eigenvalues of the covariance, ascending.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let d = 2 * self.n;
        let eig = SymmetricEigen::new(self.cov.clone());
        let sqrt_diag = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&sqrt_diag)
            * eig.eigenvectors.transpose();
        let j = symplectic_form(self.n);
        let m = &root * &j * &root;
        // i·m is Hermitian because m is real antisymmetric.
        let h = DMatrix::from_fn(d, d, |r, c| Complex64::new(0.0, m[(r, c)]));
        let mut nu: Vec<f64> = SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .copied()
            .filter(|v| *v > 0.0)
            .collect();
        nu.sort_by(f64::total_cmp);
        nu.resize(self.n, 0.0);
        nu
    }

    pub fn det_cov(&self) -> f64 {
        self.cov.determinant()
    }
}

/// Linear operator `Σ_j a_j R_j` over `(x_1..x_n, p_1..p_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub a: Vec<Complex64>,
}

impl LinearForm {
    pub fn new(a: Vec<Complex64>) -> Result<Self> {
        if a.is_empty() || a.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "form needs even positive length, got {}",
                a.len()
            )));
        }
        Ok(LinearForm { a })
    }

    pub fn n(&self) -> usize {
        self.a.len() / 2
    }

    /// `Σ_i (u_i p_i − u̇_i x_i)` for a complex solution.
    pub fn from_complex(u: &[Complex64], du: &[Complex64]) -> Result<Self> {
        if u.len() != du.len() {
            return Err(Error::Dimension {
                expected: u.len(),
                got: du.len(),
            });
        }
        Self::new(du.iter().map(|d| -d).chain(u.iter().copied()).collect())
    }

    pub fn from_real(u: &[f64], du: &[f64]) -> Result<Self> {
        let c = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
        Self::from_complex(&c(u), &c(du))
    }

    pub fn from_state(s: &OscState) -> Self {
        Self::from_real(&s.u, &s.du).expect("state has matching lengths")
    }
}

/// Form built from the real solution `traj` at time `t`.
pub fn g_form_from_solution(traj: &Trajectory, t: f64) -> Result<LinearForm> {
    Ok(LinearForm::from_state(&traj.at(t)?))
}

/// Form built from the complex solution `u − i v` at time `t`.
pub fn g_form_from_pair(u: &Trajectory, v: &Trajectory, t: f64) -> Result<LinearForm> {
    let (a, b) = (u.at(t)?, v.at(t)?);
    if a.n() != b.n() {
        return Err(Error::Dimension {
            expected: a.n(),
            got: b.n(),
        });
    }
    let c = |x: &[f64], y: &[f64]| -> Vec<Complex64> {
        x.iter().zip(y).map(|(&r, &i)| Complex64::new(r, -i)).collect()
    };
    LinearForm::from_complex(&c(&a.u, &b.u), &c(&a.du, &b.du))
}

/// Single-oscillator form from the normalised amplitude-phase pair,
/// `u = ρ e^{−iθ}`.
pub fn g_form_from_amplitude(ap: &AmplitudePhase, t: f64) -> Result<LinearForm> {
    let [u, du, v, dv] = ap.pair_at(t)?;
    LinearForm::from_complex(&[Complex64::new(u, -v)], &[Complex64::new(du, -dv)])
}

fn check_dims(form: &LinearForm, ms: &MomentState) -> Result<()> {
    if form.n() != ms.n {
        return Err(Error::Dimension {
            expected: ms.n,
            got: form.n(),
        });
    }
    Ok(())
}

pub fn expect_g(form: &LinearForm, ms: &MomentState) -> Result<Complex64> {
    check_dims(form, ms)?;
    Ok(form.a.iter().zip(&ms.mean).map(|(a, m)| a * m).sum())
}

/// `⟨Ĝ Ĝ†⟩ = Σ_jk a_j ā_k ⟨R_j R_k⟩` with
/// `⟨R_j R_k⟩ = cov_jk + m_j m_k + (i/2) J_jk`.
pub fn expect_gg_dagger(form: &LinearForm, ms: &MomentState) -> Result<f64> {
    check_dims(form, ms)?;
    let n = ms.n;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut scale: f64 = 0.0;
    for j in 0..2 * n {
        for k in 0..2 * n {
            let jjk = if k == j + n && j < n {
                1.0
            } else if j == k + n && k < n {
                -1.0
            } else {
                0.0
            };
            let r = Complex64::new(ms.cov[(j, k)] + ms.mean[j] * ms.mean[k], 0.5 * jjk);
            let term = form.a[j] * form.a[k].conj() * r;
            scale = scale.max(term.norm());
            acc += term;
        }
    }
    let tol = 1e-10 * scale.max(1.0);
    if acc.im.abs() > tol {
        return Err(Error::Consistency(format!(
            "<GG†> has imaginary part {:e}",
            acc.im
        )));
    }
    if acc.re < -tol {
        return Err(Error::Consistency(format!("<GG†> = {:e} is negative", acc.re)));
    }
    Ok(acc.re)
}

/// `⟨ĜĜ†⟩ − |⟨Ĝ⟩|²`.
pub fn variance_g(form: &LinearForm, ms: &MomentState) -> Result<f64> {
    Ok(expect_gg_dagger(form, ms)? - expect_g(form, ms)?.norm_sqr())
}

/// Moment flow of a Gaussian state: the mean trajectory plus the `2n`
/// basis solutions making up the fundamental matrix.
#[derive(Debug, Clone)]
pub struct MomentEvolution {
    mean: Trajectory,
    basis: Vec<Trajectory>,
    cov0: DMatrix<f64>,
    n: usize,
}

impl MomentEvolution {
    pub fn times(&self) -> &[f64] {
        self.mean.times()
    }

    pub fn mean_trajectory(&self) -> &Trajectory {
        &self.mean
    }

    /// Fundamental matrix `S(t)` mapping phase-space vectors at `t0` to `t`.
    pub fn fundamental(&self, t: f64) -> Result<DMatrix<f64>> {
        let d = 2 * self.n;
        let mut s = DMatrix::zeros(d, d);
        let mut col = vec![0.0; d];
        for (j, b) in self.basis.iter().enumerate() {
            b.flat_at(t, &mut col)?;
            for i in 0..d {
                s[(i, j)] = col[i];
            }
        }
        Ok(s)
    }

    /// `‖S J Sᵀ − J‖_max` at `t`.
    pub fn symplectic_defect(&self, t: f64) -> Result<f64> {
        let s = self.fundamental(t)?;
        let j = symplectic_form(self.n);
        Ok(max_abs(&(&s * &j * s.transpose() - j)))
    }

    pub fn at(&self, t: f64) -> Result<MomentState> {
        let s = self.fundamental(t)?;
        let mut cov = &s * &self.cov0 * s.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
        let mut mean = vec![0.0; 2 * self.n];
        self.mean.flat_at(t, &mut mean)?;
        Ok(MomentState {
            n: self.n,
            mean,
            cov,
        })
    }
}

/// Basis solutions run this much tighter than the requested tolerance.
/// Pure states sit exactly on the uncertainty boundary, and a symplectic
/// defect `δ` in `S` moves the smallest eigenvalue of `cov + (i/2)J` by up
/// to `δ/2`.
pub const BASIS_TOL_FACTOR: f64 = 1e-2;

/// Evolves `s0` from `t0` to `t1`. The mean is integrated directly at
/// `tol`; the covariance follows `S cov0 Sᵀ` with `S` built from `2n` basis
/// solutions integrated in parallel at `tol * BASIS_TOL_FACTOR`.
pub fn evolve_moments(
    spec: &ChainSpec,
    s0: &MomentState,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<MomentEvolution> {
    spec.check()?;
    if s0.n != spec.n {
        return Err(Error::Dimension {
            expected: spec.n,
            got: s0.n,
        });
    }
    let n = spec.n;
    let basis_tol = (tol * BASIS_TOL_FACTOR).max(ode::MIN_TOL);
    let mean = classical::integrate(spec, &OscState::from_flat(&s0.mean), t0, t1, tol)?;
    let basis = (0..2 * n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; 2 * n];
            e[j] = 1.0;
            classical::integrate(spec, &OscState::from_flat(&e), t0, t1, basis_tol)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentEvolution {
        mean,
        basis,
        cov0: s0.cov.clone(),
        n,
    })
}
