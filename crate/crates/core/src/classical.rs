//! Classical dynamics of the oscillator chain and its linear invariants.
//!
//! State vectors are ordered `(u_1..u_n, du_1..du_n)` everywhere in the crate.

use crate::error::{Error, Result};
use crate::ode::{self, DenseSolution, OdeOptions, OdeSystem};
use crate::params::ChainSpec;
use crate::quad;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OscState {
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

impl OscState {
    pub fn new(u: Vec<f64>, du: Vec<f64>) -> Result<Self> {
        if u.len() != du.len() {
            return Err(Error::Dimension {
                expected: u.len(),
                got: du.len(),
            });
        }
        Ok(OscState { u, du })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn from_flat(y: &[f64]) -> Self {
        let n = y.len() / 2;
        OscState {
            u: y[..n].to_vec(),
            du: y[n..].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = self.u.clone();
        y.extend_from_slice(&self.du);
        y
    }
}

/// The chain as a first-order ODE system.
#[derive(Debug, Clone, Copy)]
pub struct ChainSystem<'a> {
    pub spec: &'a ChainSpec,
}

impl OdeSystem for ChainSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.spec.n
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.spec.n;
        let (u, du) = y.split_at(n);
        let (d_u, d_du) = dy.split_at_mut(n);
        d_u.copy_from_slice(du);
        for i in 0..n {
            d_du[i] = -self.spec.omega_sq[i].value(t) * u[i];
        }
        for (b, eta) in self.spec.eta.iter().enumerate() {
            let e = eta.value(t);
            d_du[b] -= e * u[b + 1];
            d_du[b + 1] -= e * u[b];
        }
    }
}

/// Time derivative of `s`, returned as a state `(u̇, ü)`.
pub fn rhs(spec: &ChainSpec, t: f64, s: &OscState) -> Result<OscState> {
    spec.check()?;
    if s.n() != spec.n {
        return Err(Error::Dimension {
            expected: spec.n,
            got: s.n(),
        });
    }
    spec.check_window(t, t)?;
    let y = s.to_flat();
    let mut dy = vec![0.0; y.len()];
    ChainSystem { spec }.rhs(t, &y, &mut dy);
    Ok(OscState::from_flat(&dy))
}

/// Dense solution of the chain equations.
#[derive(Debug, Clone)]
pub struct Trajectory {
    spec: ChainSpec,
    sol: DenseSolution,
}

impl Trajectory {
    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn tol(&self) -> f64 {
        self.sol.tol()
    }

    pub fn times(&self) -> &[f64] {
        self.sol.times()
    }

    pub fn t_start(&self) -> f64 {
        self.sol.t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }

    pub fn state(&self, k: usize) -> OscState {
        OscState::from_flat(self.sol.state(k))
    }

    /// Interpolated flat state; see [`DenseSolution::eval_second_order_into`].
    pub fn flat_at(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.sol.eval_second_order_into(t, out)
    }

    pub fn at(&self, t: f64) -> Result<OscState> {
        let mut y = vec![0.0; 2 * self.spec.n];
        self.flat_at(t, &mut y)?;
        Ok(OscState::from_flat(&y))
    }

    /// `(u_i(t), u̇_i(t))` for one oscillator.
    pub fn component(&self, i: usize, t: f64) -> Result<(f64, f64)> {
        let s = self.at(t)?;
        Ok((s.u[i], s.du[i]))
    }

    pub fn dense(&self) -> &DenseSolution {
        &self.sol
    }
}

/// Solves the chain from `init` at `t0` to `t1 > t0`.
pub fn integrate(
    spec: &ChainSpec,
    init: &OscState,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<Trajectory> {
    spec.check()?;
    if init.n() != spec.n {
        return Err(Error::Dimension {
            expected: spec.n,
            got: init.n(),
        });
    }
    if t1 <= t0 {
        return Err(Error::InvalidArgument(format!(
            "window [{t0}, {t1}] must have t1 > t0"
        )));
    }
    spec.check_window(t0, t1)?;
    let sol = ode::solve(
        &ChainSystem { spec },
        t0,
        &init.to_flat(),
        t1,
        OdeOptions::with_tol(tol),
    )?;
    Ok(Trajectory {
        spec: spec.clone(),
        sol,
    })
}

/// The default solution pair: `u_i(t0) = 1, u̇_i(t0) = 0` and
/// `v_i(t0) = 0, v̇_i(t0) = 1`, so that `G_N(t0) = n`.
pub fn orthogonal_pair(
    spec: &ChainSpec,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<(Trajectory, Trajectory)> {
    let n = spec.n;
    let u0 = OscState::new(vec![1.0; n], vec![0.0; n])?;
    let v0 = OscState::new(vec![0.0; n], vec![1.0; n])?;
    Ok((
        integrate(spec, &u0, t0, t1, tol)?,
        integrate(spec, &v0, t0, t1, tol)?,
    ))
}

fn same_spec(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.spec != b.spec {
        return Err(Error::InvalidArgument(
            "trajectories belong to different chains".into(),
        ));
    }
    Ok(())
}

fn wronskian_sum(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() / 2;
    (0..n).map(|i| u[i] * v[n + i] - u[n + i] * v[i]).sum()
}

/// `G_N = Σ_i (u_i v̇_i − u̇_i v_i)` at time `t`.
pub fn invariant_classical(u: &Trajectory, v: &Trajectory, t: f64) -> Result<f64> {
    same_spec(u, v)?;
    Ok(wronskian_sum(&u.at(t)?.to_flat(), &v.at(t)?.to_flat()))
}

/// Sorted union of both trajectories' step times inside their common window.
fn merged_times(u: &Trajectory, v: &Trajectory) -> Vec<f64> {
    let lo = u.t_start().max(v.t_start());
    let hi = u.t_end().min(v.t_end());
    let mut ts: Vec<f64> = u
        .times()
        .iter()
        .chain(v.times())
        .copied()
        .filter(|&t| t >= lo && t <= hi)
        .collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// `(t, G_N(t))` sampled at every step time of either trajectory.
pub fn invariant_series(u: &Trajectory, v: &Trajectory) -> Result<Vec<(f64, f64)>> {
    same_spec(u, v)?;
    merged_times(u, v)
        .into_iter()
        .map(|t| Ok((t, invariant_classical(u, v, t)?)))
        .collect()
}

/// `max_t |G(t) − G(t0)| / max(1, |G(t0)|)` over a sampled series.
pub fn relative_drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(g0) = it.next() else { return 0.0 };
    let scale = g0.abs().max(1.0);
    it.map(|g| (g - g0).abs() / scale).fold(0.0, f64::max)
}

/// Relative drift of the classical invariant between two solutions.
pub fn invariant_drift(u: &Trajectory, v: &Trajectory) -> Result<f64> {
    Ok(relative_drift(
        invariant_series(u, v)?.into_iter().map(|(_, g)| g),
    ))
}

/// Per-oscillator invariants of a coupled pair and their sum.
#[derive(Debug, Clone)]
pub struct PairInvariantReport {
    pub times: Vec<f64>,
    pub g_x: Vec<f64>,
    pub g_y: Vec<f64>,
    pub g_sum: Vec<f64>,
    /// `Σ_i (u_i ẋ_i − u̇_i x_i)`, which never sees η.
    pub wronskian_sum: Vec<f64>,
    /// `F(t) = ∫ η u_x dt`
    pub f: Vec<f64>,
    /// `K(t) = ∫ η u_y dt`
    pub k: Vec<f64>,
}

impl PairInvariantReport {
    pub fn sum_drift(&self) -> f64 {
        relative_drift(self.g_sum.iter().copied())
    }

    pub fn x_drift(&self) -> f64 {
        relative_drift(self.g_x.iter().copied())
    }

    pub fn y_drift(&self) -> f64 {
        relative_drift(self.g_y.iter().copied())
    }

    /// Largest `|g_sum − wronskian_sum|`.
    pub fn cancellation_error(&self) -> f64 {
        self.g_sum
            .iter()
            .zip(&self.wronskian_sum)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Evaluates the per-oscillator invariants
/// `G_x = u_x ẋ − x u̇_x − (F y − K x)` and
/// `G_y = u_y ẏ − y u̇_y − (K x − F y)`
/// along a physical trajectory `phys`, with `(u_x, u_y)` taken from `sol`.
///
/// Samples are the step times of `sol`; `F` and `K` are accumulated over
/// the same steps from its dense output.
pub fn pair_invariants(sol: &Trajectory, phys: &Trajectory) -> Result<PairInvariantReport> {
    same_spec(sol, phys)?;
    if sol.n() != 2 {
        return Err(Error::InvalidArgument(format!(
            "pair invariants need n = 2, got {}",
            sol.n()
        )));
    }
    let eps = 1e-12 * (sol.t_end() - sol.t_start()).abs().max(1.0);
    if (sol.t_start() - phys.t_start()).abs() > eps || (sol.t_end() - phys.t_end()).abs() > eps {
        return Err(Error::InvalidArgument(
            "solution and physical trajectory cover different windows".into(),
        ));
    }
    let eta = &sol.spec.eta[0];
    let times: Vec<f64> = sol.times().to_vec();
    let tol = sol.tol();
    let mut buf = [0.0; 4];
    let f = quad::cumulative(
        |t| {
            sol.flat_at(t, &mut buf).expect("inside window");
            eta.value(t) * buf[0]
        },
        &times,
        tol,
    );
    let k = quad::cumulative(
        |t| {
            sol.flat_at(t, &mut buf).expect("inside window");
            eta.value(t) * buf[1]
        },
        &times,
        tol,
    );

    let m = times.len();
    let mut rep = PairInvariantReport {
        times: times.clone(),
        g_x: Vec::with_capacity(m),
        g_y: Vec::with_capacity(m),
        g_sum: Vec::with_capacity(m),
        wronskian_sum: Vec::with_capacity(m),
        f: f.clone(),
        k: k.clone(),
    };
    for (j, &t) in times.iter().enumerate() {
        let u = sol.state(j);
        let p = phys.at(t.clamp(phys.t_start(), phys.t_end()))?;
        let (x, y, dx, dy) = (p.u[0], p.u[1], p.du[0], p.du[1]);
        let wx = u.u[0] * dx - x * u.du[0];
        let wy = u.u[1] * dy - y * u.du[1];
        let gx = wx - (f[j] * y - k[j] * x);
        let gy = wy - (k[j] * x - f[j] * y);
        rep.g_x.push(gx);
        rep.g_y.push(gy);
        rep.g_sum.push(gx + gy);
        rep.wronskian_sum.push(wx + wy);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::TimeFunction;
    use nalgebra::{Matrix2, SymmetricEigen};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(v: f64) -> TimeFunction {
        TimeFunction::constant(v)
    }

    #[test]
    fn rhs_examples() {
        let one = ChainSpec::new(vec![c(1.0)], vec![]).unwrap();
        let d = rhs(&one, 0.0, &OscState::new(vec![1.0], vec![0.0]).unwrap()).unwrap();
        assert_eq!(d.to_flat(), vec![0.0, -1.0]);

        let three = ChainSpec::new(vec![c(1.0); 3], vec![c(0.1); 2]).unwrap();
        let s = OscState::new(vec![1.0, 0.0, 0.0], vec![0.0; 3]).unwrap();
        let d = rhs(&three, 0.0, &s).unwrap();
        assert_eq!(d.to_flat(), vec![0.0, 0.0, 0.0, -1.0, -0.1, 0.0]);
    }

    #[test]
    fn zero_coupling_decouples() {
        let two = ChainSpec::new(vec![c(1.0), c(2.0)], vec![c(0.0)]).unwrap();
        let s = OscState::new(vec![0.3, -0.7], vec![0.2, 0.5]).unwrap();
        let d = rhs(&two, 1.0, &s).unwrap();
        for (i, w) in [1.0, 2.0].iter().enumerate() {
            let single = ChainSpec::new(vec![c(*w)], vec![]).unwrap();
            let si = OscState::new(vec![s.u[i]], vec![s.du[i]]).unwrap();
            let di = rhs(&single, 1.0, &si).unwrap();
            assert_eq!(d.u[i], di.u[0]);
            assert_eq!(d.du[i], di.du[0]);
        }
    }

    #[test]
    fn cosine_period() {
        let tol = 1e-10;
        let spec = ChainSpec::new(vec![c(1.0)], vec![]).unwrap();
        let init = OscState::new(vec![1.0], vec![0.0]).unwrap();
        let tr = integrate(&spec, &init, 0.0, 2.0 * PI, tol).unwrap();
        let end = tr.at(2.0 * PI).unwrap();
        assert!((end.u[0] - 1.0).abs() < 10.0 * tol);
    }

    /// Closed form for constant coefficients via eigen-decomposition of the
    /// stiffness matrix.
    fn normal_mode_solution(k: Matrix2<f64>, u0: [f64; 2], v0: [f64; 2], t: f64) -> [f64; 2] {
        let eig = SymmetricEigen::new(k);
        let mut out = [0.0; 2];
        for m in 0..2 {
            let w = eig.eigenvalues[m].sqrt();
            let e = eig.eigenvectors.column(m);
            let a = e[0] * u0[0] + e[1] * u0[1];
            let b = e[0] * v0[0] + e[1] * v0[1];
            let q = a * (w * t).cos() + b / w * (w * t).sin();
            out[0] += q * e[0];
            out[1] += q * e[1];
        }
        out
    }

    #[test]
    fn constant_coupling_matches_normal_modes() {
        let tol = 1e-11;
        let spec = ChainSpec::new(vec![c(1.0), c(1.0)], vec![c(0.1)]).unwrap();
        let init = OscState::new(vec![1.0, 0.3], vec![0.0, -0.2]).unwrap();
        let tr = integrate(&spec, &init, 0.0, 15.0, tol).unwrap();
        let k = Matrix2::new(1.0, 0.1, 0.1, 1.0);
        for j in 0..=60 {
            let t = 0.25 * j as f64;
            let got = tr.at(t).unwrap();
            let want = normal_mode_solution(k, [1.0, 0.3], [0.0, -0.2], t);
            assert!((got.u[0] - want[0]).abs() < 1e-9, "t={t}");
            assert!((got.u[1] - want[1]).abs() < 1e-9, "t={t}");
        }
        // Symmetric start excites only the √1.1 mode.
        let sym = OscState::new(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let tr = integrate(&spec, &sym, 0.0, 5.0, tol).unwrap();
        let end = tr.at(5.0).unwrap();
        assert!((end.u[0] - (1.1f64.sqrt() * 5.0).cos()).abs() < 1e-9);
    }

    #[test]
    fn time_dependent_pair_matches_fine_rk4() {
        let spec = ChainSpec::new(
            vec![TimeFunction::sine(1.0, 0.2, 1.0), TimeFunction::sine(1.0, 0.2, 1.0)],
            vec![TimeFunction::harmonic(0.0, 0.05, 1.0, 0.0)],
        )
        .unwrap();
        let init = OscState::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let tr = integrate(&spec, &init, 0.0, 5.0, 1e-12).unwrap();
        let reference = ode::rk4_fixed(&ChainSystem { spec: &spec }, 0.0, &init.to_flat(), 5.0, 500_000);
        let got = tr.at(5.0).unwrap().to_flat();
        for (a, b) in got.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn unit_wronskian_examples() {
        let spec = ChainSpec::new(vec![c(1.0)], vec![]).unwrap();
        let (u, v) = orthogonal_pair(&spec, 0.0, 10.0, 1e-10).unwrap();
        for t in [0.0, 1.3, 7.7, 10.0] {
            assert!((invariant_classical(&u, &v, t).unwrap() - 1.0).abs() < 1e-9);
        }
        let two = ChainSpec::new(vec![c(1.0), c(3.0)], vec![c(0.0)]).unwrap();
        let (u, v) = orthogonal_pair(&two, 0.0, 4.0, 1e-10).unwrap();
        assert!((invariant_classical(&u, &v, 2.5).unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(invariant_drift(&u, &u).unwrap(), 0.0);
        assert_eq!(invariant_classical(&u, &u, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn time_dependent_chain_conserves_g() {
        let spec = ChainSpec::new(
            vec![
                TimeFunction::sine(1.5, 0.4, 0.7),
                TimeFunction::harmonic(2.0, 0.3, 1.3, 0.2),
                TimeFunction::Polynomial { coeffs: vec![1.0, 0.05] },
            ],
            vec![TimeFunction::sine(0.1, 0.1, 2.0), c(-0.2)],
        )
        .unwrap();
        let (u, v) = orthogonal_pair(&spec, 0.0, 5.0, 1e-10).unwrap();
        let g0 = invariant_classical(&u, &v, 0.0).unwrap();
        let g5 = invariant_classical(&u, &v, 5.0).unwrap();
        assert_eq!(g0, 3.0);
        assert!((g5 - g0).abs() < 1e-8);
        assert!(invariant_drift(&u, &v).unwrap() < 1e-8);
    }

    #[test]
    fn mismatched_specs_rejected() {
        let a = ChainSpec::new(vec![c(1.0)], vec![]).unwrap();
        let b = ChainSpec::new(vec![c(2.0)], vec![]).unwrap();
        let (u, _) = orthogonal_pair(&a, 0.0, 1.0, 1e-8).unwrap();
        let (v, _) = orthogonal_pair(&b, 0.0, 1.0, 1e-8).unwrap();
        assert!(invariant_classical(&u, &v, 0.5).is_err());
        assert!(pair_invariants(&u, &v).is_err());
    }

    #[test]
    fn reversed_window_rejected() {
        let a = ChainSpec::new(vec![c(1.0)], vec![]).unwrap();
        let init = OscState::new(vec![1.0], vec![0.0]).unwrap();
        assert!(integrate(&a, &init, 1.0, 0.0, 1e-8).is_err());
    }

    fn pair_spec(eta: TimeFunction) -> ChainSpec {
        ChainSpec::new(
            vec![TimeFunction::sine(1.0, 0.2, 1.0), TimeFunction::harmonic(1.5, 0.1, 2.0, 0.0)],
            vec![eta],
        )
        .unwrap()
    }

    fn pair_runs(spec: &ChainSpec) -> PairInvariantReport {
        let sol = integrate(spec, &OscState::new(vec![1.0, 1.0], vec![0.0; 2]).unwrap(), 0.0, 20.0, 1e-10).unwrap();
        let phys = integrate(spec, &OscState::new(vec![0.5, -1.0], vec![0.3, 0.2]).unwrap(), 0.0, 20.0, 1e-10).unwrap();
        pair_invariants(&sol, &phys).unwrap()
    }

    #[test]
    fn decoupled_pair_invariants_are_individually_constant() {
        let rep = pair_runs(&pair_spec(c(0.0)));
        assert!(rep.f.iter().chain(&rep.k).all(|&v| v == 0.0));
        assert!(rep.x_drift() < 1e-8);
        assert!(rep.y_drift() < 1e-8);
    }

    #[test]
    fn coupled_pair_only_conserves_the_sum() {
        let rep = pair_runs(&pair_spec(TimeFunction::sine(0.3, 0.1, 0.7)));
        assert!(rep.sum_drift() < 1e-8, "{}", rep.sum_drift());
        assert!(rep.x_drift() > 1e-3);
        assert!(rep.y_drift() > 1e-3);
        assert!(rep.cancellation_error() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn solutions_superpose(
            a in -2.0f64..2.0, b in -2.0f64..2.0,
            x1 in prop::collection::vec(-1.0f64..1.0, 6),
            x2 in prop::collection::vec(-1.0f64..1.0, 6),
        ) {
            let tol = 1e-10;
            let spec = ChainSpec::new(
                vec![TimeFunction::sine(1.0, 0.3, 0.9), c(2.0), TimeFunction::harmonic(1.2, 0.2, 1.7, 0.4)],
                vec![TimeFunction::sine(0.0, 0.3, 0.5), c(0.25)],
            ).unwrap();
            let s1 = OscState::from_flat(&x1);
            let s2 = OscState::from_flat(&x2);
            let combo: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| a * p + b * q).collect();
            let t1 = integrate(&spec, &s1, 0.0, 6.0, tol).unwrap();
            let t2 = integrate(&spec, &s2, 0.0, 6.0, tol).unwrap();
            let t3 = integrate(&spec, &OscState::from_flat(&combo), 0.0, 6.0, tol).unwrap();
            for k in 0..=12 {
                let t = 0.5 * k as f64;
                let (y1, y2, y3) = (t1.at(t).unwrap().to_flat(), t2.at(t).unwrap().to_flat(), t3.at(t).unwrap().to_flat());
                for i in 0..6 {
                    let lin = a * y1[i] + b * y2[i];
                    let scale = 1.0 + a.abs() + b.abs();
                    prop_assert!((y3[i] - lin).abs() < 10.0 * tol * scale, "{} vs {}", y3[i], lin);
                }
            }
        }

        #[test]
        fn forward_then_backward_returns(x in prop::collection::vec(-1.0f64..1.0, 4)) {
            let tol = 1e-11;
            let spec = pair_spec(TimeFunction::sine(0.2, 0.1, 1.1));
            let fwd = ode::solve(&ChainSystem { spec: &spec }, 0.0, &x, 8.0, OdeOptions::with_tol(tol)).unwrap();
            let back = ode::solve(&ChainSystem { spec: &spec }, 8.0, fwd.final_state(), 0.0, OdeOptions::with_tol(tol)).unwrap();
            for (a, b) in back.final_state().iter().zip(&x) {
                prop_assert!((a - b).abs() < 100.0 * tol, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn sum_never_uses_eta() {
        // Same four trajectories, evaluated with η ignored: the sum is unchanged.
        let rep = pair_runs(&pair_spec(TimeFunction::sine(0.3, 0.1, 0.7)));
        for (g, w) in rep.g_sum.iter().zip(&rep.wronskian_sum) {
            assert!((g - w).abs() <= 1e-10 * w.abs().max(1.0));
        }
    }
}
