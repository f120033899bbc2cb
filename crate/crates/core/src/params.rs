//! Time-dependent coefficient functions and the oscillator-chain definition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real function of time used for frequencies Ω²(t) and couplings η(t).
///
/// Serialized as `{"kind": ..., "params": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum TimeFunction {
    Constant {
        c: f64,
    },
    /// `a + b cos(ω t + φ)`
    Harmonic {
        a: f64,
        b: f64,
        omega: f64,
        phi: f64,
    },
    /// Coefficients in ascending powers of `t`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    Tabulated(Spline),
    Sum(Vec<TimeFunction>),
    Product(Vec<TimeFunction>),
}

impl TimeFunction {
    pub fn constant(c: f64) -> Self {
        TimeFunction::Constant { c }
    }

    pub fn harmonic(a: f64, b: f64, omega: f64, phi: f64) -> Self {
        TimeFunction::Harmonic { a, b, omega, phi }
    }

    /// `a + b sin(ω t)`, written as a harmonic with phase −π/2.
    pub fn sine(a: f64, b: f64, omega: f64) -> Self {
        TimeFunction::Harmonic {
            a,
            b,
            omega,
            phi: -std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(TimeFunction::Tabulated(Spline::new(times, values)?))
    }

    /// Closed interval on which [`eval`](Self::eval) succeeds.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            TimeFunction::Tabulated(s) => (s.times[0], s.times[s.times.len() - 1]),
            TimeFunction::Sum(fs) | TimeFunction::Product(fs) => {
                fs.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), f| {
                    let (a, b) = f.domain();
                    (lo.max(a), hi.min(b))
                })
            }
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if t < lo || t > hi || t.is_nan() {
            return Err(Error::Domain { t, lo, hi });
        }
        Ok(self.value(t))
    }

    /// Unchecked evaluation. Tabulated functions extrapolate with their end
    /// cubic; callers are expected to have checked the domain once up front.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant { c } => *c,
            TimeFunction::Harmonic { a, b, omega, phi } => a + b * (omega * t + phi).cos(),
            TimeFunction::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
            }
            TimeFunction::Tabulated(s) => s.value(t),
            TimeFunction::Sum(fs) => fs.iter().map(|f| f.value(t)).sum(),
            TimeFunction::Product(fs) => fs.iter().map(|f| f.value(t)).product(),
        }
    }

    fn check(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            TimeFunction::Constant { c } => c.is_finite(),
            TimeFunction::Harmonic { a, b, omega, phi } => finite(&[*a, *b, *omega, *phi]),
            TimeFunction::Polynomial { coeffs } => finite(coeffs),
            TimeFunction::Tabulated(_) => true,
            TimeFunction::Sum(fs) | TimeFunction::Product(fs) => {
                if fs.is_empty() {
                    return Err(Error::InvalidSpec("empty sum/product".into()));
                }
                for f in fs {
                    f.check()?;
                }
                let (lo, hi) = self.domain();
                if lo > hi {
                    return Err(Error::InvalidSpec(
                        "tabulated terms have disjoint domains".into(),
                    ));
                }
                true
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec("non-finite function parameter".into()))
        }
    }
}

/// Raw table as it appears in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Table {
    times: Vec<f64>,
    values: Vec<f64>,
}

/// Interpolating cubic spline with not-a-knot end conditions.
///
/// Not-a-knot makes the spline reproduce any cubic exactly, and it is C² so
/// the ODE right-hand side stays smooth. Two nodes degrade to a line and
/// three nodes to the interpolating parabola.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Table", into = "Table")]
pub struct Spline {
    times: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the nodes.
    m: Vec<f64>,
}

impl PartialEq for Spline {
    fn eq(&self, other: &Self) -> bool {
        self.times == other.times && self.values == other.values
    }
}

impl TryFrom<Table> for Spline {
    type Error = Error;
    fn try_from(t: Table) -> Result<Self> {
        Spline::new(t.times, t.values)
    }
}

impl From<Spline> for Table {
    fn from(s: Spline) -> Self {
        Table {
            times: s.times,
            values: s.values,
        }
    }
}

impl Spline {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidSpec(format!(
                "table has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidSpec("table needs at least two nodes".into()));
        }
        if times.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("non-finite table entry".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec(
                "table times must be strictly increasing".into(),
            ));
        }
        let m = second_derivatives(&times, &values);
        Ok(Spline { times, values, m })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn value(&self, t: f64) -> f64 {
        let n = self.times.len();
        // Interval i covers [t_i, t_{i+1}); the last node belongs to the last interval.
        let i = self
            .times
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(n - 2);
        let h = self.times[i + 1] - self.times[i];
        let a = (self.times[i + 1] - t) / h;
        let b = 1.0 - a;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

fn second_derivatives(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n == 2 {
        return vec![0.0; 2];
    }
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 3 {
        // Single parabola: constant second derivative.
        let c = 2.0 * (slope[1] - slope[0]) / (h[0] + h[1]);
        return vec![c; 3];
    }

    // Interior rows: h_{i-1} M_{i-1} + 2(h_{i-1}+h_i) M_i + h_i M_{i+1} = 6 (s_i - s_{i-1}).
    // Not-a-knot eliminates M_0 and M_{n-1}:
    //   M_0 = M_1 (1 + h0/h1) - M_2 h0/h1, and symmetrically at the far end.
    let k = n - 2; // unknowns M_1..M_{n-2}
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for r in 0..k {
        let i = r + 1;
        sub[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        sup[r] = h[i];
        rhs[r] = 6.0 * (slope[i] - slope[i - 1]);
    }
    let (h0, h1) = (h[0], h[1]);
    diag[0] += sub[0] * (1.0 + h0 / h1);
    sup[0] -= sub[0] * h0 / h1;
    sub[0] = 0.0;
    let (ha, hb) = (h[n - 2], h[n - 3]);
    diag[k - 1] += sup[k - 1] * (1.0 + ha / hb);
    sub[k - 1] -= sup[k - 1] * ha / hb;
    sup[k - 1] = 0.0;

    let inner = solve_tridiagonal(&sub, &diag, &sup, &rhs);
    let mut m = Vec::with_capacity(n);
    m.push(inner[0] * (1.0 + h0 / h1) - inner[1] * h0 / h1);
    m.extend_from_slice(&inner);
    m.push(inner[k - 1] * (1.0 + ha / hb) - inner[k - 2] * ha / hb);
    m
}

/// Thomas algorithm. `sub[0]` and `sup[k-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let k = diag.len();
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..k {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < k { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; k];
    x[k - 1] = d[k - 1];
    for i in (0..k - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// N oscillators on a nearest-neighbour chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n: usize,
    /// Ω_i²(t), one per oscillator.
    pub omega_sq: Vec<TimeFunction>,
    /// η_{i,i+1}(t), one per bond.
    pub eta: Vec<TimeFunction>,
}

impl ChainSpec {
    /// Builds and validates a chain; `n` is taken from `omega_sq`.
    pub fn new(omega_sq: Vec<TimeFunction>, eta: Vec<TimeFunction>) -> Result<Self> {
        ChainSpec {
            n: omega_sq.len(),
            omega_sq,
            eta,
        }
        .validate()
    }

    /// Two oscillators with coupling η, the case treated on grids.
    pub fn pair(omega_x_sq: TimeFunction, omega_y_sq: TimeFunction, eta: TimeFunction) -> Self {
        ChainSpec {
            n: 2,
            omega_sq: vec![omega_x_sq, omega_y_sq],
            eta: vec![eta],
        }
    }

    pub fn validate(self) -> Result<Self> {
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        if self.omega_sq.len() != self.n {
            return Err(Error::InvalidSpec(format!(
                "n = {} but {} omega_sq entries",
                self.n,
                self.omega_sq.len()
            )));
        }
        if self.eta.len() != self.n - 1 {
            return Err(Error::InvalidSpec(format!(
                "n = {} requires {} eta entries, found {}",
                self.n,
                self.n - 1,
                self.eta.len()
            )));
        }
        for f in self.omega_sq.iter().chain(&self.eta) {
            f.check()?;
        }
        Ok(())
    }

    /// Checks every coefficient is defined on `[t0, t1]` (either order).
    pub fn check_window(&self, t0: f64, t1: f64) -> Result<()> {
        let (a, b) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        for f in self.omega_sq.iter().chain(&self.eta) {
            let (lo, hi) = f.domain();
            if a < lo {
                return Err(Error::Domain { t: a, lo, hi });
            }
            if b > hi {
                return Err(Error::Domain { t: b, lo, hi });
            }
        }
        Ok(())
    }

    /// Same chain with every coupling set to zero.
    pub fn decoupled(&self) -> Self {
        ChainSpec {
            n: self.n,
            omega_sq: self.omega_sq.clone(),
            eta: vec![TimeFunction::constant(0.0); self.n.saturating_sub(1)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Lagrange polynomial through the given points, evaluated at `t`.
    fn lagrange(xs: &[f64], ys: &[f64], t: f64) -> f64 {
        let mut acc = 0.0;
        for (i, (&xi, &yi)) in xs.iter().zip(ys).enumerate() {
            let mut w = 1.0;
            for (j, &xj) in xs.iter().enumerate() {
                if i != j {
                    w *= (t - xj) / (xi - xj);
                }
            }
            acc += w * yi;
        }
        acc
    }

    #[test]
    fn harmonic_and_constant() {
        assert_eq!(TimeFunction::harmonic(1.0, 0.5, 2.0, 0.0).eval(0.0).unwrap(), 1.5);
        assert_eq!(TimeFunction::constant(4.0).eval(17.3).unwrap(), 4.0);
    }

    #[test]
    fn four_point_table_is_the_interpolating_cubic() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 4.0, 9.0];
        let f = TimeFunction::tabulated(xs.to_vec(), ys.to_vec()).unwrap();
        let expected = lagrange(&xs, &ys, 1.5);
        assert!((expected - 2.25).abs() < 1e-15);
        assert!((f.eval(1.5).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn spline_reproduces_cubics_on_uneven_nodes() {
        let cubic = |t: f64| 0.3 - 1.2 * t + 0.5 * t * t - 0.07 * t * t * t;
        let xs = vec![-1.0, -0.2, 0.5, 1.1, 2.0, 3.7, 4.0];
        let ys: Vec<f64> = xs.iter().map(|&t| cubic(t)).collect();
        let f = TimeFunction::tabulated(xs, ys).unwrap();
        for k in 0..=50 {
            let t = -1.0 + 5.0 * k as f64 / 50.0;
            assert!((f.eval(t).unwrap() - cubic(t)).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn short_tables() {
        let line = TimeFunction::tabulated(vec![0.0, 2.0], vec![1.0, 5.0]).unwrap();
        assert!((line.eval(0.5).unwrap() - 2.0).abs() < 1e-15);
        let par = TimeFunction::tabulated(vec![0.0, 1.0, 3.0], vec![0.0, 1.0, 9.0]).unwrap();
        assert!((par.eval(2.0).unwrap() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn tabulated_outside_range_is_domain_error() {
        let f = TimeFunction::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(f.eval(2.5), Err(Error::Domain { .. })));
        assert!(matches!(f.eval(-0.1), Err(Error::Domain { .. })));
        let s = TimeFunction::Sum(vec![f, TimeFunction::constant(1.0)]);
        assert!(matches!(s.eval(3.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn table_must_increase() {
        assert!(TimeFunction::tabulated(vec![0.0, 1.0, 1.0], vec![0.0; 3]).is_err());
        assert!(TimeFunction::tabulated(vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn validate_lengths() {
        let c = TimeFunction::constant;
        assert!(ChainSpec::new(vec![c(1.0)], vec![]).is_ok());
        assert!(ChainSpec::new(vec![c(1.0); 3], vec![c(0.1); 2]).is_ok());
        assert!(ChainSpec::new(vec![c(1.0); 2], vec![c(0.1); 2]).is_err());
        let empty = ChainSpec {
            n: 0,
            omega_sq: vec![],
            eta: vec![],
        };
        assert!(empty.validate().is_err());
        let lying = ChainSpec {
            n: 3,
            omega_sq: vec![c(1.0); 2],
            eta: vec![c(0.0)],
        };
        assert!(lying.validate().is_err());
    }

    #[test]
    fn window_check_respects_tables() {
        let tab = TimeFunction::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]).unwrap();
        let spec = ChainSpec::new(vec![tab], vec![]).unwrap();
        assert!(spec.check_window(0.0, 2.0).is_ok());
        assert!(spec.check_window(0.0, 2.5).is_err());
    }

    #[test]
    fn json_shape() {
        let f: TimeFunction =
            serde_json::from_str(r#"{"kind":"harmonic","params":{"a":1,"b":0.5,"omega":2,"phi":0}}"#)
                .unwrap();
        assert_eq!(f, TimeFunction::harmonic(1.0, 0.5, 2.0, 0.0));
        let bad = serde_json::from_str::<TimeFunction>(
            r#"{"kind":"tabulated","params":{"times":[0,0],"values":[1,2]}}"#,
        );
        assert!(bad.is_err());
    }

    fn arb_leaf() -> impl Strategy<Value = TimeFunction> {
        let x = -1e3f64..1e3;
        prop_oneof![
            x.clone().prop_map(TimeFunction::constant),
            (x.clone(), x.clone(), -10.0f64..10.0, -4.0f64..4.0)
                .prop_map(|(a, b, w, p)| TimeFunction::harmonic(a, b, w, p)),
            prop::collection::vec(x.clone(), 0..5)
                .prop_map(|coeffs| TimeFunction::Polynomial { coeffs }),
            prop::collection::vec((0.01f64..2.0, x), 2..8).prop_map(|steps| {
                let mut t = -1.0;
                let (mut ts, mut vs) = (vec![], vec![]);
                for (dt, v) in steps {
                    ts.push(t);
                    vs.push(v);
                    t += dt;
                }
                TimeFunction::tabulated(ts, vs).unwrap()
            }),
        ]
    }

    fn arb_fn() -> impl Strategy<Value = TimeFunction> {
        arb_leaf().prop_recursive(2, 8, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 1..3).prop_map(TimeFunction::Sum),
                prop::collection::vec(inner, 1..3).prop_map(TimeFunction::Product),
            ]
        })
    }

    proptest! {
        #[test]
        fn sum_is_pointwise(f in arb_fn(), g in arb_fn(), s in 0.0f64..1.0) {
            let sum = TimeFunction::Sum(vec![f.clone(), g.clone()]);
            let (lo, hi) = sum.domain();
            prop_assume!(lo <= hi);
            let (lo, hi) = (lo.max(-5.0), hi.min(5.0));
            let t = lo + s * (hi - lo);
            let lhs = sum.eval(t).unwrap();
            let rhs = f.eval(t).unwrap() + g.eval(t).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn table_nodes_are_exact(steps in prop::collection::vec((0.001f64..3.0, -1e6f64..1e6), 2..20)) {
            let mut t = 0.0;
            let (mut ts, mut vs) = (vec![], vec![]);
            for (dt, v) in steps {
                ts.push(t);
                vs.push(v);
                t += dt;
            }
            let f = TimeFunction::tabulated(ts.clone(), vs.clone()).unwrap();
            for (t, v) in ts.iter().zip(&vs) {
                prop_assert_eq!(f.eval(*t).unwrap(), *v);
            }
        }

        #[test]
        fn json_round_trip_is_bit_exact(f in arb_fn()) {
            let text = serde_json::to_string(&f).unwrap();
            let back: TimeFunction = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
    }
}
