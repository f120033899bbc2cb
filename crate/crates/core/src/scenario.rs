//! Run descriptions read from JSON, and seeded random chains for property
//! runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{MAX_TOL, MIN_TOL};
use crate::params::{ChainSpec, TimeFunction};
use crate::spectral::Axis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Simulate,
    Invariants,
    Ermakov,
    Gaussian,
    Oracle2d,
    Pipeline,
    Report,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Simulate,
        Task::Invariants,
        Task::Ermakov,
        Task::Gaussian,
        Task::Oracle2d,
        Task::Pipeline,
        Task::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Invariants => "invariants",
            Task::Ermakov => "ermakov",
            Task::Gaussian => "gaussian",
            Task::Oracle2d => "oracle2d",
            Task::Pipeline => "pipeline",
            Task::Report => "report",
        }
    }

    /// Tasks that need a two-oscillator chain.
    pub fn needs_pair(self) -> bool {
        matches!(self, Task::Oracle2d | Task::Pipeline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Points per axis (power of two).
    pub n: usize,
    /// Full width of each axis, centred on the origin.
    pub extent: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 256, extent: 28.0 }
    }
}

impl GridSpec {
    pub fn axis(&self) -> Result<Axis> {
        Axis::centered(self.n, self.extent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub ode_tol: f64,
    /// Split-step size for grid runs.
    pub dt: f64,
    /// Output sampling interval for time series.
    pub sample: f64,
    pub grid: GridSpec,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ode_tol: 1e-10,
            dt: 1e-3,
            sample: 1e-2,
            grid: GridSpec::default(),
        }
    }
}

/// Product Gaussian used as the initial grid state and, through its mean,
/// as the physical classical trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Packet {
    /// `(x0, y0, px0, py0)`
    pub centre: [f64; 4],
    /// Position spreads `(σx, σy)`.
    pub spread: [f64; 2],
}

impl Default for Packet {
    fn default() -> Self {
        Packet {
            centre: [1.0, -0.5, 0.3, 0.2],
            spread: [std::f64::consts::FRAC_1_SQRT_2; 2],
        }
    }
}

/// Request for a generated chain instead of an explicit one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomChain {
    pub n: usize,
    /// Let Ω² dip below zero (inverted oscillators).
    #[serde(default)]
    pub allow_inverted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomChain>,
    pub window: [f64; 2],
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub packet: Packet,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("scenario: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// The chain to run: the explicit one, or one generated from `seed`.
    pub fn resolve_chain(&self) -> Result<ChainSpec> {
        match (&self.chain, &self.random) {
            (Some(c), None) => c.clone().validate(),
            (None, Some(r)) => {
                let seed = self.seed.ok_or_else(|| {
                    Error::InvalidSpec("a random chain needs a seed".into())
                })?;
                random_chain(seed, r.n, r.allow_inverted)
            }
            (Some(_), Some(_)) => Err(Error::InvalidSpec(
                "give either chain or random, not both".into(),
            )),
            (None, None) => Err(Error::InvalidSpec("scenario has no chain".into())),
        }
    }

    /// Checks everything that can be checked before running; returns the
    /// resolved chain.
    pub fn validate(&self) -> Result<ChainSpec> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        {
            return Err(Error::InvalidSpec(format!(
                "name {:?} must be non-empty and use [A-Za-z0-9._-]",
                self.name
            )));
        }
        let chain = self.resolve_chain()?;
        let [t0, t1] = self.window;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::InvalidSpec(format!(
                "window [{t0}, {t1}] must be finite with t1 > t0"
            )));
        }
        chain.check_window(t0, t1)?;
        let tol = &self.tolerances;
        if !(MIN_TOL..=MAX_TOL).contains(&tol.ode_tol) {
            return Err(Error::InvalidSpec(format!(
                "ode_tol {} outside [{MIN_TOL:e}, {MAX_TOL:e}]",
                tol.ode_tol
            )));
        }
        for (what, v) in [("dt", tol.dt), ("sample", tol.sample)] {
            if !(v > 0.0 && v.is_finite() && v <= t1 - t0) {
                return Err(Error::InvalidSpec(format!(
                    "{what} = {v} must lie in (0, t1 − t0]"
                )));
            }
        }
        tol.grid.axis().map_err(|e| Error::InvalidSpec(e.to_string()))?;
        if self.packet.spread.iter().any(|s| !(*s > 0.0 && s.is_finite()))
            || self.packet.centre.iter().any(|c| !c.is_finite())
        {
            return Err(Error::InvalidSpec("packet needs finite centre and positive spreads".into()));
        }
        if chain.n != 2 {
            if let Some(t) = self.tasks.iter().find(|t| t.needs_pair()) {
                return Err(Error::InvalidSpec(format!(
                    "task {} needs n = 2, chain has n = {}",
                    t.name(),
                    chain.n
                )));
            }
        }
        Ok(chain)
    }
}

/// `c + Σ b_k cos(ω_k t + φ_k)` with `Σ|b_k| ≤ budget`.
fn harmonic_sum(rng: &mut ChaCha8Rng, centre: f64, budget: f64, terms: usize) -> TimeFunction {
    let weights: Vec<f64> = (0..terms).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut parts = vec![TimeFunction::constant(centre)];
    for w in weights {
        let b = budget * w / total * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let omega = rng.random_range(0.2..2.0);
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        parts.push(TimeFunction::harmonic(0.0, b, omega, phi));
    }
    TimeFunction::Sum(parts)
}

/// Seeded chain of `n` oscillators with smooth harmonic-sum coefficients:
/// `Ω_i² ∈ [0.5, 4]` (or `[−1, 4]` when inverted oscillators are allowed)
/// and `η ∈ [−0.5, 0.5]`.
pub fn random_chain(seed: u64, n: usize, allow_inverted: bool) -> Result<ChainSpec> {
    if n == 0 {
        return Err(Error::InvalidSpec("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi): (f64, f64) = if allow_inverted { (-1.0, 4.0) } else { (0.5, 4.0) };
    let omega_sq = (0..n)
        .map(|_| {
            let c = rng.random_range(lo + 0.75..hi - 0.75);
            let budget = 0.95 * (c - lo).min(hi - c);
            harmonic_sum(&mut rng, c, budget, 3)
        })
        .collect();
    let eta = (1..n)
        .map(|_| {
            let c = rng.random_range(-0.25..0.25);
            harmonic_sum(&mut rng, c, 0.95 * (0.5 - f64::abs(c)), 2)
        })
        .collect();
    ChainSpec::new(omega_sq, eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "const-pair",
        "chain": {
            "n": 2,
            "omega_sq": [{"kind": "constant", "params": {"c": 1.0}},
                         {"kind": "constant", "params": {"c": 1.0}}],
            "eta": [{"kind": "constant", "params": {"c": 0.1}}]
        },
        "window": [0.0, 2.0],
        "tasks": ["pipeline", "oracle2d"]
    }"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.tolerances, Tolerances::default());
        assert_eq!(s.tasks, vec![Task::Pipeline, Task::Oracle2d]);
        let chain = s.validate().unwrap();
        assert_eq!(chain.n, 2);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.chain = Some(random_chain(7, 3, false).unwrap());
        s.tasks = vec![Task::Simulate];
        let text = s.to_json();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.chain.as_mut().unwrap().eta.push(TimeFunction::constant(0.0));
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));

        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.window = [1.0, 1.0];
        assert!(s.validate().is_err());

        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.chain = Some(random_chain(1, 3, false).unwrap());
        assert!(s.validate().is_err(), "grid tasks need a pair");

        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.tolerances.grid.n = 100;
        assert!(s.validate().is_err());

        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.random = Some(RandomChain { n: 2, allow_inverted: false });
        assert!(s.validate().is_err());

        assert!(Scenario::from_json(r#"{"name": "x", "window": [0, 1], "bogus": 1}"#).is_err());
    }

    #[test]
    fn random_chain_bounds_and_determinism() {
        for seed in 0..20 {
            let c = random_chain(seed, 4, false).unwrap();
            assert_eq!(c, random_chain(seed, 4, false).unwrap());
            for k in 0..=400 {
                let t = 0.05 * k as f64;
                for f in &c.omega_sq {
                    let v = f.eval(t).unwrap();
                    assert!((0.5..=4.0).contains(&v), "Ω² = {v}");
                }
                for f in &c.eta {
                    assert!(f.eval(t).unwrap().abs() <= 0.5);
                }
            }
        }
        assert_ne!(random_chain(1, 2, false).unwrap(), random_chain(2, 2, false).unwrap());
        assert!(random_chain(0, 0, false).is_err());
    }

    #[test]
    fn seeded_scenario_resolves() {
        let s = Scenario {
            name: "rand".into(),
            chain: None,
            random: Some(RandomChain { n: 3, allow_inverted: true }),
            window: [0.0, 1.0],
            tolerances: Tolerances::default(),
            packet: Packet::default(),
            tasks: vec![Task::Invariants],
            output: None,
            seed: Some(11),
        };
        assert_eq!(s.validate().unwrap(), random_chain(11, 3, true).unwrap());
        let unseeded = Scenario { seed: None, ..s };
        assert!(unseeded.validate().is_err());
    }
}
