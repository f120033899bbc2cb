//! Numerical laboratory for chains of coupled time-dependent harmonic
//! oscillators.
//!
//! Conventions used throughout: ħ = 1, unit masses, phase-space vectors
//! ordered `(x_1..x_n, p_1..p_n)` and the symplectic form
//! `J = [[0, I], [−I, 0]]`, so that `[R_j, R_k] = i J_jk`.

pub mod classical;
pub mod ermakov;
pub mod gaussian;
pub mod grid1d;
pub mod grid2d;
pub mod error;
pub mod ode;
pub mod params;
pub mod quad;
pub mod scenario;
pub mod spectral;

pub use classical::{OscState, PairInvariantReport, Trajectory};
pub use error::{Error, Result};
pub use gaussian::{LinearForm, MomentState};
pub use grid2d::WaveGrid2D;
pub use spectral::Axis;
pub use params::{ChainSpec, TimeFunction};
pub use scenario::{Scenario, Task};
