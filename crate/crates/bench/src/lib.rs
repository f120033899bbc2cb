//! Fixtures shared by the benchmarks.

use tdho_core::grid2d::WaveGrid2D;
use tdho_core::spectral::Axis;
use tdho_core::{ChainSpec, TimeFunction};

/// The fully time-dependent coupled pair.
pub fn driven_pair() -> ChainSpec {
    ChainSpec::pair(
        TimeFunction::sine(1.0, 0.2, 1.0),
        TimeFunction::harmonic(1.5, 0.1, 2.0, 0.0),
        TimeFunction::sine(0.05, 0.05, 0.7),
    )
}

/// Coherent packet on an `n × n` grid wide enough for the pipeline.
pub fn packet(n: usize) -> WaveGrid2D {
    let axis = Axis::centered(n, 28.0).expect("power-of-two grid");
    WaveGrid2D::gaussian(axis, axis, [1.0, -0.5, 0.3, 0.2], [std::f64::consts::FRAC_1_SQRT_2; 2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_valid() {
        assert!(driven_pair().check().is_ok());
        let p = packet(64);
        assert!((p.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(p.check_boundary("fixture").is_ok());
    }
}
