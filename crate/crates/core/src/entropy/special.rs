//! Special functions used by the estimators (backed by `statrs`).

use std::f64::consts::PI;

pub use statrs::function::gamma::{digamma, ln_gamma};

/// `log V_d`, the log-volume of the unit ball in `d` dimensions.
pub fn ln_unit_ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    half * PI.ln() - ln_gamma(half + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn digamma_reference_values() {
        assert!((digamma(1.0) + EULER_GAMMA).abs() < 1e-10);
        // psi(n) = H_{n-1} - gamma
        let h4 = 1.0 + 0.5 + 1.0 / 3.0 + 0.25;
        assert!((digamma(5.0) - (h4 - EULER_GAMMA)).abs() < 1e-10);
        assert!((digamma(0.5) - (-EULER_GAMMA - 2.0 * 2f64.ln())).abs() < 1e-10);
        for x in [0.3, 1.7, 12.5, 4999.0] {
            assert!((digamma(x + 1.0) - digamma(x) - 1.0 / x).abs() < 1e-10);
        }
    }

    #[test]
    fn ln_gamma_reference_values() {
        assert!(ln_gamma(1.0).abs() < 1e-12);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-10);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-10);
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((ln_unit_ball_volume(1) - 2f64.ln()).abs() < 1e-12);
        assert!((ln_unit_ball_volume(2) - PI.ln()).abs() < 1e-12);
        assert!((ln_unit_ball_volume(3) - (4.0 * PI / 3.0).ln()).abs() < 1e-12);
    }
}
