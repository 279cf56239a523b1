//! Virtual single-photon protocol: BSM success probabilities by photon number
//! of the joint state, and the resulting key rate with GLLP-style tagging.

use serde::{Deserialize, Serialize};

use crate::config::{derive_channel, SystemParams};
use crate::mathcore::binary_entropy_clamped;
use crate::optimize::{argmax_first, golden_section_max, linspace};

/// Search interval for the partial beam-splitter transmittance.
pub const T_SEARCH: (f64, f64) = (1e-4, 0.5);
const T_GRID_POINTS: usize = 64;

/// Successful-BSM probabilities for zero, one and two photons in the joint
/// state, each weighted by its preparation probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsmMixture {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q: f64,
    pub e_zz: f64,
}

impl BsmMixture {
    /// Mixture weights q_i / q.
    pub fn weights(&self) -> [f64; 3] {
        if self.q > 0.0 {
            [self.q0 / self.q, self.q1 / self.q, self.q2 / self.q]
        } else {
            [0.0; 3]
        }
    }
}

/// Success probability of the BSM when exactly one photon enters the
/// channel, per unit preparation weight.
pub fn single_photon_success(sqrt_eta: f64, p_d: f64) -> f64 {
    p_d * (1.0 - p_d) * (1.0 - sqrt_eta) + (1.0 - p_d) * (1.0 - (1.0 - p_d) * (1.0 - sqrt_eta))
}

pub fn bsm_mixture(t: f64, sqrt_eta: f64, p_d: f64) -> BsmMixture {
    let loss = 1.0 - sqrt_eta;
    let q0 = 2.0 * (1.0 - t).powi(2) * p_d * (1.0 - p_d);
    let q1 = 2.0 * t * (1.0 - t) * single_photon_success(sqrt_eta, p_d);
    let q2 = t * t * (p_d * (1.0 - p_d) * loss * loss + (1.0 - p_d) * (1.0 - (1.0 - p_d) * loss * loss));
    let q = q0 + q1 + q2;
    let e_zz = if q > 0.0 { (q0 + q2) / q } else { 0.0 };
    BsmMixture { q0, q1, q2, q, e_zz }
}

/// Key rate from single-photon events when the X-basis single-photon error
/// rate is known. Not clamped; negative values mean no key.
pub fn keyrate_eq2(m: &BsmMixture, e_xx_b1: f64) -> f64 {
    m.q1 * (1.0 - binary_entropy_clamped(e_xx_b1)) - m.q * binary_entropy_clamped(m.e_zz)
}

/// Key rate when single-photon events can be located directly; the Z-basis
/// single-photon error rate is identically zero so only the X term remains.
pub fn keyrate_photon_resolved(m: &BsmMixture, e_xx_b1: f64) -> f64 {
    m.q1 * (1.0 - binary_entropy_clamped(e_xx_b1))
}

/// Transmittance `t` maximizing [`keyrate_eq2`] and the rate there.
///
/// A 64-point grid over [`T_SEARCH`] picks the bracket; golden-section search
/// refines it. Ties resolve to the smaller `t`.
pub fn optimal_t_eq2(params: &SystemParams, e_xx_b1: f64) -> (f64, f64) {
    let ch = derive_channel(params);
    let rate = |t: f64| keyrate_eq2(&bsm_mixture(t, ch.sqrt_eta, params.p_d), e_xx_b1);

    let grid = linspace(T_SEARCH.0, T_SEARCH.1, T_GRID_POINTS);
    let (i, best) = argmax_first(grid.iter().map(|&t| rate(t))).expect("non-empty grid");
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let (t, r) = golden_section_max(rate, lo, hi, 1e-10);
    if r > best {
        (t, r)
    } else {
        (grid[i], best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn closed_form_values() {
        let m = bsm_mixture(0.08, 0.04, 1e-6);
        // direct high-precision evaluation of the closed forms
        assert_relative_eq!(m.q0, 1.692_798_307_2e-6, max_relative = 1e-12);
        assert_relative_eq!(m.q1, 5.888_276_735_717_376e-3, max_relative = 1e-12);
        assert_relative_eq!(m.q2, 5.017_712_947_082_035e-4, max_relative = 1e-12);
    }

    #[test]
    fn lossless_dark_free_limit() {
        let t = 0.3;
        let m = bsm_mixture(t, 1.0, 0.0);
        assert_eq!(m.q0, 0.0);
        assert_relative_eq!(m.q1, 2.0 * t * (1.0 - t), max_relative = 1e-15);
        assert_relative_eq!(m.q2, t * t, max_relative = 1e-15);
    }

    #[test]
    fn single_photon_rate_limits() {
        let m = bsm_mixture(0.2, 1.0, 0.0);
        // q2 != 0 here, so build the pure single-photon case by hand
        let pure = BsmMixture {
            q0: 0.0,
            q2: 0.0,
            q: m.q1,
            e_zz: 0.0,
            ..m
        };
        assert_eq!(keyrate_eq2(&pure, 0.0), pure.q1);

        let m = bsm_mixture(0.08, 0.04, 1e-6);
        let r = keyrate_eq2(&m, 0.5);
        assert_relative_eq!(r, -m.q * binary_entropy_clamped(m.e_zz), max_relative = 1e-14);
        assert!(r <= 0.0);
        assert_eq!(keyrate_photon_resolved(&m, 0.0), m.q1);
    }

    #[test]
    fn optimal_t_near_eight_percent() {
        let base = Preset::Eq2Demo.params();
        for l in [100.0, 150.0, 200.0] {
            let (t, r) = optimal_t_eq2(&base.with_distance(l), 0.03);
            assert!((0.06..=0.10).contains(&t), "L={l}: t*={t}");
            assert!(r > 0.0);
        }
    }

    #[test]
    fn optimal_t_with_useless_phase_errors() {
        let p = Preset::Eq2Demo.params();
        let (_, r) = optimal_t_eq2(&p, 0.5);
        assert!(r <= 0.0);
        for t in linspace(0.001, 0.999, 50) {
            let m = bsm_mixture(t, 0.04, 1e-6);
            assert!(keyrate_eq2(&m, 0.5) <= 0.0);
        }
    }

    #[test]
    fn weights_normalize_on_grid() {
        for t in linspace(0.01, 0.99, 10) {
            for se in linspace(1e-5, 1.0, 10) {
                for pd in [0.0, 1e-7, 1e-3] {
                    let m = bsm_mixture(t, se, pd);
                    assert!(m.q0 >= 0.0 && m.q1 >= 0.0 && m.q2 >= 0.0);
                    let s: f64 = m.weights().iter().sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn per_photon_success_independent_of_t(t1 in 0.001f64..0.999, t2 in 0.001f64..0.999,
                                               se in 1e-6f64..1.0, pd in 0.0f64..1e-3) {
            let a = bsm_mixture(t1, se, pd);
            let b = bsm_mixture(t2, se, pd);
            let ya = a.q1 / (2.0 * t1 * (1.0 - t1));
            let yb = b.q1 / (2.0 * t2 * (1.0 - t2));
            prop_assert!((ya - yb).abs() <= 1e-12 * ya);
        }

        #[test]
        fn rate_nonincreasing_in_phase_error(t in 0.01f64..0.5, se in 1e-4f64..1.0,
                                            e1 in 0.0f64..0.5, e2 in 0.0f64..0.5) {
            let m = bsm_mixture(t, se, 1e-6);
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(keyrate_eq2(&m, hi) <= keyrate_eq2(&m, lo));
        }
    }
}
