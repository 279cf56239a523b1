//! Decoy-state bounds on single-photon yields and error rates, for the Z
//! basis (single-arm decoys), for the matched X slice, and per post-selected
//! set `D_k` together with the clamped `C_k` statistic.
//!
//! Bound order: raw estimates, then yields clamped to [0, 1], then error
//! rates clamped to [0, 1], then the 1/2-piecewise choice for `C_k`.

use serde::{Deserialize, Serialize};

use crate::coherent::{
    gain_single_arm, sifted_gain_qber, BasisPair, GainQber, IntensityLevel, SingleArmGains, SliceIndex,
};
use crate::config::SystemParams;
use crate::error::{Error, Result};

/// Error rate of the vacuum component in the phase-encoding bases.
pub const VACUUM_QBER: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub y1_lower: f64,
    pub y1_upper: f64,
    pub e1_lower: f64,
    pub e1_upper: f64,
    /// The yield lower bound was not positive, so `e1_upper` is the worst case.
    pub vacuous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceCStat {
    pub k: SliceIndex,
    pub e_xx: f64,
    pub e_xy: f64,
    pub e_yx: f64,
    pub e_yy: f64,
    pub c1_k: f64,
}

fn unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Two-decoy lower bound on the one-photon term of a Poisson mixture.
///
/// `strong`, `weak` are mean photon numbers and `g_*` the observed
/// (error-weighted) gains; `vacuum` is the zero-photon contribution.
fn poisson_one_photon_lower(strong: f64, weak: f64, g_strong: f64, g_weak: f64, vacuum: f64) -> f64 {
    let r = weak * weak / (strong * strong);
    strong / (strong * weak - weak * weak) * (weak.exp() * g_weak - r * strong.exp() * g_strong - (1.0 - r) * vacuum)
}

/// Lower bound on the one-photon yield of the Z basis from single-arm decoys.
pub fn y1_zz_lower(gains: &SingleArmGains, params: &SystemParams) -> f64 {
    unit(y1_zz_lower_raw(gains, params))
}

/// Unclamped [`y1_zz_lower`].
pub fn y1_zz_lower_raw(gains: &SingleArmGains, params: &SystemParams) -> f64 {
    poisson_one_photon_lower(
        0.5 * params.nu,
        0.5 * params.omega,
        gains.q_nu_half,
        gains.q_omega_half,
        gains.q_vacuum,
    )
}

/// Upper bound on the one-photon Z-basis yield from the weaker decoy.
pub fn y1_zz_upper(gains: &SingleArmGains, params: &SystemParams) -> f64 {
    let w = 0.5 * params.omega;
    unit((w.exp() * gains.q_omega_half - gains.q_vacuum) / w)
}

/// The vacuum yield is observed directly.
pub fn y0_zz(gains: &SingleArmGains) -> f64 {
    gains.q_vacuum
}

/// Yield and error-rate bounds from phase-encoded statistics at total
/// intensities `nu` and `omega`.
pub fn xbasis_bounds(gq_nu: &GainQber, gq_omega: &GainQber, q_vacuum: f64, params: &SystemParams) -> DecoyBounds {
    let (nu, omega) = (params.nu, params.omega);
    let y_lower = poisson_one_photon_lower(nu, omega, gq_nu.gain, gq_omega.gain, q_vacuum);
    let y_upper = (omega.exp() * gq_omega.gain - q_vacuum) / omega;
    let err_weighted_lower =
        poisson_one_photon_lower(nu, omega, gq_nu.eq_product, gq_omega.eq_product, VACUUM_QBER * q_vacuum);
    let err_weighted_upper = (omega.exp() * gq_omega.eq_product - VACUUM_QBER * q_vacuum) / omega;

    let y1_lower = unit(y_lower);
    let y1_upper = unit(y_upper);
    let vacuous = y1_lower <= 0.0;
    let e1_upper = if vacuous {
        1.0
    } else {
        unit(err_weighted_upper / y1_lower)
    };
    let e1_lower = if y1_upper <= 0.0 {
        0.0
    } else {
        unit(err_weighted_lower / y1_upper)
    };
    DecoyBounds {
        y1_lower,
        y1_upper,
        e1_lower,
        e1_upper,
        vacuous,
    }
}

/// The error rate inside `[e1_lower, e1_upper]` closest to 1/2, which
/// minimizes `(1 - 2e)^2`.
pub fn effective_qber(lower: f64, upper: f64) -> f64 {
    if upper <= 0.5 {
        upper
    } else if lower >= 0.5 {
        lower
    } else {
        0.5
    }
}

fn c_term(e: f64) -> f64 {
    (1.0 - 2.0 * e).powi(2)
}

pub fn slice_c_stat(k: SliceIndex, params: &SystemParams) -> Result<SliceCStat> {
    let q_vacuum = gain_single_arm(params).q_vacuum;
    let mut e = [0.0; 4];
    for (slot, bp) in e.iter_mut().zip(BasisPair::ALL) {
        let nu = sifted_gain_qber(k, bp, IntensityLevel::Nu, params)?;
        let omega = sifted_gain_qber(k, bp, IntensityLevel::Omega, params)?;
        let b = xbasis_bounds(&nu, &omega, q_vacuum, params);
        *slot = effective_qber(b.e1_lower, b.e1_upper);
    }
    Ok(SliceCStat {
        k,
        e_xx: e[0],
        e_xy: e[1],
        e_yx: e[2],
        e_yy: e[3],
        c1_k: e.iter().map(|&x| c_term(x)).sum(),
    })
}

/// [`slice_c_stat`] for every `k` in order.
pub fn all_slice_c_stats(params: &SystemParams) -> Result<Vec<SliceCStat>> {
    let ks: Vec<u32> = (0..params.slices).collect();
    let one = |&k: &u32| slice_c_stat(SliceIndex::new(k, params.slices)?, params);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ks.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ks.iter().map(one).collect()
    }
}

/// Mean of `c1_k` over exactly one statistic per slice.
pub fn c1_average(stats: &[SliceCStat], slices: u32) -> Result<f64> {
    if stats.len() != slices as usize {
        return Err(Error::MissingSlice(format!(
            "expected {slices} slices, got {}",
            stats.len()
        )));
    }
    let mut seen = vec![false; slices as usize];
    for s in stats {
        let k = s.k.get() as usize;
        if k >= seen.len() || seen[k] {
            return Err(Error::MissingSlice(format!("slice {k} duplicated or out of range")));
        }
        seen[k] = true;
    }
    Ok(stats.iter().map(|s| s.c1_k).sum::<f64>() / slices as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::sifted_bb84_x;
    use crate::config::{derive_channel, Preset};
    use crate::montecarlo::{true_single_photon_qber, true_single_photon_yield};

    #[test]
    fn piecewise_clamp_rule() {
        assert_eq!(effective_qber(0.1, 0.2), 0.2);
        assert_eq!(effective_qber(0.4, 0.6), 0.5);
        assert_eq!(c_term(effective_qber(0.4, 0.6)), 0.0);
        assert_eq!(effective_qber(0.7, 0.9), 0.7);
    }

    #[test]
    fn z_vacuum_yield_is_observed_gain() {
        let p = Preset::Fig3.params();
        let g = gain_single_arm(&p);
        assert_eq!(y0_zz(&g), 2.0 * p.p_d * (1.0 - p.p_d));
    }

    #[test]
    fn z_bounds_vanish_without_clicks() {
        let p = crate::config::SystemParams {
            p_d: 0.0,
            ..Preset::Fig3.params().with_distance(5000.0)
        };
        let g = gain_single_arm(&p);
        assert!(y1_zz_lower(&g, &p) < 1e-40);
        assert!(true_single_photon_yield(&p) < 1e-40);
    }

    #[test]
    fn z_lower_bound_below_truth_on_distance_grid() {
        for pre in Preset::ALL {
            for l in [0.0, 50.0, 100.0, 200.0, 300.0, 400.0, 500.0, 700.0] {
                let p = pre.params().with_distance(l);
                let g = gain_single_arm(&p);
                let truth = true_single_photon_yield(&p);
                assert!(y1_zz_lower(&g, &p) <= truth, "{pre} L={l}");
                assert!(y1_zz_upper(&g, &p) >= truth, "{pre} L={l}");
            }
        }
    }

    #[test]
    fn ideal_channel_has_no_phase_error() {
        let p = crate::config::SystemParams {
            p_d: 0.0,
            e_opt: 0.0,
            slices: 2048,
            ..Preset::Fig3.params().with_distance(50.0)
        };
        let (nu, omega) = sifted_bb84_x(&p).unwrap();
        let b = xbasis_bounds(&nu, &omega, 0.0, &p);
        assert!(b.e1_upper < 1e-5, "{b:?}");
    }

    #[test]
    fn vacuous_when_dark_counts_dominate() {
        let p = Preset::Fig3.params().with_distance(900.0);
        let (nu, omega) = sifted_bb84_x(&p).unwrap();
        // a vacuum gain above the decoy gains leaves nothing to attribute to single photons
        let b = xbasis_bounds(&nu, &omega, 10.0 * nu.gain, &p);
        assert!(b.vacuous);
        assert_eq!(b.e1_upper, 1.0);
        assert_eq!(b.y1_lower, 0.0);
    }

    #[test]
    fn x_bounds_bracket_truth() {
        for l in [50.0, 150.0, 300.0] {
            for e_opt in [0.0, 0.03, 0.15] {
                let p = crate::config::SystemParams {
                    e_opt,
                    ..Preset::Fig3.params().with_distance(l)
                };
                let q0 = gain_single_arm(&p).q_vacuum;
                for k in [0, 3, 8] {
                    let k = SliceIndex::new(k, p.slices).unwrap();
                    let nu = sifted_gain_qber(k, BasisPair::XX, IntensityLevel::Nu, &p).unwrap();
                    let om = sifted_gain_qber(k, BasisPair::XX, IntensityLevel::Omega, &p).unwrap();
                    let b = xbasis_bounds(&nu, &om, q0, &p);
                    let y = true_single_photon_yield(&p);
                    let e = true_single_photon_qber(k, BasisPair::XX, &p).unwrap();
                    assert!(b.y1_lower <= y && y <= b.y1_upper, "{b:?} y={y}");
                    assert!(b.e1_lower <= e && e <= b.e1_upper, "{b:?} e={e}");
                }
            }
        }
    }

    #[test]
    fn c_stat_sum_of_terms() {
        let p = Preset::Fig4.params().with_distance(200.0);
        let s = slice_c_stat(SliceIndex::new(2, 16).unwrap(), &p).unwrap();
        let sum = c_term(s.e_xx) + c_term(s.e_xy) + c_term(s.e_yx) + c_term(s.e_yy);
        assert_eq!(s.c1_k, sum);
        assert!((0.0..=4.0).contains(&s.c1_k));
    }

    #[test]
    fn c1_average_checks_cardinality() {
        let mk = |k: u32, c: f64| SliceCStat {
            k: SliceIndex::new(k, 4).unwrap(),
            e_xx: 0.5,
            e_xy: 0.5,
            e_yx: 0.5,
            e_yy: 0.5,
            c1_k: c,
        };
        let all2: Vec<_> = (0..4).map(|k| mk(k, 2.0)).collect();
        assert_eq!(c1_average(&all2, 4).unwrap(), 2.0);
        let zeros: Vec<_> = (0..4).map(|k| mk(k, 0.0)).collect();
        assert_eq!(c1_average(&zeros, 4).unwrap(), 0.0);
        assert!(c1_average(&all2[..3], 4).is_err());
        let dup = vec![mk(0, 2.0), mk(0, 2.0), mk(2, 2.0), mk(3, 2.0)];
        assert!(c1_average(&dup, 4).is_err());
    }

    #[test]
    fn c1_approaches_two_for_ideal_fixed_phase() {
        let p = crate::config::SystemParams {
            p_d: 0.0,
            e_opt: 0.0,
            slices: 512,
            nu: 0.002,
            omega: 0.0005,
            ..Preset::Fig4.params().with_distance(20.0)
        };
        // a subset of slices suffices: every slice is ideal in this limit
        let c: f64 = (0..512)
            .step_by(37)
            .map(|k| slice_c_stat(SliceIndex::new(k, 512).unwrap(), &p).unwrap().c1_k)
            .sum::<f64>()
            / (0..512).step_by(37).count() as f64;
        assert!((c - 2.0).abs() < 5e-3, "{c}");
        let _ = derive_channel(&p);
    }

    #[test]
    fn c_multiset_invariant_under_phase_relabeling() {
        // moving Bob's offset by one slice width relabels k -> k + 1
        let p = Preset::Fig4.params().with_distance(250.0);
        let width = 2.0 * std::f64::consts::PI / p.slices as f64;
        let d0 = derive_channel(&p).delta0;
        let moved = crate::config::SystemParams {
            e_opt: (1.0 - (d0 + width).cos()) / 2.0,
            ..p
        };
        assert!((derive_channel(&moved).delta0 - (d0 + width)).abs() < 1e-9);

        let base: Vec<f64> = all_slice_c_stats(&p).unwrap().iter().map(|s| s.c1_k).collect();
        let shifted: Vec<f64> = all_slice_c_stats(&moved).unwrap().iter().map(|s| s.c1_k).collect();
        for k in 0..p.slices as usize {
            let next = base[(k + 1) % base.len()];
            assert!((shifted[k] - next).abs() < 1e-9, "k={k}: {} vs {next}", shifted[k]);
        }
        let c1 = c1_average(&all_slice_c_stats(&p).unwrap(), p.slices).unwrap();
        assert!((0.0..=2.0).contains(&c1), "{c1}");
    }
}
