//! Gains and error rates of the coherent-state protocol.
//!
//! Two weak coherent pulses meet on a 50:50 beam splitter after each crossed
//! one arm of transmittance `sqrt_eta`; threshold detectors `L` and `R` click
//! with probability `1 - (1 - p_d) exp(-I)` for arriving intensity `I`. A
//! successful announcement is exactly one click. All expressions are written
//! as products of no-click and click probabilities with `expm1` so they stay
//! accurate when the arriving intensities are tiny.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::config::{derive_channel, SystemParams};
use crate::error::{Error, Result};
use crate::mathcore::{bessel_i0_minus_one, integrate_window, PhaseWindow};

/// A gain together with its error-weighted gain `E * Q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainQber {
    pub gain: f64,
    pub qber: f64,
    pub eq_product: f64,
}

impl GainQber {
    /// Build from the gain and the error-weighted gain; the error rate is zero
    /// when the gain is.
    pub fn from_products(gain: f64, eq_product: f64) -> Self {
        let qber = if gain > 0.0 { eq_product / gain } else { 0.0 };
        GainQber { gain, qber, eq_product }
    }
}

/// Value of `(k_B - k_A) mod M` selecting a post-selected set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SliceIndex(u32);

impl SliceIndex {
    pub fn new(k: u32, slices: u32) -> Result<Self> {
        if k < slices {
            Ok(SliceIndex(k))
        } else {
            Err(Error::OutOfDomain {
                name: "slice index",
                value: k as f64,
                expected: "0 <= k < M",
            })
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
}

impl Basis {
    /// 0 for X, 1 for Y; the basis adds `bit * pi/2` to the phase.
    pub fn bit(self) -> u8 {
        match self {
            Basis::X => 0,
            Basis::Y => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisPair {
    pub alice: Basis,
    pub bob: Basis,
}

impl BasisPair {
    pub const XX: BasisPair = BasisPair::new(Basis::X, Basis::X);
    pub const XY: BasisPair = BasisPair::new(Basis::X, Basis::Y);
    pub const YX: BasisPair = BasisPair::new(Basis::Y, Basis::X);
    pub const YY: BasisPair = BasisPair::new(Basis::Y, Basis::Y);
    pub const ALL: [BasisPair; 4] = [Self::XX, Self::XY, Self::YX, Self::YY];

    pub const fn new(alice: Basis, bob: Basis) -> Self {
        BasisPair { alice, bob }
    }

    pub fn label(self) -> &'static str {
        match (self.alice, self.bob) {
            (Basis::X, Basis::X) => "XX",
            (Basis::X, Basis::Y) => "XY",
            (Basis::Y, Basis::X) => "YX",
            (Basis::Y, Basis::Y) => "YY",
        }
    }
}

/// Which decoy intensity both parties send (half of it per arm).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityLevel {
    Nu,
    Omega,
}

impl IntensityLevel {
    /// Total intensity of the pair.
    pub fn total(self, params: &SystemParams) -> f64 {
        match self {
            IntensityLevel::Nu => params.nu,
            IntensityLevel::Omega => params.omega,
        }
    }
}

/// Gains of single-arm and vacuum pulse pairs used for Z-basis decoy bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleArmGains {
    pub q_nu_half: f64,
    pub q_omega_half: f64,
    pub q_vacuum: f64,
}

// 1 - (1 - p_d) e^{-I}
#[inline]
pub(crate) fn click_prob(intensity: f64, p_d: f64) -> f64 {
    p_d - (1.0 - p_d) * (-intensity).exp_m1()
}

#[inline]
fn no_click_prob(intensity: f64, p_d: f64) -> f64 {
    (1.0 - p_d) * (-intensity).exp()
}

/// Relative phase entering the interference term.
pub fn relative_phase(theta_a: f64, theta_b: f64, bp: BasisPair, g_a: u8, g_b: u8) -> f64 {
    theta_b - theta_a + PI * (g_b as f64 - g_a as f64) + FRAC_PI_2 * (bp.bob.bit() as f64 - bp.alice.bit() as f64)
}

/// Gain and error rate for relative phase `x` with per-arm intensities
/// `lambda` (Alice) and `chi` (Bob). The error event is `R` clicking alone.
pub fn phase_gain_qber(x: f64, lambda: f64, chi: f64, sqrt_eta: f64, p_d: f64) -> GainQber {
    let mean = 0.5 * (lambda + chi);
    let cross = (lambda * chi).sqrt() * x.cos();
    let i_l = ((mean + cross) * sqrt_eta).max(0.0);
    let i_r = ((mean - cross) * sqrt_eta).max(0.0);
    let only_r = no_click_prob(i_l, p_d) * click_prob(i_r, p_d);
    let only_l = no_click_prob(i_r, p_d) * click_prob(i_l, p_d);
    GainQber::from_products(only_r + only_l, only_r)
}

#[allow(clippy::too_many_arguments)]
pub fn gain_qber_phase(
    theta_a: f64,
    theta_b: f64,
    lambda: f64,
    chi: f64,
    bp: BasisPair,
    g_a: u8,
    g_b: u8,
    params: &SystemParams,
) -> GainQber {
    let x = relative_phase(theta_a, theta_b, bp, g_a, g_b);
    phase_gain_qber(x, lambda, chi, derive_channel(params).sqrt_eta, params.p_d)
}

/// Z-basis gain and error rate for signal intensity `mu` and bit-1
/// probability `t`. Bob always flips, so equal bits are errors.
pub fn zz_gain_qber(mu: f64, t: f64, sqrt_eta: f64, p_d: f64) -> GainQber {
    let a = mu * sqrt_eta;
    let both_vacuum = 2.0 * p_d * (1.0 - p_d) * (1.0 - t).powi(2);
    let one_pulse = 4.0 * no_click_prob(0.5 * a, p_d) * click_prob(0.5 * a, p_d) * t * (1.0 - t);
    // I0(a) - (1 - p_d) e^{-a}, split to avoid cancellation
    let bracket = bessel_i0_minus_one(a) + click_prob(a, p_d);
    let two_pulses = 2.0 * (1.0 - p_d) * (-a).exp() * bracket * t * t;
    GainQber::from_products(both_vacuum + one_pulse + two_pulses, both_vacuum + two_pulses)
}

/// Z-basis gain and error rate at the intensity and `t` stored in `params`.
pub fn gain_qber_zz(params: &SystemParams) -> GainQber {
    zz_gain_qber(params.mu, params.t, derive_channel(params).sqrt_eta, params.p_d)
}

/// Gain when one party sends `intensity` (per arm) and the other vacuum.
pub fn single_arm_gain(intensity: f64, sqrt_eta: f64, p_d: f64) -> f64 {
    let i = 0.5 * intensity * sqrt_eta;
    2.0 * no_click_prob(i, p_d) * click_prob(i, p_d)
}

pub fn gain_single_arm(params: &SystemParams) -> SingleArmGains {
    let se = derive_channel(params).sqrt_eta;
    SingleArmGains {
        q_nu_half: single_arm_gain(0.5 * params.nu, se, params.p_d),
        q_omega_half: single_arm_gain(0.5 * params.omega, se, params.p_d),
        q_vacuum: 2.0 * params.p_d * (1.0 - params.p_d),
    }
}

/// Gain and error rate averaged over the post-selected set `slice`, with
/// both parties sending half of `level` and logic bits 0.
pub fn sifted_gain_qber(
    slice: SliceIndex,
    bp: BasisPair,
    level: IntensityLevel,
    params: &SystemParams,
) -> Result<GainQber> {
    let ch = derive_channel(params);
    let half = 0.5 * level.total(params);
    let window = PhaseWindow::slice(slice.get(), params.slices, ch.delta0);
    let at = |a: f64, b: f64| phase_gain_qber(relative_phase(a, b, bp, 0, 0), half, half, ch.sqrt_eta, params.p_d);
    let gain = integrate_window(|a, b| at(a, b).gain, &window)?;
    let eq = integrate_window(|a, b| at(a, b).eq_product, &window)?;
    Ok(GainQber::from_products(gain, eq))
}

/// The matched-slice X-basis statistics at the two decoy levels.
///
/// The `M/2` sector gives the same statistics after Bob's flip, so only
/// `k = 0` is integrated.
pub fn sifted_bb84_x(params: &SystemParams) -> Result<(GainQber, GainQber)> {
    let k0 = SliceIndex::new(0, params.slices)?;
    Ok((
        sifted_gain_qber(k0, BasisPair::XX, IntensityLevel::Nu, params)?,
        sifted_gain_qber(k0, BasisPair::XX, IntensityLevel::Omega, params)?,
    ))
}
