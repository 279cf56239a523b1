//! Secret key rates of the coherent-state protocol with BB84 and
//! reference-frame-independent (RFI) parameter estimation, the six-state
//! comparison, RFI drift identities and the repeaterless PLOB bound.
//!
//! Rates are per pulse pair, conditional on both parties choosing Z, without
//! basis-sifting factors.

use serde::{Deserialize, Serialize};

use crate::coherent::{gain_single_arm, sifted_bb84_x, zz_gain_qber, GainQber, SingleArmGains};
use crate::config::{derive_channel, DerivedChannel, SystemParams};
use crate::decoy::{all_slice_c_stats, c1_average, xbasis_bounds, y1_zz_lower, DecoyBounds};
use crate::error::{Error, Result};
use crate::mathcore::binary_entropy_clamped as h;
use crate::montecarlo::true_single_photon_yield;

/// Which single-photon Z yield enters the rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YieldSource {
    /// Decoy-state lower bound (the estimate available in an experiment).
    #[default]
    DecoyLower,
    /// The model's exact value, for diagnostics.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Bb84,
    Rfi,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::Rfi => "rfi",
        }
    }
}

/// Eve's information bound for the RFI statistic `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveInfo {
    pub c_value: f64,
    pub e_zz_b1: f64,
    pub i_e: f64,
    pub u: f64,
    pub v: f64,
}

/// Unclamped quantities behind a rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Intermediates {
    pub q_zz: f64,
    pub e_zz: f64,
    pub y1zz_l: f64,
    pub e_xx_b1u: f64,
    pub c1: Option<f64>,
    pub i_e: Option<f64>,
    pub raw_bb84: Option<f64>,
    pub raw_rfi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub l_km: f64,
    /// Clamped at zero.
    pub rate_bb84: Option<f64>,
    /// Clamped at zero.
    pub rate_rfi: Option<f64>,
    pub rate_plob: f64,
    pub mu_opt: f64,
    pub t_opt: f64,
    pub intermediates: Intermediates,
}

impl KeyRateResult {
    pub fn rate(&self, protocol: Protocol) -> Option<f64> {
        match protocol {
            Protocol::Bb84 => self.rate_bb84,
            Protocol::Rfi => self.rate_rfi,
        }
    }
}

/// `I_E(C)` for Z-basis single-photon error rate `e_b`.
pub fn i_e(c: f64, e_b: f64) -> Result<EveInfo> {
    if !(0.0..=2.0).contains(&c) {
        return Err(Error::OutOfDomain {
            name: "I_E",
            value: c,
            expected: "C in [0, 2]",
        });
    }
    if !(0.0..=1.0).contains(&e_b) {
        return Err(Error::OutOfDomain {
            name: "I_E",
            value: e_b,
            expected: "e_b in [0, 1]",
        });
    }
    let half_c = 0.5 * c;
    if e_b == 0.0 {
        let u = half_c.sqrt().min(1.0);
        return Ok(EveInfo {
            c_value: c,
            e_zz_b1: 0.0,
            i_e: h(0.5 * (1.0 + u)),
            u,
            v: 0.0,
        });
    }
    let u = (half_c.sqrt() / (1.0 - e_b)).min(1.0);
    // v is a correlation and cannot exceed one
    let v = ((half_c - (1.0 - e_b).powi(2) * u * u).max(0.0).sqrt() / e_b).min(1.0);
    Ok(EveInfo {
        c_value: c,
        e_zz_b1: e_b,
        i_e: (1.0 - e_b) * h(0.5 * (1.0 + u)) + e_b * h(0.5 * (1.0 + v)),
        u,
        v,
    })
}

/// Repeaterless bound `-log2(1 - eta)` with `eta = eta_d 10^{-0.02 L}`.
pub fn plob_bound(params: &SystemParams) -> f64 {
    let eta = derive_channel(params).eta_plob;
    -(-eta).ln_1p() / std::f64::consts::LN_2
}

/// RFI statistic for a phase that drifts uniformly over `delta_beta`.
pub fn c_of_drift(delta_beta: f64) -> f64 {
    if delta_beta.abs() < 1e-6 {
        return 2.0;
    }
    let s = (0.5 * delta_beta).sin();
    // 4 (1 - cos d) / d^2 written without cancellation
    8.0 * s * s / (delta_beta * delta_beta)
}

/// Error rates of the four phase-basis pairs for a fixed frame offset `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfiQbers {
    pub e_xx: f64,
    pub e_yy: f64,
    pub e_xy: f64,
    pub e_yx: f64,
}

impl RfiQbers {
    pub fn c_value(&self) -> f64 {
        [self.e_xx, self.e_xy, self.e_yx, self.e_yy]
            .iter()
            .map(|e| (1.0 - 2.0 * e).powi(2))
            .sum()
    }
}

pub fn rfi_qber_identities(beta: f64) -> RfiQbers {
    let (s, c) = beta.sin_cos();
    RfiQbers {
        e_xx: 0.5 * (1.0 - c),
        e_yy: 0.5 * (1.0 - c),
        e_xy: 0.5 * (1.0 + s),
        e_yx: 0.5 * (1.0 - s),
    }
}

/// Probability that bit flip and phase flip occur together.
pub fn keyrate_sixstate_check(e_zz_b1: f64, e_xx_b1: f64, e_yy_b1: f64) -> f64 {
    0.5 * (e_zz_b1 + e_xx_b1 - e_yy_b1)
}

/// Single-photon BB84 rate `1 - H(e_zz) - H(e_xx)`.
pub fn bb84_single_photon_rate(e_zz_b1: f64, e_xx_b1: f64) -> f64 {
    1.0 - h(e_zz_b1) - h(e_xx_b1)
}

/// Single-photon six-state rate for a Pauli channel with bit-error rate
/// `e_zz`, phase-error rate `e_xx` and joint-flip probability from
/// [`keyrate_sixstate_check`].
pub fn sixstate_single_photon_rate(e_zz_b1: f64, e_xx_b1: f64, e_yy_b1: f64) -> f64 {
    let a = keyrate_sixstate_check(e_zz_b1, e_xx_b1, e_yy_b1).max(0.0);
    let phase_given_no_bit = if e_zz_b1 < 1.0 {
        h((e_xx_b1 - a) / (1.0 - e_zz_b1))
    } else {
        0.0
    };
    let phase_given_bit = if e_zz_b1 > 0.0 { h(a / e_zz_b1) } else { 0.0 };
    1.0 - h(e_zz_b1) - (1.0 - e_zz_b1) * phase_given_no_bit - e_zz_b1 * phase_given_bit
}

/// The parts of the key rate that do not depend on `mu` or `t`, evaluated
/// once per parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimates {
    pub params: SystemParams,
    pub channel: DerivedChannel,
    pub single_arm: SingleArmGains,
    pub y1zz_l: f64,
    pub y1_exact: f64,
    pub x_nu: GainQber,
    pub x_omega: GainQber,
    pub x_bounds: DecoyBounds,
    /// Present when RFI statistics were requested.
    pub c1: Option<f64>,
    pub yield_source: YieldSource,
}

impl DecoyEstimates {
    pub fn new(params: &SystemParams, with_rfi: bool) -> Result<Self> {
        let single_arm = gain_single_arm(params);
        let (x_nu, x_omega) = sifted_bb84_x(params)?;
        let x_bounds = xbasis_bounds(&x_nu, &x_omega, single_arm.q_vacuum, params);
        let c1 = if with_rfi {
            let stats = all_slice_c_stats(params)?;
            Some(c1_average(&stats, params.slices)?)
        } else {
            None
        };
        Ok(DecoyEstimates {
            params: *params,
            channel: derive_channel(params),
            single_arm,
            y1zz_l: y1_zz_lower(&single_arm, params),
            y1_exact: true_single_photon_yield(params),
            x_nu,
            x_omega,
            x_bounds,
            c1,
            yield_source: YieldSource::DecoyLower,
        })
    }

    pub fn with_yield_source(self, yield_source: YieldSource) -> Self {
        DecoyEstimates { yield_source, ..self }
    }

    fn y1zz(&self) -> f64 {
        match self.yield_source {
            YieldSource::DecoyLower => self.y1zz_l,
            YieldSource::Exact => self.y1_exact,
        }
    }

    pub fn zz(&self, mu: f64, t: f64) -> GainQber {
        zz_gain_qber(mu, t, self.channel.sqrt_eta, self.params.p_d)
    }

    /// Unclamped rate for a given phase-error leakage `leak` in [0, 1].
    pub fn rate_with_leakage(&self, mu: f64, t: f64, leak: f64) -> f64 {
        let zz = self.zz(mu, t);
        2.0 * t * (1.0 - t) * mu * (-mu).exp() * self.y1zz() * (1.0 - leak) - zz.gain * self.params.f_ec * h(zz.qber)
    }

    pub fn bb84_raw(&self, mu: f64, t: f64) -> f64 {
        self.rate_with_leakage(mu, t, h(self.x_bounds.e1_upper))
    }

    /// Unclamped RFI rate using statistic `c` in place of the estimated one.
    pub fn rfi_raw_with_c(&self, mu: f64, t: f64, c: f64) -> Result<f64> {
        let info = i_e(c.clamp(0.0, 2.0), 0.0)?;
        Ok(self.rate_with_leakage(mu, t, info.i_e))
    }

    pub fn rfi_raw(&self, mu: f64, t: f64) -> Result<f64> {
        let c = self
            .c1
            .ok_or_else(|| Error::MissingSlice("RFI statistics were not computed for these estimates".into()))?;
        self.rfi_raw_with_c(mu, t, c)
    }

    pub fn raw(&self, protocol: Protocol, mu: f64, t: f64) -> Result<f64> {
        match protocol {
            Protocol::Bb84 => Ok(self.bb84_raw(mu, t)),
            Protocol::Rfi => self.rfi_raw(mu, t),
        }
    }

    /// Assemble a result; rates are included for the protocols listed.
    pub fn result(&self, mu: f64, t: f64, protocols: &[Protocol]) -> Result<KeyRateResult> {
        let zz = self.zz(mu, t);
        let mut inter = Intermediates {
            q_zz: zz.gain,
            e_zz: zz.qber,
            y1zz_l: self.y1zz_l,
            e_xx_b1u: self.x_bounds.e1_upper,
            c1: self.c1,
            i_e: match self.c1 {
                Some(c) => Some(i_e(c.clamp(0.0, 2.0), 0.0)?.i_e),
                None => None,
            },
            raw_bb84: None,
            raw_rfi: None,
        };
        let mut out = KeyRateResult {
            l_km: self.params.l_km,
            rate_bb84: None,
            rate_rfi: None,
            rate_plob: plob_bound(&self.params),
            mu_opt: mu,
            t_opt: t,
            intermediates: inter,
        };
        for &p in protocols {
            let raw = self.raw(p, mu, t)?;
            match p {
                Protocol::Bb84 => {
                    inter.raw_bb84 = Some(raw);
                    out.rate_bb84 = Some(raw.max(0.0));
                }
                Protocol::Rfi => {
                    inter.raw_rfi = Some(raw);
                    out.rate_rfi = Some(raw.max(0.0));
                }
            }
        }
        out.intermediates = inter;
        Ok(out)
    }
}

/// BB84 key rate at signal intensity `mu` and bit-1 probability `t`.
pub fn keyrate_bb84(params: &SystemParams, mu: f64, t: f64) -> Result<KeyRateResult> {
    DecoyEstimates::new(params, false)?.result(mu, t, &[Protocol::Bb84])
}

/// RFI key rate at signal intensity `mu` and bit-1 probability `t`, with the
/// Z-basis single-photon error rate taken as zero.
pub fn keyrate_rfi(params: &SystemParams, mu: f64, t: f64) -> Result<KeyRateResult> {
    DecoyEstimates::new(params, true)?.result(mu, t, &[Protocol::Rfi])
}
