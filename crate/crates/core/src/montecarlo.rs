//! Photon-level sampling of pulse pairs through the lossy arms, the beam
//! splitter and two threshold detectors.
//!
//! Fields are added as complex amplitudes at the beam splitter and each
//! detector clicks independently with probability `1 - (1 - p_d) exp(-I)`.
//! None of the closed-form gain expressions are used here, so every estimate
//! is an independent check of the analytic model.
//!
//! Work is split into a fixed number of chunks, each driven by its own
//! ChaCha8 stream of the master seed, so results do not depend on the number
//! of threads.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coherent::{BasisPair, IntensityLevel, SliceIndex};
use crate::config::{derive_channel, SystemParams};
use crate::error::{Error, Result};
use crate::mathcore::{integrate_window, PhaseWindow};

/// Smallest sample count accepted by the estimators.
pub const MIN_SAMPLES: u64 = 10_000;

const CHUNKS: u64 = 16;

/// Draws allowed per accepted sample in post-selected estimates, in units of
/// the slice count.
const DRAWS_PER_ACCEPT_PER_SLICE: u64 = 64;

/// Bernoulli estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n_samples: u64,
}

impl McEstimate {
    pub fn from_counts(hits: u64, n: u64) -> Self {
        if n == 0 {
            return McEstimate {
                mean: 0.0,
                std_err: 0.0,
                n_samples: 0,
            };
        }
        let mean = hits as f64 / n as f64;
        McEstimate {
            mean,
            std_err: (mean * (1.0 - mean) / n as f64).sqrt(),
            n_samples: n,
        }
    }

    /// Distance from `expected` in units of the binomial standard error
    /// implied by `expected` itself.
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = (self.mean - expected).abs();
        if diff == 0.0 {
            return 0.0;
        }
        if self.n_samples == 0 {
            return f64::INFINITY;
        }
        let sigma = (expected * (1.0 - expected) / self.n_samples as f64).sqrt();
        if sigma > 0.0 {
            diff / sigma
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainQberEstimate {
    pub gain: McEstimate,
    pub qber: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftedEstimate {
    pub gain: McEstimate,
    pub qber: McEstimate,
    /// Fraction of drawn pairs that landed in the requested set.
    pub acceptance: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BsmOutcome {
    PsiPlus,
    PsiMinus,
    None,
}

/// One simulated pulse pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePairSample {
    pub theta_a: f64,
    pub theta_b: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub h_a: u8,
    pub h_b: u8,
    pub g_a: u8,
    pub g_b: u8,
    pub k_a: u32,
    pub k_b: u32,
    pub click_l: bool,
    pub click_r: bool,
    pub bsm_success: bool,
    pub bsm_which: BsmOutcome,
}

impl PulsePairSample {
    /// The announced relation is "equal bits" on `L` and "different bits" on
    /// `R`; an error is a success that contradicts the prepared bits.
    pub fn is_error(&self) -> bool {
        match self.bsm_which {
            BsmOutcome::PsiPlus => self.g_a != self.g_b,
            BsmOutcome::PsiMinus => self.g_a == self.g_b,
            BsmOutcome::None => false,
        }
    }
}

/// Slice containing `theta`, for `theta` in [0, 2*pi).
pub fn slice_of(theta: f64, slices: u32) -> u32 {
    ((theta * slices as f64 / TAU) as u32).min(slices - 1)
}

/// Intensities at the `L` and `R` outputs of the beam splitter.
///
/// Each input is the coherent amplitude `sqrt(lambda * sqrt_eta) e^{i phi}`;
/// the outputs are `(a + b) / sqrt(2)` and `(a - b) / sqrt(2)`.
pub fn output_intensities(lambda_a: f64, phi_a: f64, lambda_b: f64, phi_b: f64, sqrt_eta: f64) -> (f64, f64) {
    let ra = (lambda_a * sqrt_eta).sqrt();
    let rb = (lambda_b * sqrt_eta).sqrt();
    let (ax, ay) = (ra * phi_a.cos(), ra * phi_a.sin());
    let (bx, by) = (rb * phi_b.cos(), rb * phi_b.sin());
    let l = 0.5 * ((ax + bx).powi(2) + (ay + by).powi(2));
    let r = 0.5 * ((ax - bx).powi(2) + (ay - by).powi(2));
    (l, r)
}

/// Sample the two threshold detectors.
pub fn sample_detection<R: Rng + ?Sized>(alpha_l_sq: f64, alpha_r_sq: f64, p_d: f64, rng: &mut R) -> (bool, bool) {
    let click = |i: f64, rng: &mut R| {
        // no click needs both "no photon" and "no dark count"
        let silent = (1.0 - p_d) * (-i).exp();
        rng.random::<f64>() >= silent
    };
    let l = click(alpha_l_sq, rng);
    let r = click(alpha_r_sq, rng);
    (l, r)
}

fn bsm(click_l: bool, click_r: bool) -> BsmOutcome {
    match (click_l, click_r) {
        (true, false) => BsmOutcome::PsiPlus,
        (false, true) => BsmOutcome::PsiMinus,
        _ => BsmOutcome::None,
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunk_sizes(total: u64) -> Vec<(u64, u64)> {
    (0..CHUNKS)
        .map(|c| (c, total / CHUNKS + u64::from(c < total % CHUNKS)))
        .collect()
}

fn map_chunks<T, F>(total: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    let sizes = chunk_sizes(total);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        sizes.par_iter().map(|&(c, n)| f(c, n)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        sizes.iter().map(|&(c, n)| f(c, n)).collect()
    }
}

fn check_samples(n: u64) -> Result<()> {
    if n < MIN_SAMPLES {
        Err(Error::OutOfDomain {
            name: "sample count",
            value: n as f64,
            expected: "at least 10000",
        })
    } else {
        Ok(())
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    drawn: u64,
    accepted: u64,
    success: u64,
    error: u64,
}

impl Tally {
    fn add(mut self, o: Tally) -> Tally {
        self.drawn += o.drawn;
        self.accepted += o.accepted;
        self.success += o.success;
        self.error += o.error;
        self
    }

    fn record(&mut self, s: &PulsePairSample) {
        self.accepted += 1;
        if s.bsm_success {
            self.success += 1;
            if s.is_error() {
                self.error += 1;
            }
        }
    }

    fn estimate(&self) -> GainQberEstimate {
        GainQberEstimate {
            gain: McEstimate::from_counts(self.success, self.accepted),
            qber: McEstimate::from_counts(self.error, self.success),
        }
    }
}

/// Everything needed to push one pulse pair through the setup.
#[derive(Debug, Clone, Copy)]
struct Emission {
    theta_a: f64,
    theta_b: f64,
    lambda_a: f64,
    lambda_b: f64,
    h_a: u8,
    h_b: u8,
    g_a: u8,
    g_b: u8,
}

struct Setup {
    sqrt_eta: f64,
    p_d: f64,
    delta0: f64,
    slices: u32,
}

impl Setup {
    fn new(params: &SystemParams) -> Self {
        let ch = derive_channel(params);
        Setup {
            sqrt_eta: ch.sqrt_eta,
            p_d: params.p_d,
            delta0: ch.delta0,
            slices: params.slices,
        }
    }

    /// Phase-encoded pulses carry `pi * g + pi/2 * h` on top of the random
    /// phase; Bob's field additionally picks up the misalignment offset.
    fn run<R: Rng>(&self, e: Emission, rng: &mut R) -> PulsePairSample {
        let phi_a = e.theta_a + PI * e.g_a as f64 + FRAC_PI_2 * e.h_a as f64;
        let phi_b = e.theta_b + self.delta0 + PI * e.g_b as f64 + FRAC_PI_2 * e.h_b as f64;
        let (il, ir) = output_intensities(e.lambda_a, phi_a, e.lambda_b, phi_b, self.sqrt_eta);
        let (click_l, click_r) = sample_detection(il, ir, self.p_d, rng);
        let which = bsm(click_l, click_r);
        PulsePairSample {
            theta_a: e.theta_a,
            theta_b: e.theta_b,
            lambda_a: e.lambda_a,
            lambda_b: e.lambda_b,
            h_a: e.h_a,
            h_b: e.h_b,
            g_a: e.g_a,
            g_b: e.g_b,
            k_a: slice_of(e.theta_a, self.slices),
            k_b: slice_of(e.theta_b, self.slices),
            click_l,
            click_r,
            bsm_success: which != BsmOutcome::None,
            bsm_which: which,
        }
    }
}

/// Z-basis gain and error rate at `params.mu`, `params.t`.
///
/// Each party sends intensity `mu` (bit 1) with probability `t`, else vacuum
/// (bit 0), with uniform random phase. Bob flips every Z bit, so a success
/// with equal prepared bits is an error.
pub fn estimate_gain_qber_zz(params: &SystemParams, n: u64, seed: u64) -> Result<GainQberEstimate> {
    check_samples(n)?;
    let setup = Setup::new(params);
    let (mu, t) = (params.mu, params.t);
    let tallies = map_chunks(n, |chunk, count| {
        let mut rng = chunk_rng(seed, chunk);
        let mut tally = Tally::default();
        for _ in 0..count {
            let g_a = u8::from(rng.random::<f64>() < t);
            let g_b = u8::from(rng.random::<f64>() < t);
            let e = Emission {
                theta_a: rng.random::<f64>() * TAU,
                theta_b: rng.random::<f64>() * TAU,
                lambda_a: mu * g_a as f64,
                lambda_b: mu * g_b as f64,
                h_a: 0,
                h_b: 0,
                g_a: 0,
                g_b: 0,
            };
            // Z bits are carried by intensity, not phase
            let s = setup.run(e, &mut rng);
            tally.drawn += 1;
            tally.accepted += 1;
            if s.bsm_success {
                tally.success += 1;
                if g_a == g_b {
                    tally.error += 1;
                }
            }
        }
        tally
    });
    Ok(tallies.into_iter().fold(Tally::default(), Tally::add).estimate())
}

/// Gain and error rate at fixed random phases `theta_a`, `theta_b` (before the
/// misalignment offset), per-arm intensities and logic bits.
#[allow(clippy::too_many_arguments)]
pub fn estimate_phase(
    params: &SystemParams,
    theta_a: f64,
    theta_b: f64,
    lambda: f64,
    chi: f64,
    bp: BasisPair,
    g_a: u8,
    g_b: u8,
    n: u64,
    seed: u64,
) -> Result<GainQberEstimate> {
    check_samples(n)?;
    let setup = Setup {
        delta0: 0.0,
        ..Setup::new(params)
    };
    let e = Emission {
        theta_a,
        theta_b,
        lambda_a: lambda,
        lambda_b: chi,
        h_a: bp.alice.bit(),
        h_b: bp.bob.bit(),
        g_a,
        g_b,
    };
    let tallies = map_chunks(n, |chunk, count| {
        let mut rng = chunk_rng(seed, chunk);
        let mut tally = Tally::default();
        for _ in 0..count {
            let s = setup.run(e, &mut rng);
            tally.drawn += 1;
            tally.record(&s);
        }
        tally
    });
    Ok(tallies.into_iter().fold(Tally::default(), Tally::add).estimate())
}

/// Gain and error rate in the post-selected set `(k_B - k_A) mod M = slice`.
///
/// Phases and logic bits are uniform; pairs outside the set are discarded
/// until `n_accepted` pairs are kept.
pub fn estimate_sifted(
    params: &SystemParams,
    slice: SliceIndex,
    bp: BasisPair,
    level: IntensityLevel,
    n_accepted: u64,
    seed: u64,
) -> Result<SiftedEstimate> {
    check_samples(n_accepted)?;
    let setup = Setup::new(params);
    let m = params.slices;
    let half = 0.5 * level.total(params);
    let per_accept_budget = DRAWS_PER_ACCEPT_PER_SLICE * m as u64;
    let tallies = map_chunks(n_accepted, |chunk, target| {
        let mut rng = chunk_rng(seed, chunk);
        let mut tally = Tally::default();
        let budget = target.saturating_mul(per_accept_budget).max(per_accept_budget);
        while tally.accepted < target && tally.drawn < budget {
            let theta_a = rng.random::<f64>() * TAU;
            let theta_b = rng.random::<f64>() * TAU;
            let g_a = u8::from(rng.random::<bool>());
            let g_b = u8::from(rng.random::<bool>());
            tally.drawn += 1;
            let (k_a, k_b) = (slice_of(theta_a, m), slice_of(theta_b, m));
            if (k_b + m - k_a) % m != slice.get() {
                continue;
            }
            let e = Emission {
                theta_a,
                theta_b,
                lambda_a: half,
                lambda_b: half,
                h_a: bp.alice.bit(),
                h_b: bp.bob.bit(),
                g_a,
                g_b,
            };
            let s = setup.run(e, &mut rng);
            tally.record(&s);
        }
        tally
    });
    let total = tallies.into_iter().fold(Tally::default(), Tally::add);
    if total.accepted < n_accepted {
        return Err(Error::SampleBudget {
            accepted: total.accepted,
            target: n_accepted,
            drawn: total.drawn,
        });
    }
    let est = total.estimate();
    Ok(SiftedEstimate {
        gain: est.gain,
        qber: est.qber,
        acceptance: McEstimate::from_counts(total.accepted, total.drawn),
    })
}

/// Probability of a successful announcement given exactly one photon leaves
/// one of the parties: the photon arrives and the other detector stays dark,
/// or it is lost and exactly one detector fires a dark count.
pub fn true_single_photon_yield(params: &SystemParams) -> f64 {
    let se = derive_channel(params).sqrt_eta;
    let p = params.p_d;
    se * (1.0 - p) + (1.0 - se) * 2.0 * p * (1.0 - p)
}

/// Error rate of single-photon events in a post-selected set.
///
/// An arriving photon exits at `R` with probability `(1 - cos x) / 2`; a lost
/// photon leaves a dark count that is wrong half the time.
pub fn true_single_photon_qber(slice: SliceIndex, bp: BasisPair, params: &SystemParams) -> Result<f64> {
    let ch = derive_channel(params);
    let p = params.p_d;
    let window = PhaseWindow::slice(slice.get(), params.slices, ch.delta0);
    let shift = FRAC_PI_2 * (bp.bob.bit() as f64 - bp.alice.bit() as f64);
    let to_r = integrate_window(|a, b| 0.5 * (1.0 - (b - a + shift).cos()), &window)?;
    let wrong = (1.0 - p) * (ch.sqrt_eta * to_r + (1.0 - ch.sqrt_eta) * p);
    let y1 = true_single_photon_yield(params);
    Ok(if y1 > 0.0 { wrong / y1 } else { 0.5 })
}
