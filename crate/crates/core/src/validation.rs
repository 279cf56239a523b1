//! Monte Carlo versus closed-form comparison report.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coherent::{gain_qber_phase, gain_qber_zz, sifted_gain_qber, BasisPair, IntensityLevel, SliceIndex};
use crate::config::SystemParams;
use crate::error::Result;
use crate::montecarlo::{estimate_gain_qber_zz, estimate_phase, estimate_sifted, McEstimate};

/// Largest accepted |z|.
pub const Z_THRESHOLD: f64 = 3.0;

/// Relative phases probed by the per-phase checks.
pub const PHASE_PROBES: [f64; 4] = [0.0, PI / 3.0, 2.0 * PI / 3.0, PI];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub quantity: String,
    pub analytic: f64,
    pub mc_mean: f64,
    pub std_err: f64,
    pub n_samples: u64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    #[serde(rename = "L_km")]
    pub l_km: f64,
    pub seed: u64,
    pub n: u64,
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn max_z(&self) -> f64 {
        self.checks.iter().map(|c| c.z).fold(0.0, f64::max)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "L_km={} seed={} n={}", self.l_km, self.seed, self.n)?;
        writeln!(
            f,
            "{:<24} {:>14} {:>14} {:>11} {:>9} {:>7}  result",
            "quantity", "analytic", "mc_mean", "std_err", "samples", "z"
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<24} {:>14.6e} {:>14.6e} {:>11.3e} {:>9} {:>7.3}  {}",
                c.quantity,
                c.analytic,
                c.mc_mean,
                c.std_err,
                c.n_samples,
                c.z,
                if c.pass { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn check(quantity: String, analytic: f64, est: &McEstimate) -> ValidationCheck {
    let z = est.z_score(analytic);
    ValidationCheck {
        quantity,
        analytic,
        mc_mean: est.mean,
        std_err: est.std_err,
        n_samples: est.n_samples,
        z,
        pass: z < Z_THRESHOLD,
    }
}

/// Compare every Monte Carlo estimator with its closed form at `params`.
pub fn run_validation(params: &SystemParams, n: u64, seed: u64) -> Result<ValidationReport> {
    run_validation_with(params, n, seed, |_, v| v)
}

/// As [`run_validation`], passing each analytic value through `adjust`
/// before comparison. Used to check that the harness flags disagreement.
pub fn run_validation_with<F>(params: &SystemParams, n: u64, seed: u64, adjust: F) -> Result<ValidationReport>
where
    F: Fn(&str, f64) -> f64,
{
    let p = params.validated()?;
    let mut checks = Vec::new();
    let mut push = |name: String, analytic: f64, est: &McEstimate| {
        let a = adjust(&name, analytic);
        checks.push(check(name, a, est));
    };

    let zz = gain_qber_zz(&p);
    let est = estimate_gain_qber_zz(&p, n, seed)?;
    push("Q_ZZ".into(), zz.gain, &est.gain);
    push("E_ZZ".into(), zz.qber, &est.qber);

    // both arms at the signal intensity, bits equal so the closed form's
    // error event is the physical one
    for (i, &x) in PHASE_PROBES.iter().enumerate() {
        let exact = gain_qber_phase(0.0, x, p.mu, p.mu, BasisPair::XX, 0, 0, &p);
        let est = estimate_phase(
            &p,
            0.0,
            x,
            p.mu,
            p.mu,
            BasisPair::XX,
            0,
            0,
            n,
            seed.wrapping_add(1 + i as u64),
        )?;
        push(format!("Q_phase(x={x:.4})"), exact.gain, &est.gain);
        push(format!("E_phase(x={x:.4})"), exact.qber, &est.qber);
    }

    let k0 = SliceIndex::new(0, p.slices)?;
    let exact = sifted_gain_qber(k0, BasisPair::XX, IntensityLevel::Nu, &p)?;
    let est = estimate_sifted(&p, k0, BasisPair::XX, IntensityLevel::Nu, n, seed.wrapping_add(16))?;
    push("Q_XX_k0_nu".into(), exact.gain, &est.gain);
    push("E_XX_k0_nu".into(), exact.qber, &est.qber);

    Ok(ValidationReport {
        l_km: p.l_km,
        seed,
        n,
        checks,
    })
}
