//! System parameters, validation, named presets and the flat `key = value`
//! configuration format.
//!
//! Field names in files and on the command line are exactly the serialized
//! names below (`eta_d`, `p_d`, `L_km`, `e_opt`, `f_ec`, `M`, `mu`, `t`, `nu`,
//! `omega`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Fiber attenuation in dB/km.
pub const FIBER_LOSS_DB_PER_KM: f64 = 0.2;

/// Detector, channel and protocol configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Detector efficiency.
    pub eta_d: f64,
    /// Dark-count probability per detector per gate.
    pub p_d: f64,
    /// Total Alice-Bob fiber length in km; each arm is half of it.
    #[serde(rename = "L_km")]
    pub l_km: f64,
    /// Optical misalignment error, modeled as a fixed phase offset.
    pub e_opt: f64,
    /// Error-correction inefficiency.
    pub f_ec: f64,
    /// Number of phase slices.
    #[serde(rename = "M")]
    pub slices: u32,
    /// Z-basis signal intensity.
    pub mu: f64,
    /// Z-basis bit-1 probability (partial beam-splitter transmittance).
    pub t: f64,
    /// Decoy intensity, sent as nu/2 per arm.
    pub nu: f64,
    /// Weaker decoy intensity, sent as omega/2 per arm.
    pub omega: f64,
}

/// Channel quantities derived from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedChannel {
    /// Per-arm transmittance including detector efficiency.
    pub sqrt_eta: f64,
    /// End-to-end transmittance used for the repeaterless bound.
    pub eta_plob: f64,
    /// Fixed phase offset between Alice and Bob, in radians.
    pub delta0: f64,
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig3,
    Fig4,
    Eq2Demo,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig3, Preset::Fig4, Preset::Eq2Demo];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Eq2Demo => "eq2_demo",
        }
    }

    /// Parameter values for this preset.
    ///
    /// `mu`, `t` and `L_km` are placeholders that callers or the optimizer
    /// are expected to replace; `e_opt` is a placeholder for `fig4`.
    pub fn params(self) -> SystemParams {
        let base = SystemParams {
            eta_d: 0.4,
            p_d: 1e-7,
            l_km: 100.0,
            e_opt: 0.01,
            f_ec: 1.15,
            slices: 16,
            mu: 0.4,
            t: 0.1,
            nu: 0.1,
            omega: 0.02,
        };
        match self {
            Preset::Fig3 => base,
            Preset::Fig4 => SystemParams {
                eta_d: 0.9,
                p_d: 1e-9,
                ..base
            },
            Preset::Eq2Demo => SystemParams {
                p_d: 1e-6,
                t: 0.08,
                e_opt: 0.03,
                ..base
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            "eq2_demo" | "eq2-demo" | "eq2demo" => Ok(Preset::Eq2Demo),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

/// Look up a preset by name.
pub fn preset(name: &str) -> Result<SystemParams> {
    Ok(name.parse::<Preset>()?.params())
}

/// Return `params` unchanged if every invariant holds, otherwise an error
/// listing each violated field.
pub fn validate(params: SystemParams) -> Result<SystemParams> {
    let mut v = Vec::new();
    let mut fail = |field: &'static str, reason: &str| {
        v.push(Violation {
            field,
            reason: reason.to_string(),
        })
    };
    let p = &params;

    if !(p.eta_d > 0.0 && p.eta_d <= 1.0) {
        fail("eta_d", "must lie in (0, 1]");
    }
    if !(p.p_d >= 0.0 && p.p_d < 1.0) {
        fail("p_d", "must lie in [0, 1)");
    }
    if !(p.l_km.is_finite() && p.l_km >= 0.0) {
        fail("L_km", "must be finite and nonnegative");
    }
    if !(p.e_opt >= 0.0 && p.e_opt <= 0.5) {
        fail("e_opt", "must lie in [0, 1/2]");
    }
    if !(p.f_ec.is_finite() && p.f_ec >= 1.0) {
        fail("f_ec", "must be at least 1");
    }
    if p.slices < 2 {
        fail("M", "M must be at least 2");
    }
    if !p.slices.is_multiple_of(2) {
        fail("M", "M must be even");
    }
    if !(p.mu.is_finite() && p.mu > 0.0) {
        fail("mu", "must be positive");
    }
    if !(p.t > 0.0 && p.t < 1.0) {
        fail("t", "must lie in (0, 1)");
    }
    if !(p.omega.is_finite() && p.omega > 0.0) {
        fail("omega", "must be positive");
    }
    if !(p.nu.is_finite() && p.nu > p.omega) {
        fail("nu", "nu must exceed omega");
    }

    if v.is_empty() {
        Ok(params)
    } else {
        Err(Error::InvalidParams(v))
    }
}

/// Per-arm transmittance, end-to-end transmittance and misalignment phase.
pub fn derive_channel(params: &SystemParams) -> DerivedChannel {
    let arm_db = FIBER_LOSS_DB_PER_KM * params.l_km / 2.0;
    DerivedChannel {
        sqrt_eta: params.eta_d * 10f64.powf(-arm_db / 10.0),
        eta_plob: params.eta_d * 10f64.powf(-FIBER_LOSS_DB_PER_KM * params.l_km / 10.0),
        delta0: (1.0 - 2.0 * params.e_opt).clamp(-1.0, 1.0).acos(),
    }
}

impl SystemParams {
    pub fn validated(self) -> Result<Self> {
        validate(self)
    }

    pub fn channel(&self) -> DerivedChannel {
        derive_channel(self)
    }

    pub fn with_distance(self, l_km: f64) -> Self {
        SystemParams { l_km, ..self }
    }

    /// Set one field by its external name.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let real = || value.trim().parse::<f64>().map_err(|e| format!("`{key}`: {e}"));
        match key.trim() {
            "eta_d" => self.eta_d = real()?,
            "p_d" => self.p_d = real()?,
            "L_km" => self.l_km = real()?,
            "e_opt" => self.e_opt = real()?,
            "f_ec" => self.f_ec = real()?,
            "M" => self.slices = value.trim().parse::<u32>().map_err(|e| format!("`M`: {e}"))?,
            "mu" => self.mu = real()?,
            "t" => self.t = real()?,
            "nu" => self.nu = real()?,
            "omega" => self.omega = real()?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Apply a flat `key = value` document on top of `self`.
    ///
    /// Blank lines and `#` comments are ignored. A `preset = <name>` line
    /// resets every field to that preset before later lines apply.
    pub fn apply_kv(mut self, text: &str) -> Result<Self> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::Parse {
                    line: i + 1,
                    reason: "expected `key = value`".into(),
                })?;
            if key.trim() == "preset" {
                self = preset(value)?;
                continue;
            }
            self.set(key, value)
                .map_err(|reason| Error::Parse { line: i + 1, reason })?;
        }
        Ok(self)
    }

    /// Render as a `key = value` document that [`SystemParams::apply_kv`]
    /// reads back.
    pub fn to_kv(&self) -> String {
        format!(
            "eta_d = {}\np_d = {}\nL_km = {}\ne_opt = {}\nf_ec = {}\nM = {}\nmu = {}\nt = {}\nnu = {}\nomega = {}\n",
            self.eta_d, self.p_d, self.l_km, self.e_opt, self.f_ec, self.slices, self.mu, self.t, self.nu, self.omega
        )
    }
}
