//! Optimization over `(mu, t)`, distance sweeps and their CSV/JSON output.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{Preset, SystemParams};
use crate::error::{Error, Result};
use crate::keyrate::{plob_bound, DecoyEstimates, Protocol};
use crate::optimize::{argmax_first, golden_section_max, linspace};
use crate::validation::run_validation;

pub const MU_RANGE: (f64, f64) = (0.01, 1.0);
pub const T_RANGE: (f64, f64) = (0.01, 0.5);
pub const GRID_POINTS: usize = 32;
/// Coordinate refinement stops once a full pass improves the rate by less
/// than this fraction.
pub const REFINE_RTOL: f64 = 1e-4;
const MAX_REFINE_PASSES: usize = 50;

pub const CSV_HEADER: &str = "L_km,protocol,rate,rate_plob,mu_opt,t_opt,QZZ,EZZ,Y1ZZL,eXXb1U,C1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolSet {
    Bb84,
    Rfi,
    #[default]
    Both,
}

impl ProtocolSet {
    pub fn protocols(self) -> &'static [Protocol] {
        match self {
            ProtocolSet::Bb84 => &[Protocol::Bb84],
            ProtocolSet::Rfi => &[Protocol::Rfi],
            ProtocolSet::Both => &[Protocol::Bb84, Protocol::Rfi],
        }
    }

    fn needs_c1(self) -> bool {
        self != ProtocolSet::Bb84
    }
}

impl FromStr for ProtocolSet {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bb84" => Ok(ProtocolSet::Bb84),
            "rfi" => Ok(ProtocolSet::Rfi),
            "both" => Ok(ProtocolSet::Both),
            other => Err(format!("unknown protocol '{other}' (expected bb84, rfi or both)")),
        }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(rename = "L_km")]
    pub l_km: f64,
    pub protocol: Protocol,
    /// Clamped at zero.
    pub rate: f64,
    pub rate_plob: f64,
    pub mu_opt: f64,
    pub t_opt: f64,
    #[serde(rename = "QZZ")]
    pub q_zz: f64,
    #[serde(rename = "EZZ")]
    pub e_zz: f64,
    #[serde(rename = "Y1ZZL")]
    pub y1zz_l: f64,
    #[serde(rename = "eXXb1U")]
    pub e_xx_b1u: f64,
    #[serde(rename = "C1")]
    pub c1: Option<f64>,
    /// Unclamped rate at `(mu_opt, t_opt)`.
    pub raw_rate: f64,
}

impl CurvePoint {
    pub fn beats_plob(&self) -> bool {
        self.rate > self.rate_plob
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McCheck {
    pub n_samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub params: SystemParams,
    pub l_grid: Vec<f64>,
    pub protocol: ProtocolSet,
    pub optimize: bool,
    pub mu_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// Run the Monte Carlo comparison at every distance; any failure aborts.
    pub mc_validate: Option<McCheck>,
}

impl SweepSpec {
    pub fn new(params: SystemParams, l_grid: Vec<f64>) -> Self {
        SweepSpec {
            params,
            l_grid,
            protocol: ProtocolSet::Both,
            optimize: true,
            mu_grid: default_mu_grid(),
            t_grid: default_t_grid(),
            mc_validate: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_grid.is_empty() {
            return Err(Error::Sweep("distance grid is empty".into()));
        }
        if self
            .l_grid
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
        {
            return Err(Error::Sweep("distance grid must be strictly increasing".into()));
        }
        if self.optimize && (self.mu_grid.is_empty() || self.t_grid.is_empty()) {
            return Err(Error::Sweep("optimization grids must be non-empty".into()));
        }
        for &l in &self.l_grid {
            self.params.with_distance(l).validated()?;
        }
        Ok(())
    }
}

/// Distance grid used when none is given: 40 points spanning the range
/// where the preset's rates are positive.
pub fn default_l_grid(preset: Option<Preset>) -> Vec<f64> {
    let (start, step) = match preset {
        Some(Preset::Fig4) => (15.0, 15.0),
        _ => (10.0, 10.0),
    };
    (1..=40).map(|i| start + step * (i - 1) as f64).collect()
}

pub fn default_mu_grid() -> Vec<f64> {
    linspace(MU_RANGE.0, MU_RANGE.1, GRID_POINTS)
}

pub fn default_t_grid() -> Vec<f64> {
    linspace(T_RANGE.0, T_RANGE.1, GRID_POINTS)
}

/// Parse `"a,b,c"` or `"start:stop:step"` (`stop` included when it lies on the grid).
pub fn parse_l_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let s = s.trim();
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("bad number '{p}': {e}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts.as_slice() else {
            return Err(format!("range '{s}' must be start:stop:step"));
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step.is_nan() || step <= 0.0 || b < a {
            return Err(format!("range '{s}' needs step > 0 and stop >= start"));
        }
        let n = ((b - a) / step * (1.0 + 1e-12)).floor() as usize + 1;
        Ok((0..n).map(|i| a + step * i as f64).collect())
    } else {
        s.split(',').filter(|p| !p.trim().is_empty()).map(num).collect()
    }
}

fn point(est: &DecoyEstimates, protocol: Protocol, mu: f64, t: f64, raw: f64) -> CurvePoint {
    let zz = est.zz(mu, t);
    CurvePoint {
        l_km: est.params.l_km,
        protocol,
        rate: raw.max(0.0),
        rate_plob: plob_bound(&est.params),
        mu_opt: mu,
        t_opt: t,
        q_zz: zz.gain,
        e_zz: zz.qber,
        y1zz_l: est.y1zz_l,
        e_xx_b1u: est.x_bounds.e1_upper,
        c1: est.c1,
        raw_rate: raw,
    }
}

fn grid_step(grid: &[f64], i: usize) -> f64 {
    match grid.len() {
        0 | 1 => 0.0,
        _ if i + 1 < grid.len() => grid[i + 1] - grid[i],
        _ => grid[i] - grid[i - 1],
    }
}

/// Maximize the unclamped rate over the grids, then refine each coordinate
/// in turn by golden-section search within one grid step.
fn optimize_on(est: &DecoyEstimates, protocol: Protocol, mu_grid: &[f64], t_grid: &[f64]) -> Result<CurvePoint> {
    let f = |mu: f64, t: f64| est.raw(protocol, mu, t);
    // fail early on a missing statistic so the closures below cannot error
    f(mu_grid[0], t_grid[0])?;
    let g = |mu: f64, t: f64| f(mu, t).unwrap_or(f64::NEG_INFINITY);

    let values = mu_grid.iter().flat_map(|&mu| t_grid.iter().map(move |&t| g(mu, t)));
    let (idx, mut best) = argmax_first(values).ok_or_else(|| Error::Sweep("empty search grid".into()))?;
    let (i, j) = (idx / t_grid.len(), idx % t_grid.len());
    let (mut mu, mut t) = (mu_grid[i], t_grid[j]);
    let (dmu, dt) = (grid_step(mu_grid, i), grid_step(t_grid, j));
    let (mu_lo, mu_hi) = (mu_grid[0].min(MU_RANGE.0), mu_grid[mu_grid.len() - 1].max(MU_RANGE.1));
    let (t_lo, t_hi) = (t_grid[0].min(T_RANGE.0), t_grid[t_grid.len() - 1].max(T_RANGE.1));

    for _ in 0..MAX_REFINE_PASSES {
        let start = best;
        if dmu > 0.0 {
            let (m, v) = golden_section_max(|m| g(m, t), (mu - dmu).max(mu_lo), (mu + dmu).min(mu_hi), 1e-9);
            if v > best {
                mu = m;
                best = v;
            }
        }
        if dt > 0.0 {
            let (tt, v) = golden_section_max(|tt| g(mu, tt), (t - dt).max(t_lo), (t + dt).min(t_hi), 1e-9);
            if v > best {
                t = tt;
                best = v;
            }
        }
        if best - start <= REFINE_RTOL * start.abs() {
            break;
        }
    }
    Ok(point(est, protocol, mu, t, best))
}

/// Optimal `(mu, t)` for one protocol at distance `l_km`.
pub fn optimize_point(params: &SystemParams, l_km: f64, protocol: Protocol) -> Result<CurvePoint> {
    let p = params.with_distance(l_km).validated()?;
    let est = DecoyEstimates::new(&p, protocol == Protocol::Rfi)?;
    optimize_on(&est, protocol, &default_mu_grid(), &default_t_grid())
}

fn evaluate_distance(spec: &SweepSpec, l_km: f64) -> Result<Vec<CurvePoint>> {
    let p = spec.params.with_distance(l_km);
    if let Some(mc) = spec.mc_validate {
        let report = run_validation(&p, mc.n_samples, mc.seed)?;
        if !report.passed() {
            let checks: Vec<&str> = report.failures().map(|c| c.quantity.as_str()).collect();
            return Err(Error::ValidationFailed {
                l_km,
                checks: checks.join(", "),
            });
        }
    }
    let est = DecoyEstimates::new(&p, spec.protocol.needs_c1())?;
    spec.protocol
        .protocols()
        .iter()
        .map(|&proto| {
            if spec.optimize {
                optimize_on(&est, proto, &spec.mu_grid, &spec.t_grid)
            } else {
                Ok(point(&est, proto, p.mu, p.t, est.raw(proto, p.mu, p.t)?))
            }
        })
        .collect()
}

/// One row per distance and protocol, ordered by distance then protocol.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    #[cfg(feature = "parallel")]
    let rows: Vec<Result<Vec<CurvePoint>>> = {
        use rayon::prelude::*;
        spec.l_grid.par_iter().map(|&l| evaluate_distance(spec, l)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Result<Vec<CurvePoint>>> = spec.l_grid.iter().map(|&l| evaluate_distance(spec, l)).collect();

    let mut out = Vec::with_capacity(rows.len() * spec.protocol.protocols().len());
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// First and last distance where `protocol` beats the PLOB bound.
pub fn plob_advantage_range(points: &[CurvePoint], protocol: Protocol) -> Option<(f64, f64)> {
    let mut hits = points
        .iter()
        .filter(|p| p.protocol == protocol && p.beats_plob())
        .map(|p| p.l_km);
    let first = hits.next()?;
    Some((first, hits.next_back().unwrap_or(first)))
}

/// Distance at which `rate - rate_plob` changes sign from negative to
/// positive, by linear interpolation in log-rate between neighbouring rows.
pub fn plob_crossing(points: &[CurvePoint], protocol: Protocol) -> Option<f64> {
    let rows: Vec<&CurvePoint> = points.iter().filter(|p| p.protocol == protocol).collect();
    rows.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        if a.beats_plob() || !b.beats_plob() {
            return None;
        }
        if a.rate <= 0.0 {
            return Some(b.l_km);
        }
        let da = (a.rate / a.rate_plob).ln();
        let db = (b.rate / b.rate_plob).ln();
        Some(a.l_km + (b.l_km - a.l_km) * da / (da - db))
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Floats use Rust's shortest round-trip form, switching to exponent
/// notation for very small or large magnitudes.
pub fn to_csv(points: &[CurvePoint]) -> String {
    let mut s = String::with_capacity(64 * (points.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{:?},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            p.l_km,
            p.protocol.name(),
            p.rate,
            p.rate_plob,
            p.mu_opt,
            p.t_opt,
            p.q_zz,
            p.e_zz,
            p.y1zz_l,
            p.e_xx_b1u,
            opt(p.c1)
        );
    }
    s
}

pub fn to_json(points: &[CurvePoint]) -> String {
    serde_json::to_string_pretty(points).expect("curve points serialize")
}
