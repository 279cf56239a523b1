//! wasm-bindgen entry points for the static demo page. Every export returns a
//! JSON string; the page parses it and draws on a canvas.

use serde::Serialize;
use tfqkd::config::{Preset, SystemParams};
use tfqkd::decoy::{all_slice_c_stats, c1_average, SliceCStat};
use tfqkd::optimize::linspace;
use tfqkd::single_photon::{bsm_mixture, keyrate_eq2, optimal_t_eq2, T_SEARCH};
use tfqkd::sweep::{run_sweep, CurvePoint, ProtocolSet, SweepSpec};
use wasm_bindgen::prelude::*;

const MAX_POINTS: u32 = 200;
const MAX_SLICES: u32 = 256;

fn params_for(preset: &str, e_opt: f64) -> Result<SystemParams, String> {
    let base: Preset = preset.parse().map_err(|e: tfqkd::Error| e.to_string())?;
    SystemParams { e_opt, ..base.params() }
        .validated()
        .map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub fn key_rate_curve_json(preset: &str, e_opt: f64, l_max: f64, points: u32) -> Result<String, String> {
    if !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("points must be between 2 and {MAX_POINTS}"));
    }
    if !(l_max > 0.0 && l_max.is_finite()) {
        return Err("maximum distance must be positive".into());
    }
    let p = params_for(preset, e_opt)?;
    let step = l_max / points as f64;
    let grid = (1..=points).map(|i| step * i as f64).collect();
    let rows: Vec<CurvePoint> = run_sweep(&SweepSpec {
        protocol: ProtocolSet::Both,
        ..SweepSpec::new(p, grid)
    })
    .map_err(|e| e.to_string())?;
    to_json(&rows)
}

#[derive(Serialize)]
struct TransmittanceScan {
    t: Vec<f64>,
    rate: Vec<f64>,
    t_opt: f64,
    rate_opt: f64,
}

pub fn transmittance_scan_json(l_km: f64, e_xx_b1: f64, p_d: f64, eta_d: f64) -> Result<String, String> {
    if !(0.0..=0.5).contains(&e_xx_b1) {
        return Err("phase error rate must lie in [0, 0.5]".into());
    }
    let p = SystemParams {
        l_km,
        p_d,
        eta_d,
        ..Preset::Eq2Demo.params()
    }
    .validated()
    .map_err(|e| e.to_string())?;
    let se = p.channel().sqrt_eta;
    let t = linspace(T_SEARCH.0, T_SEARCH.1, 200);
    let rate = t
        .iter()
        .map(|&t| keyrate_eq2(&bsm_mixture(t, se, p_d), e_xx_b1))
        .collect();
    let (t_opt, rate_opt) = optimal_t_eq2(&p, e_xx_b1);
    to_json(&TransmittanceScan {
        t,
        rate,
        t_opt,
        rate_opt,
    })
}

#[derive(Serialize)]
struct SliceReport {
    slices: Vec<SliceCStat>,
    c1: f64,
    delta0: f64,
}

pub fn slice_stats_json(preset: &str, l_km: f64, e_opt: f64, slices: u32) -> Result<String, String> {
    if slices > MAX_SLICES {
        return Err(format!("at most {MAX_SLICES} slices"));
    }
    let p = SystemParams {
        l_km,
        slices,
        ..params_for(preset, e_opt)?
    }
    .validated()
    .map_err(|e| e.to_string())?;
    let stats = all_slice_c_stats(&p).map_err(|e| e.to_string())?;
    let c1 = c1_average(&stats, slices).map_err(|e| e.to_string())?;
    to_json(&SliceReport {
        slices: stats,
        c1,
        delta0: p.channel().delta0,
    })
}

/// Optimized BB84, RFI and PLOB rates at `points` distances up to `l_max` km.
#[wasm_bindgen(js_name = keyRateCurve)]
pub fn key_rate_curve(preset: &str, e_opt: f64, l_max: f64, points: u32) -> Result<String, JsError> {
    key_rate_curve_json(preset, e_opt, l_max, points).map_err(|e| JsError::new(&e))
}

/// Single-photon key rate as a function of the beam-splitter transmittance.
#[wasm_bindgen(js_name = transmittanceScan)]
pub fn transmittance_scan(l_km: f64, e_xx_b1: f64, p_d: f64, eta_d: f64) -> Result<String, JsError> {
    transmittance_scan_json(l_km, e_xx_b1, p_d, eta_d).map_err(|e| JsError::new(&e))
}

/// Decoy-estimated error rates and C statistic for every phase slice.
#[wasm_bindgen(js_name = sliceStats)]
pub fn slice_stats(preset: &str, l_km: f64, e_opt: f64, slices: u32) -> Result<String, JsError> {
    slice_stats_json(preset, l_km, e_opt, slices).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn curve_has_two_rows_per_distance() {
        let v: Value = serde_json::from_str(&key_rate_curve_json("fig4", 0.1, 400.0, 8).unwrap()).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 16);
        assert_eq!(rows[15]["L_km"], 400.0);
        assert!(rows.iter().all(|r| r["rate"].as_f64().unwrap() >= 0.0));
    }

    #[test]
    fn curve_rejects_bad_input() {
        assert!(key_rate_curve_json("fig3", 0.01, 400.0, 1).is_err());
        assert!(key_rate_curve_json("fig3", 0.01, -1.0, 10).is_err());
        assert!(key_rate_curve_json("nope", 0.01, 400.0, 10).is_err());
        assert!(key_rate_curve_json("fig3", 0.7, 400.0, 10).is_err());
    }

    #[test]
    fn scan_optimum_matches_grid() {
        let v: Value = serde_json::from_str(&transmittance_scan_json(150.0, 0.03, 1e-6, 0.4).unwrap()).unwrap();
        let t_opt = v["t_opt"].as_f64().unwrap();
        assert!((0.06..=0.10).contains(&t_opt));
        let best = v["rate"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r.as_f64().unwrap())
            .fold(f64::MIN, f64::max);
        assert!(v["rate_opt"].as_f64().unwrap() >= best);
        assert!(transmittance_scan_json(150.0, 0.8, 1e-6, 0.4).is_err());
    }

    #[test]
    fn slice_report_covers_every_slice() {
        let v: Value = serde_json::from_str(&slice_stats_json("fig4", 200.0, 0.05, 8).unwrap()).unwrap();
        assert_eq!(v["slices"].as_array().unwrap().len(), 8);
        let c1 = v["c1"].as_f64().unwrap();
        assert!(c1 > 1.5 && c1 <= 2.0);
        assert!(slice_stats_json("fig4", 200.0, 0.05, 7).is_err());
        assert!(slice_stats_json("fig4", 200.0, 0.05, 1024).is_err());
    }
}
