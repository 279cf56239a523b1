//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints its own line; exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfqkd::coherent::{gain_single_arm, sifted_bb84_x, sifted_gain_qber, BasisPair, IntensityLevel, SliceIndex};
use tfqkd::config::{Preset, SystemParams};
use tfqkd::decoy::{xbasis_bounds, y1_zz_lower};
use tfqkd::keyrate::{
    bb84_single_photon_rate, c_of_drift, i_e, rfi_qber_identities, sixstate_single_photon_rate, Protocol,
};
use tfqkd::montecarlo::{true_single_photon_qber, true_single_photon_yield};
use tfqkd::optimize::linspace;
use tfqkd::single_photon::{bsm_mixture, optimal_t_eq2};
use tfqkd::sweep::{
    default_l_grid, optimize_point, plob_advantage_range, plob_crossing, run_sweep, to_csv, ProtocolSet, SweepSpec,
};
use tfqkd::validation::run_validation;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn intrinsic_qber() -> Outcome {
    let start = Instant::now();
    let p = SystemParams {
        e_opt: 0.03,
        nu: 0.1,
        slices: 16,
        p_d: 1e-9,
        ..Preset::Fig4.params().with_distance(300.0)
    }
    .validated()
    .map_err(|e| e.to_string())?;
    let (nu, _) = sifted_bb84_x(&p).map_err(|e| e.to_string())?;
    within(Duration::from_secs(1), start.elapsed())?;
    let msg = format!("E_XX^nu = {:.4}% (delta0 = {:.4})", 100.0 * nu.qber, p.channel().delta0);
    if (nu.qber - 0.036).abs() <= 0.005 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn optimal_transmittance() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for l in [100.0, 150.0, 200.0] {
        let p = SystemParams {
            eta_d: 0.4,
            p_d: 1e-6,
            ..Preset::Eq2Demo.params().with_distance(l)
        };
        let (t, _) = optimal_t_eq2(&p, 0.03);
        ok &= (0.06..=0.10).contains(&t);
        parts.push(format!("L={l}: t*={:.4}", t));
    }
    within(Duration::from_secs(1), start.elapsed())?;
    let msg = parts.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fig3_crossing() -> Outcome {
    let start = Instant::now();
    let mut spec = SweepSpec::new(Preset::Fig3.params(), default_l_grid(Some(Preset::Fig3)));
    spec.protocol = ProtocolSet::Bb84;
    let pts = run_sweep(&spec).map_err(|e| e.to_string())?;
    within(Duration::from_secs(60), start.elapsed())?;
    match plob_advantage_range(&pts, Protocol::Bb84) {
        Some((a, b)) => Ok(format!(
            "{} points; BB84 above PLOB for L in [{a}, {b}] km, crossing near {:.1} km",
            pts.len(),
            plob_crossing(&pts, Protocol::Bb84).unwrap_or(a)
        )),
        None => Err("BB84 never exceeds PLOB".into()),
    }
}

fn fig4_robustness() -> Outcome {
    let start = Instant::now();
    let high_error = SystemParams {
        e_opt: 0.2,
        ..Preset::Fig4.params()
    };
    let mut spec = SweepSpec::new(high_error, default_l_grid(Some(Preset::Fig4)));
    spec.protocol = ProtocolSet::Bb84;
    let pts = run_sweep(&spec).map_err(|e| e.to_string())?;
    let range = plob_advantage_range(&pts, Protocol::Bb84);

    let mut rfi = Vec::new();
    let mut bb84 = Vec::new();
    for e_opt in [0.01, 0.1, 0.2] {
        let p = SystemParams {
            e_opt,
            ..Preset::Fig4.params()
        };
        rfi.push(
            optimize_point(&p, 300.0, Protocol::Rfi)
                .map_err(|e| e.to_string())?
                .rate,
        );
        bb84.push(
            optimize_point(&p, 300.0, Protocol::Bb84)
                .map_err(|e| e.to_string())?
                .rate,
        );
    }
    within(Duration::from_secs(120), start.elapsed())?;
    let spread = |v: &[f64]| {
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    };
    let (sr, sb) = (spread(&rfi), spread(&bb84));
    let msg = format!(
        "(a) e_opt=20% BB84 above PLOB for L in {} km; (b) L=300 RFI {:.3e}/{:.3e}/{:.3e} spread {:.3}, BB84 {:.3e}/{:.3e}/{:.3e} spread {:.3}",
        range.map_or("no range".into(), |(a, b)| format!("[{a}, {b}]")),
        rfi[0], rfi[1], rfi[2], sr, bb84[0], bb84[1], bb84[2], sb
    );
    if range.is_some() && rfi.iter().all(|&r| r > 0.0) && sr < 1.5 && sb > sr {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn mc_agreement() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for l in [100.0, 300.0] {
        let r = run_validation(&Preset::Fig3.params().with_distance(l), 1_000_000, 20_240_601)
            .map_err(|e| e.to_string())?;
        ok &= r.passed();
        parts.push(format!("L={l}: {} checks, max |z| = {:.2}", r.checks.len(), r.max_z()));
        for c in r.failures() {
            parts.push(format!("{} z={:.2}", c.quantity, c.z));
        }
    }
    within(Duration::from_secs(120), start.elapsed())?;
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn decoy_sandwich() -> Outcome {
    let mut bad = Vec::new();
    let mut n = 0;
    let k0 = SliceIndex::new(0, 16).map_err(|e| e.to_string())?;
    for l in [50.0, 150.0, 250.0, 350.0, 450.0] {
        for e_opt in [0.01, 0.1, 0.2] {
            let p = SystemParams {
                e_opt,
                ..Preset::Fig3.params().with_distance(l)
            };
            let gains = gain_single_arm(&p);
            let (y_lo, y_true) = (y1_zz_lower(&gains, &p), true_single_photon_yield(&p));
            if y_lo > y_true {
                bad.push(format!("Y1 L={l} e_opt={e_opt}: {y_lo} > {y_true}"));
            }
            for bp in BasisPair::ALL {
                let nu = sifted_gain_qber(k0, bp, IntensityLevel::Nu, &p).map_err(|e| e.to_string())?;
                let om = sifted_gain_qber(k0, bp, IntensityLevel::Omega, &p).map_err(|e| e.to_string())?;
                let b = xbasis_bounds(&nu, &om, gains.q_vacuum, &p);
                let e = true_single_photon_qber(k0, bp, &p).map_err(|e| e.to_string())?;
                n += 1;
                if !(b.e1_lower <= e && e <= b.e1_upper) {
                    bad.push(format!(
                        "{} L={l} e_opt={e_opt}: {e} not in [{}, {}]",
                        bp.label(),
                        b.e1_lower,
                        b.e1_upper
                    ));
                }
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("15 yield orderings and {n} error-rate brackets hold"))
    } else {
        Err(bad.join("; "))
    }
}

fn exact_identities() -> Outcome {
    let mut bad = Vec::new();
    for t in linspace(0.01, 0.99, 25) {
        for se in [1e-5, 1e-3, 0.04, 0.5, 1.0] {
            let s: f64 = bsm_mixture(t, se, 1e-6).weights().iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                bad.push(format!("sum q_i/q = {s}"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let beta = rng.random_range(-10.0 * PI..10.0 * PI);
        let c = rfi_qber_identities(beta).c_value();
        if (c - 2.0).abs() > 1e-12 {
            bad.push(format!("C({beta}) = {c}"));
        }
    }
    for d in [1e-7, 1e-9, 1e-12] {
        if (c_of_drift(d) - 2.0).abs() > 1e-9 {
            bad.push(format!("c_of_drift({d}) = {}", c_of_drift(d)));
        }
    }
    let (ie2, ie0) = (i_e(2.0, 0.0).unwrap().i_e, i_e(0.0, 0.0).unwrap().i_e);
    if ie2.abs() > 1e-12 || (ie0 - 1.0).abs() > 1e-12 {
        bad.push(format!("I_E(2,0) = {ie2}, I_E(0,0) = {ie0}"));
    }
    for e in linspace(0.0, 0.5, 51) {
        if sixstate_single_photon_rate(0.0, e, e) != bb84_single_photon_rate(0.0, e) {
            bad.push(format!("six-state != BB84 at e = {e}"));
        }
    }
    if bad.is_empty() {
        Ok("normalization, C = 2, drift limit, I_E endpoints, six-state = BB84".into())
    } else {
        Err(bad.join("; "))
    }
}

fn determinism() -> Outcome {
    let spec = SweepSpec::new(Preset::Fig3.params(), default_l_grid(Some(Preset::Fig3)));
    let a = to_csv(&run_sweep(&spec).map_err(|e| e.to_string())?);
    let b = to_csv(&run_sweep(&spec).map_err(|e| e.to_string())?);
    if a == b {
        Ok(format!("{} bytes identical across runs", a.len()))
    } else {
        Err("CSV differs between runs".into())
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("intrinsic sifted QBER", intrinsic_qber),
        ("optimal transmittance", optimal_transmittance),
        ("fig3 PLOB crossing", fig3_crossing),
        ("fig4 robustness", fig4_robustness),
        ("Monte Carlo agreement", mc_agreement),
        ("decoy sandwich", decoy_sandwich),
        ("exact identities", exact_identities),
        ("sweep determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        match outcome {
            Ok(msg) => println!("criterion {} PASS {name} ({took:.2?}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} FAIL {name} ({took:.2?}): {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
