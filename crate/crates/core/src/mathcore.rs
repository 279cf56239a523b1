//! Binary entropy, the order-zero modified Bessel function, and window
//! averages over pairs of phase slices.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Relative change at which window averaging stops refining.
pub const WINDOW_RTOL: f64 = 1e-9;

const MIN_ORDER: usize = 8;
const MAX_ORDER: usize = 512;

/// Binary Shannon entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain {
            name: "binary_entropy",
            value: x,
            expected: "[0, 1]",
        });
    }
    Ok(entropy_unchecked(x))
}

/// Binary entropy with the argument clamped into [0, 1].
///
/// For key-rate assembly, where estimated error rates may drift a few ulps
/// outside the unit interval.
pub fn binary_entropy_clamped(x: f64) -> f64 {
    entropy_unchecked(if x.is_nan() { 0.5 } else { x.clamp(0.0, 1.0) })
}

fn entropy_unchecked(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}

/// Modified Bessel function of the first kind, order zero, for `z >= 0`.
///
/// Power series below 15, Hankel asymptotic expansion (optimally truncated)
/// above. Negative arguments use the even symmetry.
pub fn bessel_i0(z: f64) -> f64 {
    let z = z.abs();
    if z < 15.0 {
        1.0 + i0_series_tail(z)
    } else {
        i0_asymptotic(z)
    }
}

/// `I0(z) - 1`, accurate for small `z` where `I0(z)` rounds to one.
pub fn bessel_i0_minus_one(z: f64) -> f64 {
    let z = z.abs();
    if z < 15.0 {
        i0_series_tail(z)
    } else {
        i0_asymptotic(z) - 1.0
    }
}

// sum_{k>=1} (z/2)^{2k} / (k!)^2
fn i0_series_tail(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

fn i0_asymptotic(z: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (8.0 * kf * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    z.exp() / (2.0 * PI * z).sqrt() * sum
}

/// A rectangle in (theta_A, theta_B), each side of width 2*pi/M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseWindow {
    pub theta_a_lo: f64,
    pub theta_a_hi: f64,
    pub theta_b_lo: f64,
    pub theta_b_hi: f64,
}

impl PhaseWindow {
    pub fn new(theta_a_lo: f64, theta_b_lo: f64, slices: u32) -> Self {
        let w = 2.0 * PI / slices as f64;
        PhaseWindow {
            theta_a_lo,
            theta_a_hi: theta_a_lo + w,
            theta_b_lo,
            theta_b_hi: theta_b_lo + w,
        }
    }

    /// Alice in slice 0, Bob in slice `k` shifted by the misalignment offset.
    pub fn slice(k: u32, slices: u32, delta0: f64) -> Self {
        let w = 2.0 * PI / slices as f64;
        Self::new(0.0, delta0 + w * k as f64, slices)
    }

    pub fn shifted(self, by: f64) -> Self {
        PhaseWindow {
            theta_a_lo: self.theta_a_lo + by,
            theta_a_hi: self.theta_a_hi + by,
            theta_b_lo: self.theta_b_lo + by,
            theta_b_hi: self.theta_b_hi + by,
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug)]
struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }
}

// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule(order: usize) -> &'static GaussLegendre {
    static RULES: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        let mut v = Vec::new();
        let mut n = MIN_ORDER;
        while n <= MAX_ORDER {
            v.push(GaussLegendre::new(n));
            n *= 2;
        }
        v
    });
    let idx = (order / MIN_ORDER).trailing_zeros() as usize;
    &rules[idx]
}

fn tensor_average<F: Fn(f64, f64) -> f64>(f: &F, w: &PhaseWindow, order: usize) -> f64 {
    let gl = rule(order);
    let (ha, ca) = (0.5 * (w.theta_a_hi - w.theta_a_lo), 0.5 * (w.theta_a_hi + w.theta_a_lo));
    let (hb, cb) = (0.5 * (w.theta_b_hi - w.theta_b_lo), 0.5 * (w.theta_b_hi + w.theta_b_lo));
    let mut sum = 0.0;
    for (xa, wa) in gl.nodes.iter().zip(&gl.weights) {
        let ta = ca + ha * xa;
        let mut inner = 0.0;
        for (xb, wb) in gl.nodes.iter().zip(&gl.weights) {
            inner += wb * f(ta, cb + hb * xb);
        }
        sum += wa * inner;
    }
    // Weights sum to 2 on each axis.
    0.25 * sum
}

/// Average of `f(theta_A, theta_B)` over the window.
///
/// Tensor-product Gauss-Legendre with the order doubled until successive
/// results differ by less than [`WINDOW_RTOL`] relative.
pub fn integrate_window<F: Fn(f64, f64) -> f64>(f: F, w: &PhaseWindow) -> Result<f64> {
    let mut prev = tensor_average(&f, w, MIN_ORDER);
    let mut order = MIN_ORDER * 2;
    let mut change = f64::INFINITY;
    while order <= MAX_ORDER {
        let cur = tensor_average(&f, w, order);
        change = (cur - prev).abs();
        if change <= WINDOW_RTOL * cur.abs() || change <= f64::MIN_POSITIVE {
            return Ok(cur);
        }
        prev = cur;
        order *= 2;
    }
    Err(Error::Quadrature {
        last_change: change / prev.abs().max(f64::MIN_POSITIVE),
    })
}
