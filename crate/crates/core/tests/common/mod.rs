//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::PI;

use pcw_core::phasematch::StitchedDispersion;

/// Free-photon folding: the `n` lowest `|k+G|/√ε` over a generous shell of
/// reciprocal vectors `G = i·b1 + j·b2` (reduced units).
pub fn folded_free_photon(b1: [f64; 2], b2: [f64; 2], k: [f64; 2], eps: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::new();
    for i in -12i32..=12 {
        for j in -12i32..=12 {
            let q = [
                k[0] + i as f64 * b1[0] + j as f64 * b2[0],
                k[1] + i as f64 * b1[1] + j as f64 * b2[1],
            ];
            w.push((q[0] * q[0] + q[1] * q[1]).sqrt() / eps.sqrt());
        }
    }
    w.sort_by(|a, b| a.total_cmp(b));
    w.truncate(n);
    w
}

/// Right-hand side of the two-layer Bragg-stack dispersion relation, minus
/// `cos(Ka)`: `cos k1d1 cos k2d2 − ½(n1/n2 + n2/n1) sin k1d1 sin k2d2 − cos(Ka)`
/// with `k_i = 2π ω̃ n_i` (period 1).
pub fn bragg_mismatch(omega: f64, eps: [f64; 2], d: [f64; 2], ka: f64) -> f64 {
    let n = [eps[0].sqrt(), eps[1].sqrt()];
    let k1 = 2.0 * PI * omega * n[0];
    let k2 = 2.0 * PI * omega * n[1];
    (k1 * d[0]).cos() * (k2 * d[1]).cos()
        - 0.5 * (n[0] / n[1] + n[1] / n[0]) * (k1 * d[0]).sin() * (k2 * d[1]).sin()
        - ka.cos()
}

/// Band-edge frequencies at the zone boundary (`Ka = π`): roots of the
/// mismatch, found by a fine scan plus bisection. Touching roots (double
/// roots at the edge) are caught through local minima of |f|.
pub fn bragg_edge_roots(eps: [f64; 2], d: [f64; 2], count: usize) -> Vec<f64> {
    let f = |w: f64| bragg_mismatch(w, eps, d, PI);
    let mut roots = Vec::new();
    let h = 1e-4;
    let mut w = h;
    while roots.len() < count && w < 5.0 {
        let (a, b) = (f(w), f(w + h));
        if a == 0.0 || a * b < 0.0 {
            let (mut lo, mut hi) = (w, w + h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(lo) * f(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        w += h;
    }
    roots
}

/// `J1(x) = (1/π) ∫₀^π cos(τ − x sin τ) dτ` by composite Simpson quadrature.
pub fn bessel_j1(x: f64) -> f64 {
    let n = 2000;
    let h = PI / n as f64;
    let g = |t: f64| (t - x * t.sin()).cos();
    let mut s = g(0.0) + g(PI);
    for i in 1..n {
        s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 / PI
}

/// Fourier coefficient of ε for one circular hole per cell at `G ≠ 0`:
/// `(ε_hole − ε_bg)·2f·J1(|G|r)/(|G|r)` with `|G|` in radians per `a`.
pub fn circle_form_factor(g_reduced: [f64; 2], r: f64, eps_bg: f64, eps_hole: f64, area: f64) -> f64 {
    let g = 2.0 * PI * (g_reduced[0] * g_reduced[0] + g_reduced[1] * g_reduced[1]).sqrt();
    let f = PI * r * r / area;
    (eps_hole - eps_bg) * 2.0 * f * bessel_j1(g * r) / (g * r)
}

/// Identity of a grid solution: (pump, signal, idler bands, m, k bits).
pub type Key = (usize, usize, usize, i32, [u64; 3]);

/// Exhaustive enumeration of every (pump band, m, signal state, idler state)
/// tuple on the signed grid; no pruning.
pub fn brute_force_matches(
    disp: &StitchedDispersion,
    pump_bands: &[usize],
    dc_bands: &[usize],
    energy_tol: f64,
    momentum_tol: f64,
    m_range: [i32; 2],
) -> BTreeSet<Key> {
    let mut found = BTreeSet::new();
    let (lw, hw) = (disp.low.window, disp.high.window);
    for &p in pump_bands {
        let pump = disp.high_band(p).unwrap();
        for m in m_range[0]..=m_range[1] {
            for &b1 in dc_bands {
                let s = disp.low_band(b1).unwrap();
                for (&k1, &w1) in s.nodes().iter().zip(s.node_omega()) {
                    for &b2 in dc_bands {
                        let i = disp.low_band(b2).unwrap();
                        for (&k2, &w2) in i.nodes().iter().zip(i.node_omega()) {
                            // each unordered pair once: lower band first, then larger k
                            if !(b1 < b2 || (b1 == b2 && k1 >= k2)) {
                                continue;
                            }
                            let kp = k1 + k2 - m as f64;
                            if kp.abs() > 0.5 + 1e-12 {
                                continue;
                            }
                            let wp = pump.omega_at(kp);
                            let e = (w1 + w2 - wp).abs();
                            let q = (k1 + k2 - kp - m as f64).abs();
                            let windows = w1 >= lw[0]
                                && w1 <= lw[1]
                                && w2 >= lw[0]
                                && w2 <= lw[1]
                                && wp >= hw[0]
                                && wp <= hw[1];
                            if e <= energy_tol && q <= momentum_tol && windows {
                                found.insert((p, b1, b2, m, [kp.to_bits(), k1.to_bits(), k2.to_bits()]));
                            }
                        }
                    }
                }
            }
        }
    }
    found
}
