//! The pruned nondegenerate search against exhaustive enumeration.

mod common;

use std::collections::BTreeSet;

use pcw_core::phasematch::{find_nondegenerate_matches, stitch_dual_epsilon, MatchParams, Section, StitchedDispersion};
use pcw_core::pwe::kpath;
use pcw_core::{BandStructure, Polarization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 50 grid points on `[0, 0.5]`.
const INTERVALS: usize = 49;

fn bands(f: &dyn Fn(usize, f64) -> f64, count: usize) -> BandStructure {
    let kx = kpath::guide_grid(INTERVALS);
    BandStructure {
        polarization: Polarization::Even,
        k_path: kpath::guide_path(&kx),
        frequencies: kx.iter().map(|&k| (0..count).map(|b| f(b, k)).collect()).collect(),
        modes: None,
        meta: None,
    }
}

fn stitched(low: BandStructure, high: BandStructure) -> StitchedDispersion {
    stitch_dual_epsilon(
        Section {
            bands: low,
            window: [0.0, 0.2],
        },
        Section {
            bands: high,
            window: [0.2, 0.6],
        },
        None,
    )
    .unwrap()
}

fn compare(d: &StitchedDispersion, params: &MatchParams) -> usize {
    let all = [0, 1, 2];
    let fast: BTreeSet<_> = find_nondegenerate_matches(d, &all, &all, params)
        .unwrap()
        .iter()
        .map(|s| s.key())
        .collect();
    let brute = common::brute_force_matches(d, &all, &all, params.energy_tol, params.momentum_tol, params.m_range);
    assert_eq!(fast, brute, "optimized and exhaustive searches disagree");
    brute.len()
}

/// Quadratic bands with pump bands built so that every co-propagating pair of
/// signal states matches exactly; band 2 partly leaves the low window.
#[test]
fn designed_bands_match_exhaustive_enumeration() {
    let low = bands(&|b, k| 0.1 + 0.03 * b as f64 + 0.2 * k * k, 3);
    let high = bands(&|b, k| 0.2 + 0.03 * b as f64 + 0.1 * k * k, 3);
    let d = stitched(low, high);
    for params in [
        MatchParams {
            m_range: [-2, 2],
            ..Default::default()
        },
        MatchParams {
            energy_tol: 3e-3,
            m_range: [-1, 1],
            ..Default::default()
        },
    ] {
        let found = compare(&d, &params);
        assert!(found > 0, "no solutions at tolerance {}", params.energy_tol);
    }
}

#[test]
fn random_bands_match_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut total = 0;
    for _ in 0..10 {
        let c: Vec<[f64; 3]> = (0..6)
            .map(|_| [rng.gen_range(0.0..0.04), rng.gen_range(0.0..0.3), rng.gen_range(-0.02..0.02)])
            .collect();
        let f = |base: f64, off: usize| {
            let c = c.clone();
            move |b: usize, k: f64| {
                let c = c[off + b];
                base + 0.02 * b as f64 + c[0] + c[1] * k * k + c[2] * (2.0 * std::f64::consts::PI * k).cos()
            }
        };
        let d = stitched(bands(&f(0.09, 0), 3), bands(&f(0.2, 3), 3));
        total += compare(
            &d,
            &MatchParams {
                energy_tol: 2e-3,
                m_range: [-1, 1],
                ..Default::default()
            },
        );
    }
    assert!(total > 0);
}
