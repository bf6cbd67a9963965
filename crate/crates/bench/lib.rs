//! Shared inputs for the benchmarks.

use pcw_core::phasematch::{stitch_dual_epsilon, Section, StitchedDispersion};
use pcw_core::pwe::kpath;
use pcw_core::{BandStructure, Polarization};

/// Smooth synthetic guide bands on `kx ∈ [0, 0.5]` with `n` intervals.
pub fn synthetic_bands(n: usize, base: f64, count: usize) -> BandStructure {
    let kx = kpath::guide_grid(n);
    BandStructure {
        polarization: Polarization::Even,
        k_path: kpath::guide_path(&kx),
        frequencies: kx
            .iter()
            .map(|&k| {
                (0..count)
                    .map(|b| base + 0.02 * b as f64 + 0.1 * k * k + 0.03 * (b as f64 * k * 7.0).sin())
                    .collect()
            })
            .collect(),
        modes: None,
        meta: None,
    }
}

pub fn synthetic_dispersion(n: usize, bands: usize) -> StitchedDispersion {
    stitch_dual_epsilon(
        Section {
            bands: synthetic_bands(n, 0.12, bands),
            window: [0.0, 0.25],
        },
        Section {
            bands: synthetic_bands(n, 0.26, bands),
            window: [0.25, 0.6],
        },
        None,
    )
    .expect("synthetic sections are compatible")
}
