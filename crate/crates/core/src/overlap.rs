//! Three-mode χ⁽²⁾ overlap over one (super)cell.
//!
//! The tensor is collapsed to a scalar weight times a material indicator, and
//! each field enters through the sum of its Cartesian components:
//!
//! `O = ∫ χ̃ w (Σ E_p)* (Σ E_s) (Σ E_i) dA`
//!
//! An odd pump contributes only `E_z`, so the product reduces to the pump's
//! out-of-plane field against the in-plane signal and idler fields. The pump is
//! conjugated; no combinatorial factor is applied in the degenerate case.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::PlaneWaveBasis;
use crate::epsilon::EpsilonGrid;
use crate::error::{OverlapError, SolverError};
use crate::fft::{fft2, Direction};
use crate::pwe::{compute_fields, BlochMode};

/// Tolerance on `k_s + k_i − k_p` being a reciprocal lattice vector.
pub const MOMENTUM_TOL: f64 = 1e-9;

/// Where the nonlinearity acts and how strongly.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearRegion {
    pub n: [usize; 2],
    /// χ̃ per mesh pixel, in `[0, 1]`.
    pub indicator: Vec<f64>,
    pub scalar_weight: f64,
}

impl NonlinearRegion {
    /// Material indicator of a rasterized cell (boundary pixels fractional).
    pub fn from_grid(grid: &EpsilonGrid, scalar_weight: f64) -> Self {
        Self {
            n: grid.n,
            indicator: grid.material_indicator(),
            scalar_weight,
        }
    }

    pub fn uniform(n: [usize; 2], scalar_weight: f64) -> Self {
        Self {
            n,
            indicator: vec![1.0; n[0] * n[1]],
            scalar_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub magnitude: f64,
    /// Gauge dependent; diagnostics only.
    pub phase: f64,
    pub momentum_conserved: bool,
}

impl OverlapResult {
    fn from_value(v: Complex64) -> Self {
        Self {
            magnitude: v.norm(),
            phase: v.arg(),
            momentum_conserved: true,
        }
    }
}

/// Integer reciprocal coordinates of `k_s + k_i − k_p`, or a mismatch error.
pub fn momentum_shift(
    grid: &EpsilonGrid,
    pump: &BlochMode,
    signal: &BlochMode,
    idler: &BlochMode,
) -> Result<[i32; 2], OverlapError> {
    let q = [
        signal.k[0] + idler.k[0] - pump.k[0],
        signal.k[1] + idler.k[1] - pump.k[1],
    ];
    if !grid.lattice.is_reciprocal_vector(q, MOMENTUM_TOL) {
        return Err(OverlapError::MomentumMismatch(q[0], q[1]));
    }
    let c = grid.lattice.reciprocal_coordinates(q);
    Ok([c[0].round() as i32, c[1].round() as i32])
}

fn check(
    modes: [&BlochMode; 3],
    basis: &PlaneWaveBasis,
    grid: &EpsilonGrid,
    region: &NonlinearRegion,
) -> Result<(), OverlapError> {
    if region.n != grid.n || region.indicator.len() != grid.len() {
        return Err(OverlapError::MeshMismatch);
    }
    for m in modes {
        if m.e_coefficients.is_empty() {
            return Err(SolverError::MissingEigenvector.into());
        }
        if m.e_coefficients.len() != basis.len() {
            return Err(OverlapError::MeshMismatch);
        }
        if m.e_coefficients.iter().all(|e| e.iter().all(|c| c.norm_sqr() == 0.0)) {
            return Err(OverlapError::ZeroVector);
        }
    }
    Ok(())
}

fn collapse(e: &[Complex64; 3]) -> Complex64 {
    e[0] + e[1] + e[2]
}

/// Midpoint quadrature of the overlap on the rasterization mesh.
pub fn overlap_integral(
    pump: &BlochMode,
    signal: &BlochMode,
    idler: &BlochMode,
    basis: &PlaneWaveBasis,
    grid: &EpsilonGrid,
    region: &NonlinearRegion,
) -> Result<OverlapResult, OverlapError> {
    check([pump, signal, idler], basis, grid, region)?;
    momentum_shift(grid, pump, signal, idler)?;
    let fp = compute_fields(pump, basis, grid)?;
    let fs = compute_fields(signal, basis, grid)?;
    let fi = if std::ptr::eq(signal, idler) {
        fs.clone()
    } else {
        compute_fields(idler, basis, grid)?
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..grid.len() {
        let chi = region.indicator[j];
        if chi == 0.0 {
            continue;
        }
        sum += chi * collapse(&fp.values[j]).conj() * collapse(&fs.values[j]) * collapse(&fi.values[j]);
    }
    Ok(OverlapResult::from_value(sum * grid.pixel_area() * region.scalar_weight))
}

/// The same integral evaluated from plane-wave coefficients:
/// `A w Σ p*_{G_p} s_{G_s} i_{G_i} χ̂(G_p − G_s − G_i − G₀)`, with `χ̂` the
/// normalized DFT of the indicator and `G₀ = k_s + k_i − k_p`.
pub fn overlap_coefficient_space(
    pump: &BlochMode,
    signal: &BlochMode,
    idler: &BlochMode,
    basis: &PlaneWaveBasis,
    grid: &EpsilonGrid,
    region: &NonlinearRegion,
) -> Result<OverlapResult, OverlapError> {
    check([pump, signal, idler], basis, grid, region)?;
    let g0 = momentum_shift(grid, pump, signal, idler)?;
    let n = grid.n;
    let mut chi: Vec<Complex64> = region.indicator.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    fft2(&mut chi, n[0], n[1], Direction::Forward);
    let inv = 1.0 / grid.len() as f64;
    let chi_at = |m: [i32; 2]| EpsilonGrid::coefficient(&chi, n, m) * inv;

    let p: Vec<Complex64> = pump.e_coefficients.iter().map(|e| collapse(e).conj()).collect();
    let s: Vec<Complex64> = signal.e_coefficients.iter().map(collapse).collect();
    let i: Vec<Complex64> = idler.e_coefficients.iter().map(collapse).collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut sum = zero;
    for (a, gp) in basis.indices.iter().enumerate() {
        if p[a] == zero {
            continue;
        }
        for (b, gs) in basis.indices.iter().enumerate() {
            let ps = p[a] * s[b];
            if ps == zero {
                continue;
            }
            let mut inner = zero;
            for (c, gi) in basis.indices.iter().enumerate() {
                if i[c] == zero {
                    continue;
                }
                let m = [gp[0] - gs[0] - gi[0] - g0[0], gp[1] - gs[1] - gi[1] - g0[1]];
                inner += i[c] * chi_at(m);
            }
            sum += ps * inner;
        }
    }
    Ok(OverlapResult::from_value(
        sum * grid.lattice.area() * region.scalar_weight,
    ))
}
