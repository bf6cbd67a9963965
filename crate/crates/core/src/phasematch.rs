//! Phase-matching search for spontaneous parametric down-conversion in a
//! line-defect waveguide.
//!
//! A solution is a (pump, signal, idler) triple on guide bands with
//! `ω̃₁ + ω̃₂ = ω̃_p` and `k₁ + k₂ = k_p + m` (units of 2π/a). All emitted
//! wavevectors lie in the closed first zone `[-0.5, 0.5]`; band data sampled on
//! `kx ∈ [0, 0.5]` is extended to negative kx by time reversal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::MatchError;
use crate::pwe::BandStructure;
use crate::slab::group_velocity;

/// Picoseconds per millimetre for an inverse velocity of `1/c`.
pub const PS_PER_MM_PER_INV_C: f64 = 1e9 / 299_792_458.0;

pub const DEFAULT_ENERGY_TOL: f64 = 1e-4;
pub const DEFAULT_MOMENTUM_TOL: f64 = 1e-9;
pub const DEFAULT_BUDGET: u64 = 2_000_000_000;

/// Reduced frequency to vacuum wavelength `λ = a / ω̃` (nm); `None` at ω̃ = 0.
pub fn wavelength_nm(lattice_constant_nm: f64, omega: f64) -> Option<f64> {
    (omega > 0.0).then(|| lattice_constant_nm / omega)
}

/// Differential group delay per unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dgd {
    /// `|1/u_a − 1/u_b|` in units of 1/c; `None` when a velocity vanishes.
    pub per_length: Option<f64>,
    pub ps_per_mm: Option<f64>,
    /// Set when one of the velocities is zero (flat band).
    pub infinite: bool,
}

impl Dgd {
    pub fn value(&self) -> f64 {
        self.per_length.unwrap_or(f64::INFINITY)
    }
}

/// `|1/u_pump − 1/u_dc|`; a zero velocity yields an explicitly infinite DGD.
pub fn dgd(u_pump: f64, u_dc: f64) -> Dgd {
    if u_pump == 0.0 || u_dc == 0.0 {
        return Dgd {
            per_length: None,
            ps_per_mm: None,
            infinite: true,
        };
    }
    let v = (1.0 / u_pump - 1.0 / u_dc).abs();
    Dgd {
        per_length: Some(v),
        ps_per_mm: Some(v * PS_PER_MM_PER_INV_C),
        infinite: false,
    }
}

/// One band sampled on `kx = j·Δk`, `j = 0..=J`, `kx_J = 0.5`, evaluated on the
/// whole zone through time reversal.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideBand {
    dk: f64,
    /// Signed grid `-0.5..=0.5`.
    k: Vec<f64>,
    omega: Vec<f64>,
    velocity: Vec<f64>,
}

impl GuideBand {
    pub fn new(kx: &[f64], omega: &[f64]) -> Result<Self, MatchError> {
        let j = kx.len();
        if j < 2 || kx[0] != 0.0 || (kx[j - 1] - 0.5).abs() > 1e-12 {
            return Err(MatchError::BadGrid);
        }
        let dk = kx[1] - kx[0];
        if kx.windows(2).any(|w| ((w[1] - w[0]) - dk).abs() > 1e-9) {
            return Err(MatchError::BadGrid);
        }
        let mut k = Vec::with_capacity(2 * j - 1);
        let mut w = Vec::with_capacity(2 * j - 1);
        for i in (1..j).rev() {
            k.push(-kx[i]);
            w.push(omega[i]);
        }
        k.extend_from_slice(kx);
        w.extend_from_slice(omega);
        let velocity = if k.len() >= 3 {
            group_velocity(&k, &w).map_err(|_| MatchError::BadGrid)?
        } else {
            vec![0.0; k.len()]
        };
        Ok(Self {
            dk,
            k,
            omega: w,
            velocity,
        })
    }

    pub fn dk(&self) -> f64 {
        self.dk
    }

    /// Signed grid nodes in `[-0.5, 0.5]`.
    pub fn nodes(&self) -> &[f64] {
        &self.k
    }

    pub fn node_omega(&self) -> &[f64] {
        &self.omega
    }

    fn locate(&self, k: f64) -> (usize, f64) {
        let r = k - k.round();
        // keep ±0.5 on their own side of the zone
        let r = if (k - 0.5).abs() < 1e-15 {
            0.5
        } else if (k + 0.5).abs() < 1e-15 {
            -0.5
        } else {
            r
        };
        let last = self.k.len() - 1;
        let t = (r - self.k[0]) / self.dk;
        let i = (t.floor().max(0.0) as usize).min(last - 1);
        let frac = ((r - self.k[i]) / self.dk).clamp(0.0, 1.0);
        (i, frac)
    }

    fn lerp(v: &[f64], i: usize, frac: f64) -> f64 {
        if frac == 0.0 {
            v[i]
        } else {
            v[i] + frac * (v[i + 1] - v[i])
        }
    }

    /// Linearly interpolated ω̃(k); k is reduced into the zone first.
    pub fn omega_at(&self, k: f64) -> f64 {
        let (i, f) = self.locate(k);
        Self::lerp(&self.omega, i, f)
    }

    pub fn velocity_at(&self, k: f64) -> f64 {
        let (i, f) = self.locate(k);
        Self::lerp(&self.velocity, i, f)
    }

    pub fn range(&self) -> [f64; 2] {
        [
            self.omega.iter().copied().fold(f64::INFINITY, f64::min),
            self.omega.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ]
    }
}

/// Band data valid within an ω̃ window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub bands: BandStructure,
    pub window: [f64; 2],
}

/// Dual-ε dispersion: long-wavelength bands from `low`, pump bands from `high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchedDispersion {
    pub low: Section,
    pub high: Section,
    pub lattice_constant_nm: Option<f64>,
    #[serde(skip)]
    low_bands: Vec<GuideBand>,
    #[serde(skip)]
    high_bands: Vec<GuideBand>,
}

fn guide_grid(b: &BandStructure) -> Result<Vec<f64>, MatchError> {
    if b.k_path.iter().any(|k| k[1] != 0.0) {
        return Err(MatchError::BadGrid);
    }
    Ok(b.k_path.iter().map(|k| k[0]).collect())
}

fn guide_bands(b: &BandStructure, kx: &[f64]) -> Result<Vec<GuideBand>, MatchError> {
    (0..b.num_bands()).map(|n| GuideBand::new(kx, &b.band(n))).collect()
}

/// Combines a low-ε (long wavelength) and a high-ε (short wavelength) band
/// computation on the same geometry and kx grid.
pub fn stitch_dual_epsilon(
    low: Section,
    high: Section,
    lattice_constant_nm: Option<f64>,
) -> Result<StitchedDispersion, MatchError> {
    let kl = guide_grid(&low.bands)?;
    let kh = guide_grid(&high.bands)?;
    if kl.len() != kh.len() || kl.iter().zip(&kh).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(MatchError::GridMismatch);
    }
    if let (Some(a), Some(b)) = (&low.bands.meta, &high.bands.meta) {
        if !a.geometry_hash.is_empty() && !b.geometry_hash.is_empty() && a.geometry_hash != b.geometry_hash {
            return Err(MatchError::GeometryMismatch);
        }
    }
    let [a, b] = low.window;
    let [c, d] = high.window;
    if !(a < b && c < d && c >= b) {
        return Err(MatchError::OverlappingWindows(a, b, c, d));
    }
    let low_bands = guide_bands(&low.bands, &kl)?;
    let high_bands = guide_bands(&high.bands, &kh)?;
    Ok(StitchedDispersion {
        low,
        high,
        lattice_constant_nm,
        low_bands,
        high_bands,
    })
}

impl StitchedDispersion {
    pub fn low_band(&self, n: usize) -> Result<&GuideBand, MatchError> {
        self.low_bands.get(n).ok_or(MatchError::MissingBand(n))
    }

    pub fn high_band(&self, n: usize) -> Result<&GuideBand, MatchError> {
        self.high_bands.get(n).ok_or(MatchError::MissingBand(n))
    }

    pub fn wavelength_nm(&self, omega: f64) -> Option<f64> {
        self.lattice_constant_nm.and_then(|a| wavelength_nm(a, omega))
    }

    fn in_low(&self, w: f64) -> bool {
        w >= self.low.window[0] && w <= self.low.window[1]
    }

    fn in_high(&self, w: f64) -> bool {
        w >= self.high.window[0] && w <= self.high.window[1]
    }

    fn dk(&self) -> f64 {
        self.low_bands.first().map_or(0.0, |b| b.dk())
    }

    /// Signed kx nodes shared by both sections.
    pub fn nodes(&self) -> Vec<f64> {
        self.low_bands
            .first()
            .or(self.high_bands.first())
            .map_or_else(Vec::new, |b| b.nodes().to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePoint {
    pub band: usize,
    /// Guide wavevector (units 2π/a).
    pub k: f64,
    pub omega: f64,
    /// Group velocity (units of c).
    pub velocity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapRecord {
    pub magnitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSolution {
    pub pump: ModePoint,
    pub signal: ModePoint,
    pub idler: ModePoint,
    /// Reciprocal shift `m` with `G = m·2π/a` along the guide.
    pub g_shift: i32,
    pub energy_residual: f64,
    pub momentum_residual: f64,
    pub degenerate: bool,
    /// Pump against the down-converted light (common velocity when degenerate,
    /// mean of signal and idler velocities otherwise).
    pub dgd_per_length: Dgd,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dgd_pump_signal: Option<Dgd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dgd_pump_idler: Option<Dgd>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dgd_signal_idler: Option<Dgd>,
    pub counter_propagating: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapRecord>,
}

/// `(|ω̃₁ + ω̃₂ − ω̃_p|, |k₁ + k₂ − k_p − m|)`
pub fn residuals(pump: (f64, f64), signal: (f64, f64), idler: (f64, f64), m: i32) -> (f64, f64) {
    let energy = (signal.1 + idler.1 - pump.1).abs();
    let momentum = (signal.0 + idler.0 - pump.0 - m as f64).abs();
    (energy, momentum)
}

impl MatchSolution {
    pub fn recompute_residuals(&self) -> (f64, f64) {
        residuals(
            (self.pump.k, self.pump.omega),
            (self.signal.k, self.signal.omega),
            (self.idler.k, self.idler.omega),
            self.g_shift,
        )
    }

    /// Identity key: band triple, wavevectors and reciprocal shift.
    pub fn key(&self) -> (usize, usize, usize, i32, [u64; 3]) {
        (
            self.pump.band,
            self.signal.band,
            self.idler.band,
            self.g_shift,
            [self.pump.k.to_bits(), self.signal.k.to_bits(), self.idler.k.to_bits()],
        )
    }

    fn sort_cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.pump
            .omega
            .total_cmp(&o.pump.omega)
            .then(self.pump.k.total_cmp(&o.pump.k))
            .then(self.pump.band.cmp(&o.pump.band))
            .then(self.signal.band.cmp(&o.signal.band))
            .then(self.idler.band.cmp(&o.idler.band))
            .then(self.signal.k.total_cmp(&o.signal.k))
            .then(self.idler.k.total_cmp(&o.idler.k))
            .then(self.g_shift.cmp(&o.g_shift))
    }
}

pub fn sort_solutions(v: &mut [MatchSolution]) {
    v.sort_by(|a, b| a.sort_cmp(b));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    pub energy_tol: f64,
    pub momentum_tol: f64,
    /// Inclusive range of reciprocal shifts `m`.
    pub m_range: [i32; 2],
    /// Cap on evaluations for the nondegenerate search.
    pub budget: u64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            energy_tol: DEFAULT_ENERGY_TOL,
            momentum_tol: DEFAULT_MOMENTUM_TOL,
            m_range: [-2, 2],
            budget: DEFAULT_BUDGET,
        }
    }
}

impl MatchParams {
    fn validate(&self) -> Result<(), MatchError> {
        if !(self.energy_tol > 0.0 && self.momentum_tol > 0.0) || self.m_range[0] > self.m_range[1] {
            return Err(MatchError::InvalidTolerance);
        }
        Ok(())
    }

    fn shifts(&self) -> impl Iterator<Item = i32> {
        self.m_range[0]..=self.m_range[1]
    }
}

const ZONE_EPS: f64 = 1e-12;

fn in_zone(k: f64) -> bool {
    k.abs() <= 0.5 + ZONE_EPS
}

/// Orders a down-converted pair: lower band first, then larger k.
fn canonical_pair(a: (usize, f64), b: (usize, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 >= b.1)
}

struct Builder<'a> {
    disp: &'a StitchedDispersion,
}

impl Builder<'_> {
    fn point(&self, band: &GuideBand, idx: usize, k: f64, omega: f64) -> ModePoint {
        ModePoint {
            band: idx,
            k,
            omega,
            velocity: band.velocity_at(k),
            wavelength_nm: self.disp.wavelength_nm(omega),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn solution(
        &self,
        p: usize,
        kp: f64,
        wp: f64,
        s: (usize, f64, f64),
        i: (usize, f64, f64),
        m: i32,
        degenerate: bool,
    ) -> Result<MatchSolution, MatchError> {
        let pb = self.disp.high_band(p)?;
        let pump = self.point(pb, p, kp, wp);
        let signal = self.point(self.disp.low_band(s.0)?, s.0, s.1, s.2);
        let idler = self.point(self.disp.low_band(i.0)?, i.0, i.1, i.2);
        let (energy_residual, momentum_residual) = residuals((kp, wp), (s.1, s.2), (i.1, i.2), m);
        let (u1, u2, up) = (signal.velocity, idler.velocity, pump.velocity);
        let counter_propagating = u1 * u2 < 0.0 || u1 * up < 0.0 || u2 * up < 0.0;
        let (dgd_main, extra) = if degenerate {
            (dgd(up, u1), (None, None, None))
        } else {
            (
                dgd(up, 0.5 * (u1 + u2)),
                (Some(dgd(up, u1)), Some(dgd(up, u2)), Some(dgd(u1, u2))),
            )
        };
        Ok(MatchSolution {
            pump,
            signal,
            idler,
            g_shift: m,
            energy_residual,
            momentum_residual,
            degenerate,
            dgd_per_length: dgd_main,
            dgd_pump_signal: extra.0,
            dgd_pump_idler: extra.1,
            dgd_signal_idler: extra.2,
            counter_propagating,
            overlap: None,
        })
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Degenerate matches (same band, equal frequency for signal and idler).
///
/// Two branches are scanned for every pump band, signal band and shift `m`:
/// co-propagating pairs `k₂ = k₁` with `k_p = 2k₁ − m`, and time-reversed pairs
/// `k₂ = −k₁` with `k_p = −m`. Along each branch `ω̃_p(k_p) − 2ω̃₁(k₁)` is
/// piecewise linear; grid nodes within tolerance are emitted and sign changes
/// between breakpoints are refined by bisection.
pub fn find_degenerate_matches(
    disp: &StitchedDispersion,
    pump_bands: &[usize],
    dc_bands: &[usize],
    params: &MatchParams,
) -> Result<Vec<MatchSolution>, MatchError> {
    params.validate()?;
    for &p in pump_bands {
        disp.high_band(p)?;
    }
    for &s in dc_bands {
        disp.low_band(s)?;
    }
    let work: Vec<(usize, usize, i32)> = pump_bands
        .iter()
        .flat_map(|&p| dc_bands.iter().flat_map(move |&s| params.shifts().map(move |m| (p, s, m))))
        .collect();
    let parts = work
        .par_iter()
        .map(|&(p, s, m)| degenerate_partition(disp, p, s, m, params))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out: Vec<MatchSolution> = parts.into_iter().flatten().collect();
    sort_solutions(&mut out);
    Ok(out)
}

fn degenerate_partition(
    disp: &StitchedDispersion,
    p: usize,
    s: usize,
    m: i32,
    params: &MatchParams,
) -> Result<Vec<MatchSolution>, MatchError> {
    let pump = disp.high_band(p)?;
    let sig = disp.low_band(s)?;
    let builder = Builder { disp };
    let dk = disp.dk();
    let tol = params.energy_tol;
    let nodes = sig.nodes();
    let mf = m as f64;
    let mut out = Vec::new();

    // co-propagating: k2 = k1, k_p = 2k1 - m
    {
        let lo = ((mf - 0.5) / 2.0).max(-0.5);
        let hi = ((mf + 0.5) / 2.0).min(0.5);
        if lo <= hi {
            let f = |k1: f64| pump.omega_at(2.0 * k1 - mf) - 2.0 * sig.omega_at(k1);
            let mut breaks: Vec<(f64, bool)> = nodes
                .iter()
                .filter(|&&k| k >= lo - ZONE_EPS && k <= hi + ZONE_EPS)
                .map(|&k| (k, true))
                .collect();
            for &kp in pump.nodes() {
                let k1 = (kp + mf) / 2.0;
                if k1 >= lo && k1 <= hi {
                    breaks.push((k1, false));
                }
            }
            breaks.push((lo, false));
            breaks.push((hi, false));
            let emit = |k1: f64| -> Option<(f64, f64, f64, f64)> {
                let kp = 2.0 * k1 - mf;
                if !in_zone(kp) || !in_zone(k1) {
                    return None;
                }
                let w1 = sig.omega_at(k1);
                let wp = pump.omega_at(kp);
                let (e, q) = residuals((kp, wp), (k1, w1), (k1, w1), m);
                (e <= tol && q <= params.momentum_tol && disp.in_low(w1) && disp.in_high(wp))
                    .then_some((k1, w1, kp, wp))
            };
            for (k1, w1, kp, wp) in scan_branch(&mut breaks, f, emit, dk, tol) {
                out.push(builder.solution(p, kp, wp, (s, k1, w1), (s, k1, w1), m, true)?);
            }
        }
    }

    // time-reversed pair: k2 = -k1, k_p = -m, k1 in (0, 0.5]
    if in_zone(-mf) {
        let kp = -mf;
        let wp = pump.omega_at(kp);
        let f = |k1: f64| wp - 2.0 * sig.omega_at(k1);
        let mut breaks: Vec<(f64, bool)> = nodes.iter().filter(|&&k| k > 0.0).map(|&k| (k, true)).collect();
        let emit = |k1: f64| -> Option<(f64, f64, f64, f64)> {
            let w1 = sig.omega_at(k1);
            let (e, q) = residuals((kp, wp), (k1, w1), (-k1, w1), m);
            (e <= tol && q <= params.momentum_tol && disp.in_low(w1) && disp.in_high(wp))
                .then_some((k1, w1, kp, wp))
        };
        for (k1, w1, kp, wp) in scan_branch(&mut breaks, f, emit, dk, tol) {
            out.push(builder.solution(p, kp, wp, (s, k1, w1), (s, -k1, w1), m, true)?);
        }
    }
    Ok(out)
}

/// Walks sorted breakpoints of a piecewise-linear mismatch function and
/// returns the accepted candidates. Grid nodes take priority; other points and
/// bisection roots are dropped when within `dk/2` of an accepted one.
fn scan_branch<F, E>(breaks: &mut Vec<(f64, bool)>, f: F, emit: E, dk: f64, tol: f64) -> Vec<(f64, f64, f64, f64)>
where
    F: Fn(f64) -> f64,
    E: Fn(f64) -> Option<(f64, f64, f64, f64)>,
{
    breaks.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    breaks.dedup_by(|b, a| (a.0 - b.0).abs() < 1e-14);
    let mut accepted: Vec<(f64, f64, f64, f64)> = Vec::new();
    for &(k, is_node) in breaks.iter() {
        if is_node {
            if let Some(c) = emit(k) {
                accepted.push(c);
            }
        }
    }
    // odd shifts map pump nodes exactly halfway between signal nodes; the
    // margin keeps that midpoint from being matched by rounding on one side only
    let reach = 0.5 * dk * (1.0 - 1e-9);
    let near = |acc: &[(f64, f64, f64, f64)], c: &(f64, f64, f64, f64)| {
        acc.iter().any(|a| (a.0 - c.0).abs() < reach && (a.3 - c.3).abs() < tol)
    };
    let vals: Vec<f64> = breaks.iter().map(|b| f(b.0)).collect();
    let mut extra = Vec::new();
    for (idx, &(k, is_node)) in breaks.iter().enumerate() {
        if !is_node && vals[idx].abs() <= tol {
            if let Some(c) = emit(k) {
                extra.push(c);
            }
        }
        if idx + 1 < breaks.len() {
            let (fa, fb) = (vals[idx], vals[idx + 1]);
            if fa.abs() > tol && fb.abs() > tol && (fa < 0.0) != (fb < 0.0) {
                let root = bisect(&f, k, breaks[idx + 1].0, fa);
                if let Some(c) = emit(root) {
                    extra.push(c);
                }
            }
        }
    }
    for c in extra {
        if !near(&accepted, &c) {
            accepted.push(c);
        }
    }
    accepted.sort_by(|a, b| a.0.total_cmp(&b.0));
    accepted
}

/// Predicate shared by the nondegenerate search and its brute-force check.
#[allow(clippy::too_many_arguments)]
pub fn grid_candidate(
    disp: &StitchedDispersion,
    params: &MatchParams,
    p: usize,
    m: i32,
    s: (usize, f64, f64),
    i: (usize, f64, f64),
) -> Option<(f64, f64)> {
    if !canonical_pair((s.0, s.1), (i.0, i.1)) {
        return None;
    }
    let kp = s.1 + i.1 - m as f64;
    if !in_zone(kp) {
        return None;
    }
    let wp = disp.high_band(p).ok()?.omega_at(kp);
    let (e, q) = residuals((kp, wp), (s.1, s.2), (i.1, i.2), m);
    (e <= params.energy_tol
        && q <= params.momentum_tol
        && disp.in_low(s.2)
        && disp.in_low(i.2)
        && disp.in_high(wp))
    .then_some((kp, wp))
}

/// Nondegenerate matches over all grid pairs `(k₁, k₂)` of the signed kx grid
/// and all band pairs, including opposite signs. Candidates are pruned by
/// the pump band's frequency range before the exact residual test.
pub fn find_nondegenerate_matches(
    disp: &StitchedDispersion,
    pump_bands: &[usize],
    dc_bands: &[usize],
    params: &MatchParams,
) -> Result<Vec<MatchSolution>, MatchError> {
    params.validate()?;
    let nodes = disp.nodes();
    let n_shift = (params.m_range[1] - params.m_range[0] + 1) as u64;
    let needed = (dc_bands.len() as u64 * nodes.len() as u64).pow(2) * pump_bands.len() as u64 * n_shift;
    if needed > params.budget {
        return Err(MatchError::CombinatorialBudgetExceeded {
            needed,
            cap: params.budget,
        });
    }
    for &p in pump_bands {
        disp.high_band(p)?;
    }
    // every dc state on the grid, sorted by frequency
    let mut states: Vec<(f64, usize, f64)> = Vec::new();
    for &b in dc_bands {
        let band = disp.low_band(b)?;
        for (k, w) in band.nodes().iter().zip(band.node_omega()) {
            states.push((*w, b, *k));
        }
    }
    states.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let freqs: Vec<f64> = states.iter().map(|s| s.0).collect();

    let work: Vec<(usize, i32)> = pump_bands
        .iter()
        .flat_map(|&p| params.shifts().map(move |m| (p, m)))
        .collect();
    let builder = Builder { disp };
    let parts = work
        .par_iter()
        .map(|&(p, m)| {
            let [pmin, pmax] = disp.high_band(p)?.range();
            let margin = params.energy_tol + 1e-12;
            let mut out = Vec::new();
            for &(w1, b1, k1) in &states {
                let lo = freqs.partition_point(|&w| w < pmin - w1 - margin);
                let hi = freqs.partition_point(|&w| w <= pmax - w1 + margin);
                for &(w2, b2, k2) in &states[lo..hi] {
                    if let Some((kp, wp)) = grid_candidate(disp, params, p, m, (b1, k1, w1), (b2, k2, w2)) {
                        let degenerate = b1 == b2 && w1 == w2;
                        out.push(builder.solution(p, kp, wp, (b1, k1, w1), (b2, k2, w2), m, degenerate)?);
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, MatchError>>()?;
    let mut out: Vec<MatchSolution> = parts.into_iter().flatten().collect();
    sort_solutions(&mut out);
    Ok(out)
}
