//! Projected band diagrams, light-cone masking, gap maps, defect-mode
//! classification and group velocities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::lattice::{Lattice, StructureSpec, Vec2};
use crate::pwe::{kpath, BandStructure, Polarization, Solver, SolverOptions};

/// Tolerance used when unioning projected intervals.
pub const MERGE_TOL: f64 = 1e-6;
pub const MIN_TRANSVERSE_SAMPLES: usize = 8;
/// Default k step for finite-difference group velocities (units 2π/a).
pub const DEFAULT_DK: f64 = 0.005;

/// Sorts and merges closed intervals that overlap or lie within `tol`.
pub fn merge_intervals(mut iv: Vec<[f64; 2]>, tol: f64) -> Vec<[f64; 2]> {
    iv.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(iv.len());
    for i in iv {
        match out.last_mut() {
            Some(last) if i[0] <= last[1] + tol => last[1] = last[1].max(i[1]),
            _ => out.push(i),
        }
    }
    out
}

/// Frequencies occupied by extended states of the perfect crystal, per guide kx.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedBands {
    pub polarization: Polarization,
    /// Guide-direction wavevectors in `[0, 0.5]` (units 2π/a).
    pub kx_grid: Vec<f64>,
    /// Disjoint sorted allowed intervals for each kx.
    pub allowed: Vec<Vec<[f64; 2]>>,
    /// Top of the highest computed band for each kx; coverage above it is unknown.
    pub ceiling: Vec<f64>,
    pub light_line_index: f64,
    #[serde(default)]
    pub light_cone_masked: bool,
}

impl ProjectedBands {
    pub fn light_line(&self, kx: f64) -> f64 {
        kx.abs() / self.light_line_index
    }

    pub fn above_light_line(&self, kx: f64, omega: f64) -> bool {
        omega > self.light_line(kx)
    }

    /// True when `omega` at grid column `ix` falls on extended crystal states
    /// (or above the computed ceiling).
    pub fn is_allowed(&self, ix: usize, omega: f64, tol: f64) -> bool {
        omega > self.ceiling[ix] + tol
            || self.allowed[ix]
                .iter()
                .any(|iv| omega >= iv[0] - tol && omega <= iv[1] + tol)
    }

    /// Gaps between allowed intervals (below the ceiling) at column `ix`.
    pub fn gaps(&self, ix: usize) -> Vec<[f64; 2]> {
        self.allowed[ix]
            .windows(2)
            .map(|w| [w[0][1], w[1][0]])
            .collect()
    }

    /// Gaps at column `ix` restricted to the region below the light line.
    pub fn guided_gaps(&self, ix: usize) -> Vec<[f64; 2]> {
        let ll = self.light_line(self.kx_grid[ix]);
        self.gaps(ix)
            .into_iter()
            .filter(|g| g[0] < ll)
            .map(|g| [g[0], g[1].min(ll)])
            .collect()
    }

    pub fn lowest_allowed(&self, ix: usize) -> f64 {
        self.allowed[ix].first().map_or(self.ceiling[ix], |iv| iv[0])
    }
}

/// Transverse half-period of the reciprocal lattice at fixed kx (mirror-reduced).
fn transverse_half_period(lattice: &Lattice) -> f64 {
    // a1 lies along x, so b2 ⟂ x and |b2|/2π is the ky period
    0.5 * (lattice.b2[1] / (2.0 * std::f64::consts::PI)).abs()
}

/// Projects the perfect-crystal bands onto the guide (x) axis.
///
/// For every kx the transverse wavevector is sampled on `transverse_samples`
/// uniform intervals of `[0, ky_max]`; each band contributes `[min, max]` over
/// ky and the union is merged with [`MERGE_TOL`].
pub fn project_bands(
    structure: &StructureSpec,
    pol: Polarization,
    kx_grid: &[f64],
    transverse_samples: usize,
    num_bands: usize,
    opts: &SolverOptions,
) -> Result<ProjectedBands, AnalysisError> {
    if structure.defect.is_some() {
        return Err(AnalysisError::DefectPresent);
    }
    let solver = Solver::for_structure(structure, opts)?;
    project_with_solver(&solver, pol, kx_grid, transverse_samples, num_bands)
}

pub fn project_with_solver(
    solver: &Solver,
    pol: Polarization,
    kx_grid: &[f64],
    transverse_samples: usize,
    num_bands: usize,
) -> Result<ProjectedBands, AnalysisError> {
    if transverse_samples < MIN_TRANSVERSE_SAMPLES {
        return Err(AnalysisError::TooFewTransverseSamples {
            got: transverse_samples,
            min: MIN_TRANSVERSE_SAMPLES,
        });
    }
    let half = transverse_half_period(solver.fourier.lattice());
    let s = transverse_samples;
    let mut path: Vec<Vec2> = Vec::with_capacity(kx_grid.len() * (s + 1));
    for &kx in kx_grid {
        for j in 0..=s {
            path.push([kx, half * j as f64 / s as f64]);
        }
    }
    let bands = solver.band_sweep(pol, &path, num_bands, false)?;
    let mut allowed = Vec::with_capacity(kx_grid.len());
    let mut ceiling = Vec::with_capacity(kx_grid.len());
    for (ix, _) in kx_grid.iter().enumerate() {
        let rows = &bands.frequencies[ix * (s + 1)..(ix + 1) * (s + 1)];
        let mut iv = Vec::with_capacity(num_bands);
        for n in 0..num_bands {
            let lo = rows.iter().map(|r| r[n]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r[n]).fold(f64::NEG_INFINITY, f64::max);
            iv.push([lo, hi]);
        }
        ceiling.push(iv.last().map_or(0.0, |v| v[1]));
        allowed.push(merge_intervals(iv, MERGE_TOL));
    }
    Ok(ProjectedBands {
        polarization: pol,
        kx_grid: kx_grid.to_vec(),
        allowed,
        ceiling,
        light_line_index: 1.0,
        light_cone_masked: false,
    })
}

/// Marks the light cone `ω̃ > |kx| / n_surround` as forbidden for guided modes.
pub fn light_cone_mask(pb: &ProjectedBands, surround_index: f64) -> Result<ProjectedBands, AnalysisError> {
    if !(surround_index > 0.0) {
        return Err(AnalysisError::InvalidSurroundIndex(surround_index));
    }
    Ok(ProjectedBands {
        light_line_index: surround_index,
        light_cone_masked: true,
        ..pb.clone()
    })
}

/// Complete band gaps: intervals between `max_k ω_n` and `min_k ω_{n+1}`.
pub fn find_gaps(bands: &BandStructure) -> Vec<[f64; 2]> {
    let nb = bands.num_bands();
    let mut gaps = Vec::new();
    for n in 0..nb.saturating_sub(1) {
        let top = bands.frequencies.iter().map(|f| f[n]).fold(f64::NEG_INFINITY, f64::max);
        let bottom = bands
            .frequencies
            .iter()
            .map(|f| f[n + 1])
            .fold(f64::INFINITY, f64::min);
        if bottom > top {
            gaps.push([top, bottom]);
        }
    }
    gaps
}

/// Largest relative movement of gap edges between two gap lists; infinite if
/// the number of gaps differs.
pub fn gap_drift(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| [(x[0], y[0]), (x[1], y[1])])
        .map(|(p, q)| (p - q).abs() / p.abs().max(q.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Gaps from irreducible-zone sampling with `n` intervals per edge, checked
/// against a run with `2n` intervals; errors if edges drift by more than `max_drift`.
pub fn find_gaps_checked(
    solver: &Solver,
    pol: Polarization,
    num_bands: usize,
    n: usize,
    max_drift: f64,
) -> Result<Vec<[f64; 2]>, AnalysisError> {
    let kind = structure_kind(solver);
    let coarse = find_gaps(&solver.band_sweep(pol, &kpath::ibz_sampling(kind, n), num_bands, false)?);
    let fine = find_gaps(&solver.band_sweep(pol, &kpath::ibz_sampling(kind, 2 * n), num_bands, false)?);
    let drift = gap_drift(&coarse, &fine);
    if drift > max_drift {
        return Err(AnalysisError::InsufficientKSampling { drift });
    }
    Ok(fine)
}

fn structure_kind(solver: &Solver) -> crate::lattice::LatticeKind {
    let l = solver.fourier.lattice();
    if l.a2[0].abs() < 1e-12 && (l.a2[1] - 1.0).abs() < 1e-12 {
        crate::lattice::LatticeKind::Square
    } else {
        crate::lattice::LatticeKind::Hexagonal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapMapEntry {
    pub radius: f64,
    pub gaps: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapMap {
    pub polarization: Polarization,
    pub entries: Vec<GapMapEntry>,
}

impl GapMap {
    /// Lower edge of the lowest gap for each radius (`None` when closed).
    pub fn lowest_gap_bottoms(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(|e| e.gaps.first().map(|g| g[0])).collect()
    }
}

/// Settings for gap searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSearch {
    pub num_bands: usize,
    /// Intervals per irreducible-zone edge.
    pub k_density: usize,
}

impl Default for GapSearch {
    fn default() -> Self {
        Self {
            num_bands: 8,
            k_density: 8,
        }
    }
}

/// Band gaps of `template` for each radius, entries sorted by radius.
pub fn gap_map(
    template: &StructureSpec,
    radii: &[f64],
    pol: Polarization,
    search: &GapSearch,
    opts: &SolverOptions,
) -> Result<GapMap, AnalysisError> {
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| a.total_cmp(b));
    let path = kpath::ibz_sampling(template.lattice, search.k_density);
    let entries = radii
        .par_iter()
        .map(|&r| {
            let s = StructureSpec {
                defect: None,
                ..template.with_radius(r)
            };
            s.validate().map_err(crate::error::SolverError::from)?;
            let bands = Solver::for_structure(&s, opts)?.band_sweep(pol, &path, search.num_bands, false)?;
            Ok(GapMapEntry {
                radius: r,
                gaps: find_gaps(&bands),
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(GapMap {
        polarization: pol,
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeLabel {
    GapGuided,
    IndexGuided,
    Leaky,
    Extended,
}

impl std::fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModeLabel::GapGuided => "gap-guided",
            ModeLabel::IndexGuided => "index-guided",
            ModeLabel::Leaky => "leaky",
            ModeLabel::Extended => "extended",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedMode {
    pub kx: f64,
    pub band: usize,
    pub omega: f64,
    pub label: ModeLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectModeClassification {
    pub modes: Vec<ClassifiedMode>,
}

impl DefectModeClassification {
    pub fn count(&self, label: ModeLabel) -> usize {
        self.modes.iter().filter(|m| m.label == label).count()
    }
}

/// Label for a single `(kx, ω̃)` point against projection column `ix`.
pub fn classify_point(pb: &ProjectedBands, ix: usize, omega: f64) -> ModeLabel {
    let kx = pb.kx_grid[ix];
    if pb.above_light_line(kx, omega) {
        ModeLabel::Leaky
    } else if pb.is_allowed(ix, omega, MERGE_TOL) {
        ModeLabel::Extended
    } else if omega < pb.lowest_allowed(ix) {
        ModeLabel::IndexGuided
    } else {
        ModeLabel::GapGuided
    }
}

/// Labels every `(band, kx)` of a supercell band structure computed along the guide.
pub fn classify_defect_modes(
    defect_bands: &BandStructure,
    pb: &ProjectedBands,
) -> Result<DefectModeClassification, AnalysisError> {
    if defect_bands.k_path.len() != pb.kx_grid.len() {
        return Err(AnalysisError::AxisMismatch(format!(
            "{} defect k-points vs {} projected columns",
            defect_bands.k_path.len(),
            pb.kx_grid.len()
        )));
    }
    for (k, kx) in defect_bands.k_path.iter().zip(&pb.kx_grid) {
        if k[1].abs() > 1e-12 || (k[0] - kx).abs() > 1e-12 {
            return Err(AnalysisError::AxisMismatch(format!(
                "k = ({}, {}) does not lie on the guide axis at kx = {}",
                k[0], k[1], kx
            )));
        }
    }
    let mut modes = Vec::new();
    for (ix, row) in defect_bands.frequencies.iter().enumerate() {
        for (band, &omega) in row.iter().enumerate() {
            modes.push(ClassifiedMode {
                kx: pb.kx_grid[ix],
                band,
                omega,
                label: classify_point(pb, ix, omega),
            });
        }
    }
    Ok(DefectModeClassification { modes })
}

/// Group velocity `dω̃/dk̃` (units of c) on a uniform grid: central differences
/// inside, second-order one-sided differences at both ends.
pub fn group_velocity(k: &[f64], omega: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    let n = omega.len();
    if n < 3 || k.len() != n {
        return Err(AnalysisError::TooFewSamples(n.min(k.len())));
    }
    let dk = k[1] - k[0];
    if dk == 0.0
        || k
            .windows(2)
            .any(|w| ((w[1] - w[0]) - dk).abs() > 1e-9 * dk.abs().max(1.0))
    {
        return Err(AnalysisError::NonUniformSpacing);
    }
    let mut u = vec![0.0; n];
    // written in differences so that a flat band gives exactly zero
    u[0] = (4.0 * (omega[1] - omega[0]) - (omega[2] - omega[0])) / (2.0 * dk);
    u[n - 1] = (4.0 * (omega[n - 1] - omega[n - 2]) - (omega[n - 1] - omega[n - 3])) / (2.0 * dk);
    for i in 1..n - 1 {
        u[i] = (omega[i + 1] - omega[i - 1]) / (2.0 * dk);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{DefectSpec, LatticeKind};

    fn bs(freqs: Vec<Vec<f64>>) -> BandStructure {
        BandStructure {
            polarization: Polarization::Even,
            k_path: (0..freqs.len()).map(|i| [i as f64 * 0.1, 0.0]).collect(),
            frequencies: freqs,
            modes: None,
            meta: None,
        }
    }

    #[test]
    fn merge_behaviour() {
        let m = merge_intervals(vec![[0.3, 0.4], [0.0, 0.1], [0.1 + 5e-7, 0.2], [0.35, 0.5]], MERGE_TOL);
        assert_eq!(m, vec![[0.0, 0.2], [0.3, 0.5]]);
    }

    #[test]
    fn artificial_gap() {
        let b = bs(vec![vec![0.2, 0.35], vec![0.3, 0.4], vec![0.25, 0.37]]);
        assert_eq!(find_gaps(&b), vec![[0.3, 0.35]]);
        let closed = bs(vec![vec![0.2, 0.35], vec![0.36, 0.4]]);
        assert!(find_gaps(&closed).is_empty());
    }

    #[test]
    fn uniform_medium_has_no_gaps() {
        let s = StructureSpec::perfect(LatticeKind::Hexagonal, 0.0, 13.0);
        let solver = Solver::for_structure(&s, &SolverOptions { cutoff: 4.0, ..Default::default() }).unwrap();
        let b = solver
            .band_sweep(Polarization::Even, &kpath::ibz_sampling(LatticeKind::Hexagonal, 8), 8, false)
            .unwrap();
        assert!(find_gaps(&b).is_empty());
    }

    #[test]
    fn light_cone() {
        let pb = ProjectedBands {
            polarization: Polarization::Even,
            kx_grid: vec![0.0, 0.3],
            allowed: vec![vec![[0.0, 1.0]], vec![[0.1, 1.0]]],
            ceiling: vec![1.0, 1.0],
            light_line_index: 1.0,
            light_cone_masked: false,
        };
        let air = light_cone_mask(&pb, 1.0).unwrap();
        assert!(air.above_light_line(0.3, 0.3001));
        assert!(!air.above_light_line(0.3, 0.2999));
        assert!(air.above_light_line(0.0, 1e-9));
        let oxide = light_cone_mask(&pb, 1.5).unwrap();
        assert!(oxide.above_light_line(0.3, 0.21));
        assert!(!oxide.above_light_line(0.3, 0.19));
        assert!(light_cone_mask(&pb, 0.0).is_err());
    }

    #[test]
    fn classification_rules() {
        let pb = ProjectedBands {
            polarization: Polarization::Even,
            kx_grid: vec![0.4],
            allowed: vec![vec![[0.15, 0.2], [0.3, 0.6]]],
            ceiling: vec![0.6],
            light_line_index: 1.0,
            light_cone_masked: true,
        };
        assert_eq!(classify_point(&pb, 0, 0.1), ModeLabel::IndexGuided);
        assert_eq!(classify_point(&pb, 0, 0.25), ModeLabel::GapGuided);
        assert_eq!(classify_point(&pb, 0, 0.18), ModeLabel::Extended);
        assert_eq!(classify_point(&pb, 0, 0.45), ModeLabel::Leaky);
    }

    #[test]
    fn classification_axis_mismatch() {
        let pb = ProjectedBands {
            polarization: Polarization::Even,
            kx_grid: vec![0.0, 0.1],
            allowed: vec![vec![], vec![]],
            ceiling: vec![1.0, 1.0],
            light_line_index: 1.0,
            light_cone_masked: true,
        };
        let mut b = bs(vec![vec![0.1], vec![0.2]]);
        assert!(classify_defect_modes(&b, &pb).is_ok());
        b.k_path[1] = [0.1, 0.05];
        assert!(matches!(classify_defect_modes(&b, &pb), Err(AnalysisError::AxisMismatch(_))));
    }

    #[test]
    fn projection_needs_perfect_crystal() {
        let s = StructureSpec {
            defect: Some(DefectSpec::default()),
            supercell_rows: 7,
            ..StructureSpec::perfect(LatticeKind::Hexagonal, 0.3, 13.0)
        };
        assert!(matches!(
            project_bands(&s, Polarization::Even, &[0.1], 8, 4, &SolverOptions::default()),
            Err(AnalysisError::DefectPresent)
        ));
        let p = StructureSpec::perfect(LatticeKind::Hexagonal, 0.3, 13.0);
        assert!(matches!(
            project_bands(&p, Polarization::Even, &[0.1], 4, 4, &SolverOptions::default()),
            Err(AnalysisError::TooFewTransverseSamples { .. })
        ));
    }

    #[test]
    fn velocities() {
        let k: Vec<f64> = (0..11).map(|i| i as f64 * 0.05).collect();
        let lin: Vec<f64> = k.iter().map(|x| x / 13f64.sqrt()).collect();
        for u in group_velocity(&k, &lin).unwrap() {
            assert!((u - 0.27735).abs() < 1e-5);
        }
        let flat = vec![0.3; 11];
        assert!(group_velocity(&k, &flat).unwrap().iter().all(|u| *u == 0.0));
        let kq: Vec<f64> = (0..41).map(|i| i as f64 * DEFAULT_DK).collect();
        let quad: Vec<f64> = kq.iter().map(|x| x * x).collect();
        let u = group_velocity(&kq, &quad).unwrap();
        assert!((u[40] - 0.4).abs() < 1e-12);
        assert!((u[0] - 0.0).abs() < 1e-12);
        assert!(matches!(group_velocity(&k[..2], &lin[..2]), Err(AnalysisError::TooFewSamples(2))));
        let bad = [0.0, 0.1, 0.3];
        assert!(matches!(group_velocity(&bad, &[0.0; 3]), Err(AnalysisError::NonUniformSpacing)));
    }
}
