//! Plane-wave-expansion eigensolver for 2D photonic crystals.
//!
//! The operator acts on magnetic-field coefficients:
//!
//! * even (TE-like, H out of plane): `M(G,G') = η(G,G') (k+G)·(k+G')`
//! * odd (TM-like, E out of plane):  `M(G,G') = |k+G| η(G,G') |k+G'|`
//!
//! with wavevectors in reduced units, so eigenvalues are `ω̃²` with
//! `ω̃ = ωa/2πc = a/λ`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::PlaneWaveBasis;
use crate::epsilon::{rasterize, EpsilonFourier, EpsilonGrid, InverseRule};
use crate::error::{GeometryError, SolverError};
use crate::fft::wrap_index;
use crate::lattice::{dot, norm, Cell, StructureSpec, Vec2};
use crate::linalg::{self, CMatrix};

/// Eigenvalues in `(-NEGATIVE_CLAMP, 0)` are treated as roundoff and clamped.
pub const NEGATIVE_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// TE-like: E in plane, H along z.
    #[serde(alias = "te")]
    Even,
    /// TM-like: E along z.
    #[serde(alias = "tm")]
    Odd,
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarization::Even => "even",
            Polarization::Odd => "odd",
        })
    }
}

/// A single Bloch eigenmode with its plane-wave coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochMode {
    /// Wavevector actually used by the solver (reduced into the first zone).
    pub k: Vec2,
    pub band_index: usize,
    pub polarization: Polarization,
    pub frequency: f64,
    /// Magnetic-field eigenvector, unit 2-norm.
    pub h_coefficients: Vec<Complex64>,
    /// Electric-field coefficients `(Ex, Ey, Ez)` per basis vector, scaled so that
    /// `∫_cell ε|E|² dA = 1` (zero for the static mode at Γ).
    pub e_coefficients: Vec<[Complex64; 3]>,
}

impl BlochMode {
    /// Same mode multiplied by a global phase `e^{iφ}`.
    pub fn with_phase(&self, phi: f64) -> Self {
        let p = Complex64::from_polar(1.0, phi);
        Self {
            h_coefficients: self.h_coefficients.iter().map(|c| c * p).collect(),
            e_coefficients: self
                .e_coefficients
                .iter()
                .map(|e| [e[0] * p, e[1] * p, e[2] * p])
                .collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            e_coefficients: self
                .e_coefficients
                .iter()
                .map(|e| [e[0] * s, e[1] * s, e[2] * s])
                .collect(),
            ..self.clone()
        }
    }
}

/// Provenance of a band computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandMeta {
    pub structure_hash: String,
    #[serde(default)]
    pub geometry_hash: String,
    pub cutoff: f64,
    pub rule: InverseRule,
    pub num_plane_waves: usize,
    pub resolution: [usize; 2],
    pub eps_background: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub polarization: Polarization,
    pub k_path: Vec<Vec2>,
    /// `frequencies[k][n]`, ascending in `n`.
    pub frequencies: Vec<Vec<f64>>,
    #[serde(skip)]
    pub modes: Option<Vec<Vec<BlochMode>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<BandMeta>,
}

impl BandStructure {
    pub fn num_bands(&self) -> usize {
        self.frequencies.first().map_or(0, |f| f.len())
    }

    pub fn band(&self, n: usize) -> Vec<f64> {
        self.frequencies.iter().map(|f| f[n]).collect()
    }

    pub fn is_sorted(&self) -> bool {
        self.frequencies
            .iter()
            .all(|f| f.windows(2).all(|w| w[0] <= w[1]))
    }

    /// Largest `|Δω̃| / |Δk|` between neighbouring path points over all bands.
    /// Values far above the group-velocity scale flag missed crossings or jumps.
    pub fn max_slope(&self) -> f64 {
        let mut s: f64 = 0.0;
        for i in 1..self.k_path.len() {
            let dk = norm([
                self.k_path[i][0] - self.k_path[i - 1][0],
                self.k_path[i][1] - self.k_path[i - 1][1],
            ]);
            if dk == 0.0 {
                continue;
            }
            for (a, b) in self.frequencies[i].iter().zip(&self.frequencies[i - 1]) {
                s = s.max((a - b).abs() / dk);
            }
        }
        s
    }
}

/// Eigensolver bound to one dielectric structure.
#[derive(Debug, Clone)]
pub struct Solver {
    pub fourier: EpsilonFourier,
    pub meta: Option<BandMeta>,
}

/// Options for building a solver from a structure description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Max |G| in units of 2π/a.
    pub cutoff: f64,
    /// Mesh samples per lattice period; raised automatically to avoid aliasing.
    pub resolution: usize,
    pub rule: InverseRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            resolution: 32,
            rule: InverseRule::InverseEpsMatrix,
        }
    }
}

/// Default plane-wave cutoff |G|max in units of 2π/a.
pub const DEFAULT_CUTOFF: f64 = 10.0;

impl Solver {
    pub fn new(fourier: EpsilonFourier) -> Self {
        Self { fourier, meta: None }
    }

    pub fn for_cell(cell: &Cell, opts: &SolverOptions) -> Result<Self, SolverError> {
        if !(opts.cutoff > 0.0) {
            return Err(SolverError::InvalidCutoff(opts.cutoff));
        }
        let basis = PlaneWaveBasis::new(&cell.lattice, opts.cutoff);
        let needed = basis.min_grid();
        let mut res = opts.resolution;
        while res < needed[0] || res * cell.rows < needed[1] {
            res *= 2;
        }
        let grid = rasterize(cell, res)?;
        let n = grid.n;
        let fourier = EpsilonFourier::new(grid, basis, opts.rule)?;
        let mut s = Self::new(fourier);
        s.meta = Some(BandMeta {
            structure_hash: String::new(),
            geometry_hash: String::new(),
            cutoff: opts.cutoff,
            rule: opts.rule,
            num_plane_waves: s.fourier.basis.len(),
            resolution: n,
            eps_background: cell.eps_background,
        });
        Ok(s)
    }

    pub fn for_structure(structure: &StructureSpec, opts: &SolverOptions) -> Result<Self, SolverError> {
        let cell = structure.cell()?;
        let mut s = Self::for_cell(&cell, opts)?;
        if let Some(m) = s.meta.as_mut() {
            m.structure_hash = structure_hash(structure);
            m.geometry_hash = geometry_hash(structure);
        }
        Ok(s)
    }

    pub fn basis(&self) -> &PlaneWaveBasis {
        &self.fourier.basis
    }

    pub fn grid(&self) -> &EpsilonGrid {
        &self.fourier.grid
    }

    /// Hermitian operator at reduced wavevector `k` (reduced into the first zone).
    pub fn assemble(&self, k: Vec2, pol: Polarization) -> CMatrix {
        let k = self.fourier.lattice().reduce_to_bz(k);
        assemble_operator(&self.fourier, k, pol)
    }

    /// Frequencies (and optionally normalized modes) at a single k-point.
    pub fn solve_k(
        &self,
        k: Vec2,
        pol: Polarization,
        num_bands: usize,
        keep_modes: bool,
    ) -> Result<(Vec<f64>, Option<Vec<BlochMode>>), SolverError> {
        let k = self.fourier.lattice().reduce_to_bz(k);
        let m = assemble_operator(&self.fourier, k, pol);
        let (freqs, vecs) = solve_bands(&m, num_bands, keep_modes).map_err(|reason| {
            SolverError::EigensolverFailure {
                kx: k[0],
                ky: k[1],
                reason,
            }
        })?;
        let modes = vecs.map(|vecs| {
            vecs.into_iter()
                .zip(&freqs)
                .enumerate()
                .map(|(n, (h, &w))| self.make_mode(k, n, pol, w, h))
                .collect()
        });
        Ok((freqs, modes))
    }

    /// Solves every k-point of the path; results keep the path order.
    pub fn band_sweep(
        &self,
        pol: Polarization,
        k_path: &[Vec2],
        num_bands: usize,
        keep_modes: bool,
    ) -> Result<BandStructure, SolverError> {
        if k_path.is_empty() {
            return Err(SolverError::EmptyPath);
        }
        if num_bands > self.basis().len() {
            return Err(SolverError::TooManyBands {
                requested: num_bands,
                available: self.basis().len(),
            });
        }
        let results: Vec<_> = k_path
            .par_iter()
            .map(|&k| self.solve_k(k, pol, num_bands, keep_modes))
            .collect::<Result<_, _>>()?;
        let (frequencies, modes): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        Ok(BandStructure {
            polarization: pol,
            k_path: k_path.to_vec(),
            frequencies,
            modes: if keep_modes {
                Some(modes.into_iter().map(|m| m.unwrap_or_default()).collect())
            } else {
                None
            },
            meta: self.meta.clone(),
        })
    }

    fn make_mode(&self, k: Vec2, n: usize, pol: Polarization, w: f64, h: Vec<Complex64>) -> BlochMode {
        let f = &self.fourier;
        let i = Complex64::new(0.0, 1.0);
        let zero = Complex64::new(0.0, 0.0);
        let kg: Vec<Vec2> = f
            .basis
            .g_vectors
            .iter()
            .map(|g| [k[0] + g[0], k[1] + g[1]])
            .collect();
        let mut e = vec![[zero; 3]; h.len()];
        match pol {
            Polarization::Even => {
                // D = ∇×(H ẑ) = i (k+G) × ẑ h
                let dx: Vec<_> = kg.iter().zip(&h).map(|(q, c)| i * q[1] * c).collect();
                let dy: Vec<_> = kg.iter().zip(&h).map(|(q, c)| -i * q[0] * c).collect();
                let ex = f.eta_matrix.mul_vec(&dx);
                let ey = f.eta_matrix.mul_vec(&dy);
                for (j, v) in e.iter_mut().enumerate() {
                    v[0] = ex[j];
                    v[1] = ey[j];
                }
            }
            Polarization::Odd => {
                let dz: Vec<_> = kg.iter().zip(&h).map(|(q, c)| norm(*q) * c).collect();
                let ez = f.eta_matrix.mul_vec(&dz);
                for (j, v) in e.iter_mut().enumerate() {
                    v[2] = ez[j];
                }
            }
        }
        let mut mode = BlochMode {
            k,
            band_index: n,
            polarization: pol,
            frequency: w,
            h_coefficients: h,
            e_coefficients: e,
        };
        let energy = coefficient_energy(&mode, f);
        if energy > 0.0 {
            mode = mode.scaled(1.0 / energy.sqrt());
        }
        mode
    }

    /// Real-space E field of `mode` on this solver's ε mesh.
    pub fn fields(&self, mode: &BlochMode) -> Result<FieldGrid, SolverError> {
        compute_fields(mode, &self.fourier.basis, self.grid())
    }
}

/// `∫_cell ε|E|² dA` evaluated in coefficient space as `A Σ e†[ε]e`.
pub fn coefficient_energy(mode: &BlochMode, f: &EpsilonFourier) -> f64 {
    let area = f.lattice().area();
    (0..3)
        .map(|c| {
            let v: Vec<_> = mode.e_coefficients.iter().map(|e| e[c]).collect();
            f.eps_matrix.sandwich(&v, &v).re
        })
        .sum::<f64>()
        * area
}

/// Builds the PWE operator at reduced wavevector `k` without zone reduction.
pub fn assemble_operator(f: &EpsilonFourier, k: Vec2, pol: Polarization) -> CMatrix {
    let kg: Vec<Vec2> = f
        .basis
        .g_vectors
        .iter()
        .map(|g| [k[0] + g[0], k[1] + g[1]])
        .collect();
    let mut m = match pol {
        Polarization::Even => CMatrix::from_fn(kg.len(), |i, j| f.eta_matrix.get(i, j) * dot(kg[i], kg[j])),
        Polarization::Odd => {
            let nk: Vec<f64> = kg.iter().map(|q| norm(*q)).collect();
            CMatrix::from_fn(kg.len(), |i, j| f.eta_matrix.get(i, j) * (nk[i] * nk[j]))
        }
    };
    m.hermitize();
    m
}

/// Checks that an operator and dielectric data share a basis size.
pub fn check_basis(m: &CMatrix, f: &EpsilonFourier) -> Result<(), SolverError> {
    if m.dim() != f.basis.len() {
        return Err(SolverError::BasisMismatch {
            operator: m.dim(),
            eps: f.basis.len(),
        });
    }
    Ok(())
}

/// Lowest `num_bands` frequencies `ω̃ = √λ` of a Hermitian PSD operator.
pub fn solve_bands(
    m: &CMatrix,
    num_bands: usize,
    vectors: bool,
) -> Result<(Vec<f64>, Option<Vec<Vec<Complex64>>>), String> {
    if num_bands > m.dim() {
        return Err(format!("{} bands requested from a {}-dim operator", num_bands, m.dim()));
    }
    let (vals, vecs) = linalg::eigh(m, vectors);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err("non-finite eigenvalue".into());
    }
    let mut freqs = Vec::with_capacity(num_bands);
    for &l in vals.iter().take(num_bands) {
        if l < -NEGATIVE_CLAMP {
            return Err(format!("negative eigenvalue {l:e}"));
        }
        freqs.push(l.max(0.0).sqrt());
    }
    Ok((freqs, vecs.map(|v| v.into_iter().take(num_bands).collect())))
}

/// Convenience wrapper: rasterize, transform, and sweep a k path.
pub fn band_sweep(
    structure: &StructureSpec,
    pol: Polarization,
    k_path: &[Vec2],
    num_bands: usize,
    opts: &SolverOptions,
) -> Result<BandStructure, SolverError> {
    Solver::for_structure(structure, opts)?.band_sweep(pol, k_path, num_bands, false)
}

/// Stable FNV-1a digest of the structure description.
pub fn structure_hash(structure: &StructureSpec) -> String {
    let text = format!(
        "{:?}|{:.15e}|{:.15e}|{:.15e}|{:?}|{}",
        structure.lattice,
        structure.hole_radius,
        structure.eps_background,
        structure.eps_hole,
        structure.defect.map(|d| (d.missing_rows, format!("{:.15e}", d.width_scale))),
        structure.supercell_rows
    );
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Geometry digest that ignores the background permittivity, used to check
/// that dual-ε sections share one structure.
pub fn geometry_hash(structure: &StructureSpec) -> String {
    structure_hash(&structure.with_eps(1.0))
}

/// Electric field sampled on a mesh, Bloch phase included.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub n: [usize; 2],
    pub values: Vec<[Complex64; 3]>,
}

/// Synthesizes `E(r) = Σ_G e_G e^{i(k+G)·r}` on the mesh of `grid`.
pub fn compute_fields(mode: &BlochMode, basis: &PlaneWaveBasis, grid: &EpsilonGrid) -> Result<FieldGrid, SolverError> {
    if mode.e_coefficients.is_empty() {
        return Err(SolverError::MissingEigenvector);
    }
    if mode.e_coefficients.len() != basis.len() {
        return Err(SolverError::BasisMismatch {
            operator: mode.e_coefficients.len(),
            eps: basis.len(),
        });
    }
    let n = grid.n;
    let e = basis.extent();
    if n[0] < 2 * e[0] + 1 || n[1] < 2 * e[1] + 1 {
        return Err(GeometryError::AliasingRisk {
            grid: n,
            needed: [2 * e[0] + 1, 2 * e[1] + 1],
        }
        .into());
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut comps = Vec::with_capacity(3);
    for c in 0..3 {
        let mut buf = vec![zero; n[0] * n[1]];
        let mut any = false;
        for (idx, coef) in basis.indices.iter().zip(&mode.e_coefficients) {
            if coef[c] != zero {
                any = true;
            }
            buf[wrap_index(idx[0], n[0]) * n[1] + wrap_index(idx[1], n[1])] = coef[c];
        }
        comps.push(if any { Some(EpsilonGrid::synthesize(n, &buf)) } else { None });
    }
    let lat = grid.lattice;
    let ka = lat.reciprocal_coordinates(mode.k);
    let mut values = vec![[zero; 3]; n[0] * n[1]];
    for j1 in 0..n[0] {
        for j2 in 0..n[1] {
            let phase = 2.0
                * std::f64::consts::PI
                * (ka[0] * j1 as f64 / n[0] as f64 + ka[1] * j2 as f64 / n[1] as f64);
            let p = Complex64::from_polar(1.0, phase);
            let j = j1 * n[1] + j2;
            for c in 0..3 {
                if let Some(v) = &comps[c] {
                    values[j][c] = v[j] * p;
                }
            }
        }
    }
    Ok(FieldGrid { n, values })
}

/// Midpoint quadrature of `∫ ε |E|² dA` on the mesh.
pub fn mesh_energy(fields: &FieldGrid, grid: &EpsilonGrid) -> f64 {
    let da = grid.pixel_area();
    fields
        .values
        .iter()
        .zip(&grid.eps)
        .map(|(v, e)| e * v.iter().map(|c| c.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        * da
}

/// Rescales a mode so that the mesh quadrature of `ε|E|²` equals 1.
pub fn normalize_mode(mode: &BlochMode, basis: &PlaneWaveBasis, grid: &EpsilonGrid) -> Result<BlochMode, SolverError> {
    let f = compute_fields(mode, basis, grid)?;
    let w = mesh_energy(&f, grid);
    if !(w > 0.0) {
        return Err(SolverError::ZeroVector);
    }
    Ok(mode.scaled(1.0 / w.sqrt()))
}

/// Standard k paths in reduced units.
pub mod kpath {
    use crate::lattice::{LatticeKind, Vec2};

    fn segment(out: &mut Vec<Vec2>, a: Vec2, b: Vec2, n: usize, include_end: bool) {
        let m = if include_end { n + 1 } else { n };
        for i in 0..m {
            let t = i as f64 / n as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }

    /// High-symmetry points of the primitive Brillouin zone (Γ, M, K/X).
    pub fn corners(kind: LatticeKind) -> Vec<(&'static str, Vec2)> {
        match kind {
            LatticeKind::Square => vec![("G", [0.0, 0.0]), ("X", [0.5, 0.0]), ("M", [0.5, 0.5])],
            _ => {
                let s3 = 3f64.sqrt();
                vec![
                    ("G", [0.0, 0.0]),
                    ("M", [0.5, 0.5 / s3]),
                    ("K", [2.0 / 3.0, 0.0]),
                ]
            }
        }
    }

    /// Closed boundary of the irreducible zone, `n` intervals per segment.
    pub fn ibz_boundary(kind: LatticeKind, n: usize) -> Vec<Vec2> {
        let c = corners(kind);
        let mut out = Vec::new();
        segment(&mut out, c[0].1, c[1].1, n, false);
        segment(&mut out, c[1].1, c[2].1, n, false);
        segment(&mut out, c[2].1, c[0].1, n, true);
        out
    }

    /// Boundary plus a uniform interior grid of the irreducible triangle.
    pub fn ibz_sampling(kind: LatticeKind, n: usize) -> Vec<Vec2> {
        let c = corners(kind);
        let mut out = ibz_boundary(kind, n);
        let (g, p1, p2) = (c[0].1, c[1].1, c[2].1);
        for i in 1..n {
            for j in 1..n - i {
                let (u, v) = (i as f64 / n as f64, j as f64 / n as f64);
                out.push([
                    g[0] + u * (p1[0] - g[0]) + v * (p2[0] - g[0]),
                    g[1] + u * (p1[1] - g[1]) + v * (p2[1] - g[1]),
                ]);
            }
        }
        out
    }

    /// `n + 1` points `kx ∈ [0, 0.5]` along the guide axis.
    pub fn guide_grid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| 0.5 * i as f64 / n as f64).collect()
    }

    pub fn guide_path(kx: &[f64]) -> Vec<Vec2> {
        kx.iter().map(|&x| [x, 0.0]).collect()
    }
}
