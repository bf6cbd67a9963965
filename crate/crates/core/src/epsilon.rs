//! Dielectric rasterization and plane-wave Fourier representation.
//!
//! Pixel `(j1, j2)` is centred at fractional position `(j1/n1, j2/n2)`. Pixels
//! crossed by a hole boundary take the exact area-weighted average of the two
//! media, computed from the circle/parallelogram intersection.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::PlaneWaveBasis;
use crate::error::GeometryError;
use crate::fft::{fft2, wrap_index, Direction};
use crate::lattice::{cross, dot, norm, Cell, Lattice, Vec2};
use crate::linalg::{self, CMatrix};

pub const MIN_RESOLUTION: usize = 16;

/// ε sampled on a uniform mesh over the cell, plus the per-pixel hole fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonGrid {
    pub lattice: Lattice,
    pub n: [usize; 2],
    pub eps: Vec<f64>,
    /// Fraction of each pixel occupied by hole medium (0 in solid material).
    pub hole_fraction: Vec<f64>,
}

impl EpsilonGrid {
    /// Grid from an arbitrary ε(fractional position) evaluated at pixel centres.
    pub fn from_fn(lattice: Lattice, n: [usize; 2], f: impl Fn(Vec2) -> f64) -> Self {
        let mut eps = Vec::with_capacity(n[0] * n[1]);
        for j1 in 0..n[0] {
            for j2 in 0..n[1] {
                eps.push(f([j1 as f64 / n[0] as f64, j2 as f64 / n[1] as f64]));
            }
        }
        let hole_fraction = vec![0.0; eps.len()];
        Self {
            lattice,
            n,
            eps,
            hole_fraction,
        }
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.eps.iter().sum::<f64>() / self.eps.len() as f64
    }

    pub fn pixel_area(&self) -> f64 {
        self.lattice.area() / self.len() as f64
    }

    /// Material indicator χ̃: 1 in solid, 0 in holes, fractional on boundaries.
    pub fn material_indicator(&self) -> Vec<f64> {
        self.hole_fraction.iter().map(|h| 1.0 - h).collect()
    }

    /// Normalized DFT `(1/N) Σ_j ε_j e^{-iG·r_j}` for every grid frequency.
    pub fn dft(&self) -> Vec<Complex64> {
        let mut d: Vec<Complex64> = self.eps.iter().map(|&e| Complex64::new(e, 0.0)).collect();
        fft2(&mut d, self.n[0], self.n[1], Direction::Forward);
        let scale = 1.0 / self.len() as f64;
        d.iter_mut().for_each(|c| *c *= scale);
        d
    }

    /// Inverse transform of DFT coefficients back onto the mesh.
    pub fn synthesize(n: [usize; 2], coefficients: &[Complex64]) -> Vec<Complex64> {
        let mut d = coefficients.to_vec();
        fft2(&mut d, n[0], n[1], Direction::Inverse);
        d
    }

    pub fn coefficient(dft: &[Complex64], n: [usize; 2], m: [i32; 2]) -> Complex64 {
        dft[wrap_index(m[0], n[0]) * n[1] + wrap_index(m[1], n[1])]
    }
}

/// Signed area of the intersection of the disk `|x| <= r` with triangle `(0, a, b)`.
fn disk_triangle_area(a: Vec2, b: Vec2, r: f64) -> f64 {
    let r2 = r * r;
    let sector = |u: Vec2, v: Vec2| 0.5 * r2 * cross(u, v).atan2(dot(u, v));
    let (na2, nb2) = (dot(a, a), dot(b, b));
    if na2 <= r2 && nb2 <= r2 {
        return 0.5 * cross(a, b);
    }
    let d = [b[0] - a[0], b[1] - a[1]];
    let dd = dot(d, d);
    if dd == 0.0 {
        return 0.0;
    }
    let ad = dot(a, d);
    let disc = ad * ad - dd * (na2 - r2);
    if disc <= 0.0 {
        return sector(a, b);
    }
    let sq = disc.sqrt();
    let t1 = (-ad - sq) / dd;
    let t2 = (-ad + sq) / dd;
    if t2 <= 0.0 || t1 >= 1.0 {
        return sector(a, b);
    }
    let t1 = t1.max(0.0);
    let t2 = t2.min(1.0);
    let p1 = [a[0] + t1 * d[0], a[1] + t1 * d[1]];
    let p2 = [a[0] + t2 * d[0], a[1] + t2 * d[1]];
    sector(a, p1) + 0.5 * cross(p1, p2) + sector(p2, b)
}

/// Area of the intersection between a disk and a convex polygon.
fn disk_polygon_area(center: Vec2, r: f64, poly: &[Vec2]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        s += disk_triangle_area(
            [p[0] - center[0], p[1] - center[1]],
            [q[0] - center[0], q[1] - center[1]],
            r,
        );
    }
    s.abs()
}

/// Rasterizes a cell with `resolution` samples per lattice period along each
/// primitive direction (the supercell's long axis gets `resolution × rows`).
pub fn rasterize(cell: &Cell, resolution: usize) -> Result<EpsilonGrid, GeometryError> {
    if resolution < MIN_RESOLUTION {
        return Err(GeometryError::ResolutionTooLow {
            got: resolution,
            min: MIN_RESOLUTION,
        });
    }
    Ok(rasterize_mesh(cell, [resolution, resolution * cell.rows]))
}

/// Rasterizes a cell on an explicit `n1 × n2` mesh.
pub fn rasterize_mesh(cell: &Cell, n: [usize; 2]) -> EpsilonGrid {
    let lat = cell.lattice;
    let (n1, n2) = (n[0], n[1]);
    let mut hole_fraction = vec![0.0; n1 * n2];
    let r = cell.hole_radius;
    if r > 0.0 {
        let h1 = [lat.a1[0] / n1 as f64, lat.a1[1] / n1 as f64];
        let h2 = [lat.a2[0] / n2 as f64, lat.a2[1] / n2 as f64];
        let pixel_area = cross(h1, h2).abs();
        // half of the longer diagonal bounds the pixel from its centre
        let rho = 0.5
            * norm([h1[0] + h2[0], h1[1] + h2[1]]).max(norm([h1[0] - h2[0], h1[1] - h2[1]]));
        // fractional half-extent of a disk along each axis: r |b_i| / 2π
        let ext = [
            r * norm(lat.b1) / (2.0 * std::f64::consts::PI),
            r * norm(lat.b2) / (2.0 * std::f64::consts::PI),
        ];
        for hole in &cell.holes {
            for i1 in -1..=1 {
                for i2 in -1..=1 {
                    let c = [
                        hole[0] + i1 as f64 * lat.a1[0] + i2 as f64 * lat.a2[0],
                        hole[1] + i1 as f64 * lat.a1[1] + i2 as f64 * lat.a2[1],
                    ];
                    let f = lat.to_fractional(c);
                    let lo1 = ((f[0] - ext[0]) * n1 as f64).floor() as i64 - 1;
                    let hi1 = ((f[0] + ext[0]) * n1 as f64).ceil() as i64 + 1;
                    let lo2 = ((f[1] - ext[1]) * n2 as f64).floor() as i64 - 1;
                    let hi2 = ((f[1] + ext[1]) * n2 as f64).ceil() as i64 + 1;
                    for j1 in lo1.max(0)..=hi1.min(n1 as i64 - 1) {
                        for j2 in lo2.max(0)..=hi2.min(n2 as i64 - 1) {
                            let p = lat.to_cartesian([j1 as f64 / n1 as f64, j2 as f64 / n2 as f64]);
                            let d = norm([p[0] - c[0], p[1] - c[1]]);
                            let frac = if d >= r + rho {
                                0.0
                            } else if d <= r - rho {
                                1.0
                            } else {
                                let corners = [
                                    [p[0] - 0.5 * h1[0] - 0.5 * h2[0], p[1] - 0.5 * h1[1] - 0.5 * h2[1]],
                                    [p[0] + 0.5 * h1[0] - 0.5 * h2[0], p[1] + 0.5 * h1[1] - 0.5 * h2[1]],
                                    [p[0] + 0.5 * h1[0] + 0.5 * h2[0], p[1] + 0.5 * h1[1] + 0.5 * h2[1]],
                                    [p[0] - 0.5 * h1[0] + 0.5 * h2[0], p[1] - 0.5 * h1[1] + 0.5 * h2[1]],
                                ];
                                disk_polygon_area(c, r, &corners) / pixel_area
                            };
                            hole_fraction[j1 as usize * n2 + j2 as usize] += frac;
                        }
                    }
                }
            }
        }
    }
    let eps = hole_fraction
        .iter_mut()
        .map(|h| {
            *h = h.clamp(0.0, 1.0);
            cell.eps_background + (cell.eps_hole - cell.eps_background) * *h
        })
        .collect();
    EpsilonGrid {
        lattice: lat,
        n,
        eps,
        hole_fraction,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InverseRule {
    /// Fourier coefficients of 1/ε taken directly from the mesh.
    DirectEta,
    /// Matrix inverse of the truncated ε(G − G') matrix.
    #[default]
    InverseEpsMatrix,
}

/// Plane-wave representation of the dielectric: ε(G − G') and η(G, G').
#[derive(Debug, Clone)]
pub struct EpsilonFourier {
    pub grid: EpsilonGrid,
    pub basis: PlaneWaveBasis,
    pub rule: InverseRule,
    /// Mesh DFT of ε (all grid frequencies).
    pub eps_dft: Vec<Complex64>,
    /// Truncated ε(G_i − G_j).
    pub eps_matrix: CMatrix,
    /// η(G_i, G_j) per `rule`.
    pub eta_matrix: CMatrix,
}

impl EpsilonFourier {
    pub fn new(grid: EpsilonGrid, basis: PlaneWaveBasis, rule: InverseRule) -> Result<Self, GeometryError> {
        let needed = basis.min_grid();
        if grid.n[0] < needed[0] || grid.n[1] < needed[1] {
            return Err(GeometryError::AliasingRisk { grid: grid.n, needed });
        }
        let eps_dft = grid.dft();
        let eps_matrix = difference_matrix(&basis, &eps_dft, grid.n);
        let eta_matrix = match rule {
            InverseRule::InverseEpsMatrix => linalg::hpd_inverse(&eps_matrix),
            InverseRule::DirectEta => {
                let inv = EpsilonGrid {
                    eps: grid.eps.iter().map(|e| 1.0 / e).collect(),
                    ..grid.clone()
                };
                difference_matrix(&basis, &inv.dft(), grid.n)
            }
        };
        Ok(Self {
            grid,
            basis,
            rule,
            eps_dft,
            eps_matrix,
            eta_matrix,
        })
    }

    /// Fourier coefficient of ε at integer reciprocal coordinates `m`.
    pub fn eps_coefficient(&self, m: [i32; 2]) -> Complex64 {
        EpsilonGrid::coefficient(&self.eps_dft, self.grid.n, m)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.grid.lattice
    }
}

fn difference_matrix(basis: &PlaneWaveBasis, dft: &[Complex64], n: [usize; 2]) -> CMatrix {
    let len = basis.len();
    let mut m = CMatrix::zeros(len);
    for (i, gi) in basis.indices.iter().enumerate() {
        for (j, gj) in basis.indices.iter().enumerate() {
            m.set(i, j, EpsilonGrid::coefficient(dft, n, [gi[0] - gj[0], gi[1] - gj[1]]));
        }
    }
    m.hermitize();
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeKind, StructureSpec};
    use std::f64::consts::PI;

    fn cell(kind: LatticeKind, r: f64, eps: f64) -> Cell {
        StructureSpec::perfect(kind, r, eps).cell().unwrap()
    }

    #[test]
    fn disk_fully_inside_polygon() {
        let sq = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        assert!((disk_polygon_area([0.0, 0.0], 0.5, &sq) - PI * 0.25).abs() < 1e-14);
        // quarter disk at a corner
        assert!((disk_polygon_area([1.0, 1.0], 0.5, &sq) - PI * 0.25 / 4.0).abs() < 1e-14);
        // polygon inside disk
        assert!((disk_polygon_area([0.0, 0.0], 3.0, &sq) - 4.0).abs() < 1e-14);
        // half disk on an edge
        assert!((disk_polygon_area([1.0, 0.0], 0.5, &sq) - PI * 0.125).abs() < 1e-14);
    }

    #[test]
    fn no_holes_is_uniform() {
        let g = rasterize(&cell(LatticeKind::Hexagonal, 0.0, 13.0), 32).unwrap();
        assert!(g.eps.iter().all(|&e| e == 13.0));
    }

    #[test]
    fn resolution_too_low() {
        assert!(matches!(
            rasterize(&cell(LatticeKind::Square, 0.2, 12.0), 8),
            Err(GeometryError::ResolutionTooLow { got: 8, min: 16 })
        ));
    }

    #[test]
    fn mean_matches_fill_fraction() {
        // analytic oracle: ε_bg + (ε_hole − ε_bg)·πr²/A
        let hex = rasterize(&cell(LatticeKind::Hexagonal, 0.38, 13.0), 64).unwrap();
        let f = PI * 0.38 * 0.38 / (3f64.sqrt() / 2.0);
        let expected = 13.0 - 12.0 * f;
        assert!((expected - 6.715).abs() < 1e-3);
        assert!((hex.mean() - expected).abs() < 1e-10);

        let sq = rasterize(&cell(LatticeKind::Square, 0.2, 12.0), 64).unwrap();
        let expected = 12.0 - 11.0 * PI * 0.04;
        assert!((expected - 10.618).abs() < 1e-3);
        assert!((sq.mean() - expected).abs() < 1e-10);
    }

    #[test]
    fn convergence_with_resolution() {
        let c = cell(LatticeKind::Hexagonal, 0.38, 13.0);
        let exact = c.analytic_mean_eps();
        let mut prev = f64::INFINITY;
        for res in [16, 32, 64, 128] {
            let err = (rasterize(&c, res).unwrap().mean() - exact).abs();
            assert!(err <= (prev / 2.0).max(1e-12));
            prev = err;
        }
    }

    #[test]
    fn supercell_mean_matches_primitive() {
        let prim = rasterize(&cell(LatticeKind::Hexagonal, 0.38, 13.0), 32).unwrap();
        let s = StructureSpec {
            defect: Some(crate::lattice::DefectSpec {
                missing_rows: 0,
                width_scale: 1.0,
            }),
            supercell_rows: 6,
            ..StructureSpec::perfect(LatticeKind::Hexagonal, 0.38, 13.0)
        };
        let sc = rasterize(&s.cell().unwrap(), 32).unwrap();
        assert!((sc.mean() - prim.mean()).abs() < 1e-10);
    }

    #[test]
    fn uniform_eta_is_scaled_identity() {
        let g = rasterize(&cell(LatticeKind::Square, 0.0, 13.0), 32).unwrap();
        let basis = PlaneWaveBasis::new(&g.lattice, 3.0);
        for rule in [InverseRule::DirectEta, InverseRule::InverseEpsMatrix] {
            let ef = EpsilonFourier::new(g.clone(), basis.clone(), rule).unwrap();
            for i in 0..basis.len() {
                for j in 0..basis.len() {
                    let want = if i == j { 1.0 / 13.0 } else { 0.0 };
                    assert!((ef.eta_matrix.get(i, j) - Complex64::new(want, 0.0)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn aliasing_guard() {
        let g = rasterize(&cell(LatticeKind::Square, 0.2, 13.0), 16).unwrap();
        let basis = PlaneWaveBasis::new(&g.lattice, 4.0);
        assert!(matches!(
            EpsilonFourier::new(g, basis, InverseRule::default()),
            Err(GeometryError::AliasingRisk { .. })
        ));
    }

    #[test]
    fn eps_dc_is_mesh_mean_and_hermitian() {
        let g = rasterize(&cell(LatticeKind::Hexagonal, 0.3, 13.0), 48).unwrap();
        let basis = PlaneWaveBasis::new(&g.lattice, 3.5);
        let ef = EpsilonFourier::new(g.clone(), basis, InverseRule::InverseEpsMatrix).unwrap();
        assert!((ef.eps_coefficient([0, 0]).re - g.mean()).abs() < 1e-12);
        assert!(ef.eps_coefficient([0, 0]).im.abs() < 1e-12);
        assert!(ef.eta_matrix.hermitian_defect() < 1e-12);
        assert!(ef.eps_matrix.hermitian_defect() < 1e-12);
    }

    #[test]
    fn inverse_transform_reproduces_grid() {
        let g = rasterize(&cell(LatticeKind::Hexagonal, 0.3, 13.0), 32).unwrap();
        let back = EpsilonGrid::synthesize(g.n, &g.dft());
        for (a, b) in g.eps.iter().zip(&back) {
            assert!((b.re - a).abs() < 1e-10 && b.im.abs() < 1e-10);
        }
    }
}
