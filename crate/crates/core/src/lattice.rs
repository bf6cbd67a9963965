//! Bravais lattices, hole geometry and line-defect supercells.
//!
//! Lengths are in units of the lattice constant `a`. Reciprocal vectors are
//! stored with the `2π` factor included so that `a_i · b_j = 2π δ_ij`;
//! wavevectors elsewhere in the crate are reduced (units of `2π/a`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

pub type Vec2 = [f64; 2];

#[inline]
pub fn dot(u: Vec2, v: Vec2) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

#[inline]
pub fn cross(u: Vec2, v: Vec2) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

#[inline]
pub fn norm(u: Vec2) -> f64 {
    dot(u, u).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Hexagonal,
    Square,
    Supercell,
}

/// A 2D Bravais lattice with its reciprocal basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub kind: LatticeKind,
    pub a1: Vec2,
    pub a2: Vec2,
    pub b1: Vec2,
    pub b2: Vec2,
}

impl Lattice {
    pub fn hexagonal() -> Self {
        Self::from_vectors(LatticeKind::Hexagonal, [1.0, 0.0], [0.5, 0.75f64.sqrt()])
    }

    pub fn square() -> Self {
        Self::from_vectors(LatticeKind::Square, [1.0, 0.0], [0.0, 1.0])
    }

    /// Builds the primitive lattice of the given kind.
    pub fn build(kind: LatticeKind) -> Result<Self, GeometryError> {
        match kind {
            LatticeKind::Hexagonal => Ok(Self::hexagonal()),
            LatticeKind::Square => Ok(Self::square()),
            LatticeKind::Supercell => Err(GeometryError::UnsupportedLattice(kind)),
        }
    }

    pub fn from_vectors(kind: LatticeKind, a1: Vec2, a2: Vec2) -> Self {
        let det = cross(a1, a2);
        assert!(det.abs() > 1e-12, "lattice vectors are linearly dependent");
        let s = 2.0 * PI / det;
        Self {
            kind,
            a1,
            a2,
            b1: [a2[1] * s, -a2[0] * s],
            b2: [-a1[1] * s, a1[0] * s],
        }
    }

    pub fn area(&self) -> f64 {
        cross(self.a1, self.a2).abs()
    }

    pub fn to_cartesian(&self, frac: Vec2) -> Vec2 {
        [
            self.a1[0] * frac[0] + self.a2[0] * frac[1],
            self.a1[1] * frac[0] + self.a2[1] * frac[1],
        ]
    }

    /// Fractional coordinates of a real-space point.
    pub fn to_fractional(&self, r: Vec2) -> Vec2 {
        [dot(r, self.b1) / (2.0 * PI), dot(r, self.b2) / (2.0 * PI)]
    }

    /// Reciprocal vector `n1 b1 + n2 b2` in reduced units (2π/a).
    pub fn reciprocal_reduced(&self, n: [i32; 2]) -> Vec2 {
        let (n1, n2) = (n[0] as f64, n[1] as f64);
        [
            (n1 * self.b1[0] + n2 * self.b2[0]) / (2.0 * PI),
            (n1 * self.b1[1] + n2 * self.b2[1]) / (2.0 * PI),
        ]
    }

    /// Components of a reduced wavevector on the reciprocal basis, i.e. `k·a_i`.
    pub fn reciprocal_coordinates(&self, k: Vec2) -> Vec2 {
        [dot(k, self.a1), dot(k, self.a2)]
    }

    /// True if the reduced wavevector `q` is a reciprocal lattice vector.
    pub fn is_reciprocal_vector(&self, q: Vec2, tol: f64) -> bool {
        let c = self.reciprocal_coordinates(q);
        (c[0] - c[0].round()).abs() <= tol && (c[1] - c[1].round()).abs() <= tol
    }

    /// Maps a reduced wavevector into the first Brillouin zone (Wigner-Seitz cell).
    pub fn reduce_to_bz(&self, k: Vec2) -> Vec2 {
        let c = self.reciprocal_coordinates(k);
        let (c1, c2) = (c[0].round() as i32, c[1].round() as i32);
        let mut best = k;
        let mut best_norm = f64::INFINITY;
        for n1 in c1 - 2..=c1 + 2 {
            for n2 in c2 - 2..=c2 + 2 {
                let g = self.reciprocal_reduced([n1, n2]);
                let q = [k[0] - g[0], k[1] - g[1]];
                let nq = dot(q, q);
                if nq < best_norm - 1e-12 {
                    best_norm = nq;
                    best = q;
                }
            }
        }
        best
    }

    /// Largest admissible hole radius before neighbouring holes touch.
    pub fn packing_limit(kind: LatticeKind) -> f64 {
        match kind {
            LatticeKind::Hexagonal => 1.0 / 3f64.sqrt(),
            _ => 0.5,
        }
    }
}

/// Line-defect description: rows of holes removed from the middle of a supercell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectSpec {
    pub missing_rows: usize,
    #[serde(default = "default_width_scale")]
    pub width_scale: f64,
}

fn default_width_scale() -> f64 {
    1.0
}

impl Default for DefectSpec {
    fn default() -> Self {
        Self {
            missing_rows: 1,
            width_scale: 1.0,
        }
    }
}

/// Holey dielectric structure: circular holes of medium `eps_hole` in a
/// background of `eps_background`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub lattice: LatticeKind,
    pub hole_radius: f64,
    pub eps_background: f64,
    pub eps_hole: f64,
    pub defect: Option<DefectSpec>,
    pub supercell_rows: usize,
}

impl StructureSpec {
    pub fn perfect(lattice: LatticeKind, hole_radius: f64, eps_background: f64) -> Self {
        Self {
            lattice,
            hole_radius,
            eps_background,
            eps_hole: 1.0,
            defect: None,
            supercell_rows: 1,
        }
    }

    pub fn with_eps(&self, eps_background: f64) -> Self {
        Self {
            eps_background,
            ..self.clone()
        }
    }

    pub fn with_radius(&self, hole_radius: f64) -> Self {
        Self {
            hole_radius,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.lattice == LatticeKind::Supercell {
            return Err(GeometryError::UnsupportedLattice(self.lattice));
        }
        let limit = Lattice::packing_limit(self.lattice);
        if !(self.hole_radius >= 0.0 && self.hole_radius < limit) {
            return Err(GeometryError::RadiusOutOfRange {
                radius: self.hole_radius,
                limit,
            });
        }
        if !(self.eps_background >= 1.0) {
            return Err(GeometryError::InvalidPermittivity(self.eps_background));
        }
        if !(self.eps_hole >= 1.0) {
            return Err(GeometryError::InvalidPermittivity(self.eps_hole));
        }
        if self.supercell_rows == 0 {
            return Err(GeometryError::ZeroRows);
        }
        if let Some(d) = &self.defect {
            if d.missing_rows >= 1 && self.supercell_rows < d.missing_rows + 4 {
                return Err(GeometryError::CladdingTooThin {
                    rows: self.supercell_rows,
                    missing: d.missing_rows,
                });
            }
            if !(d.width_scale > 0.0) {
                return Err(GeometryError::InvalidWidthScale(d.width_scale));
            }
        }
        Ok(())
    }

    pub fn is_perfect(&self) -> bool {
        self.defect.map_or(true, |d| d.missing_rows == 0)
    }

    /// The computational cell: the primitive cell for a perfect crystal without
    /// a defect description, the supercell otherwise.
    pub fn cell(&self) -> Result<Cell, GeometryError> {
        if self.defect.is_some() {
            make_supercell(self)
        } else {
            self.validate()?;
            let lattice = Lattice::build(self.lattice)?;
            Ok(Cell {
                lattice,
                holes: if self.hole_radius > 0.0 { vec![[0.0, 0.0]] } else { vec![] },
                hole_radius: self.hole_radius,
                eps_background: self.eps_background,
                eps_hole: self.eps_hole,
                rows: 1,
            })
        }
    }
}

/// Concrete computational cell: lattice vectors plus hole centres (cartesian,
/// one representative per hole).
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lattice: Lattice,
    pub holes: Vec<Vec2>,
    pub hole_radius: f64,
    pub eps_background: f64,
    pub eps_hole: f64,
    /// Number of primitive periods along `a2`.
    pub rows: usize,
}

impl Cell {
    pub fn area(&self) -> f64 {
        self.lattice.area()
    }

    /// Number of rows (along `a2`) that carry holes.
    pub fn hole_rows(&self) -> usize {
        self.holes.len()
    }

    /// Analytic area-weighted mean of ε.
    pub fn analytic_mean_eps(&self) -> f64 {
        let hole_area = self.holes.len() as f64 * PI * self.hole_radius * self.hole_radius;
        let f = hole_area / self.area();
        self.eps_background + (self.eps_hole - self.eps_background) * f
    }
}

/// Builds a supercell periodic along x (the guide axis) with `supercell_rows`
/// transverse periods and `missing_rows` hole rows removed around the centre.
///
/// For the hexagonal lattice the rows run along the Γ–K direction; the
/// transverse vector is `N·a2` folded back by whole periods of `a1` so the cell
/// stays close to rectangular. Rows above the defect are shifted by
/// `(width_scale − 1)·(missing_rows + 1)` row spacings.
pub fn make_supercell(structure: &StructureSpec) -> Result<Cell, GeometryError> {
    structure.validate()?;
    let defect = structure.defect.ok_or(GeometryError::MissingDefect)?;
    let prim = Lattice::build(structure.lattice)?;
    let n = structure.supercell_rows;
    let missing = defect.missing_rows.min(n);

    let row_step = prim.a2;
    let row_spacing = row_step[1];
    let first_missing = (n - missing) / 2;
    let shift_y = if missing > 0 {
        (defect.width_scale - 1.0) * (missing as f64 + 1.0) * row_spacing
    } else {
        0.0
    };
    if missing > 0 {
        let gap = defect.width_scale * (missing as f64 + 1.0) * row_spacing;
        if gap < 2.0 * structure.hole_radius {
            return Err(GeometryError::InvalidWidthScale(defect.width_scale));
        }
    }

    let wrap = |x: f64| x - x.floor();
    let mut holes = Vec::new();
    if structure.hole_radius > 0.0 {
        for j in 0..n {
            if j >= first_missing && j < first_missing + missing {
                continue;
            }
            let mut x = wrap(j as f64 * row_step[0]);
            if x > 0.5 {
                x -= 1.0;
            }
            let mut y = j as f64 * row_spacing;
            if missing > 0 && j >= first_missing + missing {
                y += shift_y;
            }
            holes.push([x, y]);
        }
    }

    let nf = n as f64;
    let a2x = {
        let x = nf * row_step[0];
        x - x.floor()
    };
    let a2 = [a2x, nf * row_spacing + shift_y];
    let lattice = Lattice::from_vectors(LatticeKind::Supercell, prim.a1, a2);
    Ok(Cell {
        lattice,
        holes,
        hole_radius: structure.hole_radius,
        eps_background: structure.eps_background,
        eps_hole: structure.eps_hole,
        rows: n,
    })
}
