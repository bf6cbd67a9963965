//! Plane-wave basis: reciprocal-lattice vectors inside a cutoff sphere.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::lattice::{norm, Lattice, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveBasis {
    /// Max |G| in reduced units (2π/a).
    pub cutoff: f64,
    /// Integer coordinates `(n1, n2)` with `G = n1 b1 + n2 b2`.
    pub indices: Vec<[i32; 2]>,
    /// Reduced cartesian G vectors, same order as `indices`.
    pub g_vectors: Vec<Vec2>,
    lookup: HashMap<[i32; 2], usize>,
}

fn shell_key(g: Vec2) -> f64 {
    // collapse ulp-level differences so symmetric shells sort together
    let r2 = g[0] * g[0] + g[1] * g[1];
    (r2 * 1e9).round() / 1e9
}

fn ordered(lattice: &Lattice, mut idx: Vec<[i32; 2]>) -> Vec<[i32; 2]> {
    idx.sort_by(|a, b| {
        let ka = shell_key(lattice.reciprocal_reduced(*a));
        let kb = shell_key(lattice.reciprocal_reduced(*b));
        ka.partial_cmp(&kb).unwrap_or(Ordering::Equal).then(a.cmp(b))
    });
    idx
}

fn candidates(lattice: &Lattice, radius: f64) -> Vec<[i32; 2]> {
    // |n_i| <= |G|·|a_i| bounds every lattice point inside the sphere
    let m1 = (radius * norm(lattice.a1)).ceil() as i32 + 1;
    let m2 = (radius * norm(lattice.a2)).ceil() as i32 + 1;
    let mut out = Vec::new();
    for n1 in -m1..=m1 {
        for n2 in -m2..=m2 {
            out.push([n1, n2]);
        }
    }
    out
}

impl PlaneWaveBasis {
    /// All G with |G| <= cutoff (reduced units), ordered by |G| then by index.
    pub fn new(lattice: &Lattice, cutoff: f64) -> Self {
        let tol = 1e-9 * cutoff.max(1.0);
        let idx: Vec<_> = candidates(lattice, cutoff)
            .into_iter()
            .filter(|n| norm(lattice.reciprocal_reduced(*n)) <= cutoff + tol)
            .collect();
        Self::from_indices(lattice, cutoff, ordered(lattice, idx))
    }

    /// Smallest basis of complete |G| shells holding at least `count` plane waves.
    pub fn with_min_count(lattice: &Lattice, count: usize) -> Self {
        let count = count.max(1);
        let mut radius = 1.0;
        loop {
            let idx: Vec<_> = candidates(lattice, radius)
                .into_iter()
                .filter(|n| norm(lattice.reciprocal_reduced(*n)) <= radius)
                .collect();
            if idx.len() > count {
                let idx = ordered(lattice, idx);
                let last = shell_key(lattice.reciprocal_reduced(idx[count - 1]));
                let keep: Vec<_> = idx
                    .into_iter()
                    .take_while(|n| shell_key(lattice.reciprocal_reduced(*n)) <= last)
                    .collect();
                let cutoff = last.sqrt();
                return Self::from_indices(lattice, cutoff, keep);
            }
            radius *= 1.5;
        }
    }

    fn from_indices(lattice: &Lattice, cutoff: f64, indices: Vec<[i32; 2]>) -> Self {
        let g_vectors = indices.iter().map(|n| lattice.reciprocal_reduced(*n)).collect();
        let lookup = indices.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        Self {
            cutoff,
            indices,
            g_vectors,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, n: [i32; 2]) -> Option<usize> {
        self.lookup.get(&n).copied()
    }

    /// Largest |n1| and |n2| in the basis.
    pub fn extent(&self) -> [usize; 2] {
        let mut e = [0usize; 2];
        for n in &self.indices {
            e[0] = e[0].max(n[0].unsigned_abs() as usize);
            e[1] = e[1].max(n[1].unsigned_abs() as usize);
        }
        e
    }

    /// Minimum grid size per axis that represents every `G − G'` without aliasing.
    pub fn min_grid(&self) -> [usize; 2] {
        let e = self.extent();
        [2 * (2 * e[0] + 1), 2 * (2 * e[1] + 1)]
    }
}
