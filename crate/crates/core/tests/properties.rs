//! Randomized invariants of the solver, the dispersion analysis, the
//! phase-matching search and the overlap integral.

mod common;

use std::collections::BTreeSet;

use num_complex::Complex64;
use pcw_core::epsilon::{rasterize, EpsilonFourier, InverseRule};
use pcw_core::lattice::{DefectSpec, LatticeKind, StructureSpec};
use pcw_core::overlap::{overlap_integral, NonlinearRegion};
use pcw_core::phasematch::{
    dgd, find_degenerate_matches, find_nondegenerate_matches, residuals, stitch_dual_epsilon, MatchParams,
    MatchSolution, Section, StitchedDispersion,
};
use pcw_core::pwe::{kpath, normalize_mode};
use pcw_core::slab::{project_with_solver, MERGE_TOL};
use pcw_core::{BandStructure, BlochMode, PlaneWaveBasis, Polarization, Solver, SolverOptions};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = LatticeKind> {
    prop_oneof![Just(LatticeKind::Square), Just(LatticeKind::Hexagonal)]
}

fn pol() -> impl Strategy<Value = Polarization> {
    prop_oneof![Just(Polarization::Even), Just(Polarization::Odd)]
}

fn solver(kind: LatticeKind, r: f64, eps: f64, cutoff: f64) -> Solver {
    let s = StructureSpec::perfect(kind, r, eps);
    Solver::for_structure(
        &s,
        &SolverOptions {
            cutoff,
            ..Default::default()
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn time_reversal(kind in kind(), r in 0.1..0.45f64, eps in 2.0..13.0f64, kx in -0.5..0.5f64, ky in -0.5..0.5f64, pol in pol()) {
        let s = solver(kind, r, eps, 3.0);
        let (a, _) = s.solve_k([kx, ky], pol, 8, false).unwrap();
        let (b, _) = s.solve_k([-kx, -ky], pol, 8, false).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn reciprocal_shift_leaves_frequencies(kind in kind(), r in 0.1..0.45f64, kx in -0.5..0.5f64, ky in -0.5..0.5f64, i in -2i32..=2, j in -2i32..=2) {
        let s = solver(kind, r, 13.0, 3.0);
        let g = s.grid().lattice.reciprocal_reduced([i, j]);
        let (a, _) = s.solve_k([kx, ky], Polarization::Even, 6, false).unwrap();
        let (b, _) = s.solve_k([kx + g[0], ky + g[1]], Polarization::Even, 6, false).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    // Rayleigh-Ritz applies whenever the operator is the restriction of one
    // fixed quadratic form: odd modes under either rule (the inverse ε matrix
    // is the Galerkin pencil in E_z), even modes with direct η.
    #[test]
    fn nested_bases_never_raise_frequencies(kind in kind(), r in 0.1..0.45f64, eps in 2.0..13.0f64, c in 2.0..3.5f64, dc in 0.3..1.5f64, kx in -0.5..0.5f64, ky in -0.5..0.5f64, case in 0usize..3) {
        let (pol, rule) = [
            (Polarization::Odd, InverseRule::InverseEpsMatrix),
            (Polarization::Odd, InverseRule::DirectEta),
            (Polarization::Even, InverseRule::DirectEta),
        ][case];
        let cell = StructureSpec::perfect(kind, r, eps).cell().unwrap();
        let grid = rasterize(&cell, 64).unwrap();
        let solve = |cutoff: f64| {
            let basis = PlaneWaveBasis::new(&cell.lattice, cutoff);
            let f = EpsilonFourier::new(grid.clone(), basis, rule).unwrap();
            Solver::new(f).solve_k([kx, ky], pol, 8, false).unwrap().0
        };
        let (small, large) = (solve(c), solve(c + dc));
        for (n, (s, l)) in small.iter().zip(&large).enumerate() {
            prop_assert!(*l <= s + 1e-9, "{pol:?} {rule:?} band {n}: {l} > {s}");
        }
    }

    #[test]
    fn uniform_medium_is_folded_free_photon(kind in kind(), eps in 1.0..13.0f64, kx in -0.5..0.5f64, ky in -0.5..0.5f64, pol in pol()) {
        let s = solver(kind, 0.0, eps, 3.0);
        let lat = s.grid().lattice;
        let k = lat.reduce_to_bz([kx, ky]);
        let (w, _) = s.solve_k(k, pol, 6, false).unwrap();
        let want = common::folded_free_photon(lat.reciprocal_reduced([1, 0]), lat.reciprocal_reduced([0, 1]), k, eps, 6);
        for (a, b) in w.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-8 * b.max(1e-3), "{a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn more_bands_only_grow_the_projection(r in 0.2..0.45f64, kx in 0.0..0.5f64) {
        let s = solver(LatticeKind::Hexagonal, r, 13.0, 3.0);
        let few = project_with_solver(&s, Polarization::Even, &[kx], 8, 3).unwrap();
        let many = project_with_solver(&s, Polarization::Even, &[kx], 8, 5).unwrap();
        prop_assert!(many.ceiling[0] >= few.ceiling[0]);
        for iv in &few.allowed[0] {
            prop_assert!(
                many.allowed[0].iter().any(|o| o[0] <= iv[0] + 1e-12 && o[1] >= iv[1] - 1e-12),
                "{iv:?} not covered by {:?}", many.allowed[0]
            );
        }
    }

    #[test]
    fn uniform_supercell_folds_into_projection(kind in kind(), eps in 1.0..13.0f64, kx in 0.0..0.5f64) {
        let nb = 6;
        let prim = solver(kind, 0.0, eps, 4.0);
        let pb = project_with_solver(&prim, Polarization::Even, &[kx], 8, nb).unwrap();
        // below the bottom of the highest projected band only lower bands can contribute
        let half = 0.5 * prim.grid().lattice.reciprocal_reduced([0, 1])[1].abs();
        let limit = (0..=8)
            .map(|j| prim.solve_k([kx, half * j as f64 / 8.0], Polarization::Even, nb, false).unwrap().0[nb - 1])
            .fold(f64::INFINITY, f64::min);
        let sc = StructureSpec {
            defect: Some(DefectSpec { missing_rows: 0, width_scale: 1.0 }),
            supercell_rows: 4,
            ..StructureSpec::perfect(kind, 0.0, eps)
        };
        let s = Solver::for_structure(&sc, &SolverOptions { cutoff: 4.0, ..Default::default() }).unwrap();
        let (w, _) = s.solve_k([kx, 0.0], Polarization::Even, 4 * nb, false).unwrap();
        for x in w.into_iter().filter(|&x| x < limit) {
            prop_assert!(pb.is_allowed(0, x, MERGE_TOL), "{x} outside {:?}", pb.allowed[0]);
        }
    }
}

// ---- phase matching ----

fn band_set(n: usize, coeffs: &[[f64; 3]]) -> BandStructure {
    let kx = kpath::guide_grid(n);
    BandStructure {
        polarization: Polarization::Even,
        k_path: kpath::guide_path(&kx),
        frequencies: kx
            .iter()
            .map(|&k| {
                coeffs
                    .iter()
                    .map(|c| c[0] + c[1] * k * k + c[2] * (2.0 * std::f64::consts::PI * k).cos())
                    .collect()
            })
            .collect(),
        modes: None,
        meta: None,
    }
}

fn dispersion(n: usize, low: &[[f64; 3]], high: &[[f64; 3]]) -> StitchedDispersion {
    stitch_dual_epsilon(
        Section {
            bands: band_set(n, low),
            window: [0.0, 0.24],
        },
        Section {
            bands: band_set(n, high),
            window: [0.24, 0.6],
        },
        Some(232.5),
    )
    .unwrap()
}

fn coeffs(base: std::ops::Range<f64>) -> impl Strategy<Value = [f64; 3]> {
    (base, 0.0..0.3f64, -0.02..0.02f64).prop_map(|(a, b, c)| [a, b, c])
}

fn loose() -> MatchParams {
    MatchParams {
        energy_tol: 2e-3,
        m_range: [-1, 1],
        ..Default::default()
    }
}

fn tidy(k: f64) -> u64 {
    (k + 0.0).to_bits()
}

fn negated_key(s: &MatchSolution) -> (usize, usize, usize, i32, [u64; 3]) {
    let (mut a, mut b) = ((s.signal.band, -s.signal.k), (s.idler.band, -s.idler.k));
    if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
        std::mem::swap(&mut a, &mut b);
    }
    (s.pump.band, a.0, b.0, -s.g_shift, [tidy(-s.pump.k), tidy(a.1), tidy(b.1)])
}

fn key(s: &MatchSolution) -> (usize, usize, usize, i32, [u64; 3]) {
    (
        s.pump.band,
        s.signal.band,
        s.idler.band,
        s.g_shift,
        [tidy(s.pump.k), tidy(s.signal.k), tidy(s.idler.k)],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dgd_is_symmetric(u in -1.0..1.0f64, v in -1.0..1.0f64) {
        prop_assume!(u != 0.0 && v != 0.0);
        prop_assert_eq!(dgd(u, v), dgd(v, u));
        prop_assert_eq!(dgd(u, u).per_length, Some(0.0));
        prop_assert!(dgd(u, v).per_length.unwrap() >= 0.0);
    }

    #[test]
    fn searches_conserve_energy_and_momentum(
        low in prop::collection::vec(coeffs(0.08..0.12), 1..=3),
        high in prop::collection::vec(coeffs(0.22..0.26), 1..=2),
        n in 20usize..60,
    ) {
        let d = dispersion(n, &low, &high);
        let p = loose();
        let pumps: Vec<usize> = (0..high.len()).collect();
        let dcs: Vec<usize> = (0..low.len()).collect();
        let deg = find_degenerate_matches(&d, &pumps, &dcs, &p).unwrap();
        let non = find_nondegenerate_matches(&d, &pumps, &dcs, &p).unwrap();
        for s in deg.iter().chain(&non) {
            prop_assert!(s.energy_residual <= p.energy_tol);
            prop_assert!(s.momentum_residual <= p.momentum_tol);
            let (e, q) = s.recompute_residuals();
            prop_assert_eq!(e.to_bits(), s.energy_residual.to_bits());
            prop_assert_eq!(q.to_bits(), s.momentum_residual.to_bits());
        }
        for s in &deg {
            prop_assert_eq!(s.signal.band, s.idler.band);
            if s.signal.k == s.idler.k {
                prop_assert_eq!(s.pump.k, 2.0 * s.signal.k - s.g_shift as f64);
            } else {
                prop_assert_eq!(s.idler.k, -s.signal.k);
                prop_assert_eq!(s.pump.k, -(s.g_shift as f64));
            }
        }
    }

    #[test]
    fn degenerate_grid_solutions_are_nondegenerate_solutions(
        low in prop::collection::vec(coeffs(0.08..0.12), 1..=3),
        high in prop::collection::vec(coeffs(0.22..0.26), 1..=2),
        n in 20usize..60,
    ) {
        let d = dispersion(n, &low, &high);
        let p = loose();
        let pumps: Vec<usize> = (0..high.len()).collect();
        let dcs: Vec<usize> = (0..low.len()).collect();
        let nodes: BTreeSet<u64> = d.nodes().iter().map(|&k| tidy(k)).collect();
        let non: BTreeSet<_> = find_nondegenerate_matches(&d, &pumps, &dcs, &p).unwrap().iter().map(key).collect();
        for s in find_degenerate_matches(&d, &pumps, &dcs, &p).unwrap() {
            if nodes.contains(&tidy(s.signal.k)) && nodes.contains(&tidy(s.idler.k)) {
                prop_assert!(non.contains(&key(&s)), "{s:?}");
            }
        }
    }

    #[test]
    fn solution_sets_are_closed_under_time_reversal(
        low in prop::collection::vec(coeffs(0.08..0.12), 1..=3),
        high in prop::collection::vec(coeffs(0.22..0.26), 1..=2),
        n in 20usize..60,
    ) {
        let d = dispersion(n, &low, &high);
        let p = loose();
        let pumps: Vec<usize> = (0..high.len()).collect();
        let dcs: Vec<usize> = (0..low.len()).collect();
        let non = find_nondegenerate_matches(&d, &pumps, &dcs, &p).unwrap();
        let keys: BTreeSet<_> = non.iter().map(key).collect();
        for s in &non {
            prop_assert!(keys.contains(&negated_key(s)), "{s:?}");
        }
        let deg = find_degenerate_matches(&d, &pumps, &dcs, &p).unwrap();
        for s in &deg {
            let mirrored = deg.iter().any(|t| {
                t.pump.band == s.pump.band
                    && t.signal.band == s.signal.band
                    && t.g_shift == -s.g_shift
                    && (t.pump.k + s.pump.k).abs() < 1e-9
                    && ((t.signal.k + s.signal.k).abs() < 1e-9 || (t.signal.k + s.idler.k).abs() < 1e-9)
            });
            prop_assert!(mirrored, "{s:?}");
        }
    }

    #[test]
    fn whole_zone_shifts_are_compensated_by_m(
        low in prop::collection::vec(coeffs(0.08..0.12), 1..=3),
        high in prop::collection::vec(coeffs(0.22..0.26), 1..=2),
        n in 20usize..60,
        shift in prop_oneof![Just(-1i32), Just(1)],
    ) {
        let d = dispersion(n, &low, &high);
        let p = loose();
        let pumps: Vec<usize> = (0..high.len()).collect();
        let dcs: Vec<usize> = (0..low.len()).collect();
        for s in find_nondegenerate_matches(&d, &pumps, &dcs, &p).unwrap() {
            let band = d.low_band(s.signal.band).unwrap();
            let k1 = s.signal.k + shift as f64;
            let w1 = band.omega_at(k1);
            prop_assert!((w1 - s.signal.omega).abs() < 1e-12);
            let (e, q) = residuals(
                (s.pump.k, s.pump.omega),
                (k1, w1),
                (s.idler.k, s.idler.omega),
                s.g_shift + shift,
            );
            prop_assert!((e - s.energy_residual).abs() < 1e-12);
            prop_assert!((q - s.momentum_residual).abs() < 1e-12);
        }
    }
}

// ---- overlap ----

fn constant_mode(basis: &PlaneWaveBasis, grid: &pcw_core::EpsilonGrid, k: [f64; 2], e: [f64; 3]) -> BlochMode {
    let zero = Complex64::new(0.0, 0.0);
    let mut coeffs = vec![[zero; 3]; basis.len()];
    coeffs[basis.position([0, 0]).unwrap()] = [e[0].into(), e[1].into(), e[2].into()];
    let mode = BlochMode {
        k,
        band_index: 0,
        polarization: Polarization::Even,
        frequency: 0.1,
        h_coefficients: vec![],
        e_coefficients: coeffs,
    };
    normalize_mode(&mode, basis, grid).unwrap()
}

fn holey_modes() -> (Solver, Vec<BlochMode>, Vec<BlochMode>) {
    let s = solver(LatticeKind::Hexagonal, 0.3, 13.0, 3.0);
    let dc = s.solve_k([0.2, 0.0], Polarization::Even, 3, true).unwrap().1.unwrap();
    let pump = s.solve_k([0.4, 0.0], Polarization::Even, 5, true).unwrap().1.unwrap();
    (s, dc, pump)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn overlap_magnitude_is_gauge_invariant(a in 0.0..6.3f64, b in 0.0..6.3f64, c in 0.0..6.3f64) {
        let (s, dc, pump) = holey_modes();
        let region = NonlinearRegion::from_grid(s.grid(), 1.0);
        let o = |p: &BlochMode, x: &BlochMode, y: &BlochMode| {
            overlap_integral(p, x, y, s.basis(), s.grid(), &region).unwrap().magnitude
        };
        let base = o(&pump[4], &dc[1], &dc[2]);
        let turned = o(&pump[4].with_phase(a), &dc[1].with_phase(b), &dc[2].with_phase(c));
        prop_assert!((base - turned).abs() <= 1e-12 * base.max(1.0), "{base} vs {turned}");
        let swapped = o(&pump[4], &dc[2], &dc[1]);
        prop_assert!((base - swapped).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn wider_nonlinear_support_never_lowers_a_positive_overlap(r1 in 0.05..0.4f64, dr in 0.01..0.08f64, ex in 0.1..1.0f64, ey in 0.1..1.0f64) {
        let r2 = (r1 + dr).min(0.45);
        let cell = StructureSpec::perfect(LatticeKind::Hexagonal, r2, 13.0).cell().unwrap();
        let grid = rasterize(&cell, 32).unwrap();
        let small_holes = rasterize(&StructureSpec::perfect(LatticeKind::Hexagonal, r1, 13.0).cell().unwrap(), 32).unwrap();
        let basis = PlaneWaveBasis::new(&cell.lattice, 3.0);
        let m = constant_mode(&basis, &grid, [0.0, 0.0], [ex, ey, 0.0]);
        let narrow = NonlinearRegion::from_grid(&grid, 1.0);
        let wide = NonlinearRegion::from_grid(&small_holes, 1.0);
        let a = overlap_integral(&m, &m, &m, &basis, &grid, &narrow).unwrap().magnitude;
        let b = overlap_integral(&m, &m, &m, &basis, &grid, &wide).unwrap().magnitude;
        prop_assert!(b >= a * (1.0 - 1e-12), "{b} < {a}");
    }
}
