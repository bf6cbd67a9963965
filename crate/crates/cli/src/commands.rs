//! The six pipeline commands. Each reads a validated config, computes, and
//! writes its files through an [`OutputSet`].

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pcw_core::lattice::StructureSpec;
use pcw_core::overlap::{overlap_integral, NonlinearRegion};
use pcw_core::phasematch::{
    find_degenerate_matches, find_nondegenerate_matches, stitch_dual_epsilon, MatchParams, MatchSolution,
    OverlapRecord, Section,
};
use pcw_core::pwe::{geometry_hash, kpath};
use pcw_core::slab::{self, GapSearch};
use pcw_core::{BandStructure, BlochMode, OverlapError, Polarization, Solver, Vec2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Format, MatchMode, ModeRef, RunConfig, SectionChoice};
use crate::output::{fmt_num, fmt_opt, OutputSet, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Bands,
    Gapmap,
    Project,
    DefectBands,
    Match,
    Overlap,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Gapmap => "gapmap",
            Command::Project => "project",
            Command::DefectBands => "defect-bands",
            Command::Match => "match",
            Command::Overlap => "overlap",
        }
    }
}

/// Flags that override the config for `match`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MatchFlags {
    pub degenerate: bool,
    pub nondegenerate: bool,
    pub overlap: bool,
}

pub struct RunContext<'a> {
    pub cfg: &'a RunConfig,
    pub config_dir: &'a Path,
    pub out: &'a mut OutputSet,
    pub prov: &'a mut Provenance,
    pub flags: MatchFlags,
}

pub fn execute(cmd: Command, ctx: &mut RunContext<'_>) -> Result<()> {
    match cmd {
        Command::Bands => bands(ctx),
        Command::Gapmap => gapmap(ctx),
        Command::Project => project(ctx),
        Command::DefectBands => defect_bands(ctx),
        Command::Match => matching(ctx),
        Command::Overlap => overlap(ctx),
    }
}

fn solver_for(spec: &StructureSpec, cfg: &RunConfig, prov: &mut Provenance) -> Result<Solver> {
    spec.validate()?;
    let solver = Solver::for_structure(spec, &cfg.solver.options())?;
    prov.num_plane_waves = Some(solver.basis().len());
    prov.resolution = Some(solver.grid().n);
    Ok(solver)
}

fn guide_kx(cfg: &RunConfig) -> Vec<f64> {
    kpath::guide_grid(cfg.solver.kx_intervals)
}

fn write_bands(out: &mut OutputSet, cfg: &RunConfig, stem: &str, b: &BandStructure) -> Result<()> {
    if cfg.output.wants(Format::Csv) {
        let mut rows = Vec::new();
        for (ik, (k, freqs)) in b.k_path.iter().zip(&b.frequencies).enumerate() {
            for (n, &w) in freqs.iter().enumerate() {
                let wl = cfg
                    .lattice_constant_nm
                    .and_then(|a| pcw_core::phasematch::wavelength_nm(a, w));
                rows.push(vec![
                    ik.to_string(),
                    fmt_num(k[0]),
                    fmt_num(k[1]),
                    n.to_string(),
                    fmt_num(w),
                    fmt_opt(wl),
                ]);
            }
        }
        out.write_csv(
            &format!("{stem}.csv"),
            &["k_index", "kx", "ky", "band", "omega", "wavelength_nm"],
            &rows,
        )?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_json(&format!("{stem}.json"), b)?;
    }
    Ok(())
}

fn bands(ctx: &mut RunContext<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let spec = cfg.structure.spec();
    let solver = solver_for(&spec, cfg, ctx.prov)?;
    let path: Vec<Vec2> = match &cfg.solver.k_path {
        Some(p) => p.clone(),
        None if spec.defect.is_some() => kpath::guide_path(&guide_kx(cfg)),
        None => kpath::ibz_boundary(spec.lattice, cfg.solver.k_points_per_segment),
    };
    let b = solver.band_sweep(cfg.solver.polarization, &path, cfg.solver.num_bands, false)?;
    write_bands(ctx.out, cfg, "bands", &b)
}

fn gapmap(ctx: &mut RunContext<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let Some(g) = &cfg.gapmap else {
        bail!("gapmap requires a `gapmap` section with radii");
    };
    let search = GapSearch {
        num_bands: cfg.solver.num_bands,
        k_density: g.k_density,
    };
    let map = slab::gap_map(
        &cfg.structure.perfect(),
        &g.radii,
        cfg.solver.polarization,
        &search,
        &cfg.solver.options(),
    )?;
    if cfg.output.wants(Format::Csv) {
        let mut rows = Vec::new();
        for e in &map.entries {
            if e.gaps.is_empty() {
                rows.push(vec![fmt_num(e.radius), String::new(), String::new()]);
            }
            for gap in &e.gaps {
                rows.push(vec![fmt_num(e.radius), fmt_num(gap[0]), fmt_num(gap[1])]);
            }
        }
        ctx.out.write_csv("gapmap.csv", &["radius", "gap_lo", "gap_hi"], &rows)?;
    }
    if cfg.output.wants(Format::Json) {
        ctx.out.write_json("gapmap.json", &map)?;
    }
    Ok(())
}

fn projection_for(
    cfg: &RunConfig,
    perfect: &StructureSpec,
    kx: &[f64],
) -> Result<pcw_core::ProjectedBands> {
    let pb = slab::project_bands(
        perfect,
        cfg.solver.polarization,
        kx,
        cfg.projection.transverse_samples,
        cfg.solver.num_bands,
        &cfg.solver.options(),
    )?;
    Ok(slab::light_cone_mask(&pb, cfg.projection.surround_index)?)
}

fn write_projection(out: &mut OutputSet, cfg: &RunConfig, stem: &str, pb: &pcw_core::ProjectedBands) -> Result<()> {
    if cfg.output.wants(Format::Csv) {
        let mut rows = Vec::new();
        for (ix, kx) in pb.kx_grid.iter().enumerate() {
            for (j, iv) in pb.allowed[ix].iter().enumerate() {
                rows.push(vec![
                    ix.to_string(),
                    fmt_num(*kx),
                    j.to_string(),
                    fmt_num(iv[0]),
                    fmt_num(iv[1]),
                    fmt_num(pb.light_line(*kx)),
                    fmt_num(pb.ceiling[ix]),
                ]);
            }
        }
        out.write_csv(
            &format!("{stem}.csv"),
            &["k_index", "kx", "interval", "omega_lo", "omega_hi", "light_line", "ceiling"],
            &rows,
        )?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_json(&format!("{stem}.json"), pb)?;
    }
    Ok(())
}

fn project(ctx: &mut RunContext<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let perfect = cfg.structure.perfect();
    perfect.validate()?;
    let pb = projection_for(cfg, &perfect, &guide_kx(cfg))?;
    write_projection(ctx.out, cfg, "projected", &pb)
}

/// `(file stem, background ε)` for each band section.
fn sections(cfg: &RunConfig) -> Vec<(&'static str, f64)> {
    match &cfg.dual_eps {
        Some(d) => vec![("low", d.eps_low), ("high", d.eps_high)],
        None => vec![("defect", cfg.structure.eps_background)],
    }
}

fn defect_bands(ctx: &mut RunContext<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let spec = cfg.structure.spec();
    if spec.defect.is_none() {
        bail!("defect-bands requires `structure.defect`");
    }
    let kx = guide_kx(cfg);
    let path = kpath::guide_path(&kx);
    for (stem, eps) in sections(cfg) {
        let s = spec.with_eps(eps);
        let solver = solver_for(&s, cfg, ctx.prov).with_context(|| format!("section {stem}"))?;
        let b = solver.band_sweep(cfg.solver.polarization, &path, cfg.solver.num_bands, false)?;
        write_bands(ctx.out, cfg, &format!("bands_{stem}"), &b)?;

        let pb = projection_for(cfg, &cfg.structure.perfect().with_eps(eps), &kx)?;
        let classes = slab::classify_defect_modes(&b, &pb)?;
        write_projection(ctx.out, cfg, &format!("projected_{stem}"), &pb)?;
        if cfg.output.wants(Format::Csv) {
            let rows: Vec<Vec<String>> = classes
                .modes
                .iter()
                .map(|m| {
                    vec![
                        fmt_num(m.kx),
                        m.band.to_string(),
                        fmt_num(m.omega),
                        serde_json::to_value(m.label)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default(),
                    ]
                })
                .collect();
            ctx.out
                .write_csv(&format!("classification_{stem}.csv"), &["kx", "band", "omega", "label"], &rows)?;
        }
        if cfg.output.wants(Format::Json) {
            ctx.out.write_json(&format!("classification_{stem}.json"), &classes)?;
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct Wrapped<T> {
    data: T,
}

/// Reads band data written by `bands`/`defect-bands`, or a bare band structure.
pub fn read_bands(path: &Path) -> Result<BandStructure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(w) = serde_json::from_str::<Wrapped<BandStructure>>(&text) {
        return Ok(w.data);
    }
    serde_json::from_str(&text).with_context(|| format!("parsing band data in {}", path.display()))
}

/// Relative paths are taken against `base` (the config file's directory).
pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn all_or(v: &[usize], n: usize) -> Vec<usize> {
    if v.is_empty() {
        (0..n).collect()
    } else {
        v.to_vec()
    }
}

fn matching(ctx: &mut RunContext<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let m = &cfg.matching;
    let Some(d) = &cfg.dual_eps else {
        bail!("match requires a `dual_eps` section with validity windows");
    };
    let low_path = m
        .low_bands
        .as_deref()
        .map_or_else(|| ctx.out.dir().join("bands_low.json"), |p| resolve(ctx.config_dir, p));
    let high_path = m
        .high_bands
        .as_deref()
        .map_or_else(|| ctx.out.dir().join("bands_high.json"), |p| resolve(ctx.config_dir, p));
    let low = read_bands(&low_path)?;
    let high = read_bands(&high_path)?;
    let (n_low, n_high) = (low.num_bands(), high.num_bands());
    let disp = stitch_dual_epsilon(
        Section {
            bands: low,
            window: d.low_window,
        },
        Section {
            bands: high,
            window: d.high_window,
        },
        cfg.lattice_constant_nm,
    )?;
    let params = MatchParams {
        energy_tol: m.energy_tol,
        momentum_tol: m.momentum_tol,
        m_range: m.m_range,
        budget: m.budget,
    };
    let mode = if ctx.flags.nondegenerate {
        MatchMode::Nondegenerate
    } else if ctx.flags.degenerate {
        MatchMode::Degenerate
    } else {
        m.mode
    };
    let pump = all_or(&m.pump_bands, n_high);
    let dc = all_or(&m.dc_bands, n_low);
    let mut sols = match mode {
        MatchMode::Degenerate => find_degenerate_matches(&disp, &pump, &dc, &params)?,
        MatchMode::Nondegenerate => find_nondegenerate_matches(&disp, &pump, &dc, &params)?,
    };
    if ctx.flags.overlap || m.overlap {
        attach_overlaps(cfg, &disp, &mut sols, ctx.prov)?;
    }
    write_matches(ctx.out, cfg, &sols)
}

fn mode_at(solver: &Solver, pol: Polarization, k: Vec2, band: usize) -> Result<BlochMode> {
    let (_, modes) = solver.solve_k(k, pol, band + 1, true)?;
    modes
        .and_then(|mut v| (band < v.len()).then(|| v.swap_remove(band)))
        .context("eigenvector not available")
}

fn attach_overlaps(
    cfg: &RunConfig,
    disp: &pcw_core::StitchedDispersion,
    sols: &mut [MatchSolution],
    prov: &mut Provenance,
) -> Result<()> {
    let d = cfg.dual_eps.as_ref().context("overlap needs dual_eps")?;
    let spec = cfg.structure.spec();
    let geo = geometry_hash(&spec);
    for s in [&disp.low, &disp.high] {
        if let Some(meta) = &s.bands.meta {
            if !meta.geometry_hash.is_empty() && meta.geometry_hash != geo {
                bail!("band files were computed for a different structure than the config describes");
            }
        }
    }
    let low = solver_for(&spec.with_eps(d.eps_low), cfg, prov)?;
    let high = solver_for(&spec.with_eps(d.eps_high), cfg, prov)?;
    let (pol_low, pol_high) = (disp.low.bands.polarization, disp.high.bands.polarization);
    let weight = cfg.overlap.as_ref().map_or(1.0, |o| o.scalar_weight);
    let region = NonlinearRegion::from_grid(low.grid(), weight);
    let results: Vec<Result<Option<OverlapRecord>>> = sols
        .par_iter()
        .map(|s| {
            let p = mode_at(&high, pol_high, [s.pump.k, 0.0], s.pump.band)?;
            let sg = mode_at(&low, pol_low, [s.signal.k, 0.0], s.signal.band)?;
            let id = mode_at(&low, pol_low, [s.idler.k, 0.0], s.idler.band)?;
            match overlap_integral(&p, &sg, &id, low.basis(), low.grid(), &region) {
                Ok(r) => Ok(Some(OverlapRecord {
                    magnitude: r.magnitude,
                    phase: r.phase,
                })),
                Err(OverlapError::MomentumMismatch(..)) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect();
    let mut skipped = 0;
    for (s, r) in sols.iter_mut().zip(results) {
        s.overlap = r?;
        if s.overlap.is_none() {
            skipped += 1;
        }
    }
    if skipped > 0 {
        eprintln!("note: {skipped} solution(s) have no overlap (shift is not a reciprocal vector of the supercell)");
    }
    Ok(())
}

fn write_matches(out: &mut OutputSet, cfg: &RunConfig, sols: &[MatchSolution]) -> Result<()> {
    if cfg.output.wants(Format::Csv) {
        let rows: Vec<Vec<String>> = sols
            .iter()
            .map(|s| {
                let mut r = Vec::new();
                for p in [&s.pump, &s.signal, &s.idler] {
                    r.extend([
                        p.band.to_string(),
                        fmt_num(p.k),
                        fmt_num(p.omega),
                        fmt_opt(p.wavelength_nm),
                        fmt_num(p.velocity),
                    ]);
                }
                r.extend([
                    s.g_shift.to_string(),
                    fmt_num(s.energy_residual),
                    fmt_num(s.momentum_residual),
                    fmt_opt(s.dgd_per_length.per_length),
                    fmt_opt(s.dgd_per_length.ps_per_mm),
                    s.dgd_per_length.infinite.to_string(),
                    s.counter_propagating.to_string(),
                    s.degenerate.to_string(),
                    fmt_opt(s.overlap.map(|o| o.magnitude)),
                    fmt_opt(s.overlap.map(|o| o.phase)),
                ]);
                r
            })
            .collect();
        let mut header = Vec::new();
        for who in ["pump", "signal", "idler"] {
            for col in ["band", "k", "omega", "wavelength_nm", "velocity"] {
                header.push(format!("{who}_{col}"));
            }
        }
        header.extend(
            [
                "g_shift",
                "energy_residual",
                "momentum_residual",
                "dgd_per_length",
                "dgd_ps_per_mm",
                "dgd_infinite",
                "counter_propagating",
                "degenerate",
                "overlap_magnitude",
                "overlap_phase",
            ]
            .map(String::from),
        );
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        out.write_csv("matches.csv", &header, &rows)?;
    }
    if cfg.output.wants(Format::Json) {
        out.write_json("matches.json", &sols)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct OverlapReport<'a> {
    pump: &'a ModeRef,
    signal: &'a ModeRef,
    idler: &'a ModeRef,
    frequencies: [f64; 3],
    magnitude: f64,
    phase: f64,
    momentum_conserved: bool,
}

fn overlap(ctx: &mut RunContext<'_>) -> Result<()> {
    let cfg = ctx.cfg;
    let o = cfg.overlap.as_ref().context("overlap requires an `overlap` section")?;
    let (Some(p), Some(s), Some(i)) = (&o.pump, &o.signal, &o.idler) else {
        bail!("overlap requires `overlap.pump`, `overlap.signal` and `overlap.idler`");
    };
    let spec = cfg.structure.spec();
    let eps_for = |r: &ModeRef| match (&cfg.dual_eps, r.section) {
        (Some(d), Some(SectionChoice::Low)) => d.eps_low,
        (Some(d), Some(SectionChoice::High)) => d.eps_high,
        _ => spec.eps_background,
    };
    let base = solver_for(&spec.with_eps(eps_for(s)), cfg, ctx.prov)?;
    let mut modes = Vec::new();
    for r in [p, s, i] {
        let pol = r.polarization.unwrap_or(cfg.solver.polarization);
        let solver;
        let sv = if eps_for(r) == eps_for(s) {
            &base
        } else {
            solver = solver_for(&spec.with_eps(eps_for(r)), cfg, ctx.prov)?;
            &solver
        };
        modes.push(mode_at(sv, pol, r.k, r.band)?);
    }
    let region = NonlinearRegion::from_grid(base.grid(), o.scalar_weight);
    let res = overlap_integral(&modes[0], &modes[1], &modes[2], base.basis(), base.grid(), &region)?;
    let report = OverlapReport {
        pump: p,
        signal: s,
        idler: i,
        frequencies: [modes[0].frequency, modes[1].frequency, modes[2].frequency],
        magnitude: res.magnitude,
        phase: res.phase,
        momentum_conserved: res.momentum_conserved,
    };
    if cfg.output.wants(Format::Csv) {
        ctx.out.write_csv(
            "overlap.csv",
            &["omega_pump", "omega_signal", "omega_idler", "magnitude", "phase"],
            &[vec![
                fmt_num(report.frequencies[0]),
                fmt_num(report.frequencies[1]),
                fmt_num(report.frequencies[2]),
                fmt_num(res.magnitude),
                fmt_num(res.phase),
            ]],
        )?;
    }
    if cfg.output.wants(Format::Json) {
        ctx.out.write_json("overlap.json", &report)?;
    }
    Ok(())
}
