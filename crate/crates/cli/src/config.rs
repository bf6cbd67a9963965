//! Run configuration: one JSON document per run, unknown keys rejected.

use std::fmt;
use std::path::PathBuf;

use pcw_core::lattice::{DefectSpec, Lattice, LatticeKind, StructureSpec, Vec2};
use pcw_core::phasematch::{DEFAULT_BUDGET, DEFAULT_ENERGY_TOL, DEFAULT_MOMENTUM_TOL};
use pcw_core::pwe::{DEFAULT_CUTOFF, Polarization, SolverOptions};
use pcw_core::slab::MIN_TRANSVERSE_SAMPLES;
use pcw_core::InverseRule;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub structure: StructureConfig,
    /// Lattice constant in nm; enables wavelength columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_constant_nm: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gapmap: Option<GapMapConfig>,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_eps: Option<DualEpsConfig>,
    #[serde(default, rename = "match")]
    pub matching: MatchConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Worker threads; `PCW_THREADS` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureConfig {
    pub lattice: LatticeKind,
    pub hole_radius: f64,
    pub eps_background: f64,
    #[serde(default = "one")]
    pub eps_hole: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect: Option<DefectSpec>,
    #[serde(default = "default_rows")]
    pub supercell_rows: usize,
}

fn one() -> f64 {
    1.0
}

fn default_rows() -> usize {
    7
}

impl StructureConfig {
    pub fn spec(&self) -> StructureSpec {
        StructureSpec {
            lattice: self.lattice,
            hole_radius: self.hole_radius,
            eps_background: self.eps_background,
            eps_hole: self.eps_hole,
            defect: self.defect,
            supercell_rows: if self.defect.is_some() { self.supercell_rows } else { 1 },
        }
    }

    /// The defect-free crystal used as cladding reference.
    pub fn perfect(&self) -> StructureSpec {
        StructureSpec {
            defect: None,
            supercell_rows: 1,
            ..self.spec()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub cutoff: f64,
    pub resolution: usize,
    pub rule: InverseRule,
    pub num_bands: usize,
    pub polarization: Polarization,
    /// Explicit k-points (units 2π/a); overrides the default path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_path: Option<Vec<Vec2>>,
    /// Intervals per edge of the irreducible-zone path.
    pub k_points_per_segment: usize,
    /// Intervals of the guide grid `kx ∈ [0, 0.5]`.
    pub kx_intervals: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            resolution: 32,
            rule: InverseRule::default(),
            num_bands: 8,
            polarization: Polarization::Even,
            k_path: None,
            k_points_per_segment: 16,
            kx_intervals: 50,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            cutoff: self.cutoff,
            resolution: self.resolution,
            rule: self.rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapMapConfig {
    pub radii: Vec<f64>,
    #[serde(default = "default_k_density")]
    pub k_density: usize,
}

fn default_k_density() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub transverse_samples: usize,
    pub surround_index: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            transverse_samples: 16,
            surround_index: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualEpsConfig {
    /// Background permittivity for the long-wavelength (signal/idler) section.
    pub eps_low: f64,
    /// Background permittivity for the pump section.
    pub eps_high: f64,
    pub low_window: [f64; 2],
    pub high_window: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Degenerate,
    Nondegenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub mode: MatchMode,
    pub energy_tol: f64,
    pub momentum_tol: f64,
    pub m_range: [i32; 2],
    /// Pump band indices (0-based); empty means all.
    #[serde(default)]
    pub pump_bands: Vec<usize>,
    /// Signal/idler band indices (0-based); empty means all.
    #[serde(default)]
    pub dc_bands: Vec<usize>,
    /// Band files; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_bands: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_bands: Option<PathBuf>,
    pub budget: u64,
    /// Attach overlap integrals to every solution.
    #[serde(default)]
    pub overlap: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            mode: MatchMode::Degenerate,
            energy_tol: DEFAULT_ENERGY_TOL,
            momentum_tol: DEFAULT_MOMENTUM_TOL,
            m_range: [-2, 2],
            pump_bands: Vec::new(),
            dc_bands: Vec::new(),
            low_bands: None,
            high_bands: None,
            budget: DEFAULT_BUDGET,
            overlap: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionChoice {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRef {
    pub k: Vec2,
    pub band: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarization: Option<Polarization>,
    /// Which permittivity to solve with when `dual_eps` is configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapConfig {
    #[serde(default = "one")]
    pub scalar_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump: Option<ModeRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<ModeRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idler: Option<ModeRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("pcw-out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// One schema or range violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

/// Every problem found in a configuration document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, path: &str, message: impl Into<String>) {
        if !ok {
            self.0.push(Violation {
                path: path.to_string(),
                message: message.into(),
            });
        }
    }
}

fn window_ok(w: [f64; 2]) -> bool {
    w[0].is_finite() && w[1].is_finite() && w[0] >= 0.0 && w[0] < w[1]
}

impl RunConfig {
    /// A minimal config for a perfect crystal, all other settings defaulted.
    pub fn minimal(lattice: LatticeKind, hole_radius: f64, eps_background: f64) -> Self {
        Self {
            structure: StructureConfig {
                lattice,
                hole_radius,
                eps_background,
                eps_hole: 1.0,
                defect: None,
                supercell_rows: default_rows(),
            },
            lattice_constant_nm: None,
            solver: SolverConfig::default(),
            gapmap: None,
            projection: ProjectionConfig::default(),
            dual_eps: None,
            matching: MatchConfig::default(),
            overlap: None,
            output: OutputConfig::default(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut c = Checker(Vec::new());
        let s = &self.structure;
        c.check(
            s.lattice != LatticeKind::Supercell,
            "structure.lattice",
            "must be hexagonal or square; supercells are built from `defect`",
        );
        if s.lattice != LatticeKind::Supercell {
            let limit = Lattice::packing_limit(s.lattice);
            c.check(
                s.hole_radius >= 0.0 && s.hole_radius < limit,
                "structure.hole_radius",
                format!("{} outside [0, {limit:.6}) (exceeds packing limit)", s.hole_radius),
            );
        }
        c.check(s.eps_background >= 1.0, "structure.eps_background", "must be >= 1");
        c.check(s.eps_hole >= 1.0, "structure.eps_hole", "must be >= 1");
        if let Some(d) = &s.defect {
            c.check(s.supercell_rows >= 1, "structure.supercell_rows", "must be positive");
            c.check(
                d.missing_rows == 0 || s.supercell_rows >= d.missing_rows + 4,
                "structure.supercell_rows",
                format!(
                    "cladding too thin: {} rows for {} missing (need >= missing + 4)",
                    s.supercell_rows, d.missing_rows
                ),
            );
            c.check(d.width_scale > 0.0, "structure.defect.width_scale", "must be positive");
        }
        if let Some(a) = self.lattice_constant_nm {
            c.check(a > 0.0 && a.is_finite(), "lattice_constant_nm", "must be positive");
        }
        let sv = &self.solver;
        c.check(sv.cutoff > 0.0 && sv.cutoff.is_finite(), "solver.cutoff", "must be positive");
        c.check(sv.resolution >= 16, "solver.resolution", "must be >= 16 samples per period");
        c.check(sv.num_bands >= 1, "solver.num_bands", "must be >= 1");
        c.check(sv.k_points_per_segment >= 1, "solver.k_points_per_segment", "must be >= 1");
        c.check(sv.kx_intervals >= 2, "solver.kx_intervals", "must be >= 2");
        if let Some(p) = &sv.k_path {
            c.check(!p.is_empty(), "solver.k_path", "must not be empty");
            c.check(
                p.iter().all(|k| k[0].is_finite() && k[1].is_finite()),
                "solver.k_path",
                "entries must be finite",
            );
        }
        if let Some(g) = &self.gapmap {
            c.check(!g.radii.is_empty(), "gapmap.radii", "must not be empty");
            if s.lattice != LatticeKind::Supercell {
                let limit = Lattice::packing_limit(s.lattice);
                for (i, r) in g.radii.iter().enumerate() {
                    c.check(
                        *r >= 0.0 && *r < limit,
                        &format!("gapmap.radii[{i}]"),
                        format!("{r} outside [0, {limit:.6}) (exceeds packing limit)"),
                    );
                }
            }
            c.check(g.k_density >= 1, "gapmap.k_density", "must be >= 1");
        }
        let p = &self.projection;
        c.check(
            p.transverse_samples >= MIN_TRANSVERSE_SAMPLES,
            "projection.transverse_samples",
            format!("must be >= {MIN_TRANSVERSE_SAMPLES}"),
        );
        c.check(p.surround_index > 0.0, "projection.surround_index", "must be positive");
        if let Some(d) = &self.dual_eps {
            c.check(d.eps_low >= 1.0, "dual_eps.eps_low", "must be >= 1");
            c.check(d.eps_high >= 1.0, "dual_eps.eps_high", "must be >= 1");
            c.check(window_ok(d.low_window), "dual_eps.low_window", "must be [lo, hi] with 0 <= lo < hi");
            c.check(window_ok(d.high_window), "dual_eps.high_window", "must be [lo, hi] with 0 <= lo < hi");
            c.check(
                d.high_window[0] >= d.low_window[1],
                "dual_eps.high_window",
                "must start at or above the end of low_window",
            );
        }
        let m = &self.matching;
        c.check(m.energy_tol > 0.0, "match.energy_tol", "must be positive");
        c.check(m.momentum_tol > 0.0, "match.momentum_tol", "must be positive");
        c.check(m.m_range[0] <= m.m_range[1], "match.m_range", "must be [lo, hi] with lo <= hi");
        c.check(m.budget > 0, "match.budget", "must be positive");
        if let Some(o) = &self.overlap {
            c.check(o.scalar_weight.is_finite(), "overlap.scalar_weight", "must be finite");
        }
        c.check(!self.output.formats.is_empty(), "output.formats", "must list csv and/or json");
        if let Some(t) = self.threads {
            c.check(t >= 1, "threads", "must be >= 1");
        }
        if c.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations: c.0 })
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError {
        violations: vec![Violation {
            path: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        }],
    })?;
    cfg.validate()?;
    Ok(cfg)
}
