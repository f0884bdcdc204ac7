//! Scenario files: TOML with one section per suite; radii are in chart units.

use crate::error::CliError;
use conflab::background::BackgroundMetric;
use conflab::factor::ConformalFactor;
use conflab::grid::Resolution;
use conflab::metric_lab::DistanceResolution;
use conflab::Dimension;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Curvature,
    ThreeCircle,
    Decay,
    VolumeDensity,
    BlowDown,
    Gbc,
    RiemL2,
    WProfile,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Curvature,
        Suite::ThreeCircle,
        Suite::Decay,
        Suite::VolumeDensity,
        Suite::BlowDown,
        Suite::Gbc,
        Suite::RiemL2,
        Suite::WProfile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Curvature => "curvature",
            Suite::ThreeCircle => "three-circle",
            Suite::Decay => "decay",
            Suite::VolumeDensity => "volume-density",
            Suite::BlowDown => "blow-down",
            Suite::Gbc => "gbc",
            Suite::RiemL2 => "riem-l2",
            Suite::WProfile => "w-profile",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|k| k.name()).collect();
                format!("unknown suite `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Background {
    Flat,
    RoundSphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    #[serde(default = "flat")]
    pub background: Background,
    /// Conformal factor `u` with `g = u^{4/(n-2)} g0`.
    pub factor: String,
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub annulus: Annulus,
    #[serde(default)]
    pub resolution: ResolutionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub curvature: CurvatureConfig,
    #[serde(default)]
    pub three_circle: ThreeCircleConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub volume_density: VolumeDensityConfig,
    #[serde(default)]
    pub blow_down: BlowDownConfig,
    #[serde(default)]
    pub gbc: GbcConfig,
    #[serde(default)]
    pub riem_l2: RiemL2Config,
    #[serde(default)]
    pub w_profile: WProfileConfig,
}

fn flat() -> Background {
    Background::Flat
}

/// Region for validation, curvature probes and the GBC ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Annulus {
    pub inner_radius_chart: f64,
    pub outer_radius_chart: f64,
}

impl Default for Annulus {
    fn default() -> Self {
        Annulus {
            inner_radius_chart: 1e-3,
            outer_radius_chart: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolutionConfig {
    /// Radial quadrature nodes per integration region.
    pub radial_count: usize,
    pub sphere_degree: usize,
    pub distance: DistanceResolution,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        ResolutionConfig {
            radial_count: 41,
            sphere_degree: 8,
            distance: DistanceResolution::default(),
        }
    }
}

impl ResolutionConfig {
    pub fn quadrature(&self) -> Resolution {
        Resolution::new(self.radial_count, self.sphere_degree)
    }
}

/// `chi(M_0)` and the number of ends `m`, both declared, never computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub chi: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: String,
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: "report".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurvatureConfig {
    /// Seeded random probe points in the annulus.
    pub probes: usize,
    pub tolerance: f64,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        CurvatureConfig {
            probes: 64,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThreeCircleConfig {
    /// The cylinder starts at `t0 = -log anchor`.
    pub anchor_radius_chart: f64,
    pub segment_length: f64,
    pub segments: usize,
    pub change_of_variables_tolerance: f64,
}

impl Default for ThreeCircleConfig {
    fn default() -> Self {
        ThreeCircleConfig {
            anchor_radius_chart: 1.0,
            segment_length: 2.0,
            segments: 6,
            change_of_variables_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub radii_chart: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub tolerance: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            radii_chart: vec![1.0 / 64.0, 1.0 / 256.0],
            alpha: 1.0,
            beta: 0.0,
            tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VolumeDensityConfig {
    /// Ball center; defaults to `e1 / 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_chart: Option<Vec<f64>>,
    pub rhos: Vec<f64>,
    pub inner_radius_chart: f64,
    pub outer_radius_chart: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_radius_chart: Option<f64>,
    pub tolerance: f64,
    /// Allowed growth of `|ratio - 1|` between consecutive radii.
    pub monotone_slack: f64,
}

impl Default for VolumeDensityConfig {
    fn default() -> Self {
        VolumeDensityConfig {
            center_chart: None,
            rhos: vec![4.0, 8.0, 16.0, 32.0],
            inner_radius_chart: 1.0 / 64.0,
            outer_radius_chart: 1.0,
            clip_radius_chart: None,
            tolerance: 0.05,
            monotone_slack: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlowDownConfig {
    pub radii_chart: Vec<f64>,
    pub reference_inner_chart: f64,
    pub reference_outer_chart: f64,
    pub tolerance: f64,
    pub normalization_tolerance: f64,
}

impl Default for BlowDownConfig {
    fn default() -> Self {
        BlowDownConfig {
            radii_chart: vec![1e-3, 1e-4, 1e-5],
            reference_inner_chart: 0.5,
            reference_outer_chart: 2.0,
            tolerance: 0.01,
            normalization_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbcConfig {
    /// Relative tolerance (floored at 1) of `int Pf` against `4 pi^2 chi - 8 pi^2 m`.
    pub tolerance: f64,
    /// Absolute tolerance of the annular identity.
    pub identity_tolerance: f64,
}

impl Default for GbcConfig {
    fn default() -> Self {
        GbcConfig {
            tolerance: 0.01,
            identity_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiemL2Config {
    pub outer_radius_chart: f64,
    pub levels: usize,
    /// Tails are checked from this many levels on.
    pub cauchy_level: usize,
    pub tolerance: f64,
}

impl Default for RiemL2Config {
    fn default() -> Self {
        RiemL2Config {
            outer_radius_chart: 0.5,
            levels: 14,
            cauchy_level: 10,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WProfileConfig {
    /// Decreasing radii; defaults to `2^{-1} .. 2^{-12}`.
    pub radii_chart: Vec<f64>,
    pub sphere_degree: usize,
    /// Allowed relative growth of `sup w` between consecutive inner radii.
    pub growth_tolerance: f64,
}

impl Default for WProfileConfig {
    fn default() -> Self {
        WProfileConfig {
            radii_chart: (1..=12).map(|k| 0.5f64.powi(k)).collect(),
            sphere_degree: 8,
            growth_tolerance: 1e-3,
        }
    }
}

impl Scenario {
    pub fn dim(&self) -> Dimension {
        Dimension::new(self.dimension).expect("validated dimension")
    }

    pub fn factor(&self) -> ConformalFactor {
        ConformalFactor::parse(&self.factor, self.dim()).expect("validated factor")
    }

    pub fn background(&self) -> BackgroundMetric {
        match self.background {
            Background::Flat => BackgroundMetric::flat(self.dim()),
            Background::RoundSphere => BackgroundMetric::round_sphere_chart(self.dim()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios serialize")
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, message: String| {
            Err(CliError::Validation {
                field: field.into(),
                message,
            })
        };
        if self.name.trim().is_empty() {
            return bad("name", "must not be empty".into());
        }
        let n = match Dimension::new(self.dimension) {
            Ok(n) => n,
            Err(e) => return bad("dimension", e.to_string()),
        };
        if self.suites.is_empty() {
            return bad("suites", "list at least one suite".into());
        }
        let a = &self.annulus;
        if !(a.inner_radius_chart > 0.0 && a.inner_radius_chart < a.outer_radius_chart) {
            return bad("annulus", "need 0 < inner_radius_chart < outer_radius_chart".into());
        }
        let u = match ConformalFactor::parse(&self.factor, n) {
            Ok(u) => u,
            Err(e) => return bad("factor", e.to_string()),
        };
        // positive on the declared annulus, probed on a coarse product grid
        let grid = Resolution::new(9, 6)
            .grid(n, a.inner_radius_chart, a.outer_radius_chart)
            .map_err(|e| CliError::Validation {
                field: "annulus".into(),
                message: e.to_string(),
            })?;
        for k in 0..grid.len() {
            let x = grid.point_flat(k);
            match u.value(&x) {
                Ok(v) if v.is_finite() && v > 0.0 => {}
                Ok(v) => return bad("factor", format!("not positive on the annulus: u = {v} at {x:?}")),
                Err(e) => return bad("factor", e.to_string()),
            }
        }
        let r = &self.resolution;
        if r.radial_count < 3 {
            return bad("resolution.radial_count", "must be at least 3".into());
        }
        if r.sphere_degree == 0 {
            return bad("resolution.sphere_degree", "must be positive".into());
        }
        let needs_four = [Suite::Gbc, Suite::RiemL2];
        for s in &self.suites {
            if needs_four.contains(s) && self.dimension != 4 {
                return bad("suites", format!("suite `{s}` needs dimension 4"));
            }
        }
        if self.suites.contains(&Suite::Gbc) && self.topology.is_none() {
            return bad("topology", "suite `gbc` needs [topology] chi and m".into());
        }
        if let Some(c) = &self.volume_density.center_chart {
            if c.len() != self.dimension {
                return bad("volume_density.center_chart", format!("needs {} coordinates", self.dimension));
            }
        }
        let tc = &self.three_circle;
        if tc.segments < 3 || !(tc.segment_length > 0.0) {
            return bad("three_circle", "need segments >= 3 and segment_length > 0".into());
        }
        let w = &self.w_profile.radii_chart;
        if w.is_empty() || w.windows(2).any(|p| p[1] >= p[0]) || !(w[0] < 1.0 && w[w.len() - 1] > 0.0) {
            return bad("w_profile.radii_chart", "must be nonempty, decreasing and inside (0, 1)".into());
        }
        if self.suites.contains(&Suite::WProfile) && self.background != Background::Flat {
            return bad("background", "suite `w-profile` uses the flat Green's function".into());
        }
        let rl = &self.riem_l2;
        if rl.cauchy_level == 0 || rl.cauchy_level >= rl.levels {
            return bad("riem_l2", "need 0 < cauchy_level < levels".into());
        }
        Ok(())
    }
}

/// Parses and validates a scenario; unknown keys are rejected.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_column(text, s.start))
            .unwrap_or((0, 0));
        CliError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "name = \"flat\"\ndimension = 3\nfactor = \"1\"\nsuites = [\"curvature\"]\n";

    #[test]
    fn minimal_scenario_fills_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.background, Background::Flat);
        assert_eq!(s.seed, 0);
        assert_eq!(s.curvature, CurvatureConfig::default());
        assert_eq!(s.output.dir, "report");
    }

    #[test]
    fn round_trip_is_identity() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(parse_scenario(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn inversion_factor_binds_the_dimension() {
        let text = "name = \"g\"\ndimension = 4\nfactor = \"absx^(2-n)\"\nsuites = [\"decay\"]\n";
        let u = parse_scenario(text).unwrap().factor();
        let v = u.value(&[0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!((v - 4.0).abs() < 1e-14);
    }

    #[test]
    fn gbc_without_topology_names_the_field() {
        let text = "name = \"g\"\ndimension = 4\nfactor = \"1\"\nsuites = [\"gbc\"]\n";
        match parse_scenario(text) {
            Err(CliError::Validation { field, .. }) => assert_eq!(field, "topology"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_report_their_position() {
        let text = format!("{MINIMAL}\n[decay]\nradii = [0.1]\n");
        match parse_scenario(&text) {
            Err(CliError::Parse { line, column, message }) => {
                assert_eq!((line, column), (7, 1), "{message}");
                assert!(message.contains("radii"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonpositive_factor_is_rejected() {
        let text = "name = \"g\"\ndimension = 3\nfactor = \"x1\"\nsuites = [\"curvature\"]\n";
        assert!(matches!(parse_scenario(text), Err(CliError::Validation { field, .. }) if field == "factor"));
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
