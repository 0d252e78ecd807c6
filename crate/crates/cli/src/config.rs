//! Experiment configuration: a TOML document with nested tables. Every
//! field has a default and the parsed value is echoed into every report.

use std::path::{Path, PathBuf};

use alphasplit_core::entanglement::RANK_TOL;
use alphasplit_core::ising::ChainVariant;
use alphasplit_core::sweep::{validate_alphas, DEFAULT_ALPHAS, EPSILON};
use alphasplit_core::{
    Boundary, Family, LatticeGeometry, Region, SectorLoops, SolverConfig, Units,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub perturbation: Family,
    pub path: PathConfig,
    pub region: RegionConfig,
    pub alphas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sector_loops: Option<SectorLoops>,
    pub rank_tol: f64,
    /// Derivative significance threshold for the splitting analysis.
    pub epsilon: f64,
    pub solver: SolverConfig,
    pub chain: ChainConfig,
    pub crosscheck: CrosscheckConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            geometry: GeometryConfig::default(),
            perturbation: Family::ToricCode,
            path: PathConfig::default(),
            region: RegionConfig::default(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            sector_loops: None,
            rank_tol: RANK_TOL,
            epsilon: EPSILON,
            solver: SolverConfig::default(),
            chain: ChainConfig::default(),
            crosscheck: CrosscheckConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub lx: usize,
    pub ly: usize,
    pub boundary: Boundary,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            lx: 3,
            ly: 2,
            boundary: Boundary::Torus,
        }
    }
}

/// Either explicit `values` or `start` with `step` and `count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    pub start: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            values: None,
            start: 0.0,
            step: None,
            count: None,
        }
    }
}

impl PathConfig {
    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        let v = match (&self.values, self.step, self.count) {
            (Some(v), None, None) => v.clone(),
            (None, Some(step), Some(count)) => {
                (0..count).map(|i| self.start + step * i as f64).collect()
            }
            (None, None, None) => vec![self.start],
            _ => {
                return Err(CliError::schema(
                    "path",
                    "give either `values` or both `step` and `count`",
                ))
            }
        };
        if v.is_empty() {
            return Err(CliError::schema("path", "the λ path is empty"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::schema("path", "λ values must be finite"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Star,
    StarPlaquette,
    Half,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    pub kind: RegionKind,
    pub star: usize,
    /// Defaults to the plaquette of cell `(0, 0)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plaquette: Option<usize>,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig {
            kind: RegionKind::Star,
            star: 0,
            plaquette: None,
        }
    }
}

impl RegionConfig {
    pub fn build(&self, geom: &LatticeGeometry) -> Result<Region, CliError> {
        let r = match (self.kind, self.plaquette) {
            (RegionKind::Star, _) => geom.region_star(self.star),
            (RegionKind::StarPlaquette, Some(p)) => geom.region_star_plaquette(self.star, p),
            (RegionKind::StarPlaquette, None) if self.star == 0 => geom.default_star_plaquette(),
            (RegionKind::StarPlaquette, None) => {
                return Err(CliError::schema(
                    "region.plaquette",
                    "required when `star` is not 0",
                ))
            }
            (RegionKind::Half, _) => geom.region_half(),
        };
        r.map_err(|e| CliError::schema("region", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub variant: ChainVariant,
    pub n: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            variant: ChainVariant::V1,
            n: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrosscheckFamily {
    ToricCode,
    CcExp,
    HorizontalZ,
    UniformZ,
    UniformXz,
    TfimV1,
    TfimV2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrosscheckConfig {
    pub family: CrosscheckFamily,
}

impl Default for CrosscheckConfig {
    fn default() -> Self {
        CrosscheckConfig {
            family: CrosscheckFamily::CcExp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub units: Units,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            csv: PathBuf::from("surface.csv"),
            json: PathBuf::from("report.json"),
            units: Units::Nats,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::de::Deserializer::parse(text)
            .map_err(|e| CliError::schema("<document>", e.message()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::schema(&path, e.into_inner().message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        validate_alphas(&self.alphas).map_err(|e| CliError::schema("alphas", e))?;
        if self.alphas.iter().any(|a| a.is_infinite()) {
            return Err(CliError::schema(
                "alphas",
                "α must be finite; use a large value such as 20 for the min-entropy",
            ));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(CliError::schema("rank_tol", "must lie in (0, 1)"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::schema("epsilon", "must be finite and ≥ 0"));
        }
        self.solver
            .validate()
            .map_err(|e| CliError::schema("solver", e))?;
        self.path.lambdas()?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<LatticeGeometry, CliError> {
        let g = &self.geometry;
        LatticeGeometry::build(g.lx, g.ly, g.boundary).map_err(|e| CliError::schema("geometry", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(
            ExperimentConfig::from_toml("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn nested_tables_parse() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            alphas = [0.5, 1.0, 2.0]
            [geometry]
            lx = 2
            ly = 2
            [perturbation]
            family = "uniform_xz"
            x = 1.0
            z = 0.5
            [path]
            start = 0.0
            step = 0.01
            count = 4
            [region]
            kind = "star_plaquette"
            [output]
            units = "bits"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.perturbation, Family::canonical_xz());
        assert_eq!(cfg.path.lambdas().unwrap().len(), 4);
        assert_eq!(cfg.output.units, Units::Bits);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::from_toml("[solver]\ntol = \"small\"").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("solver.tol"), "{e}");
        let e = ExperimentConfig::from_toml("alphas = [1.0, 0.5]").unwrap_err();
        assert!(e.to_string().contains("alphas"), "{e}");
        let e = ExperimentConfig::from_toml("[geometry]\nwidth = 3").unwrap_err();
        assert!(e.to_string().contains("geometry"), "{e}");
        let e = ExperimentConfig::from_toml("[path]\nvalues = [0.0]\nstep = 0.1").unwrap_err();
        assert!(e.to_string().contains("path"), "{e}");
    }
}
