//! JSON problem configuration.
//!
//! A configuration file describes one stack problem — geometry, materials,
//! friction bounds, loads — plus the iteration parameters. Parsing is
//! strict: unknown fields are rejected, and every parse or validation error
//! names the JSON path it refers to. Serialization round-trips losslessly:
//! re-parsing a serialized configuration yields an equal value.

use crate::assembly::Material;
use crate::ld::{LdConfig, StackProblem};
use crate::mesh::StackGeometry;
use crate::vi::SweepOptions;
use crate::SurfacePatch;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Errors from reading, parsing, or validating a configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value at {path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// Stack footprint and layer boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub extent_x: f64,
    pub extent_y: f64,
    /// Horizontal planes from the loaded top surface down to the clamped
    /// base; layer k spans `z_levels[k] .. z_levels[k+1]`.
    pub z_levels: Vec<f64>,
}

/// Material of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
}

/// Friction bound: one value for all interfaces, or one per interface
/// (top interface first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrictionConfig {
    Uniform(f64),
    PerInterface(Vec<f64>),
}

/// Rectangular patch on the top surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Constant traction applied on a patch of the top surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceLoadConfig {
    pub patch: PatchConfig,
    pub traction: [f64; 3],
}

fn default_theta() -> f64 {
    0.04
}
fn default_tol() -> f64 {
    1e-4
}
fn default_max_iters() -> usize {
    20_000
}
fn default_tol_sub() -> f64 {
    1e-10
}
fn default_tol_lin() -> f64 {
    1e-10
}
fn default_body_force() -> [f64; 3] {
    [0.0; 3]
}

/// One complete problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    pub geometry: GeometryConfig,
    /// Target mesh step.
    pub h: f64,
    /// One entry per layer, top first.
    pub layers: Vec<LayerConfig>,
    pub friction_bound: FrictionConfig,
    #[serde(default = "default_body_force")]
    pub body_force: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_load: Option<SurfaceLoadConfig>,
    /// Trace relaxation factor.
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Relative stopping tolerance of the decomposition iteration.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Relative stationarity tolerance of the per-layer solves.
    #[serde(default = "default_tol_sub")]
    pub tol_sub: f64,
    /// Relative residual tolerance of inner linear solves.
    #[serde(default = "default_tol_lin")]
    pub tol_lin: f64,
}

impl StackConfig {
    /// Parse from a JSON string; errors carry the JSON path.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let mut deserializer = serde_json::Deserializer::from_str(text);
        let config: Self =
            serde_path_to_error::deserialize(&mut deserializer).map_err(|err| {
                ConfigError::Parse {
                    path: err.path().to_string(),
                    message: err.inner().to_string(),
                }
            })?;
        config.validate()?;
        Ok(config)
    }

    /// Read and parse a JSON file.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            file: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Serialize to pretty JSON. Re-parsing the output yields an equal value.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn n_layers(&self) -> usize {
        self.geometry.z_levels.len().saturating_sub(1)
    }

    /// Friction bounds resolved to one value per interface.
    pub fn resolved_friction(&self) -> Vec<f64> {
        let n_interfaces = self.n_layers().saturating_sub(1);
        match &self.friction_bound {
            FrictionConfig::Uniform(g) => vec![*g; n_interfaces],
            FrictionConfig::PerInterface(table) => table.clone(),
        }
    }

    /// Semantic validation; every error names the offending JSON path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.geometry;
        if !(g.extent_x > 0.0) || !g.extent_x.is_finite() {
            return Err(invalid(
                "geometry.extent_x",
                format!("must be positive and finite, got {}", g.extent_x),
            ));
        }
        if !(g.extent_y > 0.0) || !g.extent_y.is_finite() {
            return Err(invalid(
                "geometry.extent_y",
                format!("must be positive and finite, got {}", g.extent_y),
            ));
        }
        if g.z_levels.len() < 2 {
            return Err(invalid(
                "geometry.z_levels",
                format!("need at least 2 levels, got {}", g.z_levels.len()),
            ));
        }
        for k in 0..g.z_levels.len() - 1 {
            let (upper, lower) = (g.z_levels[k], g.z_levels[k + 1]);
            if !(upper > lower) || !upper.is_finite() || !lower.is_finite() {
                return Err(invalid(
                    format!("geometry.z_levels[{}]", k + 1),
                    format!("levels must strictly decrease; {lower} is not below {upper}"),
                ));
            }
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(invalid(
                "h",
                format!("must be positive and finite, got {}", self.h),
            ));
        }
        let n = self.n_layers();
        if self.layers.len() != n {
            return Err(invalid(
                "layers",
                format!("{} z-levels define {n} layers, got {}", g.z_levels.len(), self.layers.len()),
            ));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if !(layer.youngs_modulus > 0.0) || !layer.youngs_modulus.is_finite() {
                return Err(invalid(
                    format!("layers[{k}].youngs_modulus"),
                    format!("must be positive and finite, got {}", layer.youngs_modulus),
                ));
            }
            if !(0.0..0.5).contains(&layer.poisson_ratio) {
                return Err(invalid(
                    format!("layers[{k}].poisson_ratio"),
                    format!("must lie in [0, 0.5), got {}", layer.poisson_ratio),
                ));
            }
        }
        match &self.friction_bound {
            FrictionConfig::Uniform(g) => {
                if !(*g >= 0.0) || !g.is_finite() {
                    return Err(invalid(
                        "friction_bound",
                        format!("must be non-negative and finite, got {g}"),
                    ));
                }
            }
            FrictionConfig::PerInterface(table) => {
                if table.len() != n.saturating_sub(1) {
                    return Err(invalid(
                        "friction_bound",
                        format!(
                            "{n} layers have {} interfaces, got {} bounds",
                            n.saturating_sub(1),
                            table.len()
                        ),
                    ));
                }
                for (j, g) in table.iter().enumerate() {
                    if !(*g >= 0.0) || !g.is_finite() {
                        return Err(invalid(
                            format!("friction_bound[{j}]"),
                            format!("must be non-negative and finite, got {g}"),
                        ));
                    }
                }
            }
        }
        if self.body_force.iter().any(|v| !v.is_finite()) {
            return Err(invalid("body_force", "components must be finite"));
        }
        if let Some(load) = &self.surface_load {
            let p = &load.patch;
            if !(p.x_min < p.x_max) || !(p.y_min < p.y_max) {
                return Err(invalid(
                    "surface_load.patch",
                    format!(
                        "needs x_min < x_max and y_min < y_max, got [{}, {}] × [{}, {}]",
                        p.x_min, p.x_max, p.y_min, p.y_max
                    ),
                ));
            }
            if load.traction.iter().any(|v| !v.is_finite()) {
                return Err(invalid("surface_load.traction", "components must be finite"));
            }
        }
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            return Err(invalid(
                "theta",
                format!("must be positive and finite, got {}", self.theta),
            ));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(invalid(
                "tol",
                format!("must be positive and finite, got {}", self.tol),
            ));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if !(self.tol_sub > 0.0) || !self.tol_sub.is_finite() {
            return Err(invalid(
                "tol_sub",
                format!("must be positive and finite, got {}", self.tol_sub),
            ));
        }
        if !(self.tol_lin > 0.0) || !self.tol_lin.is_finite() {
            return Err(invalid(
                "tol_lin",
                format!("must be positive and finite, got {}", self.tol_lin),
            ));
        }
        Ok(())
    }

    /// Build the solver-facing problem description.
    pub fn to_problem(&self) -> Result<StackProblem, ConfigError> {
        self.validate()?;
        let materials = self
            .layers
            .iter()
            .map(|l| Material::new(l.youngs_modulus, l.poisson_ratio))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|err| invalid("layers", err.to_string()))?;
        let surface_load = self.surface_load.as_ref().map(|load| {
            (
                SurfacePatch {
                    x_min: load.patch.x_min,
                    x_max: load.patch.x_max,
                    y_min: load.patch.y_min,
                    y_max: load.patch.y_max,
                },
                load.traction,
            )
        });
        Ok(StackProblem {
            geometry: StackGeometry {
                extent_x: self.geometry.extent_x,
                extent_y: self.geometry.extent_y,
                z_levels: self.geometry.z_levels.clone(),
            },
            h: self.h,
            materials,
            friction_bounds: self.resolved_friction(),
            body_force: self.body_force,
            surface_load,
        })
    }

    /// Iteration parameters for the decomposition driver.
    pub fn ld_config(&self) -> LdConfig {
        LdConfig {
            theta: self.theta,
            tol: self.tol,
            max_iters: self.max_iters,
            sweep: SweepOptions {
                tol_sub: self.tol_sub,
                tol_lin: self.tol_lin,
                ..SweepOptions::default()
            },
            ..LdConfig::default()
        }
    }
}
