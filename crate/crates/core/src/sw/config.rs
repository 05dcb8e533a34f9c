use serde::{Deserialize, Serialize};

use super::SwError;

/// How the standard experiment is initialised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialCondition {
    /// Flat 10 m lake with a 1 m square pulse over the central ~5% of cells.
    #[default]
    Pulse,
    /// Flat 10 m lake at rest.
    Rest,
    /// Single raised cell at the centre of the domain.
    Hump { height: f32 },
    /// Seeded random depths, elevations and velocities; everything wet.
    Random { seed: u64 },
}

/// Experiment configuration as stored on disk (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "NT")]
    pub nt: usize,
    #[serde(default = "default_dt")]
    pub dt: f32,
    #[serde(default = "default_dx")]
    pub dx: f32,
    #[serde(default = "default_g")]
    pub g: f32,
    #[serde(default = "default_eps")]
    pub eps: f32,
    #[serde(default = "default_hmin")]
    pub hmin: f32,
    #[serde(default)]
    pub init: InitialCondition,
}

fn default_dt() -> f32 {
    0.01
}
fn default_dx() -> f32 {
    1.0
}
fn default_g() -> f32 {
    9.81
}
fn default_eps() -> f32 {
    0.05
}
fn default_hmin() -> f32 {
    0.1
}

impl ExperimentConfig {
    pub fn new(nx: usize, ny: usize, nt: usize) -> Self {
        Self {
            nx,
            ny,
            nt,
            dt: default_dt(),
            dx: default_dx(),
            g: default_g(),
            eps: default_eps(),
            hmin: default_hmin(),
            init: InitialCondition::Pulse,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Validated model parameters.
    pub fn params(&self) -> Result<ModelParams, SwError> {
        let p = ModelParams {
            g: self.g,
            dx: self.dx,
            dt: self.dt,
            eps: self.eps,
            hmin: self.hmin,
            nx: self.nx,
            ny: self.ny,
            nt: self.nt,
            init: self.init,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Gravitational acceleration (m/s^2).
    pub g: f32,
    /// Grid spacing in both directions (m).
    pub dx: f32,
    /// Time step (s).
    pub dt: f32,
    /// Shapiro filter weight.
    pub eps: f32,
    /// Depth at or below which a cell is dry (m).
    pub hmin: f32,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub init: InitialCondition,
}

impl Default for ModelParams {
    fn default() -> Self {
        ExperimentConfig::new(50, 50, 100).params().expect("default parameters are valid")
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), SwError> {
        if self.nx == 0 || self.ny == 0 {
            return Err(SwError::InvalidParameter("grid must have a non-empty interior".into()));
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(SwError::InvalidParameter(format!("eps = {} outside [0, 1]", self.eps)));
        }
        if !(self.dt > 0.0 && self.dx > 0.0 && self.g > 0.0) {
            return Err(SwError::InvalidParameter("dt, dx and g must be positive".into()));
        }
        // Deepest initial column; the pulse and random initialisations
        // stay below 16 m.
        let hmax = match self.init {
            InitialCondition::Random { .. } => 15.5,
            InitialCondition::Hump { height } => 10.0 + height.max(0.0),
            _ => 11.0,
        };
        self.check_cfl(hmax)
    }

    pub fn cfl_limit(&self, hmax: f32) -> f32 {
        self.dx / (self.g * hmax).sqrt()
    }

    pub fn check_cfl(&self, hmax: f32) -> Result<(), SwError> {
        let limit = self.cfl_limit(hmax);
        if self.dt < limit {
            Ok(())
        } else {
            Err(SwError::CflViolation { dt: self.dt, limit })
        }
    }
}
