use crate::RunError;
use scatlab_core::experiments::{DiagnosticsConfig, StabilityConfig};
use scatlab_core::grid::{GridSpec, Vec2};
use scatlab_core::potentials::{Potential, PotentialPair};
use scatlab_core::reconstruct::{ProbeConfig, ReconstructionConfig};
use scatlab_core::scattering::ScatteringConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Scaled family `V₂ = (1 - s)V₁` of the configured `v1`.
    Scaled,
    /// Scaled family plus width variations and a rational-decay pair.
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XrayConfig {
    pub omega: Vec2,
    pub quadrature_step: f64,
}

impl Default for XrayConfig {
    fn default() -> Self {
        XrayConfig { omega: [1.0, 0.0], quadrature_step: 0.05 }
    }
}

/// Everything a run needs; parsed from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Simulation grid for probe, xray, diagnose and stability runs.
    pub grid: GridSpec,
    pub pair: PotentialPair,
    pub scattering: ScatteringConfig,
    pub probe: ProbeConfig,
    /// Velocities swept by `probe`; a single entry gives one pairing.
    pub lambdas: Vec<f64>,
    pub omega: Vec2,
    pub xray: XrayConfig,
    pub reconstruction: ReconstructionConfig,
    /// Velocities swept by `reconstruct`.
    pub reconstruction_lambdas: Vec<f64>,
    pub stability: StabilityConfig,
    pub experiment: Experiment,
    pub s_values: Vec<f64>,
    pub diagnostics: DiagnosticsConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let v1 = Potential::gaussian(0.5, 2.0, [0.0, 0.0]);
        RunConfig {
            grid: GridSpec { dim: 2, n: 256, half_width: 32.0 },
            pair: PotentialPair { v1, v2: Potential::zero() },
            scattering: ScatteringConfig::default(),
            probe: ProbeConfig::default(),
            lambdas: vec![25.0, 100.0, 400.0],
            omega: [1.0, 0.0],
            xray: XrayConfig::default(),
            reconstruction: ReconstructionConfig::default(),
            reconstruction_lambdas: vec![400.0],
            stability: StabilityConfig::default(),
            experiment: Experiment::Scaled,
            s_values: scatlab_core::experiments::DEFAULT_S_VALUES.to_vec(),
            diagnostics: DiagnosticsConfig::default(),
            seed: 7,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub grid_n: Option<usize>,
    pub grid_l: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Invalid(format!("config schema: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Invalid(format!("{}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    /// Overrides reach every stage: a grid override replaces the simulation
    /// grid of probe, xray, reconstruction, stability and diagnostics alike.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(l) = o.lambda {
            self.probe.lambda = l;
            self.lambdas = vec![l];
            self.reconstruction_lambdas = vec![l];
            self.stability.lambda = l;
        }
        let touch = |g: &mut GridSpec| {
            if let Some(n) = o.grid_n {
                g.n = n;
            }
            if let Some(l) = o.grid_l {
                g.half_width = l;
            }
        };
        touch(&mut self.grid);
        touch(&mut self.reconstruction.simulation);
        touch(&mut self.stability.grid);
        touch(&mut self.diagnostics.grid);
        self.stability.norm.seed = self.seed;
    }

    /// Physical and numerical checks run before any compute.
    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |e: scatlab_core::Error| RunError::Invalid(e.to_string());
        self.grid.build().map_err(bad)?;
        self.pair.v1.validate().map_err(bad)?;
        self.pair.v2.validate().map_err(bad)?;
        self.scattering.validate().map_err(bad)?;
        self.probe.validate().map_err(bad)?;
        for &l in self.lambdas.iter().chain(&self.reconstruction_lambdas) {
            if !(l > 16.0) {
                return Err(RunError::Invalid(format!("lambda must exceed 16, got {l}")));
            }
            self.grid.build().and_then(|g| g.require_nyquist(0.0)).map_err(bad)?;
            self.reconstruction.validate(&self.probe.with_lambda(l)).map_err(bad)?;
        }
        if self.lambdas.is_empty() {
            return Err(RunError::Invalid("lambdas must not be empty".into()));
        }
        let unit = |w: Vec2| ((w[0] * w[0] + w[1] * w[1]).sqrt() - 1.0).abs() < 1e-12;
        if !unit(self.omega) || !unit(self.xray.omega) || !unit(self.stability.omega) || !unit(self.diagnostics.omega) {
            return Err(RunError::Invalid("direction vectors must have unit length".into()));
        }
        if self.s_values.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
            return Err(RunError::Invalid("s values must lie in (0, 1)".into()));
        }
        Ok(())
    }
}
