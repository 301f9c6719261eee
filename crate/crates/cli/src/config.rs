use std::path::Path;

use accelgates::oracle::OracleOptions;
use accelgates::perturbation::CoherentPrep;
use accelgates::rotation::{Launch, NetRotation};
use accelgates::synthesis::{CavityTemplate, GridResolution, SynthesisConstraints};
use accelgates::{CavityConfig, Error, QuadratureOptions, SegmentKind, TrajectorySegment};
use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub cavity: CavityConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub integrals: IntegralsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub tolerances: QuadratureOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub kind: SegmentKind,
    #[serde(default)]
    pub acceleration: f64,
    #[serde(default)]
    pub x0: f64,
    pub duration: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            kind: SegmentKind::Inertial,
            acceleration: 0.0,
            x0: 0.5 * std::f64::consts::PI,
            duration: 5.0,
        }
    }
}

impl TrajectoryConfig {
    pub fn segment(&self) -> accelgates::Result<TrajectorySegment> {
        TrajectorySegment::new(self.kind, self.acceleration, self.x0, 0.0, self.duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    #[default]
    Vacuum,
    Coherent {
        mode: usize,
        alpha_abs: f64,
        #[serde(default)]
        alpha_arg: f64,
    },
}

impl FieldConfig {
    pub fn coherent(&self) -> Option<CoherentPrep> {
        match *self {
            FieldConfig::Vacuum => None,
            FieldConfig::Coherent {
                mode,
                alpha_abs,
                alpha_arg,
            } => Some(CoherentPrep::from_polar(mode, alpha_abs, alpha_arg)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanParameter {
    #[serde(rename = "a")]
    Acceleration,
    #[serde(rename = "T")]
    Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub parameter: ScanParameter,
    pub values: Vec<f64>,
    /// Start position for acceleration scans.
    #[serde(default)]
    pub launch: Launch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct IntegralsConfig {
    #[serde(default)]
    pub with_m: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    AxisAngle { axis: [f64; 3], angle: f64 },
    /// Row-major 2×2 unitary as [re, im] pairs.
    Unitary([[f64; 2]; 4]),
}

impl TargetConfig {
    pub fn rotation(&self) -> accelgates::Result<NetRotation> {
        match *self {
            TargetConfig::AxisAngle { axis, angle } => {
                let v = Vector3::from(axis);
                if !angle.is_finite() || v.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidConfig("target axis and angle must be finite".into()));
                }
                if v.norm() == 0.0 && angle != 0.0 {
                    return Err(Error::InvalidConfig("target axis must be nonzero".into()));
                }
                Ok(NetRotation::from_axis_angle(&v, angle))
            }
            TargetConfig::Unitary(u) => {
                let c = |k: usize| Complex64::new(u[k][0], u[k][1]);
                NetRotation::from_unitary(&Matrix2::new(c(0), c(1), c(2), c(3)))
                    .map_err(|e| Error::InvalidConfig(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub target: TargetConfig,
    pub constraints: SynthesisConstraints,
    #[serde(default)]
    pub template: CavityTemplate,
    #[serde(default)]
    pub grid: GridResolution,
    #[serde(default = "default_tol_fidelity")]
    pub tol_fidelity: f64,
}

fn default_tol_fidelity() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Fock cutoff of unpopulated modes.
    pub n_max: usize,
    /// Initial Bloch vector of the qubit.
    pub bloch: [f64; 3],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<(usize, usize)>,
    pub solver: OracleOptions,
    /// Accepted λ-halving ratio for the coherent first order.
    pub coherent_window: [f64; 2],
    /// Largest relative first-order residual at the configured λ.
    pub coherent_max_residual: f64,
    /// Accepted λ-halving ratio for the vacuum second order.
    pub vacuum_window: [f64; 2],
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            n_max: 3,
            bloch: [0.0, 0.0, -1.0],
            ladder: Vec::new(),
            solver: OracleOptions::default(),
            coherent_window: [1.5, 2.5],
            coherent_max_residual: 0.05,
            vacuum_window: [5.0, 11.0],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.cavity.validate()?;
        self.trajectory.segment()?;
        self.tolerances.validate()?;
        if let Some(p) = self.field.coherent() {
            p.validate(&self.cavity)?;
        }
        if let Some(scan) = &self.scan {
            if scan.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig("scan values must be finite".into()));
            }
        }
        if let Some(s) = &self.synthesis {
            s.target.rotation()?;
        }
        for w in [self.oracle.coherent_window, self.oracle.vacuum_window] {
            if w.iter().any(|v| v.is_nan()) || w[0] > w[1] {
                return Err(Error::InvalidConfig(format!("window {w:?} is empty")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
