//! Declarative workflow configuration: a graph of named nodes, trigger
//! registrations, and the driver/network selection.

use crate::driver::DriverConfig;
use crate::inr::{EncodingConfig, MlpConfig, Profile, TrainConfig};
use crate::vis::{CameraConfig, RenderParams, TransferFunctionConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowConfig {
    pub driver: DriverConfig,
    #[serde(default)]
    pub decomposition: DecompositionConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub train: TrainOverrides,
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub triggers: Vec<TriggerConfig>,
    /// Default number of steps for a run (the CLI flag overrides it).
    #[serde(default = "default_steps")]
    pub steps: u64,
}

fn default_steps() -> u64 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    pub ranks: [usize; 3],
    #[serde(default = "default_ghost")]
    pub ghost: usize,
}

fn default_ghost() -> usize {
    2
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            ranks: [1, 1, 1],
            ghost: default_ghost(),
        }
    }
}

/// Network size: a named profile, optionally overridden field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NetworkConfig {
    #[serde(default)]
    pub profile: Option<Profile>,
    #[serde(default)]
    pub encoding: Option<EncodingConfig>,
    #[serde(default)]
    pub mlp: Option<MlpConfig>,
}

impl NetworkConfig {
    pub fn resolve(&self) -> (EncodingConfig, MlpConfig) {
        let profile = self.profile.unwrap_or(Profile::Desk);
        (
            self.encoding.unwrap_or_else(|| profile.encoding()),
            self.mlp.unwrap_or_else(|| profile.mlp()),
        )
    }
}

/// Sparse overrides on top of the profile's training defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainOverrides {
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub batch_uniform: Option<usize>,
    #[serde(default)]
    pub batch_boundary: Option<usize>,
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default)]
    pub psnr_check_interval: Option<u64>,
    #[serde(default)]
    pub probe_resolution: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl TrainOverrides {
    pub fn apply(&self, mut cfg: TrainConfig) -> TrainConfig {
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.batch_uniform {
            cfg.batch_uniform = v;
        }
        if let Some(v) = self.batch_boundary {
            cfg.batch_boundary = v;
        }
        if let Some(v) = self.max_steps {
            cfg.max_steps = v;
        }
        if let Some(v) = self.psnr_check_interval {
            cfg.psnr_check_interval = v;
        }
        if let Some(v) = self.probe_resolution {
            cfg.probe_resolution = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum NodeOpConfig {
    /// The driver's field signal.
    Source,
    /// Train a neural volume of the input field each evaluated step.
    Encode { target_psnr: f64 },
    /// Bounded FIFO of the input signal's history.
    Window {
        size: usize,
        #[serde(default = "default_admit")]
        admit_every: u64,
    },
    Reverse,
    Negate,
}

fn default_admit() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: String,
    #[serde(flatten)]
    pub op: NodeOpConfig,
    #[serde(default)]
    pub input: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConditionConfig {
    /// Fires at the earliest evaluated step whose simulation time exceeds
    /// the threshold, and never again.
    FirstTimeGt { value: f64 },
    /// Fires exactly at one step index.
    AtStep { step: u64 },
    /// Statically never fires; its actions keep nothing reachable.
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerConfig {
    pub condition: ConditionConfig,
    pub actions: Vec<ActionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ActionConfig {
    /// Volume-render every element of the input window.
    Render {
        input: String,
        camera: CameraConfig,
        tf: TransferFunctionConfig,
        render: RenderParams,
        /// Output file prefix, relative to the run directory.
        out: String,
    },
    /// Trace pathlines across the input window.
    Trace {
        input: String,
        seeds: SeedSpec,
        dt: f64,
        max_steps: usize,
        out: String,
    },
    /// Persist the most recent element of the input as a DNR bundle.
    SaveBundle { input: String, out: String },
}

impl ActionConfig {
    pub fn input(&self) -> &str {
        match self {
            ActionConfig::Render { input, .. } => input,
            ActionConfig::Trace { input, .. } => input,
            ActionConfig::SaveBundle { input, .. } => input,
        }
    }
}

/// Random seed points inside a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub count: usize,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    #[serde(default)]
    pub seed: u64,
}

impl SeedSpec {
    pub fn points<T: crate::Real>(&self) -> Vec<crate::math::Vec3<T>> {
        use rand::Rng;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| {
                crate::math::vec3(
                    crate::real(rng.gen_range(self.lo[0]..=self.hi[0])),
                    crate::real(rng.gen_range(self.lo[1]..=self.hi[1])),
                    crate::real(rng.gen_range(self.lo[2]..=self.hi[2])),
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_window_render_workflow() {
        let text = r#"{
            "driver": {"kind": "gaussian-blobs", "dims": [16, 16, 16], "dt": 0.005},
            "decomposition": {"ranks": [1, 1, 1], "ghost": 1},
            "train": {"max_steps": 50},
            "nodes": [
                {"id": "field", "op": "source"},
                {"id": "nv", "op": "encode", "input": "field", "target_psnr": 45.0},
                {"id": "win", "op": "window", "input": "nv", "size": 40}
            ],
            "triggers": [
                {
                    "condition": {"kind": "first-time-gt", "value": 0.35},
                    "actions": [{
                        "kind": "render",
                        "input": "win",
                        "camera": {"position": [0.5, 0.5, -2.0], "look_at": [0.5, 0.5, 0.5],
                                   "width": 32, "height": 32},
                        "tf": {"points": [{"value": 0.0, "rgba": [0, 0, 0, 0]},
                                           {"value": 1.0, "rgba": [1, 1, 1, 1]}]},
                        "render": {"step_size": 0.01},
                        "out": "frames/shot"
                    }]
                }
            ],
            "steps": 80
        }"#;
        let cfg: WorkflowConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.nodes.len(), 3);
        assert_eq!(cfg.steps, 80);
        match &cfg.nodes[2].op {
            NodeOpConfig::Window { size, admit_every } => {
                assert_eq!(*size, 40);
                assert_eq!(*admit_every, 1);
            }
            other => panic!("unexpected op {other:?}"),
        }
        let (enc, _) = cfg.network.resolve();
        assert_eq!(enc.levels, 8);
    }
}
