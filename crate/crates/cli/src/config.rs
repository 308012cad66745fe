//! Run configuration: a single TOML file per run; CLI flags override the
//! `run` section fields they duplicate.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qnas_core::error::{Error, Result};
use qnas_core::evo::EstimatorMode;
use qnas_core::grad::TrainConfig;
use qnas_core::noise::{load_device_model, DeviceModel};
use qnas_core::space::{DesignSpace, SpaceKind};
use qnas_core::tasks::{
    build_mnist_task, load_hamiltonian, load_mnist_idx, synthetic_dataset, EncoderSpec, QmlTask,
    Task, VqeTask,
};

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    pub dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    /// `qml-synthetic`, `qml-mnist` or `vqe`
    pub kind: String,
    #[serde(default)]
    pub n_classes: usize,
    #[serde(default)]
    pub samples: usize,
    #[serde(default)]
    pub encoder: String,
    #[serde(default)]
    pub hamiltonian: String,
    #[serde(default)]
    pub classes: Vec<usize>,
    #[serde(default)]
    pub data_dir: String,
    #[serde(default)]
    pub pool: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub name: String,
    pub n_qubits: usize,
    #[serde(default)]
    pub n_blocks: usize,
    #[serde(default = "default_max_layer_diff")]
    pub max_layer_diff: usize,
}

fn default_max_layer_diff() -> usize {
    7
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceSection {
    pub file: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr0: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub warmup_steps: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { lr0: 5e-3, weight_decay: 1e-4, epochs: 200, batch_size: 256, warmup_steps: 0 }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr0: self.lr0,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            batch_size: self.batch_size,
            warmup_steps: self.warmup_steps,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub iterations: usize,
    pub population: usize,
    pub parents: usize,
    pub mutation: usize,
    pub mutation_prob: f64,
    pub crossover: usize,
    /// `auto`, `noisy`, `success_rate` or `noise_free`
    pub estimator: String,
    /// validation samples per estimate (0 = all)
    pub valid_subset: usize,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            iterations: 40,
            population: 40,
            parents: 10,
            mutation: 20,
            mutation_prob: 0.4,
            crossover: 10,
            estimator: "auto".into(),
            valid_subset: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruneSection {
    pub r_initial: f64,
    pub ratios: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for PruneSection {
    fn default() -> Self {
        PruneSection { r_initial: 0.05, ratios: vec![0.1, 0.2, 0.3, 0.4, 0.5], epochs: 50, batch_size: 32 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub shots: u64,
    /// test samples for the noisy simulator (0 = all)
    pub test_subset: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { shots: 8192, test_subset: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub run: RunSection,
    pub task: TaskSection,
    pub space: SpaceSection,
    pub device: DeviceSection,
    #[serde(default)]
    pub super_train: TrainSection,
    #[serde(default)]
    pub sub_train: TrainSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub prune: PruneSection,
    #[serde(default)]
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("config file {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn design_space(&self) -> Result<DesignSpace> {
        let kind = SpaceKind::parse(&self.space.name)?;
        let mut space = DesignSpace::new(kind, self.space.n_qubits);
        if self.space.n_blocks > 0 {
            space = space.with_blocks(self.space.n_blocks);
        }
        Ok(space)
    }

    pub fn load_device(&self) -> Result<DeviceModel> {
        load_device_model(&self.device.file).map_err(|e| match e {
            Error::Io(io) => {
                Error::Validation(format!("device file {}: {io}", self.device.file.display()))
            }
            other => other,
        })
    }

    /// Build the benchmark task and check that it matches the space.
    pub fn build_task(&self) -> Result<Task> {
        let task = match self.task.kind.as_str() {
            "qml-synthetic" => {
                let n_classes = if self.task.n_classes == 0 { 2 } else { self.task.n_classes };
                let samples = if self.task.samples == 0 { 300 } else { self.task.samples };
                let encoder = if self.task.encoder.is_empty() {
                    EncoderSpec::mnist4()
                } else {
                    EncoderSpec::parse(&self.task.encoder)?
                };
                let data =
                    synthetic_dataset(samples, n_classes, encoder.total_features(), self.run.seed)?;
                Task::Qml(QmlTask::new(encoder, n_classes, self.space.n_qubits, data)?)
            }
            "qml-mnist" => {
                let dir = if self.task.data_dir.is_empty() {
                    std::env::var("QNAS_DATA_DIR").map_err(|_| {
                        Error::Validation(
                            "qml-mnist needs task.data_dir or the QNAS_DATA_DIR environment variable"
                                .into(),
                        )
                    })?
                } else {
                    self.task.data_dir.clone()
                };
                let dir = PathBuf::from(dir);
                let train = load_mnist_idx(
                    &dir.join("train-images-idx3-ubyte"),
                    &dir.join("train-labels-idx1-ubyte"),
                )?;
                let test = load_mnist_idx(
                    &dir.join("t10k-images-idx3-ubyte"),
                    &dir.join("t10k-labels-idx1-ubyte"),
                )?;
                let classes =
                    if self.task.classes.is_empty() { vec![3, 6] } else { self.task.classes.clone() };
                let pool = if self.task.pool == 0 { 4 } else { self.task.pool };
                let data = build_mnist_task(&train, &test, &classes, pool, self.run.seed)?;
                let encoder = if self.task.encoder.is_empty() {
                    EncoderSpec::mnist4()
                } else {
                    EncoderSpec::parse(&self.task.encoder)?
                };
                Task::Qml(QmlTask::new(encoder, classes.len(), self.space.n_qubits, data)?)
            }
            "vqe" => {
                if self.task.hamiltonian.is_empty() {
                    return Err(Error::Validation("vqe tasks need task.hamiltonian".into()));
                }
                let h = load_hamiltonian(Path::new(&self.task.hamiltonian)).map_err(|e| match e {
                    Error::Io(io) => {
                        Error::Validation(format!("hamiltonian file {}: {io}", self.task.hamiltonian))
                    }
                    other => other,
                })?;
                Task::Vqe(VqeTask { hamiltonian: h })
            }
            other => return Err(Error::Validation(format!("unknown task kind `{other}`"))),
        };
        if let Task::Vqe(t) = &task {
            if t.hamiltonian.n_qubits > self.space.n_qubits {
                return Err(Error::Validation(format!(
                    "hamiltonian needs {} qubits but space.n_qubits is {}",
                    t.hamiltonian.n_qubits, self.space.n_qubits
                )));
            }
        }
        Ok(task)
    }

    /// Resolve the estimator mode, applying the ≤10-qubit auto rule.
    pub fn estimator_mode(&self) -> Result<EstimatorMode> {
        match self.search.estimator.as_str() {
            "auto" => Ok(EstimatorMode::auto(self.space.n_qubits)),
            other => EstimatorMode::parse(other),
        }
    }

    pub fn valid_subset(&self) -> Option<usize> {
        if self.search.valid_subset == 0 { None } else { Some(self.search.valid_subset) }
    }

    pub fn evo_config(&self) -> qnas_core::evo::EvoConfig {
        qnas_core::evo::EvoConfig {
            iterations: self.search.iterations,
            population: self.search.population,
            parents: self.search.parents,
            mutation_count: self.search.mutation,
            mutation_prob: self.search.mutation_prob,
            crossover_count: self.search.crossover,
            seed: self.run.seed,
        }
    }

    /// Validate cross-section consistency and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        if !self.device.file.exists() {
            return Err(Error::Validation(format!(
                "device file {} does not exist",
                self.device.file.display()
            )));
        }
        if self.task.kind == "vqe" && !Path::new(&self.task.hamiltonian).exists() {
            return Err(Error::Validation(format!(
                "hamiltonian file {} does not exist",
                self.task.hamiltonian
            )));
        }
        let device = self.load_device()?;
        if self.space.n_qubits > device.n_physical {
            return Err(Error::Validation(format!(
                "space.n_qubits ({}) exceeds device qubits ({})",
                self.space.n_qubits, device.n_physical
            )));
        }
        self.design_space()?;
        Ok(())
    }

    /// Copy of the resolved config written into the run directory.
    pub fn save_into_run_dir(&self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.run.dir)?;
        let path = self.run.dir.join("config.toml");
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("config serialization: {e}")))?;
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
