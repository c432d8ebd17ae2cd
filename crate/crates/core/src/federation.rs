//! The federated protocol: broadcast, honest local training, attack
//! substitution, aggregation, global update and per-round evaluation.
//!
//! Clients `0..f` are the ones the attacker controls. They always train
//! honestly first; their honest results feed the attacker, which then
//! overwrites their submissions.

use std::path::PathBuf;
use std::time::Instant;

use log::warn;

use crate::aggregation::{AggregationOutcome, ClientUpdate, Defense, UpdateKind};
use crate::attacks::{
    self, AttackContext, AttackDiagnostics, AttackKind, MaliciousTraining,
};
use crate::data::{self, Dataset, Partition};
use crate::error::{Error, Result};
use crate::metrics::macro_ovr_auc;
use crate::nn::{LossSign, ModelSpec, ModelState, OptimizerConfig, OptimizerKind};
use rand::SeedableRng;

use crate::rng::{derive_seed, tags, SimRng};
use crate::train::{train_minibatch, StepControl, TrainConfig};
use crate::vector::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerChoice {
    Sgd,
    Adam,
}

impl OptimizerChoice {
    pub fn with_lr(self, lr: f64) -> OptimizerConfig {
        match self {
            OptimizerChoice::Sgd => OptimizerConfig::sgd(lr),
            OptimizerChoice::Adam => OptimizerConfig { kind: OptimizerKind::adam(), lr },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizerChoice::Sgd => "sgd",
            OptimizerChoice::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DefenseKind {
    FedAvg,
    Krum,
    TrimmedMean,
    Dos,
}

impl DefenseKind {
    pub fn name(self) -> &'static str {
        match self {
            DefenseKind::FedAvg => "fedavg",
            DefenseKind::Krum => "krum",
            DefenseKind::TrimmedMean => "trimmed_mean",
            DefenseKind::Dos => "dos",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefenseSpec {
    pub kind: DefenseKind,
    /// Trimmed Mean trim count; defaults to `f`.
    pub trim_k: Option<usize>,
    /// Byzantine count KRUM assumes; defaults to `f`.
    pub krum_f: Option<usize>,
}

/// Settings of the malicious proxy model. Unset fields inherit the honest
/// clients' settings; `epochs` defaults to 5 in parameter mode and 1 in
/// gradient mode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaliciousSettings {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub optimizer: Option<OptimizerChoice>,
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub malicious: MaliciousSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Blobs { classes: usize, per_class: usize, input_dim: usize, spread: f64 },
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionSpec {
    Iid,
    Dirichlet { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub source: DataSource,
    pub partition: PartitionSpec,
    /// Seed of data generation and partitioning; defaults to the run seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub f: usize,
    pub rounds: usize,
    pub mode: UpdateKind,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr_local: f64,
    /// Server step size in gradient mode.
    pub lr_server: f64,
    pub optimizer: OptimizerChoice,
    pub hidden: Vec<usize>,
    pub defense: DefenseSpec,
    pub attack: AttackSpec,
    pub data: DataSpec,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 10,
            f: 4,
            rounds: 30,
            mode: UpdateKind::Parameters,
            local_epochs: 1,
            batch_size: 16,
            lr_local: 0.01,
            lr_server: 1.0,
            optimizer: OptimizerChoice::Sgd,
            hidden: vec![16],
            defense: DefenseSpec { kind: DefenseKind::Dos, trim_k: None, krum_f: None },
            attack: AttackSpec { kind: AttackKind::None, malicious: MaliciousSettings::default() },
            data: DataSpec {
                source: DataSource::Blobs { classes: 2, per_class: 500, input_dim: 20, spread: 1.0 },
                partition: PartitionSpec::Iid,
                seed: None,
            },
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Check every cross-field constraint. Messages name the offending key.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.rounds < 1 {
            return fail("rounds must be >= 1".into());
        }
        if self.n < 1 {
            return fail("n must be >= 1".into());
        }
        if 2 * self.f >= self.n {
            return fail(format!("f must satisfy 2 <= f < n/2 (n = {}, f = {})", self.n, self.f));
        }
        if self.attack.kind != AttackKind::None && self.f < 2 {
            return fail(format!(
                "f must satisfy 2 <= f < n/2 when attacking (n = {}, f = {})",
                self.n, self.f
            ));
        }
        for (key, v) in [("lr_local", self.lr_local), ("lr_server", self.lr_server)] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{key} must be > 0"));
            }
        }
        if self.batch_size < 1 {
            return fail("batch_size must be >= 1".into());
        }
        if self.hidden.contains(&0) {
            return fail("model.hidden sizes must be >= 1".into());
        }
        let m = &self.attack.malicious;
        if let Some(lr) = m.lr {
            if !(lr > 0.0 && lr.is_finite()) {
                return fail("attack.lr must be > 0".into());
            }
        }
        if m.batch_size == Some(0) {
            return fail("attack.batch_size must be >= 1".into());
        }
        match self.attack.kind {
            AttackKind::Noise { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                return fail("attack.sigma must be >= 0".into());
            }
            AttackKind::Lie { z } if !z.is_finite() => return fail("attack.z must be finite".into()),
            AttackKind::Scale { lambda } if !lambda.is_finite() => {
                return fail("attack.lambda must be finite".into());
            }
            _ => {}
        }
        match self.defense.kind {
            DefenseKind::Krum => {
                let kf = self.defense.krum_f.unwrap_or(self.f);
                if self.n < kf + 3 {
                    return fail(format!("defense.krum_f: KRUM needs n >= f + 3 (n = {}, f = {kf})", self.n));
                }
            }
            DefenseKind::TrimmedMean => {
                let k = self.defense.trim_k.unwrap_or(self.f);
                if 2 * k >= self.n {
                    return fail(format!("defense.trim_k must satisfy 2 * trim_k < n (n = {}, trim_k = {k})", self.n));
                }
            }
            DefenseKind::Dos if self.n < 3 => {
                return fail(format!("defense.kind = dos needs n >= 3 (n = {})", self.n));
            }
            _ => {}
        }
        match &self.data.source {
            DataSource::Blobs { classes, per_class, input_dim, spread } => {
                if *classes < 2 {
                    return fail("data.classes must be >= 2".into());
                }
                if *per_class < 1 || *input_dim < 1 {
                    return fail("data.per_class and data.input_dim must be >= 1".into());
                }
                if !(*spread > 0.0 && spread.is_finite()) {
                    return fail("data.spread must be > 0".into());
                }
            }
            DataSource::Csv { .. } => {}
        }
        if let PartitionSpec::Dirichlet { alpha } = self.data.partition {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return fail("data.alpha must be > 0".into());
            }
        }
        Ok(())
    }

    pub fn defense(&self) -> Defense {
        match self.defense.kind {
            DefenseKind::FedAvg => Defense::FedAvg,
            DefenseKind::Krum => Defense::Krum { f: self.defense.krum_f.unwrap_or(self.f) },
            DefenseKind::TrimmedMean => {
                Defense::TrimmedMean { trim_k: self.defense.trim_k.unwrap_or(self.f) }
            }
            DefenseKind::Dos => Defense::Dos,
        }
    }

    pub fn honest_training(&self) -> TrainConfig {
        TrainConfig {
            optimizer: self.optimizer.with_lr(self.lr_local),
            batch_size: self.batch_size,
            epochs: self.local_epochs,
        }
    }

    pub fn malicious_training(&self) -> TrainConfig {
        let m = &self.attack.malicious;
        let default_epochs = match self.mode {
            UpdateKind::Parameters => 5,
            UpdateKind::Gradients => 1,
        };
        TrainConfig {
            optimizer: m.optimizer.unwrap_or(self.optimizer).with_lr(m.lr.unwrap_or(self.lr_local)),
            batch_size: m.batch_size.unwrap_or(self.batch_size),
            epochs: m.epochs.unwrap_or(default_epochs),
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data.seed.unwrap_or(self.seed)
    }

    pub fn attacking(&self) -> bool {
        self.attack.kind != AttackKind::None
    }
}

/// KRUM's pick or the per-client weights of a weighting rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Client(usize),
    Weights(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based round number.
    pub round: usize,
    pub test_auc: f64,
    pub defense: &'static str,
    pub attack: &'static str,
    pub selection: Selection,
    pub diagnostics: Option<AttackDiagnostics>,
    pub wallclock_s: f64,
}

/// Everything one round produced.
#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub record: RoundRecord,
    /// Submissions that entered aggregation, in client order.
    pub submitted: Vec<ClientUpdate>,
    pub aggregation: AggregationOutcome,
}

/// Local training result of one client.
#[derive(Debug, Clone)]
pub struct LocalResult {
    pub update: ClientUpdate,
    pub final_params: ParamVector,
}

fn local_rng_seed(seed: u64, client_id: usize, round: usize) -> u64 {
    derive_seed(seed, tags::LOCAL_TRAIN, &[round as u64, client_id as u64])
}

fn train_from(
    shard: &Dataset,
    spec: &ModelSpec,
    global: &ParamVector,
    train: &TrainConfig,
    rng_seed: u64,
) -> Result<ParamVector> {
    let mut model = ModelState::from_params(spec, global.clone())?;
    let mut rng = SimRng::seed_from_u64(rng_seed);
    train_minibatch(&mut model, shard, train, LossSign::Minimize, &mut rng, |_| StepControl::Continue)?;
    Ok(model.into_params())
}

/// Honest parameter-mode client: train from the global model, submit the
/// final parameters.
pub fn local_train_params(
    shard: &Dataset,
    spec: &ModelSpec,
    global: &ParamVector,
    train: &TrainConfig,
    client_id: usize,
    rng_seed: u64,
) -> Result<LocalResult> {
    let final_params = train_from(shard, spec, global, train, rng_seed)?;
    Ok(LocalResult {
        update: ClientUpdate {
            client_id,
            kind: UpdateKind::Parameters,
            vector: final_params.clone(),
            num_samples: shard.len(),
        },
        final_params,
    })
}

/// Honest gradient-mode client: train from the global model and submit
/// `(global - final) / lr_local`.
pub fn local_train_grads(
    shard: &Dataset,
    spec: &ModelSpec,
    global: &ParamVector,
    train: &TrainConfig,
    client_id: usize,
    rng_seed: u64,
) -> Result<LocalResult> {
    let final_params = train_from(shard, spec, global, train, rng_seed)?;
    let inv_lr = 1.0 / train.optimizer.lr;
    let vector: ParamVector = global
        .iter()
        .zip(final_params.iter())
        .map(|(g, w)| (g - w) * inv_lr)
        .collect::<Vec<_>>()
        .into();
    Ok(LocalResult {
        update: ClientUpdate { client_id, kind: UpdateKind::Gradients, vector, num_samples: shard.len() },
        final_params,
    })
}

/// Macro one-vs-rest AUC of the model on `test`.
pub fn evaluate_auc(spec: &ModelSpec, params: &ParamVector, test: &Dataset) -> Result<f64> {
    let model = ModelState::from_params(spec, params.clone())?;
    let scores = model.log_probabilities(&test.inputs)?;
    macro_ovr_auc(&scores, &test.labels)
}

/// Data prepared for a run.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub partition: Partition,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let seed = cfg.data_seed();
    let split = match &cfg.data.source {
        DataSource::Blobs { classes, per_class, input_dim, spread } => {
            data::gen_blobs(*classes, *per_class, *input_dim, *spread, seed)?
        }
        DataSource::Csv { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("data.path: cannot read {}: {e}", path.display()))
            })?;
            data::stratified_split(&Dataset::from_csv_str(&text)?, seed)
        }
    };
    let partition = match cfg.data.partition {
        PartitionSpec::Iid => data::partition_iid(&split.train, cfg.n, seed)?,
        PartitionSpec::Dirichlet { alpha } => {
            data::partition_dirichlet(&split.train, cfg.n, alpha, seed)?
        }
    };
    Ok(PreparedData { train: split.train, test: split.test, partition })
}

/// A running experiment: global model plus per-client data.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: ExperimentConfig,
    spec: ModelSpec,
    defense: Defense,
    shards: Vec<Dataset>,
    test: Dataset,
    global: ParamVector,
    rounds_done: usize,
}

impl Simulation {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let prepared = prepare_data(&cfg)?;
        let mut shards = prepared.partition.shards(&prepared.train);
        if cfg.attack.kind == AttackKind::LabelFlip {
            for shard in shards.iter_mut().take(cfg.f) {
                shard.labels = attacks::label_flip(&shard.labels, shard.class_count)?;
            }
        }
        let layer_sizes: Vec<usize> = std::iter::once(prepared.train.input_dim())
            .chain(cfg.hidden.iter().copied())
            .chain(std::iter::once(prepared.train.class_count))
            .collect();
        let spec = ModelSpec::new(layer_sizes)?;
        let global = ModelState::init(&spec, cfg.seed).into_params();
        Ok(Self {
            defense: cfg.defense(),
            cfg,
            spec,
            shards,
            test: prepared.test,
            global,
            rounds_done: 0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn global(&self) -> &ParamVector {
        &self.global
    }

    pub fn shards(&self) -> &[Dataset] {
        &self.shards
    }

    pub fn test_set(&self) -> &Dataset {
        &self.test
    }

    pub fn evaluate(&self) -> Result<f64> {
        evaluate_auc(&self.spec, &self.global, &self.test)
    }

    /// Run one communication round and advance the global model.
    pub fn run_round(&mut self) -> Result<RoundOutput> {
        let started = Instant::now();
        let round = self.rounds_done + 1;
        let cfg = &self.cfg;
        let train = cfg.honest_training();

        let mut results: Vec<LocalResult> = Vec::with_capacity(cfg.n);
        for (client_id, shard) in self.shards.iter().enumerate() {
            if shard.is_empty() {
                warn!("round {round}: client {client_id} has no data and is skipped");
                continue;
            }
            let seed = local_rng_seed(cfg.seed, client_id, round);
            let result = match cfg.mode {
                UpdateKind::Parameters => {
                    local_train_params(shard, &self.spec, &self.global, &train, client_id, seed)?
                }
                UpdateKind::Gradients => {
                    local_train_grads(shard, &self.spec, &self.global, &train, client_id, seed)?
                }
            };
            results.push(result);
        }
        if results.is_empty() {
            return Err(Error::Empty(format!("round {round}: no client produced an update")));
        }

        let diagnostics = self.apply_attack(&mut results, round)?;
        let submitted: Vec<ClientUpdate> = results.into_iter().map(|r| r.update).collect();
        let aggregation = self.defense.aggregate(&submitted).map_err(|e| {
            Error::Numeric(format!("round {round}: {} aggregation failed: {e}", self.defense.name()))
        })?;

        match cfg.mode {
            UpdateKind::Parameters => self.global = aggregation.aggregate.clone(),
            UpdateKind::Gradients => self.global.axpy(-cfg.lr_server, &aggregation.aggregate),
        }
        if !self.global.is_finite() {
            return Err(Error::Numeric(format!("round {round}: global model diverged")));
        }
        self.rounds_done = round;
        let test_auc = self.evaluate()?;

        let selection = match aggregation.selected {
            Some(idx) => Selection::Client(submitted[idx].client_id),
            None => Selection::Weights(aggregation.weights.clone()),
        };
        let record = RoundRecord {
            round,
            test_auc,
            defense: self.defense.name(),
            attack: self.cfg.attack.kind.name(),
            selection,
            diagnostics,
            wallclock_s: started.elapsed().as_secs_f64(),
        };
        Ok(RoundOutput { record, submitted, aggregation })
    }

    fn apply_attack(
        &self,
        results: &mut [LocalResult],
        round: usize,
    ) -> Result<Option<AttackDiagnostics>> {
        let cfg = &self.cfg;
        let controlled: Vec<usize> = results
            .iter()
            .enumerate()
            .filter(|(_, r)| r.update.client_id < cfg.f)
            .map(|(i, _)| i)
            .collect();
        match cfg.attack.kind {
            AttackKind::None | AttackKind::LabelFlip => Ok(None),
            AttackKind::Noise { sigma } => {
                for &i in &controlled {
                    let seed = derive_seed(cfg.seed, tags::NOISE, &[round as u64, results[i].update.client_id as u64]);
                    results[i].update.vector = attacks::gaussian_noise_attack(&results[i].update.vector, sigma, seed)?;
                }
                Ok(None)
            }
            AttackKind::Scale { lambda } => {
                for &i in &controlled {
                    results[i].update.vector = attacks::scale_attack(&results[i].update.vector, lambda);
                }
                Ok(None)
            }
            AttackKind::Disbelieve | AttackKind::Lie { .. } | AttackKind::MinMax { .. } => {
                if controlled.len() < 2 {
                    warn!("round {round}: fewer than 2 controlled clients trained; attack skipped");
                    return Ok(None);
                }
                let ctx = AttackContext {
                    malicious_updates: controlled.iter().map(|&i| results[i].update.vector.clone()).collect(),
                    malicious_params: controlled.iter().map(|&i| results[i].final_params.clone()).collect(),
                    combined_data: Dataset::concat(
                        controlled.iter().map(|&i| &self.shards[results[i].update.client_id]),
                    )?,
                    mode: cfg.mode,
                    model: self.spec.clone(),
                };
                let (vector, diagnostics) = self.craft(&ctx, round)?;
                for &i in &controlled {
                    results[i].update.vector = vector.clone();
                }
                Ok(diagnostics)
            }
        }
    }

    fn craft(&self, ctx: &AttackContext, round: usize) -> Result<(ParamVector, Option<AttackDiagnostics>)> {
        let cfg = &self.cfg;
        match cfg.attack.kind {
            AttackKind::Lie { z } => Ok((attacks::lie_attack(&ctx.malicious_updates, z)?, None)),
            AttackKind::MinMax { direction } => {
                Ok((attacks::min_max_attack(&ctx.malicious_updates, direction)?, None))
            }
            AttackKind::Disbelieve => {
                let training = MaliciousTraining {
                    train: cfg.malicious_training(),
                    seed: derive_seed(cfg.seed, tags::ATTACK_TRAIN, &[round as u64]),
                };
                let crafted = match cfg.mode {
                    UpdateKind::Parameters => attacks::disbelieve_params(ctx, &training),
                    UpdateKind::Gradients => attacks::disbelieve_grads(ctx, &training),
                };
                match crafted {
                    Ok((v, d)) => Ok((v, Some(d))),
                    Err(Error::DegenerateAttack(why)) => {
                        warn!("round {round}: {why}; sending the malicious mean gradient");
                        let (mu_param, mu_grad) = attacks::malicious_means(ctx)?;
                        let mu_grad = mu_grad.expect("gradient mode");
                        let diag = AttackDiagnostics {
                            mu_param_norm: mu_param.norm(),
                            mu_grad_norm: Some(mu_grad.norm()),
                            threshold: attacks::pairwise_extreme_sqdist(
                                &ctx.malicious_updates,
                                attacks::Extreme::Min,
                            )?,
                            achieved_sq_dist: 0.0,
                            sf: None,
                            fallback_used: true,
                            training_steps: 0,
                        };
                        Ok((mu_grad, Some(diag)))
                    }
                    Err(e) => Err(e),
                }
            }
            _ => unreachable!("only crafted attacks reach here"),
        }
    }
}

/// Run all rounds, handing each record to `sink` as soon as it exists.
pub fn run_experiment_with<F>(cfg: &ExperimentConfig, mut sink: F) -> Result<(Vec<RoundRecord>, ParamVector)>
where
    F: FnMut(&RoundRecord) -> Result<()>,
{
    let mut sim = Simulation::new(cfg.clone())?;
    let mut records = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let out = sim.run_round()?;
        sink(&out.record)?;
        records.push(out.record);
    }
    Ok((records, sim.global().clone()))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RoundRecord>> {
    run_experiment_with(cfg, |_| Ok(())).map(|(records, _)| records)
}
