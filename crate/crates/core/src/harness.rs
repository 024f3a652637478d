//! Experiment orchestration: configuration, the paired clean/attacked protocol,
//! calibration, and report emission.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{self, AttackKind, AttackSpec, ReadoutTarget, SignMode};
use crate::defenses::{self, AnomalyModel, Detector, IdsFeatures, IdsRuleSet, RocPoint};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for, Stream};
use crate::snn::{self, NetworkState, SimConfig, StdpParams};
use crate::telemetry::{
    self, AttackType, Baseline, DatasetPlan, DatasetSample, SummaryStats, WindowMetrics,
};
use crate::workload::{self, AccuracyReport, ReadoutConfig, ReadoutMap, TaskSets, TaskSpec, Workbench};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Small network and scenario counts for quick checks.
    Desk,
    /// The full 1000-neuron, 1000-scenario protocol.
    Full,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            _ => Err(Error::Usage(format!("unknown profile `{s}` (expected desk or full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttacksConfig {
    pub tamper_scenarios: usize,
    pub poison_scenarios: usize,
    pub tamper_fraction: f64,
    pub tamper_magnitude: f64,
    pub sign_mode: SignMode,
    pub poison_fraction: f64,
    pub stealth_budget_pp: f64,
    pub success_threshold_pp: f64,
}

impl Default for AttacksConfig {
    fn default() -> Self {
        let t = AttackSpec::tamper(0);
        AttacksConfig {
            tamper_scenarios: 500,
            poison_scenarios: 500,
            tamper_fraction: t.fraction,
            tamper_magnitude: t.magnitude,
            sign_mode: t.sign_mode,
            poison_fraction: AttackSpec::poison(0).fraction,
            stealth_budget_pp: t.stealth_budget_pp,
            success_threshold_pp: t.success_threshold_pp,
        }
    }
}

impl AttacksConfig {
    pub fn template(&self, kind: AttackKind) -> AttackSpec {
        let base = match kind {
            AttackKind::WeightTamper => AttackSpec {
                fraction: self.tamper_fraction,
                magnitude: self.tamper_magnitude,
                sign_mode: self.sign_mode,
                ..AttackSpec::tamper(0)
            },
            AttackKind::InputPoison => AttackSpec {
                fraction: self.poison_fraction,
                ..AttackSpec::poison(0)
            },
        };
        AttackSpec {
            stealth_budget_pp: self.stealth_budget_pp,
            success_threshold_pp: self.success_threshold_pp,
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorsConfig {
    pub anomaly: bool,
    pub anomaly_target_fpr: f64,
    pub ids: bool,
    pub ids_k_sigma: f64,
    /// Normal windows in the IDS pre-study.
    pub ids_prestudy_windows: usize,
    pub ids_features: IdsFeatures,
    pub secure: bool,
    /// Share of tamper writes injected upstream of the signer.
    pub presign_fraction: f64,
}

impl Default for DetectorsConfig {
    fn default() -> Self {
        DetectorsConfig {
            anomaly: true,
            anomaly_target_fpr: 0.1,
            ids: true,
            ids_k_sigma: 3.0,
            ids_prestudy_windows: 50,
            ids_features: IdsFeatures::default(),
            secure: true,
            presign_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub target: f64,
    pub tol: f64,
}

impl Band {
    pub const fn new(target: f64, tol: f64) -> Self {
        Band { target, tol }
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.target).abs() <= self.tol
    }

    fn loss(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return f64::INFINITY;
        }
        let z = if self.tol > 0.0 {
            (x - self.target) / self.tol
        } else if x == self.target {
            0.0
        } else {
            (x - self.target).abs() * 1e6
        };
        z * z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Refuse to run experiments whose clean accuracy misses its band.
    pub enforce_accuracy_band: bool,
    pub accuracy: Band,
    pub latency_ms: Band,
    pub spike_frequency_hz: Band,
    pub weight_change_pct: Band,
    /// Maximum number of configurations evaluated by `calibrate`.
    pub budget: usize,
    /// Normal telemetry windows measured per evaluation.
    pub windows: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            enforce_accuracy_band: true,
            accuracy: Band::new(95.0, 1.0),
            latency_ms: Band::new(10.0, 2.0),
            spike_frequency_hz: Band::new(50.0, 10.0),
            weight_change_pct: Band::new(0.5, 0.1),
            budget: 16,
            windows: 10,
        }
    }
}

/// Everything an experiment run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// All other seeds are derived from this one.
    pub root_seed: u64,
    /// Share of telemetry scenarios used to fit detectors.
    pub split: f64,
    pub output_dir: String,
    pub sim: SimConfig,
    pub task: TaskSpec,
    pub readout: ReadoutConfig,
    pub attacks: AttacksConfig,
    pub dataset: DatasetPlan,
    pub detectors: DetectorsConfig,
    pub calibration: CalibrationConfig,
}

impl ExperimentConfig {
    /// Shipped defaults for a profile.
    pub fn profile(p: Profile) -> Self {
        let full = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            root_seed: 7,
            split: 0.7,
            output_dir: "out".into(),
            sim: SimConfig {
                n_neurons: 1000,
                tau_m: 20.0,
                v_reset: 0.5,
                syn_gain: 0.01,
                stdp: StdpParams {
                    a_plus: 0.8e-3,
                    a_minus: 0.6764e-3,
                    tau_plus: 20.0,
                    tau_minus: 20.0,
                },
                ..SimConfig::default()
            },
            task: TaskSpec {
                base_rate_hz: 35.0,
                peak_rate_hz: 155.0,
                noise_sigma: 10.0,
                samples_per_class: 20,
                test_per_class: 40,
                ..TaskSpec::default()
            },
            readout: ReadoutConfig {
                group_size: 10,
                decision_margin: 2,
                tonic_current: 0.04,
                teacher_current: 0.1,
                train_lr_scale: 0.1375,
                ..ReadoutConfig::default()
            },
            attacks: AttacksConfig::default(),
            dataset: DatasetPlan::default(),
            detectors: DetectorsConfig::default(),
            calibration: CalibrationConfig::default(),
        };
        match p {
            Profile::Full => full,
            Profile::Desk => {
                let mut c = full;
                // 256 sensory neurons: four per input channel.
                c.sim.n_neurons = 306;
                c.sim.syn_gain = 0.037;
                c.readout.train_lr_scale = 0.33;
                // A wider margin keeps the small readout stable under poisoning.
                c.readout.decision_margin = 4;
                c.attacks.tamper_scenarios = 50;
                c.attacks.poison_scenarios = 50;
                c.dataset.n_samples = 1000;
                c.calibration.enforce_accuracy_band = false;
                c.calibration.budget = 8;
                c
            }
        }
    }

    /// Parses TOML layered over a profile. Unknown keys are rejected.
    pub fn from_toml(text: &str, base: Profile) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        match user.get("schema_version").and_then(toml::Value::as_integer) {
            Some(v) if v == i64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(Error::config("schema_version", format!("unsupported version {v}"))),
            None => return Err(Error::config("schema_version", "missing")),
        }
        let mut merged = toml::Table::try_from(Self::profile(base)).map_err(|e| Error::Parse(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: ExperimentConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config("schema_version", format!("unsupported version {}", self.schema_version)));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::config("split", "must lie in (0, 1)"));
        }
        if self.attacks.tamper_scenarios + self.attacks.poison_scenarios == 0 {
            return Err(Error::config("attacks", "need at least one scenario"));
        }
        if self.dataset.n_samples < 2 {
            return Err(Error::config("dataset.n_samples", "must be >= 2"));
        }
        if !(self.detectors.anomaly_target_fpr > 0.0 && self.detectors.anomaly_target_fpr < 1.0) {
            return Err(Error::config("detectors.anomaly_target_fpr", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.detectors.presign_fraction) {
            return Err(Error::config("detectors.presign_fraction", "must lie in [0, 1]"));
        }
        if self.detectors.ids && self.detectors.ids_prestudy_windows < 2 {
            return Err(Error::config("detectors.ids_prestudy_windows", "must be >= 2"));
        }
        self.sim.validate()?;
        self.task.validate()?;
        self.readout.validate()?;
        self.dataset.validate()?;
        for k in [AttackKind::WeightTamper, AttackKind::InputPoison] {
            self.attacks.template(k).validate()?;
        }
        Ok(())
    }

    /// Copy with every section seed derived from `root_seed`.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.sim.seed = derive_seed(self.root_seed, Stream::Init, 0);
        c.task.seed = derive_seed(self.root_seed, Stream::Task, 0);
        c.dataset.seed = derive_seed(self.root_seed, Stream::Dataset, 0);
        c
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Runs `f` on a pool of `jobs` threads, or the global pool when `None`.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::Usage("--jobs must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Usage(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// A trained network with its clean test-set evaluation.
#[derive(Debug, Clone)]
pub struct Trained {
    pub bench: Workbench,
    pub network: NetworkState,
    pub readout: ReadoutMap,
    pub sets: TaskSets,
    pub test_seeds: Vec<u64>,
    pub clean: AccuracyReport,
}

impl Trained {
    pub fn baseline(&self) -> Baseline<'_> {
        Baseline {
            bench: &self.bench,
            network: &self.network,
            readout: &self.readout,
        }
    }
}

/// Trains the baseline network of a resolved config and evaluates it.
pub fn train_baseline(cfg: &ExperimentConfig) -> Result<Trained> {
    let bench = Workbench::new(cfg.sim.clone(), cfg.task.clone(), cfg.readout.clone())?;
    let sets = workload::gen_task(&cfg.task)?;
    let mut network = snn::init_network(&cfg.sim)?;
    let readout = workload::train(&bench, &mut network, &sets.train)?;
    let test_seeds: Vec<u64> = (0..sets.test.len())
        .map(|i| workload::sample_seed(cfg.sim.seed, workload::SET_TEST, i))
        .collect();
    let clean = workload::accuracy(&bench, &mut network.clone(), &readout, &sets.test, &test_seeds)?;
    Ok(Trained {
        bench,
        network,
        readout,
        sets,
        test_seeds,
        clean,
    })
}

/// Generates the labelled telemetry dataset of a config.
pub fn gen_dataset(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<DatasetSample>> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let trained = train_baseline(&cfg)?;
    with_jobs(jobs, || dataset_for(&cfg, &trained))?
}

fn dataset_for(cfg: &ExperimentConfig, t: &Trained) -> Result<Vec<DatasetSample>> {
    telemetry::generate_dataset(
        &t.baseline(),
        &cfg.dataset,
        &cfg.attacks.template(AttackKind::WeightTamper),
        &cfg.attacks.template(AttackKind::InputPoison),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub detector: String,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecureOutcome {
    pub accuracy_pct: f64,
    pub latency_ms: f64,
    pub success: bool,
    pub accepted: usize,
    pub rejected: usize,
    pub alarm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario_id: u64,
    pub attack_type: AttackKind,
    pub clean_accuracy_pct: f64,
    pub attacked_accuracy_pct: f64,
    pub success: bool,
    pub stealthy: bool,
    pub latency_clean_ms: f64,
    pub latency_attacked_ms: f64,
    pub weight_change_clean_pct: f64,
    pub weight_change_attacked_pct: f64,
    /// Telemetry of the attacked monitoring window.
    pub window: WindowMetrics,
    pub verdicts: Vec<Verdict>,
    pub secure: Option<SecureOutcome>,
}

/// Fitted detectors shared by all scenarios.
#[derive(Debug, Clone, Default)]
pub struct Detectors {
    pub anomaly: Option<AnomalyModel>,
    pub ids: Option<IdsRuleSet>,
}

impl Detectors {
    fn verdicts(&self, m: &WindowMetrics) -> Vec<Verdict> {
        let mut v = Vec::new();
        if let Some(a) = &self.anomaly {
            v.push(Verdict {
                detector: ANOMALY.into(),
                flagged: a.flag(m),
            });
        }
        if let Some(r) = &self.ids {
            v.push(Verdict {
                detector: IDS.into(),
                flagged: r.flag(m),
            });
        }
        v
    }
}

pub const ANOMALY: &str = "anomaly";
pub const IDS: &str = "ids";

/// Runs one paired clean/attacked scenario against a trained baseline.
pub fn run_scenario(
    cfg: &ExperimentConfig,
    t: &Trained,
    detectors: &Detectors,
    scenario_id: u64,
    kind: AttackKind,
) -> Result<ScenarioResult> {
    let seed = derive_seed(cfg.root_seed, Stream::Scenario, scenario_id);
    let spec = AttackSpec {
        seed,
        ..cfg.attacks.template(kind)
    };
    let bench = &t.bench;
    let (w_min, w_max) = (cfg.sim.w_min, cfg.sim.w_max);
    let clean = &t.clean;
    let mut start = t.network.clone();
    let window_poison = kind == AttackKind::InputPoison;
    let (attacked, tamper_secure) = match kind {
        AttackKind::WeightTamper => {
            let target = ReadoutTarget::new(bench, &t.readout);
            let log = attacks::tamper_weights(&mut start, &spec, Some(&target), w_min, w_max)?;
            let attacked = workload::accuracy(bench, &mut start.clone(), &t.readout, &t.sets.test, &t.test_seeds)?;
            let secure = if cfg.detectors.secure {
                let key = defenses::session_key(cfg.root_seed);
                let slog = defenses::tamper_to_log(&log, &key, cfg.detectors.presign_fraction, seed)?;
                let mut guarded = t.network.clone();
                let v = defenses::secure_verify_and_apply(&mut guarded, &slog, &key, w_min, w_max)?;
                let r = workload::accuracy(bench, &mut guarded, &t.readout, &t.sets.test, &t.test_seeds)?;
                Some(SecureOutcome {
                    accuracy_pct: r.percent,
                    latency_ms: r.mean_latency(),
                    success: attacks::attack_success(&clean.outcomes, &r.outcomes, &spec)?,
                    accepted: v.accepted.len(),
                    rejected: v.rejected.len(),
                    alarm: v.alarm,
                })
            } else {
                None
            };
            (attacked, secure)
        }
        AttackKind::InputPoison => {
            let ids: Vec<u64> = (0..t.sets.test.len() as u64).collect();
            let (poisoned, _) = attacks::poison_inputs(&t.sets.test, &ids, &spec, &cfg.task)?;
            let attacked = workload::accuracy(bench, &mut t.network.clone(), &t.readout, &poisoned, &t.test_seeds)?;
            (attacked, None)
        }
    };
    let stealthy = attacks::check_stealth(clean.percent, attacked.percent, &spec);
    let success = attacks::attack_success(&clean.outcomes, &attacked.outcomes, &spec)?;
    // Inference does not write weights, so under poisoning the signed log has
    // nothing to reject and the outcome is the unprotected one.
    let secure = tamper_secure.or_else(|| {
        (cfg.detectors.secure && window_poison).then(|| SecureOutcome {
            accuracy_pct: attacked.percent,
            latency_ms: attacked.mean_latency(),
            success,
            accepted: 0,
            rejected: 0,
            alarm: false,
        })
    });

    // One monitoring window, identical input for both arms.
    let (sample, stim_seed) = telemetry::window_input(bench, seed, 0)?;
    let base = t.baseline();
    let n = cfg.sim.n_neurons;
    let n_syn = n * n.saturating_sub(1);
    let wc = |d: f64| telemetry::round_sig(telemetry::weight_change_pct(d, n_syn, w_min, w_max), 6);
    let (_, _, clean_diff) = telemetry::run_dataset_window(&base, &t.network, &sample, stim_seed)?;
    let attacked_sample = if window_poison {
        attacks::poison_sample(&sample, 0, &spec, &cfg.task)?.0
    } else {
        sample
    };
    let (out, decision, diff) = telemetry::run_dataset_window(&base, &start, &attacked_sample, stim_seed)?;
    let row = telemetry::collect_window(
        scenario_id,
        0,
        kind.into(),
        stim_seed,
        &out.record,
        n,
        diff,
        (w_min, w_max),
        Some(&decision),
    )?;
    Ok(ScenarioResult {
        scenario_id,
        attack_type: kind,
        clean_accuracy_pct: clean.percent,
        attacked_accuracy_pct: attacked.percent,
        success,
        stealthy,
        latency_clean_ms: clean.mean_latency(),
        latency_attacked_ms: attacked.mean_latency(),
        weight_change_clean_pct: wc(clean_diff),
        weight_change_attacked_pct: row.metrics.weight_change_pct,
        verdicts: detectors.verdicts(&row.metrics),
        window: row.metrics,
        secure,
    })
}

/// Splits rows by scenario: a seeded `split` share of scenarios goes to the
/// first (training) half.
pub fn split_by_scenario(rows: &[DatasetSample], split: f64, seed: u64) -> (Vec<DatasetSample>, Vec<DatasetSample>) {
    let ids: BTreeSet<u64> = rows.iter().map(|r| r.scenario_id).collect();
    let mut ids: Vec<u64> = ids.into_iter().collect();
    ids.shuffle(&mut rng_for(seed, Stream::Dataset, u64::MAX));
    let k = (split * ids.len() as f64).round() as usize;
    let train: BTreeSet<u64> = ids[..k.min(ids.len())].iter().copied().collect();
    rows.iter().cloned().partition(|r| train.contains(&r.scenario_id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub root_seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanSummary {
    pub accuracy_pct: f64,
    pub mean_latency_ms: f64,
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub attack_type: AttackKind,
    pub scenarios: usize,
    pub successes: usize,
    pub success_pct: f64,
    pub stealthy_pct: f64,
    pub accuracy_mean_pct: f64,
    pub accuracy_sd_pct: f64,
    pub latency_mean_ms: f64,
    pub latency_sd_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchRow {
    pub metric: String,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub windows: usize,
    pub train_windows: usize,
    pub test_windows: usize,
    pub stats: SummaryStats,
    /// Normal versus pooled attack windows.
    pub welch: Vec<WelchRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSummary {
    pub name: String,
    /// Attack windows flagged in the held-out split.
    pub detection_pct: f64,
    pub false_positive_pct: f64,
    pub per_attack_pct: Vec<(String, f64)>,
    /// Scenarios that succeeded and went unflagged.
    pub residual_success_pct: f64,
    pub auc: Option<f64>,
    pub roc: Vec<RocPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecureSummary {
    /// Attack scenarios that raised the log alarm.
    pub detection_pct: f64,
    pub residual_tamper_pct: Option<f64>,
    pub residual_poison_pct: Option<f64>,
    pub residual_pooled_pct: f64,
    pub tamper_writes: usize,
    pub tamper_writes_rejected: usize,
    pub mean_latency_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyImpact {
    pub tamper_pct: f64,
    pub poison_pct: f64,
    pub pooled_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub normal: usize,
    pub attack: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    pub clean: CleanSummary,
    pub attacks: Vec<AttackSummary>,
    pub dataset: DatasetSummary,
    pub detectors: Vec<DetectorSummary>,
    pub secure: Option<SecureSummary>,
    pub latency_impact: Option<LatencyImpact>,
    pub spike_histogram: Vec<HistBin>,
    pub scenarios: Vec<ScenarioResult>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parses a saved report and checks its config hash.
    pub fn from_json(s: &str) -> Result<Self> {
        let r: ExperimentReport = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if r.config.hash() != r.provenance.config_hash {
            return Err(Error::Parse("config hash does not match the embedded config".into()));
        }
        Ok(r)
    }

    pub fn attack(&self, kind: AttackKind) -> Option<&AttackSummary> {
        self.attacks.iter().find(|a| a.attack_type == kind)
    }

    pub fn detector(&self, name: &str) -> Option<&DetectorSummary> {
        self.detectors.iter().find(|d| d.name == name)
    }
}

/// The scenario list `(scenario_id, kind)`: tampering first, then poisoning.
pub fn scenario_plan(cfg: &AttacksConfig) -> Vec<(u64, AttackKind)> {
    let t = std::iter::repeat_n(AttackKind::WeightTamper, cfg.tamper_scenarios);
    let p = std::iter::repeat_n(AttackKind::InputPoison, cfg.poison_scenarios);
    t.chain(p).enumerate().map(|(i, k)| (i as u64, k)).collect()
}

/// Full protocol. Returns the report and the telemetry dataset it used.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<(ExperimentReport, Vec<DatasetSample>)> {
    cfg.validate()?;
    let hash = cfg.hash();
    let rcfg = cfg.resolved();
    let trained = train_baseline(&rcfg)?;
    let band = rcfg.calibration.accuracy;
    if rcfg.calibration.enforce_accuracy_band && !band.contains(trained.clean.percent) {
        return Err(Error::Calibration(format!(
            "clean accuracy {:.2}% is outside {} ± {}; run `calibrate` first",
            trained.clean.percent, band.target, band.tol
        )));
    }
    with_jobs(jobs, || {
        let rows = dataset_for(&rcfg, &trained)?;
        let (train_rows, test_rows) = split_by_scenario(&rows, rcfg.split, rcfg.dataset.seed);
        let normal_train: Vec<WindowMetrics> = train_rows.iter().filter(|r| !r.is_attack()).map(|r| r.metrics).collect();
        let det = &rcfg.detectors;
        let detectors = Detectors {
            anomaly: det
                .anomaly
                .then(|| AnomalyModel::fit(&normal_train, det.anomaly_target_fpr))
                .transpose()?,
            ids: det
                .ids
                .then(|| {
                    let k = det.ids_prestudy_windows.min(normal_train.len());
                    IdsRuleSet::from_prestudy(&normal_train[..k], det.ids_k_sigma, det.ids_features)
                })
                .transpose()?,
        };
        let scenarios: Vec<ScenarioResult> = scenario_plan(&rcfg.attacks)
            .into_par_iter()
            .map(|(id, kind)| run_scenario(&rcfg, &trained, &detectors, id, kind))
            .collect::<Result<_>>()?;
        let mut report = aggregate(&rcfg, hash, &trained, &rows, train_rows.len(), &test_rows, &detectors, scenarios)?;
        // Embed the config as given so that its hash can be checked.
        report.config = cfg.clone();
        Ok((report, rows))
    })?
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let m = telemetry::mean(xs);
    let sd = if xs.len() > 1 { telemetry::sample_var(xs).sqrt() } else { 0.0 };
    (m, sd)
}

fn pct(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[allow(clippy::too_many_arguments)]
fn aggregate(
    cfg: &ExperimentConfig,
    config_hash: String,
    t: &Trained,
    rows: &[DatasetSample],
    train_windows: usize,
    test_rows: &[DatasetSample],
    detectors: &Detectors,
    scenarios: Vec<ScenarioResult>,
) -> Result<ExperimentReport> {
    let mut attack_summaries = Vec::new();
    for kind in [AttackKind::WeightTamper, AttackKind::InputPoison] {
        let s: Vec<&ScenarioResult> = scenarios.iter().filter(|r| r.attack_type == kind).collect();
        if s.is_empty() {
            continue;
        }
        let (am, asd) = mean_sd(&s.iter().map(|r| r.attacked_accuracy_pct).collect::<Vec<_>>());
        let (lm, lsd) = mean_sd(&s.iter().map(|r| r.latency_attacked_ms).collect::<Vec<_>>());
        let successes = s.iter().filter(|r| r.success).count();
        attack_summaries.push(AttackSummary {
            attack_type: kind,
            scenarios: s.len(),
            successes,
            success_pct: pct(successes, s.len()),
            stealthy_pct: pct(s.iter().filter(|r| r.stealthy).count(), s.len()),
            accuracy_mean_pct: am,
            accuracy_sd_pct: asd,
            latency_mean_ms: lm,
            latency_sd_ms: lsd,
        });
    }

    let stats = telemetry::summarize(rows)?;
    let col = |attack: bool, f: fn(&WindowMetrics) -> f64| -> Vec<f64> {
        rows.iter().filter(|r| r.is_attack() == attack).map(|r| f(&r.metrics)).collect()
    };
    let metrics: [(&str, fn(&WindowMetrics) -> f64); 3] = [
        ("spike_frequency_hz", |m| m.spike_frequency_hz),
        ("weight_change_pct", |m| m.weight_change_pct),
        ("latency_ms", |m| m.latency_ms),
    ];
    let welch = metrics
        .iter()
        .map(|(name, f)| {
            let w = telemetry::welch_t_test(&col(false, *f), &col(true, *f)).ok();
            WelchRow {
                metric: (*name).to_string(),
                t: w.and_then(|w| finite(w.t)),
                df: w.and_then(|w| finite(w.df)),
                p: w.and_then(|w| finite(w.p)),
            }
        })
        .collect();

    let mut detector_summaries = Vec::new();
    let has_both = test_rows.iter().any(|r| r.is_attack()) && test_rows.iter().any(|r| !r.is_attack());
    let residual = |name: &str| {
        let hits = scenarios
            .iter()
            .filter(|r| r.success && !r.verdicts.iter().any(|v| v.detector == name && v.flagged))
            .count();
        pct(hits, scenarios.len())
    };
    if let Some(model) = &detectors.anomaly {
        if has_both {
            let e = defenses::evaluate_anomaly(model, test_rows)?;
            detector_summaries.push(DetectorSummary {
                name: ANOMALY.into(),
                detection_pct: e.detection_pct,
                false_positive_pct: e.false_positive_pct,
                per_attack_pct: e.per_attack_pct,
                residual_success_pct: residual(ANOMALY),
                auc: Some(defenses::roc_auc(&e.roc)),
                roc: e.roc,
            });
        }
    }
    if let Some(rules) = &detectors.ids {
        if has_both {
            let e = defenses::evaluate_detector(rules, test_rows)?;
            detector_summaries.push(DetectorSummary {
                name: IDS.into(),
                detection_pct: e.detection_pct,
                false_positive_pct: e.false_positive_pct,
                per_attack_pct: e.per_attack_pct,
                residual_success_pct: residual(IDS),
                auc: None,
                roc: Vec::new(),
            });
        }
    }

    let secure = cfg.detectors.secure.then(|| {
        let with: Vec<(&ScenarioResult, &SecureOutcome)> =
            scenarios.iter().filter_map(|r| r.secure.as_ref().map(|s| (r, s))).collect();
        let rate = |kind: AttackKind| {
            let v: Vec<_> = with.iter().filter(|(r, _)| r.attack_type == kind).collect();
            (!v.is_empty()).then(|| pct(v.iter().filter(|(_, s)| s.success).count(), v.len()))
        };
        let tamper: Vec<_> = with.iter().filter(|(r, _)| r.attack_type == AttackKind::WeightTamper).collect();
        SecureSummary {
            detection_pct: pct(with.iter().filter(|(_, s)| s.alarm).count(), with.len()),
            residual_tamper_pct: rate(AttackKind::WeightTamper),
            residual_poison_pct: rate(AttackKind::InputPoison),
            residual_pooled_pct: pct(with.iter().filter(|(_, s)| s.success).count(), with.len()),
            tamper_writes: tamper.iter().map(|(_, s)| s.accepted + s.rejected).sum(),
            tamper_writes_rejected: tamper.iter().map(|(_, s)| s.rejected).sum(),
            mean_latency_ms: mean_sd(&with.iter().map(|(_, s)| s.latency_ms).collect::<Vec<_>>()).0,
        }
    });

    let mut report = ExperimentReport {
        provenance: Provenance {
            config_hash,
            root_seed: cfg.root_seed,
            version: env!("CARGO_PKG_VERSION").into(),
        },
        config: cfg.clone(),
        clean: CleanSummary {
            accuracy_pct: t.clean.percent,
            mean_latency_ms: t.clean.mean_latency(),
            test_samples: t.clean.outcomes.len(),
        },
        attacks: attack_summaries,
        dataset: DatasetSummary {
            windows: rows.len(),
            train_windows,
            test_windows: test_rows.len(),
            stats,
            welch,
        },
        detectors: detector_summaries,
        secure,
        latency_impact: None,
        spike_histogram: spike_histogram(rows, 20),
        scenarios,
    };
    report.latency_impact = latency_impact(&report).ok();
    Ok(report)
}

/// Percent increase of attacked over clean mean latency per attack type,
/// and their average.
pub fn latency_impact(report: &ExperimentReport) -> Result<LatencyImpact> {
    let clean = report.clean.mean_latency_ms;
    if clean == 0.0 {
        return Err(Error::Undefined("clean mean latency is zero".into()));
    }
    let rise = |kind: AttackKind| {
        report
            .attack(kind)
            .map(|a| 100.0 * (a.latency_mean_ms - clean) / clean)
            .ok_or_else(|| Error::Usage(format!("no {} scenarios", kind.as_str())))
    };
    let tamper_pct = rise(AttackKind::WeightTamper)?;
    let poison_pct = rise(AttackKind::InputPoison)?;
    Ok(LatencyImpact {
        tamper_pct,
        poison_pct,
        pooled_pct: (tamper_pct + poison_pct) / 2.0,
    })
}

/// Equal-width spike-frequency histogram over all rows.
pub fn spike_histogram(rows: &[DatasetSample], bins: usize) -> Vec<HistBin> {
    let xs: Vec<f64> = rows.iter().map(|r| r.metrics.spike_frequency_hz).collect();
    if xs.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (bins, width) = if hi > lo { (bins, (hi - lo) / bins as f64) } else { (1, 1.0) };
    let mut out: Vec<HistBin> = (0..bins)
        .map(|b| HistBin {
            lo: lo + b as f64 * width,
            hi: if b + 1 == bins && hi > lo { hi } else { lo + (b + 1) as f64 * width },
            normal: 0,
            attack: 0,
        })
        .collect();
    for r in rows {
        let b = (((r.metrics.spike_frequency_hz - lo) / width) as usize).min(bins - 1);
        if r.is_attack() {
            out[b].attack += 1;
        } else {
            out[b].normal += 1;
        }
    }
    out
}

/// Clean-network measurements targeted by calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleanMetrics {
    pub accuracy_pct: f64,
    pub latency_ms: f64,
    pub spike_frequency_hz: f64,
    pub weight_change_pct: f64,
}

pub fn measure_clean(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<CleanMetrics> {
    let rcfg = cfg.resolved();
    let t = train_baseline(&rcfg)?;
    let root = derive_seed(cfg.root_seed, Stream::Calibration, 0);
    let n = rcfg.sim.n_neurons;
    let rows: Vec<DatasetSample> = with_jobs(jobs, || {
        (0..rcfg.calibration.windows as u64)
            .into_par_iter()
            .map(|w| {
                let (sample, seed) = telemetry::window_input(&t.bench, root, w)?;
                let (out, d, diff) = telemetry::run_dataset_window(&t.baseline(), &t.network, &sample, seed)?;
                telemetry::collect_window(0, w, AttackType::None, seed, &out.record, n, diff, (rcfg.sim.w_min, rcfg.sim.w_max), Some(&d))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let avg = |f: fn(&WindowMetrics) -> f64| {
        let xs: Vec<f64> = rows.iter().map(|r| f(&r.metrics)).collect();
        if xs.is_empty() {
            f64::NAN
        } else {
            telemetry::mean(&xs)
        }
    };
    Ok(CleanMetrics {
        accuracy_pct: t.clean.percent,
        latency_ms: t.clean.mean_latency(),
        spike_frequency_hz: avg(|m| m.spike_frequency_hz),
        weight_change_pct: avg(|m| m.weight_change_pct),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandCheck {
    pub metric: String,
    pub achieved: f64,
    pub target: f64,
    pub tol: f64,
    pub met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub evaluation: usize,
    pub knob: String,
    pub value: f64,
    /// `None` when training failed at this point.
    pub loss: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Search moves tried after the initial evaluation.
    pub iterations: usize,
    pub met: bool,
    pub checks: Vec<BandCheck>,
    pub trace: Vec<CalibrationStep>,
}

impl CalibrationReport {
    pub fn table(&self) -> Table {
        Table {
            name: "calibration".into(),
            header: ["metric", "achieved", "target", "tol", "met"].map(String::from).to_vec(),
            rows: self
                .checks
                .iter()
                .map(|c| vec![c.metric.clone(), num(c.achieved), num(c.target), num(c.tol), c.met.to_string()])
                .collect(),
        }
    }
}

fn band_checks(c: &CalibrationConfig, m: &CleanMetrics) -> Vec<BandCheck> {
    [
        ("accuracy_pct", c.accuracy, m.accuracy_pct),
        ("latency_ms", c.latency_ms, m.latency_ms),
        ("spike_frequency_hz", c.spike_frequency_hz, m.spike_frequency_hz),
        ("weight_change_pct", c.weight_change_pct, m.weight_change_pct),
    ]
    .into_iter()
    .map(|(name, b, x)| BandCheck {
        metric: name.into(),
        achieved: x,
        target: b.target,
        tol: b.tol,
        met: b.contains(x),
    })
    .collect()
}

fn loss(c: &CalibrationConfig, m: &CleanMetrics) -> f64 {
    c.accuracy.loss(m.accuracy_pct)
        + c.latency_ms.loss(m.latency_ms)
        + c.spike_frequency_hz.loss(m.spike_frequency_hz)
        + c.weight_change_pct.loss(m.weight_change_pct)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Knob {
    PeakRate,
    Threshold,
    StdpRate,
    Margin,
}

impl Knob {
    fn name(self) -> &'static str {
        match self {
            Knob::PeakRate => "task.peak_rate_hz",
            Knob::Threshold => "sim.v_thresh",
            Knob::StdpRate => "sim.stdp.a_plus",
            Knob::Margin => "readout.decision_margin",
        }
    }

    /// Moves the knob by `dir` steps of size `step`; `None` if out of range.
    fn apply(self, cfg: &ExperimentConfig, dir: f64, step: f64) -> Option<(ExperimentConfig, f64)> {
        let mut c = cfg.clone();
        let v = match self {
            Knob::PeakRate => {
                c.task.peak_rate_hz += dir * step;
                c.task.peak_rate_hz
            }
            Knob::Threshold => {
                c.sim.v_thresh += dir * step;
                c.sim.v_thresh
            }
            Knob::StdpRate => {
                let f = (1.0 + step).powf(dir);
                c.sim.stdp.a_plus *= f;
                c.sim.stdp.a_minus *= f;
                c.sim.stdp.a_plus
            }
            Knob::Margin => {
                let m = f64::from(c.readout.decision_margin) + dir * step.max(1.0).round();
                if m < 1.0 {
                    return None;
                }
                c.readout.decision_margin = m as u32;
                m
            }
        };
        c.validate().ok().map(|_| (c, v))
    }
}

/// Seeded coordinate search over input rate, threshold, STDP rate and
/// decision margin until the clean metrics land in their bands or the
/// evaluation budget runs out.
pub fn calibrate(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<(ExperimentConfig, CalibrationReport)> {
    cfg.validate()?;
    let bands = cfg.calibration.clone();
    let eval = |c: &ExperimentConfig| -> Result<Option<CleanMetrics>> {
        match measure_clean(c, jobs) {
            Ok(m) => Ok(Some(m)),
            Err(Error::Training(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let score = |m: &Option<CleanMetrics>| m.as_ref().map_or(f64::INFINITY, |m| loss(&bands, m));
    let mut best = cfg.clone();
    let mut best_m = eval(&best)?;
    let mut best_loss = score(&best_m);
    let mut evaluations = 1;
    let mut trace = Vec::new();
    let met = |m: &Option<CleanMetrics>| m.as_ref().is_some_and(|m| band_checks(&bands, m).iter().all(|c| c.met));
    let mut steps = [(Knob::PeakRate, 10.0), (Knob::Threshold, 0.05), (Knob::StdpRate, 0.2), (Knob::Margin, 1.0)];
    let mut sweep = 0u64;
    while !met(&best_m) && evaluations < bands.budget {
        let mut order: Vec<usize> = (0..steps.len()).collect();
        order.shuffle(&mut rng_for(cfg.root_seed, Stream::Calibration, sweep + 1));
        sweep += 1;
        let mut improved = false;
        'knobs: for &k in &order {
            let (knob, step) = steps[k];
            for dir in [1.0, -1.0] {
                if evaluations >= bands.budget || met(&best_m) {
                    break 'knobs;
                }
                let Some((cand, value)) = knob.apply(&best, dir, step) else {
                    continue;
                };
                let m = eval(&cand)?;
                evaluations += 1;
                let l = score(&m);
                let accepted = l < best_loss;
                trace.push(CalibrationStep {
                    evaluation: evaluations,
                    knob: knob.name().into(),
                    value,
                    loss: l.is_finite().then_some(l),
                    accepted,
                });
                if accepted {
                    best = cand;
                    best_m = m;
                    best_loss = l;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in &mut steps {
                if s.0 != Knob::Margin {
                    s.1 /= 2.0;
                }
            }
        }
    }
    let checks = match &best_m {
        Some(m) => band_checks(&bands, m),
        None => band_checks(
            &bands,
            &CleanMetrics {
                accuracy_pct: f64::NAN,
                latency_ms: f64::NAN,
                spike_frequency_hz: f64::NAN,
                weight_change_pct: f64::NAN,
            },
        ),
    };
    let report = CalibrationReport {
        iterations: evaluations - 1,
        met: checks.iter().all(|c| c.met),
        checks,
        trace,
    };
    Ok((best, report))
}

/// A rectangular table with text cells. Numbers are written in their
/// shortest round-trip form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn pm(m: f64, sd: f64) -> String {
    format!("{m:.2} ± {sd:.2}")
}

impl Table {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(String::from).collect()).map_err(csv_err))
            .collect::<Result<_>>()?;
        Ok(Table {
            name: name.into(),
            header,
            rows,
        })
    }

    /// Pipe table with padded columns.
    pub fn to_markdown(&self) -> String {
        let cols = self.header.len();
        let width = |c: usize| {
            std::iter::once(&self.header)
                .chain(&self.rows)
                .map(|r| r.get(c).map_or(0, |s| s.chars().count()))
                .max()
                .unwrap_or(0)
                .max(3)
        };
        let widths: Vec<usize> = (0..cols).map(width).collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = (0..cols)
                .map(|c| {
                    let s = cells.get(c).map_or("", String::as_str);
                    format!("{s}{}", " ".repeat(widths[c] - s.chars().count()))
                })
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = line(&self.header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn stats_row(c: &telemetry::ConditionStats) -> Vec<String> {
    vec![
        c.condition.clone(),
        num(c.spike_frequency_hz.mean),
        num(c.spike_frequency_hz.sd),
        num(c.weight_change_pct.mean),
        num(c.weight_change_pct.sd),
        num(c.latency_ms.mean),
        num(c.latency_ms.sd),
    ]
}

/// Dataset metrics: normal versus pooled attack windows, plus Welch p-values.
pub fn table1(r: &ExperimentReport) -> Table {
    let mut rows = Vec::new();
    for name in ["normal", "attack"] {
        if let Some(c) = r.dataset.stats.get(name) {
            rows.push(stats_row(c));
        }
    }
    let p = |m: &str| opt(r.dataset.welch.iter().find(|w| w.metric == m).and_then(|w| w.p));
    rows.push(vec![
        "welch_p".into(),
        p("spike_frequency_hz"),
        String::new(),
        p("weight_change_pct"),
        String::new(),
        p("latency_ms"),
        String::new(),
    ]);
    Table {
        name: "table1".into(),
        header: [
            "condition",
            "spike_frequency_hz_mean",
            "spike_frequency_hz_sd",
            "weight_change_pct_mean",
            "weight_change_pct_sd",
            "latency_ms_mean",
            "latency_ms_sd",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    }
}

fn table1_md(r: &ExperimentReport) -> String {
    let mut t = Table {
        name: "table1".into(),
        header: ["Condition", "Spike Frequency (Hz)", "Weight Change (%)", "Latency (ms)"]
            .map(String::from)
            .to_vec(),
        rows: Vec::new(),
    };
    for (name, label) in [("normal", "Normal"), ("attack", "Attack")] {
        if let Some(c) = r.dataset.stats.get(name) {
            t.rows.push(vec![
                label.into(),
                pm(c.spike_frequency_hz.mean, c.spike_frequency_hz.sd),
                pm(c.weight_change_pct.mean, c.weight_change_pct.sd),
                pm(c.latency_ms.mean, c.latency_ms.sd),
            ]);
        }
    }
    let p = |m: &str| {
        r.dataset
            .welch
            .iter()
            .find(|w| w.metric == m)
            .and_then(|w| w.p)
            .map_or("n/a".into(), |p| format!("{p:.3e}"))
    };
    t.rows.push(vec![
        "Welch p".into(),
        p("spike_frequency_hz"),
        p("weight_change_pct"),
        p("latency_ms"),
    ]);
    t.to_markdown()
}

struct Table2Row {
    label: &'static str,
    condition: &'static str,
    accuracy: (f64, f64),
    latency: (f64, f64),
}

fn table2_rows(r: &ExperimentReport) -> Vec<Table2Row> {
    let mut rows = vec![Table2Row {
        label: "Normal",
        condition: "normal",
        accuracy: (r.clean.accuracy_pct, 0.0),
        latency: (r.clean.mean_latency_ms, 0.0),
    }];
    for (kind, label) in [(AttackKind::WeightTamper, "Weight Tampering"), (AttackKind::InputPoison, "Input Poisoning")] {
        if let Some(a) = r.attack(kind) {
            rows.push(Table2Row {
                label,
                condition: kind.as_str(),
                accuracy: (a.accuracy_mean_pct, a.accuracy_sd_pct),
                latency: (a.latency_mean_ms, a.latency_sd_ms),
            });
        }
    }
    rows
}

/// Model performance per condition.
pub fn table2(r: &ExperimentReport) -> Table {
    let rows = table2_rows(r)
        .into_iter()
        .map(|x| {
            let s = r.dataset.stats.get(x.condition);
            vec![
                x.condition.into(),
                num(x.accuracy.0),
                num(x.accuracy.1),
                num(x.latency.0),
                num(x.latency.1),
                opt(s.map(|s| s.weight_change_pct.mean)),
                opt(s.map(|s| s.weight_change_pct.sd)),
                opt(s.map(|s| s.spike_variance_hz2)),
            ]
        })
        .collect();
    Table {
        name: "table2".into(),
        header: [
            "condition",
            "accuracy_pct_mean",
            "accuracy_pct_sd",
            "latency_ms_mean",
            "latency_ms_sd",
            "weight_change_pct_mean",
            "weight_change_pct_sd",
            "spike_variance_hz2",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    }
}

fn table2_md(r: &ExperimentReport) -> String {
    let rows = table2_rows(r)
        .into_iter()
        .map(|x| {
            let s = r.dataset.stats.get(x.condition);
            vec![
                x.label.into(),
                pm(x.accuracy.0, x.accuracy.1),
                pm(x.latency.0, x.latency.1),
                s.map_or("n/a".into(), |s| pm(s.weight_change_pct.mean, s.weight_change_pct.sd)),
                s.map_or("n/a".into(), |s| format!("{:.2}", s.spike_variance_hz2)),
            ]
        })
        .collect();
    Table {
        name: "table2".into(),
        header: ["Condition", "Accuracy (%)", "Latency (ms)", "Weight Change (%)", "Spike Variance (Hz²)"]
            .map(String::from)
            .to_vec(),
        rows,
    }
    .to_markdown()
}

struct Table3Row {
    label: &'static str,
    key: &'static str,
    detection: f64,
    fpr: Option<f64>,
    residual: f64,
    residual_tamper: Option<f64>,
    residual_poison: Option<f64>,
    latency: f64,
}

fn table3_rows(r: &ExperimentReport) -> Vec<Table3Row> {
    let attacked_latency = {
        let xs: Vec<f64> = r.scenarios.iter().map(|s| s.latency_attacked_ms).collect();
        mean_sd(&xs).0
    };
    let per_kind = |name: &str, kind: AttackKind| {
        let s: Vec<&ScenarioResult> = r.scenarios.iter().filter(|s| s.attack_type == kind).collect();
        (!s.is_empty()).then(|| {
            let hits = s
                .iter()
                .filter(|x| x.success && !x.verdicts.iter().any(|v| v.detector == name && v.flagged))
                .count();
            pct(hits, s.len())
        })
    };
    let mut rows = Vec::new();
    let det_row = |d: &DetectorSummary, label, key| Table3Row {
        label,
        key,
        detection: d.detection_pct,
        fpr: Some(d.false_positive_pct),
        residual: d.residual_success_pct,
        residual_tamper: per_kind(&d.name, AttackKind::WeightTamper),
        residual_poison: per_kind(&d.name, AttackKind::InputPoison),
        latency: attacked_latency,
    };
    if let Some(d) = r.detector(ANOMALY) {
        rows.push(det_row(d, "Anomaly Detection", "anomaly_detection"));
    }
    if let Some(s) = &r.secure {
        rows.push(Table3Row {
            label: "Secure Protocols",
            key: "secure_protocols",
            detection: s.detection_pct,
            fpr: None,
            residual: s.residual_pooled_pct,
            residual_tamper: s.residual_tamper_pct,
            residual_poison: s.residual_poison_pct,
            latency: s.mean_latency_ms,
        });
    }
    if let Some(d) = r.detector(IDS) {
        rows.push(det_row(d, "Traditional IDS", "traditional_ids"));
    }
    rows
}

/// Countermeasure performance; `None` when every countermeasure is disabled.
pub fn table3(r: &ExperimentReport) -> Option<Table> {
    let rows = table3_rows(r);
    (!rows.is_empty()).then(|| Table {
        name: "table3".into(),
        header: [
            "countermeasure",
            "detection_pct",
            "false_positive_pct",
            "residual_success_pct",
            "residual_tamper_pct",
            "residual_poison_pct",
            "latency_ms",
        ]
        .map(String::from)
        .to_vec(),
        rows: rows
            .into_iter()
            .map(|x| {
                vec![
                    x.key.into(),
                    num(x.detection),
                    opt(x.fpr),
                    num(x.residual),
                    opt(x.residual_tamper),
                    opt(x.residual_poison),
                    num(x.latency),
                ]
            })
            .collect(),
    })
}

fn table3_md(r: &ExperimentReport) -> Option<String> {
    let rows = table3_rows(r);
    let f = |x: Option<f64>| x.map_or("n/a".into(), |x| format!("{x:.1}"));
    (!rows.is_empty()).then(|| {
        Table {
            name: "table3".into(),
            header: [
                "Countermeasure",
                "Detection Rate (%)",
                "False Positive Rate (%)",
                "Attack Success Rate (%)",
                "Latency Impact (ms)",
            ]
            .map(String::from)
            .to_vec(),
            rows: rows
                .into_iter()
                .map(|x| {
                    vec![
                        x.label.into(),
                        format!("{:.1}", x.detection),
                        f(x.fpr),
                        format!("{:.1}", x.residual),
                        format!("{:.2}", x.latency),
                    ]
                })
                .collect(),
        }
        .to_markdown()
    })
}

pub fn fig1_table(r: &ExperimentReport) -> Table {
    Table {
        name: "fig1_spike_hist".into(),
        header: ["bin_lo", "bin_hi", "count_normal", "count_attack"].map(String::from).to_vec(),
        rows: r
            .spike_histogram
            .iter()
            .map(|b| vec![num(b.lo), num(b.hi), b.normal.to_string(), b.attack.to_string()])
            .collect(),
    }
}

pub fn fig3_table(r: &ExperimentReport) -> Table {
    let residual = |k: AttackKind| {
        r.secure.as_ref().and_then(|s| match k {
            AttackKind::WeightTamper => s.residual_tamper_pct,
            AttackKind::InputPoison => s.residual_poison_pct,
        })
    };
    Table {
        name: "fig3_success".into(),
        header: ["attack_type", "scenarios", "success_pct", "secure_residual_pct"].map(String::from).to_vec(),
        rows: r
            .attacks
            .iter()
            .map(|a| {
                vec![
                    a.attack_type.as_str().into(),
                    a.scenarios.to_string(),
                    num(a.success_pct),
                    opt(residual(a.attack_type)),
                ]
            })
            .collect(),
    }
}

pub fn fig4_table(r: &ExperimentReport) -> Table {
    let clean = r.clean.mean_latency_ms;
    let mut rows = vec![vec!["normal".into(), num(clean), num(0.0)]];
    for a in &r.attacks {
        let inc = if clean == 0.0 { String::new() } else { num(100.0 * (a.latency_mean_ms - clean) / clean) };
        rows.push(vec![a.attack_type.as_str().into(), num(a.latency_mean_ms), inc]);
    }
    Table {
        name: "fig4_latency".into(),
        header: ["condition", "mean_latency_ms", "increase_pct"].map(String::from).to_vec(),
        rows,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Markdown,
    Json,
    Plotdata,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            "plotdata" => Ok(Format::Plotdata),
            _ => Err(Error::Usage(format!("unknown format `{s}`"))),
        }
    }
}

pub const ALL_FORMATS: [Format; 4] = [Format::Csv, Format::Markdown, Format::Json, Format::Plotdata];

fn write_file(dir: &Path, name: &str, body: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(name.to_string())
}

/// Writes the requested report artifacts into `dir`; returns the file names.
pub fn emit_report(r: &ExperimentReport, dir: &Path, formats: &[Format]) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let formats: BTreeSet<Format> = formats.iter().copied().collect();
    let mut written = Vec::new();
    let t3 = table3(r);
    if formats.contains(&Format::Json) {
        written.push(write_file(dir, "report.json", &r.to_json()?)?);
    }
    if formats.contains(&Format::Csv) {
        written.push(write_file(dir, "table1.csv", &table1(r).to_csv()?)?);
        written.push(write_file(dir, "table2.csv", &table2(r).to_csv()?)?);
        if let Some(t) = &t3 {
            written.push(write_file(dir, "table3.csv", &t.to_csv()?)?);
        }
    }
    if formats.contains(&Format::Markdown) {
        written.push(write_file(dir, "table1.md", &table1_md(r))?);
        written.push(write_file(dir, "table2.md", &table2_md(r))?);
        if let Some(md) = table3_md(r) {
            written.push(write_file(dir, "table3.md", &md)?);
        }
    }
    if formats.contains(&Format::Plotdata) {
        written.push(write_file(dir, "fig1_spike_hist.csv", &fig1_table(r).to_csv()?)?);
        written.push(write_file(dir, "fig3_success.csv", &fig3_table(r).to_csv()?)?);
        written.push(write_file(dir, "fig4_latency.csv", &fig4_table(r).to_csv()?)?);
        if let Some(d) = r.detector(ANOMALY) {
            let roc = Table {
                name: "roc_anomaly".into(),
                header: ["threshold", "fpr", "tpr"].map(String::from).to_vec(),
                rows: d.roc.iter().map(|p| vec![opt(p.threshold), num(p.fpr), num(p.tpr)]).collect(),
            };
            written.push(write_file(dir, "roc_anomaly.csv", &roc.to_csv()?)?);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_contains_edges() {
        let b = Band::new(10.0, 2.0);
        assert!(b.contains(8.0) && b.contains(12.0) && !b.contains(12.01));
        assert_eq!(Band::new(0.0, 0.0).loss(0.0), 0.0);
        assert!(Band::new(0.0, 0.0).loss(1.0) > 1e5);
    }

    #[test]
    fn profiles_validate() {
        ExperimentConfig::profile(Profile::Full).validate().unwrap();
        ExperimentConfig::profile(Profile::Desk).validate().unwrap();
    }

    #[test]
    fn toml_layers_over_profile() {
        let cfg = ExperimentConfig::from_toml("schema_version = 1\nroot_seed = 99\n[sim]\ntau_m = 15.0\n", Profile::Desk).unwrap();
        assert_eq!(cfg.root_seed, 99);
        assert_eq!(cfg.sim.tau_m, 15.0);
        assert_eq!(cfg.sim.n_neurons, ExperimentConfig::profile(Profile::Desk).sim.n_neurons);
    }

    #[test]
    fn toml_rejects_typos_and_missing_version() {
        assert!(ExperimentConfig::from_toml("schema_version = 1\n[sim]\ntau = 3.0\n", Profile::Desk).is_err());
        assert!(ExperimentConfig::from_toml("schema_version = 1\nroot_sed = 3\n", Profile::Desk).is_err());
        assert!(ExperimentConfig::from_toml("root_seed = 3\n", Profile::Desk).is_err());
        assert!(ExperimentConfig::from_toml("schema_version = 2\n", Profile::Desk).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::profile(Profile::Full);
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap(), Profile::Desk).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn invalid_split() {
        let mut cfg = ExperimentConfig::profile(Profile::Desk);
        cfg.split = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn scenario_plan_counts() {
        let cfg = AttacksConfig::default();
        let plan = scenario_plan(&cfg);
        assert_eq!(plan.len(), 1000);
        assert_eq!(plan.iter().filter(|p| p.1 == AttackKind::WeightTamper).count(), 500);
        assert!(plan.iter().enumerate().all(|(i, p)| p.0 == i as u64));
    }

    fn row(sid: u64, kind: AttackType, f: f64) -> DatasetSample {
        DatasetSample {
            scenario_id: sid,
            window_id: sid,
            attack_type: kind,
            metrics: WindowMetrics {
                spike_frequency_hz: f,
                weight_change_pct: 0.5,
                latency_ms: 10.0,
            },
            seed: 0,
        }
    }

    #[test]
    fn split_keeps_scenarios_whole() {
        let rows: Vec<_> = (0..100).map(|i| row(i / 10, AttackType::None, i as f64)).collect();
        let (a, b) = split_by_scenario(&rows, 0.7, 3);
        assert_eq!((a.len(), b.len()), (70, 30));
        let sa: BTreeSet<u64> = a.iter().map(|r| r.scenario_id).collect();
        assert!(b.iter().all(|r| !sa.contains(&r.scenario_id)));
    }

    #[test]
    fn histogram_counts_everything() {
        let mut rows: Vec<_> = (0..50).map(|i| row(0, AttackType::None, 40.0 + i as f64 * 0.2)).collect();
        rows.extend((0..30).map(|i| row(1, AttackType::InputPoison, 45.0 + i as f64 * 0.3)));
        let h = spike_histogram(&rows, 20);
        assert_eq!(h.len(), 20);
        assert_eq!(h.iter().map(|b| b.normal).sum::<usize>(), 50);
        assert_eq!(h.iter().map(|b| b.attack).sum::<usize>(), 30);
        assert!(h.windows(2).all(|w| w[0].hi == w[1].lo));
        let flat = spike_histogram(&[row(0, AttackType::None, 5.0), row(0, AttackType::None, 5.0)], 20);
        assert_eq!(flat.len(), 1);
    }

    #[test]
    fn table_csv_round_trip_and_markdown() {
        let t = Table {
            name: "t".into(),
            header: vec!["a".into(), "b".into()],
            rows: vec![vec!["x, y".into(), num(0.1 + 0.2)], vec!["z".into(), String::new()]],
        };
        let back = Table::from_csv("t", &t.to_csv().unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.rows[0][1].parse::<f64>().unwrap(), 0.1 + 0.2);
        let md = t.to_markdown();
        let widths: BTreeSet<usize> = md.lines().map(|l| l.chars().count()).collect();
        assert_eq!(widths.len(), 1, "{md}");
    }

    #[test]
    fn format_parsing() {
        assert_eq!("md".parse::<Format>().unwrap(), Format::Markdown);
        assert!("pdf".parse::<Format>().is_err());
        assert!("lab".parse::<Profile>().is_err());
    }
}
