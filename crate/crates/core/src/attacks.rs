//! Weight tampering and input poisoning, with audit logs and the stealth rule.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};
use crate::snn::NetworkState;
use crate::workload::{ReadoutMap, Sample, SampleOutcome, TaskSpec, Workbench};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    WeightTamper,
    InputPoison,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::WeightTamper => "weight_tamper",
            AttackKind::InputPoison => "input_poison",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    Random,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub fraction: f64,
    /// Weight units; ignored by poisoning.
    pub magnitude: f64,
    pub sign_mode: SignMode,
    pub stealth_budget_pp: f64,
    /// Minimum accuracy drop for an attack to count as effective.
    pub success_threshold_pp: f64,
    pub seed: u64,
}

impl AttackSpec {
    pub fn tamper(seed: u64) -> Self {
        AttackSpec {
            kind: AttackKind::WeightTamper,
            fraction: 0.10,
            magnitude: 0.1,
            sign_mode: SignMode::Adversarial,
            stealth_budget_pp: 5.0,
            success_threshold_pp: 1.0,
            seed,
        }
    }

    pub fn poison(seed: u64) -> Self {
        AttackSpec {
            kind: AttackKind::InputPoison,
            fraction: 0.05,
            ..AttackSpec::tamper(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::config("fraction", "must lie in (0, 1]"));
        }
        if !(self.magnitude > 0.0) {
            return Err(Error::config("magnitude", "must be > 0"));
        }
        if !(self.stealth_budget_pp > 0.0) {
            return Err(Error::config("stealth_budget_pp", "must be > 0"));
        }
        if !(self.success_threshold_pp >= 0.0) {
            return Err(Error::config("success_threshold_pp", "must be >= 0"));
        }
        Ok(())
    }
}

/// One tampered synapse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TamperEntry {
    pub pre: u32,
    pub post: u32,
    pub old: f64,
    pub new: f64,
    pub t_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TamperLog {
    pub entries: Vec<TamperEntry>,
}

impl TamperLog {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pre", "post", "old", "new", "t_ms"]).map_err(csv_err)?;
        for e in &self.entries {
            w.write_record([
                e.pre.to_string(),
                e.post.to_string(),
                e.old.to_string(),
                e.new.to_string(),
                e.t_ms.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// What an adversarial tamper needs to know about the readout: the class
/// that drives each sensory neuron and the class each output neuron reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutTarget {
    input_class: Vec<Option<usize>>,
    output_class: Vec<Option<usize>>,
}

impl ReadoutTarget {
    pub fn new(bench: &Workbench, readout: &ReadoutMap) -> Self {
        let n = bench.layout.n_neurons;
        let mut input_class = vec![None; n];
        let mut output_class = vec![None; n];
        for j in 0..n {
            if let Some(ch) = bench.layout.channel_of(j) {
                input_class[j] = bench.task.channel_class(ch);
            } else if let Some(g) = bench.layout.group_of(j) {
                output_class[j] = readout.assignment.get(g).copied();
            }
        }
        ReadoutTarget {
            input_class,
            output_class,
        }
    }

    /// Sign that hurts the readout for synapse `i -> j`, or `None` when the
    /// synapse does not connect a class block to a readout group.
    fn hostile_sign(&self, i: usize, j: usize) -> Option<f64> {
        let src = self.input_class.get(i).copied().flatten()?;
        let dst = self.output_class.get(j).copied().flatten()?;
        Some(if src == dst { -1.0 } else { 1.0 })
    }
}

/// Perturbs `⌊fraction · n(n-1)⌋` distinct off-diagonal synapses by
/// `±magnitude`, clamped to the weight bounds.
///
/// Adversarial mode weakens block-to-own-group synapses and strengthens
/// block-to-rival-group ones; synapses outside that pathway get random signs.
pub fn tamper_weights(
    state: &mut NetworkState,
    spec: &AttackSpec,
    target: Option<&ReadoutTarget>,
    w_min: f64,
    w_max: f64,
) -> Result<TamperLog> {
    if spec.kind != AttackKind::WeightTamper {
        return Err(Error::Usage("tamper_weights needs a weight_tamper spec".into()));
    }
    spec.validate()?;
    if spec.sign_mode == SignMode::Adversarial && target.is_none() {
        return Err(Error::Usage("adversarial tampering needs a readout target".into()));
    }
    let n = state.n();
    let eligible = n * n.saturating_sub(1);
    let count = (spec.fraction * eligible as f64).floor() as usize;
    if count > eligible {
        return Err(Error::config("fraction", "selects more synapses than exist"));
    }
    let mut rng = rng_for(spec.seed, Stream::Attack, 0);
    let mut picks = index::sample(&mut rng, eligible, count).into_vec();
    picks.sort_unstable();
    let t = state.t_now();
    let mut entries = Vec::with_capacity(count);
    for k in picks {
        let i = k / (n - 1);
        let mut j = k % (n - 1);
        if j >= i {
            j += 1;
        }
        let coin = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let sign = match spec.sign_mode {
            SignMode::Random => coin,
            SignMode::Adversarial => target.and_then(|tg| tg.hostile_sign(i, j)).unwrap_or(coin),
        };
        let old = state.weight(i, j);
        let new = (old + sign * spec.magnitude).clamp(w_min, w_max);
        state.set_weight(i, j, new);
        entries.push(TamperEntry {
            pre: i as u32,
            post: j as u32,
            old,
            new,
            t_ms: t,
        });
    }
    Ok(TamperLog { entries })
}

/// One substituted channel rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoisonEntry {
    pub window_id: u64,
    pub channel: u32,
    pub original: f64,
    pub poisoned: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoisonLog {
    pub entries: Vec<PoisonEntry>,
}

impl PoisonLog {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["window_id", "channel", "original", "poisoned"]).map_err(csv_err)?;
        for e in &self.entries {
            w.write_record([
                e.window_id.to_string(),
                e.channel.to_string(),
                e.original.to_string(),
                e.poisoned.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Mimicry poisoning of one window: picks a rival class, then overwrites
/// `⌊fraction · n_channels⌋` channels of the rival's block (or of the whole
/// channel range when the block is too small) with the rival prototype plus
/// jitter, kept inside `[base, peak + 4σ]`.
pub fn poison_sample(
    sample: &Sample,
    window_id: u64,
    spec: &AttackSpec,
    task: &TaskSpec,
) -> Result<(Sample, Vec<PoisonEntry>)> {
    if spec.kind != AttackKind::InputPoison {
        return Err(Error::Usage("poison_inputs needs an input_poison spec".into()));
    }
    spec.validate()?;
    if task.n_classes < 2 {
        return Err(Error::config("n_classes", "poisoning needs a rival class"));
    }
    let k = (spec.fraction * task.n_channels as f64).floor() as usize;
    if k == 0 {
        return Ok((sample.clone(), Vec::new()));
    }
    let mut rng = rng_for(spec.seed, Stream::Attack, window_id);
    let mut rival = rng.random_range(0..task.n_classes - 1);
    if rival >= sample.label {
        rival += 1;
    }
    let block = task.block_size();
    let pool: Vec<usize> = if block >= k {
        (rival * block..(rival + 1) * block).collect()
    } else {
        (0..task.n_channels).collect()
    };
    let mut chosen: Vec<usize> = index::sample(&mut rng, pool.len(), k).into_iter().map(|x| pool[x]).collect();
    chosen.sort_unstable();
    let proto = task.prototype(rival);
    let hi = task.peak_rate_hz + 4.0 * task.noise_sigma;
    let normal = (task.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, task.noise_sigma))
        .transpose()
        .map_err(|e| Error::config("noise_sigma", e.to_string()))?;
    let mut out = sample.clone();
    let mut entries = Vec::with_capacity(k);
    for ch in chosen {
        let noise = normal.as_ref().map_or(0.0, |d| d.sample(&mut rng));
        let poisoned = (proto[ch] + noise).clamp(task.base_rate_hz, hi);
        entries.push(PoisonEntry {
            window_id,
            channel: ch as u32,
            original: out.rates[ch],
            poisoned,
        });
        out.rates[ch] = poisoned;
    }
    Ok((out, entries))
}

/// Poisons a stream of windows; `window_ids[k]` seeds window `k`.
pub fn poison_inputs(
    samples: &[Sample],
    window_ids: &[u64],
    spec: &AttackSpec,
    task: &TaskSpec,
) -> Result<(Vec<Sample>, PoisonLog)> {
    if samples.len() != window_ids.len() {
        return Err(Error::Usage("one window id per sample required".into()));
    }
    let mut out = Vec::with_capacity(samples.len());
    let mut log = PoisonLog::default();
    for (s, id) in samples.iter().zip(window_ids) {
        let (p, e) = poison_sample(s, *id, spec, task)?;
        out.push(p);
        log.entries.extend(e);
    }
    Ok((out, log))
}

pub fn check_stealth(accuracy_clean: f64, accuracy_attacked: f64, spec: &AttackSpec) -> bool {
    accuracy_clean - accuracy_attacked < spec.stealth_budget_pp
}

/// Accuracy drop in percentage points between paired evaluations.
pub fn accuracy_drop(clean: &[SampleOutcome], attacked: &[SampleOutcome]) -> Result<f64> {
    if clean.is_empty() || clean.len() != attacked.len() {
        return Err(Error::Usage("clean and attacked test sets differ in size".into()));
    }
    if clean.iter().zip(attacked).any(|(a, b)| a.label != b.label) {
        return Err(Error::Usage("clean and attacked test sets differ in labels".into()));
    }
    let acc = |xs: &[SampleOutcome]| 100.0 * xs.iter().filter(|o| o.label == o.prediction).count() as f64 / xs.len() as f64;
    Ok(acc(clean) - acc(attacked))
}

/// Effective and covert: drop at least the success threshold and below the
/// stealth budget.
pub fn attack_success(clean: &[SampleOutcome], attacked: &[SampleOutcome], spec: &AttackSpec) -> Result<bool> {
    let drop = accuracy_drop(clean, attacked)?;
    Ok(drop >= spec.success_threshold_pp && drop < spec.stealth_budget_pp)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
