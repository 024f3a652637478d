//! Window metrics, the labelled telemetry dataset, summaries and Welch's test.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::attacks::{self, AttackKind, AttackSpec, ReadoutTarget};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for, Stream};
use crate::snn::{self, NetworkState, SpikeRecord};
use crate::workload::{self, ReadoutMap, Sample, Workbench};

pub const DATASET_HEADER: [&str; 8] = [
    "scenario_id",
    "window_id",
    "label",
    "attack_type",
    "spike_frequency_hz",
    "weight_change_pct",
    "latency_ms",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub spike_frequency_hz: f64,
    pub weight_change_pct: f64,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackType {
    None,
    WeightTamper,
    InputPoison,
}

impl AttackType {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackType::None => "none",
            AttackType::WeightTamper => "weight_tamper",
            AttackType::InputPoison => "input_poison",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AttackType::None),
            "weight_tamper" => Ok(AttackType::WeightTamper),
            "input_poison" => Ok(AttackType::InputPoison),
            other => Err(Error::Parse(format!("unknown attack_type {other:?}"))),
        }
    }

    pub fn is_attack(self) -> bool {
        self != AttackType::None
    }
}

impl From<AttackKind> for AttackType {
    fn from(k: AttackKind) -> Self {
        match k {
            AttackKind::WeightTamper => AttackType::WeightTamper,
            AttackKind::InputPoison => AttackType::InputPoison,
        }
    }
}

/// One labelled row of the dataset. The label column is derived from
/// `attack_type`, so the two cannot disagree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub scenario_id: u64,
    pub window_id: u64,
    pub attack_type: AttackType,
    pub metrics: WindowMetrics,
    pub seed: u64,
}

impl DatasetSample {
    pub fn label(&self) -> &'static str {
        if self.attack_type.is_attack() {
            "attack"
        } else {
            "normal"
        }
    }

    pub fn is_attack(&self) -> bool {
        self.attack_type.is_attack()
    }
}

pub fn spike_frequency(record: &SpikeRecord, n_neurons: usize, duration_ms: f64) -> f64 {
    if n_neurons == 0 || duration_ms <= 0.0 {
        return 0.0;
    }
    1000.0 * record.events.len() as f64 / (n_neurons as f64 * duration_ms)
}

pub fn weight_change_pct(sum_abs_dw: f64, n_synapses: usize, w_min: f64, w_max: f64) -> f64 {
    if n_synapses == 0 {
        return 0.0;
    }
    100.0 * (sum_abs_dw / n_synapses as f64) / (w_max - w_min)
}

/// Rounds to `digits` significant digits through the decimal text form, so
/// that the value survives a CSV round trip bit for bit.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    fmt_sig(x, digits).parse().unwrap_or(x)
}

/// Decimal text with `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let e = format!("{:.*e}", digits.saturating_sub(1), x);
    let v: f64 = e.parse().unwrap_or(x);
    let mag = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Assembles a row from one learning window and its classification.
pub fn collect_window(
    scenario_id: u64,
    window_id: u64,
    attack_type: AttackType,
    seed: u64,
    record: &SpikeRecord,
    n_neurons: usize,
    sum_abs_dw: f64,
    w_range: (f64, f64),
    decision: Option<&workload::Decision>,
) -> Result<DatasetSample> {
    let d = decision.ok_or_else(|| Error::Usage("window has no classification".into()))?;
    let n_syn = n_neurons * n_neurons.saturating_sub(1);
    Ok(DatasetSample {
        scenario_id,
        window_id,
        attack_type,
        metrics: WindowMetrics {
            spike_frequency_hz: round_sig(spike_frequency(record, n_neurons, record.duration()), 6),
            weight_change_pct: round_sig(weight_change_pct(sum_abs_dw, n_syn, w_range.0, w_range.1), 6),
            latency_ms: round_sig(d.latency_ms, 6),
        },
        seed,
    })
}

/// Dataset composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetPlan {
    pub n_samples: usize,
    pub attack_ratio: f64,
    /// Share of attack windows that are weight tampering; the rest poison.
    pub tamper_share: f64,
    /// Consecutive windows that share one scenario (one tampered network or
    /// one poisoning key).
    pub windows_per_scenario: usize,
    pub seed: u64,
}

impl Default for DatasetPlan {
    fn default() -> Self {
        DatasetPlan {
            n_samples: 10_000,
            attack_ratio: 0.5,
            tamper_share: 0.5,
            windows_per_scenario: 10,
            seed: 11,
        }
    }
}

impl DatasetPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::config("n_samples", "must be >= 2"));
        }
        if !(0.0..=1.0).contains(&self.attack_ratio) {
            return Err(Error::config("attack_ratio", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.tamper_share) {
            return Err(Error::config("tamper_share", "must lie in [0, 1]"));
        }
        if self.windows_per_scenario == 0 {
            return Err(Error::config("windows_per_scenario", "must be >= 1"));
        }
        Ok(())
    }

    /// Window counts `(normal, tamper, poison)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        let attack = (self.attack_ratio * self.n_samples as f64).round() as usize;
        let tamper = (self.tamper_share * attack as f64).round() as usize;
        (self.n_samples - attack, tamper, attack - tamper)
    }

    /// Scenario list `(scenario_id, kind, first_window, n_windows)`.
    pub fn scenarios(&self) -> Vec<(u64, AttackType, u64, usize)> {
        let (n, t, p) = self.counts();
        let mut out = Vec::new();
        let mut window = 0u64;
        for (kind, count) in [(AttackType::None, n), (AttackType::WeightTamper, t), (AttackType::InputPoison, p)] {
            let mut left = count;
            while left > 0 {
                let k = left.min(self.windows_per_scenario);
                out.push((out.len() as u64, kind, window, k));
                window += k as u64;
                left -= k;
            }
        }
        out
    }
}

/// A trained network and its readout, shared read-only by dataset workers.
#[derive(Clone, Copy)]
pub struct Baseline<'a> {
    pub bench: &'a Workbench,
    pub network: &'a NetworkState,
    pub readout: &'a ReadoutMap,
}

/// Random sensory input for dataset window `window_id`: a uniformly drawn
/// class prototype with fresh jitter, plus the Poisson seed.
pub fn window_input(bench: &Workbench, root: u64, window_id: u64) -> Result<(Sample, u64)> {
    let task = &bench.task;
    let mut rng = rng_for(root, Stream::Dataset, window_id);
    let label = rng.random_range(0..task.n_classes);
    let rates = workload::jitter(&task.prototype(label), task.noise_sigma, &mut rng)?;
    let seed = derive_seed(root, Stream::Stimulus, window_id);
    Ok((Sample { rates, label }, seed))
}

/// Attack spec of a dataset scenario, reseeded from the plan.
pub fn scenario_attack(template: &AttackSpec, root: u64, scenario_id: u64) -> AttackSpec {
    AttackSpec {
        seed: derive_seed(root, Stream::Attack, scenario_id),
        ..template.clone()
    }
}

/// Runs one dataset window on `start` (already attacked if tampering) and
/// measures weight change against `reference`.
pub fn run_dataset_window(
    base: &Baseline,
    start: &NetworkState,
    sample: &Sample,
    stim_seed: u64,
) -> Result<(snn::WindowOutput, workload::Decision, f64)> {
    let bench = base.bench;
    let sched = bench.encode(sample, stim_seed)?;
    let mut net = start.clone();
    let decision = workload::classify(bench, &mut net, base.readout, &sched)?;
    let mut net = start.clone();
    bench.settle(&mut net);
    let out = snn::run_window(&mut net, &bench.stimulus(&sched, None), bench.readout_cfg.window_ms, &bench.sim, true)?;
    let diff = snn::total_abs_change(&base.network.weights, &net.weights);
    Ok((out, decision, diff))
}

/// Generates the labelled dataset, one scenario per parallel task.
pub fn generate_dataset(
    base: &Baseline,
    plan: &DatasetPlan,
    tamper: &AttackSpec,
    poison: &AttackSpec,
) -> Result<Vec<DatasetSample>> {
    plan.validate()?;
    let bench = base.bench;
    let target = ReadoutTarget::new(bench, base.readout);
    let n = bench.sim.n_neurons;
    let range = (bench.sim.w_min, bench.sim.w_max);
    let chunks: Vec<Result<Vec<DatasetSample>>> = plan
        .scenarios()
        .into_par_iter()
        .map(|(sid, kind, first, count)| {
            let mut start = base.network.clone();
            let spec = match kind {
                AttackType::None => None,
                AttackType::WeightTamper => Some(scenario_attack(tamper, plan.seed, sid)),
                AttackType::InputPoison => Some(scenario_attack(poison, plan.seed, sid)),
            };
            if let (AttackType::WeightTamper, Some(s)) = (kind, &spec) {
                attacks::tamper_weights(&mut start, s, Some(&target), range.0, range.1)?;
            }
            let mut rows = Vec::with_capacity(count);
            for w in first..first + count as u64 {
                let (mut sample, stim_seed) = window_input(bench, plan.seed, w)?;
                if let (AttackType::InputPoison, Some(s)) = (kind, &spec) {
                    sample = attacks::poison_sample(&sample, w, s, &bench.task)?.0;
                }
                let (out, decision, diff) = run_dataset_window(base, &start, &sample, stim_seed)?;
                rows.push(collect_window(sid, w, kind, stim_seed, &out.record, n, diff, range, Some(&decision))?);
            }
            Ok(rows)
        })
        .collect();
    let mut all = Vec::with_capacity(plan.n_samples);
    for c in chunks {
        all.extend(c?);
    }
    Ok(all)
}

pub fn write_dataset_csv<W: std::io::Write>(rows: &[DatasetSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.scenario_id.to_string(),
            r.window_id.to_string(),
            r.label().to_string(),
            r.attack_type.as_str().to_string(),
            fmt_sig(r.metrics.spike_frequency_hz, 6),
            fmt_sig(r.metrics.weight_change_pct, 6),
            fmt_sig(r.metrics.latency_ms, 6),
            r.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_dataset_csv<R: std::io::Read>(input: R) -> Result<Vec<DatasetSample>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(DATASET_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected dataset header {:?}", header)));
    }
    let num = |s: &str, what: &str| -> Result<f64> { s.parse().map_err(|_| Error::Parse(format!("bad {what}: {s:?}"))) };
    let int = |s: &str, what: &str| -> Result<u64> { s.parse().map_err(|_| Error::Parse(format!("bad {what}: {s:?}"))) };
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let attack_type = AttackType::parse(&rec[3])?;
        let label = &rec[2];
        if label != (if attack_type.is_attack() { "attack" } else { "normal" }) {
            return Err(Error::Parse(format!("label {label:?} contradicts attack_type {}", &rec[3])));
        }
        out.push(DatasetSample {
            scenario_id: int(&rec[0], "scenario_id")?,
            window_id: int(&rec[1], "window_id")?,
            attack_type,
            metrics: WindowMetrics {
                spike_frequency_hz: num(&rec[4], "spike_frequency_hz")?,
                weight_change_pct: num(&rec[5], "weight_change_pct")?,
                latency_ms: num(&rec[6], "latency_ms")?,
            },
            seed: int(&rec[7], "seed")?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::Usage("need at least two values".into()));
        }
        Ok(MeanSd {
            mean: mean(xs),
            sd: sample_var(xs).sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub condition: String,
    pub n: usize,
    pub spike_frequency_hz: MeanSd,
    pub weight_change_pct: MeanSd,
    pub latency_ms: MeanSd,
    pub spike_variance_hz2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub conditions: Vec<ConditionStats>,
}

impl SummaryStats {
    pub fn get(&self, condition: &str) -> Option<&ConditionStats> {
        self.conditions.iter().find(|c| c.condition == condition)
    }
}

fn condition_stats(name: &str, rows: &[&DatasetSample]) -> Result<ConditionStats> {
    if rows.len() < 2 {
        return Err(Error::Usage(format!("condition {name} has fewer than two rows")));
    }
    let col = |f: fn(&WindowMetrics) -> f64| rows.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>();
    let freq = col(|m| m.spike_frequency_hz);
    Ok(ConditionStats {
        condition: name.to_string(),
        n: rows.len(),
        spike_frequency_hz: MeanSd::of(&freq)?,
        weight_change_pct: MeanSd::of(&col(|m| m.weight_change_pct))?,
        latency_ms: MeanSd::of(&col(|m| m.latency_ms))?,
        spike_variance_hz2: sample_var(&freq),
    })
}

/// Per-condition statistics: `normal`, pooled `attack`, and each attack type
/// that has at least two rows.
pub fn summarize(rows: &[DatasetSample]) -> Result<SummaryStats> {
    let normal: Vec<&DatasetSample> = rows.iter().filter(|r| !r.is_attack()).collect();
    let attack: Vec<&DatasetSample> = rows.iter().filter(|r| r.is_attack()).collect();
    let mut conditions = vec![condition_stats("normal", &normal)?, condition_stats("attack", &attack)?];
    for t in [AttackType::WeightTamper, AttackType::InputPoison] {
        let sub: Vec<&DatasetSample> = rows.iter().filter(|r| r.attack_type == t).collect();
        if sub.len() >= 2 {
            conditions.push(condition_stats(t.as_str(), &sub)?);
        }
    }
    Ok(SummaryStats { conditions })
}

pub fn write_summary_csv<W: std::io::Write>(s: &SummaryStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "condition",
        "n",
        "spike_frequency_mean",
        "spike_frequency_sd",
        "weight_change_mean",
        "weight_change_sd",
        "latency_mean",
        "latency_sd",
        "spike_variance",
    ])
    .map_err(csv_err)?;
    for c in &s.conditions {
        w.write_record([
            c.condition.clone(),
            c.n.to_string(),
            fmt_sig(c.spike_frequency_hz.mean, 6),
            fmt_sig(c.spike_frequency_hz.sd, 6),
            fmt_sig(c.weight_change_pct.mean, 6),
            fmt_sig(c.weight_change_pct.sd, 6),
            fmt_sig(c.latency_ms.mean, 6),
            fmt_sig(c.latency_ms.sd, 6),
            fmt_sig(c.spike_variance_hz2, 6),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Aligned plain-text table.
pub fn summary_table(s: &SummaryStats) -> String {
    let mut rows = vec![vec![
        "Condition".to_string(),
        "n".into(),
        "Spike Frequency (Hz)".into(),
        "Weight Change (%)".into(),
        "Latency (ms)".into(),
        "Spike Variance (Hz^2)".into(),
    ]];
    for c in &s.conditions {
        let pm = |m: &MeanSd| format!("{:.2} ± {:.2}", m.mean, m.sd);
        rows.push(vec![
            c.condition.clone(),
            c.n.to_string(),
            pm(&c.spike_frequency_hz),
            pm(&c.weight_change_pct),
            pm(&c.latency_ms),
            format!("{:.2}", c.spike_variance_hz2),
        ]);
    }
    align(&rows)
}

pub(crate) fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|k| rows.iter().filter_map(|r| r.get(k)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(k, s)| format!("{s}{}", " ".repeat(widths[k] - s.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Usage("each group needs at least two values".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (sa, sb) = (sample_var(a) / a.len() as f64, sample_var(b) / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        if ma == mb {
            return Err(Error::Undefined("both groups constant and equal".into()));
        }
        let t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
        return Ok(TTest { t, df: f64::NAN, p: 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Undefined(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(kind: AttackType, f: f64) -> DatasetSample {
        DatasetSample {
            scenario_id: 0,
            window_id: 0,
            attack_type: kind,
            metrics: WindowMetrics {
                spike_frequency_hz: f,
                weight_change_pct: 0.5,
                latency_ms: 10.0,
            },
            seed: 1,
        }
    }

    #[test]
    fn frequency_arithmetic() {
        let rec = SpikeRecord {
            events: (0..50_000).map(|k| (k as f64 * 0.01, (k % 1000) as u32)).collect(),
            window_start: 0.0,
            window_end: 1000.0,
        };
        assert_eq!(spike_frequency(&rec, 1000, 1000.0), 50.0);
        assert_eq!(spike_frequency(&SpikeRecord::default(), 1000, 1000.0), 0.0);
        let one = SpikeRecord {
            events: vec![(3.0, 0)],
            window_start: 0.0,
            window_end: 1000.0,
        };
        assert_eq!(spike_frequency(&one, 1, 1000.0), 1.0);
    }

    #[test]
    fn weight_change_arithmetic() {
        let n_syn = 1000 * 999;
        assert!((weight_change_pct(0.005 * n_syn as f64, n_syn, 0.0, 1.0) - 0.5).abs() < 1e-12);
        let tamper = 0.1 * n_syn as f64 * 0.1;
        assert!((weight_change_pct(tamper, n_syn, 0.0, 1.0) - 1.0).abs() < 1e-12);
        assert_eq!(weight_change_pct(0.0, n_syn, 0.0, 1.0), 0.0);
    }

    #[test]
    fn sig_digit_formatting() {
        assert_eq!(fmt_sig(50.123456789, 6), "50.1235");
        assert_eq!(fmt_sig(0.000123456789, 6), "0.000123457");
        assert_eq!(fmt_sig(123456789.0, 6), "123457000");
        assert_eq!(fmt_sig(10.0, 6), "10");
        assert_eq!(fmt_sig(0.0, 6), "0");
        assert_eq!(fmt_sig(-2.5, 6), "-2.5");
        assert_eq!(fmt_sig(999999.7, 6), "1000000");
    }

    #[test]
    fn summary_hand_arithmetic() {
        let rows: Vec<_> = [48.0, 50.0, 52.0]
            .iter()
            .map(|&f| row(AttackType::None, f))
            .chain([row(AttackType::WeightTamper, 55.0), row(AttackType::InputPoison, 55.0)])
            .collect();
        let s = summarize(&rows).unwrap();
        let n = s.get("normal").unwrap();
        assert_eq!(n.spike_frequency_hz.mean, 50.0);
        assert_eq!(n.spike_frequency_hz.sd, 2.0);
        assert_eq!(n.spike_variance_hz2, 4.0);
        assert_eq!(s.get("attack").unwrap().spike_variance_hz2, 0.0);
        assert!(s.get("weight_tamper").is_none());
    }

    #[test]
    fn summary_needs_both_conditions() {
        let rows = vec![row(AttackType::None, 1.0), row(AttackType::None, 2.0)];
        assert!(matches!(summarize(&rows), Err(Error::Usage(_))));
    }

    #[test]
    fn welch_identical_groups() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn welch_separated_groups() {
        let r = welch_t_test(&[50.0, 51.0, 49.0, 50.0], &[55.0, 56.0, 54.0, 55.0]).unwrap();
        assert!(r.p < 0.05);
        assert!(r.t < 0.0);
    }

    #[test]
    fn welch_constant_equal_groups_undefined() {
        assert!(matches!(welch_t_test(&[2.0, 2.0], &[2.0, 2.0]), Err(Error::Undefined(_))));
        let r = welch_t_test(&[2.0, 2.0], &[3.0, 3.0]).unwrap();
        assert_eq!(r.p, 0.0);
    }

    #[test]
    fn plan_counts() {
        let p = DatasetPlan::default();
        assert_eq!(p.counts(), (5000, 2500, 2500));
        let sc = p.scenarios();
        assert_eq!(sc.len(), 1000);
        assert_eq!(sc.iter().map(|s| s.3).sum::<usize>(), 10_000);
        let none = DatasetPlan {
            attack_ratio: 0.0,
            ..p
        };
        assert!(none.scenarios().iter().all(|s| s.1 == AttackType::None));
    }
}
