//! Synthetic sensor classification task driven through the network.
//!
//! Channel `c` feeds every non-output neuron whose index is congruent to `c`
//! modulo the channel count; the last `n_classes * group_size` neurons form the
//! readout groups.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};
use crate::snn::{self, NetworkState, Pulse, SimConfig, Stimulus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskSpec {
    pub n_classes: usize,
    pub n_channels: usize,
    pub base_rate_hz: f64,
    pub peak_rate_hz: f64,
    pub noise_sigma: f64,
    /// Training samples generated per class.
    pub samples_per_class: usize,
    /// Test samples generated per class.
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            n_classes: 5,
            n_channels: 64,
            base_rate_hz: 20.0,
            peak_rate_hz: 120.0,
            noise_sigma: 10.0,
            samples_per_class: 20,
            test_per_class: 40,
            seed: 7,
        }
    }
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 1 {
            return Err(Error::config("n_classes", "must be >= 1"));
        }
        if self.n_channels < self.n_classes {
            return Err(Error::config("n_channels", "must be >= n_classes"));
        }
        if !(self.base_rate_hz >= 0.0 && self.base_rate_hz < self.peak_rate_hz) {
            return Err(Error::config("peak_rate_hz", "need 0 <= base_rate_hz < peak_rate_hz"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::config("noise_sigma", "must be >= 0"));
        }
        Ok(())
    }

    /// Channels per class block; the remainder channels stay at base rate.
    pub fn block_size(&self) -> usize {
        self.n_channels / self.n_classes
    }

    /// Class whose peak block contains `channel`, if any.
    pub fn channel_class(&self, channel: usize) -> Option<usize> {
        let b = self.block_size();
        let c = channel / b;
        (c < self.n_classes).then_some(c)
    }

    pub fn prototype(&self, class: usize) -> Vec<f64> {
        (0..self.n_channels)
            .map(|ch| {
                if self.channel_class(ch) == Some(class) {
                    self.peak_rate_hz
                } else {
                    self.base_rate_hz
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub rates: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSets {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Generates prototype-plus-jitter samples, interleaving classes.
pub fn gen_task(spec: &TaskSpec) -> Result<TaskSets> {
    spec.validate()?;
    let protos: Vec<Vec<f64>> = (0..spec.n_classes).map(|c| spec.prototype(c)).collect();
    let draw = |n_per: usize, index: u64| -> Result<Vec<Sample>> {
        let mut rng = rng_for(spec.seed, Stream::Task, index);
        let mut out = Vec::with_capacity(n_per * spec.n_classes);
        for _ in 0..n_per {
            for (label, proto) in protos.iter().enumerate() {
                out.push(Sample {
                    rates: jitter(proto, spec.noise_sigma, &mut rng)?,
                    label,
                });
            }
        }
        Ok(out)
    };
    Ok(TaskSets {
        train: draw(spec.samples_per_class, 0)?,
        test: draw(spec.test_per_class, 1)?,
    })
}

pub(crate) fn jitter<R: Rng>(proto: &[f64], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if sigma == 0.0 {
        return Ok(proto.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::config("noise_sigma", e.to_string()))?;
    Ok(proto.iter().map(|r| (r + normal.sample(rng)).max(0.0)).collect())
}

/// Writes samples as CSV: `label,ch0,ch1,...`.
pub fn write_task_csv<W: std::io::Write>(samples: &[Sample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n_ch = samples.first().map_or(0, |s| s.rates.len());
    let mut header = vec!["label".to_string()];
    header.extend((0..n_ch).map(|c| format!("ch{c}")));
    w.write_record(&header).map_err(csv_err)?;
    for s in samples {
        let mut rec = vec![s.label.to_string()];
        rec.extend(s.rates.iter().map(|r| format!("{r}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Per-channel spike trains for one window, sorted by step then channel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelSchedule {
    pub events: Vec<(u32, u16)>,
    pub steps: u64,
}

impl ChannelSchedule {
    pub fn count_for(&self, channel: u16) -> usize {
        self.events.iter().filter(|(_, c)| *c == channel).count()
    }
}

/// Bernoulli-per-step approximation of independent Poisson trains.
pub fn encode_poisson(sample: &Sample, duration_ms: f64, dt: f64, seed: u64) -> Result<ChannelSchedule> {
    if !(duration_ms > 0.0) {
        return Err(Error::config("duration_ms", "must be > 0"));
    }
    if sample.rates.len() > usize::from(u16::MAX) {
        return Err(Error::config("n_channels", "exceeds u16 range"));
    }
    let probs: Vec<f64> = sample.rates.iter().map(|r| r * dt / 1000.0).collect();
    if let Some(p) = probs.iter().find(|p| **p > 1.0) {
        return Err(Error::config(
            "dt",
            format!("spike probability {p} per step exceeds 1; dt too coarse"),
        ));
    }
    let steps = (duration_ms / dt).round() as u64;
    let mut rng = rng_for(seed, Stream::Stimulus, 0);
    let mut events = Vec::new();
    for k in 0..steps {
        for (ch, p) in probs.iter().enumerate() {
            // Draw for every channel so schedules stay aligned across rate changes.
            let u: f64 = rng.random();
            if u < *p {
                events.push((k as u32, ch as u16));
            }
        }
    }
    Ok(ChannelSchedule { events, steps })
}

/// Readout, training and drive parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutConfig {
    /// Neurons per readout group.
    pub group_size: usize,
    /// Spike-count lead required to decide.
    pub decision_margin: u32,
    /// Membrane increment delivered to each fed neuron per channel spike.
    pub input_charge: f64,
    /// Constant current injected into every readout neuron at inference.
    pub tonic_current: f64,
    /// Constant current injected into the label's group during training.
    pub teacher_current: f64,
    /// Multiplier on STDP rates while training.
    pub train_lr_scale: f64,
    /// Training passes over the training set.
    pub train_epochs: usize,
    pub window_ms: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        ReadoutConfig {
            group_size: 10,
            decision_margin: 4,
            input_charge: 1.0,
            tonic_current: 0.0,
            teacher_current: 0.1,
            train_lr_scale: 50.0,
            train_epochs: 1,
            window_ms: 1000.0,
        }
    }
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size == 0 {
            return Err(Error::config("group_size", "must be >= 1"));
        }
        if self.decision_margin < 1 {
            return Err(Error::config("decision_margin", "must be >= 1"));
        }
        if !(self.window_ms > 0.0) {
            return Err(Error::config("window_ms", "must be > 0"));
        }
        if !(self.train_lr_scale >= 0.0) {
            return Err(Error::config("train_lr_scale", "must be >= 0"));
        }
        Ok(())
    }
}

/// Where channels and readout groups sit in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n_neurons: usize,
    pub n_channels: usize,
    pub n_groups: usize,
    pub group_size: usize,
}

impl Layout {
    pub fn new(sim: &SimConfig, task: &TaskSpec, readout: &ReadoutConfig) -> Result<Self> {
        let n_out = task.n_classes * readout.group_size;
        if n_out + task.n_channels > sim.n_neurons {
            return Err(Error::config(
                "n_neurons",
                format!(
                    "{} neurons cannot host {} channels and {n_out} readout neurons",
                    sim.n_neurons, task.n_channels
                ),
            ));
        }
        Ok(Layout {
            n_neurons: sim.n_neurons,
            n_channels: task.n_channels,
            n_groups: task.n_classes,
            group_size: readout.group_size,
        })
    }

    pub fn first_output(&self) -> usize {
        self.n_neurons - self.n_groups * self.group_size
    }

    /// Readout group of `neuron`, if it is an output neuron.
    pub fn group_of(&self, neuron: usize) -> Option<usize> {
        let first = self.first_output();
        (neuron >= first && neuron < self.n_neurons).then(|| (neuron - first) / self.group_size)
    }

    /// Channel feeding `neuron`, if it is a sensory neuron.
    pub fn channel_of(&self, neuron: usize) -> Option<usize> {
        (neuron < self.first_output()).then(|| neuron % self.n_channels)
    }

    pub fn group_range(&self, group: usize) -> std::ops::Range<usize> {
        let s = self.first_output() + group * self.group_size;
        s..s + self.group_size
    }

    /// Expands a channel schedule into network pulses plus readout bias:
    /// `tonic` on every output neuron and an optional teacher current on one group.
    pub fn stimulus(
        &self,
        schedule: &ChannelSchedule,
        charge: f64,
        tonic: f64,
        teacher: Option<(usize, f64)>,
    ) -> Stimulus {
        let first_out = self.first_output();
        let mut pulses = Vec::with_capacity(schedule.events.len() * first_out.div_ceil(self.n_channels));
        for &(step, ch) in &schedule.events {
            let mut neuron = usize::from(ch);
            while neuron < first_out {
                pulses.push(Pulse {
                    step,
                    neuron: neuron as u32,
                    charge,
                });
                neuron += self.n_channels;
            }
        }
        let teacher = teacher.filter(|t| t.1 != 0.0);
        let bias = if tonic == 0.0 && teacher.is_none() {
            Vec::new()
        } else {
            let mut b = vec![0.0; self.n_neurons];
            for x in &mut b[first_out..] {
                *x = tonic;
            }
            if let Some((group, current)) = teacher {
                for j in self.group_range(group) {
                    b[j] += current;
                }
            }
            b
        };
        Stimulus { bias, pulses }
    }
}

/// Group-to-class assignment plus decision rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutMap {
    pub assignment: Vec<usize>,
    pub decision_margin: u32,
    pub first_output: usize,
    pub group_size: usize,
}

impl ReadoutMap {
    pub fn n_groups(&self) -> usize {
        self.assignment.len()
    }

    fn group_of(&self, neuron: usize) -> Option<usize> {
        if neuron < self.first_output {
            return None;
        }
        let g = (neuron - self.first_output) / self.group_size;
        (g < self.assignment.len()).then_some(g)
    }
}

/// Incremental margin decision over a spike stream.
#[derive(Debug, Clone)]
pub struct Decider<'a> {
    map: &'a ReadoutMap,
    counts: Vec<u32>,
    start: f64,
    dt: f64,
    decided: Option<(usize, f64)>,
}

impl<'a> Decider<'a> {
    pub fn new(map: &'a ReadoutMap, start: f64, dt: f64) -> Self {
        Decider {
            map,
            counts: vec![0; map.n_groups()],
            start,
            dt,
            decided: None,
        }
    }

    /// Feeds one step. Returns true once a decision has been reached.
    pub fn observe(&mut self, t: f64, spikes: &[u32]) -> bool {
        if self.decided.is_some() {
            return true;
        }
        let mut touched = false;
        for &s in spikes {
            if let Some(g) = self.map.group_of(s as usize) {
                self.counts[g] += 1;
                touched = true;
            }
        }
        if touched {
            let (lead, runner) = top_two(&self.counts);
            if self.counts[lead] - runner >= self.map.decision_margin {
                // The crossing is known at the end of the step.
                self.decided = Some((lead, t - self.start + self.dt));
            }
        }
        self.decided.is_some()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Prediction, latency and timeout flag for a window of `window_ms`.
    pub fn finish(&self, window_ms: f64) -> Decision {
        match self.decided {
            Some((g, lat)) => Decision {
                label: self.map.assignment[g],
                latency_ms: lat,
                timed_out: false,
            },
            None => Decision {
                label: self.map.assignment[top_two(&self.counts).0],
                latency_ms: window_ms,
                timed_out: true,
            },
        }
    }
}

/// Index of the maximum (lowest index on ties) and the runner-up count.
fn top_two(counts: &[u32]) -> (usize, u32) {
    let mut lead = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[lead] {
            lead = i;
        }
    }
    let runner = counts
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != lead)
        .map(|(_, &c)| c)
        .max()
        .unwrap_or(0);
    (lead, runner)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: usize,
    pub latency_ms: f64,
    pub timed_out: bool,
}

/// Network plus what is needed to drive it.
#[derive(Debug, Clone)]
pub struct Workbench {
    pub sim: SimConfig,
    pub task: TaskSpec,
    pub readout_cfg: ReadoutConfig,
    pub layout: Layout,
}

impl Workbench {
    pub fn new(sim: SimConfig, task: TaskSpec, readout_cfg: ReadoutConfig) -> Result<Self> {
        sim.validate()?;
        task.validate()?;
        readout_cfg.validate()?;
        let layout = Layout::new(&sim, &task, &readout_cfg)?;
        Ok(Workbench {
            sim,
            task,
            readout_cfg,
            layout,
        })
    }

    pub fn encode(&self, sample: &Sample, seed: u64) -> Result<ChannelSchedule> {
        encode_poisson(sample, self.readout_cfg.window_ms, self.sim.dt, seed)
    }

    pub fn stimulus(&self, schedule: &ChannelSchedule, teacher: Option<usize>) -> Stimulus {
        let t = teacher.map(|g| (g, self.readout_cfg.teacher_current));
        self.layout.stimulus(schedule, self.readout_cfg.input_charge, self.readout_cfg.tonic_current, t)
    }

    /// Clears dynamics and parks readout neurons at the equilibrium of the
    /// tonic current, capped just below threshold.
    pub fn settle(&self, network: &mut NetworkState) {
        let sim = &self.sim;
        network.reset_dynamics(sim);
        let v0 = (sim.v_rest + sim.tau_m * self.readout_cfg.tonic_current).min(sim.v_thresh - 1e-9);
        let first = self.layout.first_output();
        for v in &mut network.v[first..] {
            *v = v0;
        }
    }

    fn train_config(&self) -> SimConfig {
        let mut c = self.sim.clone();
        c.stdp.a_plus *= self.readout_cfg.train_lr_scale;
        c.stdp.a_minus *= self.readout_cfg.train_lr_scale;
        c
    }
}

/// Stimulus seed for sample `index` of a named set.
pub fn sample_seed(root: u64, set: u64, index: usize) -> u64 {
    crate::rng::derive_seed(root, Stream::Stimulus, (set << 40) ^ index as u64)
}

pub const SET_TRAIN: u64 = 1;
pub const SET_TEST: u64 = 2;
pub const SET_ASSIGN: u64 = 3;

/// Supervised STDP imprinting followed by response-based group assignment.
pub fn train(bench: &Workbench, network: &mut NetworkState, train_set: &[Sample]) -> Result<ReadoutMap> {
    if train_set.is_empty() {
        return Err(Error::Usage("empty training set".into()));
    }
    imprint(bench, network, train_set)?;
    let responses = group_responses(bench, network, train_set)?;
    assign_groups(bench, &responses)
}

/// Presents every training sample for one learning window with the teacher
/// current on the label's group. The tonic readout current stays off.
pub fn imprint(bench: &Workbench, network: &mut NetworkState, train_set: &[Sample]) -> Result<()> {
    let sim = &bench.sim;
    let tcfg = bench.train_config();
    let window = bench.readout_cfg.window_ms;
    for epoch in 0..bench.readout_cfg.train_epochs {
        for (i, sample) in train_set.iter().enumerate() {
            let seed = sample_seed(sim.seed, SET_TRAIN, epoch * train_set.len() + i);
            let sched = bench.encode(sample, seed)?;
            let teacher = (sample.label % bench.layout.n_groups, bench.readout_cfg.teacher_current);
            let stim = bench.layout.stimulus(&sched, bench.readout_cfg.input_charge, 0.0, Some(teacher));
            network.reset_dynamics(sim);
            snn::run_window(network, &stim, window, &tcfg, true)?;
        }
    }
    Ok(())
}

/// Mean spike count of each readout group per class, `[group][class]`, with
/// learning and teacher off. Classes without samples are `NaN`.
pub fn group_responses(bench: &Workbench, network: &mut NetworkState, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
    let sim = &bench.sim;
    let n_groups = bench.layout.n_groups;
    let n_classes = bench.task.n_classes;
    let first = bench.layout.first_output();
    let gs = bench.layout.group_size;
    let mut sums = vec![vec![0.0f64; n_classes]; n_groups];
    let mut seen = vec![0usize; n_classes];
    for (i, sample) in samples.iter().enumerate() {
        let seed = sample_seed(sim.seed, SET_ASSIGN, i);
        let sched = bench.encode(sample, seed)?;
        let stim = bench.stimulus(&sched, None);
        bench.settle(network);
        let mut counts = vec![0u32; n_groups];
        snn::run_steps(network, &stim, bench.readout_cfg.window_ms, sim, false, |_, spikes| {
            for &s in spikes {
                let s = s as usize;
                if s >= first {
                    counts[(s - first) / gs] += 1;
                }
            }
            true
        })?;
        for (g, c) in counts.iter().enumerate() {
            sums[g][sample.label] += f64::from(*c);
        }
        seen[sample.label] += 1;
    }
    for row in &mut sums {
        for (x, n) in row.iter_mut().zip(&seen) {
            *x = if *n == 0 { f64::NAN } else { *x / *n as f64 };
        }
    }
    Ok(sums)
}

/// Assigns each group to the class with its largest response after removing
/// per-group excitability and per-class drive (double centering).
pub fn assign_groups(bench: &Workbench, responses: &[Vec<f64>]) -> Result<ReadoutMap> {
    let centered = double_center(responses);
    let assignment: Vec<usize> = centered
        .iter()
        .map(|row| {
            let means: Vec<f64> = row.iter().map(|x| if x.is_nan() { f64::NEG_INFINITY } else { *x }).collect();
            argmax(&means)
        })
        .collect();
    let n_classes = responses.first().map_or(0, Vec::len);
    for c in 0..n_classes {
        let present = responses.iter().any(|row| !row[c].is_nan());
        if present && !assignment.contains(&c) {
            return Err(Error::Training(format!("class {c} has no winning readout group")));
        }
    }
    Ok(ReadoutMap {
        assignment,
        decision_margin: bench.readout_cfg.decision_margin,
        first_output: bench.layout.first_output(),
        group_size: bench.layout.group_size,
    })
}

fn nan_mean<'a>(xs: impl Iterator<Item = &'a f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs.filter(|x| !x.is_nan()) {
        sum += x;
        n += 1;
    }
    if n == 0 { f64::NAN } else { sum / n as f64 }
}

fn double_center(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_classes = r.first().map_or(0, Vec::len);
    let rows: Vec<f64> = r.iter().map(|row| nan_mean(row.iter())).collect();
    let cols: Vec<f64> = (0..n_classes).map(|c| nan_mean(r.iter().map(|row| &row[c]))).collect();
    let grand = nan_mean(rows.iter());
    r.iter()
        .zip(&rows)
        .map(|(row, rm)| row.iter().zip(&cols).map(|(x, cm)| x - rm - cm + grand).collect())
        .collect()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// One inference window with learning off, stopped at the decision.
pub fn classify(
    bench: &Workbench,
    network: &mut NetworkState,
    readout: &ReadoutMap,
    schedule: &ChannelSchedule,
) -> Result<Decision> {
    let sim = &bench.sim;
    let stim = bench.stimulus(schedule, None);
    bench.settle(network);
    let mut decider = Decider::new(readout, network.t_now(), sim.dt);
    snn::run_steps(network, &stim, bench.readout_cfg.window_ms, sim, false, |t, spikes| {
        !decider.observe(t, spikes)
    })?;
    Ok(decider.finish(bench.readout_cfg.window_ms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub label: usize,
    pub prediction: usize,
    pub latency_ms: f64,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub percent: f64,
    pub outcomes: Vec<SampleOutcome>,
}

impl AccuracyReport {
    pub fn from_outcomes(outcomes: Vec<SampleOutcome>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::Usage("empty test set".into()));
        }
        let correct = outcomes.iter().filter(|o| o.label == o.prediction).count();
        Ok(AccuracyReport {
            percent: 100.0 * correct as f64 / outcomes.len() as f64,
            outcomes,
        })
    }

    pub fn mean_latency(&self) -> f64 {
        self.outcomes.iter().map(|o| o.latency_ms).sum::<f64>() / self.outcomes.len() as f64
    }
}

/// Classifies every sample of a test set; schedules come from `seeds`.
pub fn accuracy(
    bench: &Workbench,
    network: &mut NetworkState,
    readout: &ReadoutMap,
    test_set: &[Sample],
    seeds: &[u64],
) -> Result<AccuracyReport> {
    if test_set.is_empty() {
        return Err(Error::Usage("empty test set".into()));
    }
    let mut outcomes = Vec::with_capacity(test_set.len());
    for (sample, seed) in test_set.iter().zip(seeds) {
        let sched = bench.encode(sample, *seed)?;
        let d = classify(bench, network, readout, &sched)?;
        outcomes.push(SampleOutcome {
            label: sample.label,
            prediction: d.label,
            latency_ms: d.latency_ms,
            timed_out: d.timed_out,
        });
    }
    AccuracyReport::from_outcomes(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prototypes_are_disjoint_blocks() {
        let spec = TaskSpec::default();
        assert_eq!(spec.block_size(), 12);
        let protos: Vec<_> = (0..5).map(|c| spec.prototype(c)).collect();
        for (c, p) in protos.iter().enumerate() {
            let peaks: Vec<usize> = (0..64).filter(|&ch| p[ch] == spec.peak_rate_hz).collect();
            assert_eq!(peaks, (c * 12..(c + 1) * 12).collect::<Vec<_>>());
        }
        for ch in 60..64 {
            assert!(protos.iter().all(|p| p[ch] == spec.base_rate_hz));
        }
    }

    #[test]
    fn zero_noise_reproduces_prototype() {
        let spec = TaskSpec {
            noise_sigma: 0.0,
            ..TaskSpec::default()
        };
        let sets = gen_task(&spec).unwrap();
        for s in sets.train.iter().chain(&sets.test) {
            assert_eq!(s.rates, spec.prototype(s.label));
        }
    }

    #[test]
    fn task_is_deterministic() {
        let spec = TaskSpec::default();
        assert_eq!(gen_task(&spec).unwrap(), gen_task(&spec).unwrap());
    }

    #[test]
    fn too_few_channels() {
        let spec = TaskSpec {
            n_channels: 3,
            ..TaskSpec::default()
        };
        assert!(matches!(gen_task(&spec), Err(Error::Config { field: "n_channels", .. })));
    }

    #[test]
    fn silent_channel_never_fires() {
        let s = Sample {
            rates: vec![0.0, 50.0],
            label: 0,
        };
        let sched = encode_poisson(&s, 1000.0, 0.1, 3).unwrap();
        assert_eq!(sched.count_for(0), 0);
        assert_eq!(sched, encode_poisson(&s, 1000.0, 0.1, 3).unwrap());
    }

    #[test]
    fn coarse_dt_rejected() {
        let s = Sample {
            rates: vec![2000.0],
            label: 0,
        };
        assert!(matches!(encode_poisson(&s, 10.0, 1.0, 0), Err(Error::Config { field: "dt", .. })));
    }

    #[test]
    fn unopposed_group_decides_at_margin_spike() {
        let map = ReadoutMap {
            assignment: vec![0, 1],
            decision_margin: 3,
            first_output: 10,
            group_size: 2,
        };
        let mut d = Decider::new(&map, 0.0, 0.1);
        assert!(!d.observe(1.0, &[12]));
        assert!(!d.observe(2.0, &[13]));
        assert!(d.observe(3.0, &[12]));
        let out = d.finish(1000.0);
        assert_eq!(out.label, 1);
        assert!((out.latency_ms - 3.1).abs() < 1e-12);
        assert!(!out.timed_out);
    }

    #[test]
    fn silence_times_out() {
        let map = ReadoutMap {
            assignment: vec![2, 0],
            decision_margin: 1,
            first_output: 0,
            group_size: 1,
        };
        let d = Decider::new(&map, 0.0, 0.1);
        let out = d.finish(250.0);
        assert!(out.timed_out);
        assert_eq!(out.latency_ms, 250.0);
        assert_eq!(out.label, 2);
    }

    #[test]
    fn empty_test_set() {
        assert!(matches!(AccuracyReport::from_outcomes(vec![]), Err(Error::Usage(_))));
    }

    #[test]
    fn all_correct_is_hundred() {
        let outs = (0..7)
            .map(|i| SampleOutcome {
                label: i % 3,
                prediction: i % 3,
                latency_ms: 5.0,
                timed_out: false,
            })
            .collect();
        assert_eq!(AccuracyReport::from_outcomes(outs).unwrap().percent, 100.0);
    }
}
