//! Discrete-time leaky integrate-and-fire network with pair-based STDP.
//!
//! Weights are stored dense and row-major: `weights[i * n + j]` is the synapse
//! from presynaptic neuron `i` onto postsynaptic neuron `j`. Self-connections
//! are held at zero and never updated. A spike emitted on one step is delivered
//! to its targets on the next step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

/// Pair-based STDP constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StdpParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
}

impl Default for StdpParams {
    fn default() -> Self {
        StdpParams {
            a_plus: 0.01,
            a_minus: 0.01,
            tau_plus: 20.0,
            tau_minus: 20.0,
        }
    }
}

/// Simulation constants. Times are in milliseconds, potentials in arbitrary units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_neurons: usize,
    pub dt: f64,
    pub tau_m: f64,
    pub v_rest: f64,
    pub v_reset: f64,
    pub v_thresh: f64,
    pub refractory: f64,
    /// Scale applied to the summed weights of last step's presynaptic spikes.
    pub syn_gain: f64,
    pub stdp: StdpParams,
    pub w_min: f64,
    pub w_max: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_neurons: 1000,
            dt: 0.1,
            tau_m: 20.0,
            v_rest: 0.0,
            v_reset: 0.0,
            v_thresh: 1.0,
            refractory: 2.0,
            syn_gain: 1.0,
            stdp: StdpParams::default(),
            w_min: 0.0,
            w_max: 1.0,
            seed: 42,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_neurons == 0 {
            return Err(Error::config("n_neurons", "must be at least 1"));
        }
        if self.n_neurons > u32::MAX as usize {
            return Err(Error::config("n_neurons", "exceeds u32 range"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "must be > 0"));
        }
        if !(self.tau_m > 0.0) {
            return Err(Error::config("tau_m", "must be > 0"));
        }
        if !(self.v_reset < self.v_thresh) {
            return Err(Error::config("v_reset", "must be below v_thresh"));
        }
        if !(self.refractory >= 0.0) {
            return Err(Error::config("refractory", "must be >= 0"));
        }
        if !(self.syn_gain >= 0.0 && self.syn_gain.is_finite()) {
            return Err(Error::config("syn_gain", "must be finite and >= 0"));
        }
        if !(self.w_min >= 0.0) {
            return Err(Error::config("w_min", "must be >= 0"));
        }
        if !(self.w_min < self.w_max) {
            return Err(Error::config("w_max", "must exceed w_min"));
        }
        if !(self.stdp.tau_plus > 0.0) {
            return Err(Error::config("stdp.tau_plus", "must be > 0"));
        }
        if !(self.stdp.tau_minus > 0.0) {
            return Err(Error::config("stdp.tau_minus", "must be > 0"));
        }
        if !(self.stdp.a_plus >= 0.0 && self.stdp.a_minus >= 0.0) {
            return Err(Error::config("stdp.a_plus", "learning rates must be >= 0"));
        }
        Ok(())
    }

    /// Number of integration steps in `duration_ms`; errors unless it is a whole
    /// multiple of `dt`.
    pub fn steps_for(&self, duration_ms: f64) -> Result<u64> {
        if !(duration_ms > 0.0) {
            return Err(Error::config("duration_ms", "must be > 0"));
        }
        let steps = (duration_ms / self.dt).round();
        if ((steps * self.dt) - duration_ms).abs() > 1e-9 * duration_ms.max(1.0) {
            return Err(Error::config(
                "duration_ms",
                format!("{duration_ms} is not a multiple of dt={}", self.dt),
            ));
        }
        Ok(steps as u64)
    }
}

/// Mutable state of the simulated chip.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    n: usize,
    pub v: Vec<f64>,
    /// Earliest time (ms) at which each neuron integrates again.
    pub refractory_until: Vec<f64>,
    pub weights: Vec<f64>,
    pub trace_pre: Vec<f64>,
    pub trace_post: Vec<f64>,
    step: u64,
    dt: f64,
    /// Spikes from the previous step, delivered on the next one.
    pending: Vec<u32>,
    syn: Vec<f64>,
}

impl NetworkState {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t_now(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn steps_elapsed(&self) -> u64 {
        self.step
    }

    #[inline]
    pub fn weight(&self, pre: usize, post: usize) -> f64 {
        self.weights[pre * self.n + post]
    }

    pub fn set_weight(&mut self, pre: usize, post: usize, w: f64) {
        if pre != post {
            self.weights[pre * self.n + post] = w;
        }
    }

    /// Resets membrane, refractory and trace state while keeping weights, so a
    /// window can start from a quiescent chip.
    pub fn reset_dynamics(&mut self, config: &SimConfig) {
        self.v.iter_mut().for_each(|v| *v = config.v_rest);
        self.refractory_until.iter_mut().for_each(|r| *r = f64::NEG_INFINITY);
        self.trace_pre.iter_mut().for_each(|t| *t = 0.0);
        self.trace_post.iter_mut().for_each(|t| *t = 0.0);
        self.pending.clear();
    }

    fn check_dims(&self, config: &SimConfig) -> Result<()> {
        if self.n != config.n_neurons || self.weights.len() != self.n * self.n {
            return Err(Error::Structure(format!(
                "state has {} neurons, config expects {}",
                self.n, config.n_neurons
            )));
        }
        Ok(())
    }
}

/// Builds a fresh network with i.i.d. uniform weights drawn from the seeded
/// initialisation stream.
pub fn init_network(config: &SimConfig) -> Result<NetworkState> {
    config.validate()?;
    let n = config.n_neurons;
    let mut rng = rng_for(config.seed, Stream::Init, 0);
    let span = config.w_max - config.w_min;
    let mut weights = vec![0.0; n * n];
    for (idx, w) in weights.iter_mut().enumerate() {
        let u: f64 = rng.random();
        if idx / n != idx % n {
            *w = config.w_min + span * u;
        }
    }
    Ok(NetworkState {
        n,
        v: vec![config.v_rest; n],
        refractory_until: vec![f64::NEG_INFINITY; n],
        weights,
        trace_pre: vec![0.0; n],
        trace_post: vec![0.0; n],
        step: 0,
        dt: config.dt,
        pending: Vec::new(),
        syn: vec![0.0; n],
    })
}

/// Advances the membrane dynamics by one `dt`. Returns the neurons that spiked
/// this step (ascending ids).
pub fn step(state: &mut NetworkState, external_current: &[f64], config: &SimConfig) -> Result<Vec<u32>> {
    state.check_dims(config)?;
    if external_current.len() != state.n {
        return Err(Error::Structure(format!(
            "external current has {} entries, network has {} neurons",
            external_current.len(),
            state.n
        )));
    }
    let mut spikes = Vec::new();
    step_into(state, external_current, config, &mut spikes);
    Ok(spikes)
}

pub(crate) fn step_into(
    state: &mut NetworkState,
    external_current: &[f64],
    config: &SimConfig,
    spikes: &mut Vec<u32>,
) {
    let n = state.n;
    spikes.clear();

    state.syn.iter_mut().for_each(|s| *s = 0.0);
    for &pre in &state.pending {
        let row = &state.weights[pre as usize * n..(pre as usize + 1) * n];
        for (s, w) in state.syn.iter_mut().zip(row) {
            *s += *w;
        }
    }

    let t = state.t_now();
    let dt = config.dt;
    let leak = dt / config.tau_m;
    let gain = config.syn_gain;
    // Tolerance for comparing accumulated step times against refractory ends.
    let eps = dt * 1e-6;
    for j in 0..n {
        if t + eps < state.refractory_until[j] {
            continue;
        }
        let mut v = state.v[j];
        if v < config.v_thresh {
            v += leak * (config.v_rest - v) + dt * (gain * state.syn[j] + external_current[j]);
        }
        if v >= config.v_thresh {
            v = config.v_reset;
            // The crossing is registered at the end of this step.
            state.refractory_until[j] = t + dt + config.refractory;
            spikes.push(j as u32);
        }
        state.v[j] = v;
    }

    state.pending.clear();
    state.pending.extend_from_slice(spikes);
    state.step += 1;
}

/// Pair-based trace STDP for the spikes emitted on the current step.
///
/// Traces decay first. A presynaptic spike at `i` depresses row `i` by
/// `a_minus * trace_post`; a postsynaptic spike at `j` potentiates column `j`
/// by `a_plus * trace_pre`. Traces are incremented after both updates, so a
/// pair sharing a step does not interact.
pub fn stdp_apply(state: &mut NetworkState, spikes: &[u32], config: &SimConfig) {
    let n = state.n;
    let decay_pre = (-config.dt / config.stdp.tau_plus).exp();
    let decay_post = (-config.dt / config.stdp.tau_minus).exp();
    state.trace_pre.iter_mut().for_each(|x| *x *= decay_pre);
    state.trace_post.iter_mut().for_each(|x| *x *= decay_post);
    if spikes.is_empty() {
        return;
    }
    let (lo, hi) = (config.w_min, config.w_max);
    let a_minus = config.stdp.a_minus;
    let a_plus = config.stdp.a_plus;

    if a_minus > 0.0 {
        for &i in spikes {
            let i = i as usize;
            let row = &mut state.weights[i * n..(i + 1) * n];
            for (w, tr) in row.iter_mut().zip(&state.trace_post) {
                *w = (*w - a_minus * tr).clamp(lo, hi);
            }
            row[i] = 0.0;
        }
    }
    if a_plus > 0.0 {
        for &j in spikes {
            let j = j as usize;
            for (r, tr) in state.trace_pre.iter().enumerate() {
                if *tr == 0.0 {
                    continue;
                }
                let w = &mut state.weights[r * n + j];
                *w = (*w + a_plus * tr).clamp(lo, hi);
            }
            state.weights[j * n + j] = 0.0;
        }
    }
    for &s in spikes {
        state.trace_pre[s as usize] += 1.0;
        state.trace_post[s as usize] += 1.0;
    }
}

/// A charge injected into one neuron at a given step of a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub step: u32,
    pub neuron: u32,
    /// Direct membrane increment; delivered as current `charge / dt`.
    pub charge: f64,
}

/// Input drive for one window: a constant per-neuron bias plus pulses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stimulus {
    /// Constant current per neuron; empty means zero.
    pub bias: Vec<f64>,
    /// Sorted by `step`.
    pub pulses: Vec<Pulse>,
}

impl Stimulus {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !self.bias.is_empty() && self.bias.len() != n {
            return Err(Error::Structure(format!(
                "bias has {} entries, network has {n} neurons",
                self.bias.len()
            )));
        }
        if let Some(p) = self.pulses.iter().find(|p| p.neuron as usize >= n) {
            return Err(Error::Structure(format!(
                "stimulus references neuron {} but network has {n}",
                p.neuron
            )));
        }
        if self.pulses.windows(2).any(|w| w[0].step > w[1].step) {
            return Err(Error::Structure("stimulus pulses not sorted by step".into()));
        }
        Ok(())
    }
}

/// Spike events of one window, `(time_ms, neuron)` in time order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpikeRecord {
    pub events: Vec<(f64, u32)>,
    pub window_start: f64,
    pub window_end: f64,
}

impl SpikeRecord {
    pub fn duration(&self) -> f64 {
        self.window_end - self.window_start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutput {
    pub record: SpikeRecord,
    /// Sum over synapses of |w_end - w_start| for this window.
    pub sum_abs_dw: f64,
    pub steps: u64,
}

/// Runs `duration_ms` of simulation. STDP is applied after every step when
/// `learning` is set.
pub fn run_window(
    state: &mut NetworkState,
    stimulus: &Stimulus,
    duration_ms: f64,
    config: &SimConfig,
    learning: bool,
) -> Result<WindowOutput> {
    let mut events = Vec::new();
    let start = state.t_now();
    let before = learning.then(|| state.weights.clone());
    let steps = run_steps(state, stimulus, duration_ms, config, learning, |t, spikes| {
        events.extend(spikes.iter().map(|&s| (t, s)));
        true
    })?;
    let sum_abs_dw = match before {
        Some(b) => total_abs_change(&b, &state.weights),
        None => 0.0,
    };
    Ok(WindowOutput {
        record: SpikeRecord {
            events,
            window_start: start,
            window_end: start + steps as f64 * config.dt,
        },
        sum_abs_dw,
        steps,
    })
}

/// Step loop shared by full windows and early-stopping readouts. The observer
/// receives each step's start time and spikes and returns `false` to stop.
/// Returns the number of steps executed.
pub fn run_steps<F>(
    state: &mut NetworkState,
    stimulus: &Stimulus,
    duration_ms: f64,
    config: &SimConfig,
    learning: bool,
    mut observer: F,
) -> Result<u64>
where
    F: FnMut(f64, &[u32]) -> bool,
{
    state.check_dims(config)?;
    stimulus.validate(state.n)?;
    let total = config.steps_for(duration_ms)?;
    let n = state.n;
    let mut ext = vec![0.0; n];
    let mut spikes = Vec::with_capacity(n);
    let mut cursor = 0usize;
    let inv_dt = 1.0 / config.dt;
    let mut plastic = learning.then(|| LazyStdp::new(state, config));
    let mut executed = total;
    for k in 0..total {
        if stimulus.bias.is_empty() {
            ext.iter_mut().for_each(|x| *x = 0.0);
        } else {
            ext.copy_from_slice(&stimulus.bias);
        }
        while cursor < stimulus.pulses.len() && u64::from(stimulus.pulses[cursor].step) <= k {
            let p = stimulus.pulses[cursor];
            if u64::from(p.step) == k {
                ext[p.neuron as usize] += p.charge * inv_dt;
            }
            cursor += 1;
        }
        let t = state.t_now();
        step_into(state, &ext, config, &mut spikes);
        if let Some(p) = plastic.as_mut() {
            p.apply(state, &spikes, config);
        }
        if !observer(t, &spikes) {
            executed = k + 1;
            break;
        }
    }
    if let Some(p) = plastic.as_mut() {
        p.flush_all(state, config);
    }
    Ok(executed)
}

/// Row-deferred form of [`stdp_apply`].
///
/// Column potentiation is the strided access in the eager rule. Between two
/// spikes of presynaptic `r`, every change to row `r` is a potentiation
/// `a_plus * trace_pre[r] * decay^(k - f)`, so it is accumulated per
/// postsynaptic neuron as a geometric sum `s[j]` and folded into row `r` only
/// when that row is read (its neuron spikes) or at the end of the run. Upper
/// clamping commutes with a run of non-negative increments, so the result
/// equals the eager rule up to rounding.
struct LazyStdp {
    /// Per-post accumulated `decay^(k - base)` over its spikes since `base`.
    s: Vec<f64>,
    /// `s` as last folded into each row.
    snap: Vec<f64>,
    /// Per-row `a_plus * trace_pre * decay^-(f - base)` at the last fold `f`.
    coef: Vec<f64>,
    base: u64,
    log_decay: f64,
}

/// Keeps `decay^-(k - base)` within a few e-folds so `s - snap` stays precise.
const REBASE_EFOLDS: f64 = 6.0;

impl LazyStdp {
    fn new(state: &NetworkState, config: &SimConfig) -> Self {
        let n = state.n;
        LazyStdp {
            s: vec![0.0; n],
            snap: vec![0.0; n * n],
            coef: state.trace_pre.iter().map(|t| config.stdp.a_plus * t).collect(),
            base: state.step.wrapping_sub(1),
            log_decay: -config.dt / config.stdp.tau_plus,
        }
    }

    fn apply(&mut self, state: &mut NetworkState, spikes: &[u32], config: &SimConfig) {
        let n = state.n;
        let decay_pre = self.log_decay.exp();
        let decay_post = (-config.dt / config.stdp.tau_minus).exp();
        state.trace_pre.iter_mut().for_each(|x| *x *= decay_pre);
        state.trace_post.iter_mut().for_each(|x| *x *= decay_post);
        // `state.step` was already advanced past the current step.
        let k = state.step - 1;
        // `base` may sit one step before zero.
        let age = k.wrapping_sub(self.base) as f64;
        let (lo, hi) = (config.w_min, config.w_max);
        let a_minus = config.stdp.a_minus;

        if !spikes.is_empty() {
            for &r in spikes {
                let r = r as usize;
                let c = self.coef[r];
                let row = &mut state.weights[r * n..(r + 1) * n];
                let snap = &mut self.snap[r * n..(r + 1) * n];
                for (((w, sn), s), tp) in row
                    .iter_mut()
                    .zip(snap.iter_mut())
                    .zip(&self.s)
                    .zip(&state.trace_post)
                {
                    let up = (*w + c * (s - *sn)).min(hi);
                    *w = (up - a_minus * tp).clamp(lo, hi);
                    *sn = *s;
                }
                row[r] = 0.0;
            }
            let g = (self.log_decay * age).exp();
            for &j in spikes {
                self.s[j as usize] += g;
            }
            for &r in spikes {
                let r = r as usize;
                let c = self.coef[r];
                for &j in spikes {
                    let j = j as usize;
                    if j == r {
                        continue;
                    }
                    let idx = r * n + j;
                    state.weights[idx] = (state.weights[idx] + c * (self.s[j] - self.snap[idx])).min(hi);
                    self.snap[idx] = self.s[j];
                }
            }
            for &sp in spikes {
                state.trace_pre[sp as usize] += 1.0;
                state.trace_post[sp as usize] += 1.0;
            }
            let scale = config.stdp.a_plus * (-self.log_decay * age).exp();
            for &r in spikes {
                self.coef[r as usize] = scale * state.trace_pre[r as usize];
            }
        }

        if -self.log_decay * age > REBASE_EFOLDS {
            self.flush_all(state, config);
            self.base = k;
            self.s.iter_mut().for_each(|x| *x = 0.0);
            self.snap.iter_mut().for_each(|x| *x = 0.0);
            for (c, t) in self.coef.iter_mut().zip(&state.trace_pre) {
                *c = config.stdp.a_plus * t;
            }
        }
    }

    fn flush_all(&mut self, state: &mut NetworkState, config: &SimConfig) {
        let n = state.n;
        let hi = config.w_max;
        for r in 0..n {
            let c = self.coef[r];
            let row = &mut state.weights[r * n..(r + 1) * n];
            let snap = &mut self.snap[r * n..(r + 1) * n];
            for ((w, sn), s) in row.iter_mut().zip(snap.iter_mut()).zip(&self.s) {
                *w = (*w + c * (s - *sn)).min(hi);
                *sn = *s;
            }
            row[r] = 0.0;
        }
    }
}

pub fn total_abs_change(before: &[f64], after: &[f64]) -> f64 {
    before.iter().zip(after).map(|(a, b)| (a - b).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> SimConfig {
        SimConfig {
            n_neurons: n,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_neurons_is_config_error() {
        let err = init_network(&small(0)).unwrap_err();
        assert!(matches!(err, Error::Config { field: "n_neurons", .. }));
    }

    #[test]
    fn invalid_fields_are_named() {
        let mut c = small(4);
        c.v_reset = 2.0;
        assert!(matches!(c.validate(), Err(Error::Config { field: "v_reset", .. })));
        let mut c = small(4);
        c.dt = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config { field: "dt", .. })));
        let mut c = small(4);
        c.w_max = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config { field: "w_max", .. })));
    }

    #[test]
    fn same_seed_same_weights() {
        let a = init_network(&small(50)).unwrap();
        let b = init_network(&small(50)).unwrap();
        assert_eq!(a.weights, b.weights);
        let mut c = small(50);
        c.seed = 43;
        assert_ne!(a.weights, init_network(&c).unwrap().weights);
    }

    #[test]
    fn diagonal_is_zero() {
        let s = init_network(&small(30)).unwrap();
        for i in 0..30 {
            assert_eq!(s.weight(i, i), 0.0);
        }
    }

    #[test]
    fn rest_is_fixed_point() {
        let c = small(5);
        let mut s = init_network(&c).unwrap();
        let spikes = step(&mut s, &[0.0; 5], &c).unwrap();
        assert!(spikes.is_empty());
        assert!(s.v.iter().all(|&v| v == c.v_rest));
    }

    #[test]
    fn threshold_at_entry_spikes() {
        let c = small(3);
        let mut s = init_network(&c).unwrap();
        s.v[1] = c.v_thresh;
        let spikes = step(&mut s, &[0.0; 3], &c).unwrap();
        assert_eq!(spikes, vec![1]);
        assert_eq!(s.v[1], c.v_reset);
    }

    #[test]
    fn dimension_mismatch() {
        let c = small(3);
        let mut s = init_network(&c).unwrap();
        assert!(matches!(step(&mut s, &[0.0; 2], &c), Err(Error::Structure(_))));
        let other = small(4);
        assert!(matches!(step(&mut s, &[0.0; 4], &other), Err(Error::Structure(_))));
    }

    #[test]
    fn leak_decreases_toward_rest() {
        let c = small(2);
        let mut s = init_network(&c).unwrap();
        s.v = vec![0.8, 0.3];
        let mut prev = s.v.clone();
        for _ in 0..200 {
            step(&mut s, &[0.0; 2], &c).unwrap();
            for (a, b) in s.v.iter().zip(&prev) {
                assert!(a < b && *a > c.v_rest);
            }
            prev = s.v.clone();
        }
    }

    #[test]
    fn stimulus_out_of_range() {
        let c = small(4);
        let mut s = init_network(&c).unwrap();
        let stim = Stimulus {
            bias: vec![],
            pulses: vec![Pulse {
                step: 0,
                neuron: 4,
                charge: 1.0,
            }],
        };
        assert!(matches!(
            run_window(&mut s, &stim, 1.0, &c, false),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn window_step_count() {
        let c = small(3);
        let mut s = init_network(&c).unwrap();
        let out = run_window(&mut s, &Stimulus::default(), 1000.0, &c, false).unwrap();
        assert_eq!(out.steps, 10_000);
        assert_eq!(s.steps_elapsed(), 10_000);
        assert!(matches!(c.steps_for(0.05), Err(Error::Config { .. })));
    }

    #[test]
    fn potentiation_is_clamped() {
        let c = small(2);
        let mut s = init_network(&c).unwrap();
        s.weights[1] = c.w_max;
        s.trace_pre[0] = 1.0;
        stdp_apply(&mut s, &[1], &c);
        assert_eq!(s.weight(0, 1), c.w_max);
    }
}
