//! Neural anomaly detector, static-threshold IDS baseline, and the signed,
//! hash-chained synaptic update log.

use hmac::{Hmac, KeyInit, Mac};
use nalgebra::{Matrix3, Vector3};
use rand::seq::index;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::TamperLog;
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};
use crate::snn::NetworkState;
use crate::telemetry::{DatasetSample, WindowMetrics};

type HmacSha256 = Hmac<Sha256>;

fn features(m: &WindowMetrics) -> Vector3<f64> {
    Vector3::new(m.spike_frequency_hz, m.weight_change_pct, m.latency_ms)
}

/// Anything that flags a window.
pub trait Detector {
    fn flag(&self, m: &WindowMetrics) -> bool;
}

/// Gaussian model of normal windows scored by squared Mahalanobis distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyModel {
    pub mean: [f64; 3],
    /// Regularized covariance, row-major.
    pub covariance: [[f64; 3]; 3],
    pub threshold: f64,
    pub target_fpr: f64,
}

impl AnomalyModel {
    pub fn fit(normal: &[WindowMetrics], target_fpr: f64) -> Result<Self> {
        if normal.len() < 30 {
            return Err(Error::Fit(format!("need at least 30 normal windows, got {}", normal.len())));
        }
        if !(target_fpr > 0.0 && target_fpr < 1.0) {
            return Err(Error::config("target_fpr", "must lie in (0, 1)"));
        }
        let xs: Vec<Vector3<f64>> = normal.iter().map(features).collect();
        let n = xs.len() as f64;
        let mu = xs.iter().fold(Vector3::zeros(), |a, x| a + x) / n;
        let mut cov = xs.iter().fold(Matrix3::zeros(), |a, x| {
            let d = x - mu;
            a + d * d.transpose()
        }) / (n - 1.0);
        let eps = 1e-6 * cov.trace() / 3.0;
        for k in 0..3 {
            cov[(k, k)] += eps;
        }
        if !(cov.trace() > 0.0) || cov.cholesky().is_none() {
            return Err(Error::Fit("covariance is degenerate".into()));
        }
        let mut model = AnomalyModel {
            mean: [mu[0], mu[1], mu[2]],
            covariance: [
                [cov[(0, 0)], cov[(0, 1)], cov[(0, 2)]],
                [cov[(1, 0)], cov[(1, 1)], cov[(1, 2)]],
                [cov[(2, 0)], cov[(2, 1)], cov[(2, 2)]],
            ],
            threshold: 0.0,
            target_fpr,
        };
        let mut scores: Vec<f64> = normal.iter().map(|m| model.score(m)).collect();
        scores.sort_by(f64::total_cmp);
        let k = ((1.0 - target_fpr) * scores.len() as f64).ceil() as usize;
        model.threshold = scores[k.clamp(1, scores.len()) - 1];
        if !(model.threshold > 0.0) {
            return Err(Error::Fit("threshold is not positive".into()));
        }
        Ok(model)
    }

    fn cov(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.covariance[r][c])
    }

    /// Squared Mahalanobis distance to the normal mean.
    pub fn score(&self, m: &WindowMetrics) -> f64 {
        let d = features(m) - Vector3::from(self.mean);
        match self.cov().cholesky() {
            Some(ch) => d.dot(&ch.solve(&d)),
            None => f64::INFINITY,
        }
    }

    pub fn detect(&self, m: &WindowMetrics) -> (f64, bool) {
        let s = self.score(m);
        (s, s > self.threshold)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: AnomalyModel = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if m.cov().cholesky().is_none() || !(m.threshold > 0.0) {
            return Err(Error::Fit("stored model is not positive definite".into()));
        }
        Ok(m)
    }
}

impl Detector for AnomalyModel {
    fn flag(&self, m: &WindowMetrics) -> bool {
        self.detect(m).1
    }
}

/// Static per-feature bounds; `None` leaves a feature unchecked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsRuleSet {
    pub spike_frequency_hz: Option<(f64, f64)>,
    pub weight_change_pct: Option<(f64, f64)>,
    pub latency_ms: Option<(f64, f64)>,
}

/// Which observables the IDS baseline watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdsFeatures {
    pub spike_frequency: bool,
    pub weight_change: bool,
    pub latency: bool,
}

impl Default for IdsFeatures {
    fn default() -> Self {
        IdsFeatures {
            spike_frequency: true,
            weight_change: false,
            latency: true,
        }
    }
}

impl IdsRuleSet {
    /// Mean ± `k` standard deviations of a pre-study of normal windows.
    pub fn from_prestudy(normal: &[WindowMetrics], k: f64, watch: IdsFeatures) -> Result<Self> {
        if normal.len() < 2 {
            return Err(Error::Usage("pre-study needs at least two windows".into()));
        }
        let bounds = |f: fn(&WindowMetrics) -> f64| -> Result<(f64, f64)> {
            let xs: Vec<f64> = normal.iter().map(f).collect();
            let m = crate::telemetry::mean(&xs);
            let sd = crate::telemetry::sample_var(&xs).sqrt();
            if !(sd > 0.0) {
                return Err(Error::Fit("pre-study feature has zero spread".into()));
            }
            Ok((m - k * sd, m + k * sd))
        };
        Ok(IdsRuleSet {
            spike_frequency_hz: watch.spike_frequency.then(|| bounds(|m| m.spike_frequency_hz)).transpose()?,
            weight_change_pct: watch.weight_change.then(|| bounds(|m| m.weight_change_pct)).transpose()?,
            latency_ms: watch.latency.then(|| bounds(|m| m.latency_ms)).transpose()?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in [
            ("spike_frequency_hz", self.spike_frequency_hz),
            ("weight_change_pct", self.weight_change_pct),
            ("latency_ms", self.latency_ms),
        ] {
            if let Some((lo, hi)) = b {
                if !(lo < hi) {
                    return Err(Error::config("ids", format!("{name}: min must be below max")));
                }
            }
        }
        Ok(())
    }
}

pub fn ids_detect(rules: &IdsRuleSet, m: &WindowMetrics) -> bool {
    let out = |b: Option<(f64, f64)>, x: f64| b.is_some_and(|(lo, hi)| x < lo || x > hi);
    out(rules.spike_frequency_hz, m.spike_frequency_hz)
        || out(rules.weight_change_pct, m.weight_change_pct)
        || out(rules.latency_ms, m.latency_ms)
}

impl Detector for IdsRuleSet {
    fn flag(&self, m: &WindowMetrics) -> bool {
        ids_detect(self, m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Score cutoff; `None` is the point above every score.
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorEval {
    pub detection_pct: f64,
    pub false_positive_pct: f64,
    /// Detection rate per attack type, in `AttackType` order.
    pub per_attack_pct: Vec<(String, f64)>,
    pub roc: Vec<RocPoint>,
}

fn check_two_classes(rows: &[DatasetSample]) -> Result<()> {
    if !rows.iter().any(|r| r.is_attack()) || rows.iter().all(|r| r.is_attack()) {
        return Err(Error::Usage("evaluation needs both normal and attack windows".into()));
    }
    Ok(())
}

pub fn evaluate_detector<D: Detector + ?Sized>(detector: &D, rows: &[DatasetSample]) -> Result<DetectorEval> {
    check_two_classes(rows)?;
    let rate = |sel: &dyn Fn(&DatasetSample) -> bool| {
        let v: Vec<&DatasetSample> = rows.iter().filter(|r| sel(r)).collect();
        if v.is_empty() {
            return None;
        }
        Some(100.0 * v.iter().filter(|r| detector.flag(&r.metrics)).count() as f64 / v.len() as f64)
    };
    let mut per_attack = Vec::new();
    for t in [crate::telemetry::AttackType::WeightTamper, crate::telemetry::AttackType::InputPoison] {
        if let Some(p) = rate(&|r: &DatasetSample| r.attack_type == t) {
            per_attack.push((t.as_str().to_string(), p));
        }
    }
    Ok(DetectorEval {
        detection_pct: rate(&|r: &DatasetSample| r.is_attack()).unwrap_or(0.0),
        false_positive_pct: rate(&|r: &DatasetSample| !r.is_attack()).unwrap_or(0.0),
        per_attack_pct: per_attack,
        roc: Vec::new(),
    })
}

/// Detection rates plus a ROC curve from sweeping the anomaly threshold over
/// every observed score.
pub fn evaluate_anomaly(model: &AnomalyModel, rows: &[DatasetSample]) -> Result<DetectorEval> {
    let mut eval = evaluate_detector(model, rows)?;
    let mut scored: Vec<(f64, bool)> = rows.iter().map(|r| (model.score(&r.metrics), r.is_attack())).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let pos = scored.iter().filter(|s| s.1).count() as f64;
    let neg = scored.len() as f64 - pos;
    let mut roc = vec![RocPoint {
        threshold: None,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut k = 0;
    while k < scored.len() {
        let thr = scored[k].0;
        while k < scored.len() && scored[k].0 == thr {
            if scored[k].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            k += 1;
        }
        // Flagging is strict, so this point corresponds to a cutoff just below `thr`.
        roc.push(RocPoint {
            threshold: Some(thr),
            fpr: fp / neg,
            tpr: tp / pos,
        });
    }
    eval.roc = roc;
    Ok(eval)
}

/// Area under a ROC curve by the trapezoid rule.
pub fn roc_auc(roc: &[RocPoint]) -> f64 {
    roc.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

/// Who produced a weight update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Stdp,
    External,
}

impl Origin {
    fn byte(self) -> u8 {
        match self {
            Origin::Stdp => 0,
            Origin::External => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Origin::Stdp),
            1 => Ok(Origin::External),
            _ => Err(Error::Log(format!("unknown origin byte {b}"))),
        }
    }
}

/// An unsigned weight update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Update {
    pub i: u32,
    pub j: u32,
    pub delta_w: f64,
    pub t_sim: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub seq: u64,
    pub i: u32,
    pub j: u32,
    pub delta_w: f64,
    pub t_sim: f64,
    pub origin: Origin,
    pub prev_hash: [u8; 32],
    pub mac: [u8; 32],
}

/// Serialized record size, excluding the length prefix.
pub const RECORD_LEN: usize = 8 + 4 + 4 + 8 + 8 + 1 + 32 + 32;
pub const LOG_MAGIC: &[u8; 8] = b"NMSLOG01";

impl UpdateRecord {
    fn body(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(RECORD_LEN - 32);
        b.extend_from_slice(&self.seq.to_le_bytes());
        b.extend_from_slice(&self.i.to_le_bytes());
        b.extend_from_slice(&self.j.to_le_bytes());
        b.extend_from_slice(&self.delta_w.to_le_bytes());
        b.extend_from_slice(&self.t_sim.to_le_bytes());
        b.push(self.origin.byte());
        b.extend_from_slice(&self.prev_hash);
        b
    }

    pub fn to_bytes(&self) -> [u8; RECORD_LEN] {
        let mut out = [0u8; RECORD_LEN];
        let body = self.body();
        out[..body.len()].copy_from_slice(&body);
        out[body.len()..].copy_from_slice(&self.mac);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() != RECORD_LEN {
            return Err(Error::Log(format!("record is {} bytes, expected {RECORD_LEN}", b.len())));
        }
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let mut prev_hash = [0u8; 32];
        prev_hash.copy_from_slice(&b[33..65]);
        let mut mac = [0u8; 32];
        mac.copy_from_slice(&b[65..97]);
        Ok(UpdateRecord {
            seq: u64_at(0),
            i: u32_at(8),
            j: u32_at(12),
            delta_w: f64::from_bits(u64_at(16)),
            t_sim: f64::from_bits(u64_at(24)),
            origin: Origin::from_byte(b[32])?,
            prev_hash,
            mac,
        })
    }

    fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_bytes()).into()
    }
}

fn mac_for(key: &[u8], body: &[u8]) -> [u8; 32] {
    let mut m = <HmacSha256 as KeyInit>::new_from_slice(key).expect("HMAC accepts any key length");
    m.update(body);
    m.finalize().into_bytes().into()
}

/// Session key for the signer, derived from a root seed.
pub fn session_key(root: u64) -> [u8; 32] {
    let mut k = [0u8; 32];
    rng_for(root, Stream::Key, 0).fill_bytes(&mut k);
    k
}

/// Append-only, hash-chained update log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SecureLog {
    records: Vec<UpdateRecord>,
}

impl SecureLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[UpdateRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn next_link(&self) -> (u64, [u8; 32]) {
        match self.records.last() {
            Some(r) => (r.seq + 1, r.hash()),
            None => (0, [0u8; 32]),
        }
    }

    fn push(&mut self, u: &Update, key: Option<&[u8]>) -> &UpdateRecord {
        let (seq, prev_hash) = self.next_link();
        let mut r = UpdateRecord {
            seq,
            i: u.i,
            j: u.j,
            delta_w: u.delta_w,
            t_sim: u.t_sim,
            origin: u.origin,
            prev_hash,
            mac: [0u8; 32],
        };
        r.mac = match key {
            Some(k) => mac_for(k, &r.body()),
            // Without the key the writer can chain correctly but cannot tag.
            None => Sha256::digest(r.body()).into(),
        };
        self.records.push(r);
        self.records.last().expect("just pushed")
    }

    /// Signs and appends an update.
    pub fn append(&mut self, update: &Update, key: &[u8]) -> &UpdateRecord {
        self.push(update, Some(key))
    }

    /// Appends a write from a party without the session key.
    pub fn append_unkeyed(&mut self, update: &Update) -> &UpdateRecord {
        self.push(update, None)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(LOG_MAGIC.len() + self.records.len() * (RECORD_LEN + 4));
        out.extend_from_slice(LOG_MAGIC);
        for r in &self.records {
            out.extend_from_slice(&(RECORD_LEN as u32).to_le_bytes());
            out.extend_from_slice(&r.to_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < LOG_MAGIC.len() || &b[..LOG_MAGIC.len()] != LOG_MAGIC {
            return Err(Error::Log("missing log header".into()));
        }
        let mut off = LOG_MAGIC.len();
        let mut records = Vec::new();
        while off < b.len() {
            if b.len() - off < 4 {
                return Err(Error::Log(format!("truncated length prefix at byte {off}")));
            }
            let len = u32::from_le_bytes(b[off..off + 4].try_into().unwrap()) as usize;
            off += 4;
            if len != RECORD_LEN || b.len() - off < len {
                return Err(Error::Log(format!("bad record length {len} at byte {}", off - 4)));
            }
            records.push(UpdateRecord::from_bytes(&b[off..off + len])?);
            off += len;
        }
        Ok(SecureLog { records })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    BadMac,
    BrokenChain,
    /// Accepted on its own but follows a broken link.
    AfterBreak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub seq: u64,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub accepted: Vec<usize>,
    pub rejected: Vec<Rejection>,
    pub alarm: bool,
}

impl VerifyOutcome {
    pub fn first_rejected(&self) -> Option<&Rejection> {
        self.rejected.first()
    }
}

/// Replays the chain. A bad tag rejects only that record; a broken hash link
/// or sequence gap rejects that record and everything after it.
pub fn verify_log(log: &SecureLog, key: &[u8]) -> VerifyOutcome {
    let mut out = VerifyOutcome::default();
    let mut expect_seq = 0u64;
    let mut expect_prev = [0u8; 32];
    let mut broken = false;
    for (k, r) in log.records.iter().enumerate() {
        if broken {
            out.rejected.push(Rejection {
                index: k,
                seq: r.seq,
                reason: RejectReason::AfterBreak,
            });
            continue;
        }
        if r.seq != expect_seq || r.prev_hash != expect_prev {
            broken = true;
            out.rejected.push(Rejection {
                index: k,
                seq: r.seq,
                reason: RejectReason::BrokenChain,
            });
            continue;
        }
        let tag = mac_for(key, &r.body());
        if tag == r.mac {
            out.accepted.push(k);
        } else {
            out.rejected.push(Rejection {
                index: k,
                seq: r.seq,
                reason: RejectReason::BadMac,
            });
        }
        expect_seq = r.seq + 1;
        expect_prev = r.hash();
    }
    out.alarm = !out.rejected.is_empty();
    out
}

/// Applies only verified updates, clamped to the weight bounds.
pub fn secure_verify_and_apply(
    state: &mut NetworkState,
    log: &SecureLog,
    key: &[u8],
    w_min: f64,
    w_max: f64,
) -> Result<VerifyOutcome> {
    let n = state.n();
    if let Some(r) = log.records.iter().find(|r| r.i as usize >= n || r.j as usize >= n || r.i == r.j) {
        return Err(Error::Structure(format!("record {} addresses synapse {}->{} outside the network", r.seq, r.i, r.j)));
    }
    let out = verify_log(log, key);
    for &k in &out.accepted {
        let r = &log.records[k];
        let (i, j) = (r.i as usize, r.j as usize);
        state.set_weight(i, j, (state.weight(i, j) + r.delta_w).clamp(w_min, w_max));
    }
    Ok(out)
}

/// Routes a tamper log through the update path. A `presign_fraction` of the
/// writes is injected upstream of the signer and so carries valid tags; the
/// rest arrive unkeyed.
pub fn tamper_to_log(tamper: &TamperLog, key: &[u8], presign_fraction: f64, seed: u64) -> Result<SecureLog> {
    if !(0.0..=1.0).contains(&presign_fraction) {
        return Err(Error::config("presign_fraction", "must lie in [0, 1]"));
    }
    let n = tamper.entries.len();
    let k = (presign_fraction * n as f64).floor() as usize;
    let mut signed = vec![false; n];
    for x in index::sample(&mut rng_for(seed, Stream::Attack, 1), n, k) {
        signed[x] = true;
    }
    let mut log = SecureLog::new();
    for (e, s) in tamper.entries.iter().zip(signed) {
        let u = Update {
            i: e.pre,
            j: e.post,
            delta_w: e.new - e.old,
            t_sim: e.t_ms,
            origin: Origin::External,
        };
        if s {
            log.append(&u, key);
        } else {
            log.append_unkeyed(&u);
        }
    }
    Ok(log)
}

/// Signs every synapse that moved between `before` and `after` as an
/// in-band STDP update.
pub fn log_weight_diff(log: &mut SecureLog, before: &NetworkState, after: &NetworkState, key: &[u8]) -> usize {
    let n = before.n();
    let t = after.t_now();
    let mut count = 0;
    for i in 0..n {
        for j in 0..n {
            let d = after.weight(i, j) - before.weight(i, j);
            if i != j && d != 0.0 {
                log.append(
                    &Update {
                        i: i as u32,
                        j: j as u32,
                        delta_w: d,
                        t_sim: t,
                        origin: Origin::Stdp,
                    },
                    key,
                );
                count += 1;
            }
        }
    }
    count
}
