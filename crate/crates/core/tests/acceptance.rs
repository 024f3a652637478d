//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1-7 run on the desk profile. Criteria 8-12 need the full profile
//! and run only with `--ignored` or `--include-ignored`, like ignored tests.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::oracle;
use neuromimic::attacks::{AttackKind, TamperEntry, TamperLog};
use neuromimic::defenses::{self, Origin, SecureLog, Update, LOG_MAGIC, RECORD_LEN};
use neuromimic::harness::{self, run_experiment, ExperimentConfig, ExperimentReport, Profile, Table, ANOMALY, IDS};
use neuromimic::snn::{init_network, run_window, Pulse, SimConfig, StdpParams, Stimulus};
use neuromimic::telemetry::{read_dataset_csv, welch_t_test, write_dataset_csv, DatasetSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    name: String,
    ok: bool,
    detail: String,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn check(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            ok,
            detail: detail.into(),
        });
    }

    /// `value` within `target ± tol`.
    fn band(&mut self, name: &str, value: Option<f64>, target: f64, tol: f64) {
        match value {
            Some(v) => self.check(name, (v - target).abs() <= tol, format!("{v:.3} (want {target} ± {tol})")),
            None => self.check(name, false, format!("missing (want {target} ± {tol})")),
        }
    }

    fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

fn report(id: u32, title: &str, c: &Criterion) -> bool {
    let verdict = if c.ok() { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {verdict}  {title}");
    for k in &c.checks {
        println!("    [{}] {}: {}", if k.ok { "ok" } else { "x" }, k.name, k.detail);
    }
    c.ok()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn lif_oracle() -> Criterion {
    let mut c = Criterion::default();
    for current in [0.06, 0.08, 0.1, 0.2, 0.5, 1.0] {
        let cfg = SimConfig {
            n_neurons: 1,
            syn_gain: 0.0,
            ..SimConfig::default()
        };
        let mut net = init_network(&cfg).unwrap();
        let stim = Stimulus {
            bias: vec![current],
            pulses: vec![],
        };
        let out = run_window(&mut net, &stim, 2000.0, &cfg, false).unwrap();
        let t: Vec<f64> = out.record.events.iter().map(|e| e.0).collect();
        let period = (t[t.len() - 1] - t[1]) / (t.len() - 2) as f64;
        let expected = oracle::lif_period(&cfg, current);
        let err = (period - expected).abs();
        c.check(
            format!("I = {current}"),
            err <= cfg.dt,
            format!("period {period:.4} ms, closed form {expected:.4} ms, |diff| {err:.4} <= dt {}", cfg.dt),
        );
    }
    c
}

fn stdp_oracle() -> Criterion {
    let mut c = Criterion::default();
    let cfg = SimConfig {
        n_neurons: 2,
        syn_gain: 0.0,
        stdp: StdpParams {
            a_plus: 0.013,
            a_minus: 0.011,
            tau_plus: 17.0,
            tau_minus: 23.0,
        },
        ..SimConfig::default()
    };
    let mut worst: f64 = 0.0;
    for gap in [1u32, 5, 20, 100, 300] {
        let stim = Stimulus {
            bias: vec![],
            pulses: vec![
                Pulse {
                    step: 5,
                    neuron: 0,
                    charge: 2.0,
                },
                Pulse {
                    step: 5 + gap,
                    neuron: 1,
                    charge: 2.0,
                },
            ],
        };
        let mut net = init_network(&cfg).unwrap();
        net.set_weight(0, 1, 0.5);
        net.set_weight(1, 0, 0.5);
        run_window(&mut net, &stim, f64::from(gap + 10) * cfg.dt, &cfg, true).unwrap();
        let dt_ms = f64::from(gap) * cfg.dt;
        let ltp = cfg.stdp.a_plus * (-dt_ms / cfg.stdp.tau_plus).exp();
        let ltd = cfg.stdp.a_minus * (-dt_ms / cfg.stdp.tau_minus).exp();
        worst = worst.max(rel_err(net.weight(0, 1) - 0.5, ltp)).max(rel_err(0.5 - net.weight(1, 0), ltd));
    }
    c.check("pair window", worst <= 1e-9, format!("max relative error {worst:.2e} <= 1e-9"));

    let cfg = SimConfig {
        n_neurons: 6,
        syn_gain: 0.3,
        seed: 99,
        stdp: StdpParams {
            a_plus: 0.2,
            a_minus: 0.25,
            tau_plus: 20.0,
            tau_minus: 20.0,
        },
        ..SimConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = init_network(&cfg).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..10 {
        let chunk = 100_000u32;
        let mut pulses = Vec::new();
        for step in 0..chunk {
            for neuron in 0..6u32 {
                if rng.random::<f64>() < 0.02 {
                    pulses.push(Pulse {
                        step,
                        neuron,
                        charge: 1.5 * rng.random::<f64>(),
                    });
                }
            }
        }
        let stim = Stimulus { bias: vec![], pulses };
        run_window(&mut net, &stim, f64::from(chunk) * cfg.dt, &cfg, true).unwrap();
        for w in &net.weights {
            lo = lo.min(*w);
            hi = hi.max(*w);
        }
    }
    c.check(
        "bounds",
        lo >= 0.0 && hi <= 1.0,
        format!("{} steps, weights stayed in [{lo}, {hi}]", net.steps_elapsed()),
    );
    c
}

fn welch_oracle() -> Criterion {
    let mut c = Criterion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut antisym) = (0.0f64, true);
    for _ in 0..20 {
        let na = rng.random_range(2..10);
        let nb = rng.random_range(2..10);
        let shift = rng.random_range(-2.0..2.0);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..5.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| shift + rng.random_range(0.0..5.0)).collect();
        let got = welch_t_test(&a, &b).unwrap();
        let (t, df, p) = oracle::textbook_welch(&a, &b);
        worst = worst.max(rel_err(got.t, t)).max(rel_err(got.df, df)).max(rel_err(got.p, p));
        let rev = welch_t_test(&b, &a).unwrap();
        antisym &= rev.t == -got.t && rev.p == got.p;
    }
    c.check("20 arrays", worst <= 1e-9, format!("max relative error in t, df, p {worst:.2e} <= 1e-9"));
    c.check("antisymmetry", antisym, "t(a,b) = -t(b,a)");
    c
}

fn secure_log() -> Criterion {
    let mut c = Criterion::default();
    let key = defenses::session_key(7);
    let tamper = TamperLog {
        entries: (0..500u32)
            .map(|k| TamperEntry {
                pre: k % 50,
                post: k % 50 + 1,
                old: 0.4,
                new: 0.5,
                t_ms: 0.0,
            })
            .collect(),
    };
    let log = defenses::tamper_to_log(&tamper, &key, 0.0, 1).unwrap();
    let v = defenses::verify_log(&log, &key);
    c.check(
        "unkeyed writes",
        v.accepted.is_empty() && v.rejected.len() == 500,
        format!("{} of 500 rejected", v.rejected.len()),
    );

    let mut signed = SecureLog::new();
    for k in 0..40u32 {
        let u = Update {
            i: k,
            j: k + 1,
            delta_w: 0.001 * f64::from(k),
            t_sim: f64::from(k),
            origin: Origin::Stdp,
        };
        signed.append(&u, &key);
    }
    let bytes = signed.to_bytes();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 5000;
    let mut caught = 0;
    for _ in 0..trials {
        let at = rng.random_range(0..bytes.len());
        let mut m = bytes.clone();
        m[at] ^= 1 << rng.random_range(0..8);
        let detected = match SecureLog::from_bytes(&m) {
            Err(_) => true,
            Ok(l) => {
                let rec = (at.saturating_sub(LOG_MAGIC.len())) / (4 + RECORD_LEN);
                defenses::verify_log(&l, &key).first_rejected().is_some_and(|r| r.index <= rec)
            }
        };
        caught += usize::from(detected);
    }
    c.check(
        "single-bit mutations",
        caught == trials,
        format!("{caught} of {trials} random flips detected at or before the mutated record"),
    );
    c
}

fn csv_round_trip(report: &ExperimentReport, rows: &[DatasetSample]) -> Criterion {
    let mut c = Criterion::default();
    let mut buf = Vec::new();
    write_dataset_csv(rows, &mut buf).unwrap();
    let back = read_dataset_csv(buf.as_slice()).unwrap();
    c.check("dataset", back == rows, format!("{} rows", rows.len()));
    let mut tables = vec![
        harness::table1(report),
        harness::table2(report),
        harness::fig1_table(report),
        harness::fig3_table(report),
        harness::fig4_table(report),
    ];
    tables.extend(harness::table3(report));
    for t in tables {
        let text = t.to_csv().unwrap();
        let same = Table::from_csv(&t.name, &text).is_ok_and(|b| b == t && b.to_csv().unwrap() == text);
        c.check(t.name.clone(), same, format!("{} rows", t.rows.len()));
    }
    c
}

fn orderings(r: &ExperimentReport) -> Criterion {
    let mut c = Criterion::default();
    let det = |n: &str| r.detector(n).map(|d| d.detection_pct);
    match (det(ANOMALY), det(IDS)) {
        (Some(a), Some(i)) => c.check("anomaly > IDS", a > i, format!("{a:.2}% vs {i:.2}%")),
        _ => c.check("anomaly > IDS", false, "detector missing"),
    }
    let s = r.secure.as_ref();
    match (s.and_then(|s| s.residual_tamper_pct), s.and_then(|s| s.residual_poison_pct)) {
        (Some(t), Some(p)) => c.check("secure residual tamper < poison", t < p, format!("{t:.2}% vs {p:.2}%")),
        _ => c.check("secure residual tamper < poison", false, "secure summary missing"),
    }
    for kind in [AttackKind::WeightTamper, AttackKind::InputPoison] {
        let name = format!("{} latency > clean", kind.as_str());
        match r.attack(kind) {
            Some(a) => c.check(
                name,
                a.latency_mean_ms > r.clean.mean_latency_ms,
                format!("{:.3} ms vs {:.3} ms", a.latency_mean_ms, r.clean.mean_latency_ms),
            ),
            None => c.check(name, false, "attack missing"),
        }
    }
    c
}

fn desk() -> bool {
    let cfg = ExperimentConfig::profile(Profile::Desk);
    let t0 = Instant::now();
    let (r1, rows1) = run_experiment(&cfg, Some(1)).expect("desk experiment");
    let (r4, rows4) = run_experiment(&cfg, Some(4)).expect("desk experiment");
    let (j1, j4) = (r1.to_json().unwrap(), r4.to_json().unwrap());
    println!("desk profile: two experiments in {:.0} s", t0.elapsed().as_secs_f64());

    let mut det = Criterion::default();
    det.check("report.json, jobs 1 vs 4", j1 == j4, format!("{} bytes, config {}", j1.len(), &r1.provenance.config_hash[..12]));
    det.check("dataset, jobs 1 vs 4", rows1 == rows4, format!("{} rows", rows1.len()));

    let mut all = true;
    all &= report(1, "determinism across runs and --jobs", &det);
    all &= report(2, "LIF firing period vs closed form", &lif_oracle());
    all &= report(3, "STDP pair oracle and weight bounds", &stdp_oracle());
    all &= report(4, "Welch t-test vs textbook formula", &welch_oracle());
    all &= report(5, "secure log rejects forgeries and mutations", &secure_log());
    all &= report(6, "CSV round trips", &csv_round_trip(&r1, &rows1));
    all &= report(7, "ordering properties (desk)", &orderings(&r1));
    all
}

fn full() -> bool {
    let mut cfg = ExperimentConfig::profile(Profile::Full);
    // The accuracy band is checked below instead of aborting the run.
    cfg.calibration.enforce_accuracy_band = false;
    let t0 = Instant::now();
    let (r, _) = run_experiment(&cfg, None).expect("full experiment");
    println!("full profile: experiment in {:.0} s", t0.elapsed().as_secs_f64());
    let stats = |name: &str| r.dataset.stats.get(name);

    let mut c8 = Criterion::default();
    c8.band("normal spike frequency (Hz)", stats("normal").map(|s| s.spike_frequency_hz.mean), 50.0, 10.0);
    c8.band("normal weight change (%)", stats("normal").map(|s| s.weight_change_pct.mean), 0.5, 0.1);
    c8.band("normal latency (ms)", stats("normal").map(|s| s.latency_ms.mean), 10.0, 2.0);
    c8.band("attack spike frequency (Hz)", stats("attack").map(|s| s.spike_frequency_hz.mean), 55.0, 12.0);
    c8.band("tamper weight change (%)", stats("weight_tamper").map(|s| s.weight_change_pct.mean), 1.2, 0.3);
    c8.band("attack latency (ms)", stats("attack").map(|s| s.latency_ms.mean), 12.0, 3.0);
    for w in &r.dataset.welch {
        match w.p {
            Some(p) => c8.check(format!("Welch p, {}", w.metric), p < 0.05, format!("{p:.3e} < 0.05")),
            None => c8.check(format!("Welch p, {}", w.metric), false, "undefined"),
        }
    }

    let mut c9 = Criterion::default();
    c9.band("clean accuracy (%)", Some(r.clean.accuracy_pct), 95.0, 1.0);
    c9.band("tamper accuracy (%)", r.attack(AttackKind::WeightTamper).map(|a| a.accuracy_mean_pct), 90.2, 1.5);
    c9.band("poison accuracy (%)", r.attack(AttackKind::InputPoison).map(|a| a.accuracy_mean_pct), 90.8, 1.3);
    let var = |name: &str| stats(name).map(|s| s.spike_variance_hz2);
    c9.band("normal spike variance (Hz^2)", var("normal"), 5.0, 2.0);
    c9.band("tamper spike variance (Hz^2)", var("weight_tamper"), 7.0, 2.0);
    c9.band("poison spike variance (Hz^2)", var("input_poison"), 8.0, 2.0);
    match (var("normal"), var("weight_tamper"), var("input_poison")) {
        (Some(n), Some(t), Some(p)) => c9.check("variance ordering", n < t && t < p, format!("{n:.3} < {t:.3} < {p:.3}")),
        _ => c9.check("variance ordering", false, "missing condition"),
    }

    let mut c10 = Criterion::default();
    c10.band("tamper success (%)", r.attack(AttackKind::WeightTamper).map(|a| a.success_pct), 92.0, 5.0);
    c10.band("poison success (%)", r.attack(AttackKind::InputPoison).map(|a| a.success_pct), 87.0, 5.0);

    let mut c11 = Criterion::default();
    let anomaly = r.detector(ANOMALY);
    c11.band("anomaly detection (%)", anomaly.map(|d| d.detection_pct), 85.0, 5.0);
    match anomaly {
        Some(d) => c11.check("anomaly FPR", d.false_positive_pct <= 10.0, format!("{:.3}% <= 10%", d.false_positive_pct)),
        None => c11.check("anomaly FPR", false, "detector missing"),
    }
    c11.band("IDS detection (%)", r.detector(IDS).map(|d| d.detection_pct), 15.0, 4.0);
    c11.band("secure residual tamper (%)", r.secure.as_ref().and_then(|s| s.residual_tamper_pct), 45.0, 5.0);
    c11.band("secure residual poison (%)", r.secure.as_ref().and_then(|s| s.residual_poison_pct), 70.0, 5.0);

    let mut c12 = Criterion::default();
    let li = r.latency_impact.as_ref();
    c12.band("tamper latency increase (%)", li.map(|l| l.tamper_pct), 25.0, 5.0);
    c12.band("poison latency increase (%)", li.map(|l| l.poison_pct), 15.0, 5.0);
    c12.band("pooled latency increase (%)", li.map(|l| l.pooled_pct), 20.0, 5.0);

    let mut all = true;
    all &= report(8, "Table I bands (full)", &c8);
    all &= report(9, "Table II bands (full)", &c9);
    all &= report(10, "attack success bands (full)", &c10);
    all &= report(11, "Table III bands (full)", &c11);
    all &= report(12, "latency impact bands (full)", &c12);
    all
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    // Respect a name filter the way libtest would.
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    if !filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str())) {
        return ExitCode::SUCCESS;
    }
    let ignored_only = args.iter().any(|a| a == "--ignored");
    let with_full = ignored_only || args.iter().any(|a| a == "--include-ignored");

    let mut ok = true;
    if !ignored_only {
        ok &= desk();
    }
    if with_full {
        ok &= full();
    } else {
        println!("criteria 8-12 skipped: rerun with --include-ignored for the full profile");
    }
    println!("acceptance: {}", if ok { "PASS" } else { "FAIL" });
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
