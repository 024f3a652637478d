use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use neuromimic::attacks::{self, AttackKind, ReadoutTarget};
use neuromimic::defenses::{self, SecureLog};
use neuromimic::harness::{self, ExperimentConfig, ExperimentReport, Format, Profile};
use neuromimic::rng::{derive_seed, Stream};
use neuromimic::telemetry;
use neuromimic::Error;

#[derive(Parser)]
#[command(name = "neuromimic", version, about = "Neuromorphic mimicry attack workbench")]
struct Cli {
    /// Experiment config (TOML), layered over the profile defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Comma-separated report formats: csv, markdown, json, plotdata.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Vec<String>,
    #[arg(long, global = true, value_enum, default_value_t = ProfileArg::Desk)]
    profile: ProfileArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Tamper,
    Poison,
}

#[derive(Subcommand)]
enum Command {
    /// Tune the clean network into its target bands.
    Calibrate,
    /// Generate the labelled telemetry dataset.
    GenDataset,
    /// Run a single attack scenario.
    Attack {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 0)]
        id: u64,
    },
    /// Run the full experiment protocol.
    Experiment,
    /// Re-emit report files from a saved report.json.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
    /// Audit a binary secure update log.
    VerifyLog {
        #[arg(long)]
        log: PathBuf,
        /// Hex session key; derived from the root seed when absent.
        #[arg(long)]
        key: Option<String>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
    Acceptance(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(_) | Error::Config { .. } | Error::Parse(_) => Failure::Usage(e.to_string()),
            Error::Calibration(_) => Failure::Acceptance(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance(m)) => {
            eprintln!("failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let profile = match cli.profile {
        ProfileArg::Desk => Profile::Desk,
        ProfileArg::Full => Profile::Full,
    };
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_toml(&text, profile)?
        }
        None => ExperimentConfig::profile(profile),
    };
    if let Some(s) = cli.seed {
        cfg.root_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn formats(cli: &Cli) -> Result<Vec<Format>, Failure> {
    if cli.format.is_empty() {
        return Ok(harness::ALL_FORMATS.to_vec());
    }
    cli.format.iter().map(|f| f.parse::<Format>().map_err(Failure::from)).collect()
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn json<T: serde::Serialize>(x: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(x).map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Calibrate => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cfg)?;
            let (tuned, report) = harness::calibrate(&cfg, cli.jobs)?;
            write(&dir.join("calibrated.toml"), tuned.to_toml()?)?;
            write(&dir.join("calibration.json"), json(&report)?)?;
            let table = report.table();
            write(&dir.join("calibration.csv"), table.to_csv()?)?;
            print!("{}", table.to_markdown());
            println!("evaluations after the first: {}", report.iterations);
            if !report.met {
                let unmet: Vec<&str> = report.checks.iter().filter(|c| !c.met).map(|c| c.metric.as_str()).collect();
                return Err(Failure::Acceptance(format!("bands not met: {}", unmet.join(", "))));
            }
        }
        Command::GenDataset => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cfg)?;
            let rows = harness::gen_dataset(&cfg, cli.jobs)?;
            let mut buf = Vec::new();
            telemetry::write_dataset_csv(&rows, &mut buf)?;
            write(&dir.join("dataset.csv"), buf)?;
            let summary = telemetry::summarize(&rows)?;
            let mut buf = Vec::new();
            telemetry::write_summary_csv(&summary, &mut buf)?;
            write(&dir.join("summary.csv"), buf)?;
            print!("{}", telemetry::summary_table(&summary));
            println!("{} windows written to {}", rows.len(), dir.join("dataset.csv").display());
        }
        Command::Attack { kind, id } => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cfg)?;
            let kind = match kind {
                KindArg::Tamper => AttackKind::WeightTamper,
                KindArg::Poison => AttackKind::InputPoison,
            };
            let rcfg = cfg.resolved();
            let trained = harness::train_baseline(&rcfg)?;
            let result = harness::run_scenario(&rcfg, &trained, &harness::Detectors::default(), *id, kind)?;
            if kind == AttackKind::WeightTamper {
                // Reproduce the scenario's writes for the audit trail.
                let seed = derive_seed(rcfg.root_seed, Stream::Scenario, *id);
                let spec = attacks::AttackSpec {
                    seed,
                    ..rcfg.attacks.template(kind)
                };
                let mut net = trained.network.clone();
                let target = ReadoutTarget::new(&trained.bench, &trained.readout);
                let log = attacks::tamper_weights(&mut net, &spec, Some(&target), rcfg.sim.w_min, rcfg.sim.w_max)?;
                let mut buf = Vec::new();
                log.write_csv(&mut buf)?;
                write(&dir.join("tamper_log.csv"), buf)?;
                let key = defenses::session_key(rcfg.root_seed);
                let slog = defenses::tamper_to_log(&log, &key, rcfg.detectors.presign_fraction, seed)?;
                write(&dir.join("update_log.bin"), slog.to_bytes())?;
            }
            let text = json(&result)?;
            write(&dir.join("scenario.json"), &text)?;
            println!("{text}");
        }
        Command::Experiment => {
            let cfg = load_config(&cli)?;
            let dir = out_dir(&cfg)?;
            let formats = formats(&cli)?;
            let (report, rows) = harness::run_experiment(&cfg, cli.jobs)?;
            let mut buf = Vec::new();
            telemetry::write_dataset_csv(&rows, &mut buf)?;
            write(&dir.join("dataset.csv"), buf)?;
            let files = harness::emit_report(&report, &dir, &formats)?;
            print_summary(&report);
            println!("wrote {} files to {}", files.len() + 1, dir.display());
        }
        Command::Report { input } => {
            let text =
                std::fs::read_to_string(input).map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
            let report = ExperimentReport::from_json(&text)?;
            let dir = match &cli.out {
                Some(o) => o.clone(),
                None => PathBuf::from(&report.config.output_dir),
            };
            let files = harness::emit_report(&report, &dir, &formats(&cli)?)?;
            print_summary(&report);
            println!("wrote {} files to {}", files.len(), dir.display());
        }
        Command::VerifyLog { log, key } => {
            let bytes = std::fs::read(log).map_err(|e| Failure::Usage(format!("{}: {e}", log.display())))?;
            let key = match key {
                Some(h) => parse_hex(h)?,
                None => defenses::session_key(load_config(&cli)?.root_seed).to_vec(),
            };
            let slog = match SecureLog::from_bytes(&bytes) {
                Ok(l) => l,
                Err(e) => return Err(Failure::Acceptance(e.to_string())),
            };
            let v = defenses::verify_log(&slog, &key);
            println!("records {} accepted {} rejected {}", slog.len(), v.accepted.len(), v.rejected.len());
            if let Some(r) = v.first_rejected() {
                return Err(Failure::Acceptance(format!(
                    "verification failed at seq {} (record {}, {:?})",
                    r.seq, r.index, r.reason
                )));
            }
        }
    }
    Ok(())
}

fn parse_hex(s: &str) -> Result<Vec<u8>, Failure> {
    if s.len() % 2 != 0 {
        return Err(Failure::Usage("key must have an even number of hex digits".into()));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| Failure::Usage("key is not hex".into())))
        .collect()
}

fn print_summary(r: &ExperimentReport) {
    println!("clean accuracy {:.2}%  latency {:.2} ms", r.clean.accuracy_pct, r.clean.mean_latency_ms);
    for a in &r.attacks {
        println!(
            "{:<14} success {:>6.2}%  accuracy {:.2}%  latency {:.2} ms",
            a.attack_type.as_str(),
            a.success_pct,
            a.accuracy_mean_pct,
            a.latency_mean_ms
        );
    }
    for d in &r.detectors {
        println!("{:<14} detection {:>6.2}%  fpr {:.2}%", d.name, d.detection_pct, d.false_positive_pct);
    }
    if let Some(s) = &r.secure {
        println!(
            "secure log     residual tamper {}  residual poison {}",
            s.residual_tamper_pct.map_or("n/a".into(), |x| format!("{x:.2}%")),
            s.residual_poison_pct.map_or("n/a".into(), |x| format!("{x:.2}%"))
        );
    }
    if let Some(l) = &r.latency_impact {
        println!(
            "latency impact tamper {:+.1}%  poison {:+.1}%  pooled {:+.1}%",
            l.tamper_pct, l.poison_pct, l.pooled_pct
        );
    }
}
