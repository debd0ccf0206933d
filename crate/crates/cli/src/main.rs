//! `pitmon` — anytime-valid calibration monitoring at the command line.
//!
//! Exit codes: 0 = completed with no alarm, 2 = alarm raised, 1 = input or
//! configuration error.

mod io;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pitmon_core::{
    monitor::Monitor, run_calibration, run_detection, AlarmReport, MonitorConfig, OnAlarm,
    ScenarioKind, StreamScenario,
};

#[derive(Parser)]
#[command(
    name = "pitmon",
    version,
    about = "Monitors the calibration of a probabilistic model by detecting shifts in its PIT stream, with anytime-valid false-alarm control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monitor a stream of observations for calibration drift.
    Monitor(MonitorArgs),
    /// Generate a synthetic benchmark stream with known ground truth.
    Simulate(SimulateArgs),
    /// Estimate the false alarm rate over Monte Carlo null streams.
    Calibrate(CalibrateArgs),
    /// Measure detection performance on a drift scenario.
    Detect(DetectArgs),
}

#[derive(Args, Clone)]
struct MonitorFlags {
    /// Significance level; the alarm threshold is 1/alpha.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Histogram bins for betting and changepoint scoring.
    #[arg(long, default_value_t = 100)]
    bins: usize,
    /// Dirichlet concentration for changepoint scoring.
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    /// Base seed for the tie-break and jitter streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl MonitorFlags {
    fn config(&self, on_alarm: OnAlarm) -> MonitorConfig {
        MonitorConfig {
            alpha: self.alpha,
            bins: self.bins,
            kappa: self.kappa,
            seed: self.seed,
            on_alarm,
            trace: false,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnAlarmArg {
    Halt,
    Continue,
}

impl From<OnAlarmArg> for OnAlarm {
    fn from(v: OnAlarmArg) -> Self {
        match v {
            OnAlarmArg::Halt => OnAlarm::Halt,
            OnAlarmArg::Continue => OnAlarm::Continue,
        }
    }
}

#[derive(Args)]
struct MonitorArgs {
    /// Input stream: NDJSON records {"u":…} or {"y":…,"mu":…,"sigma":…},
    /// or CSV with header `u` or `y,mu,sigma`.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    flags: MonitorFlags,
    /// Write per-step NDJSON trace records to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Whether to stop at the first alarm or keep tracing.
    #[arg(long, value_enum, default_value = "halt")]
    on_alarm: OnAlarmArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Null,
    Abrupt,
    Gradual,
    Local,
    Staged,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(v: ScenarioArg) -> Self {
        match v {
            ScenarioArg::Null => ScenarioKind::Null,
            ScenarioArg::Abrupt => ScenarioKind::AbruptGlobal,
            ScenarioArg::Gradual => ScenarioKind::GradualGlobal,
            ScenarioArg::Local => ScenarioKind::LocalExpanding,
            ScenarioArg::Staged => ScenarioKind::StagedIntensity,
        }
    }
}

#[derive(Args, Clone)]
struct ScenarioFlags {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    /// Pre-drift samples.
    #[arg(long, default_value_t = 2500)]
    pre: usize,
    /// Post-drift samples.
    #[arg(long, default_value_t = 2500)]
    post: usize,
    /// Gradual drift: length of the 1:1 mixing window.
    #[arg(long)]
    transition_window: Option<usize>,
    /// Phase count for local/staged drift.
    #[arg(long)]
    phases: Option<usize>,
    /// Post-change location offset on the outcome.
    #[arg(long)]
    shift_offset: Option<f64>,
    /// Post-change noise scale multiplier.
    #[arg(long)]
    shift_scale: Option<f64>,
    /// Outcome noise standard deviation.
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Staged drift: comma-separated per-phase shift multipliers.
    #[arg(long, value_delimiter = ',')]
    stage_multipliers: Option<Vec<f64>>,
}

impl ScenarioFlags {
    fn scenario(&self, seed: u64) -> StreamScenario {
        let mut s = StreamScenario::new(self.scenario.into(), self.pre, self.post, seed);
        if let Some(w) = self.transition_window {
            s.transition_window = w;
        }
        if let Some(p) = self.phases {
            s.phase_count = p;
        }
        if let Some(o) = self.shift_offset {
            s.shift.offset = o;
        }
        if let Some(c) = self.shift_scale {
            s.shift.scale = c;
        }
        if let Some(n) = self.noise_sigma {
            s.noise_sigma = n;
        }
        if let Some(m) = &self.stage_multipliers {
            s.stage_multipliers = m.clone();
        }
        s
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file for the stream records.
    #[arg(long)]
    out: PathBuf,
    /// Output format; defaults to NDJSON (or CSV for a .csv extension).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Ndjson,
    Csv,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Number of independent null streams.
    #[arg(long)]
    trials: u64,
    /// Length of each null stream.
    #[arg(long)]
    length: u64,
    #[command(flatten)]
    flags: MonitorFlags,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    scenario: ScenarioFlags,
    /// Number of independent streams.
    #[arg(long)]
    trials: u64,
    #[command(flatten)]
    flags: MonitorFlags,
}

#[derive(Serialize)]
struct AlarmEvent<'a> {
    event: &'static str,
    t: u64,
    tau_hat: u64,
    log_m: f64,
    log_bf: f64,
    histogram: &'a [u64],
}

impl<'a> AlarmEvent<'a> {
    fn from_report(report: &'a AlarmReport) -> Self {
        Self {
            event: "alarm",
            t: report.alarm_time,
            tau_hat: report.changepoint_estimate,
            log_m: report.final_log_m,
            log_bf: report.log_bf_at_estimate,
            histogram: &report.post_alarm_histogram,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Monitor(args) => cmd_monitor(args),
        Command::Simulate(args) => cmd_simulate(args).map(|()| 0),
        Command::Calibrate(args) => cmd_calibrate(args).map(|()| 0),
        Command::Detect(args) => cmd_detect(args).map(|()| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("pitmon: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_monitor(args: MonitorArgs) -> Result<u8> {
    let config = args.flags.config(args.on_alarm.into());
    let observations = io::read_observations(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;

    let mut monitor = Monitor::<f64>::new(config.clone()).context("building monitor")?;
    let mut trace_out = args
        .trace
        .as_ref()
        .map(|path| -> Result<_> {
            Ok(BufWriter::new(File::create(path).with_context(|| {
                format!("creating trace file {}", path.display())
            })?))
        })
        .transpose()?;

    for obs in observations {
        let step = monitor.observe(obs).context("processing record")?;
        if let Some(w) = trace_out.as_mut() {
            serde_json::to_writer(&mut *w, &step)?;
            w.write_all(b"\n")?;
        }
        if monitor.alarmed() && config.on_alarm == OnAlarm::Halt {
            break;
        }
    }
    if let Some(mut w) = trace_out {
        w.flush()?;
    }

    if let Some(report) = monitor.alarm_report() {
        println!("{}", serde_json::to_string(&AlarmEvent::from_report(report))?);
        eprintln!(
            "alarm at t={} (changepoint estimate {}, log M = {:.3})",
            report.alarm_time, report.changepoint_estimate, report.final_log_m
        );
        Ok(2)
    } else {
        println!(
            "{}",
            serde_json::json!({
                "event": "summary",
                "observations": monitor.time(),
                "log_m": finite_or_null(monitor.log_m()),
                "alarmed": false,
            })
        );
        eprintln!("no alarm after {} observations", monitor.time());
        Ok(0)
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let scenario = args.scenario.scenario(args.seed);
    let records = pitmon_core::streams::generate::<f64>(&scenario).context("generating stream")?;

    let csv_format = match args.format {
        Some(FormatArg::Csv) => true,
        Some(FormatArg::Ndjson) => false,
        None => args
            .out
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };

    let file = File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    if csv_format {
        writeln!(w, "y,mu,sigma")?;
        for r in &records {
            writeln!(w, "{},{},{}", r.y, r.mu, r.sigma)?;
        }
    } else {
        for r in &records {
            writeln!(
                w,
                "{}",
                serde_json::json!({ "y": r.y, "mu": r.mu, "sigma": r.sigma })
            )?;
        }
    }
    w.flush()?;

    println!(
        "{}",
        serde_json::json!({
            "event": "scenario",
            "kind": scenario.kind,
            "records": records.len(),
            "tau": scenario.true_changepoint(),
            "final_phase_start": scenario.final_phase_start(),
            "seed": args.seed,
            "out": args.out.display().to_string(),
        })
    );
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let config = args.flags.config(OnAlarm::Halt);
    let summary = run_calibration::<f64>(args.trials, args.length, &config)
        .context("running calibration")?;

    println!(
        "{}",
        serde_json::json!({
            "event": "calibration",
            "trials": summary.trials,
            "length": summary.length,
            "alpha": config.alpha,
            "alarms": summary.alarms,
            "fpr": summary.fpr,
            "fpr_stderr": summary.fpr_stderr,
        })
    );

    println!("calibration over {} null streams of length {}", summary.trials, summary.length);
    println!("  alpha        {:>10.4}", config.alpha);
    println!("  alarms       {:>10}", summary.alarms);
    println!("  fpr          {:>10.4}", summary.fpr);
    println!("  fpr stderr   {:>10.4}", summary.fpr_stderr);
    print_alarm_time_histogram(&summary.alarm_times, summary.length);
    Ok(())
}

fn print_alarm_time_histogram(alarm_times: &[u64], length: u64) {
    if alarm_times.is_empty() || length == 0 {
        return;
    }
    let buckets = 10usize;
    let width = (length as usize).div_ceil(buckets).max(1);
    let mut counts = vec![0usize; buckets];
    for &t in alarm_times {
        counts[((t as usize - 1) / width).min(buckets - 1)] += 1;
    }
    println!("  alarm times:");
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            let lo = i * width + 1;
            let hi = ((i + 1) * width).min(length as usize);
            println!("    [{lo:>6}, {hi:>6}]  {c}");
        }
    }
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let config = args.flags.config(OnAlarm::Halt);
    let scenario = args.scenario.scenario(args.flags.seed);
    let summary =
        run_detection::<f64>(&scenario, args.trials, &config).context("running detection")?;

    println!(
        "{}",
        serde_json::json!({
            "event": "detection",
            "scenario": scenario.kind,
            "trials": summary.trials,
            "tpr": summary.tpr,
            "fpr": summary.fpr,
            "mean_delay": summary.mean_delay,
            "changepoint_mae": summary.changepoint_mae,
            "staged": summary.staged,
        })
    );

    println!(
        "detection over {} streams ({} pre + {} post)",
        summary.trials, scenario.pre_length, scenario.post_length
    );
    println!("  true positives  {:>10}", summary.true_positives);
    println!("  early alarms    {:>10}", summary.early_alarms);
    println!("  tpr             {:>10.4}", summary.tpr);
    println!("  fpr             {:>10.4}", summary.fpr);
    if let Some(d) = summary.mean_delay {
        println!("  mean delay      {:>10.1}", d);
    }
    if let Some(mae) = summary.changepoint_mae {
        println!("  changepoint MAE {:>10.1}", mae);
    }
    if let Some(staged) = summary.staged {
        println!("  MAE to onset    {:>10.1}", staged.mae_to_onset);
        println!("  MAE to final    {:>10.1}", staged.mae_to_final_phase);
        println!("  closer to final {:>10.4}", staged.frac_closer_to_final);
    }
    if !summary.delays.is_empty() {
        let mut sorted = summary.delays.clone();
        sorted.sort_unstable();
        let q = |f: f64| sorted[((sorted.len() - 1) as f64 * f) as usize];
        println!(
            "  delay quartiles {:>10} / {} / {}",
            q(0.25),
            q(0.5),
            q(0.75)
        );
    }
    Ok(())
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::Null
    }
}
