//! Command-line surface.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure
//! (non-finite training loss).

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use resp_core::dataset::{ExtractConfig, FlaggedPolicy};
use resp_core::model::{ConfId, ConfSpec, Model};
use resp_core::training::{LossWeights, LrPolicy, TrainConfig};

use crate::bench::{bench_inference, BenchReport};
use crate::checkpoint;
use crate::error::{read_json, write, write_json, Error, Result};
use crate::manifest::{assemble_windows, load_manifest};
use crate::pipeline::{prediction_rows, reference_rows, subset_ids, train_windows, Subset};
use crate::synth_io::{write_synth, SynthPlan};
use crate::tables::{evaluate, read_rates, write_bland_altman, write_grouped, write_history, write_rates, GroupBy};
use crate::windows_io::{read_windows, write_windows};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "resprate", version, about = "Respiration-rate estimation from ECG and accelerometer signals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic subjects and a manifest.
    Synth {
        /// JSON file with `{"subjects": [SynthConfig, ...], "format": "csv" | "binary"}`.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract network windows from the subjects of a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-window reference rates.
        #[arg(long)]
        ref_out: Option<PathBuf>,
        /// Write the exclusion report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Include raw-rate inputs (needed by CONF-A and CONF-B).
        #[arg(long)]
        raw: bool,
        /// Drop windows with a zero-filled channel instead of keeping them.
        #[arg(long)]
        exclude_flagged: bool,
    },
    /// Train a configuration on extracted windows.
    Train {
        #[arg(long)]
        conf: ConfId,
        #[arg(long)]
        windows: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 128)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Fraction of windows used for training; the rest is held out.
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        /// `adaptive`, or a fixed learning rate. Defaults per configuration.
        #[arg(long, value_parser = parse_lr)]
        lr: Option<LrPolicy>,
        #[arg(long, default_value_t = 1.0)]
        w_wave: f64,
        #[arg(long, default_value_t = 1.0)]
        w_rr: f64,
        /// Divide every filter count by this power of two.
        #[arg(long, default_value_t = 1)]
        width_div: usize,
        /// Per-epoch losses as CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Run a trained model over extracted windows.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `all`, or the `train` / `test` side of the checkpoint's split.
        #[arg(long, default_value = "all")]
        subset: Subset,
        #[arg(long, default_value_t = 128)]
        batch: usize,
    },
    /// Average- and instantaneous-rate errors of predictions.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also report average-rate errors per `activity` or `subject`.
        #[arg(long)]
        group: Option<GroupBy>,
        /// Write the grouped errors as CSV too.
        #[arg(long)]
        grouped_csv: Option<PathBuf>,
    },
    /// Bland-Altman agreement of average rates.
    BlandAltman {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inference latency and parameter count.
    Bench {
        /// Checkpoint to time.
        #[arg(long, conflicts_with = "conf", required_unless_present = "conf")]
        model: Option<PathBuf>,
        /// Time a freshly initialised configuration instead (`A`..`E` or `all`).
        #[arg(long, value_parser = parse_confs)]
        conf: Option<ConfList>,
        #[arg(long, default_value_t = 128)]
        batch: usize,
        #[arg(long, default_value_t = 100)]
        repeats: usize,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_lr(s: &str) -> std::result::Result<LrPolicy, String> {
    if s == "adaptive" {
        return Ok(LrPolicy::Adaptive);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(LrPolicy::Fixed(v)),
        _ => Err(format!("expected `adaptive` or a non-negative rate, got `{s}`")),
    }
}

/// Configurations named by `bench --conf`.
#[derive(Debug, Clone)]
pub struct ConfList(pub Vec<ConfId>);

fn parse_confs(s: &str) -> std::result::Result<ConfList, String> {
    if s.eq_ignore_ascii_case("all") {
        Ok(ConfList(ConfId::ALL.to_vec()))
    } else {
        s.parse::<ConfId>().map(|c| ConfList(vec![c])).map_err(|e| e.to_string())
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    let mut out = std::io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, value);
    let _ = writeln!(out);
}

/// Executes one parsed command.
pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { config, out } => {
            let plan: SynthPlan = read_json(&config)?;
            let manifest = write_synth(&plan, &out)?;
            eprintln!("wrote {} subject(s); manifest {}", plan.subjects.len(), manifest.display());
        }
        Command::Extract { manifest, out, ref_out, report, raw, exclude_flagged } => {
            let m = load_manifest(&manifest)?;
            let cfg = ExtractConfig {
                include_raw: raw,
                policy: if exclude_flagged { FlaggedPolicy::Exclude } else { FlaggedPolicy::Keep },
                ..ExtractConfig::default()
            };
            let (batch, rep) = assemble_windows(&m, &cfg)?;
            write_windows(&out, &batch)?;
            if let Some(p) = ref_out {
                write_rates(&p, &reference_rows(&batch))?;
            }
            if let Some(p) = report {
                write_json(&p, &rep)?;
            }
            let w = &rep.windows;
            eprintln!(
                "{} window(s) kept of {}; flagged {} (rrint {}, ramp {}, adr {}); excluded {} flagged, {} without reference; {} subject(s) excluded",
                w.kept, w.total, w.flagged, w.per_channel[0], w.per_channel[1], w.per_channel[2],
                w.excluded_flagged, w.excluded_no_reference, rep.excluded_subjects.len()
            );
        }
        Command::Train { conf, windows, epochs, batch, seed, out, split, lr, w_wave, w_rr, width_div, history } => {
            let data = read_windows(&windows)?;
            let cfg = TrainConfig {
                epochs,
                batch_size: batch,
                split_ratio: split,
                seed,
                lr_policy: lr.unwrap_or(LrPolicy::default_for(conf)),
                loss_weights: LossWeights { waveform: w_wave, rate: w_rr },
                ..TrainConfig::new(conf)
            };
            let (model, hist, meta) = train_windows(&data, &cfg, width_div, seed, |_, r| {
                eprintln!(
                    "epoch {:>3}  lr {:<7}  loss {:.5}{}",
                    r.epoch,
                    r.lr,
                    r.loss_total,
                    r.val_mae.map(|m| format!("  val MAE {m:.3}")).unwrap_or_default()
                );
                Ok(())
            })?;
            checkpoint::save(&out, &model, &meta)?;
            if let Some(p) = history {
                write_history(&p, &hist)?;
            }
        }
        Command::Infer { model, windows, out, subset, batch } => {
            let (model, meta) = checkpoint::load(&model)?;
            let data = read_windows(&windows)?;
            if subset != Subset::All && meta.train.is_none() {
                return Err(Error::Manifest("checkpoint has no split; use --subset all".into()));
            }
            let ids = subset_ids(data.len(), subset, meta.train.as_ref());
            write_rates(&out, &prediction_rows(&model, &data, &ids, batch)?)?;
        }
        Command::Eval { pred, reference, out, group, grouped_csv } => {
            let metrics = evaluate(&read_rates(&pred)?, &read_rates(&reference)?, group)?;
            write_json(&out, &metrics)?;
            if let (Some(p), Some(g)) = (grouped_csv, &metrics.groups) {
                write_grouped(&p, g)?;
            }
        }
        Command::BlandAltman { pred, reference, out } => {
            let stats = write_bland_altman(&out, &read_rates(&pred)?, &read_rates(&reference)?)?;
            print_json(&stats);
        }
        Command::Bench { model, conf, batch, repeats, out } => {
            let reports: Vec<BenchReport> = match (model, conf) {
                (Some(p), _) => vec![bench_inference(&checkpoint::load(&p)?.0, batch, repeats)?],
                (None, Some(ConfList(ids))) => ids
                    .into_iter()
                    .map(|id| bench_inference(&Model::build(ConfSpec::new(id), 0)?, batch, repeats))
                    .collect::<resp_core::Result<_>>()?,
                (None, None) => unreachable!("clap requires --model or --conf"),
            };
            let text = if reports.len() == 1 {
                serde_json::to_string_pretty(&reports[0])
            } else {
                serde_json::to_string_pretty(&reports)
            }
            .expect("reports serialise");
            match out {
                Some(p) => write(&p, format!("{text}\n").as_bytes())?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_DATA
            }
        }
    }
}
