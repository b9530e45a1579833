//! The steps behind each command, usable without going through the CLI.

use resp_core::dataset::WindowBatch;
use resp_core::model::{ConfSpec, Model};
use resp_core::training::{estimates_from_output, predict, reference_estimates, split_indices, train_with, EpochRecord, History, TrainConfig};

use crate::checkpoint::CheckpointMeta;
use crate::error::Result;
use crate::tables::RateRow;

/// Which windows of a file to run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Subset {
    #[default]
    All,
    /// The training side of the checkpoint's split.
    Train,
    /// The held-out side of the checkpoint's split.
    Test,
}

impl std::str::FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(Subset::All),
            "train" => Ok(Subset::Train),
            "test" => Ok(Subset::Test),
            _ => Err(format!("unknown subset `{s}` (expected all, train or test)")),
        }
    }
}

/// Window indices (into the whole file) selected by `subset`, in order.
pub fn subset_ids(n: usize, subset: Subset, train: Option<&TrainConfig>) -> Vec<usize> {
    match (subset, train) {
        (Subset::All, _) | (_, None) => (0..n).collect(),
        (s, Some(cfg)) => {
            let (a, b) = split_indices(n, cfg.split_ratio, cfg.seed);
            if s == Subset::Train { a } else { b }
        }
    }
}

fn row(batch: &WindowBatch, i: usize, id: usize) -> RateRow {
    RateRow {
        window_id: id,
        avg_rr: None,
        breaths: None,
        flags: batch.flags[i],
        subject: Some(batch.meta[i].subject.clone()),
        activity: batch.meta[i].activity.clone(),
    }
}

/// Reference rows for every window: target average rate and breaths
/// counted on the target waveform.
pub fn reference_rows(batch: &WindowBatch) -> Vec<RateRow> {
    reference_estimates(batch)
        .into_iter()
        .enumerate()
        .map(|(i, e)| RateRow { avg_rr: e.avg_rr, breaths: e.breaths, ..row(batch, i, i) })
        .collect()
}

/// Model predictions for the windows `ids` of `batch`.
pub fn prediction_rows(model: &Model, batch: &WindowBatch, ids: &[usize], chunk: usize) -> Result<Vec<RateRow>> {
    let part = batch.select(ids);
    let out = predict(model, part.input(model.conf.id.input_kind())?, chunk)?;
    Ok(estimates_from_output(&out)
        .into_iter()
        .enumerate()
        .map(|(k, e)| RateRow { avg_rr: e.avg_rr, breaths: e.breaths, ..row(&part, k, ids[k]) })
        .collect())
}

/// Splits `batch`, builds a model from `init_seed` and trains it on the
/// training side with the held-out side as validation.
pub fn train_windows(
    batch: &WindowBatch,
    cfg: &TrainConfig,
    width_div: usize,
    init_seed: u64,
    on_epoch: impl FnMut(&Model, &EpochRecord) -> resp_core::Result<()>,
) -> Result<(Model, History, CheckpointMeta)> {
    let (train_ids, test_ids) = split_indices(batch.len(), cfg.split_ratio, cfg.seed);
    let (train, test) = (batch.select(&train_ids), batch.select(&test_ids));
    let model = Model::build(ConfSpec::narrow(cfg.conf, width_div), init_seed)?;
    let (model, history) = train_with(model, &train, Some(&test), cfg, on_epoch)?;
    let meta = CheckpointMeta { init_seed, epoch: history.epochs.len(), train: Some(*cfg) };
    Ok((model, history, meta))
}
