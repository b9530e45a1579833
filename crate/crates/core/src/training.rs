//! Dataset split, learning-rate schedule and the multitask training loop.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::breath::count_breaths;
use crate::dataset::WindowBatch;
use crate::evaluation::{mae, Estimate};
use crate::model::{ConfId, Model, Output};
use crate::nn::{smooth_l1, Adam, Mode, Tensor};
use crate::rng::{seeded, streams};
use crate::{Error, Result};

/// Last epoch (1-based) trained at the high rate under the adaptive policy.
pub const WARM_EPOCHS: usize = 20;
pub const HIGH_LR: f64 = 0.01;
pub const LOW_LR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LrPolicy {
    /// 0.01 through epoch 20, 1e-4 afterwards.
    Adaptive,
    /// A constant rate.
    Fixed(f64),
}

impl LrPolicy {
    /// The policy each configuration is trained with by default.
    pub fn default_for(id: ConfId) -> Self {
        match id {
            ConfId::C => LrPolicy::Fixed(LOW_LR),
            _ => LrPolicy::Adaptive,
        }
    }
}

/// Learning rate for a 1-based epoch.
pub fn lr_schedule(policy: LrPolicy, epoch: usize) -> f64 {
    match policy {
        LrPolicy::Adaptive if epoch <= WARM_EPOCHS => HIGH_LR,
        LrPolicy::Adaptive => LOW_LR,
        LrPolicy::Fixed(lr) => lr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossWeights {
    pub waveform: f64,
    pub rate: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { waveform: 1.0, rate: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub conf: ConfId,
    pub epochs: usize,
    pub batch_size: usize,
    pub split_ratio: f64,
    pub seed: u64,
    pub lr_policy: LrPolicy,
    pub loss_weights: LossWeights,
}

impl TrainConfig {
    pub fn new(conf: ConfId) -> Self {
        Self {
            conf,
            epochs: 100,
            batch_size: 128,
            split_ratio: 0.8,
            seed: 0,
            lr_policy: LrPolicy::default_for(conf),
            loss_weights: LossWeights::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be >= 1".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidArgument(alloc::format!("split ratio {} outside (0, 1)", self.split_ratio)));
        }
        let w = self.loss_weights;
        if !(w.waveform >= 0.0 && w.rate >= 0.0 && w.waveform.is_finite() && w.rate.is_finite()) {
            return Err(Error::InvalidArgument("loss weights must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Weighted sum of the two components, averaged over windows.
    pub loss_total: f64,
    pub loss_wave: Option<f64>,
    pub loss_rr: Option<f64>,
    /// Average-rate MAE on the held-out windows.
    pub val_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn first_loss(&self) -> Option<f64> {
        self.epochs.first().map(|r| r.loss_total)
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.loss_total)
    }
}

/// Round(ratio * n) shuffled indices for training, the rest for testing.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed, streams::SPLIT));
    let n_train = libm::round(ratio * n as f64) as usize;
    let test = idx.split_off(n_train.min(n));
    (idx, test)
}

pub fn split_dataset(data: &WindowBatch, ratio: f64, seed: u64) -> (WindowBatch, WindowBatch) {
    let (train, test) = split_indices(data.len(), ratio, seed);
    (data.select(&train), data.select(&test))
}

/// Subject-wise split: whole subjects go to one side, chosen in shuffled
/// order until the training side holds at least `ratio` of the windows.
pub fn split_by_subject(data: &WindowBatch, ratio: f64, seed: u64) -> (WindowBatch, WindowBatch) {
    let mut subjects: Vec<&str> = data.meta.iter().map(|m| m.subject.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    subjects.shuffle(&mut seeded(seed, streams::SPLIT));
    let target = libm::round(ratio * data.len() as f64) as usize;
    let mut chosen = Vec::new();
    let mut count = 0;
    for s in subjects {
        if count >= target {
            break;
        }
        count += data.meta.iter().filter(|m| m.subject == s).count();
        chosen.push(s);
    }
    let (train, test): (Vec<usize>, Vec<usize>) =
        (0..data.len()).partition(|&i| chosen.contains(&data.meta[i].subject.as_str()));
    (data.select(&train), data.select(&test))
}

fn check_targets(model: &Model, data: &WindowBatch) -> Result<()> {
    data.validate()?;
    if model.decoder.is_some() && data.waveform.is_none() {
        return Err(Error::MissingTargets("waveform targets"));
    }
    if model.head.is_some() && data.rate.is_none() {
        return Err(Error::MissingTargets("rate targets"));
    }
    data.input(model.conf.id.input_kind())?;
    Ok(())
}

/// Trains `model` on `data`; see [`train_with`].
pub fn train(model: Model, data: &WindowBatch, validation: Option<&WindowBatch>, cfg: &TrainConfig) -> Result<(Model, History)> {
    train_with(model, data, validation, cfg, |_, _| Ok(()))
}

/// Mini-batch Adam on `w_wave * L1 + w_rr * L2` (SmoothL1 on the waveform
/// and the rate). Windows are reshuffled every epoch from the seed; the
/// callback runs after each epoch.
pub fn train_with(
    mut model: Model,
    data: &WindowBatch,
    validation: Option<&WindowBatch>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&Model, &EpochRecord) -> Result<()>,
) -> Result<(Model, History)> {
    cfg.validate()?;
    if cfg.conf != model.conf.id {
        return Err(Error::InvalidArgument(alloc::format!(
            "config is for CONF-{} but the model is CONF-{}",
            cfg.conf,
            model.conf.id
        )));
    }
    check_targets(&model, data)?;
    if data.is_empty() {
        return Err(Error::NotEnoughSamples(0));
    }
    if let Some(v) = validation {
        check_targets(&model, v)?;
    }
    let inputs = data.input(model.conf.id.input_kind())?;
    let adam = Adam::default();
    let mut shuffle = seeded(cfg.seed, streams::SHUFFLE);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = History::default();
    let use_wave = model.decoder.is_some();
    let use_rate = model.head.is_some();

    for epoch in 1..=cfg.epochs {
        let lr = lr_schedule(cfg.lr_policy, epoch);
        order.shuffle(&mut shuffle);
        let (mut sum_total, mut sum_wave, mut sum_rate) = (0.0, 0.0, 0.0);
        for (batch_no, rows) in order.chunks(cfg.batch_size).enumerate() {
            let x = inputs.batch_rows(rows);
            let out = model.forward(&x, Mode::Train)?;
            let b = rows.len() as f64;
            let mut total = 0.0;
            let mut grad_wave = None;
            let mut grad_rate = None;
            if let (true, Some(pred)) = (use_wave, &out.waveform) {
                let target = data.waveform.as_ref().unwrap().batch_rows(rows);
                let (loss, mut g) = smooth_l1(pred, &target)?;
                sum_wave += loss * b;
                total += cfg.loss_weights.waveform * loss;
                if cfg.loss_weights.waveform != 0.0 {
                    g.data_mut().iter_mut().for_each(|v| *v *= cfg.loss_weights.waveform);
                    grad_wave = Some(g);
                }
            }
            if let (true, Some(pred)) = (use_rate, &out.rate) {
                let target = data.rate.as_ref().unwrap().batch_rows(rows);
                let (loss, mut g) = smooth_l1(pred, &target)?;
                sum_rate += loss * b;
                total += cfg.loss_weights.rate * loss;
                if cfg.loss_weights.rate != 0.0 {
                    g.data_mut().iter_mut().for_each(|v| *v *= cfg.loss_weights.rate);
                    grad_rate = Some(g);
                }
            }
            if !total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_no + 1 });
            }
            sum_total += total * b;
            model.zero_grad();
            if grad_wave.is_some() || grad_rate.is_some() {
                model.backward(grad_wave.as_ref(), grad_rate.as_ref())?;
            }
            adam.step(model.params_mut(), lr);
        }
        let n = data.len() as f64;
        let val_mae = match (validation, use_rate) {
            (Some(v), true) if !v.is_empty() => {
                let out = predict(&model, v.input(model.conf.id.input_kind())?, cfg.batch_size)?;
                Some(mae(out.rate.as_ref().unwrap().data(), v.rate_targets().unwrap())?)
            }
            _ => None,
        };
        let record = EpochRecord {
            epoch,
            lr,
            loss_total: sum_total / n,
            loss_wave: use_wave.then_some(sum_wave / n),
            loss_rr: use_rate.then_some(sum_rate / n),
            val_mae,
        };
        on_epoch(&model, &record)?;
        history.epochs.push(record);
    }
    Ok((model, history))
}

/// Inference in chunks of `chunk` windows.
pub fn predict(model: &Model, inputs: &Tensor, chunk: usize) -> Result<Output> {
    let n = inputs.shape()[0];
    let chunk = chunk.max(1);
    let (mut waves, mut rates) = (Vec::new(), Vec::new());
    let mut start = 0;
    while start < n {
        let rows: Vec<usize> = (start..(start + chunk).min(n)).collect();
        let out = model.infer(&inputs.batch_rows(&rows))?;
        if let Some(w) = out.waveform {
            waves.extend_from_slice(w.data());
        }
        if let Some(r) = out.rate {
            rates.extend_from_slice(r.data());
        }
        start += chunk;
    }
    let len = crate::signal::RESP_LEN;
    Ok(Output {
        waveform: model.decoder.is_some().then(|| Tensor::new(&[n, 1, len], waves)).transpose()?,
        rate: model.head.is_some().then(|| Tensor::new(&[n, 1], rates)).transpose()?,
    })
}

/// Per-window estimates from model outputs: the rate head gives the
/// average rate, the decoded waveform is breath-counted.
pub fn estimates_from_output(out: &Output) -> Vec<Estimate> {
    let n = out
        .rate
        .as_ref()
        .or(out.waveform.as_ref())
        .map_or(0, |t| t.shape()[0]);
    let len = crate::signal::RESP_LEN;
    (0..n)
        .map(|i| Estimate {
            avg_rr: out.rate.as_ref().map(|r| r.data()[i]),
            breaths: out.waveform.as_ref().map(|w| count_breaths(&w.data()[i * len..(i + 1) * len])),
        })
        .collect()
}

/// Reference estimates from a batch's targets: the stored average rate and
/// breaths counted on the reference waveform.
pub fn reference_estimates(data: &WindowBatch) -> Vec<Estimate> {
    (0..data.len())
        .map(|i| Estimate {
            avg_rr: data.rate_targets().map(|r| r[i]),
            breaths: data.waveform_row(i).map(count_breaths),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::WindowMeta;
    use crate::model::ConfSpec;
    use crate::signal::RESP_LEN;
    use alloc::string::ToString;

    #[test]
    fn schedule() {
        assert_eq!(lr_schedule(LrPolicy::Adaptive, 1), 0.01);
        assert_eq!(lr_schedule(LrPolicy::Adaptive, 20), 0.01);
        assert_eq!(lr_schedule(LrPolicy::Adaptive, 21), 0.0001);
        assert_eq!(lr_schedule(LrPolicy::default_for(ConfId::C), 1), 0.0001);
        assert_eq!(lr_schedule(LrPolicy::default_for(ConfId::C), 50), 0.0001);
    }

    #[test]
    fn split_sizes() {
        let (a, b) = split_indices(814, 0.8, 1);
        assert_eq!((a.len(), b.len()), (651, 163));
        let (a, b) = split_indices(10, 0.8, 1);
        assert_eq!((a.len(), b.len()), (8, 2));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.8, 1), split_indices(10, 0.8, 1));
    }

    pub(crate) fn toy_batch(n: usize) -> WindowBatch {
        let mut inputs = Vec::new();
        let mut waves = Vec::new();
        let mut rates = Vec::new();
        for i in 0..n {
            let f = 0.1 + 0.02 * (i % 10) as f64;
            for c in 0..3 {
                inputs.extend((0..RESP_LEN).map(|k| libm::sin(core::f64::consts::TAU * f * k as f64 / 4.0 + c as f64)));
            }
            waves.extend((0..RESP_LEN).map(|k| libm::sin(core::f64::consts::TAU * f * k as f64 / 4.0)));
            rates.push(60.0 * f);
        }
        WindowBatch {
            inputs: Tensor::new(&[n, 3, RESP_LEN], inputs).unwrap(),
            raw: None,
            waveform: Some(Tensor::new(&[n, 1, RESP_LEN], waves).unwrap()),
            rate: Some(Tensor::new(&[n, 1], rates).unwrap()),
            flags: alloc::vec![0; n],
            meta: (0..n)
                .map(|i| WindowMeta { subject: (i % 3).to_string(), start_s: i as f64, activity: None })
                .collect(),
        }
    }

    fn small(conf: ConfId) -> TrainConfig {
        TrainConfig { epochs: 2, batch_size: 8, seed: 3, ..TrainConfig::new(conf) }
    }

    #[test]
    fn zero_rate_keeps_parameters() {
        let model = Model::build(ConfSpec::narrow(ConfId::E, 8), 1).unwrap();
        let before: Vec<Tensor> = model.params().iter().map(|p| p.value.clone()).collect();
        let cfg = TrainConfig { epochs: 1, lr_policy: LrPolicy::Fixed(0.0), ..small(ConfId::E) };
        let (model, history) = train(model, &toy_batch(20), None, &cfg).unwrap();
        let after: Vec<Tensor> = model.params().iter().map(|p| p.value.clone()).collect();
        assert_eq!(before, after);
        assert_eq!(history.epochs.len(), 1);
    }

    #[test]
    fn rate_only_history() {
        let model = Model::build(ConfSpec::narrow(ConfId::D, 8), 1).unwrap();
        let data = toy_batch(20);
        let (_, h) = train(model, &data, Some(&data), &small(ConfId::D)).unwrap();
        assert!(h.epochs.iter().all(|r| r.loss_wave.is_none() && r.loss_rr.unwrap().is_finite()));
        assert!(h.epochs.iter().all(|r| r.val_mae.is_some()));
    }

    #[test]
    fn missing_targets_rejected() {
        let model = Model::build(ConfSpec::narrow(ConfId::C, 8), 1).unwrap();
        let mut data = toy_batch(10);
        data.waveform = None;
        assert!(matches!(train(model, &data, None, &small(ConfId::C)), Err(Error::MissingTargets(_))));
    }

    #[test]
    fn reproducible() {
        let run = || {
            let model = Model::build(ConfSpec::narrow(ConfId::E, 8), 5).unwrap();
            train(model, &toy_batch(20), None, &small(ConfId::E)).unwrap()
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_rate_weight_matches_waveform_only_config() {
        let data = toy_batch(20);
        let cfg_e = TrainConfig {
            loss_weights: LossWeights { waveform: 1.0, rate: 0.0 },
            lr_policy: LrPolicy::Fixed(1e-3),
            ..small(ConfId::E)
        };
        let cfg_c = TrainConfig { lr_policy: LrPolicy::Fixed(1e-3), ..small(ConfId::C) };
        let (e, _) = train(Model::build(ConfSpec::narrow(ConfId::E, 8), 9).unwrap(), &data, None, &cfg_e).unwrap();
        let (c, _) = train(Model::build(ConfSpec::narrow(ConfId::C, 8), 9).unwrap(), &data, None, &cfg_c).unwrap();
        assert_eq!(e.encoder, c.encoder);
        assert_eq!(e.decoder, c.decoder);
    }

    #[test]
    fn nan_targets_abort_with_context() {
        let mut data = toy_batch(10);
        data.rate.as_mut().unwrap().data_mut()[0] = f64::NAN;
        let model = Model::build(ConfSpec::narrow(ConfId::D, 8), 1).unwrap();
        let cfg = TrainConfig { batch_size: 100, ..small(ConfId::D) };
        assert!(matches!(train(model, &data, None, &cfg), Err(Error::NonFiniteLoss { epoch: 1, batch: 1 })));
    }

    #[test]
    fn subject_split_keeps_subjects_together() {
        let data = toy_batch(30);
        let (a, b) = split_by_subject(&data, 0.6, 2);
        assert_eq!(a.len() + b.len(), 30);
        for m in &a.meta {
            assert!(b.meta.iter().all(|o| o.subject != m.subject));
        }
    }
}
