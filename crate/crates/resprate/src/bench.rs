//! Inference latency measurement.

use std::time::Instant;

use resp_core::model::Model;
use resp_core::nn::Tensor;
use resp_core::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub conf: String,
    pub params: usize,
    pub batch: usize,
    pub repeats: usize,
    pub ms_per_window_median: f64,
    pub ms_per_window_p95: f64,
}

/// Deterministic smooth input of shape `(batch, 3, len)`.
fn bench_input(batch: usize, len: usize) -> Tensor {
    let data = (0..batch * 3 * len).map(|i| (i as f64 * 0.0137).sin()).collect();
    Tensor::new(&[batch, 3, len], data).expect("shape matches data")
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Times `repeats` inference passes over a batch after one warm-up pass.
pub fn bench_inference(model: &Model, batch: usize, repeats: usize) -> Result<BenchReport> {
    let batch = batch.max(1);
    let repeats = repeats.max(1);
    let x = bench_input(batch, model.conf.input_len());
    model.infer(&x)?;
    let mut per_window = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        model.infer(&x)?;
        per_window.push(t.elapsed().as_secs_f64() * 1e3 / batch as f64);
    }
    per_window.sort_by(f64::total_cmp);
    let mid = per_window.len() / 2;
    let median = if per_window.len() % 2 == 0 { 0.5 * (per_window[mid - 1] + per_window[mid]) } else { per_window[mid] };
    Ok(BenchReport {
        conf: format!("CONF-{}", model.conf.id),
        params: model.param_count(),
        batch,
        repeats,
        ms_per_window_median: median,
        ms_per_window_p95: percentile(&per_window, 95.0),
    })
}
