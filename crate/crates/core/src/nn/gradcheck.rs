//! Finite-difference checks of reverse-mode gradients.

use alloc::vec::Vec;

use rand::Rng as _;

use super::{Mode, Param, Sequential, Tensor};
use crate::rng::{seeded, streams};
use crate::Result;

/// Step used for central differences.
pub const STEP: f64 = 1e-5;

/// Relative-error denominators never drop below this fraction of the
/// largest analytic gradient in the check.
pub const FLOOR_FRACTION: f64 = 1e-3;

/// Largest relative error found in a check, split by what was perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradReport {
    pub input: f64,
    pub params: f64,
    /// Index (into the parameter list) of the worst parameter entry.
    pub worst_param: usize,
    pub checked: usize,
    /// Entries left out because a perturbation moved some activation
    /// across its kink, where central differences are meaningless.
    pub skipped_kinks: usize,
}

impl GradReport {
    pub fn worst(&self) -> f64 {
        self.input.max(self.params)
    }
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_error(a: f64, b: f64, floor: f64) -> f64 {
    let scale = libm::fmax(libm::fmax(libm::fabs(a), libm::fabs(b)), floor);
    libm::fabs(a - b) / scale
}

/// A network with any number of outputs that can be differentiated
/// end to end.
pub trait Differentiable {
    /// Training-mode forward pass returning every output.
    fn forward_all(&mut self, x: &Tensor) -> Result<Vec<Tensor>>;
    /// Accumulates parameter gradients for the given output gradients and
    /// returns the input gradient.
    fn backward_all(&mut self, grads: &[Tensor]) -> Result<Tensor>;
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;
    /// Fingerprint of which piecewise-linear branch every activation took
    /// in the last forward pass.
    fn branch_fingerprint(&self) -> u64;
}

/// FNV-1a over a sequence of activation sign patterns.
pub fn fingerprint<'a>(patterns: impl IntoIterator<Item = &'a [bool]>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for pattern in patterns {
        for &b in pattern {
            h ^= b as u64 + 1;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Differentiable for Sequential {
    fn forward_all(&mut self, x: &Tensor) -> Result<Vec<Tensor>> {
        Ok(alloc::vec![self.forward(x, Mode::Train)?])
    }

    fn backward_all(&mut self, grads: &[Tensor]) -> Result<Tensor> {
        Ok(self.backward(&grads[0]))
    }

    fn params(&self) -> Vec<&Param> {
        Sequential::params(self)
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        Sequential::params_mut(self)
    }

    fn branch_fingerprint(&self) -> u64 {
        fingerprint(self.activation_patterns())
    }
}

/// Checks `net` on input `x` with the scalar objective `sum_k <out_k, r_k>`
/// for random projections `r_k`. Entries whose perturbation flips any
/// activation branch are skipped and counted. At most `max_per_tensor` entries of the
/// input and of each parameter are perturbed, chosen at random. Batch
/// statistics are used throughout so the objective is a deterministic
/// function of the inputs and parameters.
pub fn check<N: Differentiable + ?Sized>(net: &mut N, x: &Tensor, max_per_tensor: usize, seed: u64) -> Result<GradReport> {
    check_with_step(net, x, max_per_tensor, seed, STEP)
}

/// [`check`] with an explicit finite-difference step.
pub fn check_with_step<N: Differentiable + ?Sized>(
    net: &mut N,
    x: &Tensor,
    max_per_tensor: usize,
    seed: u64,
    step: f64,
) -> Result<GradReport> {
    let mut rng = seeded(seed, streams::GRAD_CHECK);
    let outputs = net.forward_all(x)?;
    let mut proj = Vec::with_capacity(outputs.len());
    for y in &outputs {
        proj.push(Tensor::new(y.shape(), (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect())?);
    }
    for p in net.params_mut() {
        p.zero_grad();
    }
    let dx = net.backward_all(&proj)?;
    let base = net.branch_fingerprint();
    let analytic_params: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.data().to_vec()).collect();

    let objective = |net: &mut N, x: &Tensor| -> Result<(f64, bool)> {
        let value = net.forward_all(x)?.iter().zip(&proj).map(|(y, r)| y.dot(r)).sum();
        Ok((value, net.branch_fingerprint() == base))
    };
    // Entries whose true gradient is structurally zero (a bias feeding a
    // batch norm) only see rounding noise; compare them on the scale of the
    // largest gradient instead of their own.
    let largest = analytic_params
        .iter()
        .flatten()
        .chain(dx.data())
        .fold(0.0f64, |m, g| m.max(libm::fabs(*g)));
    let floor = libm::fmax(FLOOR_FRACTION * largest, 1e-12);
    let mut report = GradReport::default();

    let mut xp = x.clone();
    for i in pick(x.len(), max_per_tensor, &mut rng) {
        let orig = xp.data()[i];
        xp.data_mut()[i] = orig + step;
        let plus = objective(net, &xp)?;
        xp.data_mut()[i] = orig - step;
        let minus = objective(net, &xp)?;
        xp.data_mut()[i] = orig;
        if !(plus.1 && minus.1) {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus.0 - minus.0) / (2.0 * step);
        report.input = report.input.max(rel_error(numeric, dx.data()[i], floor));
        report.checked += 1;
    }

    for (pi, analytic) in analytic_params.iter().enumerate() {
        for i in pick(analytic.len(), max_per_tensor, &mut rng) {
            let orig = net.params()[pi].value.data()[i];
            net.params_mut()[pi].value.data_mut()[i] = orig + step;
            let plus = objective(net, x)?;
            net.params_mut()[pi].value.data_mut()[i] = orig - step;
            let minus = objective(net, x)?;
            net.params_mut()[pi].value.data_mut()[i] = orig;
            if !(plus.1 && minus.1) {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus.0 - minus.0) / (2.0 * step);
            let err = rel_error(numeric, analytic[i], floor);
            if err > report.params {
                report.params = err;
                report.worst_param = pi;
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

fn pick<R: rand::Rng>(n: usize, max: usize, rng: &mut R) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    rand::seq::index::sample(rng, n, max).into_vec()
}
