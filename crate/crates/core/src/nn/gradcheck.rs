//! Central finite-difference check of [`ResidualMlp::backward`].

use rand::Rng;

use super::ResidualMlp;
use crate::error::Result;
use crate::rng;

/// Worst-case discrepancy found by [`grad_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// Denominator floor so entries with near-zero gradient do not report
/// round-off as relative error.
const REL_FLOOR: f64 = 1e-6;

/// Compares analytic gradients of the scalar `sum(G ⊙ net(x, c))`, with `G`
/// a fixed random projection, against central differences with step `h`.
/// Every parameter and every data-input entry is perturbed.
pub fn grad_check(
    net: &ResidualMlp<f64>,
    x: &[f64],
    c_noise: Option<&[f64]>,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut r = rng::seeded(seed);
    let out_len = x.len() / net.shape().in_dim * net.shape().out_dim;
    let proj: Vec<f64> = (0..out_len).map(|_| r.random_range(-1.0..1.0)).collect();
    let loss = |n: &ResidualMlp<f64>, x: &[f64]| -> Result<f64> {
        let out = n.predict(x, c_noise)?;
        Ok(out.iter().zip(&proj).map(|(o, g)| o * g).sum())
    };

    let (_, cache) = net.forward(x, c_noise)?;
    let analytic = net.backward(&cache, &proj)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };
    let mut record = |a: f64, n: f64| {
        let abs = (a - n).abs();
        let rel = abs / a.abs().max(n.abs()).max(REL_FLOOR);
        report.max_abs_error = report.max_abs_error.max(abs);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    };

    let mut probe = net.clone();
    for i in 0..net.param_count() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = loss(&probe, x)?;
        probe.params_mut()[i] = orig - h;
        let down = loss(&probe, x)?;
        probe.params_mut()[i] = orig;
        record(analytic.params[i], (up - down) / (2.0 * h));
    }
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let up = loss(net, &xp)?;
        xp[i] = orig - h;
        let down = loss(net, &xp)?;
        xp[i] = orig;
        record(analytic.input[i], (up - down) / (2.0 * h));
    }
    Ok(report)
}
