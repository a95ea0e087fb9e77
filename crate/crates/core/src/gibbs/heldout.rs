use crate::count_models::log_poisson_vec;
use crate::predictor::FittedModel;
use crate::trace_ingest::CountVectorSequence;

fn log_sum_exp(vals: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = vals.collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Forward-algorithm log-likelihood of `data` with `Poisson(μ_k)` emissions.
///
/// The exchangeable kinds store their mixture weights in every row of `π`,
/// so the same recursion gives the i.i.d. mixture likelihood.
pub fn heldout_loglik(model: &FittedModel, data: &CountVectorSequence) -> f64 {
    let k_len = model.num_clusters();
    let log_pi: Vec<Vec<f64>> = model
        .pi
        .iter()
        .map(|row| row.iter().map(|p| p.ln()).collect())
        .collect();
    let mut alpha: Vec<f64> = Vec::new();
    for (t, x) in data.x.iter().enumerate() {
        let emit = model.mu.iter().map(|mu| log_poisson_vec(x, mu));
        alpha = if t == 0 {
            emit.zip(&model.pi0).map(|(e, p)| e + p.ln()).collect()
        } else {
            emit.enumerate()
                .map(|(l, e)| e + log_sum_exp((0..k_len).map(|k| alpha[k] + log_pi[k][l])))
                .collect()
        };
    }
    if alpha.is_empty() {
        0.0
    } else {
        log_sum_exp(alpha.into_iter())
    }
}
