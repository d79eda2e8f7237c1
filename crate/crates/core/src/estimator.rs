//! Deployment of a trained network as a blind channel estimator, and the
//! testing MSE in both the frequency and time domains.

use crate::dataset::{unstack_label, LabeledSample};
use crate::linalg::CMat;
use crate::nn::{ReluNetwork, TrainError, Trainability};
use crate::ofdm::dft_matrix;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("network output has length {got}, expected 2 N^2 = {want}")]
    OutputDim { want: usize, got: usize },
    #[error("estimate and truth lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty test set")]
    EmptyTestSet,
    #[error(transparent)]
    Net(#[from] TrainError),
}

/// One reconstructed subcarrier coupling matrix.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub h_hat: CMat,
    pub symbol_index: u64,
    pub squared_error: f64,
}

/// Run the network on a sample and reshape the output back into an N x N
/// complex matrix (the inverse of the label stacking).
pub fn estimate(
    net: &ReluNetwork,
    sample: &LabeledSample,
) -> Result<ChannelEstimate, EstimatorError> {
    let (y, _) = net.forward(&sample.x)?;
    let d_y = y.len();
    let n_sq = d_y / 2;
    let n = (n_sq as f64).sqrt().round() as usize;
    if 2 * n * n != d_y {
        return Err(EstimatorError::OutputDim {
            want: 2 * n * n,
            got: d_y,
        });
    }
    let h_hat = unstack_label(&y, n);
    let squared_error: f64 = y
        .iter()
        .zip(&sample.y_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(ChannelEstimate {
        h_hat,
        symbol_index: sample.symbol_index,
        squared_error,
    })
}

/// Testing MSE (1/(2 n N^2)) sum ||y - y*||^2, summed in test-set order.
pub fn testing_mse(net: &ReluNetwork, test_set: &[LabeledSample]) -> Result<f64, EstimatorError> {
    if test_set.is_empty() {
        return Err(EstimatorError::EmptyTestSet);
    }
    let mut acc = 0.0;
    for s in test_set {
        acc += estimate(net, s)?.squared_error;
    }
    let d_y = test_set[0].label_dim() as f64;
    Ok(acc / (d_y * test_set.len() as f64))
}

/// Frequency-domain MSE straight from matrix pairs.
pub fn frequency_domain_mse(estimates: &[CMat], truths: &[CMat]) -> Result<f64, EstimatorError> {
    if estimates.len() != truths.len() {
        return Err(EstimatorError::LengthMismatch(
            estimates.len(),
            truths.len(),
        ));
    }
    if estimates.is_empty() {
        return Err(EstimatorError::EmptyTestSet);
    }
    let n = truths[0].rows();
    let mut acc = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        let d = e.sub(t).frobenius_norm();
        acc += d * d;
    }
    Ok(acc / (2.0 * estimates.len() as f64 * (n * n) as f64))
}

/// Time-domain MSE: transform both lists through F^H (.) F and average the
/// Frobenius errors. Equals the frequency-domain MSE by unitarity.
pub fn time_domain_mse(estimates: &[CMat], truths: &[CMat]) -> Result<f64, EstimatorError> {
    if estimates.len() != truths.len() {
        return Err(EstimatorError::LengthMismatch(
            estimates.len(),
            truths.len(),
        ));
    }
    if estimates.is_empty() {
        return Err(EstimatorError::EmptyTestSet);
    }
    let n = truths[0].rows();
    let f = dft_matrix(n);
    let fh = f.hermitian();
    let to_time = |h: &CMat| fh.matmul(h).matmul(&f);
    let mut acc = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        let d = to_time(e).sub(&to_time(t)).frobenius_norm();
        acc += d * d;
    }
    Ok(acc / (2.0 * estimates.len() as f64 * (n * n) as f64))
}

/// One result row of an MSE-versus-SNR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub num_subcarriers: usize,
    pub depth_k: usize,
    pub width: usize,
    pub trainability: Trainability,
    pub snr_db: f64,
    pub mse: f64,
    pub n_test: usize,
    pub seed: u64,
}

pub const SWEEP_CSV_HEADER: &str = "n,k,m,trainability,snr_db,mse,n_test,seed";

pub fn trainability_csv(t: Trainability) -> &'static str {
    match t {
        Trainability::AllLayers => "all-layers",
        Trainability::HiddenOnly => "hidden-only",
    }
}

pub fn write_sweep_csv(rows: &[SweepRow], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.num_subcarriers,
            r.depth_k,
            r.width,
            trainability_csv(r.trainability),
            r.snr_db,
            r.mse,
            r.n_test,
            r.seed
        )?;
    }
    Ok(())
}
