//! Python bindings: configuration and derived physics, sample generation,
//! the ReLU network with training, the MSE sweep, and the bound evaluators.

use dsce_core::channel::{build_matrices, sample_bem, BemVarianceTable};
use dsce_core::config::ExperimentConfig;
use dsce_core::dataset;
use dsce_core::estimator;
use dsce_core::nn::{self, OptState, ReluNetwork, TrainConfig, Trainability};
use dsce_core::ofdm::OfdmConfig;
use dsce_core::pipeline;
use dsce_core::rng::{purpose, substream};
use dsce_core::special;
use dsce_core::theory;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn to_py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Validated OFDM configuration with derived physics.
#[pyclass(name = "OfdmConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyOfdmConfig {
    inner: OfdmConfig,
}

#[pymethods]
impl PyOfdmConfig {
    /// CBRS-band reference configuration; N in {32, 64, 128} matches the
    /// reference parameter set.
    #[staticmethod]
    fn cbrs(num_subcarriers: usize) -> PyResult<Self> {
        Ok(Self {
            inner: OfdmConfig::cbrs(num_subcarriers).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn num_subcarriers(&self) -> usize {
        self.inner.num_subcarriers()
    }

    #[getter]
    fn cp_len(&self) -> usize {
        self.inner.cp_len()
    }

    #[getter]
    fn block_len(&self) -> usize {
        self.inner.block_len()
    }

    #[getter]
    fn channel_order(&self) -> usize {
        self.inner.channel_order()
    }

    #[getter]
    fn bem_order(&self) -> usize {
        self.inner.bem_order()
    }

    #[getter]
    fn sample_period_s(&self) -> f64 {
        self.inner.sample_period_s()
    }

    #[getter]
    fn max_doppler_hz(&self) -> f64 {
        self.inner.max_doppler_hz()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn label_dim(&self) -> usize {
        self.inner.label_dim()
    }

    #[getter]
    fn config_hash(&self) -> String {
        format!("{:016x}", self.inner.config_hash())
    }

    fn __repr__(&self) -> String {
        format!(
            "OfdmConfig(N={}, N_cp={}, L={}, Q={}, block={})",
            self.inner.num_subcarriers(),
            self.inner.cp_len(),
            self.inner.channel_order(),
            self.inner.bem_order(),
            self.inner.block_len()
        )
    }
}

/// One generated sample: normalized input, stacked label, and the
/// frequency-domain channel matrix (row-major re/im pair).
#[pyfunction]
#[pyo3(signature = (cfg, symbol_index, snr_db, seed))]
fn generate_sample(
    cfg: &PyOfdmConfig,
    symbol_index: u64,
    snr_db: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let physics = &cfg.inner;
    let table = BemVarianceTable::build(physics).map_err(to_py_err)?;
    let mut ch_rng = substream(seed, &[purpose::CHANNEL, symbol_index]);
    let realization = sample_bem(physics, &table, symbol_index, &mut ch_rng);
    let matrices = build_matrices(&realization, physics);
    let mut sym_rng = substream(seed, &[purpose::SYMBOLS, symbol_index]);
    let d = dsce_core::ofdm::qpsk_symbols(physics.num_subcarriers(), &mut sym_rng);
    let noiseless = matrices.freq.mul_vec(&d).map_err(to_py_err)?;
    let energy: f64 = noiseless.iter().map(|z| z.norm_sqr()).sum();
    let sigma_sq =
        physics
            .snr_convention()
            .noise_variance(energy, snr_db, physics.num_subcarriers());
    let mut noise_rng = substream(seed, &[purpose::NOISE, symbol_index]);
    let y_tilde: Vec<_> = noiseless
        .iter()
        .map(|z| z + dsce_core::ofdm::complex_gaussian(sigma_sq, &mut noise_rng))
        .collect();
    let sample =
        dataset::build_sample(&y_tilde, &matrices.freq, snr_db, symbol_index).map_err(to_py_err)?;
    Ok((sample.x, sample.y_star))
}

/// The ReLU feedforward network.
#[pyclass(name = "ReluNetwork")]
struct PyReluNetwork {
    net: ReluNetwork,
}

fn parse_trainability(s: &str) -> PyResult<Trainability> {
    match s {
        "all-layers" => Ok(Trainability::AllLayers),
        "hidden-only" => Ok(Trainability::HiddenOnly),
        other => Err(PyValueError::new_err(format!(
            "unknown trainability '{other}' (expected 'all-layers' or 'hidden-only')"
        ))),
    }
}

#[pymethods]
impl PyReluNetwork {
    #[new]
    #[pyo3(signature = (width, input_dim, output_dim, depth_k, trainability="hidden-only", seed=0))]
    fn new(
        width: usize,
        input_dim: usize,
        output_dim: usize,
        depth_k: usize,
        trainability: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let t = parse_trainability(trainability)?;
        let mut rng = substream(seed, &[purpose::NET_INIT]);
        Ok(Self {
            net: ReluNetwork::init(width, input_dim, output_dim, depth_k, t, &mut rng),
        })
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let (y, _) = self.net.forward(&x).map_err(to_py_err)?;
        Ok(y)
    }

    /// Reconstruct the channel estimate from a sample input; returns the
    /// row-major (re, im) parts of the estimated N x N matrix.
    fn estimate(&self, x: Vec<f64>, y_star: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let sample = dataset::LabeledSample {
            x,
            y_star,
            snr_db: 0.0,
            symbol_index: 0,
        };
        let est = estimator::estimate(&self.net, &sample).map_err(to_py_err)?;
        let re = est.h_hat.data().iter().map(|z| z.re).collect();
        let im = est.h_hat.data().iter().map(|z| z.im).collect();
        Ok((re, im))
    }

    #[getter]
    fn width(&self) -> usize {
        self.net.width()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.net.output_dim()
    }
}

/// Train a network on a small in-memory dataset; returns (epoch, train_loss,
/// val_loss) tuples. Mirrors the CLI train command at reduced scale.
#[pyfunction]
#[pyo3(signature = (cfg, n_train, width, depth_k, trainability="hidden-only", max_epochs=4, seed=0))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn train_quick(
    cfg: &PyOfdmConfig,
    n_train: usize,
    width: usize,
    depth_k: usize,
    trainability: &str,
    max_epochs: usize,
    seed: u64,
) -> PyResult<(PyReluNetwork, Vec<(usize, f64, f64)>)> {
    let physics = &cfg.inner;
    let spec = dataset::DatasetSpec {
        n_train,
        n_test: 1,
        seed,
        ..dataset::DatasetSpec::default()
    };
    let (train_all, _) = dataset::generate(&spec, physics).map_err(to_py_err)?;
    let (train, val) = dataset::split_train_val(&train_all, 0.75, seed);
    let t = parse_trainability(trainability)?;
    let mut rng = substream(seed, &[purpose::NET_INIT]);
    let mut net = ReluNetwork::init(
        width,
        physics.input_dim(),
        physics.label_dim(),
        depth_k,
        t,
        &mut rng,
    );
    let train_cfg = TrainConfig {
        max_epochs,
        seed,
        ..TrainConfig::default()
    };
    let mut opt = OptState::new(&net, &train_cfg);
    let report = nn::fit(&mut net, &mut opt, &train, &val, &train_cfg).map_err(to_py_err)?;
    let history = report
        .history
        .iter()
        .map(|e| (e.epoch, e.train_loss, e.val_loss))
        .collect();
    Ok((PyReluNetwork { net }, history))
}

/// Testing MSE of a network over a freshly generated test set at one SNR.
#[pyfunction]
fn testing_mse(
    cfg: &PyOfdmConfig,
    net: &PyReluNetwork,
    n_test: usize,
    snr_db: f64,
    seed: u64,
) -> PyResult<f64> {
    let test = dataset::generate_test_set(&cfg.inner, n_test, snr_db, 1_000_000, seed)
        .map_err(to_py_err)?;
    estimator::testing_mse(&net.net, &test).map_err(to_py_err)
}

/// Full config-driven experiment: train then sweep the SNR grid.
/// Returns (snr_db, mse) rows.
#[pyfunction]
fn run_experiment(config_toml: &str) -> PyResult<Vec<(f64, f64)>> {
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(to_py_err)?;
    let model = pipeline::train_from_config(&cfg).map_err(to_py_err)?;
    let rows = pipeline::sweep_snr(&cfg, &model.physics, &model.net).map_err(to_py_err)?;
    Ok(rows.into_iter().map(|r| (r.snr_db, r.mse)).collect())
}

/// Run the numerical bound-verification suite; returns (claim, verdict) rows.
#[pyfunction]
fn verify_theory(cfg: &PyOfdmConfig, seed: u64) -> PyResult<Vec<(String, String)>> {
    let reports = theory::default_suite(&cfg.inner, seed).map_err(to_py_err)?;
    Ok(reports
        .into_iter()
        .map(|r| (r.claim, r.verdict.as_str().to_string()))
        .collect())
}

#[pyfunction]
fn erf(x: f64) -> f64 {
    special::erf(x)
}

#[pyfunction]
fn gamma(x: f64) -> f64 {
    special::gamma(x)
}

#[pyfunction]
fn closed_form_cubic_integral(c: f64) -> f64 {
    theory::closed_form_cubic_integral(c)
}

#[pyfunction]
fn quadrature_cubic_integral(c: f64) -> f64 {
    theory::quadrature_cubic_integral(c)
}

#[pyfunction]
fn label_norm_prob_lower_bound(channel_order: usize, bem_order: usize) -> f64 {
    theory::label_norm_prob_lower_bound(channel_order, bem_order)
}

/// Non-asymptotic MSE probability bound; raises ValueError naming the
/// violated condition when the parameters are infeasible.
#[pyfunction]
#[pyo3(signature = (width, num_subcarriers, t, c_sigma, channel_order, bem_order, n_test))]
fn mse_bound_rhs(
    width: usize,
    num_subcarriers: usize,
    t: f64,
    c_sigma: f64,
    channel_order: usize,
    bem_order: usize,
    n_test: usize,
) -> PyResult<f64> {
    let p = theory::MseBoundParams {
        width,
        num_subcarriers,
        t,
        c_sigma,
        channel_order,
        bem_order,
        n_test,
    };
    match theory::mse_bound_rhs(&p) {
        theory::MseBoundOutcome::Value(v) => Ok(v),
        theory::MseBoundOutcome::NotApplicable { condition } => {
            Err(PyValueError::new_err(condition))
        }
    }
}

#[pyfunction]
fn mse_bound_c_sigma_threshold(width: usize, num_subcarriers: usize) -> f64 {
    theory::mse_bound_c_sigma_threshold(width, num_subcarriers)
}

#[pymodule]
fn dsce_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOfdmConfig>()?;
    m.add_class::<PyReluNetwork>()?;
    m.add_function(wrap_pyfunction!(generate_sample, m)?)?;
    m.add_function(wrap_pyfunction!(train_quick, m)?)?;
    m.add_function(wrap_pyfunction!(testing_mse, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_theory, m)?)?;
    m.add_function(wrap_pyfunction!(erf, m)?)?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_cubic_integral, m)?)?;
    m.add_function(wrap_pyfunction!(quadrature_cubic_integral, m)?)?;
    m.add_function(wrap_pyfunction!(label_norm_prob_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mse_bound_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(mse_bound_c_sigma_threshold, m)?)?;
    Ok(())
}
