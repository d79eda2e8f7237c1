//! Training/testing sample construction from simulated receptions, and the
//! on-disk dataset container.
//!
//! A sample's input is the normalized real/imaginary split of the post-DFT
//! reception plus a bias slot; the label is the vectorized real/imaginary
//! split of the subcarrier coupling matrix.

use crate::channel::{build_matrices, sample_bem, BemVarianceTable, ChannelError};
use crate::linalg::CMat;
use crate::ofdm::{complex_gaussian, qpsk_symbols, OfdmConfig};
use crate::rng::{purpose, substream};
use num_complex::Complex64;
use rand::Rng;
use std::io::{Read, Write};
use thiserror::Error;

pub const BIAS: f64 = std::f64::consts::FRAC_1_SQRT_2;

const DATASET_MAGIC: &[u8; 4] = b"DSDS";
const DATASET_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("received vector is zero; the input normalization is undefined")]
    ZeroReception,
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad dataset file: {0}")]
    BadFile(String),
}

/// One labeled sample: x in R^{2N+1} with unit norm, label in R^{2N^2}.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y_star: Vec<f64>,
    pub snr_db: f64,
    pub symbol_index: u64,
}

impl LabeledSample {
    pub fn input_dim(&self) -> usize {
        self.x.len()
    }

    pub fn label_dim(&self) -> usize {
        self.y_star.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub test_snr_grid_db: Vec<f64>,
    pub train_val_split: f64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(DatasetError::InvalidSpec(
                "sample counts must be at least 1".into(),
            ));
        }
        if !(self.train_val_split > 0.0 && self.train_val_split < 1.0) {
            return Err(DatasetError::InvalidSpec(format!(
                "train/validation split must lie in (0, 1), got {}",
                self.train_val_split
            )));
        }
        if self.snr_min_db > self.snr_max_db {
            return Err(DatasetError::InvalidSpec(
                "snr_min_db must not exceed snr_max_db".into(),
            ));
        }
        if self.test_snr_grid_db.is_empty() {
            return Err(DatasetError::InvalidSpec(
                "test SNR grid must not be empty".into(),
            ));
        }
        Ok(())
    }
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_train: 5000,
            n_test: 1000,
            snr_min_db: -10.0,
            snr_max_db: 40.0,
            test_snr_grid_db: vec![-10.0, 0.0, 10.0, 20.0, 30.0, 40.0],
            train_val_split: 0.75,
            seed: 0,
        }
    }
}

/// Build x = [Xi Re{y~}; Xi Im{y~}; 1/sqrt(2)] and the stacked label
/// vec([Re H~, Im H~]) (column-major).
pub fn build_sample(
    y_tilde: &[Complex64],
    h_freq: &CMat,
    snr_db: f64,
    symbol_index: u64,
) -> Result<LabeledSample, DatasetError> {
    let energy: f64 = y_tilde.iter().map(|z| z.norm_sqr()).sum();
    if energy <= 0.0 {
        return Err(DatasetError::ZeroReception);
    }
    let xi = 1.0 / (2.0 * energy).sqrt();
    let n = y_tilde.len();
    let mut x = Vec::with_capacity(2 * n + 1);
    x.extend(y_tilde.iter().map(|z| xi * z.re));
    x.extend(y_tilde.iter().map(|z| xi * z.im));
    x.push(BIAS);
    Ok(LabeledSample {
        x,
        y_star: stack_label(h_freq),
        snr_db,
        symbol_index,
    })
}

/// vec([Re H~, Im H~]): column-major real part, then column-major imaginary
/// part.
pub fn stack_label(h: &CMat) -> Vec<f64> {
    let n = h.rows();
    debug_assert_eq!(h.cols(), n);
    let mut out = Vec::with_capacity(2 * n * n);
    for c in 0..n {
        for r in 0..n {
            out.push(h.get(r, c).re);
        }
    }
    for c in 0..n {
        for r in 0..n {
            out.push(h.get(r, c).im);
        }
    }
    out
}

/// Inverse of [`stack_label`].
pub fn unstack_label(y: &[f64], n: usize) -> CMat {
    debug_assert_eq!(y.len(), 2 * n * n);
    CMat::from_fn(n, n, |r, c| {
        Complex64::new(y[c * n + r], y[n * n + c * n + r])
    })
}

/// Generate one symbol's reception through the frequency-domain model
/// y~ = H~ d + z~ and package it as a sample.
fn generate_one(
    cfg: &OfdmConfig,
    table: &BemVarianceTable,
    symbol_index: u64,
    snr_db: f64,
    seed: u64,
) -> Result<LabeledSample, DatasetError> {
    let mut ch_rng = substream(seed, &[purpose::CHANNEL, symbol_index]);
    let realization = sample_bem(cfg, table, symbol_index, &mut ch_rng);
    let matrices = build_matrices(&realization, cfg);
    let mut sym_rng = substream(seed, &[purpose::SYMBOLS, symbol_index]);
    let d = qpsk_symbols(cfg.num_subcarriers(), &mut sym_rng);
    let noiseless = matrices
        .freq
        .mul_vec(&d)
        .expect("config-consistent dimensions");
    let signal_energy: f64 = noiseless.iter().map(|z| z.norm_sqr()).sum();
    let sigma_sq =
        cfg.snr_convention()
            .noise_variance(signal_energy, snr_db, cfg.num_subcarriers());
    let mut noise_rng = substream(seed, &[purpose::NOISE, symbol_index]);
    let y_tilde: Vec<Complex64> = noiseless
        .iter()
        .map(|z| z + complex_gaussian(sigma_sq, &mut noise_rng))
        .collect();
    build_sample(&y_tilde, &matrices.freq, snr_db, symbol_index)
}

/// Generate the training and testing sets. Training SNRs are drawn once per
/// symbol, uniform in dB over the spec range; testing symbols cycle through
/// the fixed SNR grid.
pub fn generate(
    spec: &DatasetSpec,
    cfg: &OfdmConfig,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>), DatasetError> {
    spec.validate()?;
    let table = BemVarianceTable::build(cfg)?;
    let mut train = Vec::with_capacity(spec.n_train);
    for i in 0..spec.n_train as u64 {
        let mut snr_rng = substream(spec.seed, &[purpose::SNR, i]);
        let snr_db = snr_rng.random_range(spec.snr_min_db..spec.snr_max_db);
        train.push(generate_one(cfg, &table, i, snr_db, spec.seed)?);
    }
    let mut test = Vec::with_capacity(spec.n_test);
    for j in 0..spec.n_test as u64 {
        let i = spec.n_train as u64 + j;
        let snr_db = spec.test_snr_grid_db[(j as usize) % spec.test_snr_grid_db.len()];
        test.push(generate_one(cfg, &table, i, snr_db, spec.seed)?);
    }
    Ok((train, test))
}

/// Fresh test set at one fixed SNR, indexed after the training range.
pub fn generate_test_set(
    cfg: &OfdmConfig,
    n_test: usize,
    snr_db: f64,
    first_index: u64,
    seed: u64,
) -> Result<Vec<LabeledSample>, DatasetError> {
    let table = BemVarianceTable::build(cfg)?;
    (0..n_test as u64)
        .map(|j| generate_one(cfg, &table, first_index + j, snr_db, seed))
        .collect()
}

/// Deterministic shuffled split into (training, validation) parts.
pub fn split_train_val(
    samples: &[LabeledSample],
    split: f64,
    seed: u64,
) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = substream(seed, &[purpose::SHUFFLE]);
    // Fisher-Yates
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let n_train = ((samples.len() as f64) * split).round() as usize;
    let n_train = n_train.clamp(1, samples.len().saturating_sub(1).max(1));
    let train = order[..n_train]
        .iter()
        .map(|&i| samples[i].clone())
        .collect();
    let val = order[n_train..]
        .iter()
        .map(|&i| samples[i].clone())
        .collect();
    (train, val)
}

/// Minimum pairwise input distance over a batch (the separateness margin).
pub fn separateness(samples: &[LabeledSample]) -> f64 {
    let mut min = f64::INFINITY;
    for (i, a) in samples.iter().enumerate() {
        for b in samples.iter().skip(i + 1) {
            let d: f64 =
                a.x.iter()
                    .zip(&b.x)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
            min = min.min(d);
        }
    }
    min
}

/// Write samples in the little-endian binary container.
///
/// Layout: magic "DSDS", version u32, config_hash u64, n_samples u64,
/// d_x u64, d_y u64, then per sample: symbol_index u64, snr_db f64,
/// d_x input f64s, d_y label f64s.
pub fn write_binary(
    samples: &[LabeledSample],
    config_hash: u64,
    w: &mut impl Write,
) -> Result<(), DatasetError> {
    if samples.is_empty() {
        return Err(DatasetError::InvalidSpec(
            "refusing to write an empty dataset".into(),
        ));
    }
    let d_x = samples[0].input_dim() as u64;
    let d_y = samples[0].label_dim() as u64;
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&config_hash.to_le_bytes())?;
    w.write_all(&(samples.len() as u64).to_le_bytes())?;
    w.write_all(&d_x.to_le_bytes())?;
    w.write_all(&d_y.to_le_bytes())?;
    for s in samples {
        w.write_all(&s.symbol_index.to_le_bytes())?;
        w.write_all(&s.snr_db.to_le_bytes())?;
        for v in s.x.iter().chain(&s.y_star) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read a binary dataset back; returns (samples, config_hash).
pub fn read_binary(r: &mut impl Read) -> Result<(Vec<LabeledSample>, u64), DatasetError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(DatasetError::BadFile("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != DATASET_VERSION {
        return Err(DatasetError::BadFile(format!(
            "unsupported version {version}"
        )));
    }
    let config_hash = read_u64(r)?;
    let n_samples = read_u64(r)? as usize;
    let d_x = read_u64(r)? as usize;
    let d_y = read_u64(r)? as usize;
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let symbol_index = read_u64(r)?;
        let snr_db = read_f64(r)?;
        let mut x = Vec::with_capacity(d_x);
        for _ in 0..d_x {
            x.push(read_f64(r)?);
        }
        let mut y_star = Vec::with_capacity(d_y);
        for _ in 0..d_y {
            y_star.push(read_f64(r)?);
        }
        samples.push(LabeledSample {
            x,
            y_star,
            snr_db,
            symbol_index,
        });
    }
    Ok((samples, config_hash))
}

/// CSV export: one row per sample, full double precision.
pub fn write_csv(
    samples: &[LabeledSample],
    config_hash: u64,
    w: &mut impl Write,
) -> Result<(), DatasetError> {
    if samples.is_empty() {
        return Err(DatasetError::InvalidSpec(
            "refusing to write an empty dataset".into(),
        ));
    }
    let d_x = samples[0].input_dim();
    let d_y = samples[0].label_dim();
    write!(w, "config_hash,symbol_index,snr_db")?;
    for i in 0..d_x {
        write!(w, ",x{i}")?;
    }
    for i in 0..d_y {
        write!(w, ",y{i}")?;
    }
    writeln!(w)?;
    for s in samples {
        write!(w, "{:016x},{},{}", config_hash, s.symbol_index, s.snr_db)?;
        for v in s.x.iter().chain(&s.y_star) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn small_spec() -> DatasetSpec {
        DatasetSpec {
            n_train: 10,
            n_test: 5,
            seed: 42,
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn sample_has_unit_norm_and_bias() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let (train, test) = generate(&small_spec(), &cfg).unwrap();
        assert_eq!(train.len(), 10);
        assert_eq!(test.len(), 5);
        for s in train.iter().chain(&test) {
            assert_eq!(s.input_dim(), cfg.input_dim());
            assert_eq!(s.label_dim(), cfg.label_dim());
            assert!((norm(&s.x) - 1.0).abs() < 1e-12);
            assert_eq!(*s.x.last().unwrap(), BIAS);
        }
    }

    #[test]
    fn constant_reception_hand_normalization() {
        // y~ = (1 + j) * ones: every input entry is 1/(2 sqrt(N))
        let n = 16;
        let y: Vec<Complex64> = vec![Complex64::new(1.0, 1.0); n];
        let h = CMat::zeros(n, n);
        let s = build_sample(&y, &h, 0.0, 0).unwrap();
        let want = 1.0 / (2.0 * (n as f64).sqrt());
        for v in &s.x[..2 * n] {
            assert!((v - want).abs() < 1e-14);
        }
        assert_eq!(s.x[2 * n], BIAS);
        assert_eq!(s.y_star.len(), 2 * n * n);
    }

    #[test]
    fn zero_reception_rejected() {
        let y = vec![Complex64::ZERO; 8];
        let h = CMat::zeros(8, 8);
        assert!(matches!(
            build_sample(&y, &h, 0.0, 0),
            Err(DatasetError::ZeroReception)
        ));
    }

    #[test]
    fn label_stacking_round_trips() {
        let n = 5;
        let h = CMat::from_fn(n, n, |r, c| {
            Complex64::new((r * n + c) as f64, -(r as f64) + 0.5 * c as f64)
        });
        let y = stack_label(&h);
        // spot-check the column-major convention
        assert_eq!(y[0], h.get(0, 0).re);
        assert_eq!(y[1], h.get(1, 0).re);
        assert_eq!(y[n * n], h.get(0, 0).im);
        let back = unstack_label(&y, n);
        assert_eq!(back, h);
    }

    #[test]
    fn full_scale_spec_accepted() {
        // the full experiment scale validates (not generated here)
        let spec = DatasetSpec {
            n_train: 30_000,
            n_test: 15_000,
            ..DatasetSpec::default()
        };
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let (a_train, a_test) = generate(&small_spec(), &cfg).unwrap();
        let (b_train, b_test) = generate(&small_spec(), &cfg).unwrap();
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        let different = DatasetSpec {
            seed: 43,
            ..small_spec()
        };
        let (c_train, _) = generate(&different, &cfg).unwrap();
        assert_ne!(a_train[0].x, c_train[0].x);
    }

    #[test]
    fn test_snrs_cycle_grid_and_train_snrs_in_range() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let spec = DatasetSpec {
            n_train: 20,
            n_test: 12,
            seed: 7,
            ..DatasetSpec::default()
        };
        let (train, test) = generate(&spec, &cfg).unwrap();
        for s in &train {
            assert!(s.snr_db >= -10.0 && s.snr_db < 40.0);
        }
        for (j, s) in test.iter().enumerate() {
            assert_eq!(s.snr_db, spec.test_snr_grid_db[j % 6]);
        }
    }

    #[test]
    fn separateness_is_positive() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let spec = DatasetSpec {
            n_train: 100,
            n_test: 1,
            seed: 3,
            ..DatasetSpec::default()
        };
        let (train, _) = generate(&spec, &cfg).unwrap();
        let delta = separateness(&train);
        assert!(delta > 0.0);
        println!("empirical separateness delta over 100 samples: {delta}");
    }

    #[test]
    fn label_energy_mean_is_n() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let spec = DatasetSpec {
            n_train: 10_000,
            n_test: 1,
            seed: 12,
            ..DatasetSpec::default()
        };
        let (train, _) = generate(&spec, &cfg).unwrap();
        let mean: f64 = train
            .iter()
            .map(|s| s.y_star.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / train.len() as f64;
        assert!(
            (mean - 32.0).abs() / 32.0 < 0.02,
            "mean label energy {mean}"
        );
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let (train, _) = generate(&small_spec(), &cfg).unwrap();
        let (a, b) = split_train_val(&train, 0.75, 9);
        let (a2, b2) = split_train_val(&train, 0.75, 9);
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        assert_eq!(a.len() + b.len(), train.len());
        assert_eq!(a.len(), 8);
    }

    #[test]
    fn binary_round_trip_and_csv_shape() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let (train, _) = generate(&small_spec(), &cfg).unwrap();
        let mut buf = Vec::new();
        write_binary(&train, cfg.config_hash(), &mut buf).unwrap();
        let (back, hash) = read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(hash, cfg.config_hash());
        assert_eq!(back, train);

        let mut csv = Vec::new();
        write_csv(&train[..2], cfg.config_hash(), &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(
            header.split(',').count(),
            3 + cfg.input_dim() + cfg.label_dim()
        );
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn corrupted_file_rejected() {
        let err = read_binary(&mut &b"NOPE"[..]).unwrap_err();
        assert!(matches!(err, DatasetError::BadFile(_)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn any_nonzero_reception_normalizes_to_unit_input(
            re in proptest::collection::vec(-100.0f64..100.0, 8),
            im in proptest::collection::vec(-100.0f64..100.0, 8),
        ) {
            let y: Vec<Complex64> = re.iter().zip(&im)
                .map(|(&a, &b)| Complex64::new(a, b)).collect();
            prop_assume!(y.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-12);
            let h = CMat::zeros(8, 8);
            let s = build_sample(&y, &h, 0.0, 0).unwrap();
            prop_assert!((norm(&s.x) - 1.0).abs() < 1e-12);
            // signal entries carry exactly half the energy, the bias the other half
            let sig: f64 = s.x[..16].iter().map(|v| v * v).sum();
            prop_assert!((sig - 0.5).abs() < 1e-12);
        }
    }
}
