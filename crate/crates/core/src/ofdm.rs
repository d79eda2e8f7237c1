//! OFDM transceiver chain: configuration with derived physics, symbol
//! mapping, (I)DFT, cyclic prefix handling, time-varying channel filtering,
//! and post-DFT reception.

use crate::linalg::{dim_err, CMat, DimError};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const SPEED_OF_LIGHT_MPS: f64 = 3.0e8;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be positive")]
    NonPositive { field: &'static str },
    #[error(
        "cyclic prefix shorter than channel memory: N_cp = {n_cp} < L - 1 = {}",
        l - 1
    )]
    CyclicPrefixTooShort { n_cp: usize, l: usize },
    #[error("underspread assumption violated: 2 * f_max * tau_max = {product} >= 1")]
    NotUnderspread { product: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum OfdmError {
    #[error(transparent)]
    Dim(#[from] DimError),
    #[error("noise variance must be non-negative, got {0}")]
    NegativeNoiseVariance(f64),
}

/// Mapping from an SNR value to a noise variance. The SNR is defined as the
/// ratio of the noiseless received-symbol energy ||H~ d||^2 to a noise
/// quantity; the two conventions differ in whether that quantity is the
/// per-sample variance sigma^2 or the per-symbol noise energy N sigma^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrConvention {
    /// sigma^2 = ||H~ d||^2 / gamma  (the literal reading; default)
    #[default]
    NoiseVariance,
    /// sigma^2 = ||H~ d||^2 / (N * gamma)
    NoiseEnergy,
}

impl SnrConvention {
    pub fn noise_variance(self, signal_energy: f64, snr_db: f64, n: usize) -> f64 {
        let gamma = 10f64.powf(snr_db / 10.0);
        match self {
            SnrConvention::NoiseVariance => signal_energy / gamma,
            SnrConvention::NoiseEnergy => signal_energy / (gamma * n as f64),
        }
    }
}

/// User-specified physical parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OfdmParams {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    pub num_subcarriers: usize,
    pub cp_len: usize,
    pub max_delay_spread_s: f64,
    pub max_velocity_mps: f64,
    #[serde(default = "default_light_speed")]
    pub light_speed_mps: f64,
    #[serde(default)]
    pub snr_convention: SnrConvention,
}

fn default_light_speed() -> f64 {
    SPEED_OF_LIGHT_MPS
}

impl OfdmParams {
    /// CBRS-band reference parameters; N in {32, 64, 128}.
    pub fn cbrs(num_subcarriers: usize) -> Self {
        Self {
            carrier_freq_hz: 3.55e9,
            bandwidth_hz: 10.24e6,
            num_subcarriers,
            cp_len: 10,
            max_delay_spread_s: 500e-9,
            max_velocity_mps: 160.0 / 3.6,
            light_speed_mps: SPEED_OF_LIGHT_MPS,
            snr_convention: SnrConvention::NoiseVariance,
        }
    }
}

/// Validated configuration with all derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    params: OfdmParams,
    subcarrier_spacing_hz: f64,
    useful_duration_s: f64,
    sample_period_s: f64,
    max_doppler_hz: f64,
    channel_order: usize,
    bem_order: usize,
    block_len: usize,
}

impl OfdmConfig {
    pub fn new(params: OfdmParams) -> Result<Self, ConfigError> {
        for (v, field) in [
            (params.carrier_freq_hz, "carrier_freq_hz"),
            (params.bandwidth_hz, "bandwidth_hz"),
            (params.max_delay_spread_s, "max_delay_spread_s"),
            (params.max_velocity_mps, "max_velocity_mps"),
            (params.light_speed_mps, "light_speed_mps"),
        ] {
            if v <= 0.0 || v.is_nan() {
                return Err(ConfigError::NonPositive { field });
            }
        }
        if params.num_subcarriers == 0 {
            return Err(ConfigError::NonPositive {
                field: "num_subcarriers",
            });
        }
        let n = params.num_subcarriers;
        let subcarrier_spacing_hz = params.bandwidth_hz / n as f64;
        let useful_duration_s = 1.0 / subcarrier_spacing_hz;
        let sample_period_s = useful_duration_s / n as f64;
        let max_doppler_hz =
            params.carrier_freq_hz * params.max_velocity_mps / params.light_speed_mps;
        let channel_order = (params.max_delay_spread_s / sample_period_s).ceil() as usize;
        let underspread = 2.0 * max_doppler_hz * params.max_delay_spread_s;
        if underspread >= 1.0 {
            return Err(ConfigError::NotUnderspread {
                product: underspread,
            });
        }
        if params.cp_len + 1 < channel_order {
            return Err(ConfigError::CyclicPrefixTooShort {
                n_cp: params.cp_len,
                l: channel_order,
            });
        }
        let block_len = n + params.cp_len;
        let bem_order = 2 * (max_doppler_hz * block_len as f64 * sample_period_s).ceil() as usize;
        Ok(Self {
            params,
            subcarrier_spacing_hz,
            useful_duration_s,
            sample_period_s,
            max_doppler_hz,
            channel_order,
            bem_order,
            block_len,
        })
    }

    pub fn cbrs(num_subcarriers: usize) -> Result<Self, ConfigError> {
        Self::new(OfdmParams::cbrs(num_subcarriers))
    }

    pub fn params(&self) -> &OfdmParams {
        &self.params
    }

    /// N
    pub fn num_subcarriers(&self) -> usize {
        self.params.num_subcarriers
    }

    /// N_cp
    pub fn cp_len(&self) -> usize {
        self.params.cp_len
    }

    /// N~ = N + N_cp
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// L = ceil(tau_max / T_s); lags run over [0, L-1]
    pub fn channel_order(&self) -> usize {
        self.channel_order
    }

    /// Q = 2 ceil(f_max N~ T_s); basis index q runs over [0, Q]
    pub fn bem_order(&self) -> usize {
        self.bem_order
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.subcarrier_spacing_hz
    }

    pub fn useful_duration_s(&self) -> f64 {
        self.useful_duration_s
    }

    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_s
    }

    pub fn max_doppler_hz(&self) -> f64 {
        self.max_doppler_hz
    }

    pub fn snr_convention(&self) -> SnrConvention {
        self.params.snr_convention
    }

    /// Network input dimension 2N + 1.
    pub fn input_dim(&self) -> usize {
        2 * self.params.num_subcarriers + 1
    }

    /// Label dimension 2N^2.
    pub fn label_dim(&self) -> usize {
        2 * self.params.num_subcarriers * self.params.num_subcarriers
    }

    /// Stable FNV-1a hash of the user-facing parameters, recorded in every
    /// artifact this config produces.
    pub fn config_hash(&self) -> u64 {
        let p = &self.params;
        let mut h = Fnv1a::new();
        h.write_f64(p.carrier_freq_hz);
        h.write_f64(p.bandwidth_hz);
        h.write_u64(p.num_subcarriers as u64);
        h.write_u64(p.cp_len as u64);
        h.write_f64(p.max_delay_spread_s);
        h.write_f64(p.max_velocity_mps);
        h.write_f64(p.light_speed_mps);
        h.write_u64(match p.snr_convention {
            SnrConvention::NoiseVariance => 0,
            SnrConvention::NoiseEnergy => 1,
        });
        h.finish()
    }
}

pub(crate) struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x1000_0000_01b3);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write_bytes(&v.to_le_bytes());
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_bytes(&v.to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// Unitary N-point DFT matrix: (F)_{k,l} = exp(-j 2 pi k l / N) / sqrt(N).
pub fn dft_matrix(n: usize) -> CMat {
    assert!(n >= 1, "DFT size must be at least 1");
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |k, l| {
        // reduce k*l mod N before forming the angle to keep phases exact
        let kl = (k * l) % n;
        let angle = -2.0 * PI * kl as f64 / n as f64;
        Complex64::from_polar(scale, angle)
    })
}

/// Draw a complex circular Gaussian CN(0, var) as (sigma/sqrt(2)) (g1 + j g2).
pub fn complex_gaussian(var: f64, rng: &mut impl Rng) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let g1: f64 = rng.sample(StandardNormal);
    let g2: f64 = rng.sample(StandardNormal);
    Complex64::new(s * g1, s * g2)
}

/// N i.i.d. QPSK symbols (+-1 +-j)/sqrt(2), uniform over the constellation.
pub fn qpsk_symbols(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let bits: u8 = rng.random_range(0..4);
            let re = if bits & 1 == 0 { a } else { -a };
            let im = if bits & 2 == 0 { a } else { -a };
            Complex64::new(re, im)
        })
        .collect()
}

/// IDFT followed by cyclic prefix insertion: s~ = A_cp F^H d.
pub fn ofdm_modulate_with_cp(
    d: &[Complex64],
    cfg: &OfdmConfig,
) -> Result<Vec<Complex64>, OfdmError> {
    let n = cfg.num_subcarriers();
    if d.len() != n {
        return Err(dim_err(
            format!("{n} data symbols"),
            format!("{}", d.len()),
            "OFDM modulation input",
        )
        .into());
    }
    let f = dft_matrix(n);
    let s = f.hermitian().mul_vec(d)?;
    let n_cp = cfg.cp_len();
    let mut out = Vec::with_capacity(n + n_cp);
    out.extend_from_slice(&s[n - n_cp..]);
    out.extend_from_slice(&s);
    Ok(out)
}

/// Time-varying channel filtering with additive complex Gaussian noise:
/// y[n] = sum_l h[n; l] s~[n - l] + z[n] for n in [-N_cp, N).
///
/// `taps(n, l)` supplies h^i[n; l] for time index n in [-N_cp, N) and lag
/// l in [0, L-1]. Samples of s~ before the cyclic prefix are taken as zero.
pub fn channel_filter(
    s_tilde: &[Complex64],
    cfg: &OfdmConfig,
    taps: impl Fn(i64, usize) -> Complex64,
    noise_var: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>, OfdmError> {
    let nt = cfg.block_len();
    if s_tilde.len() != nt {
        return Err(dim_err(
            format!("{nt} block samples"),
            format!("{}", s_tilde.len()),
            "channel filter input",
        )
        .into());
    }
    if noise_var < 0.0 {
        return Err(OfdmError::NegativeNoiseVariance(noise_var));
    }
    let n_cp = cfg.cp_len() as i64;
    let l_taps = cfg.channel_order();
    let mut y = Vec::with_capacity(nt);
    for idx in 0..nt as i64 {
        let n = idx - n_cp;
        let mut acc = Complex64::ZERO;
        for l in 0..l_taps {
            let src = idx - l as i64;
            if src >= 0 {
                acc += taps(n, l) * s_tilde[src as usize];
            }
        }
        if noise_var > 0.0 {
            acc += complex_gaussian(noise_var, rng);
        }
        y.push(acc);
    }
    Ok(y)
}

/// Cyclic prefix removal followed by the N-point DFT: y~ = F D_cp y.
pub fn post_dft_receive(y: &[Complex64], cfg: &OfdmConfig) -> Result<Vec<Complex64>, OfdmError> {
    let nt = cfg.block_len();
    if y.len() != nt {
        return Err(dim_err(
            format!("{nt} block samples"),
            format!("{}", y.len()),
            "post-DFT receive input",
        )
        .into());
    }
    let n = cfg.num_subcarriers();
    let f = dft_matrix(n);
    Ok(f.mul_vec(&y[cfg.cp_len()..])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{purpose, substream};
    use rand::SeedableRng;

    fn vec_norm(v: &[Complex64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn cbrs_derived_parameters_at_all_sizes() {
        for (n, nt) in [(32usize, 42usize), (64, 74), (128, 138)] {
            let cfg = OfdmConfig::cbrs(n).unwrap();
            assert_eq!(cfg.channel_order(), 6);
            assert_eq!(cfg.bem_order(), 2);
            assert_eq!(cfg.block_len(), nt);
            assert!((cfg.sample_period_s() - 97.65625e-9).abs() < 1e-18);
            assert!((cfg.max_doppler_hz() - 525.925925925926).abs() < 1e-6);
        }
        let cfg = OfdmConfig::cbrs(32).unwrap();
        assert!((cfg.subcarrier_spacing_hz() - 320e3).abs() < 1e-6);
        assert!((cfg.useful_duration_s() - 3.125e-6).abs() < 1e-18);
    }

    #[test]
    fn config_rejects_short_cp() {
        let mut p = OfdmParams::cbrs(32);
        p.cp_len = 3; // L - 1 = 5
        let err = OfdmConfig::new(p).unwrap_err();
        assert!(matches!(err, ConfigError::CyclicPrefixTooShort { .. }));
        assert!(err.to_string().contains("cyclic prefix"));
    }

    #[test]
    fn config_rejects_overspread_channel() {
        let mut p = OfdmParams::cbrs(32);
        p.max_velocity_mps = 3.0e8; // absurd doppler
        let err = OfdmConfig::new(p).unwrap_err();
        assert!(matches!(err, ConfigError::NotUnderspread { .. }));
        assert!(err.to_string().contains("underspread"));
    }

    #[test]
    fn dft_size_one_and_two() {
        let f1 = dft_matrix(1);
        assert!((f1.get(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let f2 = dft_matrix(2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f2.get(0, 0).re - r).abs() < 1e-15);
        assert!((f2.get(1, 1).re + r).abs() < 1e-15);
        assert!(f2.get(1, 1).im.abs() < 1e-15);
    }

    #[test]
    fn dft_is_unitary() {
        for n in [3usize, 32, 64] {
            let f = dft_matrix(n);
            let prod = f.matmul(&f.hermitian());
            let eye = CMat::from_fn(n, n, |r, c| {
                Complex64::new(if r == c { 1.0 } else { 0.0 }, 0.0)
            });
            let err: f64 = prod.sub(&eye).frobenius_norm();
            assert!(err < 1e-10, "N = {n}: ||F F^H - I||_F = {err}");
        }
    }

    #[test]
    fn qpsk_unit_modulus_and_deterministic() {
        let mut rng = substream(11, &[purpose::SYMBOLS, 0]);
        let d = qpsk_symbols(256, &mut rng);
        for z in &d {
            assert!((z.norm() - 1.0).abs() < 1e-15);
        }
        let d2 = qpsk_symbols(256, &mut substream(11, &[purpose::SYMBOLS, 0]));
        assert_eq!(d, d2);
    }

    #[test]
    fn qpsk_frequencies_uniform() {
        let mut rng = substream(5, &[purpose::SYMBOLS, 1]);
        let trials = 100_000usize;
        let d = qpsk_symbols(trials, &mut rng);
        let mut counts = [0usize; 4];
        for z in d {
            let idx = (if z.re < 0.0 { 1 } else { 0 }) + (if z.im < 0.0 { 2 } else { 0 });
            counts[idx] += 1;
        }
        for c in counts {
            let freq = c as f64 / trials as f64;
            assert!((freq - 0.25).abs() < 0.01, "constellation frequency {freq}");
        }
    }

    #[test]
    fn modulate_single_impulse_hand_value() {
        // N = 4, N_cp = 2, d = e_0: F^H e_0 = (1/2) * ones, CP copies the tail
        let mut p = OfdmParams::cbrs(4);
        p.cp_len = 2;
        p.max_delay_spread_s = 1e-9; // L = 1
        let cfg = OfdmConfig::new(p).unwrap();
        let d = vec![
            Complex64::new(1.0, 0.0),
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::ZERO,
        ];
        let s = ofdm_modulate_with_cp(&d, &cfg).unwrap();
        assert_eq!(s.len(), 6);
        for z in s {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn modulate_preserves_norm_and_copies_cp() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let mut rng = substream(3, &[purpose::SYMBOLS, 2]);
        let d = qpsk_symbols(32, &mut rng);
        let s = ofdm_modulate_with_cp(&d, &cfg).unwrap();
        assert_eq!(s.len(), cfg.block_len());
        let body = &s[cfg.cp_len()..];
        assert!((vec_norm(body) - vec_norm(&d)).abs() < 1e-12);
        for j in 0..cfg.cp_len() {
            assert_eq!(s[j], body[32 - cfg.cp_len() + j]);
        }
        let wrong = ofdm_modulate_with_cp(&d[..31], &cfg);
        assert!(wrong.is_err());
    }

    #[test]
    fn identity_channel_passes_signal_through() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let mut rng = substream(4, &[purpose::SYMBOLS, 3]);
        let d = qpsk_symbols(32, &mut rng);
        let s = ofdm_modulate_with_cp(&d, &cfg).unwrap();
        let taps = |_n: i64, l: usize| {
            if l == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::ZERO
            }
        };
        let y = channel_filter(&s, &cfg, taps, 0.0, &mut rng).unwrap();
        for (a, b) in y.iter().zip(&s) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn time_invariant_filter_matches_direct_convolution() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let mut rng = substream(9, &[purpose::CHANNEL, 7]);
        let h: Vec<Complex64> = (0..cfg.channel_order())
            .map(|_| complex_gaussian(1.0, &mut rng))
            .collect();
        let s = qpsk_symbols(cfg.block_len(), &mut rng);
        let taps = |_n: i64, l: usize| h[l];
        let y = channel_filter(&s, &cfg, taps, 0.0, &mut rng).unwrap();
        // independent direct convolution with zero pre-history
        for (idx, yn) in y.iter().enumerate() {
            let mut want = Complex64::ZERO;
            for (l, hl) in h.iter().enumerate() {
                if idx >= l {
                    want += hl * s[idx - l];
                }
            }
            assert!((yn - want).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_noise_has_requested_variance() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let zeros = vec![Complex64::ZERO; cfg.block_len()];
        let taps = |_: i64, _: usize| Complex64::ZERO;
        let mut rng = substream(21, &[purpose::NOISE, 0]);
        let mut acc = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let y = channel_filter(&zeros, &cfg, taps, 1.0, &mut rng).unwrap();
            acc += y.iter().map(|z| z.norm_sqr()).sum::<f64>();
            count += y.len();
        }
        let var = acc / count as f64;
        assert!((var - 1.0).abs() < 0.02, "sample variance {var}");
    }

    #[test]
    fn negative_noise_rejected() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let zeros = vec![Complex64::ZERO; cfg.block_len()];
        let taps = |_: i64, _: usize| Complex64::ZERO;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
        let err = channel_filter(&zeros, &cfg, taps, -1.0, &mut rng).unwrap_err();
        assert!(matches!(err, OfdmError::NegativeNoiseVariance(_)));
    }

    #[test]
    fn cp_removal_inverts_insertion() {
        // D_cp A_cp = I_N: modulate then receive with no channel returns d
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let mut rng = substream(6, &[purpose::SYMBOLS, 9]);
        let d = qpsk_symbols(32, &mut rng);
        let s = ofdm_modulate_with_cp(&d, &cfg).unwrap();
        let back = post_dft_receive(&s, &cfg).unwrap();
        for (a, b) in back.iter().zip(&d) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn receive_strips_cp_and_preserves_norm() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let mut rng = substream(2, &[purpose::NOISE, 5]);
        let y: Vec<Complex64> = (0..cfg.block_len())
            .map(|_| complex_gaussian(1.0, &mut rng))
            .collect();
        let out = post_dft_receive(&y, &cfg).unwrap();
        assert_eq!(out.len(), 32);
        assert!((vec_norm(&out) - vec_norm(&y[cfg.cp_len()..])).abs() < 1e-12);
    }
}
