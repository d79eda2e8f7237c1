//! Doubly selective channel generation with the complex-exponential basis
//! expansion model: exponential delay / Jakes Doppler scattering statistics,
//! normalized per-coefficient variances, per-symbol coefficient draws, and
//! the time- and frequency-domain channel matrices.

use crate::linalg::CMat;
use crate::ofdm::{complex_gaussian, dft_matrix, OfdmConfig};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("exponential delay profile needs at least two taps (L = {0})")]
    ChannelOrderTooSmall(usize),
    #[error("Jakes Doppler profile needs a positive maximum Doppler spread")]
    ZeroDoppler,
}

/// Exponential power delay profile: exp(-tau / ((L-1) T_s)) for tau >= 0.
pub fn delay_profile(cfg: &OfdmConfig, tau: f64) -> Result<f64, ChannelError> {
    let l = cfg.channel_order();
    if l < 2 {
        return Err(ChannelError::ChannelOrderTooSmall(l));
    }
    if tau < 0.0 {
        return Ok(0.0);
    }
    let tau0 = (l as f64 - 1.0) * cfg.sample_period_s();
    Ok((-tau / tau0).exp())
}

/// Jakes Doppler power profile: 1 / (pi sqrt(f_max^2 - nu^2)) for |nu| < f_max.
pub fn doppler_profile(cfg: &OfdmConfig, nu: f64) -> Result<f64, ChannelError> {
    let f_max = cfg.max_doppler_hz();
    if f_max <= 0.0 || f_max.is_nan() {
        return Err(ChannelError::ZeroDoppler);
    }
    if nu.abs() >= f_max {
        return Ok(0.0);
    }
    Ok(1.0 / (PI * (f_max * f_max - nu * nu).sqrt()))
}

/// Per-coefficient variance table sigma^2_{q,l}, normalized so the total is
/// exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct BemVarianceTable {
    /// indexed [q][l], q in [0, Q], l in [0, L-1]
    sigma_sq: Vec<Vec<f64>>,
    gamma: f64,
}

impl BemVarianceTable {
    /// sigma^2_{q,l} = gamma * phi_h(l T_s) * S_h(q f_max / (Q + 1)).
    ///
    /// The Doppler grid q f_max / (Q + 1) stays strictly below f_max, so the
    /// Jakes singularity is never evaluated.
    pub fn build(cfg: &OfdmConfig) -> Result<Self, ChannelError> {
        let l_taps = cfg.channel_order();
        let q_max = cfg.bem_order();
        let ts = cfg.sample_period_s();
        let f_max = cfg.max_doppler_hz();
        let mut raw = vec![vec![0.0; l_taps]; q_max + 1];
        let mut total = 0.0;
        for (q, row) in raw.iter_mut().enumerate() {
            for (l, cell) in row.iter_mut().enumerate() {
                let nu = q as f64 * f_max / (q_max as f64 + 1.0);
                let v = delay_profile(cfg, l as f64 * ts)? * doppler_profile(cfg, nu)?;
                *cell = v;
                total += v;
            }
        }
        let gamma = 1.0 / total;
        // normalize so the final sum is exactly 1 in floating point
        let mut table = Self {
            sigma_sq: raw
                .into_iter()
                .map(|row| row.into_iter().map(|v| v * gamma).collect())
                .collect(),
            gamma,
        };
        let s: f64 = table.sigma_sq.iter().flatten().sum();
        for row in &mut table.sigma_sq {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        Ok(table)
    }

    /// Table with explicitly given variances; rescaled to sum to one.
    /// Mostly useful for degenerate test channels.
    pub fn from_raw(sigma_sq: Vec<Vec<f64>>) -> Self {
        let total: f64 = sigma_sq.iter().flatten().sum();
        assert!(total > 0.0, "variance table must have positive mass");
        Self {
            sigma_sq: sigma_sq
                .into_iter()
                .map(|row| row.into_iter().map(|v| v / total).collect())
                .collect(),
            gamma: 1.0 / total,
        }
    }

    pub fn num_basis(&self) -> usize {
        self.sigma_sq.len()
    }

    pub fn num_taps(&self) -> usize {
        self.sigma_sq[0].len()
    }

    pub fn sigma_sq(&self, q: usize, l: usize) -> f64 {
        self.sigma_sq[q][l]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn total(&self) -> f64 {
        self.sigma_sq.iter().flatten().sum()
    }
}

/// One OFDM symbol's CE-BEM coefficients h_q[i; l].
#[derive(Debug, Clone, PartialEq)]
pub struct CeBemRealization {
    /// indexed [q][l]
    coeffs: Vec<Vec<Complex64>>,
    symbol_index: u64,
    block_len: usize,
    cp_len: usize,
}

/// Draw the (Q+1) x L complex Gaussian coefficients for symbol `i`:
/// h_q[i; l] = (sigma_{q,l} / sqrt(2)) (g1 + j g2).
pub fn sample_bem(
    cfg: &OfdmConfig,
    table: &BemVarianceTable,
    symbol_index: u64,
    rng: &mut impl Rng,
) -> CeBemRealization {
    let coeffs = table
        .sigma_sq
        .iter()
        .map(|row| row.iter().map(|&var| complex_gaussian(var, rng)).collect())
        .collect();
    CeBemRealization {
        coeffs,
        symbol_index,
        block_len: cfg.block_len(),
        cp_len: cfg.cp_len(),
    }
}

impl CeBemRealization {
    pub fn symbol_index(&self) -> u64 {
        self.symbol_index
    }

    pub fn coeff(&self, q: usize, l: usize) -> Complex64 {
        self.coeffs[q][l]
    }

    pub fn num_basis(&self) -> usize {
        self.coeffs.len()
    }

    pub fn num_taps(&self) -> usize {
        self.coeffs[0].len()
    }

    /// h^i[n; l] = sum_q h_q[i; l] exp(j 2 pi (q - Q/2)(i N~ + n) / N~),
    /// for n in [-N_cp, N); zero for lags outside [0, L-1].
    pub fn tap(&self, n: i64, l: i64) -> Complex64 {
        if l < 0 || l >= self.num_taps() as i64 {
            return Complex64::ZERO;
        }
        let q_max = self.num_basis() as i64 - 1;
        let nt = self.block_len as f64;
        let abs_n = self.symbol_index as f64 * nt + n as f64;
        let mut acc = Complex64::ZERO;
        for q in 0..=q_max {
            let freq = q as f64 - q_max as f64 / 2.0;
            let phase = 2.0 * PI * freq * abs_n / nt;
            acc += self.coeffs[q as usize][l as usize] * Complex64::from_polar(1.0, phase);
        }
        acc
    }

    /// Sum of the coefficient energies: E|h^i[n; l]|^2 for any fixed n.
    pub fn tap_variance_from_table(table: &BemVarianceTable, l: usize) -> f64 {
        (0..table.num_basis()).map(|q| table.sigma_sq(q, l)).sum()
    }

    /// Energy of the time-domain matrix without building it:
    /// sum_{n,l} |h^i[n; l]|^2 over n in [0, N).
    pub fn matrix_energy(&self, cfg: &OfdmConfig) -> f64 {
        let mut acc = 0.0;
        for n in 0..cfg.num_subcarriers() as i64 {
            for l in 0..self.num_taps() as i64 {
                acc += self.tap(n, l).norm_sqr();
            }
        }
        acc
    }

    /// CSV dump of the coefficients (config hash, symbol index, q, l, re, im).
    pub fn write_csv(&self, cfg: &OfdmConfig, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "config_hash,symbol_index,q,l,re,im")?;
        for (q, row) in self.coeffs.iter().enumerate() {
            for (l, z) in row.iter().enumerate() {
                writeln!(
                    w,
                    "{:016x},{},{},{},{},{}",
                    cfg.config_hash(),
                    self.symbol_index,
                    q,
                    l,
                    z.re,
                    z.im
                )?;
            }
        }
        Ok(())
    }
}

/// Time-domain pseudo-circulant matrix and its frequency-domain counterpart.
#[derive(Debug, Clone)]
pub struct ChannelMatrices {
    pub time: CMat,
    pub freq: CMat,
}

/// (H)_{n,l} = h^i[n; <n - l>_N] when that lag falls in [0, L-1], else zero;
/// H~ = F H F^H.
pub fn build_matrices(realization: &CeBemRealization, cfg: &OfdmConfig) -> ChannelMatrices {
    let n = cfg.num_subcarriers();
    let l_taps = realization.num_taps();
    let mut time = CMat::zeros(n, n);
    for row in 0..n {
        for lag in 0..l_taps.min(n) {
            // column with <row - col>_N = lag
            let col = (row + n - lag) % n;
            time.set(row, col, realization.tap(row as i64, lag as i64));
        }
    }
    let f = dft_matrix(n);
    let freq = f.matmul(&time).matmul(&f.hermitian());
    ChannelMatrices { time, freq }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{purpose, substream};

    #[test]
    fn delay_profile_values() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        assert_eq!(delay_profile(&cfg, 0.0).unwrap(), 1.0);
        let ts = cfg.sample_period_s();
        let at_tau0 = delay_profile(&cfg, 5.0 * ts).unwrap();
        assert!((at_tau0 - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(delay_profile(&cfg, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn doppler_profile_support() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let f_max = cfg.max_doppler_hz();
        assert_eq!(doppler_profile(&cfg, f_max).unwrap(), 0.0);
        assert_eq!(doppler_profile(&cfg, -2.0 * f_max).unwrap(), 0.0);
        let at0 = doppler_profile(&cfg, 0.0).unwrap();
        assert!((at0 - 1.0 / (PI * f_max)).abs() < 1e-12);
        // the variance grid never reaches the integrable singularity
        let q = cfg.bem_order();
        let grid_max = q as f64 * f_max / (q as f64 + 1.0);
        assert!(grid_max < f_max);
        assert!(doppler_profile(&cfg, grid_max).unwrap().is_finite());
    }

    #[test]
    fn variance_table_normalized_and_shaped() {
        for n in [32usize, 64, 128] {
            let cfg = OfdmConfig::cbrs(n).unwrap();
            let table = BemVarianceTable::build(&cfg).unwrap();
            assert_eq!(table.num_basis(), 3);
            assert_eq!(table.num_taps(), 6);
            assert!((table.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_table_rejects_single_tap() {
        let mut p = crate::ofdm::OfdmParams::cbrs(32);
        p.max_delay_spread_s = 1e-9; // L = 1
        let cfg = OfdmConfig::new(p).unwrap();
        assert_eq!(
            BemVarianceTable::build(&cfg).unwrap_err(),
            ChannelError::ChannelOrderTooSmall(1)
        );
    }

    #[test]
    fn bem_draw_matches_declared_moments() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let table = BemVarianceTable::build(&cfg).unwrap();
        let trials = 10_000;
        let mut mean = Complex64::ZERO;
        let mut second = vec![vec![0.0; table.num_taps()]; table.num_basis()];
        for i in 0..trials {
            let mut rng = substream(99, &[purpose::CHANNEL, i as u64]);
            let r = sample_bem(&cfg, &table, i as u64, &mut rng);
            for q in 0..table.num_basis() {
                for l in 0..table.num_taps() {
                    mean += r.coeff(q, l);
                    second[q][l] += r.coeff(q, l).norm_sqr();
                }
            }
        }
        let count = (trials * table.num_basis() * table.num_taps()) as f64;
        mean /= count;
        assert!(mean.norm() < 3.0 / count.sqrt(), "mean {mean}");
        for q in 0..table.num_basis() {
            for l in 0..table.num_taps() {
                let est = second[q][l] / trials as f64;
                let want = table.sigma_sq(q, l);
                assert!(
                    (est - want).abs() / want < 0.05,
                    "sigma^2[{q}][{l}]: {est} vs {want}"
                );
            }
        }
    }

    #[test]
    fn distinct_symbols_get_distinct_coefficients() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let table = BemVarianceTable::build(&cfg).unwrap();
        let a = sample_bem(&cfg, &table, 0, &mut substream(1, &[purpose::CHANNEL, 0]));
        let b = sample_bem(&cfg, &table, 1, &mut substream(1, &[purpose::CHANNEL, 1]));
        assert_ne!(a.coeff(0, 0), b.coeff(0, 0));
    }

    #[test]
    fn tap_constant_when_single_basis() {
        let table = BemVarianceTable::from_raw(vec![vec![0.5, 0.5]]);
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let mut rng = substream(2, &[purpose::CHANNEL, 0]);
        let r = sample_bem(&cfg, &table, 0, &mut rng);
        let h0 = r.tap(0, 0);
        for n in [-5i64, 1, 13, 31] {
            assert!((r.tap(n, 0) - h0).norm() < 1e-15);
        }
    }

    #[test]
    fn tap_zero_outside_lag_range() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let table = BemVarianceTable::build(&cfg).unwrap();
        let r = sample_bem(&cfg, &table, 3, &mut substream(7, &[purpose::CHANNEL, 3]));
        assert_eq!(r.tap(0, -1), Complex64::ZERO);
        assert_eq!(r.tap(0, 6), Complex64::ZERO);
    }

    #[test]
    fn tap_energy_matches_variance_column() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let table = BemVarianceTable::build(&cfg).unwrap();
        let trials = 20_000;
        let l = 2usize;
        let n = 17i64;
        let mut acc = 0.0;
        for i in 0..trials {
            let mut rng = substream(55, &[purpose::CHANNEL, i]);
            let r = sample_bem(&cfg, &table, i, &mut rng);
            acc += r.tap(n, l as i64).norm_sqr();
        }
        let est = acc / trials as f64;
        let want = CeBemRealization::tap_variance_from_table(&table, l);
        assert!((est - want).abs() / want < 0.05, "{est} vs {want}");
    }

    #[test]
    fn matrices_sparsity_and_parseval() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let table = BemVarianceTable::build(&cfg).unwrap();
        let n = 32;
        for i in 0..20u64 {
            let r = sample_bem(&cfg, &table, i, &mut substream(13, &[purpose::CHANNEL, i]));
            let m = build_matrices(&r, &cfg);
            // sparsity: exactly N * L slots may be nonzero
            let mut nonzero_allowed = 0usize;
            for row in 0..n {
                for col in 0..n {
                    let lag = (row + n - col) % n;
                    if lag < cfg.channel_order() {
                        nonzero_allowed += 1;
                    } else {
                        assert_eq!(m.time.get(row, col), Complex64::ZERO);
                    }
                }
            }
            assert_eq!(nonzero_allowed, n * cfg.channel_order());
            // Parseval: Frobenius norms match
            let tf = m.time.frobenius_norm();
            let ff = m.freq.frobenius_norm();
            assert!((tf - ff).abs() < 1e-10, "{tf} vs {ff}");
        }
    }

    #[test]
    fn time_invariant_channel_diagonalized_by_dft() {
        let table = BemVarianceTable::from_raw(vec![vec![0.6, 0.3, 0.1]]);
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let r = sample_bem(&cfg, &table, 0, &mut substream(3, &[purpose::CHANNEL, 0]));
        let m = build_matrices(&r, &cfg);
        for row in 0..32 {
            for col in 0..32 {
                if row != col {
                    assert!(
                        m.freq.get(row, col).norm() < 1e-9,
                        "off-diagonal {row},{col}"
                    );
                }
            }
        }
    }

    #[test]
    fn mean_matrix_energy_is_n() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let table = BemVarianceTable::build(&cfg).unwrap();
        let trials = 10_000u64;
        let mut acc = 0.0;
        for i in 0..trials {
            let r = sample_bem(&cfg, &table, i, &mut substream(77, &[purpose::CHANNEL, i]));
            acc += r.matrix_energy(&cfg);
        }
        let est = acc / trials as f64;
        assert!(
            (est - 32.0).abs() / 32.0 < 0.02,
            "mean ||H||_F^2 = {est}, want 32 +- 2%"
        );
    }

    #[test]
    fn csv_dump_round_trips_header() {
        let cfg = OfdmConfig::cbrs(32).unwrap();
        let table = BemVarianceTable::build(&cfg).unwrap();
        let r = sample_bem(&cfg, &table, 5, &mut substream(8, &[purpose::CHANNEL, 5]));
        let mut buf = Vec::new();
        r.write_csv(&cfg, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "config_hash,symbol_index,q,l,re,im");
        assert_eq!(lines.len(), 1 + 3 * 6);
        assert!(lines[1].contains(&format!("{:016x}", cfg.config_hash())));
    }
}
