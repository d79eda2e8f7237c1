//! Declarative experiment configuration: a flat TOML file holding the
//! physics block, dataset spec, network shape, and training hyperparameters.
//! Derived quantities (d_x, d_y, L, Q, ...) are always computed, never read.

use crate::dataset::DatasetSpec;
use crate::nn::{TrainConfig, Trainability};
use crate::ofdm::{ConfigError, OfdmConfig, OfdmParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Physics(#[from] ConfigError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetBlock {
    /// Number of hidden m x m matrices (network depth is K + 2).
    pub depth_k: usize,
    /// Hidden width m; 0 selects the default min(2 N^2, 2048).
    #[serde(default)]
    pub width: usize,
    #[serde(default)]
    pub trainability: Trainability,
}

impl Default for NetBlock {
    fn default() -> Self {
        Self {
            depth_k: 1,
            width: 0,
            trainability: Trainability::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetBlock {
    pub n_train: usize,
    pub n_test: usize,
    #[serde(default = "default_snr_min")]
    pub snr_min_db: f64,
    #[serde(default = "default_snr_max")]
    pub snr_max_db: f64,
    #[serde(default = "default_split")]
    pub train_val_split: f64,
}

fn default_snr_min() -> f64 {
    -10.0
}

fn default_snr_max() -> f64 {
    40.0
}

fn default_split() -> f64 {
    0.75
}

impl Default for DatasetBlock {
    fn default() -> Self {
        Self {
            n_train: 5000,
            n_test: 1000,
            snr_min_db: default_snr_min(),
            snr_max_db: default_snr_max(),
            train_val_split: default_split(),
        }
    }
}

fn default_snr_grid() -> Vec<f64> {
    vec![-10.0, 0.0, 10.0, 20.0, 30.0, 40.0]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub ofdm: OfdmParams,
    #[serde(default)]
    pub dataset: DatasetBlock,
    #[serde(default)]
    pub net: NetBlock,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_snr_grid")]
    pub snr_test_grid_db: Vec<f64>,
}

impl ExperimentConfig {
    /// Reference configuration at the given subcarrier count.
    pub fn desk_default(num_subcarriers: usize) -> Self {
        Self {
            master_seed: 0,
            ofdm: OfdmParams::cbrs(num_subcarriers),
            dataset: DatasetBlock::default(),
            net: NetBlock::default(),
            train: TrainConfig::default(),
            snr_test_grid_db: default_snr_grid(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validated()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Cross-field validation; returns the physics config on success.
    pub fn validated(&self) -> Result<OfdmConfig, ExperimentConfigError> {
        let ofdm = OfdmConfig::new(self.ofdm.clone())?;
        self.dataset_spec()
            .validate()
            .map_err(|e| ExperimentConfigError::Invalid(e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| ExperimentConfigError::Invalid(e.to_string()))?;
        if self.net.depth_k == 0 {
            return Err(ExperimentConfigError::Invalid(
                "net.depth_k must be at least 1".into(),
            ));
        }
        if self.snr_test_grid_db.is_empty() {
            return Err(ExperimentConfigError::Invalid(
                "snr_test_grid_db must not be empty".into(),
            ));
        }
        Ok(ofdm)
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            n_train: self.dataset.n_train,
            n_test: self.dataset.n_test,
            snr_min_db: self.dataset.snr_min_db,
            snr_max_db: self.dataset.snr_max_db,
            test_snr_grid_db: self.snr_test_grid_db.clone(),
            train_val_split: self.dataset.train_val_split,
            seed: self.master_seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.master_seed,
            ..self.train.clone()
        }
    }

    /// Hidden width: explicit, or min(2 N^2, 2048) when left at 0.
    pub fn width(&self) -> usize {
        if self.net.width > 0 {
            self.net.width
        } else {
            (2 * self.ofdm.num_subcarriers * self.ofdm.num_subcarriers).min(2048)
        }
    }

    /// Human-readable derived-parameter table.
    pub fn derived_table(&self) -> Result<String, ExperimentConfigError> {
        let cfg = self.validated()?;
        let mut out = String::new();
        let mut push = |k: &str, v: String| out.push_str(&format!("{k:<24} {v}\n"));
        push("parameter", "value".into());
        push("N (subcarriers)", format!("{}", cfg.num_subcarriers()));
        push("delta_f [Hz]", format!("{}", cfg.subcarrier_spacing_hz()));
        push("T_u [s]", format!("{}", cfg.useful_duration_s()));
        push("T_s [s]", format!("{}", cfg.sample_period_s()));
        push("f_max [Hz]", format!("{}", cfg.max_doppler_hz()));
        push("L (channel order)", format!("{}", cfg.channel_order()));
        push("Q (basis order)", format!("{}", cfg.bem_order()));
        push("N_cp", format!("{}", cfg.cp_len()));
        push("N~ (block length)", format!("{}", cfg.block_len()));
        push("d_x = 2N+1", format!("{}", cfg.input_dim()));
        push("d_y = 2N^2", format!("{}", cfg.label_dim()));
        push("m (hidden width)", format!("{}", self.width()));
        push("config hash", format!("{:016x}", cfg.config_hash()));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::desk_default(32);
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn derived_fields_never_read_from_file() {
        // a file that only sets the user-facing fields still derives the rest
        let text = r#"
            master_seed = 7

            [ofdm]
            carrier_freq_hz = 3.55e9
            bandwidth_hz = 1.024e7
            num_subcarriers = 64
            cp_len = 10
            max_delay_spread_s = 5e-7
            max_velocity_mps = 44.44444444444444

            [dataset]
            n_train = 100
            n_test = 10

            [net]
            depth_k = 1
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let physics = cfg.validated().unwrap();
        assert_eq!(physics.channel_order(), 6);
        assert_eq!(physics.bem_order(), 2);
        assert_eq!(physics.block_len(), 74);
        assert_eq!(physics.input_dim(), 129);
        assert_eq!(physics.label_dim(), 8192);
        assert_eq!(cfg.width(), 2048); // min(2*64^2, 2048)
        assert_eq!(cfg.train.batch_size, 50);
    }

    #[test]
    fn invalid_physics_named_in_error() {
        let mut cfg = ExperimentConfig::desk_default(32);
        cfg.ofdm.cp_len = 2;
        let err = cfg.validated().unwrap_err();
        assert!(err.to_string().contains("cyclic prefix"));
    }

    #[test]
    fn width_default_caps_at_2048() {
        let small = ExperimentConfig::desk_default(16);
        assert_eq!(small.width(), 512); // 2*16^2
        let big = ExperimentConfig::desk_default(128);
        assert_eq!(big.width(), 2048);
    }

    #[test]
    fn derived_table_lists_reference_values() {
        let cfg = ExperimentConfig::desk_default(32);
        let table = cfg.derived_table().unwrap();
        assert!(table.contains("L (channel order)"));
        assert!(table.contains('6'));
        assert!(table.contains("42"));
    }
}
