//! Key-value run configuration with per-experiment defaults.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config line {line}: expected key=value, got {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {value:?} ({detail})")]
    InvalidValue {
        key: String,
        value: String,
        detail: String,
    },
    #[error("k grid must satisfy 0 < k_min < k_max with at least 2 steps (got min {min}, max {max}, steps {steps})")]
    BadGrid { min: f64, max: f64, steps: usize },
    #[error("running-average window must be odd and >= 1, got {0}")]
    BadWindow(usize),
}

/// Knobs shared by all experiments; subcommands read what they need.
#[derive(Debug, Clone)]
pub struct ScanConfig {
    /// Hilbert dimension for single-N experiments.
    pub n: usize,
    /// Dimensions for multi-N scans.
    pub n_list: Vec<usize>,
    pub k: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub k_steps: usize,
    /// Running-average window in k-grid points (odd).
    pub window: usize,
    /// Intensity floor for spacing analysis.
    pub intensity_floor: f64,
    /// Intensity threshold marking high-intensity states in plots.
    pub plot_threshold: f64,
    /// Number of states rendered by the Husimi gallery.
    pub top_m: usize,
    /// Husimi grid resolution.
    pub grid: usize,
    /// Manifold arc length traced per branch.
    pub arc_length: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            n: 158,
            n_list: vec![200, 400, 1000],
            k: 0.5,
            k_min: 0.01,
            k_max: 1.8,
            k_steps: 300,
            window: 11,
            intensity_floor: 5e-6,
            plot_threshold: 5e-3,
            top_m: 7,
            grid: 128,
            arc_length: 1.2,
        }
    }
}

impl ScanConfig {
    /// Overlays `key=value` lines from `path` (# starts a comment).
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::MalformedLine {
                line: idx + 1,
                text: raw.to_string(),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
                key: key.to_string(),
                value: value.to_string(),
                detail: e.to_string(),
            })
        }
        match key {
            "n" => self.n = parse(key, value)?,
            "n_list" => {
                self.n_list = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "k" => self.k = parse(key, value)?,
            "k_min" => self.k_min = parse(key, value)?,
            "k_max" => self.k_max = parse(key, value)?,
            "k_steps" => self.k_steps = parse(key, value)?,
            "window" => self.window = parse(key, value)?,
            "intensity_floor" => self.intensity_floor = parse(key, value)?,
            "plot_threshold" => self.plot_threshold = parse(key, value)?,
            "top_m" => self.top_m = parse(key, value)?,
            "grid" => self.grid = parse(key, value)?,
            "arc_length" => self.arc_length = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        // k = 0 has a parabolic fixed point and no resonance state.
        if !(self.k_min > 0.0 && self.k_min < self.k_max) || self.k_steps < 2 {
            return Err(ConfigError::BadGrid {
                min: self.k_min,
                max: self.k_max,
                steps: self.k_steps,
            });
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(ConfigError::BadWindow(self.window));
        }
        Ok(())
    }

    /// Strictly increasing k grid.
    pub fn k_grid(&self) -> Vec<f64> {
        (0..self.k_steps)
            .map(|i| {
                self.k_min + (self.k_max - self.k_min) * i as f64 / (self.k_steps - 1) as f64
            })
            .collect()
    }

    /// Flat echo of every knob, for the run manifest.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("n".into(), self.n.to_string());
        m.insert(
            "n_list".into(),
            self.n_list
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        m.insert("k".into(), self.k.to_string());
        m.insert("k_min".into(), self.k_min.to_string());
        m.insert("k_max".into(), self.k_max.to_string());
        m.insert("k_steps".into(), self.k_steps.to_string());
        m.insert("window".into(), self.window.to_string());
        m.insert("intensity_floor".into(), self.intensity_floor.to_string());
        m.insert("plot_threshold".into(), self.plot_threshold.to_string());
        m.insert("top_m".into(), self.top_m.to_string());
        m.insert("grid".into(), self.grid.to_string());
        m.insert("arc_length".into(), self.arc_length.to_string());
        m
    }
}

/// Running average with an odd window, shrunk symmetrically at the edges.
pub fn running_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let r = half.min(i).min(values.len() - 1 - i);
            let slice = &values[i - r..=i + r];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_and_validates() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# comment\nn = 64\nk_steps=20\nn_list = 100, 200").unwrap();
        let cfg = ScanConfig::load(file.path()).unwrap();
        assert_eq!(cfg.n, 64);
        assert_eq!(cfg.k_steps, 20);
        assert_eq!(cfg.n_list, vec![100, 200]);
        assert_eq!(cfg.k_grid().len(), 20);
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = ScanConfig::default();
        assert!(matches!(
            cfg.set("bogus", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.set("n", "not-a-number"),
            Err(ConfigError::InvalidValue { .. })
        ));
        cfg.window = 4;
        assert!(matches!(cfg.validate(), Err(ConfigError::BadWindow(4))));
        cfg.window = 11;
        cfg.k_steps = 1;
        assert!(matches!(cfg.validate(), Err(ConfigError::BadGrid { .. })));
    }

    #[test]
    fn running_average_shrinks_at_edges() {
        let avg = running_average(&[1.0, 2.0, 3.0, 4.0, 5.0], 3);
        assert_eq!(avg[0], 1.0);
        assert_eq!(avg[1], 2.0);
        assert_eq!(avg[4], 5.0);
    }
}
