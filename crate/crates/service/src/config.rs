//! Service configuration from a `key = value` file.
//!
//! ```text
//! # comments start with '#'
//! data_dir = /srv/ntl
//! bind = 127.0.0.1:8080
//! colormap = yellow
//! range_lo = 0
//! range_hi = 60
//! state_zoom = 5
//! city_zoom = 9
//! job_timeout_ms = 30000
//! ```
//!
//! `NIGHTPULSE_DATA_DIR` overrides `data_dir`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use nightpulse_core::geocode::ZoomLevelMap;
use nightpulse_core::{Error, Result};

use crate::tiles::Colormap;

pub const DATA_DIR_ENV: &str = "NIGHTPULSE_DATA_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct ApiConfig {
    pub data_dir: PathBuf,
    pub bind: SocketAddr,
    pub colormap: Colormap,
    /// Default tile value range.
    pub range: (f64, f64),
    pub zoom: ZoomLevelMap,
    /// Upper bound for cluster and sprawl jobs.
    pub job_timeout: Duration,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            data_dir: PathBuf::from("nightpulse-data"),
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            colormap: Colormap::default(),
            range: (0.0, 60.0),
            zoom: ZoomLevelMap::default(),
            job_timeout: Duration::from_secs(30),
        }
    }
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("config line {line}: {msg}"))
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(line, format!("cannot parse {key} = {value:?}")))
}

impl ApiConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ApiConfig::default();
        let (mut state_zoom, mut city_zoom) = (cfg.zoom.state_from, cfg.zoom.city_from);
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| bad(n, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "data_dir" => cfg.data_dir = PathBuf::from(value),
                "bind" => cfg.bind = parse_value(n, key, value)?,
                "colormap" => cfg.colormap = value.parse().map_err(|e: Error| bad(n, e))?,
                "range_lo" => cfg.range.0 = parse_value(n, key, value)?,
                "range_hi" => cfg.range.1 = parse_value(n, key, value)?,
                "state_zoom" => state_zoom = parse_value(n, key, value)?,
                "city_zoom" => city_zoom = parse_value(n, key, value)?,
                "job_timeout_ms" => cfg.job_timeout = Duration::from_millis(parse_value(n, key, value)?),
                other => return Err(bad(n, format!("unknown key {other:?}"))),
            }
        }
        cfg.zoom = ZoomLevelMap::new(state_zoom, city_zoom)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` if given, then applies the environment override.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => ApiConfig::parse(&std::fs::read_to_string(p)?)?,
            None => ApiConfig::default(),
        };
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            cfg.data_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidRange { lo, hi });
        }
        if self.job_timeout.is_zero() {
            return Err(Error::InvalidParameter("job_timeout_ms must be positive".into()));
        }
        Ok(())
    }
}
