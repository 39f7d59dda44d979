use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bidirectional::TurboOptions;
use crate::channel::ChannelProfile;
use crate::detect::{DetectorOptions, FreezeRule, DEFAULT_CONFIDENCE};
use crate::error::{Error, Result};
use crate::frame::OtfsFrameConfig;

const KMH: f64 = 1.0 / 3.6;

/// Detectors the harness knows how to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Lmmse,
    Amp,
    Uamp,
    UampMfic,
    Turbo,
    Iw,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 6] = [
        DetectorKind::Lmmse,
        DetectorKind::Amp,
        DetectorKind::Uamp,
        DetectorKind::UampMfic,
        DetectorKind::Turbo,
        DetectorKind::Iw,
    ];

    pub fn id(self) -> &'static str {
        match self {
            DetectorKind::Lmmse => "lmmse",
            DetectorKind::Amp => "amp",
            DetectorKind::Uamp => "uamp",
            DetectorKind::UampMfic => "uamp-mfic",
            DetectorKind::Turbo => "turbo",
            DetectorKind::Iw => "iw",
        }
    }

    /// Whether the detector iterates and so has per-iteration decisions.
    pub fn is_iterative(self) -> bool {
        self != DetectorKind::Lmmse
    }

    /// Whether the detector runs on the SVD-rotated model.
    pub fn needs_svd(self) -> bool {
        matches!(
            self,
            DetectorKind::Uamp | DetectorKind::UampMfic | DetectorKind::Turbo | DetectorKind::Iw
        )
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "mfic" | "uamp_mfic" => return Ok(DetectorKind::UampMfic),
            "t-uamp-mfic" => return Ok(DetectorKind::Turbo),
            "iw-uamp-mfic" => return Ok(DetectorKind::Iw),
            _ => {}
        }
        DetectorKind::ALL
            .into_iter()
            .find(|d| d.id() == lower)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown detector '{s}'")))
    }
}

/// Everything that determines a simulation run.
///
/// Stored as TOML; top-level keys mirror the field names, `[frame]`,
/// `[channel]` and `[turbo]` hold the nested sections. Fields missing from a
/// file take their default values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub master_seed: u64,
    pub detectors: Vec<DetectorKind>,
    pub snr_grid_db: Vec<f64>,
    /// Maximum mobile velocities (m/s) visited by the velocity sweep; the
    /// other sweeps use `channel.v_max`.
    pub velocity_grid: Vec<f64>,
    pub n_iter: usize,
    pub rho_th: f64,
    pub freeze_rule: FreezeRule,
    pub damping: f64,
    pub min_frames: u64,
    pub min_bit_errors: u64,
    pub max_frames: u64,
    /// Trials dispatched per scheduling round. Part of the result: stopping
    /// decisions are only taken between rounds.
    pub batch_frames: u64,
    pub frame: OtfsFrameConfig,
    pub channel: ChannelProfile,
    pub turbo: TurboOptions,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            detectors: DetectorKind::ALL.to_vec(),
            snr_grid_db: vec![8.0, 10.0, 12.0, 14.0, 16.0],
            velocity_grid: vec![100.0 * KMH, 300.0 * KMH, 500.0 * KMH],
            n_iter: 20,
            rho_th: DEFAULT_CONFIDENCE,
            freeze_rule: FreezeRule::default(),
            damping: 0.0,
            min_frames: 10,
            min_bit_errors: 100,
            max_frames: 10_000,
            batch_frames: 8,
            frame: OtfsFrameConfig::default(),
            channel: ChannelProfile::default(),
            turbo: TurboOptions::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.detectors.is_empty() {
            return bad("no detectors selected".into());
        }
        if self.snr_grid_db.is_empty() || self.velocity_grid.is_empty() {
            return bad("snr_grid_db and velocity_grid must be non-empty".into());
        }
        if let Some(s) = self.snr_grid_db.iter().find(|s| !s.is_finite()) {
            return bad(format!("SNR {s} is not finite"));
        }
        if let Some(v) = self
            .velocity_grid
            .iter()
            .chain([&self.channel.v_max])
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return bad(format!("velocity {v} must be finite and non-negative"));
        }
        if self.min_frames == 0 || self.batch_frames == 0 {
            return bad("min_frames and batch_frames must be at least 1".into());
        }
        if self.max_frames < self.min_frames {
            return bad(format!(
                "max_frames ({}) is below min_frames ({})",
                self.max_frames, self.min_frames
            ));
        }
        if self.channel.paths == 0 || self.channel.paths > self.channel.l_max + 1 {
            return bad(format!(
                "{} paths cannot have distinct delays in 0..={}",
                self.channel.paths, self.channel.l_max
            ));
        }
        if self.channel.l_max >= self.frame.len() {
            return bad(format!(
                "l_max = {} does not fit a frame of {} samples",
                self.channel.l_max,
                self.frame.len()
            ));
        }
        self.detector_options().validate()
    }

    pub fn detector_options(&self) -> DetectorOptions {
        DetectorOptions {
            n_iter: self.n_iter,
            rho_th: self.rho_th,
            freeze: self.freeze_rule,
            damping: self.damping,
            record_snapshots: false,
        }
    }

    /// Applies one `key=value` override.
    ///
    /// `key` is either a dotted path (`frame.m`) or a bare field name that is
    /// unique across sections (`m`). List values may be written without
    /// brackets (`8,10,12`) and strings without quotes.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.apply_overrides(&[(key, value)])
    }

    /// Applies several overrides at once and validates only the result, so
    /// interdependent keys (`frame.m` and `channel.l_max`) can change together.
    /// The configuration is unchanged on error.
    pub fn apply_overrides(&mut self, items: &[(&str, &str)]) -> Result<()> {
        let toml::Value::Table(mut root) =
            toml::Value::try_from(&*self).expect("configuration is always representable as TOML")
        else {
            unreachable!("configuration serializes to a table")
        };
        for &(key, value) in items {
            let path = resolve_key(&root, key)?;
            let slot = match path.as_slice() {
                [field] => root.get_mut(field),
                [section, field] => root
                    .get_mut(section)
                    .and_then(|t| t.as_table_mut())
                    .and_then(|t| t.get_mut(field)),
                _ => None,
            }
            .ok_or_else(|| Error::Config(format!("unknown configuration key `{key}`")))?;
            *slot = parse_override(slot, value);
            // Type errors are reported against the key that caused them.
            toml::Value::Table(root.clone())
                .try_into::<SimConfig>()
                .map_err(|e| Error::Config(format!("invalid value `{value}` for `{key}`: {e}")))?;
        }
        let updated: SimConfig = toml::Value::Table(root)
            .try_into()
            .map_err(|e| Error::Config(e.to_string()))?;
        updated.validate().map_err(|e| {
            let list: Vec<String> = items.iter().map(|(k, v)| format!("{k}={v}")).collect();
            Error::Config(format!("override `{}` rejected: {e}", list.join(" ")))
        })?;
        *self = updated;
        Ok(())
    }
}

fn resolve_key(root: &toml::Table, key: &str) -> Result<Vec<String>> {
    let unknown = || Error::Config(format!("unknown configuration key `{key}`"));
    if let Some((section, field)) = key.split_once('.') {
        let known = root
            .get(section)
            .and_then(|t| t.as_table())
            .is_some_and(|t| t.contains_key(field));
        return if known {
            Ok(vec![section.to_string(), field.to_string()])
        } else {
            Err(unknown())
        };
    }
    if root.get(key).is_some_and(|v| !v.is_table()) {
        return Ok(vec![key.to_string()]);
    }
    let matches: Vec<&String> = root
        .iter()
        .filter(|(_, v)| v.as_table().is_some_and(|t| t.contains_key(key)))
        .map(|(name, _)| name)
        .collect();
    match matches.as_slice() {
        [section] => Ok(vec![section.to_string(), key.to_string()]),
        [] => Err(unknown()),
        _ => Err(Error::Config(format!(
            "ambiguous configuration key `{key}`; qualify it with a section"
        ))),
    }
}

fn parse_scalar(text: &str) -> toml::Value {
    let text = text.trim();
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn parse_override(current: &toml::Value, value: &str) -> toml::Value {
    let value = value.trim();
    if current.is_array() && !value.starts_with('[') {
        if value.is_empty() {
            return toml::Value::Array(Vec::new());
        }
        return toml::Value::Array(value.split(',').map(parse_scalar).collect());
    }
    let parsed = parse_scalar(value);
    // A float field given as an integer literal.
    match (current, &parsed) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
        _ => parsed,
    }
}
