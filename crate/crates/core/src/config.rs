//! Pipeline configuration: `key = value` file format with `#` comments,
//! environment-variable overrides, validation and a content hash echoed
//! into every artifact for reproducibility.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::association::AssociationConfig;
use crate::classifier::ClassifierConfig;
use crate::error::{Error, Result};
use crate::persistence::PersistenceConfig;
use crate::tracker::TrackerConfig;
use crate::types::CameraIntrinsics;

/// Environment override prefix: `assoc.iou_threshold` can be overridden by
/// `BELIEFMAP_ASSOC_IOU_THRESHOLD`.
pub const ENV_PREFIX: &str = "BELIEFMAP_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogLevel {
    Quiet,
    Info,
    Debug,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingConfig {
    /// Every K-th frame is a keyframe.
    pub keyframe_every: u64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig { keyframe_every: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub classifier: ClassifierConfig,
    pub assoc: AssociationConfig,
    pub mapping: MappingConfig,
    pub ekf: TrackerConfig,
    pub persistence: PersistenceConfig,
    pub camera: CameraIntrinsics,
    pub log_level: LogLevel,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            classifier: ClassifierConfig::default(),
            assoc: AssociationConfig::default(),
            mapping: MappingConfig::default(),
            ekf: TrackerConfig::default(),
            persistence: PersistenceConfig::default(),
            camera: CameraIntrinsics::new(525.0, 525.0, 319.5, 239.5, 640.0, 480.0)
                .expect("default intrinsics are valid"),
            log_level: LogLevel::Quiet,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.classifier.validate()?;
        self.assoc.validate()?;
        self.ekf.validate()?;
        self.persistence.validate()?;
        if self.mapping.keyframe_every == 0 {
            return Err(Error::Config("mapping.keyframe_every must be >= 1".into()));
        }
        Ok(())
    }

    fn apply_key(&mut self, key: &str, value: &str, where_: &str) -> Result<()> {
        let bad_value = || Error::Config(format!("{where_}: bad value '{value}' for '{key}'"));
        let f = || value.parse::<f64>().map_err(|_| bad_value());
        let u = || value.parse::<u64>().map_err(|_| bad_value());
        let b = || match value {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(bad_value()),
        };
        if let Some(class) = key.strip_prefix("classifier.depth_threshold.") {
            let class_id: i32 = class
                .parse()
                .map_err(|_| Error::Config(format!("{where_}: bad class id in '{key}'")))?;
            self.classifier.depth_threshold_by_class.insert(class_id, f()?);
            return Ok(());
        }
        match key {
            "classifier.default_depth_threshold" => self.classifier.default_depth_threshold = f()?,
            "classifier.occlusion_iou_threshold" => self.classifier.occlusion_iou_threshold = f()?,
            "classifier.stddev_factor" => self.classifier.stddev_occlusion_factor = f()?,
            "classifier.stride" => self.classifier.stride = u()? as usize,
            "classifier.robust_min" => self.classifier.robust_min = b()?,
            "assoc.iou_threshold" => self.assoc.iou_threshold = f()?,
            "assoc.ltda_threshold" => self.assoc.ltda_threshold = f()?,
            "assoc.keyframe_window_n" => self.assoc.keyframe_window_n = u()?,
            "mapping.keyframe_every" => self.mapping.keyframe_every = u()?,
            "ekf.q_pos" => self.ekf.q_pos = f()?,
            "ekf.q_vel" => self.ekf.q_vel = f()?,
            "ekf.r_meas" => self.ekf.r_meas = f()?,
            "ekf.p0_scale" => self.ekf.p0_scale = f()?,
            "ekf.doc_threshold" => self.ekf.doc_threshold = f()?,
            "persistence.belief_threshold" => self.persistence.belief_threshold = f()?,
            "persistence.likelihood_scale" => self.persistence.likelihood_scale = f()?,
            "persistence.miss_present" => self.persistence.miss_likelihood_present = f()?,
            "persistence.miss_absent" => self.persistence.miss_likelihood_absent = f()?,
            "persistence.max_range" => self.persistence.max_range = f()?,
            "camera.fx" => self.camera.fx = f()?,
            "camera.fy" => self.camera.fy = f()?,
            "camera.cx" => self.camera.cx = f()?,
            "camera.cy" => self.camera.cy = f()?,
            "camera.width" => self.camera.width = f()?,
            "camera.height" => self.camera.height = f()?,
            "log.level" => {
                self.log_level = match value {
                    "quiet" => LogLevel::Quiet,
                    "info" => LogLevel::Info,
                    "debug" => LogLevel::Debug,
                    _ => return Err(bad_value()),
                }
            }
            _ => return Err(Error::Config(format!("{where_}: unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parse a config document over the defaults. Unknown keys are rejected.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{source}:{}: expected 'key = value'", idx + 1))
            })?;
            cfg.apply_key(key.trim(), value.trim(), &format!("{source}:{}", idx + 1))?;
        }
        cfg.apply_env_overrides()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load from a file; a missing path is an io failure, bad contents are
    /// config errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Defaults plus environment overrides only.
    pub fn from_env() -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_env_overrides()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_env_overrides(&mut self) -> Result<()> {
        let known = self.known_keys();
        let mut overrides: Vec<(String, String)> = Vec::new();
        for (name, value) in std::env::vars() {
            if let Some(suffix) = name.strip_prefix(ENV_PREFIX) {
                let key_lower = suffix.to_ascii_lowercase();
                // dots collapse to underscores in the env name; match against
                // the known key set to reverse the mapping
                let matching: Vec<&String> = known
                    .iter()
                    .filter(|k| k.replace('.', "_") == key_lower)
                    .collect();
                match matching.len() {
                    1 => overrides.push((matching[0].clone(), value)),
                    0 => {
                        // per-class depth thresholds have open-ended keys
                        if let Some(class) = key_lower.strip_prefix("classifier_depth_threshold_")
                        {
                            overrides
                                .push((format!("classifier.depth_threshold.{class}"), value));
                        } else {
                            return Err(Error::Config(format!(
                                "unknown environment override {name}"
                            )));
                        }
                    }
                    _ => unreachable!("key set is prefix-free"),
                }
            }
        }
        overrides.sort();
        for (key, value) in overrides {
            self.apply_key(&key, &value, &format!("env {ENV_PREFIX}..."))?;
        }
        Ok(())
    }

    fn known_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = [
            "classifier.default_depth_threshold",
            "classifier.occlusion_iou_threshold",
            "classifier.stddev_factor",
            "classifier.stride",
            "classifier.robust_min",
            "assoc.iou_threshold",
            "assoc.ltda_threshold",
            "assoc.keyframe_window_n",
            "mapping.keyframe_every",
            "ekf.q_pos",
            "ekf.q_vel",
            "ekf.r_meas",
            "ekf.p0_scale",
            "ekf.doc_threshold",
            "persistence.belief_threshold",
            "persistence.likelihood_scale",
            "persistence.miss_present",
            "persistence.miss_absent",
            "persistence.max_range",
            "camera.fx",
            "camera.fy",
            "camera.cx",
            "camera.cy",
            "camera.width",
            "camera.height",
            "log.level",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for class in self.classifier.depth_threshold_by_class.keys() {
            keys.push(format!("classifier.depth_threshold.{class}"));
        }
        keys
    }

    /// Canonical rendering: every effective key, sorted, one per line.
    pub fn canonical_string(&self) -> String {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        let c = &self.classifier;
        for (class, threshold) in &c.depth_threshold_by_class {
            entries.insert(format!("classifier.depth_threshold.{class}"), threshold.to_string());
        }
        entries.insert("classifier.default_depth_threshold".into(), c.default_depth_threshold.to_string());
        entries.insert("classifier.occlusion_iou_threshold".into(), c.occlusion_iou_threshold.to_string());
        entries.insert("classifier.stddev_factor".into(), c.stddev_occlusion_factor.to_string());
        entries.insert("classifier.stride".into(), c.stride.to_string());
        entries.insert("classifier.robust_min".into(), c.robust_min.to_string());
        let a = &self.assoc;
        entries.insert("assoc.iou_threshold".into(), a.iou_threshold.to_string());
        entries.insert("assoc.ltda_threshold".into(), a.ltda_threshold.to_string());
        entries.insert("assoc.keyframe_window_n".into(), a.keyframe_window_n.to_string());
        entries.insert("mapping.keyframe_every".into(), self.mapping.keyframe_every.to_string());
        let e = &self.ekf;
        entries.insert("ekf.q_pos".into(), e.q_pos.to_string());
        entries.insert("ekf.q_vel".into(), e.q_vel.to_string());
        entries.insert("ekf.r_meas".into(), e.r_meas.to_string());
        entries.insert("ekf.p0_scale".into(), e.p0_scale.to_string());
        entries.insert("ekf.doc_threshold".into(), e.doc_threshold.to_string());
        let p = &self.persistence;
        entries.insert("persistence.belief_threshold".into(), p.belief_threshold.to_string());
        entries.insert("persistence.likelihood_scale".into(), p.likelihood_scale.to_string());
        entries.insert("persistence.miss_present".into(), p.miss_likelihood_present.to_string());
        entries.insert("persistence.miss_absent".into(), p.miss_likelihood_absent.to_string());
        entries.insert("persistence.max_range".into(), p.max_range.to_string());
        let cam = &self.camera;
        entries.insert("camera.fx".into(), cam.fx.to_string());
        entries.insert("camera.fy".into(), cam.fy.to_string());
        entries.insert("camera.cx".into(), cam.cx.to_string());
        entries.insert("camera.cy".into(), cam.cy.to_string());
        entries.insert("camera.width".into(), cam.width.to_string());
        entries.insert("camera.height".into(), cam.height.to_string());
        entries.insert(
            "log.level".into(),
            match self.log_level {
                LogLevel::Quiet => "quiet".into(),
                LogLevel::Info => "info".into(),
                LogLevel::Debug => "debug".into(),
            },
        );
        let mut out = String::new();
        for (key, value) in entries {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// FNV-1a hash of the canonical rendering.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.canonical_string().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_applies_values_and_defaults() {
        let text = "\
# tuned run
assoc.iou_threshold = 0.4
classifier.depth_threshold.62 = 0.35
ekf.doc_threshold = 0.2
log.level = info
";
        let cfg = PipelineConfig::parse(text, "t").unwrap();
        assert_eq!(cfg.assoc.iou_threshold, 0.4);
        assert_eq!(cfg.classifier.depth_threshold(62), 0.35);
        assert_eq!(cfg.classifier.depth_threshold(56), 0.5); // default kept
        assert_eq!(cfg.ekf.doc_threshold, 0.2);
        assert_eq!(cfg.log_level, LogLevel::Info);
        assert_eq!(cfg.assoc.ltda_threshold, 0.5);
    }

    #[test]
    fn unknown_key_rejected_with_path() {
        let err = PipelineConfig::parse("assoc.bogus = 1\n", "cfg.txt").unwrap_err();
        match err {
            Error::Config(msg) => {
                assert!(msg.contains("cfg.txt:1"), "{msg}");
                assert!(msg.contains("assoc.bogus"), "{msg}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_bounds_value_rejected() {
        assert!(PipelineConfig::parse("assoc.iou_threshold = 1.5\n", "t").is_err());
        assert!(PipelineConfig::parse("persistence.miss_present = 0.8\n", "t").is_err());
        assert!(PipelineConfig::parse("ekf.q_pos = -1\n", "t").is_err());
        assert!(PipelineConfig::parse("mapping.keyframe_every = 0\n", "t").is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = PipelineConfig::default();
        let b = PipelineConfig::parse("assoc.iou_threshold = 0.31\n", "t").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), PipelineConfig::default().hash());
    }

    #[test]
    fn env_override_applies() {
        // process-global env: use a unique key and restore afterwards
        std::env::set_var("BELIEFMAP_EKF_DOC_THRESHOLD", "0.42");
        let cfg = PipelineConfig::from_env().unwrap();
        std::env::remove_var("BELIEFMAP_EKF_DOC_THRESHOLD");
        assert_eq!(cfg.ekf.doc_threshold, 0.42);
    }

    #[test]
    fn env_override_per_class_threshold() {
        std::env::set_var("BELIEFMAP_CLASSIFIER_DEPTH_THRESHOLD_77", "0.33");
        let cfg = PipelineConfig::from_env().unwrap();
        std::env::remove_var("BELIEFMAP_CLASSIFIER_DEPTH_THRESHOLD_77");
        assert_eq!(cfg.classifier.depth_threshold(77), 0.33);
    }
}
