//! Sweep configuration (JSON, unknown fields rejected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{FadingParams, Geometry};
use crate::error::{Error, Result};
use crate::model::{Protocol, Scenario};
use crate::protocols::{GridSpec, SolveSettings, TsPowerMetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Unicast,
    Multicast,
}

impl ScenarioKind {
    pub const BOTH: [ScenarioKind; 2] = [ScenarioKind::Unicast, ScenarioKind::Multicast];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Unicast => "unicast",
            ScenarioKind::Multicast => "multicast",
        }
    }

    /// Parses `unicast`, `multicast` or `both`.
    pub fn parse_selection(s: &str) -> Result<Vec<ScenarioKind>> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unicast" => Ok(vec![ScenarioKind::Unicast]),
            "multicast" => Ok(vec![ScenarioKind::Multicast]),
            "both" => Ok(Self::BOTH.to_vec()),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unicast" => Ok(ScenarioKind::Unicast),
            "multicast" => Ok(ScenarioKind::Multicast),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Target rates in bit/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rates {
    pub unicast_t: f64,
    pub unicast_r: f64,
    pub multicast: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Rates {
            unicast_t: 1.0,
            unicast_r: 1.0,
            multicast: 3.46,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub geometry: Geometry,
    pub fading: FadingParams,
    /// AP antennas.
    pub antennas: usize,
    pub elements: Vec<usize>,
    pub protocols: Vec<Protocol>,
    pub scenarios: Vec<ScenarioKind>,
    pub rates: Rates,
    pub grids: GridSpec,
    pub trials: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub ts_power_metric: TsPowerMetric,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            geometry: Geometry::default(),
            fading: FadingParams::default(),
            antennas: 2,
            elements: vec![10, 20, 30, 40, 50],
            protocols: Protocol::ALL.to_vec(),
            scenarios: ScenarioKind::BOTH.to_vec(),
            rates: Rates::default(),
            grids: GridSpec::default(),
            trials: 100,
            master_seed: 20_210_701,
            output_dir: PathBuf::from("results"),
            ts_power_metric: TsPowerMetric::Average,
        }
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.geometry.validate().map_err(as_config)?;
        self.fading.validate().map_err(as_config)?;
        self.grids.validate().map_err(as_config)?;
        if self.antennas == 0 {
            return bad("antennas must be >= 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.elements.is_empty() || self.protocols.is_empty() || self.scenarios.is_empty() {
            return bad("elements, protocols and scenarios must be non-empty".into());
        }
        for &m in &self.elements {
            if m == 0 {
                return bad("element counts must be positive".into());
            }
            for &p in &self.protocols {
                if !p.supports_elements(m) {
                    return bad(format!("{p} requires an even element count, got M = {m}"));
                }
            }
        }
        for kind in &self.scenarios {
            self.scenario(*kind).validate().map_err(as_config)?;
        }
        Ok(())
    }

    pub fn scenario(&self, kind: ScenarioKind) -> Scenario {
        match kind {
            ScenarioKind::Unicast => Scenario::Unicast {
                rate_t: self.rates.unicast_t,
                rate_r: self.rates.unicast_r,
            },
            ScenarioKind::Multicast => Scenario::Multicast {
                rate: self.rates.multicast,
            },
        }
    }

    pub fn settings(&self) -> SolveSettings {
        SolveSettings {
            grids: self.grids,
            ts_metric: self.ts_power_metric,
        }
    }

    /// Element counts, protocols and scenarios deduplicated in their listed order.
    pub(crate) fn normalized(&self) -> (Vec<usize>, Vec<Protocol>, Vec<ScenarioKind>) {
        fn dedup<X: PartialEq + Copy>(v: &[X]) -> Vec<X> {
            let mut out = Vec::new();
            for x in v {
                if !out.contains(x) {
                    out.push(*x);
                }
            }
            out
        }
        (
            dedup(&self.elements),
            dedup(&self.protocols),
            dedup(&self.scenarios),
        )
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// Parses `a:b:step` (inclusive) or a single count.
pub fn parse_element_range(s: &str) -> Result<Vec<usize>> {
    let err = || Error::Config(format!("bad element range '{s}', expected a:b:step"));
    let parts: Vec<usize> = s
        .split(':')
        .map(|p| p.trim().parse::<usize>().map_err(|_| err()))
        .collect::<Result<_>>()?;
    let (a, b, step) = match parts[..] {
        [a] => (a, a, 1),
        [a, b] => (a, b, 1),
        [a, b, step] => (a, b, step),
        _ => return Err(err()),
    };
    if a == 0 || step == 0 || b < a {
        return Err(err());
    }
    Ok((a..=b).step_by(step).collect())
}

/// Parses a comma-separated protocol list.
pub fn parse_protocol_list(s: &str) -> Result<Vec<Protocol>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = SweepConfig::default();
        c.validate().unwrap();
        assert_eq!(c.elements, vec![10, 20, 30, 40, 50]);
        assert_eq!(c.protocols.len(), 5);
        assert_eq!(c.trials, 100);
        assert_eq!(c.rates.multicast, 3.46);
    }

    #[test]
    fn json_round_trip_and_partial_files() {
        let c = SweepConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(SweepConfig::from_json(&text).unwrap(), c);
        let partial = SweepConfig::from_json(r#"{"trials": 3, "elements": [4]}"#).unwrap();
        assert_eq!(partial.trials, 3);
        assert_eq!(partial.antennas, 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = SweepConfig::from_json(r#"{"trails": 3}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = SweepConfig::from_json(r#"{"rates": {"unicast": 1}}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in [
            r#"{"trials": 0}"#,
            r#"{"elements": [0]}"#,
            r#"{"elements": [5]}"#,
            r#"{"antennas": 0}"#,
            r#"{"rates": {"multicast": -1.0}}"#,
            r#"{"grids": {"n_phase": 2}}"#,
            r#"{"protocols": ["XX"]}"#,
        ] {
            assert!(
                matches!(SweepConfig::from_json(text), Err(Error::Config(_))),
                "{text}"
            );
        }
        // odd M is fine without the conventional baseline
        SweepConfig::from_json(r#"{"elements": [5], "protocols": ["ES", "TS"]}"#).unwrap();
    }

    #[test]
    fn element_ranges() {
        assert_eq!(
            parse_element_range("10:50:10").unwrap(),
            vec![10, 20, 30, 40, 50]
        );
        assert_eq!(parse_element_range("4").unwrap(), vec![4]);
        assert_eq!(parse_element_range("2:5").unwrap(), vec![2, 3, 4, 5]);
        assert!(parse_element_range("0:4:2").is_err());
        assert!(parse_element_range("4:2:1").is_err());
        assert!(parse_element_range("a:b").is_err());
        assert!(parse_element_range("2:4:0").is_err());
    }

    #[test]
    fn protocol_lists() {
        assert_eq!(
            parse_protocol_list("ES,ms, Omni").unwrap(),
            vec![
                Protocol::EnergySplitting,
                Protocol::ModeSwitching,
                Protocol::OmniCoupled
            ]
        );
        assert!(parse_protocol_list("ES,bogus").is_err());
        assert_eq!(ScenarioKind::parse_selection("both").unwrap().len(), 2);
        assert!(ScenarioKind::parse_selection("broadcast").is_err());
    }
}
