//! Run configuration read from JSON. Relative paths are taken relative to
//! the config file.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use stormarket_core::ingest::DK_2030_CAPACITY;
use stormarket_core::model::{DEFAULT_ALPHA, DEFAULT_EPSILON, DEFAULT_PRICE_CAP};
use stormarket_core::StorageParams;

use crate::error::Failure;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Nash,
    Planner,
    Sweep,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Nash => "nash",
            Mode::Planner => "planner",
            Mode::Sweep => "sweep",
        })
    }
}

/// How storage is sized and split when no explicit player list is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StorageConfig {
    pub n_players: usize,
    /// Capacity shares; the default splits when absent.
    pub shares: Option<Vec<f64>>,
    pub c_rate: f64,
    pub eta: f64,
    /// Efficiency used for sizing; `eta` when absent. Kept fixed in sweeps.
    pub sizing_eta: Option<f64>,
    pub oc: f64,
    pub n_levels: u32,
    pub alpha_batt: f64,
    pub epsilon: f64,
    pub theta: f64,
}

impl Default for StorageConfig {
    fn default() -> Self {
        Self {
            n_players: 1,
            shares: None,
            c_rate: 0.25,
            eta: 0.9,
            sizing_eta: None,
            oc: 0.5,
            n_levels: 4,
            alpha_batt: DEFAULT_ALPHA,
            epsilon: DEFAULT_EPSILON,
            theta: 1.0,
        }
    }
}

/// Grid axes; a missing axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// What to run at each grid point: `nash` or `planner`.
    pub run: Mode,
    pub n: Option<Vec<usize>>,
    pub theta: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    pub oc: Option<Vec<f64>>,
}

fn dk_capacity() -> [f64; 3] {
    DK_2030_CAPACITY
}

fn yes() -> bool {
    true
}

fn default_tolerance() -> f64 {
    1e-6
}

fn default_max_sweeps() -> usize {
    100
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_price_cap() -> f64 {
    DEFAULT_PRICE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Demand bid CSV.
    pub demand: PathBuf,
    /// Day to simulate; the capacity-factor medoid, or the only day, when absent.
    #[serde(default)]
    pub day: Option<NaiveDate>,
    #[serde(default)]
    pub capacity_factors: Option<PathBuf>,
    /// Hourly renewable profile; replaces capacity factors when given.
    #[serde(default)]
    pub res: Option<PathBuf>,
    /// Installed solar, offshore and onshore capacity (MW).
    #[serde(default = "dk_capacity")]
    pub capacities: [f64; 3],
    /// Reduce every curve of the bid file to the smallest block count.
    #[serde(default = "yes")]
    pub downsample: bool,
    #[serde(default = "default_price_cap")]
    pub price_cap: f64,
    #[serde(default)]
    pub storage: StorageConfig,
    /// Explicit players; sizing is skipped when given.
    #[serde(default)]
    pub players: Option<Vec<StorageParams>>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default)]
    pub player_order: Option<Vec<usize>>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

impl RunConfig {
    /// Reads and validates a config, resolving its paths.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.check()?;
        Ok(cfg)
    }

    /// Makes every relative path relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.demand);
        if let Some(p) = self.capacity_factors.as_mut() {
            fix(p);
        }
        if let Some(p) = self.res.as_mut() {
            fix(p);
        }
        fix(&mut self.out);
    }

    pub fn check(&self) -> Result<(), Failure> {
        let bad = |msg: String| Err(Failure::config(msg));
        if !(self.tolerance >= 0.0) {
            return bad(format!("tolerance {} must be >= 0", self.tolerance));
        }
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be positive".into());
        }
        if self.res.is_none() && self.capacity_factors.is_none() {
            return bad("give either `res` or `capacity_factors`".into());
        }
        if self.res.is_some() && self.capacity_factors.is_some() {
            return bad("`res` and `capacity_factors` are exclusive".into());
        }
        let s = &self.storage;
        if !(s.c_rate > 0.0) {
            return bad(format!("storage.c_rate {} must be > 0", s.c_rate));
        }
        for eta in [Some(s.eta), s.sizing_eta].into_iter().flatten() {
            check_eta(eta)?;
        }
        check_oc(s.oc)?;
        check_theta(s.theta)?;
        if s.n_levels == 0 {
            return bad("storage.n_levels must be positive".into());
        }
        if let Some(w) = &s.shares {
            if self.players.is_none() && w.len() != s.n_players {
                return bad(format!(
                    "storage.shares has {} entries for {} players",
                    w.len(),
                    s.n_players
                ));
            }
        }
        if let Some(ps) = &self.players {
            if ps.is_empty() {
                return bad("`players` is empty; drop it to size storage instead".into());
            }
        }
        match (self.mode, &self.sweep) {
            (Mode::Sweep, None) => return bad("sweep mode needs a `sweep` section".into()),
            (Mode::Sweep, Some(sw)) => self.check_sweep(sw)?,
            _ => {}
        }
        Ok(())
    }

    fn check_sweep(&self, sw: &SweepConfig) -> Result<(), Failure> {
        if sw.run == Mode::Sweep {
            return Err(Failure::config("sweep.run must be `nash` or `planner`"));
        }
        let given = [
            sw.n.as_ref().map(Vec::len),
            sw.theta.as_ref().map(Vec::len),
            sw.eta.as_ref().map(Vec::len),
            sw.oc.as_ref().map(Vec::len),
        ];
        if given.iter().all(Option::is_none) {
            return Err(Failure::config("sweep has no axes"));
        }
        if given.contains(&Some(0)) {
            return Err(Failure::config("sweep axes must not be empty"));
        }
        if sw.n.is_some() && self.players.is_some() {
            return Err(Failure::config("an N axis needs sized storage, not explicit players"));
        }
        for &t in sw.theta.iter().flatten() {
            check_theta(t)?;
        }
        for &e in sw.eta.iter().flatten() {
            check_eta(e)?;
        }
        for &c in sw.oc.iter().flatten() {
            check_oc(c)?;
        }
        Ok(())
    }
}

fn check_eta(eta: f64) -> Result<(), Failure> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Failure::config(format!("efficiency {eta} outside (0, 1]")))
    }
}

fn check_oc(oc: f64) -> Result<(), Failure> {
    if oc >= 0.0 {
        Ok(())
    } else {
        Err(Failure::config(format!("operating cost {oc} must be >= 0")))
    }
}

fn check_theta(theta: f64) -> Result<(), Failure> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Failure::config(format!("capacity multiplier {theta} must be >= 0")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<RunConfig, Failure> {
        let mut cfg: RunConfig = serde_json::from_str(json).map_err(|e| Failure::config(e))?;
        cfg.resolve(Path::new("/data"));
        cfg.check()?;
        Ok(cfg)
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse(r#"{"demand": "bids.csv", "res": "res.csv"}"#).unwrap();
        assert_eq!(cfg.demand, PathBuf::from("/data/bids.csv"));
        assert_eq!(cfg.out, PathBuf::from("/data/out"));
        assert_eq!(cfg.mode, Mode::Nash);
        assert_eq!(cfg.tolerance, 1e-6);
        assert_eq!(cfg.storage.n_players, 1);
    }

    #[test]
    fn sweep_axes_are_checked() {
        let base = r#""demand": "b.csv", "res": "r.csv", "mode": "sweep""#;
        assert!(parse(&format!("{{{base}}}")).is_err());
        assert!(parse(&format!("{{{base}, \"sweep\": {{}}}}")).is_err());
        assert!(parse(&format!("{{{base}, \"sweep\": {{\"n\": []}}}}")).is_err());
        assert!(parse(&format!("{{{base}, \"sweep\": {{\"theta\": [-1]}}}}")).is_err());
        assert!(parse(&format!("{{{base}, \"sweep\": {{\"eta\": [1.5]}}}}")).is_err());
        let ok = parse(&format!("{{{base}, \"sweep\": {{\"n\": [0, 1, 2], \"run\": \"planner\"}}}}")).unwrap();
        assert_eq!(ok.sweep.unwrap().run, Mode::Planner);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for json in [
            r#"{"demand": "b.csv"}"#,
            r#"{"demand": "b.csv", "res": "r.csv", "capacity_factors": "c.csv"}"#,
            r#"{"demand": "b.csv", "res": "r.csv", "tolerance": -1}"#,
            r#"{"demand": "b.csv", "res": "r.csv", "storage": {"n_players": 2, "shares": [1.0]}}"#,
            r#"{"demand": "b.csv", "res": "r.csv", "storage": {"c_rate": 0}}"#,
            r#"{"demand": "b.csv", "res": "r.csv", "surprise": 1}"#,
        ] {
            let err = parse(json).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{json}");
        }
    }

    #[test]
    fn absolute_paths_are_kept() {
        let cfg = parse(r#"{"demand": "/x/b.csv", "res": "r.csv", "out": "/tmp/o"}"#).unwrap();
        assert_eq!(cfg.demand, PathBuf::from("/x/b.csv"));
        assert_eq!(cfg.out, PathBuf::from("/tmp/o"));
    }
}
