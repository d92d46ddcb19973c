use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ScreeningError;
use crate::baseline::{Method, NrConfig};
use crate::he::HeConfig;

/// Prefix of environment variables that override configuration keys.
pub const ENV_PREFIX: &str = "GRIDHE_";

/// Settings of a screening or benchmark run, read from TOML.
///
/// ```toml
/// case = "data/case118.m"
/// contingencies = "n1.csv"
/// methods = ["HE", "NR(1.0)"]
/// workers = 4
/// out = "out"
///
/// [solver]
/// order = 10
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub contingencies: Option<PathBuf>,
    pub methods: Vec<Method>,
    /// Total thread budget.
    pub workers: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Longest wait for a subsystem worker reply, in seconds.
    pub timeout_secs: f64,
    /// Classify solutions by traceback.
    pub verify: bool,
    pub solver: HeConfig,
    pub nr: NrConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: None,
            partition: None,
            contingencies: None,
            methods: vec![Method::He],
            workers: 1,
            seed: 0,
            out: PathBuf::from("out"),
            timeout_secs: 60.0,
            verify: true,
            solver: HeConfig::default(),
            nr: NrConfig::default(),
        }
    }
}

/// Parses a method list such as `HE,PHE,NR(1.0,0.5)`; an NR entry with several damping factors expands to one method each.
pub fn parse_methods(text: &str) -> Result<Vec<Method>, ScreeningError> {
    let mut items = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            _ => {}
        }
        if ch == ',' && depth == 0 {
            items.push(std::mem::take(&mut cur));
        } else {
            cur.push(ch);
        }
    }
    items.push(cur);
    let mut out = Vec::new();
    for item in items.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let upper = item.to_ascii_uppercase();
        if let Some(inner) = upper.strip_prefix("NR(").and_then(|r| r.strip_suffix(')')) {
            for mu in inner.split(',') {
                out.push(format!("NR({})", mu.trim()).parse().map_err(ScreeningError::Usage)?);
            }
        } else {
            out.push(item.parse().map_err(ScreeningError::Usage)?);
        }
    }
    if out.is_empty() {
        return Err(ScreeningError::Usage("no methods given".into()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ScreeningError> {
        toml::from_str(text).map_err(|e| ScreeningError::Usage(format!("config: {e}")))
    }

    pub fn read(path: &std::path::Path) -> Result<Self, ScreeningError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScreeningError::Usage(format!("config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Applies `GRIDHE_*` overrides; unknown keys with the prefix are rejected.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ScreeningError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let Some(key) = k.as_ref().strip_prefix(ENV_PREFIX) else { continue };
            let v = v.as_ref();
            let num = |what: &str| ScreeningError::Usage(format!("{ENV_PREFIX}{key}: invalid {what} `{v}`"));
            match key {
                "CASE" => self.case = Some(v.into()),
                "PARTITION" => self.partition = Some(v.into()),
                "CONTINGENCIES" => self.contingencies = Some(v.into()),
                "METHODS" => self.methods = parse_methods(v)?,
                "WORKERS" => self.workers = v.parse().map_err(|_| num("integer"))?,
                "SEED" => self.seed = v.parse().map_err(|_| num("integer"))?,
                "OUT" => self.out = v.into(),
                "ORDER" => self.solver.order = v.parse().map_err(|_| num("integer"))?,
                "TIMEOUT" => self.timeout_secs = v.parse().map_err(|_| num("number"))?,
                "VERIFY" => self.verify = v.parse().map_err(|_| num("boolean"))?,
                _ => return Err(ScreeningError::Usage(format!("unknown environment override {ENV_PREFIX}{key}"))),
            }
        }
        Ok(())
    }

    pub fn needs_partition(&self) -> bool {
        self.methods.iter().any(|m| matches!(m, Method::Phe | Method::P2he))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    /// Checks the settings a screening run depends on.
    pub fn validate(&self) -> Result<(), ScreeningError> {
        let usage = |m: &str| Err(ScreeningError::Usage(m.into()));
        if self.case.is_none() {
            return usage("no case given");
        }
        if self.contingencies.is_none() {
            return usage("no contingency list given");
        }
        if self.methods.is_empty() {
            return usage("no methods given");
        }
        if self.needs_partition() && self.partition.is_none() {
            return usage("PHE and P2HE require a partition");
        }
        if self.workers == 0 {
            return usage("workers must be at least 1");
        }
        if self.solver.order == 0 {
            return usage("series order must be at least 1");
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return usage("timeout must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_defaults() {
        let c = RunConfig::from_toml_str(
            "case = \"a.m\"\ncontingencies = \"c.csv\"\nmethods = [\"HE\", \"NR(0.5)\"]\nworkers = 3\n[solver]\norder = 7\n",
        )
        .unwrap();
        assert_eq!(c.methods, vec![Method::He, Method::Nr { mu: 0.5 }]);
        assert_eq!(c.workers, 3);
        assert_eq!(c.solver.order, 7);
        assert_eq!(c.solver.tol_converge, HeConfig::default().tol_converge);
        c.validate().unwrap();
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut c = RunConfig::default();
        c.apply_env([("GRIDHE_METHODS", "HE,P2HE"), ("GRIDHE_WORKERS", "8"), ("HOME", "/x"), ("GRIDHE_ORDER", "5")]).unwrap();
        assert_eq!(c.methods, vec![Method::He, Method::P2he]);
        assert_eq!(c.workers, 8);
        assert_eq!(c.solver.order, 5);
        assert!(c.apply_env([("GRIDHE_WORKERS", "many")]).is_err());
        assert!(c.apply_env([("GRIDHE_NOPE", "1")]).is_err());
    }

    #[test]
    fn p2he_requires_partition() {
        let mut c = RunConfig { case: Some("a.m".into()), contingencies: Some("c.csv".into()), ..Default::default() };
        c.methods = vec![Method::P2he];
        assert!(matches!(c.validate(), Err(ScreeningError::Usage(_))));
        c.partition = Some("p.toml".into());
        c.validate().unwrap();
        c.workers = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn method_lists() {
        assert_eq!(
            parse_methods("HE, phe,NR(1.0,0.5)").unwrap(),
            vec![Method::He, Method::Phe, Method::Nr { mu: 1.0 }, Method::Nr { mu: 0.5 }]
        );
        assert_eq!(parse_methods("NR").unwrap(), vec![Method::Nr { mu: 1.0 }]);
        assert!(parse_methods("").is_err());
        assert!(parse_methods("HE,XX").is_err());
        assert!(parse_methods("NR(2)").is_err());
    }
}
