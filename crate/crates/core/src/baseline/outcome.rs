use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::traceback::Practicality;
use crate::network::PfState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Classification {
    Normal,
    NonPractical,
    Collapse,
}

impl Classification {
    pub const ALL: [Classification; 3] = [Classification::Normal, Classification::NonPractical, Classification::Collapse];
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Normal => "Normal",
            Classification::NonPractical => "NonPractical",
            Classification::Collapse => "Collapse",
        })
    }
}

/// Solution method. Serialized as `HE`, `PHE`, `P2HE` or `NR(mu)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    He,
    Phe,
    P2he,
    Nr { mu: f64 },
}

impl Method {
    pub fn is_holomorphic(&self) -> bool {
        !matches!(self, Method::Nr { .. })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::He => f.write_str("HE"),
            Method::Phe => f.write_str("PHE"),
            Method::P2he => f.write_str("P2HE"),
            Method::Nr { mu } => write!(f, "NR({mu:?})"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim();
        match t.to_ascii_uppercase().as_str() {
            "HE" => return Ok(Method::He),
            "PHE" => return Ok(Method::Phe),
            "P2HE" | "P²HE" => return Ok(Method::P2he),
            "NR" => return Ok(Method::Nr { mu: 1.0 }),
            _ => {}
        }
        let inner = t
            .strip_prefix("NR(")
            .or_else(|| t.strip_prefix("nr("))
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("unknown method `{t}`"))?;
        let mu: f64 = inner.trim().parse().map_err(|_| format!("bad damping factor in `{t}`"))?;
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(format!("damping factor {mu} outside (0, 1]"));
        }
        Ok(Method::Nr { mu })
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// NR iterations or HE stages.
    pub iterations: usize,
    pub final_mismatch: f64,
    pub reached_alpha: f64,
    pub traceback_alpha: Option<f64>,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContingencyOutcome {
    pub classification: Classification,
    pub state: Option<PfState>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

/// Classification from whether a solution was returned and the traceback verdict on it.
pub fn classify(solution_returned: bool, traceback: Option<Practicality>) -> Classification {
    match (solution_returned, traceback) {
        (false, _) => Classification::Collapse,
        (true, Some(Practicality::Practical)) => Classification::Normal,
        (true, _) => Classification::NonPractical,
    }
}

/// Builds an outcome from a solver state and its traceback verdict.
pub fn classify_result(method: Method, state: Option<PfState>, traceback: Option<Practicality>, diagnostics: Diagnostics) -> ContingencyOutcome {
    let classification = classify(state.is_some(), traceback);
    ContingencyOutcome { classification, state, method, diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table() {
        assert_eq!(classify(false, None), Classification::Collapse);
        assert_eq!(classify(false, Some(Practicality::Practical)), Classification::Collapse);
        assert_eq!(classify(true, Some(Practicality::Practical)), Classification::Normal);
        assert_eq!(classify(true, Some(Practicality::NonPractical)), Classification::NonPractical);
        assert_eq!(classify(true, None), Classification::NonPractical);
    }

    #[test]
    fn method_round_trip() {
        for m in [Method::He, Method::Phe, Method::P2he, Method::Nr { mu: 1.0 }, Method::Nr { mu: 0.5 }] {
            let s = m.to_string();
            assert_eq!(s.parse::<Method>().unwrap(), m);
            let j = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<Method>(&j).unwrap(), m);
        }
        assert_eq!(Method::Nr { mu: 1.0 }.to_string(), "NR(1.0)");
        assert!("NR(0)".parse::<Method>().is_err());
        assert!("NR(1.5)".parse::<Method>().is_err());
        assert!("XYZ".parse::<Method>().is_err());
    }
}
