use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{BranchSettings, BranchingRule, CutRule, FullStrongRule, HybridGmiRule, PseudocostRule, RandomRule};
use crate::cutgen::CutKind;

pub type RuleFactory = fn(&BranchSettings) -> Box<dyn BranchingRule>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown branching rule `{name}` (known: {known})")]
pub struct UnknownRule {
    pub name: String,
    pub known: String,
}

/// Branching rules by name.
#[derive(Clone)]
pub struct RuleRegistry {
    factories: BTreeMap<String, RuleFactory>,
}

impl RuleRegistry {
    pub fn empty() -> Self {
        RuleRegistry { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, factory: RuleFactory) -> &mut Self {
        self.factories.insert(name.into(), factory);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, settings: &BranchSettings) -> Result<Box<dyn BranchingRule>, UnknownRule> {
        match self.factories.get(name) {
            Some(f) => Ok(f(settings)),
            None => Err(UnknownRule { name: name.to_string(), known: self.names().collect::<Vec<_>>().join(", ") }),
        }
    }
}

impl Default for RuleRegistry {
    fn default() -> Self {
        let mut r = RuleRegistry::empty();
        r.register("random", |_| Box::new(RandomRule))
            .register("fullstrong", |_| Box::new(FullStrongRule))
            .register("pseudocost", |s| Box::new(PseudocostRule { reliability: s.reliability }))
            .register("gmi", |_| Box::new(CutRule { kind: CutKind::Gmi }))
            .register("weakgmi", |_| Box::new(CutRule { kind: CutKind::WeakGmi }))
            .register("hybridgmi", |s| Box::new(HybridGmiRule { reliability: s.reliability, weight: s.gmi_weight }));
        r
    }
}

impl fmt::Debug for RuleRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

/// A rule name with an optional GMI weight, written `name` or `name@weight`
/// (e.g. `hybridgmi@1e-4`).
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSpec {
    pub name: String,
    pub gmi_weight: Option<f64>,
}

impl RuleSpec {
    pub fn new(name: impl Into<String>) -> Self {
        RuleSpec { name: name.into(), gmi_weight: None }
    }

    pub fn with_weight(name: impl Into<String>, w: f64) -> Self {
        RuleSpec { name: name.into(), gmi_weight: Some(w) }
    }

    /// Label used in result files.
    pub fn label(&self) -> String {
        match self.gmi_weight {
            Some(w) => format!("{}@{}", self.name, w),
            None => self.name.clone(),
        }
    }

    pub fn settings(&self, base: &BranchSettings) -> BranchSettings {
        let mut s = *base;
        if let Some(w) = self.gmi_weight {
            s.gmi_weight = w;
        }
        s
    }
}

impl FromStr for RuleSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once('@') {
            None => Ok(RuleSpec::new(s)),
            Some((name, w)) => {
                let w: f64 = w.parse().map_err(|_| format!("bad weight in rule `{s}`"))?;
                Ok(RuleSpec::with_weight(name, w))
            }
        }
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_rules_resolve() {
        let reg = RuleRegistry::default();
        let names: Vec<&str> = reg.names().collect();
        assert_eq!(names, vec!["fullstrong", "gmi", "hybridgmi", "pseudocost", "random", "weakgmi"]);
        for n in names {
            assert_eq!(reg.create(n, &BranchSettings::default()).unwrap().name(), n);
        }
        assert!(reg.create("cloud", &BranchSettings::default()).is_err());
    }

    #[test]
    fn rule_spec_parsing() {
        let s: RuleSpec = "hybridgmi@1e-4".parse().unwrap();
        assert_eq!(s.name, "hybridgmi");
        assert_eq!(s.gmi_weight, Some(1e-4));
        assert_eq!(s.label(), "hybridgmi@0.0001");
        assert_eq!("gmi".parse::<RuleSpec>().unwrap(), RuleSpec::new("gmi"));
        assert!("x@y".parse::<RuleSpec>().is_err());
    }
}
