//! JSON system definitions.
//!
//! ```json
//! {
//!   "dim": 3,
//!   "vars": ["a", "b", "c"],
//!   "components": [[{"coef": "-sigma", "powers": [1, 0, 0]}, ...], ...],
//!   "params": {"sigma": 10.0}
//! }
//! ```
//!
//! A coefficient is a number or a product expression such as `"-beta"` or
//! `"2*alpha"`; parameters are substituted when the system is loaded.
//! Optional `"blocks"` maps each coordinate to a time-variable index and
//! `"tau"` gives the direction weights of those variables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polymap::{Poly, PolyMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coef {
    Value(f64),
    Expr(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub coef: Coef,
    pub powers: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub dim: usize,
    #[serde(default)]
    pub vars: Vec<String>,
    pub components: Vec<Vec<TermSpec>>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub blocks: Option<Vec<usize>>,
    #[serde(default)]
    pub tau: Option<Vec<f64>>,
}

/// A loaded system with parameters resolved.
#[derive(Clone, Debug)]
pub struct System {
    pub name: String,
    pub vars: Vec<String>,
    pub field: PolyMap,
    pub params: BTreeMap<String, f64>,
    pub blocks: Option<Vec<usize>>,
    pub tau: Option<Vec<f64>>,
}

impl SystemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("system definition: {e}")))
    }

    /// Resolves parameters (`overrides` win over the file's `params`) and
    /// builds the field.
    pub fn load(&self, overrides: &BTreeMap<String, f64>) -> Result<System> {
        let mut params = self.params.clone();
        params.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
        if self.components.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "{} components for dimension {}",
                self.components.len(),
                self.dim
            )));
        }
        if !self.vars.is_empty() && self.vars.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "{} variable names for dimension {}",
                self.vars.len(),
                self.dim
            )));
        }
        let comps = self
            .components
            .iter()
            .map(|terms| {
                let resolved = terms
                    .iter()
                    .map(|t| Ok((resolve(&t.coef, &params)?, t.powers.clone())))
                    .collect::<Result<Vec<_>>>()?;
                Poly::from_terms(self.dim, resolved)
            })
            .collect::<Result<Vec<_>>>()?;
        let vars = if self.vars.is_empty() {
            (1..=self.dim).map(|i| format!("x{i}")).collect()
        } else {
            self.vars.clone()
        };
        if let Some(blocks) = &self.blocks {
            if blocks.len() != self.dim {
                return Err(Error::InvalidInput("blocks must list every coordinate".into()));
            }
        }
        Ok(System {
            name: self.name.clone().unwrap_or_else(|| "custom".into()),
            vars,
            field: PolyMap::new(self.dim, comps)?,
            params,
            blocks: self.blocks.clone(),
            tau: self.tau.clone(),
        })
    }

    /// Serializes a field back into the system format with numeric coefficients.
    pub fn from_field(name: &str, vars: &[&str], field: &PolyMap) -> Self {
        SystemSpec {
            name: Some(name.to_string()),
            dim: field.dim_in(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            components: field
                .components()
                .iter()
                .map(|c| {
                    c.terms()
                        .iter()
                        .map(|m| TermSpec {
                            coef: Coef::Value(m.coef),
                            powers: m.powers.clone(),
                        })
                        .collect()
                })
                .collect(),
            params: BTreeMap::new(),
            blocks: None,
            tau: None,
        }
    }
}

fn resolve(coef: &Coef, params: &BTreeMap<String, f64>) -> Result<f64> {
    match coef {
        Coef::Value(v) => Ok(*v),
        Coef::Expr(s) => {
            let s = s.trim();
            let (sign, body) = match s.strip_prefix('-') {
                Some(rest) => (-1.0, rest),
                None => (1.0, s.strip_prefix('+').unwrap_or(s)),
            };
            body.split('*').try_fold(sign, |acc, factor| {
                let factor = factor.trim();
                let v = match factor.parse::<f64>() {
                    Ok(v) => v,
                    Err(_) => *params.get(factor).ok_or_else(|| {
                        Error::InvalidInput(format!("unknown parameter `{factor}` in `{s}`"))
                    })?,
                };
                Ok(acc * v)
            })
        }
    }
}
