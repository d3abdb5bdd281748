//! Solver-agnostic mixed-integer linear model.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, a)| a * x[i]).sum()
    }

    /// Amount by which `x` violates the row; zero when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Bidirectional map between model symbols such as `a1[3]` and file-legal
/// variable names such as `a1_3`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NameMap {
    to_name: BTreeMap<String, String>,
    to_symbol: BTreeMap<String, String>,
}

impl NameMap {
    pub fn insert(&mut self, symbol: &str, name: &str) -> Result<()> {
        if self.to_symbol.contains_key(name) || self.to_name.contains_key(symbol) {
            return Err(Error::InvalidParameter {
                name: "name_map".into(),
                detail: format!("duplicate mapping {symbol} -> {name}"),
            });
        }
        self.to_name.insert(symbol.to_string(), name.to_string());
        self.to_symbol.insert(name.to_string(), symbol.to_string());
        Ok(())
    }

    pub fn name(&self, symbol: &str) -> Option<&str> {
        self.to_name.get(symbol).map(String::as_str)
    }

    pub fn symbol(&self, name: &str) -> Option<&str> {
        self.to_symbol.get(name).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.to_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_name.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.to_name.iter().map(|(s, n)| (s.as_str(), n.as_str()))
    }
}

/// File-legal name for a symbol: brackets and commas become underscores,
/// anything else outside `[A-Za-z0-9_.]` is dropped.
pub fn escape_symbol(symbol: &str) -> String {
    let mut out = String::with_capacity(symbol.len());
    for ch in symbol.chars() {
        match ch {
            '[' | ',' => out.push('_'),
            ']' => {}
            c if c.is_ascii_alphanumeric() || c == '_' || c == '.' => out.push(c),
            _ => out.push('_'),
        }
    }
    if out
        .chars()
        .next()
        .is_none_or(|c| c.is_ascii_digit() || c == '.')
    {
        out.insert(0, 'v');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MipModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Minimized objective.
    pub objective: Vec<(usize, f64)>,
    pub objective_offset: f64,
    pub name_map: NameMap,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl MipModel {
    pub fn new() -> Self {
        MipModel::default()
    }

    /// Add a variable addressed by a model symbol; its file name is derived
    /// with [`escape_symbol`].
    pub fn add_var(&mut self, symbol: &str, lo: f64, hi: f64, kind: VarKind) -> Result<usize> {
        let name = escape_symbol(symbol);
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidInterval {
                name: symbol.to_string(),
                lo,
                hi,
            });
        }
        let (lo, hi) = match kind {
            VarKind::Binary => (lo.max(0.0), hi.min(1.0)),
            VarKind::Continuous => (lo, hi),
        };
        if self.index.contains_key(&name) {
            return Err(Error::InvalidParameter {
                name: symbol.into(),
                detail: "duplicate variable".into(),
            });
        }
        self.name_map.insert(symbol, &name)?;
        self.index.insert(name.clone(), self.variables.len());
        self.variables.push(Variable { name, lo, hi, kind });
        Ok(self.variables.len() - 1)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, a) in terms {
            *merged.entry(i).or_insert(0.0) += a;
        }
        let terms = merged.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.constraints.push(Constraint {
            name: escape_symbol(&name.into()),
            terms,
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, f64)>, offset: f64) {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, a) in terms {
            *merged.entry(i).or_insert(0.0) += a;
        }
        self.objective = merged.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.objective_offset = offset;
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        if self.index.len() != self.variables.len() {
            return self.variables.iter().position(|v| v.name == name);
        }
        self.index.get(name).copied()
    }

    /// Index of the variable for a model symbol such as `l1[2]`.
    pub fn symbol_index(&self, symbol: &str) -> Option<usize> {
        self.name_map.name(symbol).and_then(|n| self.var_index(n))
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
    }

    pub fn binary_count(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }

    /// Structural checks: indices in range, finite bounds, binary bounds.
    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        for v in &self.variables {
            if !(v.lo.is_finite() && v.hi.is_finite()) || v.lo > v.hi {
                return Err(Error::InvalidInterval {
                    name: v.name.clone(),
                    lo: v.lo,
                    hi: v.hi,
                });
            }
            if v.kind == VarKind::Binary && (v.lo < 0.0 || v.hi > 1.0) {
                return Err(Error::InvalidParameter {
                    name: v.name.clone(),
                    detail: "binary bounds".into(),
                });
            }
        }
        for c in &self.constraints {
            if let Some(&(i, _)) = c.terms.iter().find(|&&(i, _)| i >= n) {
                return Err(Error::UnknownVariable(format!(
                    "index {i} in row {}",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Dense vector from a name-keyed assignment.
    pub fn dense(&self, assignment: &HashMap<String, f64>) -> Result<Vec<f64>> {
        self.variables
            .iter()
            .map(|v| {
                assignment
                    .get(&v.name)
                    .copied()
                    .ok_or_else(|| Error::MissingVariable(v.name.clone()))
            })
            .collect()
    }
}
