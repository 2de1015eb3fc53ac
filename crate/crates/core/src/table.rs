//! Pre-computed decision tables over every `(n, x)` cell.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::design::{Design, DesignRegistry, DesignSpec};
use crate::error::{Error, Result};
use crate::rules::{DoseIndex, DoseOutcome};

pub const MAX_TABLE_N: u32 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCell {
    pub n: u32,
    pub x: u32,
    pub decision: String,
}

/// Decisions at an interior dose with no neighbor data, so the cells show
/// the rule itself plus the current-dose safety overlay (`DU`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub design: String,
    pub p_target: f64,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub max_n: u32,
    pub cells: Vec<TableCell>,
}

impl DecisionTable {
    pub fn build(spec: &DesignSpec, max_n: u32) -> Result<Self> {
        Self::build_with(&DesignRegistry::standard(), spec, max_n)
    }

    pub fn build_with(registry: &DesignRegistry, spec: &DesignSpec, max_n: u32) -> Result<Self> {
        if max_n == 0 || max_n > MAX_TABLE_N {
            return Err(Error::param("max_n", format!("must lie in 1..={MAX_TABLE_N}")));
        }
        let design = registry.build(spec)?;
        let cells = tabulate(design.as_ref(), max_n)?;
        Ok(DecisionTable {
            design: design.name().to_string(),
            p_target: spec.p_target,
            eps_lo: spec.eps_lo,
            eps_hi: spec.eps_hi,
            max_n,
            cells,
        })
    }

    pub fn get(&self, n: u32, x: u32) -> Option<&str> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.x == x)
            .map(|c| c.decision.as_str())
    }

    /// `n,x,decision` with one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,x,decision\n");
        for c in &self.cells {
            writeln!(out, "{},{},{}", c.n, c.x, c.decision).unwrap();
        }
        out
    }

    /// Rows are DLT counts, columns are patient counts; blank where `x > n`.
    pub fn to_grid(&self) -> String {
        let ns: Vec<u32> = {
            let mut v: Vec<u32> = self.cells.iter().map(|c| c.n).collect();
            v.dedup();
            v
        };
        let max_x = self.cells.iter().map(|c| c.x).max().unwrap_or(0);
        let mut out = String::from("x\\n");
        for n in &ns {
            write!(out, "{n:>4}").unwrap();
        }
        out.push('\n');
        for x in 0..=max_x {
            write!(out, "{x:>3}").unwrap();
            for &n in &ns {
                write!(out, "{:>4}", self.get(n, x).unwrap_or("")).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn tabulate(design: &dyn Design, max_n: u32) -> Result<Vec<TableCell>> {
    let dose = DoseIndex::new(2, 3)?;
    let mut cells = Vec::new();
    for n in 1..=max_n {
        if !design.tabulates(n) {
            continue;
        }
        for x in 0..=n {
            let d = design.table_decision(DoseOutcome::new(n, x)?, dose)?;
            cells.push(TableCell {
                n,
                x,
                decision: d.verdict.code().to_string(),
            });
        }
    }
    Ok(cells)
}
