use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../../data/scattering_factors.tsv");

/// Environment variable naming a directory whose data files replace the
/// built-in tables.
pub const DATA_DIR_ENV: &str = "TOMOBENCH_DATA_DIR";

/// Per-element scattering parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementParams {
    /// Gaussian amplitudes, Å.
    pub a: [f64; 5],
    /// Gaussian widths, Å².
    pub b: [f64; 5],
    pub vdw_radius: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringTable {
    elements: BTreeMap<String, ElementParams>,
}

impl ScatteringTable {
    /// Built-in table, or `scattering_factors.tsv` from the data directory
    /// override when that variable is set and the file exists.
    pub fn standard() -> Result<Self> {
        if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
            let path = Path::new(&dir).join("scattering_factors.tsv");
            if path.exists() {
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                return Self::parse(&text);
            }
        }
        Self::parse(BUILTIN)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut elements = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 13 {
                return Err(Error::Parse { line: n + 1, message: format!("expected 13 columns, found {}", cols.len()) });
            }
            let nums = cols[1..]
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })?;
            let p = ElementParams {
                a: [nums[0], nums[1], nums[2], nums[3], nums[4]],
                b: [nums[5], nums[6], nums[7], nums[8], nums[9]],
                vdw_radius: nums[10],
                mass: nums[11],
            };
            if p.a.iter().chain(&p.b).any(|v| !(*v > 0.0)) || !(p.vdw_radius > 0.0) {
                return Err(Error::Parse { line: n + 1, message: "parameters must be positive".into() });
            }
            elements.insert(normalize_symbol(cols[0]), p);
        }
        Ok(Self { elements })
    }

    pub fn get(&self, symbol: &str) -> Option<&ElementParams> {
        self.elements.get(symbol)
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.elements.contains_key(symbol)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.elements.keys().map(String::as_str)
    }
}

/// `"FE"`, `"fe"` → `"Fe"`.
pub fn normalize_symbol(s: &str) -> String {
    let s = s.trim();
    let mut out = String::with_capacity(2);
    for (i, c) in s.chars().enumerate() {
        if i == 0 {
            out.extend(c.to_uppercase());
        } else {
            out.extend(c.to_lowercase());
        }
    }
    out
}
