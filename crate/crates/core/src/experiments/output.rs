//! Experiment results as named numeric tables plus provenance metadata.
//!
//! CSV layout:
//!
//! ```text
//! # gtraj <version>
//! # meta: {"tool":"gtraj","version":...,"seed":...,"config":{...},"notes":[...]}
//! # table: <name>
//! col_a,col_b
//! 1.0000000000000000e0,2.5000000000000000e-1
//! ```
//!
//! Values carry 17 significant digits, which round-trips every `f64`.
//! Non-finite values are written `NaN`, `inf`, `-inf`.

use std::fmt::Write as _;

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OutputFormat};
use crate::error::{Error, Result};

pub const TOOL: &str = "gtraj";

/// Package version followed by `git describe` of the build, when available.
pub fn version() -> &'static str {
    concat!(env!("CARGO_PKG_VERSION"), "+", env!("GTRAJ_GIT_DESCRIBE"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Warnings raised while producing the data.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Metadata {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            tool: TOOL.into(),
            version: version().into(),
            seed: config.seed,
            config: config.clone(),
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(serialize_with = "ser_rows", deserialize_with = "de_rows")]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<String>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// JSON cell: finite numbers as numbers, the rest as strings.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Cell {
    Num(f64),
    Text(String),
}

fn ser_rows<S: Serializer>(rows: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|&v| if v.is_finite() { Cell::Num(v) } else { Cell::Text(v.to_string()) })
                .collect()
        })
        .collect();
    cells.serialize(s)
}

fn de_rows<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
    let cells = Vec::<Vec<Cell>>::deserialize(d)?;
    cells
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|c| match c {
                    Cell::Num(v) => Ok(v),
                    Cell::Text(t) => t.parse().map_err(|_| serde::de::Error::custom(format!("bad number `{t}`"))),
                })
                .collect()
        })
        .collect()
}

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub meta: Metadata,
    pub tables: Vec<Table>,
}

impl ExperimentOutput {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            meta: Metadata::new(config),
            tables: Vec::new(),
        }
    }

    pub fn note(&mut self, msg: String) {
        log::warn!("{msg}");
        self.meta.notes.push(msg);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "# {} {}", TOOL, self.meta.version).unwrap();
        writeln!(out, "# meta: {}", serde_json::to_string(&self.meta)?).unwrap();
        for t in &self.tables {
            if t.name.contains('\n') || t.columns.iter().any(|c| c.contains([',', '\n'])) {
                return Err(Error::Usage(format!("table {} has names unfit for CSV", t.name)));
            }
            writeln!(out, "# table: {}", t.name).unwrap();
            writeln!(out, "{}", t.columns.join(",")).unwrap();
            for r in &t.rows {
                let cells: Vec<String> = r.iter().map(|&v| fmt_value(v)).collect();
                writeln!(out, "{}", cells.join(",")).unwrap();
            }
        }
        Ok(out)
    }

    /// Parses either output format.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return Ok(serde_json::from_str(text)?);
        }
        Self::parse_csv(text)
    }

    fn parse_csv(text: &str) -> Result<Self> {
        let mut meta = None;
        let mut tables: Vec<Table> = Vec::new();
        let mut want_header = false;
        for (ln, line) in text.lines().enumerate() {
            let bad = |what: &str| Error::Config(format!("output line {}: {what}", ln + 1));
            if let Some(rest) = line.strip_prefix("# meta: ") {
                meta = Some(serde_json::from_str::<Metadata>(rest).map_err(|e| bad(&e.to_string()))?);
            } else if let Some(name) = line.strip_prefix("# table: ") {
                tables.push(Table::new(name, Vec::new()));
                want_header = true;
            } else if line.starts_with('#') || line.is_empty() {
                continue;
            } else {
                let t = tables.last_mut().ok_or_else(|| bad("data before any table"))?;
                if want_header {
                    t.columns = line.split(',').map(str::to_owned).collect();
                    want_header = false;
                } else {
                    let row = line
                        .split(',')
                        .map(|c| c.parse::<f64>().map_err(|_| bad(&format!("bad number `{c}`"))))
                        .collect::<Result<Vec<f64>>>()?;
                    if row.len() != t.columns.len() {
                        return Err(bad(&format!("{} values for {} columns", row.len(), t.columns.len())));
                    }
                    t.rows.push(row);
                }
            }
        }
        let meta = meta.ok_or_else(|| Error::Config("no `# meta:` line in output".into()))?;
        Ok(Self { meta, tables })
    }
}
