//! Report rendering and the `--out` directory.

use std::fs;
use std::path::PathBuf;

use bwconv_core::netmodel::{format_csv, format_table};
use bwconv_core::PerfReport;
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Table => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Text forms of a report; JSON is serialized from the report itself.
pub enum Text {
    Grid { header: Vec<String>, rows: Vec<Vec<String>> },
    Fixed { table: String, csv: String },
}

impl Text {
    fn render(&self, fmt: Format) -> String {
        match (self, fmt) {
            (Text::Fixed { table, .. }, Format::Table) => table.clone(),
            (Text::Fixed { csv, .. }, _) => csv.clone(),
            (Text::Grid { header, rows }, Format::Csv) => {
                let mut s = String::new();
                for r in std::iter::once(header).chain(rows) {
                    s.push_str(&r.iter().map(|c| csv_cell(c)).collect::<Vec<_>>().join(","));
                    s.push('\n');
                }
                s
            }
            (Text::Grid { header, rows }, _) => grid(header, rows),
        }
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

fn grid(header: &[String], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let s: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = width[0]) } else { format!("{c:>w$}", w = width[i]) })
            .collect();
        s.join("  ") + "\n"
    };
    let mut s = line(header);
    s.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * width.len().saturating_sub(1)));
    s.push('\n');
    for r in rows {
        s.push_str(&line(r));
    }
    s
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => format!("{f:.4}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

/// `key value` rows of a flat struct.
pub fn key_values(v: &impl Serialize) -> Text {
    let rows = match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m.iter().map(|(k, v)| vec![k.clone(), cell(v)]).collect(),
        _ => vec![],
    };
    Text::Grid {
        header: vec!["key".into(), "value".into()],
        rows,
    }
}

/// One row per record, columns in field order.
pub fn records<S: Serialize>(items: &[S]) -> Text {
    let objs: Vec<serde_json::Map<String, Value>> = items
        .iter()
        .filter_map(|i| match serde_json::to_value(i) {
            Ok(Value::Object(m)) => Some(m),
            _ => None,
        })
        .collect();
    let header: Vec<String> = objs.first().map(|m| m.keys().cloned().collect()).unwrap_or_default();
    let rows = objs.iter().map(|m| m.values().map(cell).collect()).collect();
    Text::Grid { header, rows }
}

pub fn network_rows(reports: &[PerfReport]) -> Text {
    Text::Fixed {
        table: format_table(reports),
        csv: format_csv(reports),
    }
}

pub fn layer_rows(r: &PerfReport) -> Text {
    let header = ["layer", "k", "ops", "cycles", "time ms", "GOp/s", "energy uJ", "utilization", "offchip adds"];
    let rows = r
        .layers
        .iter()
        .map(|l| {
            vec![
                l.name.clone(),
                l.kernel.to_string(),
                l.ops.to_string(),
                l.cycles.to_string(),
                format!("{:.3}", l.time * 1e3),
                format!("{:.1}", l.theta / 1e9),
                format!("{:.2}", l.energy * 1e6),
                format!("{:.3}", l.utilization),
                l.offchip_adds.to_string(),
            ]
        })
        .collect();
    Text::Grid {
        header: header.map(String::from).to_vec(),
        rows,
    }
}

#[derive(Serialize)]
struct OutputFile {
    file: String,
    bytes: usize,
}

/// Describes a run; contains no timestamps so identical runs give identical
/// manifests.
#[derive(Serialize)]
pub struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    variant: String,
    config: Option<PathBuf>,
    calibration: Option<PathBuf>,
    args: Value,
    outputs: Vec<OutputFile>,
    status: &'static str,
}

impl Manifest {
    pub fn new(command: &str, variant: &str, config: Option<PathBuf>, calibration: Option<PathBuf>, args: Value) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            variant: variant.into(),
            config,
            calibration,
            args,
            outputs: vec![],
            status: "incomplete",
        }
    }
}

pub struct Sink {
    pub format: Format,
    pub out: Option<PathBuf>,
    manifest: Manifest,
}

impl Sink {
    pub fn new(format: Format, out: Option<PathBuf>, manifest: Manifest) -> std::io::Result<Self> {
        if let Some(d) = &out {
            fs::create_dir_all(d)?;
        }
        Ok(Sink { format, out, manifest })
    }

    /// Prints a report and, with `--out`, stores it as `<name>.<ext>`.
    pub fn emit(&mut self, name: &str, text: &Text, value: &impl Serialize) -> std::io::Result<()> {
        let body = match self.format {
            Format::Json => serde_json::to_string_pretty(value).map_err(std::io::Error::other)? + "\n",
            f => text.render(f),
        };
        print!("{body}");
        self.file(&format!("{name}.{}", self.format.ext()), &body)
    }

    /// Writes an auxiliary file; a no-op without `--out`.
    pub fn file(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        if let Some(d) = &self.out {
            fs::write(d.join(name), body)?;
            self.manifest.outputs.push(OutputFile {
                file: name.into(),
                bytes: body.len(),
            });
        }
        Ok(())
    }

    pub fn finish(mut self, ok: bool) -> std::io::Result<()> {
        if let Some(d) = self.out.take() {
            self.manifest.status = if ok { "ok" } else { "failed" };
            let s = serde_json::to_string_pretty(&self.manifest).map_err(std::io::Error::other)?;
            fs::write(d.join("manifest.json"), s + "\n")?;
        }
        Ok(())
    }
}
