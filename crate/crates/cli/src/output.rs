//! File writers. Tables are CSV with `#` provenance lines on top; reports
//! and aggregates are JSON; transcripts are JSON Lines.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use cvqkd_core::SessionTranscript;
use serde::Serialize;
use serde_json::json;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub spec_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(spec_hash: &str, seed: u64) -> Self {
        Self {
            tool: "cvqkd",
            version: VERSION,
            spec_hash: spec_hash.to_string(),
            seed,
        }
    }

    fn csv_header(&self) -> String {
        format!(
            "# {} {}\n# spec_hash: {}\n# seed: {}\n",
            self.tool, self.version, self.spec_hash, self.seed
        )
    }
}

/// Writes a CSV table: provenance, extra `#` notes, the column header, rows.
pub fn write_csv(
    path: &Path,
    provenance: &Provenance,
    notes: &[String],
    columns: &[&str],
    rows: &[Vec<f64>],
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(provenance.csv_header().as_bytes())?;
    for note in notes {
        writeln!(w, "# {note}")?;
    }
    writeln!(w, "{}", columns.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

/// Writes `{"provenance": ..., <body fields>}` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, provenance: &Provenance, body: &T) -> io::Result<()> {
    let mut value = serde_json::to_value(body).map_err(io::Error::other)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| io::Error::other("report body must serialize to an object"))?;
    obj.insert(
        "provenance".into(),
        serde_json::to_value(provenance).map_err(io::Error::other)?,
    );
    let mut text = serde_json::to_string_pretty(&value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Transcript as JSON Lines: a header record, one record per pulse, then the
/// route disclosure.
pub fn write_transcript(
    path: &Path,
    provenance: &Provenance,
    t: &SessionTranscript,
) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = json!({
        "record": "header",
        "provenance": provenance,
        "config": t.config,
        "attack": t.attack,
        "resolved_attack": t.resolved_attack,
    });
    writeln!(w, "{header}")?;
    for p in &t.pulses {
        let mut v = serde_json::to_value(p).map_err(io::Error::other)?;
        v.as_object_mut()
            .expect("pulse record is an object")
            .insert("record".into(), "pulse".into());
        writeln!(w, "{v}")?;
    }
    writeln!(
        w,
        "{}",
        json!({ "record": "disclosure", "routes": t.disclosure })
    )?;
    w.flush()
}
