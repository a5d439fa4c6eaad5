//! Delimited-text ingest and output in the work-order column layout.

use std::path::Path;

use maintbench_core::{MaintenanceLog, Provenance};

use crate::error::{Error, IoContext, Result};

pub const COL_CODE: &str = "Component Code";
pub const COL_NAME: &str = "Component Name";
pub const COL_DESCRIPTION: &str = "Log Description";
pub const COL_OBSERVATIONS: &str = "Additional Observations";
pub const REQUIRED: [&str; 4] = [COL_CODE, COL_NAME, COL_DESCRIPTION, COL_OBSERVATIONS];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ingested {
    pub logs: Vec<MaintenanceLog>,
    /// Rows dropped for an empty description.
    pub dropped_empty: usize,
}

fn data_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Dataset { path: path.to_path_buf(), message: message.into() }
}

pub fn log_id_for_row(row: usize) -> String {
    format!("log-{row:06}")
}

/// Parses CSV text. Rows are numbered from 1 after the header; ids come from
/// the `log_id` column when present, otherwise from the row number.
pub fn parse_logs(text: &str, path: &Path, default_language: &str) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| data_error(path, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().trim_start_matches('\u{feff}') == name);
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot = col(name).ok_or_else(|| data_error(path, format!("missing required column {name:?}")))?;
    }
    let [code, name, desc, obs] = idx;
    let id_col = col("log_id");
    let lang_col = col("language");
    let prov_col = col("provenance");

    let mut logs = Vec::new();
    let mut dropped_empty = 0;
    let mut seen = std::collections::HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| data_error(path, e.to_string()))?;
        let field = |c: usize| record.get(c).unwrap_or("").to_string();
        let description = field(desc);
        if description.trim().is_empty() {
            dropped_empty += 1;
            continue;
        }
        let log_id = id_col.map(field).filter(|s| !s.is_empty()).unwrap_or_else(|| log_id_for_row(i + 1));
        if !seen.insert(log_id.clone()) {
            return Err(data_error(path, format!("duplicate log_id {log_id:?}")));
        }
        let language = lang_col.map(field).filter(|s| !s.is_empty()).unwrap_or_else(|| default_language.to_string());
        let provenance = match prov_col {
            Some(c) => field(c).parse::<Provenance>().map_err(|e| data_error(path, format!("row {}: {e}", i + 1)))?,
            None => Provenance::Original,
        };
        logs.push(MaintenanceLog {
            log_id,
            component_code: field(code),
            component_name: field(name),
            description,
            observations: field(obs),
            language,
            provenance,
        });
    }
    Ok(Ingested { logs, dropped_empty })
}

pub fn read_logs(path: &Path, default_language: &str) -> Result<Ingested> {
    let text = std::fs::read_to_string(path).at(path)?;
    parse_logs(&text, path, default_language)
}

pub fn logs_to_csv(logs: &[MaintenanceLog]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [COL_CODE, COL_NAME, COL_DESCRIPTION, COL_OBSERVATIONS, "log_id", "language", "provenance"];
    w.write_record(header).expect("in-memory write");
    for l in logs {
        w.write_record([
            &l.component_code,
            &l.component_name,
            &l.description,
            &l.observations,
            &l.log_id,
            &l.language,
            l.provenance.as_str(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn write_logs(path: &Path, logs: &[MaintenanceLog]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).at(dir)?;
    }
    std::fs::write(path, logs_to_csv(logs)).at(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &str = "\
Component Code,Component Name,Log Description,Additional Observations
MDA10,Rotor Blades,Inspecting the damage on WTG05,We found that we actually have two damages: new blade damage discovered
MDX10,central hydr. syst,,
MDC10,Blade Pitch System,\"Stops with the error, again\",
";

    #[test]
    fn table_row_ingests() {
        let got = parse_logs(TABLE, Path::new("t.csv"), "en").unwrap();
        assert_eq!(got.dropped_empty, 1);
        assert_eq!(got.logs.len(), 2);
        let l = &got.logs[0];
        assert_eq!(l.log_id, "log-000001");
        assert_eq!(l.component_code, "MDA10");
        assert_eq!(l.description, "Inspecting the damage on WTG05");
        assert_eq!(l.observations, "We found that we actually have two damages: new blade damage discovered");
        assert_eq!(got.logs[1].log_id, "log-000003");
        assert_eq!(got.logs[1].description, "Stops with the error, again");
    }

    #[test]
    fn missing_column_is_named() {
        let text = "Component Name,Log Description,Additional Observations\nx,y,z\n";
        let e = parse_logs(text, Path::new("t.csv"), "en").unwrap_err();
        assert!(e.to_string().contains("Component Code"), "{e}");
    }

    #[test]
    fn written_csv_round_trips() {
        let mut logs = parse_logs(TABLE, Path::new("t.csv"), "pt").unwrap().logs;
        logs[1].provenance = Provenance::Translated;
        let text = logs_to_csv(&logs);
        let back = parse_logs(&text, Path::new("o.csv"), "xx").unwrap();
        assert_eq!(back.logs, logs);
    }
}
