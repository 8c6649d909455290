//! File formats: grid paths as CSV (`time,v1,...,vd`) and configs/reports as JSON.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use super::CliError;
use crate::path::{GridPath, GRID_ALIGN_TOL};

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Strict JSON parse; unknown keys are rejected by the target type.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// CSV with header `time,<columns...>`, one row per node.
pub fn path_to_csv(path: &GridPath, columns: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["time".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for k in 0..path.len() {
        let mut row = vec![path.time(k).to_string()];
        row.extend(path.node(k).iter().map(|v| v.to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Column names `value` for scalar paths and `v1, ..., vd` otherwise.
pub fn default_columns(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["value".into()]
    } else {
        (1..=dim).map(|j| format!("v{j}")).collect()
    }
}

/// Reads a CSV written by [`path_to_csv`]; time stamps must be equally spaced.
pub fn read_path_csv(path: &Path) -> Result<GridPath, CliError> {
    let text = read_text(path)?;
    parse_path_csv(&text).map_err(|msg| CliError::Parse(format!("{}: {msg}", path.display())))
}

pub fn parse_path_csv(text: &str) -> Result<GridPath, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.len() < 2 || &header[0] != "time" {
        return Err("header must be `time,<value columns>`".into());
    }
    let dim = header.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("row {}: `{s}` is not a number", i + 1));
        times.push(parse(&record[0])?);
        for j in 1..=dim {
            values.push(parse(&record[j])?);
        }
    }
    if times.len() < 2 {
        return Err("need at least two rows".into());
    }
    let t0 = times[0];
    let dt = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
    for (k, &t) in times.iter().enumerate() {
        if !(dt > 0.0) || (t - (t0 + k as f64 * dt)).abs() > GRID_ALIGN_TOL * dt {
            return Err(format!("row {}: time {t} breaks the uniform spacing {dt}", k + 1));
        }
    }
    GridPath::new(t0, dt, dim, values).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let p = GridPath::from_fn(-0.5, 0.125, 13, |t| (3.0 * t).sin()).unwrap();
        let text = path_to_csv(&p, &default_columns(1));
        assert!(text.starts_with("time,value\n-0.5,"));
        let back = parse_path_csv(&text).unwrap();
        assert_eq!(back.values(), p.values());
        assert_eq!(back.t0(), p.t0());
        assert!((back.dt() - p.dt()).abs() < 1e-15);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(parse_path_csv("t,value\n0,1\n1,2\n").is_err());
        assert!(parse_path_csv("time,value\n0,1\n1,x\n").is_err());
        assert!(parse_path_csv("time,value\n0,1\n1,2\n3,4\n").is_err());
        assert!(parse_path_csv("time,value\n0,1\n").is_err());
    }
}
