//! Run outputs: CSV tables with a seed comment line and a JSON run manifest.
//!
//! Numbers are printed with 17 significant digits in scientific notation so
//! that re-ingesting a CSV reproduces every f64 bit-exactly.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// 17-significant-digit scientific notation; round-trips f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_bool(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

/// Renders a CSV body: `# seed = …` comment, header row, then data rows.
pub fn render_csv(seed: u64, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# seed = {seed}\n"));
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// A parsed CSV: the seed comment, the header, and raw cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csv {
    pub seed: Option<u64>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Parses the CSV dialect written by [`render_csv`]. Total: never panics,
/// returns a message for malformed input.
pub fn parse_csv(text: &str) -> Result<Csv, String> {
    let mut seed = None;
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(value) = comment.strip_prefix("seed =") {
                seed = Some(
                    value
                        .trim()
                        .parse::<u64>()
                        .map_err(|e| format!("line {}: bad seed: {e}", lineno + 1))?,
                );
            }
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        match &header {
            None => header = Some(cells),
            Some(h) => {
                if cells.len() != h.len() {
                    return Err(format!(
                        "line {}: expected {} cells, got {}",
                        lineno + 1,
                        h.len(),
                        cells.len()
                    ));
                }
                rows.push(cells);
            }
        }
    }
    Ok(Csv {
        seed,
        header: header.ok_or("missing header row")?,
        rows,
    })
}

/// Run record written next to the CSVs.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    /// Verbatim echo of the config file the run was started with.
    pub config: String,
}

pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trips_exactly() {
        for &x in &[
            0.0,
            1.0,
            -1.0,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.02e23,
            -3.33e-17,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            vec![fmt_f64(0.1), "n0".to_string(), fmt_f64(1.0 / 7.0)],
            vec![fmt_f64(0.2), "n0".to_string(), fmt_f64(2.0 / 7.0)],
        ];
        let text = render_csv(99, &["t", "observable", "mean"], &rows);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.seed, Some(99));
        assert_eq!(parsed.header, vec!["t", "observable", "mean"]);
        assert_eq!(parsed.rows, rows);
        // Re-render reproduces the bytes.
        let header: Vec<&str> = parsed.header.iter().map(String::as_str).collect();
        assert_eq!(render_csv(99, &header, &parsed.rows), text);
    }

    #[test]
    fn csv_parser_is_total() {
        for text in ["", "#", "# seed = x", "a,b\n1\n", "a,b\n1,2,3\n", ",,,\n,\n"] {
            let _ = parse_csv(text);
        }
        assert!(parse_csv("").is_err(), "missing header");
        assert!(parse_csv("a,b\n1,2\n").is_ok());
        assert!(parse_csv("a,b\n1\n").is_err(), "ragged row");
    }
}
