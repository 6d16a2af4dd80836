//! CSV, Markdown and manifest emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Six significant digits: fixed notation for magnitudes in [1e-4, 1e6),
/// scientific otherwise.
pub fn fmt6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        // rounding may carry into a new decade (9.999996 -> 10.0000)
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let digits = s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len();
        if digits > 6 && decimals > 0 {
            let decimals = decimals - 1;
            return format!("{x:.decimals$}");
        }
        s
    } else {
        format!("{x:.5e}")
    }
}

/// Rows of string cells with a fixed header.
pub struct Csv {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: Vec<&'static str>) -> Self {
        Csv { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// GitHub-style Markdown table.
pub fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", header.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(header.len()));
    for row in rows {
        let _ = writeln!(s, "| {} |", row.join(" | "));
    }
    s
}

/// Reproducibility record written next to every CSV.
pub struct RunManifest {
    pub command_line: String,
    pub config_hash: u64,
    pub seed: u64,
    pub versions: String,
    pub wall_time: f64,
    pub outputs: Vec<PathBuf>,
}

/// First 8 bytes of SHA-256 of `text`, big endian.
pub fn config_hash(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command_line = {}", self.command_line);
        let _ = writeln!(s, "config_hash = {:016x}", self.config_hash);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "versions = {}", self.versions);
        let _ = writeln!(s, "wall_time_seconds = {:.3}", self.wall_time);
        let names: Vec<String> = self.outputs.iter().map(|p| p.display().to_string()).collect();
        let _ = writeln!(s, "outputs = {}", names.join(","));
        s
    }
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, bytes)?;
    Ok(path)
}

/// Shell-style quoting for the recorded command line.
pub fn quote_args(args: &[String]) -> String {
    args.iter()
        .map(|a| {
            if !a.is_empty() && a.chars().all(|c| c.is_ascii_alphanumeric() || "-_.,:/=+".contains(c)) {
                a.clone()
            } else {
                format!("'{}'", a.replace('\'', "'\\''"))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt6(5.786_994), "5.78699");
        assert_eq!(fmt6(0.207_846_1), "0.207846");
        assert_eq!(fmt6(123_456.7), "123457");
        assert_eq!(fmt6(-0.001_234_567), "-0.00123457");
        assert_eq!(fmt6(1.234_567e-8), "1.23457e-8");
        assert_eq!(fmt6(9.999_999), "10.0000");
        assert_eq!(fmt6(0.0), "0");
        assert_eq!(fmt6(2.5e7), "2.50000e7");
    }

    #[test]
    fn csv_quotes_fields() {
        let mut c = Csv::new(vec!["a", "b"]);
        c.push(vec!["x,y".into(), "plain".into()]);
        assert_eq!(String::from_utf8(c.to_bytes()).unwrap(), "a,b\n\"x,y\",plain\n");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), 0xba78_16bf_8f01_cfea);
        assert_ne!(config_hash("abc"), config_hash("abd"));
    }

    #[test]
    fn quoting() {
        assert_eq!(quote_args(&["table".into(), "--cells".into(), "148 153".into()]), "table --cells '148 153'");
    }
}
