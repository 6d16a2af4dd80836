//! Simulation settings: defaults, then the config file, then flags.
//!
//! The file is flat `key = value` text in two sections:
//!
//! ```text
//! [simulation]
//! seed = 20240501
//! replicates = 20000
//! oracle_replicates = 1000000
//! alpha = 0.05
//! smoothing = isotonic        # or window:3
//! verify_window = 3
//! mode = fixed_level          # or shift:0.5
//!
//! [grid]
//! ratio = 1.08
//! refine = true
//! ceiling = 100000
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use are_lab_core::power_engine::{LevelMode, SimulationConfig, Smoothing};
use ini::Ini;

pub const DEFAULT_SEED: u64 = 20240501;

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("[{section}] {key}: cannot parse '{value}'"))
}

pub fn parse_smoothing(v: &str) -> Result<Smoothing, String> {
    let v = v.trim();
    if v == "isotonic" {
        return Ok(Smoothing::Isotonic);
    }
    if let Some(w) = v.strip_prefix("window:") {
        let w: usize = w.parse().map_err(|_| format!("bad smoothing window '{w}'"))?;
        return Ok(Smoothing::Window(w));
    }
    Err(format!("smoothing must be 'isotonic' or 'window:<w>', got '{v}'"))
}

pub fn parse_mode(v: &str) -> Result<LevelMode, String> {
    let v = v.trim();
    if v == "fixed_level" {
        return Ok(LevelMode::FixedLevel);
    }
    if let Some(x) = v.strip_prefix("shift:") {
        let x: f64 = x.parse().map_err(|_| format!("bad shift '{x}'"))?;
        return Ok(LevelMode::Shift(x));
    }
    Err(format!("mode must be 'fixed_level' or 'shift:<x>', got '{v}'"))
}

/// Applies a config file on top of `cfg`.
pub fn apply_file(cfg: &mut SimulationConfig, path: &Path) -> Result<(), String> {
    let ini = Ini::load_from_file(path).map_err(|e| format!("config file {}: {e}", path.display()))?;
    for (section, props) in ini.iter() {
        let section = section.unwrap_or("");
        for (key, value) in props.iter() {
            match (section, key) {
                ("simulation", "seed") => cfg.seed = parse(section, key, value)?,
                ("simulation", "replicates") => cfg.replicates = parse(section, key, value)?,
                ("simulation", "oracle_replicates") => cfg.oracle_replicates = parse(section, key, value)?,
                ("simulation", "alpha") => cfg.alpha = parse(section, key, value)?,
                ("simulation", "smoothing") => cfg.power_smoothing = parse_smoothing(value)?,
                ("simulation", "verify_window") => cfg.verify_window = parse(section, key, value)?,
                ("simulation", "mode") => cfg.mode = parse_mode(value)?,
                ("grid", "ratio") => cfg.grid.ratio = parse(section, key, value)?,
                ("grid", "refine") => cfg.grid.refine = parse(section, key, value)?,
                ("grid", "ceiling") => cfg.grid.ceiling = parse(section, key, value)?,
                _ => return Err(format!("config file {}: unknown key [{section}] {key}", path.display())),
            }
        }
    }
    Ok(())
}

/// Canonical text of a resolved configuration, in config-file syntax.
pub fn render(cfg: &SimulationConfig) -> String {
    let smoothing = match cfg.power_smoothing {
        Smoothing::Isotonic => "isotonic".to_string(),
        Smoothing::Window(w) => format!("window:{w}"),
    };
    let mode = match cfg.mode {
        LevelMode::FixedLevel => "fixed_level".to_string(),
        LevelMode::Shift(x) => format!("shift:{x}"),
    };
    let mut s = String::new();
    let _ = writeln!(s, "[simulation]");
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "replicates = {}", cfg.replicates);
    let _ = writeln!(s, "oracle_replicates = {}", cfg.oracle_replicates);
    let _ = writeln!(s, "alpha = {}", cfg.alpha);
    let _ = writeln!(s, "smoothing = {smoothing}");
    let _ = writeln!(s, "verify_window = {}", cfg.verify_window);
    let _ = writeln!(s, "mode = {mode}");
    let _ = writeln!(s, "[grid]");
    let _ = writeln!(s, "ratio = {}", cfg.grid.ratio);
    let _ = writeln!(s, "refine = {}", cfg.grid.refine);
    let _ = writeln!(s, "ceiling = {}", cfg.grid.ceiling);
    s
}
