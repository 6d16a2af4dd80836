//! Command implementations.

use std::time::Instant;

use are_lab_core::alt_model::{DensitySpec, LocalAlternative};
use are_lab_core::ks_null::moddev_rate_ks;
use are_lab_core::power_engine::{
    efficiency_ratio_empirical, np_null_quantile, power_ks, power_np, SimulationConfig,
};
use are_lab_core::quad_moments::{kappa_for, log_moments, shift_b, MOMENT_TOL};
use are_lab_core::theory::{efficiency_power_family, np_moddev_estimate};
use are_lab_core::Error;

use crate::config::{self, DEFAULT_SEED};
use crate::layouts::{self, RATIO_POWERS, RATIO_TABLE};
use crate::output::{config_hash, fmt6, markdown_table, quote_args, write_file, Csv, RunManifest};
use crate::{exit_code, Cli, Command, Family, TestKind, XRule, EXIT_EXHAUSTED, EXIT_NUMERIC, EXIT_USAGE};

/// Smallest replicate budget the engine accepts.
const MIN_REPLICATES: usize = 1000;

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: exit_code(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_NUMERIC, message: format!("writing output: {e}") }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// What a command produced, before it is written out.
struct Product {
    stem: String,
    csv: Csv,
    markdown: Option<String>,
    /// Worst per-cell status; 0 when every cell succeeded or was skipped.
    code: u8,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn resolve_config(cli: &Cli) -> Outcome<SimulationConfig> {
    let mut cfg = SimulationConfig::new(DEFAULT_SEED);
    if let Some(path) = &cli.config {
        config::apply_file(&mut cfg, path).map_err(Failure::usage)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = cli.replicates {
        cfg.replicates = r;
    }
    if let Some(a) = cli.alpha {
        cfg.alpha = a;
    }
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(cfg)
}

fn progress(cli: &Cli, msg: &str) {
    if !cli.quiet {
        eprintln!("{msg}");
    }
}

pub fn run(cli: &Cli, args: &[String]) -> Outcome<u8> {
    let start = Instant::now();
    let mut cfg = resolve_config(cli)?;
    let product = match &cli.command {
        Command::Moments { family, r, theta, n, normalized } => moments(*family, r, theta, n, *normalized)?,
        Command::Efficiency { r } => efficiency(r),
        Command::Table { id, scale, cells, r, theta, power, max_n } => {
            let scaled = ((cfg.replicates as f64) * scale).round() as usize;
            if scaled < MIN_REPLICATES {
                progress(cli, &format!("warning: --scale gives {scaled} replicates; using {MIN_REPLICATES}"));
            }
            cfg.replicates = scaled.max(MIN_REPLICATES);
            let cells: Vec<usize> = cells.iter().flatten().copied().collect();
            if *id == 5 {
                ratio_table(cli, &cfg, *r, *theta, power, *max_n)?
            } else {
                if r.is_some() || !power.is_empty() {
                    return Err(Failure::usage("--r and --power apply to table 5 only"));
                }
                power_table(cli, &cfg, *id, &cells, *theta, *max_n)?
            }
        }
        Command::Moddev { test, n, x_rule, r, theta, normalized } => {
            moddev(&cfg, *test, n, *x_rule, *r, *theta, *normalized)?
        }
    };
    emit(cli, &cfg, args, product, start)
}

fn emit(cli: &Cli, cfg: &SimulationConfig, args: &[String], p: Product, start: Instant) -> Outcome<u8> {
    let bytes = p.csv.to_bytes();
    let mut outputs = vec![write_file(&cli.out, &format!("{}.csv", p.stem), &bytes)?];
    if let Some(md) = &p.markdown {
        outputs.push(write_file(&cli.out, &format!("{}.md", p.stem), md.as_bytes())?);
    }
    // Everything that determines the numbers: resolved settings plus the
    // command with its arguments. Thread count and paths are excluded.
    let canonical = format!("{}[command]\n{:?}\n", config::render(cfg), cli.command);
    let manifest = RunManifest {
        command_line: quote_args(args),
        config_hash: config_hash(&canonical),
        seed: cfg.seed,
        versions: format!("are-lab {}", env!("CARGO_PKG_VERSION")),
        wall_time: start.elapsed().as_secs_f64(),
        outputs,
    };
    write_file(&cli.out, &format!("{}.manifest", p.stem), manifest.render().as_bytes())?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(p.code)
}

fn alternative(r: f64, theta: f64, normalized: bool) -> Outcome<LocalAlternative> {
    let spec = DensitySpec::power_tail(r)?;
    Ok(if normalized { LocalAlternative::normalized(spec, theta)? } else { LocalAlternative::new(spec, theta)? })
}

fn moments(_family: Family, rs: &[f64], thetas: &[f64], ns: &[usize], normalized: bool) -> Outcome<Product> {
    let mut csv = Csv::new(vec!["r", "theta", "n", "e0", "var0", "e1", "var1", "b_n", "kappa"]);
    for &r in rs {
        for &theta in thetas {
            let alt = alternative(r, theta, normalized)?;
            let m = log_moments(&alt, MOMENT_TOL)?;
            let kappa = kappa_for(&alt).map(fmt6).unwrap_or_default();
            for &n in ns {
                csv.push(vec![
                    fmt6(r),
                    fmt6(theta),
                    n.to_string(),
                    fmt6(m.e0),
                    fmt6(m.var0),
                    fmt6(m.e1),
                    fmt6(m.var1),
                    fmt6(shift_b(&m, n)?),
                    kappa.clone(),
                ]);
            }
        }
    }
    Ok(Product { stem: "moments".into(), csv, markdown: None, code: 0 })
}

fn efficiency(rs: &[f64]) -> Product {
    let mut csv = Csv::new(vec!["r", "efficiency"]);
    for &r in rs {
        let value = match efficiency_power_family(r) {
            Ok(e) => fmt6(e),
            Err(_) => "infinite (r >= 1/2, ratio diverges)".to_string(),
        };
        csv.push(vec![fmt6(r), value]);
    }
    Product { stem: "efficiency".into(), csv, markdown: None, code: 0 }
}

/// Status text and exit code for a failed cell.
fn cell_failure(cli: &Cli, what: &str, e: &Error) -> (String, u8) {
    match e {
        Error::Capability(_) => {
            progress(cli, &format!("warning: {what} skipped: {e}"));
            ("skipped".into(), 0)
        }
        Error::SearchExhausted { .. } => {
            progress(cli, &format!("warning: {what}: {e}"));
            ("exhausted".into(), EXIT_EXHAUSTED)
        }
        _ => {
            progress(cli, &format!("error: {what}: {e}"));
            ("failed".into(), exit_code(e).max(EXIT_NUMERIC))
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.0}", 100.0 * x)
}

fn power_table(
    cli: &Cli,
    cfg: &SimulationConfig,
    id: u8,
    cells: &[usize],
    theta: Option<f64>,
    max_n: Option<usize>,
) -> Outcome<Product> {
    let table = layouts::power_table(id).ok_or_else(|| Failure::usage(format!("no power table {id}")))?;
    let blocks: Vec<_> = table
        .blocks
        .iter()
        .filter(|b| theta.is_none_or(|t| same(t, b.theta)))
        .filter(|b| cells.is_empty() || b.rows.iter().any(|row| cells.contains(&row.0)))
        .collect();
    if blocks.is_empty() && theta.is_some_and(|t| !table.blocks.iter().any(|b| same(t, b.theta))) {
        let known: Vec<String> = table.blocks.iter().map(|b| b.theta.to_string()).collect();
        return Err(Failure::usage(format!("table {id} has theta in {{{}}}", known.join(", "))));
    }
    let mut csv = Csv::new(vec![
        "table",
        "r",
        "theta",
        "n",
        "ks_power",
        "ks_stderr",
        "np_power",
        "np_stderr",
        "ks_critical",
        "np_critical",
        "replicates",
        "reference_ks_pct",
        "reference_np_pct",
        "status",
    ]);
    let mut code = 0;
    // Markdown mirrors the published layout: one (n, KS, NP) triple per theta.
    let depth = blocks.iter().map(|b| b.rows.len()).max().unwrap_or(0);
    let mut md_rows = vec![vec![String::new(); 3 * blocks.len()]; depth];
    let mut any = false;
    for (bi, block) in blocks.iter().enumerate() {
        let alt = LocalAlternative::power_tail(table.r, block.theta)?;
        for (ri, &(n, ref_ks, ref_np)) in block.rows.iter().enumerate() {
            if !cells.is_empty() && !cells.contains(&n) {
                continue;
            }
            any = true;
            let what = format!("table {id} r={} theta={} n={n}", table.r, block.theta);
            let cell = if max_n.is_some_and(|m| n > m) {
                progress(cli, &format!("warning: {what} skipped: n exceeds --max-n"));
                Err(("skipped".to_string(), 0))
            } else {
                progress(cli, &format!("{what} ..."));
                let run = || -> Result<_, Error> {
                    let q = np_null_quantile(&alt, n, cfg.alpha, cfg)?;
                    Ok((power_ks(&alt, n, cfg.alpha, cfg)?, power_np(&alt, n, q, cfg)?))
                };
                run().map_err(|e| cell_failure(cli, &what, &e))
            };
            md_rows[ri][3 * bi] = n.to_string();
            let mut row = vec![id.to_string(), fmt6(table.r), fmt6(block.theta), n.to_string()];
            match cell {
                Ok((ks, np)) => {
                    md_rows[ri][3 * bi + 1] = pct(ks.power);
                    md_rows[ri][3 * bi + 2] = pct(np.power);
                    row.extend([
                        fmt6(ks.power),
                        fmt6(ks.stderr),
                        fmt6(np.power),
                        fmt6(np.stderr),
                        fmt6(ks.critical_value),
                        fmt6(np.critical_value),
                        cfg.replicates.to_string(),
                    ]);
                    row.extend([ref_ks.to_string(), ref_np.to_string(), "ok".into()]);
                }
                Err((status, c)) => {
                    code = code.max(c);
                    md_rows[ri][3 * bi + 1] = status.clone();
                    md_rows[ri][3 * bi + 2] = status.clone();
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row.extend([ref_ks.to_string(), ref_np.to_string(), status]);
                }
            }
            csv.push(row);
        }
    }
    if !any {
        return Err(Failure::usage("--cells matches no sample size in the selected columns"));
    }
    md_rows.retain(|r| r.iter().any(|c| !c.is_empty()));
    let mut header = Vec::new();
    for b in &blocks {
        header.extend([format!("n (theta={})", b.theta), "KS %".into(), "NP %".into()]);
    }
    let markdown = format!(
        "Empirical powers (%), r = {}, alpha = {}, {} replicates\n\n{}",
        table.r,
        cfg.alpha,
        cfg.replicates,
        markdown_table(&header, &md_rows)
    );
    Ok(Product { stem: format!("table{id}"), csv, markdown: Some(markdown), code })
}

fn ratio_table(
    cli: &Cli,
    cfg: &SimulationConfig,
    r: Option<f64>,
    theta: Option<f64>,
    powers: &[u32],
    max_n: Option<usize>,
) -> Outcome<Product> {
    if let Some(p) = powers.iter().find(|p| !RATIO_POWERS.contains(p)) {
        return Err(Failure::usage(format!("power {p}% is not a column; use one of {RATIO_POWERS:?}")));
    }
    let rows: Vec<_> = RATIO_TABLE
        .iter()
        .filter(|row| r.is_none_or(|r| same(r, row.r)) && theta.is_none_or(|t| same(t, row.theta)))
        .collect();
    if rows.is_empty() {
        return Err(Failure::usage("no ratio-table row matches --r/--theta"));
    }
    let mut csv = Csv::new(vec![
        "table",
        "r",
        "theta",
        "power_pct",
        "n_np",
        "np_power",
        "np_stderr",
        "n_ks",
        "ks_power",
        "ks_stderr",
        "ratio",
        "reference_ratio",
        "window_verified",
        "replicates",
        "status",
    ]);
    let mut code = 0;
    let mut md_rows = Vec::new();
    let columns: Vec<usize> =
        (0..RATIO_POWERS.len()).filter(|&k| powers.is_empty() || powers.contains(&RATIO_POWERS[k])).collect();
    for row in rows {
        let alt = LocalAlternative::power_tail(row.r, row.theta)?;
        let mut md = vec![row.r.to_string(), row.theta.to_string()];
        for &k in &columns {
            let Some(reference) = row.ratios[k] else {
                md.push(String::new());
                continue;
            };
            let level = RATIO_POWERS[k];
            let n_np = layouts::np_sample_size(row.r, row.theta, level).expect("layout covers every ratio entry");
            let what = format!("table 5 r={} theta={} power={level}%", row.r, row.theta);
            let mut cell_cfg = *cfg;
            if let Some(m) = max_n {
                cell_cfg.grid.ceiling = cell_cfg.grid.ceiling.min(m);
            }
            let mut out = vec![
                "5".to_string(),
                fmt6(row.r),
                fmt6(row.theta),
                level.to_string(),
                n_np.to_string(),
            ];
            let result = if max_n.is_some_and(|m| n_np > m) {
                progress(cli, &format!("warning: {what} skipped: n exceeds --max-n"));
                Err(("skipped".to_string(), 0))
            } else {
                progress(cli, &format!("{what} ..."));
                efficiency_ratio_empirical(&alt, n_np, cfg.alpha, &cell_cfg).map_err(|e| match e {
                    Error::SearchExhausted { .. } if max_n.is_some() => {
                        progress(cli, &format!("warning: {what} skipped: KS size exceeds --max-n"));
                        ("skipped".to_string(), 0)
                    }
                    e => cell_failure(cli, &what, &e),
                })
            };
            match result {
                Ok(res) => {
                    let np = res.np_power.expect("ratio runs carry the NP estimate");
                    out.extend([
                        fmt6(np.power),
                        fmt6(np.stderr),
                        res.n_ks.to_string(),
                        fmt6(res.ks_power.power),
                        fmt6(res.ks_power.stderr),
                        fmt6(res.ratio),
                        fmt6(reference),
                        res.diagnostics.window_verified.to_string(),
                        cfg.replicates.to_string(),
                        "ok".into(),
                    ]);
                    md.push(format!("{:.1}", res.ratio));
                }
                Err((status, c)) => {
                    code = code.max(c);
                    out.extend(std::iter::repeat_n(String::new(), 5));
                    out.extend([fmt6(reference), String::new(), cfg.replicates.to_string(), status.clone()]);
                    md.push(status);
                }
            }
            csv.push(out);
        }
        md_rows.push(md);
    }
    let mut header = vec!["r".to_string(), "theta".to_string()];
    header.extend(columns.iter().map(|&k| format!("{}%", RATIO_POWERS[k])));
    let markdown = format!(
        "Ratios N/n of KS to NP sample sizes, alpha = {}, {} replicates\n\n{}",
        cfg.alpha,
        cfg.replicates,
        markdown_table(&header, &md_rows)
    );
    Ok(Product { stem: "table5".into(), csv, markdown: Some(markdown), code })
}

fn moddev(
    cfg: &SimulationConfig,
    test: TestKind,
    ns: &[usize],
    rule: Option<XRule>,
    r: Option<f64>,
    theta: Option<f64>,
    normalized: bool,
) -> Outcome<Product> {
    match test {
        TestKind::Ks => {
            if r.is_some() || theta.is_some() || normalized {
                return Err(Failure::usage("--r, --theta and --normalized apply to --test np only"));
            }
            let rule = rule.unwrap_or(XRule::Power(-0.25));
            let mut csv = Csv::new(vec!["n", "x", "rate"]);
            for &n in ns {
                let x = match rule {
                    XRule::Power(e) => (n as f64).powf(e),
                    XRule::Const(x) => x,
                    XRule::Sigma(_) => return Err(Failure::usage("sigma:<c> needs --test np")),
                };
                csv.push(vec![n.to_string(), fmt6(x), fmt6(moddev_rate_ks(n, x)?)]);
            }
            Ok(Product { stem: "moddev_ks".into(), csv, markdown: None, code: 0 })
        }
        TestKind::Np => {
            let (Some(r), Some(theta)) = (r, theta) else {
                return Err(Failure::usage("--test np needs --r and --theta"));
            };
            let alt = alternative(r, theta, normalized)?;
            let sigma0 = log_moments(&alt, MOMENT_TOL)?.sigma0();
            let rule = rule.unwrap_or(XRule::Sigma(1.0));
            let mut csv = Csv::new(vec!["n", "x", "rate", "log_probability", "relative_stderr", "tilted"]);
            for &n in ns {
                let x = match rule {
                    XRule::Power(e) => (n as f64).powf(e),
                    XRule::Const(x) => x,
                    XRule::Sigma(c) => c * sigma0,
                };
                let est = np_moddev_estimate(&alt, n, x, cfg)?;
                csv.push(vec![
                    n.to_string(),
                    fmt6(x),
                    fmt6(est.rate),
                    fmt6(est.tail.log_probability),
                    fmt6(est.tail.relative_stderr),
                    est.tail.tilted.to_string(),
                ]);
            }
            Ok(Product { stem: "moddev_np".into(), csv, markdown: None, code: 0 })
        }
    }
}
