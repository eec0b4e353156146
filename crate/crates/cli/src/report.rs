use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ecoforecast::evaluation::{RunReport, Setting};
use ecoforecast::models::ModelKind;

use crate::run::ResultsBundle;
use crate::{io_err, CliError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportFiles {
    pub centralized_table: Option<PathBuf>,
    pub federated_table: Option<PathBuf>,
    pub sweep: PathBuf,
    pub scatter: PathBuf,
    pub notices: Vec<String>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

fn fmt_num(v: Option<f64>) -> String {
    match v {
        Some(x) if x.abs() >= 1e-3 || x == 0.0 => format!("{x:.4}"),
        Some(x) => format!("{x:.3e}"),
        None => "n/a".into(),
    }
}

/// Seed-averaged (NRMSE, Wh, S) per (model, T).
type Cells = BTreeMap<(ModelKind, Option<usize>), [Option<f64>; 3]>;

fn aggregate(runs: &[&RunReport]) -> Cells {
    let mut groups: BTreeMap<(ModelKind, Option<usize>), Vec<&RunReport>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.model, r.timesteps)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| {
            let nrmse = mean(rs.iter().filter_map(|r| r.nrmse));
            let wh = mean(rs.iter().map(|r| r.energy_wh));
            let s = mean(rs.iter().filter_map(|r| r.s));
            (k, [nrmse, wh, s])
        })
        .collect()
}

/// Markdown table: one row per model, NRMSE / Wh / S per timestep column.
/// The minimum of every column is bold.
fn table(setting: Setting, runs: &[&RunReport]) -> String {
    let cells = aggregate(runs);
    let mut ts: Vec<usize> = runs.iter().filter_map(|r| r.timesteps).collect::<BTreeSet<_>>().into_iter().collect();
    if ts.is_empty() {
        ts.push(0);
    }
    let label = |t: usize| if t == 0 { String::new() } else { format!(" (T={t})") };
    let models: BTreeSet<ModelKind> = runs.iter().map(|r| r.model).collect();
    let metric_names = ["NRMSE", "Consumption (Wh)", "S"];

    // columns: metric-major, then timestep
    let value = |m: ModelKind, metric: usize, t: usize| -> Option<f64> {
        let key = if m.is_spiking() { (m, Some(t)) } else { (m, None) };
        cells.get(&key).and_then(|v| v[metric])
    };
    let mut best = vec![f64::INFINITY; metric_names.len() * ts.len()];
    for &m in &models {
        for metric in 0..metric_names.len() {
            for (ti, &t) in ts.iter().enumerate() {
                if let Some(v) = value(m, metric, t) {
                    let b = &mut best[metric * ts.len() + ti];
                    *b = b.min(v);
                }
            }
        }
    }
    let title = match setting {
        Setting::Centralized => "Centralized results",
        Setting::Federated => "Federated results",
    };
    let mut out = format!("# {title}\n\n| Model |");
    for name in metric_names {
        for &t in &ts {
            let _ = write!(out, " {name}{} |", label(t));
        }
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(metric_names.len() * ts.len()));
    out.push('\n');
    for &m in &models {
        let _ = write!(out, "| {m} |");
        for metric in 0..metric_names.len() {
            for (ti, &t) in ts.iter().enumerate() {
                let v = value(m, metric, t);
                let text = fmt_num(v);
                if v == Some(best[metric * ts.len() + ti]) {
                    let _ = write!(out, " **{text}** |");
                } else {
                    let _ = write!(out, " {text} |");
                }
            }
        }
        out.push('\n');
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

/// `setting,model,T,test_loss,seeds`: seed-averaged normalized test MSE per
/// spiking model and timestep count.
pub fn write_sweep(bundle: &ResultsBundle, path: &Path) -> Result<()> {
    let mut groups: BTreeMap<(Setting, ModelKind, usize), Vec<f64>> = BTreeMap::new();
    for r in &bundle.runs {
        if let Some(t) = r.timesteps {
            groups.entry((r.setting, r.model, t)).or_default().push(r.test_loss);
        }
    }
    let mut out = String::from("setting,model,T,test_loss,seeds\n");
    for ((setting, model, t), losses) in groups {
        let m = mean(losses.iter().copied()).unwrap_or(f64::NAN);
        let _ = writeln!(out, "{setting},{model},{t},{m:e},{}", losses.len());
    }
    write(path, &out)
}

fn write_scatter(bundle: &ResultsBundle, path: &Path) -> Result<()> {
    let mut out = String::from("setting,model,T,seed,energy_wh,nrmse,S\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
    for r in &bundle.runs {
        let t = r.timesteps.map_or(String::new(), |t| t.to_string());
        let _ = writeln!(
            out,
            "{},{},{t},{},{:e},{},{}",
            r.setting,
            r.model,
            r.seed,
            r.energy_wh,
            opt(r.nrmse),
            opt(r.s)
        );
    }
    write(path, &out)
}

/// Write the result tables and plot-data files into `dir`.
pub fn cmd_report(bundle: &ResultsBundle, dir: &Path) -> Result<ReportFiles> {
    if bundle.runs.is_empty() {
        return Err(CliError::Contract("bundle has no successful runs".into()));
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = ReportFiles {
        sweep: dir.join("timestep_sweep.csv"),
        scatter: dir.join("energy_vs_nrmse.csv"),
        ..Default::default()
    };
    for setting in [Setting::Centralized, Setting::Federated] {
        let runs: Vec<&RunReport> = bundle.runs.iter().filter(|r| r.setting == setting).collect();
        if runs.is_empty() {
            files.notices.push(format!("no {setting} runs in bundle; {setting} table omitted"));
            continue;
        }
        let path = dir.join(format!("{setting}_table.md"));
        write(&path, &table(setting, &runs))?;
        match setting {
            Setting::Centralized => files.centralized_table = Some(path),
            Setting::Federated => files.federated_table = Some(path),
        }
    }
    write_sweep(bundle, &files.sweep)?;
    write_scatter(bundle, &files.scatter)?;
    Ok(files)
}
