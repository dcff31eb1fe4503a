//! Per-cell aggregates across seeds, from a finished run or from result CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::HarnessError;

/// Final numbers of one (cell, seed).
#[derive(Clone, Debug, PartialEq)]
pub struct CellFinal {
    pub env: String,
    pub protocol: String,
    pub xi_or_drift: String,
    pub algorithm: String,
    pub seed: u64,
    pub cum_reward: f64,
    pub cum_regret: f64,
    pub wall_ms_per_episode: f64,
    pub restarts: f64,
    /// Unknown for rows read back from CSV.
    pub oracle_exact: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub env: String,
    pub protocol: String,
    pub xi_or_drift: String,
    pub algorithm: String,
    pub seeds: usize,
    pub final_cum_reward_mean: f64,
    pub final_cum_reward_std: f64,
    pub final_cum_regret_mean: f64,
    pub final_cum_regret_std: f64,
    pub wall_ms_per_episode_mean: f64,
    pub restarts_mean: f64,
    /// `true`, `false`, or `na` when unknown.
    pub oracle_exact: String,
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups by (env, protocol, xi_or_drift, algorithm), sorted by that key.
pub fn aggregate(finals: &[CellFinal]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, String, String), Vec<&CellFinal>> = BTreeMap::new();
    for f in finals {
        let key = (f.env.clone(), f.protocol.clone(), f.xi_or_drift.clone(), f.algorithm.clone());
        groups.entry(key).or_default().push(f);
    }
    groups
        .into_iter()
        .map(|((env, protocol, xi_or_drift, algorithm), fs)| {
            let col = |g: fn(&CellFinal) -> f64| fs.iter().map(|f| g(f)).collect::<Vec<_>>();
            let (rm, rs) = mean_std(&col(|f| f.cum_reward));
            let (gm, gs) = mean_std(&col(|f| f.cum_regret));
            let exact = if fs.iter().all(|f| f.oracle_exact == Some(true)) {
                "true"
            } else if fs.iter().any(|f| f.oracle_exact == Some(false)) {
                "false"
            } else {
                "na"
            };
            SummaryRow {
                env,
                protocol,
                xi_or_drift,
                algorithm,
                seeds: fs.len(),
                final_cum_reward_mean: rm,
                final_cum_reward_std: rs,
                final_cum_regret_mean: gm,
                final_cum_regret_std: gs,
                wall_ms_per_episode_mean: mean_std(&col(|f| f.wall_ms_per_episode)).0,
                restarts_mean: mean_std(&col(|f| f.restarts)).0,
                oracle_exact: exact.into(),
            }
        })
        .collect()
}

/// Reads result CSVs (ours or external ones) down to one final row per seed.
///
/// Required columns: `seed, algorithm, env, protocol, t, cum_reward`. Missing
/// `xi_or_drift` reads as `na`; missing `cum_regret` as NaN; missing
/// `wall_ns` and `restart_count` as 0.
pub fn read_results(path: &Path) -> Result<Vec<CellFinal>, HarnessError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| {
        col(name).ok_or_else(|| HarnessError::Schema(format!("{}: missing column {name:?}", path.display())))
    };
    let (c_seed, c_algo, c_env, c_proto, c_t, c_rew) =
        (need("seed")?, need("algorithm")?, need("env")?, need("protocol")?, need("t")?, need("cum_reward")?);
    let (c_xi, c_reg, c_wall, c_rc) = (col("xi_or_drift"), col("cum_regret"), col("wall_ns"), col("restart_count"));

    struct Acc {
        last_t: usize,
        fin: CellFinal,
        wall_sum: f64,
        rows: usize,
    }
    let mut acc: BTreeMap<(String, String, String, String, u64), Acc> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |c: &str| HarnessError::Schema(format!("{}: row {}: bad {c}", path.display(), line + 2));
        let num = |i: usize, c: &str| rec[i].parse::<f64>().map_err(|_| bad(c));
        let opt = |i: Option<usize>, c: &str, default: f64| i.map_or(Ok(default), |i| num(i, c));
        let seed: u64 = rec[c_seed].parse().map_err(|_| bad("seed"))?;
        let t: usize = rec[c_t].parse().map_err(|_| bad("t"))?;
        let xi = c_xi.map_or("na".to_string(), |i| rec[i].to_string());
        let fin = CellFinal {
            env: rec[c_env].to_string(),
            protocol: rec[c_proto].to_string(),
            xi_or_drift: xi.clone(),
            algorithm: rec[c_algo].to_string(),
            seed,
            cum_reward: num(c_rew, "cum_reward")?,
            cum_regret: opt(c_reg, "cum_regret", f64::NAN)?,
            wall_ms_per_episode: 0.0,
            restarts: opt(c_rc, "restart_count", 0.0)?,
            oracle_exact: None,
        };
        let wall = opt(c_wall, "wall_ns", 0.0)?;
        let key = (fin.env.clone(), fin.protocol.clone(), xi, fin.algorithm.clone(), seed);
        let a = acc.entry(key).or_insert(Acc { last_t: 0, fin: fin.clone(), wall_sum: 0.0, rows: 0 });
        a.wall_sum += wall;
        a.rows += 1;
        if t >= a.last_t {
            a.last_t = t;
            a.fin = fin;
        }
    }
    Ok(acc
        .into_values()
        .map(|a| CellFinal {
            wall_ms_per_episode: a.wall_sum / a.rows as f64 / 1e6,
            ..a.fin
        })
        .collect())
}

/// Summary over several result files, joined by cell key and algorithm name.
pub fn summarize_files(paths: &[impl AsRef<Path>]) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(read_results(p.as_ref())?);
    }
    Ok(aggregate(&all))
}

/// Writes `summary.csv` and `summary.txt` into `dir`.
pub fn write_summary(dir: &Path, rows: &[SummaryRow], failed: &[String]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let csv_path = dir.join("summary.csv");
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&csv_path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(SUMMARY_COLUMNS)?;
    }
    w.flush().map_err(|e| HarnessError::io(&csv_path, e))?;
    let txt_path = dir.join("summary.txt");
    fs::write(&txt_path, render_table(rows, failed)).map_err(|e| HarnessError::io(&txt_path, e))?;
    Ok(())
}

const SUMMARY_COLUMNS: [&str; 12] = [
    "env",
    "protocol",
    "xi_or_drift",
    "algorithm",
    "seeds",
    "final_cum_reward_mean",
    "final_cum_reward_std",
    "final_cum_regret_mean",
    "final_cum_regret_std",
    "wall_ms_per_episode_mean",
    "restarts_mean",
    "oracle_exact",
];

/// Plain-text table, one line per cell, then the failed cells if any.
pub fn render_table(rows: &[SummaryRow], failed: &[String]) -> String {
    let header = [
        "env", "protocol", "xi/drift", "algorithm", "seeds", "cum_reward", "cum_regret", "ms/ep", "restarts", "exact",
    ];
    let body: Vec<[String; 10]> = rows
        .iter()
        .map(|r| {
            [
                r.env.clone(),
                r.protocol.clone(),
                r.xi_or_drift.clone(),
                r.algorithm.clone(),
                r.seeds.to_string(),
                format!("{:.2} ± {:.2}", r.final_cum_reward_mean, r.final_cum_reward_std),
                format!("{:.2} ± {:.2}", r.final_cum_regret_mean, r.final_cum_regret_std),
                format!("{:.4}", r.wall_ms_per_episode_mean),
                format!("{:.2}", r.restarts_mean),
                r.oracle_exact.clone(),
            ]
        })
        .collect();
    let mut width = header.map(|h| h.chars().count());
    for line in &body {
        for (w, cell) in width.iter_mut().zip(line) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut emit = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    emit(&mut header.iter().copied());
    for line in &body {
        emit(&mut line.iter().map(String::as_str));
    }
    if !failed.is_empty() {
        let _ = writeln!(out, "\nfailed cells:");
        for f in failed {
            let _ = writeln!(out, "  {f}");
        }
    }
    out
}
