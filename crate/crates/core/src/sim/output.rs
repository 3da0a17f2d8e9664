//! CSV and JSON artifacts of a Monte Carlo run.
//!
//! Every number goes through [`sig9`], so identical runs give identical bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::stats::empirical_cdf;
use super::{AreaLabel, MonteCarloOutput, OutcomeStatus, Result, SimError, Summary, TrialRecord};
use crate::beamforming::Strategy;
use crate::format::sig9;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn trials_header() -> String {
    let mut cols: Vec<String> = [
        "trial_id",
        "ue_x",
        "ue_y",
        "ue_z",
        "tgt_x",
        "tgt_y",
        "tgt_z",
        "area_label",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in Strategy::ALL {
        let id = k.ident();
        for f in [
            "sinr_db", "snr_db", "status", "rank1_u", "rank1_t", "repaired",
        ] {
            cols.push(format!("{id}_{f}"));
        }
    }
    cols.join(",")
}

pub fn write_trials_csv(trials: &[TrialRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{}", trials_header())?;
    for t in trials {
        let mut row = vec![
            t.trial_id.to_string(),
            sig9(t.ue_position.x),
            sig9(t.ue_position.y),
            sig9(t.ue_position.z),
            sig9(t.target_position.x),
            sig9(t.target_position.y),
            sig9(t.target_position.z),
            t.area.as_str().to_string(),
        ];
        for k in Strategy::ALL {
            let o = t.outcome(k);
            row.extend([
                sig9(o.sinr_db()),
                sig9(o.snr_db()),
                o.status.as_str().to_string(),
                sig9(o.rank1_u),
                sig9(o.rank1_t),
                o.repaired.to_string(),
            ]);
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Per-trial sensing SNR and status, as read back from `trials.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialsTable {
    pub rows: Vec<TrialsRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialsRow {
    pub trial_id: usize,
    pub area: AreaLabel,
    /// `(status, snr_db)` per strategy in [`Strategy::ALL`] order.
    pub outcomes: Vec<(OutcomeStatus, f64)>,
}

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "-inf" => Some(f64::NEG_INFINITY),
        "inf" => Some(f64::INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

pub fn read_trials_csv(text: &str) -> Result<TrialsTable> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| SimError::Trials("empty file".into()))?
        .split(',')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| SimError::Trials(format!("missing column {name}")))
    };
    let id_col = col("trial_id")?;
    let area_col = col("area_label")?;
    let mut strategy_cols = Vec::new();
    for k in Strategy::ALL {
        let id = k.ident();
        strategy_cols.push((col(&format!("{id}_status"))?, col(&format!("{id}_snr_db"))?));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(SimError::Trials(format!(
                "line {lineno}: expected {} fields, got {}",
                header.len(),
                f.len()
            )));
        }
        let bad = |what: &str| SimError::Trials(format!("line {lineno}: bad {what}"));
        let trial_id = f[id_col].parse().map_err(|_| bad("trial_id"))?;
        let area = AreaLabel::parse(f[area_col]).ok_or_else(|| bad("area_label"))?;
        let mut outcomes = Vec::new();
        for &(sc, vc) in &strategy_cols {
            let status = OutcomeStatus::parse(f[sc]).ok_or_else(|| bad("status"))?;
            let snr = parse_f64(f[vc]).ok_or_else(|| bad("snr_db"))?;
            outcomes.push((status, snr));
        }
        rows.push(TrialsRow {
            trial_id,
            area,
            outcomes,
        });
    }
    Ok(TrialsTable { rows })
}

/// Empirical CDFs of the feasible sensing SNR per strategy and area.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    pub entries: Vec<(Strategy, AreaLabel, Vec<(f64, f64)>)>,
}

impl CdfTable {
    fn build(values: impl Fn(usize, AreaLabel) -> Vec<f64>) -> Self {
        let mut entries = Vec::new();
        for (ki, k) in Strategy::ALL.into_iter().enumerate() {
            for a in AreaLabel::ALL {
                entries.push((k, a, empirical_cdf(&values(ki, a))));
            }
        }
        Self { entries }
    }

    pub fn from_trials(trials: &[TrialRecord]) -> Self {
        Self::build(|ki, a| {
            trials
                .iter()
                .filter(|t| t.area == a)
                .map(|t| &t.outcomes[ki])
                .filter(|o| o.status.is_feasible())
                .map(|o| o.snr_db())
                .collect()
        })
    }

    pub fn from_table(table: &TrialsTable) -> Self {
        Self::build(|ki, a| {
            table
                .rows
                .iter()
                .filter(|r| r.area == a)
                .map(|r| r.outcomes[ki])
                .filter(|(s, _)| s.is_feasible())
                .map(|(_, v)| v)
                .collect()
        })
    }

    pub fn file_name(k: Strategy, a: AreaLabel) -> String {
        format!("cdf_{}_{}.csv", k.ident(), a.as_str())
    }

    /// Writes one `cdf_<strategy>_<area>.csv` per entry and returns the paths.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::new();
        for (k, a, points) in &self.entries {
            let path = dir.join(Self::file_name(*k, *a));
            let mut buf = Vec::new();
            write_cdf_csv(points, &mut buf).map_err(io_err(&path))?;
            fs::write(&path, buf).map_err(io_err(&path))?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// `snr_db,cdf` rows.
pub fn write_cdf_csv(points: &[(f64, f64)], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "snr_db,cdf")?;
    for (x, p) in points {
        writeln!(w, "{},{}", sig9(*x), sig9(*p))?;
    }
    Ok(())
}

pub fn write_summary_json(summary: &Summary, mut w: impl Write) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut w, summary)?;
    writeln!(w)
}

/// Writes `trials.csv`, the CDF files and `summary.json` into `dir`.
pub fn write_outputs(dir: &Path, out: &MonteCarloOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let trials_path = dir.join("trials.csv");
    let mut buf = Vec::new();
    write_trials_csv(&out.trials, &mut buf).map_err(io_err(&trials_path))?;
    fs::write(&trials_path, buf).map_err(io_err(&trials_path))?;

    let mut paths = vec![trials_path];
    paths.extend(CdfTable::from_trials(&out.trials).write_all(dir)?);

    let summary_path = dir.join("summary.json");
    let mut buf = Vec::new();
    write_summary_json(&out.summary, &mut buf).map_err(io_err(&summary_path))?;
    fs::write(&summary_path, buf).map_err(io_err(&summary_path))?;
    paths.push(summary_path);
    Ok(paths)
}
