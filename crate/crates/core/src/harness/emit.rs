use std::fs;
use std::path::{Path, PathBuf};

use super::{CurvePoint, ExperimentRecord, SweepOutput};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 13] = [
    "config_hash",
    "env_kind",
    "N",
    "agent",
    "K",
    "beta",
    "lambda_reg",
    "eps0",
    "seed",
    "time_to_learn",
    "learned",
    "final_trailing_regret",
    "wallclock_s",
];

pub const CURVE_HEADER: [&str; 3] = ["episode", "return", "regret"];

fn na<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Write a header row and string rows as CSV.
pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|s| s.as_ref()))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn results_row(r: &ExperimentRecord) -> Vec<String> {
    vec![
        r.config_hash.clone(),
        r.env_kind.clone(),
        na(r.n),
        r.agent.clone(),
        na(r.k),
        na(r.beta),
        na(r.lambda_reg),
        na(r.eps0),
        r.seed.to_string(),
        na(r.time_to_learn),
        if r.error.is_some() {
            "NA".into()
        } else {
            r.learned().to_string()
        },
        na(r.final_trailing_regret),
        na(r.wallclock_s),
    ]
}

/// Every episode for small problems, every tenth (plus the last) beyond 30.
fn decimated(r: &ExperimentRecord) -> Vec<&CurvePoint> {
    let stride = if r.n.is_some_and(|n| n > 30) { 10 } else { 1 };
    let last = r.curve.len();
    r.curve
        .iter()
        .filter(|p| p.episode % stride == 0 || p.episode == last)
        .collect()
}

pub fn curve_path(out: &Path, r: &ExperimentRecord) -> PathBuf {
    out.join("curves")
        .join(format!("{}_{}.csv", r.config_hash, r.seed))
}

/// Write `results.csv`, `summary.csv`, `scaling.csv`, `errors.csv` and one
/// curve file per successful cell under `out`.
pub fn emit(out: &Path, output: &SweepOutput) -> Result<()> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    let curves = out.join("curves");
    fs::create_dir_all(&curves).map_err(io_err(&curves))?;
    let rows: Vec<Vec<String>> = output.records.iter().map(results_row).collect();
    write_csv(&out.join("results.csv"), &RESULTS_HEADER, &rows)?;
    for r in output.records.iter().filter(|r| r.error.is_none()) {
        let rows: Vec<Vec<String>> = decimated(r)
            .into_iter()
            .map(|p| {
                vec![
                    p.episode.to_string(),
                    p.episode_return.to_string(),
                    na(p.regret),
                ]
            })
            .collect();
        write_csv(&curve_path(out, r), &CURVE_HEADER, &rows)?;
    }
    let summary: Vec<Vec<String>> = output
        .summary
        .iter()
        .map(|s| {
            vec![
                s.config_hash.clone(),
                s.env_kind.clone(),
                na(s.n),
                s.agent.clone(),
                na(s.k),
                na(s.beta),
                na(s.lambda_reg),
                na(s.eps0),
                s.seeds.to_string(),
                s.solved.to_string(),
                s.errors.to_string(),
                na(s.median_time_to_learn),
            ]
        })
        .collect();
    write_csv(
        &out.join("summary.csv"),
        &[
            "config_hash",
            "env_kind",
            "N",
            "agent",
            "K",
            "beta",
            "lambda_reg",
            "eps0",
            "seeds",
            "solved",
            "errors",
            "median_time_to_learn",
        ],
        &summary,
    )?;
    let scaling: Vec<Vec<String>> = output
        .scaling
        .iter()
        .map(|s| {
            vec![
                s.env_kind.clone(),
                s.agent.clone(),
                na(s.k),
                na(s.beta),
                na(s.lambda_reg),
                na(s.eps0),
                s.sizes_solved.to_string(),
                na(s.largest_solved),
                na(s.slope),
            ]
        })
        .collect();
    write_csv(
        &out.join("scaling.csv"),
        &[
            "env_kind",
            "agent",
            "K",
            "beta",
            "lambda_reg",
            "eps0",
            "sizes_solved",
            "largest_solved_N",
            "loglog_slope",
        ],
        &scaling,
    )?;
    let errors: Vec<Vec<String>> = output
        .records
        .iter()
        .filter_map(|r| {
            Some(vec![
                r.config_hash.clone(),
                r.seed.to_string(),
                r.error.clone()?,
            ])
        })
        .collect();
    write_csv(
        &out.join("errors.csv"),
        &["config_hash", "seed", "message"],
        &errors,
    )
}

/// Read back a curve file as (episode, return, regret) rows.
pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let parse = |i: usize| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|_| Error::Config(format!("{}: bad number {:?}", path.display(), &row[i])))
        };
        out.push(CurvePoint {
            episode: parse(0)? as usize,
            episode_return: parse(1)?,
            regret: if &row[2] == "NA" {
                None
            } else {
                Some(parse(2)?)
            },
        });
    }
    Ok(out)
}
