//! CSV emission of per-stream rows and per-grid-point aggregates.

use std::path::Path;

use super::ResultRow;
use crate::error::{Error, Result};
use crate::metrics::Summary;

pub const CSV_HEADER: [&str; 9] = ["trial", "method", "snr_db", "rho", "user", "nmse", "sinr_db", "ber", "flags"];

pub const AGG_HEADER: [&str; 15] = [
    "method",
    "snr_db",
    "rho",
    "trials",
    "failed",
    "nmse_mean",
    "nmse_min",
    "nmse_max",
    "nmse_mean_db",
    "sinr_mean_db",
    "sinr_min_db",
    "sinr_max_db",
    "ber_mean",
    "ber_min",
    "ber_max",
];

/// Shortest decimal that parses back to the same double.
fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.trial.to_string(),
            r.method.clone(),
            num(r.snr_db),
            num(r.rho),
            r.user.to_string(),
            num(r.nmse),
            num(r.sinr_db),
            num(r.ber),
            r.flags.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let bad = |what: &str| Error::Io(format!("malformed {what} in {}", path.display()));
    rd.records()
        .map(|rec| {
            let rec = rec?;
            let f = |i: usize| rec.get(i).ok_or_else(|| bad("row"));
            let x = |i: usize| f(i)?.parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
            Ok(ResultRow {
                trial: f(0)?.parse().map_err(|_| bad("trial"))?,
                method: f(1)?.to_string(),
                snr_db: x(2)?,
                rho: x(3)?,
                user: f(4)?.parse().map_err(|_| bad("user"))?,
                nmse: x(5)?,
                sinr_db: x(6)?,
                ber: x(7)?,
                flags: f(8)?.to_string(),
            })
        })
        .collect()
}

/// Trial-averaged summaries over the legitimate users of one method at one
/// grid point. Each trial is first summarized across users (NMSE and BER
/// linear, SINR in dB), then the trial summaries are averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub snr_db: f64,
    pub rho: f64,
    pub trials: usize,
    /// Trials without a finite NMSE for any legitimate user.
    pub failed: usize,
    pub nmse: Summary,
    pub sinr_db: Summary,
    pub ber: Summary,
}

impl AggregateRow {
    pub fn nmse_mean_db(&self) -> f64 {
        10.0 * self.nmse.mean.log10()
    }
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

fn mean_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    Summary::of(xs).mean
}

pub fn aggregate_rows(rows: &[ResultRow]) -> Vec<AggregateRow> {
    // groups in first-seen order
    let mut keys: Vec<(String, f64, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.method && same(k.1, r.snr_db) && same(k.2, r.rho)) {
            keys.push((r.method.clone(), r.snr_db, r.rho));
        }
    }
    keys.into_iter()
        .map(|(method, snr_db, rho)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.method == method && same(r.snr_db, snr_db) && same(r.rho, rho) && r.is_legitimate())
                .collect();
            let mut trials: Vec<usize> = group.iter().map(|r| r.trial).collect();
            trials.sort_unstable();
            trials.dedup();
            let per_trial: Vec<[Summary; 3]> = trials
                .iter()
                .map(|&t| {
                    let users: Vec<&&ResultRow> = group.iter().filter(|r| r.trial == t).collect();
                    [
                        Summary::of(users.iter().map(|r| r.nmse)),
                        Summary::of(users.iter().map(|r| r.sinr_db)),
                        Summary::of(users.iter().map(|r| r.ber)),
                    ]
                })
                .collect();
            let avg = |m: usize| Summary {
                mean: mean_of(per_trial.iter().map(|s| s[m].mean)),
                min: mean_of(per_trial.iter().map(|s| s[m].min)),
                max: mean_of(per_trial.iter().map(|s| s[m].max)),
            };
            AggregateRow {
                failed: per_trial.iter().filter(|s| !s[0].mean.is_finite()).count(),
                trials: trials.len(),
                method,
                snr_db,
                rho,
                nmse: avg(0),
                sinr_db: avg(1),
                ber: avg(2),
            }
        })
        .collect()
}

pub fn write_aggregates(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGG_HEADER)?;
    for a in rows {
        w.write_record([
            a.method.clone(),
            num(a.snr_db),
            num(a.rho),
            a.trials.to_string(),
            a.failed.to_string(),
            num(a.nmse.mean),
            num(a.nmse.min),
            num(a.nmse.max),
            num(a.nmse_mean_db()),
            num(a.sinr_db.mean),
            num(a.sinr_db.min),
            num(a.sinr_db.max),
            num(a.ber.mean),
            num(a.ber.min),
            num(a.ber.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, user: usize, nmse: f64, flags: &str) -> ResultRow {
        ResultRow {
            trial,
            method: "proposed".into(),
            snr_db: 16.0,
            rho: 0.6,
            user,
            nmse,
            sinr_db: 10.0 * (user + 1) as f64,
            ber: 0.0,
            flags: flags.into(),
        }
    }

    #[test]
    fn aggregates_only_legitimate_users() {
        let rows = vec![
            row(0, 0, 0.1, "lu"),
            row(0, 1, 0.9, "mu"),
            row(1, 0, 0.3, "lu"),
            row(1, 1, 0.9, "mu"),
        ];
        let agg = aggregate_rows(&rows);
        assert_eq!(agg.len(), 1);
        assert!((agg[0].nmse.mean - 0.2).abs() < 1e-15);
        assert_eq!(agg[0].trials, 2);
        assert_eq!(agg[0].sinr_db.mean, 10.0);
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let mut r = row(3, 0, 0.1 + 0.2, "lu;flagged_rows=2");
        r.ber = f64::NAN;
        write_rows(&p, std::slice::from_ref(&r)).unwrap();
        let back = read_rows(&p).unwrap();
        assert_eq!(back[0].nmse.to_bits(), r.nmse.to_bits());
        assert!(back[0].ber.is_nan());
        assert_eq!(back[0].flags, r.flags);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("trial,method,snr_db,rho,user,nmse,sinr_db,ber,flags\n"));
    }
}
