use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::Money;
use crate::error::{Error, Result};
use crate::guards::GuardTrip;

pub const CSV_HEADER: [&str; 10] = [
    "slot",
    "ideal_spend_micros",
    "actual_spend_micros",
    "pacing_rate",
    "win_rate",
    "requests",
    "bids",
    "impressions",
    "clicks",
    "conversions",
];

/// Rounds to the six decimals written to CSV, so values round-trip exactly.
pub fn quantize6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRow {
    /// Global slot index, `day * T + slot`.
    pub slot: usize,
    pub ideal_spend: Money,
    pub actual_spend: Money,
    pub pacing_rate: f64,
    pub win_rate: f64,
    pub requests: u64,
    pub bids: u64,
    pub impressions: u64,
    /// Events are attributed to the slot of their impression.
    pub clicks: u64,
    pub conversions: u64,
}

/// `(mean_t |actual - ideal|, that mean / budget)`.
pub fn pacing_error(actual: &[Money], ideal: &[Money], budget: Money) -> Result<(Money, f64)> {
    if actual.len() != ideal.len() {
        return Err(Error::LengthMismatch {
            left: actual.len(),
            right: ideal.len(),
        });
    }
    if actual.is_empty() {
        return Ok((Money::ZERO, 0.0));
    }
    let total: u128 = actual
        .iter()
        .zip(ideal)
        .map(|(a, b)| u128::from(a.micros().abs_diff(b.micros())))
        .sum();
    let mean = total as f64 / actual.len() as f64;
    let frac = if budget.is_zero() {
        0.0
    } else {
        mean / budget.micros() as f64
    };
    Ok((Money::from_micros(mean.round() as u64), frac))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total_spend: Money,
    pub requests: u64,
    pub bids: u64,
    pub impressions: u64,
    pub clicks: u64,
    pub conversions: u64,
    /// Cost per thousand impressions, in currency units.
    pub ecpm: Option<f64>,
    pub ecpc: Option<f64>,
    pub ecpa: Option<f64>,
    pub ctr: Option<f64>,
    pub ar: Option<f64>,
    pub pacing_error: Money,
    /// `pacing_error / daily_budget`.
    pub pacing_error_fraction: f64,
}

impl Metrics {
    pub fn from_series(series: &[SlotRow], daily_budget: Money) -> Result<Self> {
        let spend: Money = series.iter().map(|r| r.actual_spend).sum();
        let sum = |f: fn(&SlotRow) -> u64| series.iter().map(f).sum::<u64>();
        let (requests, bids, impressions) = (
            sum(|r| r.requests),
            sum(|r| r.bids),
            sum(|r| r.impressions),
        );
        let (clicks, conversions) = (sum(|r| r.clicks), sum(|r| r.conversions));
        let per = |num: f64, den: u64| (den > 0).then(|| num / den as f64);
        let actual: Vec<Money> = series.iter().map(|r| r.actual_spend).collect();
        let ideal: Vec<Money> = series.iter().map(|r| r.ideal_spend).collect();
        let (pacing_error, pacing_error_fraction) = pacing_error(&actual, &ideal, daily_budget)?;
        Ok(Self {
            total_spend: spend,
            requests,
            bids,
            impressions,
            clicks,
            conversions,
            ecpm: per(1000.0 * spend.as_units(), impressions),
            ecpc: per(spend.as_units(), clicks),
            ecpa: per(spend.as_units(), conversions),
            ctr: per(clicks as f64, impressions),
            ar: per(conversions as f64, impressions),
            pacing_error,
            pacing_error_fraction,
        })
    }
}

/// Everything one campaign run produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    /// Hex SHA-256 of the canonical experiment configuration.
    pub config_hash: String,
    pub daily_budget: Money,
    pub num_slots: usize,
    pub days: u32,
    pub metrics: Metrics,
    pub guard_trips: Vec<GuardTrip>,
    /// Written to CSV, not to JSON.
    #[serde(skip)]
    pub series: Vec<SlotRow>,
}

impl RunReport {
    pub fn actual(&self) -> Vec<Money> {
        self.series.iter().map(|r| r.actual_spend).collect()
    }

    pub fn ideal(&self) -> Vec<Money> {
        self.series.iter().map(|r| r.ideal_spend).collect()
    }

    /// Share of requests bid on, per slot.
    pub fn bid_fractions(&self) -> Vec<f64> {
        self.series
            .iter()
            .map(|r| {
                if r.requests == 0 {
                    0.0
                } else {
                    r.bids as f64 / r.requests as f64
                }
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_series_csv(&self.series, out)
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out).map_err(|e| Error::io("<json>", e))?;
        Ok(())
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        let f = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let json_path = dir.join(format!("{}.json", self.name));
        let f = fs::File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
        self.write_json(std::io::BufWriter::new(f))
    }

    /// Loads a report written by [`write_to_dir`](Self::write_to_dir).
    pub fn read_from_dir(dir: &Path, name: &str) -> Result<Self> {
        let json_path = dir.join(format!("{name}.json"));
        let mut text = String::new();
        fs::File::open(&json_path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|e| Error::io(&json_path, e))?;
        let mut report: RunReport = serde_json::from_str(&text)?;
        let csv_path = dir.join(format!("{name}.csv"));
        let f = fs::File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        report.series = read_series_csv(f)?;
        Ok(report)
    }
}

pub fn write_series_csv<W: Write>(series: &[SlotRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in series {
        w.write_record([
            r.slot.to_string(),
            r.ideal_spend.micros().to_string(),
            r.actual_spend.micros().to_string(),
            format!("{:.6}", r.pacing_rate),
            format!("{:.6}", r.win_rate),
            r.requests.to_string(),
            r.bids.to_string(),
            r.impressions.to_string(),
            r.clicks.to_string(),
            r.conversions.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<SlotRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let int = |k: usize| {
            field(k).parse::<u64>().map_err(|e| Error::Parse {
                line,
                msg: format!("{}: {e}", CSV_HEADER[k]),
            })
        };
        let float = |k: usize| {
            field(k).parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("{}: {e}", CSV_HEADER[k]),
            })
        };
        rows.push(SlotRow {
            slot: int(0)? as usize,
            ideal_spend: Money::from_micros(int(1)?),
            actual_spend: Money::from_micros(int(2)?),
            pacing_rate: float(3)?,
            win_rate: float(4)?,
            requests: int(5)?,
            bids: int(6)?,
            impressions: int(7)?,
            clicks: int(8)?,
            conversions: int(9)?,
        });
    }
    Ok(rows)
}
