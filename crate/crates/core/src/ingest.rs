//! Reading market data and turning raw bids into model inputs.
//!
//! Demand CSV: `day,hour,price_eur_mwh,cum_volume_mwh`, one row per bid block.
//! Capacity-factor CSV: `day,hour,cf_solar,cf_offshore,cf_onshore`.
//! Renewable profile CSV: `hour,res_mwh`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Block, DemandCurve, ResProfile};

/// Installed capacity (MW) of solar PV, offshore wind and onshore wind in the
/// Danish 2030 projection.
pub const DK_2030_CAPACITY: [f64; 3] = [5300.0, 4900.0, 4800.0];

/// A row that could not be parsed, with its 1-based file line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalformedRow {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidRow {
    pub day: NaiveDate,
    pub hour: usize,
    pub price: f64,
    pub cum_volume: f64,
}

/// Bid rows as read, before any cleaning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawBidTable {
    pub rows: Vec<BidRow>,
    pub malformed: Vec<MalformedRow>,
}

impl RawBidTable {
    pub fn days(&self) -> Vec<NaiveDate> {
        let mut d: Vec<NaiveDate> = self.rows.iter().map(|r| r.day).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Cleaned curves for hours `1..=24` of `day`.
    pub fn day_curves(&self, day: NaiveDate) -> Result<Vec<DemandCurve>> {
        let mut by_hour: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.day == day) {
            by_hour.entry(r.hour).or_default().push((r.price, r.cum_volume));
        }
        (1..=24)
            .map(|h| {
                let rows = by_hour
                    .get(&h)
                    .ok_or_else(|| Error::InvalidInput(format!("{day}: no bids for hour {h}")))?;
                clean_curve(h, rows)
            })
            .collect()
    }
}

/// One day of hourly capacity factors `(solar, offshore, onshore)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityFactorDay {
    pub day: NaiveDate,
    pub hours: Vec<[f64; 3]>,
}

impl CapacityFactorDay {
    /// The day flattened hour by hour.
    pub fn features(&self) -> Vec<f64> {
        self.hours.iter().flatten().copied().collect()
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn columns<R: Read>(reader: &mut csv::Reader<R>, path: &Path, names: &[&str]) -> Result<Vec<usize>> {
    let headers = reader.headers()?.clone();
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.display().to_string(),
                    column: (*name).to_string(),
                })
        })
        .collect()
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, index: usize, name: &str) -> std::result::Result<T, String> {
    let raw = record.get(index).unwrap_or("");
    raw.parse().map_err(|_| format!("{name}: cannot parse {raw:?}"))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub fn parse_demand_csv(path: &Path) -> Result<RawBidTable> {
    let mut reader = open(path)?;
    let cols = columns(&mut reader, path, &["day", "hour", "price_eur_mwh", "cum_volume_mwh"])?;
    let mut table = RawBidTable::default();
    for record in reader.records() {
        let record = record?;
        let parsed = (|| -> std::result::Result<BidRow, String> {
            let row = BidRow {
                day: field(&record, cols[0], "day")?,
                hour: field(&record, cols[1], "hour")?,
                price: field(&record, cols[2], "price_eur_mwh")?,
                cum_volume: field(&record, cols[3], "cum_volume_mwh")?,
            };
            if !(1..=24).contains(&row.hour) {
                return Err(format!("hour {} outside 1..24", row.hour));
            }
            if !row.price.is_finite() || !row.cum_volume.is_finite() {
                return Err("non-finite number".into());
            }
            Ok(row)
        })();
        match parsed {
            Ok(row) => table.rows.push(row),
            Err(message) => table.malformed.push(MalformedRow {
                line: line_of(&record),
                message,
            }),
        }
    }
    Ok(table)
}

/// Reads capacity factors grouped by day (ascending). Every day must cover
/// hours 1 to 24 once and every factor must lie in `[0, 1]`.
pub fn parse_capacity_factor_csv(path: &Path) -> Result<Vec<CapacityFactorDay>> {
    let mut reader = open(path)?;
    let cols = columns(&mut reader, path, &["day", "hour", "cf_solar", "cf_offshore", "cf_onshore"])?;
    let mut days: BTreeMap<NaiveDate, Vec<Option<[f64; 3]>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let bad = |message: String| Error::InvalidInput(format!("{}:{line}: {message}", path.display()));
        let day: NaiveDate = field(&record, cols[0], "day").map_err(bad)?;
        let hour: usize = field(&record, cols[1], "hour").map_err(bad)?;
        let mut cf = [0.0; 3];
        for (k, name) in ["cf_solar", "cf_offshore", "cf_onshore"].iter().enumerate() {
            cf[k] = field(&record, cols[2 + k], name).map_err(bad)?;
            if !(0.0..=1.0).contains(&cf[k]) {
                return Err(bad(format!("{name} {} outside [0, 1]", cf[k])));
            }
        }
        if !(1..=24).contains(&hour) {
            return Err(bad(format!("hour {hour} outside 1..24")));
        }
        let slots = days.entry(day).or_insert_with(|| vec![None; 24]);
        if slots[hour - 1].replace(cf).is_some() {
            return Err(bad(format!("{day} hour {hour} appears twice")));
        }
    }
    days.into_iter()
        .map(|(day, slots)| {
            let hours = slots
                .into_iter()
                .enumerate()
                .map(|(h, s)| {
                    s.ok_or_else(|| Error::InvalidInput(format!("{}: {day} misses hour {}", path.display(), h + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CapacityFactorDay { day, hours })
        })
        .collect()
}

/// Reads an hourly renewable profile; hours must run `1..=T` in order.
pub fn parse_res_csv(path: &Path) -> Result<ResProfile> {
    let mut reader = open(path)?;
    let cols = columns(&mut reader, path, &["hour", "res_mwh"])?;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let bad = |message: String| Error::InvalidInput(format!("{}:{line}: {message}", path.display()));
        let hour: usize = field(&record, cols[0], "hour").map_err(bad)?;
        let v: f64 = field(&record, cols[1], "res_mwh").map_err(bad)?;
        if hour != values.len() + 1 {
            return Err(bad(format!("expected hour {}, found {hour}", values.len() + 1)));
        }
        if !(v.is_finite() && v >= 0.0) {
            return Err(bad(format!("renewable output {v} must be >= 0")));
        }
        values.push(v);
    }
    Ok(ResProfile::new(values))
}

/// Turns one hour's raw bids into a valid curve: negative prices and
/// non-positive volumes are dropped, blocks sorted by descending price, a
/// repeated price keeps its largest volume, and a block whose volume does not
/// exceed the previous one is dropped.
pub fn clean_curve(hour: usize, rows: &[(f64, f64)]) -> Result<DemandCurve> {
    let mut kept: Vec<(f64, f64)> = rows
        .iter()
        .copied()
        .filter(|&(p, v)| p >= 0.0 && v > 0.0 && p.is_finite() && v.is_finite())
        .collect();
    kept.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    kept.dedup_by(|later, first| later.0 == first.0);
    let mut blocks: Vec<Block> = Vec::with_capacity(kept.len());
    for (price, cum_volume) in kept {
        if blocks.last().map_or(true, |b| cum_volume > b.cum_volume) {
            blocks.push(Block { price, cum_volume });
        }
    }
    if blocks.is_empty() {
        return Err(Error::InvalidCurve {
            hour,
            reason: "no bids left after cleaning".into(),
        });
    }
    let curve = DemandCurve { hour, blocks };
    curve.check()?;
    Ok(curve)
}

/// 1-based block indices kept when reducing `from` blocks to `to`:
/// `round(1 + (k - 1)(from - 1)/(to - 1))`, so both ends survive. With
/// `to == 1` only the last block (full volume, floor price) is kept.
pub fn downsample_indices(from: usize, to: usize) -> Vec<usize> {
    if to >= from {
        return (1..=from).collect();
    }
    if to == 1 {
        return vec![from];
    }
    (1..=to)
        .map(|k| (1.0 + (k - 1) as f64 * (from - 1) as f64 / (to - 1) as f64).round() as usize)
        .collect()
}

/// Reduces every hourly curve of every day to the smallest block count found.
pub fn downsample_curves(days: &[Vec<DemandCurve>]) -> Result<Vec<Vec<DemandCurve>>> {
    let target = days
        .iter()
        .flatten()
        .map(DemandCurve::len)
        .min()
        .ok_or_else(|| Error::InvalidInput("no curves to down-sample".into()))?;
    if target == 0 {
        return Err(Error::InvalidInput("cannot down-sample an empty curve".into()));
    }
    Ok(days
        .iter()
        .map(|day| {
            day.iter()
                .map(|c| DemandCurve {
                    hour: c.hour,
                    blocks: downsample_indices(c.len(), target)
                        .into_iter()
                        .map(|i| c.blocks[i - 1])
                        .collect(),
                })
                .collect()
        })
        .collect())
}

/// Index of the day with the smallest summed Euclidean distance to all
/// others; the lowest index wins ties.
pub fn medoid_day(days: &[Vec<f64>]) -> Result<usize> {
    let first = days
        .first()
        .ok_or_else(|| Error::InvalidInput("no days to choose from".into()))?;
    if let Some(k) = days.iter().position(|d| d.len() != first.len()) {
        return Err(Error::InvalidInput(format!(
            "day {k} has {} features, expected {}",
            days[k].len(),
            first.len()
        )));
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut best = (0, f64::INFINITY);
    for (i, a) in days.iter().enumerate() {
        let total: f64 = days.iter().map(|b| dist(a, b)).sum();
        if total < best.1 {
            best = (i, total);
        }
    }
    Ok(best.0)
}

/// Hourly renewable output `sum_k cf_k * capacity_k`.
pub fn scale_res(day: &CapacityFactorDay, capacity: [f64; 3]) -> Result<ResProfile> {
    if capacity.iter().any(|&c| !(c >= 0.0)) {
        return Err(Error::InvalidInput("installed capacities must be >= 0".into()));
    }
    Ok(ResProfile::new(
        day.hours
            .iter()
            .map(|cf| cf.iter().zip(&capacity).map(|(f, c)| f * c).sum())
            .collect(),
    ))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes curves in the demand CSV layout under the given day label.
pub fn write_demand_csv(path: &Path, day: NaiveDate, curves: &[DemandCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["day", "hour", "price_eur_mwh", "cum_volume_mwh"])?;
    for c in curves {
        for b in &c.blocks {
            w.write_record([
                day.to_string(),
                c.hour.to_string(),
                b.price.to_string(),
                b.cum_volume.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_res_csv(path: &Path, res: &ResProfile) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["hour", "res_mwh"])?;
    for (t, v) in res.values.iter().enumerate() {
        w.write_record([(t + 1).to_string(), v.to_string()])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

/// Loads the curves of one day; the file must hold exactly one day unless
/// `day` picks one.
pub fn load_day_curves(path: &Path, day: Option<NaiveDate>) -> Result<Vec<DemandCurve>> {
    let table = parse_demand_csv(path)?;
    if let Some(bad) = table.malformed.first() {
        return Err(Error::InvalidInput(format!(
            "{}:{}: {}",
            path.display(),
            bad.line,
            bad.message
        )));
    }
    let day = match day {
        Some(d) => d,
        None => match table.days().as_slice() {
            [d] => *d,
            [] => return Err(Error::InvalidInput(format!("{}: no bids", path.display()))),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "{}: several days present, pick one",
                    path.display()
                )))
            }
        },
    };
    table.day_curves(day)
}
