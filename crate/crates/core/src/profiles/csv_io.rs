use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use log::warn;

use super::types::DayType;
use crate::{Error, Result, STEPS_PER_DAY};

/// One day of one household as read from a profile file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawProfile {
    pub id: String,
    pub date: NaiveDate,
    pub day_type: DayType,
    pub values: Vec<f64>,
}

impl RawProfile {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn header() -> Vec<String> {
    let mut h = vec!["id".to_string(), "date".into(), "day_type".into()];
    h.extend((0..STEPS_PER_DAY).map(|t| format!("h{t:02}")));
    h
}

type Partial = (String, NaiveDate, DayType, Vec<Option<f64>>, usize);

/// Reads profiles, filling isolated missing values.
///
/// A missing value is replaced by the value at the same hour one day or one
/// week before or after, whichever has the lowest sum of squared differences
/// to the neighbouring points. Days with two or more consecutive missing
/// values, or with no usable candidate, are dropped with a warning.
pub fn read_profiles_csv<R: Read>(reader: R) -> Result<Vec<RawProfile>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let expected = header();
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }

    let mut rows: Vec<Partial> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let perr = |message: String| Error::Parse { line, message };
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(perr("empty id".into()));
        }
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|e| perr(format!("bad date {:?}: {e}", &rec[1])))?;
        let day_type = if rec[2].is_empty() {
            match date.weekday() {
                Weekday::Sat | Weekday::Sun => DayType::Weekend,
                _ => DayType::Weekday,
            }
        } else {
            DayType::parse(&rec[2]).ok_or_else(|| perr(format!("bad day type {:?}", &rec[2])))?
        };
        let mut values = Vec::with_capacity(STEPS_PER_DAY);
        for (h, field) in rec.iter().skip(3).enumerate() {
            if field.is_empty() {
                values.push(None);
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| perr(format!("bad value {field:?} at h{h:02}")))?;
            if !v.is_finite() {
                return Err(perr(format!("non-finite value at h{h:02}")));
            }
            values.push(Some(v));
        }
        rows.push((id, date, day_type, values, line));
    }

    let index: HashMap<(String, NaiveDate), usize> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| ((r.0.clone(), r.1), i))
        .collect();
    let lookup = |id: &str, date: NaiveDate, h: usize| -> Option<f64> {
        index
            .get(&(id.to_string(), date))
            .and_then(|&i| rows[i].3[h])
    };

    let mut out = Vec::with_capacity(rows.len());
    'rows: for (id, date, day_type, vals, line) in &rows {
        let mut filled = Vec::with_capacity(STEPS_PER_DAY);
        for h in 0..STEPS_PER_DAY {
            if let Some(v) = vals[h] {
                filled.push(v);
                continue;
            }
            if vals.get(h + 1).is_some_and(Option::is_none) || (h > 0 && vals[h - 1].is_none()) {
                warn!("line {line}: {id} {date} has consecutive missing values; day dropped");
                continue 'rows;
            }
            let before = if h > 0 {
                vals[h - 1]
            } else {
                lookup(id, *date - Duration::days(1), STEPS_PER_DAY - 1)
            };
            let after = if h + 1 < STEPS_PER_DAY {
                vals[h + 1]
            } else {
                lookup(id, *date + Duration::days(1), 0)
            };
            let neighbours: Vec<f64> = before.into_iter().chain(after).collect();
            let candidates = [-1i64, 1, -7, 7]
                .iter()
                .filter_map(|d| lookup(id, *date + Duration::days(*d), h));
            let best = candidates.fold(None::<(f64, f64)>, |best, c| {
                let ssd: f64 = neighbours.iter().map(|n| (c - n).powi(2)).sum();
                match best {
                    Some((_, b)) if b <= ssd => best,
                    _ => Some((c, ssd)),
                }
            });
            match best {
                Some((c, _)) => filled.push(c),
                None => {
                    warn!("line {line}: {id} {date} h{h:02} missing with no candidate; day dropped");
                    continue 'rows;
                }
            }
        }
        out.push(RawProfile {
            id: id.clone(),
            date: *date,
            day_type: *day_type,
            values: filled,
        });
    }
    Ok(out)
}

pub fn load_profiles_csv(path: &Path) -> Result<Vec<RawProfile>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_profiles_csv(f)
}

pub fn write_profiles_csv<W: Write>(writer: W, profiles: &[RawProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header())?;
    for p in profiles {
        let mut rec = vec![
            p.id.clone(),
            p.date.format("%Y-%m-%d").to_string(),
            p.day_type.as_str().to_string(),
        ];
        rec.extend(p.values.iter().map(|v| v.to_string()));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<profiles>"), e))?;
    Ok(())
}
