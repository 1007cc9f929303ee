//! CSV ingestion and export of market panels and results.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::Deserialize;

use crate::attribution::AttributionReport;
use crate::backtest::BacktestResult;
use crate::error::{Error, Result};
use crate::market::MarketSeries;
use crate::matrix::Matrix;

pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

#[derive(Debug, Deserialize)]
struct Row {
    date: String,
    ticker: String,
    cap: f64,
    book: f64,
    #[serde(default)]
    book_updated: Option<u8>,
}

pub fn parse_date(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .ok_or_else(|| Error::Parse(format!("unrecognized date '{s}'")))
}

/// One ticker per line; blank lines and `#` comments are skipped.
pub fn read_universe(path: &Path) -> Result<Vec<String>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            if out.iter().any(|x: &String| x == t) {
                return Err(Error::InvalidPanel(format!("ticker {t} listed twice in universe")));
            }
            out.push(t.to_string());
        }
    }
    Ok(out)
}

pub fn write_universe(tickers: &[String], path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    for t in tickers {
        writeln!(f, "{t}")?;
    }
    Ok(())
}

/// Reads a long-format panel `date,ticker,cap,book[,book_updated]`.
///
/// Rows for tickers outside `universe` are ignored. With no universe,
/// tickers are taken in order of first appearance. Every (date, ticker)
/// pair must appear exactly once. A step is a book-update step when any
/// ticker has `book_updated = 1`; without that column, when any book
/// differs from the previous date.
pub fn read_market_csv(path: &Path, universe: Option<&[String]>) -> Result<MarketSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    for col in ["date", "ticker", "cap", "book"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Parse(format!("missing column '{col}'")));
        }
    }
    let explicit = headers.iter().any(|h| h == "book_updated");

    let mut tickers: Vec<String> = universe.map(|u| u.to_vec()).unwrap_or_default();
    let mut ticker_ix: HashMap<String, usize> =
        tickers.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let mut dates: Vec<String> = Vec::new();
    let mut stamps: Vec<NaiveDateTime> = Vec::new();
    let mut date_ix: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), (f64, f64, bool)> = HashMap::new();

    for (line, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = rec?;
        let ti = match ticker_ix.get(&row.ticker) {
            Some(&i) => i,
            None if universe.is_none() => {
                tickers.push(row.ticker.clone());
                ticker_ix.insert(row.ticker.clone(), tickers.len() - 1);
                tickers.len() - 1
            }
            None => continue,
        };
        let di = match date_ix.get(&row.date) {
            Some(&i) => i,
            None => {
                stamps.push(parse_date(&row.date)?);
                dates.push(row.date.clone());
                date_ix.insert(row.date.clone(), dates.len() - 1);
                dates.len() - 1
            }
        };
        let flag = match row.book_updated {
            None | Some(0) => false,
            Some(1) => true,
            Some(x) => {
                return Err(Error::Parse(format!("book_updated must be 0 or 1, got {x} (row {})", line + 2)))
            }
        };
        if cells.insert((di, ti), (row.cap, row.book, flag)).is_some() {
            return Err(Error::InvalidPanel(format!(
                "duplicate row for {} on {}",
                row.ticker, row.date
            )));
        }
    }

    let mut order: Vec<usize> = (0..dates.len()).collect();
    order.sort_by_key(|&i| stamps[i]);
    for w in order.windows(2) {
        if stamps[w[0]] == stamps[w[1]] {
            return Err(Error::InvalidPanel(format!(
                "dates '{}' and '{}' are the same time",
                dates[w[0]], dates[w[1]]
            )));
        }
    }
    let n = dates.len();
    let d = tickers.len();
    let mut caps = Matrix::zeros(n, d);
    let mut books = Matrix::zeros(n, d);
    let mut flags = vec![false; n];
    for (l, &di) in order.iter().enumerate() {
        for i in 0..d {
            let (c, b, f) = cells.get(&(di, i)).copied().ok_or_else(|| {
                Error::MissingData(format!("no row for {} on {}", tickers[i], dates[di]))
            })?;
            caps.set(l, i, c);
            books.set(l, i, b);
            flags[l] |= f;
        }
    }
    if !explicit {
        for l in 1..n {
            flags[l] = books.row(l) != books.row(l - 1);
        }
    }
    let t0 = order.first().map(|&i| stamps[i]);
    let times = order
        .iter()
        .map(|&i| {
            let dt = stamps[i] - t0.expect("nonempty");
            dt.num_microseconds().unwrap_or(i64::MAX) as f64 / 1e6 / SECONDS_PER_YEAR
        })
        .collect();
    let sorted_dates = order.iter().map(|&i| dates[i].clone()).collect();
    MarketSeries::with_labels(times, sorted_dates, tickers, caps, books, flags)
}

pub fn write_market_csv(series: &MarketSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "ticker", "cap", "book", "book_updated"])?;
    for l in 0..series.n_steps() {
        let flag = if series.book_update_flags[l] { "1" } else { "0" };
        for (i, t) in series.tickers.iter().enumerate() {
            w.write_record([
                series.dates[l].as_str(),
                t.as_str(),
                &series.caps.get(l, i).to_string(),
                &series.books.get(l, i).to_string(),
                flag,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_backtest_csv(result: &BacktestResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "date", "wealth", "relative_value", "log_relative_value"])?;
    for l in 0..result.wealth.len() {
        w.write_record([
            l.to_string(),
            result.dates[l].clone(),
            result.wealth[l].to_string(),
            result.relative_value[l].to_string(),
            result.relative_value[l].ln().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-stock weights applied over each period.
pub fn write_weights_csv(result: &BacktestResult, tickers: &[String], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["step".to_string()];
    header.extend(tickers.iter().cloned());
    w.write_record(&header)?;
    for l in 0..result.weights_used.rows() {
        let mut rec = vec![l.to_string()];
        rec.extend(result.weights_used.row(l).iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One relative-value column per backtest, aligned by step.
pub fn write_relative_values(results: &[BacktestResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["step".to_string(), "date".to_string()];
    header.extend(results.iter().map(|r| r.name.clone()));
    w.write_record(&header)?;
    if let Some(first) = results.first() {
        for l in 0..first.relative_value.len() {
            let mut rec = vec![l.to_string(), first.dates[l].clone()];
            rec.extend(results.iter().map(|r| r.relative_value[l].to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_attribution_csv(report: &AttributionReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "DC", "MBRC"])?;
    for k in 0..report.dc.len() {
        w.write_record([
            report.steps[k].to_string(),
            report.dc[k].to_string(),
            report.mbrc[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}
