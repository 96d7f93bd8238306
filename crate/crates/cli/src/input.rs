//! Reading observed symbol counts from token streams or `symbol,count` CSV.

use divindex::SampleCounts;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Whitespace-separated symbols, one observation each.
    Tokens,
    /// `symbol,count` rows; an optional `symbol,count` header and `#` comments are skipped.
    #[default]
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputError {
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn fail(line: Option<u64>, message: impl Into<String>) -> InputError {
    InputError {
        line,
        message: message.into(),
    }
}

/// Symbol table in order of first appearance, plus counts.
#[derive(Debug, Default)]
struct Tally {
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    first_line: Vec<u64>,
}

impl Tally {
    fn finish(self) -> Result<SampleCounts, InputError> {
        let counts = SampleCounts::new(
            self.counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i as u64, c)),
        )
        .map_err(|e| fail(None, e.to_string()))?;
        if counts.n() == 0 {
            return Err(fail(None, "input contains no observations"));
        }
        Ok(counts)
    }
}

pub fn parse(text: &str, format: Format) -> Result<SampleCounts, InputError> {
    match format {
        Format::Tokens => parse_tokens(text),
        Format::Csv => parse_csv(text),
    }
}

fn parse_tokens(text: &str) -> Result<SampleCounts, InputError> {
    let mut tally = Tally::default();
    for (i, line) in text.lines().enumerate() {
        for token in line.split_whitespace() {
            let next = tally.counts.len();
            let slot = *tally.index.entry(token.to_string()).or_insert(next);
            if slot == next {
                tally.counts.push(0);
                tally.first_line.push(i as u64 + 1);
            }
            tally.counts[slot] = tally.counts[slot]
                .checked_add(1)
                .ok_or_else(|| fail(Some(i as u64 + 1), "count overflow"))?;
        }
    }
    tally.finish()
}

fn split_row(row: &str) -> Option<csv::StringRecord> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(row.as_bytes())
        .records()
        .next()?
        .ok()
}

fn parse_csv(text: &str) -> Result<SampleCounts, InputError> {
    let mut tally = Tally::default();
    let mut first = true;
    for (i, row) in text.lines().enumerate() {
        let line = Some(i as u64 + 1);
        if row.trim().is_empty() || row.trim_start().starts_with('#') {
            continue;
        }
        let record = split_row(row).ok_or_else(|| fail(line, "malformed CSV row"))?;
        if record.len() != 2 {
            return Err(fail(line, format!("expected `symbol,count`, found {} fields", record.len())));
        }
        let (symbol, count) = (&record[0], &record[1]);
        if first && symbol.eq_ignore_ascii_case("symbol") && count.eq_ignore_ascii_case("count") {
            first = false;
            continue;
        }
        first = false;
        if symbol.is_empty() {
            return Err(fail(line, "empty symbol"));
        }
        let count: u64 = count.parse().map_err(|_| {
            if count.starts_with('-') {
                fail(line, format!("count `{count}` is negative"))
            } else {
                fail(line, format!("count `{count}` is not a nonnegative integer"))
            }
        })?;
        if let Some(&slot) = tally.index.get(symbol) {
            return Err(fail(
                line,
                format!("symbol `{symbol}` already listed on line {}", tally.first_line[slot]),
            ));
        }
        tally.index.insert(symbol.to_string(), tally.counts.len());
        tally.counts.push(count);
        tally.first_line.push(i as u64 + 1);
    }
    tally.finish()
}
