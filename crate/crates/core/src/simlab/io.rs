//! Dataset CSV files: a header row naming the columns (`x1,...,xd,y` or
//! `w1,...,wp,v1,...,vq,y`) followed by one observation per line.

use std::io::{Read, Write};

use crate::data::{Matrix, Sample};
use crate::error::{Error, Result};
use crate::significance::SigSample;

/// Column roles parsed from a header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    X,
    W,
    V,
    Y,
}

fn role(name: &str) -> Option<Role> {
    let name = name.trim().to_ascii_lowercase();
    if name == "y" {
        return Some(Role::Y);
    }
    let (head, tail) = name.split_at(1.min(name.len()));
    if !tail.is_empty() && !tail.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    match head {
        "x" => Some(Role::X),
        "w" => Some(Role::W),
        "v" => Some(Role::V),
        _ => None,
    }
}

struct Table {
    roles: Vec<Role>,
    rows: Vec<Vec<f64>>,
}

fn read_table(reader: impl Read) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { row: 1, message: e.to_string() })?.clone();
    let roles = header.iter().map(|h| role(h).ok_or_else(|| Error::Parse { row: 1, message: format!("unknown column `{h}`") })).collect::<Result<Vec<_>>>()?;
    if roles.iter().filter(|&&r| r == Role::Y).count() != 1 {
        return Err(Error::Parse { row: 1, message: "header needs exactly one `y` column".into() });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse { row: e.position().map_or(0, |p| p.line() as usize), message: e.to_string() })?;
        let line = rec.position().map_or(rows.len() + 2, |p| p.line() as usize);
        if rec.len() != roles.len() {
            return Err(Error::Parse { row: line, message: format!("expected {} fields, found {}", roles.len(), rec.len()) });
        }
        let vals = rec
            .iter()
            .map(|cell| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(Error::Parse { row: line, message: format!("non-finite value {v}") }),
                Err(_) => Err(Error::Parse { row: line, message: format!("cannot parse `{cell}` as a number") }),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Parse { row: 2, message: "no observations".into() });
    }
    Ok(Table { roles, rows })
}

impl Table {
    fn block(&self, r: Role) -> Vec<Vec<f64>> {
        let cols: Vec<usize> = (0..self.roles.len()).filter(|&j| self.roles[j] == r).collect();
        self.rows.iter().map(|row| cols.iter().map(|&j| row[j]).collect()).collect()
    }

    fn has(&self, r: Role) -> bool {
        self.roles.contains(&r)
    }
}

/// Reads a lack-of-fit dataset (`x...` and `y` columns).
pub fn read_sample(reader: impl Read) -> Result<Sample<f64>> {
    let t = read_table(reader)?;
    if t.has(Role::W) || t.has(Role::V) || !t.has(Role::X) {
        return Err(Error::Parse { row: 1, message: "expected columns x1,...,xd,y".into() });
    }
    let y = t.block(Role::Y).into_iter().map(|r| r[0]).collect();
    Sample::new(Matrix::from_rows(&t.block(Role::X))?, y)
}

/// Reads a significance dataset (`w...`, `v...` and `y` columns).
pub fn read_sig_sample(reader: impl Read) -> Result<SigSample<f64>> {
    let t = read_table(reader)?;
    if t.has(Role::X) || !t.has(Role::W) || !t.has(Role::V) {
        return Err(Error::Parse { row: 1, message: "expected columns w1,...,wp,v1,...,vq,y".into() });
    }
    let y = t.block(Role::Y).into_iter().map(|r| r[0]).collect();
    SigSample::new(Matrix::from_rows(&t.block(Role::W))?, Matrix::from_rows(&t.block(Role::V))?, y)
}

fn names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}{j}")).collect()
}

/// Shortest decimal that parses back to the same `f64` (at most 17 significant digits).
fn emit(out: &mut impl Write, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sample(out: &mut impl Write, s: &Sample<f64>) -> Result<()> {
    let mut header = names("x", s.dim());
    header.push("y".into());
    emit(out, &header, (0..s.len()).map(|i| s.x.row(i).iter().copied().chain([s.y[i]]).collect()))
}

pub fn write_sig_sample(out: &mut impl Write, s: &SigSample<f64>) -> Result<()> {
    let mut header = names("w", s.w.ncols());
    header.extend(names("v", s.v.ncols()));
    header.push("y".into());
    emit(out, &header, (0..s.len()).map(|i| s.w.row(i).iter().chain(s.v.row(i)).copied().chain([s.y[i]]).collect()))
}
