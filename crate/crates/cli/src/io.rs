//! Text formats for measurement records and matrix product states.
//!
//! Both are line oriented: a magic line, `key value` header lines, then one
//! entry per line. Floats are written in the shortest form that parses back
//! to the same binary64 value, so round trips are lossless.
//!
//! ```text
//! mpsvt-record 1
//! n_sites 2
//! window_width 2
//! noise_sigma 0.0
//! noise_seed none
//! label zeros
//! values 16
//! II 1.0
//! XI 0.0
//! ...
//! ```
//!
//! ```text
//! mpsvt-mps 1
//! n_sites 3
//! bonds 1 2 2 1
//! site 1 1 2
//! 0.7071067811865476 0.0
//! ...
//! ```
//!
//! A site block lists `A[l, s, r]` as `re im` pairs with `r` fastest, then
//! `s`, then `l`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use mpsvt_core::mps::Tensor3;
use mpsvt_core::pauli::enumerate_window_strings;
use mpsvt_core::{MeasurementRecord, Mps, PauliString, C64};

use crate::error::{CliError, CliResult};

const RECORD_MAGIC: &str = "mpsvt-record 1";
const MPS_MAGIC: &str = "mpsvt-mps 1";

struct Reader<'a> {
    origin: &'a str,
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str, origin: &'a str) -> Self {
        Reader {
            origin,
            lines: text.lines().enumerate().peekable(),
            line: 0,
        }
    }

    fn error(&self, field: &str, message: impl Into<String>) -> CliError {
        CliError::Parse {
            origin: self.origin.to_string(),
            line: self.line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Next line that is neither blank nor a `#` comment.
    fn next_opt(&mut self) -> Option<&'a str> {
        for (i, l) in self.lines.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some(t);
            }
        }
        None
    }

    fn next(&mut self, what: &str) -> CliResult<&'a str> {
        match self.next_opt() {
            Some(l) => Ok(l),
            None => {
                self.line += 1;
                Err(self.error(what, "unexpected end of file"))
            }
        }
    }

    fn finish(&mut self) -> CliResult<()> {
        for (i, l) in self.lines.by_ref() {
            let t = l.trim();
            if !t.is_empty() && !t.starts_with('#') {
                self.line = i + 1;
                return Err(self.error("trailing data", format!("unexpected line {t:?}")));
            }
        }
        Ok(())
    }

    /// `key rest-of-line`
    fn keyed(&mut self, key: &str) -> CliResult<&'a str> {
        let l = self.next(key)?;
        let (k, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        if k != key {
            return Err(self.error(key, format!("expected key {key:?}, found {k:?}")));
        }
        Ok(rest.trim())
    }

    fn parse<T: std::str::FromStr>(&self, field: &str, s: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        s.parse::<T>()
            .map_err(|e| self.error(field, format!("cannot parse {s:?}: {e}")))
    }

    fn float(&self, field: &str, s: &str) -> CliResult<f64> {
        let v: f64 = self.parse(field, s)?;
        if !v.is_finite() {
            return Err(self.error(field, format!("non-finite value {s}")));
        }
        Ok(v)
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn format_record(record: &MeasurementRecord) -> String {
    let table = record.table();
    let mut out = String::new();
    let seed = record.noise_seed().map_or("none".to_string(), |s| s.to_string());
    writeln!(out, "{RECORD_MAGIC}").unwrap();
    writeln!(out, "n_sites {}", record.n_sites()).unwrap();
    writeln!(out, "window_width {}", table.window_width()).unwrap();
    writeln!(out, "noise_sigma {:?}", record.noise_sigma()).unwrap();
    writeln!(out, "noise_seed {seed}").unwrap();
    writeln!(out, "label {}", record.target_label()).unwrap();
    writeln!(out, "values {}", table.len()).unwrap();
    for (p, v) in table.strings().iter().zip(record.values()) {
        writeln!(out, "{} {v:?}", p.label()).unwrap();
    }
    out
}

pub fn parse_record(text: &str, origin: &str) -> CliResult<MeasurementRecord> {
    let mut r = Reader::new(text, origin);
    if r.next("header")? != RECORD_MAGIC {
        return Err(r.error("header", format!("expected {RECORD_MAGIC:?}")));
    }
    let n: usize = {
        let s = r.keyed("n_sites")?;
        r.parse("n_sites", s)?
    };
    let w: usize = {
        let s = r.keyed("window_width")?;
        r.parse("window_width", s)?
    };
    let sigma = {
        let s = r.keyed("noise_sigma")?;
        r.float("noise_sigma", s)?
    };
    let seed = match r.keyed("noise_seed")? {
        "none" => None,
        s => Some(r.parse::<u64>("noise_seed", s)?),
    };
    let label = r.keyed("label")?.to_string();
    let count: usize = {
        let s = r.keyed("values")?;
        r.parse("values", s)?
    };
    let table = Arc::new(enumerate_window_strings(n, w).map_err(|e| r.error("window_width", e.to_string()))?);
    if count != table.len() {
        return Err(r.error(
            "values",
            format!("N={n}, w={w} has {} strings, header lists {count}", table.len()),
        ));
    }
    let mut seen: HashMap<String, f64> = HashMap::with_capacity(count);
    while let Some(l) = r.next_opt() {
        let (label, value) = l
            .split_once(char::is_whitespace)
            .ok_or_else(|| r.error("values", format!("expected `string value`, found {l:?}")))?;
        let p = PauliString::from_label(label).map_err(|e| r.error(label, e.to_string()))?;
        if p.n_sites() != n {
            return Err(r.error(label, format!("string has {} sites, expected {n}", p.n_sites())));
        }
        if table.position(&p).is_none() {
            return Err(r.error(label, format!("string does not fit a width-{w} window")));
        }
        let v = r.float(label, value.trim())?;
        if seen.insert(p.label(), v).is_some() {
            return Err(r.error(label, "duplicate string"));
        }
    }
    let mut values = Vec::with_capacity(count);
    for p in table.strings() {
        match seen.get(&p.label()) {
            Some(&v) => values.push(v),
            None => return Err(r.error(&p.label(), "missing value for this string")),
        }
    }
    if seen.len() != count {
        return Err(r.error("values", format!("header lists {count} values, found {}", seen.len())));
    }
    MeasurementRecord::new(table, values, sigma, seed, label).map_err(|e| r.error("values", e.to_string()))
}

pub fn write_record(path: &Path, record: &MeasurementRecord) -> CliResult<()> {
    write_text(path, &format_record(record))
}

pub fn read_record(path: &Path) -> CliResult<MeasurementRecord> {
    parse_record(&read_text(path)?, &path.display().to_string())
}

pub fn format_mps(mps: &Mps) -> String {
    let mut out = String::new();
    writeln!(out, "{MPS_MAGIC}").unwrap();
    writeln!(out, "n_sites {}", mps.n_sites()).unwrap();
    let mut bonds = vec![1];
    bonds.extend(mps.bond_dims());
    bonds.push(1);
    let bonds: Vec<String> = bonds.iter().map(|b| b.to_string()).collect();
    writeln!(out, "bonds {}", bonds.join(" ")).unwrap();
    for (j, t) in mps.tensors().iter().enumerate() {
        writeln!(out, "site {} {} {}", j + 1, t.left, t.right).unwrap();
        for c in &t.data {
            writeln!(out, "{:?} {:?}", c.re, c.im).unwrap();
        }
    }
    out
}

pub fn parse_mps(text: &str, origin: &str) -> CliResult<Mps> {
    let mut r = Reader::new(text, origin);
    if r.next("header")? != MPS_MAGIC {
        return Err(r.error("header", format!("expected {MPS_MAGIC:?}")));
    }
    let n: usize = {
        let s = r.keyed("n_sites")?;
        r.parse("n_sites", s)?
    };
    if n == 0 {
        return Err(r.error("n_sites", "an MPS needs at least one site"));
    }
    let bonds: Vec<usize> = r
        .keyed("bonds")?
        .split_whitespace()
        .map(|b| r.parse("bonds", b))
        .collect::<CliResult<_>>()?;
    if bonds.len() != n + 1 || bonds[0] != 1 || bonds[n] != 1 || bonds.contains(&0) {
        return Err(r.error(
            "bonds",
            format!("expected {} positive bond dimensions with unit boundaries", n + 1),
        ));
    }
    let mut tensors = Vec::with_capacity(n);
    for j in 0..n {
        let head: Vec<usize> = r
            .keyed("site")?
            .split_whitespace()
            .map(|v| r.parse("site", v))
            .collect::<CliResult<_>>()?;
        if head != [j + 1, bonds[j], bonds[j + 1]] {
            return Err(r.error(
                "site",
                format!("expected `site {} {} {}`, found {head:?}", j + 1, bonds[j], bonds[j + 1]),
            ));
        }
        let mut t = Tensor3::zeros(bonds[j], bonds[j + 1]);
        for c in t.data.iter_mut() {
            let l = r.next("entry")?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(r.error("entry", format!("expected `re im`, found {l:?}")));
            }
            *c = C64::new(r.float("entry", parts[0])?, r.float("entry", parts[1])?);
        }
        tensors.push(t);
    }
    r.finish()?;
    Mps::from_tensors(tensors).map_err(|e| r.error("bonds", e.to_string()))
}

pub fn write_mps(path: &Path, mps: &Mps) -> CliResult<()> {
    write_text(path, &format_mps(mps))
}

pub fn read_mps(path: &Path) -> CliResult<Mps> {
    parse_mps(&read_text(path)?, &path.display().to_string())
}
