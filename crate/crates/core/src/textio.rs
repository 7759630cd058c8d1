//! Plain-text exchange format for series.
//!
//! Layout: a header line `n1 n2`, then one line per term,
//!
//! ```text
//! re im | k_1 .. k_n1 | mp_1 .. mp_n1 | mz_1 .. mz_n2 | mw_1 .. mw_n2
//! ```
//!
//! Sections for absent blocks are empty but the `|` separators stay, so the
//! shape of a line is independent of the dimensions. Blank lines and lines
//! starting with `#` are ignored on read; duplicate keys are summed. The
//! writer emits terms in canonical key order with shortest round-trip float
//! formatting, so write-read is the identity and equal series produce
//! byte-identical files.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::series::{Dims, Series, TermKey};

pub fn write_series(series: &Series, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{} {}", series.n1(), series.n2())?;
    for (key, c) in series.terms() {
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite coefficient {c} cannot be serialised"
            )));
        }
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join(" ");
        writeln!(
            out,
            "{} {} | {} | {} | {} | {}",
            c.re,
            c.im,
            join(&mut key.k.iter().map(|x| x.to_string())),
            join(&mut key.mp.iter().map(|x| x.to_string())),
            join(&mut key.mz.iter().map(|x| x.to_string())),
            join(&mut key.mw.iter().map(|x| x.to_string())),
        )?;
    }
    Ok(())
}

pub fn series_to_string(series: &Series) -> Result<String> {
    let mut buf = Vec::new();
    write_series(series, &mut buf)?;
    Ok(String::from_utf8(buf).expect("writer emits utf-8"))
}

pub fn read_series(input: &mut impl BufRead) -> Result<Series> {
    let mut series: Option<Series> = None;
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        match series.as_mut() {
            None => {
                series = Some(parse_header(text, lineno)?);
            }
            Some(s) => {
                let (key, c) = parse_term(text, s.dims(), lineno)?;
                s.insert_add(key, c);
            }
        }
    }
    series.ok_or_else(|| Error::Parse {
        line: 0,
        message: "no header line found".into(),
    })
}

pub fn series_from_str(text: &str) -> Result<Series> {
    read_series(&mut text.as_bytes())
}

pub fn save_series(series: &Series, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_series(series, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_series(path: impl AsRef<Path>) -> Result<Series> {
    let data = fs::read(path)?;
    read_series(&mut data.as_slice())
}

fn parse_header(text: &str, lineno: usize) -> Result<Series> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    let bad = || Error::Parse {
        line: lineno,
        message: format!("expected header `n1 n2`, found `{text}`"),
    };
    if fields.len() != 2 {
        return Err(bad());
    }
    let n1: usize = fields[0].parse().map_err(|_| bad())?;
    let n2: usize = fields[1].parse().map_err(|_| bad())?;
    Ok(Series::zero(Dims::new(n1, n2)))
}

fn parse_term(text: &str, dims: Dims, lineno: usize) -> Result<(TermKey, Complex64)> {
    let sections: Vec<&str> = text.split('|').collect();
    if sections.len() != 5 {
        return Err(Error::Parse {
            line: lineno,
            message: format!(
                "expected 5 `|`-separated sections (coeff, k, mp, mz, mw), found {}",
                sections.len()
            ),
        });
    }
    let coeff: Vec<&str> = sections[0].split_whitespace().collect();
    if coeff.len() != 2 {
        return Err(Error::Parse {
            line: lineno,
            message: "coefficient section must hold exactly `re im`".into(),
        });
    }
    let parse_f = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad float `{s}`"),
        })
    };
    let c = Complex64::new(parse_f(coeff[0])?, parse_f(coeff[1])?);

    let ints = |section: &str, want: usize, name: &str| -> Result<Vec<i64>> {
        let vals: Vec<i64> = section
            .split_whitespace()
            .map(|s| {
                s.parse::<i64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad integer `{s}` in {name} section"),
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != want {
            return Err(Error::Parse {
                line: lineno,
                message: format!("{name} section holds {} entries, expected {want}", vals.len()),
            });
        }
        Ok(vals)
    };
    let to_i32 = |v: Vec<i64>, name: &str| -> Result<Vec<i32>> {
        v.into_iter()
            .map(|x| {
                i32::try_from(x).map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("{name} entry {x} out of range"),
                })
            })
            .collect()
    };
    let to_u32 = |v: Vec<i64>, name: &str| -> Result<Vec<u32>> {
        v.into_iter()
            .map(|x| {
                u32::try_from(x).map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("{name} entry {x} must be a non-negative exponent"),
                })
            })
            .collect()
    };

    let k = to_i32(ints(sections[1], dims.n1, "k")?, "k")?;
    let mp = to_u32(ints(sections[2], dims.n1, "mp")?, "mp")?;
    let mz = to_u32(ints(sections[3], dims.n2, "mz")?, "mz")?;
    let mw = to_u32(ints(sections[4], dims.n2, "mw")?, "mw")?;
    Ok((TermKey::new(k, mp, mz, mw), c))
}
