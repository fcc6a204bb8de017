//! Text and JSON formats for tensors, factor models, traces, sample plans
//! and MAX-3LIN instances.
//!
//! Tensor files start with `symtensor3 n=<n> nnz=<count>` followed by one
//! `i j k value` line per canonical entry (zero-based). MAX-3LIN files start
//! with `p 3lin <n> <m>` followed by `i j k b` lines with one-based indices
//! and `b` in `{1, -1}`. Blank lines and lines starting with `#` are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::altmin::ConvergenceTrace;
use crate::error::{Error, Result};
use crate::max3lin::Lin3Instance;
use crate::sampling::{SamplePlan, SamplePlanFile};
use crate::tensor::{FactorModel, SparseSymmetricTensor};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Non-empty, non-comment lines with their one-based line numbers.
fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, t.to_string())))
            }
        }
    })
}

fn parse_field<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

fn header_value(line: usize, tok: Option<&str>, key: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("header is missing `{key}=`")))?;
    let v = tok
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| parse_err(line, format!("expected `{key}=<count>`, got `{tok}`")))?;
    parse_field(line, v, key)
}

pub fn read_tensor<R: Read>(reader: R) -> Result<SparseSymmetricTensor> {
    let mut lines = content_lines(BufReader::new(reader));
    let (hl, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| parse_err(1, "empty file: missing `symtensor3` header"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("symtensor3") {
        return Err(parse_err(hl, "expected header `symtensor3 n=<n> nnz=<count>`"));
    }
    let n = header_value(hl, toks.next(), "n")?;
    let nnz = header_value(hl, toks.next(), "nnz")?;
    if toks.next().is_some() {
        return Err(parse_err(hl, "trailing tokens in header"));
    }
    let mut entries = Vec::with_capacity(nnz);
    let mut seen = std::collections::HashSet::with_capacity(nnz);
    for item in lines {
        let (ln, text) = item?;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse_err(ln, format!("expected `i j k value`, got {} fields", toks.len())));
        }
        let i: usize = parse_field(ln, toks[0], "index")?;
        let j: usize = parse_field(ln, toks[1], "index")?;
        let k: usize = parse_field(ln, toks[2], "index")?;
        let v: f64 = parse_field(ln, toks[3], "value")?;
        if i >= n || j >= n || k >= n {
            return Err(parse_err(ln, format!("index out of range for n = {n}")));
        }
        if !v.is_finite() {
            return Err(parse_err(ln, "value is not finite"));
        }
        let mut key = [i, j, k];
        key.sort_unstable();
        if !seen.insert(key) {
            return Err(parse_err(ln, format!("duplicate entry {key:?}")));
        }
        entries.push((key, v));
    }
    if entries.len() != nnz {
        return Err(parse_err(hl, format!("header declares nnz={nnz} but {} entries follow", entries.len())));
    }
    SparseSymmetricTensor::new(n, entries)
}

pub fn write_tensor<W: Write>(mut w: W, tensor: &SparseSymmetricTensor) -> Result<()> {
    writeln!(w, "symtensor3 n={} nnz={}", tensor.n(), tensor.nnz())?;
    for (t, v) in tensor.iter() {
        let [i, j, k] = t.indices();
        writeln!(w, "{i} {j} {k} {v:?}")?;
    }
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<SparseSymmetricTensor> {
    read_tensor(File::open(path)?)
}

pub fn save_tensor(path: impl AsRef<Path>, tensor: &SparseSymmetricTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, tensor)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FactorModel> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn save_model(path: impl AsRef<Path>, model: &FactorModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, model)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// CSV with header `iter,fit_error,rmse,d_infinity,seconds`; the truth
/// columns are left blank when absent.
pub fn write_trace_csv<W: Write>(w: W, trace: &ConvergenceTrace) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if trace.rows.is_empty() {
        wtr.write_record(["iter", "fit_error", "rmse", "d_infinity", "seconds"])?;
    }
    for row in &trace.rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<ConvergenceTrace> {
    let mut rdr = csv::Reader::from_reader(r);
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ConvergenceTrace { rows })
}

pub fn save_plan(path: impl AsRef<Path>, plan: &SamplePlan, tensor_ref: Option<String>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &plan.to_file(tensor_ref))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn load_plan(path: impl AsRef<Path>, omega: SparseSymmetricTensor) -> Result<SamplePlan> {
    let file: SamplePlanFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    SamplePlan::from_file(file, omega)
}

pub fn read_lin3<R: Read>(reader: R) -> Result<Lin3Instance> {
    let mut lines = content_lines(BufReader::new(reader));
    let (hl, header) = lines
        .next()
        .transpose()?
        .ok_or_else(|| parse_err(1, "empty file: missing `p 3lin` header"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "p" || toks[1] != "3lin" {
        return Err(parse_err(hl, "expected header `p 3lin <n> <m>`"));
    }
    let n: usize = parse_field(hl, toks[2], "variable count")?;
    let m: usize = parse_field(hl, toks[3], "equation count")?;
    let mut eqs = Vec::with_capacity(m);
    for item in lines {
        let (ln, text) = item?;
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse_err(ln, format!("expected `i j k b`, got {} fields", toks.len())));
        }
        let mut vars = [0usize; 3];
        for (slot, tok) in vars.iter_mut().zip(&toks[..3]) {
            let v: usize = parse_field(ln, tok, "variable")?;
            if v == 0 || v > n {
                return Err(parse_err(ln, format!("variable {v} outside 1..={n}")));
            }
            *slot = v - 1;
        }
        let b: i8 = parse_field(ln, toks[3], "right-hand side")?;
        if b != 1 && b != -1 {
            return Err(parse_err(ln, format!("right-hand side must be 1 or -1, got {b}")));
        }
        eqs.push((vars, b));
    }
    if eqs.len() != m {
        return Err(parse_err(hl, format!("header declares {m} equations but {} follow", eqs.len())));
    }
    Lin3Instance::new(n, eqs, None).map_err(|e| parse_err(hl, e.to_string()))
}

pub fn write_lin3<W: Write>(mut w: W, instance: &Lin3Instance) -> Result<()> {
    writeln!(w, "p 3lin {} {}", instance.n, instance.len())?;
    for e in &instance.equations {
        let [i, j, k] = e.vars;
        writeln!(w, "{} {} {} {}", i + 1, j + 1, k + 1, e.rhs)?;
    }
    Ok(())
}
