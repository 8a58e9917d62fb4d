//! Fixed-format MPS export and a reader for the files we write.
//!
//! Layout: `NAME`, `ROWS` (objective row `OBJ` first), `COLUMNS`, `RHS`
//! (set `RHS`), `BOUNDS` (set `BND`), optional `QUADOBJ`, `ENDATA`. Names
//! start in column 5 and values in column 25 for short names; numbers use
//! the shortest decimal text that parses back to the same `f64`. Binaries are
//! `BV` bounds. A nonzero objective constant `k` is written as `−k` in the
//! `RHS` entry of `OBJ`. `QUADOBJ` lists the lower triangle of `Q` once per
//! entry, where the objective is `cᵀv + ½ vᵀQv`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::model::{MipModel, Sense};
use crate::error::{Error, Result};

fn entry(out: &mut String, a: &str, b: &str, v: f64) {
    let _ = writeln!(out, "    {a:<8}  {b:<8}  {v}");
}

pub fn write_mps(model: &MipModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", if model.name.is_empty() { "MODEL" } else { &model.name });
    out.push_str("ROWS\n N  OBJ\n");
    for r in &model.rows {
        let s = match r.sense {
            Sense::Le => 'L',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {s}  {}", r.name);
    }
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.n_vars()];
    for (ri, r) in model.rows.iter().enumerate() {
        for &(k, a) in &r.coeffs {
            cols[k].push((ri, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (k, var) in model.vars.iter().enumerate() {
        let c = model.objective[k];
        if c != 0.0 || cols[k].is_empty() {
            entry(&mut out, &var.name, "OBJ", c);
        }
        for &(ri, a) in &cols[k] {
            entry(&mut out, &var.name, &model.rows[ri].name, a);
        }
    }
    out.push_str("RHS\n");
    if model.constant != 0.0 {
        entry(&mut out, "RHS", "OBJ", -model.constant);
    }
    for r in &model.rows {
        if r.rhs != 0.0 {
            entry(&mut out, "RHS", &r.name, r.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for var in &model.vars {
        let n = &var.name;
        if var.binary && var.lower == 0.0 && var.upper == 1.0 {
            let _ = writeln!(out, " BV BND       {n}");
            continue;
        }
        if var.lower == var.upper {
            let _ = writeln!(out, " FX BND       {n:<8}  {}", var.lower);
            continue;
        }
        match (var.lower.is_finite(), var.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " FR BND       {n}");
            }
            (false, true) => {
                let _ = writeln!(out, " MI BND       {n}");
                let _ = writeln!(out, " UP BND       {n:<8}  {}", var.upper);
            }
            (true, hi) => {
                if var.lower != 0.0 {
                    let _ = writeln!(out, " LO BND       {n:<8}  {}", var.lower);
                }
                if hi {
                    let _ = writeln!(out, " UP BND       {n:<8}  {}", var.upper);
                }
            }
        }
    }
    if model.has_quadratic() {
        out.push_str("QUADOBJ\n");
        for &(r, c, v) in &model.quad {
            if v != 0.0 {
                entry(&mut out, &model.vars[c].name, &model.vars[r].name, v);
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

pub fn export_mps(model: &MipModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_mps(model)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Quad,
}

/// Read a model written by [`write_mps`] (any whitespace separation).
pub fn parse_mps(text: &str) -> Result<MipModel> {
    let mut model = MipModel::new("");
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut row_of: HashMap<String, usize> = HashMap::new();
    let mut negate: Vec<bool> = Vec::new();
    let mut var_of: HashMap<String, usize> = HashMap::new();
    let err = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
    let num = |s: &str, line: usize| s.parse::<f64>().map_err(|_| err(line, &format!("bad number {s:?}")));

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tok: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') {
            section = match tok[0] {
                "NAME" => {
                    model.name = tok.get(1).unwrap_or(&"").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "QUADOBJ" => Section::Quad,
                "ENDATA" => break,
                other => return Err(err(line, &format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::Rows => {
                if tok.len() != 2 {
                    return Err(err(line, "row needs a type and a name"));
                }
                let name = tok[1].to_string();
                let sense = match tok[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(name);
                        }
                        continue;
                    }
                    // G rows are stored negated as L rows
                    "L" | "G" => Sense::Le,
                    "E" => Sense::Eq,
                    t => return Err(err(line, &format!("unknown row type {t}"))),
                };
                negate.push(tok[0] == "G");
                row_of.insert(name.clone(), model.add_row(name, Vec::new(), sense, 0.0));
            }
            Section::Columns => {
                if tok.len() < 3 || tok.len() % 2 == 0 {
                    return Err(err(line, "column entry needs name, row, value pairs"));
                }
                let k = *var_of
                    .entry(tok[0].to_string())
                    .or_insert_with(|| model.add_var(tok[0].to_string(), 0.0, f64::INFINITY, false));
                for pair in tok[1..].chunks(2) {
                    let v = num(pair[1], line)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        model.objective[k] = v;
                    } else {
                        let r = *row_of.get(pair[0]).ok_or_else(|| err(line, &format!("unknown row {}", pair[0])))?;
                        if v != 0.0 {
                            model.rows[r].coeffs.push((k, if negate[r] { -v } else { v }));
                        }
                    }
                }
            }
            Section::Rhs => {
                if tok.len() < 3 || tok.len() % 2 == 0 {
                    return Err(err(line, "rhs entry needs set, row, value pairs"));
                }
                for pair in tok[1..].chunks(2) {
                    let v = num(pair[1], line)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        model.constant = -v;
                    } else {
                        let r = *row_of.get(pair[0]).ok_or_else(|| err(line, &format!("unknown row {}", pair[0])))?;
                        model.rows[r].rhs = if negate[r] { -v } else { v };
                    }
                }
            }
            Section::Bounds => {
                if tok.len() < 3 {
                    return Err(err(line, "bound needs type, set and column"));
                }
                let k = *var_of.get(tok[2]).ok_or_else(|| err(line, &format!("unknown column {}", tok[2])))?;
                let val = || -> Result<f64> { num(tok.get(3).ok_or_else(|| err(line, "bound value missing"))?, line) };
                let var = &mut model.vars[k];
                match tok[0] {
                    "BV" => {
                        var.binary = true;
                        var.lower = 0.0;
                        var.upper = 1.0;
                    }
                    "FX" => {
                        let v = val()?;
                        var.lower = v;
                        var.upper = v;
                    }
                    "FR" => {
                        var.lower = f64::NEG_INFINITY;
                        var.upper = f64::INFINITY;
                    }
                    "MI" => var.lower = f64::NEG_INFINITY,
                    "PL" => var.upper = f64::INFINITY,
                    "LO" => var.lower = val()?,
                    "UP" => var.upper = val()?,
                    t => return Err(err(line, &format!("unknown bound type {t}"))),
                }
            }
            Section::Quad => {
                if tok.len() != 3 {
                    return Err(err(line, "quadratic entry needs two columns and a value"));
                }
                let a = *var_of.get(tok[0]).ok_or_else(|| err(line, "unknown column"))?;
                let b = *var_of.get(tok[1]).ok_or_else(|| err(line, "unknown column"))?;
                model.quad.push((a.max(b), a.min(b), num(tok[2], line)?));
            }
            Section::None => return Err(err(line, "data outside a section")),
        }
    }
    Ok(model)
}
