//! Plain-text instance format.
//!
//! ```text
//! # orem-milp v1
//! objective_constant 0
//! var <name> <C|I|B> <lb> <ub> <obj>
//! con <name> <L|G|E> <rhs> <idx>:<coef> <idx>:<coef> ...
//! ```
//!
//! Numbers are written with Rust's shortest round-trip representation, so
//! writing and re-reading a model reproduces it bit-for-bit. Infinite bounds
//! are spelled `inf` / `-inf`. Names must not contain whitespace.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Result, SolverError};
use crate::model::{MilpModel, Sense, VarId, VarKind};

const HEADER: &str = "# orem-milp v1";

fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| SolverError::Instance { line, message: format!("bad number `{tok}`") })
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(SolverError::Instance {
            line: 0,
            message: format!("name `{name}` is empty or contains whitespace"),
        });
    }
    Ok(())
}

pub fn to_string(model: &MilpModel) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "objective_constant {}", fmt_num(model.objective_constant)).unwrap();
    for (v, c) in model.vars.iter().zip(&model.objective) {
        check_name(&v.name)?;
        let kind = match v.kind {
            VarKind::Continuous => 'C',
            VarKind::Integer => 'I',
            VarKind::Binary => 'B',
        };
        writeln!(out, "var {} {} {} {} {}", v.name, kind, fmt_num(v.lb), fmt_num(v.ub), fmt_num(*c)).unwrap();
    }
    for c in &model.constraints {
        check_name(&c.name)?;
        let sense = match c.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        write!(out, "con {} {} {}", c.name, sense, fmt_num(c.rhs)).unwrap();
        for &(v, a) in &c.coeffs {
            write!(out, " {}:{}", v.0, fmt_num(a)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write<W: Write>(model: &MilpModel, mut w: W) -> Result<()> {
    w.write_all(to_string(model)?.as_bytes())?;
    Ok(())
}

pub fn read<R: BufRead>(r: R) -> Result<MilpModel> {
    let mut model = MilpModel::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |message: &str| SolverError::Instance { line: line_no, message: message.to_string() };
        match toks[0] {
            "objective_constant" => {
                let t = toks.get(1).ok_or_else(|| err("missing value"))?;
                model.objective_constant = parse_num(t, line_no)?;
            }
            "var" => {
                if toks.len() != 6 {
                    return Err(err("expected `var <name> <kind> <lb> <ub> <obj>`"));
                }
                let kind = match toks[2] {
                    "C" => VarKind::Continuous,
                    "I" => VarKind::Integer,
                    "B" => VarKind::Binary,
                    other => return Err(err(&format!("unknown variable kind `{other}`"))),
                };
                let lb = parse_num(toks[3], line_no)?;
                let ub = parse_num(toks[4], line_no)?;
                let obj = parse_num(toks[5], line_no)?;
                model.vars.push(crate::model::Variable { name: toks[1].to_string(), kind, lb, ub });
                model.objective.push(obj);
            }
            "con" => {
                if toks.len() < 4 {
                    return Err(err("expected `con <name> <sense> <rhs> [idx:coef ...]`"));
                }
                let sense = match toks[2] {
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(err(&format!("unknown sense `{other}`"))),
                };
                let rhs = parse_num(toks[3], line_no)?;
                let mut coeffs = Vec::with_capacity(toks.len() - 4);
                for pair in &toks[4..] {
                    let (idx, coef) = pair.split_once(':').ok_or_else(|| err(&format!("bad term `{pair}`")))?;
                    let idx: usize = idx.parse().map_err(|_| err(&format!("bad index `{idx}`")))?;
                    coeffs.push((VarId(idx), parse_num(coef, line_no)?));
                }
                model.add_constraint(toks[1], coeffs, sense, rhs);
            }
            other => return Err(err(&format!("unknown record `{other}`"))),
        }
    }
    model.validate()?;
    Ok(model)
}

pub fn from_str(s: &str) -> Result<MilpModel> {
    read(s.as_bytes())
}
