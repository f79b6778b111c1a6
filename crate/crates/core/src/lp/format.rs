//! Reader and writer for the LP text format.
//!
//! Layout written by [`write_lp`]:
//!
//! ```text
//! \ optional comment lines
//! Minimize
//!  obj: 0
//! Subject To
//!  c0: y_0_0 - 3 z_0_0 <= 0
//! Bounds
//!  x0 free
//! Binary
//!  z_0_0
//! End
//! ```
//!
//! Coefficients are exact decimals when every number in the row has a
//! terminating expansion; otherwise the row is multiplied by the least
//! common multiple of its denominators and written with integers. Strict
//! rows (`<`) are written as `<=` since the format has no strict relation.
//! Variables are declared `free` unless binary, because the format defaults
//! lower bounds to zero.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;

use super::{Direction, LinearProgram, Relation};
use crate::rational::Rational;
use crate::spec::LinearTerm;

pub fn write_lp(lp: &LinearProgram, binaries: &BTreeSet<usize>, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "\\ {c}");
    }
    match &lp.objective {
        Some((dir, term)) if !term.is_empty() => {
            let head = if *dir == Direction::Minimize { "Minimize" } else { "Maximize" };
            let (parts, _) = scaled_row(term, &Rational::zero());
            let _ = writeln!(out, "{head}\n obj: {}", render_terms(&parts, lp));
        }
        _ => out.push_str("Minimize\n obj: 0\n"),
    }
    out.push_str("Subject To\n");
    for (k, c) in lp.constraints.iter().enumerate() {
        let (parts, bound) = scaled_row(&c.term, &c.bound);
        let lhs = if parts.is_empty() { "0".to_string() } else { render_terms(&parts, lp) };
        let rel = match c.rel {
            Relation::Le | Relation::Lt => "<=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " c{k}: {lhs} {rel} {bound}");
    }
    let free: Vec<usize> = (0..lp.num_vars()).filter(|v| !binaries.contains(v)).collect();
    if !free.is_empty() {
        out.push_str("Bounds\n");
        for v in free {
            let _ = writeln!(out, " {} free", lp.names[v]);
        }
    }
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for &v in binaries {
            let _ = writeln!(out, " {}", lp.names[v]);
        }
    }
    out.push_str("End\n");
    out
}

/// Coefficient strings for each variable and the bound string, scaled to
/// integers when some value lacks a terminating decimal form.
fn scaled_row(term: &LinearTerm, bound: &Rational) -> (Vec<(usize, String, bool)>, String) {
    let values: Vec<&Rational> = term.iter().map(|(_, c)| c).chain(std::iter::once(bound)).collect();
    let terminating = values.iter().all(|v| v.to_terminating_decimal().is_some());
    let scale = if terminating {
        Rational::one()
    } else {
        let lcm = values.iter().fold(BigInt::from(1), |acc, v| acc.lcm(&v.denom()));
        Rational::from(lcm)
    };
    let show = |v: &Rational| {
        let v = v * &scale;
        v.to_terminating_decimal().expect("scaled value is an integer or terminating")
    };
    let parts = term
        .iter()
        .map(|(i, c)| (i, show(&c.abs()), c.is_negative()))
        .collect();
    (parts, show(bound))
}

fn render_terms(parts: &[(usize, String, bool)], lp: &LinearProgram) -> String {
    let mut s = String::new();
    for (k, (v, mag, neg)) in parts.iter().enumerate() {
        match (k, neg) {
            (0, false) => {}
            (0, true) => s.push_str("- "),
            (_, false) => s.push_str(" + "),
            (_, true) => s.push_str(" - "),
        }
        if mag != "1" {
            s.push_str(mag);
            s.push(' ');
        }
        s.push_str(&lp.names[*v]);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("lp format line {line}: {msg}")]
pub struct LpFormatError {
    pub line: usize,
    pub msg: String,
}

/// Parses the subset of the format produced by [`write_lp`]. All `<=` rows
/// come back as non-strict.
pub fn parse_lp(text: &str) -> Result<(LinearProgram, BTreeSet<usize>), LpFormatError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Objective(Direction),
        Constraints,
        Bounds,
        Binary,
        End,
    }
    let mut lp = LinearProgram::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut binaries = BTreeSet::new();
    let mut section = Section::None;
    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        let err = |msg: String| LpFormatError { line: lineno, msg };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "minimize" => {
                section = Section::Objective(Direction::Minimize);
                continue;
            }
            "maximize" => {
                section = Section::Objective(Direction::Maximize);
                continue;
            }
            "subject to" => {
                section = Section::Constraints;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "binary" => {
                section = Section::Binary;
                continue;
            }
            "end" => {
                section = Section::End;
                continue;
            }
            _ => {}
        }
        let body = line.split_once(':').map_or(line, |(_, rest)| rest).trim();
        match &section {
            Section::Objective(dir) => {
                let term = parse_sum(body, &mut lp, &mut ids).map_err(err)?;
                if !term.is_empty() {
                    lp.set_objective(*dir, term);
                }
            }
            Section::Constraints => {
                let (lhs, rel, rhs) = ["<=", ">=", "="]
                    .iter()
                    .find_map(|op| body.split_once(op).map(|(l, r)| (l, *op, r)))
                    .ok_or_else(|| err("missing relation".into()))?;
                let term = parse_sum(lhs, &mut lp, &mut ids).map_err(err)?;
                let bound: Rational = rhs.trim().parse().map_err(|_| err(format!("bad bound `{rhs}`")))?;
                match rel {
                    "<=" => lp.add_le(term, bound),
                    ">=" => lp.add_ge(term, bound),
                    _ => lp.add_eq(term, bound),
                }
            }
            Section::Bounds => {
                let name = body
                    .strip_suffix("free")
                    .ok_or_else(|| err("only `free` bounds are supported".into()))?
                    .trim();
                var_id(name, &mut lp, &mut ids);
            }
            Section::Binary => {
                for name in body.split_whitespace() {
                    binaries.insert(var_id(name, &mut lp, &mut ids));
                }
            }
            Section::None | Section::End => return Err(err(format!("unexpected `{line}`"))),
        }
    }
    if section != Section::End {
        return Err(LpFormatError {
            line: text.lines().count(),
            msg: "missing End".into(),
        });
    }
    Ok((lp, binaries))
}

fn var_id(name: &str, lp: &mut LinearProgram, ids: &mut HashMap<String, usize>) -> usize {
    *ids.entry(name.to_string()).or_insert_with(|| lp.add_var(name))
}

fn parse_sum(text: &str, lp: &mut LinearProgram, ids: &mut HashMap<String, usize>) -> Result<LinearTerm, String> {
    let mut term = LinearTerm::new();
    let mut sign = Rational::one();
    let mut coef: Option<Rational> = None;
    for tok in text.split_whitespace() {
        match tok {
            "+" => {}
            "-" => sign = -sign,
            _ if tok.starts_with(|c: char| c.is_ascii_digit() || c == '.') => {
                coef = Some(tok.parse().map_err(|_| format!("bad coefficient `{tok}`"))?);
            }
            _ => {
                let c = &sign * &coef.take().unwrap_or_else(Rational::one);
                term.add(var_id(tok, lp, ids), &c);
                sign = Rational::one();
            }
        }
    }
    if coef.is_some_and(|c| !c.is_zero()) {
        return Err("constants are not allowed on the left-hand side".into());
    }
    Ok(term)
}
