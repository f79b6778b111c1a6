//! Linear terms and conjunctive specifications over input or output
//! variables, with a small text format.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

/// `Σ c·x` with no constant part. Zero coefficients are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinearTerm {
    coeffs: BTreeMap<usize, Rational>,
}

impl LinearTerm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(i: usize) -> Self {
        Self::scaled_var(i, Rational::one())
    }

    pub fn scaled_var(i: usize, c: Rational) -> Self {
        let mut t = Self::new();
        t.add(i, &c);
        t
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, Rational)>>(pairs: I) -> Self {
        let mut t = Self::new();
        for (i, c) in pairs {
            t.add(i, &c);
        }
        t
    }

    /// Adds `c·x_i`, dropping the entry if it cancels.
    pub fn add(&mut self, i: usize, c: &Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(i).or_default();
        *entry += c;
        if entry.is_zero() {
            self.coeffs.remove(&i);
        }
    }

    pub fn add_scaled(&mut self, other: &LinearTerm, k: &Rational) {
        for (i, c) in &other.coeffs {
            self.add(*i, &(c * k));
        }
    }

    pub fn get(&self, i: usize) -> Option<&Rational> {
        self.coeffs.get(&i)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Rational)> {
        self.coeffs.iter().map(|(i, c)| (*i, c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_var(&self) -> Option<usize> {
        self.coeffs.keys().next_back().copied()
    }

    /// The single `(variable, coefficient)` pair of a one-variable term.
    pub fn single(&self) -> Option<(usize, &Rational)> {
        if self.coeffs.len() == 1 {
            self.iter().next()
        } else {
            None
        }
    }

    pub fn eval(&self, v: &[Rational]) -> Rational {
        self.iter().map(|(i, c)| c * &v[i]).sum()
    }

    pub fn scale(&self, k: &Rational) -> Self {
        let mut t = Self::new();
        t.add_scaled(self, k);
        t
    }

    pub fn negate(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(i, c)| (*i, -c)).collect(),
        }
    }

    /// Renames every variable through `f`.
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> Self {
        Self::from_pairs(self.iter().map(|(i, c)| (f(i), c.clone())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Namespace {
    Input,
    Output,
}

/// `term <= bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Conjunct {
    pub term: LinearTerm,
    pub bound: Rational,
}

impl Conjunct {
    pub fn holds(&self, v: &[Rational]) -> bool {
        self.term.eval(v) <= self.bound
    }
}

/// A conjunction of `t <= b` constraints over one variable namespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Specification {
    pub namespace: Namespace,
    pub conjuncts: Vec<Conjunct>,
}

impl Specification {
    /// The empty conjunction, equivalent to ⊤.
    pub fn new(namespace: Namespace) -> Self {
        Self {
            namespace,
            conjuncts: Vec::new(),
        }
    }

    /// `x0 + (-x0) = 0`, lowered.
    pub fn top(namespace: Namespace) -> Self {
        let mut s = Self::new(namespace);
        s.push_top();
        s
    }

    /// `x0 + (-x0) = 1`, lowered.
    pub fn bottom(namespace: Namespace) -> Self {
        let mut s = Self::new(namespace);
        s.push_eq(LinearTerm::new(), Rational::one());
        s
    }

    fn push_top(&mut self) {
        self.push_eq(LinearTerm::new(), Rational::zero());
    }

    pub fn push_le(&mut self, term: LinearTerm, bound: Rational) {
        self.conjuncts.push(Conjunct { term, bound });
    }

    /// `t >= b` becomes `-t <= -b`.
    pub fn push_ge(&mut self, term: LinearTerm, bound: Rational) {
        self.push_le(term.negate(), -bound);
    }

    /// `t = b` becomes `t <= b` and `-t <= -b`.
    pub fn push_eq(&mut self, term: LinearTerm, bound: Rational) {
        let neg = term.negate();
        let nb = -&bound;
        self.push_le(term, bound);
        self.push_le(neg, nb);
    }

    pub fn push_bounds(&mut self, i: usize, lo: Rational, hi: Rational) {
        self.push_ge(LinearTerm::var(i), lo);
        self.push_le(LinearTerm::var(i), hi);
    }

    pub fn with_eq(mut self, term: LinearTerm, bound: Rational) -> Self {
        self.push_eq(term, bound);
        self
    }

    pub fn with_le(mut self, term: LinearTerm, bound: Rational) -> Self {
        self.push_le(term, bound);
        self
    }

    pub fn with_ge(mut self, term: LinearTerm, bound: Rational) -> Self {
        self.push_ge(term, bound);
        self
    }

    pub fn len(&self) -> usize {
        self.conjuncts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conjuncts.is_empty()
    }

    pub fn max_var(&self) -> Option<usize> {
        self.conjuncts.iter().filter_map(|c| c.term.max_var()).max()
    }

    /// Every variable id is below `dim`.
    pub fn fits(&self, dim: usize) -> bool {
        self.max_var().is_none_or(|m| m < dim)
    }

    /// Every conjunct mentions at most one variable. Conjuncts with an empty
    /// term (from lowering ⊤ and ⊥) count as simple.
    pub fn is_simple(&self) -> bool {
        self.conjuncts.iter().all(|c| c.term.len() <= 1)
    }

    /// Exact truth under `v`; values beyond the largest variable are ignored.
    pub fn check(&self, v: &[Rational]) -> bool {
        self.conjuncts.iter().all(|c| c.holds(v))
    }

    /// Per-variable bounds implied by the one-variable conjuncts alone.
    pub fn box_bounds(&self, dim: usize) -> Vec<(Option<Rational>, Option<Rational>)> {
        let mut out = vec![(None::<Rational>, None::<Rational>); dim];
        for c in &self.conjuncts {
            let Some((i, a)) = c.term.single() else { continue };
            if i >= dim {
                continue;
            }
            let v = &c.bound / a;
            let slot = &mut out[i];
            if a.is_positive() {
                if slot.1.as_ref().is_none_or(|h| v < *h) {
                    slot.1 = Some(v);
                }
            } else if slot.0.as_ref().is_none_or(|l| v > *l) {
                slot.0 = Some(v);
            }
        }
        out
    }

    /// Parses the text format. `resolve` maps a variable name to its index.
    pub fn parse_with(
        text: &str,
        namespace: Namespace,
        resolve: impl Fn(&str) -> Option<usize>,
    ) -> Result<Self, SpecParseError> {
        let mut spec = Self::new(namespace);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            parse_line(line, n + 1, &resolve, &mut spec)?;
        }
        Ok(spec)
    }

    /// Input specification over `x0, x1, …`.
    pub fn parse_input(text: &str) -> Result<Self, SpecParseError> {
        Self::parse_with(text, Namespace::Input, |name| indexed(name, "x"))
    }

    /// Output specification over the given output names, falling back to
    /// `y0, y1, …`.
    pub fn parse_output(text: &str, names: Option<&[String]>) -> Result<Self, SpecParseError> {
        Self::parse_with(text, Namespace::Output, |name| {
            names
                .and_then(|ns| ns.iter().position(|n| n == name))
                .or_else(|| indexed(name, "y"))
        })
    }

    /// Renders the text format. Adjacent `t <= b`, `-t <= -b` pairs are
    /// written as one `==` line.
    pub fn to_text(&self, names: Option<&[String]>) -> String {
        let default_prefix = match self.namespace {
            Namespace::Input => "x",
            Namespace::Output => "y",
        };
        let name = |i: usize| -> String {
            names
                .and_then(|ns| ns.get(i).cloned())
                .unwrap_or_else(|| format!("{default_prefix}{i}"))
        };
        let mut out = String::new();
        let mut k = 0;
        while k < self.conjuncts.len() {
            let c = &self.conjuncts[k];
            let paired = self.conjuncts.get(k + 1).is_some_and(|d| {
                d.term == c.term.negate() && d.bound == -&c.bound
            });
            let flip = !paired && !c.term.is_empty() && c.term.iter().all(|(_, a)| a.is_negative());
            let (term, bound) = if flip {
                (c.term.negate(), -&c.bound)
            } else {
                (c.term.clone(), c.bound.clone())
            };
            let rel = match (paired, flip) {
                (true, _) => "==",
                (false, true) => ">=",
                (false, false) => "<=",
            };
            if paired && term.is_empty() {
                out.push_str(if bound.is_zero() { "true\n" } else { "false\n" });
                k += 2;
                continue;
            }
            out.push_str(&format!("{} {rel} {bound}\n", render_term(&term, &name)));
            k += if paired { 2 } else { 1 };
        }
        out
    }
}

fn indexed(name: &str, prefix: &str) -> Option<usize> {
    let digits = name.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn render_term(term: &LinearTerm, name: &dyn Fn(usize) -> String) -> String {
    if term.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (k, (i, c)) in term.iter().enumerate() {
        let (sign, mag) = if c.is_negative() { ("-", -c) } else { ("+", c.clone()) };
        match (k, sign) {
            (0, "+") => {}
            (0, _) => s.push('-'),
            _ => s.push_str(&format!(" {sign} ")),
        }
        if mag.is_one() {
            s.push_str(&name(i));
        } else {
            s.push_str(&format!("{mag}*{}", name(i)));
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {msg}")]
pub struct SpecParseError {
    pub line: usize,
    pub column: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Le,
    Ge,
    Eq,
}

fn lex(line: &str, lineno: usize) -> Result<Vec<(usize, Tok)>, SpecParseError> {
    let err = |column: usize, msg: String| SpecParseError {
        line: lineno,
        column,
        msg,
    };
    let bytes = line.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let col = i + 1;
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' => i += 1,
            b'+' => {
                toks.push((col, Tok::Plus));
                i += 1;
            }
            b'-' => {
                toks.push((col, Tok::Minus));
                i += 1;
            }
            b'*' => {
                toks.push((col, Tok::Star));
                i += 1;
            }
            b'<' | b'>' | b'=' => {
                let two = bytes.get(i + 1) == Some(&b'=');
                let tok = match (b, two) {
                    (b'<', true) => Tok::Le,
                    (b'>', true) => Tok::Ge,
                    (b'=', _) => Tok::Eq,
                    _ => return Err(err(col, "strict comparisons are not part of the grammar".into())),
                };
                toks.push((col, tok));
                i += if two { 2 } else { 1 };
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'/' || bytes[i] == b'.') {
                    i += 1;
                }
                let text = &line[start..i];
                let v: Rational = text.parse().map_err(|_| err(col, format!("bad number `{text}`")))?;
                toks.push((col, Tok::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push((col, Tok::Ident(line[start..i].to_string())));
            }
            _ => return Err(err(col, format!("unexpected character `{}`", b as char))),
        }
    }
    Ok(toks)
}

fn parse_line(
    line: &str,
    lineno: usize,
    resolve: &dyn Fn(&str) -> Option<usize>,
    spec: &mut Specification,
) -> Result<(), SpecParseError> {
    let toks = lex(line, lineno)?;
    let err = |column: usize, msg: &str| SpecParseError {
        line: lineno,
        column,
        msg: msg.to_string(),
    };
    if let [(_, Tok::Ident(word))] = toks.as_slice() {
        match word.as_str() {
            "true" => {
                spec.push_top();
                return Ok(());
            }
            "false" => {
                spec.push_eq(LinearTerm::new(), Rational::one());
                return Ok(());
            }
            _ => {}
        }
    }
    let rel_pos = toks
        .iter()
        .position(|(_, t)| matches!(t, Tok::Le | Tok::Ge | Tok::Eq))
        .ok_or_else(|| err(line.len().max(1), "missing relation (<=, >=, ==)"))?;
    let term = parse_term(&toks[..rel_pos], toks[rel_pos].0, lineno, resolve)?;
    let rhs = &toks[rel_pos + 1..];
    let end_col = line.len() + 1;
    let bound = match rhs {
        [(_, Tok::Num(v))] => v.clone(),
        [(_, Tok::Minus), (_, Tok::Num(v))] => -v,
        [] => return Err(err(end_col, "missing right-hand side")),
        [(c, _), ..] => return Err(err(*c, "right-hand side must be a single rational constant")),
    };
    match toks[rel_pos].1 {
        Tok::Le => spec.push_le(term, bound),
        Tok::Ge => spec.push_ge(term, bound),
        _ => spec.push_eq(term, bound),
    }
    Ok(())
}

fn parse_term(
    toks: &[(usize, Tok)],
    end_col: usize,
    lineno: usize,
    resolve: &dyn Fn(&str) -> Option<usize>,
) -> Result<LinearTerm, SpecParseError> {
    let err = |column: usize, msg: String| SpecParseError {
        line: lineno,
        column,
        msg,
    };
    let mut term = LinearTerm::new();
    let mut k = 0;
    let mut first = true;
    if toks.is_empty() {
        return Err(err(end_col, "empty left-hand side".into()));
    }
    while k < toks.len() {
        let mut sign = Rational::one();
        match &toks[k].1 {
            Tok::Plus if !first => k += 1,
            Tok::Minus => {
                sign = -sign;
                k += 1;
            }
            _ if first => {}
            _ => return Err(err(toks[k].0, "expected `+` or `-`".into())),
        }
        first = false;
        let col = toks.get(k).map_or(end_col, |t| t.0);
        let (coef, name) = match &toks[k..] {
            [(_, Tok::Num(c)), (_, Tok::Star), (_, Tok::Ident(n)), ..] => {
                k += 3;
                (c.clone(), Some(n))
            }
            [(_, Tok::Ident(n)), ..] => {
                k += 1;
                (Rational::one(), Some(n))
            }
            [(_, Tok::Num(c)), ..] if c.is_zero() => {
                k += 1;
                (Rational::zero(), None)
            }
            _ => return Err(err(col, "expected `c*var` or `var`".into())),
        };
        if let Some(name) = name {
            let i = resolve(name).ok_or_else(|| err(col, format!("unknown variable `{name}`")))?;
            term.add(i, &(&sign * &coef));
        }
    }
    Ok(term)
}

impl fmt::Display for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text(None))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    #[test]
    fn top_and_bottom() {
        let v = [qi(5)];
        assert!(Specification::top(Namespace::Input).check(&v));
        assert!(!Specification::bottom(Namespace::Input).check(&v));
        assert!(Specification::parse_input("true").unwrap().check(&v));
        assert!(!Specification::parse_input("false\n").unwrap().check(&v));
    }

    #[test]
    fn box_check() {
        let s = Specification::parse_input("x0 >= 0\nx0 <= 1").unwrap();
        assert!(s.check(&[q(1, 2)]));
        assert!(!s.check(&[qi(2)]));
        assert!(s.is_simple());
        assert_eq!(s.box_bounds(1), vec![(Some(qi(0)), Some(qi(1)))]);
    }

    #[test]
    fn equality_sugar() {
        let s = Specification::parse_input("x0 + 2*x1 == 3/2").unwrap();
        let t = LinearTerm::from_pairs([(0, qi(1)), (1, qi(2))]);
        assert_eq!(
            s.conjuncts,
            vec![
                Conjunct { term: t.clone(), bound: q(3, 2) },
                Conjunct { term: t.negate(), bound: q(-3, 2) },
            ]
        );
        assert!(!s.is_simple());
    }

    #[test]
    fn extra_values_ignored() {
        let s = Specification::parse_input("x0 <= 1").unwrap();
        assert!(s.check(&[qi(0), qi(100)]));
    }

    #[test]
    fn comments_and_repeats() {
        let s = Specification::parse_input("# header\n x1 - x1 + 3*x1 <= 6 # tail\n").unwrap();
        assert_eq!(s.conjuncts[0].term, LinearTerm::scaled_var(1, qi(3)));
    }

    #[test]
    fn output_names() {
        let names: Vec<String> = ["z0", "z1", "y"].iter().map(|s| s.to_string()).collect();
        let s = Specification::parse_output("z1 == 0\ny == 3", Some(&names)).unwrap();
        assert_eq!(s.conjuncts[0].term, LinearTerm::var(1));
        assert_eq!(s.conjuncts[2].term, LinearTerm::var(2));
        assert!(s.check(&[qi(9), qi(0), qi(3)]));
        let text = s.to_text(Some(&names));
        assert_eq!(text, "z1 == 0\ny == 3\n");
        assert_eq!(Specification::parse_output(&text, Some(&names)).unwrap(), s);
    }

    #[test]
    fn errors_carry_position() {
        let e = Specification::parse_input("x0 <= 1\nx0 + <= 2").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(e.column, 6);
        let e = Specification::parse_input("x0 < 1").unwrap_err();
        assert_eq!((e.line, e.column), (1, 4));
        let e = Specification::parse_input("w3 <= 1").unwrap_err();
        assert!(e.msg.contains("unknown variable"));
        assert!(Specification::parse_input("x0 <= x1").is_err());
        assert!(Specification::parse_input("x0 1").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut s = Specification::new(Namespace::Input);
        s.push_le(LinearTerm::from_pairs([(0, q(1, 2)), (2, qi(-3))]), q(7, 3));
        s.push_ge(LinearTerm::var(1), qi(-4));
        s.push_eq(LinearTerm::from_pairs([(0, qi(1)), (1, qi(1))]), qi(0));
        s.push_top();
        s.push_eq(LinearTerm::new(), qi(1));
        let text = s.to_text(None);
        assert_eq!(Specification::parse_input(&text).unwrap(), s);
    }
}
