//! Noncommutative *-polynomials: parsing, normalization, adjoints and
//! evaluation on matrices.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := ("+"|"-")? term (("+"|"-") term)*
//! term   := factor ("*" factor)*
//! factor := atom ("^" uint)? ("'")?
//! atom   := ident | number | number "i" | "(" expr ")"
//! ```
//!
//! `x'` is the adjoint of `x`; `2i`, `1.5i` are imaginary literals.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use crate::cmat::{CMatrix, C64};
use crate::error::{Error, Result};

/// Largest exponent accepted by `^`.
const MAX_POWER: u64 = 64;

/// A variable occurrence, possibly adjoined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub var: usize,
    pub starred: bool,
}

impl Letter {
    pub fn new(var: usize) -> Self {
        Letter {
            var,
            starred: false,
        }
    }
}

/// An ordered product of letters; the empty word is the unit.
///
/// Ordered by length first, then lexicographically, so that printed
/// polynomials list lower degrees first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reversed word with every star toggled.
    pub fn adjoint(&self) -> Word {
        Word(
            self.0
                .iter()
                .rev()
                .map(|l| Letter {
                    var: l.var,
                    starred: !l.starred,
                })
                .collect(),
        )
    }

    fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Normalized noncommutative polynomial with complex coefficients.
///
/// Terms are merged by word and exact zeros are dropped. The variable list is
/// the declaration order and never changes under arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct NcPolynomial {
    vars: Vec<String>,
    terms: BTreeMap<Word, C64>,
}

/// Matrices substituted for the variables, keyed by name.
pub type Assignment = BTreeMap<String, CMatrix>;

impl NcPolynomial {
    pub fn zero(vars: &[impl AsRef<str>]) -> Self {
        NcPolynomial {
            vars: vars.iter().map(|v| v.as_ref().to_string()).collect(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &[impl AsRef<str>], c: C64) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(Word::default(), c);
        p
    }

    /// The polynomial consisting of the single variable `name`.
    pub fn variable(vars: &[impl AsRef<str>], name: &str) -> Result<Self> {
        let mut p = Self::zero(vars);
        let idx = p.var_index(name).ok_or_else(|| Error::Undeclared {
            name: name.to_string(),
            pos: 0,
        })?;
        p.add_term(Word(vec![Letter::new(idx)]), C64::new(1.0, 0.0));
        Ok(p)
    }

    /// Builds a polynomial from explicit terms; words refer to indices into
    /// `vars`.
    pub fn from_terms(
        vars: &[impl AsRef<str>],
        terms: impl IntoIterator<Item = (C64, Word)>,
    ) -> Result<Self> {
        let mut p = Self::zero(vars);
        for (c, w) in terms {
            if let Some(l) = w.0.iter().find(|l| l.var >= p.vars.len()) {
                return Err(Error::Dimension(format!(
                    "letter refers to variable {} of {}",
                    l.var,
                    p.vars.len()
                )));
            }
            p.add_term(w, c);
        }
        Ok(p)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, C64)> {
        self.terms.iter().map(|(w, &c)| (w, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, word: &Word) -> C64 {
        self.terms.get(word).copied().unwrap_or_default()
    }

    pub fn constant_term(&self) -> C64 {
        self.coefficient(&Word::default())
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    /// Sum of word lengths over all terms.
    pub fn total_letters(&self) -> usize {
        self.terms.keys().map(Word::len).sum()
    }

    /// Indices of the variables that occur in some term.
    pub fn used_vars(&self) -> Vec<usize> {
        let mut used = vec![false; self.vars.len()];
        for w in self.terms.keys() {
            for l in &w.0 {
                used[l.var] = true;
            }
        }
        (0..self.vars.len()).filter(|&i| used[i]).collect()
    }

    fn add_term(&mut self, w: Word, c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        match self.terms.entry(w) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = *e.get() + c;
                if sum == C64::new(0.0, 0.0) {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn check_vars(&self, other: &NcPolynomial) {
        assert_eq!(
            self.vars, other.vars,
            "polynomials over different variable lists"
        );
    }

    pub fn add(&self, other: &NcPolynomial) -> NcPolynomial {
        self.check_vars(other);
        let mut out = self.clone();
        for (w, &c) in &other.terms {
            out.add_term(w.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &NcPolynomial) -> NcPolynomial {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &NcPolynomial) -> NcPolynomial {
        self.check_vars(other);
        let mut out = NcPolynomial::zero(&self.vars);
        for (w1, &c1) in &self.terms {
            for (w2, &c2) in &other.terms {
                out.add_term(w1.concat(w2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, z: C64) -> NcPolynomial {
        let mut out = NcPolynomial::zero(&self.vars);
        for (w, &c) in &self.terms {
            out.add_term(w.clone(), c * z);
        }
        out
    }

    pub fn pow(&self, k: u64) -> NcPolynomial {
        let mut out = NcPolynomial::constant(&self.vars, C64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// The adjoint: reverse each word, toggle stars, conjugate coefficients.
    pub fn star(&self) -> NcPolynomial {
        let mut out = NcPolynomial::zero(&self.vars);
        for (w, &c) in &self.terms {
            out.add_term(w.adjoint(), c.conj());
        }
        out
    }

    /// Drops every star, i.e. treats all variables as selfadjoint.
    pub fn strip_stars(&self) -> NcPolynomial {
        let mut out = NcPolynomial::zero(&self.vars);
        for (w, &c) in &self.terms {
            let plain = Word(w.0.iter().map(|l| Letter::new(l.var)).collect());
            out.add_term(plain, c);
        }
        out
    }

    /// `p* == p` with all declared variables selfadjoint.
    pub fn is_selfadjoint(&self) -> bool {
        let p = self.strip_stars();
        let q = p.star().strip_stars();
        let scale = p.terms.values().map(|c| c.norm()).fold(0.0, f64::max);
        let tol = 1e-12 * scale.max(1.0);
        let close = |a: &NcPolynomial, b: &NcPolynomial| {
            a.terms
                .iter()
                .all(|(w, &c)| (c - b.coefficient(w)).norm() <= tol)
        };
        close(&p, &q) && close(&q, &p)
    }

    /// Exact noncommutative evaluation; starred letters evaluate to the
    /// conjugate transpose. The size is taken from the assignment.
    pub fn eval_on_matrices(&self, assignment: &Assignment) -> Result<CMatrix> {
        let m = match assignment.values().next() {
            Some(a) => a.dim(),
            None => {
                if self.degree() == 0 {
                    return Err(Error::Dimension(
                        "empty assignment: matrix size unknown".into(),
                    ));
                }
                return Err(Error::MissingAssignment(self.vars[self.used_vars()[0]].clone()));
            }
        };
        for (name, a) in assignment {
            if a.dim() != m {
                return Err(Error::Dimension(format!(
                    "matrix for `{name}` is {}x{}, expected {m}x{m}",
                    a.dim(),
                    a.dim()
                )));
            }
        }
        let mut mats: Vec<Option<(CMatrix, CMatrix)>> = vec![None; self.vars.len()];
        for v in self.used_vars() {
            let a = assignment
                .get(&self.vars[v])
                .ok_or_else(|| Error::MissingAssignment(self.vars[v].clone()))?;
            mats[v] = Some((a.clone(), a.adjoint()));
        }
        let letter = |l: &Letter| -> &CMatrix {
            let (a, astar) = mats[l.var].as_ref().expect("checked above");
            if l.starred {
                astar
            } else {
                a
            }
        };
        // Visit words in lexicographic order and reuse shared prefixes.
        let mut words: Vec<(&Word, C64)> = self.terms.iter().map(|(w, &c)| (w, c)).collect();
        words.sort_by(|a, b| a.0 .0.cmp(&b.0 .0));
        let mut out = CMatrix::zeros(m);
        let mut stack: Vec<(Letter, CMatrix)> = Vec::new();
        for (w, c) in words {
            let common = stack
                .iter()
                .zip(&w.0)
                .take_while(|((l1, _), l2)| l1 == *l2)
                .count();
            stack.truncate(common);
            for l in &w.0[common..] {
                let next = match stack.last() {
                    Some((_, prev)) => prev.matmul(letter(l)),
                    None => letter(l).clone(),
                };
                stack.push((*l, next));
            }
            match stack.last() {
                Some((_, prod)) => out += &prod.scale(c),
                None => out += &CMatrix::scalar(m, c),
            }
        }
        Ok(out)
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x}")
}

fn fmt_word(w: &Word, vars: &[String]) -> String {
    w.0.iter()
        .map(|l| {
            if l.starred {
                format!("{}'", vars[l.var])
            } else {
                vars[l.var].clone()
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

impl fmt::Display for NcPolynomial {
    /// Prints in the input grammar; parsing the output reproduces `self`
    /// exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (w, &c)) in self.terms.iter().enumerate() {
            let first = k == 0;
            let (negative, body) = if c.im == 0.0 {
                (c.re < 0.0, fmt_real(c.re.abs()))
            } else if c.re == 0.0 {
                (c.im < 0.0, format!("{}i", fmt_real(c.im.abs())))
            } else {
                let sign = if c.im < 0.0 { '-' } else { '+' };
                (
                    false,
                    format!("({}{}{}i)", fmt_real(c.re), sign, fmt_real(c.im.abs())),
                )
            };
            match (first, negative) {
                (true, true) => write!(f, "-")?,
                (true, false) => {}
                (false, true) => write!(f, " - ")?,
                (false, false) => write!(f, " + ")?,
            }
            let unit = c.im == 0.0 && c.re.abs() == 1.0;
            if w.is_empty() {
                write!(f, "{body}")?;
            } else if unit {
                write!(f, "{}", fmt_word(w, &self.vars))?;
            } else {
                write!(f, "{body}*{}", fmt_word(w, &self.vars))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number { value: f64, integer: Option<u64> },
    Imag(f64),
    Plus,
    Minus,
    Star,
    Caret,
    Prime,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        if ch.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let simple = match ch {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '^' => Some(Tok::Caret),
            '\'' => Some(Tok::Prime),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, start));
            i += 1;
            continue;
        }
        if ch.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        if ch.is_ascii_digit() || ch == '.' {
            let mut is_int = true;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                is_int = false;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    is_int = false;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| Error::Syntax {
                pos: start,
                msg: format!("malformed number `{lit}`"),
            })?;
            let imaginary = i < bytes.len()
                && bytes[i] == b'i'
                && !(i + 1 < bytes.len()
                    && (bytes[i + 1].is_ascii_alphanumeric() || bytes[i + 1] == b'_'));
            if imaginary {
                i += 1;
                out.push((Tok::Imag(value), start));
            } else {
                let integer = if is_int { lit.parse::<u64>().ok() } else { None };
                out.push((Tok::Number { value, integer }, start));
            }
            continue;
        }
        return Err(Error::Syntax {
            pos: start,
            msg: format!("unexpected character `{ch}`"),
        });
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    vars: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.here(),
            msg: msg.into(),
        })
    }

    fn expr(&mut self) -> Result<NcPolynomial> {
        let negate = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                true
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        let mut acc = self.term()?;
        if negate {
            acc = acc.scale(C64::new(-1.0, 0.0));
        }
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<NcPolynomial> {
        let mut acc = self.factor()?;
        while let Some(Tok::Star) = self.peek() {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<NcPolynomial> {
        let mut base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            match self.peek().cloned() {
                Some(Tok::Number {
                    integer: Some(k), ..
                }) if k <= MAX_POWER => {
                    self.pos += 1;
                    base = base.pow(k);
                }
                Some(Tok::Number {
                    integer: Some(k), ..
                }) => return self.syntax(format!("exponent {k} exceeds {MAX_POWER}")),
                _ => return self.syntax("expected a non-negative integer exponent after `^`"),
            }
        }
        if let Some(Tok::Prime) = self.peek() {
            self.pos += 1;
            base = base.star();
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<NcPolynomial> {
        let pos = self.here();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                NcPolynomial::variable(self.vars, &name).map_err(|_| Error::Undeclared { name, pos })
            }
            Some(Tok::Number { value, .. }) => {
                self.pos += 1;
                Ok(NcPolynomial::constant(self.vars, C64::new(value, 0.0)))
            }
            Some(Tok::Imag(value)) => {
                self.pos += 1;
                Ok(NcPolynomial::constant(self.vars, C64::new(0.0, value)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => self.syntax("expected `)`"),
                }
            }
            Some(t) => self.syntax(format!("unexpected token {t:?}")),
            None => self.syntax("unexpected end of input"),
        }
    }
}

/// Parses `text` over the declared variables and normalizes the result.
pub fn parse(text: &str, declared_vars: &[impl AsRef<str>]) -> Result<NcPolynomial> {
    let vars: Vec<String> = declared_vars.iter().map(|v| v.as_ref().to_string()).collect();
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        vars: &vars,
    };
    let poly = p.expr()?;
    if p.pos != p.toks.len() {
        return p.syntax("unexpected trailing input");
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn w(letters: &[(usize, bool)]) -> Word {
        Word(
            letters
                .iter()
                .map(|&(var, starred)| Letter { var, starred })
                .collect(),
        )
    }

    #[test]
    fn parses_quadratic_example() {
        let p = parse("x*y + y*x + x^2", &["x", "y"]).unwrap();
        assert_eq!(p.num_terms(), 3);
        assert_eq!(p.coefficient(&w(&[(0, false), (1, false)])), c(1.0, 0.0));
        assert_eq!(p.coefficient(&w(&[(1, false), (0, false)])), c(1.0, 0.0));
        assert_eq!(p.coefficient(&w(&[(0, false), (0, false)])), c(1.0, 0.0));
    }

    #[test]
    fn cancellation_gives_zero() {
        let p = parse("x - x", &["x"]).unwrap();
        assert_eq!(p.num_terms(), 0);
        assert_eq!(p.to_string(), "0");
    }

    #[test]
    fn imaginary_literal_and_adjoint() {
        let p = parse("2i*x*y'", &["x", "y"]).unwrap();
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.coefficient(&w(&[(0, false), (1, true)])), c(0.0, 2.0));
    }

    #[test]
    fn complex_coefficients_and_powers() {
        let p = parse("(1 - 0.5i)*(x + y)^2 + 3", &["x", "y"]).unwrap();
        assert_eq!(p.num_terms(), 5);
        assert_eq!(p.constant_term(), c(3.0, 0.0));
        assert_eq!(p.coefficient(&w(&[(0, false), (1, false)])), c(1.0, -0.5));
        let q = parse("x^0", &["x"]).unwrap();
        assert_eq!(q.constant_term(), c(1.0, 0.0));
        let r = parse("(x*y)'", &["x", "y"]).unwrap();
        assert_eq!(r.coefficient(&w(&[(1, true), (0, true)])), c(1.0, 0.0));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse("", &["x"]), Err(Error::EmptyInput));
        assert_eq!(parse("   ", &["x"]), Err(Error::EmptyInput));
        assert!(matches!(
            parse("x*z", &["x"]),
            Err(Error::Undeclared { ref name, pos: 2 }) if name == "z"
        ));
        assert!(matches!(parse("x*", &["x"]), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(parse("x y", &["x", "y"]), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(parse("(x", &["x"]), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x^1.5", &["x"]), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x # y", &["x", "y"]), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(parse("i*x", &["x"]), Err(Error::Undeclared { .. })));
    }

    #[test]
    fn star_examples() {
        let p = parse("x*y + y*x + x^2", &["x", "y"]).unwrap();
        assert_eq!(p.star().strip_stars(), p);
        assert!(p.is_selfadjoint());

        let q = parse("x*y", &["x", "y"]).unwrap();
        let qs = q.star().strip_stars();
        assert_eq!(qs, parse("y*x", &["x", "y"]).unwrap());
        assert_ne!(qs, q);
        assert!(!q.is_selfadjoint());

        let r = parse("1i*x", &["x"]).unwrap();
        assert_eq!(r.star().strip_stars(), parse("-1i*x", &["x"]).unwrap());
        assert!(!r.is_selfadjoint());

        let s = parse("(1+2i)*x*y + (1-2i)*y*x", &["x", "y"]).unwrap();
        assert!(s.is_selfadjoint());
        assert!(parse("x + 1i*y", &["x", "y"]).map(|p| !p.is_selfadjoint()).unwrap());
    }

    #[test]
    fn evaluation_examples() {
        let p = parse("x*y + y*x + x^2", &["x", "y"]).unwrap();
        let mut a = Assignment::new();
        a.insert("x".into(), CMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap());
        a.insert("y".into(), CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
        let v = p.eval_on_matrices(&a).unwrap();
        let expected = CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(v, expected);

        let one = parse("1", &["x", "y"]).unwrap();
        assert_eq!(one.eval_on_matrices(&a).unwrap(), CMatrix::identity(2));

        let h = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(2.0, -1.0)], vec![c(2.0, 1.0), c(-3.0, 0.0)]])
            .unwrap();
        let mut b = Assignment::new();
        b.insert("x".into(), h);
        let z = parse("x - x'", &["x"]).unwrap();
        assert!(z.eval_on_matrices(&b).unwrap().is_zero());
    }

    #[test]
    fn evaluation_errors() {
        let p = parse("x*y", &["x", "y"]).unwrap();
        let mut a = Assignment::new();
        a.insert("x".into(), CMatrix::identity(2));
        assert_eq!(
            p.eval_on_matrices(&a),
            Err(Error::MissingAssignment("y".into()))
        );
        a.insert("y".into(), CMatrix::identity(3));
        assert!(matches!(p.eval_on_matrices(&a), Err(Error::Dimension(_))));
    }

    #[test]
    fn display_round_trips() {
        let vars = ["x", "y", "z"];
        for text in [
            "x*y + y*x + x^2",
            "-x + 2.5*y' - 0.1i*z*x",
            "(0.3-1.7i)*x*y*z + 7 - y^3",
            "1e-20*x + 12345678.875*y",
        ] {
            let p = parse(text, &vars).unwrap();
            let printed = p.to_string();
            let q = parse(&printed, &vars).unwrap();
            assert_eq!(p, q, "{text} -> {printed}");
            assert_eq!(q.to_string(), printed);
        }
    }

    fn arb_poly() -> impl Strategy<Value = NcPolynomial> {
        let letter = (0usize..3, any::<bool>()).prop_map(|(var, starred)| Letter { var, starred });
        let term = (
            -3.0f64..3.0,
            -3.0f64..3.0,
            proptest::collection::vec(letter, 0..5),
        )
            .prop_map(|(re, im, ls)| (C64::new(re, im), Word(ls)));
        proptest::collection::vec(term, 0..6)
            .prop_map(|ts| NcPolynomial::from_terms(&["x", "y", "z"], ts).unwrap())
    }

    fn random_matrix(n: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    proptest! {
        #[test]
        fn star_is_an_involution(p in arb_poly()) {
            prop_assert_eq!(p.star().star(), p);
        }

        #[test]
        fn print_parse_is_identity(p in arb_poly()) {
            let q = parse(&p.to_string(), &["x", "y", "z"]).unwrap();
            prop_assert_eq!(q, p);
        }

        #[test]
        fn evaluation_commutes_with_adjoint(p in arb_poly(), seed in 0u64..10_000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut a = Assignment::new();
            for v in ["x", "y", "z"] {
                a.insert(v.into(), random_matrix(3, &mut rng));
            }
            let lhs = p.star().eval_on_matrices(&a).unwrap();
            let rhs = p.eval_on_matrices(&a).unwrap().adjoint();
            prop_assert!((&lhs - &rhs).norm_fro() <= 1e-12 * (1.0 + rhs.norm_fro()));
        }
    }
}
