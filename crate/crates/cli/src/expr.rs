//! The initial-data mini-language.
//!
//! Either a sum of products like `0.1*cos(x) - 0.05*cos(2*x)*cos(y) + 0.3`, or the
//! tuple form `a,k1[,k2];a,k1[,k2]` meaning `Σ a·cos(k1·v1)·cos(k2·v2)` over the
//! command's coordinate variables.

use std::fmt;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq)]
struct Factor {
    func: Func,
    k: f64,
    var: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    amp: f64,
    factors: Vec<Factor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    vars: Vec<String>,
    terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn bad(msg: impl fmt::Display) -> CliError {
    CliError::Invalid(format!("initial data: {msg}"))
}

fn tokenize(s: &str) -> Result<Vec<Tok>, CliError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Tok::Num(text.parse().map_err(|_| bad(format!("bad number `{text}`")))?));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*()".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(bad(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), CliError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(bad(format!("expected `{c}`")))
        }
    }

    fn var(&self, name: &str) -> Result<usize, CliError> {
        self.vars
            .iter()
            .position(|v| v.split('|').any(|alias| alias == name))
            .ok_or_else(|| bad(format!("unknown variable `{name}` (expected one of {})", self.vars.join(", "))))
    }

    fn expr(&mut self) -> Result<Vec<Term>, CliError> {
        let mut terms = Vec::new();
        let mut sign = if self.eat('-') {
            -1.0
        } else {
            self.eat('+');
            1.0
        };
        loop {
            let mut t = self.term()?;
            t.amp *= sign;
            terms.push(t);
            if self.eat('+') {
                sign = 1.0;
            } else if self.eat('-') {
                sign = -1.0;
            } else {
                break;
            }
        }
        if let Some(t) = self.peek() {
            return Err(bad(format!("unexpected `{t:?}`")));
        }
        Ok(terms)
    }

    fn term(&mut self) -> Result<Term, CliError> {
        let mut term = Term { amp: 1.0, factors: Vec::new() };
        loop {
            match self.next() {
                Some(Tok::Num(v)) => term.amp *= v,
                Some(Tok::Ident(name)) => {
                    let func = match name.as_str() {
                        "cos" => Func::Cos,
                        "sin" => Func::Sin,
                        _ => return Err(bad(format!("unknown function `{name}`"))),
                    };
                    self.expect('(')?;
                    let (k, var) = self.argument()?;
                    self.expect(')')?;
                    term.factors.push(Factor { func, k, var });
                }
                _ => return Err(bad("expected a number or cos(...)")),
            }
            if !self.eat('*') {
                return Ok(term);
            }
        }
    }

    /// `k*v`, `v*k` or `v`.
    fn argument(&mut self) -> Result<(f64, usize), CliError> {
        match self.next() {
            Some(Tok::Num(k)) => {
                self.expect('*')?;
                match self.next() {
                    Some(Tok::Ident(v)) => Ok((k, self.var(&v)?)),
                    _ => Err(bad("expected a variable")),
                }
            }
            Some(Tok::Ident(v)) => {
                let var = self.var(&v)?;
                if self.eat('*') {
                    match self.next() {
                        Some(Tok::Num(k)) => Ok((k, var)),
                        _ => Err(bad("expected a wavenumber")),
                    }
                } else {
                    Ok((1.0, var))
                }
            }
            _ => Err(bad("expected `k*variable`")),
        }
    }
}

impl Expr {
    /// `vars` lists the coordinate names in axis order; `x|x1` declares an alias.
    pub fn parse(source: &str, vars: &[&str]) -> Result<Self, CliError> {
        let source = source.trim();
        if source.is_empty() {
            return Err(bad("empty expression"));
        }
        let terms = if source.contains(',') {
            Self::parse_tuples(source, vars)?
        } else {
            Parser { toks: tokenize(source)?, pos: 0, vars }.expr()?
        };
        let vars = vars.iter().map(|v| v.split('|').next().unwrap_or(v).to_string()).collect();
        Ok(Self { vars, terms })
    }

    fn parse_tuples(source: &str, vars: &[&str]) -> Result<Vec<Term>, CliError> {
        let mut terms = Vec::new();
        for group in source.split(';').map(str::trim).filter(|g| !g.is_empty()) {
            let nums: Vec<f64> = group
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| bad(format!("bad tuple entry `{}`", p.trim()))))
                .collect::<Result<_, _>>()?;
            if nums.len() < 2 || nums.len() > vars.len() + 1 {
                return Err(bad(format!("tuple `{group}` needs an amplitude and 1..={} wavenumbers", vars.len())));
            }
            let factors = nums[1..]
                .iter()
                .enumerate()
                .filter(|(_, k)| **k != 0.0)
                .map(|(var, &k)| Factor { func: Func::Cos, k, var })
                .collect();
            terms.push(Term { amp: nums[0], factors });
        }
        Ok(terms)
    }

    pub fn eval(&self, coords: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.factors.iter().fold(t.amp, |acc, f| {
                    let arg = f.k * coords[f.var];
                    acc * match f.func {
                        Func::Cos => arg.cos(),
                        Func::Sin => arg.sin(),
                    }
                })
            })
            .sum()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            match (i, t.amp < 0.0) {
                (0, _) => write!(f, "{}", t.amp)?,
                (_, true) => write!(f, " - {}", -t.amp)?,
                (_, false) => write!(f, " + {}", t.amp)?,
            }
            for fac in &t.factors {
                let name = match fac.func {
                    Func::Cos => "cos",
                    Func::Sin => "sin",
                };
                write!(f, "*{name}({}*{})", fac.k, self.vars[fac.var])?;
            }
        }
        Ok(())
    }
}
