//! Expression trees for structural equations, exogenous maps and
//! transformations.
//!
//! Text form:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor ("*" factor)*
//! factor := NUMBER | IDENT | "-" factor | IDENT "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! with the functions `or`, `and` and `not`. `Display` emits text that parses
//! back to the same tree.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// A reference to a named quantity inside an expression.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// An endogenous variable of a model (or a source coordinate of a
    /// transformation).
    Var(String),
    /// An exogenous variable `E_i`.
    Exo(String),
    /// An independent base noise feeding the exogenous map.
    Noise(String),
}

impl Symbol {
    pub fn name(&self) -> &str {
        match self {
            Symbol::Var(n) | Symbol::Exo(n) | Symbol::Noise(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Exo(String),
    Noise(String),
    Neg(Box<Expr>),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Or(Vec<Expr>),
    And(Vec<Expr>),
    Not(Box<Expr>),
}

/// What kind of symbol a bare identifier denotes in a given scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Var,
    Exo,
    Noise,
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn exo(name: impl Into<String>) -> Expr {
        Expr::Exo(name.into())
    }

    pub fn noise(name: impl Into<String>) -> Expr {
        Expr::Noise(name.into())
    }

    /// Builds `constant + sum(coef * expr)`, dropping zero coefficients and
    /// writing unit coefficients without a multiplication.
    pub fn linear_combination(terms: impl IntoIterator<Item = (f64, Expr)>, constant: f64) -> Expr {
        let mut items: Vec<Expr> = terms
            .into_iter()
            .filter(|(c, _)| *c != 0.0)
            .map(|(c, e)| {
                if c == 1.0 {
                    e
                } else if c == -1.0 {
                    Expr::Neg(Box::new(e))
                } else {
                    Expr::Product(vec![Expr::Const(c), e])
                }
            })
            .collect();
        if constant != 0.0 {
            items.push(Expr::Const(constant));
        }
        match items.len() {
            0 => Expr::Const(0.0),
            1 => items.pop().unwrap(),
            _ => Expr::Sum(items),
        }
    }

    /// Parses `text`, classifying identifiers with `resolve`. Unknown
    /// identifiers are reported with their column.
    pub fn parse(text: &str, resolve: impl Fn(&str) -> Option<SymbolKind>) -> Result<Expr> {
        let tokens = tokenize(text)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            resolve: &resolve,
            end_column: text.chars().count() + 1,
        };
        let expr = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(Error::Parse {
                column: tok.column,
                message: format!("unexpected {}", tok.kind),
            });
        }
        Ok(expr)
    }

    /// Collects like terms when the expression is affine; otherwise returns
    /// it unchanged.
    pub fn simplified(&self) -> Expr {
        match self.affine() {
            Some(a) => a.to_expr(),
            None => self.clone(),
        }
    }

    /// Visits every symbol reference, in tree order.
    pub fn visit_symbols(&self, f: &mut impl FnMut(Symbol)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(n) => f(Symbol::Var(n.clone())),
            Expr::Exo(n) => f(Symbol::Exo(n.clone())),
            Expr::Noise(n) => f(Symbol::Noise(n.clone())),
            Expr::Neg(e) | Expr::Not(e) => e.visit_symbols(f),
            Expr::Sum(v) | Expr::Product(v) | Expr::Or(v) | Expr::And(v) => {
                v.iter().for_each(|e| e.visit_symbols(f))
            }
        }
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.visit_symbols(&mut |s| {
            out.insert(s);
        });
        out
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.symbols()
            .into_iter()
            .filter_map(|s| match s {
                Symbol::Var(n) => Some(n),
                _ => None,
            })
            .collect()
    }

    /// Replaces symbol references for which `f` returns a replacement.
    pub fn substitute(&self, f: &impl Fn(&Symbol) -> Option<Expr>) -> Expr {
        let leaf = |sym: Symbol, original: &Expr| f(&sym).unwrap_or_else(|| original.clone());
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(n) => leaf(Symbol::Var(n.clone()), self),
            Expr::Exo(n) => leaf(Symbol::Exo(n.clone()), self),
            Expr::Noise(n) => leaf(Symbol::Noise(n.clone()), self),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(f))),
            Expr::Not(e) => Expr::Not(Box::new(e.substitute(f))),
            Expr::Sum(v) => Expr::Sum(v.iter().map(|e| e.substitute(f)).collect()),
            Expr::Product(v) => Expr::Product(v.iter().map(|e| e.substitute(f)).collect()),
            Expr::Or(v) => Expr::Or(v.iter().map(|e| e.substitute(f)).collect()),
            Expr::And(v) => Expr::And(v.iter().map(|e| e.substitute(f)).collect()),
        }
    }

    /// Renames variable references through `map`; unmapped names are kept.
    pub fn rename_vars(&self, map: &BTreeMap<String, String>) -> Expr {
        self.substitute(&|s| match s {
            Symbol::Var(n) => map.get(n).map(|m| Expr::Var(m.clone())),
            _ => None,
        })
    }

    /// Returns the affine form of the expression, or `None` if it is not
    /// affine in its symbols.
    pub fn affine(&self) -> Option<Affine> {
        match self {
            Expr::Const(c) => Some(Affine::constant(*c)),
            Expr::Var(n) => Some(Affine::symbol(Symbol::Var(n.clone()))),
            Expr::Exo(n) => Some(Affine::symbol(Symbol::Exo(n.clone()))),
            Expr::Noise(n) => Some(Affine::symbol(Symbol::Noise(n.clone()))),
            Expr::Neg(e) => Some(e.affine()?.scale(-1.0)),
            Expr::Sum(v) => {
                let mut acc = Affine::constant(0.0);
                for e in v {
                    acc = acc.add(&e.affine()?);
                }
                Some(acc)
            }
            Expr::Product(v) => {
                let mut acc = Affine::constant(1.0);
                for e in v {
                    let f = e.affine()?;
                    acc = if acc.is_constant() {
                        f.scale(acc.offset)
                    } else if f.is_constant() {
                        acc.scale(f.offset)
                    } else {
                        return None;
                    };
                }
                Some(acc)
            }
            Expr::Or(_) | Expr::And(_) | Expr::Not(_) => {
                if self.symbols().is_empty() {
                    self.eval_closed().ok().map(Affine::constant)
                } else {
                    None
                }
            }
        }
    }

    fn eval_closed(&self) -> Result<f64> {
        compile(self, &|s| Err(Error::UnresolvedReference(s.name().to_string())))?.eval(&[], &[], &[])
    }

    fn is_atomic(&self) -> bool {
        matches!(
            self,
            Expr::Var(_) | Expr::Exo(_) | Expr::Noise(_) | Expr::Or(_) | Expr::And(_) | Expr::Not(_)
        )
    }
}

/// `offset + sum(coefficient * symbol)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub offset: f64,
    pub coefficients: BTreeMap<Symbol, f64>,
}

impl Affine {
    pub fn constant(c: f64) -> Affine {
        Affine {
            offset: c,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn symbol(s: Symbol) -> Affine {
        Affine {
            offset: 0.0,
            coefficients: BTreeMap::from([(s, 1.0)]),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coefficients.values().all(|c| *c == 0.0)
    }

    pub fn scale(mut self, k: f64) -> Affine {
        self.offset *= k;
        for c in self.coefficients.values_mut() {
            *c *= k;
        }
        self
    }

    pub fn add(mut self, other: &Affine) -> Affine {
        self.offset += other.offset;
        for (s, c) in &other.coefficients {
            *self.coefficients.entry(s.clone()).or_insert(0.0) += c;
        }
        self
    }

    pub fn coefficient(&self, s: &Symbol) -> f64 {
        self.coefficients.get(s).copied().unwrap_or(0.0)
    }

    pub fn to_expr(&self) -> Expr {
        Expr::linear_combination(
            self.coefficients.iter().map(|(s, c)| {
                let e = match s {
                    Symbol::Var(n) => Expr::Var(n.clone()),
                    Symbol::Exo(n) => Expr::Exo(n.clone()),
                    Symbol::Noise(n) => Expr::Noise(n.clone()),
                };
                (*c, e)
            }),
            self.offset,
        )
    }
}

// ---------------------------------------------------------------------------
// Evaluation

/// An expression with symbols resolved to slot indices.
#[derive(Debug, Clone)]
pub(crate) enum Compiled {
    Const(f64),
    Var(usize),
    Exo(usize),
    Noise(usize),
    Neg(Box<Compiled>),
    Sum(Vec<Compiled>),
    Product(Vec<Compiled>),
    Or(Vec<Compiled>),
    And(Vec<Compiled>),
    Not(Box<Compiled>),
}

pub(crate) fn compile(expr: &Expr, slot: &impl Fn(&Symbol) -> Result<usize>) -> Result<Compiled> {
    let many = |v: &[Expr]| v.iter().map(|e| compile(e, slot)).collect::<Result<Vec<_>>>();
    Ok(match expr {
        Expr::Const(c) => Compiled::Const(*c),
        Expr::Var(n) => Compiled::Var(slot(&Symbol::Var(n.clone()))?),
        Expr::Exo(n) => Compiled::Exo(slot(&Symbol::Exo(n.clone()))?),
        Expr::Noise(n) => Compiled::Noise(slot(&Symbol::Noise(n.clone()))?),
        Expr::Neg(e) => Compiled::Neg(Box::new(compile(e, slot)?)),
        Expr::Not(e) => Compiled::Not(Box::new(compile(e, slot)?)),
        Expr::Sum(v) => Compiled::Sum(many(v)?),
        Expr::Product(v) => Compiled::Product(many(v)?),
        Expr::Or(v) => Compiled::Or(many(v)?),
        Expr::And(v) => Compiled::And(many(v)?),
    })
}

fn truth(x: f64) -> Result<bool> {
    if x == 0.0 {
        Ok(false)
    } else if x == 1.0 {
        Ok(true)
    } else {
        Err(Error::Eval(format!("boolean connective applied to non-{{0,1}} value {x}")))
    }
}

fn from_bool(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Compiled {
    pub(crate) fn eval(&self, vars: &[f64], exo: &[f64], noise: &[f64]) -> Result<f64> {
        Ok(match self {
            Compiled::Const(c) => *c,
            Compiled::Var(i) => vars[*i],
            Compiled::Exo(i) => exo[*i],
            Compiled::Noise(i) => noise[*i],
            Compiled::Neg(e) => -e.eval(vars, exo, noise)?,
            Compiled::Sum(v) => {
                let mut acc = 0.0;
                for e in v {
                    acc += e.eval(vars, exo, noise)?;
                }
                acc
            }
            Compiled::Product(v) => {
                let mut acc = 1.0;
                for e in v {
                    acc *= e.eval(vars, exo, noise)?;
                }
                acc
            }
            Compiled::Or(v) => {
                let mut any = false;
                for e in v {
                    any |= truth(e.eval(vars, exo, noise)?)?;
                }
                from_bool(any)
            }
            Compiled::And(v) => {
                let mut all = true;
                for e in v {
                    all &= truth(e.eval(vars, exo, noise)?)?;
                }
                from_bool(all)
            }
            Compiled::Not(e) => from_bool(!truth(e.eval(vars, exo, noise)?)?),
        })
    }
}

// ---------------------------------------------------------------------------
// Printing

fn fmt_number(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let a = c.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        write!(f, "{c:e}")
    } else if c == 0.0 {
        // -0.0 prints as 0
        write!(f, "0")
    } else {
        write!(f, "{c}")
    }
}

struct AsFactor<'a>(&'a Expr);
struct AsTerm<'a>(&'a Expr);

impl fmt::Display for AsFactor<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            e @ (Expr::Sum(_) | Expr::Product(_)) => write!(f, "({e})"),
            e => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for AsTerm<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            e @ Expr::Sum(_) => write!(f, "({e})"),
            e => write!(f, "{e}"),
        }
    }
}

fn write_call(f: &mut fmt::Formatter<'_>, name: &str, args: &[Expr]) -> fmt::Result {
    write!(f, "{name}(")?;
    for (k, a) in args.iter().enumerate() {
        if k > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{a}")?;
    }
    write!(f, ")")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_number(*c, f),
            Expr::Var(n) | Expr::Exo(n) | Expr::Noise(n) => write!(f, "{n}"),
            Expr::Neg(e) => {
                if e.is_atomic() {
                    write!(f, "-{e}")
                } else {
                    write!(f, "-({e})")
                }
            }
            Expr::Sum(v) => {
                for (k, e) in v.iter().enumerate() {
                    match (k, e) {
                        (0, e) => write!(f, "{}", AsTerm(e))?,
                        (_, Expr::Neg(inner)) => write!(f, " - {}", AsTerm(inner))?,
                        (_, e) => write!(f, " + {}", AsTerm(e))?,
                    }
                }
                Ok(())
            }
            Expr::Product(v) => {
                for (k, e) in v.iter().enumerate() {
                    if k > 0 {
                        write!(f, " * ")?;
                    }
                    write!(f, "{}", AsFactor(e))?;
                }
                Ok(())
            }
            Expr::Or(v) => write_call(f, "or", v),
            Expr::And(v) => write_call(f, "and", v),
            Expr::Not(e) => write_call(f, "not", std::slice::from_ref(e)),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Number(n) => write!(f, "number {n}"),
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Plus => write!(f, "`+`"),
            TokenKind::Minus => write!(f, "`-`"),
            TokenKind::Star => write!(f, "`*`"),
            TokenKind::LParen => write!(f, "`(`"),
            TokenKind::RParen => write!(f, "`)`"),
            TokenKind::Comma => write!(f, "`,`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        let simple = match c {
            '+' => Some(TokenKind::Plus),
            '-' => Some(TokenKind::Minus),
            '*' => Some(TokenKind::Star),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            ',' => Some(TokenKind::Comma),
            _ => None,
        };
        if let Some(kind) = simple {
            out.push(Token { kind, column });
            i += 1;
        } else if c.is_whitespace() {
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
            let lexeme: String = chars[start..i].iter().collect();
            let value: f64 = lexeme.parse().map_err(|_| Error::Parse {
                column,
                message: format!("malformed number `{lexeme}`"),
            })?;
            out.push(Token {
                kind: TokenKind::Number(value),
                column,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Ident(chars[start..i].iter().collect()),
                column,
            });
        } else {
            return Err(Error::Parse {
                column,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a, F> {
    tokens: Vec<Token>,
    pos: usize,
    resolve: &'a F,
    end_column: usize,
}

impl<F: Fn(&str) -> Option<SymbolKind>> Parser<'_, F> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().is_some_and(|t| &t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<()> {
        match self.next() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => Err(Error::Parse {
                column: t.column,
                message: format!("expected {kind}, found {}", t.kind),
            }),
            None => Err(Error::Parse {
                column: self.end_column,
                message: format!("expected {kind}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut items = vec![self.term()?];
        loop {
            if self.eat(&TokenKind::Plus) {
                items.push(self.term()?);
            } else if self.eat(&TokenKind::Minus) {
                items.push(Expr::Neg(Box::new(self.term()?)));
            } else {
                break;
            }
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Expr::Sum(items)
        })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut items = vec![self.factor()?];
        while self.eat(&TokenKind::Star) {
            items.push(self.factor()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Expr::Product(items)
        })
    }

    fn factor(&mut self) -> Result<Expr> {
        let Some(tok) = self.next() else {
            return Err(Error::Parse {
                column: self.end_column,
                message: "unexpected end of input".into(),
            });
        };
        match tok.kind {
            TokenKind::Number(n) => Ok(Expr::Const(n)),
            TokenKind::Minus => {
                if let Some(Token {
                    kind: TokenKind::Number(n),
                    ..
                }) = self.peek().cloned()
                {
                    self.pos += 1;
                    Ok(Expr::Const(-n))
                } else {
                    Ok(Expr::Neg(Box::new(self.factor()?)))
                }
            }
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(name) => {
                if self.eat(&TokenKind::LParen) {
                    let mut args = vec![self.expr()?];
                    while self.eat(&TokenKind::Comma) {
                        args.push(self.expr()?);
                    }
                    self.expect(TokenKind::RParen)?;
                    match name.as_str() {
                        "or" => Ok(Expr::Or(args)),
                        "and" => Ok(Expr::And(args)),
                        "not" if args.len() == 1 => Ok(Expr::Not(Box::new(args.pop().unwrap()))),
                        "not" => Err(Error::Parse {
                            column: tok.column,
                            message: format!("`not` takes one argument, got {}", args.len()),
                        }),
                        other => Err(Error::Parse {
                            column: tok.column,
                            message: format!("unknown function `{other}`"),
                        }),
                    }
                } else {
                    match (self.resolve)(&name) {
                        Some(SymbolKind::Var) => Ok(Expr::Var(name)),
                        Some(SymbolKind::Exo) => Ok(Expr::Exo(name)),
                        Some(SymbolKind::Noise) => Ok(Expr::Noise(name)),
                        None => Err(Error::Parse {
                            column: tok.column,
                            message: format!("undeclared identifier `{name}`"),
                        }),
                    }
                }
            }
            other => Err(Error::Parse {
                column: tok.column,
                message: format!("unexpected {other}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scope(name: &str) -> Option<SymbolKind> {
        match name.chars().next()? {
            'X' | 'B' | 'L' => Some(SymbolKind::Var),
            'E' => Some(SymbolKind::Exo),
            'U' => Some(SymbolKind::Noise),
            _ => None,
        }
    }

    fn p(s: &str) -> Expr {
        Expr::parse(s, scope).unwrap()
    }

    #[test]
    fn parses_precedence() {
        assert_eq!(
            p("X1 + 2 * X2 - E1"),
            Expr::Sum(vec![
                Expr::var("X1"),
                Expr::Product(vec![Expr::Const(2.0), Expr::var("X2")]),
                Expr::Neg(Box::new(Expr::exo("E1"))),
            ])
        );
        assert_eq!(p("-3"), Expr::Const(-3.0));
        assert_eq!(p("-(3)"), Expr::Neg(Box::new(Expr::Const(3.0))));
        assert_eq!(p("1e-10"), Expr::Const(1e-10));
        assert_eq!(
            p("or(B1, B2, E3)"),
            Expr::Or(vec![Expr::var("B1"), Expr::var("B2"), Expr::exo("E3")])
        );
    }

    #[test]
    fn reports_columns() {
        match Expr::parse("X1 + Q", scope) {
            Err(Error::Parse { column, message }) => {
                assert_eq!(column, 6);
                assert!(message.contains("`Q`"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(Expr::parse("X1 +", scope), Err(Error::Parse { column: 5, .. })));
        assert!(matches!(Expr::parse("foo(X1)", scope), Err(Error::Parse { column: 1, .. })));
        assert!(matches!(Expr::parse("X1 # 2", scope), Err(Error::Parse { column: 4, .. })));
    }

    #[test]
    fn boolean_connectives_check_operands() {
        let e = p("or(X1, X2)");
        let c = compile(&e, &|s| Ok(if s.name() == "X1" { 0 } else { 1 })).unwrap();
        assert_eq!(c.eval(&[0.0, 1.0], &[], &[]).unwrap(), 1.0);
        assert_eq!(c.eval(&[0.0, 0.0], &[], &[]).unwrap(), 0.0);
        assert!(c.eval(&[0.5, 0.0], &[], &[]).is_err());
        let n = compile(&p("not(and(X1, X2))"), &|s| Ok(if s.name() == "X1" { 0 } else { 1 })).unwrap();
        assert_eq!(n.eval(&[1.0, 1.0], &[], &[]).unwrap(), 0.0);
    }

    #[test]
    fn affine_forms() {
        let a = p("2 * (X1 + 3) - E1 * 0.5").affine().unwrap();
        assert_eq!(a.offset, 6.0);
        assert_eq!(a.coefficient(&Symbol::Var("X1".into())), 2.0);
        assert_eq!(a.coefficient(&Symbol::Exo("E1".into())), -0.5);
        assert!(p("X1 * X2").affine().is_none());
        assert!(p("or(X1, E1)").affine().is_none());
        assert_eq!(p("or(0, 1)").affine().unwrap().offset, 1.0);
    }

    #[test]
    fn substitution_and_rename() {
        let e = p("X3 + 2 * X2");
        let s = e.substitute(&|s| (s == &Symbol::Var("X2".into())).then(|| p("X1 + E2")));
        assert_eq!(s.to_string(), "X3 + 2 * (X1 + E2)");
        let r = e.rename_vars(&BTreeMap::from([("X3".to_string(), "X9".to_string())]));
        assert_eq!(r.variables(), BTreeSet::from(["X2".to_string(), "X9".to_string()]));
    }

    #[test]
    fn linear_combination_is_tidy() {
        let e = Expr::linear_combination(
            [(0.4, Expr::var("X2")), (0.0, Expr::var("X3")), (1.0, Expr::exo("E1"))],
            0.0,
        );
        assert_eq!(e.to_string(), "0.4 * X2 + E1");
        assert_eq!(Expr::linear_combination([], 0.0), Expr::Const(0.0));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-1e3f64..1e3).prop_map(Expr::Const),
            prop::sample::select(vec!["X1", "X2", "B1"]).prop_map(Expr::var),
            prop::sample::select(vec!["E1", "E2"]).prop_map(Expr::exo),
            Just(Expr::noise("U1")),
        ];
        leaf.prop_recursive(4, 24, 4, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Sum),
                prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Product),
                prop::collection::vec(inner.clone(), 1..3).prop_map(Expr::Or),
                inner.prop_map(|e| Expr::Not(Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let text = e.to_string();
            let back = Expr::parse(&text, scope).unwrap();
            prop_assert_eq!(back.to_string(), text.clone());
            // Sum/Product nesting is preserved by parenthesisation, so the
            // tree itself survives.
            prop_assert_eq!(back, e);
        }
    }
}
