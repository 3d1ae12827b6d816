//! A small arithmetic expression language for coefficients in configs.
//!
//! Grammar (usual precedence, `^` right associative):
//!
//! ```text
//!   expr   := term (('+' | '-') term)*
//!   term   := unary (('*' | '/') unary)*
//!   unary  := '-' unary | power
//!   power  := atom ('^' unary)?
//!   atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers are the variables `x`, `y`, `s`, the constants `pi` and `e`,
//! and the functions `sin cos exp log sqrt abs pow min max`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::{Coefficient, Pointwise};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Pow,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "exp" => (Func::Exp, 1),
            "log" => (Func::Log, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "pow" => (Func::Pow, 2),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            _ => return None,
        })
    }
}

const VARS: [&str; 3] = ["x", "y", "s"];

/// A parsed expression in the variables `x`, `y`, `s`.
#[derive(Clone, PartialEq)]
pub struct Expr {
    src: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.src)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: impl fmt::Display) -> Error {
        Error::Config(format!("expression {:?}, column {}: {msg}", self.text, self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => '+',
                Some(b'-') => '-',
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => '*',
                Some(b'/') => '/',
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.error(format!("unexpected character {:?}", c as char))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_digit() || b[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < b.len() && (b[self.pos] == b'+' || b[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < b.len() && b[self.pos].is_ascii_digit() {
                while self.pos < b.len() && b[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = &self.text[start..self.pos];
        text.parse::<f64>().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.error(format!("invalid number {text:?}"))
        })
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        let b = self.bytes;
        while self.pos < b.len() && (b[self.pos].is_ascii_alphanumeric() || b[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        if let Some(k) = VARS.iter().position(|v| *v == name) {
            return Ok(Node::Var(k));
        }
        match name {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            _ => {}
        }
        let Some((func, arity)) = Func::lookup(name) else {
            self.pos = start;
            return Err(self.error(format!("unknown identifier {name:?}")));
        };
        if !self.eat(b'(') {
            return Err(self.error(format!("expected '(' after {name}")));
        }
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        if !self.eat(b')') {
            return Err(self.error("expected ')' or ','"));
        }
        if args.len() != arity {
            return Err(self.error(format!("{name} takes {arity} argument(s), got {}", args.len())));
        }
        Ok(Node::Call(func, args))
    }
}

fn eval(node: &Node, vars: &[f64; 3]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(k) => vars[*k],
        Node::Neg(a) => -eval(a, vars),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, vars), eval(b, vars));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], vars);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Pow => a.powf(eval(&args[1], vars)),
                Func::Min => a.min(eval(&args[1], vars)),
                Func::Max => a.max(eval(&args[1], vars)),
            }
        }
    }
}

fn uses(node: &Node, k: usize) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(j) => *j == k,
        Node::Neg(a) => uses(a, k),
        Node::Bin(_, a, b) => uses(a, k) || uses(b, k),
        Node::Call(_, args) => args.iter().any(|a| uses(a, k)),
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
        };
        let root = p.expr()?;
        if p.peek().is_some() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            src: text.to_string(),
            root,
        })
    }

    pub fn eval(&self, x: f64, y: f64, s: f64) -> f64 {
        eval(&self.root, &[x, y, s])
    }

    /// Whether the variable `name` (`"x"`, `"y"` or `"s"`) occurs.
    pub fn uses(&self, name: &str) -> bool {
        VARS.iter()
            .position(|v| *v == name)
            .is_some_and(|k| uses(&self.root, k))
    }

    /// Rejects expressions that mention `s` where only x, y make sense.
    pub fn into_coefficient(self) -> Result<Coefficient> {
        if self.uses("s") {
            return Err(Error::Config(format!(
                "expression {:?} may only depend on x and y",
                self.src
            )));
        }
        Ok(Arc::new(move |p| self.eval(p[0], p[1], 0.0)))
    }

    pub fn into_pointwise(self) -> Pointwise {
        Arc::new(move |p, s| self.eval(p[0], p[1], s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: &str) -> f64 {
        Expr::parse(t).unwrap().eval(0.5, 2.0, 3.0)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(ev("-2 ^ 2"), -4.0);
        assert_eq!(ev("2 ^ -1"), 0.5);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("1e-3 * 1E3"), 1.0);
        assert_eq!(ev("2.5e+1"), 25.0);
        assert_eq!(ev("+3 - -1"), 4.0);
    }

    #[test]
    fn variables_constants_functions() {
        assert_eq!(ev("x + y + s"), 5.5);
        assert!((ev("sin(pi * x)") - 1.0).abs() < 1e-15);
        assert!((ev("log(e)") - 1.0).abs() < 1e-15);
        assert_eq!(ev("pow(y, s)"), 8.0);
        assert_eq!(ev("min(x, y) + max(x, y)"), 2.5);
        assert_eq!(ev("abs(-s) + sqrt(4) + exp(0) + cos(0)"), 7.0);
        assert_eq!(ev("s * (1 - s)"), -6.0);
        assert_eq!(ev("2.5 + 0.4 * sin(2 * pi * x)"), 2.5 + 0.4 * (std::f64::consts::PI).sin());
    }

    #[test]
    fn variable_usage() {
        let e = Expr::parse("s * (1 - s) + 0 * y").unwrap();
        assert!(e.uses("s") && e.uses("y") && !e.uses("x"));
        assert!(Expr::parse("x*s").unwrap().into_coefficient().is_err());
        let c = Expr::parse("1 + x").unwrap().into_coefficient().unwrap();
        assert_eq!(c([1.0, 0.0]), 2.0);
    }

    #[test]
    fn errors_carry_columns() {
        for (t, col) in [("1 +", 4), ("foo(1)", 1), ("1 2", 3), ("(1", 3), ("sin 1", 5), ("pow(1)", 7), ("#", 1)] {
            let err = Expr::parse(t).unwrap_err().to_string();
            assert!(err.contains(&format!("column {col}")), "{t}: {err}");
        }
    }
}
