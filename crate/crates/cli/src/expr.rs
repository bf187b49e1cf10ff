//! Arithmetic expressions over occupation variables `n0..nN`.
//!
//! Grammar: `+ - * /`, unary minus, parentheses, numeric literals and
//! integer powers `x^k`. No functions.

use std::fmt;
use std::sync::Arc;

use qhahn::multiboson::OccupationFn;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at column {}: {}", self.position + 1, self.message)
    }
}

/// A compiled expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
}

impl Expr {
    /// Parses `text`, allowing variables `n0` through `n{modes-1}`.
    pub fn parse(text: &str, modes: usize) -> Result<Expr, ExprError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0, modes };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr { root })
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        eval(&self.root, vars)
    }

    pub fn into_fn(self) -> OccupationFn {
        Arc::new(move |vars: &[f64]| self.eval(vars))
    }
}

fn eval(node: &Node, vars: &[f64]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(i) => vars[*i],
        Node::Neg(a) => -eval(a, vars),
        Node::Pow(a, k) => eval(a, vars).powi(*k),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, vars), eval(b, vars));
            match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => x * y,
                Op::Div => x / y,
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    modes: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError { position: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let op = if c == b'+' { Op::Add } else { Op::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let op = if c == b'*' { Op::Mul } else { Op::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let k: i32 = text.parse().map_err(|_| ExprError {
            position: start,
            message: "exponent must be an integer literal".into(),
        })?;
        Ok(Node::Pow(Box::new(base), k))
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'n') => {
                let start = self.pos;
                self.pos += 1;
                while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                    self.pos += 1;
                }
                let idx: usize = std::str::from_utf8(&self.src[start + 1..self.pos])
                    .unwrap()
                    .parse()
                    .map_err(|_| ExprError { position: start, message: "variables are named n0, n1, ...".into() })?;
                if idx >= self.modes {
                    return Err(ExprError {
                        position: start,
                        message: format!("variable n{idx} out of range (model has {} modes)", self.modes),
                    });
                }
                Ok(Node::Var(idx))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit() || *c == b'.') {
                    self.pos += 1;
                }
                if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
                    let save = self.pos;
                    self.pos += 1;
                    if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                        self.pos += 1;
                    }
                    let digits = self.pos;
                    while self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                        self.pos += 1;
                    }
                    if digits == self.pos {
                        self.pos = save;
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                text.parse()
                    .map(Node::Num)
                    .map_err(|_| ExprError { position: start, message: format!("bad number '{text}'") })
            }
            Some(c) => Err(self.error(format!("unexpected character '{}'", c as char))),
            None => Err(self.error("unexpected end of expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_str(s: &str, vars: &[f64]) -> f64 {
        Expr::parse(s, vars.len()).unwrap().eval(vars)
    }

    #[test]
    fn precedence_and_powers() {
        assert_eq!(eval_str("1 + 2 * 3", &[]), 7.0);
        assert_eq!(eval_str("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(eval_str("-2^2", &[]), -4.0);
        assert_eq!(eval_str("n0^2 - n1 / 4", &[3.0, 2.0]), 8.5);
        assert_eq!(eval_str("2^-1", &[]), 0.5);
        assert_eq!(eval_str("1.5e1 - 1e-1", &[]), 14.9);
        assert_eq!(eval_str("8 / 2 / 2", &[]), 2.0);
        assert_eq!(eval_str("5 - 2 - 1", &[]), 2.0);
    }

    #[test]
    fn rejects_outside_the_grammar() {
        assert!(Expr::parse("sin(n0)", 1).is_err());
        assert!(Expr::parse("n2", 2).is_err());
        assert!(Expr::parse("n0^1.5", 1).is_err());
        assert!(Expr::parse("1 +", 1).is_err());
        assert!(Expr::parse("(1", 1).is_err());
        let err = Expr::parse("1 $ 2", 1).unwrap_err();
        assert_eq!(err.position, 2);
    }
}
