//! Tiny arithmetic-expression evaluator for scenario configs.
//!
//! Grammar: `+ - * /`, unary minus, parentheses, numeric literals, the
//! constants `pi` and `e`, and the functions `sin cos tanh exp`. Variables are
//! named at parse time. Derivatives come from forward-mode dual numbers.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tanh,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: f64,
}

impl Dual {
    fn apply(self, func: Func) -> Self {
        match func {
            Func::Sin => Dual { v: self.v.sin(), d: self.d * self.v.cos() },
            Func::Cos => Dual { v: self.v.cos(), d: -self.d * self.v.sin() },
            Func::Tanh => {
                let t = self.v.tanh();
                Dual { v: t, d: self.d * (1.0 - t * t) }
            }
            Func::Exp => {
                let e = self.v.exp();
                Dual { v: e, d: self.d * e }
            }
        }
    }

    fn combine(self, op: BinOp, o: Self) -> Self {
        match op {
            BinOp::Add => Dual { v: self.v + o.v, d: self.d + o.d },
            BinOp::Sub => Dual { v: self.v - o.v, d: self.d - o.d },
            BinOp::Mul => Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d },
            BinOp::Div => Dual {
                v: self.v / o.v,
                d: (self.d * o.v - self.v * o.d) / (o.v * o.v),
            },
        }
    }
}

impl Node {
    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Node::Num(c) => *c,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(vars), b.eval(vars));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Node::Call(f, a) => {
                let a = a.eval(vars);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tanh => a.tanh(),
                    Func::Exp => a.exp(),
                }
            }
        }
    }

    fn eval_dual(&self, vars: &[f64], wrt: usize) -> Dual {
        match self {
            Node::Num(c) => Dual { v: *c, d: 0.0 },
            Node::Var(i) => Dual {
                v: vars[*i],
                d: if *i == wrt { 1.0 } else { 0.0 },
            },
            Node::Neg(a) => {
                let a = a.eval_dual(vars, wrt);
                Dual { v: -a.v, d: -a.d }
            }
            Node::Bin(op, a, b) => a.eval_dual(vars, wrt).combine(*op, b.eval_dual(vars, wrt)),
            Node::Call(f, a) => a.eval_dual(vars, wrt).apply(*f),
        }
    }
}

/// A parsed expression over a fixed list of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    vars: Vec<String>,
    root: Node,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str, vars: &[&str]) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            vars,
        };
        let root = parser.expr()?;
        if parser.pos != tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected trailing input in `{source}` at token {}",
                parser.pos + 1
            )));
        }
        Ok(Self {
            source: source.to_string(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        self.root.eval(vars)
    }

    /// `∂/∂ vars[wrt]`.
    pub fn partial(&self, vars: &[f64], wrt: usize) -> f64 {
        self.root.eval_dual(vars, wrt).d
    }

    pub fn gradient(&self, vars: &[f64]) -> Vec<f64> {
        (0..self.vars.len()).map(|i| self.partial(vars, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
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
            let value = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{text}` in `{src}`")))?;
            out.push(Token::Num(value));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else if c == '(' {
            out.push(Token::LParen);
            i += 1;
        } else if c == ')' {
            out.push(Token::RParen);
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Node> {
        let token = self
            .peek()
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match token {
            Token::Num(v) => Ok(Node::Num(v)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "tanh" => Some(Func::Tanh),
                    "exp" => Some(Func::Exp),
                    _ => None,
                };
                if let Some(func) = func {
                    if self.peek() != Some(&Token::LParen) {
                        return Err(Error::Expression(format!("`{name}` must be followed by `(`")));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => Err(Error::Expression(format!(
                        "unknown identifier `{name}` (variables: {:?})",
                        self.vars
                    ))),
                }
            }
            other => Err(Error::Expression(format!("unexpected token {other:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expression("missing `)`".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("1 + 2*x - -3/4", &["x"]).unwrap();
        assert_eq!(e.eval(&[2.0]), 1.0 + 4.0 + 0.75);
        let p = Expr::parse("-(x - 1)*(x + 1)", &["x"]).unwrap();
        assert_eq!(p.eval(&[3.0]), -8.0);
    }

    #[test]
    fn functions_and_constants() {
        let e = Expr::parse("sin(pi/2) + cos(0) + tanh(0) + exp(1) - e", &[]).unwrap();
        assert!((e.eval(&[]) - 2.0).abs() < 1e-15);
        let s = Expr::parse("2.5e-1*x", &["x"]).unwrap();
        assert_eq!(s.eval(&[4.0]), 1.0);
    }

    #[test]
    fn derivatives_match_analytic() {
        let e = Expr::parse("sin(x1)*x2 + exp(-x1)/x2 + tanh(x2)", &["x1", "x2"]).unwrap();
        let (a, b): (f64, f64) = (0.3, 1.7);
        let g = e.gradient(&[a, b]);
        let d1 = a.cos() * b - (-a).exp() / b;
        let d2 = a.sin() - (-a).exp() / (b * b) + 1.0 - b.tanh().powi(2);
        assert!((g[0] - d1).abs() < 1e-14);
        assert!((g[1] - d2).abs() < 1e-14);
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("x +", &["x"]).is_err());
        assert!(Expr::parse("sin x", &["x"]).is_err());
        assert!(Expr::parse("y", &["x"]).is_err());
        assert!(Expr::parse("(x", &["x"]).is_err());
        assert!(Expr::parse("x $ 2", &["x"]).is_err());
        assert!(Expr::parse("x 2", &["x"]).is_err());
    }
}
