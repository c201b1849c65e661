//! Minimal arithmetic-expression parser and evaluator.
//!
//! Coefficient pieces, kernels and input signals are written as text in
//! configuration files, e.g. `"sin(5*pi*x)"` or `"exp(-(5*t-5*t^2)^(-2))"`.
//! The grammar is a closed whitelist: literals, the variables `x`, `y`, `t`,
//! the constant `pi`, the operators `+ - * / ^` (with `^` right-associative
//! and binding tighter than unary minus), and the functions `sin`, `cos`,
//! `exp`, `abs`, `sqrt` and `pow`.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    T,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::T => "t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
}

impl UnaryFn {
    fn name(self) -> &'static str {
        match self {
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Exp => "exp",
            UnaryFn::Abs => "abs",
            UnaryFn::Sqrt => "sqrt",
        }
    }
}

/// Abstract syntax tree of an expression. Immutable after parse; safe to
/// share across threads and evaluate concurrently.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Pi,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Fn1(UnaryFn, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedEnd,
    Expected(&'static str),
    UnknownIdentifier(String),
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at byte {offset}: {}", self.describe())]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn describe(&self) -> String {
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => format!("unexpected character {c:?}"),
            ParseErrorKind::UnexpectedEnd => "unexpected end of input".into(),
            ParseErrorKind::Expected(what) => format!("expected {what}"),
            ParseErrorKind::UnknownIdentifier(name) => format!("unknown identifier `{name}`"),
            ParseErrorKind::ArityMismatch {
                name,
                expected,
                got,
            } => format!("`{name}` takes {expected} argument(s), got {got}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(&'static str),
    #[error("domain error: {op}({arg}) is undefined over the reals")]
    Domain { op: &'static str, arg: f64 },
    #[error("domain error: {base}^{exponent} with negative base and non-integer exponent")]
    PowDomain { base: f64, exponent: f64 },
}

/// Variable bindings for evaluation. Unset variables are eval errors.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub t: Option<f64>,
}

impl Bindings {
    pub fn x(v: f64) -> Self {
        Bindings {
            x: Some(v),
            ..Default::default()
        }
    }

    pub fn t(v: f64) -> Self {
        Bindings {
            t: Some(v),
            ..Default::default()
        }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Bindings {
            x: Some(x),
            y: Some(y),
            t: None,
        }
    }

    fn get(&self, var: Var) -> Result<f64, EvalError> {
        match var {
            Var::X => self.x,
            Var::Y => self.y,
            Var::T => self.t,
        }
        .ok_or(EvalError::Unbound(var.name()))
    }
}

impl Expr {
    /// IEEE double evaluation of the tree. Deterministic: the same tree and
    /// bindings always produce the bit-identical result.
    pub fn eval(&self, bindings: &Bindings) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(var) => bindings.get(*var),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Neg(inner) => Ok(-inner.eval(bindings)?),
            Expr::Bin(op, lhs, rhs) => {
                let l = lhs.eval(bindings)?;
                let r = rhs.eval(bindings)?;
                match op {
                    BinOp::Add => Ok(l + r),
                    BinOp::Sub => Ok(l - r),
                    BinOp::Mul => Ok(l * r),
                    BinOp::Div => Ok(l / r),
                    BinOp::Pow => eval_pow(l, r),
                }
            }
            Expr::Fn1(f, arg) => {
                let a = arg.eval(bindings)?;
                match f {
                    UnaryFn::Sin => Ok(a.sin()),
                    UnaryFn::Cos => Ok(a.cos()),
                    UnaryFn::Exp => Ok(a.exp()),
                    UnaryFn::Abs => Ok(a.abs()),
                    UnaryFn::Sqrt => {
                        if a < 0.0 {
                            Err(EvalError::Domain { op: "sqrt", arg: a })
                        } else {
                            Ok(a.sqrt())
                        }
                    }
                }
            }
        }
    }

    /// Set of variables appearing in the tree, as a fixed-order triple.
    pub fn uses(&self) -> [bool; 3] {
        let mut used = [false; 3];
        self.collect_uses(&mut used);
        used
    }

    fn collect_uses(&self, used: &mut [bool; 3]) {
        match self {
            Expr::Num(_) | Expr::Pi => {}
            Expr::Var(v) => used[*v as usize] = true,
            Expr::Neg(inner) => inner.collect_uses(used),
            Expr::Bin(_, l, r) => {
                l.collect_uses(used);
                r.collect_uses(used);
            }
            Expr::Fn1(_, arg) => arg.collect_uses(used),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            Expr::Num(_) | Expr::Var(_) | Expr::Pi | Expr::Fn1(..) => 5,
        }
    }
}

/// `^` with negative base requires an integer exponent; otherwise the real
/// result does not exist and we report it instead of returning NaN.
fn eval_pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        Err(EvalError::PowDomain { base, exponent })
    } else {
        Ok(base.powf(exponent))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Pi => f.write_str("pi"),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                write_child(f, inner, 3)
            }
            Expr::Bin(op, lhs, rhs) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                // Left-associative ops keep an equal-precedence left child
                // bare; `^` is right-associative so the roles flip.
                let (lmin, rmin) = if *op == BinOp::Pow {
                    (prec + 1, prec)
                } else {
                    (prec, prec + 1)
                };
                write_child(f, lhs, lmin)?;
                f.write_str(sym)?;
                write_child(f, rhs, rmin)
            }
            Expr::Fn1(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token and its starting byte offset; `None` at end of input.
    fn next(&mut self) -> Result<Option<(Token, usize)>, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&b) = self.bytes.get(self.pos) else {
            return Ok(None);
        };
        let tok = match b {
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'^' => Token::Caret,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b',' => Token::Comma,
            b'0'..=b'9' => return Ok(Some((self.lex_number()?, start))),
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let end = self.ident_end();
                let name = std::str::from_utf8(&self.bytes[start..end]).unwrap().to_owned();
                self.pos = end;
                return Ok(Some((Token::Ident(name), start)));
            }
            other => {
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::UnexpectedChar(other as char),
                })
            }
        };
        self.pos += 1;
        Ok(Some((tok, start)))
    }

    fn ident_end(&self) -> usize {
        let mut end = self.pos;
        while end < self.bytes.len()
            && (self.bytes[end].is_ascii_alphanumeric() || self.bytes[end] == b'_')
        {
            end += 1;
        }
        end
    }

    fn lex_number(&mut self) -> Result<Token, ParseError> {
        let start = self.pos;
        while self.peek_digit() {
            self.pos += 1;
        }
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while self.peek_digit() {
                self.pos += 1;
            }
        }
        // Consume an exponent only when it is well-formed; a bare trailing
        // `e` stays an identifier so `e^x` reports `unknown identifier`.
        if matches!(self.bytes.get(self.pos), Some(b'e') | Some(b'E')) {
            let mut probe = self.pos + 1;
            if matches!(self.bytes.get(probe), Some(b'+') | Some(b'-')) {
                probe += 1;
            }
            if matches!(self.bytes.get(probe), Some(b'0'..=b'9')) {
                self.pos = probe;
                while self.peek_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let value = text.parse::<f64>().map_err(|_| ParseError {
            offset: start,
            kind: ParseErrorKind::Expected("a numeric literal"),
        })?;
        Ok(Token::Num(value))
    }

    fn peek_digit(&self) -> bool {
        matches!(self.bytes.get(self.pos), Some(b'0'..=b'9'))
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    cursor: usize,
    end_offset: usize,
}

/// Parse `text` into an expression tree.
///
/// Precedence, loosest to tightest: `+ -`, `* /`, unary `-`, `^`
/// (right-associative, so `-x^2` is `-(x^2)` and `x^-2` is accepted).
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut lexer = Lexer::new(text);
    let mut tokens = Vec::new();
    while let Some(tok) = lexer.next()? {
        tokens.push(tok);
    }
    let mut parser = Parser {
        tokens,
        cursor: 0,
        end_offset: text.len(),
    };
    let expr = parser.expr()?;
    if let Some((_, offset)) = parser.peek() {
        return Err(ParseError {
            offset,
            kind: ParseErrorKind::Expected("end of input"),
        });
    }
    Ok(expr)
}

impl Parser {
    fn peek(&self) -> Option<(&Token, usize)> {
        self.tokens.get(self.cursor).map(|(t, o)| (t, *o))
    }

    fn bump(&mut self) -> Option<(Token, usize)> {
        let item = self.tokens.get(self.cursor).cloned();
        if item.is_some() {
            self.cursor += 1;
        }
        item
    }

    fn eat(&mut self, tok: &Token) -> bool {
        if self.peek().map(|(t, _)| t == tok).unwrap_or(false) {
            self.cursor += 1;
            true
        } else {
            false
        }
    }

    fn err_here(&self, kind: ParseErrorKind) -> ParseError {
        let offset = self.peek().map(|(_, o)| o).unwrap_or(self.end_offset);
        ParseError { offset, kind }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some((Token::Plus, _)) => BinOp::Add,
                Some((Token::Minus, _)) => BinOp::Sub,
                _ => break,
            };
            self.cursor += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some((Token::Star, _)) => BinOp::Mul,
                Some((Token::Slash, _)) => BinOp::Div,
                _ => break,
            };
            self.cursor += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Token::Minus) {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(&Token::Caret) {
            // Right-associative; the exponent may start with unary minus.
            let exponent = self.unary()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            Some((Token::Num(v), _)) => Ok(Expr::Num(v)),
            Some((Token::LParen, _)) => {
                let inner = self.expr()?;
                if self.eat(&Token::RParen) {
                    Ok(inner)
                } else {
                    Err(self.err_here(ParseErrorKind::Expected("`)`")))
                }
            }
            Some((Token::Ident(name), offset)) => self.ident(name, offset),
            Some((_, offset)) => Err(ParseError {
                offset,
                kind: ParseErrorKind::Expected("a number, variable or `(`"),
            }),
            None => Err(ParseError {
                offset: self.end_offset,
                kind: ParseErrorKind::UnexpectedEnd,
            }),
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        match name.as_str() {
            "x" => return Ok(Expr::Var(Var::X)),
            "y" => return Ok(Expr::Var(Var::Y)),
            "t" => return Ok(Expr::Var(Var::T)),
            "pi" => return Ok(Expr::Pi),
            _ => {}
        }
        let func = match name.as_str() {
            "sin" => Some(UnaryFn::Sin),
            "cos" => Some(UnaryFn::Cos),
            "exp" => Some(UnaryFn::Exp),
            "abs" => Some(UnaryFn::Abs),
            "sqrt" => Some(UnaryFn::Sqrt),
            "pow" => None,
            _ => {
                return Err(ParseError {
                    offset,
                    kind: ParseErrorKind::UnknownIdentifier(name),
                })
            }
        };
        let expected = if func.is_some() { 1 } else { 2 };
        if !self.eat(&Token::LParen) {
            return Err(self.err_here(ParseErrorKind::Expected("`(` after function name")));
        }
        let mut args = vec![self.expr()?];
        while self.eat(&Token::Comma) {
            args.push(self.expr()?);
        }
        if !self.eat(&Token::RParen) {
            return Err(self.err_here(ParseErrorKind::Expected("`)` or `,`")));
        }
        if args.len() != expected {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::ArityMismatch {
                    name,
                    expected,
                    got: args.len(),
                },
            });
        }
        Ok(match func {
            Some(f) => Expr::Fn1(f, Box::new(args.pop().unwrap())),
            None => {
                let exponent = args.pop().unwrap();
                let base = args.pop().unwrap();
                Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent))
            }
        })
    }
}
