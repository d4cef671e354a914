//! A small scalar expression language for scenario files: real arithmetic
//! over coordinate variables `x0…`, a handful of functions, comparisons with
//! tolerance-aware margins, boolean connectives, and `piecewise`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Func {
    Pow,
    Sqrt,
    Log,
    Exp,
    Abs,
    Sign,
    Min,
    Max,
    Sin,
    Cos,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Pow => "pow",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sign => "sign",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "pow" => Func::Pow,
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            "min" => Func::Min,
            "max" => Func::Max,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Abstract syntax; real- or boolean-valued per [`Expr::ty`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Expr {
    Num(f64),
    /// Coordinate variable `x{i}`.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// `piecewise(cond, then, else)`.
    Piecewise(Box<Expr>, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ty {
    Real,
    Bool,
}

impl Expr {
    /// Type of the expression given the number of coordinate variables.
    pub fn ty(&self, nvars: usize) -> Result<Ty> {
        let real = |e: &Expr| -> Result<()> {
            match e.ty(nvars)? {
                Ty::Real => Ok(()),
                Ty::Bool => Err(Error::Invalid("expected a real expression".into())),
            }
        };
        let boolean = |e: &Expr| -> Result<()> {
            match e.ty(nvars)? {
                Ty::Bool => Ok(()),
                Ty::Real => Err(Error::Invalid("expected a boolean expression".into())),
            }
        };
        match self {
            Expr::Num(_) => Ok(Ty::Real),
            Expr::Var(i) => {
                if *i < nvars {
                    Ok(Ty::Real)
                } else {
                    Err(Error::Invalid(format!("variable x{i} outside the {nvars} coordinates")))
                }
            }
            Expr::Neg(a) => {
                real(a)?;
                Ok(Ty::Real)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                real(a)?;
                real(b)?;
                Ok(Ty::Real)
            }
            Expr::Call(f, args) => {
                if args.len() != f.arity() {
                    return Err(Error::Invalid(format!(
                        "{} takes {} argument(s)",
                        f.name(),
                        f.arity()
                    )));
                }
                for a in args {
                    real(a)?;
                }
                Ok(Ty::Real)
            }
            Expr::Cmp(_, a, b) => {
                real(a)?;
                real(b)?;
                Ok(Ty::Bool)
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                boolean(a)?;
                boolean(b)?;
                Ok(Ty::Bool)
            }
            Expr::Not(a) => {
                boolean(a)?;
                Ok(Ty::Bool)
            }
            Expr::Piecewise(c, t, e) => {
                boolean(c)?;
                real(t)?;
                real(e)?;
                Ok(Ty::Real)
            }
        }
    }

    /// Evaluate a real-valued expression. Boolean sub-expressions (inside
    /// `piecewise`) use exact comparisons.
    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Call(f, args) => {
                let a = args[0].eval(vars);
                match f {
                    Func::Pow => a.powf(args[1].eval(vars)),
                    Func::Sqrt => a.sqrt(),
                    Func::Log => a.ln(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                    Func::Sign => {
                        if a > 0.0 {
                            1.0
                        } else if a < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    Func::Min => a.min(args[1].eval(vars)),
                    Func::Max => a.max(args[1].eval(vars)),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                }
            }
            Expr::Cmp(..) | Expr::And(..) | Expr::Or(..) | Expr::Not(..) => {
                if self.eval_bool(vars, 0.0) {
                    1.0
                } else {
                    0.0
                }
            }
            Expr::Piecewise(c, t, e) => {
                if c.eval_bool(vars, 0.0) {
                    t.eval(vars)
                } else {
                    e.eval(vars)
                }
            }
        }
    }

    /// Evaluate a boolean expression with margin semantics: a comparison
    /// holds when its defect is at most `tol`.
    pub fn eval_bool(&self, vars: &[f64], tol: f64) -> bool {
        match self {
            Expr::Cmp(op, a, b) => {
                let (x, y) = (a.eval(vars), b.eval(vars));
                match op {
                    CmpOp::Lt | CmpOp::Le => x - y <= tol,
                    CmpOp::Eq => (x - y).abs() <= tol,
                    CmpOp::Ge | CmpOp::Gt => y - x <= tol,
                }
            }
            Expr::And(a, b) => a.eval_bool(vars, tol) && b.eval_bool(vars, tol),
            Expr::Or(a, b) => a.eval_bool(vars, tol) || b.eval_bool(vars, tol),
            Expr::Not(a) => !a.eval_bool(vars, tol),
            _ => self.eval(vars) != 0.0,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Not(..) => 3,
            Expr::Cmp(..) => 4,
            Expr::Add(..) | Expr::Sub(..) => 5,
            Expr::Mul(..) | Expr::Div(..) => 6,
            Expr::Neg(..) => 7,
            _ => 8,
        }
    }

    fn fmt_child(&self, child: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if child.precedence() < self.precedence() {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v == v.trunc() && v.abs() < 1e15 {
                    write!(f, "{v:.1}")
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                self.fmt_child(a, f)
            }
            Expr::Add(a, b) => {
                self.fmt_child(a, f)?;
                write!(f, " + ")?;
                // The parser is left-associative, so a right-nested operand
                // at equal precedence needs parens to print invertibly.
                if b.precedence() <= self.precedence() {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Sub(a, b) => {
                self.fmt_child(a, f)?;
                write!(f, " - ")?;
                // Right operand of `-` needs parens at equal precedence.
                if b.precedence() <= self.precedence() {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Mul(a, b) => {
                self.fmt_child(a, f)?;
                write!(f, " * ")?;
                if b.precedence() <= self.precedence() {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Div(a, b) => {
                self.fmt_child(a, f)?;
                write!(f, " / ")?;
                if b.precedence() <= self.precedence() {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Expr::Cmp(op, a, b) => {
                self.fmt_child(a, f)?;
                write!(f, " {} ", op.symbol())?;
                self.fmt_child(b, f)
            }
            Expr::And(a, b) => {
                self.fmt_child(a, f)?;
                write!(f, " and ")?;
                if b.precedence() <= self.precedence() {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Or(a, b) => {
                self.fmt_child(a, f)?;
                write!(f, " or ")?;
                if b.precedence() <= self.precedence() {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Not(a) => {
                write!(f, "not ")?;
                self.fmt_child(a, f)
            }
            Expr::Piecewise(c, t, e) => write!(f, "piecewise({c}, {t}, {e})"),
        }
    }
}

/// A parse diagnostic with a 1-based source position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(&'static str),
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
}

fn lex(text: &str, line: usize) -> std::result::Result<Vec<(Tok, usize)>, Diagnostic> {
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < bytes.len() {
        let c = bytes[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit())
        {
            let start = i;
            while i < bytes.len()
                && (bytes[i].is_ascii_digit()
                    || bytes[i] == '.'
                    || bytes[i] == 'e'
                    || bytes[i] == 'E'
                    || ((bytes[i] == '+' || bytes[i] == '-')
                        && i > start
                        && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
            {
                i += 1;
            }
            let s: String = bytes[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Diagnostic {
                line,
                col,
                message: format!("malformed number `{s}`"),
            })?;
            out.push((Tok::Num(v), col));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_alphanumeric() || bytes[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(bytes[start..i].iter().collect()), col));
            continue;
        }
        let two: String = bytes[i..(i + 2).min(bytes.len())].iter().collect();
        let sym = match two.as_str() {
            "<=" => Some("<="),
            ">=" => Some(">="),
            "==" => Some("=="),
            _ => None,
        };
        if let Some(s) = sym {
            out.push((Tok::Sym(s), col));
            i += 2;
            continue;
        }
        let one = match c {
            '+' => "+",
            '-' => "-",
            '*' => "*",
            '/' => "/",
            '(' => "(",
            ')' => ")",
            ',' => ",",
            '<' => "<",
            '>' => ">",
            '=' => "=",
            _ => {
                return Err(Diagnostic {
                    line,
                    col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((Tok::Sym(one), col));
        i += 1;
    }
    Ok(out)
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|(_, c)| *c)
            .unwrap_or(1)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn err(&self, message: impl Into<String>) -> Diagnostic {
        Diagnostic { line: self.line, col: self.col(), message: message.into() }
    }

    fn expect(&mut self, sym: &'static str) -> std::result::Result<(), Diagnostic> {
        match self.bump() {
            Some(Tok::Sym(s)) if s == sym => Ok(()),
            _ => Err(self.err(format!("expected `{sym}`"))),
        }
    }
}

type PResult = std::result::Result<Expr, Diagnostic>;

fn parse_or(lx: &mut Lexer) -> PResult {
    let mut lhs = parse_and(lx)?;
    while matches!(lx.peek(), Some(Tok::Ident(s)) if s == "or") {
        lx.bump();
        lhs = Expr::Or(Box::new(lhs), Box::new(parse_and(lx)?));
    }
    Ok(lhs)
}

fn parse_and(lx: &mut Lexer) -> PResult {
    let mut lhs = parse_not(lx)?;
    while matches!(lx.peek(), Some(Tok::Ident(s)) if s == "and") {
        lx.bump();
        lhs = Expr::And(Box::new(lhs), Box::new(parse_not(lx)?));
    }
    Ok(lhs)
}

fn parse_not(lx: &mut Lexer) -> PResult {
    if matches!(lx.peek(), Some(Tok::Ident(s)) if s == "not") {
        lx.bump();
        return Ok(Expr::Not(Box::new(parse_not(lx)?)));
    }
    parse_cmp(lx)
}

fn parse_cmp(lx: &mut Lexer) -> PResult {
    let lhs = parse_sum(lx)?;
    let op = match lx.peek() {
        Some(Tok::Sym("<")) => Some(CmpOp::Lt),
        Some(Tok::Sym("<=")) => Some(CmpOp::Le),
        Some(Tok::Sym("=")) | Some(Tok::Sym("==")) => Some(CmpOp::Eq),
        Some(Tok::Sym(">=")) => Some(CmpOp::Ge),
        Some(Tok::Sym(">")) => Some(CmpOp::Gt),
        _ => None,
    };
    match op {
        None => Ok(lhs),
        Some(op) => {
            lx.bump();
            Ok(Expr::Cmp(op, Box::new(lhs), Box::new(parse_sum(lx)?)))
        }
    }
}

fn parse_sum(lx: &mut Lexer) -> PResult {
    let mut lhs = parse_term(lx)?;
    loop {
        match lx.peek() {
            Some(Tok::Sym("+")) => {
                lx.bump();
                lhs = Expr::Add(Box::new(lhs), Box::new(parse_term(lx)?));
            }
            Some(Tok::Sym("-")) => {
                lx.bump();
                lhs = Expr::Sub(Box::new(lhs), Box::new(parse_term(lx)?));
            }
            _ => return Ok(lhs),
        }
    }
}

fn parse_term(lx: &mut Lexer) -> PResult {
    let mut lhs = parse_unary(lx)?;
    loop {
        match lx.peek() {
            Some(Tok::Sym("*")) => {
                lx.bump();
                lhs = Expr::Mul(Box::new(lhs), Box::new(parse_unary(lx)?));
            }
            Some(Tok::Sym("/")) => {
                lx.bump();
                lhs = Expr::Div(Box::new(lhs), Box::new(parse_unary(lx)?));
            }
            _ => return Ok(lhs),
        }
    }
}

fn parse_unary(lx: &mut Lexer) -> PResult {
    if matches!(lx.peek(), Some(Tok::Sym("-"))) {
        lx.bump();
        return Ok(Expr::Neg(Box::new(parse_unary(lx)?)));
    }
    parse_atom(lx)
}

fn parse_atom(lx: &mut Lexer) -> PResult {
    let start_col = lx.col();
    match lx.bump() {
        Some(Tok::Num(v)) => Ok(Expr::Num(v)),
        Some(Tok::Sym("(")) => {
            let e = parse_or(lx)?;
            lx.expect(")")?;
            Ok(e)
        }
        Some(Tok::Ident(name)) => {
            if let Some(rest) = name.strip_prefix('x') {
                if let Ok(i) = rest.parse::<usize>() {
                    return Ok(Expr::Var(i));
                }
            }
            if name == "piecewise" {
                lx.expect("(")?;
                let c = parse_or(lx)?;
                lx.expect(",")?;
                let t = parse_or(lx)?;
                lx.expect(",")?;
                let e = parse_or(lx)?;
                lx.expect(")")?;
                return Ok(Expr::Piecewise(Box::new(c), Box::new(t), Box::new(e)));
            }
            if let Some(f) = Func::from_name(&name) {
                lx.expect("(")?;
                let mut args = vec![parse_or(lx)?];
                while matches!(lx.peek(), Some(Tok::Sym(","))) {
                    lx.bump();
                    args.push(parse_or(lx)?);
                }
                lx.expect(")")?;
                return Ok(Expr::Call(f, args));
            }
            Err(Diagnostic {
                line: lx.line,
                col: start_col,
                message: format!("unknown identifier `{name}`"),
            })
        }
        _ => Err(lx.err("expected an expression")),
    }
}

/// Parse one expression; `line` seeds diagnostic positions.
pub fn parse_expr_at(text: &str, line: usize) -> std::result::Result<Expr, Diagnostic> {
    let toks = lex(text, line)?;
    let mut lx = Lexer { toks, pos: 0, line };
    let e = parse_or(&mut lx)?;
    if lx.peek().is_some() {
        return Err(lx.err("trailing input after expression"));
    }
    Ok(e)
}

pub fn parse_expr(text: &str) -> std::result::Result<Expr, Diagnostic> {
    parse_expr_at(text, 1)
}
