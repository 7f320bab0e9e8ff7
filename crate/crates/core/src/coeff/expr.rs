//! A small expression language for coefficient entries.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 't' | 'z' | probe | call | '(' expr ')'
//! probe   := 'x' '[' integer ']' '(' ['-'] number ')'
//! call    := name '(' expr (',' expr)* ')'
//! ```
//!
//! `x[i](theta)` reads component `i` (1-based) of the segment at delay `theta`
//! in `[-r0, 0]`; `t` is time and `z` the numeric value of the jump mark.
//! Functions: `min`, `max`, `abs`, `exp`, `log`, `sqrt`, `clip(x, lo, hi)`.

use std::fmt;

use super::CoeffError;
use crate::segment::Segment;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Abs,
    Exp,
    Log,
    Sqrt,
    Clip,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "clip" => Func::Clip,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Clip => "clip",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            Func::Clip => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Time,
    Mark,
    /// Component (0-based) at delay `theta`.
    Probe {
        component: usize,
        theta: f64,
    },
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64, x: &Segment, z: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Time => t,
            Expr::Mark => z,
            Expr::Probe { component, theta } => x.eval(*component, *theta),
            Expr::Neg(e) => -e.eval(t, x, z),
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval(t, x, z), r.eval(t, x, z));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, args) => {
                let v = |k: usize| args[k].eval(t, x, z);
                match f {
                    Func::Min => v(0).min(v(1)),
                    Func::Max => v(0).max(v(1)),
                    Func::Abs => v(0).abs(),
                    Func::Exp => v(0).exp(),
                    Func::Log => v(0).ln(),
                    Func::Sqrt => v(0).sqrt(),
                    Func::Clip => v(0).max(v(1)).min(v(2)),
                }
            }
        }
    }

    /// True when the expression is the literal `0`.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Time => f.write_str("t"),
            Expr::Mark => f.write_str("z"),
            Expr::Probe { component, theta } => write!(f, "x[{}]({theta:?})", component + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// What an expression may refer to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExprContext {
    pub dim: usize,
    pub r0: f64,
    /// Whether `z` is in scope (jump coefficients only).
    pub allow_mark: bool,
}

pub fn parse_expr(text: &str, ctx: &ExprContext) -> Result<Expr, CoeffError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, ctx };
    p.skip_ws();
    if p.pos == p.src.len() {
        return Err(p.error("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    ctx: &'a ExprContext,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> CoeffError {
        CoeffError::Syntax { pos: self.pos, msg: msg.to_string() }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), CoeffError> {
        if self.eat(c) {
            Ok(())
        } else if self.pos >= self.src.len() {
            Err(self.error(&format!("expected `{}` but input ended", c as char)))
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, CoeffError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, CoeffError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, CoeffError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, CoeffError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Expr::Const(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                match name {
                    "t" => Ok(Expr::Time),
                    "z" if self.ctx.allow_mark => Ok(Expr::Mark),
                    "x" => self.probe(),
                    _ => match Func::from_name(name) {
                        Some(f) => self.call(f),
                        None => Err(CoeffError::UnknownSymbol(name.to_string())),
                    },
                }
            }
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn probe(&mut self) -> Result<Expr, CoeffError> {
        self.expect(b'[')?;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected component index"));
        }
        let idx: usize = std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .parse()
            .map_err(|_| self.error("component index too large"))?;
        if idx == 0 || idx > self.ctx.dim {
            return Err(CoeffError::UnknownSymbol(format!("x[{idx}]")));
        }
        self.expect(b']')?;
        self.expect(b'(')?;
        let neg = self.eat(b'-');
        self.skip_ws();
        let mut theta = self.number()?;
        if neg {
            theta = -theta;
        }
        self.expect(b')')?;
        if theta > 0.0 || theta < -self.ctx.r0 {
            return Err(CoeffError::ThetaOutOfRange { theta, r0: self.ctx.r0 });
        }
        Ok(Expr::Probe { component: idx - 1, theta })
    }

    fn call(&mut self, f: Func) -> Result<Expr, CoeffError> {
        self.expect(b'(')?;
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        self.expect(b')')?;
        if args.len() != f.arity() {
            return Err(self.error(&format!("{} takes {} argument(s)", f.name(), f.arity())));
        }
        Ok(Expr::Call(f, args))
    }

    fn number(&mut self) -> Result<f64, CoeffError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos > s
        };
        let mut any = digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            any |= digits(self);
        }
        if !any {
            self.pos = start;
            return Err(self.error("expected a number"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if !digits(self) {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse().map_err(|_| CoeffError::Syntax { pos: start, msg: format!("bad number `{text}`") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CTX: ExprContext = ExprContext { dim: 2, r0: 1.0, allow_mark: true };

    #[test]
    fn parses_constant_zero() {
        let e = parse_expr("0", &CTX).unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn parses_probes() {
        let e = parse_expr("-x[1](0) + x[1](-1)", &CTX).unwrap();
        let expected = Expr::Bin(
            BinOp::Add,
            Box::new(Expr::Neg(Box::new(Expr::Probe { component: 0, theta: 0.0 }))),
            Box::new(Expr::Probe { component: 0, theta: -1.0 }),
        );
        assert_eq!(e, expected);
        let seg = Segment::new(2, 1.0, vec![(-1.0, vec![3.0, 0.0]), (0.0, vec![1.0, 0.0])], vec![]).unwrap();
        assert_eq!(e.eval(0.0, &seg, 0.0), 2.0);
    }

    #[test]
    fn unbalanced_paren_reports_end_of_input() {
        let text = "x[2](0";
        match parse_expr(text, &CTX) {
            Err(CoeffError::Syntax { pos, .. }) => assert_eq!(pos, text.len()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_kinds() {
        assert!(matches!(parse_expr("foo(1)", &CTX), Err(CoeffError::UnknownSymbol(_))));
        assert!(matches!(parse_expr("x[3](0)", &CTX), Err(CoeffError::UnknownSymbol(_))));
        assert!(matches!(parse_expr("x[1](-2)", &CTX), Err(CoeffError::ThetaOutOfRange { .. })));
        assert!(matches!(parse_expr("x[1](0.5)", &CTX), Err(CoeffError::ThetaOutOfRange { .. })));
        let no_mark = ExprContext { allow_mark: false, ..CTX };
        assert!(matches!(parse_expr("z", &no_mark), Err(CoeffError::UnknownSymbol(_))));
        assert!(matches!(parse_expr("", &CTX), Err(CoeffError::Syntax { .. })));
        assert!(matches!(parse_expr("1 +", &CTX), Err(CoeffError::Syntax { .. })));
        assert!(matches!(parse_expr("min(1)", &CTX), Err(CoeffError::Syntax { .. })));
        assert!(matches!(parse_expr("1 2", &CTX), Err(CoeffError::Syntax { .. })));
    }

    #[test]
    fn precedence_and_functions() {
        let seg = Segment::constant(1.0, &[2.0, -3.0]);
        let ev = |s: &str| parse_expr(s, &CTX).unwrap().eval(0.5, &seg, 4.0);
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("-2^2"), -4.0);
        assert_eq!(ev("2^3^2"), 512.0);
        assert_eq!(ev("8 / 2 / 2"), 2.0);
        assert_eq!(ev("t * z"), 2.0);
        assert_eq!(ev("clip(x[2](0), -1, 1)"), -1.0);
        assert_eq!(ev("max(abs(x[2](-1)), sqrt(4))"), 3.0);
        assert_eq!(ev("log(exp(1.5e0))"), 1.5);
        assert_eq!(ev("2.5E-1"), 0.25);
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|v| format!("{}", v as f64 / 8.0)),
            Just("t".to_string()),
            Just("z".to_string()),
            (1usize..=2, 0u32..=4).prop_map(|(i, k)| format!("x[{i}](-{})", k as f64 / 4.0)),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop_oneof![Just("+"), Just("-"), Just("*"), Just("/"), Just("^")])
                    .prop_map(|(a, b, op)| format!("{a} {op} {b}")),
                inner.clone().prop_map(|a| format!("-({a})")),
                inner.clone().prop_map(|a| format!("({a})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("min({a}, {b})")),
                inner.clone().prop_map(|a| format!("abs({a})")),
                (inner.clone(), inner.clone(), inner).prop_map(|(a, b, c)| format!("clip({a}, {b}, {c})")),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_fixed_point(text in arb_expr()) {
            let e = parse_expr(&text, &CTX).unwrap();
            let printed = e.to_string();
            let again = parse_expr(&printed, &CTX).unwrap();
            prop_assert_eq!(&again, &e);
            prop_assert_eq!(again.to_string(), printed);
        }

        #[test]
        fn min_matches_componentwise_min(a in -1e6f64..1e6, b in -1e6f64..1e6, c in -1e6f64..1e6) {
            let seg = Segment::new(2, 1.0, vec![(-1.0, vec![c, 0.0]), (0.0, vec![a, b])], vec![]).unwrap();
            let e = parse_expr("min(x[1](0), x[2](0))", &CTX).unwrap();
            prop_assert_eq!(e.eval(0.0, &seg, 0.0), a.min(b));
            let e = parse_expr("max(x[1](-1), x[1](0))", &CTX).unwrap();
            prop_assert_eq!(e.eval(0.0, &seg, 0.0), a.max(c));
        }
    }
}
