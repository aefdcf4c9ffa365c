//! Precedence-climbing parser. Grammar in `docs/expr-grammar.md`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use super::ast::{BinOp, CmpOp, Func, Guard, Node};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at byte {pos}")]
    Unknown { pos: usize, name: String },
    #[error("`{name}` at byte {pos} takes {expected} argument(s), got {got}")]
    Arity {
        pos: usize,
        name: String,
        expected: String,
        got: usize,
    },
}

/// Named constants and sub-expressions visible to the parser. Sub-expressions
/// are stored as parsed trees over a fixed coordinate list and inlined when
/// referenced from an expression over the same coordinates.
#[derive(Clone, Debug, Default)]
pub struct Definitions {
    constants: HashMap<String, f64>,
    exprs: HashMap<String, (Vec<String>, Arc<Node>)>,
}

impl Definitions {
    pub fn constant(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }

    pub fn get_constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    /// Parse `src` over `coords` and register it under `name`. Earlier
    /// definitions are in scope.
    pub fn define(&mut self, name: &str, src: &str, coords: &[&str]) -> Result<(), ParseError> {
        let names: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let node = parse(src, &names, self)?;
        self.exprs.insert(name.to_string(), (names, node));
        Ok(())
    }

    fn lookup(&self, name: &str, coords: &[String]) -> Option<Result<Arc<Node>, String>> {
        if let Some(&c) = self.constants.get(name) {
            return Some(Ok(Arc::new(Node::Const(c))));
        }
        let (their, node) = self.exprs.get(name)?;
        if their.as_slice() == coords {
            return Some(Ok(node.clone()));
        }
        // Same names in a different order: bind by name.
        let mut args = Vec::with_capacity(their.len());
        for n in their {
            match coords.iter().position(|c| c == n) {
                Some(i) => args.push(Arc::new(Node::Var(i))),
                None => {
                    return Some(Err(format!(
                        "definition `{name}` uses coordinate `{n}` not present here"
                    )))
                }
            }
        }
        Some(Ok(Arc::new(Node::Compose {
            inner: node.clone(),
            args,
        })))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    Cmp(CmpOp),
    LParen,
    RParen,
    Comma,
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(pos, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let mut end = pos;
            let mut prev = ' ';
            while let Some(&(i, d)) = it.peek() {
                let exp_sign = (d == '+' || d == '-') && (prev == 'e' || prev == 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    end = i + d.len_utf8();
                    prev = d;
                    it.next();
                } else {
                    break;
                }
            }
            let text = &src[pos..end];
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                pos,
                message: format!("bad number `{text}`"),
            })?;
            out.push((Tok::Num(v), pos));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut end = pos;
            while let Some(&(i, d)) = it.peek() {
                if d.is_alphanumeric() || d == '_' || d == '\'' {
                    end = i + d.len_utf8();
                    it.next();
                } else {
                    break;
                }
            }
            out.push((Tok::Ident(src[pos..end].to_string()), pos));
            continue;
        }
        it.next();
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '<' | '>' => {
                let eq = matches!(it.peek(), Some(&(_, '=')));
                if eq {
                    it.next();
                }
                Tok::Cmp(match (c, eq) {
                    ('<', false) => CmpOp::Lt,
                    ('<', true) => CmpOp::Le,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                })
            }
            _ => {
                return Err(ParseError::Syntax {
                    pos,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, pos));
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    coords: &'a [String],
    defs: &'a Definitions,
}

pub(crate) fn parse(
    src: &str,
    coords: &[String],
    defs: &Definitions,
) -> Result<Arc<Node>, ParseError> {
    let mut p = Parser {
        toks: lex(src)?,
        at: 0,
        coords,
        defs,
    };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        t => Err(p.syntax(format!("unexpected {t:?} after expression"))),
    }
}

fn bin(op: BinOp, a: Arc<Node>, b: Arc<Node>) -> Arc<Node> {
    Arc::new(Node::Bin(op, a, b))
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn syntax(&self, message: String) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            message,
        }
    }

    fn expect(&mut self, t: Tok) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            Err(self.syntax(format!("expected {t:?}, found {:?}", self.peek())))
        }
    }

    fn expr(&mut self) -> Result<Arc<Node>, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Arc<Node>, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Arc<Node>, ParseError> {
        match self.peek() {
            Tok::Op('-') => {
                self.next();
                Ok(Arc::new(Node::Neg(self.unary()?)))
            }
            Tok::Op('+') => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Arc<Node>, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.next();
            let exp = self.unary()?;
            return Ok(bin(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn guard(&mut self) -> Result<Guard, ParseError> {
        let lhs = self.expr()?;
        let op = match self.next() {
            Tok::Cmp(op) => op,
            t => return Err(self.syntax(format!("expected comparison, found {t:?}"))),
        };
        let rhs = self.expr()?;
        Ok(Guard { lhs, op, rhs })
    }

    fn primary(&mut self) -> Result<Arc<Node>, ParseError> {
        let pos = self.pos();
        match self.next() {
            Tok::Num(v) => Ok(Arc::new(Node::Const(v))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.next();
                    return self.call(&name, pos);
                }
                self.ident(&name, pos)
            }
            t => Err(ParseError::Syntax {
                pos,
                message: format!("unexpected {t:?}"),
            }),
        }
    }

    fn ident(&self, name: &str, pos: usize) -> Result<Arc<Node>, ParseError> {
        if let Some(i) = self.coords.iter().position(|c| c == name) {
            return Ok(Arc::new(Node::Var(i)));
        }
        if let Some(r) = self.defs.lookup(name, self.coords) {
            return r.map_err(|message| ParseError::Syntax { pos, message });
        }
        if name == "pi" {
            return Ok(Arc::new(Node::Const(PI)));
        }
        Err(ParseError::Unknown {
            pos,
            name: name.to_string(),
        })
    }

    fn args(&mut self) -> Result<Vec<Arc<Node>>, ParseError> {
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.next();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn call(&mut self, name: &str, pos: usize) -> Result<Arc<Node>, ParseError> {
        let arity = |expected: &str, got: usize| ParseError::Arity {
            pos,
            name: name.to_string(),
            expected: expected.to_string(),
            got,
        };
        match name {
            "if" => {
                let g = self.guard()?;
                self.expect(Tok::Comma)?;
                let a = self.expr()?;
                self.expect(Tok::Comma)?;
                let b = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Arc::new(Node::Piecewise {
                    branches: vec![(g, a)],
                    otherwise: b,
                }))
            }
            "piecewise" => {
                let mut branches = Vec::new();
                loop {
                    // Either `guard, value,` or the final default value.
                    let start = self.at;
                    let e = self.expr()?;
                    if let Tok::Cmp(_) = self.peek() {
                        self.at = start;
                        let g = self.guard()?;
                        self.expect(Tok::Comma)?;
                        let v = self.expr()?;
                        self.expect(Tok::Comma)?;
                        branches.push((g, v));
                    } else {
                        self.expect(Tok::RParen)?;
                        if branches.is_empty() {
                            return Err(arity("at least 3", 1));
                        }
                        return Ok(Arc::new(Node::Piecewise {
                            branches,
                            otherwise: e,
                        }));
                    }
                }
            }
            "diff" => {
                let inner = self.expr()?;
                self.expect(Tok::Comma)?;
                let vpos = self.pos();
                let var = match self.next() {
                    Tok::Ident(v) => self.coords.iter().position(|c| *c == v).ok_or(
                        ParseError::Unknown {
                            pos: vpos,
                            name: v.clone(),
                        },
                    )?,
                    t => return Err(self.syntax(format!("expected coordinate, found {t:?}"))),
                };
                self.expect(Tok::RParen)?;
                Ok(Arc::new(Node::Partial { inner, var }))
            }
            _ => {
                let args = self.args()?;
                if let Some(f) = Func::from_name(name) {
                    if args.len() != 1 {
                        return Err(arity("1", args.len()));
                    }
                    return Ok(Arc::new(Node::Call(f, args[0].clone())));
                }
                match name {
                    "pow" => {
                        let [a, b]: [Arc<Node>; 2] =
                            args.try_into().map_err(|v: Vec<_>| arity("2", v.len()))?;
                        Ok(bin(BinOp::Pow, a, b))
                    }
                    "smoothstep5" => {
                        let [a, b, x]: [Arc<Node>; 3] =
                            args.try_into().map_err(|v: Vec<_>| arity("3", v.len()))?;
                        Ok(Arc::new(Node::Smoothstep { a, b, x }))
                    }
                    _ => Err(ParseError::Unknown {
                        pos,
                        name: name.to_string(),
                    }),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Result<Arc<Node>, ParseError> {
        parse(src, &["x".to_string(), "y".to_string()], &Definitions::default())
    }

    fn ev(src: &str) -> f64 {
        p(src).unwrap().eval(&[2.0, 3.0]).unwrap()
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2*3"), 7.0);
        assert_eq!(ev("2^3^2"), 512.0);
        assert_eq!(ev("-x^2"), -4.0);
        assert_eq!(ev("x^-1"), 0.5);
        assert_eq!(ev("(1+2)*3"), 9.0);
        assert_eq!(ev("8/2/2"), 2.0);
        assert_eq!(ev("x - y - 1"), -2.0);
        assert_eq!(ev("1.5e-1*2e1"), 3.0);
    }

    #[test]
    fn guards() {
        assert_eq!(ev("if(x < y, 1, 2)"), 1.0);
        assert_eq!(ev("piecewise(x > 5, 1, y >= 3, 2, 3)"), 2.0);
        assert_eq!(ev("piecewise(x+1 <= 2, 1, 4)"), 4.0);
    }

    #[test]
    fn errors_report_positions() {
        match p("x + * y") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        match p("x + w") {
            Err(ParseError::Unknown { pos, name }) => {
                assert_eq!((pos, name.as_str()), (4, "w"))
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(p("sin(x, y)"), Err(ParseError::Arity { .. })));
        assert!(matches!(p("smoothstep5(0, 1)"), Err(ParseError::Arity { .. })));
        assert!(matches!(p("(x"), Err(ParseError::Syntax { .. })));
        assert!(matches!(p("x $ y"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn definitions_rebind_by_name() {
        let mut d = Definitions::default();
        d.define("g", "x - 2*y", &["x", "y"]).unwrap();
        let n = parse("g", &["y".to_string(), "x".to_string()], &d).unwrap();
        // here y=2, x=3
        assert_eq!(n.eval(&[2.0, 3.0]).unwrap(), -1.0);
    }

    #[test]
    fn coordinate_shadows_pi() {
        let n = parse("pi", &["pi".to_string()], &Definitions::default()).unwrap();
        assert_eq!(n.eval(&[1.0]).unwrap(), 1.0);
    }
}
