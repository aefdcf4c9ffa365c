//! Scalar coefficient expressions over named chart coordinates.
//!
//! Expressions are parsed once into an immutable tree and evaluated generically
//! over [`Num`] types, so the same tree yields plain values, exact first
//! partials ([`Jet`]) and nested derivatives ([`Hyper`]).

mod ast;
mod num;
mod parse;

use std::fmt;
use std::sync::Arc;

pub use ast::{BinOp, CmpOp, Func, Node, OpaqueFn};
pub use num::{Hyper, Jet, Num, MAX_JET};
pub use parse::{Definitions, ParseError};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("domain error in {node} at {point:?}: {message}")]
pub struct EvalError {
    pub node: String,
    pub message: String,
    pub point: Vec<f64>,
}

impl EvalError {
    pub(crate) fn domain<S: Num>(node: &Node, message: &str, env: &[S]) -> Self {
        EvalError {
            node: node.label(),
            message: message.to_string(),
            point: env.iter().map(Num::re).collect(),
        }
    }
}

/// Value and all first partials at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub partials: Vec<f64>,
}

#[derive(Clone)]
pub struct Expression {
    root: Arc<Node>,
    coords: Arc<[String]>,
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        ast::Printer {
            node: &self.root,
            names: &self.coords,
        }
        .fmt(f)
    }
}

impl Expression {
    pub fn parse(src: &str, coords: &[&str]) -> Result<Expression, ParseError> {
        Self::parse_with(src, coords, &Definitions::default())
    }

    /// Parse with named constants and sub-expressions in scope.
    pub fn parse_with(
        src: &str,
        coords: &[&str],
        defs: &Definitions,
    ) -> Result<Expression, ParseError> {
        let coords: Arc<[String]> = coords.iter().map(|s| s.to_string()).collect();
        let root = parse::parse(src, &coords, defs)?;
        Ok(Expression { root, coords })
    }

    pub fn from_node(node: Node, coords: Arc<[String]>) -> Expression {
        Expression {
            root: Arc::new(node),
            coords,
        }
    }

    pub fn constant(c: f64, coords: Arc<[String]>) -> Expression {
        Self::from_node(Node::Const(c), coords)
    }

    pub fn var(i: usize, coords: Arc<[String]>) -> Expression {
        assert!(i < coords.len(), "variable index {i} out of range");
        Self::from_node(Node::Var(i), coords)
    }

    /// An externally supplied function applied to expressions in the same coordinates.
    pub fn opaque(func: Arc<dyn OpaqueFn>, args: &[Expression]) -> Expression {
        assert_eq!(func.arity(), args.len(), "opaque arity mismatch");
        let coords = args[0].coords.clone();
        Self::from_node(
            Node::Opaque {
                func,
                args: args.iter().map(|a| a.root.clone()).collect(),
            },
            coords,
        )
    }

    pub fn coords(&self) -> &Arc<[String]> {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn node(&self) -> &Arc<Node> {
        &self.root
    }

    pub fn as_const(&self) -> Option<f64> {
        self.root.as_const()
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn with(&self, node: Node) -> Expression {
        Expression {
            root: Arc::new(node),
            coords: self.coords.clone(),
        }
    }

    pub fn add(&self, o: &Expression) -> Expression {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => self.with(Node::Const(a + b)),
            (Some(a), _) if a == 0.0 => o.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => self.with(Node::Bin(BinOp::Add, self.root.clone(), o.root.clone())),
        }
    }

    pub fn sub(&self, o: &Expression) -> Expression {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => self.with(Node::Const(a - b)),
            (Some(a), _) if a == 0.0 => o.neg(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => self.with(Node::Bin(BinOp::Sub, self.root.clone(), o.root.clone())),
        }
    }

    pub fn mul(&self, o: &Expression) -> Expression {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => self.with(Node::Const(a * b)),
            (Some(a), _) | (_, Some(a)) if a == 0.0 => self.with(Node::Const(0.0)),
            (Some(a), _) if a == 1.0 => o.clone(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            _ => self.with(Node::Bin(BinOp::Mul, self.root.clone(), o.root.clone())),
        }
    }

    pub fn div(&self, o: &Expression) -> Expression {
        match (self.as_const(), o.as_const()) {
            (Some(a), _) if a == 0.0 => self.clone(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            _ => self.with(Node::Bin(BinOp::Div, self.root.clone(), o.root.clone())),
        }
    }

    pub fn scale(&self, c: f64) -> Expression {
        self.mul(&self.with(Node::Const(c)))
    }

    pub fn neg(&self) -> Expression {
        match self.as_const() {
            Some(a) => self.with(Node::Const(-a)),
            None => self.with(Node::Neg(self.root.clone())),
        }
    }

    pub fn call(&self, f: Func) -> Expression {
        self.with(Node::Call(f, self.root.clone()))
    }

    /// Symbolic-free partial derivative node: evaluated exactly by AD.
    pub fn partial(&self, var: usize) -> Expression {
        assert!(var < self.dim());
        if !self.root.uses_var(var) {
            return self.with(Node::Const(0.0));
        }
        if let Node::Var(i) = *self.root {
            return self.with(Node::Const(if i == var { 1.0 } else { 0.0 }));
        }
        self.with(Node::Partial {
            inner: self.root.clone(),
            var,
        })
    }

    /// Substitute `args[i]` for coordinate `i`; the result lives in the
    /// coordinates of `args`.
    pub fn compose(&self, args: &[Expression]) -> Expression {
        assert_eq!(args.len(), self.dim(), "composition arity mismatch");
        let coords = args[0].coords.clone();
        if let Some(c) = self.as_const() {
            return Expression::constant(c, coords);
        }
        if let Node::Var(i) = *self.root {
            return args[i].clone();
        }
        Expression {
            root: Arc::new(Node::Compose {
                inner: self.root.clone(),
                args: args.iter().map(|a| a.root.clone()).collect(),
            }),
            coords,
        }
    }

    /// Reinterpret in another coordinate list of the same dimension.
    pub fn rebind(&self, coords: Arc<[String]>) -> Expression {
        assert_eq!(coords.len(), self.dim());
        Expression {
            root: self.root.clone(),
            coords,
        }
    }

    /// Generic evaluation; needs at least one variable to carry the number
    /// shape. Use [`Expression::eval`] for constant expressions.
    pub fn eval_num<S: Num>(&self, env: &[S]) -> Result<S, EvalError> {
        assert_eq!(env.len(), self.dim(), "point dimension mismatch");
        assert!(!env.is_empty(), "generic evaluation needs at least one variable");
        self.root.eval(env)
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        if point.is_empty() && self.dim() == 0 {
            // constant expression: a one-element carrier gives the value shape
            return self.root.eval(&[0.0]);
        }
        self.eval_num(point)
    }

    /// Value and directional derivative along `seed`.
    pub fn eval_dual(&self, point: &[f64], seed: &[f64]) -> Result<(f64, f64), EvalError> {
        assert_eq!(seed.len(), point.len());
        let env: Vec<Jet> = point
            .iter()
            .zip(seed)
            .map(|(&p, &s)| {
                let mut j = Jet::constant(1, p);
                j.d[0] = s;
                j
            })
            .collect();
        let r = self.eval_num(&env)?;
        Ok((r.v, r.d[0]))
    }

    pub fn value_and_gradient(&self, point: &[f64]) -> Result<DualValue, EvalError> {
        let n = point.len();
        if n <= MAX_JET {
            let r = self.eval_num(&Jet::point(point))?;
            return Ok(DualValue {
                value: r.v,
                partials: r.partials().to_vec(),
            });
        }
        let mut partials = Vec::with_capacity(n);
        let mut value = 0.0;
        for i in 0..n {
            let mut seed = vec![0.0; n];
            seed[i] = 1.0;
            let (v, d) = self.eval_dual(point, &seed)?;
            value = v;
            partials.push(d);
        }
        Ok(DualValue { value, partials })
    }

    pub fn gradient(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.value_and_gradient(point)?.partials)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const RTZ: [&str; 3] = ["r", "θ", "z"];

    #[test]
    fn constant_expression_without_variables() {
        let e = Expression::parse("pi/2 + sqrt(4)", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), PI / 2.0 + 2.0);
    }

    #[test]
    fn sin_at_zero() {
        let e = Expression::parse("sin(r)", &RTZ).unwrap();
        assert_eq!(e.eval_dual(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn r_sin_r_derivative_at_pi() {
        let e = Expression::parse("r*sin(r)", &RTZ).unwrap();
        let (v, d) = e.eval_dual(&[PI, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!(v.abs() < 1e-15);
        assert!((d + PI).abs() < 1e-14);
    }

    #[test]
    fn lambda_zero_theta_coefficient_derivative() {
        let e = Expression::parse("z*(z-2*pi)*sin(z)", &["z", "θ", "s"]).unwrap();
        let (v, d) = e.eval_dual(&[PI, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!(v.abs() < 1e-14);
        // (2z-2π) sin z + z(z-2π) cos z at π = π²
        assert!((d - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let e = Expression::parse("5", &RTZ).unwrap();
        assert_eq!(e.gradient(&[0.3, 1.0, 2.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn cos_gradient() {
        let e = Expression::parse("cos(z)", &RTZ).unwrap();
        let g = e.gradient(&[1.0, 2.0, PI / 2.0]).unwrap();
        assert_eq!(&g[..2], &[0.0, 0.0]);
        assert!((g[2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn smoothstep_flat_outside() {
        let e = Expression::parse("smoothstep5(0.02, 0.1, r)", &RTZ).unwrap();
        for r in [0.01, 0.2] {
            assert_eq!(e.gradient(&[r, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        }
        assert_eq!(e.eval(&[0.01, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(e.eval(&[0.2, 0.0, 0.0]).unwrap(), 1.0);
        assert!((e.eval(&[0.06, 0.0, 0.0]).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn named_subexpression() {
        let mut defs = Definitions::default();
        defs.constant("eps", 0.01);
        defs.define("f", "-eps*tanh(z)", &RTZ).unwrap();
        let e = Expression::parse_with("r*sin(r) + f", &RTZ, &defs).unwrap();
        let p = [1.0, 0.0, 0.5];
        let want = 1.0f64.sin() - 0.01 * 0.5f64.tanh();
        assert!((e.eval(&p).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn partial_node_second_derivative() {
        let e = Expression::parse("sin(r)*z^3", &RTZ).unwrap();
        let dz = e.partial(2);
        let g = dz.gradient(&[0.7, 0.0, 1.3]).unwrap();
        assert!((g[0] - 0.7f64.cos() * 3.0 * 1.3 * 1.3).abs() < 1e-13);
        assert!((g[2] - 0.7f64.sin() * 6.0 * 1.3).abs() < 1e-13);
    }

    #[test]
    fn nested_partials_commute() {
        let e = Expression::parse("exp(r*z)*atan(z-r) + tan(0.3*r)", &RTZ).unwrap();
        let p = [0.4, 0.0, -0.2];
        let a = e.partial(0).partial(2).eval(&p).unwrap();
        let b = e.partial(2).partial(0).eval(&p).unwrap();
        assert!((a - b).abs() < 1e-13);
        let h = 1e-4;
        let fd = (e.partial(0).eval(&[p[0], 0.0, p[2] + h]).unwrap()
            - e.partial(0).eval(&[p[0], 0.0, p[2] - h]).unwrap())
            / (2.0 * h);
        assert!((a - fd).abs() < 1e-7);
    }

    #[test]
    fn domain_errors_name_the_node() {
        let e = Expression::parse("log(r - 1)", &RTZ).unwrap();
        let err = e.eval(&[0.5, 0.0, 0.0]).unwrap_err();
        assert_eq!(err.node, "log()");
        assert_eq!(err.point, vec![0.5, 0.0, 0.0]);
        let e = Expression::parse("1/(r-r)", &RTZ).unwrap();
        assert!(e.eval(&[0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn sqrt_at_zero_is_flat_only() {
        let e = Expression::parse("sqrt(r*r - r*r)", &RTZ).unwrap();
        assert_eq!(e.eval(&[0.5, 0.0, 0.0]).unwrap(), 0.0);
        assert!(e.gradient(&[0.5, 0.0, 0.0]).is_ok());
        let e = Expression::parse("sqrt(z)", &RTZ).unwrap();
        assert!(e.gradient(&[0.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn display_round_trip() {
        let src = "-r^2*cos(θ) + smoothstep5(0.1, 1.2, z)/(1+r) - if(z < 0, 2^-1, atan(z))";
        let e = Expression::parse(src, &RTZ).unwrap();
        let printed = e.to_string();
        let back = Expression::parse(&printed, &RTZ).unwrap();
        for p in [[0.3, 1.0, -0.4], [1.7, -2.0, 0.9]] {
            assert_eq!(e.eval(&p).unwrap(), back.eval(&p).unwrap());
        }
    }

    #[test]
    fn variable_power() {
        let e = Expression::parse("r^z", &RTZ).unwrap();
        let g = e.gradient(&[2.0, 0.0, 3.0]).unwrap();
        assert!((g[0] - 12.0).abs() < 1e-12);
        assert!((g[2] - 8.0 * 2f64.ln()).abs() < 1e-12);
    }
}
