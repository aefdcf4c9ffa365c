use std::fmt;
use std::sync::Arc;

use super::num::{series, Hyper, Num};
use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Atan,
    Tanh,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    /// Taylor coefficients `f⁽ᵏ⁾(x)/k!` for `k = 0..=order`.
    fn taylor(self, x: f64, order: usize) -> Result<Vec<f64>, String> {
        let n = order + 1;
        let mut c = vec![0.0; n];
        match self {
            Func::Sin | Func::Cos => {
                let shift = if self == Func::Cos { 1 } else { 0 };
                let (s, co) = x.sin_cos();
                let mut fact = 1.0;
                for (k, ck) in c.iter_mut().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    let d = match (k + shift) % 4 {
                        0 => s,
                        1 => co,
                        2 => -s,
                        _ => -co,
                    };
                    *ck = d / fact;
                }
            }
            Func::Exp => {
                let e = x.exp();
                let mut fact = 1.0;
                for (k, ck) in c.iter_mut().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    *ck = e / fact;
                }
            }
            Func::Log => {
                if x <= 0.0 {
                    return Err(format!("log of non-positive value {x}"));
                }
                c[0] = x.ln();
                for (k, ck) in c.iter_mut().enumerate().skip(1) {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    *ck = sign / (k as f64 * x.powi(k as i32));
                }
            }
            Func::Sqrt => return power_taylor(x, 0.5, order),
            Func::Tan => {
                let (s, co) = x.sin_cos();
                if co.abs() < 1e-300 {
                    return Err(format!("tan pole at {x}"));
                }
                if order <= 1 {
                    c[0] = s / co;
                    if order == 1 {
                        c[1] = 1.0 / (co * co);
                    }
                } else {
                    let sn = Func::Sin.taylor(x, order)?;
                    let cs = Func::Cos.taylor(x, order)?;
                    c = series::div(&sn, &cs);
                }
            }
            Func::Tanh => {
                let t = x.tanh();
                if order <= 1 {
                    c[0] = t;
                    if order == 1 {
                        c[1] = 1.0 - t * t;
                    }
                } else {
                    // tanh' = 1 - tanh², solved order by order.
                    c[0] = t;
                    for k in 1..n {
                        let sq: f64 = (0..k).map(|i| c[i] * c[k - 1 - i]).sum();
                        let one = if k == 1 { 1.0 } else { 0.0 };
                        c[k] = (one - sq) / k as f64;
                    }
                }
            }
            Func::Atan => {
                if order <= 1 {
                    c[0] = x.atan();
                    if order == 1 {
                        c[1] = 1.0 / (1.0 + x * x);
                    }
                } else {
                    // atan(x+h) = atan(x) + ∫ 1/(1+(x+h)²) dh
                    let mut den = vec![0.0; n];
                    den[0] = 1.0 + x * x;
                    if n > 1 {
                        den[1] = 2.0 * x;
                    }
                    if n > 2 {
                        den[2] = 1.0;
                    }
                    let mut one = vec![0.0; n];
                    one[0] = 1.0;
                    let q = series::div(&one, &den);
                    c = series::integrate(&q, x.atan());
                }
            }
        }
        Ok(c)
    }
}

/// Taylor coefficients of `x^p` for real `p`.
fn power_taylor(x: f64, p: f64, order: usize) -> Result<Vec<f64>, String> {
    let integer = p.fract() == 0.0;
    if x < 0.0 && !integer {
        return Err(format!("non-integer power {p} of negative value {x}"));
    }
    let mut c = vec![0.0; order + 1];
    c[0] = x.powf(p);
    let mut binom = 1.0;
    for k in 1..=order {
        binom *= (p - (k as f64 - 1.0)) / k as f64;
        if binom == 0.0 {
            break;
        }
        let e = p - k as f64;
        if x == 0.0 && e < 0.0 {
            return Err(format!("derivative of x^{p} is singular at 0"));
        }
        c[k] = binom * if integer { x.powi(e as i32) } else { x.powf(e) };
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Guard {
    pub lhs: Arc<Node>,
    pub op: CmpOp,
    pub rhs: Arc<Node>,
}

/// A scalar function of several reals supplied from outside the grammar
/// (splines, ODE-derived profiles). Derivatives are optional.
pub trait OpaqueFn: Send + Sync + fmt::Debug {
    fn arity(&self) -> usize;
    fn value(&self, args: &[f64]) -> Result<f64, String>;
    /// First partials, when available.
    fn gradient(&self, _args: &[f64]) -> Option<Vec<f64>> {
        None
    }
    fn name(&self) -> &str {
        "opaque"
    }
}

#[derive(Clone, Debug)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Arc<Node>),
    Bin(BinOp, Arc<Node>, Arc<Node>),
    Call(Func, Arc<Node>),
    /// C² quintic step from 0 at `a` to 1 at `b`, evaluated at `x`.
    Smoothstep {
        a: Arc<Node>,
        b: Arc<Node>,
        x: Arc<Node>,
    },
    Piecewise {
        branches: Vec<(Guard, Arc<Node>)>,
        otherwise: Arc<Node>,
    },
    /// Partial derivative of `inner` along variable `var`, evaluated by
    /// adding one nilpotent generator.
    Partial { inner: Arc<Node>, var: usize },
    /// `inner` evaluated with its variables bound to `args`.
    Compose { inner: Arc<Node>, args: Vec<Arc<Node>> },
    Opaque {
        func: Arc<dyn OpaqueFn>,
        args: Vec<Arc<Node>>,
    },
}

impl Node {
    /// Short description used in error reports.
    pub fn label(&self) -> String {
        match self {
            Node::Const(c) => format!("constant {c}"),
            Node::Var(i) => format!("variable #{i}"),
            Node::Neg(_) => "negation".into(),
            Node::Bin(op, _, _) => format!("{op:?}").to_lowercase(),
            Node::Call(f, _) => format!("{}()", f.name()),
            Node::Smoothstep { .. } => "smoothstep5()".into(),
            Node::Piecewise { .. } => "piecewise()".into(),
            Node::Partial { .. } => "diff()".into(),
            Node::Compose { .. } => "composition".into(),
            Node::Opaque { func, .. } => func.name().to_string(),
        }
    }

    /// Whether variable `i` can influence the value.
    pub fn uses_var(&self, i: usize) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Var(j) => *j == i,
            Node::Neg(a) | Node::Call(_, a) | Node::Partial { inner: a, .. } => a.uses_var(i),
            Node::Bin(_, a, b) => a.uses_var(i) || b.uses_var(i),
            Node::Smoothstep { a, b, x } => a.uses_var(i) || b.uses_var(i) || x.uses_var(i),
            Node::Piecewise { branches, otherwise } => {
                otherwise.uses_var(i)
                    || branches
                        .iter()
                        .any(|(g, e)| e.uses_var(i) || g.lhs.uses_var(i) || g.rhs.uses_var(i))
            }
            Node::Compose { args, .. } | Node::Opaque { args, .. } => args.iter().any(|a| a.uses_var(i)),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn eval<S: Num>(&self, env: &[S]) -> Result<S, EvalError> {
        match self {
            Node::Const(c) => Ok(env_like(env).constant_like(*c)),
            Node::Var(i) => Ok(env[*i].clone()),
            Node::Neg(a) => Ok(a.eval(env)?.neg()),
            Node::Bin(op, a, b) => {
                let x = a.eval(env)?;
                match op {
                    BinOp::Add => Ok(x.add(&b.eval(env)?)),
                    BinOp::Sub => Ok(x.sub(&b.eval(env)?)),
                    BinOp::Mul => Ok(x.mul(&b.eval(env)?)),
                    BinOp::Div => {
                        let y = b.eval(env)?;
                        let d = y.re();
                        if d == 0.0 {
                            return Err(EvalError::domain(self, "division by zero", env));
                        }
                        let taylor = power_taylor(d, -1.0, y.order())
                            .map_err(|m| EvalError::domain(self, &m, env))?;
                        Ok(x.mul(&y.compose(&taylor)))
                    }
                    BinOp::Pow => {
                        if let Some(p) = b.as_const() {
                            return pow_const(self, &x, p, env);
                        }
                        let y = b.eval(env)?;
                        if y.is_flat() {
                            return pow_const(self, &x, y.re(), env);
                        }
                        if x.re() <= 0.0 {
                            return Err(EvalError::domain(
                                self,
                                "variable exponent needs positive base",
                                env,
                            ));
                        }
                        let lt = Func::Log
                            .taylor(x.re(), x.order())
                            .map_err(|m| EvalError::domain(self, &m, env))?;
                        let e = y.mul(&x.compose(&lt));
                        let et = Func::Exp
                            .taylor(e.re(), e.order())
                            .map_err(|m| EvalError::domain(self, &m, env))?;
                        Ok(e.compose(&et))
                    }
                }
            }
            Node::Call(f, a) => {
                let x = a.eval(env)?;
                if *f == Func::Sqrt && x.re() == 0.0 {
                    // sqrt(0) is fine when nothing differentiates through it.
                    if x.is_flat() {
                        return Ok(x.constant_like(0.0));
                    }
                    return Err(EvalError::domain(self, "derivative of sqrt at 0", env));
                }
                let t = f
                    .taylor(x.re(), x.order())
                    .map_err(|m| EvalError::domain(self, &m, env))?;
                Ok(x.compose(&t))
            }
            Node::Smoothstep { a, b, x } => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                let x = x.eval(env)?;
                let w = b.sub(&a);
                if w.re() <= 0.0 {
                    return Err(EvalError::domain(self, "smoothstep5 needs a < b", env));
                }
                let winv = power_taylor(w.re(), -1.0, w.order())
                    .map_err(|m| EvalError::domain(self, &m, env))?;
                let s = x.sub(&a).mul(&w.compose(&winv));
                let sr = s.re();
                if sr <= 0.0 {
                    return Ok(s.constant_like(0.0));
                }
                if sr >= 1.0 {
                    return Ok(s.constant_like(1.0));
                }
                // 10s³ - 15s⁴ + 6s⁵ as a polynomial in the nilpotent part of s.
                let t = quintic_taylor(sr, s.order());
                Ok(s.compose(&t))
            }
            Node::Piecewise {
                branches,
                otherwise,
            } => {
                for (g, e) in branches {
                    let l = g.lhs.eval(env)?.re();
                    let r = g.rhs.eval(env)?.re();
                    if g.op.holds(l, r) {
                        return e.eval(env);
                    }
                }
                otherwise.eval(env)
            }
            Node::Partial { inner, var } => {
                let lifted: Vec<Hyper> = env.iter().map(|v| v.to_hyper().lift()).collect();
                let g = lifted.iter().map(|h| h.generators()).max().unwrap_or(1);
                let mut lifted: Vec<Hyper> = lifted
                    .into_iter()
                    .map(|mut h| {
                        while h.generators() < g {
                            h = h.lift();
                        }
                        h
                    })
                    .collect();
                lifted[*var].add_top_generator();
                let r = inner.eval(&lifted)?;
                let r = widen(r, g);
                Ok(S::from_hyper(&r.top_derivative(), env_like(env)))
            }
            Node::Compose { inner, args } => {
                let vals = args
                    .iter()
                    .map(|a| a.eval(env))
                    .collect::<Result<Vec<_>, _>>()?;
                inner.eval(&vals)
            }
            Node::Opaque { func, args } => {
                let vals = args
                    .iter()
                    .map(|a| a.eval(env))
                    .collect::<Result<Vec<_>, _>>()?;
                eval_opaque(self, func.as_ref(), &vals, env)
            }
        }
    }
}

fn widen(mut h: Hyper, g: usize) -> Hyper {
    while h.generators() < g {
        h = h.lift();
    }
    h
}

fn env_like<S: Num>(env: &[S]) -> &S {
    // Expressions with zero variables are evaluated against a one-element
    // shape carrier; see `Expression::eval`.
    &env[0]
}

fn pow_const<S: Num>(node: &Node, x: &S, p: f64, env: &[S]) -> Result<S, EvalError> {
    if p == 0.0 {
        return Ok(x.constant_like(1.0));
    }
    if p == 1.0 {
        return Ok(x.clone());
    }
    if p == 2.0 {
        return Ok(x.mul(x));
    }
    let xr = x.re();
    if xr == 0.0 && p.fract() == 0.0 && p > 0.0 {
        // Polynomial: expand exactly; only finitely many derivatives are nonzero.
        let order = x.order();
        let mut c = vec![0.0; order + 1];
        let k = p as usize;
        if k <= order {
            c[k] = 1.0;
        }
        return Ok(x.compose(&c));
    }
    if xr == 0.0 && p > 0.0 && x.is_flat() {
        return Ok(x.constant_like(0.0));
    }
    let t = power_taylor(xr, p, x.order()).map_err(|m| EvalError::domain(node, &m, env))?;
    Ok(x.compose(&t))
}

fn quintic_taylor(s: f64, order: usize) -> Vec<f64> {
    // p(s) = 10s³ - 15s⁴ + 6s⁵, derivatives up to the 5th, divided by k!.
    let all = [
        10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5),
        30.0 * s * s - 60.0 * s.powi(3) + 30.0 * s.powi(4),
        (60.0 * s - 180.0 * s * s + 120.0 * s.powi(3)) / 2.0,
        (60.0 - 360.0 * s + 360.0 * s * s) / 6.0,
        (-360.0 + 720.0 * s) / 24.0,
        720.0 / 120.0,
    ];
    (0..=order).map(|k| all.get(k).copied().unwrap_or(0.0)).collect()
}

fn eval_opaque<S: Num>(
    node: &Node,
    func: &dyn OpaqueFn,
    vals: &[S],
    env: &[S],
) -> Result<S, EvalError> {
    let re: Vec<f64> = vals.iter().map(Num::re).collect();
    let v = func
        .value(&re)
        .map_err(|m| EvalError::domain(node, &m, env))?;
    let shape = vals.first().unwrap_or_else(|| env_like(env));
    let mut out = shape.constant_like(v);
    if vals.iter().all(Num::is_flat) {
        return Ok(out);
    }
    let grad = func.gradient(&re).ok_or_else(|| {
        EvalError::domain(node, &format!("{} has no derivative", func.name()), env)
    })?;
    // First-order chain rule; reject inputs whose nilpotent parts multiply.
    let mut nils = Vec::with_capacity(vals.len());
    for (x, g) in vals.iter().zip(&grad) {
        let nil = x.sub(&x.constant_like(x.re()));
        out = out.add(&nil.scale(*g));
        nils.push(nil);
    }
    if shape.order() > 1 {
        for a in &nils {
            for b in &nils {
                if !a.mul(b).is_flat() {
                    return Err(EvalError::domain(
                        node,
                        &format!("{} has no second derivative", func.name()),
                        env,
                    ));
                }
            }
        }
    }
    Ok(out)
}

pub(crate) struct Printer<'a> {
    pub node: &'a Node,
    pub names: &'a [String],
}

impl Printer<'_> {
    fn sub<'b>(&'b self, node: &'b Node) -> Printer<'b> {
        Printer {
            node,
            names: self.names,
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::Var(i) => write!(f, "{}", self.names[*i]),
            Node::Neg(a) => write!(f, "(-{})", self.sub(a)),
            Node::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({} {s} {})", self.sub(a), self.sub(b))
            }
            Node::Call(func, a) => write!(f, "{}({})", func.name(), self.sub(a)),
            Node::Smoothstep { a, b, x } => write!(
                f,
                "smoothstep5({}, {}, {})",
                self.sub(a),
                self.sub(b),
                self.sub(x)
            ),
            Node::Piecewise {
                branches,
                otherwise,
            } => {
                write!(f, "piecewise(")?;
                for (g, e) in branches {
                    write!(
                        f,
                        "{} {} {}, {}, ",
                        self.sub(&g.lhs),
                        g.op.symbol(),
                        self.sub(&g.rhs),
                        self.sub(e)
                    )?;
                }
                write!(f, "{})", self.sub(otherwise))
            }
            Node::Partial { inner, var } => {
                write!(f, "diff({}, {})", self.sub(inner), self.names[*var])
            }
            Node::Compose { .. } => write!(f, "<composition>"),
            Node::Opaque { func, .. } => write!(f, "<{}>", func.name()),
        }
    }
}
