//! Number types the expression evaluator is generic over.
//!
//! * `f64` for plain values.
//! * [`Jet`]: value plus a fixed-capacity vector of first partials (forward mode).
//! * [`Hyper`]: truncated polynomial in `g` nilpotent generators `ε₁..ε_g` with
//!   `εᵢ² = 0`. Stored as `2^g` coefficients indexed by generator bitmask. Nested
//!   derivatives (the exterior derivative of an exterior derivative, pullbacks of
//!   derivatives) evaluate exactly by adding one generator per derivative.
//!
//! Elementary functions are applied uniformly through their Taylor coefficients
//! at the real part: `f(a₀ + n) = Σ cₖ nᵏ` with `n` the nilpotent part.

use std::fmt;

/// Maximum number of partials a [`Jet`] carries.
pub const MAX_JET: usize = 8;

pub trait Num: Clone + fmt::Debug {
    /// A constant with the same shape (jet width, generator count) as `self`.
    fn constant_like(&self, c: f64) -> Self;
    fn re(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, c: f64) -> Self;
    /// Highest derivative order whose coefficient can be nonzero.
    fn order(&self) -> usize;
    /// True if every infinitesimal part is zero.
    fn is_flat(&self) -> bool;
    /// Apply a scalar function given its Taylor coefficients `c[k] = f⁽ᵏ⁾(re)/k!`
    /// for `k = 0..=order()`.
    fn compose(&self, taylor: &[f64]) -> Self;
    fn to_hyper(&self) -> Hyper;
    /// Truncate a hyper number back into the shape of `like`.
    fn from_hyper(h: &Hyper, like: &Self) -> Self;
}

impl Num for f64 {
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn re(&self) -> f64 {
        *self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn order(&self) -> usize {
        0
    }
    fn is_flat(&self) -> bool {
        true
    }
    fn compose(&self, taylor: &[f64]) -> Self {
        taylor[0]
    }
    fn to_hyper(&self) -> Hyper {
        Hyper::constant(0, *self)
    }
    fn from_hyper(h: &Hyper, _like: &Self) -> Self {
        h.c[0]
    }
}

/// First-order forward-mode number: `v + Σ dᵢ εᵢ`.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; MAX_JET],
    pub n: u8,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet({}, {:?})", self.v, self.partials())
    }
}

impl Jet {
    pub fn constant(n: usize, v: f64) -> Self {
        assert!(n <= MAX_JET, "jet width {n} exceeds {MAX_JET}");
        Jet {
            v,
            d: [0.0; MAX_JET],
            n: n as u8,
        }
    }

    /// The `i`-th coordinate variable of an `n`-dimensional point.
    pub fn variable(n: usize, i: usize, v: f64) -> Self {
        let mut j = Self::constant(n, v);
        j.d[i] = 1.0;
        j
    }

    /// Seed every coordinate with its own partial direction.
    pub fn point(x: &[f64]) -> Vec<Jet> {
        let n = x.len();
        x.iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(n, i, v))
            .collect()
    }

    pub fn partials(&self) -> &[f64] {
        &self.d[..self.n as usize]
    }

    fn width(&self, o: &Self) -> usize {
        self.n.max(o.n) as usize
    }
}

impl Num for Jet {
    fn constant_like(&self, c: f64) -> Self {
        Jet::constant(self.n as usize, c)
    }
    fn re(&self) -> f64 {
        self.v
    }
    fn add(&self, o: &Self) -> Self {
        let n = self.width(o);
        let mut r = Jet::constant(n, self.v + o.v);
        for i in 0..n {
            r.d[i] = self.d[i] + o.d[i];
        }
        r
    }
    fn sub(&self, o: &Self) -> Self {
        let n = self.width(o);
        let mut r = Jet::constant(n, self.v - o.v);
        for i in 0..n {
            r.d[i] = self.d[i] - o.d[i];
        }
        r
    }
    fn mul(&self, o: &Self) -> Self {
        let n = self.width(o);
        let mut r = Jet::constant(n, self.v * o.v);
        for i in 0..n {
            r.d[i] = self.d[i] * o.v + self.v * o.d[i];
        }
        r
    }
    fn neg(&self) -> Self {
        self.scale(-1.0)
    }
    fn scale(&self, c: f64) -> Self {
        let mut r = *self;
        r.v *= c;
        for x in r.d.iter_mut().take(self.n as usize) {
            *x *= c;
        }
        r
    }
    fn order(&self) -> usize {
        usize::from(self.n > 0)
    }
    fn is_flat(&self) -> bool {
        self.partials().iter().all(|&x| x == 0.0)
    }
    fn compose(&self, taylor: &[f64]) -> Self {
        let mut r = Jet::constant(self.n as usize, taylor[0]);
        if self.n > 0 {
            let c1 = taylor[1];
            for i in 0..self.n as usize {
                r.d[i] = c1 * self.d[i];
            }
        }
        r
    }
    fn to_hyper(&self) -> Hyper {
        let g = self.n as usize;
        let mut h = Hyper::constant(g, self.v);
        for i in 0..g {
            h.c[1 << i] = self.d[i];
        }
        h
    }
    fn from_hyper(h: &Hyper, like: &Self) -> Self {
        let n = like.n as usize;
        let mut r = Jet::constant(n, h.c[0]);
        for i in 0..n.min(h.generators()) {
            r.d[i] = h.c[1 << i];
        }
        r
    }
}

/// Truncated multivariate polynomial in nilpotent generators.
#[derive(Clone, PartialEq)]
pub struct Hyper {
    g: u8,
    pub(crate) c: Vec<f64>,
}

impl fmt::Debug for Hyper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hyper[g={}]{:?}", self.g, self.c)
    }
}

impl Hyper {
    pub fn constant(g: usize, v: f64) -> Self {
        let mut c = vec![0.0; 1 << g];
        c[0] = v;
        Hyper { g: g as u8, c }
    }

    pub fn generators(&self) -> usize {
        self.g as usize
    }

    /// Coefficient of the product of the generators in `mask`.
    pub fn coeff(&self, mask: usize) -> f64 {
        self.c[mask]
    }

    /// Embed into a space with one more generator (zero coefficients on it).
    pub fn lift(&self) -> Hyper {
        let mut c = self.c.clone();
        c.resize(self.c.len() * 2, 0.0);
        Hyper { g: self.g + 1, c }
    }

    /// `self + ε_top` where `ε_top` is the highest generator.
    pub fn add_top_generator(&mut self) {
        let top = 1 << (self.g - 1);
        self.c[top] += 1.0;
    }

    /// The coefficient of the top generator, as a hyper number in the remaining
    /// generators: the derivative along that generator.
    pub fn top_derivative(&self) -> Hyper {
        let half = self.c.len() / 2;
        Hyper {
            g: self.g - 1,
            c: self.c[half..].to_vec(),
        }
    }

    fn unify(&self, o: &Hyper) -> (Hyper, Hyper) {
        let mut a = self.clone();
        let mut b = o.clone();
        while a.g < b.g {
            a = a.lift();
        }
        while b.g < a.g {
            b = b.lift();
        }
        (a, b)
    }

    fn mul_same(a: &[f64], b: &[f64]) -> Vec<f64> {
        let len = a.len();
        let mut out = vec![0.0; len];
        for (s, o) in out.iter_mut().enumerate() {
            // Enumerate submasks of s.
            let mut sub = s;
            let mut acc = 0.0;
            loop {
                acc += a[sub] * b[s ^ sub];
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & s;
            }
            *o = acc;
        }
        out
    }
}

impl Num for Hyper {
    fn constant_like(&self, c: f64) -> Self {
        Hyper::constant(self.g as usize, c)
    }
    fn re(&self) -> f64 {
        self.c[0]
    }
    fn add(&self, o: &Self) -> Self {
        if self.g == o.g {
            let c = self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect();
            return Hyper { g: self.g, c };
        }
        let (a, b) = self.unify(o);
        a.add(&b)
    }
    fn sub(&self, o: &Self) -> Self {
        if self.g == o.g {
            let c = self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect();
            return Hyper { g: self.g, c };
        }
        let (a, b) = self.unify(o);
        a.sub(&b)
    }
    fn mul(&self, o: &Self) -> Self {
        if self.g == o.g {
            return Hyper {
                g: self.g,
                c: Hyper::mul_same(&self.c, &o.c),
            };
        }
        let (a, b) = self.unify(o);
        a.mul(&b)
    }
    fn neg(&self) -> Self {
        self.scale(-1.0)
    }
    fn scale(&self, k: f64) -> Self {
        Hyper {
            g: self.g,
            c: self.c.iter().map(|x| x * k).collect(),
        }
    }
    fn order(&self) -> usize {
        self.g as usize
    }
    fn is_flat(&self) -> bool {
        self.c[1..].iter().all(|&x| x == 0.0)
    }
    fn compose(&self, taylor: &[f64]) -> Self {
        let mut nil = self.clone();
        nil.c[0] = 0.0;
        let mut out = Hyper::constant(self.g as usize, taylor[0]);
        let mut power = nil.clone();
        for (k, &ck) in taylor.iter().enumerate().skip(1) {
            if k > 1 {
                power = power.mul(&nil);
            }
            if ck != 0.0 {
                for (o, p) in out.c.iter_mut().zip(&power.c) {
                    *o += ck * p;
                }
            }
        }
        out
    }
    fn to_hyper(&self) -> Hyper {
        self.clone()
    }
    fn from_hyper(h: &Hyper, like: &Self) -> Self {
        let mut h = h.clone();
        while h.g < like.g {
            h = h.lift();
        }
        h
    }
}

/// Truncated univariate power series helpers (coefficients in powers of `h`).
pub(crate) mod series {
    pub fn div(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut q = vec![0.0; n];
        for k in 0..n {
            let s: f64 = (1..=k).map(|i| b[i] * q[k - i]).sum();
            q[k] = (a[k] - s) / b[0];
        }
        q
    }

    /// Antiderivative with constant term `c0`, truncated to the same length.
    pub fn integrate(a: &[f64], c0: f64) -> Vec<f64> {
        let n = a.len();
        let mut out = vec![0.0; n];
        out[0] = c0;
        for k in 1..n {
            out[k] = a[k - 1] / k as f64;
        }
        out
    }
}
