//! Truncated Taylor arithmetic.
//!
//! A [`Jet`] holds the normalized Taylor coefficients `c_k = f^{(k)}(t)/k!`
//! of a function at a point, up to a fixed order. Arithmetic on jets is
//! exact up to rounding, so derivatives of any order up to [`JET_CAP`] − 1
//! come out of the same closed-form expression that computes the value.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number of stored coefficients.
pub const JET_CAP: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; JET_CAP],
    n: usize,
}

impl Jet {
    /// The constant `v` carried to `order`.
    pub fn constant(v: f64, order: usize) -> Jet {
        assert!(order < JET_CAP, "jet order {order} too large");
        let mut c = [0.0; JET_CAP];
        c[0] = v;
        Jet { c, n: order + 1 }
    }

    /// The independent variable at `t`.
    pub fn variable(t: f64, order: usize) -> Jet {
        let mut j = Jet::constant(t, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.n - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.n]
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `f^{(k)}(t)`; zero beyond the carried order.
    pub fn derivative(&self, k: usize) -> f64 {
        if k >= self.n {
            return 0.0;
        }
        let mut f = 1.0;
        for i in 2..=k {
            f *= i as f64;
        }
        self.c[k] * f
    }

    fn zip(self, o: Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let n = self.n.min(o.n);
        let mut c = [0.0; JET_CAP];
        for i in 0..n {
            c[i] = f(self.c[i], o.c[i]);
        }
        Jet { c, n }
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Jet {
        let mut c = self.c;
        for x in c.iter_mut().take(self.n) {
            *x = f(*x);
        }
        Jet { c, n: self.n }
    }

    pub fn recip(self) -> Jet {
        Jet::constant(1.0, self.order()) / self
    }

    pub fn exp(self) -> Jet {
        let a = &self.c;
        let mut e = [0.0; JET_CAP];
        e[0] = a[0].exp();
        for k in 1..self.n {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * a[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet { c: e, n: self.n }
    }

    /// `self^alpha` for a positive leading coefficient.
    pub fn powf(self, alpha: f64) -> Jet {
        let a = &self.c;
        let mut p = [0.0; JET_CAP];
        p[0] = a[0].powf(alpha);
        for k in 1..self.n {
            let mut s = 0.0;
            for j in 1..=k {
                s += ((alpha + 1.0) * j as f64 - k as f64) * a[j] * p[k - j];
            }
            p[k] = s / (k as f64 * a[0]);
        }
        Jet { c: p, n: self.n }
    }

    pub fn powi(self, m: u32) -> Jet {
        let mut out = Jet::constant(1.0, self.order());
        for _ in 0..m {
            out = out * self;
        }
        out
    }

    /// Coefficients of the `m`-th derivative, order reduced by `m`.
    pub fn differentiate(self, m: usize) -> Jet {
        assert!(m < self.n, "cannot differentiate a jet of order {} {m} times", self.order());
        let n = self.n - m;
        let mut c = [0.0; JET_CAP];
        for j in 0..n {
            let mut f = 1.0;
            for i in (j + 1)..=(j + m) {
                f *= i as f64;
            }
            c[j] = self.c[j + m] * f;
        }
        Jet { c, n }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        self.zip(o, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self.zip(o, |a, b| a - b)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|x| -x)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let n = self.n.min(o.n);
        let mut c = [0.0; JET_CAP];
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.c[j] * o.c[k - j];
            }
            c[k] = s;
        }
        Jet { c, n }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, b: Jet) -> Jet {
        let n = self.n.min(b.n);
        let mut c = [0.0; JET_CAP];
        for k in 0..n {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= b.c[j] * c[k - j];
            }
            c[k] = s / b.c[0];
        }
        Jet { c, n }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.map(|x| x * s)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, s: f64) -> Jet {
        self.c[0] += s;
        self
    }
}

/// Scalars the closed forms are written over: `f64` for plain values,
/// [`Jet`] for derivatives.
pub trait Real: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self> {
    /// Constant of the same shape as `self`.
    fn lift(&self, v: f64) -> Self;
    fn val(&self) -> f64;
    fn exp(self) -> Self;
    fn powf(self, a: f64) -> Self;
    fn powi(self, m: u32) -> Self;
    fn scale(self, s: f64) -> Self;
    fn shift(self, s: f64) -> Self;
}

impl Real for f64 {
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn val(&self) -> f64 {
        *self
    }
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    fn powf(self, a: f64) -> f64 {
        f64::powf(self, a)
    }
    fn powi(self, m: u32) -> f64 {
        f64::powi(self, m as i32)
    }
    fn scale(self, s: f64) -> f64 {
        self * s
    }
    fn shift(self, s: f64) -> f64 {
        self + s
    }
}

impl Real for Jet {
    fn lift(&self, v: f64) -> Jet {
        Jet::constant(v, self.order())
    }
    fn val(&self) -> f64 {
        self.c[0]
    }
    fn exp(self) -> Jet {
        Jet::exp(self)
    }
    fn powf(self, a: f64) -> Jet {
        Jet::powf(self, a)
    }
    fn powi(self, m: u32) -> Jet {
        Jet::powi(self, m)
    }
    fn scale(self, s: f64) -> Jet {
        self * s
    }
    fn shift(self, s: f64) -> Jet {
        self + s
    }
}
