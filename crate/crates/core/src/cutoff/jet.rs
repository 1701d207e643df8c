/// Value and first three derivatives of a function of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet3 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet3 {
    pub fn new(v: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Jet3 { v, d1, d2, d3 }
    }

    pub fn constant(v: f64) -> Self {
        Jet3::new(v, 0.0, 0.0, 0.0)
    }

    /// The identity `t -> t` at t.
    pub fn variable(t: f64) -> Self {
        Jet3::new(t, 1.0, 0.0, 0.0)
    }

    /// `g(self)` where `g` has value and derivatives `(g0, g1, g2, g3)` at `self.v`.
    pub fn compose(self, g0: f64, g1: f64, g2: f64, g3: f64) -> Self {
        let (f1, f2, f3) = (self.d1, self.d2, self.d3);
        Jet3 {
            v: g0,
            d1: g1 * f1,
            d2: g2 * f1 * f1 + g1 * f2,
            d3: g3 * f1 * f1 * f1 + 3.0 * g2 * f1 * f2 + g1 * f3,
        }
    }

    pub fn ln(self) -> Self {
        let x = self.v;
        self.compose(x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e, e)
    }

    pub fn recip(self) -> Self {
        let x = self.v;
        self.compose(1.0 / x, -1.0 / (x * x), 2.0 / x.powi(3), -6.0 / x.powi(4))
    }

    pub fn mul(self, o: Jet3) -> Self {
        Jet3 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
            d3: self.d3 * o.v + 3.0 * self.d2 * o.d1 + 3.0 * self.d1 * o.d2 + self.v * o.d3,
        }
    }

    pub fn add(self, o: Jet3) -> Self {
        Jet3::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2, self.d3 + o.d3)
    }

    pub fn scale(self, s: f64) -> Self {
        Jet3::new(s * self.v, s * self.d1, s * self.d2, s * self.d3)
    }
}
