use serde::{Deserialize, Serialize};

use super::jet::Jet3;
use crate::error::{LabError, Result};

/// `exp` applied `k` times to `x`.
pub fn iterated_exp(k: usize, x: f64) -> f64 {
    (0..k).fold(x, |acc, _| acc.exp())
}

/// `ln` applied `k` times to `x`; NaN once an intermediate drops to 0 or below.
pub fn iterated_ln(k: usize, x: f64) -> f64 {
    (0..k).fold(x, |acc, _| if acc > 0.0 { acc.ln() } else { f64::NAN })
}

/// Weight `lambda(t) = t prod_{j=1}^K ln^[j](t)` above the threshold `t0`,
/// continued below it by `exp(q(t))` with q quadratic, matching `ln lambda` to
/// second order at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSpec {
    pub k: usize,
    pub t0: f64,
    /// `(ln lambda, (ln lambda)', (ln lambda)'')` at t0.
    pub log_jet_t0: [f64; 3],
    /// `A(t0) = integral_0^t0 ds / lambda(s)`.
    pub a_t0: f64,
}

impl LambdaSpec {
    /// Threshold at the smallest t with `ln^[K](t) >= 1`, plus one.
    pub fn new(k: usize) -> Result<Self> {
        Self::with_margin(k, 1.0)
    }

    pub fn with_margin(k: usize, margin: f64) -> Result<Self> {
        if k > 3 {
            return Err(LabError::parameter(format!(
                "K = {k} puts the threshold beyond floating-point range"
            )));
        }
        if !(margin >= 0.0) {
            return Err(LabError::parameter("threshold margin must be >= 0"));
        }
        let t0 = iterated_exp(k, 1.0) + margin;
        let j = product_log_jet(k, t0);
        let mut spec = LambdaSpec {
            k,
            t0,
            log_jet_t0: [j.v, j.d1, j.d2],
            a_t0: 0.0,
        };
        spec.a_t0 = crate::util::simpson(|s| 1.0 / spec.eval(s), 0.0, t0, 4000);
        Ok(spec)
    }

    /// `lambda(t)`; total and positive.
    pub fn eval(&self, t: f64) -> f64 {
        self.jet(t).v
    }

    /// `lambda` with three derivatives. Below t0 the extension is only matched
    /// to second order, so the third derivative jumps there.
    pub fn jet(&self, t: f64) -> Jet3 {
        let lj = if t >= self.t0 {
            product_log_jet(self.k, t)
        } else {
            let [l0, l1, l2] = self.log_jet_t0;
            let d = t - self.t0;
            Jet3::new(l0 + l1 * d + 0.5 * l2 * d * d, l1 + l2 * d, l2, 0.0)
        };
        lj.exp()
    }

    /// `A(r) = integral_0^r ds / lambda(s)`.
    pub fn a(&self, r: f64) -> f64 {
        if r >= self.t0 {
            self.a_t0 + iterated_ln(self.k + 1, r) - iterated_ln(self.k + 1, self.t0)
        } else if r <= 0.0 {
            0.0
        } else {
            crate::util::simpson(|s| 1.0 / self.eval(s), 0.0, r, 2000)
        }
    }

    /// Inverse of A on `[A(t0), infinity)`.
    pub fn a_inverse(&self, a: f64) -> Result<f64> {
        if a < self.a_t0 {
            return Err(LabError::parameter(format!(
                "A^-1 implemented above A(t0) = {}, got {a}",
                self.a_t0
            )));
        }
        let top = a - self.a_t0 + iterated_ln(self.k + 1, self.t0);
        let r = iterated_exp(self.k + 1, top);
        if !r.is_finite() {
            return Err(LabError::parameter(format!("A^-1({a}) overflows")));
        }
        Ok(r)
    }
}

/// `ln lambda` of the product formula as a jet in t.
fn product_log_jet(k: usize, t: f64) -> Jet3 {
    let x = Jet3::variable(t);
    let mut acc = x.ln();
    let mut l = x;
    for _ in 0..k {
        l = l.ln();
        acc = acc.add(l.ln());
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn product_formula_examples() {
        let s1 = LambdaSpec::new(1).unwrap();
        assert!((s1.eval(E * E) - 2.0 * E * E).abs() < 1e-12);
        // e^e sits below the default threshold e^e + 1, so use margin 0 here.
        let s2 = LambdaSpec::with_margin(2, 0.0).unwrap();
        assert!((s2.eval(E.powf(E)) - E.powf(E + 1.0)).abs() < 1e-10);
    }

    #[test]
    fn positive_everywhere() {
        for k in 0..=2 {
            let s = LambdaSpec::new(k).unwrap();
            for t in [0.0, s.t0 / 2.0, s.t0, 10.0 * s.t0] {
                assert!(s.eval(t) > 0.0, "K = {k}, t = {t}");
            }
        }
    }

    #[test]
    fn extension_matches_two_derivatives() {
        let s = LambdaSpec::new(1).unwrap();
        let a = s.jet(s.t0 - 1e-9);
        let b = s.jet(s.t0 + 1e-9);
        assert!((a.v - b.v).abs() < 1e-7 && (a.d1 - b.d1).abs() < 1e-7 && (a.d2 - b.d2).abs() < 1e-6);
    }

    #[test]
    fn a_is_antiderivative_and_invertible() {
        let s = LambdaSpec::new(1).unwrap();
        let (r1, r2) = (7.0, 30.0);
        let quad = crate::util::simpson(|t| 1.0 / s.eval(t), r1, r2, 2000);
        assert!((s.a(r2) - s.a(r1) - quad).abs() < 1e-10);
        let r = s.a_inverse(s.a(25.0)).unwrap();
        assert!((r - 25.0).abs() < 1e-9);
    }

    #[test]
    fn divergence_of_inverse_weight() {
        // A grows without bound: each unit of A multiplies ln^[K] r by e.
        let s = LambdaSpec::new(1).unwrap();
        let r = s.a_inverse(s.a_t0 + 3.0).unwrap();
        assert!(r.is_finite() && s.a(r) - s.a_t0 > 2.999);
    }

    #[test]
    fn nondecreasing_above_threshold() {
        for k in 0..=2 {
            let s = LambdaSpec::new(k).unwrap();
            let mut prev = 0.0;
            for i in 0..200 {
                let t = s.t0 * (1.0 + 0.05 * i as f64);
                let v = s.eval(t);
                assert!(v >= prev);
                assert!(s.jet(t).d1 > 0.0);
                prev = v;
            }
        }
    }
}
