//! The scalar monotone function `α`, its primitive `A(s) = ∫₀ˢ α` and the
//! Legendre–Fenchel conjugate `A*(ξ) = sup_s (ξ s − A(s))`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs_pow, conjugate_exponent, signed_pow};

/// Which family `α` belongs to.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NonlinearityKind {
    /// `α(s) = |s|^{p−2} s`.
    Power,
    /// Continuous interpolation through `(s, α(s))` knots, extended linearly.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// Same interpolation, loaded from a two-column table.
    Tabulated(Vec<(f64, f64)>),
}

/// Value of `A*` and whether the supremum was cut off at the search bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateValue {
    pub value: f64,
    pub clipped: bool,
}

/// Single-valued nondecreasing `α : ℝ → ℝ` with growth exponent `p`.
///
/// `linear_shift = κ` adds `κ s` to `α` (and `κ s²/2` to `A`); the stability
/// experiments use it for the sequence `αₙ(s) = α(s) + s/n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    p: f64,
    linear_shift: f64,
    /// `G(s_k) = ∫_{s_0}^{s_k} α` at the knots; empty for `Power`.
    knot_integrals: Vec<f64>,
    /// `G(0)`, so that `A(s) = G(s) − G(0)`.
    zero_offset: f64,
}

impl Nonlinearity {
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::config(
                "problem.p",
                format!("must exceed 1, got {p}"),
            ));
        }
        Ok(Nonlinearity {
            kind: NonlinearityKind::Power,
            p,
            linear_shift: 0.0,
            knot_integrals: Vec::new(),
            zero_offset: 0.0,
        })
    }

    /// The identity `α(s) = s` (power with `p = 2`).
    pub fn identity() -> Self {
        Nonlinearity::power(2.0).expect("p = 2 is valid")
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::from_knots(knots, false)
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::from_knots(knots, true)
    }

    fn from_knots(knots: Vec<(f64, f64)>, tabulated: bool) -> Result<Self> {
        let key = "problem.nonlinearity";
        if knots.len() < 2 {
            return Err(Error::config(key, "need at least two knots"));
        }
        if knots.iter().any(|(s, a)| !s.is_finite() || !a.is_finite()) {
            return Err(Error::config(key, "non-finite knot"));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::config(key, "abscissae must be strictly increasing"));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::config(key, "alpha must be nondecreasing"));
            }
        }
        let n = knots.len();
        let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
        if slope(knots[0], knots[1]) <= 0.0 || slope(knots[n - 2], knots[n - 1]) <= 0.0 {
            return Err(Error::config(
                key,
                "end segments need positive slope for quadratic growth",
            ));
        }
        let mut integrals = Vec::with_capacity(n);
        integrals.push(0.0);
        for k in 1..n {
            let (s0, a0) = knots[k - 1];
            let (s1, a1) = knots[k];
            integrals.push(integrals[k - 1] + 0.5 * (a0 + a1) * (s1 - s0));
        }
        let kind = if tabulated {
            NonlinearityKind::Tabulated(knots)
        } else {
            NonlinearityKind::PiecewiseLinear(knots)
        };
        let mut nl = Nonlinearity {
            kind,
            p: 2.0,
            linear_shift: 0.0,
            knot_integrals: integrals,
            zero_offset: 0.0,
        };
        nl.zero_offset = nl.knot_primitive(0.0);
        Ok(nl)
    }

    /// Copy with `κ s` added to `α`.
    pub fn with_linear_shift(&self, kappa: f64) -> Self {
        let mut out = self.clone();
        out.linear_shift += kappa;
        out
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn linear_shift(&self) -> f64 {
        self.linear_shift
    }

    fn knots(&self) -> Option<&[(f64, f64)]> {
        match &self.kind {
            NonlinearityKind::Power => None,
            NonlinearityKind::PiecewiseLinear(k) | NonlinearityKind::Tabulated(k) => Some(k),
        }
    }

    /// Segment containing `s`; a knot belongs to the segment on its left.
    fn segment(knots: &[(f64, f64)], s: f64) -> usize {
        let n = knots.len();
        // first knot index k with s <= s_k, clamped to [1, n-1]
        let k = knots.partition_point(|(sk, _)| *sk < s);
        k.clamp(1, n - 1) - 1
    }

    fn knot_alpha(knots: &[(f64, f64)], s: f64) -> f64 {
        let k = Self::segment(knots, s);
        let (s0, a0) = knots[k];
        let (s1, a1) = knots[k + 1];
        a0 + (a1 - a0) * (s - s0) / (s1 - s0)
    }

    fn knot_primitive(&self, s: f64) -> f64 {
        let knots = self.knots().expect("knot nonlinearity");
        let k = Self::segment(knots, s);
        let (s0, a0) = knots[k];
        self.knot_integrals[k] + 0.5 * (a0 + Self::knot_alpha(knots, s)) * (s - s0)
    }

    pub fn alpha(&self, s: f64) -> f64 {
        let base = match self.knots() {
            None => signed_pow(s, self.p),
            Some(k) => Self::knot_alpha(k, s),
        };
        base + self.linear_shift * s
    }

    /// Derivative used by Newton; at a knot the left slope is taken.
    ///
    /// For `p < 2` the power law has an infinite slope at zero, which is
    /// clamped at `|s| ≥ 1e-8`.
    pub fn alpha_prime(&self, s: f64) -> f64 {
        let base = match self.knots() {
            None => {
                if self.p == 2.0 {
                    1.0
                } else {
                    let a = if self.p < 2.0 {
                        s.abs().max(1e-8)
                    } else {
                        s.abs()
                    };
                    (self.p - 1.0) * abs_pow(a, self.p - 2.0)
                }
            }
            Some(knots) => {
                let k = Self::segment(knots, s);
                (knots[k + 1].1 - knots[k].1) / (knots[k + 1].0 - knots[k].0)
            }
        };
        base + self.linear_shift
    }

    pub fn primitive(&self, s: f64) -> f64 {
        let base = match self.knots() {
            None => abs_pow(s, self.p) / self.p,
            Some(_) => self.knot_primitive(s) - self.zero_offset,
        };
        base + 0.5 * self.linear_shift * s * s
    }

    /// `A*(ξ)`: closed form for an unshifted power law, otherwise golden-section
    /// maximization of `ξ s − A(s)` over a bracket where `α` crosses `ξ`.
    pub fn conjugate(&self, xi: f64) -> ConjugateValue {
        if matches!(self.kind, NonlinearityKind::Power) && self.linear_shift == 0.0 {
            let q = conjugate_exponent(self.p);
            return ConjugateValue {
                value: abs_pow(xi, q) / q,
                clipped: false,
            };
        }
        let (lo, hi, clipped) = self.bracket(xi);
        let s = golden_max(|s| xi * s - self.primitive(s), lo, hi);
        ConjugateValue {
            value: xi * s - self.primitive(s),
            clipped,
        }
    }

    fn bracket(&self, xi: f64) -> (f64, f64, bool) {
        let mut lo = -1.0;
        let mut hi = 1.0;
        for _ in 0..200 {
            let ok_lo = self.alpha(lo) <= xi;
            let ok_hi = self.alpha(hi) >= xi;
            if ok_lo && ok_hi {
                return (lo, hi, false);
            }
            if !ok_lo {
                lo *= 2.0;
            }
            if !ok_hi {
                hi *= 2.0;
            }
            if lo < -1e150 || hi > 1e150 {
                break;
            }
        }
        (lo, hi, true)
    }
}

/// Maximizer of a concave function on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Empirical growth constants `c`, `C` with `c|s|^p − 1/c ≤ A(s)` and
/// `|α(s)|^{p'} ≤ C(|s|^p + 1)` on the sampled range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants {
    pub lower_c: f64,
    pub upper_c: f64,
}

impl Nonlinearity {
    /// Samples `s ∈ [−range, range]` and returns the tightest constants found.
    ///
    /// `lower_c` is the largest `c` (searched on a geometric grid) for which the
    /// lower bound holds on every sample.
    pub fn growth_constants(&self, range: f64, samples: usize) -> GrowthConstants {
        let p = self.p;
        let q = conjugate_exponent(p);
        let pts: Vec<f64> = (0..=samples)
            .map(|k| -range + 2.0 * range * k as f64 / samples as f64)
            .collect();
        let upper_c = pts
            .iter()
            .map(|s| abs_pow(self.alpha(*s), q) / (abs_pow(*s, p) + 1.0))
            .fold(0.0, f64::max);
        let holds = |c: f64| {
            pts.iter()
                .all(|s| c * abs_pow(*s, p) - 1.0 / c <= self.primitive(*s) + 1e-12)
        };
        let mut lower_c = 0.0;
        let mut c = 1.0;
        for _ in 0..200 {
            if holds(c) {
                lower_c = c;
                break;
            }
            c *= 0.8;
        }
        GrowthConstants { lower_c, upper_c }
    }
}
