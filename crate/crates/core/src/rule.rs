//! Symbolic weight rules for structured operators.
//!
//! A rule is a partial map from sequence indices to complex scalars. Shift
//! weights, diagonal entries, and band coefficients are all rules, and the
//! algebra is closed under the operations structured-operator arithmetic
//! needs: conjugation (adjoints), index shifts (band composition), sums and
//! products (operator sums and products), and pointwise quotients
//! (consecutive-ratio weights such as `p_n / p_{n+1}`).
//!
//! Evaluation returns `None` where a rule is undefined (an explicit table
//! ran out, or a denominator vanished); a `Shifted` node evaluated below
//! index zero contributes an exact zero, matching the vanishing matrix
//! entries past the edge of a band.

use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightRule {
    /// Finite table of values; undefined past the end.
    Explicit(Vec<C64>),
    /// `first * ratio^n`.
    Geometric { first: C64, ratio: C64 },
    /// `(a n + b) / (c n + d)` with real coefficients, as `num = (a, b)`,
    /// `den = (c, d)`.
    RationalLinear { num: (f64, f64), den: (f64, f64) },
    /// `num(n) / den(n + den_shift)`.
    Quotient { num: Box<WeightRule>, den: Box<WeightRule>, den_shift: i64 },
    /// Same value at every index.
    Constant(C64),
    /// Complex conjugate of the inner rule.
    Conj(Box<WeightRule>),
    /// `inner(n + offset)`; indices pushed below zero evaluate to zero.
    Shifted { inner: Box<WeightRule>, offset: i64 },
    Sum(Vec<WeightRule>),
    Product(Vec<WeightRule>),
}

impl WeightRule {
    pub fn eval(&self, n: usize) -> Option<C64> {
        match self {
            WeightRule::Explicit(values) => values.get(n).copied(),
            WeightRule::Geometric { first, ratio } => {
                Some(*first * pow_u(*ratio, n))
            }
            WeightRule::RationalLinear { num, den } => {
                let x = n as f64;
                let d = den.0 * x + den.1;
                if d == 0.0 {
                    None
                } else {
                    Some(C64::new((num.0 * x + num.1) / d, 0.0))
                }
            }
            WeightRule::Quotient { num, den, den_shift } => {
                let dn = checked_index(n, *den_shift)?;
                let d = den.eval(dn)?;
                if d == C64::new(0.0, 0.0) {
                    None
                } else {
                    Some(num.eval(n)? / d)
                }
            }
            WeightRule::Constant(c) => Some(*c),
            WeightRule::Conj(inner) => inner.eval(n).map(|v| v.conj()),
            WeightRule::Shifted { inner, offset } => {
                let m = n as i64 + offset;
                if m < 0 {
                    Some(C64::new(0.0, 0.0))
                } else {
                    inner.eval(m as usize)
                }
            }
            WeightRule::Sum(terms) => {
                let mut acc = C64::new(0.0, 0.0);
                for t in terms {
                    acc += t.eval(n)?;
                }
                Some(acc)
            }
            WeightRule::Product(factors) => {
                let mut acc = C64::new(1.0, 0.0);
                for f in factors {
                    acc *= f.eval(n)?;
                }
                Some(acc)
            }
        }
    }

    pub fn conj(self) -> WeightRule {
        match self {
            WeightRule::Conj(inner) => *inner,
            other => WeightRule::Conj(Box::new(other)),
        }
    }

    pub fn shifted(self, offset: i64) -> WeightRule {
        if offset == 0 {
            return self;
        }
        match self {
            WeightRule::Constant(c) => WeightRule::Constant(c),
            WeightRule::Shifted { inner, offset: prior } => {
                WeightRule::Shifted { inner, offset: prior + offset }
            }
            other => WeightRule::Shifted { inner: Box::new(other), offset },
        }
    }

    /// Rule of consecutive ratios `n -> self(n) / self(n + 1)`, simplified to
    /// a closed form where the rule kind allows one.
    pub fn consecutive_ratio(&self) -> WeightRule {
        match self {
            WeightRule::Constant(_) => WeightRule::Constant(C64::new(1.0, 0.0)),
            WeightRule::Geometric { ratio, .. } if *ratio != C64::new(0.0, 0.0) => {
                WeightRule::Constant(C64::new(1.0, 0.0) / ratio)
            }
            WeightRule::RationalLinear { num, den } if num.0 == 0.0 => {
                // constant numerator cancels: p_n / p_{n+1} = (c(n+1)+d)/(cn+d)
                WeightRule::RationalLinear { num: (den.0, den.0 + den.1), den: *den }
            }
            WeightRule::Explicit(values) => WeightRule::Explicit(
                values
                    .windows(2)
                    .map(|w| if w[1] == C64::new(0.0, 0.0) { C64::new(f64::NAN, 0.0) } else { w[0] / w[1] })
                    .collect(),
            ),
            other => WeightRule::Quotient {
                num: Box::new(other.clone()),
                den: Box::new(other.clone()),
                den_shift: 1,
            },
        }
    }

    /// Limit of the rule at infinity when the kind makes one evident, used to
    /// classify diagonal metrics beyond any finite window. `None` means no
    /// conclusion.
    pub(crate) fn infimum_limit(&self) -> Option<f64> {
        match self {
            WeightRule::Constant(c) => Some(c.re),
            WeightRule::Geometric { first, ratio } => {
                if ratio.im != 0.0 || first.im != 0.0 {
                    None
                } else if ratio.re.abs() < 1.0 {
                    Some(0.0)
                } else if ratio.re == 1.0 {
                    Some(first.re)
                } else {
                    None
                }
            }
            WeightRule::RationalLinear { num, den } => {
                if den.0 != 0.0 {
                    Some(num.0 / den.0)
                } else if num.0 == 0.0 && den.1 != 0.0 {
                    Some(num.1 / den.1)
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

fn checked_index(n: usize, shift: i64) -> Option<usize> {
    let m = n as i64 + shift;
    if m < 0 {
        None
    } else {
        Some(m as usize)
    }
}

/// Integer power by repeated squaring; exact whenever every intermediate
/// product is exact (dyadic ratios, roots of unity on the axes).
fn pow_u(base: C64, mut n: usize) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    let mut b = base;
    while n > 0 {
        if n & 1 == 1 {
            acc *= b;
        }
        b *= b;
        n >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn geometric_dyadic_is_exact() {
        let rule = WeightRule::Geometric { first: r(1.0), ratio: r(0.5) };
        for n in 0..60 {
            assert_eq!(rule.eval(n).unwrap(), r(0.5f64.powi(n as i32)));
        }
    }

    #[test]
    fn rational_linear_harmonic() {
        let p = WeightRule::RationalLinear { num: (0.0, 1.0), den: (1.0, 1.0) };
        assert_eq!(p.eval(0).unwrap(), r(1.0));
        assert_eq!(p.eval(3).unwrap(), r(0.25));
        let b = p.consecutive_ratio();
        assert_eq!(b, WeightRule::RationalLinear { num: (1.0, 2.0), den: (1.0, 1.0) });
        assert_eq!(b.eval(0).unwrap(), r(2.0));
        assert_eq!(b.eval(2).unwrap(), r(4.0 / 3.0));
    }

    #[test]
    fn consecutive_ratio_geometric_and_constant() {
        let p = WeightRule::Geometric { first: r(1.0), ratio: r(0.5) };
        let b = p.consecutive_ratio();
        assert_eq!(b.eval(17).unwrap(), r(2.0));
        let ones = WeightRule::Constant(r(1.0));
        assert_eq!(ones.consecutive_ratio().eval(5).unwrap(), r(1.0));
    }

    #[test]
    fn shifted_below_zero_is_zero() {
        let rule = WeightRule::Explicit(vec![r(7.0), r(8.0)]).shifted(-1);
        assert_eq!(rule.eval(0).unwrap(), r(0.0));
        assert_eq!(rule.eval(1).unwrap(), r(7.0));
        assert_eq!(rule.eval(2).unwrap(), r(8.0));
        assert_eq!(rule.eval(3), None);
    }

    #[test]
    fn conj_and_product_compose() {
        let w = WeightRule::Constant(C64::new(0.0, 2.0));
        let c = w.clone().conj();
        assert_eq!(c.eval(0).unwrap(), C64::new(0.0, -2.0));
        let p = WeightRule::Product(vec![w, c]);
        assert_eq!(p.eval(9).unwrap(), r(4.0));
    }

    #[test]
    fn quotient_tracks_denominator_shift() {
        let p = WeightRule::RationalLinear { num: (0.0, 1.0), den: (1.0, 1.0) };
        let q = WeightRule::Quotient {
            num: Box::new(p.clone()),
            den: Box::new(p),
            den_shift: 1,
        };
        // p_2 / p_3 = (1/3) / (1/4) = 4/3
        assert_eq!(q.eval(2).unwrap(), r((1.0 / 3.0) / 0.25));
    }

    #[test]
    fn limits_for_metric_classification() {
        let dyadic = WeightRule::Geometric { first: r(1.0), ratio: r(0.5) };
        assert_eq!(dyadic.infimum_limit(), Some(0.0));
        let harmonic = WeightRule::RationalLinear { num: (0.0, 1.0), den: (1.0, 1.0) };
        assert_eq!(harmonic.infimum_limit(), Some(0.0));
        let ones = WeightRule::Constant(r(1.0));
        assert_eq!(ones.infimum_limit(), Some(1.0));
    }
}
