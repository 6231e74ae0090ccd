//! Metric operators: positivity certification and the induced pairing.
//!
//! A metric `P` turns the ambient space into a (semi) inner product space via
//! `<x; y>_P = <P x; y>`. Classification distinguishes strict positivity,
//! injective-but-noninvertible positivity (possible only for diagonal rules
//! on the sequence space; a finite Hermitian matrix with positive spectrum is
//! invertible), nonnegativity with a kernel, indefiniteness, and failure of
//! the Hermitian check itself. `p_solve` decides membership of a vector in
//! the range of `P` and produces a preimage, which is what the biorthogonal
//! construction needs.

use crate::linalg;
use crate::operator::{LinearOperator, OperatorRepr};
use crate::rule::WeightRule;
use crate::{C64, CoreError, FsVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positivity {
    StrictlyPositive,
    PositiveNoninvertible,
    NonnegativeNoninjective,
    Indefinite,
    NotHermitian,
}

#[derive(Debug, Clone)]
pub struct Metric {
    p: LinearOperator,
    positivity: Positivity,
    sqrt_p: Option<LinearOperator>,
    spectral_floor: f64,
}

/// Certifies the sign structure of a candidate metric.
///
/// Dense matrices are checked Hermitian within `tol * ||P||`, then classified
/// by the spectrum of their Hermitian part. Diagonal rules are checked for
/// real entries over the window and classified by entry signs, with the
/// closed-form limit of geometric and rational rules deciding invertibility
/// beyond the window. Shift and band representations are not metrics.
pub fn positivity_certificate(
    p: LinearOperator,
    tol: f64,
    window: usize,
) -> Result<Metric, CoreError> {
    match p.repr() {
        OperatorRepr::Dense(m) => {
            if m.nrows() != m.ncols() {
                return Err(CoreError::dim(format!(
                    "metric must be square, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let scale = linalg::op_norm(m);
            let herm_gap = linalg::op_norm(&(m - m.adjoint()));
            if herm_gap > tol * scale.max(1.0) {
                return Ok(Metric {
                    p,
                    positivity: Positivity::NotHermitian,
                    sqrt_p: None,
                    spectral_floor: 0.0,
                });
            }
            let sym = (m + m.adjoint()).map(|v| v * C64::new(0.5, 0.0));
            let (values, _) = linalg::hermitian_eigen(&sym);
            let lam_max = values.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
            let lam_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let thresh = tol * lam_max;
            let positivity = if lam_max == 0.0 {
                Positivity::NonnegativeNoninjective
            } else if lam_min > thresh {
                Positivity::StrictlyPositive
            } else if lam_min >= -thresh {
                Positivity::NonnegativeNoninjective
            } else {
                Positivity::Indefinite
            };
            let sqrt_p = match positivity {
                Positivity::StrictlyPositive | Positivity::NonnegativeNoninjective => {
                    Some(LinearOperator::dense(linalg::sqrt_psd(&sym)))
                }
                _ => None,
            };
            Ok(Metric { p, positivity, sqrt_p, spectral_floor: lam_min.max(0.0) })
        }
        OperatorRepr::Diagonal { entries } => {
            let mut re_min = f64::INFINITY;
            let mut abs_max = 0.0f64;
            let mut saw_any = false;
            let mut saw_zero = false;
            let mut not_hermitian = false;
            for n in 0..window {
                match entries.eval(n) {
                    Some(v) => {
                        saw_any = true;
                        abs_max = abs_max.max(v.norm());
                        if v.im.abs() > tol * (1.0 + v.norm()) {
                            not_hermitian = true;
                        }
                        if v == C64::new(0.0, 0.0) {
                            saw_zero = true;
                        }
                        re_min = re_min.min(v.re);
                    }
                    None => break,
                }
            }
            if !saw_any {
                return Err(CoreError::InvalidInput(
                    "diagonal metric rule is empty on the window".into(),
                ));
            }
            if not_hermitian {
                return Ok(Metric {
                    p,
                    positivity: Positivity::NotHermitian,
                    sqrt_p: None,
                    spectral_floor: 0.0,
                });
            }
            // diagonal entries are data, so the kernel test is an exact zero
            // test; the tolerance only decides indefiniteness and
            // invertibility of small positive tails
            let thresh = tol * abs_max;
            let tail = entries.infimum_limit();
            let eff_min = match tail {
                Some(limit) => re_min.min(limit),
                None => re_min,
            };
            let positivity = if re_min < -thresh {
                Positivity::Indefinite
            } else if saw_zero {
                Positivity::NonnegativeNoninjective
            } else if eff_min <= thresh {
                Positivity::PositiveNoninvertible
            } else {
                Positivity::StrictlyPositive
            };
            Ok(Metric { p, positivity, sqrt_p: None, spectral_floor: eff_min.max(0.0) })
        }
        _ => Err(CoreError::UnsupportedVariant {
            op: "positivity_certificate",
            variant: p.variant_name(),
        }),
    }
}

impl Metric {
    /// Identity metric on a concrete dimension or on the sequence space.
    pub fn identity(dim: Option<usize>) -> Metric {
        let p = LinearOperator::identity(dim);
        positivity_certificate(p, crate::DEFAULT_TOL, crate::DEFAULT_WINDOW)
            .expect("identity certifies")
    }

    pub fn p(&self) -> &LinearOperator {
        &self.p
    }

    pub fn positivity(&self) -> Positivity {
        self.positivity
    }

    pub fn sqrt_p(&self) -> Option<&LinearOperator> {
        self.sqrt_p.as_ref()
    }

    pub fn spectral_floor(&self) -> f64 {
        self.spectral_floor
    }

    fn require_pairing(&self) -> Result<(), CoreError> {
        match self.positivity {
            Positivity::StrictlyPositive | Positivity::PositiveNoninvertible => Ok(()),
            other => Err(CoreError::MetricNotPositive(other)),
        }
    }

    fn require_solvable(&self) -> Result<(), CoreError> {
        match self.positivity {
            Positivity::StrictlyPositive
            | Positivity::PositiveNoninvertible
            | Positivity::NonnegativeNoninjective => Ok(()),
            other => Err(CoreError::MetricNotPositive(other)),
        }
    }

    /// `<x; y>_P = <P x; y>`, linear in `x`.
    pub fn p_inner(&self, x: &FsVector, y: &FsVector) -> Result<C64, CoreError> {
        self.require_pairing()?;
        Ok(self.p.apply(x)?.inner(y))
    }

    pub fn p_norm(&self, x: &FsVector) -> Result<f64, CoreError> {
        let v = self.p_inner(x, x)?;
        Ok(v.re.max(0.0).sqrt())
    }

    /// Solves `P z = w`, certifying that `w` lies in the range of `P`.
    ///
    /// Diagonal metrics divide entrywise (exact scalar division); an exactly
    /// zero diagonal entry under nonzero data means `w` leaves the range.
    /// Dense metrics solve in the least squares sense and accept only when
    /// the residual stays below `tol * ||w||`.
    pub fn p_solve(&self, w: &FsVector, tol: f64) -> Result<FsVector, CoreError> {
        self.require_solvable()?;
        match self.p.repr() {
            OperatorRepr::Diagonal { entries } => {
                let mut out = Vec::with_capacity(w.entries().len());
                for &(i, v) in w.entries() {
                    let pi = entries.eval(i).ok_or(CoreError::RuleExhausted { index: i })?;
                    if pi == C64::new(0.0, 0.0) {
                        return Err(CoreError::NotInRange { residual: v.norm(), tol });
                    }
                    out.push((i, v / pi));
                }
                Ok(FsVector::new(out))
            }
            OperatorRepr::Dense(m) => {
                let d = m.nrows();
                let wd = w.to_dense(d)?;
                let wnorm = wd.norm();
                if wnorm == 0.0 {
                    return Ok(FsVector::zero());
                }
                let svd = m.clone().svd(true, true);
                let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
                let z = svd
                    .solve(&wd, tol * smax)
                    .map_err(|_| CoreError::Singular)?;
                let residual = (m * &z - &wd).norm();
                if residual > tol * wnorm {
                    return Err(CoreError::NotInRange { residual, tol: tol * wnorm });
                }
                Ok(FsVector::from_dense(&z))
            }
            _ => Err(CoreError::UnsupportedVariant {
                op: "p_solve",
                variant: self.p.variant_name(),
            }),
        }
    }
}

/// Metric for a diagonal weight rule, certified over the window.
pub fn diagonal_metric(rule: WeightRule, tol: f64, window: usize) -> Result<Metric, CoreError> {
    positivity_certificate(LinearOperator::diagonal(rule), tol, window)
}
