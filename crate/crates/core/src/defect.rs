//! The defect calculus for operator pairs.
//!
//! For a pair `(A, B)` and metric `P`, the order-`m` defect is
//!
//! ```text
//! Delta^m(P) = sum_{j=0}^{m} (-1)^j C(m,j) A*^(m-j) P B^(m-j),
//! ```
//!
//! equivalently the `m`-th iterate of `X -> A* X B - X` applied to `P`. The
//! pair is an order-`m` biisometric pair for `P` when the defect vanishes.
//! Both evaluation routes are computed and cross-checked on every call; a
//! disagreement beyond the conditioning allowance signals catastrophic
//! cancellation and is reported instead of silently returned.
//!
//! Binomial coefficients are carried exactly in 128-bit integers through
//! `n = 128` and only then converted to floating point; coefficients beyond
//! `2^53` lose exactness in the conversion and log a warning.

use crate::metric::Metric;
use crate::operator::LinearOperator;
use crate::{C64, CoreError};

/// Relative allowance for the agreement of the two defect evaluation routes.
pub const CROSS_CHECK_TOL: f64 = 1e-10;

/// Largest defect order accepted.
pub const MAX_ORDER: u32 = 64;

/// Exact binomial coefficient; `n` up to 128.
pub fn binomial(n: u32, k: u32) -> Result<u128, CoreError> {
    if n > 128 {
        return Err(CoreError::OrderTooLarge { m: n, max: 128 });
    }
    if k > n {
        return Ok(0);
    }
    let mut row: Vec<u128> = vec![1];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(1);
        for w in row.windows(2) {
            next.push(w[0] + w[1]);
        }
        next.push(1);
        row = next;
    }
    Ok(row[k as usize])
}

/// Binomial coefficient as a float: exact through 128 rows up to the final
/// rounding, multiplicative fallback beyond.
pub fn binomial_f64(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= 128 {
        let v = binomial(n, k).expect("n <= 128");
        if v > (1u128 << 53) {
            log::warn!("binomial({n},{k}) exceeds 2^53; float conversion rounds");
        }
        return v as f64;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 1..=k {
        acc = acc * ((n - k + i) as f64) / (i as f64);
    }
    acc
}

/// An operator pair with its metric, maximum defect order of interest, and
/// the index window used for structured-operator norms.
#[derive(Debug, Clone)]
pub struct PairConfig {
    pub a: LinearOperator,
    pub b: LinearOperator,
    pub metric: Metric,
    pub m_max: u32,
    pub window: usize,
}

impl PairConfig {
    pub fn new(
        a: LinearOperator,
        b: LinearOperator,
        metric: Metric,
        m_max: u32,
        window: usize,
    ) -> Result<Self, CoreError> {
        if m_max > MAX_ORDER {
            return Err(CoreError::OrderTooLarge { m: m_max, max: MAX_ORDER });
        }
        let dims = [a.dim(), b.dim(), metric.p().dim()];
        match (dims[0], dims[1], dims[2]) {
            (Some(da), Some(db), Some(dp)) => {
                if da != db || db != dp {
                    return Err(CoreError::dim(format!(
                        "pair dimensions disagree: A is {da}, B is {db}, P is {dp}"
                    )));
                }
            }
            (None, None, None) => {}
            _ => {
                return Err(CoreError::dim(
                    "dense and structured representations cannot be mixed in one pair",
                ))
            }
        }
        if window == 0 {
            return Err(CoreError::InvalidInput("window must be positive".into()));
        }
        Ok(PairConfig { a, b, metric, m_max, window })
    }

    /// `||P|| * max(1, ||A|| ||B||)^j`, the natural magnitude of order-`j`
    /// defect entries, with window norms for structured operators.
    pub fn defect_scale(&self, j: u32) -> f64 {
        let na = self.a.op_norm(self.window);
        let nb = self.b.op_norm(self.window);
        let np = self.metric.p().op_norm(self.window);
        np * 1.0f64.max(na * nb).powi(j as i32)
    }
}

/// `Delta^m(P)` for the pair `(a, b)`, window-cross-checked.
pub fn defect_operator(
    a: &LinearOperator,
    b: &LinearOperator,
    p: &LinearOperator,
    m: u32,
    window: usize,
) -> Result<LinearOperator, CoreError> {
    if m > MAX_ORDER {
        return Err(CoreError::OrderTooLarge { m, max: MAX_ORDER });
    }
    let astar = a.adjoint();

    // route one: signed binomial sum over transformer powers
    let mut transformer = p.clone();
    let mut terms: Vec<LinearOperator> = vec![transformer.clone()];
    for _ in 0..m {
        transformer = astar.compose(&transformer.compose(b)?)?;
        terms.push(transformer.clone());
    }
    let mut sum_route: Option<LinearOperator> = None;
    for (k, t) in terms.iter().enumerate() {
        let sign = if (m as usize - k) % 2 == 0 { 1.0 } else { -1.0 };
        let coeff = C64::new(sign * binomial_f64(m, k as u32), 0.0);
        let term = t.scale(coeff);
        sum_route = Some(match sum_route {
            None => term,
            Some(acc) => acc.add(&term)?,
        });
    }
    let sum_route = sum_route.expect("at least one term");

    // route two: iterate X -> A* X B - X
    let mut rec_route = p.clone();
    for _ in 0..m {
        rec_route = astar.compose(&rec_route.compose(b)?)?.sub(&rec_route)?;
    }

    let gap = sum_route.sub(&rec_route)?.op_norm(window);
    let scale = {
        let na = a.op_norm(window);
        let nb = b.op_norm(window);
        p.op_norm(window) * 1.0f64.max(na * nb).powi(m as i32)
    };
    let bound = CROSS_CHECK_TOL * scale.max(f64::MIN_POSITIVE);
    if gap > bound {
        return Err(CoreError::CrossCheckDiverged { gap, bound });
    }
    Ok(sum_route)
}

/// `A^n X B^n`, the `n`-th transformer power. Callers pass `A*` when the
/// adjoint form is wanted.
pub fn transformer_power(
    a: &LinearOperator,
    b: &LinearOperator,
    x: &LinearOperator,
    n: u32,
) -> Result<LinearOperator, CoreError> {
    let mut acc = x.clone();
    for _ in 0..n {
        acc = a.compose(&acc.compose(b)?)?;
    }
    Ok(acc)
}

/// Full defect profile of a pair.
#[derive(Debug, Clone)]
pub struct DefectReport {
    /// `(j, ||Delta^j(P)||)` for `j = 0..=m_max`.
    pub residuals: Vec<(u32, f64)>,
    /// Least `j >= 1` whose defect vanishes within tolerance.
    pub min_annihilation_order: Option<u32>,
    /// Whether `A* B = I` within tolerance.
    pub is_biisometric: bool,
    /// Whether the order-1 defect vanishes.
    pub is_p_biisometric: bool,
    /// Per-order flags when `A = B` and `P = I`.
    pub m_isometry_orders: Option<Vec<(u32, bool)>>,
    /// Per-order flags for the pair against its metric.
    pub m_p_biisometric_orders: Vec<(u32, bool)>,
    pub tol: f64,
}

/// Computes `||Delta^j||` for `j` up to `cfg.m_max` and classifies the pair.
pub fn classify_pair(cfg: &PairConfig, tol: f64) -> Result<DefectReport, CoreError> {
    let mut residuals = Vec::with_capacity(cfg.m_max as usize + 1);
    let mut flags = Vec::with_capacity(cfg.m_max as usize + 1);
    for j in 0..=cfg.m_max {
        let d = defect_operator(&cfg.a, &cfg.b, cfg.metric.p(), j, cfg.window)?;
        let norm = d.op_norm(cfg.window);
        let ok = norm <= tol * cfg.defect_scale(j);
        residuals.push((j, norm));
        flags.push((j, ok));
    }
    let min_annihilation_order = flags.iter().skip(1).find(|&&(_, ok)| ok).map(|&(j, _)| j);
    let is_p_biisometric = flags.get(1).map(|&(_, ok)| ok).unwrap_or(false);
    let is_biisometric = {
        let id = LinearOperator::identity(cfg.a.dim());
        let prod = cfg.a.adjoint().compose(&cfg.b)?;
        let gap = prod.sub(&id)?.op_norm(cfg.window);
        let na = cfg.a.op_norm(cfg.window);
        let nb = cfg.b.op_norm(cfg.window);
        gap <= tol * 1.0f64.max(na * nb)
    };
    let m_isometry_orders = if cfg.a == cfg.b && is_identity(cfg.metric.p(), cfg.window) {
        Some(flags.clone())
    } else {
        None
    };
    Ok(DefectReport {
        residuals,
        min_annihilation_order,
        is_biisometric,
        is_p_biisometric,
        m_isometry_orders,
        m_p_biisometric_orders: flags,
        tol,
    })
}

fn is_identity(p: &LinearOperator, window: usize) -> bool {
    match p.repr() {
        crate::operator::OperatorRepr::Dense(m) => {
            m.is_square() && *m == nalgebra::DMatrix::identity(m.nrows(), m.nrows())
        }
        crate::operator::OperatorRepr::Diagonal { entries } => {
            (0..window).all(|n| entries.eval(n) == Some(C64::new(1.0, 0.0)))
        }
        _ => false,
    }
}

/// Residual of the closed-form expansion of `A*^n P B^n` in the defects of
/// order below `m`, normalized by `||A*^n P B^n|| + ||P||`.
///
/// The expansion holds for order-`m` pairs and `n >= m`; the precondition is
/// checked and a violation reports the offending defect residual.
pub fn binomial_identity_residual(
    cfg: &PairConfig,
    m: u32,
    n: u32,
    tol: f64,
) -> Result<f64, CoreError> {
    if m == 0 || n < m {
        return Err(CoreError::PreconditionFailed {
            check: "expansion domain",
            detail: format!("requires 1 <= m <= n, got m = {m}, n = {n}"),
        });
    }
    let dm = defect_operator(&cfg.a, &cfg.b, cfg.metric.p(), m, cfg.window)?;
    let dm_norm = dm.op_norm(cfg.window);
    let allowed = tol * cfg.defect_scale(m);
    if dm_norm > allowed {
        return Err(CoreError::PreconditionFailed {
            check: "order-m defect vanishes",
            detail: format!("||Delta^{m}|| = {dm_norm:.6e} exceeds {allowed:.6e}"),
        });
    }
    let astar = cfg.a.adjoint();
    let lhs = transformer_power(&astar, &cfg.b, cfg.metric.p(), n)?;
    let mut rhs: Option<LinearOperator> = None;
    for j in 0..m {
        let coeff = C64::new(binomial_f64(n, j), 0.0);
        let term = defect_operator(&cfg.a, &cfg.b, cfg.metric.p(), j, cfg.window)?.scale(coeff);
        rhs = Some(match rhs {
            None => term,
            Some(acc) => acc.add(&term)?,
        });
    }
    let rhs = rhs.expect("m >= 1");
    let gap = lhs.sub(&rhs)?.op_norm(cfg.window);
    let denom = lhs.op_norm(cfg.window) + cfg.metric.p().op_norm(cfg.window);
    Ok(gap / denom.max(f64::MIN_POSITIVE))
}
