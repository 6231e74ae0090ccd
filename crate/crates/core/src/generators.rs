//! Deterministic generators for operator pairs, and the inverse problem:
//! searching for metrics a given pair annihilates at a given order.
//!
//! Every random draw is seeded, so a `(dim, seed)` request always yields the
//! same pair, bit for bit.

use crate::defect::{defect_operator, PairConfig};
use crate::linalg;
use crate::metric::{diagonal_metric, positivity_certificate, Metric, Positivity};
use crate::operator::LinearOperator;
use crate::rule::WeightRule;
use crate::{C64, CoreError, DEFAULT_TOL, DEFAULT_WINDOW};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// First-order pair on the sequence space from a positive diagonal rule:
/// `A` is the unweighted forward shift, `B` the forward shift weighted by
/// consecutive metric ratios, so `A* P B = P` holds coefficientwise.
pub fn gen_shift_pair(p_rule: WeightRule, window: usize) -> Result<PairConfig, CoreError> {
    if window == 0 {
        return Err(CoreError::InvalidInput("window must be positive".into()));
    }
    for n in 0..window {
        let v = p_rule.eval(n).ok_or(CoreError::RuleExhausted { index: n })?;
        if v.im != 0.0 || v.re <= 0.0 {
            return Err(CoreError::NonpositiveWeight { index: n, value: v });
        }
    }
    let a = LinearOperator::forward_shift(WeightRule::Constant(C64::new(1.0, 0.0)))
        .with_label("forward shift");
    let b = LinearOperator::forward_shift(p_rule.consecutive_ratio())
        .with_label("ratio-weighted forward shift");
    let metric = diagonal_metric(p_rule, DEFAULT_TOL, window)?;
    PairConfig::new(a, b, metric, 1, window)
}

const REDRAW_LIMIT: u64 = 8;
/// Relative residual the generated pair must meet before being returned.
const PAIR_RESIDUAL_TOL: f64 = 1e-12;

fn gaussian_matrix(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    gaussian_matrix(d, rng).qr().q()
}

/// Finite first-order pair: a strictly positive metric `P`, an `A` with
/// unimodular semisimple spectrum (unitary when `normal_a`, otherwise a
/// mildly conditioned conjugate of a unitary), and `B = P^{-1} A^{-*} P`,
/// which satisfies `A* P B = P` identically.
pub fn gen_finite_pair(dim: usize, seed: u64, normal_a: bool) -> Result<PairConfig, CoreError> {
    if dim == 0 {
        return Err(CoreError::InvalidInput("dimension must be positive".into()));
    }
    let mut worst = f64::INFINITY;
    for attempt in 0..REDRAW_LIMIT {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        let g = gaussian_matrix(dim, &mut rng);
        let h = (&g + g.adjoint()).map(|v| v * C64::new(0.5, 0.0));
        let hn = linalg::op_norm(&h);
        let ridge = (1e-2 * hn * hn).max(1e-6);
        let p = &h * &h + linalg::identity(dim).map(|v| v * C64::new(ridge, 0.0));

        let phases = DVector::from_fn(dim, |_, _| {
            let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            C64::new(0.0, theta).exp()
        });
        let u = DMatrix::from_diagonal(&phases);
        let a = if normal_a {
            let q = random_unitary(dim, &mut rng);
            &q * u * q.adjoint()
        } else {
            let qu = random_unitary(dim, &mut rng);
            let qv = random_unitary(dim, &mut rng);
            let spread = DVector::from_fn(dim, |k, _| {
                let t = if dim > 1 { k as f64 / (dim - 1) as f64 } else { 0.5 };
                C64::new(0.5 * 3f64.powf(t), 0.0)
            });
            let s = &qu * DMatrix::from_diagonal(&spread) * qv.adjoint();
            let s_inv = linalg::try_inverse(&s)?;
            &s * u * s_inv
        };

        let p_inv = linalg::try_inverse(&p)?;
        let a_star_inv = linalg::try_inverse(&a.adjoint())?;
        let b = &p_inv * a_star_inv * &p;
        let residual = linalg::op_norm(&(a.adjoint() * &p * &b - &p));
        worst = worst.min(residual);
        if residual > PAIR_RESIDUAL_TOL * linalg::op_norm(&p) {
            continue;
        }
        let metric =
            positivity_certificate(LinearOperator::dense(p), DEFAULT_TOL, DEFAULT_WINDOW)?;
        if metric.positivity() != Positivity::StrictlyPositive {
            continue;
        }
        return PairConfig::new(
            LinearOperator::dense(a).with_label(if normal_a { "unitary" } else { "similar to unitary" }),
            LinearOperator::dense(b).with_label("metric conjugate"),
            metric,
            1,
            DEFAULT_WINDOW,
        );
    }
    Err(CoreError::PreconditionFailed {
        check: "generated pair residual",
        detail: format!("best residual {worst:.3e} after {REDRAW_LIMIT} draws"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchOutcome {
    /// At least one strictly positive annihilated metric was found.
    FoundPositive,
    /// The annihilated space is nontrivial but its positive cone stops short
    /// of strict positivity; any representatives found are only nonnegative.
    NoPositiveSolution,
    /// No nonzero Hermitian metric is annihilated at this order.
    EmptyNullspace,
}

#[derive(Debug)]
pub struct MetricSearch {
    /// Real dimension of the annihilated Hermitian subspace.
    pub nullspace_dim: usize,
    /// Annihilated metrics found, strictly positive ones first, deduplicated
    /// up to scale.
    pub metrics: Vec<Metric>,
    pub outcome: SearchOutcome,
}

/// Orthonormal basis of the real space of Hermitian `d x d` matrices under
/// the Frobenius pairing: diagonal units first, then symmetric and
/// antisymmetric off-diagonal combinations.
fn hermitian_basis(d: usize) -> Vec<DMatrix<C64>> {
    let mut basis = Vec::with_capacity(d * d);
    for k in 0..d {
        let mut m = DMatrix::zeros(d, d);
        m[(k, k)] = C64::new(1.0, 0.0);
        basis.push(m);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            let mut re = DMatrix::zeros(d, d);
            re[(i, j)] = C64::new(s, 0.0);
            re[(j, i)] = C64::new(s, 0.0);
            basis.push(re);
            let mut im = DMatrix::zeros(d, d);
            im[(i, j)] = C64::new(0.0, s);
            im[(j, i)] = C64::new(0.0, -s);
            basis.push(im);
        }
    }
    basis
}

fn from_coords(basis: &[DMatrix<C64>], x: &DVector<f64>) -> DMatrix<C64> {
    let mut acc = DMatrix::zeros(basis[0].nrows(), basis[0].ncols());
    for (k, b) in basis.iter().enumerate() {
        acc += b.map(|v| v * C64::new(x[k], 0.0));
    }
    acc
}

/// `m`-fold iterate of `X -> A* X B - X` starting from `h`.
fn defect_matrix(a: &DMatrix<C64>, b: &DMatrix<C64>, h: &DMatrix<C64>, m: u32) -> DMatrix<C64> {
    let astar = a.adjoint();
    let mut x = h.clone();
    for _ in 0..m {
        x = &astar * &x * b - &x;
    }
    x
}

const CONE_SAMPLES: u64 = 256;
const DEDUP_GAP: f64 = 1e-6;

/// Searches for Hermitian metrics annihilated by the order-`m` defect of
/// `(a, b)`: the annihilated subspace comes from an exact real SVD of the
/// vectorized defect map, and positive representatives are hunted with a
/// small-integer grid (low dimensions), the subspace basis itself, and
/// seeded samples.
pub fn solve_metric(
    a: &LinearOperator,
    b: &LinearOperator,
    m: u32,
    tol: f64,
    seed: u64,
) -> Result<MetricSearch, CoreError> {
    let am = a.require_dense("solve_metric")?;
    let bm = b.require_dense("solve_metric")?;
    if am.nrows() != am.ncols() || am.shape() != bm.shape() {
        return Err(CoreError::dim("solve_metric requires square operators of one dimension"));
    }
    if m == 0 || m > 6 {
        return Err(CoreError::InvalidInput("defect order must lie in 1..=6".into()));
    }
    let d = am.nrows();
    let basis = hermitian_basis(d);

    // Vectorize the real-linear defect map: Hermitian coordinates in,
    // real and imaginary parts of all entries out.
    let columns: Vec<DVector<f64>> = basis
        .iter()
        .map(|h| {
            let image = defect_matrix(am, bm, h, m);
            let mut col = Vec::with_capacity(2 * d * d);
            for v in image.iter() {
                col.push(v.re);
            }
            for v in image.iter() {
                col.push(v.im);
            }
            DVector::from_vec(col)
        })
        .collect();
    let sys = DMatrix::from_columns(&columns);
    let svd = sys.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = tol * smax;
    let vt = svd.v_t.as_ref().expect("svd requested v_t");
    let mut null_coords: Vec<DVector<f64>> = Vec::new();
    for (i, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma <= cutoff {
            null_coords.push(vt.row(i).transpose());
        }
    }
    let nullspace_dim = null_coords.len();
    if nullspace_dim == 0 {
        return Ok(MetricSearch {
            nullspace_dim,
            metrics: Vec::new(),
            outcome: SearchOutcome::EmptyNullspace,
        });
    }

    let scale_ab = 1.0f64
        .max(linalg::op_norm(am) * linalg::op_norm(bm))
        .powi(m as i32);
    let annihilated = |h: &DMatrix<C64>| {
        let hn = linalg::op_norm(h);
        hn > 0.0 && linalg::op_norm(&defect_matrix(am, bm, h, m)) <= tol * hn * scale_ab
    };

    let mut candidates: Vec<DMatrix<C64>> = Vec::new();
    if d <= 2 {
        let levels = [-1.0f64, 0.0, 1.0];
        if d == 1 {
            candidates.push(DMatrix::from_element(1, 1, C64::new(1.0, 0.0)));
        } else {
            for p00 in 0..=2 {
                for p11 in 0..=2 {
                    for re in levels {
                        for im in levels {
                            let h = DMatrix::from_row_slice(
                                2,
                                2,
                                &[
                                    C64::new(p00 as f64, 0.0),
                                    C64::new(re, im),
                                    C64::new(re, -im),
                                    C64::new(p11 as f64, 0.0),
                                ],
                            );
                            candidates.push(h);
                        }
                    }
                }
            }
        }
    }
    for x in &null_coords {
        let h = from_coords(&basis, x);
        candidates.push(h.clone());
        candidates.push(-h);
    }
    let sampled: Vec<DMatrix<C64>> = (0..CONE_SAMPLES)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xc0de_0000 + idx));
            let x = DVector::from_fn(nullspace_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let combo: DVector<f64> = null_coords
                .iter()
                .enumerate()
                .fold(DVector::zeros(d * d), |acc, (k, v)| acc + v * x[k]);
            from_coords(&basis, &combo)
        })
        .collect();
    for h in sampled {
        candidates.push(h.clone());
        candidates.push(-h);
    }

    let mut strict: Vec<(DMatrix<C64>, Metric)> = Vec::new();
    let mut nonneg: Vec<(DMatrix<C64>, Metric)> = Vec::new();
    for h in candidates {
        if !annihilated(&h) {
            continue;
        }
        let metric = match positivity_certificate(LinearOperator::dense(h.clone()), tol, d.max(1))
        {
            Ok(c) => c,
            Err(_) => continue,
        };
        let bucket = match metric.positivity() {
            Positivity::StrictlyPositive => &mut strict,
            Positivity::NonnegativeNoninjective | Positivity::PositiveNoninvertible => &mut nonneg,
            _ => continue,
        };
        let hf = h.map(|v| v / C64::new(h.norm(), 0.0));
        if bucket
            .iter()
            .any(|(other, _)| (&hf - other.map(|v| v / C64::new(other.norm(), 0.0))).norm() <= DEDUP_GAP)
        {
            continue;
        }
        // confirm through the cross-checked evaluation path
        if defect_operator(a, b, metric.p(), m, d.max(1))?.op_norm(d.max(1))
            > tol * linalg::op_norm(&h) * scale_ab
        {
            continue;
        }
        bucket.push((h, metric));
    }

    let outcome = if strict.is_empty() {
        SearchOutcome::NoPositiveSolution
    } else {
        SearchOutcome::FoundPositive
    };
    let metrics = strict
        .into_iter()
        .chain(nonneg.into_iter())
        .map(|(_, metric)| metric)
        .collect();
    Ok(MetricSearch { nullspace_dim, metrics, outcome })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{class_flags, power_bounded};
    use crate::defect::classify_pair;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn dyadic_shift_pair_is_exactly_first_order() {
        let rule = WeightRule::Geometric { first: c(1.0, 0.0), ratio: c(0.5, 0.0) };
        let cfg = gen_shift_pair(rule, 64).unwrap();
        let d1 = defect_operator(&cfg.a, &cfg.b, cfg.metric.p(), 1, 64).unwrap();
        assert_eq!(d1.op_norm(64), 0.0);
        assert_eq!(cfg.metric.positivity(), Positivity::PositiveNoninvertible);
    }

    #[test]
    fn harmonic_shift_pair_is_first_order_to_rounding() {
        let rule = WeightRule::RationalLinear { num: (0.0, 1.0), den: (1.0, 1.0) };
        let cfg = gen_shift_pair(rule, 64).unwrap();
        let d1 = defect_operator(&cfg.a, &cfg.b, cfg.metric.p(), 1, 64).unwrap();
        assert!(d1.op_norm(64) < 1e-13);
        // b_0 = 2 exactly
        let e0 = crate::FsVector::basis(0);
        let be0 = cfg.b.apply(&e0).unwrap();
        assert_eq!(be0.get(1), c(2.0, 0.0));
    }

    #[test]
    fn shift_pair_rejects_bad_rules() {
        let negative = WeightRule::Explicit(vec![c(1.0, 0.0), c(-0.5, 0.0)]);
        assert!(matches!(
            gen_shift_pair(negative, 8),
            Err(CoreError::NonpositiveWeight { index: 1, .. })
        ));
        let complex = WeightRule::Constant(c(1.0, 0.5));
        assert!(matches!(
            gen_shift_pair(complex, 8),
            Err(CoreError::NonpositiveWeight { index: 0, .. })
        ));
        let short = WeightRule::Explicit(vec![c(1.0, 0.0)]);
        assert!(matches!(gen_shift_pair(short, 8), Err(CoreError::RuleExhausted { index: 1 })));
    }

    #[test]
    fn finite_pairs_are_deterministic_and_first_order() {
        for seed in [0u64, 7, 41] {
            for normal_a in [true, false] {
                let cfg = gen_finite_pair(4, seed, normal_a).unwrap();
                let again = gen_finite_pair(4, seed, normal_a).unwrap();
                assert_eq!(cfg.a.as_dense().unwrap(), again.a.as_dense().unwrap());
                assert_eq!(cfg.b.as_dense().unwrap(), again.b.as_dense().unwrap());
                let report = classify_pair(&cfg, 1e-10).unwrap();
                assert!(report.is_p_biisometric);
                assert!(power_bounded(&cfg.a, 1e-10).unwrap().bounded);
                assert!(power_bounded(&cfg.b, 1e-10).unwrap().bounded);
            }
        }
    }

    #[test]
    fn finite_pair_normality_matches_request() {
        let normal = gen_finite_pair(3, 5, true).unwrap();
        let flags = class_flags(&normal.a, 1e-8, 128).unwrap().flags;
        assert!(flags.normal && flags.unitary);
        let skew = gen_finite_pair(3, 5, false).unwrap();
        let flags2 = class_flags(&skew.a, 1e-8, 128).unwrap().flags;
        assert!(!flags2.normal);
    }

    #[test]
    fn metric_search_recovers_the_canonical_order3_metric() {
        let a = LinearOperator::dense(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        ));
        let search = solve_metric(&a, &a, 3, 1e-10, 0).unwrap();
        // the order-3 defect of this pair annihilates every Hermitian matrix
        assert_eq!(search.nullspace_dim, 4);
        assert_eq!(search.outcome, SearchOutcome::FoundPositive);
        let canonical =
            DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        let cf = canonical.map(|v| v / C64::new(canonical.norm(), 0.0));
        let hit = search.metrics.iter().any(|metric| {
            let p = metric.p().as_dense().unwrap();
            let pf = p.map(|v| v / C64::new(p.norm(), 0.0));
            (&pf - &cf).norm() <= 1e-8
        });
        assert!(hit);
    }

    #[test]
    fn metric_search_reports_no_strict_solution_at_order_one() {
        let a = LinearOperator::dense(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        ));
        let search = solve_metric(&a, &a, 1, 1e-10, 0).unwrap();
        assert_eq!(search.nullspace_dim, 2);
        assert_eq!(search.outcome, SearchOutcome::NoPositiveSolution);
        assert!(!search.metrics.is_empty());
        for metric in &search.metrics {
            assert_eq!(metric.positivity(), Positivity::NonnegativeNoninjective);
        }
        let rep =
            DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let rf = rep.map(|v| v / C64::new(rep.norm(), 0.0));
        let hit = search.metrics.iter().any(|metric| {
            let p = metric.p().as_dense().unwrap();
            let pf = p.map(|v| v / C64::new(p.norm(), 0.0));
            (&pf - &rf).norm() <= 1e-8
        });
        assert!(hit);
    }

    #[test]
    fn metric_search_detects_empty_nullspace() {
        let half = LinearOperator::dense(
            DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.5, 0.0), c(0.5, 0.0)])),
        );
        let search = solve_metric(&half, &half, 1, 1e-10, 0).unwrap();
        assert_eq!(search.nullspace_dim, 0);
        assert_eq!(search.outcome, SearchOutcome::EmptyNullspace);
        assert!(search.metrics.is_empty());
    }
}
