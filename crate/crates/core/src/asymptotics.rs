//! Spectral asymptotics: power boundedness, numerical range, operator
//! classes, unitary-similarity certificates, and the theorem-level verifiers
//! built on them.
//!
//! Spectral decisions are made for dense matrices (and diagonals, whose
//! spectrum is the closure of their entries); weighted shifts and bands are
//! excluded rather than silently truncated. Power boundedness is decided
//! from the spectrum: growth needs either an eigenvalue outside the closed
//! unit disc or a non-semisimple unimodular eigenvalue, and norm sampling
//! over a fixed power horizon only corroborates the verdict.

use crate::biortho::{construct_system, verify_system, BiorthoSystem, BiorthoVerification};
use crate::defect::{binomial_f64, defect_operator, transformer_power, PairConfig};
use crate::linalg;
use crate::metric::Positivity;
use crate::operator::{kernel_basis, LinearOperator, OperatorRepr};
use crate::{C64, CoreError, POWERS_CHECKED};
use nalgebra::{DMatrix, DVector};

/// Absolute floor for eigenvalue clustering: computed eigenvalues of a
/// defective block split by roughly the machine epsilon to the power `1/k`,
/// so a radius at the tolerance itself would shatter genuine Jordan
/// structure.
const CLUSTER_FLOOR: f64 = 1e-6;

/// Spectral radius. Dense spectra come from the Schur form; diagonal rules
/// take the supremum of entry moduli over the window. A finite truncation of
/// a shift says nothing about its spectrum, so shifts and bands are refused.
pub fn spectral_radius(a: &LinearOperator, window: usize) -> Result<f64, CoreError> {
    match a.repr() {
        OperatorRepr::Dense(m) => {
            let eigs = linalg::eigenvalues(m)?;
            Ok(eigs.iter().map(|e| e.norm()).fold(0.0, f64::max))
        }
        OperatorRepr::Diagonal { .. } => Ok(a.op_norm(window)),
        _ => Err(CoreError::UnsupportedVariant {
            op: "spectral_radius",
            variant: a.variant_name(),
        }),
    }
}

/// Eigenvalues of a dense operator, listed with algebraic multiplicity.
pub fn spectral_points(a: &LinearOperator) -> Result<Vec<C64>, CoreError> {
    let m = a.require_dense("spectral_points")?;
    linalg::eigenvalues(m)
}

/// Polygonal approximation of the numerical range.
#[derive(Debug, Clone)]
pub struct NumericalRange {
    /// Convex hull vertices of the supporting points, in hull order.
    pub hull: Vec<C64>,
    /// Numerical radius: largest modulus among supporting points.
    pub radius: f64,
}

/// Supporting-hyperplane sweep: for each angle the top eigenvector `x` of
/// the Hermitian part of `e^{-i theta} A` contributes the boundary point
/// `<A x; x>`. The points lie in the range by construction, so the hull is
/// an inscribed polygon.
pub fn numerical_range(a: &LinearOperator, angles: usize) -> Result<NumericalRange, CoreError> {
    let m = a.require_dense("numerical_range")?;
    if m.nrows() != m.ncols() {
        return Err(CoreError::dim("numerical range requires a square matrix"));
    }
    if angles == 0 {
        return Err(CoreError::InvalidInput("angle count must be positive".into()));
    }
    let mut points = Vec::with_capacity(angles);
    let mut radius = 0.0f64;
    for k in 0..angles {
        let theta = 2.0 * std::f64::consts::PI * (k as f64) / (angles as f64);
        let phase = C64::new(0.0, -theta).exp();
        let rotated = m.map(|v| phase * v);
        let herm = (&rotated + rotated.adjoint()).map(|v| v * C64::new(0.5, 0.0));
        let (_, vectors) = linalg::hermitian_eigen(&herm);
        let x = vectors.column(0).into_owned();
        let ax = m * &x;
        let p = x.dotc(&ax);
        radius = radius.max(p.norm());
        points.push(p);
    }
    Ok(NumericalRange { hull: convex_hull(&points), radius })
}

/// Verdict on `sup_n ||A^n||`.
#[derive(Debug, Clone)]
pub struct PowerBoundVerdict {
    pub bounded: bool,
    /// `sup_{n <= powers_checked} ||A^n||`, a corroborating sample.
    pub bound_estimate: f64,
    pub witness: Option<BoundWitness>,
    pub powers_checked: usize,
}

#[derive(Debug, Clone)]
pub enum BoundWitness {
    /// An eigenvalue outside the closed unit disc.
    LargeEigenvalue(C64),
    /// A unimodular eigenvalue whose geometric multiplicity falls short.
    NonSemisimpleUnimodular { value: C64, algebraic: usize, geometric: usize },
}

struct EigenCluster {
    center: C64,
    algebraic: usize,
    vectors: Vec<DVector<C64>>,
}

/// Eigenvalues grouped within the radius, each cluster carrying the kernel
/// basis of `A - center I` at the same cutoff, so multiplicity comparisons
/// stay consistent with the grouping.
fn eigen_clusters(m: &DMatrix<C64>, radius: f64) -> Result<Vec<EigenCluster>, CoreError> {
    let eigs = linalg::eigenvalues(m)?;
    let n = eigs.len();
    let mut assigned = vec![false; n];
    let mut clusters = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let mut members = vec![i];
        assigned[i] = true;
        // grow the group transitively so near-chains stay together
        let mut changed = true;
        while changed {
            changed = false;
            for j in 0..n {
                if assigned[j] {
                    continue;
                }
                if members.iter().any(|&k| (eigs[k] - eigs[j]).norm() <= radius) {
                    members.push(j);
                    assigned[j] = true;
                    changed = true;
                }
            }
        }
        let center = members.iter().map(|&k| eigs[k]).sum::<C64>()
            / C64::new(members.len() as f64, 0.0);
        let shifted = m - DMatrix::from_diagonal_element(m.nrows(), m.ncols(), center);
        let vectors = linalg::kernel(&shifted, radius);
        clusters.push(EigenCluster { center, algebraic: members.len(), vectors });
    }
    Ok(clusters)
}

/// Decides `sup_n ||A^n|| < infinity` spectrally.
pub fn power_bounded(a: &LinearOperator, tol: f64) -> Result<PowerBoundVerdict, CoreError> {
    let m = a.require_dense("power_bounded")?;
    if m.nrows() != m.ncols() {
        return Err(CoreError::dim("power boundedness requires a square matrix"));
    }
    let eigs = linalg::eigenvalues(m)?;
    let r = eigs.iter().map(|e| e.norm()).fold(0.0, f64::max);

    let mut bound_estimate = 1.0f64;
    let mut power = linalg::identity(m.nrows());
    for _ in 0..POWERS_CHECKED {
        power = &power * m;
        bound_estimate = bound_estimate.max(linalg::op_norm(&power));
    }

    if r > 1.0 + tol {
        let worst = eigs
            .iter()
            .cloned()
            .max_by(|x, y| x.norm().partial_cmp(&y.norm()).unwrap())
            .expect("nonempty spectrum");
        return Ok(PowerBoundVerdict {
            bounded: false,
            bound_estimate,
            witness: Some(BoundWitness::LargeEigenvalue(worst)),
            powers_checked: POWERS_CHECKED,
        });
    }

    let scale = 1.0f64.max(r);
    let radius = tol.max(CLUSTER_FLOOR) * scale;
    for cluster in eigen_clusters(m, radius)? {
        if cluster.center.norm() < 1.0 - radius {
            continue;
        }
        let geometric = cluster.vectors.len();
        if geometric < cluster.algebraic {
            return Ok(PowerBoundVerdict {
                bounded: false,
                bound_estimate,
                witness: Some(BoundWitness::NonSemisimpleUnimodular {
                    value: cluster.center,
                    algebraic: cluster.algebraic,
                    geometric,
                }),
                powers_checked: POWERS_CHECKED,
            });
        }
    }
    Ok(PowerBoundVerdict {
        bounded: true,
        bound_estimate,
        witness: None,
        powers_checked: POWERS_CHECKED,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ClassFlags {
    /// `r(A) = ||A||`.
    pub normaloid: bool,
    /// Numerical range equals the convex hull of the spectrum.
    pub convexoid: bool,
    /// `r(A) = w(A)`.
    pub spectraloid: bool,
    /// `A* A = A A*`.
    pub normal: bool,
    /// `A* A = I`.
    pub unitary: bool,
}

#[derive(Debug, Clone)]
pub struct ClassReport {
    pub op_norm: f64,
    pub spectral_radius: f64,
    pub numerical_radius: f64,
    pub range_hull: Vec<C64>,
    pub flags: ClassFlags,
    pub tol: f64,
}

/// Computes the norm, spectral radius, numerical radius, and the class flags
/// they induce. Comparisons involving the polygonal numerical range use at
/// least the discretization floor `1e-6 ||A||`.
pub fn class_flags(a: &LinearOperator, tol: f64, angles: usize) -> Result<ClassReport, CoreError> {
    let m = a.require_dense("class_flags")?;
    let norm = linalg::op_norm(m);
    let eigs = linalg::eigenvalues(m)?;
    let r = eigs.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let range = numerical_range(a, angles)?;
    let w = range.radius;
    let geom_tol = tol.max(CLUSTER_FLOOR) * norm.max(1.0);

    let normaloid = (r - norm).abs() <= tol * norm.max(1.0);
    let spectraloid = (r - w).abs() <= geom_tol;
    let eig_hull = convex_hull(&eigs);
    let convexoid = hausdorff(&range.hull, &eig_hull) <= geom_tol;
    let commutator = m.adjoint() * m - m * m.adjoint();
    let normal = linalg::op_norm(&commutator) <= tol * norm.max(1.0) * norm.max(1.0);
    let gram_gap = m.adjoint() * m - linalg::identity(m.nrows());
    let unitary = linalg::op_norm(&gram_gap) <= tol;

    Ok(ClassReport {
        op_norm: norm,
        spectral_radius: r,
        numerical_radius: w,
        range_hull: range.hull,
        flags: ClassFlags { normaloid, convexoid, spectraloid, normal, unitary },
        tol,
    })
}

/// Certificate that `S A S^{-1}` is a unitary diagonal.
#[derive(Debug, Clone)]
pub struct SimilarityCertificate {
    pub s: DMatrix<C64>,
    /// Diagonal of cluster centers; unitary up to `residual_unitary`.
    pub u: DMatrix<C64>,
    /// `||S A - U S|| / (||S|| max(1, ||A||))`.
    pub residual_conjugation: f64,
    /// `||U* U - I||`.
    pub residual_unitary: f64,
    pub cond_s: f64,
    /// `P1 = (S* S)^{1/2}`, a strictly positive witness with
    /// `P1 A = U' P1` for a unitary `U'`.
    pub p1: DMatrix<C64>,
    /// `||P1 A (P1)^{-1}  (P1 A (P1)^{-1})*  - I||`, unitarity of the
    /// operator `P1 A P1^{-1}`.
    pub residual_p1: f64,
}

/// Diagonalizes a matrix with semisimple unimodular spectrum.
///
/// Errors carry the witness: the offending eigenvalue with its multiplicity
/// gap, or its modulus when it leaves the unit circle.
pub fn unitary_similarity_certificate(
    a: &LinearOperator,
    tol: f64,
) -> Result<SimilarityCertificate, CoreError> {
    let m = a.require_dense("unitary_similarity_certificate")?;
    if m.nrows() != m.ncols() {
        return Err(CoreError::dim("similarity certificate requires a square matrix"));
    }
    let d = m.nrows();
    let eigs = linalg::eigenvalues(m)?;
    let r = eigs.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let scale = 1.0f64.max(r);
    let radius = tol.max(CLUSTER_FLOOR) * scale;
    let unimod_tol = tol.max(1e-8) * scale;

    let clusters = eigen_clusters(m, radius)?;
    let mut columns: Vec<DVector<C64>> = Vec::with_capacity(d);
    let mut diag: Vec<C64> = Vec::with_capacity(d);
    for cluster in &clusters {
        let modulus = cluster.center.norm();
        if (modulus - 1.0).abs() > unimod_tol {
            return Err(CoreError::NonUnimodular { value: cluster.center, modulus });
        }
        if cluster.vectors.len() < cluster.algebraic {
            return Err(CoreError::NonSemisimple {
                value: cluster.center,
                algebraic: cluster.algebraic,
                geometric: cluster.vectors.len(),
            });
        }
        for v in cluster.vectors.iter().take(cluster.algebraic) {
            columns.push(v.clone());
            diag.push(cluster.center);
        }
    }
    if columns.len() != d {
        return Err(CoreError::PreconditionFailed {
            check: "eigenvector count",
            detail: format!("collected {} eigenvectors for dimension {d}", columns.len()),
        });
    }
    let v = DMatrix::from_columns(&columns);
    let s = linalg::try_inverse(&v)?;
    let u = DMatrix::from_diagonal(&DVector::from_vec(diag));

    let norm_a = linalg::op_norm(m);
    let norm_s = linalg::op_norm(&s);
    let residual_conjugation =
        linalg::op_norm(&(&s * m - &u * &s)) / (norm_s * norm_a.max(1.0)).max(f64::MIN_POSITIVE);
    let residual_unitary = linalg::op_norm(&(u.adjoint() * &u - linalg::identity(d)));
    let cond_s = linalg::condition_number(&s);

    let p1 = linalg::sqrt_psd(&(s.adjoint() * &s));
    let p1_inv = linalg::try_inverse(&p1)?;
    let conj = &p1 * m * &p1_inv;
    let residual_p1 = linalg::op_norm(&(conj.adjoint() * &conj - linalg::identity(d)));

    Ok(SimilarityCertificate {
        s,
        u,
        residual_conjugation,
        residual_unitary,
        cond_s,
        p1,
        residual_p1,
    })
}

/// Outcome of a theorem-level verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Inapplicable,
    Inconclusive,
}

/// Report for the power-bounded collapse of higher-order pairs.
///
/// For a power-bounded order-`m` pair the first-order defect must vanish
/// too, with the quantitative decay
///
/// ```text
/// ||Delta^{m-1}|| <= (||A*^n P B^n|| + sum_{j<=m-2} C(n,j) ||Delta^j||) / C(n,m-1),
/// ```
///
/// monotone nonincreasing in `n` once `n` passes `2m`.
#[derive(Debug, Clone)]
pub struct Theorem41Report {
    pub verdict: Verdict,
    pub order_m: u32,
    pub defect_m_residual: f64,
    pub defect_1_residual: f64,
    pub pb_a: Option<PowerBoundVerdict>,
    pub pb_b: Option<PowerBoundVerdict>,
    /// `(n, bound)` samples of the decay curve, `n = m ..= 2m + 16`.
    pub decay_curve: Vec<(u32, f64)>,
    pub evidence: Vec<String>,
}

pub fn verify_theorem_4_1(cfg: &PairConfig, tol: f64) -> Result<Theorem41Report, CoreError> {
    let m = cfg.m_max.max(1);
    let p = cfg.metric.p();
    let mut evidence = Vec::new();

    let defect_m_residual =
        defect_operator(&cfg.a, &cfg.b, p, m, cfg.window)?.op_norm(cfg.window);
    let defect_1_residual =
        defect_operator(&cfg.a, &cfg.b, p, 1, cfg.window)?.op_norm(cfg.window);
    let order_holds = defect_m_residual <= tol * cfg.defect_scale(m);
    let first_order_holds = defect_1_residual <= tol * cfg.defect_scale(1);

    let dense = cfg.a.is_dense();
    let (pb_a, pb_b) = if dense {
        (Some(power_bounded(&cfg.a, tol)?), Some(power_bounded(&cfg.b, tol)?))
    } else {
        (None, None)
    };

    let decay_curve = decay_curve(cfg, m)?;

    let verdict = if !order_holds {
        evidence.push(format!(
            "the order-{m} defect does not vanish (residual {defect_m_residual:.3e}); hypotheses not met"
        ));
        Verdict::Inapplicable
    } else if m == 1 {
        evidence.push("order one: the conclusion coincides with the hypothesis".into());
        Verdict::Holds
    } else if !dense {
        evidence.push(
            "power boundedness is not decided for structured variants; implication unverified"
                .into(),
        );
        Verdict::Inconclusive
    } else {
        let ba = pb_a.as_ref().expect("dense");
        let bb = pb_b.as_ref().expect("dense");
        if !ba.bounded || !bb.bounded {
            let name = if !ba.bounded { "A" } else { "B" };
            let witness = if !ba.bounded { &ba.witness } else { &bb.witness };
            match witness {
                Some(BoundWitness::NonSemisimpleUnimodular { value, algebraic, geometric }) => {
                    evidence.push(format!(
                        "{name} is not power bounded: eigenvalue {value} has algebraic multiplicity {algebraic} but geometric multiplicity {geometric}"
                    ));
                }
                Some(BoundWitness::LargeEigenvalue(v)) => {
                    evidence.push(format!(
                        "{name} is not power bounded: eigenvalue {v} lies outside the closed unit disc"
                    ));
                }
                None => evidence.push(format!("{name} is not power bounded")),
            }
            if !first_order_holds {
                evidence.push(format!(
                    "consistent with the hypothesis being necessary: the first-order defect stays away from zero (residual {defect_1_residual:.3e})"
                ));
            }
            Verdict::Inapplicable
        } else if first_order_holds {
            evidence.push(format!(
                "power-bounded order-{m} pair collapses to first order (residual {defect_1_residual:.3e})"
            ));
            Verdict::Holds
        } else {
            evidence.push(format!(
                "hypotheses hold yet the first-order defect persists (residual {defect_1_residual:.3e})"
            ));
            Verdict::Fails
        }
    };

    Ok(Theorem41Report {
        verdict,
        order_m: m,
        defect_m_residual,
        defect_1_residual,
        pb_a,
        pb_b,
        decay_curve,
        evidence,
    })
}

fn decay_curve(cfg: &PairConfig, m: u32) -> Result<Vec<(u32, f64)>, CoreError> {
    let p = cfg.metric.p();
    let astar = cfg.a.adjoint();
    let mut lower_norms = Vec::with_capacity(m as usize);
    for j in 0..m.saturating_sub(1) {
        lower_norms
            .push(defect_operator(&cfg.a, &cfg.b, p, j, cfg.window)?.op_norm(cfg.window));
    }
    let mut curve = Vec::new();
    let mut transformer = transformer_power(&astar, &cfg.b, p, m)?;
    for n in m..=(2 * m + 16) {
        if n > m {
            transformer = astar.compose(&transformer.compose(&cfg.b)?)?;
        }
        let mut bound = transformer.op_norm(cfg.window);
        for (j, nj) in lower_norms.iter().enumerate() {
            if (j as u32) <= m.saturating_sub(2) {
                bound += binomial_f64(n, j as u32) * nj;
            }
        }
        bound /= binomial_f64(n, m - 1);
        curve.push((n, bound));
    }
    Ok(curve)
}

/// Which structural branch a strictly positive, power-bounded first-order
/// pair landed in.
#[derive(Debug)]
pub enum T61Branch {
    /// Nontrivial adjoint kernel: the biorthogonal sequence system exists.
    SequenceSystem { system: BiorthoSystem, verification: BiorthoVerification },
    /// Trivial adjoint kernel: `A` is similar to a unitary, and `B` is the
    /// metric conjugate of the inverse adjoint.
    UnitarySimilarity {
        certificate: SimilarityCertificate,
        /// `||B - P^{-1} A*^{-1} P|| / ||B||`.
        b_conjugation_residual: f64,
    },
}

#[derive(Debug)]
pub struct Theorem61Report {
    pub verdict: Verdict,
    pub branch: Option<T61Branch>,
    /// Whether the operator-class escalation applies: some class flag holds
    /// for `A` and for `A^{-1}`.
    pub b_branch_fired: bool,
    /// `||A* A - I||` when the escalation fired.
    pub a_unitary_residual: Option<f64>,
    /// `||B - P^{-1} A P|| / ||B||` when the escalation fired.
    pub b_similarity_residual: Option<f64>,
    pub class_a: Option<ClassReport>,
    pub class_a_inv: Option<ClassReport>,
    pub evidence: Vec<String>,
}

/// Sequence length stored by the dispatch when the kernel branch fires.
const T61_SEQUENCE_LEN: usize = 32;

/// Verifies the structural dichotomy for first-order pairs under a positive
/// metric, and the escalation to unitarity under the operator-class flags.
pub fn verify_theorem_6_1(cfg: &PairConfig, tol: f64) -> Result<Theorem61Report, CoreError> {
    let p = cfg.metric.p();
    let dense = cfg.a.is_dense();
    let mut evidence = Vec::new();

    match cfg.metric.positivity() {
        Positivity::StrictlyPositive => {}
        Positivity::PositiveNoninvertible if !dense => {
            evidence.push(
                "metric is positive but noninvertible; conclusions revert to the sequence construction"
                    .into(),
            );
        }
        other => {
            return Err(CoreError::PreconditionFailed {
                check: "metric strictly positive",
                detail: format!("metric classified {other:?}"),
            })
        }
    }

    let d1 = defect_operator(&cfg.a, &cfg.b, p, 1, cfg.window)?.op_norm(cfg.window);
    let allowed = tol * cfg.defect_scale(1);
    if d1 > allowed {
        return Err(CoreError::PreconditionFailed {
            check: "first-order defect vanishes",
            detail: format!("residual {d1:.6e} exceeds {allowed:.6e}"),
        });
    }

    if dense {
        let pa = power_bounded(&cfg.a, tol)?;
        if !pa.bounded {
            return Err(CoreError::PreconditionFailed {
                check: "A power bounded",
                detail: format!("witness {:?}", pa.witness),
            });
        }
        let pb = power_bounded(&cfg.b, tol)?;
        if !pb.bounded {
            return Err(CoreError::PreconditionFailed {
                check: "B power bounded",
                detail: format!("witness {:?}", pb.witness),
            });
        }
    } else {
        evidence.push("power boundedness not decided for structured variants".into());
    }

    let ker = kernel_basis(&cfg.a.adjoint(), tol, cfg.window)?;
    let mut verdict = Verdict::Holds;
    let branch;
    let mut b_branch_fired = false;
    let mut a_unitary_residual = None;
    let mut b_similarity_residual = None;
    let mut class_a = None;
    let mut class_a_inv = None;

    if !ker.is_empty() {
        evidence.push(format!(
            "adjoint kernel is nontrivial ({} vectors found); sequence branch",
            ker.len()
        ));
        let system = construct_system(&cfg.a, &cfg.b, &cfg.metric, T61_SEQUENCE_LEN, tol, cfg.window)?;
        let verification = verify_system(&system, &cfg.metric, tol)?;
        let vscale = system
            .psis
            .iter()
            .chain(system.phis.iter())
            .map(|x| x.norm())
            .fold(1.0f64, f64::max);
        if verification.max_residual() > tol * vscale {
            verdict = Verdict::Fails;
            evidence.push(format!(
                "sequence relations exceed tolerance (max residual {:.3e})",
                verification.max_residual()
            ));
        } else {
            evidence.push("biorthogonal sequence system verified".into());
        }
        branch = Some(T61Branch::SequenceSystem { system, verification });
    } else {
        evidence.push("adjoint kernel is trivial; similarity branch".into());
        let m = cfg.a.require_dense("verify_theorem_6_1 similarity branch")?;
        let certificate = match unitary_similarity_certificate(&cfg.a, tol) {
            Ok(c) => c,
            Err(e @ (CoreError::NonSemisimple { .. } | CoreError::NonUnimodular { .. })) => {
                return Err(CoreError::PreconditionFailed {
                    check: "similarity to a unitary",
                    detail: format!("{e}"),
                })
            }
            Err(e) => return Err(e),
        };
        let cert_tol = tol.max(1e-8);
        if certificate.residual_conjugation > cert_tol {
            verdict = Verdict::Fails;
            evidence.push(format!(
                "conjugation residual {:.3e} exceeds {cert_tol:.1e}",
                certificate.residual_conjugation
            ));
        }

        let pm = p.require_dense("verify_theorem_6_1 metric")?;
        let p_inv = linalg::try_inverse(pm)?;
        let a_star_inv = linalg::try_inverse(&m.adjoint())?;
        let b_expected = &p_inv * a_star_inv * pm;
        let bm = cfg.b.require_dense("verify_theorem_6_1 B")?;
        let b_norm = linalg::op_norm(bm).max(f64::MIN_POSITIVE);
        let b_conjugation_residual = linalg::op_norm(&(bm - b_expected)) / b_norm;
        if b_conjugation_residual > tol.max(1e-8) {
            verdict = Verdict::Fails;
            evidence.push(format!(
                "B differs from the metric conjugate of the inverse adjoint by {b_conjugation_residual:.3e}"
            ));
        } else {
            evidence.push("A is similar to a unitary and B is the metric conjugate of its inverse adjoint".into());
        }

        let flag_tol = tol.max(1e-8);
        let ca = class_flags(&cfg.a, flag_tol, crate::DEFAULT_ANGLES)?;
        let a_inv_op = LinearOperator::dense(linalg::try_inverse(m)?);
        let cinv = class_flags(&a_inv_op, flag_tol, crate::DEFAULT_ANGLES)?;
        let any = |f: &ClassFlags| f.normaloid || f.convexoid || f.spectraloid;
        if any(&ca.flags) && any(&cinv.flags) {
            b_branch_fired = true;
            let gram = linalg::op_norm(&(m.adjoint() * m - linalg::identity(m.nrows())));
            a_unitary_residual = Some(gram);
            let b_sim = linalg::op_norm(&(bm - &p_inv * m * pm)) / b_norm;
            b_similarity_residual = Some(b_sim);
            let escalation_tol = tol.max(1e-9);
            if gram > escalation_tol * linalg::op_norm(m).max(1.0) || b_sim > escalation_tol {
                verdict = Verdict::Fails;
                evidence.push(format!(
                    "class flags fired but unitarity fails (||A*A - I|| = {gram:.3e}, B similarity residual {b_sim:.3e})"
                ));
            } else {
                evidence.push(
                    "class flags hold for A and its inverse: A is unitary and B is its metric conjugate"
                        .into(),
                );
            }
        }
        class_a = Some(ca);
        class_a_inv = Some(cinv);
        branch = Some(T61Branch::UnitarySimilarity { certificate, b_conjugation_residual });
    }

    Ok(Theorem61Report {
        verdict,
        branch,
        b_branch_fired,
        a_unitary_residual,
        b_similarity_residual,
        class_a,
        class_a_inv,
        evidence,
    })
}

// ---- planar geometry on complex points ----

fn cross(o: C64, a: C64, b: C64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Convex hull by the monotone chain, counterclockwise, collinear points
/// dropped. Near-coincident inputs are merged first so degenerate ranges
/// (a point, a segment) come out with the minimal vertex count.
pub fn convex_hull(points: &[C64]) -> Vec<C64> {
    let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1.0);
    let merge_eps = 1e-12 * scale;
    let mut pts: Vec<C64> = Vec::new();
    for &p in points {
        if !pts.iter().any(|&q| (p - q).norm() <= merge_eps) {
            pts.push(p);
        }
    }
    if pts.len() <= 2 {
        return pts;
    }
    pts.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    let turn_eps = 1e-14 * scale * scale;
    let mut lower: Vec<C64> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= turn_eps {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<C64> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= turn_eps {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.is_empty() {
        // fully collinear input collapses to its extremes
        vec![pts[0], pts[pts.len() - 1]]
    } else {
        lower
    }
}

fn point_segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sqr();
    if len_sq == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).re * ab.re + (p - a).im * ab.im) / len_sq;
    let t = t.clamp(0.0, 1.0);
    (p - (a + ab * C64::new(t, 0.0))).norm()
}

fn point_in_convex(p: C64, poly: &[C64]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let scale = poly.iter().map(|q| q.norm()).fold(1.0, f64::max);
    let eps = 1e-12 * scale * scale;
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], p) >= -eps)
}

fn point_to_poly(p: C64, poly: &[C64]) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => (p - poly[0]).norm(),
        2 => point_segment_distance(p, poly[0], poly[1]),
        n => {
            if point_in_convex(p, poly) {
                0.0
            } else {
                (0..n)
                    .map(|i| point_segment_distance(p, poly[i], poly[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Hausdorff distance between convex polygons; the supremum over each set is
/// attained at a vertex.
pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let d_ab = a.iter().map(|&p| point_to_poly(p, b)).fold(0.0, f64::max);
    let d_ba = b.iter().map(|&p| point_to_poly(p, a)).fold(0.0, f64::max);
    d_ab.max(d_ba)
}
