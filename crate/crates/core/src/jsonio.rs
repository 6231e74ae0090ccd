//! JSON wire format: typed input documents (operators, rules, vectors,
//! pairs) and report serialization for every analysis output.
//!
//! Complex scalars travel as `[re, im]`. Operators and rules are tagged by
//! `kind`. Parsing goes through strict DTOs that reject unknown fields, so
//! a typo in an input document fails loudly with a position.

use crate::asymptotics::{
    BoundWitness, ClassReport, NumericalRange, PowerBoundVerdict, SimilarityCertificate,
    T61Branch, Theorem41Report, Theorem61Report, Verdict,
};
use crate::biortho::{BiorthoSystem, BiorthoVerification, Expansion};
use crate::defect::DefectReport;
use crate::fsvec::FsVector;
use crate::generators::{MetricSearch, SearchOutcome};
use crate::metric::{Metric, Positivity};
use crate::operator::{LinearOperator, OperatorRepr, ShiftDirection};
use crate::rule::WeightRule;
use crate::{C64, CoreError};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

// ---- DTOs ----

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleDto {
    Explicit { values: Vec<(f64, f64)> },
    Geometric { first: (f64, f64), ratio: (f64, f64) },
    /// `(slope n + intercept) / (slope n + intercept)`; tuples are
    /// `[slope, intercept]`.
    RationalLinear { num: (f64, f64), den: (f64, f64) },
    Quotient { num: Box<RuleDto>, den: Box<RuleDto>, den_shift: i64 },
    Constant { value: (f64, f64) },
    Conj { inner: Box<RuleDto> },
    Shifted { inner: Box<RuleDto>, offset: i64 },
    Sum { terms: Vec<RuleDto> },
    Product { factors: Vec<RuleDto> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DirectionDto {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BandTermDto {
    pub offset: i64,
    pub rule: RuleDto,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorDto {
    Dense {
        rows: usize,
        cols: usize,
        /// Row-major rows of `[re, im]` entries.
        entries: Vec<Vec<(f64, f64)>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    WeightedShift {
        direction: DirectionDto,
        weights: RuleDto,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Diagonal {
        entries: RuleDto,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Band {
        terms: Vec<BandTermDto>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VectorDto {
    pub entries: Vec<(usize, (f64, f64))>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDto {
    pub a: OperatorDto,
    pub b: OperatorDto,
    pub metric: OperatorDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

// ---- DTO <-> domain ----

fn c_pair(v: C64) -> (f64, f64) {
    (v.re, v.im)
}

fn pair_c(p: (f64, f64)) -> C64 {
    C64::new(p.0, p.1)
}

pub fn rule_to_dto(rule: &WeightRule) -> RuleDto {
    match rule {
        WeightRule::Explicit(values) => {
            RuleDto::Explicit { values: values.iter().map(|&v| c_pair(v)).collect() }
        }
        WeightRule::Geometric { first, ratio } => {
            RuleDto::Geometric { first: c_pair(*first), ratio: c_pair(*ratio) }
        }
        WeightRule::RationalLinear { num, den } => RuleDto::RationalLinear { num: *num, den: *den },
        WeightRule::Quotient { num, den, den_shift } => RuleDto::Quotient {
            num: Box::new(rule_to_dto(num)),
            den: Box::new(rule_to_dto(den)),
            den_shift: *den_shift,
        },
        WeightRule::Constant(v) => RuleDto::Constant { value: c_pair(*v) },
        WeightRule::Conj(inner) => RuleDto::Conj { inner: Box::new(rule_to_dto(inner)) },
        WeightRule::Shifted { inner, offset } => {
            RuleDto::Shifted { inner: Box::new(rule_to_dto(inner)), offset: *offset }
        }
        WeightRule::Sum(terms) => RuleDto::Sum { terms: terms.iter().map(rule_to_dto).collect() },
        WeightRule::Product(factors) => {
            RuleDto::Product { factors: factors.iter().map(rule_to_dto).collect() }
        }
    }
}

pub fn rule_from_dto(dto: &RuleDto) -> WeightRule {
    match dto {
        RuleDto::Explicit { values } => {
            WeightRule::Explicit(values.iter().map(|&p| pair_c(p)).collect())
        }
        RuleDto::Geometric { first, ratio } => {
            WeightRule::Geometric { first: pair_c(*first), ratio: pair_c(*ratio) }
        }
        RuleDto::RationalLinear { num, den } => WeightRule::RationalLinear { num: *num, den: *den },
        RuleDto::Quotient { num, den, den_shift } => WeightRule::Quotient {
            num: Box::new(rule_from_dto(num)),
            den: Box::new(rule_from_dto(den)),
            den_shift: *den_shift,
        },
        RuleDto::Constant { value } => WeightRule::Constant(pair_c(*value)),
        RuleDto::Conj { inner } => WeightRule::Conj(Box::new(rule_from_dto(inner))),
        RuleDto::Shifted { inner, offset } => {
            WeightRule::Shifted { inner: Box::new(rule_from_dto(inner)), offset: *offset }
        }
        RuleDto::Sum { terms } => WeightRule::Sum(terms.iter().map(rule_from_dto).collect()),
        RuleDto::Product { factors } => {
            WeightRule::Product(factors.iter().map(rule_from_dto).collect())
        }
    }
}

pub fn operator_to_dto(op: &LinearOperator) -> OperatorDto {
    let label = op.label().map(str::to_owned);
    match op.repr() {
        OperatorRepr::Dense(m) => OperatorDto::Dense {
            rows: m.nrows(),
            cols: m.ncols(),
            entries: (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| c_pair(m[(i, j)])).collect())
                .collect(),
            label,
        },
        OperatorRepr::WeightedShift { direction, weights } => OperatorDto::WeightedShift {
            direction: match direction {
                ShiftDirection::Forward => DirectionDto::Forward,
                ShiftDirection::Backward => DirectionDto::Backward,
            },
            weights: rule_to_dto(weights),
            label,
        },
        OperatorRepr::Diagonal { entries } => {
            OperatorDto::Diagonal { entries: rule_to_dto(entries), label }
        }
        OperatorRepr::Band { offsets, rules } => OperatorDto::Band {
            terms: offsets
                .iter()
                .zip(rules.iter())
                .map(|(&offset, rule)| BandTermDto { offset, rule: rule_to_dto(rule) })
                .collect(),
            label,
        },
    }
}

pub fn operator_from_dto(dto: &OperatorDto) -> Result<LinearOperator, CoreError> {
    let (op, label) = match dto {
        OperatorDto::Dense { rows, cols, entries, label } => {
            if *rows == 0 || *cols == 0 {
                return Err(CoreError::InvalidInput("dense operator must be nonempty".into()));
            }
            if entries.len() != *rows || entries.iter().any(|r| r.len() != *cols) {
                return Err(CoreError::InvalidInput(format!(
                    "dense entries do not form a {rows}x{cols} grid"
                )));
            }
            let flat: Vec<C64> =
                entries.iter().flat_map(|r| r.iter().map(|&p| pair_c(p))).collect();
            (LinearOperator::dense(DMatrix::from_row_slice(*rows, *cols, &flat)), label)
        }
        OperatorDto::WeightedShift { direction, weights, label } => {
            let rule = rule_from_dto(weights);
            let op = match direction {
                DirectionDto::Forward => LinearOperator::forward_shift(rule),
                DirectionDto::Backward => LinearOperator::backward_shift(rule),
            };
            (op, label)
        }
        OperatorDto::Diagonal { entries, label } => {
            (LinearOperator::diagonal(rule_from_dto(entries)), label)
        }
        OperatorDto::Band { terms, label } => {
            if terms.is_empty() {
                return Err(CoreError::InvalidInput("band operator needs at least one term".into()));
            }
            let pairs =
                terms.iter().map(|t| (t.offset, rule_from_dto(&t.rule))).collect::<Vec<_>>();
            (LinearOperator::band(pairs), label)
        }
    };
    Ok(match label {
        Some(l) => op.with_label(l.clone()),
        None => op,
    })
}

pub fn vector_to_dto(v: &FsVector) -> VectorDto {
    VectorDto {
        entries: v.entries().iter().map(|&(i, val)| (i, c_pair(val))).collect(),
        dim: v.dim_hint(),
    }
}

pub fn vector_from_dto(dto: &VectorDto) -> Result<FsVector, CoreError> {
    let entries: Vec<(usize, C64)> =
        dto.entries.iter().map(|&(i, p)| (i, pair_c(p))).collect();
    let v = FsVector::new(entries);
    match dto.dim {
        Some(d) => v.with_dim(d),
        None => Ok(v),
    }
}

fn positioned(err: &serde_json::Error) -> CoreError {
    CoreError::InvalidInput(format!(
        "json parse failed at line {}, column {}: {err}",
        err.line(),
        err.column()
    ))
}

pub fn parse_operator(text: &str) -> Result<LinearOperator, CoreError> {
    let dto: OperatorDto = serde_json::from_str(text).map_err(|e| positioned(&e))?;
    operator_from_dto(&dto)
}

pub fn parse_vector(text: &str) -> Result<FsVector, CoreError> {
    let dto: VectorDto = serde_json::from_str(text).map_err(|e| positioned(&e))?;
    vector_from_dto(&dto)
}

/// Parsed pair document: operators plus the raw metric operator (positivity
/// certification happens at the call site, where the tolerance lives) and
/// any order or window the document pins.
pub struct ParsedPair {
    pub a: LinearOperator,
    pub b: LinearOperator,
    pub metric_op: LinearOperator,
    pub m_max: Option<u32>,
    pub window: Option<usize>,
}

pub fn parse_pair(text: &str) -> Result<ParsedPair, CoreError> {
    let dto: PairDto = serde_json::from_str(text).map_err(|e| positioned(&e))?;
    Ok(ParsedPair {
        a: operator_from_dto(&dto.a)?,
        b: operator_from_dto(&dto.b)?,
        metric_op: operator_from_dto(&dto.metric)?,
        m_max: dto.m_max,
        window: dto.window,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AbDto {
    a: OperatorDto,
    b: OperatorDto,
}

/// Accepts either a full pair document (the metric is ignored) or a bare
/// `{"a": ..., "b": ...}` document.
pub fn parse_operator_pair(text: &str) -> Result<(LinearOperator, LinearOperator), CoreError> {
    if let Ok(pair) = serde_json::from_str::<PairDto>(text) {
        return Ok((operator_from_dto(&pair.a)?, operator_from_dto(&pair.b)?));
    }
    let dto: AbDto = serde_json::from_str(text).map_err(|e| positioned(&e))?;
    Ok((operator_from_dto(&dto.a)?, operator_from_dto(&dto.b)?))
}

/// A generated pair re-serialized in the input document shape, so the file
/// can be fed straight back into the analysis commands.
pub fn pair_document(
    a: &LinearOperator,
    b: &LinearOperator,
    metric: &Metric,
    m_max: u32,
    window: usize,
) -> Value {
    serde_json::to_value(PairDto {
        a: operator_to_dto(a),
        b: operator_to_dto(b),
        metric: operator_to_dto(metric.p()),
        m_max: Some(m_max),
        window: Some(window),
    })
    .expect("pair dto serializes")
}

// ---- report serialization ----

pub fn complex_value(v: C64) -> Value {
    json!([v.re, v.im])
}

pub fn operator_value(op: &LinearOperator) -> Value {
    serde_json::to_value(operator_to_dto(op)).expect("operator dto serializes")
}

pub fn vector_value(v: &FsVector) -> Value {
    serde_json::to_value(vector_to_dto(v)).expect("vector dto serializes")
}

fn matrix_value(m: &DMatrix<C64>) -> Value {
    json!({
        "rows": m.nrows(),
        "cols": m.ncols(),
        "entries": (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

pub fn positivity_str(p: Positivity) -> &'static str {
    match p {
        Positivity::StrictlyPositive => "strictly_positive",
        Positivity::PositiveNoninvertible => "positive_noninvertible",
        Positivity::NonnegativeNoninjective => "nonnegative_noninjective",
        Positivity::Indefinite => "indefinite",
        Positivity::NotHermitian => "not_hermitian",
    }
}

pub fn metric_value(metric: &Metric) -> Value {
    json!({
        "p": operator_value(metric.p()),
        "positivity": positivity_str(metric.positivity()),
        "spectral_floor": metric.spectral_floor(),
    })
}

pub fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Inapplicable => "inapplicable",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn defect_report_value(report: &DefectReport) -> Value {
    json!({
        "residuals": report.residuals.iter().map(|&(j, r)| json!([j, r])).collect::<Vec<_>>(),
        "min_annihilation_order": report.min_annihilation_order,
        "is_biisometric": report.is_biisometric,
        "is_p_biisometric": report.is_p_biisometric,
        "m_isometry_orders": report.m_isometry_orders,
        "m_p_biisometric_orders": report.m_p_biisometric_orders,
        "tol": report.tol,
    })
}

pub fn bound_verdict_value(v: &PowerBoundVerdict) -> Value {
    let witness = v.witness.as_ref().map(|w| match w {
        BoundWitness::LargeEigenvalue(e) => json!({
            "type": "large_eigenvalue",
            "value": complex_value(*e),
        }),
        BoundWitness::NonSemisimpleUnimodular { value, algebraic, geometric } => json!({
            "type": "non_semisimple_unimodular",
            "value": complex_value(*value),
            "algebraic": algebraic,
            "geometric": geometric,
        }),
    });
    json!({
        "bounded": v.bounded,
        "bound_estimate": v.bound_estimate,
        "witness": witness,
        "powers_checked": v.powers_checked,
    })
}

pub fn range_value(r: &NumericalRange) -> Value {
    json!({
        "hull": r.hull.iter().map(|&p| complex_value(p)).collect::<Vec<_>>(),
        "radius": r.radius,
    })
}

pub fn class_report_value(r: &ClassReport) -> Value {
    json!({
        "op_norm": r.op_norm,
        "spectral_radius": r.spectral_radius,
        "numerical_radius": r.numerical_radius,
        "range_hull": r.range_hull.iter().map(|&p| complex_value(p)).collect::<Vec<_>>(),
        "flags": {
            "normaloid": r.flags.normaloid,
            "convexoid": r.flags.convexoid,
            "spectraloid": r.flags.spectraloid,
            "normal": r.flags.normal,
            "unitary": r.flags.unitary,
        },
        "tol": r.tol,
    })
}

pub fn certificate_value(c: &SimilarityCertificate) -> Value {
    json!({
        "s": matrix_value(&c.s),
        "u": matrix_value(&c.u),
        "residual_conjugation": c.residual_conjugation,
        "residual_unitary": c.residual_unitary,
        "cond_s": c.cond_s,
        "p1": matrix_value(&c.p1),
        "residual_p1": c.residual_p1,
    })
}

pub fn biortho_system_value(sys: &BiorthoSystem) -> Value {
    json!({
        "n_max": sys.n_max,
        "v": vector_value(&sys.v),
        "w": vector_value(&sys.w),
        "phi_seed": vector_value(&sys.z),
        "psi_seed": vector_value(&sys.y),
        "pairing": complex_value(sys.pairing),
        "phis": sys.phis.iter().map(vector_value).collect::<Vec<_>>(),
        "psis": sys.psis.iter().map(vector_value).collect::<Vec<_>>(),
        "adjoint_residual_a": sys.adjoint_residual_a,
        "adjoint_residual_b": sys.adjoint_residual_b,
    })
}

pub fn biortho_verification_value(v: &BiorthoVerification) -> Value {
    json!({
        "pairing_residual": v.pairing_residual,
        "forward_a_residual": v.forward_a_residual,
        "forward_b_residual": v.forward_b_residual,
        "adjoint_a_residual": v.adjoint_a_residual,
        "adjoint_b_residual": v.adjoint_b_residual,
        "biorthonormal": v.biorthonormal,
        "phi_psi_gap": v.phi_psi_gap,
        "tol": v.tol,
    })
}

pub fn expansion_value(e: &Expansion) -> Value {
    json!({
        "alphas": e.alphas.iter().map(|&v| complex_value(v)).collect::<Vec<_>>(),
        "betas": e.betas.iter().map(|&v| complex_value(v)).collect::<Vec<_>>(),
        "residual_phi": e.residual_phi,
        "residual_psi": e.residual_psi,
    })
}

pub fn theorem41_value(r: &Theorem41Report) -> Value {
    json!({
        "verdict": verdict_str(r.verdict),
        "order_m": r.order_m,
        "defect_m_residual": r.defect_m_residual,
        "defect_1_residual": r.defect_1_residual,
        "power_bounded_a": r.pb_a.as_ref().map(bound_verdict_value),
        "power_bounded_b": r.pb_b.as_ref().map(bound_verdict_value),
        "decay_curve": r.decay_curve.iter().map(|&(n, v)| json!([n, v])).collect::<Vec<_>>(),
        "evidence": r.evidence,
    })
}

pub fn theorem61_value(r: &Theorem61Report) -> Value {
    let branch = r.branch.as_ref().map(|b| match b {
        T61Branch::SequenceSystem { system, verification } => json!({
            "type": "sequence_system",
            "system": biortho_system_value(system),
            "verification": biortho_verification_value(verification),
        }),
        T61Branch::UnitarySimilarity { certificate, b_conjugation_residual } => json!({
            "type": "unitary_similarity",
            "certificate": certificate_value(certificate),
            "b_conjugation_residual": b_conjugation_residual,
        }),
    });
    json!({
        "verdict": verdict_str(r.verdict),
        "branch": branch,
        "class_escalation_fired": r.b_branch_fired,
        "a_unitary_residual": r.a_unitary_residual,
        "b_similarity_residual": r.b_similarity_residual,
        "class_a": r.class_a.as_ref().map(class_report_value),
        "class_a_inverse": r.class_a_inv.as_ref().map(class_report_value),
        "evidence": r.evidence,
    })
}

pub fn search_outcome_str(o: SearchOutcome) -> &'static str {
    match o {
        SearchOutcome::FoundPositive => "found_positive",
        SearchOutcome::NoPositiveSolution => "no_positive_solution",
        SearchOutcome::EmptyNullspace => "empty_nullspace",
    }
}

pub fn metric_search_value(s: &MetricSearch) -> Value {
    json!({
        "nullspace_dim": s.nullspace_dim,
        "outcome": search_outcome_str(s.outcome),
        "metrics": s.metrics.iter().map(metric_value).collect::<Vec<_>>(),
    })
}

/// Standard output envelope: tool identity, invocation parameters, result.
pub fn report_envelope(command: &str, parameters: Value, result: Value) -> Value {
    json!({
        "tool": { "name": "biiso", "version": env!("CARGO_PKG_VERSION") },
        "command": command,
        "parameters": parameters,
        "result": result,
    })
}
