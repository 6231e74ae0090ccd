//! Linear operators: dense matrices and structured sequence-space forms.
//!
//! Structured operators (weighted shifts, diagonals, bands) act on
//! finite-support vectors through their weight rules, so applying them incurs
//! only the rounding of the scalar products involved. The structured family
//! is closed under adjoints, sums, scalar multiples, and composition; these
//! return symbolic band forms rather than truncations. Dense and structured
//! representations never mix inside one algebraic operation.
//!
//! Norms of structured operators are reported as suprema over a caller
//! supplied index window; a band norm is the exact operator norm of the
//! operator restricted to that window.

use crate::linalg;
use crate::rule::WeightRule;
use crate::{C64, CoreError, FsVector};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDirection {
    /// `e_n -> w_n e_{n+1}`.
    Forward,
    /// `e_{n+1} -> w_n e_n`, `e_0 -> 0`.
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorRepr {
    Dense(DMatrix<C64>),
    WeightedShift { direction: ShiftDirection, weights: WeightRule },
    Diagonal { entries: WeightRule },
    /// `T e_n = sum_k rule_k(n) e_{n+offset_k}`; offsets strictly increasing.
    Band { offsets: Vec<i64>, rules: Vec<WeightRule> },
}

#[derive(Debug, Clone)]
pub struct LinearOperator {
    repr: OperatorRepr,
    label: Option<String>,
}

impl PartialEq for LinearOperator {
    fn eq(&self, other: &Self) -> bool {
        self.repr == other.repr
    }
}

impl LinearOperator {
    pub fn dense(m: DMatrix<C64>) -> Self {
        LinearOperator { repr: OperatorRepr::Dense(m), label: None }
    }

    pub fn forward_shift(weights: WeightRule) -> Self {
        LinearOperator {
            repr: OperatorRepr::WeightedShift { direction: ShiftDirection::Forward, weights },
            label: None,
        }
    }

    pub fn backward_shift(weights: WeightRule) -> Self {
        LinearOperator {
            repr: OperatorRepr::WeightedShift { direction: ShiftDirection::Backward, weights },
            label: None,
        }
    }

    pub fn diagonal(entries: WeightRule) -> Self {
        LinearOperator { repr: OperatorRepr::Diagonal { entries }, label: None }
    }

    pub fn band(pairs: Vec<(i64, WeightRule)>) -> Self {
        LinearOperator { repr: OperatorRepr::Band { offsets: Vec::new(), rules: Vec::new() }, label: None }
            .replace_band(pairs)
    }

    fn replace_band(mut self, pairs: Vec<(i64, WeightRule)>) -> Self {
        let merged = merge_band_terms(pairs);
        let (offsets, rules) = merged.into_iter().unzip();
        self.repr = OperatorRepr::Band { offsets, rules };
        self
    }

    /// Identity on a concrete dimension (dense) or on the sequence space
    /// (diagonal of ones).
    pub fn identity(dim: Option<usize>) -> Self {
        match dim {
            Some(d) => LinearOperator::dense(linalg::identity(d)),
            None => LinearOperator::diagonal(WeightRule::Constant(C64::new(1.0, 0.0))),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn repr(&self) -> &OperatorRepr {
        &self.repr
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.repr, OperatorRepr::Dense(_))
    }

    pub fn as_dense(&self) -> Option<&DMatrix<C64>> {
        match &self.repr {
            OperatorRepr::Dense(m) => Some(m),
            _ => None,
        }
    }

    pub fn require_dense(&self, op: &'static str) -> Result<&DMatrix<C64>, CoreError> {
        self.as_dense().ok_or(CoreError::UnsupportedVariant { op, variant: self.variant_name() })
    }

    pub fn variant_name(&self) -> &'static str {
        match &self.repr {
            OperatorRepr::Dense(_) => "dense",
            OperatorRepr::WeightedShift { .. } => "weighted_shift",
            OperatorRepr::Diagonal { .. } => "diagonal",
            OperatorRepr::Band { .. } => "band",
        }
    }

    /// Concrete dimension for dense operators; `None` for sequence-space
    /// forms.
    pub fn dim(&self) -> Option<usize> {
        match &self.repr {
            OperatorRepr::Dense(m) => Some(m.nrows()),
            _ => None,
        }
    }

    pub fn apply(&self, x: &FsVector) -> Result<FsVector, CoreError> {
        match &self.repr {
            OperatorRepr::Dense(m) => {
                let d_in = m.ncols();
                match x.dim_hint() {
                    Some(d) if d != d_in => {
                        return Err(CoreError::dim(format!(
                            "operator expects dimension {d_in}, vector carries {d}"
                        )))
                    }
                    None => {
                        if let Some(s) = x.support_max() {
                            if s >= d_in {
                                return Err(CoreError::dim(format!(
                                    "vector support {s} exceeds operator dimension {d_in}"
                                )));
                            }
                        }
                    }
                    _ => {}
                }
                let xd = x.to_dense(d_in)?;
                Ok(FsVector::from_dense(&(m * xd)))
            }
            OperatorRepr::WeightedShift { direction, weights } => {
                let mut out = Vec::new();
                for &(i, v) in x.entries() {
                    match direction {
                        ShiftDirection::Forward => {
                            let w = weights.eval(i).ok_or(CoreError::RuleExhausted { index: i })?;
                            out.push((i + 1, w * v));
                        }
                        ShiftDirection::Backward => {
                            if i == 0 {
                                continue;
                            }
                            let w = weights
                                .eval(i - 1)
                                .ok_or(CoreError::RuleExhausted { index: i - 1 })?;
                            out.push((i - 1, w * v));
                        }
                    }
                }
                Ok(FsVector::new(out))
            }
            OperatorRepr::Diagonal { entries } => {
                let mut out = Vec::new();
                for &(i, v) in x.entries() {
                    let w = entries.eval(i).ok_or(CoreError::RuleExhausted { index: i })?;
                    out.push((i, w * v));
                }
                Ok(FsVector::new(out))
            }
            OperatorRepr::Band { offsets, rules } => {
                let mut out = Vec::new();
                for &(i, v) in x.entries() {
                    for (o, r) in offsets.iter().zip(rules) {
                        let target = i as i64 + o;
                        if target < 0 {
                            continue;
                        }
                        let w = r.eval(i).ok_or(CoreError::RuleExhausted { index: i })?;
                        out.push((target as usize, w * v));
                    }
                }
                Ok(FsVector::new(out))
            }
        }
    }

    /// Adjoint with respect to the Euclidean pairing. Structured adjoints
    /// stay structured: the adjoint of a forward shift is the backward shift
    /// with conjugated weights and conversely.
    pub fn adjoint(&self) -> LinearOperator {
        match &self.repr {
            OperatorRepr::Dense(m) => LinearOperator::dense(m.adjoint()),
            OperatorRepr::WeightedShift { direction, weights } => {
                let w = weights.clone().conj();
                match direction {
                    ShiftDirection::Forward => LinearOperator::backward_shift(w),
                    ShiftDirection::Backward => LinearOperator::forward_shift(w),
                }
            }
            OperatorRepr::Diagonal { entries } => {
                LinearOperator::diagonal(entries.clone().conj())
            }
            OperatorRepr::Band { offsets, rules } => {
                let pairs = offsets
                    .iter()
                    .zip(rules)
                    .map(|(&o, r)| (-o, r.clone().shifted(-o).conj()))
                    .collect();
                LinearOperator::band(pairs)
            }
        }
    }

    /// Band form of a structured operator; `None` for dense.
    pub fn to_band_terms(&self) -> Option<Vec<(i64, WeightRule)>> {
        match &self.repr {
            OperatorRepr::Dense(_) => None,
            OperatorRepr::WeightedShift { direction, weights } => Some(match direction {
                ShiftDirection::Forward => vec![(1, weights.clone())],
                ShiftDirection::Backward => vec![(-1, weights.clone().shifted(-1))],
            }),
            OperatorRepr::Diagonal { entries } => Some(vec![(0, entries.clone())]),
            OperatorRepr::Band { offsets, rules } => {
                Some(offsets.iter().cloned().zip(rules.iter().cloned()).collect())
            }
        }
    }

    /// Composition `self . other` (apply `other` first).
    pub fn compose(&self, other: &LinearOperator) -> Result<LinearOperator, CoreError> {
        match (&self.repr, &other.repr) {
            (OperatorRepr::Dense(a), OperatorRepr::Dense(b)) => {
                if a.ncols() != b.nrows() {
                    return Err(CoreError::dim(format!(
                        "composition of {}x{} with {}x{}",
                        a.nrows(),
                        a.ncols(),
                        b.nrows(),
                        b.ncols()
                    )));
                }
                Ok(LinearOperator::dense(a * b))
            }
            (OperatorRepr::Dense(_), _) | (_, OperatorRepr::Dense(_)) => {
                Err(CoreError::UnsupportedVariant {
                    op: "compose of mixed dense and structured operands",
                    variant: self.variant_name(),
                })
            }
            _ => {
                let a = self.to_band_terms().expect("structured");
                let b = other.to_band_terms().expect("structured");
                let mut terms = Vec::with_capacity(a.len() * b.len());
                for (oa, ra) in &a {
                    for (ob, rb) in &b {
                        let rule = WeightRule::Product(vec![ra.clone().shifted(*ob), rb.clone()]);
                        terms.push((oa + ob, rule));
                    }
                }
                Ok(LinearOperator::band(terms))
            }
        }
    }

    pub fn add(&self, other: &LinearOperator) -> Result<LinearOperator, CoreError> {
        match (&self.repr, &other.repr) {
            (OperatorRepr::Dense(a), OperatorRepr::Dense(b)) => {
                if a.shape() != b.shape() {
                    return Err(CoreError::dim(format!(
                        "sum of {}x{} with {}x{}",
                        a.nrows(),
                        a.ncols(),
                        b.nrows(),
                        b.ncols()
                    )));
                }
                Ok(LinearOperator::dense(a + b))
            }
            (OperatorRepr::Dense(_), _) | (_, OperatorRepr::Dense(_)) => {
                Err(CoreError::UnsupportedVariant {
                    op: "sum of mixed dense and structured operands",
                    variant: self.variant_name(),
                })
            }
            _ => {
                let mut terms = self.to_band_terms().expect("structured");
                terms.extend(other.to_band_terms().expect("structured"));
                Ok(LinearOperator::band(terms))
            }
        }
    }

    pub fn scale(&self, s: C64) -> LinearOperator {
        let repr = match &self.repr {
            OperatorRepr::Dense(m) => OperatorRepr::Dense(m.map(|v| s * v)),
            OperatorRepr::WeightedShift { direction, weights } => OperatorRepr::WeightedShift {
                direction: *direction,
                weights: scale_rule(weights, s),
            },
            OperatorRepr::Diagonal { entries } => {
                OperatorRepr::Diagonal { entries: scale_rule(entries, s) }
            }
            OperatorRepr::Band { offsets, rules } => OperatorRepr::Band {
                offsets: offsets.clone(),
                rules: rules.iter().map(|r| scale_rule(r, s)).collect(),
            },
        };
        LinearOperator { repr, label: None }
    }

    pub fn sub(&self, other: &LinearOperator) -> Result<LinearOperator, CoreError> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// `self` composed with itself `n` times; `n = 0` gives the identity.
    pub fn pow(&self, n: u32) -> Result<LinearOperator, CoreError> {
        let mut acc = LinearOperator::identity(self.dim());
        for _ in 0..n {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }

    /// Leading corner of the matrix of the operator: rows and columns below
    /// `n`. Entries an operator sends past the window are dropped.
    pub fn window_snapshot(&self, n: usize) -> DMatrix<C64> {
        match &self.repr {
            OperatorRepr::Dense(m) => {
                let r = n.min(m.nrows());
                let c = n.min(m.ncols());
                m.view((0, 0), (r, c)).into_owned()
            }
            _ => {
                let mut out = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
                for j in 0..n {
                    if let Ok(col) = self.apply(&FsVector::basis(j)) {
                        for &(i, v) in col.entries() {
                            if i < n {
                                out[(i, j)] = v;
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// Operator norm: exact for dense; for structured forms, the norm of the
    /// restriction to the first `window` coordinates (a supremum of weight
    /// moduli for shifts and diagonals). Rules that run out mid-window cap
    /// the scan at their domain.
    pub fn op_norm(&self, window: usize) -> f64 {
        match &self.repr {
            OperatorRepr::Dense(m) => linalg::op_norm(m),
            OperatorRepr::WeightedShift { weights, .. } => rule_sup(weights, window),
            OperatorRepr::Diagonal { entries } => rule_sup(entries, window),
            OperatorRepr::Band { .. } => {
                let mut cols: Vec<FsVector> = Vec::with_capacity(window);
                let mut max_row = 0usize;
                for j in 0..window {
                    match self.apply(&FsVector::basis(j)) {
                        Ok(col) => {
                            if let Some(m) = col.support_max() {
                                max_row = max_row.max(m);
                            }
                            cols.push(col);
                        }
                        Err(_) => break,
                    }
                }
                if cols.is_empty() {
                    return 0.0;
                }
                let mut m = DMatrix::from_element(max_row + 1, cols.len(), C64::new(0.0, 0.0));
                for (j, col) in cols.iter().enumerate() {
                    for &(i, v) in col.entries() {
                        m[(i, j)] = v;
                    }
                }
                linalg::op_norm(&m)
            }
        }
    }
}

fn scale_rule(rule: &WeightRule, s: C64) -> WeightRule {
    if s == C64::new(1.0, 0.0) {
        return rule.clone();
    }
    match rule {
        WeightRule::Constant(c) => WeightRule::Constant(s * c),
        WeightRule::Explicit(values) => {
            WeightRule::Explicit(values.iter().map(|v| s * v).collect())
        }
        WeightRule::Geometric { first, ratio } => {
            WeightRule::Geometric { first: s * first, ratio: *ratio }
        }
        other => WeightRule::Product(vec![WeightRule::Constant(s), other.clone()]),
    }
}

fn rule_sup(rule: &WeightRule, window: usize) -> f64 {
    let mut sup = 0.0f64;
    for n in 0..window {
        match rule.eval(n) {
            Some(v) => sup = sup.max(v.norm()),
            None => break,
        }
    }
    sup
}

fn merge_band_terms(pairs: Vec<(i64, WeightRule)>) -> Vec<(i64, WeightRule)> {
    let mut sorted = pairs;
    sorted.sort_by_key(|&(o, _)| o);
    let mut out: Vec<(i64, Vec<WeightRule>)> = Vec::new();
    for (o, r) in sorted {
        match out.last_mut() {
            Some((prev, rules)) if *prev == o => rules.push(r),
            _ => out.push((o, vec![r])),
        }
    }
    out.into_iter()
        .map(|(o, mut rules)| {
            let rule = if rules.len() == 1 { rules.pop().unwrap() } else { WeightRule::Sum(rules) };
            (o, rule)
        })
        .collect()
}

/// Basis of the kernel of `t`.
///
/// Dense kernels come from the singular value decomposition with cutoff
/// `tol * sigma_max` and are orthonormal. Shift and diagonal kernels are read
/// off the weight rule over the first `window` indices with an exact zero
/// test, since structured weights are data, not measurements. Band operators
/// would need an unbounded search and are rejected.
pub fn kernel_basis(
    t: &LinearOperator,
    tol: f64,
    window: usize,
) -> Result<Vec<FsVector>, CoreError> {
    match t.repr() {
        OperatorRepr::Dense(m) => {
            let cutoff = tol * linalg::op_norm(m);
            Ok(linalg::kernel(m, cutoff).iter().map(FsVector::from_dense).collect())
        }
        OperatorRepr::WeightedShift { direction, weights } => {
            let mut out = Vec::new();
            if *direction == ShiftDirection::Backward {
                out.push(FsVector::basis(0));
            }
            for n in 0..window {
                match weights.eval(n) {
                    Some(w) if w == C64::new(0.0, 0.0) => {
                        out.push(FsVector::basis(match direction {
                            ShiftDirection::Forward => n,
                            ShiftDirection::Backward => n + 1,
                        }));
                    }
                    Some(_) => {}
                    None => break,
                }
            }
            Ok(out)
        }
        OperatorRepr::Diagonal { entries } => {
            let mut out = Vec::new();
            for n in 0..window {
                match entries.eval(n) {
                    Some(w) if w == C64::new(0.0, 0.0) => out.push(FsVector::basis(n)),
                    Some(_) => {}
                    None => break,
                }
            }
            Ok(out)
        }
        OperatorRepr::Band { .. } => Err(CoreError::UnsupportedVariant {
            op: "kernel_basis",
            variant: "band",
        }),
    }
}
