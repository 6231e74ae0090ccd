//! Finite-support vectors over the complex field.
//!
//! Entries are stored sparsely as `(index, value)` pairs, strictly increasing
//! in index and never exactly zero, so shift arithmetic performed on them is
//! as exact as the scalar operations themselves. An optional `dim_hint` marks
//! a vector as living in a concrete finite dimension; `None` means the
//! ambient space is the full sequence space.

use crate::{C64, CoreError};
use nalgebra::DVector;

#[derive(Debug, Clone, PartialEq)]
pub struct FsVector {
    entries: Vec<(usize, C64)>,
    dim_hint: Option<usize>,
}

impl FsVector {
    /// Builds a vector from arbitrary `(index, value)` pairs: duplicates are
    /// summed, exact zeros dropped, indices sorted.
    pub fn new(mut entries: Vec<(usize, C64)>) -> Self {
        entries.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, C64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => out.push((i, v)),
            }
        }
        out.retain(|&(_, v)| v != C64::new(0.0, 0.0));
        FsVector { entries: out, dim_hint: None }
    }

    pub fn zero() -> Self {
        FsVector { entries: Vec::new(), dim_hint: None }
    }

    /// Standard basis vector `e_n`.
    pub fn basis(n: usize) -> Self {
        FsVector { entries: vec![(n, C64::new(1.0, 0.0))], dim_hint: None }
    }

    /// Attaches a finite ambient dimension. All support must lie below it.
    pub fn with_dim(mut self, dim: usize) -> Result<Self, CoreError> {
        if let Some(&(i, _)) = self.entries.last() {
            if i >= dim {
                return Err(CoreError::dim(format!(
                    "support index {i} exceeds ambient dimension {dim}"
                )));
            }
        }
        self.dim_hint = Some(dim);
        Ok(self)
    }

    pub fn entries(&self) -> &[(usize, C64)] {
        &self.entries
    }

    pub fn dim_hint(&self) -> Option<usize> {
        self.dim_hint
    }

    /// Largest support index, if any entry is present.
    pub fn support_max(&self) -> Option<usize> {
        self.entries.last().map(|&(i, _)| i)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> C64 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Componentwise map over stored entries; exact zeros produced by `f` are
    /// dropped.
    pub fn map(&self, mut f: impl FnMut(usize, C64) -> C64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(i, v)| (i, f(i, v)))
            .filter(|&(_, v)| v != C64::new(0.0, 0.0))
            .collect();
        FsVector { entries, dim_hint: self.dim_hint }
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|_, v| s * v)
    }

    pub fn add(&self, other: &FsVector) -> Self {
        let mut merged = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(i, u)), Some(&&(j, v))) => {
                    if i < j {
                        merged.push((i, u));
                        a.next();
                    } else if j < i {
                        merged.push((j, v));
                        b.next();
                    } else {
                        merged.push((i, u + v));
                        a.next();
                        b.next();
                    }
                }
                (Some(&&(i, u)), None) => {
                    merged.push((i, u));
                    a.next();
                }
                (None, Some(&&(j, v))) => {
                    merged.push((j, v));
                    b.next();
                }
                (None, None) => break,
            }
        }
        merged.retain(|&(_, v)| v != C64::new(0.0, 0.0));
        FsVector { entries: merged, dim_hint: merge_hints(self.dim_hint, other.dim_hint) }
    }

    pub fn sub(&self, other: &FsVector) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Euclidean inner product, linear in the first argument and conjugate
    /// linear in the second: `sum_i x_i conj(y_i)`.
    pub fn inner(&self, other: &FsVector) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        while let (Some(&&(i, u)), Some(&&(j, v))) = (a.peek(), b.peek()) {
            if i < j {
                a.next();
            } else if j < i {
                b.next();
            } else {
                acc += u * v.conj();
                a.next();
                b.next();
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        // folding from positive zero keeps the empty support at +0.0, where
        // the standard sum identity of -0.0 would put a sign on sqrt
        self.entries.iter().map(|&(_, v)| v.norm_sqr()).fold(0.0, |acc, t| acc + t)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Dense image in dimension `dim`. Fails when support sticks out.
    pub fn to_dense(&self, dim: usize) -> Result<DVector<C64>, CoreError> {
        if let Some(m) = self.support_max() {
            if m >= dim {
                return Err(CoreError::dim(format!(
                    "support index {m} exceeds requested dimension {dim}"
                )));
            }
        }
        let mut out = DVector::from_element(dim, C64::new(0.0, 0.0));
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        Ok(out)
    }

    pub fn from_dense(v: &DVector<C64>) -> Self {
        let entries = v
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != C64::new(0.0, 0.0))
            .map(|(i, c)| (i, *c))
            .collect();
        FsVector { entries, dim_hint: Some(v.len()) }
    }
}

fn merge_hints(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        (None, None) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn normalizes_duplicates_and_zeros() {
        let v = FsVector::new(vec![(3, c(1.0, 0.0)), (1, c(2.0, 0.0)), (3, c(-1.0, 0.0))]);
        assert_eq!(v.entries(), &[(1, c(2.0, 0.0))]);
        assert_eq!(v.get(3), c(0.0, 0.0));
    }

    #[test]
    fn inner_is_linear_first_conjugate_second() {
        let x = FsVector::new(vec![(0, c(0.0, 1.0))]);
        let y = FsVector::new(vec![(0, c(0.0, 1.0))]);
        // <ix; ix> = i * conj(i) = 1
        assert_eq!(x.inner(&y), c(1.0, 0.0));
        let sx = x.scale(c(0.0, 1.0));
        // scaling the first slot by i scales the product by i
        assert_eq!(sx.inner(&y), c(0.0, 1.0));
    }

    #[test]
    fn add_cancels_exactly() {
        let x = FsVector::new(vec![(2, c(0.5, 0.0)), (5, c(1.0, -1.0))]);
        let y = x.scale(c(-1.0, 0.0));
        let diff = x.add(&y);
        assert!(diff.is_zero());
        assert_eq!(diff.norm().to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn dense_round_trip() {
        let x = FsVector::new(vec![(0, c(1.0, 0.0)), (2, c(0.0, -2.0))]);
        let d = x.to_dense(4).unwrap();
        assert_eq!(d[2], c(0.0, -2.0));
        let back = FsVector::from_dense(&d);
        assert_eq!(back.entries(), x.entries());
        assert_eq!(back.dim_hint(), Some(4));
    }

    #[test]
    fn with_dim_rejects_overflowing_support() {
        let x = FsVector::basis(7);
        assert!(x.with_dim(7).is_err());
    }

    #[test]
    fn norm_matches_hand_value() {
        let x = FsVector::new(vec![(0, c(3.0, 0.0)), (9, c(0.0, 4.0))]);
        assert_eq!(x.norm(), 5.0);
    }
}
