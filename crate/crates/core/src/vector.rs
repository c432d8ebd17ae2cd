//! Flat parameter/gradient vectors and the text dump format.

use std::fmt::Write as _;
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// A flat real vector in `R^d`. Model parameters, gradients and client
/// updates all travel as `ParamVector`s.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn sq_dist(&self, other: &[f64]) -> f64 {
        sq_dist(&self.0, other)
    }

    /// `self + alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) {
        debug_assert_eq!(self.0.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }

    /// Elementwise arithmetic mean. Fails on an empty list or ragged lengths.
    pub fn mean_of<'a, I>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ParamVector>,
    {
        let mut iter = vectors.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Empty("mean of zero vectors".into()))?;
        let mut acc = first.clone();
        let mut count = 1usize;
        for v in iter {
            check_same_len(&acc, v)?;
            acc.axpy(1.0, v);
            count += 1;
        }
        let inv = 1.0 / count as f64;
        acc.0.iter_mut().for_each(|x| *x *= inv);
        Ok(acc)
    }

    /// Render in the `paramvec v1 <d>` text format: a header line followed by
    /// one value per line. Values use Rust's shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.0.len() * 20 + 24);
        writeln!(out, "paramvec v1 {}", self.0.len()).unwrap();
        for v in &self.0 {
            writeln!(out, "{v:?}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Shape("empty paramvec dump".into()))?;
        let d: usize = header
            .strip_prefix("paramvec v1 ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Shape(format!("bad paramvec header: {header:?}")))?;
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Shape(format!("bad value {l:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != d {
            return Err(Error::Shape(format!(
                "header declares {d} values, found {}",
                values.len()
            )));
        }
        Ok(Self(values))
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub(crate) fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
