//! The evaluation pseudo-norm on signal space.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_len, Error, Result};

/// Exponent of the inner coordinate norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InnerExponent {
    One,
    Two,
    Inf,
}

impl InnerExponent {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(InnerExponent::One),
            "2" => Ok(InnerExponent::Two),
            "inf" | "infinity" | "max" => Ok(InnerExponent::Inf),
            other => Err(Error::usage(format!(
                "inner exponent must be 1, 2 or inf, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for InnerExponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InnerExponent::One => write!(f, "1"),
            InnerExponent::Two => write!(f, "2"),
            InnerExponent::Inf => write!(f, "inf"),
        }
    }
}

// JSON has no infinity literal: 1 and 2 are numbers, the max norm is "inf".
impl Serialize for InnerExponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            InnerExponent::One => s.serialize_u8(1),
            InnerExponent::Two => s.serialize_u8(2),
            InnerExponent::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for InnerExponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(v) if v == 1.0 => Ok(InnerExponent::One),
            Raw::Num(v) if v == 2.0 => Ok(InnerExponent::Two),
            Raw::Num(v) => Err(format!("inner exponent must be 1, 2 or \"inf\", got {v}")),
            Raw::Str(s) => InnerExponent::parse(&s).map_err(|e| e.to_string()),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Pseudo-norm `‖·‖` on signal space together with the loss exponent `p`.
///
/// The norm is the `q`-norm of the coordinates selected by `mask`; unmasked
/// coordinates never contribute, which makes it a pseudo-norm whenever the
/// mask is not all ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNorm", into = "RawNorm")]
pub struct NormSpec {
    inner: InnerExponent,
    mask: Vec<bool>,
    p: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNorm {
    p: f64,
    q: InnerExponent,
    mask: Vec<u8>,
}

impl TryFrom<RawNorm> for NormSpec {
    type Error = Error;

    fn try_from(raw: RawNorm) -> Result<Self> {
        let mask = raw
            .mask
            .iter()
            .map(|&m| match m {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::data(format!("mask entries must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        NormSpec::new(raw.q, mask, raw.p)
    }
}

impl From<NormSpec> for RawNorm {
    fn from(n: NormSpec) -> Self {
        RawNorm {
            p: n.p,
            q: n.inner,
            mask: n.mask.iter().map(|&m| m as u8).collect(),
        }
    }
}

impl NormSpec {
    pub fn new(inner: InnerExponent, mask: Vec<bool>, p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::usage(format!("loss exponent p must be positive, got {p}")));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::usage("norm mask must select at least one coordinate"));
        }
        Ok(Self { inner, mask, p })
    }

    /// Euclidean norm on all `d1` coordinates with loss exponent `p`.
    pub fn euclidean(d1: usize, p: f64) -> Result<Self> {
        Self::new(InnerExponent::Two, vec![true; d1], p)
    }

    /// Full mask of length `d1`.
    pub fn full(inner: InnerExponent, d1: usize, p: f64) -> Result<Self> {
        Self::new(inner, vec![true; d1], p)
    }

    /// Mask from a list of included coordinate indices.
    pub fn from_indices(inner: InnerExponent, d1: usize, indices: &[usize], p: f64) -> Result<Self> {
        let mut mask = vec![false; d1];
        for &i in indices {
            if i >= d1 {
                return Err(Error::usage(format!("mask index {i} out of range for d1 = {d1}")));
            }
            mask[i] = true;
        }
        Self::new(inner, mask, p)
    }

    pub fn inner(&self) -> InnerExponent {
        self.inner
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    /// Same norm with a different loss exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.inner, self.mask.clone(), p)
    }

    pub fn is_full_mask(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Indices of the masked-in coordinates.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        check_len("norm mask", self.mask.len(), len)
    }

    /// `‖a − b‖` without dimension checks.
    #[inline]
    pub(crate) fn dist_raw(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.inner {
            InnerExponent::Two => self.sq_dist_raw(a, b).sqrt(),
            InnerExponent::One => self.zip(a, b).map(|d| d.abs()).sum(),
            InnerExponent::Inf => self.zip(a, b).fold(0.0, |m, d| m.max(d.abs())),
        }
    }

    /// `‖a − b‖^p` without dimension checks; avoids the square root when
    /// `q = p = 2`.
    #[inline]
    pub(crate) fn dist_pow_raw(&self, a: &[f64], b: &[f64]) -> f64 {
        if self.inner == InnerExponent::Two && self.p == 2.0 {
            self.sq_dist_raw(a, b)
        } else {
            pow_p(self.dist_raw(a, b), self.p)
        }
    }

    #[inline]
    fn sq_dist_raw(&self, a: &[f64], b: &[f64]) -> f64 {
        self.zip(a, b).map(|d| d * d).sum()
    }

    #[inline]
    fn zip<'a>(&'a self, a: &'a [f64], b: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        a.iter()
            .zip(b)
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|((x, y), _)| x - y)
    }

    /// `‖v‖` of a single vector.
    pub(crate) fn norm_raw(&self, v: &[f64]) -> f64 {
        match self.inner {
            InnerExponent::Two => self.masked(v).map(|x| x * x).sum::<f64>().sqrt(),
            InnerExponent::One => self.masked(v).map(f64::abs).sum(),
            InnerExponent::Inf => self.masked(v).fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    fn masked<'a>(&'a self, v: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        v.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(x, _)| *x)
    }
}

#[inline]
pub(crate) fn pow_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

#[inline]
pub(crate) fn root_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / p)
    }
}

/// Distance `‖a − b‖` under the pseudo-norm described by `norm`.
pub fn p_dist(a: &[f64], b: &[f64], norm: &NormSpec) -> Result<f64> {
    check_len("p_dist operands", a.len(), b.len())?;
    norm.check_dim(a.len())?;
    Ok(norm.dist_raw(a, b))
}
