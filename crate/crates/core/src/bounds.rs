//! Average kernel size, the per-measurement optimal map and the bound report.
//!
//! For a collection of feasible sets `{x_{k,n}}` the average kernel size is
//!
//! ```text
//! Kersize = ( (1/K) Σ_k v_k )^{1/p},   v_k = (1/N(k)²) Σ_{n,n'} ‖x_{k,n} − x_{k,n'}‖^p
//! ```
//!
//! with `v_k = 0` for empty sets. Half of it lower-bounds the loss of every
//! reconstruction map on the flattened dataset; when all sets have the same
//! size the loss of the per-set minimiser `θ` is also at most `Kersize`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{dataset_from_collection, loss, FeasibleSetCollection, Predictions, SignalVector};
use crate::error::{check_len, Error, Result};
use crate::norm::{pow_p, root_p, InnerExponent, NormSpec};
use crate::summation::KahanSum;

/// Relative tolerance of every inequality flag.
pub const BOUND_RTOL: f64 = 1e-9;

/// Name under which the optimal map appears in reports.
pub const THETA: &str = "theta";

/// `a ≤ b` up to `BOUND_RTOL · max(1, b)`.
pub fn le_tol(a: f64, b: f64) -> bool {
    a <= b + BOUND_RTOL * b.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KersizeResult {
    pub kersize: f64,
    /// `v_k` per set.
    pub contributions: Vec<f64>,
}

impl KersizeResult {
    pub fn half(&self) -> f64 {
        0.5 * self.kersize
    }
}

/// Sets at least this large split their pair loop into per-row tasks.
const PARALLEL_ROWS: usize = 256;

/// Mean of `‖x_n − x_{n'}‖^p` over all ordered pairs of one set.
pub fn set_contribution(members: &[SignalVector], norm: &NormSpec) -> f64 {
    let n = members.len();
    if n < 2 {
        return 0.0;
    }
    let row = |i: usize| -> KahanSum {
        let xi = &members[i];
        members[i + 1..].iter().map(|xj| norm.dist_pow_raw(xi, xj)).collect()
    };
    let mut acc = KahanSum::new();
    if n >= PARALLEL_ROWS {
        // per-row partials merged in row order, so the result does not
        // depend on scheduling
        let rows: Vec<KahanSum> = (0..n - 1).into_par_iter().map(row).collect();
        for r in &rows {
            acc.merge(r);
        }
    } else {
        for i in 0..n - 1 {
            acc.merge(&row(i));
        }
    }
    2.0 * acc.value() / (n as f64 * n as f64)
}

/// Average kernel size of a collection.
pub fn kersize(c: &FeasibleSetCollection, norm: &NormSpec) -> Result<KersizeResult> {
    norm.check_dim(c.d1())?;
    let contributions: Vec<f64> = c
        .entries()
        .par_iter()
        .map(|e| set_contribution(&e.members, norm))
        .collect();
    let mean = crate::summation::sum(contributions.iter().copied()) / contributions.len() as f64;
    Ok(KersizeResult {
        kersize: root_p(mean, norm.p()),
        contributions,
    })
}

/// Kernel size of a single set (the `K = 1` case) from its `v_k`.
pub fn single_kersize(contribution: f64, p: f64) -> f64 {
    root_p(contribution, p)
}

const MAX_ITER: usize = 10_000;
const STEP_TOL: f64 = 1e-10;
/// Subgradient iterations without relative progress beyond `STEP_TOL`.
const STALL: usize = 2_000;

/// Value of the optimal map `θ(y_k) = argmin_z Σ_n ‖x_{k,n} − z‖^p`.
///
/// Closed forms are used for `p = 2, q = 2` (mean) and `p = 1, q = 1`
/// (coordinate median). `p = 1, q = 2` runs Weiszfeld's iteration with the
/// Vardi–Zhang treatment of data points; everything else falls back to
/// projected subgradient descent. Coordinates outside the norm mask do not
/// affect the objective and are set to the member mean.
pub fn optimal_map_value(members: &[SignalVector], norm: &NormSpec) -> Result<SignalVector> {
    if members.is_empty() {
        return Err(Error::data("optimal map value of an empty feasible set"));
    }
    if norm.p() < 1.0 {
        return Err(Error::Unsupported(format!(
            "optimal map for p = {} < 1 (non-convex objective)",
            norm.p()
        )));
    }
    let d = members[0].len();
    norm.check_dim(d)?;
    for m in members {
        check_len("feasible set member", d, m.len())?;
    }
    if members.len() == 1 {
        return Ok(members[0].clone());
    }
    let mean = coordinate_mean(members);
    let active: Vec<usize> = norm.active().collect();
    let points: Vec<Vec<f64>> = members
        .iter()
        .map(|m| active.iter().map(|&i| m[i]).collect())
        .collect();
    let start: Vec<f64> = active.iter().map(|&i| mean[i]).collect();
    let p = norm.p();
    let best = match norm.inner() {
        InnerExponent::Two if p == 2.0 => start,
        InnerExponent::One if p == 1.0 => coordinate_median(&points),
        InnerExponent::Two if p == 1.0 => weiszfeld(&points, start),
        inner => subgradient(&points, start, inner, p),
    };
    let mut out = mean;
    for (&i, v) in active.iter().zip(best) {
        out[i] = v;
    }
    SignalVector::new(out)
}

pub(crate) fn coordinate_mean(members: &[SignalVector]) -> Vec<f64> {
    let n = members.len() as f64;
    (0..members[0].len())
        .map(|i| crate::summation::sum(members.iter().map(|m| m[i])) / n)
        .collect()
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn coordinate_median(points: &[Vec<f64>]) -> Vec<f64> {
    (0..points[0].len())
        .map(|i| median_of(points.iter().map(|p| p[i]).collect()))
        .collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Weiszfeld data at `y`: multiplicity of `y` among the points, the
/// Weiszfeld map `T(y)` over the other points, and `‖R(y)‖`.
fn weiszfeld_terms(points: &[Vec<f64>], y: &[f64]) -> (usize, Vec<f64>, f64) {
    let d = y.len();
    let mut coincident = 0;
    let mut num = vec![0.0; d];
    let mut den = 0.0;
    let mut resid = vec![0.0; d];
    for p in points {
        let dist = euclid(p, y);
        if dist == 0.0 {
            coincident += 1;
            continue;
        }
        den += 1.0 / dist;
        for i in 0..d {
            num[i] += p[i] / dist;
            resid[i] += (p[i] - y[i]) / dist;
        }
    }
    let t = if den > 0.0 { num.iter().map(|v| v / den).collect() } else { y.to_vec() };
    (coincident, t, resid.iter().map(|v| v * v).sum::<f64>().sqrt())
}

fn weiszfeld(points: &[Vec<f64>], mut y: Vec<f64>) -> Vec<f64> {
    for _ in 0..MAX_ITER {
        let (eta, t, r) = weiszfeld_terms(points, &y);
        let next: Vec<f64> = if eta == 0 {
            t
        } else if r <= eta as f64 {
            return y;
        } else {
            let w = eta as f64 / r;
            t.iter().zip(&y).map(|(t, y)| (1.0 - w) * t + w * y).collect()
        };
        let step = euclid(&next, &y);
        y = next;
        if step < STEP_TOL {
            break;
        }
    }
    // iterates only approach an optimal data point, so snap to it when
    // ‖R(x_j)‖ ≤ multiplicity(x_j) holds there
    let nearest = points
        .iter()
        .min_by(|a, b| euclid(a, &y).total_cmp(&euclid(b, &y)))
        .expect("non-empty");
    let (eta, _, r) = weiszfeld_terms(points, nearest);
    if r <= eta as f64 {
        return nearest.clone();
    }
    y
}

fn inner_norm(diff: impl Iterator<Item = f64>, inner: InnerExponent) -> f64 {
    match inner {
        InnerExponent::One => diff.map(f64::abs).sum(),
        InnerExponent::Two => diff.map(|v| v * v).sum::<f64>().sqrt(),
        InnerExponent::Inf => diff.fold(0.0, |m, v| m.max(v.abs())),
    }
}

fn objective(points: &[Vec<f64>], z: &[f64], inner: InnerExponent, p: f64) -> f64 {
    points
        .iter()
        .map(|x| pow_p(inner_norm(x.iter().zip(z).map(|(a, b)| a - b), inner), p))
        .sum()
}

/// Adds a subgradient of `z ↦ ‖x − z‖_q^p` at `z` into `g`.
fn add_subgradient(g: &mut [f64], x: &[f64], z: &[f64], inner: InnerExponent, p: f64) {
    let diff: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
    let r = inner_norm(diff.iter().copied(), inner);
    if r == 0.0 {
        return;
    }
    let scale = p * r.powf(p - 1.0);
    let sign = |v: f64| if v == 0.0 { 0.0 } else { v.signum() };
    match inner {
        InnerExponent::Two => {
            for (gi, di) in g.iter_mut().zip(&diff) {
                *gi += scale * di / r;
            }
        }
        InnerExponent::One => {
            for (gi, di) in g.iter_mut().zip(&diff) {
                *gi += scale * sign(*di);
            }
        }
        InnerExponent::Inf => {
            let j = (0..diff.len())
                .max_by(|&a, &b| diff[a].abs().total_cmp(&diff[b].abs()))
                .expect("non-empty");
            g[j] += scale * sign(diff[j]);
        }
    }
}

/// Projected subgradient descent with steps `r/√t` on the ball `B(c, 2r)`,
/// where `c` is the best of the mean and the members and `r` the largest
/// member distance from it. Returns the best iterate seen.
fn subgradient(points: &[Vec<f64>], mean: Vec<f64>, inner: InnerExponent, p: f64) -> Vec<f64> {
    let mut best = mean;
    let mut best_val = objective(points, &best, inner, p);
    for x in points {
        let v = objective(points, x, inner, p);
        if v < best_val {
            best_val = v;
            best = x.clone();
        }
    }
    let centre = best.clone();
    let radius = points.iter().map(|x| euclid(x, &centre)).fold(0.0, f64::max);
    if radius == 0.0 {
        return best;
    }
    let mut z = best.clone();
    let mut g = vec![0.0; z.len()];
    let mut last_gain = 0;
    for t in 0..MAX_ITER {
        if t - last_gain > STALL {
            break;
        }
        g.iter_mut().for_each(|v| *v = 0.0);
        for x in points {
            add_subgradient(&mut g, x, &z, inner, p);
        }
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn == 0.0 {
            break;
        }
        let step = radius / ((t + 1) as f64).sqrt();
        for (zi, gi) in z.iter_mut().zip(&g) {
            *zi -= step * gi / gn;
        }
        let off = euclid(&z, &centre);
        if off > 2.0 * radius {
            let s = 2.0 * radius / off;
            for (zi, ci) in z.iter_mut().zip(&centre) {
                *zi = ci + (*zi - ci) * s;
            }
        }
        let v = objective(points, &z, inner, p);
        if v < best_val {
            if v < best_val * (1.0 - STEP_TOL) {
                last_gain = t;
            }
            best_val = v;
            best.copy_from_slice(&z);
        }
    }
    best
}

/// Reconstruction maps computed from the feasible sets themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinMap {
    /// Member mean.
    Mean,
    /// Coordinate-wise member median.
    Median,
    /// Constant zero signal.
    Zero,
}

impl BuiltinMap {
    pub const ALL: [BuiltinMap; 3] = [BuiltinMap::Mean, BuiltinMap::Median, BuiltinMap::Zero];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinMap::Mean => "mean",
            BuiltinMap::Median => "median",
            BuiltinMap::Zero => "zero",
        }
    }
}

/// Predictions of a built-in map for every non-empty set.
pub fn builtin_predictions(c: &FeasibleSetCollection, map: BuiltinMap) -> Predictions {
    c.entries()
        .iter()
        .filter(|e| !e.members.is_empty())
        .map(|e| {
            let v = match map {
                BuiltinMap::Mean => coordinate_mean(&e.members),
                BuiltinMap::Median => (0..c.d1())
                    .map(|i| median_of(e.members.iter().map(|m| m[i]).collect()))
                    .collect(),
                BuiltinMap::Zero => vec![0.0; c.d1()],
            };
            (e.id.clone(), SignalVector::new(v).expect("finite members"))
        })
        .collect()
}

/// `θ` for every non-empty set.
pub fn theta_predictions(c: &FeasibleSetCollection, norm: &NormSpec) -> Result<Predictions> {
    c.entries()
        .par_iter()
        .filter(|e| !e.members.is_empty())
        .map(|e| Ok((e.id.clone(), optimal_map_value(&e.members, norm)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementBound {
    pub id: String,
    pub n_k: usize,
    /// `v_k`.
    pub contribution: f64,
    /// Half the kernel size of this set on its own.
    pub half_kersize_single: f64,
    /// Loss of each map on this set's pairs; `None` for an empty set.
    pub losses: BTreeMap<String, Option<f64>>,
    /// `half_kersize_single ≤ loss` for every map.
    pub lower_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityFlags {
    /// `half_kersize ≤ loss` for every evaluated map.
    pub lower_ok: bool,
    pub lower_ok_by_map: BTreeMap<String, bool>,
    /// `loss(θ) ≤ kersize`; only certified for uniform collections, `None`
    /// otherwise.
    pub theta_upper_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateBound {
    pub kersize: f64,
    pub half_kersize: f64,
    /// Loss of every map, `theta` included.
    pub losses: BTreeMap<String, f64>,
    pub theta_loss: f64,
    pub inequality_flags: InequalityFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub norm: NormSpec,
    pub k: usize,
    pub m: usize,
    pub uniform: bool,
    /// Which guarantee the flags are checked against.
    pub guarantee: String,
    pub per_measurement: Vec<MeasurementBound>,
    pub aggregate: AggregateBound,
}

impl BoundReport {
    /// Map names in report order.
    pub fn map_names(&self) -> Vec<String> {
        self.aggregate.losses.keys().cloned().collect()
    }

    /// Any aggregate or per-measurement flag that came out false.
    pub fn has_violation(&self) -> bool {
        let f = &self.aggregate.inequality_flags;
        !f.lower_ok || f.theta_upper_ok == Some(false) || self.per_measurement.iter().any(|m| !m.lower_ok)
    }
}

const UNIFORM_NOTE: &str =
    "uniform feasible-set sizes: the lower bound holds for every map and loss(theta) <= kersize";
const NONUNIFORM_NOTE: &str = "non-uniform feasible-set sizes: per-set lower bounds hold, the aggregate lower bound may fail and the theta upper bound is not certified";

fn set_loss(members: &[SignalVector], pred: &[f64], norm: &NormSpec) -> f64 {
    let s: KahanSum = members.iter().map(|x| norm.dist_pow_raw(x, pred)).collect();
    root_p(s.value() / members.len() as f64, norm.p())
}

/// Computes the kernel size, the loss of every map and of `θ`, and the
/// inequality flags.
pub fn verify_bounds(
    c: &FeasibleSetCollection,
    predictions: &BTreeMap<String, Predictions>,
    norm: &NormSpec,
) -> Result<BoundReport> {
    if predictions.contains_key(THETA) {
        return Err(Error::usage(format!("map name `{THETA}` is reserved")));
    }
    let ks = kersize(c, norm)?;
    let dataset = dataset_from_collection(c);
    let theta = theta_predictions(c, norm)?;

    let mut maps: BTreeMap<&str, &Predictions> =
        predictions.iter().map(|(k, v)| (k.as_str(), v)).collect();
    maps.insert(THETA, &theta);

    let mut losses = BTreeMap::new();
    for (name, preds) in &maps {
        let l = loss(&dataset, preds, norm).map_err(|e| match e {
            Error::Data(m) => Error::Data(format!("map `{name}`: {m}")),
            other => other,
        })?;
        losses.insert(name.to_string(), l);
    }

    let half = ks.half();
    let lower_ok_by_map: BTreeMap<String, bool> =
        losses.iter().map(|(n, &l)| (n.clone(), le_tol(half, l))).collect();
    let uniform = c.is_uniform();
    let theta_loss = losses[THETA];
    let flags = InequalityFlags {
        lower_ok: lower_ok_by_map.values().all(|&b| b),
        lower_ok_by_map,
        theta_upper_ok: uniform.then(|| le_tol(theta_loss, ks.kersize)),
    };

    let per_measurement = c
        .entries()
        .iter()
        .zip(&ks.contributions)
        .map(|(e, &v)| {
            let half_single = 0.5 * single_kersize(v, norm.p());
            let set_losses: BTreeMap<String, Option<f64>> = maps
                .iter()
                .map(|(name, preds)| {
                    let l = if e.members.is_empty() {
                        None
                    } else {
                        preds.get(&e.id).map(|p| set_loss(&e.members, p, norm))
                    };
                    (name.to_string(), l)
                })
                .collect();
            let lower_ok = set_losses.values().flatten().all(|&l| le_tol(half_single, l));
            MeasurementBound {
                id: e.id.clone(),
                n_k: e.members.len(),
                contribution: v,
                half_kersize_single: half_single,
                losses: set_losses,
                lower_ok,
            }
        })
        .collect();

    Ok(BoundReport {
        norm: norm.clone(),
        k: c.len(),
        m: dataset.len(),
        uniform,
        guarantee: if uniform { UNIFORM_NOTE } else { NONUNIFORM_NOTE }.to_string(),
        per_measurement,
        aggregate: AggregateBound {
            kersize: ks.kersize,
            half_kersize: half,
            losses,
            theta_loss,
            inequality_flags: flags,
        },
    })
}
