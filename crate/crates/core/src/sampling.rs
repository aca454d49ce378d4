//! Feasible-set approximation: draw candidate signals, keep the ones the
//! forward model can map onto the measurement under admissible noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    dataset_from_collection, FeasibleSet, FeasibleSetCollection, MeasurementVector, PairedDataset,
    SignalVector,
};
use crate::error::{check_len, Error, Result};
use crate::forward::{apply, ForwardModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Enumerate a lattice over the signal box.
    Grid,
    /// Uniform proposals over the signal box.
    Rejection,
    /// Random walk that only ever moves to feasible states.
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    /// Maximum number of members per feasible set.
    pub n_max: usize,
    #[serde(default)]
    pub seed: u64,
    /// Maximum number of proposals per feasible set.
    pub budget: usize,
    /// Half-width of the uniform random-walk step, per coordinate.
    #[serde(default)]
    pub step_scale: Vec<f64>,
    /// Lattice points per coordinate for the grid sampler.
    #[serde(default)]
    pub grid_resolution: Vec<usize>,
    /// Accepted random-walk states discarded before recording.
    #[serde(default)]
    pub burn_in: usize,
    /// Record every `thinning`-th accepted random-walk state.
    #[serde(default = "one")]
    pub thinning: usize,
    /// Optional random-walk start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

impl SamplerSpec {
    pub fn new(kind: SamplerKind, n_max: usize, seed: u64, budget: usize) -> Self {
        Self {
            kind,
            n_max,
            seed,
            budget,
            step_scale: Vec::new(),
            grid_resolution: Vec::new(),
            burn_in: 0,
            thinning: 1,
            anchor: None,
        }
    }

    pub fn grid(resolution: Vec<usize>, n_max: usize, budget: usize) -> Self {
        Self {
            grid_resolution: resolution,
            ..Self::new(SamplerKind::Grid, n_max, 0, budget)
        }
    }

    pub fn random_walk(step_scale: Vec<f64>, n_max: usize, seed: u64, budget: usize) -> Self {
        Self {
            step_scale,
            ..Self::new(SamplerKind::RandomWalk, n_max, seed, budget)
        }
    }

    pub fn validate(&self, d1: usize) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::usage("n_max must be at least 1"));
        }
        if self.budget < self.n_max {
            return Err(Error::usage(format!(
                "budget ({}) must be at least n_max ({})",
                self.budget, self.n_max
            )));
        }
        if self.thinning == 0 {
            return Err(Error::usage("thinning must be at least 1"));
        }
        match self.kind {
            SamplerKind::Grid => {
                check_len("grid_resolution", d1, self.grid_resolution.len())?;
                if self.grid_resolution.contains(&0) {
                    return Err(Error::usage("grid resolution entries must be >= 1"));
                }
            }
            SamplerKind::RandomWalk => {
                check_len("step_scale", d1, self.step_scale.len())?;
                if self.step_scale.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                    return Err(Error::usage("step_scale entries must be nonnegative"));
                }
                if let Some(a) = &self.anchor {
                    check_len("anchor", d1, a.len())?;
                }
            }
            SamplerKind::Rejection => {}
        }
        Ok(())
    }
}

/// Members found for one measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub members: Vec<SignalVector>,
    pub proposals: usize,
    pub warning: Option<String>,
}

/// Samples up to `n_max` feasible signals for `y`.
pub fn sample_feasible(model: &ForwardModelSpec, y: &[f64], sampler: &SamplerSpec) -> Result<SampleOutcome> {
    sampler.validate(model.d1())?;
    check_len("measurement", model.d2(), y.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let start = sampler.anchor.as_deref().map(|a| (a, true));
    Ok(run_sampler(model, y, sampler, &mut rng, start, sampler.n_max))
}

struct Chain<'a> {
    model: &'a ForwardModelSpec,
    y: &'a [f64],
    budget: usize,
    proposals: usize,
}

impl Chain<'_> {
    fn exhausted(&self) -> bool {
        self.proposals >= self.budget
    }

    fn test(&mut self, x: &[f64]) -> bool {
        self.proposals += 1;
        self.model.in_bounds(x) && self.model.feasible_given(&self.model.noiseless_raw(x), self.y)
    }
}

/// `start` is an optional chain start and whether it should be recorded.
fn run_sampler(
    model: &ForwardModelSpec,
    y: &[f64],
    spec: &SamplerSpec,
    rng: &mut ChaCha8Rng,
    start: Option<(&[f64], bool)>,
    target: usize,
) -> SampleOutcome {
    let mut chain = Chain {
        model,
        y,
        budget: spec.budget,
        proposals: 0,
    };
    let mut out: Vec<Vec<f64>> = Vec::new();
    if target > 0 {
        match spec.kind {
            SamplerKind::Grid => grid(&mut chain, &spec.grid_resolution, target, &mut out),
            SamplerKind::Rejection => {
                while out.len() < target && !chain.exhausted() {
                    let x = model.sample_signal(rng);
                    if chain.test(&x) {
                        out.push(x);
                    }
                }
            }
            SamplerKind::RandomWalk => random_walk(&mut chain, spec, rng, start, target, &mut out),
        }
    }
    let warning = (target > 0 && out.is_empty())
        .then(|| format!("budget of {} proposals exhausted without a feasible sample", spec.budget));
    SampleOutcome {
        members: out
            .into_iter()
            .map(|v| SignalVector::new(v).expect("signals inside a finite box are finite"))
            .collect(),
        proposals: chain.proposals,
        warning,
    }
}

fn grid(chain: &mut Chain<'_>, resolution: &[usize], target: usize, out: &mut Vec<Vec<f64>>) {
    let bounds = chain.model.signal_bounds().to_vec();
    let coord = |i: usize, j: usize| {
        let [lo, hi] = bounds[i];
        if resolution[i] == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * j as f64 / (resolution[i] - 1) as f64
        }
    };
    let d = resolution.len();
    let mut idx = vec![0usize; d];
    loop {
        if out.len() >= target || chain.exhausted() {
            return;
        }
        let x: Vec<f64> = (0..d).map(|i| coord(i, idx[i])).collect();
        if chain.test(&x) {
            out.push(x);
        }
        // odometer increment, last coordinate fastest
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < resolution[i] {
                break;
            }
            idx[i] = 0;
        }
    }
}

fn random_walk(
    chain: &mut Chain<'_>,
    spec: &SamplerSpec,
    rng: &mut ChaCha8Rng,
    start: Option<(&[f64], bool)>,
    target: usize,
    out: &mut Vec<Vec<f64>>,
) {
    let mut state: Option<(Vec<f64>, bool)> = None;
    if let Some((s, record)) = start {
        if chain.model.in_bounds(s) && chain.model.feasible_given(&chain.model.noiseless_raw(s), chain.y) {
            state = Some((s.to_vec(), record));
        }
    }
    if state.is_none() {
        while !chain.exhausted() {
            let x = chain.model.sample_signal(rng);
            if chain.test(&x) {
                state = Some((x, true));
                break;
            }
        }
    }
    let Some((mut current, record_start)) = state else {
        return;
    };
    let mut accepted = 0usize;
    let mut record = |x: &[f64], out: &mut Vec<Vec<f64>>| {
        let i = accepted;
        accepted += 1;
        if i >= spec.burn_in && (i - spec.burn_in) % spec.thinning == 0 {
            out.push(x.to_vec());
        }
    };
    if record_start {
        record(&current, out);
    }
    let mut proposal = vec![0.0; current.len()];
    while out.len() < target && !chain.exhausted() {
        for ((p, c), s) in proposal.iter_mut().zip(&current).zip(&spec.step_scale) {
            *p = if *s > 0.0 { c + rng.gen_range(-*s..=*s) } else { *c };
        }
        if chain.test(&proposal) {
            current.copy_from_slice(&proposal);
            record(&current, out);
        }
    }
}

/// Where the measurements of a collection come from.
#[derive(Debug, Clone)]
pub enum MeasurementSource {
    /// Externally supplied `(id, y)` pairs.
    Given(Vec<(String, MeasurementVector)>),
    /// `count` measurements `y_k = F(x_k, e_k)` from uniform `x_k`, `e_k`.
    Generate { count: usize },
}

/// Result of building a collection.
#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub collection: FeasibleSetCollection,
    pub dataset: PairedDataset,
    /// Generating signals, in generator mode.
    pub ground_truth: Option<Vec<SignalVector>>,
    pub warnings: Vec<String>,
}

/// Builds one feasible set per measurement.
///
/// Every measurement `k` draws from its own ChaCha stream derived from
/// `(seed, k)`, so the result does not depend on the thread count.
pub fn build_feasible_sets(
    model: &ForwardModelSpec,
    source: MeasurementSource,
    sampler: &SamplerSpec,
) -> Result<BuildOutput> {
    sampler.validate(model.d1())?;
    let rng_for = |k: usize, purpose: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
        rng.set_stream(2 * k as u64 + purpose);
        rng
    };
    let anchor = sampler.anchor.as_deref().map(|a| (a, true));
    let results: Vec<(FeasibleSet, Option<SignalVector>, Option<String>)> = match source {
        MeasurementSource::Given(list) => {
            if list.is_empty() {
                return Err(Error::usage("at least one measurement is required"));
            }
            for (id, y) in &list {
                if y.len() != model.d2() {
                    return Err(Error::data(format!(
                        "measurement `{id}` has length {}, expected {}",
                        y.len(),
                        model.d2()
                    )));
                }
            }
            list.into_par_iter()
                .enumerate()
                .map(|(k, (id, y))| {
                    let outcome = run_sampler(model, &y, sampler, &mut rng_for(k, 0), anchor, sampler.n_max);
                    let warning = outcome.warning.map(|w| format!("{id}: {w}"));
                    (
                        FeasibleSet {
                            id,
                            measurement: y,
                            members: outcome.members,
                        },
                        None,
                        warning,
                    )
                })
                .collect()
        }
        MeasurementSource::Generate { count } => {
            if count == 0 {
                return Err(Error::usage("at least one measurement is required"));
            }
            (0..count)
                .into_par_iter()
                .map(|k| -> Result<_> {
                    let mut gen = rng_for(k, 1);
                    let x = model.sample_signal(&mut gen);
                    let e = model.noise().sample(model.d2(), &mut gen);
                    let y = apply(model, &x, &e)?;
                    let outcome = run_sampler(
                        model,
                        &y,
                        sampler,
                        &mut rng_for(k, 0),
                        Some((&x, false)),
                        sampler.n_max - 1,
                    );
                    let truth = SignalVector::new(x)?;
                    let mut members = vec![truth.clone()];
                    members.extend(outcome.members);
                    let id = format!("{k:04}");
                    let warning = outcome.warning.map(|w| format!("{id}: {w}"));
                    Ok((
                        FeasibleSet {
                            id,
                            measurement: y,
                            members,
                        },
                        Some(truth),
                        warning,
                    ))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut entries = Vec::with_capacity(results.len());
    let mut truth = Vec::new();
    let mut warnings = Vec::new();
    for (set, t, w) in results {
        entries.push(set);
        truth.extend(t);
        warnings.extend(w);
    }
    let ground_truth = (!truth.is_empty()).then_some(truth);
    let collection = FeasibleSetCollection::new(model.d1(), model.d2(), entries)?;
    let dataset = dataset_from_collection(&collection);
    Ok(BuildOutput {
        collection,
        dataset,
        ground_truth,
        warnings,
    })
}

/// Truncates every set to its first `n` members.
pub fn enforce_uniform(c: &FeasibleSetCollection, n: usize) -> Result<FeasibleSetCollection> {
    if n == 0 {
        return Err(Error::usage("uniform set size must be positive"));
    }
    if let Some((k, e)) = c.entries().iter().enumerate().find(|(_, e)| e.members.len() < n) {
        return Err(Error::data(format!(
            "feasible set {} (`{}`) has only {} members, fewer than {n}",
            k + 1,
            e.id,
            e.members.len()
        )));
    }
    let entries = c
        .entries()
        .iter()
        .map(|e| FeasibleSet {
            members: e.members[..n].to_vec(),
            ..e.clone()
        })
        .collect();
    FeasibleSetCollection::new(c.d1(), c.d2(), entries)
}
