//! Signal and measurement vectors, feasible-set collections and paired datasets.

use std::collections::BTreeMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::norm::{root_p, NormSpec};
use crate::summation::KahanSum;

macro_rules! finite_vector {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Result<Self> {
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::data(format!(
                        concat!($what, " has non-finite entry {} at index {}"),
                        values[i], i
                    )));
                }
                Ok(Self(values))
            }

            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;

            fn try_from(v: Vec<f64>) -> Result<Self> {
                Self::new(v)
            }
        }

        impl From<$name> for Vec<f64> {
            fn from(v: $name) -> Vec<f64> {
                v.0
            }
        }
    };
}

finite_vector!(
    /// A point of signal space (length `d1`, finite entries).
    SignalVector,
    "signal"
);
finite_vector!(
    /// A point of measurement space (length `d2`, finite entries).
    MeasurementVector,
    "measurement"
);

/// Predictions of an approximate inverse map, one per measurement id.
pub type Predictions = BTreeMap<String, SignalVector>;

/// One measurement together with the sampled members of its feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    pub id: String,
    pub measurement: MeasurementVector,
    pub members: Vec<SignalVector>,
}

/// The `K` feasible sets produced by the feasible-set sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSetCollection {
    d1: usize,
    d2: usize,
    entries: Vec<FeasibleSet>,
}

impl FeasibleSetCollection {
    pub fn new(d1: usize, d2: usize, entries: Vec<FeasibleSet>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::data("a collection needs at least one measurement"));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::data(format!("duplicate measurement id `{}`", e.id)));
            }
            if e.measurement.len() != d2 {
                return Err(Error::data(format!(
                    "measurement `{}` has length {}, expected d2 = {d2}",
                    e.id,
                    e.measurement.len()
                )));
            }
            if let Some(m) = e.members.iter().find(|m| m.len() != d1) {
                return Err(Error::data(format!(
                    "feasible set `{}` has a member of length {}, expected d1 = {d1}",
                    e.id,
                    m.len()
                )));
            }
        }
        Ok(Self { d1, d2, entries })
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn entries(&self) -> &[FeasibleSet] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<FeasibleSet> {
        self.entries
    }

    /// Number of measurements `K`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `N(k)` for every set.
    pub fn counts(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.members.len()).collect()
    }

    /// True iff every set has the same number of members.
    pub fn is_uniform(&self) -> bool {
        let first = self.entries[0].members.len();
        self.entries.iter().all(|e| e.members.len() == first)
    }

    pub fn total_members(&self) -> usize {
        self.entries.iter().map(|e| e.members.len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }
}

/// One `(x, y)` record of a paired dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub x: SignalVector,
    pub y: MeasurementVector,
    /// Index into [`PairedDataset::ids`].
    pub group: usize,
}

/// Flat list of `(x_m, y_m)` pairs grouped by measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    ids: Vec<String>,
    pairs: Vec<Pair>,
}

impl PairedDataset {
    /// Builds a dataset; all pairs of a group must share their measurement.
    pub fn new(ids: Vec<String>, pairs: Vec<Pair>) -> Result<Self> {
        let mut first: Vec<Option<usize>> = vec![None; ids.len()];
        for (m, pair) in pairs.iter().enumerate() {
            let Some(slot) = first.get_mut(pair.group) else {
                return Err(Error::data(format!(
                    "pair {m} refers to group {} but only {} ids exist",
                    pair.group,
                    ids.len()
                )));
            };
            match *slot {
                None => *slot = Some(m),
                Some(f) if pairs[f].y != pair.y => {
                    return Err(Error::data(format!(
                        "pairs {f} and {m} share id `{}` but differ in measurement",
                        ids[pair.group]
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(Self { ids, pairs })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    /// Number of pairs `M`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn id_of(&self, pair: &Pair) -> &str {
        &self.ids[pair.group]
    }

    /// Regroups the pairs into a collection of feasible sets, in group order.
    ///
    /// Groups without pairs are dropped because their measurement is unknown.
    pub fn to_collection(&self) -> Result<FeasibleSetCollection> {
        let mut sets: Vec<Option<FeasibleSet>> = vec![None; self.ids.len()];
        for pair in &self.pairs {
            let set = sets[pair.group].get_or_insert_with(|| FeasibleSet {
                id: self.ids[pair.group].clone(),
                measurement: pair.y.clone(),
                members: Vec::new(),
            });
            set.members.push(pair.x.clone());
        }
        let entries: Vec<_> = sets.into_iter().flatten().collect();
        let d1 = self.pairs.first().map_or(0, |p| p.x.len());
        let d2 = self.pairs.first().map_or(0, |p| p.y.len());
        FeasibleSetCollection::new(d1, d2, entries)
    }
}

/// Flattens a collection into its paired dataset, `k`-major then member order.
pub fn dataset_from_collection(c: &FeasibleSetCollection) -> PairedDataset {
    let ids = c.entries.iter().map(|e| e.id.clone()).collect();
    let pairs = c
        .entries
        .iter()
        .enumerate()
        .flat_map(|(k, e)| {
            e.members.iter().map(move |x| Pair {
                x: x.clone(),
                y: e.measurement.clone(),
                group: k,
            })
        })
        .collect();
    PairedDataset { ids, pairs }
}

/// Empirical reconstruction loss `((1/M) Σ ‖x_m − φ(y_m)‖^p)^{1/p}`.
pub fn loss(dataset: &PairedDataset, predictions: &Predictions, norm: &NormSpec) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::data("loss of an empty dataset is undefined"));
    }
    let resolved = resolve_predictions(dataset, predictions)?;
    let mut acc = KahanSum::new();
    for pair in &dataset.pairs {
        let pred = resolved[pair.group].expect("resolved above");
        check_len("prediction", pair.x.len(), pred.len())?;
        norm.check_dim(pair.x.len())?;
        acc.add(norm.dist_pow_raw(&pair.x, pred));
    }
    Ok(root_p(acc.value() / dataset.len() as f64, norm.p()))
}

/// Looks up one prediction per group that actually has pairs.
pub(crate) fn resolve_predictions<'a>(
    dataset: &PairedDataset,
    predictions: &'a Predictions,
) -> Result<Vec<Option<&'a SignalVector>>> {
    let mut out = vec![None; dataset.ids.len()];
    for pair in &dataset.pairs {
        if out[pair.group].is_none() {
            let id = &dataset.ids[pair.group];
            let pred = predictions
                .get(id)
                .ok_or_else(|| Error::data(format!("missing prediction for measurement `{id}`")))?;
            out[pair.group] = Some(pred);
        }
    }
    Ok(out)
}
