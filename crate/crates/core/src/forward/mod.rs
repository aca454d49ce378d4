//! Forward models `F: M1 × E → M2` with bounded noise and closed-form
//! feasibility tests.

mod downsample;
pub mod microscopy;
pub mod resample;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use downsample::{DownsampleSpec, Upscaler};
pub use microscopy::MicroscopySpec;

use crate::dataset::MeasurementVector;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `G(x) + e`
    Additive,
    /// `G(x) ⊙ e`
    Multiplicative,
    /// `G(x) ⊙ (1 + e₁) + e₂`
    Mixed,
}

/// Shape of the noise balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseBall {
    /// Componentwise bounds `|e_i| ≤ ε`.
    #[default]
    Inf,
    /// Euclidean ball `‖e‖₂ ≤ ε`.
    L2,
}

/// The bounded noise set `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNoise", into = "RawNoise")]
pub struct NoiseSpec {
    kind: NoiseKind,
    eps_additive: f64,
    eps_multiplicative: f64,
    ball: NoiseBall,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    kind: NoiseKind,
    #[serde(default)]
    eps_additive: f64,
    #[serde(default)]
    eps_multiplicative: f64,
    #[serde(default)]
    ball: NoiseBall,
}

impl TryFrom<RawNoise> for NoiseSpec {
    type Error = Error;

    fn try_from(r: RawNoise) -> Result<Self> {
        let spec = NoiseSpec {
            kind: r.kind,
            eps_additive: r.eps_additive,
            eps_multiplicative: r.eps_multiplicative,
            ball: r.ball,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<NoiseSpec> for RawNoise {
    fn from(n: NoiseSpec) -> Self {
        RawNoise {
            kind: n.kind,
            eps_additive: n.eps_additive,
            eps_multiplicative: n.eps_multiplicative,
            ball: n.ball,
        }
    }
}

impl NoiseSpec {
    pub fn additive(eps: f64) -> Result<Self> {
        Self::new(NoiseKind::Additive, eps, 0.0, NoiseBall::Inf)
    }

    pub fn multiplicative(eps: f64) -> Result<Self> {
        Self::new(NoiseKind::Multiplicative, 0.0, eps, NoiseBall::Inf)
    }

    pub fn mixed(eps_multiplicative: f64, eps_additive: f64) -> Result<Self> {
        Self::new(NoiseKind::Mixed, eps_additive, eps_multiplicative, NoiseBall::Inf)
    }

    pub fn new(kind: NoiseKind, eps_additive: f64, eps_multiplicative: f64, ball: NoiseBall) -> Result<Self> {
        let s = Self {
            kind,
            eps_additive,
            eps_multiplicative,
            ball,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_additive", self.eps_additive),
            ("eps_multiplicative", self.eps_multiplicative),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::usage(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        match self.kind {
            NoiseKind::Additive if self.eps_multiplicative != 0.0 => {
                Err(Error::usage("additive noise must have eps_multiplicative = 0"))
            }
            NoiseKind::Multiplicative if self.eps_additive != 0.0 => {
                Err(Error::usage("multiplicative noise must have eps_additive = 0"))
            }
            NoiseKind::Mixed if self.ball == NoiseBall::L2 => Err(Error::Unsupported(
                "mixed noise has no closed-form feasibility test for l2 balls".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn eps_additive(&self) -> f64 {
        self.eps_additive
    }

    pub fn eps_multiplicative(&self) -> f64 {
        self.eps_multiplicative
    }

    pub fn ball(&self) -> NoiseBall {
        self.ball
    }

    /// Dimension `d3` of a noise vector for measurements of length `d2`.
    pub fn dim(&self, d2: usize) -> usize {
        match self.kind {
            NoiseKind::Mixed => 2 * d2,
            _ => d2,
        }
    }

    /// Whether `e` lies in `E`.
    pub fn contains(&self, e: &[f64]) -> bool {
        match self.kind {
            NoiseKind::Additive => in_ball(e, self.eps_additive, self.ball),
            NoiseKind::Multiplicative => in_ball(e, self.eps_multiplicative, self.ball),
            NoiseKind::Mixed => {
                let (e1, e2) = e.split_at(e.len() / 2);
                in_ball(e1, self.eps_multiplicative, self.ball) && in_ball(e2, self.eps_additive, self.ball)
            }
        }
    }

    /// Whether `y − g` lies in an additive noise set, up to rounding.
    pub(crate) fn admits_additive(&self, g: &[f64], y: &[f64]) -> bool {
        match self.ball {
            NoiseBall::Inf => g.iter().zip(y).all(|(g, y)| {
                (y - g).abs() <= self.eps_additive + rounding_slack(y.abs() + g.abs())
            }),
            NoiseBall::L2 => {
                let r: f64 = g.iter().zip(y).map(|(g, y)| (y - g) * (y - g)).sum::<f64>().sqrt();
                let scale: f64 = g.iter().zip(y).map(|(g, y)| g.abs() + y.abs()).fold(0.0, f64::max);
                r <= self.eps_additive + rounding_slack(scale * (g.len() as f64).sqrt())
            }
        }
    }

    /// Draws a noise vector uniformly from `E`.
    pub fn sample<R: Rng + ?Sized>(&self, d2: usize, rng: &mut R) -> Vec<f64> {
        match self.kind {
            NoiseKind::Additive => sample_ball(d2, self.eps_additive, self.ball, rng),
            NoiseKind::Multiplicative => sample_ball(d2, self.eps_multiplicative, self.ball, rng),
            NoiseKind::Mixed => {
                let mut e = sample_ball(d2, self.eps_multiplicative, self.ball, rng);
                e.extend(sample_ball(d2, self.eps_additive, self.ball, rng));
                e
            }
        }
    }
}

fn in_ball(e: &[f64], eps: f64, ball: NoiseBall) -> bool {
    match ball {
        NoiseBall::Inf => e.iter().all(|v| v.abs() <= eps),
        NoiseBall::L2 => e.iter().map(|v| v * v).sum::<f64>().sqrt() <= eps,
    }
}

fn sample_ball<R: Rng + ?Sized>(n: usize, eps: f64, ball: NoiseBall, rng: &mut R) -> Vec<f64> {
    if eps == 0.0 {
        return vec![0.0; n];
    }
    match ball {
        NoiseBall::Inf => (0..n).map(|_| rng.gen_range(-eps..=eps)).collect(),
        NoiseBall::L2 => {
            // direction from Gaussian coordinates, radius with density ∝ r^{n-1}
            let g: Vec<f64> = (0..n)
                .map(|_| {
                    let u1: f64 = 1.0 - rng.gen::<f64>();
                    let u2: f64 = rng.gen();
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r = eps * rng.gen::<f64>().powf(1.0 / n as f64);
            g.iter().map(|v| v * r / norm).collect()
        }
    }
}

/// The noise-free part `G` of a forward model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForwardOperator {
    /// `G(x) = A·x`, `A` given row by row.
    LinearAdditive {
        #[serde(with = "matrix_rows")]
        matrix: DMatrix<f64>,
    },
    /// Band-wise antialiased bilinear downsampling.
    DownsampleAdditive(DownsampleSpec),
    /// Expected pixel intensities of a single emitter.
    Microscopy(MicroscopySpec),
}

pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        serde::Serialize::serialize(&rows, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::matrix_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Builds a matrix from equally long rows.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n_rows = rows.len();
    let n_cols = rows.first().map_or(0, Vec::len);
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::data("matrix must have at least one row and one column"));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != n_cols) {
        return Err(Error::data(format!("matrix row {r} has {} entries, expected {n_cols}", rows[r].len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::data("matrix entries must be finite"));
    }
    Ok(DMatrix::from_fn(n_rows, n_cols, |i, j| rows[i][j]))
}

/// Block-diagonal linear map `blockdiag(block, …, block)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    pub block: DMatrix<f64>,
    pub blocks: usize,
}

impl LinearOperator {
    pub fn dense(matrix: DMatrix<f64>) -> Self {
        Self { block: matrix, blocks: 1 }
    }

    pub fn d1(&self) -> usize {
        self.block.ncols() * self.blocks
    }

    pub fn d2(&self) -> usize {
        self.block.nrows() * self.blocks
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (r, c) = self.block.shape();
        let mut out = Vec::with_capacity(self.d2());
        for b in 0..self.blocks {
            let xb = &x[b * c..(b + 1) * c];
            for i in 0..r {
                out.push((0..c).map(|j| self.block[(i, j)] * xb[j]).sum());
            }
        }
        out
    }

    /// The full dense matrix (mainly for tests and small problems).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (r, c) = self.block.shape();
        let mut m = DMatrix::zeros(self.d2(), self.d1());
        for b in 0..self.blocks {
            m.view_mut((b * r, b * c), (r, c)).copy_from(&self.block);
        }
        m
    }
}

/// A forward model together with its noise set and signal box `M1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ForwardModelSpec {
    forward: ForwardOperator,
    noise: NoiseSpec,
    signal_bounds: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    forward: ForwardOperator,
    noise: NoiseSpec,
    /// May be omitted for the downsampling model, whose box is `[0, r_max]`.
    #[serde(default)]
    signal_bounds: Option<Vec<[f64; 2]>>,
}

impl TryFrom<RawModel> for ForwardModelSpec {
    type Error = Error;

    fn try_from(r: RawModel) -> Result<Self> {
        let bounds = match (r.signal_bounds, &r.forward) {
            (Some(b), _) => b,
            (None, ForwardOperator::DownsampleAdditive(ds)) => {
                ds.validate()?;
                ds.signal_bounds()
            }
            (None, _) => return Err(Error::usage("model needs `signal_bounds`")),
        };
        ForwardModelSpec::new(r.forward, r.noise, bounds)
    }
}

impl From<ForwardModelSpec> for RawModel {
    fn from(m: ForwardModelSpec) -> Self {
        RawModel {
            forward: m.forward,
            noise: m.noise,
            signal_bounds: Some(m.signal_bounds),
        }
    }
}

/// Slack for the rounding of one addition/multiplication chain in `apply`.
fn rounding_slack(terms: f64) -> f64 {
    8.0 * f64::EPSILON * terms
}

impl ForwardModelSpec {
    pub fn new(forward: ForwardOperator, noise: NoiseSpec, signal_bounds: Vec<[f64; 2]>) -> Result<Self> {
        let d1 = match &forward {
            ForwardOperator::LinearAdditive { matrix } => {
                if matrix.iter().any(|v| !v.is_finite()) {
                    return Err(Error::usage("linear operator must be finite"));
                }
                matrix.ncols()
            }
            ForwardOperator::DownsampleAdditive(ds) => {
                ds.validate()?;
                ds.d1()
            }
            ForwardOperator::Microscopy(m) => {
                m.validate()?;
                microscopy::SIGNAL_DIM
            }
        };
        check_len("signal_bounds", d1, signal_bounds.len())?;
        if let Some(i) = signal_bounds
            .iter()
            .position(|[lo, hi]| !(lo <= hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::usage(format!(
                "signal bound {i} is not a finite interval lo <= hi: {:?}",
                signal_bounds[i]
            )));
        }
        if let ForwardOperator::Microscopy(m) = &forward {
            let [clo, chi] = signal_bounds[3];
            let [hlo, hhi] = signal_bounds[4];
            if clo < 0.0 || chi > m.c_max || hlo < 0.0 || hhi > m.h_max {
                return Err(Error::usage("microscopy bounds for C and h must lie in [0, C_max] and [0, h_max]"));
            }
        }
        Ok(Self {
            forward,
            noise,
            signal_bounds,
        })
    }

    pub fn linear(matrix: DMatrix<f64>, noise: NoiseSpec, signal_bounds: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(ForwardOperator::LinearAdditive { matrix }, noise, signal_bounds)
    }

    pub fn forward(&self) -> &ForwardOperator {
        &self.forward
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn signal_bounds(&self) -> &[[f64; 2]] {
        &self.signal_bounds
    }

    /// Same operator and box with a different noise set.
    pub fn with_noise(&self, noise: NoiseSpec) -> Self {
        Self {
            noise,
            ..self.clone()
        }
    }

    pub fn d1(&self) -> usize {
        self.signal_bounds.len()
    }

    pub fn d2(&self) -> usize {
        match &self.forward {
            ForwardOperator::LinearAdditive { matrix } => matrix.nrows(),
            ForwardOperator::DownsampleAdditive(ds) => ds.d2(),
            ForwardOperator::Microscopy(m) => m.num_pixels(),
        }
    }

    /// Dimension of a noise vector.
    pub fn d3(&self) -> usize {
        self.noise.dim(self.d2())
    }

    pub fn in_bounds(&self, x: &[f64]) -> bool {
        x.len() == self.d1() && x.iter().zip(&self.signal_bounds).all(|(v, [lo, hi])| lo <= v && v <= hi)
    }

    /// The model as an explicit matrix, when `G` is linear.
    pub fn linear_operator(&self) -> Option<LinearOperator> {
        match &self.forward {
            ForwardOperator::LinearAdditive { matrix } => Some(LinearOperator::dense(matrix.clone())),
            ForwardOperator::DownsampleAdditive(ds) => Some(LinearOperator {
                block: ds.band_matrix(),
                blocks: ds.bands,
            }),
            ForwardOperator::Microscopy(_) => None,
        }
    }

    /// Draws a signal uniformly from the signal box.
    pub fn sample_signal<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.signal_bounds
            .iter()
            .map(|&[lo, hi]| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
            .collect()
    }

    pub(crate) fn noiseless_raw(&self, x: &[f64]) -> Vec<f64> {
        match &self.forward {
            ForwardOperator::LinearAdditive { matrix } => {
                (0..matrix.nrows()).map(|i| (0..matrix.ncols()).map(|j| matrix[(i, j)] * x[j]).sum()).collect()
            }
            ForwardOperator::DownsampleAdditive(ds) => ds.apply(x),
            ForwardOperator::Microscopy(m) => m.intensity(x),
        }
    }

    /// Feasibility of `x` for `y` given the noise-free image `g = G(x)`.
    pub(crate) fn feasible_given(&self, g: &[f64], y: &[f64]) -> bool {
        let n = &self.noise;
        match (n.kind, n.ball) {
            (NoiseKind::Additive, _) => n.admits_additive(g, y),
            (NoiseKind::Multiplicative, ball) => {
                let mut sq = 0.0;
                for (g, y) in g.iter().zip(y) {
                    if *g == 0.0 {
                        if *y != 0.0 {
                            return false;
                        }
                        continue;
                    }
                    let ratio = (y / g).abs();
                    match ball {
                        NoiseBall::Inf => {
                            if ratio > n.eps_multiplicative * (1.0 + rounding_slack(2.0)) {
                                return false;
                            }
                        }
                        NoiseBall::L2 => sq += ratio * ratio,
                    }
                }
                ball == NoiseBall::Inf || sq.sqrt() <= n.eps_multiplicative * (1.0 + rounding_slack(2.0))
            }
            (NoiseKind::Mixed, _) => g.iter().zip(y).all(|(g, y)| {
                let bound = g.abs() * n.eps_multiplicative + n.eps_additive;
                (y - g).abs() <= bound + rounding_slack(y.abs() + 2.0 * g.abs() + n.eps_additive)
            }),
        }
    }
}

/// Noise-free measurement `G(x)`.
pub fn noiseless(model: &ForwardModelSpec, x: &[f64]) -> Result<MeasurementVector> {
    check_len("signal", model.d1(), x.len())?;
    MeasurementVector::new(model.noiseless_raw(x))
}

/// Noisy measurement `F(x, e)`; `e` must lie in the noise set.
pub fn apply(model: &ForwardModelSpec, x: &[f64], e: &[f64]) -> Result<MeasurementVector> {
    check_len("signal", model.d1(), x.len())?;
    check_len("noise", model.d3(), e.len())?;
    if !model.noise.contains(e) {
        return Err(Error::data("noise vector lies outside the noise set"));
    }
    let g = model.noiseless_raw(x);
    let y = match model.noise.kind {
        NoiseKind::Additive => g.iter().zip(e).map(|(g, e)| g + e).collect(),
        NoiseKind::Multiplicative => g.iter().zip(e).map(|(g, e)| g * e).collect(),
        NoiseKind::Mixed => {
            let (e1, e2) = e.split_at(g.len());
            g.iter()
                .zip(e1.iter().zip(e2))
                .map(|(g, (a, b))| g * (1.0 + a) + b)
                .collect()
        }
    };
    MeasurementVector::new(y)
}

/// Whether some admissible noise maps `x` onto `y`.
pub fn feasibility(model: &ForwardModelSpec, x: &[f64], y: &[f64]) -> Result<bool> {
    check_len("signal", model.d1(), x.len())?;
    check_len("measurement", model.d2(), y.len())?;
    Ok(model.feasible_given(&model.noiseless_raw(x), y))
}
