//! Moore–Penrose pseudoinverse, kernel projection and the symmetric kernel
//! size of linear models with additive noise.
//!
//! For `F(x, e) = Ax + e` each observed pair `(x_m, y_m)` is mirrored through
//! the kernel of the forward map, `x'_m = x_m − 2 P x_m`, which leaves the
//! measurement unchanged. On the mirrored dataset
//! `SKersize = ((1/M') Σ ‖P x_m‖^p)^{1/p}` lower-bounds the loss of every map
//! and the mean map stays within twice that.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Pair, PairedDataset, SignalVector};
use crate::error::{check_len, Error, Result};
use crate::forward::{LinearOperator, NoiseKind, NoiseSpec};
use crate::norm::{pow_p, root_p, NormSpec};
use crate::summation::KahanSum;

/// Default relative rank cutoff `max(rows, cols) · ε`.
pub fn default_svd_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// `A†` via SVD; singular values at most `tol · σ_max` count as zero.
pub fn pseudoinverse(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    // nalgebra's bidiagonal SVD can return inaccurate factors for
    // rank-deficient input, so the decomposition comes from faer
    let fa = faer::Mat::<f64>::from_fn(r, c, |i, j| a[(i, j)]);
    let Ok(svd) = fa.thin_svd() else {
        return nalgebra_pseudoinverse(a, tol);
    };
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    let sigma_max = if s.nrows() == 0 { 0.0 } else { s[0] };
    let cutoff = tol * sigma_max;
    let kept: Vec<usize> = (0..s.nrows()).filter(|&k| sigma_max > 0.0 && s[k] > cutoff).collect();
    DMatrix::from_fn(c, r, |i, j| kept.iter().map(|&k| v[(i, k)] * u[(j, k)] / s[k]).sum())
}

fn nalgebra_pseudoinverse(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sigma_max = svd.singular_values.max();
    let mut out = DMatrix::zeros(c, r);
    if sigma_max == 0.0 {
        return out;
    }
    let cutoff = tol * sigma_max;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            out.ger(1.0 / s, &v_t.row(i).transpose(), &u.column(i), 1.0);
        }
    }
    out
}

/// Which null space a projector acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Kernel of `A` on signals only.
    #[default]
    SignalOnly,
    /// Kernel of `[A | I]` on signal-noise pairs.
    Joint,
}

impl FromStr for ProjectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signal" | "signal_only" => Ok(ProjectionMode::SignalOnly),
            "joint" => Ok(ProjectionMode::Joint),
            other => Err(Error::usage(format!("mode must be `signal` or `joint`, got `{other}`"))),
        }
    }
}

impl fmt::Display for ProjectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProjectionMode::SignalOnly => "signal_only",
            ProjectionMode::Joint => "joint",
        })
    }
}

/// Orthogonal projector onto the null space of a (block-diagonal) linear map.
///
/// `block` acts on one block's coordinates: `x_b` in signal-only mode and
/// `(x_b, e_b)` in joint mode. The full projector is block-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelProjector {
    pub block: DMatrix<f64>,
    pub source: ProjectionMode,
    pub svd_tol: f64,
    pub blocks: usize,
    block_signal: usize,
    block_noise: usize,
}

/// Builds `I − A†A` or `I − B†B` with `B = [A | I]`, one block at a time.
pub fn kernel_projection(op: &LinearOperator, mode: ProjectionMode, tol: Option<f64>) -> KernelProjector {
    let (r, c) = op.block.shape();
    let b = match mode {
        ProjectionMode::SignalOnly => op.block.clone(),
        ProjectionMode::Joint => {
            let mut b = DMatrix::zeros(r, c + r);
            b.view_mut((0, 0), (r, c)).copy_from(&op.block);
            b.view_mut((0, c), (r, r)).fill_with_identity();
            b
        }
    };
    let tol = tol.unwrap_or_else(|| default_svd_tol(b.nrows(), b.ncols()));
    let n = b.ncols();
    let mut p = DMatrix::identity(n, n) - pseudoinverse(&b, tol) * &b;
    // symmetrize away rounding
    p = (&p + p.transpose()) * 0.5;
    KernelProjector {
        block: p,
        source: mode,
        svd_tol: tol,
        blocks: op.blocks,
        block_signal: c,
        block_noise: if mode == ProjectionMode::Joint { r } else { 0 },
    }
}

impl KernelProjector {
    pub fn d1(&self) -> usize {
        self.block_signal * self.blocks
    }

    /// Noise dimension the projector acts on (0 in signal-only mode).
    pub fn d3(&self) -> usize {
        self.block_noise * self.blocks
    }

    /// The full dense projector.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.block.nrows();
        let mut m = DMatrix::zeros(n * self.blocks, n * self.blocks);
        if self.block_noise == 0 {
            for b in 0..self.blocks {
                m.view_mut((b * n, b * n), (n, n)).copy_from(&self.block);
            }
            return m;
        }
        // joint coordinates are ordered (x, e), so a block mixes two ranges
        let (c, r) = (self.block_signal, self.block_noise);
        let index = |b: usize, i: usize| if i < c { b * c + i } else { self.d1() + b * r + (i - c) };
        for b in 0..self.blocks {
            for i in 0..n {
                for j in 0..n {
                    m[(index(b, i), index(b, j))] = self.block[(i, j)];
                }
            }
        }
        m
    }

    /// `(π₁ P(x, e), π₂ P(x, e))`; the noise part is empty in signal-only mode.
    pub fn project(&self, x: &[f64], e: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("signal", self.d1(), x.len())?;
        let (c, r) = (self.block_signal, self.block_noise);
        if r > 0 {
            check_len("noise", self.d3(), e.len())?;
        }
        let mut px = vec![0.0; x.len()];
        let mut pe = vec![0.0; self.d3()];
        for b in 0..self.blocks {
            let mut z = DVector::zeros(c + r);
            z.rows_mut(0, c).copy_from_slice(&x[b * c..(b + 1) * c]);
            if r > 0 {
                z.rows_mut(c, r).copy_from_slice(&e[b * r..(b + 1) * r]);
            }
            let pz = &self.block * z;
            px[b * c..(b + 1) * c].copy_from_slice(pz.rows(0, c).as_slice());
            if r > 0 {
                pe[b * r..(b + 1) * r].copy_from_slice(pz.rows(c, r).as_slice());
            }
        }
        Ok((px, pe))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    /// The reflected noise left the noise set (joint mode only).
    pub noise_violation: bool,
}

/// `(x, e) − 2P(x, e)`; signal-only mode keeps `e`.
pub fn reflect(x: &[f64], e: &[f64], proj: &KernelProjector, noise: &NoiseSpec) -> Result<Reflection> {
    let (px, pe) = proj.project(x, e)?;
    let x2 = x.iter().zip(&px).map(|(x, p)| x - 2.0 * p).collect();
    if proj.source == ProjectionMode::SignalOnly {
        return Ok(Reflection { x: x2, e: e.to_vec(), noise_violation: false });
    }
    let e2: Vec<f64> = e.iter().zip(&pe).map(|(e, p)| e - 2.0 * p).collect();
    let zeros = vec![0.0; e2.len()];
    let noise_violation = !noise.admits_additive(&zeros, &e2);
    Ok(Reflection { x: x2, e: e2, noise_violation })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkersizeOutput {
    pub skersize: f64,
    /// Input pairs followed by their reflections, in input order.
    pub symmetrized: PairedDataset,
    /// `‖v_m‖` per input pair.
    pub v_norms: Vec<f64>,
    /// Per input pair, whether the reflected noise left the noise set.
    pub noise_violations: Vec<bool>,
}

impl SkersizeOutput {
    /// The reflected signals, in input order.
    pub fn reflections(&self) -> &[Pair] {
        &self.symmetrized.pairs()[self.v_norms.len()..]
    }

    /// Number of reflected signals outside the box `bounds`.
    pub fn out_of_box(&self, bounds: &[[f64; 2]]) -> usize {
        self.reflections()
            .iter()
            .filter(|p| p.x.iter().zip(bounds).any(|(v, [lo, hi])| v < lo || v > hi))
            .count()
    }
}

/// Symmetric kernel size of `pairs` under `F(x, e) = Ax + e`.
pub fn skersize(
    pairs: &PairedDataset,
    op: &LinearOperator,
    noise: &NoiseSpec,
    mode: ProjectionMode,
    norm: &NormSpec,
) -> Result<SkersizeOutput> {
    let proj = kernel_projection(op, mode, None);
    skersize_with(pairs, op, noise, &proj, norm)
}

/// [`skersize`] with a prebuilt projector.
pub fn skersize_with(
    pairs: &PairedDataset,
    op: &LinearOperator,
    noise: &NoiseSpec,
    proj: &KernelProjector,
    norm: &NormSpec,
) -> Result<SkersizeOutput> {
    if noise.kind() != NoiseKind::Additive {
        return Err(Error::Unsupported(format!(
            "symmetric kernel size needs additive noise, got {:?}",
            noise.kind()
        )));
    }
    if pairs.is_empty() {
        return Err(Error::data("symmetric kernel size of an empty dataset is undefined"));
    }
    check_len("projector signal dimension", op.d1(), proj.d1())?;
    norm.check_dim(op.d1())?;

    let results: Vec<(f64, Reflection)> = pairs
        .pairs()
        .par_iter()
        .enumerate()
        .map(|(m, pair)| {
            check_len("signal", op.d1(), pair.x.len())?;
            check_len("measurement", op.d2(), pair.y.len())?;
            let g = op.apply(&pair.x);
            if !noise.admits_additive(&g, &pair.y) {
                return Err(Error::data(format!(
                    "pair {} (measurement `{}`) is infeasible: y − Ax lies outside the noise set",
                    m + 1,
                    pairs.id_of(pair)
                )));
            }
            let e: Vec<f64> = pair.y.iter().zip(&g).map(|(y, g)| y - g).collect();
            let (v, _) = proj.project(&pair.x, &e)?;
            let refl = reflect(&pair.x, &e, proj, noise)?;
            Ok((norm.norm_raw(&v), refl))
        })
        .collect::<Result<_>>()?;

    let acc: KahanSum = results.iter().map(|(v, _)| pow_p(*v, norm.p())).collect();
    let skersize = root_p(acc.value() / results.len() as f64, norm.p());

    let mut all = pairs.pairs().to_vec();
    let mut v_norms = Vec::with_capacity(results.len());
    let mut noise_violations = Vec::with_capacity(results.len());
    for (pair, (v, refl)) in pairs.pairs().iter().zip(results) {
        v_norms.push(v);
        noise_violations.push(refl.noise_violation);
        all.push(Pair {
            x: SignalVector::new(refl.x)?,
            y: pair.y.clone(),
            group: pair.group,
        });
    }
    Ok(SkersizeOutput {
        skersize,
        symmetrized: PairedDataset::new(pairs.ids().to_vec(), all)?,
        v_norms,
        noise_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::MeasurementVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn single_pair(x: &[f64], y: &[f64]) -> PairedDataset {
        PairedDataset::new(
            vec!["a".into()],
            vec![Pair {
                x: SignalVector::new(x.to_vec()).unwrap(),
                y: MeasurementVector::new(y.to_vec()).unwrap(),
                group: 0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn pseudoinverse_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!(max_abs(&(pseudoinverse(&id, 1e-12) - &id)) < 1e-15);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(max_abs(&(pseudoinverse(&a, 1e-12) - DMatrix::from_row_slice(2, 1, &[1.0, 0.0]))) < 1e-15);
        let a = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert!(max_abs(&(pseudoinverse(&a, 1e-12) - DMatrix::from_row_slice(2, 1, &[1.0, 1.0]))) < 1e-14);
        let z = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(pseudoinverse(&z, 1e-12), DMatrix::zeros(3, 2));
    }

    #[test]
    fn pseudoinverse_penrose_conditions_on_rank_deficient_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DMatrix::from_fn(7, 2, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(2, 5, |_, _| rng.gen_range(-1.0..1.0));
        let a = b * c;
        let ap = pseudoinverse(&a, default_svd_tol(7, 5));
        assert!(max_abs(&(&a * &ap * &a - &a)) < 1e-10);
        assert!(max_abs(&(&ap * &a * &ap - &ap)) < 1e-10);
        let aap = &a * &ap;
        let apa = &ap * &a;
        assert!(max_abs(&(&aap - aap.transpose())) < 1e-10);
        assert!(max_abs(&(&apa - apa.transpose())) < 1e-10);
    }

    #[test]
    fn projector_examples() {
        let a = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        let p = kernel_projection(&LinearOperator::dense(a), ProjectionMode::SignalOnly, None);
        let want = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(max_abs(&(&p.block - want)) < 1e-15);

        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let p = kernel_projection(&LinearOperator::dense(a), ProjectionMode::SignalOnly, None);
        assert!(max_abs(&(&p.block - DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]))) < 1e-15);

        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let p = kernel_projection(&LinearOperator::dense(a), ProjectionMode::SignalOnly, None);
        assert!(max_abs(&p.block) < 1e-14);
    }

    #[test]
    fn projector_invariants_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(3, 6, |_, _| rng.gen_range(-1.0..1.0));
        let op = LinearOperator { block: a.clone(), blocks: 2 };
        for mode in [ProjectionMode::SignalOnly, ProjectionMode::Joint] {
            let p = kernel_projection(&op, mode, None).to_dense();
            assert!(max_abs(&(&p - p.transpose())) <= 1e-10);
            assert!(max_abs(&(&p * &p - &p)) <= 1e-8);
            let dense = op.to_dense();
            let f = match mode {
                ProjectionMode::SignalOnly => dense,
                ProjectionMode::Joint => {
                    let mut b = DMatrix::zeros(6, 18);
                    b.view_mut((0, 0), (6, 12)).copy_from(&dense);
                    b.view_mut((0, 12), (6, 6)).fill_with_identity();
                    b
                }
            };
            assert!(max_abs(&(f * &p)) <= 1e-8, "{mode}");
        }
    }

    #[test]
    fn reflection_example_and_involution() {
        let op = LinearOperator::dense(DMatrix::from_row_slice(1, 2, &[0.5, 0.5]));
        let noise = NoiseSpec::additive(0.0).unwrap();
        let proj = kernel_projection(&op, ProjectionMode::SignalOnly, None);
        let (px, _) = proj.project(&[1.0, 3.0], &[0.0]).unwrap();
        assert!((px[0] + 1.0).abs() < 1e-15 && (px[1] - 1.0).abs() < 1e-15);
        let r = reflect(&[1.0, 3.0], &[0.0], &proj, &noise).unwrap();
        assert!((r.x[0] - 3.0).abs() < 1e-14 && (r.x[1] - 1.0).abs() < 1e-14);
        assert!((op.apply(&r.x)[0] - 2.0).abs() < 1e-14);
        let back = reflect(&r.x, &r.e, &proj, &noise).unwrap();
        assert!((back.x[0] - 1.0).abs() < 1e-14 && (back.x[1] - 3.0).abs() < 1e-14);

        let row_space = reflect(&[2.0, 2.0], &[0.0], &proj, &noise).unwrap();
        assert!((row_space.x[0] - 2.0).abs() < 1e-14 && (row_space.x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn joint_reflection_preserves_measurement_and_flags_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let op = LinearOperator::dense(DMatrix::from_fn(2, 4, |_, _| rng.gen_range(-1.0..1.0)));
        let proj = kernel_projection(&op, ProjectionMode::Joint, None);
        let noise = NoiseSpec::additive(0.1).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = vec![0.05, -0.02];
        let r = reflect(&x, &e, &proj, &noise).unwrap();
        let y: Vec<f64> = op.apply(&x).iter().zip(&e).map(|(a, b)| a + b).collect();
        let y2: Vec<f64> = op.apply(&r.x).iter().zip(&r.e).map(|(a, b)| a + b).collect();
        for (a, b) in y.iter().zip(&y2) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = reflect(&r.x, &r.e, &proj, &noise).unwrap();
        for (a, b) in back.x.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
        let tight = NoiseSpec::additive(1e-6).unwrap();
        assert!(reflect(&x, &[1e-6, 0.0], &proj, &tight).unwrap().noise_violation);
    }

    #[test]
    fn skersize_worked_example() {
        let op = LinearOperator::dense(DMatrix::from_row_slice(1, 2, &[0.5, 0.5]));
        let noise = NoiseSpec::additive(0.0).unwrap();
        let norm = NormSpec::euclidean(2, 2.0).unwrap();
        let out = skersize(&single_pair(&[1.0, 3.0], &[2.0]), &op, &noise, ProjectionMode::SignalOnly, &norm).unwrap();
        assert!((out.skersize - 2f64.sqrt()).abs() < 1e-14);
        assert!((out.v_norms[0] - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(out.symmetrized.len(), 2);
        let refl = &out.reflections()[0];
        assert!((refl.x[0] - 3.0).abs() < 1e-14 && (refl.x[1] - 1.0).abs() < 1e-14);
        assert_eq!(refl.y.as_slice(), &[2.0]);
        assert_eq!(refl.group, 0);
        assert_eq!(out.out_of_box(&[[0.0, 2.5], [0.0, 2.5]]), 1);
        assert_eq!(out.out_of_box(&[[0.0, 5.0], [0.0, 5.0]]), 0);
    }

    #[test]
    fn skersize_zero_on_row_space() {
        let op = LinearOperator::dense(DMatrix::from_row_slice(1, 2, &[0.5, 0.5]));
        let noise = NoiseSpec::additive(0.0).unwrap();
        let norm = NormSpec::euclidean(2, 2.0).unwrap();
        let out = skersize(&single_pair(&[4.0, 4.0], &[4.0]), &op, &noise, ProjectionMode::SignalOnly, &norm).unwrap();
        assert!(out.skersize.abs() < 1e-14);
        let p = out.symmetrized.pairs();
        assert!((p[1].x[0] - 4.0).abs() < 1e-14 && (p[1].x[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn skersize_errors() {
        let op = LinearOperator::dense(DMatrix::from_row_slice(1, 2, &[0.5, 0.5]));
        let norm = NormSpec::euclidean(2, 2.0).unwrap();
        let tight = NoiseSpec::additive(0.1).unwrap();
        let err = skersize(&single_pair(&[1.0, 3.0], &[2.5]), &op, &tight, ProjectionMode::SignalOnly, &norm).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("pair 1")), "{err}");
        let mult = NoiseSpec::multiplicative(1.1).unwrap();
        let err = skersize(&single_pair(&[1.0, 3.0], &[2.0]), &op, &mult, ProjectionMode::SignalOnly, &norm).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("signal".parse::<ProjectionMode>().unwrap(), ProjectionMode::SignalOnly);
        assert_eq!("joint".parse::<ProjectionMode>().unwrap(), ProjectionMode::Joint);
        assert!("both".parse::<ProjectionMode>().is_err());
        assert_eq!(ProjectionMode::default().to_string(), "signal_only");
    }
}
