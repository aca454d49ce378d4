//! Two end-to-end pipelines on synthetic data: single-emitter localization
//! microscopy and fourfold multi-band image super-resolution.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{builtin_predictions, theta_predictions, verify_bounds, BoundReport, BuiltinMap};
use crate::dataset::{loss, FeasibleSetCollection, Pair, PairedDataset, Predictions, SignalVector};
use crate::error::{Error, Result};
use crate::forward::{apply, DownsampleSpec, ForwardModelSpec, ForwardOperator, MicroscopySpec, NoiseSpec, Upscaler};
use crate::io;
use crate::norm::{InnerExponent, NormSpec};
use crate::sampling::{build_feasible_sets, enforce_uniform, MeasurementSource, SamplerSpec};
use crate::symmetric::{kernel_projection, skersize_with, ProjectionMode};

/// One imaging condition: background flux and emitter photon rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagingSetup {
    pub background: f64,
    pub emission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroscopyDemo {
    /// Measurements per setup.
    pub k: usize,
    /// Feasible-set size.
    pub n: usize,
    pub seed: u64,
    /// Random-walk proposals per measurement.
    pub budget: usize,
    pub setups: Vec<ImagingSetup>,
    /// Gain (multiplicative) noise bound.
    pub eps_gain: f64,
    /// Read-out (additive) noise bound.
    pub eps_read: f64,
}

impl Default for MicroscopyDemo {
    fn default() -> Self {
        Self {
            k: 10,
            n: 200,
            seed: 0,
            budget: 200_000,
            setups: vec![
                ImagingSetup { background: 2.0, emission: 4000.0 },
                ImagingSetup { background: 5.0, emission: 2000.0 },
                ImagingSetup { background: 10.0, emission: 1000.0 },
                ImagingSetup { background: 20.0, emission: 500.0 },
            ],
            eps_gain: 0.05,
            eps_read: 2.0,
        }
    }
}

/// Lateral field of view the emitter is placed in, in nm.
const FIELD: [f64; 2] = [250.0, 550.0];
const DEPTH: [f64; 2] = [-300.0, 300.0];

impl MicroscopyDemo {
    pub fn sensor(&self, setup: ImagingSetup) -> MicroscopySpec {
        MicroscopySpec {
            pixels_x: 8,
            pixels_y: 8,
            pixel_size: 100.0,
            psf_sigma0: 130.0,
            psf_z0: 400.0,
            c_max: setup.background,
            h_max: setup.emission,
            exposure: 1.0,
        }
    }

    /// The model of one setup. The emitter rate is known to within a factor
    /// of two, the background only to be at most `background`.
    pub fn model(&self, setup: ImagingSetup) -> Result<ForwardModelSpec> {
        let sensor = self.sensor(setup);
        let mut bounds = sensor.signal_bounds([FIELD, FIELD, DEPTH]);
        bounds[4][0] = 0.5 * setup.emission;
        ForwardModelSpec::new(
            ForwardOperator::Microscopy(sensor),
            NoiseSpec::mixed(self.eps_gain, self.eps_read)?,
            bounds,
        )
    }

    pub fn sampler(&self, setup: ImagingSetup) -> SamplerSpec {
        let mut s = SamplerSpec::random_walk(
            vec![8.0, 8.0, 30.0, 0.05 * setup.background, 0.02 * setup.emission],
            self.n,
            self.seed,
            self.budget,
        );
        s.thinning = 2;
        s
    }

    /// Norm on the lateral position only.
    pub fn norm() -> NormSpec {
        NormSpec::from_indices(InnerExponent::Two, 5, &[0, 1], 2.0).expect("valid mask")
    }
}

#[derive(Debug, Clone)]
pub struct SetupResult {
    pub setup: ImagingSetup,
    pub collection: FeasibleSetCollection,
    pub report: BoundReport,
    /// Members kept per set after truncating to a common size.
    pub members: usize,
    pub warnings: Vec<String>,
}

/// Samples feasible sets for every setup and evaluates the mean, median
/// and zero maps besides `θ`.
pub fn run_microscopy(cfg: &MicroscopyDemo) -> Result<Vec<SetupResult>> {
    if cfg.k == 0 || cfg.n == 0 || cfg.setups.is_empty() {
        return Err(Error::usage("microscopy demo needs k, n and at least one setup"));
    }
    let norm = MicroscopyDemo::norm();
    cfg.setups
        .iter()
        .map(|&setup| {
            let model = cfg.model(setup)?;
            let built = build_feasible_sets(&model, MeasurementSource::Generate { count: cfg.k }, &cfg.sampler(setup))?;
            let mut warnings = built.warnings;
            let smallest = built.collection.counts().into_iter().min().unwrap_or(0);
            let collection = if smallest < cfg.n {
                warnings.push(format!("feasible sets truncated to {smallest} members"));
                enforce_uniform(&built.collection, smallest.max(1))?
            } else {
                built.collection
            };
            let maps: BTreeMap<String, Predictions> = BuiltinMap::ALL
                .iter()
                .map(|&m| (m.name().to_string(), builtin_predictions(&collection, m)))
                .collect();
            let report = verify_bounds(&collection, &maps, &norm)?;
            Ok(SetupResult {
                setup,
                members: smallest,
                collection,
                report,
                warnings,
            })
        })
        .collect()
}

/// Per-measurement scatter rows: `half_kersize_single` then one loss per map.
pub fn scatter_rows(report: &BoundReport) -> (Vec<String>, Vec<(String, Vec<Option<f64>>)>) {
    let names = report.map_names();
    let mut header = vec!["id".to_string(), "half_kersize_single".to_string()];
    header.extend(names.iter().map(|n| format!("{n}_loss")));
    let rows = report
        .per_measurement
        .iter()
        .map(|m| {
            let mut v = vec![Some(m.half_kersize_single)];
            v.extend(names.iter().map(|n| m.losses.get(n).copied().flatten()));
            (m.id.clone(), v)
        })
        .collect();
    (header, rows)
}

/// Writes `setup<i>/` (collection, `bounds.json`, `scatter.csv`) and a
/// `summary.csv` with one row per setup.
pub fn write_microscopy(dir: &Path, results: &[SetupResult]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let names = results.first().map(|r| r.report.map_names()).unwrap_or_default();
    let mut header: Vec<String> = ["setup", "background", "emission", "members", "kersize", "half_kersize"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(names.iter().map(|n| format!("{n}_loss")));
    header.push("lower_ok".into());
    let mut rows = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let sub = dir.join(format!("setup{}", i + 1));
        io::write_collection(&sub, &r.collection, &r.report.norm)?;
        io::write_json(&sub.join("bounds.json"), &r.report)?;
        let (h, s) = scatter_rows(&r.report);
        io::write_table(&sub.join("scatter.csv"), &h, &s)?;
        let a = &r.report.aggregate;
        let mut v = vec![
            Some(r.setup.background),
            Some(r.setup.emission),
            Some(r.members as f64),
            Some(a.kersize),
            Some(a.half_kersize),
        ];
        v.extend(names.iter().map(|n| a.losses.get(n).copied()));
        v.push(Some(a.inequality_flags.lower_ok as u8 as f64));
        rows.push((format!("{}", i + 1), v));
    }
    io::write_table(&dir.join("summary.csv"), &header, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperresDemo {
    /// Number of images.
    pub images: usize,
    pub bands: usize,
    /// High-resolution side length.
    pub size: usize,
    pub factor: usize,
    /// Additive noise bound.
    pub eps: f64,
    pub seed: u64,
}

impl Default for SuperresDemo {
    fn default() -> Self {
        Self {
            images: 24,
            bands: 3,
            size: 16,
            factor: 4,
            eps: 0.01,
            seed: 0,
        }
    }
}

impl SuperresDemo {
    pub fn spec(&self) -> DownsampleSpec {
        DownsampleSpec {
            bands: self.bands,
            height: self.size,
            width: self.size,
            factor: self.factor,
            r_max: 1.0,
        }
    }

    pub fn model(&self) -> Result<ForwardModelSpec> {
        let spec = self.spec();
        let bounds = spec.signal_bounds();
        ForwardModelSpec::new(ForwardOperator::DownsampleAdditive(spec), NoiseSpec::additive(self.eps)?, bounds)
    }
}

/// A synthetic multi-band scene: a smooth shared structure of a few blobs
/// and a gradient, band-specific gains and fine texture, clipped to `[0, 1]`.
pub fn synthetic_image(spec: &DownsampleSpec, rng: &mut impl Rng) -> Vec<f64> {
    let (h, w) = (spec.height as f64, spec.width as f64);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(0.0..h),
                rng.gen_range(0.0..w),
                rng.gen_range(1.5..4.0),
                rng.gen_range(-0.3..0.4),
            )
        })
        .collect();
    let (gx, gy) = (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
    let mut out = Vec::with_capacity(spec.d1());
    for _ in 0..spec.bands {
        let gain = rng.gen_range(0.7..1.3);
        let offset = rng.gen_range(0.25..0.45);
        let texture = rng.gen_range(0.03..0.12);
        for r in 0..spec.height {
            for c in 0..spec.width {
                let (y, x) = (r as f64, c as f64);
                let mut v = offset + gx * (x / w - 0.5) + gy * (y / h - 0.5);
                for &(by, bx, s, a) in &blobs {
                    let d2 = ((y - by).powi(2) + (x - bx).powi(2)) / (2.0 * s * s);
                    v += a * (-d2).exp();
                }
                v = gain * v + texture * rng.gen_range(-1.0..1.0);
                out.push(v.clamp(0.0, spec.r_max));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapLoss {
    pub name: String,
    /// Loss on the original pairs.
    pub input: f64,
    /// Loss on the symmetrized dataset.
    pub symmetrized: f64,
    /// `skersize ≤ loss`.
    pub lower_ok: bool,
    /// `loss ≤ 2·skersize`.
    pub within_upper: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperresReport {
    pub images: usize,
    pub skersize: f64,
    pub upper: f64,
    pub maps: Vec<MapLoss>,
    /// Reflected images with a pixel outside `[0, r_max]`.
    pub out_of_box: usize,
    /// Largest `|A x' + e − y|` over the reflected pairs.
    pub max_measurement_error: f64,
    pub v_norms: Vec<f64>,
    /// Per image: `‖v_m‖` followed by the per-map loss on `{x_m, x'_m}`.
    pub per_image: Vec<(String, Vec<f64>)>,
}

impl SuperresReport {
    /// The guaranteed part: every map above the bound, `θ` within twice it.
    pub fn bounds_hold(&self) -> bool {
        self.maps.iter().all(|m| m.lower_ok)
            && self.maps.iter().filter(|m| m.name == crate::bounds::THETA).all(|m| m.within_upper)
    }
}

#[derive(Debug, Clone)]
pub struct SuperresResult {
    pub report: SuperresReport,
    pub dataset: PairedDataset,
    pub symmetrized: PairedDataset,
}

/// Generates images, measures them, symmetrizes through the kernel of the
/// downsampling and scores the upscalers, the zero map and `θ`.
pub fn run_superres(cfg: &SuperresDemo) -> Result<SuperresResult> {
    if cfg.images == 0 {
        return Err(Error::usage("superres demo needs at least one image"));
    }
    let model = cfg.model()?;
    let spec = cfg.spec();
    let mut pairs = Vec::with_capacity(cfg.images);
    let mut ids = Vec::with_capacity(cfg.images);
    for k in 0..cfg.images {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let x = synthetic_image(&spec, &mut rng);
        let e = model.noise().sample(model.d2(), &mut rng);
        let y = apply(&model, &x, &e)?;
        ids.push(format!("{k:04}"));
        pairs.push(Pair { x: SignalVector::new(x)?, y, group: k });
    }
    let dataset = PairedDataset::new(ids.clone(), pairs)?;
    let op = model.linear_operator().expect("downsampling is linear");
    let norm = NormSpec::euclidean(model.d1(), 2.0)?;
    let proj = kernel_projection(&op, ProjectionMode::SignalOnly, None);
    let out = skersize_with(&dataset, &op, model.noise(), &proj, &norm)?;
    let sym = out.symmetrized.clone();

    let mut maps: Vec<(String, Predictions)> = Vec::new();
    for up in [Upscaler::Bilinear, Upscaler::Bicubic] {
        let preds = dataset
            .pairs()
            .iter()
            .map(|p| Ok((dataset.id_of(p).to_string(), SignalVector::new(spec.upscale(&p.y, up))?)))
            .collect::<Result<Predictions>>()?;
        maps.push((up.name().to_string(), preds));
    }
    maps.push((
        "zero".to_string(),
        ids.iter().map(|id| (id.clone(), SignalVector::zeros(model.d1()))).collect(),
    ));
    maps.push((crate::bounds::THETA.to_string(), theta_predictions(&sym.to_collection()?, &norm)?));

    let upper = 2.0 * out.skersize;
    let map_losses = maps
        .iter()
        .map(|(name, preds)| {
            let symmetrized = loss(&sym, preds, &norm)?;
            Ok(MapLoss {
                name: name.clone(),
                input: loss(&dataset, preds, &norm)?,
                symmetrized,
                lower_ok: crate::bounds::le_tol(out.skersize, symmetrized),
                within_upper: crate::bounds::le_tol(symmetrized, upper),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let m = dataset.len();
    let mut max_err: f64 = 0.0;
    for (orig, refl) in dataset.pairs().iter().zip(&sym.pairs()[m..]) {
        let e: Vec<f64> = orig.y.iter().zip(op.apply(&orig.x)).map(|(y, g)| y - g).collect();
        for ((g, e), y) in op.apply(&refl.x).iter().zip(&e).zip(refl.y.iter()) {
            max_err = max_err.max((g + e - y).abs());
        }
    }
    let per_image = dataset
        .pairs()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let refl = &sym.pairs()[m + i];
            let mut row = vec![out.v_norms[i]];
            for (_, preds) in &maps {
                let z = &preds[dataset.id_of(p)];
                let d = norm_sq(&p.x, z) + norm_sq(&refl.x, z);
                row.push((0.5 * d).sqrt());
            }
            (dataset.id_of(p).to_string(), row)
        })
        .collect();

    let report = SuperresReport {
        images: m,
        skersize: out.skersize,
        upper,
        maps: map_losses,
        out_of_box: out.out_of_box(model.signal_bounds()),
        max_measurement_error: max_err,
        v_norms: out.v_norms.clone(),
        per_image,
    };
    Ok(SuperresResult {
        report,
        dataset,
        symmetrized: sym,
    })
}

fn norm_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Writes `table2.csv`, `scatter.csv`, `v_norms.csv`, `report.json` and the
/// symmetrized collection under `symmetrized/`.
pub fn write_superres(dir: &Path, result: &SuperresResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let r = &result.report;
    let header: Vec<String> = ["method", "rmse_input", "rmse_symmetrized", "skersize", "upper_bound", "within_bounds"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<(String, Vec<Option<f64>>)> = r
        .maps
        .iter()
        .map(|m| {
            (
                m.name.clone(),
                vec![
                    Some(m.input),
                    Some(m.symmetrized),
                    Some(r.skersize),
                    Some(r.upper),
                    Some((m.lower_ok && m.within_upper) as u8 as f64),
                ],
            )
        })
        .collect();
    io::write_table(&dir.join("table2.csv"), &header, &rows)?;

    let mut header = vec!["id".to_string(), "skersize_single".to_string()];
    header.extend(r.maps.iter().map(|m| format!("{}_loss", m.name)));
    let rows: Vec<(String, Vec<Option<f64>>)> = r
        .per_image
        .iter()
        .map(|(id, v)| (id.clone(), v.iter().map(|x| Some(*x)).collect()))
        .collect();
    io::write_table(&dir.join("scatter.csv"), &header, &rows)?;

    let ids: Vec<&str> = result.dataset.ids().iter().map(String::as_str).collect();
    io::write_v_norms(&dir.join("v_norms.csv"), &ids, &r.v_norms)?;
    io::write_json(&dir.join("report.json"), r)?;
    let norm = NormSpec::euclidean(result.dataset.pairs()[0].x.len(), 2.0)?;
    io::write_collection(&dir.join("symmetrized"), &result.symmetrized.to_collection()?, &norm)
}
