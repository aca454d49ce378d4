//! Acceptance gate: every criterion runs at its stated tolerance and prints
//! one PASS/FAIL line. The process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use kersize_core::bounds::{builtin_predictions, kersize, theta_predictions, verify_bounds, BuiltinMap, THETA};
use kersize_core::dataset::{dataset_from_collection, loss, FeasibleSet, FeasibleSetCollection, Pair, PairedDataset, Predictions};
use kersize_core::demo::{run_microscopy, MicroscopyDemo};
use kersize_core::forward::{
    apply, DownsampleSpec, ForwardModelSpec, ForwardOperator, LinearOperator, MicroscopySpec, NoiseSpec, Upscaler,
};
use kersize_core::norm::{InnerExponent, NormSpec};
use kersize_core::sampling::{build_feasible_sets, enforce_uniform, MeasurementSource, SamplerSpec};
use kersize_core::symmetric::{default_svd_tol, kernel_projection, pseudoinverse, skersize, ProjectionMode};
use kersize_core::{MeasurementVector, SignalVector};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RTOL: f64 = 1e-9;

fn le(a: f64, b: f64) -> bool {
    a <= b + RTOL * b.abs().max(1.0)
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- corpus

struct Case {
    microscopy: bool,
    collection: FeasibleSetCollection,
    norm: NormSpec,
}

fn random_linear_model(rng: &mut ChaCha8Rng) -> ForwardModelSpec {
    let d1 = rng.gen_range(2..=8);
    let d2 = rng.gen_range(1..d1);
    let a = DMatrix::from_fn(d2, d1, |_, _| rng.gen_range(-1.0..1.0));
    let eps = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.01..0.3) };
    ForwardModelSpec::linear(a, NoiseSpec::additive(eps).unwrap(), vec![[-1.0, 1.0]; d1]).unwrap()
}

fn random_microscopy_model(rng: &mut ChaCha8Rng) -> ForwardModelSpec {
    let px = rng.gen_range(3..=5);
    let sensor = MicroscopySpec {
        pixels_x: px,
        pixels_y: px,
        pixel_size: 100.0,
        psf_sigma0: rng.gen_range(100.0..160.0),
        psf_z0: 400.0,
        c_max: rng.gen_range(1.0..20.0),
        h_max: rng.gen_range(300.0..3000.0),
        exposure: 1.0,
    };
    let ext = px as f64 * 100.0;
    let mut bounds = sensor.signal_bounds([[0.3 * ext, 0.7 * ext], [0.3 * ext, 0.7 * ext], [-300.0, 300.0]]);
    bounds[4][0] = 0.5 * sensor.h_max;
    ForwardModelSpec::new(
        ForwardOperator::Microscopy(sensor),
        NoiseSpec::mixed(rng.gen_range(0.02..0.1), rng.gen_range(0.5..3.0)).unwrap(),
        bounds,
    )
    .unwrap()
}

/// Uniform collections from random linear and microscopy models, with a
/// random `p ∈ {1, 2}` and inner norm.
fn corpus(count: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let microscopy = i % 3 == 2;
            let model = if microscopy { random_microscopy_model(&mut rng) } else { random_linear_model(&mut rng) };
            let d1 = model.d1();
            let k = rng.gen_range(1..=20);
            let n = rng.gen_range(2..=12);
            let steps: Vec<f64> = model.signal_bounds().iter().map(|[lo, hi]| 0.05 * (hi - lo)).collect();
            let sampler = SamplerSpec::random_walk(steps, n, rng.gen(), 2_000);
            let built = build_feasible_sets(&model, MeasurementSource::Generate { count: k }, &sampler).unwrap();
            let smallest = built.collection.counts().into_iter().min().unwrap();
            let collection = enforce_uniform(&built.collection, smallest).unwrap();
            let p = if rng.gen_bool(0.5) { 1.0 } else { 2.0 };
            let inner = [InnerExponent::One, InnerExponent::Two, InnerExponent::Inf][rng.gen_range(0..3)];
            let norm = if microscopy {
                NormSpec::from_indices(inner, d1, &[0, 1], p).unwrap()
            } else {
                NormSpec::full(inner, d1, p).unwrap()
            };
            Case { microscopy, collection, norm }
        })
        .collect()
}

fn test_maps(c: &FeasibleSetCollection, rng: &mut ChaCha8Rng) -> BTreeMap<String, Predictions> {
    let mut maps = BTreeMap::new();
    maps.insert("median".to_string(), builtin_predictions(c, BuiltinMap::Median));
    maps.insert("zero".to_string(), builtin_predictions(c, BuiltinMap::Zero));
    let scale: Vec<f64> = c.entries()[0].members[0].iter().map(|v| v.abs().max(1.0)).collect();
    let constant =
        SignalVector::new(scale.iter().map(|s| rng.gen_range(-2.0 * s..2.0 * s)).collect()).unwrap();
    maps.insert(
        "random_constant".to_string(),
        c.entries().iter().map(|e| (e.id.clone(), constant.clone())).collect(),
    );
    maps.insert(
        "first_member".to_string(),
        c.entries().iter().map(|e| (e.id.clone(), e.members[0].clone())).collect(),
    );
    maps
}

// ---------------------------------------------------------------- criteria

fn criterion_1(corpus: &[Case]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checks = 0;
    let mut failures = Vec::new();
    for (i, case) in corpus.iter().enumerate() {
        let maps = test_maps(&case.collection, &mut rng);
        let report = verify_bounds(&case.collection, &maps, &case.norm).unwrap();
        let half = report.aggregate.half_kersize;
        for (name, l) in &report.aggregate.losses {
            checks += 1;
            if !le(half, *l) {
                failures.push(format!("case {i} map {name}: half {half} > loss {l}"));
            }
        }
    }
    let linear = corpus.iter().filter(|c| !c.microscopy).count();
    verdict(
        failures.is_empty() && corpus.len() >= 200,
        format!(
            "{} collections ({} linear), {checks} map checks, {} failures{}",
            corpus.len(),
            linear,
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_2(corpus: &[Case]) -> Verdict {
    let mut checked = 0;
    let mut failures = 0;
    for case in corpus {
        let norm = NormSpec::new(InnerExponent::Two, case.norm.mask().to_vec(), 2.0).unwrap();
        let ks = kersize(&case.collection, &norm).unwrap();
        let mean = builtin_predictions(&case.collection, BuiltinMap::Mean);
        let theta = theta_predictions(&case.collection, &norm).unwrap();
        let ds = dataset_from_collection(&case.collection);
        let l = loss(&ds, &mean, &norm).unwrap();
        let lt = loss(&ds, &theta, &norm).unwrap();
        checked += 1;
        if !(le(ks.half(), l) && le(l, ks.kersize) && (l - lt).abs() <= 1e-12 * l.max(1.0)) {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("{checked} collections at p = 2, {failures} failures"))
}

fn naive_kersize(c: &FeasibleSetCollection, mask: &[bool], q: InnerExponent, p: f64) -> f64 {
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        let d = a.iter().zip(b).zip(mask).filter(|(_, m)| **m).map(|((x, y), _)| (x - y).abs());
        match q {
            InnerExponent::One => d.sum(),
            InnerExponent::Two => d.map(|v| v * v).sum::<f64>().sqrt(),
            InnerExponent::Inf => d.fold(0.0, f64::max),
        }
    };
    let mut total = 0.0;
    for e in c.entries() {
        let n = e.members.len();
        if n == 0 {
            continue;
        }
        let mut s = 0.0;
        for a in &e.members {
            for b in &e.members {
                s += dist(a, b).powf(p);
            }
        }
        total += s / (n * n) as f64;
    }
    (total / c.len() as f64).powf(1.0 / p)
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d1 = rng.gen_range(1..=6);
        let k = rng.gen_range(1..=5);
        let sets = (0..k)
            .map(|i| FeasibleSet {
                id: format!("s{i}"),
                measurement: MeasurementVector::new(vec![i as f64]).unwrap(),
                members: (0..rng.gen_range(0..=10))
                    .map(|_| SignalVector::new((0..d1).map(|_| rng.gen_range(-5.0..5.0)).collect()).unwrap())
                    .collect(),
            })
            .collect();
        let c = FeasibleSetCollection::new(d1, 1, sets).unwrap();
        let q = [InnerExponent::One, InnerExponent::Two, InnerExponent::Inf][rng.gen_range(0..3)];
        let p = [1.0, 1.5, 2.0, 3.0][rng.gen_range(0..4)];
        let mut mask: Vec<bool> = (0..d1).map(|_| rng.gen_bool(0.7)).collect();
        mask[0] = true;
        let norm = NormSpec::new(q, mask.clone(), p).unwrap();
        let got = kersize(&c, &norm).unwrap().kersize;
        let want = naive_kersize(&c, &mask, q, p);
        let rel = if want == 0.0 { got.abs() } else { (got - want).abs() / want };
        worst = worst.max(rel);
    }
    verdict(worst <= 1e-12, format!("100 collections, worst relative deviation {worst:.2e}"))
}

struct LinearProblem {
    op: LinearOperator,
    noise: NoiseSpec,
    downsample: Option<DownsampleSpec>,
    dataset: PairedDataset,
}

fn linear_problem(rng: &mut ChaCha8Rng, downsample: bool) -> LinearProblem {
    let (model, spec) = if downsample {
        let spec = DownsampleSpec { bands: 3, height: 16, width: 16, factor: 4, r_max: 1.0 };
        let model = ForwardModelSpec::new(
            ForwardOperator::DownsampleAdditive(spec.clone()),
            NoiseSpec::additive(rng.gen_range(0.0..0.05)).unwrap(),
            spec.signal_bounds(),
        )
        .unwrap();
        (model, Some(spec))
    } else {
        let d1 = rng.gen_range(2..=12);
        let d2 = rng.gen_range(1..=d1);
        let rank = rng.gen_range(0..=d2);
        let b = DMatrix::from_fn(d2, rank, |_, _| rng.gen_range(-1.0..1.0));
        let c = DMatrix::from_fn(rank, d1, |_, _| rng.gen_range(-1.0..1.0));
        let eps = rng.gen_range(0.0..0.2);
        (ForwardModelSpec::linear(b * c, NoiseSpec::additive(eps).unwrap(), vec![[-1.0, 1.0]; d1]).unwrap(), None)
    };
    let m = rng.gen_range(1..=12);
    let mut pairs = Vec::with_capacity(m);
    for k in 0..m {
        let x = model.sample_signal(rng);
        let e = model.noise().sample(model.d2(), rng);
        let y = apply(&model, &x, &e).unwrap();
        pairs.push(Pair { x: SignalVector::new(x).unwrap(), y, group: k });
    }
    let ids = (0..m).map(|k| format!("{k:04}")).collect();
    LinearProblem {
        op: model.linear_operator().unwrap(),
        noise: model.noise().clone(),
        downsample: spec,
        dataset: PairedDataset::new(ids, pairs).unwrap(),
    }
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut failures = Vec::new();
    let mut worst_meas: f64 = 0.0;
    let problems = 120;
    let mut downsampled = 0;
    for i in 0..problems {
        let ds = i % 5 == 0;
        downsampled += ds as usize;
        let prob = linear_problem(&mut rng, ds);
        let d1 = prob.op.d1();
        for p in [1.0, 2.0] {
            let norm = NormSpec::euclidean(d1, p).unwrap();
            let out = skersize(&prob.dataset, &prob.op, &prob.noise, ProjectionMode::SignalOnly, &norm).unwrap();
            let sym = &out.symmetrized;
            let mut maps: Vec<(String, Predictions)> = Vec::new();
            let per_id = |f: &dyn Fn(&Pair) -> Vec<f64>| -> Predictions {
                prob.dataset
                    .pairs()
                    .iter()
                    .map(|pair| (prob.dataset.id_of(pair).to_string(), SignalVector::new(f(pair)).unwrap()))
                    .collect()
            };
            if let Some(spec) = &prob.downsample {
                maps.push(("bilinear".into(), per_id(&|pair| spec.upscale(&pair.y, Upscaler::Bilinear))));
                maps.push(("bicubic".into(), per_id(&|pair| spec.upscale(&pair.y, Upscaler::Bicubic))));
            } else {
                let pinv = pseudoinverse(&prob.op.to_dense(), default_svd_tol(prob.op.d2(), d1));
                maps.push((
                    "pseudoinverse".into(),
                    per_id(&|pair| (&pinv * nalgebra::DVector::from_column_slice(&pair.y)).iter().copied().collect()),
                ));
            }
            maps.push(("zero".into(), per_id(&|_| vec![0.0; d1])));
            let theta_norm = NormSpec::euclidean(d1, 2.0).unwrap();
            let theta = theta_predictions(&sym.to_collection().unwrap(), &theta_norm).unwrap();
            maps.push((THETA.into(), theta));
            for (name, preds) in &maps {
                let l = loss(sym, preds, &norm).unwrap();
                if !le(out.skersize, l) {
                    failures.push(format!("problem {i} p={p} {name}: skersize {} > loss {l}", out.skersize));
                }
                if name == THETA && !le(l, 2.0 * out.skersize) {
                    failures.push(format!("problem {i} p={p}: loss(theta) {l} > 2 skersize"));
                }
            }
            let m = prob.dataset.len();
            for (orig, refl) in prob.dataset.pairs().iter().zip(&sym.pairs()[m..]) {
                let g = prob.op.apply(&orig.x);
                let g2 = prob.op.apply(&refl.x);
                for ((g, g2), y) in g.iter().zip(&g2).zip(orig.y.iter()) {
                    let e = y - g;
                    worst_meas = worst_meas.max((g2 + e - y).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && worst_meas <= 1e-8 && elapsed < Duration::from_secs(120);
    verdict(
        pass,
        format!(
            "{problems} problems ({downsampled} downsampling), {} failures, worst measurement error {worst_meas:.1e}, {:.1}s{}",
            failures.len(),
            elapsed.as_secs_f64(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
    )
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    let mut ranks_seen = std::collections::BTreeSet::new();
    for i in 0..200 {
        let r = rng.gen_range(1..=64);
        let c = rng.gen_range(1..=64);
        let min = r.min(c);
        // sweep ranks 0..=min across the run, including both ends
        let rank = match i % 4 {
            0 => 0,
            1 => min,
            _ => rng.gen_range(0..=min),
        };
        ranks_seen.insert((rank == 0, rank == min));
        let b = DMatrix::from_fn(r, rank, |_, _| rng.gen_range(-1.0..1.0));
        let cm = DMatrix::from_fn(rank, c, |_, _| rng.gen_range(-1.0..1.0));
        let a = b * cm;
        let ap = pseudoinverse(&a, default_svd_tol(r, c));
        let aap = &a * &ap;
        let apa = &ap * &a;
        let errs = [
            max_abs(&(&aap * &a - &a)),
            max_abs(&(&apa * &ap - &ap)),
            max_abs(&(&aap - aap.transpose())),
            max_abs(&(&apa - apa.transpose())),
        ];
        worst = errs.iter().fold(worst, |w, e| w.max(*e));
    }
    verdict(worst <= 1e-8, format!("200 matrices up to 64x64, worst Penrose residual {worst:.2e}"))
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let prob = linear_problem(&mut rng, false);
        let p = if i % 2 == 0 { 1.0 } else { 2.0 };
        let norm = NormSpec::euclidean(prob.op.d1(), p).unwrap();
        let out = skersize(&prob.dataset, &prob.op, &prob.noise, ProjectionMode::SignalOnly, &norm).unwrap();
        let c = out.symmetrized.to_collection().unwrap();
        let ks = kersize(&c, &norm).unwrap().kersize;
        let want = 2f64.powf(1.0 - 1.0 / p) * out.skersize;
        let rel = if want == 0.0 { ks.abs() } else { (ks - want).abs() / want };
        // exactly-zero kernels leave only rounding noise of order 1e-16
        let rel = if want < 1e-12 { (ks - want).abs() } else { rel };
        worst = worst.max(rel);
    }
    verdict(worst <= 1e-10, format!("100 instances, worst relative deviation {worst:.2e}"))
}

fn criterion_7() -> Verdict {
    let a = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
    let op = LinearOperator::dense(a);
    let proj = kernel_projection(&op, ProjectionMode::SignalOnly, None);
    let p_err = max_abs(&(&proj.block - DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5])));
    let ds = PairedDataset::new(
        vec!["y1".into()],
        vec![Pair {
            x: SignalVector::new(vec![1.0, 3.0]).unwrap(),
            y: MeasurementVector::new(vec![2.0]).unwrap(),
            group: 0,
        }],
    )
    .unwrap();
    let norm = NormSpec::euclidean(2, 2.0).unwrap();
    let out = skersize(&ds, &op, &NoiseSpec::additive(0.0).unwrap(), ProjectionMode::SignalOnly, &norm).unwrap();
    let refl = &out.symmetrized.pairs()[1].x;
    let x_err = (refl[0] - 3.0).abs().max((refl[1] - 1.0).abs());
    let sk_err = (out.skersize - 2f64.sqrt()).abs();
    let mean = builtin_predictions(&out.symmetrized.to_collection().unwrap(), BuiltinMap::Mean);
    let l = loss(&out.symmetrized, &mean, &norm).unwrap();
    let attained = (l - out.skersize).abs();
    let pass = p_err <= 1e-10 && x_err <= 1e-10 && sk_err <= 1e-10 && attained <= 1e-10;
    verdict(
        pass,
        format!(
            "P err {p_err:.1e}, x' err {x_err:.1e}, skersize {:.8} (err {sk_err:.1e}), loss(mean) - skersize {attained:.1e}",
            out.skersize
        ),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let cfg = MicroscopyDemo::default();
    let results = run_microscopy(&cfg).unwrap();
    let halves: Vec<f64> = results.iter().map(|r| r.report.aggregate.half_kersize).collect();
    let increasing = halves.windows(2).all(|w| w[0] < w[1]);
    let mut points = 0;
    let mut below_lower = 0;
    let mut est_points = 0;
    let mut est_within = 0;
    for r in &results {
        for m in &r.report.per_measurement {
            for (name, l) in &m.losses {
                let Some(l) = l else { continue };
                points += 1;
                if !le(m.half_kersize_single, *l) {
                    below_lower += 1;
                }
                if name == "mean" || name == "median" {
                    est_points += 1;
                    if le(*l, 2.0 * m.half_kersize_single) {
                        est_within += 1;
                    }
                }
            }
        }
    }
    let frac = est_within as f64 / est_points as f64;
    let elapsed = start.elapsed();
    let sizes_ok = results.iter().all(|r| r.collection.len() == 10 && r.members == 200);
    let pass = increasing && below_lower == 0 && frac >= 0.95 && sizes_ok && elapsed < Duration::from_secs(300);
    let halves_txt: Vec<String> = halves.iter().map(|h| format!("{h:.3}")).collect();
    verdict(
        pass,
        format!(
            "half_kersize per setup [{}], {below_lower}/{points} points below their lower bound, \
             mean/median within per-measurement kersize {est_within}/{est_points}, K=10 N=200, {:.1}s",
            halves_txt.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn min_time(reps: usize, mut f: impl FnMut()) -> Duration {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

fn criterion_9() -> Verdict {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(909);
        let (d1, d2) = (8, 3);
        let a = DMatrix::from_fn(d2, d1, |_, _| rng.gen_range(-1.0..1.0));
        let op = LinearOperator::dense(a);
        let noise = NoiseSpec::additive(0.0).unwrap();
        let norm = NormSpec::euclidean(d1, 2.0).unwrap();
        let dataset = |m: usize, rng: &mut ChaCha8Rng| {
            let pairs: Vec<Pair> = (0..m)
                .map(|k| {
                    let x: Vec<f64> = (0..d1).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let y = MeasurementVector::new(op.apply(&x)).unwrap();
                    Pair { x: SignalVector::new(x).unwrap(), y, group: k }
                })
                .collect();
            PairedDataset::new((0..m).map(|k| format!("{k}")).collect(), pairs).unwrap()
        };
        let small = dataset(2_000, &mut rng);
        let large = dataset(20_000, &mut rng);
        let t_small = min_time(5, || {
            skersize(&small, &op, &noise, ProjectionMode::SignalOnly, &norm).unwrap();
        });
        let t_large = min_time(3, || {
            skersize(&large, &op, &noise, ProjectionMode::SignalOnly, &norm).unwrap();
        });
        let sk_ratio = t_large.as_secs_f64() / t_small.as_secs_f64();

        // 20 sets of 100 members (2 000 in total) against 20 sets of 1 000
        let collection = |n: usize, rng: &mut ChaCha8Rng| {
            let sets = (0..20)
                .map(|k| FeasibleSet {
                    id: format!("{k}"),
                    measurement: MeasurementVector::new(vec![0.0; d2]).unwrap(),
                    members: (0..n)
                        .map(|_| SignalVector::new((0..d1).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
                        .collect(),
                })
                .collect();
            FeasibleSetCollection::new(d1, d2, sets).unwrap()
        };
        let c_small = collection(100, &mut rng);
        let c_large = collection(1_000, &mut rng);
        let k_small = min_time(5, || {
            kersize(&c_small, &norm).unwrap();
        });
        let k_large = min_time(3, || {
            kersize(&c_large, &norm).unwrap();
        });
        let k_ratio = k_large.as_secs_f64() / k_small.as_secs_f64();
        verdict(
            sk_ratio < 15.0 && k_ratio > 40.0,
            format!(
                "skersize 2000 -> 20000 pairs: x{sk_ratio:.1} ({:.1} ms -> {:.1} ms); \
                 kersize 100 -> 1000 members per set: x{k_ratio:.1} ({:.1} ms -> {:.1} ms)",
                t_small.as_secs_f64() * 1e3,
                t_large.as_secs_f64() * 1e3,
                k_small.as_secs_f64() * 1e3,
                k_large.as_secs_f64() * 1e3
            ),
        )
    })
}

fn main() {
    let start = Instant::now();
    let t = Instant::now();
    let corpus = corpus(210, 17);
    let corpus_time = t.elapsed();
    let t = Instant::now();
    let c1 = criterion_1(&corpus);
    let c1_time = t.elapsed() + corpus_time;
    let c1 = Verdict {
        pass: c1.pass && c1_time < Duration::from_secs(60),
        detail: format!("{}, {:.1}s", c1.detail, c1_time.as_secs_f64()),
    };

    let results: Vec<(&str, Verdict)> = vec![
        ("1 lower bound holds for every map on uniform collections", c1),
        ("2 half_kersize <= loss(theta) <= kersize at p = 2", criterion_2(&corpus)),
        ("3 kersize matches the naive triple loop", criterion_3()),
        ("4 symmetric bound on linear additive problems", criterion_4()),
        ("5 pseudoinverse satisfies the Penrose conditions", criterion_5()),
        ("6 kersize = 2^(1-1/p) skersize on two-point sets", criterion_6()),
        ("7 worked averaging example", criterion_7()),
        ("8 microscopy trend across imaging setups", criterion_8()),
        ("9 linear vs quadratic scaling", criterion_9()),
    ];
    let mut failed = 0;
    for (name, v) in &results {
        println!("[{}] criterion {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += (!v.pass) as usize;
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
