//! Separable 1-D resampling kernels: the antialiased downsampler of the
//! super-resolution forward model and the interpolating upscalers used as
//! reconstruction maps.

/// Taps of one output sample: `(input index, weight)`.
pub type Taps = Vec<(usize, f64)>;

/// Antialiased bilinear (triangle) downsampling weights for one axis.
///
/// Output sample `o` is centred at input coordinate `(o + 0.5)·f − 0.5`; the
/// triangle has half-width `f` input pixels, weights are normalised to sum to
/// one and out-of-range taps are clamped to the edge pixel.
pub fn downsample_taps(n_in: usize, factor: usize) -> Vec<Taps> {
    let f = factor as f64;
    let n_out = n_in / factor;
    (0..n_out)
        .map(|o| {
            let centre = (o as f64 + 0.5) * f - 0.5;
            let lo = (centre - f).floor() as isize;
            let hi = (centre + f).ceil() as isize;
            let mut taps: Taps = Vec::new();
            for i in lo..=hi {
                let w = 1.0 - (i as f64 - centre).abs() / f;
                if w <= 0.0 {
                    continue;
                }
                push_tap(&mut taps, clamp(i, n_in), w);
            }
            normalise(&mut taps);
            taps
        })
        .collect()
}

/// Bilinear upsampling weights (half-pixel centres, edge clamped).
pub fn bilinear_taps(n_in: usize, factor: usize) -> Vec<Taps> {
    let f = factor as f64;
    (0..n_in * factor)
        .map(|o| {
            let src = ((o as f64 + 0.5) / f - 0.5).max(0.0);
            let i0 = src.floor() as isize;
            let t = src - i0 as f64;
            let mut taps = Vec::with_capacity(2);
            push_tap(&mut taps, clamp(i0, n_in), 1.0 - t);
            push_tap(&mut taps, clamp(i0 + 1, n_in), t);
            taps
        })
        .collect()
}

/// Bicubic (Keys, `a = −0.75`) upsampling weights with edge clamping.
pub fn bicubic_taps(n_in: usize, factor: usize) -> Vec<Taps> {
    const A: f64 = -0.75;
    let cubic = |x: f64| {
        let x = x.abs();
        if x <= 1.0 {
            ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
        } else if x < 2.0 {
            ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
        } else {
            0.0
        }
    };
    let f = factor as f64;
    (0..n_in * factor)
        .map(|o| {
            let src = (o as f64 + 0.5) / f - 0.5;
            let i0 = src.floor() as isize;
            let t = src - i0 as f64;
            let mut taps = Vec::with_capacity(4);
            for k in -1..=2isize {
                push_tap(&mut taps, clamp(i0 + k, n_in), cubic(t - k as f64));
            }
            taps
        })
        .collect()
}

fn clamp(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn push_tap(taps: &mut Taps, idx: usize, w: f64) {
    if let Some(t) = taps.iter_mut().find(|t| t.0 == idx) {
        t.1 += w;
    } else {
        taps.push((idx, w));
    }
}

fn normalise(taps: &mut Taps) {
    let total: f64 = taps.iter().map(|t| t.1).sum();
    for t in taps.iter_mut() {
        t.1 /= total;
    }
}

/// Applies row taps and column taps to a `rows × cols` row-major image.
pub fn apply_separable(
    img: &[f64],
    rows: usize,
    cols: usize,
    row_taps: &[Taps],
    col_taps: &[Taps],
) -> Vec<f64> {
    debug_assert_eq!(img.len(), rows * cols);
    let out_cols = col_taps.len();
    let mut tmp = vec![0.0; rows * out_cols];
    for r in 0..rows {
        let src = &img[r * cols..(r + 1) * cols];
        for (c, taps) in col_taps.iter().enumerate() {
            tmp[r * out_cols + c] = taps.iter().map(|&(i, w)| w * src[i]).sum();
        }
    }
    let mut out = vec![0.0; row_taps.len() * out_cols];
    for (r, taps) in row_taps.iter().enumerate() {
        for c in 0..out_cols {
            out[r * out_cols + c] = taps.iter().map(|&(i, w)| w * tmp[i * out_cols + c]).sum();
        }
    }
    out
}

/// Dense matrix of a separable operator on one band (Kronecker product of
/// the row and column weight matrices), rows of the output image major.
pub fn separable_matrix(
    rows: usize,
    cols: usize,
    row_taps: &[Taps],
    col_taps: &[Taps],
) -> nalgebra::DMatrix<f64> {
    let out_cols = col_taps.len();
    let mut m = nalgebra::DMatrix::zeros(row_taps.len() * out_cols, rows * cols);
    for (r, rt) in row_taps.iter().enumerate() {
        for (c, ct) in col_taps.iter().enumerate() {
            for &(i, wi) in rt {
                for &(j, wj) in ct {
                    m[(r * out_cols + c, i * cols + j)] += wi * wj;
                }
            }
        }
    }
    m
}
