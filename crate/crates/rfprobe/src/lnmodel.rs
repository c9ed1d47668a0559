//! The linear–nonlinear cascade: filter bank → per-channel signals →
//! static nonlinearities → channel pooling → affine output, fitted by
//! ridge-stabilized least squares and scored by Pearson correlation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::revcorr::SubFilterBank;
use crate::tensor::ImageTensor;

/// Static nonlinearity applied to a filter's per-channel signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// Used for the AWA filter.
    Identity,
    /// Full-wave rectification, used for AWC eigenvector filters.
    FullWave,
}

impl Nonlinearity {
    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Identity => "identity",
            Nonlinearity::FullWave => "fullwave",
        }
    }
}

/// How full-wave rectification is realized: |x| (default) or x².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rectifier {
    Abs,
    Square,
}

impl Rectifier {
    pub fn name(&self) -> &'static str {
        match self {
            Rectifier::Abs => "abs",
            Rectifier::Square => "square",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "abs" => Ok(Rectifier::Abs),
            "square" => Ok(Rectifier::Square),
            other => Err(Error::Config(format!("unknown rectifier {other:?}"))),
        }
    }

    fn apply(&self, x: f64) -> f64 {
        match self {
            Rectifier::Abs => x.abs(),
            Rectifier::Square => x * x,
        }
    }
}

/// One cascade filter: values, its nonlinearity tag, and an id used in
/// fit exports.
#[derive(Debug, Clone)]
pub struct LnFilter {
    pub id: String,
    pub values: ImageTensor,
    pub nonlinearity: Nonlinearity,
}

/// The full 20-filter cascade bank: AWA (identity) + excitatory +
/// suppressive eigenvectors (full-wave).
pub fn bank_filters(bank: &SubFilterBank) -> Vec<LnFilter> {
    let mut out = Vec::with_capacity(1 + bank.excitatory.len() + bank.suppressive.len());
    out.push(LnFilter {
        id: "awa".into(),
        values: bank.awa.values.clone(),
        nonlinearity: Nonlinearity::Identity,
    });
    for (i, (values, _)) in bank.excitatory.iter().enumerate() {
        out.push(LnFilter {
            id: format!("exc{:02}", i + 1),
            values: values.clone(),
            nonlinearity: Nonlinearity::FullWave,
        });
    }
    for (i, (values, _)) in bank.suppressive.iter().enumerate() {
        out.push(LnFilter {
            id: format!("sup{:02}", i + 1),
            values: values.clone(),
            nonlinearity: Nonlinearity::FullWave,
        });
    }
    out
}

/// The degenerate comparison model: AWA filter only.
pub fn awa_only_filters(bank: &SubFilterBank) -> Vec<LnFilter> {
    vec![LnFilter {
        id: "awa".into(),
        values: bank.awa.values.clone(),
        nonlinearity: Nonlinearity::Identity,
    }]
}

/// A bank of unit-norm Gaussian random filters with the same shape and
/// counts as a real bank: 1 identity slot + `n_fullwave` rectified slots.
/// The null baseline for chance-level comparisons.
pub fn chance_filters(
    shape: (usize, usize, usize),
    n_fullwave: usize,
    seed: u64,
) -> Vec<LnFilter> {
    let (h, w, c) = shape;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut random_filter = |id: String, nonlinearity| {
        let mut values: Vec<f64> =
            (0..h * w * c).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut values {
            *v /= norm;
        }
        LnFilter { id, values: ImageTensor::new(h, w, c, values).unwrap(), nonlinearity }
    };
    let mut out = vec![random_filter("rand-awa".into(), Nonlinearity::Identity)];
    for i in 0..n_fullwave {
        out.push(random_filter(format!("rand{:02}", i + 1), Nonlinearity::FullWave));
    }
    out
}

/// Per-filter, per-channel inner products between the bank and a stimulus:
/// `signals[m][c] = ⟨filter m channel c, stimulus channel c⟩`.
pub fn signals(filters: &[LnFilter], stimulus: &ImageTensor) -> Result<Vec<Vec<f64>>> {
    filters
        .iter()
        .map(|f| {
            if f.values.shape() != stimulus.shape() {
                return Err(Error::Shape(format!(
                    "filter {} shape {:?} != stimulus {:?}",
                    f.id,
                    f.values.shape(),
                    stimulus.shape()
                )));
            }
            let c = stimulus.channels();
            let mut per_channel = vec![0.0f64; c];
            let fv = f.values.values();
            let sv = stimulus.values();
            for (i, (a, b)) in fv.iter().zip(sv).enumerate() {
                per_channel[i % c] += a * b;
            }
            Ok(per_channel)
        })
        .collect()
}

/// Design matrix for the cascade: rows are stimuli, column 0 is the
/// intercept, one further column per filter holding the channel-summed
/// transformed signal.
#[derive(Debug, Clone)]
pub struct RegressorMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
    pub tags: Vec<Nonlinearity>,
}

impl RegressorMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

fn regressor_row(filters: &[LnFilter], stimulus: &ImageTensor, rect: Rectifier) -> Result<Vec<f64>> {
    let sig = signals(filters, stimulus)?;
    let mut row = Vec::with_capacity(filters.len() + 1);
    row.push(1.0);
    for (f, per_channel) in filters.iter().zip(sig) {
        let transformed: f64 = match f.nonlinearity {
            Nonlinearity::Identity => per_channel.iter().sum(),
            Nonlinearity::FullWave => per_channel.iter().map(|&x| rect.apply(x)).sum(),
        };
        row.push(transformed);
    }
    Ok(row)
}

/// Builds the design matrix over a stimulus list.
pub fn build_regressors(
    filters: &[LnFilter],
    stimuli: &[ImageTensor],
    rect: Rectifier,
) -> Result<RegressorMatrix> {
    let cols = filters.len() + 1;
    let mut data = Vec::with_capacity(stimuli.len() * cols);
    for stim in stimuli {
        data.extend(regressor_row(filters, stim, rect)?);
    }
    Ok(RegressorMatrix {
        rows: stimuli.len(),
        cols,
        data,
        tags: filters.iter().map(|f| f.nonlinearity).collect(),
    })
}

/// A fitted cascade: baseline, one signed weight per filter, nonlinearity
/// tags, and training diagnostics.
#[derive(Debug, Clone)]
pub struct LnFit {
    pub alpha: f64,
    pub weights: Vec<f64>,
    pub tags: Vec<Nonlinearity>,
    pub residual_norm: f64,
    pub condition_estimate: f64,
}

impl LnFit {
    /// Paper-style effective gains: positive-side and negative-side weight
    /// mass over the filter weights.
    pub fn effective_gains(&self) -> (f64, f64) {
        let beta = self.weights.iter().filter(|w| **w > 0.0).sum::<f64>();
        let gamma = -self.weights.iter().filter(|w| **w < 0.0).sum::<f64>();
        (beta, gamma)
    }
}

/// Ordinary least squares on the normal equations with Tikhonov ridge
/// `1e-8·trace(XᵀX)/cols` on the diagonal.
pub fn fit_ln(x: &RegressorMatrix, responses: &[f64]) -> Result<LnFit> {
    if responses.len() != x.rows {
        return Err(Error::Shape(format!(
            "{} responses for {} regressor rows",
            responses.len(),
            x.rows
        )));
    }
    if x.rows < x.cols {
        return Err(Error::Fit {
            reason: format!("{} rows < {} columns", x.rows, x.cols),
            condition: f64::INFINITY,
        });
    }
    if !responses.iter().all(|r| r.is_finite()) {
        return Err(Error::Shape("non-finite response".into()));
    }
    let n = x.cols;
    // gram = XᵀX, rhs = XᵀR
    let mut gram = vec![0.0f64; n * n];
    let mut rhs = vec![0.0f64; n];
    for r in 0..x.rows {
        let row = x.row(r);
        for i in 0..n {
            rhs[i] += row[i] * responses[r];
            for j in i..n {
                gram[i * n + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            gram[i * n + j] = gram[j * n + i];
        }
    }
    let trace: f64 = (0..n).map(|i| gram[i * n + i]).sum();
    let ridge = 1e-8 * trace / n as f64;
    for i in 0..n {
        gram[i * n + i] += ridge;
    }

    let (coef, condition) = solve_spd(&gram, &rhs, n)?;

    let mut residual_sq = 0.0;
    for r in 0..x.rows {
        let pred: f64 = x.row(r).iter().zip(&coef).map(|(a, b)| a * b).sum();
        let d = pred - responses[r];
        residual_sq += d * d;
    }

    Ok(LnFit {
        alpha: coef[0],
        weights: coef[1..].to_vec(),
        tags: x.tags.clone(),
        residual_norm: residual_sq.sqrt(),
        condition_estimate: condition,
    })
}

/// Cholesky solve of a symmetric positive-definite system; returns the
/// solution and a rough condition estimate from the factor diagonal.
fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Fit {
                        reason: format!("rank deficiency at pivot {i}"),
                        condition: f64::INFINITY,
                    });
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let diag_max = (0..n).map(|i| l[i * n + i]).fold(f64::MIN, f64::max);
    let diag_min = (0..n).map(|i| l[i * n + i]).fold(f64::MAX, f64::min);
    let condition = (diag_max / diag_min).powi(2);

    // forward then back substitution
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut xsol = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * xsol[k];
        }
        xsol[i] = sum / l[i * n + i];
    }
    Ok((xsol, condition))
}

/// Cascade prediction for one stimulus: `alpha + Σ weightₘ·regressorₘ`.
pub fn predict(
    fit: &LnFit,
    filters: &[LnFilter],
    stimulus: &ImageTensor,
    rect: Rectifier,
) -> Result<f64> {
    if filters.len() != fit.weights.len() {
        return Err(Error::Shape(format!(
            "{} filters for {} fitted weights",
            filters.len(),
            fit.weights.len()
        )));
    }
    let row = regressor_row(filters, stimulus, rect)?;
    Ok(fit.alpha + row[1..].iter().zip(&fit.weights).map(|(a, b)| a * b).sum::<f64>())
}

/// Standard Pearson product-moment correlation. Errors if either vector
/// is constant (the correlation is undefined there).
pub fn pearson_r(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() || actual.len() < 2 {
        return Err(Error::Shape(format!(
            "pearson needs two equal-length vectors of >= 2 values, got {} and {}",
            actual.len(),
            predicted.len()
        )));
    }
    let n = actual.len() as f64;
    let mx = actual.iter().sum::<f64>() / n;
    let my = predicted.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in actual.iter().zip(predicted) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "a constant input vector has no defined correlation".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Outcome of a 75/25 split fit: the fit plus held-out accuracy.
#[derive(Debug, Clone)]
pub struct SplitFit {
    pub fit: LnFit,
    pub r_train: f64,
    pub r_test: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Fits on the first 75% of the (stimulus, response) rows and reports
/// Pearson r on both splits. Row order is the caller's stimulus order.
pub fn split_fit(
    filters: &[LnFilter],
    stimuli: &[ImageTensor],
    responses: &[f64],
    rect: Rectifier,
) -> Result<SplitFit> {
    if stimuli.len() != responses.len() {
        return Err(Error::Shape(format!(
            "{} stimuli vs {} responses",
            stimuli.len(),
            responses.len()
        )));
    }
    let n_train = stimuli.len() * 3 / 4;
    let n_test = stimuli.len() - n_train;
    if n_train < filters.len() + 1 || n_test < 2 {
        return Err(Error::Fit {
            reason: format!("split {n_train}/{n_test} too small for {} filters", filters.len()),
            condition: f64::INFINITY,
        });
    }
    let x_train = build_regressors(filters, &stimuli[..n_train], rect)?;
    let fit = fit_ln(&x_train, &responses[..n_train])?;
    let predict_all = |stims: &[ImageTensor]| -> Result<Vec<f64>> {
        stims.iter().map(|s| predict(&fit, filters, s, rect)).collect()
    };
    let r_train = pearson_r(&responses[..n_train], &predict_all(&stimuli[..n_train])?)?;
    let r_test = pearson_r(&responses[n_train..], &predict_all(&stimuli[n_train..])?)?;
    Ok(SplitFit { fit, r_train, r_test, n_train, n_test })
}

/// Fits a random-filter bank of the given shape and rectified-slot count
/// as the chance-level control, returning the fit and its held-out r.
pub fn chance_level_fit(
    stimuli: &[ImageTensor],
    responses: &[f64],
    bank_shape: (usize, usize, usize),
    n_fullwave: usize,
    seed: u64,
    rect: Rectifier,
) -> Result<(LnFit, f64)> {
    let filters = chance_filters(bank_shape, n_fullwave, seed);
    let out = split_fit(&filters, stimuli, responses, rect)?;
    Ok((out.fit, out.r_test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{gabor, make_synthetic_unit, GaborSpec, Responder, SyntheticUnitParams};
    use crate::stimulus::{gen_white_noise, NoiseSpec};
    use approx::assert_abs_diff_eq;

    const SHAPE: (usize, usize, usize) = (16, 16, 1);

    fn filt(id: &str, values: ImageTensor, nl: Nonlinearity) -> LnFilter {
        LnFilter { id: id.into(), values, nonlinearity: nl }
    }

    fn noise(count: usize, seed: u64) -> Vec<ImageTensor> {
        gen_white_noise(&NoiseSpec { seed, count, shape: SHAPE, mean: 0.0, std: 1.0 })
            .unwrap()
            .collect()
    }

    #[test]
    fn signals_are_per_channel_dots() {
        let f = filt(
            "f",
            ImageTensor::new(1, 2, 1, vec![1.0, 2.0]).unwrap(),
            Nonlinearity::Identity,
        );
        let s = ImageTensor::new(1, 2, 1, vec![3.0, -1.0]).unwrap();
        let sig = signals(&[f], &s).unwrap();
        assert_eq!(sig, vec![vec![1.0]]);

        // unit-norm filter against itself
        let g = gabor(SHAPE, &GaborSpec::centered(16, 16, 0.0)).unwrap();
        let sig = signals(
            &[filt("g", g.clone(), Nonlinearity::Identity)],
            &g,
        )
        .unwrap();
        assert_abs_diff_eq!(sig[0][0], 1.0, epsilon = 1e-12);

        // orthogonal stimulus
        let g90 = gabor(SHAPE, &GaborSpec::centered(16, 16, 90.0)).unwrap();
        let sig = signals(&[filt("g", g, Nonlinearity::Identity)], &g90).unwrap();
        assert!(sig[0][0].abs() < 0.05);
    }

    #[test]
    fn regressors_apply_tags_and_channel_sums() {
        // three-channel filter/stimulus engineered for per-channel signals (−2, 1, −1)
        let f = ImageTensor::new(1, 3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
            .unwrap();
        let s = ImageTensor::new(1, 3, 3, vec![-2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0])
            .unwrap();
        let fullwave = build_regressors(
            &[filt("f", f.clone(), Nonlinearity::FullWave)],
            &[s.clone()],
            Rectifier::Abs,
        )
        .unwrap();
        assert_eq!(fullwave.row(0), &[1.0, 4.0]);
        let identity =
            build_regressors(&[filt("f", f, Nonlinearity::Identity)], &[s], Rectifier::Abs)
                .unwrap();
        assert_eq!(identity.row(0), &[1.0, -2.0]);
    }

    #[test]
    fn zero_stimulus_gives_intercept_only_row() {
        let g = gabor(SHAPE, &GaborSpec::centered(16, 16, 0.0)).unwrap();
        let x = build_regressors(
            &[filt("g", g, Nonlinearity::FullWave)],
            &[ImageTensor::zeros(16, 16, 1)],
            Rectifier::Abs,
        )
        .unwrap();
        assert_eq!(x.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn exact_affine_responses_are_recovered() {
        let g0 = gabor(SHAPE, &GaborSpec::centered(16, 16, 0.0)).unwrap();
        let g90 = gabor(SHAPE, &GaborSpec::centered(16, 16, 90.0)).unwrap();
        let filters = vec![
            filt("a", g0, Nonlinearity::Identity),
            filt("b", g90, Nonlinearity::FullWave),
        ];
        let stimuli = noise(200, 5);
        let x = build_regressors(&filters, &stimuli, Rectifier::Abs).unwrap();
        let (alpha, w) = (0.75, [1.5, -2.25]);
        let responses: Vec<f64> = (0..x.rows)
            .map(|r| alpha + w[0] * x.row(r)[1] + w[1] * x.row(r)[2])
            .collect();
        let fit = fit_ln(&x, &responses).unwrap();
        assert_abs_diff_eq!(fit.alpha, alpha, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.weights[0], w[0], epsilon = 1e-6);
        assert_abs_diff_eq!(fit.weights[1], w[1], epsilon = 1e-6);
        // residual orthogonal to every regressor column (1e-6 relative)
        for j in 0..x.cols {
            let mut dot = 0.0;
            let mut col_norm = 0.0;
            for r in 0..x.rows {
                let pred: f64 = x.row(r)[1..]
                    .iter()
                    .zip(&fit.weights)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + fit.alpha;
                dot += x.row(r)[j] * (pred - responses[r]);
                col_norm += x.row(r)[j] * x.row(r)[j];
            }
            assert!(dot.abs() <= 1e-6 * col_norm.max(1.0), "column {j} residual dot {dot}");
        }
    }

    #[test]
    fn constant_responses_land_in_alpha() {
        let g0 = gabor(SHAPE, &GaborSpec::centered(16, 16, 0.0)).unwrap();
        let filters = vec![filt("a", g0, Nonlinearity::FullWave)];
        let stimuli = noise(100, 6);
        let x = build_regressors(&filters, &stimuli, Rectifier::Abs).unwrap();
        let responses = vec![3.25; x.rows];
        let fit = fit_ln(&x, &responses).unwrap();
        assert_abs_diff_eq!(fit.alpha, 3.25, epsilon = 1e-6);
        assert!(fit.weights[0].abs() <= 1e-6);
    }

    #[test]
    fn energy_unit_fit_quality_by_rectifier() {
        // Bank built from the unit's own quadrature pair: |·| regressors can
        // explain a²+b² only up to r = corr(χ²₂, |a|+|b|) ≈ 0.936; squared
        // regressors represent it exactly.
        let g = GaborSpec::centered(16, 16, 0.0);
        let unit = make_synthetic_unit(&SyntheticUnitParams::Energy { gabor: g }, SHAPE).unwrap();
        let k = unit.excitatory_filters();
        let filters = vec![
            filt("awa", ImageTensor::zeros(16, 16, 1), Nonlinearity::Identity),
            filt("e1", k[0].clone(), Nonlinearity::FullWave),
            filt("e2", k[1].clone(), Nonlinearity::FullWave),
        ];
        let stimuli = noise(10_000, 21);
        let responses: Vec<f64> =
            stimuli.iter().map(|s| unit.respond(s).unwrap()).collect();

        let abs_fit = split_fit(&filters, &stimuli, &responses, Rectifier::Abs).unwrap();
        assert!(abs_fit.r_test >= 0.9, "abs-rectified r {}", abs_fit.r_test);
        assert!(abs_fit.r_test <= 0.96, "abs-rectified r suspiciously high {}", abs_fit.r_test);

        let sq_fit = split_fit(&filters, &stimuli, &responses, Rectifier::Square).unwrap();
        assert!(sq_fit.r_test >= 0.999, "squared r {}", sq_fit.r_test);
    }

    #[test]
    fn predict_matches_the_affine_form() {
        let g0 = gabor(SHAPE, &GaborSpec::centered(16, 16, 0.0)).unwrap();
        let filters = vec![filt("awa", g0.clone(), Nonlinearity::Identity)];
        let fit = LnFit {
            alpha: 0.0,
            weights: vec![1.0],
            tags: vec![Nonlinearity::Identity],
            residual_norm: 0.0,
            condition_estimate: 1.0,
        };
        // zero stimulus → alpha
        assert_eq!(
            predict(&fit, &filters, &ImageTensor::zeros(16, 16, 1), Rectifier::Abs).unwrap(),
            0.0
        );
        // pure linear model: prediction = k·s
        let stim = noise(1, 9).pop().unwrap();
        let want = g0.dot(&stim).unwrap();
        assert_abs_diff_eq!(
            predict(&fit, &filters, &stim, Rectifier::Abs).unwrap(),
            want,
            epsilon = 1e-12
        );
        // positive homogeneity
        let mut scaled = stim.clone();
        scaled.scale(3.0);
        assert_abs_diff_eq!(
            predict(&fit, &filters, &scaled, Rectifier::Abs).unwrap(),
            3.0 * want,
            epsilon = 1e-9
        );
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(pearson_r(&x, &x).unwrap(), 1.0, epsilon = 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v + 5.0).collect();
        assert_abs_diff_eq!(pearson_r(&x, &neg).unwrap(), -1.0, epsilon = 1e-15);
        let r = pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(r, 0.866, epsilon = 1e-3);
        assert!(pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson_r(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn pearson_is_invariant_under_positive_affine_maps() {
        let x = [0.3, -1.0, 2.5, 0.7, -0.2, 1.9];
        let y = [1.0, 0.5, 2.0, -0.3, 0.9, 1.1];
        let base = pearson_r(&x, &y).unwrap();
        for (a, b) in [(2.0, 1.0), (0.25, -3.0), (7.5, 0.0)] {
            let mapped: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            assert_abs_diff_eq!(pearson_r(&mapped, &y).unwrap(), base, epsilon = 1e-12);
        }
    }

    #[test]
    fn chance_bank_trails_the_true_bank_on_a_halfrect_unit() {
        let g = GaborSpec::centered(16, 16, 0.0);
        let unit =
            make_synthetic_unit(&SyntheticUnitParams::LinearHalfRect { gabor: g }, SHAPE).unwrap();
        let k = unit.excitatory_filters()[0].clone();
        let filters = vec![
            filt("awa", k.clone(), Nonlinearity::Identity),
            filt("e1", k, Nonlinearity::FullWave),
        ];
        let stimuli = noise(10_000, 33);
        let responses: Vec<f64> =
            stimuli.iter().map(|s| unit.respond(s).unwrap()).collect();
        let true_fit = split_fit(&filters, &stimuli, &responses, Rectifier::Abs).unwrap();
        let (_, chance_r) =
            chance_level_fit(&stimuli, &responses, SHAPE, 19, 12345, Rectifier::Abs).unwrap();
        assert!(
            true_fit.r_test - chance_r >= 0.3,
            "true {} vs chance {chance_r}",
            true_fit.r_test
        );
        // determinism of the chance control
        let (_, chance_r2) =
            chance_level_fit(&stimuli, &responses, SHAPE, 19, 12345, Rectifier::Abs).unwrap();
        assert_eq!(chance_r, chance_r2);
    }

    #[test]
    fn chance_fit_on_a_zero_unit_is_undefined_correlation() {
        let stimuli = noise(200, 40);
        let responses = vec![0.0; stimuli.len()];
        let err =
            chance_level_fit(&stimuli, &responses, SHAPE, 3, 1, Rectifier::Abs).unwrap_err();
        assert!(matches!(err, Error::UndefinedCorrelation(_)), "{err}");
    }
}
