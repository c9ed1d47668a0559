//! Streaming estimation of the activation-weighted average filter and
//! activation-weighted covariance matrix over a response stream, with
//! mergeable accumulators for deterministic parallel reduction.

mod bank;
mod eig;
pub mod rfb1;

pub use bank::{select_subfilters, BankFilter, FilterRole, SubFilterBank};
pub use eig::{eig_sym, AwcDecomposition, SymMatrix};

use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Which second-moment form the accumulator maintains.
///
/// `AsWritten` weights the outer products by R², matching the printed
/// definition `Σ(R·s − STA)(R·s − STA)ᵀ / Σ|R|`; `StandardStc` weights by
/// |R|, matching the classical covariance form
/// `Σ|R|(s − STA)(s − STA)ᵀ / Σ|R|`. Both subtract the same STA (the AWA
/// filter of the same stream).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwcForm {
    AsWritten,
    StandardStc,
}

impl AwcForm {
    pub fn name(&self) -> &'static str {
        match self {
            AwcForm::AsWritten => "as-written",
            AwcForm::StandardStc => "standard-stc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "as-written" => Ok(AwcForm::AsWritten),
            "standard-stc" => Ok(AwcForm::StandardStc),
            other => Err(Error::Config(format!(
                "unknown awc form {other:?} (expected as-written or standard-stc)"
            ))),
        }
    }
}

/// The AWA filter: the |R|-normalized response-weighted mean stimulus,
/// reshaped to the crop.
#[derive(Debug, Clone, PartialEq)]
pub struct AwaFilter {
    pub values: ImageTensor,
    pub samples: u64,
}

/// Mergeable running sums for AWA/AWC estimation over a cropped stimulus
/// stream. All accumulation is in f64 regardless of stimulus precision;
/// the second moment stores the upper triangle only (N(N+1)/2 entries).
#[derive(Debug, Clone)]
pub struct RevCorrAccumulator {
    crop: (usize, usize, usize),
    form: AwcForm,
    n: u64,
    sum_r: f64,
    sum_abs_r: f64,
    /// Σ Rᵢ·sᵢ
    weighted: Vec<f64>,
    /// Σ |Rᵢ|·sᵢ
    abs_weighted: Vec<f64>,
    /// Upper triangle of Σ wᵢ·sᵢsᵢᵀ with wᵢ = Rᵢ² (as-written) or |Rᵢ|
    /// (standard-stc), row-major: entry (i, j ≥ i) at i·N − i(i−1)/2 + (j−i).
    tri: Vec<f64>,
    scratch: Vec<f64>,
}

impl RevCorrAccumulator {
    pub fn new(crop: (usize, usize, usize), form: AwcForm) -> Result<Self> {
        let (h, w, c) = crop;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::Config(format!("crop {h}x{w}x{c} has a zero dimension")));
        }
        let n = h * w * c;
        Ok(Self {
            crop,
            form,
            n: 0,
            sum_r: 0.0,
            sum_abs_r: 0.0,
            weighted: vec![0.0; n],
            abs_weighted: vec![0.0; n],
            tri: vec![0.0; n * (n + 1) / 2],
            scratch: vec![0.0; n],
        })
    }

    pub fn dim(&self) -> usize {
        self.weighted.len()
    }

    pub fn crop(&self) -> (usize, usize, usize) {
        self.crop
    }

    pub fn form(&self) -> AwcForm {
        self.form
    }

    pub fn samples(&self) -> u64 {
        self.n
    }

    pub fn sum_r(&self) -> f64 {
        self.sum_r
    }

    pub fn sum_abs_r(&self) -> f64 {
        self.sum_abs_r
    }

    pub fn weighted_sum(&self) -> &[f64] {
        &self.weighted
    }

    /// Estimated peak bytes for an accumulator of dimension `n`.
    pub fn estimate_bytes(n: usize) -> u64 {
        // triangle + two weighted vectors + scratch, plus the dense matrix
        // materialized at finalize
        (8 * (n * (n + 1) / 2) + 3 * 8 * n + 8 * n * n) as u64
    }

    /// Folds one (stimulus, response) pair into the sums. The stimulus is
    /// center-cropped to the configured crop when larger; field updates
    /// happen in a fixed order so chunked merging is bit-reproducible.
    pub fn accumulate(&mut self, stimulus: &ImageTensor, response: f64) -> Result<()> {
        if !response.is_finite() {
            return Err(Error::Shape(format!("non-finite response {response}")));
        }
        let (ch, cw, cc) = self.crop;
        let (h, w, c) = stimulus.shape();
        if c != cc || h < ch || w < cw {
            return Err(Error::Shape(format!(
                "stimulus {h}x{w}x{c} incompatible with crop {ch}x{cw}x{cc}"
            )));
        }

        if (h, w) == (ch, cw) {
            self.scratch.copy_from_slice(stimulus.values());
        } else {
            let oy = (h - ch) / 2;
            let ox = (w - cw) / 2;
            let mut k = 0;
            for y in 0..ch {
                for x in 0..cw {
                    for cidx in 0..cc {
                        self.scratch[k] = stimulus.get(oy + y, ox + x, cidx);
                        k += 1;
                    }
                }
            }
        }

        let r = response;
        let abs_r = r.abs();
        self.n += 1;
        self.sum_r += r;
        self.sum_abs_r += abs_r;

        let s = &self.scratch;
        let n = s.len();
        for (wi, &si) in self.weighted.iter_mut().zip(s) {
            *wi += r * si;
        }
        for (wi, &si) in self.abs_weighted.iter_mut().zip(s) {
            *wi += abs_r * si;
        }
        let coeff = match self.form {
            AwcForm::AsWritten => r * r,
            AwcForm::StandardStc => abs_r,
        };
        if coeff != 0.0 {
            let mut base = 0;
            for i in 0..n {
                let a = coeff * s[i];
                let row = &mut self.tri[base..base + (n - i)];
                for (t, &sj) in row.iter_mut().zip(&s[i..]) {
                    *t += a * sj;
                }
                base += n - i;
            }
        }
        Ok(())
    }

    /// Adds another accumulator's sums into this one (exact fieldwise IEEE
    /// addition). Both must share crop and form. Merging single-sample
    /// accumulators in stream order bit-equals sequential accumulation.
    pub fn merge(&mut self, other: &RevCorrAccumulator) -> Result<()> {
        if self.crop != other.crop || self.form != other.form {
            return Err(Error::Config(format!(
                "cannot merge accumulators: crop {:?}/{:?} form {:?}/{:?}",
                self.crop, other.crop, self.form, other.form
            )));
        }
        self.n += other.n;
        self.sum_r += other.sum_r;
        self.sum_abs_r += other.sum_abs_r;
        for (a, b) in self.weighted.iter_mut().zip(&other.weighted) {
            *a += b;
        }
        for (a, b) in self.abs_weighted.iter_mut().zip(&other.abs_weighted) {
            *a += b;
        }
        for (a, b) in self.tri.iter_mut().zip(&other.tri) {
            *a += b;
        }
        Ok(())
    }

    /// Finalizes the AWA filter: `Σ Rᵢsᵢ / Σ|Rᵢ|`.
    pub fn finalize_awa(&self) -> Result<AwaFilter> {
        if self.sum_abs_r == 0.0 {
            return Err(Error::WeakResponse);
        }
        let (h, w, c) = self.crop;
        let values: Vec<f64> = self.weighted.iter().map(|v| v / self.sum_abs_r).collect();
        Ok(AwaFilter { values: ImageTensor::new(h, w, c, values)?, samples: self.n })
    }

    /// Finalizes the AWC matrix in the configured form.
    ///
    /// With T = Σ|R|, W = ΣRs, A = Σ|R|s, M the accumulated second moment,
    /// and STA = W/T:
    /// as-written    = (M − W·STAᵀ − STA·Wᵀ + n·STA·STAᵀ) / T
    /// standard-stc  = (M − A·STAᵀ − STA·Aᵀ + T·STA·STAᵀ) / T
    pub fn finalize_awc(&self) -> Result<SymMatrix> {
        if self.sum_abs_r == 0.0 {
            return Err(Error::WeakResponse);
        }
        let n = self.dim();
        let t = self.sum_abs_r;
        let sta: Vec<f64> = self.weighted.iter().map(|v| v / t).collect();
        let (cross, sta_weight): (&[f64], f64) = match self.form {
            AwcForm::AsWritten => (&self.weighted, self.n as f64),
            AwcForm::StandardStc => (&self.abs_weighted, t),
        };
        let mut m = SymMatrix::zeros(n);
        let mut base = 0;
        for i in 0..n {
            for j in i..n {
                let raw = self.tri[base + (j - i)] - cross[i] * sta[j] - sta[i] * cross[j]
                    + sta_weight * sta[i] * sta[j];
                let v = raw / t;
                m.set(i, j, v);
                m.set(j, i, v);
            }
            base += n - i;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn acc2(form: AwcForm) -> RevCorrAccumulator {
        RevCorrAccumulator::new((1, 2, 1), form).unwrap()
    }

    fn stim2(a: f64, b: f64) -> ImageTensor {
        ImageTensor::new(1, 2, 1, vec![a, b]).unwrap()
    }

    #[test]
    fn zero_response_only_bumps_count() {
        let mut acc = acc2(AwcForm::AsWritten);
        acc.accumulate(&stim2(3.0, -2.0), 0.0).unwrap();
        assert_eq!(acc.samples(), 1);
        assert_eq!(acc.weighted_sum(), &[0.0, 0.0]);
        assert_eq!(acc.sum_abs_r(), 0.0);
    }

    #[test]
    fn single_sample_weighted_sum_is_stimulus() {
        let mut acc = acc2(AwcForm::AsWritten);
        acc.accumulate(&stim2(0.5, -1.5), 1.0).unwrap();
        assert_eq!(acc.weighted_sum(), &[0.5, -1.5]);
        let awa = acc.finalize_awa().unwrap();
        assert_eq!(awa.values.values(), &[0.5, -1.5]);
    }

    #[test]
    fn two_sample_sums_match_hand_evaluation() {
        // s1=(1,-1) R1=2, s2=(0,1) R2=-1: weighted=(2,-3), sum|R|=3, AWA=(2/3,-1)
        let mut acc = acc2(AwcForm::AsWritten);
        acc.accumulate(&stim2(1.0, -1.0), 2.0).unwrap();
        acc.accumulate(&stim2(0.0, 1.0), -1.0).unwrap();
        assert_eq!(acc.weighted_sum(), &[2.0, -3.0]);
        assert_eq!(acc.sum_abs_r(), 3.0);
        let awa = acc.finalize_awa().unwrap();
        assert_abs_diff_eq!(awa.values.values()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(awa.values.values()[1], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn all_zero_responses_are_the_weak_response_condition() {
        let mut acc = acc2(AwcForm::AsWritten);
        for _ in 0..5 {
            acc.accumulate(&stim2(1.0, 2.0), 0.0).unwrap();
        }
        assert!(matches!(acc.finalize_awa(), Err(Error::WeakResponse)));
        assert!(matches!(acc.finalize_awc(), Err(Error::WeakResponse)));
    }

    #[test]
    fn single_sample_as_written_awc_is_zero() {
        let mut acc = acc2(AwcForm::AsWritten);
        acc.accumulate(&stim2(0.7, -0.3), 1.0).unwrap();
        let m = acc.finalize_awc().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn two_sample_as_written_awc_matches_hand_evaluation() {
        // s1=(1,0) R=1, s2=(0,1) R=1 → STA=(1/2,1/2), AWC=[[1/4,-1/4],[-1/4,1/4]]
        let mut acc = acc2(AwcForm::AsWritten);
        acc.accumulate(&stim2(1.0, 0.0), 1.0).unwrap();
        acc.accumulate(&stim2(0.0, 1.0), 1.0).unwrap();
        let m = acc.finalize_awc().unwrap();
        assert_abs_diff_eq!(m.get(0, 0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(0, 1), -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(1, 0), -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(1, 1), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn standard_stc_on_constant_responses_approaches_noise_covariance() {
        use crate::stimulus::{gen_white_noise, NoiseSpec};
        let spec = NoiseSpec { seed: 99, count: 100_000, shape: (1, 3, 1), mean: 0.0, std: 1.0 };
        let mut acc = RevCorrAccumulator::new((1, 3, 1), AwcForm::StandardStc).unwrap();
        for t in gen_white_noise(&spec).unwrap() {
            acc.accumulate(&t, 2.5).unwrap();
        }
        let m = acc.finalize_awc().unwrap();
        let tol = 5.0 / (spec.count as f64).sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m.get(i, j), want, epsilon = tol);
            }
        }
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let mut a = acc2(AwcForm::StandardStc);
        a.accumulate(&stim2(1.0, 2.0), 0.5).unwrap();
        let snapshot = a.clone();
        let empty = acc2(AwcForm::StandardStc);
        a.merge(&empty).unwrap();
        assert_eq!(a.weighted_sum(), snapshot.weighted_sum());
        assert_eq!(a.samples(), snapshot.samples());
    }

    #[test]
    fn merge_rejects_mismatched_config() {
        let mut a = acc2(AwcForm::AsWritten);
        let b = acc2(AwcForm::StandardStc);
        assert!(a.merge(&b).is_err());
        let c = RevCorrAccumulator::new((2, 2, 1), AwcForm::AsWritten).unwrap();
        assert!(a.merge(&c).is_err());
    }

    #[test]
    fn ordered_merge_of_single_samples_bit_equals_sequential() {
        let samples = [
            (stim2(0.1, -0.9), 1.7),
            (stim2(2.0, 0.3), -0.2),
            (stim2(-0.4, 0.8), 0.9),
            (stim2(1.1, 1.2), 3.3),
        ];
        let mut seq = acc2(AwcForm::AsWritten);
        for (s, r) in &samples {
            seq.accumulate(s, *r).unwrap();
        }
        let mut merged = acc2(AwcForm::AsWritten);
        for (s, r) in &samples {
            let mut single = acc2(AwcForm::AsWritten);
            single.accumulate(s, *r).unwrap();
            merged.merge(&single).unwrap();
        }
        assert_eq!(seq.weighted_sum(), merged.weighted_sum());
        assert_eq!(seq.sum_r(), merged.sum_r());
        assert_eq!(seq.sum_abs_r(), merged.sum_abs_r());
        assert_eq!(seq.tri, merged.tri);
        let a = seq.finalize_awa().unwrap();
        let b = merged.finalize_awa().unwrap();
        assert_eq!(a.values.values(), b.values.values());
    }

    #[test]
    fn power_of_two_response_scaling_leaves_awa_bit_identical() {
        let samples = [
            (stim2(0.3, -0.9), 1.25),
            (stim2(-1.0, 0.5), -0.75),
            (stim2(0.2, 2.0), 2.5),
        ];
        for a in [2.0, 4.0, 0.5] {
            let mut base = acc2(AwcForm::AsWritten);
            let mut scaled = acc2(AwcForm::AsWritten);
            for (s, r) in &samples {
                base.accumulate(s, *r).unwrap();
                scaled.accumulate(s, r * a).unwrap();
            }
            for (w0, w1) in base.weighted_sum().iter().zip(scaled.weighted_sum()) {
                assert_eq!(w1, &(w0 * a));
            }
            assert_eq!(scaled.sum_abs_r(), base.sum_abs_r() * a);
            let awa0 = base.finalize_awa().unwrap();
            let awa1 = scaled.finalize_awa().unwrap();
            assert_eq!(awa0.values.values(), awa1.values.values());
        }
    }

    #[test]
    fn crop_is_applied_to_larger_stimuli() {
        let mut acc = RevCorrAccumulator::new((2, 2, 1), AwcForm::AsWritten).unwrap();
        let stim = ImageTensor::from_fn(4, 4, 1, |y, x, _| (y * 4 + x) as f64);
        acc.accumulate(&stim, 1.0).unwrap();
        // center 2x2 of the 4x4 gradient starts at (1,1)
        assert_eq!(acc.weighted_sum(), &[5.0, 6.0, 9.0, 10.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut acc = RevCorrAccumulator::new((4, 4, 1), AwcForm::AsWritten).unwrap();
        assert!(acc.accumulate(&ImageTensor::zeros(2, 2, 1), 1.0).is_err());
        assert!(acc.accumulate(&ImageTensor::zeros(4, 4, 3), 1.0).is_err());
        assert!(acc.accumulate(&ImageTensor::zeros(4, 4, 1), f64::NAN).is_err());
    }
}
