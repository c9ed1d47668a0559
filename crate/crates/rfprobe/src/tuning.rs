//! Orientation/spatial-frequency tuning maps, natural-image category
//! selectivity (one-way ANOVA + Bonferroni), and response-distribution
//! diagnostics.

use crate::error::{Error, Result};
use crate::net::Responder;
use crate::stats::f_tail_prob;
use crate::stimulus::{
    battery_frequencies, battery_orientations, battery_phases, gen_white_noise, CategoryImageSet,
    GratingParams, NoiseSpec,
};
use crate::tensor::ImageTensor;

/// How the four phase responses collapse into one tuning entry.
/// `RectifiedMean` (default) rectifies the phase average; `MeanRectified`
/// averages the rectified responses. The two coincide for nonnegative
/// responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseAverage {
    RectifiedMean,
    MeanRectified,
}

/// A 17×6 orientation × spatial-frequency map of rectified mean responses.
#[derive(Debug, Clone)]
pub struct TuningMap {
    pub orientations_deg: Vec<f64>,
    pub frequencies_cpi: Vec<f64>,
    /// Row-major 17×6: `responses[o * 6 + f]`.
    pub responses: Vec<f64>,
}

impl TuningMap {
    pub fn get(&self, orientation_idx: usize, frequency_idx: usize) -> f64 {
        self.responses[orientation_idx * self.frequencies_cpi.len() + frequency_idx]
    }

    /// (orientation_deg, frequency_cpi) of the maximum response.
    pub fn argmax(&self) -> (f64, f64) {
        let mut best = 0;
        for (i, v) in self.responses.iter().enumerate() {
            if *v > self.responses[best] {
                best = i;
            }
        }
        let nf = self.frequencies_cpi.len();
        (self.orientations_deg[best / nf], self.frequencies_cpi[best % nf])
    }

    /// CSV in battery order with header `orientation_deg,sf_cpi,response`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("orientation_deg,sf_cpi,response\n");
        for (i, ori) in self.orientations_deg.iter().enumerate() {
            for (j, freq) in self.frequencies_cpi.iter().enumerate() {
                out.push_str(&format!("{ori},{freq},{}\n", self.get(i, j)));
            }
        }
        out
    }
}

/// Measures the tuning map over the grating battery. The battery must be
/// the full 17×6×4 grid in (orientation, frequency, phase) order.
pub fn orientation_sf_map(
    respond: &dyn Responder,
    battery: &[(GratingParams, ImageTensor)],
    mode: PhaseAverage,
) -> Result<TuningMap> {
    let orientations = battery_orientations();
    let frequencies = battery_frequencies();
    let phases = battery_phases();
    if battery.len() != orientations.len() * frequencies.len() * phases.len() {
        return Err(Error::Config(format!(
            "battery has {} stimuli, expected {}",
            battery.len(),
            orientations.len() * frequencies.len() * phases.len()
        )));
    }
    let mut responses = Vec::with_capacity(orientations.len() * frequencies.len());
    let mut idx = 0;
    for ori in &orientations {
        for freq in &frequencies {
            let mut acc = 0.0;
            for phase in &phases {
                let (p, img) = &battery[idx];
                if p.orientation_deg != *ori
                    || p.spatial_freq_cpi != *freq
                    || p.phase_deg != *phase
                {
                    return Err(Error::Config(format!(
                        "battery entry {idx} out of grid order: {:?}",
                        (p.orientation_deg, p.spatial_freq_cpi, p.phase_deg)
                    )));
                }
                let r = respond.respond(img)?;
                acc += match mode {
                    PhaseAverage::RectifiedMean => r,
                    PhaseAverage::MeanRectified => r.max(0.0),
                };
                idx += 1;
            }
            let mean = acc / phases.len() as f64;
            responses.push(match mode {
                PhaseAverage::RectifiedMean => mean.max(0.0),
                PhaseAverage::MeanRectified => mean,
            });
        }
    }
    Ok(TuningMap { orientations_deg: orientations, frequencies_cpi: frequencies, responses })
}

/// Probes every image of the set, grouped by category label in set order.
pub fn category_responses(
    respond: &dyn Responder,
    set: &CategoryImageSet,
) -> Result<Vec<(String, Vec<f64>)>> {
    set.categories()
        .iter()
        .map(|(label, images)| {
            let rs: Result<Vec<f64>> = images.iter().map(|img| respond.respond(img)).collect();
            Ok((label.clone(), rs?))
        })
        .collect()
}

/// One-way ANOVA over k groups:
/// `F = (SS_between/(k−1)) / (SS_within/(N−k))`, p from the F upper tail.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<(f64, f64)> {
    if groups.len() < 2 {
        return Err(Error::Shape(format!("ANOVA needs >= 2 groups, got {}", groups.len())));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::Shape(format!("group {i} has {} < 2 observations", g.len())));
        }
    }
    let k = groups.len() as f64;
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let n = n_total as f64;
    let grand: f64 = groups.iter().flatten().sum::<f64>() / n;

    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    }
    if ss_within == 0.0 {
        return Err(Error::DegenerateVariance(
            "zero within-group variance leaves F undefined".into(),
        ));
    }
    let df1 = k - 1.0;
    let df2 = n - k;
    let f = (ss_between / df1) / (ss_within / df2);
    let p = f_tail_prob(f, df1, df2);
    Ok((f, p))
}

/// Bonferroni-corrected significance flags: `pᵢ < alpha / m` with m the
/// number of p-values tested.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len().max(1) as f64;
    p_values.iter().map(|p| *p < alpha / m).collect()
}

/// Histogram of probe responses over a white-noise stream.
#[derive(Debug, Clone)]
pub struct ResponseHistogram {
    /// bins + 1 edges, uniform over the observed range.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n: u64,
    /// Fraction of responses exactly equal to zero.
    pub fraction_at_zero: f64,
    pub mean: f64,
    pub median: f64,
}

impl ResponseHistogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{c}\n", self.edges[i], self.edges[i + 1]));
        }
        out
    }
}

/// Streams the noise spec through the probe and bins the responses.
pub fn response_distribution(
    respond: &dyn Responder,
    noise_spec: &NoiseSpec,
    bins: usize,
) -> Result<ResponseHistogram> {
    if bins < 2 {
        return Err(Error::Config(format!("need >= 2 bins, got {bins}")));
    }
    let mut responses = Vec::with_capacity(noise_spec.count);
    for stim in gen_white_noise(noise_spec)? {
        responses.push(respond.respond(&stim)?);
    }
    let n = responses.len() as u64;
    let zero_count = responses.iter().filter(|r| **r == 0.0).count();
    let mut lo = responses.iter().cloned().fold(f64::MAX, f64::min);
    let mut hi = responses.iter().cloned().fold(f64::MIN, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for r in &responses {
        let idx = (((r - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let mean = responses.iter().sum::<f64>() / n as f64;
    let mut sorted = responses;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    Ok(ResponseHistogram {
        edges,
        counts,
        n,
        fraction_at_zero: zero_count as f64 / n as f64,
        mean,
        median,
    })
}

/// `key = value` category-selectivity report.
pub fn category_report(
    groups: &[(String, Vec<f64>)],
    f: f64,
    p: f64,
    significant: bool,
    bonferroni_m: usize,
    alpha: f64,
) -> String {
    let mut out = String::new();
    for (label, rs) in groups {
        let n = rs.len() as f64;
        let mean = rs.iter().sum::<f64>() / n;
        let var = rs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        out.push_str(&format!(
            "category.{label}.mean = {mean}\ncategory.{label}.std = {}\ncategory.{label}.n = {}\n",
            var.sqrt(),
            rs.len()
        ));
    }
    out.push_str(&format!(
        "anova.F = {f}\nanova.p = {p}\nanova.alpha = {alpha}\nanova.bonferroni_m = {bonferroni_m}\nanova.significant = {significant}\n"
    ));
    out
}
