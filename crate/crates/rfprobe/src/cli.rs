//! Batch driver tying stimulus generation, probing, estimation, fitting,
//! and reporting into reproducible runs with persisted artifacts.
//!
//! Four subcommands: `analyze` (stream noise, estimate AWA/AWC, persist
//! RFB1 banks), `fit` (LN-cascade fit against a persisted bank), `tune`
//! (grating tuning, category selectivity, response histograms), `export`
//! (render bank filters as P5 graymaps). Flags are the primary interface;
//! an optional `key = value` config file fills in anything not given on
//! the command line. The resolved configuration, including the PRNG
//! identity, is written into every output directory, so a run is
//! reconstructable from its artifacts alone.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lnmodel::{
    awa_only_filters, bank_filters, chance_filters, pearson_r, split_fit, LnFilter, Rectifier,
};
use crate::net::{
    make_synthetic_unit, nnf1, GaborSpec, NetworkProbe, Responder, SyntheticUnitParams,
};
use crate::revcorr::{
    rfb1, select_subfilters, AwcForm, RevCorrAccumulator, SubFilterBank,
};
use crate::stimulus::{grating_battery, load_image_set, pnm, NoiseSpec, PRNG_NAME};
use crate::tensor::ImageTensor;
use crate::tuning::{
    bonferroni, category_report, category_responses, one_way_anova, orientation_sf_map,
    response_distribution, PhaseAverage,
};

#[derive(Parser)]
#[command(name = "rfprobe", version, about = "Receptive-field estimation for CNN units by reverse correlation")]
pub struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream white noise through the selected units and persist their
    /// AWA/AWC sub-filter banks as RFB1 files.
    Analyze(CommonFlags),
    /// Fit the LN cascade of a persisted bank and report Pearson accuracy
    /// on noise, gratings, and natural images.
    Fit {
        /// Path to the RFB1 bank produced by `analyze`.
        #[arg(long)]
        rfb1: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Measure grating tuning maps, category selectivity, and response
    /// histograms for the selected units.
    Tune(CommonFlags),
    /// Render every filter of a persisted bank as per-channel P5 graymaps.
    Export {
        /// Path to the RFB1 bank.
        #[arg(long)]
        rfb1: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Default, Clone)]
pub struct CommonFlags {
    /// Optional `key = value` config file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// NNF1 model file to probe (mutually exclusive with --synthetic).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Synthetic unit kind: linear | energy | suppressed.
    #[arg(long)]
    synthetic: Option<String>,
    /// Suppression gain for the suppressed unit.
    #[arg(long)]
    gain: Option<f64>,
    /// Layer to probe (model mode; default: last layer).
    #[arg(long)]
    layer: Option<String>,
    /// Unit selection: `all` or a comma list of channel indices.
    #[arg(long)]
    units: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// White-noise stimulus count.
    #[arg(long)]
    samples: Option<usize>,
    /// Analysis crop as HxW or HxWxC.
    #[arg(long)]
    crop: Option<String>,
    /// AWC form: as-written | standard-stc.
    #[arg(long = "awc-form")]
    awc_form: Option<String>,
    /// Cascade bank: awc | awa-only | chance.
    #[arg(long)]
    bank: Option<String>,
    /// Fit stimulus source: noise | probes | both.
    #[arg(long = "fit-on")]
    fit_on: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// Chunk size of the parallel reduction.
    #[arg(long)]
    chunk: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run even if the estimated memory exceeds the budget.
    #[arg(long)]
    force: bool,
    #[arg(long = "mem-budget-gb")]
    mem_budget_gb: Option<f64>,
    /// Category image manifest (`label<TAB>path` lines).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Histogram bin count.
    #[arg(long)]
    bins: Option<usize>,
    /// Full-wave rectifier realization: abs | square.
    #[arg(long)]
    rect: Option<String>,
    /// Excitatory eigenvector count.
    #[arg(long = "n-exc")]
    n_exc: Option<usize>,
    /// Suppressive eigenvector count.
    #[arg(long = "n-sup")]
    n_sup: Option<usize>,
}

/// Where responses come from.
#[derive(Debug, Clone)]
pub enum UnitSource {
    Synthetic { kind: SyntheticKind, gain: f64 },
    Model { path: PathBuf, layer: Option<String>, units: UnitSelection },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Linear,
    Energy,
    Suppressed,
}

impl SyntheticKind {
    fn name(&self) -> &'static str {
        match self {
            SyntheticKind::Linear => "linear",
            SyntheticKind::Energy => "energy",
            SyntheticKind::Suppressed => "suppressed",
        }
    }
}

#[derive(Debug, Clone)]
pub enum UnitSelection {
    All,
    Indices(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankKind {
    Awc,
    AwaOnly,
    Chance,
}

impl BankKind {
    fn name(&self) -> &'static str {
        match self {
            BankKind::Awc => "awc",
            BankKind::AwaOnly => "awa-only",
            BankKind::Chance => "chance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitSource {
    Noise,
    Probes,
    Both,
}

impl FitSource {
    fn name(&self) -> &'static str {
        match self {
            FitSource::Noise => "noise",
            FitSource::Probes => "probes",
            FitSource::Both => "both",
        }
    }
}

/// The fully resolved run configuration. Every field has a recorded
/// default; the resolved values are serialized into the output directory.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: UnitSource,
    pub seed: u64,
    pub samples: usize,
    pub crop: (usize, usize, usize),
    pub awc_form: AwcForm,
    pub bank_kind: BankKind,
    pub fit_on: FitSource,
    pub n_exc: usize,
    pub n_sup: usize,
    pub threads: usize,
    pub chunk: usize,
    pub out_dir: PathBuf,
    pub force: bool,
    pub mem_budget_gb: f64,
    pub manifest: Option<PathBuf>,
    pub bins: usize,
    pub rect: Rectifier,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: UnitSource::Synthetic { kind: SyntheticKind::Linear, gain: 1.0 },
            seed: 1,
            samples: 200_000,
            crop: (16, 16, 1),
            awc_form: AwcForm::AsWritten,
            bank_kind: BankKind::Awc,
            fit_on: FitSource::Noise,
            n_exc: 9,
            n_sup: 10,
            threads: 1,
            chunk: 4096,
            out_dir: PathBuf::from("rfprobe-out"),
            force: false,
            mem_budget_gb: 4.0,
            manifest: None,
            bins: 50,
            rect: Rectifier::Abs,
        }
    }
}

impl RunConfig {
    /// Merges defaults, the optional config file, and the flags (flags
    /// win; the file fills in; defaults close the rest).
    pub fn resolve(flags: &CommonFlags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => parse_config_file(path)?,
            None => std::collections::HashMap::new(),
        };
        let pick_str = |flag: &Option<String>, key: &str| -> Option<String> {
            flag.clone().or_else(|| file.get(key).cloned())
        };
        let pick_path = |flag: &Option<PathBuf>, key: &str| -> Option<PathBuf> {
            flag.clone().or_else(|| file.get(key).map(PathBuf::from))
        };
        macro_rules! pick_parse {
            ($flag:expr, $key:literal, $default:expr) => {
                match $flag {
                    Some(v) => v,
                    None => match file.get($key) {
                        Some(raw) => raw.parse().map_err(|e| {
                            Error::Config(format!("config key {}: {e}", $key))
                        })?,
                        None => $default,
                    },
                }
            };
        }

        let defaults = RunConfig::default();
        let model = pick_path(&flags.model, "model");
        let synthetic = pick_str(&flags.synthetic, "synthetic");
        if model.is_some() && synthetic.is_some() {
            return Err(Error::Config("--model and --synthetic are mutually exclusive".into()));
        }
        let gain = pick_parse!(flags.gain, "gain", 1.0);
        let source = if let Some(path) = model {
            let units = match pick_str(&flags.units, "units") {
                None => UnitSelection::Indices(vec![0]),
                Some(s) if s == "all" => UnitSelection::All,
                Some(s) => {
                    let idx: std::result::Result<Vec<usize>, _> =
                        s.split(',').map(|t| t.trim().parse()).collect();
                    UnitSelection::Indices(
                        idx.map_err(|e| Error::Config(format!("bad --units {s:?}: {e}")))?,
                    )
                }
            };
            UnitSource::Model { path, layer: pick_str(&flags.layer, "layer"), units }
        } else {
            let kind = match synthetic.as_deref() {
                None | Some("linear") | Some("linear_halfrect") => SyntheticKind::Linear,
                Some("energy") => SyntheticKind::Energy,
                Some("suppressed") | Some("suppressed_energy") => SyntheticKind::Suppressed,
                Some(other) => {
                    return Err(Error::Config(format!("unknown synthetic kind {other:?}")))
                }
            };
            UnitSource::Synthetic { kind, gain }
        };

        let crop = match pick_str(&flags.crop, "crop") {
            Some(s) => parse_crop(&s)?,
            None => defaults.crop,
        };
        let threads = pick_parse!(flags.threads, "threads", defaults.threads);
        if threads == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        let chunk = pick_parse!(flags.chunk, "chunk", defaults.chunk);
        if chunk == 0 {
            return Err(Error::Config("--chunk must be >= 1".into()));
        }

        Ok(RunConfig {
            source,
            seed: pick_parse!(flags.seed, "seed", defaults.seed),
            samples: pick_parse!(flags.samples, "samples", defaults.samples),
            crop,
            awc_form: match pick_str(&flags.awc_form, "awc-form") {
                Some(s) => AwcForm::parse(&s)?,
                None => defaults.awc_form,
            },
            bank_kind: match pick_str(&flags.bank, "bank").as_deref() {
                None | Some("awc") => BankKind::Awc,
                Some("awa-only") => BankKind::AwaOnly,
                Some("chance") => BankKind::Chance,
                Some(other) => return Err(Error::Config(format!("unknown bank {other:?}"))),
            },
            fit_on: match pick_str(&flags.fit_on, "fit-on").as_deref() {
                None | Some("noise") => FitSource::Noise,
                Some("probes") => FitSource::Probes,
                Some("both") => FitSource::Both,
                Some(other) => return Err(Error::Config(format!("unknown fit source {other:?}"))),
            },
            n_exc: pick_parse!(flags.n_exc, "n-exc", defaults.n_exc),
            n_sup: pick_parse!(flags.n_sup, "n-sup", defaults.n_sup),
            threads,
            chunk,
            out_dir: pick_path(&flags.out, "out").unwrap_or(defaults.out_dir),
            force: flags.force || file.get("force").map(|v| v == "true").unwrap_or(false),
            mem_budget_gb: pick_parse!(flags.mem_budget_gb, "mem-budget-gb", defaults.mem_budget_gb),
            manifest: pick_path(&flags.manifest, "manifest"),
            bins: pick_parse!(flags.bins, "bins", defaults.bins),
            rect: match pick_str(&flags.rect, "rect") {
                Some(s) => Rectifier::parse(&s)?,
                None => defaults.rect,
            },
        })
    }

    /// `key = value` dump of every resolved field plus the PRNG identity.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        match &self.source {
            UnitSource::Synthetic { kind, gain } => {
                out.push_str(&format!("synthetic = {}\ngain = {gain}\n", kind.name()));
            }
            UnitSource::Model { path, layer, units } => {
                out.push_str(&format!("model = {}\n", path.display()));
                if let Some(layer) = layer {
                    out.push_str(&format!("layer = {layer}\n"));
                }
                match units {
                    UnitSelection::All => out.push_str("units = all\n"),
                    UnitSelection::Indices(idx) => out.push_str(&format!(
                        "units = {}\n",
                        idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
                    )),
                }
            }
        }
        out.push_str(&format!(
            "seed = {}\nsamples = {}\ncrop = {}x{}x{}\nawc-form = {}\nbank = {}\nfit-on = {}\nn-exc = {}\nn-sup = {}\nthreads = {}\nchunk = {}\nout = {}\nforce = {}\nmem-budget-gb = {}\nbins = {}\nrect = {}\nprng = {}\n",
            self.seed,
            self.samples,
            self.crop.0,
            self.crop.1,
            self.crop.2,
            self.awc_form.name(),
            self.bank_kind.name(),
            self.fit_on.name(),
            self.n_exc,
            self.n_sup,
            self.threads,
            self.chunk,
            self.out_dir.display(),
            self.force,
            self.mem_budget_gb,
            self.bins,
            self.rect.name(),
            PRNG_NAME,
        ));
        if let Some(m) = &self.manifest {
            out.push_str(&format!("manifest = {}\n", m.display()));
        }
        out
    }
}

fn parse_config_file(path: &Path) -> Result<std::collections::HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Ingestion { path: path.into(), reason: e.to_string() })?;
    let mut map = std::collections::HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {line:?} is not key = value")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_crop(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.split('x').collect();
    let parse = |t: &str| {
        t.parse::<usize>().map_err(|e| Error::Config(format!("bad crop component {t:?}: {e}")))
    };
    match parts.as_slice() {
        [h] => {
            let h = parse(h)?;
            Ok((h, h, 1))
        }
        [h, w] => Ok((parse(h)?, parse(w)?, 1)),
        [h, w, c] => Ok((parse(h)?, parse(w)?, parse(c)?)),
        _ => Err(Error::Config(format!("bad crop {s:?}, expected H, HxW, or HxWxC"))),
    }
}

/// One resolved analysis target.
pub struct UnitTarget {
    pub id: String,
    pub responder: Box<dyn Responder>,
    /// Shape of the stimuli this unit consumes.
    pub stim_shape: (usize, usize, usize),
}

/// Resolves the configured source into probe targets.
pub fn resolve_units(config: &RunConfig) -> Result<Vec<UnitTarget>> {
    match &config.source {
        UnitSource::Synthetic { kind, gain } => {
            let (h, w, c) = config.crop;
            let base = GaborSpec::centered(h, w, 0.0);
            let params = match kind {
                SyntheticKind::Linear => SyntheticUnitParams::LinearHalfRect { gabor: base },
                SyntheticKind::Energy => SyntheticUnitParams::Energy { gabor: base },
                SyntheticKind::Suppressed => SyntheticUnitParams::SuppressedEnergy {
                    gabor: base,
                    suppressor: GaborSpec::centered(h, w, 90.0),
                    gain: *gain,
                },
            };
            let unit = make_synthetic_unit(&params, (h, w, c))?;
            Ok(vec![UnitTarget {
                id: format!("synthetic:{}", kind.name()),
                responder: Box::new(unit),
                stim_shape: (h, w, c),
            }])
        }
        UnitSource::Model { path, layer, units } => {
            let model = Arc::new(nnf1::read_model(path)?);
            let layer_name = match layer {
                Some(name) => name.clone(),
                None => model
                    .layers()
                    .last()
                    .map(|l| l.name.clone())
                    .ok_or_else(|| Error::Config("model has no layers".into()))?,
            };
            let channels = model.channels_at(&layer_name)?;
            let indices: Vec<usize> = match units {
                UnitSelection::All => (0..channels).collect(),
                UnitSelection::Indices(idx) => idx.clone(),
            };
            indices
                .into_iter()
                .map(|i| {
                    let probe = NetworkProbe::new(Arc::clone(&model), layer_name.clone(), i)?;
                    Ok(UnitTarget {
                        id: format!("{layer_name}:{i}"),
                        responder: Box::new(probe),
                        stim_shape: model.input_shape(),
                    })
                })
                .collect()
        }
    }
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Streams `samples` noise stimuli through the responder in fixed-size
/// chunks processed by a worker pool, merging partial accumulators in
/// ascending chunk order. The merge chain is a pure function of the
/// configuration, so results are bit-identical for any worker count.
pub fn accumulate_parallel(
    responder: &dyn Responder,
    noise: &NoiseSpec,
    crop: (usize, usize, usize),
    form: AwcForm,
    threads: usize,
    chunk: usize,
) -> Result<RevCorrAccumulator> {
    noise.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let n_chunks = noise.count.div_ceil(chunk);
    let mut total = RevCorrAccumulator::new(crop, form)?;
    pool.install(|| -> Result<()> {
        let mut wave_start = 0usize;
        while wave_start < n_chunks {
            let wave_end = (wave_start + threads).min(n_chunks);
            let partials: Vec<Result<RevCorrAccumulator>> = (wave_start..wave_end)
                .into_par_iter()
                .map(|ci| {
                    let mut acc = RevCorrAccumulator::new(crop, form)?;
                    let start = ci * chunk;
                    let end = (start + chunk).min(noise.count);
                    for i in start..end {
                        let stim = noise.sample(i as u64);
                        let r = responder.respond(&stim)?;
                        acc.accumulate(&stim, r)?;
                    }
                    Ok(acc)
                })
                .collect();
            for partial in partials {
                total.merge(&partial?)?;
            }
            wave_start = wave_end;
        }
        Ok(())
    })?;
    Ok(total)
}

/// Per-unit outcome of an analyze batch.
#[derive(Debug)]
pub enum UnitOutcome {
    /// Bank persisted at the given path.
    Persisted(PathBuf),
    /// All responses were zero; recorded, no bank emitted.
    WeakResponse,
    Failed(String),
}

pub struct AnalyzeReport {
    pub units: Vec<(String, UnitOutcome)>,
}

fn estimated_bytes(n: usize, threads: usize) -> u64 {
    (threads as u64 + 1) * RevCorrAccumulator::estimate_bytes(n)
}

/// Runs the analyze pipeline for every selected unit.
pub fn cmd_analyze(config: &RunConfig) -> Result<AnalyzeReport> {
    std::fs::create_dir_all(&config.out_dir)?;
    std::fs::write(config.out_dir.join("config.txt"), config.to_key_values())?;

    let n = config.crop.0 * config.crop.1 * config.crop.2;
    let estimate = estimated_bytes(n, config.threads);
    let budget = (config.mem_budget_gb * (1u64 << 30) as f64) as u64;
    if estimate > budget && !config.force {
        return Err(Error::Config(format!(
            "estimated accumulator memory {estimate} bytes exceeds budget {budget}; rerun with --force to proceed"
        )));
    }

    let units = resolve_units(config)?;
    let mut outcomes = Vec::new();
    let mut summary = String::new();
    for unit in &units {
        let outcome = analyze_unit(config, unit);
        let line = match &outcome {
            Ok(UnitOutcome::Persisted(path)) => format!("{} = ok {}", unit.id, path.display()),
            Ok(UnitOutcome::WeakResponse) => format!("{} = weak_response", unit.id),
            Ok(UnitOutcome::Failed(reason)) => format!("{} = failed {reason}", unit.id),
            Err(e) => format!("{} = failed {e}", unit.id),
        };
        summary.push_str(&line);
        summary.push('\n');
        println!("{line}");
        outcomes.push((
            unit.id.clone(),
            outcome.unwrap_or_else(|e| UnitOutcome::Failed(e.to_string())),
        ));
    }
    std::fs::write(config.out_dir.join("summary.txt"), &summary)?;

    // weak responses are expected per-unit outcomes; only a batch where
    // every unit failed outright is a batch failure
    let hard_failures =
        outcomes.iter().filter(|(_, o)| matches!(o, UnitOutcome::Failed(_))).count();
    if hard_failures == outcomes.len() && !outcomes.is_empty() {
        if let Some((id, UnitOutcome::Failed(reason))) =
            outcomes.iter().find(|(_, o)| matches!(o, UnitOutcome::Failed(_)))
        {
            return Err(Error::DegenerateVariance(format!(
                "every unit in the batch failed; first: {id}: {reason}"
            )));
        }
    }
    Ok(AnalyzeReport { units: outcomes })
}

fn analyze_unit(config: &RunConfig, unit: &UnitTarget) -> Result<UnitOutcome> {
    let noise = NoiseSpec {
        seed: config.seed,
        count: config.samples,
        shape: unit.stim_shape,
        mean: 0.0,
        std: 1.0,
    };
    let acc = accumulate_parallel(
        unit.responder.as_ref(),
        &noise,
        (config.crop.0, config.crop.1, unit.stim_shape.2),
        config.awc_form,
        config.threads,
        config.chunk,
    )?;

    let stem = sanitize(&unit.id);
    let meta_path = config.out_dir.join(format!("{stem}.meta.txt"));
    let awa = match acc.finalize_awa() {
        Ok(awa) => awa,
        Err(Error::WeakResponse) => {
            let meta = format!(
                "unit = {}\nstatus = weak_response\nseed = {}\nprng = {}\nsamples = {}\nchunk = {}\n",
                unit.id, config.seed, PRNG_NAME, config.samples, config.chunk
            );
            std::fs::write(&meta_path, meta)?;
            return Ok(UnitOutcome::WeakResponse);
        }
        Err(e) => return Err(e),
    };
    let awc = acc.finalize_awc()?;
    let dec = crate::revcorr::eig_sym(&awc)?;
    let bank = select_subfilters(awa, &dec, config.n_exc, config.n_sup, config.awc_form)?;

    let rfb1_path = config.out_dir.join(format!("{stem}.rfb1"));
    let meta = rfb1::BankMetadata {
        unit_id: unit.id.clone(),
        seed: config.seed,
        prng: PRNG_NAME.into(),
        chunk: config.chunk,
        n_excitatory: config.n_exc,
        n_suppressive: config.n_sup,
        mean_eigenvalue: dec.mean_eigenvalue,
    };
    rfb1::write_bank(&rfb1_path, &bank, &meta)?;
    Ok(UnitOutcome::Persisted(rfb1_path))
}

/// A fit report: the fitted cascade plus accuracy per stimulus class.
pub struct FitReport {
    pub unit_id: String,
    pub r_train: f64,
    pub r_test: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub r_noise: std::result::Result<f64, String>,
    pub r_gratings: std::result::Result<f64, String>,
    pub r_natural: Option<std::result::Result<f64, String>>,
    pub report_path: PathBuf,
}

fn cascade_filters(
    config: &RunConfig,
    bank: &SubFilterBank,
) -> Vec<LnFilter> {
    match config.bank_kind {
        BankKind::Awc => bank_filters(bank),
        BankKind::AwaOnly => awa_only_filters(bank),
        BankKind::Chance => {
            chance_filters(bank.crop(), bank.excitatory.len() + bank.suppressive.len(), config.seed)
        }
    }
}

/// Fits the LN cascade of a persisted bank. Fit stimuli come from
/// `--fit-on`; accuracy is reported for held-out noise, the grating
/// battery, and (with a manifest) natural images.
pub fn cmd_fit(config: &RunConfig, rfb1_path: &Path) -> Result<FitReport> {
    std::fs::create_dir_all(&config.out_dir)?;
    std::fs::write(config.out_dir.join("config.txt"), config.to_key_values())?;

    let (bank, bank_meta) = rfb1::read_bank(rfb1_path)?;
    let units = resolve_units(config)?;
    let unit = units.first().ok_or_else(|| Error::Config("no unit selected".into()))?;
    let crop = bank.crop();
    if unit.stim_shape.2 != crop.2 || unit.stim_shape.0 < crop.0 || unit.stim_shape.1 < crop.1 {
        return Err(Error::Shape(format!(
            "unit stimulus shape {:?} incompatible with bank crop {:?}",
            unit.stim_shape, crop
        )));
    }
    let filters = cascade_filters(config, &bank);
    let rect = config.rect;
    let respond = unit.responder.as_ref();

    // a stimulus pairs its full form (for probing) with its crop (for the
    // cascade regressors)
    let to_crop = |stim: &ImageTensor| -> Result<ImageTensor> {
        if stim.shape() == crop {
            Ok(stim.clone())
        } else {
            stim.center_crop(crop.0, crop.1)
        }
    };
    let collect_noise = |seed: u64, count: usize| -> Result<(Vec<ImageTensor>, Vec<f64>)> {
        let spec = NoiseSpec { seed, count, shape: unit.stim_shape, mean: 0.0, std: 1.0 };
        let mut cropped = Vec::with_capacity(count);
        let mut responses = Vec::with_capacity(count);
        for stim in crate::stimulus::gen_white_noise(&spec)? {
            responses.push(respond.respond(&stim)?);
            cropped.push(to_crop(&stim)?);
        }
        Ok((cropped, responses))
    };
    let collect_battery = || -> Result<(Vec<ImageTensor>, Vec<f64>)> {
        let battery = grating_battery(unit.stim_shape.0, unit.stim_shape.1, unit.stim_shape.2, 1.0, 0.0)?;
        let mut cropped = Vec::with_capacity(battery.len());
        let mut responses = Vec::with_capacity(battery.len());
        for (_, stim) in &battery {
            responses.push(respond.respond(stim)?);
            cropped.push(to_crop(stim)?);
        }
        Ok((cropped, responses))
    };
    let collect_natural = || -> Result<Option<(Vec<ImageTensor>, Vec<f64>)>> {
        let Some(manifest) = &config.manifest else { return Ok(None) };
        let set = load_image_set(manifest, (unit.stim_shape.0, unit.stim_shape.1))?;
        if set.image_shape().2 != unit.stim_shape.2 {
            return Err(Error::Shape(format!(
                "manifest images have {} channels, unit expects {}",
                set.image_shape().2,
                unit.stim_shape.2
            )));
        }
        let mut cropped = Vec::new();
        let mut responses = Vec::new();
        for (_, images) in set.categories() {
            for img in images {
                responses.push(respond.respond(img)?);
                cropped.push(to_crop(img)?);
            }
        }
        Ok(Some((cropped, responses)))
    };

    // fit source: seed+1 keeps fit noise disjoint from the analyze stream
    let fit_seed = config.seed.wrapping_add(1);
    let (mut fit_stimuli, mut fit_responses) = match config.fit_on {
        FitSource::Noise => collect_noise(fit_seed, config.samples)?,
        FitSource::Probes => {
            let (mut s, mut r) = collect_battery()?;
            if let Some((ns, nr)) = collect_natural()? {
                s.extend(ns);
                r.extend(nr);
            }
            (s, r)
        }
        FitSource::Both => {
            let (mut s, mut r) = collect_noise(fit_seed, config.samples)?;
            let (bs, br) = collect_battery()?;
            s.extend(bs);
            r.extend(br);
            if let Some((ns, nr)) = collect_natural()? {
                s.extend(ns);
                r.extend(nr);
            }
            (s, r)
        }
    };
    if fit_stimuli.is_empty() {
        return Err(Error::Config("fit source produced no stimuli".into()));
    }
    let outcome = split_fit(&filters, &fit_stimuli, &fit_responses, rect)?;
    fit_stimuli.clear();
    fit_responses.clear();

    // per-class evaluation with the fitted cascade
    let eval = |pairs: Result<(Vec<ImageTensor>, Vec<f64>)>| -> std::result::Result<f64, String> {
        match pairs {
            Ok((stims, actual)) => {
                let predicted: Result<Vec<f64>> = stims
                    .iter()
                    .map(|s| crate::lnmodel::predict(&outcome.fit, &filters, s, rect))
                    .collect();
                match predicted {
                    Ok(p) => pearson_r(&actual, &p).map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                }
            }
            Err(e) => Err(e.to_string()),
        }
    };
    let eval_seed = config.seed.wrapping_add(2);
    let eval_count = (config.samples / 4).max(512);
    let r_noise = eval(collect_noise(eval_seed, eval_count));
    let r_gratings = eval(collect_battery());
    let r_natural = match collect_natural() {
        Ok(None) => None,
        Ok(Some(pairs)) => Some(eval(Ok(pairs))),
        Err(e) => Some(Err(e.to_string())),
    };

    let stem = sanitize(&unit.id);
    let report_path = config.out_dir.join(format!("fit_{stem}.txt"));
    let mut text = String::new();
    text.push_str(&format!("unit = {}\nbank = {}\nbank_unit = {}\nbank_kind = {}\nawc_form = {}\nrect = {}\nfit_on = {}\n",
        unit.id,
        rfb1_path.display(),
        bank_meta.unit_id,
        config.bank_kind.name(),
        bank.form.name(),
        rect.name(),
        config.fit_on.name(),
    ));
    text.push_str(&format!("alpha = {}\n", outcome.fit.alpha));
    for (filter, weight) in filters.iter().zip(&outcome.fit.weights) {
        text.push_str(&format!(
            "weight.{} = {weight} ({})\n",
            filter.id,
            filter.nonlinearity.name()
        ));
    }
    let (beta, gamma) = outcome.fit.effective_gains();
    text.push_str(&format!("effective_beta = {beta}\neffective_gamma = {gamma}\n"));
    text.push_str(&format!(
        "r_train = {}\nr_test = {}\nn_train = {}\nn_test = {}\nseed = {}\nfit_seed = {}\neval_seed = {}\n",
        outcome.r_train, outcome.r_test, outcome.n_train, outcome.n_test, config.seed, fit_seed, eval_seed
    ));
    let fmt_r = |r: &std::result::Result<f64, String>| match r {
        Ok(v) => format!("{v}"),
        Err(reason) => format!("undefined ({reason})"),
    };
    text.push_str(&format!("r_noise = {}\n", fmt_r(&r_noise)));
    text.push_str(&format!("r_gratings = {}\n", fmt_r(&r_gratings)));
    if let Some(rn) = &r_natural {
        text.push_str(&format!("r_natural = {}\n", fmt_r(rn)));
    }
    std::fs::write(&report_path, &text)?;

    Ok(FitReport {
        unit_id: unit.id.clone(),
        r_train: outcome.r_train,
        r_test: outcome.r_test,
        n_train: outcome.n_train,
        n_test: outcome.n_test,
        r_noise,
        r_gratings,
        r_natural,
        report_path,
    })
}

pub struct TuneReport {
    pub tuning_csvs: Vec<PathBuf>,
    pub histogram_csvs: Vec<PathBuf>,
    pub category_reports: Vec<PathBuf>,
}

/// Tuning maps, response histograms, and (with a manifest) category
/// selectivity for every selected unit. The Bonferroni divisor is the
/// number of units in the batch.
pub fn cmd_tune(config: &RunConfig) -> Result<TuneReport> {
    std::fs::create_dir_all(&config.out_dir)?;
    std::fs::write(config.out_dir.join("config.txt"), config.to_key_values())?;

    let units = resolve_units(config)?;
    let mut report =
        TuneReport { tuning_csvs: Vec::new(), histogram_csvs: Vec::new(), category_reports: Vec::new() };

    let image_set = match &config.manifest {
        Some(manifest) => {
            let first = units.first().ok_or_else(|| Error::Config("no unit selected".into()))?;
            let set = load_image_set(manifest, (first.stim_shape.0, first.stim_shape.1))?;
            if set.image_shape().2 != first.stim_shape.2 {
                return Err(Error::Shape(format!(
                    "manifest images have {} channels, units expect {}",
                    set.image_shape().2,
                    first.stim_shape.2
                )));
            }
            Some(set)
        }
        None => None,
    };

    let mut per_unit_groups = Vec::new();
    for unit in &units {
        let stem = sanitize(&unit.id);
        let battery =
            grating_battery(unit.stim_shape.0, unit.stim_shape.1, unit.stim_shape.2, 1.0, 0.0)?;
        let map =
            orientation_sf_map(unit.responder.as_ref(), &battery, PhaseAverage::RectifiedMean)?;
        let tuning_path = config.out_dir.join(format!("tuning_{stem}.csv"));
        std::fs::write(&tuning_path, map.to_csv())?;
        report.tuning_csvs.push(tuning_path);

        let noise = NoiseSpec {
            seed: config.seed,
            count: config.samples,
            shape: unit.stim_shape,
            mean: 0.0,
            std: 1.0,
        };
        let hist = response_distribution(unit.responder.as_ref(), &noise, config.bins)?;
        let hist_path = config.out_dir.join(format!("histogram_{stem}.csv"));
        std::fs::write(&hist_path, hist.to_csv())?;
        report.histogram_csvs.push(hist_path);

        if let Some(set) = &image_set {
            let groups = category_responses(unit.responder.as_ref(), set)?;
            per_unit_groups.push((stem, groups));
        }
    }

    if !per_unit_groups.is_empty() {
        let alpha = 0.01;
        let m = per_unit_groups.len();
        let mut stats = Vec::new();
        for (_, groups) in &per_unit_groups {
            let vectors: Vec<Vec<f64>> = groups.iter().map(|(_, v)| v.clone()).collect();
            stats.push(one_way_anova(&vectors)?);
        }
        let flags = bonferroni(&stats.iter().map(|(_, p)| *p).collect::<Vec<_>>(), alpha);
        for (((stem, groups), (f, p)), significant) in
            per_unit_groups.iter().zip(&stats).zip(&flags)
        {
            let path = config.out_dir.join(format!("category_{stem}.txt"));
            std::fs::write(&path, category_report(groups, *f, *p, *significant, m, alpha))?;
            report.category_reports.push(path);
        }
    }
    Ok(report)
}

/// Renders each stored filter of a bank, channel by channel, as P5
/// graymaps with min/max linearly mapped to 0–255 (constant filters map
/// to mid-gray); the per-image ranges go to a sidecar.
pub fn cmd_export(rfb1_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let (bank, _) = rfb1::read_bank(rfb1_path)?;
    std::fs::create_dir_all(out_dir)?;
    let stem = rfb1_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bank".into());

    let mut named: Vec<(String, &ImageTensor)> = vec![("awa".into(), &bank.awa.values)];
    for (i, (values, _)) in bank.excitatory.iter().enumerate() {
        named.push((format!("exc{:02}", i + 1), values));
    }
    for (i, (values, _)) in bank.suppressive.iter().enumerate() {
        named.push((format!("sup{:02}", i + 1), values));
    }

    let mut written = Vec::new();
    let mut ranges = String::new();
    for (id, tensor) in named {
        let (h, w, c) = tensor.shape();
        for ch in 0..c {
            let plane = tensor.channel(ch);
            let lo = plane.iter().cloned().fold(f64::MAX, f64::min);
            let hi = plane.iter().cloned().fold(f64::MIN, f64::max);
            let bytes: Vec<u8> = if hi == lo {
                vec![128u8; plane.len()]
            } else {
                plane
                    .iter()
                    .map(|v| ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8)
                    .collect()
            };
            let path = out_dir.join(format!("{stem}_{id}_c{ch}.pgm"));
            pnm::write_p5(&path, h, w, &bytes)?;
            ranges.push_str(&format!("{id}.c{ch} = {lo} {hi}\n"));
            written.push(path);
        }
    }
    std::fs::write(out_dir.join(format!("{stem}_ranges.txt")), ranges)?;
    Ok(written)
}

/// Entry point for the `rfprobe` binary: parses argv, dispatches, and
/// maps failures onto the documented exit codes (0 success, 1 usage,
/// 2 ingestion/IO, 3 numerical/degenerate).
pub fn run() -> i32 {
    let args = match CliArgs::try_parse() {
        Ok(args) => args,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome: Result<()> = (|| {
        match &args.command {
            Command::Analyze(flags) => {
                let config = RunConfig::resolve(flags)?;
                cmd_analyze(&config)?;
            }
            Command::Fit { rfb1, common } => {
                let config = RunConfig::resolve(common)?;
                let report = cmd_fit(&config, rfb1)?;
                println!(
                    "fit {}: r_train = {:.4}, r_test = {:.4} → {}",
                    report.unit_id,
                    report.r_train,
                    report.r_test,
                    report.report_path.display()
                );
            }
            Command::Tune(flags) => {
                let config = RunConfig::resolve(flags)?;
                let report = cmd_tune(&config)?;
                println!(
                    "tune: {} tuning maps, {} histograms, {} category reports",
                    report.tuning_csvs.len(),
                    report.histogram_csvs.len(),
                    report.category_reports.len()
                );
            }
            Command::Export { rfb1, out } => {
                let written = cmd_export(rfb1, out)?;
                println!("export: {} filter images → {}", written.len(), out.display());
            }
        }
        Ok(())
    })();
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rfprobe: {e}");
            e.exit_code()
        }
    }
}
