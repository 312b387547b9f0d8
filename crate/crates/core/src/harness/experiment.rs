//! End-to-end forecasting experiments on the chaotic benchmarks.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{mse, nmse};
use crate::belpm::BelpmModel;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::learning::{train_phase1, train_phase2, LearningHistory};
use crate::series::{
    add_noise, embed, generate_henon, generate_lorenz, split, EmbeddedDataset, HenonParams, LorenzParams,
    TimeSeries, HENON_DT,
};
use crate::wknn::WknnRegressor;

pub const REPORT_FORMAT: &str = "belpm-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Lorenz,
    Henon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    pub enabled: bool,
    /// Neighbor count; defaults to the model's `k_a`.
    pub k: Option<usize>,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self { enabled: true, k: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub system: System,
    /// Integration step of the Lorenz system; Hénon samples are `0.01 s` apart.
    pub dt: f64,
    pub noise_std: f64,
    pub seed: u64,
    /// Time, in seconds, of the first training input's most recent sample.
    pub start_time: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub n_val: usize,
    pub horizons: Vec<usize>,
    pub dim: usize,
    pub lag: usize,
    /// Keep test predictions in the report.
    pub keep_predictions: bool,
    /// `(k_a, k_o)` pairs for a structure comparison run by the CLI.
    pub sweep: Vec<(usize, usize)>,
    pub model: ModelConfig,
    pub baseline: BaselineSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::lorenz_long_horizon()
    }
}

impl ExperimentSpec {
    /// Lorenz x from t = 32 s: 500 training pairs, the next 1400 as test, 30 steps ahead.
    pub fn lorenz_long_horizon() -> Self {
        Self {
            name: "lorenz".into(),
            system: System::Lorenz,
            dt: 0.01,
            noise_std: 0.0,
            seed: 0,
            start_time: 32.0,
            n_train: 500,
            n_test: 1400,
            n_val: 0,
            horizons: vec![30],
            dim: 3,
            lag: 1,
            keep_predictions: false,
            sweep: Vec::new(),
            model: ModelConfig::default(),
            baseline: BaselineSpec::default(),
        }
    }

    /// Hénon x from t = 9 s: 800 training pairs, the next 100 as test, 3 steps ahead.
    pub fn henon_short_horizon() -> Self {
        Self {
            name: "henon".into(),
            system: System::Henon,
            start_time: 9.0,
            n_train: 800,
            n_test: 100,
            horizons: vec![3],
            ..Self::lorenz_long_horizon()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad("horizons must be a non-empty list of positive step counts".into());
        }
        if self.n_train < 2 || self.n_test < 2 {
            return bad(format!("need at least 2 training and 2 test pairs, got {} and {}", self.n_train, self.n_test));
        }
        if self.dim == 0 || self.lag == 0 {
            return bad("dim and lag must be at least 1".into());
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad(format!("noise_std must be non-negative, got {}", self.noise_std));
        }
        if self.system == System::Lorenz && (!(self.dt > 0.0) || !self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.start_time >= 0.0) || !self.start_time.is_finite() {
            return bad(format!("start_time must be non-negative, got {}", self.start_time));
        }
        self.model.kernel()?;
        Ok(())
    }

    fn sample_dt(&self) -> f64 {
        match self.system {
            System::Lorenz => self.dt,
            System::Henon => HENON_DT,
        }
    }

    /// Index of the first training pair's most recent input sample.
    fn first_index(&self) -> usize {
        let start = (self.start_time / self.sample_dt()).round() as usize;
        start.max((self.dim - 1) * self.lag)
    }

    fn n_pairs(&self) -> usize {
        self.n_train + self.n_test + self.n_val
    }

    /// Generates the (possibly noisy) series every horizon is cut from.
    pub fn generate(&self) -> Result<TimeSeries> {
        let max_h = self.horizons.iter().copied().max().unwrap_or(1);
        let n = self.first_index() + self.n_pairs() + max_h;
        let clean = match self.system {
            System::Lorenz => generate_lorenz(&LorenzParams::default(), self.dt, n)?,
            System::Henon => generate_henon(&HenonParams::default(), n)?,
        };
        add_noise(&clean, self.noise_std, self.seed)
    }

    /// Train, test and validation pairs for one horizon.
    pub fn datasets(&self, series: &TimeSeries, horizon: usize) -> Result<(EmbeddedDataset, EmbeddedDataset, EmbeddedDataset)> {
        let offset = self.first_index() - (self.dim - 1) * self.lag;
        let ds = embed(&series.skip(offset)?, self.dim, self.lag, horizon)?;
        split(&ds, self.n_train, self.n_test, self.n_val)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Absent when the test target is constant.
    pub nmse: Option<f64>,
    pub mse: f64,
}

impl Metrics {
    pub fn compute(predicted: &[f64], target: &[f64]) -> Result<Self> {
        Ok(Self { nmse: nmse(predicted, target).ok(), mse: mse(predicted, target)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub b_a: Vec<f64>,
    pub b_o: Vec<f64>,
    pub w: [f64; 3],
    pub w_a: [f64; 3],
    pub w_o: [f64; 2],
}

impl From<&BelpmModel> for ModelParameters {
    fn from(m: &BelpmModel) -> Self {
        Self { b_a: m.b_a.clone(), b_o: m.b_o.clone(), w: m.w, w_a: m.w_a, w_o: m.w_o }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub stage: String,
    pub message: String,
    /// CLI exit code this failure maps to.
    pub code: i32,
}

impl RowError {
    fn new(stage: &str, e: &Error) -> Self {
        Self { stage: stage.into(), message: e.to_string(), code: e.exit_code() }
    }
}

/// Everything measured for one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonResult {
    pub horizon: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_val: usize,
    /// Headline BELPM metrics: after online adaptation when it ran, otherwise right after phase 1.
    pub belpm: Option<Metrics>,
    /// Metrics right after phase 1.
    pub flp: Option<Metrics>,
    /// Metrics of the online pass over the test stream.
    pub slp: Option<Metrics>,
    pub wknn: Option<Metrics>,
    pub wknn_k: Option<usize>,
    pub phase2_epoch_nmse: Vec<Option<f64>>,
    pub parameters: Option<ModelParameters>,
    pub history: Option<LearningHistory>,
    pub predictions: Option<Vec<f64>>,
    pub targets: Option<Vec<f64>>,
    pub errors: Vec<RowError>,
}

/// Wall-clock seconds per stage, kept out of the report so reports stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HorizonTiming {
    pub horizon: usize,
    pub train_seconds: Option<f64>,
    pub predict_seconds: Option<f64>,
    pub phase2_seconds: Option<f64>,
    pub baseline_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub spec: ExperimentSpec,
    pub results: Vec<HorizonResult>,
    #[serde(skip)]
    pub timing: Vec<HorizonTiming>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn timing_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&self.timing)?;
        text.push('\n');
        Ok(text)
    }

    pub fn errors(&self) -> impl Iterator<Item = &RowError> {
        self.results.iter().flat_map(|r| &r.errors)
    }

    pub fn failed(&self) -> bool {
        self.errors().next().is_some()
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

struct BelpmOutcome {
    flp: Metrics,
    slp: Option<(Metrics, Vec<f64>, Vec<Option<f64>>)>,
    flp_predictions: Vec<f64>,
    parameters: ModelParameters,
    history: LearningHistory,
}

fn run_belpm(
    spec: &ExperimentSpec,
    train: &EmbeddedDataset,
    test: &EmbeddedDataset,
    val: &EmbeddedDataset,
    timing: &mut HorizonTiming,
) -> Result<BelpmOutcome> {
    let cfg = spec.model.train_config();
    let kernel = spec.model.kernel()?;
    let (trained, secs) = timed(|| {
        let mut model = BelpmModel::new(train, spec.model.k_a, spec.model.k_o, kernel)?;
        let history = train_phase1(&mut model, Some(val), &cfg)?;
        Ok((model, history))
    });
    timing.train_seconds = Some(secs);
    let (model, history) = trained?;

    // warm-up query, excluded from the timing
    model.predict(&test.inputs[0])?;
    let (flp_predictions, secs) = timed(|| model.predict_all(&test.inputs));
    timing.predict_seconds = Some(secs);
    let flp_predictions = flp_predictions?;
    let flp = Metrics::compute(&flp_predictions, &test.targets)?;

    let slp = if cfg.phase2_epochs > 0 {
        let mut adapted = model.clone();
        let (trace, secs) = timed(|| train_phase2(&mut adapted, test, &cfg));
        timing.phase2_seconds = Some(secs);
        let trace = trace?;
        let m = Metrics::compute(&trace.predictions, &test.targets)?;
        Some((m, trace.predictions, trace.epoch_nmse))
    } else {
        None
    };
    Ok(BelpmOutcome { flp, slp, flp_predictions, parameters: ModelParameters::from(&model), history })
}

fn run_horizon(spec: &ExperimentSpec, series: &TimeSeries, horizon: usize) -> (HorizonResult, HorizonTiming) {
    let mut timing = HorizonTiming { horizon, ..Default::default() };
    let mut result = HorizonResult {
        horizon,
        n_train: spec.n_train,
        n_test: spec.n_test,
        n_val: spec.n_val,
        belpm: None,
        flp: None,
        slp: None,
        wknn: None,
        wknn_k: None,
        phase2_epoch_nmse: Vec::new(),
        parameters: None,
        history: None,
        predictions: None,
        targets: None,
        errors: Vec::new(),
    };
    let (train, test, val) = match spec.datasets(series, horizon) {
        Ok(sets) => sets,
        Err(e) => {
            result.errors.push(RowError::new("data", &e));
            return (result, timing);
        }
    };

    match run_belpm(spec, &train, &test, &val, &mut timing) {
        Ok(out) => {
            result.flp = Some(out.flp);
            let predictions = match out.slp {
                Some((m, preds, curve)) => {
                    result.slp = Some(m);
                    result.belpm = Some(m);
                    result.phase2_epoch_nmse = curve;
                    preds
                }
                None => {
                    result.belpm = Some(out.flp);
                    out.flp_predictions
                }
            };
            result.parameters = Some(out.parameters);
            result.history = Some(out.history);
            if spec.keep_predictions {
                result.predictions = Some(predictions);
                result.targets = Some(test.targets.clone());
            }
        }
        Err(e) => result.errors.push(RowError::new("belpm", &e)),
    }

    if spec.baseline.enabled {
        let k = spec.baseline.k.unwrap_or(spec.model.k_a);
        result.wknn_k = Some(k);
        let (wknn, secs) = timed(|| {
            let reg = WknnRegressor::with_heuristic_b(train.clone(), k, spec.model.kernel()?)?;
            Metrics::compute(&reg.predict_all(&test.inputs)?, &test.targets)
        });
        timing.baseline_seconds = Some(secs);
        match wknn {
            Ok(m) => result.wknn = Some(m),
            Err(e) => result.errors.push(RowError::new("wknn", &e)),
        }
    }
    (result, timing)
}

/// Generates the data, then for each horizon trains BELPM, evaluates it on the
/// test pairs before and after online adaptation, and scores the Wk-NN baseline
/// on the same split.
///
/// Failures inside a horizon are recorded in that horizon's `errors` and do not
/// stop the others. An invalid spec or a diverging generator fails the whole run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let series = spec.generate()?;
    let (results, timing) = spec.horizons.iter().map(|&h| run_horizon(spec, &series, h)).unzip();
    Ok(ExperimentReport { format: REPORT_FORMAT.into(), spec: spec.clone(), results, timing })
}

/// One structure of a comparison sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureRow {
    pub k_a: usize,
    pub k_o: usize,
    pub report: Option<ExperimentReport>,
    pub error: Option<String>,
}

impl StructureRow {
    /// Headline BELPM NMSE of the first horizon.
    pub fn nmse(&self) -> Option<f64> {
        self.report.as_ref()?.results.first()?.belpm?.nmse
    }

    pub fn errored(&self) -> bool {
        self.error.is_some()
    }
}

/// Runs `spec` once per `(k_a, k_o)`; a failing structure is marked without
/// affecting the others.
pub fn compare_structures(spec: &ExperimentSpec, sweep: &[(usize, usize)]) -> Result<Vec<StructureRow>> {
    if sweep.is_empty() {
        return Err(Error::arg("structure sweep is empty"));
    }
    spec.validate()?;
    Ok(sweep
        .par_iter()
        .map(|&(k_a, k_o)| {
            let mut s = spec.clone();
            s.model.k_a = k_a;
            s.model.k_o = k_o;
            s.sweep.clear();
            match run_experiment(&s) {
                Ok(report) => {
                    let error = report.errors().next().map(|e| format!("{}: {}", e.stage, e.message));
                    StructureRow { k_a, k_o, report: Some(report), error }
                }
                Err(e) => StructureRow { k_a, k_o, report: None, error: Some(e.to_string()) },
            }
        })
        .collect())
}

/// `(max − min) / min` of the structures' NMSE values, ignoring errored rows.
pub fn relative_spread(rows: &[StructureRow]) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter(|r| !r.errored()).filter_map(StructureRow::nmse).collect();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (!v.is_empty() && min > 0.0).then(|| (max - min) / min)
}
