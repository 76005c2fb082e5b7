//! Config-driven command-line front end: parses the analysis config,
//! orchestrates the full pipeline, and emits machine-readable results.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.
//! All outputs are written atomically (temp file + rename) and are
//! byte-identical across reruns with the same config and seed.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::augmented::{AugmentedSpace, AuxKind, BaseDesign, PhantomMode};
use crate::distributions::{FamilyKind, HyperParamBox, Parameterization, ParametricPBox};
use crate::error::{Error, Result};
use crate::imprecise::{self, IndexOrder, SobolInterval, SplitIndexSet};
use crate::models::{registry_lookup, TestModel};
use crate::optimizer::OptimizerConfig;
use crate::oracle;
use crate::pce::{self, ExperimentalDesign, FitDiagnostics, PceModel, Selection};
use crate::seeding;

// ---------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------

/// Scalar for precise parameters, `[lower, upper]` for epistemic intervals.
#[derive(Debug, Clone, Copy, serde::Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Interval([f64; 2]),
}

impl ParamValue {
    fn interval(self) -> (f64, f64) {
        match self {
            ParamValue::Scalar(v) => (v, v),
            ParamValue::Interval([lo, hi]) => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub name: String,
    pub family: FamilyKind,
    /// Defaults to the family's standard parameterization.
    #[serde(default)]
    pub parameterization: Option<Parameterization>,
    pub params: BTreeMap<String, ParamValue>,
    /// "auto" (family-matched) or "uniform" (CDF-coordinate route).
    #[serde(default)]
    pub aux: Option<String>,
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCfg {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "default_n_ph")]
    pub n_ph: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub phantom_mode: PhantomMode,
}

fn default_n_ph() -> usize {
    10
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PceCfg {
    pub p_max: usize,
    pub q: f64,
    pub selection: Selection,
    /// Warn when the corrected leave-one-out error exceeds this.
    pub loo_target: f64,
}

impl Default for PceCfg {
    fn default() -> Self {
        Self {
            p_max: 10,
            q: 1.0,
            selection: Selection::Lars,
            loo_target: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Default, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerCfg {
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
}

impl OptimizerCfg {
    fn build(&self, design_seed: u64) -> OptimizerConfig {
        let defaults = OptimizerConfig::default();
        OptimizerConfig {
            population: self.population.unwrap_or(defaults.population),
            generations: self.generations.unwrap_or(defaults.generations),
            restarts: self.restarts.unwrap_or(defaults.restarts),
            seed: self.seed.unwrap_or_else(|| seeding::derive(design_seed, 0x0f)),
            ..defaults
        }
    }
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationCfg {
    #[serde(default = "default_validation_points")]
    pub n_points: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_validation_points() -> usize {
    100_000
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleCfg {
    pub n: usize,
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for OracleCfg {
    fn default() -> Self {
        Self {
            n: 100_000,
            grid_points: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsCfg {
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["json".into(), "csv".into()]
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub model: String,
    pub inputs: Vec<InputSpec>,
    pub design: DesignCfg,
    #[serde(default)]
    pub pce: PceCfg,
    #[serde(default)]
    pub optimizer: OptimizerCfg,
    #[serde(default)]
    pub validation: Option<ValidationCfg>,
    #[serde(default)]
    pub oracle: Option<OracleCfg>,
    pub outputs: OutputsCfg,
}

impl AnalysisConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {path:?}: {e}")))?;
        let mut cfg: AnalysisConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {path:?}: {e}")))?;
        cfg.resolve_model_path(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes a relative `truss:<file>` reference resolvable from anywhere
    /// by anchoring it at the config file's directory.
    pub fn resolve_model_path(&mut self, base: &Path) {
        if let Some(rel) = self.model.strip_prefix("truss:") {
            let p = Path::new(rel);
            if p.is_relative() {
                self.model = format!("truss:{}", base.join(p).display());
            }
        }
    }
}

// ---------------------------------------------------------------------
// Config → analysis objects
// ---------------------------------------------------------------------

/// Validated analysis: the model, the p-boxes, and the augmented space.
pub struct Analysis {
    pub cfg: AnalysisConfig,
    pub model: TestModel,
    pub space: AugmentedSpace,
    pub opt_cfg: OptimizerConfig,
}

fn build_pbox(spec: &InputSpec) -> Result<ParametricPBox> {
    let parameterization = spec
        .parameterization
        .unwrap_or_else(|| Parameterization::default_for(spec.family));
    let names = parameterization.param_names(spec.family)?;
    let mut intervals = Vec::with_capacity(names.len());
    for name in names {
        let value = spec.params.get(name).ok_or_else(|| {
            Error::Config(format!(
                "input {}: missing parameter \"{name}\" (expected {names:?})",
                spec.name
            ))
        })?;
        intervals.push(value.interval());
    }
    if spec.params.len() != names.len() {
        let extra: Vec<&String> = spec
            .params
            .keys()
            .filter(|k| !names.contains(&k.as_str()))
            .collect();
        return Err(Error::Config(format!(
            "input {}: unknown parameters {extra:?} (expected {names:?})",
            spec.name
        )));
    }
    ParametricPBox::new(spec.family, parameterization, HyperParamBox::new(intervals)?)
        .map_err(|e| Error::Config(format!("input {}: {e}", spec.name)))
}

/// Validates the whole configuration and assembles the analysis objects.
/// Every failure here is a configuration error (exit code 1).
pub fn prepare(mut cfg: AnalysisConfig, seed_override: Option<u64>) -> Result<Analysis> {
    if let Some(seed) = seed_override {
        cfg.design.seed = seed;
    }
    if cfg.design.n == 0 {
        return Err(Error::Config("design.N must be at least 1".into()));
    }
    if cfg.design.n_ph == 0 {
        return Err(Error::Config("design.n_ph must be at least 1".into()));
    }
    if !(cfg.pce.q > 0.0 && cfg.pce.q <= 1.0) {
        return Err(Error::Config(format!("pce.q must lie in (0, 1], got {}", cfg.pce.q)));
    }
    if cfg.pce.p_max < 1 {
        return Err(Error::Config("pce.p_max must be at least 1".into()));
    }
    let model = registry_lookup(&cfg.model).map_err(|e| Error::Config(e.to_string()))?;
    if cfg.inputs.len() != model.input_dim() {
        return Err(Error::Config(format!(
            "model {} expects {} inputs, config declares {}",
            cfg.model,
            model.input_dim(),
            cfg.inputs.len()
        )));
    }
    let mut blocks = Vec::with_capacity(cfg.inputs.len());
    for spec in &cfg.inputs {
        let pbox = build_pbox(spec)?;
        let aux = match spec.aux.as_deref() {
            None | Some("auto") => None,
            Some("uniform") => Some(AuxKind::UnitUniform),
            Some(other) => {
                return Err(Error::Config(format!(
                    "input {}: aux must be \"auto\" or \"uniform\", got \"{other}\"",
                    spec.name
                )))
            }
        };
        blocks.push((spec.name.clone(), pbox, aux));
    }
    let space = AugmentedSpace::with_aux(blocks).map_err(|e| Error::Config(e.to_string()))?;
    let opt_cfg = cfg.optimizer.build(cfg.design.seed);
    Ok(Analysis {
        cfg,
        model,
        space,
        opt_cfg,
    })
}

// ---------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------

/// Everything produced by the fitting stage.
pub struct FitOutcome {
    pub base: BaseDesign,
    pub design: ExperimentalDesign,
    pub pce_model: PceModel,
    pub diagnostics: FitDiagnostics,
    /// Model evaluations consumed by the experimental design.
    pub design_evaluations: u64,
    pub err_gen: Option<f64>,
    /// Model evaluations consumed by validation (not part of the budget).
    pub validation_evaluations: u64,
}

pub fn run_fit(analysis: &Analysis) -> Result<FitOutcome> {
    let cfg = &analysis.cfg;
    let space = &analysis.space;
    analysis.model.reset_count();
    let base = space.sample_design(cfg.design.n, cfg.design.seed)?;
    let responses: Vec<f64> = base
        .phys
        .iter()
        .map(|x| analysis.model.evaluate(x))
        .collect::<Result<Vec<_>>>()?;
    let design_evaluations = analysis.model.eval_count();
    let design = space.build_design(
        &base,
        &responses,
        cfg.design.n_ph,
        cfg.design.seed,
        cfg.design.phantom_mode,
    )?;
    let bases = space.bases();
    let layout = space.layout();
    let (pce_model, diagnostics) = pce::degree_adaptive_fit(
        &design,
        &bases,
        &layout,
        cfg.pce.p_max,
        cfg.pce.q,
        cfg.pce.selection,
    )?;

    let mut err_gen = None;
    let mut validation_evaluations = 0;
    if let Some(val) = &cfg.validation {
        let before = analysis.model.eval_count();
        let sample = space.sample_monte_carlo(val.n_points, val.seed)?;
        let truth: Vec<f64> = sample
            .phys
            .iter()
            .map(|x| analysis.model.evaluate(x))
            .collect::<Result<Vec<_>>>()?;
        err_gen = Some(pce::rel_gen_error(&pce_model, &sample.aug, &truth)?);
        validation_evaluations = analysis.model.eval_count() - before;
    }

    Ok(FitOutcome {
        base,
        design,
        pce_model,
        diagnostics,
        design_evaluations,
        err_gen,
        validation_evaluations,
    })
}

/// First-order and total intervals for one input, with pinched values.
pub struct InputIndices {
    pub name: String,
    pub first: SobolInterval,
    pub total: SobolInterval,
    pub first_pinched: f64,
    pub total_pinched: f64,
}

pub fn run_bounds(analysis: &Analysis, fit: &FitOutcome) -> Result<(SplitIndexSet, Vec<InputIndices>)> {
    let split = imprecise::split_indices(&fit.pce_model);
    let pinch = vec![0.0; split.n_theta()];
    let mut out = Vec::with_capacity(analysis.space.n_inputs());
    for (i, name) in analysis.space.input_names().iter().enumerate() {
        let first = imprecise::sobol_bounds(
            &split,
            &fit.pce_model,
            &[i],
            IndexOrder::First,
            &analysis.opt_cfg,
        )?;
        let total = imprecise::sobol_bounds(
            &split,
            &fit.pce_model,
            &[i],
            IndexOrder::Total,
            &analysis.opt_cfg,
        )?;
        let first_pinched =
            imprecise::conditional_sobol(&split, &fit.pce_model, &[i], &pinch, IndexOrder::First)?;
        let total_pinched =
            imprecise::conditional_sobol(&split, &fit.pce_model, &[i], &pinch, IndexOrder::Total)?;
        out.push(InputIndices {
            name: (*name).to_string(),
            first,
            total,
            first_pinched,
            total_pinched,
        });
    }
    Ok((split, out))
}

// ---------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------

/// Rounds to 12 significant digits so serialized results are stable.
fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn num(x: f64) -> Value {
    json!(sig12(x))
}

fn interval_json(lo: f64, hi: f64) -> Value {
    json!([sig12(lo), sig12(hi)])
}

fn theta_json(space: &AugmentedSpace, theta_std: &[f64]) -> Value {
    let pairs = space.theta_to_physical(theta_std);
    Value::Array(
        pairs
            .into_iter()
            .map(|(name, value)| json!({"param": name, "value": sig12(value)}))
            .collect(),
    )
}

/// Writes `content` atomically (temp file in the same directory + rename).
fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, &text)
}

fn csv_number(x: f64) -> String {
    format!("{:.12e}", sig12(x))
}

fn write_design_csv(
    path: &Path,
    space: &AugmentedSpace,
    base: &BaseDesign,
    design: &ExperimentalDesign,
) -> Result<()> {
    let mut text = String::new();
    let dim_names = space.dim_names();
    let input_names = space.input_names();
    text.push_str("run_id");
    for n in &dim_names {
        text.push_str(&format!(",v:{n}"));
    }
    for n in &input_names {
        text.push_str(&format!(",x:{n}"));
    }
    text.push_str(",response\n");
    for i in 0..design.n_rows() {
        let run = design.run_ids()[i];
        text.push_str(&run.to_string());
        for v in design.point(i) {
            text.push_str(&format!(",{}", csv_number(*v)));
        }
        for x in &base.phys[run] {
            text.push_str(&format!(",{}", csv_number(*x)));
        }
        text.push_str(&format!(",{}\n", csv_number(design.responses()[i])));
    }
    write_atomic(path, &text)
}

fn write_barplot_csv(path: &Path, indices: &[InputIndices]) -> Result<()> {
    let mut text = String::from("input,order,lower,upper,pinched\n");
    for idx in indices {
        text.push_str(&format!(
            "{},first,{},{},{}\n",
            idx.name,
            csv_number(idx.first.lower),
            csv_number(idx.first.upper),
            csv_number(idx.first_pinched),
        ));
        text.push_str(&format!(
            "{},total,{},{},{}\n",
            idx.name,
            csv_number(idx.total.lower),
            csv_number(idx.total.upper),
            csv_number(idx.total_pinched),
        ));
    }
    write_atomic(path, &text)
}

fn write_impact_csv(path: &Path, indices: &[InputIndices]) -> Result<()> {
    let mut text = String::from("input,central,epistemic\n");
    for idx in indices {
        let central = 0.5 * (idx.first.upper + idx.first.lower);
        let width = idx.first.upper - idx.first.lower;
        text.push_str(&format!(
            "{},{},{}\n",
            idx.name,
            csv_number(central),
            csv_number(width)
        ));
    }
    write_atomic(path, &text)
}

fn design_json(cfg: &AnalysisConfig, fit: &FitOutcome) -> Value {
    json!({
        "N": cfg.design.n,
        "n_ph": cfg.design.n_ph,
        "seed": cfg.design.seed,
        "phantom_mode": serde_json::to_value(cfg.design.phantom_mode).unwrap(),
        "rows": fit.design.n_rows(),
        "model_evaluations": fit.design_evaluations,
        "validation_evaluations": fit.validation_evaluations,
    })
}

fn pce_json(cfg: &AnalysisConfig, fit: &FitOutcome) -> Value {
    json!({
        "selection": serde_json::to_value(cfg.pce.selection).unwrap(),
        "p_max": cfg.pce.p_max,
        "q": num(cfg.pce.q),
        "degree": fit.diagnostics.degree,
        "candidate_size": fit.diagnostics.candidate_size,
        "terms": fit.diagnostics.selected_terms,
        "loo": num(fit.diagnostics.loo),
        "loo_corrected": num(fit.diagnostics.loo_corrected),
        "err_gen": fit.err_gen.map(num).unwrap_or(Value::Null),
        "mean": num(fit.pce_model.mean()),
        "variance": num(fit.pce_model.variance()),
    })
}

fn warnings_json(cfg: &AnalysisConfig, fit: &FitOutcome) -> (Vec<String>, Value) {
    let mut warnings = Vec::new();
    if fit.diagnostics.loo_corrected > cfg.pce.loo_target {
        warnings.push(format!(
            "corrected leave-one-out error {:.3e} exceeds the target {:.1e}; \
             index bounds may be unreliable (intervals from under-fit \
             surrogates tend to collapse)",
            fit.diagnostics.loo_corrected, cfg.pce.loo_target
        ));
    }
    let v = Value::Array(warnings.iter().map(|w| json!(w)).collect());
    (warnings, v)
}

// ---------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------

fn ensure_output_dir(cfg: &AnalysisConfig) -> Result<PathBuf> {
    let dir = cfg.outputs.dir.clone();
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn wants(cfg: &AnalysisConfig, format: &str) -> bool {
    cfg.outputs.formats.iter().any(|f| f == format)
}

/// Full pipeline: fit, optimize bounds, write results.
pub fn cmd_bounds(analysis: &Analysis, verbose: bool) -> Result<()> {
    let cfg = &analysis.cfg;
    let dir = ensure_output_dir(cfg)?;
    let fit = run_fit(analysis)?;
    if verbose {
        eprintln!(
            "fit: degree {} with {} terms, corrected LOO {:.3e}",
            fit.diagnostics.degree, fit.diagnostics.selected_terms, fit.diagnostics.loo_corrected
        );
    }
    let (_split, indices) = run_bounds(analysis, &fit)?;
    let (warnings, warnings_value) = warnings_json(cfg, &fit);
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let indices_json: Vec<Value> = indices
        .iter()
        .map(|idx| {
            json!({
                "input": idx.name,
                "first": interval_json(idx.first.lower, idx.first.upper),
                "total": interval_json(idx.total.lower, idx.total.upper),
                "first_pinched": num(idx.first_pinched),
                "total_pinched": num(idx.total_pinched),
                "first_central": num(0.5 * (idx.first.lower + idx.first.upper)),
                "first_epistemic": num(idx.first.upper - idx.first.lower),
                "argmin_first": theta_json(&analysis.space, &idx.first.argmin_theta),
                "argmax_first": theta_json(&analysis.space, &idx.first.argmax_theta),
                "argmin_total": theta_json(&analysis.space, &idx.total.argmin_theta),
                "argmax_total": theta_json(&analysis.space, &idx.total.argmax_theta),
            })
        })
        .collect();

    let results = json!({
        "command": "bounds",
        "model": cfg.model,
        "inputs": analysis.space.input_names(),
        "design": design_json(cfg, &fit),
        "pce": pce_json(cfg, &fit),
        "indices": indices_json,
        "warnings": warnings_value,
    });
    if wants(cfg, "json") {
        write_json(&dir.join("results.json"), &results)?;
    }
    if wants(cfg, "csv") {
        write_design_csv(&dir.join("design.csv"), &analysis.space, &fit.base, &fit.design)?;
        write_barplot_csv(&dir.join("barplot.csv"), &indices)?;
        write_impact_csv(&dir.join("impact_epistemic.csv"), &indices)?;
    }
    println!(
        "bounds: {} model evaluations ({} design rows), results in {}",
        fit.design_evaluations,
        fit.design.n_rows(),
        dir.display()
    );
    Ok(())
}

/// Fit-only diagnostics: index set, coefficients, LOO, err_gen.
pub fn cmd_fit(analysis: &Analysis, verbose: bool) -> Result<()> {
    let cfg = &analysis.cfg;
    let dir = ensure_output_dir(cfg)?;
    let fit = run_fit(analysis)?;
    if verbose {
        eprintln!(
            "fit: degree {} with {} candidate terms, {} selected",
            fit.diagnostics.degree, fit.diagnostics.candidate_size, fit.diagnostics.selected_terms
        );
    }
    let (warnings, warnings_value) = warnings_json(cfg, &fit);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let index_set: Vec<Value> = fit
        .pce_model
        .index_set()
        .iter()
        .zip(fit.pce_model.coefficients())
        .map(|(alpha, &a)| {
            json!({
                "alpha": alpha,
                "coefficient": num(a),
            })
        })
        .collect();
    let results = json!({
        "command": "fit",
        "model": cfg.model,
        "inputs": analysis.space.input_names(),
        "dim_names": analysis.space.dim_names(),
        "design": design_json(cfg, &fit),
        "pce": pce_json(cfg, &fit),
        "expansion": index_set,
        "warnings": warnings_value,
    });
    if wants(cfg, "json") {
        write_json(&dir.join("results.json"), &results)?;
    }
    if wants(cfg, "csv") {
        write_design_csv(&dir.join("design.csv"), &analysis.space, &fit.base, &fit.design)?;
    }
    println!(
        "fit: {} model evaluations, {} active terms, results in {}",
        fit.design_evaluations,
        fit.diagnostics.selected_terms,
        dir.display()
    );
    Ok(())
}

/// Surrogate-vs-Monte-Carlo comparison at the pinched θ and over a θ grid.
pub fn cmd_validate(analysis: &Analysis, verbose: bool) -> Result<()> {
    let cfg = &analysis.cfg;
    let dir = ensure_output_dir(cfg)?;
    let oracle_cfg = cfg.oracle.clone().unwrap_or_default();
    let fit = run_fit(analysis)?;
    let (_split, indices) = run_bounds(analysis, &fit)?;
    let pboxes: Vec<ParametricPBox> = (0..analysis.space.n_inputs())
        .map(|i| analysis.space.pbox(i).clone())
        .collect();

    // Pinched comparison: precise marginals at the interval midpoints.
    let marginals: Vec<oracle::FixedMarginal> = pboxes
        .iter()
        .map(|p| {
            oracle::FixedMarginal::new(p.family(), p.native_theta(&p.hyper_box().midpoint())?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<Value> = Vec::new();
    let mut csv = String::from("input,order,comparison,surrogate,mc,mc_std_error,abs_diff,within_3se\n");
    let eval_model = |x: &[f64]| analysis.model.evaluate(x);
    let pinched_estimates = oracle::sobol_mc_all(
        eval_model,
        &marginals,
        oracle_cfg.n,
        seeding::derive(oracle_cfg.seed, 0x9a),
    )?;
    for (i, idx) in indices.iter().enumerate() {
        let (mc_first, mc_total) = pinched_estimates[i];
        for (order, surrogate, mc) in [
            ("first", idx.first_pinched, mc_first),
            ("total", idx.total_pinched, mc_total),
        ] {
            let diff = (surrogate - mc.value).abs();
            let ok = diff <= 3.0 * mc.std_error + 1e-3;
            rows.push(json!({
                "input": idx.name,
                "order": order,
                "comparison": "pinched",
                "surrogate": num(surrogate),
                "mc": num(mc.value),
                "mc_std_error": num(mc.std_error),
                "within_3se": ok,
            }));
            csv.push_str(&format!(
                "{},{order},pinched,{},{},{},{},{}\n",
                idx.name,
                csv_number(surrogate),
                csv_number(mc.value),
                csv_number(mc.std_error),
                csv_number(diff),
                ok,
            ));
        }
        let _ = verbose;
    }

    // Grid sweep: double-loop ranges against the optimized intervals.
    let ranges = oracle::imprecise_sobol_doubleloop(
        eval_model,
        &pboxes,
        oracle_cfg.grid_points,
        oracle_cfg.n,
        oracle_cfg.seed,
    )?;
    for (idx, range) in indices.iter().zip(&ranges) {
        let tol = 3.0 * range.worst_std_error + 1e-3;
        for (order, comparison, surrogate, mc) in [
            ("first", "grid_min", idx.first.lower, range.first_min),
            ("first", "grid_max", idx.first.upper, range.first_max),
            ("total", "grid_min", idx.total.lower, range.total_min),
            ("total", "grid_max", idx.total.upper, range.total_max),
        ] {
            // Grid extrema cannot exceed the true extrema: the optimized
            // interval must contain them up to Monte Carlo noise.
            let ok = if comparison == "grid_min" {
                mc >= surrogate - tol
            } else {
                mc <= surrogate + tol
            };
            rows.push(json!({
                "input": idx.name,
                "order": order,
                "comparison": comparison,
                "surrogate": num(surrogate),
                "mc": num(mc),
                "mc_std_error": num(range.worst_std_error),
                "within_3se": ok,
            }));
            csv.push_str(&format!(
                "{},{order},{comparison},{},{},{},{},{}\n",
                idx.name,
                csv_number(surrogate),
                csv_number(mc),
                csv_number(range.worst_std_error),
                csv_number((surrogate - mc).abs()),
                ok,
            ));
        }
    }

    let results = json!({
        "command": "validate",
        "model": cfg.model,
        "inputs": analysis.space.input_names(),
        "design": design_json(cfg, &fit),
        "pce": pce_json(cfg, &fit),
        "oracle": {
            "n": oracle_cfg.n,
            "grid_points": oracle_cfg.grid_points,
            "seed": oracle_cfg.seed,
        },
        "comparisons": rows,
    });
    if wants(cfg, "json") {
        write_json(&dir.join("results.json"), &results)?;
    }
    if wants(cfg, "csv") {
        write_atomic(&dir.join("validate.csv"), &csv)?;
    }
    println!(
        "validate: surrogate vs Monte Carlo written to {}",
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------
// Argument parsing and dispatch
// ---------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "pbox-sobol",
    about = "Interval-valued Sobol' sensitivity indices for parametric p-box inputs via a single augmented sparse PCE"
)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the augmented PCE and optimize the imprecise Sobol' bounds.
    Bounds(CommonArgs),
    /// Fit the augmented PCE and report diagnostics only.
    Fit(CommonArgs),
    /// Compare the surrogate against the double-loop Monte Carlo oracle.
    Validate(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Analysis configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides the configured design seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Prints fit progress to stderr.
    #[arg(long)]
    verbose: bool,
}

fn load(args: &CommonArgs) -> Result<Analysis> {
    let mut cfg = AnalysisConfig::from_file(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.outputs.dir = dir.clone();
    }
    prepare(cfg, args.seed)
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownModel(_) | Error::Io(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

/// Entry point used by `main`; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match CliArgs::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            // clap prints its own help/usage text.
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match &args.command {
        Command::Bounds(c) => dispatch(c, cmd_bounds),
        Command::Fit(c) => dispatch(c, cmd_fit),
        Command::Validate(c) => dispatch(c, cmd_validate),
    }
}

fn dispatch(common: &CommonArgs, runner: impl Fn(&Analysis, bool) -> Result<()>) -> i32 {
    let analysis = match load(common) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match runner(&analysis, common.verbose) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::excessive_precision)]
    fn sig12_rounds_to_twelve_significant_digits() {
        assert_eq!(sig12(1.0), 1.0);
        assert_eq!(sig12(0.0), 0.0);
        let x = 0.123456789012345678;
        let r = sig12(x);
        assert!((r - 0.123456789012).abs() < 1e-12);
        assert_eq!(sig12(r), r);
    }

    #[test]
    fn param_value_parsing() {
        let spec: InputSpec = serde_json::from_value(json!({
            "name": "r",
            "family": "gaussian",
            "params": {"mean": [0.49, 0.51], "std": 0.05}
        }))
        .unwrap();
        let pbox = build_pbox(&spec).unwrap();
        assert_eq!(pbox.hyper_box().interval(0), (0.49, 0.51));
        assert_eq!(pbox.hyper_box().interval(1), (0.05, 0.05));
        assert!(pbox.hyper_box().is_degenerate(1));
    }

    #[test]
    fn build_pbox_rejects_unknown_and_missing_params() {
        let missing: InputSpec = serde_json::from_value(json!({
            "name": "r",
            "family": "gaussian",
            "params": {"mean": 0.5}
        }))
        .unwrap();
        assert!(matches!(build_pbox(&missing), Err(Error::Config(_))));
        let extra: InputSpec = serde_json::from_value(json!({
            "name": "r",
            "family": "gaussian",
            "params": {"mean": 0.5, "std": 0.05, "mode": 1.0}
        }))
        .unwrap();
        assert!(matches!(build_pbox(&extra), Err(Error::Config(_))));
    }

    #[test]
    fn prepare_checks_input_count() {
        let cfg: AnalysisConfig = serde_json::from_value(json!({
            "model": "f1",
            "inputs": [
                {"name": "x1", "family": "gaussian", "params": {"mean": [-1, 1], "std": [0.5, 1]}}
            ],
            "design": {"N": 10},
            "outputs": {"dir": "/tmp/nowhere"}
        }))
        .unwrap();
        assert!(matches!(prepare(cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn seed_override_applies() {
        let cfg: AnalysisConfig = serde_json::from_value(json!({
            "model": "f1",
            "inputs": [
                {"name": "x1", "family": "gaussian", "params": {"mean": [-1, 1], "std": [0.5, 1]}},
                {"name": "x2", "family": "gaussian", "params": {"mean": [-1, 1], "std": [0.5, 1]}}
            ],
            "design": {"N": 10, "seed": 1},
            "outputs": {"dir": "/tmp/nowhere"}
        }))
        .unwrap();
        let analysis = prepare(cfg, Some(77)).unwrap();
        assert_eq!(analysis.cfg.design.seed, 77);
    }
}
