//! Augmented-space construction: auxiliary isoprobabilistic transforms,
//! Latin-hypercube experimental designs, and phantom-point generation.
//!
//! Each physical input contributes its free (non-degenerate) epistemic
//! hyper-parameters followed by one standardized aleatory auxiliary
//! variable, in declaration order. For a two-input Gaussian p-box problem
//! the layout is (μ₁, σ₁, ξ₁, μ₂, σ₂, ξ₂).
//!
//! Standardized coordinates: epistemic dimensions live on [-1, 1] (affine
//! map of the interval), Gaussian/Lognormal inputs use a standard normal
//! auxiliary ξ, Gumbel a standard Gumbel ϖ, Weibull a standard exponential
//! ϖ, and bounded (Uniform) inputs use the CDF coordinate mapped affinely
//! to [-1, 1].

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::distributions::{FamilyKind, ParametricPBox};
use crate::error::{Error, Result};
use crate::pce::{DimRole, ExperimentalDesign};
use crate::polynomials::{std_gumbel_basis, UnivariateBasis};
use crate::seeding::{self, tags};

/// Standardized aleatory variable attached to one input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxKind {
    StdNormal,
    StdGumbel,
    StdExponential,
    UnitUniform,
}

impl AuxKind {
    /// Family-matched auxiliary variable: the transform to the physical
    /// input stays (close to) linear, avoiding the strongly non-linear
    /// CDF mapping for unbounded families.
    pub fn for_family(family: FamilyKind) -> Self {
        match family {
            FamilyKind::Gaussian | FamilyKind::Lognormal => AuxKind::StdNormal,
            FamilyKind::Gumbel => AuxKind::StdGumbel,
            FamilyKind::Weibull => AuxKind::StdExponential,
            FamilyKind::Uniform => AuxKind::UnitUniform,
        }
    }

    pub fn basis(self) -> UnivariateBasis {
        match self {
            AuxKind::StdNormal => UnivariateBasis::hermite_probabilist(),
            AuxKind::StdGumbel => std_gumbel_basis().clone(),
            AuxKind::StdExponential => UnivariateBasis::laguerre_standard(),
            AuxKind::UnitUniform => UnivariateBasis::legendre_symmetric(),
        }
    }

    /// Inverse CDF of the standardized law, for unit-cube sampling.
    fn quantile(self, u: f64) -> Result<f64> {
        let u = u.clamp(1e-15, 1.0 - 1e-15);
        Ok(match self {
            AuxKind::StdNormal => crate::distributions::std_normal_quantile(u)?,
            AuxKind::StdGumbel => -(-u.ln()).ln(),
            AuxKind::StdExponential => -(-u).ln_1p(),
            AuxKind::UnitUniform => 2.0 * u - 1.0,
        })
    }
}

/// How phantom θ replicates are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomMode {
    /// One joint θ draw per replicate across all input blocks (default;
    /// keeps the design at n_ph × N rows).
    #[default]
    Joint,
    /// Independent θ draws per input block, combined component-wise.
    PerDimension,
}

/// One physical input inside the augmented space.
#[derive(Debug, Clone)]
struct InputBlock {
    name: String,
    pbox: ParametricPBox,
    aux: AuxKind,
    /// Free hyper-parameter indices (in the p-box's declared order).
    free_params: Vec<usize>,
    /// Augmented dimensions of the free parameters.
    theta_dims: Vec<usize>,
    /// Augmented dimension of the auxiliary variable.
    aux_dim: usize,
}

/// The joint space of epistemic hyper-parameters and standardized
/// aleatory auxiliary variables on which the single PCE is built.
#[derive(Debug, Clone)]
pub struct AugmentedSpace {
    inputs: Vec<InputBlock>,
    n_aug: usize,
}

/// Base experimental design: augmented points paired with the physical
/// points they map to.
#[derive(Debug, Clone)]
pub struct BaseDesign {
    pub aug: Vec<Vec<f64>>,
    pub phys: Vec<Vec<f64>>,
}

impl AugmentedSpace {
    /// Builds the space with family-matched auxiliary variables.
    pub fn new(inputs: Vec<(String, ParametricPBox)>) -> Result<Self> {
        Self::with_aux(inputs.into_iter().map(|(n, p)| (n, p, None)).collect())
    }

    /// Builds the space with optional per-input auxiliary overrides
    /// (`Some(AuxKind::UnitUniform)` forces the CDF-coordinate route).
    pub fn with_aux(inputs: Vec<(String, ParametricPBox, Option<AuxKind>)>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::DomainError("augmented space needs at least one input".into()));
        }
        let mut blocks = Vec::with_capacity(inputs.len());
        let mut dim = 0usize;
        for (name, pbox, aux_override) in inputs {
            let aux = aux_override.unwrap_or_else(|| AuxKind::for_family(pbox.family()));
            let default_aux = AuxKind::for_family(pbox.family());
            if aux != default_aux && aux != AuxKind::UnitUniform {
                return Err(Error::Config(format!(
                    "input {name}: auxiliary override must be the family default or unit-uniform"
                )));
            }
            let free_params = pbox.hyper_box().free_params();
            let theta_dims: Vec<usize> = (0..free_params.len()).map(|k| dim + k).collect();
            dim += free_params.len();
            let aux_dim = dim;
            dim += 1;
            blocks.push(InputBlock {
                name,
                pbox,
                aux,
                free_params,
                theta_dims,
                aux_dim,
            });
        }
        Ok(Self {
            inputs: blocks,
            n_aug: dim,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    /// Total augmented dimension M + Σ n_θ⁽ⁱ⁾.
    pub fn n_aug(&self) -> usize {
        self.n_aug
    }

    /// Total number of free epistemic dimensions.
    pub fn n_theta(&self) -> usize {
        self.inputs.iter().map(|b| b.free_params.len()).sum()
    }

    pub fn input_names(&self) -> Vec<&str> {
        self.inputs.iter().map(|b| b.name.as_str()).collect()
    }

    pub fn pbox(&self, input: usize) -> &ParametricPBox {
        &self.inputs[input].pbox
    }

    pub fn aux_kind(&self, input: usize) -> AuxKind {
        self.inputs[input].aux
    }

    /// Aleatory/epistemic role of every augmented dimension, in order.
    pub fn layout(&self) -> Vec<DimRole> {
        let mut roles = vec![DimRole::Aleatory { input: 0 }; self.n_aug];
        for (i, block) in self.inputs.iter().enumerate() {
            for (&dim, &param) in block.theta_dims.iter().zip(&block.free_params) {
                roles[dim] = DimRole::Epistemic { input: i, param };
            }
            roles[block.aux_dim] = DimRole::Aleatory { input: i };
        }
        roles
    }

    /// Orthonormal basis per augmented dimension.
    pub fn bases(&self) -> Vec<UnivariateBasis> {
        let mut bases: Vec<Option<UnivariateBasis>> = vec![None; self.n_aug];
        for block in &self.inputs {
            for &dim in &block.theta_dims {
                bases[dim] = Some(UnivariateBasis::legendre_symmetric());
            }
            bases[block.aux_dim] = Some(block.aux.basis());
        }
        bases.into_iter().map(|b| b.expect("all dims assigned")).collect()
    }

    /// Human-readable name per augmented dimension ("r.mean", "r.aux", ...).
    pub fn dim_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.n_aug];
        for block in &self.inputs {
            let param_names = block
                .pbox
                .parameterization()
                .param_names(block.pbox.family())
                .expect("validated at construction");
            for (&dim, &param) in block.theta_dims.iter().zip(&block.free_params) {
                names[dim] = format!("{}.{}", block.name, param_names[param]);
            }
            names[block.aux_dim] = format!("{}.aux", block.name);
        }
        names
    }

    /// Names of the epistemic dimensions only, in θ-vector order.
    pub fn theta_names(&self) -> Vec<String> {
        let names = self.dim_names();
        let mut out = Vec::new();
        for block in &self.inputs {
            for &dim in &block.theta_dims {
                out.push(names[dim].clone());
            }
        }
        out
    }

    /// Declared hyper-parameter vector of one input at a standardized θ
    /// vector (length = total free dimensions, ordered per input block).
    fn declared_theta(&self, input: usize, theta_std: &[f64]) -> Vec<f64> {
        let block = &self.inputs[input];
        let mut declared = block.pbox.hyper_box().midpoint();
        let offset: usize = self.inputs[..input].iter().map(|b| b.free_params.len()).sum();
        for (k, &param) in block.free_params.iter().enumerate() {
            let (lo, hi) = block.pbox.hyper_box().interval(param);
            let t = theta_std[offset + k];
            declared[param] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t;
        }
        declared
    }

    /// Physical hyper-parameter values per input at a standardized θ
    /// vector, keyed "input.param"; used for reporting.
    pub fn theta_to_physical(&self, theta_std: &[f64]) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (i, block) in self.inputs.iter().enumerate() {
            let declared = self.declared_theta(i, theta_std);
            let param_names = block
                .pbox
                .parameterization()
                .param_names(block.pbox.family())
                .expect("validated at construction");
            for &param in &block.free_params {
                out.push((
                    format!("{}.{}", block.name, param_names[param]),
                    declared[param],
                ));
            }
        }
        out
    }

    /// Native hyper-parameters of one input at a standardized θ vector.
    pub fn input_native_theta(&self, input: usize, theta_std: &[f64]) -> Result<Vec<f64>> {
        let declared = self.declared_theta(input, theta_std);
        self.inputs[input].pbox.native_theta(&declared)
    }

    /// Extracts the standardized θ sub-vector out of an augmented point.
    pub fn theta_of_point(&self, v: &[f64]) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.n_theta());
        for block in &self.inputs {
            for &dim in &block.theta_dims {
                theta.push(v[dim]);
            }
        }
        theta
    }

    /// Maps an augmented point to the physical input vector.
    ///
    /// Component i depends only on input block i of `v`.
    pub fn forward_transform(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_aug {
            return Err(Error::DimensionMismatch {
                expected: self.n_aug,
                got: v.len(),
            });
        }
        let theta_std = self.theta_of_point(v);
        let mut x = Vec::with_capacity(self.inputs.len());
        for (i, block) in self.inputs.iter().enumerate() {
            let declared = self.declared_theta(i, &theta_std);
            let native = block.pbox.native_theta(&declared)?;
            x.push(aux_to_physical(block.pbox.family(), block.aux, &native, v[block.aux_dim])?);
        }
        Ok(x)
    }

    /// Latin-hypercube design of `n` points in the augmented space,
    /// deterministic for a given seed; returns augmented and physical
    /// coordinates.
    pub fn sample_design(&self, n: usize, seed: u64) -> Result<BaseDesign> {
        if n == 0 {
            return Err(Error::DomainError("design size must be at least 1".into()));
        }
        let mut rng = seeding::stream(seed, tags::BASE_DESIGN);
        let unit = lhs_unit(&mut rng, n, self.n_aug);
        let mut aug = vec![vec![0.0; self.n_aug]; n];
        for block in &self.inputs {
            for &dim in &block.theta_dims {
                for i in 0..n {
                    aug[i][dim] = 2.0 * unit[i][dim] - 1.0;
                }
            }
            for (i, row) in aug.iter_mut().enumerate() {
                row[block.aux_dim] = block.aux.quantile(unit[i][block.aux_dim])?;
            }
        }
        let phys = aug
            .iter()
            .map(|v| self.forward_transform(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(BaseDesign { aug, phys })
    }

    /// Plain Monte Carlo sample of the augmented reference density
    /// (independent draws, no stratification); used for validation sets.
    pub fn sample_monte_carlo(&self, n: usize, seed: u64) -> Result<BaseDesign> {
        if n == 0 {
            return Err(Error::DomainError("sample size must be at least 1".into()));
        }
        let mut rng = seeding::stream(seed, tags::VALIDATION);
        let mut aug = Vec::with_capacity(n);
        for _ in 0..n {
            let mut v = vec![0.0; self.n_aug];
            for block in &self.inputs {
                for &dim in &block.theta_dims {
                    v[dim] = rng.gen_range(-1.0..=1.0);
                }
                v[block.aux_dim] = block.aux.quantile(rng.gen::<f64>())?;
            }
            aug.push(v);
        }
        let phys = aug
            .iter()
            .map(|v| self.forward_transform(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(BaseDesign { aug, phys })
    }

    /// Phantom-point design for unbounded input families; see
    /// [`AugmentedSpace::generate_phantoms_bounded`] when any family has a
    /// two-sided bounded support.
    pub fn generate_phantoms(
        &self,
        base: &BaseDesign,
        responses: &[f64],
        n_ph: usize,
        seed: u64,
        mode: PhantomMode,
    ) -> Result<ExperimentalDesign> {
        self.phantoms_impl(base, responses, n_ph, seed, mode, false)
    }

    /// Phantom-point design with bounded-support feasibility handling:
    /// θ replicates whose conditional support excludes the base point are
    /// resampled (up to 1000 tries) and then skipped.
    pub fn generate_phantoms_bounded(
        &self,
        base: &BaseDesign,
        responses: &[f64],
        n_ph: usize,
        seed: u64,
        mode: PhantomMode,
    ) -> Result<ExperimentalDesign> {
        self.phantoms_impl(base, responses, n_ph, seed, mode, true)
    }

    /// Dispatches on whether any input needs feasibility checks.
    pub fn build_design(
        &self,
        base: &BaseDesign,
        responses: &[f64],
        n_ph: usize,
        seed: u64,
        mode: PhantomMode,
    ) -> Result<ExperimentalDesign> {
        let bounded = self
            .inputs
            .iter()
            .any(|b| b.pbox.family().has_two_sided_bounded_support());
        if bounded {
            self.generate_phantoms_bounded(base, responses, n_ph, seed, mode)
        } else {
            self.generate_phantoms(base, responses, n_ph, seed, mode)
        }
    }

    fn phantoms_impl(
        &self,
        base: &BaseDesign,
        responses: &[f64],
        n_ph: usize,
        seed: u64,
        mode: PhantomMode,
        bounded: bool,
    ) -> Result<ExperimentalDesign> {
        let n = base.aug.len();
        if n_ph < 1 {
            return Err(Error::DomainError("n_ph must be at least 1".into()));
        }
        if responses.len() != n || base.phys.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: responses.len().min(base.phys.len()),
            });
        }
        let n_theta = self.n_theta();
        let mut points = Vec::with_capacity(n * n_ph);
        let mut ys = Vec::with_capacity(n * n_ph);
        let mut run_ids = Vec::with_capacity(n * n_ph);

        for (j, &response) in responses.iter().enumerate() {
            // Replicate k = 1 is the original augmented point.
            points.push(base.aug[j].clone());
            ys.push(response);
            run_ids.push(j);
            if n_ph == 1 {
                continue;
            }
            if bounded && !self.base_point_feasible(&base.phys[j])? {
                return Err(Error::InfeasibleBase { run_id: j });
            }
            let mut rng = seeding::stream(seed, tags::PHANTOM ^ ((j as u64) << 8));
            let draws = self.theta_replicates(&mut rng, n_ph - 1, n_theta, mode);
            for tau in draws {
                let mut accepted = None;
                let mut candidate = tau;
                for _try in 0..1000 {
                    match self.phantom_row(&base.phys[j], &candidate, bounded)? {
                        Some(row) => {
                            accepted = Some(row);
                            break;
                        }
                        None => {
                            // Infeasible for this τ: resample uniformly.
                            candidate = (0..n_theta).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                        }
                    }
                }
                if let Some(row) = accepted {
                    points.push(row);
                    ys.push(response);
                    run_ids.push(j);
                }
            }
        }
        ExperimentalDesign::new(points, ys, run_ids)
    }

    /// θ replicate draws for one base point: stratified (LHS) over the
    /// standardized θ box, jointly or independently per input block.
    fn theta_replicates(
        &self,
        rng: &mut ChaCha12Rng,
        count: usize,
        n_theta: usize,
        mode: PhantomMode,
    ) -> Vec<Vec<f64>> {
        if n_theta == 0 {
            return vec![Vec::new(); count];
        }
        match mode {
            PhantomMode::Joint => lhs_unit(rng, count, n_theta)
                .into_iter()
                .map(|row| row.into_iter().map(|u| 2.0 * u - 1.0).collect())
                .collect(),
            PhantomMode::PerDimension => {
                let mut draws = vec![vec![0.0; n_theta]; count];
                let mut offset = 0;
                for block in &self.inputs {
                    let width = block.free_params.len();
                    if width == 0 {
                        continue;
                    }
                    let unit = lhs_unit(rng, count, width);
                    for (k, row) in unit.into_iter().enumerate() {
                        for (d, u) in row.into_iter().enumerate() {
                            draws[k][offset + d] = 2.0 * u - 1.0;
                        }
                    }
                    offset += width;
                }
                draws
            }
        }
    }

    /// Builds one phantom row for physical point `chi` at θ replicate
    /// `tau` (standardized). Returns `None` when a bounded-support input
    /// is infeasible at this τ.
    fn phantom_row(&self, chi: &[f64], tau: &[f64], bounded: bool) -> Result<Option<Vec<f64>>> {
        let mut row = vec![0.0; self.n_aug];
        for (i, block) in self.inputs.iter().enumerate() {
            let declared = self.declared_theta(i, tau);
            let native = block.pbox.native_theta(&declared)?;
            if bounded && block.pbox.family().has_two_sided_bounded_support() {
                let (lo, hi) = block.pbox.family().support(&native)?;
                if chi[i] < lo || chi[i] > hi {
                    return Ok(None);
                }
            }
            for (&dim, &param) in block.theta_dims.iter().zip(&block.free_params) {
                let (lo, hi) = block.pbox.hyper_box().interval(param);
                row[dim] = (declared[param] - 0.5 * (lo + hi)) / (0.5 * (hi - lo));
            }
            row[block.aux_dim] = physical_to_aux(block.pbox.family(), block.aux, &native, chi[i])?;
        }
        Ok(Some(row))
    }

    /// True when some θ in the box puts `chi` inside every conditional
    /// support.
    fn base_point_feasible(&self, chi: &[f64]) -> Result<bool> {
        for (i, block) in self.inputs.iter().enumerate() {
            if !block.pbox.family().has_two_sided_bounded_support() {
                continue;
            }
            let mut lo_min = f64::INFINITY;
            let mut hi_max = f64::NEG_INFINITY;
            for corner in block.pbox.hyper_box().corners() {
                let native = block.pbox.native_theta(&corner)?;
                let (lo, hi) = block.pbox.family().support(&native)?;
                lo_min = lo_min.min(lo);
                hi_max = hi_max.max(hi);
            }
            if chi[i] < lo_min || chi[i] > hi_max {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Physical value of input `family` from its standardized auxiliary value.
fn aux_to_physical(family: FamilyKind, aux: AuxKind, native: &[f64], aux_value: f64) -> Result<f64> {
    Ok(match (aux, family) {
        (AuxKind::StdNormal, FamilyKind::Gaussian) => native[0] + native[1] * aux_value,
        (AuxKind::StdNormal, FamilyKind::Lognormal) => (native[0] + native[1] * aux_value).exp(),
        (AuxKind::StdGumbel, FamilyKind::Gumbel) => native[0] + native[1] * aux_value,
        (AuxKind::StdExponential, FamilyKind::Weibull) => {
            native[0] * aux_value.max(0.0).powf(1.0 / native[1])
        }
        (AuxKind::UnitUniform, FamilyKind::Uniform) => {
            let c = 0.5 * (aux_value + 1.0);
            native[0] + (native[1] - native[0]) * c
        }
        (AuxKind::UnitUniform, f) => {
            let c = (0.5 * (aux_value + 1.0)).clamp(1e-15, 1.0 - 1e-15);
            f.inv_cdf(c, native)?
        }
        (aux, f) => {
            return Err(Error::DomainError(format!(
                "auxiliary kind {aux:?} is incompatible with family {}",
                f.name()
            )))
        }
    })
}

/// Standardized auxiliary value that maps back to physical `chi` exactly.
fn physical_to_aux(family: FamilyKind, aux: AuxKind, native: &[f64], chi: f64) -> Result<f64> {
    Ok(match (aux, family) {
        (AuxKind::StdNormal, FamilyKind::Gaussian) => (chi - native[0]) / native[1],
        (AuxKind::StdNormal, FamilyKind::Lognormal) => {
            if chi <= 0.0 {
                return Err(Error::DomainError(format!(
                    "lognormal physical value must be positive, got {chi}"
                )));
            }
            (chi.ln() - native[0]) / native[1]
        }
        (AuxKind::StdGumbel, FamilyKind::Gumbel) => (chi - native[0]) / native[1],
        (AuxKind::StdExponential, FamilyKind::Weibull) => {
            if chi < 0.0 {
                return Err(Error::DomainError(format!(
                    "weibull physical value must be non-negative, got {chi}"
                )));
            }
            (chi / native[0]).powf(native[1])
        }
        (AuxKind::UnitUniform, f) => 2.0 * f.cdf(chi, native)? - 1.0,
        (aux, f) => {
            return Err(Error::DomainError(format!(
                "auxiliary kind {aux:?} is incompatible with family {}",
                f.name()
            )))
        }
    })
}

/// Latin-hypercube sample in the unit cube: each dimension's `n` values
/// occupy distinct 1/n strata.
fn lhs_unit(rng: &mut ChaCha12Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            let u: f64 = (s as f64 + rng.gen::<f64>()) / n as f64;
            points[i][d] = u.clamp(1e-15, 1.0 - 1e-15);
        }
    }
    points
}
