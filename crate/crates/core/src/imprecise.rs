//! Conditional-coefficient reordering of the augmented PCE and extraction
//! of imprecise Sobol' index bounds by optimization over the θ box.
//!
//! Every multi-index α of the augmented expansion factors as
//! (α_C, α_Θ) thanks to the tensor-product basis. Grouping coefficients by
//! the unique aleatory parts α*_C turns the expansion, at any fixed θ,
//! into an ordinary PCE in the aleatory variables whose coefficients
//! a_{α*_C}(θ) are polynomials in θ. Conditional Sobol' indices are then
//! ratios of those squared coefficients, and their bounds over the box
//! come from two box-constrained global optimizations.

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::optimizer::{self, OptimizerConfig};
use crate::pce::{DimRole, PceModel};
use crate::polynomials::{total_degree, MultiIndexSet};
use crate::seeding::{self, tags};

/// Which flavor of conditional Sobol' index is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexOrder {
    /// First-order index of a single input.
    First,
    /// Exact-group index of an input subset.
    Group,
    /// Total index of a single input.
    Total,
}

/// Tensor split of an augmented index set into aleatory and epistemic
/// parts, with the groups of unique aleatory multi-indices.
#[derive(Debug, Clone)]
pub struct SplitIndexSet {
    /// Augmented dimensions carrying aleatory variables, in input order.
    aleatory_dims: Vec<usize>,
    /// Augmented dimensions carrying epistemic variables.
    epistemic_dims: Vec<usize>,
    /// Unique aleatory multi-indices A*_C (graded-lex order, reduced to the
    /// aleatory dimensions; coordinate i belongs to physical input i).
    unique: MultiIndexSet,
    /// Input-index support of each unique aleatory multi-index.
    group_support: Vec<Vec<usize>>,
    /// Group id of every term of the full expansion.
    term_group: Vec<usize>,
    /// Epistemic part of every term (reduced to `epistemic_dims`).
    theta_parts: Vec<Vec<u32>>,
    /// Positions of the full expansion contributing to each group.
    groups: Vec<Vec<usize>>,
}

impl SplitIndexSet {
    pub fn n_groups(&self) -> usize {
        self.unique.len()
    }

    pub fn unique_aleatory(&self) -> &MultiIndexSet {
        &self.unique
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn n_theta(&self) -> usize {
        self.epistemic_dims.len()
    }

    pub fn theta_part(&self, term: usize) -> &[u32] {
        &self.theta_parts[term]
    }
}

/// Splits the model's index set along its dimension layout.
pub fn split_indices(model: &PceModel) -> SplitIndexSet {
    let layout = model.layout();
    let aleatory_dims: Vec<usize> = layout
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_aleatory())
        .map(|(d, _)| d)
        .collect();
    let epistemic_dims: Vec<usize> = layout
        .iter()
        .enumerate()
        .filter(|(_, r)| matches!(r, DimRole::Epistemic { .. }))
        .map(|(d, _)| d)
        .collect();

    let mut unique_raw: Vec<Vec<u32>> = Vec::new();
    let mut term_group = Vec::with_capacity(model.n_terms());
    let mut theta_parts = Vec::with_capacity(model.n_terms());
    for alpha in model.index_set().iter() {
        let a_c: Vec<u32> = aleatory_dims.iter().map(|&d| alpha[d]).collect();
        let a_t: Vec<u32> = epistemic_dims.iter().map(|&d| alpha[d]).collect();
        let gid = match unique_raw.iter().position(|u| u == &a_c) {
            Some(g) => g,
            None => {
                unique_raw.push(a_c);
                unique_raw.len() - 1
            }
        };
        term_group.push(gid);
        theta_parts.push(a_t);
    }

    // Canonical graded-lex order for the unique set, remapping group ids.
    let mut order: Vec<usize> = (0..unique_raw.len()).collect();
    order.sort_by(|&i, &j| crate::polynomials::graded_lex_cmp(&unique_raw[i], &unique_raw[j]));
    let mut rank = vec![0usize; unique_raw.len()];
    for (new_id, &old_id) in order.iter().enumerate() {
        rank[old_id] = new_id;
    }
    let unique_sorted: Vec<Vec<u32>> = order.iter().map(|&i| unique_raw[i].clone()).collect();
    for g in &mut term_group {
        *g = rank[*g];
    }
    let mut groups = vec![Vec::new(); unique_sorted.len()];
    for (term, &g) in term_group.iter().enumerate() {
        groups[g].push(term);
    }
    let group_support: Vec<Vec<usize>> = unique_sorted
        .iter()
        .map(|u| {
            u.iter()
                .enumerate()
                .filter(|(_, &a)| a > 0)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let unique = MultiIndexSet::new(aleatory_dims.len(), unique_sorted)
        .expect("unique aleatory indices share one dimension");

    SplitIndexSet {
        aleatory_dims,
        epistemic_dims,
        unique,
        group_support,
        term_group,
        theta_parts,
        groups,
    }
}

fn check_theta(split: &SplitIndexSet, theta: &[f64]) -> Result<()> {
    if theta.len() != split.epistemic_dims.len() {
        return Err(Error::DimensionMismatch {
            expected: split.epistemic_dims.len(),
            got: theta.len(),
        });
    }
    if theta.iter().any(|t| !(-1.0 - 1e-9..=1.0 + 1e-9).contains(t)) {
        return Err(Error::DomainError(format!(
            "standardized θ outside [-1, 1]: {theta:?}"
        )));
    }
    Ok(())
}

/// Conditional coefficients a_{α*_C}(θ), aligned with the unique aleatory
/// index set, at a standardized θ vector.
pub fn conditional_coefficients(
    split: &SplitIndexSet,
    model: &PceModel,
    theta: &[f64],
) -> Result<Vec<f64>> {
    check_theta(split, theta)?;
    // Per-dimension basis value tables up to the highest epistemic degree.
    let bases = model.bases();
    let tables: Vec<Vec<f64>> = split
        .epistemic_dims
        .iter()
        .enumerate()
        .map(|(k, &dim)| {
            let max_deg = split
                .theta_parts
                .iter()
                .map(|p| p[k])
                .max()
                .unwrap_or(0) as usize;
            let mut table = vec![0.0; max_deg + 1];
            bases[dim].eval_all(max_deg, theta[k], &mut table);
            table
        })
        .collect();
    let mut out = vec![0.0; split.n_groups()];
    for (term, &a) in model.coefficients().iter().enumerate() {
        let mut psi = 1.0;
        for (k, &deg) in split.theta_parts[term].iter().enumerate() {
            if deg > 0 {
                psi *= tables[k][deg as usize];
            }
        }
        out[split.term_group[term]] += a * psi;
    }
    Ok(out)
}

/// Conditional Sobol' index S(θ) for an input subset at fixed θ.
///
/// `subset` contains physical input indices. `First` and `Total` require a
/// single input; `Group` accepts any non-empty subset and measures the
/// exact-interaction class.
pub fn conditional_sobol(
    split: &SplitIndexSet,
    model: &PceModel,
    subset: &[usize],
    theta: &[f64],
    order: IndexOrder,
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::DomainError("index subset is empty".into()));
    }
    if matches!(order, IndexOrder::First | IndexOrder::Total) && subset.len() != 1 {
        return Err(Error::DomainError(
            "first-order and total indices take a single input".into(),
        ));
    }
    let n_inputs = split.aleatory_dims.len();
    if subset.iter().any(|&i| i >= n_inputs) {
        return Err(Error::DomainError(format!(
            "subset {subset:?} exceeds the {n_inputs} inputs"
        )));
    }
    let coeffs = conditional_coefficients(split, model, theta)?;
    let mut sorted_subset = subset.to_vec();
    sorted_subset.sort_unstable();

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (g, &a) in coeffs.iter().enumerate() {
        if total_degree(split.unique.get(g)) == 0 {
            continue;
        }
        let a2 = a * a;
        denominator += a2;
        let support = &split.group_support[g];
        let include = match order {
            IndexOrder::First | IndexOrder::Group => support == &sorted_subset,
            IndexOrder::Total => support.contains(&sorted_subset[0]),
        };
        if include {
            numerator += a2;
        }
    }
    if denominator <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(numerator / denominator)
}

/// Interval-valued Sobol' index with optimizer certificates.
#[derive(Debug, Clone)]
pub struct SobolInterval {
    pub subset: Vec<usize>,
    pub order: IndexOrder,
    pub lower: f64,
    pub upper: f64,
    /// Standardized θ attaining the lower bound.
    pub argmin_theta: Vec<f64>,
    /// Standardized θ attaining the upper bound.
    pub argmax_theta: Vec<f64>,
}

/// Bounds of one conditional Sobol' index over the standardized θ box,
/// by two independent box-constrained global optimizations.
pub fn sobol_bounds(
    split: &SplitIndexSet,
    model: &PceModel,
    subset: &[usize],
    order: IndexOrder,
    cfg: &OptimizerConfig,
) -> Result<SobolInterval> {
    let n_theta = split.n_theta();
    if n_theta == 0 {
        // No epistemic uncertainty: the interval collapses.
        let v = conditional_sobol(split, model, subset, &[], order)?;
        return Ok(SobolInterval {
            subset: subset.to_vec(),
            order,
            lower: v,
            upper: v,
            argmin_theta: Vec::new(),
            argmax_theta: Vec::new(),
        });
    }
    // Validate the subset once; inside the optimizer only ZeroVariance can
    // occur, which is treated as an excluded point.
    conditional_sobol(split, model, subset, &vec![0.0; n_theta], order)
        .map(|_| ())
        .or_else(|e| match e {
            Error::ZeroVariance => Ok(()),
            other => Err(other),
        })?;
    let objective = |theta: &[f64]| -> Option<f64> {
        conditional_sobol(split, model, subset, theta, order).ok()
    };
    let bounds = vec![(-1.0, 1.0); n_theta];
    let (argmin_theta, lower) = optimizer::minimize(objective, &bounds, cfg)?;
    let (argmax_theta, upper) = optimizer::maximize(objective, &bounds, cfg)?;
    Ok(SobolInterval {
        subset: subset.to_vec(),
        order,
        lower,
        upper,
        argmin_theta,
        argmax_theta,
    })
}

/// Sample of conditional Sobol' values under a θ distribution, for the
/// Bayesian-hierarchical reading of the epistemic box.
#[derive(Debug, Clone)]
pub struct SobolSample {
    pub values: Vec<f64>,
    /// Draws excluded because the conditional variance vanished.
    pub n_excluded: usize,
}

impl SobolSample {
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Monte Carlo sample of S(θ) with θ drawn by `theta_sampler` (which must
/// stay inside the standardized box).
pub fn sobol_distribution<F>(
    split: &SplitIndexSet,
    model: &PceModel,
    subset: &[usize],
    order: IndexOrder,
    mut theta_sampler: F,
    n: usize,
    seed: u64,
) -> Result<SobolSample>
where
    F: FnMut(&mut ChaCha12Rng) -> Vec<f64>,
{
    if n == 0 {
        return Err(Error::DomainError("sample size must be positive".into()));
    }
    let mut rng = seeding::stream(seed, tags::THETA_SAMPLER);
    let mut values = Vec::with_capacity(n);
    let mut n_excluded = 0;
    for _ in 0..n {
        let theta = theta_sampler(&mut rng);
        match conditional_sobol(split, model, subset, &theta, order) {
            Ok(v) => values.push(v),
            Err(Error::ZeroVariance) => n_excluded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(SobolSample { values, n_excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pce::DimRole;
    use crate::polynomials::{MultiIndexSet, UnivariateBasis};
    use rand::Rng;

    /// Exact 10-term augmented expansion of f1(x) = x1·x2 with Gaussian
    /// p-boxes μ ∈ [-1,1], σ ∈ [0.5,1]: layout (μ1, σ1, ξ1, μ2, σ2, ξ2).
    ///
    /// Derived by expanding (μ1 + σ1ξ1)(μ2 + σ2ξ2) with μ = t_μ (the
    /// interval is already [-1,1]), σ = 0.75 + 0.25·t_σ, and normalizing
    /// against the orthonormal Legendre (√3·t) and Hermite bases.
    pub fn f1_exact_model() -> PceModel {
        let s3 = 3.0f64.sqrt();
        let terms: Vec<(Vec<u32>, f64)> = vec![
            (vec![0, 0, 0, 0, 0, 0], 0.0),
            (vec![1, 0, 0, 1, 0, 0], 1.0 / 3.0),
            (vec![1, 0, 0, 0, 0, 1], 0.75 / s3),
            (vec![1, 0, 0, 0, 1, 1], 0.25 / 3.0),
            (vec![0, 0, 1, 1, 0, 0], 0.75 / s3),
            (vec![0, 1, 1, 1, 0, 0], 0.25 / 3.0),
            (vec![0, 0, 1, 0, 0, 1], 0.5625),
            (vec![0, 1, 1, 0, 0, 1], 0.1875 / s3),
            (vec![0, 0, 1, 0, 1, 1], 0.1875 / s3),
            (vec![0, 1, 1, 0, 1, 1], 0.0625 / 3.0),
        ];
        let mut sorted = terms.clone();
        sorted.sort_by(|a, b| crate::polynomials::graded_lex_cmp(&a.0, &b.0));
        let set = MultiIndexSet::new(6, sorted.iter().map(|(a, _)| a.clone()).collect()).unwrap();
        let coeffs: Vec<f64> = sorted.into_iter().map(|(_, c)| c).collect();
        let leg = UnivariateBasis::legendre_symmetric;
        let her = UnivariateBasis::hermite_probabilist;
        let bases = vec![leg(), leg(), her(), leg(), leg(), her()];
        let layout = vec![
            DimRole::Epistemic { input: 0, param: 0 },
            DimRole::Epistemic { input: 0, param: 1 },
            DimRole::Aleatory { input: 0 },
            DimRole::Epistemic { input: 1, param: 0 },
            DimRole::Epistemic { input: 1, param: 1 },
            DimRole::Aleatory { input: 1 },
        ];
        PceModel::new(set, coeffs, bases, layout).unwrap()
    }

    /// Standardized θ for physical (μ1, σ1, μ2, σ2).
    fn theta_std(mu1: f64, s1: f64, mu2: f64, s2: f64) -> Vec<f64> {
        vec![mu1, (s1 - 0.75) / 0.25, mu2, (s2 - 0.75) / 0.25]
    }

    fn f1_conditional_s1(mu1: f64, s1: f64, mu2: f64, s2: f64) -> f64 {
        let d = (mu2 * s1).powi(2) + (mu1 * s2).powi(2) + (s1 * s2).powi(2);
        (mu2 * s1).powi(2) / d
    }

    #[test]
    fn f1_split_groups() {
        let model = f1_exact_model();
        let split = split_indices(&model);
        assert_eq!(model.n_terms(), 10);
        assert_eq!(split.n_groups(), 4);
        let mut sizes: Vec<usize> = split.groups().iter().map(|g| g.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 4]);
        // Unique aleatory parts: (0,0), (0,1), (1,0), (1,1).
        let expected: Vec<Vec<u32>> = vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        assert_eq!(split.unique_aleatory().indices(), &expected[..]);
    }

    #[test]
    fn purely_aleatory_model_splits_trivially() {
        let set = MultiIndexSet::new(2, vec![vec![0, 0], vec![1, 0], vec![1, 1]]).unwrap();
        let bases = vec![
            UnivariateBasis::hermite_probabilist(),
            UnivariateBasis::hermite_probabilist(),
        ];
        let layout = vec![DimRole::Aleatory { input: 0 }, DimRole::Aleatory { input: 1 }];
        let model = PceModel::new(set, vec![1.0, 2.0, 3.0], bases, layout).unwrap();
        let split = split_indices(&model);
        assert_eq!(split.n_groups(), 3);
        assert_eq!(split.n_theta(), 0);
        assert!(split.theta_part(0).is_empty());
        // Conditional indices at the empty θ equal the plain ones.
        let s = conditional_sobol(&split, &model, &[0], &[], IndexOrder::First).unwrap();
        assert!((s - 4.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn constant_model_single_group() {
        let set = MultiIndexSet::new(1, vec![vec![0]]).unwrap();
        let model = PceModel::new(
            set,
            vec![2.0],
            vec![UnivariateBasis::hermite_probabilist()],
            vec![DimRole::Aleatory { input: 0 }],
        )
        .unwrap();
        let split = split_indices(&model);
        assert_eq!(split.n_groups(), 1);
        assert!(matches!(
            conditional_sobol(&split, &model, &[0], &[], IndexOrder::First),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn conditional_prediction_identity() {
        // Σ a_{α*_C}(θ) ψ_{α*_C}(c) must equal the full model at (c, θ).
        let model = f1_exact_model();
        let split = split_indices(&model);
        let mut rng = crate::seeding::stream(5, 0x77);
        for _ in 0..100 {
            let theta: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xi: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.5..2.5)).collect();
            let cond = conditional_coefficients(&split, &model, &theta).unwrap();
            let her = UnivariateBasis::hermite_probabilist();
            let mut reconstructed = 0.0;
            for (g, alpha_c) in split.unique_aleatory().iter().enumerate() {
                let psi: f64 = alpha_c
                    .iter()
                    .zip(&xi)
                    .map(|(&d, &x)| her.eval(d as usize, x))
                    .product();
                reconstructed += cond[g] * psi;
            }
            let v = [theta[0], theta[1], xi[0], theta[2], theta[3], xi[1]];
            let full = model.predict(&v);
            assert!(
                (full - reconstructed).abs() < 1e-12,
                "full {full} vs reconstructed {reconstructed}"
            );
        }
    }

    #[test]
    fn conditional_coefficient_theta_independent_group() {
        // The group whose only member has α_Θ = 0 is independent of θ.
        let set = MultiIndexSet::new(2, vec![vec![0, 0], vec![0, 1]]).unwrap();
        let bases = vec![
            UnivariateBasis::legendre_symmetric(),
            UnivariateBasis::hermite_probabilist(),
        ];
        let layout = vec![
            DimRole::Epistemic { input: 0, param: 0 },
            DimRole::Aleatory { input: 0 },
        ];
        let model = PceModel::new(set, vec![0.5, 2.0], bases, layout).unwrap();
        let split = split_indices(&model);
        let a = conditional_coefficients(&split, &model, &[-0.8]).unwrap();
        let b = conditional_coefficients(&split, &model, &[0.9]).unwrap();
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn conditional_sobol_closed_form() {
        let model = f1_exact_model();
        let split = split_indices(&model);
        // S1 at μ = (1,1), σ = (1,1) → 1/3.
        let s1 = conditional_sobol(
            &split,
            &model,
            &[0],
            &theta_std(1.0, 1.0, 1.0, 1.0),
            IndexOrder::First,
        )
        .unwrap();
        assert!((s1 - 1.0 / 3.0).abs() < 1e-12, "s1 = {s1}");
        // μ2 = 0 kills the first-order index of x1.
        let s1 = conditional_sobol(
            &split,
            &model,
            &[0],
            &theta_std(0.7, 0.9, 0.0, 0.6),
            IndexOrder::First,
        )
        .unwrap();
        assert!(s1.abs() < 1e-14);
        // Random θ against the closed form.
        let mut rng = crate::seeding::stream(8, 0x11);
        for _ in 0..50 {
            let mu1 = rng.gen_range(-1.0..1.0);
            let s1p = rng.gen_range(0.5..1.0);
            let mu2 = rng.gen_range(-1.0..1.0);
            let s2p = rng.gen_range(0.5..1.0);
            let got = conditional_sobol(
                &split,
                &model,
                &[0],
                &theta_std(mu1, s1p, mu2, s2p),
                IndexOrder::First,
            )
            .unwrap();
            let want = f1_conditional_s1(mu1, s1p, mu2, s2p);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn conditional_closure_and_total_dominance() {
        let model = f1_exact_model();
        let split = split_indices(&model);
        let mut rng = crate::seeding::stream(21, 0x13);
        for _ in 0..100 {
            let theta: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s1 = conditional_sobol(&split, &model, &[0], &theta, IndexOrder::First).unwrap();
            let s2 = conditional_sobol(&split, &model, &[1], &theta, IndexOrder::First).unwrap();
            let s12 =
                conditional_sobol(&split, &model, &[0, 1], &theta, IndexOrder::Group).unwrap();
            assert!((s1 + s2 + s12 - 1.0).abs() < 1e-12);
            let t1 = conditional_sobol(&split, &model, &[0], &theta, IndexOrder::Total).unwrap();
            let t2 = conditional_sobol(&split, &model, &[1], &theta, IndexOrder::Total).unwrap();
            assert!(t1 >= s1 - 1e-15 && t2 >= s2 - 1e-15);
            assert!((t1 - (s1 + s12)).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_outside_box_rejected() {
        let model = f1_exact_model();
        let split = split_indices(&model);
        assert!(matches!(
            conditional_coefficients(&split, &model, &[1.5, 0.0, 0.0, 0.0]),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn f1_first_order_bounds_analytic() {
        let model = f1_exact_model();
        let split = split_indices(&model);
        let cfg = OptimizerConfig {
            seed: 1234,
            ..Default::default()
        };
        for input in [0usize, 1] {
            let interval = sobol_bounds(&split, &model, &[input], IndexOrder::First, &cfg).unwrap();
            assert!(interval.lower.abs() < 1e-3, "lower = {}", interval.lower);
            assert!((interval.upper - 0.8).abs() < 1e-3, "upper = {}", interval.upper);
            // The minimum is attained on the μ_other = 0 plane (interior).
            let mu_other = interval.argmin_theta[if input == 0 { 2 } else { 0 }];
            assert!(mu_other.abs() < 1e-2, "argmin μ = {mu_other}");
            // Certificates reproduce the bounds.
            let at_max = conditional_sobol(
                &split,
                &model,
                &[input],
                &interval.argmax_theta,
                IndexOrder::First,
            )
            .unwrap();
            assert!((at_max - interval.upper).abs() < 1e-9);
            let at_min = conditional_sobol(
                &split,
                &model,
                &[input],
                &interval.argmin_theta,
                IndexOrder::First,
            )
            .unwrap();
            assert!((at_min - interval.lower).abs() < 1e-9);
        }
    }

    #[test]
    fn f1_total_bounds_analytic() {
        let model = f1_exact_model();
        let split = split_indices(&model);
        let cfg = OptimizerConfig {
            seed: 99,
            ..Default::default()
        };
        for input in [0usize, 1] {
            let interval = sobol_bounds(&split, &model, &[input], IndexOrder::Total, &cfg).unwrap();
            assert!((interval.lower - 0.2).abs() < 1e-3, "lower = {}", interval.lower);
            assert!((interval.upper - 1.0).abs() < 1e-3, "upper = {}", interval.upper);
        }
    }

    #[test]
    fn envelope_property() {
        let model = f1_exact_model();
        let split = split_indices(&model);
        let cfg = OptimizerConfig {
            seed: 31,
            ..Default::default()
        };
        let interval = sobol_bounds(&split, &model, &[0], IndexOrder::First, &cfg).unwrap();
        let mut rng = crate::seeding::stream(3, 0x5);
        for _ in 0..100 {
            let theta: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = conditional_sobol(&split, &model, &[0], &theta, IndexOrder::First).unwrap();
            assert!(s >= interval.lower - 1e-6 && s <= interval.upper + 1e-6);
        }
    }

    #[test]
    fn degenerate_box_collapses_interval() {
        // A purely aleatory model: bounds must equal the point value.
        // Graded-lex order (0,0), (0,1), (1,0) with coefficients 0, 2, 1.
        let set = MultiIndexSet::new(2, vec![vec![0, 0], vec![0, 1], vec![1, 0]]).unwrap();
        let bases = vec![
            UnivariateBasis::hermite_probabilist(),
            UnivariateBasis::hermite_probabilist(),
        ];
        let layout = vec![DimRole::Aleatory { input: 0 }, DimRole::Aleatory { input: 1 }];
        let model = PceModel::new(set, vec![0.0, 2.0, 1.0], bases, layout).unwrap();
        let split = split_indices(&model);
        let cfg = OptimizerConfig::default();
        let interval = sobol_bounds(&split, &model, &[0], IndexOrder::First, &cfg).unwrap();
        assert_eq!(interval.lower, interval.upper);
        assert!((interval.lower - 0.2).abs() < 1e-15);
    }

    #[test]
    fn distribution_point_mass_and_range() {
        let model = f1_exact_model();
        let split = split_indices(&model);
        // Point-mass sampler: every draw equals the conditional value.
        let fixed = theta_std(0.5, 0.8, -0.3, 0.6);
        let sample = sobol_distribution(
            &split,
            &model,
            &[0],
            IndexOrder::First,
            |_| fixed.clone(),
            50,
            7,
        )
        .unwrap();
        let expected = conditional_sobol(&split, &model, &[0], &fixed, IndexOrder::First).unwrap();
        assert!(sample.values.iter().all(|v| (v - expected).abs() < 1e-15));
        assert_eq!(sample.n_excluded, 0);

        // Uniform sampler: the empirical range sits inside the bounds.
        let sample = sobol_distribution(
            &split,
            &model,
            &[0],
            IndexOrder::First,
            |rng| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            10_000,
            7,
        )
        .unwrap();
        assert!(sample.min() >= -1e-3);
        assert!(sample.max() <= 0.801);

        // Determinism under a fixed seed.
        let again = sobol_distribution(
            &split,
            &model,
            &[0],
            IndexOrder::First,
            |rng| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            10_000,
            7,
        )
        .unwrap();
        assert_eq!(sample.mean().to_bits(), again.mean().to_bits());
    }
}
