//! Brute-force Monte Carlo reference: pick-freeze Sobol' estimation at
//! fixed hyper-parameters and double-loop imprecise bounds over a θ grid.
//!
//! Estimators: Janon's correlation form for first-order indices, Jansen's
//! squared-difference form for total indices. Sample matrices follow the
//! fixed A/B/AB_i pairing: AB_i is A with column i replaced by B's, so
//! y_A - y_{AB_i} isolates input i (total) while y_B and y_{AB_i} share
//! only input i (first order). Cost: n·(M + 2) model calls per full run.

use rand::Rng;

use crate::distributions::{FamilyKind, ParametricPBox};
use crate::error::{Error, Result};
use crate::seeding::{self, tags};

/// One precise marginal (family + native parameters) at a fixed θ.
#[derive(Debug, Clone)]
pub struct FixedMarginal {
    pub family: FamilyKind,
    pub native_theta: Vec<f64>,
}

impl FixedMarginal {
    pub fn new(family: FamilyKind, native_theta: Vec<f64>) -> Result<Self> {
        family.validate(&native_theta)?;
        Ok(Self {
            family,
            native_theta,
        })
    }

    fn draw(&self, rng: &mut impl Rng) -> Result<f64> {
        let u: f64 = rng.gen_range(1e-15..1.0 - 1e-15);
        self.family.inv_cdf(u, &self.native_theta)
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Pick-freeze estimates of the first-order (Janon) and total (Jansen)
/// Sobol' indices for every input dimension at once.
///
/// One A sample, one B sample, and one AB_i per dimension: exactly
/// n·(M + 2) model calls.
pub fn sobol_mc_all<F>(
    model: F,
    marginals: &[FixedMarginal],
    n: usize,
    seed: u64,
) -> Result<Vec<(McEstimate, McEstimate)>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if n < 1000 {
        return Err(Error::DomainError(format!(
            "pick-freeze estimation needs n >= 1000, got {n}"
        )));
    }
    let m = marginals.len();
    let mut rng = seeding::stream(seed, tags::ORACLE);
    let mut y_a = vec![0.0; n];
    let mut y_b = vec![0.0; n];
    let mut y_ab = vec![vec![0.0; n]; m];
    let mut a_row = vec![0.0; m];
    let mut b_row = vec![0.0; m];
    for i in 0..n {
        for (d, marg) in marginals.iter().enumerate() {
            a_row[d] = marg.draw(&mut rng)?;
        }
        for (d, marg) in marginals.iter().enumerate() {
            b_row[d] = marg.draw(&mut rng)?;
        }
        y_a[i] = model(&a_row)?;
        y_b[i] = model(&b_row)?;
        for dim in 0..m {
            let saved = a_row[dim];
            a_row[dim] = b_row[dim];
            y_ab[dim][i] = model(&a_row)?;
            a_row[dim] = saved;
        }
    }
    let nf = n as f64;
    let mean_a: f64 = y_a.iter().sum::<f64>() / nf;
    let var_a: f64 = y_a.iter().map(|y| (y - mean_a).powi(2)).sum::<f64>() / (nf - 1.0);
    if var_a <= 0.0 {
        return Err(Error::DomainError("response variance is zero".into()));
    }

    let mut out = Vec::with_capacity(m);
    for dim in 0..m {
        let y_abd = &y_ab[dim];

        // Janon first-order estimator on the (y_B, y_AB) pair.
        let mean_pool: f64 = y_b
            .iter()
            .zip(y_abd)
            .map(|(b, ab)| 0.5 * (b + ab))
            .sum::<f64>()
            / nf;
        let var_pool: f64 = y_b
            .iter()
            .zip(y_abd)
            .map(|(b, ab)| 0.5 * ((b - mean_pool).powi(2) + (ab - mean_pool).powi(2)))
            .sum::<f64>()
            / nf;
        if var_pool <= 0.0 {
            return Err(Error::DomainError("response variance is zero".into()));
        }
        let cov: f64 = y_b
            .iter()
            .zip(y_abd)
            .map(|(b, ab)| (b - mean_pool) * (ab - mean_pool))
            .sum::<f64>()
            / nf;
        let s_first = cov / var_pool;
        // Delta-method variance via the influence function of the ratio.
        let infl_var: f64 = y_b
            .iter()
            .zip(y_abd)
            .map(|(b, ab)| {
                let zb = b - mean_pool;
                let zab = ab - mean_pool;
                let g = zb * zab - 0.5 * s_first * (zb * zb + zab * zab);
                g * g
            })
            .sum::<f64>()
            / nf;
        let se_first = (infl_var / nf).sqrt() / var_pool;

        // Jansen total estimator on the (y_A, y_AB) pair.
        let d_mean: f64 = y_a
            .iter()
            .zip(y_abd)
            .map(|(a, ab)| 0.5 * (a - ab).powi(2))
            .sum::<f64>()
            / nf;
        let s_total = d_mean / var_a;
        let d_var: f64 = y_a
            .iter()
            .zip(y_abd)
            .map(|(a, ab)| (0.5 * (a - ab).powi(2) - d_mean).powi(2))
            .sum::<f64>()
            / nf;
        let se_total = (d_var / nf).sqrt() / var_a;

        out.push((
            McEstimate {
                value: s_first,
                std_error: se_first,
                n,
            },
            McEstimate {
                value: s_total,
                std_error: se_total,
                n,
            },
        ));
    }
    Ok(out)
}

/// Pick-freeze estimates for a single input dimension; same sample
/// matrices as [`sobol_mc_all`], so the cost is still n·(M + 2) calls.
pub fn sobol_mc<F>(
    model: F,
    marginals: &[FixedMarginal],
    dim: usize,
    n: usize,
    seed: u64,
) -> Result<(McEstimate, McEstimate)>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let m = marginals.len();
    if dim >= m {
        return Err(Error::DomainError(format!(
            "dimension {dim} out of range for {m} marginals"
        )));
    }
    Ok(sobol_mc_all(model, marginals, n, seed)?[dim])
}

/// Per-input result of the double-loop sweep: min/max of the inner
/// estimates over the θ grid, with the worst inner standard error.
#[derive(Debug, Clone, Copy)]
pub struct DoubleLoopRange {
    pub first_min: f64,
    pub first_max: f64,
    pub total_min: f64,
    pub total_max: f64,
    pub worst_std_error: f64,
}

/// Brute-force imprecise Sobol' bounds: an outer full-factorial grid over
/// every free hyper-parameter, an inner pick-freeze estimation per grid
/// point. Intended for cheap validation models only; emits a warning above
/// ten million projected model calls.
pub fn imprecise_sobol_doubleloop<F>(
    model: F,
    pboxes: &[ParametricPBox],
    grid_per_param: usize,
    n_inner: usize,
    seed: u64,
) -> Result<Vec<DoubleLoopRange>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if grid_per_param < 3 {
        return Err(Error::DomainError(
            "grid resolution must be at least 3 per parameter".into(),
        ));
    }
    let m = pboxes.len();
    // Free parameters across all inputs, as (input, param) pairs.
    let free: Vec<(usize, usize)> = pboxes
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.hyper_box().free_params().into_iter().map(move |k| (i, k)))
        .collect();
    let n_cells = grid_per_param.pow(free.len() as u32).max(1);
    let projected = n_cells as u64 * n_inner as u64 * (m as u64 + 2);
    if projected > 10_000_000 {
        eprintln!(
            "warning: double-loop oracle projects {projected} model calls ({n_cells} grid cells)"
        );
    }

    let mut ranges = vec![
        DoubleLoopRange {
            first_min: f64::INFINITY,
            first_max: f64::NEG_INFINITY,
            total_min: f64::INFINITY,
            total_max: f64::NEG_INFINITY,
            worst_std_error: 0.0,
        };
        m
    ];
    let mut idx = vec![0usize; free.len()];
    let mut cell = 0usize;
    loop {
        // Declared θ per input for this grid cell.
        let mut thetas: Vec<Vec<f64>> = pboxes.iter().map(|p| p.hyper_box().midpoint()).collect();
        for (d, &(input, param)) in free.iter().enumerate() {
            let (lo, hi) = pboxes[input].hyper_box().interval(param);
            thetas[input][param] = lo + (hi - lo) * idx[d] as f64 / (grid_per_param - 1) as f64;
        }
        let marginals: Vec<FixedMarginal> = pboxes
            .iter()
            .zip(&thetas)
            .map(|(p, t)| FixedMarginal::new(p.family(), p.native_theta(t)?))
            .collect::<Result<Vec<_>>>()?;
        let estimates = sobol_mc_all(
            &model,
            &marginals,
            n_inner,
            seeding::derive(seed, cell as u64),
        )?;
        for (range, (first, total)) in ranges.iter_mut().zip(&estimates) {
            range.first_min = range.first_min.min(first.value);
            range.first_max = range.first_max.max(first.value);
            range.total_min = range.total_min.min(total.value);
            range.total_max = range.total_max.max(total.value);
            range.worst_std_error = range
                .worst_std_error
                .max(first.std_error)
                .max(total.std_error);
        }
        cell += 1;
        // Advance the mixed-radix grid counter.
        let mut d = 0;
        loop {
            if d == idx.len() {
                return Ok(ranges);
            }
            idx[d] += 1;
            if idx[d] < grid_per_param {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{HyperParamBox, Parameterization};

    fn std_normal() -> FixedMarginal {
        FixedMarginal::new(FamilyKind::Gaussian, vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn dummy_variable_has_zero_indices() {
        let marginals = vec![std_normal(), std_normal()];
        let model = |x: &[f64]| Ok(x[0]);
        let (s0, t0) = sobol_mc(model, &marginals, 0, 20_000, 1).unwrap();
        let (s1, t1) = sobol_mc(model, &marginals, 1, 20_000, 1).unwrap();
        assert!((s0.value - 1.0).abs() < 3.0 * s0.std_error.max(1e-3), "{s0:?}");
        assert!((t0.value - 1.0).abs() < 3.0 * t0.std_error.max(1e-3));
        assert!(s1.value.abs() < 3.0 * s1.std_error.max(1e-3), "{s1:?}");
        assert!(t1.value.abs() < 3.0 * t1.std_error.max(1e-3));
    }

    #[test]
    fn f1_closed_form_at_fixed_theta() {
        // S1 = (μ2σ1)²/D = 1/3 at μ = (1,1), σ = (1,1).
        let marginals = vec![
            FixedMarginal::new(FamilyKind::Gaussian, vec![1.0, 1.0]).unwrap(),
            FixedMarginal::new(FamilyKind::Gaussian, vec![1.0, 1.0]).unwrap(),
        ];
        let model = |x: &[f64]| Ok(x[0] * x[1]);
        let (first, total) = sobol_mc(model, &marginals, 0, 100_000, 7).unwrap();
        assert!(
            (first.value - 1.0 / 3.0).abs() < 3.0 * first.std_error,
            "S1 = {} ± {}",
            first.value,
            first.std_error
        );
        // Total: (1 + 1)/3 = 2/3.
        assert!(
            (total.value - 2.0 / 3.0).abs() < 3.0 * total.std_error,
            "T1 = {} ± {}",
            total.value,
            total.std_error
        );
    }

    #[test]
    fn standard_error_scales_as_inverse_sqrt_n() {
        let marginals = vec![std_normal(), std_normal()];
        let model = |x: &[f64]| Ok(x[0] + 0.5 * x[1] * x[1]);
        let (s_small, _) = sobol_mc(model, &marginals, 0, 10_000, 3).unwrap();
        let (s_large, _) = sobol_mc(model, &marginals, 0, 40_000, 4).unwrap();
        let ratio = s_small.std_error / s_large.std_error;
        assert!(
            (ratio - 2.0).abs() < 0.6,
            "SE ratio {ratio} should be near 2"
        );
    }

    #[test]
    fn rejects_tiny_samples_and_bad_dims() {
        let marginals = vec![std_normal()];
        assert!(sobol_mc(|x: &[f64]| Ok(x[0]), &marginals, 0, 10, 1).is_err());
        assert!(sobol_mc(|x: &[f64]| Ok(x[0]), &marginals, 3, 2000, 1).is_err());
    }

    #[test]
    fn double_loop_degenerate_box_matches_fixed_theta() {
        let pboxes = vec![
            ParametricPBox::precise(FamilyKind::Gaussian, Parameterization::MeanStd, &[1.0, 1.0])
                .unwrap(),
            ParametricPBox::precise(FamilyKind::Gaussian, Parameterization::MeanStd, &[1.0, 1.0])
                .unwrap(),
        ];
        let ranges =
            imprecise_sobol_doubleloop(|x: &[f64]| Ok(x[0] * x[1]), &pboxes, 3, 20_000, 5).unwrap();
        // Degenerate box: min == max (a single grid cell).
        assert_eq!(ranges[0].first_min, ranges[0].first_max);
        assert!((ranges[0].first_min - 1.0 / 3.0).abs() < 4.0 * ranges[0].worst_std_error);
    }

    #[test]
    fn double_loop_f1_grid_brackets() {
        // 5-point grids over the f1 p-boxes: the estimated first-order
        // range must cover the grid's true extremes [0, 0.8] within noise.
        let hyper = HyperParamBox::new(vec![(-1.0, 1.0), (0.5, 1.0)]).unwrap();
        let pboxes = vec![
            ParametricPBox::new(FamilyKind::Gaussian, Parameterization::MeanStd, hyper.clone())
                .unwrap(),
            ParametricPBox::new(FamilyKind::Gaussian, Parameterization::MeanStd, hyper).unwrap(),
        ];
        let ranges =
            imprecise_sobol_doubleloop(|x: &[f64]| Ok(x[0] * x[1]), &pboxes, 5, 100_000, 11)
                .unwrap();
        for r in &ranges {
            // The 5-point grid contains μ2 = 0 (min 0) and the extreme
            // corners (max 0.8); estimates deviate only by sampling noise.
            let noise = 3.0 * r.worst_std_error;
            assert!(r.first_min >= -noise && r.first_min <= 0.02, "{r:?}");
            assert!(r.first_max >= 0.75 && r.first_max <= 0.8 + noise, "{r:?}");
            assert!(r.total_max <= 1.0 + noise, "{r:?}");
        }
    }
}
