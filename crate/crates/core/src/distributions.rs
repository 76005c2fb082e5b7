//! Marginal distribution families, parametric p-boxes, and their
//! CDF / inverse-CDF / envelope machinery.
//!
//! A parametric p-box is a distribution family `F(x|θ)` whose
//! hyper-parameters θ live in a hyper-rectangular interval box. The family
//! carries the aleatory uncertainty; the box carries the epistemic part.
//! Everything here is pure and immutable after construction.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant, used by the Gumbel moment relations.
pub const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

// ---------------------------------------------------------------------
// Standard normal helpers
// ---------------------------------------------------------------------

/// Standard normal CDF Φ(z) via the complementary error function.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density φ(z).
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile Φ⁻¹(p).
///
/// Rational approximation (Acklam) refined by two Newton steps against the
/// erfc-based CDF; relative accuracy better than 1e-12 on (0, 1).
#[allow(clippy::excessive_precision)]
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if p.is_nan() || p <= 0.0 || p >= 1.0 {
        return Err(Error::DomainError(format!(
            "normal quantile requires p in (0,1), got {p}"
        )));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        let e = std_normal_cdf(x) - p;
        let d = std_normal_pdf(x);
        if d > 0.0 {
            x -= e / d;
        }
    }
    Ok(x)
}

// ---------------------------------------------------------------------
// Distribution families (native parameterizations)
// ---------------------------------------------------------------------

/// Continuous distribution families shipped with the toolkit.
///
/// Native parameter vectors:
/// - `Gaussian`:  (μ, σ)
/// - `Lognormal`: (λ, ζ) with ln X ~ N(λ, ζ)
/// - `Gumbel`:    (α, β) location/scale, F(x) = exp(-exp(-(x-α)/β))
/// - `Weibull`:   (α, β) scale/shape, F(x) = 1 - exp(-(x/α)^β)
/// - `Uniform`:   (a, b) support bounds
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Gaussian,
    Lognormal,
    Gumbel,
    Weibull,
    Uniform,
}

impl FamilyKind {
    pub fn n_params(self) -> usize {
        2
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Lognormal => "lognormal",
            FamilyKind::Gumbel => "gumbel",
            FamilyKind::Weibull => "weibull",
            FamilyKind::Uniform => "uniform",
        }
    }

    /// Checks a native parameter vector against the family constraints.
    pub fn validate(self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "{}: parameters must be finite, got {theta:?}",
                self.name()
            )));
        }
        match self {
            FamilyKind::Gaussian if theta[1] <= 0.0 => Err(Error::InvalidParams(format!(
                "gaussian requires σ > 0, got σ = {}",
                theta[1]
            ))),
            FamilyKind::Lognormal if theta[1] <= 0.0 => Err(Error::InvalidParams(format!(
                "lognormal requires ζ > 0, got ζ = {}",
                theta[1]
            ))),
            FamilyKind::Gumbel if theta[1] <= 0.0 => Err(Error::InvalidParams(format!(
                "gumbel requires β > 0, got β = {}",
                theta[1]
            ))),
            FamilyKind::Weibull if theta[0] <= 0.0 || theta[1] <= 0.0 => {
                Err(Error::InvalidParams(format!(
                    "weibull requires α > 0 and β > 0, got ({}, {})",
                    theta[0], theta[1]
                )))
            }
            FamilyKind::Uniform if theta[0] >= theta[1] => Err(Error::InvalidParams(format!(
                "uniform requires a < b, got ({}, {})",
                theta[0], theta[1]
            ))),
            _ => Ok(()),
        }
    }

    /// Conditional CDF `F(x|θ)` for a native parameter vector.
    pub fn cdf(self, x: f64, theta: &[f64]) -> Result<f64> {
        self.validate(theta)?;
        if !x.is_finite() {
            return Err(Error::DomainError(format!("cdf requires finite x, got {x}")));
        }
        Ok(match self {
            FamilyKind::Gaussian => std_normal_cdf((x - theta[0]) / theta[1]),
            FamilyKind::Lognormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - theta[0]) / theta[1])
                }
            }
            FamilyKind::Gumbel => (-(-(x - theta[0]) / theta[1]).exp()).exp(),
            FamilyKind::Weibull => {
                if x <= 0.0 {
                    0.0
                } else {
                    -((-(x / theta[0]).powf(theta[1])).exp_m1())
                }
            }
            FamilyKind::Uniform => ((x - theta[0]) / (theta[1] - theta[0])).clamp(0.0, 1.0),
        })
    }

    /// Conditional quantile `F⁻¹(p|θ)`.
    pub fn inv_cdf(self, p: f64, theta: &[f64]) -> Result<f64> {
        self.validate(theta)?;
        if p.is_nan() || p <= 0.0 || p >= 1.0 {
            return Err(Error::DomainError(format!(
                "inverse cdf requires p in (0,1), got {p}"
            )));
        }
        Ok(match self {
            FamilyKind::Gaussian => theta[0] + theta[1] * std_normal_quantile(p)?,
            FamilyKind::Lognormal => (theta[0] + theta[1] * std_normal_quantile(p)?).exp(),
            FamilyKind::Gumbel => theta[0] - theta[1] * (-p.ln()).ln(),
            FamilyKind::Weibull => theta[0] * (-(-p).ln_1p()).powf(1.0 / theta[1]),
            FamilyKind::Uniform => theta[0] + p * (theta[1] - theta[0]),
        })
    }

    /// Conditional density `f(x|θ)`.
    pub fn pdf(self, x: f64, theta: &[f64]) -> Result<f64> {
        self.validate(theta)?;
        Ok(match self {
            FamilyKind::Gaussian => std_normal_pdf((x - theta[0]) / theta[1]) / theta[1],
            FamilyKind::Lognormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_pdf((x.ln() - theta[0]) / theta[1]) / (x * theta[1])
                }
            }
            FamilyKind::Gumbel => {
                let z = (x - theta[0]) / theta[1];
                ((-z - (-z).exp()).exp()) / theta[1]
            }
            FamilyKind::Weibull => {
                if x <= 0.0 {
                    0.0
                } else {
                    let z = x / theta[0];
                    theta[1] / theta[0] * z.powf(theta[1] - 1.0) * (-z.powf(theta[1])).exp()
                }
            }
            FamilyKind::Uniform => {
                if x >= theta[0] && x <= theta[1] {
                    1.0 / (theta[1] - theta[0])
                } else {
                    0.0
                }
            }
        })
    }

    /// Support bounds; unbounded sides are ±∞.
    pub fn support(self, theta: &[f64]) -> Result<(f64, f64)> {
        self.validate(theta)?;
        Ok(match self {
            FamilyKind::Gaussian | FamilyKind::Gumbel => (f64::NEG_INFINITY, f64::INFINITY),
            FamilyKind::Lognormal | FamilyKind::Weibull => (0.0, f64::INFINITY),
            FamilyKind::Uniform => (theta[0], theta[1]),
        })
    }

    /// True when the support is bounded on both sides (phantom feasibility
    /// constraints apply).
    pub fn has_two_sided_bounded_support(self) -> bool {
        matches!(self, FamilyKind::Uniform)
    }
}

/// Free-function form of [`FamilyKind::cdf`].
pub fn cdf(family: FamilyKind, x: f64, theta: &[f64]) -> Result<f64> {
    family.cdf(x, theta)
}

/// Free-function form of [`FamilyKind::inv_cdf`].
pub fn inv_cdf(family: FamilyKind, p: f64, theta: &[f64]) -> Result<f64> {
    family.inv_cdf(p, theta)
}

// ---------------------------------------------------------------------
// Parameterizations
// ---------------------------------------------------------------------

/// How the hyper-parameter intervals of a p-box are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// Mean and standard deviation of X.
    MeanStd,
    /// The family's native parameters.
    NativeParams,
    /// Support bounds (a, b); Uniform only.
    SupportBounds,
}

impl Parameterization {
    /// Default parameterization per family: mean/std where the moment
    /// relations are standard, native (α, β) for Weibull, support bounds
    /// for Uniform.
    pub fn default_for(family: FamilyKind) -> Self {
        match family {
            FamilyKind::Gaussian | FamilyKind::Lognormal | FamilyKind::Gumbel => {
                Parameterization::MeanStd
            }
            FamilyKind::Weibull => Parameterization::NativeParams,
            FamilyKind::Uniform => Parameterization::SupportBounds,
        }
    }

    /// Parameter names in declaration order, used by the CLI config schema.
    pub fn param_names(self, family: FamilyKind) -> Result<[&'static str; 2]> {
        match (self, family) {
            (Parameterization::MeanStd, _) => Ok(["mean", "std"]),
            (Parameterization::NativeParams, FamilyKind::Gaussian) => Ok(["mean", "std"]),
            (Parameterization::NativeParams, FamilyKind::Lognormal) => Ok(["lambda", "zeta"]),
            (Parameterization::NativeParams, FamilyKind::Gumbel)
            | (Parameterization::NativeParams, FamilyKind::Weibull) => Ok(["alpha", "beta"]),
            (Parameterization::NativeParams, FamilyKind::Uniform)
            | (Parameterization::SupportBounds, FamilyKind::Uniform) => Ok(["a", "b"]),
            (Parameterization::SupportBounds, f) => Err(Error::InvalidParams(format!(
                "support-bounds parameterization is not defined for {}",
                f.name()
            ))),
        }
    }
}

/// Converts a declared parameter vector to the family's native one.
pub fn to_native(family: FamilyKind, parameterization: Parameterization, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != family.n_params() {
        return Err(Error::DimensionMismatch {
            expected: family.n_params(),
            got: theta.len(),
        });
    }
    let native = match (parameterization, family) {
        (Parameterization::NativeParams, _) => theta.to_vec(),
        (Parameterization::SupportBounds, FamilyKind::Uniform) => theta.to_vec(),
        (Parameterization::SupportBounds, f) => {
            return Err(Error::InvalidParams(format!(
                "support-bounds parameterization is not defined for {}",
                f.name()
            )))
        }
        (Parameterization::MeanStd, FamilyKind::Gaussian) => theta.to_vec(),
        (Parameterization::MeanStd, FamilyKind::Lognormal) => {
            let (mu, sigma) = (theta[0], theta[1]);
            if mu <= 0.0 || sigma <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "lognormal mean/std requires μ > 0, σ > 0, got ({mu}, {sigma})"
                )));
            }
            let zeta2 = (1.0 + (sigma / mu).powi(2)).ln();
            let zeta = zeta2.sqrt();
            vec![mu.ln() - 0.5 * zeta2, zeta]
        }
        (Parameterization::MeanStd, FamilyKind::Gumbel) => {
            let (mu, sigma) = (theta[0], theta[1]);
            if sigma <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "gumbel mean/std requires σ > 0, got {sigma}"
                )));
            }
            let beta = sigma * 6.0f64.sqrt() / std::f64::consts::PI;
            vec![mu - beta * EULER_MASCHERONI, beta]
        }
        (Parameterization::MeanStd, FamilyKind::Uniform) => {
            let (mu, sigma) = (theta[0], theta[1]);
            if sigma <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "uniform mean/std requires σ > 0, got {sigma}"
                )));
            }
            let half = 3.0f64.sqrt() * sigma;
            vec![mu - half, mu + half]
        }
        (Parameterization::MeanStd, FamilyKind::Weibull) => {
            // TODO: support mean/std for Weibull by inverting the Γ-moment
            // relations (bisection on the coefficient of variation).
            return Err(Error::InvalidParams(
                "weibull p-boxes use the native (α, β) parameterization".into(),
            ))
        }
    };
    family.validate(&native)?;
    Ok(native)
}

// ---------------------------------------------------------------------
// Hyper-parameter box
// ---------------------------------------------------------------------

/// Hyper-rectangular domain of distribution parameters: one independent
/// interval per parameter. Degenerate intervals (lower == upper) denote
/// precise knowledge and do not contribute an epistemic dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParamBox {
    intervals: Vec<(f64, f64)>,
}

impl HyperParamBox {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for (k, &(lo, hi)) in intervals.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "interval {k} must be finite, got [{lo}, {hi}]"
                )));
            }
            if lo > hi {
                return Err(Error::InvalidParams(format!(
                    "interval {k} has lower > upper: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        self.intervals[k]
    }

    pub fn is_degenerate(&self, k: usize) -> bool {
        let (lo, hi) = self.intervals[k];
        lo == hi
    }

    /// Indices of parameters with non-zero interval width.
    pub fn free_params(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&k| !self.is_degenerate(k)).collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.intervals.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(&self.intervals)
                .all(|(&t, &(lo, hi))| t >= lo - 1e-12 && t <= hi + 1e-12)
    }

    /// All 2^d corner vectors (degenerate intervals contribute one value).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let free = self.free_params();
        let mut out = Vec::with_capacity(1 << free.len());
        let n = 1usize << free.len();
        for mask in 0..n {
            let mut corner = self.midpoint();
            for (bit, &k) in free.iter().enumerate() {
                let (lo, hi) = self.intervals[k];
                corner[k] = if mask >> bit & 1 == 0 { lo } else { hi };
            }
            out.push(corner);
        }
        out
    }
}

// ---------------------------------------------------------------------
// Parametric p-box
// ---------------------------------------------------------------------

/// A distribution family with interval-valued hyper-parameters.
#[derive(Debug, Clone)]
pub struct ParametricPBox {
    family: FamilyKind,
    parameterization: Parameterization,
    hyper_box: HyperParamBox,
}

impl ParametricPBox {
    /// Builds a p-box, checking that every corner of the box yields a valid
    /// distribution.
    pub fn new(
        family: FamilyKind,
        parameterization: Parameterization,
        hyper_box: HyperParamBox,
    ) -> Result<Self> {
        if hyper_box.dim() != family.n_params() {
            return Err(Error::DimensionMismatch {
                expected: family.n_params(),
                got: hyper_box.dim(),
            });
        }
        for corner in hyper_box.corners() {
            to_native(family, parameterization, &corner)?;
        }
        Ok(Self {
            family,
            parameterization,
            hyper_box,
        })
    }

    /// Precise distribution: all intervals collapsed to a point.
    pub fn precise(family: FamilyKind, parameterization: Parameterization, theta: &[f64]) -> Result<Self> {
        let hyper_box = HyperParamBox::new(theta.iter().map(|&t| (t, t)).collect())?;
        Self::new(family, parameterization, hyper_box)
    }

    pub fn family(&self) -> FamilyKind {
        self.family
    }

    pub fn parameterization(&self) -> Parameterization {
        self.parameterization
    }

    pub fn hyper_box(&self) -> &HyperParamBox {
        &self.hyper_box
    }

    /// Converts a declared θ vector (in this p-box's parameterization) to
    /// the family's native parameters.
    pub fn native_theta(&self, theta: &[f64]) -> Result<Vec<f64>> {
        to_native(self.family, self.parameterization, theta)
    }

    /// Conditional CDF at declared θ.
    pub fn cdf(&self, x: f64, theta: &[f64]) -> Result<f64> {
        self.family.cdf(x, &self.native_theta(theta)?)
    }

    /// Conditional quantile at declared θ.
    pub fn inv_cdf(&self, p: f64, theta: &[f64]) -> Result<f64> {
        self.family.inv_cdf(p, &self.native_theta(theta)?)
    }

    /// Envelope curves: pointwise min/max of `F(x|θ)` over the box.
    ///
    /// All shipped families are monotone in each hyper-parameter on either
    /// side of the distribution body, so the extrema sit at box corners;
    /// a dense grid (33 points per free parameter) is scanned as well to
    /// cover parameterizations without a monotonicity guarantee.
    pub fn bounds_at(&self, x: f64) -> Result<(f64, f64)> {
        if !x.is_finite() {
            return Err(Error::DomainError(format!(
                "p-box bounds require finite x, got {x}"
            )));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut scan = |theta: &[f64]| -> Result<()> {
            let p = self.cdf(x, theta)?;
            lo = lo.min(p);
            hi = hi.max(p);
            Ok(())
        };
        for corner in self.hyper_box.corners() {
            scan(&corner)?;
        }
        let free = self.hyper_box.free_params();
        if !free.is_empty() {
            const GRID: usize = 33;
            let mut idx = vec![0usize; free.len()];
            loop {
                let mut theta = self.hyper_box.midpoint();
                for (d, &k) in free.iter().enumerate() {
                    let (a, b) = self.hyper_box.interval(k);
                    theta[k] = a + (b - a) * idx[d] as f64 / (GRID - 1) as f64;
                }
                scan(&theta)?;
                let mut d = 0;
                loop {
                    if d == idx.len() {
                        return Ok((lo, hi));
                    }
                    idx[d] += 1;
                    if idx[d] < GRID {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
            }
        }
        Ok((lo, hi))
    }
}

/// Free-function form of [`ParametricPBox::bounds_at`].
pub fn pbox_bounds(pbox: &ParametricPBox, x: f64) -> Result<(f64, f64)> {
    pbox.bounds_at(x)
}
