//! Closed-form calculus on Gaussian return distributions.
//!
//! The critic models the future return as `N(mean, variance)`. Everything the
//! actor needs from that distribution — CVaR, its partial derivatives, and the
//! 2-Wasserstein training loss — has a closed form, implemented here without
//! external math dependencies.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lower bound kept on every predicted/target variance so that `sqrt` and the
/// `1/sqrt(variance)` factors in the CVaR gradient stay finite.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// A Gaussian distribution over future return: mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianReturn {
    mean: f64,
    variance: f64,
}

impl GaussianReturn {
    /// Builds a return distribution, clamping the variance to [`VARIANCE_FLOOR`].
    ///
    /// Non-finite inputs are programmer error and panic.
    pub fn new(mean: f64, variance: f64) -> Self {
        assert!(
            mean.is_finite() && variance.is_finite(),
            "non-finite GaussianReturn: mean={mean}, variance={variance}"
        );
        Self {
            mean,
            variance: variance.max(VARIANCE_FLOOR),
        }
    }

    #[inline]
    pub fn mean(&self) -> f64 {
        self.mean
    }

    #[inline]
    pub fn variance(&self) -> f64 {
        self.variance
    }

    #[inline]
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Risk level α ∈ [0.01, 1.0]; smaller α asks for more conservative behavior.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RiskLevel(f64);

impl RiskLevel {
    pub const MIN: f64 = 0.01;
    pub const MAX: f64 = 1.0;

    pub fn new(alpha: f64) -> Result<Self> {
        if !(Self::MIN..=Self::MAX).contains(&alpha) {
            return Err(Error::InvalidRiskLevel(alpha));
        }
        Ok(Self(alpha))
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.0
    }
}

/// Which closed-form CVaR coefficient weights the return standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvarForm {
    /// Γ = mean − (φ(α)/Φ(α))·std. The default convention used throughout
    /// training. Note it does not reduce to the mean at α = 1.
    #[default]
    Ratio,
    /// Γ = mean − (φ(Φ⁻¹(α))/α)·std, the textbook Gaussian CVaR; equals the
    /// mean exactly at α = 1.
    Quantile,
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density φ(x).
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF Φ(x) = ½(1 + erf(x/√2)), accurate to ~1e-15.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// The coefficient C(α) multiplying the return standard deviation in the
/// closed-form CVaR, for either convention. Positive for all α in range.
pub fn risk_coefficient(form: CvarForm, alpha: RiskLevel) -> f64 {
    let a = alpha.alpha();
    match form {
        CvarForm::Ratio => std_normal_pdf(a) / std_normal_cdf(a),
        CvarForm::Quantile => {
            if a >= 1.0 {
                0.0
            } else {
                std_normal_pdf(inverse_std_normal_cdf(a)) / a
            }
        }
    }
}

/// Closed-form CVaR with the ratio coefficient: mean − (φ(α)/Φ(α))·std.
pub fn cvar_gaussian(z: GaussianReturn, alpha: RiskLevel) -> f64 {
    z.mean() - risk_coefficient(CvarForm::Ratio, alpha) * z.std()
}

/// Textbook Gaussian CVaR: mean − (φ(Φ⁻¹(α))/α)·std; exactly the mean at α = 1.
pub fn cvar_gaussian_standard(z: GaussianReturn, alpha: RiskLevel) -> f64 {
    if alpha.alpha() >= 1.0 {
        return z.mean();
    }
    z.mean() - risk_coefficient(CvarForm::Quantile, alpha) * z.std()
}

/// CVaR under the selected convention.
pub fn cvar(form: CvarForm, z: GaussianReturn, alpha: RiskLevel) -> f64 {
    match form {
        CvarForm::Ratio => cvar_gaussian(z, alpha),
        CvarForm::Quantile => cvar_gaussian_standard(z, alpha),
    }
}

/// Partial derivatives of the CVaR w.r.t. the distribution parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvarPartials {
    /// ∂Γ/∂mean = 1.
    pub d_mean: f64,
    /// ∂Γ/∂variance = −C(α)/(2·std).
    pub d_variance: f64,
}

/// Gradient of [`cvar_gaussian`] w.r.t. (mean, variance). The variance floor
/// inside [`GaussianReturn`] keeps the `1/std` factor bounded.
pub fn cvar_partials(z: GaussianReturn, alpha: RiskLevel) -> CvarPartials {
    cvar_partials_for(CvarForm::Ratio, z, alpha)
}

/// Same as [`cvar_partials`] under the selected coefficient convention.
pub fn cvar_partials_for(form: CvarForm, z: GaussianReturn, alpha: RiskLevel) -> CvarPartials {
    let c = risk_coefficient(form, alpha);
    CvarPartials {
        d_mean: 1.0,
        d_variance: -c / (2.0 * z.std()),
    }
}

/// Squared 2-Wasserstein distance between scalar Gaussians:
/// (μ₁−μ₂)² + (σ₁−σ₂)². Symmetric, non-negative, zero iff equal.
pub fn w2_gaussian(u: GaussianReturn, v: GaussianReturn) -> f64 {
    let dm = u.mean() - v.mean();
    let ds = u.std() - v.std();
    dm * dm + ds * ds
}

// ---------------------------------------------------------------------------
// erf / erfc: rational Chebyshev approximation (Cody, 1969), |rel err| < 1e-15.
// ---------------------------------------------------------------------------

const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

/// erfc(y)·exp(y²) for 0.46875 < y, shared by the two outer branches.
fn erfc_scaled_tail(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        (num + ERF_C[7]) / (den + ERF_D[7])
    } else {
        let ysq = 1.0 / (y * y);
        let mut num = ERF_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + ERF_P[i]) * ysq;
            den = (den + ERF_Q[i]) * ysq;
        }
        let r = ysq * (num + ERF_P[4]) / (den + ERF_Q[4]);
        (std::f64::consts::FRAC_1_SQRT_PI - r) / y
    }
}

/// Complementary error function, |relative error| < 1e-15 over the finite range.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        return 1.0 - erf(x);
    }
    // exp(-y²) split as exp(-ysq²)·exp(-(y-ysq)(y+ysq)) to limit rounding.
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    let result = (-ysq * ysq).exp() * (-del).exp() * erfc_scaled_tail(y);
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Error function, |relative error| < 1e-15.
pub fn erf(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        let z = if y > f64::EPSILON { y * y } else { 0.0 };
        let mut num = ERF_A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + ERF_A[i]) * z;
            den = (den + ERF_B[i]) * z;
        }
        x * (num + ERF_A[3]) / (den + ERF_B[3])
    } else {
        1.0f64.copysign(x) - erfc(y).copysign(x)
    }
}

// ---------------------------------------------------------------------------
// Inverse standard normal CDF: Acklam's rational approximation plus one
// Halley refinement against the erfc-based CDF (pushes error to ~1e-15).
// ---------------------------------------------------------------------------

const INV_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const INV_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const INV_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const INV_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Φ⁻¹(p) for p ∈ (0, 1).
pub fn inverse_std_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level out of (0,1): {p}");
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((INV_C[0] * q + INV_C[1]) * q + INV_C[2]) * q + INV_C[3]) * q + INV_C[4]) * q
            + INV_C[5])
            / ((((INV_D[0] * q + INV_D[1]) * q + INV_D[2]) * q + INV_D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((INV_A[0] * r + INV_A[1]) * r + INV_A[2]) * r + INV_A[3]) * r + INV_A[4]) * r
            + INV_A[5])
            * q
            / (((((INV_B[0] * r + INV_B[1]) * r + INV_B[2]) * r + INV_B[3]) * r + INV_B[4]) * r
                + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((INV_C[0] * q + INV_C[1]) * q + INV_C[2]) * q + INV_C[3]) * q + INV_C[4]) * q
            + INV_C[5])
            / ((((INV_D[0] * q + INV_D[1]) * q + INV_D[2]) * q + INV_D[3]) * q + 1.0)
    };

    // One Halley step.
    let e = std_normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
