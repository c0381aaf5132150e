//! Contour integrals of the time delay over truncated semicircles,
//! `ε → 0` extrapolation and the Levinson count check
//! `2πi(J_b + ½J_h − L) = −lim_{ε→0} ∫_{Γ₊^ε} d log det S`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::quadrature::gauss_legendre;
use crate::scattering::{log_det_derivative_m_minus, time_delay};
use crate::spectral::{spectral_report, BoundState, SpectralConfig, SpectralReport};
use crate::{LabError, Potential, Result, Warning, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Doubling the rule must change the integral by less than this.
pub const QUADRATURE_TOL: f64 = 1e-8;

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(LabError::Domain(format!("ε must lie in (0, 0.5), got {eps}")));
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(LabError::Domain(format!("t must lie in [0, 1], got {t}")));
    }
    Ok(())
}

/// `γ₊^ε(t) = exp(iπ((1 − t)ε + t(1 − ε)))`.
pub fn gamma_plus(eps: f64, t: f64) -> Result<C64> {
    check_eps(eps)?;
    check_t(t)?;
    Ok((I * PI * (eps + t * (1.0 - 2.0 * eps))).exp())
}

/// `d/dt γ₊^ε(t)`.
pub fn gamma_plus_derivative(eps: f64, t: f64) -> Result<C64> {
    Ok(gamma_plus(eps, t)? * I * PI * (1.0 - 2.0 * eps))
}

/// `γ₋^ε(t) = 1/γ₊^ε(1 − t)`, the lower truncated semicircle.
pub fn gamma_minus(eps: f64, t: f64) -> Result<C64> {
    check_t(t)?;
    Ok(gamma_plus(eps, 1.0 - t)?.inv())
}

/// `d/dt γ₋^ε(t) = γ₊'(1 − t) / γ₊(1 − t)²`.
pub fn gamma_minus_derivative(eps: f64, t: f64) -> Result<C64> {
    let g = gamma_plus(eps, 1.0 - t)?;
    Ok(gamma_plus_derivative(eps, 1.0 - t)? / (g * g))
}

/// `Σ_j w_j f(t_j)` with node evaluations in parallel and an ordered sum.
fn quadrature<F>(k: usize, f: F) -> Result<C64>
where
    F: Fn(f64) -> Result<C64> + Sync,
{
    let (x, w) = gauss_legendre(k);
    let vals: Vec<C64> = x.par_iter().map(|&t| f(t)).collect::<Result<_>>()?;
    Ok(vals.iter().zip(&w).fold(C64::new(0.0, 0.0), |acc, (v, wi)| acc + v * *wi))
}

#[derive(Debug, Clone, Serialize)]
pub struct ContourIntegral {
    pub eps: f64,
    pub nodes: usize,
    pub value: C64,
    /// `|I_{2K} − I_K|`, when the doubling check ran.
    pub change: Option<f64>,
    pub converged: bool,
}

fn time_delay_integral(v: &Potential, eps: f64, k: usize) -> Result<C64> {
    if v.is_zero() {
        return Ok(C64::new(0.0, 0.0));
    }
    quadrature(k, |t| Ok(time_delay(gamma_plus(eps, t)?, v)? * gamma_plus_derivative(eps, t)?))
}

/// `∫_{Γ₊^ε} d/dz log det S^z dz` with a `k`-point rule; the doubling check
/// reruns with `2k` nodes and reports the more accurate value.
pub fn contour_integral(v: &Potential, eps: f64, k: usize, check_doubling: bool) -> Result<ContourIntegral> {
    check_eps(eps)?;
    if k == 0 {
        return Err(LabError::Config("quadrature needs at least one node".into()));
    }
    let value = time_delay_integral(v, eps, k)?;
    if !check_doubling {
        return Ok(ContourIntegral { eps, nodes: k, value, change: None, converged: true });
    }
    let fine = time_delay_integral(v, eps, 2 * k)?;
    let change = (fine - value).norm();
    Ok(ContourIntegral { eps, nodes: 2 * k, value: fine, change: Some(change), converged: change < QUADRATURE_TOL })
}

#[derive(Debug, Clone, Serialize)]
pub struct Extrapolation {
    pub value: C64,
    pub warnings: Vec<Warning>,
}

/// Limit `ε → 0` by repeated Richardson extrapolation (Neville's scheme for
/// the interpolating polynomial in `ε` evaluated at 0). Reproduces
/// `a + bε` exactly from any three distinct `ε`.
pub fn epsilon_extrapolate(values: &[(f64, C64)]) -> Result<Extrapolation> {
    if values.len() < 3 {
        return Err(LabError::Precondition(format!("extrapolation needs at least 3 values, got {}", values.len())));
    }
    if values.iter().any(|(e, _)| !(*e > 0.0)) || values.windows(2).any(|p| p[1].0 >= p[0].0) {
        return Err(LabError::Precondition("ε values must be positive and strictly decreasing".into()));
    }
    let eps: Vec<f64> = values.iter().map(|p| p.0).collect();
    let mut t: Vec<C64> = values.iter().map(|p| p.1).collect();
    let n = t.len();
    for level in 1..n {
        for i in (level..n).rev() {
            let (ei, ej) = (eps[i], eps[i - level]);
            t[i] = (t[i] * ej - t[i - 1] * ei) / (ej - ei);
        }
    }
    let mut warnings = Vec::new();
    let diffs: Vec<f64> = values.windows(2).map(|p| (p[1].1 - p[0].1).norm()).collect();
    // only meaningful once the differences rise above rounding
    if diffs.windows(2).any(|d| d[1] > d[0] && d[1] > 1e-12) {
        warnings.push(Warning::NonMonotone);
    }
    Ok(Extrapolation { value: t[n - 1], warnings })
}

/// `|∫_{Γ₋^ε} d log det M₋ − ∫_{Γ₊^ε} z⁻² (d log det M₋)(1/z) dz|`: the
/// lower-semicircle integral computed directly and through the reflection
/// `z ↦ 1/z` onto the upper semicircle.
pub fn reflection_identity_check(v: &Potential, eps: f64, k: usize) -> Result<f64> {
    check_eps(eps)?;
    if v.is_zero() {
        return Ok(0.0);
    }
    let direct = quadrature(k, |t| {
        let z = gamma_minus(eps, t)?;
        Ok(log_det_derivative_m_minus(z, v)? * gamma_minus_derivative(eps, t)?)
    })?;
    let reflected = quadrature(k, |t| {
        let z = gamma_plus(eps, t)?;
        Ok(log_det_derivative_m_minus(z.inv(), v)? / (z * z) * gamma_plus_derivative(eps, t)?)
    })?;
    Ok((direct - reflected).norm())
}

#[derive(Debug, Clone, Serialize)]
pub struct LevinsonConfig {
    pub eps_grid: Vec<f64>,
    pub quad_points: usize,
    pub check_doubling: bool,
    /// Extra halvings of the smallest `ε` allowed while the extrapolation
    /// is still moving (shallow bound states put structure at `ε ~ 1 − |r|`).
    pub max_refinements: usize,
    /// Agreement required between extrapolations from the last three and
    /// last four grid values.
    pub extrapolation_tol: f64,
    pub spectral: SpectralConfig,
}

impl Default for LevinsonConfig {
    fn default() -> Self {
        Self {
            eps_grid: vec![0.04, 0.02, 0.01, 0.005],
            quad_points: 2048,
            check_doubling: true,
            max_refinements: 10,
            extrapolation_tol: 1e-6,
            spectral: SpectralConfig::default(),
        }
    }
}

impl LevinsonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.len() < 3 {
            return Err(LabError::Config("the ε-grid needs at least 3 values".into()));
        }
        if self.eps_grid.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
            return Err(LabError::Config("ε values must lie in (0, 0.5)".into()));
        }
        if self.eps_grid.windows(2).any(|p| p[1] >= p[0]) {
            return Err(LabError::Config("the ε-grid must be strictly decreasing".into()));
        }
        if !(self.extrapolation_tol > 0.0) {
            return Err(LabError::Config("extrapolation tolerance must be positive".into()));
        }
        if self.quad_points == 0 {
            return Err(LabError::Config("quadrature needs at least one node".into()));
        }
        self.spectral.validate()
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
pub struct Counts {
    pub j_b: usize,
    pub j_h_plus: usize,
    pub j_h_minus: usize,
    pub l: usize,
}

impl Counts {
    /// `J_b + ½J_h − L`.
    pub fn expected(&self) -> f64 {
        self.j_b as f64 + 0.5 * (self.j_h_plus + self.j_h_minus) as f64 - self.l as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevinsonReport {
    pub counts: Counts,
    pub bound_states: Vec<BoundState>,
    pub edge_exponents: [f64; 2],
    pub eps_grid: Vec<f64>,
    pub integrals: Vec<ContourIntegral>,
    pub extrapolated: C64,
    /// `−extrapolated / (2πi)`.
    pub normalized_winding: C64,
    /// `2πi(J_b + ½J_h − L)`.
    pub lhs: C64,
    /// `|−extrapolated − lhs|`.
    pub residual: f64,
    /// Nearest half-integer to the real part of the normalized winding.
    pub rounded_count: f64,
    pub pass: bool,
    pub warnings: Vec<Warning>,
}

pub fn round_half(x: f64) -> f64 {
    (2.0 * x).round() / 2.0
}

/// Spectral counts, the `ε`-sweep of contour integrals and the comparison.
/// The grid is extended by halving while the extrapolation has not settled;
/// the limit then comes from the four smallest `ε`.
/// Passes when the residual is below `0.1·2π` and the half-integer rounding
/// of the normalized winding equals `J_b + ½J_h − L`.
pub fn levinson_verify(v: &Potential, config: &LevinsonConfig) -> Result<LevinsonReport> {
    config.validate()?;
    let spectral = spectral_report(v, &config.spectral)?;
    levinson_with_spectral(v, config, &spectral)
}

/// As [`levinson_verify`], reusing an already computed spectral report.
pub fn levinson_with_spectral(v: &Potential, config: &LevinsonConfig, spectral: &SpectralReport) -> Result<LevinsonReport> {
    config.validate()?;
    let mut warnings = spectral.warnings.clone();
    let counts = Counts { j_b: spectral.j_b, j_h_plus: spectral.j_h_plus, j_h_minus: spectral.j_h_minus, l: v.dim() };

    let mut integrals = Vec::with_capacity(config.eps_grid.len());
    let run = |eps: f64, integrals: &mut Vec<ContourIntegral>, warnings: &mut Vec<Warning>| -> Result<()> {
        let c = contour_integral(v, eps, config.quad_points, config.check_doubling)?;
        if !c.converged {
            warnings.push(Warning::QuadratureNotConverged { eps, change: c.change.unwrap_or(f64::NAN) });
        }
        integrals.push(c);
        Ok(())
    };
    for &eps in &config.eps_grid {
        run(eps, &mut integrals, &mut warnings)?;
    }
    let pairs = |integrals: &[ContourIntegral]| -> Vec<(f64, C64)> { integrals.iter().map(|c| (c.eps, c.value)).collect() };
    // refine while the last-three and last-four extrapolations disagree
    let spread = |p: &[(f64, C64)]| -> Result<f64> {
        if p.len() < 4 {
            return Ok(0.0);
        }
        let a = epsilon_extrapolate(&p[p.len() - 4..])?.value;
        let b = epsilon_extrapolate(&p[p.len() - 3..])?.value;
        Ok((a - b).norm())
    };
    let mut refinements = 0;
    while refinements < config.max_refinements && spread(&pairs(&integrals))? > config.extrapolation_tol {
        let eps = integrals.last().expect("grid is non-empty").eps / 2.0;
        run(eps, &mut integrals, &mut warnings)?;
        refinements += 1;
    }
    let all = pairs(&integrals);
    let window = if refinements > 0 { &all[all.len() - 4..] } else { &all[..] };
    let ex = epsilon_extrapolate(window)?;
    warnings.extend(ex.warnings);

    let two_pi_i = 2.0 * PI * I;
    let normalized_winding = -ex.value / two_pi_i;
    let lhs = two_pi_i * counts.expected();
    let residual = (-ex.value - lhs).norm();
    let rounded_count = round_half(normalized_winding.re);
    let pass = residual < 0.1 * 2.0 * PI && rounded_count == counts.expected();
    Ok(LevinsonReport {
        counts,
        bound_states: spectral.bound_states.clone(),
        edge_exponents: [spectral.edge_exponents[0].exponent, spectral.edge_exponents[1].exponent],
        eps_grid: integrals.iter().map(|c| c.eps).collect(),
        integrals,
        extrapolated: ex.value,
        normalized_winding,
        lhs,
        residual,
        rounded_count,
        pass,
        warnings,
    })
}
