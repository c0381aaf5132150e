//! Bound states (zeros of `det M₋` in the disc), half-bound states at the
//! band edges, band-edge exponents and a dense-truncation oracle.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::Serialize;

use crate::jost::{jost_minus, jost_plus, Window};
use crate::linalg::{det, kernel, singular_values, Kernel};
use crate::scattering::{coefficients, m_minus, m_minus_with_derivative, wronskian, wronskian_scale};
use crate::{CMat, LabError, Potential, Result, Warning, C64};

#[derive(Debug, Clone, Serialize)]
pub struct SpectralConfig {
    /// Exclusion zone around the origin and the edges.
    pub delta: f64,
    /// Scan points per unit length of the real axis.
    pub grid_density: usize,
    /// Relative singular-value threshold for kernels.
    pub rank_tol: f64,
    /// How often the scan grid may be doubled on a grid-too-coarse warning.
    pub max_grid_doublings: u32,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { delta: 1e-6, grid_density: 2000, rank_tol: 1e-8, max_grid_doublings: 3 }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.25) {
            return Err(LabError::Config(format!("delta must lie in (0, 0.25), got {}", self.delta)));
        }
        if self.grid_density < 10 {
            return Err(LabError::Config("grid density must be at least 10".into()));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(LabError::Config(format!("rank tolerance must lie in (0, 1), got {}", self.rank_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundState {
    pub z: f64,
    pub energy: f64,
    pub multiplicity: usize,
    /// Orthonormal basis of `Ker M₋^z` (`L × multiplicity`).
    #[serde(skip)]
    pub kernel: CMat,
}

#[derive(Debug, Clone, Serialize)]
pub struct HalfBound {
    pub edge: i8,
    pub count: usize,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    #[serde(skip)]
    pub kernel: CMat,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeFit {
    pub edge: i8,
    pub exponent: f64,
    /// `|det M₋| / t^{round(exponent)}` at the smallest sample `t`.
    pub constant: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub bound_states: Vec<BoundState>,
    pub j_b: usize,
    pub j_h_plus: usize,
    pub j_h_minus: usize,
    pub half_bound: Vec<HalfBound>,
    pub edge_exponents: Vec<EdgeFit>,
    pub warnings: Vec<Warning>,
}

impl SpectralReport {
    pub fn j_h(&self) -> usize {
        self.j_h_plus + self.j_h_minus
    }
}

fn sigma_min(v: &Potential, x: f64) -> f64 {
    m_minus(C64::new(x, 0.0), v).map(|m| *singular_values(&m).last().unwrap()).unwrap_or(f64::INFINITY)
}

/// Golden-section minimisation of `f` on `[lo, hi]`.
fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 { x1 } else { x2 }
}

fn kernel_of(m: &CMat, rank_tol: f64) -> Kernel {
    let smax = singular_values(m)[0];
    kernel(m, rank_tol * smax.max(1.0))
}

/// Phase increment of `f` over the circle `|z − c| = ρ`, divided by `2π`,
/// with adaptive subdivision wherever the phase moves more than `π/4`.
pub fn winding_number<F: Fn(C64) -> Result<C64>>(f: F, c: C64, rho: f64) -> Result<f64> {
    let point = |t: f64| c + C64::from_polar(rho, t);
    let tau = std::f64::consts::TAU;
    let mut total = 0.0;
    let n0 = 64;
    let mut stack: Vec<(f64, f64, C64, C64, u32)> = Vec::new();
    let mut prev = f(point(0.0))?;
    for k in 0..n0 {
        let (t0, t1) = (tau * k as f64 / n0 as f64, tau * (k + 1) as f64 / n0 as f64);
        let next = f(point(t1))?;
        stack.push((t0, t1, prev, next, 0));
        prev = next;
        while let Some((a, b, fa, fb, depth)) = stack.pop() {
            if fa == C64::new(0.0, 0.0) || fb == C64::new(0.0, 0.0) {
                return Err(LabError::Precondition("function vanishes on the winding contour".into()));
            }
            let step = (fb / fa).arg();
            if step.abs() > std::f64::consts::FRAC_PI_4 && depth < 30 {
                let m = 0.5 * (a + b);
                let fm = f(point(m))?;
                stack.push((m, b, fm, fb, depth + 1));
                stack.push((a, m, fa, fm, depth + 1));
            } else {
                total += step;
            }
        }
    }
    Ok(total / tau)
}

/// Integer winding of `det M₋` around `r`, shrinking the radius by 4 until
/// two consecutive radii agree (at most three reductions).
pub fn multiplicity_with_radius(r: f64, v: &Potential, rho: f64) -> Result<usize> {
    if !(r.abs() > 0.0 && r.abs() < 1.0) {
        return Err(LabError::Precondition(format!("root location {r} must lie in (-1,0) ∪ (0,1)")));
    }
    let f = |z: C64| m_minus(z, v).map(|m| det(&m));
    let grade = |rho: f64| -> Option<i64> {
        let w = winding_number(f, C64::new(r, 0.0), rho).ok()?;
        let k = w.round();
        ((w - k).abs() < 0.05).then_some(k as i64)
    };
    let mut rho = rho.min(r.abs() / 2.0).min((1.0 - r.abs()) / 2.0);
    let mut last = grade(rho);
    for _ in 0..3 {
        rho /= 4.0;
        let cur = grade(rho);
        if let (Some(a), Some(b)) = (last, cur) {
            if a == b {
                return usize::try_from(a).map_err(|_| LabError::WindingNotConverged { r });
            }
        }
        last = cur;
    }
    Err(LabError::WindingNotConverged { r })
}

/// Order of the zero of `det M₋` at `r`, by the argument principle.
pub fn multiplicity(r: f64, v: &Potential) -> Result<usize> {
    let m = m_minus(C64::new(r, 0.0), v)?;
    let sv = singular_values(&m);
    let tol = SpectralConfig::default().rank_tol;
    if *sv.last().unwrap() > tol * sv[0].max(1.0) {
        return Err(LabError::Precondition(format!("det M₋ does not vanish at z = {r}")));
    }
    multiplicity_with_radius(r, v, 1e-3)
}

fn scan_interval(v: &Potential, lo: f64, hi: f64, density: usize) -> Vec<f64> {
    let n = ((hi - lo) * density as f64).ceil() as usize + 1;
    let xs: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    let f: Vec<f64> = xs
        .par_iter()
        .map(|&x| m_minus(C64::new(x, 0.0), v).map(|m| det(&m).norm()).unwrap_or(f64::INFINITY))
        .collect();
    let mut out = Vec::new();
    for k in 0..n {
        let left = if k == 0 { f64::INFINITY } else { f[k - 1] };
        let right = if k + 1 == n { f64::INFINITY } else { f[k + 1] };
        if f[k] <= left && f[k] <= right {
            let a = xs[k.saturating_sub(1)];
            let b = xs[(k + 1).min(n - 1)];
            out.push(golden(|x| sigma_min(v, x), a, b));
        }
    }
    out
}

/// Zeros of `det M₋` on `(−1, 0) ∪ (0, 1)` with multiplicities and kernels.
pub fn bound_states(v: &Potential, config: &SpectralConfig) -> Result<(Vec<BoundState>, Vec<Warning>)> {
    config.validate()?;
    let mut warnings = Vec::new();
    let mut density = config.grid_density;
    for attempt in 0..=config.max_grid_doublings {
        let spacing = 1.0 / density as f64;
        let d = config.delta;
        let mut candidates = scan_interval(v, -1.0 + d, -d, density);
        candidates.extend(scan_interval(v, d, 1.0 - d, density));

        let mut roots: Vec<(f64, Kernel)> = Vec::new();
        for r in candidates {
            let m = m_minus(C64::new(r, 0.0), v)?;
            let k = kernel_of(&m, config.rank_tol);
            if k.dim() == 0 {
                continue;
            }
            if roots.iter().any(|(q, _)| (q - r).abs() < 1e-9) {
                continue;
            }
            roots.push((r, k));
        }
        roots.sort_by(|a, b| a.0.total_cmp(&b.0));

        let crowded = roots.windows(2).any(|w| w[1].0 - w[0].0 < 2.0 * spacing);
        if crowded && attempt < config.max_grid_doublings {
            warnings.push(Warning::GridTooCoarse { spacing });
            density *= 2;
            continue;
        }
        if crowded {
            warnings.push(Warning::GridTooCoarse { spacing });
        }

        let gaps: Vec<f64> = roots.windows(2).map(|w| w[1].0 - w[0].0).collect();
        let mut out = Vec::with_capacity(roots.len());
        for (i, (r, k)) in roots.into_iter().enumerate() {
            let neighbour = [i.checked_sub(1).and_then(|j| gaps.get(j)), gaps.get(i)]
                .into_iter()
                .flatten()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            let rho = (neighbour / 3.0).min(spacing);
            if k.borderline {
                let sv = *k.singular_values.iter().rev().find(|&&s| s > k.threshold / 10.0).unwrap_or(&0.0);
                warnings.push(Warning::BorderlineRank { singular_value: sv, threshold: k.threshold });
            }
            let wind = multiplicity_with_radius(r, v, rho)?;
            if wind != k.dim() {
                return Err(LabError::UnresolvedRoot { r, winding: wind as i64, kernel: k.dim() });
            }
            out.push(BoundState { z: r, energy: r + 1.0 / r, multiplicity: wind, kernel: k.basis });
        }
        return Ok((out, warnings));
    }
    unreachable!("the final attempt always returns")
}

/// Both sides of the norm identity at a bound state, per kernel vector.
#[derive(Debug, Clone, Serialize)]
pub struct NormIdentity {
    /// `(N₋^r α)ᴴ (d/dz M₋)|_r α`
    pub lhs: C64,
    /// `r⁻¹ ||u₋^{1/r} α||²`
    pub weighted_norm: f64,
    /// `|lhs + r⁻¹ ||u₋^{1/r} α||²|`
    pub residual: f64,
}

/// Checks `(N₋^r α)ᴴ Ṁ₋^r α = −r⁻¹ ||u₋^{1/r} α||²` for every column `α` of
/// `alphas`. The `ℓ²` norm uses the Jost values up to the support end and the
/// exact geometric tail `u₋^{1/r}(n) α = r^n N₋^r α` beyond it.
pub fn lemma_tuncay_check(r: f64, v: &Potential, alphas: &CMat) -> Result<Vec<NormIdentity>> {
    if alphas.ncols() == 0 {
        return Err(LabError::Kernel("no kernel vectors supplied".into()));
    }
    let z = C64::new(r, 0.0);
    let (m, dm) = m_minus_with_derivative(z, v)?;
    let n_minus = coefficients(z, v)?.n_minus;
    let (a, b) = v.support();
    let r2 = r * r;
    // left tail r^{2K} below 1e-18 relative to the support values
    let k = ((1e-18f64).ln() / r2.ln()).ceil().max(1.0) as i64;
    let w = Window::new(a - k, b + 1)?;
    let u = jost_minus(z, v, w)?;
    let scale = singular_values(&m)[0].max(1.0);

    let mut out = Vec::with_capacity(alphas.ncols());
    for alpha in alphas.column_iter() {
        let alpha = alpha.into_owned();
        let resid_kernel = (&m * &alpha).norm();
        if resid_kernel > 1e-6 * scale * alpha.norm() {
            return Err(LabError::Kernel(format!("vector is not in Ker M₋ (||M₋α|| = {resid_kernel:.3e})")));
        }
        let na = &n_minus * &alpha;
        let lhs = (na.adjoint() * &dm * &alpha)[(0, 0)];
        let mut norm2: f64 = (a - k..=b).map(|n| (u.value(n).unwrap() * &alpha).norm_squared()).sum();
        norm2 += na.norm_squared() * r2.powi((b + 1) as i32) / (1.0 - r2);
        let weighted_norm = norm2 / r;
        out.push(NormIdentity { lhs, weighted_norm, residual: (lhs + weighted_norm).norm() });
    }
    Ok(out)
}

/// Half-bound states at `edge = ±1`: the kernel of `W(u₋^{edge}, u₊^{edge})`
/// evaluated just left of the support. The rank threshold is `1e−8` times
/// the magnitude of the two products forming the Wronskian, so an exact
/// cancellation (e.g. `V = 0`) registers as full deficiency.
pub fn half_bound(v: &Potential, edge: i8) -> Result<HalfBound> {
    if edge != 1 && edge != -1 {
        return Err(LabError::Domain(format!("edge must be ±1, got {edge}")));
    }
    let z = C64::new(edge as f64, 0.0);
    let w = Window::around(v);
    let um = jost_minus(z, v, w)?;
    let up = jost_plus(z, v, w)?;
    let n = v.support().0 - 1;
    let wr = wronskian(&um, &up, n)?;
    let scale = wronskian_scale(&um, &up, n)?;
    let threshold = 1e-8 * scale;
    let k = kernel(&wr, threshold);
    let mut warnings = Vec::new();
    if k.borderline {
        let sv = k.singular_values.iter().copied().find(|&s| s > threshold / 10.0 && s < 10.0 * threshold).unwrap_or(threshold);
        warnings.push(Warning::BorderlineRank { singular_value: sv, threshold });
    }
    Ok(HalfBound { edge, count: k.dim(), singular_values: k.singular_values.clone(), threshold, kernel: k.basis, warnings })
}

/// Sample offsets `t = |z − edge|` for the band-edge fit: seven half-decade
/// steps starting at `10^{−2−shift}`.
pub fn edge_samples(shift: u32) -> Vec<f64> {
    (0..7).map(|k| 10f64.powf(-2.0 - shift as f64 - 0.5 * k as f64)).collect()
}

fn fit_window(v: &Potential, edge: i8, shift: u32) -> Result<EdgeFit> {
    let ts = edge_samples(shift);
    let mut xs = Vec::with_capacity(ts.len());
    let mut ys = Vec::with_capacity(ts.len());
    let mut last_det = 0.0;
    for &t in &ts {
        let z = C64::new(edge as f64 * (1.0 - t), 0.0);
        let d = det(&m_minus(z, v)?).norm();
        if d == 0.0 {
            return Err(LabError::Singular(format!("det M₋ vanishes at z = {}", z.re)));
        }
        xs.push(t.ln());
        ys.push(d.ln());
        last_det = d;
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    let constant = last_det / ts.last().unwrap().powf(slope.round());
    Ok(EdgeFit { edge, exponent: slope, constant, residual, warnings: Vec::new() })
}

/// Extra decades the sample window may move towards the edge when the fit
/// is poor (a bound state close to the edge delays the asymptotic regime).
pub const EDGE_FIT_SHIFTS: u32 = 4;

/// Least-squares slope of `log|det M₋^z|` against `log t` along
/// `z = edge·(1 − t)`, `t ∈ [1e−5, 1e−2]`. A poor fit moves the window one
/// decade closer to the edge, up to [`EDGE_FIT_SHIFTS`] times.
pub fn band_edge_exponent(v: &Potential, edge: i8) -> Result<EdgeFit> {
    if edge != 1 && edge != -1 {
        return Err(LabError::Domain(format!("edge must be ±1, got {edge}")));
    }
    let mut fit = fit_window(v, edge, 0)?;
    for shift in 1..=EDGE_FIT_SHIFTS {
        if fit.residual <= 0.05 {
            break;
        }
        fit = fit_window(v, edge, shift)?;
    }
    if fit.residual > 0.05 {
        fit.warnings.push(Warning::PoorFit { residual: fit.residual });
    }
    Ok(fit)
}

/// Largest matrix dimension `dense_truncation` accepts by default.
pub const DENSE_CAP: usize = 4000;

#[derive(Debug, Clone, Serialize)]
pub struct DenseSpectrum {
    /// Eigenvalues with `|E| > 2 + 1e−6`, ascending.
    pub eigenvalues: Vec<f64>,
    pub count: usize,
}

/// Spectrum of `H` restricted to `[−N, N]` (Dirichlet truncation).
pub fn dense_truncation(v: &Potential, n: i64, cap: usize) -> Result<DenseSpectrum> {
    let (a, b) = v.support();
    let radius = a.abs().max(b.abs());
    if n < radius + 20 {
        return Err(LabError::Precondition(format!("N = {n} must be at least support radius + 20 = {}", radius + 20)));
    }
    let l = v.dim();
    let size = l * (2 * n as usize + 1);
    if size > cap {
        return Err(LabError::MemoryGuard { size, cap });
    }
    let mut h = CMat::zeros(size, size);
    for (k, site) in (-n..=n).enumerate() {
        let o = k * l;
        if let Some(block) = v.block(site) {
            h.view_mut((o, o), (l, l)).copy_from(block);
        }
        if k + 1 < 2 * n as usize + 1 {
            for i in 0..l {
                h[(o + i, o + l + i)] = C64::new(1.0, 0.0);
                h[(o + l + i, o + i)] = C64::new(1.0, 0.0);
            }
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().filter(|e| e.abs() > 2.0 + 1e-6).collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(DenseSpectrum { count: eigenvalues.len(), eigenvalues })
}

/// Number of eigenvalues of `H` on `[−N, N]` strictly above `e`, by Sylvester
/// inertia of the block `LDLᴴ` factorisation `D_k = V(k) − e − D_{k−1}^{-1}`.
fn count_above(v: &Potential, n: i64, e: f64) -> usize {
    let l = v.dim();
    let shift = CMat::identity(l, l) * C64::new(e, 0.0);
    let mut prev: Option<CMat> = None;
    let mut count = 0;
    for site in -n..=n {
        let mut d = v.block(site).cloned().unwrap_or_else(|| CMat::zeros(l, l)) - &shift;
        if let Some(p) = prev.take() {
            // a singular pivot only happens on a measure-zero set of e
            let inv = p.clone().try_inverse().unwrap_or_else(|| (p + CMat::identity(l, l) * C64::new(1e-300, 0.0)).try_inverse().unwrap());
            d -= inv;
        }
        d = (&d + d.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(d.clone());
        count += eig.eigenvalues.iter().filter(|&&x| x > 0.0).count();
        prev = Some(d);
    }
    count
}

/// Eigenvalues of `H` on `[−N, N]` with `|E| > 2 + 1e−6`, located by inertia
/// counting and bisection. Independent of the scattering machinery and
/// linear in `N`, so it resolves weakly bound states that need large boxes.
pub fn inertia_truncation(v: &Potential, n: i64) -> Result<DenseSpectrum> {
    let (a, b) = v.support();
    let radius = a.abs().max(b.abs());
    if n < radius + 20 {
        return Err(LabError::Precondition(format!("N = {n} must be at least support radius + 20 = {}", radius + 20)));
    }
    let size = v.dim() * (2 * n as usize + 1);
    let vmax = v.entries().map(|(_, m)| crate::linalg::op_norm(m)).fold(0.0, f64::max);
    let top = 2.0 + vmax + 1.0;
    let margin = 2.0 + 1e-6;
    let above = count_above(v, n, margin);
    let below = size - count_above(v, n, -margin);
    // k-th eigenvalue above `margin`: the e where count_above drops from k to k−1
    let locate = |k: usize, mut lo: f64, mut hi: f64, upper: bool| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-14 * mid.abs().max(1.0) {
                break;
            }
            let c = if upper { count_above(v, n, mid) } else { size - count_above(v, n, mid) };
            if (upper && c >= k) || (!upper && c < k) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut eigenvalues = Vec::with_capacity(above + below);
    for k in 1..=below {
        // count of eigenvalues <= e reaches k at the k-th smallest eigenvalue
        eigenvalues.push(locate(k, -top, -margin, false));
    }
    for k in (1..=above).rev() {
        eigenvalues.push(locate(k, margin, top, true));
    }
    Ok(DenseSpectrum { count: eigenvalues.len(), eigenvalues })
}

/// Truncation size for the dense oracle: at least `base`, and large enough
/// that the slowest-decaying bound state `|r|^n` has fallen below `1e−6` at the
/// box boundary (the Dirichlet eigenvalue shift scales like `|r|^{2N}`).
pub fn oracle_size(v: &Potential, roots: &[f64], base: i64) -> i64 {
    let (a, b) = v.support();
    let radius = a.abs().max(b.abs());
    let rmax = roots.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let need = if rmax > 0.0 { ((1e-6f64).ln() / rmax.ln()).ceil() as i64 } else { 0 };
    base.max(radius + 20).max(radius + need)
}

/// Bound states, half-bound states at both edges and the edge exponents.
pub fn spectral_report(v: &Potential, config: &SpectralConfig) -> Result<SpectralReport> {
    let (bound, mut warnings) = bound_states(v, config)?;
    let hp = half_bound(v, 1)?;
    let hm = half_bound(v, -1)?;
    let fits = vec![band_edge_exponent(v, 1)?, band_edge_exponent(v, -1)?];
    for h in [&hp, &hm] {
        warnings.extend(h.warnings.iter().cloned());
    }
    for f in &fits {
        warnings.extend(f.warnings.iter().cloned());
    }
    Ok(SpectralReport {
        j_b: bound.iter().map(|b| b.multiplicity).sum(),
        bound_states: bound,
        j_h_plus: hp.count,
        j_h_minus: hm.count,
        half_bound: vec![hp, hm],
        edge_exponents: fits,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;

    fn single(v: f64) -> Potential {
        Potential::scalar(0, &[v])
    }

    fn diag2(x: f64, y: f64) -> Potential {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(x, 0.0), C64::new(y, 0.0)]));
        Potential::new(2, [(0, m)], None).unwrap()
    }

    #[test]
    fn free_has_no_bound_states() {
        let r = spectral_report(&Potential::zero(2), &SpectralConfig::default()).unwrap();
        assert_eq!(r.j_b, 0);
        assert_eq!((r.j_h_plus, r.j_h_minus), (2, 2));
        assert!(r.edge_exponents.iter().all(|f| f.exponent.abs() < 1e-6));
    }

    #[test]
    fn single_site_bound_state() {
        for (v, z) in [(1.5, 0.5), (-1.5, -0.5)] {
            let (b, _) = bound_states(&single(v), &SpectralConfig::default()).unwrap();
            assert_eq!(b.len(), 1);
            assert!((b[0].z - z).abs() < 1e-10, "{}", b[0].z);
            assert!((b[0].energy - (z + 1.0 / z)).abs() < 1e-10);
            assert_eq!(b[0].multiplicity, 1);
        }
    }

    #[test]
    fn multiplicity_examples() {
        assert_eq!(multiplicity(0.5, &single(1.5)).unwrap(), 1);
        assert_eq!(multiplicity(0.5, &diag2(1.5, 1.5)).unwrap(), 2);
        assert!(matches!(multiplicity(0.3, &Potential::zero(1)), Err(LabError::Precondition(_))));
        let (b, _) = bound_states(&diag2(1.5, 1.5), &SpectralConfig::default()).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].multiplicity, 2);
    }

    #[test]
    fn winding_counts_polynomial_zeros() {
        let f = |z: C64| Ok((z - 0.3).powi(3) * (z + 0.2));
        assert!((winding_number(f, C64::new(0.3, 0.0), 0.1).unwrap() - 3.0).abs() < 1e-12);
        assert!((winding_number(f, C64::new(0.0, 0.0), 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert!(winding_number(f, C64::new(0.8, 0.0), 0.1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn norm_identity_single_site() {
        let v = single(1.5);
        let alpha = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        let r = lemma_tuncay_check(0.5, &v, &alpha).unwrap();
        // ||u₋^2||² = Σ_{n<=0} 4^n + Σ_{n>=1} 4^{-n} = 5/3
        assert!((r[0].weighted_norm - 10.0 / 3.0).abs() < 1e-12);
        assert!((r[0].lhs - C64::new(-10.0 / 3.0, 0.0)).norm() < 1e-12);
        assert!(r[0].residual < 1e-8);
    }

    #[test]
    fn norm_identity_block_diagonal() {
        let v = diag2(1.5, 1.5);
        let (b, _) = bound_states(&v, &SpectralConfig::default()).unwrap();
        for row in lemma_tuncay_check(b[0].z, &v, &b[0].kernel).unwrap() {
            assert!(row.residual < 1e-8, "{row:?}");
        }
    }

    #[test]
    fn norm_identity_rejects_non_kernel() {
        let alpha = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        assert!(matches!(lemma_tuncay_check(0.3, &single(1.5), &alpha), Err(LabError::Kernel(_))));
        assert!(lemma_tuncay_check(0.5, &single(1.5), &CMat::zeros(1, 0)).is_err());
    }

    #[test]
    fn half_bound_examples() {
        for l in 1..=3 {
            let v = Potential::zero(l);
            assert_eq!(half_bound(&v, 1).unwrap().count, l);
            assert_eq!(half_bound(&v, -1).unwrap().count, l);
        }
        let h = half_bound(&single(1.5), 1).unwrap();
        assert_eq!(h.count, 0);
        assert!((h.singular_values[0] - 1.5).abs() < 1e-14);
        assert_eq!(half_bound(&single(1.5), -1).unwrap().count, 0);
        // V(0) = V(1) = 2: u₊^1 is bounded (−1 on the left), an edge resonance
        let tuned = Potential::scalar(0, &[2.0, 2.0]);
        assert_eq!(half_bound(&tuned, 1).unwrap().count, 1);
        assert_eq!(half_bound(&tuned, -1).unwrap().count, 0);
        assert!(half_bound(&tuned, 0).is_err());
    }

    #[test]
    fn edge_exponent_examples() {
        let f = band_edge_exponent(&Potential::zero(1), 1).unwrap();
        assert!(f.exponent.abs() < 1e-6);
        let f = band_edge_exponent(&single(1.5), 1).unwrap();
        assert!((f.exponent + 1.0).abs() < 0.01, "{f:?}");
        assert!((f.constant - 0.75).abs() < 0.01, "{f:?}");
        let f = band_edge_exponent(&Potential::scalar(0, &[2.0, 2.0]), 1).unwrap();
        assert!(f.exponent.abs() < 0.1, "{f:?}");
    }

    #[test]
    fn dense_examples() {
        assert_eq!(dense_truncation(&Potential::zero(1), 50, DENSE_CAP).unwrap().count, 0);
        let d = dense_truncation(&single(1.5), 60, DENSE_CAP).unwrap();
        assert_eq!(d.count, 1);
        assert!((d.eigenvalues[0] - 2.5).abs() < 1e-8);
        let d = dense_truncation(&single(-1.5), 60, DENSE_CAP).unwrap();
        assert!((d.eigenvalues[0] + 2.5).abs() < 1e-8);
        assert!(matches!(dense_truncation(&single(1.5), 10, DENSE_CAP), Err(LabError::Precondition(_))));
        assert!(matches!(dense_truncation(&Potential::zero(3), 1000, DENSE_CAP), Err(LabError::MemoryGuard { .. })));
    }

    #[test]
    fn inertia_matches_dense() {
        let mut rng = random::rng(77);
        for _ in 0..5 {
            let v = random::compact_potential(&mut rng, 2, 4, 2.0);
            let d = dense_truncation(&v, 40, DENSE_CAP).unwrap();
            let s = inertia_truncation(&v, 40).unwrap();
            assert_eq!(d.count, s.count);
            for (x, y) in d.eigenvalues.iter().zip(&s.eigenvalues) {
                assert!((x - y).abs() < 1e-10, "{x} vs {y}");
            }
        }
        let s = inertia_truncation(&single(1.5), 60).unwrap();
        assert_eq!(s.count, 1);
        assert!((s.eigenvalues[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn random_potentials_match_dense_oracle() {
        let mut rng = random::rng(1234);
        for _ in 0..6 {
            let v = random::compact_potential(&mut rng, 2, 4, 2.0);
            let (b, _) = bound_states(&v, &SpectralConfig::default()).unwrap();
            let roots: Vec<f64> = b.iter().map(|s| s.z).collect();
            let n = oracle_size(&v, &roots, 80);
            let d = if n == 80 { dense_truncation(&v, 80, DENSE_CAP).unwrap() } else { inertia_truncation(&v, n).unwrap() };
            let ours: Vec<f64> = b.iter().flat_map(|s| std::iter::repeat(s.energy).take(s.multiplicity)).collect();
            let mut ours = ours;
            ours.sort_by(f64::total_cmp);
            assert_eq!(ours.len(), d.count);
            for (x, y) in ours.iter().zip(&d.eigenvalues) {
                assert!((x - y).abs() < 1e-6, "{x} vs {y}");
            }
        }
    }
}
