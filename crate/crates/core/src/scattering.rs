//! Wronskians, scattering coefficients `M±`, `N±`, the scattering matrix,
//! its determinant and the time delay.
//!
//! Coefficients are defined through
//! `u₊^z = u₋^z M₊ + u₋^{1/z} N₊` and `u₋^{1/z} = u₊^{1/z} M₋ + u₊^z N₋`.

use nalgebra::DVector;
use serde::Serialize;

use crate::jost::{jost_derivative, jost_minus, jost_plus, JostSolution, Side, Window};
use crate::lattice::{edge_proximity, nu, nu_derivative, EDGE_TOL};
use crate::linalg::{det, identity, inverse, op_norm, reciprocal_condition, singular_values, solve};
use crate::{CMat, LabError, Potential, Result, Warning, C64};

/// `M±` counts as singular below this reciprocal condition.
pub const INVERTIBILITY_RCOND: f64 = 1e-13;

const I: C64 = C64::new(0.0, 1.0);

/// `W(u, v)(n) = i (u(n+1)ᴴ v(n) − u(n)ᴴ v(n+1))`.
pub fn wronskian(u: &JostSolution, v: &JostSolution, n: i64) -> Result<CMat> {
    fn get(s: &JostSolution, k: i64) -> Result<&CMat> {
        s.value(k).ok_or_else(|| LabError::Window(format!("site {k} is outside the window [{}, {}]", s.window.nmin, s.window.nmax)))
    }
    if u.dim() != v.dim() {
        return Err(LabError::Window("Wronskian of solutions with different L".into()));
    }
    let (u0, u1, v0, v1) = (get(u, n)?, get(u, n + 1)?, get(v, n)?, get(v, n + 1)?);
    Ok((u1.adjoint() * v0 - u0.adjoint() * v1) * I)
}

/// Wronskian of the `z`-derivatives, `d/dz W(u^{z̄}, v^z)`, where `u` carries
/// the solution at `z̄` (so `d/dz u^{z̄}(n)ᴴ = (u̇^{z̄}(n))ᴴ`).
fn wronskian_derivative(u: &JostSolution, v: &JostSolution, n: i64) -> Result<CMat> {
    let need = |o: Option<&CMat>| o.ok_or_else(|| LabError::Window("derivative not available at the evaluation site".into())).cloned();
    let (u0, u1) = (need(u.value(n))?, need(u.value(n + 1))?);
    let (v0, v1) = (need(v.value(n))?, need(v.value(n + 1))?);
    let (du0, du1) = (need(u.derivative(n))?, need(u.derivative(n + 1))?);
    let (dv0, dv1) = (need(v.derivative(n))?, need(v.derivative(n + 1))?);
    Ok((du1.adjoint() * &v0 - du0.adjoint() * &v1 + u1.adjoint() * dv0 - u0.adjoint() * dv1) * I)
}

/// Magnitude of the two products forming `W(u, v)(n)`; rounding in the
/// computed Wronskian is relative to this, not to `||W||` (which may be 0).
pub fn wronskian_scale(u: &JostSolution, v: &JostSolution, n: i64) -> Result<f64> {
    let norm = |s: &JostSolution, k: i64| s.value(k).map(op_norm).ok_or_else(|| LabError::Window(format!("site {k} outside window")));
    Ok(norm(u, n + 1)? * norm(v, n)? + norm(u, n)? * norm(v, n + 1)?)
}

/// Largest deviation `||W(n) − W(m)||` over all admissible sites, divided
/// by `max(1, max_n wronskian_scale(n))`.
pub fn wronskian_constancy(u: &JostSolution, v: &JostSolution) -> Result<f64> {
    let lo = u.window.nmin.max(v.window.nmin);
    let hi = u.window.nmax.min(v.window.nmax);
    if hi - lo < 2 {
        return Err(LabError::Window("constancy needs an overlap of at least three sites".into()));
    }
    let ws: Vec<CMat> = (lo..hi).map(|n| wronskian(u, v, n)).collect::<Result<_>>()?;
    let scale = (lo..hi).map(|n| wronskian_scale(u, v, n)).collect::<Result<Vec<_>>>()?.into_iter().fold(1.0, f64::max);
    let mut worst: f64 = 0.0;
    for (i, a) in ws.iter().enumerate() {
        for b in &ws[i + 1..] {
            worst = worst.max(op_norm(&(a - b)));
        }
    }
    Ok(worst / scale)
}

fn site(v: &Potential) -> i64 {
    v.support().0 - 1
}

fn require_generic(z: C64) -> Result<()> {
    if z == C64::new(0.0, 0.0) || z == C64::new(1.0, 0.0) || z == C64::new(-1.0, 0.0) {
        return Err(LabError::Domain(format!("scattering coefficients are undefined at z = {z}")));
    }
    Ok(())
}

/// `M₊^z = ν^z W(u₋^{1/z̄}, u₊^z)`.
pub fn m_plus(z: C64, v: &Potential) -> Result<CMat> {
    require_generic(z)?;
    let w = Window::around(v);
    let um = jost_minus(z.conj(), v, w)?;
    let up = jost_plus(z, v, w)?;
    Ok(wronskian(&um, &up, site(v))? * nu(z)?)
}

/// `M₋^z = −ν^z W(u₊^{z̄}, u₋^{1/z})`.
pub fn m_minus(z: C64, v: &Potential) -> Result<CMat> {
    require_generic(z)?;
    let w = Window::around(v);
    let up = jost_plus(z.conj(), v, w)?;
    let um = jost_minus(z, v, w)?;
    Ok(wronskian(&up, &um, site(v))? * -nu(z)?)
}

/// `M₋^z` and `d/dz M₋^z = −ν̇ W − ν Ẇ`.
pub fn m_minus_with_derivative(z: C64, v: &Potential) -> Result<(CMat, CMat)> {
    require_generic(z)?;
    let w = Window::around(v);
    let up = jost_derivative(z.conj(), v, Side::Plus, w)?;
    let um = jost_derivative(z, v, Side::Minus, w)?;
    let n = site(v);
    let wr = wronskian(&up, &um, n)?;
    let dw = wronskian_derivative(&up, &um, n)?;
    let (nu_z, dnu) = (nu(z)?, nu_derivative(z)?);
    Ok((&wr * -nu_z, wr * -dnu - dw * nu_z))
}

/// `d/dz log det M₋^z = tr((M₋^z)^{-1} d/dz M₋^z)`.
pub fn log_det_derivative_m_minus(z: C64, v: &Potential) -> Result<C64> {
    let (m, dm) = m_minus_with_derivative(z, v)?;
    let x = solve(&m, &dm)?;
    Ok(x.trace())
}

/// Scattering coefficients at one `z`.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringData {
    pub z: C64,
    #[serde(skip)]
    pub m_plus: CMat,
    #[serde(skip)]
    pub m_minus: CMat,
    #[serde(skip)]
    pub n_plus: CMat,
    #[serde(skip)]
    pub n_minus: CMat,
    /// `2L×2L` scattering matrix, when `|z| <= 1` and `M±` are invertible.
    #[serde(skip)]
    pub s: Option<CMat>,
    /// Reciprocal condition of the worse of `M±`.
    pub condition: f64,
    pub warnings: Vec<Warning>,
}

impl ScatteringData {
    pub fn dim(&self) -> usize {
        self.m_plus.nrows()
    }

    /// `(T₊, R₋, R₊, T₋)` blocks of `S`.
    pub fn blocks(&self) -> Option<(CMat, CMat, CMat, CMat)> {
        let s = self.s.as_ref()?;
        let l = self.dim();
        Some((
            s.view((0, 0), (l, l)).into_owned(),
            s.view((0, l), (l, l)).into_owned(),
            s.view((l, 0), (l, l)).into_owned(),
            s.view((l, l), (l, l)).into_owned(),
        ))
    }

    pub fn transmission_plus(&self) -> Option<CMat> {
        self.blocks().map(|b| b.0)
    }

    pub fn reflection_plus(&self) -> Option<CMat> {
        self.blocks().map(|b| b.2)
    }
}

fn stack(top_left: &CMat, top_right: &CMat, bottom_left: &CMat, bottom_right: &CMat) -> CMat {
    let l = top_left.nrows();
    let mut m = CMat::zeros(2 * l, 2 * l);
    m.view_mut((0, 0), (l, l)).copy_from(top_left);
    m.view_mut((0, l), (l, l)).copy_from(top_right);
    m.view_mut((l, 0), (l, l)).copy_from(bottom_left);
    m.view_mut((l, l), (l, l)).copy_from(bottom_right);
    m
}

/// Solves the two-site system `[a(n) b(n); a(n+1) b(n+1)] [X; Y] = [c(n); c(n+1)]`
/// for `(X, Y)` with column equilibration.
fn two_site_solve(z: C64, a: &JostSolution, b: &JostSolution, c: &JostSolution, n: i64) -> Result<(CMat, CMat)> {
    let l = a.dim();
    let val = |s: &JostSolution, k: i64| s.value(k).cloned().ok_or_else(|| LabError::Window(format!("site {k} outside window")));
    let mut sys = stack(&val(a, n)?, &val(b, n)?, &val(a, n + 1)?, &val(b, n + 1)?);
    let mut rhs = CMat::zeros(2 * l, l);
    rhs.view_mut((0, 0), (l, l)).copy_from(&val(c, n)?);
    rhs.view_mut((l, 0), (l, l)).copy_from(&val(c, n + 1)?);
    let scales: Vec<f64> = (0..2 * l).map(|j| sys.column(j).norm()).collect();
    for (j, s) in scales.iter().enumerate() {
        if *s == 0.0 {
            return Err(LabError::SingularBasis { z });
        }
        sys.column_mut(j).scale_mut(1.0 / s);
    }
    let sv = singular_values(&sys);
    if sv.last().copied().unwrap_or(0.0) < 1e-13 * sv[0] {
        return Err(LabError::SingularBasis { z });
    }
    let mut x = solve(&sys, &rhs)?;
    for (j, s) in scales.iter().enumerate() {
        x.row_mut(j).scale_mut(1.0 / s);
    }
    Ok((x.view((0, 0), (l, l)).into_owned(), x.view((l, 0), (l, l)).into_owned()))
}

/// `M±` from the Wronskian formulas and `N±` from the two-site linear
/// systems (valid for every `z ∉ {0, ±1}`).
pub fn coefficients(z: C64, v: &Potential) -> Result<ScatteringData> {
    require_generic(z)?;
    let w = Window::around(v);
    let (a, b) = v.support();
    let mut warnings = Vec::new();
    if edge_proximity(z) < EDGE_TOL {
        warnings.push(Warning::NearEdge { proximity: edge_proximity(z) });
    }
    let m_plus = m_plus(z, v)?;
    let m_minus = m_minus(z, v)?;

    let up_z = jost_plus(z, v, w)?;
    let up_inv = jost_plus(z.inv(), v, w)?;
    let um_inv = jost_minus(z, v, w)?; // u₋^{1/z}
    let um_z = jost_minus(z.inv(), v, w)?; // u₋^{z}

    let (_, n_plus) = two_site_solve(z, &um_z, &um_inv, &up_z, a - 1)?;
    let (_, n_minus) = two_site_solve(z, &up_inv, &up_z, &um_inv, b)?;

    let condition = reciprocal_condition(&m_plus).min(reciprocal_condition(&m_minus));
    let s = if z.norm() <= 1.0 + 1e-12 && condition >= INVERTIBILITY_RCOND {
        let mpi = inverse(&m_plus)?;
        let mmi = inverse(&m_minus)?;
        Some(stack(&mpi, &(-&n_minus * &mmi), &(-&n_plus * &mpi), &mmi))
    } else {
        None
    };
    Ok(ScatteringData { z, m_plus, m_minus, n_plus, n_minus, s, condition, warnings })
}

/// `N₊ = −ν W(u₋^{z̄}, u₊^z)` and `N₋ = ν W(u₊^{1/z̄}, u₋^{1/z})`, the
/// Wronskian route valid for `|z| >= 1`.
pub fn n_from_wronskians(z: C64, v: &Potential) -> Result<(CMat, CMat)> {
    require_generic(z)?;
    let w = Window::around(v);
    let n = site(v);
    let nu_z = nu(z)?;
    let um_zbar = jost_minus(z.conj().inv(), v, w)?;
    let up_z = jost_plus(z, v, w)?;
    let up_inv_zbar = jost_plus(z.conj().inv(), v, w)?;
    let um_inv = jost_minus(z, v, w)?;
    Ok((wronskian(&um_zbar, &up_z, n)? * -nu_z, wronskian(&up_inv_zbar, &um_inv, n)? * nu_z))
}

/// Coefficients with the scattering matrix required.
pub fn scattering_matrix(z: C64, v: &Potential) -> Result<ScatteringData> {
    if z.norm() > 1.0 + 1e-12 {
        return Err(LabError::Domain(format!("S is defined for |z| <= 1, got |z| = {}", z.norm())));
    }
    let data = coefficients(z, v)?;
    if data.s.is_none() {
        let (rp, rm) = (reciprocal_condition(&data.m_plus), reciprocal_condition(&data.m_minus));
        let (which, rcond) = if rp <= rm { ('+', rp) } else { ('-', rm) };
        return Err(LabError::NonInvertible { which, z, rcond });
    }
    Ok(data)
}

/// `det S^z = det(M₋^{1/z}) / det(M₋^z)`.
pub fn det_s(z: C64, v: &Potential) -> Result<C64> {
    let num = det(&m_minus(z.inv(), v)?);
    let den = det(&m_minus(z, v)?);
    if den == C64::new(0.0, 0.0) {
        return Err(LabError::NonInvertible { which: '-', z, rcond: 0.0 });
    }
    Ok(num / den)
}

/// Time delay `d/dz log det S^z`, as the difference of the two
/// `log det M₋` derivatives (the `1/z` leg carries the factor `−1/z²`).
pub fn time_delay(z: C64, v: &Potential) -> Result<C64> {
    let outer = log_det_derivative_m_minus(z.inv(), v)?;
    let inner = log_det_derivative_m_minus(z, v)?;
    Ok(-outer / (z * z) - inner)
}

/// `det [[A, B], [C, D]] = det(D) det(A − B D⁻¹ C)`.
pub fn schur_det(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> Result<C64> {
    if reciprocal_condition(d) < INVERTIBILITY_RCOND {
        return Err(LabError::Singular("Schur complement needs an invertible D block".into()));
    }
    let x = solve(d, c)?;
    Ok(det(d) * det(&(a - b * x)))
}

/// Residuals of the scattering identities on the unit circle. Each residual
/// is divided by `max(1, ||A||·||B||)` for the largest product `AB` in the
/// identity: near `z = ±1` the coefficients grow like `1/|z ∓ 1|`, and an
/// absolute residual would only measure that growth times machine epsilon.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub z: C64,
    /// `max(||M±||, ||N±||)` at `z`.
    pub coefficient_norm: f64,
    /// `(M₊^z)ᴴ = M₋^{z̄}`
    pub adjoint_m: f64,
    /// `(N₊^z)ᴴ = −N₋^z`
    pub adjoint_n: f64,
    /// `(M₋)ᴴM₋ = 1 + (N₋)ᴴN₋`
    pub i2: f64,
    /// `M₊N₋ = −N₊^{1/z}M₋`
    pub i3: f64,
    /// `M₋N₊ = −N₋^{1/z}M₊`
    pub i5: f64,
    /// `(M₊)ᴴM₊ = 1 + (N₊)ᴴN₊`
    pub i6: f64,
    /// `SᴴS = 1`
    pub unitarity: f64,
    /// `det S = det(M₋^{1/z})/det(M₋^z)`
    pub split: f64,
    /// `det S = det(M₋)^{-1} det(M₊^{-1} − N₋N₊M₊^{-1})`, and the block Schur formula
    pub schur: f64,
    /// `N±` from the two-site systems vs the Wronskian formulas
    pub n_routes: f64,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        [self.adjoint_m, self.adjoint_n, self.i2, self.i3, self.i5, self.i6, self.unitarity, self.split, self.schur, self.n_routes]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn identity_suite(z: C64, v: &Potential) -> Result<IdentityReport> {
    let d = scattering_matrix(z, v)?;
    let conj = coefficients(z.conj(), v)?;
    let inv = coefficients(z.inv(), v)?;
    let l = d.dim();
    let one = identity(l);
    let s = d.s.as_ref().expect("scattering_matrix populates S");
    let nrm = op_norm;
    let rel = |r: f64, scale: f64| r / scale.max(1.0);

    let coefficient_norm = [&d.m_plus, &d.m_minus, &d.n_plus, &d.n_minus].into_iter().map(nrm).fold(0.0, f64::max);
    let adjoint_m = rel(nrm(&(d.m_plus.adjoint() - &conj.m_minus)), nrm(&d.m_plus));
    let adjoint_n = rel(nrm(&(d.n_plus.adjoint() + &d.n_minus)), nrm(&d.n_plus));
    let i2 = rel(nrm(&(d.m_minus.adjoint() * &d.m_minus - &one - d.n_minus.adjoint() * &d.n_minus)), nrm(&d.m_minus).powi(2));
    let i3 = rel(nrm(&(&d.m_plus * &d.n_minus + &inv.n_plus * &d.m_minus)), nrm(&d.m_plus) * nrm(&d.n_minus));
    let i5 = rel(nrm(&(&d.m_minus * &d.n_plus + &inv.n_minus * &d.m_plus)), nrm(&d.m_minus) * nrm(&d.n_plus));
    let i6 = rel(nrm(&(d.m_plus.adjoint() * &d.m_plus - &one - d.n_plus.adjoint() * &d.n_plus)), nrm(&d.m_plus).powi(2));
    let unitarity = nrm(&(s.adjoint() * s - identity(2 * l)));

    let det_direct = det(s);
    let split = (det_direct - det_s(z, v)?).norm();
    let mpi = inverse(&d.m_plus)?;
    let (ta, tb, tc, td) = d.blocks().expect("S present");
    let schur_blocks = schur_det(&ta, &tb, &tc, &td)?;
    let factored = det(&(&mpi - &d.n_minus * &d.n_plus * &mpi)) / det(&d.m_minus);
    let schur = (det_direct - factored).norm().max((det_direct - schur_blocks).norm());

    let (np, nm) = n_from_wronskians(z, v)?;
    let n_routes = rel(nrm(&(np - &d.n_plus)).max(nrm(&(nm - &d.n_minus))), coefficient_norm);
    Ok(IdentityReport { z, coefficient_norm, adjoint_m, adjoint_n, i2, i3, i5, i6, unitarity, split, schur, n_routes })
}

/// Diagonal helper for tests and callers building block-diagonal data.
pub fn diag(values: &[C64]) -> CMat {
    CMat::from_diagonal(&DVector::from_column_slice(values))
}
