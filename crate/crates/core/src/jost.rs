//! Jost solutions `u₊^z` and `u₋^{1/z}` on a finite window.
//!
//! The plus solution is normalised by `u₊^z(n) = z^n·1` to the right of the
//! potential and continued leftwards with the three-term equation
//! `u(n-1) = (E − V(n)) u(n) − u(n+1)`. The minus solution stored for a
//! parameter `z` is `u₋^{1/z}`, equal to `z^{-n}·1` left of the potential.
//! Both are exact for the stored (truncated) potential; the unstored tail
//! is charged once through [`Potential::truncation_bound_right`] /
//! [`Potential::truncation_bound_left`].

use serde::Serialize;

use crate::lattice::{edge_proximity, energy_of};
use crate::linalg::{identity, op_norm};
use crate::{CMat, LabError, Potential, Result, Warning, C64};

/// `|z|^|n|` beyond this is treated as overflow.
const MAX_POWER: f64 = 1e300;

/// Derivatives are flagged inside this distance of `z = ±1`.
pub const DERIVATIVE_EDGE_WARN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

/// Inclusive integer interval `[nmin, nmax]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub nmin: i64,
    pub nmax: i64,
}

impl Window {
    pub fn new(nmin: i64, nmax: i64) -> Result<Self> {
        if nmax < nmin {
            return Err(LabError::Window(format!("empty window [{nmin}, {nmax}]")));
        }
        Ok(Self { nmin, nmax })
    }

    /// Support of `v` padded by two sites on each side.
    pub fn around(v: &Potential) -> Self {
        let (nmin, nmax) = v.default_window();
        Self { nmin, nmax }
    }

    pub fn padded(self, extra: i64) -> Self {
        Self { nmin: self.nmin - extra, nmax: self.nmax + extra }
    }

    pub fn len(&self) -> usize {
        (self.nmax - self.nmin + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.nmin && n <= self.nmax
    }

    pub fn reflected(self) -> Self {
        Self { nmin: -self.nmax, nmax: -self.nmin }
    }
}

/// A matrix-valued solution of `Hu = Eu` on a window.
#[derive(Debug, Clone)]
pub struct JostSolution {
    pub side: Side,
    pub z: C64,
    pub window: Window,
    values: Vec<CMat>,
    derivative: Option<Vec<CMat>>,
    /// Bound on `||u(n) − exact||` from the unstored potential tail.
    pub tail_error: f64,
    pub warnings: Vec<Warning>,
}

impl JostSolution {
    pub fn dim(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn value(&self, n: i64) -> Option<&CMat> {
        self.window.contains(n).then(|| &self.values[(n - self.window.nmin) as usize])
    }

    pub fn derivative(&self, n: i64) -> Option<&CMat> {
        let d = self.derivative.as_ref()?;
        self.window.contains(n).then(|| &d[(n - self.window.nmin) as usize])
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    /// `(n, u(n))` over the window.
    pub fn values(&self) -> impl Iterator<Item = (i64, &CMat)> {
        self.values.iter().enumerate().map(move |(k, m)| (self.window.nmin + k as i64, m))
    }

    /// Asymptotically normalised value: `z^{-n} u(n)` on the plus side,
    /// `z^{n} u(n)` on the minus side. Tends to `1` at the seeding end.
    pub fn tilde(&self, n: i64) -> Option<CMat> {
        let u = self.value(n)?;
        let f = match self.side {
            Side::Plus => self.z.powi(-(n as i32)),
            Side::Minus => self.z.powi(n as i32),
        };
        Some(u * f)
    }

    /// Replaces `u(n)` (test helper for fault injection).
    pub fn set_value(&mut self, n: i64, m: CMat) {
        let k = (n - self.window.nmin) as usize;
        self.values[k] = m;
    }

    /// The same solution viewed as the opposite side for the reflected
    /// potential: `n ↦ u(−n)`.
    pub fn reflected(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        let derivative = self.derivative.clone().map(|mut d| {
            d.reverse();
            d
        });
        Self {
            side: match self.side {
                Side::Plus => Side::Minus,
                Side::Minus => Side::Plus,
            },
            z: self.z,
            window: self.window.reflected(),
            values,
            derivative,
            tail_error: self.tail_error,
            warnings: self.warnings.clone(),
        }
    }
}

fn check_power(z: C64, n: i64) -> Result<()> {
    let lr = z.norm().ln().abs();
    if (n.unsigned_abs() as f64) * lr > MAX_POWER.ln() {
        return Err(LabError::Overflow { n });
    }
    Ok(())
}

fn check_window_powers(z: C64, window: Window, anchor: i64) -> Result<()> {
    for n in [window.nmin, window.nmax, anchor] {
        check_power(z, n)?;
    }
    Ok(())
}

fn check_finite(values: &[CMat], nmin: i64) -> Result<()> {
    for (k, m) in values.iter().enumerate() {
        if m.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(LabError::Overflow { n: nmin + k as i64 });
        }
    }
    Ok(())
}

/// The free solution `z^{±n}·1` with its `z`-derivative.
pub fn free_jost(z: C64, dim: usize, side: Side, window: Window) -> Result<JostSolution> {
    if z == C64::new(0.0, 0.0) {
        return Err(LabError::Domain("Jost solutions need z != 0".into()));
    }
    check_window_powers(z, window, 0)?;
    let id = identity(dim);
    let sign = match side {
        Side::Plus => 1,
        Side::Minus => -1,
    };
    let mut values = Vec::with_capacity(window.len());
    let mut derivative = Vec::with_capacity(window.len());
    for n in window.nmin..=window.nmax {
        let p = sign * n;
        values.push(&id * z.powi(p as i32));
        derivative.push(&id * (p as f64 * z.powi(p as i32 - 1)));
    }
    Ok(JostSolution { side, z, window, values, derivative: Some(derivative), tail_error: 0.0, warnings: Vec::new() })
}

/// `u₊^z` on `window` by backward recursion from the right edge of the support.
pub fn jost_plus(z: C64, v: &Potential, window: Window) -> Result<JostSolution> {
    build(z, v, Side::Plus, window, false)
}

/// `u₋^{1/z}` on `window` by forward recursion from the left edge of the support.
pub fn jost_minus(z: C64, v: &Potential, window: Window) -> Result<JostSolution> {
    build(z, v, Side::Minus, window, false)
}

/// Jost solution with its `z`-derivative, obtained by differentiating the
/// three-term recursion: `u̇(n−1) = (1 − 1/z²) u(n) + (E − V(n)) u̇(n) − u̇(n+1)`
/// on the plus side and the mirror recursion on the minus side.
pub fn jost_derivative(z: C64, v: &Potential, side: Side, window: Window) -> Result<JostSolution> {
    if z == C64::new(1.0, 0.0) || z == C64::new(-1.0, 0.0) {
        return Err(LabError::Domain("Jost derivatives are not defined at z = ±1".into()));
    }
    build(z, v, side, window, true)
}

fn build(z: C64, v: &Potential, side: Side, window: Window, with_derivative: bool) -> Result<JostSolution> {
    if side == Side::Minus {
        // u₋^{1/z}(n) for V is u₊^z(−n) for the reflected potential.
        return build(z, &v.reflected(), Side::Plus, window.reflected(), with_derivative).map(|s| {
            let mut r = s.reflected();
            r.tail_error = v.truncation_bound_left();
            r
        });
    }
    let e = energy_of(z)?;
    let (_, b) = v.support();
    check_window_powers(z, window, b + 1)?;
    let dim = v.dim();
    let id = identity(dim);
    let de = C64::new(1.0, 0.0) - (z * z).inv();

    // Work on [lo, hi] with hi >= b + 1 so that two seeds are always present.
    let lo = window.nmin.min(b);
    let hi = window.nmax.max(b + 1);
    let len = (hi - lo + 1) as usize;
    let mut u: Vec<CMat> = vec![CMat::zeros(dim, dim); len];
    let mut du: Vec<CMat> = if with_derivative { vec![CMat::zeros(dim, dim); len] } else { Vec::new() };
    let idx = |n: i64| (n - lo) as usize;

    for n in (lo..=hi).rev() {
        let k = idx(n);
        if n >= b {
            let zn = z.powi(n as i32);
            u[k] = &id * zn;
            if with_derivative {
                du[k] = &id * (n as f64 * z.powi(n as i32 - 1));
            }
        } else {
            let shift = v.block(n + 1).map(|m| &id * e - m).unwrap_or_else(|| &id * e);
            u[k] = &shift * &u[k + 1] - &u[k + 2];
            if with_derivative {
                du[k] = &u[k + 1] * de + &shift * &du[k + 1] - &du[k + 2];
            }
        }
    }
    let take = |src: Vec<CMat>| -> Vec<CMat> {
        src.into_iter().skip(idx(window.nmin)).take(window.len()).collect()
    };
    let values = take(u);
    check_finite(&values, window.nmin)?;
    let derivative = if with_derivative {
        let d = take(du);
        check_finite(&d, window.nmin)?;
        Some(d)
    } else {
        None
    };
    let mut warnings = Vec::new();
    if with_derivative {
        let p = edge_proximity(z);
        if p < DERIVATIVE_EDGE_WARN {
            warnings.push(Warning::NearEdge { proximity: p });
        }
    }
    Ok(JostSolution { side: Side::Plus, z, window, values, derivative, tail_error: v.truncation_bound_right(), warnings })
}

/// Max over interior `n` of `||u(n+1) + u(n−1) + V(n)u(n) − E u(n)||_F / max(1, ||u(n)||_F)`.
pub fn residual_check(u: &JostSolution, v: &Potential) -> Result<f64> {
    if u.window.len() < 3 {
        return Err(LabError::Window("residual needs at least three sites".into()));
    }
    let e = energy_of(u.z)?;
    let mut worst: f64 = 0.0;
    for n in u.window.nmin + 1..u.window.nmax {
        let c = u.value(n).expect("interior");
        let mut r = u.value(n + 1).expect("interior") + u.value(n - 1).expect("interior") - c * e;
        if let Some(m) = v.block(n) {
            r += m * c;
        }
        worst = worst.max(r.norm() / c.norm().max(1.0));
    }
    Ok(worst)
}

/// Settings for the fixed-point (Volterra) route.
#[derive(Debug, Clone, Copy)]
pub struct VolterraConfig {
    /// Stop when successive iterates differ by less than this in sup norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Output window; defaults to the padded support.
    pub window: Option<Window>,
    /// First site `m` of the `|z| > 1` equation; defaults to the support start.
    pub start: Option<i64>,
}

impl Default for VolterraConfig {
    fn default() -> Self {
        Self { tol: 1e-14, max_iter: 10_000, window: None, start: None }
    }
}

#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub jost: JostSolution,
    pub iterations: usize,
}

/// Solves for the Jost solution through its summation equation instead of
/// the recursion.
///
/// For `|z| <= 1` the normalised sequence `ũ(n) = z^{-n}u₊(n)` satisfies
/// `ũ(n) = 1 + Σ_{j>n} H(z,n,j) V(j) ũ(j)` with
/// `H(z,n,j) = −Σ_{k=0}^{j−n−1} z^{2k+1}`.
///
/// For `|z| > 1` the equation
/// `X(n) = 1 + c Σ_{j>n} V(j)X(j) + c Σ_{j=m}^{n} z^{2(j−n)} V(j) X(j)`,
/// `c = z/(z²−1)`, is a contraction when `Σ_{j>=m} ||V(j)|| < |(z²−1)/(2z)|`.
/// Its solution `Y = z^n X` carries a subdominant `z^{-n} K` component
/// beyond the support, which is removed with `u₊^{1/z}` (itself from the
/// `|z| < 1` equation) so that the result is the same normalised solution
/// the recursion produces.
pub fn volterra_solve(z: C64, v: &Potential, side: Side, tol: f64) -> Result<VolterraSolution> {
    volterra_solve_with(z, v, side, &VolterraConfig { tol, ..VolterraConfig::default() })
}

pub fn volterra_solve_with(z: C64, v: &Potential, side: Side, cfg: &VolterraConfig) -> Result<VolterraSolution> {
    if z == C64::new(0.0, 0.0) {
        return Err(LabError::Domain("Jost solutions need z != 0".into()));
    }
    let window = cfg.window.unwrap_or_else(|| Window::around(v));
    if side == Side::Minus {
        let reflected = VolterraConfig { window: Some(window.reflected()), start: cfg.start.map(|m| -m), ..*cfg };
        let s = volterra_solve_with(z, &v.reflected(), Side::Plus, &reflected)?;
        let mut jost = s.jost.reflected();
        jost.tail_error = v.truncation_bound_left();
        return Ok(VolterraSolution { jost, iterations: s.iterations });
    }
    if z.norm() <= 1.0 + 1e-12 {
        volterra_inside(z, v, window, cfg)
    } else {
        volterra_outside(z, v, window, cfg)
    }
}

/// Route-comparison metric: `sup_n ||a(n) − b(n)|| / max(1, ||b(n)||)` over
/// the shared window.
pub fn route_disagreement(a: &JostSolution, b: &JostSolution) -> f64 {
    let lo = a.window.nmin.max(b.window.nmin);
    let hi = a.window.nmax.min(b.window.nmax);
    (lo..=hi)
        .map(|n| {
            let (x, y) = (a.value(n).expect("shared"), b.value(n).expect("shared"));
            op_norm(&(x - y)) / op_norm(y).max(1.0)
        })
        .fold(0.0, f64::max)
}

fn sup_change(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max(op_norm(&(x - y))))
}

fn volterra_inside(z: C64, v: &Potential, window: Window, cfg: &VolterraConfig) -> Result<VolterraSolution> {
    let dim = v.dim();
    let id = identity(dim);
    let (_, b) = v.support();
    check_window_powers(z, window, b)?;
    let lo = window.nmin;
    let hi = window.nmax.max(b);
    let len = (hi - lo + 1) as usize;
    // H(z, n, j) depends on j − n only.
    let z2 = z * z;
    let kernel: Vec<C64> = {
        let mut h = vec![C64::new(0.0, 0.0); len + 1];
        let mut acc = C64::new(0.0, 0.0);
        let mut p = z;
        for item in h.iter_mut().skip(1) {
            acc += p;
            p *= z2;
            *item = -acc;
        }
        h
    };
    let vj: Vec<Option<&CMat>> = (lo..=hi).map(|n| v.block(n)).collect();

    let mut x = vec![id.clone(); len];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut next = vec![id.clone(); len];
        for (k, slot) in next.iter_mut().enumerate() {
            for j in k + 1..len {
                if let Some(m) = vj[j] {
                    *slot += (m * &x[j]) * kernel[j - k];
                }
            }
        }
        let change = sup_change(&next, &x);
        x = next;
        if change < cfg.tol {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(LabError::NonConvergence { iterations, change });
        }
    }
    let values: Vec<CMat> = (window.nmin..=window.nmax)
        .map(|n| &x[(n - lo) as usize] * z.powi(n as i32))
        .collect();
    check_finite(&values, window.nmin)?;
    let jost = JostSolution { side: Side::Plus, z, window, values, derivative: None, tail_error: v.truncation_bound_right(), warnings: Vec::new() };
    Ok(VolterraSolution { jost, iterations })
}

fn volterra_outside(z: C64, v: &Potential, window: Window, cfg: &VolterraConfig) -> Result<VolterraSolution> {
    let dim = v.dim();
    let id = identity(dim);
    let (a, b) = v.support();
    let m = cfg.start.unwrap_or(a);
    let bound = ((z * z - 1.0) / (2.0 * z)).norm();
    let tail_sum: f64 = v.entries().filter(|(n, _)| *n >= m).map(|(_, blk)| op_norm(blk)).sum::<f64>()
        + v.tail().map(|t| t.upper_tail(b + 1).0).unwrap_or(0.0);
    if tail_sum >= bound {
        return Err(LabError::NonContraction { start: m, tail_sum, bound });
    }
    check_window_powers(z, window, m)?;
    let e = energy_of(z)?;
    let c = z / (z * z - 1.0);

    // Unknowns X(n) for n in [m, top]; beyond `top` the stored potential vanishes.
    let top = b.max(m);
    let len = (top - m + 1) as usize;
    let vj: Vec<Option<&CMat>> = (m..=top).map(|n| v.block(n)).collect();
    let mut x = vec![id.clone(); len];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut next = vec![id.clone(); len];
        for (k, slot) in next.iter_mut().enumerate() {
            for (j, blk) in vj.iter().enumerate() {
                let Some(blk) = blk else { continue };
                let vx = *blk * &x[j];
                if j > k {
                    *slot += vx * c;
                } else {
                    *slot += vx * (c * z.powi(2 * (j as i32 - k as i32)));
                }
            }
        }
        let change = sup_change(&next, &x);
        x = next;
        if change < cfg.tol {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(LabError::NonConvergence { iterations, change });
        }
    }
    // Coefficient of z^{-n} beyond the support: Y(n) = z^n + z^{-n} K for n > top.
    let mut k_sub = CMat::zeros(dim, dim);
    for (j, blk) in vj.iter().enumerate() {
        if let Some(blk) = blk {
            let n = m + j as i64;
            k_sub += (*blk * &x[j]) * (c * z.powi(2 * n as i32));
        }
    }

    let lo = window.nmin.min(m);
    let hi = window.nmax.max(top + 1);
    let total = (hi - lo + 1) as usize;
    let mut y = vec![CMat::zeros(dim, dim); total];
    let idx = |n: i64| (n - lo) as usize;
    for n in m..=hi {
        y[idx(n)] = if n <= top {
            &x[(n - m) as usize] * z.powi(n as i32)
        } else {
            &id * z.powi(n as i32) + &k_sub * z.powi(-(n as i32))
        };
    }
    for n in (lo..m).rev() {
        let shift = v.block(n + 1).map(|blk| &id * e - blk).unwrap_or_else(|| &id * e);
        y[idx(n)] = &shift * &y[idx(n + 1)] - &y[idx(n + 2)];
    }

    // Remove the subdominant part with u₊^{1/z} from the |z| < 1 equation.
    let inner = volterra_inside(z.inv(), v, Window { nmin: lo, nmax: hi }, cfg)?;
    let values: Vec<CMat> = (window.nmin..=window.nmax)
        .map(|n| &y[idx(n)] - inner.jost.value(n).expect("same window") * &k_sub)
        .collect();
    check_finite(&values, window.nmin)?;
    let jost = JostSolution { side: Side::Plus, z, window, values, derivative: None, tail_error: v.truncation_bound_right(), warnings: Vec::new() };
    Ok(VolterraSolution { jost, iterations: iterations + inner.iterations })
}
