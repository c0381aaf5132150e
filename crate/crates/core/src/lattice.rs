//! Spectral parameter, free solutions and the potential representation.

use serde::{Deserialize, Serialize};

use crate::linalg::{max_abs, op_norm};
use crate::{CMat, LabError, Result, Warning, C64};

/// `|z ∓ 1|` below this switches `s^z` to the `z = ±1` branch.
pub const EDGE_TOL: f64 = 1e-8;

/// Entrywise tolerance for `A = Aᴴ`, relative to `max(1, max|A_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    InsideDisc,
    UnitCircle,
    OutsideDisc,
}

/// A spectral parameter with its cached energy and `ν^z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub z: C64,
    pub energy: C64,
    pub nu: Option<C64>,
    pub region: Region,
    pub edge_proximity: f64,
}

impl SpectralPoint {
    pub fn new(z: C64, circle_tol: f64) -> Result<Self> {
        let energy = energy_of(z)?;
        let nu = nu(z).ok();
        let r = z.norm();
        let region = if (r - 1.0).abs() <= circle_tol {
            Region::UnitCircle
        } else if r < 1.0 {
            Region::InsideDisc
        } else {
            Region::OutsideDisc
        };
        Ok(Self { z, energy, nu, region, edge_proximity: edge_proximity(z) })
    }

    /// The point `1/z` (same energy, `ν` flips sign).
    pub fn reciprocal(&self, circle_tol: f64) -> Result<Self> {
        Self::new(self.z.inv(), circle_tol)
    }
}

pub fn edge_proximity(z: C64) -> f64 {
    (z - 1.0).norm().min((z + 1.0).norm())
}

pub fn energy_of(z: C64) -> Result<C64> {
    if z == C64::new(0.0, 0.0) {
        return Err(LabError::Domain("E(z) = z + 1/z is undefined at z = 0".into()));
    }
    Ok(z + z.inv())
}

/// The root of `z² − E z + 1 = 0` with `|z| <= 1`; when both roots lie on
/// the unit circle the one with nonnegative imaginary part is returned.
pub fn z_from_energy(e: C64) -> C64 {
    let half = e / 2.0;
    let s = (half * half - 1.0).sqrt();
    // Larger-modulus root first, the other is its reciprocal (product 1).
    let big = if (half + s).norm() >= (half - s).norm() { half + s } else { half - s };
    let small = big.inv();
    let on_circle = (big.norm() - 1.0).abs() <= 1e-12;
    if on_circle {
        if small.im >= 0.0 { small } else { big }
    } else {
        small
    }
}

/// Free solution with `s(0) = 0`, `s(1) = 1` of `s(n+1) + s(n-1) = E s(n)`.
pub fn free_solution_s(z: C64, n: i64) -> Result<C64> {
    if z == C64::new(0.0, 0.0) {
        return Err(LabError::Domain("s^z is undefined at z = 0".into()));
    }
    if (z - 1.0).norm() < EDGE_TOL {
        return Ok(C64::new(n as f64, 0.0));
    }
    if (z + 1.0).norm() < EDGE_TOL {
        let sign = if (n + 1) % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(C64::new(sign * n as f64, 0.0));
    }
    let zn = z.powi(n as i32);
    Ok((zn - zn.inv()) / (z - z.inv()))
}

/// `ν^z = i / (z − 1/z)`.
pub fn nu(z: C64) -> Result<C64> {
    let d = z - z.inv();
    if z == C64::new(0.0, 0.0) || z == C64::new(1.0, 0.0) || z == C64::new(-1.0, 0.0) || d == C64::new(0.0, 0.0) {
        return Err(LabError::Domain(format!("ν^z is undefined at z = {z}")));
    }
    Ok(I / d)
}

/// `ν^z` together with a near-singularity flag.
pub fn nu_checked(z: C64) -> Result<(C64, Option<Warning>)> {
    let v = nu(z)?;
    let prox = (z * z - 1.0).norm();
    let w = (prox < EDGE_TOL).then_some(Warning::NearEdge { proximity: prox });
    Ok((v, w))
}

/// `d/dz ν^z = −i (1 + 1/z²) / (z − 1/z)²`.
pub fn nu_derivative(z: C64) -> Result<C64> {
    let d = z - z.inv();
    nu(z)?;
    Ok(-I * (1.0 + (z * z).inv()) / (d * d))
}

/// A self-adjoint `L×L` block.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBlock(CMat);

impl HermitianBlock {
    /// Validates `A ≈ Aᴴ` and stores the exactly Hermitian part `(A + Aᴴ)/2`.
    pub fn new(m: CMat) -> std::result::Result<Self, f64> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(f64::INFINITY);
        }
        let dev = max_abs(&(&m - m.adjoint()));
        if dev > HERMITIAN_TOL * max_abs(&m).max(1.0) {
            return Err(dev);
        }
        Ok(Self((&m + m.adjoint()) * C64::new(0.5, 0.0)))
    }

    pub fn zero(dim: usize) -> Self {
        Self(CMat::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.0)
    }
}

/// Decay bound `||V(n)|| <= amplitude · rate^|n|` for sites outside the
/// stored window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub rate: f64,
    pub amplitude: f64,
}

impl TailModel {
    fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(LabError::Tail(format!("decay rate {} must lie in (0, 1)", self.rate)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(LabError::Tail(format!("amplitude {} must be finite and nonnegative", self.amplitude)));
        }
        Ok(())
    }

    /// `(Σ_{j>=m} C ρ^|j|, Σ_{j>=m} (1+|j|) C ρ^|j|)` in closed form.
    pub fn upper_tail(&self, m: i64) -> (f64, f64) {
        let (rho, c) = (self.rate, self.amplitude);
        let mut plain = 0.0;
        let mut weighted = 0.0;
        for j in m..0 {
            let t = rho.powi(j.unsigned_abs() as i32);
            plain += t;
            weighted += (1.0 + j.unsigned_abs() as f64) * t;
        }
        let m0 = m.max(0) as f64;
        let head = rho.powf(m0);
        plain += head / (1.0 - rho);
        weighted += head * ((1.0 + m0) / (1.0 - rho) + rho / ((1.0 - rho) * (1.0 - rho)));
        (c * plain, c * weighted)
    }

    /// Same sums over `j <= m`.
    pub fn lower_tail(&self, m: i64) -> (f64, f64) {
        self.upper_tail(-m)
    }
}

/// Gronwall-type truncation bound `T·exp(T)` for a neglected tail with
/// first moment `T`.
pub fn gronwall_bound(tail_first_moment: f64) -> f64 {
    tail_first_moment * tail_first_moment.exp()
}

/// A finitely windowed Hermitian potential `n ↦ V(n)`, zero outside
/// `[start, start + blocks.len() - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    dim: usize,
    start: i64,
    blocks: Vec<HermitianBlock>,
    tail: Option<TailModel>,
}

impl Potential {
    /// The free operator (`V ≡ 0`), stored as a single zero block at `n = 0`.
    pub fn zero(dim: usize) -> Self {
        Self { dim, start: 0, blocks: vec![HermitianBlock::zero(dim)], tail: None }
    }

    /// Builds a potential from `(n, block)` pairs. Gaps are zero-filled.
    pub fn new<I>(dim: usize, entries: I, tail: Option<TailModel>) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, CMat)>,
    {
        if dim == 0 {
            return Err(LabError::Domain("block dimension L must be at least 1".into()));
        }
        if let Some(t) = &tail {
            t.validate()?;
        }
        let mut list: Vec<(i64, HermitianBlock)> = Vec::new();
        for (n, m) in entries {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(LabError::Domain(format!("block at n = {n} is {}x{}, expected {dim}x{dim}", m.nrows(), m.ncols())));
            }
            let b = HermitianBlock::new(m).map_err(|deviation| LabError::NotHermitian { n, deviation })?;
            list.push((n, b));
        }
        list.sort_by_key(|(n, _)| *n);
        if let Some(w) = list.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(LabError::DuplicateSite(w[0].0));
        }
        let Some(&(first, _)) = list.first() else {
            let mut z = Self::zero(dim);
            z.tail = tail;
            return Ok(z);
        };
        let last = list.last().map(|(n, _)| *n).unwrap_or(first);
        let mut blocks = vec![HermitianBlock::zero(dim); (last - first + 1) as usize];
        for (n, b) in list {
            blocks[(n - first) as usize] = b;
        }
        Ok(Self { dim, start: first, blocks, tail })
    }

    /// Scalar (`L = 1`) potential with real values starting at `start`.
    pub fn scalar(start: i64, values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .map(|(k, &v)| (start + k as i64, CMat::from_element(1, 1, C64::new(v, 0.0))));
        Self::new(1, entries, None).expect("real scalars are Hermitian")
    }

    /// Samples `f` on the sites where the tail bound of `tail` is not yet
    /// below `tol`, i.e. on `[-m, m]` with `m` the first site beyond which
    /// the Gronwall truncation bound is `< tol`.
    pub fn from_fn<F>(dim: usize, tail: TailModel, tol: f64, f: F) -> Result<Self>
    where
        F: Fn(i64) -> CMat,
    {
        tail.validate()?;
        let probe = Self { dim, start: 0, blocks: vec![HermitianBlock::zero(dim)], tail: Some(tail) };
        let m = tail_cutoff(&probe, tol)?;
        Self::new(dim, (-m..=m).map(|n| (n, f(n))), Some(tail))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tail(&self) -> Option<TailModel> {
        self.tail
    }

    /// Stored window `[a, b]`.
    pub fn support(&self) -> (i64, i64) {
        (self.start, self.start + self.blocks.len() as i64 - 1)
    }

    /// Default evaluation window: the support padded by two sites.
    pub fn default_window(&self) -> (i64, i64) {
        let (a, b) = self.support();
        (a - 2, b + 2)
    }

    pub fn block(&self, n: i64) -> Option<&CMat> {
        let k = n - self.start;
        if k < 0 {
            return None;
        }
        self.blocks.get(k as usize).map(HermitianBlock::matrix)
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.matrix().iter().all(|x| *x == C64::new(0.0, 0.0)))
    }

    /// `(n, V(n))` over the stored window in increasing `n`.
    pub fn entries(&self) -> impl Iterator<Item = (i64, &CMat)> {
        self.blocks.iter().enumerate().map(move |(k, b)| (self.start + k as i64, b.matrix()))
    }

    /// `n ↦ V(−n)`.
    pub fn reflected(&self) -> Self {
        let b = self.support().1;
        let mut blocks = self.blocks.clone();
        blocks.reverse();
        Self { dim: self.dim, start: -b, blocks, tail: self.tail }
    }

    /// Gronwall bound for the unstored right tail (`j > b`).
    pub fn truncation_bound_right(&self) -> f64 {
        match self.tail {
            Some(t) => gronwall_bound(t.upper_tail(self.support().1 + 1).1),
            None => 0.0,
        }
    }

    /// Gronwall bound for the unstored left tail (`j < a`).
    pub fn truncation_bound_left(&self) -> f64 {
        match self.tail {
            Some(t) => gronwall_bound(t.lower_tail(self.support().0 - 1).1),
            None => 0.0,
        }
    }
}

/// `(Σ ||V(n)||, Σ (1+|n|) ||V(n)||)`, including the closed-form tail bound
/// when a tail model is attached.
pub fn moment_norms(v: &Potential) -> (f64, f64) {
    let (mut zeroth, mut first) = v
        .entries()
        .map(|(n, m)| {
            let norm = op_norm(m);
            (norm, (1.0 + n.unsigned_abs() as f64) * norm)
        })
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    if let Some(t) = v.tail {
        let (a, b) = v.support();
        let (r0, r1) = t.upper_tail(b + 1);
        let (l0, l1) = t.lower_tail(a - 1);
        zeroth += r0 + l0;
        first += r1 + l1;
    }
    (zeroth, first)
}

/// Smallest `m >= b` whose neglected right tail (`j > m`) has Gronwall
/// bound `T·exp(T) < tol`. Returns the window edge `b` for compact
/// potentials or `tol = ∞`.
pub fn tail_cutoff(v: &Potential, tol: f64) -> Result<i64> {
    let b = v.support().1;
    let Some(t) = v.tail else { return Ok(b) };
    t.validate()?;
    if tol.is_infinite() {
        return Ok(b);
    }
    if !(tol > 0.0) {
        return Err(LabError::Tail(format!("tolerance {tol} must be positive")));
    }
    let mut m = b;
    for _ in 0..10_000_000 {
        if gronwall_bound(t.upper_tail(m + 1).1) < tol {
            return Ok(m);
        }
        m += 1;
    }
    Err(LabError::Tail("tail bound did not fall below tolerance within 1e7 sites".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy_of(c(1.0, 0.0)).unwrap(), c(2.0, 0.0));
        assert!(energy_of(c(0.0, 1.0)).unwrap().norm() < 1e-16);
        assert!((energy_of(c(0.5, 0.0)).unwrap() - 2.5).norm() < 1e-15);
        assert!(matches!(energy_of(c(0.0, 0.0)), Err(LabError::Domain(_))));
    }

    #[test]
    fn z_from_energy_examples() {
        assert!((z_from_energy(c(2.5, 0.0)) - 0.5).norm() < 1e-15);
        assert!((z_from_energy(c(2.0, 0.0)) - 1.0).norm() < 1e-15);
        assert!((z_from_energy(c(0.0, 0.0)) - c(0.0, 1.0)).norm() < 1e-15);
        assert!((z_from_energy(c(-2.5, 0.0)) + 0.5).norm() < 1e-15);
        // on the band the root with Im >= 0 is chosen
        let z = z_from_energy(c(1.0, 0.0));
        assert!((z.norm() - 1.0).abs() < 1e-14 && z.im > 0.0);
    }

    #[test]
    fn free_solution_examples() {
        for z in [c(0.3, 0.2), c(2.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0)] {
            assert!(free_solution_s(z, 0).unwrap().norm() < 1e-15);
            assert!((free_solution_s(z, 1).unwrap() - 1.0).norm() < 1e-14);
        }
        for n in -5..=5 {
            assert_eq!(free_solution_s(c(1.0, 0.0), n).unwrap(), c(n as f64, 0.0));
            let expect = if (n + 1) % 2 == 0 { n as f64 } else { -(n as f64) };
            assert_eq!(free_solution_s(c(-1.0, 0.0), n).unwrap(), c(expect, 0.0));
        }
        assert!((free_solution_s(c(2.0, 0.0), 2).unwrap() - 2.5).norm() < 1e-15);
        assert!(free_solution_s(c(0.0, 0.0), 1).is_err());
    }

    #[test]
    fn branch_continuity_near_edges() {
        for edge in [1.0, -1.0] {
            for d in [1e-3, 1e-6] {
                let z = c(edge * (1.0 - d), 0.0);
                for n in 0..=10 {
                    let a = free_solution_s(z, n).unwrap();
                    let b = free_solution_s(c(edge, 0.0), n).unwrap();
                    // |s^z(n) − s^1(n)| = O(n³ |z−1|) plus cancellation noise ~ 1e-16/d
                    assert!((a - b).norm() < 2.0 * (n * n * n) as f64 * d + 1e-15 / d, "edge {edge} d {d} n {n}");
                }
            }
        }
    }

    #[test]
    fn nu_examples() {
        assert!((nu(c(0.0, 1.0)).unwrap() - 0.5).norm() < 1e-15);
        assert!((nu(c(2.0, 0.0)).unwrap() - c(0.0, 1.0 / 1.5)).norm() < 1e-15);
        let z = c(0.3, 0.4);
        assert!((nu(z.inv()).unwrap() + nu(z).unwrap()).norm() < 1e-14);
        for bad in [c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)] {
            assert!(nu(bad).is_err());
        }
        let (_, w) = nu_checked(c(1.0 + 1e-10, 0.0)).unwrap();
        assert!(matches!(w, Some(Warning::NearEdge { .. })));
    }

    #[test]
    fn nu_derivative_matches_difference() {
        let z = c(0.3, 0.7);
        let h = 1e-6;
        let fd = (nu(z + h).unwrap() - nu(z - h).unwrap()) / (2.0 * h);
        assert!((fd - nu_derivative(z).unwrap()).norm() < 1e-8 * fd.norm());
    }

    #[test]
    fn spectral_point_regions() {
        let p = SpectralPoint::new(c(0.0, 1.0), 1e-12).unwrap();
        assert_eq!(p.region, Region::UnitCircle);
        assert!(p.energy.norm() < 1e-15);
        assert_eq!(SpectralPoint::new(c(0.5, 0.0), 1e-12).unwrap().region, Region::InsideDisc);
        assert_eq!(SpectralPoint::new(c(2.0, 0.0), 1e-12).unwrap().region, Region::OutsideDisc);
        assert!(SpectralPoint::new(c(1.0, 0.0), 1e-12).unwrap().nu.is_none());
        let q = SpectralPoint::new(c(0.3, 0.4), 1e-12).unwrap();
        let r = q.reciprocal(1e-12).unwrap();
        assert!((r.nu.unwrap() + q.nu.unwrap()).norm() < 1e-14);
        assert!((r.energy - q.energy).norm() < 1e-14);
    }

    #[test]
    fn moment_norm_examples() {
        assert_eq!(moment_norms(&Potential::zero(2)), (0.0, 0.0));
        assert_eq!(moment_norms(&Potential::scalar(0, &[1.5])), (1.5, 1.5));
        let v = Potential::scalar(0, &[1.0, 0.0, 0.0, 1.0]);
        // direct summation: 1·(1+0) + 1·(1+3)
        assert_eq!(moment_norms(&v), (2.0, 5.0));
    }

    #[test]
    fn moment_norm_uses_operator_norm() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)]);
        let v = Potential::new(2, [(-2, m)], None).unwrap();
        let (z, f) = moment_norms(&v);
        assert!((z - 2.0).abs() < 1e-12);
        assert!((f - 6.0).abs() < 1e-12);
    }

    #[test]
    fn tail_sums_match_brute_force() {
        let t = TailModel { rate: 0.7, amplitude: 1.3 };
        for m in [-4, 0, 3] {
            let (p, w) = t.upper_tail(m);
            let (mut bp, mut bw) = (0.0, 0.0);
            for j in m..m + 400 {
                let x = 1.3 * 0.7f64.powi(j.unsigned_abs() as i32);
                bp += x;
                bw += (1.0 + j.unsigned_abs() as f64) * x;
            }
            assert!((p - bp).abs() < 1e-12 * bp && (w - bw).abs() < 1e-12 * bw);
        }
    }

    #[test]
    fn tail_cutoff_compact_and_infinite() {
        let v = Potential::new(1, [(-3, CMat::from_element(1, 1, c(1.0, 0.0))), (5, CMat::from_element(1, 1, c(1.0, 0.0)))], None).unwrap();
        assert_eq!(tail_cutoff(&v, 1e-12).unwrap(), 5);
        let t = Potential::new(1, [(0, CMat::from_element(1, 1, c(1.0, 0.0)))], Some(TailModel { rate: 0.5, amplitude: 1.0 })).unwrap();
        assert_eq!(tail_cutoff(&t, f64::INFINITY).unwrap(), 0);
    }

    #[test]
    fn tail_cutoff_matches_term_by_term_summation() {
        let v = Potential::new(1, [(0, CMat::from_element(1, 1, c(1.0, 0.0)))], Some(TailModel { rate: 0.5, amplitude: 1.0 })).unwrap();
        let tol = 1e-12;
        // oracle: sum the neglected first moment term by term
        let bound = |m: i64| {
            let mut s = 0.0;
            let mut j = m + 1;
            loop {
                let term = (1.0 + j as f64) * 0.5f64.powi(j as i32);
                s += term;
                if term < 1e-30 {
                    break;
                }
                j += 1;
            }
            s * s.exp()
        };
        let expected = (0..).find(|&m| bound(m) < tol).unwrap();
        assert_eq!(tail_cutoff(&v, tol).unwrap(), expected);
    }

    #[test]
    fn bad_tail_rate_rejected() {
        let e = Potential::new(1, [], Some(TailModel { rate: 1.0, amplitude: 1.0 }));
        assert!(matches!(e, Err(LabError::Tail(_))));
    }

    #[test]
    fn construction_errors() {
        let nh = CMat::from_row_slice(1, 1, &[c(0.0, 0.1)]);
        assert!(matches!(Potential::new(1, [(4, nh)], None), Err(LabError::NotHermitian { n: 4, .. })));
        let one = CMat::from_element(1, 1, c(1.0, 0.0));
        assert!(matches!(Potential::new(1, [(1, one.clone()), (1, one)], None), Err(LabError::DuplicateSite(1))));
    }

    #[test]
    fn reflection_and_gaps() {
        let v = Potential::scalar(-1, &[1.0, 0.0, 3.0]);
        let r = v.reflected();
        assert_eq!(r.support(), (-1, 1));
        assert_eq!(r.block(-1).unwrap()[(0, 0)], c(3.0, 0.0));
        assert_eq!(r.block(1).unwrap()[(0, 0)], c(1.0, 0.0));
        assert!(r.block(2).is_none());
        assert_eq!(r.reflected(), v);
    }

    proptest! {
        #[test]
        fn recursion_property(re in -3.0f64..3.0, im in -3.0f64..3.0, n in -10i64..=10) {
            let z = c(re, im);
            prop_assume!(z.norm() >= 0.1 && z.norm() <= 3.0);
            let e = energy_of(z).unwrap();
            let s = |k| free_solution_s(z, k).unwrap();
            let res = (s(n + 1) + s(n - 1) - e * s(n)).norm();
            let scale = 1f64.max(z.norm().max(z.norm().recip()).powi(n.unsigned_abs() as i32 + 1));
            prop_assert!(res < 1e-10 * scale, "res {res}");
        }

        #[test]
        fn energy_round_trip(re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let z = c(re, im);
            prop_assume!(z.norm() < 0.999 && z.norm() > 1e-3);
            let back = z_from_energy(energy_of(z).unwrap());
            prop_assert!((back - z).norm() < 1e-12 * z.norm());
        }
    }
}
