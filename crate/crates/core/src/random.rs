//! Seeded generators for test ensembles. Every draw is reproducible from
//! its seed, which callers record alongside results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CMat, Potential, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random Hermitian block with every entry of modulus `<= bound`.
pub fn hermitian_block<R: Rng>(rng: &mut R, dim: usize, bound: f64) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = C64::new(rng.gen_range(-bound..=bound), 0.0);
        for j in i + 1..dim {
            let r = rng.gen_range(0.0..=bound);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = C64::from_polar(r, phase);
            m[(i, j)] = x;
            m[(j, i)] = x.conj();
        }
    }
    m
}

/// Compact potential with support width in `1..=max_width`, a random
/// start in `[-2, 2]` and entries bounded by `bound`.
pub fn compact_potential<R: Rng>(rng: &mut R, dim: usize, max_width: usize, bound: f64) -> Potential {
    let width = rng.gen_range(1..=max_width) as i64;
    let start = rng.gen_range(-2..=2);
    let entries: Vec<(i64, CMat)> = (0..width).map(|k| (start + k, hermitian_block(rng, dim, bound))).collect();
    Potential::new(dim, entries, None).expect("generated blocks are Hermitian")
}

/// Uniform point in the annulus `rmin <= |z| <= rmax`.
pub fn point_in_annulus<R: Rng>(rng: &mut R, rmin: f64, rmax: f64) -> C64 {
    let r = rng.gen_range(rmin..=rmax);
    C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
}

/// Point `e^{iθ}` on the unit circle at angular distance `>= margin` from `±1`.
pub fn circle_point<R: Rng>(rng: &mut R, margin: f64) -> C64 {
    let theta = rng.gen_range(margin..std::f64::consts::PI - margin);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    C64::from_polar(1.0, sign * theta)
}
