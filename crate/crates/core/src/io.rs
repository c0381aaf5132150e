//! Potential files, run configuration and report/CSV emission.
//!
//! Potential file schema (JSON):
//!
//! ```text
//! { "L": 2,
//!   "entries": [ { "n": 0, "re": [[1.0, 0.5], [0.5, -1.0]], "im": [[0.0, 0.2], [-0.2, 0.0]] } ],
//!   "tail": { "rate": 0.5, "amplitude": 1.0 } }          // optional
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::levinson::LevinsonConfig;
use crate::spectral::SpectralConfig;
use crate::{CMat, LabError, Potential, Result, TailModel, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    #[serde(rename = "L")]
    pub dim: usize,
    pub entries: Vec<EntryFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryFile {
    pub n: i64,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// Real and imaginary parts of a complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&CMat> for MatrixJson {
    fn from(m: &CMat) -> Self {
        let rows = |f: fn(&C64) -> f64| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect();
        Self { re: rows(|x| x.re), im: rows(|x| x.im) }
    }
}

fn to_matrix(n: i64, dim: usize, re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<CMat> {
    let shape_ok = |p: &[Vec<f64>]| p.len() == dim && p.iter().all(|r| r.len() == dim);
    if !shape_ok(re) || !shape_ok(im) {
        return Err(LabError::Domain(format!("entry n = {n}: re and im must both be {dim}x{dim}")));
    }
    if re.iter().chain(im).flatten().any(|x| !x.is_finite()) {
        return Err(LabError::Domain(format!("entry n = {n}: non-finite value")));
    }
    Ok(CMat::from_fn(dim, dim, |i, j| C64::new(re[i][j], im[i][j])))
}

impl PotentialFile {
    pub fn into_potential(self) -> Result<Potential> {
        if self.dim == 0 {
            return Err(LabError::Domain("L must be at least 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut blocks = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            if !seen.insert(e.n) {
                return Err(LabError::DuplicateSite(e.n));
            }
            blocks.push((e.n, to_matrix(e.n, self.dim, &e.re, &e.im)?));
        }
        Potential::new(self.dim, blocks, self.tail)
    }

    pub fn from_potential(v: &Potential) -> Self {
        let entries = v
            .entries()
            .filter(|(_, m)| m.iter().any(|x| *x != C64::new(0.0, 0.0)))
            .map(|(n, m)| {
                let j = MatrixJson::from(m);
                EntryFile { n, re: j.re, im: j.im }
            })
            .collect();
        Self { dim: v.dim(), entries, tail: v.tail() }
    }
}

/// Parses a potential from JSON text; syntax errors carry line and column.
pub fn parse_potential_str(text: &str) -> Result<Potential> {
    let file: PotentialFile = serde_json::from_str(text)
        .map_err(|e| LabError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    file.into_potential()
}

pub fn parse_potential(path: &Path) -> Result<Potential> {
    let text = std::fs::read_to_string(path)?;
    parse_potential_str(&text)
}

/// Pretty JSON for `v`; floats use the shortest round-trip representation,
/// so `parse_potential_str(&emit_potential(v))` reproduces `v` exactly.
pub fn emit_potential(v: &Potential) -> String {
    serde_json::to_string_pretty(&PotentialFile::from_potential(v)).expect("potential files always serialise")
}

pub fn write_potential(path: &Path, v: &Potential) -> Result<()> {
    std::fs::write(path, emit_potential(v) + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Exclusion zone at the band edges for the bound-state scan.
    pub edge: f64,
    /// Exclusion zone at the origin for the bound-state scan.
    pub origin: f64,
    /// Relative singular-value threshold for kernels.
    pub rank: f64,
    /// Accepted `||SᴴS − 1||`.
    pub unitarity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { edge: 1e-6, origin: 1e-6, rank: 1e-8, unitarity: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tolerances: Tolerances,
    pub eps_grid: Vec<f64>,
    pub quad_points: usize,
    pub dense_n: i64,
    pub grid_density: usize,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let l = LevinsonConfig::default();
        Self {
            tolerances: Tolerances::default(),
            eps_grid: l.eps_grid,
            quad_points: l.quad_points,
            dense_n: 80,
            grid_density: l.spectral.grid_density,
            out: None,
            csv: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, x) in [("edge", t.edge), ("origin", t.origin), ("rank", t.rank), ("unitarity", t.unitarity)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(LabError::Config(format!("{name} tolerance must be positive, got {x}")));
            }
        }
        if self.eps_grid.len() < 3 {
            return Err(LabError::Config("the ε-grid needs at least 3 values".into()));
        }
        if self.eps_grid.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
            return Err(LabError::Config("ε values must lie in (0, 0.5)".into()));
        }
        if self.eps_grid.windows(2).any(|p| p[1] >= p[0]) {
            return Err(LabError::Config("the ε-grid must be strictly decreasing".into()));
        }
        if self.quad_points == 0 {
            return Err(LabError::Config("quadrature needs at least one node".into()));
        }
        if self.dense_n <= 0 {
            return Err(LabError::Config("dense-oracle N must be positive".into()));
        }
        self.spectral().validate()
    }

    pub fn spectral(&self) -> SpectralConfig {
        SpectralConfig {
            delta: self.tolerances.edge.max(self.tolerances.origin),
            grid_density: self.grid_density,
            rank_tol: self.tolerances.rank,
            ..SpectralConfig::default()
        }
    }

    pub fn levinson(&self) -> LevinsonConfig {
        LevinsonConfig { eps_grid: self.eps_grid.clone(), quad_points: self.quad_points, spectral: self.spectral(), ..LevinsonConfig::default() }
    }
}

/// One row of the circle-sample CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircleSample {
    pub theta: f64,
    pub det_s: C64,
    pub delay: C64,
}

pub const CSV_HEADER: &str = "theta,re_detS,im_detS,re_delay,im_delay";

/// Writes the samples with 17 significant digits per value.
pub fn write_circle_csv<W: Write>(mut w: W, rows: &[CircleSample]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", r.theta, r.det_s.re, r.det_s.im, r.delay.re, r.delay.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::moment_norms;
    use crate::random;

    #[test]
    fn parse_single_site() {
        let v = parse_potential_str(r#"{"L":1, "entries":[{"n":0,"re":[[1.5]],"im":[[0.0]]}]}"#).unwrap();
        assert_eq!(v.support(), (0, 0));
        assert_eq!(moment_norms(&v).1, 1.5);
    }

    #[test]
    fn empty_entries_is_free() {
        let v = parse_potential_str(r#"{"L":2, "entries":[]}"#).unwrap();
        assert!(v.is_zero());
        assert_eq!(v.dim(), 2);
    }

    #[test]
    fn rejects_bad_files() {
        let e = parse_potential_str(r#"{"L":1, "entries":[{"n":3,"re":[[1.0]],"im":[[0.1]]}]}"#);
        assert!(matches!(e, Err(LabError::NotHermitian { n: 3, .. })), "{e:?}");
        let e = parse_potential_str(r#"{"L":1, "entries":[{"n":0,"re":[[1.0]],"im":[[0.0]]},{"n":0,"re":[[2.0]],"im":[[0.0]]}]}"#);
        assert!(matches!(e, Err(LabError::DuplicateSite(0))));
        let e = parse_potential_str("{\"L\":1,\n \"entries\": [,]}");
        assert!(matches!(e, Err(LabError::Parse { line: 2, .. })), "{e:?}");
        let e = parse_potential_str(r#"{"L":2, "entries":[{"n":0,"re":[[1.0]],"im":[[0.0]]}]}"#);
        assert!(matches!(e, Err(LabError::Domain(_))));
        let e = parse_potential_str(r#"{"L":1, "entries":[], "extra": 1}"#);
        assert!(matches!(e, Err(LabError::Parse { .. })));
        let e = parse_potential_str(r#"{"L":1, "entries":[], "tail": {"rate": 1.5, "amplitude": 1.0}}"#);
        assert!(matches!(e, Err(LabError::Tail(_))));
    }

    #[test]
    fn round_trip_is_exact() {
        let mut rng = random::rng(99);
        for l in 1..=3 {
            let v = random::compact_potential(&mut rng, l, 5, 2.0);
            let w = parse_potential_str(&emit_potential(&v)).unwrap();
            let mut a = v.entries();
            for (n, m) in w.entries() {
                let (k, x) = a.next().unwrap();
                assert_eq!(n, k);
                assert!(crate::linalg::max_abs(&(m - x)) <= 1e-15);
            }
        }
        let tailed = Potential::new(1, [(0, CMat::from_element(1, 1, C64::new(0.3, 0.0)))], Some(TailModel { rate: 0.5, amplitude: 1.0 })).unwrap();
        assert_eq!(parse_potential_str(&emit_potential(&tailed)).unwrap(), tailed);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.json");
        let v = Potential::scalar(-1, &[0.5, 0.0, -2.0]);
        write_potential(&p, &v).unwrap();
        assert_eq!(parse_potential(&p).unwrap(), v);
        assert!(matches!(parse_potential(&dir.path().join("missing.json")), Err(LabError::Io(_))));
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let mut c = RunConfig::default();
        c.eps_grid = vec![0.04, 0.04, 0.01];
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.tolerances.rank = 0.0;
        assert!(c.validate().is_err());
        let c: RunConfig = serde_json::from_str(r#"{"quad_points": 512}"#).unwrap();
        assert_eq!(c.quad_points, 512);
        assert_eq!(c.levinson().quad_points, 512);
    }

    #[test]
    fn csv_format() {
        let mut buf = Vec::new();
        let row = CircleSample { theta: 0.1, det_s: C64::new(1.0 / 3.0, -0.5), delay: C64::new(0.0, 2.0) };
        write_circle_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let fields: Vec<f64> = lines.next().unwrap().split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields, vec![0.1, 1.0 / 3.0, -0.5, 0.0, 2.0]);
        assert!(text.contains("3.3333333333333331e-1"));
    }
}
