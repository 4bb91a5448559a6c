//! Timing records and summary statistics for decimation benchmarks.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::decimate::{decimate_parallel, decimate_qem, quality_report, DecimationConfig, OracleConfig};
use crate::mesh::TriMesh;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Parallel,
    QemOracle,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Parallel => "parallel",
            Algorithm::QemOracle => "qem_oracle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "parallel" => Ok(Algorithm::Parallel),
            "qem_oracle" | "oracle" => Ok(Algorithm::QemOracle),
            _ => Err(format!("unknown algorithm {s:?} (expected parallel or qem_oracle)")),
        }
    }
}

/// One timed decimation.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub input_vertices: usize,
    pub input_facets: usize,
    pub target_vertices: usize,
    pub algorithm: Algorithm,
    pub wall_ms: f64,
    pub mean_quadric_error: f64,
    pub seed: u64,
}

/// Decimates `mesh` to `target` vertices, timing only the decimation call.
///
/// The oracle uses average placement, like the parallel path, so the
/// recorded errors compare clustering rather than placement.
pub fn run_once(mesh: &TriMesh, target: usize, algorithm: Algorithm, seed: u64) -> Result<BenchRecord> {
    let start = Instant::now();
    let result = match algorithm {
        Algorithm::Parallel => decimate_parallel(mesh, &DecimationConfig::new(target).with_seed(seed))?,
        Algorithm::QemOracle => decimate_qem(mesh, &OracleConfig::vertices(target))?,
    };
    let wall_ms = (start.elapsed().as_secs_f64() * 1e3).max(f64::MIN_POSITIVE);
    let quality = quality_report(mesh, &result)?;
    Ok(BenchRecord {
        input_vertices: mesh.vertex_count(),
        input_facets: mesh.facet_count(),
        target_vertices: target,
        algorithm,
        wall_ms,
        mean_quadric_error: quality.mean_error,
        seed,
    })
}

/// Median of a non-empty sample (mean of the middle pair for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`; needs two distinct `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn records_are_consistent() {
        let mesh = crate::synth::icosphere(2);
        for alg in [Algorithm::Parallel, Algorithm::QemOracle] {
            let r = run_once(&mesh, 81, alg, 4).unwrap();
            assert_eq!((r.input_vertices, r.target_vertices), (162, 81));
            assert!(r.wall_ms > 0.0 && r.mean_quadric_error >= 0.0);
        }
    }
}
