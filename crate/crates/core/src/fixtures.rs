//! Small built-in geometries with known homology, used by tests, the CLI and
//! the Python bindings.

use crate::complex::{
    build_clique_complex, filtration_scales, pairwise_distances, CliqueComplex, DistanceMatrix,
    FiltrationSchedule, FixedPoint, PointCloud,
};
use crate::error::{QtdaError, Result};

/// A point cloud together with its distance matrix and filtration.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub cloud: PointCloud,
    pub dm: DistanceMatrix,
    pub schedule: FiltrationSchedule,
}

impl Fixture {
    pub fn from_cloud(cloud: PointCloud) -> Result<Self> {
        let dm = pairwise_distances(&cloud)?;
        let schedule = filtration_scales(&dm);
        Ok(Fixture { cloud, dm, schedule })
    }

    /// Index of the schedule entry closest to `mu`.
    pub fn scale_index(&self, mu: f64) -> Result<usize> {
        let (idx, err) = self
            .schedule
            .mus()
            .iter()
            .enumerate()
            .map(|(i, &m)| (i, (m - mu).abs()))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if err > 1e-3 {
            return Err(QtdaError::InvalidArgument(format!("no filtration scale near {mu}")));
        }
        Ok(idx)
    }

    pub fn complex(&self, scale_index: usize, k_max: usize) -> Result<CliqueComplex> {
        build_clique_complex(&self.dm, &self.schedule, scale_index, k_max)
    }

    pub fn complex_at(&self, mu: f64, k_max: usize) -> Result<CliqueComplex> {
        self.complex(self.scale_index(mu)?, k_max)
    }

    /// Complexes at two scales, both materialized through `k_max + 1`.
    pub fn pair(&self, mu_i: f64, mu_j: f64, k_max: usize) -> Result<(CliqueComplex, CliqueComplex)> {
        Ok((self.complex_at(mu_i, k_max)?, self.complex_at(mu_j, k_max)?))
    }
}

fn cloud(rows: &[[f64; 2]], labels: &[&str]) -> PointCloud {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let labels = labels.iter().map(|s| s.to_string()).collect();
    PointCloud::from_f64(&rows, Some(labels), FixedPoint::default())
        .expect("fixture coordinates are representable")
}

/// Unit-free "house": a 3×2 rectangle ABCD with E below the CD side. At μ = 2 the
/// complex is the edges AD, BC, DE, CE; at μ = 3 the rectangle closes and CDE fills in.
pub fn house() -> Fixture {
    Fixture::from_cloud(cloud(
        &[[0.0, 0.0], [3.0, 0.0], [3.0, -2.0], [0.0, -2.0], [1.5, -3.0]],
        &["A", "B", "C", "D", "E"],
    ))
    .expect("fixture builds")
}

pub const HOUSE_MU1: f64 = 2.0;
pub const HOUSE_MU2: f64 = 3.0;

/// 2×2 square ABCD. The 4-cycle appears at μ = 2 and fills at μ = 2√2.
pub fn square() -> Fixture {
    Fixture::from_cloud(cloud(
        &[[0.0, 0.0], [2.0, 0.0], [2.0, -2.0], [0.0, -2.0]],
        &["A", "B", "C", "D"],
    ))
    .expect("fixture builds")
}

pub const SQUARE_MU_I: f64 = 2.0;
pub const SQUARE_MU_J: f64 = std::f64::consts::SQRT_2 * 2.0;

/// The square with an apex X above AB; at μ = d_AX the triangle ABX enters
/// while the 4-cycle stays open.
pub fn square_apex() -> Fixture {
    Fixture::from_cloud(cloud(
        &[[0.0, 0.0], [2.0, 0.0], [2.0, -2.0], [0.0, -2.0], [1.0, 2.2]],
        &["A", "B", "C", "D", "X"],
    ))
    .expect("fixture builds")
}

pub const APEX_MU_I: f64 = 2.0;

/// d_AX for the apex fixture, √(1 + 2.2²).
pub fn apex_mu_j() -> f64 {
    (1.0f64 + 2.2 * 2.2).sqrt()
}

/// Built-in fixture by name with its canonical (μ_i, μ_j) pair.
pub fn named(name: &str) -> Result<(Fixture, f64, f64)> {
    match name {
        "house" => Ok((house(), HOUSE_MU1, HOUSE_MU2)),
        "square" => Ok((square(), SQUARE_MU_I, SQUARE_MU_J)),
        "apex" => Ok((square_apex(), APEX_MU_I, apex_mu_j())),
        other => Err(QtdaError::InvalidArgument(format!(
            "unknown fixture {other:?} (expected house, square or apex)"
        ))),
    }
}

pub const FIXTURE_NAMES: [&str; 3] = ["house", "square", "apex"];
