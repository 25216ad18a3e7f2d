//! Synthetic traffic patterns.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::packet::Coordinate;

/// Interior mesh size. South IO rows are not included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeshDims {
    pub cols: u32,
    pub rows: u32,
}

impl MeshDims {
    pub const fn new(cols: u32, rows: u32) -> Self {
        MeshDims { cols, rows }
    }

    pub const fn square(k: u32) -> Self {
        MeshDims { cols: k, rows: k }
    }

    pub fn nodes(&self) -> u32 {
        self.cols * self.rows
    }

    pub fn contains(&self, c: Coordinate) -> bool {
        c.x < self.cols && c.y < self.rows
    }

    /// Row-major.
    pub fn coords(&self) -> impl Iterator<Item = Coordinate> + Clone {
        let cols = self.cols;
        (0..self.nodes()).map(move |i| Coordinate::new(i % cols, i / cols))
    }

    pub fn index(&self, c: Coordinate) -> usize {
        (c.y * self.cols + c.x) as usize
    }

    /// In-mesh neighbors in `W, E, N, S` order.
    pub fn neighbors(&self, c: Coordinate) -> Vec<Coordinate> {
        let mut out = Vec::with_capacity(4);
        if c.x > 0 {
            out.push(Coordinate::new(c.x - 1, c.y));
        }
        if c.x + 1 < self.cols {
            out.push(Coordinate::new(c.x + 1, c.y));
        }
        if c.y > 0 {
            out.push(Coordinate::new(c.x, c.y - 1));
        }
        if c.y + 1 < self.rows {
            out.push(Coordinate::new(c.x, c.y + 1));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrafficPattern {
    /// Every other node equally likely.
    UniformRandom,
    /// `(x, y) -> (y, x)`; square meshes only.
    Transpose,
    /// One of the 2 to 4 mesh neighbors, equally likely.
    NearestNeighbor,
}

impl TrafficPattern {
    pub const ALL: [TrafficPattern; 3] = [
        TrafficPattern::UniformRandom,
        TrafficPattern::Transpose,
        TrafficPattern::NearestNeighbor,
    ];

    /// Checks the pattern can be generated on `dims`.
    pub fn validate(self, dims: MeshDims) -> Result<(), ConfigError> {
        match self {
            TrafficPattern::Transpose if dims.cols != dims.rows => {
                Err(ConfigError::invalid(format!(
                    "transpose needs a square mesh, got {}x{}",
                    dims.cols, dims.rows
                )))
            }
            TrafficPattern::UniformRandom | TrafficPattern::NearestNeighbor if dims.nodes() < 2 => {
                Err(ConfigError::invalid(format!(
                    "{self} traffic needs at least two nodes"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Destination probabilities for `src`. Used by the analytic bounds.
    pub fn distribution(self, src: Coordinate, dims: MeshDims) -> Vec<(Coordinate, f64)> {
        match self {
            TrafficPattern::UniformRandom => {
                let p = 1.0 / (dims.nodes() - 1) as f64;
                dims.coords()
                    .filter(|&c| c != src)
                    .map(|c| (c, p))
                    .collect()
            }
            TrafficPattern::Transpose => vec![(Coordinate::new(src.y, src.x), 1.0)],
            TrafficPattern::NearestNeighbor => {
                let n = dims.neighbors(src);
                let p = 1.0 / n.len() as f64;
                n.into_iter().map(|c| (c, p)).collect()
            }
        }
    }
}

impl fmt::Display for TrafficPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrafficPattern::UniformRandom => "uniform",
            TrafficPattern::Transpose => "transpose",
            TrafficPattern::NearestNeighbor => "nearest-neighbor",
        })
    }
}

impl FromStr for TrafficPattern {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "uniform-random" | "uniform_random" => Ok(TrafficPattern::UniformRandom),
            "transpose" => Ok(TrafficPattern::Transpose),
            "nearest-neighbor" | "nearest_neighbor" | "nn" => Ok(TrafficPattern::NearestNeighbor),
            other => Err(ConfigError::invalid(format!(
                "unknown traffic pattern {other:?}"
            ))),
        }
    }
}

/// Draws a destination for a packet from `src`.
pub fn gen_destination<R: Rng + ?Sized>(
    pattern: TrafficPattern,
    src: Coordinate,
    dims: MeshDims,
    rng: &mut R,
) -> Result<Coordinate, ConfigError> {
    pattern.validate(dims)?;
    Ok(match pattern {
        TrafficPattern::UniformRandom => {
            let skip = dims.index(src) as u32;
            let mut i = rng.random_range(0..dims.nodes() - 1);
            if i >= skip {
                i += 1;
            }
            Coordinate::new(i % dims.cols, i / dims.cols)
        }
        TrafficPattern::Transpose => Coordinate::new(src.y, src.x),
        TrafficPattern::NearestNeighbor => {
            let n = dims.neighbors(src);
            n[rng.random_range(0..n.len())]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn transpose_mapping() {
        let d = MeshDims::square(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = |c| gen_destination(TrafficPattern::Transpose, c, d, &mut rng.clone()).unwrap();
        assert_eq!(f(Coordinate::new(1, 3)), Coordinate::new(3, 1));
        assert_eq!(f(Coordinate::new(2, 2)), Coordinate::new(2, 2));
        rng = ChaCha8Rng::seed_from_u64(1);
        assert!(gen_destination(
            TrafficPattern::Transpose,
            Coordinate::new(0, 0),
            MeshDims::new(4, 2),
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn nearest_neighbor_stays_adjacent() {
        let d = MeshDims::square(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for src in d.coords() {
            for _ in 0..20 {
                let dest =
                    gen_destination(TrafficPattern::NearestNeighbor, src, d, &mut rng).unwrap();
                assert_eq!(src.distance(dest), 1);
                assert!(d.contains(dest));
            }
        }
        assert_eq!(d.neighbors(Coordinate::new(0, 0)).len(), 2);
        assert_eq!(d.neighbors(Coordinate::new(3, 0)).len(), 3);
        assert_eq!(d.neighbors(Coordinate::new(3, 3)).len(), 4);
    }

    // Pearson chi-square over the 63 possible destinations of one source.
    // Critical value for 62 degrees of freedom at alpha = 0.01 is 89.59.
    #[test]
    fn uniform_passes_chi_square() {
        let d = MeshDims::square(8);
        let src = Coordinate::new(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let mut counts = vec![0u32; 64];
        for _ in 0..draws {
            let dest = gen_destination(TrafficPattern::UniformRandom, src, d, &mut rng).unwrap();
            counts[d.index(dest)] += 1;
        }
        assert_eq!(counts[d.index(src)], 0);
        let expected = draws as f64 / 63.0;
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != d.index(src))
            .map(|(_, &c)| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 89.59, "chi-square {chi2} rejects uniformity");
    }

    #[test]
    fn distributions_sum_to_one() {
        let d = MeshDims::square(5);
        for p in [
            TrafficPattern::UniformRandom,
            TrafficPattern::NearestNeighbor,
            TrafficPattern::Transpose,
        ] {
            for src in d.coords() {
                let total: f64 = p.distribution(src, d).iter().map(|(_, w)| w).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for p in TrafficPattern::ALL {
            assert_eq!(p.to_string().parse::<TrafficPattern>().unwrap(), p);
        }
        assert!("zigzag".parse::<TrafficPattern>().is_err());
    }
}
