//! Node/weight rules for integrating against surface measure on the unit sphere.
//!
//! Three families are provided:
//!
//! * `circle:M` – `M` equispaced directions on S^1 (spectrally accurate for
//!   smooth periodic integrands),
//! * `gauss3:LxM` – a product rule on S^2 with `L` Gauss–Legendre nodes in the
//!   cosine of the polar angle and `M` equispaced azimuths,
//! * `mc:N:COUNT:SEED` – seeded Monte Carlo directions on S^(N-1), the only
//!   option for `N >= 4`.
//!
//! The deterministic rules are built so that the node set is closed under
//! `u -> -u` *bitwise*: the second half of every antipodal pair is produced
//! by negating the coordinates of the first. Tabulated bodies rely on this to
//! look up `-u` exactly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ChordError, Result};
use crate::star_body::UnitDirection;

/// Which family a rule belongs to, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Circle { points: usize },
    ProductGauss { polar: usize, azimuth: usize },
    MonteCarlo { dim: usize, count: usize, seed: u64 },
}

impl RuleKind {
    pub fn dimension(&self) -> usize {
        match *self {
            RuleKind::Circle { .. } => 2,
            RuleKind::ProductGauss { .. } => 3,
            RuleKind::MonteCarlo { dim, .. } => dim,
        }
    }

    /// The same family at double resolution.
    pub fn refined(&self) -> RuleKind {
        match *self {
            RuleKind::Circle { points } => RuleKind::Circle { points: 2 * points },
            RuleKind::ProductGauss { polar, azimuth } => RuleKind::ProductGauss {
                polar: 2 * polar,
                azimuth: 2 * azimuth,
            },
            RuleKind::MonteCarlo { dim, count, seed } => RuleKind::MonteCarlo {
                dim,
                count: 2 * count,
                seed,
            },
        }
    }

    pub fn build(&self) -> Result<SphereQuadrature> {
        match *self {
            RuleKind::Circle { points } => SphereQuadrature::circle(points),
            RuleKind::ProductGauss { polar, azimuth } => {
                SphereQuadrature::gauss_product(polar, azimuth)
            }
            RuleKind::MonteCarlo { dim, count, seed } => {
                SphereQuadrature::monte_carlo(dim, count, seed)
            }
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RuleKind::Circle { points } => write!(f, "circle:{points}"),
            RuleKind::ProductGauss { polar, azimuth } => write!(f, "gauss3:{polar}x{azimuth}"),
            RuleKind::MonteCarlo { dim, count, seed } => write!(f, "mc:{dim}:{count}:{seed}"),
        }
    }
}

impl FromStr for RuleKind {
    type Err = ChordError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || ChordError::InvalidParameter(format!("malformed rule id `{s}`"));
        let int = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let (family, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        match family {
            "circle" => Ok(RuleKind::Circle { points: int(rest)? }),
            "gauss3" => {
                let (l, m) = rest.split_once('x').ok_or_else(bad)?;
                Ok(RuleKind::ProductGauss {
                    polar: int(l)?,
                    azimuth: int(m)?,
                })
            }
            "mc" => {
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() != 3 {
                    return Err(bad());
                }
                Ok(RuleKind::MonteCarlo {
                    dim: int(parts[0])?,
                    count: int(parts[1])?,
                    seed: parts[2].trim().parse::<u64>().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}

/// Surface area of S^(n-1): `2 pi^(n/2) / Gamma(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    assert!(n >= 1, "sphere_area needs n >= 1");
    // |S^0| = 2, |S^1| = 2 pi, |S^(n-1)| = 2 pi / (n - 2) * |S^(n-3)|
    let mut area = if n % 2 == 1 { 2.0 } else { 2.0 * PI };
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    while k < n {
        k += 2;
        area *= 2.0 * PI / (k - 2) as f64;
    }
    area
}

/// Summation by recursive halving in a fixed order. The result depends only
/// on the input order, never on thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().fold(0.0, |acc, x| acc + x)
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending and mirrored
/// exactly (`x[L-1-k] == -x[k]`).
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = points;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for k in 0..half {
        // k-th largest root
        let mut z = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        if n % 2 == 1 && k == half - 1 {
            z = 0.0;
            dp = legendre_with_derivative(n, 0.0).1;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - k] = z;
        x[k] = -z;
        w[n - 1 - k] = weight;
        w[k] = weight;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A node/weight rule on S^(n-1).
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    kind: RuleKind,
    nodes: Vec<UnitDirection>,
    weights: Vec<f64>,
    antipodes: Option<Vec<usize>>,
}

impl SphereQuadrature {
    /// `points` equispaced directions on the unit circle, weights `2 pi / points`.
    pub fn circle(points: usize) -> Result<Self> {
        if points < 8 || !points.is_multiple_of(2) {
            return Err(ChordError::InvalidParameter(format!(
                "circle rule needs an even point count >= 8, got {points}"
            )));
        }
        let half = points / 2;
        let mut first = Vec::with_capacity(half);
        for k in 0..half {
            let theta = 2.0 * PI * k as f64 / points as f64;
            first.push([theta.cos(), theta.sin()]);
        }
        let nodes = first
            .iter()
            .map(|c| UnitDirection::from_trusted(c.to_vec()))
            .chain(
                first
                    .iter()
                    .map(|c| UnitDirection::from_trusted(vec![-c[0], -c[1]])),
            )
            .collect();
        let antipodes = (0..points).map(|k| (k + half) % points).collect();
        Ok(SphereQuadrature {
            kind: RuleKind::Circle { points },
            nodes,
            weights: vec![2.0 * PI / points as f64; points],
            antipodes: Some(antipodes),
        })
    }

    /// Product rule on S^2: Gauss–Legendre in `cos(polar)` times equispaced azimuths.
    pub fn gauss_product(polar: usize, azimuth: usize) -> Result<Self> {
        if polar < 8 || azimuth < 16 || !azimuth.is_multiple_of(2) {
            return Err(ChordError::InvalidParameter(format!(
                "gauss3 rule needs L >= 8 and an even M >= 16, got {polar}x{azimuth}"
            )));
        }
        let (zs, zw) = gauss_legendre(polar);
        let half = azimuth / 2;
        let mut trig = Vec::with_capacity(azimuth);
        for j in 0..half {
            let phi = 2.0 * PI * j as f64 / azimuth as f64;
            trig.push((phi.cos(), phi.sin()));
        }
        for j in 0..half {
            let (c, s) = trig[j];
            trig.push((-c, -s));
        }
        let az_weight = 2.0 * PI / azimuth as f64;
        let mut nodes = Vec::with_capacity(polar * azimuth);
        let mut weights = Vec::with_capacity(polar * azimuth);
        let mut antipodes = Vec::with_capacity(polar * azimuth);
        for (i, (&z, &w)) in zs.iter().zip(&zw).enumerate() {
            let s = (1.0 - z * z).sqrt();
            for (j, &(c, sn)) in trig.iter().enumerate() {
                nodes.push(UnitDirection::from_trusted(vec![s * c, s * sn, z]));
                weights.push(w * az_weight);
                antipodes.push((polar - 1 - i) * azimuth + (j + half) % azimuth);
            }
        }
        Ok(SphereQuadrature {
            kind: RuleKind::ProductGauss { polar, azimuth },
            nodes,
            weights,
            antipodes: Some(antipodes),
        })
    }

    /// `count` directions drawn as normalized standard Gaussian vectors from a
    /// ChaCha8 stream seeded with `seed`; equal weights.
    pub fn monte_carlo(dim: usize, count: usize, seed: u64) -> Result<Self> {
        if dim < 2 || count < 1000 {
            return Err(ChordError::InvalidParameter(format!(
                "Monte Carlo rule needs n >= 2 and N >= 1000, got n={dim}, N={count}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes = Vec::with_capacity(count);
        while nodes.len() < count {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Ok((u, _)) = UnitDirection::normalize(v) {
                nodes.push(u);
            }
        }
        Ok(SphereQuadrature {
            kind: RuleKind::MonteCarlo { dim, count, seed },
            nodes,
            weights: vec![sphere_area(dim) / count as f64; count],
            antipodes: None,
        })
    }

    /// Parses a rule id such as `circle:64`, `gauss3:48x96` or `mc:4:100000:7`.
    pub fn from_id(id: &str) -> Result<Self> {
        id.parse::<RuleKind>()?.build()
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn rule_id(&self) -> String {
        self.kind.to_string()
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[UnitDirection] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of `-u_k` for each node `k`, for the antipodally symmetric rules.
    pub fn antipodes(&self) -> Option<&[usize]> {
        self.antipodes.as_deref()
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    pub fn refined(&self) -> Result<Self> {
        self.kind.refined().build()
    }

    /// Weighted sum `sum_k w_k f_k` of node-indexed values.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return Err(ChordError::DimensionMismatch {
                expected: self.nodes.len(),
                found: values.len(),
            });
        }
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(values)
            .map(|(w, f)| w * f)
            .collect();
        Ok(pairwise_sum(&terms))
    }

    /// Integrates a closure evaluated at every node.
    pub fn integrate_with<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&UnitDirection) -> f64,
    {
        let values: Vec<f64> = self.nodes.iter().map(f).collect();
        self.integrate(&values)
    }
}
