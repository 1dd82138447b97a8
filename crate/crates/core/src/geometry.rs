//! Player geometry: random placement in a planar region and spatial queries.
//!
//! Angle convention is mathematical throughout: counterclockwise positive,
//! zero along the +x axis, offsets wrapped to (-pi, pi].

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The bounded region players are placed in. Its area fixes the density
/// parameter `lambda = 1/area` used by the near/far-set radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RegionSpec {
    /// Disk of the given radius centered at the origin.
    Disk { radius: f64 },
    /// Axis-aligned rectangle [0, width] x [0, height].
    Rectangle { width: f64, height: f64 },
}

impl RegionSpec {
    pub fn disk(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "disk radius must be positive and finite, got {radius}"
            )));
        }
        Ok(RegionSpec::Disk { radius })
    }

    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && height > 0.0 && height.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rectangle sides must be positive and finite, got {width} x {height}"
            )));
        }
        Ok(RegionSpec::Rectangle { width, height })
    }

    pub fn area(&self) -> f64 {
        match *self {
            RegionSpec::Disk { radius } => PI * radius * radius,
            RegionSpec::Rectangle { width, height } => width * height,
        }
    }

    /// Density parameter: lambda = 1/area.
    pub fn lambda(&self) -> f64 {
        1.0 / self.area()
    }

    pub fn contains(&self, p: Point) -> bool {
        match *self {
            RegionSpec::Disk { radius } => p.x * p.x + p.y * p.y <= radius * radius,
            RegionSpec::Rectangle { width, height } => {
                (0.0..=width).contains(&p.x) && (0.0..=height).contains(&p.y)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Draw `n_players` i.i.d. uniform points from the region. Deterministic
/// given the rng state.
pub fn sample_positions<R: Rng>(
    region: RegionSpec,
    n_players: usize,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if n_players == 0 {
        return Err(Error::EmptyNetwork);
    }
    let mut points = Vec::with_capacity(n_players);
    for _ in 0..n_players {
        let p = match region {
            RegionSpec::Disk { radius } => {
                // Polar transform: r = R*sqrt(u) is uniform over the disk.
                let u: f64 = rng.gen();
                let theta: f64 = rng.gen::<f64>() * TAU;
                let r = radius * u.sqrt();
                Point::new(r * theta.cos(), r * theta.sin())
            }
            RegionSpec::Rectangle { width, height } => {
                Point::new(rng.gen::<f64>() * width, rng.gen::<f64>() * height)
            }
        };
        points.push(p);
    }
    Ok(points)
}

/// Euclidean distance.
pub fn distance(p: Point, q: Point) -> f64 {
    distance_sq(p, q).sqrt()
}

/// Squared Euclidean distance. All ordering comparisons in this module use
/// the squared form so ties are exact.
pub fn distance_sq(p: Point, q: Point) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    dx * dx + dy * dy
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(TAU);
    if x > PI {
        x -= TAU;
    }
    x
}

/// Signed angular deviation of the origin->target ray from a beam bisector
/// heading, wrapped to (-pi, pi]. Errors when origin == target; the self-gain
/// case is handled separately by the caller.
pub fn angle_offset(origin: Point, target: Point, bisector_heading: f64) -> Result<f64> {
    if origin == target {
        return Err(Error::DegenerateGeometry(format!(
            "angle_offset undefined for coincident points ({}, {})",
            origin.x, origin.y
        )));
    }
    let bearing = (target.y - origin.y).atan2(target.x - origin.x);
    Ok(wrap_angle(bearing - bisector_heading))
}

/// The `count` indices (excluding `index`) nearest to `points[index]`,
/// strictly sorted by (distance, index). Exact search; ties break toward the
/// lower index.
pub fn nearest_neighbors(points: &[Point], index: usize, count: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if index >= n {
        return Err(Error::InvalidParameter(format!(
            "player index {index} out of range for {n} players"
        )));
    }
    if count > n.saturating_sub(1) {
        return Err(Error::InsufficientPlayers {
            requested: count,
            available: n.saturating_sub(1),
        });
    }
    let origin = points[index];
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != index)
        .map(|(i, &p)| (distance_sq(origin, p), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(order.into_iter().take(count).map(|(_, i)| i).collect())
}
