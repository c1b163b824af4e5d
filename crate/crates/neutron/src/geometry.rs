//! Disk and convex-polygon domains with closed-form exit times.

use serde::{Deserialize, Serialize};

use crate::error::{NeutronError, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Disk { center: Point, radius: f64 },
    Polygon(Vec<Point>),
}

/// Validated domain: polygons are stored counter-clockwise with unit outward
/// edge normals.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    domain: Domain,
    /// `(n, h)` per edge: the interior is `{x : n·x < h}`.
    half_planes: Vec<(Point, f64)>,
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

impl Region {
    pub fn new(domain: Domain) -> Result<Self> {
        match &domain {
            Domain::Disk { center, radius } => {
                if !(*radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
                    return Err(NeutronError::Domain("disk needs a finite center and radius > 0".into()));
                }
                Ok(Self { domain, half_planes: vec![] })
            }
            Domain::Polygon(v) => {
                let mut v = v.clone();
                if v.len() < 3 {
                    return Err(NeutronError::Domain("polygon needs at least 3 vertices".into()));
                }
                if !v.iter().flatten().all(|c| c.is_finite()) {
                    return Err(NeutronError::Domain("non-finite vertex".into()));
                }
                let area2: f64 = (0..v.len())
                    .map(|i| {
                        let (a, b) = (v[i], v[(i + 1) % v.len()]);
                        a[0] * b[1] - a[1] * b[0]
                    })
                    .sum();
                if area2 < 0.0 {
                    v.reverse();
                }
                let n = v.len();
                let mut half_planes = Vec::with_capacity(n);
                for i in 0..n {
                    let (a, b, c) = (v[i], v[(i + 1) % n], v[(i + 2) % n]);
                    let e1 = sub(b, a);
                    let e2 = sub(c, b);
                    if e1[0] * e2[1] - e1[1] * e2[0] <= 0.0 {
                        return Err(NeutronError::Domain("polygon must be strictly convex".into()));
                    }
                    let len = dot(e1, e1).sqrt();
                    let normal = [e1[1] / len, -e1[0] / len];
                    half_planes.push((normal, dot(normal, a)));
                }
                Ok(Self { domain: Domain::Polygon(v), half_planes })
            }
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Open interior.
    pub fn contains(&self, x: Point) -> bool {
        self.distance_to_boundary(x) > 0.0
    }

    /// Signed distance to `∂D`, positive inside.
    pub fn distance_to_boundary(&self, x: Point) -> f64 {
        match &self.domain {
            Domain::Disk { center, radius } => {
                let p = sub(x, *center);
                radius - dot(p, p).sqrt()
            }
            Domain::Polygon(_) => self.half_planes.iter().map(|&(n, h)| h - dot(n, x)).fold(f64::INFINITY, f64::min),
        }
    }

    /// Smallest `s > 0` with `x + s u ∈ ∂D`.
    pub fn exit_time(&self, x: Point, u: Point) -> Result<f64> {
        if !self.contains(x) {
            return Err(NeutronError::Outside(x[0], x[1]));
        }
        Ok(self.exit_time_unchecked(x, u))
    }

    pub(crate) fn exit_time_unchecked(&self, x: Point, u: Point) -> f64 {
        match &self.domain {
            Domain::Disk { center, radius } => {
                let p = sub(x, *center);
                let b = dot(p, u);
                let c = dot(p, p) - radius * radius;
                let disc = (b * b - c).max(0.0);
                let sq = disc.sqrt();
                // Larger root, written to avoid cancellation.
                if b <= 0.0 {
                    -b + sq
                } else {
                    -c / (b + sq)
                }
            }
            Domain::Polygon(_) => {
                let mut best = f64::INFINITY;
                for &(n, h) in &self.half_planes {
                    let un = dot(u, n);
                    if un > 0.0 {
                        best = best.min((h - dot(n, x)) / un);
                    }
                }
                best.max(0.0)
            }
        }
    }

    /// Axis-aligned bounding box `[x_min, x_max, y_min, y_max]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        match &self.domain {
            Domain::Disk { center, radius } => {
                [center[0] - radius, center[0] + radius, center[1] - radius, center[1] + radius]
            }
            Domain::Polygon(v) => {
                v.iter().fold([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY], |b, p| {
                    [b[0].min(p[0]), b[1].max(p[0]), b[2].min(p[1]), b[3].max(p[1])]
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_disk() -> Region {
        Region::new(Domain::Disk { center: [0.0, 0.0], radius: 1.0 }).unwrap()
    }

    fn square() -> Region {
        Region::new(Domain::Polygon(vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])).unwrap()
    }

    #[test]
    fn disk_exit_times() {
        let d = unit_disk();
        for k in 0..16 {
            let th = k as f64 * 0.4;
            assert!((d.exit_time([0.0, 0.0], [th.cos(), th.sin()]).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((d.exit_time([0.5, 0.0], [1.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((d.exit_time([0.5, 0.0], [-1.0, 0.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!(d.exit_time([1.5, 0.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn square_exit_times() {
        let s = square();
        let r = 0.5f64.sqrt();
        assert!((s.exit_time([0.0, 0.0], [r, r]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.exit_time([0.0, 0.0], [1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(s.distance_to_boundary([0.5, 0.0]), 0.5);
        // Clockwise input is reoriented.
        let cw = Region::new(Domain::Polygon(vec![[-1.0, 1.0], [1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])).unwrap();
        assert!((cw.exit_time([0.0, 0.0], [0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_domains() {
        assert!(Region::new(Domain::Disk { center: [0.0, 0.0], radius: 0.0 }).is_err());
        assert!(Region::new(Domain::Polygon(vec![[0.0, 0.0], [1.0, 0.0]])).is_err());
        // Collinear vertex: not strictly convex.
        assert!(Region::new(Domain::Polygon(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [1.0, 1.0]])).is_err());
        // Reflex vertex.
        assert!(Region::new(Domain::Polygon(vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.5], [2.0, 2.0], [0.0, 2.0]])).is_err());
    }

    #[test]
    fn json_shape() {
        let d: Domain = serde_json::from_str(r#"{"disk": {"center": [0, 0], "radius": 1}}"#).unwrap();
        assert_eq!(d, Domain::Disk { center: [0.0, 0.0], radius: 1.0 });
        let p: Domain = serde_json::from_str(r#"{"polygon": [[0,0],[1,0],[0,1]]}"#).unwrap();
        assert!(matches!(p, Domain::Polygon(ref v) if v.len() == 3));
    }
}
