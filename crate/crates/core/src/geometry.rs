//! Geometry of the limit shape `f(x, t) = γ √(x t)` and of the cones and
//! cylinders used to measure how straight geodesics are. All norms are
//! Euclidean.

use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::lpp::Geodesic;
use crate::point_process::Point;

/// Default straightness exponent, inside `(0, 1/4)`.
pub const DEFAULT_DELTA: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeFunction {
    gamma: f64,
}

impl ShapeFunction {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::config(format!(
                "shape constant must be > 0, got {gamma}"
            )));
        }
        Ok(ShapeFunction { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.gamma * (x * t).sqrt()
    }

    pub fn at(&self, p: &Point) -> f64 {
        self.value(p.x, p.t)
    }
}

pub fn shape_value(f: &ShapeFunction, x: f64, t: f64) -> Result<f64> {
    if !(x >= 0.0 && t >= 0.0) {
        return Err(Error::query(format!(
            "shape function needs x, t >= 0, got ({x}, {t})"
        )));
    }
    Ok(f.value(x, t))
}

/// `f(q) − f(q − p) − f(p)` for `0 ≤ p ≤ q`; zero exactly when `p` and `q`
/// are collinear with the origin.
pub fn curvature_gap(f: &ShapeFunction, p: Point, q: Point) -> Result<f64> {
    if !(Point::ORIGIN.leq(&p) && p.leq(&q)) {
        return Err(Error::query(format!(
            "curvature gap needs 0 <= p <= q, got p=({}, {}), q=({}, {})",
            p.x, p.t, q.x, q.t
        )));
    }
    Ok(f.at(&q) - f.at(&q.sub(&p)) - f.at(&p))
}

/// `Co(p, θ)`: apex `p`, axis along the ray from the origin through
/// `axis_through`, half-angle `θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cone {
    apex: Point,
    axis: Point,
    half_angle: f64,
}

impl Cone {
    pub fn new(apex: Point, axis_through: Point, half_angle: f64) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle < FRAC_PI_4) {
            return Err(Error::config(format!(
                "cone half-angle must lie in (0, pi/4), got {half_angle}"
            )));
        }
        if !(axis_through.x > 0.0 && axis_through.t > 0.0) {
            return Err(Error::config("cone axis needs positive coordinates"));
        }
        Ok(Cone {
            apex,
            axis: axis_through.scale(1.0 / axis_through.norm()),
            half_angle,
        })
    }

    /// The cone through the origin-to-`p` axis at `p` itself.
    pub fn at(p: Point, half_angle: f64) -> Result<Self> {
        Cone::new(p, p, half_angle)
    }

    pub fn half_angle(&self) -> f64 {
        self.half_angle
    }

    /// Angle between `q − apex` and the axis; 0 at the apex.
    pub fn angle_to(&self, q: &Point) -> f64 {
        let v = q.sub(&self.apex);
        if v.x == 0.0 && v.t == 0.0 {
            return 0.0;
        }
        let dot = v.x * self.axis.x + v.t * self.axis.t;
        let cross = v.x * self.axis.t - v.t * self.axis.x;
        cross.abs().atan2(dot)
    }

    pub fn contains(&self, q: &Point) -> bool {
        self.angle_to(q) <= self.half_angle
    }
}

pub fn cone_contains(cone: &Cone, q: Point) -> bool {
    cone.contains(&q)
}

/// Truncated cylinder of the given width around the line through the origin
/// and `anchor`, cut to `q ≥ anchor` and `|q| ≤ 2|anchor|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedCylinder {
    pub anchor: Point,
    pub width: f64,
}

impl TruncatedCylinder {
    pub fn new(anchor: Point, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::config(format!(
                "cylinder width must be > 0, got {width}"
            )));
        }
        if !(anchor.x > 0.0 && anchor.t > 0.0) {
            return Err(Error::config("cylinder anchor needs positive coordinates"));
        }
        Ok(TruncatedCylinder { anchor, width })
    }
}

/// Evenly spaced samples along both side edges of the cylinder. Empty when no
/// point of an edge satisfies the truncation constraints.
pub fn cylinder_side_edge_points(cyl: &TruncatedCylinder, samples: usize) -> Result<Vec<Point>> {
    if samples < 2 {
        return Err(Error::config("need at least two samples per edge"));
    }
    let p = cyl.anchor;
    let norm = p.norm();
    let u = p.scale(1.0 / norm);
    let n = Point::new(-u.t, u.x);
    let s_hi_sq = 4.0 * norm * norm - cyl.width * cyl.width;
    let mut out = Vec::new();
    if s_hi_sq < 0.0 {
        return Ok(out);
    }
    let s_hi = s_hi_sq.sqrt();
    for sign in [1.0, -1.0] {
        let off = n.scale(sign * cyl.width);
        // q = s·u + off must dominate p in both coordinates.
        let s_lo = ((p.x - off.x) / u.x).max((p.t - off.t) / u.t);
        if s_lo > s_hi {
            continue;
        }
        for i in 0..samples {
            let s = s_lo + (s_hi - s_lo) * i as f64 / (samples - 1) as f64;
            let q = u.scale(s).add(&off);
            // Guard the end points against rounding across the constraints.
            if q.x >= p.x - 1e-9 && q.t >= p.t - 1e-9 {
                out.push(Point::new(q.x.max(p.x), q.t.max(p.t)));
            }
        }
    }
    Ok(out)
}

/// Distance from `q` to the segment `a → b`.
pub fn point_segment_distance(q: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.t * ab.t;
    if len2 == 0.0 {
        return q.dist(a);
    }
    let aq = q.sub(a);
    let s = ((aq.x * ab.x + aq.t * ab.t) / len2).clamp(0.0, 1.0);
    q.dist(&a.add(&ab.scale(s)))
}

/// Distance from `q` to the full line through the origin and `dir`.
pub fn point_line_distance(q: &Point, dir: &Point) -> f64 {
    (q.x * dir.t - q.t * dir.x).abs() / dir.norm()
}

/// Largest distance from a chain point to the segment joining the geodesic's
/// end points.
pub fn transversal_deviation(geo: &Geodesic) -> f64 {
    geo.chain
        .iter()
        .map(|c| point_segment_distance(&c.pos(), &geo.start, &geo.end))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::MarkedPoint;

    fn f(g: f64) -> ShapeFunction {
        ShapeFunction::new(g).unwrap()
    }

    #[test]
    fn shape_values() {
        let s = f(1.7);
        assert_eq!(shape_value(&s, 1.0, 1.0).unwrap(), 1.7);
        assert_eq!(shape_value(&s, 4.0, 1.0).unwrap(), 2.0 * 1.7);
        let a = s.value(3.0 * 2.0, 5.0 / 3.0);
        assert!((a - s.value(2.0, 5.0)).abs() < 1e-12);
        assert!(shape_value(&s, -1.0, 1.0).is_err());
        assert!(ShapeFunction::new(0.0).is_err());
    }

    #[test]
    fn gap_examples() {
        let s = f(2.0);
        assert_eq!(
            curvature_gap(&s, Point::new(1.0, 1.0), Point::new(2.0, 2.0)).unwrap(),
            0.0
        );
        let g = curvature_gap(&s, Point::new(1.0, 1.0), Point::new(3.0, 1.0)).unwrap();
        assert!((g - 2.0 * (3f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((g / 2.0 - 0.732).abs() < 1e-3);
        assert!(curvature_gap(&s, Point::new(2.0, 1.0), Point::new(1.0, 3.0)).is_err());
    }

    #[test]
    fn gap_on_cylinder_side_edge_scales_with_anchor() {
        let s = f(2.0);
        let delta = DEFAULT_DELTA;
        let p = Point::new(50.0, 50.0);
        let cyl = TruncatedCylinder::new(p, p.norm().powf(1.0 - delta)).unwrap();
        let qs = cylinder_side_edge_points(&cyl, 200).unwrap();
        assert!(!qs.is_empty());
        let scale = p.norm().powf(1.0 - 2.0 * delta);
        let min_ratio = qs
            .iter()
            .map(|q| curvature_gap(&s, p, *q).unwrap() / scale)
            .fold(f64::INFINITY, f64::min);
        assert!(min_ratio > 0.01, "min ratio {min_ratio}");
    }

    #[test]
    fn cone_examples() {
        let cone = Cone::new(Point::ORIGIN, Point::new(1.0, 1.0), 0.1).unwrap();
        assert!(cone.contains(&Point::new(3.0, 3.0)));
        assert!(cone.contains(&Point::ORIGIN));
        let at = |theta: f64| {
            let a = FRAC_PI_4 + theta;
            Point::new(10.0 * a.cos(), 10.0 * a.sin())
        };
        assert!(cone.contains(&at(0.05)));
        assert!(cone.contains(&at(-0.05)));
        assert!(!cone.contains(&at(0.2)));
        assert!(!cone.contains(&at(-0.2)));
        assert!(Cone::new(Point::ORIGIN, Point::new(1.0, 1.0), 0.8).is_err());
    }

    #[test]
    fn side_edges() {
        let p = Point::new(10.0, 10.0);
        let wide = TruncatedCylinder::new(p, 30.0).unwrap();
        assert!(cylinder_side_edge_points(&wide, 10).unwrap().is_empty());
        let cyl = TruncatedCylinder::new(p, 2.0).unwrap();
        let qs = cylinder_side_edge_points(&cyl, 25).unwrap();
        assert_eq!(qs.len(), 50);
        for q in &qs {
            assert!((point_line_distance(q, &p) - 2.0).abs() < 1e-9);
            assert!(p.leq(q));
            assert!(q.norm() <= 2.0 * p.norm() + 1e-9);
        }
        assert!(cylinder_side_edge_points(&cyl, 1).is_err());
    }

    #[test]
    fn deviation_examples() {
        let geo = |chain: Vec<MarkedPoint>, end: Point| Geodesic {
            start: Point::ORIGIN,
            end,
            indices: (0..chain.len()).collect(),
            value: chain.iter().map(|c| c.w).sum(),
            chain,
        };
        assert_eq!(
            transversal_deviation(&geo(vec![], Point::new(2.0, 2.0))),
            0.0
        );
        let on = geo(vec![MarkedPoint::new(1.0, 1.0, 1.0)], Point::new(2.0, 2.0));
        assert_eq!(transversal_deviation(&on), 0.0);
        let off = geo(vec![MarkedPoint::new(1.0, 2.0, 1.0)], Point::new(3.0, 3.0));
        assert!((transversal_deviation(&off) - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }
}
