//! Finite-radius approximations of semi-infinite geodesics in a fixed
//! direction, their coalescence, and Busemann increments.
//!
//! A ray from `start` in direction `α` is approximated by the lowest
//! geodesics to the common targets `R (cos α, sin α)` for an increasing
//! schedule of radii `R`. Rays from different starts share their targets, so
//! once two of them meet they stay together. The ray is declared stabilized when the geodesics for the last
//! two radii visit exactly the same points inside the disc of radius
//! `R_last / 4` around the start.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::lpp::{last_passage, Geodesic, PassageField};
use crate::point_process::{MarkedPoint, Point, PointCloud, Region};

/// Identity of the cloud a ray was computed on.
#[derive(Clone, Copy, Debug, PartialEq)]
struct CloudTag {
    seed: u64,
    len: usize,
    region: Region,
}

impl CloudTag {
    fn of(cloud: &PointCloud) -> Self {
        CloudTag {
            seed: cloud.seed(),
            len: cloud.len(),
            region: *cloud.region(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RayApproximation {
    pub start: Point,
    pub alpha: f64,
    pub radii: Vec<f64>,
    /// One geodesic per radius, from `start` to its target.
    pub prefixes: Vec<Geodesic>,
    /// Longest common chain prefix of the last two geodesics.
    pub stable_prefix: Vec<MarkedPoint>,
    pub stable_indices: Vec<usize>,
    pub stabilized: bool,
    tag: CloudTag,
}

impl RayApproximation {
    /// The geodesic for the largest radius.
    pub fn longest(&self) -> &Geodesic {
        self.prefixes.last().expect("at least two radii")
    }
}

pub fn direction(alpha: f64) -> Point {
    Point::new(alpha.cos(), alpha.sin())
}

pub fn ray_target(alpha: f64, radius: f64) -> Point {
    direction(alpha).scale(radius)
}

fn validate_schedule(alpha: f64, radii: &[f64]) -> Result<()> {
    if !(alpha > 0.0 && alpha < FRAC_PI_2) {
        return Err(Error::config(format!(
            "alpha must lie in (0, pi/2), got {alpha}"
        )));
    }
    if radii.len() < 2 {
        return Err(Error::config("radius schedule needs at least two radii"));
    }
    if !radii.iter().all(|r| r.is_finite() && *r > 0.0) || !radii.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config(
            "radii must be positive and strictly increasing",
        ));
    }
    Ok(())
}

/// Square region holding every target of the schedule, grown to 1.3 times
/// the largest radius in each coordinate.
pub fn ray_region(starts: &[Point], radii: &[f64]) -> Result<Region> {
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let x0 = starts.iter().map(|s| s.x).fold(0.0, f64::min);
    let t0 = starts.iter().map(|s| s.t).fold(0.0, f64::min);
    let x1 = starts.iter().map(|s| s.x).fold(0.0, f64::max) + 1.3 * r_max;
    let t1 = starts.iter().map(|s| s.t).fold(0.0, f64::max) + 1.3 * r_max;
    Region::new(x0, x1, t0, t1)
}

pub fn approx_alpha_ray(
    cloud: &PointCloud,
    start: Point,
    alpha: f64,
    radii: &[f64],
) -> Result<RayApproximation> {
    validate_schedule(alpha, radii)?;
    let targets: Vec<Point> = radii.iter().map(|&r| ray_target(alpha, r)).collect();
    if let Some(t) = targets.iter().find(|t| !cloud.region().contains(t)) {
        return Err(Error::config(format!(
            "ray target ({}, {}) lies outside the cloud region",
            t.x, t.t
        )));
    }
    if !start.leq(&targets[0]) {
        return Err(Error::config(format!(
            "start ({}, {}) is not below the first target ({}, {})",
            start.x, start.t, targets[0].x, targets[0].t
        )));
    }
    let field = PassageField::for_box(cloud, start, *targets.last().unwrap())?;
    let prefixes = targets
        .iter()
        .map(|t| field.geodesic_to(cloud, t))
        .collect::<Result<Vec<_>>>()?;

    let a = &prefixes[prefixes.len() - 2];
    let b = &prefixes[prefixes.len() - 1];
    let common = a
        .indices
        .iter()
        .zip(&b.indices)
        .take_while(|(x, y)| x == y)
        .count();
    let window = radii[radii.len() - 1] / 4.0;
    let inside = |g: &Geodesic| -> Vec<usize> {
        g.indices
            .iter()
            .zip(&g.chain)
            .filter(|(_, c)| c.pos().dist(&start) <= window)
            .map(|(i, _)| *i)
            .collect()
    };
    let stabilized = inside(a) == inside(b);

    Ok(RayApproximation {
        start,
        alpha,
        radii: radii.to_vec(),
        stable_prefix: b.chain[..common].to_vec(),
        stable_indices: b.indices[..common].to_vec(),
        prefixes,
        stabilized,
        tag: CloudTag::of(cloud),
    })
}

/// First point of `ray_a`'s stable prefix after which both stable prefixes
/// coincide (up to the end of the shorter one).
pub fn coalescence_point(
    ray_a: &RayApproximation,
    ray_b: &RayApproximation,
) -> Result<Option<MarkedPoint>> {
    if ray_a.tag != ray_b.tag {
        return Err(Error::config("rays were computed on different clouds"));
    }
    if ray_a.alpha != ray_b.alpha || ray_a.radii != ray_b.radii {
        return Err(Error::config(
            "rays use different directions or radius schedules",
        ));
    }
    let a = &ray_a.stable_indices;
    let b = &ray_b.stable_indices;
    for (i, idx) in a.iter().enumerate() {
        // Chains are increasing in cloud order, so a binary search finds the match.
        let Ok(j) = b.binary_search(idx) else {
            continue;
        };
        let m = (a.len() - i).min(b.len() - j);
        if a[i..i + m] == b[j..j + m] {
            return Ok(Some(ray_a.stable_prefix[i]));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BusemannSample {
    pub alpha: f64,
    pub x: Point,
    pub y: Point,
    pub coalescence: MarkedPoint,
    pub value: f64,
}

/// `B(x, y) = L(y, c) − L(x, c)` from two precomputed rays.
pub fn busemann_from_rays(
    cloud: &PointCloud,
    ray_x: &RayApproximation,
    ray_y: &RayApproximation,
) -> Result<Option<BusemannSample>> {
    let Some(c) = coalescence_point(ray_x, ray_y)? else {
        return Ok(None);
    };
    let value =
        last_passage(cloud, ray_y.start, c.pos())? - last_passage(cloud, ray_x.start, c.pos())?;
    Ok(Some(BusemannSample {
        alpha: ray_x.alpha,
        x: ray_x.start,
        y: ray_y.start,
        coalescence: c,
        value,
    }))
}

pub fn busemann(
    cloud: &PointCloud,
    alpha: f64,
    x: Point,
    y: Point,
    radii: &[f64],
) -> Result<Option<BusemannSample>> {
    let ray_x = approx_alpha_ray(cloud, x, alpha, radii)?;
    let ray_y = approx_alpha_ray(cloud, y, alpha, radii)?;
    busemann_from_rays(cloud, &ray_x, &ray_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::sample_cloud;
    use crate::weight_laws::WeightLaw;
    use std::f64::consts::FRAC_PI_4;

    fn small_cloud(seed: u64) -> PointCloud {
        let region = Region::square(130.0).unwrap();
        sample_cloud(region, 1.0, &WeightLaw::classical(), seed).unwrap()
    }

    #[test]
    fn empty_cloud_is_trivially_stable() {
        let cloud = PointCloud::empty(Region::square(100.0).unwrap());
        let ray = approx_alpha_ray(&cloud, Point::ORIGIN, FRAC_PI_4, &[20.0, 40.0]).unwrap();
        assert!(ray.stabilized);
        assert!(ray.prefixes.iter().all(|g| g.chain.is_empty()));
        assert!(ray.stable_prefix.is_empty());
        assert_eq!(coalescence_point(&ray, &ray).unwrap(), None);
    }

    #[test]
    fn stable_prefix_is_a_prefix_of_both() {
        for seed in 0..5 {
            let cloud = small_cloud(seed);
            let ray = approx_alpha_ray(&cloud, Point::ORIGIN, FRAC_PI_4, &[40.0, 80.0]).unwrap();
            let n = ray.stable_prefix.len();
            for g in &ray.prefixes {
                assert_eq!(&g.chain[..n], &ray.stable_prefix[..]);
            }
        }
    }

    #[test]
    fn rejects_bad_schedules_and_outside_targets() {
        let cloud = small_cloud(1);
        assert!(approx_alpha_ray(&cloud, Point::ORIGIN, 0.0, &[10.0, 20.0]).is_err());
        assert!(approx_alpha_ray(&cloud, Point::ORIGIN, FRAC_PI_4, &[10.0]).is_err());
        assert!(approx_alpha_ray(&cloud, Point::ORIGIN, FRAC_PI_4, &[20.0, 10.0]).is_err());
        assert!(matches!(
            approx_alpha_ray(&cloud, Point::ORIGIN, FRAC_PI_4, &[100.0, 200.0]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn same_start_coalesces_at_first_point() {
        let cloud = small_cloud(3);
        let ray = approx_alpha_ray(&cloud, Point::ORIGIN, FRAC_PI_4, &[40.0, 80.0]).unwrap();
        assert!(!ray.stable_prefix.is_empty());
        assert_eq!(
            coalescence_point(&ray, &ray).unwrap(),
            Some(ray.stable_prefix[0])
        );
        let b = busemann(
            &cloud,
            FRAC_PI_4,
            Point::ORIGIN,
            Point::ORIGIN,
            &[40.0, 80.0],
        )
        .unwrap()
        .unwrap();
        assert_eq!(b.value, 0.0);
    }

    #[test]
    fn mismatched_rays_are_rejected() {
        let a = small_cloud(1);
        let b = small_cloud(2);
        let ra = approx_alpha_ray(&a, Point::ORIGIN, FRAC_PI_4, &[40.0, 80.0]).unwrap();
        let rb = approx_alpha_ray(&b, Point::ORIGIN, FRAC_PI_4, &[40.0, 80.0]).unwrap();
        assert!(coalescence_point(&ra, &rb).is_err());
        let rc = approx_alpha_ray(&a, Point::ORIGIN, 0.7, &[40.0, 80.0]).unwrap();
        assert!(coalescence_point(&ra, &rc).is_err());
    }

    #[test]
    fn disjoint_stable_prefixes_do_not_coalesce() {
        // The only point is visible from the first start but not the second.
        let pts = vec![MarkedPoint::new(10.0, 10.0, 1.0)];
        let cloud = PointCloud::from_points(Region::square(130.0).unwrap(), pts, 0).unwrap();
        let radii = [40.0, 80.0];
        let y = Point::new(20.0, 0.0);
        let ra = approx_alpha_ray(&cloud, Point::ORIGIN, FRAC_PI_4, &radii).unwrap();
        let rb = approx_alpha_ray(&cloud, y, FRAC_PI_4, &radii).unwrap();
        assert_eq!(ra.stable_prefix.len(), 1);
        assert!(rb.stable_prefix.is_empty());
        assert_eq!(coalescence_point(&ra, &rb).unwrap(), None);
        assert_eq!(
            busemann(&cloud, FRAC_PI_4, Point::ORIGIN, y, &radii).unwrap(),
            None
        );
    }

    #[test]
    fn start_must_lie_below_targets() {
        let cloud = small_cloud(1);
        let r = approx_alpha_ray(&cloud, Point::new(50.0, 0.0), FRAC_PI_4, &[40.0, 80.0]);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn busemann_is_antisymmetric() {
        let radii = [40.0, 80.0];
        let x = Point::ORIGIN;
        let y = Point::new(5.0, 0.0);
        let mut seen = 0;
        for seed in 0..10 {
            let cloud = small_cloud(seed);
            let bxy = busemann(&cloud, FRAC_PI_4, x, y, &radii).unwrap();
            let byx = busemann(&cloud, FRAC_PI_4, y, x, &radii).unwrap();
            assert_eq!(bxy.is_some(), byx.is_some());
            if let (Some(a), Some(b)) = (bxy, byx) {
                assert_eq!(a.coalescence, b.coalescence);
                assert_eq!(a.value, -b.value);
                seen += 1;
            }
        }
        assert!(seen > 0);
    }
}
