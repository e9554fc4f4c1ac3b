//! Marked planar Poisson clouds.
//!
//! A [`PointCloud`] holds the points of one realisation sorted
//! lexicographically by `(x, t)`. The order is total and strict, which is what
//! lets every downstream tie-break be deterministic even though real-valued
//! samples almost surely have no coordinate ties.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{Error, Result};
use crate::weight_laws::WeightLaw;

/// A location in the plane: `x` horizontal, `t` vertical.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub t: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, t: 0.0 };

    pub const fn new(x: f64, t: f64) -> Self {
        Point { x, t }
    }

    /// Componentwise `self ≤ other`.
    pub fn leq(&self, other: &Point) -> bool {
        self.x <= other.x && self.t <= other.t
    }

    /// Componentwise strict `self < other`.
    pub fn lt(&self, other: &Point) -> bool {
        self.x < other.x && self.t < other.t
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.t)
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point::new(self.x - other.x, self.t - other.t)
    }

    pub fn add(&self, other: &Point) -> Point {
        Point::new(self.x + other.x, self.t + other.t)
    }

    pub fn scale(&self, s: f64) -> Point {
        Point::new(self.x * s, self.t * s)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.sub(other).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkedPoint {
    pub x: f64,
    pub t: f64,
    pub w: f64,
}

impl MarkedPoint {
    pub const fn new(x: f64, t: f64, w: f64) -> Self {
        MarkedPoint { x, t, w }
    }

    pub fn pos(&self) -> Point {
        Point::new(self.x, self.t)
    }

    fn lex_lt(&self, other: &MarkedPoint) -> bool {
        self.x < other.x || (self.x == other.x && self.t < other.t)
    }
}

/// Closed rectangle `[x0, x1] × [t0, t1]` with positive area.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub x0: f64,
    pub x1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Region {
    pub fn new(x0: f64, x1: f64, t0: f64, t1: f64) -> Result<Self> {
        let finite = [x0, x1, t0, t1].iter().all(|v| v.is_finite());
        if !finite || !(x0 < x1) || !(t0 < t1) {
            return Err(Error::config(format!(
                "region [{x0},{x1}]x[{t0},{t1}] must be finite with positive area"
            )));
        }
        Ok(Region { x0, x1, t0, t1 })
    }

    /// `[0, side]²`.
    pub fn square(side: f64) -> Result<Self> {
        Region::new(0.0, side, 0.0, side)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.t1 - self.t0)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.x0 <= p.x && p.x <= self.x1 && self.t0 <= p.t && p.t <= self.t1
    }

    pub fn lower_left(&self) -> Point {
        Point::new(self.x0, self.t0)
    }

    pub fn upper_right(&self) -> Point {
        Point::new(self.x1, self.t1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    region: Region,
    points: Vec<MarkedPoint>,
    seed: u64,
}

impl PointCloud {
    /// Builds a cloud from explicit points. Points are sorted; duplicates of an
    /// `(x, t)` location, points outside the region and invalid weights are
    /// rejected.
    pub fn from_points(region: Region, mut points: Vec<MarkedPoint>, seed: u64) -> Result<Self> {
        for p in &points {
            if !(p.x.is_finite() && p.t.is_finite()) {
                return Err(Error::config(format!(
                    "non-finite point ({}, {})",
                    p.x, p.t
                )));
            }
            if !(p.w.is_finite() && p.w >= 0.0) {
                return Err(Error::config(format!(
                    "weight must be finite and >= 0, got {}",
                    p.w
                )));
            }
            if !region.contains(&p.pos()) {
                return Err(Error::config(format!(
                    "point ({}, {}) outside region",
                    p.x, p.t
                )));
            }
        }
        points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.t.total_cmp(&b.t)));
        if let Some(w) = points.windows(2).find(|w| !w[0].lex_lt(&w[1])) {
            return Err(Error::config(format!(
                "duplicate location ({}, {})",
                w[1].x, w[1].t
            )));
        }
        Ok(PointCloud {
            region,
            points,
            seed,
        })
    }

    pub fn empty(region: Region) -> Self {
        PointCloud {
            region,
            points: Vec::new(),
            seed: 0,
        }
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn points(&self) -> &[MarkedPoint] {
        &self.points
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the point at exactly `pos`, if any.
    pub fn index_of(&self, pos: &Point) -> Option<usize> {
        let i = self
            .points
            .partition_point(|p| p.x < pos.x || (p.x == pos.x && p.t < pos.t));
        (i < self.points.len() && self.points[i].pos() == *pos).then_some(i)
    }

    /// Index range of the points with `lo ≤ x ≤ hi`.
    pub(crate) fn x_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.points.partition_point(|p| p.x < lo);
        let b = self.points.partition_point(|p| p.x <= hi);
        a..b.max(a)
    }

    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        let r = &self.region;
        writeln!(
            out,
            "x t w region={:?},{:?},{:?},{:?} seed={}",
            r.x0, r.x1, r.t0, r.t1, self.seed
        )?;
        let mut line = String::new();
        for p in &self.points {
            line.clear();
            writeln!(line, "{:?} {:?} {:?}", p.x, p.t, p.w).unwrap();
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_table<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })??;
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut region = None;
        let mut seed = 0;
        for tok in header.split_whitespace() {
            if let Some(v) = tok.strip_prefix("region=") {
                let vals: Vec<f64> = v
                    .split(',')
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| parse_err(1, "bad region"))?;
                if vals.len() != 4 {
                    return Err(parse_err(1, "region needs four values"));
                }
                region = Some(Region::new(vals[0], vals[1], vals[2], vals[3])?);
            } else if let Some(v) = tok.strip_prefix("seed=") {
                seed = v.parse().map_err(|_| parse_err(1, "bad seed"))?;
            }
        }
        let region = region.ok_or_else(|| parse_err(1, "header lacks region"))?;
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(i + 2, "expected three reals"))?;
            if vals.len() != 3 {
                return Err(parse_err(i + 2, "expected three reals"));
            }
            points.push(MarkedPoint::new(vals[0], vals[1], vals[2]));
        }
        PointCloud::from_points(region, points, seed)
    }
}

/// Seed for replica `replica` of arm `arm` under `master`: the `replica`-th
/// word of ChaCha stream `arm` keyed by `master`. Counter-based, so any replica
/// can be regenerated on its own.
pub fn derive_seed(master: u64, arm: u64, replica: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(arm);
    rng.set_word_pos(2 * replica as u128);
    rng.next_u64()
}

/// Samples a marked Poisson cloud of the given intensity on `region`.
///
/// The count is Poisson(intensity · area); the sorted abscissae are produced
/// directly as normalised exponential partial sums (the law of uniform order
/// statistics), then each point gets an independent uniform ordinate and a
/// weight from `law`.
pub fn sample_cloud(
    region: Region,
    intensity: f64,
    law: &WeightLaw,
    seed: u64,
) -> Result<PointCloud> {
    let region = Region::new(region.x0, region.x1, region.t0, region.t1)?;
    if !(intensity.is_finite() && intensity > 0.0) {
        return Err(Error::config(format!(
            "intensity must be > 0, got {intensity}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = intensity * region.area();
    let n = Poisson::new(mean)
        .map_err(|e| Error::config(format!("poisson mean {mean}: {e}")))?
        .sample(&mut rng) as usize;

    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0f64;
    for _ in 0..n {
        let e: f64 = Exp1.sample(&mut rng);
        acc += e;
        cum.push(acc);
    }
    let e: f64 = Exp1.sample(&mut rng);
    let total = acc + e;

    let width = region.x1 - region.x0;
    let height = region.t1 - region.t0;
    let mut points = Vec::with_capacity(n);
    for s in cum {
        let x = (region.x0 + width * (s / total)).min(region.x1);
        let t = (region.t0 + height * rng.random::<f64>()).min(region.t1);
        let w = law.sample(&mut rng);
        points.push(MarkedPoint::new(x, t, w));
    }
    // Rounding can collapse neighbouring abscissae; restore the strict order.
    if !points.is_sorted_by(|a, b| a.lex_lt(b)) {
        points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.t.total_cmp(&b.t)));
        points.dedup_by(|b, a| a.x == b.x && a.t == b.t);
    }
    Ok(PointCloud {
        region,
        points,
        seed,
    })
}

/// Image of the cloud under `(x, t) ↦ shift + (λx, t/λ)`; weights are kept.
/// The map is increasing in each coordinate, so the point order and the
/// componentwise partial order are both preserved.
pub fn apply_hyperbolic_map(cloud: &PointCloud, lambda: f64, shift: Point) -> Result<PointCloud> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::config(format!("lambda must be > 0, got {lambda}")));
    }
    let map = |x: f64, t: f64| (shift.x + lambda * x, shift.t + t / lambda);
    let (x0, t0) = map(cloud.region.x0, cloud.region.t0);
    let (x1, t1) = map(cloud.region.x1, cloud.region.t1);
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let (x, t) = map(p.x, p.t);
            MarkedPoint::new(x, t, p.w)
        })
        .collect();
    Ok(PointCloud {
        region: Region::new(x0, x1, t0, t1)?,
        points,
        seed: cloud.seed,
    })
}

/// Maps a single location the same way as [`apply_hyperbolic_map`].
pub fn map_point(p: Point, lambda: f64, shift: Point) -> Point {
    Point::new(shift.x + lambda * p.x, shift.t + p.t / lambda)
}
