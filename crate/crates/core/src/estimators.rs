//! Monte Carlo estimators over independent replicas.
//!
//! Replica `i` of an arm draws its cloud from `derive_seed(master, arm, i)`.
//! Replicas run on the rayon pool and are collected in index order, so every
//! report and raw table is a deterministic function of the inputs.

use std::f64::consts::{E, LN_2};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{transversal_deviation, Cone, ShapeFunction};
use crate::lpp::{last_passage, PassageField};
use crate::point_process::{derive_seed, sample_cloud, Point, PointCloud, Region};
use crate::rays::{
    approx_alpha_ray, busemann_from_rays, coalescence_point, ray_region, RayApproximation,
};
use crate::report::{Estimate, EstimatorReport, RawTable};
use crate::stats;
use crate::weight_laws::WeightLaw;

const ARM_MAIN: u64 = 0;
const ARM_REFERENCE: u64 = 1;
const ARM_SCALED: u64 = 2;

/// `2 (log 2 + 2e)`: geodesic cardinality threshold per unit of `r`.
pub const PATH_COUNT_FACTOR: f64 = 2.0 * (LN_2 + 2.0 * E);

/// Angular tolerance for the direction of a stabilized ray.
pub const DIRECTION_TOLERANCE: f64 = 0.15;

fn replicas<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..n as u64).into_par_iter().map(&f).collect()
}

fn check_replicas(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::config(format!("replicas must be >= 2, got {n}")));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::config(format!("radius must be > 0, got {r}")));
    }
    Ok(())
}

fn check_radii(radii: &[f64], min_len: usize) -> Result<()> {
    if radii.len() < min_len {
        return Err(Error::config(format!(
            "need at least {min_len} radii, got {}",
            radii.len()
        )));
    }
    if !radii.iter().all(|r| r.is_finite() && *r > 1.0) || !radii.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config("radii must exceed 1 and increase strictly"));
    }
    Ok(())
}

fn diagonal_sample(law: &WeightLaw, r: f64, seed: u64) -> Result<f64> {
    let cloud = sample_cloud(Region::square(r)?, 1.0, law, seed)?;
    last_passage(&cloud, Point::ORIGIN, Point::new(r, r))
}

/// Scale of the bias of `E L(0,(r,r)) / r` below `γ`: `r^{-1/2} log² r`.
pub fn bias_scale(r: f64) -> f64 {
    r.ln().powi(2) / r.sqrt()
}

/// Mean of `L(0, (r, r)) / r` over independent clouds. The estimate sits
/// below `γ` by at most a multiple of [`bias_scale`].
pub fn estimate_gamma(law: &WeightLaw, r: f64, replicas_n: usize, seed: u64) -> Result<Estimate> {
    check_replicas(replicas_n)?;
    check_radius(r)?;
    let values = replicas(replicas_n, |i| {
        diagonal_sample(law, r, derive_seed(seed, ARM_MAIN, i))
    })?;
    let ratios: Vec<f64> = values.iter().map(|v| v / r).collect();
    let report = EstimatorReport::from_samples("gamma", &ratios)?
        .with("r", r)
        .with("bias_scale", bias_scale(r));
    let mut raw = RawTable::new(&["replica", "L", "L_over_r"]);
    for (i, (v, q)) in values.iter().zip(&ratios).enumerate() {
        raw.push(vec![i as f64, *v, *q]);
    }
    Ok(Estimate { report, raw })
}

/// Compares `E L / r` for `law` with `γ̂(1) ∫ √(1 − F)`, where `γ̂(1)` comes
/// from a classical run with the same radius and replica budget.
pub fn martin_bound_check(
    law: &WeightLaw,
    r: f64,
    replicas_n: usize,
    seed: u64,
) -> Result<Estimate> {
    let integral = law.sqrt_tail_integral();
    if !integral.is_finite() {
        return Err(Error::config(format!(
            "{law}: the square-root tail integral diverges, no bound to check"
        )));
    }
    check_replicas(replicas_n)?;
    check_radius(r)?;
    let classical = WeightLaw::classical();
    let pairs = replicas(replicas_n, |i| {
        let main = diagonal_sample(law, r, derive_seed(seed, ARM_MAIN, i))?;
        let reference = diagonal_sample(&classical, r, derive_seed(seed, ARM_REFERENCE, i))?;
        Ok((main / r, reference / r))
    })?;
    let main: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let reference: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut report = EstimatorReport::from_samples("martin", &main)?;
    let gamma1 = stats::mean(&reference);
    let gamma1_se = stats::std_error(&reference);
    let bound = gamma1 * integral;
    let combined_se = report.std_error.hypot(integral * gamma1_se);
    let pass = report.mean <= bound + 3.0 * combined_se;
    report.set("r", r);
    report.set("integral", integral);
    report.set("gamma1", gamma1);
    report.set("gamma1_se", gamma1_se);
    report.set("bound", bound);
    report.set("combined_se", combined_se);
    report.set("pass", pass as u8 as f64);
    let mut raw = RawTable::new(&["replica", "L_over_r", "classical_L_over_r"]);
    for (i, (a, b)) in pairs.iter().enumerate() {
        raw.push(vec![i as f64, *a, *b]);
    }
    Ok(Estimate { report, raw })
}

/// Standard deviation of `L(0, (r, r))` across replicas for each radius, and
/// the log-log slope of sd against `r`. All radii of one replica are read off
/// the same cloud on the largest square.
pub fn fluctuation_scan(
    law: &WeightLaw,
    radii: &[f64],
    replicas_n: usize,
    seed: u64,
) -> Result<Estimate> {
    check_replicas(replicas_n)?;
    check_radii(radii, 4)?;
    if !law.has_exponential_moment().0 {
        return Err(Error::config(format!(
            "{law} lacks a finite exponential moment"
        )));
    }
    let r_max = *radii.last().unwrap();
    let rows = replicas(replicas_n, |i| {
        let cloud = sample_cloud(
            Region::square(r_max)?,
            1.0,
            law,
            derive_seed(seed, ARM_MAIN, i),
        )?;
        radii
            .iter()
            .map(|&r| last_passage(&cloud, Point::ORIGIN, Point::new(r, r)))
            .collect::<Result<Vec<f64>>>()
    })?;
    let per_radius: Vec<Vec<f64>> = (0..radii.len())
        .map(|j| rows.iter().map(|row| row[j]).collect())
        .collect();
    let sds: Vec<f64> = per_radius.iter().map(|v| stats::std_dev(v)).collect();

    let last: Vec<f64> = per_radius
        .last()
        .unwrap()
        .iter()
        .map(|v| v / r_max)
        .collect();
    let mut report = EstimatorReport::from_samples("fluct", &last)?;
    let defined = sds.iter().all(|s| *s > 0.0);
    let exponent = if defined {
        stats::log_log_slope(radii, &sds)
    } else {
        f64::NAN
    };
    let r0 = radii[0];
    let c = sds[0] / (r0.sqrt() * r0.ln());
    let diffusive_ok = radii
        .iter()
        .zip(&sds)
        .all(|(r, sd)| *sd <= c * r.sqrt() * r.ln() * (1.0 + 1e-12));
    report.set("exponent", exponent);
    report.set("exponent_defined", defined as u8 as f64);
    report.set("diffusive_c", c);
    report.set("diffusive_ok", diffusive_ok as u8 as f64);
    for (j, r) in radii.iter().enumerate() {
        report.set(&format!("sd_r{r}"), sds[j]);
        report.set(&format!("mean_r{r}"), stats::mean(&per_radius[j]));
    }
    let mut cols = vec!["replica".to_string()];
    cols.extend(radii.iter().map(|r| format!("L_r{r}")));
    let mut raw = RawTable {
        columns: cols,
        rows: Vec::new(),
    };
    for (i, row) in rows.iter().enumerate() {
        let mut line = vec![i as f64];
        line.extend(row);
        raw.push(line);
    }
    Ok(Estimate { report, raw })
}

/// Two-sample KS comparison of `L(0, (r, r))` with `L(0, (λr, r/λ))` on
/// independent clouds. Also checks, on every replica of the first arm, that
/// mapping the cloud by `(x, t) ↦ (λx, t/λ)` leaves `L` exactly unchanged.
pub fn scale_invariance_test(
    law: &WeightLaw,
    r: f64,
    lambda: f64,
    replicas_n: usize,
    seed: u64,
) -> Result<Estimate> {
    if replicas_n < 200 {
        return Err(Error::config(format!(
            "scale test needs at least 200 replicas per arm, got {replicas_n}"
        )));
    }
    check_radius(r)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::config(format!("lambda must be > 0, got {lambda}")));
    }
    let corner = Point::new(lambda * r, r / lambda);
    let rows = replicas(replicas_n, |i| {
        let cloud = sample_cloud(Region::square(r)?, 1.0, law, derive_seed(seed, ARM_MAIN, i))?;
        let a = last_passage(&cloud, Point::ORIGIN, Point::new(r, r))?;
        let mapped = crate::point_process::apply_hyperbolic_map(&cloud, lambda, Point::ORIGIN)?;
        let a_mapped = last_passage(&mapped, Point::ORIGIN, corner)?;
        drop(mapped);
        let region = Region::new(0.0, corner.x, 0.0, corner.t)?;
        let other = sample_cloud(region, 1.0, law, derive_seed(seed, ARM_SCALED, i))?;
        let b = last_passage(&other, Point::ORIGIN, corner)?;
        Ok((a, b, a_mapped))
    })?;
    let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let violations = rows.iter().filter(|r| r.0 != r.2).count();
    let (d, p) = stats::ks_two_sample_test(&a, &b);
    let ratios: Vec<f64> = a.iter().map(|v| v / r).collect();
    let report = EstimatorReport::from_samples("scale", &ratios)?
        .with("r", r)
        .with("lambda", lambda)
        .with("mean_scaled", stats::mean(&b) / r)
        .with("ks_statistic", d)
        .with("ks_pvalue", p)
        .with("exact_map_violations", violations as f64);
    let mut raw = RawTable::new(&["replica", "L_square", "L_scaled", "L_square_mapped"]);
    for (i, row) in rows.iter().enumerate() {
        raw.push(vec![i as f64, row.0, row.1, row.2]);
    }
    Ok(Estimate { report, raw })
}

/// Number of points on the lowest geodesic `ϖ(0, (r, r))`.
pub fn path_count_tail(law: &WeightLaw, r: f64, replicas_n: usize, seed: u64) -> Result<Estimate> {
    check_replicas(replicas_n)?;
    if !(r >= 10.0) {
        return Err(Error::config(format!("path count needs r >= 10, got {r}")));
    }
    let counts = replicas(replicas_n, |i| {
        let cloud = sample_cloud(Region::square(r)?, 1.0, law, derive_seed(seed, ARM_MAIN, i))?;
        Ok(crate::lpp::geodesic(&cloud, Point::ORIGIN, Point::new(r, r))?.len() as f64)
    })?;
    let ratios: Vec<f64> = counts.iter().map(|c| c / r).collect();
    let threshold = PATH_COUNT_FACTOR * r;
    let violations = counts.iter().filter(|c| **c > threshold).count();
    let report = EstimatorReport::from_samples("pathcount", &ratios)?
        .with("r", r)
        .with("threshold", threshold)
        .with("max_ratio", ratios.iter().copied().fold(0.0, f64::max))
        .with("violations", violations as f64);
    let mut raw = RawTable::new(&["replica", "count", "count_over_r"]);
    for (i, (c, q)) in counts.iter().zip(&ratios).enumerate() {
        raw.push(vec![i as f64, *c, *q]);
    }
    Ok(Estimate { report, raw })
}

/// Transversal wandering of `ϖ(0, (r, r))` across radii, and the fraction of
/// replicas whose endpoint `(r, r)` lies in the cone `Co(p, |p|^{-δ})` at the
/// chain point `p` with `|p|` nearest `r / 2`, for the largest radius.
pub fn straightness_scan(
    law: &WeightLaw,
    radii: &[f64],
    delta: f64,
    replicas_n: usize,
    seed: u64,
) -> Result<Estimate> {
    check_replicas(replicas_n)?;
    check_radii(radii, 4)?;
    if !(delta > 0.0 && delta < 0.25) {
        return Err(Error::config(format!(
            "delta must lie in (0, 1/4), got {delta}"
        )));
    }
    let r_max = *radii.last().unwrap();
    let corner = Point::new(r_max, r_max);
    let rows = replicas(replicas_n, |i| {
        let cloud = sample_cloud(
            Region::square(r_max)?,
            1.0,
            law,
            derive_seed(seed, ARM_MAIN, i),
        )?;
        let field = PassageField::for_box(&cloud, Point::ORIGIN, corner)?;
        let mut devs = Vec::with_capacity(radii.len());
        let mut cone_ok = false;
        for &r in radii {
            let g = field.geodesic_to(&cloud, &Point::new(r, r))?;
            devs.push(transversal_deviation(&g));
            if r == r_max {
                cone_ok = midpoint_cone_contains(&g.chain, corner, delta);
            }
        }
        Ok((devs, cone_ok))
    })?;
    let mean_devs: Vec<f64> = (0..radii.len())
        .map(|j| stats::mean(&rows.iter().map(|r| r.0[j]).collect::<Vec<_>>()))
        .collect();
    let last: Vec<f64> = rows.iter().map(|r| *r.0.last().unwrap()).collect();
    let cone_frac = rows.iter().filter(|r| r.1).count() as f64 / rows.len() as f64;
    let mut report = EstimatorReport::from_samples("straightness", &last)?
        .with("delta", delta)
        .with("wander_exponent", stats::log_log_slope(radii, &mean_devs))
        .with("cone_ok", cone_frac);
    for (j, r) in radii.iter().enumerate() {
        report.set(&format!("mean_dev_r{r}"), mean_devs[j]);
    }
    let mut cols = vec!["replica".to_string()];
    cols.extend(radii.iter().map(|r| format!("dev_r{r}")));
    cols.push("cone_ok".into());
    let mut raw = RawTable {
        columns: cols,
        rows: Vec::new(),
    };
    for (i, (devs, ok)) in rows.iter().enumerate() {
        let mut line = vec![i as f64];
        line.extend(devs);
        line.push(*ok as u8 as f64);
        raw.push(line);
    }
    Ok(Estimate { report, raw })
}

/// Picks the chain point whose norm is closest to `r / 2` for `end = (r, r)`
/// and asks whether `end` lies in `Co(p, |p|^{-δ})`. Fails when the chain is
/// empty or the cone would be wider than π/4.
fn midpoint_cone_contains(
    chain: &[crate::point_process::MarkedPoint],
    end: Point,
    delta: f64,
) -> bool {
    let half = end.x / 2.0;
    let Some(mid) = chain
        .iter()
        .map(|c| c.pos())
        .min_by(|a, b| (a.norm() - half).abs().total_cmp(&(b.norm() - half).abs()))
    else {
        return false;
    };
    match Cone::at(mid, mid.norm().powf(-delta)) {
        Ok(cone) => cone.contains(&end),
        Err(_) => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeResidual {
    pub p: Point,
    pub q: Point,
    pub value: f64,
}

/// `Δ(p, q) = L(p, q) − f(q − p)`.
pub fn shape_residual(
    cloud: &PointCloud,
    f: &ShapeFunction,
    p: Point,
    q: Point,
) -> Result<ShapeResidual> {
    let l = last_passage(cloud, p, q)?;
    Ok(ShapeResidual {
        p,
        q,
        value: l - f.at(&q.sub(&p)),
    })
}

/// Per-replica outcome of a ray study.
#[derive(Clone, Debug)]
struct RayReplica {
    stabilized: Vec<bool>,
    stable_len: Vec<usize>,
    direction_ok: Vec<bool>,
    /// Busemann value per start pair `(i, j)`, `i < j`, in lexicographic order.
    busemann: Vec<Option<f64>>,
    coalescence: Vec<Option<Point>>,
    antisymmetry_violation: bool,
    cocycle: Option<bool>,
    monotone: Option<bool>,
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            v.push((i, j));
        }
    }
    v
}

fn terminal_direction_ok(ray: &RayApproximation) -> bool {
    let Some(last) = ray.longest().chain.last() else {
        return false;
    };
    let d = last.pos().sub(&ray.start);
    (d.t.atan2(d.x) - ray.alpha).abs() <= DIRECTION_TOLERANCE
}

fn ray_replica(
    cloud: &PointCloud,
    starts: &[Point],
    alpha: f64,
    radii: &[f64],
) -> Result<RayReplica> {
    let rays = starts
        .iter()
        .map(|s| approx_alpha_ray(cloud, *s, alpha, radii))
        .collect::<Result<Vec<_>>>()?;
    let mut busemann = Vec::new();
    let mut coalescence = Vec::new();
    let mut antisymmetry_violation = false;
    for (i, j) in pairs(starts.len()) {
        let b = busemann_from_rays(cloud, &rays[i], &rays[j])?;
        let back = busemann_from_rays(cloud, &rays[j], &rays[i])?;
        match (&b, &back) {
            (Some(a), Some(c)) => antisymmetry_violation |= a.value != -c.value,
            (None, None) => {}
            _ => antisymmetry_violation = true,
        }
        coalescence.push(b.map(|s| s.coalescence.pos()));
        busemann.push(b.map(|s| s.value));
    }
    // With three starts (x, y, z): pairs are (x,y), (x,z), (y,z).
    let cocycle = if starts.len() == 3 {
        match (busemann[0], busemann[1], busemann[2]) {
            (Some(xy), Some(xz), Some(yz)) => Some(xz == xy + yz),
            _ => None,
        }
    } else {
        None
    };
    // z sits between x and y: its ray should meet x's ray no later than y's does.
    let monotone = if starts.len() == 3 {
        match (
            coalescence_point(&rays[0], &rays[1])?,
            coalescence_point(&rays[0], &rays[2])?,
        ) {
            (Some(cxy), Some(cxz)) => Some(cxz.x <= cxy.x),
            _ => None,
        }
    } else {
        None
    };
    Ok(RayReplica {
        stabilized: rays.iter().map(|r| r.stabilized).collect(),
        stable_len: rays.iter().map(|r| r.stable_prefix.len()).collect(),
        direction_ok: rays.iter().map(terminal_direction_ok).collect(),
        busemann,
        coalescence,
        antisymmetry_violation,
        cocycle,
        monotone,
    })
}

/// Rays from every start in direction `alpha`, on a cloud sized by
/// [`ray_region`]. A replica counts as stabilized when the rays from the
/// first two starts (or the only start) stabilize; coalescence is reported for
/// the first pair among stabilized replicas. With three starts the cocycle
/// identity `B(x,z) = B(x,y) + B(y,z)` is checked wherever all pairs coalesce.
pub fn ray_study(
    law: &WeightLaw,
    alpha: f64,
    starts: &[Point],
    radii: &[f64],
    replicas_n: usize,
    seed: u64,
) -> Result<Estimate> {
    check_replicas(replicas_n)?;
    if starts.is_empty() || starts.len() > 3 {
        return Err(Error::config(format!(
            "ray study takes 1 to 3 starts, got {}",
            starts.len()
        )));
    }
    let region = ray_region(starts, radii)?;
    let rows = replicas(replicas_n, |i| {
        let cloud = sample_cloud(region, 1.0, law, derive_seed(seed, ARM_MAIN, i))?;
        ray_replica(&cloud, starts, alpha, radii)
    })?;

    let lead = starts.len().min(2);
    let stabilized: Vec<bool> = rows
        .iter()
        .map(|r| r.stabilized[..lead].iter().all(|s| *s))
        .collect();
    let n_stable = stabilized.iter().filter(|s| **s).count();
    let stable_frac = n_stable as f64 / rows.len() as f64;

    let name = match starts.len() {
        1 => "rays",
        2 => "coalesce",
        _ => "busemann",
    };
    let lens: Vec<f64> = rows.iter().map(|r| r.stable_len[0] as f64).collect();
    let per_ray = rows
        .iter()
        .map(|r| r.stabilized.iter().filter(|s| **s).count())
        .sum::<usize>() as f64
        / (rows.len() * starts.len()) as f64;
    let mut report = EstimatorReport::from_samples(name, &lens)?
        .with("alpha", alpha)
        .with("stabilized_fraction", stable_frac)
        .with("ray_stabilized_fraction", per_ray);

    let mut dir_total = 0usize;
    let mut dir_ok = 0usize;
    for r in &rows {
        for (s, ok) in r.stabilized.iter().zip(&r.direction_ok) {
            if *s {
                dir_total += 1;
                dir_ok += *ok as usize;
            }
        }
    }
    report.set(
        "direction_ok_fraction",
        dir_ok as f64 / dir_total.max(1) as f64,
    );

    if starts.len() >= 2 {
        let coalesced = rows
            .iter()
            .zip(&stabilized)
            .filter(|(r, s)| **s && r.busemann[0].is_some())
            .count();
        report.set(
            "coalesced_fraction",
            coalesced as f64 / n_stable.max(1) as f64,
        );
        let values: Vec<f64> = rows.iter().filter_map(|r| r.busemann[0]).collect();
        report.set("busemann_mean", stats::mean(&values));
        report.set(
            "antisymmetry_violations",
            rows.iter().filter(|r| r.antisymmetry_violation).count() as f64,
        );
    }
    if starts.len() == 3 {
        let checked: Vec<bool> = rows.iter().filter_map(|r| r.cocycle).collect();
        report.set("cocycle_checked", checked.len() as f64);
        report.set(
            "cocycle_violations",
            checked.iter().filter(|ok| !**ok).count() as f64,
        );
        let mono: Vec<bool> = rows.iter().filter_map(|r| r.monotone).collect();
        report.set("monotone_checked", mono.len() as f64);
        report.set("monotone_ok", mono.iter().filter(|ok| **ok).count() as f64);
    }

    let mut cols = vec!["replica".to_string()];
    for k in 0..starts.len() {
        cols.push(format!("stabilized_{k}"));
        cols.push(format!("stable_len_{k}"));
        cols.push(format!("direction_ok_{k}"));
    }
    for (i, j) in pairs(starts.len()) {
        cols.push(format!("busemann_{i}{j}"));
        cols.push(format!("coalescence_x_{i}{j}"));
        cols.push(format!("coalescence_t_{i}{j}"));
    }
    let mut raw = RawTable {
        columns: cols,
        rows: Vec::new(),
    };
    for (i, r) in rows.iter().enumerate() {
        let mut line = vec![i as f64];
        for k in 0..starts.len() {
            line.push(r.stabilized[k] as u8 as f64);
            line.push(r.stable_len[k] as f64);
            line.push(r.direction_ok[k] as u8 as f64);
        }
        for (b, c) in r.busemann.iter().zip(&r.coalescence) {
            line.push(b.unwrap_or(f64::NAN));
            line.push(c.map_or(f64::NAN, |p| p.x));
            line.push(c.map_or(f64::NAN, |p| p.t));
        }
        raw.push(line);
    }
    Ok(Estimate { report, raw })
}
