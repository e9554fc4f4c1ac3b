//! Cross-check of the solver against exhaustive enumeration on small clouds.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lpp::{brute_force_last_passage, geodesic, last_passage, BRUTE_FORCE_CAP};
use crate::point_process::{derive_seed, sample_cloud, MarkedPoint, Point, PointCloud, Region};
use crate::report::{Estimate, EstimatorReport, RawTable};
use crate::weight_laws::WeightLaw;

const SIDE: f64 = 6.0;

/// The weight laws cycled through by the suite.
pub fn oracle_laws() -> Vec<WeightLaw> {
    vec![
        WeightLaw::classical(),
        WeightLaw::bernoulli(0.5).unwrap(),
        WeightLaw::exponential(1.0).unwrap(),
        WeightLaw::uniform(0.5, 1.5).unwrap(),
        WeightLaw::empirical(vec![0.0, 1.0, 2.0, 3.0]).unwrap(),
    ]
}

/// `h(x) = max({t_i : x_i ≤ x} ∪ {floor})`, evaluated at every `x` in `xs`.
fn staircase(chain: &[MarkedPoint], floor: f64, xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            chain
                .iter()
                .filter(|c| c.x <= x)
                .map(|c| c.t)
                .fold(floor, f64::max)
        })
        .collect()
}

/// Whether the staircase of `a` lies weakly below that of `b` everywhere.
pub fn staircase_below(a: &[MarkedPoint], b: &[MarkedPoint], floor: f64) -> bool {
    let xs: Vec<f64> = a.iter().chain(b).map(|c| c.x).collect();
    staircase(a, floor, &xs)
        .iter()
        .zip(staircase(b, floor, &xs))
        .all(|(ha, hb)| *ha <= hb)
}

/// A cloud with at most `max_points` points: continuous coordinates for even
/// `k`, coordinates on the integer grid `{1, …, 5}²` (so ties in `x` and `t`
/// are common) for odd `k`.
pub fn small_cloud(k: u64, max_points: usize, law: &WeightLaw, seed: u64) -> Result<PointCloud> {
    let region = Region::square(SIDE)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=max_points);
    if k.is_multiple_of(2) {
        let cloud = sample_cloud(region, 1.0, law, seed)?;
        let mut pts = cloud.points().to_vec();
        pts.shuffle(&mut rng);
        pts.truncate(n);
        return PointCloud::from_points(region, pts, seed);
    }
    let mut cells: Vec<(u32, u32)> = (1..=5).flat_map(|x| (1..=5).map(move |t| (x, t))).collect();
    cells.shuffle(&mut rng);
    let pts = cells[..n.min(cells.len())]
        .iter()
        .map(|&(x, t)| MarkedPoint::new(x as f64, t as f64, law.sample(&mut rng)))
        .collect();
    PointCloud::from_points(region, pts, seed)
}

/// Runs the solver and the brute-force oracle on `clouds` random clouds, each
/// queried on the full square and on a random sub-box. A query counts as a
/// mismatch unless the values agree bit for bit, the emitted geodesic is one
/// of the oracle's optimal chains, and its staircase is below all of them.
pub fn oracle_suite(clouds: usize, max_points: usize, seed: u64) -> Result<Estimate> {
    if clouds < 2 {
        return Err(Error::config(format!(
            "oracle suite needs at least 2 clouds, got {clouds}"
        )));
    }
    if max_points > BRUTE_FORCE_CAP {
        return Err(Error::config(format!(
            "max_points must be <= {BRUTE_FORCE_CAP}, got {max_points}"
        )));
    }
    let laws = oracle_laws();
    let mut raw = RawTable::new(&[
        "cloud",
        "query",
        "points",
        "value",
        "oracle_value",
        "mismatch",
    ]);
    let mut values = Vec::with_capacity(clouds);
    let mut mismatches = 0usize;
    for k in 0..clouds as u64 {
        let law = &laws[k as usize % laws.len()];
        let cloud = small_cloud(k, max_points, law, derive_seed(seed, 0, k))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1, k));
        let lo = Point::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let hi = Point::new(rng.random_range(3.0..SIDE), rng.random_range(3.0..SIDE));
        for (query, (p, q)) in [(Point::ORIGIN, Point::new(SIDE, SIDE)), (lo, hi)]
            .into_iter()
            .enumerate()
        {
            let value = last_passage(&cloud, p, q)?;
            let g = geodesic(&cloud, p, q)?;
            let (best, optimal) = brute_force_last_passage(&cloud, p, q)?;
            let ok = value.to_bits() == best.to_bits()
                && g.value.to_bits() == best.to_bits()
                && optimal.contains(&g.chain)
                && optimal.iter().all(|o| staircase_below(&g.chain, o, p.t));
            mismatches += !ok as usize;
            raw.push(vec![
                k as f64,
                query as f64,
                cloud.len() as f64,
                value,
                best,
                !ok as u8 as f64,
            ]);
            if query == 0 {
                values.push(value);
            }
        }
    }
    let report = EstimatorReport::from_samples("oracle-suite", &values)?
        .with("clouds", clouds as f64)
        .with("max_points", max_points as f64)
        .with("mismatches", mismatches as f64);
    Ok(Estimate { report, raw })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staircase_order() {
        let low = [MarkedPoint::new(2.0, 1.0, 1.0)];
        let high = [MarkedPoint::new(1.0, 2.0, 1.0)];
        assert!(staircase_below(&low, &high, 0.0));
        assert!(!staircase_below(&high, &low, 0.0));
        assert!(staircase_below(&[], &low, 0.0));
    }

    #[test]
    fn small_clouds_respect_size() {
        let law = WeightLaw::classical();
        for k in 0..50 {
            let c = small_cloud(k, 10, &law, k).unwrap();
            assert!(c.len() <= 10);
        }
    }

    #[test]
    fn short_suite_is_clean() {
        let e = oracle_suite(100, 10, 5).unwrap();
        assert_eq!(e.report.get("mismatches"), 0.0);
        assert_eq!(e.raw.rows.len(), 200);
    }
}
