//! Exact last-passage values and lowest geodesics.
//!
//! For a source `p` the passage value of a cloud point `q' > p` is
//!
//! ```text
//! value(q') = w(q') + max { value(q'') : p < q'' < q' }     (max ∅ = 0)
//! ```
//!
//! with `<` strict in both coordinates. Sweeping the points in `x` order and
//! keeping a prefix-maximum Fenwick tree over the ranks of `t` evaluates the
//! recursion in `O(n log n)`. Exact ties between equal maxima are resolved
//! towards the lowest attainer (smallest `t`, then largest `x`), and an empty
//! prefix beats any prefix of value 0. Following the predecessors from the
//! lowest optimal endpoint therefore traces the lowest geodesic.
//!
//! All comparisons are exact floating-point comparisons: every value is the
//! left fold `((w1 + w2) + …)` along one chain, so the same chain always
//! produces the same bits.

use crate::error::{Error, Result};
use crate::point_process::{MarkedPoint, Point, PointCloud};

const NONE: u32 = u32::MAX;

/// Largest order interval [`brute_force_last_passage`] accepts.
pub const BRUTE_FORCE_CAP: usize = 20;

#[derive(Clone, Copy, Debug)]
struct Entry {
    value: f64,
    rank: u32,
    local: u32,
}

impl Entry {
    const EMPTY: Entry = Entry {
        value: f64::NEG_INFINITY,
        rank: u32::MAX,
        local: NONE,
    };

    fn better(&self, other: &Entry) -> bool {
        self.value > other.value
            || (self.value == other.value
                && (self.rank < other.rank
                    || (self.rank == other.rank && self.local > other.local)))
    }
}

/// Fenwick tree answering "best entry among ranks `< r`".
struct PrefixBest {
    tree: Vec<Entry>,
}

impl PrefixBest {
    fn new(n: usize) -> Self {
        PrefixBest {
            tree: vec![Entry::EMPTY; n + 1],
        }
    }

    fn query_below(&self, rank: usize) -> Entry {
        let mut best = Entry::EMPTY;
        let mut i = rank;
        while i > 0 {
            let e = &self.tree[i];
            if e.better(&best) {
                best = *e;
            }
            i &= i - 1;
        }
        best
    }

    fn update(&mut self, rank: usize, entry: Entry) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            if entry.better(&self.tree[i]) {
                self.tree[i] = entry;
            }
            i += i & i.wrapping_neg();
        }
    }
}

/// Passage values from a fixed source to the cloud points above it.
#[derive(Clone, Debug)]
pub struct PassageField {
    source: Point,
    bound: Option<Point>,
    /// Cloud indices covered by the field, ascending.
    members: Vec<u32>,
    values: Vec<f64>,
    /// Local position of the predecessor, or `NONE`.
    preds: Vec<u32>,
}

impl PassageField {
    /// Field over the points `q'` with `source < q'` and, when `bound` is set,
    /// `q' ≤ bound`. With `skip_zero`, zero-weight points are left out: they
    /// never change a value and never lie on a lowest geodesic.
    fn build(cloud: &PointCloud, source: Point, bound: Option<Point>, skip_zero: bool) -> Self {
        let pts = cloud.points();
        let hi_x = bound.map_or(f64::INFINITY, |b| b.x);
        let hi_t = bound.map_or(f64::INFINITY, |b| b.t);
        let members: Vec<u32> = cloud
            .x_range(source.x, hi_x)
            .filter(|&i| {
                let p = &pts[i];
                p.x > source.x && p.t > source.t && p.t <= hi_t && !(skip_zero && p.w == 0.0)
            })
            .map(|i| i as u32)
            .collect();
        let m = members.len();

        let ranks = t_ranks(pts, &members);
        let mut fenwick = PrefixBest::new(m);
        let mut values = vec![0.0; m];
        let mut preds = vec![NONE; m];

        let mut start = 0;
        while start < m {
            let x = pts[members[start] as usize].x;
            let mut end = start;
            while end < m && pts[members[end] as usize].x == x {
                end += 1;
            }
            // Points sharing an abscissa are mutually incomparable: query all
            // of them before any update.
            for k in start..end {
                let best = fenwick.query_below(ranks[k] as usize);
                let w = pts[members[k] as usize].w;
                if best.local != NONE && best.value > 0.0 {
                    values[k] = w + best.value;
                    preds[k] = best.local;
                } else {
                    values[k] = w + 0.0;
                }
            }
            for k in start..end {
                fenwick.update(
                    ranks[k] as usize,
                    Entry {
                        value: values[k],
                        rank: ranks[k],
                        local: k as u32,
                    },
                );
            }
            start = end;
        }

        PassageField {
            source,
            bound,
            members,
            values,
            preds,
        }
    }

    /// Field restricted to the box `source < q' ≤ bound`, without the
    /// zero-weight points. Enough for every geodesic ending inside the box.
    pub fn for_box(cloud: &PointCloud, source: Point, bound: Point) -> Result<Self> {
        check_order(&source, &bound)?;
        Ok(PassageField::build(cloud, source, Some(bound), true))
    }

    pub fn source(&self) -> Point {
        self.source
    }

    fn local(&self, cloud_index: usize) -> Option<usize> {
        self.members.binary_search(&(cloud_index as u32)).ok()
    }

    /// `L(source, q')` including the weight of `q'`, or `None` if the point
    /// is not strictly above the source.
    pub fn value(&self, cloud_index: usize) -> Option<f64> {
        self.local(cloud_index).map(|k| self.values[k])
    }

    /// Cloud index of the optimal predecessor.
    pub fn predecessor(&self, cloud_index: usize) -> Option<usize> {
        let k = self.local(cloud_index)?;
        let p = self.preds[k];
        (p != NONE).then(|| self.members[p as usize] as usize)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `(cloud index, value, predecessor cloud index)` in cloud order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, f64, Option<usize>)> + '_ {
        (0..self.members.len()).map(move |k| {
            let p = self.preds[k];
            (
                self.members[k] as usize,
                self.values[k],
                (p != NONE).then(|| self.members[p as usize] as usize),
            )
        })
    }

    /// Lowest optimal endpoint among members `≤ q`, as a local position.
    fn best_endpoint(&self, cloud: &PointCloud, q: &Point) -> Option<usize> {
        let pts = cloud.points();
        let end = self.members.partition_point(|&i| pts[i as usize].x <= q.x);
        let mut best: Option<usize> = None;
        for k in 0..end {
            let p = &pts[self.members[k] as usize];
            if p.t > q.t {
                continue;
            }
            let v = self.values[k];
            best = match best {
                None => Some(k),
                Some(b) => {
                    let bv = self.values[b];
                    let bp = &pts[self.members[b] as usize];
                    if v > bv || (v == bv && (p.t < bp.t || (p.t == bp.t && p.x > bp.x))) {
                        Some(k)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        best.filter(|&k| self.values[k] > 0.0)
    }

    fn check_target(&self, q: &Point) -> Result<()> {
        check_order(&self.source, q)?;
        if let Some(b) = self.bound {
            if !q.leq(&b) {
                return Err(Error::query(format!(
                    "target ({}, {}) lies outside the field box up to ({}, {})",
                    q.x, q.t, b.x, b.t
                )));
            }
        }
        Ok(())
    }

    /// `L(source, q)`.
    pub fn last_passage_to(&self, cloud: &PointCloud, q: &Point) -> Result<f64> {
        self.check_target(q)?;
        Ok(self.best_endpoint(cloud, q).map_or(0.0, |k| self.values[k]))
    }

    /// Lowest geodesic from the source to `q`.
    pub fn geodesic_to(&self, cloud: &PointCloud, q: &Point) -> Result<Geodesic> {
        self.check_target(q)?;
        let pts = cloud.points();
        let mut indices = Vec::new();
        let mut value = 0.0;
        if let Some(last) = self.best_endpoint(cloud, q) {
            value = self.values[last];
            let mut k = last as u32;
            while k != NONE {
                indices.push(self.members[k as usize] as usize);
                k = self.preds[k as usize];
            }
            indices.reverse();
        }
        Ok(Geodesic {
            start: self.source,
            end: *q,
            chain: indices.iter().map(|&i| pts[i]).collect(),
            indices,
            value,
        })
    }
}

/// Dense ranks of `t` over the member points (equal `t` share a rank).
fn t_ranks(pts: &[MarkedPoint], members: &[u32]) -> Vec<u32> {
    let mut order: Vec<(f64, u32)> = members
        .iter()
        .enumerate()
        .map(|(k, &i)| (pts[i as usize].t, k as u32))
        .collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut ranks = vec![0u32; members.len()];
    let mut rank = 0u32;
    for j in 0..order.len() {
        if j > 0 && order[j].0 != order[j - 1].0 {
            rank += 1;
        }
        ranks[order[j].1 as usize] = rank;
    }
    ranks
}

fn check_order(p: &Point, q: &Point) -> Result<()> {
    if !(p.x.is_finite() && p.t.is_finite() && q.x.is_finite() && q.t.is_finite()) {
        return Err(Error::query("non-finite endpoint"));
    }
    if !p.leq(q) {
        return Err(Error::query(format!(
            "endpoints not ordered: ({}, {}) is not <= ({}, {})",
            p.x, p.t, q.x, q.t
        )));
    }
    Ok(())
}

/// An optimal up-right chain between two corners.
#[derive(Clone, Debug, PartialEq)]
pub struct Geodesic {
    pub start: Point,
    pub end: Point,
    pub chain: Vec<MarkedPoint>,
    /// Cloud indices of the chain points.
    pub indices: Vec<usize>,
    pub value: f64,
}

impl Geodesic {
    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }
}

/// Passage values from `source` to every cloud point strictly above it.
pub fn passage_field(cloud: &PointCloud, source: Point) -> PassageField {
    PassageField::build(cloud, source, None, false)
}

/// `L(p, q)`: the heaviest up-right chain of cloud points `q'` with
/// `p < q' ≤ q`.
pub fn last_passage(cloud: &PointCloud, p: Point, q: Point) -> Result<f64> {
    check_order(&p, &q)?;
    let pts = cloud.points();
    let members: Vec<u32> = cloud
        .x_range(p.x, q.x)
        .filter(|&i| {
            let c = &pts[i];
            c.x > p.x && c.t > p.t && c.t <= q.t && c.w > 0.0
        })
        .map(|i| i as u32)
        .collect();
    if members.is_empty() {
        return Ok(0.0);
    }
    let w0 = pts[members[0] as usize].w;
    if members.iter().all(|&i| pts[i as usize].w == w0) {
        let k = longest_chain_len(pts, &members);
        // Same left fold the general recursion performs.
        return Ok((0..k).fold(0.0, |acc, _| w0 + acc));
    }
    let field = PassageField::build(cloud, p, Some(q), true);
    Ok(field.values.iter().copied().fold(0.0, f64::max))
}

/// Longest strictly increasing chain among `members` (already in `x` order),
/// by patience sorting on `t`.
fn longest_chain_len(pts: &[MarkedPoint], members: &[u32]) -> usize {
    let mut tails: Vec<f64> = Vec::new();
    let mut group: Vec<(usize, f64)> = Vec::new();
    let mut start = 0;
    while start < members.len() {
        let x = pts[members[start] as usize].x;
        group.clear();
        let mut end = start;
        while end < members.len() && pts[members[end] as usize].x == x {
            let t = pts[members[end] as usize].t;
            group.push((tails.partition_point(|&v| v < t), t));
            end += 1;
        }
        for &(pos, t) in &group {
            if pos == tails.len() {
                tails.push(t);
            } else if t < tails[pos] {
                tails[pos] = t;
            }
        }
        start = end;
    }
    tails.len()
}

/// Lowest geodesic `ϖ(p, q)`.
pub fn geodesic(cloud: &PointCloud, p: Point, q: Point) -> Result<Geodesic> {
    PassageField::for_box(cloud, p, q)?.geodesic_to(cloud, &q)
}

/// Exhaustive maximisation over all chains in the order interval; returns the
/// optimal value and every chain attaining it. Test oracle only.
pub fn brute_force_last_passage(
    cloud: &PointCloud,
    p: Point,
    q: Point,
) -> Result<(f64, Vec<Vec<MarkedPoint>>)> {
    check_order(&p, &q)?;
    let inside: Vec<MarkedPoint> = cloud
        .points()
        .iter()
        .filter(|c| p.lt(&c.pos()) && c.pos().leq(&q))
        .copied()
        .collect();
    if inside.len() > BRUTE_FORCE_CAP {
        return Err(Error::TooLarge {
            points: inside.len(),
            cap: BRUTE_FORCE_CAP,
        });
    }
    let mut best = 0.0;
    let mut optimal: Vec<Vec<MarkedPoint>> = vec![Vec::new()];
    let mut stack = Vec::new();
    extend_chains(&inside, 0, 0.0, &mut stack, &mut best, &mut optimal);
    Ok((best, optimal))
}

fn extend_chains(
    pts: &[MarkedPoint],
    from: usize,
    acc: f64,
    stack: &mut Vec<MarkedPoint>,
    best: &mut f64,
    optimal: &mut Vec<Vec<MarkedPoint>>,
) {
    for i in from..pts.len() {
        let c = pts[i];
        if let Some(last) = stack.last() {
            if !last.pos().lt(&c.pos()) {
                continue;
            }
        }
        let value = acc + c.w;
        stack.push(c);
        if value > *best {
            *best = value;
            optimal.clear();
        }
        if value == *best {
            optimal.push(stack.clone());
        }
        extend_chains(pts, i + 1, value, stack, best, optimal);
        stack.pop();
    }
}

/// Whether `p` lies on the lowest geodesic from the origin to `q`. A point
/// that ends its own geodesic counts as lying on it.
pub fn r_out_member(cloud: &PointCloud, p: &MarkedPoint, q: Point) -> Result<bool> {
    if !p.pos().leq(&q) {
        return Err(Error::query("r_out_member needs q >= p"));
    }
    let g = geodesic(cloud, Point::ORIGIN, q)?;
    Ok(g.chain.iter().any(|c| c.x == p.x && c.t == p.t))
}
