//! Sample archive and empirical integration weights.
//!
//! Every iteration of a CSG method appends one record `(u_k, x_k, j_k, g_k)`.
//! To estimate `J` and `grad J` at a point `u`, each stored parameter sample
//! `x_i` votes for the record `m` minimizing `||u - u_m|| + ||x_i - x_m||`
//! (ties to the lowest index); the weight of a record is its share of the votes.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::kdtree::KdTree;
use crate::linalg;
use crate::problem::{DesignPoint, ParameterSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub u: DesignPoint,
    pub x: ParameterSample,
    /// `j(u, x)`
    pub j: f64,
    /// `grad_u j(u, x)`
    pub g: Vec<f64>,
}

/// Convex-combination weights over the history.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Builds weights from vote counts. Counts must sum to a positive total.
    pub fn from_counts(counts: &[u32]) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if total == 0 {
            return invalid("weight counts sum to zero");
        }
        let n = total as f64;
        Ok(WeightVector(counts.iter().map(|&c| c as f64 / n).collect()))
    }

    /// Normalizes arbitrary nonnegative weights to sum to one.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return invalid("weights must be finite and nonnegative");
        }
        let s: f64 = raw.iter().sum();
        if s <= 0.0 {
            return invalid("weights sum to zero");
        }
        Ok(WeightVector(raw.into_iter().map(|a| a / s).collect()))
    }

    pub fn alphas(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weighted estimate of the objective and gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateEstimate {
    pub j_hat: f64,
    pub g_hat: Vec<f64>,
}

/// Sparse table answering "position of a minimum in `vals[l..=r]`" in O(1).
struct ArgminTable<'a> {
    vals: &'a [f64],
    levels: Vec<Vec<u32>>,
}

impl<'a> ArgminTable<'a> {
    fn new(vals: &'a [f64]) -> Self {
        let n = vals.len();
        let mut levels = vec![(0..n as u32).collect::<Vec<u32>>()];
        let mut w = 1;
        while 2 * w <= n {
            let prev = levels.last().unwrap();
            let next = (0..=n - 2 * w)
                .map(|i| Self::pick(vals, prev[i], prev[i + w]))
                .collect();
            levels.push(next);
            w *= 2;
        }
        ArgminTable { vals, levels }
    }

    #[inline]
    fn pick(vals: &[f64], i: u32, j: u32) -> u32 {
        if vals[j as usize] < vals[i as usize] {
            j
        } else {
            i
        }
    }

    #[inline]
    fn argmin(&self, l: usize, r: usize) -> usize {
        let k = (usize::BITS - 1 - (r - l + 1).leading_zeros()) as usize;
        let lv = &self.levels[k];
        Self::pick(self.vals, lv[l], lv[r + 1 - (1 << k)]) as usize
    }
}

/// Append-only archive of every sample drawn so far.
#[derive(Debug, Clone)]
pub struct SampleHistory {
    dim_design: usize,
    dim_param: usize,
    records: Vec<SampleRecord>,
    // design coordinates, flattened in record order
    us: Vec<f64>,
    // parameter samples, flattened in record order
    xs: Vec<f64>,

    // scalar samples sorted by (x, index), with the record index at each position
    sorted_keys: Vec<f64>,
    sorted_idx: Vec<u32>,

}

impl SampleHistory {
    pub fn new(dim_design: usize, dim_param: usize) -> Self {
        Self::with_capacity(dim_design, dim_param, 0)
    }

    pub fn with_capacity(dim_design: usize, dim_param: usize, cap: usize) -> Self {
        SampleHistory {
            dim_design,
            dim_param,
            records: Vec::with_capacity(cap),
            us: Vec::with_capacity(cap * dim_design),
            sorted_keys: Vec::with_capacity(cap),
            xs: Vec::with_capacity(cap * dim_param),
            sorted_idx: Vec::with_capacity(cap),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn dim_design(&self) -> usize {
        self.dim_design
    }

    pub fn dim_param(&self) -> usize {
        self.dim_param
    }

    pub fn push(&mut self, rec: SampleRecord) -> Result<()> {
        check_dim(self.dim_design, rec.u.dim())?;
        check_dim(self.dim_param, rec.x.dim())?;
        check_dim(self.dim_design, rec.g.len())?;
        if !rec.j.is_finite() || !linalg::all_finite(&rec.g) {
            return invalid("sample record holds non-finite values");
        }
        if !linalg::all_finite(rec.u.coords()) || !linalg::all_finite(rec.x.coords()) {
            return invalid("sample record holds non-finite coordinates");
        }
        self.us.extend_from_slice(rec.u.coords());
        self.xs.extend_from_slice(rec.x.coords());

        if self.dim_param == 1 {
            let idx = self.records.len() as u32;
            let key = rec.x.coords()[0];
            // new index is the largest, so it goes after every equal key
            let pos = self.sorted_keys.partition_point(|&k| k <= key);
            self.sorted_keys.insert(pos, key);
            self.sorted_idx.insert(pos, idx);
        }
        self.records.push(rec);
        Ok(())
    }

    fn design_distances(&self, u: &DesignPoint) -> Result<Vec<f64>> {
        if self.records.is_empty() {
            return invalid("empirical weights need a nonempty history");
        }
        check_dim(self.dim_design, u.dim())?;
        Ok(self
            .us
            .chunks_exact(self.dim_design)
            .map(|um| linalg::dist(u.coords(), um))
            .collect())
    }

    /// Vote counts per record, by exhaustive O(n^2) scan. This is the
    /// reference definition; [`SampleHistory::votes`] must agree with it exactly.
    pub fn votes_exhaustive(&self, u: &DesignPoint) -> Result<Vec<u32>> {
        let du = self.design_distances(u)?;
        let mut counts = vec![0u32; self.records.len()];
        for ri in &self.records {
            let xi = ri.x.coords();
            let mut best = f64::INFINITY;
            let mut arg = 0usize;
            for (m, rm) in self.records.iter().enumerate() {
                let v = du[m] + linalg::dist(xi, rm.x.coords());
                if v < best {
                    best = v;
                    arg = m;
                }
            }
            counts[arg] += 1;
        }
        Ok(counts)
    }

    /// Vote counts per record. Scalar samples use a sorted sweep, vector
    /// samples a k-d tree search; both only skip records whose cost provably
    /// exceeds the best one found, so the result is identical to the
    /// exhaustive scan, ties included.
    pub fn votes(&self, u: &DesignPoint) -> Result<Vec<u32>> {
        let du = self.design_distances(u)?;
        if self.dim_param == 1 {
            let dus: Vec<f64> = self.sorted_idx.iter().map(|&m| du[m as usize]).collect();
            Ok(self.votes_1d(&dus))
        } else {
            Ok(KdTree::build(&self.xs, &du, self.dim_param).votes())
        }
    }

    /// One-dimensional samples: for `q` left of `p` the cost is
    /// `(du_q - x_q) + x_p`, and `(du_q + x_q) - x_p` on the right, so prefix
    /// and suffix minima give a near-optimal value `v` for every sample in
    /// O(1). Range-minimum queries then enumerate every record whose cost can
    /// be within rounding of `v`, and only those are compared exactly.
    fn votes_1d(&self, dus: &[f64]) -> Vec<u32> {
        let n = dus.len();
        let keys = &self.sorted_keys;
        let idx = &self.sorted_idx;
        let a: Vec<f64> = dus.iter().zip(keys).map(|(d, k)| d - k).collect();
        let b: Vec<f64> = dus.iter().zip(keys).map(|(d, k)| d + k).collect();
        let ta = ArgminTable::new(&a);
        let tb = ArgminTable::new(&b);
        let mut pre = vec![0u32; n];
        for p in 1..n {
            let m = pre[p - 1] as usize;
            pre[p] = if a[p] < a[m] { p as u32 } else { m as u32 };
        }
        let mut suf = vec![(n - 1) as u32; n];
        for p in (0..n - 1).rev() {
            let m = suf[p + 1] as usize;
            suf[p] = if b[p] < b[m] { p as u32 } else { m as u32 };
        }
        let kmax = keys.iter().fold(0.0f64, |m, k| m.max(k.abs()));
        let dmax = dus.iter().copied().fold(0.0f64, f64::max);

        let cost = |p: usize, q: usize| dus[q] + (keys[p] - keys[q]).abs();
        let better = |v: f64, m: u32, bv: f64, bm: u32| v < bv || (v == bv && m < bm);
        let mut counts = vec![0u32; n];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for p in 0..n {
            let (ql, qr) = (pre[p] as usize, suf[p] as usize);
            let (mut bv, mut bm) = (cost(p, ql), idx[ql]);
            let vr = cost(p, qr);
            if better(vr, idx[qr], bv, bm) {
                bv = vr;
                bm = idx[qr];
            }
            // generous bound on the rounding gap between the split and the
            // direct form of the cost
            let slack = 16.0 * f64::EPSILON * (bv + 2.0 * kmax + dmax);
            for (table, vals, thr, lo, hi) in [
                (&ta, &a, bv - keys[p] + slack, 0, p),
                (&tb, &b, bv + keys[p] + slack, p, n - 1),
            ] {
                stack.clear();
                stack.push((lo, hi));
                while let Some((l, r)) = stack.pop() {
                    let q = table.argmin(l, r);
                    if vals[q] > thr {
                        continue;
                    }
                    let v = cost(p, q);
                    if better(v, idx[q], bv, bm) {
                        bv = v;
                        bm = idx[q];
                    }
                    if q > l {
                        stack.push((l, q - 1));
                    }
                    if q < r {
                        stack.push((q + 1, r));
                    }
                }
            }
            counts[bm as usize] += 1;
        }
        counts
    }

    /// Empirical weights of every record with respect to the design point `u`.
    pub fn empirical_weights(&self, u: &DesignPoint) -> Result<WeightVector> {
        WeightVector::from_counts(&self.votes(u)?)
    }

    /// `(sum_k alpha_k j_k, sum_k alpha_k g_k)`
    pub fn aggregate(&self, w: &WeightVector) -> Result<AggregateEstimate> {
        check_dim(self.records.len(), w.len())?;
        let mut j_hat = 0.0;
        let mut g_hat = vec![0.0; self.dim_design];
        for (a, r) in w.alphas().iter().zip(&self.records) {
            if *a == 0.0 {
                continue;
            }
            j_hat += a * r.j;
            for (acc, gi) in g_hat.iter_mut().zip(&r.g) {
                *acc += a * gi;
            }
        }
        Ok(AggregateEstimate { j_hat, g_hat })
    }

    /// Objective and gradient estimates at an arbitrary point `u`, using
    /// weights computed with respect to `u` over all stored records.
    pub fn estimate_at(&self, u: &DesignPoint) -> Result<AggregateEstimate> {
        let w = self.empirical_weights(u)?;
        self.aggregate(&w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(u: &[f64], x: &[f64], j: f64, g: &[f64]) -> SampleRecord {
        SampleRecord {
            u: DesignPoint::new(u.to_vec()),
            x: ParameterSample::new(x.to_vec()),
            j,
            g: g.to_vec(),
        }
    }

    fn history(recs: Vec<SampleRecord>) -> SampleHistory {
        let du = recs[0].u.dim();
        let dr = recs[0].x.dim();
        let mut h = SampleHistory::new(du, dr);
        for r in recs {
            h.push(r).unwrap();
        }
        h
    }

    fn u(c: &[f64]) -> DesignPoint {
        DesignPoint::new(c.to_vec())
    }

    #[test]
    fn single_record_takes_all_mass() {
        let h = history(vec![rec(&[0.2], &[0.1], 1.0, &[0.1])]);
        assert_eq!(h.empirical_weights(&u(&[-0.3])).unwrap().alphas(), &[1.0]);
    }

    #[test]
    fn two_samples_split_votes() {
        let h = history(vec![
            rec(&[0.0], &[-0.4], 0.0, &[0.0]),
            rec(&[0.0], &[0.4], 0.0, &[0.0]),
        ]);
        assert_eq!(h.empirical_weights(&u(&[0.0])).unwrap().alphas(), &[0.5, 0.5]);
        assert_eq!(h.votes_exhaustive(&u(&[0.0])).unwrap(), vec![1, 1]);
    }

    #[test]
    fn design_distance_dominates_duplicate_samples() {
        let h = history(vec![
            rec(&[0.0], &[0.0], 0.0, &[0.0]),
            rec(&[1.0], &[0.0], 0.0, &[0.0]),
        ]);
        assert_eq!(h.empirical_weights(&u(&[0.0])).unwrap().alphas(), &[1.0, 0.0]);
        // from the other end, record 2 collects everything
        assert_eq!(h.empirical_weights(&u(&[1.0])).unwrap().alphas(), &[0.0, 1.0]);
    }

    #[test]
    fn exact_ties_go_to_lowest_index() {
        // identical records: every sample sees a tie between records 0 and 1
        let h = history(vec![
            rec(&[0.0], &[0.5], 0.0, &[0.0]),
            rec(&[0.0], &[0.5], 0.0, &[0.0]),
            rec(&[0.0], &[0.5], 0.0, &[0.0]),
        ]);
        assert_eq!(h.votes(&u(&[0.0])).unwrap(), vec![3, 0, 0]);
        assert_eq!(h.votes_exhaustive(&u(&[0.0])).unwrap(), vec![3, 0, 0]);
    }

    #[test]
    fn empty_history_is_rejected() {
        let h = SampleHistory::new(1, 1);
        assert!(h.empirical_weights(&u(&[0.0])).is_err());
        assert!(h.estimate_at(&u(&[0.0])).is_err());
    }

    #[test]
    fn push_validates_records() {
        let mut h = SampleHistory::new(2, 1);
        assert!(h.push(rec(&[0.0], &[0.0], 0.0, &[0.0, 0.0])).is_err());
        assert!(h.push(rec(&[0.0, 0.0], &[0.0], f64::NAN, &[0.0, 0.0])).is_err());
        assert!(h.push(rec(&[0.0, 0.0], &[0.0], 0.0, &[0.0])).is_err());
        assert!(h.push(rec(&[0.0, 0.0], &[0.0], 0.0, &[0.0, 0.0])).is_ok());
    }

    #[test]
    fn aggregate_examples() {
        let h = history(vec![rec(&[0.0, 0.0], &[0.0], 3.5, &[1.0, 2.0])]);
        let w = WeightVector::from_counts(&[1]).unwrap();
        let a = h.aggregate(&w).unwrap();
        assert_eq!(a.j_hat, 3.5);
        assert_eq!(a.g_hat, vec![1.0, 2.0]);

        let h = history(vec![
            rec(&[0.0], &[0.0], 0.0, &[0.0]),
            rec(&[0.0], &[1.0], 2.0, &[0.0]),
        ]);
        let w = WeightVector::from_counts(&[1, 1]).unwrap();
        assert_eq!(h.aggregate(&w).unwrap().j_hat, 1.0);

        let bad = WeightVector::from_counts(&[1]).unwrap();
        assert!(h.aggregate(&bad).is_err());
    }

    #[test]
    fn estimate_at_single_record_is_the_record() {
        let h = history(vec![rec(&[0.1, 0.2], &[0.3], -1.5, &[4.0, 5.0])]);
        let e = h.estimate_at(&u(&[9.0, -9.0])).unwrap();
        assert_eq!(e.j_hat, -1.5);
        assert_eq!(e.g_hat, vec![4.0, 5.0]);
    }

    #[test]
    fn degenerate_history_gives_monte_carlo_mean() {
        // all u_k equal and distinct x_k: every sample votes for itself
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 50.0 - 0.5).collect();
        let uu = 0.2;
        let recs: Vec<_> = xs
            .iter()
            .map(|&x| rec(&[uu], &[x], 0.5 * (uu - x) * (uu - x), &[uu - x]))
            .collect();
        let h = history(recs);
        let e = h.estimate_at(&u(&[uu])).unwrap();
        let mc: f64 = xs.iter().map(|&x| 0.5 * (uu - x) * (uu - x)).sum::<f64>() / xs.len() as f64;
        assert!((e.j_hat - mc).abs() < 1e-14);
    }

    fn arb_history(
        n: std::ops::Range<usize>,
        du: usize,
        dr: usize,
        grid: bool,
    ) -> impl Strategy<Value = SampleHistory> {
        let coord = move || {
            if grid {
                // coarse grid values force exact ties and duplicate keys
                (-3i32..=3).prop_map(|k| k as f64 * 0.25).boxed()
            } else {
                (-1.0..1.0f64).boxed()
            }
        };
        prop::collection::vec(
            (
                prop::collection::vec(coord(), du),
                prop::collection::vec(coord(), dr),
                -5.0..5.0f64,
                prop::collection::vec(-5.0..5.0f64, du),
            ),
            n,
        )
        .prop_map(move |rs| {
            let mut h = SampleHistory::new(du, dr);
            for (uu, x, j, g) in rs {
                h.push(rec(&uu, &x, j, &g)).unwrap();
            }
            h
        })
    }

    proptest! {
        #[test]
        fn pruned_scan_matches_exhaustive(
            h in arb_history(1..60, 2, 1, false),
            q in prop::collection::vec(-1.5..1.5f64, 2),
        ) {
            let q = u(&q);
            prop_assert_eq!(h.votes(&q).unwrap(), h.votes_exhaustive(&q).unwrap());
        }

        #[test]
        fn pruned_scan_matches_exhaustive_with_ties(
            h in arb_history(1..40, 1, 2, true),
            q in (-3i32..=3).prop_map(|k| k as f64 * 0.25),
        ) {
            let q = u(&[q]);
            prop_assert_eq!(h.votes(&q).unwrap(), h.votes_exhaustive(&q).unwrap());
        }

        #[test]
        fn scalar_samples_match_exhaustive_with_ties(
            h in arb_history(1..80, 1, 1, true),
            q in (-3i32..=3).prop_map(|k| k as f64 * 0.25),
        ) {
            let q = u(&[q]);
            prop_assert_eq!(h.votes(&q).unwrap(), h.votes_exhaustive(&q).unwrap());
        }

        #[test]
        fn scalar_samples_match_exhaustive_2d_design(
            h in arb_history(1..80, 2, 1, true),
            q in prop::collection::vec((-3i32..=3).prop_map(|k| k as f64 * 0.25), 2),
        ) {
            let q = u(&q);
            prop_assert_eq!(h.votes(&q).unwrap(), h.votes_exhaustive(&q).unwrap());
        }

        #[test]
        fn pruned_scan_matches_exhaustive_multidim(
            h in arb_history(1..40, 3, 4, false),
            q in prop::collection::vec(-1.5..1.5f64, 3),
        ) {
            let q = u(&q);
            prop_assert_eq!(h.votes(&q).unwrap(), h.votes_exhaustive(&q).unwrap());
        }

        #[test]
        fn tree_search_matches_exhaustive_deep(
            h in arb_history(40..150, 2, 5, false),
            q in prop::collection::vec(-1.5..1.5f64, 2),
        ) {
            let q = u(&q);
            prop_assert_eq!(h.votes(&q).unwrap(), h.votes_exhaustive(&q).unwrap());
        }

        #[test]
        fn tree_search_matches_exhaustive_with_ties_deep(
            h in arb_history(40..150, 1, 3, true),
            q in (-3i32..=3).prop_map(|k| k as f64 * 0.25),
        ) {
            let q = u(&[q]);
            prop_assert_eq!(h.votes(&q).unwrap(), h.votes_exhaustive(&q).unwrap());
        }

        #[test]
        fn weights_are_normalized(
            h in arb_history(1..60, 2, 2, false),
            q in prop::collection::vec(-1.5..1.5f64, 2),
        ) {
            let w = h.empirical_weights(&u(&q)).unwrap();
            prop_assert_eq!(w.len(), h.len());
            prop_assert!(w.alphas().iter().all(|a| *a >= 0.0));
            prop_assert!((w.alphas().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn aggregate_matches_naive_loop(
            h in arb_history(1..30, 3, 1, false),
            raw in prop::collection::vec(0.0..1.0f64, 30),
        ) {
            let mut raw = raw[..h.len()].to_vec();
            raw[0] += 1e-3;
            let w = WeightVector::normalized(raw).unwrap();
            let a = h.aggregate(&w).unwrap();
            let mut j = 0.0;
            let mut g = [0.0; 3];
            for k in 0..h.len() {
                j += w.alphas()[k] * h.records()[k].j;
                for d in 0..3 {
                    g[d] += w.alphas()[k] * h.records()[k].g[d];
                }
            }
            prop_assert!((a.j_hat - j).abs() < 1e-12);
            for d in 0..3 {
                prop_assert!((a.g_hat[d] - g[d]).abs() < 1e-12);
            }
        }

        #[test]
        fn weights_are_permutation_covariant(
            h in arb_history(2..30, 2, 1, false),
            q in prop::collection::vec(-1.5..1.5f64, 2),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let n = h.len();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut hp = SampleHistory::new(2, 1);
            for &k in &perm {
                hp.push(h.records()[k].clone()).unwrap();
            }
            let q = u(&q);
            let w = h.empirical_weights(&q).unwrap();
            let wp = hp.empirical_weights(&q).unwrap();
            for (pos, &k) in perm.iter().enumerate() {
                prop_assert_eq!(wp.alphas()[pos], w.alphas()[k]);
            }
        }
    }
}
