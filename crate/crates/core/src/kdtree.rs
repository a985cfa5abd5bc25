//! k-d tree for the multi-dimensional vote search.
//!
//! The query minimizes `du[m] + ||x - x_m||`. The design distances `du` change
//! with every evaluation point and often vary as much as the samples do, so the
//! tree is built per evaluation over the augmented points `(x_m, du[m])` and
//! splits on whichever coordinate is widest. `min du + boxdist(x)` is a lower
//! bound on every cost in a node even after rounding: per-coordinate box gaps
//! never exceed the point gaps, and the sums are accumulated in the same order
//! as [`crate::linalg::dist`].

use std::cmp::Ordering;

use crate::linalg;

const LEAF: usize = 16;

#[derive(Debug, Clone, Copy)]
struct Node {
    start: u32,
    end: u32,
    // child node indices; 0 marks a leaf (the root is never a child)
    left: u32,
    right: u32,
}

#[derive(Debug)]
pub(crate) struct KdTree {
    dim: usize,
    nodes: Vec<Node>,
    // sample bounding boxes, `dim` values per node, and the smallest design
    // distance below each node
    lo: Vec<f64>,
    hi: Vec<f64>,
    du_min: Vec<f64>,
    // record index at each leaf-order position
    perm: Vec<u32>,
    // augmented points `(x, du)`, `dim + 1` values each, in leaf order
    pts: Vec<f64>,
}

impl KdTree {
    /// Builds over `xs`, a row-major `n x dim` array, with design distances `du`.
    pub(crate) fn build(xs: &[f64], du: &[f64], dim: usize) -> Self {
        let n = du.len();
        let w = dim + 1;
        let mut aug = Vec::with_capacity(n * w);
        for (x, &d) in xs.chunks_exact(dim).zip(du) {
            aug.extend_from_slice(x);
            aug.push(d);
        }
        let mut t = KdTree {
            dim,
            nodes: Vec::with_capacity(2 * n / LEAF + 2),
            lo: Vec::new(),
            hi: Vec::new(),
            du_min: Vec::new(),
            perm: (0..n as u32).collect(),
            pts: Vec::new(),
        };
        if n > 0 {
            let mut perm = std::mem::take(&mut t.perm);
            let mut lo = vec![0.0; w];
            let mut hi = vec![0.0; w];
            t.split(&aug, &mut perm, 0, n, &mut lo, &mut hi);
            t.perm = perm;
        }
        t.pts = t
            .perm
            .iter()
            .flat_map(|&m| aug[m as usize * w..(m as usize + 1) * w].iter().copied())
            .collect();
        t
    }

    fn split(
        &mut self,
        aug: &[f64],
        perm: &mut [u32],
        start: usize,
        end: usize,
        lo: &mut [f64],
        hi: &mut [f64],
    ) -> u32 {
        let w = self.dim + 1;
        lo.fill(f64::INFINITY);
        hi.fill(f64::NEG_INFINITY);
        for &m in &perm[start..end] {
            let p = &aug[m as usize * w..(m as usize + 1) * w];
            for c in 0..w {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        let id = self.nodes.len() as u32;
        self.lo.extend_from_slice(&lo[..self.dim]);
        self.hi.extend_from_slice(&hi[..self.dim]);
        self.du_min.push(lo[self.dim]);
        self.nodes.push(Node {
            start: start as u32,
            end: end as u32,
            left: 0,
            right: 0,
        });
        if end - start > LEAF {
            let mut axis = 0;
            for c in 1..w {
                if hi[c] - lo[c] > hi[axis] - lo[axis] {
                    axis = c;
                }
            }
            let mid = (start + end) / 2;
            perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                let (ka, kb) = (aug[a as usize * w + axis], aug[b as usize * w + axis]);
                ka.total_cmp(&kb).then(a.cmp(&b))
            });
            let left = self.split(aug, perm, start, mid, lo, hi);
            let right = self.split(aug, perm, mid, end, lo, hi);
            self.nodes[id as usize].left = left;
            self.nodes[id as usize].right = right;
        }
        id
    }

    /// Lower bound on every cost in `node` for the sample `x`.
    #[inline]
    fn bound(&self, node: usize, x: &[f64]) -> f64 {
        let d = self.dim;
        let (lo, hi) = (&self.lo[node * d..(node + 1) * d], &self.hi[node * d..(node + 1) * d]);
        let gap = x
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&v, (&l, &h))| {
                let g = if v < l {
                    l - v
                } else if v > h {
                    v - h
                } else {
                    0.0
                };
                g * g
            })
            .sum::<f64>()
            .sqrt();
        self.du_min[node] + gap
    }

    /// Vote counts: every stored sample votes for the record minimizing
    /// `du[m] + ||x_i - x_m||`, ties to the lowest record index.
    pub(crate) fn votes(&self) -> Vec<u32> {
        let n = self.perm.len();
        let (d, w) = (self.dim, self.dim + 1);
        let mut counts = vec![0u32; n];
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        for p in 0..n {
            let x = &self.pts[p * w..p * w + d];
            let mut best_v = self.pts[p * w + d] + linalg::dist(x, x);
            let mut best_m = self.perm[p];
            stack.clear();
            stack.push((0, self.bound(0, x)));
            while let Some((id, bound)) = stack.pop() {
                if bound > best_v {
                    continue;
                }
                let nd = self.nodes[id];
                if nd.left == 0 {
                    for q in nd.start as usize..nd.end as usize {
                        let pq = &self.pts[q * w..(q + 1) * w];
                        if pq[d] > best_v {
                            continue;
                        }
                        let v = pq[d] + linalg::dist(x, &pq[..d]);
                        let m = self.perm[q];
                        if v < best_v || (v == best_v && m < best_m) {
                            best_v = v;
                            best_m = m;
                        }
                    }
                    continue;
                }
                let (l, r) = (nd.left as usize, nd.right as usize);
                let (bl, br) = (self.bound(l, x), self.bound(r, x));
                // push the farther child first so the nearer one is searched first
                let (near, far) = match bl.partial_cmp(&br) {
                    Some(Ordering::Greater) => ((r, br), (l, bl)),
                    _ => ((l, bl), (r, br)),
                };
                if far.1 <= best_v {
                    stack.push(far);
                }
                if near.1 <= best_v {
                    stack.push(near);
                }
            }
            counts[best_m as usize] += 1;
        }
        counts
    }
}
