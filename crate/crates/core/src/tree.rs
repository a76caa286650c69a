//! Navigation trees over a realized sample and their per-path metrics:
//! hop counts, maximal deviation from the chord, path functionals, tree
//! balls, offspring-cone checks, and the transverse decomposition of a path.

use crate::navigators::{select_min_norm, ModelParams};
use crate::point_process::{dist, dot, norm, norm2, PointSet, SpatialIndex};
use crate::rng::{stream, Stream};
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Parent mapping over a Palm-augmented sample (origin at index 0), with
/// cached generation numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NavTree {
    /// parent[i] is the navigation image of point i; parent[0] == 0
    pub parent: Vec<u32>,
    /// hop count to the root
    pub depth: Vec<u32>,
}

impl NavTree {
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Build depths from the parent map, verifying acyclicity.
    pub fn from_parents(parent: Vec<u32>) -> Result<Self> {
        let n = parent.len();
        if n == 0 || parent[0] != 0 {
            return Err(Error::InvalidInput("tree needs the root self-loop at index 0".into()));
        }
        let mut depth = vec![u32::MAX; n];
        depth[0] = 0;
        for start in 0..n {
            if depth[start] != u32::MAX {
                continue;
            }
            let mut chain = Vec::new();
            let mut cur = start as u32;
            while depth[cur as usize] == u32::MAX {
                chain.push(cur);
                cur = parent[cur as usize];
                if chain.len() > n {
                    return Err(Error::InvalidInput("cycle in parent map".into()));
                }
            }
            let mut d = depth[cur as usize];
            for &node in chain.iter().rev() {
                d += 1;
                depth[node as usize] = d;
            }
        }
        Ok(NavTree { parent, depth })
    }

    /// Nodes of generation at most k, root excluded.
    pub fn tree_ball(&self, k: u32) -> Vec<u32> {
        (1..self.len() as u32)
            .filter(|&i| self.depth[i as usize] <= k)
            .collect()
    }

    /// CSV `child,parent,h`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("child,parent,h\n");
        for i in 0..self.len() {
            out.push_str(&format!("{i},{},{}\n", self.parent[i], self.depth[i]));
        }
        out
    }
}

/// Which step rule drives the tree construction.
pub enum TreeNavigator<'a> {
    /// long-range greedy rule over the realized window
    SmallWorld(&'a ModelParams),
    /// nearest point of B(O, |X|)
    Radial,
}

/// Build the navigation tree: every point's parent is its navigation image.
/// Nodes are processed independently (their conditioned draws are
/// independent given the sample), so construction parallelizes and is
/// identical to a sequential build for a fixed seed.
pub fn build_tree(ps: &PointSet, nav: &TreeNavigator, seed: u64) -> Result<NavTree> {
    if ps.is_empty() || ps.palm_count < 1 || norm2(ps.point(0)) != 0.0 {
        return Err(Error::InvalidInput(
            "tree construction needs the origin as Palm atom 0".into(),
        ));
    }
    let n = ps.len();
    let parents: Vec<Result<u32>> = match nav {
        TreeNavigator::Radial => {
            let index = SpatialIndex::build(ps);
            (0..n as u32)
                .into_par_iter()
                .map(|i| {
                    if i == 0 {
                        return Ok(0);
                    }
                    crate::navigators::radial_step(
                        ps,
                        &index,
                        i,
                        &crate::navigators::Mode::TowardOrigin,
                    )
                    .map_err(|e| Error::NodeNavigation {
                        node: i as usize,
                        source: Box::new(e),
                    })
                })
                .collect()
        }
        TreeNavigator::SmallWorld(params) => {
            if ps.dim != 2 {
                return Err(Error::InvalidInput(
                    "windowed long-range tree construction is planar".into(),
                ));
            }
            let grid = DenseGrid::build(ps);
            (0..n as u32)
                .into_par_iter()
                .map(|i| {
                    if i == 0 {
                        return Ok(0);
                    }
                    let mut rng = stream(seed, "tree-parent", i as u64);
                    sample_parent_small_world(ps, &grid, params, i, &mut rng).map_err(|e| {
                        Error::NodeNavigation {
                            node: i as usize,
                            source: Box::new(e),
                        }
                    })
                })
                .collect()
        }
    };
    let parent = parents.into_iter().collect::<Result<Vec<u32>>>()?;
    NavTree::from_parents(parent)
}

/// Flat planar grid with unit cells over the window bounding box.
pub struct DenseGrid {
    lo: [f64; 2],
    cols: i64,
    rows: i64,
    starts: Vec<u32>,
    order: Vec<u32>,
}

impl DenseGrid {
    pub fn build(ps: &PointSet) -> Self {
        assert_eq!(ps.dim, 2);
        let c = ps.window.center();
        let r = ps.window.outer_radius();
        let lo = [c[0] - r - 1.0, c[1] - r - 1.0];
        let cols = (2.0 * r + 3.0).ceil() as i64;
        let rows = cols;
        let ncell = (cols * rows) as usize;
        let cell_of = |p: &[f64]| -> usize {
            let cx = ((p[0] - lo[0]).floor() as i64).clamp(0, cols - 1);
            let cy = ((p[1] - lo[1]).floor() as i64).clamp(0, rows - 1);
            (cy * cols + cx) as usize
        };
        let mut counts = vec![0u32; ncell + 1];
        for p in ps.iter() {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..=ncell {
            counts[i] += counts[i - 1];
        }
        let mut order = vec![0u32; ps.len()];
        let mut cursor = counts.clone();
        for (i, p) in ps.iter().enumerate() {
            let c = cell_of(p);
            order[cursor[c] as usize] = i as u32;
            cursor[c] += 1;
        }
        DenseGrid {
            lo,
            cols,
            rows,
            starts: counts,
            order,
        }
    }

    #[inline]
    fn cell_coords(&self, p: &[f64]) -> (i64, i64) {
        (
            ((p[0] - self.lo[0]).floor() as i64).clamp(0, self.cols - 1),
            ((p[1] - self.lo[1]).floor() as i64).clamp(0, self.rows - 1),
        )
    }

    #[inline]
    fn bucket(&self, cx: i64, cy: i64) -> &[u32] {
        if cx < 0 || cy < 0 || cx >= self.cols || cy >= self.rows {
            return &[];
        }
        let c = (cy * self.cols + cx) as usize;
        &self.order[self.starts[c] as usize..self.starts[c + 1] as usize]
    }
}

/// Conditioned parent draw for the long-range rule on a realized window.
///
/// Candidates are the sample points strictly closer to the origin plus the
/// origin atom. Coins against points in nearby cells (Chebyshev rings below
/// `k0`) are flipped one by one; farther cells are visited by geometric
/// skipping under the dominating per-cell bound `q_k = min(1, 8 f(k-1))`,
/// which is exact per point (cells almost surely hold fewer than 8 points;
/// a probed cell holding more falls back to plain coin flips). The whole
/// draw is resampled until some candidate succeeds, and the parent is the
/// success of minimal norm (lowest index on ties).
fn sample_parent_small_world(
    ps: &PointSet,
    grid: &DenseGrid,
    params: &ModelParams,
    i: u32,
    rng: &mut Stream,
) -> Result<u32> {
    let x = ps.point(i as usize);
    let nx2 = norm2(x);
    let nx = nx2.sqrt();
    let atom_p = params.f(nx);
    let eval = params.evaluator();
    let (cx, cy) = grid.cell_coords(x);
    let k0: i64 = (params.r0().ceil() as i64 + 2).max(6);
    let kmax: i64 = ((2.0 * nx).min(params.thinning_cutoff()).ceil() as i64 + 1).max(k0);
    let cap = crate::navigators::NavLimits::default().rejection_cap;

    let mut rounds = 0u64;
    loop {
        rounds += 1;
        if rounds > cap {
            return Err(Error::ConditioningFailure {
                rounds: rounds - 1,
                point: x.to_vec(),
                norm: nx,
            });
        }
        let mut best: Option<(f64, u32)> = None;
        let mut consider = |j: u32, best: &mut Option<(f64, u32)>| {
            let n2 = norm2(ps.point(j as usize));
            match *best {
                Some((bn, bj)) if n2 > bn || (n2 == bn && j > bj) => {}
                _ => *best = Some((n2, j)),
            }
        };
        // origin atom
        if rng.gen::<f64>() <= atom_p {
            consider(0, &mut best);
        }
        // near cells: plain coins
        for dxc in -k0..=k0 {
            for dyc in -k0..=k0 {
                for &j in grid.bucket(cx + dxc, cy + dyc) {
                    if j == i || j == 0 {
                        continue;
                    }
                    let y = ps.point(j as usize);
                    if norm2(y) >= nx2 {
                        continue;
                    }
                    if rng.gen::<f64>() <= eval.f_d2(crate::point_process::dist2(x, y)) {
                        consider(j, &mut best);
                    }
                }
            }
        }
        // far rings in dyadically bounded blocks
        let mut k_block = k0 + 1;
        while k_block <= kmax {
            let block_end = (2 * k_block).min(kmax);
            let q_bar = (8.0 * params.f((k_block - 1) as f64)).min(1.0);
            if q_bar <= 0.0 {
                break;
            }
            // cells of rings k_block..=block_end, positions indexed 0..total
            let mut pos: u64 = 0;
            let ring_cells = |k: i64| 8 * k as u64;
            let total: u64 = (k_block..=block_end).map(ring_cells).sum();
            loop {
                // geometric jump under q_bar
                let u: f64 = rng.gen();
                let jump = if q_bar >= 1.0 {
                    0
                } else {
                    (u.ln() / (1.0 - q_bar).ln()).floor() as u64
                };
                pos = pos.saturating_add(jump);
                if pos >= total {
                    break;
                }
                // locate ring and slot
                let mut k = k_block;
                let mut rem = pos;
                while rem >= ring_cells(k) {
                    rem -= ring_cells(k);
                    k += 1;
                }
                let q_k = (8.0 * params.f((k - 1) as f64)).min(1.0);
                if rng.gen::<f64>() <= q_k / q_bar {
                    let (dxc, dyc) = ring_slot(k, rem);
                    let bucket = grid.bucket(cx + dxc, cy + dyc);
                    for &j in bucket {
                        if j == i || j == 0 {
                            continue;
                        }
                        let y = ps.point(j as usize);
                        if norm2(y) >= nx2 {
                            continue;
                        }
                        let fj = eval.f_d2(crate::point_process::dist2(x, y));
                        let accept_p = if bucket.len() <= 8 { fj / q_k } else { fj };
                        if rng.gen::<f64>() <= accept_p {
                            consider(j, &mut best);
                        }
                    }
                }
                pos += 1;
            }
            k_block = block_end + 1;
        }
        if let Some((_, j)) = best {
            return Ok(j);
        }
    }
}

/// Cell offset of slot `s` (0-based) on the Chebyshev ring of radius k > 0,
/// walked counterclockwise from the right edge.
fn ring_slot(k: i64, s: u64) -> (i64, i64) {
    let side = 2 * k as u64;
    let (q, r) = (s / side, (s % side) as i64);
    match q {
        0 => (k, -k + r),
        1 => (k - r, k),
        2 => (-k, k - r),
        _ => (-k + r, -k),
    }
}

/// Metrics of the path from a node to the root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathMetrics {
    pub h: u32,
    /// maximal orthogonal distance of path vertices from the chord to X
    pub delta: f64,
    /// value of the caller-supplied step functional
    pub g: f64,
    pub euclid_len: f64,
}

/// Walk the parent chain of `x` and compute hop count, maximal deviation
/// and the functional `g` summed over steps.
pub fn path_metrics<G: Fn(&[f64], &[f64]) -> f64>(
    tree: &NavTree,
    ps: &PointSet,
    x: u32,
    g: G,
) -> PathMetrics {
    let xs = ps.point(x as usize);
    let nx = norm(xs);
    if nx == 0.0 {
        return PathMetrics {
            h: 0,
            delta: 0.0,
            g: 0.0,
            euclid_len: 0.0,
        };
    }
    let dir: Vec<f64> = xs.iter().map(|c| c / nx).collect();
    let mut cur = x;
    let mut h = 0u32;
    let mut delta: f64 = 0.0;
    let mut gsum = 0.0;
    let mut elen = 0.0;
    loop {
        let p = ps.point(cur as usize);
        let proj = dot(p, &dir);
        let orth2 = norm2(p) - proj * proj;
        delta = delta.max(orth2.max(0.0).sqrt());
        let next = tree.parent[cur as usize];
        if next == cur {
            break;
        }
        let np = ps.point(next as usize);
        gsum += g(p, np);
        elen += dist(p, np);
        h += 1;
        cur = next;
    }
    PathMetrics {
        h,
        delta,
        g: gsum,
        euclid_len: elen,
    }
}

/// Nodes whose offspring leave the angular cone of half-width |X|^{gamma-1}
/// around the direction of X.
pub fn offspring_cone_check(tree: &NavTree, ps: &PointSet, gamma: f64) -> Result<Vec<u32>> {
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(Error::InvalidInput(format!("cone exponent gamma = {gamma} outside (0,1)")));
    }
    let n = tree.len();
    let mut violates = vec![false; n];
    for child in 1..n as u32 {
        let p = tree.parent[child as usize];
        if p == 0 {
            continue; // the root has no direction
        }
        let xp = ps.point(p as usize);
        let xc = ps.point(child as usize);
        let (np, nc) = (norm(xp), norm(xc));
        if np == 0.0 || nc == 0.0 {
            continue;
        }
        let cosv = (dot(xp, xc) / (np * nc)).clamp(-1.0, 1.0);
        let angle = cosv.acos();
        if angle > np.powf(gamma - 1.0) {
            violates[p as usize] = true;
        }
    }
    Ok((0..n as u32).filter(|&i| violates[i as usize]).collect())
}

/// The transverse/longitudinal decomposition of a toward-origin path whose
/// start lies on the positive e1 axis of the (e1, e2) plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransverseTrace {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub theta: Vec<f64>,
    /// Q_k = q_k cos(theta_k)
    pub qcos: Vec<f64>,
    /// running sup of step lengths
    pub s: Vec<f64>,
    /// running max of trailing partial sums of Q
    pub m: Vec<f64>,
}

impl TransverseTrace {
    /// Largest relative residual of the in-plane recursion.
    pub fn recursion_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.p.len() {
            let (c, s) = (self.theta[k].cos(), self.theta[k].sin());
            let u_pred = self.u[k] - self.p[k] * c - self.q[k] * s;
            let v_pred = self.v[k] + self.q[k] * c - self.p[k] * s;
            let scale = self.u[k].abs().max(self.v[k].abs()).max(1.0);
            worst = worst
                .max((u_pred - self.u[k + 1]).abs() / scale)
                .max((v_pred - self.v[k + 1]).abs() / scale);
        }
        worst
    }

    /// Check `V_k <= S_k + M_k` at every step; returns the first violating
    /// index, if any.
    pub fn transverse_bound_violation(&self) -> Option<usize> {
        (0..self.v.len()).find(|&k| self.v[k] > self.s[k] + self.m[k] + 1e-9)
    }
}

/// Decompose the path along `e1` (the chord direction, `X/|X|`) and a unit
/// `e2` orthogonal to it. The start must satisfy `<X, e2> = 0`.
pub fn transverse_decomposition(
    path: &crate::navigators::Path,
    e1: &[f64],
    e2: &[f64],
) -> Result<TransverseTrace> {
    let n = path.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty path".into()));
    }
    if (norm(e1) - 1.0).abs() > 1e-9 || (norm(e2) - 1.0).abs() > 1e-9 || dot(e1, e2).abs() > 1e-9 {
        return Err(Error::InvalidInput("e1, e2 must be orthonormal".into()));
    }
    let u: Vec<f64> = (0..n).map(|k| dot(path.point(k), e1)).collect();
    let v: Vec<f64> = (0..n).map(|k| dot(path.point(k), e2)).collect();
    if v[0].abs() > 1e-9 * u[0].abs().max(1.0) {
        return Err(Error::InvalidInput("path start must lie on the e1 axis".into()));
    }
    let mut p = Vec::with_capacity(n.saturating_sub(1));
    let mut q = Vec::with_capacity(n.saturating_sub(1));
    let mut theta = Vec::with_capacity(n.saturating_sub(1));
    let mut qcos = Vec::with_capacity(n.saturating_sub(1));
    let mut s = vec![0.0f64; n];
    let mut m = vec![0.0f64; n];
    for k in 0..n.saturating_sub(1) {
        let th = v[k].atan2(u[k]);
        let (c, sn) = (th.cos(), th.sin());
        let du = u[k + 1] - u[k];
        let dv = v[k + 1] - v[k];
        let pk = -(du * c + dv * sn);
        let qk = -du * sn + dv * c;
        theta.push(th);
        p.push(pk);
        q.push(qk);
        qcos.push(qk * c);
        s[k + 1] = s[k].max(dist(path.point(k), path.point(k + 1)));
        m[k + 1] = (m[k] + qk * c).max(0.0);
    }
    Ok(TransverseTrace {
        u,
        v,
        p,
        q,
        theta,
        qcos,
        s,
        m,
    })
}

/// Convenience: e2 for a planar path starting on the ray of `e1`.
pub fn planar_normal(e1: &[f64]) -> Vec<f64> {
    assert_eq!(e1.len(), 2);
    vec![-e1[1], e1[0]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navigators::{Mode, NavDiagnostics, NavKind, NavLimits, Path, Termination};
    use crate::point_process::{palm_add, sample_ppp, Point, Window};

    fn palmed(window: Window, seed: u64) -> PointSet {
        let ps = sample_ppp(&window, 2, seed).unwrap();
        palm_add(&ps, &[Point::origin(2)]).unwrap()
    }

    fn hand_path(points: &[[f64; 2]]) -> Path {
        let coords: Vec<f64> = points.iter().flatten().copied().collect();
        Path {
            dim: 2,
            coords,
            progress: vec![],
            scaled_progress: vec![],
            termination: Termination::AbsorbedAtOrigin,
            diagnostics: NavDiagnostics::default(),
        }
    }

    #[test]
    fn singleton_tree() {
        let w = Window::ball_at_origin(2, 1.0);
        let empty = PointSet::from_points(w, 2, 0, &[]).unwrap();
        let ps = palm_add(&empty, &[Point::origin(2)]).unwrap();
        let t = build_tree(&ps, &TreeNavigator::Radial, 0).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.depth[0], 0);
        assert!(t.tree_ball(5).is_empty());
    }

    #[test]
    fn radial_tree_matches_brute_force() {
        let ps = palmed(Window::ball_at_origin(2, 6.0), 3);
        assert!(ps.len() > 50);
        let t = build_tree(&ps, &TreeNavigator::Radial, 0).unwrap();
        for i in 1..ps.len() as u32 {
            let x = ps.point(i as usize);
            let nx2 = norm2(x);
            let want = (0..ps.len() as u32)
                .filter(|&j| j != i && norm2(ps.point(j as usize)) < nx2)
                .min_by(|&a, &b| {
                    crate::point_process::dist2(ps.point(a as usize), x)
                        .total_cmp(&crate::point_process::dist2(ps.point(b as usize), x))
                })
                .unwrap();
            assert_eq!(t.parent[i as usize], want);
        }
        // node and edge counts
        assert_eq!(t.len(), ps.len());
        let edges = (1..t.len()).filter(|&i| t.parent[i] != i as u32).count();
        assert_eq!(edges, ps.len() - 1);
    }

    #[test]
    fn tree_ball_monotone_and_exhaustive() {
        let ps = palmed(Window::ball_at_origin(2, 8.0), 5);
        let t = build_tree(&ps, &TreeNavigator::Radial, 0).unwrap();
        assert!(t.tree_ball(0).is_empty());
        let max_h = *t.depth.iter().max().unwrap();
        let mut prev = 0usize;
        for k in 0..=max_h {
            let ball = t.tree_ball(k);
            assert!(ball.len() >= prev);
            prev = ball.len();
        }
        assert_eq!(prev, ps.len() - 1);
    }

    #[test]
    fn small_world_tree_basics() {
        let params = ModelParams::new(2, 6.0, 1.0).unwrap();
        let ps = palmed(Window::ball_at_origin(2, 15.0), 8);
        let t = build_tree(&ps, &TreeNavigator::SmallWorld(&params), 4).unwrap();
        assert_eq!(t.len(), ps.len());
        for i in 1..ps.len() {
            let p = t.parent[i] as usize;
            assert!(norm2(ps.point(p)) < norm2(ps.point(i)), "parent not closer at {i}");
        }
        // reproducible
        let t2 = build_tree(&ps, &TreeNavigator::SmallWorld(&params), 4).unwrap();
        assert_eq!(t.parent, t2.parent);
    }

    #[test]
    fn small_world_parent_law_matches_full_scan() {
        // zone-sampled conditioned draw vs the plain all-candidates sampler
        let params = ModelParams::new(2, 6.0, 1.0).unwrap();
        let ps = palmed(Window::ball_at_origin(2, 12.0), 21);
        let grid = DenseGrid::build(&ps);
        // the farthest point exercises the far-ring path (kmax ~ 2|x|)
        let i = (1..ps.len() as u32)
            .max_by(|&a, &b| norm2(ps.point(a as usize)).total_cmp(&norm2(ps.point(b as usize))))
            .unwrap();
        let reps = 3000u64;
        let mut zone_counts = std::collections::HashMap::new();
        for rep in 0..reps {
            let mut rng = stream(1000 + rep, "law-a", i as u64);
            let p = sample_parent_small_world(&ps, &grid, &params, i, &mut rng).unwrap();
            *zone_counts.entry(p).or_insert(0f64) += 1.0;
        }
        let x = ps.point(i as usize).to_vec();
        let nx2 = norm2(&x);
        let mut scan_counts = std::collections::HashMap::new();
        let cands: Vec<u32> = (0..ps.len() as u32)
            .filter(|&j| j != i && norm2(ps.point(j as usize)) < nx2)
            .collect();
        let mut rng = stream(77, "law-b", 0);
        for _ in 0..reps {
            loop {
                let hits: Vec<u32> = cands
                    .iter()
                    .copied()
                    .filter(|&j| rng.gen::<f64>() <= params.f(dist(&x, ps.point(j as usize))))
                    .collect();
                if hits.is_empty() {
                    continue;
                }
                let p = select_min_norm(&hits, |j| ps.point(j as usize));
                *scan_counts.entry(p).or_insert(0f64) += 1.0;
                break;
            }
        }
        // chi-square homogeneity over observed parents, low-count
        // categories pooled so the chi-square approximation holds
        let keys: Vec<u32> = {
            let mut k: Vec<u32> = zone_counts
                .keys()
                .chain(scan_counts.keys())
                .copied()
                .collect();
            k.sort_unstable();
            k.dedup();
            k
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        let (mut pool_a, mut pool_b) = (0.0, 0.0);
        for k in &keys {
            let ca = *zone_counts.get(k).unwrap_or(&0.0);
            let cb = *scan_counts.get(k).unwrap_or(&0.0);
            if ca + cb >= 10.0 {
                a.push(ca);
                b.push(cb);
            } else {
                pool_a += ca;
                pool_b += cb;
            }
        }
        if pool_a + pool_b > 0.0 {
            a.push(pool_a);
            b.push(pool_b);
        }
        let (stat, df) = crate::stats::chi2_homogeneity(&a, &b);
        let crit = crate::stats::chi2_upper_quantile(df.max(1.0), 0.001);
        assert!(stat < crit, "parent law mismatch: chi2 {stat} vs {crit} (df {df})");
    }

    #[test]
    fn path_metrics_examples() {
        // X with parent O
        let w = Window::ball_at_origin(2, 10.0);
        let base = PointSet::from_points(w.clone(), 2, 0, &[Point::new(&[3.0, 0.0])]).unwrap();
        let ps = palm_add(&base, &[Point::origin(2)]).unwrap();
        let t = NavTree::from_parents(vec![0, 0]).unwrap();
        let m = path_metrics(&t, &ps, 1, |_, _| 1.0);
        assert_eq!(m.h, 1);
        assert_eq!(m.delta, 0.0);
        assert_eq!(m.g, 1.0);
        // hand path (10,0) -> (6,3) -> (2,0) -> O: delta = 3
        let base = PointSet::from_points(
            w,
            2,
            0,
            &[Point::new(&[10.0, 0.0]), Point::new(&[6.0, 3.0]), Point::new(&[2.0, 0.0])],
        )
        .unwrap();
        let ps = palm_add(&base, &[Point::origin(2)]).unwrap();
        let t = NavTree::from_parents(vec![0, 2, 3, 0]).unwrap();
        let m = path_metrics(&t, &ps, 1, |_, _| 1.0);
        assert_eq!(m.h, 3);
        assert!((m.delta - 3.0).abs() < 1e-12);
        assert_eq!(m.g, m.h as f64);
        // the root
        let m0 = path_metrics(&t, &ps, 0, |_, _| 1.0);
        assert_eq!((m0.h, m0.delta, m0.g), (0, 0.0, 0.0));
    }

    #[test]
    fn metrics_agree_with_depth() {
        let ps = palmed(Window::ball_at_origin(2, 7.0), 9);
        let t = build_tree(&ps, &TreeNavigator::Radial, 0).unwrap();
        for i in (0..ps.len() as u32).step_by(3) {
            let m = path_metrics(&t, &ps, i, |_, _| 1.0);
            assert_eq!(m.h, t.depth[i as usize]);
        }
    }

    #[test]
    fn offspring_cone_detects_crafted_violation() {
        let w = Window::ball_at_origin(2, 100.0);
        // parent at (50, 0); one child on the ray, one at right angle
        let base = PointSet::from_points(
            w,
            2,
            0,
            &[
                Point::new(&[50.0, 0.0]),
                Point::new(&[60.0, 0.0]),
                Point::new(&[0.1, 55.0]),
            ],
        )
        .unwrap();
        let ps = palm_add(&base, &[Point::origin(2)]).unwrap();
        // children 2 and 3 hang off node 1
        let t = NavTree::from_parents(vec![0, 0, 1, 1]).unwrap();
        let viol = offspring_cone_check(&t, &ps, 0.8).unwrap();
        assert_eq!(viol, vec![1]);
        // ray-aligned offspring never violate
        let t2 = NavTree::from_parents(vec![0, 0, 1, 0]).unwrap();
        assert!(offspring_cone_check(&t2, &ps, 0.8).unwrap().is_empty());
        assert!(offspring_cone_check(&t2, &ps, 1.5).is_err());
    }

    #[test]
    fn transverse_axis_path_is_flat() {
        let p = hand_path(&[[9.0, 0.0], [5.5, 0.0], [2.0, 0.0], [0.0, 0.0]]);
        let tr = transverse_decomposition(&p, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(tr.v.iter().all(|&v| v == 0.0));
        assert!(tr.q.iter().all(|&q| q == 0.0));
        assert!(tr.recursion_residual() < 1e-12);
        assert!(tr.transverse_bound_violation().is_none());
    }

    #[test]
    fn transverse_recursion_and_bound_on_simulated_paths() {
        let params = ModelParams::new(2, 3.0, 1.0).unwrap();
        for seed in 0..10 {
            let path = crate::navigators::navigate(
                NavKind::SmallWorld,
                &params,
                &[40.0, 0.0],
                &Mode::TowardOrigin,
                &NavLimits::default(),
                seed,
            )
            .unwrap();
            let e1 = vec![1.0, 0.0];
            let e2 = planar_normal(&e1);
            let tr = transverse_decomposition(&path, &e1, &e2).unwrap();
            assert!(tr.recursion_residual() < 1e-9, "seed {seed}");
            assert!(tr.transverse_bound_violation().is_none(), "seed {seed}");
            // nonnegative progress makes p_k nonnegative
            for &pk in &tr.p {
                assert!(pk >= -1e-12);
            }
        }
    }

    #[test]
    fn tree_csv_shape() {
        let ps = palmed(Window::ball_at_origin(2, 4.0), 2);
        let t = build_tree(&ps, &TreeNavigator::Radial, 0).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("child,parent,h\n0,0,0\n"));
        assert_eq!(csv.lines().count(), t.len() + 1);
    }
}
