//! Planar Delaunay triangulation by incremental Bowyer-Watson insertion
//! with ghost triangles for the hull, on top of robust geometric predicates
//! (floating-point filter with an exact rational fallback).
//!
//! Cocircular ties are resolved deterministically: among the two diagonals
//! of a cocircular quad, the one containing the lowest point index wins.

use crate::point_process::PointSet;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use std::collections::HashMap;

const GHOST: u32 = u32::MAX;

// floating-point filter constants, (3 + 16 eps) eps and (10 + 96 eps) eps
const ORIENT_ERRBOUND: f64 = 3.330669073875473e-16;
const INCIRCLE_ERRBOUND: f64 = 1.1102230246251577e-15;

fn big(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite coordinate")
}

/// Sign of the orientation determinant: +1 if (a,b,c) wind counterclockwise,
/// -1 clockwise, 0 collinear. Exact.
pub fn orient2d(a: &[f64], b: &[f64], c: &[f64]) -> i8 {
    let detleft = (a[0] - c[0]) * (b[1] - c[1]);
    let detright = (a[1] - c[1]) * (b[0] - c[0]);
    let det = detleft - detright;
    let detsum = detleft.abs() + detright.abs();
    if det.abs() > ORIENT_ERRBOUND * detsum {
        return sign_f64(det);
    }
    // exact rational evaluation
    let det = (big(a[0]) - big(c[0])) * (big(b[1]) - big(c[1]))
        - (big(a[1]) - big(c[1])) * (big(b[0]) - big(c[0]));
    sign_big(&det)
}

/// Sign of the in-circle determinant for a counterclockwise triangle
/// (a,b,c): +1 if p lies strictly inside the circumcircle, -1 strictly
/// outside, 0 on the circle. Exact.
pub fn in_circle(a: &[f64], b: &[f64], c: &[f64], p: &[f64]) -> i8 {
    let adx = a[0] - p[0];
    let ady = a[1] - p[1];
    let bdx = b[0] - p[0];
    let bdy = b[1] - p[1];
    let cdx = c[0] - p[0];
    let cdy = c[1] - p[1];

    let alift = adx * adx + ady * ady;
    let blift = bdx * bdx + bdy * bdy;
    let clift = cdx * cdx + cdy * cdy;

    let bxcy = bdx * cdy;
    let cxby = cdx * bdy;
    let cxay = cdx * ady;
    let axcy = adx * cdy;
    let axby = adx * bdy;
    let bxay = bdx * ady;

    let det = alift * (bxcy - cxby) + blift * (cxay - axcy) + clift * (axby - bxay);
    let permanent = alift * (bxcy.abs() + cxby.abs())
        + blift * (cxay.abs() + axcy.abs())
        + clift * (axby.abs() + bxay.abs());
    if det.abs() > INCIRCLE_ERRBOUND * permanent {
        return sign_f64(det);
    }
    let adx = big(a[0]) - big(p[0]);
    let ady = big(a[1]) - big(p[1]);
    let bdx = big(b[0]) - big(p[0]);
    let bdy = big(b[1]) - big(p[1]);
    let cdx = big(c[0]) - big(p[0]);
    let cdy = big(c[1]) - big(p[1]);
    let alift = &adx * &adx + &ady * &ady;
    let blift = &bdx * &bdx + &bdy * &bdy;
    let clift = &cdx * &cdx + &cdy * &cdy;
    let det = alift * (&bdx * &cdy - &cdx * &bdy) + blift * (&cdx * &ady - &adx * &cdy)
        + clift * (&adx * &bdy - &bdx * &ady);
    sign_big(&det)
}

fn sign_f64(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn sign_big(x: &BigRational) -> i8 {
    if x.is_zero() {
        0
    } else if x > &BigRational::from_integer(BigInt::from(0)) {
        1
    } else {
        -1
    }
}

/// A Delaunay triangulation of a planar point set.
#[derive(Debug, Clone)]
pub struct Triangulation {
    pub points: PointSet,
    /// finite triangles, canonical form: lowest index first, counterclockwise
    pub triangles: Vec<[u32; 3]>,
    adjacency: Vec<Vec<u32>>,
    /// hull vertices, counterclockwise
    pub hull: Vec<u32>,
}

impl Triangulation {
    /// Neighbor indices of vertex `i`, ascending.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adjacency[i]
    }

    /// CSV `i,j,k`, each row ascending, rows lexicographically sorted.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<[u32; 3]> = self
            .triangles
            .iter()
            .map(|t| {
                let mut s = *t;
                s.sort_unstable();
                s
            })
            .collect();
        rows.sort_unstable();
        let mut out = String::from("i,j,k\n");
        for r in rows {
            out.push_str(&format!("{},{},{}\n", r[0], r[1], r[2]));
        }
        out
    }
}

struct Builder<'a> {
    ps: &'a PointSet,
    tris: Vec<[u32; 3]>,
    alive: Vec<bool>,
    /// directed edge -> alive triangle owning it
    edge_owner: HashMap<(u32, u32), usize>,
}

impl<'a> Builder<'a> {
    fn pt(&self, i: u32) -> &[f64] {
        self.ps.point(i as usize)
    }

    fn push_tri(&mut self, t: [u32; 3]) {
        let id = self.tris.len();
        self.tris.push(t);
        self.alive.push(true);
        for k in 0..3 {
            self.edge_owner.insert((t[k], t[(k + 1) % 3]), id);
        }
        if t[2] != GHOST {
            debug_assert!(
                orient2d(self.pt(t[0]), self.pt(t[1]), self.pt(t[2])) > 0,
                "triangle {t:?} not counterclockwise"
            );
        }
    }

    fn kill_tri(&mut self, id: usize) {
        let t = self.tris[id];
        self.alive[id] = false;
        for k in 0..3 {
            self.edge_owner.remove(&(t[k], t[(k + 1) % 3]));
        }
    }

    fn is_bad(&self, id: usize, p: &[f64]) -> bool {
        let t = self.tris[id];
        if t[2] == GHOST {
            let (u, v) = (self.pt(t[0]), self.pt(t[1]));
            match orient2d(self.pt(t[0]), self.pt(t[1]), p) {
                1 => true,
                0 => {
                    // collinear with the hull edge: visible only beyond it
                    let ex = v[0] - u[0];
                    let ey = v[1] - u[1];
                    let t_par = (p[0] - u[0]) * ex + (p[1] - u[1]) * ey;
                    t_par < 0.0 || t_par > ex * ex + ey * ey
                }
                _ => false,
            }
        } else {
            in_circle(self.pt(t[0]), self.pt(t[1]), self.pt(t[2]), p) > 0
        }
    }

    fn insert(&mut self, ip: u32) -> Result<()> {
        let p: Vec<f64> = self.pt(ip).to_vec();
        let bad: Vec<usize> = (0..self.tris.len())
            .filter(|&id| self.alive[id] && self.is_bad(id, &p))
            .collect();
        if bad.is_empty() {
            return Err(Error::Degenerate(format!(
                "point {ip} conflicts with no triangle (duplicate or on-edge degenerate input)"
            )));
        }
        let bad_set: std::collections::HashSet<usize> = bad.iter().copied().collect();
        // cavity boundary: directed edges of bad triangles whose reverse
        // belongs to a kept triangle (or to the outside of the mesh)
        let mut boundary: Vec<(u32, u32)> = Vec::new();
        for &id in &bad {
            let t = self.tris[id];
            for k in 0..3 {
                let e = (t[k], t[(k + 1) % 3]);
                match self.edge_owner.get(&(e.1, e.0)) {
                    Some(&other) if bad_set.contains(&other) => {}
                    _ => boundary.push(e),
                }
            }
        }
        for &id in &bad {
            self.kill_tri(id);
        }
        for (a, b) in boundary {
            // new triangle (a, b, ip) in cyclic order, ghost slot last
            let t = if a == GHOST {
                [b, ip, GHOST]
            } else if b == GHOST {
                [ip, a, GHOST]
            } else {
                [a, b, ip]
            };
            self.push_tri(t);
        }
        Ok(())
    }

    /// Enforce the lowest-index diagonal on cocircular quads.
    fn normalize_cocircular(&mut self) -> Result<()> {
        let cap = 10 * self.ps.len() * self.ps.len() + 100;
        for _ in 0..cap {
            let mut flipped = false;
            for id in 0..self.tris.len() {
                if !self.alive[id] || self.tris[id][2] == GHOST {
                    continue;
                }
                let t = self.tris[id];
                for k in 0..3 {
                    let a = t[k];
                    let b = t[(k + 1) % 3];
                    if a > b {
                        continue;
                    }
                    let c = t[(k + 2) % 3];
                    let Some(&other) = self.edge_owner.get(&(b, a)) else {
                        continue;
                    };
                    let t2 = self.tris[other];
                    if t2[2] == GHOST {
                        continue;
                    }
                    let d = t2
                        .iter()
                        .copied()
                        .find(|&v| v != a && v != b)
                        .expect("opposite vertex");
                    if in_circle(self.pt(a), self.pt(b), self.pt(c), self.pt(d)) != 0 {
                        continue;
                    }
                    let m = a.min(b).min(c).min(d);
                    if m == a || m == b {
                        continue;
                    }
                    // flip (a,b) -> (c,d)
                    self.kill_tri(id);
                    self.kill_tri(other);
                    self.push_tri([c, a, d]);
                    self.push_tri([d, b, c]);
                    flipped = true;
                    break;
                }
                if flipped {
                    break;
                }
            }
            if !flipped {
                return Ok(());
            }
        }
        Err(Error::Degenerate("cocircular normalization did not settle".into()))
    }
}

/// Delaunay triangulation by incremental insertion, points taken in index
/// order. Requires at least 3 points, not all collinear, pairwise distinct.
pub fn triangulate(ps: &PointSet) -> Result<Triangulation> {
    triangulate_with_order(ps, &(0..ps.len() as u32).collect::<Vec<_>>())
}

/// Same construction with an explicit insertion order (a permutation of the
/// indices). The result does not depend on the order except through the
/// documented cocircular tie rule.
pub fn triangulate_with_order(ps: &PointSet, order: &[u32]) -> Result<Triangulation> {
    if ps.dim != 2 {
        return Err(Error::InvalidInput("triangulation is planar only".into()));
    }
    let n = ps.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("{n} points, need at least 3")));
    }
    if order.len() != n {
        return Err(Error::InvalidInput("insertion order must be a permutation".into()));
    }
    {
        let mut seen = std::collections::HashSet::new();
        for p in ps.iter() {
            if !seen.insert((p[0].to_bits(), p[1].to_bits())) {
                return Err(Error::Degenerate("duplicate points".into()));
            }
        }
    }
    // first non-collinear triple in insertion order
    let (i0, i1) = (order[0], order[1]);
    let mut k2 = None;
    for (pos, &k) in order.iter().enumerate().skip(2) {
        if orient2d(ps.point(i0 as usize), ps.point(i1 as usize), ps.point(k as usize)) != 0 {
            k2 = Some(pos);
            break;
        }
    }
    let Some(pos2) = k2 else {
        return Err(Error::Degenerate("all points collinear".into()));
    };
    let i2 = order[pos2];
    let mut b = Builder {
        ps,
        tris: Vec::new(),
        alive: Vec::new(),
        edge_owner: HashMap::new(),
    };
    let (a0, a1, a2) =
        if orient2d(ps.point(i0 as usize), ps.point(i1 as usize), ps.point(i2 as usize)) > 0 {
            (i0, i1, i2)
        } else {
            (i0, i2, i1)
        };
    b.push_tri([a0, a1, a2]);
    b.push_tri([a1, a0, GHOST]);
    b.push_tri([a2, a1, GHOST]);
    b.push_tri([a0, a2, GHOST]);
    for (pos, &k) in order.iter().enumerate().skip(2) {
        if pos == pos2 {
            continue;
        }
        b.insert(k)?;
    }
    b.normalize_cocircular()?;

    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut hull_next: HashMap<u32, u32> = HashMap::new();
    for (id, t) in b.tris.iter().enumerate() {
        if !b.alive[id] {
            continue;
        }
        if t[2] == GHOST {
            // ghost owns (u, v); the hull edge runs v -> u counterclockwise
            hull_next.insert(t[1], t[0]);
        } else {
            let mut c = *t;
            let m = (0..3).min_by_key(|&k| c[k]).unwrap();
            c.rotate_left(m);
            triangles.push(c);
        }
    }
    triangles.sort_unstable();
    let mut adjacency = vec![Vec::new(); n];
    for t in &triangles {
        for k in 0..3 {
            let (u, v) = (t[k], t[(k + 1) % 3]);
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
    }
    for l in adjacency.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let mut hull = Vec::with_capacity(hull_next.len());
    if let Some((&start, _)) = hull_next.iter().min_by_key(|(&k, _)| k) {
        let mut cur = start;
        loop {
            hull.push(cur);
            cur = hull_next[&cur];
            if cur == start {
                break;
            }
            if hull.len() > n {
                return Err(Error::Degenerate("hull walk did not close".into()));
            }
        }
    }
    Ok(Triangulation {
        points: ps.clone(),
        triangles,
        adjacency,
        hull,
    })
}

/// Neighbor indices of point `i` in the triangulation, ascending.
pub fn delaunay_neighbors(tri: &Triangulation, i: usize) -> &[u32] {
    tri.neighbors(i)
}
