//! Homogeneous Poisson point processes in balls and annuli, Palm
//! augmentation, and grid-accelerated spatial queries.
//!
//! Intensity is fixed to 1: counts are Poisson with mean equal to the window
//! volume and positions are i.i.d. uniform. Every sample is a pure function
//! of its 64-bit seed (see [`crate::rng`]).

use crate::rng::{stream, Stream};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::collections::HashMap;
use std::fmt::Write as _;

/// Coordinates of one point. Inline storage up to d = 4.
pub type Coords = SmallVec<[f64; 4]>;

/// A point of the process, dimension matches the owning set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Coords,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        Point {
            coords: SmallVec::from_slice(coords),
        }
    }

    pub fn origin(dim: usize) -> Self {
        Point {
            coords: SmallVec::from_elem(0.0, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm2(a).sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Sampling window: a ball, or an annulus `inner <= |x - center| < outer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Window {
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
}

impl Window {
    pub fn ball_at_origin(dim: usize, radius: f64) -> Self {
        Window::Ball {
            center: vec![0.0; dim],
            radius,
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Window::Ball { center, .. } => center,
            Window::Annulus { center, .. } => center,
        }
    }

    pub fn outer_radius(&self) -> f64 {
        match self {
            Window::Ball { radius, .. } => *radius,
            Window::Annulus { outer, .. } => *outer,
        }
    }

    pub fn inner_radius(&self) -> f64 {
        match self {
            Window::Ball { .. } => 0.0,
            Window::Annulus { inner, .. } => *inner,
        }
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!("dimension {dim} < 2")));
        }
        if self.dim() != dim {
            return Err(Error::InvalidInput(format!(
                "window center has dimension {}, expected {dim}",
                self.dim()
            )));
        }
        let (inner, outer) = (self.inner_radius(), self.outer_radius());
        if !outer.is_finite() || outer < 0.0 || inner < 0.0 || inner > outer {
            return Err(Error::InvalidInput(format!(
                "invalid window radii: inner = {inner}, outer = {outer}"
            )));
        }
        if !self.center().iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput("non-finite window center".into()));
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        let d = self.dim();
        let (pi_d, _, _) = geometry_constants(d).expect("window dimension >= 2");
        pi_d * (self.outer_radius().powi(d as i32) - self.inner_radius().powi(d as i32))
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let r2 = dist2(p, self.center());
        let inner = self.inner_radius();
        r2 < self.outer_radius().powi(2) && r2 >= inner * inner
    }
}

/// A realized sample: window, flat coordinate storage, seed provenance.
///
/// Point `i` occupies `coords[i*d .. (i+1)*d]`. Indices are stable and are
/// the tie-breaking order everywhere else in the library. The first
/// `palm_count` points are distinguished Palm atoms, in insertion order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSet {
    pub window: Window,
    pub dim: usize,
    pub seed: u64,
    coords: Vec<f64>,
    pub palm_count: usize,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn from_points(window: Window, dim: usize, seed: u64, pts: &[Point]) -> Result<Self> {
        window.validate(dim)?;
        let mut coords = Vec::with_capacity(pts.len() * dim);
        for p in pts {
            if p.dim() != dim {
                return Err(Error::InvalidInput("point dimension mismatch".into()));
            }
            coords.extend_from_slice(&p.coords);
        }
        Ok(PointSet {
            window,
            dim,
            seed,
            coords,
            palm_count: 0,
        })
    }

    /// CSV with header `x0,x1[,...]`; Palm atoms come first.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for p in self.iter() {
            let row: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Sample a unit-intensity PPP in `window`. Zero-volume windows yield the
/// empty set; invalid windows are rejected.
pub fn sample_ppp(window: &Window, dim: usize, seed: u64) -> Result<PointSet> {
    window.validate(dim)?;
    let mut rng = stream(seed, "ppp", 0);
    let vol = window.volume();
    let n = if vol > 0.0 {
        Poisson::new(vol)
            .map_err(|e| Error::InvalidInput(format!("poisson mean {vol}: {e}")))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let mut coords = Vec::with_capacity(n * dim);
    let mut buf = vec![0.0f64; dim];
    for _ in 0..n {
        sample_in_window(window, &mut rng, &mut buf);
        coords.extend_from_slice(&buf);
    }
    Ok(PointSet {
        window: window.clone(),
        dim,
        seed,
        coords,
        palm_count: 0,
    })
}

/// Uniform draw in the window.
///
/// Balls use rejection from the bounding cube for d <= 4 and polar inversion
/// above; annuli use radial inversion plus an isotropic direction.
fn sample_in_window(window: &Window, rng: &mut Stream, out: &mut [f64]) {
    let d = window.dim();
    match window {
        Window::Ball { center, radius } => {
            if d <= 4 {
                loop {
                    let mut s = 0.0;
                    for x in out.iter_mut() {
                        *x = rng.gen_range(-1.0f64..1.0);
                        s += *x * *x;
                    }
                    if s < 1.0 {
                        break;
                    }
                }
                for (x, c) in out.iter_mut().zip(center) {
                    *x = *x * radius + c;
                }
            } else {
                sample_radial(center, 0.0, *radius, d, rng, out);
            }
        }
        Window::Annulus { center, inner, outer } => {
            sample_radial(center, *inner, *outer, d, rng, out);
        }
    }
}

/// Radius by inverse transform of r^{d-1} on [inner, outer), direction from
/// a normalized Gaussian vector.
fn sample_radial(center: &[f64], inner: f64, outer: f64, d: usize, rng: &mut Stream, out: &mut [f64]) {
    let u: f64 = rng.gen();
    let id = inner.powi(d as i32);
    let od = outer.powi(d as i32);
    let r = (id + u * (od - id)).powf(1.0 / d as f64);
    loop {
        let mut s = 0.0;
        for x in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *x = g;
            s += g * g;
        }
        if s > 0.0 {
            let scale = r / s.sqrt();
            for (x, c) in out.iter_mut().zip(center) {
                *x = *x * scale + c;
            }
            return;
        }
    }
}

/// Add Palm atoms. The returned set lists the atoms first (in insertion
/// order, so the origin conventionally gets index 0), then the original
/// points. Duplicated coordinates are allowed: atoms are distinct by index.
pub fn palm_add(ps: &PointSet, extra: &[Point]) -> Result<PointSet> {
    let d = ps.dim;
    let mut coords = Vec::with_capacity((ps.len() + extra.len()) * d);
    for p in extra {
        if p.dim() != d {
            return Err(Error::InvalidInput("palm atom dimension mismatch".into()));
        }
        let at_origin = p.coords.iter().all(|&c| c == 0.0);
        if !ps.window.contains(&p.coords) && !at_origin {
            return Err(Error::InvalidInput(format!(
                "palm atom {:?} outside window and not the origin",
                p.coords
            )));
        }
        coords.extend_from_slice(&p.coords);
    }
    coords.extend_from_slice(&ps.coords);
    Ok(PointSet {
        window: ps.window.clone(),
        dim: d,
        seed: ps.seed,
        coords,
        palm_count: ps.palm_count + extra.len(),
    })
}

/// Uniform grid over the window's bounding box, cell size ~1.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    dim: usize,
    cell: f64,
    lo: Vec<f64>,
    buckets: HashMap<SmallVec<[i64; 4]>, Vec<u32>>,
    n_points: usize,
}

impl SpatialIndex {
    pub fn build(ps: &PointSet) -> Self {
        let d = ps.dim;
        let cell = 1.0f64;
        let c = ps.window.center();
        let r = ps.window.outer_radius();
        let lo: Vec<f64> = c.iter().map(|x| x - r - cell).collect();
        let mut buckets: HashMap<SmallVec<[i64; 4]>, Vec<u32>> = HashMap::new();
        for (i, p) in ps.iter().enumerate() {
            let key = Self::key(p, &lo, cell);
            buckets.entry(key).or_default().push(i as u32);
        }
        SpatialIndex {
            dim: d,
            cell,
            lo,
            buckets,
            n_points: ps.len(),
        }
    }

    fn key(p: &[f64], lo: &[f64], cell: f64) -> SmallVec<[i64; 4]> {
        p.iter()
            .zip(lo)
            .map(|(x, l)| ((x - l) / cell).floor() as i64)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    /// Indices of points with |P - center| < r, ascending.
    pub fn query_ball(&self, ps: &PointSet, center: &[f64], r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        if r <= 0.0 {
            return out;
        }
        let r2 = r * r;
        let lo_cell: SmallVec<[i64; 4]> = center
            .iter()
            .zip(&self.lo)
            .map(|(x, l)| ((x - r - l) / self.cell).floor() as i64)
            .collect();
        let hi_cell: SmallVec<[i64; 4]> = center
            .iter()
            .zip(&self.lo)
            .map(|(x, l)| ((x + r - l) / self.cell).floor() as i64)
            .collect();
        let mut cursor: SmallVec<[i64; 4]> = lo_cell.clone();
        loop {
            if let Some(bucket) = self.buckets.get(&cursor) {
                for &i in bucket {
                    if dist2(ps.point(i as usize), center) < r2 {
                        out.push(i);
                    }
                }
            }
            // advance the d-dimensional cursor
            let mut axis = 0;
            loop {
                if axis == self.dim {
                    out.sort_unstable();
                    return out;
                }
                cursor[axis] += 1;
                if cursor[axis] <= hi_cell[axis] {
                    break;
                }
                cursor[axis] = lo_cell[axis];
                axis += 1;
            }
        }
    }
}

/// (pi_d, omega_{d-1}, omega_{d-2}): unit-ball volume, unit-sphere area and
/// the area one dimension down. Gamma at integer and half-integer arguments
/// is evaluated exactly.
pub fn geometry_constants(d: usize) -> Result<(f64, f64, f64)> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("dimension {d} < 2")));
    }
    let pi_d = ball_volume_coeff(d);
    let omega_dm1 = sphere_area(d);
    let omega_dm2 = if d == 2 { 2.0 } else { sphere_area(d - 1) };
    Ok((pi_d, omega_dm1, omega_dm2))
}

/// Gamma(n/2) for integer n >= 1, exact via the half-integer recurrence.
fn gamma_half(n: usize) -> f64 {
    if n % 2 == 0 {
        // Gamma(k) = (k-1)!
        let k = n / 2;
        (1..k).map(|i| i as f64).product()
    } else {
        // Gamma(1/2) = sqrt(pi), Gamma(x+1) = x Gamma(x)
        let mut g = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while (x - n as f64 / 2.0).abs() > 1e-9 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// pi^{d/2} / Gamma(d/2 + 1)
fn ball_volume_coeff(d: usize) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d + 2)
}

/// omega_{d-1} = 2 pi^{d/2} / Gamma(d/2)
fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d)
}

/// Parse the points CSV emitted by [`PointSet::to_csv`].
pub fn points_from_csv(text: &str, window: Window, palm_count: usize) -> Result<PointSet> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty points csv".into()))?;
    let dim = header.split(',').count();
    let mut coords = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim {
            return Err(Error::InvalidInput(format!(
                "points csv row {} has {} fields, expected {dim}",
                ln + 2,
                fields.len()
            )));
        }
        for f in fields {
            coords.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad coordinate {f:?}: {e}")))?,
            );
        }
    }
    window.validate(dim)?;
    Ok(PointSet {
        window,
        dim,
        seed: 0,
        coords,
        palm_count,
    })
}

/// Pretty print for diagnostics.
pub fn fmt_point(p: &[f64]) -> String {
    let mut s = String::from("(");
    for (i, c) in p.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{c:.6}");
    }
    s.push(')');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_constants_d2_d3() {
        let (p2, w1, w0) = geometry_constants(2).unwrap();
        assert!((p2 - std::f64::consts::PI).abs() < 1e-14);
        assert!((w1 - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((w0 - 2.0).abs() < 1e-14);
        let (p3, _, w1b) = geometry_constants(3).unwrap();
        assert!((p3 - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
        assert!((w1b - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!(geometry_constants(1).is_err());
    }

    #[test]
    fn sphere_area_identity() {
        // omega_{d-1} = d * pi_d
        for d in 2..=6 {
            let (pi_d, om, _) = geometry_constants(d).unwrap();
            assert!((om - d as f64 * pi_d).abs() < 1e-12 * om);
        }
    }

    #[test]
    fn empty_annulus_has_no_points() {
        let w = Window::Annulus {
            center: vec![0.0, 0.0],
            inner: 1.0,
            outer: 1.0,
        };
        let ps = sample_ppp(&w, 2, 3).unwrap();
        assert_eq!(ps.len(), 0);
    }

    #[test]
    fn invalid_window_rejected() {
        let w = Window::Annulus {
            center: vec![0.0, 0.0],
            inner: 2.0,
            outer: 1.0,
        };
        assert!(sample_ppp(&w, 2, 3).is_err());
        let w = Window::Ball {
            center: vec![0.0, 0.0],
            radius: f64::INFINITY,
        };
        assert!(sample_ppp(&w, 2, 3).is_err());
    }

    #[test]
    fn mean_count_matches_volume() {
        // E N(B(O,1)) = pi for intensity 1; averaged over many seeds.
        let w = Window::ball_at_origin(2, 1.0);
        let reps = 10_000u64;
        let mut total = 0usize;
        for seed in 0..reps {
            total += sample_ppp(&w, 2, seed).unwrap().len();
        }
        let mean = total as f64 / reps as f64;
        let se = (std::f64::consts::PI / reps as f64).sqrt();
        assert!(
            (mean - std::f64::consts::PI).abs() < 3.0 * se,
            "mean {mean} vs pi, se {se}"
        );
    }

    #[test]
    fn count_variance_is_poisson() {
        // Var N(B(O,10)) = 100 pi; 10^4-rep Monte Carlo.
        let w = Window::ball_at_origin(2, 10.0);
        let reps = 10_000u64;
        let counts: Vec<f64> = (0..reps)
            .map(|seed| sample_ppp(&w, 2, seed + 1_000_000).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (reps - 1) as f64;
        let expected = 100.0 * std::f64::consts::PI;
        // sampling rel. error of a variance estimate is ~ sqrt(2/n)
        let tol = 3.0 * (2.0 / reps as f64).sqrt() * expected;
        assert!((var - expected).abs() < tol, "var {var} vs {expected}");
    }

    #[test]
    fn samples_inside_window_and_reproducible() {
        let w = Window::Annulus {
            center: vec![1.0, -2.0],
            inner: 2.0,
            outer: 5.0,
        };
        let a = sample_ppp(&w, 2, 42).unwrap();
        let b = sample_ppp(&w, 2, 42).unwrap();
        assert_eq!(a.coords, b.coords);
        for p in a.iter() {
            assert!(w.contains(p));
        }
        let c = sample_ppp(&Window::ball_at_origin(5, 2.0), 5, 9).unwrap();
        for p in c.iter() {
            assert!(c.window.contains(p));
        }
    }

    #[test]
    fn palm_add_puts_atoms_first() {
        let w = Window::ball_at_origin(2, 3.0);
        let ps = sample_ppp(&w, 2, 5).unwrap();
        let n = ps.len();
        let o = Point::origin(2);
        let x = Point::new(&[1.0, 1.0]);
        let with_o = palm_add(&ps, &[o.clone()]).unwrap();
        assert_eq!(with_o.len(), n + 1);
        assert_eq!(with_o.point(0), &[0.0, 0.0]);
        assert_eq!(with_o.palm_count, 1);
        let with_ox = palm_add(&ps, &[o, x]).unwrap();
        assert_eq!(with_ox.len(), n + 2);
        assert_eq!(with_ox.point(1), &[1.0, 1.0]);
        // empty set + origin atom
        let empty = PointSet::from_points(w, 2, 0, &[]).unwrap();
        let single = palm_add(&empty, &[Point::origin(2)]).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn query_ball_matches_linear_scan() {
        let w = Window::ball_at_origin(2, 20.0);
        let ps = sample_ppp(&w, 2, 11).unwrap();
        assert!(ps.len() > 900, "need ~10^3 points, got {}", ps.len());
        let idx = SpatialIndex::build(&ps);
        let mut rng = stream(11, "query-ball-test", 0);
        for _ in 0..50 {
            let cx = rng.gen_range(-25.0f64..25.0);
            let cy = rng.gen_range(-25.0f64..25.0);
            let r = rng.gen_range(0.0f64..12.0);
            let center = [cx, cy];
            let got = idx.query_ball(&ps, &center, r);
            let want: Vec<u32> = (0..ps.len() as u32)
                .filter(|&i| dist2(ps.point(i as usize), &center) < r * r)
                .collect();
            assert_eq!(got, want);
        }
        // r = 0 and far-away centers are empty
        assert!(idx.query_ball(&ps, &[0.0, 0.0], 0.0).is_empty());
        assert!(idx.query_ball(&ps, &[100.0, 100.0], 1.0).is_empty());
    }

    #[test]
    fn disjoint_region_counts_independent() {
        // Chi-square on pairwise correlations of quadrant counts,
        // 10^3 replications, 1% level.
        let w = Window::ball_at_origin(2, 10.0);
        let reps = 1000usize;
        let mut quad_counts = vec![[0f64; 4]; reps];
        for (rep, qc) in quad_counts.iter_mut().enumerate() {
            let ps = sample_ppp(&w, 2, 77_000 + rep as u64).unwrap();
            for p in ps.iter() {
                let q = match (p[0] >= 0.0, p[1] >= 0.0) {
                    (true, true) => 0,
                    (false, true) => 1,
                    (false, false) => 2,
                    (true, false) => 3,
                };
                qc[q] += 1.0;
            }
        }
        let n = reps as f64;
        let mean = |k: usize| quad_counts.iter().map(|q| q[k]).sum::<f64>() / n;
        let means: Vec<f64> = (0..4).map(mean) .collect();
        let sd = |k: usize| {
            (quad_counts
                .iter()
                .map(|q| (q[k] - means[k]).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        };
        let sds: Vec<f64> = (0..4).map(sd).collect();
        let mut chi2 = 0.0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                let cov = quad_counts
                    .iter()
                    .map(|q| (q[a] - means[a]) * (q[b] - means[b]))
                    .sum::<f64>()
                    / (n - 1.0);
                let r = cov / (sds[a] * sds[b]);
                chi2 += n * r * r;
            }
        }
        // chi^2(6) 1% critical value
        assert!(chi2 < 16.812, "independence chi2 = {chi2}");
    }

    #[test]
    fn csv_roundtrip() {
        let w = Window::ball_at_origin(2, 2.0);
        let ps = sample_ppp(&w, 2, 123).unwrap();
        let ps = palm_add(&ps, &[Point::origin(2)]).unwrap();
        let csv = ps.to_csv();
        assert!(csv.starts_with("x0,x1\n0,0\n"));
        let back = points_from_csv(&csv, ps.window.clone(), 1).unwrap();
        assert_eq!(back.len(), ps.len());
        for i in 0..ps.len() {
            assert_eq!(back.point(i), ps.point(i));
        }
    }
}
