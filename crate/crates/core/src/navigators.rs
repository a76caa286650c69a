//! Navigation rules over point processes: long-range greedy hops with an
//! exact lazily-constructed environment, a fully realized dense variant used
//! as a cross-validation oracle, radial nearest-neighbor steps, and compass
//! steps on a Delaunay triangulation.
//!
//! Lazy construction. Conditionally on the visited path `X_0..X_{k-1}` and
//! everything revealed so far, the unexplored part of the search region of
//! `X_k` is a Poisson process thinned by
//! `lambda_k(x) = prod_{l<k} (1 - f(|x - X_l|))`, because each earlier step
//! conditioned on its own edge coins. A step therefore draws the fresh
//! neighbor set as a Poisson process of intensity `f(|x - X_k|) lambda_k(x)`
//! (dominating radial sampling around `X_k`, region membership by rejection,
//! then `lambda_k` thinning), flips the memoized coin against the origin
//! atom, and rejection-resamples the whole draw until the candidate set is
//! nonempty.

use crate::delaunay::Triangulation;
use crate::point_process::{dist2, dot, norm, norm2, PointSet, SpatialIndex};
use crate::rng::{stream, Stream};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::collections::HashMap;

/// Long-range connection model: d, tail exponent beta, scale c. The edge
/// probability at distance t is `f(t) = min(1, c t^-beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub beta: f64,
    pub c: f64,
}

impl ModelParams {
    pub fn new(d: usize, beta: f64, c: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!("dimension {d} < 2")));
        }
        if !(beta > 0.0 && beta.is_finite() && c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need beta > 0 and c > 0, got beta = {beta}, c = {c}"
            )));
        }
        Ok(ModelParams { d, beta, c })
    }

    /// Edge probability at distance t.
    #[inline]
    pub fn f(&self, t: f64) -> f64 {
        if t <= self.r0() {
            1.0
        } else {
            self.c * t.powf(-self.beta)
        }
    }

    /// Radius below which f saturates at 1.
    #[inline]
    pub fn r0(&self) -> f64 {
        self.c.powf(1.0 / self.beta)
    }

    /// Distance beyond which `1 - f(t)` rounds to exactly 1.0 in f64, so the
    /// thinning factor of a path point farther than this is exactly neutral.
    pub fn thinning_cutoff(&self) -> f64 {
        (self.c * 2f64.powi(53)).powf(1.0 / self.beta)
    }

    /// `integral_0^r f(s) s^{d-1} ds` in closed form.
    pub fn radial_mass(&self, r: f64) -> f64 {
        let d = self.d as f64;
        let r0 = self.r0();
        if r <= r0 {
            return r.powf(d) / d;
        }
        let head = r0.powf(d) / d;
        if (self.beta - d).abs() < 1e-12 {
            head + self.c * (r / r0).ln()
        } else {
            head + self.c * (r.powf(d - self.beta) - r0.powf(d - self.beta)) / (d - self.beta)
        }
    }

    /// Inverse of [`Self::radial_mass`].
    pub fn radial_mass_inv(&self, m: f64) -> f64 {
        let d = self.d as f64;
        let r0 = self.r0();
        let head = r0.powf(d) / d;
        if m <= head {
            return (d * m).powf(1.0 / d);
        }
        if (self.beta - d).abs() < 1e-12 {
            r0 * ((m - head) / self.c).exp()
        } else {
            let v = r0.powf(d - self.beta) + (m - head) * (d - self.beta) / self.c;
            debug_assert!(v > 0.0, "radial mass inverse beyond total mass");
            v.powf(1.0 / (d - self.beta))
        }
    }

    /// `integral_r^inf f(s) s^{d-1} ds`, finite only for beta > d.
    pub fn radial_mass_tail(&self, r: f64) -> f64 {
        let d = self.d as f64;
        debug_assert!(self.beta > d, "radial tail diverges for beta <= d");
        let r0 = self.r0();
        if r >= r0 {
            self.c * r.powf(d - self.beta) / (self.beta - d)
        } else {
            (r0.powf(d) - r.powf(d)) / d + self.c * r0.powf(d - self.beta) / (self.beta - d)
        }
    }

    /// Total mass `integral of f(|x|) dx` over the whole space (beta > d).
    pub fn total_mass(&self) -> f64 {
        let (_, omega, _) = crate::point_process::geometry_constants(self.d).expect("validated d");
        omega * self.radial_mass_tail(0.0)
    }

    /// Radius at which the remaining mass of f drops below `eps` (beta > d).
    pub fn mass_truncation_radius(&self, eps: f64) -> f64 {
        let d = self.d as f64;
        debug_assert!(self.beta > d);
        let (_, omega, _) = crate::point_process::geometry_constants(self.d).expect("validated d");
        self.r0()
            .max((omega * self.c / ((self.beta - d) * eps)).powf(1.0 / (self.beta - d)))
    }

    /// Edge probability from a squared distance.
    #[inline]
    pub fn f_from_dist2(&self, d2: f64) -> f64 {
        self.evaluator().f_d2(d2)
    }

    /// Precomputed profile evaluator for tight loops (integer half-exponents
    /// avoid `powf`).
    pub fn evaluator(&self) -> ProfileEval {
        let r0 = self.r0();
        let half = 0.5 * self.beta;
        ProfileEval {
            r0_sq: r0 * r0,
            c: self.c,
            half_beta: half,
            int_pow: if half.fract() == 0.0 && half <= 32.0 {
                Some(half as i32)
            } else {
                None
            },
        }
    }
}

/// Cached form of the edge-probability profile.
#[derive(Debug, Clone, Copy)]
pub struct ProfileEval {
    r0_sq: f64,
    c: f64,
    half_beta: f64,
    int_pow: Option<i32>,
}

impl ProfileEval {
    #[inline]
    pub fn f_d2(&self, d2: f64) -> f64 {
        if d2 <= self.r0_sq {
            return 1.0;
        }
        match self.int_pow {
            Some(k) => self.c / d2.powi(k),
            None => self.c * d2.powf(-self.half_beta),
        }
    }
}

/// Navigation mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    TowardOrigin,
    Directed { e1: Vec<f64> },
}

impl Mode {
    pub fn directed(e1: &[f64]) -> Result<Self> {
        let n = norm(e1);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidInput("direction must be a nonzero vector".into()));
        }
        Ok(Mode::Directed {
            e1: e1.iter().map(|x| x / n).collect(),
        })
    }
}

/// Run limits for a navigation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NavLimits {
    pub max_steps: usize,
    pub max_realized: usize,
    pub rejection_cap: u64,
}

impl Default for NavLimits {
    fn default() -> Self {
        NavLimits {
            max_steps: 1_000_000,
            max_realized: 200_000_000,
            rejection_cap: 1_000_000,
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    AbsorbedAtOrigin,
    DirectionEscape,
    StepLimit,
}

/// A finished (or truncated) navigation path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Path {
    pub dim: usize,
    /// flat coordinates, one point per step
    pub coords: Vec<f64>,
    /// per-step progress (norm drop toward the origin, or directed gain)
    pub progress: Vec<f64>,
    /// per-step scaled progress `-ln(|X_{k+1}|/|X_k|)`; infinity on the
    /// absorbing step, NaN where a norm vanishes in directed runs
    pub scaled_progress: Vec<f64>,
    pub termination: Termination,
    pub diagnostics: NavDiagnostics,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NavDiagnostics {
    pub rejection_rounds: u64,
    pub realized_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
    /// dominating draws accepted into the search region, per draws proposed
    pub region_acceptance: Option<(u64, u64)>,
}

impl Path {
    pub fn hops(&self) -> usize {
        self.len() - 1
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.point(self.len() - 1)
    }

    /// CSV `step,x0,..,progress,scaled_progress`; the last row has empty
    /// progress fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,");
        out.push_str(
            &(0..self.dim)
                .map(|i| format!("x{i}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push_str(",progress,scaled_progress\n");
        for k in 0..self.len() {
            let coords = self
                .point(k)
                .iter()
                .map(|c| format!("{c}"))
                .collect::<Vec<_>>()
                .join(",");
            if k < self.progress.len() {
                out.push_str(&format!(
                    "{k},{coords},{},{}\n",
                    self.progress[k], self.scaled_progress[k]
                ));
            } else {
                out.push_str(&format!("{k},{coords},,\n"));
            }
        }
        out
    }

    /// JSON sidecar with the termination flag and diagnostics.
    pub fn sidecar_json(&self) -> String {
        serde_json::json!({
            "termination": self.termination,
            "hops": self.hops(),
            "diagnostics": self.diagnostics,
        })
        .to_string()
    }
}

/// Scaled progress of a step: `-ln(|next|/|X|)`, with +infinity when the
/// step lands on the origin.
pub fn scaled_progress(x: &[f64], next: &[f64]) -> f64 {
    let nx = norm(x);
    assert!(nx > 0.0, "scaled progress needs |X| > 0");
    let nn = norm(next);
    if nn == 0.0 {
        f64::INFINITY
    } else {
        -(nn / nx).ln()
    }
}

/// Memo of edge coins keyed by unordered realized-point index pair, plus
/// per-step rejection-round counters.
#[derive(Debug, Clone, Default)]
pub struct EdgeOracle {
    coins: HashMap<(u32, u32), f64>,
    pub rounds_per_step: Vec<u64>,
}

impl EdgeOracle {
    fn key(i: u32, j: u32) -> (u32, u32) {
        (i.min(j), i.max(j))
    }

    pub fn get(&self, i: u32, j: u32) -> Option<f64> {
        self.coins.get(&Self::key(i, j)).copied()
    }

    pub fn set(&mut self, i: u32, j: u32, u: f64) {
        self.coins.insert(Self::key(i, j), u);
    }

    /// Return the memoized coin or flip (and record) a fresh one.
    pub fn coin(&mut self, i: u32, j: u32, rng: &mut Stream) -> f64 {
        let key = Self::key(i, j);
        *self.coins.entry(key).or_insert_with(|| rng.gen::<f64>())
    }

    pub fn len(&self) -> usize {
        self.coins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coins.is_empty()
    }
}

/// Lazily constructed navigation environment.
///
/// `realized` holds, in order: the origin atom (index 0, toward-origin mode
/// only), the start point, then every fresh neighbor revealed by the run.
/// The thinning registry is the visited path itself.
pub struct NavState {
    pub params: ModelParams,
    pub mode: Mode,
    pub limits: NavLimits,
    dim: usize,
    realized: Vec<f64>,
    created_at: Vec<u32>,
    /// indices into `realized` of X_0..X_k
    pub path: Vec<u32>,
    pub oracle: EdgeOracle,
    rng: Stream,
    pub diag: NavDiagnostics,
    dominating_poisson: Option<Poisson<f64>>,
    /// first path index whose thinning factor can still differ from 1
    lambda_window_start: usize,
    eval: ProfileEval,
    thin_cutoff2: f64,
}

impl NavState {
    /// Toward-origin run from `start`; realized index 0 is the origin atom.
    pub fn toward_origin(params: ModelParams, start: &[f64], seed: u64, limits: NavLimits) -> Result<Self> {
        if start.len() != params.d {
            return Err(Error::InvalidInput("start dimension mismatch".into()));
        }
        let dim = params.d;
        let mut realized = vec![0.0; dim];
        realized.extend_from_slice(start);
        let eval = params.evaluator();
        let cutoff = params.thinning_cutoff();
        Ok(NavState {
            params,
            mode: Mode::TowardOrigin,
            limits,
            dim,
            realized,
            created_at: vec![0, 0],
            path: vec![1],
            oracle: EdgeOracle::default(),
            rng: stream(seed, "nav-lazy", 0),
            diag: NavDiagnostics::default(),
            dominating_poisson: None,
            lambda_window_start: 0,
            eval,
            thin_cutoff2: cutoff * cutoff,
        })
    }

    /// Directed run (beta > d) starting at the origin of coordinates.
    pub fn directed(params: ModelParams, e1: &[f64], seed: u64, limits: NavLimits) -> Result<Self> {
        if params.beta <= params.d as f64 {
            return Err(Error::InvalidInput(format!(
                "directed navigation needs beta > d, got beta = {}, d = {}",
                params.beta, params.d
            )));
        }
        let mode = Mode::directed(e1)?;
        let dim = params.d;
        let trunc = params.mass_truncation_radius(1e-12);
        let mass = {
            let (_, omega, _) = crate::point_process::geometry_constants(dim)?;
            omega * (params.radial_mass_tail(0.0) - params.radial_mass_tail(trunc))
        };
        let eval = params.evaluator();
        let cutoff = params.thinning_cutoff();
        Ok(NavState {
            params,
            mode,
            limits,
            dim,
            realized: vec![0.0; dim],
            created_at: vec![0],
            path: vec![0],
            oracle: EdgeOracle::default(),
            rng: stream(seed, "nav-lazy", 0),
            diag: NavDiagnostics {
                truncation_radius: Some(trunc),
                ..Default::default()
            },
            dominating_poisson: Some(
                Poisson::new(mass).map_err(|e| Error::InvalidInput(format!("dominating mass: {e}")))?,
            ),
            lambda_window_start: 0,
            eval,
            thin_cutoff2: cutoff * cutoff,
        })
    }

    pub fn realized_len(&self) -> usize {
        self.realized.len() / self.dim
    }

    pub fn realized_point(&self, i: usize) -> &[f64] {
        &self.realized[i * self.dim..(i + 1) * self.dim]
    }

    pub fn current(&self) -> &[f64] {
        self.realized_point(*self.path.last().unwrap() as usize)
    }

    fn step_index(&self) -> usize {
        self.path.len() - 1
    }

    /// Thinning weight `lambda_k(x)` of the visited path at `x`; exact in
    /// f64 because factors of points beyond the cutoff are exactly 1.0.
    fn lambda(&self, x: &[f64]) -> f64 {
        let mut w = 1.0;
        let k = self.step_index();
        for &pi in &self.path[self.lambda_window_start..k] {
            let p = &self.realized[pi as usize * self.dim..(pi as usize + 1) * self.dim];
            let d2 = dist2(x, p);
            if d2 > self.thin_cutoff2 {
                continue;
            }
            w *= 1.0 - self.eval.f_d2(d2);
            if w == 0.0 {
                return 0.0;
            }
        }
        w
    }

    /// Advance the start of the thinning window: path points separated from
    /// every future candidate by more than the cutoff contribute factor 1.
    fn advance_lambda_window(&mut self) {
        let cutoff = self.params.thinning_cutoff();
        let k = self.step_index();
        match &self.mode {
            Mode::TowardOrigin => {
                let cur_norm = norm(self.current());
                while self.lambda_window_start < k {
                    let pi = self.path[self.lambda_window_start] as usize;
                    let pn = norm(&self.realized[pi * self.dim..(pi + 1) * self.dim]);
                    // any candidate has norm < |X_k| <= |X_l|
                    if pn - cur_norm > cutoff {
                        self.lambda_window_start += 1;
                    } else {
                        break;
                    }
                }
            }
            Mode::Directed { e1 } => {
                let cur_proj = dot(self.current(), e1);
                while self.lambda_window_start < k {
                    let pi = self.path[self.lambda_window_start] as usize;
                    let proj = dot(&self.realized[pi * self.dim..(pi + 1) * self.dim], e1);
                    if cur_proj - proj > cutoff {
                        self.lambda_window_start += 1;
                    } else {
                        break;
                    }
                }
            }
        }
    }

    /// One conditioned neighbor draw at the current point. Fresh points are
    /// appended to the realized set; returns their indices plus the origin
    /// atom when its coin succeeded. Errors if the rejection cap is hit.
    pub fn sample_neighbors(&mut self) -> Result<Vec<u32>> {
        let cur_idx = *self.path.last().unwrap();
        let cur: SmallVec<[f64; 4]> = SmallVec::from_slice(self.current());
        let cur_norm = norm(&cur);
        if matches!(self.mode, Mode::TowardOrigin) && cur_norm == 0.0 {
            return Err(Error::InvalidInput(
                "neighbor draw at the origin: navigation already absorbed".into(),
            ));
        }
        self.advance_lambda_window();

        // dominating radial mass over the region's enclosing ball
        let (r_hi, mass, atom_p) = match &self.mode {
            Mode::TowardOrigin => {
                let r_hi = 2.0 * cur_norm;
                let (_, omega, _) = crate::point_process::geometry_constants(self.dim)?;
                (r_hi, omega * self.params.radial_mass(r_hi), self.params.f(cur_norm))
            }
            Mode::Directed { .. } => {
                let trunc = self.diag.truncation_radius.unwrap();
                (trunc, 0.0, 0.0) // mass handled by the cached distribution
            }
        };
        let poisson = match &self.mode {
            Mode::Directed { .. } => self.dominating_poisson.clone().unwrap(),
            Mode::TowardOrigin => Poisson::new(mass)
                .map_err(|e| Error::InvalidInput(format!("dominating mass {mass}: {e}")))?,
        };
        let total_radial = self.params.radial_mass(r_hi);

        let mut rounds: u64 = 0;
        loop {
            rounds += 1;
            if rounds > self.limits.rejection_cap {
                self.oracle.rounds_per_step.push(rounds - 1);
                return Err(Error::ConditioningFailure {
                    rounds: rounds - 1,
                    point: cur.to_vec(),
                    norm: cur_norm,
                });
            }
            let mut accepted: Vec<f64> = Vec::new();
            let mut atom_coin: Option<f64> = None;
            if matches!(self.mode, Mode::TowardOrigin) {
                let u = self.rng.gen::<f64>();
                if u <= atom_p {
                    atom_coin = Some(u);
                }
            }
            let k = poisson.sample(&mut self.rng) as u64;
            let mut proposed = 0u64;
            let mut in_region = 0u64;
            let mut pos: SmallVec<[f64; 4]> = SmallVec::from_elem(0.0, self.dim);
            for _ in 0..k {
                proposed += 1;
                let r = self.params.radial_mass_inv(self.rng.gen::<f64>() * total_radial);
                self.sample_direction_times(r, &mut pos);
                for (p, c) in pos.iter_mut().zip(cur.iter()) {
                    *p += c;
                }
                let ok = match &self.mode {
                    Mode::TowardOrigin => norm2(&pos) < cur_norm * cur_norm,
                    Mode::Directed { e1 } => dot(&pos, e1) > dot(&cur, e1),
                };
                if !ok {
                    continue;
                }
                in_region += 1;
                let w = self.lambda(&pos);
                if w < 1.0 && self.rng.gen::<f64>() >= w {
                    continue;
                }
                accepted.extend_from_slice(&pos);
            }
            if let Some((acc, prop)) = &mut self.diag.region_acceptance {
                *acc += in_region;
                *prop += proposed;
            } else {
                self.diag.region_acceptance = Some((in_region, proposed));
            }
            if accepted.is_empty() && atom_coin.is_none() {
                continue; // conditioning: the candidate set must be nonempty
            }
            // commit the draw
            self.diag.rejection_rounds += rounds - 1;
            self.oracle.rounds_per_step.push(rounds - 1);
            let mut result = Vec::new();
            if let Some(u) = atom_coin {
                self.oracle.set(cur_idx, 0, u);
                result.push(0u32);
            }
            let n_new = accepted.len() / self.dim;
            let base = self.realized_len() as u32;
            let step = self.step_index() as u32;
            self.realized.extend_from_slice(&accepted);
            self.created_at.extend(std::iter::repeat(step).take(n_new));
            result.extend(base..base + n_new as u32);
            self.diag.realized_points = self.realized_len();
            if self.realized_len() > self.limits.max_realized {
                return Err(Error::InvalidInput(format!(
                    "realized-point budget exceeded: {} > {}",
                    self.realized_len(),
                    self.limits.max_realized
                )));
            }
            return Ok(result);
        }
    }

    fn sample_direction_times(&mut self, r: f64, out: &mut [f64]) {
        if self.dim == 2 {
            let phi = self.rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            out[0] = r * phi.cos();
            out[1] = r * phi.sin();
        } else {
            loop {
                let mut s = 0.0;
                for x in out.iter_mut() {
                    let g: f64 = rand_distr::StandardNormal.sample(&mut self.rng);
                    *x = g;
                    s += g * g;
                }
                if s > 0.0 {
                    let scale = r / s.sqrt();
                    for x in out.iter_mut() {
                        *x *= scale;
                    }
                    return;
                }
            }
        }
    }

    /// Greedy toward-origin step: draw neighbors, move to the one of minimal
    /// norm (the origin atom wins whenever its coin succeeds). Returns the
    /// chosen realized index.
    pub fn small_world_step(&mut self) -> Result<u32> {
        if !matches!(self.mode, Mode::TowardOrigin) {
            return Err(Error::InvalidInput("toward-origin step in directed mode".into()));
        }
        let cands = self.sample_neighbors()?;
        let chosen = select_min_norm(&cands, |i| self.realized_point(i as usize));
        self.path.push(chosen);
        Ok(chosen)
    }

    /// Directed step: move to the neighbor of maximal directed coordinate.
    pub fn small_world_directed_step(&mut self) -> Result<u32> {
        let e1 = match &self.mode {
            Mode::Directed { e1 } => e1.clone(),
            Mode::TowardOrigin => {
                return Err(Error::InvalidInput("directed step in toward-origin mode".into()))
            }
        };
        let cands = self.sample_neighbors()?;
        let chosen = select_max_proj(&cands, &e1, |i| self.realized_point(i as usize));
        self.path.push(chosen);
        Ok(chosen)
    }

    /// Run to absorption (toward-origin) or to the step limit (directed).
    pub fn run(&mut self) -> Result<Path> {
        loop {
            if self.path.len() - 1 >= self.limits.max_steps {
                return Ok(self.finish(Termination::StepLimit));
            }
            match &self.mode {
                Mode::TowardOrigin => {
                    if norm(self.current()) == 0.0 {
                        return Ok(self.finish(Termination::AbsorbedAtOrigin));
                    }
                    self.small_world_step()?;
                }
                Mode::Directed { .. } => {
                    self.small_world_directed_step()?;
                }
            }
        }
    }

    fn finish(&self, termination: Termination) -> Path {
        let mut coords = Vec::with_capacity(self.path.len() * self.dim);
        for &i in &self.path {
            coords.extend_from_slice(self.realized_point(i as usize));
        }
        path_from_coords(self.dim, coords, &self.mode, termination, self.diag.clone())
    }

    /// Current path as a [`Path`] without consuming the state.
    pub fn snapshot(&self, termination: Termination) -> Path {
        self.finish(termination)
    }
}

fn path_from_coords(
    dim: usize,
    coords: Vec<f64>,
    mode: &Mode,
    termination: Termination,
    diagnostics: NavDiagnostics,
) -> Path {
    let n = coords.len() / dim;
    let mut progress = Vec::with_capacity(n.saturating_sub(1));
    let mut scaled = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        let a = &coords[k * dim..(k + 1) * dim];
        let b = &coords[(k + 1) * dim..(k + 2) * dim];
        let (na, nb) = (norm(a), norm(b));
        match mode {
            Mode::TowardOrigin => progress.push(na - nb),
            Mode::Directed { e1 } => progress.push(dot(b, e1) - dot(a, e1)),
        }
        scaled.push(if na > 0.0 {
            if nb == 0.0 {
                f64::INFINITY
            } else {
                -(nb / na).ln()
            }
        } else {
            f64::NAN
        });
    }
    Path {
        dim,
        coords,
        progress,
        scaled_progress: scaled,
        termination,
        diagnostics,
    }
}

/// Minimal-norm candidate, ties by lowest index.
pub fn select_min_norm<'a, F: Fn(u32) -> &'a [f64]>(cands: &[u32], coords: F) -> u32 {
    let mut best = cands[0];
    let mut best_n = norm2(coords(best));
    for &i in &cands[1..] {
        let n = norm2(coords(i));
        if n < best_n || (n == best_n && i < best) {
            best = i;
            best_n = n;
        }
    }
    best
}

/// Maximal-projection candidate, ties by lowest index.
pub fn select_max_proj<'a, F: Fn(u32) -> &'a [f64]>(cands: &[u32], e1: &[f64], coords: F) -> u32 {
    let mut best = cands[0];
    let mut best_p = dot(coords(best), e1);
    for &i in &cands[1..] {
        let p = dot(coords(i), e1);
        if p > best_p || (p == best_p && i < best) {
            best = i;
            best_p = p;
        }
    }
    best
}

/// Fully realized environment over a Palm-augmented sample (origin at
/// index 0). Used as the cross-validation oracle for the lazy construction.
pub struct DenseEnv<'a> {
    pub params: &'a ModelParams,
    pub ps: &'a PointSet,
    pub oracle: EdgeOracle,
    rng: Stream,
    rejection_cap: u64,
}

impl<'a> DenseEnv<'a> {
    pub fn new(params: &'a ModelParams, ps: &'a PointSet, seed: u64) -> Result<Self> {
        if ps.palm_count < 1 || ps.point(0).iter().any(|&c| c != 0.0) {
            return Err(Error::InvalidInput(
                "dense environment needs the origin as Palm atom 0".into(),
            ));
        }
        Ok(DenseEnv {
            params,
            ps,
            oracle: EdgeOracle::default(),
            rng: stream(seed, "nav-dense", 0),
            rejection_cap: NavLimits::default().rejection_cap,
        })
    }

    /// Conditioned neighbor set of point `i` inside B(O, |X_i|): coins
    /// against every strictly closer-to-origin point, resampled jointly
    /// until nonempty.
    pub fn neighbors_toward_origin(&mut self, i: u32) -> Result<Vec<u32>> {
        let x = self.ps.point(i as usize);
        let nx2 = norm2(x);
        let cands: Vec<u32> = (0..self.ps.len() as u32)
            .filter(|&j| j != i && norm2(self.ps.point(j as usize)) < nx2)
            .collect();
        let mut rounds = 0u64;
        loop {
            rounds += 1;
            if rounds > self.rejection_cap {
                return Err(Error::ConditioningFailure {
                    rounds: rounds - 1,
                    point: x.to_vec(),
                    norm: nx2.sqrt(),
                });
            }
            let mut hit = Vec::new();
            let mut coins = Vec::new();
            for &j in &cands {
                let u = self.rng.gen::<f64>();
                coins.push(u);
                if u <= self.params.f(crate::point_process::dist(x, self.ps.point(j as usize))) {
                    hit.push(j);
                }
            }
            if hit.is_empty() {
                continue;
            }
            for (&j, &u) in cands.iter().zip(&coins) {
                self.oracle.set(i, j, u);
            }
            self.oracle.rounds_per_step.push(rounds - 1);
            return Ok(hit);
        }
    }

    /// Full toward-origin run from the set point nearest to `start`.
    pub fn navigate_toward_origin(&mut self, start_idx: u32, limits: &NavLimits) -> Result<Path> {
        let dim = self.ps.dim;
        let mut path_idx = vec![start_idx];
        let mut coords: Vec<f64> = self.ps.point(start_idx as usize).to_vec();
        let mut diag = NavDiagnostics::default();
        loop {
            let cur = *path_idx.last().unwrap();
            if norm2(self.ps.point(cur as usize)) == 0.0 {
                return Ok(path_from_coords(
                    dim,
                    coords,
                    &Mode::TowardOrigin,
                    Termination::AbsorbedAtOrigin,
                    diag,
                ));
            }
            if path_idx.len() - 1 >= limits.max_steps {
                return Ok(path_from_coords(
                    dim,
                    coords,
                    &Mode::TowardOrigin,
                    Termination::StepLimit,
                    diag,
                ));
            }
            let nbrs = self.neighbors_toward_origin(cur)?;
            diag.rejection_rounds += self.oracle.rounds_per_step.last().copied().unwrap_or(0);
            let next = select_min_norm(&nbrs, |j| self.ps.point(j as usize));
            path_idx.push(next);
            coords.extend_from_slice(self.ps.point(next as usize));
        }
    }
}

/// Radial step: the point of the search region nearest to X. Toward-origin
/// searches B(O, |X|); directed searches the open half-space ahead of X.
/// Exact ties break by index.
pub fn radial_step(
    ps: &PointSet,
    index: &SpatialIndex,
    x_idx: u32,
    mode: &Mode,
) -> Result<u32> {
    let x = ps.point(x_idx as usize);
    let nx2 = norm2(x);
    let in_region = |j: u32| -> bool {
        if j == x_idx {
            return false;
        }
        let y = ps.point(j as usize);
        match mode {
            Mode::TowardOrigin => norm2(y) < nx2,
            Mode::Directed { e1 } => dot(y, e1) > dot(x, e1),
        }
    };
    let max_r = 2.0 * ps.window.outer_radius() + 2.0 * norm(x) + 1.0;
    let mut r = 1.0f64;
    loop {
        let hits = index.query_ball(ps, x, r);
        let mut best: Option<(f64, u32)> = None;
        for j in hits {
            if !in_region(j) {
                continue;
            }
            let d2 = dist2(ps.point(j as usize), x);
            match best {
                Some((bd, bj)) if d2 > bd || (d2 == bd && j > bj) => {}
                _ => best = Some((d2, j)),
            }
        }
        if let Some((d2, j)) = best {
            if d2.sqrt() < r {
                return Ok(j);
            }
        }
        r *= 2.0;
        if r > max_r {
            return match best {
                Some((_, j)) => Ok(j),
                None => Err(Error::BoundaryExhaustion(x.to_vec())),
            };
        }
    }
}

/// Full radial navigation from a set point.
pub fn navigate_radial(
    ps: &PointSet,
    index: &SpatialIndex,
    start_idx: u32,
    mode: &Mode,
    limits: &NavLimits,
) -> Result<Path> {
    let dim = ps.dim;
    let mut cur = start_idx;
    let mut coords: Vec<f64> = ps.point(cur as usize).to_vec();
    let mut steps = 0usize;
    loop {
        match mode {
            Mode::TowardOrigin => {
                if norm2(ps.point(cur as usize)) == 0.0 {
                    return Ok(path_from_coords(
                        dim,
                        coords,
                        mode,
                        Termination::AbsorbedAtOrigin,
                        NavDiagnostics::default(),
                    ));
                }
            }
            Mode::Directed { .. } => {}
        }
        if steps >= limits.max_steps {
            return Ok(path_from_coords(
                dim,
                coords,
                mode,
                Termination::StepLimit,
                NavDiagnostics::default(),
            ));
        }
        match radial_step(ps, index, cur, mode) {
            Ok(next) => {
                cur = next;
                coords.extend_from_slice(ps.point(cur as usize));
                steps += 1;
            }
            Err(Error::BoundaryExhaustion(_)) if matches!(mode, Mode::Directed { .. }) => {
                return Ok(path_from_coords(
                    dim,
                    coords,
                    mode,
                    Termination::DirectionEscape,
                    NavDiagnostics::default(),
                ));
            }
            Err(e) => return Err(e),
        }
    }
}

/// Sign convention for the directed compass rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectedSign {
    /// maximize <e1, (X - Y)/|X - Y|>: steps anti-align with e1
    Literal,
    /// maximize <e1, (Y - X)/|Y - X|>: steps align with e1
    Aligned,
}

/// Compass step on a planar triangulation whose point 0 is the origin:
/// toward-origin picks the Delaunay neighbor best aligned with the ray from
/// X to O; directed mode uses the `DirectedSign` convention. Ties break by
/// index.
pub fn compass_step(
    tri: &Triangulation,
    x_idx: u32,
    mode: &Mode,
    sign: DirectedSign,
) -> Result<u32> {
    let x = tri.points.point(x_idx as usize);
    let nbrs = tri.neighbors(x_idx as usize);
    if nbrs.is_empty() {
        return Err(Error::Degenerate(format!("vertex {x_idx} has no neighbors")));
    }
    let score = |j: u32| -> f64 {
        let y = tri.points.point(j as usize);
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let dn = norm(&diff);
        match mode {
            Mode::TowardOrigin => {
                let nx = norm(x);
                dot(x, &diff) / (nx * dn)
            }
            Mode::Directed { e1 } => match sign {
                DirectedSign::Literal => dot(e1, &diff) / dn,
                DirectedSign::Aligned => -dot(e1, &diff) / dn,
            },
        }
    };
    if matches!(mode, Mode::TowardOrigin) && norm2(x) == 0.0 {
        return Err(Error::InvalidInput("compass step at the origin".into()));
    }
    let mut best = nbrs[0];
    let mut best_s = score(best);
    for &j in &nbrs[1..] {
        let s = score(j);
        if s > best_s || (s == best_s && j < best) {
            best = j;
            best_s = s;
        }
    }
    Ok(best)
}

/// Full compass navigation toward the origin (point 0). A repeated vertex
/// is reported as a degenerate error.
pub fn navigate_compass(tri: &Triangulation, start_idx: u32, limits: &NavLimits) -> Result<Path> {
    let mut cur = start_idx;
    let mut coords: Vec<f64> = tri.points.point(cur as usize).to_vec();
    let mut visited = std::collections::HashSet::new();
    visited.insert(cur);
    let mut steps = 0usize;
    loop {
        if cur == 0 {
            return Ok(path_from_coords(
                2,
                coords,
                &Mode::TowardOrigin,
                Termination::AbsorbedAtOrigin,
                NavDiagnostics::default(),
            ));
        }
        if steps >= limits.max_steps {
            return Ok(path_from_coords(
                2,
                coords,
                &Mode::TowardOrigin,
                Termination::StepLimit,
                NavDiagnostics::default(),
            ));
        }
        let next = compass_step(tri, cur, &Mode::TowardOrigin, DirectedSign::Aligned)?;
        if !visited.insert(next) {
            return Err(Error::Degenerate(format!(
                "compass navigation revisited vertex {next}"
            )));
        }
        cur = next;
        coords.extend_from_slice(tri.points.point(cur as usize));
        steps += 1;
    }
}

/// Norm of the point chosen by the first toward-origin step from distance
/// `x`: the same conditioned draw as [`NavState::sample_neighbors`] at step
/// 0 (fresh intensity exactly `f(|. - X_0|)` on B(O, x), origin atom with
/// probability f(x)), tracking only the minimal norm instead of realizing
/// the neighbor set. Returns 0 when the origin atom wins.
pub fn sample_first_step_norm(params: &ModelParams, x: f64, rng: &mut Stream) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::InvalidInput("start norm must be positive".into()));
    }
    let (_, omega, _) = crate::point_process::geometry_constants(params.d)?;
    let total_radial = params.radial_mass(2.0 * x);
    let mass = omega * total_radial;
    let poisson =
        Poisson::new(mass).map_err(|e| Error::InvalidInput(format!("dominating mass {mass}: {e}")))?;
    let atom_p = params.f(x);
    let x2 = x * x;
    let cap = NavLimits::default().rejection_cap;
    let mut rounds = 0u64;
    loop {
        rounds += 1;
        if rounds > cap {
            return Err(Error::ConditioningFailure {
                rounds: rounds - 1,
                point: vec![x],
                norm: x,
            });
        }
        let mut best = f64::INFINITY;
        if rng.gen::<f64>() <= atom_p {
            best = 0.0;
        }
        let k = poisson.sample(rng) as u64;
        if params.d == 2 {
            for _ in 0..k {
                let r = params.radial_mass_inv(rng.gen::<f64>() * total_radial);
                let cos_phi = (rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).cos();
                // |X_0 + r e(phi)|^2 with X_0 = (x, 0)
                let n2 = x2 + r * r + 2.0 * x * r * cos_phi;
                if n2 < x2 && n2 < best * best {
                    best = n2.max(0.0).sqrt();
                }
            }
        } else {
            let mut pos: SmallVec<[f64; 4]> = SmallVec::from_elem(0.0, params.d);
            let mut start: SmallVec<[f64; 4]> = SmallVec::from_elem(0.0, params.d);
            start[0] = x;
            for _ in 0..k {
                let r = params.radial_mass_inv(rng.gen::<f64>() * total_radial);
                sample_sphere_dir(rng, r, &mut pos);
                for (p, c) in pos.iter_mut().zip(start.iter()) {
                    *p += c;
                }
                let n2 = norm2(&pos);
                if n2 < x2 && n2 < best * best {
                    best = n2.sqrt();
                }
            }
        }
        if best.is_finite() {
            return Ok(best);
        }
    }
}

/// One directed progress draw: the maximal e1-projection over the neighbor
/// process of a fresh point (intensity `f` over the forward half-space,
/// truncated where the remaining mass is below 1e-12), conditioned nonempty.
pub fn sample_directed_progress(params: &ModelParams, rng: &mut Stream) -> Result<f64> {
    if params.beta <= params.d as f64 {
        return Err(Error::InvalidInput("directed progress needs beta > d".into()));
    }
    let (_, omega, _) = crate::point_process::geometry_constants(params.d)?;
    let trunc = params.mass_truncation_radius(1e-12);
    let total_radial = params.radial_mass_tail(0.0) - params.radial_mass_tail(trunc);
    let half_mass = omega * total_radial / 2.0;
    let poisson = Poisson::new(half_mass)
        .map_err(|e| Error::InvalidInput(format!("dominating mass {half_mass}: {e}")))?;
    let cap = NavLimits::default().rejection_cap;
    let mut rounds = 0u64;
    loop {
        rounds += 1;
        if rounds > cap {
            return Err(Error::ConditioningFailure {
                rounds: rounds - 1,
                point: vec![0.0],
                norm: 0.0,
            });
        }
        let k = poisson.sample(rng) as u64;
        if k == 0 {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        for _ in 0..k {
            let r = params.radial_mass_inv(rng.gen::<f64>() * total_radial);
            // projection of an isotropic direction conditioned forward
            let proj = if params.d == 2 {
                r * rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2).cos()
            } else {
                let mut pos: SmallVec<[f64; 4]> = SmallVec::from_elem(0.0, params.d);
                sample_sphere_dir(rng, r, &mut pos);
                pos[0].abs()
            };
            if proj > best {
                best = proj;
            }
        }
        return Ok(best);
    }
}

fn sample_sphere_dir(rng: &mut Stream, r: f64, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for x in out.iter_mut() {
            let g: f64 = rand_distr::StandardNormal.sample(rng);
            *x = g;
            s += g * g;
        }
        if s > 0.0 {
            let scale = r / s.sqrt();
            for x in out.iter_mut() {
                *x *= scale;
            }
            return;
        }
    }
}

/// Navigator selector for the umbrella entry point.
pub enum NavKind<'a> {
    /// lazy long-range environment
    SmallWorld,
    /// long-range rule over a fully realized window
    SmallWorldDense(&'a PointSet),
    /// nearest point of the region
    Radial(&'a PointSet, &'a SpatialIndex),
    /// compass rule on a triangulation
    Compass(&'a Triangulation),
}

/// Run the selected rule from `start`. For realized-set navigators the run
/// starts at the set point nearest to `start`.
pub fn navigate(
    kind: NavKind,
    params: &ModelParams,
    start: &[f64],
    mode: &Mode,
    limits: &NavLimits,
    seed: u64,
) -> Result<Path> {
    if norm2(start) == 0.0 && matches!(mode, Mode::TowardOrigin) {
        // A(O) = O: the path is the single point O.
        return Ok(path_from_coords(
            start.len(),
            start.to_vec(),
            mode,
            Termination::AbsorbedAtOrigin,
            NavDiagnostics::default(),
        ));
    }
    match kind {
        NavKind::SmallWorld => match mode {
            Mode::TowardOrigin => {
                let mut st = NavState::toward_origin(params.clone(), start, seed, *limits)?;
                st.run()
            }
            Mode::Directed { e1 } => {
                let mut st = NavState::directed(params.clone(), e1, seed, *limits)?;
                st.run()
            }
        },
        NavKind::SmallWorldDense(ps) => {
            let mut env = DenseEnv::new(params, ps, seed)?;
            let idx = nearest_index(ps, start)?;
            env.navigate_toward_origin(idx, limits)
        }
        NavKind::Radial(ps, index) => {
            let idx = nearest_index(ps, start)?;
            navigate_radial(ps, index, idx, mode, limits)
        }
        NavKind::Compass(tri) => {
            let idx = nearest_index(&tri.points, start)?;
            navigate_compass(tri, idx, limits)
        }
    }
}

fn nearest_index(ps: &PointSet, x: &[f64]) -> Result<u32> {
    if ps.is_empty() {
        return Err(Error::InvalidInput("empty point set".into()));
    }
    Ok((0..ps.len() as u32)
        .min_by(|&a, &b| {
            dist2(ps.point(a as usize), x).total_cmp(&dist2(ps.point(b as usize), x))
        })
        .unwrap())
}
