//! Multilinear kernels, sampled checks of their size and smoothness
//! conditions, direct-summation operators and the weighted Hörmander-type
//! estimate over families of disjoint cubes.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cubes::{cube_measure, Cube};
use crate::family::CubeFamily;
use crate::grid::{lp_norm, same_grid, Grid, GridFunction, WeightedMeasure};
use crate::weights::{ap_characteristic, Weight};
use crate::{par, Error, Point, Result};

/// Largest multilinearity the evaluators accept.
pub const MAX_M: usize = 4;

pub type KernelFn = dyn Fn(&Point, &[Point]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Kind {
    Zero,
    /// `(x - y_1)_0 / (Σ |x - y_i|^2)^{(nm+1)/2}`.
    Riesz,
    Custom(Arc<KernelFn>),
}

/// An `m`-linear kernel on `R^n` with declared smoothness exponent `delta`.
#[derive(Clone)]
pub struct KernelSpec {
    name: String,
    m: usize,
    n: usize,
    delta: f64,
    kind: Kind,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("n", &self.n)
            .field("delta", &self.delta)
            .finish()
    }
}

fn check_shape(m: usize, n: usize, delta: f64) -> Result<()> {
    if !(1..=MAX_M).contains(&m) || !(1..=2).contains(&n) {
        return Err(Error::InvalidArgument(format!("kernel needs 1 <= m <= {MAX_M}, n in {{1, 2}}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!("delta {delta} not in (0, 1]")));
    }
    Ok(())
}

impl KernelSpec {
    /// `1 / (x - y)` on the line.
    pub fn hilbert() -> Self {
        Self::riesz(1, 1).expect("valid shape").named("hilbert")
    }

    /// `(x - y_1) / ((x - y_1)^2 + (x - y_2)^2)^{3/2}` on the line.
    pub fn riesz2() -> Self {
        Self::riesz(2, 1).expect("valid shape").named("riesz2")
    }

    /// `(x - y_1) / (Σ (x - y_i)^2)^2` on the line, trilinear.
    pub fn riesz3() -> Self {
        Self::riesz(3, 1).expect("valid shape").named("riesz3")
    }

    /// First-coordinate Riesz-type kernel for any `(m, n)`.
    pub fn riesz(m: usize, n: usize) -> Result<Self> {
        check_shape(m, n, 1.0)?;
        Ok(KernelSpec {
            name: format!("riesz-m{m}-n{n}"),
            m,
            n,
            delta: 1.0,
            kind: Kind::Riesz,
        })
    }

    pub fn zero(m: usize, n: usize) -> Result<Self> {
        check_shape(m, n, 1.0)?;
        Ok(KernelSpec {
            name: "zero".into(),
            m,
            n,
            delta: 1.0,
            kind: Kind::Zero,
        })
    }

    pub fn custom(
        name: impl Into<String>,
        m: usize,
        n: usize,
        delta: f64,
        f: impl Fn(&Point, &[Point]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_shape(m, n, delta)?;
        Ok(KernelSpec {
            name: name.into(),
            m,
            n,
            delta,
            kind: Kind::Custom(Arc::new(f)),
        })
    }

    /// Catalog lookup: `hilbert`, `riesz2`, `riesz3`, `zero`, or `riesz`
    /// with explicit `(m, n)`.
    pub fn by_name(name: &str, m: usize, n: usize) -> Result<Self> {
        let k = match name {
            "hilbert" => Self::hilbert(),
            "riesz2" => Self::riesz2(),
            "riesz3" => Self::riesz3(),
            "riesz" => return Self::riesz(m, n),
            "zero" => return Self::zero(m, n),
            other => return Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        };
        if k.m != m || k.n != n {
            return Err(Error::InvalidArgument(format!(
                "kernel `{name}` has m = {}, n = {}, config asks for m = {m}, n = {n}",
                k.m, k.n
            )));
        }
        Ok(k)
    }

    fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    pub fn eval(&self, x: &Point, ys: &[Point]) -> f64 {
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Riesz => {
                let mut rho2 = 0.0;
                for y in ys {
                    for d in 0..self.n {
                        let t = x[d] - y[d];
                        rho2 += t * t;
                    }
                }
                let k = (self.n * self.m + 1) as i32;
                let denom = if k % 2 == 0 {
                    rho2.powi(k / 2)
                } else {
                    rho2.powi(k / 2) * rho2.sqrt()
                };
                (x[0] - ys[0][0]) / denom
            }
            Kind::Custom(f) => f(x, ys),
        }
    }

    fn eval_checked(&self, x: &Point, ys: &[Point]) -> Result<f64> {
        let v = self.eval(x, ys);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteKernel {
                kernel: self.name.clone(),
                x: x[..self.n].to_vec(),
                ys: ys.iter().map(|y| y[..self.n].to_vec()).collect(),
                value: v,
            })
        }
    }
}

fn dist(a: &Point, b: &Point, n: usize) -> f64 {
    (0..n).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>().sqrt()
}

/// Sampled constants of the size and smoothness conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub kernel: String,
    pub size_constant: Option<f64>,
    pub smoothness_constant: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

/// Geometry of the sampled tuples: points in `[-L, L)^n`, radii log-uniform
/// in `[h/10, 10L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingScale {
    pub half_width: f64,
    pub cell_width: f64,
}

impl SamplingScale {
    pub fn from_grid(grid: &Grid) -> Self {
        SamplingScale {
            half_width: grid.half_width(),
            cell_width: grid.cell_width(),
        }
    }
}

impl Default for SamplingScale {
    fn default() -> Self {
        SamplingScale {
            half_width: 4.0,
            cell_width: 8.0 / 1024.0,
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn direction(rng: &mut ChaCha8Rng, n: usize) -> Point {
    if n == 1 {
        [if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0]
    } else {
        let a = rng.gen::<f64>() * std::f64::consts::TAU;
        [a.cos(), a.sin()]
    }
}

struct Tuple {
    x: Point,
    ys: [Point; MAX_M],
}

fn sample_tuple(rng: &mut ChaCha8Rng, k: &KernelSpec, s: &SamplingScale) -> Tuple {
    let n = k.n;
    let mut x = [0.0; 2];
    for c in x.iter_mut().take(n) {
        *c = (rng.gen::<f64>() * 2.0 - 1.0) * s.half_width;
    }
    let mut ys = [[0.0; 2]; MAX_M];
    for y in ys.iter_mut().take(k.m) {
        let r = log_uniform(rng, s.cell_width / 10.0, 10.0 * s.half_width);
        let u = direction(rng, n);
        for d in 0..n {
            y[d] = x[d] + r * u[d];
        }
    }
    // occasionally put one (not every) y_i on x itself
    if k.m >= 2 && rng.gen::<f64>() < 0.25 {
        ys[rng.gen_range(0..k.m)] = x;
    }
    Tuple { x, ys }
}

fn sum_dist(t: &Tuple, m: usize, n: usize) -> f64 {
    t.ys[..m].iter().map(|y| dist(&t.x, y, n)).sum()
}

fn max_dist(t: &Tuple, m: usize, n: usize) -> f64 {
    t.ys[..m].iter().map(|y| dist(&t.x, y, n)).fold(0.0, f64::max)
}

/// `max |K(x, y)| (Σ |x - y_i|)^{nm}` over `samples` random tuples.
pub fn check_size(k: &KernelSpec, samples: usize, seed: u64, scale: &SamplingScale) -> Result<ConditionReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = (k.n * k.m) as i32;
    let mut best = 0.0f64;
    for _ in 0..samples {
        let t = sample_tuple(&mut rng, k, scale);
        let v = k.eval_checked(&t.x, &t.ys[..k.m])?;
        best = best.max(v.abs() * sum_dist(&t, k.m, k.n).powi(e));
    }
    Ok(ConditionReport {
        kernel: k.name.clone(),
        size_constant: Some(best),
        smoothness_constant: None,
        samples,
        seed,
    })
}

/// Sampled smoothness constant over both variants: moving `x`, or moving one
/// `y_j`, by at most half of `max_i |x - y_i|`.
pub fn check_smoothness(k: &KernelSpec, samples: usize, seed: u64, scale: &SamplingScale) -> Result<ConditionReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n, delta) = (k.m, k.n, k.delta);
    let e = (n * m) as f64 + delta;
    let mut best = 0.0f64;
    for s in 0..samples {
        let t = sample_tuple(&mut rng, k, scale);
        let reach = 0.5 * max_dist(&t, m, n);
        let len = reach * log_uniform(&mut rng, 1e-3, 1.0);
        let u = direction(&mut rng, n);
        let base = k.eval_checked(&t.x, &t.ys[..m])?;
        let moved = if s % 2 == 0 {
            let mut x2 = t.x;
            for d in 0..n {
                x2[d] += len * u[d];
            }
            k.eval_checked(&x2, &t.ys[..m])?
        } else {
            let mut ys2 = t.ys;
            let j = rng.gen_range(0..m);
            for d in 0..n {
                ys2[j][d] += len * u[d];
            }
            k.eval_checked(&t.x, &ys2[..m])?
        };
        let ratio = (base - moved).abs() * sum_dist(&t, m, n).powf(e) / len.powf(delta);
        best = best.max(ratio);
    }
    Ok(ConditionReport {
        kernel: k.name.clone(),
        size_constant: None,
        smoothness_constant: Some(best),
        samples,
        seed,
    })
}

/// `T(f_1, ..., f_m)` sampled on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorResult {
    #[serde(flatten)]
    pub values: GridFunction,
    pub epsilon: f64,
    pub kernel_name: String,
}

struct Sparse {
    pts: Vec<Point>,
    /// `f(y) h^n`.
    mass: Vec<f64>,
}

fn sparse(f: &GridFunction) -> Sparse {
    let g = f.grid();
    let vol = g.cell_volume();
    let mut pts = Vec::new();
    let mut mass = Vec::new();
    for (i, &v) in f.values().iter().enumerate() {
        if v != 0.0 {
            pts.push(g.center(i));
            mass.push(v * vol);
        }
    }
    Sparse { pts, mass }
}

fn check_inputs(k: &KernelSpec, fs: &[GridFunction], epsilon: f64) -> Result<Grid> {
    if fs.len() != k.m {
        return Err(Error::InvalidArgument(format!(
            "kernel `{}` is {}-linear, got {} functions",
            k.name,
            k.m,
            fs.len()
        )));
    }
    let grid = *fs[0].grid();
    for f in &fs[1..] {
        same_grid(&grid, f.grid())?;
    }
    if grid.dim() != k.n {
        return Err(Error::InvalidArgument(format!(
            "kernel `{}` lives on R^{}, grid is {}-d",
            k.name,
            k.n,
            grid.dim()
        )));
    }
    if !(epsilon >= grid.cell_width() * (1.0 - 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "truncation radius {epsilon} below the cell width {}",
            grid.cell_width()
        )));
    }
    Ok(grid)
}

struct Summation<'a> {
    k: &'a KernelSpec,
    slots: Vec<Sparse>,
    eps: f64,
}

impl Summation<'_> {
    fn at(&self, x: &Point) -> Result<f64> {
        let mut ys = [[0.0; 2]; MAX_M];
        let mut acc = 0.0;
        self.level(x, 0, 1.0, true, &mut ys, &mut acc)?;
        Ok(acc)
    }

    fn level(
        &self,
        x: &Point,
        depth: usize,
        weight: f64,
        all_near: bool,
        ys: &mut [Point; MAX_M],
        acc: &mut f64,
    ) -> Result<()> {
        let m = self.k.m;
        let n = self.k.n;
        let slot = &self.slots[depth];
        if depth + 1 == m {
            let mut sum = 0.0;
            for (p, &w) in slot.pts.iter().zip(&slot.mass) {
                if all_near && dist(x, p, n) < self.eps {
                    continue;
                }
                ys[depth] = *p;
                sum += w * self.k.eval_checked(x, &ys[..m])?;
            }
            *acc += weight * sum;
            return Ok(());
        }
        for (p, &w) in slot.pts.iter().zip(&slot.mass) {
            ys[depth] = *p;
            let near = all_near && dist(x, p, n) < self.eps;
            self.level(x, depth + 1, weight * w, near, ys, acc)?;
        }
        Ok(())
    }
}

/// `T(f)(x)` at arbitrary points, midpoint rule over cell centers, dropping
/// tuples with every `y_i` within `epsilon` of `x`.
pub fn evaluate_at(k: &KernelSpec, fs: &[GridFunction], points: &[Point], epsilon: f64) -> Result<Vec<f64>> {
    check_inputs(k, fs, epsilon)?;
    let sum = Summation {
        k,
        slots: fs.iter().map(sparse).collect(),
        eps: epsilon,
    };
    par::map_collect(points.len(), |i| sum.at(&points[i]))
        .into_iter()
        .collect()
}

/// `T(f)` at every cell center.
pub fn apply_operator(k: &KernelSpec, fs: &[GridFunction], epsilon: f64) -> Result<OperatorResult> {
    let grid = check_inputs(k, fs, epsilon)?;
    let points: Vec<Point> = (0..grid.len()).map(|i| grid.center(i)).collect();
    let vals = evaluate_at(k, fs, &points, epsilon)?;
    Ok(OperatorResult {
        values: GridFunction::new(grid, vals)?,
        epsilon,
        kernel_name: k.name.clone(),
    })
}

/// `‖T(f)‖_{L^1} / ∏ ‖f_i‖_{L^m}` (Lebesgue).
pub fn strong_type_ratio(k: &KernelSpec, fs: &[GridFunction], epsilon: f64) -> Result<f64> {
    let out = apply_operator(k, fs, epsilon)?;
    let leb = WeightedMeasure::lebesgue(*out.values.grid());
    let num = lp_norm(&out.values, &leb, 1.0)?;
    let mut den = 1.0;
    for f in fs {
        den *= lp_norm(f, &leb, k.m as f64)?;
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("strong-type ratio with a zero input".into()));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HormanderOptions {
    /// Sub-points per cell and axis for the `x` integral.
    pub x_refine: usize,
    /// Dilation defining the excluded region; defaults to `2 sqrt(n)`.
    pub exclusion_dilation: Option<f64>,
    /// Random points per cube product, on top of corners and the center.
    pub random_points: usize,
    pub seed: u64,
    /// Family for the `A_1` characteristic on the right-hand side.
    pub family: Option<CubeFamily>,
}

impl Default for HormanderOptions {
    fn default() -> Self {
        HormanderOptions {
            x_refine: 2,
            exclusion_dilation: None,
            random_points: 8,
            seed: 7,
            family: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HormanderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    pub characteristic: f64,
    pub tuples: usize,
    pub samples_per_tuple: usize,
    pub x_points: usize,
}

/// Both sides of the weighted Hörmander-type estimate for `l =
/// families.len()` families of disjoint cubes:
///
/// `Σ_j ∏_{i≤l} w^{1/m}(Q_{i,j_i}) ∫ ∏_{i>l} w(y_i)^{1/m} sup_{y ∈ ∏Q} ∫_{box∖Ω*}
/// |K(x, y) - K(x, c, y_{l+1..m})| dx dy_{l+1..m}`
///
/// against `[w]_{A_1}^{(2m-2)/m} Σ_i w(Ω_i)`. The sup runs over the corners of
/// the cube product, its center and a few random points.
pub fn weighted_hormander(k: &KernelSpec, w: &Weight, families: &[Vec<Cube>], opts: &HormanderOptions) -> Result<HormanderReport> {
    let grid = *w.grid();
    let (m, n) = (k.m, k.n);
    let l = families.len();
    if !(1..=m).contains(&l) {
        return Err(Error::InvalidArgument(format!("need 1 <= l <= m = {m} families, got {l}")));
    }
    if grid.dim() != n {
        return Err(Error::InvalidArgument("weight and kernel dimensions differ".into()));
    }
    if opts.x_refine == 0 {
        return Err(Error::InvalidArgument("x_refine must be >= 1".into()));
    }
    let dil = opts.exclusion_dilation.unwrap_or(2.0 * (n as f64).sqrt());
    let mut dilated = Vec::new();
    for (fi, fam) in families.iter().enumerate() {
        for (a, q) in fam.iter().enumerate() {
            if q.dim() != n {
                return Err(Error::InvalidArgument("cube dimension differs from the kernel".into()));
            }
            if let Some(b) = fam[..a].iter().position(|r| r.overlaps(q)) {
                return Err(Error::OverlappingCubes {
                    family: fi,
                    first: b,
                    second: a,
                });
            }
            let d = q.dilate(dil)?;
            if !d.inside_box(&grid) {
                return Err(Error::Precondition(format!(
                    "dilated cube {:?} (side {}) leaves the box",
                    &d.center()[..n],
                    d.side()
                )));
            }
            dilated.push(d);
        }
    }

    let family = opts.family.unwrap_or(if n == 1 {
        CubeFamily::Exhaustive
    } else {
        CubeFamily::ShiftedDyadic
    });
    let characteristic = ap_characteristic(w, 1.0, family)?.value;
    let mu = w.measure();
    let omega_measure: f64 = families
        .iter()
        .flat_map(|f| f.iter())
        .map(|q| cube_measure(q, &mu))
        .sum();
    let rhs = characteristic.powf((2.0 * m as f64 - 2.0) / m as f64) * omega_measure;

    // x quadrature over the box minus the dilated cubes
    let r = opts.x_refine;
    let h = grid.cell_width();
    let sub_vol = (h / r as f64).powi(n as i32);
    let per_axis = grid.cells_per_axis() * r;
    let coord = |k: usize| -grid.half_width() + (k as f64 + 0.5) * h / r as f64;
    let mut xs: Vec<Point> = Vec::new();
    let rows = if n == 1 { 1 } else { per_axis };
    for b in 0..rows {
        for a in 0..per_axis {
            let p = [coord(a), if n == 1 { 0.0 } else { coord(b) }];
            if !dilated.iter().any(|d| d.contains_point(&p)) {
                xs.push(p);
            }
        }
    }

    // y_{l+1..m} quadrature over cell centers, weight ∏ w^{1/m} h^n
    let w_root: Vec<f64> = w.density().values().iter().map(|v| v.powf(1.0 / m as f64)).collect();
    let rest = m - l;
    let cells = grid.len();
    let rest_count = cells.pow(rest as u32);
    let rest_tuple = |mut idx: usize| -> ([Point; MAX_M], f64) {
        let mut ys = [[0.0; 2]; MAX_M];
        let mut weight = 1.0;
        for slot in ys.iter_mut().skip(l).take(rest) {
            let c = idx % cells;
            idx /= cells;
            *slot = grid.center(c);
            weight *= w_root[c] * grid.cell_volume();
        }
        (ys, weight)
    };

    let tuples = cartesian(families);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut lhs = 0.0;
    let mut samples_per_tuple = 0;
    for tuple in &tuples {
        let cubes: Vec<&Cube> = tuple.iter().enumerate().map(|(i, &j)| &families[i][j]).collect();
        let prefactor: f64 = cubes.iter().map(|q| cube_integral(q, &grid, &w_root)).product();
        let samples = sample_product(&cubes, n, opts.random_points, &mut rng);
        samples_per_tuple = samples.len();
        let centers: Vec<Point> = cubes.iter().map(|q| q.center()).collect();
        let integral = par::map_collect(rest_count, |t| -> Result<f64> {
            let (mut ys, weight) = rest_tuple(t);
            let mut yc = ys;
            yc[..l].copy_from_slice(&centers);
            let mut best = 0.0f64;
            for s in &samples {
                ys[..l].copy_from_slice(&s[..l]);
                let mut acc = 0.0;
                for x in &xs {
                    acc += (k.eval_checked(x, &ys[..m])? - k.eval_checked(x, &yc[..m])?).abs();
                }
                best = best.max(acc * sub_vol);
            }
            Ok(weight * best)
        })
        .into_iter()
        .sum::<Result<f64>>()?;
        lhs += prefactor * integral;
    }
    Ok(HormanderReport {
        lhs,
        rhs,
        ratio: (rhs > 0.0).then(|| lhs / rhs),
        characteristic,
        tuples: tuples.len(),
        samples_per_tuple,
        x_points: xs.len(),
    })
}

fn cartesian(families: &[Vec<Cube>]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for fam in families {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..fam.len()).map(move |j| {
                    let mut v = prefix.clone();
                    v.push(j);
                    v
                })
            })
            .collect();
    }
    out
}

/// `∫_Q g` for a cell-sampled `g`, with fractional boundary cells.
fn cube_integral(q: &Cube, grid: &Grid, g: &[f64]) -> f64 {
    q.cell_overlaps(grid)
        .into_iter()
        .map(|(i, frac)| g[i] * frac)
        .sum::<f64>()
        * grid.cell_volume()
}

fn sample_product(cubes: &[&Cube], n: usize, random: usize, rng: &mut ChaCha8Rng) -> Vec<[Point; MAX_M]> {
    let l = cubes.len();
    let mut out = Vec::new();
    for mask in 0..(1usize << (n * l)) {
        let mut s = [[0.0; 2]; MAX_M];
        for (i, q) in cubes.iter().enumerate() {
            for d in 0..n {
                let bit = (mask >> (i * n + d)) & 1;
                s[i][d] = if bit == 1 { q.upper(d) } else { q.lower(d) };
            }
        }
        out.push(s);
    }
    let mut center = [[0.0; 2]; MAX_M];
    for (i, q) in cubes.iter().enumerate() {
        center[i] = q.center();
    }
    out.push(center);
    for _ in 0..random {
        let mut s = [[0.0; 2]; MAX_M];
        for (i, q) in cubes.iter().enumerate() {
            for d in 0..n {
                s[i][d] = q.lower(d) + rng.gen::<f64>() * q.side();
            }
        }
        out.push(s);
    }
    out
}
