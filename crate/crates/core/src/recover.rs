//! Measures from Cauchy transforms.
//!
//! On ℝ: Stieltjes inversion `−Im G(t+iε)/π`, extrapolated to `ε → 0` over a
//! schedule. On ℂ: the regularized Brown density
//! `(1/π)·Re[½(∂_s + i∂_t) g_ε](λ)` with `g_ε = G_{ε,p}` sampled on a uniform
//! grid and differentiated by central differences.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::cmat::C64;
use crate::error::{Error, Result};
use crate::laws::ScalarLaw;
use crate::linpen::{LinearPencil, Payload};
use crate::subord::{FixedPointOptions, PencilEvaluator};

pub const DEFAULT_EPS_SCHEDULE: [f64; 3] = [0.05, 0.025, 0.0125];
pub const DEFAULT_BROWN_EPS: f64 = 1e-3;
/// Relative mass deficit (or excess) that triggers the atom report.
pub const ATOM_MASS_TOLERANCE: f64 = 0.03;
/// `ε·|Im G(t+iε)|` above which a local maximum is listed as a candidate atom.
pub const ATOM_THRESHOLD: f64 = 0.02;

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let (mid, half, m) = (0.5 * (a + b), 0.5 * (b - a), (n - 1) as f64);
            (0..n)
                .map(|k| match k {
                    0 => a,
                    k if k + 1 == n => b,
                    k => mid + half * ((2 * k) as f64 - m) / m,
                })
                .collect()
        }
    }
}

/// Trapezoid weights of a (not necessarily uniform) ascending grid.
fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        let h = 0.5 * (grid[k] - grid[k - 1]);
        w[k - 1] += h;
        w[k] += h;
    }
    w
}

/// A point mass suspected from the Poisson-smoothed transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomCandidate {
    pub location: f64,
    /// `ε·|Im G(t+iε)|` at the smallest ε; equals the weight when `t` hits the atom.
    pub weight: f64,
}

/// Density on a real grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilon_used: Vec<f64>,
    pub mass: f64,
    /// Filled only when the mass is off by more than [`ATOM_MASS_TOLERANCE`].
    pub atoms: Vec<AtomCandidate>,
}

impl DensityCurve {
    /// Builds a curve from given values; mass by trapezoid.
    pub fn from_values(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        let mass = trapezoid_weights(&grid).iter().zip(&values).map(|(w, v)| w * v).sum();
        Ok(DensityCurve { grid, values, epsilon_used: Vec::new(), mass, atoms: Vec::new() })
    }

    pub fn atom_report(&self) -> Option<&[AtomCandidate]> {
        if (self.mass - 1.0).abs() > ATOM_MASS_TOLERANCE {
            Some(&self.atoms)
        } else {
            None
        }
    }

    /// Cumulative trapezoid integral at each grid point, divided by the mass.
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.len());
        let mut acc = 0.0;
        for k in 0..self.grid.len() {
            if k > 0 {
                acc += 0.5 * (self.grid[k] - self.grid[k - 1]) * (self.values[k] + self.values[k - 1]);
            }
            out.push(acc);
        }
        if acc > 0.0 {
            out.iter_mut().for_each(|c| *c /= acc);
        }
        out
    }

    /// Normalized CDF at an arbitrary point, linear between grid points.
    pub fn cdf_at(&self, cdf: &[f64], t: f64) -> f64 {
        let g = &self.grid;
        if t <= g[0] {
            return 0.0;
        }
        if t >= g[g.len() - 1] {
            return 1.0;
        }
        let k = g.partition_point(|&x| x <= t);
        let (a, b) = (g[k - 1], g[k]);
        let s = (t - a) / (b - a);
        cdf[k - 1] + s * (cdf[k] - cdf[k - 1])
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 points, got {}", grid.len())));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("non-finite grid point".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("grid must be strictly ascending".into()));
    }
    Ok(())
}

fn check_schedule(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::InvalidGrid("empty ε schedule".into()));
    }
    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidGrid("ε schedule must be positive".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidGrid("ε schedule must be strictly descending".into()));
    }
    Ok(())
}

/// Polynomial extrapolation of `(x_k, y_k)` to `x = 0` by Neville's scheme.
pub fn extrapolate_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    let n = p.len();
    for m in 1..n {
        for k in 0..n - m {
            p[k] = (x[k + m] * p[k] - x[k] * p[k + 1]) / (x[k + m] - x[k]);
        }
    }
    p[0]
}

/// Stieltjes inversion of `g` on `grid`, extrapolated over `eps_schedule`.
///
/// A failing evaluation aborts with the node attached; with several failures
/// the one at the smallest grid index is reported.
pub fn density_1d<F>(g: F, grid: &[f64], eps_schedule: &[f64]) -> Result<DensityCurve>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    check_grid(grid)?;
    check_schedule(eps_schedule)?;
    let rows: Vec<Result<Vec<f64>>> = grid
        .par_iter()
        .map(|&t| {
            eps_schedule
                .iter()
                .map(|&eps| {
                    g(C64::new(t, eps))
                        .map(|v| v.im)
                        .map_err(|e| e.at(format!("t = {t}, ε = {eps}")))
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut smallest = Vec::with_capacity(grid.len());
    for row in rows {
        let im = row?;
        let y: Vec<f64> = im.iter().map(|v| -v / std::f64::consts::PI).collect();
        values.push(extrapolate_to_zero(eps_schedule, &y).max(0.0));
        smallest.push(eps_schedule[eps_schedule.len() - 1] * im[im.len() - 1].abs());
    }
    let mut curve = DensityCurve::from_values(grid.to_vec(), values)?;
    curve.epsilon_used = eps_schedule.to_vec();
    if (curve.mass - 1.0).abs() > ATOM_MASS_TOLERANCE {
        curve.atoms = local_peaks(grid, &smallest);
    }
    Ok(curve)
}

fn local_peaks(grid: &[f64], a: &[f64]) -> Vec<AtomCandidate> {
    let n = a.len();
    (0..n)
        .filter(|&k| {
            a[k] > ATOM_THRESHOLD
                && (k == 0 || a[k] >= a[k - 1])
                && (k + 1 == n || a[k] > a[k + 1])
        })
        .map(|k| AtomCandidate { location: grid[k], weight: a[k] })
        .collect()
}

/// Scalar spectral density of a selfadjoint corner-1 pencil.
pub fn pencil_density(
    evaluator: &PencilEvaluator,
    grid: &[f64],
    eps_schedule: &[f64],
) -> Result<DensityCurve> {
    if evaluator.pencil().corner() != 1 {
        return Err(Error::Dimension("density needs a pencil with corner 1".into()));
    }
    density_1d(|z| evaluator.scalar(Payload::Scalar(z)), grid, eps_schedule)
}

/// Rectangular grid in ℂ with the same spacing along both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2d {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Grid2d {
    pub fn new(re: (f64, f64), im: (f64, f64), n_re: usize, n_im: usize) -> Result<Self> {
        let grid = Grid2d { re: linspace(re.0, re.1, n_re), im: linspace(im.0, im.1, n_im) };
        grid.validate()?;
        Ok(grid)
    }

    /// `[lo, hi]²` with `n` points per axis.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new((lo, hi), (lo, hi), n, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.re.len() < 3 || self.im.len() < 3 {
            return Err(Error::InvalidGrid("need at least 3 points per axis".into()));
        }
        check_grid(&self.re)?;
        check_grid(&self.im)?;
        let h = self.spacing();
        let uniform = |axis: &[f64]| {
            axis.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h)
        };
        if !uniform(&self.re) || !uniform(&self.im) {
            return Err(Error::InvalidGrid("spacing must be uniform and equal on both axes".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.re[1] - self.re[0]
    }

    pub fn len(&self) -> usize {
        self.re.len() * self.im.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node `(i, j)` is `re[i] + i·im[j]`, stored at `j·n_re + i`.
    pub fn point(&self, idx: usize) -> C64 {
        let n = self.re.len();
        C64::new(self.re[idx % n], self.im[idx / n])
    }
}

/// Regularized Brown density on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownField {
    pub grid: Grid2d,
    /// `G_{ε,p}(λ)` per node, NaN where the evaluation failed.
    pub g: Vec<C64>,
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub fd_step: f64,
    pub mass: f64,
    /// Indices of nodes whose evaluation failed.
    pub failed: Vec<usize>,
    /// Nodes differentiated one-sidedly (grid border or failed neighbour).
    pub one_sided: usize,
}

/// Brown field from an arbitrary `λ ↦ G_{ε,p}(λ)`.
pub fn brown_field_with<F>(g: F, grid: &Grid2d, eps: f64) -> Result<BrownField>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    grid.validate()?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidGrid(format!("ε must be positive, got {eps}")));
    }
    let gv: Vec<Option<C64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| g(grid.point(k)).ok().filter(|v| v.re.is_finite() && v.im.is_finite()))
        .collect();
    let failed: Vec<usize> = (0..gv.len()).filter(|&k| gv[k].is_none()).collect();
    let (nr, ni) = (grid.re.len(), grid.im.len());
    let h = grid.spacing();
    let at = |i: usize, j: usize| gv[j * nr + i];
    let mut one_sided = 0;
    let mut values = vec![0.0; grid.len()];
    for j in 0..ni {
        for i in 0..nr {
            if at(i, j).is_none() {
                continue;
            }
            let ds = diff(i, nr, h, |k| at(k, j));
            let dt = diff(j, ni, h, |k| at(i, k));
            let (Some((ds, cs)), Some((dt, ct))) = (ds, dt) else {
                continue;
            };
            if !(cs && ct) {
                one_sided += 1;
            }
            let w = 0.5 * (ds + C64::i() * dt);
            values[j * nr + i] = (w.re / std::f64::consts::PI).max(0.0);
        }
    }
    let wr = trapezoid_weights(&grid.re);
    let wi = trapezoid_weights(&grid.im);
    let mass = (0..grid.len()).map(|k| wr[k % nr] * wi[k / nr] * values[k]).sum();
    Ok(BrownField {
        grid: grid.clone(),
        g: gv.into_iter().map(|v| v.unwrap_or(C64::new(f64::NAN, f64::NAN))).collect(),
        values,
        epsilon: eps,
        fd_step: h,
        mass,
        failed,
        one_sided,
    })
}

/// Derivative along one axis at index `k`; the flag is true for a central stencil.
fn diff(k: usize, n: usize, h: f64, f: impl Fn(usize) -> Option<C64>) -> Option<(C64, bool)> {
    let c = f(k)?;
    let lo = if k > 0 { f(k - 1) } else { None };
    let hi = if k + 1 < n { f(k + 1) } else { None };
    match (lo, hi) {
        (Some(a), Some(b)) => Some(((b - a) / (2.0 * h), true)),
        (None, Some(b)) => Some(((b - c) / h, false)),
        (Some(a), None) => Some(((c - a) / h, false)),
        (None, None) => None,
    }
}

/// Brown field of a hermitized pencil (corner 2) whose variables are free
/// with the given laws.
pub fn brown_field(
    pencil: &LinearPencil,
    laws: &BTreeMap<String, ScalarLaw>,
    grid: &Grid2d,
    eps: f64,
    opts: &FixedPointOptions,
) -> Result<BrownField> {
    if pencil.corner() != 2 {
        return Err(Error::Dimension("Brown field needs a hermitized pencil (corner 2)".into()));
    }
    let ev = PencilEvaluator::new(pencil, laws, opts)?;
    brown_field_with(|lambda| ev.scalar(Payload::Brown { lambda, eps }), grid, eps)
}

impl BrownField {
    fn weights(&self) -> Vec<f64> {
        let nr = self.grid.re.len();
        let wr = trapezoid_weights(&self.grid.re);
        let wi = trapezoid_weights(&self.grid.im);
        (0..self.grid.len()).map(|k| wr[k % nr] * wi[k / nr]).collect()
    }

    pub fn centroid(&self) -> C64 {
        let w = self.weights();
        let mut acc = C64::new(0.0, 0.0);
        let mut m = 0.0;
        for (k, wk) in w.iter().enumerate() {
            let dm = wk * self.values[k];
            acc += self.grid.point(k) * dm;
            m += dm;
        }
        if m > 0.0 {
            acc / m
        } else {
            acc
        }
    }

    /// Mass within distance `r` of `center` for each radius, cells weighted by
    /// a linear ramp of width `h` across the circle.
    pub fn radial_cdf(&self, center: C64, radii: &[f64]) -> Vec<f64> {
        let w = self.weights();
        let h = self.fd_step;
        radii
            .iter()
            .map(|&r| {
                (0..self.grid.len())
                    .map(|k| {
                        let d = (self.grid.point(k) - center).norm();
                        let frac = (0.5 + (r - d) / h).clamp(0.0, 1.0);
                        frac * w[k] * self.values[k]
                    })
                    .sum()
            })
            .collect()
    }

    /// Mass in `n` equal angular sectors about `center`, starting at angle 0.
    /// A node at distance `d` is spread over the arc of width `h/d` around
    /// its angle.
    pub fn sector_masses(&self, center: C64, n: usize) -> Vec<f64> {
        use std::f64::consts::TAU;
        let w = self.weights();
        let h = self.fd_step;
        let width = TAU / n as f64;
        let mut out = vec![0.0; n];
        for k in 0..self.grid.len() {
            let m = w[k] * self.values[k];
            let d = self.grid.point(k) - center;
            let half = 0.5 * h / d.norm();
            if !(half < 0.5 * TAU) {
                out.iter_mut().for_each(|s| *s += m / n as f64);
                continue;
            }
            let theta = d.arg().rem_euclid(TAU);
            let (lo, hi) = (theta - half, theta + half);
            let first = (lo / width).floor() as i64;
            let last = (hi / width).floor() as i64;
            for s in first..=last {
                let overlap = (hi.min((s + 1) as f64 * width) - lo.max(s as f64 * width)).max(0.0);
                out[s.rem_euclid(n as i64) as usize] += m * overlap / (2.0 * half);
            }
        }
        out
    }

    /// Density of the real part: the field integrated over the imaginary axis.
    pub fn real_marginal(&self) -> Result<DensityCurve> {
        let nr = self.grid.re.len();
        let wi = trapezoid_weights(&self.grid.im);
        let values = (0..nr)
            .map(|i| wi.iter().enumerate().map(|(j, w)| w * self.values[j * nr + i]).sum())
            .collect();
        DensityCurve::from_values(self.grid.re.clone(), values)
    }

    /// Largest relative deviation between the field and its mirror image
    /// `λ ↦ λ̄`, over nodes above `floor·max`. Needs an imaginary axis
    /// symmetric about 0.
    pub fn conjugation_asymmetry(&self, floor: f64) -> f64 {
        self.mirror_asymmetry(floor, false)
    }

    /// Same for the point reflection `λ ↦ −λ`; needs both axes symmetric
    /// about 0.
    pub fn point_asymmetry(&self, floor: f64) -> f64 {
        self.mirror_asymmetry(floor, true)
    }

    fn mirror_asymmetry(&self, floor: f64, flip_re: bool) -> f64 {
        let nr = self.grid.re.len();
        let ni = self.grid.im.len();
        let top = self.values.iter().cloned().fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for j in 0..ni {
            for i in 0..nr {
                let a = self.values[j * nr + i];
                let b = self.values[(ni - 1 - j) * nr + if flip_re { nr - 1 - i } else { i }];
                if a.max(b) > floor * top {
                    worst = worst.max((a - b).abs() / a.max(b));
                }
            }
        }
        worst
    }
}

/// Mass, mean and variance of a density curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveStats {
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Mass, centroid and radial CDF of a Brown field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStats {
    pub mass: f64,
    pub centroid: C64,
    pub radii: Vec<f64>,
    pub radial_cdf: Vec<f64>,
}

pub trait Measure {
    type Stats;
    fn stats(&self) -> Result<Self::Stats>;
}

impl Measure for DensityCurve {
    type Stats = CurveStats;

    fn stats(&self) -> Result<CurveStats> {
        if self.grid.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        let w = trapezoid_weights(&self.grid);
        let m0: f64 = w.iter().zip(&self.values).map(|(w, v)| w * v).sum();
        if !(m0 > 0.0) {
            return Err(Error::InvalidGrid("curve has no mass".into()));
        }
        let moment = |p: i32| -> f64 {
            self.grid.iter().zip(&w).zip(&self.values).map(|((t, w), v)| t.powi(p) * w * v).sum::<f64>()
                / m0
        };
        let mean = moment(1);
        Ok(CurveStats { mass: m0, mean, variance: moment(2) - mean * mean })
    }
}

impl Measure for BrownField {
    type Stats = FieldStats;

    fn stats(&self) -> Result<FieldStats> {
        if self.grid.is_empty() || self.values.is_empty() {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        let centroid = self.centroid();
        let reach = (0..self.grid.len())
            .map(|k| (self.grid.point(k) - centroid).norm())
            .fold(0.0, f64::max);
        let radii = linspace(0.0, reach, 64);
        let radial_cdf = self.radial_cdf(centroid, &radii);
        Ok(FieldStats { mass: self.mass, centroid, radii, radial_cdf })
    }
}

/// Trapezoid statistics of a curve or field.
pub fn measure_stats<M: Measure>(m: &M) -> Result<M::Stats> {
    m.stats()
}
