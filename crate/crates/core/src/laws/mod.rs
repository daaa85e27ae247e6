//! Scalar spectral laws, their Cauchy transforms, and the operator-valued
//! Cauchy transform of a term `a ⊗ x`.

pub mod quadrature;

use quadrature::Accumulate;

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cmat::{eig_general_vectors, eig_herm, CMatrix, C64};
use crate::error::{Error, Result};

/// Relative tolerance of the adaptive quadrature fallback.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Panel cap of the adaptive quadrature fallback.
pub const QUADRATURE_MAX_PANELS: usize = 20_000;
/// Eigenvector conditioning above which the spectral route gives way to quadrature.
const SPECTRAL_COND_LIMIT: f64 = 1e4;
/// Longest moment series tried before diagonalizing.
const SERIES_TERMS: usize = 40;

/// Distribution of a single selfadjoint free variable.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarLaw {
    Semicircle { mean: f64, variance: f64 },
    /// Standard Marchenko–Pastur law scaled by `scale`: mean `scale`,
    /// support `(1 ± √ratio)²·scale`, atom `max(0, 1 − 1/ratio)` at zero.
    MarchenkoPastur { ratio: f64, scale: f64 },
    Atomic { points: Vec<f64>, weights: Vec<f64> },
    /// Discrete approximation of a law; treated exactly like `Atomic`.
    Quadrature { nodes: Vec<f64>, weights: Vec<f64> },
}

fn check_simplex(points: &[f64], weights: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidLaw("no atoms".into()));
    }
    if points.len() != weights.len() {
        return Err(Error::InvalidLaw(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidLaw("non-finite atom location".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidLaw("weights must be non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidLaw(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

impl ScalarLaw {
    pub fn semicircle(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidLaw(format!(
                "semicircle needs finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        Ok(ScalarLaw::Semicircle { mean, variance })
    }

    pub fn standard_semicircle() -> Self {
        ScalarLaw::Semicircle {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn marchenko_pastur(ratio: f64, scale: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidLaw(format!(
                "marchenko_pastur needs positive ratio and scale, got ({ratio}, {scale})"
            )));
        }
        Ok(ScalarLaw::MarchenkoPastur { ratio, scale })
    }

    pub fn atomic(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_simplex(&points, &weights)?;
        Ok(ScalarLaw::Atomic { points, weights })
    }

    pub fn dirac(t: f64) -> Self {
        ScalarLaw::Atomic {
            points: vec![t],
            weights: vec![1.0],
        }
    }

    pub fn quadrature(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_simplex(&nodes, &weights)?;
        Ok(ScalarLaw::Quadrature { nodes, weights })
    }

    /// Re-runs the constructor checks.
    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarLaw::Semicircle { mean, variance } => Self::semicircle(*mean, *variance).map(|_| ()),
            ScalarLaw::MarchenkoPastur { ratio, scale } => {
                Self::marchenko_pastur(*ratio, *scale).map(|_| ())
            }
            ScalarLaw::Atomic { points, weights } => check_simplex(points, weights),
            ScalarLaw::Quadrature { nodes, weights } => check_simplex(nodes, weights),
        }
    }

    fn discrete(&self) -> Option<(&[f64], &[f64])> {
        match self {
            ScalarLaw::Atomic { points, weights } => Some((points, weights)),
            ScalarLaw::Quadrature { nodes, weights } => Some((nodes, weights)),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ScalarLaw::Semicircle { mean, .. } => *mean,
            ScalarLaw::MarchenkoPastur { scale, .. } => *scale,
            _ => {
                let (p, w) = self.discrete().unwrap();
                p.iter().zip(w).map(|(p, w)| p * w).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            ScalarLaw::Semicircle { variance, .. } => *variance,
            ScalarLaw::MarchenkoPastur { ratio, scale } => ratio * scale * scale,
            _ => {
                let m = self.mean();
                let (p, w) = self.discrete().unwrap();
                p.iter().zip(w).map(|(p, w)| w * (p - m) * (p - m)).sum()
            }
        }
    }

    /// Smallest closed interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            ScalarLaw::Semicircle { mean, variance } => {
                let r = 2.0 * variance.sqrt();
                (mean - r, mean + r)
            }
            ScalarLaw::MarchenkoPastur { ratio, scale } => {
                let (a, b) = mp_edges(*ratio);
                let lo = if *ratio > 1.0 { 0.0 } else { a * scale };
                (lo, b * scale)
            }
            _ => {
                let (p, _) = self.discrete().unwrap();
                let lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    /// Point masses as `(location, mass)`.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            ScalarLaw::Semicircle { .. } => Vec::new(),
            ScalarLaw::MarchenkoPastur { ratio, .. } => {
                let m = mp_atom(*ratio);
                if m > 0.0 {
                    vec![(0.0, m)]
                } else {
                    Vec::new()
                }
            }
            _ => {
                let (p, w) = self.discrete().unwrap();
                p.iter().cloned().zip(w.iter().cloned()).collect()
            }
        }
    }

    /// Density of the absolutely continuous part (zero for discrete laws).
    pub fn density(&self, t: f64) -> f64 {
        match self {
            ScalarLaw::Semicircle { mean, variance } => {
                let d = 4.0 * variance - (t - mean) * (t - mean);
                if d <= 0.0 {
                    0.0
                } else {
                    d.sqrt() / (2.0 * PI * variance)
                }
            }
            ScalarLaw::MarchenkoPastur { ratio, scale } => {
                let x = t / scale;
                let (a, b) = mp_edges(*ratio);
                if x <= a || x >= b || x <= 0.0 {
                    0.0
                } else {
                    ((b - x) * (x - a)).sqrt() / (2.0 * PI * ratio * x) / scale
                }
            }
            _ => 0.0,
        }
    }

    /// Cauchy transform `∫ 1/(z − t) dμ(t)` for `Im z > 0`.
    pub fn cauchy(&self, z: C64) -> Result<C64> {
        if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NotInUpperHalfPlane(z.im));
        }
        Ok(self.cauchy_continued(z))
    }

    /// Cauchy transform at any point off the support. Below the real axis
    /// this is `conj(G(conj z))`, the same analytic formula continued.
    pub fn cauchy_continued(&self, z: C64) -> C64 {
        match self {
            ScalarLaw::Semicircle { mean, variance } => {
                let s = variance.sqrt();
                let w = (z - mean) / s;
                let root = (w - 2.0).sqrt() * (w + 2.0).sqrt();
                2.0 / (s * (w + root))
            }
            ScalarLaw::MarchenkoPastur { ratio, scale } => {
                let (a, b) = mp_edges(*ratio);
                let w = z / scale;
                let root = (w - a).sqrt() * (w - b).sqrt();
                2.0 / (scale * (w + ratio - 1.0 + root))
            }
            _ => {
                let (p, w) = self.discrete().unwrap();
                p.iter().zip(w).map(|(p, w)| *w / (z - p)).sum()
            }
        }
    }

    /// Deterministic i.i.d. sample of size `count`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            ScalarLaw::Semicircle { mean, variance } => {
                let s = variance.sqrt();
                (0..count)
                    .map(|_| {
                        let r: f64 = rng.gen::<f64>().sqrt();
                        let phi: f64 = 2.0 * PI * rng.gen::<f64>();
                        mean + 2.0 * s * r * phi.cos()
                    })
                    .collect()
            }
            ScalarLaw::MarchenkoPastur { ratio, scale } => {
                let atom = mp_atom(*ratio);
                let c = 1.0 + ratio;
                let r = 2.0 * ratio.sqrt();
                // θ-density ∝ sin²θ / x(θ); bound it on a grid with margin.
                let g = |th: f64| th.sin().powi(2) / (c + r * th.cos());
                let bound = (0..=2000)
                    .map(|k| g(PI * k as f64 / 2000.0))
                    .fold(0.0, f64::max)
                    * 1.05;
                (0..count)
                    .map(|_| {
                        if atom > 0.0 && rng.gen::<f64>() < atom {
                            return 0.0;
                        }
                        loop {
                            let th = PI * rng.gen::<f64>();
                            if rng.gen::<f64>() * bound <= g(th) {
                                return scale * (c + r * th.cos());
                            }
                        }
                    })
                    .collect()
            }
            _ => {
                let (p, w) = self.discrete().unwrap();
                let idx = WeightedIndex::new(w).expect("weights validated");
                (0..count).map(|_| p[idx.sample(&mut rng)]).collect()
            }
        }
    }

    /// Integrates `f(t)` against the absolutely continuous part using the
    /// angular substitution that removes the edge singularities.
    fn integrate_continuous<T: Accumulate>(
        &self,
        mut f: impl FnMut(f64) -> Result<T>,
    ) -> Result<Option<T>> {
        match self {
            ScalarLaw::Semicircle { mean, variance } => {
                let s = variance.sqrt();
                let v = quadrature::integrate(
                    |th| {
                        Ok(f(mean + 2.0 * s * th.cos())?.scaled(2.0 / PI * th.sin().powi(2)))
                    },
                    0.0,
                    PI,
                    QUADRATURE_TOL,
                    QUADRATURE_MAX_PANELS,
                )?;
                Ok(Some(v))
            }
            ScalarLaw::MarchenkoPastur { ratio, scale } => {
                let c = 1.0 + ratio;
                let r = 2.0 * ratio.sqrt();
                let v = quadrature::integrate(
                    |th| {
                        let x = c + r * th.cos();
                        let w = r * r * th.sin().powi(2) / (2.0 * PI * ratio * x);
                        Ok(f(scale * x)?.scaled(w))
                    },
                    0.0,
                    PI,
                    QUADRATURE_TOL,
                    QUADRATURE_MAX_PANELS,
                )?;
                Ok(Some(v))
            }
            _ => Ok(None),
        }
    }

    /// Cauchy transform by quadrature of the density plus exact atoms.
    pub fn cauchy_by_quadrature(&self, z: C64) -> Result<C64> {
        if !(z.im > 0.0) {
            return Err(Error::NotInUpperHalfPlane(z.im));
        }
        let mut g = self
            .integrate_continuous(|t| Ok(1.0 / (z - t)))?
            .unwrap_or(C64::new(0.0, 0.0));
        for (t, m) in self.atoms() {
            g += m / (z - t);
        }
        Ok(g)
    }
}

fn mp_edges(ratio: f64) -> (f64, f64) {
    let r = ratio.sqrt();
    ((1.0 - r).powi(2), (1.0 + r).powi(2))
}

fn mp_atom(ratio: f64) -> f64 {
    (1.0 - 1.0 / ratio).max(0.0)
}

/// Scalar Cauchy transform of `law` at `z` with `Im z > 0`.
pub fn cauchy_scalar(law: &ScalarLaw, z: C64) -> Result<C64> {
    law.cauchy(z)
}

/// A coefficient matrix paired with the law of its variable, with the
/// eigen-decomposition of the coefficient cached for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CoefficientTerm {
    law: ScalarLaw,
    coeff: CMatrix,
    basis: CMatrix,
    /// Indices (into `basis` columns) of nonzero eigenvalues.
    active: Vec<usize>,
    alpha: Vec<f64>,
    /// Moments `∫ (t − t₀)ʲ dμ`, j = 1..=SERIES_TERMS+1, per base point.
    moments: [OnceLock<Vec<C64>>; 5],
}

impl CoefficientTerm {
    pub fn new(law: ScalarLaw, coeff: CMatrix) -> Result<Self> {
        law.validate()?;
        if !coeff.is_finite() {
            return Err(Error::Dimension("coefficient has non-finite entries".into()));
        }
        let dev = coeff.hermitian_deviation();
        if dev > 1e-12 * coeff.norm_fro().max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        let e = eig_herm(&coeff)?;
        let top = e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut active = Vec::new();
        let mut alpha = Vec::new();
        for (k, &v) in e.values.iter().enumerate() {
            if top > 0.0 && v.abs() > 1e-12 * top {
                active.push(k);
                alpha.push(v);
            }
        }
        Ok(CoefficientTerm {
            law,
            coeff,
            basis: e.vectors,
            active,
            alpha,
            moments: Default::default(),
        })
    }

    pub fn law(&self) -> &ScalarLaw {
        &self.law
    }

    pub fn coefficient(&self) -> &CMatrix {
        &self.coeff
    }

    pub fn dim(&self) -> usize {
        self.coeff.dim()
    }

    fn check_arg(&self, b: &CMatrix) -> Result<()> {
        if b.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "argument is {}×{}, coefficient is {}×{}",
                b.dim(),
                b.dim(),
                self.dim(),
                self.dim()
            )));
        }
        if !b.is_finite() {
            return Err(Error::NonFinite { row: 0, col: 0 });
        }
        if !b.in_upper_half_plane() {
            return Err(Error::NotInUpperHalfPlane(b.uhp_check().min_imag_eig));
        }
        Ok(())
    }

    /// `G(b) = ∫ (b − a·t)⁻¹ dμ(t)`.
    pub fn cauchy(&self, b: &CMatrix) -> Result<CMatrix> {
        self.check_arg(b)?;
        if self.active.is_empty() {
            return b.inv();
        }
        if let Some((p, w)) = self.law.discrete() {
            return self.discrete_sum(p, w, b);
        }
        match self.spectral(b)? {
            Some(g) => Ok(g),
            None => self.quadrature_unchecked(b),
        }
    }

    /// Same integral by adaptive quadrature; kept as fallback and oracle.
    pub fn cauchy_by_quadrature(&self, b: &CMatrix) -> Result<CMatrix> {
        self.check_arg(b)?;
        if let Some((p, w)) = self.law.discrete() {
            return self.discrete_sum(p, w, b);
        }
        self.quadrature_unchecked(b)
    }

    /// `h(b) = G(b)⁻¹ − b`.
    pub fn h(&self, b: &CMatrix) -> Result<CMatrix> {
        Ok(&self.cauchy(b)?.inv()? - b)
    }

    fn discrete_sum(&self, points: &[f64], weights: &[f64], b: &CMatrix) -> Result<CMatrix> {
        let mut g = CMatrix::zeros(b.dim());
        for (t, w) in points.iter().zip(weights) {
            if *w == 0.0 {
                continue;
            }
            let r = (b - &self.coeff.scale_real(*t)).inv()?;
            g += &r.scale_real(*w);
        }
        Ok(g)
    }

    fn quadrature_unchecked(&self, b: &CMatrix) -> Result<CMatrix> {
        let mut g = self
            .law
            .integrate_continuous(|t| (b - &self.coeff.scale_real(t)).inv())?
            .unwrap_or_else(|| CMatrix::zeros(b.dim()));
        for (t, m) in self.law.atoms() {
            g += &(b - &self.coeff.scale_real(t)).inv()?.scale_real(m);
        }
        Ok(g)
    }

    /// Closed-form route. With `a = U α U*` restricted to the nonzero
    /// eigenvalues and `E = b − t₀a`, Woodbury gives
    /// `(b − ta)⁻¹ = E⁻¹ + E⁻¹U·s(I − sαH)⁻¹α·U*E⁻¹` where `s = t − t₀` and
    /// `H = U*E⁻¹U`. Diagonalizing `αH` turns the integral into scalar
    /// transforms. Returns `None` when the eigenvectors are too
    /// ill-conditioned to trust.
    fn spectral(&self, b: &CMatrix) -> Result<Option<CMatrix>> {
        let n = b.dim();
        let all: Vec<usize> = (0..n).collect();
        let up = gather(&self.basis, &all, &self.active);
        let upa = up.adjoint();
        let (t0, einv) = self.base_point(b)?;
        let er = rect(&einv);
        let left = er.mul(&up);
        let right = upa.mul(&er);
        let h = upa.mul(&left);
        let r = self.active.len();
        let m = CMatrix::from_fn(r, |i, j| self.alpha[i] * h.at(i, j));
        let mut core = match self.moment_series(t0, &m)? {
            Some(f) => f,
            None => match self.eigen_function(t0, &m)? {
                Some(f) => f,
                None => return Ok(None),
            },
        };
        for i in 0..r {
            for j in 0..r {
                core[(i, j)] *= self.alpha[j];
            }
        }
        let corr = left.mul(&rect(&core)).mul(&right);
        let mut g = einv;
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] += corr.at(i, j);
            }
        }
        Ok(Some(g))
    }

    /// `Σ_j μ'_{j+1} Mʲ`, the expansion of `∫ s(I − sM)⁻¹ dμ`, when it
    /// converges within `SERIES_TERMS` terms.
    fn moment_series(&self, t0: (usize, C64), m: &CMatrix) -> Result<Option<CMatrix>> {
        let r = m.dim();
        let mu = self.moments_about(t0)?;
        let mut power = CMatrix::identity(r);
        let mut acc = CMatrix::scalar(r, mu[0]);
        let mut small = 0;
        for j in 1..=SERIES_TERMS {
            power = power.matmul(m);
            let term = power.scale(mu[j]);
            acc += &term;
            if term.norm_fro() <= 1e-17 * acc.norm_fro() {
                small += 1;
                if small == 2 {
                    return Ok(Some(acc));
                }
            } else {
                small = 0;
            }
            if !acc.is_finite() {
                return Ok(None);
            }
        }
        Ok(None)
    }

    /// `W diag(φ(λ_k)) W⁻¹` from an eigen-decomposition of `M`.
    fn eigen_function(&self, t0: (usize, C64), m: &CMatrix) -> Result<Option<CMatrix>> {
        let r = m.dim();
        let ed = eig_general_vectors(m)?;
        let w = ed.vectors;
        let winv = match w.inv() {
            Ok(x) => x,
            Err(_) => return Ok(None),
        };
        let cond = w.norm_fro() * winv.norm_fro() / r as f64;
        if !(cond < SPECTRAL_COND_LIMIT) {
            return Ok(None);
        }
        let mut wphi = w;
        for (k, lam) in ed.values.iter().enumerate() {
            let phi = self.phi(t0, *lam)?;
            if !phi.is_finite() {
                return Ok(None);
            }
            for i in 0..r {
                wphi[(i, k)] *= phi;
            }
        }
        Ok(Some(wphi.matmul(&winv)))
    }

    fn base_points(&self) -> [C64; 5] {
        let m = self.law.mean();
        let sd = self.law.variance().sqrt().max(1e-3);
        [
            C64::new(m, 0.0),
            C64::new(m, sd),
            C64::new(m, -sd),
            C64::new(m + 2.0 * sd, 0.0),
            C64::new(0.0, 0.0),
        ]
    }

    /// `∫ (t − t₀)ʲ dμ` for j = 1..=SERIES_TERMS+1.
    fn moments_about(&self, (idx, t0): (usize, C64)) -> Result<&[C64]> {
        if let Some(mu) = self.moments[idx].get() {
            return Ok(mu);
        }
        let mut mu = Vec::with_capacity(SERIES_TERMS + 1);
        for j in 1..=SERIES_TERMS as i32 + 1 {
            let mut v = self
                .law
                .integrate_continuous(|t| Ok((t - t0).powi(j)))?
                .unwrap_or(C64::new(0.0, 0.0));
            for (t, w) in self.law.atoms() {
                v += w * (t - t0).powi(j);
            }
            mu.push(v);
        }
        Ok(self.moments[idx].get_or_init(|| mu))
    }

    /// Picks `t₀` so that `b − t₀a` is well conditioned.
    fn base_point(&self, b: &CMatrix) -> Result<((usize, C64), CMatrix)> {
        let mut best: Option<(f64, (usize, C64), CMatrix)> = None;
        for (idx, t0) in self.base_points().into_iter().enumerate() {
            let e = b - &self.coeff.scale(t0);
            let Ok(einv) = e.inv() else { continue };
            let cond = e.norm_fro() * einv.norm_fro();
            if cond < 1e3 {
                return Ok(((idx, t0), einv));
            }
            if best.as_ref().is_none_or(|(c, _, _)| cond < *c) {
                best = Some((cond, (idx, t0), einv));
            }
        }
        match best {
            Some((_, t0, einv)) => Ok((t0, einv)),
            None => Err(Error::Singular { pivot: 0.0, col: 0 }),
        }
    }

    /// `∫ s/(1 − sλ) dμ(t)` with `s = t − t₀`.
    fn phi(&self, t0: (usize, C64), lam: C64) -> Result<C64> {
        let (lo, hi) = self.law.support();
        let reach = (t0.1 - lo).norm().max((t0.1 - hi).norm());
        if lam.norm() * reach >= 0.05 {
            let g = self.law.cauchy_continued(t0.1 + 1.0 / lam);
            return Ok(-1.0 / lam + g / (lam * lam));
        }
        let mu = self.moments_about(t0)?;
        let mut acc = C64::new(0.0, 0.0);
        for c in mu[..16].iter().rev() {
            acc = acc * lam + c;
        }
        Ok(acc)
    }
}

/// Small rectangular helper for the low-rank update above.
#[derive(Debug, Clone)]
struct Rect {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Rect {
    fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    fn mul(&self, o: &Rect) -> Rect {
        let mut data = vec![C64::new(0.0, 0.0); self.rows * o.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..o.cols {
                    data[i * o.cols + j] += a * o.data[k * o.cols + j];
                }
            }
        }
        Rect {
            rows: self.rows,
            cols: o.cols,
            data,
        }
    }

    fn adjoint(&self) -> Rect {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.at(i, j).conj());
            }
        }
        Rect {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

fn rect(m: &CMatrix) -> Rect {
    Rect {
        rows: m.dim(),
        cols: m.dim(),
        data: m.as_slice().to_vec(),
    }
}

fn gather(m: &CMatrix, rows: &[usize], cols: &[usize]) -> Rect {
    let mut data = Vec::with_capacity(rows.len() * cols.len());
    for &i in rows {
        for &j in cols {
            data.push(m[(i, j)]);
        }
    }
    Rect {
        rows: rows.len(),
        cols: cols.len(),
        data,
    }
}

/// Operator-valued Cauchy transform `∫ (b − a·t)⁻¹ dμ(t)`.
pub fn ov_cauchy(law: &ScalarLaw, a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    CoefficientTerm::new(law.clone(), a.clone())?.cauchy(b)
}

/// `h(b) = ov_cauchy(law, a, b)⁻¹ − b`.
pub fn h_transform(law: &ScalarLaw, a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    CoefficientTerm::new(law.clone(), a.clone())?.h(b)
}

/// Deterministic sample of `count` draws from `law`.
pub fn sample(law: &ScalarLaw, count: usize, seed: u64) -> Vec<f64> {
    law.sample(count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_hermitian, random_uhp, rng};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn mp_quarter() -> ScalarLaw {
        ScalarLaw::marchenko_pastur(0.25, 1.0).unwrap()
    }

    /// Direct quadrature of the density in `t`, independent of the angular map.
    fn density_oracle(law: &ScalarLaw, z: C64) -> C64 {
        let (lo, hi) = law.support();
        let lo = if let ScalarLaw::MarchenkoPastur { ratio, scale } = law {
            mp_edges(*ratio).0 * scale
        } else {
            lo
        };
        let mut g: C64 = quadrature::integrate(|t| Ok(law.density(t) / (z - t)), lo, hi, 1e-13, 100_000).unwrap();
        for (t, m) in law.atoms() {
            g += m / (z - t);
        }
        g
    }

    #[test]
    fn semicircle_at_2i() {
        let g = cauchy_scalar(&ScalarLaw::standard_semicircle(), c(0.0, 2.0)).unwrap();
        assert!((g - c(0.0, 1.0 - 2f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn dirac_is_reciprocal() {
        let law = ScalarLaw::dirac(0.0);
        for z in [c(1.0, 1.0), c(-3.0, 0.01), c(0.0, 7.0)] {
            assert!((law.cauchy(z).unwrap() - 1.0 / z).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_real_and_lower_arguments() {
        let law = ScalarLaw::standard_semicircle();
        assert!(matches!(law.cauchy(c(1.0, 0.0)), Err(Error::NotInUpperHalfPlane(_))));
        assert!(matches!(law.cauchy(c(1.0, -1.0)), Err(Error::NotInUpperHalfPlane(_))));
    }

    #[test]
    fn mp_quarter_matches_density_quadrature() {
        let law = mp_quarter();
        for z in [c(1.0, 1.0), c(0.3, 0.1), c(2.2, 0.05), c(-1.0, 0.5), c(1.0, 0.01)] {
            let g = law.cauchy(z).unwrap();
            let q = density_oracle(&law, z);
            assert!((g - q).norm() < 1e-8, "z={z} closed={g} quad={q}");
        }
    }

    #[test]
    fn mp_with_atom_matches_density_quadrature() {
        let law = ScalarLaw::marchenko_pastur(2.5, 0.7).unwrap();
        for z in [c(1.0, 1.0), c(0.05, 0.1), c(3.0, 0.2)] {
            let g = law.cauchy(z).unwrap();
            assert!((g - density_oracle(&law, z)).norm() < 1e-8);
        }
    }

    #[test]
    fn caption_formula_is_the_companion_law() {
        // (z+1−λ−√((z−(1+λ))²−4λ))/(2z), branch by G~1/z, equals λ·G_MP + (1−λ)/z.
        let lam = 0.25;
        let law = mp_quarter();
        for z in [c(1.0, 1.0), c(0.2, 0.3), c(-2.0, 0.1), c(1.5, 0.01)] {
            let s = ((z - (1.0 + lam)).powi(2) - 4.0 * lam).sqrt();
            let big = c(0.0, 1e6);
            let pick = |s: C64, z: C64| (z + 1.0 - lam - s) / (2.0 * z);
            let sb = ((big - (1.0 + lam)).powi(2) - 4.0 * lam).sqrt();
            let sign = if (pick(sb, big) * big - 1.0).norm() < (pick(-sb, big) * big - 1.0).norm() {
                1.0
            } else {
                -1.0
            };
            let mut g = pick(s * sign, z);
            if g.im > 0.0 {
                g = pick(-s * sign, z);
            }
            let companion = lam * law.cauchy(z).unwrap() + (1.0 - lam) / z;
            assert!((g - companion).norm() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn continuous_mass_and_mean() {
        for (law, mass) in [
            (mp_quarter(), 1.0),
            (ScalarLaw::marchenko_pastur(2.0, 1.0).unwrap(), 0.5),
            (ScalarLaw::semicircle(1.0, 4.0).unwrap(), 1.0),
        ] {
            let m: f64 = law.integrate_continuous(|_| Ok(1.0)).unwrap().unwrap();
            assert!((m - mass).abs() < 1e-12, "{law:?} mass {m}");
            let mean: f64 = law.integrate_continuous(Ok).unwrap().unwrap();
            assert!((mean - law.mean()).abs() < 1e-12, "{law:?}");
            let atoms: f64 = law.atoms().iter().map(|a| a.1).sum();
            assert!((m + atoms - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn asymptotically_one_over_z() {
        for law in [
            ScalarLaw::standard_semicircle(),
            mp_quarter(),
            ScalarLaw::marchenko_pastur(3.0, 2.0).unwrap(),
            ScalarLaw::semicircle(-2.0, 0.5).unwrap(),
        ] {
            for z in [c(1e6, 1.0), c(-1e6, 1.0), c(0.0, 1e6), c(1e5, 1e5)] {
                let g = law.cauchy(z).unwrap();
                assert!((g * z - 1.0).norm() < 1e-4, "{law:?} at {z}: {g}");
                assert!(g.im < 0.0);
            }
        }
    }

    #[test]
    fn continuation_is_conjugate_symmetric() {
        for law in [ScalarLaw::standard_semicircle(), mp_quarter()] {
            for z in [c(0.5, 0.3), c(3.0, 0.001), c(-1.0, 2.0)] {
                let up = law.cauchy_continued(z);
                let down = law.cauchy_continued(z.conj());
                assert!((up.conj() - down).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(ScalarLaw::semicircle(0.0, 0.0).is_err());
        assert!(ScalarLaw::marchenko_pastur(-1.0, 1.0).is_err());
        assert!(ScalarLaw::atomic(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(ScalarLaw::atomic(vec![f64::NAN], vec![1.0]).is_err());
        assert!(ScalarLaw::quadrature(vec![0.0], vec![1.0, 0.0]).is_err());
        assert!(ScalarLaw::atomic(vec![], vec![]).is_err());
        assert!(ScalarLaw::atomic(vec![0.0, 1.0], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn ov_dirac_and_zero_coefficient() {
        let mut r = rng(1);
        let a = random_hermitian(3, &mut r);
        let b = random_uhp(3, 0.5, &mut r);
        let g = ov_cauchy(&ScalarLaw::dirac(1.7), &a, &b).unwrap();
        let want = (&b - &a.scale_real(1.7)).inv().unwrap();
        assert!((&g - &want).norm_fro() < 1e-14);
        let z = CMatrix::zeros(3);
        for law in [ScalarLaw::standard_semicircle(), mp_quarter()] {
            let g = ov_cauchy(&law, &z, &b).unwrap();
            assert!((&g - &b.inv().unwrap()).norm_fro() < 1e-14);
        }
    }

    #[test]
    fn ov_one_by_one_semicircle() {
        let g = ov_cauchy(
            &ScalarLaw::standard_semicircle(),
            &CMatrix::identity(1),
            &CMatrix::scalar(1, c(0.0, 2.0)),
        )
        .unwrap();
        assert!((g[(0, 0)] - c(0.0, 1.0 - 2f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn ov_identity_coefficient_reduces_to_scalar() {
        for law in [ScalarLaw::semicircle(0.3, 2.0).unwrap(), mp_quarter()] {
            let z = c(0.4, 0.2);
            let g = ov_cauchy(&law, &CMatrix::identity(4), &CMatrix::scalar(4, z)).unwrap();
            let want = CMatrix::scalar(4, law.cauchy(z).unwrap());
            assert!((&g - &want).norm_fro() < 1e-12);
        }
    }

    #[test]
    fn spectral_route_matches_quadrature() {
        let mut r = rng(7);
        let laws = [
            ScalarLaw::standard_semicircle(),
            mp_quarter(),
            ScalarLaw::marchenko_pastur(2.0, 1.5).unwrap(),
        ];
        for trial in 0..12 {
            let n = 2 + trial % 4;
            // rank-deficient coefficient with mixed-sign eigenvalues
            let mut a = random_hermitian(n, &mut r);
            if trial % 2 == 0 {
                let e = eig_herm(&a).unwrap();
                let mut vals = e.values.clone();
                vals[0] = 0.0;
                let d = CMatrix::diag_real(&vals);
                a = e.vectors.matmul(&d).matmul(&e.vectors.adjoint());
                a = (&a + &a.adjoint()).scale_real(0.5);
            }
            let b = random_uhp(n, 0.2, &mut r);
            for law in &laws {
                let t = CoefficientTerm::new(law.clone(), a.clone()).unwrap();
                let g = t.spectral(&b).unwrap().expect("spectral route taken");
                let q = t.cauchy_by_quadrature(&b).unwrap();
                let err = (&g - &q).norm_fro() / q.norm_fro();
                assert!(err < 1e-9, "trial {trial} {law:?}: {err}");
            }
        }
    }

    #[test]
    fn spectral_route_with_single_entry_coefficient() {
        // Pencil-like coefficient: one nonzero entry, b nearly real.
        let mut a = CMatrix::zeros(3);
        a[(0, 1)] = c(1.0, 0.0);
        a[(1, 0)] = c(1.0, 0.0);
        for eta in [1e-6, 1e-9] {
            let mut b = CMatrix::diag(&[c(0.2, 0.01), c(0.0, eta), c(0.0, eta)]);
            b[(1, 2)] = c(1.0, 0.0);
            b[(2, 1)] = c(1.0, 0.0);
            let t = CoefficientTerm::new(mp_quarter(), a.clone()).unwrap();
            let g = t.spectral(&b).unwrap().expect("spectral route taken");
            let q = t.cauchy_by_quadrature(&b).unwrap();
            assert!((&g - &q).norm_fro() / q.norm_fro() < 1e-8, "eta {eta}");
        }
    }

    #[test]
    fn h_examples() {
        let mut r = rng(3);
        let a = random_hermitian(3, &mut r);
        for _ in 0..3 {
            let b = random_uhp(3, 0.3, &mut r);
            let h = h_transform(&ScalarLaw::dirac(-0.8), &a, &b).unwrap();
            assert!((&h - &a.scale_real(0.8)).norm_fro() < 1e-12);
            let h0 = h_transform(&mp_quarter(), &CMatrix::zeros(3), &b).unwrap();
            assert!(h0.norm_fro() < 1e-12);
        }
        let law = ScalarLaw::standard_semicircle();
        for z in [c(0.3, 0.5), c(-1.0, 0.1), c(2.5, 2.0)] {
            let b = CMatrix::scalar(1, z);
            let h = h_transform(&law, &CMatrix::identity(1), &b).unwrap();
            // 1/G = z − G, so h = −G
            assert!((h[(0, 0)] + law.cauchy(z).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn large_imaginary_asymptotics() {
        let mut r = rng(11);
        let a = random_hermitian(4, &mut r);
        let b = CMatrix::scalar(4, c(0.0, 1e3));
        for law in [ScalarLaw::standard_semicircle(), mp_quarter(), ScalarLaw::dirac(2.0)] {
            let g = ov_cauchy(&law, &a, &b).unwrap();
            assert!((&b.matmul(&g) - &CMatrix::identity(4)).norm_fro() < 1e-2);
        }
    }

    #[test]
    fn rejects_argument_outside_half_plane() {
        let b = CMatrix::diag(&[c(0.0, 1.0), c(0.0, -1.0)]);
        let r = ov_cauchy(&ScalarLaw::standard_semicircle(), &CMatrix::identity(2), &b);
        assert!(matches!(r, Err(Error::NotInUpperHalfPlane(_))));
        let nh = CMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let r = ov_cauchy(&ScalarLaw::standard_semicircle(), &nh, &CMatrix::scalar(2, c(0.0, 1.0)));
        assert!(matches!(r, Err(Error::NotHermitian(_))));
    }

    #[test]
    fn samples() {
        assert_eq!(sample(&ScalarLaw::dirac(3.0), 5, 0), vec![3.0; 5]);
        let law = ScalarLaw::standard_semicircle();
        assert_eq!(sample(&law, 100, 42), sample(&law, 100, 42));
        assert_ne!(sample(&law, 100, 42), sample(&law, 100, 43));
        for law in [
            ScalarLaw::standard_semicircle(),
            ScalarLaw::semicircle(1.0, 0.25).unwrap(),
            mp_quarter(),
            ScalarLaw::marchenko_pastur(2.0, 1.0).unwrap(),
            ScalarLaw::atomic(vec![-1.0, 2.0], vec![0.3, 0.7]).unwrap(),
        ] {
            let xs = sample(&law, 100_000, 5);
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
            assert!((v / law.variance() - 1.0).abs() < 0.03, "{law:?} var {v}");
            assert!((m - law.mean()).abs() < 0.02 * law.variance().sqrt().max(1.0), "{law:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn imaginary_part_negative_definite(seed in 0u64..10_000, n in 1usize..5, which in 0usize..4) {
            let mut r = rng(seed);
            let a = random_hermitian(n, &mut r);
            let b = random_uhp(n, 0.05, &mut r);
            let law = [
                ScalarLaw::standard_semicircle(),
                mp_quarter(),
                ScalarLaw::marchenko_pastur(3.0, 1.0).unwrap(),
                ScalarLaw::atomic(vec![-1.0, 0.5, 2.0], vec![0.2, 0.5, 0.3]).unwrap(),
            ][which].clone();
            let t = CoefficientTerm::new(law, a).unwrap();
            let g = t.cauchy(&b).unwrap();
            prop_assert!(g.scale_real(-1.0).uhp_check().in_upper);
            let h = t.h(&b).unwrap();
            prop_assert!(h.uhp_check().min_imag_eig > -1e-9 * h.norm_fro().max(1.0));
        }
    }
}
