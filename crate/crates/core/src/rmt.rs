//! Random-matrix Monte Carlo: Wigner and Wishart samplers, spectra of
//! polynomials evaluated on them, and distances to analytic outputs.
//!
//! Gaussian entries come from ChaCha8 streams addressed by
//! `(seed, matrix index, entry index)`, so the value of an entry does not
//! depend on the order in which entries are drawn.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cmat::{eig_general, eigvals_herm, eigvals_sym_real, CMatrix, C64};
use crate::error::{Error, Result};
use crate::ncexpr::NcPolynomial;
use crate::recover::{BrownField, DensityCurve};

/// Random matrix ensembles, normalized to the standard laws: Wigner to the
/// variance-1 semicircle, Wishart `XXᵀ` (`X` is `n×m`, entry variance `1/m`)
/// to Marchenko–Pastur with ratio `n/m` and scale 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnsembleKind {
    Wigner { n: usize, complex: bool },
    Wishart { n: usize, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub seed: u64,
}

/// An ensemble without its size, as chosen per variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ensemble {
    Wigner { complex: bool },
    /// `m = round(n / ratio)`.
    Wishart { ratio: f64 },
}

impl Ensemble {
    pub fn kind(&self, n: usize) -> Result<EnsembleKind> {
        let kind = match *self {
            Ensemble::Wigner { complex } => EnsembleKind::Wigner { n, complex },
            Ensemble::Wishart { ratio } => {
                if !(ratio.is_finite() && ratio > 0.0) {
                    return Err(Error::InvalidLaw(format!("Wishart ratio must be positive, got {ratio}")));
                }
                EnsembleKind::Wishart { n, m: ((n as f64 / ratio).round() as usize).max(1) }
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl EnsembleKind {
    pub fn dim(&self) -> usize {
        match *self {
            EnsembleKind::Wigner { n, .. } | EnsembleKind::Wishart { n, .. } => n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EnsembleKind::Wigner { n, .. } if n < 2 => {
                Err(Error::InvalidLaw(format!("Wigner size must be at least 2, got {n}")))
            }
            EnsembleKind::Wishart { n, m } if n < 2 || m < 1 => {
                Err(Error::InvalidLaw(format!("Wishart needs n ≥ 2 and m ≥ 1, got {n}×{m}")))
            }
            _ => Ok(()),
        }
    }

    fn is_real(&self) -> bool {
        !matches!(self, EnsembleKind::Wigner { complex: true, .. })
    }
}

/// Standard normals at consecutive entry indices `first, first+1, …` of one
/// matrix stream.
struct Normals(ChaCha8Rng);

impl Normals {
    fn new(seed: u64, matrix: u64, first: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(matrix);
        // two u64 (four words) per entry
        rng.set_word_pos(4 * first as u128);
        Normals(rng)
    }

    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Box–Muller, cosine branch.
    fn next(&mut self) -> f64 {
        let u = 1.0 - self.unit();
        let v = self.unit();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }
}

fn row_normals(seed: u64, matrix: u64, row: usize, cols: usize) -> Vec<f64> {
    let mut g = Normals::new(seed, matrix, (row * cols) as u64);
    (0..cols).map(|_| g.next()).collect()
}

/// Row-major real symmetric sample, `None` for complex ensembles.
fn sample_real(kind: EnsembleKind, seed: u64, matrix: u64) -> Option<Vec<f64>> {
    match kind {
        EnsembleKind::Wigner { complex: true, .. } => None,
        EnsembleKind::Wigner { n, complex: false } => {
            let s = 1.0 / (n as f64).sqrt();
            let rows: Vec<Vec<f64>> =
                (0..n).into_par_iter().map(|i| row_normals(seed, matrix, i, n)).collect();
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = s * rows[i][j];
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
            Some(a)
        }
        EnsembleKind::Wishart { n, m } => {
            let s = 1.0 / (m as f64).sqrt();
            let x: Vec<f64> = (0..n)
                .into_par_iter()
                .flat_map_iter(|i| row_normals(seed, matrix, i, m).into_iter().map(move |v| s * v))
                .collect();
            let mut w = vec![0.0; n * n];
            // SAFETY: x is n×m row-major, w is n×n row-major; xᵀ is addressed
            // through swapped strides.
            unsafe {
                matrixmultiply::dgemm(
                    n, m, n, 1.0,
                    x.as_ptr(), m as isize, 1,
                    x.as_ptr(), 1, m as isize,
                    0.0,
                    w.as_mut_ptr(), n as isize, 1,
                );
            }
            for i in 0..n {
                for j in 0..i {
                    let v = 0.5 * (w[i * n + j] + w[j * n + i]);
                    w[i * n + j] = v;
                    w[j * n + i] = v;
                }
            }
            Some(w)
        }
    }
}

fn sample_indexed(kind: EnsembleKind, seed: u64, matrix: u64) -> CMatrix {
    let n = kind.dim();
    if let Some(a) = sample_real(kind, seed, matrix) {
        return CMatrix::from_vec_unchecked(n, a.into_iter().map(|v| C64::new(v, 0.0)).collect());
    }
    // complex Hermitian: off-diagonal (g + ig')/√(2n), diagonal g/√n
    let rows: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| row_normals(seed, matrix, i, 2 * n)).collect();
    let s = 1.0 / (n as f64).sqrt();
    let t = s / 2f64.sqrt();
    let mut a = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        a[i * n + i] = C64::new(s * rows[i][2 * i], 0.0);
        for j in i + 1..n {
            let v = C64::new(t * rows[i][2 * j], t * rows[i][2 * j + 1]);
            a[i * n + j] = v;
            a[j * n + i] = v.conj();
        }
    }
    CMatrix::from_vec_unchecked(n, a)
}

/// One Hermitian sample; identical for identical specs.
pub fn sample(spec: &EnsembleSpec) -> Result<CMatrix> {
    spec.kind.validate()?;
    Ok(sample_indexed(spec.kind, spec.seed, 0))
}

/// Eigenvalues of one sample of `p`.
#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

impl Spectrum {
    pub fn len(&self) -> usize {
        match self {
            Spectrum::Real(v) => v.len(),
            Spectrum::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One value per line, complex as `re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            Spectrum::Real(v) => v.iter().for_each(|x| writeln!(out, "{x:.17e}").unwrap()),
            Spectrum::Complex(v) => {
                v.iter().for_each(|z| writeln!(out, "{:.17e},{:.17e}", z.re, z.im).unwrap())
            }
        }
        out
    }
}

fn real_matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    // SAFETY: all three buffers are n×n row-major.
    unsafe {
        matrixmultiply::dgemm(
            n, n, n, 1.0,
            a.as_ptr(), n as isize, 1,
            b.as_ptr(), n as isize, 1,
            0.0,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
    c
}

/// `p` on real symmetric matrices with real coefficients.
fn eval_real(p: &NcPolynomial, mats: &[Option<Vec<f64>>], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for (word, c) in p.terms() {
        let letters = word.letters();
        if letters.is_empty() {
            (0..n).for_each(|i| out[i * n + i] += c.re);
            continue;
        }
        let first = mats[letters[0].var].as_ref().expect("sampled");
        let mut acc: Option<Vec<f64>> = None;
        for l in &letters[1..] {
            let m = mats[l.var].as_ref().expect("sampled");
            acc = Some(real_matmul(acc.as_deref().unwrap_or(first), m, n));
        }
        let prod = acc.as_deref().unwrap_or(first);
        out.iter_mut().zip(prod).for_each(|(o, v)| *o += c.re * v);
    }
    out
}

/// Spectrum of `p` on one independent tuple of `n×n` samples, variable `k`
/// drawn from stream `k` of `seed`.
pub fn poly_spectrum(
    p: &NcPolynomial,
    ensembles: &BTreeMap<String, Ensemble>,
    n: usize,
    seed: u64,
) -> Result<Spectrum> {
    let used = p.used_vars();
    let mut kinds = vec![None; p.vars().len()];
    for &v in &used {
        let name = &p.vars()[v];
        let e = ensembles.get(name).ok_or_else(|| Error::MissingLaw(name.clone()))?;
        kinds[v] = Some(e.kind(n)?);
    }
    let real_coeffs = p.terms().all(|(_, c)| c.im == 0.0);
    let all_real = kinds.iter().flatten().all(|k| k.is_real());
    let selfadjoint = p.is_selfadjoint();
    if selfadjoint && real_coeffs && all_real {
        let mats: Vec<Option<Vec<f64>>> = kinds
            .iter()
            .enumerate()
            .map(|(v, k)| k.and_then(|k| sample_real(k, seed, v as u64)))
            .collect();
        let mut a = eval_real(p, &mats, n);
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (a[i * n + j] + a[j * n + i]);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        return Ok(Spectrum::Real(eigvals_sym_real(a, n)?));
    }
    let mut assignment = BTreeMap::new();
    for (v, k) in kinds.iter().enumerate() {
        let m = match k {
            Some(k) => sample_indexed(*k, seed, v as u64),
            None => CMatrix::zeros(n),
        };
        assignment.insert(p.vars()[v].clone(), m);
    }
    let a = p.eval_on_matrices(&assignment)?;
    if selfadjoint {
        let a = (&a + &a.adjoint()).scale_real(0.5);
        Ok(Spectrum::Real(eigvals_herm(&a)?))
    } else {
        Ok(Spectrum::Complex(eig_general(&a)?))
    }
}

/// Spectra of `trials` independent samples, concatenated in trial order.
pub fn pooled_spectrum(
    p: &NcPolynomial,
    ensembles: &BTreeMap<String, Ensemble>,
    n: usize,
    seed: u64,
    trials: usize,
) -> Result<Spectrum> {
    let parts: Vec<Spectrum> = (0..trials)
        .map(|t| poly_spectrum(p, ensembles, n, trial_seed(seed, t)))
        .collect::<Result<_>>()?;
    let complex = parts.iter().any(|s| matches!(s, Spectrum::Complex(_)));
    Ok(if complex {
        Spectrum::Complex(
            parts
                .into_iter()
                .flat_map(|s| match s {
                    Spectrum::Complex(v) => v,
                    Spectrum::Real(v) => v.into_iter().map(|x| C64::new(x, 0.0)).collect(),
                })
                .collect(),
        )
    } else {
        Spectrum::Real(
            parts
                .into_iter()
                .flat_map(|s| match s {
                    Spectrum::Real(v) => v,
                    Spectrum::Complex(_) => unreachable!(),
                })
                .collect(),
        )
    })
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and a
/// curve's CDF (normalized to mass 1).
pub fn ks_curve(samples: &[f64], curve: &DensityCurve) -> f64 {
    let s = sorted(samples);
    let n = s.len() as f64;
    let cdf = curve.cdf();
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = curve.cdf_at(&cdf, x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_samples(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Agreement between complex samples and a Brown field.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialComparison {
    pub center: C64,
    /// `sup_r |F_samples(r) − F_field(r)|`, both CDFs about `center`.
    pub sup_distance: f64,
    /// Pearson statistic over coarse cells with expected count ≥ 5.
    pub chi_square: f64,
    pub cells: usize,
}

/// Radial CDFs about the midpoint of the two centroids, and a chi-square
/// summary over cells of `block × block` grid nodes.
pub fn compare_field(samples: &[C64], field: &BrownField, block: usize) -> RadialComparison {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<C64>() / n;
    let center = 0.5 * (mean + field.centroid());
    let reach = (0..field.grid.len())
        .map(|k| (field.grid.point(k) - center).norm())
        .fold(0.0, f64::max);
    let radii: Vec<f64> = (0..=400).map(|k| reach * k as f64 / 400.0).collect();
    let field_cdf = field.radial_cdf(center, &radii);
    let total = field_cdf[field_cdf.len() - 1].max(f64::MIN_POSITIVE);
    let mut dist: Vec<f64> = samples.iter().map(|z| (z - center).norm()).collect();
    dist.sort_by(f64::total_cmp);
    let sup_distance = radii
        .iter()
        .zip(&field_cdf)
        .map(|(&r, &f)| {
            let emp = dist.partition_point(|&d| d <= r) as f64 / n;
            (emp - f / total).abs()
        })
        .fold(0.0, f64::max);

    let block = block.max(1);
    let (nr, ni) = (field.grid.re.len(), field.grid.im.len());
    let h = field.fd_step;
    let (cr, ci) = (nr.div_ceil(block), ni.div_ceil(block));
    let mut expected = vec![0.0; cr * ci];
    for j in 0..ni {
        for i in 0..nr {
            expected[(j / block) * cr + i / block] += field.values[j * nr + i] * h * h;
        }
    }
    let mut observed = vec![0.0; cr * ci];
    let (r0, i0) = (field.grid.re[0] - 0.5 * h, field.grid.im[0] - 0.5 * h);
    for z in samples {
        let (a, b) = (((z.re - r0) / h).floor(), ((z.im - i0) / h).floor());
        if a >= 0.0 && b >= 0.0 && (a as usize) < nr && (b as usize) < ni {
            observed[(b as usize / block) * cr + a as usize / block] += 1.0;
        }
    }
    let scale = n / expected.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let (mut chi_square, mut cells) = (0.0, 0);
    for (e, o) in expected.iter().zip(&observed) {
        let e = e * scale;
        if e >= 5.0 {
            chi_square += (o - e) * (o - e) / e;
            cells += 1;
        }
    }
    RadialComparison { center, sup_distance, chi_square, cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::ScalarLaw;
    use crate::ncexpr::parse;
    use crate::recover::{density_1d, linspace, Grid2d, DEFAULT_EPS_SCHEDULE};

    fn wigner(n: usize, seed: u64) -> EnsembleSpec {
        EnsembleSpec { kind: EnsembleKind::Wigner { n, complex: false }, seed }
    }

    fn curve(law: &ScalarLaw, lo: f64, hi: f64) -> DensityCurve {
        density_1d(|z| law.cauchy(z), &linspace(lo, hi, 801), &DEFAULT_EPS_SCHEDULE).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample(&wigner(50, 7)).unwrap();
        let b = sample(&wigner(50, 7)).unwrap();
        let c = sample(&wigner(50, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.hermitian_deviation(), 0.0);
        let spec = EnsembleSpec { kind: EnsembleKind::Wigner { n: 30, complex: true }, seed: 1 };
        let h = sample(&spec).unwrap();
        assert!(h.hermitian_deviation() <= 1e-14);
        assert!((0..30).all(|i| h[(i, i)].im == 0.0));
    }

    #[test]
    fn entries_do_not_depend_on_draw_order() {
        let row = row_normals(3, 1, 5, 20);
        let mut g = Normals::new(3, 1, 5 * 20 + 7);
        assert_eq!(g.next(), row[7]);
    }

    #[test]
    fn invalid_specs() {
        assert!(sample(&wigner(1, 0)).is_err());
        let w = EnsembleSpec { kind: EnsembleKind::Wishart { n: 4, m: 0 }, seed: 0 };
        assert!(sample(&w).is_err());
        assert!(Ensemble::Wishart { ratio: -1.0 }.kind(10).is_err());
    }

    #[test]
    fn wigner_variance() {
        let a = sample(&wigner(1000, 11)).unwrap();
        let ev = eigvals_herm(&a).unwrap();
        let m2 = ev.iter().map(|x| x * x).sum::<f64>() / ev.len() as f64;
        assert!((m2 - 1.0).abs() < 0.03, "{m2}");
    }

    #[test]
    fn wishart_support_and_psd() {
        let spec = EnsembleSpec { kind: EnsembleKind::Wishart { n: 600, m: 2400 }, seed: 5 };
        let a = sample(&spec).unwrap();
        let ev = eigvals_herm(&a).unwrap();
        let top = ev[ev.len() - 1];
        assert!(ev[0] >= -1e-10 * top);
        assert!(ev[0] >= 0.25 - 0.1 && top <= 2.25 + 0.1, "{} {}", ev[0], top);
        let mean = ev.iter().sum::<f64>() / ev.len() as f64;
        assert!((mean - 1.0).abs() < 0.01);
    }

    #[test]
    fn wigner_spectrum_is_ks_close_to_semicircle() {
        let p = parse("x", &["x"]).unwrap();
        let ens = [("x".to_string(), Ensemble::Wigner { complex: false })].into();
        let Spectrum::Real(ev) = poly_spectrum(&p, &ens, 1000, 2).unwrap() else { panic!() };
        let d = ks_curve(&ev, &curve(&ScalarLaw::standard_semicircle(), -2.5, 2.5));
        assert!(d < 0.05, "{d}");
    }

    #[test]
    fn hermitian_route_trace() {
        let p = parse("x*y + y*x + x^2", &["x", "y"]).unwrap();
        let ens = [
            ("x".to_string(), Ensemble::Wigner { complex: false }),
            ("y".to_string(), Ensemble::Wishart { ratio: 0.25 }),
        ]
        .into();
        let n = 200;
        let Spectrum::Real(ev) = poly_spectrum(&p, &ens, n, 4).unwrap() else { panic!() };
        assert_eq!(ev.len(), n);
        let mut a = BTreeMap::new();
        a.insert("x".to_string(), sample_indexed(ens["x"].kind(n).unwrap(), 4, 0));
        a.insert("y".to_string(), sample_indexed(ens["y"].kind(n).unwrap(), 4, 1));
        let tr = p.eval_on_matrices(&a).unwrap().trace().re;
        assert!((tr - ev.iter().sum::<f64>()).abs() <= 1e-8 * tr.abs().max(1.0));
    }

    #[test]
    fn complex_route_fills_disk() {
        let p = parse("x + 1i*y", &["x", "y"]).unwrap();
        let ens = [
            ("x".to_string(), Ensemble::Wigner { complex: true }),
            ("y".to_string(), Ensemble::Wigner { complex: true }),
        ]
        .into();
        let Spectrum::Complex(ev) = poly_spectrum(&p, &ens, 300, 9).unwrap() else { panic!() };
        let inside = ev.iter().filter(|z| z.norm() <= 2f64.sqrt() + 0.1).count();
        assert!(inside as f64 >= 0.98 * ev.len() as f64);
        let half = ev.iter().filter(|z| z.norm() <= 1.0).count() as f64 / ev.len() as f64;
        assert!((half - 0.5).abs() < 0.06, "{half}");
    }

    #[test]
    fn ks_trivial_cases() {
        let a = [0.3, -1.0, 2.0, 0.5];
        assert_eq!(ks_samples(&a, &a), 0.0);
        assert_eq!(ks_samples(&[0.0, 0.1], &[5.0, 6.0]), 1.0);
        let c = curve(&ScalarLaw::standard_semicircle(), -2.5, 2.5);
        assert!((ks_curve(&[10.0, 11.0], &c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semicircle_samples_vs_curve() {
        let law = ScalarLaw::standard_semicircle();
        let s = law.sample(2000, 3);
        assert!(ks_curve(&s, &curve(&law, -2.5, 2.5)) <= 0.05);
    }

    #[test]
    fn field_comparison_on_uniform_disk() {
        let grid = Grid2d::square(-2.0, 2.0, 101).unwrap();
        let values: Vec<f64> = (0..grid.len())
            .map(|k| if grid.point(k).norm_sqr() <= 2.0 { 1.0 / (2.0 * std::f64::consts::PI) } else { 0.0 })
            .collect();
        let field = BrownField {
            g: vec![C64::new(0.0, 0.0); grid.len()],
            epsilon: 1e-3,
            fd_step: grid.spacing(),
            mass: 1.0,
            failed: vec![],
            one_sided: 0,
            values,
            grid,
        };
        let mut g = Normals::new(1, 0, 0);
        let pts: Vec<C64> = (0..4000)
            .map(|_| {
                let r = (2.0 * g.unit()).sqrt();
                let t = std::f64::consts::TAU * g.unit();
                C64::from_polar(r, t)
            })
            .collect();
        let c = compare_field(&pts, &field, 10);
        assert!(c.sup_distance < 0.05, "{}", c.sup_distance);
        assert!(c.cells > 10);
        assert!(c.chi_square / (c.cells as f64) < 3.0);
    }

    #[test]
    fn spectrum_csv() {
        assert_eq!(Spectrum::Real(vec![1.0]).to_csv().lines().count(), 1);
        let s = Spectrum::Complex(vec![C64::new(1.0, -2.0)]).to_csv();
        assert!(s.contains(','));
    }
}
