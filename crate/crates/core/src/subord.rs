//! Operator-valued free additive convolution by subordination.
//!
//! For `M_n`-free `x` and `y` and `b` in the operator upper half-plane,
//! `G_{x+y}(b) = G_x(ω(b))` where `ω(b)` is the attracting fixed point of
//! `f_b(w) = h_y(h_x(w) + b) + b`, `h(b) = G(b)⁻¹ − b`. Sums of more than two
//! terms are folded: `x₁ + (x₂ + (⋯))`, each inner sum being another
//! fixed-point evaluator.

use std::collections::BTreeMap;
use std::sync::Mutex;

use crate::cmat::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::laws::{CoefficientTerm, ScalarLaw};
use crate::linpen::{lambda_embed, LinearPencil, Payload};

/// Controls of the subordination iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Relative Frobenius residual `‖f_b(w) − w‖ ≤ tol·max(1, ‖w‖)`.
    pub tol: f64,
    pub max_iter: usize,
    /// `w ← (1−α)·f_b(w) + α·w`.
    pub damping: f64,
    /// Relative size of the `iδ` put on the non-corner diagonal when a scalar
    /// argument is embedded: `δ = regularization·max(1, |z|)` or `·max(1, ε)`.
    pub regularization: f64,
    /// History depth of Anderson acceleration; 0 is plain iteration. An
    /// extrapolated iterate outside the upper half-plane is replaced by the
    /// plain step.
    pub anderson: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-11,
            max_iter: 100_000,
            damping: 0.0,
            regularization: 1e-9,
            anderson: 0,
        }
    }
}

impl FixedPointOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidLaw(format!(
                "invalid fixed-point options: tol {}, max_iter {}, damping {}",
                self.tol, self.max_iter, self.damping
            )));
        }
        if !(self.regularization >= 0.0) {
            return Err(Error::InvalidLaw("regularization must be non-negative".into()));
        }
        Ok(())
    }
}

/// `b ↦ G(b)` on the operator upper half-plane of `M_n`.
pub trait OperatorTransform: Send + Sync {
    fn dim(&self) -> usize;

    fn cauchy(&self, b: &CMatrix) -> Result<CMatrix>;

    fn h(&self, b: &CMatrix) -> Result<CMatrix> {
        Ok(&self.cauchy(b)?.inv()? - b)
    }
}

impl OperatorTransform for CoefficientTerm {
    fn dim(&self) -> usize {
        CoefficientTerm::dim(self)
    }

    fn cauchy(&self, b: &CMatrix) -> Result<CMatrix> {
        CoefficientTerm::cauchy(self, b)
    }

    fn h(&self, b: &CMatrix) -> Result<CMatrix> {
        CoefficientTerm::h(self, b)
    }
}

/// Converged subordination data.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub omega: CMatrix,
    /// `G_x(ω) = G_{x+y}(b)`.
    pub g: CMatrix,
    pub iterations: usize,
    pub residual: f64,
}

/// Fixed point of `f_b(w) = h_y(h_x(w) + b) + b` started from `w₀ = b`.
pub fn free_add(
    gx: &dyn OperatorTransform,
    gy: &dyn OperatorTransform,
    b: &CMatrix,
    opts: &FixedPointOptions,
) -> Result<FixedPoint> {
    free_add_from(gx, gy, b, b, opts)
}

/// Same, started from `w0`. Any start in the operator upper half-plane
/// reaches the same fixed point.
pub fn free_add_from(
    gx: &dyn OperatorTransform,
    gy: &dyn OperatorTransform,
    b: &CMatrix,
    w0: &CMatrix,
    opts: &FixedPointOptions,
) -> Result<FixedPoint> {
    if !b.in_upper_half_plane() {
        return Err(Error::NotInUpperHalfPlane(b.uhp_check().min_imag_eig));
    }
    if w0.dim() != b.dim() || !w0.in_upper_half_plane() {
        return Err(Error::NotInUpperHalfPlane(w0.uhp_check().min_imag_eig));
    }
    let mut w = w0.clone();
    let mut residual = f64::INFINITY;
    let mut history = Anderson::new(opts.anderson);
    for it in 0..opts.max_iter {
        let g = gx.cauchy(&w)?;
        let hx = &g.inv()? - &w;
        let f = &gy.h(&(&hx + b))? + b;
        residual = (&f - &w).norm_fro() / w.norm_fro().max(1.0);
        if residual <= opts.tol {
            return Ok(FixedPoint {
                omega: w,
                g,
                iterations: it,
                residual,
            });
        }
        let plain = if opts.damping > 0.0 {
            &f.scale_real(1.0 - opts.damping) + &w.scale_real(opts.damping)
        } else {
            f
        };
        if !plain.is_finite() || !plain.in_upper_half_plane() {
            return Err(Error::LeftHalfPlane(it + 1));
        }
        w = match history.step(&w, &plain) {
            Some(next) if next.is_finite() && next.in_upper_half_plane() => next,
            Some(_) => {
                history.clear();
                plain
            }
            None => plain,
        };
    }
    Err(Error::FixedPointNoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Anderson mixing over the last `depth` iterates, with the residual taken
/// as `g(w) − w` for the plain update `g`.
struct Anderson {
    depth: usize,
    prev: Option<(Vec<C64>, Vec<C64>)>,
    dw: Vec<Vec<C64>>,
    dr: Vec<Vec<C64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Anderson { depth, prev: None, dw: Vec::new(), dr: Vec::new() }
    }

    fn clear(&mut self) {
        self.prev = None;
        self.dw.clear();
        self.dr.clear();
    }

    fn step(&mut self, w: &CMatrix, plain: &CMatrix) -> Option<CMatrix> {
        if self.depth == 0 {
            return None;
        }
        let wv = w.as_slice().to_vec();
        let r: Vec<C64> = plain.as_slice().iter().zip(&wv).map(|(a, b)| a - b).collect();
        if let Some((pw, pr)) = self.prev.take() {
            self.dw.push(wv.iter().zip(&pw).map(|(a, b)| a - b).collect());
            self.dr.push(r.iter().zip(&pr).map(|(a, b)| a - b).collect());
            if self.dw.len() > self.depth {
                self.dw.remove(0);
                self.dr.remove(0);
            }
        }
        self.prev = Some((wv, r.clone()));
        let m = self.dr.len();
        if m == 0 {
            return None;
        }
        // least squares min ‖r − ΔR γ‖ by regularized normal equations
        let dot = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>();
        let mut normal = CMatrix::from_fn(m, |i, j| dot(&self.dr[i], &self.dr[j]));
        let scale = (0..m).map(|i| normal[(i, i)].re).fold(0.0, f64::max);
        for i in 0..m {
            normal[(i, i)] += C64::new(1e-12 * scale.max(f64::MIN_POSITIVE), 0.0);
        }
        let rhs: Vec<C64> = (0..m).map(|i| dot(&self.dr[i], &r)).collect();
        let inv = normal.inv().ok()?;
        let gamma: Vec<C64> = (0..m).map(|i| (0..m).map(|j| inv[(i, j)] * rhs[j]).sum()).collect();
        let mut next = plain.clone();
        let n = w.dim();
        for (k, g) in gamma.iter().enumerate() {
            for idx in 0..n * n {
                next[(idx / n, idx % n)] -= g * (self.dw[k][idx] + self.dr[k][idx]);
            }
        }
        Some(next)
    }
}

/// `x + y` for free `x`, `y`, as an evaluator.
pub struct FreeSum<'a> {
    pub x: &'a dyn OperatorTransform,
    pub y: &'a dyn OperatorTransform,
    pub opts: FixedPointOptions,
}

impl OperatorTransform for FreeSum<'_> {
    fn dim(&self) -> usize {
        self.x.dim()
    }

    fn cauchy(&self, b: &CMatrix) -> Result<CMatrix> {
        Ok(free_add(self.x, self.y, b, &self.opts)?.g)
    }
}

/// Folds `terms[0] + (terms[1] + (⋯))` and evaluates at `b`.
///
/// Each inner sum restarts its fixed point from the subordination function
/// of its previous call, the arguments of consecutive outer iterations
/// being close.
pub fn fold_cauchy(
    terms: &[&dyn OperatorTransform],
    b: &CMatrix,
    opts: &FixedPointOptions,
) -> Result<CMatrix> {
    match Fold::chain(terms, opts) {
        None => b.inv(),
        Some(f) => f.cauchy(b),
    }
}

struct Fold<'a> {
    head: &'a dyn OperatorTransform,
    tail: Option<Box<Fold<'a>>>,
    opts: FixedPointOptions,
    last: Mutex<Option<CMatrix>>,
}

impl<'a> Fold<'a> {
    fn chain(terms: &[&'a dyn OperatorTransform], opts: &FixedPointOptions) -> Option<Self> {
        let (head, rest) = terms.split_first()?;
        Some(Fold {
            head: *head,
            tail: Self::chain(rest, opts).map(Box::new),
            opts: *opts,
            last: Mutex::new(None),
        })
    }
}

impl OperatorTransform for Fold<'_> {
    fn dim(&self) -> usize {
        self.head.dim()
    }

    fn cauchy(&self, b: &CMatrix) -> Result<CMatrix> {
        let Some(tail) = &self.tail else {
            return self.head.cauchy(b);
        };
        let start = self.last.lock().expect("not poisoned").take();
        let fp = match start {
            Some(w0) if w0.in_upper_half_plane() => {
                free_add_from(self.head, tail.as_ref(), b, &w0, &self.opts)
                    .or_else(|_| free_add(self.head, tail.as_ref(), b, &self.opts))
            }
            _ => free_add(self.head, tail.as_ref(), b, &self.opts),
        }?;
        *self.last.lock().expect("not poisoned") = Some(fp.omega);
        Ok(fp.g)
    }
}

/// Operator-valued Cauchy transform of a pencil whose variables are free
/// with the given laws. Coefficient eigen-decompositions are computed once.
#[derive(Debug, Clone)]
pub struct PencilEvaluator {
    pencil: LinearPencil,
    names: Vec<String>,
    terms: Vec<CoefficientTerm>,
    opts: FixedPointOptions,
}

impl PencilEvaluator {
    pub fn new(
        pencil: &LinearPencil,
        laws: &BTreeMap<String, ScalarLaw>,
        opts: &FixedPointOptions,
    ) -> Result<Self> {
        opts.validate()?;
        let mut names = Vec::new();
        let mut terms = Vec::new();
        for (name, coeff) in pencil.coeffs() {
            if coeff.is_zero() {
                continue;
            }
            let law = laws.get(name).ok_or_else(|| Error::MissingLaw(name.clone()))?;
            terms.push(CoefficientTerm::new(law.clone(), coeff.clone())?);
            names.push(name.clone());
        }
        Ok(PencilEvaluator {
            pencil: pencil.clone(),
            names,
            terms,
            opts: *opts,
        })
    }

    pub fn pencil(&self) -> &LinearPencil {
        &self.pencil
    }

    pub fn options(&self) -> &FixedPointOptions {
        &self.opts
    }

    /// Variables with nonzero coefficients, in default fold order.
    pub fn variables(&self) -> &[String] {
        &self.names
    }

    /// `G_{p̂}(b) = E[(b − p̂)⁻¹]`.
    pub fn cauchy(&self, b: &CMatrix) -> Result<CMatrix> {
        let refs: Vec<&dyn OperatorTransform> =
            self.terms.iter().map(|t| t as &dyn OperatorTransform).collect();
        self.eval(&refs, b)
    }

    /// Same, folding the variables in the given order.
    pub fn cauchy_with_order(&self, b: &CMatrix, order: &[&str]) -> Result<CMatrix> {
        if order.len() != self.names.len() {
            return Err(Error::Dimension(format!(
                "fold order lists {} variables, pencil has {}",
                order.len(),
                self.names.len()
            )));
        }
        let mut refs: Vec<&dyn OperatorTransform> = Vec::with_capacity(order.len());
        let mut used = vec![false; self.names.len()];
        for name in order {
            let k = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::MissingLaw(name.to_string()))?;
            if std::mem::replace(&mut used[k], true) {
                return Err(Error::Dimension(format!("`{name}` repeated in fold order")));
            }
            refs.push(&self.terms[k]);
        }
        self.eval(&refs, b)
    }

    fn eval(&self, terms: &[&dyn OperatorTransform], b: &CMatrix) -> Result<CMatrix> {
        if b.dim() != self.pencil.dim() {
            return Err(Error::Dimension(format!(
                "argument is {}×{}, pencil is {}×{}",
                b.dim(),
                b.dim(),
                self.pencil.dim(),
                self.pencil.dim()
            )));
        }
        if !b.in_upper_half_plane() {
            return Err(Error::NotInUpperHalfPlane(b.uhp_check().min_imag_eig));
        }
        let shifted = b - self.pencil.constant();
        fold_cauchy(terms, &shifted, &self.opts)
    }

    /// Embeds `payload` with the configured regularization.
    pub fn embed(&self, payload: Payload) -> Result<CMatrix> {
        let scale = match payload {
            Payload::Scalar(z) => z.norm().max(1.0),
            Payload::Brown { eps, .. } => eps.max(1.0),
        };
        lambda_embed(&self.pencil, payload, self.opts.regularization * scale)
    }

    /// The scalar quantity of interest: `φ((z − p)⁻¹)` for a corner of size 1,
    /// the regularized Brown transform `G_{ε,p}(λ)` (entry (2,1)) for size 2.
    pub fn scalar(&self, payload: Payload) -> Result<C64> {
        let g = self.cauchy(&self.embed(payload)?)?;
        Ok(match payload {
            Payload::Scalar(_) => g[(0, 0)],
            Payload::Brown { .. } => g[(1, 0)],
        })
    }
}

/// One-shot [`PencilEvaluator::cauchy`].
pub fn pencil_cauchy(
    pencil: &LinearPencil,
    laws: &BTreeMap<String, ScalarLaw>,
    b: &CMatrix,
    opts: &FixedPointOptions,
) -> Result<CMatrix> {
    PencilEvaluator::new(pencil, laws, opts)?.cauchy(b)
}

/// One-shot `φ((z − p)⁻¹)` for a selfadjoint corner-1 pencil, or the Brown
/// entry for a hermitized pencil with `payload = Brown`.
pub fn scalar_cauchy(
    pencil: &LinearPencil,
    laws: &BTreeMap<String, ScalarLaw>,
    payload: Payload,
    opts: &FixedPointOptions,
) -> Result<C64> {
    PencilEvaluator::new(pencil, laws, opts)?.scalar(payload)
}
