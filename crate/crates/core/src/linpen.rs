//! Linear pencils: selfadjoint linearizations of polynomials, hermitized
//! linearizations for Brown measures, ingestion of descriptor realizations
//! of rational functions, and certification by matrix substitution.
//!
//! A pencil `L = c₀ ⊗ 1 + Σ cⱼ ⊗ xⱼ` with corner size `r` is split as
//! `L = [[ℓ, U], [U*, Q]]` with `ℓ` the leading `r×r` block. The function it
//! represents is the Schur complement `ℓ − U Q⁻¹ U*`, so that the leading
//! block of `(Λ − L)⁻¹` is `(Λ₀ − (ℓ − U Q⁻¹ U*))⁻¹`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cmat::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::ncexpr::{Assignment, Letter, NcPolynomial, Word};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Affine Hermitian matrix expression `constant ⊗ 1 + Σ coeffs[x] ⊗ x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPencil {
    corner: usize,
    constant: CMatrix,
    coeffs: BTreeMap<String, CMatrix>,
}

fn hermitian_check(name: &str, m: &CMatrix) -> Result<()> {
    if !m.is_finite() {
        return Err(Error::InvalidPencil(format!("{name} has non-finite entries")));
    }
    let dev = m.hermitian_deviation();
    if dev > 1e-12 * m.norm_fro().max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

impl LinearPencil {
    pub fn new(
        constant: CMatrix,
        coeffs: BTreeMap<String, CMatrix>,
        corner: usize,
    ) -> Result<Self> {
        let n = constant.dim();
        if n == 0 {
            return Err(Error::InvalidPencil("empty pencil".into()));
        }
        if !(corner == 1 || corner == 2) || corner > n {
            return Err(Error::InvalidPencil(format!(
                "corner size {corner} not possible for a {n}×{n} pencil"
            )));
        }
        hermitian_check("constant", &constant)?;
        for (name, c) in &coeffs {
            if c.dim() != n {
                return Err(Error::Dimension(format!(
                    "coefficient of `{name}` is {}×{}, pencil is {n}×{n}",
                    c.dim(),
                    c.dim()
                )));
            }
            hermitian_check(name, c)?;
        }
        Ok(LinearPencil {
            corner,
            constant,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn corner(&self) -> usize {
        self.corner
    }

    pub fn constant(&self) -> &CMatrix {
        &self.constant
    }

    pub fn coeffs(&self) -> &BTreeMap<String, CMatrix> {
        &self.coeffs
    }

    pub fn coefficient(&self, var: &str) -> Option<&CMatrix> {
        self.coeffs.get(var)
    }

    pub fn vars(&self) -> Vec<String> {
        self.coeffs.keys().cloned().collect()
    }

    /// `constant ⊗ I_m + Σ coeffs[x] ⊗ A_x`.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<CMatrix> {
        let m = assignment.values().map(|a| a.dim()).next().unwrap_or(1);
        let mut out = self.constant.kron_identity(m);
        for (name, c) in &self.coeffs {
            let a = assignment
                .get(name)
                .ok_or_else(|| Error::MissingAssignment(name.clone()))?;
            if a.dim() != m {
                return Err(Error::Dimension(format!(
                    "assignment of `{name}` is {}×{}, expected {m}×{m}",
                    a.dim(),
                    a.dim()
                )));
            }
            out += &c.kron(a);
        }
        Ok(out)
    }

    /// Plain-text serialization; see [`LinearPencil::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim {}", self.dim());
        let _ = writeln!(s, "corner {}", self.corner);
        write_matrix(&mut s, "constant", &self.constant);
        for (name, c) in &self.coeffs {
            write_matrix(&mut s, &format!("var {name}"), c);
        }
        s
    }

    /// Parses the plain-text format:
    ///
    /// ```text
    /// dim 3
    /// corner 1
    /// constant
    /// 0,0 0,0 0,0
    /// 0,0 0,0 -1,0
    /// 0,0 -1,0 0,0
    /// var x
    /// 0,0 1,0 0.5,0
    /// ...
    /// ```
    ///
    /// Entries are `re,im` pairs separated by whitespace; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut corner = 1usize;
        let mut constant: Option<CMatrix> = None;
        let mut coeffs = BTreeMap::new();
        let mut section: Option<(Option<String>, Vec<Vec<C64>>, usize)> = None;

        let bad = |line: usize, msg: String| Error::InvalidPencil(format!("line {line}: {msg}"));

        let finish = |sec: Option<(Option<String>, Vec<Vec<C64>>, usize)>,
                          dim: Option<usize>,
                          constant: &mut Option<CMatrix>,
                          coeffs: &mut BTreeMap<String, CMatrix>|
         -> Result<()> {
            if let Some((name, rows, line)) = sec {
                let n = dim.ok_or_else(|| bad(line, "`dim` must come first".into()))?;
                if rows.len() != n {
                    return Err(bad(line, format!("expected {n} rows, found {}", rows.len())));
                }
                let m = CMatrix::from_rows(&rows).map_err(|e| bad(line, e.to_string()))?;
                match name {
                    None => *constant = Some(m),
                    Some(v) => {
                        if coeffs.insert(v.clone(), m).is_some() {
                            return Err(bad(line, format!("variable `{v}` given twice")));
                        }
                    }
                }
            }
            Ok(())
        };

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let head = words.next().unwrap();
            match head {
                "dim" | "corner" => {
                    let v: usize = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| bad(line_no, format!("`{head}` needs a positive integer")))?;
                    if head == "dim" {
                        dim = Some(v);
                    } else {
                        corner = v;
                    }
                }
                "constant" => {
                    finish(section.take(), dim, &mut constant, &mut coeffs)?;
                    section = Some((None, Vec::new(), line_no));
                }
                "var" => {
                    let name = words
                        .next()
                        .ok_or_else(|| bad(line_no, "`var` needs a name".into()))?;
                    finish(section.take(), dim, &mut constant, &mut coeffs)?;
                    section = Some((Some(name.to_string()), Vec::new(), line_no));
                }
                _ => {
                    let sec = section
                        .as_mut()
                        .ok_or_else(|| bad(line_no, "matrix row outside a section".into()))?;
                    let mut row = Vec::new();
                    for tok in line.split_whitespace() {
                        row.push(parse_entry(tok).ok_or_else(|| {
                            bad(line_no, format!("cannot read `{tok}` as re,im"))
                        })?);
                    }
                    if Some(row.len()) != dim {
                        return Err(bad(
                            line_no,
                            format!("row has {} entries, expected {}", row.len(), dim.unwrap_or(0)),
                        ));
                    }
                    sec.1.push(row);
                }
            }
        }
        finish(section.take(), dim, &mut constant, &mut coeffs)?;
        let n = dim.ok_or_else(|| Error::InvalidPencil("missing `dim`".into()))?;
        let constant = constant.unwrap_or_else(|| CMatrix::zeros(n));
        LinearPencil::new(constant, coeffs, corner)
    }
}

fn parse_entry(tok: &str) -> Option<C64> {
    let (re, im) = tok.split_once(',')?;
    let z = C64::new(re.trim().parse().ok()?, im.trim().parse().ok()?);
    z.is_finite().then_some(z)
}

fn write_matrix(s: &mut String, header: &str, m: &CMatrix) {
    let _ = writeln!(s, "{header}");
    for i in 0..m.dim() {
        let row: Vec<String> = m.row(i).iter().map(|z| format!("{:?},{:?}", z.re, z.im)).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
}

/// Accumulates Hermitian entries into a pencil of fixed size.
struct Layout {
    vars: Vec<String>,
    constant: CMatrix,
    coeffs: Vec<CMatrix>,
}

impl Layout {
    fn new(n: usize, vars: &[String]) -> Self {
        Layout {
            vars: vars.to_vec(),
            constant: CMatrix::zeros(n),
            coeffs: vec![CMatrix::zeros(n); vars.len()],
        }
    }

    /// Adds `c` at `(i, j)` and `c̄` at `(j, i)` of the constant (`var = None`)
    /// or of a variable's coefficient.
    fn put(&mut self, i: usize, j: usize, var: Option<usize>, c: C64) {
        let m = match var {
            None => &mut self.constant,
            Some(v) => &mut self.coeffs[v],
        };
        if i == j {
            m[(i, i)] += C64::new(c.re, 0.0);
        } else {
            m[(i, j)] += c;
            m[(j, i)] += c.conj();
        }
    }

    /// Places `Q_{B,A} = −N` (and its adjoint) for the chain
    /// `N = I − S`, `S_{j,j+1} = letters[j+1]`, with `N` of size `d`.
    fn chain(&mut self, a: usize, b: usize, d: usize, letters: &[Letter]) {
        for j in 0..d {
            self.put(b + j, a + j, None, -ONE);
            if j + 1 < d {
                self.put(b + j, a + j + 1, Some(letters[j + 1].var), ONE);
            }
        }
    }

    fn finish(self, corner: usize) -> Result<LinearPencil> {
        let coeffs = self
            .vars
            .into_iter()
            .zip(self.coeffs)
            .filter(|(_, c)| !c.is_zero())
            .collect();
        LinearPencil::new(self.constant, coeffs, corner)
    }
}

fn reversed(w: &Word) -> Word {
    Word(w.letters().iter().rev().map(|l| Letter::new(l.var)).collect())
}

/// Selfadjoint linearization of a selfadjoint polynomial in selfadjoint
/// variables, with corner size 1.
///
/// Each pair `c·w + c̄·w*` with `w = a₁⋯a_k` becomes a block of size
/// `2(k−1)`; each palindrome a block of size `2⌊k/2⌋`; linear terms and the
/// constant sit in the corner. The dimension is at most one plus the number
/// of letters of `p`.
pub fn linearize_sa(p: &NcPolynomial) -> Result<LinearPencil> {
    if p.is_zero() {
        return Err(Error::EmptyPolynomial);
    }
    if !p.is_selfadjoint() {
        return Err(Error::NotSelfadjoint);
    }
    let q = p.strip_stars();
    let mut done: BTreeSet<Word> = BTreeSet::new();
    let mut blocks: Vec<(Word, C64, bool)> = Vec::new();
    let mut n = 1;
    for (w, c) in q.terms() {
        if done.contains(w) || w.len() < 2 {
            continue;
        }
        let rev = reversed(w);
        let palindrome = &rev == w;
        done.insert(w.clone());
        done.insert(rev);
        n += if palindrome { 2 * (w.len() / 2) } else { 2 * (w.len() - 1) };
        blocks.push((w.clone(), c, palindrome));
    }
    let mut lay = Layout::new(n, q.vars());
    for (w, c) in q.terms() {
        match w.len() {
            0 => lay.put(0, 0, None, c),
            1 => lay.put(0, 0, Some(w.letters()[0].var), c),
            _ => {}
        }
    }
    let mut off = 1;
    for (w, c, palindrome) in blocks {
        let l = w.letters();
        let k = l.len();
        if palindrome {
            let m = k / 2;
            let (a, b) = (off, off + m);
            lay.put(0, a, Some(l[0].var), ONE);
            lay.chain(a, b, m, l);
            let last = b + m - 1;
            if k % 2 == 0 {
                lay.put(last, last, None, C64::new(c.re, 0.0));
            } else {
                lay.put(last, last, Some(l[m].var), C64::new(c.re, 0.0));
            }
            off += 2 * m;
        } else {
            let d = k - 1;
            let (a, b) = (off, off + d);
            lay.put(0, a, Some(l[0].var), c);
            lay.put(0, b + d - 1, Some(l[k - 1].var), ONE);
            lay.chain(a, b, d, l);
            off += 2 * d;
        }
    }
    lay.finish(1)
}

/// Selfadjoint linearization of the hermitization `[[0, p], [p*, 0]]` of an
/// arbitrary polynomial in selfadjoint variables, with corner size 2.
///
/// Writing `p = ℓ + u N⁻¹ v` with `N` block-diagonal unit upper-bidiagonal,
/// the pencil is `[[C, 𝒰], [𝒰*, 𝒬]]` with `C = [[0, ℓ], [ℓ*, 0]]`,
/// `𝒰 = [[u, 0], [0, v*]]` and `𝒬 = −[[0, N*], [N, 0]]`.
pub fn hermitized_linearize(p: &NcPolynomial) -> Result<LinearPencil> {
    if p.is_zero() {
        return Err(Error::EmptyPolynomial);
    }
    let q = p.strip_stars();
    let total: usize = q.terms().map(|(w, _)| w.len().saturating_sub(1)).sum();
    let n = 2 + 2 * total;
    let mut lay = Layout::new(n, q.vars());
    let (a0, b0) = (2, 2 + total);
    let mut s = 0;
    for (w, c) in q.terms() {
        let l = w.letters();
        match l.len() {
            0 => lay.put(0, 1, None, c),
            1 => lay.put(0, 1, Some(l[0].var), c),
            k => {
                let d = k - 1;
                lay.put(0, a0 + s, Some(l[0].var), c);
                lay.put(1, b0 + s + d - 1, Some(l[k - 1].var), ONE);
                lay.chain(a0 + s, b0 + s, d, l);
                s += d;
            }
        }
    }
    lay.finish(2)
}

/// Descriptor realization `r(x) = u · Q(x)⁻¹ · v` with affine
/// `Q(x) = q_constant + Σ q_coeffs[j]·xⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub u: Vec<C64>,
    pub v: Vec<C64>,
    pub q_constant: CMatrix,
    pub q_coeffs: BTreeMap<String, CMatrix>,
}

impl Realization {
    pub fn dim(&self) -> usize {
        self.q_constant.dim()
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidPencil("empty realization".into()));
        }
        if self.u.len() != d || self.v.len() != d {
            return Err(Error::Dimension(format!(
                "u has {} and v has {} entries, Q is {d}×{d}",
                self.u.len(),
                self.v.len()
            )));
        }
        for (name, c) in &self.q_coeffs {
            if c.dim() != d {
                return Err(Error::Dimension(format!(
                    "Q coefficient of `{name}` is {}×{}, expected {d}×{d}",
                    c.dim(),
                    c.dim()
                )));
            }
        }
        if self.u.iter().all(|z| *z == ZERO) || self.v.iter().all(|z| *z == ZERO) {
            return Err(Error::InvalidPencil("u and v must be nonzero".into()));
        }
        if self.u.iter().chain(&self.v).any(|z| !z.is_finite()) || !self.q_constant.is_finite() {
            return Err(Error::InvalidPencil("non-finite realization entry".into()));
        }
        Ok(())
    }

    /// True when `v = u*` and every block of `Q` is Hermitian.
    pub fn is_selfadjoint(&self) -> bool {
        let tol = 1e-12;
        self.u.iter().zip(&self.v).all(|(a, b)| (a.conj() - b).norm() <= tol)
            && self.q_constant.is_hermitian(tol)
            && self.q_coeffs.values().all(|c| c.is_hermitian(tol))
    }
}

/// Which linearization to build from a realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Selfadjoint when the realization is, hermitized otherwise.
    Auto,
    Selfadjoint,
    Hermitized,
}

/// Linear pencil of a descriptor realization. The selfadjoint route is
/// `[[0, u], [u*, −Q]]`; the hermitized route borders `[[0, Q*], [Q, 0]]`.
pub fn ingest_pencil(real: &Realization, route: Route) -> Result<LinearPencil> {
    real.validate()?;
    let route = match route {
        Route::Auto if real.is_selfadjoint() => Route::Selfadjoint,
        Route::Auto => Route::Hermitized,
        r => r,
    };
    let d = real.dim();
    let vars: Vec<String> = real.q_coeffs.keys().cloned().collect();
    let qs: Vec<(Option<usize>, &CMatrix)> = std::iter::once((None, &real.q_constant))
        .chain(real.q_coeffs.values().enumerate().map(|(i, c)| (Some(i), c)))
        .collect();
    match route {
        Route::Selfadjoint => {
            if !real.is_selfadjoint() {
                for (_, c) in &qs {
                    hermitian_check("Q", c)?;
                }
                return Err(Error::InvalidPencil(
                    "selfadjoint route needs v = u*".into(),
                ));
            }
            let mut lay = Layout::new(1 + d, &vars);
            for (j, z) in real.u.iter().enumerate() {
                lay.put(0, 1 + j, None, *z);
            }
            for (var, c) in qs {
                for i in 0..d {
                    for j in i..d {
                        lay.put(1 + i, 1 + j, var, -c[(i, j)]);
                    }
                }
            }
            lay.finish(1)
        }
        _ => {
            let (a, b) = (2, 2 + d);
            let mut lay = Layout::new(2 + 2 * d, &vars);
            for j in 0..d {
                lay.put(0, a + j, None, real.u[j]);
                lay.put(1, b + j, None, real.v[j].conj());
            }
            for (var, c) in qs {
                for i in 0..d {
                    for j in 0..d {
                        lay.put(b + i, a + j, var, -c[(i, j)]);
                    }
                }
            }
            lay.finish(2)
        }
    }
}

/// Argument placed in the corner of a pencil-sized matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    /// `z` in a 1×1 corner.
    Scalar(C64),
    /// `Λ_ε(λ) = [[iε, λ], [λ̄, iε]]` in a 2×2 corner.
    Brown { lambda: C64, eps: f64 },
}

impl Payload {
    pub fn corner_size(&self) -> usize {
        match self {
            Payload::Scalar(_) => 1,
            Payload::Brown { .. } => 2,
        }
    }

    pub fn block(&self) -> CMatrix {
        match *self {
            Payload::Scalar(z) => CMatrix::scalar(1, z),
            Payload::Brown { lambda, eps } => {
                let ie = C64::new(0.0, eps);
                CMatrix::from_rows(&[vec![ie, lambda], vec![lambda.conj(), ie]])
                    .expect("finite payload")
            }
        }
    }
}

/// Payload in the corner, `iδ` on the remaining diagonal, zero elsewhere.
pub fn lambda_embed(pencil: &LinearPencil, payload: Payload, delta: f64) -> Result<CMatrix> {
    let r = pencil.corner();
    if payload.corner_size() != r {
        return Err(Error::Dimension(format!(
            "payload for a {}×{} corner given to a pencil with a {r}×{r} corner",
            payload.corner_size(),
            payload.corner_size()
        )));
    }
    let mut m = CMatrix::zeros(pencil.dim());
    m.set_block(0, 0, &payload.block());
    for i in r..pencil.dim() {
        m[(i, i)] = C64::new(0.0, delta);
    }
    Ok(m)
}

/// Something that can be evaluated on Hermitian matrix assignments.
pub trait MatrixFunction {
    fn variables(&self) -> Vec<String>;
    fn eval(&self, assignment: &Assignment) -> Result<CMatrix>;
}

impl MatrixFunction for NcPolynomial {
    fn variables(&self) -> Vec<String> {
        self.vars().to_vec()
    }

    fn eval(&self, assignment: &Assignment) -> Result<CMatrix> {
        self.eval_on_matrices(assignment)
    }
}

impl MatrixFunction for Realization {
    fn variables(&self) -> Vec<String> {
        self.q_coeffs.keys().cloned().collect()
    }

    fn eval(&self, assignment: &Assignment) -> Result<CMatrix> {
        self.validate()?;
        let d = self.dim();
        let qp = LinearPencil {
            corner: 1,
            constant: self.q_constant.clone(),
            coeffs: self.q_coeffs.clone(),
        };
        let qa = qp.evaluate(assignment)?;
        let m = qa.dim() / d;
        let qi = qa.inv()?;
        let mut out = CMatrix::zeros(m);
        for i in 0..d {
            for j in 0..d {
                let w = self.u[i] * self.v[j];
                if w != ZERO {
                    out += &qi.block(i * m, j * m, m).scale(w);
                }
            }
        }
        Ok(out)
    }
}

/// Parameters of [`verify_pencil`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub trials: usize,
    /// Size of the random Hermitian matrices substituted for each variable.
    pub size: usize,
    pub seed: u64,
    /// Spectral argument for corner size 1.
    pub z: C64,
    /// Brown argument for corner size 2.
    pub lambda: C64,
    pub eps: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            trials: 50,
            size: 5,
            seed: 0,
            z: C64::new(0.0, 2.0),
            lambda: C64::new(0.2, 0.3),
            eps: 1e-2,
        }
    }
}

/// Outcome of [`verify_pencil`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub trials: usize,
    pub max_residual: f64,
    pub passed: bool,
}

/// Residual threshold of [`verify_pencil`].
pub const VERIFY_TOL: f64 = 1e-8;

/// Random Hermitian matrix with entries of size about `1/√m`.
pub fn random_hermitian(m: usize, rng: &mut impl Rng) -> CMatrix {
    let s = 1.0 / (m as f64).sqrt();
    let g = CMatrix::from_fn(m, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * s
    });
    (&g + &g.adjoint()).scale_real(0.5)
}

/// Checks the recovery identity of `pencil` against `target` on random
/// Hermitian substitutions. Evaluation failures count as infinite residual.
pub fn verify_pencil(
    pencil: &LinearPencil,
    target: &dyn MatrixFunction,
    opts: &VerifyOptions,
) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut names: BTreeSet<String> = target.variables().into_iter().collect();
    names.extend(pencil.vars());
    let mut worst = 0.0f64;
    for _ in 0..opts.trials {
        let assignment: Assignment = names
            .iter()
            .map(|n| (n.clone(), random_hermitian(opts.size, &mut rng)))
            .collect();
        let r = recovery_residual(pencil, target, &assignment, opts).unwrap_or(f64::INFINITY);
        worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
    }
    VerifyReport {
        trials: opts.trials,
        max_residual: worst,
        passed: worst <= VERIFY_TOL,
    }
}

fn recovery_residual(
    pencil: &LinearPencil,
    target: &dyn MatrixFunction,
    assignment: &Assignment,
    opts: &VerifyOptions,
) -> Result<f64> {
    let m = opts.size;
    let payload = match pencil.corner() {
        1 => Payload::Scalar(opts.z),
        _ => Payload::Brown {
            lambda: opts.lambda,
            eps: opts.eps,
        },
    };
    let lam = lambda_embed(pencil, payload, 0.0)?;
    let lhs = (&lam.kron_identity(m) - &pencil.evaluate(assignment)?).inv()?;
    let r = pencil.corner();
    let lhs = lhs.block(0, 0, r * m);
    let p = target.eval(assignment)?;
    let mut hp = CMatrix::zeros(r * m);
    if r == 1 {
        hp = p;
    } else {
        hp.set_block(0, m, &p);
        hp.set_block(m, 0, &p.adjoint());
    }
    let rhs = (&payload.block().kron_identity(m) - &hp).inv()?;
    Ok((&lhs - &rhs).norm_fro() / rhs.norm_fro().max(1.0))
}

/// The 3×3 linearization of `xy + yx + x²` displayed in the literature.
pub fn reference_pencil_xy_yx_xx() -> LinearPencil {
    let half = C64::new(0.5, 0.0);
    let mut x = CMatrix::zeros(3);
    x[(0, 1)] = ONE;
    x[(1, 0)] = ONE;
    x[(0, 2)] = half;
    x[(2, 0)] = half;
    let mut y = CMatrix::zeros(3);
    y[(0, 2)] = ONE;
    y[(2, 0)] = ONE;
    let mut c = CMatrix::zeros(3);
    c[(1, 2)] = -ONE;
    c[(2, 1)] = -ONE;
    LinearPencil::new(c, [("x".to_string(), x), ("y".to_string(), y)].into(), 1)
        .expect("Hermitian by construction")
}

/// The 6×6 hermitized linearization of `xy` displayed in the literature.
pub fn reference_pencil_hermitized_xy() -> LinearPencil {
    let mut x = CMatrix::zeros(6);
    x[(0, 4)] = ONE;
    x[(4, 0)] = ONE;
    let mut y = CMatrix::zeros(6);
    y[(2, 3)] = ONE;
    y[(3, 2)] = ONE;
    let mut c = CMatrix::zeros(6);
    for (i, j, v) in [(1, 5, 1.0), (2, 4, -1.0), (3, 5, -1.0)] {
        c[(i, j)] = C64::new(v, 0.0);
        c[(j, i)] = C64::new(v, 0.0);
    }
    LinearPencil::new(c, [("x".to_string(), x), ("y".to_string(), y)].into(), 2)
        .expect("Hermitian by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncexpr::parse;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn poly(s: &str, vars: &[&str]) -> NcPolynomial {
        parse(s, vars).unwrap()
    }

    fn strict() -> VerifyOptions {
        VerifyOptions {
            trials: 20,
            ..Default::default()
        }
    }

    #[test]
    fn reference_3x3_passes() {
        let p = poly("x*y+y*x+x^2", &["x", "y"]);
        let r = verify_pencil(&reference_pencil_xy_yx_xx(), &p, &strict());
        assert!(r.max_residual < 1e-10, "{r:?}");
    }

    #[test]
    fn reference_6x6_passes() {
        let p = poly("x*y", &["x", "y"]);
        let opts = VerifyOptions {
            size: 4,
            ..strict()
        };
        let r = verify_pencil(&reference_pencil_hermitized_xy(), &p, &opts);
        assert!(r.max_residual < 1e-10, "{r:?}");
    }

    #[test]
    fn corrupted_pencil_fails() {
        let p = poly("x*y+y*x+x^2", &["x", "y"]);
        let good = reference_pencil_xy_yx_xx();
        let mut c0 = good.constant().clone();
        c0[(1, 2)] = ONE;
        c0[(2, 1)] = ONE;
        let bad = LinearPencil::new(c0, good.coeffs().clone(), 1).unwrap();
        let r = verify_pencil(&bad, &p, &strict());
        assert!(!r.passed && r.max_residual > 1e-3, "{r:?}");
    }

    #[test]
    fn single_variable_is_one_by_one() {
        let p = poly("x", &["x"]);
        let l = linearize_sa(&p).unwrap();
        assert_eq!(l.dim(), 1);
        assert_eq!(l.coefficient("x").unwrap(), &CMatrix::identity(1));
        let h = hermitized_linearize(&p).unwrap();
        assert_eq!(h.dim(), 2);
        assert_eq!(h.corner(), 2);
        assert!(verify_pencil(&h, &p, &strict()).passed);
    }

    #[test]
    fn own_linearization_of_reference_polynomial() {
        let p = poly("x*y+y*x+x^2", &["x", "y"]);
        let l = linearize_sa(&p).unwrap();
        assert!(l.dim() <= 1 + p.total_letters());
        let r = verify_pencil(&l, &p, &strict());
        assert!(r.max_residual < 1e-10, "{r:?}");
    }

    #[test]
    fn constants_palindromes_and_complex_pairs() {
        for s in [
            "3 + x",
            "x*y*x",
            "x^3 - 2*y^2",
            "x*y*y*x + 0.5",
            "(1+2i)*x*y*z + (1-2i)*z*y*x",
            "1i*x*y - 1i*y*x",
            "x*y*z*y*x - 4*z",
            "2",
        ] {
            let p = poly(s, &["x", "y", "z"]);
            let l = linearize_sa(&p).unwrap();
            assert!(l.dim() <= 1 + p.total_letters(), "{s}");
            let r = verify_pencil(&l, &p, &strict());
            assert!(r.max_residual < 1e-10, "{s}: {r:?}");
        }
    }

    #[test]
    fn linearize_errors() {
        assert_eq!(
            linearize_sa(&poly("x*y", &["x", "y"])),
            Err(Error::NotSelfadjoint)
        );
        let zero = NcPolynomial::zero(&["x"]);
        assert_eq!(linearize_sa(&zero), Err(Error::EmptyPolynomial));
        assert_eq!(hermitized_linearize(&zero), Err(Error::EmptyPolynomial));
    }

    #[test]
    fn hermitized_x_plus_iy() {
        let p = poly("x + 1i*y", &["x", "y"]);
        let h = hermitized_linearize(&p).unwrap();
        assert_eq!(h.dim(), 2);
        let opts = VerifyOptions {
            size: 4,
            lambda: c(0.3, 0.1),
            eps: 1e-2,
            ..strict()
        };
        let r = verify_pencil(&h, &p, &opts);
        assert!(r.max_residual < 1e-10, "{r:?}");
    }

    #[test]
    fn hermitized_nonlinear() {
        for s in ["x*y", "x*y*z + 2*x - 1", "x^2 + 1i*y*x*y", "(x+1i*y)^3"] {
            let p = poly(s, &["x", "y", "z"]);
            let h = hermitized_linearize(&p).unwrap();
            assert!(h.dim() <= 2 * (1 + p.total_letters()));
            let r = verify_pencil(&h, &p, &strict());
            assert!(r.max_residual < 1e-10, "{s}: {r:?}");
        }
    }

    #[test]
    fn hermitized_recovered_entry_matches_block_formula() {
        // (Λ_ε − X)⁻¹ for scalar x = c: entry (2,1) is (λ−c)*/(|λ−c|² + ε²).
        let p = poly("2 - 1i", &["x"]);
        let h = hermitized_linearize(&p).unwrap();
        let (lambda, eps) = (c(0.4, -0.3), 0.1);
        let g = (&lambda_embed(&h, Payload::Brown { lambda, eps }, 0.0).unwrap() - h.constant())
            .inv()
            .unwrap();
        let d = lambda - c(2.0, -1.0);
        let want = d.conj() / (d.norm_sqr() + eps * eps);
        assert!((g[(1, 0)] - want).norm() < 1e-14);
    }

    fn rational_r() -> Realization {
        let q0 = CMatrix::identity(2);
        let mut q1 = CMatrix::identity(2);
        q1 = q1.scale_real(-0.25);
        let mut q2 = CMatrix::zeros(2);
        q2[(0, 1)] = c(-0.25, 0.0);
        q2[(1, 0)] = c(-0.25, 0.0);
        Realization {
            u: vec![c(0.5, 0.0), ZERO],
            v: vec![c(0.5, 0.0), ZERO],
            q_constant: q0,
            q_coeffs: [("x1".to_string(), q1), ("x2".to_string(), q2)].into(),
        }
    }

    #[test]
    fn rational_reference_pencil() {
        let real = rational_r();
        let l = ingest_pencil(&real, Route::Auto).unwrap();
        assert_eq!(l.corner(), 1);
        let want_const = CMatrix::from_real_rows(&[
            vec![0.0, 0.5, 0.0],
            vec![0.5, -1.0, 0.0],
            vec![0.0, 0.0, -1.0],
        ])
        .unwrap();
        assert_eq!(l.constant(), &want_const);
        let want_x1 = CMatrix::diag_real(&[0.0, 0.25, 0.25]);
        assert_eq!(l.coefficient("x1").unwrap(), &want_x1);
        let want_x2 = CMatrix::from_real_rows(&[
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.25],
            vec![0.0, 0.25, 0.0],
        ])
        .unwrap();
        assert_eq!(l.coefficient("x2").unwrap(), &want_x2);
        assert!(verify_pencil(&l, &real, &strict()).passed);
        let h = ingest_pencil(&real, Route::Hermitized).unwrap();
        assert_eq!(h.corner(), 2);
        assert!(verify_pencil(&h, &real, &strict()).passed);
    }

    #[test]
    fn scalar_resolvent_realization() {
        // u=(1), Q=[1 − x/4]: r(x) = (1 − x/4)⁻¹.
        let real = Realization {
            u: vec![ONE],
            v: vec![ONE],
            q_constant: CMatrix::identity(1),
            q_coeffs: [("x".to_string(), CMatrix::scalar(1, c(-0.25, 0.0)))].into(),
        };
        let l = ingest_pencil(&real, Route::Auto).unwrap();
        assert_eq!(l.dim(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_hermitian(4, &mut rng);
        let z = c(0.0, 3.0);
        let asg: Assignment = [("x".to_string(), a.clone())].into();
        let lam = lambda_embed(&l, Payload::Scalar(z), 0.0).unwrap();
        let lhs = (&lam.kron_identity(4) - &l.evaluate(&asg).unwrap()).inv().unwrap();
        let ra = (&CMatrix::identity(4) - &a.scale_real(0.25)).inv().unwrap();
        let direct = (&CMatrix::scalar(4, z) - &ra).inv().unwrap();
        assert!((&lhs.block(0, 0, 4) - &direct).norm_fro() < 1e-12);
    }

    #[test]
    fn nonselfadjoint_rational_goes_hermitized() {
        let mut q2 = CMatrix::zeros(2);
        q2[(0, 1)] = c(0.0, -1.0);
        q2[(1, 0)] = c(-0.25, 0.0);
        let real = Realization {
            u: vec![ZERO, c(0.5, 0.0)],
            v: vec![c(0.5, 0.0), ZERO],
            q_constant: CMatrix::identity(2),
            q_coeffs: [
                ("x1".to_string(), CMatrix::identity(2).scale_real(-0.25)),
                ("x2".to_string(), q2),
            ]
            .into(),
        };
        let h = ingest_pencil(&real, Route::Auto).unwrap();
        assert_eq!(h.corner(), 2);
        assert_eq!(h.dim(), 6);
        let opts = VerifyOptions {
            size: 3,
            ..strict()
        };
        let r = verify_pencil(&h, &real, &opts);
        assert!(r.passed, "{r:?}");
        assert!(matches!(
            ingest_pencil(&real, Route::Selfadjoint),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn ingest_rejects_degenerate() {
        let mut real = rational_r();
        real.u = vec![ZERO, ZERO];
        assert!(matches!(ingest_pencil(&real, Route::Auto), Err(Error::InvalidPencil(_))));
        let mut real = rational_r();
        real.v = vec![ONE];
        assert!(matches!(ingest_pencil(&real, Route::Auto), Err(Error::Dimension(_))));
    }

    #[test]
    fn embedding_examples() {
        let l = reference_pencil_xy_yx_xx();
        let b = lambda_embed(&l, Payload::Scalar(c(0.0, 2.0)), 0.0).unwrap();
        let mut want = CMatrix::zeros(3);
        want[(0, 0)] = c(0.0, 2.0);
        assert_eq!(b, want);
        assert!(!b.uhp_check().in_upper);
        let b = lambda_embed(&l, Payload::Scalar(c(0.0, 2.0)), 1e-9).unwrap();
        assert!(b.uhp_check().in_upper);
        let real_axis = lambda_embed(&l, Payload::Scalar(c(1.0, 0.0)), 1e-9).unwrap();
        assert!(!real_axis.uhp_check().in_upper);

        let h = reference_pencil_hermitized_xy();
        let b = lambda_embed(&h, Payload::Brown { lambda: ONE, eps: 0.1 }, 1e-8).unwrap();
        assert_eq!(b[(0, 0)], c(0.0, 0.1));
        assert_eq!(b[(0, 1)], ONE);
        assert_eq!(b[(5, 5)], c(0.0, 1e-8));
        assert!(b.uhp_check().in_upper);
        assert!(matches!(
            lambda_embed(&h, Payload::Scalar(ONE), 0.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rejects_non_hermitian_coefficients() {
        let mut x = CMatrix::zeros(2);
        x[(0, 1)] = ONE;
        let r = LinearPencil::new(CMatrix::zeros(2), [("x".to_string(), x)].into(), 1);
        assert!(matches!(r, Err(Error::NotHermitian(_))));
    }

    #[test]
    fn text_round_trip() {
        for l in [reference_pencil_xy_yx_xx(), reference_pencil_hermitized_xy()] {
            let t = l.to_text();
            assert_eq!(LinearPencil::from_text(&t).unwrap(), l);
        }
        let t = "# comment\ndim 2\ncorner 1\nconstant\n0,0 1,0\n1,0 0,0\nvar x\n1,0 0,0\n0,0 0,0\n";
        let l = LinearPencil::from_text(t).unwrap();
        assert_eq!(l.dim(), 2);
        assert!(matches!(
            LinearPencil::from_text("dim 2\nconstant\n0,0\n"),
            Err(Error::InvalidPencil(_))
        ));
        assert!(matches!(
            LinearPencil::from_text("dim 1\nconstant\nfoo\n"),
            Err(Error::InvalidPencil(_))
        ));
    }

    fn selfadjoint_poly() -> impl Strategy<Value = NcPolynomial> {
        let word = proptest::collection::vec(0usize..3, 0..=4);
        let term = (word, -2.0f64..2.0, -2.0f64..2.0);
        proptest::collection::vec(term, 1..5).prop_map(|terms| {
            let vars = ["x", "y", "z"];
            let mut q = NcPolynomial::zero(&vars);
            for (w, re, im) in terms {
                let word = Word(w.into_iter().map(Letter::new).collect());
                let t = NcPolynomial::from_terms(&vars, [(C64::new(re, im), word)]).unwrap();
                q = q.add(&t);
            }
            let sa = q.add(&q.star()).strip_stars();
            if sa.is_zero() {
                NcPolynomial::variable(&vars, "x").unwrap()
            } else {
                sa
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn recovery_identity_selfadjoint(p in selfadjoint_poly(), seed in 0u64..1000) {
            let l = linearize_sa(&p).unwrap();
            prop_assert!(l.dim() <= 1 + p.total_letters());
            let opts = VerifyOptions { trials: 3, seed, ..Default::default() };
            let r = verify_pencil(&l, &p, &opts);
            prop_assert!(r.max_residual <= 1e-10, "{}: {:?}", p, r);
        }

        #[test]
        fn recovery_identity_hermitized(p in selfadjoint_poly(), seed in 0u64..1000) {
            let h = hermitized_linearize(&p).unwrap();
            prop_assert!(h.dim() <= 2 * (1 + p.total_letters()));
            let opts = VerifyOptions { trials: 3, seed, ..Default::default() };
            let r = verify_pencil(&h, &p, &opts);
            prop_assert!(r.max_residual <= 1e-10, "{}: {:?}", p, r);
        }

        #[test]
        fn evaluated_pencil_is_hermitian(p in selfadjoint_poly(), seed in 0u64..1000) {
            let l = linearize_sa(&p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let asg: Assignment = ["x", "y", "z"]
                .iter()
                .map(|n| (n.to_string(), random_hermitian(3, &mut rng)))
                .collect();
            prop_assert!(l.evaluate(&asg).unwrap().hermitian_deviation() < 1e-14);
        }
    }
}
