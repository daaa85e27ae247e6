//! Adaptive Gauss–Legendre quadrature for scalar and matrix-valued integrands.

use std::sync::OnceLock;

use crate::cmat::{CMatrix, C64};
use crate::error::{Error, Result};

/// Points per panel.
const ORDER: usize = 20;

/// Values that can be accumulated by the quadrature driver.
pub trait Accumulate: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, w: f64);
    fn distance(&self, other: &Self) -> f64;
    fn magnitude(&self) -> f64;

    fn scaled(&self, w: f64) -> Self {
        let mut z = self.zero_like();
        z.add_scaled(self, w);
        z
    }
}

impl Accumulate for C64 {
    fn zero_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Accumulate for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Accumulate for CMatrix {
    fn zero_like(&self) -> Self {
        CMatrix::zeros(self.dim())
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += &other.scale_real(w);
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm_fro()
    }
    fn magnitude(&self) -> f64 {
        self.norm_fro()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn panel<T: Accumulate>(f: &mut impl FnMut(f64) -> Result<T>, a: f64, b: f64) -> Result<T> {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc: Option<T> = None;
    for (x, w) in nodes.iter().zip(weights) {
        let v = f(mid + half * x)?;
        match acc.as_mut() {
            Some(s) => s.add_scaled(&v, w * half),
            None => {
                let mut s = v.zero_like();
                s.add_scaled(&v, w * half);
                acc = Some(s);
            }
        }
    }
    Ok(acc.expect("rule has nodes"))
}

/// Integrates `f` over `[a, b]` by bisecting panels until each panel's
/// estimate changes by less than `rel_tol` relative to the integral.
pub fn integrate<T: Accumulate>(
    mut f: impl FnMut(f64) -> Result<T>,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<T> {
    let whole = panel(&mut f, a, b)?;
    let mut scale = whole.magnitude();
    let mut total = whole.zero_like();
    let mut stack = vec![(a, b, whole)];
    let mut panels = 1usize;
    let mut depth_floor = (b - a) * 1e-15;
    depth_floor = depth_floor.max(f64::MIN_POSITIVE);
    while let Some((lo, hi, coarse)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(&mut f, lo, mid)?;
        let right = panel(&mut f, mid, hi)?;
        let mut fine = left.clone();
        fine.add_scaled(&right, 1.0);
        scale = scale.max(fine.magnitude());
        if fine.distance(&coarse) <= rel_tol * scale || hi - lo <= depth_floor {
            total.add_scaled(&fine, 1.0);
            continue;
        }
        panels += 2;
        if panels > max_panels {
            return Err(Error::Quadrature(max_panels));
        }
        stack.push((mid, hi, right));
        stack.push((lo, mid, left));
    }
    Ok(total)
}
