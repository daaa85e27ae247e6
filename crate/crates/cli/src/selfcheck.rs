//! Closed-form and oracle checks run by `freeconv selfcheck`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use freeconv::laws::cauchy_scalar;
use freeconv::linpen::{
    hermitized_linearize, linearize_sa, reference_pencil_hermitized_xy, reference_pencil_xy_yx_xx,
    verify_pencil, Payload, VerifyOptions,
};
use freeconv::ncexpr::parse;
use freeconv::recover::{brown_field, Grid2d};
use freeconv::{FixedPointOptions, PencilEvaluator, ScalarLaw, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub error: f64,
    pub tol: f64,
    pub passed: bool,
}

fn check(name: &'static str, error: Result<f64, freeconv::Error>, tol: f64) -> Check {
    let error = error.unwrap_or(f64::INFINITY);
    Check { name, error, tol, passed: error <= tol }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn semicircle_at_2i() -> Result<f64, freeconv::Error> {
    let g = cauchy_scalar(&ScalarLaw::standard_semicircle(), c(0.0, 2.0))?;
    Ok((g - c(0.0, 1.0 - 2f64.sqrt())).norm())
}

fn mp_vs_quadrature() -> Result<f64, freeconv::Error> {
    let law = ScalarLaw::marchenko_pastur(0.25, 1.0)?;
    let mut worst = 0.0f64;
    for z in [c(0.5, 0.1), c(1.0, 0.5), c(2.5, 0.05), c(-1.0, 1.0), c(0.0, 3.0)] {
        worst = worst.max((law.cauchy(z)? - law.cauchy_by_quadrature(z)?).norm());
    }
    Ok(worst)
}

fn subordination_residual() -> Result<f64, freeconv::Error> {
    let mp = ScalarLaw::marchenko_pastur(0.25, 1.0)?;
    let laws = BTreeMap::from([
        ("x".to_string(), ScalarLaw::standard_semicircle()),
        ("y".to_string(), mp.clone()),
    ]);
    let pencil = linearize_sa(&parse("x + y", &["x", "y"])?)?;
    let ev = PencilEvaluator::new(&pencil, &laws, &FixedPointOptions::default())?;
    let mut worst = 0.0f64;
    for z in [c(-1.0, 0.1), c(0.5, 0.05), c(2.0, 0.2), c(4.0, 1.0), c(1.0, 2.0)] {
        let g = ev.scalar(Payload::Scalar(z))?;
        worst = worst.max((g - mp.cauchy(z - g)?).norm());
    }
    Ok(worst)
}

fn reference_pencils() -> Result<f64, freeconv::Error> {
    let opts = VerifyOptions::default();
    let p = parse("x*y + y*x + x^2", &["x", "y"])?;
    let a = verify_pencil(&reference_pencil_xy_yx_xx(), &p, &opts);
    let q = parse("x*y", &["x", "y"])?;
    let b = verify_pencil(&reference_pencil_hermitized_xy(), &q, &opts);
    let own = verify_pencil(&linearize_sa(&p)?, &p, &opts);
    Ok(a.max_residual.max(b.max_residual).max(own.max_residual))
}

fn atom_brown() -> Result<f64, freeconv::Error> {
    let p = parse("x + (0.3 - 0.2i)", &["x"])?;
    let pencil = hermitized_linearize(&p)?;
    let laws = BTreeMap::from([("x".to_string(), ScalarLaw::dirac(0.1))]);
    let grid = Grid2d::square(-1.0, 1.0, 21)?;
    let eps = 0.05;
    let f = brown_field(&pencil, &laws, &grid, eps, &FixedPointOptions::default())?;
    let center = c(0.4, -0.2);
    Ok((0..grid.len())
        .map(|k| {
            let d = grid.point(k) - center;
            (f.g[k] - d.conj() / (d.norm_sqr() + eps * eps)).norm()
        })
        .fold(0.0, f64::max))
}

/// Runs every check with tolerances multiplied by `scale`.
pub fn run(scale: f64) -> Vec<Check> {
    vec![
        check("semicircle transform at 2i", semicircle_at_2i(), 1e-12 * scale),
        check("MP(1/4) transform vs quadrature", mp_vs_quadrature(), 1e-8 * scale),
        check("subordination residual x + y", subordination_residual(), 1e-8 * scale),
        check("reference pencils", reference_pencils(), 1e-8 * scale),
        check("Brown field of an atom", atom_brown(), 1e-10 * scale),
    ]
}

pub fn render(checks: &[Check]) -> String {
    let mut s = String::new();
    for ch in checks {
        let _ = writeln!(
            s,
            "{} {:<34} error {:.3e} tol {:.1e}",
            if ch.passed { "PASS" } else { "FAIL" },
            ch.name,
            ch.error,
            ch.tol
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_pass() {
        let r = run(1.0);
        assert!(r.iter().all(|c| c.passed), "{}", render(&r));
    }

    #[test]
    fn zero_tolerance_fails_something() {
        assert!(run(0.0).iter().any(|c| !c.passed));
    }
}
