use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use freeconv::laws::ov_cauchy;
use freeconv::linpen::{hermitized_linearize, linearize_sa, Payload};
use freeconv::ncexpr::parse;
use freeconv::recover::{brown_field, linspace, pencil_density, Grid2d, DEFAULT_EPS_SCHEDULE};
use freeconv::{CMatrix, FixedPointOptions, PencilEvaluator, ScalarLaw, C64};

fn semicircle_mp_laws() -> BTreeMap<String, ScalarLaw> {
    BTreeMap::from([
        ("x".to_string(), ScalarLaw::standard_semicircle()),
        ("y".to_string(), ScalarLaw::marchenko_pastur(0.25, 1.0).unwrap()),
    ])
}

fn transforms(c: &mut Criterion) {
    let mp = ScalarLaw::marchenko_pastur(0.25, 1.0).unwrap();
    let mut a = CMatrix::zeros(3);
    a[(0, 1)] = C64::new(1.0, 0.0);
    a[(1, 0)] = C64::new(1.0, 0.0);
    let mut b = CMatrix::identity(3).scale(C64::new(0.0, 1e-9));
    b[(0, 0)] = C64::new(1.5, 0.05);
    c.bench_function("ov_cauchy mp 3x3", |bn| bn.iter(|| ov_cauchy(&mp, black_box(&a), black_box(&b)).unwrap()));
}

fn pencil(c: &mut Criterion) {
    let p = parse("x*y + y*x + x^2", &["x", "y"]).unwrap();
    let ev = PencilEvaluator::new(&linearize_sa(&p).unwrap(), &semicircle_mp_laws(), &FixedPointOptions::default()).unwrap();
    c.bench_function("xy+yx+x^2 at 1+0.05i", |bn| {
        bn.iter(|| ev.scalar(Payload::Scalar(black_box(C64::new(1.0, 0.05)))).unwrap())
    });
    let grid = linspace(-4.0, 10.0, 100);
    c.bench_function("xy+yx+x^2 density 100 points", |bn| {
        bn.iter(|| pencil_density(&ev, black_box(&grid), &DEFAULT_EPS_SCHEDULE).unwrap())
    });
}

fn brown(c: &mut Criterion) {
    let p = parse("x + 1i*y", &["x", "y"]).unwrap();
    let pencil = hermitized_linearize(&p).unwrap();
    let laws = BTreeMap::from([
        ("x".to_string(), ScalarLaw::standard_semicircle()),
        ("y".to_string(), ScalarLaw::standard_semicircle()),
    ]);
    let grid = Grid2d::square(-2.0, 2.0, 21).unwrap();
    c.bench_function("x+iy brown 21x21", |bn| {
        bn.iter(|| brown_field(&pencil, &laws, black_box(&grid), 1e-2, &FixedPointOptions::default()).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = transforms, pencil, brown
}
criterion_main!(benches);
