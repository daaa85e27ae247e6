use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cmat::{CMatrix, C64};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn random_matrix(n: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub(crate) fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
    let a = random_matrix(n, rng);
    (&a + &a.adjoint()).scale_real(0.5)
}

/// `h + i(ηI + g g*)` with Hermitian `h`.
pub(crate) fn random_uhp(n: usize, eta: f64, rng: &mut impl Rng) -> CMatrix {
    let g = random_matrix(n, rng);
    let im = &CMatrix::identity(n).scale_real(eta) + &g.matmul(&g.adjoint()).scale_real(0.3);
    &random_hermitian(n, rng) + &im.scale(C64::new(0.0, 1.0))
}
