use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lower end of the diagonal evaluation parameter `c`.
pub const DIAGONAL_C_MIN: f64 = 0.01;
/// Upper end of the diagonal evaluation parameter `c`.
pub const DIAGONAL_C_MAX: f64 = 0.7;

/// Independent random streams derived from one user seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Trajectory = 0,
    Minibatch = 1,
    Split = 2,
    Evaluation = 3,
    Init = 4,
}

/// Generator for `(seed, stream, index)`; the same triple always yields the
/// same sequence, whatever thread draws from it.
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 48) | (index & ((1 << 48) - 1)));
    rng
}

/// Uniform point in the open unit ball, by rejection from `[−1, 1]³`.
pub fn sample_initial_bloch<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let p = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < 1.0 {
            return p;
        }
    }
}

/// Uniform `c` in the open interval `(0.01, 0.7)`.
pub fn sample_initial_diagonal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let c = rng.random_range(DIAGONAL_C_MIN..DIAGONAL_C_MAX);
        if c > DIAGONAL_C_MIN {
            return c;
        }
    }
}

/// Bloch triple of the diagonal state `diag(1 − c, c)`.
pub fn diagonal_bloch(c: f64) -> [f64; 3] {
    [0.0, 0.0, 1.0 - 2.0 * c]
}
