//! BinaryConnect weight binarization.

use num_traits::Float;
use rand::Rng;

/// Sign binarization. Zero maps to +1.
pub fn binarize_det<T: Float>(w: T) -> i8 {
    if w >= T::zero() {
        1
    } else {
        -1
    }
}

/// `clip((x + 1) / 2, 0, 1)`
pub fn hard_sigmoid<T: Float>(x: T) -> T {
    let half = T::from(0.5).unwrap();
    ((x + T::one()) * half).max(T::zero()).min(T::one())
}

/// Stochastic binarization against a uniform sample `u` in `[0, 1)`:
/// +1 with probability `hard_sigmoid(w)`.
pub fn binarize_sto<T: Float>(w: T, u: T) -> i8 {
    if u < hard_sigmoid(w) {
        1
    } else {
        -1
    }
}

/// [`binarize_sto`] drawing `u` from `rng`.
pub fn binarize_sto_rng<R: Rng + ?Sized>(w: f64, rng: &mut R) -> i8 {
    binarize_sto(w, rng.gen::<f64>())
}
