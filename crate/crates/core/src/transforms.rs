//! In-place fast transforms used by the structured frames.

use crate::scalar::Scalar;

/// Unnormalized Walsh-Hadamard transform in place: `x <- H x` where `H` is
/// the Sylvester Hadamard matrix with `H[r][c] = (-1)^popcount(r & c)`.
///
/// `x.len()` must be a power of two.
pub fn fwht<T: Scalar>(x: &mut [T]) {
    let n = x.len();
    assert!(n.is_power_of_two(), "FWHT length must be a power of two");
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let a = x[i];
                let b = x[i + h];
                x[i] = a + b;
                x[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Entry of the Sylvester Hadamard matrix.
#[inline]
pub fn sylvester_entry(r: usize, c: usize) -> i8 {
    if (r & c).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Apply the orthonormal Haar matrix `H_n`, defined by
/// `H_2n = [H_n ⊗ (1 1); I_n ⊗ (1 -1)] / √2`, `H_1 = 1`.
pub fn haar_forward<T: Scalar>(x: &[T]) -> Vec<T> {
    let n = x.len();
    assert!(n.is_power_of_two(), "Haar order must be a power of two");
    let r2 = T::one() / T::of(2.0).sqrt();
    let mut out = vec![T::zero(); n];
    let mut cur = x.to_vec();
    let mut len = n;
    // Detail coefficients of the level with input length `len` land in
    // out[len/2..len]; the coarse part recurses.
    while len > 1 {
        let half = len / 2;
        let mut coarse = Vec::with_capacity(half);
        for i in 0..half {
            let a = cur[2 * i];
            let b = cur[2 * i + 1];
            coarse.push((a + b) * r2);
            out[half + i] = (a - b) * r2;
        }
        cur = coarse;
        len = half;
    }
    out[0] = cur[0];
    out
}

/// Apply `H_nᵀ`.
pub fn haar_transpose<T: Scalar>(y: &[T]) -> Vec<T> {
    let n = y.len();
    assert!(n.is_power_of_two(), "Haar order must be a power of two");
    let r2 = T::one() / T::of(2.0).sqrt();
    let mut cur = vec![y[0]];
    let mut len = 1;
    while len < n {
        let detail = &y[len..2 * len];
        let mut next = Vec::with_capacity(2 * len);
        for i in 0..len {
            next.push((cur[i] + detail[i]) * r2);
            next.push((cur[i] - detail[i]) * r2);
        }
        cur = next;
        len *= 2;
    }
    cur
}
