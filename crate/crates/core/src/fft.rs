//! In-place iterative radix-2 FFT, enough for circulant embedding.

use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // unused when a dependency links std
use num_traits::Float;

/// Forward DFT `X_k = Σ_j x_j e^{-2πi jk/n}` in place. `data.len()` must be a power of two.
pub(crate) fn fft_in_place(data: &mut [Complex64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let angle = -2.0 * PI / len as f64;
        // Twiddles from the exact angle avoid the drift of repeated multiplication.
        let twiddles: alloc::vec::Vec<Complex64> = (0..half)
            .map(|k| {
                let a = angle * k as f64;
                Complex64::new(a.cos(), a.sin())
            })
            .collect();
        for chunk in data.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let t = *b * *w;
                *b = *a - t;
                *a += t;
            }
        }
        len <<= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, v)| {
                    let a = -2.0 * PI * (j * k) as f64 / n as f64;
                    acc + *v * Complex64::new(a.cos(), a.sin())
                })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let x: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut y = x.clone();
        fft_in_place(&mut y);
        let z = naive_dft(&x);
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn trivial_lengths() {
        let mut one = [Complex64::new(2.5, -1.0)];
        fft_in_place(&mut one);
        assert_eq!(one[0], Complex64::new(2.5, -1.0));
        let mut two = [Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)];
        fft_in_place(&mut two);
        assert_eq!(two[0], Complex64::new(4.0, 0.0));
        assert_eq!(two[1], Complex64::new(-2.0, 0.0));
    }
}
