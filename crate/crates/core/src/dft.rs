//! Unitary DFT conventions shared by every estimator.
//!
//! Forward: `X[k] = N^{-1/2} sum_n x[n] e^{-j 2 pi n k / N}`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    let mut buf = input.to_vec();
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    fft.process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Entry `F[k, n]` of the unitary DFT matrix.
pub fn unitary_entry(k: usize, n: usize, n_fft: usize) -> Complex64 {
    // reduce before scaling so large products stay exact
    let m = ((k as u128 * n as u128) % n_fft as u128) as f64;
    Complex64::from_polar(1.0 / (n_fft as f64).sqrt(), -2.0 * PI * m / n_fft as f64)
}

/// Inverse unitary DFT of a full-length spectrum.
pub fn inverse_unitary(spectrum: &[Complex64]) -> Vec<Complex64> {
    transform(spectrum, true)
}

/// Forward unitary DFT of a full-length tap vector.
pub fn forward_unitary(taps: &[Complex64]) -> Vec<Complex64> {
    transform(taps, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_matrix_entries() {
        let n = 12;
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, (i * i) as f64 * 0.1)).collect();
        let fx = forward_unitary(&x);
        for (k, v) in fx.iter().enumerate() {
            let naive: Complex64 = (0..n).map(|m| unitary_entry(k, m, n) * x[m]).sum();
            assert!((naive - v).norm() < 1e-12);
        }
        let back = inverse_unitary(&fx);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
