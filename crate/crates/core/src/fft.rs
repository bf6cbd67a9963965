//! Row/column 2D FFT over row-major `n1 × n2` arrays (index `j1 * n2 + j2`).

use num_complex::Complex64;
use rustfft::FftPlanner;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `Σ_j x_j e^{-2πi j·m / n}`
    Forward,
    /// `Σ_m x_m e^{+2πi j·m / n}` (unnormalized)
    Inverse,
}

pub fn fft2(data: &mut [Complex64], n1: usize, n2: usize, dir: Direction) {
    assert_eq!(data.len(), n1 * n2);
    let mut planner = FftPlanner::<f64>::new();
    let (p2, p1) = match dir {
        Direction::Forward => (planner.plan_fft_forward(n2), planner.plan_fft_forward(n1)),
        Direction::Inverse => (planner.plan_fft_inverse(n2), planner.plan_fft_inverse(n1)),
    };
    // contiguous rows along the second axis
    p2.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); n1];
    for j2 in 0..n2 {
        for j1 in 0..n1 {
            column[j1] = data[j1 * n2 + j2];
        }
        p1.process(&mut column);
        for j1 in 0..n1 {
            data[j1 * n2 + j2] = column[j1];
        }
    }
}

/// Storage slot of integer frequency `m` on an axis of length `n`.
#[inline]
pub fn wrap_index(m: i32, n: usize) -> usize {
    m.rem_euclid(n as i32) as usize
}
