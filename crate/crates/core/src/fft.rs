//! Raw multi-dimensional FFTs on square row-major buffers.
//!
//! Everything here is unnormalized; scaling and the centering signs live in
//! `grid`. Plans are cached per length and direction.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, direction: FftDirection) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, direction == FftDirection::Forward);
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry(key).or_insert_with(|| FftPlanner::new().plan_fft(n, direction)).clone()
}

/// In-place transpose of an `n x n` row-major matrix.
pub(crate) fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Unnormalized DFT along every axis, leaving the buffer in natural layout.
pub(crate) fn dft(data: &mut [Complex64], n: usize, dim: usize, direction: FftDirection) {
    let p = plan(n, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); p.get_inplace_scratch_len()];
    p.process_with_scratch(data, &mut scratch);
    if dim == 2 {
        transpose(data, n);
        p.process_with_scratch(data, &mut scratch);
        transpose(data, n);
    }
}

/// Forward DFT that leaves a 2-D result transposed. Paired with
/// [`dft_from_transposed`] this saves two transposes per round trip when the
/// spectral multiplier is symmetric in the two axes.
pub(crate) fn dft_to_transposed(data: &mut [Complex64], n: usize, dim: usize, scratch: &mut Vec<Complex64>) {
    let p = plan(n, FftDirection::Forward);
    scratch.resize(p.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
    p.process_with_scratch(data, scratch);
    if dim == 2 {
        transpose(data, n);
        p.process_with_scratch(data, scratch);
    }
}

/// Inverse of [`dft_to_transposed`] (unnormalized).
pub(crate) fn dft_from_transposed(data: &mut [Complex64], n: usize, dim: usize, scratch: &mut Vec<Complex64>) {
    let p = plan(n, FftDirection::Inverse);
    scratch.resize(p.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
    p.process_with_scratch(data, scratch);
    if dim == 2 {
        transpose(data, n);
        p.process_with_scratch(data, scratch);
    }
}
