//! One- and two-dimensional discrete Fourier transforms.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley–Tukey transform; other lengths
//! fall back to direct summation. Forward transforms are unnormalized, inverses divide
//! by the length.

use std::f64::consts::PI;

use num_complex::Complex64;

fn twiddles(n: usize, inverse: bool) -> Vec<Complex64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / n as f64))
        .collect()
}

fn fft_radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let bits = n.trailing_zeros();
    if bits == 0 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let table = twiddles(n, inverse);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = table[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len *= 2;
    }
}

fn dft_direct(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    let table = twiddles(n, inverse);
    let out: Vec<Complex64> = (0..n)
        .map(|k| {
            buf.iter()
                .enumerate()
                .map(|(j, &x)| x * table[(j * k) % n])
                .sum()
        })
        .collect();
    buf.copy_from_slice(&out);
}

/// Which 1D kernel a transform may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DftMethod {
    /// Radix-2 where the length allows it, direct summation otherwise.
    #[default]
    Auto,
    /// Always direct summation.
    Direct,
}

/// In-place 1D transform (unnormalized in both directions).
pub fn dft_in_place(buf: &mut [Complex64], inverse: bool, method: DftMethod) {
    if buf.len() <= 1 {
        return;
    }
    match method {
        DftMethod::Auto if buf.len().is_power_of_two() => fft_radix2(buf, inverse),
        _ => dft_direct(buf, inverse),
    }
}

/// Row-column 2D transform of a row-major `width × height` buffer. The inverse divides
/// by `width · height`.
pub fn transform_2d(
    data: &mut [Complex64],
    width: usize,
    height: usize,
    inverse: bool,
    method: DftMethod,
) {
    assert_eq!(data.len(), width * height);
    for row in data.chunks_exact_mut(width) {
        dft_in_place(row, inverse, method);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for (y, c) in column.iter_mut().enumerate() {
            *c = data[y * width + x];
        }
        dft_in_place(&mut column, inverse, method);
        for (y, c) in column.iter().enumerate() {
            data[y * width + x] = *c;
        }
    }
    if inverse {
        let scale = 1.0 / (width * height) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}
