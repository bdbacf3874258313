//! Truncated-FFT low-frequency signatures and greedy nearest-neighbor
//! ordering of a problem sequence.

use crate::error::{EigenError, Result};
use crate::operators::ParameterField;
use num_complex::Complex64;
use std::time::Instant;

/// Default truncation side: 20, rounded down to the nearest even value that
/// fits the field.
pub fn default_p0(p: usize) -> usize {
    let p0 = p.min(20);
    p0 - p0 % 2
}

/// Low-frequency spectral signature of a coefficient field: the centered
/// `p0 x p0` block of its DFT, stored with mode (0, 0) back at index (0, 0).
#[derive(Debug, Clone)]
pub struct LowFreqSignature {
    pub p0: usize,
    pub coeffs: Vec<Complex64>,
}

/// A solve ordering: a permutation of problem indices, first entry the start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOrder {
    pub permutation: Vec<usize>,
}

/// Wall-time split of [`sort_problems`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SortTimings {
    pub fft_seconds: f64,
    pub greedy_seconds: f64,
}

fn require_power_of_two(p: usize) -> Result<()> {
    if p == 0 || !p.is_power_of_two() {
        return Err(EigenError::InvalidParameter(format!(
            "FFT side must be a power of two, got {p}"
        )));
    }
    Ok(())
}

/// In-place radix-2 Cooley-Tukey transform. `sign = -1` forward, `+1`
/// inverse; both unnormalized.
fn fft1d(buf: &mut [Complex64], sign: f64) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let wl = Complex64::new(ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = buf[i + k];
                let v = buf[i + k + len / 2] * w;
                buf[i + k] = u + v;
                buf[i + k + len / 2] = u - v;
                w *= wl;
            }
            i += len;
        }
        len <<= 1;
    }
}

fn fft2d_complex(p: usize, data: &mut [Complex64], sign: f64) {
    for row in data.chunks_mut(p) {
        fft1d(row, sign);
    }
    let mut col = vec![Complex64::default(); p];
    for j in 0..p {
        for i in 0..p {
            col[i] = data[i * p + j];
        }
        fft1d(&mut col, sign);
        for i in 0..p {
            data[i * p + j] = col[i];
        }
    }
}

/// Unnormalized forward 2D DFT of a row-major `p x p` real field.
pub fn fft2d(p: usize, field: &[f64]) -> Result<Vec<Complex64>> {
    require_power_of_two(p)?;
    if field.len() != p * p {
        return Err(EigenError::DimensionMismatch(format!(
            "field has {} entries, expected {}",
            field.len(),
            p * p
        )));
    }
    let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2d_complex(p, &mut data, -1.0);
    Ok(data)
}

/// Unnormalized inverse 2D DFT; `ifft2d(fft2d(x)) / p^2 == x`.
pub fn ifft2d(p: usize, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    require_power_of_two(p)?;
    if spectrum.len() != p * p {
        return Err(EigenError::DimensionMismatch(format!(
            "spectrum has {} entries, expected {}",
            spectrum.len(),
            p * p
        )));
    }
    let mut data = spectrum.to_vec();
    fft2d_complex(p, &mut data, 1.0);
    Ok(data)
}

/// Centered crop of the spectrum keeping modes with |k| < p0/2 per axis,
/// negative frequencies included. The DC term stays at index (0, 0).
pub fn truncate_low_freq(p: usize, spectrum: &[Complex64], p0: usize) -> Result<LowFreqSignature> {
    require_power_of_two(p)?;
    if p0 > p || p0 == 0 || p0 % 2 != 0 {
        return Err(EigenError::InvalidParameter(format!(
            "truncation side {p0} must be even and at most the field side {p}"
        )));
    }
    if spectrum.len() != p * p {
        return Err(EigenError::DimensionMismatch(format!(
            "spectrum has {} entries, expected {}",
            spectrum.len(),
            p * p
        )));
    }
    let half = p / 2;
    let h0 = p0 / 2;
    let base = half - h0;
    let mut coeffs = vec![Complex64::default(); p0 * p0];
    for i in 0..p0 {
        for j in 0..p0 {
            // shifted spectrum index of crop cell (i, j)
            let si = (base + i + half) % p;
            let sj = (base + j + half) % p;
            // unshift within the crop so mode (0,0) lands at (0,0)
            let oi = (i + h0) % p0;
            let oj = (j + h0) % p0;
            coeffs[oi * p0 + oj] = spectrum[si * p + sj];
        }
    }
    Ok(LowFreqSignature { p0, coeffs })
}

/// Frobenius distance between two signatures of equal truncation side.
pub fn signature_distance(a: &LowFreqSignature, b: &LowFreqSignature) -> Result<f64> {
    if a.p0 != b.p0 {
        return Err(EigenError::DimensionMismatch(format!(
            "signature sides differ: {} vs {}",
            a.p0, b.p0
        )));
    }
    let sum: f64 = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    Ok(sum.sqrt())
}

/// Nearest-neighbor chain through the signatures: each step visits the
/// unvisited signature closest to the previous one, lowest index on ties.
pub fn greedy_sort(signatures: &[LowFreqSignature], start: usize) -> Result<SolveOrder> {
    let n = signatures.len();
    if n == 0 {
        return Err(EigenError::InvalidParameter("no signatures to sort".into()));
    }
    if start >= n {
        return Err(EigenError::InvalidParameter(format!(
            "start index {start} out of range for {n} signatures"
        )));
    }
    let mut visited = vec![false; n];
    let mut permutation = Vec::with_capacity(n);
    let mut current = start;
    visited[current] = true;
    permutation.push(current);
    for _ in 1..n {
        let mut best = f64::INFINITY;
        let mut best_idx = usize::MAX;
        for (j, sig) in signatures.iter().enumerate() {
            if visited[j] {
                continue;
            }
            let d = signature_distance(&signatures[current], sig)?;
            if d < best {
                best = d;
                best_idx = j;
            }
        }
        visited[best_idx] = true;
        permutation.push(best_idx);
        current = best_idx;
    }
    Ok(SolveOrder { permutation })
}

/// Full ordering pipeline: transform each field, truncate to the signature
/// side, greedy-sort starting at index 0. Returns the order together with the
/// wall-time split between the transform and the greedy phases.
pub fn sort_problems(fields: &[ParameterField], p0: usize) -> Result<(SolveOrder, SortTimings)> {
    if fields.is_empty() {
        return Err(EigenError::InvalidParameter("no fields to sort".into()));
    }
    let p = fields[0].p;
    for f in fields {
        if f.p != p {
            return Err(EigenError::DimensionMismatch(format!(
                "mixed field sides {} and {}",
                p, f.p
            )));
        }
    }
    let fft_start = Instant::now();
    let signatures: Vec<LowFreqSignature> = fields
        .iter()
        .map(|f| truncate_low_freq(p, &fft2d(p, &f.values)?, p0))
        .collect::<Result<_>>()?;
    let fft_seconds = fft_start.elapsed().as_secs_f64();

    let greedy_start = Instant::now();
    let order = greedy_sort(&signatures, 0)?;
    let greedy_seconds = greedy_start.elapsed().as_secs_f64();
    Ok((
        order,
        SortTimings {
            fft_seconds,
            greedy_seconds,
        },
    ))
}
