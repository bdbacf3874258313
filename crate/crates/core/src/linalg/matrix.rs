use crate::error::{EigenError, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Counts block matrix-vector products. Owned by the caller so that solver
/// cost accounting stays explicit.
#[derive(Debug, Default, Clone, Copy)]
pub struct MatvecCounter {
    count: u64,
}

impl MatvecCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, matvecs: usize) {
        self.count += matvecs as u64;
    }

    pub fn get(&self) -> u64 {
        self.count
    }
}

/// Dense real-symmetric matrix, row-major storage.
///
/// Symmetry is exact by construction: every write stores the same value at
/// `(i, j)` and `(j, i)`.
#[derive(Debug, Clone)]
pub struct DenseHermitian {
    n: usize,
    data: Vec<f64>,
}

impl DenseHermitian {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut a = Self::zeros(n);
        for i in 0..n {
            a.data[i * n + i] = 1.0;
        }
        a
    }

    /// Builds from a row-major array, storing the symmetrized value
    /// `(a_ij + a_ji) / 2` so the symmetry invariant holds exactly.
    pub fn from_rows(n: usize, data: &[f64]) -> Result<Self> {
        if n == 0 {
            return Err(EigenError::InvalidParameter("n must be >= 1".into()));
        }
        if data.len() != n * n {
            return Err(EigenError::DimensionMismatch(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let mut a = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (data[i * n + j] + data[j * n + i]);
                a.data[i * n + j] = v;
                a.data[j * n + i] = v;
            }
        }
        Ok(a)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut a = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            a.data[i * diag.len() + i] = d;
        }
        a
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Adds `v` to both `(i, j)` and `(j, i)`; the diagonal is added once.
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }
}

/// Block of column vectors: `n x k`, column-major storage.
#[derive(Debug, Clone)]
pub struct VectorBlock {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl VectorBlock {
    pub fn zeros(n: usize, k: usize) -> Self {
        assert!(n >= 1 && k >= 1, "block dimensions must be at least 1");
        Self {
            n,
            k,
            data: vec![0.0; n * k],
        }
    }

    pub fn from_columns(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || k == 0 || data.len() != n * k {
            return Err(EigenError::DimensionMismatch(format!(
                "block {}x{} needs {} entries, got {}",
                n,
                k,
                n * k,
                data.len()
            )));
        }
        Ok(Self { n, k, data })
    }

    /// Standard-normal random block, deterministic for a given RNG state.
    pub fn gaussian(n: usize, k: usize, rng: &mut impl Rng) -> Self {
        let data = (0..n * k).map(|_| rng.sample(StandardNormal)).collect();
        Self { n, k, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &VectorBlock) -> Result<VectorBlock> {
        if self.n != other.n {
            return Err(EigenError::DimensionMismatch(format!(
                "hcat row counts {} vs {}",
                self.n, other.n
            )));
        }
        let mut data = Vec::with_capacity(self.n * (self.k + other.k));
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(VectorBlock {
            n: self.n,
            k: self.k + other.k,
            data,
        })
    }

    /// Copies the selected columns into a new block, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> VectorBlock {
        assert!(!idx.is_empty());
        let mut out = VectorBlock::zeros(self.n, idx.len());
        for (dst, &src) in idx.iter().enumerate() {
            out.col_mut(dst).copy_from_slice(self.col(src));
        }
        out
    }

    /// Maximum absolute deviation of the Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        for i in 0..self.k {
            for j in i..self.k {
                let g = dot(self.col(i), self.col(j));
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((g - target).abs());
            }
        }
        dev
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += s * x`
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

const COL_CHUNK: usize = 8;

/// `A * Y` without touching any counter. Columns are processed in chunks of
/// eight with the chunk repacked row-major, so the inner loop runs over
/// contiguous memory in both operands.
pub(crate) fn gemm(a: &DenseHermitian, y: &VectorBlock) -> VectorBlock {
    assert_eq!(a.n, y.n, "gemm dimension mismatch");
    let n = a.n;
    let k = y.k;
    let mut out = VectorBlock::zeros(n, k);
    let mut packed = vec![0.0f64; n * COL_CHUNK];

    let mut c0 = 0;
    while c0 < k {
        let w = COL_CHUNK.min(k - c0);
        for c in 0..w {
            let col = y.col(c0 + c);
            for l in 0..n {
                packed[l * w + c] = col[l];
            }
        }
        if w == COL_CHUNK {
            for i in 0..n {
                let row = a.row(i);
                let mut acc = [0.0f64; COL_CHUNK];
                for (l, &al) in row.iter().enumerate() {
                    let yr = &packed[l * COL_CHUNK..l * COL_CHUNK + COL_CHUNK];
                    for c in 0..COL_CHUNK {
                        acc[c] += al * yr[c];
                    }
                }
                for c in 0..COL_CHUNK {
                    out.data[(c0 + c) * n + i] = acc[c];
                }
            }
        } else {
            for i in 0..n {
                let row = a.row(i);
                let mut acc = [0.0f64; COL_CHUNK];
                for (l, &al) in row.iter().enumerate() {
                    let yr = &packed[l * w..l * w + w];
                    for (accc, yc) in acc[..w].iter_mut().zip(yr) {
                        *accc += al * yc;
                    }
                }
                for c in 0..w {
                    out.data[(c0 + c) * n + i] = acc[c];
                }
            }
        }
        c0 += w;
    }
    out
}

/// `Q * W` where `W` is a small `k x m` block (column-major).
pub(crate) fn rotate(q: &VectorBlock, w: &VectorBlock) -> VectorBlock {
    assert_eq!(q.k, w.n, "rotate dimension mismatch");
    let mut out = VectorBlock::zeros(q.n, w.k);
    for j in 0..w.k {
        let wc = w.col(j);
        let oc = out.col_mut(j);
        for (l, &wl) in wc.iter().enumerate() {
            if wl != 0.0 {
                axpy(wl, q.col(l), oc);
            }
        }
    }
    out
}

/// Block matrix product `A * Y`, counting one matvec per column.
pub fn matmul_block(
    a: &DenseHermitian,
    y: &VectorBlock,
    counter: &mut MatvecCounter,
) -> Result<VectorBlock> {
    if a.n != y.n {
        return Err(EigenError::DimensionMismatch(format!(
            "matrix is {0}x{0} but block has {1} rows",
            a.n, y.n
        )));
    }
    counter.add(y.k);
    Ok(gemm(a, y))
}

/// Eigenvalues with an orthonormal eigenvector block (`vectors.k()` columns,
/// one per value).
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: VectorBlock,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Ordering used throughout: ascending `|lambda|`, ties broken by signed
/// value ascending.
pub fn abs_value_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[a]
            .abs()
            .total_cmp(&values[b].abs())
            .then(values[a].total_cmp(&values[b]))
    });
    idx
}
