//! Random coefficient fields and finite-difference discretization of the
//! four operator families on uniform 2D grids with Dirichlet boundaries.

use crate::error::{EigenError, Result};
use crate::fftsort::{fft2d, ifft2d};
use crate::linalg::DenseHermitian;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Default GRF correlation parameters and log-amplitude.
pub const GRF_TAU: f64 = 3.0;
pub const GRF_ALPHA: f64 = 2.0;
pub const GRF_LOG_STD: f64 = 0.3;

/// Side of the constant-tuple field that carries elliptic coefficients.
pub const ELLIPTIC_FIELD_SIDE: usize = 8;

/// Uniform 2D grid of interior points with Dirichlet boundaries eliminated.
///
/// Unknowns are ordered row-major: node `(i, j)` with `i` along x and `j`
/// along y maps to index `i * ny + j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(EigenError::InvalidParameter(format!(
                "grid needs at least 2 interior points per axis, got {nx}x{ny}"
            )));
        }
        if !(lx > 0.0) || !(ly > 0.0) {
            return Err(EigenError::InvalidParameter(format!(
                "domain lengths must be positive, got {lx}x{ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Unit square domain.
    pub fn unit(nx: usize, ny: usize) -> Result<Self> {
        Self::new(nx, ny, 1.0, 1.0)
    }

    pub fn dx(&self) -> f64 {
        self.lx / (self.nx + 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / (self.ny + 1) as f64
    }

    pub fn n(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Grf,
    ConstantTuple,
}

/// A `p x p` real coefficient field, row-major, tagged with the seed that
/// produced it.
#[derive(Debug, Clone)]
pub struct ParameterField {
    pub p: usize,
    pub values: Vec<f64>,
    pub kind: FieldKind,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Poisson,
    Elliptic,
    Helmholtz,
    Vibration,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Poisson,
        Family::Elliptic,
        Family::Helmholtz,
        Family::Vibration,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Elliptic => "elliptic",
            Family::Helmholtz => "helmholtz",
            Family::Vibration => "vibration",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Family {
    type Err = EigenError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Family::Poisson),
            "elliptic" => Ok(Family::Elliptic),
            "helmholtz" => Ok(Family::Helmholtz),
            "vibration" => Ok(Family::Vibration),
            other => Err(EigenError::InvalidParameter(format!(
                "unknown operator family '{other}'"
            ))),
        }
    }
}

/// Everything needed to reassemble one matrix: family, grid, coefficient
/// fields, and (for the elliptic family) the constant coefficient tuple
/// `(a11, a12, a22, a1, a2, a0)`.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    pub family: Family,
    pub grid: Grid2D,
    pub fields: Vec<ParameterField>,
    pub coeffs: Option<[f64; 6]>,
}

/// Discretization output: the standard-form symmetric matrix plus assembly
/// metadata.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub matrix: DenseHermitian,
    /// Diagonal mass entries for the vibration family.
    pub mass: Option<Vec<f64>>,
    /// True when the assembled matrix was nonsymmetric and averaged with its
    /// transpose.
    pub symmetrized: bool,
    /// `||M - M^T||_F` of the pre-symmetrization assembly.
    pub asymmetry_norm: f64,
}

/// One generated problem: the spec that reproduces it and the assembled
/// matrix. The first entry of `spec.fields` is the sorting field.
#[derive(Debug, Clone)]
pub struct Problem {
    pub seed: u64,
    pub spec: OperatorSpec,
    pub op: DiscretizedOperator,
}

/// Independent stream seed for sub-draws of one problem seed.
pub(crate) fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_grf_params(p: usize, tau: f64, alpha: f64) -> Result<()> {
    if p < 4 || !p.is_power_of_two() {
        return Err(EigenError::InvalidParameter(format!(
            "field side must be a power of two >= 4, got {p}"
        )));
    }
    if !(tau > 0.0) {
        return Err(EigenError::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )));
    }
    if !(alpha > 1.0) {
        return Err(EigenError::InvalidParameter(format!(
            "alpha must exceed 1, got {alpha}"
        )));
    }
    Ok(())
}

/// Zero-mean Gaussian random field by spectral synthesis: white noise,
/// forward transform, mode `(kx, ky)` scaled by
/// `(4 pi^2 (kx^2 + ky^2) + tau^2)^(-alpha/2)` with signed frequencies,
/// inverse transform, real part.
fn grf_raw(p: usize, seed: u64, tau: f64, alpha: f64) -> Result<Vec<f64>> {
    check_grf_params(p, tau, alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..p * p).map(|_| rng.sample(StandardNormal)).collect();
    let mut spectrum = fft2d(p, &noise)?;
    let signed = |k: usize| -> f64 {
        if k <= p / 2 {
            k as f64
        } else {
            k as f64 - p as f64
        }
    };
    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    for ki in 0..p {
        let fx = signed(ki);
        for kj in 0..p {
            let fy = signed(kj);
            let scale = (four_pi2 * (fx * fx + fy * fy) + tau * tau).powf(-alpha / 2.0);
            spectrum[ki * p + kj] *= Complex64::new(scale, 0.0);
        }
    }
    let g = ifft2d(p, &spectrum)?;
    let inv = 1.0 / (p * p) as f64;
    Ok(g.iter().map(|c| c.re * inv).collect())
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Strictly positive log-normal coefficient field: `exp(0.3 g / rms(g))` of
/// the raw GRF `g`. Deterministic per `(p, seed, tau, alpha)`.
pub fn grf_sample(p: usize, seed: u64, tau: f64, alpha: f64) -> Result<ParameterField> {
    let g = grf_raw(p, seed, tau, alpha)?;
    let r = rms(&g).max(f64::MIN_POSITIVE);
    let values = g.iter().map(|v| (GRF_LOG_STD * v / r).exp()).collect();
    Ok(ParameterField {
        p,
        values,
        kind: FieldKind::Grf,
        seed,
    })
}

/// Raw GRF min-max scaled into `[0, 10]`, used as the Helmholtz wavenumber
/// field.
pub fn grf_wavenumber_field(p: usize, seed: u64, tau: f64, alpha: f64) -> Result<ParameterField> {
    let g = grf_raw(p, seed, tau, alpha)?;
    let min = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(f64::MIN_POSITIVE);
    let values = g.iter().map(|v| 10.0 * (v - min) / span).collect();
    Ok(ParameterField {
        p,
        values,
        kind: FieldKind::Grf,
        seed,
    })
}

/// Admissibility predicate for elliptic coefficient tuples
/// `(a11, a12, a22, a1, a2, a0)`.
pub(crate) fn elliptic_admissible(c: &[f64; 6]) -> bool {
    let (a11, a12, a22) = (c[0], c[1], c[2]);
    a11 < 0.0 && a22 < 0.0 && 4.0 * a11 * a22 > a12 * a12
}

/// Rejection-samples elliptic coefficients: `a11, a22, a1, a2, a0` uniform in
/// `(-1, 1)`, the coupling `a12` uniform in `(-0.01, 0.01)`, accepted when
/// `a11 < 0`, `a22 < 0`, and `4 a11 a22 > a12^2`. Also returns the tuple
/// broadcast into a constant-tuple field for the sorting stage.
pub fn sample_elliptic_coeffs(seed: u64) -> ([f64; 6], ParameterField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tuple = loop {
        let c = draw_elliptic_candidate(&mut rng);
        if elliptic_admissible(&c) {
            break c;
        }
    };
    let p = ELLIPTIC_FIELD_SIDE;
    let mut values = vec![0.0; p * p];
    values[..6].copy_from_slice(&tuple);
    (
        tuple,
        ParameterField {
            p,
            values,
            kind: FieldKind::ConstantTuple,
            seed,
        },
    )
}

pub(crate) fn draw_elliptic_candidate(rng: &mut impl Rng) -> [f64; 6] {
    [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-0.01..0.01),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ]
}

/// Evaluates the field at every interior grid node by bilinear interpolation
/// of cell-centered samples, clamped at the field edge. Returns one value per
/// unknown in grid index order.
pub fn resample_to_grid(field: &ParameterField, grid: &Grid2D) -> Vec<f64> {
    let p = field.p;
    let mut out = Vec::with_capacity(grid.n());
    for i in 0..grid.nx {
        let x = (i + 1) as f64 / (grid.nx + 1) as f64;
        let u = (x * p as f64 - 0.5).clamp(0.0, (p - 1) as f64);
        let u0 = u.floor() as usize;
        let u1 = (u0 + 1).min(p - 1);
        let fu = u - u0 as f64;
        for j in 0..grid.ny {
            let y = (j + 1) as f64 / (grid.ny + 1) as f64;
            let v = (y * p as f64 - 0.5).clamp(0.0, (p - 1) as f64);
            let v0 = v.floor() as usize;
            let v1 = (v0 + 1).min(p - 1);
            let fv = v - v0 as f64;
            let f00 = field.values[u0 * p + v0];
            let f01 = field.values[u0 * p + v1];
            let f10 = field.values[u1 * p + v0];
            let f11 = field.values[u1 * p + v1];
            out.push(
                (1.0 - fu) * ((1.0 - fv) * f00 + fv * f01) + fu * ((1.0 - fv) * f10 + fv * f11),
            );
        }
    }
    out
}

fn require_positive(name: &str, values: &[f64]) -> Result<()> {
    for &v in values {
        if !(v > 0.0) || !v.is_finite() {
            return Err(EigenError::InvalidParameter(format!(
                "{name} coefficient must be strictly positive and finite, got {v}"
            )));
        }
    }
    Ok(())
}

/// Flux-form five-point assembly of `-div(K grad u)` with face-averaged K and
/// Dirichlet rows eliminated. Symmetric positive definite for positive K.
fn assemble_flux_form(grid: &Grid2D, k: &[f64]) -> DenseHermitian {
    let (nx, ny) = (grid.nx, grid.ny);
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let inv_dy2 = 1.0 / (grid.dy() * grid.dy());
    let mut a = DenseHermitian::zeros(grid.n());
    // K at a boundary-adjacent face averages the node with itself.
    let face = |ka: f64, kb: f64| 0.5 * (ka + kb);
    for i in 0..nx {
        for j in 0..ny {
            let r = grid.index(i, j);
            let kc = k[r];
            let kw = if i > 0 { face(kc, k[grid.index(i - 1, j)]) } else { kc };
            let ke = if i + 1 < nx { face(kc, k[grid.index(i + 1, j)]) } else { kc };
            let ks = if j > 0 { face(kc, k[grid.index(i, j - 1)]) } else { kc };
            let kn = if j + 1 < ny { face(kc, k[grid.index(i, j + 1)]) } else { kc };
            a.add_sym(r, r, (kw + ke) * inv_dx2 + (ks + kn) * inv_dy2);
            if i + 1 < nx {
                a.set_sym(r, grid.index(i + 1, j), -ke * inv_dx2);
            }
            if j + 1 < ny {
                a.set_sym(r, grid.index(i, j + 1), -kn * inv_dy2);
            }
        }
    }
    a
}

/// Five-point constant-coefficient Laplacian `-lap u` as a sparse stencil:
/// per-row list of `(column, value)` with the diagonal first.
fn laplacian_stencil(grid: &Grid2D) -> Vec<Vec<(usize, f64)>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let inv_dy2 = 1.0 / (grid.dy() * grid.dy());
    let mut rows = Vec::with_capacity(grid.n());
    for i in 0..nx {
        for j in 0..ny {
            let mut row = vec![(grid.index(i, j), 2.0 * inv_dx2 + 2.0 * inv_dy2)];
            if i > 0 {
                row.push((grid.index(i - 1, j), -inv_dx2));
            }
            if i + 1 < nx {
                row.push((grid.index(i + 1, j), -inv_dx2));
            }
            if j > 0 {
                row.push((grid.index(i, j - 1), -inv_dy2));
            }
            if j + 1 < ny {
                row.push((grid.index(i, j + 1), -inv_dy2));
            }
            rows.push(row);
        }
    }
    rows
}

fn discretize_elliptic(grid: &Grid2D, coeffs: &[f64; 6]) -> (DenseHermitian, f64) {
    let [a11, a12, a22, a1, a2, a0] = *coeffs;
    let (nx, ny) = (grid.nx, grid.ny);
    let n = grid.n();
    let dx = grid.dx();
    let dy = grid.dy();
    let cxx = a11 / (dx * dx);
    let cyy = a22 / (dy * dy);
    let cxy = a12 / (4.0 * dx * dy);
    let cx = a1 / (2.0 * dx);
    let cy = a2 / (2.0 * dy);

    let mut m = vec![0.0f64; n * n];
    for i in 0..nx {
        for j in 0..ny {
            let r = grid.index(i, j);
            m[r * n + r] += -2.0 * cxx - 2.0 * cyy + a0;
            if i > 0 {
                m[r * n + grid.index(i - 1, j)] += cxx - cx;
            }
            if i + 1 < nx {
                m[r * n + grid.index(i + 1, j)] += cxx + cx;
            }
            if j > 0 {
                m[r * n + grid.index(i, j - 1)] += cyy - cy;
            }
            if j + 1 < ny {
                m[r * n + grid.index(i, j + 1)] += cyy + cy;
            }
            if i > 0 && j > 0 {
                m[r * n + grid.index(i - 1, j - 1)] += cxy;
            }
            if i + 1 < nx && j + 1 < ny {
                m[r * n + grid.index(i + 1, j + 1)] += cxy;
            }
            if i > 0 && j + 1 < ny {
                m[r * n + grid.index(i - 1, j + 1)] -= cxy;
            }
            if i + 1 < nx && j > 0 {
                m[r * n + grid.index(i + 1, j - 1)] -= cxy;
            }
        }
    }
    let mut asym2 = 0.0;
    for r in 0..n {
        for c in r + 1..n {
            let d = m[r * n + c] - m[c * n + r];
            asym2 += 2.0 * d * d;
        }
    }
    // from_rows stores (M + M^T)/2
    let a = DenseHermitian::from_rows(n, &m).expect("square assembly");
    (a, asym2.sqrt())
}

fn discretize_vibration(grid: &Grid2D, d: &[f64], rho: &[f64]) -> DiscretizedOperator {
    let n = grid.n();
    let stencil = laplacian_stencil(grid);
    // A_bih = L diag(D) L accumulated through each intermediate node t.
    let mut a = vec![0.0f64; n * n];
    for (t, row) in stencil.iter().enumerate() {
        let dt = d[t];
        for &(r, lr) in row {
            let w = lr * dt;
            for &(c, lc) in row {
                a[r * n + c] += w * lc;
            }
        }
    }
    let inv_sqrt_m: Vec<f64> = rho.iter().map(|&m| 1.0 / m.sqrt()).collect();
    for r in 0..n {
        for c in 0..n {
            a[r * n + c] *= inv_sqrt_m[r] * inv_sqrt_m[c];
        }
    }
    DiscretizedOperator {
        matrix: DenseHermitian::from_rows(n, &a).expect("square assembly"),
        mass: Some(rho.to_vec()),
        symmetrized: false,
        asymmetry_norm: 0.0,
    }
}

/// Assembles the standard-form symmetric matrix for the spec's family.
pub fn discretize(spec: &OperatorSpec) -> Result<DiscretizedOperator> {
    let grid = &spec.grid;
    match spec.family {
        Family::Poisson => {
            let field = spec.fields.first().ok_or_else(|| {
                EigenError::InvalidParameter("poisson needs a diffusion field".into())
            })?;
            let k = resample_to_grid(field, grid);
            require_positive("diffusion", &k)?;
            Ok(DiscretizedOperator {
                matrix: assemble_flux_form(grid, &k),
                mass: None,
                symmetrized: false,
                asymmetry_norm: 0.0,
            })
        }
        Family::Helmholtz => {
            if spec.fields.len() < 2 {
                return Err(EigenError::InvalidParameter(
                    "helmholtz needs a diffusion field and a wavenumber field".into(),
                ));
            }
            let p_coef = resample_to_grid(&spec.fields[0], grid);
            require_positive("diffusion", &p_coef)?;
            let k_coef = resample_to_grid(&spec.fields[1], grid);
            let mut a = assemble_flux_form(grid, &p_coef);
            a.scale(-1.0);
            for (r, &kv) in k_coef.iter().enumerate() {
                a.add_sym(r, r, kv * kv);
            }
            Ok(DiscretizedOperator {
                matrix: a,
                mass: None,
                symmetrized: false,
                asymmetry_norm: 0.0,
            })
        }
        Family::Elliptic => {
            let coeffs = spec.coeffs.ok_or_else(|| {
                EigenError::InvalidParameter("elliptic needs a coefficient tuple".into())
            })?;
            if !elliptic_admissible(&coeffs) {
                return Err(EigenError::InvalidParameter(format!(
                    "coefficient tuple {coeffs:?} is not admissible"
                )));
            }
            let (a, asymmetry_norm) = discretize_elliptic(grid, &coeffs);
            Ok(DiscretizedOperator {
                matrix: a,
                mass: None,
                symmetrized: true,
                asymmetry_norm,
            })
        }
        Family::Vibration => {
            if spec.fields.len() < 2 {
                return Err(EigenError::InvalidParameter(
                    "vibration needs a rigidity field and a density field".into(),
                ));
            }
            let d = resample_to_grid(&spec.fields[0], grid);
            require_positive("rigidity", &d)?;
            let rho = resample_to_grid(&spec.fields[1], grid);
            require_positive("density", &rho)?;
            Ok(discretize_vibration(grid, &d, &rho))
        }
    }
}

/// Builds and discretizes one problem of the family from a single seed.
pub fn make_problem(family: Family, grid: &Grid2D, p: usize, seed: u64) -> Result<Problem> {
    let spec = match family {
        Family::Poisson => OperatorSpec {
            family,
            grid: *grid,
            fields: vec![grf_sample(p, seed, GRF_TAU, GRF_ALPHA)?],
            coeffs: None,
        },
        Family::Helmholtz => OperatorSpec {
            family,
            grid: *grid,
            fields: vec![
                grf_sample(p, seed, GRF_TAU, GRF_ALPHA)?,
                grf_wavenumber_field(p, derive_seed(seed, 1), GRF_TAU, GRF_ALPHA)?,
            ],
            coeffs: None,
        },
        Family::Elliptic => {
            let (tuple, field) = sample_elliptic_coeffs(seed);
            OperatorSpec {
                family,
                grid: *grid,
                fields: vec![field],
                coeffs: Some(tuple),
            }
        }
        Family::Vibration => OperatorSpec {
            family,
            grid: *grid,
            fields: vec![
                grf_sample(p, seed, GRF_TAU, GRF_ALPHA)?,
                grf_sample(p, derive_seed(seed, 2), GRF_TAU, GRF_ALPHA)?,
            ],
            coeffs: None,
        },
    };
    let op = discretize(&spec)?;
    Ok(Problem { seed, spec, op })
}

/// N independent problems with per-problem seeds `master_seed + index`, in
/// generation order.
pub fn generate_problem_set(
    family: Family,
    count: usize,
    grid: &Grid2D,
    p: usize,
    master_seed: u64,
) -> Result<Vec<Problem>> {
    if count == 0 {
        return Err(EigenError::InvalidParameter("problem count must be >= 1".into()));
    }
    (0..count)
        .map(|i| make_problem(family, grid, p, master_seed + i as u64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_eig_oracle;
    use std::f64::consts::PI;

    fn constant_field(p: usize, c: f64) -> ParameterField {
        ParameterField {
            p,
            values: vec![c; p * p],
            kind: FieldKind::Grf,
            seed: 0,
        }
    }

    fn poisson_unit_k(nx: usize, ny: usize, lx: f64, ly: f64) -> DenseHermitian {
        let grid = Grid2D::new(nx, ny, lx, ly).unwrap();
        let spec = OperatorSpec {
            family: Family::Poisson,
            grid,
            fields: vec![constant_field(8, 1.0)],
            coeffs: None,
        };
        discretize(&spec).unwrap().matrix
    }

    #[test]
    fn constant_k_reproduces_the_four_node_stencil() {
        // nx = ny = 2 with lx = ly = 3 gives dx = 1
        let a = poisson_unit_k(2, 2, 3.0, 3.0);
        let expect = [
            [-4.0, 1.0, 1.0, 0.0],
            [1.0, -4.0, 0.0, 1.0],
            [1.0, 0.0, -4.0, 1.0],
            [0.0, 1.0, 1.0, -4.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(-a.get(i, j), expect[i][j], "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn constant_k_spectrum_is_analytic() {
        let n = 10;
        let a = poisson_unit_k(n, n, 1.0, 1.0);
        let dx = 1.0 / (n + 1) as f64;
        let mut expect: Vec<f64> = (1..=n)
            .flat_map(|i| {
                (1..=n).map(move |j| {
                    4.0 / (dx * dx)
                        * ((i as f64 * PI * dx / 2.0).sin().powi(2)
                            + (j as f64 * PI * dx / 2.0).sin().powi(2))
                })
            })
            .collect();
        expect.sort_by(f64::total_cmp);
        let pairs = dense_eig_oracle(&a, n * n).unwrap();
        let mut got = pairs.values.clone();
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-9 * e.abs(), "{g} vs {e}");
        }
    }

    #[test]
    fn smallest_eigenvalue_refines_toward_the_continuum() {
        // smallest eigenvalue of the unit-square Dirichlet Laplacian is 2 pi^2
        let target = 2.0 * PI * PI;
        let mut errors = Vec::new();
        for n in [10usize, 20, 40] {
            let a = poisson_unit_k(n, n, 1.0, 1.0);
            let lam = dense_eig_oracle(&a, 1).unwrap().values[0];
            errors.push((lam - target).abs());
        }
        // first-order-or-better decay per refinement step
        assert!(errors[1] < errors[0] / 2.0, "{errors:?}");
        assert!(errors[2] < errors[1] / 2.0, "{errors:?}");
    }

    #[test]
    fn flux_form_is_positive_definite_for_positive_k() {
        let grid = Grid2D::unit(8, 8).unwrap();
        for seed in 0..5 {
            let field = grf_sample(16, seed, GRF_TAU, GRF_ALPHA).unwrap();
            let spec = OperatorSpec {
                family: Family::Poisson,
                grid,
                fields: vec![field],
                coeffs: None,
            };
            let op = discretize(&spec).unwrap();
            let min = dense_eig_oracle(&op.matrix, 1).unwrap().values[0];
            assert!(min > 1e-9 * op.matrix.norm_max(), "seed {seed}: min {min}");
        }
    }

    #[test]
    fn grf_is_deterministic_and_positive() {
        let a = grf_sample(64, 7, 3.0, 2.0).unwrap();
        let b = grf_sample(64, 7, 3.0, 2.0).unwrap();
        assert_eq!(a.values, b.values);
        assert!(a.values.iter().all(|&v| v > 0.0));
        let c = grf_sample(64, 8, 3.0, 2.0).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn smooth_limit_is_nearly_constant() {
        let field = grf_sample(32, 3, 3.0, 20.0).unwrap();
        let max = field.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = field.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 1.05, "ratio {}", max / min);
    }

    #[test]
    fn log_field_mean_vanishes_over_seeds() {
        let p = 32;
        let means: Vec<f64> = (0..100u64)
            .map(|seed| {
                let f = grf_sample(p, seed, GRF_TAU, GRF_ALPHA).unwrap();
                f.values.iter().map(|v| v.ln()).sum::<f64>() / (p * p) as f64
            })
            .collect();
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>()
            / (means.len() - 1) as f64;
        let se = (var / means.len() as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn wavenumber_field_spans_zero_to_ten() {
        let f = grf_wavenumber_field(32, 11, GRF_TAU, GRF_ALPHA).unwrap();
        let max = f.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = f.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(min, 0.0);
        assert_eq!(max, 10.0);
    }

    #[test]
    fn elliptic_sampler_is_deterministic_and_admissible() {
        let (a, field_a) = sample_elliptic_coeffs(123);
        let (b, _) = sample_elliptic_coeffs(123);
        assert_eq!(a, b);
        assert!(elliptic_admissible(&a));
        assert_eq!(&field_a.values[..6], &a);
        assert!(field_a.values[6..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn elliptic_acceptance_rate_is_one_quarter() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let total = 100_000;
        let accepted = (0..total)
            .filter(|_| elliptic_admissible(&draw_elliptic_candidate(&mut rng)))
            .count();
        let rate = accepted as f64 / total as f64;
        assert!((rate - 0.25).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn elliptic_matrix_is_symmetrized_with_recorded_asymmetry() {
        let grid = Grid2D::unit(6, 6).unwrap();
        let problem = make_problem(Family::Elliptic, &grid, 8, 4).unwrap();
        assert!(problem.op.symmetrized);
        // drift coefficients are generically nonzero, so the raw assembly is
        // nonsymmetric
        assert!(problem.op.asymmetry_norm > 0.0);
        let a = &problem.op.matrix;
        for i in 0..a.n() {
            for j in 0..a.n() {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
    }

    #[test]
    fn helmholtz_diagonal_shift_matches_wavenumber_field() {
        let grid = Grid2D::unit(6, 6).unwrap();
        let problem = make_problem(Family::Helmholtz, &grid, 16, 9).unwrap();
        let without_shift = {
            let spec = OperatorSpec {
                family: Family::Poisson,
                grid,
                fields: vec![problem.spec.fields[0].clone()],
                coeffs: None,
            };
            discretize(&spec).unwrap().matrix
        };
        let k = resample_to_grid(&problem.spec.fields[1], &grid);
        for r in 0..grid.n() {
            let expect = -without_shift.get(r, r) + k[r] * k[r];
            assert!((problem.op.matrix.get(r, r) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn vibration_with_unit_fields_squares_the_laplacian() {
        let grid = Grid2D::unit(5, 5).unwrap();
        let spec = OperatorSpec {
            family: Family::Vibration,
            grid,
            fields: vec![constant_field(8, 1.0), constant_field(8, 1.0)],
            coeffs: None,
        };
        let op = discretize(&spec).unwrap();
        let lap = poisson_unit_k(5, 5, 1.0, 1.0);
        let n = grid.n();
        let lap_vals = dense_eig_oracle(&lap, n).unwrap();
        let mut expect: Vec<f64> = lap_vals.values.iter().map(|v| v * v).collect();
        expect.sort_by(f64::total_cmp);
        let mut got = dense_eig_oracle(&op.matrix, n).unwrap().values;
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-9 * e.abs().max(1.0), "{g} vs {e}");
        }
    }

    #[test]
    fn vibration_standard_form_solves_the_pencil() {
        let grid = Grid2D::unit(4, 4).unwrap();
        let problem = make_problem(Family::Vibration, &grid, 16, 21).unwrap();
        let mass = problem.op.mass.as_ref().unwrap();
        assert!(mass.iter().all(|&m| m > 0.0));
        // rebuild A_bih = M^{1/2} S M^{1/2} and check A_bih w = lambda M w
        // for eigenvectors w = M^{-1/2} v of the standard form S
        let n = grid.n();
        let s = &problem.op.matrix;
        let pairs = dense_eig_oracle(s, n).unwrap();
        let mut a_bih = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                a_bih[r * n + c] = mass[r].sqrt() * s.get(r, c) * mass[c].sqrt();
            }
        }
        let scale: f64 = a_bih.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for idx in 0..n {
            let v = pairs.vectors.col(idx);
            let w: Vec<f64> = (0..n).map(|i| v[i] / mass[i].sqrt()).collect();
            for r in 0..n {
                let aw: f64 = (0..n).map(|c| a_bih[r * n + c] * w[c]).sum();
                let mw = mass[r] * w[r];
                assert!(
                    (aw - pairs.values[idx] * mw).abs() < 1e-9 * scale,
                    "pair {idx}, row {r}"
                );
            }
        }
    }

    #[test]
    fn resampling_a_constant_field_is_exact() {
        let grid = Grid2D::unit(7, 5).unwrap();
        let vals = resample_to_grid(&constant_field(16, 2.5), &grid);
        assert_eq!(vals.len(), 35);
        assert!(vals.iter().all(|&v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn resampling_interpolates_a_linear_ramp() {
        // field linear in the x coordinate: value = cell-center x position
        let p = 16;
        let field = ParameterField {
            p,
            values: (0..p * p)
                .map(|idx| ((idx / p) as f64 + 0.5) / p as f64)
                .collect(),
            kind: FieldKind::Grf,
            seed: 0,
        };
        let grid = Grid2D::unit(9, 3).unwrap();
        let vals = resample_to_grid(&field, &grid);
        for i in 0..grid.nx {
            let x = (i + 1) as f64 / (grid.nx + 1) as f64;
            for j in 0..grid.ny {
                let got = vals[grid.index(i, j)];
                // exact except in the clamped half-cell at the edges
                if x > 0.5 / p as f64 && x < 1.0 - 0.5 / p as f64 {
                    assert!((got - x).abs() < 1e-12, "x {x}: {got}");
                }
            }
        }
    }

    #[test]
    fn problem_sets_are_reproducible() {
        let grid = Grid2D::unit(4, 4).unwrap();
        for family in Family::ALL {
            let a = generate_problem_set(family, 3, &grid, 16, 500).unwrap();
            let b = generate_problem_set(family, 3, &grid, 16, 500).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.op.matrix.as_slice(), y.op.matrix.as_slice());
                assert_eq!(x.seed, y.seed);
            }
            assert_eq!(a[0].seed + 1, a[1].seed);
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(Grid2D::unit(1, 5).is_err());
        assert!(grf_sample(12, 0, 3.0, 2.0).is_err());
        assert!(grf_sample(16, 0, -1.0, 2.0).is_err());
        assert!(grf_sample(16, 0, 3.0, 0.5).is_err());
        // non-positive diffusion coefficient
        let grid = Grid2D::unit(4, 4).unwrap();
        let field = constant_field(8, -1.0);
        let spec = OperatorSpec {
            family: Family::Poisson,
            grid,
            fields: vec![field],
            coeffs: None,
        };
        assert!(discretize(&spec).is_err());
    }
}
