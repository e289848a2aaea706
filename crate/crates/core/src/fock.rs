//! Operator algebra on truncated one- and two-mode Fock spaces.
//!
//! Operators are stored as compressed sparse row matrices tagged with the
//! per-mode truncation sizes; density matrices are dense. Composite indices
//! follow the Kronecker convention: for dims `[n0, n1]` the basis state
//! `|i0, i1>` sits at index `i0 * n1 + i1`.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Compressed sparse row matrix over `C64`.
///
/// Entries are sorted by column inside each row and no stored entry is an
/// exact zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![ONE; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros (including cancellations) are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        let mut it = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = it.next() {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            while let Some(&(r2, c2, v2)) = it.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    it.next();
                } else {
                    break;
                }
            }
            if v != ZERO {
                rows.push(r);
                indices.push(c);
                values.push(v);
            }
        }
        for &r in &rows {
            indptr[r + 1] += 1;
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        SparseMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: MatRef<'_, C64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != ZERO {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => ZERO,
        }
    }

    pub fn has_explicit_zeros(&self) -> bool {
        self.values.contains(&ZERO)
    }

    pub fn scale(&self, z: C64) -> Self {
        if z == ZERO {
            return Self::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= z);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let t = self.iter().chain(other.iter()).collect();
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Vec::new();
        for (i, k, a) in self.iter() {
            let (cols, vals) = other.row(k);
            for (&j, &b) in cols.iter().zip(vals) {
                t.push((i, j, a * b));
            }
        }
        Self::from_triplets(self.nrows, other.ncols, t)
    }

    pub fn transpose(&self) -> Self {
        let t = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn adjoint(&self) -> Self {
        let t = self.iter().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (other.nrows, other.ncols);
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for (i, j, a) in self.iter() {
            for (k, l, b) in other.iter() {
                t.push((i * p + k, j * q + l, a * b));
            }
        }
        Self::from_triplets(self.nrows * p, self.ncols * q, t)
    }

    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = ZERO;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `self * m` for a dense right factor.
    pub fn mul_dense(&self, m: MatRef<'_, C64>) -> Mat<C64> {
        assert_eq!(self.ncols, m.nrows());
        let mut out = Mat::<C64>::zeros(self.nrows, m.ncols());
        for c in 0..m.ncols() {
            let col = m.col(c);
            for i in 0..self.nrows {
                let (cols, vals) = self.row(i);
                let mut acc = ZERO;
                for (&j, &v) in cols.iter().zip(vals) {
                    acc += v * col[j];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).sum()
    }
}

/// Linear operator on a truncated multi-mode Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    matrix: SparseMatrix,
}

impl Operator {
    pub fn new(dims: Vec<usize>, matrix: SparseMatrix) -> Result<Self> {
        let n = total_dim(&dims)?;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Shape(format!(
                "matrix is {}x{} but dims {:?} require {n}x{n}",
                matrix.nrows(),
                matrix.ncols(),
                dims
            )));
        }
        Ok(Operator { dims, matrix })
    }

    pub fn identity(dims: &[usize]) -> Result<Self> {
        let n = total_dim(dims)?;
        Ok(Operator {
            dims: dims.to_vec(),
            matrix: SparseMatrix::identity(n),
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let n = total_dim(dims)?;
        Ok(Operator {
            dims: dims.to_vec(),
            matrix: SparseMatrix::zeros(n, n),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Operator {
            dims: self.dims.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        Operator {
            dims: self.dims.clone(),
            matrix: self.matrix.scale(z),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Operator {
            dims: self.dims.clone(),
            matrix: self.matrix.add(&other.matrix),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Operator {
            dims: self.dims.clone(),
            matrix: self.matrix.sub(&other.matrix),
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Operator {
            dims: self.dims.clone(),
            matrix: self.matrix.matmul(&other.matrix),
        })
    }

    pub fn apply(&self, state: &[C64]) -> Result<Vec<C64>> {
        if state.len() != self.dim() {
            return Err(Error::Shape(format!(
                "state of length {} for operator of dimension {}",
                state.len(),
                self.dim()
            )));
        }
        Ok(self.matrix.mul_vec(state))
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.max_abs_diff(&self.matrix.adjoint())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "operator dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

fn total_dim(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidDimension(format!("dims {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Capacity(format!("dims {dims:?} overflow the index type")))
}

/// Ladder operator `a` on a single mode truncated to `dim` Fock states.
pub fn annihilation_op(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "annihilation operator needs dim >= 2, got {dim}"
        )));
    }
    let t = (1..dim)
        .map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0)))
        .collect();
    Operator::new(vec![dim], SparseMatrix::from_triplets(dim, dim, t))
}

pub fn number_op(dim: usize) -> Result<Operator> {
    let a = annihilation_op(dim)?;
    a.adjoint().mul(&a)
}

/// Kronecker product; the result carries the concatenated dims.
pub fn tensor_product(a: &Operator, b: &Operator) -> Result<Operator> {
    let n = a
        .dim()
        .checked_mul(b.dim())
        .ok_or_else(|| Error::Capacity("tensor product dimension overflows".into()))?;
    let nnz = a.matrix.nnz().saturating_mul(b.matrix.nnz());
    if nnz > (1usize << 34) {
        return Err(Error::Capacity(format!(
            "tensor product of dimension {n} would hold {nnz} entries"
        )));
    }
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    Operator::new(dims, a.matrix.kron(&b.matrix))
}

/// `a + z * I`, the substitution used for displaced frames.
pub fn shifted_op(a: &Operator, z: C64) -> Operator {
    let id = SparseMatrix::identity(a.dim()).scale(z);
    Operator {
        dims: a.dims.clone(),
        matrix: a.matrix.add(&id),
    }
}

/// Embeds a single-mode operator into a two-mode space at position `mode`.
pub fn embed(op: &Operator, mode: usize, dims: &[usize]) -> Result<Operator> {
    if op.dims.len() != 1 || mode >= dims.len() || dims[mode] != op.dims[0] {
        return Err(Error::Shape(format!(
            "cannot embed operator with dims {:?} at mode {mode} of {:?}",
            op.dims, dims
        )));
    }
    let mut acc: Option<Operator> = None;
    for (k, &d) in dims.iter().enumerate() {
        let factor = if k == mode {
            op.clone()
        } else {
            Operator::identity(&[d])?
        };
        acc = Some(match acc {
            None => factor,
            Some(prev) => tensor_product(&prev, &factor)?,
        });
    }
    Ok(acc.expect("dims is non-empty"))
}

/// Density matrix with the frame displacement it was computed in.
///
/// `displacement[k]` is the complex offset `d_k` such that the physical mode
/// operator is `a_k + d_k` in terms of the stored basis operators.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    data: Mat<C64>,
    displacement: Vec<C64>,
}

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const PSD_TOL: f64 = 1e-8;

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(dims: Vec<usize>, data: Mat<C64>, displacement: Vec<C64>) -> Result<Self> {
        let rho = Self::new_unchecked(dims, data, displacement)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Shape checks only; used for intermediate or deliberately invalid states.
    pub fn new_unchecked(dims: Vec<usize>, data: Mat<C64>, displacement: Vec<C64>) -> Result<Self> {
        let n = total_dim(&dims)?;
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::Shape(format!(
                "density matrix is {}x{} but dims {:?} require {n}x{n}",
                data.nrows(),
                data.ncols(),
                dims
            )));
        }
        if displacement.len() != dims.len() {
            return Err(Error::Shape(format!(
                "{} displacement entries for {} modes",
                displacement.len(),
                dims.len()
            )));
        }
        Ok(DensityMatrix {
            dims,
            data,
            displacement,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_defect();
        if h > HERMITIAN_TOL {
            return Err(Error::Internal(format!("density matrix not Hermitian ({h:.3e})")));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::Internal(format!("density matrix trace {tr}")));
        }
        let lo = self.min_eigenvalue()?;
        if lo < -PSD_TOL {
            return Err(Error::Internal(format!(
                "density matrix has negative eigenvalue {lo:.3e}"
            )));
        }
        Ok(())
    }

    pub fn from_pure(dims: Vec<usize>, psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Domain("zero state vector".into()));
        }
        let n = psi.len();
        let data = Mat::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        let k = dims.len();
        Self::new(dims, data, vec![ZERO; k])
    }

    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidDimension(format!("Fock level {n} outside dim {dim}")));
        }
        let mut psi = vec![ZERO; dim];
        psi[n] = ONE;
        Self::from_pure(vec![dim], &psi)
    }

    /// Truncated thermal state, renormalised after truncation.
    pub fn thermal(dim: usize, occupation: f64) -> Result<Self> {
        if dim == 0 || !(occupation >= 0.0) {
            return Err(Error::Domain(format!("thermal state dim {dim}, n {occupation}")));
        }
        let ratio = occupation / (1.0 + occupation);
        let pops: Vec<f64> = (0..dim).map(|k| ratio.powi(k as i32)).collect();
        let total: f64 = pops.iter().sum();
        let data = Mat::from_fn(dim, dim, |i, j| {
            if i == j {
                C64::new(pops[i] / total, 0.0)
            } else {
                ZERO
            }
        });
        Self::new(vec![dim], data, vec![ZERO])
    }

    /// Truncated coherent state `|alpha>`, renormalised after truncation.
    pub fn coherent(dim: usize, alpha: C64) -> Result<Self> {
        Self::from_pure(vec![dim], &coherent_amplitudes(dim, alpha))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.data.as_ref()
    }

    pub fn displacement(&self) -> &[C64] {
        &self.displacement
    }

    pub fn with_displacement(mut self, displacement: Vec<C64>) -> Result<Self> {
        if displacement.len() != self.dims.len() {
            return Err(Error::Shape("displacement length differs from mode count".into()));
        }
        self.displacement = displacement;
        Ok(self)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.data[(i, i)]).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let h = hermitian_part(self.data.as_ref());
        h.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numerical {
                message: format!("eigenvalue solver failed: {e:?}"),
                residual: f64::NAN,
            })
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn purity(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.data[(i, j)] * self.data[(j, i)]).re;
            }
        }
        acc
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)].re).collect()
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .into_iter()
            .filter(|&p| p > 1e-300)
            .map(|p| -p * p.ln())
            .sum())
    }

    /// Tr(rho A) in the stored frame.
    pub fn expect(&self, op: &Operator) -> Result<C64> {
        expectation_value(self, op)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let (n, m) = (self.dim(), other.dim());
        let data = Mat::from_fn(n * m, n * m, |i, j| {
            self.data[(i / m, j / m)] * other.data[(i % m, j % m)]
        });
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut disp = self.displacement.clone();
        disp.extend_from_slice(&other.displacement);
        Self::new_unchecked(dims, data, disp)
    }

    /// `rho -> (rho + rho^dagger)/2`, then divide by the trace.
    pub fn symmetrized(&self) -> Self {
        let mut data = hermitian_part(self.data.as_ref());
        let tr = (0..data.nrows()).map(|i| data[(i, i)].re).sum::<f64>();
        if tr != 0.0 {
            for j in 0..data.ncols() {
                for i in 0..data.nrows() {
                    data[(i, j)] /= tr;
                }
            }
        }
        DensityMatrix {
            dims: self.dims.clone(),
            data,
            displacement: self.displacement.clone(),
        }
    }

    /// Trace distance `||rho - sigma||_1 / 2` between states of equal dims.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "trace distance between dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        let diff = &self.data - &other.data;
        let evs = hermitian_part(diff.as_ref())
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numerical {
                message: format!("eigenvalue solver failed: {e:?}"),
                residual: f64::NAN,
            })?;
        Ok(0.5 * evs.iter().map(|x| x.abs()).sum::<f64>())
    }

    /// Zero-pads every mode up to `dims` (each entry must be >= the current one).
    pub fn embed_into(&self, dims: &[usize]) -> Result<DensityMatrix> {
        if dims.len() != self.dims.len() || dims.iter().zip(&self.dims).any(|(a, b)| a < b) {
            return Err(Error::Shape(format!(
                "cannot embed dims {:?} into {:?}",
                self.dims, dims
            )));
        }
        let n = total_dim(dims)?;
        let map: Vec<usize> = (0..self.dim())
            .map(|i| {
                let digits = unravel(i, &self.dims);
                ravel(&digits, dims)
            })
            .collect();
        let mut data = Mat::<C64>::zeros(n, n);
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                data[(map[i], map[j])] = self.data[(i, j)];
            }
        }
        Self::new_unchecked(dims.to_vec(), data, self.displacement.clone())
    }
}

pub(crate) fn hermitian_part(m: MatRef<'_, C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

fn unravel(mut i: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = i % dims[k];
        i /= dims[k];
    }
    out
}

fn ravel(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

/// Fock amplitudes of a coherent state, truncated to `dim` (not renormalised).
pub fn coherent_amplitudes(dim: usize, alpha: C64) -> Vec<C64> {
    let mut out = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Tr(rho A).
pub fn expectation_value(rho: &DensityMatrix, op: &Operator) -> Result<C64> {
    if rho.dims != op.dims {
        return Err(Error::Shape(format!(
            "state dims {:?} vs operator dims {:?}",
            rho.dims, op.dims
        )));
    }
    let mut acc = ZERO;
    for (i, j, v) in op.matrix.iter() {
        acc += v * rho.data[(j, i)];
    }
    Ok(acc)
}

/// Reduced state of one mode of a two-mode density matrix.
pub fn partial_trace(rho: &DensityMatrix, keep: usize) -> Result<DensityMatrix> {
    if rho.dims.len() != 2 {
        return Err(Error::Shape(format!(
            "partial trace expects two modes, got dims {:?}",
            rho.dims
        )));
    }
    if keep > 1 {
        return Err(Error::InvalidDimension(format!("mode index {keep} (expected 0 or 1)")));
    }
    let (n0, n1) = (rho.dims[0], rho.dims[1]);
    let data = if keep == 0 {
        Mat::from_fn(n0, n0, |i, j| (0..n1).map(|k| rho.data[(i * n1 + k, j * n1 + k)]).sum())
    } else {
        Mat::from_fn(n1, n1, |i, j| (0..n0).map(|k| rho.data[(k * n1 + i, k * n1 + j)]).sum())
    };
    DensityMatrix::new_unchecked(vec![rho.dims[keep]], data, vec![rho.displacement[keep]])
}
