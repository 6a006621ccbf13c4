//! Order-3 dense tensor storage and the multilinear primitives shared by
//! every solver: unfolding/folding, Khatri-Rao products, CP reconstruction
//! and loss/RMSE evaluation.
//!
//! Memory layout is canonical throughout the crate: the first (mode-1)
//! index varies fastest, i.e. entry `(i, j, k)` lives at `i + I*(j + J*k)`.
//! Unfoldings follow the Kolda-Bader convention, which makes the identity
//! `unfold(X, 1) == A * khatri_rao(C, B)^T` hold exactly for a CP model
//! with factors `A`, `B`, `C`.

pub mod io;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Dense real matrix used for unfoldings, factors and Khatri-Rao results.
pub type Matrix = Array2<f64>;

/// Dense order-3 tensor with dimensions `(I, J, K)`.
///
/// Entries are stored mode-1 fastest; construction rejects non-finite
/// values so solvers can assume finite data.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl DenseTensor3 {
    /// Build a tensor from dimensions and a value buffer in canonical layout.
    pub fn new(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        let (i, j, k) = dims;
        if i == 0 || j == 0 || k == 0 {
            return Err(Error::InvalidDimensions(format!(
                "dims must be positive, got ({i}, {j}, {k})"
            )));
        }
        let expected = i * j * k;
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} values for dims ({i}, {j}, {k}), got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: pos,
                value: values[pos],
            });
        }
        Ok(Self { dims, values })
    }

    /// All-zero tensor of the given dimensions.
    pub fn zeros(dims: (usize, usize, usize)) -> Result<Self> {
        let (i, j, k) = dims;
        if i == 0 || j == 0 || k == 0 {
            return Err(Error::InvalidDimensions(format!(
                "dims must be positive, got ({i}, {j}, {k})"
            )));
        }
        Ok(Self {
            dims,
            values: vec![0.0; i * j * k],
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    /// Total number of entries `I*J*K`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Flat offset of entry `(i, j, k)` in the canonical layout.
    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (di, dj, _) = self.dims;
        debug_assert!(i < di && j < dj && k < self.dims.2);
        i + di * (j + dj * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.offset(i, j, k)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable canonical-layout buffer; callers keep entries finite.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Consume the tensor, returning the canonical-layout buffer.
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Sum of squared entries (squared Frobenius norm).
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// CP factor matrices `A (I x R)`, `B (J x R)`, `C (K x R)` together with
/// the per-factor velocity state used by momentum solvers.
///
/// Velocities are zero-initialized and stay zero for solvers that do not
/// use momentum.
#[derive(Debug, Clone)]
pub struct FactorModel {
    pub rank: usize,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub vel_a: Matrix,
    pub vel_b: Matrix,
    pub vel_c: Matrix,
}

impl FactorModel {
    /// Build a model from factor matrices, validating shape consistency.
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let rank = a.ncols();
        if rank == 0 {
            return Err(Error::InvalidDimensions("rank must be positive".into()));
        }
        if b.ncols() != rank || c.ncols() != rank {
            return Err(Error::DimensionMismatch(format!(
                "factor column counts differ: {} / {} / {}",
                a.ncols(),
                b.ncols(),
                c.ncols()
            )));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c)] {
            if let Some(v) = m.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "factor {name} contains non-finite entry {v}"
                )));
            }
        }
        let vel_a = Matrix::zeros(a.raw_dim());
        let vel_b = Matrix::zeros(b.raw_dim());
        let vel_c = Matrix::zeros(c.raw_dim());
        Ok(Self {
            rank,
            a,
            b,
            c,
            vel_a,
            vel_b,
            vel_c,
        })
    }

    /// Zero factors of the given shapes.
    pub fn zeros(dims: (usize, usize, usize), rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidDimensions("rank must be positive".into()));
        }
        Self::new(
            Matrix::zeros((dims.0, rank)),
            Matrix::zeros((dims.1, rank)),
            Matrix::zeros((dims.2, rank)),
        )
    }

    /// Mode dimensions `(I, J, K)` implied by the factor row counts.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.b.nrows(), self.c.nrows())
    }

    /// True when every factor and velocity entry is finite.
    pub fn is_finite(&self) -> bool {
        [
            &self.a, &self.b, &self.c, &self.vel_a, &self.vel_b, &self.vel_c,
        ]
        .iter()
        .all(|m| m.iter().all(|v| v.is_finite()))
    }

    fn check_dims(&self, t: &DenseTensor3) -> Result<()> {
        if self.dims() != t.dims() {
            return Err(Error::DimensionMismatch(format!(
                "factor dims {:?} do not match tensor dims {:?}",
                self.dims(),
                t.dims()
            )));
        }
        Ok(())
    }
}

/// Mode-n matricization of `t`.
///
/// Shapes are `I x JK`, `J x IK`, `K x IJ` for modes 1..3; the earlier
/// remaining mode's index varies fastest along columns, so for mode 1 the
/// column of entry `(i, j, k)` is `j + J*k`, for mode 2 it is `i + I*k`,
/// and for mode 3 it is `i + I*j`.
pub fn unfold(t: &DenseTensor3, mode: usize) -> Result<Matrix> {
    let (i_dim, j_dim, k_dim) = t.dims();
    let (rows, cols) = match mode {
        1 => (i_dim, j_dim * k_dim),
        2 => (j_dim, i_dim * k_dim),
        3 => (k_dim, i_dim * j_dim),
        m => return Err(Error::InvalidMode(m)),
    };
    let mut out = Matrix::zeros((rows, cols));
    for k in 0..k_dim {
        for j in 0..j_dim {
            for i in 0..i_dim {
                let v = t.get(i, j, k);
                match mode {
                    1 => out[[i, j + j_dim * k]] = v,
                    2 => out[[j, i + i_dim * k]] = v,
                    _ => out[[k, i + i_dim * j]] = v,
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`unfold`]: rebuild the tensor with dimensions `dims` from
/// its mode-n matricization.
pub fn fold(m: &Matrix, mode: usize, dims: (usize, usize, usize)) -> Result<DenseTensor3> {
    let (i_dim, j_dim, k_dim) = dims;
    let (rows, cols) = match mode {
        1 => (i_dim, j_dim * k_dim),
        2 => (j_dim, i_dim * k_dim),
        3 => (k_dim, i_dim * j_dim),
        m => return Err(Error::InvalidMode(m)),
    };
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::DimensionMismatch(format!(
            "mode-{mode} unfolding of dims {dims:?} must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut t = DenseTensor3::zeros(dims)?;
    for k in 0..k_dim {
        for j in 0..j_dim {
            for i in 0..i_dim {
                let v = match mode {
                    1 => m[[i, j + j_dim * k]],
                    2 => m[[j, i + i_dim * k]],
                    _ => m[[k, i + i_dim * j]],
                };
                let off = t.offset(i, j, k);
                t.values[off] = v;
            }
        }
    }
    Ok(t)
}

/// Column-wise Kronecker (Khatri-Rao) product.
///
/// For `m1 (p x R)` and `m2 (q x R)` the result is `pq x R` with
/// `out[u*q + v, r] = m1[u, r] * m2[v, r]`.
pub fn khatri_rao(m1: &Matrix, m2: &Matrix) -> Result<Matrix> {
    if m1.ncols() != m2.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "khatri_rao column mismatch: {} vs {}",
            m1.ncols(),
            m2.ncols()
        )));
    }
    let (p, q, r) = (m1.nrows(), m2.nrows(), m1.ncols());
    let mut out = Matrix::zeros((p * q, r));
    for u in 0..p {
        for v in 0..q {
            let row = u * q + v;
            for c in 0..r {
                out[[row, c]] = m1[[u, c]] * m2[[v, c]];
            }
        }
    }
    Ok(out)
}

/// Dense CP reconstruction: entry `(i, j, k)` is `sum_r A[i,r]*B[j,r]*C[k,r]`.
pub fn reconstruct(f: &FactorModel) -> DenseTensor3 {
    let (i_dim, j_dim, k_dim) = f.dims();
    let mut values = vec![0.0; i_dim * j_dim * k_dim];
    for r in 0..f.rank {
        for k in 0..k_dim {
            let ck = f.c[[k, r]];
            if ck == 0.0 {
                continue;
            }
            for j in 0..j_dim {
                let bjck = f.b[[j, r]] * ck;
                let base = i_dim * (j + j_dim * k);
                for i in 0..i_dim {
                    values[base + i] += f.a[[i, r]] * bjck;
                }
            }
        }
    }
    DenseTensor3 {
        dims: (i_dim, j_dim, k_dim),
        values,
    }
}

/// Squared Frobenius norm of the residual `X - reconstruct(f)`.
pub fn loss(t: &DenseTensor3, f: &FactorModel) -> Result<f64> {
    f.check_dims(t)?;
    let (i_dim, j_dim, k_dim) = t.dims();
    let mut acc = 0.0;
    for k in 0..k_dim {
        acc += slice_loss(t, f, k, i_dim, j_dim);
    }
    Ok(acc)
}

/// Residual contribution of the mode-3 slice at index `k`.
///
/// Exposed within the crate so solvers can evaluate the loss slice by
/// slice in parallel and still sum partials in a fixed order.
pub(crate) fn slice_loss(
    t: &DenseTensor3,
    f: &FactorModel,
    k: usize,
    i_dim: usize,
    j_dim: usize,
) -> f64 {
    let mut acc = 0.0;
    for j in 0..j_dim {
        let base = i_dim * (j + j_dim * k);
        for i in 0..i_dim {
            let mut est = 0.0;
            for r in 0..f.rank {
                est += f.a[[i, r]] * f.b[[j, r]] * f.c[[k, r]];
            }
            let d = t.values[base + i] - est;
            acc += d * d;
        }
    }
    acc
}

/// Root mean square error: `sqrt(loss / (I*J*K))`.
pub fn rmse(t: &DenseTensor3, f: &FactorModel) -> Result<f64> {
    let l = loss(t, f)?;
    Ok((l / t.len() as f64).sqrt())
}
