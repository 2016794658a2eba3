use std::ops::{Add, Mul, Sub};

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::{describe_space, product_dim, Dim};
use crate::error::{Error, Result};

/// Dense square operator on a (possibly multi-mode) truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    space: Vec<Dim>,
    data: Array2<C64>,
}

impl OperatorMatrix {
    /// Wraps `data`, checking it is square, matches `space` and is finite.
    pub fn from_array(space: Vec<Dim>, data: Array2<C64>) -> Result<Self> {
        let n = product_dim(&space);
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n} for space {}", describe_space(&space)),
                found: format!("{}x{}", data.nrows(), data.ncols()),
            });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("operator", "entries must be finite"));
        }
        Ok(OperatorMatrix { space, data })
    }

    pub(crate) fn from_parts(space: Vec<Dim>, data: Array2<C64>) -> Self {
        debug_assert_eq!(data.nrows(), product_dim(&space));
        debug_assert_eq!(data.ncols(), product_dim(&space));
        OperatorMatrix { space, data }
    }

    pub fn identity(space: &[Dim]) -> Self {
        let n = product_dim(space);
        Self::from_parts(space.to_vec(), Array2::eye(n))
    }

    pub fn zeros(space: &[Dim]) -> Self {
        let n = product_dim(space);
        Self::from_parts(space.to_vec(), Array2::zeros((n, n)))
    }

    pub fn from_diagonal(space: &[Dim], diag: impl IntoIterator<Item = C64>) -> Self {
        let mut op = Self::zeros(space);
        let n = op.size();
        let mut count = 0;
        for (i, z) in diag.into_iter().enumerate().take(n) {
            op.data[[i, i]] = z;
            count += 1;
        }
        debug_assert_eq!(count, n, "diagonal length must match the space");
        op
    }

    pub fn space(&self) -> &[Dim] {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<C64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[[row, col]]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts(self.space.clone(), self.data.t().mapv(|z| z.conj()))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self::from_parts(self.space.clone(), &self.data * factor)
    }

    /// Matrix product. Panics if the two operators live on different spaces.
    pub fn dot(&self, rhs: &Self) -> Self {
        self.assert_same_space(rhs);
        Self::from_parts(self.space.clone(), self.data.dot(&rhs.data))
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.dot(rhs) - &rhs.dot(self)
    }

    /// Kronecker product `self ⊗ rhs`; `self` becomes the slower index.
    pub fn kron(&self, rhs: &Self) -> Self {
        let mut space = self.space.clone();
        space.extend_from_slice(&rhs.space);
        Self::from_parts(space, kron_array(&self.data, &rhs.data))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest entry magnitude restricted to rows and columns in `indices`.
    pub fn max_abs_on(&self, indices: &[usize]) -> f64 {
        let mut worst: f64 = 0.0;
        for &r in indices {
            for &c in indices {
                worst = worst.max(self.data[[r, c]].norm());
            }
        }
        worst
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.size();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.data[[r, c]] - self.data[[c, r]].conj()).norm());
            }
        }
        worst
    }

    /// `‖U†U − I‖_max`, over the whole space or only over `indices`.
    pub fn unitarity_residual(&self, indices: Option<&[usize]>) -> f64 {
        let gram = self.adjoint().dot(self);
        let defect = &gram - &Self::identity(&self.space);
        match indices {
            Some(idx) => defect.max_abs_on(idx),
            None => defect.max_abs(),
        }
    }

    pub(crate) fn assert_same_space(&self, rhs: &Self) {
        assert_eq!(
            self.space,
            rhs.space,
            "operator spaces differ: {} vs {}",
            describe_space(&self.space),
            describe_space(&rhs.space)
        );
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.assert_same_space(rhs);
        OperatorMatrix::from_parts(self.space.clone(), &self.data + &rhs.data)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.assert_same_space(rhs);
        OperatorMatrix::from_parts(self.space.clone(), &self.data - &rhs.data)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.dot(rhs)
    }
}

pub(crate) fn kron_array(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = s * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Lowering operator: `a|n⟩ = √n |n−1⟩`.
pub fn annihilation(dim: Dim) -> OperatorMatrix {
    let n = dim.get();
    let mut data = Array2::zeros((n, n));
    for level in 1..n {
        data[[level - 1, level]] = C64::new((level as f64).sqrt(), 0.0);
    }
    OperatorMatrix::from_parts(vec![dim], data)
}

pub fn creation(dim: Dim) -> OperatorMatrix {
    annihilation(dim).adjoint()
}

/// `a†a = diag(0, 1, …, dim−1)`.
pub fn number_operator(dim: Dim) -> OperatorMatrix {
    OperatorMatrix::from_diagonal(&[dim], (0..dim.get()).map(|n| C64::new(n as f64, 0.0)))
}

pub fn identity(dim: Dim) -> OperatorMatrix {
    OperatorMatrix::identity(&[dim])
}

/// Places a single-mode operator into `slot` of a product space:
/// `I ⊗ … ⊗ op ⊗ … ⊗ I`, slot 0 slowest-varying.
pub fn embed(op: &OperatorMatrix, space: &[Dim], slot: usize) -> Result<OperatorMatrix> {
    let target = space.get(slot).ok_or_else(|| Error::DimensionMismatch {
        expected: format!("slot < {}", space.len()),
        found: format!("slot {slot}"),
    })?;
    if op.space() != [*target] {
        return Err(Error::DimensionMismatch {
            expected: format!("single-mode operator of dim {target}"),
            found: describe_space(op.space()),
        });
    }
    let left = product_dim(&space[..slot]);
    let right = product_dim(&space[slot + 1..]);
    let mut data = op.as_array().clone();
    if right > 1 {
        data = kron_array(&data, &Array2::eye(right));
    }
    if left > 1 {
        data = kron_array(&Array2::eye(left), &data);
    }
    Ok(OperatorMatrix::from_parts(space.to_vec(), data))
}
