//! Dense row-major tensors.
//!
//! `Real` is `f64` unless the crate is built with the `f32` feature. Gradient
//! checks assume the default double-precision build.

use std::fmt;

use crate::error::{Error, Result};

#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

/// Rounds a value to the nearest single-precision number. Parameters are kept
/// on the f32 grid so that model files (which store f32) round-trip bitwise.
#[inline]
pub fn to_storage(x: Real) -> Real {
    x as f32 as Real
}

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<Real>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<Real>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&e| e == 0) {
            return Err(Error::InvalidShape(shape));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::InvalidShape(shape));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: Real) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape.to_vec(), vec![value; len])
    }

    pub fn from_vec(data: Vec<Real>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Self::zeros(&[n, n])?;
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        Ok(t)
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> Real) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape.to_vec(), (0..len).map(&mut f).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Real> {
        self.data
    }

    fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() || index.iter().zip(&self.shape).any(|(i, e)| i >= e) {
            return Err(Error::invalid(format!(
                "index {index:?} out of bounds for shape {:?}",
                self.shape
            )));
        }
        Ok(index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &e)| acc * e + i))
    }

    pub fn get(&self, index: &[usize]) -> Result<Real> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: Real) -> Result<()> {
        let at = self.offset(index)?;
        self.data[at] = value;
        Ok(())
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(Real) -> Real) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn elementwise(op: Elementwise, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.shape != b.shape {
            return Err(Error::ShapeMismatch {
                op: "elementwise",
                left: a.shape.clone(),
                right: b.shape.clone(),
            });
        }
        let f = match op {
            Elementwise::Add => |x: Real, y: Real| x + y,
            Elementwise::Sub => |x: Real, y: Real| x - y,
            Elementwise::Mul => |x: Real, y: Real| x * y,
        };
        Ok(Tensor {
            shape: a.shape.clone(),
            data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        Self::elementwise(Elementwise::Add, self, other)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        Self::elementwise(Elementwise::Sub, self, other)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        Self::elementwise(Elementwise::Mul, self, other)
    }

    /// In-place `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Tensor, scale: Real) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op: "add_scaled",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += scale * y;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: Real) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn sum(&self) -> Real {
        self.data.iter().sum()
    }

    /// `W[m×n] · x[n]`.
    pub fn matvec(&self, x: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || x.rank() != 1 || self.shape[1] != x.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                left: self.shape.clone(),
                right: x.shape.clone(),
            });
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let data = (0..m)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(&x.data)
                    .map(|(w, v)| w * v)
                    .sum()
            })
            .collect();
        Ok(Tensor {
            shape: vec![m],
            data,
        })
    }

    /// `W[m×n]ᵀ · y[m]`.
    pub fn matvec_transposed(&self, y: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || y.rank() != 1 || self.shape[0] != y.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matvec_transposed",
                left: self.shape.clone(),
                right: y.shape.clone(),
            });
        }
        let n = self.shape[1];
        let mut out = vec![0.0; n];
        for (row, &g) in self.data.chunks_exact(n).zip(&y.data) {
            if g == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += w * g;
            }
        }
        Ok(Tensor {
            shape: vec![n],
            data: out,
        })
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<Real> {
        let d = self.sub(other)?;
        Ok(d.data.iter().fold(0.0, |m: Real, v| m.max(v.abs())))
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(v: &[Real]) -> Tensor {
        Tensor::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn pointwise_ops() {
        assert_eq!(t(&[1., 2.]).add(&t(&[3., 4.])).unwrap().data(), &[4., 6.]);
        assert_eq!(t(&[2., 3.]).mul(&t(&[4., 5.])).unwrap().data(), &[8., 15.]);
        let x = t(&[0.3, -1.7, 9.0]);
        assert!(x.sub(&x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatch_reports_both_shapes() {
        let err = t(&[1., 2.]).add(&t(&[1., 2., 3.])).unwrap_err();
        match err {
            Error::ShapeMismatch { left, right, .. } => {
                assert_eq!(left, vec![2]);
                assert_eq!(right, vec![3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matvec_cases() {
        let x = t(&[1., 2., 3.]);
        assert_eq!(Tensor::identity(3).unwrap().matvec(&x).unwrap().data(), &[1., 2., 3.]);
        let z = Tensor::zeros(&[2, 3]).unwrap();
        assert_eq!(z.matvec(&t(&[1., 1., 1.])).unwrap().data(), &[0., 0.]);
        let w = Tensor::new(vec![2, 2], vec![1., 2., 3., 4.]).unwrap();
        assert_eq!(w.matvec(&t(&[1., 1.])).unwrap().data(), &[3., 7.]);
        assert!(w.matvec(&x).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::new(vec![], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn matvec_is_linear(
            m in 1usize..6, n in 1usize..6,
            seed in proptest::collection::vec(-10.0f64..10.0, 6 * 6 + 12),
        ) {
            let w = Tensor::new(vec![m, n], seed[..m * n].iter().map(|&v| v as Real).collect()).unwrap();
            let x = t(&seed[36..36 + n].iter().map(|&v| v as Real).collect::<Vec<_>>());
            let y = t(&seed[42..42 + n].iter().map(|&v| v as Real).collect::<Vec<_>>());
            let lhs = w.matvec(&x.add(&y).unwrap()).unwrap();
            let rhs = w.matvec(&x).unwrap().add(&w.matvec(&y).unwrap()).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12);
        }

        #[test]
        fn set_then_get(dims in proptest::collection::vec(1usize..5, 1..4), v in -1e6f64..1e6) {
            let mut x = Tensor::zeros(&dims).unwrap();
            let total: usize = dims.iter().product();
            for flat in 0..total {
                let mut idx = vec![0; dims.len()];
                let mut rem = flat;
                for (slot, &e) in idx.iter_mut().zip(&dims).rev() {
                    *slot = rem % e;
                    rem /= e;
                }
                x.set(&idx, v as Real + flat as Real).unwrap();
                prop_assert_eq!(x.get(&idx).unwrap(), v as Real + flat as Real);
                prop_assert_eq!(x.data()[flat], v as Real + flat as Real);
            }
        }
    }
}
