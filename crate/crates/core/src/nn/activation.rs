use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// `output` is the cached forward result; the gradient flows where it is positive.
pub fn relu_backward(upstream: &Tensor, output: &Tensor) -> Result<Tensor> {
    if upstream.shape() != output.shape() {
        return Err(Error::ShapeMismatch {
            op: "relu_backward",
            left: upstream.shape().to_vec(),
            right: output.shape().to_vec(),
        });
    }
    Tensor::new(
        upstream.shape().to_vec(),
        upstream
            .data()
            .iter()
            .zip(output.data())
            .map(|(&g, &o)| if o > 0.0 { g } else { 0.0 })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_negatives() {
        let x = Tensor::from_vec(vec![-1.0, 0.0, 2.0]).unwrap();
        let y = relu_forward(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&Tensor::from_vec(vec![5.0, 5.0, 5.0]).unwrap(), &y).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 5.0]);
    }
}
