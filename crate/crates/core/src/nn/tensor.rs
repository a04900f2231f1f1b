use crate::concolic::ConcolicValue;
use crate::error::ExecError;

/// Row-major tensor of concolic values, last axis fastest.
#[derive(Debug, Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<ConcolicValue>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<ConcolicValue>) -> Result<Self, ExecError> {
        let expected: usize = shape.iter().product();
        if shape.contains(&0) || expected != data.len() {
            return Err(ExecError::shape(format!(
                "shape {shape:?} does not hold {} elements",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_values(shape: Vec<usize>, values: &[f64]) -> Result<Self, ExecError> {
        Tensor::new(
            shape,
            values.iter().map(|&v| ConcolicValue::constant(v)).collect(),
        )
    }

    pub fn vector(values: &[f64]) -> Self {
        Tensor {
            shape: vec![values.len()],
            data: values.iter().map(|&v| ConcolicValue::constant(v)).collect(),
        }
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

    pub fn data(&self) -> &[ConcolicValue] {
        &self.data
    }

    pub fn into_data(self) -> Vec<ConcolicValue> {
        self.data
    }

    pub fn values(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.val).collect()
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self, ExecError> {
        Tensor::new(shape, self.data)
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn at(&self, index: &[usize]) -> &ConcolicValue {
        &self.data[self.offset(index)]
    }

    pub fn expect_rank(&self, rank: usize, what: &str) -> Result<(), ExecError> {
        if self.rank() != rank {
            return Err(ExecError::shape(format!(
                "{what} expects a rank-{rank} input, got shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_offsets() {
        let t = Tensor::from_values(vec![2, 3, 4], &(0..24).map(f64::from).collect::<Vec<_>>())
            .unwrap();
        assert_eq!(t.offset(&[0, 0, 1]), 1);
        assert_eq!(t.offset(&[0, 1, 0]), 4);
        assert_eq!(t.offset(&[1, 2, 3]), 23);
        assert_eq!(t.at(&[1, 0, 2]).val, 14.0);
    }

    #[test]
    fn rejects_mismatched_length() {
        assert!(Tensor::from_values(vec![2, 2], &[1.0, 2.0, 3.0]).is_err());
        assert!(Tensor::from_values(vec![0], &[]).is_err());
    }
}
