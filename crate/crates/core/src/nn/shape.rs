use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Either an image-like `(height, width, channels)` shape or a flat feature
/// count.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorShape {
    dims: Vec<usize>,
}

impl TensorShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if !(dims.len() == 1 || dims.len() == 3) || dims.contains(&0) {
            return Err(Error::Shape(format!(
                "shape must be flat (n) or spatial (h, w, c) with positive dims, got {dims:?}"
            )));
        }
        Ok(TensorShape { dims })
    }

    pub fn flat(n: usize) -> Self {
        assert!(n > 0, "flat shape needs at least one feature");
        TensorShape { dims: vec![n] }
    }

    pub fn spatial(height: usize, width: usize, channels: usize) -> Self {
        assert!(height > 0 && width > 0 && channels > 0);
        TensorShape {
            dims: vec![height, width, channels],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn is_spatial(&self) -> bool {
        self.dims.len() == 3
    }

    /// `(h, w, c)` for spatial shapes.
    pub fn hwc(&self) -> Option<(usize, usize, usize)> {
        match self.dims[..] {
            [h, w, c] => Some((h, w, c)),
            _ => None,
        }
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn flattened(&self) -> TensorShape {
        TensorShape::flat(self.size())
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}
