use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named tensor inside a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered, gap-free partition of a flat vector into named blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    blocks: Vec<ParamBlock>,
    len: usize,
}

impl Layout {
    pub fn new() -> Self {
        Layout::default()
    }

    /// Appends a block and returns its offset.
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>) -> usize {
        let offset = self.len;
        let block = ParamBlock {
            name: name.into(),
            shape,
            offset,
        };
        self.len += block.len();
        self.blocks.push(block);
        offset
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Checks that offsets tile `[0, len)` exactly.
    pub fn validate(&self) -> Result<()> {
        let mut expected = 0;
        for b in &self.blocks {
            if b.offset != expected {
                return Err(Error::Shape(format!(
                    "block `{}` starts at {} instead of {expected}",
                    b.name, b.offset
                )));
            }
            expected += b.len();
        }
        if expected != self.len {
            return Err(Error::Shape(format!(
                "layout length {} but blocks cover {expected}",
                self.len
            )));
        }
        Ok(())
    }
}

/// Flat parameter storage with a shared layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Arc<Layout>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        ParamVector {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn from_values(layout: Arc<Layout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Shape(format!(
                "{} values for a layout of {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(ParamVector { values, layout })
    }

    /// Glorot-uniform weights for every block whose name does not end in `bias`;
    /// biases start at zero. Block shapes are read as `[fan_out, fan_in]`.
    pub fn glorot<R: Rng>(layout: Arc<Layout>, rng: &mut R) -> Self {
        let mut p = ParamVector::zeros(layout.clone());
        for b in layout.blocks() {
            if b.name.ends_with("bias") || b.is_empty() {
                continue;
            }
            let fan_sum: usize = match b.shape.as_slice() {
                [a, c] => a + c,
                [a] => a + 1,
                other => other.iter().sum(),
            };
            let a = (6.0 / fan_sum as f64).sqrt();
            for v in &mut p.values[b.range()] {
                *v = rng.random_range(-a..a);
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.layout.block(name).map(|b| &self.values[b.range()])
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.layout.block(name)?.range();
        Some(&mut self.values[range])
    }

    pub fn same_layout(&self, other: &ParamVector) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout
    }

    fn check_layout(&self, other: &ParamVector) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::Shape("parameter layouts differ".into()))
        }
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.check_layout(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &ParamVector) -> Result<()> {
        self.check_layout(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// One plain gradient-descent step, `params - lr * grad`, leaving both inputs untouched.
pub fn sgd_step(params: &ParamVector, grad: &ParamVector, lr: f64) -> Result<ParamVector> {
    let mut out = params.clone();
    out.axpy(-lr, grad)?;
    Ok(out)
}

/// Gradient stored as contiguous segments of a flat parameter vector.
///
/// Segments may overlap (e.g. the same embedding row reached twice); every
/// operation treats them additively.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseGrad {
    segments: Vec<(usize, usize, usize)>,
    data: Vec<f64>,
}

impl SparseGrad {
    pub fn new() -> Self {
        SparseGrad::default()
    }

    pub fn push(&mut self, offset: usize, values: &[f64]) {
        self.segments.push((offset, self.data.len(), values.len()));
        self.data.extend_from_slice(values);
    }

    /// Appends a zeroed segment and returns it for in-place accumulation.
    pub fn push_zeros(&mut self, offset: usize, len: usize) -> &mut [f64] {
        let start = self.data.len();
        self.segments.push((offset, start, len));
        self.data.resize(start + len, 0.0);
        &mut self.data[start..]
    }

    pub fn segments(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.segments
            .iter()
            .map(move |&(offset, start, len)| (offset, &self.data[start..start + len]))
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.segments()
            .map(|(offset, seg)| {
                seg.iter()
                    .zip(&dense[offset..offset + seg.len()])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .sum()
    }

    /// `dense += scale * self`.
    pub fn add_to(&self, scale: f64, dense: &mut [f64]) {
        for (offset, seg) in self.segments() {
            for (d, g) in dense[offset..offset + seg.len()].iter_mut().zip(seg) {
                *d += scale * g;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn to_dense(&self, layout: Arc<Layout>) -> ParamVector {
        let mut p = ParamVector::zeros(layout);
        self.add_to(1.0, &mut p.values);
        p
    }
}
