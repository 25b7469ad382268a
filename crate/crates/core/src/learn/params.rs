//! Flat parameter storage with named matrix blocks.

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layout {
    pub blocks: Vec<Block>,
}

impl Layout {
    /// Biases are stored as 1×n blocks.
    pub fn push(&mut self, name: &'static str, rows: usize, cols: usize) -> usize {
        let offset = self.len();
        self.blocks.push(Block { name, rows, cols, offset });
        self.blocks.len() - 1
    }

    pub fn len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mat<'a>(&self, params: &'a [f64], k: usize) -> ArrayView2<'a, f64> {
        let b = &self.blocks[k];
        ArrayView2::from_shape((b.rows, b.cols), &params[b.range()]).expect("layout matches storage")
    }

    pub fn vec<'a>(&self, params: &'a [f64], k: usize) -> ArrayView1<'a, f64> {
        ArrayView1::from(&params[self.blocks[k].range()])
    }

    pub fn mat_mut<'a>(&self, params: &'a mut [f64], k: usize) -> ArrayViewMut2<'a, f64> {
        let b = &self.blocks[k];
        ArrayViewMut2::from_shape((b.rows, b.cols), &mut params[b.range()]).expect("layout matches storage")
    }

    /// Fills block `k` uniformly in `[-bound, bound]`.
    pub fn init_uniform(&self, params: &mut [f64], k: usize, bound: f64, rng: &mut ChaCha8Rng) {
        for v in &mut params[self.blocks[k].range()] {
            *v = rng.random_range(-bound..=bound);
        }
    }
}
