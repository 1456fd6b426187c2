//! Dense rank-4 tensor in `(depth, height, width, channel)` order.

/// Shape of a [`Tensor`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub d: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape {
    pub fn new(d: usize, h: usize, w: usize, c: usize) -> Self {
        Self { d, h, w, c }
    }

    pub fn len(&self) -> usize {
        self.d * self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.d, self.h, self.w, self.c)
    }
}

/// Row-major values with channels contiguous, then width, height, depth.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Shape,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            data: vec![0.0; shape.len()],
            shape,
        }
    }

    pub fn from_data(shape: Shape, data: Vec<f64>) -> Self {
        assert_eq!(shape.len(), data.len());
        Self { shape, data }
    }

    #[inline]
    pub fn idx(&self, d: usize, i: usize, j: usize, c: usize) -> usize {
        debug_assert!(
            d < self.shape.d && i < self.shape.h && j < self.shape.w && c < self.shape.c
        );
        ((d * self.shape.h + i) * self.shape.w + j) * self.shape.c + c
    }

    #[inline]
    pub fn at(&self, d: usize, i: usize, j: usize, c: usize) -> f64 {
        self.data[self.idx(d, i, j, c)]
    }

    #[inline]
    pub fn at_mut(&mut self, d: usize, i: usize, j: usize, c: usize) -> &mut f64 {
        let idx = self.idx(d, i, j, c);
        &mut self.data[idx]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
