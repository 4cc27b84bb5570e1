/// Dense row-major 3-tensor, used for kernel and eigenfunction gradients
/// indexed as `(point, basis element, coordinate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n0: usize, n1: usize, n2: usize) -> Self {
        Self {
            shape: [n0, n1, n2],
            data: vec![0.0; n0 * n1 * n2],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.shape[0] && j < self.shape[1] && k < self.shape[2]);
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// The length-`n2` fiber at `(i, j)`.
    pub fn fiber(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j, 0);
        &self.data[o..o + self.shape[2]]
    }

    pub fn fiber_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j, 0);
        let n = self.shape[2];
        &mut self.data[o..o + n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}
