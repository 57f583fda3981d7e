/// Sparse matrix in coordinate form. Repeated entries are summed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Append a row and return its index.
    pub fn push_row(&mut self, coeffs: &[(usize, f64)]) -> usize {
        let r = self.nrows;
        self.nrows += 1;
        for &(j, v) in coeffs {
            self.push(r, j, v);
        }
        r
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols];
        for &(i, j, v) in &self.entries {
            x[j] += v * y[i];
        }
        x
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }

    /// Entries consolidated and sorted by (row, col).
    pub fn compressed(&self) -> Vec<(usize, usize, f64)> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(e.len());
        for (i, j, v) in e {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for &(i, j, v) in &self.entries {
            d[i][j] += v;
        }
        d
    }

    pub fn row_abs_max(&self) -> Vec<f64> {
        let mut m = vec![0.0f64; self.nrows];
        for (i, _, v) in self.compressed() {
            m[i] = m[i].max(v.abs());
        }
        m
    }
}
