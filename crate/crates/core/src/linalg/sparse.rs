use nalgebra::DMatrix;

/// Symmetric sparse matrix in compressed-row form. Both triangles are stored,
/// columns are sorted within each row and every diagonal entry is present.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl SparseSym {
    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            rows[i].push((j, v));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.push((i, 0.0));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut m = Self {
            n,
            row_ptr,
            cols,
            vals,
            symmetric: false,
        };
        m.symmetric = m.check_symmetric(1e-13);
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        let n = a.nrows();
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = a[(i, j)];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .map(|i| {
                let (c, _) = self.row(i);
                c.iter().map(|&j| j.abs_diff(i)).max().unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    /// Structural symmetry plus value symmetry within `tol` (relative).
    pub fn check_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).all(|(&j, &a)| {
                let (cj, vj) = self.row(j);
                match cj.binary_search(&i) {
                    Ok(k) => (a - vj[k]).abs() <= tol * a.abs().max(vj[k].abs()),
                    Err(_) => false,
                }
            })
        })
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `yᵀ A x`
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let (c, v) = self.row(i);
                y[i] * c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum::<f64>()
            })
            .sum()
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// `A * R` for a dense column block `R`.
    pub fn mul_dense(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(r.nrows(), self.n);
        let mut out = DMatrix::zeros(self.n, r.ncols());
        for k in 0..r.ncols() {
            let col = r.column(k);
            let x = col.as_slice();
            let mut oc = out.column_mut(k);
            for i in 0..self.n {
                let (c, v) = self.row(i);
                oc[i] = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
            }
        }
        out
    }

    /// Principal submatrix on the given index list (result ordered as `idx`).
    pub fn submatrix(&self, idx: &[usize]) -> SparseSym {
        let mut local = vec![usize::MAX; self.n];
        for (k, &g) in idx.iter().enumerate() {
            local[g] = k;
        }
        let mut t = Vec::new();
        for (k, &g) in idx.iter().enumerate() {
            let (c, v) = self.row(g);
            for (&j, &a) in c.iter().zip(v) {
                let lj = local[j];
                if lj != usize::MAX {
                    t.push((k, lj, a));
                }
            }
        }
        SparseSym::from_triplets(idx.len(), t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                d[(i, j)] = a;
            }
        }
        d
    }

    pub fn scaled(&self, s: f64) -> SparseSym {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `self + s * other`, assuming both share the dimension.
    pub fn add_scaled(&self, s: f64, other: &SparseSym) -> SparseSym {
        assert_eq!(self.n, other.n);
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            let (c, v) = self.row(i);
            t.extend(c.iter().zip(v).map(|(&j, &a)| (i, j, a)));
            let (c, v) = other.row(i);
            t.extend(c.iter().zip(v).map(|(&j, &a)| (i, j, s * a)));
        }
        SparseSym::from_triplets(self.n, t)
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        self.diagonal().iter().fold(0.0_f64, |m, d| m.max(d.abs()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
