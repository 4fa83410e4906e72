//! Row-major sparse matrices sized for superpoint graphs (|V| in the
//! hundreds). Rows keep their entries sorted by column id so lookups are
//! binary searches and products stay deterministic.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMat {
    pub fn zeros(n: usize) -> Self {
        SparseMat {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    /// Builds from per-row (col, value) lists; entries are sorted and
    /// duplicate columns rejected.
    pub fn from_rows(n: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::Dimension(format!(
                "expected {n} rows, got {}",
                rows.len()
            )));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Validation(format!(
                        "duplicate column {} in row {i}",
                        w[0].0
                    )));
                }
            }
            if let Some(&(c, _)) = row.last() {
                if c >= n {
                    return Err(Error::Dimension(format!(
                        "column {c} out of range in row {i}"
                    )));
                }
            }
        }
        Ok(SparseMat { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, v)| v).sum()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Row-normalizes each row to sum 1; all-zero rows stay zero.
    pub fn row_normalized(&self) -> SparseMat {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let s: f64 = row.iter().map(|&(_, v)| v).sum();
                if s > 0.0 {
                    row.iter().map(|&(c, v)| (c, v / s)).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        SparseMat { n: self.n, rows }
    }

    pub fn matmul(&self, other: &SparseMat) -> Result<SparseMat> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "matmul size mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        let mut rows = Vec::with_capacity(self.n);
        let mut acc: Vec<f64> = vec![0.0; self.n];
        let mut touched: Vec<usize> = Vec::new();
        for row in &self.rows {
            for &(k, v) in row {
                for &(j, w) in &other.rows[k] {
                    if acc[j] == 0.0 {
                        touched.push(j);
                    }
                    acc[j] += v * w;
                }
            }
            touched.sort_unstable();
            let out: Vec<(usize, f64)> = touched
                .iter()
                .map(|&j| {
                    let v = acc[j];
                    acc[j] = 0.0;
                    (j, v)
                })
                .filter(|&(_, v)| v != 0.0)
                .collect();
            touched.clear();
            rows.push(out);
        }
        Ok(SparseMat { n: self.n, rows })
    }

    /// t-th matrix power by repeated products (t >= 1).
    pub fn pow(&self, t: usize) -> Result<SparseMat> {
        if t == 0 {
            return Err(Error::Domain("matrix power requires t >= 1".into()));
        }
        let mut out = self.clone();
        for _ in 1..t {
            out = out.matmul(self)?;
        }
        Ok(out)
    }

    /// Coordinate-format text dump, one `i j value` line per entry.
    pub fn to_coo_text(&self) -> String {
        let mut s = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                s.push_str(&format!("{i} {j} {v}\n"));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_dense() {
        let a = SparseMat::from_rows(3, vec![vec![(0, 1.0), (2, 2.0)], vec![(1, 3.0)], vec![]])
            .unwrap();
        let b = SparseMat::from_rows(3, vec![vec![(1, 1.0)], vec![(0, 4.0)], vec![(2, 5.0)]])
            .unwrap();
        let c = a.matmul(&b).unwrap();
        // dense check
        for i in 0..3 {
            for j in 0..3 {
                let mut want = 0.0;
                for k in 0..3 {
                    want += a.get(i, k) * b.get(k, j);
                }
                assert_eq!(c.get(i, j), want);
            }
        }
    }

    #[test]
    fn pow_one_is_identity_on_self() {
        let a = SparseMat::from_rows(2, vec![vec![(1, 1.0)], vec![(0, 0.5), (1, 0.5)]]).unwrap();
        assert_eq!(a.pow(1).unwrap(), a);
    }

    #[test]
    fn normalization_keeps_zero_rows() {
        let a = SparseMat::from_rows(2, vec![vec![(0, 0.2), (1, 0.6)], vec![]]).unwrap();
        let t = a.row_normalized();
        assert!((t.get(0, 0) - 0.25).abs() < 1e-12);
        assert!((t.get(0, 1) - 0.75).abs() < 1e-12);
        assert_eq!(t.row(1).len(), 0);
    }

    #[test]
    fn duplicate_column_rejected() {
        assert!(SparseMat::from_rows(2, vec![vec![(0, 1.0), (0, 2.0)], vec![]]).is_err());
    }
}
