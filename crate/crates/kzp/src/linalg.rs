//! Dense linear algebra over a [`Field`]: echelon forms, rank, kernels and
//! characteristic polynomials.

use crate::fields::{Fe, Field};

/// Row-major dense matrix of field values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    /// Number of rows.
    pub rows: usize,
    /// Number of columns.
    pub cols: usize,
    /// Entries in row-major order.
    pub data: Vec<Fe>,
}

impl Matrix {
    /// The zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![Fe::ZERO; rows * cols] }
    }

    /// The identity matrix.
    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Fe::ONE);
        }
        m
    }

    /// Builds a matrix from row vectors (all of equal length).
    pub fn from_rows(rows: &[Vec<Fe>]) -> Matrix {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vec<Fe>]) -> Matrix {
        Matrix::from_rows(cols).transpose()
    }

    /// Entry `(i, j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Fe {
        self.data[i * self.cols + j]
    }

    /// Sets entry `(i, j)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Fe) {
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[Fe] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` as a vector.
    pub fn col(&self, j: usize) -> Vec<Fe> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Transpose.
    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Returns `true` when every entry vanishes.
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|c| c.is_zero())
    }

    /// Matrix product.
    pub fn mul(&self, k: &Field, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = k.add(out.get(i, j), k.mul(a, other.get(l, j)));
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, k: &Field, v: &[Fe]) -> Vec<Fe> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(Fe::ZERO, |acc, (&a, &b)| k.add(acc, k.mul(a, b))))
            .collect()
    }

    /// Entrywise scaling.
    pub fn scale(&self, k: &Field, c: Fe) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| k.mul(a, c)).collect() }
    }

    /// Entrywise difference.
    pub fn sub(&self, k: &Field, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| k.sub(a, b)).collect(),
        }
    }

    /// Reduced row echelon form in place; returns the pivot columns.
    pub fn rref(&mut self, k: &Field) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(pr) = (r..self.rows).find(|&i| !self.get(i, c).is_zero()) else { continue };
            if pr != r {
                for j in 0..self.cols {
                    self.data.swap(pr * self.cols + j, r * self.cols + j);
                }
            }
            let inv = k.inv(self.get(r, c)).expect("nonzero pivot");
            for j in 0..self.cols {
                let v = k.mul(self.get(r, j), inv);
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let f = self.get(i, c);
                if f.is_zero() {
                    continue;
                }
                for j in 0..self.cols {
                    let v = k.sub(self.get(i, j), k.mul(f, self.get(r, j)));
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    /// Rank.
    pub fn rank(&self, k: &Field) -> usize {
        self.clone().rref(k).len()
    }

    /// Basis of the right kernel `{v : M v = 0}`.
    pub fn kernel(&self, k: &Field) -> Vec<Vec<Fe>> {
        let mut m = self.clone();
        let pivots = m.rref(k);
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Fe::ZERO; self.cols];
                v[f] = Fe::ONE;
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = k.neg(m.get(r, f));
                }
                v
            })
            .collect()
    }

    /// Determinant of a square matrix.
    pub fn det(&self, k: &Field) -> Fe {
        assert_eq!(self.rows, self.cols, "square matrix required");
        let mut m = self.clone();
        let n = self.rows;
        let mut det = Fe::ONE;
        for c in 0..n {
            let Some(pr) = (c..n).find(|&i| !m.get(i, c).is_zero()) else { return Fe::ZERO };
            if pr != c {
                for j in 0..n {
                    m.data.swap(pr * n + j, c * n + j);
                }
                det = k.neg(det);
            }
            let piv = m.get(c, c);
            det = k.mul(det, piv);
            let inv = k.inv(piv).expect("nonzero pivot");
            for i in c + 1..n {
                let f = k.mul(m.get(i, c), inv);
                if f.is_zero() {
                    continue;
                }
                for j in c..n {
                    let v = k.sub(m.get(i, j), k.mul(f, m.get(c, j)));
                    m.set(i, j, v);
                }
            }
        }
        det
    }

    /// Characteristic polynomial `det(x I - M)`, low degree first, via reduction to
    /// upper Hessenberg form followed by the standard recurrence.
    pub fn charpoly(&self, k: &Field) -> Vec<Fe> {
        assert_eq!(self.rows, self.cols, "square matrix required");
        let n = self.rows;
        let mut h = self.clone();
        // Similarity reduction to upper Hessenberg form.
        for c in 0..n.saturating_sub(2) {
            let Some(pr) = (c + 1..n).find(|&i| !h.get(i, c).is_zero()) else { continue };
            if pr != c + 1 {
                for j in 0..n {
                    h.data.swap(pr * n + j, (c + 1) * n + j);
                }
                for i in 0..n {
                    h.data.swap(i * n + pr, i * n + c + 1);
                }
            }
            let inv = k.inv(h.get(c + 1, c)).expect("nonzero pivot");
            for i in c + 2..n {
                let f = k.mul(h.get(i, c), inv);
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let v = k.sub(h.get(i, j), k.mul(f, h.get(c + 1, j)));
                    h.set(i, j, v);
                }
                for r in 0..n {
                    let v = k.add(h.get(r, c + 1), k.mul(f, h.get(r, i)));
                    h.set(r, c + 1, v);
                }
            }
        }
        // p_0 = 1, p_m = (x - h_mm) p_{m-1} - sum_{i<m} h_im (prod sub-diagonal) p_i.
        let mut polys: Vec<Vec<Fe>> = vec![vec![Fe::ONE]];
        for m in 0..n {
            let prev = &polys[m];
            let mut next = crate::upoly::mul(k, prev, &[k.neg(h.get(m, m)), Fe::ONE]);
            let mut prod = Fe::ONE;
            for i in (0..m).rev() {
                prod = k.mul(prod, h.get(i + 1, i));
                let coef = k.mul(h.get(i, m), prod);
                if coef.is_zero() {
                    continue;
                }
                let term: Vec<Fe> = polys[i].iter().map(|&c| k.mul(c, coef)).collect();
                next = crate::upoly::sub(k, &next, &term);
            }
            polys.push(next);
        }
        polys.pop().unwrap()
    }
}

/// Incrementally maintained row echelon basis of a growing set of vectors.
#[derive(Clone, Debug)]
pub struct RowEchelon {
    cols: usize,
    rows: Vec<(usize, Vec<Fe>)>,
}

impl RowEchelon {
    /// An empty basis for vectors of length `cols`.
    pub fn new(cols: usize) -> RowEchelon {
        RowEchelon { cols, rows: Vec::new() }
    }

    /// Current rank.
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis in place; returns `true` if the remainder is zero.
    pub fn reduce(&self, k: &Field, v: &mut [Fe]) -> bool {
        debug_assert_eq!(v.len(), self.cols);
        for (piv, row) in &self.rows {
            let c = v[*piv];
            if c.is_zero() {
                continue;
            }
            for (x, &r) in v.iter_mut().zip(row) {
                if !r.is_zero() {
                    *x = k.sub(*x, k.mul(c, r));
                }
            }
        }
        v.iter().all(|c| c.is_zero())
    }

    /// Adds `v` to the span; returns `true` if the rank grew.
    pub fn insert(&mut self, k: &Field, mut v: Vec<Fe>) -> bool {
        if self.reduce(k, &mut v) {
            return false;
        }
        let piv = v.iter().position(|c| !c.is_zero()).unwrap();
        let inv = k.inv(v[piv]).expect("nonzero pivot");
        for x in v.iter_mut() {
            *x = k.mul(*x, inv);
        }
        self.rows.push((piv, v));
        true
    }

    /// The stored rows as a matrix.
    pub fn to_matrix(&self) -> Matrix {
        let rows: Vec<Vec<Fe>> = self.rows.iter().map(|(_, r)| r.clone()).collect();
        if rows.is_empty() {
            return Matrix::zeros(0, self.cols);
        }
        Matrix::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::upoly;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(k: &Field, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for x in m.data.iter_mut() {
            *x = k.random(rng);
        }
        m
    }

    #[test]
    fn kernel_vectors_are_annihilated() {
        let k = Field::prime(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&k, 3, &mut rng);
        // Make a rank-deficient 4x5 matrix.
        let mut rows: Vec<Vec<Fe>> = (0..3).map(|i| [a.row(i), &[Fe(1), Fe(2)]].concat()).collect();
        rows.push((0..5).map(|j| k.add(rows[0][j], rows[1][j])).collect());
        let m = Matrix::from_rows(&rows);
        let ker = m.kernel(&k);
        assert_eq!(ker.len(), 5 - m.rank(&k));
        for v in ker {
            assert!(m.mul_vec(&k, &v).iter().all(|c| c.is_zero()));
        }
    }

    #[test]
    fn charpoly_matches_determinant_oracle() {
        // Oracle: det(x I - M) evaluated at several x by Gaussian elimination.
        let k = crate::fields::build_extension(5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..6 {
            let m = random_matrix(&k, n, &mut rng);
            let cp = m.charpoly(&k);
            assert_eq!(cp.len(), n + 1);
            for _ in 0..4 {
                let x = k.random(&mut rng);
                let shifted = Matrix::identity(n).scale(&k, x).sub(&k, &m);
                assert_eq!(upoly::eval(&k, &cp, x), shifted.det(&k));
            }
        }
    }

    #[test]
    fn echelon_rank_matches_rref() {
        let k = Field::prime(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&k, 4, &mut rng);
        let mut e = RowEchelon::new(4);
        for i in 0..4 {
            e.insert(&k, m.row(i).to_vec());
        }
        e.insert(&k, m.row(0).to_vec());
        assert_eq!(e.rank(), m.rank(&k));
    }
}
