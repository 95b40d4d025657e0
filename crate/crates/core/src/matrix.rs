//! Dense matrices over `Z_p` at finite precision, with Gauss-Jordan elimination
//! that pivots on the entry of least valuation.
//!
//! Entries carry their own precision. Elimination first brings every entry to
//! a common precision and then lowers it by the pivot valuation at each step,
//! so a reported precision is always one the arithmetic actually supports.

use std::fmt;

use thiserror::Error;

use crate::padic::{PadicError, PadicNum, PadicRing, Valuation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatrixError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("precision exhausted during elimination at step {step}")]
    PrecisionExhausted { step: usize },
    #[error("matrix is singular at the working precision")]
    Singular,
    #[error("solution is not integral")]
    NonIntegral,
    #[error(transparent)]
    Padic(#[from] PadicError),
}

#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    ring: PadicRing,
    rows: usize,
    cols: usize,
    data: Vec<PadicNum>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} (p = {}):", self.rows, self.cols, self.ring.p())?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Row-reduced form produced by full-pivoting Gauss-Jordan elimination.
#[derive(Debug, Clone)]
pub struct Echelon {
    /// Reduced matrix; the first `rank` rows are normalized pivot rows.
    pub reduced: Matrix,
    /// Pivot column of reduced row `i`.
    pub pivot_cols: Vec<usize>,
    /// Original row index now sitting at reduced row `i`.
    pub row_order: Vec<usize>,
    /// Pivot valuations, in order.
    pub pivot_valuations: Vec<u32>,
    /// Unit parts of the pivots (before normalization), with their sign flips.
    pub det_unit: PadicNum,
    pub row_swaps: usize,
    /// Common precision of the reduced matrix.
    pub precision: u32,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivot_cols.len()
    }

    pub fn loss(&self) -> u32 {
        self.pivot_valuations.iter().sum()
    }
}

/// Result of [`Matrix::smith`]: `a V = U^-1 D` with `D` diagonal.
#[derive(Debug, Clone)]
pub struct SmithForm {
    /// Valuations of the nonzero diagonal entries, in elimination order.
    pub pivot_valuations: Vec<u32>,
    /// The unimodular column transform `V`; its last `cols - rank` columns
    /// span the kernel.
    pub col_transform: Matrix,
    pub precision: u32,
}

impl SmithForm {
    pub fn rank(&self) -> usize {
        self.pivot_valuations.len()
    }

    /// Valuation of the determinant of a square matrix, `None` when it
    /// vanishes at the working precision.
    pub fn det_valuation(&self, n: usize) -> Option<u32> {
        (self.rank() == n).then(|| self.pivot_valuations.iter().sum())
    }
}

impl Matrix {
    pub fn zeros(ring: PadicRing, rows: usize, cols: usize) -> Self {
        Matrix {
            ring,
            rows,
            cols,
            data: vec![ring.zero(); rows * cols],
        }
    }

    pub fn identity(ring: PadicRing, n: usize) -> Self {
        let mut m = Self::zeros(ring, n, n);
        for i in 0..n {
            m.set(i, i, ring.one());
        }
        m
    }

    pub fn from_fn(
        ring: PadicRing,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> PadicNum,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix {
            ring,
            rows,
            cols,
            data,
        }
    }

    pub fn from_ints(ring: PadicRing, rows: &[Vec<i128>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        Self::from_fn(ring, r, c, |i, j| ring.elem(rows[i][j]))
    }

    pub fn diagonal(ring: PadicRing, diag: &[PadicNum]) -> Self {
        let mut m = Self::zeros(ring, diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.set(i, i, *d);
        }
        m
    }

    pub fn ring(&self) -> PadicRing {
        self.ring
    }

    pub fn p(&self) -> u64 {
        self.ring.p()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> PadicNum {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: PadicNum) {
        self.data[i * self.cols + j] = x;
    }

    pub fn entries(&self) -> &[PadicNum] {
        &self.data
    }

    /// Least precision over all entries (the ring precision for an empty matrix).
    pub fn precision(&self) -> u32 {
        self.data
            .iter()
            .map(|x| x.precision())
            .min()
            .unwrap_or(self.ring.precision())
    }

    pub fn reduced(&self, n: u32) -> Matrix {
        Matrix {
            data: self.data.iter().map(|x| x.reduce(n)).collect(),
            ..self.clone()
        }
    }

    /// The matrix over the ring `Z/p^n` for `n` at most the current precision.
    pub fn reduced_to(&self, n: u32) -> Matrix {
        let n = n.min(self.ring.precision());
        Matrix {
            ring: self.ring.with_precision(n).expect("lower precision is valid"),
            data: self.data.iter().map(|x| x.reduce(n)).collect(),
            ..self.clone()
        }
    }

    pub fn column(&self, j: usize) -> Vec<PadicNum> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn row(&self, i: usize) -> Vec<PadicNum> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn from_columns(ring: PadicRing, rows: usize, cols: &[Vec<PadicNum>]) -> Matrix {
        Self::from_fn(ring, rows, cols.len(), |i, j| cols[j][i])
    }

    pub fn transpose(&self) -> Matrix {
        Self::from_fn(self.ring, self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Self::from_fn(self.ring, rows.len(), cols.len(), |i, j| {
            self.get(rows[i], cols[j])
        })
    }

    /// Leading `n x n` block.
    pub fn leading(&self, n: usize) -> Matrix {
        let idx: Vec<usize> = (0..n).collect();
        self.submatrix(&idx, &idx)
    }

    pub fn hstack(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.rows != other.rows {
            return Err(MatrixError::Dimension("hstack row counts".into()));
        }
        Ok(Self::from_fn(
            self.ring,
            self.rows,
            self.cols + other.cols,
            |i, j| {
                if j < self.cols {
                    self.get(i, j)
                } else {
                    other.get(i, j - self.cols)
                }
            },
        ))
    }

    pub fn block_diag(&self, other: &Matrix) -> Matrix {
        let (r, c) = (self.rows + other.rows, self.cols + other.cols);
        let mut m = Self::zeros(self.ring, r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(i, j, self.get(i, j));
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                m.set(self.rows + i, self.cols + j, other.get(i, j));
            }
        }
        m
    }

    fn check_same_shape(&self, other: &Matrix, what: &str) -> Result<(), MatrixError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(MatrixError::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        self.check_same_shape(other, "add")?;
        Ok(Matrix {
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        self.check_same_shape(other, "sub")?;
        Ok(Matrix {
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect(),
            ..self.clone()
        })
    }

    pub fn scale(&self, c: PadicNum) -> Matrix {
        Matrix {
            data: self.data.iter().map(|a| *a * c).collect(),
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix, MatrixError> {
        if self.cols != other.rows {
            return Err(MatrixError::Dimension(format!(
                "mul: {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.ring, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() && a.precision() >= self.ring.precision() {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] = out.data[idx] + a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[PadicNum]) -> Result<Vec<PadicNum>, MatrixError> {
        let col = Matrix::from_columns(self.ring, v.len(), &[v.to_vec()]);
        Ok(self.mul(&col)?.column(0))
    }

    pub fn pow(&self, e: u32) -> Result<Matrix, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::Dimension("pow of non-square matrix".into()));
        }
        let mut acc = Self::identity(self.ring, self.rows);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// `sum_k coeffs[k] M^k` by Horner's rule.
    pub fn poly_eval(&self, coeffs: &[PadicNum]) -> Result<Matrix, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::Dimension("poly_eval of non-square matrix".into()));
        }
        let id = Self::identity(self.ring, self.rows);
        let mut acc = Self::zeros(self.ring, self.rows, self.cols);
        for c in coeffs.iter().rev() {
            acc = acc.mul(self)?.add(&id.scale(*c))?;
        }
        Ok(acc)
    }

    pub fn trace(&self) -> PadicNum {
        (0..self.rows.min(self.cols)).fold(self.ring.zero(), |acc, i| acc + self.get(i, i))
    }

    /// Equality modulo `p^k` entrywise (`k` clamped by each entry's precision).
    pub fn eq_mod(&self, other: &Matrix, k: u32) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.data.iter().zip(&other.data).all(|(a, b)| a.eq_mod(b, k))
    }

    pub fn is_zero_mod(&self, k: u32) -> bool {
        let z = self.ring.zero();
        self.data.iter().all(|a| a.eq_mod(&z, k))
    }

    /// Least valuation over the entries of column `j` (lower bounds for zeros).
    pub fn column_valuation(&self, j: usize) -> u32 {
        (0..self.rows)
            .map(|i| self.get(i, j).valuation().lower_bound())
            .min()
            .unwrap_or(u32::MAX)
    }

    /// Full-pivoting Gauss-Jordan elimination.
    pub fn echelon(&self) -> Result<Echelon, MatrixError> {
        self.echelon_limited(self.cols)
    }

    /// Gauss-Jordan where pivots are only taken from the first `pivot_cols` columns.
    pub fn echelon_limited(&self, pivot_limit: usize) -> Result<Echelon, MatrixError> {
        let p = self.p();
        let mut prec = self.precision();
        let mut m = self.reduced(prec);
        let mut row_order: Vec<usize> = (0..self.rows).collect();
        let mut pivot_cols = Vec::new();
        let mut pivot_valuations = Vec::new();
        let mut used_col = vec![false; self.cols];
        let mut det_unit = PadicNum::new(p, prec, 1)?;
        let mut swaps = 0usize;
        let max_rank = self.rows.min(pivot_limit);
        for step in 0..max_rank {
            let mut best: Option<(u32, usize, usize)> = None;
            for i in step..self.rows {
                for (j, used) in used_col.iter().enumerate().take(pivot_limit) {
                    if *used {
                        continue;
                    }
                    if let Valuation::Finite(v) = m.get(i, j).valuation() {
                        if best.is_none_or(|(bv, _, _)| v < bv) {
                            best = Some((v, i, j));
                        }
                    }
                }
            }
            let Some((v, pi, pj)) = best else { break };
            if v >= prec {
                return Err(MatrixError::PrecisionExhausted { step });
            }
            if pi != step {
                for j in 0..self.cols {
                    let a = m.get(step, j);
                    m.set(step, j, m.get(pi, j));
                    m.set(pi, j, a);
                }
                row_order.swap(step, pi);
                swaps += 1;
            }
            used_col[pj] = true;
            let unit = m.get(step, pj).div_p_power(v)?;
            let unit_inv = unit.inv()?;
            det_unit = det_unit.reduce(unit.precision()) * unit;
            let new_prec = prec - v;
            if new_prec == 0 {
                return Err(MatrixError::PrecisionExhausted { step });
            }
            for j in 0..self.cols {
                let x = m.get(step, j).div_p_power(v).map_err(|_| MatrixError::PrecisionExhausted { step })?;
                m.set(step, j, (x * unit_inv).reduce(new_prec));
            }
            for i in 0..self.rows {
                if i == step {
                    continue;
                }
                let factor = m.get(i, pj);
                for j in 0..self.cols {
                    let x = m.get(i, j) - factor * m.get(step, j);
                    m.set(i, j, x.reduce(new_prec));
                }
            }
            prec = new_prec;
            pivot_cols.push(pj);
            pivot_valuations.push(v);
        }
        let m = m.reduced(prec);
        Ok(Echelon {
            reduced: m,
            pivot_cols,
            row_order,
            pivot_valuations,
            det_unit: det_unit.reduce(prec),
            row_swaps: swaps,
            precision: prec,
        })
    }

    pub fn rank(&self) -> Result<usize, MatrixError> {
        Ok(self.echelon()?.rank())
    }

    /// A basis of the right kernel, as the columns of a `cols x k` matrix.
    pub fn kernel(&self) -> Result<Matrix, MatrixError> {
        Ok(self.kernel_with_free()?.0)
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    /// Diagonalization by unimodular row and column operations with full
    /// pivoting. Multipliers are integral and lifted to full precision, so
    /// the elimination is an exact equivalence and no digits are lost.
    pub fn smith(&self) -> Result<SmithForm, MatrixError> {
        let n = self.precision();
        let ring = self.ring.with_precision(n)?;
        let mut w = self.reduced_to(n);
        let mut v = Matrix::identity(ring, self.cols);
        let mut pivots = Vec::new();
        for step in 0..self.rows.min(self.cols) {
            let mut best: Option<(u32, usize, usize)> = None;
            for i in step..self.rows {
                for j in step..self.cols {
                    if let Valuation::Finite(x) = w.get(i, j).valuation() {
                        if best.is_none_or(|(b, _, _)| x < b) {
                            best = Some((x, i, j));
                        }
                    }
                }
            }
            let Some((val, pi, pj)) = best else { break };
            w.swap_rows(step, pi);
            w.swap_cols(step, pj);
            v.swap_cols(step, pj);
            let unit_inv = w.get(step, step).div_p_power(val)?.inv()?;
            let multiplier = |x: PadicNum| -> Result<PadicNum, MatrixError> {
                Ok((x.div_p_power(val)? * unit_inv).lift(n)?)
            };
            for r in step + 1..self.rows {
                let x = w.get(r, step);
                if x.is_zero() {
                    continue;
                }
                let m = multiplier(x)?;
                for c in step..self.cols {
                    w.set(r, c, w.get(r, c) - m * w.get(step, c));
                }
            }
            for c in step + 1..self.cols {
                let y = w.get(step, c);
                if y.is_zero() {
                    continue;
                }
                let m = multiplier(y)?;
                // Column `step` is zero below the pivot, so only row `step`
                // of w changes.
                w.set(step, c, ring.zero());
                for r in 0..self.cols {
                    v.set(r, c, v.get(r, c) - m * v.get(r, step));
                }
            }
            pivots.push(val);
        }
        Ok(SmithForm {
            pivot_valuations: pivots,
            col_transform: v,
            precision: n,
        })
    }

    /// Kernel basis together with its free coordinates: row `free[i]` of the
    /// basis matrix is the `i`-th unit vector, so coordinates of a kernel
    /// element are read off those rows. The basis is known mod
    /// `p^(N - max pivot valuation)`.
    pub fn kernel_with_free(&self) -> Result<(Matrix, Vec<usize>), MatrixError> {
        let sf = self.smith()?;
        let rank = sf.rank();
        let prec = sf.precision - sf.pivot_valuations.iter().copied().max().unwrap_or(0);
        let ring = self.ring.with_precision(prec)?;
        if rank == self.cols {
            return Ok((Matrix::zeros(ring, self.cols, 0), Vec::new()));
        }
        // The last columns of the transform span the kernel and are part of
        // a Z_p-basis, so normalizing them only divides by units.
        let cols: Vec<Vec<PadicNum>> = (rank..self.cols).map(|j| sf.col_transform.column(j)).collect();
        let basis = Matrix::from_columns(ring, self.cols, &cols).reduced_to(prec);
        let ech = basis.transpose().echelon()?;
        if ech.pivot_valuations.iter().any(|v| *v > 0) || ech.rank() < cols.len() {
            return Err(MatrixError::PrecisionExhausted { step: rank });
        }
        let mut free = Vec::new();
        let mut normalized = Vec::new();
        let mut order: Vec<usize> = (0..ech.rank()).collect();
        order.sort_by_key(|r| ech.pivot_cols[*r]);
        for r in order {
            free.push(ech.pivot_cols[r]);
            normalized.push(ech.reduced.row(r));
        }
        Ok((Matrix::from_columns(ring, self.cols, &normalized), free))
    }

    /// A basis of the left kernel, as the rows of a `k x rows` matrix.
    pub fn left_kernel(&self) -> Result<Matrix, MatrixError> {
        Ok(self.transpose().kernel()?.transpose())
    }

    /// Solve `self * X = p^s * rhs` for square invertible `self`, where `s` is
    /// the total pivot valuation; returns `(X, s)`.
    pub fn solve_scaled(&self, rhs: &Matrix) -> Result<(Matrix, u32), MatrixError> {
        if !self.is_square() || rhs.rows != self.rows {
            return Err(MatrixError::Dimension("solve".into()));
        }
        let n = self.rows;
        let first = self.echelon()?;
        if first.rank() < n {
            return Err(MatrixError::Singular);
        }
        let s = first.loss();
        let target = self.precision();
        let scaled = Matrix::from_fn(self.ring, rhs.rows, rhs.cols, |i, j| {
            let x = rhs.get(i, j);
            let lifted = x.lift((x.precision() + s).min(crate::padic::max_precision(x.p())));
            match lifted {
                Ok(l) => l.mul_p_power(s).reduce(target.max(1)),
                Err(_) => x.mul_p_power(s),
            }
        });
        let aug = self.hstack(&scaled)?;
        let ech = aug.echelon_limited(n)?;
        if ech.rank() < n {
            return Err(MatrixError::Singular);
        }
        let ring = self.ring.with_precision(ech.precision)?;
        let mut x = Matrix::zeros(ring, n, rhs.cols);
        for (r, pc) in ech.pivot_cols.iter().enumerate() {
            for j in 0..rhs.cols {
                x.set(*pc, j, ech.reduced.get(r, n + j));
            }
        }
        Ok((x, s))
    }

    /// Solve `self * X = rhs` when the solution is integral.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix, MatrixError> {
        let (x, s) = self.solve_scaled(rhs)?;
        x.div_p_power(s).ok_or(MatrixError::NonIntegral)
    }

    pub fn inverse(&self) -> Result<Matrix, MatrixError> {
        self.solve(&Matrix::identity(self.ring, self.rows))
    }

    /// Entrywise division by `p^k`, if every entry is divisible.
    pub fn div_p_power(&self, k: u32) -> Option<Matrix> {
        let data = self
            .data
            .iter()
            .map(|x| x.div_p_power(k).ok())
            .collect::<Option<Vec<_>>>()?;
        Some(Matrix {
            data,
            ..self.clone()
        })
    }

    /// Least valuation over all entries (lower bounds for zero entries).
    pub fn min_valuation(&self) -> u32 {
        self.data
            .iter()
            .map(|x| x.valuation().lower_bound())
            .min()
            .unwrap_or(u32::MAX)
    }

    /// Determinant via elimination; a zero determinant is reported with the
    /// precision at which elimination stopped.
    pub fn det(&self) -> Result<PadicNum, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::Dimension("det of non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(self.ring.one());
        }
        let ech = self.echelon()?;
        let ring = self.ring.with_precision(ech.precision)?;
        if ech.rank() < n {
            return Ok(ring.zero());
        }
        // Sign of the column permutation combined with the row swaps.
        let mut perm = ech.pivot_cols.clone();
        let mut col_swaps = 0usize;
        for i in 0..n {
            while perm[i] != i {
                let t = perm[i];
                perm.swap(i, t);
                col_swaps += 1;
            }
        }
        let v: u32 = ech.loss();
        let unit = ech.det_unit.reduce(ech.precision);
        let signed = if (ech.row_swaps + col_swaps) % 2 == 1 {
            -unit
        } else {
            unit
        };
        let full_prec = (ech.precision + v).min(self.precision());
        Ok(signed.lift(full_prec)?.mul_p_power(v))
    }

    /// Coefficients of `det(t I - A)` from degree 0 to `n`.
    ///
    /// Reduces to upper Hessenberg form by similarity, pivoting on the entry
    /// of least valuation so every multiplier is integral, then runs the
    /// Hessenberg recurrence. Precision is tracked entrywise; entries below
    /// the subdiagonal that vanish only to their precision cap the result.
    pub fn charpoly(&self) -> Result<Vec<PadicNum>, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::Dimension("charpoly of non-square matrix".into()));
        }
        let n = self.rows;
        let mut h = self.clone();
        let mut floor = self.precision();
        for j in 0..n.saturating_sub(2) {
            let mut best: Option<(u32, usize)> = None;
            for i in j + 1..n {
                if let Valuation::Finite(v) = h.get(i, j).valuation() {
                    if best.is_none_or(|(bv, _)| v < bv) {
                        best = Some((v, i));
                    }
                }
            }
            let Some((v, pi)) = best else {
                for i in j + 2..n {
                    floor = floor.min(h.get(i, j).precision());
                }
                continue;
            };
            if pi != j + 1 {
                for c in 0..n {
                    let a = h.get(j + 1, c);
                    h.set(j + 1, c, h.get(pi, c));
                    h.set(pi, c, a);
                }
                for r in 0..n {
                    let a = h.get(r, j + 1);
                    h.set(r, j + 1, h.get(r, pi));
                    h.set(r, pi, a);
                }
            }
            let unit_inv = h.get(j + 1, j).div_p_power(v)?.inv()?;
            for r in j + 2..n {
                let x = h.get(r, j);
                if x.is_zero() {
                    floor = floor.min(x.precision());
                    continue;
                }
                // Any lift of the multiplier gives an exact similarity, and
                // m p^v u still cancels x mod p^N, so no digits are lost.
                let m = (x.div_p_power(v)? * unit_inv).lift(x.precision())?;
                for c in 0..n {
                    h.set(r, c, h.get(r, c) - m * h.get(j + 1, c));
                }
                for c in 0..n {
                    h.set(c, j + 1, h.get(c, j + 1) + m * h.get(c, r));
                }
                floor = floor.min(h.get(r, j).precision());
            }
        }
        let ring = self.ring;
        let mut polys: Vec<Vec<PadicNum>> = vec![vec![ring.one()]];
        for k in 1..=n {
            let mut next = vec![ring.zero(); k + 1];
            for (d, c) in polys[k - 1].iter().enumerate() {
                next[d + 1] = next[d + 1] + *c;
                next[d] = next[d] - h.get(k - 1, k - 1) * *c;
            }
            let mut prod = ring.one();
            for i in (1..k).rev() {
                prod = prod * h.get(i, i - 1);
                let coef = h.get(i - 1, k - 1) * prod;
                if coef.is_zero() && coef.precision() >= floor {
                    continue;
                }
                for (d, c) in polys[i - 1].iter().enumerate() {
                    next[d] = next[d] - coef * *c;
                }
            }
            polys.push(next);
        }
        Ok(polys
            .pop()
            .expect("n + 1 polynomials")
            .into_iter()
            .map(|c| if c.precision() > floor { c.reduce(floor) } else { c })
            .collect())
    }
}
