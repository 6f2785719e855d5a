//! Dense revised simplex for `max { c'x : Ax <= b, x >= 0 }`.
//!
//! The solver works on the slack-augmented matrix `[A | I]` and keeps an
//! explicit basis inverse, updated in product form after every pivot and
//! rebuilt from scratch every [`REFACTOR_INTERVAL`] pivots. The optimal basis,
//! its inverse and the duals are returned so callers can differentiate the
//! basic solution with respect to the right-hand side.
//!
//! Column indices in [`LpSolution::basis`] refer to the augmented matrix:
//! `0..n` are structural columns, `n..n + m` are the slack columns.

use thiserror::Error;

/// Primal feasibility tolerance.
pub const EPS_FEAS: f64 = 1e-7;
/// Objective and complementarity tolerance.
pub const EPS_OBJ: f64 = 1e-6;
/// Smallest pivot magnitude accepted by the ratio test.
pub const PIVOT_TOL: f64 = 1e-9;
/// Basis inverse is rebuilt after this many product-form updates.
pub const REFACTOR_INTERVAL: usize = 100;

const OPT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
/// Primal infeasibility the ratio test may accept to favour larger pivots.
const HARRIS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("iteration limit of {0} pivots reached")]
    IterationLimit(usize),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LpError> {
        if data.len() != rows * cols {
            return Err(LpError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LpError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(LpError::Dimension(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (o, &a) in out.iter_mut().zip(self.row(i)) {
                    *o += vi * a;
                }
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max c'x s.t. Ax <= b, x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    c: Vec<f64>,
    a: Matrix,
    b: Vec<f64>,
}

impl LpProblem {
    pub fn new(c: Vec<f64>, a: Matrix, b: Vec<f64>) -> Result<Self, LpError> {
        if a.rows() != b.len() {
            return Err(LpError::Dimension(format!("A has {} rows but b has {}", a.rows(), b.len())));
        }
        if a.cols() != c.len() {
            return Err(LpError::Dimension(format!("A has {} columns but c has {}", a.cols(), c.len())));
        }
        if !c.iter().all(|v| v.is_finite()) {
            return Err(LpError::NonFinite("c"));
        }
        if !b.iter().all(|v| v.is_finite()) {
            return Err(LpError::NonFinite("b"));
        }
        if !a.as_slice().iter().all(|v| v.is_finite()) {
            return Err(LpError::NonFinite("A"));
        }
        Ok(Self { c, a, b })
    }

    pub fn from_rows(c: Vec<f64>, rows: &[Vec<f64>], b: Vec<f64>) -> Result<Self, LpError> {
        let a = if rows.is_empty() { Matrix::zeros(0, c.len()) } else { Matrix::from_rows(rows)? };
        Self::new(c, a, b)
    }

    /// Number of constraint rows.
    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// Number of structural columns.
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Returns a copy with a different right-hand side.
    pub fn with_rhs(&self, b: Vec<f64>) -> Result<Self, LpError> {
        Self::new(self.c.clone(), self.a.clone(), b)
    }

    /// Objective coefficient of an augmented column (slacks cost nothing).
    pub fn augmented_cost(&self, column: usize) -> f64 {
        if column < self.n() {
            self.c[column]
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    /// `row` is a constraint that phase one could not satisfy.
    Infeasible { row: usize },
    /// `column` is the augmented column along which the objective grows without bound.
    Unbounded { column: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub basis: Vec<usize>,
    /// Basis inverse, transposed.
    binv_t: Matrix,
    pub duals: Vec<f64>,
    pub pivots: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Basis position holding augmented column `column`, if it is basic.
    pub fn basic_position(&self, column: usize) -> Option<usize> {
        self.basis.iter().position(|&j| j == column)
    }

    /// `B^-1`, row `p` belonging to basis position `p`.
    pub fn basis_inverse(&self) -> Matrix {
        self.binv_t.transpose()
    }

    /// Row `p` of `B^-1`: the gradient of basic variable `basis[p]` with respect to `b`.
    pub fn basis_inverse_row(&self, p: usize) -> Vec<f64> {
        (0..self.binv_t.rows()).map(|i| self.binv_t.get(i, p)).collect()
    }

    /// Directional derivative of structural column `column` along a
    /// right-hand-side perturbation `db`. Nonbasic columns stay at zero.
    pub fn column_sensitivity(&self, column: usize, db: &[f64]) -> f64 {
        match self.basic_position(column) {
            Some(p) => dot(&self.basis_inverse_row(p), db),
            None => 0.0,
        }
    }
}

/// Sensitivity of the basic variables to the right-hand side: row `p` is
/// `d x_{basis[p]} / d b`. This is the basis inverse itself.
pub fn basic_value_sensitivity(s: &LpSolution) -> Matrix {
    s.basis_inverse()
}

pub fn solve(p: &LpProblem) -> Result<LpSolution, LpError> {
    Simplex::new(p).run()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

struct SparseColumn {
    rows: Vec<usize>,
    vals: Vec<f64>,
}

struct Simplex<'a> {
    p: &'a LpProblem,
    m: usize,
    n: usize,
    cols: Vec<SparseColumn>,
    /// Rows that received an artificial column, indexed by artificial number.
    art_rows: Vec<usize>,
    basis: Vec<usize>,
    /// Basis position of every augmented column, `usize::MAX` when nonbasic.
    position: Vec<usize>,
    /// `B^-1` stored transposed: row `k` holds column `k` of the inverse.
    binv_t: Matrix,
    xb: Vec<f64>,
    y: Vec<f64>,
    cost: Vec<f64>,
    since_refactor: usize,
    degenerate_run: usize,
    pivots: usize,
    max_pivots: usize,
    // scratch
    u: Vec<f64>,
    d: Vec<f64>,
    pivot_row: Vec<f64>,
    nz: Vec<usize>,
}

const NONBASIC: usize = usize::MAX;

impl<'a> Simplex<'a> {
    fn new(p: &'a LpProblem) -> Self {
        let (m, n) = (p.m(), p.n());
        let mut cols: Vec<SparseColumn> =
            (0..n).map(|_| SparseColumn { rows: Vec::new(), vals: Vec::new() }).collect();
        for i in 0..m {
            for (j, &v) in p.a().row(i).iter().enumerate() {
                if v != 0.0 {
                    cols[j].rows.push(i);
                    cols[j].vals.push(v);
                }
            }
        }
        let art_rows: Vec<usize> = (0..m).filter(|&i| p.b()[i] < 0.0).collect();
        let total = n + m + art_rows.len();
        let mut basis = Vec::with_capacity(m);
        let mut position = vec![NONBASIC; total];
        let mut next_art = 0;
        for i in 0..m {
            let col = if next_art < art_rows.len() && art_rows[next_art] == i {
                next_art += 1;
                n + m + next_art - 1
            } else {
                n + i
            };
            position[col] = i;
            basis.push(col);
        }
        let mut cost = vec![0.0; total];
        let phase_one = !art_rows.is_empty();
        if phase_one {
            for c in &mut cost[n + m..] {
                *c = -1.0;
            }
        } else {
            cost[..n].copy_from_slice(p.c());
        }
        Self {
            p,
            m,
            n,
            cols,
            art_rows,
            basis,
            position,
            binv_t: Matrix::zeros(0, 0),
            xb: vec![0.0; m],
            y: vec![0.0; m],
            cost,
            since_refactor: 0,
            degenerate_run: 0,
            pivots: 0,
            max_pivots: 50 * (m + n) + 1000,
            u: vec![0.0; m],
            d: vec![0.0; total],
            pivot_row: vec![0.0; m],
            nz: Vec::with_capacity(m),
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n + self.m
    }

    fn run(mut self) -> Result<LpSolution, LpError> {
        self.refactor()?;
        if !self.art_rows.is_empty() {
            if let Some(col) = self.iterate(Phase::One)? {
                // Phase one is bounded above by zero.
                return Err(LpError::NumericalBreakdown(format!("phase one unbounded along column {col}")));
            }
            let infeasibility: f64 = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|(&j, _)| self.is_artificial(j))
                .map(|(_, &v)| v.max(0.0))
                .sum();
            if infeasibility > EPS_FEAS {
                let row = self
                    .basis
                    .iter()
                    .zip(&self.xb)
                    .filter(|(&j, &v)| self.is_artificial(j) && v > EPS_FEAS)
                    .map(|(&j, _)| self.art_rows[j - self.n - self.m])
                    .min()
                    .unwrap_or(0);
                return Ok(self.finish(LpStatus::Infeasible { row }));
            }
            self.drive_out_artificials()?;
            self.cost.iter_mut().for_each(|c| *c = 0.0);
            self.cost[..self.n].copy_from_slice(self.p.c());
            self.refactor()?;
        }
        if let Some(column) = self.iterate(Phase::Two)? {
            return Ok(self.finish(LpStatus::Unbounded { column }));
        }
        Ok(self.finish(LpStatus::Optimal))
    }

    /// Runs simplex iterations until optimal (`None`) or unbounded (`Some(column)`).
    fn iterate(&mut self, phase: Phase) -> Result<Option<usize>, LpError> {
        loop {
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor()?;
            }
            let bland = self.degenerate_run >= 3 * (self.m + self.n);
            let Some(q) = self.price(bland) else {
                return Ok(None);
            };
            self.ftran(q);
            let Some(r) = self.ratio_test(bland) else {
                if phase == Phase::One {
                    return Err(LpError::NumericalBreakdown(format!("unbounded phase-one ray along {q}")));
                }
                return Ok(Some(q));
            };
            if self.pivots >= self.max_pivots {
                return Err(LpError::IterationLimit(self.max_pivots));
            }
            self.pivot(q, r);
        }
    }

    /// Reduced costs for every augmented column; returns the entering column.
    fn price(&mut self, bland: bool) -> Option<usize> {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            if self.position[j] != NONBASIC {
                continue;
            }
            let c = &self.cols[j];
            let mut s = self.cost[j];
            for (&i, &v) in c.rows.iter().zip(&c.vals) {
                s -= self.y[i] * v;
            }
            self.d[j] = s;
        }
        for i in 0..m {
            self.d[n + i] = self.cost[n + i] - self.y[i];
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n + m {
            if self.position[j] != NONBASIC {
                continue;
            }
            let dj = self.d[j];
            if dj <= OPT_TOL {
                continue;
            }
            if bland {
                return Some(j);
            }
            match best {
                Some((_, bd)) if dj <= bd => {}
                _ => best = Some((j, dj)),
            }
        }
        best.map(|(j, _)| j)
    }

    /// `u = B^-1 a_q`.
    fn ftran(&mut self, q: usize) {
        let m = self.m;
        self.u.iter_mut().for_each(|v| *v = 0.0);
        if q < self.n {
            let c = &self.cols[q];
            for (&i, &v) in c.rows.iter().zip(&c.vals) {
                for (u, &b) in self.u.iter_mut().zip(self.binv_t.row(i)) {
                    *u += b * v;
                }
            }
        } else {
            let (i, sign) = self.unit_column(q);
            for (u, &b) in self.u[..m].iter_mut().zip(self.binv_t.row(i)) {
                *u = sign * b;
            }
        }
    }

    fn unit_column(&self, j: usize) -> (usize, f64) {
        if j < self.n + self.m {
            (j - self.n, 1.0)
        } else {
            (self.art_rows[j - self.n - self.m], -1.0)
        }
    }

    /// Two-pass ratio test. The first pass bounds the step so no basic
    /// variable drops below `-HARRIS_TOL`; the second picks, among rows whose
    /// exact ratio fits under that bound, the largest pivot element (lowest
    /// row on equal elements), or the lowest basic index in Bland mode.
    fn ratio_test(&self, bland: bool) -> Option<usize> {
        let mut bound = f64::INFINITY;
        for p in 0..self.m {
            let up = self.u[p];
            if up > PIVOT_TOL {
                bound = bound.min((self.xb[p].max(0.0) + HARRIS_TOL) / up);
            }
        }
        if bound == f64::INFINITY {
            return None;
        }
        let mut best: Option<usize> = None;
        for p in 0..self.m {
            let up = self.u[p];
            if up <= PIVOT_TOL || self.xb[p].max(0.0) / up > bound {
                continue;
            }
            best = match best {
                None => Some(p),
                Some(bp) if bland && self.basis[p] < self.basis[bp] => Some(p),
                Some(bp) if !bland && up > self.u[bp] => Some(p),
                keep => keep,
            };
        }
        best
    }

    fn pivot(&mut self, q: usize, r: usize) {
        let m = self.m;
        let ur = self.u[r];
        let step = self.xb[r].max(0.0) / ur;
        if step <= DEGENERATE_STEP {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        for p in 0..m {
            self.xb[p] -= step * self.u[p];
        }
        self.xb[r] = step;

        self.eliminate(r, ur);
        let dq = self.d[q];
        for &k in &self.nz {
            self.y[k] += dq * self.pivot_row[k];
        }

        let leaving = self.basis[r];
        self.position[leaving] = NONBASIC;
        self.position[q] = r;
        self.basis[r] = q;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    /// Product-form update of `B^-1` for pivot row `r`, touching only the
    /// columns where row `r` is nonzero. Leaves the new row `r` in `pivot_row`.
    fn eliminate(&mut self, r: usize, ur: f64) {
        let inv = 1.0 / ur;
        self.nz.clear();
        for k in 0..self.m {
            let v = self.binv_t.get(k, r) * inv;
            self.pivot_row[k] = v;
            if v != 0.0 {
                self.nz.push(k);
            }
        }
        for &k in &self.nz {
            let pk = self.pivot_row[k];
            let col = self.binv_t.row_mut(k);
            for (c, &u) in col.iter_mut().zip(&self.u) {
                *c -= u * pk;
            }
            col[r] = pk;
        }
    }

    /// Rebuilds `B^-1`, `x_B` and `y` from the current basis. The basis is
    /// split into structural columns and unit (slack or artificial) columns;
    /// only the structural block on the rows without a basic unit column is
    /// inverted.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut structural = Vec::new();
        let mut unit_rows = vec![None; m];
        for (p, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                structural.push((p, j));
            } else {
                let (i, sign) = self.unit_column(j);
                if unit_rows[i].is_some() {
                    return Err(LpError::NumericalBreakdown(format!("row {i} covered twice in basis")));
                }
                unit_rows[i] = Some((p, sign));
            }
        }
        let k_rows: Vec<usize> = (0..m).filter(|&i| unit_rows[i].is_none()).collect();
        let k = structural.len();
        if k == 0 {
            let mut binv_t = Matrix::zeros(m, m);
            for (i, unit) in unit_rows.iter().enumerate() {
                if let Some((p, sign)) = unit {
                    binv_t.set(i, *p, *sign);
                }
            }
            return Ok(self.install(binv_t));
        }
        if k_rows.len() != k {
            return Err(LpError::NumericalBreakdown("basis is not square".into()));
        }
        // Local index of each free row inside the structural block.
        let mut local = vec![NONBASIC; m];
        for (a, &i) in k_rows.iter().enumerate() {
            local[i] = a;
        }
        let mut block = Matrix::zeros(k, k);
        for (b, &(_, j)) in structural.iter().enumerate() {
            let c = &self.cols[j];
            for (&i, &v) in c.rows.iter().zip(&c.vals) {
                if local[i] != NONBASIC {
                    block.set(local[i], b, v);
                }
            }
        }
        let block_inv = invert(block)?;

        // Rows of A restricted to the basic structural columns.
        let mut coupling: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (b, &(_, j)) in structural.iter().enumerate() {
            let c = &self.cols[j];
            for (&i, &v) in c.rows.iter().zip(&c.vals) {
                if local[i] == NONBASIC {
                    coupling[i].push((b, v));
                }
            }
        }
        let mut binv_t = Matrix::zeros(m, m);
        for (b, &(p, _)) in structural.iter().enumerate() {
            for (a, &i) in k_rows.iter().enumerate() {
                binv_t.set(i, p, block_inv.get(b, a));
            }
        }
        let mut acc = vec![0.0; k];
        for i in 0..m {
            let Some((p, sign)) = unit_rows[i] else { continue };
            // Row of B^-1 for a unit column on row i: -s (A_iS M^-1) on free rows, s on row i.
            if !coupling[i].is_empty() {
                acc.iter_mut().for_each(|v| *v = 0.0);
                for &(b, v) in &coupling[i] {
                    for (s, &mb) in acc.iter_mut().zip(block_inv.row(b)) {
                        *s += v * mb;
                    }
                }
                for (a, &row) in k_rows.iter().enumerate() {
                    binv_t.set(row, p, -sign * acc[a]);
                }
            }
            binv_t.set(i, p, sign);
        }
        Ok(self.install(binv_t))
    }

    fn install(&mut self, binv_t: Matrix) {
        self.binv_t = binv_t;
        self.xb = self.binv_t.transpose_mul_vec(self.p.b());
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.y = self.binv_t.mul_vec(&cb);
        self.since_refactor = 0;
    }

    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        for r in 0..self.m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            // Row r of B^-1 [A | I]; pick the largest magnitude entry.
            let row: Vec<f64> = (0..self.m).map(|k| self.binv_t.get(k, r)).collect();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n + self.m {
                if self.position[j] != NONBASIC {
                    continue;
                }
                let alpha = if j < self.n {
                    let c = &self.cols[j];
                    c.rows.iter().zip(&c.vals).map(|(&i, &v)| row[i] * v).sum()
                } else {
                    row[j - self.n]
                };
                if alpha.abs() > PIVOT_TOL && best.is_none_or(|(_, b)| alpha.abs() > b.abs()) {
                    best = Some((j, alpha));
                }
            }
            let Some((q, _)) = best else {
                return Err(LpError::NumericalBreakdown(format!("artificial on row {r} cannot leave the basis")));
            };
            self.ftran(q);
            // Degenerate exchange: the artificial sits at zero.
            self.d[q] = 0.0;
            let ur = self.u[r];
            let step = self.xb[r] / ur;
            for p in 0..self.m {
                self.xb[p] -= step * self.u[p];
            }
            self.xb[r] = step;
            self.eliminate(r, ur);
            let leaving = self.basis[r];
            self.position[leaving] = NONBASIC;
            self.position[q] = r;
            self.basis[r] = q;
            self.pivots += 1;
            self.since_refactor += 1;
        }
        Ok(())
    }

    fn finish(mut self, status: LpStatus) -> LpSolution {
        let n = self.n;
        self.xb = self.binv_t.transpose_mul_vec(self.p.b());
        let mut x = vec![0.0; n];
        for (p, &j) in self.basis.iter().enumerate() {
            if j < n {
                x[j] = self.xb[p];
            }
        }
        let objective = dot(self.p.c(), &x);
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.p.augmented_cost(j)).collect();
        let duals = self.binv_t.mul_vec(&cb);
        LpSolution {
            status,
            x,
            objective,
            basis: self.basis,
            binv_t: self.binv_t,
            duals,
            pivots: self.pivots,
        }
    }
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Matrix) -> Result<Matrix, LpError> {
    let n = a.rows();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let mut piv = col;
        let mut best = a.get(col, col).abs();
        for r in col + 1..n {
            let v = a.get(r, col).abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < PIVOT_TOL {
            return Err(LpError::NumericalBreakdown(format!("singular basis block at column {col}")));
        }
        if piv != col {
            for j in 0..n {
                a.data.swap(col * n + j, piv * n + j);
                inv.data.swap(col * n + j, piv * n + j);
            }
        }
        let inv_p = 1.0 / a.get(col, col);
        for j in 0..n {
            a.data[col * n + j] *= inv_p;
            inv.data[col * n + j] *= inv_p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a.get(r, col);
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a.data[r * n + j] -= f * a.data[col * n + j];
                inv.data[r * n + j] -= f * inv.data[col * n + j];
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], rows: &[&[f64]], b: &[f64]) -> LpProblem {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        LpProblem::from_rows(c.to_vec(), &rows, b.to_vec()).unwrap()
    }

    #[test]
    fn single_variable_bound() {
        let s = solve(&lp(&[1.0], &[&[1.0]], &[5.0])).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 5.0).abs() < 1e-12);
        assert!((s.objective - 5.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
        let sens = basic_value_sensitivity(&s);
        let p = s.basic_position(0).unwrap();
        assert!((sens.get(p, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_feasible_set() {
        let s = solve(&lp(&[0.0], &[&[1.0]], &[-1.0])).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible { row: 0 });
    }

    #[test]
    fn unbounded_ray() {
        let s = solve(&lp(&[1.0, 1.0], &[&[1.0, -1.0]], &[1.0])).unwrap();
        assert!(matches!(s.status, LpStatus::Unbounded { .. }));
    }

    #[test]
    fn two_by_two_sensitivity() {
        // max x1 + x2 s.t. x1 <= 3, x1 + x2 <= 5
        let s = solve(&lp(&[1.0, 1.0], &[&[1.0, 0.0], &[1.0, 1.0]], &[3.0, 5.0])).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective - 5.0).abs() < 1e-12);
        // Force the basis containing both structurals by checking the sensitivities
        // of x2 wherever it is basic.
        if let Some(p) = s.basic_position(1) {
            let binv = s.basis_inverse();
            let row = binv.row(p);
            if s.basic_position(0).is_some() {
                assert!((row[1] - 1.0).abs() < 1e-12);
                assert!((row[0] + 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_by_two_sensitivity_by_reperturbation() {
        // Hand-solved: x1 = 3, x2 = 2 at the unique vertex when the objective favours x1.
        let p = lp(&[2.0, 1.0], &[&[1.0, 0.0], &[1.0, 1.0]], &[3.0, 5.0]);
        let s = solve(&p).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
        let p2 = s.basic_position(1).unwrap();
        let binv = s.basis_inverse();
        let row = binv.row(p2);
        assert!((row[1] - 1.0).abs() < 1e-12, "dx2/db2");
        assert!((row[0] + 1.0).abs() < 1e-12, "dx2/db1");
        assert!((s.column_sensitivity(1, &[0.0, 1.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rows() {
        let s = solve(&lp(&[-1.0, 0.0], &[], &[])).unwrap();
        assert!(s.is_optimal());
        assert_eq!(s.x, vec![0.0, 0.0]);
        let s = solve(&lp(&[1.0], &[], &[])).unwrap();
        assert!(matches!(s.status, LpStatus::Unbounded { column: 0 }));
    }

    #[test]
    fn rejects_bad_dimensions_and_nan() {
        let rows = vec![vec![1.0, 2.0]];
        assert!(matches!(
            LpProblem::from_rows(vec![1.0], &rows, vec![1.0]),
            Err(LpError::Dimension(_))
        ));
        assert!(matches!(
            LpProblem::from_rows(vec![1.0, f64::NAN], &rows, vec![1.0]),
            Err(LpError::NonFinite("c"))
        ));
    }

    #[test]
    fn phase_one_then_optimal() {
        // max -x1 - x2 s.t. -x1 - x2 <= -2 (x1 + x2 >= 2), x1 <= 3
        let s = solve(&lp(&[-1.0, -1.0], &[&[-1.0, -1.0], &[1.0, 0.0]], &[-2.0, 3.0])).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective + 2.0).abs() < 1e-9);
        assert!(s.basis.iter().all(|&j| j < 4));
    }
}
