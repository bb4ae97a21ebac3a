//! Sparse linear systems for the discrete weak forms, and a direct solver.
//!
//! The solver is a left-looking sparse LU with partial pivoting (pattern
//! discovery by depth-first search, one column at a time). Pivot ties break
//! on the smallest row index, so factorizations are deterministic.

use crate::curve::{Curve, ElementFrame};
use crate::metric::{MetricSpec, SplitGradients};
use crate::vec2::Vec2;
use crate::{Error, Result};

/// Row-oriented triplet accumulator plus right-hand side.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub n: usize,
    pub rows: Vec<u32>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn new(n: usize) -> Self {
        SparseSystem {
            n,
            rows: Vec::with_capacity(12 * n),
            cols: Vec::with_capacity(12 * n),
            vals: Vec::with_capacity(12 * n),
            rhs: vec![0.0; n],
        }
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.n && c < self.n);
        if v != 0.0 {
            self.rows.push(r as u32);
            self.cols.push(c as u32);
            self.vals.push(v);
        }
    }

    pub fn add_rhs(&mut self, r: usize, v: f64) {
        self.rhs[r] += v;
    }

    pub fn reset_rhs(&mut self) {
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Compresses the triplets to column-major storage, summing duplicates.
    pub fn to_csc(&self) -> Csc {
        let n = self.n;
        let mut count = vec![0usize; n + 1];
        for &c in &self.cols {
            count[c as usize + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let colptr_raw = count.clone();
        let mut rowind = vec![0u32; self.vals.len()];
        let mut values = vec![0.0; self.vals.len()];
        let mut next = colptr_raw.clone();
        for k in 0..self.vals.len() {
            let c = self.cols[k] as usize;
            rowind[next[c]] = self.rows[k];
            values[next[c]] = self.vals[k];
            next[c] += 1;
        }
        // sort each column by row and sum duplicates
        let mut colptr = vec![0usize; n + 1];
        let mut out_r = Vec::with_capacity(rowind.len());
        let mut out_v = Vec::with_capacity(values.len());
        let mut scratch: Vec<(u32, f64)> = Vec::new();
        for c in 0..n {
            scratch.clear();
            for p in colptr_raw[c]..colptr_raw[c + 1] {
                scratch.push((rowind[p], values[p]));
            }
            scratch.sort_unstable_by_key(|e| e.0);
            let mut i = 0;
            while i < scratch.len() {
                let r = scratch[i].0;
                let mut v = scratch[i].1;
                i += 1;
                while i < scratch.len() && scratch[i].0 == r {
                    v += scratch[i].1;
                    i += 1;
                }
                out_r.push(r);
                out_v.push(v);
            }
            colptr[c + 1] = out_r.len();
        }
        Csc { n, colptr, rowind: out_r, values: out_v }
    }
}

/// Compressed sparse column matrix.
#[derive(Debug, Clone)]
pub struct Csc {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<u32>,
    pub values: Vec<f64>,
}

impl Csc {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.n {
            let xc = x[c];
            for p in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowind[p] as usize] += self.values[p] * xc;
            }
        }
    }

    pub fn inf_norm(&self) -> f64 {
        let mut rowsum = vec![0.0f64; self.n];
        for c in 0..self.n {
            for p in self.colptr[c]..self.colptr[c + 1] {
                rowsum[self.rowind[p] as usize] += self.values[p].abs();
            }
        }
        rowsum.into_iter().fold(0.0, f64::max)
    }
}

const UNPIVOTED: u32 = u32::MAX;

/// Sparse LU factors of a row permutation of the matrix.
pub struct SparseLu {
    n: usize,
    lp: Vec<usize>,
    li: Vec<u32>,
    lx: Vec<f64>,
    up: Vec<usize>,
    ui: Vec<u32>,
    ux: Vec<f64>,
    pinv: Vec<u32>,
}

impl SparseLu {
    /// Left-looking LU with partial pivoting.
    pub fn factor(a: &Csc) -> Result<SparseLu> {
        let n = a.n;
        let mut lp = Vec::with_capacity(n + 1);
        let mut li: Vec<u32> = Vec::with_capacity(8 * n);
        let mut lx: Vec<f64> = Vec::with_capacity(8 * n);
        let mut up = Vec::with_capacity(n + 1);
        let mut ui: Vec<u32> = Vec::with_capacity(8 * n);
        let mut ux: Vec<f64> = Vec::with_capacity(8 * n);
        let mut pinv = vec![UNPIVOTED; n];
        let mut x = vec![0.0f64; n];
        let mut mark = vec![u32::MAX; n];
        let mut pattern: Vec<u32> = Vec::with_capacity(n);
        let mut stack: Vec<(u32, usize)> = Vec::with_capacity(n);
        lp.push(0);
        up.push(0);

        for k in 0..n {
            // symbolic: depth-first reach of A(:,k) through the columns of L
            pattern.clear();
            for p in a.colptr[k]..a.colptr[k + 1] {
                let r0 = a.rowind[p];
                if mark[r0 as usize] == k as u32 {
                    continue;
                }
                mark[r0 as usize] = k as u32;
                stack.push((r0, usize::MAX));
                while let Some(&mut (r, ref mut child)) = stack.last_mut() {
                    let jcol = pinv[r as usize];
                    if jcol == UNPIVOTED {
                        stack.pop();
                        pattern.push(r);
                        continue;
                    }
                    let (lo, hi) = (lp[jcol as usize], lp[jcol as usize + 1]);
                    let mut cp = if *child == usize::MAX { lo } else { *child };
                    let mut pushed = false;
                    while cp < hi {
                        let ch = li[cp];
                        cp += 1;
                        if mark[ch as usize] != k as u32 {
                            mark[ch as usize] = k as u32;
                            *child = cp;
                            stack.push((ch, usize::MAX));
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        stack.pop();
                        pattern.push(r);
                    }
                }
            }

            // numeric: scatter A(:,k) and eliminate in topological order
            for p in a.colptr[k]..a.colptr[k + 1] {
                x[a.rowind[p] as usize] = a.values[p];
            }
            for idx in (0..pattern.len()).rev() {
                let r = pattern[idx] as usize;
                let jcol = pinv[r];
                if jcol == UNPIVOTED {
                    continue;
                }
                let xj = x[r];
                if xj != 0.0 {
                    // first entry of the L column is the unit diagonal
                    for p in lp[jcol as usize] + 1..lp[jcol as usize + 1] {
                        x[li[p] as usize] -= lx[p] * xj;
                    }
                }
            }

            // pivot: largest magnitude among unpivoted rows, smallest index wins ties
            let mut piv_row = UNPIVOTED;
            let mut piv_abs = 0.0f64;
            let mut cand: Vec<u32> = Vec::new();
            for &r in &pattern {
                if pinv[r as usize] == UNPIVOTED {
                    cand.push(r);
                    let a = x[r as usize].abs();
                    if a > piv_abs || (a == piv_abs && a > 0.0 && piv_row != UNPIVOTED && r < piv_row)
                    {
                        piv_abs = a;
                        piv_row = r;
                    }
                }
            }
            cand.sort_unstable();
            if piv_row == UNPIVOTED || piv_abs == 0.0 || !piv_abs.is_finite() {
                return Err(Error::SingularSystem { step: 0 });
            }
            let piv_val = x[piv_row as usize];
            pinv[piv_row as usize] = k as u32;

            // store U(:,k): pivotal rows of the pattern, diagonal last
            for &r in &pattern {
                let pos = pinv[r as usize];
                if pos != UNPIVOTED && pos != k as u32 {
                    ui.push(pos);
                    ux.push(x[r as usize]);
                }
            }
            ui.push(k as u32);
            ux.push(piv_val);
            up.push(ui.len());

            // store L(:,k): unit diagonal first, then scaled unpivoted rows
            li.push(piv_row);
            lx.push(1.0);
            for &r in &cand {
                if r != piv_row {
                    li.push(r);
                    lx.push(x[r as usize] / piv_val);
                }
            }
            lp.push(li.len());

            for &r in &pattern {
                x[r as usize] = 0.0;
            }
        }

        // remap L's row indices into pivot coordinates
        for r in li.iter_mut() {
            *r = pinv[*r as usize];
        }
        Ok(SparseLu { n, lp, li, lx, up, ui, ux, pinv })
    }

    /// Solves `A x = b` given the factorization of `A`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for r in 0..n {
            y[self.pinv[r] as usize] = b[r];
        }
        // unit lower triangular forward solve
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    y[self.li[p] as usize] -= self.lx[p] * yj;
                }
            }
        }
        // upper triangular back solve (diagonal stored last per column)
        for j in (0..n).rev() {
            let d = self.ux[self.up[j + 1] - 1];
            y[j] /= d;
            let yj = y[j];
            if yj != 0.0 {
                for p in self.up[j]..self.up[j + 1] - 1 {
                    y[self.ui[p] as usize] -= self.ux[p] * yj;
                }
            }
        }
        y
    }
}

/// Factors and solves, with one step of iterative refinement and a residual
/// guarantee `|A x - b|_inf <= 1e-10 (|A|_inf |x|_inf + |b|_inf)`.
pub fn solve(sys: &SparseSystem) -> Result<Vec<f64>> {
    let a = sys.to_csc();
    let lu = SparseLu::factor(&a)?;
    let mut x = lu.solve(&sys.rhs);
    let mut r = vec![0.0; sys.n];
    let resid = |x: &[f64], r: &mut Vec<f64>| {
        a.matvec(x, r);
        let mut worst = 0.0f64;
        for i in 0..sys.n {
            r[i] = sys.rhs[i] - r[i];
            worst = worst.max(r[i].abs());
        }
        worst
    };
    let xn = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bn = sys.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let bound = |x: &[f64]| 1e-10 * (a.inf_norm() * xn(x) + bn);
    if resid(&x, &mut r) > bound(&x) {
        let dx = lu.solve(&r);
        for i in 0..sys.n {
            x[i] += dx[i];
        }
        if resid(&x, &mut r) > bound(&x) {
            return Err(Error::SingularSystem { step: 0 });
        }
    }
    Ok(x)
}

/// Per-step precomputed element and nodal data entering the weak forms.
pub struct WeakBlocks {
    pub frames: Vec<ElementFrame>,
    /// lumped vertex masses `m_i`
    pub masses: Vec<f64>,
    /// weighted vertex normals `w_i`
    pub wnorm: Vec<Vec2>,
    pub g: Vec<f64>,
    pub sg: Vec<f64>,
    pub isg: Vec<f64>,
    pub grad_sqg: Vec<Vec2>,
    pub grad_lng: Vec<Vec2>,
    pub s0: Vec<f64>,
    /// per-element average of `g^{1/2}` at the endpoints
    pub gbar: Vec<f64>,
    /// per-element average of `g^{-1/2}` at the endpoints
    pub gcheck: Vec<f64>,
}

impl WeakBlocks {
    pub fn build(m: &MetricSpec, c: &Curve) -> Result<WeakBlocks> {
        let frames = c.element_frames()?;
        let masses = c.vertex_masses(&frames);
        let wnorm = c.weighted_vertex_normals(&frames);
        let n = c.num_nodes();
        let mut g = Vec::with_capacity(n);
        let mut sg = Vec::with_capacity(n);
        let mut isg = Vec::with_capacity(n);
        let mut grad_sqg = Vec::with_capacity(n);
        let mut grad_lng = Vec::with_capacity(n);
        let mut s0 = Vec::with_capacity(n);
        for &z in c.nodes() {
            let gi = m.eval_g(z)?;
            g.push(gi);
            sg.push(gi.sqrt());
            isg.push(1.0 / gi.sqrt());
            grad_sqg.push(m.grad_sqrt_g(z)?);
            grad_lng.push(m.grad_ln_g(z)?);
            s0.push(m.sectional_curvature(z)?);
        }
        let ne = c.num_elements();
        let mut gbar = Vec::with_capacity(ne);
        let mut gcheck = Vec::with_capacity(ne);
        for e in 0..ne {
            let (a, b) = c.element(e);
            gbar.push(0.5 * (sg[a] + sg[b]));
            gcheck.push(0.5 * (isg[a] + isg[b]));
        }
        Ok(WeakBlocks { frames, masses, wnorm, g, sg, isg, grad_sqg, grad_lng, s0, gbar, gcheck })
    }
}

/// How curvature couples in a side constraint.
pub enum CurvCoupling {
    /// scalar unknown tested against `w_i` (plain or g-weighted)
    Scalar,
    /// vector unknown with diagonal lumped mass
    Vector,
}

/// Appends the Euclidean side constraint rows
/// `(kappa nu^m, eta |X^m_rho|)^h + (X^{m+1}_rho, eta_rho |X^m_rho|^{-1}) = 0`.
///
/// `row(i, comp)` selects the equation index for the test function
/// `hat_i e_comp` (returning `None` drops the test function, e.g. at fixed
/// endpoints); `kcol`/`xcol` map unknowns to columns.
pub fn add_side_constraint_euclid(
    sys: &mut SparseSystem,
    c: &Curve,
    bl: &WeakBlocks,
    coupling: CurvCoupling,
    row: &dyn Fn(usize, usize) -> Option<usize>,
    kcol: &dyn Fn(usize, usize) -> usize,
    xcol: &dyn Fn(usize, usize) -> usize,
) {
    for i in 0..c.num_nodes() {
        for comp in 0..2 {
            let Some(r) = row(i, comp) else { continue };
            match coupling {
                CurvCoupling::Scalar => {
                    let w = if comp == 0 { bl.wnorm[i].x } else { bl.wnorm[i].y };
                    sys.add(r, kcol(i, 0), w);
                }
                CurvCoupling::Vector => {
                    sys.add(r, kcol(i, comp), bl.masses[i]);
                }
            }
            for e in [c.prev_element(i), c.next_element(i)].into_iter().flatten() {
                let (a, b) = c.element(e);
                let other = if a == i { b } else { a };
                let inv = 1.0 / bl.frames[e].length;
                sys.add(r, xcol(i, comp), inv);
                sys.add(r, xcol(other, comp), -inv);
            }
        }
    }
}

/// Mode of the metric side constraint.
pub enum ConstraintMode<'a> {
    /// gradient term `(grad g^{1/2}(X^m), eta |X^m_rho|)^h`
    Linear,
    /// split gradient term frozen at a fixed-point iterate:
    /// `(grad [g^{1/2}_+(X~) + g^{1/2}_-(X^m)], eta |X~_rho|)^h`
    SplitNonlinear { split: &'a SplitGradients, iterate: &'a Curve },
    /// coefficient blocks only; the caller supplies the gradient source
    /// per fixed-point iterate
    MatrixOnly,
}

/// Appends the metric side constraint rows (the discrete weak identity for
/// `kappa_g`): curvature mass, gradient source (to the right-hand side) and
/// the `g^{1/2}`-weighted stiffness.
pub fn add_side_constraint_metric(
    sys: &mut SparseSystem,
    c: &Curve,
    bl: &WeakBlocks,
    coupling: CurvCoupling,
    mode: &ConstraintMode,
    row: &dyn Fn(usize, usize) -> Option<usize>,
    kcol: &dyn Fn(usize, usize) -> usize,
    xcol: &dyn Fn(usize, usize) -> usize,
) -> Result<()> {
    // gradient source, constant per step (moved to the right-hand side)
    let source: Vec<Vec2> = match mode {
        ConstraintMode::Linear => (0..c.num_nodes())
            .map(|i| bl.grad_sqg[i] * bl.masses[i])
            .collect(),
        ConstraintMode::SplitNonlinear { split, iterate } => {
            let frames_it = iterate.element_frames()?;
            let masses_it = iterate.vertex_masses(&frames_it);
            let mut v = Vec::with_capacity(c.num_nodes());
            for i in 0..c.num_nodes() {
                let gp = split.grad_plus(iterate.nodes()[i])?;
                let gm = split.grad_minus(c.nodes()[i])?;
                v.push((gp + gm) * masses_it[i]);
            }
            v
        }
        ConstraintMode::MatrixOnly => vec![Vec2::ZERO; c.num_nodes()],
    };
    for i in 0..c.num_nodes() {
        for comp in 0..2 {
            let Some(r) = row(i, comp) else { continue };
            match coupling {
                CurvCoupling::Scalar => {
                    let w = if comp == 0 { bl.wnorm[i].x } else { bl.wnorm[i].y };
                    sys.add(r, kcol(i, 0), bl.g[i] * w);
                }
                CurvCoupling::Vector => {
                    sys.add(r, kcol(i, comp), bl.masses[i] * bl.g[i] * bl.sg[i]);
                }
            }
            sys.add_rhs(r, -if comp == 0 { source[i].x } else { source[i].y });
            for e in [c.prev_element(i), c.next_element(i)].into_iter().flatten() {
                let (a, b) = c.element(e);
                let other = if a == i { b } else { a };
                let coef = bl.gbar[e] / bl.frames[e].length;
                sys.add(r, xcol(i, comp), coef);
                sys.add(r, xcol(other, comp), -coef);
            }
        }
    }
    Ok(())
}
