//! Dense two-phase simplex for small linear programs `max c·x, A x (≤ = ≥) b, x ≥ 0`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub coefs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    /// One multiplier per row: free for `Eq`, `≥ 0` for `Le`, `≤ 0` for `Ge`.
    pub y: Vec<f64>,
    pub value: f64,
    pub dual_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpFailure {
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `m` rows of `width + 1` entries; the last entry is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, j: usize, obj: &mut [f64]) {
        let p = self.t[r][j];
        self.t[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i != r {
                let f = row[j];
                if f != 0.0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
        let f = obj[j];
        if f != 0.0 {
            obj.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
        }
        self.basis[r] = j;
    }

    /// Maximizes with reduced costs in `obj` (`obj[j] > 0` improves); `allowed` masks columns.
    fn optimize(&mut self, obj: &mut [f64], allowed: &dyn Fn(usize) -> bool, tol: f64) -> std::result::Result<(), LpFailure> {
        let mut degenerate = 0;
        for _ in 0..200_000 {
            let bland = degenerate > 50;
            let mut enter = None;
            let mut best = tol;
            for j in 0..self.width {
                if allowed(j) && obj[j] > best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = obj[j];
                }
            }
            let Some(j) = enter else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[j];
                if a > 1e-12 {
                    let ratio = row[self.width] / a;
                    let better = match leave {
                        None => true,
                        Some((l, r)) => ratio < r - 1e-15 || (ratio <= r + 1e-15 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(LpFailure::Unbounded);
            };
            degenerate = if ratio <= 1e-15 { degenerate + 1 } else { 0 };
            self.pivot(r, j, obj);
        }
        Err(LpFailure::Unbounded)
    }
}

pub(crate) fn solve(c: &[f64], rows: &[Row]) -> Result<std::result::Result<LpSolution, LpFailure>> {
    let n = c.len();
    let m = rows.len();
    if rows.iter().any(|r| r.coefs.len() != n) {
        return Err(Error::invalid("constraint rows must match the number of variables"));
    }
    // Normalize to nonnegative right-hand sides.
    let flip: Vec<bool> = rows.iter().map(|r| r.rhs < 0.0).collect();
    let norm: Vec<Row> = rows
        .iter()
        .zip(&flip)
        .map(|(r, &f)| {
            if !f {
                return r.clone();
            }
            Row {
                coefs: r.coefs.iter().map(|v| -v).collect(),
                sense: match r.sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                },
                rhs: -r.rhs,
            }
        })
        .collect();

    let n_slack = norm.iter().filter(|r| r.sense != Sense::Eq).count();
    let n_art = norm.iter().filter(|r| r.sense != Sense::Le).count();
    let width = n + n_slack + n_art;
    let mut t = vec![vec![0.0; width + 1]; m];
    let mut basis = vec![0; m];
    let (mut s_col, mut a_col) = (n, n + n_slack);
    for (i, r) in norm.iter().enumerate() {
        t[i][..n].copy_from_slice(&r.coefs);
        t[i][width] = r.rhs;
        match r.sense {
            Sense::Le => {
                t[i][s_col] = 1.0;
                basis[i] = s_col;
                s_col += 1;
            }
            Sense::Ge => {
                t[i][s_col] = -1.0;
                s_col += 1;
                t[i][a_col] = 1.0;
                basis[i] = a_col;
                a_col += 1;
            }
            Sense::Eq => {
                t[i][a_col] = 1.0;
                basis[i] = a_col;
                a_col += 1;
            }
        }
    }
    // Keep the unmodified standard-form matrix for the final basis solves.
    let standard: Vec<Vec<f64>> = t.clone();
    let mut tab = Tableau { t, basis, width };
    let scale_b = norm.iter().fold(1.0_f64, |a, r| a.max(r.rhs.abs()));
    let scale_c = c.iter().fold(1.0_f64, |a, v| a.max(v.abs()));

    // Phase 1: maximize −Σ artificials.
    let is_art = |j: usize| j >= n + n_slack && j < width;
    let mut obj = vec![0.0; width + 1];
    for (i, row) in tab.t.iter().enumerate() {
        if is_art(tab.basis[i]) {
            obj.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
    }
    for j in 0..width {
        if is_art(j) {
            obj[j] = 0.0;
        }
    }
    if tab.optimize(&mut obj, &|_| true, 1e-11).is_err() {
        return Err(Error::numeric("simplex phase one failed to terminate"));
    }
    if obj[width] > 1e-9 * scale_b {
        return Ok(Err(LpFailure::Infeasible));
    }
    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut active: Vec<usize> = (0..m).collect();
    let mut i = 0;
    while i < tab.t.len() {
        if is_art(tab.basis[i]) {
            let j = (0..n + n_slack).find(|&j| tab.t[i][j].abs() > 1e-9);
            match j {
                Some(j) => {
                    let mut dummy = vec![0.0; width + 1];
                    tab.pivot(i, j, &mut dummy);
                }
                None => {
                    tab.t.remove(i);
                    tab.basis.remove(i);
                    active.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    // Phase 2.
    let cost = |j: usize| if j < n { c[j] } else { 0.0 };
    let mut obj = vec![0.0; width + 1];
    for j in 0..width {
        obj[j] = cost(j);
    }
    for (r, row) in tab.t.iter().enumerate() {
        let cb = cost(tab.basis[r]);
        if cb != 0.0 {
            obj.iter_mut().zip(row).for_each(|(o, v)| *o -= cb * v);
        }
    }
    match tab.optimize(&mut obj, &|j| !is_art(j), 1e-11 * scale_c) {
        Ok(()) => {}
        Err(f) => return Ok(Err(f)),
    }

    // Recompute primal and dual values from the basis for accuracy.
    let k = tab.basis.len();
    let bmat = DMatrix::from_fn(k, k, |r, col| standard[active[r]][tab.basis[col]]);
    let rhs = DVector::from_fn(k, |r, _| standard[active[r]][width]);
    let cb = DVector::from_fn(k, |r, _| cost(tab.basis[r]));
    let lu = bmat.clone().lu();
    let (xb, yb) = match (lu.solve(&rhs), bmat.transpose().lu().solve(&cb)) {
        (Some(xb), Some(yb)) => (xb, yb),
        _ => {
            let xb = DVector::from_fn(k, |r, _| tab.t[r][width]);
            (xb, DVector::zeros(k))
        }
    };
    let mut x = vec![0.0; n];
    for (r, &j) in tab.basis.iter().enumerate() {
        if j < n {
            x[j] = xb[r].max(0.0);
        }
    }
    let mut y = vec![0.0; m];
    for (r, &row) in active.iter().enumerate() {
        y[row] = if flip[row] { -yb[r] } else { yb[r] };
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    let dual_value = rows.iter().zip(&y).map(|(r, v)| r.rhs * v).sum();
    Ok(Ok(LpSolution {
        x,
        y,
        value,
        dual_value,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coefs: &[f64], sense: Sense, rhs: f64) -> Row {
        Row {
            coefs: coefs.to_vec(),
            sense,
            rhs,
        }
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), value 36.
        let rows = [
            row(&[1.0, 0.0], Sense::Le, 4.0),
            row(&[0.0, 2.0], Sense::Le, 12.0),
            row(&[3.0, 2.0], Sense::Le, 18.0),
        ];
        let s = solve(&[3.0, 5.0], &rows).unwrap().unwrap();
        assert!((s.value - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        assert!((s.dual_value - 36.0).abs() < 1e-12);
        // Known duals (0, 3/2, 1).
        assert!((s.y[1] - 1.5).abs() < 1e-12 && (s.y[2] - 1.0).abs() < 1e-12 && s.y[0].abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x + 2y + 3z, x + y + z = 1, x ≥ 0.2, y − z ≥ -0.1
        let rows = [
            row(&[1.0, 1.0, 1.0], Sense::Eq, 1.0),
            row(&[1.0, 0.0, 0.0], Sense::Ge, 0.2),
            row(&[0.0, -1.0, 1.0], Sense::Le, 0.1),
        ];
        let s = solve(&[1.0, 2.0, 3.0], &rows).unwrap().unwrap();
        // z = y + 0.1, x = 0.2 → y = 0.35, z = 0.45 → 0.2 + 0.7 + 1.35
        assert!((s.value - 2.25).abs() < 1e-12, "{}", s.value);
        assert!((s.dual_value - s.value).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let infeasible = [row(&[1.0, 1.0], Sense::Le, 1.0), row(&[1.0, 1.0], Sense::Ge, 2.0)];
        assert!(matches!(solve(&[1.0, 1.0], &infeasible).unwrap(), Err(LpFailure::Infeasible)));
        let unbounded = [row(&[1.0, -1.0], Sense::Le, 1.0)];
        assert!(matches!(solve(&[1.0, 1.0], &unbounded).unwrap(), Err(LpFailure::Unbounded)));
    }

    #[test]
    fn redundant_equalities() {
        let rows = [
            row(&[1.0, 1.0], Sense::Eq, 1.0),
            row(&[2.0, 2.0], Sense::Eq, 2.0),
            row(&[1.0, 0.0], Sense::Le, 0.3),
        ];
        let s = solve(&[2.0, 1.0], &rows).unwrap().unwrap();
        assert!((s.value - 1.3).abs() < 1e-12);
        assert!((s.dual_value - 1.3).abs() < 1e-12);
    }
}
