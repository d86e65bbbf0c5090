use rug::Rational;

use super::ExactSeries;
use crate::error::{Error, Result};

/// Reduced row-echelon form of a list of series.
#[derive(Clone, Debug)]
pub struct Echelon {
    /// Nonzero rows; row `i` has coefficient 1 at `pivots[i]` and 0 at every
    /// other pivot.
    pub rows: Vec<ExactSeries>,
    /// `rows[i] = Σ_j coords[i][j]·input[j]`.
    pub coords: Vec<Vec<Rational>>,
    pub pivots: Vec<usize>,
}

/// Row-reduce `input` over ℚ, treating exponents as columns.
pub fn echelonize(input: &[ExactSeries]) -> Echelon {
    let n = input.len();
    let prec = input.iter().map(|s| s.prec()).min().unwrap_or(0);
    let mut rows: Vec<ExactSeries> = input.iter().map(|s| s.truncate(prec)).collect();
    let mut coords: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| Rational::from((i == j) as i32)).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    let mut col = 0;
    while r < n && col < prec {
        // next column where some remaining row is nonzero
        let next = rows[r..]
            .iter()
            .enumerate()
            .filter_map(|(i, s)| {
                s.nonzero_numerators()
                    .find(|&(e, _)| e >= col)
                    .map(|(e, _)| (e, i + r))
            })
            .min();
        let Some((c, i)) = next else { break };
        col = c;
        rows.swap(r, i);
        coords.swap(r, i);
        let inv = Rational::from(1) / rows[r].coeff(col);
        rows[r] = rows[r].scale(&inv);
        for x in coords[r].iter_mut() {
            *x *= &inv;
        }
        for j in 0..n {
            if j == r || *rows[j].numerator(col) == 0 {
                continue;
            }
            let f = -rows[j].coeff(col);
            rows[j] = rows[j].axpy(&f, &rows[r]);
            let (cr, cj) = if j < r {
                let (a, b) = coords.split_at_mut(r);
                (&b[0], &mut a[j])
            } else {
                let (a, b) = coords.split_at_mut(j);
                (&a[r], &mut b[0])
            };
            for (y, x) in cj.iter_mut().zip(cr) {
                *y += Rational::from(&f * x);
            }
        }
        pivots.push(col);
        r += 1;
        col += 1;
    }
    rows.truncate(r);
    coords.truncate(r);
    Echelon {
        rows,
        coords,
        pivots,
    }
}

/// Solution set of a linear system on the span of some series.
#[derive(Clone, Debug)]
pub struct LinearSolution {
    /// One solution, `None` when the constraints are inconsistent.
    pub particular: Option<ExactSeries>,
    pub particular_coords: Option<Vec<Rational>>,
    /// Basis of the homogeneous solutions in reduced echelon form with unit
    /// pivots; linear dependencies among the input rows are factored out.
    pub kernel: Vec<ExactSeries>,
    /// Coordinates of each kernel series with respect to the input rows.
    pub kernel_coords: Vec<Vec<Rational>>,
    pub kernel_pivots: Vec<usize>,
}

impl LinearSolution {
    pub fn is_consistent(&self) -> bool {
        self.particular.is_some()
    }

    /// Dimension of the homogeneous solution space.
    pub fn dimension(&self) -> usize {
        self.kernel.len()
    }
}

/// All combinations `Σ xᵢ·rowsᵢ` whose coefficient at each constrained
/// exponent equals the required value.
pub fn linear_solve(rows: &[ExactSeries], constraints: &[(usize, Rational)]) -> Result<LinearSolution> {
    let n = rows.len();
    let prec = rows.iter().map(|s| s.prec()).min().unwrap_or(0);
    if let Some(&(e, _)) = constraints.iter().find(|(e, _)| *e >= prec) {
        return Err(Error::domain(format!(
            "constraint on q^{e} beyond the common precision {prec}"
        )));
    }
    // augmented matrix, one row per constraint
    let mut m: Vec<Vec<Rational>> = constraints
        .iter()
        .map(|(e, v)| {
            let mut row: Vec<Rational> = rows.iter().map(|s| s.coeff(*e)).collect();
            row.push(v.clone());
            row
        })
        .collect();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(i) = (r..m.len()).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, i);
        let inv = Rational::from(1) / &m[r][c];
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for j in 0..m.len() {
            if j != r && m[j][c] != 0 {
                let f = m[j][c].clone();
                for col in 0..=n {
                    let d = Rational::from(&f * &m[r][col]);
                    m[j][col] -= d;
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
    }
    let consistent = m[r..].iter().all(|row| row[n] == 0);
    let free: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();

    let combine = |x: &[Rational]| -> ExactSeries {
        let mut acc = ExactSeries::zero(prec);
        for (xi, s) in x.iter().zip(rows) {
            acc = acc.axpy(xi, s);
        }
        acc
    };

    let (particular, particular_coords) = if consistent {
        let mut x = vec![Rational::new(); n];
        for (i, &c) in pivot_cols.iter().enumerate() {
            x[c] = m[i][n].clone();
        }
        (Some(combine(&x)), Some(x))
    } else {
        (None, None)
    };

    let raw_coords: Vec<Vec<Rational>> = free
        .iter()
        .map(|&f| {
            let mut x = vec![Rational::new(); n];
            x[f] = Rational::from(1);
            for (i, &c) in pivot_cols.iter().enumerate() {
                x[c] = -m[i][f].clone();
            }
            x
        })
        .collect();
    let raw: Vec<ExactSeries> = raw_coords.iter().map(|x| combine(x)).collect();
    let ech = echelonize(&raw);
    let kernel_coords = ech
        .coords
        .iter()
        .map(|cs| {
            let mut x = vec![Rational::new(); n];
            for (c, base) in cs.iter().zip(&raw_coords) {
                for (xi, bi) in x.iter_mut().zip(base) {
                    *xi += Rational::from(c * bi);
                }
            }
            x
        })
        .collect();
    Ok(LinearSolution {
        particular,
        particular_coords,
        kernel: ech.rows,
        kernel_coords,
        kernel_pivots: ech.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::Integer;

    fn ints(prec: usize, v: &[i64]) -> ExactSeries {
        ExactSeries::from_integers(prec, v.iter().map(|&x| Integer::from(x)).collect())
    }

    #[test]
    fn kernel_of_one_and_q() {
        let rows = [ints(4, &[1]), ints(4, &[0, 1])];
        let sol = linear_solve(&rows, &[(0, Rational::new())]).unwrap();
        assert_eq!(sol.kernel, vec![ints(4, &[0, 1])]);
        assert_eq!(sol.kernel_coords, vec![vec![Rational::new(), Rational::from(1)]]);
    }

    #[test]
    fn kernel_from_difference() {
        let rows = [ints(4, &[1, 1]), ints(4, &[1, -1])];
        let sol = linear_solve(&rows, &[(0, Rational::new())]).unwrap();
        assert_eq!(sol.kernel, vec![ints(4, &[0, 1])]);
        let x = &sol.kernel_coords[0];
        assert_eq!(x[0], Rational::from((1, 2)));
        assert_eq!(x[1], Rational::from((-1, 2)));
    }

    #[test]
    fn inconsistent_system_is_reported() {
        let rows = [ints(4, &[1, 1]), ints(4, &[2, 2])];
        let sol = linear_solve(&rows, &[(0, Rational::from(1)), (1, Rational::from(2))]).unwrap();
        assert!(!sol.is_consistent());
        assert!(sol.particular_coords.is_none());
        assert_eq!(sol.kernel.len(), sol.dimension());
        // dependent rows leave a one-dimensional combination that is zero
        assert_eq!(sol.dimension(), 0);
    }

    #[test]
    fn particular_solution() {
        let rows = [ints(4, &[1, 2]), ints(4, &[0, 1, 1])];
        let sol = linear_solve(&rows, &[(0, Rational::from(3)), (1, Rational::from(5))]).unwrap();
        assert_eq!(sol.particular.as_ref().unwrap(), &ints(4, &[3, 5, -1]));
        assert_eq!(sol.dimension(), 0);
    }

    #[test]
    fn out_of_range_constraint() {
        assert!(linear_solve(&[ints(3, &[1])], &[(3, Rational::new())]).is_err());
    }

    #[test]
    fn echelon_reduces_above_pivots() {
        let rows = [ints(5, &[0, 1, 3, 5]), ints(5, &[0, 2, 1, 0, 7])];
        let e = echelonize(&rows);
        assert_eq!(e.pivots, vec![1, 2]);
        assert_eq!(*e.rows[0].numerator(2), 0);
        assert_eq!(e.rows[0].coeff(1), 1);
        assert_eq!(e.rows[1].coeff(2), 1);
        for (row, c) in e.rows.iter().zip(&e.coords) {
            let mut acc = ExactSeries::zero(5);
            for (x, s) in c.iter().zip(&rows) {
                acc = acc.axpy(x, s);
            }
            assert_eq!(&acc, row);
        }
    }
}
