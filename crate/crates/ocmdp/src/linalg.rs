//! Exact sparse Gaussian elimination over the rationals.
//!
//! Pivots follow a Markowitz-style order (shortest active row, then the
//! column with fewest active occurrences), which keeps fill-in small on the
//! near-acyclic systems produced by Markov chains.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use thiserror::Error;

use crate::model::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("singular linear system")]
pub struct Singular;

/// Square system `A x = b` given row-wise as sparse `(column, coefficient)`
/// lists. Repeated columns within a row are summed.
pub fn solve(rows: Vec<Vec<(usize, Rational)>>, rhs: Vec<Rational>) -> Result<Vec<Rational>, Singular> {
    let n = rows.len();
    assert_eq!(rhs.len(), n, "rhs length");
    let mut a: Vec<BTreeMap<usize, Rational>> = Vec::with_capacity(n);
    for row in rows {
        let mut m: BTreeMap<usize, Rational> = BTreeMap::new();
        for (c, x) in row {
            assert!(c < n, "column out of range");
            *m.entry(c).or_insert_with(Rational::zero) += x;
        }
        m.retain(|_, x| !x.is_zero());
        a.push(m);
    }
    let mut b = rhs;
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (r, row) in a.iter().enumerate() {
        for &c in row.keys() {
            col_rows[c].insert(r);
        }
    }
    let mut queue: BTreeSet<(usize, usize)> = a.iter().enumerate().map(|(r, row)| (row.len(), r)).collect();
    let mut pivots: Vec<(usize, usize)> = Vec::with_capacity(n);
    while let Some((_, r)) = queue.pop_first() {
        let c = *a[r].keys().min_by_key(|&&c| (col_rows[c].len(), c)).ok_or(Singular)?;
        for &cc in a[r].keys() {
            col_rows[cc].remove(&r);
        }
        let pivot_row = std::mem::take(&mut a[r]);
        let pv = pivot_row[&c].clone();
        let targets: Vec<usize> = col_rows[c].iter().copied().collect();
        for r2 in targets {
            queue.remove(&(a[r2].len(), r2));
            let f = a[r2].remove(&c).expect("column index consistent") / &pv;
            col_rows[c].remove(&r2);
            for (&cc, x) in &pivot_row {
                if cc == c {
                    continue;
                }
                let e = a[r2].entry(cc).or_insert_with(Rational::zero);
                *e -= &f * x;
                if e.is_zero() {
                    a[r2].remove(&cc);
                    col_rows[cc].remove(&r2);
                } else {
                    col_rows[cc].insert(r2);
                }
            }
            let d = &f * &b[r];
            b[r2] -= d;
            queue.insert((a[r2].len(), r2));
        }
        a[r] = pivot_row;
        pivots.push((r, c));
    }
    let mut x = vec![Rational::zero(); n];
    for &(r, c) in pivots.iter().rev() {
        let mut acc = b[r].clone();
        for (&cc, v) in &a[r] {
            if cc != c {
                acc -= v * &x[cc];
            }
        }
        x[c] = acc / &a[r][&c];
    }
    Ok(x)
}
