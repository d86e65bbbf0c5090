//! Exact characteristic polynomials, real-root isolation and numeric
//! eigenvectors for small rational matrices.

use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// Polynomial with rational coefficients, lowest degree first.
pub type Poly = Vec<Rational>;

/// Characteristic polynomial `det(x·I − M)` by Faddeev–LeVerrier.
pub fn charpoly(m: &[Vec<Rational>]) -> Poly {
    let n = m.len();
    let mut c = vec![Rational::new(); n + 1];
    c[n] = Rational::from(1);
    let mut mk: Vec<Vec<Rational>> = vec![vec![Rational::new(); n]; n];
    for k in 1..=n {
        // M_k = A·M_{k−1} + c_{n−k+1}·I
        let mut next = mat_mul(m, &mk);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &c[n - k + 1];
        }
        mk = next;
        let am = mat_mul(m, &mk);
        let tr: Rational = (0..n).map(|i| am[i][i].clone()).sum();
        c[n - k] = -tr / Rational::from(k as u32);
    }
    c
}

fn mat_mul(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|l| Rational::from(&a[i][l] * &b[l][j])).sum())
                .collect()
        })
        .collect()
}

pub fn eval(p: &[Rational], x: &Rational) -> Rational {
    let mut acc = Rational::new();
    for c in p.iter().rev() {
        acc *= x;
        acc += c;
    }
    acc
}

fn trim(mut p: Poly) -> Poly {
    while p.len() > 1 && *p.last().unwrap() == 0 {
        p.pop();
    }
    p
}

fn derivative(p: &[Rational]) -> Poly {
    trim(
        p.iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| (c * Rational::from(i as u32)))
            .collect(),
    )
}

fn is_zero(p: &[Rational]) -> bool {
    p.iter().all(|c| *c == 0)
}

/// Remainder of `a` divided by `b` (`b` nonzero).
fn rem(a: &[Rational], b: &[Rational]) -> Poly {
    let mut r = trim(a.to_vec());
    let b = trim(b.to_vec());
    let db = b.len() - 1;
    let lead = b[db].clone();
    while r.len() > db && !is_zero(&r) {
        let dr = r.len() - 1;
        let f = Rational::from(&r[dr] / &lead);
        for i in 0..=db {
            r[dr - db + i] -= Rational::from(&f * &b[i]);
        }
        r.pop();
        r = trim(r);
        if db == 0 {
            return vec![Rational::new()];
        }
    }
    r
}

fn gcd_degree(a: &[Rational], b: &[Rational]) -> usize {
    let mut x = trim(a.to_vec());
    let mut y = trim(b.to_vec());
    while !is_zero(&y) {
        let r = rem(&x, &y);
        x = y;
        y = r;
    }
    x.len() - 1
}

fn sturm_chain(p: &[Rational]) -> Vec<Poly> {
    let mut chain = vec![trim(p.to_vec()), derivative(p)];
    loop {
        let n = chain.len();
        if is_zero(&chain[n - 1]) || chain[n - 1].len() == 1 {
            break;
        }
        let r = rem(&chain[n - 2], &chain[n - 1]);
        if is_zero(&r) {
            break;
        }
        chain.push(r.into_iter().map(|c| -c).collect());
    }
    chain
}

fn sign_changes(chain: &[Poly], x: &Rational) -> usize {
    let signs: Vec<i32> = chain
        .iter()
        .map(|p| eval(p, x).cmp0() as i32)
        .filter(|s| *s != 0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Real roots of a squarefree rational polynomial, ascending, each as a
/// rational approximation within `2^-bits`.
///
/// Fails if the polynomial has a repeated factor or two roots closer than
/// `2^-(bits/2)`.
pub fn real_roots(p: &[Rational], bits: u32) -> Result<Vec<Rational>> {
    let p = trim(p.to_vec());
    let deg = p.len() - 1;
    if deg == 0 {
        return Ok(vec![]);
    }
    if gcd_degree(&p, &derivative(&p)) > 0 {
        return Err(Error::precision(
            "characteristic polynomial has a repeated root; eigenvalues not separable",
        ));
    }
    let lead = p[deg].clone();
    let bound: Rational = Rational::from(1)
        + p[..deg]
            .iter()
            .map(|c| Rational::from(c / &lead).abs())
            .fold(Rational::new(), |a, b| if b > a { b } else { a });
    let chain = sturm_chain(&p);
    let mut intervals = Vec::new();
    let mut stack = vec![(-bound.clone(), bound)];
    // isolate: each stack entry is a half-open interval (lo, hi]
    while let Some((lo, hi)) = stack.pop() {
        let count = sign_changes(&chain, &lo) - sign_changes(&chain, &hi);
        match count {
            0 => {}
            1 => intervals.push((lo, hi)),
            _ => {
                let mid = Rational::from(&lo + &hi) / 2u32;
                stack.push((mid.clone(), hi));
                stack.push((lo, mid));
            }
        }
    }
    intervals.sort_by(|a, b| a.0.cmp(&b.0));
    let eps = Rational::from((Integer::from(1), Integer::from(1) << bits));
    let mut roots = Vec::with_capacity(intervals.len());
    for (mut lo, mut hi) in intervals {
        if eval(&p, &hi) == 0 {
            roots.push(hi);
            continue;
        }
        let s_hi = eval(&p, &hi).cmp0();
        while Rational::from(&hi - &lo) > eps {
            let mid = Rational::from(&lo + &hi) / 2u32;
            let s = eval(&p, &mid).cmp0();
            if s == std::cmp::Ordering::Equal {
                lo = mid.clone();
                hi = mid;
                break;
            }
            if s == s_hi {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        roots.push(Rational::from(&lo + &hi) / 2u32);
    }
    let sep = Rational::from((Integer::from(1), Integer::from(1) << (bits / 2)));
    for w in roots.windows(2) {
        if Rational::from(&w[1] - &w[0]) < sep {
            return Err(Error::precision(format!(
                "eigenvalues {} and {} closer than 2^-{}; raise the working precision",
                w[0].to_f64(),
                w[1].to_f64(),
                bits / 2
            )));
        }
    }
    Ok(roots)
}

/// A vector `v` with `vᵀ(M − λI) ≈ 0` and `v₀ = 1`, by Gaussian elimination
/// with complete pivoting at `prec` bits.
pub fn left_eigenvector(m: &[Vec<Rational>], lambda: &Rational, prec: u32) -> Result<Vec<Float>> {
    let n = m.len();
    // rows of A = (M − λI)ᵀ
    let mut a: Vec<Vec<Float>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut x = m[j][i].clone();
                    if i == j {
                        x -= lambda;
                    }
                    Float::with_val(prec, &x)
                })
                .collect()
        })
        .collect();
    let mut col_perm: Vec<usize> = (0..n).collect();
    let scale = a
        .iter()
        .flatten()
        .map(|x| x.clone().abs())
        .fold(Float::with_val(prec, 0), |acc, x| if x > acc { x } else { acc });
    let tiny = Float::with_val(prec, &scale) >> (prec / 2);
    let mut rank = 0;
    for step in 0..n {
        let mut best = (step, step);
        let mut best_val = Float::with_val(prec, 0);
        for i in step..n {
            for j in step..n {
                let v = a[i][j].clone().abs();
                if v > best_val {
                    best_val = v;
                    best = (i, j);
                }
            }
        }
        if best_val <= tiny {
            break;
        }
        a.swap(step, best.0);
        for row in a.iter_mut() {
            row.swap(step, best.1);
        }
        col_perm.swap(step, best.1);
        for i in step + 1..n {
            let f = Float::with_val(prec, &a[i][step] / &a[step][step]);
            for j in step..n {
                let d = Float::with_val(prec, &f * &a[step][j]);
                a[i][j] -= d;
            }
        }
        rank += 1;
    }
    if rank != n - 1 {
        return Err(Error::precision(format!(
            "eigenspace for λ ≈ {} has dimension {}, expected 1",
            lambda.to_f64(),
            n - rank
        )));
    }
    // back substitution with the last permuted unknown fixed to 1
    let mut y = vec![Float::with_val(prec, 0); n];
    y[n - 1] = Float::with_val(prec, 1);
    for i in (0..n - 1).rev() {
        let mut s = Float::with_val(prec, 0);
        for j in i + 1..n {
            s += Float::with_val(prec, &a[i][j] * &y[j]);
        }
        y[i] = Float::with_val(prec, -s / &a[i][i]);
    }
    let mut v = vec![Float::with_val(prec, 0); n];
    for (k, &orig) in col_perm.iter().enumerate() {
        v[orig] = y[k].clone();
    }
    if v[0].is_zero() {
        return Err(Error::precision("eigenvector has vanishing first coordinate"));
    }
    let v0 = v[0].clone();
    for x in v.iter_mut() {
        *x /= &v0;
    }
    Ok(v)
}
