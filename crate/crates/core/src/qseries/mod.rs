//! Exact truncated power series `Σ_{n<prec} c(n) qⁿ` with rational
//! coefficients, stored as integer numerators over a common denominator.

mod io;
mod linalg;
mod ntt;

use std::fmt;

use rug::{Integer, Rational};

pub use io::{header_value, parse_header};
pub use linalg::{echelonize, linear_solve, Echelon, LinearSolution};

/// How [`ExactSeries::mul_with`] multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Pick by estimated cost.
    Auto,
    /// Accumulate products of nonzero terms directly.
    Schoolbook,
    /// Residue-number-system transform convolution.
    Transform,
}

#[derive(Clone, Debug)]
enum Terms {
    /// Ascending exponents, no zero entries.
    Sparse(Vec<(usize, Integer)>),
    /// One entry per exponent `0..prec`.
    Dense(Vec<Integer>),
}

/// Truncated q-series with exact rational coefficients.
///
/// Coefficients are `numerator(n) / denom` with `denom > 0` and the
/// numerators and `denom` jointly coprime.
#[derive(Clone, Debug)]
pub struct ExactSeries {
    prec: usize,
    denom: Integer,
    terms: Terms,
}

impl ExactSeries {
    pub fn zero(prec: usize) -> Self {
        ExactSeries {
            prec,
            denom: Integer::from(1),
            terms: Terms::Sparse(Vec::new()),
        }
    }

    pub fn one(prec: usize) -> Self {
        Self::monomial(0, Integer::from(1), prec)
    }

    /// `c·q^e` (zero if `e ≥ prec`).
    pub fn monomial(e: usize, c: Integer, prec: usize) -> Self {
        Self::from_terms(prec, vec![(e, c)])
    }

    /// Integer series from a dense coefficient list; entries past `prec`
    /// are dropped and missing ones are zero.
    pub fn from_integers(prec: usize, mut coeffs: Vec<Integer>) -> Self {
        coeffs.resize(prec, Integer::new());
        Self::build(prec, Integer::from(1), Terms::Dense(coeffs))
    }

    /// Integer series from `(exponent, coefficient)` pairs in any order;
    /// repeated exponents are summed.
    pub fn from_terms(prec: usize, mut terms: Vec<(usize, Integer)>) -> Self {
        terms.retain(|(e, c)| *e < prec && *c != 0);
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, Integer)> = Vec::with_capacity(terms.len());
        for (e, c) in terms {
            match merged.last_mut() {
                Some((le, lc)) if *le == e => *lc += c,
                _ => merged.push((e, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0);
        Self::build(prec, Integer::from(1), Terms::Sparse(merged))
    }

    /// Series from rational `(exponent, coefficient)` pairs.
    pub fn from_rationals(prec: usize, terms: &[(usize, Rational)]) -> Self {
        let mut den = Integer::from(1);
        for (_, c) in terms {
            den.lcm_mut(c.denom());
        }
        let nums = terms
            .iter()
            .map(|(e, c)| (*e, (c.numer() * Integer::from(&den / c.denom()))))
            .collect();
        let mut s = Self::from_terms(prec, nums);
        s.denom = den;
        s.normalize();
        s
    }

    fn build(prec: usize, denom: Integer, terms: Terms) -> Self {
        let mut s = ExactSeries { prec, denom, terms };
        s.normalize();
        s
    }

    pub fn prec(&self) -> usize {
        self.prec
    }

    pub fn denom(&self) -> &Integer {
        &self.denom
    }

    pub fn is_integral(&self) -> bool {
        self.denom == 1
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.terms, Terms::Sparse(_))
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }

    /// Number of nonzero coefficients.
    pub fn nnz(&self) -> usize {
        match &self.terms {
            Terms::Sparse(v) => v.len(),
            Terms::Dense(v) => v.iter().filter(|c| **c != 0).count(),
        }
    }

    /// Exponent of the first nonzero coefficient, or `prec` for the zero
    /// series.
    pub fn valuation(&self) -> usize {
        match &self.terms {
            Terms::Sparse(v) => v.first().map_or(self.prec, |t| t.0),
            Terms::Dense(v) => v.iter().position(|c| *c != 0).unwrap_or(self.prec),
        }
    }

    /// Numerator of the coefficient of `qⁿ` (over [`denom`](Self::denom)).
    ///
    /// # Panics
    /// If `n ≥ prec`.
    pub fn numerator(&self, n: usize) -> &Integer {
        assert!(n < self.prec, "coefficient q^{n} requested beyond prec {}", self.prec);
        static ZERO: Integer = Integer::ZERO;
        match &self.terms {
            Terms::Sparse(v) => match v.binary_search_by_key(&n, |t| t.0) {
                Ok(i) => &v[i].1,
                Err(_) => &ZERO,
            },
            Terms::Dense(v) => &v[n],
        }
    }

    /// Coefficient of `qⁿ`.
    ///
    /// # Panics
    /// If `n ≥ prec`.
    pub fn coeff(&self, n: usize) -> Rational {
        Rational::from((self.numerator(n).clone(), self.denom.clone()))
    }

    /// Coefficient of `qⁿ`, or `None` past the precision.
    pub fn get(&self, n: usize) -> Option<Rational> {
        (n < self.prec).then(|| self.coeff(n))
    }

    /// Integer coefficient, `None` if it is not an integer or `n ≥ prec`.
    pub fn integer_coeff(&self, n: usize) -> Option<Integer> {
        if n >= self.prec {
            return None;
        }
        let num = self.numerator(n);
        num.is_divisible(&self.denom)
            .then(|| Integer::from(num / &self.denom))
    }

    /// Nonzero `(exponent, numerator)` pairs in ascending order.
    pub fn nonzero_numerators(&self) -> Box<dyn Iterator<Item = (usize, &Integer)> + '_> {
        match &self.terms {
            Terms::Sparse(v) => Box::new(v.iter().map(|(e, c)| (*e, c))),
            Terms::Dense(v) => Box::new(v.iter().enumerate().filter(|(_, c)| **c != 0)),
        }
    }

    /// Dense numerator vector of length `prec`.
    pub fn numerators_dense(&self) -> Vec<Integer> {
        match &self.terms {
            Terms::Dense(v) => v.clone(),
            Terms::Sparse(v) => {
                let mut out = vec![Integer::new(); self.prec];
                for (e, c) in v {
                    out[*e] = c.clone();
                }
                out
            }
        }
    }

    /// Restrict to exponents `< prec` (no-op if already shorter).
    pub fn truncate(&self, prec: usize) -> Self {
        let prec = prec.min(self.prec);
        let terms = match &self.terms {
            Terms::Sparse(v) => Terms::Sparse(v.iter().filter(|t| t.0 < prec).cloned().collect()),
            Terms::Dense(v) => Terms::Dense(v[..prec].to_vec()),
        };
        Self::build(prec, self.denom.clone(), terms)
    }

    /// Multiply by `q^k`; the precision grows by `k` because the new low
    /// coefficients are known to vanish.
    pub fn shift(&self, k: usize) -> Self {
        let terms = match &self.terms {
            Terms::Sparse(v) => Terms::Sparse(v.iter().map(|(e, c)| (e + k, c.clone())).collect()),
            Terms::Dense(v) => {
                let mut out = vec![Integer::new(); k];
                out.extend(v.iter().cloned());
                Terms::Dense(out)
            }
        };
        Self::build(self.prec + k, self.denom.clone(), terms)
    }

    pub fn neg(&self) -> Self {
        let mut s = self.clone();
        s.map_numerators(|c| *c = Integer::from(-&*c));
        s
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if *c == 0 {
            return Self::zero(self.prec);
        }
        let mut s = self.clone();
        let num = c.numer().clone();
        s.map_numerators(|x| *x *= &num);
        s.denom *= c.denom();
        s.normalize();
        s
    }

    pub fn scale_int(&self, c: &Integer) -> Self {
        self.scale(&Rational::from(c))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(&Rational::from(1), other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(&Rational::from(-1), other)
    }

    /// `self + c·other`, at the smaller of the two precisions.
    pub fn axpy(&self, c: &Rational, other: &Self) -> Self {
        let prec = self.prec.min(other.prec);
        if *c == 0 || other.is_zero() {
            return self.truncate(prec);
        }
        // self.num/d1 + (cn/cd)(other.num/d2) over d1·cd·d2 / g
        let d1 = &self.denom;
        let d2 = Integer::from(&other.denom * c.denom());
        let g = Integer::from(d1.gcd_ref(&d2));
        let f1 = Integer::from(&d2 / &g);
        let f2 = Integer::from(d1 / &g) * c.numer();
        let denom = Integer::from(d1 * &f1);
        let dense = !self.is_sparse() || !other.is_sparse();
        let terms = if dense {
            let mut out: Vec<Integer> = vec![Integer::new(); prec];
            for (e, x) in self.nonzero_numerators() {
                if e < prec {
                    out[e] = Integer::from(x * &f1);
                }
            }
            for (e, x) in other.nonzero_numerators() {
                if e < prec {
                    out[e] += x * &f2;
                }
            }
            Terms::Dense(out)
        } else {
            let mut out: Vec<(usize, Integer)> = Vec::new();
            for (e, x) in self.nonzero_numerators() {
                if e < prec {
                    out.push((e, Integer::from(x * &f1)));
                }
            }
            for (e, x) in other.nonzero_numerators() {
                if e < prec {
                    out.push((e, Integer::from(x * &f2)));
                }
            }
            out.sort_by_key(|t| t.0);
            let mut merged: Vec<(usize, Integer)> = Vec::with_capacity(out.len());
            for (e, x) in out {
                match merged.last_mut() {
                    Some((le, lx)) if *le == e => *lx += x,
                    _ => merged.push((e, x)),
                }
            }
            merged.retain(|t| t.1 != 0);
            Terms::Sparse(merged)
        };
        Self::build(prec, denom, terms)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_with(other, Strategy::Auto)
    }

    pub fn mul_with(&self, other: &Self, strategy: Strategy) -> Self {
        let prec = self.prec.min(other.prec);
        let denom = Integer::from(&self.denom * &other.denom);
        if self.is_zero() || other.is_zero() {
            return Self::zero(prec);
        }
        let strategy = match strategy {
            Strategy::Auto => choose_strategy(self, other, prec),
            s => s,
        };
        let terms = match strategy {
            Strategy::Transform => {
                let a = self.numerators_dense();
                let b = other.numerators_dense();
                Terms::Dense(ntt::convolve(&a, &b, prec))
            }
            _ => {
                let (small, large) = if self.nnz() <= other.nnz() {
                    (self, other)
                } else {
                    (other, self)
                };
                let large_terms: Vec<(usize, &Integer)> = large.nonzero_numerators().collect();
                let mut out: Vec<Integer> = vec![Integer::new(); prec];
                for (e1, x) in small.nonzero_numerators() {
                    for &(e2, y) in &large_terms {
                        if e1 + e2 >= prec {
                            break;
                        }
                        out[e1 + e2] += x * y;
                    }
                }
                Terms::Dense(out)
            }
        };
        Self::build(prec, denom, terms)
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    /// `selfᵉ` by repeated squaring (`self⁰ = 1`).
    pub fn pow(&self, e: u32) -> Self {
        if e == 0 {
            return Self::one(self.prec);
        }
        let mut result: Option<Self> = None;
        let mut base = self.clone();
        let mut e = e;
        loop {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.mul(&base),
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.square();
        }
        result.expect("e > 0")
    }

    fn map_numerators(&mut self, mut f: impl FnMut(&mut Integer)) {
        match &mut self.terms {
            Terms::Sparse(v) => v.iter_mut().for_each(|(_, c)| f(c)),
            Terms::Dense(v) => v.iter_mut().for_each(f),
        }
    }

    /// Reduce to lowest terms and pick the storage layout.
    fn normalize(&mut self) {
        assert!(self.denom != 0, "zero denominator");
        if self.denom < 0 {
            self.denom = Integer::from(-&self.denom);
            self.map_numerators(|c| *c = Integer::from(-&*c));
        }
        let mut g = self.denom.clone();
        if g != 1 {
            for (_, c) in self.nonzero_numerators() {
                g.gcd_mut(c);
                if g == 1 {
                    break;
                }
            }
        }
        let nnz = self.nnz();
        if nnz == 0 {
            self.denom = Integer::from(1);
            self.terms = Terms::Sparse(Vec::new());
            return;
        }
        if g != 1 {
            self.map_numerators(|c| c.div_exact_mut(&g));
            self.denom.div_exact_mut(&g);
        }
        let want_sparse = nnz * 8 <= self.prec;
        match (&mut self.terms, want_sparse) {
            (Terms::Dense(v), true) => {
                let sparse = v
                    .iter_mut()
                    .enumerate()
                    .filter(|(_, c)| **c != 0)
                    .map(|(e, c)| (e, std::mem::take(c)))
                    .collect();
                self.terms = Terms::Sparse(sparse);
            }
            (Terms::Sparse(v), false) => {
                let mut dense = vec![Integer::new(); self.prec];
                for (e, c) in v.drain(..) {
                    dense[e] = c;
                }
                self.terms = Terms::Dense(dense);
            }
            _ => {}
        }
    }
}

fn choose_strategy(a: &ExactSeries, b: &ExactSeries, prec: usize) -> Strategy {
    let (na, nb) = (a.nnz() as f64, b.nnz() as f64);
    let limbs = |s: &ExactSeries| {
        let bits = s.nonzero_numerators().map(|(_, c)| c.significant_bits()).max().unwrap_or(1);
        (bits as f64 / 64.0).ceil().max(1.0)
    };
    let (la, lb) = (limbs(a), limbs(b));
    let pairs = (na * nb).min(na * prec as f64).min(nb * prec as f64);
    let direct = pairs * la * lb * 12.0;
    let len_a = prec.min(a.prec) as f64;
    let len_b = prec.min(b.prec) as f64;
    let n = (len_a + len_b).max(2.0).log2().ceil().exp2();
    let primes = ((la + lb) * 64.0 / 61.0).ceil() + 1.0;
    let transform = primes * (3.0 * n * n.log2() * 3.0 + (len_a * la + len_b * lb) * 4.0)
        + prec as f64 * primes * primes * 6.0;
    if direct <= transform {
        Strategy::Schoolbook
    } else {
        Strategy::Transform
    }
}

impl PartialEq for ExactSeries {
    fn eq(&self, other: &Self) -> bool {
        if self.prec != other.prec || self.denom != other.denom || self.nnz() != other.nnz() {
            return false;
        }
        self.nonzero_numerators()
            .zip(other.nonzero_numerators())
            .all(|((e1, c1), (e2, c2))| e1 == e2 && c1 == c2)
    }
}

impl Eq for ExactSeries {}

impl fmt::Display for ExactSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, _) in self.nonzero_numerators().take(12) {
            let c = self.coeff(e);
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match e {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})q")?,
                _ => write!(f, "({c})q^{e}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(q^{})", self.prec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert_eq, proptest, ProptestConfig};
    use proptest::strategy::Strategy as _;

    fn theta(prec: usize) -> ExactSeries {
        let mut t = vec![(0, Integer::from(1))];
        let mut m = 1;
        while m * m < prec {
            t.push((m * m, Integer::from(2)));
            m += 1;
        }
        ExactSeries::from_terms(prec, t)
    }

    fn ints(prec: usize, v: &[i64]) -> ExactSeries {
        ExactSeries::from_integers(prec, v.iter().map(|&x| Integer::from(x)).collect())
    }

    /// Lattice-point count `r_s(n)` by brute enumeration.
    fn r_count(s: usize, n: i64) -> i64 {
        fn go(s: usize, n: i64) -> i64 {
            if s == 0 {
                return (n == 0) as i64;
            }
            let mut total = 0;
            let r = (n as f64).sqrt() as i64;
            for x in -r - 1..=r + 1 {
                if x * x <= n {
                    total += go(s - 1, n - x * x);
                }
            }
            total
        }
        go(s, n)
    }

    #[test]
    fn difference_of_squares() {
        let a = ints(3, &[1, 1]);
        let b = ints(3, &[1, -1]);
        assert_eq!(a.mul(&b), ints(3, &[1, 0, -1]));
    }

    #[test]
    fn theta_squared_counts_lattice_points() {
        let t = theta(5);
        let t2 = t.mul(&t);
        assert_eq!(t2, ints(5, &[1, 4, 4, 0, 4]));
        let t4 = theta(60).pow(4);
        assert_eq!(*t4.numerator(1), 8);
        for n in 0..60 {
            assert_eq!(*t4.numerator(n), r_count(4, n as i64));
        }
    }

    #[test]
    fn pow_examples() {
        let a = ints(3, &[1, -1]);
        assert_eq!(a.pow(0), ExactSeries::one(3));
        assert_eq!(a.pow(2), ints(3, &[1, -2, 1]));
        assert_eq!(a.mul(&ExactSeries::one(3)), a);
    }

    #[test]
    fn precision_is_min_and_shift_extends() {
        let q = ExactSeries::monomial(1, Integer::from(1), 10);
        let a = ints(10, &[1, 2, 3]);
        assert_eq!(a.mul(&q).prec(), 10);
        assert_eq!(a.mul(&ints(7, &[1])).prec(), 7);
        assert_eq!(q.shift(2).prec(), 12);
        assert_eq!(*q.shift(2).numerator(3), 1);
    }

    #[test]
    fn rational_coefficients() {
        let a = ExactSeries::from_rationals(
            4,
            &[(0, Rational::from((1, 2))), (2, Rational::from((-3, 4)))],
        );
        assert_eq!(a.denom(), &Integer::from(4));
        assert_eq!(a.coeff(2), Rational::from((-3, 4)));
        let b = a.scale(&Rational::from(4));
        assert!(b.is_integral());
        assert_eq!(b, ints(4, &[2, 0, -3]));
        let z = a.sub(&a);
        assert!(z.is_zero());
        assert_eq!(z.denom(), &Integer::from(1));
    }

    #[test]
    fn sparse_stays_sparse_until_dense_product() {
        let t = theta(10_000);
        assert!(t.is_sparse());
        assert!(!t.mul(&t).is_sparse());
    }

    #[test]
    fn strategies_agree_on_large_dense_product() {
        let prec = 3000;
        let a = ExactSeries::from_integers(
            prec,
            (0..prec as i64).map(|i| Integer::from(i * i - 7 * i + 3) << 70).collect(),
        );
        let b = theta(prec).pow(3);
        let s = a.mul_with(&b, super::Strategy::Schoolbook);
        let t = a.mul_with(&b, super::Strategy::Transform);
        assert_eq!(s, t);
    }

    fn arb_series(prec: usize) -> impl proptest::strategy::Strategy<Value = ExactSeries> {
        proptest::collection::vec((-1000i64..1000, 1i64..6), 0..prec).prop_map(move |v| {
            let terms: Vec<(usize, Rational)> = v
                .iter()
                .enumerate()
                .map(|(i, &(n, d))| (i, Rational::from((n, d))))
                .collect();
            ExactSeries::from_rationals(prec, &terms)
        })
    }

    fn schoolbook_oracle(a: &ExactSeries, b: &ExactSeries) -> Vec<Rational> {
        let prec = a.prec().min(b.prec());
        let mut out = vec![Rational::new(); prec];
        for i in 0..prec {
            for j in 0..prec - i {
                out[i + j] += a.coeff(i) * b.coeff(j);
            }
        }
        out
    }



    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn mul_matches_schoolbook_oracle(a in arb_series(200), b in arb_series(200)) {
            let want = schoolbook_oracle(&a, &b);
            for strategy in [super::Strategy::Auto, super::Strategy::Schoolbook, super::Strategy::Transform] {
                let got = a.mul_with(&b, strategy);
                for (n, w) in want.iter().enumerate() {
                    prop_assert_eq!(&got.coeff(n), w);
                }
            }
        }

        #[test]
        fn ring_axioms(a in arb_series(30), b in arb_series(30), c in arb_series(30)) {
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
            prop_assert_eq!(a.mul(&b), b.mul(&a));
            prop_assert_eq!(a.add(&b).sub(&b), a);
        }
    }
}
