//! Text format: a header line `# prec=<M>` followed by one line
//! `exponent,numerator/denominator` per nonzero coefficient.

use std::fmt::Write as _;

use rug::{Integer, Rational};

use super::ExactSeries;
use crate::error::{Error, Result};

impl ExactSeries {
    pub fn to_text(&self) -> String {
        let mut out = format!("# prec={}\n", self.prec);
        self.write_coefficient_lines(&mut out);
        out
    }

    /// Appends `exponent,num/den` lines for the nonzero coefficients.
    pub fn write_coefficient_lines(&self, out: &mut String) {
        for (e, _) in self.nonzero_numerators() {
            let c = self.coeff(e);
            let _ = writeln!(out, "{},{}/{}", e, c.numer(), c.denom());
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let fields = parse_header(header, 1)?;
        let prec = header_value(&fields, "prec", 1)?;
        Self::parse_coefficient_lines(prec, lines.map(|(i, l)| (i + 1, l)))
    }

    /// Parses `exponent,value` lines (`value` an integer or `num/den`).
    pub fn parse_coefficient_lines<'a>(
        prec: usize,
        lines: impl Iterator<Item = (usize, &'a str)>,
    ) -> Result<Self> {
        let mut terms = Vec::new();
        let mut last: Option<usize> = None;
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno, msg };
            let (e, v) = line
                .split_once(',')
                .ok_or_else(|| err(format!("expected `exponent,value`, got `{line}`")))?;
            let e: usize = e.parse().map_err(|_| err(format!("bad exponent `{e}`")))?;
            if e >= prec {
                return Err(err(format!("exponent {e} not below prec {prec}")));
            }
            if last.is_some_and(|l| l >= e) {
                return Err(err(format!("exponent {e} out of order")));
            }
            last = Some(e);
            terms.push((e, parse_rational(v).ok_or_else(|| err(format!("bad value `{v}`")))?));
        }
        Ok(ExactSeries::from_rationals(prec, &terms))
    }
}

pub(crate) fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: Integer = n.trim().parse().ok()?;
            let d: Integer = d.trim().parse().ok()?;
            (d != 0).then(|| Rational::from((n, d)))
        }
        None => s.parse::<Integer>().ok().map(Rational::from),
    }
}

/// Splits `# key=value key=value` into pairs.
pub fn parse_header(line: &str, lineno: usize) -> Result<Vec<(String, String)>> {
    let body = line.trim().strip_prefix('#').ok_or_else(|| Error::Parse {
        line: lineno,
        msg: format!("expected header starting with `#`, got `{line}`"),
    })?;
    body.split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: format!("malformed header field `{kv}`"),
                })
        })
        .collect()
}

pub fn header_value<T: std::str::FromStr>(
    fields: &[(String, String)],
    key: &str,
    lineno: usize,
) -> Result<T> {
    let v = fields
        .iter()
        .find(|(k, _)| k == key)
        .ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("header lacks `{key}`"),
        })?;
    v.1.parse().map_err(|_| Error::Parse {
        line: lineno,
        msg: format!("bad value `{}` for `{key}`", v.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn format_example() {
        let s = ExactSeries::from_rationals(
            5,
            &[(1, Rational::from((1, 2))), (3, Rational::from(-4))],
        );
        assert_eq!(s.to_text(), "# prec=5\n1,1/2\n3,-4/1\n");
        assert_eq!(ExactSeries::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExactSeries::parse("").is_err());
        assert!(ExactSeries::parse("prec=3\n").is_err());
        assert!(ExactSeries::parse("# prec=3\n3,1/1\n").is_err());
        assert!(ExactSeries::parse("# prec=3\n1,1/0\n").is_err());
        assert!(ExactSeries::parse("# prec=3\n2,1\n1,1\n").is_err());
        match ExactSeries::parse("# prec=3\n0,1\nx\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(v in proptest::collection::vec((-10i64.pow(12)..10i64.pow(12), 1i64..1000), 0..60)) {
            let terms: Vec<(usize, Rational)> = v.iter().enumerate()
                .map(|(i, &(n, d))| (i * 3, Rational::from((n, d)))).collect();
            let s = ExactSeries::from_rationals(200, &terms);
            let text = s.to_text();
            let back = ExactSeries::parse(&text).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
