//! Exact rational scalars for atom coordinates and lattice keys.
//!
//! Atom coordinates are kept as `Ratio<i64>` so that recombining-lattice
//! recursion can merge equal partial sums exactly; floating point enters only
//! when a payoff or moment is evaluated.

use crate::error::{Error, Result};
use num_rational::Ratio;

pub type Rat = Ratio<i64>;

pub fn rat(n: i64, d: i64) -> Rat {
    Ratio::new(n, d)
}

pub fn to_f64(r: &Rat) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Parses `"3"`, `"-5/8"`, or an exact decimal literal like `"0.25"`.
///
/// Decimals are read base-10 exactly (`"0.1"` becomes 1/10), so model files
/// stay exact regardless of binary representability.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || Error::Parse(format!("cannot parse rational from {s:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| bad())?;
        let d: i64 = den.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let i: i64 = if int == "-" || int.is_empty() {
            0
        } else {
            int.trim().parse().map_err(|_| bad())?
        };
        if frac.is_empty() || frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let f: i64 = frac.parse().map_err(|_| bad())?;
        let den = 10i64.pow(frac.len() as u32);
        let mag = Ratio::new(i.abs(), 1) + Ratio::new(f, den);
        return Ok(if neg || i < 0 { -mag } else { mag });
    }
    let n: i64 = s.parse().map_err(|_| bad())?;
    Ok(Ratio::from_integer(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integers_fractions_decimals() {
        assert_eq!(parse_rat("3").unwrap(), rat(3, 1));
        assert_eq!(parse_rat("-5/8").unwrap(), rat(-5, 8));
        assert_eq!(parse_rat("0.25").unwrap(), rat(1, 4));
        assert_eq!(parse_rat("-0.1").unwrap(), rat(-1, 10));
        assert_eq!(parse_rat(" 7 / 2 ").unwrap(), rat(7, 2));
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "x", "1/0", "1.2.3", "0x10"] {
            assert!(parse_rat(s).is_err(), "should reject {s:?}");
        }
    }
}
