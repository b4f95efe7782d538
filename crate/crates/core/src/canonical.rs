//! Canonical rendering of reals: nine significant digits.
//!
//! Values are rounded before serialization so that a load→save cycle of an
//! already-canonical document reproduces it byte for byte.

use serde::Serializer;

pub const SIGNIFICANT_DIGITS: usize = 9;

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

pub fn real<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig(*x))
}

pub fn opt_real<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&round_sig(*v)),
        None => s.serialize_none(),
    }
}

pub fn reals<S: Serializer, const N: usize>(xs: &[f64; N], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(N)?;
    for x in xs {
        t.serialize_element(&round_sig(*x))?;
    }
    t.end()
}

pub fn real_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut t = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        t.serialize_element(&round_sig(*x))?;
    }
    t.end()
}

pub fn opt_reals<S: Serializer, const N: usize>(xs: &Option<[f64; N]>, s: S) -> Result<S::Ok, S::Error> {
    match xs {
        Some(v) => s.serialize_some(&v.map(round_sig)[..]),
        None => s.serialize_none(),
    }
}

pub fn opt_real_vec<S: Serializer>(xs: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut t = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        t.serialize_element(&x.map(round_sig))?;
    }
    t.end()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_idempotent() {
        for x in [1.0 / 3.0, -2.0f64.sqrt(), 6.02214076e23, 1e-300, 0.1 + 0.2] {
            let once = round_sig(x);
            assert_eq!(round_sig(once), once);
            assert!(((once - x) / x).abs() < 1e-8);
        }
        assert_eq!(round_sig(0.0), 0.0);
    }
}
