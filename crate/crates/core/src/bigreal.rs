//! Rigorous interval arithmetic on fixed-point big integers.
//!
//! An [`Interval`] holds `[lo, hi] * 2^-prec` and every operation rounds
//! outward, so the true value always stays inside.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: BigInt,
    pub hi: BigInt,
    pub prec: u32,
}

fn pow2(p: u32) -> BigInt {
    BigInt::one() << p as usize
}

fn div_floor(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

fn div_ceil(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

impl Interval {
    pub fn exact_int(v: &BigInt, prec: u32) -> Self {
        let x = v << prec as usize;
        Interval { lo: x.clone(), hi: x, prec }
    }

    pub fn from_u64(v: u64, prec: u32) -> Self {
        Self::exact_int(&BigInt::from(v), prec)
    }

    pub fn from_biguint(v: &BigUint, prec: u32) -> Self {
        Self::exact_int(&BigInt::from(v.clone()), prec)
    }

    pub fn from_ratio(n: &BigInt, d: &BigInt, prec: u32) -> Self {
        assert!(!d.is_zero());
        let (n, d) = if d.is_negative() { (-n, -d) } else { (n.clone(), d.clone()) };
        let s = &n << prec as usize;
        Interval { lo: div_floor(&s, &d), hi: div_ceil(&s, &d), prec }
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        Self::from_ratio(r.numer(), r.denom(), prec)
    }

    pub fn add(&self, o: &Interval) -> Interval {
        assert_eq!(self.prec, o.prec);
        Interval { lo: &self.lo + &o.lo, hi: &self.hi + &o.hi, prec: self.prec }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        assert_eq!(self.prec, o.prec);
        Interval { lo: &self.lo - &o.hi, hi: &self.hi - &o.lo, prec: self.prec }
    }

    pub fn mul_int(&self, k: &BigInt) -> Interval {
        let a = &self.lo * k;
        let b = &self.hi * k;
        if k.is_negative() {
            Interval { lo: b, hi: a, prec: self.prec }
        } else {
            Interval { lo: a, hi: b, prec: self.prec }
        }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        assert_eq!(self.prec, o.prec);
        let c = [&self.lo * &o.lo, &self.lo * &o.hi, &self.hi * &o.lo, &self.hi * &o.hi];
        let mn = c.iter().min().unwrap();
        let mx = c.iter().max().unwrap();
        let s = pow2(self.prec);
        Interval { lo: div_floor(mn, &s), hi: div_ceil(mx, &s), prec: self.prec }
    }

    /// Division by an interval that is strictly positive.
    pub fn div(&self, o: &Interval) -> Interval {
        assert_eq!(self.prec, o.prec);
        assert!(o.lo.is_positive(), "divisor interval must be positive");
        let p = self.prec as usize;
        let c = [
            (&self.lo << p, &o.lo),
            (&self.lo << p, &o.hi),
            (&self.hi << p, &o.lo),
            (&self.hi << p, &o.hi),
        ];
        let lo = c.iter().map(|(a, b)| div_floor(a, b)).min().unwrap();
        let hi = c.iter().map(|(a, b)| div_ceil(a, b)).max().unwrap();
        Interval { lo, hi, prec: self.prec }
    }

    pub fn powi(&self, e: u32) -> Interval {
        let mut acc = Interval::exact_int(&BigInt::one(), self.prec);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Natural log; requires the interval to be strictly positive.
    pub fn ln(&self) -> Interval {
        assert!(self.lo.is_positive(), "ln of a non-positive interval");
        let den = pow2(self.prec);
        let lo = ln_ratio(&self.lo, &den, self.prec).lo;
        let hi = ln_ratio(&self.hi, &den, self.prec).hi;
        Interval { lo, hi, prec: self.prec }
    }

    /// floor of the value when every point of the interval agrees.
    pub fn floor_exact(&self) -> Option<BigInt> {
        let s = pow2(self.prec);
        let a = div_floor(&self.lo, &s);
        let b = div_floor(&self.hi, &s);
        (a == b).then_some(a)
    }

    /// Nearest integer (halves round up) when every point agrees.
    pub fn round_exact(&self) -> Option<BigInt> {
        if self.prec == 0 {
            return (self.lo == self.hi).then(|| self.lo.clone());
        }
        let half = pow2(self.prec - 1);
        let shifted = Interval { lo: &self.lo + &half, hi: &self.hi + &half, prec: self.prec };
        shifted.floor_exact()
    }

    /// Some(true) if every point is < o, Some(false) if every point is >= o.
    pub fn lt(&self, o: &Interval) -> Option<bool> {
        assert_eq!(self.prec, o.prec);
        if self.hi < o.lo {
            Some(true)
        } else if self.lo >= o.hi {
            Some(false)
        } else {
            None
        }
    }

    pub fn cmp_int(&self, v: &BigInt) -> Option<Ordering> {
        let x = v << self.prec as usize;
        if self.hi < x {
            Some(Ordering::Less)
        } else if self.lo > x {
            Some(Ordering::Greater)
        } else if self.lo == x && self.hi == x {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    pub fn mid_f64(&self) -> f64 {
        let m: BigInt = (&self.lo + &self.hi) >> 1usize;
        fixed_to_f64(&m, self.prec)
    }

    pub fn lo_f64(&self) -> f64 {
        fixed_to_f64(&self.lo, self.prec)
    }

    pub fn hi_f64(&self) -> f64 {
        fixed_to_f64(&self.hi, self.prec)
    }

    /// Lower and upper rational endpoints.
    pub fn bounds(&self) -> (BigRational, BigRational) {
        let d = pow2(self.prec);
        (BigRational::new(self.lo.clone(), d.clone()), BigRational::new(self.hi.clone(), d))
    }
}

/// f64 approximation of v * 2^-prec that survives huge magnitudes.
pub fn fixed_to_f64(v: &BigInt, prec: u32) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    let bits = v.bits() as i64;
    let drop = (bits - 60).max(0);
    let top = (v >> drop as usize).to_f64().unwrap_or(f64::NAN);
    let mut e = drop - prec as i64;
    let mut x = top;
    while e != 0 && x.is_finite() && x != 0.0 {
        let step = e.clamp(-1000, 1000);
        x *= 2f64.powi(step as i32);
        e -= step;
    }
    x
}

/// ln of a BigInt / BigUint pair, approximate, for reporting.
pub fn ln_f64(v: &BigUint) -> f64 {
    let bits = v.bits() as i64;
    let drop = (bits - 60).max(0);
    let top = (v >> drop as usize).to_f64().unwrap();
    top.ln() + drop as f64 * std::f64::consts::LN_2
}

/// 2 atanh(num/den) at working precision `w`, with its error bound in ulps.
/// Requires |num/den| <= 1/3.
fn two_atanh(num: &BigInt, den: &BigInt, w: u32) -> (BigInt, BigInt) {
    let s = pow2(w);
    let z = div_floor(&(num << w as usize), den);
    let z2 = div_floor(&(&z * &z), &s);
    let mut term = z;
    let mut sum = BigInt::zero();
    let mut k: u64 = 0;
    while !term.is_zero() {
        let d = BigInt::from(2 * k + 1);
        sum += &term / &d;
        term = div_floor(&(&term * &z2), &s);
        k += 1;
        if term.abs() <= BigInt::one() {
            break;
        }
    }
    // each summand is within 3 ulps, the discarded tail within 5
    let err = BigInt::from(2 * (3 * (k + 1) + 5));
    (sum * 2, err)
}

/// Enclosure of ln(n/d) at `prec` fractional bits, n, d > 0.
pub fn ln_ratio(n: &BigInt, d: &BigInt, prec: u32) -> Interval {
    assert!(n.sign() == Sign::Plus && d.sign() == Sign::Plus, "ln needs positive arguments");
    let w = prec + 96;
    let e = n.bits() as i64 - d.bits() as i64;
    let (a, b) = if e >= 0 { (n.clone(), d << e as usize) } else { (n << (-e) as usize, d.clone()) };
    let (s_y, err_y) = two_atanh(&(&a - &b), &(&a + &b), w);
    let (ln2, err2) = two_atanh(&BigInt::one(), &BigInt::from(3), w);
    let ee = BigInt::from(e);
    let val = s_y + &ln2 * &ee;
    let err = err_y + err2 * ee.abs() + 2;
    let sh = pow2(w - prec);
    Interval { lo: div_floor(&(&val - &err), &sh), hi: div_ceil(&(&val + &err), &sh), prec }
}

pub fn ln_u(v: &BigUint, prec: u32) -> Interval {
    ln_ratio(&BigInt::from(v.clone()), &BigInt::one(), prec)
}

pub fn ln_rational(r: &BigRational, prec: u32) -> Interval {
    ln_ratio(r.numer(), r.denom(), prec)
}
