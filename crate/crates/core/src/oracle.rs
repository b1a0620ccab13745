//! Exact and Monte Carlo oracles for hitting times, binomial tails and
//! local times of the simple random walk.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::bigreal::ln_f64;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, ORACLE};
use crate::stats::{wilson, Moments};
use crate::walk::{sample_next_from_origin, StepSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactDp,
    ExactSum,
    ClosedForm,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailEstimate {
    pub value: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    /// Wilson interval at four sigmas.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<(f64, f64)>,
}

impl TailEstimate {
    pub fn exact(value: f64, method: Method) -> Self {
        TailEstimate { value, method, trials: None, hits: None, stderr: None, interval: None }
    }

    pub fn monte_carlo(hits: u64, trials: u64) -> Self {
        let p = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        let se = if trials == 0 { f64::INFINITY } else { (p * (1.0 - p) / trials as f64).sqrt() };
        TailEstimate {
            value: p,
            method: Method::MonteCarlo,
            trials: Some(trials),
            hits: Some(hits),
            stderr: Some(se),
            interval: Some(wilson(hits, trials, 4.0)),
        }
    }

    /// value - k stderr, or the value itself for exact methods.
    pub fn lower(&self, k: f64) -> f64 {
        self.value - k * self.stderr.unwrap_or(0.0)
    }
}

/// The exact dyadic rational equal to an f64.
pub fn f64_to_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("{x} is not finite")))
}

fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let ln = ln_f64(&r.numer().abs().to_biguint().unwrap()) - ln_f64(&r.denom().to_biguint().unwrap());
    r.to_f64().filter(|v| *v != 0.0 && v.is_finite()).unwrap_or_else(|| ln.exp())
}

fn binom_row(n: u64) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = BigUint::one();
    row.push(c.clone());
    for k in 1..=n {
        c = c * (n - k + 1) / k;
        row.push(c.clone());
    }
    row
}

/// Pr(Y > p_bar n) for Y ~ Bin(n, p), exactly as a rational.
pub fn psi_bin_exact(n: u64, p: &BigRational, p_bar: &BigRational) -> Result<BigRational> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    if *p < zero || *p > one || *p_bar < zero || *p_bar > one {
        return Err(Error::Domain("p and p_bar must lie in [0, 1]".into()));
    }
    let thr: BigInt = (p_bar * BigRational::from_integer(BigInt::from(n))).floor().to_integer();
    let kmin = (thr + BigInt::one()).to_u64().unwrap_or(u64::MAX);
    if kmin > n {
        return Ok(zero);
    }
    let q = &one - p;
    let row = binom_row(n);
    // common denominator d^n with p = a/d, q = b/d
    let d: BigInt = p.denom().lcm(q.denom());
    let a = p.numer() * (&d / p.denom());
    let b = q.numer() * (&d / q.denom());
    let mut sum = BigInt::zero();
    let mut apow = num_traits::Pow::pow(&a, kmin);
    for k in kmin..=n {
        let bpow = num_traits::Pow::pow(&b, n - k);
        sum += BigInt::from(row[k as usize].clone()) * &apow * bpow;
        apow *= &a;
    }
    Ok(BigRational::new(sum, num_traits::Pow::pow(&d, n)))
}

/// Pr(Y > p_bar n) with p and p_bar taken exactly from their f64 values.
pub fn psi_bin(n: u64, p: f64, p_bar: f64) -> Result<f64> {
    let v = psi_bin_exact(n, &f64_to_rational(p)?, &f64_to_rational(p_bar)?)?;
    Ok(rational_to_f64(&v))
}

/// exp(-n (1-t)^2 p_bar^2) and whether t p_bar >= p.
pub fn chernoff_bound(n: u64, p: f64, p_bar: f64, t: f64) -> (f64, bool) {
    let premise = t * p_bar >= p;
    ((-(n as f64) * (1.0 - t).powi(2) * p_bar * p_bar).exp(), premise)
}

/// Whether the exact tail is strictly below the Chernoff bound, compared in log space.
pub fn chernoff_holds(n: u64, p: f64, p_bar: f64, t: f64) -> Result<bool> {
    let psi = psi_bin_exact(n, &f64_to_rational(p)?, &f64_to_rational(p_bar)?)?;
    if psi.is_zero() {
        return Ok(true);
    }
    let ln_psi = ln_f64(&psi.numer().to_biguint().unwrap()) - ln_f64(&psi.denom().to_biguint().unwrap());
    Ok(ln_psi < -(n as f64) * (1.0 - t).powi(2) * p_bar * p_bar)
}

/// E and Var of the exit time of (-L, L) from n.
pub fn gambler_moments(l: i64, n: i64) -> Result<(BigRational, BigRational)> {
    if n.abs() > l {
        return Err(Error::Domain(format!("|n| = {} exceeds L = {l}", n.abs())));
    }
    let l2 = BigInt::from(l) * l;
    let n2 = BigInt::from(n) * n;
    let e = &l2 - &n2;
    let var = BigRational::new(BigInt::from(2) * &e * (&l2 + &n2 - 1), BigInt::from(3));
    Ok((BigRational::from_integer(e), var))
}

/// One step of the killed walk on -L+1..L-1, returning the absorbed mass.
fn dp_step(v: &[f64], out: &mut [f64]) -> f64 {
    let w = v.len();
    out.iter_mut().for_each(|x| *x = 0.0);
    let mut lost = 0.0;
    for i in 0..w {
        let h = v[i] * 0.5;
        if i == 0 {
            lost += h;
        } else {
            out[i - 1] += h;
        }
        if i + 1 == w {
            lost += h;
        } else {
            out[i + 1] += h;
        }
    }
    lost
}

/// Pr(next(w, L, 0) > N) for N = 0..=n_max.
pub fn next_tail_curve(l: u64, n_max: usize) -> Vec<f64> {
    assert!(l >= 1);
    let w = (2 * l - 1) as usize;
    let mut v = vec![0.0; w];
    v[(l - 1) as usize] = 1.0;
    let mut out = vec![0.0; w];
    let mut tails = Vec::with_capacity(n_max + 1);
    tails.push(1.0);
    for _ in 0..n_max {
        dp_step(&v, &mut out);
        std::mem::swap(&mut v, &mut out);
        tails.push(v.iter().sum());
    }
    tails
}

pub fn next_tail_exact(l: u64, n: usize) -> f64 {
    next_tail_curve(l, n)[n]
}

/// Exact rational Pr(next > N), with masses kept as integers over 2^N.
pub fn next_tail_rational(l: u64, n: usize) -> BigRational {
    let (v, _) = survival_dyadic(l, n);
    let s: BigInt = v.iter().sum();
    BigRational::new(s, BigInt::one() << n)
}

/// Surviving masses times 2^N and the absorbed mass times 2^N.
fn survival_dyadic(l: u64, n: usize) -> (Vec<BigInt>, BigInt) {
    let w = (2 * l - 1) as usize;
    let mut v = vec![BigInt::zero(); w];
    v[(l - 1) as usize] = BigInt::one();
    let mut lost = BigInt::zero();
    for _ in 0..n {
        let mut out = vec![BigInt::zero(); w];
        lost *= 2;
        for i in 0..w {
            if v[i].is_zero() {
                continue;
            }
            if i == 0 {
                lost += &v[i];
            } else {
                out[i - 1] += &v[i];
            }
            if i + 1 == w {
                lost += &v[i];
            } else {
                out[i + 1] += &v[i];
            }
        }
        v = out;
    }
    (v, lost)
}

/// Pr(next(w, L, 0) < N) = 1 - Pr(next > N - 1).
pub fn next_below_exact(l: u64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.0 - next_tail_exact(l, n - 1)
}

pub fn next_below_curve(l: u64, n_max: usize) -> Vec<f64> {
    let t = next_tail_curve(l, n_max);
    (0..=n_max).map(|n| if n == 0 { 0.0 } else { 1.0 - t[n - 1] }).collect()
}

/// sum_{N<T} Pr(next > N) + sum_x Pr(alive at x at time T) (L^2 - x^2), which equals L^2.
pub fn expected_next_identity(l: u64, t: usize) -> f64 {
    let w = (2 * l - 1) as usize;
    let mut v = vec![0.0; w];
    v[(l - 1) as usize] = 1.0;
    let mut out = vec![0.0; w];
    let mut acc = 0.0;
    for _ in 0..t {
        acc += v.iter().sum::<f64>();
        dp_step(&v, &mut out);
        std::mem::swap(&mut v, &mut out);
    }
    let l2 = (l * l) as f64;
    for (i, &m) in v.iter().enumerate() {
        let x = i as f64 - (l - 1) as f64;
        acc += m * (l2 - x * x);
    }
    acc
}

/// The same identity in exact arithmetic.
pub fn expected_next_identity_exact(l: u64, t: usize) -> BigRational {
    let mut acc = BigRational::zero();
    for n in 0..t {
        acc += next_tail_rational(l, n);
    }
    let (v, _) = survival_dyadic(l, t);
    let l2 = BigInt::from(l * l);
    let mut rem = BigInt::zero();
    for (i, m) in v.iter().enumerate() {
        let x = BigInt::from(i as i64 - (l as i64 - 1));
        rem += m * (&l2 - &x * &x);
    }
    acc + BigRational::new(rem, BigInt::one() << t)
}

/// exp(-N / (27 L^2)) and whether N > 80 L^2 with L >= 1000.
pub fn next_tail_bound(l: u64, n: u64, rate: f64) -> (f64, bool) {
    let l2 = (l as f64) * (l as f64);
    ((-(n as f64) * rate / l2).exp(), (n as u128) > 80 * (l as u128) * (l as u128) && l >= 1000)
}

pub const NEXT_TAIL_RATE: f64 = 1.0 / 27.0;

/// N exp(-L^2 / N).
pub fn next_below_bound(l: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    n as f64 * (-((l * l) as f64) / n as f64).exp()
}

/// 2L (1 - 1/L)^(n-1).
pub fn local_time_bound(l: u64, threshold: u64) -> f64 {
    let lf = l as f64;
    2.0 * lf * (1.0 - 1.0 / lf).powf(threshold as f64 - 1.0)
}

const CHUNK: u64 = 4096;

/// Runs `trials` Bernoulli experiments in fixed chunks with derived seeds.
fn count_hits<F>(seed: u64, tag: u64, trials: u64, f: F) -> u64
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> bool + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = crate::seed::trial_rng(seed, c, ORACLE + 16 * tag);
            let n = CHUNK.min(trials - c * CHUNK);
            (0..n).filter(|_| f(&mut rng)).count() as u64
        })
        .sum()
}

/// Exit times of (-L, L) from 0, in a fixed order for a given seed.
pub fn sample_next_times(seed: u64, l: u64, trials: u64) -> Vec<u64> {
    let chunks = trials.div_ceil(CHUNK);
    let parts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = crate::seed::trial_rng(seed, c, ORACLE + 16 * l);
            let n = CHUNK.min(trials - c * CHUNK);
            (0..n).map(|_| sample_next_from_origin(&mut rng, l)).collect()
        })
        .collect();
    parts.concat()
}

pub fn next_moments_mc(seed: u64, l: u64, trials: u64) -> Moments {
    let mut m = Moments::new();
    for x in sample_next_times(seed, l, trials) {
        m.push(x as f64);
    }
    m
}

/// Whether some site is visited more than `threshold` times before |X| = L.
fn local_time_event<R: RngCore>(rng: &mut R, l: u64, threshold: u64) -> bool {
    let w = (2 * l - 1) as usize;
    let mut counts = vec![0u64; w];
    let mut src = StepSource::new(rng);
    let mut x = (l - 1) as i64;
    loop {
        let c = &mut counts[x as usize];
        *c += 1;
        if *c > threshold {
            return true;
        }
        x += src.step() as i64;
        if x < 0 || x as usize >= w {
            return false;
        }
    }
}

pub fn local_time_tail_mc(seed: u64, l: u64, threshold: u64, trials: u64) -> Result<TailEstimate> {
    if trials == 0 || l == 0 {
        return Err(Error::Domain("trials and L must be positive".into()));
    }
    let hits = count_hits(seed, 1 + l * 1_000_003 + threshold, trials, |r| local_time_event(r, l, threshold));
    Ok(TailEstimate::monte_carlo(hits, trials))
}

/// Pr(sum of the first delta N exit times > sqrt(delta) times the sum of all N),
/// decided exactly by squaring.
pub fn prefix_sum_tail_mc(seed: u64, l: u64, n: u64, delta: &BigRational, trials: u64) -> Result<TailEstimate> {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    if !delta.is_positive() && !delta.is_zero() || *delta >= half {
        return Err(Error::Domain("delta must lie in [0, 1/2)".into()));
    }
    let dn = delta * BigRational::from_integer(BigInt::from(n));
    if !dn.is_integer() {
        return Err(Error::Domain("delta N must be an integer".into()));
    }
    if trials == 0 {
        return Err(Error::Domain("trials must be positive".into()));
    }
    let k = dn.to_integer().to_u64().unwrap() as usize;
    let (dnum, dden) = (delta.numer().to_u128().unwrap(), delta.denom().to_u128().unwrap());
    let hits = count_hits(seed, 2 + l * 7919 + n, trials, |r| {
        let xs: Vec<u64> = (0..n).map(|_| sample_next_from_origin(r, l)).collect();
        let head: u128 = xs[..k].iter().map(|&x| x as u128).sum();
        let all: u128 = xs.iter().map(|&x| x as u128).sum();
        k > 0 && head * head * dden > dnum * all * all
    });
    Ok(TailEstimate::monte_carlo(hits, trials))
}

/// Per-trial seed for oracle streams, exposed for reports.
pub fn oracle_seed(seed: u64, tag: u64) -> u64 {
    derive_seed(seed, tag, ORACLE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi_bin(2, 0.5, 0.5).unwrap(), 0.25);
        assert_eq!(psi_bin(10, 0.3, 1.0).unwrap(), 0.0);
        assert_eq!(psi_bin_exact(1, &f64_to_rational(0.3).unwrap(), &r(0, 1)).unwrap(), f64_to_rational(0.3).unwrap());
        assert_eq!(psi_bin(0, 0.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn chernoff_contract() {
        let (b, ok) = chernoff_bound(0, 0.1, 0.5, 0.5);
        assert_eq!(b, 1.0);
        assert!(ok);
        let (_, ok) = chernoff_bound(10, 0.4, 0.5, 0.5);
        assert!(!ok);
        assert!(chernoff_holds(50, 0.1, 0.5, 0.5).unwrap());
    }

    #[test]
    fn gambler_examples() {
        assert_eq!(gambler_moments(10, 0).unwrap().0, r(100, 1));
        assert_eq!(gambler_moments(2, 0).unwrap().1, r(8, 1));
        assert_eq!(gambler_moments(5, 5).unwrap(), (r(0, 1), r(0, 1)));
        assert!(gambler_moments(2, 3).is_err());
    }

    #[test]
    fn dp_examples() {
        assert_eq!(next_tail_exact(1, 1), 0.0);
        assert_eq!(next_tail_exact(1, 0), 1.0);
        assert_eq!(next_tail_rational(2, 3), r(1, 2));
        assert_eq!(next_tail_exact(2, 3), 0.5);
        assert_eq!(next_below_exact(2, 3), 0.5);
        assert_eq!(next_below_exact(5, 1), 0.0);
        assert_eq!(next_below_exact(5, 5), 0.0);
        assert!(next_below_exact(5, 6) > 0.0);
    }

    #[test]
    fn expectation_identity_is_exact() {
        for l in [1u64, 2, 3, 7] {
            for t in [0usize, 1, 5, 40] {
                assert_eq!(expected_next_identity_exact(l, t), r((l * l) as i64, 1), "L={l} T={t}");
            }
        }
        assert!((expected_next_identity(20, 3000) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn local_time_edges() {
        let e = local_time_tail_mc(1, 5, 0, 100).unwrap();
        assert_eq!(e.value, 1.0);
        let e = local_time_tail_mc(1, 3, 1_000_000, 100).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn prefix_sum_edges() {
        let e = prefix_sum_tail_mc(1, 3, 10, &r(0, 1), 50).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(prefix_sum_tail_mc(1, 3, 10, &r(1, 30), 50).is_err());
        assert!(prefix_sum_tail_mc(1, 3, 10, &r(1, 2), 50).is_err());
    }
}
