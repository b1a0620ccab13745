use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bigreal::{ln_f64, ln_rational, ln_u, Interval};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Paper,
    Desk,
}

#[derive(Clone, Debug)]
pub struct LevelParams {
    pub l: BigUint,
    pub m_upper: BigUint,
    pub m_lower: BigUint,
    pub r_upper: BigUint,
    pub r_lower: BigUint,
    /// Exact for desk input; the midpoint of `beta_enclosure` otherwise.
    pub beta: BigRational,
    pub beta_enclosure: Option<Interval>,
}

/// Rounded value vs. its unrounded enclosure: must stay within [raw/2, 2 raw].
#[derive(Clone, Debug, Serialize)]
pub struct RoundingCheck {
    pub name: String,
    pub m: usize,
    pub within_half_to_double: bool,
}

#[derive(Clone, Debug)]
pub struct ScaleParams {
    pub mode: Mode,
    pub a: Option<BigUint>,
    pub b: Option<u64>,
    pub k: usize,
    pub alpha: BigRational,
    /// `levels[m-1]` holds level m.
    pub levels: Vec<LevelParams>,
    /// N_0..N_k when known.
    pub n: Vec<BigUint>,
    /// `branching[m-2]` is the B_m used by tests and the finder.
    pub branching: Vec<BigUint>,
    /// The floor formula, kept even when overridden.
    pub branching_formula: Vec<BigUint>,
    pub rounding: Vec<RoundingCheck>,
    pub warnings: Vec<String>,
}

/// Parses "3", "0.25", "1e-4", "2.5E3" or "1/3" exactly.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("0{ip}{fp}").parse().map_err(|_| bad())?;
    let scale = exp - fp.len() as i64;
    let ten = BigInt::from(10);
    let mut r = if scale >= 0 {
        BigRational::from_integer(digits * Pow::pow(&ten, scale as u64))
    } else {
        BigRational::new(digits, Pow::pow(&ten, (-scale) as u64))
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// A number given either as a JSON/TOML number or as an exact string.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn to_rational(&self) -> Result<BigRational> {
        match self {
            Num::Int(v) => Ok(BigRational::from_integer(BigInt::from(*v))),
            Num::Float(f) => parse_rational(&format!("{f}")),
            Num::Text(s) => parse_rational(s),
        }
    }
}

/// Explicit per-level values for desk-scale runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeskLevels {
    pub l: Vec<u64>,
    pub m_upper: Vec<u64>,
    pub m_lower: Vec<u64>,
    pub r_upper: Vec<u64>,
    pub r_lower: Vec<u64>,
    pub beta: Vec<Num>,
    pub alpha: Num,
    #[serde(default)]
    pub branching: Option<Vec<u64>>,
    #[serde(default)]
    pub n: Option<Vec<u64>>,
}

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

fn to_int(v: &BigUint) -> BigInt {
    BigInt::from(v.clone())
}

fn floor_ratio(n: &BigRational) -> BigUint {
    n.floor().to_integer().to_biguint().unwrap_or_default()
}

/// floor(M_lower_m / (beta_m M_upper_{m-1} R_upper_m (m^2 + 1))) with exact beta.
pub fn branching_formula_exact(m_lower: &BigUint, beta: &BigRational, m_upper_prev: &BigUint, r_upper: &BigUint, m: usize) -> BigUint {
    let den = beta * BigRational::from_integer(to_int(m_upper_prev) * to_int(r_upper) * BigInt::from(m * m + 1));
    if den.is_zero() {
        return BigUint::zero();
    }
    floor_ratio(&(BigRational::from_integer(to_int(m_lower)) / den))
}

/// Checks the ordering and positivity constraints on desk input.
pub fn validate_desk_structure(d: &DeskLevels) -> Result<()> {
    let k = d.l.len();
    if k == 0 {
        return Err(Error::InvalidParams("at least one level is required".into()));
    }
    for (name, len) in [
        ("m_upper", d.m_upper.len()),
        ("m_lower", d.m_lower.len()),
        ("r_upper", d.r_upper.len()),
        ("r_lower", d.r_lower.len()),
        ("beta", d.beta.len()),
    ] {
        if len != k {
            return Err(Error::InvalidParams(format!("{name} has {len} entries, expected {k}")));
        }
    }
    for m in 1..=k {
        let i = m - 1;
        for (name, v) in [
            ("L", d.l[i]),
            ("M_upper", d.m_upper[i]),
            ("M_lower", d.m_lower[i]),
            ("R_upper", d.r_upper[i]),
            ("R_lower", d.r_lower[i]),
        ] {
            if v < 1 {
                return Err(Error::InvalidParams(format!("{name}_{m} = {v} violates {name}_{m} >= 1")));
            }
        }
        if d.m_lower[i] > d.m_upper[i] {
            return Err(Error::InvalidParams(format!(
                "M_lower_{m} = {} > M_upper_{m} = {} violates M_lower_m <= M_upper_m",
                d.m_lower[i], d.m_upper[i]
            )));
        }
        if d.r_lower[i] > d.r_upper[i] {
            return Err(Error::InvalidParams(format!(
                "R_lower_{m} = {} > R_upper_{m} = {} violates R_lower_m <= R_upper_m",
                d.r_lower[i], d.r_upper[i]
            )));
        }
        if !d.beta[i].to_rational()?.is_positive() {
            return Err(Error::InvalidParams(format!("beta_{m} must be positive")));
        }
    }
    let alpha = d.alpha.to_rational()?;
    if alpha.is_negative() || alpha >= BigRational::one() {
        return Err(Error::InvalidParams("alpha must lie in [0, 1)".into()));
    }
    if let Some(b) = &d.branching {
        if b.len() != k.saturating_sub(1) {
            return Err(Error::InvalidParams(format!("branching must list B_2..B_{k} ({} entries)", k - 1)));
        }
        if let Some(pos) = b.iter().position(|&v| v == 0) {
            return Err(Error::InvalidParams(format!("B_{} = 0 violates B_m >= 1", pos + 2)));
        }
    }
    if let Some(n) = &d.n {
        if n.len() != k + 1 {
            return Err(Error::InvalidParams(format!("n must list N_0..N_{k}")));
        }
    }
    Ok(())
}

pub fn desk_params(d: &DeskLevels) -> Result<ScaleParams> {
    validate_desk_structure(d)?;
    let k = d.l.len();
    let mut levels = Vec::with_capacity(k);
    for i in 0..k {
        levels.push(LevelParams {
            l: big(d.l[i]),
            m_upper: big(d.m_upper[i]),
            m_lower: big(d.m_lower[i]),
            r_upper: big(d.r_upper[i]),
            r_lower: big(d.r_lower[i]),
            beta: d.beta[i].to_rational()?,
            beta_enclosure: None,
        });
    }
    let mut formula = Vec::new();
    for m in 2..=k {
        let cur = &levels[m - 1];
        formula.push(branching_formula_exact(&cur.m_lower, &cur.beta, &levels[m - 2].m_upper, &cur.r_upper, m));
    }
    let branching = match &d.branching {
        Some(b) => b.iter().map(|&v| big(v)).collect(),
        None => {
            if let Some(pos) = formula.iter().position(|b| b.is_zero()) {
                let m = pos + 2;
                let cur = &levels[m - 1];
                let need = &cur.beta
                    * BigRational::from_integer(
                        to_int(&levels[m - 2].m_upper) * to_int(&cur.r_upper) * BigInt::from(m * m + 1),
                    );
                return Err(Error::InvalidParams(format!(
                    "computed B_{m} = 0: raise M_lower_{m} to at least {} (= beta_m M_upper_{} R_upper_m (m^2+1)) or give explicit branching numbers",
                    need.ceil().to_integer(),
                    m - 1
                )));
            }
            formula.clone()
        }
    };
    Ok(ScaleParams {
        mode: Mode::Desk,
        a: None,
        b: None,
        k,
        alpha: d.alpha.to_rational()?,
        levels,
        n: d.n.as_ref().map(|v| v.iter().map(|&x| big(x)).collect()).unwrap_or_default(),
        branching,
        branching_formula: formula,
        rounding: Vec::new(),
        warnings: Vec::new(),
    })
}

#[derive(Debug)]
struct Ambiguous;

fn round_or(iv: &Interval) -> std::result::Result<BigUint, Ambiguous> {
    let v = iv.round_exact().ok_or(Ambiguous)?;
    Ok(v.to_biguint().unwrap_or_default())
}

fn floor_or(iv: &Interval) -> std::result::Result<BigUint, Ambiguous> {
    let v = iv.floor_exact().ok_or(Ambiguous)?;
    Ok(v.to_biguint().unwrap_or_default())
}

fn rounding_ok(v: &BigUint, raw: &Interval) -> bool {
    let v = Interval::from_biguint(v, raw.prec);
    let two = BigInt::from(2);
    // raw/2 <= v <= 2 raw for every point of the enclosure
    v.mul_int(&two).lo >= raw.hi && v.hi <= raw.mul_int(&two).lo
}

fn paper_at(a: &BigUint, b: u64, k: usize, prec: u32) -> std::result::Result<ScaleParams, Ambiguous> {
    let p = prec;
    let alpha_den = Pow::pow(&(a * 10u32), 4u32);
    let alpha = BigRational::new(BigInt::one(), to_int(&alpha_den));
    let ls: Vec<BigUint> = (1..=k).map(|m| a * Pow::pow(&big(m as u64), b)).collect();
    let mut prods = vec![BigUint::one()];
    for l in &ls {
        let next = prods.last().unwrap() * l;
        prods.push(next);
    }
    let iv = |v: &BigUint| Interval::from_biguint(v, p);
    let int = |v: u64| Interval::from_u64(v, p);
    let ell = |m: usize| ln_u(&(big((m * m) as u64) * &alpha_den), p);
    let mut levels = Vec::new();
    let mut rounding = Vec::new();
    for m in 1..=k {
        let l = &ls[m - 1];
        let pm2 = &prods[m] * &prods[m];
        let l2 = l * l;
        let lm = ell(m);
        let mu_raw = iv(&pm2).mul(&int(2000)).mul(&lm);
        let ml_raw = iv(&pm2).div(&ln_u(&pm2, p).mul(&int(2)).add(&lm.mul(&int(4))));
        let ru_raw = iv(&l2).mul(&int(4000)).mul(&lm);
        let rl_raw = iv(&l2).div(&ln_u(&l2, p).mul(&int(2)).add(&lm.mul(&int(16))));
        let m_upper = round_or(&mu_raw)?;
        let m_lower = round_or(&ml_raw)?;
        let r_upper = round_or(&ru_raw)?;
        let r_lower = round_or(&rl_raw)?;
        for (name, v, raw) in [
            ("M_upper", &m_upper, &mu_raw),
            ("M_lower", &m_lower, &ml_raw),
            ("R_upper", &r_upper, &ru_raw),
            ("R_lower", &r_lower, &rl_raw),
        ] {
            rounding.push(RoundingCheck { name: name.into(), m, within_half_to_double: rounding_ok(v, raw) });
        }
        // beta_m = 20 L / R_lower * ln(200 m^4 R_upper L / (alpha^2 R_lower))
        let arg = BigRational::new(
            to_int(&(big(200 * (m as u64).pow(4)) * &r_upper * l * &alpha_den * &alpha_den)),
            to_int(&r_lower),
        );
        let beta_iv = iv(&(l * 20u32)).div(&iv(&r_lower)).mul(&ln_rational(&arg, p));
        let (blo, bhi) = beta_iv.bounds();
        let beta = (blo + bhi) / BigRational::from_integer(BigInt::from(2));
        levels.push(LevelParams { l: l.clone(), m_upper, m_lower, r_upper, r_lower, beta, beta_enclosure: Some(beta_iv) });
    }
    // N_m: (L_{m+1}..L_k)^2 / N_m = 10 ln(L_{m+1}..L_k) + ln(m^2/alpha); N_0 uses 10 ln(L_1..L_k) alone.
    let mut n = Vec::new();
    let top = &prods[k];
    let n0_raw = iv(&(top * top)).div(&ln_u(top, p).mul(&int(10)));
    n.push(round_or(&n0_raw)?.max(BigUint::one()));
    for m in 1..=k {
        let q: BigUint = &prods[k] / &prods[m];
        let den = ln_u(&q, p).mul(&int(10)).add(&ell(m));
        let raw = iv(&(&q * &q)).div(&den);
        n.push(round_or(&raw)?.max(BigUint::one()));
    }
    let mut formula = Vec::new();
    for m in 2..=k {
        let cur = &levels[m - 1];
        let den = cur
            .beta_enclosure
            .as_ref()
            .unwrap()
            .mul(&iv(&(&levels[m - 2].m_upper * &cur.r_upper * big((m * m + 1) as u64))));
        formula.push(floor_or(&iv(&cur.m_lower).div(&den))?);
    }
    let mut warnings = Vec::new();
    if *a < big(1000) {
        warnings.push("A < 1000: below the admissible range".to_string());
    }
    if b < 250 {
        warnings.push("B < 250: below the admissible range".to_string());
    }
    if big(k as u64) < a * 20u32 {
        warnings.push("k < 20A: below the regime of the sinuosity probability bound".to_string());
    }
    Ok(ScaleParams {
        mode: Mode::Paper,
        a: Some(a.clone()),
        b: Some(b),
        k,
        alpha,
        levels,
        n,
        branching: formula.clone(),
        branching_formula: formula,
        rounding,
        warnings,
    })
}

/// The full schedule for (A, B, k), in exact arithmetic.
pub fn paper_params(a: &BigUint, b: u64, k: usize, strict: bool) -> Result<ScaleParams> {
    if k < 1 {
        return Err(Error::InvalidParams("k must be at least 1".into()));
    }
    if a.is_zero() || b == 0 {
        return Err(Error::InvalidParams("A and B must be positive".into()));
    }
    if strict && (*a < big(1000) || b < 250 || k < 2) {
        return Err(Error::InvalidParams("strict mode requires A >= 1000, B >= 250, k >= 2".into()));
    }
    let top = a.pow(k as u32) * (1..=k as u64).map(|m| big(m).pow(b)).product::<BigUint>();
    let mut prec = (2 * top.bits() + 64).max(128) as u32;
    loop {
        match paper_at(a, b, k, prec) {
            Ok(mut p) => {
                if k < 2 {
                    p.warnings.push("k < 2: no branching levels".into());
                }
                return Ok(p);
            }
            Err(Ambiguous) => {
                if prec > 1 << 22 {
                    return Err(Error::InvalidParams("rounding undecidable at maximal precision".into()));
                }
                prec *= 2;
            }
        }
    }
}

/// Runtime view of desk-scale values as machine integers.
#[derive(Clone, Debug)]
pub struct DeskView {
    pub k: usize,
    /// Index m-1 for every per-level vector.
    pub l: Vec<u64>,
    pub m_upper: Vec<u64>,
    pub m_lower: Vec<u64>,
    pub r_upper: Vec<u64>,
    pub r_lower: Vec<u64>,
    /// beta_m as (numerator, denominator).
    pub beta: Vec<(u128, u128)>,
    pub alpha: (u128, u128),
    /// `branching[m]` for m >= 2; entries 0 and 1 are unused.
    pub branching: Vec<usize>,
}

impl DeskView {
    pub fn scale_product(&self, m: usize) -> u64 {
        self.l[..m].iter().product()
    }
}

fn ratio_u128(r: &BigRational) -> Option<(u128, u128)> {
    Some((r.numer().to_u128()?, r.denom().to_u128()?))
}

impl ScaleParams {
    pub fn level(&self, m: usize) -> &LevelParams {
        &self.levels[m - 1]
    }

    /// B_m for m >= 2.
    pub fn branching_number(&self, m: usize) -> &BigUint {
        &self.branching[m - 2]
    }

    pub fn scale_product(&self, m: usize) -> BigUint {
        self.levels[..m].iter().map(|l| &l.l).product()
    }

    /// |lambda| = B_2 ... B_m.
    pub fn lambda_size(&self, m: usize) -> BigUint {
        (2..=m).map(|r| self.branching_number(r).clone()).product()
    }

    /// Machine-integer view; fails when values do not fit.
    pub fn desk_view(&self) -> Result<DeskView> {
        let too_big = || Error::InvalidParams("parameters too large for a runnable view".into());
        let u = |v: &BigUint| v.to_u64().ok_or_else(too_big);
        let mut view = DeskView {
            k: self.k,
            l: vec![],
            m_upper: vec![],
            m_lower: vec![],
            r_upper: vec![],
            r_lower: vec![],
            beta: vec![],
            alpha: ratio_u128(&self.alpha).ok_or_else(too_big)?,
            branching: vec![0, 0],
        };
        for lv in &self.levels {
            view.l.push(u(&lv.l)?);
            view.m_upper.push(u(&lv.m_upper)?);
            view.m_lower.push(u(&lv.m_lower)?);
            view.r_upper.push(u(&lv.r_upper)?);
            view.r_lower.push(u(&lv.r_lower)?);
            view.beta.push(ratio_u128(&lv.beta).ok_or_else(too_big)?);
        }
        for b in &self.branching {
            view.branching.push(b.to_usize().ok_or_else(too_big)?);
        }
        view.scale_product(self.k).checked_mul(1).ok_or_else(too_big)?;
        self.levels.iter().try_fold(1u64, |acc, l| acc.checked_mul(u(&l.l).ok()?)).ok_or_else(too_big)?;
        Ok(view)
    }

    pub fn conditions(&self) -> ConditionsReport {
        conditions_report(self)
    }

    pub fn lambda_count_bound(&self, m: usize) -> LambdaBound {
        lambda_count_bound(self, m)
    }

    /// Two-sided check L_m / ((ln A + B) m)^13 < B_m < L_m (paper mode).
    pub fn branching_bounds(&self) -> Vec<(usize, bool, bool)> {
        let (Some(a), Some(b)) = (&self.a, self.b) else { return Vec::new() };
        let p = 64;
        let base = ln_u(a, p).add(&Interval::from_u64(b, p));
        (2..=self.k)
            .map(|m| {
                let bm = self.branching_number(m);
                let l = &self.level(m).l;
                let pw = base.mul(&Interval::from_u64(m as u64, p)).powi(13);
                let lower = Interval::from_biguint(l, p).lt(&Interval::from_biguint(bm, p).mul(&pw)) == Some(true);
                (m, lower, bm < l)
            })
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let levels: Vec<Value> = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, lv)| {
                json!({
                    "m": i + 1,
                    "L": lv.l.to_string(),
                    "M_upper": lv.m_upper.to_string(),
                    "M_lower": lv.m_lower.to_string(),
                    "R_upper": lv.r_upper.to_string(),
                    "R_lower": lv.r_lower.to_string(),
                    "beta": lv.beta.to_string(),
                    "beta_approx": lv.beta.to_f64(),
                    "ln_L": ln_f64(&lv.l),
                    "ln_M_upper": ln_f64(&lv.m_upper),
                })
            })
            .collect();
        json!({
            "schema_version": 1,
            "mode": self.mode,
            "A": self.a.as_ref().map(|v| v.to_string()),
            "B": self.b,
            "k": self.k,
            "alpha": self.alpha.to_string(),
            "alpha_approx": self.alpha.to_f64(),
            "levels": levels,
            "N": self.n.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "branching": self.branching.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "branching_formula": self.branching_formula.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "rounding": self.rounding,
            "warnings": self.warnings,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub m: usize,
    /// ln of the left side and of the right side of "lhs > rhs".
    pub lhs_ln: f64,
    pub rhs_ln: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionsReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionsReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn failing(&self) -> Vec<&ConditionCheck> {
        self.checks.iter().filter(|c| !c.holds).collect()
    }

    pub fn holds(&self, prefix: &str) -> bool {
        self.checks.iter().filter(|c| c.name.starts_with(prefix)).all(|c| c.holds)
    }
}

fn lnr(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    ln_f64(&r.numer().to_biguint().unwrap()) - ln_f64(&r.denom().to_biguint().unwrap())
}

fn push(out: &mut Vec<ConditionCheck>, name: &str, m: usize, lhs_ln: f64, rhs_ln: f64) {
    out.push(ConditionCheck { name: name.into(), m, lhs_ln, rhs_ln, holds: lhs_ln > rhs_ln });
}

/// ln(c * exp(-x)) with x given through ln x.
fn ln_c_exp_neg(ln_c: f64, ln_x: f64) -> f64 {
    ln_c - ln_x.exp()
}

fn conditions_report(p: &ScaleParams) -> ConditionsReport {
    let mut out = Vec::new();
    let ln_alpha = lnr(&p.alpha);
    let k = p.k;
    let lnp = |m: usize| ln_f64(&p.scale_product(m));
    for m in 1..=k {
        let lv = p.level(m);
        let pm = p.scale_product(m);
        let pm2 = &pm * &pm;
        let l2 = &lv.l * &lv.l;
        out.push(ConditionCheck {
            name: "cond1.L_ge_1000".into(),
            m,
            lhs_ln: ln_f64(&lv.l),
            rhs_ln: 1000f64.ln(),
            holds: lv.l >= big(1000),
        });
        out.push(ConditionCheck {
            name: "cond1.R_upper_gt_1280L2".into(),
            m,
            lhs_ln: ln_f64(&lv.r_upper),
            rhs_ln: 1280f64.ln() + 2.0 * ln_f64(&lv.l),
            holds: lv.r_upper > &l2 * 1280u32,
        });
        out.push(ConditionCheck {
            name: "cond1.M_upper_gt_1280P2".into(),
            m,
            lhs_ln: ln_f64(&lv.m_upper),
            rhs_ln: 1280f64.ln() + 2.0 * lnp(m),
            holds: lv.m_upper > &pm2 * 1280u32,
        });
        let ln_l = ln_f64(&lv.l);
        let ln_ru = ln_f64(&lv.r_upper);
        let ln_rl = ln_f64(&lv.r_lower);
        let ln_mu = ln_f64(&lv.m_upper);
        let ln_ml = ln_f64(&lv.m_lower);
        let ln_m2 = 2.0 * (m as f64).ln();
        let ln_beta = lnr(&lv.beta);
        // alpha^2 / (8 m^4) against the reduced-length bounds
        let a2 = 2.0 * ln_alpha - 8f64.ln() - 2.0 * ln_m2;
        push(&mut out, "cond2.redUpper_tail", m, a2, ln_c_exp_neg(4f64.ln(), ln_ru - 432f64.ln() - 2.0 * ln_l));
        push(&mut out, "cond2.redLower_tail", m, a2, ln_c_exp_neg(2f64.ln() + ln_rl, 2.0 * ln_l - ln_rl));
        push(
            &mut out,
            "cond2.local_tail",
            m,
            a2,
            ln_c_exp_neg(8f64.ln() + ln_l + ln_ru - ln_rl, ln_beta + ln_rl - ln_l),
        );
        // alpha / m^2 against the ground-length bounds
        let a3 = ln_alpha - ln_m2;
        push(&mut out, "cond3.upper_tail", m, a3, ln_c_exp_neg(4f64.ln(), ln_mu - 432f64.ln() - 2.0 * lnp(m)));
        push(&mut out, "cond3.lower_tail", m, a3, ln_c_exp_neg(2f64.ln() + ln_ml, 2.0 * lnp(m) - ln_ml));
        if p.n.len() == k + 1 {
            let ln_n_prev = ln_f64(&p.n[m - 1]);
            let q: BigUint = p.scale_product(k) / p.scale_product(m - 1);
            push(&mut out, "condN.length_floor", m, a3, ln_c_exp_neg(ln_n_prev, 2.0 * ln_f64(&q) - ln_n_prev));
            if m < k {
                let ln_n = ln_f64(&p.n[m]);
                let ln_n0 = ln_f64(&p.n[0]);
                push(&mut out, "cond4.1", m, a3, ln_c_exp_neg(2f64.ln(), ln_n_prev + 4.0 * a3 - 64f64.ln() - ln_ru));
                push(
                    &mut out,
                    "cond4.2",
                    m,
                    a3,
                    ln_c_exp_neg(5f64.ln(), ln_n + 2.0 * (2.0 * a3 + ln_rl - ln_ru) - 256f64.ln()),
                );
                push(&mut out, "cond4.3", m, a3, ln_c_exp_neg(0.0, ln_n0 + 2.0 * a3 - 4f64.ln() - ln_mu));
                push(&mut out, "cond4.4", m, a3, 5f64.ln() - ln_n_prev);
            }
        }
    }
    ConditionsReport { checks: out }
}

#[derive(Clone, Debug)]
pub struct LambdaBound {
    pub m: usize,
    /// Enclosure of B_m (3 ln M_upper_m + B_{m-1}(...)) unrolled down to level 1.
    pub recursive: Interval,
    /// ln(10^6 A^(1/32) B_2...B_m), paper mode only.
    pub closed_form: Option<Interval>,
    pub recursive_le_closed: Option<bool>,
}

fn lambda_count_bound(p: &ScaleParams, m: usize) -> LambdaBound {
    let prec = 64;
    let mut rec = Interval::from_u64(0, prec);
    for r in 2..=m {
        let lm = ln_u(&p.level(r).m_upper, prec).mul(&Interval::from_u64(3, prec));
        rec = Interval::from_biguint(p.branching_number(r), prec).mul(&lm.add(&rec));
    }
    let closed_form = p.a.as_ref().and_then(|a| {
        if (2..=m).any(|r| p.branching_number(r).is_zero()) {
            return None;
        }
        let mut v = ln_u(&big(1_000_000), prec).add(&ln_u(a, prec).div(&Interval::from_u64(32, prec)));
        for r in 2..=m {
            v = v.add(&ln_u(p.branching_number(r), prec));
        }
        Some(v)
    });
    let recursive_le_closed = closed_form.as_ref().and_then(|c| {
        // compare ln(rec) with the closed-form logarithm
        if rec.lo <= BigInt::zero() {
            return Some(true);
        }
        match rec.ln().lt(c) {
            Some(true) => Some(true),
            Some(false) if rec.ln().lo > c.hi => Some(false),
            _ => None,
        }
    });
    LambdaBound { m, recursive: rec, closed_form, recursive_le_closed }
}

/// |Lambda_2| = M!/(M-B)! (2M+1)^B for M = M_upper_2, B = B_2.
pub fn lambda2_count(m_upper: u64, b: u64) -> BigUint {
    if b > m_upper {
        return BigUint::zero();
    }
    let falling: BigUint = ((m_upper - b + 1)..=m_upper).map(big).product();
    falling * Pow::pow(&big(2 * m_upper + 1), b)
}

/// Largest corruption density for which every tested interval is forced
/// error-free: 1/(prod_{r=2}^k (1 + 1/r^2) M_upper_1) - 10 alpha.
pub fn max_admissible_delta(p: &ScaleParams) -> BigRational {
    let mut prod = BigRational::one();
    for r in 2..=p.k {
        let r2 = BigInt::from((r * r) as u64);
        prod *= BigRational::new(&r2 + 1, r2);
    }
    let cap = BigRational::one() / (prod * BigRational::from_integer(to_int(&p.level(1).m_upper)));
    cap - BigRational::from_integer(BigInt::from(10)) * &p.alpha
}

/// prod_{r=2}^m (1 + 1/r^2).
pub fn density_growth(m: usize) -> BigRational {
    let mut prod = BigRational::one();
    for r in 2..=m {
        let r2 = BigInt::from((r * r) as u64);
        prod *= BigRational::new(&r2 + 1, r2);
    }
    prod
}

pub fn is_integer_ratio(r: &BigRational) -> bool {
    r.denom().is_one() || r.numer().is_multiple_of(r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_desk() -> DeskLevels {
        DeskLevels {
            l: vec![4, 4],
            m_upper: vec![64, 1024],
            m_lower: vec![4, 64],
            r_upper: vec![64, 64],
            r_lower: vec![1, 1],
            beta: vec![Num::Int(1), Num::Int(1)],
            alpha: Num::Text("0.01".into()),
            branching: None,
            n: None,
        }
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("0.25").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("1/3").unwrap(), BigRational::new(1.into(), 3.into()));
        assert_eq!(parse_rational("1e-4").unwrap(), BigRational::new(1.into(), 10000.into()));
        assert_eq!(parse_rational("-2.5E1").unwrap(), BigRational::from_integer((-25).into()));
        assert!(parse_rational("abc").is_err());
        assert_eq!(Num::Float(0.1).to_rational().unwrap(), BigRational::new(1.into(), 10.into()));
    }

    #[test]
    fn desk_validation() {
        let d = spec_desk();
        assert!(validate_desk_structure(&d).is_ok());
        let err = desk_params(&d).unwrap_err().to_string();
        assert!(err.contains("B_2 = 0") && err.contains("M_lower_2"), "{err}");
        let mut ok = d.clone();
        ok.branching = Some(vec![1]);
        let p = desk_params(&ok).unwrap();
        assert_eq!(p.branching_formula, vec![BigUint::zero()]);
        assert_eq!(p.lambda_size(2), big(1));
        let mut bad = d.clone();
        bad.m_lower[0] = 65;
        assert!(desk_params(&bad).unwrap_err().to_string().contains("M_lower_1"));
    }

    #[test]
    fn branching_formula_example() {
        let b = branching_formula_exact(&big(1200), &parse_rational("0.1").unwrap(), &big(100), &big(10), 2);
        assert_eq!(b, big(2));
        let b = branching_formula_exact(&big(1), &parse_rational("1").unwrap(), &big(100), &big(10), 2);
        assert_eq!(b, big(0));
    }

    #[test]
    fn lambda_sizes() {
        let mut d = spec_desk();
        d.l = vec![4, 4, 4];
        d.m_upper.push(4096);
        d.m_lower.push(64);
        d.r_upper.push(64);
        d.r_lower.push(1);
        d.beta.push(Num::Int(1));
        d.branching = Some(vec![3, 2]);
        let p = desk_params(&d).unwrap();
        assert_eq!(p.lambda_size(1), big(1));
        assert_eq!(p.lambda_size(3), big(6));
        assert_eq!(p.lambda_size(3), p.lambda_size(2) * p.branching_number(3));
        let lb = p.lambda_count_bound(2);
        let expect = 3.0 * 3.0 * (1024f64).ln();
        assert!((lb.recursive.mid_f64() - expect).abs() < 1e-9);
    }

    #[test]
    fn lambda2_formula() {
        assert_eq!(lambda2_count(2, 1), big(10));
        assert_eq!(lambda2_count(7, 2), big(9450));
    }

    #[test]
    fn paper_schedule_small() {
        let p = paper_params(&big(1000), 250, 2, true).unwrap();
        assert_eq!(p.alpha, BigRational::new(BigInt::one(), Pow::pow(&BigInt::from(10u64), 16u32)));
        assert_eq!(p.level(1).l, big(1000));
        assert_eq!(p.level(2).l, big(1000) * Pow::pow(&big(2), 250u32));
        assert!(p.rounding.iter().all(|r| r.within_half_to_double));
        assert!(p.level(1).m_upper < p.level(2).m_upper);
    }
}
