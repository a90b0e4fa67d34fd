//! Winding of a homogeneous polynomial field `η = P + iQ` at the origin from
//! Sturm chains of `N₀(s) = P(1, s)` and `N₁(s) = Q(1, s)`:
//! `(1 + (−1)^{m+n}) (m₊ − m₋) / 2`.
//!
//! Polynomials are coefficient vectors in ascending powers of `s`.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::golden_section_min;
use crate::winding::{winding_of_loop, WindingOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    PlainRemainder,
    NegatedRemainder,
}

impl Default for Convention {
    fn default() -> Self {
        Convention::NegatedRemainder
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Arithmetic {
    #[default]
    Exact,
    Float,
}

/// `P = Σ p_j λ^{m−j} s^j`, `Q = Σ q_j λ^{n−j} s^j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneousPair {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(skip)]
    exact: [Vec<BigRational>; 2],
}

impl HomogeneousPair {
    /// `Q` may vanish identically; `P` may not.
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let exact = |v: &[f64]| -> Result<Vec<BigRational>> {
            v.iter().map(|c| BigRational::from_float(*c).ok_or_else(|| Error::Invalid(format!("coefficient {c} is not finite")))).collect()
        };
        let (ep, eq) = (exact(&p)?, exact(&q)?);
        Self::from_exact(ep, eq)
    }

    /// Coefficients given as integer, decimal or fraction literals.
    pub fn parse(p: &[String], q: &[String]) -> Result<Self> {
        let exact = |v: &[String]| v.iter().map(|c| parse_rational(c)).collect::<Result<Vec<_>>>();
        Self::from_exact(exact(p)?, exact(q)?)
    }

    fn from_exact(p: Vec<BigRational>, q: Vec<BigRational>) -> Result<Self> {
        if p.is_empty() || q.is_empty() {
            return Err(Error::Invalid("coefficient lists must be nonempty".into()));
        }
        if p.iter().all(Zero::is_zero) {
            return Err(Error::Invalid("P is identically zero".into()));
        }
        let float = |v: &[BigRational]| v.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        Ok(HomogeneousPair { p: float(&p), q: float(&q), exact: [p, q] })
    }

    pub fn m(&self) -> usize {
        self.p.len() - 1
    }

    pub fn n(&self) -> usize {
        self.q.len() - 1
    }

    pub fn eval(&self, lambda: f64, s: f64) -> Complex64 {
        Complex64::new(homogeneous(&self.p, lambda, s), homogeneous(&self.q, lambda, s))
    }
}

fn homogeneous(c: &[f64], lambda: f64, s: f64) -> f64 {
    let d = c.len() - 1;
    c.iter().enumerate().map(|(j, cj)| cj * lambda.powi((d - j) as i32) * s.powi(j as i32)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SturmChain {
    pub convention: Convention,
    pub arithmetic: Arithmetic,
    pub polys: Vec<Vec<f64>>,
}

fn trim<T: Zero>(mut v: Vec<T>) -> Vec<T> {
    while v.last().is_some_and(Zero::is_zero) {
        v.pop();
    }
    v
}

/// Remainder of `a` divided by `b`; `b` must be trimmed and nonzero.
fn remainder<T: Num + Clone>(a: &[T], b: &[T]) -> Vec<T> {
    let mut r: Vec<T> = trim(a.to_vec());
    let db = b.len() - 1;
    let lead = b[db].clone();
    while r.len() > db && !r.is_empty() {
        let shift = r.len() - 1 - db;
        let factor = r[r.len() - 1].clone() / lead.clone();
        for (i, bi) in b.iter().enumerate() {
            r[shift + i] = r[shift + i].clone() - factor.clone() * bi.clone();
        }
        // the leading term cancels exactly in exact arithmetic; force it in floats
        let top = r.len() - 1;
        r[top] = T::zero();
        r = trim(r);
    }
    r
}

fn cascade<T, F>(n0: Vec<T>, n1: Vec<T>, convention: Convention, snap: F) -> Vec<Vec<T>>
where
    T: Num + Signed + Clone,
    F: Fn(Vec<T>, &[T], &[T]) -> Vec<T>,
{
    let mut chain = vec![trim(n0), trim(n1)];
    if chain[1].is_empty() {
        chain.pop();
        return chain;
    }
    loop {
        let l = chain.len();
        let (a, b) = (&chain[l - 2], &chain[l - 1]);
        let r = trim(snap(remainder(a, b), a, b));
        if r.is_empty() {
            break;
        }
        let r = match convention {
            Convention::PlainRemainder => r,
            Convention::NegatedRemainder => r.into_iter().map(|c| -c).collect(),
        };
        chain.push(r);
    }
    chain
}

/// Euclidean remainder cascade. Float coefficients below `1e−12` times the
/// dividend/divisor scale are snapped to zero.
pub fn sturm_chain(n0: &[f64], n1: &[f64], convention: Convention, arithmetic: Arithmetic) -> Result<SturmChain> {
    match arithmetic {
        Arithmetic::Float => {
            if trim(n0.to_vec()).is_empty() {
                return Err(Error::Invalid("N0 is identically zero".into()));
            }
            let snap = |r: Vec<f64>, a: &[f64], b: &[f64]| {
                let scale = a.iter().chain(b).fold(0.0f64, |m, c| m.max(c.abs()));
                r.into_iter().map(|c| if c.abs() < 1e-12 * scale { 0.0 } else { c }).collect()
            };
            Ok(SturmChain { convention, arithmetic, polys: cascade(n0.to_vec(), n1.to_vec(), convention, snap) })
        }
        Arithmetic::Exact => {
            let pair = HomogeneousPair::new(n0.to_vec(), n1.to_vec())?;
            Ok(sturm_chain_exact(&pair.exact[0], &pair.exact[1], convention))
        }
    }
}

/// Cascade in exact rational arithmetic; `n0` must not vanish identically.
pub fn sturm_chain_exact(n0: &[BigRational], n1: &[BigRational], convention: Convention) -> SturmChain {
    let chain = cascade(n0.to_vec(), n1.to_vec(), convention, |r, _, _| r);
    let polys = chain.into_iter().map(|p| p.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()).collect();
    SturmChain { convention, arithmetic: Arithmetic::Exact, polys }
}

fn pair_chain(pair: &HomogeneousPair, convention: Convention, arithmetic: Arithmetic) -> Result<SturmChain> {
    match arithmetic {
        Arithmetic::Exact => Ok(sturm_chain_exact(&pair.exact[0], &pair.exact[1], convention)),
        Arithmetic::Float => sturm_chain(&pair.p, &pair.q, convention, arithmetic),
    }
}

/// Signs of each chain member at `+∞` and `−∞`.
pub fn infinity_signs(chain: &SturmChain) -> (Vec<i8>, Vec<i8>) {
    let sign = |c: f64| if c > 0.0 { 1 } else { -1 };
    let plus = chain.polys.iter().map(|p| sign(*p.last().expect("trimmed nonzero"))).collect();
    let minus = chain
        .polys
        .iter()
        .map(|p| {
            let s = sign(*p.last().expect("trimmed nonzero"));
            if (p.len() - 1) % 2 == 1 {
                -s
            } else {
                s
            }
        })
        .collect();
    (plus, minus)
}

fn changes(signs: &[i8]) -> usize {
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// `(m₊, m₋)`: sign changes of the chain at `±∞`.
pub fn infinity_sign_changes(chain: &SturmChain) -> (usize, usize) {
    let (plus, minus) = infinity_signs(chain);
    (changes(&plus), changes(&minus))
}

/// Brute-force winding of `P + iQ` around the circle of the given radius.
pub fn oracle_winding(pair: &HomogeneousPair, radius: f64, samples: usize) -> Result<i64> {
    let f = |tau: f64| {
        let a = 2.0 * PI * tau;
        Ok(pair.eval(radius * a.cos(), radius * a.sin()))
    };
    Ok(winding_of_loop(f, samples, &WindingOptions::default())?.winding)
}

fn circle_abs(pair: &HomogeneousPair, a: f64) -> f64 {
    pair.eval(a.cos(), a.sin()).norm()
}

/// Minimum of `|η|` on the unit circle: dense sampling refined at the
/// smallest local minima.
pub fn circle_minimum(pair: &HomogeneousPair, samples: usize) -> f64 {
    let k = samples.max(4096);
    let h = 2.0 * PI / k as f64;
    let vals: Vec<f64> = (0..k).map(|i| circle_abs(pair, i as f64 * h)).collect();
    let mut minima: Vec<usize> = (0..k).filter(|&i| vals[i] <= vals[(i + k - 1) % k] && vals[i] <= vals[(i + 1) % k]).collect();
    minima.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).expect("finite"));
    let mut best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    for &i in minima.iter().take(16) {
        let c = i as f64 * h;
        if let Ok((_, v)) = golden_section_min(|a| Ok(circle_abs(pair, a)), c - h, c + h, 1e-14) {
            best = best.min(v);
        }
    }
    best
}

fn circle_scale(pair: &HomogeneousPair) -> f64 {
    pair.p.iter().chain(&pair.q).fold(0.0f64, |m, c| m.max(c.abs()))
}

/// True when the origin is the only zero of `η` (by homogeneity, when `η`
/// does not vanish on the unit circle).
pub fn isolated_zero_check(pair: &HomogeneousPair, samples: usize) -> bool {
    circle_minimum(pair, samples) > 1e-10 * (1.0 + circle_scale(pair))
}

/// The formula value. Errors when the origin is not an isolated zero or when
/// the formula does not apply (`m < n`, or `deg N₀ < m` in `s`).
pub fn homogeneous_index(pair: &HomogeneousPair, convention: Convention, arithmetic: Arithmetic) -> Result<i64> {
    if !isolated_zero_check(pair, 4096) {
        return Err(Error::NonIsolatedZero { min_abs: circle_minimum(pair, 4096) });
    }
    let (m, n) = (pair.m(), pair.n());
    if (m + n) % 2 == 1 {
        return Ok(0);
    }
    if m < n {
        return Err(Error::FormulaNotApplicable(format!("degree of P ({m}) is below degree of Q ({n})")));
    }
    // P(0, 1) = 0 puts a zero of P on the ray λ = 0, which N₀ = P(1, s) cannot see
    let d0 = trim(pair.p.clone()).len();
    if d0 < m + 1 {
        return Err(Error::FormulaNotApplicable(format!("deg N0 = {} is below m = {m} in s", d0.saturating_sub(1))));
    }
    let chain = pair_chain(pair, convention, arithmetic)?;
    let (mp, mm) = infinity_sign_changes(&chain);
    Ok(mp as i64 - mm as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionResult {
    pub convention: Convention,
    pub chain: Vec<Vec<f64>>,
    pub signs_plus: Vec<i8>,
    pub signs_minus: Vec<i8>,
    pub m_plus: usize,
    pub m_minus: usize,
    pub formula: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SturmReport {
    pub m: usize,
    pub n: usize,
    pub isolated: bool,
    pub oracle: i64,
    /// `None` when the formula does not apply and the oracle value is used.
    pub formula: Option<i64>,
    pub convention: Convention,
    pub applicable: bool,
    pub note: Option<String>,
    pub conventions: Vec<ConventionResult>,
    /// Conventions whose formula value equals the oracle.
    pub calibrated: Vec<Convention>,
    pub value: i64,
}

/// Formula under `convention` next to both conventions and the oracle.
pub fn sturm_report(pair: &HomogeneousPair, convention: Convention, arithmetic: Arithmetic) -> Result<SturmReport> {
    let isolated = isolated_zero_check(pair, 4096);
    if !isolated {
        return Err(Error::NonIsolatedZero { min_abs: circle_minimum(pair, 4096) });
    }
    let oracle = oracle_winding(pair, 1.0, 256)?;
    let formula = match homogeneous_index(pair, convention, arithmetic) {
        Ok(v) => Some(v),
        Err(Error::FormulaNotApplicable(_)) => None,
        Err(e) => return Err(e),
    };
    let mut conventions = Vec::new();
    let mut calibrated = Vec::new();
    let parity_zero = (pair.m() + pair.n()) % 2 == 1;
    if formula.is_some() && !parity_zero {
        for c in [Convention::NegatedRemainder, Convention::PlainRemainder] {
            let chain = pair_chain(pair, c, arithmetic)?;
            let (signs_plus, signs_minus) = infinity_signs(&chain);
            let (m_plus, m_minus) = (changes(&signs_plus), changes(&signs_minus));
            let value = m_plus as i64 - m_minus as i64;
            if value == oracle {
                calibrated.push(c);
            }
            conventions.push(ConventionResult {
                convention: c,
                chain: chain.polys,
                signs_plus,
                signs_minus,
                m_plus,
                m_minus,
                formula: value,
            });
        }
    } else if formula == Some(oracle) {
        calibrated = vec![Convention::NegatedRemainder, Convention::PlainRemainder];
    }
    let note = match formula {
        None => Some("formula not applicable; oracle winding reported".to_string()),
        Some(_) if parity_zero => Some("m + n odd; parity factor vanishes".to_string()),
        Some(_) => None,
    };
    Ok(SturmReport {
        m: pair.m(),
        n: pair.n(),
        isolated,
        oracle,
        formula,
        convention,
        applicable: formula.is_some(),
        note,
        conventions,
        calibrated,
        value: formula.unwrap_or(oracle),
    })
}

/// Exact rational from a decimal or fraction literal such as `-3/4` or `0.25`.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let t = text.trim();
    let bad = || Error::Invalid(format!("bad rational coefficient {text:?}"));
    if let Some((num, den)) = t.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| bad())?;
        let d: BigInt = den.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if frac.chars().any(|c| !c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    Ok(BigRational::new(digits, num_traits::pow(BigInt::from(10), frac.len())))
}
