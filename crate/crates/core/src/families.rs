//! Built-in coefficient families and the reference corpus.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::integrator::{real_monodromy, IntegratorOptions};
use crate::model::{CoefficientFamily, NonlinearFamily, ParamPoint, ParameterPath};

/// `S ≡ λ·I_{2n}`.
pub fn rotation(n: usize) -> CoefficientFamily {
    CoefficientFamily::scalar(n, 1, "lambda").expect("static family")
}

/// `S = λI₂ + 0.3 cos(t) E₁₁`: the double crossing at `λ = 1` splits.
pub fn perturbed_rotation() -> CoefficientFamily {
    CoefficientFamily::parse(1, 1, &rows(&[&["lambda + 0.3*cos(t)", "0"], &["0", "lambda"]])).expect("static family")
}

/// Two coupled rotation blocks with time-dependent coupling.
pub fn coupled_blocks() -> CoefficientFamily {
    CoefficientFamily::parse(
        2,
        1,
        &rows(&[
            &["lambda", "0.2*sin(t)", "0", "0.1"],
            &["0.2*sin(t)", "lambda + 0.25*cos(2*t)", "0.1", "0"],
            &["0", "0.1", "lambda", "0"],
            &["0.1", "0", "0", "lambda - 0.15*sin(t)"],
        ]),
    )
    .expect("static family")
}

/// `S ≡ (1 + 0.5 sin λ)·I₂` over the circle `λ ∈ [0, 2π)`.
pub fn loop_family() -> CoefficientFamily {
    CoefficientFamily::scalar(1, 1, "1 + 0.5*sin(lambda)").expect("static family")
}

/// `S ≡ λ₁·I₂` on a two-parameter domain.
pub fn embedding() -> CoefficientFamily {
    CoefficientFamily::scalar(1, 2, "lambda1").expect("static family")
}

/// `S ≡ (λ₁² + λ₂²)·I₂`.
pub fn radial() -> CoefficientFamily {
    CoefficientFamily::scalar(1, 2, "lambda1^2 + lambda2^2").expect("static family")
}

/// `∇_u H = λu + |u|²u`, `n = 1`.
pub fn cubic() -> NonlinearFamily {
    NonlinearFamily::parse(1, &["lambda*u1 + (u1^2 + u2^2)*u1".into(), "lambda*u2 + (u1^2 + u2^2)*u2".into()], None).expect("static family")
}

fn rows(r: &[&[&str]]) -> Vec<Vec<String>> {
    r.iter().map(|row| row.iter().map(|e| e.to_string()).collect()).collect()
}

/// A family with a path over which the four indices are compared.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub family: CoefficientFamily,
    pub path: ParameterPath,
    /// The path is a closed loop (start and end identified).
    pub closed: bool,
}

fn entry(name: &str, family: CoefficientFamily, points: &[ParamPoint], closed: bool) -> CorpusEntry {
    CorpusEntry { name: name.into(), family, path: ParameterPath::new(points.to_vec()).expect("static path"), closed }
}

pub fn corpus() -> Vec<CorpusEntry> {
    let one = ParamPoint::one;
    let two = ParamPoint::two;
    vec![
        entry("rotation", rotation(1), &[one(0.5), one(1.5)], false),
        entry("rotation-low", rotation(1), &[one(0.1), one(0.4)], false),
        entry("rotation-wide", rotation(1), &[one(0.5), one(2.5)], false),
        entry("block", rotation(2), &[one(0.5), one(1.5)], false),
        entry("perturbed", perturbed_rotation(), &[one(0.5), one(1.5)], false),
        entry("coupled", coupled_blocks(), &[one(0.45), one(1.45)], false),
        entry("loop", loop_family(), &[one(0.0), one(2.0 * PI)], true),
        entry("embedding", embedding(), &[two(0.5, 0.3), two(1.5, 0.3)], false),
        entry("radial", radial(), &[two(0.3, 0.3), two(0.9, 0.9)], false),
    ]
}

/// `S_λ(t) = λI + P(t)` with `P` a symmetric trigonometric polynomial of
/// degree at most 3 and coefficients uniform in `[−0.5, 0.5]`.
pub fn random_family(rng: &mut ChaCha8Rng, half_dim: usize) -> CoefficientFamily {
    let d = 2 * half_dim;
    let degree = rng.gen_range(1..=3usize);
    let mut entries = vec![vec![String::new(); d]; d];
    for i in 0..d {
        for j in i..d {
            let mut e = if i == j { "lambda".to_string() } else { "0".to_string() };
            let c0: f64 = rng.gen_range(-0.5..=0.5);
            e.push_str(&format!(" + {c0:.6}"));
            for k in 1..=degree {
                let a: f64 = rng.gen_range(-0.5..=0.5);
                let b: f64 = rng.gen_range(-0.5..=0.5);
                e.push_str(&format!(" + {a:.6}*cos({k}*t) + {b:.6}*sin({k}*t)"));
            }
            entries[i][j] = e.clone();
            entries[j][i] = e;
        }
    }
    CoefficientFamily::parse(half_dim, 1, &entries).expect("generated family parses")
}

/// [`random_family`] drawn from a fresh generator seeded with `seed`.
pub fn seeded_family(seed: u64, half_dim: usize) -> CoefficientFamily {
    random_family(&mut ChaCha8Rng::seed_from_u64(seed), half_dim)
}

fn sigma_min_at(family: &CoefficientFamily, lambda: f64, opts: &IntegratorOptions) -> Result<f64> {
    let m = real_monodromy(family, ParamPoint::one(lambda), opts)?.monodromy;
    let d = m.nrows();
    Ok((DMatrix::identity(d, d) - m).singular_values().min())
}

/// Interval `[a, a + 1]` near `[0.5, 1.5]` whose endpoints have
/// `σ_min(I − M) ≥ margin`, or `None` if none of the trial shifts qualifies.
pub fn certified_interval(family: &CoefficientFamily, margin: f64, opts: &IntegratorOptions) -> Result<Option<(f64, f64)>> {
    for k in 0..21 {
        let shift = if k % 2 == 0 { 0.025 * (k / 2) as f64 } else { -0.025 * ((k + 1) / 2) as f64 };
        let (a, b) = (0.5 + shift, 1.5 + shift);
        if sigma_min_at(family, a, opts)? >= margin && sigma_min_at(family, b, opts)? >= margin {
            return Ok(Some((a, b)));
        }
    }
    Ok(None)
}

/// `count` random families with certified intervals, `n` alternating 1, 2.
pub fn random_corpus(seed: u64, count: usize, opts: &IntegratorOptions) -> Result<Vec<CorpusEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = 1 + out.len() % 2;
        let family = random_family(&mut rng, n);
        if let Some((a, b)) = certified_interval(&family, 0.05, opts)? {
            out.push(CorpusEntry { name: format!("random-{}", out.len()), family, path: ParameterPath::interval(a, b)?, closed: false });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_family, ParameterDomain, SampleCounts};

    #[test]
    fn builtins_validate() {
        let interval = ParameterDomain::interval(0.0, 2.0, 5).unwrap();
        let square = ParameterDomain::rectangle([0.0, 0.0], [1.2, 1.2], [5, 5], vec![]).unwrap();
        for f in [rotation(1), rotation(2), perturbed_rotation(), coupled_blocks(), loop_family()] {
            assert!(validate_family(&f, &interval, SampleCounts::default()).passed());
        }
        for f in [embedding(), radial()] {
            assert!(validate_family(&f, &square, SampleCounts::default()).passed());
        }
        cubic().validate_trivial_branch(&interval, SampleCounts::default()).unwrap();
    }

    #[test]
    fn random_families_are_symmetric_and_reproducible() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let fa = random_family(&mut a, 2);
        let fb = random_family(&mut b, 2);
        assert_eq!(fa.eval_s(ParamPoint::one(0.3), 1.1).unwrap(), fb.eval_s(ParamPoint::one(0.3), 1.1).unwrap());
        let dom = ParameterDomain::interval(0.0, 2.0, 5).unwrap();
        assert!(validate_family(&fa, &dom, SampleCounts::default()).passed());
    }
}
