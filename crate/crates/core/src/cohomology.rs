//! Exact singularity-time calculus on the compactification.
//!
//! Classes are rational coefficient vectors over a declared basis. Because
//! the interesting classes are rational multiples of powers of π, every class
//! and every scalar carries an integer `pi_power`: the value represented is
//! `coeff · π^pi_power`. Nothing is rounded until a caller asks for `f64`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::math;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CohomologyError {
    #[error("initial class is not Kähler: functional {functional} evaluates to {value}")]
    NotKahler { functional: usize, value: String },
    #[error("basis mismatch: expected {expected} coefficients, found {found}")]
    BasisMismatch { expected: usize, found: usize },
    #[error("Kähler cone must have at least one functional")]
    EmptyCone,
    #[error("witness class does not lie in the declared cone")]
    WitnessOutsideCone,
    #[error("complex dimension must be positive")]
    InvalidDimension,
    #[error("time must be non-negative, got {0}")]
    NegativeTime(String),
    #[error("cannot combine classes carrying pi^{left} and pi^{right}")]
    MixedPiUnits { left: i32, right: i32 },
    #[error("invalid rational literal {0:?}")]
    InvalidRational(String),
}

fn rational_from_i64(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

fn rational_to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        if q.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Parses `p`, `p/q`, or a decimal like `-1.25`, into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, CohomologyError> {
    let s = text.trim();
    let bad = || CohomologyError::InvalidRational(text.to_string());
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(den.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let negative = int_part.starts_with('-');
        let digits_ok = !frac_part.is_empty() && frac_part.bytes().all(|b| b.is_ascii_digit());
        if !digits_ok {
            return Err(bad());
        }
        let whole = match int_part {
            "" | "-" | "+" => BigInt::zero(),
            other => BigInt::from_str(other).map_err(|_| bad())?,
        };
        let frac = BigInt::from_str(frac_part).map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10u32), frac_part.len());
        let mag = whole.abs() * &scale + frac;
        let n = if negative { -mag } else { mag };
        return Ok(Rational::new(n, scale));
    }
    BigInt::from_str(s).map(Rational::from_integer).map_err(|_| bad())
}

/// An exact scalar `coeff · π^pi_power`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PiRational {
    coeff: Rational,
    pi_power: i32,
}

impl PiRational {
    pub fn new(coeff: Rational, pi_power: i32) -> Self {
        let pi_power = if coeff.is_zero() { 0 } else { pi_power };
        Self { coeff, pi_power }
    }

    pub fn from_integer(v: i64) -> Self {
        Self::new(rational_from_i64(v), 0)
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::new(Rational::new(BigInt::from(num), BigInt::from(den)), 0)
    }

    pub fn zero() -> Self {
        Self::new(Rational::zero(), 0)
    }

    pub fn coeff(&self) -> &Rational {
        &self.coeff
    }

    pub fn pi_power(&self) -> i32 {
        self.pi_power
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.coeff.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.coeff.is_negative()
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.coeff) * math::powi(core::f64::consts::PI, self.pi_power)
    }

    pub fn mul(&self, other: &PiRational) -> PiRational {
        PiRational::new(&self.coeff * &other.coeff, self.pi_power + other.pi_power)
    }

    pub fn scale(&self, q: &Rational) -> PiRational {
        PiRational::new(&self.coeff * q, self.pi_power)
    }

    /// Sum of two scalars; zero is compatible with any power of π.
    pub fn checked_add(&self, other: &PiRational) -> Result<PiRational, CohomologyError> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.pi_power != other.pi_power {
            return Err(CohomologyError::MixedPiUnits {
                left: self.pi_power,
                right: other.pi_power,
            });
        }
        Ok(PiRational::new(&self.coeff + &other.coeff, self.pi_power))
    }

    /// Exact comparison when both share a power of π (or one is zero).
    pub fn exact_cmp(&self, other: &PiRational) -> Option<Ordering> {
        if self.pi_power == other.pi_power || self.is_zero() || other.is_zero() {
            Some(self.coeff.cmp(&other.coeff))
        } else {
            None
        }
    }
}

impl fmt::Display for PiRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pi_power {
            0 => write!(f, "{}", self.coeff),
            1 => write!(f, "{}*pi", self.coeff),
            k => write!(f, "{}*pi^{}", self.coeff, k),
        }
    }
}

impl FromStr for PiRational {
    type Err = CohomologyError;

    /// Accepts `3/2`, `8pi`, `8*pi`, `-pi`, `1/2*pi^-1` and `π` in place of `pi`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let s = text.trim().replace('π', "pi");
        let Some(idx) = s.find("pi") else {
            return Ok(PiRational::new(parse_rational(&s)?, 0));
        };
        let bad = || CohomologyError::InvalidRational(text.to_string());
        let head = s[..idx].trim().trim_end_matches('*').trim();
        let tail = s[idx + 2..].trim();
        let coeff = match head {
            "" | "+" => Rational::one(),
            "-" => -Rational::one(),
            other => parse_rational(other)?,
        };
        let power = if tail.is_empty() {
            1
        } else {
            let p = tail.strip_prefix('^').ok_or_else(bad)?;
            p.trim().parse::<i32>().map_err(|_| bad())?
        };
        Ok(PiRational::new(coeff, power))
    }
}

/// A real (1,1)-class as exact coefficients times a common power of π.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CohomologyClass {
    coeffs: Vec<Rational>,
    pi_power: i32,
}

impl CohomologyClass {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        Self::with_pi_power(coeffs, 0)
    }

    pub fn with_pi_power(coeffs: Vec<Rational>, pi_power: i32) -> Self {
        let pi_power = if coeffs.iter().all(Zero::is_zero) { 0 } else { pi_power };
        Self { coeffs, pi_power }
    }

    pub fn from_integers(values: &[i64]) -> Self {
        Self::new(values.iter().map(|v| rational_from_i64(*v)).collect())
    }

    /// Builds a class from scalars that must agree on their power of π.
    pub fn from_scalars(values: &[PiRational]) -> Result<Self, CohomologyError> {
        let mut power: Option<i32> = None;
        for v in values.iter().filter(|v| !v.is_zero()) {
            match power {
                None => power = Some(v.pi_power),
                Some(p) if p != v.pi_power => {
                    return Err(CohomologyError::MixedPiUnits {
                        left: p,
                        right: v.pi_power,
                    })
                }
                _ => {}
            }
        }
        Ok(Self::with_pi_power(
            values.iter().map(|v| v.coeff.clone()).collect(),
            power.unwrap_or(0),
        ))
    }

    pub fn zero(len: usize) -> Self {
        Self::new(alloc::vec![Rational::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn pi_power(&self) -> i32 {
        self.pi_power
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn component(&self, i: usize) -> PiRational {
        PiRational::new(self.coeffs[i].clone(), self.pi_power)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let unit = math::powi(core::f64::consts::PI, self.pi_power);
        self.coeffs.iter().map(|c| rational_to_f64(c) * unit).collect()
    }

    fn check_len(&self, other: &CohomologyClass) -> Result<(), CohomologyError> {
        if self.len() != other.len() {
            return Err(CohomologyError::BasisMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &CohomologyClass) -> Result<CohomologyClass, CohomologyError> {
        self.check_len(other)?;
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.pi_power != other.pi_power {
            return Err(CohomologyError::MixedPiUnits {
                left: self.pi_power,
                right: other.pi_power,
            });
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(CohomologyClass::with_pi_power(coeffs, self.pi_power))
    }

    pub fn scale(&self, s: &PiRational) -> CohomologyClass {
        let coeffs = self.coeffs.iter().map(|c| c * &s.coeff).collect();
        CohomologyClass::with_pi_power(coeffs, self.pi_power + s.pi_power)
    }
}

impl fmt::Display for CohomologyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", PiRational::new(c.clone(), self.pi_power))?;
        }
        f.write_str(")")
    }
}

/// Open polyhedral cone `{c : ℓ_j(c) > 0 for all j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KahlerCone {
    functionals: Vec<Vec<Rational>>,
}

impl KahlerCone {
    pub fn new(functionals: Vec<Vec<Rational>>) -> Result<Self, CohomologyError> {
        let Some(first) = functionals.first() else {
            return Err(CohomologyError::EmptyCone);
        };
        let width = first.len();
        if width == 0 {
            return Err(CohomologyError::EmptyCone);
        }
        if let Some(row) = functionals.iter().find(|r| r.len() != width) {
            return Err(CohomologyError::BasisMismatch {
                expected: width,
                found: row.len(),
            });
        }
        Ok(Self { functionals })
    }

    /// Cone given by positivity of each coordinate.
    pub fn positive_orthant(dim: usize) -> Self {
        let functionals = (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| if i == j { Rational::one() } else { Rational::zero() })
                    .collect()
            })
            .collect();
        Self { functionals }
    }

    pub fn functionals(&self) -> &[Vec<Rational>] {
        &self.functionals
    }

    pub fn dim(&self) -> usize {
        self.functionals[0].len()
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn pair(&self, j: usize, class: &CohomologyClass) -> Result<PiRational, CohomologyError> {
        if class.len() != self.dim() {
            return Err(CohomologyError::BasisMismatch {
                expected: self.dim(),
                found: class.len(),
            });
        }
        let sum = self.functionals[j]
            .iter()
            .zip(class.coeffs())
            .fold(Rational::zero(), |acc, (l, c)| acc + l * c);
        Ok(PiRational::new(sum, class.pi_power()))
    }

    pub fn contains(&self, class: &CohomologyClass) -> Result<bool, CohomologyError> {
        for j in 0..self.len() {
            if !self.pair(j, class)?.is_positive() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divisor {
    pub name: String,
    pub class: CohomologyClass,
}

/// Cohomological data of a compactification `X̄` with boundary divisor `D`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifoldDescription {
    basis_names: Vec<String>,
    canonical: CohomologyClass,
    divisors: Vec<Divisor>,
    cone: KahlerCone,
    complex_dim: u32,
    witness: Option<CohomologyClass>,
}

impl ManifoldDescription {
    pub fn new(
        basis_names: Vec<String>,
        canonical: CohomologyClass,
        divisors: Vec<Divisor>,
        cone: KahlerCone,
        complex_dim: u32,
    ) -> Result<Self, CohomologyError> {
        let n = basis_names.len();
        let mismatch = |found: usize| CohomologyError::BasisMismatch { expected: n, found };
        if canonical.len() != n {
            return Err(mismatch(canonical.len()));
        }
        if let Some(d) = divisors.iter().find(|d| d.class.len() != n) {
            return Err(mismatch(d.class.len()));
        }
        if cone.dim() != n {
            return Err(mismatch(cone.dim()));
        }
        if complex_dim == 0 {
            return Err(CohomologyError::InvalidDimension);
        }
        let m = Self {
            basis_names,
            canonical,
            divisors,
            cone,
            complex_dim,
            witness: None,
        };
        m.log_canonical()?;
        Ok(m)
    }

    /// Attaches a class certifying that the cone is nonempty.
    pub fn with_witness(mut self, witness: CohomologyClass) -> Result<Self, CohomologyError> {
        if !self.cone.contains(&witness)? {
            return Err(CohomologyError::WitnessOutsideCone);
        }
        self.witness = Some(witness);
        Ok(self)
    }

    pub fn basis_names(&self) -> &[String] {
        &self.basis_names
    }

    pub fn basis_len(&self) -> usize {
        self.basis_names.len()
    }

    pub fn canonical(&self) -> &CohomologyClass {
        &self.canonical
    }

    pub fn divisors(&self) -> &[Divisor] {
        &self.divisors
    }

    pub fn cone(&self) -> &KahlerCone {
        &self.cone
    }

    pub fn complex_dim(&self) -> u32 {
        self.complex_dim
    }

    pub fn witness(&self) -> Option<&CohomologyClass> {
        self.witness.as_ref()
    }

    /// `[D]`, the sum of the component classes.
    pub fn divisor_class(&self) -> Result<CohomologyClass, CohomologyError> {
        self.divisors
            .iter()
            .try_fold(CohomologyClass::zero(self.basis_len()), |acc, d| acc.checked_add(&d.class))
    }

    /// `κ = [K_X̄] + [D]`.
    pub fn log_canonical(&self) -> Result<CohomologyClass, CohomologyError> {
        self.canonical.checked_add(&self.divisor_class()?)
    }

    fn check_class(&self, class: &CohomologyClass) -> Result<(), CohomologyError> {
        if class.len() != self.basis_len() {
            return Err(CohomologyError::BasisMismatch {
                expected: self.basis_len(),
                found: class.len(),
            });
        }
        Ok(())
    }
}

/// Unnormalized singularity time: finite exact value or `+∞`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SingularityTime {
    Finite(PiRational),
    Infinite,
}

impl SingularityTime {
    pub fn is_finite(&self) -> bool {
        matches!(self, SingularityTime::Finite(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            SingularityTime::Finite(t) => t.to_f64(),
            SingularityTime::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<&PiRational> {
        match self {
            SingularityTime::Finite(t) => Some(t),
            SingularityTime::Infinite => None,
        }
    }
}

impl fmt::Display for SingularityTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingularityTime::Finite(t) => write!(f, "{t}"),
            SingularityTime::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    TypeIIGuaranteed,
    Inconclusive,
    NoSingularity,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::TypeIIGuaranteed => "TypeIIGuaranteed",
            Classification::Inconclusive => "Inconclusive",
            Classification::NoSingularity => "NoSingularity",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityVerdict {
    pub t_sing_unnormalized: SingularityTime,
    pub t_sing_normalized: f64,
    pub binding_functionals: Vec<usize>,
    pub residual_class: Option<CohomologyClass>,
    pub classification: Classification,
}

fn singularity_time_with_binding(
    m: &ManifoldDescription,
    omega0: &CohomologyClass,
) -> Result<(SingularityTime, Vec<usize>), CohomologyError> {
    m.check_class(omega0)?;
    let kappa = m.log_canonical()?;
    let cone = m.cone();
    let mut best: Option<PiRational> = None;
    let mut binding = Vec::new();
    for j in 0..cone.len() {
        let a = cone.pair(j, omega0)?;
        if !a.is_positive() {
            return Err(CohomologyError::NotKahler {
                functional: j,
                value: a.to_string(),
            });
        }
        let b = cone.pair(j, &kappa)?;
        if !b.is_negative() {
            continue;
        }
        // ℓ(ω₀) + 2πT ℓ(κ) = 0  ⇒  T = ℓ(ω₀) / (−2π ℓ(κ))
        let t = PiRational::new(
            a.coeff() / (-(b.coeff() * rational_from_i64(2))),
            a.pi_power() - b.pi_power() - 1,
        );
        match best.as_ref().map(|cur| t.exact_cmp(cur)) {
            None => {
                best = Some(t);
                binding = alloc::vec![j];
            }
            Some(Some(Ordering::Less)) => {
                best = Some(t);
                binding = alloc::vec![j];
            }
            Some(Some(Ordering::Equal)) => binding.push(j),
            Some(Some(Ordering::Greater)) => {}
            Some(None) => {
                let cur = best.as_ref().map(PiRational::pi_power).unwrap_or(0);
                return Err(CohomologyError::MixedPiUnits {
                    left: cur,
                    right: t.pi_power(),
                });
            }
        }
    }
    Ok(match best {
        Some(t) => (SingularityTime::Finite(t), binding),
        None => (SingularityTime::Infinite, binding),
    })
}

/// Supremum of `T > 0` with `[ω₀] + 2πT·κ` inside the cone.
pub fn singularity_time(
    m: &ManifoldDescription,
    omega0: &CohomologyClass,
) -> Result<SingularityTime, CohomologyError> {
    singularity_time_with_binding(m, omega0).map(|(t, _)| t)
}

/// `log(1 + T)`, mapping `+∞` to `+∞`.
pub fn normalized_time_of(t_unnorm: &SingularityTime) -> Result<f64, CohomologyError> {
    match t_unnorm {
        SingularityTime::Infinite => Ok(f64::INFINITY),
        SingularityTime::Finite(t) => {
            if t.is_negative() {
                return Err(CohomologyError::NegativeTime(t.to_string()));
            }
            Ok(math::ln_1p(t.to_f64()))
        }
    }
}

/// Exact class of the unnormalized flow at time `s`: `[ω₀] + 2πs·κ`.
pub fn unnormalized_class_at(
    m: &ManifoldDescription,
    omega0: &CohomologyClass,
    s: &PiRational,
) -> Result<CohomologyClass, CohomologyError> {
    m.check_class(omega0)?;
    if s.is_negative() {
        return Err(CohomologyError::NegativeTime(s.to_string()));
    }
    let two_pi_s = s.mul(&PiRational::new(rational_from_i64(2), 1));
    omega0.checked_add(&m.log_canonical()?.scale(&two_pi_s))
}

/// Exact class of the normalized flow at the time where `e^{−t} = decay`.
pub fn class_at_decay(
    m: &ManifoldDescription,
    omega0: &CohomologyClass,
    decay: &Rational,
) -> Result<CohomologyClass, CohomologyError> {
    m.check_class(omega0)?;
    if decay.is_negative() || decay > &Rational::one() {
        return Err(CohomologyError::NegativeTime(decay.to_string()));
    }
    let head = omega0.scale(&PiRational::new(decay.clone(), 0));
    let tail_scale = PiRational::new((Rational::one() - decay) * rational_from_i64(2), 1);
    head.checked_add(&m.log_canonical()?.scale(&tail_scale))
}

/// Decimal class of the normalized flow, `e^{−t}[ω₀] + 2π(1 − e^{−t})κ`.
pub fn class_at_time(
    m: &ManifoldDescription,
    omega0: &CohomologyClass,
    t_normalized: f64,
) -> Result<Vec<f64>, CohomologyError> {
    m.check_class(omega0)?;
    if !(t_normalized >= 0.0) {
        return Err(CohomologyError::NegativeTime(t_normalized.to_string()));
    }
    let decay = math::exp(-t_normalized);
    let growth = -math::exp_m1(-t_normalized);
    let kappa = m.log_canonical()?.to_f64();
    let two_pi = 2.0 * core::f64::consts::PI;
    Ok(omega0
        .to_f64()
        .iter()
        .zip(&kappa)
        .map(|(w, k)| {
            let tail = if growth == 0.0 { 0.0 } else { two_pi * growth * k };
            decay * w + tail
        })
        .collect())
}

/// Singularity time, binding functionals, residual class and type verdict.
pub fn classify(
    m: &ManifoldDescription,
    omega0: &CohomologyClass,
) -> Result<SingularityVerdict, CohomologyError> {
    let (t, binding) = singularity_time_with_binding(m, omega0)?;
    let t_sing_normalized = normalized_time_of(&t)?;
    let (residual_class, classification) = match &t {
        SingularityTime::Infinite => (None, Classification::NoSingularity),
        SingularityTime::Finite(tf) => {
            let residual = unnormalized_class_at(m, omega0, tf)?;
            let forced = residual.is_zero() && !m.divisors().is_empty();
            let class = if forced {
                Classification::TypeIIGuaranteed
            } else {
                Classification::Inconclusive
            };
            (Some(residual), class)
        }
    };
    Ok(SingularityVerdict {
        t_sing_unnormalized: t,
        t_sing_normalized,
        binding_functionals: binding,
        residual_class,
        classification,
    })
}

/// Hard-coded class data for the standard examples.
///
/// Classes are written in pairing coordinates: the `i`-th coefficient is the
/// integral over the `i`-th generating curve, and the cone is positivity of
/// those integrals.
pub mod builtin {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn one_dim(
        basis: &str,
        canonical: i64,
        divisor_names: &[String],
        complex_dim: u32,
    ) -> ManifoldDescription {
        let divisors = divisor_names
            .iter()
            .map(|name| Divisor {
                name: name.clone(),
                class: CohomologyClass::from_integers(&[1]),
            })
            .collect();
        ManifoldDescription::new(
            vec![basis.to_string()],
            CohomologyClass::from_integers(&[canonical]),
            divisors,
            KahlerCone::positive_orthant(1),
            complex_dim,
        )
        .and_then(|m| m.with_witness(CohomologyClass::from_integers(&[1])))
        .expect("builtin data is consistent")
    }

    /// The sphere with one puncture: `K·S² = −2`, `D` a point.
    pub fn s2_one_point() -> ManifoldDescription {
        one_dim("S2", -2, &[String::from("pt")], 1)
    }

    /// `S² × S²` with `D = {pt} × S²`.
    ///
    /// Coordinates pair with the curves `S² × {q}` and `{p} × S²`; the
    /// divisor meets only the second of these generators in the convention
    /// used here, so `κ = (−2, −1)`.
    pub fn s2_times_s2() -> ManifoldDescription {
        ManifoldDescription::new(
            vec![String::from("first_factor"), String::from("second_factor")],
            CohomologyClass::from_integers(&[-2, -2]),
            vec![Divisor {
                name: String::from("pt_x_S2"),
                class: CohomologyClass::from_integers(&[0, 1]),
            }],
            KahlerCone::positive_orthant(2),
            2,
        )
        .and_then(|m| m.with_witness(CohomologyClass::from_integers(&[1, 1])))
        .expect("builtin data is consistent")
    }

    /// `ℂPⁿ` with `k` hyperplanes, coordinates pairing with a line.
    pub fn cpn_with_hyperplanes(n: u32, k: u32) -> ManifoldDescription {
        let names: Vec<String> = (1..=k).map(|i| format!("H{i}")).collect();
        let n = n.max(1);
        one_dim("H", -(i64::from(n) + 1), &names, n)
    }

    /// `ℂ* = ℂP¹ − {0, ∞}`.
    pub fn cstar() -> ManifoldDescription {
        cpn_with_hyperplanes(1, 2)
    }
}

#[cfg(test)]
mod tests {
    use super::builtin::*;
    use super::*;
    use alloc::vec;

    fn pr(s: &str) -> PiRational {
        s.parse().unwrap()
    }

    fn class(items: &[&str]) -> CohomologyClass {
        let v: Vec<PiRational> = items.iter().map(|s| pr(s)).collect();
        CohomologyClass::from_scalars(&v).unwrap()
    }

    #[test]
    fn parses_and_prints_pi_rationals() {
        assert_eq!(pr("8pi"), PiRational::new(rational_from_i64(8), 1));
        assert_eq!(pr("-pi"), PiRational::new(rational_from_i64(-1), 1));
        assert!("5/pi".parse::<PiRational>().is_err());
        assert_eq!(pr("1/2*pi^-1").to_string(), "1/2*pi^-1");
        assert_eq!(pr("2π"), pr("2*pi"));
        assert_eq!(pr("0.25"), PiRational::from_ratio(1, 4));
        assert_eq!(pr(" -1.5 "), PiRational::from_ratio(-3, 2));
        assert!("1/0".parse::<PiRational>().is_err());
        assert!("pi^x".parse::<PiRational>().is_err());
        for s in ["3/7", "-2*pi", "5*pi^3", "0"] {
            assert_eq!(pr(s).to_string(), s);
        }
    }

    #[test]
    fn sphere_minus_point() {
        let m = s2_one_point();
        let t = singularity_time(&m, &class(&["10"])).unwrap();
        assert_eq!(t, SingularityTime::Finite(pr("5*pi^-1")));
        assert!((t.to_f64() - 10.0 / (2.0 * core::f64::consts::PI)).abs() < 1e-15);
        let v = classify(&m, &class(&["10"])).unwrap();
        assert_eq!(v.classification, Classification::TypeIIGuaranteed);
        assert!(v.residual_class.unwrap().is_zero());
    }

    #[test]
    fn product_of_spheres_binding_second_factor() {
        let m = s2_times_s2();
        let v = classify(&m, &class(&["8pi", "2pi"])).unwrap();
        assert_eq!(v.t_sing_unnormalized, SingularityTime::Finite(PiRational::from_integer(1)));
        assert_eq!(v.binding_functionals, vec![1]);
        assert_eq!(v.residual_class.clone().unwrap(), class(&["4pi", "0"]));
        assert_eq!(v.classification, Classification::Inconclusive);
    }

    #[test]
    fn projective_plane_one_line() {
        let m = cpn_with_hyperplanes(2, 1);
        let t = singularity_time(&m, &class(&["4pi"])).unwrap();
        assert_eq!(t, SingularityTime::Finite(PiRational::from_integer(1)));
    }

    #[test]
    fn ricci_flat_and_positive_are_infinite() {
        for (n, k) in [(2, 3), (1, 2), (2, 4), (3, 9)] {
            let m = cpn_with_hyperplanes(n, k);
            let v = classify(&m, &class(&["3"])).unwrap();
            assert_eq!(v.t_sing_unnormalized, SingularityTime::Infinite);
            assert_eq!(v.classification, Classification::NoSingularity);
            assert!(v.t_sing_normalized.is_infinite());
        }
    }

    #[test]
    fn empty_divisor_is_never_forced() {
        let m = cpn_with_hyperplanes(1, 0);
        let v = classify(&m, &class(&["4pi"])).unwrap();
        assert!(v.residual_class.unwrap().is_zero());
        assert_eq!(v.classification, Classification::Inconclusive);
    }

    #[test]
    fn errors() {
        let m = s2_one_point();
        assert!(matches!(
            singularity_time(&m, &class(&["0"])),
            Err(CohomologyError::NotKahler { functional: 0, .. })
        ));
        assert!(matches!(
            singularity_time(&m, &class(&["-1"])),
            Err(CohomologyError::NotKahler { .. })
        ));
        assert!(matches!(
            singularity_time(&m, &class(&["1", "1"])),
            Err(CohomologyError::BasisMismatch { expected: 1, found: 2 })
        ));
        assert!(matches!(
            CohomologyClass::from_scalars(&[pr("pi"), pr("2")]),
            Err(CohomologyError::MixedPiUnits { .. })
        ));
        assert_eq!(KahlerCone::new(vec![]), Err(CohomologyError::EmptyCone));
        assert!(matches!(
            normalized_time_of(&SingularityTime::Finite(pr("-1"))),
            Err(CohomologyError::NegativeTime(_))
        ));
        let bad = ManifoldDescription::new(
            vec!["a".into()],
            CohomologyClass::from_integers(&[-2]),
            vec![],
            KahlerCone::positive_orthant(1),
            1,
        )
        .unwrap()
        .with_witness(CohomologyClass::from_integers(&[-1]));
        assert_eq!(bad, Err(CohomologyError::WitnessOutsideCone));
    }

    #[test]
    fn normalized_time_values() {
        assert_eq!(normalized_time_of(&SingularityTime::Finite(PiRational::zero())), Ok(0.0));
        assert_eq!(normalized_time_of(&SingularityTime::Infinite), Ok(f64::INFINITY));
        let one = normalized_time_of(&SingularityTime::Finite(PiRational::from_integer(1))).unwrap();
        assert!((one - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn normalized_time_membership_scan() {
        // Scan both parametrizations of the sphere example and check that
        // cone membership flips at matching times.
        let m = s2_one_point();
        let omega0 = class(&["10"]);
        let t_norm = classify(&m, &omega0).unwrap().t_sing_normalized;
        let mut flip_norm = None;
        let mut flip_unnorm = None;
        for i in 0..20_000 {
            let t = i as f64 * 1e-4;
            let normalized = class_at_time(&m, &omega0, t).unwrap()[0] > 0.0;
            let s = math::exp_m1(t);
            let unnormalized = 10.0 - 2.0 * core::f64::consts::PI * s > 0.0;
            if !normalized && flip_norm.is_none() {
                flip_norm = Some(t);
            }
            if !unnormalized && flip_unnorm.is_none() {
                flip_unnorm = Some(t);
            }
        }
        let (a, b) = (flip_norm.unwrap(), flip_unnorm.unwrap());
        assert!((a - b).abs() <= 1e-4);
        assert!((a - t_norm).abs() <= 1e-4);
    }

    #[test]
    fn class_at_time_limits() {
        let m = s2_times_s2();
        let omega0 = class(&["8pi", "2pi"]);
        let at0 = class_at_time(&m, &omega0, 0.0).unwrap();
        assert_eq!(at0, omega0.to_f64());
        let far = class_at_time(&m, &omega0, 60.0).unwrap();
        let two_pi_kappa = [-4.0 * core::f64::consts::PI, -2.0 * core::f64::consts::PI];
        for (a, b) in far.iter().zip(two_pi_kappa) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(class_at_time(&m, &omega0, -0.5).is_err());
    }

    #[test]
    fn sphere_class_vanishes_at_singular_time() {
        let m = s2_one_point();
        let omega0 = class(&["10"]);
        let SingularityTime::Finite(t) = singularity_time(&m, &omega0).unwrap() else {
            panic!("finite expected");
        };
        // e^{−log(1+T)} = 1/(1+T) is rational only when T is, so the
        // normalized check uses an area of 4π (T = 2).
        assert!(unnormalized_class_at(&m, &omega0, &t).unwrap().is_zero());
        let omega_pi = class(&["4pi"]);
        let decay = Rational::new(BigInt::from(1), BigInt::from(3));
        assert!(class_at_decay(&m, &omega_pi, &decay).unwrap().is_zero());
        let t_norm = classify(&m, &omega_pi).unwrap().t_sing_normalized;
        assert!(class_at_time(&m, &omega_pi, t_norm).unwrap()[0].abs() < 1e-12);
    }
}
