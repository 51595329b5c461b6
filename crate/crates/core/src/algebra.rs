//! Prime-order subgroup arithmetic, the one-way function `f(x) = g^x`,
//! seeded randomness and a small-group discrete-log oracle.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Largest subgroup order for which the discrete-log oracle runs.
pub const DLOG_GUARD_BITS: u32 = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("unknown group profile `{0}`")]
    UnknownProfile(String),
    #[error("invalid group parameters: {0}")]
    InvalidParams(String),
    #[error("group too large for brute force (q has {bits} bits, guard is {guard})")]
    GroupTooLarge { bits: u64, guard: u32 },
    #[error("value is not an element of the order-q subgroup")]
    NotInSubgroup,
    #[error("fixture error: {0}")]
    Fixture(String),
}

pub(crate) mod hexnum {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(16))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let txt = String::deserialize(d)?;
        let txt = txt.trim_start_matches("0x");
        BigUint::parse_bytes(txt.as_bytes(), 16)
            .ok_or_else(|| serde::de::Error::custom(format!("bad hex integer `{txt}`")))
    }
}

/// An exponent in `Z_q`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scalar(#[serde(with = "hexnum")] BigUint);

/// An element of the order-`q` subgroup of `Z_p^*`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement(#[serde(with = "hexnum")] BigUint);

impl Scalar {
    /// Wraps a raw integer. Callers reduce modulo `q` through [`GroupParams::scalar`].
    pub fn from_raw(v: BigUint) -> Self {
        Scalar(v)
    }
    pub fn value(&self) -> &BigUint {
        &self.0
    }
    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl GroupElement {
    /// Wraps a raw integer without any membership check.
    pub fn from_raw(v: BigUint) -> Self {
        GroupElement(v)
    }
    pub fn value(&self) -> &BigUint {
        &self.0
    }
    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}
impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}", self.0)
    }
}
impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Group description: `g` generates the subgroup of prime order `q` in `Z_p^*`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupParams {
    pub name: String,
    #[serde(with = "hexnum")]
    pub p: BigUint,
    #[serde(with = "hexnum")]
    pub q: BigUint,
    #[serde(with = "hexnum")]
    pub g: BigUint,
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupParams({}, q={} bits)", self.name, self.q.bits())
    }
}

/// Shared handle used throughout the crate.
pub type Group = Arc<GroupParams>;

const TEST_Q20_FIXTURE: &str = include_str!("../fixtures/test-q20.json");
const MODP1536_FIXTURE: &str = include_str!("../fixtures/modp1536.json");

/// Names accepted by [`group_profile`].
pub const PROFILE_NAMES: [&str; 3] = ["test23", "test-q20", "modp1536"];

/// Loads one of the built-in group profiles and validates it.
pub fn group_profile(name: &str) -> Result<Group, AlgebraError> {
    let params = match name {
        "test23" => GroupParams {
            name: "test23".into(),
            p: BigUint::from(23u32),
            q: BigUint::from(11u32),
            g: BigUint::from(2u32),
        },
        "test-q20" => GroupParams::from_json(TEST_Q20_FIXTURE)?,
        "modp1536" => GroupParams::from_json(MODP1536_FIXTURE)?,
        other => return Err(AlgebraError::UnknownProfile(other.to_string())),
    };
    params.validate()?;
    Ok(Arc::new(params))
}

/// Loads and validates a profile from a JSON fixture file.
pub fn group_from_file(path: &Path) -> Result<Group, AlgebraError> {
    let txt = std::fs::read_to_string(path).map_err(|e| AlgebraError::Fixture(e.to_string()))?;
    let params = GroupParams::from_json(&txt)?;
    params.validate()?;
    Ok(Arc::new(params))
}

/// Miller-Rabin with fixed small-prime bases plus a handful of derived ones.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    const SMALL: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &sp in &SMALL {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n1 = n - &one;
    let mut d = n1.clone();
    let mut s = 0u32;
    while d.is_even() {
        d >>= 1;
        s += 1;
    }
    'witness: for &a in &SMALL {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x == one || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

impl GroupParams {
    pub fn from_json(txt: &str) -> Result<Self, AlgebraError> {
        serde_json::from_str(txt).map_err(|e| AlgebraError::Fixture(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("group params serialize")
    }

    /// Checks primality of `p` and `q`, `q | p-1`, `g != 1` and `g^q = 1`.
    pub fn validate(&self) -> Result<(), AlgebraError> {
        let one = BigUint::one();
        if !is_probable_prime(&self.p) {
            return Err(AlgebraError::InvalidParams("p is not prime".into()));
        }
        if !is_probable_prime(&self.q) {
            return Err(AlgebraError::InvalidParams("q is not prime".into()));
        }
        if !((&self.p - &one) % &self.q).is_zero() {
            return Err(AlgebraError::InvalidParams("q does not divide p-1".into()));
        }
        let g = &self.g % &self.p;
        if g.is_zero() || g == one {
            return Err(AlgebraError::InvalidParams("g is trivial".into()));
        }
        if g.modpow(&self.q, &self.p) != one {
            return Err(AlgebraError::InvalidParams("g^q != 1".into()));
        }
        Ok(())
    }

    pub fn generator(&self) -> GroupElement {
        GroupElement(self.g.clone())
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(BigUint::one())
    }

    /// Reduces an integer modulo `q`.
    pub fn scalar(&self, v: impl Into<BigUint>) -> Scalar {
        Scalar(v.into() % &self.q)
    }

    pub fn scalar_u64(&self, v: u64) -> Scalar {
        self.scalar(BigUint::from(v))
    }

    pub fn zero(&self) -> Scalar {
        Scalar(BigUint::zero())
    }

    /// Subgroup membership: `1 <= v < p` and `v^q = 1 mod p`.
    pub fn is_member(&self, e: &GroupElement) -> bool {
        !e.0.is_zero() && e.0 < self.p && e.0.modpow(&self.q, &self.p).is_one()
    }

    /// Checked constructor for group elements.
    pub fn element(&self, v: impl Into<BigUint>) -> Result<GroupElement, AlgebraError> {
        let e = GroupElement(v.into());
        if self.is_member(&e) {
            Ok(e)
        } else {
            Err(AlgebraError::NotInSubgroup)
        }
    }

    /// The one-way function `f(x) = g^x mod p`.
    pub fn f_eval(&self, x: &Scalar) -> GroupElement {
        GroupElement(self.g.modpow(&x.0, &self.p))
    }

    pub fn exp(&self, base: &GroupElement, e: &Scalar) -> GroupElement {
        GroupElement(base.0.modpow(&e.0, &self.p))
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement((&a.0 * &b.0) % &self.p)
    }

    /// Inverse in `Z_p^*` (Fermat).
    pub fn inv(&self, a: &GroupElement) -> GroupElement {
        let e = &self.p - BigUint::from(2u32);
        GroupElement(a.0.modpow(&e, &self.p))
    }

    pub fn div(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        self.mul(a, &self.inv(b))
    }

    /// Product of `base_i^{e_i}`.
    pub fn multi_exp(&self, terms: &[(&GroupElement, &Scalar)]) -> GroupElement {
        let mut acc = BigUint::one();
        for (b, e) in terms {
            acc = (acc * b.0.modpow(&e.0, &self.p)) % &self.p;
        }
        GroupElement(acc)
    }

    pub fn s_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn s_sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &self.q - &b.0 % &self.q) % &self.q)
    }

    pub fn s_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 * &b.0) % &self.q)
    }

    pub fn s_neg(&self, a: &Scalar) -> Scalar {
        self.s_sub(&self.zero(), a)
    }

    /// Inverse modulo the prime `q`; `None` for zero.
    pub fn s_inv(&self, a: &Scalar) -> Option<Scalar> {
        if (&a.0 % &self.q).is_zero() {
            return None;
        }
        let e = &self.q - BigUint::from(2u32);
        Some(Scalar(a.0.modpow(&e, &self.q)))
    }

    pub fn dlog_feasible(&self) -> bool {
        self.q.bits() <= DLOG_GUARD_BITS as u64
    }

    /// Discrete log of `y` base `g`, or `Ok(None)` when `y` is outside the subgroup.
    ///
    /// Exhaustive search organised as baby-step/giant-step, so the answer is
    /// the unique exponent in `[0, q)`.
    pub fn dlog_bruteforce(&self, y: &GroupElement) -> Result<Option<Scalar>, AlgebraError> {
        if !self.dlog_feasible() {
            return Err(AlgebraError::GroupTooLarge {
                bits: self.q.bits(),
                guard: DLOG_GUARD_BITS,
            });
        }
        if !self.is_member(y) {
            return Ok(None);
        }
        let q = self.q.to_u64().expect("guarded");
        let p = self.p.to_u64();
        let m = (q as f64).sqrt().ceil() as u64;
        match p {
            Some(p) if p < (1u64 << 32) => {
                let g = self.g.to_u64().unwrap();
                let y = y.0.to_u64().unwrap();
                let mut table = HashMap::with_capacity(m as usize);
                let mut cur = 1u64;
                for j in 0..m {
                    table.entry(cur).or_insert(j);
                    cur = cur * g % p;
                }
                // factor = g^{-m}
                let gm = BigUint::from(g).modpow(&BigUint::from(m), &BigUint::from(p));
                let factor = gm.modpow(&BigUint::from(p - 2), &BigUint::from(p)).to_u64().unwrap();
                let mut gamma = y;
                for i in 0..=m {
                    if let Some(j) = table.get(&gamma) {
                        let x = i * m + j;
                        if x < q {
                            return Ok(Some(self.scalar_u64(x)));
                        }
                    }
                    gamma = gamma * factor % p;
                }
                Ok(None)
            }
            _ => {
                let mut table = HashMap::with_capacity(m as usize);
                let mut cur = BigUint::one();
                for j in 0..m {
                    table.entry(cur.clone()).or_insert(j);
                    cur = (cur * &self.g) % &self.p;
                }
                let gm = self.g.modpow(&BigUint::from(m), &self.p);
                let factor = self.inv(&GroupElement(gm)).0;
                let mut gamma = y.0.clone();
                for i in 0..=m {
                    if let Some(j) = table.get(&gamma) {
                        let x = i * m + j;
                        if x < q {
                            return Ok(Some(self.scalar_u64(x)));
                        }
                    }
                    gamma = (gamma * &factor) % &self.p;
                }
                Ok(None)
            }
        }
    }

    pub fn q_u64(&self) -> Option<u64> {
        self.q.to_u64()
    }
}

/// Free-function form of [`GroupParams::f_eval`].
pub fn f_eval(params: &GroupParams, x: &Scalar) -> GroupElement {
    params.f_eval(x)
}

/// Free-function form of [`GroupParams::dlog_bruteforce`].
pub fn dlog_bruteforce(params: &GroupParams, y: &GroupElement) -> Result<Option<Scalar>, AlgebraError> {
    params.dlog_bruteforce(y)
}

/// Deterministic ChaCha20 stream with hierarchical splitting.
///
/// Children are derived from the creation seed path and a label, never from
/// the current stream position, so drawing from a parent does not perturb
/// its children.
#[derive(Clone, Serialize, Deserialize, PartialEq)]
pub struct Rng {
    path: [u8; 32],
    inner: ChaCha20Rng,
}

impl fmt::Debug for Rng {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Rng({:02x}{:02x}{:02x}{:02x}..)",
            self.path[0], self.path[1], self.path[2], self.path[3]
        )
    }
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"nmcom-root");
        h.update(seed.to_le_bytes());
        Self::from_path(h.finalize().into())
    }

    fn from_path(path: [u8; 32]) -> Self {
        Rng {
            path,
            inner: ChaCha20Rng::from_seed(path),
        }
    }

    /// Child stream named by `label`.
    pub fn split(&self, label: &str) -> Rng {
        self.child(label, 0)
    }

    /// Child stream named by `label` and an index (trial number, party id, ...).
    pub fn child(&self, label: &str, index: u64) -> Rng {
        let mut h = Sha256::new();
        h.update(self.path);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        Self::from_path(h.finalize().into())
    }

    /// Fresh independent stream drawn from the current position.
    pub fn fork(&mut self) -> Rng {
        let mut seed = [0u8; 32];
        self.inner.fill_bytes(&mut seed);
        Self::from_path(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn fill_bytes(&mut self, buf: &mut [u8]) {
        self.inner.fill_bytes(buf)
    }

    pub fn bit(&mut self) -> bool {
        self.inner.gen::<bool>()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u64) -> u64 {
        self.inner.gen_range(0..n)
    }

    /// Uniform float in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform scalar in `Z_q`.
    pub fn scalar(&mut self, params: &GroupParams) -> Scalar {
        Scalar(self.inner.gen_biguint_below(&params.q))
    }

    pub fn bits(&mut self, n: usize) -> Vec<bool> {
        (0..n).map(|_| self.bit()).collect()
    }
}
