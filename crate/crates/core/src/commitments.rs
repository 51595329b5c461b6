//! Two-message receiver-basis commitment and the share-pair extractable
//! commitment (ExtCom) with its rewinding extractor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, GroupElement, GroupParams, Rng, Scalar};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommitError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("opened share {pair} does not verify")]
    ShareMismatch { pair: usize },
    #[error("malformed extcom message: {0}")]
    Malformed(String),
    #[error("rewinding budget exhausted after {0} attempts")]
    BudgetExhausted(usize),
}

/// First message `β`: the element `h = g^s`. The exponent is kept only by the
/// party that sampled it (and by the harness for instrumentation).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverBasis {
    pub h: GroupElement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_secret: Option<Scalar>,
}

impl ReceiverBasis {
    pub fn public(h: GroupElement) -> Self {
        ReceiverBasis { h, s_secret: None }
    }

    /// Copy without the secret exponent.
    pub fn strip(&self) -> Self {
        ReceiverBasis::public(self.h.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Commitment {
    pub u: GroupElement,
    pub v: GroupElement,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opening {
    pub m: Scalar,
    pub r: Scalar,
}

/// `τ = (β, com)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NaorTranscript {
    pub basis: ReceiverBasis,
    pub com: Commitment,
}

pub fn basis_from_secret(params: &GroupParams, s: Scalar) -> ReceiverBasis {
    ReceiverBasis {
        h: params.f_eval(&s),
        s_secret: Some(s),
    }
}

pub fn basis_gen(params: &GroupParams, rng: &mut Rng) -> ReceiverBasis {
    let s = rng.scalar(params);
    basis_from_secret(params, s)
}

/// `(u, v) = (g^r, h^r g^m)`.
pub fn commit(params: &GroupParams, h: &GroupElement, m: &Scalar, r: &Scalar) -> Commitment {
    Commitment {
        u: params.f_eval(r),
        v: params.mul(&params.exp(h, r), &params.f_eval(m)),
    }
}

pub fn commit_fresh(params: &GroupParams, h: &GroupElement, m: &Scalar, rng: &mut Rng) -> (Commitment, Opening) {
    let r = rng.scalar(params);
    (commit(params, h, m, &r), Opening { m: m.clone(), r })
}

pub fn commitment_well_formed(params: &GroupParams, com: &Commitment) -> bool {
    params.is_member(&com.u) && params.is_member(&com.v)
}

/// Accepts iff both components are subgroup elements and `com = Com_h(m; r)`.
pub fn verify_open(params: &GroupParams, h: &GroupElement, com: &Commitment, opening: &Opening) -> bool {
    if opening.m.value() >= &params.q || opening.r.value() >= &params.q {
        return false;
    }
    if !params.is_member(h) || !commitment_well_formed(params, com) {
        return false;
    }
    commit(params, h, &opening.m, &opening.r) == *com
}

/// The unique committed value of a transcript, or `None` when no opening exists.
///
/// Uses, in order: a side-channel opening if one is supplied and verifies,
/// the basis secret (`m = dlog(v * u^{-s})`), or a full scan recovering `r`
/// and then `m`. The latter two need a brute-forceable group.
pub fn val_oracle(
    params: &GroupParams,
    tr: &NaorTranscript,
    side_channel: Option<&Opening>,
) -> Result<Option<Scalar>, CommitError> {
    if !params.is_member(&tr.basis.h) || !commitment_well_formed(params, &tr.com) {
        return Ok(None);
    }
    if let Some(op) = side_channel {
        if verify_open(params, &tr.basis.h, &tr.com, op) {
            return Ok(Some(op.m.clone()));
        }
    }
    if let Some(s) = &tr.basis.s_secret {
        if params.dlog_feasible() {
            let gm = params.div(&tr.com.v, &params.exp(&tr.com.u, s));
            return Ok(params.dlog_bruteforce(&gm)?);
        }
    }
    val_by_scan(params, tr)
}

/// Oracle route that never looks at the basis secret.
pub fn val_by_scan(params: &GroupParams, tr: &NaorTranscript) -> Result<Option<Scalar>, CommitError> {
    if !params.is_member(&tr.basis.h) || !commitment_well_formed(params, &tr.com) {
        return Ok(None);
    }
    let r = match params.dlog_bruteforce(&tr.com.u)? {
        Some(r) => r,
        None => return Ok(None),
    };
    let gm = params.div(&tr.com.v, &params.exp(&tr.basis.h, &r));
    Ok(params.dlog_bruteforce(&gm)?)
}

// ---------------------------------------------------------------------------
// ExtCom
// ---------------------------------------------------------------------------

/// Default statistical parameter for ExtCom.
pub const DEFAULT_EXTCOM_PAIRS: usize = 20;

/// Public record of one ExtCom commit phase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtComTranscript {
    pub n_pairs: usize,
    pub pair_commitments: Vec<(Commitment, Commitment)>,
    #[serde(with = "bitstring")]
    pub challenge: Vec<bool>,
    pub opened: Vec<Opening>,
}

/// Openings of the shares left closed by the challenge, in pair order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtComDecommit {
    pub unopened: Vec<Opening>,
}

mod bitstring {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
        let txt: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        s.serialize_str(&txt)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let txt = String::deserialize(d)?;
        txt.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(serde::de::Error::custom("bit strings use only 0 and 1")),
            })
            .collect()
    }
}

/// Committer side: holds the share openings `(s_i^0, s_i^1)` with `s_i^0 + s_i^1 = m`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtComCommitter {
    pub m: Scalar,
    pub shares: Vec<(Opening, Opening)>,
    pub commitments: Vec<(Commitment, Commitment)>,
}

impl ExtComCommitter {
    pub fn new(params: &GroupParams, h: &GroupElement, m: &Scalar, n_pairs: usize, rng: &mut Rng) -> Self {
        let shares: Vec<Scalar> = (0..n_pairs).map(|_| rng.scalar(params)).collect();
        Self::with_shares(params, h, m, &shares, rng)
    }

    /// Builds a committer from explicit first shares `s_i^0`; `s_i^1 = m - s_i^0`.
    pub fn with_shares(params: &GroupParams, h: &GroupElement, m: &Scalar, first: &[Scalar], rng: &mut Rng) -> Self {
        let mut shares = Vec::with_capacity(first.len());
        let mut commitments = Vec::with_capacity(first.len());
        for s0 in first {
            let s1 = params.s_sub(m, s0);
            let (c0, o0) = commit_fresh(params, h, s0, rng);
            let (c1, o1) = commit_fresh(params, h, &s1, rng);
            shares.push((o0, o1));
            commitments.push((c0, c1));
        }
        ExtComCommitter {
            m: m.clone(),
            shares,
            commitments,
        }
    }

    /// Fully specified committer, used for hand-built examples.
    pub fn with_openings(params: &GroupParams, h: &GroupElement, m: &Scalar, shares: Vec<(Opening, Opening)>) -> Self {
        let commitments = shares
            .iter()
            .map(|(a, b)| (commit(params, h, &a.m, &a.r), commit(params, h, &b.m, &b.r)))
            .collect();
        ExtComCommitter {
            m: m.clone(),
            shares,
            commitments,
        }
    }

    pub fn first_message(&self) -> Vec<(Commitment, Commitment)> {
        self.commitments.clone()
    }

    pub fn open(&self, challenge: &[bool]) -> Vec<Opening> {
        self.shares
            .iter()
            .zip(challenge)
            .map(|((a, b), &c)| if c { b.clone() } else { a.clone() })
            .collect()
    }

    pub fn decommit(&self, challenge: &[bool]) -> ExtComDecommit {
        ExtComDecommit {
            unopened: self
                .shares
                .iter()
                .zip(challenge)
                .map(|((a, b), &c)| if c { a.clone() } else { b.clone() })
                .collect(),
        }
    }
}

/// Receiver check of the third message against the challenge.
pub fn extcom_check_open(
    params: &GroupParams,
    h: &GroupElement,
    coms: &[(Commitment, Commitment)],
    challenge: &[bool],
    opened: &[Opening],
) -> Result<(), CommitError> {
    if coms.len() != challenge.len() || opened.len() != challenge.len() {
        return Err(CommitError::Malformed("length mismatch".into()));
    }
    for (i, ((c0, c1), (&bit, op))) in coms.iter().zip(challenge.iter().zip(opened)).enumerate() {
        let c = if bit { c1 } else { c0 };
        if !verify_open(params, h, c, op) {
            return Err(CommitError::ShareMismatch { pair: i });
        }
    }
    Ok(())
}

/// Runs the three-round commit phase between an honest committer and an
/// honest receiver.
pub fn extcom_run(
    params: &GroupParams,
    h: &GroupElement,
    m: &Scalar,
    n_pairs: usize,
    committer_rng: &mut Rng,
    receiver_rng: &mut Rng,
) -> Result<(ExtComTranscript, ExtComDecommit), CommitError> {
    let committer = ExtComCommitter::new(params, h, m, n_pairs, committer_rng);
    extcom_run_with(params, h, &committer, receiver_rng)
}

pub fn extcom_run_with(
    params: &GroupParams,
    h: &GroupElement,
    committer: &ExtComCommitter,
    receiver_rng: &mut Rng,
) -> Result<(ExtComTranscript, ExtComDecommit), CommitError> {
    let coms = committer.first_message();
    let challenge = receiver_rng.bits(coms.len());
    let opened = committer.open(&challenge);
    extcom_check_open(params, h, &coms, &challenge, &opened)?;
    let decommit = committer.decommit(&challenge);
    Ok((
        ExtComTranscript {
            n_pairs: coms.len(),
            pair_commitments: coms,
            challenge,
            opened,
        },
        decommit,
    ))
}

/// Accepts iff every pair has both shares verified and summing to `m`.
pub fn extcom_verify_decommit(
    params: &GroupParams,
    h: &GroupElement,
    tr: &ExtComTranscript,
    m: &Scalar,
    dec: &ExtComDecommit,
) -> bool {
    let n = tr.pair_commitments.len();
    if tr.challenge.len() != n || tr.opened.len() != n || dec.unopened.len() != n {
        return false;
    }
    for i in 0..n {
        let (c0, c1) = &tr.pair_commitments[i];
        let (open_c, closed_c) = if tr.challenge[i] { (c1, c0) } else { (c0, c1) };
        if !verify_open(params, h, open_c, &tr.opened[i]) || !verify_open(params, h, closed_c, &dec.unopened[i]) {
            return false;
        }
        if params.s_add(&tr.opened[i].m, &dec.unopened[i].m) != *m {
            return false;
        }
    }
    true
}

/// A committer paused before its first ExtCom message that can be cloned to
/// replay the challenge round.
pub trait ResumableCommitter: Clone {
    /// Advances to and returns the first message; `None` if the committer aborts.
    fn commit_message(&mut self) -> Option<Vec<(Commitment, Commitment)>>;
    /// Answers a challenge; `None` if the committer aborts.
    fn respond(&mut self, challenge: &[bool]) -> Option<Vec<Opening>>;
}

/// Honest committer wrapper used by standalone experiments.
#[derive(Clone, Debug)]
pub struct HonestExtCom {
    pub committer: ExtComCommitter,
}

impl ResumableCommitter for HonestExtCom {
    fn commit_message(&mut self) -> Option<Vec<(Commitment, Commitment)>> {
        Some(self.committer.first_message())
    }
    fn respond(&mut self, challenge: &[bool]) -> Option<Vec<Opening>> {
        Some(self.committer.open(challenge))
    }
}

/// Committer that never sends anything.
#[derive(Clone, Debug, Default)]
pub struct AbortingExtCom;

impl ResumableCommitter for AbortingExtCom {
    fn commit_message(&mut self) -> Option<Vec<(Commitment, Commitment)>> {
        None
    }
    fn respond(&mut self, _: &[bool]) -> Option<Vec<Opening>> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct ExtComExtraction<C> {
    /// Main-thread transcript; `None` when the committer aborted or was caught cheating.
    pub view: Option<ExtComTranscript>,
    /// Committer state after the main thread.
    pub state: C,
    pub sigma: Option<Scalar>,
    pub exhausted: bool,
    pub rewinds: usize,
}

/// Main thread with a fresh challenge, then rewinds to the challenge until
/// some pair is opened at both positions.
pub fn extcom_extract<C: ResumableCommitter>(
    params: &GroupParams,
    h: &GroupElement,
    snapshot: C,
    rng: &mut Rng,
    budget: usize,
) -> ExtComExtraction<C> {
    let mut main = snapshot;
    let coms = match main.commit_message() {
        Some(c) => c,
        None => {
            return ExtComExtraction {
                view: None,
                state: main,
                sigma: None,
                exhausted: false,
                rewinds: 0,
            }
        }
    };
    let pre = main.clone();
    let n = coms.len();
    let challenge = rng.bits(n);
    let opened = match main.respond(&challenge) {
        Some(o) if extcom_check_open(params, h, &coms, &challenge, &o).is_ok() => o,
        _ => {
            return ExtComExtraction {
                view: None,
                state: main,
                sigma: None,
                exhausted: false,
                rewinds: 0,
            }
        }
    };
    let view = ExtComTranscript {
        n_pairs: n,
        pair_commitments: coms.clone(),
        challenge: challenge.clone(),
        opened: opened.clone(),
    };
    let mut rewinds = 0;
    while rewinds < budget {
        rewinds += 1;
        let alt = rng.bits(n);
        if alt == challenge {
            continue;
        }
        let mut thread = pre.clone();
        let Some(alt_open) = thread.respond(&alt) else { continue };
        if extcom_check_open(params, h, &coms, &alt, &alt_open).is_err() {
            continue;
        }
        let i = (0..n).find(|&i| alt[i] != challenge[i]).expect("challenges differ");
        let m = params.s_add(&opened[i].m, &alt_open[i].m);
        return ExtComExtraction {
            view: Some(view),
            state: main,
            sigma: Some(m),
            exhausted: false,
            rewinds,
        };
    }
    ExtComExtraction {
        view: Some(view),
        state: main,
        sigma: None,
        exhausted: true,
        rewinds,
    }
}
