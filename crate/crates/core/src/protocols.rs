//! Message-driven committer and receiver for the one-sided, two-slot
//! synchronous and asynchronous protocols.
//!
//! A protocol run is a fixed list of [`StepId`]s (the plan). Each step has
//! exactly one sender; parties advance one step at a time through
//! [`Committer::send`]/[`Committer::receive`] and their receiver
//! counterparts, and any out-of-order or malformed message ends the session.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{Group, GroupElement, Rng, Scalar};
use crate::commitments::{
    basis_gen, commit_fresh, commitment_well_formed, extcom_check_open, verify_open, Commitment, ExtComCommitter,
    ExtComTranscript, NaorTranscript, Opening, ReceiverBasis, DEFAULT_EXTCOM_PAIRS,
};
use crate::sigma::{or_commit, or_respond, verify_parts, OrFirst, OrResponse, ProverState, Statement, Witness};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("expected step {expected}, got {got}")]
    Violation { expected: String, got: String },
    #[error("step {0} is not sent by this party")]
    WrongSender(String),
    #[error("session already finished")]
    Finished,
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("missing context: {0}")]
    MissingContext(&'static str),
    #[error("tag {t} outside [1, {n}]")]
    BadTag { t: usize, n: usize },
    #[error("no witness available for {0}")]
    NoWitness(&'static str),
    #[error("proof rejected at {0}")]
    ProofRejected(String),
    #[error("unsupported prefix: {0}")]
    UnsupportedPrefix(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "one-sided")]
    OneSided,
    #[serde(rename = "sync")]
    Sync,
    #[serde(rename = "async")]
    Async,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "one-sided" | "1" => Some(Variant::OneSided),
            "sync" | "2" => Some(Variant::Sync),
            "async" | "3" => Some(Variant::Async),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::OneSided => "one-sided",
            Variant::Sync => "sync",
            Variant::Async => "async",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    C,
    R,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Basis,
    Commit,
    TrapGen,
    WipokTrap,
    Puzzle,
    Ack,
    /// ExtCom block 1, 2 or 3.
    ExtCom(u8),
    Wipok1,
    Wipok1A,
    Wipok1B,
    Wipok2,
}

impl Phase {
    fn label(&self) -> String {
        match self {
            Phase::Basis => "basis".into(),
            Phase::Commit => "commit".into(),
            Phase::TrapGen => "trapgen".into(),
            Phase::WipokTrap => "wipok-trap".into(),
            Phase::Puzzle => "puzzle".into(),
            Phase::Ack => "ack".into(),
            Phase::ExtCom(c) => format!("extcom{c}"),
            Phase::Wipok1 => "wipok1".into(),
            Phase::Wipok1A => "wipok1a".into(),
            Phase::Wipok1B => "wipok1b".into(),
            Phase::Wipok2 => "wipok2".into(),
        }
    }

    fn from_label(s: &str) -> Option<Phase> {
        Some(match s {
            "basis" => Phase::Basis,
            "commit" => Phase::Commit,
            "trapgen" => Phase::TrapGen,
            "wipok-trap" => Phase::WipokTrap,
            "puzzle" => Phase::Puzzle,
            "ack" => Phase::Ack,
            "extcom1" => Phase::ExtCom(1),
            "extcom2" => Phase::ExtCom(2),
            "extcom3" => Phase::ExtCom(3),
            "wipok1" => Phase::Wipok1,
            "wipok1a" => Phase::Wipok1A,
            "wipok1b" => Phase::Wipok1B,
            "wipok2" => Phase::Wipok2,
            _ => return None,
        })
    }

    /// Sigma phases in which the receiver proves.
    pub fn receiver_proves(&self) -> bool {
        matches!(self, Phase::WipokTrap | Phase::Wipok1 | Phase::Wipok1A | Phase::Wipok1B)
    }

    pub fn is_sigma(&self) -> bool {
        self.receiver_proves() || *self == Phase::Wipok2
    }

    /// Number of messages per repetition.
    pub fn rounds(&self) -> u8 {
        if self.is_sigma() || matches!(self, Phase::ExtCom(_)) {
            3
        } else {
            1
        }
    }
}

/// One message slot of a plan: phase, repetition (0-based) and round within
/// the repetition (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StepId {
    pub phase: Phase,
    pub rep: u32,
    pub round: u8,
}

impl StepId {
    pub fn single(phase: Phase) -> StepId {
        StepId {
            phase,
            rep: 0,
            round: 0,
        }
    }

    pub fn new(phase: Phase, rep: u32, round: u8) -> StepId {
        StepId { phase, rep, round }
    }

    pub fn sender(&self) -> Role {
        match self.phase {
            Phase::Basis | Phase::Puzzle | Phase::TrapGen => Role::R,
            Phase::Commit | Phase::Ack => Role::C,
            Phase::ExtCom(_) => {
                if self.round == 1 {
                    Role::R
                } else {
                    Role::C
                }
            }
            Phase::Wipok2 => {
                if self.round == 1 {
                    Role::R
                } else {
                    Role::C
                }
            }
            _ => {
                if self.round == 1 {
                    Role::C
                } else {
                    Role::R
                }
            }
        }
    }

    pub fn is_first_of_rep(&self) -> bool {
        self.round == 0
    }

    pub fn is_last_of_rep(&self) -> bool {
        self.round + 1 == self.phase.rounds()
    }

    pub fn label(&self) -> String {
        if self.phase.rounds() == 1 {
            return self.phase.label();
        }
        let r = if self.phase.is_sigma() {
            ["a", "e", "z"][self.round as usize]
        } else {
            ["com", "ch", "open"][self.round as usize]
        };
        format!("{}[{}].{}", self.phase.label(), self.rep + 1, r)
    }

    pub fn parse(s: &str) -> Option<StepId> {
        let Some((head, r)) = s.rsplit_once('.') else {
            let phase = Phase::from_label(s)?;
            return (phase.rounds() == 1).then_some(StepId::single(phase));
        };
        let (name, rep) = head.strip_suffix(']')?.split_once('[')?;
        let phase = Phase::from_label(name)?;
        let rep: u32 = rep.parse().ok()?;
        if rep == 0 || phase.rounds() == 1 {
            return None;
        }
        let round = match (phase.is_sigma(), r) {
            (true, "a") | (false, "com") => 0,
            (true, "e") | (false, "ch") => 1,
            (true, "z") | (false, "open") => 2,
            _ => return None,
        };
        Some(StepId::new(phase, rep - 1, round))
    }
}

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

// ---------------------------------------------------------------------------
// Repetition constants
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepetitionConstants {
    pub n5: usize,
    pub n6: usize,
    pub n7: usize,
    pub n8: usize,
    pub n9: usize,
    /// False for the lab override, which violates the round-count inequalities.
    pub faithful: bool,
}

/// Rounds of Steps 1-4 of the asynchronous protocol.
pub fn prefix_rounds(wipok_rounds: usize) -> usize {
    1 + 1 + (1 + wipok_rounds) + 1
}

/// Minimal constants with each `n_i` exceeding the total round count of all
/// earlier steps, and `n5` also exceeding one WIPoK and one ExtCom.
pub fn compute_constants(wipok_rounds: usize, extcom_rounds: usize) -> RepetitionConstants {
    let mut total = prefix_rounds(wipok_rounds);
    let n5 = (total + 1).max(wipok_rounds.max(extcom_rounds) + 1);
    total += n5 * extcom_rounds;
    let n6 = total + 1;
    total += n6 * wipok_rounds;
    let n7 = total + 1;
    total += n7 * extcom_rounds;
    let n8 = total + 1;
    total += n8 * wipok_rounds;
    let n9 = total + 1;
    RepetitionConstants {
        n5,
        n6,
        n7,
        n8,
        n9,
        faithful: true,
    }
}

impl RepetitionConstants {
    pub fn lab() -> RepetitionConstants {
        RepetitionConstants {
            n5: 2,
            n6: 2,
            n7: 2,
            n8: 2,
            n9: 2,
            faithful: false,
        }
    }

    pub fn faithful() -> RepetitionConstants {
        compute_constants(3, 3)
    }

    /// Lab profile when `NMCOM_LAB_PROFILE` is set to a truthy value.
    pub fn from_env() -> RepetitionConstants {
        match std::env::var("NMCOM_LAB_PROFILE").ok().as_deref() {
            Some("1") | Some("true") | Some("lab") | Some("yes") => Self::lab(),
            _ => Self::faithful(),
        }
    }

    pub fn as_array(&self) -> [usize; 5] {
        [self.n5, self.n6, self.n7, self.n8, self.n9]
    }

    /// Total rounds of the asynchronous protocol commit stage.
    pub fn total_rounds(&self, wipok_rounds: usize, extcom_rounds: usize) -> usize {
        prefix_rounds(wipok_rounds)
            + (self.n5 + self.n7 + self.n9) * extcom_rounds
            + (self.n6 + self.n8) * wipok_rounds
            + wipok_rounds
    }

    /// Every inequality as `(name, lhs, rhs, lhs > rhs)`.
    pub fn inequalities(&self, wipok_rounds: usize, extcom_rounds: usize) -> Vec<(String, usize, usize, bool)> {
        let mut out = Vec::new();
        let mut total = prefix_rounds(wipok_rounds);
        let mut push = |name: &str, lhs: usize, rhs: usize| out.push((name.to_string(), lhs, rhs, lhs > rhs));
        push("n5 > rounds(steps 1-4)", self.n5, total);
        push("n5 > rounds(WIPoK)", self.n5, wipok_rounds);
        push("n5 > rounds(ExtCom)", self.n5, extcom_rounds);
        total += self.n5 * extcom_rounds;
        push("n6 > rounds(steps 1-5)", self.n6, total);
        total += self.n6 * wipok_rounds;
        push("n7 > rounds(steps 1-6)", self.n7, total);
        total += self.n7 * extcom_rounds;
        push("n8 > rounds(steps 1-7)", self.n8, total);
        total += self.n8 * wipok_rounds;
        push("n9 > rounds(steps 1-8)", self.n9, total);
        out
    }
}

// ---------------------------------------------------------------------------
// Configuration and plan
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub variant: Variant,
    /// Tag space `[n]`.
    pub n: usize,
    pub constants: RepetitionConstants,
    pub extcom_pairs: usize,
    /// Dummy round from C between the puzzle step and WIPoK-1.
    pub ack: bool,
}

impl ProtocolConfig {
    pub fn new(variant: Variant, n: usize) -> ProtocolConfig {
        ProtocolConfig {
            variant,
            n,
            constants: RepetitionConstants::lab(),
            extcom_pairs: DEFAULT_EXTCOM_PAIRS,
            ack: variant != Variant::Async,
        }
    }

    pub fn with_constants(mut self, c: RepetitionConstants) -> Self {
        self.constants = c;
        self
    }

    pub fn with_pairs(mut self, pairs: usize) -> Self {
        self.extcom_pairs = pairs;
        self
    }

    pub fn with_ack(mut self, ack: bool) -> Self {
        self.ack = ack;
        self
    }

    pub fn check_tag(&self, t: usize) -> Result<(), ProtocolError> {
        let ok = match self.variant {
            Variant::OneSided => (1..=self.n).contains(&t),
            // slot B carries n - t puzzles and must be non-empty
            Variant::Sync | Variant::Async => t >= 1 && t < self.n,
        };
        if ok {
            Ok(())
        } else {
            Err(ProtocolError::BadTag { t, n: self.n })
        }
    }

    /// Puzzle counts `(|Y^A|, |Y^B|)` for tag `t`.
    pub fn slot_sizes(&self, t: usize) -> (usize, usize) {
        match self.variant {
            Variant::OneSided => (t, 0),
            _ => (t, self.n - t),
        }
    }

    pub fn has_beta2(&self) -> bool {
        self.variant != Variant::OneSided
    }

    pub fn plan(&self) -> Vec<StepId> {
        let mut v = vec![StepId::single(Phase::Basis), StepId::single(Phase::Commit)];
        let rep = |v: &mut Vec<StepId>, phase: Phase, count: usize| {
            for r in 0..count as u32 {
                for k in 0..3 {
                    v.push(StepId::new(phase, r, k));
                }
            }
        };
        match self.variant {
            Variant::OneSided | Variant::Sync => {
                v.push(StepId::single(Phase::Puzzle));
                if self.ack {
                    v.push(StepId::single(Phase::Ack));
                }
                if self.variant == Variant::OneSided {
                    rep(&mut v, Phase::Wipok1, 1);
                } else {
                    rep(&mut v, Phase::Wipok1A, 1);
                    rep(&mut v, Phase::Wipok1B, 1);
                }
            }
            Variant::Async => {
                let c = &self.constants;
                v.push(StepId::single(Phase::TrapGen));
                rep(&mut v, Phase::WipokTrap, 1);
                v.push(StepId::single(Phase::Puzzle));
                if self.ack {
                    v.push(StepId::single(Phase::Ack));
                }
                rep(&mut v, Phase::ExtCom(1), c.n5);
                rep(&mut v, Phase::Wipok1A, c.n6);
                rep(&mut v, Phase::ExtCom(2), c.n7);
                rep(&mut v, Phase::Wipok1B, c.n8);
                rep(&mut v, Phase::ExtCom(3), c.n9);
            }
        }
        rep(&mut v, Phase::Wipok2, 1);
        v
    }

    /// WIPoK-1 phase carrying slot `s`.
    pub fn wipok1_phase(&self, s: Slot) -> Phase {
        match (self.variant, s) {
            (Variant::OneSided, _) => Phase::Wipok1,
            (_, Slot::A) => Phase::Wipok1A,
            (_, Slot::B) => Phase::Wipok1B,
        }
    }

    /// Branch of WIPoK-2 that a puzzle witness of slot `s` lands in.
    pub fn wipok2_branch(s: Slot) -> usize {
        match s {
            Slot::A => 1,
            Slot::B => 2,
        }
    }
}

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Basis {
        h: GroupElement,
    },
    Commit {
        com: Commitment,
        beta2: Option<GroupElement>,
    },
    Puzzle {
        ya: Vec<GroupElement>,
        coma: Vec<Commitment>,
        yb: Vec<GroupElement>,
        comb: Vec<Commitment>,
    },
    Ack,
    TrapGen {
        v0: GroupElement,
        v1: GroupElement,
    },
    SigmaFirst {
        first: OrFirst,
    },
    SigmaChallenge {
        e: Scalar,
    },
    SigmaResponse {
        response: OrResponse,
    },
    ExtComCommit {
        pairs: Vec<(Commitment, Commitment)>,
    },
    ExtComChallenge {
        bits: Vec<bool>,
    },
    ExtComOpen {
        opened: Vec<Opening>,
    },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Basis { .. } => "basis",
            Payload::Commit { .. } => "commit",
            Payload::Puzzle { .. } => "puzzle",
            Payload::Ack => "ack",
            Payload::TrapGen { .. } => "trapgen",
            Payload::SigmaFirst { .. } => "sigma_first",
            Payload::SigmaChallenge { .. } => "sigma_challenge",
            Payload::SigmaResponse { .. } => "sigma_response",
            Payload::ExtComCommit { .. } => "extcom_commit",
            Payload::ExtComChallenge { .. } => "extcom_challenge",
            Payload::ExtComOpen { .. } => "extcom_open",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionLabel {
    Left,
    Right,
    Standalone,
}

/// One line of a trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub session: SessionLabel,
    pub round: usize,
    pub from: Role,
    pub step: String,
    pub payload: Payload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Pending,
    Accept,
    Reject,
}

// ---------------------------------------------------------------------------
// Public view shared by both parties
// ---------------------------------------------------------------------------

/// Everything either party learns from the wire.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicView {
    pub h: Option<GroupElement>,
    pub com: Option<Commitment>,
    pub beta2: Option<GroupElement>,
    pub ya: Vec<GroupElement>,
    pub coma: Vec<Commitment>,
    pub yb: Vec<GroupElement>,
    pub comb: Vec<Commitment>,
    pub trap: Option<(GroupElement, GroupElement)>,
    /// Completed ExtCom transcripts in execution order.
    pub extcoms: Vec<ExtComTranscript>,
    pending_pairs: Option<Vec<(Commitment, Commitment)>>,
    pending_bits: Option<Vec<bool>>,
    sigma_first: Option<OrFirst>,
    sigma_e: Option<Scalar>,
}

impl PublicView {
    pub fn naor(&self) -> Option<NaorTranscript> {
        Some(NaorTranscript {
            basis: ReceiverBasis::public(self.h.clone()?),
            com: self.com.clone()?,
        })
    }
}

/// Statement proven in the sigma phase `phase` given the public view.
pub fn build_language(cfg: &ProtocolConfig, phase: Phase, view: &PublicView) -> Result<Statement, ProtocolError> {
    let beta2 = || view.beta2.clone().ok_or(ProtocolError::MissingContext("beta'"));
    match phase {
        Phase::Wipok1 => {
            if view.ya.is_empty() {
                return Err(ProtocolError::MissingContext("puzzle"));
            }
            Ok(Statement::OneOfT { ys: view.ya.clone() })
        }
        Phase::Wipok1A | Phase::Wipok1B => {
            let (ys, coms) = if phase == Phase::Wipok1A {
                (&view.ya, &view.coma)
            } else {
                (&view.yb, &view.comb)
            };
            if ys.is_empty() {
                return Err(ProtocolError::MissingContext("puzzle"));
            }
            Ok(Statement::ConsistentPuzzle {
                ys: ys.clone(),
                coms: coms.clone(),
                h: beta2()?,
            })
        }
        Phase::WipokTrap => {
            let (v0, v1) = view
                .trap
                .clone()
                .ok_or(ProtocolError::MissingContext("trapdoor pair"))?;
            Ok(Statement::TrapOr { v0, v1 })
        }
        Phase::Wipok2 => {
            let h = view.h.clone().ok_or(ProtocolError::MissingContext("basis"))?;
            let com = view.com.clone().ok_or(ProtocolError::MissingContext("commitment"))?;
            if view.ya.is_empty() {
                return Err(ProtocolError::MissingContext("puzzle"));
            }
            let ya = Statement::OneOfT { ys: view.ya.clone() };
            Ok(match cfg.variant {
                Variant::OneSided => Statement::OrList(vec![Statement::OpeningOf { h, com }, ya]),
                Variant::Sync => Statement::OrList(vec![
                    Statement::OpeningOf { h, com },
                    ya,
                    Statement::OneOfT { ys: view.yb.clone() },
                ]),
                Variant::Async => {
                    let (v0, v1) = view
                        .trap
                        .clone()
                        .ok_or(ProtocolError::MissingContext("trapdoor pair"))?;
                    Statement::OrList(vec![
                        Statement::ExtComBound {
                            h,
                            com,
                            extcoms: view.extcoms.clone(),
                        },
                        ya,
                        Statement::OneOfT { ys: view.yb.clone() },
                        Statement::TrapOr { v0, v1 },
                    ])
                }
            })
        }
        _ => Err(ProtocolError::MissingContext("not a proof phase")),
    }
}

fn malformed(s: &str) -> ProtocolError {
    ProtocolError::Malformed(s.to_string())
}

/// Validates `payload` for `step` and folds it into the view. Used by both
/// parties for every message, sent or received.
fn absorb(
    params: &Group,
    cfg: &ProtocolConfig,
    tag: usize,
    view: &mut PublicView,
    step: &StepId,
    payload: &Payload,
) -> Result<(), ProtocolError> {
    let member = |e: &GroupElement| params.is_member(e);
    match (step.phase, step.round, payload) {
        (Phase::Basis, _, Payload::Basis { h }) => {
            if !member(h) {
                return Err(malformed("basis outside subgroup"));
            }
            view.h = Some(h.clone());
        }
        (Phase::Commit, _, Payload::Commit { com, beta2 }) => {
            if !commitment_well_formed(params, com) {
                return Err(malformed("commitment outside subgroup"));
            }
            match (cfg.has_beta2(), beta2) {
                (true, Some(b)) if member(b) => view.beta2 = Some(b.clone()),
                (false, None) => {}
                _ => return Err(malformed("beta' missing or unexpected")),
            }
            view.com = Some(com.clone());
        }
        (Phase::Puzzle, _, Payload::Puzzle { ya, coma, yb, comb }) => {
            let (na, nb) = cfg.slot_sizes(tag);
            let nc = if cfg.has_beta2() { (na, nb) } else { (0, 0) };
            if ya.len() != na || yb.len() != nb || coma.len() != nc.0 || comb.len() != nc.1 {
                return Err(malformed("puzzle sizes do not match tag"));
            }
            if !ya.iter().chain(yb).all(member) || !coma.iter().chain(comb).all(|c| commitment_well_formed(params, c)) {
                return Err(malformed("puzzle outside subgroup"));
            }
            view.ya = ya.clone();
            view.coma = coma.clone();
            view.yb = yb.clone();
            view.comb = comb.clone();
        }
        (Phase::Ack, _, Payload::Ack) => {}
        (Phase::TrapGen, _, Payload::TrapGen { v0, v1 }) => {
            if !member(v0) || !member(v1) {
                return Err(malformed("trapdoor pair outside subgroup"));
            }
            view.trap = Some((v0.clone(), v1.clone()));
        }
        (ph, 0, Payload::SigmaFirst { first }) if ph.is_sigma() => {
            view.sigma_first = Some(first.clone());
            view.sigma_e = None;
        }
        (ph, 1, Payload::SigmaChallenge { e }) if ph.is_sigma() => {
            if e.value() >= &params.q {
                return Err(malformed("challenge out of range"));
            }
            view.sigma_e = Some(e.clone());
        }
        (ph, 2, Payload::SigmaResponse { .. }) if ph.is_sigma() => {}
        (Phase::ExtCom(_), 0, Payload::ExtComCommit { pairs }) => {
            if pairs.len() != cfg.extcom_pairs
                || !pairs
                    .iter()
                    .all(|(a, b)| commitment_well_formed(params, a) && commitment_well_formed(params, b))
            {
                return Err(malformed("extcom commitments"));
            }
            view.pending_pairs = Some(pairs.clone());
            view.pending_bits = None;
        }
        (Phase::ExtCom(_), 1, Payload::ExtComChallenge { bits }) => {
            if bits.len() != cfg.extcom_pairs {
                return Err(malformed("extcom challenge length"));
            }
            view.pending_bits = Some(bits.clone());
        }
        (Phase::ExtCom(_), 2, Payload::ExtComOpen { opened }) => {
            let h = view.h.clone().ok_or(ProtocolError::MissingContext("basis"))?;
            let pairs = view
                .pending_pairs
                .take()
                .ok_or(ProtocolError::MissingContext("extcom commit"))?;
            let bits = view
                .pending_bits
                .take()
                .ok_or(ProtocolError::MissingContext("extcom challenge"))?;
            extcom_check_open(params, &h, &pairs, &bits, opened).map_err(|e| malformed(&e.to_string()))?;
            view.extcoms.push(ExtComTranscript {
                n_pairs: pairs.len(),
                pair_commitments: pairs,
                challenge: bits,
                opened: opened.clone(),
            });
        }
        _ => {
            return Err(ProtocolError::Violation {
                expected: step.label(),
                got: payload.kind().to_string(),
            })
        }
    }
    Ok(())
}

/// Verifies the response to a sigma phase against the view.
fn check_sigma(
    params: &Group,
    cfg: &ProtocolConfig,
    view: &PublicView,
    step: &StepId,
    resp: &OrResponse,
) -> Result<(), ProtocolError> {
    let stmt = build_language(cfg, step.phase, view)?;
    let first = view
        .sigma_first
        .as_ref()
        .ok_or(ProtocolError::MissingContext("sigma first"))?;
    let e = view
        .sigma_e
        .as_ref()
        .ok_or(ProtocolError::MissingContext("sigma challenge"))?;
    if verify_parts(params, &stmt, first, e, resp) {
        Ok(())
    } else {
        Err(ProtocolError::ProofRejected(step.label()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Running,
    Done,
    Aborted(String),
}

/// Plan position bookkeeping shared by both parties.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct Cursor {
    plan: Arc<Vec<StepId>>,
    pos: usize,
    status: Status,
}

impl Cursor {
    fn new(cfg: &ProtocolConfig) -> Cursor {
        Cursor {
            plan: Arc::new(cfg.plan()),
            pos: 0,
            status: Status::Running,
        }
    }

    fn expect(&self, step: &StepId, sender: Role) -> Result<(), ProtocolError> {
        if self.status != Status::Running {
            return Err(ProtocolError::Finished);
        }
        let want = self.plan.get(self.pos).ok_or(ProtocolError::Finished)?;
        if want != step {
            return Err(ProtocolError::Violation {
                expected: want.label(),
                got: step.label(),
            });
        }
        if step.sender() != sender {
            return Err(ProtocolError::WrongSender(step.label()));
        }
        Ok(())
    }

    fn advance(&mut self) {
        self.pos += 1;
        if self.pos == self.plan.len() {
            self.status = Status::Done;
        }
    }

    fn next(&self) -> Option<StepId> {
        if self.status == Status::Running {
            self.plan.get(self.pos).copied()
        } else {
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Committer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum CommitterMode {
    Honest {
        opening: Opening,
    },
    /// Built from public data only; commits to 0 in ExtCom and needs an
    /// injected WIPoK-2 witness.
    Simulated,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Committer {
    pub params: Group,
    pub cfg: ProtocolConfig,
    pub tag: usize,
    pub mode: CommitterMode,
    rng: Rng,
    cursor: Cursor,
    pub view: PublicView,
    beta2_secret: Option<ReceiverBasis>,
    extcom_current: Option<ExtComCommitter>,
    /// Every ExtCom committer with the challenge it answered.
    extcom_done: Vec<(ExtComCommitter, Vec<bool>)>,
    forced_challenge: Option<Scalar>,
    wipok2_witness: Option<Witness>,
    wipok2_state: Option<ProverState>,
}

impl Committer {
    pub fn honest(
        params: Group,
        cfg: ProtocolConfig,
        tag: usize,
        m: Scalar,
        rng: Rng,
    ) -> Result<Committer, ProtocolError> {
        cfg.check_tag(tag)?;
        let mut rng = rng;
        let r = rng.scalar(&params);
        Ok(Committer {
            cursor: Cursor::new(&cfg),
            params,
            cfg,
            tag,
            mode: CommitterMode::Honest {
                opening: Opening { m, r },
            },
            rng,
            view: PublicView::default(),
            beta2_secret: None,
            extcom_current: None,
            extcom_done: Vec::new(),
            forced_challenge: None,
            wipok2_witness: None,
            wipok2_state: None,
        })
    }

    /// Simulated committer resuming from a public left transcript. Messages
    /// after the commit step may be replayed only if they carry no committer
    /// secret: receiver messages, ACK and committer challenges.
    pub fn simulated(
        params: Group,
        cfg: ProtocolConfig,
        tag: usize,
        public_log: &[(StepId, Payload)],
        rng: Rng,
    ) -> Result<Committer, ProtocolError> {
        cfg.check_tag(tag)?;
        let mut c = Committer {
            cursor: Cursor::new(&cfg),
            params,
            cfg,
            tag,
            mode: CommitterMode::Simulated,
            rng,
            view: PublicView::default(),
            beta2_secret: None,
            extcom_current: None,
            extcom_done: Vec::new(),
            forced_challenge: None,
            wipok2_witness: None,
            wipok2_state: None,
        };
        for (i, (step, payload)) in public_log.iter().enumerate() {
            let replayable = i < 2
                || step.sender() == Role::R
                || step.phase == Phase::Ack
                || (step.phase.receiver_proves() && step.round == 1);
            if !replayable {
                return Err(ProtocolError::UnsupportedPrefix(step.label()));
            }
            c.cursor.expect(step, step.sender())?;
            if step.sender() == Role::R {
                c.receive(step, payload)?;
            } else {
                absorb(&c.params, &c.cfg, c.tag, &mut c.view, step, payload)?;
                c.cursor.advance();
            }
        }
        Ok(c)
    }

    pub fn status(&self) -> &Status {
        &self.cursor.status
    }

    pub fn is_running(&self) -> bool {
        self.cursor.status == Status::Running
    }

    pub fn next_step(&self) -> Option<StepId> {
        self.cursor.next()
    }

    pub fn position(&self) -> usize {
        self.cursor.pos
    }

    pub fn opening(&self) -> Option<&Opening> {
        match &self.mode {
            CommitterMode::Honest { opening } => Some(opening),
            CommitterMode::Simulated => None,
        }
    }

    pub fn is_simulated(&self) -> bool {
        matches!(self.mode, CommitterMode::Simulated)
    }

    /// Next challenge this committer sends is `e` instead of a fresh sample.
    pub fn force_challenge(&mut self, e: Scalar) {
        self.forced_challenge = Some(e);
    }

    /// Witness for WIPoK-2 replacing the honest `(m, r)` witness.
    pub fn inject_wipok2_witness(&mut self, w: Witness) {
        self.wipok2_witness = Some(w);
    }

    pub fn extcom_committers(&self) -> &[(ExtComCommitter, Vec<bool>)] {
        &self.extcom_done
    }

    pub fn abort(&mut self, why: &str) {
        self.cursor.status = Status::Aborted(why.to_string());
    }

    fn committed_value(&self) -> Scalar {
        match &self.mode {
            CommitterMode::Honest { opening } => opening.m.clone(),
            CommitterMode::Simulated => self.params.zero(),
        }
    }

    fn honest_wipok2_witness(&self) -> Result<Witness, ProtocolError> {
        let CommitterMode::Honest { opening } = &self.mode else {
            return Err(ProtocolError::NoWitness("WIPoK-2"));
        };
        let inner = match self.cfg.variant {
            Variant::OneSided | Variant::Sync => Witness::Opening {
                m: opening.m.clone(),
                r: opening.r.clone(),
            },
            Variant::Async => {
                let mut share_rands = Vec::new();
                for (ec, bits) in &self.extcom_done {
                    for ((s0, s1), &bit) in ec.shares.iter().zip(bits) {
                        share_rands.push(if bit { s0.r.clone() } else { s1.r.clone() });
                    }
                }
                Witness::ExtComBound {
                    m: opening.m.clone(),
                    r: opening.r.clone(),
                    share_rands,
                }
            }
        };
        Ok(Witness::branch(0, inner))
    }

    fn challenge(&mut self) -> Scalar {
        match self.forced_challenge.take() {
            Some(e) => e,
            None => self.rng.scalar(&self.params),
        }
    }

    pub fn send(&mut self, step: &StepId) -> Result<Payload, ProtocolError> {
        self.cursor.expect(step, Role::C)?;
        let res = self.produce(step);
        let payload = match res {
            Ok(p) => p,
            Err(e) => {
                self.abort(&e.to_string());
                return Err(e);
            }
        };
        if let Err(e) = absorb(&self.params, &self.cfg, self.tag, &mut self.view, step, &payload) {
            self.abort(&e.to_string());
            return Err(e);
        }
        self.cursor.advance();
        Ok(payload)
    }

    fn produce(&mut self, step: &StepId) -> Result<Payload, ProtocolError> {
        let params = self.params.clone();
        Ok(match (step.phase, step.round) {
            (Phase::Commit, _) => {
                let h = self.view.h.clone().ok_or(ProtocolError::MissingContext("basis"))?;
                let com = match &self.mode {
                    CommitterMode::Honest { opening } => {
                        crate::commitments::commit(&params, &h, &opening.m, &opening.r)
                    }
                    CommitterMode::Simulated => return Err(ProtocolError::NoWitness("commitment")),
                };
                let beta2 = if self.cfg.has_beta2() {
                    let b = basis_gen(&params, &mut self.rng);
                    let h2 = b.h.clone();
                    self.beta2_secret = Some(b);
                    Some(h2)
                } else {
                    None
                };
                Payload::Commit { com, beta2 }
            }
            (Phase::Ack, _) => Payload::Ack,
            (ph, 1) if ph.receiver_proves() => Payload::SigmaChallenge { e: self.challenge() },
            (Phase::ExtCom(_), 0) => {
                let h = self.view.h.clone().ok_or(ProtocolError::MissingContext("basis"))?;
                let m = self.committed_value();
                let ec = ExtComCommitter::new(&params, &h, &m, self.cfg.extcom_pairs, &mut self.rng);
                let pairs = ec.first_message();
                self.extcom_current = Some(ec);
                Payload::ExtComCommit { pairs }
            }
            (Phase::ExtCom(_), 2) => {
                let ec = self
                    .extcom_current
                    .take()
                    .ok_or(ProtocolError::MissingContext("extcom state"))?;
                let bits = self
                    .view
                    .pending_bits
                    .clone()
                    .ok_or(ProtocolError::MissingContext("extcom challenge"))?;
                let opened = ec.open(&bits);
                self.extcom_done.push((ec, bits));
                Payload::ExtComOpen { opened }
            }
            (Phase::Wipok2, 0) => {
                let stmt = build_language(&self.cfg, Phase::Wipok2, &self.view)?;
                let wit = match self.wipok2_witness.clone() {
                    Some(w) => w,
                    None => self.honest_wipok2_witness()?,
                };
                let (st, first) = or_commit(&params, &stmt, &wit, &mut self.rng)
                    .map_err(|e| ProtocolError::Malformed(e.to_string()))?;
                self.wipok2_state = Some(st);
                Payload::SigmaFirst { first }
            }
            (Phase::Wipok2, 2) => {
                let st = self
                    .wipok2_state
                    .take()
                    .ok_or(ProtocolError::MissingContext("WIPoK-2 state"))?;
                let e = self
                    .view
                    .sigma_e
                    .clone()
                    .ok_or(ProtocolError::MissingContext("sigma challenge"))?;
                Payload::SigmaResponse {
                    response: or_respond(&params, &st, &e),
                }
            }
            _ => return Err(ProtocolError::WrongSender(step.label())),
        })
    }

    pub fn receive(&mut self, step: &StepId, payload: &Payload) -> Result<(), ProtocolError> {
        self.cursor.expect(step, Role::R)?;
        let res = absorb(&self.params, &self.cfg, self.tag, &mut self.view, step, payload).and_then(|_| {
            match (step.phase, payload) {
                (ph, Payload::SigmaResponse { response }) if ph.receiver_proves() => {
                    check_sigma(&self.params, &self.cfg, &self.view, step, response)
                }
                _ => Ok(()),
            }
        });
        match res {
            Ok(()) => {
                self.cursor.advance();
                Ok(())
            }
            Err(e) => {
                self.abort(&e.to_string());
                Err(e)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Receiver
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PuzzleSecrets {
    x: Vec<Scalar>,
    r: Vec<Scalar>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Receiver {
    pub params: Group,
    pub cfg: ProtocolConfig,
    pub tag: usize,
    rng: Rng,
    cursor: Cursor,
    pub view: PublicView,
    basis: Option<ReceiverBasis>,
    slot_a: Option<PuzzleSecrets>,
    slot_b: Option<PuzzleSecrets>,
    trap: Option<(Scalar, Scalar)>,
    /// 1-based puzzle index used as the WIPoK-1 witness in each slot.
    pub witness_a: usize,
    pub witness_b: usize,
    pub trap_branch: usize,
    sigma_state: Option<ProverState>,
    forced_challenge: Option<Scalar>,
    forced_bits: Option<Vec<bool>>,
    decision: Decision,
}

impl Receiver {
    pub fn new(params: Group, cfg: ProtocolConfig, tag: usize, rng: Rng) -> Result<Receiver, ProtocolError> {
        cfg.check_tag(tag)?;
        Ok(Receiver {
            cursor: Cursor::new(&cfg),
            params,
            cfg,
            tag,
            rng,
            view: PublicView::default(),
            basis: None,
            slot_a: None,
            slot_b: None,
            trap: None,
            witness_a: 1,
            witness_b: 1,
            trap_branch: 0,
            sigma_state: None,
            forced_challenge: None,
            forced_bits: None,
            decision: Decision::Pending,
        })
    }

    pub fn decision(&self) -> Decision {
        self.decision
    }

    pub fn status(&self) -> &Status {
        &self.cursor.status
    }

    pub fn is_running(&self) -> bool {
        self.cursor.status == Status::Running
    }

    pub fn next_step(&self) -> Option<StepId> {
        self.cursor.next()
    }

    pub fn position(&self) -> usize {
        self.cursor.pos
    }

    /// Basis including the secret exponent.
    pub fn basis(&self) -> Option<&ReceiverBasis> {
        self.basis.as_ref()
    }

    /// Naor transcript with the basis secret attached.
    pub fn transcript(&self) -> Option<NaorTranscript> {
        Some(NaorTranscript {
            basis: self.basis.clone()?,
            com: self.view.com.clone()?,
        })
    }

    pub fn set_witness(&mut self, slot: Slot, i: usize) {
        match slot {
            Slot::A => self.witness_a = i,
            Slot::B => self.witness_b = i,
        }
    }

    /// Puzzle preimage `x_i` (1-based) of a slot.
    pub fn preimage(&self, slot: Slot, i: usize) -> Option<Scalar> {
        let s = match slot {
            Slot::A => self.slot_a.as_ref()?,
            Slot::B => self.slot_b.as_ref()?,
        };
        s.x.get(i.checked_sub(1)?).cloned()
    }

    pub fn force_challenge(&mut self, e: Scalar) {
        self.forced_challenge = Some(e);
    }

    /// Next ExtCom challenge this receiver sends is `bits`.
    pub fn force_extcom_challenge(&mut self, bits: Vec<bool>) {
        self.forced_bits = Some(bits);
    }

    pub fn abort(&mut self, why: &str) {
        self.cursor.status = Status::Aborted(why.to_string());
        self.decision = Decision::Reject;
    }

    fn wipok1_witness(&self, phase: Phase) -> Result<Witness, ProtocolError> {
        let (slot, idx) = match phase {
            Phase::Wipok1 | Phase::Wipok1A => (self.slot_a.as_ref(), self.witness_a),
            _ => (self.slot_b.as_ref(), self.witness_b),
        };
        let s = slot.ok_or(ProtocolError::MissingContext("puzzle secrets"))?;
        let x =
            s.x.get(idx.wrapping_sub(1))
                .cloned()
                .ok_or(ProtocolError::NoWitness("WIPoK-1 index"))?;
        Ok(if phase == Phase::Wipok1 {
            Witness::Indexed { i: idx, x }
        } else {
            Witness::IndexedCommitted {
                i: idx,
                x,
                r: s.r[idx - 1].clone(),
            }
        })
    }

    pub fn send(&mut self, step: &StepId) -> Result<Payload, ProtocolError> {
        self.cursor.expect(step, Role::R)?;
        let payload = match self.produce(step) {
            Ok(p) => p,
            Err(e) => {
                self.abort(&e.to_string());
                return Err(e);
            }
        };
        if let Err(e) = absorb(&self.params, &self.cfg, self.tag, &mut self.view, step, &payload) {
            self.abort(&e.to_string());
            return Err(e);
        }
        self.cursor.advance();
        Ok(payload)
    }

    fn puzzle_slot(
        &mut self,
        count: usize,
        commit_to: Option<&GroupElement>,
    ) -> (PuzzleSecrets, Vec<GroupElement>, Vec<Commitment>) {
        let params = self.params.clone();
        let x: Vec<Scalar> = (0..count).map(|_| self.rng.scalar(&params)).collect();
        let y = x.iter().map(|xi| params.f_eval(xi)).collect();
        let mut r = Vec::new();
        let mut coms = Vec::new();
        if let Some(h2) = commit_to {
            for xi in &x {
                let (c, o) = commit_fresh(&params, h2, xi, &mut self.rng);
                coms.push(c);
                r.push(o.r);
            }
        }
        (PuzzleSecrets { x, r }, y, coms)
    }

    fn produce(&mut self, step: &StepId) -> Result<Payload, ProtocolError> {
        let params = self.params.clone();
        Ok(match (step.phase, step.round) {
            (Phase::Basis, _) => {
                let b = basis_gen(&params, &mut self.rng);
                let h = b.h.clone();
                self.basis = Some(b);
                Payload::Basis { h }
            }
            (Phase::Puzzle, _) => {
                let (na, nb) = self.cfg.slot_sizes(self.tag);
                let beta2 = self.view.beta2.clone();
                let (sa, ya, coma) = self.puzzle_slot(na, beta2.as_ref());
                let (sb, yb, comb) = self.puzzle_slot(nb, beta2.as_ref());
                self.slot_a = Some(sa);
                self.slot_b = Some(sb);
                Payload::Puzzle { ya, coma, yb, comb }
            }
            (Phase::TrapGen, _) => {
                let v0 = self.rng.scalar(&params);
                let v1 = self.rng.scalar(&params);
                let p = Payload::TrapGen {
                    v0: params.f_eval(&v0),
                    v1: params.f_eval(&v1),
                };
                self.trap = Some((v0, v1));
                p
            }
            (ph, 0) if ph.receiver_proves() => {
                let stmt = build_language(&self.cfg, ph, &self.view)?;
                let wit = if ph == Phase::WipokTrap {
                    let (v0, v1) = self
                        .trap
                        .clone()
                        .ok_or(ProtocolError::MissingContext("trapdoor secrets"))?;
                    let v = if self.trap_branch == 0 { v0 } else { v1 };
                    Witness::Trap { b: self.trap_branch, v }
                } else {
                    self.wipok1_witness(ph)?
                };
                let (st, first) = or_commit(&params, &stmt, &wit, &mut self.rng)
                    .map_err(|e| ProtocolError::Malformed(e.to_string()))?;
                self.sigma_state = Some(st);
                Payload::SigmaFirst { first }
            }
            (ph, 2) if ph.receiver_proves() => {
                let st = self
                    .sigma_state
                    .take()
                    .ok_or(ProtocolError::MissingContext("sigma state"))?;
                let e = self
                    .view
                    .sigma_e
                    .clone()
                    .ok_or(ProtocolError::MissingContext("sigma challenge"))?;
                Payload::SigmaResponse {
                    response: or_respond(&params, &st, &e),
                }
            }
            (Phase::Wipok2, 1) => {
                let e = match self.forced_challenge.take() {
                    Some(e) => e,
                    None => self.rng.scalar(&params),
                };
                Payload::SigmaChallenge { e }
            }
            (Phase::ExtCom(_), 1) => Payload::ExtComChallenge {
                bits: match self.forced_bits.take() {
                    Some(b) => b,
                    None => self.rng.bits(self.cfg.extcom_pairs),
                },
            },
            _ => return Err(ProtocolError::WrongSender(step.label())),
        })
    }

    pub fn receive(&mut self, step: &StepId, payload: &Payload) -> Result<(), ProtocolError> {
        self.cursor.expect(step, Role::C)?;
        let res =
            absorb(&self.params, &self.cfg, self.tag, &mut self.view, step, payload).and_then(|_| match payload {
                Payload::SigmaResponse { response } if step.phase == Phase::Wipok2 => {
                    check_sigma(&self.params, &self.cfg, &self.view, step, response)
                }
                _ => Ok(()),
            });
        match res {
            Ok(()) => {
                self.cursor.advance();
                if self.cursor.status == Status::Done {
                    self.decision = Decision::Accept;
                }
                Ok(())
            }
            Err(e) => {
                self.abort(&e.to_string());
                Err(e)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Honest sessions and decommitment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct HonestSession {
    /// Naor transcript with the receiver's basis secret attached.
    pub transcript: NaorTranscript,
    pub trace: Vec<TraceRecord>,
    pub decision: Decision,
    pub opening: Opening,
    pub committer: Committer,
    pub receiver: Receiver,
}

/// Runs one honest commit stage between fresh parties.
pub fn run_honest_session(
    params: Group,
    cfg: &ProtocolConfig,
    tag: usize,
    m: Scalar,
    rng: &Rng,
) -> Result<HonestSession, ProtocolError> {
    let mut c = Committer::honest(params.clone(), cfg.clone(), tag, m, rng.split("committer"))?;
    let mut r = Receiver::new(params, cfg.clone(), tag, rng.split("receiver"))?;
    let plan = cfg.plan();
    let mut trace = Vec::with_capacity(plan.len());
    for (round, step) in plan.iter().enumerate() {
        let from = step.sender();
        let payload = match from {
            Role::C => {
                let p = c.send(step)?;
                r.receive(step, &p)?;
                p
            }
            Role::R => {
                let p = r.send(step)?;
                c.receive(step, &p)?;
                p
            }
        };
        trace.push(TraceRecord {
            session: SessionLabel::Standalone,
            round,
            from,
            step: step.label(),
            payload,
        });
    }
    Ok(HonestSession {
        transcript: r.transcript().ok_or(ProtocolError::MissingContext("transcript"))?,
        trace,
        decision: r.decision(),
        opening: c.opening().cloned().expect("honest committer"),
        committer: c,
        receiver: r,
    })
}

/// Decommit stage: rejects whenever the commit stage was rejected.
pub fn decommit_verify(params: &Group, tr: &NaorTranscript, commit_decision: Decision, opening: &Opening) -> bool {
    commit_decision == Decision::Accept && verify_open(params, &tr.basis.h, &tr.com, opening)
}
