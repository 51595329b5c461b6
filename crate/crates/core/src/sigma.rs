//! Sigma protocols over linear discrete-log relations, CDS OR-composition,
//! honest-verifier simulation, special-soundness extraction and the budgeted
//! witness-extended emulator.
//!
//! Every statement flattens into a list of atomic relations. An atomic
//! relation is a conjunction of equations `lhs = prod base_k^{w_idx(k)}`
//! over a shared witness vector, so one prover/verifier/simulator serves all
//! languages used by the protocols.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{GroupElement, GroupParams, Rng, Scalar};
use crate::commitments::{verify_open, Commitment, ExtComTranscript};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SigmaError {
    #[error("witness does not satisfy the statement")]
    RelationViolated,
    #[error("branch index {0} out of range")]
    BadBranch(usize),
    #[error("witness shape does not match statement")]
    WitnessShape,
    #[error("statement contains elements outside the subgroup")]
    IllFormed,
    #[error("malformed input: {0}")]
    Malformed(String),
}

/// NP statements proven by the protocols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statement {
    /// `y = f(x)`.
    DLog {
        y: GroupElement,
    },
    /// `com = Com_h(m; r)`.
    OpeningOf {
        h: GroupElement,
        com: Commitment,
    },
    /// `exists i: y_i = f(x_i)`.
    OneOfT {
        ys: Vec<GroupElement>,
    },
    /// `exists i: y_i = f(x_i) and com_i = Com_h(x_i; r_i)`.
    ConsistentPuzzle {
        ys: Vec<GroupElement>,
        coms: Vec<Commitment>,
        h: GroupElement,
    },
    /// `f(v) = V0 or f(v) = V1`.
    TrapOr {
        v0: GroupElement,
        v1: GroupElement,
    },
    /// `com = Com_h(m; r)` and every ExtCom transcript decommits to the same `m`.
    ExtComBound {
        h: GroupElement,
        com: Commitment,
        extcoms: Vec<ExtComTranscript>,
    },
    OrList(Vec<Statement>),
}

/// Witnesses mirroring [`Statement`]. Indices `i` are 1-based as in the
/// protocol descriptions; trapdoor branch `b` is 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Witness {
    DLog {
        x: Scalar,
    },
    Opening {
        m: Scalar,
        r: Scalar,
    },
    Indexed {
        i: usize,
        x: Scalar,
    },
    IndexedCommitted {
        i: usize,
        x: Scalar,
        r: Scalar,
    },
    Trap {
        b: usize,
        v: Scalar,
    },
    /// `(m, r)` and the randomness of every closed share, in transcript then pair order.
    ExtComBound {
        m: Scalar,
        r: Scalar,
        share_rands: Vec<Scalar>,
    },
    Branch {
        index: usize,
        inner: Box<Witness>,
    },
}

impl Witness {
    pub fn branch(index: usize, inner: Witness) -> Witness {
        Witness::Branch {
            index,
            inner: Box::new(inner),
        }
    }

    /// Top-level OR branch, if any.
    pub fn top_branch(&self) -> Option<usize> {
        match self {
            Witness::Branch { index, .. } => Some(*index),
            _ => None,
        }
    }

    pub fn inner(&self) -> &Witness {
        match self {
            Witness::Branch { inner, .. } => inner,
            w => w,
        }
    }
}

/// `lhs = prod base^{w[idx]}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub lhs: GroupElement,
    pub terms: Vec<(GroupElement, usize)>,
}

/// A conjunction of equations over a witness vector of length `n_wit`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub equations: Vec<Equation>,
    pub n_wit: usize,
}

impl Relation {
    pub fn holds(&self, params: &GroupParams, w: &[Scalar]) -> bool {
        w.len() == self.n_wit
            && self.equations.iter().all(|eq| {
                let terms: Vec<_> = eq.terms.iter().map(|(b, i)| (b, &w[*i])).collect();
                params.multi_exp(&terms) == eq.lhs
            })
    }

    pub fn commit_with(&self, params: &GroupParams, nonces: &[Scalar]) -> Vec<GroupElement> {
        self.equations
            .iter()
            .map(|eq| {
                let terms: Vec<_> = eq.terms.iter().map(|(b, i)| (b, &nonces[*i])).collect();
                params.multi_exp(&terms)
            })
            .collect()
    }

    pub fn check(&self, params: &GroupParams, a: &[GroupElement], e: &Scalar, z: &[Scalar]) -> bool {
        if a.len() != self.equations.len() || z.len() != self.n_wit {
            return false;
        }
        if z.iter().any(|s| s.value() >= &params.q) {
            return false;
        }
        self.equations.iter().zip(a).all(|(eq, a_k)| {
            let terms: Vec<_> = eq.terms.iter().map(|(b, i)| (b, &z[*i])).collect();
            params.multi_exp(&terms) == params.mul(a_k, &params.exp(&eq.lhs, e))
        })
    }

    /// `a_k = prod base^{z} * lhs^{-e}`.
    pub fn simulate_first(&self, params: &GroupParams, e: &Scalar, z: &[Scalar]) -> Vec<GroupElement> {
        let neg_e = params.s_neg(e);
        self.equations
            .iter()
            .map(|eq| {
                let terms: Vec<_> = eq.terms.iter().map(|(b, i)| (b, &z[*i])).collect();
                params.mul(&params.multi_exp(&terms), &params.exp(&eq.lhs, &neg_e))
            })
            .collect()
    }
}

fn dlog_relation(params: &GroupParams, y: &GroupElement) -> Relation {
    Relation {
        equations: vec![Equation {
            lhs: y.clone(),
            terms: vec![(params.generator(), 0)],
        }],
        n_wit: 1,
    }
}

/// Witness layout `[m, r]`.
fn opening_equations(
    params: &GroupParams,
    h: &GroupElement,
    com: &Commitment,
    m_idx: usize,
    r_idx: usize,
) -> Vec<Equation> {
    let g = params.generator();
    vec![
        Equation {
            lhs: com.u.clone(),
            terms: vec![(g.clone(), r_idx)],
        },
        Equation {
            lhs: com.v.clone(),
            terms: vec![(h.clone(), r_idx), (g, m_idx)],
        },
    ]
}

impl Statement {
    /// Number of atomic branches after flattening.
    pub fn atom_count(&self) -> usize {
        match self {
            Statement::DLog { .. } | Statement::OpeningOf { .. } | Statement::ExtComBound { .. } => 1,
            Statement::OneOfT { ys } => ys.len(),
            Statement::ConsistentPuzzle { ys, .. } => ys.len(),
            Statement::TrapOr { .. } => 2,
            Statement::OrList(v) => v.iter().map(|s| s.atom_count()).sum(),
        }
    }

    /// Flat index of the first atom of top-level branch `index`.
    pub fn branch_offset(&self, index: usize) -> Option<usize> {
        match self {
            Statement::OrList(v) if index < v.len() => Some(v[..index].iter().map(|s| s.atom_count()).sum()),
            _ if index == 0 => Some(0),
            _ => None,
        }
    }

    /// Top-level branch containing flat atom `flat`.
    pub fn branch_of_atom(&self, flat: usize) -> Option<usize> {
        match self {
            Statement::OrList(v) => {
                let mut acc = 0;
                for (i, s) in v.iter().enumerate() {
                    let c = s.atom_count();
                    if flat < acc + c {
                        return Some(i);
                    }
                    acc += c;
                }
                None
            }
            _ if flat < self.atom_count() => Some(0),
            _ => None,
        }
    }

    pub fn well_formed(&self, params: &GroupParams) -> bool {
        let com_ok = |c: &Commitment| params.is_member(&c.u) && params.is_member(&c.v);
        match self {
            Statement::DLog { y } => params.is_member(y),
            Statement::OpeningOf { h, com } => params.is_member(h) && com_ok(com),
            Statement::OneOfT { ys } => !ys.is_empty() && ys.iter().all(|y| params.is_member(y)),
            Statement::ConsistentPuzzle { ys, coms, h } => {
                !ys.is_empty()
                    && ys.len() == coms.len()
                    && params.is_member(h)
                    && ys.iter().all(|y| params.is_member(y))
                    && coms.iter().all(com_ok)
            }
            Statement::TrapOr { v0, v1 } => params.is_member(v0) && params.is_member(v1),
            Statement::ExtComBound { h, com, extcoms } => {
                params.is_member(h)
                    && com_ok(com)
                    && extcoms.iter().all(|t| {
                        t.pair_commitments.len() == t.challenge.len()
                            && t.opened.len() == t.challenge.len()
                            && t.pair_commitments.iter().all(|(a, b)| com_ok(a) && com_ok(b))
                    })
            }
            Statement::OrList(v) => !v.is_empty() && v.iter().all(|s| s.well_formed(params)),
        }
    }

    /// Flattens to atomic relations in branch order.
    pub fn atoms(&self, params: &GroupParams) -> Vec<Relation> {
        let mut out = Vec::with_capacity(self.atom_count());
        self.push_atoms(params, &mut out);
        out
    }

    fn push_atoms(&self, params: &GroupParams, out: &mut Vec<Relation>) {
        let g = params.generator();
        match self {
            Statement::DLog { y } => out.push(dlog_relation(params, y)),
            Statement::OpeningOf { h, com } => out.push(Relation {
                equations: opening_equations(params, h, com, 0, 1),
                n_wit: 2,
            }),
            Statement::OneOfT { ys } => out.extend(ys.iter().map(|y| dlog_relation(params, y))),
            Statement::ConsistentPuzzle { ys, coms, h } => {
                for (y, c) in ys.iter().zip(coms) {
                    let mut equations = vec![Equation {
                        lhs: y.clone(),
                        terms: vec![(g.clone(), 0)],
                    }];
                    equations.extend(opening_equations(params, h, c, 0, 1));
                    out.push(Relation { equations, n_wit: 2 });
                }
            }
            Statement::TrapOr { v0, v1 } => {
                out.push(dlog_relation(params, v0));
                out.push(dlog_relation(params, v1));
            }
            Statement::ExtComBound { h, com, extcoms } => {
                let mut equations = opening_equations(params, h, com, 0, 1);
                let mut idx = 2;
                for tr in extcoms {
                    for ((c0, c1), (&bit, op)) in tr.pair_commitments.iter().zip(tr.challenge.iter().zip(&tr.opened)) {
                        let (open_c, closed_c) = if bit { (c1, c0) } else { (c0, c1) };
                        if !verify_open(params, h, open_c, op) {
                            // publicly false: an equation with no witness terms and lhs != 1
                            equations.push(Equation {
                                lhs: g.clone(),
                                terms: vec![],
                            });
                        }
                        // closed share equals m - o:  v * g^{o} = h^{r'} g^{m}
                        let shifted = Commitment {
                            u: closed_c.u.clone(),
                            v: params.mul(&closed_c.v, &params.f_eval(&op.m)),
                        };
                        equations.extend(opening_equations(params, h, &shifted, 0, idx));
                        idx += 1;
                    }
                }
                out.push(Relation { equations, n_wit: idx });
            }
            Statement::OrList(v) => {
                for s in v {
                    s.push_atoms(params, out);
                }
            }
        }
    }

    /// Maps a structured witness to `(flat atom index, witness vector)`.
    pub fn flatten_witness(&self, w: &Witness) -> Result<(usize, Vec<Scalar>), SigmaError> {
        match (self, w) {
            (Statement::DLog { .. }, Witness::DLog { x }) => Ok((0, vec![x.clone()])),
            (Statement::OpeningOf { .. }, Witness::Opening { m, r }) => Ok((0, vec![m.clone(), r.clone()])),
            (Statement::OneOfT { ys }, Witness::Indexed { i, x }) => {
                if *i == 0 || *i > ys.len() {
                    return Err(SigmaError::BadBranch(*i));
                }
                Ok((i - 1, vec![x.clone()]))
            }
            (Statement::ConsistentPuzzle { ys, .. }, Witness::IndexedCommitted { i, x, r }) => {
                if *i == 0 || *i > ys.len() {
                    return Err(SigmaError::BadBranch(*i));
                }
                Ok((i - 1, vec![x.clone(), r.clone()]))
            }
            (Statement::TrapOr { .. }, Witness::Trap { b, v }) => {
                if *b > 1 {
                    return Err(SigmaError::BadBranch(*b));
                }
                Ok((*b, vec![v.clone()]))
            }
            (Statement::ExtComBound { .. }, Witness::ExtComBound { m, r, share_rands }) => {
                let mut v = vec![m.clone(), r.clone()];
                v.extend(share_rands.iter().cloned());
                Ok((0, v))
            }
            (Statement::OrList(children), Witness::Branch { index, inner }) => {
                let child = children.get(*index).ok_or(SigmaError::BadBranch(*index))?;
                let (k, v) = child.flatten_witness(inner)?;
                Ok((self.branch_offset(*index).unwrap() + k, v))
            }
            _ => Err(SigmaError::WitnessShape),
        }
    }

    /// Inverse of [`Statement::flatten_witness`].
    pub fn structure_witness(&self, flat: usize, w: Vec<Scalar>) -> Result<Witness, SigmaError> {
        let take = |w: &Vec<Scalar>, n: usize| -> Result<(), SigmaError> {
            if w.len() == n {
                Ok(())
            } else {
                Err(SigmaError::WitnessShape)
            }
        };
        match self {
            Statement::DLog { .. } => {
                take(&w, 1)?;
                Ok(Witness::DLog { x: w[0].clone() })
            }
            Statement::OpeningOf { .. } => {
                take(&w, 2)?;
                Ok(Witness::Opening {
                    m: w[0].clone(),
                    r: w[1].clone(),
                })
            }
            Statement::OneOfT { ys } => {
                take(&w, 1)?;
                if flat >= ys.len() {
                    return Err(SigmaError::BadBranch(flat));
                }
                Ok(Witness::Indexed {
                    i: flat + 1,
                    x: w[0].clone(),
                })
            }
            Statement::ConsistentPuzzle { ys, .. } => {
                take(&w, 2)?;
                if flat >= ys.len() {
                    return Err(SigmaError::BadBranch(flat));
                }
                Ok(Witness::IndexedCommitted {
                    i: flat + 1,
                    x: w[0].clone(),
                    r: w[1].clone(),
                })
            }
            Statement::TrapOr { .. } => {
                take(&w, 1)?;
                Ok(Witness::Trap {
                    b: flat,
                    v: w[0].clone(),
                })
            }
            Statement::ExtComBound { .. } => {
                if w.len() < 2 {
                    return Err(SigmaError::WitnessShape);
                }
                Ok(Witness::ExtComBound {
                    m: w[0].clone(),
                    r: w[1].clone(),
                    share_rands: w[2..].to_vec(),
                })
            }
            Statement::OrList(children) => {
                let b = self.branch_of_atom(flat).ok_or(SigmaError::BadBranch(flat))?;
                let off = self.branch_offset(b).unwrap();
                Ok(Witness::branch(b, children[b].structure_witness(flat - off, w)?))
            }
        }
    }

    /// Checks the NP relation directly.
    pub fn satisfied_by(&self, params: &GroupParams, w: &Witness) -> bool {
        let Ok((k, v)) = self.flatten_witness(w) else {
            return false;
        };
        let atoms = self.atoms(params);
        atoms.get(k).map(|a| a.holds(params, &v)).unwrap_or(false)
    }
}

/// Prover's first message: per atom, one element per equation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrFirst {
    pub branches: Vec<Vec<GroupElement>>,
}

/// Prover's third message: challenge shares and per-atom responses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrResponse {
    pub shares: Vec<Scalar>,
    pub z: Vec<Vec<Scalar>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaTranscript {
    pub first: OrFirst,
    pub e: Scalar,
    pub response: OrResponse,
}

/// Prover state between the first and third message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProverState {
    pub live: usize,
    nonces: Vec<Scalar>,
    wit: Vec<Scalar>,
    /// `(e_j, z_j)` for simulated branches; `None` at the live branch.
    dead: Vec<Option<(Scalar, Vec<Scalar>)>>,
}

/// First move of the CDS prover with explicit nonces for the live branch.
pub fn or_commit_with_nonces(
    params: &GroupParams,
    stmt: &Statement,
    wit: &Witness,
    nonces: Vec<Scalar>,
    rng: &mut Rng,
) -> Result<(ProverState, OrFirst), SigmaError> {
    if !stmt.well_formed(params) {
        return Err(SigmaError::IllFormed);
    }
    let (live, w) = stmt.flatten_witness(wit)?;
    let atoms = stmt.atoms(params);
    let live_rel = atoms.get(live).ok_or(SigmaError::BadBranch(live))?;
    if !live_rel.holds(params, &w) {
        return Err(SigmaError::RelationViolated);
    }
    if nonces.len() != live_rel.n_wit {
        return Err(SigmaError::WitnessShape);
    }
    let mut branches = Vec::with_capacity(atoms.len());
    let mut dead = Vec::with_capacity(atoms.len());
    for (j, rel) in atoms.iter().enumerate() {
        if j == live {
            branches.push(rel.commit_with(params, &nonces));
            dead.push(None);
        } else {
            let e_j = rng.scalar(params);
            let z_j: Vec<Scalar> = (0..rel.n_wit).map(|_| rng.scalar(params)).collect();
            branches.push(rel.simulate_first(params, &e_j, &z_j));
            dead.push(Some((e_j, z_j)));
        }
    }
    Ok((
        ProverState {
            live,
            nonces,
            wit: w,
            dead,
        },
        OrFirst { branches },
    ))
}

/// First move of the CDS prover: simulate dead branches, commit on the live one.
pub fn or_commit(
    params: &GroupParams,
    stmt: &Statement,
    wit: &Witness,
    rng: &mut Rng,
) -> Result<(ProverState, OrFirst), SigmaError> {
    let (live, _) = stmt.flatten_witness(wit)?;
    let n = stmt.atoms(params).get(live).ok_or(SigmaError::BadBranch(live))?.n_wit;
    let nonces = (0..n).map(|_| rng.scalar(params)).collect();
    or_commit_with_nonces(params, stmt, wit, nonces, rng)
}

/// Third move: the live branch takes `e - sum(dead shares)`.
pub fn or_respond(params: &GroupParams, st: &ProverState, e: &Scalar) -> OrResponse {
    let mut e_live = e.clone();
    for (e_j, _) in st.dead.iter().flatten() {
        e_live = params.s_sub(&e_live, e_j);
    }
    let mut shares = Vec::with_capacity(st.dead.len());
    let mut z = Vec::with_capacity(st.dead.len());
    for d in &st.dead {
        match d {
            Some((e_j, z_j)) => {
                shares.push(e_j.clone());
                z.push(z_j.clone());
            }
            None => {
                shares.push(e_live.clone());
                z.push(
                    st.nonces
                        .iter()
                        .zip(&st.wit)
                        .map(|(k, w)| params.s_add(k, &params.s_mul(&e_live, w)))
                        .collect(),
                );
            }
        }
    }
    OrResponse { shares, z }
}

pub fn verify_parts(params: &GroupParams, stmt: &Statement, first: &OrFirst, e: &Scalar, resp: &OrResponse) -> bool {
    if !stmt.well_formed(params) || e.value() >= &params.q {
        return false;
    }
    let atoms = stmt.atoms(params);
    if first.branches.len() != atoms.len() || resp.shares.len() != atoms.len() || resp.z.len() != atoms.len() {
        return false;
    }
    let mut sum = params.zero();
    for s in &resp.shares {
        if s.value() >= &params.q {
            return false;
        }
        sum = params.s_add(&sum, s);
    }
    if sum != *e {
        return false;
    }
    atoms
        .iter()
        .enumerate()
        .all(|(j, rel)| rel.check(params, &first.branches[j], &resp.shares[j], &resp.z[j]))
}

pub fn verify(params: &GroupParams, stmt: &Statement, tr: &SigmaTranscript) -> bool {
    verify_parts(params, stmt, &tr.first, &tr.e, &tr.response)
}

/// Accepting transcript for challenge `e` without a witness.
pub fn simulate(params: &GroupParams, stmt: &Statement, e: &Scalar, rng: &mut Rng) -> SigmaTranscript {
    let atoms = stmt.atoms(params);
    let k = atoms.len();
    let mut shares: Vec<Scalar> = (0..k.saturating_sub(1)).map(|_| rng.scalar(params)).collect();
    let partial = shares.iter().fold(params.zero(), |acc, s| params.s_add(&acc, s));
    shares.push(params.s_sub(e, &partial));
    let mut branches = Vec::with_capacity(k);
    let mut z = Vec::with_capacity(k);
    for (rel, e_j) in atoms.iter().zip(&shares) {
        let z_j: Vec<Scalar> = (0..rel.n_wit).map(|_| rng.scalar(params)).collect();
        branches.push(rel.simulate_first(params, e_j, &z_j));
        z.push(z_j);
    }
    SigmaTranscript {
        first: OrFirst { branches },
        e: e.clone(),
        response: OrResponse { shares, z },
    }
}

/// Runs prover and verifier to completion.
pub fn or_prove(
    params: &GroupParams,
    stmt: &Statement,
    wit: &Witness,
    prover_rng: &mut Rng,
    verifier_rng: &mut Rng,
) -> Result<(SigmaTranscript, bool), SigmaError> {
    let (st, first) = or_commit(params, stmt, wit, prover_rng)?;
    let e = verifier_rng.scalar(params);
    let response = or_respond(params, &st, &e);
    let tr = SigmaTranscript { first, e, response };
    let ok = verify(params, stmt, &tr);
    Ok((tr, ok))
}

/// Same as [`or_prove`]; kept as the entry point for single-relation statements.
pub fn atomic_prove_verify(
    params: &GroupParams,
    stmt: &Statement,
    wit: &Witness,
    prover_rng: &mut Rng,
    verifier_rng: &mut Rng,
) -> Result<(SigmaTranscript, bool), SigmaError> {
    or_prove(params, stmt, wit, prover_rng, verifier_rng)
}

/// Special soundness: two accepting transcripts with a common first message
/// and distinct challenges yield a witness for a branch whose shares differ.
pub fn special_sound_extract(
    params: &GroupParams,
    stmt: &Statement,
    t1: &SigmaTranscript,
    t2: &SigmaTranscript,
) -> Result<Witness, SigmaError> {
    if t1.first != t2.first {
        return Err(SigmaError::Malformed("first messages differ".into()));
    }
    if t1.e == t2.e {
        return Err(SigmaError::Malformed("identical challenges".into()));
    }
    if !verify(params, stmt, t1) || !verify(params, stmt, t2) {
        return Err(SigmaError::Malformed("transcript does not verify".into()));
    }
    let j = (0..t1.response.shares.len())
        .find(|&j| t1.response.shares[j] != t2.response.shares[j])
        .ok_or_else(|| SigmaError::Malformed("no divergent branch".into()))?;
    let de = params.s_sub(&t1.response.shares[j], &t2.response.shares[j]);
    let de_inv = params.s_inv(&de).expect("nonzero difference");
    let w: Vec<Scalar> = t1.response.z[j]
        .iter()
        .zip(&t2.response.z[j])
        .map(|(a, b)| params.s_mul(&params.s_sub(a, b), &de_inv))
        .collect();
    let wit = stmt.structure_witness(j, w)?;
    if !stmt.satisfied_by(params, &wit) {
        return Err(SigmaError::RelationViolated);
    }
    Ok(wit)
}

// ---------------------------------------------------------------------------
// Witness-extended emulation
// ---------------------------------------------------------------------------

/// A prover (together with everything it interacts with) paused before its
/// first message and cloneable at the challenge point.
pub trait ResumableProver: Clone {
    /// Runs up to and returns the first message; `None` if the prover aborts.
    fn first(&mut self) -> Option<OrFirst>;
    /// Delivers the challenge and runs until the response; `None` on abort.
    fn respond(&mut self, e: &Scalar) -> Option<OrResponse>;
}

#[derive(Clone, Debug)]
pub struct WeeResult<P> {
    /// Prover state at the end of the main thread.
    pub state: P,
    pub decision: bool,
    pub witness: Option<Witness>,
    /// Main accepted but no second accepting transcript was found within budget.
    pub exhausted: bool,
    /// Main accepted, a collision was found, but extraction did not yield a valid witness.
    pub invalid: bool,
    pub rewinds: usize,
    pub transcript: Option<SigmaTranscript>,
}

/// Rewinding budget `cap * ceil(1 / p_hat)`.
pub fn wee_budget(cap: usize, p_hat: f64) -> usize {
    if p_hat <= 0.0 {
        return cap;
    }
    cap * (1.0 / p_hat).ceil() as usize
}

/// Runs the main interaction once and, on acceptance, rewinds to the
/// challenge with fresh challenges until a second accepting transcript with
/// a different challenge appears. The returned state and decision are those
/// of the main thread.
pub fn wee_run<P: ResumableProver>(
    params: &GroupParams,
    snapshot: P,
    stmt: &Statement,
    verifier_rng: &mut Rng,
    budget: usize,
) -> WeeResult<P> {
    let mut main = snapshot;
    let done = |state, decision, transcript| WeeResult {
        state,
        decision,
        witness: None,
        exhausted: false,
        invalid: false,
        rewinds: 0,
        transcript,
    };
    let Some(first) = main.first() else {
        return done(main, false, None);
    };
    let pre = main.clone();
    let e = verifier_rng.scalar(params);
    let Some(resp) = main.respond(&e) else {
        return done(main, false, None);
    };
    let t1 = SigmaTranscript {
        first,
        e,
        response: resp,
    };
    if !verify(params, stmt, &t1) {
        return done(main, false, Some(t1));
    }
    let mut rewinds = 0;
    while rewinds < budget {
        rewinds += 1;
        let e2 = verifier_rng.scalar(params);
        if e2 == t1.e {
            continue;
        }
        let mut thread = pre.clone();
        let Some(r2) = thread.respond(&e2) else { continue };
        let t2 = SigmaTranscript {
            first: t1.first.clone(),
            e: e2,
            response: r2,
        };
        if !verify(params, stmt, &t2) {
            continue;
        }
        return match special_sound_extract(params, stmt, &t1, &t2) {
            Ok(w) => WeeResult {
                state: main,
                decision: true,
                witness: Some(w),
                exhausted: false,
                invalid: false,
                rewinds,
                transcript: Some(t1),
            },
            Err(_) => WeeResult {
                state: main,
                decision: true,
                witness: None,
                exhausted: false,
                invalid: true,
                rewinds,
                transcript: Some(t1),
            },
        };
    }
    WeeResult {
        state: main,
        decision: true,
        witness: None,
        exhausted: true,
        invalid: false,
        rewinds,
        transcript: Some(t1),
    }
}

/// Standalone honest prover.
#[derive(Clone, Debug)]
pub struct HonestProver<'a> {
    pub params: &'a GroupParams,
    pub stmt: &'a Statement,
    pub wit: Witness,
    pub rng: Rng,
    pub state: Option<ProverState>,
}

impl<'a> HonestProver<'a> {
    pub fn new(params: &'a GroupParams, stmt: &'a Statement, wit: Witness, rng: Rng) -> Self {
        HonestProver {
            params,
            stmt,
            wit,
            rng,
            state: None,
        }
    }
}

impl ResumableProver for HonestProver<'_> {
    fn first(&mut self) -> Option<OrFirst> {
        let (st, a) = or_commit(self.params, self.stmt, &self.wit, &mut self.rng).ok()?;
        self.state = Some(st);
        Some(a)
    }
    fn respond(&mut self, e: &Scalar) -> Option<OrResponse> {
        Some(or_respond(self.params, self.state.as_ref()?, e))
    }
}

/// Honest prover that only answers challenges in `accept`.
#[derive(Clone, Debug)]
pub struct SelectiveProver<'a> {
    pub inner: HonestProver<'a>,
    pub accept: Vec<Scalar>,
}

impl ResumableProver for SelectiveProver<'_> {
    fn first(&mut self) -> Option<OrFirst> {
        self.inner.first()
    }
    fn respond(&mut self, e: &Scalar) -> Option<OrResponse> {
        if self.accept.contains(e) {
            self.inner.respond(e)
        } else {
            None
        }
    }
}

/// Prover that never sends its first message.
#[derive(Clone, Debug, Default)]
pub struct AbortingProver;

impl ResumableProver for AbortingProver {
    fn first(&mut self) -> Option<OrFirst> {
        None
    }
    fn respond(&mut self, _: &Scalar) -> Option<OrResponse> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::group_profile;

    fn el(v: u64) -> GroupElement {
        GroupElement::from_raw(v.into())
    }

    #[test]
    fn schnorr_example() {
        let g = group_profile("test23").unwrap();
        let stmt = Statement::DLog { y: el(8) };
        let wit = Witness::DLog { x: g.scalar_u64(3) };
        let mut rng = Rng::from_seed(0);
        let (st, a) = or_commit_with_nonces(&g, &stmt, &wit, vec![g.scalar_u64(5)], &mut rng).unwrap();
        assert_eq!(a.branches[0][0], el(9));
        let e = g.scalar_u64(7);
        let resp = or_respond(&g, &st, &e);
        assert_eq!(resp.z[0][0], g.scalar_u64(4));
        assert!(verify_parts(&g, &stmt, &a, &e, &resp));
        // zero challenge returns the nonce
        let resp0 = or_respond(&g, &st, &g.zero());
        assert_eq!(resp0.z[0][0], g.scalar_u64(5));
        assert!(verify_parts(&g, &stmt, &a, &g.zero(), &resp0));
    }

    #[test]
    fn simulator_example() {
        let g = group_profile("test23").unwrap();
        let rel = dlog_relation(&g, &el(8));
        assert_eq!(
            rel.simulate_first(&g, &g.scalar_u64(7), &[g.scalar_u64(4)]),
            vec![el(9)]
        );
        assert_eq!(rel.simulate_first(&g, &g.zero(), &[g.zero()]), vec![el(1)]);
    }

    #[test]
    fn special_soundness_example() {
        let g = group_profile("test23").unwrap();
        let stmt = Statement::DLog { y: el(8) };
        let first = OrFirst {
            branches: vec![vec![el(9)]],
        };
        let mk = |e: u64, z: u64| SigmaTranscript {
            first: first.clone(),
            e: g.scalar_u64(e),
            response: OrResponse {
                shares: vec![g.scalar_u64(e)],
                z: vec![vec![g.scalar_u64(z)]],
            },
        };
        let w = special_sound_extract(&g, &stmt, &mk(7, 4), &mk(2, 0)).unwrap();
        assert_eq!(w, Witness::DLog { x: g.scalar_u64(3) });
        assert!(matches!(
            special_sound_extract(&g, &stmt, &mk(7, 4), &mk(7, 4)),
            Err(SigmaError::Malformed(_))
        ));
    }

    #[test]
    fn representation_extraction() {
        let g = group_profile("test23").unwrap();
        let stmt = Statement::OpeningOf {
            h: el(16),
            com: Commitment { u: el(4), v: el(4) },
        };
        let wit = Witness::Opening {
            m: g.scalar_u64(5),
            r: g.scalar_u64(2),
        };
        let mut rng = Rng::from_seed(4);
        let (st, a) = or_commit(&g, &stmt, &wit, &mut rng).unwrap();
        let t1 = SigmaTranscript {
            first: a.clone(),
            e: g.scalar_u64(3),
            response: or_respond(&g, &st, &g.scalar_u64(3)),
        };
        let t2 = SigmaTranscript {
            first: a,
            e: g.scalar_u64(8),
            response: or_respond(&g, &st, &g.scalar_u64(8)),
        };
        assert_eq!(special_sound_extract(&g, &stmt, &t1, &t2).unwrap(), wit);
    }

    #[test]
    fn branch_counts_and_errors() {
        let g = group_profile("test23").unwrap();
        let stmt = Statement::OrList(vec![
            Statement::OpeningOf {
                h: el(16),
                com: Commitment { u: el(4), v: el(4) },
            },
            Statement::OneOfT {
                ys: vec![el(8), el(13), el(2)],
            },
        ]);
        assert_eq!(stmt.atom_count(), 4);
        let mut rng = Rng::from_seed(1);
        let bad = Witness::branch(
            1,
            Witness::Indexed {
                i: 2,
                x: g.scalar_u64(3),
            },
        );
        assert_eq!(
            or_commit(&g, &stmt, &bad, &mut rng).unwrap_err(),
            SigmaError::RelationViolated
        );
        let oob = Witness::branch(
            1,
            Witness::Indexed {
                i: 4,
                x: g.scalar_u64(3),
            },
        );
        assert_eq!(
            or_commit(&g, &stmt, &oob, &mut rng).unwrap_err(),
            SigmaError::BadBranch(4)
        );
        let good = Witness::branch(
            1,
            Witness::Indexed {
                i: 3,
                x: g.scalar_u64(1),
            },
        );
        let (_, ok) = or_prove(&g, &stmt, &good, &mut rng, &mut Rng::from_seed(2)).unwrap();
        assert!(ok);
    }

    #[test]
    fn wee_honest_and_abort() {
        let g = group_profile("test23").unwrap();
        let stmt = Statement::DLog { y: el(8) };
        let p = HonestProver::new(&g, &stmt, Witness::DLog { x: g.scalar_u64(3) }, Rng::from_seed(3));
        let out = wee_run(&g, p, &stmt, &mut Rng::from_seed(4), 64);
        assert!(out.decision);
        assert_eq!(out.witness, Some(Witness::DLog { x: g.scalar_u64(3) }));
        let ab = wee_run(&g, AbortingProver, &stmt, &mut Rng::from_seed(4), 64);
        assert!(!ab.decision && ab.rewinds == 0 && ab.witness.is_none());
    }

    #[test]
    fn wee_single_challenge_prover_exhausts() {
        let g = group_profile("test23").unwrap();
        let stmt = Statement::DLog { y: el(8) };
        let seven = g.scalar_u64(7);
        let mut accepted = 0;
        for seed in 0..200 {
            let p = SelectiveProver {
                inner: HonestProver::new(&g, &stmt, Witness::DLog { x: g.scalar_u64(3) }, Rng::from_seed(seed)),
                accept: vec![seven.clone()],
            };
            let out = wee_run(&g, p, &stmt, &mut Rng::from_seed(1000 + seed), 64);
            if out.decision {
                accepted += 1;
                assert!(out.exhausted && out.witness.is_none());
            }
        }
        assert!(accepted > 0 && accepted < 60);
    }
}
