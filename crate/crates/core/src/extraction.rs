//! Rewinding machines over the man-in-the-middle game: the simulated main
//! thread `G_i`, the extractors `K_i` and `K`, the simulation-extractor, the
//! hybrid game, and the brute-force lab machines `K'_i`, `K''_i`, `K*_1`,
//! `K**_1`.
//!
//! Every machine starts from an [`SeInput`], which holds no committer state.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::algebra::{AlgebraError, Rng, Scalar};
use crate::commitments::val_oracle;
use crate::mim::{prefix_gen, Adversary, Game, GameProver, MimSetup, SeInput, Session, ValB};
use crate::protocols::{build_language, Decision, Phase, ProtocolConfig, ProtocolError, Slot, StepId, Variant};
use crate::sigma::{wee_run, Witness};

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("group too large for brute force")]
    GroupTooLarge,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("index {0} outside the slot")]
    BadIndex(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtractionParams {
    pub epsilon: f64,
    pub lambda: u64,
    pub t: usize,
    pub t_tilde: usize,
    pub rewind_cap: Option<u64>,
    /// Rewinding budget of each witness-extended emulation.
    pub wee_budget: usize,
    /// Test hook: treat every witness extracted from the left WIPoK-1 as invalid.
    pub corrupt_left_witness: bool,
}

pub fn epsilon_prime(epsilon: f64, t: usize) -> f64 {
    epsilon / (10.0 * (t * t) as f64)
}

/// `ceil((t_tilde / eps') * lambda)`; values within 1e-9 of an integer are
/// taken as that integer.
pub fn loop_count(epsilon: f64, lambda: u64, t: usize, t_tilde: usize) -> u64 {
    let x = t_tilde as f64 / epsilon_prime(epsilon, t) * lambda as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

impl ExtractionParams {
    pub fn new(epsilon: f64, lambda: u64, t: usize, t_tilde: usize) -> Self {
        ExtractionParams {
            epsilon,
            lambda,
            t,
            t_tilde,
            rewind_cap: None,
            wee_budget: 64,
            corrupt_left_witness: false,
        }
    }

    pub fn with_cap(mut self, cap: Option<u64>) -> Self {
        self.rewind_cap = cap;
        self
    }

    pub fn epsilon_prime(&self) -> f64 {
        epsilon_prime(self.epsilon, self.t)
    }

    pub fn loop_count(&self) -> u64 {
        loop_count(self.epsilon, self.lambda, self.t, self.t_tilde)
    }

    /// Loop count after the cap and whether the cap truncated it.
    pub fn effective_loops(&self) -> (u64, bool) {
        let full = self.loop_count();
        match self.rewind_cap {
            Some(c) if c < full => (c, true),
            _ => (full, false),
        }
    }

    /// Lower bound `eps' / t_tilde` on the extraction probability of `K`.
    pub fn k_bound(&self) -> f64 {
        self.epsilon_prime() / self.t_tilde as f64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ExtractionResult {
    Message(Scalar),
    BotY,
    BotInvalid,
}

/// Slot whose puzzles the machines use on both sides.
pub fn good_slot(cfg: &ProtocolConfig, t: usize, t_tilde: usize) -> Slot {
    if cfg.variant == Variant::OneSided || t < t_tilde {
        Slot::A
    } else {
        Slot::B
    }
}

/// Range of `i` for the right session.
pub fn right_slot_size(cfg: &ProtocolConfig, t_tilde: usize, slot: Slot) -> usize {
    let (a, b) = cfg.slot_sizes(t_tilde);
    match slot {
        Slot::A => a,
        Slot::B => b,
    }
}

/// How a machine obtains the left WIPoK-2 witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeftWitness {
    /// From witness-extended emulation of the left WIPoK-1.
    Extracted,
    /// A brute-forced `(s, x_s)` with `s` uniform unless forced.
    Guess(Option<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineSpec {
    pub left_wee: bool,
    pub left_witness: LeftWitness,
    pub right_wee: bool,
}

impl MachineSpec {
    pub const G: MachineSpec = MachineSpec {
        left_wee: true,
        left_witness: LeftWitness::Extracted,
        right_wee: false,
    };
    pub const K: MachineSpec = MachineSpec {
        left_wee: true,
        left_witness: LeftWitness::Extracted,
        right_wee: true,
    };
    pub fn k_prime(forced: Option<usize>) -> MachineSpec {
        MachineSpec {
            left_wee: true,
            left_witness: LeftWitness::Guess(forced),
            right_wee: true,
        }
    }
    pub fn k_double_prime(forced: Option<usize>) -> MachineSpec {
        MachineSpec {
            left_wee: false,
            left_witness: LeftWitness::Guess(forced),
            right_wee: true,
        }
    }
    pub fn k_star(forced: Option<usize>) -> MachineSpec {
        MachineSpec {
            left_wee: true,
            left_witness: LeftWitness::Guess(forced),
            right_wee: false,
        }
    }
    pub fn k_star_star(forced: Option<usize>) -> MachineSpec {
        MachineSpec {
            left_wee: false,
            left_witness: LeftWitness::Guess(forced),
            right_wee: false,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MachineFlags {
    /// Left WIPoK-1 accepted but WEE found no second transcript.
    pub left_exhausted: bool,
    /// Left WIPoK-1 accepted but no valid witness came out.
    pub left_invalid: bool,
    pub left_rejected: bool,
    pub right_exhausted: bool,
    /// The right WIPoK-2 started before the left WIPoK-1 repetition.
    pub nested: bool,
    /// No good index exists; repetition 1 was used.
    pub good_index_missing: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MachineOutcome {
    pub i: usize,
    pub slot: Slot,
    pub left_rep: u32,
    pub out: Option<Vec<u8>>,
    pub b: Decision,
    /// Present when the machine drives the right WIPoK-2 by emulation.
    pub result: Option<ExtractionResult>,
    pub right_witness: Option<Witness>,
    /// Index of the witness extracted from the left WIPoK-1.
    pub extracted_j: Option<usize>,
    /// Index of the brute-forced guess.
    pub guess_s: Option<usize>,
    pub flags: MachineFlags,
    /// `val` of the right transcript via the receiver secret.
    pub val_tau_tilde: Option<Scalar>,
    pub left_rewinds: usize,
    pub right_rewinds: usize,
}

impl MachineOutcome {
    pub fn coincide(&self) -> Option<bool> {
        Some(self.extracted_j? == self.guess_s?)
    }

    /// `Message(m)` implies `m = val(tau_tilde)`.
    pub fn sound(&self) -> bool {
        match &self.result {
            Some(ExtractionResult::Message(m)) => self.val_tau_tilde.as_ref() == Some(m),
            _ => true,
        }
    }
}

fn puzzle_index(w: &Witness) -> Option<(usize, Scalar)> {
    match w.inner() {
        Witness::Indexed { i, x } | Witness::IndexedCommitted { i, x, .. } => Some((*i, x.clone())),
        _ => None,
    }
}

/// Classifies a witness extracted from the right WIPoK-2.
pub fn classify_wipok2(w: Option<&Witness>) -> ExtractionResult {
    let Some(w) = w else {
        return ExtractionResult::BotInvalid;
    };
    match (w.top_branch(), w.inner()) {
        (Some(0), Witness::Opening { m, .. }) | (Some(0), Witness::ExtComBound { m, .. }) => {
            ExtractionResult::Message(m.clone())
        }
        (Some(1), _) | (Some(2), _) => ExtractionResult::BotY,
        _ => ExtractionResult::BotInvalid,
    }
}

fn schedule_index<A>(g: &Game<A>, entry: (Session, StepId)) -> Option<usize> {
    g.schedule.iter().position(|e| *e == entry)
}

/// Runs machine `spec` with right witness index `i` (1-based).
pub fn run_machine<A: Adversary>(
    spec: MachineSpec,
    i: usize,
    input: &SeInput<A>,
    params: &ExtractionParams,
    rng: &Rng,
) -> Result<MachineOutcome, ExtractionError> {
    let group = input.params.clone();
    let cfg = input.cfg.clone();
    let slot = good_slot(&cfg, input.left_tag, input.right_tag);
    let size = right_slot_size(&cfg, input.right_tag, slot);
    if i == 0 || i > size {
        return Err(ExtractionError::BadIndex(i));
    }
    if matches!(spec.left_witness, LeftWitness::Guess(_)) && !group.dlog_feasible() {
        return Err(ExtractionError::GroupTooLarge);
    }
    let mut game = input.resume(rng.split("simulator"))?;
    game.right.set_witness(slot, i);
    let left_phase = cfg.wipok1_phase(slot);
    let mut flags = MachineFlags::default();
    let left_rep = if cfg.variant == Variant::Async {
        match crate::mim::good_index(&cfg, &game.schedule, slot) {
            Some(k) => k as u32 - 1,
            None => {
                flags.good_index_missing = true;
                0
            }
        }
    } else {
        0
    };
    let left_a = (Session::Left, StepId::new(left_phase, left_rep, 0));
    let right_a = (Session::Right, StepId::new(Phase::Wipok2, 0, 0));
    flags.nested = spec.right_wee
        && matches!(
            (schedule_index(&game, right_a), schedule_index(&game, left_a)),
            (Some(r), Some(l)) if r < l
        );
    let mut out = MachineOutcome {
        i,
        slot,
        left_rep,
        out: None,
        b: Decision::Pending,
        result: None,
        right_witness: None,
        extracted_j: None,
        guess_s: None,
        flags,
        val_tau_tilde: game
            .right
            .transcript()
            .and_then(|t| val_oracle(&group, &t, None).ok().flatten()),
        left_rewinds: 0,
        right_rewinds: 0,
    };
    let mut right_done = false;
    if out.flags.nested {
        right_done = true;
        if let Some(r) = right_wee(&mut game, params, rng, &mut out) {
            return Ok(r);
        }
    }

    if game.advance_before(left_a.0, left_a.1) {
        let ys = match slot {
            Slot::A => game.left.view.ya.clone(),
            Slot::B => game.left.view.yb.clone(),
        };
        let mut guess = None;
        if let LeftWitness::Guess(forced) = spec.left_witness {
            let s = match forced {
                Some(s) => s,
                None => rng.split("kprime-guess").below(ys.len() as u64) as usize + 1,
            };
            let y = ys.get(s.wrapping_sub(1)).ok_or(ExtractionError::BadIndex(s))?;
            let x = group.dlog_bruteforce(y)?.ok_or(ExtractionError::GroupTooLarge)?;
            out.guess_s = Some(s);
            guess = Some((s, x));
        }
        let mut injected = guess.clone();
        if spec.left_wee {
            let stmt = build_language(&cfg, left_phase, &game.left.view)?;
            let prover = GameProver::new(game, Session::Left, left_phase, left_rep);
            let res = wee_run(&group, prover, &stmt, &mut rng.split("wee-left"), params.wee_budget);
            game = res.state.game;
            out.left_rewinds = res.rewinds;
            if res.decision {
                let valid = res
                    .witness
                    .as_ref()
                    .filter(|w| !params.corrupt_left_witness && stmt.satisfied_by(&group, w))
                    .and_then(puzzle_index);
                match valid {
                    Some((j, x)) => {
                        out.extracted_j = Some(j);
                        if spec.left_witness == LeftWitness::Extracted {
                            injected = Some((j, x));
                        }
                    }
                    None => {
                        out.flags.left_exhausted = res.exhausted;
                        out.flags.left_invalid = true;
                        out.b = Decision::Reject;
                        if spec.right_wee && !right_done {
                            out.result = Some(ExtractionResult::BotInvalid);
                        }
                        return Ok(out);
                    }
                }
            } else {
                out.flags.left_rejected = true;
                injected = None;
            }
        }
        if let Some((j, x)) = injected {
            let branch = ProtocolConfig::wipok2_branch(slot);
            game.left
                .inject_wipok2_witness(Witness::branch(branch, Witness::Indexed { i: j, x }));
        }
    }

    if spec.right_wee && !right_done {
        if let Some(r) = right_wee(&mut game, params, rng, &mut out) {
            return Ok(r);
        }
    }
    game.run();
    out.out = game.adv.finalize(&game.log);
    out.b = game.right.decision();
    Ok(out)
}

/// Emulates the right WIPoK-2 from the current game. Returns early only
/// when the right session never reaches it.
fn right_wee<A: Adversary>(
    game: &mut Game<A>,
    params: &ExtractionParams,
    rng: &Rng,
    out: &mut MachineOutcome,
) -> Option<MachineOutcome> {
    let step = StepId::new(Phase::Wipok2, 0, 0);
    if !game.advance_before(Session::Right, step) {
        out.result = Some(ExtractionResult::BotInvalid);
        return None;
    }
    let Ok(stmt) = build_language(&game.cfg, Phase::Wipok2, &game.right.view) else {
        out.result = Some(ExtractionResult::BotInvalid);
        return None;
    };
    let prover = GameProver::new(game.clone(), Session::Right, Phase::Wipok2, 0);
    let res = wee_run(
        &game.params,
        prover,
        &stmt,
        &mut rng.split("wee-right"),
        params.wee_budget,
    );
    *game = res.state.game;
    out.right_rewinds = res.rewinds;
    out.flags.right_exhausted = res.exhausted;
    out.result = Some(if res.decision {
        classify_wipok2(res.witness.as_ref())
    } else {
        ExtractionResult::BotInvalid
    });
    out.right_witness = res.witness;
    None
}

pub fn run_g<A: Adversary>(
    i: usize,
    input: &SeInput<A>,
    params: &ExtractionParams,
    rng: &Rng,
) -> Result<MachineOutcome, ExtractionError> {
    run_machine(MachineSpec::G, i, input, params, rng)
}

pub fn run_k_i<A: Adversary>(
    i: usize,
    input: &SeInput<A>,
    params: &ExtractionParams,
    rng: &Rng,
) -> Result<MachineOutcome, ExtractionError> {
    run_machine(MachineSpec::K, i, input, params, rng)
}

/// `K`: a uniform index, then `K_i`.
pub fn run_k<A: Adversary>(
    input: &SeInput<A>,
    params: &ExtractionParams,
    rng: &Rng,
) -> Result<MachineOutcome, ExtractionError> {
    let slot = good_slot(&input.cfg, input.left_tag, input.right_tag);
    let size = right_slot_size(&input.cfg, input.right_tag, slot).max(1);
    let i = rng.split("k-index").below(size as u64) as usize + 1;
    run_k_i(i, input, params, rng)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeOutcome {
    pub out: Option<Vec<u8>>,
    pub val: Option<Scalar>,
    pub b: Decision,
    pub rewinds: u64,
    pub loop_bound: u64,
    pub capped: bool,
    /// K runs whose right emulation ran out of budget.
    pub exhausted_runs: u64,
    pub main_flags: MachineFlags,
}

/// Main thread `G_1`, then up to the loop bound independent `K` runs,
/// stopping at the first extracted message.
pub fn run_se<A: Adversary>(
    input: &SeInput<A>,
    params: &ExtractionParams,
    rng: &Rng,
) -> Result<SeOutcome, ExtractionError> {
    let main = run_g(1, input, params, &rng.split("main"))?;
    let (loops, capped) = params.effective_loops();
    let mut se = SeOutcome {
        out: main.out,
        val: None,
        b: main.b,
        rewinds: 0,
        loop_bound: params.loop_count(),
        capped,
        exhausted_runs: 0,
        main_flags: main.flags,
    };
    if se.b != Decision::Accept {
        return Ok(se);
    }
    for k in 0..loops {
        se.rewinds += 1;
        let r = run_k(input, params, &rng.child("rewind", k))?;
        if r.flags.right_exhausted {
            se.exhausted_runs += 1;
        }
        if let Some(ExtractionResult::Message(m)) = r.result {
            se.val = Some(m);
            break;
        }
    }
    Ok(se)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HybridOutcome {
    pub out: Option<Vec<u8>>,
    pub val: ValB,
    pub se: SeOutcome,
}

/// Honest prefix generation followed by the simulation-extractor.
pub fn run_hybrid_g<A: Adversary>(
    setup: &MimSetup,
    adversary: A,
    params: &ExtractionParams,
    rng: &Rng,
) -> Result<HybridOutcome, ExtractionError> {
    let prefix = prefix_gen(setup, adversary, rng)?;
    let se = run_se(&prefix.se_input(), params, &rng.split("se"))?;
    let val = if setup.left_tag == setup.right_tag {
        ValB::BotTag
    } else if se.b != Decision::Accept {
        ValB::Bot
    } else {
        se.val.clone().map(ValB::Value).unwrap_or(ValB::Bot)
    };
    Ok(HybridOutcome {
        out: se.out.clone(),
        val,
        se,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Machine {
    G(usize),
    K(usize),
    KRandom,
    KPrime(usize),
    KDoublePrime(usize),
    KStar1,
    KStarStar1,
}

impl Machine {
    /// `G`, `G:i`, `K`, `K:i`, `hybrid:kp:i`, `hybrid:kpp:i`, `hybrid:kstar1`, `hybrid:kstarstar1`.
    pub fn parse(s: &str, default_i: usize) -> Result<Machine, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let idx = |k: usize| -> Result<usize, String> {
            parts
                .get(k)
                .map(|v| v.parse::<usize>().map_err(|e| format!("machine {s}: {e}")))
                .unwrap_or(Ok(default_i))
        };
        Ok(match parts.as_slice() {
            ["G", ..] | ["g", ..] => Machine::G(idx(1)?),
            ["K"] | ["k"] => Machine::KRandom,
            ["K", _] | ["k", _] => Machine::K(idx(1)?),
            ["hybrid", "kp", ..] => Machine::KPrime(idx(2)?),
            ["hybrid", "kpp", ..] => Machine::KDoublePrime(idx(2)?),
            ["hybrid", "kstar1"] => Machine::KStar1,
            ["hybrid", "kstarstar1"] => Machine::KStarStar1,
            _ => return Err(format!("unknown machine {s}")),
        })
    }

    pub fn run<A: Adversary>(
        &self,
        input: &SeInput<A>,
        params: &ExtractionParams,
        rng: &Rng,
    ) -> Result<MachineOutcome, ExtractionError> {
        match *self {
            Machine::G(i) => run_g(i, input, params, rng),
            Machine::K(i) => run_k_i(i, input, params, rng),
            Machine::KRandom => run_k(input, params, rng),
            Machine::KPrime(i) => run_machine(MachineSpec::k_prime(None), i, input, params, rng),
            Machine::KDoublePrime(i) => run_machine(MachineSpec::k_double_prime(None), i, input, params, rng),
            Machine::KStar1 => run_machine(MachineSpec::k_star(None), 1, input, params, rng),
            Machine::KStarStar1 => run_machine(MachineSpec::k_star_star(None), 1, input, params, rng),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub message: u64,
    pub bot_y: u64,
    pub bot_invalid: u64,
}

impl Histogram {
    pub fn add(&mut self, r: &ExtractionResult) {
        match r {
            ExtractionResult::Message(_) => self.message += 1,
            ExtractionResult::BotY => self.bot_y += 1,
            ExtractionResult::BotInvalid => self.bot_invalid += 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub trials: u64,
    pub accept_rate: f64,
    pub accept_ci: (f64, f64),
    pub extraction_rate: f64,
    pub histogram: Histogram,
    pub exhausted: u64,
    pub unsound: u64,
}

/// Wilson score interval at confidence `1 - alpha`.
pub fn wilson_interval(successes: u64, n: u64, alpha: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = Normal::new(0.0, 1.0)
        .expect("unit normal")
        .inverse_cdf(1.0 - alpha / 2.0);
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let denom = 1.0 + z * z / n_f;
    let center = (p + z * z / (2.0 * n_f)) / denom;
    let half = z * ((p * (1.0 - p) / n_f) + z * z / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn summarize(outcomes: &[MachineOutcome]) -> ExtractionReport {
    let trials = outcomes.len() as u64;
    let mut histogram = Histogram::default();
    let mut accepted = 0;
    let mut exhausted = 0;
    let mut unsound = 0;
    for o in outcomes {
        if o.b == Decision::Accept {
            accepted += 1;
        }
        if let Some(r) = &o.result {
            histogram.add(r);
        }
        if o.flags.left_exhausted || o.flags.right_exhausted {
            exhausted += 1;
        }
        if !o.sound() {
            unsound += 1;
        }
    }
    let rate = |k: u64| if trials == 0 { 0.0 } else { k as f64 / trials as f64 };
    ExtractionReport {
        trials,
        accept_rate: rate(accepted),
        accept_ci: wilson_interval(accepted, trials, 0.05),
        extraction_rate: rate(histogram.message),
        histogram,
        exhausted,
        unsound,
    }
}

/// Monte-Carlo estimate over `trials` independent runs of `machine`.
pub fn estimate_p<A: Adversary>(
    input: &SeInput<A>,
    machine: Machine,
    params: &ExtractionParams,
    trials: u64,
    rng: &Rng,
) -> Result<ExtractionReport, ExtractionError> {
    let mut outs = Vec::with_capacity(trials as usize);
    for k in 0..trials {
        outs.push(machine.run(input, params, &rng.child("trial", k))?);
    }
    Ok(summarize(&outs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::group_profile;
    use crate::mim::{BuiltinAdversary, Prefix, ScheduleSpec};

    fn setup(variant: Variant, t: usize, tt: usize) -> MimSetup {
        let params = group_profile("test-q20").unwrap();
        MimSetup {
            m: params.scalar_u64(5),
            params,
            cfg: ProtocolConfig::new(variant, 4).with_pairs(4),
            left_tag: t,
            right_tag: tt,
            schedule: ScheduleSpec::Sync,
            advice: Vec::new(),
        }
    }

    fn prefix(s: &MimSetup, a: BuiltinAdversary, seed: u64) -> Prefix<BuiltinAdversary> {
        prefix_gen(s, a, &Rng::from_seed(seed)).unwrap()
    }

    #[test]
    fn arithmetic() {
        assert!((epsilon_prime(0.1, 4) - 0.000625).abs() < 1e-15);
        assert_eq!(loop_count(0.1, 16, 4, 5), 128000);
        assert_eq!(loop_count(0.5, 8, 1, 2), 320);
        assert_eq!(loop_count(0.1, 8, 1, 2), 1600);
        assert!((ExtractionParams::new(0.1, 16, 4, 5).k_bound() - 0.000125).abs() < 1e-15);
    }

    #[test]
    fn k_extracts_honest_message() {
        for (v, t, tt) in [
            (Variant::OneSided, 2, 3),
            (Variant::Sync, 2, 3),
            (Variant::Sync, 3, 1),
            (Variant::Async, 1, 3),
        ] {
            let s = setup(v, t, tt);
            let p = prefix(&s, BuiltinAdversary::honest(9), 1);
            let params = ExtractionParams::new(0.1, 8, t, tt);
            let r = run_k_i(1, &p.se_input(), &params, &Rng::from_seed(2)).unwrap();
            assert_eq!(
                r.result,
                Some(ExtractionResult::Message(s.params.scalar_u64(9))),
                "{v:?} {:?}",
                r.flags
            );
            assert!(r.sound());
            assert_eq!(r.b, Decision::Accept);
        }
    }

    #[test]
    fn planted_gives_bot_y() {
        let s = setup(Variant::OneSided, 2, 3);
        let p = prefix(&s, BuiltinAdversary::planted(9, Slot::A, 2), 3);
        let params = ExtractionParams::new(0.1, 8, 2, 3);
        let r = run_k_i(2, &p.se_input(), &params, &Rng::from_seed(4)).unwrap();
        assert_eq!(r.result, Some(ExtractionResult::BotY));
    }

    #[test]
    fn abort_is_bot_invalid() {
        let s = setup(Variant::Sync, 1, 2);
        let p = prefix(&s, BuiltinAdversary::Abort, 5);
        let params = ExtractionParams::new(0.1, 8, 1, 2);
        let r = run_k_i(1, &p.se_input(), &params, &Rng::from_seed(6)).unwrap();
        assert_eq!(r.result, Some(ExtractionResult::BotInvalid));
        let se = run_se(&p.se_input(), &params, &Rng::from_seed(6)).unwrap();
        assert_eq!(se.val, None);
        assert_eq!(se.rewinds, 0);
    }

    #[test]
    fn corrupted_left_witness_gives_bot() {
        let s = setup(Variant::OneSided, 2, 3);
        let p = prefix(&s, BuiltinAdversary::honest(9), 7);
        let mut params = ExtractionParams::new(0.1, 8, 2, 3);
        params.corrupt_left_witness = true;
        let r = run_g(1, &p.se_input(), &params, &Rng::from_seed(8)).unwrap();
        assert_eq!(r.b, Decision::Reject);
        assert_eq!(r.out, None);
        assert!(r.flags.left_invalid);
    }

    #[test]
    fn se_extracts() {
        let s = setup(Variant::Sync, 1, 2);
        let p = prefix(&s, BuiltinAdversary::honest(4), 9);
        let params = ExtractionParams::new(0.5, 8, 1, 2);
        let se = run_se(&p.se_input(), &params, &Rng::from_seed(10)).unwrap();
        assert_eq!(se.b, Decision::Accept);
        assert_eq!(se.val, Some(s.params.scalar_u64(4)));
        assert_eq!(se.rewinds, 1);
        assert_eq!(se.loop_bound, 320);
    }

    #[test]
    fn forced_coincidence_replay() {
        let s = setup(Variant::OneSided, 3, 2);
        let p = prefix(&s, BuiltinAdversary::honest(9), 11);
        let params = ExtractionParams::new(0.1, 8, 3, 2);
        let rng = Rng::from_seed(12);
        let k = run_k_i(1, &p.se_input(), &params, &rng).unwrap();
        let j = k.extracted_j.unwrap();
        let kp = run_machine(MachineSpec::k_prime(Some(j)), 1, &p.se_input(), &params, &rng).unwrap();
        assert_eq!(kp.coincide(), Some(true));
        let strip = |o: &MachineOutcome| {
            let mut o = o.clone();
            o.guess_s = None;
            serde_json::to_string(&o).unwrap()
        };
        assert_eq!(strip(&k), strip(&kp));
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100, 0.05);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        assert!(wilson_interval(0, 10, 0.05).0.abs() < 1e-12);
    }
}
