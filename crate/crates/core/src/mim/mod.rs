//! The man-in-the-middle game: an honest committer on the left, an honest
//! receiver on the right, and an adversary in between, driven by a schedule.
//!
//! A [`Game`] is a plain value. Cloning it is a snapshot; every rewinding
//! machine works by cloning games, never by re-sending messages.

pub mod adversary;
pub mod schedule;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use adversary::{AdvContext, Adversary, BuiltinAdversary, Copier, HonestIndependent, Produce, ScheduleFilter};
pub use schedule::{
    classify_schedule, crafted_schedule, good_index, good_index_spans, is_feasible, random_schedule, sync_schedule,
    Schedule, ScheduleClass, Session,
};

use crate::algebra::{Group, Rng, Scalar};
use crate::commitments::{val_by_scan, val_oracle, ExtComCommitter, NaorTranscript, Opening, ResumableCommitter};
use crate::protocols::{Committer, Decision, Payload, Phase, ProtocolConfig, ProtocolError, Receiver, Role, StepId};
use crate::sigma::{OrFirst, OrResponse, ResumableProver};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub session: Session,
    pub step: StepId,
    pub from: Role,
    pub payload: Payload,
}

/// `val_b` of the right transcript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ValB {
    Value(Scalar),
    Bot,
    BotTag,
    /// The oracle cannot be evaluated in this group.
    Unavailable,
}

impl ValB {
    fn from_oracle(tags_equal: bool, b: Decision, v: Option<Option<Scalar>>) -> ValB {
        if tags_equal {
            return ValB::BotTag;
        }
        if b != Decision::Accept {
            return ValB::Bot;
        }
        match v {
            Some(Some(m)) => ValB::Value(m),
            Some(None) => ValB::Bot,
            None => ValB::Unavailable,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MimOutcome {
    /// Adversary output; `None` is ⊥.
    pub out_m: Option<Vec<u8>>,
    /// Right transcript without the receiver secret.
    pub tau_tilde: Option<NaorTranscript>,
    pub b: Decision,
    /// Computed through the right receiver's secret.
    pub val_b: ValB,
    /// Recomputed from the public transcript by exhaustive search.
    pub oracle_val_b: ValB,
    pub identity_ok: bool,
    pub invalid: Option<String>,
    pub trace: Vec<(Session, StepId)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Game<A> {
    pub params: Group,
    pub cfg: ProtocolConfig,
    pub left_tag: usize,
    pub right_tag: usize,
    pub left: Committer,
    pub right: Receiver,
    pub adv: A,
    pub schedule: Arc<Schedule>,
    pub pos: usize,
    pub log: Vec<LogEntry>,
    pub invalid: Option<String>,
}

/// Chooses the schedule for a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScheduleSpec {
    Sync,
    Random,
    /// The adversary's preferred schedule, falling back to sync.
    Adversary,
    Explicit(Schedule),
}

impl ScheduleSpec {
    pub fn resolve<A: Adversary>(&self, cfg: &ProtocolConfig, adv: &A, rng: &mut Rng) -> Schedule {
        match self {
            ScheduleSpec::Sync => sync_schedule(cfg),
            ScheduleSpec::Random => random_schedule(cfg, rng),
            ScheduleSpec::Adversary => adv.preferred_schedule(cfg).unwrap_or_else(|| sync_schedule(cfg)),
            ScheduleSpec::Explicit(s) => s.clone(),
        }
    }
}

/// Everything a run needs besides the adversary.
#[derive(Clone, Debug)]
pub struct MimSetup {
    pub params: Group,
    pub cfg: ProtocolConfig,
    pub m: Scalar,
    pub left_tag: usize,
    pub right_tag: usize,
    pub schedule: ScheduleSpec,
    pub advice: Vec<u8>,
}

impl<A: Adversary> Game<A> {
    pub fn new(setup: &MimSetup, adversary: A, rng: &Rng) -> Result<Game<A>, ProtocolError> {
        let cfg = setup.cfg.clone();
        cfg.check_tag(setup.left_tag)?;
        cfg.check_tag(setup.right_tag)?;
        let left = Committer::honest(
            setup.params.clone(),
            cfg.clone(),
            setup.left_tag,
            setup.m.clone(),
            rng.split("left-committer"),
        )?;
        let right = Receiver::new(
            setup.params.clone(),
            cfg.clone(),
            setup.right_tag,
            rng.split("right-receiver"),
        )?;
        let mut adv = adversary;
        adv.init(AdvContext {
            params: &setup.params,
            cfg: &cfg,
            left_tag: setup.left_tag,
            right_tag: setup.right_tag,
            advice: &setup.advice,
            rng: rng.split("adversary"),
        })
        .map_err(ProtocolError::Malformed)?;
        let schedule = setup.schedule.resolve(&cfg, &adv, &mut rng.split("schedule"));
        Ok(Game {
            params: setup.params.clone(),
            cfg,
            left_tag: setup.left_tag,
            right_tag: setup.right_tag,
            left,
            right,
            adv,
            schedule: Arc::new(schedule),
            pos: 0,
            log: Vec::new(),
            invalid: None,
        })
    }

    pub fn session_running(&self, s: Session) -> bool {
        match s {
            Session::Left => self.left.is_running(),
            Session::Right => self.right.is_running(),
        }
    }

    pub fn finished(&self) -> bool {
        self.invalid.is_some() || self.pos >= self.schedule.len()
    }

    /// Executes one schedule entry. Returns `false` once the game is over.
    pub fn step(&mut self) -> bool {
        if self.finished() {
            return false;
        }
        let (session, step) = self.schedule[self.pos];
        self.pos += 1;
        if !self.session_running(session) {
            return true;
        }
        let expected = match session {
            Session::Left => self.left.next_step(),
            Session::Right => self.right.next_step(),
        };
        if expected != Some(step) {
            self.invalid = Some(format!("schedule entry {session:?} {step} out of order"));
            return false;
        }
        let from = step.sender();
        let honest_speaks = matches!((session, from), (Session::Left, Role::C) | (Session::Right, Role::R));
        if honest_speaks {
            let sent = match session {
                Session::Left => self.left.send(&step),
                Session::Right => self.right.send(&step),
            };
            match sent {
                Ok(payload) => {
                    self.adv.on_message(session, &step, &payload);
                    self.log.push(LogEntry {
                        session,
                        step,
                        from,
                        payload,
                    });
                    if session == Session::Right && step.phase == Phase::Puzzle {
                        self.leak();
                    }
                }
                Err(_) => self.adv.on_abort(session),
            }
        } else {
            match self.adv.produce(session, &step) {
                Produce::Send(payload) => {
                    let res = match session {
                        Session::Left => self.left.receive(&step, &payload),
                        Session::Right => self.right.receive(&step, &payload),
                    };
                    self.log.push(LogEntry {
                        session,
                        step,
                        from,
                        payload,
                    });
                    if res.is_err() {
                        self.adv.on_abort(session);
                    }
                }
                Produce::Abort => match session {
                    Session::Left => self.left.abort("adversary aborted"),
                    Session::Right => self.right.abort("adversary aborted"),
                },
                Produce::Infeasible => {
                    self.invalid = Some(format!("adversary cannot produce {session:?} {step}"));
                    return false;
                }
            }
        }
        true
    }

    fn leak(&mut self) {
        if let Some((slot, i)) = self.adv.leak_request() {
            if let Some(x) = self.right.preimage(slot, i) {
                self.adv.on_leak(x);
            }
        }
    }

    pub fn run(&mut self) {
        while self.step() {}
    }

    /// Steps until `(session, step)` has been executed. Returns `false` if
    /// the game ends or the session stops first.
    pub fn advance_through(&mut self, session: Session, step: StepId) -> bool {
        loop {
            if self.log.last().map(|e| (e.session, e.step)) == Some((session, step)) {
                return true;
            }
            if self.finished() || !self.session_running(session) || !self.step() {
                return false;
            }
        }
    }

    /// Steps until the next entry is `(session, step)` without executing it.
    pub fn advance_before(&mut self, session: Session, step: StepId) -> bool {
        loop {
            if self.finished() || !self.session_running(session) {
                return false;
            }
            if self.schedule[self.pos] == (session, step) {
                return true;
            }
            self.step();
        }
    }

    /// Payload of the last logged `(session, step)`.
    pub fn payload_of(&self, session: Session, step: &StepId) -> Option<&Payload> {
        self.log
            .iter()
            .rev()
            .find(|e| e.session == session && e.step == *step)
            .map(|e| &e.payload)
    }

    pub fn trace(&self) -> Vec<(Session, StepId)> {
        self.log.iter().map(|e| (e.session, e.step)).collect()
    }

    /// Left messages as seen on the wire.
    pub fn left_public_log(&self) -> Vec<(StepId, Payload)> {
        self.log
            .iter()
            .filter(|e| e.session == Session::Left)
            .map(|e| (e.step, e.payload.clone()))
            .collect()
    }

    pub fn tags_equal(&self) -> bool {
        self.left_tag == self.right_tag
    }

    /// `val_b` through the right receiver's basis secret.
    pub fn val_b(&self) -> ValB {
        let tr = self.right.transcript();
        let v = tr
            .map(|t| val_oracle(&self.params, &t, None).ok())
            .unwrap_or(Some(None));
        ValB::from_oracle(self.tags_equal(), self.right.decision(), v)
    }

    /// `val_b` recomputed from the public transcript alone.
    pub fn oracle_val_b(&self) -> ValB {
        let tr = self.right.transcript().map(|t| NaorTranscript {
            basis: t.basis.strip(),
            com: t.com,
        });
        let v = match tr {
            Some(t) if self.params.dlog_feasible() => val_by_scan(&self.params, &t).ok(),
            Some(_) => None,
            None => Some(None),
        };
        ValB::from_oracle(self.tags_equal(), self.right.decision(), v)
    }

    pub fn outcome(&self) -> MimOutcome {
        let val_b = self.val_b();
        let oracle_val_b = self.oracle_val_b();
        let identity_ok = oracle_val_b == ValB::Unavailable || val_b == oracle_val_b;
        MimOutcome {
            out_m: self.adv.finalize(&self.log),
            tau_tilde: self.right.transcript().map(|t| NaorTranscript {
                basis: t.basis.strip(),
                com: t.com,
            }),
            b: self.right.decision(),
            val_b,
            oracle_val_b,
            identity_ok,
            invalid: self.invalid.clone(),
            trace: self.trace(),
        }
    }
}

/// Full two-session run.
pub fn run_mim<A: Adversary>(setup: &MimSetup, adversary: A, rng: &Rng) -> Result<MimOutcome, ProtocolError> {
    let mut g = Game::new(setup, adversary, rng)?;
    g.run();
    Ok(g.outcome())
}

/// Snapshot of a game right after both sessions have passed the commit step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Prefix<A> {
    pub game: Game<A>,
}

fn past_commit(pos: usize, running: bool) -> bool {
    pos >= 2 || !running
}

pub fn prefix_gen<A: Adversary>(setup: &MimSetup, adversary: A, rng: &Rng) -> Result<Prefix<A>, ProtocolError> {
    let mut g = Game::new(setup, adversary, rng)?;
    while !(past_commit(g.left.position(), g.left.is_running())
        && past_commit(g.right.position(), g.right.is_running()))
    {
        if !g.step() {
            break;
        }
    }
    Ok(Prefix { game: g })
}

impl<A: Adversary> Prefix<A> {
    /// Continues the honest game from the prefix.
    pub fn resume(&self) -> MimOutcome {
        let mut g = self.game.clone();
        g.run();
        g.outcome()
    }

    /// Left Naor transcript (public part).
    pub fn tau(&self) -> Option<NaorTranscript> {
        self.game.left.view.naor()
    }

    /// Right Naor transcript with the receiver secret.
    pub fn tau_tilde(&self) -> Option<NaorTranscript> {
        self.game.right.transcript()
    }

    /// The inputs of the simulation-extractor; the left committer's state
    /// is dropped here.
    pub fn se_input(&self) -> SeInput<A> {
        let g = &self.game;
        SeInput {
            params: g.params.clone(),
            cfg: g.cfg.clone(),
            left_tag: g.left_tag,
            right_tag: g.right_tag,
            adv: g.adv.clone(),
            right: g.right.clone(),
            left_public: g.left_public_log(),
            left_status_running: g.left.is_running(),
            schedule: g.schedule.clone(),
            pos: g.pos,
            log: g.log.clone(),
            invalid: g.invalid.clone(),
        }
    }
}

/// Prefix with the honest committer removed: what the simulation-extractor
/// receives. No field holds the left message, its randomness, or any value
/// derived from them beyond the public wire messages.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeInput<A> {
    pub params: Group,
    pub cfg: ProtocolConfig,
    pub left_tag: usize,
    pub right_tag: usize,
    pub adv: A,
    pub right: Receiver,
    pub left_public: Vec<(StepId, Payload)>,
    pub left_status_running: bool,
    pub schedule: Arc<Schedule>,
    pub pos: usize,
    pub log: Vec<LogEntry>,
    pub invalid: Option<String>,
}

impl<A: Adversary> SeInput<A> {
    /// Game continuing the prefix with a simulated left committer.
    pub fn resume(&self, rng: Rng) -> Result<Game<A>, ProtocolError> {
        let mut left = Committer::simulated(
            self.params.clone(),
            self.cfg.clone(),
            self.left_tag,
            &self.left_public,
            rng,
        )?;
        if !self.left_status_running {
            left.abort("ended in prefix");
        }
        Ok(Game {
            params: self.params.clone(),
            cfg: self.cfg.clone(),
            left_tag: self.left_tag,
            right_tag: self.right_tag,
            left,
            right: self.right.clone(),
            adv: self.adv.clone(),
            schedule: self.schedule.clone(),
            pos: self.pos,
            log: self.log.clone(),
            invalid: self.invalid.clone(),
        })
    }
}

/// A game viewed as the prover of one sigma repetition, for witness-extended
/// emulation. The game must be positioned before the repetition's first
/// message.
#[derive(Clone, Debug)]
pub struct GameProver<A> {
    pub game: Game<A>,
    pub session: Session,
    pub phase: Phase,
    pub rep: u32,
}

impl<A: Adversary> GameProver<A> {
    pub fn new(game: Game<A>, session: Session, phase: Phase, rep: u32) -> Self {
        GameProver {
            game,
            session,
            phase,
            rep,
        }
    }
}

impl<A: Adversary> ResumableProver for GameProver<A> {
    fn first(&mut self) -> Option<OrFirst> {
        let step = StepId::new(self.phase, self.rep, 0);
        if !self.game.advance_through(self.session, step) {
            return None;
        }
        match self.game.payload_of(self.session, &step)? {
            Payload::SigmaFirst { first } => Some(first.clone()),
            _ => None,
        }
    }

    fn respond(&mut self, e: &Scalar) -> Option<OrResponse> {
        match self.session {
            Session::Left => self.game.left.force_challenge(e.clone()),
            Session::Right => self.game.right.force_challenge(e.clone()),
        }
        let step = StepId::new(self.phase, self.rep, 2);
        if !self.game.advance_through(self.session, step) {
            return None;
        }
        match self.game.payload_of(self.session, &step)? {
            Payload::SigmaResponse { response } => Some(response.clone()),
            _ => None,
        }
    }
}

/// An honest committer/receiver pair paused before an ExtCom repetition,
/// viewed as an ExtCom committer for extraction.
#[derive(Clone, Debug)]
pub struct SessionExtCom {
    pub committer: Committer,
    pub receiver: Receiver,
    pub phase: Phase,
    pub rep: u32,
}

impl SessionExtCom {
    fn exchange(&mut self, step: &StepId) -> Option<Payload> {
        let p = match step.sender() {
            Role::C => {
                let p = self.committer.send(step).ok()?;
                self.receiver.receive(step, &p).ok()?;
                p
            }
            Role::R => {
                let p = self.receiver.send(step).ok()?;
                self.committer.receive(step, &p).ok()?;
                p
            }
        };
        Some(p)
    }

    fn run_to(&mut self, target: StepId) -> Option<Payload> {
        loop {
            let next = self.committer.next_step()?;
            let p = self.exchange(&next)?;
            if next == target {
                return Some(p);
            }
        }
    }

    /// Runs both parties to the end; the receiver's decision.
    pub fn finish(&mut self) -> Decision {
        while let Some(next) = self.committer.next_step() {
            if self.exchange(&next).is_none() {
                break;
            }
        }
        self.receiver.decision()
    }
}

impl ResumableCommitter for SessionExtCom {
    fn commit_message(&mut self) -> Option<Vec<(crate::commitments::Commitment, crate::commitments::Commitment)>> {
        match self.run_to(StepId::new(self.phase, self.rep, 0))? {
            Payload::ExtComCommit { pairs } => Some(pairs),
            _ => None,
        }
    }

    fn respond(&mut self, challenge: &[bool]) -> Option<Vec<Opening>> {
        self.receiver.force_extcom_challenge(challenge.to_vec());
        match self.run_to(StepId::new(self.phase, self.rep, 2))? {
            Payload::ExtComOpen { opened } => Some(opened),
            _ => None,
        }
    }
}

/// The committer's own record of an ExtCom repetition, for cross-checks.
pub fn committed_extcoms(c: &Committer) -> Vec<&ExtComCommitter> {
    c.extcom_committers().iter().map(|(ec, _)| ec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::group_profile;
    use crate::protocols::Variant;

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

    #[test]
    fn honest_independent_value() {
        for v in [Variant::OneSided, Variant::Sync, Variant::Async] {
            let o = run_mim(&setup(v, 2, 3), BuiltinAdversary::honest(9), &Rng::from_seed(3)).unwrap();
            assert_eq!(o.b, Decision::Accept, "{v:?}");
            assert_eq!(o.val_b, ValB::Value(group_profile("test-q20").unwrap().scalar_u64(9)));
            assert!(o.identity_ok);
            assert_eq!(o.out_m, Some(vec![1]));
        }
    }

    #[test]
    fn copier_equal_tags() {
        for v in [Variant::OneSided, Variant::Sync, Variant::Async] {
            let o = run_mim(&setup(v, 2, 2), BuiltinAdversary::copier(), &Rng::from_seed(4)).unwrap();
            assert_eq!(o.val_b, ValB::BotTag);
            assert_eq!(o.b, Decision::Accept, "{v:?} {:?}", o.invalid);
        }
        // puzzle sizes differ, the left session dies and copying becomes impossible
        let o = run_mim(
            &setup(Variant::Sync, 2, 3),
            BuiltinAdversary::copier(),
            &Rng::from_seed(4),
        )
        .unwrap();
        assert!(o.invalid.is_some());
        assert_ne!(o.b, Decision::Accept);
        assert_eq!(o.val_b, ValB::Bot);
    }

    #[test]
    fn abort_gives_bot() {
        let o = run_mim(
            &setup(Variant::Async, 1, 2),
            BuiltinAdversary::Abort,
            &Rng::from_seed(5),
        )
        .unwrap();
        assert_eq!(o.b, Decision::Reject);
        assert_eq!(o.val_b, ValB::Bot);
        assert_eq!(o.out_m, None);
    }

    #[test]
    fn crafted_schedules_run() {
        for k in 1..=5 {
            let mut s = setup(Variant::Async, 1, 3);
            s.schedule = ScheduleSpec::Adversary;
            let o = run_mim(&s, BuiltinAdversary::schedule(7, k), &Rng::from_seed(k as u64)).unwrap();
            assert_eq!(o.b, Decision::Accept);
            let cls = classify_schedule(&s.cfg, &o.trace);
            assert!(cls.contains(&ScheduleClass::bad(k).unwrap()));
        }
    }

    #[test]
    fn prefix_replay() {
        let s = setup(Variant::Async, 1, 3);
        let rng = Rng::from_seed(8);
        let full = run_mim(&s, BuiltinAdversary::honest(9), &rng).unwrap();
        let p1 = prefix_gen(&s, BuiltinAdversary::honest(9), &rng).unwrap();
        let p2 = prefix_gen(&s, BuiltinAdversary::honest(9), &rng).unwrap();
        let j1 = serde_json::to_string(&p1).unwrap();
        assert_eq!(j1, serde_json::to_string(&p2).unwrap());
        let back: Prefix<BuiltinAdversary> = serde_json::from_str(&j1).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), j1);
        let resumed = back.resume();
        assert_eq!(
            serde_json::to_string(&resumed).unwrap(),
            serde_json::to_string(&full).unwrap()
        );
        assert_eq!(p1.game.left.position(), 2);
        assert_eq!(p1.game.right.position(), 2);
    }

    #[test]
    fn filter_wrapper() {
        let s = setup(Variant::Async, 1, 3);
        let rng = Rng::from_seed(9);
        let a = ScheduleFilter::new(BuiltinAdversary::honest(9), ScheduleClass::Synchronous);
        assert_eq!(run_mim(&s, a, &rng).unwrap().out_m, Some(vec![1]));
        let b = ScheduleFilter::new(BuiltinAdversary::honest(9), ScheduleClass::Bad1);
        assert_eq!(run_mim(&s, b, &rng).unwrap().out_m, None);
    }
}
