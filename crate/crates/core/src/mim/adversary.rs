//! Adversary interface and the built-in man-in-the-middle strategies.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::schedule::{classify_schedule, crafted_schedule, Schedule, ScheduleClass, Session};
use super::LogEntry;
use crate::algebra::{Group, Rng, Scalar};
use crate::protocols::{Committer, Decision, Payload, ProtocolConfig, Receiver, Slot, StepId};
use crate::sigma::Witness;

/// What the adversary does when the schedule gives it the floor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Produce {
    Send(Payload),
    Abort,
    /// The adversary cannot produce this step under the current schedule.
    Infeasible,
}

pub struct AdvContext<'a> {
    pub params: &'a Group,
    pub cfg: &'a ProtocolConfig,
    pub left_tag: usize,
    pub right_tag: usize,
    pub advice: &'a [u8],
    pub rng: Rng,
}

/// A man-in-the-middle: receiver in the left session, committer in the
/// right one. Snapshots are plain clones.
pub trait Adversary: Clone + Send + Sync {
    fn name(&self) -> String;
    fn init(&mut self, ctx: AdvContext<'_>) -> Result<(), String>;
    /// An honest party's message as it arrives.
    fn on_message(&mut self, session: Session, step: &StepId, payload: &Payload);
    fn produce(&mut self, session: Session, step: &StepId) -> Produce;
    /// The honest party of `session` ended the session.
    fn on_abort(&mut self, _session: Session) {}
    /// Right-session puzzle preimage the harness should hand over.
    fn leak_request(&self) -> Option<(Slot, usize)> {
        None
    }
    fn on_leak(&mut self, _x: Scalar) {}
    /// `None` is the output ⊥.
    fn finalize(&self, log: &[LogEntry]) -> Option<Vec<u8>>;
    fn preferred_schedule(&self, _cfg: &ProtocolConfig) -> Option<Schedule> {
        None
    }
}

/// Plays an honest receiver on the left and an honest committer to its own
/// message on the right, with no dependence between the two.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HonestIndependent {
    pub m: u64,
    left: Option<Receiver>,
    right: Option<Committer>,
    leak: Option<(Slot, usize)>,
}

impl HonestIndependent {
    pub fn new(m: u64) -> Self {
        HonestIndependent {
            m,
            left: None,
            right: None,
            leak: None,
        }
    }

    fn init_parties(&mut self, ctx: &AdvContext<'_>) -> Result<(), String> {
        let m = ctx.params.scalar_u64(self.m);
        self.left = Some(
            Receiver::new(
                ctx.params.clone(),
                ctx.cfg.clone(),
                ctx.left_tag,
                ctx.rng.split("left-receiver"),
            )
            .map_err(|e| e.to_string())?,
        );
        self.right = Some(
            Committer::honest(
                ctx.params.clone(),
                ctx.cfg.clone(),
                ctx.right_tag,
                m,
                ctx.rng.split("right-committer"),
            )
            .map_err(|e| e.to_string())?,
        );
        Ok(())
    }

    fn on_msg(&mut self, session: Session, step: &StepId, payload: &Payload) {
        let _ = match session {
            Session::Left => self.left.as_mut().map(|r| r.receive(step, payload)),
            Session::Right => self.right.as_mut().map(|c| c.receive(step, payload)),
        };
    }

    fn produce_msg(&mut self, session: Session, step: &StepId) -> Produce {
        let res = match session {
            Session::Left => self.left.as_mut().map(|r| r.send(step)),
            Session::Right => self.right.as_mut().map(|c| c.send(step)),
        };
        match res {
            Some(Ok(p)) => Produce::Send(p),
            _ => Produce::Abort,
        }
    }

    fn left_accepted(&self) -> bool {
        self.left.as_ref().map(|r| r.decision()) == Some(Decision::Accept)
    }
}

/// Relays every message to the same step of the other session.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Copier {
    seen: HashMap<String, Payload>,
}

fn seen_key(session: Session, step: &StepId) -> String {
    format!("{session:?}/{}", step.label())
}

/// Built-in adversaries as one serializable type.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum BuiltinAdversary {
    HonestIndependent(HonestIndependent),
    /// Honest-independent on the right, but proves WIPoK-2 through the
    /// puzzle branch using a leaked preimage `(slot, i)`.
    PlantedTrapdoor {
        inner: HonestIndependent,
        slot: Slot,
        i: usize,
    },
    Copier(Copier),
    Abort,
    /// Honest-independent driven along the crafted Bad-`k` schedule.
    Schedule {
        inner: HonestIndependent,
        k: u8,
    },
}

impl BuiltinAdversary {
    pub fn honest(m: u64) -> Self {
        BuiltinAdversary::HonestIndependent(HonestIndependent::new(m))
    }

    pub fn planted(m: u64, slot: Slot, i: usize) -> Self {
        BuiltinAdversary::PlantedTrapdoor {
            inner: HonestIndependent::new(m),
            slot,
            i,
        }
    }

    pub fn copier() -> Self {
        BuiltinAdversary::Copier(Copier::default())
    }

    pub fn schedule(m: u64, k: u8) -> Self {
        BuiltinAdversary::Schedule {
            inner: HonestIndependent::new(m),
            k,
        }
    }

    /// Parses `honest[:m]`, `planted[:m[:slot:i]]`, `copier`, `abort`, `schedule:k[:m]`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize, d: u64| -> Result<u64, String> {
            parts
                .get(i)
                .map(|v| v.parse::<u64>().map_err(|e| format!("adversary {s}: {e}")))
                .unwrap_or(Ok(d))
        };
        Ok(match parts[0] {
            "honest" | "honest-independent" => Self::honest(num(1, 9)?),
            "planted" | "planted-trapdoor" => {
                let slot = match parts.get(2).copied() {
                    None | Some("a") | Some("A") => Slot::A,
                    Some("b") | Some("B") => Slot::B,
                    Some(x) => return Err(format!("unknown slot {x}")),
                };
                Self::planted(num(1, 9)?, slot, num(3, 1)? as usize)
            }
            "copier" => Self::copier(),
            "abort" => BuiltinAdversary::Abort,
            "schedule" => Self::schedule(num(2, 9)?, num(1, 1)? as u8),
            other => return Err(format!("unknown adversary {other}")),
        })
    }
}

impl Adversary for BuiltinAdversary {
    fn name(&self) -> String {
        match self {
            BuiltinAdversary::HonestIndependent(h) => format!("honest:{}", h.m),
            BuiltinAdversary::PlantedTrapdoor { inner, slot, i } => format!("planted:{}:{slot:?}:{i}", inner.m),
            BuiltinAdversary::Copier(_) => "copier".into(),
            BuiltinAdversary::Abort => "abort".into(),
            BuiltinAdversary::Schedule { inner, k } => format!("schedule:{k}:{}", inner.m),
        }
    }

    fn init(&mut self, ctx: AdvContext<'_>) -> Result<(), String> {
        match self {
            BuiltinAdversary::HonestIndependent(h) | BuiltinAdversary::Schedule { inner: h, .. } => {
                h.init_parties(&ctx)
            }
            BuiltinAdversary::PlantedTrapdoor { inner, slot, i } => {
                inner.init_parties(&ctx)?;
                inner.leak = Some((*slot, *i));
                Ok(())
            }
            BuiltinAdversary::Copier(c) => {
                c.seen.clear();
                Ok(())
            }
            BuiltinAdversary::Abort => Ok(()),
        }
    }

    fn on_message(&mut self, session: Session, step: &StepId, payload: &Payload) {
        match self {
            BuiltinAdversary::HonestIndependent(h)
            | BuiltinAdversary::Schedule { inner: h, .. }
            | BuiltinAdversary::PlantedTrapdoor { inner: h, .. } => h.on_msg(session, step, payload),
            BuiltinAdversary::Copier(c) => {
                c.seen.insert(seen_key(session, step), payload.clone());
            }
            BuiltinAdversary::Abort => {}
        }
    }

    fn produce(&mut self, session: Session, step: &StepId) -> Produce {
        match self {
            BuiltinAdversary::HonestIndependent(h)
            | BuiltinAdversary::Schedule { inner: h, .. }
            | BuiltinAdversary::PlantedTrapdoor { inner: h, .. } => h.produce_msg(session, step),
            BuiltinAdversary::Copier(c) => match c.seen.get(&seen_key(session.other(), step)) {
                Some(p) => {
                    let p = p.clone();
                    c.seen.insert(seen_key(session, step), p.clone());
                    Produce::Send(p)
                }
                None => Produce::Infeasible,
            },
            BuiltinAdversary::Abort => Produce::Abort,
        }
    }

    fn leak_request(&self) -> Option<(Slot, usize)> {
        match self {
            BuiltinAdversary::PlantedTrapdoor { inner, .. } => inner.leak,
            _ => None,
        }
    }

    fn on_leak(&mut self, x: Scalar) {
        if let BuiltinAdversary::PlantedTrapdoor { inner, slot, i } = self {
            if let Some(c) = inner.right.as_mut() {
                let branch = ProtocolConfig::wipok2_branch(*slot);
                c.inject_wipok2_witness(Witness::branch(branch, Witness::Indexed { i: *i, x }));
            }
        }
    }

    fn finalize(&self, _log: &[LogEntry]) -> Option<Vec<u8>> {
        match self {
            BuiltinAdversary::HonestIndependent(h)
            | BuiltinAdversary::Schedule { inner: h, .. }
            | BuiltinAdversary::PlantedTrapdoor { inner: h, .. } => Some(vec![h.left_accepted() as u8]),
            BuiltinAdversary::Copier(_) => Some(vec![1]),
            BuiltinAdversary::Abort => None,
        }
    }

    fn preferred_schedule(&self, cfg: &ProtocolConfig) -> Option<Schedule> {
        match self {
            BuiltinAdversary::Schedule { k, .. } => crafted_schedule(cfg, *k),
            _ => None,
        }
    }
}

/// Runs the inner adversary and outputs ⊥ unless the realized schedule
/// carries the target class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleFilter<A> {
    pub inner: A,
    pub target: ScheduleClass,
    cfg: Option<ProtocolConfig>,
}

impl<A> ScheduleFilter<A> {
    pub fn new(inner: A, target: ScheduleClass) -> Self {
        ScheduleFilter {
            inner,
            target,
            cfg: None,
        }
    }
}

impl<A: Adversary> Adversary for ScheduleFilter<A> {
    fn name(&self) -> String {
        format!("filter[{:?}]({})", self.target, self.inner.name())
    }

    fn init(&mut self, ctx: AdvContext<'_>) -> Result<(), String> {
        self.cfg = Some(ctx.cfg.clone());
        self.inner.init(ctx)
    }

    fn on_message(&mut self, session: Session, step: &StepId, payload: &Payload) {
        self.inner.on_message(session, step, payload)
    }

    fn produce(&mut self, session: Session, step: &StepId) -> Produce {
        self.inner.produce(session, step)
    }

    fn on_abort(&mut self, session: Session) {
        self.inner.on_abort(session)
    }

    fn leak_request(&self) -> Option<(Slot, usize)> {
        self.inner.leak_request()
    }

    fn on_leak(&mut self, x: Scalar) {
        self.inner.on_leak(x)
    }

    fn finalize(&self, log: &[LogEntry]) -> Option<Vec<u8>> {
        let cfg = self.cfg.as_ref()?;
        let trace: Schedule = log.iter().map(|e| (e.session, e.step)).collect();
        if classify_schedule(cfg, &trace).contains(&self.target) {
            self.inner.finalize(log)
        } else {
            None
        }
    }

    fn preferred_schedule(&self, cfg: &ProtocolConfig) -> Option<Schedule> {
        self.inner.preferred_schedule(cfg)
    }
}
