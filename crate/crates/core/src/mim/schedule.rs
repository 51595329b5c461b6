//! Interleavings of the left and right sessions, their classification into
//! the good/bad taxonomy, and good-index selection.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::Rng;
use crate::protocols::{Phase, ProtocolConfig, Role, Slot, StepId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Session {
    Left,
    Right,
}

impl Session {
    pub fn other(&self) -> Session {
        match self {
            Session::Left => Session::Right,
            Session::Right => Session::Left,
        }
    }
}

pub type Schedule = Vec<(Session, StepId)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScheduleClass {
    Synchronous,
    Good,
    Bad1,
    Bad2,
    Bad3,
    Bad4,
    Bad5,
}

impl ScheduleClass {
    pub fn parse(s: &str) -> Option<ScheduleClass> {
        Some(match s.to_ascii_lowercase().as_str() {
            "synchronous" | "sync" => ScheduleClass::Synchronous,
            "good" => ScheduleClass::Good,
            "bad1" => ScheduleClass::Bad1,
            "bad2" => ScheduleClass::Bad2,
            "bad3" => ScheduleClass::Bad3,
            "bad4" => ScheduleClass::Bad4,
            "bad5" => ScheduleClass::Bad5,
            _ => return None,
        })
    }

    pub fn bad(k: u8) -> Option<ScheduleClass> {
        Some(match k {
            1 => ScheduleClass::Bad1,
            2 => ScheduleClass::Bad2,
            3 => ScheduleClass::Bad3,
            4 => ScheduleClass::Bad4,
            5 => ScheduleClass::Bad5,
            _ => return None,
        })
    }
}

/// Both sessions advance in lockstep; within a step the session whose
/// honest party speaks goes first.
pub fn sync_schedule(cfg: &ProtocolConfig) -> Schedule {
    let mut out = Vec::new();
    for s in cfg.plan() {
        match s.sender() {
            Role::R => {
                out.push((Session::Right, s));
                out.push((Session::Left, s));
            }
            Role::C => {
                out.push((Session::Left, s));
                out.push((Session::Right, s));
            }
        }
    }
    out
}

/// Uniformly random merge of the two plans.
pub fn random_schedule(cfg: &ProtocolConfig, rng: &mut Rng) -> Schedule {
    let plan = cfg.plan();
    let (mut l, mut r) = (0, 0);
    let mut out = Vec::with_capacity(2 * plan.len());
    while l < plan.len() || r < plan.len() {
        let rem_l = (plan.len() - l) as u64;
        let rem_r = (plan.len() - r) as u64;
        if rng.below(rem_l + rem_r) < rem_l {
            out.push((Session::Left, plan[l]));
            l += 1;
        } else {
            out.push((Session::Right, plan[r]));
            r += 1;
        }
    }
    out
}

fn index_of(plan: &[StepId], pred: impl Fn(&StepId) -> bool) -> usize {
    plan.iter().position(pred).unwrap_or(plan.len())
}

/// Hand-built schedule exhibiting Bad-`k` (and for `k = 1` the others too).
pub fn crafted_schedule(cfg: &ProtocolConfig, k: u8) -> Option<Schedule> {
    let plan = cfg.plan();
    let tag = |s: Session, v: &[StepId]| v.iter().map(|x| (s, *x)).collect::<Vec<_>>();
    let sync_part = |v: &[StepId]| {
        let mut out = Vec::new();
        for s in v {
            match s.sender() {
                Role::R => out.extend([(Session::Right, *s), (Session::Left, *s)]),
                Role::C => out.extend([(Session::Left, *s), (Session::Right, *s)]),
            }
        }
        out
    };
    let puzzle = index_of(&plan, |s| s.phase == Phase::Puzzle);
    let slot_a = index_of(&plan, |s| matches!(s.phase, Phase::Wipok1 | Phase::Wipok1A));
    let slot_b = index_of(&plan, |s| s.phase == Phase::Wipok1B);
    let wipok2 = index_of(&plan, |s| s.phase == Phase::Wipok2);
    let mut out = Vec::new();
    match k {
        1 => {
            out.extend(tag(Session::Right, &plan));
            out.extend(tag(Session::Left, &plan));
        }
        2 => {
            out.extend(tag(Session::Left, &plan));
            out.extend(tag(Session::Right, &plan));
        }
        3 => {
            out.extend(tag(Session::Left, &plan[..2]));
            out.extend(tag(Session::Right, &plan[..=slot_a]));
            out.extend(tag(Session::Left, &plan[2..]));
            out.extend(tag(Session::Right, &plan[slot_a + 1..]));
        }
        4 => {
            if slot_b >= plan.len() {
                return None;
            }
            out.extend(sync_part(&plan[..=puzzle]));
            out.extend(tag(Session::Right, &plan[puzzle + 1..=slot_b]));
            out.extend(tag(Session::Left, &plan[puzzle + 1..]));
            out.extend(tag(Session::Right, &plan[slot_b + 1..]));
        }
        5 => {
            let start = if slot_b < plan.len() { slot_b } else { slot_a };
            out.extend(sync_part(&plan[..start]));
            out.extend(tag(Session::Right, &plan[start..=wipok2]));
            out.extend(tag(Session::Left, &plan[start..]));
            out.extend(tag(Session::Right, &plan[wipok2 + 1..]));
        }
        _ => return None,
    }
    Some(out)
}

#[derive(Serialize, Deserialize)]
struct FileEntry {
    session: Session,
    step: String,
}

pub fn schedule_to_json(s: &Schedule) -> String {
    let v: Vec<FileEntry> = s
        .iter()
        .map(|(session, step)| FileEntry {
            session: *session,
            step: step.label(),
        })
        .collect();
    serde_json::to_string(&v).expect("schedule serializes")
}

pub fn schedule_from_json(txt: &str) -> Result<Schedule, String> {
    let v: Vec<FileEntry> = serde_json::from_str(txt).map_err(|e| e.to_string())?;
    v.into_iter()
        .map(|e| {
            StepId::parse(&e.step)
                .map(|s| (e.session, s))
                .ok_or_else(|| format!("unknown step label {}", e.step))
        })
        .collect()
}

pub fn load_schedule(path: &Path) -> Result<Schedule, String> {
    let txt = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    schedule_from_json(&txt)
}

/// Each session's subsequence must be a prefix of its plan.
pub fn is_feasible(cfg: &ProtocolConfig, s: &Schedule) -> bool {
    let plan = cfg.plan();
    let (mut l, mut r) = (0, 0);
    for (sess, step) in s {
        let idx = match sess {
            Session::Left => &mut l,
            Session::Right => &mut r,
        };
        if plan.get(*idx) != Some(step) {
            return false;
        }
        *idx += 1;
    }
    true
}

/// Position lookup over a realized trace; absent events sit at infinity.
struct Positions {
    map: HashMap<(Session, StepId), usize>,
}

impl Positions {
    fn new(trace: &[(Session, StepId)]) -> Positions {
        let mut map = HashMap::with_capacity(trace.len());
        for (i, e) in trace.iter().enumerate() {
            map.entry(*e).or_insert(i);
        }
        Positions { map }
    }

    fn at(&self, s: Session, step: StepId) -> usize {
        self.map.get(&(s, step)).copied().unwrap_or(usize::MAX)
    }
}

fn slot_a_phase(plan: &[StepId]) -> Phase {
    if plan.iter().any(|s| s.phase == Phase::Wipok1) {
        Phase::Wipok1
    } else {
        Phase::Wipok1A
    }
}

/// First and last step of a repeated phase in the plan.
fn phase_bounds(plan: &[StepId], phase: Phase) -> Option<(StepId, StepId)> {
    let first = plan.iter().find(|s| s.phase == phase)?;
    let last = plan.iter().rev().find(|s| s.phase == phase)?;
    Some((*first, *last))
}

/// The Bad labels that hold on a trace (empty means good).
pub fn bad_labels(cfg: &ProtocolConfig, trace: &[(Session, StepId)]) -> BTreeSet<ScheduleClass> {
    let plan = cfg.plan();
    let pos = Positions::new(trace);
    let inf = usize::MAX;
    let commit = StepId::single(Phase::Commit);
    let puzzle = StepId::single(Phase::Puzzle);
    let a = phase_bounds(&plan, slot_a_phase(&plan));
    let b = phase_bounds(&plan, Phase::Wipok1B);
    let w2 = phase_bounds(&plan, Phase::Wipok2);
    let mut out = BTreeSet::new();
    if pos.at(Session::Right, puzzle) < pos.at(Session::Left, commit) {
        out.insert(ScheduleClass::Bad1);
    }
    if pos.at(Session::Left, puzzle) < pos.at(Session::Right, commit) {
        out.insert(ScheduleClass::Bad2);
    }
    if let Some((a0, a1)) = a {
        if pos.at(Session::Right, a0) < pos.at(Session::Left, puzzle) {
            out.insert(ScheduleClass::Bad3);
        }
        if let Some((b0, _)) = b {
            if pos.at(Session::Right, b0) < pos.at(Session::Left, a1) {
                out.insert(ScheduleClass::Bad4);
            }
        }
    }
    let left_one_b_end = b.map(|(_, b1)| pos.at(Session::Left, b1)).unwrap_or(inf);
    if let Some((w0, _)) = w2 {
        if b.is_some() && pos.at(Session::Right, w0) < left_one_b_end {
            out.insert(ScheduleClass::Bad5);
        }
    }
    out
}

/// Every class label that applies to a trace.
pub fn classify_schedule(cfg: &ProtocolConfig, trace: &[(Session, StepId)]) -> BTreeSet<ScheduleClass> {
    let mut out = bad_labels(cfg, trace);
    if out.is_empty() {
        out.insert(ScheduleClass::Good);
    }
    if trace == sync_schedule(cfg).as_slice() {
        out.insert(ScheduleClass::Synchronous);
    }
    out
}

/// Smallest 1-based repetition whose closed span `[start, end]` contains no
/// window position. Repetitions with missing endpoints are never chosen.
pub fn good_index_spans(reps: &[(usize, usize)], window: &[usize]) -> Option<usize> {
    let mut w = window.to_vec();
    w.sort_unstable();
    reps.iter().enumerate().find_map(|(i, &(s, e))| {
        if s == usize::MAX || e == usize::MAX {
            return None;
        }
        let k = w.partition_point(|&x| x < s);
        let clean = w.get(k).is_none_or(|&x| x > e);
        clean.then_some(i + 1)
    })
}

/// Good index of the left WIPoK-1 repetitions of `slot` against the right
/// messages that precede the right session's WIPoK-1 of that slot.
pub fn good_index(cfg: &ProtocolConfig, trace: &[(Session, StepId)], slot: Slot) -> Option<usize> {
    let plan = cfg.plan();
    let phase = cfg.wipok1_phase(slot);
    let cut = plan.iter().position(|s| s.phase == phase)?;
    let window_steps: BTreeSet<StepId> = plan[..cut].iter().copied().collect();
    let pos = Positions::new(trace);
    let window: Vec<usize> = trace
        .iter()
        .enumerate()
        .filter(|(_, (s, step))| *s == Session::Right && window_steps.contains(step))
        .map(|(i, _)| i)
        .collect();
    let reps = plan.iter().filter(|s| s.phase == phase && s.round == 0).count();
    let spans: Vec<(usize, usize)> = (0..reps as u32)
        .map(|r| {
            (
                pos.at(Session::Left, StepId::new(phase, r, 0)),
                pos.at(Session::Left, StepId::new(phase, r, 2)),
            )
        })
        .collect();
    good_index_spans(&spans, &window)
}

/// Number of right messages in the window of `slot`.
pub fn window_rounds(cfg: &ProtocolConfig, slot: Slot) -> usize {
    let plan = cfg.plan();
    let phase = cfg.wipok1_phase(slot);
    plan.iter().position(|s| s.phase == phase).unwrap_or(plan.len())
}
