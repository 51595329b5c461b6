//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use std::collections::BTreeSet;

use nmcom::mim::{Schedule, ScheduleClass, Session};
use nmcom::protocols::{Phase, ProtocolConfig, RepetitionConstants, Role, StepId};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn first_index(trace: &[(Session, StepId)], pred: impl Fn(Session, &StepId) -> bool) -> Option<usize> {
    for (i, (s, st)) in trace.iter().enumerate() {
        if pred(*s, st) {
            return Some(i);
        }
    }
    None
}

fn last_index(trace: &[(Session, StepId)], pred: impl Fn(Session, &StepId) -> bool) -> Option<usize> {
    let mut out = None;
    for (i, (s, st)) in trace.iter().enumerate() {
        if pred(*s, st) {
            out = Some(i);
        }
    }
    out
}

/// `x` happened and `y` either did not happen or happened later.
fn before(x: Option<usize>, y: Option<usize>) -> bool {
    match (x, y) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    }
}

/// Brute-force evaluation of the five Bad predicates straight from their
/// definitions, scanning the trace once per event. Bad4 and Bad5 need a
/// second WIPoK-1 slot.
pub fn brute_force_labels(cfg: &ProtocolConfig, trace: &[(Session, StepId)]) -> BTreeSet<ScheduleClass> {
    let reps = |phase: Phase| cfg.plan().iter().filter(|s| s.phase == phase && s.round == 0).count() as u32;
    let right_msg = |phase: Phase| first_index(trace, |s, st| s == Session::Right && st.phase == phase);
    let left_msg = |phase: Phase| first_index(trace, |s, st| s == Session::Left && st.phase == phase);
    let left_finish = |phase: Phase| {
        let n = reps(phase);
        if n == 0 {
            return None;
        }
        let last = StepId::new(phase, n - 1, 2);
        last_index(trace, |s, st| s == Session::Left && *st == last)
    };
    let slot_a = if reps(Phase::Wipok1) > 0 {
        Phase::Wipok1
    } else {
        Phase::Wipok1A
    };
    let has_b = reps(Phase::Wipok1B) > 0;
    let mut out = BTreeSet::new();
    if before(right_msg(Phase::Puzzle), left_msg(Phase::Commit)) {
        out.insert(ScheduleClass::Bad1);
    }
    if before(left_msg(Phase::Puzzle), right_msg(Phase::Commit)) {
        out.insert(ScheduleClass::Bad2);
    }
    if before(right_msg(slot_a), left_msg(Phase::Puzzle)) {
        out.insert(ScheduleClass::Bad3);
    }
    if has_b && before(right_msg(Phase::Wipok1B), left_finish(slot_a)) {
        out.insert(ScheduleClass::Bad4);
    }
    if has_b && before(right_msg(Phase::Wipok2), left_finish(Phase::Wipok1B)) {
        out.insert(ScheduleClass::Bad5);
    }
    if out.is_empty() {
        out.insert(ScheduleClass::Good);
    }
    if trace == lockstep(cfg).as_slice() {
        out.insert(ScheduleClass::Synchronous);
    }
    out
}

/// Whether left repetition `rep` of `phase` is free of right messages that
/// belong to steps before the right session's `phase`.
pub fn span_is_clean(cfg: &ProtocolConfig, trace: &Schedule, phase: Phase, rep: u32) -> bool {
    let plan = cfg.plan();
    let cut = plan.iter().position(|s| s.phase == phase).unwrap();
    let start = trace
        .iter()
        .position(|e| *e == (Session::Left, StepId::new(phase, rep, 0)))
        .unwrap();
    let end = trace
        .iter()
        .position(|e| *e == (Session::Left, StepId::new(phase, rep, 2)))
        .unwrap();
    trace[start..=end]
        .iter()
        .all(|(s, st)| *s == Session::Left || plan.iter().position(|p| p == st).unwrap() >= cut)
}

/// Number of plan steps before the first step of `phase`.
fn rounds_before(cfg: &ProtocolConfig, phase: Phase) -> usize {
    cfg.plan().iter().take_while(|s| s.phase != phase).count()
}

/// Smallest constants meeting the round-count rule, found by incrementing
/// each constant until it exceeds the length of the real plan up to its step.
pub fn constants_by_search(wipok: usize, extcom: usize) -> [usize; 5] {
    assert_eq!(wipok, 3, "the plan has 3-message sigma and ExtCom phases");
    assert_eq!(extcom, 3);
    let mut c = RepetitionConstants::lab();
    let cfg_for = |c: RepetitionConstants| {
        nmcom::protocols::ProtocolConfig::new(nmcom::protocols::Variant::Async, 4)
            .with_ack(false)
            .with_constants(c)
    };
    let phases = [
        Phase::ExtCom(1),
        Phase::Wipok1A,
        Phase::ExtCom(2),
        Phase::Wipok1B,
        Phase::ExtCom(3),
    ];
    let mut vals = [1usize; 5];
    for k in 0..5 {
        loop {
            let mut arr = vals;
            for later in arr.iter_mut().skip(k + 1) {
                *later = 1;
            }
            c.n5 = arr[0];
            c.n6 = arr[1];
            c.n7 = arr[2];
            c.n8 = arr[3];
            c.n9 = arr[4];
            let cfg = cfg_for(c);
            let rounds = rounds_before(&cfg, phases[k]);
            let extra = if k == 0 { wipok.max(extcom) } else { 0 };
            if vals[k] > rounds && vals[k] > extra {
                break;
            }
            vals[k] += 1;
        }
    }
    vals
}

/// Trial-division primality.
pub fn is_prime_naive(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest `q >= 2^bits` with `q` and `2q + 1` prime.
pub fn search_safe_prime(bits: u32) -> (u64, u64) {
    let mut q = 1u64 << bits;
    loop {
        if is_prime_naive(q) && is_prime_naive(2 * q + 1) {
            return (q, 2 * q + 1);
        }
        q += 1;
    }
}

/// Pearson chi-square test of homogeneity for two count vectors; returns
/// the p-value. Empty categories are dropped.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let n = (na + nb) as f64;
    let mut stat = 0.0;
    let mut cells = 0;
    for (x, y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cells += 1;
        let ea = col * na as f64 / n;
        let eb = col * nb as f64 / n;
        stat += (*x as f64 - ea).powi(2) / ea + (*y as f64 - eb).powi(2) / eb;
    }
    if cells < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((cells - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Sender-first lockstep interleaving, written out by hand.
pub fn lockstep(cfg: &ProtocolConfig) -> Schedule {
    let mut s = Vec::new();
    for st in cfg.plan() {
        let order = if st.sender() == Role::R {
            [Session::Right, Session::Left]
        } else {
            [Session::Left, Session::Right]
        };
        for o in order {
            s.push((o, st));
        }
    }
    s
}
