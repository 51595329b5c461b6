//! Command-line experiment runner. Every subcommand prints a JSON report
//! and reports whether its asserted invariants held.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::algebra::{group_from_file, group_profile, Group, GroupElement, Rng, PROFILE_NAMES};
use crate::commitments::{
    commit, commitment_well_formed, val_oracle, verify_open, Commitment, Opening, DEFAULT_EXTCOM_PAIRS,
};
use crate::extraction::{run_hybrid_g, run_se, summarize, wilson_interval, ExtractionParams, Machine, MachineOutcome};
use crate::mim::schedule::load_schedule;
use crate::mim::{
    classify_schedule, crafted_schedule, good_index, is_feasible, prefix_gen, random_schedule, run_mim, sync_schedule,
    Adversary, BuiltinAdversary, MimOutcome, MimSetup, Schedule, ScheduleClass, ScheduleFilter, ScheduleSpec, ValB,
};
use crate::protocols::{compute_constants, Decision, ProtocolConfig, RepetitionConstants, Slot, Variant};
use crate::sigma::{
    or_commit, or_prove, or_respond, special_sound_extract, verify, SigmaTranscript, Statement, Witness,
};

#[derive(Parser, Debug)]
#[command(name = "nmcom", version, about = "Non-malleable commitment experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Man-in-the-middle runs.
    MimRun(MimRunArgs),
    /// Extraction machines over generated prefixes.
    Extract(ExtractArgs),
    /// Completeness and special soundness of the sigma layer.
    SigmaTest(SigmaTestArgs),
    /// Exhaustive binding scan of the commitment scheme.
    BindAudit(BindAuditArgs),
    /// Classification of one interleaving.
    ScheduleClassify(ScheduleClassifyArgs),
    /// Repetition constants and their round-count inequalities.
    Constants(ConstantsArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ProtocolArgs {
    /// Built-in profile (test23, test-q20, modp1536) or a JSON file.
    #[arg(long, default_value = "test-q20")]
    pub group: String,
    /// one-sided, sync or async.
    #[arg(long, default_value = "one-sided")]
    pub protocol: String,
    /// Tag space size.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// lab or faithful; defaults to NMCOM_LAB_PROFILE.
    #[arg(long)]
    pub constants: Option<String>,
    #[arg(long, default_value_t = DEFAULT_EXTCOM_PAIRS)]
    pub pairs: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GameArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// honest[:m], planted[:m[:slot:i]], copier, abort, schedule:k[:m].
    #[arg(long, default_value = "honest:9")]
    pub adversary: String,
    #[arg(long, default_value_t = 1)]
    pub left_tag: usize,
    #[arg(long, default_value_t = 2)]
    pub right_tag: usize,
    /// Left committed message.
    #[arg(long, default_value_t = 5)]
    pub m: u64,
    /// sync, random, adversary, crafted:k or file:PATH.
    #[arg(long, default_value = "sync")]
    pub schedule: String,
    /// Wrap the adversary so it outputs ⊥ outside this schedule class.
    #[arg(long)]
    pub filter: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MimRunArgs {
    #[command(flatten)]
    pub game: GameArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// G[:i], K, K:i, SE, hybrid:G, hybrid:kp:i, hybrid:kpp:i, hybrid:kstar1, hybrid:kstarstar1.
    #[arg(long, default_value = "K")]
    pub machine: String,
    #[arg(long, default_value_t = 1)]
    pub i: usize,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 8)]
    pub lambda: u64,
    #[arg(long)]
    pub rewind_cap: Option<u64>,
    #[arg(long, default_value_t = 64)]
    pub wee_budget: usize,
    /// Allowed excess of the simulation-extractor failure rate over epsilon.
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SigmaTestArgs {
    #[arg(long, default_value = "test23")]
    pub group: String,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BindAuditArgs {
    #[arg(long, default_value = "test23")]
    pub group: String,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScheduleClassifyArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long, default_value = "sync")]
    pub schedule: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ConstantsArgs {
    #[arg(long, default_value_t = 3)]
    pub wipok_rounds: usize,
    #[arg(long, default_value_t = 3)]
    pub extcom_rounds: usize,
    /// Print the lab override instead.
    #[arg(long)]
    pub lab: bool,
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

/// A finished report: `ok` is the conjunction of its invariants.
#[derive(Clone, Debug)]
pub struct Report {
    pub body: Value,
    pub ok: bool,
    pub json_out: Option<PathBuf>,
}

impl Report {
    fn new(
        command: &str,
        config: Value,
        records: Value,
        aggregate: Value,
        invariants: Vec<(&str, bool)>,
        started: Instant,
    ) -> Report {
        let ok = invariants.iter().all(|(_, v)| *v);
        let inv: serde_json::Map<String, Value> =
            invariants.into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        Report {
            body: json!({
                "command": command,
                "config": config,
                "records": records,
                "aggregate": aggregate,
                "invariants": inv,
                "ok": ok,
                "wall_clock_ms": started.elapsed().as_millis() as u64,
            }),
            ok,
            json_out: None,
        }
    }

    fn with_out(mut self, p: &Option<PathBuf>) -> Report {
        self.json_out = p.clone();
        self
    }

    /// Report without the wall-clock field, for reproducibility checks.
    pub fn stable(&self) -> Value {
        let mut v = self.body.clone();
        if let Some(o) = v.as_object_mut() {
            o.remove("wall_clock_ms");
        }
        v
    }
}

pub fn resolve_group(name: &str) -> Result<Group, String> {
    if PROFILE_NAMES.contains(&name) {
        group_profile(name).map_err(|e| format!("group: {e}"))
    } else {
        group_from_file(std::path::Path::new(name)).map_err(|e| format!("group: {e}"))
    }
}

pub fn resolve_protocol(a: &ProtocolArgs) -> Result<(Group, ProtocolConfig), String> {
    let group = resolve_group(&a.group)?;
    let variant = Variant::parse(&a.protocol).ok_or_else(|| format!("protocol: unknown {}", a.protocol))?;
    let constants = match a.constants.as_deref() {
        None => RepetitionConstants::from_env(),
        Some("lab") => RepetitionConstants::lab(),
        Some("faithful") => RepetitionConstants::faithful(),
        Some(o) => return Err(format!("constants: unknown {o}")),
    };
    let cfg = ProtocolConfig::new(variant, a.n)
        .with_constants(constants)
        .with_pairs(a.pairs);
    Ok((group, cfg))
}

pub fn resolve_schedule(spec: &str, cfg: &ProtocolConfig) -> Result<ScheduleSpec, String> {
    if let Some(path) = spec.strip_prefix("file:") {
        return load_schedule(std::path::Path::new(path)).map(ScheduleSpec::Explicit);
    }
    if let Some(k) = spec.strip_prefix("crafted:") {
        let k: u8 = k.parse().map_err(|e| format!("schedule: {e}"))?;
        return crafted_schedule(cfg, k)
            .map(ScheduleSpec::Explicit)
            .ok_or_else(|| format!("schedule: no crafted Bad{k} for this protocol"));
    }
    match spec {
        "sync" => Ok(ScheduleSpec::Sync),
        "random" => Ok(ScheduleSpec::Random),
        "adversary" => Ok(ScheduleSpec::Adversary),
        o => Err(format!("schedule: unknown {o}")),
    }
}

fn resolve_game(a: &GameArgs) -> Result<(MimSetup, BuiltinAdversary, Option<ScheduleClass>), String> {
    let (params, cfg) = resolve_protocol(&a.protocol)?;
    cfg.check_tag(a.left_tag).map_err(|e| format!("left-tag: {e}"))?;
    cfg.check_tag(a.right_tag).map_err(|e| format!("right-tag: {e}"))?;
    let adv = BuiltinAdversary::parse(&a.adversary).map_err(|e| format!("adversary: {e}"))?;
    let filter = match &a.filter {
        Some(f) => Some(ScheduleClass::parse(f).ok_or_else(|| format!("filter: unknown class {f}"))?),
        None => None,
    };
    let schedule = resolve_schedule(&a.schedule, &cfg)?;
    Ok((
        MimSetup {
            m: params.scalar_u64(a.m),
            params,
            cfg,
            left_tag: a.left_tag,
            right_tag: a.right_tag,
            schedule,
            advice: Vec::new(),
        },
        adv,
        filter,
    ))
}

fn trial_rngs(seed: u64, trials: u64) -> Vec<(u64, Rng)> {
    let root = Rng::from_seed(seed);
    (0..trials).map(|k| (k, root.child("trial", k))).collect()
}

fn val_label(v: &ValB) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn mim_record(k: u64, cfg: &ProtocolConfig, o: &MimOutcome) -> Value {
    let classes: Vec<ScheduleClass> = classify_schedule(cfg, &o.trace).into_iter().collect();
    json!({
        "trial": k,
        "b": o.b,
        "val_b": val_label(&o.val_b),
        "oracle_val_b": val_label(&o.oracle_val_b),
        "out_m": o.out_m,
        "identity_ok": o.identity_ok,
        "invalid": o.invalid,
        "classes": classes,
    })
}

fn run_mim_trials<A: Adversary>(setup: &MimSetup, adv: A, seed: u64, trials: u64) -> Result<Vec<MimOutcome>, String> {
    trial_rngs(seed, trials)
        .par_iter()
        .map(|(_, rng)| run_mim(setup, adv.clone(), rng).map_err(|e| e.to_string()))
        .collect()
}

pub fn mim_run(a: &MimRunArgs) -> Result<Report, String> {
    let started = Instant::now();
    let g = &a.game;
    let (setup, adv, filter) = resolve_game(g)?;
    let outs = match filter {
        Some(c) => run_mim_trials(&setup, ScheduleFilter::new(adv, c), g.seed, g.trials)?,
        None => run_mim_trials(&setup, adv, g.seed, g.trials)?,
    };
    let n = outs.len() as u64;
    let count = |f: &dyn Fn(&MimOutcome) -> bool| outs.iter().filter(|o| f(o)).count() as u64;
    let accepted = count(&|o| o.b == Decision::Accept);
    let bot_tag = count(&|o| o.val_b == ValB::BotTag);
    let invalid = count(&|o| o.invalid.is_some());
    let non_bot_out = count(&|o| o.out_m.is_some());
    let identity_violations = count(&|o| !o.identity_ok);
    let tags_equal = g.left_tag == g.right_tag;
    let tag_guard = outs.iter().all(|o| (o.val_b == ValB::BotTag) == tags_equal);
    let rate = |k: u64| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let records: Vec<Value> = outs
        .iter()
        .enumerate()
        .map(|(k, o)| mim_record(k as u64, &setup.cfg, o))
        .collect();
    let aggregate = json!({
        "trials": n,
        "accept_rate": rate(accepted),
        "accept_ci95": wilson_interval(accepted, n, 0.05),
        "bot_tag_rate": rate(bot_tag),
        "non_bot_out_rate": rate(non_bot_out),
        "invalid_runs": invalid,
        "identity_violations": identity_violations,
    });
    Ok(Report::new(
        "mim-run",
        json!(g),
        json!(records),
        aggregate,
        vec![
            ("mim_oracle_identity", identity_violations == 0),
            ("tag_guard", tag_guard),
        ],
        started,
    )
    .with_out(&g.json_out))
}

pub fn extract(a: &ExtractArgs) -> Result<Report, String> {
    let started = Instant::now();
    let g = &a.game;
    let (setup, adv, _) = resolve_game(g)?;
    let mut params = ExtractionParams::new(a.epsilon, a.lambda, g.left_tag, g.right_tag).with_cap(a.rewind_cap);
    params.wee_budget = a.wee_budget;
    let config = json!({
        "game": g,
        "machine": a.machine,
        "i": a.i,
        "epsilon": a.epsilon,
        "epsilon_prime": params.epsilon_prime(),
        "lambda": a.lambda,
        "loop_count": params.loop_count(),
        "rewind_cap": a.rewind_cap,
        "wee_budget": a.wee_budget,
    });
    let rngs = trial_rngs(g.seed, g.trials);
    match a.machine.as_str() {
        "SE" | "se" => {
            let recs: Vec<Value> = rngs
                .par_iter()
                .map(|(k, rng)| -> Result<Value, String> {
                    let prefix = prefix_gen(&setup, adv.clone(), &rng.split("prefix")).map_err(|e| e.to_string())?;
                    let truth = prefix
                        .tau_tilde()
                        .and_then(|t| val_oracle(&setup.params, &t, None).ok().flatten());
                    let se = run_se(&prefix.se_input(), &params, &rng.split("machine")).map_err(|e| e.to_string())?;
                    // trials lost to WEE budget exhaustion are reported, not scored
                    let excluded = se.val.is_none() && se.exhausted_runs > 0;
                    let fail = !excluded && se.b == Decision::Accept && se.val != truth;
                    Ok(
                        json!({"trial": k, "b": se.b, "val": se.val, "val_tau_tilde": truth, "fail": fail,
                        "excluded": excluded, "rewinds": se.rewinds, "capped": se.capped,
                        "exhausted_runs": se.exhausted_runs}),
                    )
                })
                .collect::<Result<_, _>>()?;
            let excluded = recs.iter().filter(|r| r["excluded"] == json!(true)).count() as u64;
            let n = recs.len() as u64 - excluded;
            let fails = recs.iter().filter(|r| r["fail"] == json!(true)).count() as u64;
            let capped = recs.iter().any(|r| r["capped"] == json!(true));
            let rate = if n == 0 { 0.0 } else { fails as f64 / n as f64 };
            let bound = a.epsilon + a.tolerance;
            let aggregate = json!({"trials": n, "excluded_exhausted": excluded, "failure_rate": rate, "failure_ci95": wilson_interval(fails, n, 0.05),
                "bound": bound, "capped": capped});
            let inv = vec![("se_failure_within_bound", capped || rate <= bound)];
            Ok(Report::new("extract", config, json!(recs), aggregate, inv, started).with_out(&g.json_out))
        }
        "hybrid:G" | "hybrid:g" => {
            let recs: Vec<Value> = rngs
                .par_iter()
                .map(|(k, rng)| -> Result<Value, String> {
                    let real = run_mim(&setup, adv.clone(), rng).map_err(|e| e.to_string())?;
                    let hyb = run_hybrid_g(&setup, adv.clone(), &params, rng).map_err(|e| e.to_string())?;
                    Ok(
                        json!({"trial": k, "mim": {"out": real.out_m, "val": val_label(&real.val_b)},
                        "hybrid": {"out": hyb.out, "val": val_label(&hyb.val)},
                        "agree": real.out_m == hyb.out && real.val_b == hyb.val}),
                    )
                })
                .collect::<Result<_, _>>()?;
            let n = recs.len() as u64;
            let agree = recs.iter().filter(|r| r["agree"] == json!(true)).count() as u64;
            let aggregate = json!({"trials": n, "agreement_rate": if n == 0 { 0.0 } else { agree as f64 / n as f64 }});
            Ok(Report::new("extract", config, json!(recs), aggregate, vec![], started).with_out(&g.json_out))
        }
        m => {
            let machine = Machine::parse(m, a.i)?;
            let outs: Vec<MachineOutcome> = rngs
                .par_iter()
                .map(|(_, rng)| -> Result<MachineOutcome, String> {
                    let prefix = prefix_gen(&setup, adv.clone(), &rng.split("prefix")).map_err(|e| e.to_string())?;
                    machine
                        .run(&prefix.se_input(), &params, &rng.split("machine"))
                        .map_err(|e| e.to_string())
                })
                .collect::<Result<_, _>>()?;
            let report = summarize(&outs);
            let coincide: Vec<bool> = outs.iter().filter_map(|o| o.coincide()).collect();
            let mut aggregate = serde_json::to_value(&report).map_err(|e| e.to_string())?;
            aggregate["k_bound"] = json!(params.k_bound());
            aggregate["coincidence_rate"] = if coincide.is_empty() {
                Value::Null
            } else {
                json!(coincide.iter().filter(|c| **c).count() as f64 / coincide.len() as f64)
            };
            let inv = vec![("classification_sound", report.unsound == 0)];
            Ok(Report::new("extract", config, json!(outs), aggregate, inv, started).with_out(&g.json_out))
        }
    }
}

/// Random statement with a witness for one of its branches.
pub fn random_instance(params: &Group, rng: &mut Rng) -> (Statement, Witness) {
    let y_of = |x| params.f_eval(x);
    match rng.below(5) {
        0 => {
            let x = rng.scalar(params);
            (Statement::DLog { y: y_of(&x) }, Witness::DLog { x })
        }
        1 => {
            let h = params.f_eval(&rng.scalar(params));
            let (m, r) = (rng.scalar(params), rng.scalar(params));
            let com = commit(params, &h, &m, &r);
            (Statement::OpeningOf { h, com }, Witness::Opening { m, r })
        }
        2 => {
            let xs: Vec<_> = (0..3).map(|_| rng.scalar(params)).collect();
            let i = rng.below(3) as usize;
            (
                Statement::OneOfT {
                    ys: xs.iter().map(y_of).collect(),
                },
                Witness::Indexed {
                    i: i + 1,
                    x: xs[i].clone(),
                },
            )
        }
        3 => {
            let (v0, v1) = (rng.scalar(params), rng.scalar(params));
            let b = rng.below(2) as usize;
            let v = if b == 0 { v0.clone() } else { v1.clone() };
            (
                Statement::TrapOr {
                    v0: y_of(&v0),
                    v1: y_of(&v1),
                },
                Witness::Trap { b, v },
            )
        }
        _ => {
            let x = rng.scalar(params);
            let other = params.f_eval(&rng.scalar(params));
            let live = rng.below(2) as usize;
            let mut kids = vec![Statement::DLog { y: other.clone() }, Statement::DLog { y: other }];
            kids[live] = Statement::DLog { y: y_of(&x) };
            (Statement::OrList(kids), Witness::branch(live, Witness::DLog { x }))
        }
    }
}

pub fn sigma_test(a: &SigmaTestArgs) -> Result<Report, String> {
    let started = Instant::now();
    let params = resolve_group(&a.group)?;
    let res: Vec<(bool, bool)> = trial_rngs(a.seed, a.trials)
        .par_iter()
        .map(|(_, rng)| {
            let mut rng = rng.clone();
            let (stmt, wit) = random_instance(&params, &mut rng);
            let mut vr = rng.split("verifier");
            let complete = matches!(or_prove(&params, &stmt, &wit, &mut rng, &mut vr), Ok((_, true)));
            let sound = (|| {
                let (st, first) = or_commit(&params, &stmt, &wit, &mut rng).ok()?;
                let e1 = vr.scalar(&params);
                let mut e2 = vr.scalar(&params);
                while e2 == e1 {
                    e2 = vr.scalar(&params);
                }
                let t1 = SigmaTranscript {
                    first: first.clone(),
                    response: or_respond(&params, &st, &e1),
                    e: e1,
                };
                let t2 = SigmaTranscript {
                    first,
                    response: or_respond(&params, &st, &e2),
                    e: e2,
                };
                if !verify(&params, &stmt, &t1) {
                    return None;
                }
                special_sound_extract(&params, &stmt, &t1, &t2)
                    .ok()
                    .map(|w| stmt.satisfied_by(&params, &w))
            })()
            .unwrap_or(false);
            (complete, sound)
        })
        .collect();
    let n = res.len() as u64;
    let complete = res.iter().filter(|r| r.0).count() as u64;
    let sound = res.iter().filter(|r| r.1).count() as u64;
    let rate = |k: u64| if n == 0 { 1.0 } else { k as f64 / n as f64 };
    Ok(Report::new(
        "sigma-test",
        json!(a),
        Value::Null,
        json!({"trials": n, "completeness_rate": rate(complete), "special_soundness_rate": rate(sound)}),
        vec![("completeness", complete == n), ("special_soundness", sound == n)],
        started,
    )
    .with_out(&a.json_out))
}

/// Exhaustive scan: for every basis `h = g^s` and every `(m, r)`, counts
/// commitments hit by two different messages.
pub fn binding_scan(params: &Group) -> Result<(u64, u64), String> {
    let q = params
        .q_u64()
        .filter(|q| *q <= 1 << 12)
        .ok_or("group too large for an exhaustive scan")?;
    let mut violations = 0;
    let mut checked = 0;
    for s in 0..q {
        let h = params.f_eval(&params.scalar_u64(s));
        let mut seen: std::collections::HashMap<Commitment, u64> = std::collections::HashMap::new();
        for m in 0..q {
            for r in 0..q {
                let c = commit(params, &h, &params.scalar_u64(m), &params.scalar_u64(r));
                checked += 1;
                if let Some(prev) = seen.insert(c, m) {
                    if prev != m {
                        violations += 1;
                    }
                }
            }
        }
    }
    Ok((checked, violations))
}

/// First element of `Z_p^*` outside the order-`q` subgroup.
pub fn non_member(params: &Group) -> Option<GroupElement> {
    let p = params.p.to_u64()?;
    (2..p)
        .map(|v| GroupElement::from_raw(v.into()))
        .find(|e| !params.is_member(e))
}

pub fn bind_audit(a: &BindAuditArgs) -> Result<Report, String> {
    let started = Instant::now();
    let params = resolve_group(&a.group)?;
    let (checked, violations) = binding_scan(&params)?;
    let q = params.q_u64().unwrap_or(0);
    let h = params.f_eval(&params.scalar_u64(4 % q.max(1)));
    let tampered = non_member(&params).map(|bad| Commitment {
        u: bad,
        v: params.generator(),
    });
    let tamper_flagged = match &tampered {
        Some(c) => {
            !commitment_well_formed(&params, c)
                && (0..q).all(|m| {
                    (0..q).all(|r| {
                        !verify_open(
                            &params,
                            &h,
                            c,
                            &Opening {
                                m: params.scalar_u64(m),
                                r: params.scalar_u64(r),
                            },
                        )
                    })
                })
        }
        None => true,
    };
    Ok(Report::new(
        "bind-audit",
        json!(a),
        Value::Null,
        json!({"message_space": q, "commitments_checked": checked, "violations": violations,
            "tampered_not_openable": tamper_flagged}),
        vec![("binding", violations == 0), ("tampered_rejected", tamper_flagged)],
        started,
    )
    .with_out(&a.json_out))
}

pub fn schedule_classify(a: &ScheduleClassifyArgs) -> Result<Report, String> {
    let started = Instant::now();
    let (_, cfg) = resolve_protocol(&a.protocol)?;
    let s: Schedule = match resolve_schedule(&a.schedule, &cfg)? {
        ScheduleSpec::Sync | ScheduleSpec::Adversary => sync_schedule(&cfg),
        ScheduleSpec::Random => random_schedule(&cfg, &mut Rng::from_seed(a.seed)),
        ScheduleSpec::Explicit(s) => s,
    };
    let feasible = is_feasible(&cfg, &s);
    let classes: Vec<ScheduleClass> = classify_schedule(&cfg, &s).into_iter().collect();
    let gi = |slot| good_index(&cfg, &s, slot);
    Ok(Report::new(
        "schedule-classify",
        json!(a),
        Value::Null,
        json!({"length": s.len(), "feasible": feasible, "classes": classes,
            "good_index_a": gi(Slot::A), "good_index_b": gi(Slot::B)}),
        vec![("feasible", feasible)],
        started,
    )
    .with_out(&a.json_out))
}

pub fn constants(a: &ConstantsArgs) -> Result<Report, String> {
    let started = Instant::now();
    let c = if a.lab {
        RepetitionConstants::lab()
    } else {
        compute_constants(a.wipok_rounds, a.extcom_rounds)
    };
    let ineq: Vec<Value> = c
        .inequalities(a.wipok_rounds, a.extcom_rounds)
        .into_iter()
        .map(|(name, lhs, rhs, ok)| json!({"name": name, "lhs": lhs, "rhs": rhs, "holds": ok}))
        .collect();
    let all = ineq.iter().all(|v| v["holds"] == json!(true));
    let mut agg = json!({"constants": c.as_array(), "faithful": c.faithful,
        "total_rounds": c.total_rounds(a.wipok_rounds, a.extcom_rounds), "inequalities": ineq});
    if a.lab {
        let w = "lab constants violate the round-count inequalities; good indices may not exist";
        eprintln!("warning: {w}");
        agg["warning"] = json!(w);
    }
    Ok(Report::new(
        "constants",
        json!(a),
        Value::Null,
        agg,
        vec![("inequalities", a.lab || all)],
        started,
    )
    .with_out(&a.json_out))
}

pub fn run(cli: &Cli) -> Result<Report, String> {
    match &cli.command {
        Command::MimRun(a) => mim_run(a),
        Command::Extract(a) => extract(a),
        Command::SigmaTest(a) => sigma_test(a),
        Command::BindAudit(a) => bind_audit(a),
        Command::ScheduleClassify(a) => schedule_classify(a),
        Command::Constants(a) => constants(a),
    }
}

/// Prints and writes the report; the process exit status.
pub fn main_with(cli: &Cli) -> std::process::ExitCode {
    match run(cli) {
        Ok(r) => {
            let txt = serde_json::to_string_pretty(&r.body).expect("report serializes");
            if let Some(p) = &r.json_out {
                if let Err(e) = std::fs::write(p, &txt) {
                    eprintln!("error: writing {}: {e}", p.display());
                    return std::process::ExitCode::from(2);
                }
            }
            // a closed stdout (e.g. piped into `head`) is not an error of the run
            let _ = writeln!(std::io::stdout(), "{txt}");
            if r.ok {
                std::process::ExitCode::SUCCESS
            } else {
                std::process::ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(2)
        }
    }
}
