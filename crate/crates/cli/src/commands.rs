//! Subcommand implementations.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use rpo_core::adherence::{self, PairClass};
use rpo_core::corpus::judge::{self, HttpJudge, JudgeTransport, StubJudge};
use rpo_core::corpus::{self, io, GenConfig, GenError, IoError, KtoRecord, PairRecord};
use rpo_core::loss::LossConfig;
use rpo_core::metrics::{self, SessionRecord};
use rpo_core::pairs::{self, DpoMode, GapBucket, InstructionSamples, PreferencePair, Strategy};
use rpo_core::policy::{self, InitMode, ToyPolicy, TrainConfig};

use crate::manifest::{ManifestBuilder, RunManifest};
use crate::{AnalyzeArgs, CliError, EvalArgs, GenArgs, JudgeArg, Method, PairsArgs, TrainArgs};

pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const PROFILES_FILE: &str = "profiles.json";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const KTO_FILE: &str = "kto.jsonl";
pub const POLICY_FILE: &str = "policy.json";
pub const CURVE_FILE: &str = "curve.csv";
pub const REPORT_FILE: &str = "report.json";
pub const EFFICIENCY_FILE: &str = "efficiency.json";

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

/// Missing or unreadable inputs are usage errors; malformed content is a
/// data error.
fn read_records<T: DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {what} {}: {e}", path.display())))?;
    let records: Vec<T> = io::parse_jsonl(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
    if records.is_empty() {
        return Err(usage(format!("{} contains no {what}", path.display())));
    }
    Ok(records)
}

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| usage(format!("cannot create {}: {e}", out.display())))
}

fn write_jsonl<T: serde::Serialize>(path: PathBuf, records: &[T]) -> Result<PathBuf, CliError> {
    io::write_jsonl(&path, records).map_err(data)?;
    Ok(path)
}

fn write_json<T: serde::Serialize>(path: PathBuf, value: &T) -> Result<PathBuf, CliError> {
    io::write_json(&path, value).map_err(data)?;
    Ok(path)
}

fn samples_of(sessions: &[SessionRecord]) -> Result<Vec<InstructionSamples>, CliError> {
    let items = corpus::instruction_samples(sessions).map_err(data)?;
    if items.is_empty() {
        return Err(usage("sessions carry no turn instructions"));
    }
    Ok(items)
}

pub fn gen(args: &GenArgs) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| usage(format!("cannot read config {}: {e}", args.config.display())))?;
    let cfg: GenConfig =
        serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", args.config.display())))?;
    let corpus = corpus::generate_corpus(&cfg).map_err(|e| match e {
        GenError::InvalidConfig(_) | GenError::Unsatisfiable { .. } => usage(e),
        other => data(other),
    })?;
    prepare_out(&args.out)?;

    let manifest = ManifestBuilder::start("gen", json!({ "config_path": args.config, "gen_config": cfg }))
        .seed(cfg.seed)
        .input(&args.config);
    let turns: usize = corpus.sessions.iter().map(|s| s.turns.len()).sum();
    let terminated = corpus.sessions.iter().filter(|s| s.terminated).count();
    let outputs = vec![
        write_jsonl(args.out.join(SESSIONS_FILE), &corpus.sessions)?,
        write_json(args.out.join(PROFILES_FILE), &corpus.profiles)?,
    ];
    manifest.finish(
        &args.out,
        outputs,
        json!({ "sessions": corpus.sessions.len(), "turns": turns, "terminated_sessions": terminated }),
    )
}

fn histogram_json(pairs: &[PreferencePair]) -> Value {
    let h = pairs::gap_histogram(pairs);
    json!({ "Easy": h.easy, "Medium": h.medium, "Hard": h.hard })
}

pub fn pairs(args: &PairsArgs) -> Result<RunManifest, CliError> {
    let sessions: Vec<SessionRecord> = read_records(&args.sessions, "sessions")?;
    let items = samples_of(&sessions)?;
    prepare_out(&args.out)?;
    let mode: DpoMode = args.dpo_mode.into();
    let manifest = ManifestBuilder::start(
        "pairs",
        json!({ "sessions": args.sessions, "method": format!("{:?}", args.method).to_lowercase(), "dpo_mode": mode }),
    )
    .input(&args.sessions);

    match args.method {
        Method::Rpo | Method::Dpo => {
            let per_turn: Vec<Vec<PreferencePair>> = items
                .par_iter()
                .map(|it| match args.method {
                    Method::Rpo => pairs::build_rpo_pairs(&it.instruction, &it.context, &it.responses),
                    _ => pairs::build_dpo_pairs(&it.instruction, &it.context, &it.responses, mode),
                })
                .collect::<Result<_, _>>()
                .map_err(data)?;
            let mut tied = 0;
            for (it, ps) in items.iter().zip(&per_turn) {
                if args.method == Method::Dpo && ps.is_empty() && it.responses.len() >= 2 {
                    log::warn!("{}: all sampled responses tie on total score, no DPO pair", it.context);
                    tied += 1;
                }
            }
            let all: Vec<PreferencePair> = per_turn.into_iter().flatten().collect();
            let records: Vec<PairRecord> = all.iter().map(PairRecord::from_pair).collect();
            let out = write_jsonl(args.out.join(PAIRS_FILE), &records)?;
            manifest.finish(
                &args.out,
                vec![out],
                json!({ "turns": items.len(), "pairs": all.len(), "tied_turns": tied, "gap_buckets": histogram_json(&all) }),
            )
        }
        Method::Kto => {
            let outcomes: Vec<_> = items
                .par_iter()
                .map(|it| pairs::build_kto_examples(&it.instruction, &it.context, &it.responses))
                .collect::<Result<_, _>>()
                .map_err(data)?;
            let records: Vec<KtoRecord> = outcomes
                .iter()
                .flat_map(|o| &o.examples)
                .map(KtoRecord::from_example)
                .collect();
            let skipped: Vec<_> = outcomes.iter().flat_map(|o| o.skipped.iter().cloned()).collect();
            let out = write_jsonl(args.out.join(KTO_FILE), &records)?;
            let positives = records.iter().filter(|r| r.label).count();
            manifest.finish(
                &args.out,
                vec![out],
                json!({
                    "turns": items.len(),
                    "positives": positives,
                    "negatives": records.len() - positives,
                    "skipped_degenerate": skipped,
                }),
            )
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn train(args: &TrainArgs) -> Result<RunManifest, CliError> {
    let records: Vec<PairRecord> = read_records(&args.pairs, "pairs")?;
    let pairs: Vec<PreferencePair> = records
        .iter()
        .map(PairRecord::to_pair)
        .collect::<Result<_, IoError>>()
        .map_err(data)?;
    let loss_config = LossConfig::new(args.beta, args.gamma).map_err(usage)?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        steps: args.steps,
        batch_size: args.batch_size,
        seed: args.seed,
        loss: args.loss.into(),
        loss_config,
    };
    cfg.validate().map_err(usage)?;
    let init: InitMode = args.init.into();

    let mut initial = ToyPolicy::from_pairs(&pairs).map_err(data)?;
    let mut manifest = ManifestBuilder::start(
        "train",
        json!({
            "pairs": args.pairs,
            "train_config": cfg,
            "init": init,
            "sessions": args.sessions,
            "sft_smoothing": args.sft_smoothing,
            "grad_check": args.grad_check,
        }),
    )
    .seed(args.seed)
    .input(&args.pairs);
    if init == InitMode::Sft {
        let path = args
            .sessions
            .as_ref()
            .ok_or_else(|| usage("--init sft needs --sessions"))?;
        let sessions: Vec<SessionRecord> = read_records(path, "sessions")?;
        let mut demos: HashMap<String, Vec<String>> = HashMap::new();
        for s in &sessions {
            for t in &s.turns {
                demos
                    .entry(io::turn_context(&s.session_id, t.turn_index))
                    .or_default()
                    .push(t.response_text.clone());
            }
        }
        initial.fit_demonstrations(&demos, args.sft_smoothing).map_err(usage)?;
        manifest = manifest.input(path);
    }
    let mapped = initial.map_pairs(&pairs).map_err(data)?;
    prepare_out(&args.out)?;

    let grad_error = if args.grad_check {
        Some(policy::grad_check(&initial, &initial, &mapped, &cfg).map_err(data)?)
    } else {
        None
    };
    let (trained, curve) = policy::train(&initial, &initial, &mapped, &cfg).map_err(data)?;

    let mut csv = String::from("step,loss,margin\n");
    for p in &curve {
        csv.push_str(&format!("{},{},{}\n", p.step, p.loss, fmt_opt(p.margin)));
    }
    let curve_path = args.out.join(CURVE_FILE);
    fs::write(&curve_path, csv).map_err(|e| data(format!("{}: {e}", curve_path.display())))?;
    let outputs = vec![write_json(args.out.join(POLICY_FILE), &trained)?, curve_path];
    let final_margin = policy::evaluate_margin(&trained, &initial, &mapped, cfg.loss_config.beta).map_err(data)?;
    manifest.finish(
        &args.out,
        outputs,
        json!({
            "pairs": pairs.len(),
            "contexts": trained.contexts().len(),
            "parameters": trained.num_params(),
            "final_batch_loss": curve.last().map(|p| p.loss),
            "final_train_margin": final_margin,
            "grad_check_max_rel_error": grad_error,
        }),
    )
}

fn transport(kind: JudgeArg, sessions: &[SessionRecord]) -> Result<Option<Box<dyn JudgeTransport>>, CliError> {
    Ok(match kind {
        JudgeArg::Rules => None,
        JudgeArg::Stub => {
            let sets = sessions
                .iter()
                .flat_map(|s| &s.turns)
                .filter_map(|t| t.constraints.as_ref());
            Some(Box::new(StubJudge::for_sets(sets)))
        }
        JudgeArg::Http => Some(Box::new(HttpJudge::from_env().map_err(usage)?)),
    })
}

pub fn eval(args: &EvalArgs) -> Result<RunManifest, CliError> {
    let mut sessions: Vec<SessionRecord> = read_records(&args.sessions, "sessions")?;
    let mut manifest = ManifestBuilder::start(
        "eval",
        json!({ "sessions": args.sessions, "policy": args.policy, "judge": format!("{:?}", args.judge).to_lowercase() }),
    )
    .input(&args.sessions);

    let mut coverage = None;
    if let Some(path) = &args.policy {
        let text =
            fs::read_to_string(path).map_err(|e| usage(format!("cannot read policy {}: {e}", path.display())))?;
        let pol: ToyPolicy = serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
        manifest = manifest.input(path);
        let (mut hit, mut total) = (0usize, 0usize);
        for s in &mut sessions {
            for t in &mut s.turns {
                let Some(cs) = &t.constraints else { continue };
                total += 1;
                let key = format!("{}|{}", io::turn_context(&s.session_id, t.turn_index), cs.content_key());
                if let Ok(row) = pol.context_index(&key) {
                    hit += 1;
                    t.response_text = pol.candidates(row)[pol.argmax(row)].clone();
                    t.adherence = adherence::evaluate(cs, &t.response_text);
                }
            }
        }
        if total == 0 {
            return Err(usage("sessions carry no turn instructions to evaluate a policy on"));
        }
        coverage = Some(json!({ "turns": total, "policy_rows": hit }));
    }

    if let Some(judge) = transport(args.judge, &sessions)? {
        for s in &mut sessions {
            for t in &mut s.turns {
                let cs = t.constraints.as_ref().ok_or_else(|| {
                    data(format!(
                        "{} turn {} has no instruction to judge",
                        s.session_id, t.turn_index
                    ))
                })?;
                let query = t.query.clone().unwrap_or_default();
                t.adherence = judge::judge(judge.as_ref(), &query, &t.response_text, cs).map_err(data)?;
            }
        }
    }

    let report = metrics::report(&sessions).map_err(data)?;
    prepare_out(&args.out)?;
    let out = write_json(args.out.join(REPORT_FILE), &report)?;
    manifest.finish(
        &args.out,
        vec![out],
        json!({ "csr": report.csr, "isr": report.isr, "ssr": report.ssr, "policy_coverage": coverage }),
    )
}

fn class_name(c: PairClass) -> &'static str {
    match c {
        PairClass::EqualIncomparable => "EqualIncomparable",
        PairClass::HigherIncomparable => "HigherIncomparable",
        PairClass::DominantImperfect => "DominantImperfect",
        PairClass::DominantPerfect => "DominantPerfect",
    }
}

pub fn analyze(args: &AnalyzeArgs) -> Result<RunManifest, CliError> {
    let sessions: Vec<SessionRecord> = read_records(&args.sessions, "sessions")?;
    let items = samples_of(&sessions)?;
    let strategy: Strategy = args.strategy.into();
    let report = pairs::sample_efficiency_report(&items, strategy).map_err(data)?;

    // Raw comparisons of differing responses, by gap bucket and pair class.
    let mut buckets: BTreeMap<&str, usize> = [("Easy", 0), ("Medium", 0), ("Hard", 0)].into_iter().collect();
    let mut classes: BTreeMap<&str, usize> = BTreeMap::new();
    for it in &items {
        let rs = &it.responses;
        for i in 0..rs.len() {
            for j in (i + 1)..rs.len() {
                let g = adherence::gap(&rs[i].adherence, &rs[j].adherence).map_err(data)?;
                let Some(bucket) = GapBucket::from_gap(g) else { continue };
                let name = match bucket {
                    GapBucket::Easy => "Easy",
                    GapBucket::Medium => "Medium",
                    GapBucket::Hard => "Hard",
                };
                *buckets.entry(name).or_default() += 1;
                let class = adherence::classify_pair(&rs[i].adherence, &rs[j].adherence).map_err(data)?;
                *classes.entry(class_name(class)).or_default() += 1;
            }
        }
    }

    prepare_out(&args.out)?;
    let body = json!({ "efficiency": report, "gap_buckets": buckets, "pair_classes": classes });
    let out = write_json(args.out.join(EFFICIENCY_FILE), &body)?;
    ManifestBuilder::start("analyze", json!({ "sessions": args.sessions, "strategy": strategy }))
        .input(&args.sessions)
        .finish(&args.out, vec![out], body)
}
