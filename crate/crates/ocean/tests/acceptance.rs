//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use approx::abs_diff_eq;
use ocean::cli;
use ocean::experiments::{evaluate_cell, reliability_run, run_cell, Harness, PredictionRecord};
use ocean::gateway::{BackendConfig, Gateway};
use ocean::prefs::{collect_pairs, export, read_jsonl, verify_pairs, DpoLine, SftLine, TrainerMeta};
use ocean::synth::{simulate_corpus, SynthSpec};
use ocean_core::extraction::{parse_choice, rejection_rate, ExtractionRules, ParsedChoice};
use ocean_core::inventory::{Inventory, LikertChoice, ResponseSheet, ScoringPolicy};
use ocean_core::metrics::{assign_stars, cronbach_alpha, iqr_outliers, pearson, weighted_kappa, KappaWeighting, Stars};
use ocean_core::preference::SftExample;
use ocean_core::prompting::{Method, PromptCondition, Role};
use ocean_core::simulator::{render_answer, DigitWidth, Phrasing, SimProfile};
use ocean_core::traits::Domain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

// Tolerances.
const SCORE_TOL: f64 = 1e-12;
const SCORE_BUDGET_SECS: f64 = 5.0;
const PEARSON_R_TOL: f64 = 1e-10;
const PEARSON_P_TOL: f64 = 1e-8;
const FIXTURE_TOL: f64 = 1e-10;
const RECOVERY_MIN_PCC: f64 = 0.85;
const EXACT_PCC_TOL: f64 = 1e-12;
const RECOVERY_BUDGET_SECS: f64 = 60.0;
const TREND_TOL: f64 = 0.02;
const REFUSAL_TARGET: f64 = 0.281;
const REFUSAL_TOL: f64 = 0.02;
const MIN_REFUSAL_ITEMS: usize = 5000;
/// Mean linear kappa over 10 tries at noise 0.5 on the 40-session, seed-11 corpus.
const NOISY_KAPPA_AVG: f64 = 0.474222329683;
const NOISY_KAPPA_TOL: f64 = 1e-9;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn inv() -> Inventory {
    Inventory::bfi2().expect("bundled key")
}

/// Reverse-keyed BFI-2 items; domains cycle E, A, C, N, O by item number.
const REVERSED: [u8; 30] =
    [3, 4, 5, 8, 9, 11, 12, 16, 17, 22, 23, 24, 25, 26, 28, 29, 30, 31, 36, 37, 42, 44, 45, 47, 48, 49, 50, 51, 55, 58];
const CYCLE: [Domain; 5] = [Domain::Extraversion, Domain::Agreeableness, Domain::Conscientiousness, Domain::NegativeEmotionality, Domain::OpenMindedness];

fn criterion_1() -> Outcome {
    let inventory = inv();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let values: Vec<u8> = (0..60).map(|_| rng.random_range(1..=5)).collect();
        let sheet = ResponseSheet::from_values(values.iter().enumerate().map(|(i, v)| (i as u8 + 1, *v))).unwrap();
        let scores = inventory.score_responses(&sheet, ScoringPolicy::Strict).map_err(|e| e.to_string())?;
        let mut sums = [0u32; 5];
        for (i, v) in values.iter().enumerate() {
            let n = i as u8 + 1;
            let keyed = if REVERSED.contains(&n) { 6 - v } else { *v };
            sums[CYCLE[i % 5].index()] += u32::from(keyed);
        }
        for d in Domain::ALL {
            worst = worst.max((scores.get(d) - f64::from(sums[d.index()]) / 12.0).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= SCORE_TOL, format!("max deviation {worst:e}"))?;
    check(secs < SCORE_BUDGET_SECS, format!("took {secs:.2}s"))?;
    Ok(format!("1000 sheets, max deviation {worst:e}, {secs:.3}s"))
}

#[derive(Deserialize)]
struct PearsonCase {
    x: Vec<f64>,
    y: Vec<f64>,
    r: f64,
    p: f64,
}

#[derive(Deserialize)]
struct AlphaCase {
    matrix: Vec<Vec<f64>>,
    alpha: f64,
}

#[derive(Deserialize)]
struct KappaCase {
    a: Vec<u8>,
    b: Vec<u8>,
    kappa: f64,
}

#[derive(Deserialize)]
struct StatsOracle {
    pearson: Vec<PearsonCase>,
    alpha: AlphaCase,
    kappa_linear: Vec<KappaCase>,
}

fn criterion_2() -> Outcome {
    let text = include_str!("fixtures/stats_oracle.json");
    let oracle: StatsOracle = serde_json::from_str(text).map_err(|e| e.to_string())?;
    check(oracle.pearson.len() >= 200, "fewer than 200 pearson cases")?;
    let (mut dr, mut dp) = (0.0f64, 0.0f64);
    for (i, c) in oracle.pearson.iter().enumerate() {
        let got = pearson(&c.x, &c.y).map_err(|e| format!("case {i}: {e}"))?;
        dr = dr.max((got.r - c.r).abs());
        dp = dp.max((got.p_value - c.p).abs());
    }
    check(dr <= PEARSON_R_TOL, format!("pearson r deviation {dr:e}"))?;
    check(dp <= PEARSON_P_TOL, format!("pearson p deviation {dp:e}"))?;

    let alpha = cronbach_alpha(&oracle.alpha.matrix).map_err(|e| e.to_string())?;
    check(abs_diff_eq!(alpha, oracle.alpha.alpha, epsilon = FIXTURE_TOL), format!("alpha {alpha} vs {}", oracle.alpha.alpha))?;
    let dup: Vec<Vec<f64>> = [1.0, 3.0, 2.0, 5.0, 4.0].iter().map(|v| vec![*v, *v]).collect();
    check(cronbach_alpha(&dup).map_err(|e| e.to_string())? == 1.0, "duplicate columns alpha != 1")?;
    check(cronbach_alpha(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err(), "constant totals accepted")?;

    for c in &oracle.kappa_linear {
        let k = weighted_kappa(&c.a, &c.b, KappaWeighting::Linear).map_err(|e| e.to_string())?;
        check(abs_diff_eq!(k, c.kappa, epsilon = FIXTURE_TOL), format!("kappa {k} vs {}", c.kappa))?;
    }
    check(weighted_kappa(&[3; 6], &[3; 6], KappaWeighting::Linear).unwrap() == 1.0, "constant-equal kappa != 1")?;

    let a = iqr_outliers(&[1.0, 2.0, 3.0, 4.0, 100.0]).map_err(|e| e.to_string())?;
    check((a.q1, a.q3, a.upper_fence, a.outlier_indices.clone()) == (2.0, 4.0, 7.0, vec![4]), format!("{a:?}"))?;
    let b = iqr_outliers(&[1.0, 2.0, 3.0, 4.0]).map_err(|e| e.to_string())?;
    check((b.q1, b.q3, b.lower_fence, b.upper_fence) == (1.75, 3.25, -0.5, 5.5) && b.outlier_indices.is_empty(), format!("{b:?}"))?;
    let c = iqr_outliers(&[5.0; 4]).map_err(|e| e.to_string())?;
    check(c.iqr == 0.0 && c.lower_fence == 5.0 && c.upper_fence == 5.0 && c.outlier_indices.is_empty(), format!("{c:?}"))?;
    Ok(format!(
        "{} pearson cases (max dr {dr:.1e}, dp {dp:.1e}); alpha, {} kappa and 3 IQR fixtures exact",
        oracle.pearson.len(),
        oracle.kappa_linear.len()
    ))
}

fn criterion_3() -> Outcome {
    let cases = [(0.0005, Stars::Three), (0.005, Stars::Two), (0.02, Stars::One), (0.05, Stars::None), (0.2, Stars::None)];
    for (p, want) in cases {
        check(assign_stars(p) == want, format!("p={p} gave {:?}", assign_stars(p)))?;
    }
    Ok("0.0005/0.005/0.02/0.05/0.2 -> ***/**/*/none/none".into())
}

const REFUSALS: [&str; 12] = [
    "As an AI model, I have no personality",
    "As an AI language model, I cannot answer questions about my own feelings.",
    "I am an AI and do not have a personality to rate.",
    "I'm an AI, so I can't answer this honestly.",
    "I'm sorry, but I am unable to answer personal questions.",
    "I don't have a personality, so none of the options apply.",
    "I cannot answer this question.",
    "As an AI, I do not have personal experiences. Option 3 would be a guess.",
    "作为一个AI，我没有个性。",
    "作为人工智能，我无法回答这个问题。",
    "我没有性格，无法选择。",
    "AS AN AI MODEL I HAVE NO PERSONALITY.",
];

fn criterion_4() -> Outcome {
    let rules = ExtractionRules::default();
    let mut n = 0;
    for choice in LikertChoice::all() {
        for phrasing in Phrasing::ALL {
            for width in DigitWidth::ALL {
                let text = render_answer(choice, phrasing, width);
                check(parse_choice(&text, &rules) == ParsedChoice::Choice(choice), format!("{text:?} misparsed"))?;
                n += 1;
            }
        }
    }
    for t in REFUSALS {
        check(parse_choice(t, &rules) == ParsedChoice::Refusal, format!("{t:?} not a refusal"))?;
    }
    Ok(format!("{n} renderings recovered, {} refusal texts classified", REFUSALS.len()))
}

fn arg(p: &Path) -> String {
    p.to_str().expect("utf-8 path").to_string()
}

fn read_records(path: &Path) -> Result<Vec<PredictionRecord>, String> {
    read_jsonl(&fs::read_to_string(path).map_err(|e| e.to_string())?)
}

const C5_STEM: &str = "simulator__roleplay_and_questionnaire.client.g1.00";

fn predict(corpus: &Path, out: &Path, cache: &Path, noise: &str, refusal: &str) -> Result<(), String> {
    let code = cli::run([
        "ocean".to_string(),
        "predict".into(),
        "--corpus".into(),
        arg(corpus),
        "--out".into(),
        arg(out),
        "--cache-dir".into(),
        arg(cache),
        "--seed".into(),
        "7".into(),
        "--noise-sd".into(),
        noise.into(),
        "--refusal-rate".into(),
        refusal.into(),
        "--score-policy".into(),
        "prorate".into(),
        "--method".into(),
        "roleplay_and_questionnaire".into(),
        "--role".into(),
        "client".into(),
    ]);
    check(code == 0, format!("predict exited {code}"))
}

fn criterion_5(work: &Path) -> Outcome {
    let start = Instant::now();
    let corpus = work.join("c5.jsonl");
    let code = cli::run(["ocean", "simulate-corpus", "--n", "80", "--seed", "7", "--out", &arg(&corpus)]);
    check(code == 0, format!("simulate-corpus exited {code}"))?;
    let sessions = ocean::corpus_io::load_sessions(&corpus, &inv()).map_err(|e| e.to_string())?;

    predict(&corpus, &work.join("c5"), &work.join("cache"), "0.4", "0.02")?;
    let records = read_records(&work.join("c5/records").join(format!("{C5_STEM}.jsonl")))?;
    let row = evaluate_cell(&records, &sessions).map_err(|e| e.to_string())?;
    let mut rs = Vec::new();
    for d in &row.dimensions {
        let c = d.correlation.ok_or("dimension without correlation")?;
        check(c.r >= RECOVERY_MIN_PCC && c.stars == Stars::Three, format!("r={:.3} stars={:?}", c.r, c.stars))?;
        rs.push(format!("{:.3}", c.r));
    }

    predict(&corpus, &work.join("c5clean"), &work.join("cache_clean"), "0", "0")?;
    let clean = read_records(&work.join("c5clean/records").join(format!("{C5_STEM}.jsonl")))?;
    let clean_row = evaluate_cell(&clean, &sessions).map_err(|e| e.to_string())?;
    for d in &clean_row.dimensions {
        let r = d.correlation.ok_or("dimension without correlation")?.r;
        check((r - 1.0).abs() <= EXACT_PCC_TOL, format!("noiseless r={r}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < RECOVERY_BUDGET_SECS, format!("took {secs:.1}s"))?;
    Ok(format!("PCC [{}] all ***, n={}; noiseless PCC 1.0; {secs:.1}s", rs.join(", "), row.n_scored))
}

fn criterion_6() -> Outcome {
    let inventory = inv();
    let harness = Harness::new(ScoringPolicy::prorate());
    let grans = [0.1, 0.3, 0.6, 1.0];
    let mut means = [0.0; 4];
    for seed in 0..20u64 {
        let sessions = simulate_corpus(&SynthSpec::new(40, 1000 + seed), &inventory);
        let profile = SimProfile { length_noise: true, ..SimProfile::new(1.0, 0.0, seed) };
        for (gi, g) in grans.iter().enumerate() {
            let cond = PromptCondition::new(Method::RoleplayAndQuestionnaire, Role::Client, *g);
            let gw = Gateway::new(BackendConfig::simulator("sim", profile)).map_err(|e| e.to_string())?;
            let run = run_cell(&harness, &sessions, &cond, &gw).map_err(|e| e.to_string())?;
            let row = evaluate_cell(&run.records, &sessions).map_err(|e| e.to_string())?;
            means[gi] += row.avg_r.ok_or("no average r")? / 20.0;
        }
    }
    let shown = means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(" -> ");
    check(means[3] > means[0], format!("1.0 not above 0.1: {shown}"))?;
    check(means.windows(2).all(|w| w[1] >= w[0] - TREND_TOL), format!("not monotone: {shown}"))?;
    Ok(format!("mean avg-PCC over 20 seeds at 0.1/0.3/0.6/1.0: {shown}"))
}

fn criterion_7() -> Outcome {
    let inventory = inv();
    let harness = Harness::new(ScoringPolicy::prorate());
    let sessions = simulate_corpus(&SynthSpec::new(100, 5), &inventory);
    let cond = PromptCondition::new(Method::QuestionnaireOnly, Role::NoRole, 1.0);
    let gw = Gateway::new(BackendConfig::simulator("sim", SimProfile::new(0.3, REFUSAL_TARGET, 5))).map_err(|e| e.to_string())?;
    let run = run_cell(&harness, &sessions, &cond, &gw).map_err(|e| e.to_string())?;
    let n = run.item_responses.len();
    check(n >= MIN_REFUSAL_ITEMS, format!("only {n} items"))?;
    let rate = rejection_rate(run.item_responses.iter().map(|r| &r.parsed)).map_err(|e| e.to_string())?;
    let counted: usize = run.records.iter().map(|r| r.refusal_count).sum();
    check((counted as f64 / n as f64 - rate).abs() < 1e-12, "record refusal counts disagree")?;
    check((rate - REFUSAL_TARGET).abs() <= REFUSAL_TOL, format!("rate {rate:.4}"))?;
    Ok(format!("rejection rate {rate:.4} over {n} items"))
}

fn criterion_8() -> Outcome {
    let inventory = inv();
    let harness = Harness::new(ScoringPolicy::prorate());
    let sessions = simulate_corpus(&SynthSpec::new(40, 11), &inventory);
    let cond = PromptCondition::new(Method::RoleplayAndQuestionnaire, Role::Client, 1.0);

    let det = reliability_run(&harness, &sessions, &cond, &BackendConfig::simulator("sim", SimProfile::new(0.0, 0.0, 3)), 2)
        .map_err(|e| e.to_string())?;
    check(det.report.kappa_per_domain.iter().all(|k| *k == 1.0) && det.report.kappa_avg == 1.0, format!("{:?}", det.report))?;
    check(det.pcc.std.iter().all(|s| *s == 0.0), format!("std row {:?}", det.pcc.std))?;

    let noisy = reliability_run(&harness, &sessions, &cond, &BackendConfig::simulator("sim", SimProfile::new(0.5, 0.0, 3)), 10)
        .map_err(|e| e.to_string())?;
    check(noisy.pcc.rows.len() == 10, format!("{} rows", noisy.pcc.rows.len()))?;
    check(noisy.report.kappa_per_domain.iter().all(|k| *k < 1.0), "noisy kappa reached 1")?;
    check(noisy.pcc.std.iter().all(|s| *s > 0.0), "noisy std row has zeros")?;
    let md = ocean::experiments::try_table_markdown(&noisy.pcc);
    check(md.lines().count() == 2 + 10 + 2 && md.contains("| Mean |") && md.contains("| Std |"), "table layout")?;
    let k = noisy.report.kappa_avg;
    check((k - NOISY_KAPPA_AVG).abs() <= NOISY_KAPPA_TOL, format!("noisy kappa avg {k:.4} drifted from {NOISY_KAPPA_AVG}: {k:.12}"))?;
    Ok(format!("deterministic kappas 1.0, std 0; 10 noisy tries, kappa avg {k:.4}, alpha {:.3}", noisy.report.cronbach_alpha))
}

fn criterion_9(work: &Path) -> Outcome {
    let inventory = inv();
    let harness = Harness::new(ScoringPolicy::prorate());
    let sessions = simulate_corpus(&SynthSpec::new(30, 21), &inventory);
    let cond = PromptCondition::new(Method::RoleplayAndQuestionnaire, Role::Client, 1.0);
    let gateways = [
        Gateway::new(BackendConfig::simulator("accurate", SimProfile::new(0.1, 0.0, 1))).map_err(|e| e.to_string())?,
        Gateway::new(BackendConfig::simulator("noisy", SimProfile::new(1.2, 0.15, 2))).map_err(|e| e.to_string())?,
    ];
    let built = collect_pairs(&harness, &sessions, &cond, &gateways).map_err(|e| e.to_string())?;
    check(!built.pairs.is_empty(), "no pairs")?;
    let sft: Vec<SftExample> = built.pairs.iter().map(SftExample::from_pair).collect();
    let out = work.join("prefs");
    let files = export(&built.pairs, &sft, &TrainerMeta::default(), &out, &sessions, &inventory, &harness.rules)
        .map_err(|e| e.to_string())?;
    verify_pairs(&built.pairs, &sessions, &inventory, &harness.rules).map_err(|e| e.to_string())?;

    let dpo_text = fs::read_to_string(&files.dpo).map_err(|e| e.to_string())?;
    let dpo: Vec<DpoLine> = read_jsonl(&dpo_text)?;
    let re: String = dpo.iter().map(|l| serde_json::to_string(l).unwrap() + "\n").collect();
    check(re == dpo_text, "dpo.jsonl does not round-trip")?;
    let sft_text = fs::read_to_string(&files.sft).map_err(|e| e.to_string())?;
    let sft_lines: Vec<SftLine> = read_jsonl(&sft_text)?;
    let re: String = sft_lines.iter().map(|l| serde_json::to_string(l).unwrap() + "\n").collect();
    check(re == sft_text, "sft.jsonl does not round-trip")?;

    // Errors re-derived from the exported raw text alone.
    let by_id: BTreeMap<&str, _> = sessions.iter().map(|s| (s.session_id.as_str(), s)).collect();
    for (line, pair) in dpo.iter().zip(&built.pairs) {
        let s = by_id[pair.session_id.as_str()];
        let truth = ocean_core::preference::true_choice(pair.item_index, s, &inventory).map_err(|e| e.to_string())?;
        let ce = ocean_core::preference::choice_error(parse_choice(&line.chosen, &harness.rules), truth);
        let re = ocean_core::preference::choice_error(parse_choice(&line.rejected, &harness.rules), truth);
        check(ce <= re, format!("{} item {}: {ce:?} > {re:?}", pair.session_id, pair.item_index))?;
    }

    let meta: toml::Table = toml::from_str(&fs::read_to_string(&files.meta).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check(meta.get("seed").and_then(|v| v.as_integer()) == Some(42), "meta seed")?;
    check(meta.get("learning_rate").and_then(|v| v.as_float()) == Some(1e-6), "meta learning rate")?;
    for key in ["optimizer", "train_epochs", "per_device_train_batch_size", "gradient_accumulation_steps", "warmup_ratio", "lr_scheduler_type", "precision", "base_model", "gpus"] {
        check(meta.contains_key(key), format!("meta lacks {key}"))?;
    }
    Ok(format!("{} pairs verified, dpo/sft round-trip byte-identical, meta seed 42 lr 1e-6", dpo.len()))
}

fn tree_bytes(root: &Path, sub: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(root.join(sub)).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn criterion_10(work: &Path) -> Outcome {
    let corpus = work.join("c5.jsonl");
    let first = work.join("c5");
    let again = work.join("c5again");
    predict(&corpus, &again, &work.join("cache"), "0.4", "0.02")?;
    for sub in ["records", "tables"] {
        let a = tree_bytes(&first, sub)?;
        let b = tree_bytes(&again, sub)?;
        check(!a.is_empty() && a == b, format!("{sub}/ differs between runs"))?;
    }
    // Second run through the library to count backend calls directly.
    let sessions = ocean::corpus_io::load_sessions(&corpus, &inv()).map_err(|e| e.to_string())?;
    let mut cfg = BackendConfig::simulator("simulator", SimProfile::new(0.4, 0.02, 7));
    cfg.cache_dir = Some(work.join("cache"));
    let gw = Gateway::new(cfg).map_err(|e| e.to_string())?;
    let cond = PromptCondition::new(Method::RoleplayAndQuestionnaire, Role::Client, 1.0);
    let run = run_cell(&Harness::new(ScoringPolicy::prorate()), &sessions, &cond, &gw).map_err(|e| e.to_string())?;
    let calls = gw.stats().backend_calls();
    check(calls == 0, format!("{calls} backend calls on the repeat"))?;
    let stored = read_records(&first.join("records").join(format!("{C5_STEM}.jsonl")))?;
    if let Some((a, b)) = run.records.iter().zip(&stored).find(|(a, b)| a != b) {
        return Err(format!("repeat records differ: {a:?} vs {b:?}"));
    }
    check(run.records.len() == stored.len(), "repeat record count differs")?;

    let rerun = work.join("c5rerun");
    let code = cli::run(["ocean", "rerun", "--manifest", &arg(&first.join(cli::MANIFEST_FILE)), "--out", &arg(&rerun)]);
    check(code == 0, format!("rerun exited {code}"))?;
    for sub in ["records", "tables", "plots"] {
        check(tree_bytes(&first, sub)? == tree_bytes(&rerun, sub)?, format!("rerun {sub}/ differs"))?;
    }
    Ok(format!("records/ and tables/ byte-identical, {} cache hits, 0 backend calls", gw.stats().cache_hits()))
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let w = work.path();
    let criteria: Vec<Criterion> = vec![
        ("scoring oracle", Box::new(criterion_1)),
        ("statistics oracles", Box::new(criterion_2)),
        ("star notation", Box::new(criterion_3)),
        ("parser round-trip", Box::new(criterion_4)),
        ("end-to-end recovery", Box::new(|| criterion_5(w))),
        ("granularity direction", Box::new(criterion_6)),
        ("refusal accounting", Box::new(criterion_7)),
        ("reliability run", Box::new(criterion_8)),
        ("preference export", Box::new(|| criterion_9(w))),
        ("determinism and caching", Box::new(|| criterion_10(w))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
