//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit when any
//! criterion fails. Criterion 8 needs the public SQLShare log and is skipped
//! (reported as SKIP) when `SQLSHARE_LOG` is unset.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use sqlsess_core::baselines::{majority_class_baseline, timestamp_segment};
use sqlsess_core::classifier::kmm::{kmm_reweight, KmmParams};
use sqlsess_core::classifier::smote::{smote, Samples};
use sqlsess_core::classifier::train;
use sqlsess_core::config::{ClassifierConfig, Config};
use sqlsess_core::evaluation::{cohens_kappa, fleiss_kappa, score, Confusion, EvaluationReport};
use sqlsess_core::fragments::QueryFragments;
use sqlsess_core::indexes::{calibrate_thresholds, cf_index, ct_index, edit_index};
use sqlsess_core::vote::{explorations, vote_segment};
use sqlsess_core::weak::{fit_label_model, lf_names, predict_weak, search_lf_subset, subset_score, EmParams};
use sqlsess_core::Label;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn formula_oracles() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2024);
    let mut sessions: Vec<Vec<QueryFragments>> = Vec::new();
    let mut pairs = 0;
    while pairs < 1000 {
        let len = r.random_range(1..=5);
        sessions.push((0..len).map(|_| random_fragments(&mut r)).collect());
        pairs += len;
    }
    let w = with_indexes(workload_of(sessions.clone()));
    let mut bad = 0;
    for (s, frags) in w.sessions.iter().zip(&sessions) {
        for (q, b) in s.queries.iter().zip(brute_session(frags)) {
            let f = q.features.as_ref().unwrap();
            let ix = q.indexes.unwrap();
            let exact = [f.nop, f.nos, f.noa, f.not] == b.no
                && f.noat == b.noat
                && [f.ncp, f.ncs, f.nca, f.nct] == b.nc
                && f.red == b.red
                && ix.edit == b.edit
                && ix.cf == b.cf
                && ix.ct == b.ct;
            let close = (f.ji - b.ji).abs() <= 1e-12 && (ix.jaccard - b.ji).abs() <= 1e-12 && (ix.cos - b.cos).abs() <= 1e-12;
            if !(exact && close) {
                bad += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        bad == 0 && elapsed < Duration::from_secs(1),
        format!("{pairs} pairs, {bad} mismatches, {:.0} ms", elapsed.as_secs_f64() * 1000.0),
    )
}

fn parser_corpus() -> Outcome {
    let (catalog, cases) = corpus();
    let failures: Vec<String> = cases.iter().flat_map(|c| c.mismatches(&catalog)).collect();
    let detail = if failures.is_empty() {
        format!("{} statements", cases.len())
    } else {
        format!("{} statements, {} mismatches: {}", cases.len(), failures.len(), failures.join("; "))
    };
    verdict(failures.is_empty() && cases.len() >= 40, detail)
}

fn clamps_and_thresholds() -> Outcome {
    let (catalog, cases) = corpus();
    let frags: Vec<QueryFragments> = cases
        .iter()
        .map(|c| sqlsess_core::fragments::extract_fragments(&c.sql, &catalog).unwrap())
        .collect();
    let mut sessions = Vec::new();
    for a in &frags {
        for b in &frags {
            sessions.push(vec![a.clone(), b.clone()]);
        }
    }
    let w = with_indexes(workload_of(sessions));
    let mut bad = 0;
    for q in w.queries() {
        let f = q.features.as_ref().unwrap();
        let ix = q.indexes.unwrap();
        if (f.red >= 10 && ix.edit != 0.0)
            || (f.ncp + f.ncs + f.nca + f.nct >= 10 && ix.cf != 1.0)
            || !(0.0..=1.0).contains(&ix.ct)
        {
            bad += 1;
        }
    }
    let direct = edit_index(10, 10.0) == 0.0 && edit_index(25, 10.0) == 0.0 && cf_index(4, 3, 2, 1, 10.0) == 1.0 && ct_index(3, 2) == 1.0;
    let t = calibrate_thresholds(&w, 0.0).unwrap();
    let mins: Vec<f64> = (0..5)
        .map(|i| w.queries().map(|q| q.indexes.unwrap().to_array()[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let k0 = t.to_array().to_vec() == mins;
    verdict(
        bad == 0 && direct && k0,
        format!("{} corpus pairs, {bad} clamp violations, k=0 thresholds equal minima: {k0}", w.num_queries() / 2),
    )
}

fn planted_voting() -> Outcome {
    let mut w = planted_workload(4242, 100);
    // precondition of the generator
    let mut within_ok = true;
    let mut across_ok = true;
    for q in w.queries().filter(|q| q.position > 1) {
        let ji = q.features.as_ref().unwrap().ji;
        match q.ground_truth.unwrap() {
            Label::Continue => within_ok &= ji >= 0.5,
            Label::Segment => across_ok &= ji == 0.0,
        }
    }
    let t = calibrate_thresholds(&w, 30.0).unwrap();
    vote_segment(&mut w, &t, false).unwrap();
    let pred = w.require_labels("vote").unwrap();
    let truth = w.require_labels("ground_truth").unwrap();
    let r = score(&pred, &truth).unwrap();
    let internal = w
        .sessions
        .iter()
        .flat_map(|s| s.queries.iter().skip(1))
        .filter(|q| q.label("vote") == Some(Label::Segment))
        .count();
    let count = explorations(&w, "vote").unwrap().len();
    let identity = count == w.sessions.len() + internal;
    // diagnostics: how much of the miss is due to ties at the threshold
    let rate = truth.iter().filter(|l| l.is_segment()).count() as f64 / truth.len() as f64;
    let mut strict = w.clone();
    vote_segment(&mut strict, &t, true).unwrap();
    let strict_f = score(&strict.require_labels("vote").unwrap(), &truth).unwrap().f_measure;
    verdict(
        within_ok && across_ok && r.f_measure >= 0.95 && identity,
        format!(
            "{} queries, {} sessions, segment rate {:.3}, F = {:.4} (P {:.4}, R {:.4}; strict comparison F = {strict_f:.4}), explorations {count} = sessions {} + internal {internal}: {identity}",
            w.num_queries(),
            w.sessions.len(),
            rate,
            r.f_measure,
            r.precision,
            r.recall,
            w.sessions.len()
        ),
    )
}

fn evaluation_formulas() -> Outcome {
    let r = EvaluationReport::from_confusion(Confusion { ss: 2, cc: 8, sc: 1, cs: 1 });
    let worked = r.accuracy == 10.0 / 12.0
        && r.precision == 2.0 / 3.0
        && r.recall == 2.0 / 3.0
        && (r.f_measure - 2.0 / 3.0).abs() < 1e-15;
    let mut g = rng(99);
    let seq: Vec<Label> = (0..500).map(|_| Label::from_bool(g.random_bool(0.3))).collect();
    let cohen = cohens_kappa(&seq, &seq).unwrap();
    let n = 10_000;
    let raters: Vec<Vec<Label>> = (0..n).map(|_| (0..3).map(|_| Label::from_bool(g.random_bool(0.5))).collect()).collect();
    let fleiss = fleiss_kappa(&raters).unwrap();
    verdict(
        worked && cohen == 1.0 && (-0.05..=0.05).contains(&fleiss),
        format!(
            "accuracy {:.4}, P/R/F {:.4}/{:.4}/{:.4}, Cohen(identical) {cohen}, Fleiss(independent, n={n}) {fleiss:.4}",
            r.accuracy, r.precision, r.recall, r.f_measure
        ),
    )
}

fn classifier_checks() -> Outcome {
    let (x, y) = separable_toy(4, 200);
    let (_, reference) = exhaustive_separator(&x, &y);
    let s = Samples::new(x.clone(), y.clone(), None).unwrap();
    let names = vec!["a".to_string(), "b".to_string()];
    let m = train(&s, &names, &ClassifierConfig::default(), 0).unwrap();
    let pred: Vec<bool> = x.iter().map(|r| m.predict_row(r).is_segment()).collect();
    let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
    let agree = pred.iter().zip(&reference).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;

    let sx: Vec<Vec<f64>> = (0..1466).map(|i| vec![i as f64, (i % 13) as f64]).collect();
    let sy: Vec<bool> = (0..1466).map(|i| i < 124).collect();
    let balanced = smote(&Samples::new(sx, sy, None).unwrap(), 5, 1).unwrap().class_counts();

    let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 8) as f64, (i / 8) as f64]).collect();
    let k = kmm_reweight(&pts, &pts, &KmmParams::default()).unwrap();
    let mean = k.beta.iter().sum::<f64>() / k.beta.len() as f64;
    let kmm_ok = k.objective <= 1e-6 && (mean - 1.0).abs() <= k.epsilon;
    verdict(
        acc == 1.0 && agree >= 0.99 && balanced == (1342, 1342) && kmm_ok,
        format!(
            "toy accuracy {acc}, agreement with exhaustive search {agree:.3}, SMOTE 124/1342 -> {}/{}, KMM objective {:.2e} mean(beta) {mean:.4} (eps {:.4})",
            balanced.0, balanced.1, k.objective, k.epsilon
        ),
    )
}

fn label_model_recovery() -> Outcome {
    let acc = [0.9, 0.8, 0.75, 0.7, 0.65];
    let prop = [0.9, 0.7, 0.8, 0.6, 0.9];
    let (lf, labels) = simulate_lfs(3, 20_000, 0.3, &acc, &prop);
    let m = fit_label_model(&lf, None, &EmParams::default()).unwrap();
    let max_err = m.accuracies.iter().zip(acc).map(|(e, t)| (e - t).abs()).fold(0.0, f64::max);
    let pred = predict_weak(&lf, &m).unwrap();
    let model_acc = score(&pred, &labels).unwrap().accuracy;
    let best_single = (0..acc.len()).map(|j| single_lf_accuracy(&lf, j, &labels)).fold(0.0, f64::max);

    let mut acc21 = vec![0.55; 21];
    let mut prop21 = vec![0.5; 21];
    for (j, a) in [(0, 0.85), (3, 0.8), (7, 0.9), (15, 0.8), (18, 0.75)] {
        acc21[j] = a;
        prop21[j] = 0.8;
    }
    let (mut planted, planted_labels) = simulate_lfs(5, 1000, 0.25, &acc21, &prop21);
    planted.names = lf_names();
    let params = EmParams::default();
    let s = search_lf_subset(&planted, &planted_labels, &params).unwrap();
    let best_singleton = (0..21).map(|j| subset_score(&planted, &[j], &planted_labels, &params)).fold(0.0, f64::max);
    verdict(
        max_err <= 0.05 && model_acc >= best_single && s.f_measure >= best_singleton,
        format!(
            "max |alpha error| {max_err:.4}, model accuracy {model_acc:.4} vs best LF {best_single:.4}, subset F {:.4} ({} LFs) vs best singleton {best_singleton:.4}",
            s.f_measure,
            s.selected.len()
        ),
    )
}

fn sqlshare() -> Outcome {
    match std::env::var_os("SQLSHARE_LOG") {
        None => Outcome::Skip(
            "needs the public SQLShare log: set SQLSHARE_LOG (raw CSV), optionally SQLSHARE_CATALOG (JSON) and SQLSHARE_LABELED (labeled canonical CSV)"
                .into(),
        ),
        Some(path) => match sqlshare_run(std::path::Path::new(&path)) {
            Ok(o) => o,
            Err(e) => Outcome::Fail(format!("pipeline error: {e}")),
        },
    }
}

fn sqlshare_run(path: &std::path::Path) -> sqlsess_core::Result<Outcome> {
    use sqlsess_core::workload::{assemble_sessions, filter_selects, read_csv, read_raw_log, Workload};
    let start = Instant::now();
    let config = Config::default();
    let selects = filter_selects(read_raw_log(path)?);
    let n_queries = selects.len();
    let mut w = Workload::new(assemble_sessions(selects));
    let n_sessions = w.sessions.len();
    let catalog = match std::env::var_os("SQLSHARE_CATALOG") {
        Some(p) => sqlsess_core::fragments::SchemaCatalog::load(p)?,
        None => Default::default(),
    };
    sqlsess_core::fragments::fragment_workload(&mut w, &catalog);
    sqlsess_core::features::compute_features(&mut w)?;
    if let Ok(model) = sqlsess_core::features::fit_imputation(&w, config.seed) {
        sqlsess_core::features::impute(&mut w, &model);
    }
    sqlsess_core::indexes::compute_indexes(&mut w, &config.indexes)?;
    let t = calibrate_thresholds(&w, 30.0)?;
    vote_segment(&mut w, &t, false)?;
    let vote = explorations(&w, "vote")?.len();
    let within = |v: usize, target: f64, tol: f64| (v as f64 - target).abs() <= tol * target;
    let mut ok = n_queries == 10_668 && n_sessions == 451 && within(vote, 2851.0, 0.05);
    let mut detail = format!("{n_queries} queries, {n_sessions} sessions, vote explorations {vote}");

    match std::env::var_os("SQLSHARE_LABELED") {
        None => {
            ok = false;
            detail.push_str("; classifier/weak/agreement not checked (SQLSHARE_LABELED unset)");
        }
        Some(p) => {
            let mut labeled = read_csv(p)?;
            if labeled.queries().any(|q| q.indexes.is_none()) {
                sqlsess_core::indexes::compute_indexes(&mut labeled, &config.indexes)?;
            }
            let out = sqlsess_core::classifier::fit_classifier(&labeled, Some(&w), &config.classifier, config.seed)?;
            sqlsess_core::classifier::predict(&mut w, &out.model)?;
            let clf = explorations(&w, "classifier")?.len();
            let weak = sqlsess_core::weak::fit_weak(&labeled, &config.weak)?;
            sqlsess_core::weak::apply_weak(&mut w, &weak.model)?;
            let wk = explorations(&w, "weak")?.len();
            let cols: Vec<String> = ["vote", "classifier", "weak"].iter().map(|s| s.to_string()).collect();
            let full = sqlsess_core::evaluation::agreement(&w, &cols)?.full_agreement;
            ok &= within(clf, 3437.0, 0.10) && within(wk, 3208.0, 0.10) && full >= 0.85;
            detail.push_str(&format!(", classifier {clf}, weak {wk}, full agreement {full:.3}"));
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(300);
    detail.push_str(&format!(", {:.1} s", elapsed.as_secs_f64()));
    Ok(verdict(ok, detail))
}

fn baselines() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for seed in 0..3 {
        let w = planted_workload(seed, 50);
        let truth = w.require_labels("ground_truth").unwrap();
        let r = score(&majority_class_baseline(&w), &truth).unwrap();
        let cont = truth.iter().filter(|l| **l == Label::Continue).count() as f64 / truth.len() as f64;
        ok &= r.accuracy == cont && r.f_measure == 0.0;
        details.push(format!("{:.4}={cont:.4}", r.accuracy));
    }
    let w = timed_workload(5, 60);
    let truth = w.require_labels("ground_truth").unwrap();
    let pred = timestamp_segment(&w, 30).unwrap();
    let gaps: Vec<usize> = w
        .sessions
        .iter()
        .flat_map(|s| s.queries.iter())
        .enumerate()
        .filter(|(_, q)| q.position > 1 && q.ground_truth == Some(Label::Segment))
        .map(|(i, _)| i)
        .collect();
    let found = gaps.iter().filter(|&&i| pred[i] == Label::Segment).count();
    let r = score(&pred, &truth).unwrap();
    ok &= found == gaps.len() && r.precision == 1.0;
    verdict(
        ok,
        format!(
            "majority accuracy = CONTINUE fraction [{}], F 0; timestamp found {found}/{} planted gaps, precision {}",
            details.join(", "),
            gaps.len(),
            r.precision
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("formula oracles", formula_oracles),
        ("parser corpus", parser_corpus),
        ("clamp and threshold invariants", clamps_and_thresholds),
        ("planted-exploration voting", planted_voting),
        ("evaluation formulas", evaluation_formulas),
        ("classifier, SMOTE, KMM", classifier_checks),
        ("label model recovery and subset search", label_model_recovery),
        ("SQLShare reproduction", sqlshare),
        ("baseline sanity", baselines),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Outcome::Pass(d) => println!("PASS {} {name}: {d}", i + 1),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL {} {name}: {d}", i + 1);
            }
            Outcome::Skip(d) => println!("SKIP {} {name}: {d}", i + 1),
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
