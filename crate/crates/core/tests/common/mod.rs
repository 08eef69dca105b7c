//! Shared generators and brute-force oracles for the integration tests and
//! the acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqlsess_core::config::IndexConfig;
use sqlsess_core::features::compute_features;
use serde::Deserialize;
use sqlsess_core::fragments::{extract_fragments, QueryFragments, SchemaCatalog};
use sqlsess_core::indexes::compute_indexes;
use sqlsess_core::weak::{LfMatrix, Vote};
use sqlsess_core::workload::{QueryRecord, Session, Workload};
use sqlsess_core::Label;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random fragment sets over a tiny vocabulary shared by all four kinds, so
/// overlaps (including the same text under two kinds) are frequent.
pub fn random_fragments(rng: &mut impl Rng) -> QueryFragments {
    let mut pick = |max: usize| -> BTreeSet<String> {
        let n = rng.random_range(0..=max);
        (0..n).map(|_| format!("f{}", rng.random_range(0..6))).collect()
    };
    QueryFragments {
        projections: pick(5),
        selections: pick(4),
        aggregations: pick(3),
        tables: pick(3),
        attributes: pick(4),
        char_length: 0,
        star_unresolved: false,
    }
}

/// Oracle values for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Brute {
    pub no: [usize; 4],
    pub noat: usize,
    pub nc: [usize; 4],
    pub red: usize,
    pub ji: f64,
    pub edit: f64,
    pub cos: f64,
    pub cf: f64,
    pub ct: f64,
}

fn kinds(q: &QueryFragments) -> [Vec<&str>; 4] {
    [&q.projections, &q.selections, &q.aggregations, &q.tables]
        .map(|s| s.iter().map(String::as_str).collect())
}

fn count_in(xs: &[&str], ys: &[&str]) -> usize {
    xs.iter().filter(|x| ys.iter().any(|y| y == *x)).count()
}

/// Brute-force metrics and indexes of a whole session, with the empty query
/// in front of the first one and the default scales of 10.
pub fn brute_session(session: &[QueryFragments]) -> Vec<Brute> {
    let empty = QueryFragments::default();
    let max_not = session.iter().map(|q| q.tables.len()).max().unwrap_or(0);
    let mut out: Vec<Brute> = Vec::new();
    for (k, cur) in session.iter().enumerate() {
        let prev = if k == 0 { &empty } else { &session[k - 1] };
        let (c, p) = (kinds(cur), kinds(prev));
        let mut no = [0; 4];
        let mut nc = [0; 4];
        let mut red = 0;
        let mut tagged_cur = Vec::new();
        let mut tagged_prev = Vec::new();
        for i in 0..4 {
            no[i] = c[i].len();
            nc[i] = count_in(&c[i], &p[i]);
            red += c[i].iter().filter(|x| !p[i].contains(x)).count();
            red += p[i].iter().filter(|x| !c[i].contains(x)).count();
            tagged_cur.extend(c[i].iter().map(|x| (i, *x)));
            tagged_prev.extend(p[i].iter().map(|x| (i, *x)));
        }
        let mut union = tagged_cur.clone();
        for t in &tagged_prev {
            if !union.contains(t) {
                union.push(*t);
            }
        }
        let inter = tagged_cur.iter().filter(|t| tagged_prev.contains(t)).count();
        let ji = if union.is_empty() { 0.0 } else { inter as f64 / union.len() as f64 };

        let v: Vec<f64> = no.iter().chain(nc.iter()).map(|&x| x as f64).collect();
        let cos = if k == 0 {
            0.0
        } else {
            let pv: Vec<f64> = out[k - 1].no.iter().chain(out[k - 1].nc.iter()).map(|&x| x as f64).collect();
            let dot: f64 = v.iter().zip(&pv).map(|(a, b)| a * b).sum();
            let na = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nb = pv.iter().map(|b| b * b).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) }
        };
        let ncf: usize = nc.iter().sum();
        out.push(Brute {
            no,
            noat: cur.attributes.len(),
            nc,
            red,
            ji,
            edit: if red >= 10 { 0.0 } else { 1.0 - red as f64 / 10.0 },
            cos,
            cf: if ncf >= 10 { 1.0 } else { ncf as f64 / 10.0 },
            ct: if max_not == 0 { 0.0 } else { nc[3] as f64 / max_not as f64 },
        });
    }
    out
}

/// Workload whose queries carry exactly the given fragments.
pub fn workload_of(sessions: Vec<Vec<QueryFragments>>) -> Workload {
    Workload::new(
        sessions
            .into_iter()
            .enumerate()
            .map(|(s, qs)| Session {
                session_id: format!("s{s}"),
                user_id: format!("u{s}"),
                queries: qs
                    .into_iter()
                    .enumerate()
                    .map(|(k, f)| {
                        let mut q = QueryRecord::new(format!("s{s}_q{}", k + 1), k + 1, "SELECT 1");
                        q.fragments = Some(f);
                        q
                    })
                    .collect(),
            })
            .collect(),
    )
}

pub fn with_indexes(mut w: Workload) -> Workload {
    compute_features(&mut w).unwrap();
    compute_indexes(&mut w, &IndexConfig::default()).unwrap();
    w
}

fn set(items: impl IntoIterator<Item = String>) -> BTreeSet<String> {
    items.into_iter().collect()
}

/// Sessions of several explorations. Each exploration has its own base of
/// seven fragments (three projections, two predicates, one function, one
/// table); every query drops at most one of them and adds at most one fresh
/// fragment, so consecutive queries inside an exploration share at least
/// five of at most nine fragments (Jaccard >= 0.5) while different
/// explorations share none. The first query of every exploration is
/// labeled SEGMENT.
pub fn planted_workload(seed: u64, sessions: usize) -> Workload {
    let mut r = rng(seed);
    let mut fresh = 0usize;
    let mut all = Vec::new();
    let mut truth = Vec::new();
    let mut exploration = 0usize;
    for _ in 0..sessions {
        let mut queries = Vec::new();
        for _ in 0..r.random_range(1..=4) {
            exploration += 1;
            let e = exploration;
            let base = [
                vec![format!("e{e}_p0"), format!("e{e}_p1"), format!("e{e}_p2")],
                vec![format!("e{e}_s0"), format!("e{e}_s1")],
                vec![format!("count(e{e}_a0)")],
                vec![format!("e{e}_t")],
            ];
            let len = r.random_range(1..=6);
            for k in 0..len {
                let mut kept = base.clone();
                let droppable = [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1)];
                if r.random_bool(0.5) {
                    let (kind, i) = *droppable.choose(&mut r).unwrap();
                    kept[kind].remove(i);
                }
                if r.random_bool(0.5) {
                    fresh += 1;
                    let kind = r.random_range(0..2);
                    kept[kind].push(format!("x{fresh}"));
                }
                let attrs = kept[0].iter().chain(&kept[1]).cloned().collect::<Vec<_>>();
                queries.push(QueryFragments {
                    projections: set(kept[0].clone()),
                    selections: set(kept[1].clone()),
                    aggregations: set(kept[2].clone()),
                    tables: set(kept[3].clone()),
                    attributes: set(attrs),
                    char_length: 40,
                    star_unresolved: false,
                });
                truth.push(Label::from_bool(k == 0));
            }
        }
        all.push(queries);
    }
    let mut w = with_indexes(workload_of(all));
    for (q, t) in w.queries_mut().zip(truth) {
        q.ground_truth = Some(t);
    }
    w
}

/// Sessions with timestamps: gaps inside an exploration are 1 to 20
/// minutes, gaps before a new exploration 31 to 180 minutes. Labels mark
/// every planted long gap (and each session start) as SEGMENT.
pub fn timed_workload(seed: u64, sessions: usize) -> Workload {
    let mut r = rng(seed);
    let start: NaiveDateTime = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap().and_hms_opt(8, 0, 0).unwrap();
    let mut out = Vec::new();
    let mut clock = start;
    for s in 0..sessions {
        let mut queries = Vec::new();
        let mut pos = 0;
        for e in 0..r.random_range(1..=4) {
            for k in 0..r.random_range(1..=6) {
                pos += 1;
                let gap = if k == 0 && e > 0 {
                    r.random_range(31..=180)
                } else {
                    r.random_range(1..=20)
                };
                clock += Duration::minutes(gap);
                let mut q = QueryRecord::new(format!("s{s}_q{pos}"), pos, "SELECT 1");
                q.timestamp = Some(clock);
                q.ground_truth = Some(Label::from_bool(k == 0));
                queries.push(q);
            }
        }
        out.push(Session {
            session_id: format!("s{s}"),
            user_id: format!("u{s}"),
            queries,
        });
        clock += Duration::days(1);
    }
    Workload::new(out)
}

/// Votes drawn from the label model itself: the label is SEGMENT with
/// probability `prior`; LF `j` votes with probability `propensities[j]` and
/// is then correct with probability `accuracies[j]`.
pub fn simulate_lfs(seed: u64, n: usize, prior: f64, accuracies: &[f64], propensities: &[f64]) -> (LfMatrix, Vec<Label>) {
    let mut r = rng(seed);
    let mut votes = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = Label::from_bool(r.random_bool(prior));
        let row = accuracies
            .iter()
            .zip(propensities)
            .map(|(&a, &p)| {
                if !r.random_bool(p) {
                    Vote::Abstain
                } else if r.random_bool(a) {
                    Vote::from(y)
                } else {
                    Vote::from(flip(y))
                }
            })
            .collect();
        votes.push(row);
        labels.push(y);
    }
    let names = (0..accuracies.len()).map(|j| format!("lf{j}")).collect();
    (LfMatrix { names, votes }, labels)
}

pub fn flip(l: Label) -> Label {
    Label::from_bool(!l.is_segment())
}

/// Accuracy of a single LF used on its own, abstentions read as CONTINUE.
pub fn single_lf_accuracy(lf: &LfMatrix, j: usize, labels: &[Label]) -> f64 {
    let hits = lf
        .votes
        .iter()
        .zip(labels)
        .filter(|(row, y)| row[j].label().unwrap_or(Label::Continue) == **y)
        .count();
    hits as f64 / labels.len() as f64
}

/// Two-feature toy set separated by the line `2a + b = 1.5` with a margin of
/// at least 0.1 on both sides.
pub fn separable_toy(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut r = rng(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    while x.len() < n {
        let a: f64 = r.random_range(0.0..1.0);
        let b: f64 = r.random_range(0.0..1.0);
        let s = 2.0 * a + b - 1.5;
        if s.abs() < 0.1 {
            continue;
        }
        x.push(vec![a, b]);
        y.push(s > 0.0);
    }
    (x, y)
}

/// Best training accuracy over every line through two data points (both
/// orientations, nudged to either side), an exhaustive search over the
/// separators that matter for a finite sample.
pub fn exhaustive_separator(x: &[Vec<f64>], y: &[bool]) -> (f64, Vec<bool>) {
    let n = x.len();
    let mut best = (-1.0, vec![]);
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (x[j][0] - x[i][0], x[j][1] - x[i][1]);
            let (w0, w1) = (-dy, dx);
            let c = -(w0 * x[i][0] + w1 * x[i][1]);
            for sign in [1.0, -1.0] {
                for nudge in [1e-9, -1e-9] {
                    let pred: Vec<bool> = x.iter().map(|p| sign * (w0 * p[0] + w1 * p[1] + c) + nudge > 0.0).collect();
                    let acc = pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / n as f64;
                    if acc > best.0 {
                        best = (acc, pred);
                    }
                }
            }
        }
    }
    best
}

#[derive(Deserialize)]
struct Corpus {
    catalog: serde_json::Value,
    cases: Vec<Case>,
}

/// One hand-annotated statement of the parser corpus.
#[derive(Deserialize)]
pub struct Case {
    pub name: String,
    pub sql: String,
    #[serde(rename = "P")]
    pub p: BTreeSet<String>,
    #[serde(rename = "S")]
    pub s: BTreeSet<String>,
    #[serde(rename = "A")]
    pub a: BTreeSet<String>,
    #[serde(rename = "T")]
    pub t: BTreeSet<String>,
    #[serde(rename = "At")]
    pub at: BTreeSet<String>,
    #[serde(default)]
    pub star_unresolved: bool,
}

impl Case {
    /// Differences between the extracted and the annotated fragments.
    pub fn mismatches(&self, catalog: &SchemaCatalog) -> Vec<String> {
        let f = match extract_fragments(&self.sql, catalog) {
            Ok(f) => f,
            Err(e) => return vec![format!("{}: {e}", self.name)],
        };
        let mut out = Vec::new();
        let checks = [
            ("P", &f.projections, &self.p),
            ("S", &f.selections, &self.s),
            ("A", &f.aggregations, &self.a),
            ("T", &f.tables, &self.t),
            ("At", &f.attributes, &self.at),
        ];
        for (what, got, want) in checks {
            if got != want {
                out.push(format!("{} {what}: got {got:?}, want {want:?}", self.name));
            }
        }
        if f.star_unresolved != self.star_unresolved {
            out.push(format!("{} star_unresolved: got {}", self.name, f.star_unresolved));
        }
        if f.char_length != self.sql.chars().count() {
            out.push(format!("{} char_length {}", self.name, f.char_length));
        }
        out
    }
}

pub fn corpus() -> (SchemaCatalog, Vec<Case>) {
    let c: Corpus = serde_json::from_str(include_str!("../corpus/fragments.json")).unwrap();
    (SchemaCatalog::from_json(&c.catalog.to_string()).unwrap(), c.cases)
}
