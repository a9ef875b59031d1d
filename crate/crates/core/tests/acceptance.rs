//! Acceptance suite. Each criterion runs under its own time budget and
//! prints exactly one `PASS` or `FAIL` line; any failure fails the target.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use refdict::cooc::{dice, Provenance};
use refdict::corpus::TermStats;
use refdict::dictionary::{boost, term_weight};
use refdict::eval::{default_alphas, default_biased_ids, select_candidates, SweepInput};
use refdict::pipeline::{read_dictionary, read_matrix, read_model};
use refdict::scoring::{compute_norms, pivoted_norm, tfsim, DocNorm};
use refdict::synthetic::{junk_topic_reference, planted_fixture, random_corpus, two_vocabulary_corpus};
use refdict::topics::top_terms;
use refdict::*;

/// Relative tolerance for closed-form oracles.
const REL_TOL: f64 = 1e-9;
const BUDGET_ORACLES: Duration = Duration::from_secs(1);
const BUDGET_CONDORCET: Duration = Duration::from_secs(10);
const BUDGET_PLANTED: Duration = Duration::from_secs(60);
/// Criteria without a stated budget still must finish.
const BUDGET_DEFAULT: Duration = Duration::from_secs(120);
const ALPHA_ZERO_DOCS: usize = 200;
const MAP_TRIALS: usize = 1000;
const CONDORCET_RANDOM: usize = 100;
const CONDORCET_RANDOM_MAX_DOCS: usize = 30;
const PLANTED_TOP_M: usize = 10;
const PLANTED_FRACTION: f64 = 0.5;
const PLANTED_BIASED: usize = 4;
/// The pipeline's default context-mode system.
const PLANTED_CONTEXT_ALPHA: f64 = 14.0;
const SEPARATION_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const SWEEP_SYSTEMS: usize = 34;

fn close(actual: f64, expected: f64) -> bool {
    if expected == 0.0 {
        return actual == 0.0;
    }
    ((actual - expected) / expected).abs() <= REL_TOL
}

macro_rules! assert_close {
    ($actual:expr, $expected:expr, $what:expr) => {{
        let (a, e) = ($actual, $expected);
        assert!(close(a, e), "{}: got {a}, expected {e}", $what);
    }};
}

fn sent(tokens: &[&str]) -> Vec<String> {
    tokens.iter().map(|t| t.to_string()).collect()
}

fn doc(id: &str, sentences: &[&[&str]]) -> Document {
    Document::new(id, sentences.iter().map(|s| sent(s)).collect())
}

/// Dictionary over `terms` in the given rank order.
fn dict(terms: &[&str]) -> Dictionary {
    let n = terms.len();
    let ranked = terms.iter().enumerate().map(|(i, t)| (t.to_string(), (n - i) as f64)).collect();
    Dictionary::from_ranked(ranked, DictionaryMethod::TopicModel).unwrap()
}

fn list(id: &str, docs: &[String]) -> RankedList {
    let n = docs.len();
    let scored = docs.iter().enumerate().map(|(i, d)| (d.clone(), (n - i) as f64)).collect();
    RankedList::from_scores(id, scored).unwrap()
}

// ---------------------------------------------------------------- 1

fn criterion_1() -> String {
    assert_eq!(dice(3, 5, 0).unwrap(), 0.0);
    assert_close!(dice(4, 4, 4).unwrap(), 1.0, "dice identical sets");
    assert_close!(dice(3, 5, 2).unwrap(), 0.5, "dice(3,5,2)");

    let d3 = dict(&["a", "b", "c"]);
    let one = Corpus::from_documents(vec![doc("r", &[&["a", "b"]])], CorpusRole::Reference).unwrap();
    let m = build_cooc(&one, &dict(&["a", "b"])).unwrap();
    assert_close!(m.get(0, 1), 1.0, "single-sentence dice");
    let three = Corpus::from_documents(vec![doc("r", &[&["a", "b"], &["a"], &["b", "c"]])], CorpusRole::Reference)
        .unwrap();
    let m = build_cooc(&three, &d3).unwrap();
    assert_close!(m.get(0, 1), 0.5, "C[a,b]");
    assert_close!(m.get(1, 2), 2.0 / 3.0, "C[b,c]");
    assert_eq!(m.get(0, 2), 0.0, "C[a,c] absent");
    let repeated = Corpus::from_documents(vec![doc("r", &[&["a", "a", "b"]])], CorpusRole::Reference).unwrap();
    assert_close!(build_cooc(&repeated, &d3).unwrap().get(0, 1), 1.0, "binary per sentence");

    assert_close!(boost(1).unwrap(), 1.0, "boost(1)");
    assert_close!(boost(4).unwrap(), 0.5, "boost(4)");
    assert_close!(boost(100).unwrap(), 0.1, "boost(100)");
    let two = dict(&["x", "y"]);
    assert_close!(two.entries()[1].boost, 1.0 / 2f64.sqrt(), "boost(2)");

    let terms: Vec<String> = (0..30).map(|i| format!("t{i:02}")).collect();
    let refs: Vec<&str> = terms.iter().map(String::as_str).collect();
    let target = Corpus::from_documents(
        vec![doc("u10", &[&refs[..10]]), doc("u30", &[&refs[..30]])],
        CorpusRole::Target,
    )
    .unwrap();
    let stats = TermStats::new(&target);
    let norms = compute_norms(&target, &stats, &ScoringConfig::unigram()).unwrap();
    assert_close!(norms.pivot(), 20.0, "pivot");
    assert_close!(norms.get(0).unwrap().norm, 1.0 / 13f64.sqrt(), "norm(|U_d|=10)");
    assert_close!(pivoted_norm(10, 20.0, 0.7), 0.277_350_098_112_614_6, "pivoted_norm");
    let flat = ScoringConfig::unigram().with_slope(0.0).unwrap();
    let norms0 = compute_norms(&target, &stats, &flat).unwrap();
    for i in 0..2 {
        assert_close!(norms0.get(i).unwrap().norm, 1.0 / 20f64.sqrt(), "slope 0");
    }

    let aab = Corpus::from_documents(vec![doc("d", &[&["a", "a", "b"]])], CorpusRole::Target).unwrap();
    let n = compute_norms(&aab, &TermStats::new(&aab), &ScoringConfig::unigram()).unwrap();
    assert_close!(n.get(0).unwrap().avgtf, 1.5, "avgtf");

    // w occurs 8 times, x once
    let reference = Corpus::from_documents(
        vec![
            doc("r1", &[&["w", "w", "w", "w"], &["x"]]),
            doc("r2", &[&["w", "w", "w", "w"]]),
        ],
        CorpusRole::Reference,
    )
    .unwrap();
    let rstats = TermStats::new(&reference);
    let model = |phi_rows: &str, k: usize, excluded: &str| {
        let text = format!(
            "refdict-topic-model\t1\nK\t{k}\nV\t2\nalpha\t1\nbeta\t0.01\niterations\t1\nseed\t0\nexcluded\t{excluded}\nweight{}\nvocab\tw\tx\n{phi_rows}",
            "\t0.5".repeat(k)
        );
        TopicModelResult::read_tsv(text.as_bytes()).unwrap()
    };
    let m1 = model("phi\t1\t0.05\t0.95\n", 1, "");
    assert_close!(term_weight("w", &m1, &rstats).unwrap(), 8f64.ln() * 0.05, "term_weight");
    assert_eq!(term_weight("x", &m1, &rstats).unwrap(), 0.0, "tf=1 weighs 0");
    let m2 = model("phi\t1\t0.1\t0.9\nphi\t2\t0.9\t0.1\n", 2, "2");
    assert_close!(term_weight("w", &m2, &rstats).unwrap(), 8f64.ln() * 0.1, "term_weight excluded");
    assert_close!(term_weight("w", &m2, &rstats).unwrap(), 0.207_944_154_167_983_6, "ln(8)*0.1");

    let norm = DocNorm {
        unique_terms: 1,
        norm: 0.37,
        avgtf: 1.0,
    };
    let d4 = dict(&["p", "q", "r", "w"]);
    assert_close!(score_dict(&d4, &doc("d", &[&["p"]]), &norm).unwrap(), 0.37, "score_dict rank 1");
    assert_eq!(score_dict(&d4, &doc("d", &[&["z"]]), &norm).unwrap(), 0.0, "no match");
    let norm2 = DocNorm {
        unique_terms: 2,
        norm: 0.4,
        avgtf: 2.0,
    };
    let got = score_dict(&d4, &doc("d", &[&["w", "w", "w", "z"]]), &norm2).unwrap();
    assert_close!(got, (1.0 + 3f64.ln()) / (1.0 + 2f64.ln()) * 0.5 * 0.4, "score_dict rank 4");

    let dw = dict(&["w", "a", "b"]);
    let cf = CoocMatrix::from_pairs(&dw, Provenance::Filtered, [("w", "a", 0.4), ("w", "b", 0.3)]).unwrap();
    let d = doc("d", &[&["w", "a", "b"]]);
    let cfg = ScoringConfig::context(2.0).unwrap();
    let t_w = 1.0 + 2.0 * 0.7 / (3f64.sqrt() * 0.5);
    assert_close!(tfsim("w", &dw, &d, &cf, &cfg).unwrap(), t_w, "tfsim");
    assert!((t_w - 2.61658).abs() < 1e-5);
    assert_close!(tfsim("w", &dw, &d, &cf, &ScoringConfig::context(0.0).unwrap()).unwrap(), 1.0, "tfsim α=0");
    let zero = CoocMatrix::from_pairs(&dw, Provenance::Filtered, []).unwrap();
    assert_close!(tfsim("w", &dw, &d, &zero, &cfg).unwrap(), 1.0, "tfsim zero column");

    let t_ab = 1.0 + 2.0 / 3f64.sqrt();
    assert_close!(tfsim("a", &dw, &d, &cf, &cfg).unwrap(), t_ab, "tfsim(a)");
    let norm3 = DocNorm {
        unique_terms: 3,
        norm: 0.5,
        avgtf: 1.0,
    };
    let expected = 0.5 * ((1.0 + t_w.ln()) + (1.0 + t_ab.ln()) / 2f64.sqrt() + (1.0 + t_ab.ln()) / 3f64.sqrt());
    assert_close!(score_context(&dw, &d, &cf, &norm3, &cfg).unwrap(), expected, "score_context");
    "dice, boost, norm, avgtf, term_weight, score_dict, tfsim, score_context".into()
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> String {
    let reference = random_corpus(21, 60, 80, CorpusRole::Reference);
    let generic = random_corpus(22, 100, 80, CorpusRole::Generic);
    let target = random_corpus(23, 250, 80, CorpusRole::Target);
    assert!(target.len() >= ALPHA_ZERO_DOCS);
    let d = extract_dictionary_tfidf(&reference, 50).unwrap();
    let cf = filter_cooc(&build_cooc(&reference, &d).unwrap(), &build_cooc(&generic, &d).unwrap()).unwrap();
    assert!(cf.nnz() > 0, "filtered matrix must carry context");

    let zero = ScoringConfig::context(0.0).unwrap();
    let stats = TermStats::new(&target);
    let norms = compute_norms(&target, &stats, &zero).unwrap();
    let mut positive = 0;
    for (i, doc) in target.documents().iter().enumerate() {
        let norm = norms.get(i).unwrap();
        let a = score_context(&d, doc, &cf, norm, &zero).unwrap();
        let b = score_dict(&d, doc, norm).unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "document {}: {a} vs {b}", doc.id());
        positive += usize::from(b > 0.0);
    }
    let ctx = rank_collection(&target, &d, Some(&cf), &zero, 2000).unwrap();
    let uni = rank_collection(&target, &d, None, &ScoringConfig::unigram(), 2000).unwrap();
    assert_eq!(ctx.entries(), uni.entries());
    format!("{} documents, {positive} positive, ranked lists identical", target.len())
}

// ---------------------------------------------------------------- 3

fn oracle_dice(sentences: &[Vec<String>], a: &str, b: &str) -> f64 {
    let has = |s: &Vec<String>, t: &str| s.iter().any(|x| x == t);
    let n_a = sentences.iter().filter(|s| has(s, a)).count();
    let n_b = sentences.iter().filter(|s| has(s, b)).count();
    let n_ab = sentences.iter().filter(|s| has(s, a) && has(s, b)).count();
    if n_ab == 0 {
        0.0
    } else {
        2.0 * n_ab as f64 / (n_a + n_b) as f64
    }
}

fn all_sentences(c: &Corpus) -> Vec<Vec<String>> {
    c.documents().iter().flat_map(|d| d.sentences().to_vec()).collect()
}

/// Checks C and D against the oracle and C′ against both; returns entries checked.
fn check_cooc(reference: &Corpus, generic: &Corpus, d: &Dictionary) -> usize {
    let c = build_cooc(reference, d).unwrap();
    let g = build_cooc(generic, d).unwrap();
    let f = filter_cooc(&c, &g).unwrap();
    let (rs, gs) = (all_sentences(reference), all_sentences(generic));
    let terms: Vec<&str> = d.terms().collect();
    for a in 0..terms.len() {
        for b in 0..terms.len() {
            for (m, s) in [(&c, &rs), (&g, &gs)] {
                let v = m.get(a, b);
                assert_eq!(v, m.get(b, a), "symmetry");
                if a == b {
                    assert_eq!(v, 0.0, "diagonal");
                } else {
                    assert!(v == 0.0 || (v > 0.0 && v <= 1.0), "range");
                    assert_eq!(v, oracle_dice(s, terms[a], terms[b]), "oracle {} {}", terms[a], terms[b]);
                }
            }
            let fv = f.get(a, b);
            assert!(fv >= 0.0 && fv <= c.get(a, b), "0 <= C' <= C");
            assert_eq!(fv, (c.get(a, b) - g.get(a, b)).max(0.0));
        }
    }
    let empty = CoocMatrix::from_pairs(d, Provenance::Generic, []).unwrap();
    let ident = filter_cooc(&c, &empty).unwrap();
    assert!(ident.pairs().eq(c.pairs()), "zero D is the identity");
    terms.len() * terms.len()
}

fn corpus_of(role: CorpusRole, sentences: Vec<Vec<String>>) -> Corpus {
    Corpus::from_documents(vec![Document::new("d", sentences)], role).unwrap()
}

fn criterion_3() -> String {
    let vocab = ["a", "b", "c"];
    let d = dict(&vocab);
    let subsets: Vec<Vec<String>> = (1u8..8)
        .map(|mask| (0..3).filter(|i| mask >> i & 1 == 1).map(|i| vocab[i].to_string()).collect())
        .collect();
    let mut corpora: Vec<Vec<Vec<String>>> = Vec::new();
    let mut frontier: Vec<Vec<Vec<String>>> = vec![Vec::new()];
    for _ in 0..2 {
        frontier = frontier
            .iter()
            .flat_map(|c| {
                subsets.iter().map(move |s| {
                    let mut next = c.clone();
                    next.push(s.clone());
                    next
                })
            })
            .collect();
        corpora.extend(frontier.iter().cloned());
    }
    let mut exhaustive = 0;
    for r in &corpora {
        for g in &corpora {
            let rc = corpus_of(CorpusRole::Reference, r.clone());
            let gc = corpus_of(CorpusRole::Generic, g.clone());
            check_cooc(&rc, &gc, &d);
            exhaustive += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let words: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
    let d6 = dict(&["w0", "w1", "w2", "w3", "w4", "w5"]);
    let mut random_small = 0;
    for _ in 0..300 {
        let mut make = |role| {
            let n = rng.random_range(1..=20);
            let sentences = (0..n)
                .map(|_| {
                    let len = rng.random_range(1..=5);
                    (0..len).map(|_| words[rng.random_range(0..words.len())].clone()).collect()
                })
                .collect();
            corpus_of(role, sentences)
        };
        let (r, g) = (make(CorpusRole::Reference), make(CorpusRole::Generic));
        check_cooc(&r, &g, &d6);
        random_small += 1;
    }

    for seed in 0..5 {
        let r = random_corpus(100 + seed, 60, 50, CorpusRole::Reference);
        let g = random_corpus(200 + seed, 60, 50, CorpusRole::Generic);
        let terms: Vec<String> = (0..40).map(|i| format!("w{i:03}")).collect();
        let refs: Vec<&str> = terms.iter().map(String::as_str).collect();
        check_cooc(&r, &g, &dict(&refs));
    }
    format!("{exhaustive} exhaustive corpus pairs (<=2 sentences each), {random_small} random (<=20 sentences), 5 large")
}

// ---------------------------------------------------------------- 4

fn brute_condorcet(pool: &BTreeSet<String>, systems: &[Vec<String>]) -> Vec<String> {
    let pos = |s: &Vec<String>, d: &str| s.iter().position(|x| x == d);
    let above = |s: &Vec<String>, a: &str, b: &str| match (pos(s, a), pos(s, b)) {
        (Some(x), Some(y)) => x < y,
        (Some(_), None) => true,
        _ => false,
    };
    let mut rows: Vec<(usize, f64, String)> = pool
        .iter()
        .map(|a| {
            let wins = pool
                .iter()
                .filter(|b| *b != a)
                .filter(|b| 2 * systems.iter().filter(|s| above(s, a, b)).count() > systems.len())
                .count();
            let nd: f64 = systems
                .iter()
                .filter_map(|s| pos(s, a).map(|r| s.len() as f64 / (r + 1) as f64))
                .sum();
            (wins, nd, a.clone())
        })
        .collect();
    rows.sort_by(|x, y| y.0.cmp(&x.0).then(y.1.total_cmp(&x.1)).then(x.2.cmp(&y.2)));
    rows.into_iter().map(|r| r.2).collect()
}

fn check_condorcet(systems: &[Vec<String>], top_m: usize) {
    let lists: Vec<RankedList> = systems.iter().enumerate().map(|(i, s)| list(&format!("s{i}"), s)).collect();
    let ids = lists.iter().map(|l| l.system_id().to_owned()).collect();
    let set = SystemSet::new(lists, ids).unwrap();
    let pool = select_candidates(&set, top_m).unwrap();
    let got: Vec<String> = condorcet_rank(&pool, &set).unwrap().into_iter().map(|e| e.doc_id).collect();
    assert_eq!(got, brute_condorcet(&pool, systems), "systems {systems:?}");
}

/// Every ordered non-empty subset of `docs`.
fn partial_orders(docs: &[String]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..docs.len() {
        frontier = frontier
            .iter()
            .flat_map(|p| {
                docs.iter().filter(|d| !p.contains(d)).map(move |d| {
                    let mut q = p.clone();
                    q.push(d.clone());
                    q
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

fn for_each_tuple(options: &[Vec<String>], k: usize, f: &mut dyn FnMut(&[Vec<String>])) {
    fn go(options: &[Vec<String>], k: usize, acc: &mut Vec<Vec<String>>, f: &mut dyn FnMut(&[Vec<String>])) {
        if acc.len() == k {
            f(acc);
            return;
        }
        for o in options {
            acc.push(o.clone());
            go(options, k, acc, f);
            acc.pop();
        }
    }
    go(options, k, &mut Vec::new(), f);
}

fn criterion_4() -> String {
    let ids = |n: usize| -> Vec<String> { (0..n).map(|i| format!("d{i}")).collect() };
    let mut exhaustive = 0usize;
    // partial rankings, every tuple of systems
    for (n, max_s) in [(1, 4), (2, 4), (3, 4), (4, 2)] {
        let orders = partial_orders(&ids(n));
        for s in 1..=max_s {
            for_each_tuple(&orders, s, &mut |sys| {
                check_condorcet(sys, 100);
                exhaustive += 1;
            });
        }
    }
    // full permutations
    for (n, max_s) in [(4, 3), (5, 2), (6, 1)] {
        let perms: Vec<Vec<String>> = partial_orders(&ids(n)).into_iter().filter(|p| p.len() == n).collect();
        for s in 1..=max_s {
            for_each_tuple(&perms, s, &mut |sys| {
                check_condorcet(sys, 100);
                exhaustive += 1;
            });
        }
    }
    // remaining cells of the <=4 systems x <=6 documents space, sampled
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut sampled = 0;
    for _ in 0..20_000 {
        let n = rng.random_range(4..=6);
        let s = rng.random_range(1..=4);
        let docs = ids(n);
        let sys: Vec<Vec<String>> = (0..s)
            .map(|_| {
                let mut p = docs.clone();
                p.shuffle(&mut rng);
                p.truncate(rng.random_range(1..=n));
                p
            })
            .collect();
        check_condorcet(&sys, 100);
        sampled += 1;
    }
    for _ in 0..CONDORCET_RANDOM {
        let n = rng.random_range(1..=CONDORCET_RANDOM_MAX_DOCS);
        let s = rng.random_range(1..=6);
        let docs = ids(n);
        let sys: Vec<Vec<String>> = (0..s)
            .map(|_| {
                let mut p = docs.clone();
                p.shuffle(&mut rng);
                p.truncate(rng.random_range(1..=n));
                p
            })
            .collect();
        check_condorcet(&sys, rng.random_range(1..=n));
    }
    // worked example
    let abc = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let sys = [abc(&["A", "B", "C"]), abc(&["A", "C", "B"]), abc(&["B", "A", "C"])];
    assert_eq!(brute_condorcet(&abc(&["A", "B", "C"]).into_iter().collect(), &sys), abc(&["A", "B", "C"]));
    check_condorcet(&sys, 3);
    format!("{exhaustive} exhaustive, {sampled} sampled small, {CONDORCET_RANDOM} random (<= {CONDORCET_RANDOM_MAX_DOCS} docs)")
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> String {
    let docs: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
    let l = list("s", &docs);
    let top3 = PseudorelSet::from_ids(docs[..3].to_vec());
    assert_eq!(map_score(&l, &top3).unwrap(), 1.0);
    let none = PseudorelSet::from_ids(["x".to_string(), "y".to_string()]);
    assert_eq!(map_score(&l, &none).unwrap(), 0.0);
    let r13 = PseudorelSet::from_ids([docs[0].clone(), docs[2].clone()]);
    assert_close!(map_score(&l, &r13).unwrap(), (1.0 + 2.0 / 3.0) / 2.0, "AP rels at 1 and 3");

    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let mut trials = 0;
    while trials < MAP_TRIALS {
        let n = rng.random_range(2..=40);
        let mut order: Vec<String> = (0..n).map(|i| format!("d{i:02}")).collect();
        order.shuffle(&mut rng);
        let rels: Vec<String> = order.iter().filter(|_| rng.random_bool(0.4)).cloned().collect();
        let extra = rng.random_range(0..3);
        let rels: Vec<String> = rels.into_iter().chain((0..extra).map(|i| format!("missing{i}"))).collect();
        if rels.is_empty() {
            continue;
        }
        let rel_set = PseudorelSet::from_ids(rels);
        let swaps: Vec<usize> = (0..n - 1)
            .filter(|&i| !rel_set.contains(&order[i]) && rel_set.contains(&order[i + 1]))
            .collect();
        let Some(&i) = swaps.choose(&mut rng) else { continue };
        let before = map_score(&list("s", &order), &rel_set).unwrap();
        order.swap(i, i + 1);
        let after = map_score(&list("s", &order), &rel_set).unwrap();
        assert!(after >= before, "swap at {i} lowered MAP {before} -> {after}");
        trials += 1;
    }
    format!("{MAP_TRIALS} random upward swaps")
}

// ---------------------------------------------------------------- 6

struct Planted {
    fixture: synthetic::PlantedFixture,
    dicts: Vec<(Dictionary, CoocMatrix)>,
}

const PLANTED_SEED: u64 = 61;

fn planted() -> Planted {
    let fixture = planted_fixture(PLANTED_SEED);
    let model = fit_lda(&fixture.reference, LdaParams::new(2).with_seed(PLANTED_SEED)).unwrap();
    let stats = TermStats::new(&fixture.reference);
    let tm = extract_dictionary_tm(&model, &stats, 500).unwrap();
    let tfidf = extract_dictionary_tfidf(&fixture.reference, 500).unwrap();
    let dicts = [tm, tfidf]
        .into_iter()
        .map(|d| {
            let c = build_cooc(&fixture.reference, &d).unwrap();
            let g = build_cooc(&fixture.generic, &d).unwrap();
            let f = filter_cooc(&c, &g).unwrap();
            (d, f)
        })
        .collect();
    Planted { fixture, dicts }
}

fn rank_of(list: &RankedList, id: &str) -> usize {
    list.entries().iter().find(|e| e.doc_id == id).map_or(usize::MAX, |e| e.rank)
}

fn criterion_6() -> String {
    let p = planted();
    let f = &p.fixture;
    let labels = PseudorelSet::from_ids(f.relevant.iter().cloned());
    let mut notes = Vec::new();

    // (a) exact-label MAP, alpha > 0 beats alpha = 0
    for (d, cf) in &p.dicts {
        let map_at = |alpha: f64| {
            let cfg = ScoringConfig::context(alpha).unwrap();
            map_score(&rank_collection(&f.target, d, Some(cf), &cfg, 2000).unwrap(), &labels).unwrap()
        };
        let base = map_at(0.0);
        let (best_alpha, best) = default_alphas()
            .into_iter()
            .filter(|&a| a > 0.0)
            .map(|a| (a, map_at(a)))
            .fold((f64::NAN, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best });
        assert!(best > base, "{}: best alpha>0 MAP {best} not above alpha=0 MAP {base}", d.method());
        notes.push(format!("(a) {}: MAP a=0 {base:.3} < a={best_alpha} {best:.3}", d.method()));
    }

    // (b) the default context-mode system separates relevant from decoys;
    // the alphas of the sweep that also separate are reported
    let separates = |d: &Dictionary, cf: &CoocMatrix, cfg: &ScoringConfig| {
        let l = rank_collection(&f.target, d, Some(cf), cfg, 2000).unwrap();
        let worst_rel = f.relevant.iter().map(|id| rank_of(&l, id)).max().unwrap();
        let best_decoy = f.decoys.iter().map(|id| rank_of(&l, id)).min().unwrap();
        (worst_rel < best_decoy, worst_rel, best_decoy)
    };
    for (d, cf) in &p.dicts {
        let cfg = ScoringConfig::context(PLANTED_CONTEXT_ALPHA).unwrap();
        let (ok, worst_rel, best_decoy) = separates(d, cf, &cfg);
        assert!(ok, "{}: relevant down to {worst_rel}, decoy at {best_decoy}", d.method());
        let holding: Vec<String> = default_alphas()
            .into_iter()
            .filter(|&a| a > 0.0 && separates(d, cf, &ScoringConfig::context(a).unwrap()).0)
            .map(|a| a.to_string())
            .collect();
        let only = separates(d, cf, &ScoringConfig::context_only()).0;
        notes.push(format!(
            "(b) {}: a={PLANTED_CONTEXT_ALPHA} separates; also a in {{{}}}, context-only {only}",
            d.method(),
            holding.join(",")
        ));
    }

    // (c) full pseudorel pipeline
    let dir = tempfile::tempdir().unwrap();
    f.write_to(dir.path()).unwrap();
    let mut config = PipelineConfig::default();
    for (k, v) in [
        ("reference", dir.path().join("reference.jsonl").display().to_string()),
        ("generic", dir.path().join("generic.jsonl").display().to_string()),
        ("target", dir.path().join("target.jsonl").display().to_string()),
        ("output", dir.path().join("out").display().to_string()),
        ("topics", "2".into()),
        ("seed", PLANTED_SEED.to_string()),
        ("top_m", PLANTED_TOP_M.to_string()),
        ("fraction", PLANTED_FRACTION.to_string()),
    ] {
        config.set(k, &v).unwrap();
    }
    run_pipeline(&config).unwrap();
    let out = dir.path().join("out");
    let systems: Vec<RankedList> = fs::read_dir(out.join("runs"))
        .unwrap()
        .map(|e| refdict::pipeline::read_ranked_list(&e.unwrap().path()).unwrap())
        .collect();
    assert_eq!(default_biased_ids(&systems).len(), PLANTED_BIASED);
    let report = fs::read_to_string(out.join("eval_report.tsv")).unwrap();
    let maps: BTreeMap<String, f64> = report
        .lines()
        .skip(1)
        .map(|l| {
            let (id, v) = l.split_once('\t').unwrap();
            (id.to_owned(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(maps.len(), SWEEP_SYSTEMS);
    let rels = fs::read_to_string(out.join("pseudorels.txt")).unwrap();
    let n_rels = rels.lines().count();
    let mut improved = Vec::new();
    for label in ["tm", "tfidf"] {
        let base = maps[&format!("{label}:context:alpha=0")];
        let best = maps
            .iter()
            .filter(|(id, _)| id.starts_with(&format!("{label}:context:")) && !id.ends_with("alpha=0"))
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        if best > base {
            improved.push(format!("{label} {base:.3}->{best:.3}"));
        }
    }
    assert!(!improved.is_empty(), "no alpha>0 system above alpha=0 under pseudorels: {maps:?}");
    notes.push(format!("(c) {n_rels} pseudorels, {}", improved.join(", ")));
    notes.join("; ")
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> String {
    let c = random_corpus(71, 30, 40, CorpusRole::Reference);
    let mut params = LdaParams::new(1).with_seed(7);
    params.iterations = 20;
    let m = fit_lda(&c, params).unwrap();
    let stats = TermStats::new(&c);
    let v = m.vocabulary().len() as f64;
    let tokens = stats.total_tokens() as f64;
    let phi = m.phi(1).unwrap();
    for (i, w) in m.vocabulary().iter().enumerate() {
        let expected = (stats.tf(w) as f64 + params.beta) / (tokens + v * params.beta);
        assert_close!(phi[i], expected, format!("K=1 phi({w})"));
    }
    assert_eq!(m.topic_weights(), &[1.0]);

    for seed in SEPARATION_SEEDS {
        let corpus = two_vocabulary_corpus(seed);
        let m = fit_lda(&corpus, LdaParams::new(2).with_seed(seed)).unwrap();
        let prefixes: Vec<char> = (1..=2)
            .map(|t| {
                let top = top_terms(&m, t, 5).unwrap();
                let first = top[0].0.chars().next().unwrap();
                assert!(
                    top.iter().all(|(w, _)| w.starts_with(first)),
                    "seed {seed}, topic {t} mixes vocabularies: {top:?}"
                );
                first
            })
            .collect();
        assert_ne!(prefixes[0], prefixes[1], "seed {seed}: both topics on one vocabulary");
    }
    format!("K=1 analytic over {} terms; separation on {} seeds", m.vocabulary().len(), SEPARATION_SEEDS.len())
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> String {
    let reference = junk_topic_reference(81);
    let model = fit_lda(&reference, LdaParams::new(3).with_seed(81)).unwrap();
    let tops: Vec<Vec<String>> = (1..=3)
        .map(|t| top_terms(&model, t, 10).unwrap().into_iter().map(|x| x.0).collect())
        .collect();
    let junk = (1..=3)
        .max_by_key(|&t| tops[t - 1].iter().filter(|w| w.starts_with("eng")).count())
        .unwrap();
    assert!(
        tops[junk - 1][..5].iter().all(|w| w.starts_with("eng")),
        "no isolated junk topic: {tops:?}"
    );
    let others: BTreeSet<&String> = (1..=3).filter(|&t| t != junk).flat_map(|t| &tops[t - 1]).collect();
    let exclusive: BTreeSet<&String> = tops[junk - 1].iter().filter(|w| !others.contains(w)).collect();

    let stats = TermStats::new(&reference);
    let n = 40;
    let before = extract_dictionary_tm(&model, &stats, n).unwrap();
    let pruned = exclude_topics(&model, &BTreeSet::from([junk])).unwrap();
    let after = extract_dictionary_tm(&pruned, &stats, n).unwrap();
    let in_before = exclusive.iter().filter(|w| before.get(w).is_some()).count();
    let in_after: Vec<&&String> = exclusive.iter().filter(|w| after.get(w).is_some()).collect();
    assert!(in_before > 0, "junk terms absent even before exclusion");
    assert!(in_after.is_empty(), "junk terms survive exclusion: {in_after:?}");
    format!("topic {junk} excluded: {in_before} of {} exclusive junk terms removed", exclusive.len())
}

// ---------------------------------------------------------------- 9

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_9() -> String {
    let dir = tempfile::tempdir().unwrap();
    planted_fixture(91).write_to(dir.path()).unwrap();
    let out = dir.path().join("out");
    let mut config = PipelineConfig::default();
    config.reference = Some(dir.path().join("reference.jsonl"));
    config.generic = Some(dir.path().join("generic.jsonl"));
    config.target = Some(dir.path().join("target.jsonl"));
    config.output = out.clone();
    config.topics = 3;
    config.iterations = 200;
    config.seed = 9;
    config.top_m = 10;
    run_pipeline(&config).unwrap();
    let first = snapshot(&out);
    fs::remove_dir_all(&out).unwrap();
    run_pipeline(&config).unwrap();
    let second = snapshot(&out);
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (name, bytes) in &first {
        assert!(bytes == &second[name], "{name} differs between runs");
    }

    let reread = PipelineConfig::load(&out.join("manifest.txt")).unwrap();
    assert_eq!(reread, config, "manifest reproduces the configuration");

    let mut round_trips = 0;
    for label in ["tm", "tfidf"] {
        let path = out.join(format!("dict_{label}.tsv"));
        let d = read_dictionary(&path).unwrap();
        let mut buf = Vec::new();
        d.write_tsv(&mut buf).unwrap();
        assert!(buf == first[&format!("dict_{label}.tsv")], "dictionary {label} round trip");
        assert_eq!(Dictionary::read_tsv(buf.as_slice()).unwrap(), d);
        for kind in ["reference", "generic", "filtered"] {
            let name = format!("cooc_{label}_{kind}.tsv");
            let m = read_matrix(&out.join(&name), &d).unwrap();
            let mut buf = Vec::new();
            m.write_tsv(&mut buf).unwrap();
            assert!(buf == first[&name], "{name} round trip");
            assert_eq!(CoocMatrix::read_tsv(buf.as_slice(), &d).unwrap(), m);
            round_trips += 1;
        }
        round_trips += 1;
    }
    let model = read_model(&out.join("model.tsv")).unwrap();
    let mut buf = Vec::new();
    model.write_tsv(&mut buf).unwrap();
    assert!(buf == first["model.tsv"], "model round trip");
    format!("{} artifacts bit-identical, {round_trips} dictionary/matrix files round-trip", first.len())
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> String {
    let p = planted();
    let inputs: Vec<SweepInput<'_>> = p.dicts.iter().map(|(dict, matrix)| SweepInput { dict, matrix }).collect();
    let set = generate_sweep(&p.fixture.target, &inputs, &default_alphas(), 2000, 0.7).unwrap();
    assert_eq!(set.systems().len(), SWEEP_SYSTEMS);
    let ids: BTreeSet<&str> = set.systems().iter().map(|s| s.system_id()).collect();
    assert_eq!(ids.len(), SWEEP_SYSTEMS, "system ids are unique");
    for label in ["tm", "tfidf"] {
        assert_eq!(ids.iter().filter(|id| id.starts_with(&format!("{label}:"))).count(), 17);
    }
    let one = generate_sweep(&p.fixture.target, &inputs[..1], &[0.0], 2000, 0.7).unwrap();
    assert_eq!(one.systems().len(), 2);
    assert_eq!(set.biased_ids().len(), PLANTED_BIASED);
    format!("{SWEEP_SYSTEMS} systems, biased subset {:?}", set.biased_ids())
}

// ---------------------------------------------------------------- harness

static LAST_PANIC: Mutex<Option<String>> = Mutex::new(None);

fn main() {
    panic::set_hook(Box::new(|info| {
        let msg = info
            .payload()
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| info.payload().downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        let at = info.location().map(|l| format!(" at {}:{}", l.file(), l.line())).unwrap_or_default();
        *LAST_PANIC.lock().unwrap() = Some(format!("{msg}{at}"));
    }));

    let criteria: [(u32, &str, Duration, fn() -> String); 10] = [
        (1, "closed-form oracles", BUDGET_ORACLES, criterion_1),
        (2, "alpha=0 equivalence", BUDGET_DEFAULT, criterion_2),
        (3, "co-occurrence properties", BUDGET_DEFAULT, criterion_3),
        (4, "condorcet oracle", BUDGET_CONDORCET, criterion_4),
        (5, "MAP properties", BUDGET_DEFAULT, criterion_5),
        (6, "planted-relevance replication", BUDGET_PLANTED, criterion_6),
        (7, "topic-model sanity", BUDGET_DEFAULT, criterion_7),
        (8, "topic exclusion", BUDGET_DEFAULT, criterion_8),
        (9, "determinism and persistence", BUDGET_DEFAULT, criterion_9),
        (10, "sweep cardinality", BUDGET_DEFAULT, criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || f == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        match result {
            Ok(detail) if elapsed <= budget => {
                println!("criterion {n:>2} PASS  {name} ({elapsed:.2?}): {detail}");
            }
            Ok(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: took {elapsed:.2?}, budget {budget:?} ({detail})");
            }
            Err(_) => {
                failed += 1;
                let msg = LAST_PANIC.lock().unwrap().take().unwrap_or_default();
                println!("criterion {n:>2} FAIL  {name} ({elapsed:.2?}): {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
