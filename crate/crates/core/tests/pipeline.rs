use sftm::baseline::brute_force_matching;
use sftm::graph::Side;
use sftm::similarity::{initial_similarity, propagate};
use sftm::tree::parse_html;
use sftm::{MatchGraph, NodeId, SftmParams, match_trees, matching_cost};

fn id(i: usize) -> NodeId {
    NodeId::from_index(i)
}

// T1: div#main > p.intro, p.body        T2: div#main > p.body, p.intro
//
// div tokens {tag:div, attr:id, val:main, xpath:/div} appear once in T1.
// tag:p and attr:class appear twice, every other p token once.
// Each p pair shares tag:p, attr:class and exactly one of {class value, xpath}.
#[test]
fn swapped_siblings_by_hand() {
    let t1 = parse_html(br#"<div id="main"><p class="intro"></p><p class="body"></p></div>"#).unwrap();
    let t2 = parse_html(br#"<div id="main"><p class="body"></p><p class="intro"></p></div>"#).unwrap();
    let params = SftmParams::default();

    let (l3, l15) = (3f64.ln(), 1.5f64.ln());
    let s0 = initial_similarity(&t1, &t2, &params);
    assert_eq!(s0.len(), 5);
    assert!((s0.get(id(0), id(0)) - 4.0 * l3).abs() < 1e-12);
    for n in 1..3 {
        assert_eq!(s0.get(id(n), id(0)), 0.0);
        for m in 1..3 {
            assert!((s0.get(id(n), id(m)) - (2.0 * l15 + l3)).abs() < 1e-12);
        }
    }

    let sp = propagate(&s0, &t1, &t2, &params);
    let p_score = 2.0 * l15 + l3 + 0.5 * 4.0 * l3;
    assert!((sp.get(id(1), id(2)) - p_score).abs() < 1e-12);

    let g = MatchGraph::build(&sp);
    assert_eq!(g.edge_count(), 5);
    assert_eq!(g.neighbors(Side::Source, id(0)).len(), 1);
    assert_eq!(g.neighbors(Side::Target, id(2)).len(), 2);

    let best = 1.0 / (1.0 + 4.0 * l3) + 2.0 / (1.0 + p_score);
    let exact = brute_force_matching(&g, params.no_match_cost).unwrap();
    assert!((matching_cost(&exact, 1.0).unwrap() - best).abs() < 1e-12);

    let out = match_trees(&t1, &t2, &params).unwrap();
    assert_eq!(out.matching.pairs().len(), 3);
    assert!((out.cost - best).abs() < 1e-12);
}

#[test]
fn identical_pages_match_themselves() {
    let html = br#"<html><head><title>x</title></head><body>
        <ul class="menu"><li><a href="/a">a</a></li><li><a href="/b">b</a></li></ul>
        <div id="content"><p>one</p><p>two</p></div></body></html>"#;
    let t = parse_html(html).unwrap();
    let out = match_trees(&t, &t, &SftmParams::default()).unwrap();
    assert_eq!(out.matching.pairs().len(), t.size());
    assert!(out.matching.pairs().iter().all(|p| p.n == p.m));
}
