mod common;

use common::*;
use proptest::prelude::*;
use venroute::accessibility::prune_unreachable;
use venroute::paths::{enumerate_sequences, expand_to_paths, f_bound, JunctionSequence};
use venroute::prelude::*;

fn j(i: u32) -> JunctionId {
    JunctionId(i)
}

fn pruned(inst: &Instance) -> AccessibilityGraph {
    let acc = AccessibilityGraph::build(&inst.net, &inst.fleet);
    prune_unreachable(&inst.net, &acc, inst.target)
        .unwrap()
        .graph
}

/// Complete road digraph on `n` junctions with one single-arc route per arc.
fn complete(n: u32) -> Instance {
    let arcs: Vec<(u32, u32)> = (0..n)
        .flat_map(|t| (0..n).filter(move |&h| h != t).map(move |h| (t, h)))
        .collect();
    let net = network(n, &arcs, 600.0);
    let idx: Vec<[u32; 1]> = (0..arcs.len() as u32).map(|i| [i]).collect();
    let routes: Vec<(&[u32], f64)> = idx.iter().map(|a| (&a[..], 0.1)).collect();
    let fleet = fleet(&net, &routes);
    Instance {
        net,
        fleet,
        source: j(0),
        target: j(n - 1),
    }
}

#[test]
fn complete_four_junction_digraph_has_five_sequences() {
    let inst = complete(4);
    let g = pruned(&inst);
    let found = enumerate_sequences(&g, j(0), j(3), DEFAULT_PATH_CAP).unwrap();
    let expected: Vec<JunctionSequence> = [
        vec![0, 1, 2, 3],
        vec![0, 1, 3],
        vec![0, 2, 1, 3],
        vec![0, 2, 3],
        vec![0, 3],
    ]
    .into_iter()
    .map(|v| JunctionSequence(v.into_iter().map(j).collect()))
    .collect();
    assert_eq!(found.sequences, expected);
    assert_eq!(found.sequences.len() as u128, f_bound(3));
}

#[test]
fn complete_digraphs_meet_the_bound() {
    for n in 2..=7 {
        let inst = complete(n);
        let g = pruned(&inst);
        let found = enumerate_sequences(&g, j(0), j(n - 1), DEFAULT_PATH_CAP).unwrap();
        assert_eq!(
            found.sequences.len() as u128,
            f_bound(n as u64 - 1),
            "n = {n}"
        );
    }
}

#[test]
fn single_arc_and_unreachable_target() {
    let net = network(3, &[(0, 1), (2, 1)], 600.0);
    let fl = fleet(&net, &[(&[0], 0.1)]);
    let acc = AccessibilityGraph::build(&net, &fl);
    let g = prune_unreachable(&net, &acc, j(1)).unwrap().graph;
    let seqs = enumerate_sequences(&g, j(0), j(1), 10).unwrap().sequences;
    assert_eq!(seqs, vec![JunctionSequence(vec![j(0), j(1)])]);

    // nothing carries energy into 2
    let g = prune_unreachable(&net, &acc, j(2)).unwrap().graph;
    assert!(enumerate_sequences(&g, j(0), j(2), 10)
        .unwrap()
        .sequences
        .is_empty());
    let set = enumerate_paths(&g, j(0), j(2), &net, &fl, 10).unwrap();
    assert!(set.is_empty() && set.complete);
}

#[test]
fn endpoint_errors() {
    let inst = complete(3);
    let g = pruned(&inst);
    assert!(matches!(
        enumerate_sequences(&g, j(1), j(1), 10),
        Err(Error::SameEndpoints(_))
    ));
    assert!(matches!(
        enumerate_sequences(&g, j(0), j(9), 10),
        Err(Error::UnknownJunction(_))
    ));
    assert!(matches!(
        enumerate_paths(&g, j(0), j(0), &inst.net, &inst.fleet, 10),
        Err(Error::SameEndpoints(_))
    ));
}

#[test]
fn four_index_combinations() {
    let net = network(3, &[(0, 1), (1, 2)], 600.0);
    let fl = fleet(&net, &[(&[0], 0.1), (&[0], 0.2), (&[1], 0.1), (&[1], 0.3)]);
    let acc = AccessibilityGraph::build(&net, &fl);
    let seq = [JunctionSequence(vec![j(0), j(1), j(2)])];
    let set = expand_to_paths(&seq, &acc, &net, &fl, 100).unwrap();
    assert_eq!(set.len(), 4);
    let routes: Vec<Vec<u32>> = set
        .paths
        .iter()
        .map(|p| p.routes().map(|r| r.0).collect())
        .collect();
    assert_eq!(routes, vec![vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3]]);
}

#[test]
fn repeated_index_is_dropped() {
    // r0 spans both hops, so (r0, r0) is the one combination to drop
    let net = network(3, &[(0, 1), (1, 2)], 600.0);
    let fl = fleet(&net, &[(&[0, 1], 0.1), (&[0], 0.1), (&[1], 0.1)]);
    let acc = AccessibilityGraph::build(&net, &fl);
    let seq = [JunctionSequence(vec![j(0), j(1), j(2)])];
    let set = expand_to_paths(&seq, &acc, &net, &fl, 100).unwrap();
    assert_eq!(set.len(), 3);
    assert!(set
        .paths
        .iter()
        .all(|p| p.routes().collect::<Vec<_>>() != [RouteId(0); 2]));
}

#[test]
fn missing_index_set_is_an_error() {
    let net = network(3, &[(0, 1), (1, 2)], 600.0);
    let fl = fleet(&net, &[(&[0], 0.1)]);
    let acc = AccessibilityGraph::build(&net, &fl);
    let seq = [JunctionSequence(vec![j(0), j(1), j(2)])];
    assert!(matches!(
        expand_to_paths(&seq, &acc, &net, &fl, 100),
        Err(Error::Inconsistent(_))
    ));
}

#[test]
fn overlapping_routes_give_three_paths() {
    // s=0, a=1, b=2, c=3, t=4; r0 = s a b c, r1 = a b c t
    let net = network(5, &[(0, 1), (1, 2), (2, 3), (3, 4)], 600.0);
    let fl = fleet(&net, &[(&[0, 1, 2], 0.1), (&[1, 2, 3], 0.1)]);
    let set = full_path_set(&net, &fl, j(0), j(4), 100).unwrap();
    let shape: Vec<Vec<(u32, usize, usize)>> = set
        .paths
        .iter()
        .map(|p| {
            p.segments()
                .iter()
                .map(|s| (s.route.0, s.start, s.end))
                .collect()
        })
        .collect();
    assert_eq!(
        shape,
        vec![
            vec![(0, 0, 0), (1, 0, 2)],
            vec![(0, 0, 1), (1, 1, 2)],
            vec![(0, 0, 2), (1, 2, 2)],
        ]
    );
    assert!(set
        .paths
        .iter()
        .all(|p| p.arc_count() == 4 && p.cycles() == 2));
}

#[test]
fn physical_revisits_are_excluded() {
    // r0 = 0 1 2, r1 = 2 1 3: <0,2,3> via r0 then r1 would pass 1 twice
    let net = network(4, &[(0, 1), (1, 2), (2, 1), (1, 3)], 600.0);
    let fl = fleet(&net, &[(&[0, 1], 0.1), (&[2, 3], 0.1)]);
    let set = full_path_set(&net, &fl, j(0), j(3), 100).unwrap();
    let seqs: Vec<Vec<u32>> = set
        .paths
        .iter()
        .map(|p| p.junction_sequence(&fl).iter().map(|x| x.0).collect())
        .collect();
    assert_eq!(seqs, vec![vec![0, 1, 3]]);
}

#[test]
fn cap_overflow_is_reported() {
    let inst = complete(7);
    let g = pruned(&inst);
    assert!(matches!(
        enumerate_sequences(&g, j(0), j(6), 50),
        Err(Error::EnumerationCap { cap: 50 })
    ));
    assert!(matches!(
        enumerate_paths(&g, j(0), j(6), &inst.net, &inst.fleet, 50),
        Err(Error::EnumerationCap { cap: 50 })
    ));
}

#[test]
fn bounded_matches_full_when_limit_is_loose() {
    let inst = complete(5);
    let g = pruned(&inst);
    let full = enumerate_paths(&g, j(0), j(4), &inst.net, &inst.fleet, 1000).unwrap();
    let sub = enumerate_bounded(
        &g,
        j(0),
        j(4),
        &inst.net,
        &inst.fleet,
        &BoundedConfig::new(1000, 3),
    )
    .unwrap();
    assert!(sub.complete);
    assert_eq!(keys(&sub, &inst.fleet), keys(&full, &inst.fleet));

    let exact = BoundedConfig::new(full.len(), 3);
    let sub = enumerate_bounded(&g, j(0), j(4), &inst.net, &inst.fleet, &exact).unwrap();
    assert!(sub.complete);
    assert_eq!(sub.len(), full.len());
}

#[test]
fn bounded_limit_one_and_determinism() {
    let inst = complete(6);
    let g = pruned(&inst);
    let one = enumerate_bounded(
        &g,
        j(0),
        j(5),
        &inst.net,
        &inst.fleet,
        &BoundedConfig::new(1, 9),
    )
    .unwrap();
    assert_eq!(one.len(), 1);
    assert!(!one.complete);

    let cfg = BoundedConfig::new(20, 42);
    let a = enumerate_bounded(&g, j(0), j(5), &inst.net, &inst.fleet, &cfg).unwrap();
    let b = enumerate_bounded(&g, j(0), j(5), &inst.net, &inst.fleet, &cfg).unwrap();
    assert_eq!(keys(&a, &inst.fleet), keys(&b, &inst.fleet));
    assert_eq!(a.len(), 20);

    let other = enumerate_bounded(
        &g,
        j(0),
        j(5),
        &inst.net,
        &inst.fleet,
        &BoundedConfig::new(20, 43),
    )
    .unwrap();
    assert_ne!(keys(&a, &inst.fleet), keys(&other, &inst.fleet));

    let full: std::collections::BTreeSet<_> = keys(
        &enumerate_paths(&g, j(0), j(5), &inst.net, &inst.fleet, 10_000).unwrap(),
        &inst.fleet,
    )
    .into_iter()
    .collect();
    assert!(keys(&a, &inst.fleet).iter().all(|k| full.contains(k)));
}

#[test]
fn bounded_limits_mark_the_set_incomplete() {
    let inst = complete(5);
    let g = pruned(&inst);
    let mut cfg = BoundedConfig::new(1000, 1);
    cfg.max_hops = Some(1);
    let hop1 = enumerate_bounded(&g, j(0), j(4), &inst.net, &inst.fleet, &cfg).unwrap();
    assert_eq!(hop1.len(), 1);
    assert!(!hop1.complete);

    // 600 s per arc: a 1200 s horizon admits only the direct arc
    let mut cfg = BoundedConfig::new(1000, 1);
    cfg.horizon_s = Some(1200.0);
    let near = enumerate_bounded(&g, j(0), j(4), &inst.net, &inst.fleet, &cfg).unwrap();
    assert_eq!(near.len(), 1);
    assert!(near.paths[0].delay() < 1200.0);
    assert!(!near.complete);

    let mut cfg = BoundedConfig::new(1000, 1);
    cfg.max_steps = Some(3);
    let short = enumerate_bounded(&g, j(0), j(4), &inst.net, &inst.fleet, &cfg).unwrap();
    assert!(!short.complete);

    assert!(matches!(
        enumerate_bounded(
            &g,
            j(0),
            j(4),
            &inst.net,
            &inst.fleet,
            &BoundedConfig::new(0, 1)
        ),
        Err(Error::InvalidParameter(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sequences_match_simple_path_oracle(seed in any::<u64>()) {
        let inst = random_instance(seed, 7);
        let g = pruned(&inst);
        let found = enumerate_sequences(&g, inst.source, inst.target, DEFAULT_PATH_CAP).unwrap();
        let got: Vec<Vec<JunctionId>> = found.sequences.iter().map(|s| s.0.clone()).collect();
        prop_assert_eq!(got, oracle_sequences(&g, inst.source, inst.target));

        let n = inst.net.junction_count() as u64;
        prop_assert!(found.sequences.len() as u128 <= f_bound(n - 1));
        // termination budget
        prop_assert!(found.expansions as u128 <= f_bound(n - 1) * n as u128);
    }

    #[test]
    fn paths_match_brute_force(seed in any::<u64>()) {
        let inst = random_instance(seed, 7);
        let g = pruned(&inst);
        let fused = enumerate_paths(&g, inst.source, inst.target, &inst.net, &inst.fleet, DEFAULT_PATH_CAP).unwrap();
        prop_assert!(fused.complete);
        prop_assert_eq!(keys(&fused, &inst.fleet), oracle_paths(&inst, &g));

        let seqs = enumerate_sequences(&g, inst.source, inst.target, DEFAULT_PATH_CAP).unwrap();
        if !seqs.sequences.is_empty() {
            let two_stage = expand_to_paths(&seqs.sequences, &g, &inst.net, &inst.fleet, DEFAULT_PATH_CAP).unwrap();
            prop_assert_eq!(keys(&two_stage, &inst.fleet), keys(&fused, &inst.fleet));
        }

        let n = inst.net.junction_count();
        for p in &fused.paths {
            prop_assert!(p.arc_count() < n);
            prop_assert!(p.cycles() < n);
            // re-validates every invariant
            prop_assert!(EnergyPath::new(p.source(), p.target(), p.segments().to_vec(), &inst.net, &inst.fleet).is_ok());
        }
    }

    #[test]
    fn expansion_within_index_set_product(seed in any::<u64>()) {
        let inst = random_instance(seed, 6);
        let g = pruned(&inst);
        let seqs = enumerate_sequences(&g, inst.source, inst.target, DEFAULT_PATH_CAP).unwrap();
        for seq in &seqs.sequences {
            let product: usize = seq.0.windows(2).map(|w| g.index_set(w[0], w[1]).unwrap().len()).product();
            let set = expand_to_paths(std::slice::from_ref(seq), &g, &inst.net, &inst.fleet, DEFAULT_PATH_CAP).unwrap();
            prop_assert!(set.len() <= product);
        }
    }

    #[test]
    fn bounded_is_a_deterministic_subset(seed in any::<u64>(), limit in 1usize..12) {
        let inst = random_instance(seed, 7);
        let g = pruned(&inst);
        let full = enumerate_paths(&g, inst.source, inst.target, &inst.net, &inst.fleet, DEFAULT_PATH_CAP).unwrap();
        let cfg = BoundedConfig::new(limit, seed);
        let sub = enumerate_bounded(&g, inst.source, inst.target, &inst.net, &inst.fleet, &cfg).unwrap();
        let again = enumerate_bounded(&g, inst.source, inst.target, &inst.net, &inst.fleet, &cfg).unwrap();
        prop_assert_eq!(keys(&sub, &inst.fleet), keys(&again, &inst.fleet));
        prop_assert_eq!(sub.len(), limit.min(full.len()));
        prop_assert_eq!(sub.complete, full.len() <= limit);
        let all: std::collections::BTreeSet<_> = keys(&full, &inst.fleet).into_iter().collect();
        for k in keys(&sub, &inst.fleet) {
            prop_assert!(all.contains(&k));
        }
    }
}

#[test]
fn random_instances_exercise_enumeration() {
    let sizes: Vec<usize> = (0..200)
        .map(|seed| {
            let inst = random_instance(seed, 7);
            let g = pruned(&inst);
            enumerate_paths(
                &g,
                inst.source,
                inst.target,
                &inst.net,
                &inst.fleet,
                DEFAULT_PATH_CAP,
            )
            .unwrap()
            .len()
        })
        .collect();
    let rich = sizes.iter().filter(|&&n| n >= 5).count();
    eprintln!(
        "paths >= 5 in {rich}/200, max {}",
        sizes.iter().max().unwrap()
    );
    assert!(rich >= 40, "only {rich} instances with five or more paths");
}
