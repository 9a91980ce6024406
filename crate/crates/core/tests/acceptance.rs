//! Acceptance criteria 1–11. Prints one PASS/FAIL line per criterion and
//! exits non-zero only when the set of failures differs from `EXPECTED_FAIL`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use relgraph::bass_serre::{build_tree_ball, tree_vertex_key};
use relgraph::cayley_abels::{coset_graph_ball, CosetBall, FiniteHandle, GogGroup, Integers, Lattice2, LatticeLine, OrbitTag, SubgroupHandle, TrivialKernel};
use relgraph::cli::run_str;
use relgraph::complexes::{bounded_trivial, grid_ball, omega_k, pi1_presentation, AbelianGroup, Triviality};
use relgraph::fineness::{attach_coset_orbit, attach_pair_orbit, fineness_report, qi_certificate, wz_chain, FinenessVerdict, LocalGraph, ZRule};
use relgraph::finite_groups::FiniteGroup;
use relgraph::graph::Graph;
use relgraph::graph_of_groups::{amalgam_word, fixtures, GraphOfGroups, GroupWord};
use relgraph::small_cancellation::{
    check_cprime, check_m_thin, claim_audit, compute_m, edge_stabilizer, pieces, presentation_complex_ball, symmetrize, Amalgam, Dehn, Rational, Syllable,
};

/// Criteria that cannot pass as stated; see the project notes.
const EXPECTED_FAIL: &[usize] = &[6];

type Mat = [[i128; 2]; 2];
type Check = fn() -> (bool, String);

fn mat_mul(x: Mat, y: Mat) -> Mat {
    let mut z = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            z[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    z
}

fn mat_pow(x: Mat, k: usize) -> Mat {
    (0..k).fold([[1, 0], [0, 1]], |acc, _| mat_mul(acc, x))
}

fn sl2_eval(gog: &GraphOfGroups, w: &GroupWord) -> Mat {
    let gen = |v: usize, g: usize| if v == 0 { mat_pow([[0, -1], [1, 0]], g) } else { mat_pow([[0, -1], [1, 1]], g) };
    let mut m = gen(w.start, w.head);
    for &(e, g) in &w.steps {
        m = mat_mul(m, gen(gog.graph().t(e), g));
    }
    m
}

fn random_syllables(rng: &mut ChaCha8Rng, max_len: usize, orders: [usize; 2]) -> Vec<Syllable> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| {
            let s = rng.gen_range(0..2);
            (s, rng.gen_range(0..orders[s]))
        })
        .collect()
}

fn r6() -> Vec<Syllable> {
    vec![(0, 1), (1, 1), (0, 2), (1, 2), (0, 3), (1, 3)]
}

fn tree_cone(r: usize) -> CosetBall<GogGroup> {
    let gog = fixtures::sl2z();
    let g = GogGroup::new(&gog, 0);
    let a: Vec<_> = (0..4).map(|i| g.elem(i)).collect();
    let path = gog.parse_word(&[json!("e"), json!(0), json!("g"), json!(1), json!(0)]).unwrap();
    let b = g.conjugate_vertex_group(&path, 1);
    let hb: Arc<dyn SubgroupHandle<GogGroup>> = Arc::new(FiniteHandle::new("B", b));
    coset_graph_ball(g, a, vec![], vec![hb], r, 1_000_000).unwrap()
}

fn criterion_1() -> (bool, String) {
    let gog = fixtures::sl2z();
    let ball = build_tree_ball(&gog, 0, 6, 1_000_000).unwrap();
    // levels from the indices [C4:C2] = 2 and [C6:C2] = 3
    let idx = [4 / 2, 6 / 2];
    let mut expected = vec![1, idx[0]];
    for d in 2..=6 {
        let parent_type = (d - 1) % 2;
        expected.push(expected[d - 1] * (idx[parent_type] - 1));
    }
    let levels = ball.level_counts();
    let ok = levels == expected && levels == vec![1, 2, 4, 4, 8, 8, 16] && ball.is_tree() && ball.degree_violations().is_empty();
    (ok, format!("levels {levels:?}, oracle {expected:?}"))
}

fn criterion_2() -> (bool, String) {
    let gog = fixtures::sl2z();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut agree = 0;
    let mut equal_pairs = 0;
    let mut sweep = 0;
    let n = 10_000;
    for i in 0..n {
        let x = random_syllables(&mut rng, 10, [4, 6]);
        let y = if i % 2 == 0 {
            random_syllables(&mut rng, 10, [4, 6])
        } else {
            // same element, rewritten with a² = b³ and a⁴ = 1 inserted
            let mut y = x.clone();
            let at = rng.gen_range(0..=y.len());
            let ins: &[Syllable] = if rng.gen_bool(0.5) { &[(0, 2), (1, 3)] } else { &[(0, 1), (0, 3)] };
            y.splice(at..at, ins.iter().copied());
            y
        };
        let (u, w) = (amalgam_word(&gog, 0, &x), amalgam_word(&gog, 0, &y));
        let same = sl2_eval(&gog, &u) == sl2_eval(&gog, &w);
        equal_pairs += same as usize;
        if gog.words_equal(&u, &w).unwrap() == same {
            agree += 1;
        }
        if gog.reduce(&u) == gog.reduce_rtl(&u) {
            sweep += 1;
        }
    }
    (agree == n && sweep == n && equal_pairs >= n / 2, format!("{agree}/{n} agree, {sweep}/{n} sweep-invariant, {equal_pairs} equal pairs"))
}

fn criterion_3() -> (bool, String) {
    let radii: Vec<usize> = (6..=9).collect();
    let balls: Vec<LocalGraph> = (0..=9).map(|r| LocalGraph::from(&tree_cone(r).ball)).collect();
    let family = |r: usize| Ok(balls[r].clone());
    let small = &balls[2];
    let mut queries = 0;
    let mut stable = 0;
    for u in 0..small.labels.len() {
        for v in 0..small.labels.len() {
            if u == v {
                continue;
            }
            for k in 1..=5 {
                let rep = fineness_report(&family, &small.labels[u], &small.labels[v], k, &radii).unwrap();
                queries += 1;
                stable += (rep.verdict == FinenessVerdict::Stable) as usize;
            }
        }
    }
    let coned = |r: usize| {
        let h: Arc<dyn SubgroupHandle<Lattice2>> = Arc::new(LatticeLine::new((1, 0)).unwrap());
        let cb = coset_graph_ball(Lattice2, vec![(0, 0)], vec![(1, 0), (0, 1)], vec![h], r, 1_000_000)?;
        Ok(LocalGraph::from(&cb.ball))
    };
    let rep = fineness_report(&coned, "H0:(0,0)", "H0:(0,1)", 3, &(4..=10).collect::<Vec<_>>()).unwrap();
    let growing = rep.verdict == FinenessVerdict::Growing && rep.cardinalities.windows(2).all(|w| w[1] > w[0]) && rep.witnesses.len() >= 3;
    (stable == queries && growing, format!("tree: {stable}/{queries} STABLE; coned ℤ²: {:?}, {} witnesses", rep.cardinalities, rep.witnesses.len()))
}

fn criterion_4() -> (bool, String) {
    let cb = tree_cone(6);
    let h = FiniteHandle::new("B", cb.peripherals[0].elements(&cb.group).unwrap());
    let att = attach_coset_orbit(&cb, 0, &h).unwrap();
    let lg = LocalGraph::from(&cb.ball);
    let a = 1;
    let dist = lg.graph.distances(a);
    let mut runs = 0;
    let mut good = 0;
    let mut rejected = 0;
    for b in (0..lg.graph.vertex_count()).filter(|&b| b != a && dist[b].is_some_and(|d| d <= 3)) {
        for k in 1..=3 {
            let chain = wz_chain(&cb, &att, a, b, k, ZRule::Standard).unwrap();
            runs += 1;
            good += (chain.containments_hold && chain.finite && chain.n == k * att.ell()) as usize;
        }
    }
    let far = dist.iter().position(|d| *d == Some(3)).unwrap();
    let bad = wz_chain(&cb, &att, a, far, 3, ZRule::CornersOnly).unwrap();
    rejected += (!bad.containments_hold) as usize;
    (good == runs && rejected == 1, format!("{good}/{runs} chains hold (ℓ = {}), corrupted rule rejected: {}", att.ell(), rejected == 1))
}

fn criterion_5() -> (bool, String) {
    let cb = coset_graph_ball(Integers, vec![0], vec![1], vec![], 12, 10_000).unwrap();
    let at = |x: i64| cb.locate(OrbitTag::Base, &x).unwrap().unwrap();
    let inner: Vec<usize> = (-6..=6).map(at).collect();
    let chords = attach_pair_orbit(&cb, at(0), at(2)).unwrap();
    let cert = qi_certificate(&cb.ball.graph, &chords.delta.graph, chords.gamma_count, &inner, Some(chords.ell()));
    let tight = cert.ell == 2 && cert.ratio == (2, 1) && cert.pairs_checked == 13 * 12 / 2 && cert.counterexample.is_none();
    // every attachment fixture: d_Γ ≤ ℓ·d_Δ with ℓ = max |α|
    let mut fixtures_ok = 0;
    let mut fixtures_total = 0;
    for d in [2, 3, 5] {
        let att = attach_pair_orbit(&cb, at(0), at(d)).unwrap();
        let c = qi_certificate(&cb.ball.graph, &att.delta.graph, att.gamma_count, &inner, Some(att.ell()));
        fixtures_total += 1;
        fixtures_ok += (c.counterexample.is_none() && att.ell() == d as usize) as usize;
    }
    let trivial = FiniteHandle::new("1", vec![0i64]);
    let pendant = attach_coset_orbit(&cb, 0, &trivial).unwrap();
    let c = qi_certificate(&cb.ball.graph, &pendant.delta.graph, pendant.gamma_count, &inner, Some(pendant.ell().max(1)));
    fixtures_total += 1;
    fixtures_ok += c.counterexample.is_none() as usize;
    let tc = tree_cone(6);
    let h = FiniteHandle::new("B", tc.peripherals[0].elements(&tc.group).unwrap());
    let cone = attach_coset_orbit(&tc, 0, &h).unwrap();
    let tin: Vec<usize> = (0..tc.ball.vertex_count()).filter(|&v| tc.ball.vertices[v].depth <= 3).collect();
    let c = qi_certificate(&tc.ball.graph, &cone.delta.graph, cone.gamma_count, &tin, Some(cone.ell()));
    fixtures_total += 1;
    fixtures_ok += c.counterexample.is_none() as usize;
    (
        tight && fixtures_ok == fixtures_total,
        format!(
            "chords ℓ = {} ratio {:?} over {} pairs; {fixtures_ok}/{fixtures_total} attachment fixtures within ℓ",
            cert.ell, cert.ratio, cert.pairs_checked
        ),
    )
}

fn piece_oracle(am: &Amalgam, a: &[Syllable], b: &[Syllable]) -> usize {
    let gog = am.gog();
    let c = gog.edge_image(1);
    (0..=a.len().min(b.len()))
        .rev()
        .find(|&k| {
            let d = gog.reduce(&gog.mul(&gog.inverse(&am.to_word(&a[..k])), &am.to_word(&b[..k]))).word;
            d.steps.is_empty() && c.contains(d.head)
        })
        .unwrap_or(0)
}

fn criterion_6() -> (bool, String) {
    let am = Amalgam::new(&fixtures::c4_free_c6()).unwrap();
    let mut mismatches = 0;
    let mut pairs = 0;
    for m in [1, 12] {
        let s = symmetrize(&am, &am.pow(&r6(), m)).unwrap();
        for (i, j, p) in pieces(&am, &s).pairs {
            pairs += 1;
            if p != piece_oracle(&am, &s.members[i], &s.members[j]) {
                mismatches += 1;
            }
        }
    }
    let lambda = Rational::new(1, 12);
    let r_ok = check_cprime(&am, &r6(), 12, lambda).unwrap();
    let ab = check_cprime(&am, &[(0, 1), (1, 1)], 12, lambda).unwrap();
    let ok = mismatches == 0 && r_ok.holds && !ab.holds;
    (
        ok,
        format!(
            "pieces {}/{} match oracle; C'(1/12) for r^12: {} (piece {}/{}); for (ab)^12: {} (piece {}/{}, expected false)",
            pairs - mismatches,
            pairs,
            r_ok.holds,
            r_ok.max_piece,
            r_ok.relator_length,
            ab.holds,
            ab.max_piece,
            ab.relator_length
        ),
    )
}

fn criterion_7() -> (bool, String) {
    // free product: trivial edge groups force k = 1
    let free = Amalgam::new(&fixtures::c4_free_c6()).unwrap();
    let t_free = compute_m(&free, &r6()).unwrap();
    let free_ok = t_free.k == 1 && t_free.m_const == 6;
    // central amalgamation: C2 is normal in both factors, so every edge stabilizer on the path is C
    let sl = fixtures::sl2z();
    let central = Amalgam::new(&sl).unwrap();
    let c = sl.edge_image(1);
    let normal = c.is_normal() && sl.edge_image(0).is_normal();
    let t_central = compute_m(&central, &[(0, 1), (1, 1)]).unwrap();
    let central_ok = normal && t_central.k == 1;
    // S3 amalgam: C ∩ xCx⁻¹ in S3 by brute force
    let (s3, perms) = FiniteGroup::symmetric(3).unwrap();
    let tr = perms.iter().position(|p| p == &vec![1, 0, 2]).unwrap();
    let cy = perms.iter().position(|p| p == &vec![1, 2, 0]).unwrap();
    let cc = s3.subgroup_generated(&[tr]).unwrap();
    let oracle_k = cc.order() / cc.intersect(&cc.conjugate(cy)).unwrap().order();
    let (gog, three_cycle, refl) = fixtures::s3_amalgam();
    let am = Amalgam::new(&gog).unwrap();
    let t = compute_m(&am, &[(0, three_cycle), (1, refl)]).unwrap();
    let first = edge_stabilizer(&gog, &t.path[1]);
    let fixing = first.iter().filter(|g| t.path.iter().all(|p| tree_vertex_key(&gog, &gog.mul(g, p)) == *p)).count();
    let s3_ok = t.k == 2 && oracle_k == 2 && fixing == t.path_stabilizer_order;
    (
        free_ok && central_ok && s3_ok,
        format!("free k={} M={}; central k={}; S3 k={} (oracle {oracle_k}, fixing {fixing})", t_free.k, t_free.m_const, t_central.k, t.k),
    )
}

fn criterion_8() -> (bool, String) {
    let gog = fixtures::c4_free_c6();
    let am = Amalgam::new(&gog).unwrap();
    let x = presentation_complex_ball(&am, &r6(), 12, 2, &TrivialKernel(&gog)).unwrap();
    let t = compute_m(&am, &r6()).unwrap();
    let interior: Vec<usize> = (0..x.tree.edges.len()).collect();
    let report = check_m_thin(&x, t.m_const);
    let thin = interior.iter().all(|&e| report.counts[e] <= t.m_const);
    let mut audits_ok = 0;
    for &e in &interior {
        let a = claim_audit(&x, e, t.k);
        audits_ok += (a.shift_verified && a.boundary_orbits <= t.r_len && a.injective && a.index_bound_holds) as usize;
    }
    let max = interior.iter().map(|&e| report.counts[e]).max().unwrap_or(0);
    (thin && audits_ok == interior.len(), format!("M = {}, max 2-cells on an edge {max}, claims hold on {audits_ok}/{} edges", t.m_const, interior.len()))
}

fn h1_image(w: &[Syllable]) -> (usize, usize) {
    w.iter().fold((0, 0), |(a, b), &(s, g)| if s == 0 { ((a + g) % 4, b) } else { (a, (b + g) % 6) })
}

fn criterion_9() -> (bool, String) {
    let am = Amalgam::new(&fixtures::c4_free_c6()).unwrap();
    let r12 = am.pow(&r6(), 12);
    // r ↦ (2, 0) in ℤ4 × ℤ6, so r^12 ↦ 0 and H1 of the quotient is ℤ4 × ℤ6
    assert_eq!(h1_image(&r6()), (2, 0));
    let dehn = Dehn::new(&am, symmetrize(&am, &r12).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut kernel_ok = 0;
    for _ in 0..1000 {
        let mut w = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let g = random_syllables(&mut rng, 6, [4, 6]);
            let rel = if rng.gen_bool(0.5) { r12.clone() } else { am.inverse(&r12) };
            w = am.concat(&w, &am.concat(&am.concat(&g, &rel), &am.inverse(&g)));
        }
        let res = dehn.reduce(&w);
        kernel_ok += (res.reduced.is_empty() && dehn.replay(&res) == am.canonical(&w)) as usize;
    }
    let mut outside_ok = 0;
    let mut produced = 0;
    while produced < 1000 {
        let w = am.canonical(&random_syllables(&mut rng, 30, [4, 6]));
        if h1_image(&w) == (0, 0) {
            continue;
        }
        produced += 1;
        outside_ok += (!dehn.reduce(&w).reduced.is_empty()) as usize;
    }
    (kernel_ok == 1000 && outside_ok == 1000, format!("kernel {kernel_ok}/1000 reduce to empty; non-kernel {outside_ok}/1000 stay nonempty"))
}

fn verdict(g: &Graph, complete: &[bool], k: usize) -> Triviality {
    let (p, _) = pi1_presentation(&omega_k(g, complete, k, 100_000).unwrap()).unwrap();
    bounded_trivial(&p, 10_000)
}

fn criterion_10() -> (bool, String) {
    let c3 = Graph::cycle(3);
    let c4 = Graph::cycle(4);
    let (grid, _, complete) = grid_ball(4);
    let a = verdict(&c3, &[true; 3], 3);
    let b = verdict(&c4, &[true; 4], 3);
    let c = verdict(&grid, &complete, 4);
    let ok = matches!(a, Triviality::Yes { .. })
        && b == Triviality::No { h1: AbelianGroup { free_rank: 1, torsion: vec![] } }
        && matches!(c, Triviality::Yes { .. });
    (ok, format!("Ω3(C3) {a:?}; Ω3(C4) {b:?}; Ω4(grid) {c:?}"))
}

fn criterion_11() -> (bool, String) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut specs: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let n = p.file_name().unwrap().to_string_lossy().to_string();
            n.ends_with(".json") && !n.contains(".report.") && !n.contains(".ball.")
        })
        .collect();
    specs.sort();
    let mut identical = 0;
    for spec in &specs {
        let text = fs::read_to_string(spec).unwrap();
        let runs: Vec<_> = (0..3).map(|_| run_str(&text)).collect();
        let same = runs.iter().all(|r| r.artifacts == runs[0].artifacts && r.code == 0);
        let golden = runs[0].artifacts.iter().all(|(p, body)| fs::read_to_string(dir.join(p)).map(|g| &g == body).unwrap_or(false));
        identical += (same && golden) as usize;
    }
    (identical == specs.len(), format!("{identical}/{} golden jobs byte-identical across 3 runs", specs.len()))
}

fn main() {
    let criteria: [(usize, &str, Check); 11] = [
        (1, "Bass–Serre biregularity", criterion_1),
        (2, "normal-form oracle equivalence", criterion_2),
        (3, "fineness positive/negative", criterion_3),
        (4, "W/Z chain", criterion_4),
        (5, "QI bound", criterion_5),
        (6, "small cancellation", criterion_6),
        (7, "constant M", criterion_7),
        (8, "M-thinness", criterion_8),
        (9, "Dehn algorithm", criterion_9),
        (10, "Ω_k verdicts", criterion_10),
        (11, "determinism", criterion_11),
    ];
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        let (ok, detail) = f();
        println!("criterion {n:>2} {}: {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(n);
        }
    }
    if failed != EXPECTED_FAIL {
        eprintln!("unexpected outcome: failed {failed:?}, expected {EXPECTED_FAIL:?}");
        std::process::exit(1);
    }
}
