mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pdaseq::cachesim::{all_demands, deliver, place, run_round, FileLibrary};
use pdaseq::graph::{
    graph_to_pda, greedy_strong_color, pda_to_graph, subsample, BipartiteColoredGraph, ColoredEdge, EdgeOrder,
};
use pdaseq::neural::{decode_step, encode, gru_step, GruParams, ModelConfig, ModelParams};
use pdaseq::pda::{parse_text, rate};
use pdaseq::seqcodec::{
    assemble_array, colors_of, extract_edge_sequence, read_jsonl, write_jsonl, AdjacencyMatrix, ColorSequence,
    TrainingPair,
};
use pdaseq::{construct_mn_pda, verify, Entry, Grid, Pda};

use common::{brute_force, from_rows, random_rows, random_valid_rows, to_rows};

fn valid_pda(f: usize, k: usize, seed: u64) -> Pda {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Pda::new(from_rows(&random_valid_rows(&mut rng, f, k))).unwrap()
}

fn raw_graph(grid: &Grid) -> BipartiteColoredGraph {
    let mut edges = Vec::new();
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            if let Entry::Color(s) = grid.get(r, c) {
                edges.push(ColoredEdge { user: c, packet: r, color: Some(s) });
            }
        }
    }
    BipartiteColoredGraph::new(grid.cols(), grid.rows(), edges).unwrap()
}

#[test]
fn mn_family_is_valid_with_memory_ratio_t_over_k() {
    for k in 2..=8 {
        for t in 1..k {
            let p = construct_mn_pda(k, t).unwrap();
            assert!(verify(p.grid()).valid);
            assert_eq!(rate(&p).memory_ratio, num_rational::Ratio::new(t as u64, k as u64));
        }
    }
}

proptest! {
    #[test]
    fn verifier_agrees_with_oracle(f in 1usize..=6, k in 1usize..=6, seed: u64, valid_bias: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = if valid_bias { random_valid_rows(&mut rng, f, k) } else { random_rows(&mut rng, f, k) };
        prop_assert_eq!(verify(&from_rows(&rows)).valid, brute_force(&rows).valid);
    }

    #[test]
    fn memory_ratio_matches_every_column(f in 1usize..=6, k in 1usize..=6, seed: u64) {
        let p = valid_pda(f, k, seed);
        for c in 0..k {
            prop_assert_eq!(rate(&p).memory_ratio, num_rational::Ratio::new(p.grid().star_count(c) as u64, f as u64));
        }
    }

    #[test]
    fn text_format_round_trips(f in 1usize..=6, k in 1usize..=6, seed: u64) {
        let p = valid_pda(f, k, seed);
        let text = p.to_text();
        let parsed = parse_text(&text).unwrap().into_pda().unwrap();
        prop_assert_eq!(&parsed, &p);
        prop_assert_eq!(parsed.to_text(), text);
    }

    #[test]
    fn canonical_form_is_idempotent(f in 1usize..=6, k in 1usize..=6, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = from_rows(&random_rows(&mut rng, f, k));
        let c = g.canonicalize();
        prop_assert!(c.is_canonical());
        prop_assert_eq!(c.canonicalize(), c.clone());
        prop_assert_eq!(verify(&c).valid, verify(&g).valid);
    }

    #[test]
    fn graph_round_trip(f in 1usize..=6, k in 1usize..=6, seed: u64) {
        let p = valid_pda(f, k, seed);
        let g = pda_to_graph(p.grid()).unwrap();
        prop_assert_eq!(graph_to_pda(&g).unwrap(), p);
        prop_assert_eq!(BipartiteColoredGraph::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn strong_coloring_iff_pda(f in 1usize..=6, k in 1usize..=6, seed: u64, valid_bias: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = random_valid_rows(&mut rng, f, k);
        if !valid_bias {
            // merge two colors, keeping the star pattern and hence C1
            for cell in rows.iter_mut().flatten() {
                if *cell == Some(2) {
                    *cell = Some(1);
                }
            }
        }
        let grid = from_rows(&rows);
        prop_assert_eq!(raw_graph(&grid).is_strong_coloring().unwrap(), verify(&grid).valid);
    }

    #[test]
    fn subsampling_stays_valid(f in 2usize..=6, k in 1usize..=6, seed: u64, pick: usize) {
        let p = valid_pda(f, k, seed);
        let degree = p.f() - p.z();
        prop_assume!(degree >= 2);
        let delta = 1 + pick % (degree - 1);
        let sub = subsample(&pda_to_graph(p.grid()).unwrap(), delta, seed).unwrap();
        let q = graph_to_pda(&sub).unwrap();
        prop_assert!(verify(q.grid()).valid);
        prop_assert_eq!(q.f() - q.z(), delta);
    }

    #[test]
    fn greedy_coloring_is_strong(f in 1usize..=6, k in 1usize..=6, seed: u64, shuffle: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_rows(&mut rng, f, k);
        let pairs: Vec<(usize, usize)> = (0..f)
            .flat_map(|r| (0..k).map(move |c| (c, r)))
            .filter(|&(c, r)| rows[r][c].is_some())
            .collect();
        let g = BipartiteColoredGraph::uncolored(k, f, pairs).unwrap();
        let order = if shuffle { EdgeOrder::Shuffled { seed } } else { EdgeOrder::Lexicographic };
        let colored = greedy_strong_color(&g, order);
        prop_assert!(colored.is_strong_coloring().unwrap());
        prop_assert_eq!(colored.without_colors(), g.without_colors());
    }

    #[test]
    fn sequence_round_trip(f in 1usize..=6, k in 1usize..=6, seed: u64) {
        let p = valid_pda(f, k, seed);
        let a = AdjacencyMatrix::from_grid(p.grid());
        let edges = extract_edge_sequence(&a);
        prop_assert_eq!(edges.len(), p.k() * (p.f() - p.z()));
        let colors = colors_of(p.grid(), &edges).unwrap();
        prop_assert!(colors.is_canonical());
        prop_assert_eq!(&assemble_array(&a, &edges, &colors).unwrap(), p.grid());
        let pair = TrainingPair::from_pda(&p);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&pair)).unwrap();
        prop_assert_eq!(read_jsonl(buf.as_slice()).unwrap(), vec![pair]);
    }

    #[test]
    fn assembly_is_injective_on_canonical_colors(f in 1usize..=4, k in 1usize..=4, seed: u64, a_bits: u64, b_bits: u64) {
        let p = valid_pda(f, k, seed);
        let a = AdjacencyMatrix::from_grid(p.grid());
        let edges = extract_edge_sequence(&a);
        // two arbitrary color sequences, made canonical
        let make = |bits: u64| ColorSequence((0..edges.len()).map(|i| (bits >> (2 * i) & 3) as u32 + 1).collect()).canonicalize();
        let (ca, cb) = (make(a_bits), make(b_bits));
        let (ga, gb) = (assemble_array(&a, &edges, &ca).unwrap(), assemble_array(&a, &edges, &cb).unwrap());
        prop_assert_eq!(ga == gb, ca == cb);
        prop_assert_eq!(colors_of(&ga, &edges).unwrap(), ca);
    }

    #[test]
    fn every_user_decodes_from_a_valid_pda(f in 1usize..=6, k in 1usize..=4, n in 1usize..=3, seed: u64) {
        let p = valid_pda(f, k, seed);
        let lib = FileLibrary::random(n, f, 8, seed);
        for d in all_demands(k, n) {
            let round = run_round(p.grid(), &lib, &d).unwrap();
            prop_assert!(round.all_decoded());
            prop_assert_eq!(round.transcript.packets_sent(), p.s());
        }
    }

    #[test]
    fn broken_cross_cells_break_decoding(k in 3usize..=4, t_pick: usize, pair_pick: usize, fill_pick: usize, seed: u64) {
        let t = 1 + t_pick % (k - 2);
        let p = construct_mn_pda(k, t).unwrap();
        let f = p.f();
        let mut rows = to_rows(p.grid());
        let mut pairs = Vec::new();
        for r1 in 0..f {
            for c1 in 0..k {
                for r2 in 0..f {
                    for c2 in 0..k {
                        if r1 != r2 && c1 != c2 && rows[r1][c1].is_some() && rows[r1][c1] == rows[r2][c2] {
                            pairs.push((r1, c1, r2, c2));
                        }
                    }
                }
            }
        }
        let (r1, _, r2, c2) = pairs[pair_pick % pairs.len()];
        // give the star cross cell a fresh integer, then star some other integer cell of that column
        rows[r1][c2] = Some(p.s() as u32 + 1);
        let others: Vec<usize> = (0..f).filter(|&r| r != r1 && r != r2 && rows[r][c2].is_some()).collect();
        prop_assume!(!others.is_empty());
        rows[others[fill_pick % others.len()]][c2] = None;
        let grid = from_rows(&rows);
        prop_assert!(!verify(&grid).valid);
        let lib = FileLibrary::random(k, f, 8, seed);
        let fails = all_demands(k, k).any(|d| !run_round(&grid, &lib, &d).unwrap().all_decoded());
        prop_assert!(fails, "{}", grid);
    }

    #[test]
    fn xor_cancellation_recovers_packets(f in 1usize..=5, k in 1usize..=5, seed: u64) {
        let p = valid_pda(f, k, seed);
        let lib = FileLibrary::random(k, f, 16, seed);
        let d = pdaseq::cachesim::DemandVector::new((0..k).map(|u| u % k).collect(), k).unwrap();
        let caches = place(p.grid(), &lib).unwrap();
        let transcript = deliver(p.grid(), &lib, &d).unwrap();
        for b in &transcript.broadcasts {
            for target in &b.contributors {
                let mut payload = b.payload.clone();
                for other in b.contributors.iter().filter(|o| *o != target) {
                    let cached = caches[target.user].get(other.file, other.packet).unwrap();
                    payload.iter_mut().zip(cached).for_each(|(x, y)| *x ^= y);
                }
                prop_assert_eq!(payload.as_slice(), lib.packet(target.file, target.packet));
            }
        }
    }

    #[test]
    fn pointer_distributions_sum_to_one(h in 1usize..=8, d in 1usize..=8, l in 1usize..=10, seed: u64, scale in 0.1f64..20.0) {
        let mut p = ModelParams::new(ModelConfig { hidden: h, embed: d, f_max: 6, k_max: 6, window: None, seed });
        p.scale(scale);
        let edges = pdaseq::seqcodec::EdgeSequence((0..l).map(|i| (i % 6, (i * 5 + 1) % 6)).collect());
        let states = encode(&edges, &p).unwrap();
        let d_t: Vec<f64> = (0..h).map(|i| ((i as f64) * 0.37 - 1.0) * scale).collect();
        let mask: Vec<bool> = (0..l).map(|i| i % 3 != 1 || i == 1).collect();
        let probs = decode_step(&p, &states, &d_t, &mask).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(probs.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn gru_state_stays_bounded(seed: u64, scale in 0.01f64..2.0, y in proptest::collection::vec(-0.999f64..0.999, 4), x in proptest::collection::vec(-3.0f64..3.0, 3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = GruParams::uniform(3, 4, scale, &mut rng);
        let out = gru_step(&x, &y, &params).unwrap();
        prop_assert!(out.iter().all(|v| v.abs() < 1.0));
    }
}
