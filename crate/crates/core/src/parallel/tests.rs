use super::*;
use crate::csp::all_tuples;
use crate::ecc::hadamard_code;
use crate::pcpp::{build_proximity_pcpp, Circuit};
use crate::rational::from_int;
use crate::reconfig::{brute_force_reconfig_value, verify_path, ReconfigPath, ReconfigProblem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn budget() -> Budget {
    Budget::default()
}

fn bits(s: &[u32]) -> BitString {
    BitString::from_bits(s.iter().map(|&b| b == 1).collect())
}

type Pred = fn(&[Symbol]) -> bool;

fn binary_csp(n: usize, cons: Vec<(Vec<usize>, Pred)>) -> CspInstance {
    let cs = cons
        .into_iter()
        .map(|(vars, f)| Constraint::from_fn(vars, 2, f))
        .collect();
    CspInstance::new(n, 2, cs).unwrap()
}

fn or2(t: &[Symbol]) -> bool {
    t[0] == 1 || t[1] == 1
}

/// "a or b" from (1,0) to (1,1).
fn or_source() -> ReconfigProblem {
    let inst = binary_csp(2, vec![(vec![0, 1], or2)]);
    ReconfigProblem::new(inst, vec![1, 0].into(), vec![1, 1].into()).unwrap()
}

/// Every table of `system` with `v = 0`.
fn all_tables(system: &ParallelPcppSystem) -> Vec<LayeredAssignment> {
    all_tuples(system.num_cols(), system.alphabet_size())
        .map(|cols| LayeredAssignment::new(system.t(), system.x_cols(), cols, 0).unwrap())
        .collect()
}

/// Layer-`i` probability recomputed through the scalar verifier on row `i`.
fn scalar_prob(system: &ParallelPcppSystem, psi: &LayeredAssignment, i: usize) -> Rational {
    system.verifiers()[i]
        .accept_prob(&psi.x_row(i), &psi.proof_row(i))
        .unwrap()
}

#[test]
fn single_layer_lift_is_the_scalar_verifier() {
    let v = build_proximity_pcpp(&Circuit::and(2), 1).unwrap();
    let sys = lift_scalars(vec![v.clone()]).unwrap();
    assert_eq!(sys.alphabet_size(), 2);
    for psi in all_tables(&sys) {
        let expect = v.accept_prob(&psi.x_row(0), &psi.proof_row(0)).unwrap();
        assert_eq!(parallel_accept_prob(&sys, &psi, 0).unwrap(), expect);
        assert_eq!(parallel_value(&sys, &psi).unwrap(), expect);
    }
}

#[test]
fn identical_layers_give_identical_probabilities() {
    let v = build_proximity_pcpp(&Circuit::and(2), 1).unwrap();
    let sys = lift_scalars(vec![v.clone(), v]).unwrap();
    for x in 0..4u64 {
        for pi in 0..4u64 {
            let mut psi = LayeredAssignment::zeros(&sys);
            for layer in 0..2 {
                psi.set_x_row(layer, &BitString::from_u64(x, 2)).unwrap();
                psi.set_proof_row(layer, &BitString::from_u64(pi, 2)).unwrap();
            }
            assert_eq!(
                parallel_accept_prob(&sys, &psi, 0).unwrap(),
                parallel_accept_prob(&sys, &psi, 1).unwrap()
            );
        }
    }
}

#[test]
fn layer_probability_matches_scalar_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let sys = random_micro_system(&mut rng);
        for psi in all_tables(&sys) {
            for i in 0..sys.t() {
                assert_eq!(parallel_accept_prob(&sys, &psi, i).unwrap(), scalar_prob(&sys, &psi, i));
            }
        }
    }
}

#[test]
fn zeroed_proof_row_is_rejected() {
    // Every outcome needs proof bit 0 of its layer set.
    let needs = AcceptTable::from_fn(2, |b| b & 2 != 0);
    let v = ScalarPcpp::new(1, 1, vec![vec![0, 1], vec![0, 1]], vec![needs.clone(), needs]).unwrap();
    let sys = lift_scalars(vec![v.clone(), v]).unwrap();
    let psi = LayeredAssignment::new(2, 1, vec![3, 0b01], 0).unwrap();
    assert_eq!(parallel_accept_prob(&sys, &psi, 0).unwrap(), ratio(1, 1));
    assert_eq!(parallel_accept_prob(&sys, &psi, 1).unwrap(), ratio(0, 1));
    assert_eq!(parallel_value(&sys, &psi).unwrap(), ratio(1, 1));
    assert!(parallel_accept_prob(&sys, &psi, 2).is_err());
}

#[test]
fn value_is_max_over_layers() {
    // Layer 0 accepts on outcomes {0, 1}, layer 1 on outcome {0} only.
    let yes = AcceptTable::constant(1, true);
    let no = AcceptTable::constant(1, false);
    let qm = vec![vec![0]; 4];
    let a = ScalarPcpp::with_repeats(1, 0, qm.clone(), vec![yes.clone(), yes.clone(), no.clone(), no.clone()]).unwrap();
    let b = ScalarPcpp::with_repeats(1, 0, qm, vec![yes, no.clone(), no.clone(), no]).unwrap();
    let sys = lift_scalars(vec![a, b]).unwrap();
    let psi = LayeredAssignment::zeros(&sys);
    assert_eq!(parallel_accept_prob(&sys, &psi, 0).unwrap(), ratio(1, 2));
    assert_eq!(parallel_accept_prob(&sys, &psi, 1).unwrap(), ratio(1, 4));
    assert_eq!(parallel_value(&sys, &psi).unwrap(), ratio(1, 2));
}

#[test]
fn lift_rejects_mismatched_query_maps() {
    let a = build_proximity_pcpp(&Circuit::and(2), 1).unwrap();
    let b = build_proximity_pcpp(&Circuit::and(4), 1).unwrap();
    assert!(lift_scalars(vec![a, b]).is_err());
    assert!(lift_scalars(vec![]).is_err());
}

#[test]
fn reduced_instance_shape() {
    let v = ScalarPcpp::new(1, 1, vec![vec![0, 1]], vec![AcceptTable::constant(2, true)]).unwrap();
    let one = Arc::new(lift_scalars(vec![v.clone()]).unwrap());
    let csp = parallelize_to_csp(&one);
    assert_eq!((csp.num_vars(), csp.alphabet_size(), csp.num_constraints()), (3, 2, 1));
    let two = Arc::new(lift_scalars(vec![v.clone(), v]).unwrap());
    assert_eq!(parallelize_to_csp(&two).alphabet_size(), 4);

    // Repeated columns collapse in the constraint scope.
    let rep = ScalarPcpp::with_repeats(2, 0, vec![vec![1, 1, 0], vec![0, 0, 0]], vec![AcceptTable::constant(3, true); 2]).unwrap();
    let csp = parallelize_to_csp(&Arc::new(lift_scalars(vec![rep]).unwrap()));
    assert_eq!(csp.constraints()[0].vars(), &[0, 2, 1]);
    assert_eq!(csp.constraints()[1].vars(), &[0, 1]);
}

#[test]
fn reduced_value_identity_on_micro_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..15 {
        let sys = Arc::new(random_micro_system(&mut rng));
        let csp = parallelize_to_csp(&sys);
        for mut psi in all_tables(&sys) {
            for v in 0..sys.alphabet_size() {
                psi.set_v(v);
                let got = csp.value(&psi.to_assignment()).unwrap();
                if (v as usize) < sys.t() {
                    assert_eq!(got, scalar_prob(&sys, &psi, v as usize));
                } else {
                    assert_eq!(got, ratio(0, 1));
                }
            }
        }
    }
}

#[test]
fn indicator_bottleneck_matches_brute_force_on_reduced_csp() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..12 {
        let sys = Arc::new(random_micro_system(&mut rng));
        let csp = parallelize_to_csp(&sys);
        let ini = random_layered_assignment(&sys, &mut rng);
        let tar = random_layered_assignment(&sys, &mut rng);
        let problem = ReconfigProblem::relaxed(csp, ini.to_assignment(), tar.to_assignment()).unwrap();
        let oracle = brute_force_reconfig_value(&problem).unwrap();
        assert_eq!(indicator_bottleneck_value(&sys, &ini, &tar, &budget()).unwrap(), oracle);
        assert!(oracle <= parallel_bottleneck_value(&sys, &ini, &tar, &budget()).unwrap());
    }
}

#[test]
fn thresholds_carry_over_to_the_csp() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..10 {
        let sys = Arc::new(random_micro_system(&mut rng));
        let csp = parallelize_to_csp(&sys);
        for mut psi in all_tables(&sys) {
            let probs: Vec<Rational> = (0..sys.t())
                .map(|i| parallel_accept_prob(&sys, &psi, i).unwrap())
                .collect();
            for (i, p) in probs.iter().enumerate() {
                psi.set_v(i as Symbol);
                let val = csp.value(&psi.to_assignment()).unwrap();
                if *p == from_int(1) {
                    assert_eq!(val, from_int(1));
                }
                assert!(val <= *probs.iter().max().unwrap());
            }
        }
    }
}

#[test]
fn km24_circuit_examples() {
    let src = or_source();
    let code = hadamard_code(2).unwrap();
    let enc = |s: &[u32]| code.encode(&bits(s)).unwrap();
    let c = km24_circuit(src.instance(), &code, 0).unwrap();
    assert_eq!(c.input_len(), 12);
    let cat = |a: &BitString, b: &BitString, d: &BitString| BitString::concat(&[a, b, d]);

    let s = enc(&[1, 0]);
    assert!(c.eval(&cat(&s, &s, &s)));
    let mut bad = s.clone();
    bad.flip(0);
    assert!(!c.eval(&cat(&s, &bad, &s)));
    assert!(c.eval(&cat(&enc(&[1, 0]), &enc(&[1, 0]), &enc(&[1, 1]))));
    assert!(!c.eval(&cat(&enc(&[0, 0]), &enc(&[1, 0]), &enc(&[1, 0]))));
    // (1,0), (0,1), (1,1): the first two are two bits apart.
    assert!(!c.eval(&cat(&enc(&[1, 0]), &enc(&[0, 1]), &enc(&[1, 1]))));

    assert!(km24_circuit(src.instance(), &code, 4).is_err());
    assert!(km24_circuit(src.instance(), &hadamard_code(3).unwrap(), 0).is_err());
    let ternary = CspInstance::new(2, 3, vec![Constraint::from_fn(vec![0, 1], 3, |_| true)]).unwrap();
    assert!(matches!(km24_circuit(&ternary, &code, 0), Err(Error::Unsupported(_))));
}

#[test]
fn km24_build_shape() {
    let inst = km24_build(&or_source(), hadamard_code(2).unwrap(), 2).unwrap();
    let sys = inst.system();
    assert_eq!((sys.t(), sys.x_cols(), sys.proof_cols(), sys.randomness()), (4, 4, 12, 4));
    let csp = parallelize_to_csp(sys);
    assert_eq!((csp.num_vars(), csp.alphabet_size(), csp.num_constraints()), (17, 16, 16));
    for (c, tuple) in csp.constraints().iter().zip(sys.query_map()) {
        assert_eq!(tuple.len(), 12 + 2);
        let mut distinct = tuple.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(c.arity(), distinct.len() + 1);
    }
    for psi in [inst.psi_ini(), inst.psi_tar()] {
        assert_eq!(parallel_value(sys, psi).unwrap(), from_int(1));
        for i in 0..4 {
            assert_eq!(parallel_accept_prob(sys, psi, i).unwrap(), from_int(1));
        }
    }
    assert!(inst.reduced_problem().is_ok());

    let relaxed = ReconfigProblem::relaxed(or_source().instance().clone(), vec![0, 0].into(), vec![1, 1].into()).unwrap();
    assert!(km24_build(&relaxed, hadamard_code(2).unwrap(), 1).is_err());
    assert!(km24_build(&or_source(), hadamard_code(2).unwrap(), 0).is_err());
}

#[test]
fn km24_layers_agree_with_their_circuits() {
    let inst = km24_build(&or_source(), hadamard_code(2).unwrap(), 1).unwrap();
    let sys = inst.system();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let code = inst.code();
    let sols: Vec<BitString> = [[1, 0], [0, 1], [1, 1]].iter().map(|s| bits(s)).collect();
    for _ in 0..200 {
        let mut psi = LayeredAssignment::zeros(sys);
        for j in 0..4 {
            let y = &sols[rng.gen_range(0..3)];
            psi.set_x_row(j, &code.encode(y).unwrap()).unwrap();
        }
        for i in 0..4 {
            let pi = sys.honest_proof(i, &psi).unwrap();
            psi.set_proof_row(i, &pi).unwrap();
        }
        if rng.gen_bool(0.5) {
            let col = rng.gen_range(0..sys.num_cols());
            let layer = rng.gen_range(0..4);
            psi.set_bit(layer, col, !psi.bit(layer, col));
        }
        for i in 0..4 {
            let w = psi.proof_row(i);
            let agrees = others_rows(&psi, i) == w;
            let expect = sys.circuits()[i].eval(&w) && agrees;
            let got = parallel_accept_prob(sys, &psi, i).unwrap() == from_int(1);
            assert_eq!(got, expect);
        }
    }
}

fn others_rows(psi: &LayeredAssignment, i: usize) -> BitString {
    let rows: Vec<BitString> = (0..4).filter(|&j| j != i).map(|j| psi.x_row(j)).collect();
    BitString::concat(&[&rows[0], &rows[1], &rows[2]])
}

fn assert_valid_lift(inst: &Km24Instance, path: &[LayeredAssignment]) {
    assert_eq!(path.first().unwrap(), inst.psi_ini());
    assert_eq!(path.last().unwrap(), inst.psi_tar());
    for w in path.windows(2) {
        assert_eq!(w[0].diff_count(&w[1]), 1);
    }
    let problem = inst.reduced_problem().unwrap();
    let csp_path = ReconfigPath::new(path.iter().map(|p| p.to_assignment()).collect()).unwrap();
    assert!(verify_path(&problem, &csp_path, &from_int(1)));
}

#[test]
fn completeness_path_for_or() {
    let src = or_source();
    let inst = km24_build(&src, hadamard_code(2).unwrap(), 1).unwrap();
    let sp = ReconfigPath::new(vec![vec![1, 0].into(), vec![1, 1].into()]).unwrap();
    let path = completeness_path(&inst, &sp).unwrap();
    assert_valid_lift(&inst, &path);
    for psi in &path {
        let y = extract_assignment(&inst, psi).unwrap().expect("extraction defined");
        assert!(src.instance().is_solution(&Assignment::new(y.iter().map(u32::from).collect())).unwrap());
    }

    let bad = ReconfigPath::new(vec![vec![1, 0].into(), vec![0, 1].into(), vec![1, 1].into()]).unwrap();
    assert!(completeness_path(&inst, &bad).is_err());
}

#[test]
fn completeness_path_of_constant_source() {
    let inst = binary_csp(2, vec![(vec![0, 1], or2)]);
    let src = ReconfigProblem::new(inst, vec![0, 1].into(), vec![0, 1].into()).unwrap();
    let km = km24_build(&src, hadamard_code(2).unwrap(), 1).unwrap();
    let sp = ReconfigPath::new(vec![vec![0, 1].into()]).unwrap();
    let path = completeness_path(&km, &sp).unwrap();
    assert_eq!(path.len(), 1);
    assert_eq!(&path[0], km.psi_ini());
}

#[test]
fn completeness_path_over_several_steps() {
    // x0 = x1 and (x1 or x2), walking (0,0,1) -> (1,1,1) -> (1,1,0).
    let inst = binary_csp(3, vec![(vec![0, 1], |t| t[0] == t[1]), (vec![1, 2], or2)]);
    let src = ReconfigProblem::new(inst, vec![0, 0, 1].into(), vec![1, 1, 0].into()).unwrap();
    let km = km24_build(&src, hadamard_code(3).unwrap(), 1).unwrap();
    // The equality forbids moving x0 or x1 alone, so there is no exact path.
    let sp = ReconfigPath::new(vec![vec![0, 0, 1].into(), vec![1, 0, 1].into()]).unwrap();
    assert!(completeness_path(&km, &sp).is_err());

    let inst = binary_csp(3, vec![(vec![0, 1], or2), (vec![1, 2], or2)]);
    let src = ReconfigProblem::new(inst, vec![0, 1, 1].into(), vec![1, 1, 0].into()).unwrap();
    let km = km24_build(&src, hadamard_code(3).unwrap(), 2).unwrap();
    let sp = ReconfigPath::new(vec![
        vec![0, 1, 1].into(),
        vec![1, 1, 1].into(),
        vec![1, 1, 1].into(),
        vec![1, 1, 0].into(),
    ])
    .unwrap();
    let path = completeness_path(&km, &sp).unwrap();
    assert_valid_lift(&km, &path);
    let ys: Vec<BitString> = path
        .iter()
        .map(|p| extract_assignment(&km, p).unwrap().unwrap())
        .collect();
    for w in ys.windows(2) {
        assert!(w[0].hamming(&w[1]) <= 1);
    }
}

#[test]
fn extraction_examples() {
    let inst = binary_csp(3, vec![(vec![0, 1], or2), (vec![1, 2], or2)]);
    let src = ReconfigProblem::new(inst, vec![0, 1, 1].into(), vec![1, 1, 0].into()).unwrap();
    let km = km24_build(&src, hadamard_code(3).unwrap(), 1).unwrap();
    let code = km.code();
    assert_eq!(extract_assignment(&km, km.psi_ini()).unwrap(), Some(bits(&[0, 1, 1])));

    // One corrupted non-v row within the unique-decoding radius.
    assert_eq!(code.unique_radius(), 1);
    for layer in 1..4 {
        for col in 0..8 {
            let mut psi = km.psi_ini().clone();
            psi.set_bit(layer, col, !psi.bit(layer, col));
            assert_eq!(extract_assignment(&km, &psi).unwrap(), Some(bits(&[0, 1, 1])));
        }
    }

    // v = 1, rows 0, 2, 3 decode to (z', z, z).
    let z = bits(&[0, 1, 1]);
    let z2 = bits(&[1, 1, 1]);
    let mut psi = km.psi_ini().clone();
    psi.set_x_row(0, &code.encode(&z2).unwrap()).unwrap();
    psi.set_v(1);
    assert_eq!(extract_assignment(&km, &psi).unwrap(), Some(z.clone()));

    psi.set_v(9);
    assert_eq!(extract_assignment(&km, &psi).unwrap(), None);

    // Two undecodable rows leave a single vote.
    let mut psi = km.psi_ini().clone();
    for layer in [1, 2] {
        psi.set_bit(layer, 0, !psi.bit(layer, 0));
        psi.set_bit(layer, 1, !psi.bit(layer, 1));
    }
    assert_eq!(extract_assignment(&km, &psi).unwrap(), None);
}

#[test]
fn binarize_examples() {
    let inst = binary_csp(2, vec![(vec![0, 1], or2)]);
    assert_eq!(binarize_csp(&inst).unwrap(), inst);

    let four = CspInstance::new(1, 4, vec![Constraint::from_fn(vec![0], 4, |t| t[0] == 3)]).unwrap();
    let b = binarize_csp(&four).unwrap();
    assert_eq!((b.num_vars(), b.alphabet_size()), (2, 2));
    assert_eq!(b.constraints()[0].vars(), &[0, 1]);
    assert!(b.constraints()[0].accepts(&[1, 1]));
    assert_eq!(b.enumerate_assignments(&budget()).unwrap().filter(|a| b.is_solution(a).unwrap()).count(), 1);
    assert_eq!(binarize_assignment(&vec![2, 1].into(), 4).unwrap(), vec![0, 1, 1, 0].into());

    let three = CspInstance::new(1, 3, vec![Constraint::from_fn(vec![0], 3, |_| true)]).unwrap();
    assert!(binarize_csp(&three).is_err());
}

#[test]
fn micro_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let no_source = |_: &str| -> Result<ReconfigProblem> { unreachable!() };
    for _ in 0..10 {
        let sys = random_micro_system(&mut rng);
        let text = sys.serialize_micro().unwrap();
        let SystemFile::Micro(back) = parse_system(&text, &no_source).unwrap() else {
            panic!("expected a micro system");
        };
        assert_eq!(back.serialize_micro().unwrap(), text);
        assert_eq!(back.query_map(), sys.query_map());
    }
    assert!(parse_system("psys-micro 1 1 0 0 1\nomega 0 0\nlayer 1 pred 01\n", &no_source).is_err());
}

#[test]
fn reduced_problem_file_round_trip() {
    let src = or_source();
    let inst = km24_build(&src, hadamard_code(2).unwrap(), 1).unwrap();
    let header = inst.system_file("source.txt");
    assert_eq!(header, "psys 4 4 12 2 1 code=hadamard 2 source=source.txt\n");
    let reduced = inst.reduced_problem().unwrap();
    let text = reduced_problem_text(reduced.instance(), "sys.psys", reduced.ini(), reduced.tar());

    let load_source = |r: &str| -> Result<ReconfigProblem> {
        assert_eq!(r, "source.txt");
        ReconfigProblem::parse(&src.serialize().unwrap())
    };
    let load_sys = |r: &str| -> Result<SystemFile> {
        assert_eq!(r, "sys.psys");
        parse_system(&header, &load_source)
    };
    let back = parse_problem_with(&text, &load_sys).unwrap();
    assert!(!back.is_relaxed());
    assert_eq!(back.ini(), reduced.ini());
    assert_eq!(back.instance().num_constraints(), 4);

    let wrong = text.replacen("csp 17", "csp 18", 1);
    assert!(parse_problem_with(&wrong, &load_sys).is_err());
    let bad_header = "psys 4 4 12 3 1 code=hadamard 2 source=source.txt\n";
    assert!(parse_system(bad_header, &load_source).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn binarized_solution_counts_match(seed in any::<u64>(), log_a in 1u32..=2, n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = 1u32 << log_a;
        let cons = (0..rng.gen_range(1..=3))
            .map(|_| {
                let arity = rng.gen_range(1..=n.min(2));
                let vars = rand::seq::index::sample(&mut rng, n, arity).into_vec();
                let keep: Vec<bool> = all_tuples(vars.len(), a).map(|_| rng.gen_bool(0.6)).collect();
                let acc = all_tuples(vars.len(), a).zip(keep).filter(|(_, k)| *k).map(|(t, _)| t);
                Constraint::table(vars, acc.collect::<Vec<_>>())
            })
            .collect();
        let inst = CspInstance::new(n, a, cons).unwrap();
        let bin = binarize_csp(&inst).unwrap();
        let count = |i: &CspInstance| {
            i.enumerate_assignments(&budget()).unwrap().filter(|x| i.is_solution(x).unwrap()).count()
        };
        prop_assert_eq!(count(&inst), count(&bin));
        for x in inst.enumerate_assignments(&budget()).unwrap() {
            let bx = binarize_assignment(&x, a).unwrap();
            prop_assert_eq!(inst.value(&x).unwrap(), bin.value(&bx).unwrap());
        }
    }

    #[test]
    fn random_tables_recount(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = random_micro_system(&mut rng);
        let psi = random_layered_assignment(&sys, &mut rng);
        let best = (0..sys.t()).map(|i| scalar_prob(&sys, &psi, i)).max().unwrap();
        prop_assert_eq!(parallel_value(&sys, &psi).unwrap(), best);
    }
}
