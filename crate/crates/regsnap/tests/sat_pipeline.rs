//! Integration tests of the SAT route: encoder ground-truth satisfiability,
//! solver round trips on planted instances, and solution multiplicity.

use regsnap::attack::{
    check_key_unique, plant_instance, scenario2_sat, PlantConfig, Outcome, ReducedScheduleSpec,
    Scenario2Config, UniqueCheck,
};
use regsnap::sat::{
    decode_key, encode_instance, ground_truth_assignment, share_block_clause, AttackInstance,
    EmbeddedBackend, EncodeOptions, OnehotMode, SatBackend, SolveOutcome,
};
use regsnap::schedule::{load_schedule, FIRST_FULL_CYCLE};

fn planted_attack_instance(
    plant: &regsnap::attack::PlantedInstance,
    d: usize,
) -> AttackInstance {
    AttackInstance::new(
        plant.snapshots.clone(),
        FIRST_FULL_CYCLE,
        d,
        plant.plaintext,
    )
}

/// The encoder's master property: the assignment built from the true
/// placement, shares and key satisfies every emitted clause, checked by
/// direct evaluation without a solver.
#[test]
fn ground_truth_assignment_satisfies_every_clause() {
    let reduced = ReducedScheduleSpec::default().table().unwrap();
    for (i, &(d, len)) in [(0usize, 3usize), (1, 5), (2, 4), (1, 12)].iter().enumerate() {
        let plant = plant_instance(
            &PlantConfig::new(9000 + i as u64, d, FIRST_FULL_CYCLE, len),
            &reduced,
        )
        .unwrap();
        let inst = planted_attack_instance(&plant, d);
        for onehot in [OnehotMode::SequentialAdder, OnehotMode::Pairwise] {
            let (problem, dm) =
                encode_instance(&inst, &reduced, &EncodeOptions { onehot }).unwrap();
            let truth = ground_truth_assignment(
                &dm,
                &inst,
                &plant.files,
                &plant.placement,
                &plant.key,
                problem.var_count(),
            );
            let violated = problem.violated_clauses(&truth);
            assert!(
                violated.is_empty(),
                "d={d} len={len} {onehot:?}: {} violated clauses, first at {:?}",
                violated.len(),
                violated.first()
            );
            assert_eq!(decode_key(&truth, &dm), plant.key);
        }
    }
}

#[test]
fn ground_truth_also_satisfies_full_schedule_encoding() {
    let table = load_schedule();
    let plant = plant_instance(&PlantConfig::new(42, 1, FIRST_FULL_CYCLE, 12), &table).unwrap();
    assert_eq!(plant.n, 720);
    let inst = planted_attack_instance(&plant, 1);
    let (problem, dm) = encode_instance(&inst, &table, &EncodeOptions::default()).unwrap();
    let truth = ground_truth_assignment(
        &dm,
        &inst,
        &plant.files,
        &plant.placement,
        &plant.key,
        problem.var_count(),
    );
    assert!(problem.is_model(&truth));
    assert_eq!(decode_key(&truth, &dm), plant.key);
    // Headline size check: the paper-scale encoding lands within an order
    // of magnitude of (717728 vars, 3650048 clauses).
    let s = problem.stats();
    let clauses = s.n_or + s.n_xor;
    assert!(
        s.n_vars > 71_772 && s.n_vars < 7_177_280,
        "vars {}",
        s.n_vars
    );
    assert!(clauses > 365_004 && clauses < 36_500_480, "clauses {clauses}");
}

#[test]
fn solver_recovers_planted_key_d0() {
    let reduced = ReducedScheduleSpec::default().table().unwrap();
    let plant = plant_instance(&PlantConfig::new(7, 0, FIRST_FULL_CYCLE, 21), &reduced).unwrap();
    let mut cfg = Scenario2Config::new(FIRST_FULL_CYCLE, 0, plant.plaintext);
    cfg.check_unique = true;
    let res = scenario2_sat(&plant.snapshots, &reduced, &cfg, &EmbeddedBackend).unwrap();
    assert_eq!(res.outcome, Outcome::Recovered, "stats {:?}", res.stats);
    assert_eq!(res.keys[0], plant.key);
}

#[test]
fn solver_recovers_planted_key_d1() {
    let reduced = ReducedScheduleSpec::default().table().unwrap();
    let plant = plant_instance(&PlantConfig::new(8, 1, FIRST_FULL_CYCLE, 21), &reduced).unwrap();
    let mut cfg = Scenario2Config::new(FIRST_FULL_CYCLE, 1, plant.plaintext);
    cfg.check_unique = true;
    let res = scenario2_sat(&plant.snapshots, &reduced, &cfg, &EmbeddedBackend).unwrap();
    assert_eq!(res.outcome, Outcome::Recovered, "stats {:?}", res.stats);
    assert_eq!(res.keys[0], plant.key);
}

/// Share-level multiplicity: blocking the full share assignment (not the
/// key) leaves further solutions that decode to the same key.
#[test]
fn share_level_solutions_are_plural_for_masked_instances() {
    let reduced = ReducedScheduleSpec::default().table().unwrap();
    let d = 1;
    let plant = plant_instance(&PlantConfig::new(9, d, FIRST_FULL_CYCLE, 21), &reduced).unwrap();
    let inst = planted_attack_instance(&plant, d);
    let (mut problem, dm) = encode_instance(&inst, &reduced, &EncodeOptions::default()).unwrap();
    let backend = EmbeddedBackend;
    let first = match backend.solve(&problem, None).unwrap() {
        SolveOutcome::Sat(a) => a,
        other => panic!("expected sat, got {other:?}"),
    };
    let key = decode_key(&first, &dm);
    assert_eq!(key, plant.key);

    // Key must be unique ...
    match check_key_unique(&mut problem, &dm, &key, &backend, None).unwrap() {
        UniqueCheck::Unique => {}
        _ => panic!("expected a unique key at the full window"),
    }
    // ... but the share-level assignment must not be.
    problem.add_or(&share_block_clause(&first, &dm));
    match backend.solve(&problem, None).unwrap() {
        SolveOutcome::Sat(second) => {
            assert_eq!(decode_key(&second, &dm), key, "second solution, same key");
        }
        other => panic!("expected a second share-level solution, got {other:?}"),
    }
}

#[test]
fn encoder_rejects_malformed_instances() {
    let reduced = ReducedScheduleSpec::default().table().unwrap();
    let plant = plant_instance(&PlantConfig::new(10, 0, FIRST_FULL_CYCLE, 2), &reduced).unwrap();
    // Zero covered cycles.
    let mut inst = planted_attack_instance(&plant, 0);
    inst.observations.clear();
    inst.window_len = 0;
    assert!(encode_instance(&inst, &reduced, &EncodeOptions::default()).is_err());
    // Window outside the informative range.
    let mut inst = planted_attack_instance(&plant, 0);
    inst.window_start = 14;
    for (i, o) in inst.observations.iter_mut().enumerate() {
        o.cycle = 14 + i;
    }
    assert!(encode_instance(&inst, &reduced, &EncodeOptions::default()).is_err());
    // Observation length mismatch.
    let mut inst = planted_attack_instance(&plant, 0);
    inst.observations[0].bits.pop();
    assert!(encode_instance(&inst, &reduced, &EncodeOptions::default()).is_err());
}

/// The 256-case solver sweep of the Sbox sub-encoding: assuming each input
/// value must force exactly the table's output value.
#[test]
fn sbox_subencoding_solver_sweep() {
    use regsnap::sat::{CnfProblem, Lit, SboxCircuit};
    use varisat::ExtendFormula;

    let mut p = CnfProblem::new();
    let inputs: Vec<_> = p.new_vars(8);
    let input_lits: [Lit; 8] = std::array::from_fn(|i| Lit::pos(inputs[i]));
    let (outputs, _) = SboxCircuit::forward().instantiate(&mut p, input_lits);

    let pure = p.to_pure_cnf();
    let mut solver = varisat::Solver::new();
    let mut formula = varisat::CnfFormula::new();
    formula.set_var_count(pure.var_count() as usize);
    for clause in &pure.or_clauses {
        let lits: Vec<varisat::Lit> = clause
            .iter()
            .map(|l| varisat::Lit::from_dimacs(l.dimacs() as isize))
            .collect();
        formula.add_clause(&lits);
    }
    solver.add_formula(&formula);

    for x in 0..=255u8 {
        let assumptions: Vec<varisat::Lit> = (0..8)
            .map(|i| {
                let want = (x >> i) & 1 == 1;
                varisat::Lit::from_dimacs(if want {
                    inputs[i] as isize
                } else {
                    -(inputs[i] as isize)
                })
            })
            .collect();
        solver.assume(&assumptions);
        assert!(solver.solve().unwrap(), "input {x:#04x} unsat");
        let model = solver.model().unwrap();
        let mut value = |lit: Lit| {
            let v = lit.var();
            let positive = model
                .iter()
                .find(|l| l.var().to_dimacs() == v as isize)
                .map(|l| l.is_positive())
                .unwrap_or(false);
            positive ^ lit.is_neg()
        };
        let mut y = 0u8;
        for (bit, out) in outputs.iter().enumerate() {
            y |= u8::from(value(*out)) << bit;
        }
        assert_eq!(y, regsnap::cipher::SBOX[x as usize], "input {x:#04x}");
    }
}
