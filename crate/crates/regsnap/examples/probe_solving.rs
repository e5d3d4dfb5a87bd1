// Scratch probe: solve-time scaling of planted instances.
use regsnap::attack::{plant_instance, PlantConfig, ReducedScheduleSpec};
use regsnap::sat::{
    decode_key, encode_instance, AttackInstance, EmbeddedBackend, EncodeOptions, SatBackend,
    SolveOutcome,
};
use regsnap::schedule::FIRST_FULL_CYCLE;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let d: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    let cycles: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(21);
    let fsm: Option<usize> = args.get(3).map(|s| s.parse().unwrap());
    let budget: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(180);
    let reduced = ReducedScheduleSpec::default().table().unwrap();
    let mut pc = PlantConfig::new(7, d, FIRST_FULL_CYCLE, cycles);
    pc.fsm_bits = fsm;
    let plant = plant_instance(&pc, &reduced).unwrap();
    let inst = AttackInstance::new(
        plant.snapshots.clone(),
        FIRST_FULL_CYCLE,
        d,
        plant.plaintext,
    );
    let t0 = Instant::now();
    let (p, dm) = encode_instance(&inst, &reduced, &EncodeOptions::default()).unwrap();
    let s = p.stats();
    eprintln!(
        "d={d} cycles={cycles} n={} m={} vars={} or={} xor={} encode={:?}",
        plant.n,
        dm.m,
        s.n_vars,
        s.n_or,
        s.n_xor,
        t0.elapsed()
    );
    let t1 = Instant::now();
    match EmbeddedBackend
        .solve(&p, Some(std::time::Duration::from_secs(budget)))
        .unwrap()
    {
        SolveOutcome::Sat(a) => {
            let k = decode_key(&a, &dm);
            eprintln!("SAT in {:?}; key ok = {}", t1.elapsed(), k == plant.key);
        }
        SolveOutcome::Timeout => eprintln!("TIMEOUT after {:?}", t1.elapsed()),
        SolveOutcome::Unsat => eprintln!("UNSAT?!"),
    }
}
