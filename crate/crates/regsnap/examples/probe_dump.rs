// Scratch: dump a planted instance as pure-CNF DIMACS for external solver probes.
use regsnap::attack::{plant_instance, PlantConfig, ReducedScheduleSpec};
use regsnap::sat::{encode_instance, write_dimacs, AttackInstance, EncodeOptions};
use regsnap::schedule::FIRST_FULL_CYCLE;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let d: usize = args[1].parse().unwrap();
    let cycles: usize = args[2].parse().unwrap();
    let path = &args[3];
    let reduced = ReducedScheduleSpec::default().table().unwrap();
    let plant = plant_instance(&PlantConfig::new(7, d, FIRST_FULL_CYCLE, cycles), &reduced).unwrap();
    let inst = AttackInstance::new(plant.snapshots.clone(), FIRST_FULL_CYCLE, d, plant.plaintext);
    let (p, _dm) = encode_instance(&inst, &reduced, &EncodeOptions::default()).unwrap();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    write_dimacs(&p, &mut f, false).unwrap();
    eprintln!("wrote {path}");
}
