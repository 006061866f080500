//! Pipeline against oracle over operand sweeps small enough for every test run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xtramac_core::datatype::CATALOG;
use xtramac_core::oracle::{oracle_mac, oracle_mul};
use xtramac_core::pipeline::{IssueSlot, MacConfig, Pipeline};
use xtramac_core::{FormatRegistry, MacDatatype, NumFormat};

fn dt(id: &str) -> MacDatatype {
    MacDatatype::parse(id, &FormatRegistry::default()).unwrap()
}

fn mask(f: NumFormat) -> u32 {
    ((1u64 << f.width()) - 1) as u32
}

/// An accumulator operand that nearly cancels `a*b`, to exercise the
/// subtraction and renormalization paths.
fn near_cancel(d: &MacDatatype, a: u32, b: u32, rng: &mut impl Rng) -> u32 {
    let acc = match d.p() {
        NumFormat::Float(f) => f,
        NumFormat::Int(_) => return rng.gen::<u32>(),
    };
    let p = oracle_mul(&d.a().decode(a).unwrap(), &d.b().decode(b).unwrap(), d);
    let bits = acc.encode(&p.exact());
    let sign = 1u32 << (acc.width() - 1);
    let jitter = rng.gen_range(0..4u32);
    ((bits ^ sign).wrapping_add(jitter).wrapping_sub(2)) & mask(d.c())
}

fn check_slots(cfg: &MacConfig, slots: &[IssueSlot]) -> usize {
    let mut p = Pipeline::new(cfg.clone());
    let outs = p.run(slots).unwrap();
    assert_eq!(outs.len(), slots.len());
    let mut bad = 0;
    for (slot, out) in slots.iter().zip(&outs) {
        let expect = cfg.reference_lanes(slot).unwrap();
        if out.lane_values() != expect.as_slice() {
            if bad < 5 {
                let ops: Vec<_> = (0..out.lanes)
                    .map(|k| cfg.lane_operands(slot, k).unwrap())
                    .collect();
                eprintln!(
                    "{} ops={ops:x?} c={:x?} got={:x?} want={expect:x?}",
                    cfg.datatype(slot.dtype_select),
                    &slot.c_lanes[..out.lanes],
                    out.lane_values()
                );
            }
            bad += 1;
        }
    }
    bad
}

/// Every (a, b) pair with a handful of accumulator operands per pair.
fn exhaustive_pairs(id: &str, c_per_pair: usize, seed: u64) {
    let d = dt(id);
    let cfg = MacConfig::new(&[d]).unwrap();
    let plan = cfg.plan(0).clone();
    let (wa, wb) = (d.a().width(), d.b().width());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lanes: Vec<(u32, u32)> = Vec::new();
    for a in 0..1u32 << wa {
        for b in 0..1u32 << wb {
            lanes.push((a, b));
        }
    }
    let mut slots = Vec::new();
    for _ in 0..c_per_pair {
        for chunk in lanes.chunks(plan.lanes()) {
            // Put each pair in its own lane; other operands stay zero.
            let mut a_vals = vec![0u32; plan.a_offsets().len()];
            let mut b_vals = vec![0u32; plan.b_offsets().len()];
            let mut c = vec![0u32; plan.lanes()];
            for (k, &(a, b)) in chunk.iter().enumerate() {
                let (i, j) = plan.lane_map()[k];
                if a_vals[i] == 0 && b_vals[j] == 0 {
                    a_vals[i] = a;
                    b_vals[j] = b;
                    c[k] = if rng.gen_bool(0.5) {
                        near_cancel(&d, a, b, &mut rng)
                    } else {
                        rng.gen::<u32>() & mask(d.c())
                    };
                    continue;
                }
                slots.push(one_lane(&cfg, &plan, k, a, b, rng.gen::<u32>() & mask(d.c())));
            }
            slots.push(cfg.pack_slot(0, &a_vals, &b_vals, &c).unwrap());
        }
    }
    assert_eq!(check_slots(&cfg, &slots), 0, "{id}");
}

fn one_lane(
    cfg: &MacConfig,
    plan: &xtramac_core::packing::PackingPlan,
    k: usize,
    a: u32,
    b: u32,
    c: u32,
) -> IssueSlot {
    let (i, j) = plan.lane_map()[k];
    let mut a_vals = vec![0u32; plan.a_offsets().len()];
    let mut b_vals = vec![0u32; plan.b_offsets().len()];
    let mut cs = vec![0u32; plan.lanes()];
    a_vals[i] = a;
    b_vals[j] = b;
    cs[k] = c;
    cfg.pack_slot(0, &a_vals, &b_vals, &cs).unwrap()
}

#[test]
fn fp4_all_pairs() {
    exhaustive_pairs("fp4xfp4", 64, 1);
}

#[test]
fn fp8_all_pairs() {
    exhaustive_pairs("fp8xfp8", 4, 2);
}

#[test]
fn fp8alt_all_pairs() {
    exhaustive_pairs("fp8altxfp8alt", 2, 3);
}

#[test]
fn int4_all_pairs() {
    exhaustive_pairs("int4xint4", 16, 4);
}

#[test]
fn random_triples_every_catalog_datatype() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for id in CATALOG {
        let d = dt(id);
        let cfg = MacConfig::new(&[d]).unwrap();
        let plan = cfg.plan(0).clone();
        let slots: Vec<IssueSlot> = (0..4000)
            .map(|_| {
                let a: Vec<u32> = plan.a_offsets().iter().map(|_| rng.gen::<u32>() & mask(d.a())).collect();
                let b: Vec<u32> = plan.b_offsets().iter().map(|_| rng.gen::<u32>() & mask(d.b())).collect();
                let c: Vec<u32> = plan
                    .lane_map()
                    .iter()
                    .map(|&(i, j)| {
                        if rng.gen_bool(0.5) {
                            near_cancel(&d, a[i], b[j], &mut rng)
                        } else {
                            rng.gen::<u32>() & mask(d.c())
                        }
                    })
                    .collect();
                cfg.pack_slot(0, &a, &b, &c).unwrap()
            })
            .collect();
        assert_eq!(check_slots(&cfg, &slots), 0, "{id}");
    }
}

#[test]
fn oracle_is_commutative_for_fp8() {
    let d = dt("fp8xfp8");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for a in 0..256u32 {
        for b in 0..256u32 {
            let c = rng.gen::<u32>() & 0xFFFF;
            assert_eq!(oracle_mac(a, b, c, &d).unwrap(), oracle_mac(b, a, c, &d).unwrap());
        }
    }
}
