//! Pipeline-versus-oracle sweeps, sharded over worker threads.
//!
//! Aggregation is order-independent: counts are summed and diffs sorted.

use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use xtramac_core::oracle::{exact_add, oracle_mac, oracle_mul};
use xtramac_core::pipeline::{IssueSlot, MacConfig, Pipeline};
use xtramac_core::{MacDatatype, NumFormat};

use crate::sample;

pub const MAX_DIFFS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LaneDiff {
    pub c: u32,
    pub a: u32,
    pub b: u32,
    pub expected: u32,
    pub actual: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SweepSummary {
    pub lanes_checked: u64,
    pub mismatches: u64,
    pub diffs: Vec<LaneDiff>,
}

impl SweepSummary {
    fn merge(mut self, other: SweepSummary) -> SweepSummary {
        self.lanes_checked += other.lanes_checked;
        self.mismatches += other.mismatches;
        self.diffs.extend(other.diffs);
        self.diffs.sort_unstable();
        self.diffs.truncate(MAX_DIFFS);
        self
    }

    fn record(&mut self, d: LaneDiff) {
        self.mismatches += 1;
        if self.diffs.len() < MAX_DIFFS {
            self.diffs.push(d);
        }
    }
}

pub fn default_shards() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

fn run_sharded<T: Sync>(
    items: &[T],
    shards: usize,
    work: impl Fn(&[T]) -> anyhow::Result<SweepSummary> + Sync,
) -> anyhow::Result<SweepSummary> {
    if items.is_empty() {
        return Ok(SweepSummary::default());
    }
    let per = items.len().div_ceil(shards.max(1));
    thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(per)
            .map(|chunk| s.spawn(|| work(chunk)))
            .collect();
        handles.into_iter().try_fold(SweepSummary::default(), |acc, h| {
            Ok(acc.merge(h.join().expect("sweep worker panicked")?))
        })
    })
}

/// Unfused float references factor through the product rounded into the
/// accumulator, so one `(rounded product, c)` addition serves every operand
/// pair with that rounded product.
struct Reference {
    dt: MacDatatype,
    rounded: Vec<u32>,
    memo: Vec<u32>,
    touched: Vec<u32>,
    c: u32,
}

const EMPTY: u32 = u32::MAX;

impl Reference {
    fn new(dt: &MacDatatype) -> anyhow::Result<Reference> {
        let (wa, wb) = (dt.a().width(), dt.b().width());
        let mut rounded = Vec::new();
        let mut memo = Vec::new();
        if let NumFormat::Float(acc) = dt.p() {
            rounded.reserve(1 << (wa + wb));
            for a in 0..1u32 << wa {
                let da = dt.a().decode(a)?;
                for b in 0..1u32 << wb {
                    let p = oracle_mul(&da, &dt.b().decode(b)?, dt);
                    rounded.push(acc.encode(&p.exact()));
                }
            }
            memo = vec![EMPTY; 1 << acc.width()];
        }
        Ok(Reference {
            dt: *dt,
            rounded,
            memo,
            touched: Vec::new(),
            c: 0,
        })
    }

    fn set_c(&mut self, c: u32) {
        for r in self.touched.drain(..) {
            self.memo[r as usize] = EMPTY;
        }
        self.c = c;
    }

    fn expect(&mut self, a: u32, b: u32) -> anyhow::Result<u32> {
        let NumFormat::Float(acc) = self.dt.p() else {
            return Ok(oracle_mac(a, b, self.c, &self.dt)?);
        };
        let r = self.rounded[((a << self.dt.b().width()) | b) as usize];
        if self.memo[r as usize] == EMPTY {
            let c = self.dt.c().decode(self.c)?.exact(acc.mant_bits());
            self.memo[r as usize] = acc.encode(&exact_add(&acc.exact(r), &c));
            self.touched.push(r);
        }
        Ok(self.memo[r as usize])
    }
}

/// Every `(a, b)` pair of a datatype with operands of at most 8 bits, against
/// every accumulator in `c_values`; all lanes of a slot share one `c`.
pub fn exhaustive_sweep(
    cfg: &MacConfig,
    dt: &MacDatatype,
    c_values: &[u32],
    shards: usize,
) -> anyhow::Result<SweepSummary> {
    anyhow::ensure!(
        dt.a().width() <= 8 && dt.b().width() <= 8,
        "exhaustive sweeps need operands of at most 8 bits, {dt} has {} and {}",
        dt.a().width(),
        dt.b().width()
    );
    let sel = cfg
        .select_of(dt)
        .ok_or_else(|| anyhow::anyhow!("{dt} is not configured"))?;
    let plan = cfg.plan(sel).clone();
    let (n_a, n_b) = (plan.a_offsets().len(), plan.b_offsets().len());
    let full_cross = plan.lanes() == n_a * n_b;
    let (ga, gb) = if full_cross { (n_a, n_b) } else { (1, 1) };
    let (count_a, count_b) = (1u32 << dt.a().width(), 1u32 << dt.b().width());

    run_sharded(c_values, shards, |cs| {
        let mut reference = Reference::new(dt)?;
        let mut pipe = Pipeline::new(cfg.clone());
        let mut pending = std::collections::VecDeque::new();
        let mut summary = SweepSummary::default();
        let mut a_vals = vec![0u32; n_a];
        let mut b_vals = vec![0u32; n_b];
        let check = |out: xtramac_core::pipeline::MacOutput,
                         pending: &mut std::collections::VecDeque<(u32, u32, u32)>,
                         reference: &mut Reference,
                         summary: &mut SweepSummary|
         -> anyhow::Result<()> {
            let (c, a0, b0) = pending.pop_front().expect("one pending entry per output");
            if reference.c != c {
                reference.set_c(c);
            }
            let lanes = if full_cross { plan.lanes() } else { 1 };
            for (k, &(i, j)) in plan.lane_map()[..lanes].iter().enumerate() {
                let (a, b) = if full_cross {
                    ((a0 + i as u32) % count_a, (b0 + j as u32) % count_b)
                } else {
                    (a0, b0)
                };
                let expected = reference.expect(a, b)?;
                summary.lanes_checked += 1;
                if out.lane_bits[k] != expected {
                    summary.record(LaneDiff {
                        c,
                        a,
                        b,
                        expected,
                        actual: out.lane_bits[k],
                    });
                }
            }
            Ok(())
        };
        for &c in cs {
            let c_lanes = vec![c; plan.lanes()];
            for a0 in (0..count_a).step_by(ga) {
                for b0 in (0..count_b).step_by(gb) {
                    let slot = if full_cross {
                        for (i, v) in a_vals.iter_mut().enumerate() {
                            *v = (a0 + i as u32) % count_a;
                        }
                        for (j, v) in b_vals.iter_mut().enumerate() {
                            *v = (b0 + j as u32) % count_b;
                        }
                        cfg.pack_slot(sel, &a_vals, &b_vals, &c_lanes)?
                    } else {
                        a_vals.fill(0);
                        b_vals.fill(0);
                        let (i, j) = plan.lane_map()[0];
                        a_vals[i] = a0;
                        b_vals[j] = b0;
                        cfg.pack_slot(sel, &a_vals, &b_vals, &c_lanes)?
                    };
                    pending.push_back((c, a0, b0));
                    if let Some(out) = pipe.step(Some(&slot))? {
                        check(out, &mut pending, &mut reference, &mut summary)?;
                    }
                }
            }
        }
        for out in pipe.drain() {
            check(out, &mut pending, &mut reference, &mut summary)?;
        }
        Ok(summary)
    })
}

/// `triples` random lane MACs of `dt`, each lane with its own sampled `c`,
/// checked lane by lane against the oracle.
pub fn random_sweep(
    cfg: &MacConfig,
    dt: &MacDatatype,
    triples: u64,
    seed: u64,
    shards: usize,
) -> anyhow::Result<SweepSummary> {
    let sel = cfg
        .select_of(dt)
        .ok_or_else(|| anyhow::anyhow!("{dt} is not configured"))?;
    let lanes = cfg.plan(sel).lanes() as u64;
    let slots = triples.div_ceil(lanes);
    let shards = shards.max(1) as u64;
    let parts: Vec<(u64, u64)> = (0..shards)
        .map(|s| (s, slots / shards + u64::from(s < slots % shards)))
        .collect();
    run_sharded(&parts, shards as usize, |parts| {
        let mut summary = SweepSummary::default();
        for &(shard, n) in parts {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ shard.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut pipe = Pipeline::new(cfg.clone());
            let mut pending: std::collections::VecDeque<IssueSlot> = Default::default();
            let check = |out: xtramac_core::pipeline::MacOutput,
                             pending: &mut std::collections::VecDeque<IssueSlot>,
                             summary: &mut SweepSummary|
             -> anyhow::Result<()> {
                let slot = pending.pop_front().expect("one pending slot per output");
                for (k, expected) in cfg.reference_lanes(&slot)?.into_iter().enumerate() {
                    summary.lanes_checked += 1;
                    if out.lane_bits[k] != expected {
                        let (a, b) = cfg.lane_operands(&slot, k)?;
                        summary.record(LaneDiff {
                            c: slot.c_lanes[k],
                            a,
                            b,
                            expected,
                            actual: out.lane_bits[k],
                        });
                    }
                }
                Ok(())
            };
            let plan = cfg.plan(sel);
            let (n_a, n_b) = (plan.a_offsets().len(), plan.b_offsets().len());
            for _ in 0..n {
                let pick = |rng: &mut ChaCha8Rng, fmt: &NumFormat| {
                    if rng.gen_ratio(1, 16) {
                        sample::edge_value(rng, fmt)
                    } else {
                        sample::operand(rng, fmt)
                    }
                };
                let a: Vec<u32> = (0..n_a).map(|_| pick(&mut rng, &dt.a())).collect();
                let b: Vec<u32> = (0..n_b).map(|_| pick(&mut rng, &dt.b())).collect();
                let c: Vec<u32> = plan
                    .lane_map()
                    .iter()
                    .map(|&(i, j)| sample::accumulator(&mut rng, dt, a[i], b[j]))
                    .collect();
                let slot = cfg.pack_slot(sel, &a, &b, &c)?;
                pending.push_back(slot);
                if let Some(out) = pipe.step(Some(&slot))? {
                    check(out, &mut pending, &mut summary)?;
                }
            }
            for out in pipe.drain() {
                check(out, &mut pending, &mut summary)?;
            }
        }
        Ok(summary)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use xtramac_core::FormatRegistry;

    fn dt(id: &str) -> MacDatatype {
        MacDatatype::parse(id, &FormatRegistry::default()).unwrap()
    }

    #[test]
    fn memoized_reference_matches_oracle() {
        let d = dt("fp8xfp8");
        let mut r = Reference::new(&d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let c = sample::operand(&mut rng, &d.c());
            r.set_c(c);
            for _ in 0..500 {
                let (a, b) = (rng.gen_range(0..256), rng.gen_range(0..256));
                assert_eq!(r.expect(a, b).unwrap(), oracle_mac(a, b, c, &d).unwrap());
            }
        }
    }

    #[test]
    fn small_exhaustive_sweeps_pass() {
        for id in ["fp4xfp4", "int4xint4", "int2xint2", "int4xfp8", "fp8altxfp8alt"] {
            let d = dt(id);
            let cfg = MacConfig::new(&[d]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let cs: Vec<u32> = (0..8).map(|_| sample::operand(&mut rng, &d.c())).collect();
            let s = exhaustive_sweep(&cfg, &d, &cs, 3).unwrap();
            assert_eq!(s.mismatches, 0, "{id}: {:?}", s.diffs);
            let pairs = 1u64 << (d.a().width() + d.b().width());
            assert_eq!(s.lanes_checked, pairs * 8, "{id}");
        }
    }

    #[test]
    fn random_sweep_counts_and_determinism() {
        let d = dt("bf16xbf16");
        let cfg = MacConfig::new(&[d]).unwrap();
        let s = random_sweep(&cfg, &d, 2001, 4, 2).unwrap();
        assert_eq!((s.lanes_checked, s.mismatches), (2002, 0));
    }

    #[test]
    fn sweeps_refuse_wide_operands() {
        let d = dt("bf16xbf16");
        let cfg = MacConfig::new(&[d]).unwrap();
        assert!(exhaustive_sweep(&cfg, &d, &[0], 1).is_err());
    }
}
