use neurosieve::qs::{FactorBase, FactorBaseParams, relation_at};
use neurosieve::cpu_sieve::{cpu_sieve_run, cpu_threshold_candidates, LogPrecision, driver_threshold_offset};

fn main() {
    let n: u128 = 43039;
    let mut bound = 12u64;
    for pass in 0..9u32 {
        let m_len = (1u64 << 12) << pass;
        let params = FactorBaseParams { b_bound: Some(bound), ..FactorBaseParams::default() };
        match FactorBase::build(n, m_len, &params) {
            Ok(fb) => {
                let arr = cpu_sieve_run(&fb, LogPrecision::Scaled { scale: 1.0 }, None);
                let cands = cpu_threshold_candidates(&arr, &fb, driver_threshold_offset(fb.bound));
                let rels: usize = cands.iter().filter(|&&x| relation_at(&fb, x).unwrap().is_some()).count();
                println!("pass {pass}: M=2^{} B={bound} b={} relations={rels}", m_len.trailing_zeros(), fb.b);
                if rels * 2 < fb.b + 1 { bound = (bound * 2).min(1 << 20); }
            }
            Err(e) => { println!("pass {pass}: B={bound} -> {e}"); return; }
        }
    }
}
