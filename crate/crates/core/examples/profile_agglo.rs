use agglo_core::attention::{assign_classes, AggloAttentionParams};
use agglo_core::tensor::{concat, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let (b, d, m) = (32usize, 512usize, 8usize);
    for &t in &[1024usize, 2048] {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let n = b * t * d;
        let x = Tensor::<f32>::new(&[b, t, d], (0..n).map(|_| r.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let p = AggloAttentionParams::<f32>::init(d, m, &mut r)
            .unwrap()
            .detached();

        let reps = 3;
        let mut stage = vec![0.0f64; 8];
        for _ in 0..reps {
            let t0 = Instant::now();
            let c_ref = assign_classes(&x, &p.w_ref, &p.b_ref).unwrap().0;
            let c_query = assign_classes(&x, &p.w_query, &p.b_query).unwrap().0;
            stage[0] += t0.elapsed().as_secs_f64();

            let mut parts = Vec::new();
            for k in 0..m {
                let t1 = Instant::now();
                let ck = c_ref.slice(2, k, 1).unwrap();
                let cq = c_query.slice(2, k, 1).unwrap();
                stage[1] += t1.elapsed().as_secs_f64();
                let t2 = Instant::now();
                let xp = x.matmul(&p.class_proj[k]).unwrap();
                stage[2] += t2.elapsed().as_secs_f64();
                let t3 = Instant::now();
                let weighted = ck.mul(&xp).unwrap();
                stage[3] += t3.elapsed().as_secs_f64();
                let t4 = Instant::now();
                let rsum = weighted.cumsum(1).unwrap();
                let rmass = ck.cumsum(1).unwrap();
                stage[4] += t4.elapsed().as_secs_f64();
                let t5 = Instant::now();
                let avg = rsum.div(&rmass).unwrap();
                stage[5] += t5.elapsed().as_secs_f64();
                let t6 = Instant::now();
                parts.push(cq.mul(&avg).unwrap());
                stage[6] += t6.elapsed().as_secs_f64();
            }
            let t7 = Instant::now();
            let _out = concat(&parts, 2).unwrap().matmul(&p.w_out).unwrap();
            stage[7] += t7.elapsed().as_secs_f64();
        }
        let names = [
            "assign",
            "slice",
            "proj_matmul",
            "weight_mul",
            "cumsum",
            "div",
            "query_mul",
            "concat+wout",
        ];
        println!("t={t}:");
        let total: f64 = stage.iter().sum();
        for (n2, s) in names.iter().zip(&stage) {
            println!(
                "  {n2:12} {:8.1} ms ({:4.1}%)",
                s / reps as f64 * 1000.0,
                100.0 * s / total
            );
        }
        println!("  {:12} {:8.1} ms", "TOTAL", total / reps as f64 * 1000.0);
    }
}
