use agglo_core::data::{synthetic_corpus, CharVocab};
use std::collections::HashMap;

fn main() {
    let text = synthetic_corpus(1_000_000, 12345);
    let ids = CharVocab::encode(&text);
    println!("first 200 chars: {}", &text[..200]);

    let mut uni = [0f64; 27];
    for &i in &ids {
        uni[i as usize] += 1.0;
    }
    let n = ids.len() as f64;
    let h1: f64 = uni
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum();
    println!("H(unigram) = {h1:.3} bits/char");

    for order in 1usize..=3 {
        let mut ctx: HashMap<Vec<u32>, HashMap<u32, f64>> = HashMap::new();
        for w in ids.windows(order + 1) {
            *ctx.entry(w[..order].to_vec())
                .or_default()
                .entry(w[order])
                .or_insert(0.0) += 1.0;
        }
        let total = (ids.len() - order) as f64;
        let mut h = 0.0;
        for (_, nexts) in &ctx {
            let csum: f64 = nexts.values().sum();
            for &c in nexts.values() {
                let p_joint = c / total;
                let p_cond = c / csum;
                h += -p_joint * p_cond.log2();
            }
        }
        println!(
            "H(order {order}) = {h:.3} bits/char (contexts: {})",
            ctx.len()
        );
    }
}
