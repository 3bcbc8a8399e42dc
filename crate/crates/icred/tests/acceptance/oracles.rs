//! Brute-force metric implementations that share nothing with the library
//! beyond the two constants.

use icred_core::metrics::{BLEU_EPSILON, ROUGE_BETA};

fn occurrences(tokens: &[u8], gram: &[u8]) -> usize {
    (0..tokens.len())
        .filter(|&i| i + gram.len() <= tokens.len() && &tokens[i..i + gram.len()] == gram)
        .count()
}

/// Corpus BLEU with clipped counts found by rescanning, and the geometric
/// mean taken as a product of roots.
pub fn bleu(cands: &[Vec<u8>], refs: &[Vec<u8>], max_n: usize) -> f64 {
    let c_len: usize = cands.iter().map(Vec::len).sum();
    let r_len: usize = refs.iter().map(Vec::len).sum();
    if c_len == 0 {
        return if r_len == 0 { 100.0 } else { 0.0 };
    }
    let mut precisions = Vec::new();
    for n in 1..=max_n {
        let (mut matched, mut total) = (0usize, 0usize);
        for (c, r) in cands.iter().zip(refs) {
            if c.len() < n {
                continue;
            }
            let mut seen: Vec<&[u8]> = Vec::new();
            for i in 0..=c.len() - n {
                let gram = &c[i..i + n];
                total += 1;
                if !seen.contains(&gram) {
                    seen.push(gram);
                    matched += occurrences(c, gram).min(occurrences(r, gram));
                }
            }
        }
        if total > 0 {
            let num = if matched == 0 { BLEU_EPSILON } else { matched as f64 };
            precisions.push(num / total as f64);
        }
    }
    let k = precisions.len() as f64;
    let geo: f64 = precisions.iter().map(|p| p.powf(1.0 / k)).product();
    let bp = if c_len > r_len {
        1.0
    } else {
        (1.0 - r_len as f64 / c_len as f64).exp()
    };
    100.0 * bp * geo
}

fn is_subsequence(sub: &[u8], of: &[u8]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|x| it.any(|y| y == x))
}

/// Longest common subsequence by enumerating subsets of the shorter side.
pub fn lcs(a: &[u8], b: &[u8]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let sub: Vec<u8> = (0..short.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| short[i])
            .collect();
        if sub.len() > best && is_subsequence(&sub, long) {
            best = sub.len();
        }
    }
    best
}

pub fn rouge_l(cands: &[Vec<u8>], refs: &[Vec<u8>]) -> f64 {
    let mut total = 0.0;
    for (c, r) in cands.iter().zip(refs) {
        total += if c.is_empty() && r.is_empty() {
            1.0
        } else {
            let l = lcs(c, r) as f64;
            if l == 0.0 {
                0.0
            } else {
                let (p, rc) = (l / c.len() as f64, l / r.len() as f64);
                let b2 = ROUGE_BETA * ROUGE_BETA;
                (1.0 + b2) * p * rc / (rc + b2 * p)
            }
        };
    }
    100.0 * total / cands.len() as f64
}
