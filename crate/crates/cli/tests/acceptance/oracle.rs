//! Brute-force reference implementations, written without the library's
//! helpers and, where possible, along a different algebraic route.

pub const EPS: f64 = 1e-6;

pub fn smooth(p: [f64; 3], eps: f64) -> [f64; 3] {
    let mut c = p;
    for v in c.iter_mut() {
        if *v < eps {
            *v = eps;
        }
    }
    let s = c[0] + c[1] + c[2];
    [c[0] / s, c[1] / s, c[2] / s]
}

/// Sum of p·log2(p/q) rescaled to the requested base.
pub fn kl(p: [f64; 3], q: [f64; 3], base2: bool) -> f64 {
    let (p, q) = (smooth(p, EPS), smooth(q, EPS));
    let mut bits = 0.0;
    for i in 0..3 {
        if p[i] > 0.0 {
            bits += p[i] * (p[i].log2() - q[i].log2());
        }
    }
    let bits = bits.max(0.0);
    if base2 {
        bits
    } else {
        bits * std::f64::consts::LN_2
    }
}

fn shannon(p: [f64; 3]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Jensen-Shannon distance via entropies: H(M) − (H(P) + H(Q)) / 2.
pub fn jsd(p: [f64; 3], q: [f64; 3], base2: bool) -> f64 {
    let m = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0];
    let mut js = shannon(m) - 0.5 * (shannon(p) + shannon(q));
    if base2 {
        js /= std::f64::consts::LN_2;
    }
    js.max(0.0).sqrt()
}

/// Largest probability gap over all eight events.
pub fn tvd(p: [f64; 3], q: [f64; 3]) -> f64 {
    let mut best: f64 = 0.0;
    for mask in 0u8..8 {
        let gap: f64 = (0..3).filter(|i| mask & (1 << i) != 0).map(|i| p[i] - q[i]).sum();
        best = best.max(gap.abs());
    }
    best
}

/// H(P) + KL(P || Q') with only Q smoothed.
pub fn ce(p: [f64; 3], q: [f64; 3]) -> f64 {
    let q = smooth(q, EPS);
    shannon(p)
        + (0..3)
            .filter(|&i| p[i] > 0.0)
            .map(|i| p[i] * (p[i] / q[i]).ln())
            .sum::<f64>()
}

/// Per-class F1 from explicit counting, weighted by gold support.
pub fn weighted_f1(pred: &[usize], gold: &[usize]) -> f64 {
    let n = gold.len() as f64;
    let mut total = 0.0;
    for class in 0..3 {
        let support = gold.iter().filter(|&&g| g == class).count();
        if support == 0 {
            continue;
        }
        let predicted = pred.iter().filter(|&&p| p == class).count();
        let hits = pred
            .iter()
            .zip(gold)
            .filter(|(p, g)| **p == class && **g == class)
            .count();
        let f1 = if hits == 0 {
            0.0
        } else {
            2.0 * hits as f64 / (predicted + support) as f64
        };
        total += f1 * support as f64 / n;
    }
    total
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Squared sample distance covariance from the triple-sum expansion
/// S1 + S2 − 2·S3, without double centering.
fn dcov2(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let n = x.len();
    let nf = n as f64;
    let (mut s1, mut sx, mut sy, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        for l in 0..n {
            let dx = dist(&x[k], &x[l]);
            let dy = dist(&y[k], &y[l]);
            s1 += dx * dy;
            sx += dx;
            sy += dy;
            for m in 0..n {
                s3 += dx * dist(&y[k], &y[m]);
            }
        }
    }
    s1 / (nf * nf) + (sx / (nf * nf)) * (sy / (nf * nf)) - 2.0 * s3 / (nf * nf * nf)
}

pub fn dcor(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let vx = dcov2(x, x);
    let vy = dcov2(y, y);
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    (dcov2(x, y).max(0.0) / (vx * vy).sqrt()).sqrt().min(1.0)
}

pub fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// 6 option mappings times every ordered subset of size ≥ 1; a bare
/// prompt when there is nothing to order.
pub fn plan_size(m: usize) -> usize {
    if m == 0 {
        return 6;
    }
    6 * (1..=m).map(|n| binom(m, n) * factorial(n)).sum::<usize>()
}

/// All ordered selections of distinct items from 0..m, by explicit search.
pub fn ordered_subsets(m: usize) -> Vec<Vec<usize>> {
    fn go(m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        for i in 0..m {
            if !cur.contains(&i) {
                cur.push(i);
                go(m, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(m, &mut Vec::new(), &mut out);
    out
}

pub fn softmax(l: [f64; 3], tau: f64) -> [f64; 3] {
    let e: Vec<f64> = l.iter().map(|v| (v / tau).exp()).collect();
    let s: f64 = e.iter().sum();
    [e[0] / s, e[1] / s, e[2] / s]
}
