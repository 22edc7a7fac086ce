//! Brute-force reference implementations used only by tests. They work on
//! plain sets and vertex loops and share no code with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use hyperlens_core::hypercore::Hypergraph;

pub type Set = BTreeSet<usize>;

pub fn sets(h: &Hypergraph) -> Vec<Set> {
    h.edges.iter().map(|e| e.members.iter().copied().collect()).collect()
}

/// `a/b > c/d` for positive denominators, exactly.
fn frac_gt(a: u64, b: u64, c: u64, d: u64) -> bool {
    (a as u128) * (d as u128) > (c as u128) * (b as u128)
}

fn frac_eq(a: u64, b: u64, c: u64, d: u64) -> bool {
    (a as u128) * (d as u128) == (c as u128) * (b as u128)
}

/// Greedy cover of `target` by `gen`.
///
/// First pick: largest `T²/|g|`, then smaller `|g|`, then the
/// `occurrence`-th tied candidate in index order (cyclically).
/// Later picks: most newly covered vertices, then larger `T²/|g|`, then
/// lower index. Returns the picked indices and the raw score.
pub fn greedy_cover(target: &Set, gen: &[Set], occurrence: usize) -> (Vec<usize>, f64) {
    let t: Vec<u64> = gen.iter().map(|g| g.intersection(target).count() as u64).collect();
    let len: Vec<u64> = gen.iter().map(|g| g.len() as u64).collect();
    let cands: Vec<usize> = (0..gen.len()).filter(|&j| t[j] > 0).collect();
    if cands.is_empty() {
        return (Vec::new(), 0.0);
    }
    let c = |j: usize| (t[j] * t[j], len[j]);
    let beats_first = |a: usize, b: usize| {
        let ((na, da), (nb, db)) = (c(a), c(b));
        frac_gt(na, da, nb, db) || (frac_eq(na, da, nb, db) && len[a] < len[b])
    };
    let mut best = cands[0];
    for &j in &cands[1..] {
        if beats_first(j, best) {
            best = j;
        }
    }
    let tied: Vec<usize> = cands
        .iter()
        .copied()
        .filter(|&j| !beats_first(j, best) && !beats_first(best, j))
        .collect();
    let first = tied[occurrence % tied.len()];

    let size = target.len() as f64;
    let cval = |j: usize| (t[j] * t[j]) as f64 / len[j] as f64;
    let mut picked = vec![first];
    let mut score = cval(first) / size;
    let mut covered: Set = gen[first].intersection(target).copied().collect();
    while covered.len() < target.len() {
        let mut choice: Option<(usize, usize)> = None;
        for &j in &cands {
            if picked.contains(&j) {
                continue;
            }
            let fresh = gen[j].intersection(target).filter(|v| !covered.contains(v)).count();
            if fresh == 0 {
                continue;
            }
            let better = match choice {
                None => true,
                Some((b, bf)) => {
                    fresh > bf || (fresh == bf && frac_gt(c(j).0, c(j).1, c(b).0, c(b).1))
                }
            };
            if better {
                choice = Some((j, fresh));
            }
        }
        let Some((j, _)) = choice else { break };
        picked.push(j);
        score += cval(j) / (size * picked.len() as f64);
        covered.extend(gen[j].intersection(target).copied());
    }
    (picked, score)
}

pub struct CesOracle {
    pub s: f64,
    pub r: f64,
    pub ces: f64,
    pub traces: Vec<Vec<usize>>,
}

pub fn ces(gt: &Hypergraph, gen: &Hypergraph, weighted: bool) -> CesOracle {
    let gen_sets = sets(gen);
    let mut seen: BTreeMap<Set, usize> = BTreeMap::new();
    let mut used = Set::new();
    let mut traces = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    for e in sets(gt) {
        let occ = seen.entry(e.clone()).or_insert(0);
        let (picked, raw) = greedy_cover(&e, &gen_sets, *occ);
        *occ += 1;
        used.extend(picked.iter().copied());
        let w = if weighted { e.len() as f64 } else { 1.0 };
        num += w * raw.min(1.0);
        den += w;
        traces.push(picked);
    }
    let s = num / den;
    let r = used.len() as f64 / gen.m() as f64;
    CesOracle { s, r, ces: s * r, traces }
}

fn plogp(count: usize, n: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        let p = count as f64 / n as f64;
        -p * p.log2()
    }
}

fn indicator(e: &Set, n: usize) -> Vec<bool> {
    (0..n).map(|v| e.contains(&v)).collect()
}

/// Overlapping NMI with the max-entropy normalizer, computed from explicit
/// indicator vectors.
pub fn hnmi(x: &Hypergraph, y: &Hypergraph) -> f64 {
    let n = x.n;
    let xs: Vec<Vec<bool>> = sets(x).iter().map(|e| indicator(e, n)).collect();
    let ys: Vec<Vec<bool>> = sets(y).iter().map(|e| indicator(e, n)).collect();
    let entropy = |v: &Vec<bool>| {
        let ones = v.iter().filter(|&&b| b).count();
        plogp(ones, n) + plogp(n - ones, n)
    };
    let cond = |a: &Vec<bool>, b: &Vec<bool>| -> f64 {
        // Joint counts over (a, b) in {0,1}².
        let mut joint = [[0usize; 2]; 2];
        for v in 0..n {
            joint[a[v] as usize][b[v] as usize] += 1;
        }
        let h00 = plogp(joint[0][0], n);
        let h11 = plogp(joint[1][1], n);
        let h01 = plogp(joint[0][1], n);
        let h10 = plogp(joint[1][0], n);
        if h11 + h00 >= h01 + h10 {
            let hb = plogp(joint[0][1] + joint[1][1], n) + plogp(joint[0][0] + joint[1][0], n);
            h00 + h01 + h10 + h11 - hb
        } else {
            entropy(a)
        }
    };
    let cover_cond = |a: &[Vec<bool>], b: &[Vec<bool>]| -> f64 {
        a.iter()
            .map(|ai| b.iter().map(|bj| cond(ai, bj)).fold(entropy(ai), f64::min))
            .sum()
    };
    let hx: f64 = xs.iter().map(entropy).sum();
    let hy: f64 = ys.iter().map(entropy).sum();
    let norm = hx.max(hy);
    if norm == 0.0 {
        let mut a = sets(x);
        let mut b = sets(y);
        a.sort();
        b.sort();
        return if a == b { 1.0 } else { 0.0 };
    }
    let mi = 0.5 * ((hx - cover_cond(&xs, &ys)) + (hy - cover_cond(&ys, &xs)));
    (mi / norm).clamp(0.0, 1.0)
}

fn choose2(k: usize) -> f64 {
    (k * k.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index of two hard labelings.
pub fn ari(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut ra: HashMap<usize, usize> = HashMap::new();
    let mut rb: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sa: f64 = ra.values().map(|&c| choose2(c)).sum();
    let sb: f64 = rb.values().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(a.len());
    let max = 0.5 * (sa + sb);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// The greedy cover on bitmasks, for enumeration. Same rules as
/// [`greedy_cover`] with `occurrence = 0`.
pub fn greedy_cover_bits(target: u32, gen: &[u32]) -> (Vec<usize>, f64) {
    let t = |g: u32| (g & target).count_ones() as u64;
    let len = |g: u32| g.count_ones() as u64;
    let mut first: Option<usize> = None;
    for (j, &g) in gen.iter().enumerate() {
        if t(g) == 0 {
            continue;
        }
        let better = match first {
            None => true,
            Some(b) => {
                let (tj, tb) = (t(g), t(gen[b]));
                let lhs = tj * tj * len(gen[b]);
                let rhs = tb * tb * len(g);
                lhs > rhs || (lhs == rhs && len(g) < len(gen[b]))
            }
        };
        if better {
            first = Some(j);
        }
    }
    let Some(first) = first else { return (Vec::new(), 0.0) };
    let size = target.count_ones() as f64;
    let c = |g: u32| (t(g) * t(g)) as f64 / len(g) as f64;
    let mut picked = vec![first];
    let mut score = c(gen[first]) / size;
    let mut covered = gen[first] & target;
    while covered != target {
        let mut choice: Option<(usize, u32)> = None;
        for (j, &g) in gen.iter().enumerate() {
            let fresh = (g & target & !covered).count_ones();
            if fresh == 0 || picked.contains(&j) {
                continue;
            }
            let better = match choice {
                None => true,
                Some((b, bf)) => {
                    let (tj, tb) = (t(g), t(gen[b]));
                    fresh > bf || (fresh == bf && tj * tj * len(gen[b]) > tb * tb * len(g))
                }
            };
            if better {
                choice = Some((j, fresh));
            }
        }
        let Some((j, _)) = choice else { break };
        picked.push(j);
        score += c(gen[j]) / (size * picked.len() as f64);
        covered |= gen[j] & target;
    }
    (picked, score)
}

pub struct Exhaustive {
    pub cases: u64,
    pub mismatches: Vec<String>,
}

/// Compares the library's greedy trace with [`greedy_cover_bits`] on every
/// target edge and every ordered list of at most `max_m` generated edges
/// over `n` vertices.
///
/// Relabeling vertices inside the target, or outside it, maps one input to
/// another with the same trace. Every list is such a relabeling of one whose
/// target is `0..s` and whose first edge is `{0..a} ∪ {s..s+b}`, so only
/// those are visited.
pub fn exhaustive_cover_check(n: usize, max_m: usize) -> Exhaustive {
    use hyperlens_core::simeval::CoverIndex;

    let all: Vec<u32> = (1u32..1 << n).collect();
    let members = |mask: u32| -> Vec<usize> { (0..n).filter(|&v| mask >> v & 1 == 1).collect() };
    let member_lists: Vec<Vec<usize>> = (0u32..1 << n).map(members).collect();
    let mut out = Exhaustive { cases: 0, mismatches: Vec::new() };
    for s in 1..=n {
        let target = (1u32 << s) - 1;
        let target_members = &member_lists[target as usize];
        let mut firsts = Vec::new();
        for a in 0..=s {
            for b in 0..=n - s {
                if a + b > 0 {
                    firsts.push(((1u32 << a) - 1) | (((1u32 << b) - 1) << s));
                }
            }
        }
        for m in 1..=max_m {
            let mut odometer = vec![0usize; m - 1];
            for &first in &firsts {
                loop {
                    let mut gen = Vec::with_capacity(m);
                    gen.push(first);
                    gen.extend(odometer.iter().map(|&i| all[i]));
                    let expected = greedy_cover_bits(target, &gen);
                    let index = CoverIndex::new(n, gen.iter().map(|&g| member_lists[g as usize].as_slice()).collect());
                    let got = index.cover(target_members, 0);
                    out.cases += 1;
                    if got.selected != expected.0 || (got.raw_score - expected.1).abs() > 1e-12 {
                        if out.mismatches.len() < 10 {
                            out.mismatches.push(format!(
                                "target {target:#b} gen {gen:?}: library {:?}/{} oracle {:?}/{}",
                                got.selected, got.raw_score, expected.0, expected.1
                            ));
                        }
                    }
                    // Advance the odometer over the remaining m-1 slots.
                    let mut k = 0;
                    while k < odometer.len() {
                        odometer[k] += 1;
                        if odometer[k] < all.len() {
                            break;
                        }
                        odometer[k] = 0;
                        k += 1;
                    }
                    if k == odometer.len() {
                        break;
                    }
                }
            }
        }
    }
    out
}

/// `k` isotropic Gaussian blobs of `per` points in `d` dimensions, centers
/// drawn uniformly from `[-scale, scale]^d`. Returns the matrix and the
/// true blob of each row.
pub fn gaussian_blobs(
    k: usize,
    per: usize,
    d: usize,
    scale: f64,
    sigma: f64,
    seed: u64,
) -> (hyperlens_core::hypercore::EmbeddingMatrix, Vec<usize>) {
    use rand::RngExt;
    use rand_distr::{Distribution, Normal};

    let mut rng = hyperlens_core::rng::seeded(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut rows = Vec::with_capacity(k * per);
    let mut labels = Vec::with_capacity(k * per);
    for c in 0..k {
        let center: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
        for _ in 0..per {
            rows.push(center.iter().map(|x| x + noise.sample(&mut rng)).collect::<Vec<f64>>());
            labels.push(c);
        }
    }
    (hyperlens_core::hypercore::EmbeddingMatrix::from_rows(&rows, "blobs").unwrap(), labels)
}

/// Fraction of each point's `k_in` nearest neighbors in `a` that are among
/// its `k_out` nearest neighbors in `b`, averaged over points.
pub fn knn_preservation(a: &[Vec<f64>], b: &[[f64; 2]], k_in: usize, k_out: usize) -> f64 {
    let n = a.len();
    let nearest = |dist: &dyn Fn(usize, usize) -> f64, i: usize, k: usize| -> Vec<usize> {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&x, &y| dist(i, x).total_cmp(&dist(i, y)).then(x.cmp(&y)));
        others.truncate(k);
        others
    };
    let da = |i: usize, j: usize| a[i].iter().zip(&a[j]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let db = |i: usize, j: usize| (b[i][0] - b[j][0]).powi(2) + (b[i][1] - b[j][1]).powi(2);
    let mut total = 0.0;
    for i in 0..n {
        let want = nearest(&da, i, k_in);
        let got = nearest(&db, i, k_out);
        total += want.iter().filter(|j| got.contains(j)).count() as f64 / want.len() as f64;
    }
    total / n as f64
}

/// Pairs of layout circles that overlap, checked pair by pair.
pub fn overlapping_circles(nodes: &[(f64, f64, f64)]) -> usize {
    let mut count = 0;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let (xi, yi, ri) = nodes[i];
            let (xj, yj, rj) = nodes[j];
            let d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
            if d < ri + rj - 1e-9 {
                count += 1;
            }
        }
    }
    count
}
