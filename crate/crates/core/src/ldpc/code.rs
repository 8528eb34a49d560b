use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{child_rng, stream, SimRng};

/// Binary linear code given by a sparse parity-check matrix, with a
/// systematic encoder derived from its reduced row echelon form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcCode {
    n: usize,
    /// Column indices of each check, sorted.
    checks: Vec<Vec<usize>>,
    /// Check indices of each variable, sorted.
    vars: Vec<Vec<usize>>,
    encoder: Encoder,
}

/// Echelon form of `H`: `rows[i]` has its leading one at `pivots[i]` and is
/// zero on every other pivot column. Information bits sit at `free`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Encoder {
    pivots: Vec<usize>,
    free: Vec<usize>,
    rows: Vec<Vec<u64>>,
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

fn get_bit(row: &[u64], j: usize) -> bool {
    (row[j / 64] >> (j % 64)) & 1 == 1
}

impl Encoder {
    fn new(n: usize, checks: &[Vec<usize>]) -> Self {
        let w = words(n);
        let mut rows: Vec<Vec<u64>> = checks
            .iter()
            .map(|c| {
                let mut r = vec![0u64; w];
                for &j in c {
                    r[j / 64] ^= 1 << (j % 64);
                }
                r
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let Some(p) = (rank..rows.len()).find(|&i| get_bit(&rows[i], col)) else { continue };
            rows.swap(rank, p);
            let pivot_row = rows[rank].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != rank && get_bit(row, col) {
                    for (a, b) in row.iter_mut().zip(&pivot_row) {
                        *a ^= b;
                    }
                }
            }
            pivots.push(col);
            rank += 1;
        }
        rows.truncate(rank);
        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&p| is_pivot[p] = true);
        let free = (0..n).filter(|&j| !is_pivot[j]).collect();
        Self { pivots, free, rows }
    }
}

impl LdpcCode {
    /// Builds a code from the column indices of each check.
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        let mut vars = vec![Vec::new(); n];
        let mut checks = checks;
        for (c, row) in checks.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InfeasibleCode(format!("check {c} repeats a column")));
            }
            for &j in row.iter() {
                if j >= n {
                    return Err(Error::InfeasibleCode(format!("check {c} references column {j} >= n = {n}")));
                }
                vars[j].push(c);
            }
        }
        let encoder = Encoder::new(n, &checks);
        Ok(Self { n, checks, vars, encoder })
    }

    /// Block length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Information bits per block: `n - rank(H)`.
    pub fn k(&self) -> usize {
        self.encoder.free.len()
    }

    pub fn num_checks(&self) -> usize {
        self.checks.len()
    }

    pub fn rank(&self) -> usize {
        self.encoder.pivots.len()
    }

    /// Dependent rows of `H`; the rate exceeds the design rate by this many
    /// bits per block.
    pub fn rank_deficiency(&self) -> usize {
        self.checks.len() - self.rank()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    pub fn design_rate(&self) -> f64 {
        1.0 - self.checks.len() as f64 / self.n as f64
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    pub fn variables(&self) -> &[Vec<usize>] {
        &self.vars
    }

    /// Codeword positions carrying the information bits, ascending.
    pub fn info_positions(&self) -> &[usize] {
        &self.encoder.free
    }

    pub fn syndrome(&self, word: &[u8]) -> Vec<u8> {
        self.checks.iter().map(|c| c.iter().fold(0u8, |acc, &j| acc ^ (word[j] & 1))).collect()
    }

    pub fn is_codeword(&self, word: &[u8]) -> bool {
        word.len() == self.n && self.checks.iter().all(|c| c.iter().fold(0u8, |acc, &j| acc ^ (word[j] & 1)) == 0)
    }

    /// Length of the shortest cycle in the Tanner graph, `None` if acyclic.
    pub fn girth(&self) -> Option<usize> {
        let nv = self.n;
        let nodes = nv + self.checks.len();
        let neighbors = |u: usize| -> &[usize] { if u < nv { &self.vars[u] } else { &self.checks[u - nv] } };
        let node = |u: usize, x: usize| if u < nv { nv + x } else { x };
        let mut best: Option<usize> = None;
        let mut dist = vec![usize::MAX; nodes];
        let mut parent = vec![usize::MAX; nodes];
        for s in 0..nv {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if best.is_some_and(|b| 2 * dist[u] + 1 >= b) {
                    break;
                }
                for &x in neighbors(u) {
                    let v = node(u, x);
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        parent[v] = u;
                        queue.push_back(v);
                    } else if parent[u] != v {
                        let len = dist[u] + dist[v] + 1;
                        best = Some(best.map_or(len, |b| b.min(len)));
                    }
                }
            }
        }
        best
    }

    /// Systematic encoding: information bits are placed at
    /// [`info_positions`](Self::info_positions) and the remaining bits solve
    /// `H c = 0`.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        crate::error::check_len(self.k(), info.len())?;
        let mut c = vec![0u8; self.n];
        let mut packed = vec![0u64; words(self.n)];
        for (&j, &b) in self.encoder.free.iter().zip(info) {
            c[j] = b & 1;
            if b & 1 == 1 {
                packed[j / 64] |= 1 << (j % 64);
            }
        }
        for (row, &p) in self.encoder.rows.iter().zip(&self.encoder.pivots) {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            c[p] = (ones & 1) as u8;
        }
        Ok(c)
    }

    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.encoder.free.iter().map(|&j| codeword[j]).collect()
    }

    /// Plain-text sparse form: a header line `n m`, then one line per check
    /// with its space-separated column indices.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.checks.len());
        for c in &self.checks {
            let line: Vec<String> = c.iter().map(|j| j.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hl, header) = lines.next().ok_or(Error::CodeFormat { line: 1, reason: "missing header".into() })?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::CodeFormat { line: hl + 1, reason: format!("bad integer {t:?}") }))
            .collect::<Result<_>>()?;
        let [n, m] = nums[..] else {
            return Err(Error::CodeFormat { line: hl + 1, reason: "header must be `n m`".into() });
        };
        let mut checks = Vec::with_capacity(m);
        for (i, line) in lines {
            let row: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::CodeFormat { line: i + 1, reason: format!("bad integer {t:?}") }))
                .collect::<Result<_>>()?;
            if let Some(&j) = row.iter().find(|&&j| j >= n) {
                return Err(Error::CodeFormat { line: i + 1, reason: format!("column {j} out of range") });
            }
            checks.push(row);
        }
        if checks.len() != m {
            return Err(Error::CodeFormat { line: 1, reason: format!("header announces {m} checks, found {}", checks.len()) });
        }
        Self::from_checks(n, checks)
    }
}

const CONSTRUCTION_ATTEMPTS: u64 = 64;

/// Regular LDPC code by progressive edge growth: each new edge of a
/// variable goes to a check outside the variable's current neighborhood
/// (or, failing that, as far away as possible), preferring checks with the
/// fewest edges, ties broken by the seeded RNG.
pub fn build_regular_ldpc(n: usize, col_weight: usize, row_weight: usize, seed: u64) -> Result<LdpcCode> {
    if n == 0 || col_weight == 0 || row_weight == 0 {
        return Err(Error::InfeasibleCode("n and both weights must be positive".into()));
    }
    if (n * col_weight) % row_weight != 0 {
        return Err(Error::InfeasibleCode(format!("n·wc = {} is not divisible by wr = {row_weight}", n * col_weight)));
    }
    let m = n * col_weight / row_weight;
    if col_weight > m || row_weight > n {
        return Err(Error::InfeasibleCode(format!("weights ({col_weight}, {row_weight}) exceed the graph size")));
    }
    for attempt in 0..CONSTRUCTION_ATTEMPTS {
        let mut rng = child_rng(seed, &[stream::CODE, attempt]);
        if let Some(checks) = peg(n, m, col_weight, row_weight, &mut rng) {
            return LdpcCode::from_checks(n, checks);
        }
    }
    Err(Error::InfeasibleCode(format!("no regular ({col_weight}, {row_weight}) graph found for n = {n}")))
}

fn peg(n: usize, m: usize, wc: usize, wr: usize, rng: &mut SimRng) -> Option<Vec<Vec<usize>>> {
    let mut checks: Vec<Vec<usize>> = vec![Vec::with_capacity(wr); m];
    let mut vars: Vec<Vec<usize>> = vec![Vec::with_capacity(wc); n];
    let mut check_depth = vec![usize::MAX; m];
    let mut var_seen = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for &v in &order {
        for _ in 0..wc {
            let open = |c: usize, checks: &Vec<Vec<usize>>| checks[c].len() < wr;
            let candidates: Vec<usize> = if vars[v].is_empty() {
                (0..m).filter(|&c| open(c, &checks)).collect()
            } else {
                // Breadth-first expansion from v, one check level at a time.
                check_depth.iter_mut().for_each(|d| *d = usize::MAX);
                var_seen.iter_mut().for_each(|s| *s = false);
                var_seen[v] = true;
                let mut level: Vec<usize> = vars[v].clone();
                level.iter().for_each(|&c| check_depth[c] = 0);
                let mut depth = 0;
                loop {
                    let unreached: Vec<usize> = (0..m).filter(|&c| check_depth[c] == usize::MAX && open(c, &checks)).collect();
                    if unreached.is_empty() {
                        let newest: Vec<usize> = level.iter().copied().filter(|&c| open(c, &checks) && !vars[v].contains(&c)).collect();
                        break if newest.is_empty() { deepest_open(&check_depth, &checks, wr, &vars[v]) } else { newest };
                    }
                    depth += 1;
                    let mut next = Vec::new();
                    for &c in &level {
                        for &u in &checks[c] {
                            if !var_seen[u] {
                                var_seen[u] = true;
                                for &c2 in &vars[u] {
                                    if check_depth[c2] == usize::MAX {
                                        check_depth[c2] = depth;
                                        next.push(c2);
                                    }
                                }
                            }
                        }
                    }
                    if next.is_empty() {
                        break unreached;
                    }
                    level = next;
                }
            };
            let min_deg = candidates.iter().map(|&c| checks[c].len()).min()?;
            let best: Vec<usize> = candidates.into_iter().filter(|&c| checks[c].len() == min_deg).collect();
            let &c = best.choose(rng)?;
            checks[c].push(v);
            vars[v].push(c);
        }
    }
    checks.iter().all(|c| c.len() == wr).then_some(checks)
}

/// Open checks not adjacent to `own`, deepest BFS level first.
fn deepest_open(depth: &[usize], checks: &[Vec<usize>], wr: usize, own: &[usize]) -> Vec<usize> {
    let open: Vec<usize> = (0..checks.len()).filter(|&c| checks[c].len() < wr && !own.contains(&c)).collect();
    let Some(dmax) = open.iter().map(|&c| depth[c]).max() else { return open };
    open.into_iter().filter(|&c| depth[c] == dmax).collect()
}
