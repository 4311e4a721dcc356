//! Linear assignment on square cost matrices.

/// Minimum-cost perfect matching (Hungarian algorithm, potentials form).
/// Returns `assign[row] = col`. `cost` must be square.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays, column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

fn has_perfect_matching(allowed: &[Vec<bool>]) -> bool {
    let n = allowed.len();
    let mut match_col: Vec<Option<usize>> = vec![None; n];
    fn try_row(r: usize, allowed: &[Vec<bool>], seen: &mut [bool], match_col: &mut [Option<usize>]) -> bool {
        for c in 0..allowed.len() {
            if allowed[r][c] && !seen[c] {
                seen[c] = true;
                if match_col[c].map_or(true, |r2| try_row(r2, allowed, seen, match_col)) {
                    match_col[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }
    (0..n).all(|r| {
        let mut seen = vec![false; n];
        try_row(r, allowed, &mut seen, &mut match_col)
    })
}

/// Perfect matching minimizing the largest cost used, with total cost as the
/// secondary criterion.
pub fn bottleneck_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let mut levels: Vec<f64> = cost.iter().flatten().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let feasible = |t: f64| {
        let allowed: Vec<Vec<bool>> = cost
            .iter()
            .map(|r| r.iter().map(|&c| c <= t).collect())
            .collect();
        has_perfect_matching(&allowed)
    };
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(levels[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let threshold = levels[lo];
    let big = 1.0 + cost.iter().flatten().fold(0.0f64, |a, &c| a + c.abs()) * 2.0;
    let masked: Vec<Vec<f64>> = cost
        .iter()
        .map(|r| r.iter().map(|&c| if c <= threshold { c } else { c + big }).collect())
        .collect();
    min_cost_assignment(&masked)
}
