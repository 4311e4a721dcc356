//! Integrals of exponentials of linear functions on `[0, 1]`:
//! `J_ab(r, s) = ∫₀¹ (1−u)^a u^b exp((1−u) r + u s) du`.

/// Below this `|s − r|` the power series is used instead of the closed forms.
const SERIES_RADIUS: f64 = 1.0;
const SERIES_TERMS: usize = 26;

/// `J` and its first and second partial derivatives in `(r, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JTerms {
    /// `J(r, s)`
    pub j: f64,
    /// `∂J/∂r`
    pub dr: f64,
    /// `∂J/∂s`
    pub ds: f64,
    /// `∂²J/∂r²`
    pub drr: f64,
    /// `∂²J/∂r∂s`
    pub drs: f64,
    /// `∂²J/∂s²`
    pub dss: f64,
}

/// `g_ab(δ) = ∫₀¹ (1−u)^a u^b e^{uδ} du` for `(a, b)` in
/// `{(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)}`, with `δ ≤ 0`.
fn g_all(delta: f64) -> [f64; 6] {
    debug_assert!(delta <= 0.0);
    if delta > -SERIES_RADIUS {
        // Σ_k δ^k/k! · B(k+b+1, a+1)
        let mut out = [0.0; 6];
        let mut p = 1.0;
        for k in 0..SERIES_TERMS {
            let k1 = k as f64 + 1.0;
            let k2 = k1 + 1.0;
            let k3 = k2 + 1.0;
            out[0] += p / k1;
            out[1] += p / (k1 * k2);
            out[2] += p / k2;
            out[3] += p * 2.0 / (k1 * k2 * k3);
            out[4] += p / (k2 * k3);
            out[5] += p / k3;
            p *= delta / k1;
        }
        out
    } else {
        let e = delta.exp();
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let g00 = (e - 1.0) / delta;
        let g10 = (e - 1.0 - delta) / d2;
        let g01 = g00 - g10;
        let g20 = 2.0 * (e - 1.0 - delta - 0.5 * d2) / d3;
        let g02 = (e * (d2 - 2.0 * delta + 2.0) - 2.0) / d3;
        let g11 = g01 - g02;
        [g00, g10, g01, g20, g11, g02]
    }
}

/// `J(r, s) = ∫₀¹ exp((1−u) r + u s) du`, i.e. `(e^s − e^r)/(s − r)` evaluated stably.
pub fn j(r: f64, s: f64) -> f64 {
    let (hi, lo) = if r >= s { (r, s) } else { (s, r) };
    let delta = lo - hi;
    let g00 = if delta > -SERIES_RADIUS {
        let mut acc = 0.0;
        let mut p = 1.0;
        for k in 0..SERIES_TERMS {
            acc += p / (k as f64 + 1.0);
            p *= delta / (k as f64 + 1.0);
        }
        acc
    } else {
        delta.exp_m1() / delta
    };
    hi.exp() * g00
}

/// `∫₀¹ (1−u) exp((1−u) r + u s) du`.
pub fn j10(r: f64, s: f64) -> f64 {
    terms(r, s).dr
}

pub fn terms(r: f64, s: f64) -> JTerms {
    if r >= s {
        let g = g_all(s - r);
        let e = r.exp();
        JTerms {
            j: e * g[0],
            dr: e * g[1],
            ds: e * g[2],
            drr: e * g[3],
            drs: e * g[4],
            dss: e * g[5],
        }
    } else {
        // u ↦ 1 − u swaps the roles of r and s
        let g = g_all(r - s);
        let e = s.exp();
        JTerms {
            j: e * g[0],
            dr: e * g[2],
            ds: e * g[1],
            drr: e * g[5],
            drs: e * g[4],
            dss: e * g[3],
        }
    }
}
