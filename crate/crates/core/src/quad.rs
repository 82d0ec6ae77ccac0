//! Fixed-order Gauss-Legendre rules and helpers for integrating over
//! breakpoint-separated cells.

/// Nodes and weights of the 8-point rule on [-1, 1].
#[allow(clippy::excessive_precision)]
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_48),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_48),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// 8-point Gauss-Legendre on [a, b]. The closure receives `(t, anchor)`
/// where the anchor is the cell midpoint.
pub fn gauss8<F: FnMut(f64, f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GL8.iter().map(|&(x, w)| w * f(mid + half * x, mid)).sum::<f64>() * half
}

/// Splits [a, b] at the given sorted interior points and into pieces no
/// longer than `max_len`, returning the piece endpoints.
pub fn cells(a: f64, b: f64, breaks: &[f64], max_len: f64) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(breaks.len() + 2);
    pts.push(a);
    for &p in breaks {
        if p > a && p < b && p - *pts.last().unwrap() > 1e-13 {
            pts.push(p);
        }
    }
    if b - *pts.last().unwrap() > 1e-13 || pts.len() == 1 {
        pts.push(b);
    } else {
        *pts.last_mut().unwrap() = b;
    }
    let mut out = Vec::with_capacity(pts.len());
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let n = ((hi - lo) / max_len).ceil().max(1.0) as usize;
        let step = (hi - lo) / n as f64;
        for i in 0..n {
            let s = lo + step * i as f64;
            let e = if i + 1 == n { hi } else { lo + step * (i + 1) as f64 };
            out.push((s, e));
        }
    }
    out
}

/// Integrates over [a, b] cell by cell with the 8-point rule.
pub fn integrate<F: FnMut(f64, f64) -> f64>(a: f64, b: f64, breaks: &[f64], max_len: f64, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    cells(a, b, breaks, max_len).into_iter().map(|(lo, hi)| gauss8(lo, hi, &mut f)).sum()
}

/// Sorts and removes near-duplicates (closer than `eps`).
pub fn dedup_sorted(mut v: Vec<f64>, eps: f64) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|b, a| (*b - *a).abs() <= eps);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss8_is_exact_for_degree_15() {
        let v = gauss8(0.0, 2.0, |t, _| t.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
    }

    #[test]
    fn cells_respect_breaks_and_length() {
        let c = cells(0.0, 1.0, &[0.3, 0.3, 2.0], 0.25);
        assert!(c.iter().all(|(a, b)| b - a <= 0.25 + 1e-15));
        assert!(c.iter().any(|&(a, _)| a == 0.3));
        assert_eq!(c.last().unwrap().1, 1.0);
    }
}
