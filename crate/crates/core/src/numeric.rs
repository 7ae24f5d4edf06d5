//! Small numerical toolkit: adaptive Gauss-Kronrod quadrature, bisection
//! and grid-bracketed root scanning.

/// Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half, Kronrod order).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd Kronrod nodes (indices 1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Intervals are bisected until the Kronrod/Gauss discrepancy falls below
/// `max(abs_tol, rel_tol * |estimate|)` scaled by the interval's share of the
/// total width, or the recursion depth reaches 50.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, _) = gk15(&f, a, b);
    let tol = abs_tol.max(rel_tol * whole.abs());
    let mut stack = vec![(a, b, 0u32)];
    let mut total = 0.0;
    let width = b - a;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (est, err) = gk15(&f, lo, hi);
        let local_tol = tol * ((hi - lo) / width).abs();
        if err <= local_tol || depth >= 50 {
            total += est;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    total
}

/// Bisection on a bracket `[a, b]` where `f(a)` and `f(b)` have opposite
/// signs. Stops once the bracket is narrower than `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Uniform grid of `resolution` nodes spanning `[lo, hi]` inclusive.
pub fn grid(lo: f64, hi: f64, resolution: usize) -> impl Iterator<Item = f64> + Clone {
    let n = resolution.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| if i == n - 1 { hi } else { lo + step * i as f64 })
}

/// All roots of `f` on `[lo, hi]` found by sign-change bracketing on a
/// uniform grid followed by bisection to `tol`. Nodes where `f` is exactly
/// zero are reported once; brackets touching such a node are skipped.
pub fn grid_roots<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    resolution: usize,
    tol: f64,
) -> Vec<f64> {
    let nodes: Vec<(f64, f64)> = grid(lo, hi, resolution).map(|t| (t, f(t))).collect();
    let mut roots = Vec::new();
    for (i, &(t, ft)) in nodes.iter().enumerate() {
        if ft == 0.0 {
            roots.push(t);
            continue;
        }
        if let Some(&(t_next, f_next)) = nodes.get(i + 1) {
            if f_next != 0.0 && (ft < 0.0) != (f_next < 0.0) {
                roots.push(bisect(&f, t, t_next, tol));
            }
        }
    }
    roots
}
