//! Adaptive Gauss-Kronrod (7, 15) quadrature.

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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integral of `f` over `[a, b]` to absolute accuracy about `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_pieces(f, a, b, 1, tol)
}

/// As [`integrate`], starting from `pieces` equal subintervals so that
/// features narrower than the whole range are not stepped over.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: u32, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    let eps = tol / pieces as f64;
    let mut stack: Vec<(f64, f64, f64, u32)> = (0..pieces)
        .rev()
        .map(|i| (a + h * i as f64, if i + 1 == pieces { b } else { a + h * (i + 1) as f64 }, eps, 0))
        .collect();
    let mut total = 0.0;
    let mut comp = 0.0;
    while let Some((lo, hi, eps, level)) = stack.pop() {
        let (value, err) = kronrod(&f, lo, hi);
        if err <= eps || level >= 50 {
            let y = value - comp;
            let t = total + y;
            comp = (t - total) - y;
            total = t;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * eps, level + 1));
            stack.push((mid, hi, 0.5 * eps, level + 1));
        }
    }
    total
}
