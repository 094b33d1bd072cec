//! Composite Simpson rule.

/// Integrates `f` over `[a, b]` with `n` subintervals (`n` even, >= 2).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    simpson_multi(|x| [f(x)], a, b, n)[0]
}

/// Simpson rule for several integrands sharing the same nodes.
pub fn simpson_multi<const N: usize>(f: impl Fn(f64) -> [f64; N], a: f64, b: f64, n: usize) -> [f64; N] {
    assert!(
        n >= 2 && n.is_multiple_of(2),
        "Simpson needs an even number of subintervals, got {n}"
    );
    let h = (b - a) / n as f64;
    let mut acc = [0.0; N];
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        // Last node is taken exactly at b.
        let x = if i == n { b } else { a + i as f64 * h };
        let v = f(x);
        for (s, vi) in acc.iter_mut().zip(v) {
            *s += w * vi;
        }
    }
    acc.map(|s| s * h / 3.0)
}
