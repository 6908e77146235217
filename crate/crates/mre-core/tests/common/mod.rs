//! Shared test oracles, independent of the paths they check.

use num_complex::Complex64;

/// Adaptive Simpson quadrature for complex-valued integrands on `[a, b]`
/// with a tolerance relative to the result scale: panels split until the
/// Richardson estimate drops below the scaled budget.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, rel_tol: f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    fn simpson<F: Fn(f64) -> Complex64>(
        f: &F,
        a: f64,
        fa: Complex64,
        b: f64,
        fb: Complex64,
    ) -> (Complex64, Complex64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }
    fn recurse<F: Fn(f64) -> Complex64>(
        f: &F,
        a: f64,
        fa: Complex64,
        b: f64,
        fb: Complex64,
        whole: Complex64,
        fm: Complex64,
        tol: f64,
        depth: usize,
    ) -> Complex64 {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.norm() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, flm, tol * 0.5, depth - 1)
            + recurse(f, m, fm, b, fb, right, frm, tol * 0.5, depth - 1)
    }
    if a == b {
        return Complex64::new(0.0, 0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, fm) = simpson(f, a, fa, b, fb);
    let tol = rel_tol * whole.norm().max(1.0);
    recurse(f, a, fa, b, fb, whole, fm, tol, 30)
}

/// Simple deterministic linear congruential stream for test model
/// generation; value in [0, 1).
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_f64(&mut self) -> f64 {
        // Numerical Recipes LCG constants.
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64) / ((1u64 << 53) as f64)
    }

    pub fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
