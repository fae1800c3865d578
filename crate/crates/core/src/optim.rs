//! One-dimensional search routines: golden-section maximization on an
//! interval and Brent root finding on a bracket.

use crate::error::{EngineError, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2

/// Maximizes a unimodal `f` on `[a, b]` by golden-section search.
/// Returns `(x, f(x))` once the interval is shorter than `xtol`.
pub fn golden_section_max(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    xtol: f64,
    max_iter: usize,
) -> (f64, f64) {
    debug_assert!(a <= b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if b - a <= xtol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Golden-section search followed by parabolic-vertex refinement.
///
/// Pure golden-section cannot localize a smooth maximum below the
/// `sqrt(eps)` noise floor of function comparisons; fitting a parabola
/// through three points at a spacing well above the final interval recovers
/// several more digits.
pub fn maximize_smooth(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (mut x, mut fx) = golden_section_max(&f, a, b, 1e-6, 300);
    for h_rel in [1e-4, 1e-6] {
        let h = h_rel * x.abs().max(1.0);
        if x - h <= a || x + h >= b {
            break; // boundary maximum: the polish would step outside
        }
        let fm = f(x - h);
        let f0 = f(x);
        let fp = f(x + h);
        let denom = fp - 2.0 * f0 + fm;
        if denom >= 0.0 {
            break; // not locally concave at this resolution
        }
        let step = (0.5 * h * (fm - fp) / denom).clamp(-h, h);
        let candidate = x + step;
        let fc = f(candidate);
        if fc >= f0 {
            x = candidate;
            fx = fc;
        }
    }
    (x, fx)
}

/// Result of a Brent root search.
#[derive(Debug, Clone, Copy)]
pub struct BrentResult {
    pub root: f64,
    pub f_root: f64,
    /// Function evaluations performed inside the solve (excludes the bracket).
    pub evaluations: usize,
}

/// Brent's method on a sign-changing bracket `[a, b]` with known endpoint
/// values. Stops when the bracket is shorter than `xtol` or the residual is
/// exactly zero.
pub fn brent_root(
    f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<BrentResult> {
    let mut f = f;
    if fa == 0.0 {
        return Ok(BrentResult { root: a, f_root: 0.0, evaluations: 0 });
    }
    if fb == 0.0 {
        return Ok(BrentResult { root: b, f_root: 0.0, evaluations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(EngineError::Solver(format!(
            "brent: no sign change on [{a}, {b}] (f = {fa}, {fb})"
        )));
    }

    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    // Keep |f(b)| <= |f(a)|: b is the current best iterate.
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut mflag = true;
    let mut d = c;
    let mut evaluations = 0usize;

    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() <= xtol {
            return Ok(BrentResult { root: b, f_root: fb, evaluations });
        }
        let mut s = if fa != fc && fb != fc {
            // Inverse quadratic interpolation.
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            // Secant.
            b - fb * (b - a) / (fb - fa)
        };

        let lo = (3.0 * a + b) / 4.0;
        let cond_range = !((lo < s && s < b) || (b < s && s < lo));
        let cond_mflag = mflag && (s - b).abs() >= (b - c).abs() / 2.0;
        let cond_dflag = !mflag && (s - b).abs() >= (c - d).abs() / 2.0;
        let cond_btol = mflag && (b - c).abs() < xtol;
        let cond_dtol = !mflag && (c - d).abs() < xtol;
        if cond_range || cond_mflag || cond_dflag || cond_btol || cond_dtol {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }

        let fs = f(s);
        evaluations += 1;
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Ok(BrentResult { root: b, f_root: fb, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 1.3) * (x - 1.3) + 2.0, -10.0, 10.0, 1e-10, 200);
        assert!((x - 1.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn parabolic_polish_beats_the_noise_floor() {
        let f = |x: f64| -(x - 1.3) * (x - 1.3) + 2.0;
        let (x, fx) = maximize_smooth(f, -10.0, 10.0);
        assert!((x - 1.3).abs() < 1e-9, "{x}");
        assert!((fx - 2.0).abs() < 1e-14);
        // Transcendental maximum: d/dx (x e^{-x}) = 0 at x = 1.
        let (x, _) = maximize_smooth(|x: f64| x * (-x).exp(), 0.0, 10.0);
        assert!((x - 1.0).abs() < 1e-9, "{x}");
    }

    #[test]
    fn golden_section_handles_boundary_maximum() {
        // Decreasing on the whole interval: maximum at the left edge.
        let (x, _) = golden_section_max(|x| -x, 0.0, 5.0, 1e-12, 300);
        assert!(x.abs() < 1e-9);
    }

    #[test]
    fn brent_solves_transcendental_root() {
        let f = |x: f64| x * x.exp() - 5.0;
        let r = brent_root(f, 0.0, 3.0, f(0.0), f(3.0), 1e-13, 100).unwrap();
        assert!(f(r.root).abs() < 1e-10);
        assert!(r.evaluations < 60);
    }

    #[test]
    fn brent_rejects_unbracketed_input() {
        let f = |x: f64| x * x + 1.0;
        assert!(brent_root(f, -1.0, 1.0, f(-1.0), f(1.0), 1e-12, 100).is_err());
    }
}
