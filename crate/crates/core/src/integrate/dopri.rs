//! Dormand–Prince 5(4) step with PI control and the standard continuous extension.

pub(crate) const DIM: usize = 4;
pub(crate) type Vec4 = [f64; DIM];

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// Stage-abscissae are unused by an autonomous right-hand side but kept for reference.
#[allow(dead_code)]
const C: [f64; 7] = [0.0, C2, C3, C4, C5, 1.0, 1.0];

fn lin(y: &Vec4, h: f64, terms: &[(f64, &Vec4)]) -> Vec4 {
    let mut out = *y;
    for i in 0..DIM {
        let mut acc = 0.0;
        for (w, k) in terms {
            acc += w * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Continuous extension over one accepted step, `theta` in `[0, 1]`.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    r: [Vec4; 5],
}

impl Dense {
    pub fn eval(&self, theta: f64) -> Vec4 {
        let th1 = 1.0 - theta;
        let r = &self.r;
        let mut out = [0.0; DIM];
        for i in 0..DIM {
            out[i] = r[0][i] + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i])));
        }
        out
    }
}

pub(crate) struct StepOutcome {
    pub y: Vec4,
    pub k_end: Vec4,
    /// RMS error scaled by the tolerances; `<= 1` accepts.
    pub err: f64,
    pub dense: Dense,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerance {
    pub rel: f64,
    /// Per-component absolute tolerance; zero makes a component purely relative.
    pub abs: Vec4,
}

/// One trial step of size `h` from `y0` with first stage `k1 = f(y0)`.
/// Non-finite stages produce `err = inf` so the caller rejects and shrinks.
pub(crate) fn step<F, E>(f: &mut F, y0: &Vec4, k1: &Vec4, h: f64, tol: Tolerance) -> Result<StepOutcome, E>
where
    F: FnMut(&Vec4) -> Result<Vec4, E>,
{
    let k2 = f(&lin(y0, h, &[(A21, k1)]))?;
    let k3 = f(&lin(y0, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(&lin(y0, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(&lin(y0, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(&lin(y0, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let y1 = lin(y0, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = f(&y1)?;

    let mut sum = 0.0;
    let mut finite = y1.iter().chain(k7.iter()).all(|x| x.is_finite());
    for i in 0..DIM {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = (tol.abs[i] + tol.rel * y0[i].abs().max(y1[i].abs())).max(f64::MIN_POSITIVE);
        let q = e / sc;
        finite &= q.is_finite();
        sum += q * q;
    }
    let err = if finite { (sum / DIM as f64).sqrt() } else { f64::INFINITY };

    let mut r = [[0.0; DIM]; 5];
    for i in 0..DIM {
        let ydiff = y1[i] - y0[i];
        let bspl = h * k1[i] - ydiff;
        r[0][i] = y0[i];
        r[1][i] = ydiff;
        r[2][i] = bspl;
        r[3][i] = ydiff - h * k7[i] - bspl;
        r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    Ok(StepOutcome { y: y1, k_end: k7, err, dense: Dense { r } })
}

/// PI step-size controller in the form used by classic DOPRI5 codes.
#[derive(Debug, Clone)]
pub(crate) struct Controller {
    facold: f64,
}

const BETA: f64 = 0.04;
const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

impl Controller {
    pub fn new() -> Self {
        Controller { facold: 1e-4 }
    }

    /// Next step after an accepted step with scaled error `err`.
    pub fn accept(&mut self, h: f64, err: f64) -> f64 {
        let fac = if err == 0.0 {
            1.0 / FAC_MAX
        } else {
            let fac11 = err.powf(0.2 - BETA * 0.75);
            (fac11 / self.facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN)
        };
        self.facold = err.max(1e-4);
        h / fac
    }

    pub fn reject(&self, h: f64, err: f64) -> f64 {
        if !err.is_finite() {
            return h * FAC_MIN;
        }
        let fac11 = err.powf(0.2 - BETA * 0.75);
        h / (fac11 / SAFE).min(1.0 / FAC_MIN)
    }
}

/// Root of a continuous `g` on `[lo, hi]` with `g(lo) < 0 <= g(hi)` by bisection.
pub(crate) fn bisect_root(mut g: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
