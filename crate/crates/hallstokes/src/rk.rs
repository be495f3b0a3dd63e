//! Explicit eighth-order Dormand–Prince integration (DOP853) for complex
//! linear systems parametrized by a real variable.
//!
//! This is the classic Hairer–Nørsett–Wanner scheme: twelve stages, an
//! embedded 5th/3rd-order pair combined into one error estimate, and
//! step-size control with Lund stabilization disabled (`beta = 0`). State is
//! a flat `Vec<Complex64>`; contours in the complex plane are handled by the
//! callers' right-hand sides via a real path parameter.

use num_complex::Complex64;

use crate::error::{Error, Result};

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;

const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;

const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

/// Tolerances and limits for [`dop853`].
#[derive(Clone, Debug)]
pub struct Dop853Opts {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step size; estimated from the right-hand side when `None`.
    pub h0: Option<f64>,
}

impl Default for Dop853Opts {
    fn default() -> Self {
        Dop853Opts { rtol: 1e-12, atol: 1e-12, max_steps: 2_000_000, h0: None }
    }
}

fn weighted_sum(y: &[Complex64], terms: &[(f64, &[Complex64])], h: f64, out: &mut [Complex64]) {
    for i in 0..y.len() {
        let mut acc = y[i];
        for (a, k) in terms {
            acc += k[i] * (a * h);
        }
        out[i] = acc;
    }
}

/// Hairer's starting-step heuristic (order 8).
fn initial_step(
    f: &mut impl FnMut(f64, &[Complex64], &mut [Complex64]),
    t0: f64,
    y0: &[Complex64],
    k1: &[Complex64],
    posneg: f64,
    h_max: f64,
    rtol: f64,
    atol: f64,
) -> f64 {
    let n = y0.len();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        let sk = atol + rtol * y0[i].norm();
        dnf += (k1[i].norm() / sk).powi(2);
        dny += (y0[i].norm() / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(h_max);
    h *= posneg.signum();

    // one explicit Euler step to probe the second derivative
    let y1: Vec<Complex64> = (0..n).map(|i| y0[i] + k1[i] * h).collect();
    let mut k2 = vec![Complex64::new(0.0, 0.0); n];
    f(t0 + h, &y1, &mut k2);
    let mut der2 = 0.0;
    for i in 0..n {
        let sk = atol + rtol * y0[i].norm();
        der2 += ((k2[i] - k1[i]).norm() / sk).powi(2);
    }
    der2 = der2.sqrt() / h.abs();

    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (1e-6_f64).max(h.abs() * 1e-3)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    h = (100.0 * h.abs()).min(h1).min(h_max);
    h * posneg.signum()
}

/// Integrates `y' = f(t, y)` from `t0` to `tf` and returns `y(tf)`.
pub fn dop853(
    mut f: impl FnMut(f64, &[Complex64], &mut [Complex64]),
    t0: f64,
    tf: f64,
    y0: &[Complex64],
    opts: &Dop853Opts,
) -> Result<Vec<Complex64>> {
    if !(t0.is_finite() && tf.is_finite()) {
        return Err(Error::domain("integration endpoints must be finite"));
    }
    if t0 == tf {
        return Ok(y0.to_vec());
    }
    let n = y0.len();
    let posneg = (tf - t0).signum();
    let h_max = (tf - t0).abs();

    let mut y = y0.to_vec();
    let mut t = t0;
    let mut ks: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; 12];
    let mut y_stage = vec![Complex64::new(0.0, 0.0); n];
    let mut y_new = vec![Complex64::new(0.0, 0.0); n];

    f(t, &y, &mut ks[0]);
    let mut h = match opts.h0 {
        Some(h0) => h0.abs().min(h_max) * posneg,
        None => initial_step(
            &mut f, t, &y, &ks[0], posneg, h_max, opts.rtol, opts.atol,
        ),
    };

    let expo1: f64 = 1.0 / 8.0;
    let safe: f64 = 0.9;
    let facc1: f64 = 1.0 / 0.333;
    let facc2: f64 = 1.0 / 6.0;
    let mut rejected = false;

    for _ in 0..opts.max_steps {
        if (t - tf) * posneg >= 0.0 {
            return Ok(y);
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::numerical(format!(
                "step size underflow at t = {t} (h = {h:e})"
            )));
        }
        let mut last = false;
        if (t + h - tf) * posneg >= 0.0 {
            h = tf - t;
            last = true;
        }

        macro_rules! stage {
            ($idx:expr, $c:expr, $($a:expr => $k:expr),+) => {{
                weighted_sum(&y, &[$(($a, &ks[$k][..])),+], h, &mut y_stage);
                let (before, rest) = ks.split_at_mut($idx);
                let _ = &before;
                f(t + $c * h, &y_stage, &mut rest[0]);
            }};
        }
        stage!(1, C2, A21 => 0);
        stage!(2, C3, A31 => 0, A32 => 1);
        stage!(3, C4, A41 => 0, A43 => 2);
        stage!(4, C5, A51 => 0, A53 => 2, A54 => 3);
        stage!(5, C6, A61 => 0, A64 => 3, A65 => 4);
        stage!(6, C7, A71 => 0, A74 => 3, A75 => 4, A76 => 5);
        stage!(7, C8, A81 => 0, A84 => 3, A85 => 4, A86 => 5, A87 => 6);
        stage!(8, C9, A91 => 0, A94 => 3, A95 => 4, A96 => 5, A97 => 6, A98 => 7);
        stage!(9, C10, A101 => 0, A104 => 3, A105 => 4, A106 => 5, A107 => 6,
               A108 => 7, A109 => 8);
        stage!(10, C11, A111 => 0, A114 => 3, A115 => 4, A116 => 5, A117 => 6,
               A118 => 7, A119 => 8, A1110 => 9);
        stage!(11, 1.0, A121 => 0, A124 => 3, A125 => 4, A126 => 5, A127 => 6,
               A128 => 7, A129 => 8, A1210 => 9, A1211 => 10);
        let t_new = t + h;

        // 8th-order combination and the two embedded error estimates
        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..n {
            let ksum = ks[0][i] * B1
                + ks[5][i] * B6
                + ks[6][i] * B7
                + ks[7][i] * B8
                + ks[8][i] * B9
                + ks[9][i] * B10
                + ks[10][i] * B11
                + ks[11][i] * B12;
            y_new[i] = y[i] + ksum * h;
            let sk = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            let e3 = ksum - ks[0][i] * BHH1 - ks[8][i] * BHH2 - ks[11][i] * BHH3;
            err2 += (e3.norm() / sk).powi(2);
            let e5 = ks[0][i] * ER1
                + ks[5][i] * ER6
                + ks[6][i] * ER7
                + ks[7][i] * ER8
                + ks[8][i] * ER9
                + ks[9][i] * ER10
                + ks[10][i] * ER11
                + ks[11][i] * ER12;
            err += (e5.norm() / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        err = h.abs() * err * (1.0 / (deno * n as f64)).sqrt();

        let fac11 = err.powf(expo1);
        let fac = facc2.max(facc1.min(fac11 / safe));
        let mut h_new = h / fac;

        if err <= 1.0 {
            std::mem::swap(&mut y, &mut y_new);
            t = t_new;
            if last && (t - tf) * posneg >= 0.0 {
                return Ok(y);
            }
            f(t, &y, &mut ks[0]);
            if rejected {
                h_new = if h_new.abs() < h.abs() { h_new } else { h };
                rejected = false;
            }
        } else {
            h_new = h / facc1.min(fac11 / safe);
            rejected = true;
        }
        h = if h_new.abs() > h_max { h_max * posneg } else { h_new };
    }
    Err(Error::numerical(format!(
        "integrator exceeded {} steps between {t0} and {tf}",
        opts.max_steps
    )))
}
