#![allow(clippy::excessive_precision)]
//! Dormand–Prince 8(5,3) stepper with 7th-order dense output.
//!
//! Autonomous systems only. The stepper exposes one accepted step at a time;
//! event detection, sampling and stopping policy live in the drivers.

/// Autonomous vector field on `R^N`.
pub trait OdeSystem<const N: usize> {
    fn eval(&self, y: &[f64; N], dy: &mut [f64; N]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct StepUnderflow {
    pub t: f64,
    pub h: f64,
}

const SAFE: f64 = 0.9;
const FAC1: f64 = 0.333;
const FAC2: f64 = 6.0;
const EXPO: f64 = 1.0 / 8.0;

pub(crate) struct Dop853<const N: usize> {
    rtol: f64,
    atol: f64,
    h_max: f64,
    t: f64,
    y: [f64; N],
    /// f(y) at the current point (FSAL).
    f: [f64; N],
    h: f64,
    last_rejected: bool,
    pub accepted: u64,
    pub rejected: u64,
    last: Option<LastStep<N>>,
}

/// Stage values of the most recent accepted step, kept for dense output.
struct LastStep<const N: usize> {
    t_old: f64,
    h: f64,
    y_old: [f64; N],
    y_new: [f64; N],
    k: [[f64; N]; 13],
    dense: Option<Box<[[f64; N]; 8]>>,
}

/// Dense interpolant over one accepted step `[t_old, t_old + h]`.
pub(crate) struct Dense<'a, const N: usize> {
    t_old: f64,
    h: f64,
    cont: &'a [[f64; N]; 8],
}

impl<const N: usize> Dense<'_, N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t_old) / self.h;
        let s1 = 1.0 - s;
        let c = self.cont;
        let mut out = [0.0; N];
        for i in 0..N {
            let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
            out[i] = c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s;
        }
        out
    }

    /// Single component, for event functions that need only one coordinate.
    pub fn eval_component(&self, t: f64, i: usize) -> f64 {
        let s = (t - self.t_old) / self.h;
        let s1 = 1.0 - s;
        let c = self.cont;
        let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
        c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s
    }
}

#[inline]
fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (a, k) in terms {
            acc += a * k[i];
        }
        out[i] += h * acc;
    }
    out
}

impl<const N: usize> Dop853<N> {
    pub fn new<S: OdeSystem<N>>(
        sys: &S,
        y0: [f64; N],
        t0: f64,
        rtol: f64,
        atol: f64,
        h_max: f64,
    ) -> Self {
        let mut f = [0.0; N];
        sys.eval(&y0, &mut f);
        let mut st = Self {
            rtol,
            atol,
            h_max,
            t: t0,
            y: y0,
            f,
            h: 0.0,
            last_rejected: false,
            accepted: 0,
            rejected: 0,
            last: None,
        };
        st.h = st.initial_step(sys);
        st
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    /// Replaces the current state (e.g. after renormalizing a tangent
    /// vector). Invalidates dense output of the previous step.
    pub fn reset_state<S: OdeSystem<N>>(&mut self, sys: &S, y: [f64; N]) {
        self.y = y;
        sys.eval(&self.y, &mut self.f);
        self.last = None;
    }

    fn initial_step<S: OdeSystem<N>>(&self, sys: &S) -> f64 {
        let sk: Vec<f64> = self
            .y
            .iter()
            .map(|v| self.atol + self.rtol * v.abs())
            .collect();
        let dnf: f64 = self.f.iter().zip(&sk).map(|(f, s)| (f / s).powi(2)).sum();
        let dny: f64 = self.y.iter().zip(&sk).map(|(y, s)| (y / s).powi(2)).sum();
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.h_max);
        let y1 = combo(&self.y, h, &[(1.0, &self.f)]);
        let mut f1 = [0.0; N];
        sys.eval(&y1, &mut f1);
        let der2 = f1
            .iter()
            .zip(&self.f)
            .zip(&sk)
            .map(|((a, b), s)| ((a - b) / s).powi(2))
            .sum::<f64>()
            .sqrt()
            / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        (100.0 * h).min(h1).min(self.h_max)
    }

    /// Advances by one accepted step, never beyond `t_limit`. When the
    /// step lands on `t_limit` the returned time is exactly `t_limit`.
    pub fn step<S: OdeSystem<N>>(&mut self, sys: &S, t_limit: f64) -> Result<(), StepUnderflow> {
        loop {
            let remaining = t_limit - self.t;
            let mut h = self.h.min(self.h_max);
            let mut lands = false;
            if h >= remaining * (1.0 - 1e-12) {
                h = remaining;
                lands = true;
            }
            if h <= f64::EPSILON * self.t.abs().max(1.0) * 10.0 {
                return Err(StepUnderflow { t: self.t, h });
            }

            let y = &self.y;
            let k1 = self.f;
            let mut k = [[0.0; N]; 13];
            k[0] = k1;
            let mut tmp = combo(y, h, &[(A21, &k[0])]);
            sys.eval(&tmp, &mut k[1]);
            tmp = combo(y, h, &[(A31, &k[0]), (A32, &k[1])]);
            sys.eval(&tmp, &mut k[2]);
            tmp = combo(y, h, &[(A41, &k[0]), (A43, &k[2])]);
            sys.eval(&tmp, &mut k[3]);
            tmp = combo(y, h, &[(A51, &k[0]), (A53, &k[2]), (A54, &k[3])]);
            sys.eval(&tmp, &mut k[4]);
            tmp = combo(y, h, &[(A61, &k[0]), (A64, &k[3]), (A65, &k[4])]);
            sys.eval(&tmp, &mut k[5]);
            tmp = combo(
                y,
                h,
                &[(A71, &k[0]), (A74, &k[3]), (A75, &k[4]), (A76, &k[5])],
            );
            sys.eval(&tmp, &mut k[6]);
            tmp = combo(
                y,
                h,
                &[
                    (A81, &k[0]),
                    (A84, &k[3]),
                    (A85, &k[4]),
                    (A86, &k[5]),
                    (A87, &k[6]),
                ],
            );
            sys.eval(&tmp, &mut k[7]);
            tmp = combo(
                y,
                h,
                &[
                    (A91, &k[0]),
                    (A94, &k[3]),
                    (A95, &k[4]),
                    (A96, &k[5]),
                    (A97, &k[6]),
                    (A98, &k[7]),
                ],
            );
            sys.eval(&tmp, &mut k[8]);
            tmp = combo(
                y,
                h,
                &[
                    (A101, &k[0]),
                    (A104, &k[3]),
                    (A105, &k[4]),
                    (A106, &k[5]),
                    (A107, &k[6]),
                    (A108, &k[7]),
                    (A109, &k[8]),
                ],
            );
            sys.eval(&tmp, &mut k[9]);
            tmp = combo(
                y,
                h,
                &[
                    (A111, &k[0]),
                    (A114, &k[3]),
                    (A115, &k[4]),
                    (A116, &k[5]),
                    (A117, &k[6]),
                    (A118, &k[7]),
                    (A119, &k[8]),
                    (A1110, &k[9]),
                ],
            );
            sys.eval(&tmp, &mut k[10]);
            let yy1 = combo(
                y,
                h,
                &[
                    (A121, &k[0]),
                    (A124, &k[3]),
                    (A125, &k[4]),
                    (A126, &k[5]),
                    (A127, &k[6]),
                    (A128, &k[7]),
                    (A129, &k[8]),
                    (A1210, &k[9]),
                    (A1211, &k[10]),
                ],
            );
            sys.eval(&yy1, &mut k[11]);

            // 8th-order increment
            let mut incr = [0.0; N];
            for i in 0..N {
                incr[i] = B1 * k[0][i]
                    + B6 * k[5][i]
                    + B7 * k[6][i]
                    + B8 * k[7][i]
                    + B9 * k[8][i]
                    + B10 * k[9][i]
                    + B11 * k[10][i]
                    + B12 * k[11][i];
            }
            let mut y_new = [0.0; N];
            for i in 0..N {
                y_new[i] = y[i] + h * incr[i];
            }

            let mut err = 0.0;
            let mut err2 = 0.0;
            for i in 0..N {
                let sk = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                let e2 = incr[i] - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[11][i];
                err2 += (e2 / sk).powi(2);
                let e = ER1 * k[0][i]
                    + ER6 * k[5][i]
                    + ER7 * k[6][i]
                    + ER8 * k[7][i]
                    + ER9 * k[8][i]
                    + ER10 * k[9][i]
                    + ER11 * k[10][i]
                    + ER12 * k[11][i];
                err += (e / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h * err * (1.0 / (deno * N as f64)).sqrt();

            let fac11 = err.powf(EXPO);
            let fac = (1.0 / FAC2).max((1.0 / FAC1).min(fac11 / SAFE));
            let mut h_new = h / fac;

            if err <= 1.0 {
                self.accepted += 1;
                let mut f_new = [0.0; N];
                sys.eval(&y_new, &mut f_new);
                k[12] = f_new;
                if self.last_rejected {
                    h_new = h_new.min(h);
                }
                self.last_rejected = false;
                let t_new = if lands { t_limit } else { self.t + h };
                self.last = Some(LastStep {
                    t_old: self.t,
                    h: t_new - self.t,
                    y_old: self.y,
                    y_new,
                    k,
                    dense: None,
                });
                self.t = t_new;
                self.y = y_new;
                self.f = f_new;
                // keep the controller's proposal when the step was shortened to land
                if !lands || h_new > self.h {
                    self.h = h_new.min(self.h_max);
                }
                return Ok(());
            }
            self.rejected += 1;
            self.last_rejected = true;
            self.h = h / (1.0 / FAC1).min(fac11 / SAFE);
        }
    }

    /// Dense interpolant of the last accepted step. Costs three extra
    /// evaluations the first time it is requested for a step.
    pub fn dense<S: OdeSystem<N>>(&mut self, sys: &S) -> Option<Dense<'_, N>> {
        let last = self.last.as_mut()?;
        if last.dense.is_none() {
            last.dense = Some(Box::new(dense_coefficients(sys, last)));
        }
        Some(Dense {
            t_old: last.t_old,
            h: last.h,
            cont: last.dense.as_deref().unwrap(),
        })
    }

    /// `(t_old, y_old)` of the last accepted step.
    pub fn previous(&self) -> Option<(f64, &[f64; N])> {
        self.last.as_ref().map(|l| (l.t_old, &l.y_old))
    }
}

fn dense_coefficients<const N: usize, S: OdeSystem<N>>(
    sys: &S,
    last: &LastStep<N>,
) -> [[f64; N]; 8] {
    let h = last.h;
    let k = &last.k;
    let y0 = &last.y_old;
    let mut cont = [[0.0; N]; 8];
    for i in 0..N {
        let ydiff = last.y_new[i] - y0[i];
        let bspl = h * k[0][i] - ydiff;
        cont[0][i] = y0[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * k[12][i] - bspl;
        cont[4][i] = D41 * k[0][i]
            + D46 * k[5][i]
            + D47 * k[6][i]
            + D48 * k[7][i]
            + D49 * k[8][i]
            + D410 * k[9][i]
            + D411 * k[10][i]
            + D412 * k[11][i];
        cont[5][i] = D51 * k[0][i]
            + D56 * k[5][i]
            + D57 * k[6][i]
            + D58 * k[7][i]
            + D59 * k[8][i]
            + D510 * k[9][i]
            + D511 * k[10][i]
            + D512 * k[11][i];
        cont[6][i] = D61 * k[0][i]
            + D66 * k[5][i]
            + D67 * k[6][i]
            + D68 * k[7][i]
            + D69 * k[8][i]
            + D610 * k[9][i]
            + D611 * k[10][i]
            + D612 * k[11][i];
        cont[7][i] = D71 * k[0][i]
            + D76 * k[5][i]
            + D77 * k[6][i]
            + D78 * k[7][i]
            + D79 * k[8][i]
            + D710 * k[9][i]
            + D711 * k[10][i]
            + D712 * k[11][i];
    }
    let mut k14 = [0.0; N];
    let mut k15 = [0.0; N];
    let mut k16 = [0.0; N];
    let tmp = combo(
        y0,
        h,
        &[
            (A141, &k[0]),
            (A147, &k[6]),
            (A148, &k[7]),
            (A149, &k[8]),
            (A1410, &k[9]),
            (A1411, &k[10]),
            (A1412, &k[11]),
            (A1413, &k[12]),
        ],
    );
    sys.eval(&tmp, &mut k14);
    let tmp = combo(
        y0,
        h,
        &[
            (A151, &k[0]),
            (A156, &k[5]),
            (A157, &k[6]),
            (A158, &k[7]),
            (A1511, &k[10]),
            (A1512, &k[11]),
            (A1513, &k[12]),
            (A1514, &k14),
        ],
    );
    sys.eval(&tmp, &mut k15);
    let tmp = combo(
        y0,
        h,
        &[
            (A161, &k[0]),
            (A166, &k[5]),
            (A167, &k[6]),
            (A168, &k[7]),
            (A169, &k[8]),
            (A1613, &k[12]),
            (A1614, &k14),
            (A1615, &k15),
        ],
    );
    sys.eval(&tmp, &mut k16);
    for i in 0..N {
        cont[4][i] =
            h * (cont[4][i] + D413 * k[12][i] + D414 * k14[i] + D415 * k15[i] + D416 * k16[i]);
        cont[5][i] =
            h * (cont[5][i] + D513 * k[12][i] + D514 * k14[i] + D515 * k15[i] + D516 * k16[i]);
        cont[6][i] =
            h * (cont[6][i] + D613 * k[12][i] + D614 * k14[i] + D615 * k15[i] + D616 * k16[i]);
        cont[7][i] =
            h * (cont[7][i] + D713 * k[12][i] + D714 * k14[i] + D715 * k15[i] + D716 * k16[i]);
    }
    cont
}

// Butcher tableau (Hairer, Nørsett & Wanner)
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

const A141: f64 = 5.61675022830479523392909219681E-2;
const A147: f64 = 2.53500210216624811088794765333E-1;
const A148: f64 = -2.46239037470802489917441475441E-1;
const A149: f64 = -1.24191423263816360469010140626E-1;
const A1410: f64 = 1.5329179827876569731206322685E-1;
const A1411: f64 = 8.20105229563468988491666602057E-3;
const A1412: f64 = 7.56789766054569976138603589584E-3;
const A1413: f64 = -8.298E-3;
const A151: f64 = 3.18346481635021405060768473261E-2;
const A156: f64 = 2.83009096723667755288322961402E-2;
const A157: f64 = 5.35419883074385676223797384372E-2;
const A158: f64 = -5.49237485713909884646569340306E-2;
const A1511: f64 = -1.08347328697249322858509316994E-4;
const A1512: f64 = 3.82571090835658412954920192323E-4;
const A1513: f64 = -3.40465008687404560802977114492E-4;
const A1514: f64 = 1.41312443674632500278074618366E-1;
const A161: f64 = -4.28896301583791923408573538692E-1;
const A166: f64 = -4.69762141536116384314449447206E0;
const A167: f64 = 7.68342119606259904184240953878E0;
const A168: f64 = 4.06898981839711007970213554331E0;
const A169: f64 = 3.56727187455281109270669543021E-1;
const A1613: f64 = -1.39902416515901462129418009734E-3;
const A1614: f64 = 2.9475147891527723389556272149E0;
const A1615: f64 = -9.15095847217987001081870187138E0;

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

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const D41: f64 = -0.84289382761090128651353491142E+01;
const D46: f64 = 0.56671495351937776962531783590E+00;
const D47: f64 = -0.30689499459498916912797304727E+01;
const D48: f64 = 0.23846676565120698287728149680E+01;
const D49: f64 = 0.21170345824450282767155149946E+01;
const D410: f64 = -0.87139158377797299206789907490E+00;
const D411: f64 = 0.22404374302607882758541771650E+01;
const D412: f64 = 0.63157877876946881815570249290E+00;
const D413: f64 = -0.88990336451333310820698117400E-01;
const D414: f64 = 0.18148505520854727256656404962E+02;
const D415: f64 = -0.91946323924783554000451984436E+01;
const D416: f64 = -0.44360363875948939664310572000E+01;
const D51: f64 = 0.10427508642579134603413151009E+02;
const D56: f64 = 0.24228349177525818288430175319E+03;
const D57: f64 = 0.16520045171727028198505394887E+03;
const D58: f64 = -0.37454675472269020279518312152E+03;
const D59: f64 = -0.22113666853125306036270938578E+02;
const D510: f64 = 0.77334326684722638389603898808E+01;
const D511: f64 = -0.30674084731089398182061213626E+02;
const D512: f64 = -0.93321305264302278729567221706E+01;
const D513: f64 = 0.15697238121770843886131091075E+02;
const D514: f64 = -0.31139403219565177677282850411E+02;
const D515: f64 = -0.93529243588444783865713862664E+01;
const D516: f64 = 0.35816841486394083752465898540E+02;
const D61: f64 = 0.19985053242002433820987653617E+02;
const D66: f64 = -0.38703730874935176555105901742E+03;
const D67: f64 = -0.18917813819516756882830838328E+03;
const D68: f64 = 0.52780815920542364900561016686E+03;
const D69: f64 = -0.11573902539959630126141871134E+02;
const D610: f64 = 0.68812326946963000169666922661E+01;
const D611: f64 = -0.10006050966910838403183860980E+01;
const D612: f64 = 0.77771377980534432092869265740E+00;
const D613: f64 = -0.27782057523535084065932004339E+01;
const D614: f64 = -0.60196695231264120758267380846E+02;
const D615: f64 = 0.84320405506677161018159903784E+02;
const D616: f64 = 0.11992291136182789328035130030E+02;
const D71: f64 = -0.25693933462703749003312586129E+02;
const D76: f64 = -0.15418974869023643374053993627E+03;
const D77: f64 = -0.23152937917604549567536039109E+03;
const D78: f64 = 0.35763911791061412378285349910E+03;
const D79: f64 = 0.93405324183624310003907691704E+02;
const D710: f64 = -0.37458323136451633156875139351E+02;
const D711: f64 = 0.10409964950896230045147246184E+03;
const D712: f64 = 0.29840293426660503123344363579E+02;
const D713: f64 = -0.43533456590011143754432175058E+02;
const D714: f64 = 0.96324553959188282948394950600E+02;
const D715: f64 = -0.39177261675615439165231486172E+02;
const D716: f64 = -0.14972683625798562581422125276E+03;

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;
    impl OdeSystem<2> for Oscillator {
        fn eval(&self, y: &[f64; 2], dy: &mut [f64; 2]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    struct Decay;
    impl OdeSystem<1> for Decay {
        fn eval(&self, y: &[f64; 1], dy: &mut [f64; 1]) {
            dy[0] = -0.5 * y[0];
        }
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let mut s = Dop853::new(&Oscillator, [1.0, 0.0], 0.0, 1e-12, 1e-14, 1.0);
        let t_end = 20.0;
        while s.t() < t_end {
            s.step(&Oscillator, t_end).unwrap();
        }
        assert_eq!(s.t(), t_end);
        assert!((s.y()[0] - t_end.cos()).abs() < 1e-10);
        assert!((s.y()[1] + t_end.sin()).abs() < 1e-10);
    }

    #[test]
    fn tolerance_controls_error() {
        let run = |rtol: f64| {
            let mut s = Dop853::new(&Decay, [1.0], 0.0, rtol, rtol * 1e-2, 10.0);
            while s.t() < 10.0 {
                s.step(&Decay, 10.0).unwrap();
            }
            (s.y()[0] - (-5.0f64).exp()).abs()
        };
        let loose = run(1e-6);
        let tight = run(1e-11);
        assert!(loose < 1e-6, "{loose}");
        assert!(tight < 1e-12, "{tight}");
    }

    #[test]
    fn dense_output_matches_exact_solution_inside_steps() {
        let mut s = Dop853::new(&Oscillator, [1.0, 0.0], 0.0, 1e-10, 1e-12, 1.0);
        let mut worst: f64 = 0.0;
        while s.t() < 10.0 {
            s.step(&Oscillator, 10.0).unwrap();
            let (t0, _) = s.previous().unwrap();
            let t1 = s.t();
            let d = s.dense(&Oscillator).unwrap();
            for j in 0..=10 {
                let t = t0 + (t1 - t0) * j as f64 / 10.0;
                let y = d.eval(t);
                worst = worst
                    .max((y[0] - t.cos()).abs())
                    .max((y[1] + t.sin()).abs());
                assert_eq!(d.eval_component(t, 0), y[0]);
            }
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn dense_output_reproduces_step_endpoints() {
        let mut s = Dop853::new(&Oscillator, [0.3, -0.7], 0.0, 1e-10, 1e-12, 1.0);
        s.step(&Oscillator, 5.0).unwrap();
        let (t0, y0) = s.previous().map(|(t, y)| (t, *y)).unwrap();
        let (t1, y1) = (s.t(), *s.y());
        let d = s.dense(&Oscillator).unwrap();
        let a = d.eval(t0);
        let b = d.eval(t1);
        for i in 0..2 {
            assert!((a[i] - y0[i]).abs() < 1e-15);
            assert!((b[i] - y1[i]).abs() < 1e-14);
        }
    }
}
