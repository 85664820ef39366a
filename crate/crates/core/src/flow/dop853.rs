//! Dormand–Prince 8(5,3) explicit Runge–Kutta pair with the error norm and
//! step-size control used by Hairer's DOP853.

use crate::error::{Error, Result};

const STAGES: usize = 12;

const C: [f64; STAGES] = [
    0.0,
    0.05260015195876773,
    0.0789002279381516,
    0.1183503419072274,
    0.2816496580927726,
    0.3333333333333333,
    0.25,
    0.3076923076923077,
    0.6512820512820513,
    0.6,
    0.8571428571428571,
    1.0,
];

const A: [[f64; STAGES]; STAGES] = [
    [0.0; 12],
    [0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        0.03709200011850479,
        0.0,
        0.0,
        0.17038392571223998,
        0.10726203044637328,
        -0.015319437748624402,
        0.008273789163814023,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.6241109587160757,
        0.0,
        0.0,
        -3.3608926294469414,
        -0.868219346841726,
        27.59209969944671,
        20.154067550477894,
        -43.48988418106996,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.47766253643826434,
        0.0,
        0.0,
        -2.4881146199716677,
        -0.590290826836843,
        21.230051448181193,
        15.279233632882423,
        -33.28821096898486,
        -0.020331201708508627,
        0.0,
        0.0,
        0.0,
    ],
    [
        -0.9371424300859873,
        0.0,
        0.0,
        5.186372428844064,
        1.0914373489967295,
        -8.149787010746927,
        -18.52006565999696,
        22.739487099350505,
        2.4936055526796523,
        -3.0467644718982196,
        0.0,
        0.0,
    ],
    [
        2.273310147516538,
        0.0,
        0.0,
        -10.53449546673725,
        -2.0008720582248625,
        -17.9589318631188,
        27.94888452941996,
        -2.8589982771350235,
        -8.87285693353063,
        12.360567175794303,
        0.6433927460157636,
        0.0,
    ],
];

const B: [f64; STAGES] = [
    0.054293734116568765,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    0.3111643669578199,
    -0.1521609496625161,
    0.20136540080403034,
    0.04471061572777259,
];

const E3: [f64; STAGES + 1] = [
    -0.18980075407240762,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    -0.4226823213237919,
    -0.1521609496625161,
    0.20136540080403034,
    0.02265179219836082,
    0.0,
];

const E5: [f64; STAGES + 1] = [
    0.01312004499419488,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.2251564463762044,
    -0.4957589496572502,
    1.6643771824549864,
    -0.35032884874997366,
    0.3341791187130175,
    0.08192320648511571,
    -0.022355307863886294,
    0.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

/// Right-hand side `f(t, y, dy)`. Errors make the stepper retry with a smaller
/// step; they are only surfaced if the step collapses.
pub trait Rhs {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>> Rhs for F {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, max_step: f64::INFINITY, max_steps: 1_000_000 }
    }
}

/// Stepper state. Holds `y` and `f(t, y)` for first-same-as-last reuse.
pub struct Dop853<F: Rhs> {
    rhs: F,
    control: StepControl,
    pub t: f64,
    pub y: Vec<f64>,
    f: Vec<f64>,
    h_abs: f64,
    k: Vec<Vec<f64>>,
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn rms(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|a| a * a).sum::<f64>() / n as f64).sqrt()
}

impl<F: Rhs> Dop853<F> {
    pub fn new(mut rhs: F, t0: f64, y0: Vec<f64>, control: StepControl) -> Result<Self> {
        if !(control.rtol > 0.0) || !(control.atol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        let n = y0.len();
        let mut f = vec![0.0; n];
        rhs.eval(t0, &y0, &mut f)?;
        let mut s = Self {
            rhs,
            control,
            t: t0,
            y: y0,
            f,
            h_abs: 0.0,
            k: vec![vec![0.0; n]; STAGES + 1],
            accepted: 0,
            rejected: 0,
            evaluations: 1,
        };
        s.h_abs = s.initial_step()?;
        Ok(s)
    }

    pub fn derivative(&self) -> &[f64] {
        &self.f
    }

    fn initial_step(&mut self) -> Result<f64> {
        let n = self.y.len();
        let c = self.control;
        let scale: Vec<f64> = self.y.iter().map(|y| c.atol + y.abs() * c.rtol).collect();
        let d0 = rms(self.y.iter().zip(&scale).map(|(y, s)| y / s), n);
        let d1 = rms(self.f.iter().zip(&scale).map(|(f, s)| f / s), n);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1: Vec<f64> = self.y.iter().zip(&self.f).map(|(y, f)| y + h0 * f).collect();
        let mut f1 = vec![0.0; n];
        self.rhs.eval(self.t + h0, &y1, &mut f1)?;
        self.evaluations += 1;
        let d2 = rms(f1.iter().zip(&self.f).zip(&scale).map(|((a, b), s)| (a - b) / s), n) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        Ok((100.0 * h0).min(h1).min(c.max_step))
    }

    /// Replace the state, e.g. after a chart change or a projection.
    pub fn reset(&mut self, t: f64, y: Vec<f64>) -> Result<()> {
        self.rhs.eval(t, &y, &mut self.f)?;
        self.evaluations += 1;
        self.t = t;
        self.y = y;
        Ok(())
    }

    fn trial(&mut self, h: f64, y_new: &mut [f64]) -> Result<f64> {
        let n = self.y.len();
        self.k[0].copy_from_slice(&self.f);
        let mut tmp = vec![0.0; n];
        for s in 1..STAGES {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][i];
                }
                tmp[i] = self.y[i] + h * acc;
            }
            self.rhs.eval(self.t + C[s] * h, &tmp, &mut self.k[s])?;
            self.evaluations += 1;
        }
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..STAGES {
                acc += B[j] * self.k[j][i];
            }
            y_new[i] = self.y[i] + h * acc;
        }
        self.rhs.eval(self.t + h, y_new, &mut self.k[STAGES])?;
        self.evaluations += 1;

        let c = self.control;
        let (mut e5, mut e3) = (0.0, 0.0);
        for i in 0..n {
            let scale = c.atol + self.y[i].abs().max(y_new[i].abs()) * c.rtol;
            let (mut a5, mut a3) = (0.0, 0.0);
            for j in 0..=STAGES {
                a5 += E5[j] * self.k[j][i];
                a3 += E3[j] * self.k[j][i];
            }
            e5 += (a5 / scale).powi(2);
            e3 += (a3 / scale).powi(2);
        }
        if e5 == 0.0 && e3 == 0.0 {
            return Ok(0.0);
        }
        Ok(h.abs() * e5 / ((e5 + 0.01 * e3) * n as f64).sqrt())
    }

    /// Advance one accepted step, never stepping past `t_stop`.
    pub fn step(&mut self, t_stop: f64) -> Result<()> {
        if self.accepted + self.rejected >= self.control.max_steps {
            return Err(Error::StepCollapse { t: self.t });
        }
        let n = self.y.len();
        let min_step = 10.0 * (libm_next_up(self.t.abs()) - self.t.abs());
        self.h_abs = self.h_abs.clamp(min_step, self.control.max_step.max(min_step));
        let mut rejected_once = false;
        let mut last_err: Option<Error> = None;
        let mut y_new = vec![0.0; n];
        loop {
            if self.h_abs < min_step {
                return Err(match last_err {
                    Some(e @ Error::LeftChart { .. }) => e,
                    _ => Error::StepCollapse { t: self.t },
                });
            }
            let mut h = self.h_abs;
            if self.t + h > t_stop {
                h = t_stop - self.t;
            }
            match self.trial(h, &mut y_new) {
                Ok(err) if err.is_finite() && err < 1.0 => {
                    let mut factor = if err == 0.0 { MAX_FACTOR } else { (SAFETY * err.powf(ERROR_EXPONENT)).min(MAX_FACTOR) };
                    if rejected_once {
                        factor = factor.min(1.0);
                    }
                    // keep the unclipped step length when landing on t_stop
                    if h >= self.h_abs {
                        self.h_abs *= factor;
                    } else {
                        self.h_abs = self.h_abs.max(h * factor);
                    }
                    self.t = if h == t_stop - self.t { t_stop } else { self.t + h };
                    std::mem::swap(&mut self.y, &mut y_new);
                    self.f.copy_from_slice(&self.k[STAGES]);
                    self.accepted += 1;
                    return Ok(());
                }
                Ok(err) => {
                    let factor = if err.is_finite() { (SAFETY * err.powf(ERROR_EXPONENT)).max(MIN_FACTOR) } else { MIN_FACTOR };
                    self.h_abs = h * factor;
                    rejected_once = true;
                    self.rejected += 1;
                }
                Err(e) => {
                    self.h_abs = h * MIN_FACTOR;
                    rejected_once = true;
                    self.rejected += 1;
                    last_err = Some(e);
                }
            }
        }
    }
}

fn libm_next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    f64::from_bits(x.to_bits() + 1)
}
