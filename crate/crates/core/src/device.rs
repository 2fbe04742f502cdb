//! Volatile metal-oxide memristor model.
//!
//! The I-V law is
//!
//! ```text
//! I = (1 - w)·α·[1 - exp(-β·V)] + w·γ·sinh(δ·V)
//! ```
//!
//! and the internal state `w ∈ [w_min, w_max]` moves in discrete pulse slots:
//! a write slot adds `R(w)·t_pulse·λ·sinh(η·V_write)` with the window
//! `R(w) = 1 - exp(3w)/exp(3·w_max)`, while an idle slot relaxes the state
//! toward `w_min` by the factor `1 - exp(-t_pulse/τ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitting parameters and pulse settings for one memristor type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceParams {
    /// Current scale of the rectifying term (A).
    pub alpha: f64,
    /// Inverse voltage of the rectifying term (1/V).
    pub beta: f64,
    /// Current scale of the tunnelling term (A).
    pub gamma: f64,
    /// Inverse voltage of the tunnelling term (1/V).
    pub delta: f64,
    /// State growth rate (1/s).
    pub lambda: f64,
    /// Inverse voltage of the state growth (1/V).
    pub eta: f64,
    /// Diffusion (decay) time constant (s).
    pub tau: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// Write pulse amplitude (V).
    pub v_write: f64,
    /// Read pulse amplitude (V).
    pub v_read: f64,
    /// Width of every write, idle and read slot (s).
    pub t_pulse: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            alpha: 1e-8,
            beta: 0.5,
            gamma: 1e-5,
            delta: 4.0,
            lambda: 1e3,
            eta: 8.0,
            tau: 5e-9,
            w_min: 0.1,
            w_max: 1.0,
            v_write: 1.5,
            v_read: 0.6,
            t_pulse: 1e-9,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("lambda", self.lambda),
            ("eta", self.eta),
            ("tau", self.tau),
            ("w_min", self.w_min),
            ("w_max", self.w_max),
            ("v_write", self.v_write),
            ("v_read", self.v_read),
            ("t_pulse", self.t_pulse),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if self.w_min >= self.w_max {
            return Err(Error::invalid(
                "w_min",
                format!("must be below w_max ({} >= {})", self.w_min, self.w_max),
            ));
        }
        Ok(())
    }

    /// Window function `R(w)`; 1 far from the ceiling, exactly 0 at `w_max`.
    pub fn window(&self, w: f64) -> f64 {
        // exp(3w)/exp(3·w_max) folded into one exponential so that w == w_max gives 0 exactly
        -(3.0 * (w - self.w_max)).exp_m1()
    }

    /// State increment of an unwindowed write pulse: `t_pulse·λ·sinh(η·V_write)`.
    pub fn write_gain(&self) -> f64 {
        self.t_pulse * self.lambda * (self.eta * self.v_write).sinh()
    }

    /// Fraction of the distance to `w_min` lost in one idle slot.
    pub fn decay_fraction(&self) -> f64 {
        -(-self.t_pulse / self.tau).exp_m1()
    }

    /// Current through a device in state `w` at bias `voltage`.
    pub fn current(&self, w: f64, voltage: f64) -> f64 {
        (1.0 - w) * self.alpha * -(-self.beta * voltage).exp_m1() + w * self.gamma * (self.delta * voltage).sinh()
    }
}

/// Internal state of a single volatile memristor.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DeviceState {
    w: f64,
}

impl DeviceState {
    /// A fully relaxed device.
    pub fn fresh(params: &DeviceParams) -> Self {
        Self { w: params.w_min }
    }

    pub fn new(w: f64, params: &DeviceParams) -> Result<Self> {
        if !(params.w_min..=params.w_max).contains(&w) {
            return Err(Error::invalid(
                "w",
                format!("{w} outside [{}, {}]", params.w_min, params.w_max),
            ));
        }
        Ok(Self { w })
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    /// State after one write ('1') slot.
    pub fn write_update(self, params: &DeviceParams) -> Self {
        let dw = params.window(self.w) * params.write_gain();
        Self {
            w: (self.w + dw).clamp(params.w_min, params.w_max),
        }
    }

    /// State after one idle ('0') slot.
    pub fn decay_update(self, params: &DeviceParams) -> Self {
        let dw = (self.w - params.w_min) * params.decay_fraction();
        Self {
            w: (self.w - dw).clamp(params.w_min, params.w_max),
        }
    }

    /// Advance by one slot: write on `true`, decay on `false`.
    pub fn step(self, slot: bool, params: &DeviceParams) -> Self {
        if slot {
            self.write_update(params)
        } else {
            self.decay_update(params)
        }
    }

    pub fn read_current(&self, voltage: f64, params: &DeviceParams) -> f64 {
        params.current(self.w, voltage)
    }

    /// Energy of one pulse of width `t_pulse`, using the current at pulse start.
    pub fn pulse_energy(&self, voltage: f64, params: &DeviceParams) -> f64 {
        if voltage == 0.0 {
            return 0.0;
        }
        voltage * self.read_current(voltage, params) * params.t_pulse
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values from a 40-digit mpmath evaluation of the model with default parameters.
    const WRITE_FROM_FLOOR: f64 = 0.175_908_386_102_553_72;
    const WRITE_TWICE_FROM_FLOOR: f64 = 0.250_418_126_878_217_86;
    const DECAY_FROM_CEILING: f64 = 0.836_857_677_770_183_67;
    const DECAY_ONCE: f64 = 0.162_148_530_118_678_02;
    const DECAY_TWICE: f64 = 0.150_882_912_866_754_9;
    const I_FLOOR_READ: f64 = 5.468_561_849_689_959_1e-6;
    const I_CEILING_READ: f64 = 5.466_229_213_676_094_6e-5;
    const I_FLOOR_WRITE: f64 = 2.017_179_060_713_045_6e-4;
    const E_FLOOR_WRITE: f64 = 3.025_768_591_069_568_4e-13;
    const E_FLOOR_READ: f64 = 3.281_137_109_813_975_5e-15;

    fn p() -> DeviceParams {
        DeviceParams::default()
    }

    fn at(w: f64) -> DeviceState {
        DeviceState::new(w, &p()).unwrap()
    }

    #[test]
    fn window_values() {
        assert_eq!(p().window(1.0), 0.0);
        assert_relative_eq!(p().window(0.1), 0.932_794_487_260_250_23, max_relative = 1e-12);
        assert_relative_eq!(p().window(0.5), 0.776_869_839_851_570_17, max_relative = 1e-12);
    }

    #[test]
    fn write_fixtures() {
        let once = at(0.1).write_update(&p());
        assert_relative_eq!(once.w(), WRITE_FROM_FLOOR, max_relative = 1e-12);
        let twice = once.write_update(&p());
        assert_relative_eq!(twice.w(), WRITE_TWICE_FROM_FLOOR, max_relative = 1e-12);
        assert_eq!(at(1.0).write_update(&p()).w(), 1.0);
    }

    #[test]
    fn decay_fixtures() {
        assert_relative_eq!(at(1.0).decay_update(&p()).w(), DECAY_FROM_CEILING, max_relative = 1e-12);
        assert_eq!(at(0.1).decay_update(&p()).w(), 0.1);
        let s = DeviceState { w: WRITE_FROM_FLOOR }.decay_update(&p());
        assert_relative_eq!(s.w(), DECAY_ONCE, max_relative = 1e-12);
        assert_relative_eq!(s.decay_update(&p()).w(), DECAY_TWICE, max_relative = 1e-12);
    }

    #[test]
    fn current_and_energy() {
        assert_eq!(at(0.37).read_current(0.0, &p()), 0.0);
        assert_relative_eq!(at(0.1).read_current(0.6, &p()), I_FLOOR_READ, max_relative = 1e-12);
        assert_relative_eq!(at(1.0).read_current(0.6, &p()), I_CEILING_READ, max_relative = 1e-12);
        assert_relative_eq!(at(0.1).read_current(1.5, &p()), I_FLOOR_WRITE, max_relative = 1e-12);
        assert_relative_eq!(at(0.1).pulse_energy(1.5, &p()), E_FLOOR_WRITE, max_relative = 1e-12);
        assert_relative_eq!(at(0.1).pulse_energy(0.6, &p()), E_FLOOR_READ, max_relative = 1e-12);
        assert_eq!(at(0.8).pulse_energy(0.0, &p()), 0.0);
    }

    #[test]
    fn later_pulse_dominates() {
        let run = |slots: [bool; 3]| slots.iter().fold(DeviceState::fresh(&p()), |s, &b| s.step(b, &p())).w();
        let late = run([false, false, true]);
        let early = run([true, false, false]);
        assert_relative_eq!(late, WRITE_FROM_FLOOR, max_relative = 1e-12);
        assert_relative_eq!(early, DECAY_TWICE, max_relative = 1e-12);
        assert!(late > early);
    }

    #[test]
    fn rejects_bad_params_and_states() {
        let mut bad = p();
        bad.tau = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = p();
        bad.w_min = 1.0;
        assert!(bad.validate().is_err());
        assert!(p().validate().is_ok());
        assert!(DeviceState::new(0.05, &p()).is_err());
        assert!(DeviceState::new(1.01, &p()).is_err());
    }
}
