//! The toy preset's step size is reproduced by the calibration sweep.

use aesgrad_core::aesthetics::EPSILON_SWEEP;
use aesgrad_core::config::TOY_EPSILON;
use aesgrad_core::harness::calibrate_epsilon;
use aesgrad_core::EncoderConfig;

#[test]
fn sweep_selects_the_preset_epsilon() {
    let c = calibrate_epsilon::<f32>(EncoderConfig::toy_default(), &EPSILON_SWEEP, 20, 20, 0).unwrap();
    assert_eq!(c.epsilon, Some(TOY_EPSILON), "{c:?}");
    assert_eq!(c.monotone_trials[0], (1e-4, 20));
}
