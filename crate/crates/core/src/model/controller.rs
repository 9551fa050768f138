use crate::linalg::{check_len, Vector};
use crate::Result;

/// Output-feedback controller driving the plant input.
///
/// The PI law is `u_k = -(kp·y_k + ki·Σ_{j≤k} y_j)`, regulating the output to
/// zero. It needs as many inputs as outputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    None {
        inputs: usize,
    },
    DiscretePi {
        kp: f64,
        ki: f64,
        accumulator: Vector,
    },
}

impl Controller {
    pub fn none(inputs: usize) -> Self {
        Controller::None { inputs }
    }

    pub fn discrete_pi(kp: f64, ki: f64, outputs: usize) -> Self {
        Controller::DiscretePi {
            kp,
            ki,
            accumulator: Vector::zeros(outputs),
        }
    }

    pub fn is_active(&self) -> bool {
        matches!(self, Controller::DiscretePi { .. })
    }

    pub fn reset(&mut self) {
        if let Controller::DiscretePi { accumulator, .. } = self {
            accumulator.fill(0.0);
        }
    }

    pub fn control_step(&mut self, feedback: &Vector) -> Result<Vector> {
        match self {
            Controller::None { inputs } => Ok(Vector::zeros(*inputs)),
            Controller::DiscretePi {
                kp,
                ki,
                accumulator,
            } => {
                check_len("controller feedback", feedback, accumulator.len())?;
                *accumulator += feedback;
                Ok(-(feedback * *kp + &*accumulator * *ki))
            }
        }
    }
}

pub fn control_step(controller: &mut Controller, feedback: &Vector) -> Result<Vector> {
    controller.control_step(feedback)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    #[test]
    fn zero_output_gives_zero_input() {
        let mut c = Controller::discrete_pi(0.209, 0.0011, 1);
        for _ in 0..10 {
            assert_eq!(c.control_step(&scalar(0.0)).unwrap()[0], 0.0);
        }
    }

    #[test]
    fn pi_law_with_benchmark_gains() {
        let mut c = Controller::discrete_pi(0.209, 0.0011, 1);
        let u0 = c.control_step(&scalar(1.0)).unwrap()[0];
        assert!((u0 - -0.2101).abs() < 1e-15);
        let u1 = c.control_step(&scalar(1.0)).unwrap()[0];
        assert!((u1 - -0.2112).abs() < 1e-15);
    }

    #[test]
    fn accumulator_is_running_sum() {
        let mut c = Controller::discrete_pi(1.0, 1.0, 1);
        let ys = [0.5, -2.0, 3.0, 0.25];
        for y in ys {
            c.control_step(&scalar(y)).unwrap();
        }
        let Controller::DiscretePi { accumulator, .. } = &c else {
            unreachable!()
        };
        assert_eq!(accumulator[0], ys.iter().sum::<f64>());
    }

    #[test]
    fn inactive_controller_returns_zero_of_input_size() {
        let mut c = Controller::none(3);
        assert_eq!(c.control_step(&scalar(9.0)).unwrap(), Vector::zeros(3));
    }
}
