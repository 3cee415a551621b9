use crate::error::{Error, Result};
use crate::nn::{ModelArch, ModelParams};
use crate::seed;

/// Global models at the start of a round.
///
/// `residual_us` complements the supervised model and `residual_su` the
/// unsupervised one. Both are `None` when residual alignment is disabled.
/// `supervised_prev`/`unsupervised_prev` hold the dual models the current
/// residuals were trained against; inference and pseudo-labeling pair them
/// with the residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundState {
    pub round: usize,
    pub supervised: ModelParams,
    pub unsupervised: ModelParams,
    pub residual_us: Option<ModelParams>,
    pub residual_su: Option<ModelParams>,
    pub supervised_prev: ModelParams,
    pub unsupervised_prev: ModelParams,
}

impl RoundState {
    /// Seeded initial state: Glorot dual models and zero-output residuals.
    pub fn initial(dual: &ModelArch, residual: Option<&ModelArch>, run_seed: u64) -> Result<Self> {
        let init = |k: u64| seed::rng(run_seed, &[seed::stream::INIT, k]);
        let supervised = ModelParams::init_glorot(dual.clone(), &mut init(0));
        let unsupervised = ModelParams::init_glorot(dual.clone(), &mut init(1));
        let (residual_us, residual_su) = match residual {
            Some(arch) => (
                Some(ModelParams::init_zero_output(arch.clone(), &mut init(2))),
                Some(ModelParams::init_zero_output(arch.clone(), &mut init(3))),
            ),
            None => (None, None),
        };
        let state = RoundState {
            round: 0,
            supervised_prev: supervised.clone(),
            unsupervised_prev: unsupervised.clone(),
            supervised,
            unsupervised,
            residual_us,
            residual_su,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn has_residuals(&self) -> bool {
        self.residual_us.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        self.supervised.ensure_same_arch(&self.unsupervised)?;
        self.supervised.ensure_same_arch(&self.supervised_prev)?;
        self.supervised.ensure_same_arch(&self.unsupervised_prev)?;
        match (&self.residual_us, &self.residual_su) {
            (None, None) => Ok(()),
            (Some(a), Some(b)) => {
                a.ensure_same_arch(b)?;
                let dual = self.supervised.arch();
                if a.arch().input_dim() != dual.input_dim() || a.arch().class_count() != dual.class_count() {
                    return Err(Error::config(format!(
                        "residual architecture {:?} does not match dual input/output widths {:?}",
                        a.arch().layer_widths(),
                        dual.layer_widths()
                    )));
                }
                Ok(())
            }
            _ => Err(Error::config("either both residual models are present or neither")),
        }
    }
}
