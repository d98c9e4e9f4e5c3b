//! State encoding, reward and the Double-DQN learner.

mod ddqn;
mod mlp;
mod per;
mod state;

pub use ddqn::{
    ddqn_target, epsilon_at, masked_argmax, select_action, DdqnAgent, DdqnConfig, EpsilonSchedule, TrainReport,
    Transition,
};
pub use mlp::{td_loss_and_grad, Adam, ForwardCache, LossSample, Mlp};
pub use per::{PerSample, PrioritizedReplay, SumTree};
pub use state::{
    encode_state, reward, Ablation, RosterCaps, StateVector, ACCEL_MAX, ACCEL_MIN, CONTROL_ERROR_SCALE,
    EXTERNAL_SLOTS, INTERNAL_SLOTS, SPEED_SCALE, STATE_DIM,
};
