pub mod deviate;
pub mod lyapunov;
pub mod schedule;
pub mod trace;
pub mod unfold;
