//! Approximation schemes for makespan minimization with setup times (setup-class, splittable and
//! preemptive models), built on a module configuration integer program solved as an n-fold IP.

pub mod driver;
pub mod gen;
pub mod mcip;
pub mod model;
pub mod nfold;
pub mod oracle;
pub mod pipeline;
pub mod setup_class;
pub mod splittable;
pub mod preemptive;
pub mod rat;

pub use model::{ClassInstance, ClassJob, Instance, JobInstance, Model, Schedule, SetupJob};
pub use rat::Rat;
