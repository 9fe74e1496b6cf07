//! Discrete convex-analysis toolkit: the two functionals of the equation, their
//! gradients and Hessians, duality maps, Moreau–Yosida envelopes, conjugates,
//! and the power-perturbed functional used when `m ≤ p`.

mod duality;
mod energy;
mod fenchel;
mod functional;
mod perturbed;
mod phi;
mod prox;
mod psi;

pub use duality::{duality_map, LpMetric};
pub use energy::StateEnergy;
pub use fenchel::{fenchel_psi_star, PsiStar};
pub use functional::ConvexFunctional;
pub use perturbed::{phi_power_eval_grad, resolvent_phi_power, PerturbedFunctional, Resolvent};
pub use phi::{eval_phi, grad_phi, hessian_phi, DiffusionField, PhiConfig};
pub use prox::{minimize_regularized, moreau_yosida, MoreauYosida, ProxProblem};
pub use psi::{eval_psi, grad_psi, hessian_psi};
