//! Quadrature and ODE integrators used by the trajectory solvers.

pub mod ode;
pub mod quadrature;
