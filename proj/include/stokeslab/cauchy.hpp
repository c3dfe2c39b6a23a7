#pragma once

#include "stokeslab/norms.hpp"

#include <filesystem>

namespace stokeslab {

struct CauchyData {
  std::shared_ptr<const BoundaryTraceSpace> gamma;
  TraceField g;
  TraceField psi;
  double F = 0.0;
};

/// Traction (grad u + grad u^T - p I) nu on the trace dofs, recovered from the
/// weak residual: integral_Gamma psi phi_i = R(phi_i) on dofs interior to the
/// arc, quadratic extrapolation at open arc ends.
TraceField stress_trace(const StokesSolution& sol, const BoundaryTraceSpace& gamma, const BodyForce& f = {});

/// Same quantity sampled from the discrete gradients, averaged over the
/// boundary edges sharing a dof. Only used for comparison.
TraceField pointwise_stress_trace(const StokesSolution& sol, const BoundaryTraceSpace& gamma);

CauchyData measure_cauchy(const StokesSolution& sol, std::shared_ptr<const BoundaryTraceSpace> gamma, double rho0,
                          const BodyForce& f = {});

/// Evaluates a P2 trace at arclength s along the chain.
Vec2 evaluate_trace(const BoundaryTraceSpace& gamma, const TraceField& v, double s);

/// Transfers a trace onto another discretization of the same arc by
/// arclength. Arcs of different length are rejected.
TraceField transfer_trace(const BoundaryTraceSpace& from, const TraceField& v, const BoundaryTraceSpace& to);

/// rho0 |psi1 - psi2|_{-1/2, Gamma}. Traces on different discretizations are
/// compared on the coarser one.
double epsilon_discrepancy(const CauchyData& a, const CauchyData& b, double rho0);

void write_stress_trace(const std::filesystem::path& path, const BoundaryTraceSpace& gamma, const TraceField& psi);

}  // namespace stokeslab
