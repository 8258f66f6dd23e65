#include "godsbox/rcg.hpp"

namespace godsbox::rcg {

void RcgConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("RcgConfig: ") + what);
  };
  require(grad_tol >= 0.0, "grad_tol must be nonnegative");
  require(rel_obj_tol >= 0.0, "rel_obj_tol must be nonnegative");
  require(armijo_c1 > 0.0 && armijo_c1 < 1.0, "armijo_c1 must lie in (0, 1)");
  require(backtrack_factor > 0.0 && backtrack_factor < 1.0, "backtrack_factor must lie in (0, 1)");
  require(init_step > 0.0 && std::isfinite(init_step), "init_step must be positive");
  require(!restart_period || *restart_period >= 1, "restart_period must be at least 1");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::gradient_tolerance:
      return "gradient_tolerance";
    case Termination::objective_stalled:
      return "objective_stalled";
    case Termination::max_iterations:
      return "max_iterations";
  }
  return "unknown";
}

}  // namespace godsbox::rcg
