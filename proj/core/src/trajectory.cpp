#include "iprm/trajectory.hpp"

#include <cmath>

#include "iprm/errors.hpp"

namespace iprm {

namespace {

[[noreturn]] void fail(const Trajectory& traj, const std::string& what) {
  if (traj.id.empty()) throw ValidationError(what);
  throw ValidationError("trajectory '" + traj.id + "': " + what);
}

void check_logps(const Trajectory& traj, const std::vector<double>& logps, const char* name) {
  for (double lp : logps) {
    if (!std::isfinite(lp)) fail(traj, std::string(name) + " contains a non-finite value");
    if (lp > kLogpTolerance) fail(traj, std::string(name) + " contains a positive log-probability");
  }
}

}  // namespace

void validate(const Trajectory& traj) {
  const int t = traj.num_tokens();
  if (t < 1) fail(traj, "must have at least one token");
  if (static_cast<int>(traj.logp_policy.size()) != t)
    fail(traj, "len(logp_policy) != len(tokens)");
  if (traj.logp_ref && static_cast<int>(traj.logp_ref->size()) != t)
    fail(traj, "len(logp_ref) != len(tokens)");
  check_logps(traj, traj.logp_policy, "logp_policy");
  if (traj.logp_ref) check_logps(traj, *traj.logp_ref, "logp_ref");

  if (traj.step_ends.empty()) fail(traj, "must have at least one step");
  int prev = 0;
  for (int e : traj.step_ends) {
    if (e <= prev) fail(traj, "step_ends must be strictly increasing and >= 1");
    prev = e;
  }
  if (traj.step_ends.back() != t) fail(traj, "step_ends must end at the token count");
}

}  // namespace iprm
