#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "libration/derivatives.hpp"
#include "libration/prereq.hpp"
#include "libration/variational.hpp"

namespace libration {

struct BifurcationTolerances {
  double singular = 1e-6;       // |trace - 2| at or below this is singular
  double prime = 1e-8;          // |Tr'| at or below this is non-transversal
  double transcritical = 1e-8;  // |P~_qq| above this is transcritical
  double fork = 1e-8;           // |eps_B''| above this is a fork
  double guard = 1e-10;         // smallest |Q~_p P~_qe| divided by
};

/// Symplectic S with S^{-1} M S = [[1, b], [0, 1]] and |b| = 1. The q~ axis is
/// the kernel of M - I; the scale is fixed by the twist so that quantities
/// quadratic in q~ (such as eps_B'') do not depend on the original chart.
struct AdaptedFrame {
  Chart s;
  Chart s_inv;
  PoincareDerivatives tilde;  // derivatives of S^{-1} o map o S

  double twist() const { return tilde["Q_p"]; }
};

/// Throws std::domain_error when |trace - 2| > tol_singular and
/// DegenerateFrameError when M - I vanishes within tol_identity.
AdaptedFrame adapted_frame(const PoincareDerivatives& d, double tol_singular = 1e-6,
                           double tol_identity = 1e-6);

enum class BifurcationVerdict : std::uint8_t {
  regular,
  singular_nontransversal,
  cross_transcritical,
  cross_fork,
  cross_degenerate,
  degenerate_frame,
};

const char* to_string(BifurcationVerdict v);

struct BifurcationReport {
  double eps0 = 0.0;
  double trace = 0.0;
  double trace_prime = 0.0;
  BifurcationVerdict verdict = BifurcationVerdict::regular;
  std::optional<double> fork_curvature;  // eps_B''(0), cross_fork only
  std::optional<AdaptedFrame> frame;     // set once the cascade reaches the frame
  BifurcationTolerances tolerances;
  std::array<double, 10> deformation_sensitivities{};  // Q_qd ... P_ppd
  std::string note;
};

/// Keys of the deformation sensitivities, in report order.
const std::array<const char*, 10>& deformation_keys();

/// Regular / singular / cross-bifurcation cascade. At a singular point an
/// identity monodromy matrix is reported as degenerate_frame before the
/// transversality test. Never throws.
BifurcationReport classify(const PoincareDerivatives& d, const BifurcationTolerances& tol = {});

/// eps_B''(0) = (3 Q~_qq P~_qp - Q~_p P~_qqq) / (3 Q~_p P~_qe), or nullopt when the
/// denominator is below the guard.
std::optional<double> fork_curvature(const PoincareDerivatives& tilde, double guard = 1e-10);

struct SweepOptions {
  double root_tolerance = 1e-9;  // on |trace - 2|
  int max_iterations = 60;
  unsigned threads = 0;          // 0: hardware concurrency
  PrereqOptions prereq;
};

struct SweepSample {
  double eps = 0.0;
  double trace = 0.0;
  double trace_prime = 0.0;
  std::optional<std::string> error;  // set when the sample failed
};

struct SweepRoot {
  double eps = 0.0;
  double trace = 0.0;
  double trace_prime = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct SweepResult {
  std::vector<SweepSample> samples;
  std::vector<SweepRoot> roots;
};

/// trace(eps) = Q_q + P_p on n equally spaced eps in [eps_lo, eps_hi] (energy
/// energy0 + eps), then every sign change of trace - 2 between successful
/// neighbours refined by a bracketed secant iteration. Only the potential
/// enters; a deformation does not change the trace at delta = 0.
SweepResult sweep(const Model& model, double energy0, double eps_lo, double eps_hi, int n,
                  const SweepOptions& options = {});

}  // namespace libration
