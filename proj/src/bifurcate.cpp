#include "libration/bifurcate.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <thread>

#include "libration/errors.hpp"
#include "libration/pipeline.hpp"

namespace libration {

AdaptedFrame adapted_frame(const PoincareDerivatives& d, double tol_singular,
                           double tol_identity) {
  const double trace = d.trace();
  if (std::abs(trace - 2.0) > tol_singular)
    throw std::domain_error("adapted frame needs a singular fixed point, trace = " +
                            std::to_string(trace));
  // N = M - I, nilpotent at a singular point
  const std::array<double, 4> n{d["Q_q"] - 1.0, d["Q_p"], d["P_q"], d["P_p"] - 1.0};
  const double r1 = std::hypot(n[0], n[1]), r2 = std::hypot(n[2], n[3]);
  if (std::max(r1, r2) <= tol_identity)
    throw DegenerateFrameError("monodromy matrix is the identity; no adapted frame");

  // kernel vector from the dominant row
  std::array<double, 2> v = r1 >= r2 ? std::array{n[1] / r1, -n[0] / r1}
                                     : std::array{n[3] / r2, -n[2] / r2};
  if (v[0] < -1e-12) v = {-v[0], -v[1]};
  const std::array<double, 2> w{-v[1], v[0]};  // det [v w] = 1
  const std::array<double, 2> nw{n[0] * w[0] + n[1] * w[1], n[2] * w[0] + n[3] * w[1]};
  const double b = v[0] * nw[0] + v[1] * nw[1];
  if (std::abs(b) <= tol_identity)
    throw DegenerateFrameError("vanishing twist; no adapted frame");

  const double a = std::sqrt(std::abs(b));
  AdaptedFrame f;
  f.s = Chart{{a * v[0], w[0] / a, a * v[1], w[1] / a}};
  f.s_inv = f.s.inverse();
  f.tilde = change_chart(d, f.s);
  return f;
}

const char* to_string(BifurcationVerdict v) {
  switch (v) {
    case BifurcationVerdict::regular: return "regular";
    case BifurcationVerdict::singular_nontransversal: return "singular_nontransversal";
    case BifurcationVerdict::cross_transcritical: return "cross_transcritical";
    case BifurcationVerdict::cross_fork: return "cross_fork";
    case BifurcationVerdict::cross_degenerate: return "cross_degenerate";
    case BifurcationVerdict::degenerate_frame: return "degenerate_frame";
  }
  return "?";
}

const std::array<const char*, 10>& deformation_keys() {
  static const std::array<const char*, 10> keys{"Q_qd",  "Q_pd",  "P_qd",  "P_pd",  "Q_qqd",
                                                "Q_qpd", "Q_ppd", "P_qqd", "P_qpd", "P_ppd"};
  return keys;
}

std::optional<double> fork_curvature(const PoincareDerivatives& t, double guard) {
  const double den = 3.0 * t["Q_p"] * t["P_qe"];
  if (std::abs(den) < 3.0 * guard) return std::nullopt;
  return (3.0 * t["Q_qq"] * t["P_qp"] - t["Q_p"] * t["P_qqq"]) / den;
}

BifurcationReport classify(const PoincareDerivatives& d, const BifurcationTolerances& tol) {
  BifurcationReport r;
  r.eps0 = d.epsilon0;
  r.trace = d.trace();
  r.trace_prime = d.trace_prime();
  r.tolerances = tol;
  for (std::size_t i = 0; i < 10; ++i) r.deformation_sensitivities[i] = d[deformation_keys()[i]];

  if (std::abs(r.trace - 2.0) > tol.singular) {
    r.verdict = BifurcationVerdict::regular;
    return r;
  }
  // M = I admits no adapted frame whatever Tr' is
  const double off = std::max({std::abs(d["Q_q"] - 1.0), std::abs(d["Q_p"]), std::abs(d["P_q"]),
                               std::abs(d["P_p"] - 1.0)});
  if (off <= tol.singular) {
    r.verdict = BifurcationVerdict::degenerate_frame;
    r.note = std::abs(r.trace_prime) <= tol.prime
                 ? "monodromy matrix is the identity; trace derivative also vanishes"
                 : "monodromy matrix is the identity";
    return r;
  }
  if (std::abs(r.trace_prime) <= tol.prime) {
    r.verdict = BifurcationVerdict::singular_nontransversal;
    r.note = "trace derivative vanishes; no cross-bifurcation analysis";
    return r;
  }
  try {
    r.frame = adapted_frame(d, tol.singular, tol.singular);
  } catch (const DegenerateFrameError& e) {
    r.verdict = BifurcationVerdict::degenerate_frame;
    r.note = e.what();
    return r;
  }
  const auto& t = r.frame->tilde;
  if (std::abs(t["P_qq"]) > tol.transcritical) {
    r.verdict = BifurcationVerdict::cross_transcritical;
    return r;
  }
  const auto c = fork_curvature(t, tol.guard);
  if (!c) {
    r.verdict = BifurcationVerdict::cross_degenerate;
    r.note = "Q~_p P~_qe below guard";
    return r;
  }
  if (std::abs(*c) > tol.fork) {
    r.verdict = BifurcationVerdict::cross_fork;
    r.fork_curvature = c;
    r.note = "eps_B'' is measured in the frame with |Q~_p| = 1";
  } else {
    r.verdict = BifurcationVerdict::cross_degenerate;
    r.note = "eps_B'' vanishes within tolerance";
  }
  return r;
}

namespace {

SweepSample sample_at(const Model& model, double energy0, double eps, const PrereqOptions& prereq) {
  SweepSample s;
  s.eps = eps;
  try {
    const TraceData t = trace_only(model, energy0 + eps, prereq);
    s.trace = t.trace;
    s.trace_prime = t.trace_prime;
  } catch (const HypothesisError&) {
    throw;  // a property of the model, not of the sample
  } catch (const std::exception& e) {
    s.error = e.what();
  }
  return s;
}

// Secant steps kept inside [a, b]; falls back to the Illinois update of the
// stale endpoint when a step leaves the bracket.
SweepRoot refine(const Model& model, double energy0, SweepSample a, SweepSample b,
                 const SweepOptions& opt) {
  SweepRoot root;
  double fa = a.trace - 2.0, fb = b.trace - 2.0;
  int stale = 0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const double x = (a.eps * fb - b.eps * fa) / (fb - fa);
    const SweepSample s = sample_at(model, energy0, x, opt.prereq);
    if (s.error) throw NumericalError("sweep refinement failed at eps = " + std::to_string(x) +
                                      ": " + *s.error);
    const double fx = s.trace - 2.0;
    root = {s.eps, s.trace, s.trace_prime, it, false};
    if (std::abs(fx) <= opt.root_tolerance) {
      root.converged = true;
      return root;
    }
    if ((fx < 0) == (fa < 0)) {
      a = s;
      fa = fx;
      if (stale == -1) fb *= 0.5;
      stale = -1;
    } else {
      b = s;
      fb = fx;
      if (stale == 1) fa *= 0.5;
      stale = 1;
    }
  }
  return root;
}

}  // namespace

SweepResult sweep(const Model& model, double energy0, double eps_lo, double eps_hi, int n,
                  const SweepOptions& options) {
  if (n < 2) throw std::invalid_argument("sweep needs at least two samples");
  SweepResult out;
  out.samples.resize(static_cast<std::size_t>(n));
  const double step = (eps_hi - eps_lo) / (n - 1);
  auto eps_at = [&](int i) { return i == n - 1 ? eps_hi : eps_lo + step * i; };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp(threads, 1u, static_cast<unsigned>(n));
  std::vector<std::future<void>> jobs;
  for (unsigned w = 0; w < threads; ++w)
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (int i = static_cast<int>(w); i < n; i += static_cast<int>(threads))
        out.samples[static_cast<std::size_t>(i)] =
            sample_at(model, energy0, eps_at(i), options.prereq);
    }));
  for (auto& j : jobs) j.get();

  for (std::size_t i = 0; i + 1 < out.samples.size(); ++i) {
    const auto& a = out.samples[i];
    const auto& b = out.samples[i + 1];
    if (a.error || b.error) continue;
    const double fa = a.trace - 2.0, fb = b.trace - 2.0;
    if (std::abs(fa) <= options.root_tolerance) {
      out.roots.push_back({a.eps, a.trace, a.trace_prime, 0, true});
      continue;
    }
    if ((fa < 0) != (fb < 0) && std::abs(fb) > options.root_tolerance)
      out.roots.push_back(refine(model, energy0, a, b, options));
  }
  const auto& last = out.samples.back();
  if (!last.error && std::abs(last.trace - 2.0) <= options.root_tolerance)
    out.roots.push_back({last.eps, last.trace, last.trace_prime, 0, true});
  return out;
}

}  // namespace libration
