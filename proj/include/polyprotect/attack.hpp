#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polyprotect/embedding.hpp"
#include "polyprotect/errors.hpp"
#include "polyprotect/metrics.hpp"
#include "polyprotect/parallel.hpp"
#include "polyprotect/rng.hpp"
#include "polyprotect/solvers.hpp"
#include "polyprotect/transform.hpp"

namespace polyprotect {

enum class SolverKind { euclidean_lm, cosine_qn };

inline const char* to_string(SolverKind k) {
  return k == SolverKind::euclidean_lm ? "euclidean" : "cosine";
}

inline SolverKind parse_solver_kind(std::string_view s) {
  if (s == "euclidean" || s == "euclidean_lm") return SolverKind::euclidean_lm;
  if (s == "cosine" || s == "cosine_qn") return SolverKind::cosine_qn;
  throw ParameterError("unknown solver: '" + std::string(s) +
                       "' (expected euclidean or cosine)");
}

/// Full-disclosure attack configuration: the attacker knows the transform,
/// the keys and the element distribution of the attacked embeddings.
struct AttackConfig {
  SolverKind solver_kind = SolverKind::cosine_qn;
  std::size_t guesses_per_template = 10;
  std::uint64_t guess_seed = 0;
  LmOptions lm;
  QnOptions qn;
  std::size_t threads = 0;  // 0 = hardware concurrency
  // test hook: use this vector for every initial guess instead of sampling
  std::optional<std::vector<double>> forced_initial_guess;
};

/// One solver run against one protected template.
struct AttackResult {
  std::string subject;
  std::size_t guess_index = 0;
  std::vector<double> recovered;
  double objective_value = 0.0;
  double inversion_similarity = 0.0;  // cosine(recovered, true embedding)
  bool converged = false;
  std::size_t iterations = 0;
};

namespace detail {

inline void check_key_match(const ProtectedTemplate& t, const Keys& keys) {
  if (keys.subject != t.subject || keys.overlap != t.overlap) {
    throw KeyMismatchError("keys (" + keys.subject + ", overlap " +
                           std::to_string(keys.overlap) +
                           ") do not match template (" + t.subject +
                           ", overlap " + std::to_string(t.overlap) + ")");
  }
}

}  // namespace detail

/// residual(x) = protect(x) - P. Minimizing its sum of squares recovers both
/// the magnitude and the direction of the underlying embedding.
inline LeastSquaresProblem build_euclidean_problem(const ProtectedTemplate& p,
                                                   const Keys& keys,
                                                   std::vector<double> x0) {
  detail::check_key_match(p, keys);
  validate_keys(keys);
  if (x0.size() < keys.m()) {
    throw DimensionError("initial guess shorter than the window size");
  }
  LeastSquaresProblem problem;
  const std::vector<double> target = p.values;
  const Keys k = keys;
  problem.residual = [k, target](std::span<const double> x) {
    std::vector<double> r =
        polynomial_windows(x, k.coefficients, k.exponents, k.overlap);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= target[j];
    return r;
  };
  problem.jacobian = [k](std::span<const double> x) {
    return transform_jacobian(x, k);
  };
  problem.x0 = std::move(x0);
  return problem;
}

/// objective(x) = 1 - cos(protect(x), P): only the direction of the
/// protected vector is matched, mirroring how inversion success itself is
/// judged. Gradient by chain rule through the transform Jacobian.
inline ScalarProblem build_cosine_problem(const ProtectedTemplate& p,
                                          const Keys& keys,
                                          std::vector<double> x0) {
  detail::check_key_match(p, keys);
  validate_keys(keys);
  if (x0.size() < keys.m()) {
    throw DimensionError("initial guess shorter than the window size");
  }
  const double target_norm2 = norm2_squared(p.values);
  if (target_norm2 == 0.0) {
    throw ZeroTemplateError("cannot build a cosine objective against the "
                            "zero template");
  }

  ScalarProblem problem;
  const std::vector<double> target = p.values;
  const double tb = std::sqrt(target_norm2);
  const Keys k = keys;
  problem.objective = [k, target, tb](std::span<const double> x) {
    const std::vector<double> q =
        polynomial_windows(x, k.coefficients, k.exponents, k.overlap);
    const double qa = norm2(q);
    if (qa == 0.0) return 1.0;  // undefined direction; treat as orthogonal
    return 1.0 - dot(q, target) / (qa * tb);
  };
  problem.gradient = [k, target, tb](std::span<const double> x) {
    const std::vector<double> q =
        polynomial_windows(x, k.coefficients, k.exponents, k.overlap);
    const double qa2 = norm2_squared(q);
    if (qa2 == 0.0) return std::vector<double>(x.size(), 0.0);
    const double qa = std::sqrt(qa2);
    const double qp = dot(q, target);
    // d obj / d q_j = -( t_j / (|q||t|) - (q.t) q_j / (|q|^3 |t|) )
    std::vector<double> dq(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) {
      dq[j] = -(target[j] / (qa * tb) - qp * q[j] / (qa2 * qa * tb));
    }
    const SparseMatrix jac = transform_jacobian(x, k);
    return jac.transpose_times(dq);
  };
  problem.x0 = std::move(x0);
  return problem;
}

/// Per-dimension Gaussian sample from the deterministic stream derived from
/// (seed, index). Same pair, same vector.
inline std::vector<double> draw_initial_guess(const ElementDistribution& dist,
                                              std::uint64_t seed,
                                              std::uint64_t index) {
  if (dist.means.size() != dist.stddevs.size() || dist.means.empty()) {
    throw ParameterError("invalid element distribution");
  }
  constexpr std::uint64_t kGuessTag = 0x47554553;
  Rng rng(mix_seed({seed, kGuessTag, index}));
  std::vector<double> x(dist.means.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = dist.means[i] + dist.stddevs[i] * rng.next_gaussian();
  }
  return x;
}

namespace detail {

inline double guarded_cosine(std::span<const double> a,
                             std::span<const double> b) {
  const double na = norm2_squared(a);
  const double nb = norm2_squared(b);
  if (na == 0.0 || nb == 0.0 || !std::isfinite(na) || !std::isfinite(nb)) {
    return 0.0;  // degenerate recovery scores as fully dissimilar
  }
  return cosine_similarity(a, b);
}

/// One (template, guess) cell. Solver breakdowns surface as non-converged
/// results scored from the best iterate; they never propagate.
inline AttackResult attack_single_guess(const ProtectedTemplate& p,
                                        const Keys& keys,
                                        std::span<const double> true_v,
                                        std::vector<double> x0,
                                        const AttackConfig& cfg,
                                        std::size_t guess_index) {
  AttackResult res;
  res.subject = p.subject;
  res.guess_index = guess_index;
  res.recovered = x0;
  res.objective_value = std::numeric_limits<double>::quiet_NaN();

  try {
    SolverReport report;
    if (cfg.solver_kind == SolverKind::euclidean_lm) {
      report = solve_lm(build_euclidean_problem(p, keys, std::move(x0)),
                        cfg.lm);
    } else {
      report = minimize_qn(build_cosine_problem(p, keys, std::move(x0)),
                           cfg.qn);
    }
    res.recovered = std::move(report.solution);
    res.objective_value = report.objective_value;
    res.converged =
        report.converged && report.termination != Termination::numerical_failure;
    res.iterations = report.iterations;
  } catch (const NumericalFailure&) {
    res.converged = false;  // keep the initial guess as the best iterate
  }
  res.inversion_similarity = guarded_cosine(res.recovered, true_v);
  return res;
}

}  // namespace detail

/// Runs the configured solver from `guesses_per_template` deterministic
/// initial guesses against one protected template. Guess streams are keyed
/// by (guess_seed, subject label, guess index), so campaigns can grow
/// without shifting existing cells.
inline std::vector<AttackResult> attack_template(
    const ProtectedTemplate& p, const Keys& keys,
    std::span<const double> true_v, const ElementDistribution& dist,
    const AttackConfig& cfg) {
  if (cfg.guesses_per_template == 0) {
    throw ParameterError("guesses_per_template must be >= 1");
  }
  detail::check_key_match(p, keys);
  const std::uint64_t subject_seed =
      mix_seed({cfg.guess_seed, fnv1a64(p.subject)});
  std::vector<AttackResult> results(cfg.guesses_per_template);
  detail::parallel_for(
      cfg.guesses_per_template, cfg.threads, [&](std::size_t g) {
        std::vector<double> x0 =
            cfg.forced_initial_guess
                ? *cfg.forced_initial_guess
                : draw_initial_guess(dist, subject_seed, g);
        results[g] =
            detail::attack_single_guess(p, keys, true_v, std::move(x0), cfg, g);
      });
  return results;
}

/// One campaign target: a protected template, its keys and the normalized
/// embedding it was created from.
struct AttackTarget {
  ProtectedTemplate tmpl;
  Keys keys;
  std::vector<double> true_values;
};

struct AttackCampaignResult {
  std::vector<AttackResult> results;  // target-major, guess-minor order
  AttackConfig config;
  // per-subject maximum similarity over the guesses, input order
  std::vector<std::pair<std::string, double>> best_similarity;
};

/// Attacks every target cell (subject x guess) in parallel; the assembled
/// result is identical to a serial run.
inline AttackCampaignResult attack_campaign(std::span<const AttackTarget> targets,
                                            const ElementDistribution& dist,
                                            const AttackConfig& cfg) {
  if (cfg.guesses_per_template == 0) {
    throw ParameterError("guesses_per_template must be >= 1");
  }
  for (const AttackTarget& t : targets) {
    detail::check_key_match(t.tmpl, t.keys);
  }
  const std::size_t guesses = cfg.guesses_per_template;
  AttackCampaignResult campaign;
  campaign.config = cfg;
  campaign.results.resize(targets.size() * guesses);

  detail::parallel_for(
      targets.size() * guesses, cfg.threads, [&](std::size_t cell) {
        const std::size_t ti = cell / guesses;
        const std::size_t g = cell % guesses;
        const AttackTarget& target = targets[ti];
        const std::uint64_t subject_seed =
            mix_seed({cfg.guess_seed, fnv1a64(target.tmpl.subject)});
        std::vector<double> x0 =
            cfg.forced_initial_guess
                ? *cfg.forced_initial_guess
                : draw_initial_guess(dist, subject_seed, g);
        campaign.results[cell] = detail::attack_single_guess(
            target.tmpl, target.keys, target.true_values, std::move(x0), cfg, g);
      });

  campaign.best_similarity.reserve(targets.size());
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < guesses; ++g) {
      best = std::max(best,
                      campaign.results[ti * guesses + g].inversion_similarity);
    }
    campaign.best_similarity.emplace_back(targets[ti].tmpl.subject, best);
  }
  return campaign;
}

enum class IsrAggregation { best_of_guesses, per_attack };

/// Inversion success rate at the threshold anchored to `target_fmr` on the
/// unprotected score distribution: the fraction of subjects (best of the
/// guesses) or of individual attacks whose inversion similarity reaches the
/// threshold.
inline double isr(const AttackCampaignResult& campaign,
                  const ScoreSet& unprotected_scores, double target_fmr,
                  IsrAggregation aggregation) {
  if (campaign.results.empty() || campaign.best_similarity.empty()) {
    throw InsufficientDataError("isr of an empty campaign");
  }
  const double tau = threshold_at_fmr(unprotected_scores, target_fmr);
  if (aggregation == IsrAggregation::best_of_guesses) {
    std::size_t hits = 0;
    for (const auto& [subject, best] : campaign.best_similarity) {
      if (best >= tau) ++hits;
    }
    return static_cast<double>(hits) / campaign.best_similarity.size();
  }
  std::size_t hits = 0;
  for (const AttackResult& r : campaign.results) {
    if (r.inversion_similarity >= tau) ++hits;
  }
  return static_cast<double>(hits) / campaign.results.size();
}

// ---------------------------------------------------------------------------
// Attack results CSV: `subject,guess,solver,converged,iterations,objective,
// similarity`. Recovered vectors are not persisted.
// ---------------------------------------------------------------------------

inline void save_attack_results(const AttackCampaignResult& campaign,
                                const std::filesystem::path& path) {
  csv::Writer out(path);
  out.raw_line("subject,guess,solver,converged,iterations,objective,similarity");
  const char* solver = to_string(campaign.config.solver_kind);
  for (const AttackResult& r : campaign.results) {
    out.raw_line(r.subject + "," + std::to_string(r.guess_index) + "," +
                 solver + "," + (r.converged ? "1" : "0") + "," +
                 std::to_string(r.iterations) + "," +
                 csv::format_double(r.objective_value) + "," +
                 csv::format_double(r.inversion_similarity));
  }
  out.close();
}

/// Rebuilds a campaign view from a results CSV (recovered vectors are not
/// stored there, so `recovered` stays empty and config carries only the
/// solver kind and observed guess count).
inline AttackCampaignResult load_attack_results(
    const std::filesystem::path& path) {
  const std::vector<std::string> lines = csv::read_lines(path);
  if (lines.empty()) throw IoError("empty attack results file: " + path.string());
  if (lines.front() !=
      "subject,guess,solver,converged,iterations,objective,similarity") {
    throw FormatError("bad attack results header in " + path.string());
  }
  if (lines.size() < 2) {
    throw IoError("attack results file has no rows: " + path.string());
  }
  AttackCampaignResult campaign;
  std::size_t max_guess = 0;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (lines[row].empty()) continue;
    const auto fields = csv::split(lines[row]);
    const std::string context = path.string() + ":" + std::to_string(row + 1);
    if (fields.size() != 7) {
      throw FormatError("bad attack results row in " + context);
    }
    AttackResult r;
    r.subject = std::string(fields[0]);
    r.guess_index =
        static_cast<std::size_t>(csv::parse_int(fields[1], context));
    campaign.config.solver_kind = parse_solver_kind(fields[2]);
    r.converged = fields[3] == "1";
    r.iterations =
        static_cast<std::size_t>(csv::parse_int(fields[4], context));
    r.objective_value = csv::parse_double(fields[5], context);
    r.inversion_similarity = csv::parse_double(fields[6], context);
    max_guess = std::max(max_guess, r.guess_index);
    campaign.results.push_back(std::move(r));
  }
  campaign.config.guesses_per_template = max_guess + 1;

  std::vector<std::string> order;
  std::set<std::string> seen;
  for (const AttackResult& r : campaign.results) {
    if (seen.insert(r.subject).second) order.push_back(r.subject);
  }
  for (const std::string& subject : order) {
    double best = -std::numeric_limits<double>::infinity();
    for (const AttackResult& r : campaign.results) {
      if (r.subject == subject) {
        best = std::max(best, r.inversion_similarity);
      }
    }
    campaign.best_similarity.emplace_back(subject, best);
  }
  return campaign;
}

}  // namespace polyprotect
