#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polyprotect/attack.hpp"
#include "polyprotect/embedding.hpp"
#include "polyprotect/errors.hpp"
#include "polyprotect/metrics.hpp"
#include "polyprotect/parallel.hpp"
#include "polyprotect/rng.hpp"
#include "polyprotect/transform.hpp"

namespace polyprotect {

/// Rejection-loop configuration: keys are redrawn until the cosine-solver
/// attack fails every selection guess at the threshold anchored to
/// `target_fmr` (a deliberately loose anchor; a template that resists
/// inversion there resists it at every practical operating point).
struct SelectionConfig {
  double target_fmr = 0.20;
  std::size_t selection_guesses = 3;
  std::size_t max_attempts = 200;
  std::size_t m = kDefaultWindowSize;
  std::size_t overlap = 0;
  int c_range = kDefaultCoefficientRange;
  std::uint64_t key_seed = 0;
  std::uint64_t guess_seed = 0;
  QnOptions qn;
  std::size_t threads = 0;  // dataset-level parallelism over subjects
};

/// One attempted key draw and the similarities its attack guesses reached.
/// Rejected attempts stop at the first guess that clears the threshold.
struct SelectionAttempt {
  std::size_t attempt_index = 0;
  std::vector<double> similarities;
  bool accepted = false;
};

struct SelectionOutcome {
  Keys keys;
  std::size_t attempts_used = 0;
  // similarities of the accepted attempt, one per selection guess
  std::vector<double> selection_similarities;
  // replaying attack_template with this seed reproduces them exactly
  std::uint64_t guess_seed_used = 0;
  std::vector<SelectionAttempt> log;
};

namespace detail {

inline AttackConfig selection_attack_config(const SelectionConfig& cfg,
                                            std::uint64_t guess_seed,
                                            std::size_t guesses) {
  AttackConfig attack;
  attack.solver_kind = SolverKind::cosine_qn;
  attack.guesses_per_template = guesses;
  attack.guess_seed = guess_seed;
  attack.qn = cfg.qn;
  attack.threads = 1;  // parallelism lives at the subject level
  return attack;
}

struct SelectionTrial {
  SelectionOutcome outcome;
  bool accepted = false;
};

/// Runs the rejection loop. When the attempt budget runs out, the returned
/// outcome carries the best-effort keys: the attempt whose worst guess
/// scored lowest.
inline SelectionTrial try_select(const Embedding& reference,
                                 const ElementDistribution& dist, double tau,
                                 const SelectionConfig& cfg,
                                 std::vector<SelectionAttempt>& log) {
  log.clear();
  std::size_t best_attempt = 0;
  double best_worst_sim = std::numeric_limits<double>::infinity();
  std::vector<double> best_similarities;

  for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const Keys keys = generate_random_keys(
        reference.identity, cfg.m, cfg.overlap, cfg.c_range,
        mix_seed({cfg.key_seed, fnv1a64(reference.identity), attempt}));
    const ProtectedTemplate tmpl = protect(reference, keys);
    const std::uint64_t attempt_guess_seed =
        mix_seed({cfg.guess_seed, attempt});

    SelectionAttempt record;
    record.attempt_index = attempt;
    bool all_fail = true;
    double worst_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < cfg.selection_guesses; ++g) {
      const std::uint64_t subject_seed =
          mix_seed({attempt_guess_seed, fnv1a64(reference.identity)});
      std::vector<double> x0 = draw_initial_guess(dist, subject_seed, g);
      const AttackResult res = detail::attack_single_guess(
          tmpl, keys, reference.values, std::move(x0),
          selection_attack_config(cfg, attempt_guess_seed,
                                  cfg.selection_guesses),
          g);
      record.similarities.push_back(res.inversion_similarity);
      worst_sim = std::max(worst_sim, res.inversion_similarity);
      if (res.inversion_similarity >= tau) {
        all_fail = false;  // inversion succeeded; reject this key draw
        break;
      }
    }
    record.accepted = all_fail;
    log.push_back(record);

    SelectionTrial trial;
    if (all_fail) {
      trial.accepted = true;
      trial.outcome.keys = keys;
      trial.outcome.attempts_used = attempt + 1;
      trial.outcome.selection_similarities = record.similarities;
      trial.outcome.guess_seed_used = attempt_guess_seed;
      trial.outcome.log = log;
      return trial;
    }
    if (worst_sim < best_worst_sim) {
      best_worst_sim = worst_sim;
      best_attempt = attempt;
      best_similarities = record.similarities;
    }
  }

  SelectionTrial trial;
  trial.accepted = false;
  trial.outcome.keys = generate_random_keys(
      reference.identity, cfg.m, cfg.overlap, cfg.c_range,
      mix_seed({cfg.key_seed, fnv1a64(reference.identity), best_attempt}));
  trial.outcome.attempts_used = cfg.max_attempts;
  trial.outcome.selection_similarities = std::move(best_similarities);
  trial.outcome.guess_seed_used = mix_seed({cfg.guess_seed, best_attempt});
  trial.outcome.log = log;
  return trial;
}

}  // namespace detail

/// Draws random keys for one subject until the cosine attack fails all
/// selection guesses below the FMR-anchored threshold. Throws
/// KeySelectionExhausted when max_attempts key draws were all invertible.
inline SelectionOutcome select_keys_for_subject(
    const Embedding& reference, const ElementDistribution& dist,
    const ScoreSet& unprotected_scores, const SelectionConfig& cfg) {
  if (cfg.selection_guesses == 0 || cfg.max_attempts == 0) {
    throw ParameterError("selection_guesses and max_attempts must be >= 1");
  }
  const double tau = threshold_at_fmr(unprotected_scores, cfg.target_fmr);
  std::vector<SelectionAttempt> log;
  detail::SelectionTrial trial =
      detail::try_select(reference, dist, tau, cfg, log);
  if (!trial.accepted) {
    throw KeySelectionExhausted(
        "no acceptable keys for subject " + reference.identity + " within " +
        std::to_string(cfg.max_attempts) + " attempts");
  }
  return std::move(trial.outcome);
}

/// Per-subject selection across a dataset of reference embeddings (the first
/// member of each identity). Exhausted subjects are collected, not fatal.
struct DatasetSelection {
  std::vector<std::pair<std::string, SelectionOutcome>> outcomes;
  std::vector<std::string> exhausted;
  // for exhausted subjects: the attempt with the lowest worst-guess
  // similarity, usable as a documented best-effort fallback
  std::vector<std::pair<std::string, SelectionOutcome>> best_effort;
  // attempt logs for every subject, accepted or not, input order
  std::vector<std::pair<std::string, std::vector<SelectionAttempt>>> logs;
  double tau = 0.0;
};

inline DatasetSelection select_keys_for_dataset(
    const EmbeddingSet& references, const ElementDistribution& dist,
    const ScoreSet& unprotected_scores, const SelectionConfig& cfg) {
  if (cfg.selection_guesses == 0 || cfg.max_attempts == 0) {
    throw ParameterError("selection_guesses and max_attempts must be >= 1");
  }
  DatasetSelection result;
  result.tau = threshold_at_fmr(unprotected_scores, cfg.target_fmr);
  if (references.empty()) return result;

  const std::vector<const Embedding*> refs = references.references();
  if (refs.size() != references.size()) {
    throw ParameterError(
        "dataset selection expects one reference embedding per subject");
  }

  std::vector<detail::SelectionTrial> trials(refs.size());
  std::vector<std::vector<SelectionAttempt>> logs(refs.size());
  detail::parallel_for(refs.size(), cfg.threads, [&](std::size_t i) {
    trials[i] = detail::try_select(*refs[i], dist, result.tau, cfg, logs[i]);
  });

  for (std::size_t i = 0; i < refs.size(); ++i) {
    const std::string& subject = refs[i]->identity;
    result.logs.emplace_back(subject, std::move(logs[i]));
    if (trials[i].accepted) {
      result.outcomes.emplace_back(subject, std::move(trials[i].outcome));
    } else {
      result.exhausted.push_back(subject);
      result.best_effort.emplace_back(subject, std::move(trials[i].outcome));
    }
  }
  return result;
}

/// Selection log CSV: `subject,attempt,accepted,guess,similarity,tau`, one
/// row per evaluated guess.
inline void save_selection_log(const DatasetSelection& selection,
                               const std::filesystem::path& path) {
  csv::Writer out(path);
  out.raw_line("subject,attempt,accepted,guess,similarity,tau");
  const std::string tau = csv::format_double(selection.tau);
  for (const auto& [subject, attempts] : selection.logs) {
    for (const SelectionAttempt& a : attempts) {
      for (std::size_t g = 0; g < a.similarities.size(); ++g) {
        out.raw_line(subject + "," + std::to_string(a.attempt_index) + "," +
                     (a.accepted ? "1" : "0") + "," + std::to_string(g) + "," +
                     csv::format_double(a.similarities[g]) + "," + tau);
      }
    }
  }
  out.close();
}

}  // namespace polyprotect
