// Acceptance suite for the polyprotect artifact. Runs every release
// criterion against the seeded synthetic benchmark (50 identities x 10
// samples, dim 512, spread 0.15) and prints one pass/fail line per
// criterion. Exit code is the number of failed criteria.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "polyprotect/polyprotect.hpp"

using namespace polyprotect;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kBenchSeed = 7;
constexpr std::size_t kIdentities = 50;
constexpr std::size_t kSamples = 10;
constexpr std::size_t kDim = 512;
constexpr double kSpread = 0.15;
constexpr std::size_t kGuesses = 10;

int g_failures = 0;

void report(int criterion, const char* name, bool pass,
            const std::string& detail, double seconds) {
  std::printf("%s  criterion %2d: %-28s  %s  (%.1fs)\n",
              pass ? "PASS" : "FAIL", criterion, name, detail.c_str(),
              seconds);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

struct Bench {
  EmbeddingSet normalized{1};
  EmbeddingSet references{1};
  ElementDistribution dist;
  ScoreSet unprotected_scores;
};

Bench build_bench() {
  Bench b;
  b.normalized = normalize_set(
      generate_synthetic(kIdentities, kSamples, kDim, kSpread, 1.0, kBenchSeed),
      NormalizationMode::l2);
  b.dist = estimate_distribution(b.normalized);
  b.unprotected_scores = score_all_pairs(b.normalized);
  EmbeddingSet refs(b.normalized.dim());
  for (const Embedding* e : b.normalized.references()) refs.add(*e);
  b.references = std::move(refs);
  return b;
}

std::vector<AttackTarget> random_key_targets(const Bench& bench,
                                             std::size_t overlap,
                                             std::uint64_t key_seed) {
  std::vector<AttackTarget> targets;
  for (const Embedding& e : bench.references.members()) {
    AttackTarget t;
    t.keys = generate_random_keys(e.identity, 5, overlap, 50, key_seed);
    t.tmpl = protect(e, t.keys);
    t.true_values = e.values;
    targets.push_back(std::move(t));
  }
  return targets;
}

AttackCampaignResult run_campaign(const Bench& bench,
                                  std::vector<AttackTarget> targets,
                                  SolverKind kind, std::uint64_t guess_seed) {
  AttackConfig cfg;
  cfg.solver_kind = kind;
  cfg.guesses_per_template = kGuesses;
  cfg.guess_seed = guess_seed;
  cfg.threads = 0;
  return attack_campaign(targets, bench.dist, cfg);
}

double mean_similarity(const AttackCampaignResult& campaign) {
  double s = 0.0;
  for (const AttackResult& r : campaign.results) s += r.inversion_similarity;
  return s / static_cast<double>(campaign.results.size());
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// --------------------------------------------------------------------------
// criterion 1: output_dim reproduces the 512 -> k mapping exactly
// --------------------------------------------------------------------------
void criterion_dimensionality() {
  const auto t0 = Clock::now();
  const std::map<std::size_t, std::size_t> expected{
      {0, 103}, {1, 128}, {2, 170}, {3, 255}, {4, 508}};
  bool pass = true;
  std::string detail = "512->k:";
  for (const auto& [o, k] : expected) {
    const std::size_t got = output_dim(512, 5, o);
    pass &= got == k;
    detail += " o" + std::to_string(o) + "=" + std::to_string(got);
  }
  report(1, "dimensionality law", pass, detail,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// --------------------------------------------------------------------------
// criterion 2: protect vs a naive zero-padded std::pow evaluation
// --------------------------------------------------------------------------
std::vector<double> naive_padded_windows(const std::vector<double>& v,
                                         const Keys& k) {
  const std::size_t m = k.m();
  const std::size_t stride = m - k.overlap;
  std::size_t windows = 1;
  while ((windows - 1) * stride + m < v.size()) ++windows;
  std::vector<double> padded(v);
  padded.resize((windows - 1) * stride + m, 0.0);
  std::vector<double> p(windows, 0.0);
  for (std::size_t j = 0; j < windows; ++j) {
    for (std::size_t r = 0; r < m; ++r) {
      p[j] += k.coefficients[r] *
              std::pow(padded[j * stride + r],
                       static_cast<double>(k.exponents[r]));
    }
  }
  return p;
}

void criterion_transform_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  bool pass = true;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 5 + rng.below(60);
    const std::size_t overlap = rng.below(5);
    const Keys keys = generate_random_keys("s", 5, overlap, 50, rng.next_u64());
    std::vector<double> v(n);
    for (double& x : v) x = 2.0 * rng.next_unit() - 1.0;
    const std::vector<double> fast = protect_values(v, keys);
    const std::vector<double> slow = naive_padded_windows(v, keys);
    pass &= fast.size() == slow.size();
    for (std::size_t j = 0; j < fast.size() && pass; ++j) {
      worst = std::max(worst, std::abs(fast[j] - slow[j]));
    }
  }
  pass &= worst <= 1e-12;
  report(2, "transform oracle", pass,
         "1000 cases, max |dev| = " + fmt(worst) + " (tol 1e-12)",
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// --------------------------------------------------------------------------
// criterion 3: linearity in the coefficient vector
// --------------------------------------------------------------------------
void criterion_linearity() {
  const auto t0 = Clock::now();
  Rng rng(202);
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 8 + rng.below(57);
    const std::size_t overlap = rng.below(5);
    const Keys base = generate_random_keys("s", 5, overlap, 50, rng.next_u64());
    std::vector<int> c2(5);
    for (int& c : c2) c = static_cast<int>(rng.below(101)) - 50;
    const int a = static_cast<int>(rng.below(9)) - 4;
    const int b = static_cast<int>(rng.below(9)) - 4;
    std::vector<int> combo(5);
    for (std::size_t i = 0; i < 5; ++i) {
      combo[i] = a * base.coefficients[i] + b * c2[i];
    }
    std::vector<double> v(n);
    for (double& x : v) x = 2.0 * rng.next_unit() - 1.0;
    const std::vector<double> lhs =
        polynomial_windows(v, combo, base.exponents, overlap);
    const std::vector<double> p1 =
        polynomial_windows(v, base.coefficients, base.exponents, overlap);
    const std::vector<double> p2 =
        polynomial_windows(v, c2, base.exponents, overlap);
    for (std::size_t j = 0; j < lhs.size(); ++j) {
      const double rhs = a * p1[j] + b * p2[j];
      worst = std::max(worst,
                       std::abs(lhs[j] - rhs) / std::max(1.0, std::abs(rhs)));
    }
  }
  report(3, "coefficient linearity", worst <= 1e-9,
         "200 cases, max rel err = " + fmt(worst) + " (tol 1e-9)",
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// --------------------------------------------------------------------------
// criterion 4: analytic derivatives vs central finite differences
// --------------------------------------------------------------------------
void criterion_gradients(const Bench& bench) {
  const auto t0 = Clock::now();
  Rng rng(303);
  const double h = 1e-6;

  auto bounded_point = [&rng](std::size_t n) {
    std::vector<double> x(n);
    for (double& v : x) {
      const double mag = 0.1 + 0.9 * rng.next_unit();
      v = rng.next_unit() < 0.5 ? -mag : mag;
    }
    return x;
  };

  // transform jacobian, 100 random points
  double worst_jac = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 16;
    const Keys keys =
        generate_random_keys("s", 5, rng.below(5), 50, rng.next_u64());
    const std::vector<double> x = bounded_point(n);
    const auto dense = transform_jacobian(x, keys).to_dense();
    std::vector<double> xp(x), xm(x);
    for (std::size_t i = 0; i < n; ++i) {
      xp[i] = x[i] + h;
      xm[i] = x[i] - h;
      const std::vector<double> pp = protect_values(xp, keys);
      const std::vector<double> pm = protect_values(xm, keys);
      xp[i] = x[i];
      xm[i] = x[i];
      for (std::size_t j = 0; j < pp.size(); ++j) {
        const double fd = (pp[j] - pm[j]) / (2.0 * h);
        const double an = dense[j][i];
        if (fd == 0.0 && an == 0.0) continue;
        worst_jac = std::max(worst_jac, std::abs(fd - an) /
                                            std::max(std::abs(an), 1e-12));
      }
    }
  }

  // cosine-objective gradient, 100 random points against one benchmark
  // template per overlap
  double worst_cos = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t overlap = rep % 4;
    const Embedding& e = bench.references.members()[rep % 10];
    const Keys keys =
        generate_random_keys(e.identity, 5, overlap, 50, 5000 + rep);
    const ProtectedTemplate tmpl = protect(e, keys);
    auto problem = build_cosine_problem(tmpl, keys, e.values);
    const std::vector<double> x = bounded_point(kDim);
    const std::vector<double> analytic = problem.gradient(x);
    const std::vector<double> numeric =
        finite_difference_gradient(problem.objective, x, h);
    double diff = 0.0, scale = 1e-12;
    for (std::size_t i = 0; i < kDim; ++i) {
      diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
      scale = std::max(scale, std::abs(analytic[i]));
    }
    worst_cos = std::max(worst_cos, diff / scale);
  }

  const bool pass = worst_jac <= 1e-5 && worst_cos <= 1e-4;
  report(4, "gradient checks", pass,
         "jacobian rel " + fmt(worst_jac) + " (tol 1e-5), cosine grad rel " +
             fmt(worst_cos) + " (tol 1e-4)",
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// --------------------------------------------------------------------------
// criterion 5: solver sanity on closed-form problems
// --------------------------------------------------------------------------
void criterion_solver_sanity() {
  const auto t0 = Clock::now();
  Rng rng(404);

  double worst_lm = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::vector<double>> a(5, std::vector<double>(5));
    for (auto& row : a) {
      for (double& v : row) v = rng.next_gaussian();
    }
    std::vector<double> truth(5), rhs(5, 0.0);
    for (double& v : truth) v = rng.next_gaussian();
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 5; ++j) rhs[i] += a[i][j] * truth[j];
    }
    LeastSquaresProblem p;
    p.residual = [a, rhs](std::span<const double> x) {
      std::vector<double> r(5);
      for (std::size_t i = 0; i < 5; ++i) {
        double s = -rhs[i];
        for (std::size_t j = 0; j < 5; ++j) s += a[i][j] * x[j];
        r[i] = s;
      }
      return r;
    };
    p.jacobian = [a](std::span<const double>) { return sparse_from_dense(a); };
    p.x0 = std::vector<double>(5, 0.0);
    const SolverReport rep_lm = solve_lm(p);
    for (std::size_t i = 0; i < 5; ++i) {
      worst_lm = std::max(worst_lm, std::abs(rep_lm.solution[i] - truth[i]));
    }
  }

  // cosine objective toward a fixed target from 20 random starts
  std::vector<double> target(8);
  for (double& v : target) v = rng.next_gaussian();
  double worst_sim = 1.0;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x0(8);
    for (double& v : x0) v = rng.next_gaussian();
    ScalarProblem p;
    p.objective = [target](std::span<const double> x) {
      double xt = 0, xx = 0, tt = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        xt += x[i] * target[i];
        xx += x[i] * x[i];
        tt += target[i] * target[i];
      }
      return 1.0 - xt / std::sqrt(xx * tt);
    };
    p.gradient = [target](std::span<const double> x) {
      double xt = 0, xx = 0, tt = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        xt += x[i] * target[i];
        xx += x[i] * x[i];
        tt += target[i] * target[i];
      }
      const double nx = std::sqrt(xx), nt = std::sqrt(tt);
      std::vector<double> g(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = -(target[i] / (nx * nt) - xt * x[i] / (xx * nx * nt));
      }
      return g;
    };
    p.x0 = x0;
    const SolverReport r = minimize_qn(p);
    double xt = 0, xx = 0, tt = 0;
    for (std::size_t i = 0; i < 8; ++i) {
      xt += r.solution[i] * target[i];
      xx += r.solution[i] * r.solution[i];
      tt += target[i] * target[i];
    }
    worst_sim = std::min(worst_sim, xt / std::sqrt(xx * tt));
  }

  const bool pass = worst_lm <= 1e-8 && worst_sim >= 1.0 - 1e-6;
  report(5, "solver sanity", pass,
         "lm max |x-truth| = " + fmt(worst_lm) +
             " (tol 1e-8), qn min similarity = " + fmt(worst_sim) +
             " (floor 1-1e-6)",
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// --------------------------------------------------------------------------
// criteria 6 and 7: solver-comparison and overlap trends
// --------------------------------------------------------------------------
struct CampaignTable {
  std::map<std::size_t, AttackCampaignResult> cosine;    // overlaps 0..4
  std::map<std::size_t, AttackCampaignResult> euclidean; // overlaps 0..3
};

CampaignTable run_random_key_campaigns(const Bench& bench) {
  CampaignTable table;
  for (std::size_t o = 0; o <= 4; ++o) {
    table.cosine.emplace(
        o, run_campaign(bench, random_key_targets(bench, o, 11000 + o),
                        SolverKind::cosine_qn, 21000 + o));
  }
  for (std::size_t o = 0; o <= 3; ++o) {
    table.euclidean.emplace(
        o, run_campaign(bench, random_key_targets(bench, o, 11000 + o),
                        SolverKind::euclidean_lm, 21000 + o));
  }
  return table;
}

void criterion_solver_comparison(const CampaignTable& table) {
  const auto t0 = Clock::now();
  bool pass = true;
  std::string detail = "mean sim cos/euc:";
  for (std::size_t o = 0; o <= 3; ++o) {
    const double mc = mean_similarity(table.cosine.at(o));
    const double me = mean_similarity(table.euclidean.at(o));
    pass &= mc > me;
    detail += " o" + std::to_string(o) + "=" + fmt(mc) + "/" + fmt(me);
  }
  report(6, "solver-comparison trend", pass, detail,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

void criterion_overlap_trend(const CampaignTable& table) {
  const auto t0 = Clock::now();
  bool pass = true;
  std::string detail = "cosine mean sim:";
  double prev = -2.0;
  for (std::size_t o = 0; o <= 4; ++o) {
    const double m = mean_similarity(table.cosine.at(o));
    pass &= m > prev;
    prev = m;
    detail += " o" + std::to_string(o) + "=" + fmt(m);
  }
  report(7, "overlap trend", pass, detail,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// --------------------------------------------------------------------------
// criterion 8: key-selection effectiveness
// --------------------------------------------------------------------------
void criterion_key_selection(const Bench& bench, const CampaignTable& table) {
  const auto t0 = Clock::now();
  const double tau20 = threshold_at_fmr(bench.unprotected_scores, 0.20);
  const bool anchor_ok = !fmr_target_unreachable(bench.unprotected_scores, 0.001);

  bool pass = anchor_ok;
  std::string detail = "tau20=" + fmt(tau20) + ";";
  for (std::size_t o = 0; o <= 3; ++o) {
    SelectionConfig cfg;
    cfg.target_fmr = 0.20;
    cfg.selection_guesses = 3;
    cfg.max_attempts = 40;  // runtime budget; exhaustion is reported honestly
    cfg.m = 5;
    cfg.overlap = o;
    cfg.c_range = 50;
    cfg.key_seed = 31000 + o;
    cfg.guess_seed = 32000 + o;
    cfg.threads = 0;
    const DatasetSelection sel = select_keys_for_dataset(
        bench.references, bench.dist, bench.unprotected_scores, cfg);

    // clause: replaying the selection-time attacks on every accepted subject
    // yields zero successes at the 20% FMR anchor (exact, by construction)
    std::size_t replay_successes = 0;
    std::map<std::string, const Embedding*> ref_by_subject;
    for (const Embedding& e : bench.references.members()) {
      ref_by_subject[e.identity] = &e;
    }
    for (const auto& [subject, outcome] : sel.outcomes) {
      const Embedding& ref = *ref_by_subject.at(subject);
      AttackConfig replay;
      replay.solver_kind = SolverKind::cosine_qn;
      replay.guesses_per_template = cfg.selection_guesses;
      replay.guess_seed = outcome.guess_seed_used;
      replay.qn = cfg.qn;
      replay.threads = 1;
      const ProtectedTemplate tmpl = protect(ref, outcome.keys);
      for (const AttackResult& r :
           attack_template(tmpl, outcome.keys, ref.values, bench.dist, replay)) {
        if (r.inversion_similarity >= tau20) ++replay_successes;
      }
    }
    pass &= replay_successes == 0;

    // clause: fresh 10-guess ISR with the selection's final keys (accepted
    // plus best-effort for exhausted subjects) never exceeds the random-key
    // ISR at the 0.1% FMR anchor
    std::map<std::string, Keys> final_keys;
    for (const auto& [subject, outcome] : sel.outcomes) {
      final_keys.emplace(subject, outcome.keys);
    }
    for (const auto& [subject, outcome] : sel.best_effort) {
      final_keys.emplace(subject, outcome.keys);
    }
    std::vector<AttackTarget> targets;
    for (const Embedding& e : bench.references.members()) {
      AttackTarget t;
      t.keys = final_keys.at(e.identity);
      t.tmpl = protect(e, t.keys);
      t.true_values = e.values;
      targets.push_back(std::move(t));
    }
    const AttackCampaignResult selected_campaign = run_campaign(
        bench, std::move(targets), SolverKind::cosine_qn, 33000 + o);
    const double isr_selected =
        isr(selected_campaign, bench.unprotected_scores, 0.001,
            IsrAggregation::best_of_guesses);
    const double isr_random = isr(table.cosine.at(o), bench.unprotected_scores,
                                  0.001, IsrAggregation::best_of_guesses);
    pass &= isr_selected <= isr_random;
    detail += " o" + std::to_string(o) + ": acc=" +
              std::to_string(sel.outcomes.size()) + "/" +
              std::to_string(bench.references.size()) + " isr sel/rand=" +
              fmt(isr_selected) + "/" + fmt(isr_random) + ", replay_hits=" +
              std::to_string(replay_successes) + ";";
  }
  report(8, "key-selection effectiveness", pass, detail,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// --------------------------------------------------------------------------
// criteria 9 and 10: accuracy trends in the protected domain
// --------------------------------------------------------------------------
double protected_fnmr(const EmbeddingSet& set, std::size_t overlap,
                      std::uint64_t key_seed) {
  std::map<std::string, Keys> keys;
  std::vector<ProtectedTemplate> templates;
  templates.reserve(set.size());
  for (const Embedding& e : set.members()) {
    auto it = keys.find(e.identity);
    if (it == keys.end()) {
      it = keys.emplace(e.identity, generate_random_keys(e.identity, 5,
                                                         overlap, 50, key_seed))
               .first;
    }
    templates.push_back(protect(e, it->second));
  }
  return fnmr_at_fmr_anchor(score_all_pairs(templates), 0.001);
}

void criterion_normalization_fix() {
  const auto t0 = Clock::now();
  // wider within-class spread so the protected domain is actually stressed;
  // the two sets differ only by the global scale factor
  const double spread = 0.8;
  const EmbeddingSet scaled =
      generate_synthetic(kIdentities, kSamples, kDim, spread, 6.0, kBenchSeed);
  const EmbeddingSet scaled_normalized =
      normalize_set(scaled, NormalizationMode::l2);

  bool pass = true;
  std::string detail = "fnmr%@0.1%fmr norm/raw:";
  for (std::size_t o = 0; o <= 3; ++o) {
    const double f_norm = protected_fnmr(scaled_normalized, o, 41000 + o);
    const double f_raw = protected_fnmr(scaled, o, 41000 + o);
    pass &= f_norm <= f_raw;
    detail += " o" + std::to_string(o) + "=" + fmt(100 * f_norm) + "/" +
              fmt(100 * f_raw);
  }
  report(9, "normalization fix trend", pass, detail,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

void criterion_accuracy_vs_overlap(const Bench& bench) {
  const auto t0 = Clock::now();
  const double slack =
      1.0 / static_cast<double>(bench.unprotected_scores.genuine.size());
  bool pass = true;
  std::string detail = "fnmr%@0.1%fmr:";
  double prev = 2.0;
  for (std::size_t o = 0; o <= 3; ++o) {
    const double f = protected_fnmr(bench.normalized, o, 42000 + o);
    pass &= f <= prev + slack + 1e-12;
    prev = f;
    detail += " o" + std::to_string(o) + "=" + fmt(100 * f);
  }
  report(10, "accuracy-vs-overlap trend", pass,
         detail + " (slack one step = " + fmt(100 * slack) + ")",
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// --------------------------------------------------------------------------
// criterion 11: metric contracts
// --------------------------------------------------------------------------
void criterion_metric_contracts(const Bench& bench, const CampaignTable& table) {
  const auto t0 = Clock::now();
  Rng rng(606);
  bool threshold_ok = true;
  for (int rep = 0; rep < 1000; ++rep) {
    ScoreSet s;
    const std::size_t n_imp = 1 + rng.below(80);
    const std::size_t n_gen = 1 + rng.below(30);
    for (std::size_t i = 0; i < n_imp; ++i) {
      s.impostor.push_back(std::round(rng.next_gaussian() * 8.0) / 16.0);
    }
    for (std::size_t i = 0; i < n_gen; ++i) {
      s.genuine.push_back(2.0 * rng.next_unit() - 1.0);
    }
    const double target = std::pow(10.0, -3.5 * rng.next_unit());
    const double tau = threshold_at_fmr(s, target);
    if (fmr_fnmr_at(s, tau).first > target) threshold_ok = false;

    const DetCurve curve = det_curve(s, 2 + rng.below(40));
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      if (curve.points[i].threshold <= curve.points[i - 1].threshold ||
          curve.points[i].fmr > curve.points[i - 1].fmr ||
          curve.points[i].fnmr < curve.points[i - 1].fnmr) {
        threshold_ok = false;
      }
    }
  }

  bool isr_ok = true;
  for (const auto& [o, campaign] : table.cosine) {
    for (double anchor : {0.20, 0.001, 0.0001}) {
      const double best = isr(campaign, bench.unprotected_scores, anchor,
                              IsrAggregation::best_of_guesses);
      const double all = isr(campaign, bench.unprotected_scores, anchor,
                             IsrAggregation::per_attack);
      isr_ok &= best >= all;
    }
  }
  for (const auto& [o, campaign] : table.euclidean) {
    for (double anchor : {0.20, 0.001}) {
      isr_ok &= isr(campaign, bench.unprotected_scores, anchor,
                    IsrAggregation::best_of_guesses) >=
                isr(campaign, bench.unprotected_scores, anchor,
                    IsrAggregation::per_attack);
    }
  }

  report(11, "metric contracts", threshold_ok && isr_ok,
         std::string("1000 random score sets (fmr<=target, DET monotone): ") +
             (threshold_ok ? "ok" : "violated") +
             "; isr best>=per-attack on all campaigns: " +
             (isr_ok ? "ok" : "violated"),
         std::chrono::duration<double>(Clock::now() - t0).count());
}

// --------------------------------------------------------------------------
// criterion 12: CLI pipeline determinism
// --------------------------------------------------------------------------
std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void criterion_pipeline_determinism() {
  const auto t0 = Clock::now();
  const char* cli = std::getenv("POLYPROTECT_CLI");
  if (cli == nullptr) {
    report(12, "pipeline determinism", false,
           "POLYPROTECT_CLI not set; cannot run the CLI", 0.0);
    return;
  }
  const fs::path base = fs::temp_directory_path() /
                        ("polyprotect_acceptance_" + std::to_string(::getpid()));
  const fs::path d1 = base / "run1";
  const fs::path d2 = base / "run2";
  fs::create_directories(base);

  const std::string flags =
      " pipeline --identities 8 --samples 4 --dim 64 --spread 0.15 "
      "--guesses 3 --overlaps 0,1,2,3 --max-iters 80 --seed 4242 --outdir ";
  bool pass = true;
  std::string detail;
  for (const fs::path& dir : {d1, d2}) {
    const std::string cmd = std::string("\"") + cli + "\"" + flags +
                            dir.string() + " >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) {
      pass = false;
      detail = "pipeline invocation failed";
    }
  }
  std::size_t compared = 0;
  if (pass) {
    for (const auto& entry : fs::directory_iterator(d1)) {
      if (entry.path().extension() != ".csv") continue;
      ++compared;
      const fs::path other = d2 / entry.path().filename();
      if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
        pass = false;
        detail = "mismatch in " + entry.path().filename().string();
        break;
      }
    }
    if (compared == 0) {
      pass = false;
      detail = "no CSV artifacts produced";
    }
  }
  if (pass) {
    detail = std::to_string(compared) + " CSV artifacts byte-identical";
  }
  std::error_code ec;
  fs::remove_all(base, ec);
  report(12, "pipeline determinism", pass, detail,
         std::chrono::duration<double>(Clock::now() - t0).count());
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  std::printf("building the seeded benchmark (%zu identities x %zu samples, "
              "dim %zu, spread %.2f)...\n",
              kIdentities, kSamples, kDim, kSpread);
  std::fflush(stdout);
  const Bench bench = build_bench();

  criterion_dimensionality();
  criterion_transform_oracle();
  criterion_linearity();
  criterion_gradients(bench);
  criterion_solver_sanity();

  std::printf("running random-key attack campaigns (both solvers, %zu "
              "guesses per template)...\n", kGuesses);
  std::fflush(stdout);
  const CampaignTable table = run_random_key_campaigns(bench);

  criterion_solver_comparison(table);
  criterion_overlap_trend(table);
  criterion_key_selection(bench, table);
  criterion_normalization_fix();
  criterion_accuracy_vs_overlap(bench);
  criterion_metric_contracts(bench, table);
  criterion_pipeline_determinism();

  std::printf("%d/12 criteria passed (total %.1fs)\n", 12 - g_failures,
              std::chrono::duration<double>(Clock::now() - t0).count());
  return g_failures;
}
