// polyprotect command line front end: synthetic data generation,
// normalization, key generation/selection, template protection, accuracy
// evaluation, inversion-attack campaigns and report emission.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polyprotect/manifest.hpp"
#include "polyprotect/polyprotect.hpp"

namespace pp = polyprotect;
namespace fs = std::filesystem;

namespace {

// exit codes shared by every subcommand
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitExhausted = 5;

std::string join_config(const std::vector<std::pair<std::string, std::string>>&
                            items) {
  std::string out;
  for (const auto& [k, v] : items) {
    out += k + " = " + v + "\n";
  }
  return out;
}

std::string fmt(double v) { return pp::csv::format_double(v); }

std::vector<double> parse_anchor_list(const std::string& csv_list) {
  std::vector<double> anchors;
  for (const auto field : pp::csv::split(csv_list)) {
    anchors.push_back(pp::csv::parse_finite_double(field, "--anchors"));
  }
  if (anchors.empty()) throw pp::ParameterError("no FMR anchors given");
  return anchors;
}

std::vector<std::size_t> parse_overlap_list(const std::string& csv_list) {
  std::vector<std::size_t> overlaps;
  for (const auto field : pp::csv::split(csv_list)) {
    const long long v = pp::csv::parse_int(field, "--overlaps");
    if (v < 0) throw pp::ParameterError("overlaps must be >= 0");
    overlaps.push_back(static_cast<std::size_t>(v));
  }
  if (overlaps.empty()) throw pp::ParameterError("no overlaps given");
  return overlaps;
}

bool looks_like_embedding_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw pp::IoError("cannot open file: " + path.string());
  std::string header;
  std::getline(in, header);
  return header.rfind("identity,sample,", 0) == 0;
}

// ---------------------------------------------------------------------------
// gen-synth
// ---------------------------------------------------------------------------

struct GenSynthArgs {
  std::size_t identities = 10;
  std::size_t samples = 5;
  std::size_t dim = 64;
  double spread = 0.15;
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_gen_synth(const GenSynthArgs& a) {
  const pp::EmbeddingSet set = pp::generate_synthetic(
      a.identities, a.samples, a.dim, a.spread, a.scale, a.seed);
  pp::save_embeddings(set, a.out);
  pp::write_manifest(a.out, "gen-synth",
                     join_config({{"identities", std::to_string(a.identities)},
                                  {"samples", std::to_string(a.samples)},
                                  {"dim", std::to_string(a.dim)},
                                  {"spread", fmt(a.spread)},
                                  {"scale", fmt(a.scale)},
                                  {"seed", std::to_string(a.seed)},
                                  {"out", a.out}}),
                     {});
  std::cout << "wrote " << set.size() << " embeddings (dim " << set.dim()
            << ") to " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// normalize
// ---------------------------------------------------------------------------

struct NormalizeArgs {
  std::string emb;
  std::string mode = "l2";
  std::string out;
};

void run_normalize(const NormalizeArgs& a) {
  const pp::EmbeddingSet set = pp::load_embeddings(a.emb);
  const pp::EmbeddingSet normalized =
      pp::normalize_set(set, pp::parse_normalization_mode(a.mode));
  pp::save_embeddings(normalized, a.out);
  pp::write_manifest(a.out, "normalize",
                     join_config({{"emb", a.emb}, {"mode", a.mode},
                                  {"out", a.out}}),
                     {a.emb});
  std::cout << "normalized " << normalized.size() << " embeddings (" << a.mode
            << ") to " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// protect
// ---------------------------------------------------------------------------

struct ProtectArgs {
  std::string emb;
  std::string out;
  std::string keys_out;
  std::string keys_in;  // load instead of generating when non-empty
  std::size_t m = pp::kDefaultWindowSize;
  std::size_t overlap = 0;
  int c_range = pp::kDefaultCoefficientRange;
  std::uint64_t seed = 0;
  std::string normalize = "l2";
};

void run_protect(const ProtectArgs& a) {
  if (a.m == 0 || a.overlap >= a.m) {
    throw pp::ParameterError("overlap must lie in [0, m-1]");
  }
  const pp::EmbeddingSet raw = pp::load_embeddings(a.emb);
  const pp::EmbeddingSet set =
      pp::normalize_set(raw, pp::parse_normalization_mode(a.normalize));

  std::map<std::string, pp::Keys> keys_by_subject;
  std::vector<pp::Keys> keys_list;
  if (!a.keys_in.empty()) {
    for (pp::Keys& k : pp::load_keys(a.keys_in)) {
      const std::string subject = k.subject;
      if (!keys_by_subject.emplace(subject, std::move(k)).second) {
        throw pp::FormatError("duplicate keys for subject " + subject +
                              " in " + a.keys_in);
      }
    }
  } else {
    for (const std::string& subject : set.identities()) {
      pp::Keys k = pp::generate_random_keys(subject, a.m, a.overlap, a.c_range,
                                            pp::mix_seed({a.seed, 0x4b455953}));
      keys_list.push_back(k);
      keys_by_subject.emplace(subject, std::move(k));
    }
  }

  std::vector<pp::ProtectedTemplate> templates;
  templates.reserve(set.size());
  for (const pp::Embedding& e : set.members()) {
    const auto it = keys_by_subject.find(e.identity);
    if (it == keys_by_subject.end()) {
      throw pp::KeyMismatchError("no keys for subject " + e.identity);
    }
    templates.push_back(pp::protect(e, it->second));
  }
  pp::save_protected(templates, a.out);

  const std::string config = join_config(
      {{"emb", a.emb},
       {"out", a.out},
       {"keys_out", a.keys_out},
       {"keys_in", a.keys_in},
       {"m", std::to_string(a.m)},
       {"overlap", std::to_string(a.overlap)},
       {"c_range", std::to_string(a.c_range)},
       {"seed", std::to_string(a.seed)},
       {"normalize", a.normalize}});
  std::vector<fs::path> inputs{a.emb};
  if (!a.keys_in.empty()) inputs.push_back(a.keys_in);
  pp::write_manifest(a.out, "protect", config, inputs);

  if (!a.keys_out.empty()) {
    if (keys_list.empty()) {
      for (const auto& [subject, k] : keys_by_subject) keys_list.push_back(k);
    }
    pp::save_keys(keys_list, a.keys_out);
    pp::write_manifest(a.keys_out, "protect", config, inputs);
  }
  std::cout << "protected " << templates.size() << " templates (k = "
            << templates.front().values.size() << ") to " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string in;
  std::string baseline;  // optional second template set
  std::string det_out;
  std::string baseline_det_out;
  std::string summary_out;
  std::size_t det_points = 200;
};

pp::ScoreSet load_scores_any(const fs::path& path) {
  if (looks_like_embedding_csv(path)) {
    return pp::score_all_pairs(pp::load_embeddings(path));
  }
  const std::vector<pp::ProtectedTemplate> templates = pp::load_protected(path);
  return pp::score_all_pairs(templates);
}

void run_eval(const EvalArgs& a) {
  struct Entry {
    std::string label;
    pp::ScoreSet scores;
  };
  std::vector<Entry> entries;
  entries.push_back({fs::path(a.in).filename().string(), load_scores_any(a.in)});
  if (!a.baseline.empty()) {
    entries.push_back({fs::path(a.baseline).filename().string(),
                       load_scores_any(a.baseline)});
  }

  pp::save_det_curve(pp::det_curve(entries[0].scores, a.det_points), a.det_out);
  pp::write_manifest(a.det_out, "eval",
                     join_config({{"in", a.in}, {"det_out", a.det_out}}),
                     {a.in});
  if (entries.size() > 1 && !a.baseline_det_out.empty()) {
    pp::save_det_curve(pp::det_curve(entries[1].scores, a.det_points),
                       a.baseline_det_out);
    pp::write_manifest(a.baseline_det_out, "eval",
                       join_config({{"baseline", a.baseline},
                                    {"det_out", a.baseline_det_out}}),
                       {a.baseline});
  }

  std::vector<std::vector<std::string>> rows;
  for (const Entry& entry : entries) {
    std::string note;
    if (pp::fmr_target_unreachable(entry.scores, 0.0001)) {
      note = "fmr 0.01% below score granularity";
    } else if (pp::fmr_target_unreachable(entry.scores, 0.001)) {
      note = "fmr 0.1% below score granularity";
    }
    rows.push_back(
        {entry.label, std::to_string(entry.scores.genuine.size()),
         std::to_string(entry.scores.impostor.size()),
         fmt(100.0 * pp::fnmr_at_fmr_anchor(entry.scores, 0.001)),
         fmt(100.0 * pp::fnmr_at_fmr_anchor(entry.scores, 0.0001)), note});
  }

  std::ofstream out(a.summary_out);
  if (!out) throw pp::IoError("cannot write " + a.summary_out);
  pp::write_text_table(out,
                       {"templates", "genuine", "impostor", "fnmr%@0.1%fmr",
                        "fnmr%@0.01%fmr", "note"},
                       rows);
  out.close();
  std::vector<fs::path> inputs{a.in};
  if (!a.baseline.empty()) inputs.push_back(a.baseline);
  pp::write_manifest(a.summary_out, "eval",
                     join_config({{"in", a.in},
                                  {"baseline", a.baseline},
                                  {"summary_out", a.summary_out}}),
                     inputs);
  std::cout << "wrote DET data to " << a.det_out << " and summary to "
            << a.summary_out << "\n";
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

struct AttackArgs {
  std::string templates;
  std::string keys;
  std::string emb;  // true (already normalized) embeddings
  std::string solver = "cosine";
  std::size_t guesses = 10;
  std::uint64_t seed = 0;
  std::string out;
  std::string hist_out;
  std::string best_out;
  std::size_t max_iters = 500;
  std::size_t bins = 40;
  std::size_t threads = 0;
};

std::vector<pp::AttackTarget> assemble_targets(
    const std::vector<pp::ProtectedTemplate>& templates,
    const std::vector<pp::Keys>& keys, const pp::EmbeddingSet& truths) {
  std::map<std::string, const pp::Keys*> keys_by_subject;
  for (const pp::Keys& k : keys) {
    if (!keys_by_subject.emplace(k.subject, &k).second) {
      throw pp::FormatError("duplicate keys for subject " + k.subject);
    }
  }
  std::map<std::pair<std::string, std::string>, const pp::Embedding*> truth;
  for (const pp::Embedding& e : truths.members()) {
    truth.emplace(std::make_pair(e.identity, e.sample), &e);
  }

  // one reference template per subject: the first row wins
  std::vector<pp::AttackTarget> targets;
  std::set<std::string> seen;
  for (const pp::ProtectedTemplate& t : templates) {
    if (!seen.insert(t.subject).second) continue;
    const auto kit = keys_by_subject.find(t.subject);
    if (kit == keys_by_subject.end()) {
      throw pp::KeyMismatchError("no keys for subject " + t.subject);
    }
    const auto eit = truth.find({t.subject, t.sample});
    if (eit == truth.end()) {
      throw pp::FormatError("no embedding for " + t.subject + "/" + t.sample);
    }
    pp::AttackTarget target;
    target.tmpl = t;
    target.keys = *kit->second;
    target.true_values = eit->second->values;
    targets.push_back(std::move(target));
  }
  return targets;
}

void run_attack(const AttackArgs& a) {
  const std::vector<pp::ProtectedTemplate> templates =
      pp::load_protected(a.templates);
  const std::vector<pp::Keys> keys = pp::load_keys(a.keys);
  const pp::EmbeddingSet truths = pp::load_embeddings(a.emb);
  const std::vector<pp::AttackTarget> targets =
      assemble_targets(templates, keys, truths);
  const pp::ElementDistribution dist = pp::estimate_distribution(truths);

  pp::AttackConfig cfg;
  cfg.solver_kind = pp::parse_solver_kind(a.solver);
  cfg.guesses_per_template = a.guesses;
  cfg.guess_seed = a.seed;
  cfg.lm.max_iters = a.max_iters;
  cfg.qn.max_iters = a.max_iters;
  cfg.threads = a.threads;

  const pp::AttackCampaignResult campaign =
      pp::attack_campaign(targets, dist, cfg);
  pp::save_attack_results(campaign, a.out);

  const std::string config = join_config(
      {{"templates", a.templates},
       {"keys", a.keys},
       {"emb", a.emb},
       {"solver", a.solver},
       {"guesses", std::to_string(a.guesses)},
       {"seed", std::to_string(a.seed)},
       {"max_iters", std::to_string(a.max_iters)}});
  const std::vector<fs::path> inputs{a.templates, a.keys, a.emb};
  pp::write_manifest(a.out, "attack", config, inputs);

  if (!a.hist_out.empty()) {
    std::vector<double> similarities;
    similarities.reserve(campaign.results.size());
    for (const pp::AttackResult& r : campaign.results) {
      similarities.push_back(r.inversion_similarity);
    }
    pp::export_histogram(similarities, a.bins, a.hist_out);
    pp::write_manifest(a.hist_out, "attack", config, inputs);
  }
  if (!a.best_out.empty()) {
    pp::csv::Writer best(a.best_out);
    best.raw_line("subject,best_similarity");
    for (const auto& [subject, sim] : campaign.best_similarity) {
      best.raw_line(subject + "," + fmt(sim));
    }
    best.close();
    pp::write_manifest(a.best_out, "attack", config, inputs);
  }

  std::size_t converged = 0;
  for (const pp::AttackResult& r : campaign.results) converged += r.converged;
  std::cout << "attacked " << targets.size() << " templates x " << a.guesses
            << " guesses (" << to_string(cfg.solver_kind) << "), "
            << converged << "/" << campaign.results.size()
            << " solves converged; results in " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// select-keys
// ---------------------------------------------------------------------------

struct SelectKeysArgs {
  std::string emb;
  std::string normalize = "l2";
  std::size_t m = pp::kDefaultWindowSize;
  std::size_t overlap = 0;
  int c_range = pp::kDefaultCoefficientRange;
  double target_fmr = 0.20;
  std::size_t sel_guesses = 3;
  std::size_t max_attempts = 200;
  std::uint64_t seed = 0;
  std::string keys_out;
  std::string log_out;
  std::string exhausted_out;
  std::size_t max_iters = 500;
  std::size_t threads = 0;
};

// returns the number of exhausted subjects
std::size_t run_select_keys(const SelectKeysArgs& a) {
  const pp::EmbeddingSet raw = pp::load_embeddings(a.emb);
  const pp::EmbeddingSet set =
      pp::normalize_set(raw, pp::parse_normalization_mode(a.normalize));
  const pp::ScoreSet scores = pp::score_all_pairs(set);
  const pp::ElementDistribution dist = pp::estimate_distribution(set);

  pp::EmbeddingSet references(set.dim());
  for (const pp::Embedding* e : set.references()) references.add(*e);

  pp::SelectionConfig cfg;
  cfg.target_fmr = a.target_fmr;
  cfg.selection_guesses = a.sel_guesses;
  cfg.max_attempts = a.max_attempts;
  cfg.m = a.m;
  cfg.overlap = a.overlap;
  cfg.c_range = a.c_range;
  cfg.key_seed = pp::mix_seed({a.seed, 0x53454c4b});
  cfg.guess_seed = pp::mix_seed({a.seed, 0x53454c47});
  cfg.qn.max_iters = a.max_iters;
  cfg.threads = a.threads;

  const pp::DatasetSelection selection =
      pp::select_keys_for_dataset(references, dist, scores, cfg);

  std::vector<pp::Keys> accepted;
  accepted.reserve(selection.outcomes.size());
  for (const auto& [subject, outcome] : selection.outcomes) {
    accepted.push_back(outcome.keys);
  }
  const std::string config = join_config(
      {{"emb", a.emb},
       {"normalize", a.normalize},
       {"m", std::to_string(a.m)},
       {"overlap", std::to_string(a.overlap)},
       {"c_range", std::to_string(a.c_range)},
       {"target_fmr", fmt(a.target_fmr)},
       {"sel_guesses", std::to_string(a.sel_guesses)},
       {"max_attempts", std::to_string(a.max_attempts)},
       {"seed", std::to_string(a.seed)},
       {"max_iters", std::to_string(a.max_iters)},
       {"tau", fmt(selection.tau)}});
  if (!accepted.empty()) {
    pp::save_keys(accepted, a.keys_out);
    pp::write_manifest(a.keys_out, "select-keys", config, {a.emb});
  }
  if (!a.log_out.empty()) {
    pp::save_selection_log(selection, a.log_out);
    pp::write_manifest(a.log_out, "select-keys", config, {a.emb});
  }

  if (!a.exhausted_out.empty()) {
    pp::csv::Writer out(a.exhausted_out);
    out.raw_line("subject");
    for (const std::string& subject : selection.exhausted) {
      out.raw_line(subject);
    }
    out.close();
    pp::write_manifest(a.exhausted_out, "select-keys", config, {a.emb});
  }

  std::cout << "selected keys for " << selection.outcomes.size() << "/"
            << references.size() << " subjects at tau = " << selection.tau
            << " (fmr " << 100.0 * a.target_fmr << "%)\n";
  for (const std::string& subject : selection.exhausted) {
    std::cerr << "exhausted: no acceptable keys for " << subject << " within "
              << a.max_attempts << " attempts\n";
  }
  return selection.exhausted.size();
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string emb;  // normalized embeddings for the unprotected score anchor
  std::vector<std::string> attacks;  // label=path or bare path entries
  std::string anchors = "0.2,0.001,0.0001";
  std::string out;
  std::string svg_out;
  std::size_t bins = 40;
};

void run_report(const ReportArgs& a) {
  if (a.attacks.empty()) {
    throw pp::ParameterError("report needs at least one --attack input");
  }
  const pp::EmbeddingSet set = pp::load_embeddings(a.emb);
  const pp::ScoreSet scores = pp::score_all_pairs(set);
  const std::vector<double> anchors = parse_anchor_list(a.anchors);

  struct Entry {
    std::string label;
    std::string path;
    pp::AttackCampaignResult campaign;
  };
  std::vector<Entry> entries;
  for (const std::string& spec_entry : a.attacks) {
    Entry e;
    const auto eq = spec_entry.find('=');
    if (eq == std::string::npos) {
      e.path = spec_entry;
      e.label = fs::path(spec_entry).stem().string();
    } else {
      e.label = spec_entry.substr(0, eq);
      e.path = spec_entry.substr(eq + 1);
    }
    e.campaign = pp::load_attack_results(e.path);
    entries.push_back(std::move(e));
  }

  std::vector<std::string> header{"campaign", "subjects", "attacks"};
  for (double anchor : anchors) {
    header.push_back("isr%best@" + fmt(100.0 * anchor) + "%fmr");
    header.push_back("isr%all@" + fmt(100.0 * anchor) + "%fmr");
  }
  std::vector<std::vector<std::string>> rows;
  for (const Entry& e : entries) {
    std::vector<std::string> row{
        e.label, std::to_string(e.campaign.best_similarity.size()),
        std::to_string(e.campaign.results.size())};
    for (double anchor : anchors) {
      row.push_back(fmt(100.0 * pp::isr(e.campaign, scores, anchor,
                                        pp::IsrAggregation::best_of_guesses)));
      row.push_back(fmt(100.0 * pp::isr(e.campaign, scores, anchor,
                                        pp::IsrAggregation::per_attack)));
    }
    rows.push_back(std::move(row));
  }

  std::ofstream out(a.out);
  if (!out) throw pp::IoError("cannot write " + a.out);
  out << "inversion success rates against thresholds anchored on the "
         "unprotected score distribution\n";
  for (double anchor : anchors) {
    out << "  anchor " << 100.0 * anchor
        << "% fmr -> tau = " << fmt(pp::threshold_at_fmr(scores, anchor));
    if (pp::fmr_target_unreachable(scores, anchor)) {
      out << " (below impostor-score granularity; tau sits above all "
             "impostor scores)";
    }
    out << "\n";
  }
  out << "\n";
  pp::write_text_table(out, header, rows);
  out.close();

  std::vector<fs::path> inputs{a.emb};
  for (const Entry& e : entries) inputs.push_back(e.path);
  const std::string config =
      join_config({{"emb", a.emb}, {"anchors", a.anchors}, {"out", a.out}});
  pp::write_manifest(a.out, "report", config, inputs);

  if (!a.svg_out.empty()) {
    static const char* kPalette[] = {"#7b3294", "#1b7837", "#d95f02",
                                     "#386cb0", "#e7298a", "#66a61e"};
    std::vector<pp::HistogramSeries> series;
    series.push_back({"genuine (unprotected)", scores.genuine, "#2ca25f"});
    series.push_back({"impostor (unprotected)", scores.impostor, "#de2d26"});
    for (std::size_t i = 0; i < entries.size(); ++i) {
      std::vector<double> sims;
      sims.reserve(entries[i].campaign.results.size());
      for (const pp::AttackResult& r : entries[i].campaign.results) {
        sims.push_back(r.inversion_similarity);
      }
      series.push_back({"inversion: " + entries[i].label, std::move(sims),
                        kPalette[i % 6]});
    }
    pp::write_histogram_svg(a.svg_out, series, a.bins,
                            "score distributions (cosine similarity)");
    pp::write_manifest(a.svg_out, "report", config, inputs);
  }
  std::cout << "wrote report to " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// pipeline: gen-synth -> normalize -> protect -> attack -> report
// ---------------------------------------------------------------------------

struct PipelineArgs {
  std::string outdir;
  std::uint64_t seed = 0;
  std::size_t identities = 10;
  std::size_t samples = 5;
  std::size_t dim = 64;
  double spread = 0.15;
  double scale = 1.0;
  std::size_t m = pp::kDefaultWindowSize;
  int c_range = pp::kDefaultCoefficientRange;
  std::string overlaps = "0,1,2,3";
  std::size_t guesses = 3;
  std::string solver = "cosine";
  std::size_t max_iters = 150;
  std::size_t bins = 40;
  std::size_t threads = 0;
};

void run_pipeline(const PipelineArgs& a) {
  const std::vector<std::size_t> overlaps = parse_overlap_list(a.overlaps);
  fs::create_directories(a.outdir);
  const fs::path dir(a.outdir);

  GenSynthArgs gen;
  gen.identities = a.identities;
  gen.samples = a.samples;
  gen.dim = a.dim;
  gen.spread = a.spread;
  gen.scale = a.scale;
  gen.seed = a.seed;
  gen.out = (dir / "embeddings.csv").string();
  run_gen_synth(gen);

  NormalizeArgs norm;
  norm.emb = gen.out;
  norm.mode = "l2";
  norm.out = (dir / "normalized.csv").string();
  run_normalize(norm);

  ReportArgs report;
  report.emb = norm.out;
  report.out = (dir / "summary.txt").string();
  report.svg_out = (dir / "histograms.svg").string();
  report.bins = a.bins;

  for (std::size_t overlap : overlaps) {
    const std::string tag = "o" + std::to_string(overlap);

    ProtectArgs prot;
    prot.emb = norm.out;
    prot.normalize = "none";
    prot.m = a.m;
    prot.overlap = overlap;
    prot.c_range = a.c_range;
    prot.seed = pp::mix_seed({a.seed, 0x50524f54, overlap});
    prot.out = (dir / ("protected_" + tag + ".csv")).string();
    prot.keys_out = (dir / ("keys_" + tag + ".csv")).string();
    run_protect(prot);

    AttackArgs attack;
    attack.templates = prot.out;
    attack.keys = prot.keys_out;
    attack.emb = norm.out;
    attack.solver = a.solver;
    attack.guesses = a.guesses;
    attack.seed = pp::mix_seed({a.seed, 0x41545441, overlap});
    attack.max_iters = a.max_iters;
    attack.threads = a.threads;
    attack.bins = a.bins;
    attack.out = (dir / ("attack_" + tag + ".csv")).string();
    attack.hist_out = (dir / ("attack_hist_" + tag + ".csv")).string();
    attack.best_out = (dir / ("attack_best_" + tag + ".csv")).string();
    run_attack(attack);

    EvalArgs eval;
    eval.in = prot.out;
    eval.det_out = (dir / ("det_" + tag + ".csv")).string();
    eval.summary_out = (dir / ("accuracy_" + tag + ".txt")).string();
    run_eval(eval);

    report.attacks.push_back(tag + "=" + attack.out);
  }
  run_report(report);
  std::cout << "pipeline artifacts in " << a.outdir << "\n";
}

int dispatch(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const pp::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pp::NumericalFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const pp::KeySelectionExhausted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitExhausted;
  } catch (const pp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polyprotect: polynomial-window protection of real-vector "
               "templates, inversion attacks and key selection"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value config file (# comments, "
                 "[subcommand] sections); flags override file values");
  app.set_version_flag("--version", pp::kVersion);

  GenSynthArgs gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-synth", "generate identity-clustered synthetic "
                                      "embeddings");
  gen_cmd->add_option("--identities", gen.identities, "number of identities")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--samples", gen.samples, "samples per identity")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--dim", gen.dim, "embedding dimension (>= 2)");
  gen_cmd->add_option("--spread", gen.spread, "within-identity noise scale");
  gen_cmd->add_option("--scale", gen.scale, "global magnitude of embeddings");
  gen_cmd->add_option("--seed", gen.seed, "random seed")->required();
  gen_cmd->add_option("--out", gen.out, "output embedding CSV")->required();

  NormalizeArgs norm;
  CLI::App* norm_cmd =
      app.add_subcommand("normalize", "normalize an embedding CSV");
  norm_cmd->add_option("--emb", norm.emb, "input embedding CSV")->required();
  norm_cmd->add_option("--mode", norm.mode, "l2 or minmax");
  norm_cmd->add_option("--out", norm.out, "output embedding CSV")->required();

  ProtectArgs prot;
  CLI::App* prot_cmd = app.add_subcommand(
      "protect", "apply the polynomial window transform per subject");
  prot_cmd->add_option("--emb", prot.emb, "input embedding CSV")->required();
  prot_cmd->add_option("--out", prot.out, "output protected-template CSV")
      ->required();
  prot_cmd->add_option("--keys-out", prot.keys_out, "write generated keys here");
  prot_cmd->add_option("--keys", prot.keys_in,
                       "load per-subject keys instead of generating");
  prot_cmd->add_option("--m", prot.m, "window size");
  prot_cmd->add_option("--overlap", prot.overlap, "window overlap in [0, m-1]");
  prot_cmd->add_option("--c-range", prot.c_range,
                       "coefficients drawn from [-c_range, c_range] \\ {0}");
  prot_cmd->add_option("--seed", prot.seed, "key generation seed")->required();
  prot_cmd->add_option("--normalize", prot.normalize,
                       "normalization before protection: none, l2, minmax");
  prot_cmd->add_flag_callback(
      "--no-normalize", [&prot]() { prot.normalize = "none"; },
      "same as --normalize none");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "all-pairs verification accuracy of a template set");
  eval_cmd->add_option("--in", eval.in,
                       "template CSV (embedding or protected)")->required();
  eval_cmd->add_option("--baseline", eval.baseline,
                       "optional second template CSV for comparison");
  eval_cmd->add_option("--det-out", eval.det_out, "DET curve CSV")->required();
  eval_cmd->add_option("--baseline-det-out", eval.baseline_det_out,
                       "DET curve CSV for the baseline");
  eval_cmd->add_option("--summary-out", eval.summary_out,
                       "plain-text FNMR summary")->required();
  eval_cmd->add_option("--points", eval.det_points, "DET grid size");

  AttackArgs attack;
  CLI::App* attack_cmd = app.add_subcommand(
      "attack", "inversion-attack campaign against protected templates");
  attack_cmd->add_option("--templates", attack.templates,
                         "protected-template CSV")->required();
  attack_cmd->add_option("--keys", attack.keys, "keys CSV")->required();
  attack_cmd->add_option("--emb", attack.emb,
                         "true (normalized) embeddings CSV")->required();
  attack_cmd->add_option("--solver", attack.solver, "euclidean or cosine");
  attack_cmd->add_option("--guesses", attack.guesses,
                         "initial guesses per template")
      ->check(CLI::PositiveNumber);
  attack_cmd->add_option("--seed", attack.seed, "guess seed")->required();
  attack_cmd->add_option("--out", attack.out, "attack results CSV")->required();
  attack_cmd->add_option("--hist-out", attack.hist_out,
                         "inversion-score histogram CSV");
  attack_cmd->add_option("--best-out", attack.best_out,
                         "per-subject best similarity CSV");
  attack_cmd->add_option("--max-iters", attack.max_iters,
                         "solver iteration budget");
  attack_cmd->add_option("--bins", attack.bins, "histogram bins");
  attack_cmd->add_option("--threads", attack.threads,
                         "worker threads (0 = all cores)");

  SelectKeysArgs select;
  CLI::App* select_cmd = app.add_subcommand(
      "select-keys",
      "redraw keys per subject until the cosine attack fails at the loose "
      "FMR-anchored threshold");
  select_cmd->add_option("--emb", select.emb, "embedding CSV")->required();
  select_cmd->add_option("--normalize", select.normalize,
                         "normalization mode: none, l2, minmax");
  select_cmd->add_option("--m", select.m, "window size");
  select_cmd->add_option("--overlap", select.overlap, "window overlap");
  select_cmd->add_option("--c-range", select.c_range, "coefficient range");
  select_cmd->add_option("--target-fmr", select.target_fmr,
                         "selection threshold anchor (default 0.20)");
  select_cmd->add_option("--sel-guesses", select.sel_guesses,
                         "attack guesses per attempt")
      ->check(CLI::PositiveNumber);
  select_cmd->add_option("--max-attempts", select.max_attempts,
                         "key draws per subject before giving up")
      ->check(CLI::PositiveNumber);
  select_cmd->add_option("--seed", select.seed, "selection seed")->required();
  select_cmd->add_option("--keys-out", select.keys_out, "accepted keys CSV")
      ->required();
  select_cmd->add_option("--log-out", select.log_out, "selection log CSV");
  select_cmd->add_option("--exhausted-out", select.exhausted_out,
                         "list of subjects with no acceptable keys");
  select_cmd->add_option("--max-iters", select.max_iters,
                         "solver iteration budget");
  select_cmd->add_option("--threads", select.threads,
                         "worker threads (0 = all cores)");

  ReportArgs report;
  CLI::App* report_cmd = app.add_subcommand(
      "report", "ISR tables and score-histogram SVG from attack results");
  report_cmd->add_option("--emb", report.emb,
                         "normalized embeddings for the unprotected anchor")
      ->required();
  report_cmd->add_option("--attack", report.attacks,
                         "attack results CSV, optionally label=path; repeat "
                         "for several campaigns")
      ->required();
  report_cmd->add_option("--anchors", report.anchors,
                         "comma-separated FMR anchors");
  report_cmd->add_option("--out", report.out, "summary text file")->required();
  report_cmd->add_option("--svg-out", report.svg_out,
                         "overlaid histogram SVG");
  report_cmd->add_option("--bins", report.bins, "histogram bins");

  PipelineArgs pipe;
  CLI::App* pipe_cmd = app.add_subcommand(
      "pipeline",
      "gen-synth -> normalize -> protect -> attack -> report in one run");
  pipe_cmd->add_option("--outdir", pipe.outdir, "output directory")->required();
  pipe_cmd->add_option("--seed", pipe.seed, "master seed")->required();
  pipe_cmd->add_option("--identities", pipe.identities, "identities")
      ->check(CLI::PositiveNumber);
  pipe_cmd->add_option("--samples", pipe.samples, "samples per identity")
      ->check(CLI::PositiveNumber);
  pipe_cmd->add_option("--dim", pipe.dim, "embedding dimension");
  pipe_cmd->add_option("--spread", pipe.spread, "within-identity noise");
  pipe_cmd->add_option("--scale", pipe.scale, "embedding magnitude");
  pipe_cmd->add_option("--m", pipe.m, "window size");
  pipe_cmd->add_option("--c-range", pipe.c_range, "coefficient range");
  pipe_cmd->add_option("--overlaps", pipe.overlaps,
                       "comma-separated overlaps to run");
  pipe_cmd->add_option("--guesses", pipe.guesses, "guesses per template")
      ->check(CLI::PositiveNumber);
  pipe_cmd->add_option("--solver", pipe.solver, "euclidean or cosine");
  pipe_cmd->add_option("--max-iters", pipe.max_iters,
                       "solver iteration budget");
  pipe_cmd->add_option("--bins", pipe.bins, "histogram bins");
  pipe_cmd->add_option("--threads", pipe.threads,
                       "worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (gen_cmd->parsed()) return dispatch([&] { run_gen_synth(gen); });
  if (norm_cmd->parsed()) return dispatch([&] { run_normalize(norm); });
  if (prot_cmd->parsed()) return dispatch([&] { run_protect(prot); });
  if (eval_cmd->parsed()) return dispatch([&] { run_eval(eval); });
  if (attack_cmd->parsed()) return dispatch([&] { run_attack(attack); });
  if (select_cmd->parsed()) {
    std::size_t exhausted = 0;
    const int code = dispatch([&] { exhausted = run_select_keys(select); });
    if (code != kExitOk) return code;
    return exhausted == 0 ? kExitOk : kExitExhausted;
  }
  if (report_cmd->parsed()) return dispatch([&] { run_report(report); });
  if (pipe_cmd->parsed()) return dispatch([&] { run_pipeline(pipe); });
  return kExitUsage;
}
