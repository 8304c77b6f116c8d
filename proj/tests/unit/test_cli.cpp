#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "polyprotect/csv.hpp"
#include "polyprotect/embedding.hpp"
#include "polyprotect/transform.hpp"
#include "test_util.hpp"

namespace {

const char* cli_path() { return std::getenv("POLYPROTECT_CLI"); }

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string("\"") + cli_path() + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::size_t line_count(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("cli gen-synth: row count, determinism, usage errors") {
  REQUIRE(cli_path() != nullptr);
  TempDir dir("cli_gen");
  const std::string out1 = dir.file("a.csv").string();
  const std::string out2 = dir.file("b.csv").string();
  const std::string flags =
      "gen-synth --identities 6 --samples 3 --dim 32 --seed 42 --out ";
  REQUIRE(run_cli(flags + out1) == 0);
  CHECK(line_count(out1) == 19);  // header + 18 rows

  REQUIRE(run_cli(flags + out2) == 0);
  CHECK(slurp(out1) == slurp(out2));

  CHECK(run_cli("gen-synth --identities 6 --samples 3 --dim 32 --seed 1") ==
        2);  // missing --out
  CHECK(run_cli("gen-synth --identities 0 --samples 3 --dim 32 --seed 1 "
                "--out " +
                dir.file("z.csv").string()) == 2);
  CHECK(std::filesystem::exists(out1 + ".manifest.json"));
}

TEST_CASE("cli protect: output dimension table and parameter checks") {
  REQUIRE(cli_path() != nullptr);
  TempDir dir("cli_protect");
  const std::string emb = dir.file("emb.csv").string();
  REQUIRE(run_cli("gen-synth --identities 4 --samples 2 --dim 512 --seed 7 "
                  "--out " +
                  emb) == 0);

  const std::string prot = dir.file("prot.csv").string();
  const std::string keys = dir.file("keys.csv").string();
  REQUIRE(run_cli("protect --emb " + emb + " --overlap 3 --seed 9 --out " +
                  prot + " --keys-out " + keys) == 0);

  std::ifstream in(prot);
  std::string header;
  std::getline(in, header);
  const auto cols = polyprotect::csv::split(header);
  CHECK(cols.size() == 3 + 255);  // subject,sample,overlap + k columns
  CHECK(line_count(prot) == 9);
  CHECK(line_count(keys) == 5);

  CHECK(run_cli("protect --emb " + emb + " --overlap 5 --seed 9 --out " +
                dir.file("x.csv").string()) == 2);
  CHECK(run_cli("protect --emb /no/such/file.csv --overlap 1 --seed 9 --out " +
                dir.file("y.csv").string()) == 3);
}

TEST_CASE("cli protect: --no-normalize on normalized input matches") {
  REQUIRE(cli_path() != nullptr);
  TempDir dir("cli_norm");
  const std::string emb = dir.file("emb.csv").string();
  // scale 1 output is already unit-norm
  REQUIRE(run_cli("gen-synth --identities 3 --samples 2 --dim 64 --seed 3 "
                  "--out " +
                  emb) == 0);
  const std::string with_norm = dir.file("p1.csv").string();
  const std::string without_norm = dir.file("p2.csv").string();
  REQUIRE(run_cli("protect --emb " + emb + " --overlap 2 --seed 5 --out " +
                  with_norm) == 0);
  REQUIRE(run_cli("protect --emb " + emb + " --overlap 2 --seed 5 "
                  "--no-normalize --out " +
                  without_norm) == 0);

  const auto a = polyprotect::load_protected(with_norm);
  const auto b = polyprotect::load_protected(without_norm);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].values.size(); ++j) {
      CHECK(a[i].values[j] ==
            doctest::Approx(b[i].values[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("cli eval: DET and summary artifacts, deterministic bytes") {
  REQUIRE(cli_path() != nullptr);
  TempDir dir("cli_eval");
  const std::string emb = dir.file("emb.csv").string();
  REQUIRE(run_cli("gen-synth --identities 5 --samples 4 --dim 32 --seed 11 "
                  "--out " +
                  emb) == 0);
  const std::string det1 = dir.file("det1.csv").string();
  const std::string det2 = dir.file("det2.csv").string();
  REQUIRE(run_cli("eval --in " + emb + " --det-out " + det1 +
                  " --summary-out " + dir.file("s1.txt").string()) == 0);
  REQUIRE(run_cli("eval --in " + emb + " --det-out " + det2 +
                  " --summary-out " + dir.file("s2.txt").string()) == 0);
  CHECK(slurp(det1) == slurp(det2));
  CHECK(line_count(det1) == 201);  // header + default 200 points
  CHECK(slurp(dir.file("s1.txt")).find("fnmr") != std::string::npos);
}

TEST_CASE("cli attack: row counts and solver validation") {
  REQUIRE(cli_path() != nullptr);
  TempDir dir("cli_attack");
  const std::string emb = dir.file("emb.csv").string();
  const std::string norm = dir.file("norm.csv").string();
  const std::string prot = dir.file("prot.csv").string();
  const std::string keys = dir.file("keys.csv").string();
  REQUIRE(run_cli("gen-synth --identities 4 --samples 2 --dim 24 --seed 13 "
                  "--out " +
                  emb) == 0);
  REQUIRE(run_cli("normalize --emb " + emb + " --out " + norm) == 0);
  REQUIRE(run_cli("protect --emb " + norm + " --no-normalize --overlap 1 "
                  "--seed 17 --out " +
                  prot + " --keys-out " + keys) == 0);

  const std::string results = dir.file("results.csv").string();
  REQUIRE(run_cli("attack --templates " + prot + " --keys " + keys +
                  " --emb " + norm + " --solver cosine --guesses 3 --seed 23 "
                  "--max-iters 40 --out " +
                  results + " --hist-out " + dir.file("hist.csv").string()) ==
          0);
  CHECK(line_count(results) == 1 + 4 * 3);  // header + subjects x guesses
  CHECK(line_count(dir.file("hist.csv")) == 41);

  CHECK(run_cli("attack --templates " + prot + " --keys " + keys + " --emb " +
                norm + " --solver fancy --guesses 3 --seed 23 --out " +
                dir.file("r2.csv").string()) == 2);
}

TEST_CASE("cli select-keys and report: valid keys, reruns identical") {
  REQUIRE(cli_path() != nullptr);
  TempDir dir("cli_select");
  const std::string emb = dir.file("emb.csv").string();
  REQUIRE(run_cli("gen-synth --identities 4 --samples 3 --dim 16 --seed 29 "
                  "--out " +
                  emb) == 0);

  const std::string keys1 = dir.file("k1.csv").string();
  const std::string keys2 = dir.file("k2.csv").string();
  const std::string select_flags =
      "select-keys --emb " + emb + " --overlap 1 --sel-guesses 1 "
      "--max-attempts 20 --max-iters 40 --seed 31 --keys-out ";
  const int code1 =
      run_cli(select_flags + keys1 + " --log-out " + dir.file("log.csv").string());
  CHECK((code1 == 0 || code1 == 5));
  const int code2 = run_cli(select_flags + keys2);
  CHECK(code2 == code1);

  if (std::filesystem::exists(keys1)) {
    CHECK(slurp(keys1) == slurp(keys2));
    for (const auto& k : polyprotect::load_keys(keys1)) {
      CHECK_NOTHROW(polyprotect::validate_keys(k));
      CHECK(k.overlap == 1);
    }
  }
}

TEST_CASE("cli report: empty attack CSV is a data error") {
  REQUIRE(cli_path() != nullptr);
  TempDir dir("cli_report_err");
  const std::string emb = dir.file("emb.csv").string();
  REQUIRE(run_cli("gen-synth --identities 3 --samples 2 --dim 8 --seed 2 "
                  "--out " +
                  emb) == 0);
  {
    std::ofstream out(dir.file("empty.csv"));
    out << "subject,guess,solver,converged,iterations,objective,similarity\n";
  }
  CHECK(run_cli("report --emb " + emb + " --attack " +
                dir.file("empty.csv").string() + " --out " +
                dir.file("sum.txt").string()) == 3);
}

TEST_CASE("cli pipeline: end-to-end determinism of every CSV") {
  REQUIRE(cli_path() != nullptr);
  TempDir dir("cli_pipeline");
  const std::string d1 = dir.file("run1").string();
  const std::string d2 = dir.file("run2").string();
  const std::string flags =
      "pipeline --identities 4 --samples 3 --dim 24 --guesses 2 "
      "--overlaps 0,1 --max-iters 40 --seed 1234 --outdir ";
  REQUIRE(run_cli(flags + d1) == 0);
  REQUIRE(run_cli(flags + d2) == 0);

  std::size_t csv_files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(d1)) {
    if (entry.path().extension() != ".csv") continue;
    ++csv_files;
    const auto other = std::filesystem::path(d2) / entry.path().filename();
    REQUIRE(std::filesystem::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
  }
  CHECK(csv_files >= 8);
  CHECK(std::filesystem::exists(std::filesystem::path(d1) / "summary.txt"));
  CHECK(std::filesystem::exists(std::filesystem::path(d1) / "histograms.svg"));
}
