#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "overlay/datamodel/io.hpp"
#include "overlay/moe/params.hpp"
#include "overlay/numerics/rng.hpp"
#include "support/corpus_gen.hpp"

using namespace overlay;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() /
                 ("overlay-cli-test-" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path_in(const std::string& name) {
  return (work_dir() / name).string();
}

// Runs the binary with stdout captured to a scratch file; stderr is dropped
// so expected warnings stay out of the test log.
RunResult run_cli(const std::string& args) {
  const std::string out_path = path_in("stdout.txt");
  const std::string cmd =
      std::string(CLI_BINARY) + " " + args + " > " + out_path + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_path);
  std::stringstream buf;
  buf << in.rdbuf();
  r.out = buf.str();
  return r;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::vector<data::BenchmarkSample> write_corpus(const std::string& path,
                                                std::uint64_t seed,
                                                std::size_t groups) {
  num::Rng rng(seed);
  auto corpus = testing::random_corpus(rng, groups, true);
  write_file(path, data::serialize_samples(corpus));
  return corpus;
}

// Parses "key=value ..." floats out of one printed line.
std::vector<double> line_values(const std::string& text,
                                const std::string& prefix) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) != 0) continue;
    std::vector<double> vals;
    std::istringstream fields(line.substr(prefix.size()));
    std::string field;
    while (fields >> field) {
      const auto eq = field.find('=');
      if (eq != std::string::npos) {
        vals.push_back(std::stod(field.substr(eq + 1)));
      }
    }
    return vals;
  }
  return {};
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("eval --help").code == 0);
  CHECK(run_cli("").code == 2);                       // missing subcommand
  CHECK(run_cli("frobnicate").code == 2);             // unknown subcommand
  CHECK(run_cli("validate").code == 2);               // missing --samples
  CHECK(run_cli("moe-demo --conflict sideways").code == 2);
  CHECK(run_cli("simulate --samples x --out y --p-correct 1.5").code == 2);
}

TEST_CASE("missing input files exit two") {
  CHECK(run_cli("validate --samples " + path_in("absent.jsonl")).code == 2);
  CHECK(run_cli("simulate --samples " + path_in("absent.jsonl") + " --out " +
                path_in("r.jsonl"))
            .code == 2);
  CHECK(run_cli("moe-demo --checkpoint " + path_in("absent.ckpt")).code == 2);
}

TEST_CASE("validate") {
  const std::string clean = path_in("clean.jsonl");
  const auto corpus = write_corpus(clean, 3, 15);

  SUBCASE("clean corpus exits zero with a count") {
    const RunResult r = run_cli("validate --samples " + clean);
    CHECK(r.code == 0);
    CHECK(r.out == std::to_string(corpus.size()) + " samples OK\n");
  }

  SUBCASE("violations are listed with line numbers") {
    std::string text = data::serialize_samples({corpus[0]});
    text += "{\"schema_version\":\"1\"}\n";
    text += "not json at all\n";
    const std::string dirty = path_in("dirty.jsonl");
    write_file(dirty, text);

    const RunResult r = run_cli("validate --samples " + dirty);
    CHECK(r.code == 1);
    CHECK(r.out.find("line 2") != std::string::npos);
    CHECK(r.out.find("line 3") != std::string::npos);
    CHECK(r.out.find("2 violations") != std::string::npos);
  }
}

TEST_CASE("simulate") {
  const std::string samples = path_in("sim-samples.jsonl");
  const auto corpus = write_corpus(samples, 4, 20);

  SUBCASE("same seed gives identical files") {
    const std::string out_a = path_in("resp-a.jsonl");
    const std::string out_b = path_in("resp-b.jsonl");
    CHECK(run_cli("simulate --samples " + samples + " --out " + out_a +
                  " --seed 11 --p-correct 0.6 --p-halluc 0.3")
              .code == 0);
    CHECK(run_cli("simulate --samples " + samples + " --out " + out_b +
                  " --seed 11 --p-correct 0.6 --p-halluc 0.3")
              .code == 0);
    const std::string text = read_file(out_a);
    CHECK(text == read_file(out_b));
    CHECK(!text.empty());
  }

  SUBCASE("p-correct one answers every question correctly") {
    const std::string out = path_in("resp-correct.jsonl");
    CHECK(run_cli("simulate --samples " + samples + " --out " + out +
                  " --seed 3")
              .code == 0);
    std::ifstream in(out);
    const auto records = data::parse_records(in);
    REQUIRE(records.size() == corpus.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(records[i].sample_id == corpus[i].sample_id);
      CHECK(records[i].prediction == corpus[i].ground_truth);
      CHECK(records[i].option_probs.has_value());
    }
  }

  SUBCASE("no-probs strips the distributions") {
    const std::string out = path_in("resp-noprobs.jsonl");
    CHECK(run_cli("simulate --samples " + samples + " --out " + out +
                  " --seed 3 --no-probs")
              .code == 0);
    std::ifstream in(out);
    for (const auto& rec : data::parse_records(in)) {
      CHECK(!rec.option_probs.has_value());
    }
  }
}

TEST_CASE("eval") {
  const std::string samples = path_in("eval-samples.jsonl");
  write_corpus(samples, 5, 25);
  const std::string responses = path_in("eval-resp.jsonl");
  REQUIRE(run_cli("simulate --samples " + samples + " --out " + responses +
                  " --seed 2 --p-correct 1.0 --p-halluc 1.0")
              .code == 0);

  SUBCASE("json report carries the forced-hallucination identities") {
    const RunResult r = run_cli("eval --samples " + samples +
                                " --responses " + responses);
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("layer1").at("hrr").at("value").get<double>() == 0.0);
    CHECK(j.at("layer1").at("har").at("value").get<double>() == 1.0);
    CHECK(j.at("layer1").at("tib").at("value").get<double>() == 1.0);
    CHECK(j.at("layer1").at("vyr").at("value").get<double>() == 1.0);
    CHECK(j.at("layer1").at("icr").at("value").get<double>() == 1.0);
  }

  SUBCASE("table format renders the all-correct profile") {
    const std::string clean_resp = path_in("eval-clean-resp.jsonl");
    REQUIRE(run_cli("simulate --samples " + samples + " --out " + clean_resp +
                    " --seed 2")
                .code == 0);
    const RunResult r = run_cli("eval --samples " + samples + " --responses " +
                                clean_resp + " --format table");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("HRR") != std::string::npos);
    CHECK(r.out.find("100.0") != std::string::npos);
  }

  SUBCASE("reports are byte-identical across runs") {
    const std::string rep_a = path_in("rep-a.json");
    const std::string rep_b = path_in("rep-b.json");
    CHECK(run_cli("eval --samples " + samples + " --responses " + responses +
                  " --out " + rep_a)
              .code == 0);
    CHECK(run_cli("eval --samples " + samples + " --responses " + responses +
                  " --out " + rep_b)
              .code == 0);
    const std::string text = read_file(rep_a);
    CHECK(text == read_file(rep_b));
    CHECK(!text.empty());
  }

  SUBCASE("empty responses exit zero with undefined metrics") {
    const std::string empty = path_in("empty-resp.jsonl");
    write_file(empty, "");
    const RunResult r = run_cli("eval --samples " + samples +
                                " --responses " + empty);
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("overall").at("value").is_null());
    CHECK(!j.at("overall").at("reason").get<std::string>().empty());
  }

  SUBCASE("malformed responses exit one") {
    const std::string bad = path_in("bad-resp.jsonl");
    write_file(bad, "still not json\n");
    CHECK(run_cli("eval --samples " + samples + " --responses " + bad).code ==
          1);
  }
}

TEST_CASE("moe-demo") {
  SUBCASE("no conflict reports full consistency and gate-only routing") {
    const RunResult r = run_cli("moe-demo --conflict none --seed 5");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("consistency min=1.000000 mean=1.000000") !=
          std::string::npos);
    CHECK(r.out.find("gate_only true") != std::string::npos);
  }

  SUBCASE("expert shares sum to one") {
    const RunResult r =
        run_cli("moe-demo --conflict object --intensity 1.0 --seed 5");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("gate_only false") != std::string::npos);
    const auto shares = line_values(r.out, "expert_share ");
    REQUIRE(shares.size() == 4);
    double sum = 0.0;
    for (double s : shares) sum += s;
    CHECK(std::abs(sum - 1.0) < 1e-9);
    const auto cls = line_values(r.out, "cls_dist ");
    REQUIRE(cls.size() == 4);
    sum = 0.0;
    for (double c : cls) sum += c;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }

  SUBCASE("intensity zero plants nothing") {
    const RunResult r =
        run_cli("moe-demo --conflict object --intensity 0.0 --seed 5");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("gate_only true") != std::string::npos);
  }
}

TEST_CASE("train-toy") {
  const std::string dims =
      " --d 8 --patches 4 --k 2 --depth 2 --insert-layer 1 --hidden 3 "
      "--query-tokens 2";

  SUBCASE("steps zero keeps the initialization") {
    const std::string out = path_in("init.ckpt");
    const RunResult r = run_cli("train-toy --steps 0 --train-n 4 --eval-n 2" +
                                dims + " --out " + out);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("steps=0") != std::string::npos);
    const moe::Checkpoint ckpt = moe::load_checkpoint(out);
    CHECK(ckpt.config.d == 8);
    CHECK(ckpt.config.seed == 42);
    CHECK(ckpt.params == moe::init_params(ckpt.config));
  }

  SUBCASE("identical flags give byte-identical outputs") {
    const std::string flags = "train-toy --steps 3 --lr 0.01 --batch 2 "
                              "--train-n 6 --eval-n 2 --warmup 2" +
                              dims;
    const std::string ck_a = path_in("toy-a.ckpt");
    const std::string ck_b = path_in("toy-b.ckpt");
    const std::string h_a = path_in("toy-a.history");
    const std::string h_b = path_in("toy-b.history");
    const RunResult ra =
        run_cli(flags + " --out " + ck_a + " --history " + h_a);
    const RunResult rb =
        run_cli(flags + " --out " + ck_b + " --history " + h_b);
    REQUIRE(ra.code == 0);
    REQUIRE(rb.code == 0);
    CHECK(read_file(ck_a) == read_file(ck_b));
    const std::string history = read_file(h_a);
    CHECK(history == read_file(h_b));
    CHECK(std::count(history.begin(), history.end(), '\n') == 4);

    // The stdout reports match except for the echoed output paths.
    const auto eval_a = line_values(ra.out, "eval ");
    const auto eval_b = line_values(rb.out, "eval ");
    REQUIRE(eval_a.size() == 3);
    CHECK(eval_a == eval_b);

    const moe::Checkpoint ckpt = moe::load_checkpoint(ck_a);
    CHECK(ckpt.params != moe::init_params(ckpt.config));
  }
}

TEST_CASE("gradcheck") {
  SUBCASE("default small model passes") {
    const RunResult r = run_cli("gradcheck");
    CHECK(r.code == 0);
    CHECK(r.out.find("pass") != std::string::npos);
    CHECK(r.out.find("leaf gate.w") != std::string::npos);
  }

  SUBCASE("corrupted analytic gradient fails naming the leaf") {
    const RunResult r = run_cli("gradcheck --corrupt cls.w");
    CHECK(r.code == 1);
    const auto tail = r.out.find("gradcheck entries=");
    REQUIRE(tail != std::string::npos);
    CHECK(r.out.find("fail", tail) != std::string::npos);
    CHECK(r.out.find("leaf cls.w") != std::string::npos);
    CHECK(r.out.find("FAIL") != std::string::npos);
  }

  SUBCASE("coarse step still reports") {
    const RunResult r = run_cli("gradcheck --h 1e-3");
    CHECK(r.out.find("gradcheck entries=") != std::string::npos);
  }
}
