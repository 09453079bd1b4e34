#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <sstream>

#include <unistd.h>

#include "cli.hpp"

namespace ucov::testing {

namespace fs = std::filesystem;

std::string fixture_path(const std::string &rel) { return std::string(UCOV_FIXTURES) + "/" + rel; }

std::string read_text(const std::string &path) { return cli::read_file(path); }

ProgramModule load_fixture(const std::string &rel) { return cli::load_program(fixture_path(rel)); }

ReqSet load_reqs(const std::string &rel, const ProgramModule &m) {
  return validate(parse_reqs(cli::read_file(fixture_path(rel))), m);
}

std::vector<TestSpec> load_tests(const std::string &rel) {
  return parse_tests(cli::read_file(fixture_path(rel)));
}

std::vector<std::string> all_program_fixtures() {
  std::vector<std::string> out;
  for (const auto &e : fs::recursive_directory_iterator(UCOV_FIXTURES))
    if (e.is_regular_file() && e.path().extension() == ".mls")
      out.push_back(fs::relative(e.path(), UCOV_FIXTURES).string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> corpus_pairs() {
  std::vector<std::string> out;
  for (const auto &e : fs::directory_iterator(fixture_path("corpus")))
    if (e.is_directory())
      out.push_back("corpus/" + e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

ProgramModule strip_labels(ProgramModule m) {
  for (auto &fn : m.functions)
    for (auto &ins : fn.code)
      ins.label.reset();
  return m;
}

CliResult run_cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string temp_path(const std::string &name) {
  static std::atomic<int> counter{0};
  fs::path dir = fs::temp_directory_path() / ("ucov-test-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return (dir / (std::to_string(counter++) + "-" + name)).string();
}

} // namespace ucov::testing
