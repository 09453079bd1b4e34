#pragma once

#include <string>
#include <vector>

#include "ucov/ir.hpp"
#include "ucov/requirements.hpp"
#include "ucov/suite.hpp"

namespace ucov::testing {

std::string fixture_path(const std::string &rel);
std::string read_text(const std::string &path);
ProgramModule load_fixture(const std::string &rel);
ReqSet load_reqs(const std::string &rel, const ProgramModule &m);
std::vector<TestSpec> load_tests(const std::string &rel);

/// Every compiled `.mls` fixture, as paths relative to the fixture root.
std::vector<std::string> all_program_fixtures();
/// Version-pair directories of the label corpus, sorted.
std::vector<std::string> corpus_pairs();

ProgramModule strip_labels(ProgramModule m);

struct CliResult {
  int code = 0;
  std::string out, err;
};
/// Runs the CLI in-process.
CliResult run_cli(const std::vector<std::string> &args);

/// Fresh path under the system temp directory.
std::string temp_path(const std::string &name);

} // namespace ucov::testing
