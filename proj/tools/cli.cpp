#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "ucov/asm.hpp"
#include "ucov/bdt.hpp"
#include "ucov/crossref.hpp"
#include "ucov/matcher.hpp"
#include "ucov/minilang.hpp"
#include "ucov/requirements.hpp"
#include "ucov/suite.hpp"

namespace ucov::cli {

namespace fs = std::filesystem;

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::Io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void write_file(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text))
    throw Error(ErrorKind::Io, "cannot write '" + path + "'");
}

// Prefixes errors from a file with its path.
template <typename F>
auto from_file(const std::string &path, F &&f) -> decltype(f(std::string())) {
  std::string text = read_file(path);
  try {
    return f(text);
  } catch (const Error &e) {
    throw Error(e.kind(), path + ": " + e.message(), e.line(), e.column());
  }
}

void emit(const std::string &path, const std::string &text, std::ostream &out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_file(path, text);
}

struct Common {
  std::string program, reqs, tests, format = "text";
  std::vector<std::string> elements;
  bool record = false;
};

SuiteResult run_check(const Common &c) {
  ProgramModule m = load_program(c.program);
  ReqSet reqs = from_file(c.reqs, [&](const std::string &t) { return validate(parse_reqs(t), m); });
  auto tests = from_file(c.tests, [](const std::string &t) { return parse_tests(t); });
  SuiteOptions opts;
  opts.element_functions = c.elements;
  opts.record_trace = c.record;
  return run_suite(m, reqs, tests, opts);
}

} // namespace

ProgramModule load_program(const std::string &path) {
  const std::string ext = fs::path(path).extension().string();
  return from_file(path, [&](const std::string &text) {
    if (ext == ".mls")
      return minilang::compile_source(text);
    if (ext == ".uasm")
      return assemble(text);
    return load_module(text);
  });
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"ucov: behavioral coverage over StackIR programs"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string input, output;
  auto *compile = app.add_subcommand("compile", "compile MiniLang source to a .ubc module");
  compile->add_option("source", input, "MiniLang source (.mls)")->required();
  compile->add_option("-o", output, "output module (default: source with .ubc)");

  auto *assemble_cmd = app.add_subcommand("asm", "assemble StackIR text to a .ubc module");
  assemble_cmd->add_option("source", input, "assembly (.uasm)")->required();
  assemble_cmd->add_option("-o", output, "output module (default: source with .ubc)");

  auto *disasm = app.add_subcommand("disasm", "print a module as assembly");
  disasm->add_option("program", input, "module")->required();
  disasm->add_option("-o", output, "output file (default: stdout)");

  std::string function;
  auto *bdt = app.add_subcommand("bdt", "dump bytecode dependence trees");
  bdt->add_option("program", input, "module")->required();
  bdt->add_option("--function,-f", function, "function (default: all)");

  std::string call, test_name;
  auto *trace = app.add_subcommand("trace", "print the full event trace of one run");
  trace->add_option("program", input, "module")->required();
  trace->add_option("call", call, "call such as 'f(1, true)', or a .ut file")->required();
  trace->add_option("--test", test_name, "test name when a .ut file is given");

  Common common;
  auto add_common = [&](CLI::App *cmd) {
    cmd->add_option("program", common.program, "module")->required();
    cmd->add_option("requirements", common.reqs, "requirements (.ucr)")->required();
    cmd->add_option("tests", common.tests, "test suite (.ut)")->required();
    cmd->add_option("--format", common.format, "text or json")
        ->check(CLI::IsMember({"text", "json"}));
    cmd->add_option("--elements", common.elements, "functions whose statements and branches get rows");
    cmd->add_flag("--record-trace", common.record, "record full traces and cross-check the oracle");
  };
  auto *check = app.add_subcommand("check", "run tests and verify requirements");
  add_common(check);
  auto *report = app.add_subcommand("report", "coverage matrix of tests against requirements");
  add_common(report);

  std::string old_prog, new_prog, reqs_path, resolve;
  auto *map = app.add_subcommand("map", "migrate requirements to a new program version");
  map->add_option("old", old_prog, "old module")->required();
  map->add_option("new", new_prog, "new module")->required();
  map->add_option("requirements", reqs_path, "requirements of the old version")->required();
  map->add_option("--resolve", resolve, "resolutions for ambiguous mappings");
  map->add_option("-o", output, "migrated requirements (default: stdout)");

  std::vector<std::string> argv_store{"ucov"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char *> argv;
  for (auto &a : argv_store)
    argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*compile || *assemble_cmd) {
      ProgramModule m = load_program(input);
      if (output.empty())
        output = fs::path(input).replace_extension(".ubc").string();
      write_file(output, save_module(m));
      return 0;
    }
    if (*disasm) {
      emit(output, disassemble(load_program(input)), out);
      return 0;
    }
    if (*bdt) {
      ProgramModule m = load_program(input);
      if (!function.empty() && !m.find_function(function))
        throw Error(ErrorKind::UnknownFunction, "unknown function '" + function + "'");
      for (const auto &fn : m.functions) {
        if (!function.empty() && fn.name != function)
          continue;
        out << "fn " << fn.name << "\n" << format_bdt(fn, build_bdt(m, fn));
      }
      return 0;
    }
    if (*trace) {
      ProgramModule m = load_program(input);
      TestSpec spec;
      if (fs::path(call).extension() == ".ut") {
        auto tests = from_file(call, [](const std::string &t) { return parse_tests(t); });
        auto it = std::find_if(tests.begin(), tests.end(), [&](const TestSpec &t) {
          return test_name.empty() || t.name == test_name;
        });
        if (it == tests.end())
          throw Error(ErrorKind::Usage, "no test '" + test_name + "' in '" + call + "'");
        spec = *it;
      } else {
        spec = parse_call(call);
      }
      RunResult r = ucov::run(m, {spec.entry, spec.args, spec.sets}, {}, nullptr, true);
      for (const auto &e : r.trace)
        out << format_event(m, e) << "\n";
      if (r.outcome == RunResult::Outcome::Errored)
        out << "# errored: " << runtime_error_name(r.error) << " at " << r.error_fn << "@+"
            << r.error_offset << "\n";
      else
        out << "# returned " << (r.value ? format_value(*r.value) : "void") << "\n";
      return 0;
    }
    if (*check || *report) {
      SuiteResult r = run_check(common);
      if (common.format == "json")
        out << render_json(r);
      else if (*check)
        out << render_check_text(r);
      else
        out << render_matrix(r.report);
      if (*report)
        return 0;
      for (const auto &t : r.tests)
        if (t.oracle_agrees && !*t.oracle_agrees) {
          err << "error: online matcher and oracle disagree on test '" << t.name << "'\n";
          return 1;
        }
      if (!r.all_pass())
        return 1;
      return r.uncovered().empty() ? 0 : 2;
    }
    if (*map) {
      ProgramModule om = load_program(old_prog);
      ProgramModule nm = load_program(new_prog);
      ReqSet reqs =
          from_file(reqs_path, [&](const std::string &t) { return validate(parse_reqs(t), om); });
      Resolutions res;
      if (!resolve.empty()) {
        res = from_file(resolve, [](const std::string &t) { return parse_resolutions(t); });
        check_resolutions(res, nm);
      }
      Migration mig = migrate(reqs, om, nm, res);
      emit(output, format_reqs(mig.reqs), out);
      for (const auto &i : mig.issues)
        err << format_issue(i) << "\n";
      return mig.issues.empty() ? 0 : 2;
    }
  } catch (const Error &e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

} // namespace ucov::cli
