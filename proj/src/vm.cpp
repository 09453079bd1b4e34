#include "ucov/vm.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ucov {

std::string_view event_kind_name(Event::Kind k) {
  switch (k) {
  case Event::Kind::MethodEnter: return "enter";
  case Event::Kind::MethodExit: return "exit";
  case Event::Kind::BlockEnter: return "block";
  case Event::Kind::StatementReached: return "stmt";
  case Event::Kind::VariableDefined: return "def";
  }
  return "?";
}

std::string format_event(const ProgramModule &module, const Event &e) {
  std::ostringstream os;
  os << e.seq << ' ' << event_kind_name(e.kind) << ' ' << module.functions.at(e.fn).name << ' '
     << e.frame;
  switch (e.kind) {
  case Event::Kind::MethodEnter:
    os << " (";
    for (std::size_t i = 0; i < e.args.size(); ++i)
      os << (i ? ", " : "") << format_value(e.args[i]);
    os << ")";
    break;
  case Event::Kind::MethodExit:
    break;
  case Event::Kind::BlockEnter:
  case Event::Kind::StatementReached: {
    os << " @+" << e.offset;
    const auto &ins = module.functions.at(e.fn).code.at(e.offset);
    if (ins.label)
      os << " @" << *ins.label;
    break;
  }
  case Event::Kind::VariableDefined:
    os << " @+" << e.offset << ' ' << format_varref(e.var) << " = " << format_value(e.value);
    break;
  }
  return os.str();
}

std::string_view runtime_error_name(RuntimeErrorKind k) {
  switch (k) {
  case RuntimeErrorKind::DivByZero: return "division by zero";
  case RuntimeErrorKind::Overflow: return "integer overflow";
  case RuntimeErrorKind::BadIndex: return "array index out of bounds";
  case RuntimeErrorKind::StepLimit: return "step limit exceeded";
  case RuntimeErrorKind::StackOverflow: return "call depth exceeded";
  }
  return "?";
}

bool InstrumentationPlan::empty() const {
  if (!variables.empty())
    return false;
  for (const auto &[name, fp] : functions)
    if (!fp.statements.empty() || fp.all_leaders || fp.report_entry)
      return false;
  return true;
}

bool InstrumentationPlan::selects(const ProgramModule &module, const Event &e) const {
  if (e.kind == Event::Kind::VariableDefined)
    return variables.count(e.var) != 0;
  auto it = functions.find(module.functions.at(e.fn).name);
  if (it == functions.end())
    return false;
  switch (e.kind) {
  case Event::Kind::MethodEnter:
  case Event::Kind::MethodExit: return it->second.report_entry;
  case Event::Kind::BlockEnter: return it->second.all_leaders;
  case Event::Kind::StatementReached: return it->second.statements.count(e.offset) != 0;
  default: return false;
  }
}

void InstrumentationPlan::merge(const InstrumentationPlan &other) {
  for (const auto &[name, fp] : other.functions) {
    auto &mine = functions[name];
    mine.statements.insert(fp.statements.begin(), fp.statements.end());
    mine.all_leaders = mine.all_leaders || fp.all_leaders;
    mine.report_entry = mine.report_entry || fp.report_entry;
  }
  variables.insert(other.variables.begin(), other.variables.end());
}

namespace {

Value zero_of(Type t) {
  switch (t) {
  case Type::Float: return 0.0;
  case Type::Bool: return false;
  default: return std::int64_t{0};
  }
}

// Per-function data resolved once per run.
struct PreparedFunction {
  std::vector<Type> slot_types;              // params then locals
  std::vector<std::int32_t> operand;         // slot / global / array / callee index
  std::vector<char> is_leader;
  // plan masks
  std::vector<char> report_stmt;
  std::vector<char> report_def;
  bool report_blocks = false;
  bool report_entry = false;
};

struct Frame {
  std::uint32_t fn = 0;
  std::uint64_t id = 0;
  std::uint32_t pc = 0;
  std::uint32_t last_block = 0;
  std::vector<Value> locals;
  std::vector<Value> stack;
};

struct Fault {
  RuntimeErrorKind kind;
};

class Machine {
public:
  Machine(const ProgramModule &module, const InstrumentationPlan &plan, EventSink *sink,
          bool record, const RunLimits &limits)
      : module_(module), sink_(sink), record_(record), limits_(limits) {
    prepare(plan);
  }

  RunResult run(const RunInput &input) {
    RunResult result;
    const Function *entry = module_.find_function(input.entry);
    if (!entry)
      throw Error(ErrorKind::Usage, "unknown entry function '" + input.entry + "'");
    if (entry->params.size() != input.args.size())
      throw Error(ErrorKind::Usage, "'" + input.entry + "' expects " +
                                        std::to_string(entry->params.size()) + " argument(s)");
    for (std::size_t i = 0; i < input.args.size(); ++i)
      if (type_of(input.args[i]) != entry->params[i].type)
        throw Error(ErrorKind::Usage, "argument " + std::to_string(i + 1) + " of '" + input.entry +
                                          "' must be " + std::string(type_name(entry->params[i].type)));
    init_globals(input.sets);
    for (std::size_t g = 0; g < module_.globals.size(); ++g)
      result.initial_globals.emplace(module_.globals[g].name, globals_[g]);
    if (sink_)
      sink_->on_start(result.initial_globals);

    const auto entry_index = static_cast<std::uint32_t>(entry - module_.functions.data());
    try {
      push_frame(entry_index, input.args);
      execute(result);
    } catch (const Fault &f) {
      result.outcome = RunResult::Outcome::Errored;
      result.error = f.kind;
      if (!frames_.empty()) {
        result.error_fn = module_.functions[frames_.back().fn].name;
        result.error_offset = frames_.back().pc;
      }
    }
    result.event_count = delivered_;
    result.last_seq = seq_;
    result.trace = std::move(trace_);
    return result;
  }

private:
  void prepare(const InstrumentationPlan &plan) {
    prepared_.resize(module_.functions.size());
    for (std::size_t f = 0; f < module_.functions.size(); ++f) {
      const Function &fn = module_.functions[f];
      PreparedFunction &p = prepared_[f];
      std::vector<std::string> slot_names;
      for (const auto *vars : {&fn.params, &fn.locals})
        for (const auto &v : *vars) {
          slot_names.push_back(v.name);
          p.slot_types.push_back(v.type);
        }
      const auto n = fn.code.size();
      p.operand.assign(n, -1);
      p.is_leader.assign(n, 0);
      p.report_stmt.assign(n, 0);
      p.report_def.assign(n, 0);
      for (auto l : leaders(fn))
        p.is_leader[l] = 1;
      auto fp = plan.functions.find(fn.name);
      if (fp != plan.functions.end()) {
        p.report_blocks = fp->second.all_leaders;
        p.report_entry = fp->second.report_entry;
        for (auto off : fp->second.statements)
          if (off < n)
            p.report_stmt[off] = 1;
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto &ins = fn.code[i];
        auto index_of = [](const auto &vec, const std::string &name) {
          for (std::size_t k = 0; k < vec.size(); ++k)
            if (vec[k].name == name)
              return static_cast<std::int32_t>(k);
          return std::int32_t{-1};
        };
        switch (opcode_info(ins.op).operand) {
        case OperandKind::Local:
          for (std::size_t k = 0; k < slot_names.size(); ++k)
            if (slot_names[k] == ins.name)
              p.operand[i] = static_cast<std::int32_t>(k);
          break;
        case OperandKind::Global: p.operand[i] = index_of(module_.globals, ins.name); break;
        case OperandKind::Array: p.operand[i] = index_of(module_.arrays, ins.name); break;
        case OperandKind::Callee: p.operand[i] = index_of(module_.functions, ins.name); break;
        default: break;
        }
        if (is_definition(ins.op)) {
          auto var = referenced_var(fn, ins);
          p.report_def[i] = plan.variables.count(*var) ? 1 : 0;
        }
      }
    }
  }

  void init_globals(const std::vector<GlobalAssign> &sets) {
    globals_.clear();
    for (const auto &g : module_.globals)
      globals_.push_back(g.init);
    arrays_.clear();
    for (const auto &a : module_.arrays)
      arrays_.emplace_back(a.length, zero_of(a.elem));
    for (const auto &s : sets) {
      if (s.index) {
        const GlobalArray *a = module_.find_array(s.name);
        if (!a)
          throw Error(ErrorKind::Usage, "set: unknown array '" + s.name + "'");
        if (*s.index >= a->length)
          throw Error(ErrorKind::Usage, "set: index out of bounds for '" + s.name + "'");
        if (type_of(s.value) != a->elem)
          throw Error(ErrorKind::Usage, "set: wrong element type for '" + s.name + "'");
        arrays_[static_cast<std::size_t>(a - module_.arrays.data())][*s.index] = s.value;
      } else {
        const GlobalScalar *g = module_.find_global(s.name);
        if (!g)
          throw Error(ErrorKind::Usage, "set: unknown global '" + s.name + "'");
        if (type_of(s.value) != g->type)
          throw Error(ErrorKind::Usage, "set: wrong type for '" + s.name + "'");
        globals_[static_cast<std::size_t>(g - module_.globals.data())] = s.value;
      }
    }
  }

  // Assigns the next seq; builds and delivers the event only when needed.
  template <typename Fill>
  void emit(bool selected, Event::Kind kind, std::uint32_t fn, std::uint64_t frame,
            std::uint32_t offset, Fill &&fill) {
    ++seq_;
    if (!selected && !record_)
      return;
    Event e;
    e.kind = kind;
    e.seq = seq_;
    e.fn = fn;
    e.frame = frame;
    e.offset = offset;
    fill(e);
    if (record_)
      trace_.push_back(e);
    if (selected && sink_) {
      sink_->on_event(e);
      ++delivered_;
    }
  }
  void emit_simple(bool selected, Event::Kind kind, std::uint32_t fn, std::uint64_t frame,
                   std::uint32_t offset) {
    emit(selected, kind, fn, frame, offset, [](Event &) {});
  }

  void push_frame(std::uint32_t fn, std::vector<Value> args) {
    if (frames_.size() >= limits_.max_depth)
      throw Fault{RuntimeErrorKind::StackOverflow};
    Frame fr;
    fr.fn = fn;
    fr.id = ++next_frame_;
    const auto &p = prepared_[fn];
    fr.locals.reserve(p.slot_types.size());
    for (std::size_t k = 0; k < p.slot_types.size(); ++k)
      fr.locals.push_back(k < args.size() ? args[k] : zero_of(p.slot_types[k]));
    emit(p.report_entry, Event::Kind::MethodEnter, fn, fr.id, 0,
         [&](Event &e) { e.args = args; });
    frames_.push_back(std::move(fr));
  }

  static std::int64_t as_int(const Value &v) { return std::get<std::int64_t>(v); }
  static double as_float(const Value &v) { return std::get<double>(v); }
  static bool as_bool(const Value &v) { return std::get<bool>(v); }

  void execute(RunResult &result) {
    std::uint64_t steps = 0;
    while (true) {
      Frame &fr = frames_.back();
      const Function &fn = module_.functions[fr.fn];
      const PreparedFunction &p = prepared_[fr.fn];
      const std::uint32_t pc = fr.pc;
      const Instruction &ins = fn.code[pc];
      if (++steps > limits_.max_steps)
        throw Fault{RuntimeErrorKind::StepLimit};

      if (p.is_leader[pc]) {
        fr.last_block = pc;
        emit_simple(p.report_blocks, Event::Kind::BlockEnter, fr.fn, fr.id, pc);
      }
      emit_simple(p.report_stmt[pc] != 0, Event::Kind::StatementReached, fr.fn, fr.id, pc);

      auto &st = fr.stack;
      auto pop = [&st]() {
        Value v = st.back();
        st.pop_back();
        return v;
      };
      std::uint32_t next = pc + 1;

      switch (ins.op) {
      case Opcode::ConstI: st.emplace_back(ins.int_imm); break;
      case Opcode::ConstF: st.emplace_back(ins.float_imm); break;
      case Opcode::ConstB: st.emplace_back(ins.bool_imm); break;
      case Opcode::Load: st.push_back(fr.locals[p.operand[pc]]); break;
      case Opcode::GLoad: st.push_back(globals_[p.operand[pc]]); break;
      case Opcode::Store: {
        Value v = pop();
        fr.locals[p.operand[pc]] = v;
        define(p, fr, pc, fn, ins, v);
        break;
      }
      case Opcode::GStore: {
        Value v = pop();
        globals_[p.operand[pc]] = v;
        define(p, fr, pc, fn, ins, v);
        break;
      }
      case Opcode::ALoad: {
        auto idx = as_int(pop());
        auto &arr = arrays_[p.operand[pc]];
        if (idx < 0 || static_cast<std::uint64_t>(idx) >= arr.size())
          throw Fault{RuntimeErrorKind::BadIndex};
        st.push_back(arr[static_cast<std::size_t>(idx)]);
        break;
      }
      case Opcode::AStore: {
        Value v = pop();
        auto idx = as_int(pop());
        auto &arr = arrays_[p.operand[pc]];
        if (idx < 0 || static_cast<std::uint64_t>(idx) >= arr.size())
          throw Fault{RuntimeErrorKind::BadIndex};
        arr[static_cast<std::size_t>(idx)] = v;
        define(p, fr, pc, fn, ins, v);
        break;
      }
      case Opcode::AddI: case Opcode::SubI: case Opcode::MulI: case Opcode::DivI: case Opcode::ModI: {
        auto b = as_int(pop());
        auto a = as_int(pop());
        st.emplace_back(int_arith(ins.op, a, b));
        break;
      }
      case Opcode::AddF: case Opcode::SubF: case Opcode::MulF: case Opcode::DivF: {
        auto b = as_float(pop());
        auto a = as_float(pop());
        double r = 0;
        switch (ins.op) {
        case Opcode::AddF: r = a + b; break;
        case Opcode::SubF: r = a - b; break;
        case Opcode::MulF: r = a * b; break;
        default:
          if (b == 0.0)
            throw Fault{RuntimeErrorKind::DivByZero};
          r = a / b;
          break;
        }
        st.emplace_back(r);
        break;
      }
      case Opcode::NegI: {
        auto a = as_int(pop());
        if (a == std::numeric_limits<std::int64_t>::min())
          throw Fault{RuntimeErrorKind::Overflow};
        st.emplace_back(-a);
        break;
      }
      case Opcode::NegF: st.emplace_back(-as_float(pop())); break;
      case Opcode::CmpEqI: case Opcode::CmpNeI: case Opcode::CmpLtI:
      case Opcode::CmpLeI: case Opcode::CmpGtI: case Opcode::CmpGeI: {
        auto b = as_int(pop());
        auto a = as_int(pop());
        st.emplace_back(compare(ins.op, a, b));
        break;
      }
      case Opcode::CmpEqF: case Opcode::CmpNeF: case Opcode::CmpLtF:
      case Opcode::CmpLeF: case Opcode::CmpGtF: case Opcode::CmpGeF: {
        auto b = as_float(pop());
        auto a = as_float(pop());
        st.emplace_back(compare(ins.op, a, b));
        break;
      }
      case Opcode::CmpEqB: case Opcode::CmpNeB: {
        auto b = as_bool(pop());
        auto a = as_bool(pop());
        st.emplace_back(ins.op == Opcode::CmpEqB ? a == b : a != b);
        break;
      }
      case Opcode::Not: st.emplace_back(!as_bool(pop())); break;
      case Opcode::I2F: st.emplace_back(static_cast<double>(as_int(pop()))); break;
      case Opcode::F2I: {
        double d = std::trunc(as_float(pop()));
        if (!std::isfinite(d) || d < -9.2233720368547758e18 || d >= 9.2233720368547758e18)
          throw Fault{RuntimeErrorKind::Overflow};
        st.emplace_back(static_cast<std::int64_t>(d));
        break;
      }
      case Opcode::Brt:
        if (as_bool(pop()))
          next = ins.target;
        break;
      case Opcode::Brf:
        if (!as_bool(pop()))
          next = ins.target;
        break;
      case Opcode::Jmp: next = ins.target; break;
      case Opcode::Call: {
        auto callee = static_cast<std::uint32_t>(p.operand[pc]);
        const auto arity = module_.functions[callee].params.size();
        std::vector<Value> args(st.end() - static_cast<std::ptrdiff_t>(arity), st.end());
        st.resize(st.size() - arity);
        const std::size_t caller = frames_.size() - 1;
        push_frame(callee, std::move(args));
        frames_[caller].pc = next; // resume point
        continue;
      }
      case Opcode::Intr: {
        if (ins.name == "print") {
          pop();
        } else {
          double a = as_float(pop());
          st.emplace_back(ins.name == "log" ? std::log(a) : std::sqrt(a));
        }
        break;
      }
      case Opcode::Ret: {
        std::optional<Value> rv;
        if (fn.ret != Type::Void)
          rv = pop();
        emit_simple(p.report_entry, Event::Kind::MethodExit, fr.fn, fr.id, pc);
        frames_.pop_back();
        if (frames_.empty()) {
          result.outcome = RunResult::Outcome::Returned;
          result.value = rv;
          return;
        }
        if (rv)
          frames_.back().stack.push_back(*rv);
        continue;
      }
      }
      fr.pc = next;
    }
  }

  void define(const PreparedFunction &p, const Frame &fr, std::uint32_t pc, const Function &fn,
              const Instruction &ins, const Value &v) {
    emit(p.report_def[pc] != 0, Event::Kind::VariableDefined, fr.fn, fr.id, pc, [&](Event &e) {
      e.var = *referenced_var(fn, ins);
      e.value = v;
    });
  }

  static std::int64_t int_arith(Opcode op, std::int64_t a, std::int64_t b) {
    std::int64_t r = 0;
    switch (op) {
    case Opcode::AddI:
      if (__builtin_add_overflow(a, b, &r)) throw Fault{RuntimeErrorKind::Overflow};
      return r;
    case Opcode::SubI:
      if (__builtin_sub_overflow(a, b, &r)) throw Fault{RuntimeErrorKind::Overflow};
      return r;
    case Opcode::MulI:
      if (__builtin_mul_overflow(a, b, &r)) throw Fault{RuntimeErrorKind::Overflow};
      return r;
    case Opcode::DivI:
      if (b == 0) throw Fault{RuntimeErrorKind::DivByZero};
      if (a == std::numeric_limits<std::int64_t>::min() && b == -1)
        throw Fault{RuntimeErrorKind::Overflow};
      return a / b;
    default:
      if (b == 0) throw Fault{RuntimeErrorKind::DivByZero};
      if (b == -1) return 0;
      return a % b;
    }
  }

  template <typename T>
  static bool compare(Opcode op, T a, T b) {
    switch (op) {
    case Opcode::CmpEqI: case Opcode::CmpEqF: return a == b;
    case Opcode::CmpNeI: case Opcode::CmpNeF: return a != b;
    case Opcode::CmpLtI: case Opcode::CmpLtF: return a < b;
    case Opcode::CmpLeI: case Opcode::CmpLeF: return a <= b;
    case Opcode::CmpGtI: case Opcode::CmpGtF: return a > b;
    default: return a >= b;
    }
  }

  const ProgramModule &module_;
  EventSink *sink_;
  bool record_;
  RunLimits limits_;
  std::vector<PreparedFunction> prepared_;
  std::vector<Value> globals_;
  std::vector<std::vector<Value>> arrays_;
  std::vector<Frame> frames_;
  std::vector<Event> trace_;
  std::uint64_t seq_ = 0;
  std::uint64_t next_frame_ = 0;
  std::uint64_t delivered_ = 0;
};

} // namespace

RunResult run(const ProgramModule &module, const RunInput &input, const InstrumentationPlan &plan,
              EventSink *sink, bool record_trace, const RunLimits &limits) {
  Machine m(module, plan, sink, record_trace, limits);
  return m.run(input);
}

} // namespace ucov
